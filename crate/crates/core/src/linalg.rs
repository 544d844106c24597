//! Dense SVD on nalgebra matrices, computed by faer.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub(crate) struct Svd {
    pub u: DMatrix<f64>,
    /// Nonincreasing.
    pub singular_values: DVector<f64>,
    pub v: DMatrix<f64>,
}

impl Svd {
    pub fn condition(&self) -> f64 {
        let s = &self.singular_values;
        let (max, min) = (s[0], s[s.len() - 1]);
        if min > 0.0 {
            max / min
        } else {
            f64::INFINITY
        }
    }

    /// Minimum-norm least-squares solution of `A x = b` over the nonzero
    /// singular values.
    pub fn solve(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        let utb = self.u.transpose() * b;
        let mut scaled = utb;
        for (i, s) in self.singular_values.iter().enumerate() {
            let inv = if *s > 0.0 { 1.0 / s } else { 0.0 };
            scaled.row_mut(i).scale_mut(inv);
        }
        &self.v * scaled
    }
}

/// Thin SVD for `rows >= cols`; full SVD otherwise, so `v` is always square.
pub(crate) fn svd(m: &DMatrix<f64>) -> Result<Svd> {
    let (rows, cols) = m.shape();
    let fm = faer::Mat::<f64>::from_fn(rows, cols, |i, j| m[(i, j)]);
    let err = |e| Error::InvalidConfig(format!("svd did not converge: {e:?}"));
    let (u, s, v) = if rows >= cols {
        let d = fm.thin_svd().map_err(err)?;
        (d.U().to_owned(), d.S().column_vector().to_owned(), d.V().to_owned())
    } else {
        let d = fm.svd().map_err(err)?;
        (d.U().to_owned(), d.S().column_vector().to_owned(), d.V().to_owned())
    };
    Ok(Svd {
        u: DMatrix::from_fn(u.nrows(), u.ncols(), |i, j| u[(i, j)]),
        singular_values: DVector::from_fn(s.nrows(), |i, _| s[i]),
        v: DMatrix::from_fn(v.nrows(), v.ncols(), |i, j| v[(i, j)]),
    })
}
