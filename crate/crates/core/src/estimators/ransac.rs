use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{check_count, ModelClass, PointCorrespondence, Transform};
use crate::error::{Error, Result};
use crate::metrics::{reprojection_error, ErrorStats};

/// Rounds of refit-and-reclassify after consensus is found.
const MAX_REFIT_ROUNDS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RansacConfig {
    /// Per-point reprojection distance (mm) below which a pair is an inlier.
    pub inlier_threshold: f64,
    pub max_iterations: usize,
    /// Consensus fraction in (0, 1] required for success.
    pub min_inlier_fraction: f64,
    pub seed: u64,
}

impl Default for RansacConfig {
    fn default() -> Self {
        Self {
            inlier_threshold: 5.0,
            max_iterations: 500,
            min_inlier_fraction: 0.5,
            seed: 0,
        }
    }
}

impl RansacConfig {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.inlier_threshold > 0.0) {
            return Err(Error::InvalidConfig("inlier threshold must be positive".into()));
        }
        if self.max_iterations < 1 {
            return Err(Error::InvalidConfig("max_iterations must be at least 1".into()));
        }
        if !(self.min_inlier_fraction > 0.0 && self.min_inlier_fraction <= 1.0) {
            return Err(Error::InvalidConfig("min_inlier_fraction must lie in (0, 1]".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimationResult {
    pub transform: Transform,
    pub inlier_mask: Vec<bool>,
    /// Reprojection statistics over the inliers.
    pub train_residual: ErrorStats,
}

impl EstimationResult {
    pub fn inlier_count(&self) -> usize {
        self.inlier_mask.iter().filter(|b| **b).count()
    }
}

struct Consensus {
    mask: Vec<bool>,
    count: usize,
    mean_error: f64,
}

impl Consensus {
    fn beats(&self, other: &Consensus) -> bool {
        self.count > other.count || (self.count == other.count && self.mean_error < other.mean_error)
    }
}

fn classify(t: &Transform, cs: &[PointCorrespondence], threshold: f64) -> Consensus {
    let mut mask = Vec::with_capacity(cs.len());
    let (mut count, mut sum) = (0usize, 0.0);
    for c in cs {
        let inlier = match t.apply(&c.q) {
            Ok(p) => {
                let e = (c.p - p).norm();
                let ok = e < threshold;
                if ok {
                    sum += e;
                }
                ok
            }
            Err(_) => false,
        };
        count += inlier as usize;
        mask.push(inlier);
    }
    Consensus {
        mask,
        count,
        mean_error: if count > 0 { sum / count as f64 } else { f64::INFINITY },
    }
}

fn select(cs: &[PointCorrespondence], mask: &[bool]) -> Vec<PointCorrespondence> {
    cs.iter().zip(mask).filter(|(_, m)| **m).map(|(c, _)| *c).collect()
}

/// Random sample consensus around the estimator of `model`.
///
/// Minimal subsets are drawn from a generator seeded by `cfg.seed`; the
/// consensus-maximal model (ties to lower mean inlier error) is refit on its
/// inliers, which are then reclassified against the refit model until the
/// set stops changing. Inlier-only refit; outliers carry no weight.
pub fn ransac_estimate(cs: &[PointCorrespondence], model: ModelClass, cfg: &RansacConfig) -> Result<EstimationResult> {
    cfg.validate()?;
    check_count(cs, model)?;
    let k = model.min_samples();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut best: Option<Consensus> = None;
    let mut last_err = None;
    let mut sample = Vec::with_capacity(k);

    for _ in 0..cfg.max_iterations {
        sample.clear();
        sample.extend(index::sample(&mut rng, cs.len(), k).into_iter().map(|i| cs[i]));
        let t = match model.estimate(&sample) {
            Ok(t) => t,
            Err(e) => {
                last_err = Some(e);
                continue;
            }
        };
        let c = classify(&t, cs, cfg.inlier_threshold);
        if best.as_ref().is_none_or(|b| c.beats(b)) {
            best = Some(c);
        }
        // The refit depends only on the mask, so full consensus is final.
        if best.as_ref().is_some_and(|b| b.count == cs.len()) {
            break;
        }
    }

    let Some(best) = best else {
        return Err(last_err.unwrap_or(Error::NoConsensus {
            best_fraction: 0.0,
            required: cfg.min_inlier_fraction,
        }));
    };
    let fraction = best.count as f64 / cs.len() as f64;
    if fraction < cfg.min_inlier_fraction || best.count < k {
        return Err(Error::NoConsensus {
            best_fraction: fraction,
            required: cfg.min_inlier_fraction,
        });
    }

    let mut mask = best.mask;
    let mut transform = model.estimate(&select(cs, &mask))?;
    for _ in 0..MAX_REFIT_ROUNDS {
        let next = classify(&transform, cs, cfg.inlier_threshold);
        if next.mask == mask || next.count < k {
            break;
        }
        match model.estimate(&select(cs, &next.mask)) {
            Ok(t) => {
                transform = t;
                mask = next.mask;
            }
            Err(_) => break,
        }
    }

    let train_residual = reprojection_error(&transform, &select(cs, &mask))?;
    Ok(EstimationResult {
        transform,
        inlier_mask: mask,
        train_residual,
    })
}
