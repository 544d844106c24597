//! Tracker pose stream: 48-byte UDP packets and a latest-value store.
//!
//! Packet layout, little-endian:
//!
//! | bytes  | field                                   |
//! |--------|-----------------------------------------|
//! | 0..4   | magic `TRKP`                            |
//! | 4..8   | marker id, u32                          |
//! | 8..16  | timestamp, µs, u64                      |
//! | 16..44 | f32 `w, x, y, z, tx, ty, tz` (mm)       |
//! | 44..48 | zero padding                            |

use std::collections::HashMap;
use std::fs;
use std::io;
use std::net::{SocketAddr, ToSocketAddrs, UdpSocket};
use std::path::Path;
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::{Arc, RwLock};
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant};

use nalgebra::Vector3;

use crate::error::{Error, Result};
use crate::geometry::{RigidTransform, UnitQuaternion};

pub const PACKET_LEN: usize = 48;
pub const MAGIC: [u8; 4] = *b"TRKP";
pub const DEFAULT_PORT: u16 = 14514;
/// Accepted deviation of the wire quaternion norm from 1.
pub const UNIT_NORM_TOL: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackedPose {
    pub marker_id: u32,
    pub timestamp_us: u64,
    pub pose: RigidTransform,
}

pub fn encode_packet(p: &TrackedPose) -> [u8; PACKET_LEN] {
    let mut b = [0u8; PACKET_LEN];
    b[0..4].copy_from_slice(&MAGIC);
    b[4..8].copy_from_slice(&p.marker_id.to_le_bytes());
    b[8..16].copy_from_slice(&p.timestamp_us.to_le_bytes());
    let r = p.pose.rotation;
    let t = p.pose.translation;
    let floats = [r.w(), r.x(), r.y(), r.z(), t.x, t.y, t.z];
    for (i, v) in floats.iter().enumerate() {
        b[16 + 4 * i..20 + 4 * i].copy_from_slice(&(*v as f32).to_le_bytes());
    }
    b
}

pub fn decode_packet(b: &[u8]) -> Result<TrackedPose> {
    if b.len() != PACKET_LEN {
        return Err(Error::BadLength(b.len()));
    }
    let magic: [u8; 4] = b[0..4].try_into().unwrap();
    if magic != MAGIC {
        return Err(Error::BadMagic(magic));
    }
    let marker_id = u32::from_le_bytes(b[4..8].try_into().unwrap());
    let timestamp_us = u64::from_le_bytes(b[8..16].try_into().unwrap());
    let f: [f64; 7] = std::array::from_fn(|i| f32::from_le_bytes(b[16 + 4 * i..20 + 4 * i].try_into().unwrap()) as f64);
    let norm = (f[0] * f[0] + f[1] * f[1] + f[2] * f[2] + f[3] * f[3]).sqrt();
    if !((norm - 1.0).abs() <= UNIT_NORM_TOL) {
        return Err(Error::NonUnitQuaternion(norm));
    }
    let rotation = UnitQuaternion::new(f[0], f[1], f[2], f[3]).ok_or(Error::NonUnitQuaternion(norm))?;
    let translation = Vector3::new(f[4], f[5], f[6]);
    if !translation.iter().all(|v| v.is_finite()) {
        return Err(Error::Parse {
            line: 0,
            msg: "non-finite translation in packet".into(),
        });
    }
    Ok(TrackedPose {
        marker_id,
        timestamp_us,
        pose: RigidTransform::new(rotation, translation),
    })
}

/// Counters of a [`PoseStore`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct StreamStats {
    pub received: u64,
    pub accepted: u64,
    /// Packets not newer than the marker's latest pose.
    pub stale: u64,
    /// Packets that failed to decode.
    pub malformed: u64,
    /// Receive times of the first and last accepted packet, µs.
    pub first_us: Option<u64>,
    pub last_us: Option<u64>,
}

impl StreamStats {
    /// Accepted packets per second over the receive span; 0 with fewer
    /// than two packets.
    pub fn rate_hz(&self) -> f64 {
        match (self.first_us, self.last_us) {
            (Some(a), Some(b)) if b > a && self.accepted > 1 => (self.accepted - 1) as f64 * 1e6 / (b - a) as f64,
            _ => 0.0,
        }
    }

    pub fn dropped(&self) -> u64 {
        self.stale + self.malformed
    }
}

#[derive(Debug, Clone, Copy)]
struct Slot {
    pose: TrackedPose,
    received_us: u64,
}

/// Latest accepted pose per marker.
///
/// Packets whose timestamp does not exceed the marker's current one are
/// dropped and counted. Readers take short read locks and copy the slot out.
#[derive(Debug)]
pub struct PoseStore {
    slots: RwLock<HashMap<u32, Slot>>,
    epoch: Instant,
    received: AtomicU64,
    accepted: AtomicU64,
    stale: AtomicU64,
    malformed: AtomicU64,
    first_us: AtomicU64,
    last_us: AtomicU64,
}

const UNSET: u64 = u64::MAX;

impl Default for PoseStore {
    fn default() -> Self {
        Self::new()
    }
}

impl PoseStore {
    pub fn new() -> Self {
        Self {
            slots: RwLock::new(HashMap::new()),
            epoch: Instant::now(),
            received: AtomicU64::new(0),
            accepted: AtomicU64::new(0),
            stale: AtomicU64::new(0),
            malformed: AtomicU64::new(0),
            first_us: AtomicU64::new(UNSET),
            last_us: AtomicU64::new(UNSET),
        }
    }

    /// Microseconds since the store was created.
    pub fn now_us(&self) -> u64 {
        self.epoch.elapsed().as_micros() as u64
    }

    /// Decodes and stores one packet received at `received_us`. Returns
    /// whether it became the marker's latest pose.
    pub fn ingest(&self, bytes: &[u8], received_us: u64) -> Result<bool> {
        self.received.fetch_add(1, Ordering::Relaxed);
        let pose = match decode_packet(bytes) {
            Ok(p) => p,
            Err(e) => {
                self.malformed.fetch_add(1, Ordering::Relaxed);
                return Err(e);
            }
        };
        Ok(self.publish(pose, received_us))
    }

    /// Stores an already decoded pose under the monotonicity rule.
    pub fn publish(&self, pose: TrackedPose, received_us: u64) -> bool {
        let mut slots = self.slots.write().unwrap_or_else(|e| e.into_inner());
        if slots.get(&pose.marker_id).is_some_and(|s| pose.timestamp_us <= s.pose.timestamp_us) {
            self.stale.fetch_add(1, Ordering::Relaxed);
            return false;
        }
        slots.insert(pose.marker_id, Slot { pose, received_us });
        drop(slots);
        self.accepted.fetch_add(1, Ordering::Relaxed);
        let _ = self.first_us.compare_exchange(UNSET, received_us, Ordering::Relaxed, Ordering::Relaxed);
        self.last_us.store(received_us, Ordering::Relaxed);
        true
    }

    /// Latest pose of `marker_id` and its age at `now_us`.
    pub fn latest(&self, marker_id: u32, now_us: u64) -> Option<(TrackedPose, u64)> {
        let slots = self.slots.read().unwrap_or_else(|e| e.into_inner());
        slots
            .get(&marker_id)
            .map(|s| (s.pose, now_us.saturating_sub(s.received_us)))
    }

    pub fn markers(&self) -> Vec<u32> {
        let slots = self.slots.read().unwrap_or_else(|e| e.into_inner());
        let mut ids: Vec<u32> = slots.keys().copied().collect();
        ids.sort_unstable();
        ids
    }

    pub fn stats(&self) -> StreamStats {
        let opt = |v: u64| (v != UNSET).then_some(v);
        StreamStats {
            received: self.received.load(Ordering::Relaxed),
            accepted: self.accepted.load(Ordering::Relaxed),
            stale: self.stale.load(Ordering::Relaxed),
            malformed: self.malformed.load(Ordering::Relaxed),
            first_us: opt(self.first_us.load(Ordering::Relaxed)),
            last_us: opt(self.last_us.load(Ordering::Relaxed)),
        }
    }
}

/// Background UDP receiver feeding a [`PoseStore`].
pub struct Listener {
    store: Arc<PoseStore>,
    stop: Arc<AtomicBool>,
    handle: Option<JoinHandle<()>>,
    addr: SocketAddr,
}

impl Listener {
    pub fn bind(addr: impl ToSocketAddrs, store: Arc<PoseStore>) -> io::Result<Self> {
        let socket = UdpSocket::bind(addr)?;
        socket.set_read_timeout(Some(Duration::from_millis(20)))?;
        let addr = socket.local_addr()?;
        let stop = Arc::new(AtomicBool::new(false));
        let handle = {
            let (store, stop) = (Arc::clone(&store), Arc::clone(&stop));
            thread::Builder::new()
                .name("pose-listener".into())
                .spawn(move || receive_loop(&socket, &store, &stop))?
        };
        Ok(Self {
            store,
            stop,
            handle: Some(handle),
            addr,
        })
    }

    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn store(&self) -> &Arc<PoseStore> {
        &self.store
    }

    /// Stops the receiver and waits for it.
    pub fn shutdown(mut self) -> StreamStats {
        self.halt();
        self.store.stats()
    }

    fn halt(&mut self) {
        self.stop.store(true, Ordering::Relaxed);
        if let Some(h) = self.handle.take() {
            let _ = h.join();
        }
    }
}

impl Drop for Listener {
    fn drop(&mut self) {
        self.halt();
    }
}

fn receive_loop(socket: &UdpSocket, store: &PoseStore, stop: &AtomicBool) {
    // One spare byte so oversized datagrams show up as BadLength.
    let mut buf = [0u8; PACKET_LEN + 1];
    while !stop.load(Ordering::Relaxed) {
        match socket.recv(&mut buf) {
            Ok(n) => {
                let _ = store.ingest(&buf[..n], store.now_us());
            }
            Err(e) if matches!(e.kind(), io::ErrorKind::WouldBlock | io::ErrorKind::TimedOut) => {}
            Err(_) => thread::sleep(Duration::from_millis(1)),
        }
    }
}

/// Sends packets to `target` at `rate_hz`, pacing against absolute
/// deadlines so the average rate does not drift.
pub fn send_paced(socket: &UdpSocket, target: SocketAddr, packets: &[[u8; PACKET_LEN]], rate_hz: f64) -> io::Result<()> {
    let period = Duration::from_secs_f64(1.0 / rate_hz);
    let start = Instant::now();
    for (i, p) in packets.iter().enumerate() {
        let due = start + period * i as u32;
        let now = Instant::now();
        if due > now {
            thread::sleep(due - now);
        }
        socket.send_to(p, target)?;
    }
    Ok(())
}

/// Concatenated 48-byte records.
pub fn read_replay(path: &Path) -> Result<Vec<[u8; PACKET_LEN]>> {
    let bytes = fs::read(path)?;
    if bytes.len() % PACKET_LEN != 0 {
        return Err(Error::BadLength(bytes.len() % PACKET_LEN));
    }
    Ok(bytes.chunks_exact(PACKET_LEN).map(|c| c.try_into().unwrap()).collect())
}

pub fn write_replay(path: &Path, packets: &[[u8; PACKET_LEN]]) -> Result<()> {
    crate::io::write_atomic(path, &packets.concat())
}

/// Timestamp field of a record, readable even when the rest is malformed.
pub fn packet_timestamp(b: &[u8; PACKET_LEN]) -> u64 {
    u64::from_le_bytes(b[8..16].try_into().unwrap())
}

/// Synthetic marker trajectory: `n` packets at `rate_hz` with a slow
/// circular motion, for loopback tests and replay files.
pub fn synthetic_track(marker_id: u32, n: usize, rate_hz: f64) -> Vec<[u8; PACKET_LEN]> {
    (0..n)
        .map(|i| {
            let t = i as f64 / rate_hz;
            let pose = RigidTransform::new(
                UnitQuaternion::from_axis_angle(&Vector3::new(0.2, 1.0, 0.1), 0.3 * t.sin()),
                Vector3::new(50.0 * t.cos(), 50.0 * t.sin(), 800.0 + 10.0 * t),
            );
            encode_packet(&TrackedPose {
                marker_id,
                timestamp_us: (i as f64 * 1e6 / rate_hz) as u64,
                pose,
            })
        })
        .collect()
}
