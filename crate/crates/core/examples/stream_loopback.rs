//! Send a synthetic 300 Hz marker track over UDP loopback and read it back
//! from the latest-value store while it arrives.
//!
//! ```bash
//! cargo run --example stream_loopback
//! ```

use std::net::UdpSocket;
use std::sync::Arc;
use std::thread;
use std::time::Duration;

use bbcalib::stream::{send_paced, synthetic_track, Listener, PoseStore};

fn main() -> std::io::Result<()> {
    let listener = Listener::bind("127.0.0.1:0", Arc::new(PoseStore::new()))?;
    let target = listener.local_addr();
    let store = Arc::clone(listener.store());

    let sender = thread::spawn(move || {
        let socket = UdpSocket::bind("127.0.0.1:0")?;
        let mut packets = synthetic_track(0, 600, 300.0);
        packets.extend(synthetic_track(1, 600, 300.0));
        send_paced(&socket, target, &packets, 600.0)
    });

    for _ in 0..8 {
        thread::sleep(Duration::from_millis(250));
        let now = store.now_us();
        for marker in store.markers() {
            if let Some((pose, age)) = store.latest(marker, now) {
                let t = pose.pose.translation;
                println!("marker {marker} t={}us age={age}us at ({:.1}, {:.1}, {:.1})", pose.timestamp_us, t.x, t.y, t.z);
            }
        }
    }
    sender.join().expect("sender thread")?;
    thread::sleep(Duration::from_millis(50));
    let stats = listener.shutdown();
    println!(
        "received {} accepted {} stale {} malformed {} dropped {}",
        stats.received,
        stats.accepted,
        stats.stale,
        stats.malformed,
        stats.dropped()
    );
    Ok(())
}
