use super::profile::{Segment, WorkloadProfile};

const JITTER: f64 = 0.25;

/// Default governor tick; every burst period below is a multiple of it.
const TICK_MS: f64 = 5.0;

fn constant(label: &str, utilization: f64, affinity: [f64; 2]) -> WorkloadProfile {
    WorkloadProfile::new(
        label,
        vec![Segment::new(1000.0, utilization, JITTER)],
        affinity.to_vec(),
    )
}

/// Alternating busy/quiet load repeating every `ticks` governor ticks.
fn bursty(
    label: &str,
    ticks: f64,
    duty: f64,
    high: f64,
    low: f64,
    affinity: [f64; 2],
) -> WorkloadProfile {
    let period_ms = ticks * TICK_MS;
    WorkloadProfile::new(
        label,
        vec![
            Segment::new(period_ms * duty, high, JITTER),
            Segment::new(period_ms * (1.0 - duty), low, JITTER),
        ],
        affinity.to_vec(),
    )
}

const EVEN: [f64; 2] = [0.5, 0.5];
const LITTLE: [f64; 2] = [0.7, 0.3];
const BIG: [f64; 2] = [0.3, 0.7];

/// The built-in 22-application catalog used when a configuration names no
/// profiles. Loads are invented. Most apps come in families that share busy
/// and quiet levels and differ only in burst period (15 to 60 ms, like frame
/// and audio-buffer deadlines), so a 100 ms window holds several cycles.
pub fn default_profiles() -> Vec<WorkloadProfile> {
    vec![
        constant("launcher-idle", 0.05, EVEN),
        constant("text-editor", 0.3, LITTLE),
        constant("game-3d", 0.95, BIG),
        constant("bench-integer", 0.6, EVEN),
        bursty("video-playback", 3.0, 0.5, 0.9, 0.1, EVEN),
        bursty("browser-scroll", 4.0, 0.5, 0.9, 0.1, EVEN),
        bursty("compression", 6.0, 0.5, 0.9, 0.1, EVEN),
        bursty("crypto-hash", 8.0, 0.5, 0.9, 0.1, EVEN),
        bursty("photo-filter", 12.0, 0.5, 0.9, 0.1, EVEN),
        bursty("music-player", 4.0, 0.25, 0.7, 0.2, EVEN),
        bursty("audio-record", 5.0, 0.25, 0.7, 0.2, EVEN),
        bursty("pdf-reader", 8.0, 0.25, 0.7, 0.2, EVEN),
        bursty("email-sync", 12.0, 0.25, 0.7, 0.2, EVEN),
        bursty("camera-preview", 3.0, 0.5, 0.8, 0.3, LITTLE),
        bursty("maps-render", 5.0, 0.5, 0.8, 0.3, LITTLE),
        bursty("social-feed", 7.0, 0.5, 0.8, 0.3, LITTLE),
        bursty("game-2d", 4.0, 0.4, 0.6, 0.1, BIG),
        bursty("bench-float", 6.0, 0.4, 0.6, 0.1, BIG),
        bursty("bench-memory", 10.0, 0.4, 0.6, 0.1, BIG),
        WorkloadProfile::new(
            "video-call",
            vec![
                Segment::new(2.0 * TICK_MS, 0.8, JITTER),
                Segment::new(2.0 * TICK_MS, 0.2, JITTER),
                Segment::new(6.0 * TICK_MS, 0.5, JITTER),
            ],
            EVEN.to_vec(),
        ),
        bursty("browser-idle", 200.0, 0.2, 0.9, 0.05, EVEN),
        bursty("file-indexer", 400.0, 0.5, 0.9, 0.4, EVEN),
    ]
}
