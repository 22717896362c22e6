use serde::{Deserialize, Serialize};

use super::PcmSignal;

/// Identity of a segment: its source and placement in seconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentRef {
    pub source_id: String,
    pub start: f64,
    pub duration: f64,
}

impl SegmentRef {
    pub fn new(source_id: impl Into<String>, start: f64, duration: f64) -> Self {
        Self {
            source_id: source_id.into(),
            start,
            duration,
        }
    }

    /// Path-safe identifier `"<source_id>@<start in ms>"`.
    pub fn id(&self) -> String {
        format!("{}@{}", self.source_id, (self.start * 1000.0).round() as i64)
    }

    /// Inverse of [`SegmentRef::id`] without the duration, which the id does not carry.
    pub fn parse_id(id: &str) -> Option<(String, f64)> {
        let (source, ms) = id.rsplit_once('@')?;
        let ms: i64 = ms.parse().ok()?;
        if source.is_empty() {
            return None;
        }
        Some((source.to_string(), ms as f64 / 1000.0))
    }

    pub fn end(&self) -> f64 {
        self.start + self.duration
    }
}

/// A fixed-length window into a [`PcmSignal`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub source_id: String,
    pub start: f64,
    pub duration: f64,
    pub sample_start: usize,
    pub sample_end: usize,
}

impl Segment {
    pub fn segment_ref(&self) -> SegmentRef {
        SegmentRef::new(self.source_id.clone(), self.start, self.duration)
    }
}

/// Cut `signal` into full windows of `window` seconds every `stride` seconds.
///
/// The tail that does not fill a whole window is dropped. Window and stride
/// are rounded to whole samples.
pub fn segment_windows(signal: &PcmSignal, window: f64, stride: f64) -> Vec<Segment> {
    let sr = signal.sample_rate as f64;
    let win = (window * sr).round() as usize;
    let hop = (stride * sr).round() as usize;
    let n = signal.samples.len();
    if win == 0 || hop == 0 || n < win {
        return Vec::new();
    }
    let count = (n - win) / hop + 1;
    (0..count)
        .map(|i| {
            let sample_start = i * hop;
            Segment {
                source_id: signal.source_id.clone(),
                start: sample_start as f64 / sr,
                duration: win as f64 / sr,
                sample_start,
                sample_end: sample_start + win,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn silent(seconds: f64, sr: u32) -> PcmSignal {
        PcmSignal::new(vec![0.0; (seconds * sr as f64).round() as usize], sr, "sig")
    }

    #[test]
    fn ten_seconds_gives_eight_windows() {
        let segs = segment_windows(&silent(10.0, 16_000), 3.0, 1.0);
        let starts: Vec<f64> = segs.iter().map(|s| s.start).collect();
        assert_eq!(starts, vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0]);
        assert!(segs.iter().all(|s| s.duration == 3.0));
    }

    #[test]
    fn exact_window_gives_one_segment() {
        let segs = segment_windows(&silent(3.0, 16_000), 3.0, 1.0);
        assert_eq!(segs.len(), 1);
        assert_eq!(segs[0].start, 0.0);
    }

    #[test]
    fn short_signal_gives_nothing() {
        assert!(segment_windows(&silent(2.9, 16_000), 3.0, 1.0).is_empty());
    }

    #[test]
    fn segment_id_round_trips() {
        let r = SegmentRef::new("video@7", 4.0, 3.0);
        assert_eq!(r.id(), "video@7@4000");
        assert_eq!(SegmentRef::parse_id(&r.id()), Some(("video@7".into(), 4.0)));
        assert_eq!(SegmentRef::parse_id("nope"), None);
    }

    proptest! {
        #[test]
        fn window_count_law(len in 0usize..400, window in 1usize..50, stride in 1usize..20) {
            // sample rate 10 Hz keeps every quantity an exact multiple of one sample
            let sig = PcmSignal::new(vec![0.0; len], 10, "p");
            let segs = segment_windows(&sig, window as f64 / 10.0, stride as f64 / 10.0);
            let expected = if len < window { 0 } else { (len - window) / stride + 1 };
            prop_assert_eq!(segs.len(), expected);
            for pair in segs.windows(2) {
                prop_assert!(pair[1].start > pair[0].start);
                prop_assert!((pair[1].start - pair[0].start - stride as f64 / 10.0).abs() < 1e-9);
            }
            for s in &segs {
                prop_assert!(s.start + s.duration <= sig.duration_secs() + 1e-9);
            }
        }
    }
}
