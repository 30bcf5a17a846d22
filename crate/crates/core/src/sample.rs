use serde::{Deserialize, Serialize};

/// A count observation as seen by the estimators: location, dwell time and
/// (possibly corrected, hence real-valued) accumulated counts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub x: f64,
    pub y: f64,
    /// Seconds.
    pub duration: f64,
    pub counts: f64,
}

impl Sample {
    pub fn new(x: f64, y: f64, duration: f64, counts: f64) -> Self {
        Self { x, y, duration, counts }
    }

    /// Observed count rate `z / t`.
    pub fn rate(&self) -> f64 {
        self.counts / self.duration
    }

    pub fn distance_to(&self, x: f64, y: f64) -> f64 {
        (self.x - x).hypot(self.y - y)
    }

    pub fn distance(&self, other: &Sample) -> f64 {
        self.distance_to(other.x, other.y)
    }
}

/// Merges samples taken at the same location by summing counts and
/// durations. Order of first occurrence is kept.
pub fn merge_colocated(samples: &[Sample]) -> Vec<Sample> {
    let mut merged: Vec<Sample> = Vec::with_capacity(samples.len());
    for s in samples {
        match merged.iter_mut().find(|m| m.x == s.x && m.y == s.y) {
            Some(m) => {
                m.counts += s.counts;
                m.duration += s.duration;
            }
            None => merged.push(*s),
        }
    }
    merged
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn merge_sums_counts_and_durations() {
        let s = [
            Sample::new(0.0, 0.0, 100.0, 300.0),
            Sample::new(5.0, 0.0, 100.0, 500.0),
            Sample::new(0.0, 0.0, 50.0, 120.0),
        ];
        let m = merge_colocated(&s);
        assert_eq!(m.len(), 2);
        assert_eq!(m[0], Sample::new(0.0, 0.0, 150.0, 420.0));
        assert_eq!(m[1], s[1]);
    }
}
