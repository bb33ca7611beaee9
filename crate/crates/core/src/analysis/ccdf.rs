use serde::{Deserialize, Serialize};

/// Shift that keeps zero scores visible on a log-scaled x axis.
pub const DEFAULT_CCDF_OFFSET: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CcdfPoint {
    pub x: f64,
    /// Empirical P(X >= x - offset).
    pub y: f64,
}

/// Empirical complementary CDF at each distinct score, x shifted by
/// `offset`. Empty input gives an empty series.
pub fn ccdf_series(scores: &[f64], offset: f64) -> Vec<CcdfPoint> {
    let mut sorted = scores.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let mut out = Vec::new();
    let mut i = 0;
    while i < sorted.len() {
        let value = sorted[i];
        out.push(CcdfPoint { x: value + offset, y: (sorted.len() - i) as f64 / n });
        while i < sorted.len() && sorted[i] == value {
            i += 1;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_points_with_offset() {
        assert_eq!(ccdf_series(&[1.0, 0.0], 0.05), vec![CcdfPoint { x: 0.05, y: 1.0 }, CcdfPoint { x: 1.05, y: 0.5 }]);
    }

    #[test]
    fn constant_sample_single_point() {
        assert_eq!(ccdf_series(&[0.3, 0.3, 0.3], 0.05), vec![CcdfPoint { x: 0.3 + 0.05, y: 1.0 }]);
    }

    #[test]
    fn zero_offset_starts_at_min() {
        let s = ccdf_series(&[2.0, 0.5, 1.0], 0.0);
        assert_eq!(s[0], CcdfPoint { x: 0.5, y: 1.0 });
        assert_eq!(s.last().unwrap().y, 1.0 / 3.0);
    }
}
