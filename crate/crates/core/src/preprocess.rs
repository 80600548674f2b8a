//! Per-frame normalization of raw infrared temperature frames.
//!
//! Frames are clipped to a low/high percentile band (Winsorization) and then
//! optionally rescaled to `[0, 1]`. Statistics are computed per frame.

use std::path::Path;

use thiserror::Error;

use crate::grid::{self, GridError, FRAME_TAG};

#[derive(Debug, Error)]
pub enum PreprocessError {
    #[error("frame is empty")]
    EmptyFrame,
    #[error("frame has {found} values, expected {width}x{height}")]
    ShapeMismatch {
        width: usize,
        height: usize,
        found: usize,
    },
    #[error("frame contains a non-finite value at index {0}")]
    NonFinite(usize),
    #[error("percentiles must satisfy 0 <= lo < 50 < hi <= 100, got lo={lo} hi={hi}")]
    BadPercentiles { lo: f64, hi: f64 },
    #[error(transparent)]
    Grid(#[from] GridError),
}

/// Single-channel temperature frame, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    width: usize,
    height: usize,
    values: Vec<f64>,
}

impl Frame {
    pub fn new(width: usize, height: usize, values: Vec<f64>) -> Result<Self, PreprocessError> {
        if width == 0 || height == 0 || values.is_empty() {
            return Err(PreprocessError::EmptyFrame);
        }
        if values.len() != width * height {
            return Err(PreprocessError::ShapeMismatch {
                width,
                height,
                found: values.len(),
            });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(PreprocessError::NonFinite(i));
        }
        Ok(Self {
            width,
            height,
            values,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    fn map(&self, f: impl Fn(f64) -> f64) -> Frame {
        Frame {
            width: self.width,
            height: self.height,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn read(path: &Path) -> Result<Self, PreprocessError> {
        let g = grid::read_grid(path, FRAME_TAG)?;
        Self::new(g.width, g.height, g.values)
    }

    pub fn to_text(&self) -> String {
        grid::render_grid(FRAME_TAG, self.width, self.height, &self.values)
    }
}

/// The `p`-th percentile (0..=100) of an ascending slice, linearly
/// interpolated between the two closest ranks.
///
/// Panics if `sorted` is empty.
pub fn percentile_sorted(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty(), "percentile of an empty slice");
    let rank = p / 100.0 * (sorted.len() - 1) as f64;
    let lo = rank.floor() as usize;
    let frac = rank - lo as f64;
    if lo + 1 >= sorted.len() || frac == 0.0 {
        return sorted[lo.min(sorted.len() - 1)];
    }
    sorted[lo] + frac * (sorted[lo + 1] - sorted[lo])
}

/// Low and high percentile values of a frame.
pub fn percentile_bounds(frame: &Frame, lo: f64, hi: f64) -> Result<(f64, f64), PreprocessError> {
    if !(0.0..50.0).contains(&lo) || !(hi > 50.0 && hi <= 100.0) {
        return Err(PreprocessError::BadPercentiles { lo, hi });
    }
    let mut sorted = frame.values.clone();
    sorted.sort_by(f64::total_cmp);
    Ok((percentile_sorted(&sorted, lo), percentile_sorted(&sorted, hi)))
}

/// Clips values below the `lo`-th percentile up to it and values above the
/// `hi`-th percentile down to it.
pub fn winsorize(frame: &Frame, lo: f64, hi: f64) -> Result<Frame, PreprocessError> {
    let (p_lo, p_hi) = percentile_bounds(frame, lo, hi)?;
    Ok(frame.map(|v| v.clamp(p_lo, p_hi)))
}

/// Affine rescale to `[0, 1]`. Constant frames map to all zeros.
pub fn normalize_unit(frame: &Frame) -> Frame {
    let (min, max) = frame
        .values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let range = max - min;
    if range <= 0.0 {
        return frame.map(|_| 0.0);
    }
    frame.map(|v| ((v - min) / range).clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn frame(values: Vec<f64>) -> Frame {
        let n = values.len();
        Frame::new(n, 1, values).unwrap()
    }

    #[test]
    fn constant_frame_is_unchanged() {
        let f = Frame::new(4, 3, vec![7.0; 12]).unwrap();
        assert_eq!(winsorize(&f, 5.0, 95.0).unwrap(), f);
    }

    #[test]
    fn one_to_hundred_clips_to_interpolated_percentiles() {
        let f = frame((1..=100).map(f64::from).collect());
        let w = winsorize(&f, 5.0, 95.0).unwrap();
        // rank 0.05 * 99 = 4.95 -> 5 + 0.95; rank 94.05 -> 95 + 0.05
        let lo = 5.95;
        let hi = 95.05;
        let min = w.values().iter().copied().fold(f64::INFINITY, f64::min);
        let max = w.values().iter().copied().fold(f64::NEG_INFINITY, f64::max);
        assert!((min - lo).abs() < 1e-12);
        assert!((max - hi).abs() < 1e-12);
        assert_eq!(w.values()[50], 51.0);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(matches!(Frame::new(0, 3, vec![]), Err(PreprocessError::EmptyFrame)));
        assert!(matches!(
            Frame::new(2, 2, vec![1.0; 3]),
            Err(PreprocessError::ShapeMismatch { .. })
        ));
        assert!(matches!(
            Frame::new(2, 1, vec![1.0, f64::NAN]),
            Err(PreprocessError::NonFinite(1))
        ));
        let f = frame(vec![1.0, 2.0]);
        assert!(winsorize(&f, 60.0, 95.0).is_err());
        assert!(winsorize(&f, 5.0, 40.0).is_err());
        assert!(winsorize(&f, -1.0, 95.0).is_err());
    }

    #[test]
    fn normalize_examples() {
        assert_eq!(normalize_unit(&frame(vec![0.0, 5.0, 10.0])).values(), &[0.0, 0.5, 1.0]);
        assert_eq!(normalize_unit(&frame(vec![3.0; 5])).values(), &[0.0; 5]);
    }

    #[test]
    fn frame_text_round_trip() {
        let f = Frame::new(2, 2, vec![20.5, 21.25, -3.0, 1e-3]).unwrap();
        let g = grid::parse_grid(&f.to_text(), FRAME_TAG).unwrap();
        assert_eq!(Frame::new(g.width, g.height, g.values).unwrap(), f);
    }

    proptest! {
        #[test]
        fn normalized_range_is_unit(values in proptest::collection::vec(-1e6f64..1e6, 2..64)) {
            let f = frame(values);
            let n = normalize_unit(&f);
            let min = n.values().iter().copied().fold(f64::INFINITY, f64::min);
            let max = n.values().iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let constant = f.values().iter().all(|&v| v == f.values()[0]);
            if constant {
                prop_assert_eq!(max, 0.0);
            } else {
                prop_assert_eq!(min, 0.0);
                prop_assert_eq!(max, 1.0);
            }
        }

        #[test]
        fn winsorize_is_monotone_and_bounded(
            values in proptest::collection::vec(-500.0f64..500.0, 1..80),
            lo in 0.0f64..49.9,
            hi in 50.1f64..=100.0,
        ) {
            let f = frame(values);
            let (p_lo, p_hi) = percentile_bounds(&f, lo, hi).unwrap();
            let w = winsorize(&f, lo, hi).unwrap();
            for (i, &a) in f.values().iter().enumerate() {
                let wa = w.values()[i];
                prop_assert!(wa.is_finite());
                prop_assert!(p_lo <= wa && wa <= p_hi);
                for (j, &b) in f.values().iter().enumerate() {
                    if a <= b {
                        prop_assert!(wa <= w.values()[j]);
                    }
                }
            }
        }
    }
}
