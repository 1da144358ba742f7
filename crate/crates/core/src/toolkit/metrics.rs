use std::f64::consts::LN_10;

use crate::error::{arg, Result};
use crate::features::{FeatureTensor, FEATURE_DIM};

/// Highest cepstral index included in the distortion; index 0 (energy) is
/// excluded.
pub const MCD_LAST_COEF: usize = 55;

/// `(10 / ln 10) * sqrt(2)`.
pub fn mcd_scale() -> f64 {
    10.0 / LN_10 * 2f64.sqrt()
}

/// Mel-cepstral distortion in dB between equally long feature tensors.
pub fn mcd(a: &FeatureTensor, b: &FeatureTensor) -> Result<f64> {
    if a.frames() != b.frames() {
        return arg(format!("mcd needs equal frame counts, got {} and {}", a.frames(), b.frames()));
    }
    mcd_rows(&a.data, &b.data, a.frames())
}

/// Same as [`mcd`] on raw row-major `frames x 60` buffers.
pub fn mcd_rows(a: &[f64], b: &[f64], frames: usize) -> Result<f64> {
    if frames == 0 {
        return arg("mcd of zero frames");
    }
    if a.len() != frames * FEATURE_DIM || b.len() != frames * FEATURE_DIM {
        return arg("mcd buffers do not match the frame count");
    }
    let total: f64 = (0..frames)
        .map(|t| {
            let (ra, rb) = (&a[t * FEATURE_DIM..], &b[t * FEATURE_DIM..]);
            (1..=MCD_LAST_COEF).map(|d| (ra[d] - rb[d]).powi(2)).sum::<f64>().sqrt()
        })
        .sum();
    Ok(mcd_scale() * total / frames as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tensor(frames: usize, f: impl Fn(usize) -> f64) -> FeatureTensor {
        FeatureTensor::from_rows((0..frames * FEATURE_DIM).map(f).collect(), FEATURE_DIM, None, vec![0.0; frames]).unwrap()
    }

    #[test]
    fn single_coefficient_offset() {
        let a = tensor(7, |i| (i as f64 * 0.37).sin());
        let mut b = a.clone();
        for t in 0..7 {
            b.data[t * FEATURE_DIM + 1] += 0.25;
        }
        assert!((mcd(&a, &b).unwrap() - mcd_scale() * 0.25).abs() < 1e-12);
        assert_eq!(mcd(&a, &a).unwrap(), 0.0);
    }

    #[test]
    fn energy_and_aperiodicity_are_ignored() {
        let a = tensor(3, |_| 0.0);
        let mut b = a.clone();
        for t in 0..3 {
            b.data[t * FEATURE_DIM] = 5.0;
            b.data[t * FEATURE_DIM + 58] = 0.7;
        }
        assert_eq!(mcd(&a, &b).unwrap(), 0.0);
    }

    #[test]
    fn frame_mismatch_is_an_error() {
        assert!(mcd(&tensor(3, |_| 0.0), &tensor(4, |_| 0.0)).is_err());
    }
}
