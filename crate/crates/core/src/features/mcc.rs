//! Mel-cepstrum on an all-pass warped frequency axis.
//!
//! The coefficients are the least-squares fit of
//! `ln sp(w) = c0 + 2 * sum_n c_n cos(n * warp(w))` over the 513 linear
//! bins, weighted by the warp derivative so that the discrete fit
//! approximates truncating the warped cepstrum. Being a projection, the
//! round trip `sp_to_mcc(mcc_to_sp(m))` returns `m` exactly up to rounding.

use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector};

use crate::error::{arg, Result};
use crate::vocoder::SP_BINS;

pub const MCC_ORDER: usize = 56;
/// Frequency warping coefficient for 16 kHz.
pub const ALPHA: f64 = 0.42;

/// Maps a linear frequency in [0, pi] to the warped axis.
pub fn warp(omega: f64, alpha: f64) -> f64 {
    omega + 2.0 * (alpha * omega.sin() / (1.0 - alpha * omega.cos())).atan()
}

struct Basis {
    /// `SP_BINS x MCC_ORDER` synthesis matrix.
    synth: DMatrix<f64>,
    /// `MCC_ORDER x SP_BINS` analysis (projection) matrix.
    analysis: DMatrix<f64>,
}

fn basis() -> &'static Basis {
    static BASIS: OnceLock<Basis> = OnceLock::new();
    BASIS.get_or_init(|| build_basis(ALPHA))
}

fn build_basis(alpha: f64) -> Basis {
    let last = (SP_BINS - 1) as f64;
    let mut synth = DMatrix::zeros(SP_BINS, MCC_ORDER);
    let mut weights = DVector::zeros(SP_BINS);
    for j in 0..SP_BINS {
        let omega = std::f64::consts::PI * j as f64 / last;
        let warped = warp(omega, alpha);
        for n in 0..MCC_ORDER {
            let scale = if n == 0 { 1.0 } else { 2.0 };
            synth[(j, n)] = scale * (n as f64 * warped).cos();
        }
        let dwarp = (1.0 - alpha * alpha) / (1.0 - 2.0 * alpha * omega.cos() + alpha * alpha);
        let trapezoid = if j == 0 || j == SP_BINS - 1 { 0.5 } else { 1.0 };
        weights[j] = dwarp * trapezoid;
    }
    let weighted_t = DMatrix::from_fn(MCC_ORDER, SP_BINS, |n, j| synth[(j, n)] * weights[j]);
    let gram = &weighted_t * &synth;
    let chol = gram
        .cholesky()
        .expect("warped cosine basis is full rank on 513 bins");
    let analysis = chol.solve(&weighted_t);
    Basis { synth, analysis }
}

/// 56 warped cepstral coefficients of a positive 513-bin power envelope.
pub fn sp_to_mcc(sp: &[f64]) -> Result<Vec<f64>> {
    if sp.len() != SP_BINS {
        return arg(format!("envelope has {} bins, expected {SP_BINS}", sp.len()));
    }
    if let Some(i) = sp.iter().position(|&v| !(v > 0.0) || !v.is_finite()) {
        return arg(format!("envelope bin {i} is not positive ({})", sp[i]));
    }
    let log = DVector::from_iterator(SP_BINS, sp.iter().map(|v| v.ln()));
    Ok((&basis().analysis * log).iter().copied().collect())
}

/// Positive 513-bin envelope from 56 warped cepstral coefficients.
pub fn mcc_to_sp(mcc: &[f64]) -> Result<Vec<f64>> {
    if mcc.len() != MCC_ORDER {
        return arg(format!("expected {MCC_ORDER} coefficients, got {}", mcc.len()));
    }
    if mcc.iter().any(|v| !v.is_finite()) {
        return arg("non-finite mel-cepstral coefficient");
    }
    let m = DVector::from_column_slice(mcc);
    Ok((&basis().synth * m).iter().map(|l| l.exp()).collect())
}
