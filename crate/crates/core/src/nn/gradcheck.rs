//! Central finite-difference checks against the tape's gradients.

use rand::seq::index::sample;
use rand::Rng;

use super::graph::{Graph, Var};
use super::tensor::Tensor;
use crate::error::Result;

/// Outcome of one gradient comparison over the sampled coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct GradReport {
    /// `||analytic - numeric|| / max(||analytic||, ||numeric||)`.
    pub rel_error: f64,
    /// Largest single-coordinate absolute gap.
    pub max_abs: f64,
    pub coords: usize,
}

impl GradReport {
    pub fn passes(&self, tol: f64) -> bool {
        self.rel_error < tol
    }
}

/// Relative error of two gradient vectors in the Euclidean norm; identical
/// zero vectors compare as 0.
pub fn relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    let diff: f64 = analytic.iter().zip(numeric).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    let na = analytic.iter().map(|v| v * v).sum::<f64>().sqrt();
    let nb = numeric.iter().map(|v| v * v).sum::<f64>().sqrt();
    let denom = na.max(nb);
    if denom == 0.0 {
        0.0
    } else {
        diff / denom
    }
}

/// Picks up to `limit` coordinates per tensor, all of them for small tensors.
pub fn sample_coords(shapes: &[usize], limit: usize, rng: &mut impl Rng) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for (t, &n) in shapes.iter().enumerate() {
        if n <= limit {
            out.extend((0..n).map(|i| (t, i)));
        } else {
            let mut picks: Vec<usize> = sample(rng, n, limit).into_vec();
            picks.sort_unstable();
            out.extend(picks.into_iter().map(|i| (t, i)));
        }
    }
    out
}

/// Central differences of a scalar function of several tensors.
pub fn numeric_grad(
    point: &[Tensor<f64>],
    coords: &[(usize, usize)],
    eps: f64,
    mut f: impl FnMut(&[Tensor<f64>]) -> Result<f64>,
) -> Result<Vec<f64>> {
    let mut work = point.to_vec();
    let mut out = Vec::with_capacity(coords.len());
    for &(t, i) in coords {
        let orig = work[t].data()[i];
        work[t].data_mut()[i] = orig + eps;
        let plus = f(&work)?;
        work[t].data_mut()[i] = orig - eps;
        let minus = f(&work)?;
        work[t].data_mut()[i] = orig;
        out.push((plus - minus) / (2.0 * eps));
    }
    Ok(out)
}

/// Checks the gradient of `f` with respect to every tensor in `inputs`.
/// `f` builds a scalar on a fresh graph from leaf variables of the inputs.
pub fn check_inputs(
    inputs: &[Tensor<f64>],
    eps: f64,
    limit: usize,
    rng: &mut impl Rng,
    f: impl Fn(&mut Graph<f64>, &[Var]) -> Result<Var>,
) -> Result<GradReport> {
    let mut g = Graph::new();
    let vars: Vec<Var> = inputs.iter().map(|t| g.input(t.clone())).collect();
    let loss = f(&mut g, &vars)?;
    g.backward(loss)?;
    let shapes: Vec<usize> = inputs.iter().map(|t| t.numel()).collect();
    let coords = sample_coords(&shapes, limit, rng);
    let analytic: Vec<f64> = coords
        .iter()
        .map(|&(t, i)| g.grad(vars[t]).map_or(0.0, |gr| gr.data()[i]))
        .collect();
    let numeric = numeric_grad(inputs, &coords, eps, |pt| {
        let mut g = Graph::new();
        let vars: Vec<Var> = pt.iter().map(|t| g.input(t.clone())).collect();
        let loss = f(&mut g, &vars)?;
        Ok(g.value(loss).item())
    })?;
    Ok(GradReport {
        rel_error: relative_error(&analytic, &numeric),
        max_abs: analytic
            .iter()
            .zip(&numeric)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max),
        coords: coords.len(),
    })
}
