use super::nets::{Discriminator, Generator};
use crate::error::Result;
use crate::nn::{Graph, Scalar, Var};

/// Loss weights. `lambda_cyc` enables the optional cycle term.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct LossWeights {
    pub lambda_cls: f64,
    pub lambda_rec: f64,
    #[serde(default)]
    pub lambda_cyc: Option<f64>,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            lambda_cls: 1.0,
            lambda_rec: 10.0,
            lambda_cyc: None,
        }
    }
}

/// Graph nodes of every loss term.
#[derive(Debug, Clone, Copy)]
pub struct LossVars {
    pub g_total: Var,
    pub d_total: Var,
    pub g_adv: Var,
    pub g_cls: Var,
    pub g_rec: Var,
    pub g_cyc: Option<Var>,
    pub d_adv: Var,
    pub d_cls: Var,
    /// `G(x_real, tgt)`.
    pub fake: Var,
}

/// Scalar loss values.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LossParts {
    pub g_total: f64,
    pub d_total: f64,
    pub g_adv: f64,
    pub g_cls: f64,
    pub g_rec: f64,
    pub d_adv: f64,
    pub d_cls: f64,
}

impl LossVars {
    pub fn parts<T: Scalar>(&self, g: &Graph<T>) -> LossParts {
        let v = |x: Var| g.value(x).item().as_f64();
        LossParts {
            g_total: v(self.g_total),
            d_total: v(self.d_total),
            g_adv: v(self.g_adv),
            g_cls: v(self.g_cls),
            g_rec: v(self.g_rec),
            d_adv: v(self.d_adv),
            d_cls: v(self.d_cls),
        }
    }
}

/// Builds both objectives on one graph.
///
/// The discriminator sees a detached copy of the fake batch, so
/// backpropagating `d_total` never reaches generator parameters.
/// Backpropagating `g_total` does reach the discriminator; callers step
/// only the generator's parameters with those gradients.
pub fn compute_losses<T: Scalar>(
    g: &mut Graph<T>,
    gen: &Generator<T>,
    disc: &Discriminator<T>,
    x_real: Var,
    src: &[usize],
    tgt: &[usize],
    weights: &LossWeights,
) -> Result<LossVars> {
    let fake = gen.generate(g, x_real, tgt)?;
    let (fake_adv, fake_logits) = disc.discriminate(g, fake)?;
    let g_adv_raw = g.mse_to(fake_adv, 1.0);
    let g_adv = g.scale(g_adv_raw, 0.5);
    let g_cls = g.cross_entropy(fake_logits, tgt)?;
    let recon = gen.generate(g, x_real, src)?;
    let g_rec = g.l1(recon, x_real)?;
    let weighted_cls = g.scale(g_cls, weights.lambda_cls);
    let weighted_rec = g.scale(g_rec, weights.lambda_rec);
    let mut g_total = g.add(g_adv, weighted_cls)?;
    g_total = g.add(g_total, weighted_rec)?;
    let mut g_cyc = None;
    if let Some(lambda) = weights.lambda_cyc {
        let back = gen.generate(g, fake, src)?;
        let cyc = g.l1(back, x_real)?;
        let weighted = g.scale(cyc, lambda);
        g_total = g.add(g_total, weighted)?;
        g_cyc = Some(cyc);
    }

    let (real_adv, real_logits) = disc.discriminate(g, x_real)?;
    let fake_const = g.detach(fake);
    let (fake_adv_d, _) = disc.discriminate(g, fake_const)?;
    let real_term = g.mse_to(real_adv, 1.0);
    let fake_term = g.mse_to(fake_adv_d, 0.0);
    let d_adv_sum = g.add(real_term, fake_term)?;
    let d_adv = g.scale(d_adv_sum, 0.5);
    let d_cls = g.cross_entropy(real_logits, src)?;
    let weighted = g.scale(d_cls, weights.lambda_cls);
    let d_total = g.add(d_adv, weighted)?;

    Ok(LossVars {
        g_total,
        d_total,
        g_adv,
        g_cls,
        g_rec,
        g_cyc,
        d_adv,
        d_cls,
        fake,
    })
}
