use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::{GeneratorConfig, StageGeom, DISC_DOWN, DISC_HEAD, DISC_STEM, DOWN, HEAD, STEM};
use crate::error::{arg, Result};
use crate::nn::{Graph, Parameter, Scalar, Tensor, Var, LEAKY_SLOPE, NORM_EPS};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct ConvIdx {
    w: usize,
    b: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct NormIdx {
    gamma: usize,
    beta: usize,
}

/// Appends parameters in construction order so indices stay stable across
/// precision casts and checkpoint reloads.
struct Builder<T> {
    params: Vec<Parameter<T>>,
    rng: ChaCha8Rng,
}

impl<T: Scalar> Builder<T> {
    fn conv(&mut self, name: &str, shape: [usize; 4], bias: usize, fan_in: usize) -> ConvIdx {
        let w = self.params.len();
        self.params
            .push(Parameter::fan_in_uniform(format!("{name}.w"), &shape, fan_in, &mut self.rng));
        self.params
            .push(Parameter::new(format!("{name}.b"), Tensor::zeros(&[bias])));
        ConvIdx { w, b: w + 1 }
    }

    fn norm(&mut self, name: &str, c: usize) -> NormIdx {
        let gamma = self.params.len();
        self.params
            .push(Parameter::new(format!("{name}.gamma"), Tensor::full(&[c], T::one())));
        self.params
            .push(Parameter::new(format!("{name}.beta"), Tensor::zeros(&[c])));
        NormIdx { gamma, beta: gamma + 1 }
    }
}

/// Convolutional autoencoder generator with attribute channels at the bottleneck.
#[derive(Debug, Clone, PartialEq)]
pub struct Generator<T> {
    pub config: GeneratorConfig,
    pub params: Vec<Parameter<T>>,
    stem: ConvIdx,
    down: Vec<(ConvIdx, NormIdx)>,
    /// `up[i]` mirrors `down[i]`.
    up: Vec<(ConvIdx, NormIdx)>,
    head: ConvIdx,
}

fn kernel_shape(out: usize, inp: usize, g: StageGeom) -> [usize; 4] {
    [out, inp, g.kernel.0, g.kernel.1]
}

impl<T: Scalar> Generator<T> {
    pub fn new(config: GeneratorConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut b = Builder {
            params: Vec::new(),
            rng: ChaCha8Rng::seed_from_u64(seed),
        };
        let k = |g: StageGeom| g.kernel.0 * g.kernel.1;
        let s = config.stem_channels;
        let stem = b.conv("g.stem", kernel_shape(2 * s, 1, STEM), 2 * s, k(STEM));
        let mut down = Vec::new();
        let mut prev = s;
        for i in 0..config.depth {
            let c = config.stage_channels[i];
            let name = format!("g.down{}", i + 1);
            let conv = b.conv(&name, kernel_shape(2 * c, prev, DOWN[i]), 2 * c, prev * k(DOWN[i]));
            let norm = b.norm(&name, 2 * c);
            down.push((conv, norm));
            prev = c;
        }
        let mut up = vec![None; config.depth];
        for i in (0..config.depth).rev() {
            let inp = config.stage_channels[i] + if i + 1 == config.depth { config.num_domains } else { 0 };
            let out = if i == 0 { s } else { config.stage_channels[i - 1] };
            let name = format!("g.up{}", i + 1);
            let conv = b.conv(&name, kernel_shape(inp, 2 * out, DOWN[i]), 2 * out, inp * k(DOWN[i]));
            let norm = b.norm(&name, 2 * out);
            up[i] = Some((conv, norm));
        }
        let head = b.conv("g.head", kernel_shape(1, s, HEAD), 1, s * k(HEAD));
        Ok(Self {
            config,
            params: b.params,
            stem,
            down,
            up: up.into_iter().map(|u| u.expect("every stage built")).collect(),
            head,
        })
    }

    /// Same network in another precision.
    pub fn cast<U: Scalar>(&self) -> Generator<U> {
        Generator {
            config: self.config.clone(),
            params: cast_params(&self.params),
            stem: self.stem,
            down: self.down.clone(),
            up: self.up.clone(),
            head: self.head,
        }
    }

    fn conv(&self, g: &mut Graph<T>, x: Var, idx: ConvIdx, geom: StageGeom) -> Result<Var> {
        let w = g.param(&self.params[idx.w]);
        let b = g.param(&self.params[idx.b]);
        g.conv2d(x, w, Some(b), geom.stride, geom.pad)
    }

    fn norm_glu(&self, g: &mut Graph<T>, x: Var, idx: NormIdx) -> Result<Var> {
        let gamma = g.param(&self.params[idx.gamma]);
        let beta = g.param(&self.params[idx.beta]);
        let y = g.instance_norm(x, gamma, beta, NORM_EPS)?;
        g.glu(y)
    }

    fn check_input(&self, g: &Graph<T>, x: Var) -> Result<(usize, usize)> {
        let (n, c, h, w) = g.value(x).dims4()?;
        if c != 1 || h != self.config.input_height {
            return arg(format!(
                "generator input must be (n, 1, {}, w), got {:?}",
                self.config.input_height,
                g.value(x).shape()
            ));
        }
        Ok((n, w))
    }

    /// Encoder: `(n, 1, 60, w)` to the bottleneck latent.
    pub fn encode(&self, g: &mut Graph<T>, x: Var) -> Result<Var> {
        let (_, width) = self.check_input(g, x)?;
        self.config.encoder_shapes(width)?;
        let h = self.conv(g, x, self.stem, STEM)?;
        let mut h = g.glu(h)?;
        for (i, &(conv, norm)) in self.down.iter().enumerate() {
            let y = self.conv(g, h, conv, DOWN[i])?;
            h = self.norm_glu(g, y, norm)?;
        }
        Ok(h)
    }

    /// Appends one all-ones channel per item at its target domain and
    /// all-zero channels for the others.
    pub fn inject_attribute(&self, g: &mut Graph<T>, latent: Var, targets: &[usize]) -> Result<Var> {
        let (n, _, h, w) = g.value(latent).dims4()?;
        let d = self.config.num_domains;
        if targets.len() != n {
            return arg(format!("{} attribute labels for a batch of {n}", targets.len()));
        }
        if let Some(bad) = targets.iter().find(|&&t| t >= d) {
            return arg(format!("attribute index {bad} out of range"));
        }
        let mut data = vec![T::zero(); n * d * h * w];
        for (i, &t) in targets.iter().enumerate() {
            let start = (i * d + t) * h * w;
            data[start..start + h * w].fill(T::one());
        }
        let attr = g.constant(Tensor::new(vec![n, d, h, w], data)?);
        g.concat_channels(latent, attr)
    }

    /// Decoder from an attribute-augmented latent back to `(n, 1, 60, width)`.
    pub fn decode(&self, g: &mut Graph<T>, z: Var, width: usize) -> Result<Var> {
        let shapes = self.config.encoder_shapes(width)?;
        let mut h = z;
        for i in (0..self.config.depth).rev() {
            let (conv, norm) = self.up[i];
            let (_, ih, iw) = shapes[i + 1];
            let (_, th, tw) = shapes[i];
            let op = GeneratorConfig::output_padding(i, (ih, iw), (th, tw))?;
            let w = g.param(&self.params[conv.w]);
            let b = g.param(&self.params[conv.b]);
            let y = g.conv2d_transpose(h, w, Some(b), DOWN[i].stride, DOWN[i].pad, op)?;
            h = self.norm_glu(g, y, norm)?;
        }
        self.conv(g, h, self.head, HEAD)
    }

    /// Converts a batch toward the per-item target domains.
    pub fn generate(&self, g: &mut Graph<T>, x: Var, targets: &[usize]) -> Result<Var> {
        let (_, width) = self.check_input(g, x)?;
        let latent = self.encode(g, x)?;
        let z = self.inject_attribute(g, latent, targets)?;
        self.decode(g, z, width)
    }
}

/// Patch discriminator with an auxiliary domain classifier.
#[derive(Debug, Clone, PartialEq)]
pub struct Discriminator<T> {
    pub num_domains: usize,
    pub params: Vec<Parameter<T>>,
    convs: Vec<ConvIdx>,
    adv: ConvIdx,
    cls_w: usize,
    cls_b: usize,
}

impl<T: Scalar> Discriminator<T> {
    pub fn new(base: usize, num_domains: usize, seed: u64) -> Self {
        let mut b = Builder {
            params: Vec::new(),
            rng: ChaCha8Rng::seed_from_u64(seed),
        };
        let k = |g: StageGeom| g.kernel.0 * g.kernel.1;
        let mut convs = vec![b.conv("d.conv1", kernel_shape(base, 1, DISC_STEM), base, k(DISC_STEM))];
        let mut prev = base;
        for i in 0..3 {
            let c = base << (i + 1);
            convs.push(b.conv(&format!("d.conv{}", i + 2), kernel_shape(c, prev, DISC_DOWN), c, prev * k(DISC_DOWN)));
            prev = c;
        }
        let adv = b.conv("d.adv", kernel_shape(1, prev, DISC_HEAD), 1, prev * k(DISC_HEAD));
        let cls_w = b.params.len();
        b.params.push(Parameter::fan_in_uniform("d.cls.w", &[num_domains, prev], prev, &mut b.rng));
        b.params.push(Parameter::new("d.cls.b", Tensor::zeros(&[num_domains])));
        Self {
            num_domains,
            params: b.params,
            convs,
            adv,
            cls_w,
            cls_b: cls_w + 1,
        }
    }

    pub fn cast<U: Scalar>(&self) -> Discriminator<U> {
        Discriminator {
            num_domains: self.num_domains,
            params: cast_params(&self.params),
            convs: self.convs.clone(),
            adv: self.adv,
            cls_w: self.cls_w,
            cls_b: self.cls_b,
        }
    }

    /// Realness patch map `(n, 1, h', w')` and domain logits `(n, domains)`.
    pub fn discriminate(&self, g: &mut Graph<T>, x: Var) -> Result<(Var, Var)> {
        let feats = self.features(g, x)?;
        let w = g.param(&self.params[self.adv.w]);
        let b = g.param(&self.params[self.adv.b]);
        let adv = g.conv2d(feats, w, Some(b), DISC_HEAD.stride, DISC_HEAD.pad)?;
        let logits = self.classify_features(g, feats)?;
        Ok((adv, logits))
    }

    /// Domain logits only; skips the realness head.
    pub fn classify(&self, g: &mut Graph<T>, x: Var) -> Result<Var> {
        let feats = self.features(g, x)?;
        self.classify_features(g, feats)
    }

    fn features(&self, g: &mut Graph<T>, x: Var) -> Result<Var> {
        let mut h = x;
        for (i, idx) in self.convs.iter().enumerate() {
            let geom = if i == 0 { DISC_STEM } else { DISC_DOWN };
            let w = g.param(&self.params[idx.w]);
            let b = g.param(&self.params[idx.b]);
            let y = g.conv2d(h, w, Some(b), geom.stride, geom.pad)?;
            h = g.leaky_relu(y, LEAKY_SLOPE);
        }
        Ok(h)
    }

    fn classify_features(&self, g: &mut Graph<T>, feats: Var) -> Result<Var> {
        let pooled = g.global_avg_pool(feats)?;
        let w = g.param(&self.params[self.cls_w]);
        let b = g.param(&self.params[self.cls_b]);
        g.linear(pooled, w, b)
    }
}

fn cast_params<T: Scalar, U: Scalar>(params: &[Parameter<T>]) -> Vec<Parameter<U>> {
    params
        .iter()
        .map(|p| {
            let m = p.m.iter().map(|v| U::from_f64(v.as_f64())).collect();
            let v = p.v.iter().map(|v| U::from_f64(v.as_f64())).collect();
            Parameter::with_state(p.name.clone(), p.value().cast(), m, v, p.t).expect("same sizes")
        })
        .collect()
}

/// Replaces parameter values by name; every name must be present with a
/// matching shape.
pub fn load_params<T: Scalar>(dst: &mut [Parameter<T>], src: &[Parameter<T>]) -> Result<()> {
    for p in dst.iter_mut() {
        let Some(s) = src.iter().find(|s| s.name == p.name) else {
            return arg(format!("checkpoint lacks parameter {}", p.name));
        };
        if s.value().shape() != p.value().shape() {
            return arg(format!("checkpoint shape mismatch for {}", p.name));
        }
        *p = s.clone();
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generator_round_shape_and_attribute_channels() {
        let cfg = GeneratorConfig::scaled(3, 16).unwrap();
        let gen = Generator::<f32>::new(cfg, 1).unwrap();
        let mut g = Graph::new();
        let x = g.constant(Tensor::zeros(&[2, 1, 60, 200]));
        let latent = gen.encode(&mut g, x).unwrap();
        assert_eq!(g.value(latent).shape(), &[2, 32, 5, 50]);
        let z = gen.inject_attribute(&mut g, latent, &[2, 0]).unwrap();
        let zv = g.value(z);
        assert_eq!(zv.shape(), &[2, 36, 5, 50]);
        let plane = 5 * 50;
        let item0 = &zv.data()[..36 * plane];
        assert!(item0[34 * plane..35 * plane].iter().all(|&v| v == 1.0));
        let appended: f32 = item0[32 * plane..].iter().sum();
        assert_eq!(appended, plane as f32);
        let y = gen.decode(&mut g, z, 200).unwrap();
        assert_eq!(g.value(y).shape(), &[2, 1, 60, 200]);
    }

    #[test]
    fn discriminator_map_and_logits() {
        let d = Discriminator::<f32>::new(2, 4, 3);
        let mut g = Graph::new();
        let x = g.constant(Tensor::zeros(&[1, 1, 60, 400]));
        let (adv, logits) = d.discriminate(&mut g, x).unwrap();
        assert_eq!(g.value(adv).shape(), &[1, 1, 8, 50]);
        assert_eq!(g.value(logits).shape(), &[1, 4]);
    }

    #[test]
    fn rejects_bad_width_and_labels() {
        let gen = Generator::<f32>::new(GeneratorConfig::scaled(2, 16).unwrap(), 0).unwrap();
        let mut g = Graph::new();
        let x = g.constant(Tensor::zeros(&[1, 1, 60, 102]));
        assert!(gen.generate(&mut g, x, &[0]).is_err());
        let x = g.constant(Tensor::zeros(&[1, 1, 60, 100]));
        assert!(gen.generate(&mut g, x, &[4]).is_err());
    }
}
