//! Reverse-mode tape. Every op evaluates eagerly and appends one node;
//! backward walks the nodes in reverse creation order, which is a reverse
//! topological order because inputs always precede their consumers.

use std::collections::HashMap;
use std::sync::Arc;

use super::conv::{conv_backward, conv_forward, conv_t_backward, conv_t_forward, ConvGeom};
use super::param::Parameter;
use super::tensor::{matmul, Scalar, Tensor};
use crate::error::{arg, Result};

/// Handle to a node on a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

enum Op<T> {
    Leaf,
    Conv { x: Var, w: Var, b: Option<Var>, geom: ConvGeom },
    ConvT { x: Var, w: Var, b: Option<Var>, geom: ConvGeom },
    Glu { x: Var },
    InstanceNorm { x: Var, gamma: Var, beta: Var, xhat: Vec<T>, inv_std: Vec<T> },
    LeakyRelu { x: Var, slope: T },
    Concat { a: Var, b: Var },
    Add { a: Var, b: Var },
    Scale { x: Var, s: T },
    Gap { x: Var },
    Linear { x: Var, w: Var, b: Var },
    MseTo { x: Var, target: T },
    CrossEntropy { logits: Var, probs: Vec<T>, labels: Vec<usize> },
    L1 { a: Var, b: Var },
    DotConst { x: Var, r: Arc<Tensor<T>> },
}

struct Node<T> {
    value: Arc<Tensor<T>>,
    op: Op<T>,
    tracked: bool,
}

pub struct Graph<T> {
    nodes: Vec<Node<T>>,
    grads: Vec<Option<Tensor<T>>>,
    params: HashMap<*const Tensor<T>, Var>,
}

impl<T: Scalar> Default for Graph<T> {
    fn default() -> Self {
        Self::new()
    }
}

fn sigmoid<T: Scalar>(v: T) -> T {
    T::one() / (T::one() + (-v).exp())
}

impl<T: Scalar> Graph<T> {
    pub fn new() -> Self {
        Self {
            nodes: Vec::new(),
            grads: Vec::new(),
            params: HashMap::new(),
        }
    }

    fn push(&mut self, value: Tensor<T>, op: Op<T>, tracked: bool) -> Var {
        self.push_shared(Arc::new(value), op, tracked)
    }

    fn push_shared(&mut self, value: Arc<Tensor<T>>, op: Op<T>, tracked: bool) -> Var {
        self.nodes.push(Node { value, op, tracked });
        Var(self.nodes.len() - 1)
    }

    fn tracked(&self, vars: &[Var]) -> bool {
        vars.iter().any(|v| self.nodes[v.0].tracked)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor<T> {
        &self.nodes[v.0].value
    }

    /// Which side of its kink every leaky-ReLU input and l1 residual lies on.
    /// Two evaluations with equal patterns sit on the same smooth piece.
    pub fn kink_signs(&self) -> Vec<bool> {
        let mut out = Vec::new();
        for node in &self.nodes {
            match node.op {
                Op::LeakyRelu { x, .. } => out.extend(self.value(x).data().iter().map(|&v| v > T::zero())),
                Op::L1 { a, b } => {
                    let pairs = self.value(a).data().iter().zip(self.value(b).data());
                    out.extend(pairs.map(|(&p, &q)| p > q));
                }
                _ => {}
            }
        }
        out
    }

    /// A leaf that never receives a gradient.
    pub fn constant(&mut self, t: Tensor<T>) -> Var {
        self.push(t, Op::Leaf, false)
    }

    /// A leaf whose gradient is recorded.
    pub fn input(&mut self, t: Tensor<T>) -> Var {
        self.push(t, Op::Leaf, true)
    }

    /// Leaf for a parameter; repeated calls with the same parameter value
    /// return the same node so gradients from every use accumulate.
    pub fn param(&mut self, p: &Parameter<T>) -> Var {
        let key = Arc::as_ptr(p.shared());
        if let Some(&v) = self.params.get(&key) {
            return v;
        }
        let v = self.push_shared(p.shared().clone(), Op::Leaf, true);
        self.params.insert(key, v);
        v
    }

    /// Same value, cut from the gradient flow.
    pub fn detach(&mut self, v: Var) -> Var {
        let value = self.nodes[v.0].value.clone();
        self.push_shared(value, Op::Leaf, false)
    }

    fn shape_err<R>(&self, what: &str, vars: &[Var]) -> Result<R> {
        let shapes: Vec<_> = vars.iter().map(|v| self.value(*v).shape().to_vec()).collect();
        arg(format!("{what}: incompatible shapes {shapes:?}"))
    }

    /// Strided 2-D convolution. `x` is `(n, c, h, w)`, `w` is
    /// `(c_out, c, kh, kw)`, `b` is `(c_out)`.
    pub fn conv2d(&mut self, x: Var, w: Var, b: Option<Var>, stride: (usize, usize), pad: (usize, usize)) -> Result<Var> {
        let (n, c, h, wd) = self.value(x).dims4()?;
        let ws = self.value(w).shape().to_vec();
        if ws.len() != 4 || ws[1] != c || b.is_some_and(|b| self.value(b).shape() != [ws[0]]) {
            return self.shape_err("conv2d", &[x, w]);
        }
        let geom = ConvGeom::forward(c, h, wd, ws[0], (ws[2], ws[3]), stride, pad)?;
        let y = conv_forward(
            &geom,
            n,
            self.value(x).data(),
            self.value(w).data(),
            b.map(|b| self.value(b).data()),
        );
        let value = Tensor::new(vec![n, geom.c_out, geom.oh, geom.ow], y)?;
        let tracked = self.tracked(&[x, w]) || b.is_some_and(|b| self.tracked(&[b]));
        Ok(self.push(value, Op::Conv { x, w, b, geom }, tracked))
    }

    /// Transposed convolution, the adjoint of [`Graph::conv2d`] with the
    /// same kernel, stride and padding. `w` is `(c_in, c_out, kh, kw)`.
    pub fn conv2d_transpose(
        &mut self,
        x: Var,
        w: Var,
        b: Option<Var>,
        stride: (usize, usize),
        pad: (usize, usize),
        output_pad: (usize, usize),
    ) -> Result<Var> {
        let (n, c, h, wd) = self.value(x).dims4()?;
        let ws = self.value(w).shape().to_vec();
        if ws.len() != 4 || ws[0] != c || b.is_some_and(|b| self.value(b).shape() != [ws[1]]) {
            return self.shape_err("conv2d_transpose", &[x, w]);
        }
        let geom = ConvGeom::transpose(c, h, wd, ws[1], (ws[2], ws[3]), stride, pad, output_pad)?;
        let y = conv_t_forward(
            &geom,
            n,
            self.value(x).data(),
            self.value(w).data(),
            b.map(|b| self.value(b).data()),
        );
        let value = Tensor::new(vec![n, geom.c_in, geom.h, geom.w], y)?;
        let tracked = self.tracked(&[x, w]) || b.is_some_and(|b| self.tracked(&[b]));
        Ok(self.push(value, Op::ConvT { x, w, b, geom }, tracked))
    }

    /// Gated linear unit over channels: first half times sigmoid of the second.
    pub fn glu(&mut self, x: Var) -> Result<Var> {
        let (n, c, h, w) = self.value(x).dims4()?;
        if c % 2 != 0 {
            return arg(format!("glu needs an even channel count, got {c}"));
        }
        let half = c / 2 * h * w;
        let xd = self.value(x).data();
        let mut y = Vec::with_capacity(n * half);
        for i in 0..n {
            let item = &xd[i * 2 * half..(i + 1) * 2 * half];
            y.extend((0..half).map(|j| item[j] * sigmoid(item[half + j])));
        }
        let value = Tensor::new(vec![n, c / 2, h, w], y)?;
        let tracked = self.tracked(&[x]);
        Ok(self.push(value, Op::Glu { x }, tracked))
    }

    /// Per-sample, per-channel standardization over space, then `gamma * . + beta`.
    pub fn instance_norm(&mut self, x: Var, gamma: Var, beta: Var, eps: f64) -> Result<Var> {
        let (n, c, h, w) = self.value(x).dims4()?;
        if self.value(gamma).shape() != [c] || self.value(beta).shape() != [c] {
            return self.shape_err("instance_norm", &[x, gamma, beta]);
        }
        let m = h * w;
        let xd = self.value(x).data();
        let (g, b) = (self.value(gamma).data(), self.value(beta).data());
        let mut xhat = vec![T::zero(); xd.len()];
        let mut inv_std = vec![T::zero(); n * c];
        let mut y = vec![T::zero(); xd.len()];
        let mf = T::from_f64(m as f64);
        for i in 0..n * c {
            let s = &xd[i * m..(i + 1) * m];
            let mean = s.iter().fold(T::zero(), |a, &v| a + v) / mf;
            let var = s.iter().fold(T::zero(), |a, &v| a + (v - mean) * (v - mean)) / mf;
            let is = T::one() / (var + T::from_f64(eps)).sqrt();
            inv_std[i] = is;
            let ch = i % c;
            for j in 0..m {
                let xh = (s[j] - mean) * is;
                xhat[i * m + j] = xh;
                y[i * m + j] = g[ch] * xh + b[ch];
            }
        }
        let value = Tensor::new(vec![n, c, h, w], y)?;
        let tracked = self.tracked(&[x, gamma, beta]);
        Ok(self.push(value, Op::InstanceNorm { x, gamma, beta, xhat, inv_std }, tracked))
    }

    pub fn leaky_relu(&mut self, x: Var, slope: f64) -> Var {
        let s = T::from_f64(slope);
        let value = self.value(x).map(|v| if v > T::zero() { v } else { v * s });
        let tracked = self.tracked(&[x]);
        self.push(value, Op::LeakyRelu { x, slope: s }, tracked)
    }

    /// Concatenates two `(n, c, h, w)` tensors along channels.
    pub fn concat_channels(&mut self, a: Var, b: Var) -> Result<Var> {
        let (n, ca, h, w) = self.value(a).dims4()?;
        let (nb, cb, hb, wb) = self.value(b).dims4()?;
        if (n, h, w) != (nb, hb, wb) {
            return self.shape_err("concat_channels", &[a, b]);
        }
        let (ad, bd) = (self.value(a).data(), self.value(b).data());
        let (la, lb) = (ca * h * w, cb * h * w);
        let mut y = Vec::with_capacity(n * (la + lb));
        for i in 0..n {
            y.extend_from_slice(&ad[i * la..(i + 1) * la]);
            y.extend_from_slice(&bd[i * lb..(i + 1) * lb]);
        }
        let value = Tensor::new(vec![n, ca + cb, h, w], y)?;
        let tracked = self.tracked(&[a, b]);
        Ok(self.push(value, Op::Concat { a, b }, tracked))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        if self.value(a).shape() != self.value(b).shape() {
            return self.shape_err("add", &[a, b]);
        }
        let data = self
            .value(a)
            .data()
            .iter()
            .zip(self.value(b).data())
            .map(|(&x, &y)| x + y)
            .collect();
        let value = Tensor::new(self.value(a).shape().to_vec(), data)?;
        let tracked = self.tracked(&[a, b]);
        Ok(self.push(value, Op::Add { a, b }, tracked))
    }

    pub fn scale(&mut self, x: Var, s: f64) -> Var {
        let s = T::from_f64(s);
        let value = self.value(x).map(|v| v * s);
        let tracked = self.tracked(&[x]);
        self.push(value, Op::Scale { x, s }, tracked)
    }

    /// Global average pool `(n, c, h, w) -> (n, c)`.
    pub fn global_avg_pool(&mut self, x: Var) -> Result<Var> {
        let (n, c, h, w) = self.value(x).dims4()?;
        let m = h * w;
        let inv = T::from_f64(1.0 / m as f64);
        let data = self
            .value(x)
            .data()
            .chunks(m)
            .map(|s| s.iter().fold(T::zero(), |a, &v| a + v) * inv)
            .collect();
        let value = Tensor::new(vec![n, c], data)?;
        let tracked = self.tracked(&[x]);
        Ok(self.push(value, Op::Gap { x }, tracked))
    }

    /// `x (n, f) -> x w^T + b` with `w (o, f)`.
    pub fn linear(&mut self, x: Var, w: Var, b: Var) -> Result<Var> {
        let xs = self.value(x).shape().to_vec();
        let ws = self.value(w).shape().to_vec();
        if xs.len() != 2 || ws.len() != 2 || xs[1] != ws[1] || self.value(b).shape() != [ws[0]] {
            return self.shape_err("linear", &[x, w, b]);
        }
        let (n, f, o) = (xs[0], xs[1], ws[0]);
        let mut y: Vec<T> = (0..n).flat_map(|_| self.value(b).data().iter().copied()).collect();
        matmul(n, f, o, self.value(x).data(), false, self.value(w).data(), true, T::one(), &mut y);
        let value = Tensor::new(vec![n, o], y)?;
        let tracked = self.tracked(&[x, w, b]);
        Ok(self.push(value, Op::Linear { x, w, b }, tracked))
    }

    /// `mean((x - target)^2)` as a scalar.
    pub fn mse_to(&mut self, x: Var, target: f64) -> Var {
        let t = T::from_f64(target);
        let xd = self.value(x).data();
        let sum = xd.iter().fold(T::zero(), |a, &v| a + (v - t) * (v - t));
        let value = Tensor::scalar(sum / T::from_f64(xd.len() as f64));
        let tracked = self.tracked(&[x]);
        self.push(value, Op::MseTo { x, target: t }, tracked)
    }

    /// Mean softmax cross-entropy of `logits (n, k)` against class indices.
    pub fn cross_entropy(&mut self, logits: Var, labels: &[usize]) -> Result<Var> {
        let shape = self.value(logits).shape().to_vec();
        if shape.len() != 2 || shape[0] != labels.len() {
            return arg(format!("cross_entropy: logits {shape:?} for {} labels", labels.len()));
        }
        let k = shape[1];
        if let Some(&bad) = labels.iter().find(|&&l| l >= k) {
            return arg(format!("class index {bad} out of range for {k} classes"));
        }
        let mut probs = Vec::with_capacity(labels.len() * k);
        let mut loss = T::zero();
        for (row, &label) in self.value(logits).data().chunks(k).zip(labels) {
            let max = row.iter().fold(T::neg_infinity(), |a, &v| a.max(v));
            let sum = row.iter().fold(T::zero(), |a, &v| a + (v - max).exp());
            let lse = max + sum.ln();
            loss = loss + lse - row[label];
            probs.extend(row.iter().map(|&v| (v - lse).exp()));
        }
        let value = Tensor::scalar(loss / T::from_f64(labels.len() as f64));
        let tracked = self.tracked(&[logits]);
        Ok(self.push(value, Op::CrossEntropy { logits, probs, labels: labels.to_vec() }, tracked))
    }

    /// `mean(|a - b|)` as a scalar.
    pub fn l1(&mut self, a: Var, b: Var) -> Result<Var> {
        if self.value(a).shape() != self.value(b).shape() {
            return self.shape_err("l1", &[a, b]);
        }
        let ad = self.value(a).data();
        let sum = ad
            .iter()
            .zip(self.value(b).data())
            .fold(T::zero(), |acc, (&x, &y)| acc + (x - y).abs());
        let value = Tensor::scalar(sum / T::from_f64(ad.len() as f64));
        let tracked = self.tracked(&[a, b]);
        Ok(self.push(value, Op::L1 { a, b }, tracked))
    }

    /// `sum(x * r)` for a fixed tensor `r`; turns any output into a scalar
    /// for gradient checks.
    pub fn dot_const(&mut self, x: Var, r: Tensor<T>) -> Result<Var> {
        if self.value(x).shape() != r.shape() {
            return arg("dot_const: shape mismatch");
        }
        let s = self
            .value(x)
            .data()
            .iter()
            .zip(r.data())
            .fold(T::zero(), |a, (&u, &v)| a + u * v);
        let tracked = self.tracked(&[x]);
        Ok(self.push(Tensor::scalar(s), Op::DotConst { x, r: Arc::new(r) }, tracked))
    }

    pub fn grad(&self, v: Var) -> Option<&Tensor<T>> {
        self.grads.get(v.0).and_then(|g| g.as_ref())
    }

    pub fn param_grad(&self, p: &Parameter<T>) -> Option<&Tensor<T>> {
        self.params
            .get(&Arc::as_ptr(p.shared()))
            .and_then(|&v| self.grad(v))
    }

    /// Gradient slots for a parameter list, in order.
    pub fn param_grads(&self, params: &[Parameter<T>]) -> Vec<Option<Tensor<T>>> {
        params.iter().map(|p| self.param_grad(p).cloned()).collect()
    }

    fn accumulate(&mut self, v: Var, g: Vec<T>) {
        if !self.nodes[v.0].tracked {
            return;
        }
        match &mut self.grads[v.0] {
            Some(existing) => {
                for (e, d) in existing.data_mut().iter_mut().zip(g) {
                    *e = *e + d;
                }
            }
            slot @ None => {
                let shape = self.nodes[v.0].value.shape().to_vec();
                *slot = Some(Tensor::new(shape, g).expect("gradient matches value shape"));
            }
        }
    }

    /// Backpropagates from a scalar node. Gradients from earlier calls are
    /// discarded.
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        if self.value(loss).numel() != 1 {
            return arg("backward needs a scalar loss");
        }
        self.grads = (0..self.nodes.len()).map(|_| None).collect();
        if !self.nodes[loss.0].tracked {
            return Ok(());
        }
        self.grads[loss.0] = Some(Tensor::full(self.value(loss).shape(), T::one()));
        for idx in (0..=loss.0).rev() {
            let Some(dy) = self.grads[idx].take() else {
                continue;
            };
            self.backward_node(idx, &dy);
            self.grads[idx] = Some(dy);
        }
        Ok(())
    }

    fn backward_node(&mut self, idx: usize, dy: &Tensor<T>) {
        let dyd = dy.data();
        let node = &self.nodes[idx];
        let updates: Vec<(Var, Vec<T>)> = match &node.op {
            Op::Leaf => Vec::new(),
            Op::Conv { x, w, b, geom } => {
                let n = self.value(*x).shape()[0];
                let need_dx = self.nodes[x.0].tracked;
                let (dx, dw, db) = conv_backward(geom, n, self.value(*x).data(), self.value(*w).data(), dyd, need_dx);
                let mut u = vec![(*w, dw)];
                if let Some(dx) = dx {
                    u.push((*x, dx));
                }
                if let Some(b) = b {
                    u.push((*b, db));
                }
                u
            }
            Op::ConvT { x, w, b, geom } => {
                let n = self.value(*x).shape()[0];
                let need_dx = self.nodes[x.0].tracked;
                let (dx, dw, db) = conv_t_backward(geom, n, self.value(*x).data(), self.value(*w).data(), dyd, need_dx);
                let mut u = vec![(*w, dw)];
                if let Some(dx) = dx {
                    u.push((*x, dx));
                }
                if let Some(b) = b {
                    u.push((*b, db));
                }
                u
            }
            Op::Glu { x } => {
                let xd = self.value(*x).data();
                let (n, c, h, w) = self.value(*x).dims4().expect("4-d");
                let half = c / 2 * h * w;
                let mut dx = vec![T::zero(); xd.len()];
                for i in 0..n {
                    let item = &xd[i * 2 * half..(i + 1) * 2 * half];
                    let d = &mut dx[i * 2 * half..(i + 1) * 2 * half];
                    for j in 0..half {
                        let s = sigmoid(item[half + j]);
                        let g = dyd[i * half + j];
                        d[j] = g * s;
                        d[half + j] = g * item[j] * s * (T::one() - s);
                    }
                }
                vec![(*x, dx)]
            }
            Op::InstanceNorm { x, gamma, beta, xhat, inv_std } => {
                let (n, c, h, w) = self.value(*x).dims4().expect("4-d");
                let m = h * w;
                let mf = T::from_f64(m as f64);
                let g = self.value(*gamma).data();
                let mut dx = vec![T::zero(); n * c * m];
                let mut dg = vec![T::zero(); c];
                let mut db = vec![T::zero(); c];
                for i in 0..n * c {
                    let ch = i % c;
                    let (dys, xh) = (&dyd[i * m..(i + 1) * m], &xhat[i * m..(i + 1) * m]);
                    let mut sum_d = T::zero();
                    let mut sum_dx = T::zero();
                    for j in 0..m {
                        dg[ch] = dg[ch] + dys[j] * xh[j];
                        db[ch] = db[ch] + dys[j];
                        let dxh = dys[j] * g[ch];
                        sum_d = sum_d + dxh;
                        sum_dx = sum_dx + dxh * xh[j];
                    }
                    for j in 0..m {
                        let dxh = dys[j] * g[ch];
                        dx[i * m + j] = inv_std[i] / mf * (mf * dxh - sum_d - xh[j] * sum_dx);
                    }
                }
                vec![(*x, dx), (*gamma, dg), (*beta, db)]
            }
            Op::LeakyRelu { x, slope } => {
                let dx = self
                    .value(*x)
                    .data()
                    .iter()
                    .zip(dyd)
                    .map(|(&v, &g)| if v > T::zero() { g } else { g * *slope })
                    .collect();
                vec![(*x, dx)]
            }
            Op::Concat { a, b } => {
                let (n, ca, h, w) = self.value(*a).dims4().expect("4-d");
                let cb = self.value(*b).shape()[1];
                let (la, lb) = (ca * h * w, cb * h * w);
                let mut da = Vec::with_capacity(n * la);
                let mut db = Vec::with_capacity(n * lb);
                for i in 0..n {
                    let item = &dyd[i * (la + lb)..(i + 1) * (la + lb)];
                    da.extend_from_slice(&item[..la]);
                    db.extend_from_slice(&item[la..]);
                }
                vec![(*a, da), (*b, db)]
            }
            Op::Add { a, b } => vec![(*a, dyd.to_vec()), (*b, dyd.to_vec())],
            Op::Scale { x, s } => vec![(*x, dyd.iter().map(|&g| g * *s).collect())],
            Op::Gap { x } => {
                let (_, _, h, w) = self.value(*x).dims4().expect("4-d");
                let inv = T::from_f64(1.0 / (h * w) as f64);
                let dx = dyd.iter().flat_map(|&g| std::iter::repeat(g * inv).take(h * w)).collect();
                vec![(*x, dx)]
            }
            Op::Linear { x, w, b } => {
                let xs = self.value(*x).shape();
                let (n, f) = (xs[0], xs[1]);
                let o = self.value(*w).shape()[0];
                let mut dx = vec![T::zero(); n * f];
                let mut dw = vec![T::zero(); o * f];
                matmul(n, o, f, dyd, false, self.value(*w).data(), false, T::zero(), &mut dx);
                matmul(o, n, f, dyd, true, self.value(*x).data(), false, T::zero(), &mut dw);
                let mut db = vec![T::zero(); o];
                for row in dyd.chunks(o) {
                    for (d, &g) in db.iter_mut().zip(row) {
                        *d = *d + g;
                    }
                }
                vec![(*x, dx), (*w, dw), (*b, db)]
            }
            Op::MseTo { x, target } => {
                let xd = self.value(*x).data();
                let k = dyd[0] * T::from_f64(2.0 / xd.len() as f64);
                vec![(*x, xd.iter().map(|&v| k * (v - *target)).collect())]
            }
            Op::CrossEntropy { logits, probs, labels } => {
                let k = probs.len() / labels.len();
                let scale = dyd[0] / T::from_f64(labels.len() as f64);
                let mut d: Vec<T> = probs.iter().map(|&p| p * scale).collect();
                for (i, &l) in labels.iter().enumerate() {
                    d[i * k + l] = d[i * k + l] - scale;
                }
                vec![(*logits, d)]
            }
            Op::L1 { a, b } => {
                let k = dyd[0] / T::from_f64(self.value(*a).numel() as f64);
                let da: Vec<T> = self
                    .value(*a)
                    .data()
                    .iter()
                    .zip(self.value(*b).data())
                    .map(|(&x, &y)| {
                        if x > y {
                            k
                        } else if x < y {
                            -k
                        } else {
                            T::zero()
                        }
                    })
                    .collect();
                let db = da.iter().map(|&v| -v).collect();
                vec![(*a, da), (*b, db)]
            }
            Op::DotConst { x, r } => vec![(*x, r.data().iter().map(|&v| v * dyd[0]).collect())],
        };
        for (v, g) in updates {
            self.accumulate(v, g);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kink_signs_cover_leaky_relu_and_l1() {
        let mut g = Graph::<f64>::new();
        let x = g.input(Tensor::from_f64(&[1, 1, 1, 3], &[1.0, -2.0, 0.0]).unwrap());
        let y = g.leaky_relu(x, 0.2);
        let t = g.constant(Tensor::from_f64(&[1, 1, 1, 3], &[0.5, 0.5, -0.5]).unwrap());
        g.l1(y, t).unwrap();
        assert_eq!(g.kink_signs(), [true, false, false, true, false, true]);
    }

    #[test]
    fn shared_subexpression_accumulates() {
        // f(x) = (x*2 + x*3) . 1 -> df/dx = 5 everywhere.
        let mut g = Graph::<f64>::new();
        let x = g.input(Tensor::from_f64(&[1, 1, 1, 3], &[1.0, -2.0, 0.5]).unwrap());
        let a = g.scale(x, 2.0);
        let b = g.scale(x, 3.0);
        let s = g.add(a, b).unwrap();
        let loss = g.dot_const(s, Tensor::full(&[1, 1, 1, 3], 1.0)).unwrap();
        g.backward(loss).unwrap();
        assert_eq!(g.grad(x).unwrap().data(), &[5.0, 5.0, 5.0]);
    }

    #[test]
    fn glu_saturation_and_midpoint() {
        let mut g = Graph::<f64>::new();
        let x = g.constant(Tensor::from_f64(&[1, 2, 1, 2], &[3.0, -4.0, 0.0, 0.0]).unwrap());
        let y = g.glu(x).unwrap();
        assert_eq!(g.value(y).data(), &[1.5, -2.0]);
        let x = g.constant(Tensor::from_f64(&[1, 2, 1, 1], &[3.0, 50.0]).unwrap());
        let y = g.glu(x).unwrap();
        assert!((g.value(y).data()[0] - 3.0).abs() < 1e-12);
        let odd = g.constant(Tensor::zeros(&[1, 3, 1, 1]));
        assert!(g.glu(odd).is_err());
    }

    #[test]
    fn instance_norm_statistics() {
        let mut g = Graph::<f64>::new();
        let data: Vec<f64> = (0..2 * 3 * 20).map(|i| ((i * 17) % 23) as f64 * 0.3 - 1.0).collect();
        let x = g.constant(Tensor::from_f64(&[2, 3, 4, 5], &data).unwrap());
        let gamma = g.constant(Tensor::full(&[3], 1.0));
        let beta = g.constant(Tensor::zeros(&[3]));
        let y = g.instance_norm(x, gamma, beta, 1e-5).unwrap();
        for s in g.value(y).data().chunks(20) {
            let mean = s.iter().sum::<f64>() / 20.0;
            let var = s.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 20.0;
            assert!(mean.abs() < 1e-6);
            assert!((var - 1.0).abs() < 1e-4);
        }
        let flat = g.constant(Tensor::full(&[1, 3, 2, 2], 7.0));
        let y = g.instance_norm(flat, gamma, beta, 1e-5).unwrap();
        assert!(g.value(y).data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn losses_closed_forms() {
        let mut g = Graph::<f64>::new();
        let ones = g.constant(Tensor::full(&[2, 1, 2, 2], 1.0));
        let zeros = g.constant(Tensor::zeros(&[2, 1, 2, 2]));
        let real = g.mse_to(ones, 1.0);
        let fake = g.mse_to(zeros, 0.0);
        assert_eq!(g.value(real).item() + g.value(fake).item(), 0.0);
        let logits = g.constant(Tensor::full(&[3, 4], 0.7));
        let ce = g.cross_entropy(logits, &[0, 3, 2]).unwrap();
        assert!((g.value(ce).item() - 4f64.ln()).abs() < 1e-12);
        assert!(g.cross_entropy(logits, &[0, 4, 1]).is_err());
        let l = g.l1(ones, ones).unwrap();
        assert_eq!(g.value(l).item(), 0.0);
    }

    #[test]
    fn identity_one_by_one_convolution() {
        let mut g = Graph::<f32>::new();
        let data: Vec<f64> = (0..2 * 2 * 3 * 4).map(|i| i as f64).collect();
        let x = g.constant(Tensor::from_f64(&[2, 2, 3, 4], &data).unwrap());
        let w = g.constant(Tensor::from_f64(&[2, 2, 1, 1], &[1.0, 0.0, 0.0, 1.0]).unwrap());
        let y = g.conv2d(x, w, None, (1, 1), (0, 0)).unwrap();
        assert_eq!(g.value(y), g.value(x));
    }

    #[test]
    fn untracked_graph_has_no_gradients() {
        let mut g = Graph::<f64>::new();
        let x = g.constant(Tensor::full(&[1, 1, 1, 2], 2.0));
        let l = g.mse_to(x, 0.0);
        g.backward(l).unwrap();
        assert!(g.grad(x).is_none());
    }
}
