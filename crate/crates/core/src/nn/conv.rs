//! im2col kernels for strided 2-D convolution and its transpose.

use super::tensor::{matmul, Scalar};
use crate::error::{arg, Result};

/// Geometry of a convolution mapping `(c_in, h, w)` to `(c_out, oh, ow)`.
/// A transposed convolution uses the same geometry with the roles of input
/// and output swapped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvGeom {
    pub c_in: usize,
    pub h: usize,
    pub w: usize,
    pub c_out: usize,
    pub kh: usize,
    pub kw: usize,
    pub sh: usize,
    pub sw: usize,
    pub ph: usize,
    pub pw: usize,
    pub oh: usize,
    pub ow: usize,
}

pub fn conv_out(len: usize, k: usize, s: usize, p: usize) -> Option<usize> {
    let padded = len + 2 * p;
    (s > 0 && padded >= k).then(|| (padded - k) / s + 1)
}

pub fn conv_transpose_out(len: usize, k: usize, s: usize, p: usize, op: usize) -> Option<usize> {
    if len == 0 || s == 0 {
        return None;
    }
    ((len - 1) * s + k + op).checked_sub(2 * p)
}

impl ConvGeom {
    #[allow(clippy::too_many_arguments)]
    pub fn forward(
        c_in: usize,
        h: usize,
        w: usize,
        c_out: usize,
        (kh, kw): (usize, usize),
        (sh, sw): (usize, usize),
        (ph, pw): (usize, usize),
    ) -> Result<Self> {
        match (conv_out(h, kh, sh, ph), conv_out(w, kw, sw, pw)) {
            (Some(oh), Some(ow)) if oh > 0 && ow > 0 => Ok(Self {
                c_in,
                h,
                w,
                c_out,
                kh,
                kw,
                sh,
                sw,
                ph,
                pw,
                oh,
                ow,
            }),
            _ => arg(format!(
                "kernel {kh}x{kw} stride {sh}x{sw} pad {ph}x{pw} does not fit input {h}x{w}"
            )),
        }
    }

    /// Geometry of the convolution whose adjoint is the transposed
    /// convolution taking `(c_in, h, w)` to `(c_out, oh, ow)`.
    #[allow(clippy::too_many_arguments)]
    pub fn transpose(
        c_in: usize,
        h: usize,
        w: usize,
        c_out: usize,
        (kh, kw): (usize, usize),
        (sh, sw): (usize, usize),
        (ph, pw): (usize, usize),
        (oph, opw): (usize, usize),
    ) -> Result<Self> {
        if oph >= sh.max(1) || opw >= sw.max(1) {
            return arg(format!("output padding {oph}x{opw} must be below stride {sh}x{sw}"));
        }
        let (Some(oh), Some(ow)) = (
            conv_transpose_out(h, kh, sh, ph, oph),
            conv_transpose_out(w, kw, sw, pw, opw),
        ) else {
            return arg(format!("transposed kernel {kh}x{kw} does not fit input {h}x{w}"));
        };
        // The underlying convolution maps the (oh, ow) output back to (h, w).
        let g = Self::forward(c_out, oh, ow, c_in, (kh, kw), (sh, sw), (ph, pw))?;
        if g.oh != h || g.ow != w {
            return arg("inconsistent transposed convolution geometry");
        }
        Ok(g)
    }

    pub fn col_rows(&self) -> usize {
        self.c_in * self.kh * self.kw
    }

    pub fn col_cols(&self) -> usize {
        self.oh * self.ow
    }

    pub fn in_len(&self) -> usize {
        self.c_in * self.h * self.w
    }

    pub fn out_len(&self) -> usize {
        self.c_out * self.oh * self.ow
    }
}

/// Output columns `ox` whose input column `ox * s + k - p` lies in `0..w`.
fn valid_cols(ow: usize, w: usize, s: usize, k: usize, p: usize) -> (usize, usize) {
    let lo = p.saturating_sub(k).div_ceil(s);
    // Largest ox with ox * s + k < w + p.
    let hi = if w + p > k { ((w + p - k - 1) / s + 1).min(ow) } else { 0 };
    (lo.min(hi), hi)
}

/// Unfolds one `(c_in, h, w)` item into `cols`, shaped `(c_in*kh*kw, oh*ow)`.
pub fn im2col<T: Scalar>(g: &ConvGeom, x: &[T], cols: &mut [T]) {
    let spatial = g.oh * g.ow;
    for ci in 0..g.c_in {
        let plane = &x[ci * g.h * g.w..(ci + 1) * g.h * g.w];
        for ki in 0..g.kh {
            for kj in 0..g.kw {
                let row = (ci * g.kh + ki) * g.kw + kj;
                let out = &mut cols[row * spatial..(row + 1) * spatial];
                let (lo, hi) = valid_cols(g.ow, g.w, g.sw, kj, g.pw);
                for oy in 0..g.oh {
                    let dst = &mut out[oy * g.ow..(oy + 1) * g.ow];
                    let iy = (oy * g.sh + ki) as isize - g.ph as isize;
                    if iy < 0 || iy >= g.h as isize || lo == hi {
                        dst.fill(T::zero());
                        continue;
                    }
                    let src = &plane[iy as usize * g.w..(iy as usize + 1) * g.w];
                    dst[..lo].fill(T::zero());
                    dst[hi..].fill(T::zero());
                    let start = lo * g.sw + kj - g.pw;
                    if g.sw == 1 {
                        dst[lo..hi].copy_from_slice(&src[start..start + hi - lo]);
                    } else {
                        for (d, s) in dst[lo..hi].iter_mut().zip(src[start..].iter().step_by(g.sw)) {
                            *d = *s;
                        }
                    }
                }
            }
        }
    }
}

/// Adjoint of [`im2col`]: scatters-adds `cols` into one `(c_in, h, w)` item.
pub fn col2im<T: Scalar>(g: &ConvGeom, cols: &[T], x: &mut [T]) {
    let spatial = g.oh * g.ow;
    for ci in 0..g.c_in {
        let plane = &mut x[ci * g.h * g.w..(ci + 1) * g.h * g.w];
        for ki in 0..g.kh {
            for kj in 0..g.kw {
                let row = (ci * g.kh + ki) * g.kw + kj;
                let src = &cols[row * spatial..(row + 1) * spatial];
                let (lo, hi) = valid_cols(g.ow, g.w, g.sw, kj, g.pw);
                if lo == hi {
                    continue;
                }
                let start = lo * g.sw + kj - g.pw;
                for oy in 0..g.oh {
                    let iy = (oy * g.sh + ki) as isize - g.ph as isize;
                    if iy < 0 || iy >= g.h as isize {
                        continue;
                    }
                    let dst = &mut plane[iy as usize * g.w..(iy as usize + 1) * g.w];
                    let s = &src[oy * g.ow + lo..oy * g.ow + hi];
                    if g.sw == 1 {
                        for (d, v) in dst[start..start + s.len()].iter_mut().zip(s) {
                            *d = *d + *v;
                        }
                    } else {
                        for (d, v) in dst[start..].iter_mut().step_by(g.sw).zip(s) {
                            *d = *d + *v;
                        }
                    }
                }
            }
        }
    }
}

/// Narrow convolutions (few output channels) run directly on the input
/// instead of through a large column buffer.
const DIRECT_MAX_OUT: usize = 4;

/// One row pairing between output row `oy` and input row `iy` for kernel tap
/// `(ci, ki, kj)`: output columns `lo..hi` read input columns from `start`
/// with the horizontal stride.
struct Tap {
    ci: usize,
    tap: usize,
    oy: usize,
    iy: usize,
    lo: usize,
    hi: usize,
    start: usize,
}

fn for_each_tap(g: &ConvGeom, mut f: impl FnMut(&Tap)) {
    for ci in 0..g.c_in {
        for ki in 0..g.kh {
            for kj in 0..g.kw {
                let (lo, hi) = valid_cols(g.ow, g.w, g.sw, kj, g.pw);
                if lo == hi {
                    continue;
                }
                let start = lo * g.sw + kj - g.pw;
                let tap = (ci * g.kh + ki) * g.kw + kj;
                for oy in 0..g.oh {
                    let iy = (oy * g.sh + ki) as isize - g.ph as isize;
                    if iy >= 0 && iy < g.h as isize {
                        f(&Tap { ci, tap, oy, iy: iy as usize, lo, hi, start });
                    }
                }
            }
        }
    }
}

fn input_row<'a, T>(g: &ConvGeom, x: &'a [T], t: &Tap) -> &'a [T] {
    &x[(t.ci * g.h + t.iy) * g.w + t.start..(t.ci * g.h + t.iy + 1) * g.w]
}

/// `dst[t] += a * src[t * step]`.
fn gather_axpy<T: Scalar>(dst: &mut [T], src: &[T], step: usize, a: T) {
    if step == 1 {
        let src = &src[..dst.len()];
        for (d, &s) in dst.iter_mut().zip(src) {
            *d = *d + a * s;
        }
    } else {
        for (d, &s) in dst.iter_mut().zip(src.iter().step_by(step)) {
            *d = *d + a * s;
        }
    }
}

/// `dst[t * step] += a * src[t]`.
fn scatter_axpy<T: Scalar>(dst: &mut [T], src: &[T], step: usize, a: T) {
    if step == 1 {
        for (d, &s) in dst[..src.len()].iter_mut().zip(src) {
            *d = *d + a * s;
        }
    } else {
        for (d, &s) in dst.iter_mut().step_by(step).zip(src) {
            *d = *d + a * s;
        }
    }
}

/// `sum_t a[t] * b[t * step]`, with independent partial sums so the
/// contiguous case vectorizes.
fn gather_dot<T: Scalar>(a: &[T], b: &[T], step: usize) -> T {
    if step != 1 {
        return a.iter().zip(b.iter().step_by(step)).fold(T::zero(), |s, (&u, &v)| s + u * v);
    }
    let b = &b[..a.len()];
    let mut acc = [T::zero(); 8];
    let (ac, bc) = (a.chunks_exact(8), b.chunks_exact(8));
    let tail = ac.remainder().iter().zip(bc.remainder()).fold(T::zero(), |s, (&u, &v)| s + u * v);
    for (x, y) in ac.zip(bc) {
        for l in 0..8 {
            acc[l] = acc[l] + x[l] * y[l];
        }
    }
    acc.iter().fold(tail, |s, &v| s + v)
}

fn direct_forward<T: Scalar>(g: &ConvGeom, x: &[T], w: &[T], y: &mut [T]) {
    let (rows, spatial) = (g.col_rows(), g.col_cols());
    for_each_tap(g, |t| {
        let src = input_row(g, x, t);
        for co in 0..g.c_out {
            let wv = w[co * rows + t.tap];
            let dst = &mut y[co * spatial + t.oy * g.ow + t.lo..co * spatial + t.oy * g.ow + t.hi];
            gather_axpy(dst, src, g.sw, wv);
        }
    });
}

fn direct_backward<T: Scalar>(g: &ConvGeom, x: &[T], w: &[T], dy: &[T], dw: &mut [T], mut dx: Option<&mut [T]>) {
    let (rows, spatial) = (g.col_rows(), g.col_cols());
    for_each_tap(g, |t| {
        for co in 0..g.c_out {
            let d = &dy[co * spatial + t.oy * g.ow + t.lo..co * spatial + t.oy * g.ow + t.hi];
            let src = input_row(g, x, t);
            let acc = gather_dot(d, src, g.sw);
            dw[co * rows + t.tap] = dw[co * rows + t.tap] + acc;
            if let Some(dx) = dx.as_deref_mut() {
                let wv = w[co * rows + t.tap];
                let row = (t.ci * g.h + t.iy) * g.w + t.start;
                scatter_axpy(&mut dx[row..(t.ci * g.h + t.iy + 1) * g.w], d, g.sw, wv);
            }
        }
    });
}

/// `y = conv(x, w) + b` for a batch; `w` is `(c_out, c_in, kh, kw)`.
pub fn conv_forward<T: Scalar>(g: &ConvGeom, n: usize, x: &[T], w: &[T], b: Option<&[T]>) -> Vec<T> {
    let (rows, spatial) = (g.col_rows(), g.col_cols());
    let direct = g.c_out <= DIRECT_MAX_OUT;
    let mut cols = vec![T::zero(); if direct { 0 } else { rows * spatial }];
    let mut y = vec![T::zero(); n * g.out_len()];
    for i in 0..n {
        let xi = &x[i * g.in_len()..(i + 1) * g.in_len()];
        let out = &mut y[i * g.out_len()..(i + 1) * g.out_len()];
        if let Some(b) = b {
            for (co, chunk) in out.chunks_mut(spatial).enumerate() {
                chunk.fill(b[co]);
            }
        }
        if g.c_out <= DIRECT_MAX_OUT {
            direct_forward(g, xi, w, out);
            continue;
        }
        im2col(g, xi, &mut cols);
        let beta = if b.is_some() { T::one() } else { T::zero() };
        matmul(g.c_out, rows, spatial, w, false, &cols, false, beta, out);
    }
    y
}

/// Gradients of [`conv_forward`]: returns `(dx, dw, db)`.
pub fn conv_backward<T: Scalar>(
    g: &ConvGeom,
    n: usize,
    x: &[T],
    w: &[T],
    dy: &[T],
    need_dx: bool,
) -> (Option<Vec<T>>, Vec<T>, Vec<T>) {
    let (rows, spatial) = (g.col_rows(), g.col_cols());
    let direct = g.c_out <= DIRECT_MAX_OUT;
    let mut cols = vec![T::zero(); if direct { 0 } else { rows * spatial }];
    let mut dw = vec![T::zero(); g.c_out * rows];
    let mut db = vec![T::zero(); g.c_out];
    let mut dx = need_dx.then(|| vec![T::zero(); n * g.in_len()]);
    for i in 0..n {
        let dyi = &dy[i * g.out_len()..(i + 1) * g.out_len()];
        for (co, chunk) in dyi.chunks(spatial).enumerate() {
            db[co] = chunk.iter().fold(db[co], |acc, &v| acc + v);
        }
        let xi = &x[i * g.in_len()..(i + 1) * g.in_len()];
        if direct {
            let dxi = dx.as_mut().map(|d| &mut d[i * g.in_len()..(i + 1) * g.in_len()]);
            direct_backward(g, xi, w, dyi, &mut dw, dxi);
            continue;
        }
        im2col(g, xi, &mut cols);
        matmul(g.c_out, spatial, rows, dyi, false, &cols, true, T::one(), &mut dw);
        if let Some(dx) = dx.as_mut() {
            matmul(rows, g.c_out, spatial, w, true, dyi, false, T::zero(), &mut cols);
            col2im(g, &cols, &mut dx[i * g.in_len()..(i + 1) * g.in_len()]);
        }
    }
    (dx, dw, db)
}

/// Transposed convolution for a batch: `x` is `(n, g.c_out, g.oh, g.ow)`,
/// the result `(n, g.c_in, g.h, g.w)`; `w` is `(g.c_out, g.c_in, kh, kw)`,
/// i.e. `(in_channels, out_channels, kh, kw)` from the caller's view.
pub fn conv_t_forward<T: Scalar>(g: &ConvGeom, n: usize, x: &[T], w: &[T], b: Option<&[T]>) -> Vec<T> {
    let (rows, spatial) = (g.col_rows(), g.col_cols());
    let mut cols = vec![T::zero(); rows * spatial];
    let mut y = vec![T::zero(); n * g.in_len()];
    for i in 0..n {
        let xi = &x[i * g.out_len()..(i + 1) * g.out_len()];
        matmul(rows, g.c_out, spatial, w, true, xi, false, T::zero(), &mut cols);
        let out = &mut y[i * g.in_len()..(i + 1) * g.in_len()];
        col2im(g, &cols, out);
        if let Some(b) = b {
            for (c, chunk) in out.chunks_mut(g.h * g.w).enumerate() {
                chunk.iter_mut().for_each(|v| *v = *v + b[c]);
            }
        }
    }
    y
}

/// Gradients of [`conv_t_forward`]: returns `(dx, dw, db)`.
pub fn conv_t_backward<T: Scalar>(
    g: &ConvGeom,
    n: usize,
    x: &[T],
    w: &[T],
    dy: &[T],
    need_dx: bool,
) -> (Option<Vec<T>>, Vec<T>, Vec<T>) {
    let (rows, spatial) = (g.col_rows(), g.col_cols());
    let mut cols = vec![T::zero(); rows * spatial];
    let mut dw = vec![T::zero(); g.c_out * rows];
    let mut db = vec![T::zero(); g.c_in];
    let mut dx = need_dx.then(|| vec![T::zero(); n * g.out_len()]);
    for i in 0..n {
        let dyi = &dy[i * g.in_len()..(i + 1) * g.in_len()];
        for (c, chunk) in dyi.chunks(g.h * g.w).enumerate() {
            db[c] = chunk.iter().fold(db[c], |acc, &v| acc + v);
        }
        im2col(g, dyi, &mut cols);
        let xi = &x[i * g.out_len()..(i + 1) * g.out_len()];
        matmul(g.c_out, spatial, rows, xi, false, &cols, true, T::one(), &mut dw);
        if let Some(dx) = dx.as_mut() {
            matmul(
                g.c_out,
                rows,
                spatial,
                w,
                false,
                &cols,
                false,
                T::zero(),
                &mut dx[i * g.out_len()..(i + 1) * g.out_len()],
            );
        }
    }
    (dx, dw, db)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn output_size_formulas() {
        assert_eq!(conv_out(60, 4, 2, 1), Some(30));
        assert_eq!(conv_out(400, 8, 2, 3), Some(200));
        assert_eq!(conv_out(15, 4, 3, 1), Some(5));
        assert_eq!(conv_out(5, 5, 1, 0), Some(1));
        assert_eq!(conv_transpose_out(5, 4, 3, 1, 1), Some(15));
        assert_eq!(conv_transpose_out(15, 4, 2, 1, 0), Some(30));
        assert_eq!(conv_transpose_out(100, 8, 2, 3, 0), Some(200));
    }

    #[test]
    fn direct_backward_matches_columns() {
        let g = ConvGeom::forward(3, 7, 9, 2, (3, 4), (2, 2), (1, 2)).unwrap();
        let x: Vec<f64> = (0..g.in_len()).map(|i| ((i * 7) % 13) as f64 - 6.0).collect();
        let w: Vec<f64> = (0..2 * g.col_rows()).map(|i| ((i * 5) % 11) as f64 * 0.1).collect();
        let dy: Vec<f64> = (0..g.out_len()).map(|i| ((i * 3) % 7) as f64 - 3.0).collect();
        let (rows, spatial) = (g.col_rows(), g.col_cols());
        let mut cols = vec![0.0; rows * spatial];
        im2col(&g, &x, &mut cols);
        let mut dw_ref = vec![0.0; 2 * rows];
        matmul(2, spatial, rows, &dy, false, &cols, true, 0.0, &mut dw_ref);
        matmul(rows, 2, spatial, &w, true, &dy, false, 0.0, &mut cols);
        let mut dx_ref = vec![0.0; g.in_len()];
        col2im(&g, &cols, &mut dx_ref);
        let (dx, dw, _) = conv_backward(&g, 1, &x, &w, &dy, true);
        for (a, b) in dw.iter().zip(&dw_ref).chain(dx.unwrap().iter().zip(&dx_ref)) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn valid_column_ranges() {
        for (ow, w, s, k, p) in [(200, 400, 2, 0, 3), (200, 400, 2, 7, 3), (400, 400, 1, 8, 4), (3, 2, 1, 0, 5)] {
            let (lo, hi) = valid_cols(ow, w, s, k, p);
            for ox in 0..ow {
                let ix = (ox * s + k) as isize - p as isize;
                assert_eq!((lo..hi).contains(&ox), ix >= 0 && ix < w as isize, "{ow} {w} {s} {k} {p} {ox}");
            }
        }
    }

    #[test]
    fn direct_convolution_matches_im2col() {
        let g = ConvGeom::forward(2, 5, 6, 3, (3, 2), (2, 1), (1, 1)).unwrap();
        let x: Vec<f64> = (0..g.in_len()).map(|i| ((i * 7) % 13) as f64 - 6.0).collect();
        let w: Vec<f64> = (0..3 * 2 * 3 * 2).map(|i| ((i * 5) % 11) as f64 * 0.1).collect();
        let b = [0.5, -1.0, 2.0];
        let y = conv_forward(&g, 1, &x, &w, Some(&b));
        for co in 0..3 {
            for oy in 0..g.oh {
                for ox in 0..g.ow {
                    let mut acc = b[co];
                    for ci in 0..2 {
                        for ki in 0..3 {
                            for kj in 0..2 {
                                let iy = (oy * 2 + ki) as isize - 1;
                                let ix = (ox + kj) as isize - 1;
                                if iy >= 0 && iy < 5 && ix >= 0 && ix < 6 {
                                    acc += w[((co * 2 + ci) * 3 + ki) * 2 + kj]
                                        * x[(ci * 5 + iy as usize) * 6 + ix as usize];
                                }
                            }
                        }
                    }
                    assert!((y[(co * g.oh + oy) * g.ow + ox] - acc).abs() < 1e-12);
                }
            }
        }
    }
}
