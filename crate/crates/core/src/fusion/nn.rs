//! Minimal dense layers with hand-written backward passes.
//!
//! Parameters live in one flat `f64` slice; layers address their tensors by
//! index range so the same ranges index the gradient buffer.

use std::ops::Range;

const LN_EPS: f64 = 1e-6;

/// Row-major matrix; rows are tokens.
#[derive(Clone, Debug, PartialEq)]
pub struct Mat {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols);
        Self { rows, cols, data }
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn add_assign(&mut self, other: &Mat) {
        debug_assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    /// Column-wise concatenation `[self | other]`.
    pub fn hconcat(&self, other: &Mat) -> Mat {
        assert_eq!(self.rows, other.rows);
        let cols = self.cols + other.cols;
        let mut data = Vec::with_capacity(self.rows * cols);
        for r in 0..self.rows {
            data.extend_from_slice(self.row(r));
            data.extend_from_slice(other.row(r));
        }
        Mat::from_vec(self.rows, cols, data)
    }

    /// Inverse of [`Mat::hconcat`]: splits off the first `left` columns.
    pub fn hsplit(&self, left: usize) -> (Mat, Mat) {
        let right = self.cols - left;
        let mut a = Vec::with_capacity(self.rows * left);
        let mut b = Vec::with_capacity(self.rows * right);
        for r in 0..self.rows {
            a.extend_from_slice(&self.row(r)[..left]);
            b.extend_from_slice(&self.row(r)[left..]);
        }
        (Mat::from_vec(self.rows, left, a), Mat::from_vec(self.rows, right, b))
    }
}

/// `y = x W^T + b` with `W` stored `out x in`.
#[derive(Clone, Debug)]
pub struct LinearRef {
    pub weight: Range<usize>,
    pub bias: Range<usize>,
    pub input: usize,
    pub output: usize,
}

impl LinearRef {
    pub fn forward(&self, p: &[f64], x: &Mat) -> Mat {
        debug_assert_eq!(x.cols, self.input);
        let w = &p[self.weight.clone()];
        let b = &p[self.bias.clone()];
        let mut y = Mat::zeros(x.rows, self.output);
        for r in 0..x.rows {
            let xr = x.row(r);
            let yr = y.row_mut(r);
            for (o, out) in yr.iter_mut().enumerate() {
                let wr = &w[o * self.input..(o + 1) * self.input];
                let mut acc = b[o];
                for (xi, wi) in xr.iter().zip(wr) {
                    acc += xi * wi;
                }
                *out = acc;
            }
        }
        y
    }

    /// Accumulates parameter gradients into `g`, returns the input gradient.
    pub fn backward(&self, p: &[f64], g: &mut [f64], x: &Mat, dy: &Mat) -> Mat {
        let w = &p[self.weight.clone()];
        let mut dx = Mat::zeros(x.rows, self.input);
        for r in 0..x.rows {
            let xr = x.row(r);
            let dyr = dy.row(r);
            for (o, &d) in dyr.iter().enumerate() {
                if d == 0.0 {
                    continue;
                }
                g[self.bias.start + o] += d;
                let wrow = self.weight.start + o * self.input;
                for i in 0..self.input {
                    g[wrow + i] += d * xr[i];
                }
                let wr = &w[o * self.input..(o + 1) * self.input];
                let dxr = dx.row_mut(r);
                for i in 0..self.input {
                    dxr[i] += d * wr[i];
                }
            }
        }
        dx
    }
}

#[derive(Clone, Debug)]
pub struct LayerNormRef {
    pub gamma: Range<usize>,
    pub beta: Range<usize>,
    pub dim: usize,
}

pub struct LnCache {
    xhat: Mat,
    inv_std: Vec<f64>,
}

impl LayerNormRef {
    pub fn forward(&self, p: &[f64], x: &Mat) -> (Mat, LnCache) {
        let gamma = &p[self.gamma.clone()];
        let beta = &p[self.beta.clone()];
        let n = self.dim as f64;
        let mut y = Mat::zeros(x.rows, x.cols);
        let mut xhat = Mat::zeros(x.rows, x.cols);
        let mut inv_std = Vec::with_capacity(x.rows);
        for r in 0..x.rows {
            let xr = x.row(r);
            let mean = xr.iter().sum::<f64>() / n;
            let var = xr.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
            let is = 1.0 / (var + LN_EPS).sqrt();
            inv_std.push(is);
            for c in 0..x.cols {
                let h = (xr[c] - mean) * is;
                xhat.data[r * x.cols + c] = h;
                y.data[r * x.cols + c] = h * gamma[c] + beta[c];
            }
        }
        (y, LnCache { xhat, inv_std })
    }

    pub fn backward(&self, p: &[f64], g: &mut [f64], cache: &LnCache, dy: &Mat) -> Mat {
        let gamma = &p[self.gamma.clone()];
        let n = self.dim as f64;
        let mut dx = Mat::zeros(dy.rows, dy.cols);
        for r in 0..dy.rows {
            let dyr = dy.row(r);
            let xh = cache.xhat.row(r);
            let mut mean_d = 0.0;
            let mut mean_dx = 0.0;
            for c in 0..dy.cols {
                g[self.gamma.start + c] += dyr[c] * xh[c];
                g[self.beta.start + c] += dyr[c];
                let d = dyr[c] * gamma[c];
                mean_d += d;
                mean_dx += d * xh[c];
            }
            mean_d /= n;
            mean_dx /= n;
            let is = cache.inv_std[r];
            let dxr = dx.row_mut(r);
            for c in 0..dy.cols {
                let d = dyr[c] * gamma[c];
                dxr[c] = is * (d - mean_d - xh[c] * mean_dx);
            }
        }
        dx
    }
}

/// Pointwise nonlinearity.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    /// tanh approximation
    Gelu,
    Relu,
    Identity,
}

const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2 / pi)

impl Activation {
    pub fn apply(self, x: &Mat) -> Mat {
        let data = x
            .data
            .iter()
            .map(|&v| match self {
                Activation::Gelu => 0.5 * v * (1.0 + (GELU_C * (v + 0.044715 * v * v * v)).tanh()),
                Activation::Relu => v.max(0.0),
                Activation::Identity => v,
            })
            .collect();
        Mat::from_vec(x.rows, x.cols, data)
    }

    /// `dy * f'(x)`, with `x` the pre-activation.
    pub fn backward(self, x: &Mat, dy: &Mat) -> Mat {
        let data = x
            .data
            .iter()
            .zip(&dy.data)
            .map(|(&v, &d)| match self {
                Activation::Gelu => {
                    let u = GELU_C * (v + 0.044715 * v * v * v);
                    let t = u.tanh();
                    let du = GELU_C * (1.0 + 3.0 * 0.044715 * v * v);
                    d * (0.5 * (1.0 + t) + 0.5 * v * (1.0 - t * t) * du)
                }
                Activation::Relu => {
                    if v > 0.0 {
                        d
                    } else {
                        0.0
                    }
                }
                Activation::Identity => d,
            })
            .collect();
        Mat::from_vec(x.rows, x.cols, data)
    }
}

/// Pre-norm transformer block: `x + Attn(LN(x))` then `x + MLP(LN(x))`.
#[derive(Clone, Debug)]
pub struct TransformerRef {
    pub ln1: LayerNormRef,
    pub qkv: LinearRef,
    pub proj: LinearRef,
    pub ln2: LayerNormRef,
    pub fc1: LinearRef,
    pub fc2: LinearRef,
    pub heads: usize,
}

pub struct TransformerCache {
    ln1: LnCache,
    h1: Mat,
    qkv: Mat,
    probs: Vec<Mat>,
    attn: Mat,
    ln2: LnCache,
    h2: Mat,
    pre: Mat,
    act: Mat,
}

impl TransformerRef {
    fn dim(&self) -> usize {
        self.ln1.dim
    }

    pub fn forward(&self, p: &[f64], x: &Mat) -> (Mat, TransformerCache) {
        let d = self.dim();
        let dh = d / self.heads;
        let scale = 1.0 / (dh as f64).sqrt();
        let t = x.rows;

        let (h1, ln1) = self.ln1.forward(p, x);
        let qkv = self.qkv.forward(p, &h1);
        let mut attn = Mat::zeros(t, d);
        let mut probs = Vec::with_capacity(self.heads);
        for h in 0..self.heads {
            let (qo, ko, vo) = (h * dh, d + h * dh, 2 * d + h * dh);
            let mut pm = Mat::zeros(t, t);
            for i in 0..t {
                let qi = &qkv.row(i)[qo..qo + dh];
                let row = pm.row_mut(i);
                let mut max = f64::NEG_INFINITY;
                for j in 0..t {
                    let kj = &qkv.row(j)[ko..ko + dh];
                    let s = qi.iter().zip(kj).map(|(a, b)| a * b).sum::<f64>() * scale;
                    row[j] = s;
                    max = max.max(s);
                }
                let mut z = 0.0;
                for v in row.iter_mut() {
                    *v = (*v - max).exp();
                    z += *v;
                }
                for v in row.iter_mut() {
                    *v /= z;
                }
            }
            for i in 0..t {
                for j in 0..t {
                    let pij = pm.data[i * t + j];
                    let vj = &qkv.row(j)[vo..vo + dh];
                    let out = &mut attn.row_mut(i)[h * dh..(h + 1) * dh];
                    for c in 0..dh {
                        out[c] += pij * vj[c];
                    }
                }
            }
            probs.push(pm);
        }
        let mut x2 = self.proj.forward(p, &attn);
        x2.add_assign(x);

        let (h2, ln2) = self.ln2.forward(p, &x2);
        let pre = self.fc1.forward(p, &h2);
        let act = Activation::Gelu.apply(&pre);
        let mut y = self.fc2.forward(p, &act);
        y.add_assign(&x2);
        (
            y,
            TransformerCache {
                ln1,
                h1,
                qkv,
                probs,
                attn,
                ln2,
                h2,
                pre,
                act,
            },
        )
    }

    pub fn backward(&self, p: &[f64], g: &mut [f64], c: &TransformerCache, dy: &Mat) -> Mat {
        let d = self.dim();
        let dh = d / self.heads;
        let scale = 1.0 / (dh as f64).sqrt();
        let t = dy.rows;

        // MLP branch
        let d_act = self.fc2.backward(p, g, &c.act, dy);
        let d_pre = Activation::Gelu.backward(&c.pre, &d_act);
        let d_h2 = self.fc1.backward(p, g, &c.h2, &d_pre);
        let mut d_x2 = self.ln2.backward(p, g, &c.ln2, &d_h2);
        d_x2.add_assign(dy);

        // attention branch
        let d_attn = self.proj.backward(p, g, &c.attn, &d_x2);
        let mut d_qkv = Mat::zeros(t, 3 * d);
        for h in 0..self.heads {
            let (qo, ko, vo) = (h * dh, d + h * dh, 2 * d + h * dh);
            let pm = &c.probs[h];
            let mut d_p = Mat::zeros(t, t);
            for i in 0..t {
                let doi = &d_attn.row(i)[h * dh..(h + 1) * dh];
                for j in 0..t {
                    let vj = &c.qkv.row(j)[vo..vo + dh];
                    d_p.data[i * t + j] = doi.iter().zip(vj).map(|(a, b)| a * b).sum();
                    let pij = pm.data[i * t + j];
                    let dv = &mut d_qkv.row_mut(j)[vo..vo + dh];
                    for k in 0..dh {
                        dv[k] += pij * doi[k];
                    }
                }
            }
            for i in 0..t {
                let pr = pm.row(i);
                let dpr = d_p.row(i);
                let dot: f64 = pr.iter().zip(dpr).map(|(a, b)| a * b).sum();
                for j in 0..t {
                    let ds = pr[j] * (dpr[j] - dot) * scale;
                    if ds == 0.0 {
                        continue;
                    }
                    for k in 0..dh {
                        let qik = c.qkv.data[i * 3 * d + qo + k];
                        let kjk = c.qkv.data[j * 3 * d + ko + k];
                        d_qkv.data[i * 3 * d + qo + k] += ds * kjk;
                        d_qkv.data[j * 3 * d + ko + k] += ds * qik;
                    }
                }
            }
        }
        let d_h1 = self.qkv.backward(p, g, &c.h1, &d_qkv);
        let mut dx = self.ln1.backward(p, g, &c.ln1, &d_h1);
        dx.add_assign(&d_x2);
        dx
    }
}

/// Either a transformer block or a single dense layer.
#[derive(Clone, Debug)]
pub enum BlockRef {
    Transformer(TransformerRef),
    Linear(LinearRef),
}

pub enum BlockCache {
    Transformer(TransformerCache),
    Linear(Mat),
}

impl BlockRef {
    pub fn forward(&self, p: &[f64], x: &Mat) -> (Mat, BlockCache) {
        match self {
            BlockRef::Transformer(t) => {
                let (y, c) = t.forward(p, x);
                (y, BlockCache::Transformer(c))
            }
            BlockRef::Linear(l) => (l.forward(p, x), BlockCache::Linear(x.clone())),
        }
    }

    pub fn backward(&self, p: &[f64], g: &mut [f64], cache: &BlockCache, dy: &Mat) -> Mat {
        match (self, cache) {
            (BlockRef::Transformer(t), BlockCache::Transformer(c)) => t.backward(p, g, c, dy),
            (BlockRef::Linear(l), BlockCache::Linear(x)) => l.backward(p, g, x, dy),
            _ => unreachable!("block cache does not match block kind"),
        }
    }
}
