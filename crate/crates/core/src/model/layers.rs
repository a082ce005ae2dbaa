//! Building blocks with explicit forward caches and backward passes.
//!
//! Sequences are `[len, features]` matrices; there is no batch axis, batches
//! are loops over examples.

use ndarray::linalg::general_mat_mul;
use ndarray::{s, Array1, Array2, ArrayView2, Axis, Zip};
use rand::Rng;

use super::real::Real;

const LN_EPS: f64 = 1e-5;

fn uniform<T: Real, R: Rng>(rng: &mut R, shape: (usize, usize), bound: f64) -> Array2<T> {
    Array2::from_shape_simple_fn(shape, || T::of(rng.random_range(-bound..bound)))
}

/// Accumulates `a^T b` into `out`.
fn add_at_b<T: Real>(out: &mut Array2<T>, a: &ArrayView2<T>, b: &ArrayView2<T>) {
    general_mat_mul(T::one(), &a.t(), b, T::one(), out);
}

#[derive(Debug, Clone, PartialEq)]
pub struct Linear<T> {
    /// `[in, out]`
    pub w: Array2<T>,
    pub b: Array1<T>,
}

impl<T: Real> Linear<T> {
    pub fn init<R: Rng>(rng: &mut R, fan_in: usize, fan_out: usize) -> Self {
        Self {
            w: uniform(rng, (fan_in, fan_out), 1.0 / (fan_in as f64).sqrt()),
            b: Array1::zeros(fan_out),
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            w: Array2::zeros(self.w.raw_dim()),
            b: Array1::zeros(self.b.raw_dim()),
        }
    }

    pub fn forward(&self, x: &ArrayView2<T>) -> Array2<T> {
        x.dot(&self.w) + &self.b
    }

    pub fn backward(&self, x: &ArrayView2<T>, dy: &ArrayView2<T>, grad: &mut Self) -> Array2<T> {
        add_at_b(&mut grad.w, x, dy);
        grad.b += &dy.sum_axis(Axis(0));
        dy.dot(&self.w.t())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerNorm<T> {
    pub gamma: Array1<T>,
    pub beta: Array1<T>,
}

pub struct LnCache<T> {
    xhat: Array2<T>,
    inv_std: Array1<T>,
}

impl<T: Real> LayerNorm<T> {
    pub fn new(dim: usize) -> Self {
        Self {
            gamma: Array1::ones(dim),
            beta: Array1::zeros(dim),
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            gamma: Array1::zeros(self.gamma.raw_dim()),
            beta: Array1::zeros(self.beta.raw_dim()),
        }
    }

    pub fn forward(&self, x: &ArrayView2<T>) -> (Array2<T>, LnCache<T>) {
        let n = T::of(x.ncols() as f64);
        let mean = x.sum_axis(Axis(1)) / n;
        let centered = x - &mean.view().insert_axis(Axis(1));
        let var = centered.mapv(|v| v * v).sum_axis(Axis(1)) / n;
        let inv_std = var.mapv(|v| T::one() / (v + T::of(LN_EPS)).sqrt());
        let xhat = centered * &inv_std.view().insert_axis(Axis(1));
        let y = &xhat * &self.gamma + &self.beta;
        (y, LnCache { xhat, inv_std })
    }

    pub fn backward(&self, dy: &ArrayView2<T>, cache: &LnCache<T>, grad: &mut Self) -> Array2<T> {
        grad.gamma += &(dy * &cache.xhat).sum_axis(Axis(0));
        grad.beta += &dy.sum_axis(Axis(0));
        let n = T::of(dy.ncols() as f64);
        let dxhat = dy * &self.gamma;
        let mean_d = dxhat.sum_axis(Axis(1)) / n;
        let mean_dx = (&dxhat * &cache.xhat).sum_axis(Axis(1)) / n;
        let mut dx = dxhat;
        Zip::from(dx.rows_mut())
            .and(cache.xhat.rows())
            .and(&mean_d)
            .and(&mean_dx)
            .and(&cache.inv_std)
            .for_each(|mut row, xh, &md, &mdx, &is| {
                Zip::from(&mut row).and(&xh).for_each(|d, &x| *d = is * (*d - md - x * mdx));
            });
        dx
    }
}

const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)
const GELU_K: f64 = 0.044_715;

pub fn gelu<T: Real>(x: T) -> T {
    let c = T::of(GELU_C);
    let k = T::of(GELU_K);
    let half = T::of(0.5);
    half * x * (T::one() + (c * (x + k * x * x * x)).tanh())
}

pub fn gelu_grad<T: Real>(x: T) -> T {
    let c = T::of(GELU_C);
    let k = T::of(GELU_K);
    let half = T::of(0.5);
    let t = (c * (x + k * x * x * x)).tanh();
    half * (T::one() + t) + half * x * (T::one() - t * t) * c * (T::one() + T::of(3.0) * k * x * x)
}

/// Row-wise softmax in place.
pub fn softmax_rows<T: Real>(m: &mut Array2<T>) {
    for mut row in m.rows_mut() {
        let max = row.iter().cloned().fold(T::neg_infinity(), T::max);
        row.mapv_inplace(|v| (v - max).exp());
        let sum: T = row.iter().cloned().sum();
        row.mapv_inplace(|v| v / sum);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Attention<T> {
    pub q: Linear<T>,
    pub k: Linear<T>,
    pub v: Linear<T>,
    pub o: Linear<T>,
}

pub struct AttnCache<T> {
    q: Array2<T>,
    k: Array2<T>,
    v: Array2<T>,
    probs: Vec<Array2<T>>,
    ctx: Array2<T>,
}

impl<T: Real> Attention<T> {
    pub fn init<R: Rng>(rng: &mut R, d: usize) -> Self {
        Self {
            q: Linear::init(rng, d, d),
            k: Linear::init(rng, d, d),
            v: Linear::init(rng, d, d),
            o: Linear::init(rng, d, d),
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            q: self.q.zeros_like(),
            k: self.k.zeros_like(),
            v: self.v.zeros_like(),
            o: self.o.zeros_like(),
        }
    }

    pub fn forward(
        &self,
        xq: &ArrayView2<T>,
        xkv: &ArrayView2<T>,
        n_heads: usize,
        causal: bool,
    ) -> (Array2<T>, AttnCache<T>) {
        let q = self.q.forward(xq);
        let k = self.k.forward(xkv);
        let v = self.v.forward(xkv);
        let d = q.ncols();
        let dh = d / n_heads;
        let scale = T::of(1.0 / (dh as f64).sqrt());
        let mut ctx = Array2::zeros((q.nrows(), d));
        let mut probs = Vec::with_capacity(n_heads);
        for h in 0..n_heads {
            let cols = s![.., h * dh..(h + 1) * dh];
            let mut scores = q.slice(cols).dot(&k.slice(cols).t()) * scale;
            if causal {
                for (i, mut row) in scores.rows_mut().into_iter().enumerate() {
                    row.slice_mut(s![i + 1..]).fill(T::neg_infinity());
                }
            }
            softmax_rows(&mut scores);
            ctx.slice_mut(cols).assign(&scores.dot(&v.slice(cols)));
            probs.push(scores);
        }
        let out = self.o.forward(&ctx.view());
        (out, AttnCache { q, k, v, probs, ctx })
    }

    /// Returns gradients with respect to the query input and the key/value input.
    pub fn backward(
        &self,
        xq: &ArrayView2<T>,
        xkv: &ArrayView2<T>,
        cache: &AttnCache<T>,
        dout: &ArrayView2<T>,
        grad: &mut Self,
    ) -> (Array2<T>, Array2<T>) {
        let dctx = self.o.backward(&cache.ctx.view(), dout, &mut grad.o);
        let n_heads = cache.probs.len();
        let d = cache.q.ncols();
        let dh = d / n_heads;
        let scale = T::of(1.0 / (dh as f64).sqrt());
        let mut dq = Array2::zeros(cache.q.raw_dim());
        let mut dk = Array2::zeros(cache.k.raw_dim());
        let mut dv = Array2::zeros(cache.v.raw_dim());
        for (h, p) in cache.probs.iter().enumerate() {
            let cols = s![.., h * dh..(h + 1) * dh];
            let d_o = dctx.slice(cols);
            let dp = d_o.dot(&cache.v.slice(cols).t());
            dv.slice_mut(cols).assign(&p.t().dot(&d_o));
            let row_dot = (&dp * p).sum_axis(Axis(1));
            let mut ds = dp;
            Zip::from(ds.rows_mut())
                .and(p.rows())
                .and(&row_dot)
                .for_each(|mut dr, pr, &rd| {
                    Zip::from(&mut dr)
                        .and(&pr)
                        .for_each(|g, &pv| *g = pv * (*g - rd) * scale);
                });
            dq.slice_mut(cols).assign(&ds.dot(&cache.k.slice(cols)));
            dk.slice_mut(cols).assign(&ds.t().dot(&cache.q.slice(cols)));
        }
        let dxq = self.q.backward(xq, &dq.view(), &mut grad.q);
        let mut dxkv = self.k.backward(xkv, &dk.view(), &mut grad.k);
        dxkv += &self.v.backward(xkv, &dv.view(), &mut grad.v);
        (dxq, dxkv)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeedForward<T> {
    pub up: Linear<T>,
    pub down: Linear<T>,
}

pub struct FfCache<T> {
    pre: Array2<T>,
    act: Array2<T>,
}

impl<T: Real> FeedForward<T> {
    pub fn init<R: Rng>(rng: &mut R, d: usize, hidden: usize) -> Self {
        Self {
            up: Linear::init(rng, d, hidden),
            down: Linear::init(rng, hidden, d),
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            up: self.up.zeros_like(),
            down: self.down.zeros_like(),
        }
    }

    pub fn forward(&self, x: &ArrayView2<T>) -> (Array2<T>, FfCache<T>) {
        let pre = self.up.forward(x);
        let act = pre.mapv(gelu);
        let out = self.down.forward(&act.view());
        (out, FfCache { pre, act })
    }

    pub fn backward(&self, x: &ArrayView2<T>, cache: &FfCache<T>, dy: &ArrayView2<T>, grad: &mut Self) -> Array2<T> {
        let mut dact = self.down.backward(&cache.act.view(), dy, &mut grad.down);
        Zip::from(&mut dact).and(&cache.pre).for_each(|d, &p| *d *= gelu_grad(p));
        self.up.backward(x, &dact.view(), &mut grad.up)
    }
}

/// Kernel-3, padding-1 convolution along time, computed as im2col + matmul.
#[derive(Debug, Clone, PartialEq)]
pub struct Conv1d<T> {
    /// `[3 * in_channels, out_channels]`, tap-major.
    pub w: Array2<T>,
    pub b: Array1<T>,
    pub stride: usize,
}

pub const CONV_KERNEL: usize = 3;

impl<T: Real> Conv1d<T> {
    pub fn init<R: Rng>(rng: &mut R, c_in: usize, c_out: usize, stride: usize) -> Self {
        let lin = Linear::init(rng, CONV_KERNEL * c_in, c_out);
        Self { w: lin.w, b: lin.b, stride }
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            w: Array2::zeros(self.w.raw_dim()),
            b: Array1::zeros(self.b.raw_dim()),
            stride: self.stride,
        }
    }

    pub fn out_len(&self, len: usize) -> usize {
        if len == 0 {
            0
        } else {
            (len - 1) / self.stride + 1
        }
    }

    fn im2col(&self, x: &ArrayView2<T>) -> Array2<T> {
        let (len, c_in) = x.dim();
        let out_len = self.out_len(len);
        let mut cols = Array2::zeros((out_len, CONV_KERNEL * c_in));
        for t in 0..out_len {
            for j in 0..CONV_KERNEL {
                let src = (t * self.stride + j) as isize - 1;
                if src >= 0 && (src as usize) < len {
                    cols.slice_mut(s![t, j * c_in..(j + 1) * c_in]).assign(&x.row(src as usize));
                }
            }
        }
        cols
    }

    /// Returns the output and the im2col matrix needed by `backward`.
    pub fn forward(&self, x: &ArrayView2<T>) -> (Array2<T>, Array2<T>) {
        let cols = self.im2col(x);
        let y = cols.dot(&self.w) + &self.b;
        (y, cols)
    }

    pub fn backward(&self, in_len: usize, cols: &Array2<T>, dy: &ArrayView2<T>, grad: &mut Self) -> Array2<T> {
        add_at_b(&mut grad.w, &cols.view(), dy);
        grad.b += &dy.sum_axis(Axis(0));
        let dcols = dy.dot(&self.w.t());
        let c_in = self.w.nrows() / CONV_KERNEL;
        let mut dx = Array2::zeros((in_len, c_in));
        for t in 0..dcols.nrows() {
            for j in 0..CONV_KERNEL {
                let src = (t * self.stride + j) as isize - 1;
                if src >= 0 && (src as usize) < in_len {
                    let mut row = dx.row_mut(src as usize);
                    row += &dcols.slice(s![t, j * c_in..(j + 1) * c_in]);
                }
            }
        }
        dx
    }
}

/// Stride-2 average pooling; a trailing odd frame is pooled alone.
pub fn avg_pool2<T: Real>(x: &ArrayView2<T>) -> Array2<T> {
    let (len, c) = x.dim();
    let out_len = len.div_ceil(2);
    let mut out = Array2::zeros((out_len, c));
    for i in 0..out_len {
        let a = 2 * i;
        let b = (2 * i + 2).min(len);
        let n = T::of((b - a) as f64);
        out.row_mut(i).assign(&(x.slice(s![a..b, ..]).sum_axis(Axis(0)) / n));
    }
    out
}

pub fn avg_pool2_backward<T: Real>(in_len: usize, dy: &ArrayView2<T>) -> Array2<T> {
    let mut dx = Array2::zeros((in_len, dy.ncols()));
    for i in 0..dy.nrows() {
        let a = 2 * i;
        let b = (2 * i + 2).min(in_len);
        let n = T::of((b - a) as f64);
        let share = dy.row(i).mapv(|v| v / n);
        for t in a..b {
            dx.row_mut(t).assign(&share);
        }
    }
    dx
}

/// Fixed sinusoidal position table `[len, d]`.
pub fn sinusoids<T: Real>(len: usize, d: usize) -> Array2<T> {
    Array2::from_shape_fn((len, d), |(pos, i)| {
        let rate = 1.0 / 10000f64.powf((2 * (i / 2)) as f64 / d as f64);
        let angle = pos as f64 * rate;
        T::of(if i % 2 == 0 { angle.sin() } else { angle.cos() })
    })
}
