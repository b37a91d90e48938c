//! Batched evaluation kernels.
//!
//! Input tangents travel as extra rows below the primal rows of every
//! activation matrix: a chunk of `b` points with `t` tangents is a
//! `b * (1 + t)` by `N` matrix. Affine maps act on all rows alike (biases only
//! on the primal rows), so the reverse pass through the tangent-augmented
//! graph is an ordinary reverse pass in which only the tanh nodes couple
//! primal and tangent rows.

use ndarray::linalg::general_mat_mul;
use ndarray::{s, Array1, Array2, ArrayView1, ArrayViewMut1, ArrayViewMut2, Axis, LinalgScalar};
use num_traits::Float;

use super::{CollocationSet, Layout};
use crate::Point;

pub(super) trait Real: Float + LinalgScalar + std::ops::AddAssign {}
impl Real for f32 {}
impl Real for f64 {}

const CHUNK: usize = 256;

fn cast<T: Real>(v: f64) -> T {
    T::from(v).expect("finite value representable")
}

fn uncast<T: Real>(v: T) -> f64 {
    v.to_f64().expect("float converts to f64")
}

struct Block<T> {
    w1: Array2<T>,
    b1: Array1<T>,
    w2: Array2<T>,
    b2: Array1<T>,
}

struct Weights<T> {
    wi: Array2<T>,
    bi: Array1<T>,
    blocks: Vec<Block<T>>,
    wo: Array1<T>,
    bo: T,
}

fn unpack<T: Real>(layout: Layout, params: &[f64]) -> Weights<T> {
    let n = layout.width;
    let vec = |off: usize, len: usize| Array1::from_iter(params[off..off + len].iter().map(|&v| cast(v)));
    let mat = |off: usize, rows: usize, cols: usize| {
        vec(off, rows * cols).into_shape_with_order((rows, cols)).expect("consistent shape")
    };
    Weights {
        wi: mat(layout.input_weights(), n, 2),
        bi: vec(layout.input_bias(), n),
        blocks: (0..layout.blocks)
            .map(|k| {
                let [w1, b1, w2, b2] = layout.block(k);
                Block {
                    w1: mat(w1, n, n),
                    b1: vec(b1, n),
                    w2: mat(w2, n, n),
                    b2: vec(b2, n),
                }
            })
            .collect(),
        wo: vec(layout.output_weights(), n),
        bo: cast(params[layout.output_bias()]),
    }
}

/// Pre- and post-activation of one tanh layer, stacked rows.
struct Tanh<T> {
    pre: Array2<T>,
    post: Array2<T>,
}

struct Tape<T> {
    primal: usize,
    tangents: usize,
    input: Array2<T>,
    first: Tanh<T>,
    blocks: Vec<(Tanh<T>, Tanh<T>)>,
}

fn tanh_forward<T: Real>(pre: Array2<T>, primal: usize, tangents: usize) -> Tanh<T> {
    let mut post = pre.clone();
    post.slice_mut(s![..primal, ..]).mapv_inplace(T::tanh);
    for k in 1..=tangents {
        for r in 0..primal {
            for j in 0..pre.ncols() {
                let s = post[[r, j]];
                post[[k * primal + r, j]] = (T::one() - s * s) * pre[[k * primal + r, j]];
            }
        }
    }
    Tanh { pre, post }
}

/// Cotangent of the pre-activation from that of the post-activation.
fn tanh_backward<T: Real>(layer: &Tanh<T>, bar: &Array2<T>, primal: usize, tangents: usize) -> Array2<T> {
    let mut out = Array2::zeros(bar.raw_dim());
    let two = T::one() + T::one();
    for r in 0..primal {
        for j in 0..bar.ncols() {
            let s = layer.post[[r, j]];
            let d = T::one() - s * s;
            let mut coupling = T::zero();
            for k in 1..=tangents {
                let row = k * primal + r;
                out[[row, j]] = d * bar[[row, j]];
                coupling += bar[[row, j]] * layer.pre[[row, j]];
            }
            out[[r, j]] = d * (bar[[r, j]] - two * s * coupling);
        }
    }
    out
}

fn affine<T: Real>(h: &Array2<T>, w: &Array2<T>, b: &Array1<T>, primal: usize) -> Array2<T> {
    let mut c = h.dot(&w.t());
    let mut head = c.slice_mut(s![..primal, ..]);
    head += b;
    c
}

/// Forward pass over one chunk; returns the stacked outputs `[u; du/dx_1; du/dx_2]`.
fn run_forward<T: Real>(w: &Weights<T>, points: &[Point], tangents: usize) -> (Tape<T>, Array1<T>) {
    let b = points.len();
    let mut input = Array2::zeros((b * (1 + tangents), 2));
    for (r, p) in points.iter().enumerate() {
        input[[r, 0]] = cast(p[0]);
        input[[r, 1]] = cast(p[1]);
        for k in 0..tangents {
            input[[(k + 1) * b + r, k]] = T::one();
        }
    }
    let first = tanh_forward(affine(&input, &w.wi, &w.bi, b), b, tangents);
    let mut blocks = Vec::with_capacity(w.blocks.len());
    let mut h = &first.post;
    for blk in &w.blocks {
        let inner = tanh_forward(affine(h, &blk.w1, &blk.b1, b), b, tangents);
        let mut c2 = affine(&inner.post, &blk.w2, &blk.b2, b);
        c2 += h;
        let outer = tanh_forward(c2, b, tangents);
        blocks.push((inner, outer));
        h = &blocks.last().expect("just pushed").1.post;
    }
    let mut u = h.dot(&w.wo);
    u.slice_mut(s![..b]).mapv_inplace(|v| v + w.bo);
    (
        Tape {
            primal: b,
            tangents,
            input,
            first,
            blocks,
        },
        u,
    )
}

/// Flat gradient buffer with matrix views into the declared layout.
struct Grad<T> {
    layout: Layout,
    data: Vec<T>,
}

impl<T: Real> Grad<T> {
    fn new(layout: Layout) -> Self {
        Self {
            layout,
            data: vec![T::zero(); layout.num_params()],
        }
    }

    fn mat(&mut self, off: usize, rows: usize, cols: usize) -> ArrayViewMut2<'_, T> {
        ArrayViewMut2::from_shape((rows, cols), &mut self.data[off..off + rows * cols]).expect("consistent shape")
    }

    fn vec(&mut self, off: usize, len: usize) -> ArrayViewMut1<'_, T> {
        ArrayViewMut1::from(&mut self.data[off..off + len])
    }

    /// `W += bar^T h`, `b += colsum(bar[..primal])`.
    fn accumulate(&mut self, w_off: usize, b_off: usize, bar: &Array2<T>, h: &Array2<T>, primal: usize) {
        let (rows, cols) = (bar.ncols(), h.ncols());
        general_mat_mul(T::one(), &bar.t(), h, T::one(), &mut self.mat(w_off, rows, cols));
        let sums = bar.slice(s![..primal, ..]).sum_axis(Axis(0));
        let mut bv = self.vec(b_off, rows);
        bv += &sums;
    }

    fn into_f64(self) -> Vec<f64> {
        self.data.into_iter().map(uncast).collect()
    }
}

fn run_reverse<T: Real>(w: &Weights<T>, tape: &Tape<T>, ubar: &Array1<T>, grad: &mut Grad<T>) {
    let (b, t) = (tape.primal, tape.tangents);
    let n = w.wo.len();
    let layout = grad.layout;
    let last = tape.blocks.last().map_or(&tape.first.post, |(_, outer)| &outer.post);
    let wo_bar = last.t().dot(ubar);
    let mut v = grad.vec(layout.output_weights(), n);
    v += &wo_bar;
    let bo = layout.output_bias();
    grad.data[bo] = ubar.slice(s![..b]).iter().fold(grad.data[bo], |acc, &x| acc + x);

    let ucol = ubar.view().insert_axis(Axis(1));
    let worow = w.wo.view().insert_axis(Axis(0));
    let mut hbar = ucol.dot(&worow);
    for (k, (blk, (inner, outer))) in w.blocks.iter().zip(&tape.blocks).enumerate().rev() {
        let [w1, b1, w2, b2] = layout.block(k);
        let h_in = if k == 0 { &tape.first.post } else { &tape.blocks[k - 1].1.post };
        let c2bar = tanh_backward(outer, &hbar, b, t);
        grad.accumulate(w2, b2, &c2bar, &inner.post, b);
        let s1bar = c2bar.dot(&blk.w2);
        let c1bar = tanh_backward(inner, &s1bar, b, t);
        grad.accumulate(w1, b1, &c1bar, h_in, b);
        hbar = c2bar;
        general_mat_mul(T::one(), &c1bar, &blk.w1, T::one(), &mut hbar);
    }
    let abar = tanh_backward(&tape.first, &hbar, b, t);
    grad.accumulate(layout.input_weights(), layout.input_bias(), &abar, &tape.input, b);
}

fn view_f64<T: Real>(v: ArrayView1<'_, T>) -> impl Iterator<Item = f64> + '_ {
    v.into_iter().map(|&x| uncast(x))
}

pub(super) fn forward<T: Real>(layout: Layout, params: &[f64], points: &[Point]) -> Vec<f64> {
    let w = unpack::<T>(layout, params);
    let mut out = Vec::with_capacity(points.len());
    for chunk in points.chunks(CHUNK) {
        let (_, u) = run_forward(&w, chunk, 0);
        out.extend(view_f64(u.view()));
    }
    out
}

pub(super) fn forward_tangent<T: Real>(layout: Layout, params: &[f64], points: &[Point]) -> (Vec<f64>, Vec<Point>) {
    let w = unpack::<T>(layout, params);
    let mut vals = Vec::with_capacity(points.len());
    let mut grads = Vec::with_capacity(points.len());
    for chunk in points.chunks(CHUNK) {
        let b = chunk.len();
        let (_, u) = run_forward(&w, chunk, 2);
        vals.extend(view_f64(u.slice(s![..b])));
        for r in 0..b {
            grads.push([uncast(u[b + r]), uncast(u[2 * b + r])]);
        }
    }
    (vals, grads)
}

pub(super) fn vjp<T: Real>(layout: Layout, params: &[f64], points: &[Point], cotangents: &[f64]) -> Vec<f64> {
    let w = unpack::<T>(layout, params);
    let mut grad = Grad::new(layout);
    for (chunk, cot) in points.chunks(CHUNK).zip(cotangents.chunks(CHUNK)) {
        let (tape, _) = run_forward(&w, chunk, 0);
        let ubar = Array1::from_iter(cot.iter().map(|&c| cast::<T>(c)));
        run_reverse(&w, &tape, &ubar, &mut grad);
    }
    grad.into_f64()
}

pub(super) fn collocation<T: Real>(layout: Layout, params: &[f64], set: &CollocationSet) -> (f64, Vec<f64>) {
    let w = unpack::<T>(layout, params);
    let mut grad = Grad::new(layout);
    let mut loss = 0.0;
    let mut start = 0;
    for chunk in set.interior.chunks(CHUNK) {
        let b = chunk.len();
        let (tape, u) = run_forward(&w, chunk, 2);
        let mut ubar = Array1::zeros(3 * b);
        for r in 0..b {
            let (wt, f) = (set.weights[start + r], set.loads[start + r]);
            let (val, gx, gy) = (uncast(u[r]), uncast(u[b + r]), uncast(u[2 * b + r]));
            loss += wt * (0.5 * (gx * gx + gy * gy) - f * val);
            ubar[r] = cast(-wt * f);
            ubar[b + r] = cast(wt * gx);
            ubar[2 * b + r] = cast(wt * gy);
        }
        run_reverse(&w, &tape, &ubar, &mut grad);
        start += b;
    }
    for (chunk, beta) in set.boundary.chunks(CHUNK).zip(set.boundary_weights.chunks(CHUNK)) {
        let (tape, u) = run_forward(&w, chunk, 0);
        let mut ubar = Array1::zeros(chunk.len());
        for r in 0..chunk.len() {
            let val = uncast(u[r]);
            loss += beta[r] * val * val;
            ubar[r] = cast(2.0 * beta[r] * val);
        }
        run_reverse(&w, &tape, &ubar, &mut grad);
    }
    (loss, grad.into_f64())
}
