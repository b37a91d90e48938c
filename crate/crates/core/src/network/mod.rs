//! The residual tanh network `u = C_o . bl_m . ... . bl_1 . sigma . C_i`
//! with blocks `bl(z) = sigma(W_2 sigma(W_1 z + b_1) + b_2 + z)`.
//!
//! Parameters live in one flat vector in declared order:
//! `W_i` (N x 2, row-major), `b_i`, then per block `W_1, b_1, W_2, b_2`,
//! then the output weights and bias. Three derivative paths are provided:
//! forward tangents in `x` ([`ResNet::input_gradient`]), reverse mode for
//! weighted point sums ([`ResNet::param_vjp`]) and forward-over-reverse for
//! collocation energies ([`ResNet::collocation_loss_grad`]).

mod checkpoint;
mod kernels;

use std::sync::atomic::{AtomicU64, Ordering};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Point, Result};

pub use checkpoint::{read_checkpoint, write_checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};

/// Gain recommended for tanh layers.
pub const TANH_GAIN: f64 = 5.0 / 3.0;

/// Arithmetic used by the evaluation kernels. Parameters are always stored
/// as `f64`; in `F32` mode they are rounded after every update and all
/// network arithmetic runs in single precision.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    #[default]
    F64,
    F32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum InitScheme {
    /// Glorot-uniform weights with tanh gain everywhere, zero biases.
    Glorot,
    /// As `Glorot`, but the output layer starts at zero so that the initial
    /// network satisfies the homogeneous boundary condition.
    #[default]
    GlorotZeroOutput,
}

/// Offsets of the parameter groups inside the flat vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Layout {
    pub width: usize,
    pub blocks: usize,
}

impl Layout {
    pub fn num_params(&self) -> usize {
        let n = self.width;
        3 * n + self.blocks * (2 * n * n + 2 * n) + n + 1
    }

    pub fn input_weights(&self) -> usize {
        0
    }

    pub fn input_bias(&self) -> usize {
        2 * self.width
    }

    fn block_start(&self, k: usize) -> usize {
        let n = self.width;
        3 * n + k * (2 * n * n + 2 * n)
    }

    /// Offsets of `(W_1, b_1, W_2, b_2)` of block `k`.
    pub fn block(&self, k: usize) -> [usize; 4] {
        let n = self.width;
        let s = self.block_start(k);
        [s, s + n * n, s + n * n + n, s + 2 * n * n + n]
    }

    pub fn output_weights(&self) -> usize {
        self.block_start(self.blocks)
    }

    pub fn output_bias(&self) -> usize {
        self.output_weights() + self.width
    }
}

/// Number of points pushed through each evaluation path, for checking which
/// derivatives a training backend actually uses.
#[derive(Debug, Default)]
pub struct OpCounters {
    forward: AtomicU64,
    tangent: AtomicU64,
    reverse: AtomicU64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct OpCounts {
    /// Primal evaluations without derivatives.
    pub forward: u64,
    /// Evaluations carrying input tangents (spatial gradients).
    pub tangent: u64,
    /// Points seeded into a reverse pass.
    pub reverse: u64,
}

impl OpCounters {
    fn add(&self, counter: &AtomicU64, n: usize) {
        counter.fetch_add(n as u64, Ordering::Relaxed);
    }

    pub fn snapshot(&self) -> OpCounts {
        OpCounts {
            forward: self.forward.load(Ordering::Relaxed),
            tangent: self.tangent.load(Ordering::Relaxed),
            reverse: self.reverse.load(Ordering::Relaxed),
        }
    }

    pub fn reset(&self) {
        self.forward.store(0, Ordering::Relaxed);
        self.tangent.store(0, Ordering::Relaxed);
        self.reverse.store(0, Ordering::Relaxed);
    }
}

/// Gradient with respect to the flat parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamGradient(pub Vec<f64>);

impl ParamGradient {
    pub fn zeros(len: usize) -> Self {
        Self(vec![0.0; len])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn dot(&self, d: &[f64]) -> f64 {
        self.0.iter().zip(d).map(|(a, b)| a * b).sum()
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn add_assign(&mut self, other: &ParamGradient) {
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            *a += b;
        }
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }
}

/// Collocation energy data: interior points with weights and loads, and
/// boundary points with penalty weights.
///
/// The loss is `sum_i w_i (|grad u(x_i)|^2 / 2 - f_i u(x_i)) + sum_j beta_j u(y_j)^2`.
#[derive(Debug, Clone, Default)]
pub struct CollocationSet {
    pub interior: Vec<Point>,
    pub weights: Vec<f64>,
    pub loads: Vec<f64>,
    pub boundary: Vec<Point>,
    pub boundary_weights: Vec<f64>,
}

impl CollocationSet {
    fn check(&self) -> Result<()> {
        let n = self.interior.len();
        for found in [self.weights.len(), self.loads.len()] {
            if found != n {
                return Err(Error::DimensionMismatch { expected: n, found });
            }
        }
        if self.boundary_weights.len() != self.boundary.len() {
            return Err(Error::DimensionMismatch {
                expected: self.boundary.len(),
                found: self.boundary_weights.len(),
            });
        }
        Ok(())
    }
}

#[derive(Debug)]
pub struct ResNet {
    layout: Layout,
    params: Vec<f64>,
    precision: Precision,
    counters: OpCounters,
}

impl Clone for ResNet {
    fn clone(&self) -> Self {
        Self {
            layout: self.layout,
            params: self.params.clone(),
            precision: self.precision,
            counters: OpCounters::default(),
        }
    }
}

impl PartialEq for ResNet {
    fn eq(&self, other: &Self) -> bool {
        self.layout == other.layout && self.precision == other.precision && self.params == other.params
    }
}

fn check_dims(width: usize, blocks: usize) -> Result<()> {
    if width == 0 || blocks == 0 {
        return Err(Error::InvalidArgument(format!(
            "network needs positive width and block count, got N={width}, m={blocks}"
        )));
    }
    Ok(())
}

impl ResNet {
    pub fn init(width: usize, blocks: usize, seed: u64, scheme: InitScheme) -> Result<Self> {
        check_dims(width, blocks)?;
        let layout = Layout { width, blocks };
        let mut params = vec![0.0; layout.num_params()];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut fill = |slice: &mut [f64], fan_in: usize, fan_out: usize| {
            let limit = TANH_GAIN * (6.0 / (fan_in + fan_out) as f64).sqrt();
            for v in slice {
                *v = rng.random_range(-limit..limit);
            }
        };
        let n = width;
        fill(&mut params[..2 * n], 2, n);
        for k in 0..blocks {
            let [w1, _, w2, _] = layout.block(k);
            fill(&mut params[w1..w1 + n * n], n, n);
            fill(&mut params[w2..w2 + n * n], n, n);
        }
        let wo = layout.output_weights();
        match scheme {
            InitScheme::Glorot => fill(&mut params[wo..wo + n], n, 1),
            InitScheme::GlorotZeroOutput => {}
        }
        Self::from_params(width, blocks, params)
    }

    pub fn zeros(width: usize, blocks: usize) -> Result<Self> {
        check_dims(width, blocks)?;
        let layout = Layout { width, blocks };
        Self::from_params(width, blocks, vec![0.0; layout.num_params()])
    }

    pub fn from_params(width: usize, blocks: usize, params: Vec<f64>) -> Result<Self> {
        check_dims(width, blocks)?;
        let layout = Layout { width, blocks };
        if params.len() != layout.num_params() {
            return Err(Error::DimensionMismatch {
                expected: layout.num_params(),
                found: params.len(),
            });
        }
        if let Some(i) = params.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("parameter {i}")));
        }
        Ok(Self {
            layout,
            params,
            precision: Precision::F64,
            counters: OpCounters::default(),
        })
    }

    pub fn layout(&self) -> Layout {
        self.layout
    }

    pub fn width(&self) -> usize {
        self.layout.width
    }

    pub fn blocks(&self) -> usize {
        self.layout.blocks
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    /// Mutable access for optimizers; in `F32` mode call
    /// [`ResNet::round_to_precision`] after writing.
    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn precision(&self) -> Precision {
        self.precision
    }

    pub fn with_precision(mut self, precision: Precision) -> Self {
        self.precision = precision;
        self.round_to_precision();
        self
    }

    pub fn round_to_precision(&mut self) {
        if self.precision == Precision::F32 {
            for v in &mut self.params {
                *v = *v as f32 as f64;
            }
        }
    }

    pub fn counters(&self) -> &OpCounters {
        &self.counters
    }

    pub fn forward(&self, x: Point) -> f64 {
        self.forward_batch(&[x])[0]
    }

    pub fn forward_batch(&self, points: &[Point]) -> Vec<f64> {
        self.counters.add(&self.counters.forward, points.len());
        match self.precision {
            Precision::F64 => kernels::forward::<f64>(self.layout, &self.params, points),
            Precision::F32 => kernels::forward::<f32>(self.layout, &self.params, points),
        }
    }

    /// Values and spatial gradients at every point.
    pub fn forward_with_gradient(&self, points: &[Point]) -> (Vec<f64>, Vec<Point>) {
        self.counters.add(&self.counters.tangent, points.len());
        match self.precision {
            Precision::F64 => kernels::forward_tangent::<f64>(self.layout, &self.params, points),
            Precision::F32 => kernels::forward_tangent::<f32>(self.layout, &self.params, points),
        }
    }

    pub fn input_gradient(&self, x: Point) -> Point {
        self.forward_with_gradient(&[x]).1[0]
    }

    /// `grad_theta sum_i c_i u(x_i)`.
    pub fn param_vjp(&self, points: &[Point], cotangents: &[f64]) -> Result<ParamGradient> {
        if points.len() != cotangents.len() {
            return Err(Error::DimensionMismatch {
                expected: points.len(),
                found: cotangents.len(),
            });
        }
        self.counters.add(&self.counters.forward, points.len());
        self.counters.add(&self.counters.reverse, points.len());
        let g = match self.precision {
            Precision::F64 => kernels::vjp::<f64>(self.layout, &self.params, points, cotangents),
            Precision::F32 => kernels::vjp::<f32>(self.layout, &self.params, points, cotangents),
        };
        Ok(ParamGradient(g))
    }

    /// Collocation energy and its parameter gradient.
    pub fn collocation_loss_grad(&self, set: &CollocationSet) -> Result<(f64, ParamGradient)> {
        set.check()?;
        self.counters.add(&self.counters.tangent, set.interior.len());
        self.counters.add(&self.counters.reverse, set.interior.len());
        self.counters.add(&self.counters.forward, set.boundary.len());
        self.counters.add(&self.counters.reverse, set.boundary.len());
        let (loss, g) = match self.precision {
            Precision::F64 => kernels::collocation::<f64>(self.layout, &self.params, set),
            Precision::F32 => kernels::collocation::<f32>(self.layout, &self.params, set),
        };
        Ok((loss, ParamGradient(g)))
    }

    /// Collocation energy without the gradient.
    pub fn collocation_loss(&self, set: &CollocationSet) -> Result<f64> {
        set.check()?;
        let (u, du) = self.forward_with_gradient(&set.interior);
        let mut loss = 0.0;
        for i in 0..u.len() {
            let g2 = du[i][0] * du[i][0] + du[i][1] * du[i][1];
            loss += set.weights[i] * (0.5 * g2 - set.loads[i] * u[i]);
        }
        let ub = self.forward_batch(&set.boundary);
        for (u, b) in ub.iter().zip(&set.boundary_weights) {
            loss += b * u * u;
        }
        Ok(loss)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tanh_net_oracle(net: &ResNet, x: Point) -> f64 {
        // Straight-line evaluation from the flat layout.
        let l = net.layout();
        let p = net.params();
        let n = l.width;
        let mut h: Vec<f64> = (0..n)
            .map(|r| (p[2 * r] * x[0] + p[2 * r + 1] * x[1] + p[l.input_bias() + r]).tanh())
            .collect();
        for k in 0..l.blocks {
            let [w1, b1, w2, b2] = l.block(k);
            let s: Vec<f64> = (0..n)
                .map(|r| ((0..n).map(|c| p[w1 + r * n + c] * h[c]).sum::<f64>() + p[b1 + r]).tanh())
                .collect();
            h = (0..n)
                .map(|r| ((0..n).map(|c| p[w2 + r * n + c] * s[c]).sum::<f64>() + p[b2 + r] + h[r]).tanh())
                .collect();
        }
        (0..n).map(|r| p[l.output_weights() + r] * h[r]).sum::<f64>() + p[l.output_bias()]
    }

    fn random_net(width: usize, blocks: usize, seed: u64) -> ResNet {
        let mut net = ResNet::init(width, blocks, seed, InitScheme::Glorot).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xabc);
        for v in net.params_mut() {
            *v += rng.random_range(-0.2..0.2);
        }
        net
    }

    fn random_points(n: usize, seed: u64) -> Vec<Point> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| [rng.random::<f64>(), rng.random::<f64>()]).collect()
    }

    fn shifted(net: &ResNet, d: &[f64], h: f64) -> ResNet {
        let p: Vec<f64> = net.params().iter().zip(d).map(|(a, b)| a + h * b).collect();
        ResNet::from_params(net.width(), net.blocks(), p).unwrap()
    }

    fn rel_err(a: f64, b: f64) -> f64 {
        (a - b).abs() / a.abs().max(b.abs()).max(1e-3)
    }

    #[test]
    fn parameter_counts() {
        // 64*3 + 4*(2*64^2 + 128) + 65 and 3 + 4 + 2.
        assert_eq!(Layout { width: 64, blocks: 4 }.num_params(), 33_537);
        assert_eq!(Layout { width: 1, blocks: 1 }.num_params(), 9);
        let net = ResNet::init(7, 3, 0, InitScheme::Glorot).unwrap();
        assert_eq!(net.num_params(), 3 * 7 + 3 * (2 * 49 + 14) + 8);
        assert!(ResNet::init(0, 1, 0, InitScheme::Glorot).is_err());
        assert!(ResNet::init(3, 0, 0, InitScheme::Glorot).is_err());
    }

    #[test]
    fn init_is_deterministic_with_zero_biases() {
        let a = ResNet::init(16, 2, 5, InitScheme::Glorot).unwrap();
        let b = ResNet::init(16, 2, 5, InitScheme::Glorot).unwrap();
        assert_eq!(a.params(), b.params());
        let c = ResNet::init(16, 2, 6, InitScheme::Glorot).unwrap();
        assert_ne!(a.params(), c.params());
        let l = a.layout();
        assert!(a.params()[l.input_bias()..l.input_bias() + 16].iter().all(|&v| v == 0.0));
        let [_, b1, _, b2] = l.block(1);
        assert!(a.params()[b1..b1 + 16].iter().all(|&v| v == 0.0));
        assert!(a.params()[b2..b2 + 16].iter().all(|&v| v == 0.0));
        assert_eq!(a.params()[l.output_bias()], 0.0);
        let limit = TANH_GAIN * (6.0f64 / 32.0).sqrt();
        let [w1, ..] = l.block(0);
        assert!(a.params()[w1..w1 + 256].iter().all(|v| v.abs() <= limit));
        let z = ResNet::init(16, 2, 5, InitScheme::GlorotZeroOutput).unwrap();
        assert_eq!(z.forward([0.3, 0.8]), 0.0);
    }

    #[test]
    fn trivial_networks() {
        let net = ResNet::zeros(5, 2).unwrap();
        assert_eq!(net.forward([0.2, 0.9]), 0.0);
        let mut net = ResNet::init(5, 2, 1, InitScheme::GlorotZeroOutput).unwrap();
        let ob = net.layout().output_bias();
        net.params_mut()[ob] = 0.75;
        for x in random_points(10, 3) {
            assert_eq!(net.forward(x), 0.75);
            assert_eq!(net.input_gradient(x), [0.0, 0.0]);
        }
    }

    #[test]
    fn forward_matches_straight_line_oracle() {
        for (w, m) in [(1, 1), (3, 2), (16, 2), (9, 4)] {
            let net = random_net(w, m, 11);
            let pts = random_points(700, 4);
            let batch = net.forward_batch(&pts);
            for (x, u) in pts.iter().zip(&batch) {
                let o = tanh_net_oracle(&net, *x);
                assert!((u - o).abs() < 1e-14 * o.abs().max(1.0), "N={w} m={m}: {u} vs {o}");
            }
            assert_eq!(batch, net.forward_batch(&pts));
        }
    }

    #[test]
    fn input_gradient_matches_finite_differences() {
        let net = random_net(12, 2, 2);
        let h = 1e-5;
        for x in random_points(20, 8) {
            let g = net.input_gradient(x);
            let fx = (net.forward([x[0] + h, x[1]]) - net.forward([x[0] - h, x[1]])) / (2.0 * h);
            let fy = (net.forward([x[0], x[1] + h]) - net.forward([x[0], x[1] - h])) / (2.0 * h);
            assert!(rel_err(g[0], fx) < 1e-7, "{g:?} {fx}");
            assert!(rel_err(g[1], fy) < 1e-7, "{g:?} {fy}");
        }
    }

    #[test]
    fn input_gradient_of_near_linear_network() {
        // With tiny weights every tanh is close to the identity, so the
        // gradient is the product of the affine maps.
        let mut net = random_net(4, 1, 3);
        for v in net.params_mut() {
            *v *= 1e-3;
        }
        let l = net.layout();
        let p = net.params().to_vec();
        let n = l.width;
        let [w1, _, w2, _] = l.block(0);
        let wo = l.output_weights();
        let mut expected = [0.0; 2];
        for (k, e) in expected.iter_mut().enumerate() {
            let a: Vec<f64> = (0..n).map(|r| p[2 * r + k]).collect();
            let s: Vec<f64> = (0..n).map(|r| (0..n).map(|c| p[w1 + r * n + c] * a[c]).sum()).collect();
            let z: Vec<f64> = (0..n)
                .map(|r| (0..n).map(|c| p[w2 + r * n + c] * s[c]).sum::<f64>() + a[r])
                .collect();
            *e = (0..n).map(|r| p[wo + r] * z[r]).sum();
        }
        let g = net.input_gradient([0.4, 0.1]);
        for k in 0..2 {
            assert!((g[k] - expected[k]).abs() < 1e-4 * expected[k].abs().max(1e-12), "{g:?} {expected:?}");
        }
    }

    #[test]
    fn vjp_matches_finite_differences() {
        let net = random_net(10, 2, 21);
        let pts = random_points(37, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let c: Vec<f64> = (0..pts.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let g = net.param_vjp(&pts, &c).unwrap();
        let objective = |n: &ResNet| -> f64 { n.forward_batch(&pts).iter().zip(&c).map(|(u, c)| u * c).sum() };
        for _ in 0..10 {
            let d: Vec<f64> = (0..net.num_params()).map(|_| rng.random_range(-1.0..1.0)).collect();
            let h = 1e-6;
            let fd = (objective(&shifted(&net, &d, h)) - objective(&shifted(&net, &d, -h))) / (2.0 * h);
            assert!(rel_err(g.dot(&d), fd) < 1e-6, "{} {fd}", g.dot(&d));
        }
    }

    #[test]
    fn vjp_linearity_and_zero() {
        let net = random_net(6, 2, 1);
        let pts = random_points(15, 5);
        assert!(net.param_vjp(&pts, &[0.0; 15]).unwrap().0.iter().all(|&v| v == 0.0));
        let c1: Vec<f64> = (0..15).map(|i| (i as f64).sin()).collect();
        let c2: Vec<f64> = (0..15).map(|i| (i as f64 * 0.7).cos()).collect();
        let sum: Vec<f64> = c1.iter().zip(&c2).map(|(a, b)| a + b).collect();
        let mut g = net.param_vjp(&pts, &c1).unwrap();
        g.add_assign(&net.param_vjp(&pts, &c2).unwrap());
        let gs = net.param_vjp(&pts, &sum).unwrap();
        for (a, b) in g.0.iter().zip(&gs.0) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!(net.param_vjp(&pts, &c1[..3]).is_err());
    }

    fn sample_set(n_int: usize, n_bdry: usize, seed: u64) -> CollocationSet {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let interior = random_points(n_int, seed + 1);
        let boundary = (0..n_bdry).map(|i| [rng.random::<f64>(), (i % 2) as f64]).collect();
        CollocationSet {
            loads: interior.iter().map(|p| (3.0 * p[0]).sin() + p[1]).collect(),
            weights: (0..n_int).map(|_| rng.random_range(0.0..0.1)).collect(),
            interior,
            boundary,
            boundary_weights: (0..n_bdry).map(|_| rng.random_range(0.0..2.0)).collect(),
        }
    }

    #[test]
    fn collocation_gradient_matches_finite_differences() {
        for (w, m) in [(8, 1), (16, 2)] {
            let net = random_net(w, m, 40 + w as u64);
            let set = sample_set(600, 90, 3);
            let (loss, g) = net.collocation_loss_grad(&set).unwrap();
            assert!((loss - net.collocation_loss(&set).unwrap()).abs() < 1e-12 * loss.abs().max(1.0));
            let mut rng = ChaCha8Rng::seed_from_u64(9);
            for _ in 0..10 {
                let d: Vec<f64> = (0..net.num_params()).map(|_| rng.random_range(-1.0..1.0)).collect();
                let h = 1e-6;
                let lp = shifted(&net, &d, h).collocation_loss(&set).unwrap();
                let lm = shifted(&net, &d, -h).collocation_loss(&set).unwrap();
                let fd = (lp - lm) / (2.0 * h);
                assert!(rel_err(g.dot(&d), fd) < 1e-5, "{} {fd}", g.dot(&d));
            }
        }
    }

    #[test]
    fn collocation_single_point_closed_form() {
        // Width 1, one block: u = w_o tanh(w2 tanh(w1 h0) + h0), h0 = tanh(a x + c y).
        let (a, c, w1, w2, wo) = (0.7, -0.4, 1.3, 0.9, 2.0);
        let params = vec![a, c, 0.0, w1, 0.0, w2, 0.0, wo, 0.0];
        let net = ResNet::from_params(1, 1, params).unwrap();
        let x = [0.3, 0.6];
        let t = a * x[0] + c * x[1];
        let h0 = t.tanh();
        let s = (w1 * h0).tanh();
        let z = w2 * s + h0;
        let u = wo * z.tanh();
        let dh0 = 1.0 - h0 * h0;
        let dz = w2 * (1.0 - s * s) * w1 * dh0 + dh0;
        let du = wo * (1.0 - z.tanh().powi(2)) * dz;
        let grad = [du * a, du * c];
        let f = 1.7;
        let set = CollocationSet {
            interior: vec![x],
            weights: vec![1.0],
            loads: vec![f],
            ..Default::default()
        };
        let expected = 0.5 * (grad[0] * grad[0] + grad[1] * grad[1]) - f * u;
        let (loss, _) = net.collocation_loss_grad(&set).unwrap();
        assert!((loss - expected).abs() < 1e-14);
        assert!((net.forward(x) - u).abs() < 1e-15);
    }

    #[test]
    fn zero_network_has_zero_collocation_loss() {
        let net = ResNet::zeros(4, 1).unwrap();
        let mut set = sample_set(20, 5, 1);
        set.loads.iter_mut().for_each(|f| *f = 0.0);
        assert_eq!(net.collocation_loss_grad(&set).unwrap().0, 0.0);
    }

    #[test]
    fn counters_track_paths() {
        let net = random_net(4, 1, 0);
        let pts = random_points(5, 0);
        net.forward_batch(&pts);
        net.param_vjp(&pts, &[1.0; 5]).unwrap();
        let c = net.counters().snapshot();
        assert_eq!(c, OpCounts { forward: 10, tangent: 0, reverse: 5 });
        net.input_gradient(pts[0]);
        assert_eq!(net.counters().snapshot().tangent, 1);
        net.counters().reset();
        assert_eq!(net.counters().snapshot(), OpCounts::default());
    }

    #[test]
    fn single_precision_mode() {
        let net64 = random_net(16, 2, 4);
        let net32 = net64.clone().with_precision(Precision::F32);
        assert!(net32.params().iter().all(|&v| v == v as f32 as f64));
        let pts = random_points(50, 6);
        let u64 = net64.forward_batch(&pts);
        let u32 = net32.forward_batch(&pts);
        let diff = u64.iter().zip(&u32).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(diff > 0.0 && diff < 1e-4, "{diff}");
        let g = net32.param_vjp(&pts, &[1.0; 50]).unwrap();
        let g64 = net64.param_vjp(&pts, &[1.0; 50]).unwrap();
        let rel = g.0.iter().zip(&g64.0).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max) / g64.norm();
        assert!(rel < 1e-4, "{rel}");
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(ResNet::from_params(2, 1, vec![0.0; 3]).is_err());
        let mut p = vec![0.0; Layout { width: 2, blocks: 1 }.num_params()];
        p[3] = f64::NAN;
        assert!(matches!(ResNet::from_params(2, 1, p), Err(Error::NonFinite(_))));
    }
}
