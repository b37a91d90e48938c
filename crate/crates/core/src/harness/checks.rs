//! Quick self-checks run by `ritzfem check`. Each one is a scaled-down
//! version of a property tested in the test suites, cheap enough to run on
//! any machine in a few seconds.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::ManufacturedProblem;
use crate::fem::{error_norms, galerkin_solve, FeSpace};
use crate::mesh::Mesh;
use crate::network::{read_checkpoint, write_checkpoint, InitScheme, ResNet};
use crate::quadrature::triangle_rule;
use crate::training::{FemLoss, McLoss, QuadLoss};
use crate::Result;

#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

type CheckFn = fn() -> Result<(bool, String)>;

const CHECKS: &[(&str, CheckFn)] = &[
    ("quadrature-exactness", quadrature_exactness),
    ("fem-gradient", fem_gradient),
    ("collocation-gradient", collocation_gradient),
    ("galerkin-rate", galerkin_rate),
    ("energy-identity", energy_identity),
    ("mc-unbiased", mc_unbiased),
    ("checkpoint-roundtrip", checkpoint_roundtrip),
];

pub fn check_names() -> Vec<&'static str> {
    CHECKS.iter().map(|(n, _)| *n).collect()
}

/// Runs the checks whose name contains `filter` (all when `None`). An error
/// inside a check counts as a failure.
pub fn run_checks(filter: Option<&str>) -> Vec<CheckOutcome> {
    CHECKS
        .iter()
        .filter(|(name, _)| filter.is_none_or(|f| name.contains(f)))
        .map(|&(name, check)| {
            let start = Instant::now();
            let (passed, detail) = check().unwrap_or_else(|e| (false, format!("error: {e}")));
            CheckOutcome {
                name,
                passed,
                detail,
                seconds: start.elapsed().as_secs_f64(),
            }
        })
        .collect()
}

fn factorial(n: u32) -> f64 {
    (1..=n).map(f64::from).product()
}

fn quadrature_exactness() -> Result<(bool, String)> {
    let mut worst = 0.0f64;
    for d in 1..=5u32 {
        let rule = triangle_rule(d as usize)?;
        for a in 0..=d {
            for b in 0..=d - a {
                let exact = factorial(a) * factorial(b) / factorial(a + b + 2);
                let q: f64 = rule
                    .points
                    .iter()
                    .zip(&rule.weights)
                    .map(|(p, w)| 0.5 * w * p[0].powi(a as i32) * p[1].powi(b as i32))
                    .sum();
                worst = worst.max((q - exact).abs());
            }
        }
    }
    Ok((worst <= 1e-12, format!("max monomial error {worst:.2e}")))
}

fn random_direction(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

/// Worst relative error of `grad . d` against a central difference over
/// ten random directions.
fn directional_fd(
    net: &ResNet,
    loss: impl Fn(&ResNet) -> Result<f64>,
    grad: &[f64],
    seed: u64,
) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let eps = 1e-6;
    let mut worst = 0.0f64;
    for _ in 0..10 {
        let d = random_direction(&mut rng, net.num_params());
        let shifted = |s: f64| {
            let p: Vec<f64> = net.params().iter().zip(&d).map(|(p, di)| p + s * di).collect();
            ResNet::from_params(net.width(), net.blocks(), p)
        };
        let fd = (loss(&shifted(eps)?)? - loss(&shifted(-eps)?)?) / (2.0 * eps);
        let an: f64 = grad.iter().zip(&d).map(|(g, di)| g * di).sum();
        worst = worst.max((fd - an).abs() / an.abs().max(1e-8));
    }
    Ok(worst)
}

fn fem_gradient() -> Result<(bool, String)> {
    let problem = ManufacturedProblem::sine();
    let net = ResNet::init(8, 2, 11, InitScheme::Glorot)?;
    let mut worst = 0.0f64;
    for q in [1, 2] {
        let loss = FemLoss::new(&Mesh::uniform_unit_square(6)?, q, &problem, 40.0)?;
        let (_, grad) = loss.loss_grad(&net)?;
        worst = worst.max(directional_fd(&net, |n| loss.loss(n), &grad.0, q as u64)?);
    }
    Ok((worst <= 1e-5, format!("max relative FD error {worst:.2e}")))
}

fn collocation_gradient() -> Result<(bool, String)> {
    let problem = ManufacturedProblem::sine();
    let net = ResNet::init(8, 2, 12, InitScheme::Glorot)?;
    let loss = QuadLoss::new(&Mesh::uniform_unit_square(4)?, 2, &problem, 40.0)?;
    let (_, grad) = loss.loss_grad(&net)?;
    let worst = directional_fd(&net, |n| loss.loss(n), &grad.0, 3)?;
    Ok((worst <= 1e-5, format!("max relative FD error {worst:.2e}")))
}

fn galerkin_l2(m: usize) -> Result<f64> {
    let p = ManufacturedProblem::sine();
    let space = FeSpace::new(&Mesh::uniform_unit_square(m)?, 1)?;
    let sol = galerkin_solve(&space, p.f, 40.0, p.g0)?;
    Ok(error_norms(&space, sol.values.as_slice(), p.u, p.grad_u, 5)?.0)
}

fn galerkin_rate() -> Result<(bool, String)> {
    let e20 = galerkin_l2(20)?;
    let e40 = galerkin_l2(40)?;
    let rate = (e20 / e40).log2();
    Ok(((1.8..=2.2).contains(&rate), format!("P1 L2 rate {rate:.3} between M=20 and M=40")))
}

fn energy_identity() -> Result<(bool, String)> {
    let p = ManufacturedProblem::sine();
    let loss = FemLoss::new(&Mesh::uniform_unit_square(40)?, 1, &p, 40.0)?;
    let nodal: Vec<f64> = loss.space().dof_coords().iter().map(|&x| (p.u)(x)).collect();
    let e = loss.energy().value(&nodal)?;
    let gap = (e - p.exact_energy()).abs();
    Ok((gap <= 0.05, format!("interpolant energy {e:.6}, gap {gap:.2e} at M=40")))
}

fn mc_unbiased() -> Result<(bool, String)> {
    let p = ManufacturedProblem::sine();
    let net = ResNet::init(8, 1, 5, InitScheme::Glorot)?;
    let m = 8;
    let interior_only = |mut set: crate::network::CollocationSet| {
        set.boundary.clear();
        set.boundary_weights.clear();
        set
    };
    let quad = QuadLoss::new(&Mesh::uniform_unit_square(m)?, 5, &p, 40.0)?;
    let reference = net.collocation_loss(&interior_only(quad.points().clone()))?;
    let mut mc = McLoss::new(m, &p, 40.0, 99);
    let draws = 100;
    let samples: Vec<f64> = (0..draws)
        .map(|_| net.collocation_loss(&interior_only(mc.draw())))
        .collect::<Result<_>>()?;
    let mean = samples.iter().sum::<f64>() / draws as f64;
    let var = samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (draws - 1) as f64;
    let se = (var / draws as f64).sqrt();
    let z = (mean - reference).abs() / se;
    Ok((z <= 3.0, format!("MC mean {mean:.5} vs quadrature {reference:.5}, {z:.2} standard errors")))
}

fn checkpoint_roundtrip() -> Result<(bool, String)> {
    let net = ResNet::init(5, 2, 8, InitScheme::Glorot)?;
    let mut bytes = Vec::new();
    write_checkpoint(&net, &mut bytes)?;
    let back = read_checkpoint(bytes.as_slice())?;
    Ok((back == net, format!("{} bytes", bytes.len())))
}
