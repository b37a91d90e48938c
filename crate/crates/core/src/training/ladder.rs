//! Warm-start mesh ladder: train on the coarsest mesh, then reuse the
//! parameters on every finer rung.

use std::io::Write;
use std::path::Path;
use std::time::Instant;

use serde::Serialize;

use super::backends::{FemLoss, McLoss, QuadLoss};
use super::config::{Method, TrainConfig};
use super::optim::Adam;
use crate::fem::{assemble_mass, h1_norm, SparseMatrix, StabilityConstants};
use crate::harness::{l2_h1_error, ManufacturedProblem};
use crate::mesh::Mesh;
use crate::network::{OpCounts, ParamGradient, ResNet};
use crate::{Error, Result};

pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// One logged epoch. `loss` is evaluated at the parameters before the
/// update of that epoch; the last entry of a stage holds the final loss.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LogEntry {
    pub stage: usize,
    pub m: usize,
    /// Epoch counted across the whole ladder.
    pub epoch: usize,
    pub loss: f64,
    pub lr: f64,
    pub seconds: f64,
    /// FEM mode: `||I u||_H1` and the stability bound for the logged loss.
    pub h1_norm: Option<f64>,
    pub h1_bound: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StageReport {
    pub stage: usize,
    pub m: usize,
    pub epochs: usize,
    pub final_loss: f64,
    pub l2_error: f64,
    pub h1_error: f64,
    /// Time spent in loss evaluation and parameter updates.
    pub train_seconds: f64,
    pub seconds_per_epoch: Option<f64>,
    pub op_counts: OpCounts,
    /// FEM mode: the Galerkin minimum of the stage energy and the final gap.
    pub galerkin_energy: Option<f64>,
    pub galerkin_gap: Option<f64>,
    /// Smallest `loss - galerkin_energy` over the logged epochs.
    pub min_lower_bound_margin: Option<f64>,
    pub lower_bound_violations: usize,
    pub stability_violations: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct EnergyReport {
    pub schema_version: u32,
    pub config: TrainConfig,
    pub num_params: usize,
    pub log: Vec<LogEntry>,
    pub stages: Vec<StageReport>,
}

impl EnergyReport {
    pub fn final_stage(&self) -> Option<&StageReport> {
        self.stages.last()
    }

    /// `stage,m,epoch,loss,lr,seconds`, one row per log entry.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "stage,m,epoch,loss,lr,seconds")?;
        for e in &self.log {
            writeln!(
                out,
                "{},{},{},{:e},{:e},{:.6}",
                e.stage, e.m, e.epoch, e.loss, e.lr, e.seconds
            )?;
        }
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path)?;
        self.write_csv(std::io::BufWriter::new(file))
    }
}

enum Backend {
    Mc(Box<McLoss>),
    Quad(Box<QuadLoss>),
    Fem(Box<FemMonitor>),
}

/// FEM loss with the operators needed by the stage monitors.
struct FemMonitor {
    loss: FemLoss,
    mass: SparseMatrix,
    stability: StabilityConstants,
    galerkin: f64,
}

impl Backend {
    fn new(cfg: &TrainConfig, problem: &ManufacturedProblem, stage: usize, m: usize) -> Result<Self> {
        let mesh = Mesh::uniform_unit_square(m)?;
        Ok(match cfg.method {
            Method::Mc => {
                let seed = cfg.seed ^ (stage as u64 + 1).wrapping_mul(0x9e37_79b9_7f4a_7c15);
                Backend::Mc(Box::new(McLoss::new(m, problem, cfg.c_pen, seed)))
            }
            Method::Quad => Backend::Quad(Box::new(QuadLoss::new(&mesh, cfg.quad_degree, problem, cfg.alpha)?)),
            Method::Fem => {
                let loss = FemLoss::new(&mesh, cfg.fem_degree, problem, cfg.alpha)?;
                let mass = assemble_mass(loss.space());
                let stability = StabilityConstants::for_space(loss.space(), cfg.alpha, problem.f_sup)?;
                let galerkin = loss.energy().minimize()?.energy;
                Backend::Fem(Box::new(FemMonitor {
                    loss,
                    mass,
                    stability,
                    galerkin,
                }))
            }
        })
    }

    /// Loss, gradient and (FEM only) the nodal values.
    fn loss_grad(&mut self, net: &ResNet) -> Result<(f64, ParamGradient, Option<Vec<f64>>)> {
        match self {
            Backend::Mc(l) => l.loss_grad(net).map(|(e, g)| (e, g, None)),
            Backend::Quad(l) => l.loss_grad(net).map(|(e, g)| (e, g, None)),
            Backend::Fem(f) => f.loss.loss_grad_nodal(net).map(|(e, g, v)| (e, g, Some(v))),
        }
    }
}

#[derive(Default)]
struct StageMonitor {
    min_margin: Option<f64>,
    lower_bound_violations: usize,
    stability_violations: usize,
}

impl StageMonitor {
    fn observe(&mut self, backend: &Backend, loss: f64, nodal: Option<&[f64]>) -> Result<(Option<f64>, Option<f64>)> {
        let (Backend::Fem(fem), Some(g)) = (backend, nodal) else {
            return Ok((None, None));
        };
        let margin = loss - fem.galerkin;
        self.min_margin = Some(self.min_margin.map_or(margin, |m| m.min(margin)));
        if margin < -1e-9 * fem.galerkin.abs() {
            self.lower_bound_violations += 1;
        }
        let norm = h1_norm(fem.loss.energy().operator(), &fem.mass, g)?;
        let bound = fem.stability.h1_bound(loss);
        if !(norm.is_finite() && bound.is_finite() && norm <= bound) {
            self.stability_violations += 1;
        }
        Ok((Some(norm), Some(bound)))
    }
}

struct Ladder<'a> {
    cfg: &'a TrainConfig,
    problem: ManufacturedProblem,
    start: Instant,
    log: Vec<LogEntry>,
    global_epoch: usize,
}

impl Ladder<'_> {
    fn push_log(&mut self, stage: usize, m: usize, loss: f64, lr: f64, h1: (Option<f64>, Option<f64>)) {
        self.log.push(LogEntry {
            stage,
            m,
            epoch: self.global_epoch,
            loss,
            lr,
            seconds: self.start.elapsed().as_secs_f64(),
            h1_norm: h1.0,
            h1_bound: h1.1,
        });
    }

    fn run_stage(&mut self, net: &mut ResNet, stage: usize) -> Result<StageReport> {
        let cfg = self.cfg;
        let rung = cfg.ladder[stage];
        let clr = cfg.schedule()?;
        let mut backend = Backend::new(cfg, &self.problem, stage, rung.m)?;
        let mut adam = Adam::new(net.num_params(), cfg.adam);
        let mut monitor = StageMonitor::default();
        let non_finite = |what: &str, epoch: usize, v: f64| {
            Error::NonFinite(format!("{what} {v} at stage {stage} (M = {}), epoch {epoch}", rung.m))
        };
        net.counters().reset();
        let mut train_seconds = 0.0;
        for epoch in 0..rung.epochs {
            let t0 = Instant::now();
            let (loss, grad, nodal) = backend.loss_grad(net)?;
            if !loss.is_finite() {
                return Err(non_finite("loss", epoch, loss));
            }
            let lr = clr.rate(epoch);
            adam.step(net.params_mut(), &grad, lr)
                .map_err(|e| Error::NonFinite(format!("{e} (stage {stage}, epoch {epoch})")))?;
            net.round_to_precision();
            train_seconds += t0.elapsed().as_secs_f64();
            if epoch % cfg.log_every == 0 {
                let h1 = monitor.observe(&backend, loss, nodal.as_deref())?;
                self.push_log(stage, rung.m, loss, lr, h1);
            }
            self.global_epoch += 1;
        }
        let (loss, _, nodal) = backend.loss_grad(net)?;
        if !loss.is_finite() {
            return Err(non_finite("loss", rung.epochs, loss));
        }
        let h1 = monitor.observe(&backend, loss, nodal.as_deref())?;
        self.push_log(stage, rung.m, loss, clr.rate(rung.epochs), h1);
        let op_counts = net.counters().snapshot();

        let (l2_error, h1_error) = l2_h1_error(net, &self.problem, cfg.reference_mesh_size(), cfg.error_degree)?;
        let galerkin_energy = match &backend {
            Backend::Fem(f) => Some(f.galerkin),
            _ => None,
        };
        Ok(StageReport {
            stage,
            m: rung.m,
            epochs: rung.epochs,
            final_loss: loss,
            l2_error,
            h1_error,
            train_seconds,
            seconds_per_epoch: (rung.epochs > 0).then(|| train_seconds / rung.epochs as f64),
            op_counts,
            galerkin_energy,
            galerkin_gap: galerkin_energy.map(|g| loss - g),
            min_lower_bound_margin: monitor.min_margin,
            lower_bound_violations: monitor.lower_bound_violations,
            stability_violations: monitor.stability_violations,
        })
    }
}

/// Runs the ladder from a fresh initialisation or from `start`, returning
/// the report and the trained network.
pub fn train(cfg: &TrainConfig, start: Option<ResNet>) -> Result<(EnergyReport, ResNet)> {
    cfg.validate()?;
    let problem = ManufacturedProblem::by_name(&cfg.problem)?;
    let mut net = match start {
        Some(net) => {
            if net.width() != cfg.width || net.blocks() != cfg.blocks {
                return Err(Error::Config(format!(
                    "starting network has N={}, m={} but the config asks for N={}, m={}",
                    net.width(),
                    net.blocks(),
                    cfg.width,
                    cfg.blocks
                )));
            }
            net
        }
        None => ResNet::init(cfg.width, cfg.blocks, cfg.seed, cfg.init)?,
    }
    .with_precision(cfg.precision);
    let mut ladder = Ladder {
        cfg,
        problem,
        start: Instant::now(),
        log: Vec::new(),
        global_epoch: 0,
    };
    let mut stages = Vec::with_capacity(cfg.ladder.len());
    for stage in 0..cfg.ladder.len() {
        stages.push(ladder.run_stage(&mut net, stage)?);
    }
    let report = EnergyReport {
        schema_version: REPORT_SCHEMA_VERSION,
        config: cfg.clone(),
        num_params: net.num_params(),
        log: ladder.log,
        stages,
    };
    Ok((report, net))
}

pub fn train_ladder(cfg: &TrainConfig) -> Result<EnergyReport> {
    train(cfg, None).map(|(r, _)| r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::training::{Method, Stage};

    fn small(method: Method, ladder: Vec<Stage>) -> TrainConfig {
        let mut cfg = TrainConfig::new(method, ladder);
        cfg.width = 8;
        cfg.log_every = 10;
        cfg.lr_low = 1e-4;
        cfg.lr_high = 1e-2;
        cfg.clr_half_cycle = 20;
        cfg
    }

    #[test]
    fn zero_epochs_logs_initial_loss_only() {
        let cfg = small(Method::Fem, vec![Stage { m: 20, epochs: 0 }]);
        let report = train_ladder(&cfg).unwrap();
        assert_eq!(report.log.len(), 1);
        assert_eq!(report.log[0].epoch, 0);
        // The default initialisation has a zero output layer.
        assert_eq!(report.log[0].loss, 0.0);
        assert_eq!(report.stages[0].seconds_per_epoch, None);
        assert!((report.stages[0].l2_error - 0.5).abs() < 1e-6);
    }

    #[test]
    fn reruns_are_identical() {
        for method in [Method::Mc, Method::Quad, Method::Fem] {
            let cfg = small(method, vec![Stage { m: 4, epochs: 25 }, Stage { m: 6, epochs: 15 }]);
            let (a, na) = train(&cfg, None).unwrap();
            let (b, nb) = train(&cfg, None).unwrap();
            assert_eq!(na, nb);
            let strip = |r: &EnergyReport| -> Vec<(usize, usize, f64, f64)> {
                r.log.iter().map(|e| (e.stage, e.epoch, e.loss, e.lr)).collect()
            };
            assert_eq!(strip(&a), strip(&b));
            assert_eq!(a.stages[1].l2_error, b.stages[1].l2_error);
            let epochs: Vec<usize> = a.log.iter().map(|e| e.epoch).collect();
            assert!(epochs.windows(2).all(|w| w[0] <= w[1]));
            assert_eq!(epochs, vec![0, 10, 20, 25, 25, 35, 40]);
        }
    }

    #[test]
    fn fem_monitors_hold_and_counts_exclude_tangents() {
        let cfg = small(Method::Fem, vec![Stage { m: 6, epochs: 40 }]);
        let report = train_ladder(&cfg).unwrap();
        let s = &report.stages[0];
        assert_eq!(s.lower_bound_violations, 0);
        assert_eq!(s.stability_violations, 0);
        assert!(s.min_lower_bound_margin.unwrap() >= 0.0);
        assert!(s.galerkin_gap.unwrap() >= 0.0);
        assert_eq!(s.op_counts.tangent, 0);
        assert!(report.log.iter().all(|e| e.h1_norm.unwrap() <= e.h1_bound.unwrap()));
        let loss0 = report.log[0].loss;
        assert!(s.final_loss < loss0);
    }

    #[test]
    fn single_precision_training_runs() {
        let mut cfg = small(Method::Fem, vec![Stage { m: 5, epochs: 10 }]);
        cfg.precision = crate::network::Precision::F32;
        let (report, net) = train(&cfg, None).unwrap();
        assert!(net.params().iter().all(|&v| v == v as f32 as f64));
        assert!(report.stages[0].final_loss.is_finite());
    }

    #[test]
    fn csv_has_fixed_columns() {
        let cfg = small(Method::Quad, vec![Stage { m: 3, epochs: 12 }]);
        let report = train_ladder(&cfg).unwrap();
        let mut buf = Vec::new();
        report.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "stage,m,epoch,loss,lr,seconds");
        assert_eq!(lines.len(), 1 + report.log.len());
        assert!(lines[1..].iter().all(|l| l.split(',').count() == 6));
    }

    #[test]
    fn warm_start_shape_mismatch_is_rejected() {
        let cfg = small(Method::Fem, vec![Stage { m: 3, epochs: 1 }]);
        let other = ResNet::zeros(4, 1).unwrap();
        assert!(train(&cfg, Some(other)).is_err());
    }
}
