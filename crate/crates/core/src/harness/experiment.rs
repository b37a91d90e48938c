//! Experiment grids: every combination of method, block count, ladder and
//! seed is trained and summarised in one comparison table.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::network::{write_checkpoint, InitScheme, Precision};
use crate::training::{train, AdamParams, EnergyReport, Method, Stage, TrainConfig};
use crate::{Error, Result};

/// Crate version and `git describe` of the build.
pub fn build_id() -> String {
    format!("{}+{}", env!("CARGO_PKG_VERSION"), env!("RITZFEM_GIT_DESCRIBE"))
}

/// Training settings shared by all cells; unset fields keep their defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainOverrides {
    pub width: Option<usize>,
    pub fem_degree: Option<usize>,
    pub quad_degree: Option<usize>,
    pub alpha: Option<f64>,
    pub c_pen: Option<f64>,
    pub lr_low: Option<f64>,
    pub lr_high: Option<f64>,
    pub clr_half_cycle: Option<usize>,
    pub adam: Option<AdamParams>,
    pub precision: Option<Precision>,
    pub init: Option<InitScheme>,
    pub log_every: Option<usize>,
    pub reference_m: Option<usize>,
    pub error_degree: Option<usize>,
    pub problem: Option<String>,
}

impl TrainOverrides {
    pub fn apply(&self, cfg: &mut TrainConfig) {
        macro_rules! set {
            ($($field:ident),*) => {
                $(if let Some(v) = &self.$field { cfg.$field = v.clone(); })*
            };
        }
        set!(width, fem_degree, quad_degree, alpha, c_pen, lr_low, lr_high, clr_half_cycle, adam, precision, init, log_every, error_degree, problem);
        if self.reference_m.is_some() {
            cfg.reference_m = self.reference_m;
        }
    }
}

fn default_seeds() -> Vec<u64> {
    vec![0]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    #[serde(default)]
    pub methods: Vec<Method>,
    #[serde(default)]
    pub blocks: Vec<usize>,
    #[serde(default)]
    pub ladders: Vec<Vec<Stage>>,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub train: TrainOverrides,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(format!("{e}")))?;
        for cell in cfg.cells() {
            cell.config.validate().map_err(|e| Error::Config(format!("cell {}: {e}", cell.label)))?;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        Self::from_json(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    /// The grid in method, blocks, ladder, seed order.
    pub fn cells(&self) -> Vec<Cell> {
        let mut out = Vec::new();
        for &method in &self.methods {
            for &blocks in &self.blocks {
                for (li, ladder) in self.ladders.iter().enumerate() {
                    for &seed in &self.seeds {
                        let mut config = TrainConfig::new(method, ladder.clone());
                        config.blocks = blocks;
                        config.seed = seed;
                        self.train.apply(&mut config);
                        out.push(Cell {
                            label: format!("{method}_b{blocks}_l{li}_s{seed}"),
                            ladder_index: li,
                            config,
                        });
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct Cell {
    pub label: String,
    pub ladder_index: usize,
    pub config: TrainConfig,
}

/// One row of the comparison table: a ladder stage of one cell.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonRow {
    pub method: Method,
    pub blocks: usize,
    pub ladder: usize,
    pub seed: u64,
    pub m: usize,
    pub epochs: usize,
    pub l2_error: f64,
    pub h1_error: f64,
    pub final_loss: f64,
    pub train_seconds: f64,
    pub seconds_per_epoch: Option<f64>,
    pub galerkin_gap: Option<f64>,
}

pub const COMPARISON_HEADER: &str =
    "method,blocks,ladder,seed,m,epochs,l2_error,h1_error,final_loss,train_seconds,seconds_per_epoch,galerkin_gap";

impl ComparisonRow {
    fn csv(&self) -> String {
        let opt = |v: Option<f64>| v.map(|x| format!("{x:e}")).unwrap_or_default();
        format!(
            "{},{},{},{},{},{},{:e},{:e},{:e},{:.6},{},{}",
            self.method,
            self.blocks,
            self.ladder,
            self.seed,
            self.m,
            self.epochs,
            self.l2_error,
            self.h1_error,
            self.final_loss,
            self.train_seconds,
            self.seconds_per_epoch.map(|v| format!("{v:.6e}")).unwrap_or_default(),
            opt(self.galerkin_gap)
        )
    }
}

/// JSON summary of one cell: the resolved config, the stage results and
/// the build that produced them. The per-epoch log lives in the CSV.
#[derive(Debug, Serialize)]
struct CellSummary<'a> {
    schema_version: u32,
    build_id: String,
    label: &'a str,
    config: &'a TrainConfig,
    num_params: usize,
    stages: &'a [crate::training::StageReport],
}

#[derive(Debug)]
pub struct ExperimentOutcome {
    pub directory: PathBuf,
    pub rows: Vec<ComparisonRow>,
    pub reports: Vec<(String, EnergyReport)>,
}

pub fn write_report_json(path: &Path, label: &str, report: &EnergyReport) -> Result<()> {
    let summary = CellSummary {
        schema_version: report.schema_version,
        build_id: build_id(),
        label,
        config: &report.config,
        num_params: report.num_params,
        stages: &report.stages,
    };
    fs::write(path, serde_json::to_string_pretty(&summary)?)?;
    Ok(())
}

/// Trains every cell and writes `<label>.csv`, `<label>.json`,
/// `<label>.ckpt` and the combined `comparison.csv` / `comparison.json`
/// into `dir`.
pub fn run_experiment(cfg: &ExperimentConfig, dir: &Path, mut progress: impl FnMut(&str)) -> Result<ExperimentOutcome> {
    fs::create_dir_all(dir)?;
    let mut rows = Vec::new();
    let mut reports = Vec::new();
    for cell in cfg.cells() {
        progress(&cell.label);
        let (report, net) = train(&cell.config, None)?;
        report.save_csv(&dir.join(format!("{}.csv", cell.label)))?;
        write_report_json(&dir.join(format!("{}.json", cell.label)), &cell.label, &report)?;
        write_checkpoint(&net, fs::File::create(dir.join(format!("{}.ckpt", cell.label)))?)?;
        for s in &report.stages {
            rows.push(ComparisonRow {
                method: cell.config.method,
                blocks: cell.config.blocks,
                ladder: cell.ladder_index,
                seed: cell.config.seed,
                m: s.m,
                epochs: s.epochs,
                l2_error: s.l2_error,
                h1_error: s.h1_error,
                final_loss: s.final_loss,
                train_seconds: s.train_seconds,
                seconds_per_epoch: s.seconds_per_epoch,
                galerkin_gap: s.galerkin_gap,
            });
        }
        reports.push((cell.label, report));
    }
    let mut table = String::from(COMPARISON_HEADER);
    table.push('\n');
    for r in &rows {
        table.push_str(&r.csv());
        table.push('\n');
    }
    fs::write(dir.join("comparison.csv"), table)?;
    let json = serde_json::json!({
        "schema_version": crate::training::REPORT_SCHEMA_VERSION,
        "build_id": build_id(),
        "experiment": cfg,
        "rows": rows,
    });
    fs::write(dir.join("comparison.json"), serde_json::to_string_pretty(&json)?)?;
    Ok(ExperimentOutcome {
        directory: dir.to_path_buf(),
        rows,
        reports,
    })
}
