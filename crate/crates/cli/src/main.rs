use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::{json, Map, Value};

use ritzfem::fem::{error_norms, galerkin_solve, FeSpace, StabilityConstants};
use ritzfem::harness::{
    build_id, check_names, run_checks, run_experiment, write_report_json, ExperimentConfig, ManufacturedProblem,
};
use ritzfem::mesh::Mesh;
use ritzfem::network::{read_checkpoint, write_checkpoint};
use ritzfem::training::{train, Stage, TrainConfig};

#[derive(Parser)]
#[command(name = "ritzfem", version, about = "Deep Ritz training through finite element interpolation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print size and quality of the uniform M x M mesh.
    MeshInfo {
        #[arg(long, short)]
        m: usize,
    },
    /// Solve the Galerkin problem and report energy and errors.
    Galerkin(GalerkinArgs),
    /// Train one network along a mesh ladder.
    Train(Box<TrainArgs>),
    /// Run an experiment grid and write the comparison table.
    Compare {
        /// Experiment config (JSON).
        config: PathBuf,
        /// Output directory; defaults to runs/<name>.
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Run the built-in self-checks.
    Check {
        /// Only run checks whose name contains this string.
        filter: Option<String>,
        #[arg(long)]
        list: bool,
    },
}

#[derive(Args)]
struct GalerkinArgs {
    #[arg(long, short)]
    m: usize,
    #[arg(long, default_value_t = 1)]
    degree: usize,
    #[arg(long, default_value_t = 40.0)]
    alpha: f64,
    #[arg(long, default_value = "sine")]
    problem: String,
    /// Emit a JSON object instead of text.
    #[arg(long)]
    json: bool,
}

/// Every flag left unset falls back to the config file, then to the
/// built-in default.
#[derive(Args)]
struct TrainArgs {
    /// Base config (JSON with the same keys as the flags, snake_case).
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    method: Option<String>,
    /// Ladder as M:EPOCHS pairs, e.g. 20:3000,40:2000.
    #[arg(long)]
    ladder: Option<String>,
    #[arg(long)]
    width: Option<usize>,
    #[arg(long)]
    blocks: Option<usize>,
    #[arg(long)]
    fem_degree: Option<usize>,
    #[arg(long)]
    quad_degree: Option<usize>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    c_pen: Option<f64>,
    #[arg(long)]
    lr_low: Option<f64>,
    #[arg(long)]
    lr_high: Option<f64>,
    #[arg(long)]
    clr_half_cycle: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// f64 or f32.
    #[arg(long)]
    precision: Option<String>,
    /// glorot or glorot-zero-output.
    #[arg(long)]
    init: Option<String>,
    #[arg(long)]
    log_every: Option<usize>,
    #[arg(long)]
    reference_m: Option<usize>,
    #[arg(long)]
    error_degree: Option<usize>,
    #[arg(long)]
    problem: Option<String>,
    /// Start from a saved network instead of a fresh initialisation.
    #[arg(long)]
    resume: Option<PathBuf>,
    /// Directory for the CSV log, JSON summary and checkpoint.
    #[arg(long, short)]
    out: Option<PathBuf>,
    /// File stem of the outputs.
    #[arg(long, default_value = "train")]
    label: String,
}

fn parse_ladder(text: &str) -> Result<Vec<Stage>> {
    text.split(',')
        .map(|pair| {
            let (m, e) = pair
                .split_once(':')
                .with_context(|| format!("ladder entry `{pair}` is not M:EPOCHS"))?;
            Ok(Stage {
                m: m.trim().parse().with_context(|| format!("bad mesh size in `{pair}`"))?,
                epochs: e.trim().parse().with_context(|| format!("bad epoch count in `{pair}`"))?,
            })
        })
        .collect()
}

impl TrainArgs {
    fn resolve(&self) -> Result<TrainConfig> {
        let mut obj = match &self.config {
            Some(path) => {
                let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
                match serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))? {
                    Value::Object(map) => map,
                    _ => bail!("{} must hold a JSON object", path.display()),
                }
            }
            None => Map::new(),
        };
        let mut set = |key: &str, v: Option<Value>| {
            if let Some(v) = v {
                obj.insert(key.to_string(), v);
            }
        };
        set("method", self.method.clone().map(Value::from));
        if let Some(l) = &self.ladder {
            set("ladder", Some(serde_json::to_value(parse_ladder(l)?)?));
        }
        set("width", self.width.map(Value::from));
        set("blocks", self.blocks.map(Value::from));
        set("fem_degree", self.fem_degree.map(Value::from));
        set("quad_degree", self.quad_degree.map(Value::from));
        set("alpha", self.alpha.map(Value::from));
        set("c_pen", self.c_pen.map(Value::from));
        set("lr_low", self.lr_low.map(Value::from));
        set("lr_high", self.lr_high.map(Value::from));
        set("clr_half_cycle", self.clr_half_cycle.map(Value::from));
        set("seed", self.seed.map(Value::from));
        set("precision", self.precision.clone().map(Value::from));
        set("init", self.init.clone().map(Value::from));
        set("log_every", self.log_every.map(Value::from));
        set("reference_m", self.reference_m.map(Value::from));
        set("error_degree", self.error_degree.map(Value::from));
        set("problem", self.problem.clone().map(Value::from));
        Ok(TrainConfig::from_json(&Value::Object(obj).to_string())?)
    }
}

fn mesh_info(m: usize) -> Result<()> {
    let mesh = Mesh::uniform_unit_square(m)?;
    let q = mesh.quality();
    println!("vertices        {}", mesh.num_vertices());
    println!("triangles       {}", mesh.num_triangles());
    println!("boundary edges  {}", mesh.boundary_edges().len());
    println!("h_max           {:.6e}", q.h_max);
    println!("h_min           {:.6e}", q.h_min);
    println!("shape ratio     {:.6}", q.shape_ratio);
    for degree in [1, 2] {
        println!("P{degree} dofs         {}", FeSpace::new(&mesh, degree)?.num_dofs());
    }
    Ok(())
}

fn galerkin(args: &GalerkinArgs) -> Result<()> {
    let p = ManufacturedProblem::by_name(&args.problem)?;
    let space = FeSpace::new(&Mesh::uniform_unit_square(args.m)?, args.degree)?;
    let sol = galerkin_solve(&space, p.f, args.alpha, p.g0)?;
    let (l2, h1) = error_norms(&space, sol.values.as_slice(), p.u, p.grad_u, 5)?;
    let c = StabilityConstants::for_space(&space, args.alpha, p.f_sup)?;
    let out = json!({
        "m": args.m,
        "degree": args.degree,
        "alpha": args.alpha,
        "dofs": space.num_dofs(),
        "energy": sol.energy,
        "exact_energy": p.exact_energy(),
        "l2_error": l2,
        "h1_error": h1,
        "cg_iterations": sol.iterations,
        "relative_residual": sol.relative_residual,
        "h1_bound": c.h1_bound(sol.energy),
    });
    if args.json {
        println!("{}", serde_json::to_string_pretty(&out)?);
    } else {
        for (k, v) in out.as_object().into_iter().flatten() {
            println!("{k:<18}{v}");
        }
    }
    Ok(())
}

fn train_cmd(args: &TrainArgs) -> Result<()> {
    let cfg = args.resolve()?;
    let start = match &args.resume {
        Some(path) => Some(read_checkpoint(fs::File::open(path).with_context(|| format!("opening {}", path.display()))?)?),
        None => None,
    };
    let (report, net) = train(&cfg, start)?;
    for s in &report.stages {
        println!(
            "stage {} M={:<4} epochs={:<6} loss={:.6e} L2={:.4e} H1={:.4e} time={:.2}s{}",
            s.stage,
            s.m,
            s.epochs,
            s.final_loss,
            s.l2_error,
            s.h1_error,
            s.train_seconds,
            s.galerkin_gap.map(|g| format!(" gap={g:.3e}")).unwrap_or_default()
        );
    }
    if let Some(dir) = &args.out {
        fs::create_dir_all(dir)?;
        let stem = dir.join(&args.label);
        report.save_csv(&stem.with_extension("csv"))?;
        write_report_json(&stem.with_extension("json"), &args.label, &report)?;
        write_checkpoint(&net, fs::File::create(stem.with_extension("ckpt"))?)?;
        println!("wrote {}.{{csv,json,ckpt}}", stem.display());
    }
    Ok(())
}

fn compare(config: &Path, out: Option<&Path>) -> Result<()> {
    let cfg = ExperimentConfig::load(config)?;
    let dir = out.map(Path::to_path_buf).unwrap_or_else(|| Path::new("runs").join(&cfg.name));
    println!("{} ({} cells, build {})", cfg.name, cfg.cells().len(), build_id());
    let outcome = run_experiment(&cfg, &dir, |label| eprintln!("training {label}"))?;
    println!("{:<6} {:>6} {:>6} {:>6} {:>12} {:>13} {:>10}", "method", "blocks", "seed", "M", "L2 error", "final loss", "seconds");
    for r in &outcome.rows {
        println!(
            "{:<6} {:>6} {:>6} {:>6} {:>12.4e} {:>13.6e} {:>10.2}",
            r.method.as_str(),
            r.blocks,
            r.seed,
            r.m,
            r.l2_error,
            r.final_loss,
            r.train_seconds
        );
    }
    println!("wrote {}", dir.join("comparison.csv").display());
    Ok(())
}

fn check(filter: Option<&str>, list: bool) -> Result<bool> {
    if list {
        check_names().iter().for_each(|n| println!("{n}"));
        return Ok(true);
    }
    let results = run_checks(filter);
    if results.is_empty() {
        bail!("no check matches `{}`", filter.unwrap_or_default());
    }
    for r in &results {
        let status = if r.passed { "PASS" } else { "FAIL" };
        println!("{status} {:<22} {:>7.3}s  {}", r.name, r.seconds, r.detail);
    }
    Ok(results.iter().all(|r| r.passed))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::MeshInfo { m } => mesh_info(*m).map(|_| true),
        Command::Galerkin(args) => galerkin(args).map(|_| true),
        Command::Train(args) => train_cmd(args).map(|_| true),
        Command::Compare { config, out } => compare(config, out.as_deref()).map(|_| true),
        Command::Check { filter, list } => check(filter.as_deref(), *list),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
