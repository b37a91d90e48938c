mod checks;
mod experiment;
mod problem;

pub use checks::{check_names, run_checks, CheckOutcome};
pub use experiment::{
    build_id, run_experiment, write_report_json, Cell, ComparisonRow, ExperimentConfig, ExperimentOutcome,
    TrainOverrides, COMPARISON_HEADER,
};
pub use problem::{l2_h1_error, ManufacturedProblem};
