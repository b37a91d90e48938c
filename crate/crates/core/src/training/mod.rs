//! Training the network on one of three discrete energies, with Adam and a
//! triangular cyclic learning rate, on a warm-started ladder of meshes.

mod backends;
mod config;
mod ladder;
mod optim;

pub use backends::{FemLoss, McLoss, QuadLoss};
pub use config::{Method, Stage, TrainConfig};
pub use ladder::{train, train_ladder, EnergyReport, LogEntry, StageReport, REPORT_SCHEMA_VERSION};
pub use optim::{Adam, AdamParams, CyclicLr};
