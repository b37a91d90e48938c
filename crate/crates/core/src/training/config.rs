use serde::{Deserialize, Serialize};

use super::optim::{AdamParams, CyclicLr};
use crate::network::{InitScheme, Precision};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    /// Monte-Carlo collocation.
    Mc,
    /// Quadrature collocation.
    Quad,
    /// Finite element interpolation.
    Fem,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Mc => "mc",
            Method::Quad => "quad",
            Method::Fem => "fem",
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mc" => Ok(Method::Mc),
            "quad" => Ok(Method::Quad),
            "fem" => Ok(Method::Fem),
            other => Err(Error::Config(format!("unknown method `{other}` (expected mc, quad or fem)"))),
        }
    }
}

/// One rung of the warm-start ladder.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Stage {
    pub m: usize,
    pub epochs: usize,
}

fn default_width() -> usize {
    64
}
fn default_blocks() -> usize {
    1
}
fn default_one() -> usize {
    1
}
fn default_alpha() -> f64 {
    40.0
}
fn default_lr_low() -> f64 {
    1e-5
}
fn default_lr_high() -> f64 {
    1e-3
}
fn default_half_cycle() -> usize {
    2000
}
fn default_log_every() -> usize {
    100
}
fn default_error_degree() -> usize {
    5
}
fn default_problem() -> String {
    "sine".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub method: Method,
    pub ladder: Vec<Stage>,
    #[serde(default = "default_width")]
    pub width: usize,
    #[serde(default = "default_blocks")]
    pub blocks: usize,
    #[serde(default = "default_one")]
    pub fem_degree: usize,
    #[serde(default = "default_one")]
    pub quad_degree: usize,
    /// Boundary penalty weight of the quadrature and FEM losses.
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    /// Boundary penalty weight of the Monte-Carlo loss.
    #[serde(default = "default_alpha")]
    pub c_pen: f64,
    #[serde(default = "default_lr_low")]
    pub lr_low: f64,
    #[serde(default = "default_lr_high")]
    pub lr_high: f64,
    #[serde(default = "default_half_cycle")]
    pub clr_half_cycle: usize,
    #[serde(default)]
    pub adam: AdamParams,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub precision: Precision,
    #[serde(default)]
    pub init: InitScheme,
    #[serde(default = "default_log_every")]
    pub log_every: usize,
    /// Reference mesh for the error norms; defaults to twice the largest
    /// ladder size.
    #[serde(default)]
    pub reference_m: Option<usize>,
    #[serde(default = "default_error_degree")]
    pub error_degree: usize,
    #[serde(default = "default_problem")]
    pub problem: String,
}

impl TrainConfig {
    /// Defaults for everything but the method and the ladder.
    pub fn new(method: Method, ladder: Vec<Stage>) -> Self {
        Self {
            method,
            ladder,
            width: default_width(),
            blocks: default_blocks(),
            fem_degree: 1,
            quad_degree: 1,
            alpha: default_alpha(),
            c_pen: default_alpha(),
            lr_low: default_lr_low(),
            lr_high: default_lr_high(),
            clr_half_cycle: default_half_cycle(),
            adam: AdamParams::default(),
            seed: 0,
            precision: Precision::F64,
            init: InitScheme::default(),
            log_every: default_log_every(),
            reference_m: None,
            error_degree: default_error_degree(),
            problem: default_problem(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn schedule(&self) -> Result<CyclicLr> {
        CyclicLr::new(self.lr_low, self.lr_high, self.clr_half_cycle)
    }

    pub fn reference_mesh_size(&self) -> usize {
        let max_m = self.ladder.iter().map(|s| s.m).max().unwrap_or(1);
        self.reference_m.unwrap_or(2 * max_m)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.ladder.is_empty() {
            return bad("ladder must have at least one stage".into());
        }
        if let Some(s) = self.ladder.iter().find(|s| s.m == 0) {
            return bad(format!("ladder stage with m = {}", s.m));
        }
        if self.ladder.windows(2).any(|w| w[1].m < w[0].m) {
            return bad("ladder sizes must be nondecreasing".into());
        }
        if self.width == 0 || self.blocks == 0 {
            return bad("width and blocks must be positive".into());
        }
        if !(1..=2).contains(&self.fem_degree) {
            return bad(format!("fem_degree must be 1 or 2, got {}", self.fem_degree));
        }
        if !(1..=5).contains(&self.quad_degree) {
            return bad(format!("quad_degree must be in 1..=5, got {}", self.quad_degree));
        }
        if !(1..=5).contains(&self.error_degree) {
            return bad(format!("error_degree must be in 1..=5, got {}", self.error_degree));
        }
        if !(self.alpha > 0.0) || !(self.c_pen >= 0.0) {
            return bad("alpha must be positive and c_pen nonnegative".into());
        }
        if self.log_every == 0 {
            return bad("log_every must be positive".into());
        }
        let AdamParams { beta1, beta2, eps } = self.adam;
        if !((0.0..1.0).contains(&beta1) && (0.0..1.0).contains(&beta2) && eps > 0.0) {
            return bad(format!("invalid Adam parameters {:?}", self.adam));
        }
        if let Some(r) = self.reference_m {
            let max_m = self.ladder.iter().map(|s| s.m).max().unwrap_or(0);
            if r < 2 * max_m {
                return bad(format!("reference_m = {r} must be at least twice the largest ladder size {max_m}"));
            }
        }
        crate::harness::ManufacturedProblem::by_name(&self.problem)?;
        self.schedule().map(|_| ()).map_err(|e| Error::Config(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_minimal_json_with_defaults() {
        let cfg = TrainConfig::from_json(r#"{"method": "fem", "ladder": [{"m": 20, "epochs": 10}]}"#).unwrap();
        assert_eq!(cfg, TrainConfig::new(Method::Fem, vec![Stage { m: 20, epochs: 10 }]));
        assert_eq!(cfg.reference_mesh_size(), 40);
        let back = TrainConfig::from_json(&serde_json::to_string(&cfg).unwrap()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn rejects_unknown_keys_and_bad_values() {
        let err = TrainConfig::from_json(r#"{"method": "fem", "ladder": [], "widht": 3}"#).unwrap_err();
        assert!(err.to_string().contains("widht"), "{err}");
        assert!(TrainConfig::from_json(r#"{"method": "fem", "ladder": [{"m": 2, "epochs": 1, "x": 0}]}"#).is_err());
        assert!(TrainConfig::from_json(r#"{"method": "sgd", "ladder": [{"m": 2, "epochs": 1}]}"#).is_err());
        let base = TrainConfig::new(Method::Quad, vec![Stage { m: 40, epochs: 1 }, Stage { m: 20, epochs: 1 }]);
        assert!(base.validate().is_err());
        let mut c = TrainConfig::new(Method::Quad, vec![Stage { m: 4, epochs: 1 }]);
        c.lr_low = 1e-2;
        assert!(c.validate().is_err());
        let mut c = TrainConfig::new(Method::Quad, vec![Stage { m: 4, epochs: 1 }]);
        c.quad_degree = 6;
        assert!(c.validate().is_err());
        let mut c = TrainConfig::new(Method::Fem, vec![Stage { m: 4, epochs: 1 }]);
        c.reference_m = Some(7);
        assert!(c.validate().is_err());
        assert!(TrainConfig::new(Method::Fem, vec![]).validate().is_err());
    }

    #[test]
    fn method_round_trip() {
        for m in [Method::Mc, Method::Quad, Method::Fem] {
            assert_eq!(m.as_str().parse::<Method>().unwrap(), m);
        }
        assert!("x".parse::<Method>().is_err());
    }
}
