//! Experiment configuration: one JSON document.
//!
//! ```json
//! {
//!   "classifier": { "kappa0": 1, "v0": 4, "alpha": [1, 1, 1, 1] },
//!   "decision":   { "K": 4, "A": 2, "transitions": [...], "u_action": [...], "u_state": [...], "c_ins": 7 },
//!   "run":        { "order": "random-shuffle", "seed": 1, "initial_fraction": 0.015, "repetitions": 100 },
//!   "data":       { "synthetic": { ... } },
//!   "outputs":    { "directory": "out/synthetic" }
//! }
//! ```
//!
//! Unknown keys are rejected. Missing required keys are reported by name.

use crate::active::{BaselineBudget, PresentationOrder, RunConfig};
use crate::data::SyntheticSpec;
use crate::decision::DecisionProcess;
use crate::gmm::{DirichletParams, GmmError, GmmPrior, NiwParams};
use crate::grid::GridSpec;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub classifier: ClassifierConfig,
    pub decision: DecisionProcess,
    pub run: RunSection,
    pub data: DataSection,
    pub outputs: OutputSection,
}

/// NIW prior shared by every class, plus Dirichlet concentrations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassifierConfig {
    /// Defaults to the zero vector.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m0: Option<Vec<f64>>,
    pub kappa0: f64,
    pub v0: f64,
    /// Defaults to `(v0 - D - 1) I`, which makes the prior mean covariance `I`.
    #[serde(rename = "S0", default, skip_serializing_if = "Option::is_none")]
    pub s0: Option<Vec<Vec<f64>>>,
    pub alpha: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BudgetConfig {
    MatchActive,
}

/// Labels the random baseline may reveal: `"match-active"` or a fixed count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BaselineBudgetConfig {
    Named(BudgetConfig),
    Fixed(usize),
}

impl Default for BaselineBudgetConfig {
    fn default() -> Self {
        BaselineBudgetConfig::Named(BudgetConfig::MatchActive)
    }
}

impl From<BaselineBudgetConfig> for BaselineBudget {
    fn from(b: BaselineBudgetConfig) -> Self {
        match b {
            BaselineBudgetConfig::Named(BudgetConfig::MatchActive) => BaselineBudget::MatchActive,
            BaselineBudgetConfig::Fixed(n) => BaselineBudget::Fixed(n),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub order: PresentationOrder,
    pub seed: u64,
    pub initial_fraction: f64,
    pub repetitions: usize,
    #[serde(default = "default_true")]
    pub coverage_enforcement: bool,
    #[serde(default = "default_test_fraction")]
    pub test_fraction: f64,
    /// Worker threads; defaults to the available parallelism. Never affects results.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parallelism: Option<usize>,
    #[serde(default)]
    pub baseline_budget: BaselineBudgetConfig,
    /// EVPI grid over the (projected) feature plane; defaults to the padded
    /// bounding box of the training half at 100 x 100.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridSpec>,
}

fn default_true() -> bool {
    true
}

fn default_test_fraction() -> f64 {
    0.5
}

/// Exactly one of `synthetic` or `file`. `file` also needs `dim`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub synthetic: Option<SyntheticSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub file: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dim: Option<usize>,
    /// Standardize features with statistics of each repetition's training half.
    #[serde(default)]
    pub standardize: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub directory: PathBuf,
}

#[derive(Debug, Clone, PartialEq)]
pub enum DataSource<'a> {
    Synthetic(&'a SyntheticSpec),
    File { path: &'a Path, dim: usize },
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    /// Cross-section checks that serde cannot express.
    pub fn validate(&self) -> Result<(), String> {
        let k = self.decision.states();
        if self.classifier.alpha.len() != k {
            return Err(format!(
                "classifier.alpha has {} entries but decision.K is {k}",
                self.classifier.alpha.len()
            ));
        }
        self.data_source()?;
        if let Some(spec) = &self.data.synthetic {
            if spec.classes.len() != k {
                return Err(format!(
                    "data.synthetic has {} classes but decision.K is {k}",
                    spec.classes.len()
                ));
            }
        }
        if self.run.repetitions == 0 {
            return Err("run.repetitions must be at least 1".into());
        }
        if self.run.parallelism == Some(0) {
            return Err("run.parallelism must be at least 1".into());
        }
        self.run_config().validate().map_err(|e| format!("run: {e}"))?;
        if let Some(g) = &self.run.grid {
            g.validate().map_err(|e| format!("run.grid: {e}"))?;
        }
        Ok(())
    }

    pub fn data_source(&self) -> Result<DataSource<'_>, String> {
        match (&self.data.synthetic, &self.data.file) {
            (Some(s), None) => Ok(DataSource::Synthetic(s)),
            (None, Some(path)) => {
                let dim = self.data.dim.ok_or("data.dim is required with data.file")?;
                Ok(DataSource::File { path, dim })
            }
            (None, None) => Err("data needs one of `synthetic` or `file`".into()),
            (Some(_), Some(_)) => Err("data takes only one of `synthetic` or `file`".into()),
        }
    }

    pub fn dim(&self) -> Result<usize, String> {
        Ok(match self.data_source()? {
            DataSource::Synthetic(s) => s.dim(),
            DataSource::File { dim, .. } => dim,
        })
    }

    pub fn run_config(&self) -> RunConfig {
        RunConfig {
            order: self.run.order,
            seed: self.run.seed,
            initial_fraction: self.run.initial_fraction,
            coverage_enforcement: self.run.coverage_enforcement,
            test_fraction: self.run.test_fraction,
            standardize: self.data.standardize,
        }
    }

    pub fn baseline_budget(&self) -> BaselineBudget {
        self.run.baseline_budget.into()
    }

    pub fn parallelism(&self) -> usize {
        self.run
            .parallelism
            .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
    }

    pub fn prior(&self) -> Result<GmmPrior, PriorError> {
        let d = self.dim().map_err(PriorError::Config)?;
        let c = &self.classifier;
        let m = match &c.m0 {
            Some(m) if m.len() != d => {
                return Err(PriorError::Config(format!(
                    "classifier.m0 has {} entries but the data is {d}-dimensional",
                    m.len()
                )))
            }
            Some(m) => DVector::from_column_slice(m),
            None => DVector::zeros(d),
        };
        let s = match &c.s0 {
            Some(rows) => {
                if rows.len() != d || rows.iter().any(|r| r.len() != d) {
                    return Err(PriorError::Config(format!("classifier.S0 must be {d} x {d}")));
                }
                DMatrix::from_fn(d, d, |i, j| rows[i][j])
            }
            None => {
                let scale = c.v0 - d as f64 - 1.0;
                if !(scale > 0.0) {
                    return Err(PriorError::Config(format!(
                        "classifier.S0 is required when v0 <= D + 1 (v0 = {}, D = {d})",
                        c.v0
                    )));
                }
                DMatrix::identity(d, d) * scale
            }
        };
        let niw = NiwParams::new(m, c.kappa0, c.v0, s)?;
        Ok(GmmPrior::new(niw, DirichletParams::new(c.alpha.clone())?)?)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum PriorError {
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Gmm(#[from] GmmError),
}
