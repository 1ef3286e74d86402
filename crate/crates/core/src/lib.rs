//! Risk-based active learning for structural health monitoring.
//!
//! A conjugate Bayesian Gaussian mixture classifies damage states; a
//! single-stage maintenance decision process scores the expected value of
//! perfect information (EVPI) of each incoming observation, and a label is
//! requested only when that value exceeds the inspection cost.
//!
//! ```
//! use rbal_core::{evpi, DecisionProcess, DiscreteDistribution};
//!
//! let dp = DecisionProcess::synthetic_example();
//! let p = DiscreteDistribution::new(vec![0.4, 0.3, 0.2, 0.1]).unwrap();
//! assert!((evpi(&dp, &p).unwrap() - 5.415).abs() < 1e-9);
//! ```

pub mod active;
pub mod config;
pub mod data;
pub mod decision;
pub mod error;
pub mod experiment;
pub mod export;
pub mod gmm;
pub mod grid;
pub mod prob;
mod serde_ext;

pub use active::{
    decision_accuracy, monte_carlo, run_active, run_random_baseline, ActiveError, BaselineBudget,
    Classifier, CurvePoint, Episode, LabelOracle, LearningCurve, MonteCarloResult,
    PresentationOrder, Problem, QueryLog, QueryRecord, Repetition, RunConfig, RunOutcome,
};
pub use config::ExperimentConfig;
pub use data::{
    generate_synthetic, load_dataset, standardize, DataError, Projection, Standardizer,
    SyntheticSpec,
};
pub use decision::{
    evpi, expected_utility, meu_observed, meu_unobserved, query_indicated,
    stationary_distribution, DecisionError, DecisionProcess, PolicyResult,
};
pub use error::{Error, ErrorKind};
pub use experiment::Experiment;
pub use gmm::{
    ClassSummary, DirichletParams, FeatureVector, GmmError, GmmPosterior, GmmPrior, LabeledSet,
    NiwParams,
};
pub use grid::{evpi_grid, EvpiGrid, GridError, GridSpec};
pub use prob::{Action, ClassLabel, DiscreteDistribution, ProbError, TransitionCpt, UtilityTable};
