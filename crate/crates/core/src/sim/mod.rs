//! Synthetic populations and the experiment harness.

pub mod experiment;
pub mod error_bound;
pub mod required_n;
pub mod suite;
pub mod synthetic;

pub use experiment::{
    ablation_nhbc, coverage_experiment, mae_experiment, run_experiment, sensitivity_sweep, Estimator,
    ExperimentConfig, ExperimentResult, MethodSummary, SensitivityTable,
};
pub use error_bound::{error_bound_check, ErrorBoundCheck};
pub use required_n::{required_n_experiment, RequiredNConfig, RequiredNResult};
pub use suite::NamedSpec;
pub use synthetic::{generate, GroupSpec, SyntheticPopulation, SyntheticSpec, TrueCalibration};
