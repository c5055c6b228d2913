//! Synthetic data, evaluation protocols and the oracle suite used by the
//! CLI and the acceptance tests.

pub mod eval;
pub mod instances;
pub mod oracle;
pub mod synth;

pub use eval::{
    compare_modes, downsizing_curve, downsizing_curve_records, evaluate, fit_mode,
    fit_mode_selected, write_curve_csv, write_report, AblationSpec, CurvePoint, EvalReport, Mode,
    ModeResult, Prediction, Task, TaskAccuracy,
};
pub use oracle::{run_oracle_suite, OracleConfig, OracleReport};
pub use synth::{synth_generate, to_training, to_training_set, SynthConfig, SynthDataset};
