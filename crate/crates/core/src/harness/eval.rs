//! Evaluation protocol: ablation modes, per-task accuracy, and the
//! downsizing robustness curve.

use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inference::{infer, InferenceConfig};
use crate::io::{write_accuracy_csv, write_confusion_csv, write_json, Confusion, FrameRecord};
use crate::labels::{Dims, LabelSpace};
use crate::learning::{fit, log_likelihood, FitResult, Labels, LearningConfig, TrainingFrame};
use crate::potentials::{Block, ModelParams};

use super::synth::{synth_generate, to_training_set, SynthConfig};

/// Which parameter blocks a model may use. Restricted modes hold the
/// context blocks at zero during training and inference.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    /// alpha, beta and gamma zero.
    EvidenceOnly,
    /// alpha zero.
    EvidencePhysical,
    Full,
}

impl Mode {
    pub const ALL: [Mode; 3] = [Mode::EvidenceOnly, Mode::EvidencePhysical, Mode::Full];

    pub fn name(self) -> &'static str {
        match self {
            Mode::EvidenceOnly => "evidence-only",
            Mode::EvidencePhysical => "evidence-physical",
            Mode::Full => "full",
        }
    }

    pub fn frozen_blocks(self) -> Vec<Block> {
        match self {
            Mode::EvidenceOnly => vec![Block::Alpha, Block::Beta, Block::Gamma],
            Mode::EvidencePhysical => vec![Block::Alpha],
            Mode::Full => Vec::new(),
        }
    }

    /// Zeroes the blocks this mode does not use.
    pub fn restrict(self, params: &ModelParams) -> ModelParams {
        let mut p = params.clone();
        p.clear(&self.frozen_blocks());
        p
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "evidence-only" => Ok(Mode::EvidenceOnly),
            "evidence-physical" | "evidence+physical" => Ok(Mode::EvidencePhysical),
            "full" => Ok(Mode::Full),
            _ => Err(Error::InvalidConfig(format!(
                "unknown mode `{s}` (expected evidence-only, evidence-physical or full)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationSpec {
    pub modes: Vec<Mode>,
    /// Fractions of the training set removed, strictly increasing in [0, 1).
    pub fractions: Vec<f64>,
    /// Candidate L2 strengths, chosen per mode by held-out likelihood. Empty
    /// keeps the learning config's own strength.
    pub l2_grid: Vec<f64>,
    /// Share of the training frames held out for choosing the L2 strength.
    pub holdout: f64,
}

impl Default for AblationSpec {
    fn default() -> Self {
        AblationSpec {
            modes: vec![Mode::EvidenceOnly, Mode::Full],
            fractions: vec![0.0, 0.2, 0.4, 0.6],
            l2_grid: vec![1e-2, 1e-1, 1.0],
            holdout: 0.2,
        }
    }
}

impl AblationSpec {
    pub fn validate(&self) -> Result<()> {
        if self.modes.is_empty() {
            return Err(Error::InvalidConfig("no modes requested".into()));
        }
        if self.fractions.iter().any(|f| !(0.0..1.0).contains(f)) {
            return Err(Error::InvalidConfig("fractions must lie in [0, 1)".into()));
        }
        if self.fractions.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidConfig(
                "fractions must be strictly increasing".into(),
            ));
        }
        if self.l2_grid.iter().any(|l| !(*l >= 0.0 && l.is_finite())) {
            return Err(Error::InvalidConfig(
                "l2_grid entries must be finite and ≥ 0".into(),
            ));
        }
        if !(self.holdout > 0.0 && self.holdout < 1.0) {
            return Err(Error::InvalidConfig("holdout must lie in (0, 1)".into()));
        }
        Ok(())
    }
}

/// Overall accuracy per task; NaN when a task has no scored items.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TaskAccuracy {
    pub action: f64,
    pub grasp: f64,
    pub attribute: f64,
}

impl TaskAccuracy {
    pub fn get(&self, task: Task) -> f64 {
        match task {
            Task::Action => self.action,
            Task::Grasp => self.grasp,
            Task::Attribute => self.attribute,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Action,
    Grasp,
    Attribute,
}

impl Task {
    pub const ALL: [Task; 3] = [Task::Action, Task::Grasp, Task::Attribute];

    pub fn name(self) -> &'static str {
        match self {
            Task::Action => "action",
            Task::Grasp => "grasp",
            Task::Attribute => "attribute",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub frame_id: String,
    pub truth: Labels,
    pub predicted: Labels,
}

/// Scored `(truth, predicted)` pairs of one task. The action is scored on
/// every frame; a side's grasp when the truth has a hand there, its
/// attribute when the truth has an object there.
pub fn scored_pairs(p: &Prediction, task: Task) -> Vec<(usize, usize)> {
    match task {
        Task::Action => vec![(p.truth.action, p.predicted.action)],
        Task::Grasp => (0..2)
            .filter(|&s| p.truth.grasp[s] > 0)
            .map(|s| (p.truth.grasp[s], p.predicted.grasp[s]))
            .collect(),
        Task::Attribute => (0..2)
            .filter(|&s| p.truth.attribute[s] > 0)
            .map(|s| (p.truth.attribute[s], p.predicted.attribute[s]))
            .collect(),
    }
}

#[derive(Debug, Clone)]
pub struct EvalReport {
    pub action: Confusion,
    pub grasp: Confusion,
    pub attribute: Confusion,
    pub predictions: Vec<Prediction>,
}

impl EvalReport {
    pub fn confusion(&self, task: Task) -> &Confusion {
        match task {
            Task::Action => &self.action,
            Task::Grasp => &self.grasp,
            Task::Attribute => &self.attribute,
        }
    }

    pub fn accuracy(&self) -> TaskAccuracy {
        let acc = |t| self.confusion(t).overall().unwrap_or(f64::NAN);
        TaskAccuracy {
            action: acc(Task::Action),
            grasp: acc(Task::Grasp),
            attribute: acc(Task::Attribute),
        }
    }
}

/// MAP inference on every record (in parallel, output in input order) and
/// the resulting confusion tables. Every record needs ground truth.
pub fn evaluate(
    params: &ModelParams,
    space: &LabelSpace,
    records: &[FrameRecord],
    config: &InferenceConfig,
) -> Result<EvalReport> {
    config.validate()?;
    params.check_dims(space.dims())?;
    let predictions = records
        .par_iter()
        .map(|r| {
            let truth = r.truth.as_ref().ok_or_else(|| {
                Error::MissingEvidence(format!("frame `{}` has no ground truth", r.frame_id))
            })?;
            let res = infer(&r.evidence, params, config)?;
            Ok(Prediction {
                frame_id: r.frame_id.clone(),
                truth: Labels::of(truth),
                predicted: Labels::of(&res.state),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut report = EvalReport {
        action: Confusion::new("action", space.actions()),
        grasp: Confusion::new("grasp", space.grasps()),
        attribute: Confusion::new("attribute", space.attributes()),
        predictions,
    };
    for p in &report.predictions {
        for (t, y) in scored_pairs(p, Task::Action) {
            report.action.add(t, y);
        }
        for (t, y) in scored_pairs(p, Task::Grasp) {
            report.grasp.add(t, y);
        }
        for (t, y) in scored_pairs(p, Task::Attribute) {
            report.attribute.add(t, y);
        }
    }
    Ok(report)
}

#[derive(Serialize)]
struct Summary<'a> {
    mode: &'a str,
    frames: usize,
    accuracy: TaskAccuracy,
    blocks_zeroed: Vec<&'static str>,
}

/// Writes `accuracy_<task>.csv`, `confusion_<task>.csv`,
/// `predictions.jsonl` and `summary.json` into `dir`.
pub fn write_report(dir: impl AsRef<Path>, report: &EvalReport, mode: Mode) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir)?;
    for task in Task::ALL {
        let c = report.confusion(task);
        write_accuracy_csv(dir.join(format!("accuracy_{}.csv", task.name())), c)?;
        write_confusion_csv(dir.join(format!("confusion_{}.csv", task.name())), c)?;
    }
    let mut out = std::io::BufWriter::new(std::fs::File::create(dir.join("predictions.jsonl"))?);
    for p in &report.predictions {
        serde_json::to_writer(&mut out, p)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    write_json(
        dir.join("summary.json"),
        &Summary {
            mode: mode.name(),
            frames: report.predictions.len(),
            accuracy: report.accuracy(),
            blocks_zeroed: mode.frozen_blocks().into_iter().map(Block::name).collect(),
        },
    )
}

/// Fits a model restricted to `mode`, on top of any blocks `base` already
/// freezes.
pub fn fit_mode(
    frames: &[TrainingFrame],
    dims: Dims,
    mode: Mode,
    base: &LearningConfig,
) -> Result<FitResult> {
    let mut cfg = base.clone();
    cfg.frozen.extend(mode.frozen_blocks());
    cfg.frozen.sort();
    cfg.frozen.dedup();
    fit(frames, dims, &cfg)
}

/// Picks the L2 strength from `grid` whose fit on the leading frames gives
/// the highest unregularized log-likelihood on the last `holdout` share,
/// then refits on all frames. Ties go to the earlier grid entry.
pub fn fit_mode_selected(
    frames: &[TrainingFrame],
    dims: Dims,
    mode: Mode,
    base: &LearningConfig,
    grid: &[f64],
    holdout: f64,
) -> Result<(FitResult, f64)> {
    let split = ((1.0 - holdout) * frames.len() as f64).round() as usize;
    if grid.is_empty() || split == 0 || split == frames.len() {
        return Ok((fit_mode(frames, dims, mode, base)?, base.l2_strength));
    }
    let (fit_part, held) = frames.split_at(split);
    let score = LearningConfig {
        l2_strength: 0.0,
        alpha_smoothing: 0.0,
        ..base.clone()
    };
    let mut best = (f64::NEG_INFINITY, base.l2_strength);
    for &l2 in grid {
        let cfg = LearningConfig {
            l2_strength: l2,
            ..base.clone()
        };
        let fitted = fit_mode(fit_part, dims, mode, &cfg)?;
        let ll = log_likelihood(&fitted.params, held, &score)?;
        if ll > best.0 {
            best = (ll, l2);
        }
    }
    let cfg = LearningConfig {
        l2_strength: best.1,
        ..base.clone()
    };
    Ok((fit_mode(frames, dims, mode, &cfg)?, best.1))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeResult {
    pub mode: Mode,
    /// L2 strength the fit used.
    pub l2_strength: f64,
    pub objective: f64,
    pub accuracy: TaskAccuracy,
}

fn run_modes(
    train: &[TrainingFrame],
    test: &[FrameRecord],
    space: &LabelSpace,
    spec: &AblationSpec,
    learning: &LearningConfig,
    inference: &InferenceConfig,
) -> Result<Vec<ModeResult>> {
    spec.modes
        .iter()
        .map(|&mode| {
            let (fitted, l2) = fit_mode_selected(
                train,
                space.dims(),
                mode,
                learning,
                &spec.l2_grid,
                spec.holdout,
            )?;
            let report = evaluate(&fitted.params, space, test, inference)?;
            Ok(ModeResult {
                mode,
                l2_strength: l2,
                objective: fitted.objective,
                accuracy: report.accuracy(),
            })
        })
        .collect()
}

/// Trains each of `spec.modes` on the first `train_count` training frames
/// of `data` and evaluates on its test frames. `spec.fractions` is ignored.
pub fn compare_modes(
    data: &super::synth::SynthDataset,
    train_count: usize,
    spec: &AblationSpec,
    learning: &LearningConfig,
    inference: &InferenceConfig,
) -> Result<Vec<ModeResult>> {
    spec.validate()?;
    let n = train_count.min(data.train.len());
    let train = to_training_set(&data.train[..n])?;
    run_modes(
        &train,
        &data.test,
        &data.label_space,
        spec,
        learning,
        inference,
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub fraction: f64,
    pub train_frames: usize,
    /// Evidence noise of the regenerated synthetic data, if any.
    pub evidence_noise: Option<f64>,
    pub results: Vec<ModeResult>,
}

impl CurvePoint {
    pub fn accuracy(&self, mode: Mode) -> Option<TaskAccuracy> {
        self.results
            .iter()
            .find(|r| r.mode == mode)
            .map(|r| r.accuracy)
    }

    /// Full minus evidence-only accuracy on `task`.
    pub fn gap(&self, task: Task) -> Option<f64> {
        Some(self.accuracy(Mode::Full)?.get(task) - self.accuracy(Mode::EvidenceOnly)?.get(task))
    }
}

/// Accuracy against the fraction of training data removed.
///
/// Removing a fraction `f` keeps the first `(1 − f)·N` training frames. The
/// classifiers producing the evidence would be trained on the same reduced
/// set, so the evidence noise is scaled by `sqrt(1 / (1 − f))`, the standard
/// error growth of an estimate from `(1 − f)·N` samples. Labels and boxes
/// are unchanged across fractions.
pub fn downsizing_curve(
    synth: &SynthConfig,
    spec: &AblationSpec,
    learning: &LearningConfig,
    inference: &InferenceConfig,
) -> Result<Vec<CurvePoint>> {
    spec.validate()?;
    spec.fractions
        .iter()
        .map(|&f| {
            let mut cfg = synth.clone();
            cfg.evidence_noise = synth.evidence_noise * (1.0 / (1.0 - f)).sqrt();
            let data = synth_generate(&cfg)?;
            let keep = ((1.0 - f) * synth.train_frames as f64).round() as usize;
            let results = compare_modes(&data, keep, spec, learning, inference)?;
            Ok(CurvePoint {
                fraction: f,
                train_frames: keep,
                evidence_noise: Some(cfg.evidence_noise),
                results,
            })
        })
        .collect()
}

/// Downsizing on fixed data: each fraction refits every mode on the first
/// `(1 − f)·N` training frames and evaluates on `test`. The evidence itself
/// is left as is.
pub fn downsizing_curve_records(
    train: &[TrainingFrame],
    test: &[FrameRecord],
    space: &LabelSpace,
    spec: &AblationSpec,
    learning: &LearningConfig,
    inference: &InferenceConfig,
) -> Result<Vec<CurvePoint>> {
    spec.validate()?;
    spec.fractions
        .iter()
        .map(|&f| {
            let keep = ((1.0 - f) * train.len() as f64).round() as usize;
            let results = run_modes(&train[..keep], test, space, spec, learning, inference)?;
            Ok(CurvePoint {
                fraction: f,
                train_frames: keep,
                evidence_noise: None,
                results,
            })
        })
        .collect()
}

/// One row per (fraction, mode): `fraction,train_frames,mode,action,grasp,attribute`.
pub fn write_curve_csv(path: impl AsRef<Path>, curve: &[CurvePoint]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "fraction",
        "train_frames",
        "mode",
        "action",
        "grasp",
        "attribute",
    ])?;
    for p in curve {
        for r in &p.results {
            w.write_record([
                p.fraction.to_string(),
                p.train_frames.to_string(),
                r.mode.name().to_string(),
                r.accuracy.action.to_string(),
                r.accuracy.grasp.to_string(),
                r.accuracy.attribute.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}
