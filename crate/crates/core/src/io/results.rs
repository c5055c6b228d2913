//! Result tables: per-class accuracy, confusion matrices and context
//! tables as CSV, plus a JSON summary.

use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::labels::{ClassLabel, LabelSpace};
use crate::learning::{marginalize_context, ContextAxis, ReduceMode};
use crate::potentials::ModelParams;

/// Confusion counts for one task. Rows are true classes, columns predicted
/// classes, both over the full class list.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Confusion {
    pub task: String,
    pub classes: Vec<String>,
    pub counts: Vec<Vec<u64>>,
}

impl Confusion {
    pub fn new(task: impl Into<String>, classes: &[ClassLabel]) -> Self {
        let n = classes.len();
        Confusion {
            task: task.into(),
            classes: classes.iter().map(|c| c.name.clone()).collect(),
            counts: vec![vec![0; n]; n],
        }
    }

    pub fn add(&mut self, truth: usize, predicted: usize) {
        self.counts[truth][predicted] += 1;
    }

    pub fn support(&self, class: usize) -> u64 {
        self.counts[class].iter().sum()
    }

    pub fn correct(&self, class: usize) -> u64 {
        self.counts[class][class]
    }

    pub fn total(&self) -> u64 {
        (0..self.classes.len()).map(|c| self.support(c)).sum()
    }

    /// `None` for classes without support.
    pub fn class_accuracy(&self, class: usize) -> Option<f64> {
        let n = self.support(class);
        (n > 0).then(|| self.correct(class) as f64 / n as f64)
    }

    /// Correct predictions over all counted items; `None` when empty.
    pub fn overall(&self) -> Option<f64> {
        let total = self.total();
        let correct: u64 = (0..self.classes.len()).map(|c| self.correct(c)).sum();
        (total > 0).then(|| correct as f64 / total as f64)
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// `class,correct,total,accuracy` rows followed by an `Overall` row. The
/// accuracy field is empty for classes without support.
pub fn write_accuracy_csv(path: impl AsRef<Path>, c: &Confusion) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["class", "correct", "total", "accuracy"])?;
    for (i, name) in c.classes.iter().enumerate() {
        w.write_record([
            name.clone(),
            c.correct(i).to_string(),
            c.support(i).to_string(),
            fmt_opt(c.class_accuracy(i)),
        ])?;
    }
    let correct: u64 = (0..c.classes.len()).map(|i| c.correct(i)).sum();
    w.write_record([
        "Overall".to_string(),
        correct.to_string(),
        c.total().to_string(),
        fmt_opt(c.overall()),
    ])?;
    w.flush()?;
    Ok(())
}

/// Square table with a header row of predicted class names.
pub fn write_confusion_csv(path: impl AsRef<Path>, c: &Confusion) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["truth\\predicted".to_string()];
    header.extend(c.classes.iter().cloned());
    w.write_record(&header)?;
    for (name, row) in c.classes.iter().zip(&c.counts) {
        let mut rec = vec![name.clone()];
        rec.extend(row.iter().map(u64::to_string));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

fn axis_labels(space: &LabelSpace, axis: ContextAxis) -> (&[ClassLabel], &[ClassLabel]) {
    match axis {
        ContextAxis::ActionGrasp => (space.actions(), space.grasps()),
        ContextAxis::ActionAttribute => (space.actions(), space.attributes()),
        ContextAxis::GraspAttribute => (space.grasps(), space.attributes()),
    }
}

/// Writes `context_<axis>_<mode>.csv` for every axis into `dir`.
pub fn write_context_tables(
    dir: impl AsRef<Path>,
    params: &ModelParams,
    space: &LabelSpace,
    mode: ReduceMode,
) -> Result<()> {
    params.check_dims(space.dims())?;
    for axis in ContextAxis::ALL {
        let table = marginalize_context(params, axis, mode);
        let (rows, cols) = axis_labels(space, axis);
        let path = dir
            .as_ref()
            .join(format!("context_{}_{}.csv", axis.name(), mode.name()));
        let mut w = csv::Writer::from_path(path)?;
        let mut header = vec![axis.name().to_string()];
        header.extend(cols.iter().map(|c| c.name.clone()));
        w.write_record(&header)?;
        for (r, label) in rows.iter().enumerate() {
            let mut rec = vec![label.name.clone()];
            rec.extend((0..table.cols).map(|c| table.get(r, c).to_string()));
            w.write_record(&rec)?;
        }
        w.flush()?;
    }
    Ok(())
}

pub fn write_json(path: impl AsRef<Path>, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

/// Parses an accuracy CSV back into `(class, correct, total)` rows,
/// including the trailing `Overall` row.
pub fn read_accuracy_csv(path: impl AsRef<Path>) -> Result<Vec<(String, u64, u64)>> {
    let mut r = csv::Reader::from_path(path)?;
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let num = |i: usize| -> Result<u64> {
            rec.get(i)
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| Error::Manifest(format!("malformed accuracy row {rec:?}")))
        };
        out.push((rec.get(0).unwrap_or_default().to_string(), num(1)?, num(2)?));
    }
    Ok(out)
}
