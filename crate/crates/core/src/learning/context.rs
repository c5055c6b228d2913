//! Pairwise context tables and ranked label combinations read off the
//! functional-context tensor.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::potentials::ModelParams;

pub const DEFAULT_TOP_K: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ContextAxis {
    ActionGrasp,
    ActionAttribute,
    GraspAttribute,
}

impl ContextAxis {
    pub const ALL: [ContextAxis; 3] = [
        ContextAxis::ActionGrasp,
        ContextAxis::ActionAttribute,
        ContextAxis::GraspAttribute,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ContextAxis::ActionGrasp => "action-grasp",
            ContextAxis::ActionAttribute => "action-attribute",
            ContextAxis::GraspAttribute => "grasp-attribute",
        }
    }
}

impl fmt::Display for ContextAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ContextAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ContextAxis::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown context axis `{s}`")))
    }
}

/// How entries of alpha are combined into one table cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReduceMode {
    /// Plain sum of alpha values.
    Sum,
    /// `log Σ exp(alpha)`.
    LogSumExp,
}

impl ReduceMode {
    pub fn name(self) -> &'static str {
        match self {
            ReduceMode::Sum => "sum",
            ReduceMode::LogSumExp => "log-sum-exp",
        }
    }
}

impl FromStr for ReduceMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sum" => Ok(ReduceMode::Sum),
            "log-sum-exp" => Ok(ReduceMode::LogSumExp),
            _ => Err(Error::InvalidConfig(format!("unknown reduce mode `{s}`"))),
        }
    }
}

/// A row-major `rows × cols` table. Grasp and attribute axes include the
/// null class at index 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContextTable {
    pub axis: ContextAxis,
    pub mode: ReduceMode,
    pub rows: usize,
    pub cols: usize,
    pub values: Vec<f64>,
}

impl ContextTable {
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.values[r * self.cols + c]
    }
}

/// Reduces alpha onto one pair of axes. Each side contributes its own
/// (grasp, attribute) pair and the two sides are averaged, so in
/// [`ReduceMode::Sum`] the table sums to the sum of the whole tensor.
/// [`ReduceMode::LogSumExp`] is the log of the same average taken over
/// `exp(alpha)`.
pub fn marginalize_context(
    params: &ModelParams,
    axis: ContextAxis,
    mode: ReduceMode,
) -> ContextTable {
    let dims = params.dims();
    let (g1, o1) = (dims.grasps + 1, dims.attributes + 1);
    let (rows, cols) = match axis {
        ContextAxis::ActionGrasp => (dims.actions, g1),
        ContextAxis::ActionAttribute => (dims.actions, o1),
        ContextAxis::GraspAttribute => (g1, o1),
    };
    let cell = |k: usize, g: usize, m: usize| match axis {
        ContextAxis::ActionGrasp => k * cols + g,
        ContextAxis::ActionAttribute => k * cols + m,
        ContextAxis::GraspAttribute => g * cols + m,
    };
    let alpha = params.block(crate::potentials::Block::Alpha);
    let shift = match mode {
        ReduceMode::Sum => 0.0,
        ReduceMode::LogSumExp => alpha.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    };
    let mut acc = vec![0.0; rows * cols];
    let mut idx = 0;
    for k in 0..dims.actions {
        for i in 0..g1 {
            for j in 0..g1 {
                for m in 0..o1 {
                    for n in 0..o1 {
                        let v = match mode {
                            ReduceMode::Sum => alpha[idx],
                            ReduceMode::LogSumExp => (alpha[idx] - shift).exp(),
                        };
                        acc[cell(k, i, m)] += 0.5 * v;
                        acc[cell(k, j, n)] += 0.5 * v;
                        idx += 1;
                    }
                }
            }
        }
    }
    if mode == ReduceMode::LogSumExp {
        for v in &mut acc {
            *v = v.ln() + shift;
        }
    }
    ContextTable {
        axis,
        mode,
        rows,
        cols,
        values: acc,
    }
}

/// One entry of an action's alpha slice.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Combination {
    /// Left, right.
    pub grasp: [usize; 2],
    pub attribute: [usize; 2],
    pub value: f64,
}

/// The `top_k` largest entries of `alpha[action]`, descending. Equal values
/// keep tensor index order.
pub fn most_probable_combinations(
    params: &ModelParams,
    action: usize,
    top_k: usize,
) -> Result<Vec<Combination>> {
    let dims = params.dims();
    if action >= dims.actions {
        return Err(Error::LabelOutOfRange(format!(
            "action {action} ≥ {}",
            dims.actions
        )));
    }
    let slice = params.alpha_slice(action);
    let mut order: Vec<usize> = (0..slice.len()).collect();
    // stable: ties stay in index order
    order.sort_by(|&a, &b| slice[b].total_cmp(&slice[a]));
    let (g1, o1) = (dims.grasps + 1, dims.attributes + 1);
    Ok(order
        .into_iter()
        .take(top_k)
        .map(|idx| {
            let n = idx % o1;
            let m = (idx / o1) % o1;
            let j = (idx / (o1 * o1)) % g1;
            let i = idx / (o1 * o1 * g1);
            Combination {
                grasp: [i, j],
                attribute: [m, n],
                value: slice[idx],
            }
        })
        .collect())
}
