//! Maximum-likelihood estimation of [`ModelParams`] as a conditional
//! log-linear model over labels, with boxes clamped to ground truth.
//!
//! For one frame the label space is every `(A, G^l, O^l, G^r, O^r)` whose
//! presence pattern agrees with the annotated boxes: a side with a hand box
//! takes either the null pair or any grasp (with any attribute when an object
//! box is annotated, else the null attribute); a side without a hand box is
//! pinned to null. `Z` is summed exactly with log-sum-exp.

mod context;

pub use context::{
    marginalize_context, most_probable_combinations, Combination, ContextAxis, ContextTable,
    ReduceMode, DEFAULT_TOP_K,
};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::labels::{Dims, Side};
use crate::potentials::{
    side_unary, Block, EvidenceBundle, HandCandidate, ModelParams, ObjectCandidate, SceneState,
    SideChoice,
};

/// Frames per work unit. Fixed so that reductions happen in the same order
/// regardless of thread count.
const CHUNK: usize = 32;

/// An annotated frame: evidence evaluated at the ground-truth boxes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingFrame {
    pub evidence: EvidenceBundle,
    pub truth: SceneState,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LearningConfig {
    pub l2_strength: f64,
    pub step_size: f64,
    pub max_epochs: usize,
    /// Stop once the relative objective gain of an accepted step falls below
    /// this.
    pub convergence_tol: f64,
    /// Weight of a uniform pseudo-count prior on each action's alpha slice.
    pub alpha_smoothing: f64,
    /// Blocks held at zero (ablations).
    pub frozen: Vec<Block>,
}

impl Default for LearningConfig {
    fn default() -> Self {
        LearningConfig {
            l2_strength: 1e-2,
            step_size: 0.1,
            max_epochs: 200,
            convergence_tol: 1e-6,
            alpha_smoothing: 0.0,
            frozen: Vec::new(),
        }
    }
}

impl LearningConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidConfig(msg.into()));
        if !(self.l2_strength >= 0.0 && self.l2_strength.is_finite()) {
            return bad("l2_strength must be finite and ≥ 0");
        }
        if !(self.step_size > 0.0 && self.step_size.is_finite()) {
            return bad("step_size must be finite and > 0");
        }
        if self.max_epochs < 1 {
            return bad("max_epochs must be ≥ 1");
        }
        if !(self.convergence_tol >= 0.0) {
            return bad("convergence_tol must be ≥ 0");
        }
        if !(self.alpha_smoothing >= 0.0 && self.alpha_smoothing.is_finite()) {
            return bad("alpha_smoothing must be finite and ≥ 0");
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct FitResult {
    pub params: ModelParams,
    pub objective: f64,
    /// Objective at the start and after every accepted step.
    pub trace: Vec<f64>,
    pub epochs: usize,
    pub converged: bool,
}

/// The label part of a scene: action plus per-side (grasp, attribute).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Labels {
    pub action: usize,
    pub grasp: [usize; 2],
    pub attribute: [usize; 2],
}

impl Labels {
    pub fn of(state: &SceneState) -> Self {
        Labels {
            action: state.action,
            grasp: [state.left.grasp, state.right.grasp],
            attribute: [state.left.attribute, state.right.attribute],
        }
    }
}

/// A frame reduced to at most one hand and one object per side, plus the
/// enumerated per-side options.
#[derive(Debug, Clone)]
struct Compiled {
    evidence: EvidenceBundle,
    /// Per side: `(grasp, attribute)` options, null first.
    options: [Vec<(usize, usize)>; 2],
    truth: (usize, [usize; 2]),
}

impl Compiled {
    fn choice((grasp, attribute): (usize, usize)) -> SideChoice {
        if grasp == 0 {
            return SideChoice::NULL;
        }
        SideChoice {
            hand: Some(0),
            grasp,
            object: (attribute > 0).then_some(0),
            attribute,
        }
    }

    fn size(&self, dims: Dims) -> usize {
        dims.actions * self.options[0].len() * self.options[1].len()
    }
}

fn compile(frame: &TrainingFrame, dims: Dims, index: usize) -> Result<Compiled> {
    let ctx = |msg: String| Error::InconsistentState(format!("training frame {index}: {msg}"));
    frame.evidence.validate(dims)?;
    frame.truth.validate(dims)?;
    let mut evidence = EvidenceBundle::new(frame.evidence.phi_a.clone());
    let mut options: [Vec<(usize, usize)>; 2] = [vec![(0, 0)], vec![(0, 0)]];
    let mut truth = [0; 2];
    for side in Side::BOTH {
        let t = frame.truth.side(side);
        let hands = frame.evidence.side(side);
        let hand: Option<&HandCandidate> = match t.hand {
            Some(b) => Some(
                hands
                    .iter()
                    .find(|h| h.bbox == b)
                    .ok_or_else(|| ctx(format!("{side} ground-truth hand has no evidence")))?,
            ),
            None if hands.len() == 1 => Some(&hands[0]),
            None if hands.is_empty() => None,
            None => {
                return Err(ctx(format!(
                    "{side}: several hand boxes but no annotated hand"
                )))
            }
        };
        let Some(hand) = hand else { continue };
        let object: Option<&ObjectCandidate> = match t.object {
            Some(b) => Some(
                hand.objects
                    .iter()
                    .find(|o| o.bbox == b)
                    .ok_or_else(|| ctx(format!("{side} ground-truth object has no evidence")))?,
            ),
            None if t.hand.is_some() => None,
            None => match hand.objects.len() {
                0 => None,
                1 => Some(&hand.objects[0]),
                _ => {
                    return Err(ctx(format!(
                        "{side}: several object boxes but none annotated"
                    )))
                }
            },
        };
        if object.is_some() && hand.offset.is_none() {
            return Err(ctx(format!(
                "{side} object annotated but hand has no offset"
            )));
        }
        evidence.side_mut(side).push(HandCandidate {
            objects: object.cloned().into_iter().collect(),
            ..hand.clone()
        });
        let opts = &mut options[side.index()];
        for g in 1..=dims.grasps {
            if object.is_some() {
                opts.extend((1..=dims.attributes).map(|m| (g, m)));
            } else {
                opts.push((g, 0));
            }
        }
        let pair = (t.grasp, t.attribute);
        truth[side.index()] = opts
            .iter()
            .position(|&o| o == pair)
            .ok_or_else(|| ctx(format!("{side} truth {pair:?} outside the feasible set")))?;
    }
    Ok(Compiled {
        evidence,
        options,
        truth: (frame.truth.action, truth),
    })
}

fn compile_all(frames: &[TrainingFrame], dims: Dims) -> Result<Vec<Compiled>> {
    if frames.is_empty() {
        return Err(Error::InvalidConfig("no training frames".into()));
    }
    frames
        .iter()
        .enumerate()
        .map(|(i, f)| compile(f, dims, i))
        .collect()
}

/// Number of label assignments in a frame's partition function.
pub fn feasible_count(frame: &TrainingFrame, dims: Dims) -> Result<usize> {
    Ok(compile(frame, dims, 0)?.size(dims))
}

/// Per-frame scores laid out `[action][left option][right option]`.
struct Scores {
    values: Vec<f64>,
    unary: [Vec<f64>; 2],
    alpha_off: [Vec<usize>; 2],
}

fn scores(params: &ModelParams, c: &Compiled) -> Scores {
    let dims = params.dims();
    let layout = params.layout();
    let o1 = dims.attributes + 1;
    let g1 = dims.grasps + 1;
    let unary = Side::BOTH.map(|side| {
        c.options[side.index()]
            .iter()
            .map(|&o| side_unary(params, &c.evidence, side, &Compiled::choice(o)))
            .collect::<Vec<_>>()
    });
    let alpha_off = [
        c.options[0]
            .iter()
            .map(|&(g, m)| g * g1 * o1 * o1 + m * o1)
            .collect::<Vec<_>>(),
        c.options[1]
            .iter()
            .map(|&(g, m)| g * o1 * o1 + m)
            .collect::<Vec<_>>(),
    ];
    let action: Vec<f64> = (0..dims.actions)
        .map(|k| crate::potentials::dot(params.xi(k), &c.evidence.phi_a))
        .collect();
    let alpha = params.block(Block::Alpha);
    let stride = layout.alpha_action_stride();
    let (nl, nr) = (unary[0].len(), unary[1].len());
    let mut values = Vec::with_capacity(dims.actions * nl * nr);
    for (k, xa) in action.iter().enumerate() {
        for a in 0..nl {
            let base = k * stride + alpha_off[0][a];
            for b in 0..nr {
                // same summation order as assignment_potential
                values.push(alpha[base + alpha_off[1][b]] + xa + unary[0][a] + unary[1][b]);
            }
        }
    }
    Scores {
        values,
        unary,
        alpha_off,
    }
}

fn log_sum_exp(v: &[f64]) -> f64 {
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY || !m.is_finite() {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Accumulates `weight · features(option)` for one side into `out`.
fn add_side_features(
    params: &ModelParams,
    c: &Compiled,
    side: Side,
    option: (usize, usize),
    weight: f64,
    out: &mut [f64],
) {
    let (g, m) = option;
    if g == 0 || weight == 0.0 {
        return;
    }
    let layout = params.layout();
    let dims = params.dims();
    let hand = &c.evidence.side(side)[0];
    for (d, x) in hand.phi_h.iter().enumerate() {
        out[layout.zeta_index(side, d)] += weight * x;
    }
    let row = layout.eta_row(g);
    for (d, x) in hand.phi_g.iter().enumerate() {
        out[row + d] += weight * x;
    }
    if m > 0 {
        out[layout.beta_index(g, m)] += weight;
        let obj = &hand.objects[0];
        let reference = hand.reference_object().expect("checked at compile time");
        out[layout.gamma_index(side)] += weight * crate::geometry::iou(&obj.bbox, &reference);
        let row = layout.lambda_row(m);
        for d in 0..dims.attributes {
            out[row + d] += weight * obj.phi_o[d];
        }
    }
}

/// Log-likelihood, gradient and a diagonal curvature estimate for one frame,
/// accumulated into the output buffers.
struct Accum {
    value: f64,
    grad: Vec<f64>,
    curv: Vec<f64>,
}

impl Accum {
    fn new(n: usize, with_derivs: bool) -> Self {
        let m = if with_derivs { n } else { 0 };
        Accum {
            value: 0.0,
            grad: vec![0.0; m],
            curv: vec![0.0; m],
        }
    }

    fn merge(mut self, other: Accum) -> Accum {
        self.value += other.value;
        for (a, b) in self.grad.iter_mut().zip(&other.grad) {
            *a += b;
        }
        for (a, b) in self.curv.iter_mut().zip(&other.curv) {
            *a += b;
        }
        self
    }
}

fn frame_terms(params: &ModelParams, c: &Compiled, acc: &mut Accum, with_derivs: bool) {
    let dims = params.dims();
    let layout = params.layout();
    let s = scores(params, c);
    let (nl, nr) = (s.unary[0].len(), s.unary[1].len());
    let (tk, [ta, tb]) = c.truth;
    let log_z = log_sum_exp(&s.values);
    acc.value += s.values[(tk * nl + ta) * nr + tb] - log_z;
    if !with_derivs {
        return;
    }

    // truth features
    let stride = layout.alpha_action_stride();
    acc.grad[tk * stride + s.alpha_off[0][ta] + s.alpha_off[1][tb]] += 1.0;
    let xi_row = layout.xi_row(tk);
    for (d, x) in c.evidence.phi_a.iter().enumerate() {
        acc.grad[xi_row + d] += x;
    }
    add_side_features(params, c, Side::Left, c.options[0][ta], 1.0, &mut acc.grad);
    add_side_features(params, c, Side::Right, c.options[1][tb], 1.0, &mut acc.grad);

    // expectations
    let mut pk = vec![0.0; dims.actions];
    let mut pl = vec![0.0; nl];
    let mut pr = vec![0.0; nr];
    for k in 0..dims.actions {
        for a in 0..nl {
            let base = k * stride + s.alpha_off[0][a];
            let row = (k * nl + a) * nr;
            for b in 0..nr {
                let p = (s.values[row + b] - log_z).exp();
                let idx = base + s.alpha_off[1][b];
                acc.grad[idx] -= p;
                acc.curv[idx] += p * (1.0 - p);
                pk[k] += p;
                pl[a] += p;
                pr[b] += p;
            }
        }
    }
    for (k, &p) in pk.iter().enumerate() {
        let row = layout.xi_row(k);
        for (d, x) in c.evidence.phi_a.iter().enumerate() {
            acc.grad[row + d] -= p * x;
            acc.curv[row + d] += p * (1.0 - p) * x * x;
        }
    }

    // Side features. The curvature uses per-option indicator variances
    // E[f²] − E[f]², computed on grouped marginals (presence for zeta and
    // gamma, grasp for eta, attribute for lambda); cross-side covariance is
    // ignored.
    for (side, marg) in [(Side::Left, &pl), (Side::Right, &pr)] {
        let options = &c.options[side.index()];
        for (o, &p) in options.iter().zip(marg.iter()) {
            add_side_features(params, c, side, *o, -p, &mut acc.grad);
        }
        if options.len() > 1 {
            side_curvature(params, c, side, marg, &mut acc.curv);
        }
    }
}

/// Diagonal variance of one side's features under its option marginals.
fn side_curvature(params: &ModelParams, c: &Compiled, side: Side, marg: &[f64], curv: &mut [f64]) {
    let dims = params.dims();
    let options = &c.options[side.index()];
    let present: f64 = 1.0 - marg[0];
    let mut by_grasp = vec![0.0; dims.grasps + 1];
    let mut by_attr = vec![0.0; dims.attributes + 1];
    for (&(g, m), &p) in options.iter().zip(marg) {
        by_grasp[g] += p;
        by_attr[m] += p;
    }
    let layout = params.layout();
    let hand = &c.evidence.side(side)[0];
    let var = |p: f64| p * (1.0 - p);
    for (d, x) in hand.phi_h.iter().enumerate() {
        curv[layout.zeta_index(side, d)] += var(present) * x * x;
    }
    for g in 1..=dims.grasps {
        let row = layout.eta_row(g);
        for (d, x) in hand.phi_g.iter().enumerate() {
            curv[row + d] += var(by_grasp[g]) * x * x;
        }
    }
    for (&(g, m), &p) in options.iter().zip(marg) {
        if g > 0 && m > 0 {
            curv[layout.beta_index(g, m)] += var(p);
        }
    }
    if let Some(obj) = hand.objects.first() {
        let reference = hand.reference_object().expect("checked at compile time");
        let q = crate::geometry::iou(&obj.bbox, &reference);
        curv[layout.gamma_index(side)] += var(present) * q * q;
        for m in 1..=dims.attributes {
            let row = layout.lambda_row(m);
            for (d, x) in obj.phi_o.iter().enumerate() {
                curv[row + d] += var(by_attr[m]) * x * x;
            }
        }
    }
}

fn data_terms(params: &ModelParams, frames: &[Compiled], with_derivs: bool) -> Accum {
    let n = params.values().len();
    let parts: Vec<Accum> = frames
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut acc = Accum::new(n, with_derivs);
            for c in chunk {
                frame_terms(params, c, &mut acc, with_derivs);
            }
            acc
        })
        .collect();
    parts
        .into_iter()
        .fold(Accum::new(n, with_derivs), Accum::merge)
}

/// Adds the L2 penalty and alpha smoothing prior to an accumulated data term.
fn add_priors(params: &ModelParams, config: &LearningConfig, acc: &mut Accum, with_derivs: bool) {
    let l2 = config.l2_strength;
    acc.value -= 0.5 * l2 * params.squared_norm();
    if with_derivs {
        for ((g, c), v) in acc
            .grad
            .iter_mut()
            .zip(acc.curv.iter_mut())
            .zip(params.values())
        {
            *g -= l2 * v;
            *c += l2;
        }
    }
    let w = config.alpha_smoothing;
    if w == 0.0 {
        return;
    }
    let stride = params.layout().alpha_action_stride();
    for k in 0..params.dims().actions {
        let slice = params.alpha_slice(k);
        let lse = log_sum_exp(slice);
        let mean = slice.iter().sum::<f64>() / stride as f64;
        acc.value += w * (mean - lse);
        if with_derivs {
            let base = k * stride;
            for (i, a) in slice.iter().enumerate() {
                let p = (a - lse).exp();
                acc.grad[base + i] += w * (1.0 / stride as f64 - p);
                acc.curv[base + i] += w * p * (1.0 - p);
            }
        }
    }
}

fn objective(
    params: &ModelParams,
    frames: &[Compiled],
    config: &LearningConfig,
    with_derivs: bool,
) -> Accum {
    let mut acc = data_terms(params, frames, with_derivs);
    add_priors(params, config, &mut acc, with_derivs);
    if with_derivs {
        for &b in &config.frozen {
            let r = params.layout().range(b);
            acc.grad[r.clone()].fill(0.0);
            acc.curv[r].fill(0.0);
        }
    }
    acc
}

/// Regularized conditional log-likelihood
/// `Σ_frames [Ψ(truth) − log Z] − (l2/2)‖θ‖²` plus the alpha smoothing term
/// `w · Σ_k [mean(alpha_k) − logsumexp(alpha_k)]`.
pub fn log_likelihood(
    params: &ModelParams,
    frames: &[TrainingFrame],
    config: &LearningConfig,
) -> Result<f64> {
    config.validate()?;
    let compiled = compile_all(frames, params.dims())?;
    Ok(objective(params, &compiled, config, false).value)
}

/// The objective of [`log_likelihood`] and its gradient over the flat
/// parameter vector. Frozen blocks get zero gradient.
pub fn gradient(
    params: &ModelParams,
    frames: &[TrainingFrame],
    config: &LearningConfig,
) -> Result<(f64, Vec<f64>)> {
    config.validate()?;
    let compiled = compile_all(frames, params.dims())?;
    let acc = objective(params, &compiled, config, true);
    Ok((acc.value, acc.grad))
}

/// Gradient ascent from zero, preconditioned by the diagonal curvature
/// estimate. A step that lowers the objective is rejected and the step size
/// halved.
pub fn fit(frames: &[TrainingFrame], dims: Dims, config: &LearningConfig) -> Result<FitResult> {
    config.validate()?;
    let compiled = compile_all(frames, dims)?;
    let mut params = ModelParams::zeros(dims);
    let mut acc = objective(&params, &compiled, config, true);
    if !acc.value.is_finite() {
        return Err(Error::NonFinite { epoch: 0 });
    }
    let mut trace = vec![acc.value];
    let mut step = config.step_size;
    let mut converged = false;
    let mut epochs = 0;
    const EPS: f64 = 1e-12;
    while epochs < config.max_epochs {
        epochs += 1;
        let mut next = params.clone();
        for ((v, g), c) in next.values_mut().iter_mut().zip(&acc.grad).zip(&acc.curv) {
            *v += step * g / (c + EPS);
        }
        next.clear(&config.frozen);
        let cand = objective(&next, &compiled, config, true);
        if !(cand.value >= acc.value) {
            step *= 0.5;
            if step < 1e-12 * config.step_size {
                converged = true;
                break;
            }
            continue;
        }
        let gain = (cand.value - acc.value) / acc.value.abs().max(1.0);
        params = next;
        acc = cand;
        trace.push(acc.value);
        if gain < config.convergence_tol {
            converged = true;
            break;
        }
    }
    if !acc.value.is_finite() {
        return Err(Error::NonFinite { epoch: epochs });
    }
    Ok(FitResult {
        params,
        objective: acc.value,
        trace,
        epochs,
        converged,
    })
}

/// Highest-scoring labels over the frame's learning label space (boxes
/// clamped to the annotated ones). Ties go to the lowest action, then to
/// earlier options.
pub fn argmax_labels(params: &ModelParams, frame: &TrainingFrame) -> Result<Labels> {
    let dims = params.dims();
    let c = compile(frame, dims, 0)?;
    let s = scores(params, &c);
    let (nl, nr) = (s.unary[0].len(), s.unary[1].len());
    let mut best = 0;
    for (i, v) in s.values.iter().enumerate() {
        if *v > s.values[best] {
            best = i;
        }
    }
    let (k, a, b) = (best / (nl * nr), (best / nr) % nl, best % nr);
    let (gl, ml) = c.options[0][a];
    let (gr, mr) = c.options[1][b];
    Ok(Labels {
        action: k,
        grasp: [gl, gr],
        attribute: [ml, mr],
    })
}
