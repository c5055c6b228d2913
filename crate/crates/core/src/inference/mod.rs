//! MAP inference: initialization from the classifiers' argmaxes followed by
//! coordinate ascent over (grasp, hand box), (attribute, object box) and the
//! action label.
//!
//! Each update is an exact maximization of the total potential over its
//! block with every other variable fixed, so the potential trace never
//! decreases. A move is taken only if it strictly raises the potential, so
//! the current choice wins ties; otherwise ties go to the lowest class index,
//! then to the earliest candidate.

mod exhaustive;

pub use exhaustive::{exhaustive_map, naive_exhaustive_map, state_space_size, DEFAULT_STATE_CAP};

use crate::error::{Error, Result};
use crate::geometry::iou;
use crate::labels::Side;
use crate::potentials::{
    assignment_potential, dot, side_unary, Assignment, EvidenceBundle, ModelParams, SceneState,
    SideChoice,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UpdateStep {
    Grasp,
    Object,
    Action,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InferenceConfig {
    /// Hand candidates scoring below this on their side's detection entry are
    /// dropped before iterating.
    pub hand_detection_threshold: f64,
    pub max_iterations: usize,
    /// Stop as soon as a full sweep leaves every label and box unchanged.
    pub stop_on_convergence: bool,
    pub update_order: Vec<UpdateStep>,
}

impl Default for InferenceConfig {
    fn default() -> Self {
        InferenceConfig {
            hand_detection_threshold: 0.8,
            max_iterations: 10,
            stop_on_convergence: true,
            update_order: vec![UpdateStep::Grasp, UpdateStep::Object, UpdateStep::Action],
        }
    }
}

impl InferenceConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.hand_detection_threshold > 0.0 && self.hand_detection_threshold < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "threshold must lie in (0, 1), got {}",
                self.hand_detection_threshold
            )));
        }
        if self.max_iterations < 1 {
            return Err(Error::InvalidConfig("max_iterations must be ≥ 1".into()));
        }
        if self.update_order.is_empty() {
            return Err(Error::InvalidConfig("update_order is empty".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InferenceResult {
    pub state: SceneState,
    pub assignment: Assignment,
    pub potential: f64,
    pub iterations_used: usize,
    /// Potential after initialization followed by one entry per sweep.
    pub trace: Vec<f64>,
}

/// Inference over one frame. Holds the candidate hands that survived the
/// detection threshold.
#[derive(Debug, Clone)]
pub struct FrameInference<'a> {
    params: &'a ModelParams,
    evidence: &'a EvidenceBundle,
    config: &'a InferenceConfig,
    survivors: [Vec<usize>; 2],
}

impl<'a> FrameInference<'a> {
    pub fn new(
        evidence: &'a EvidenceBundle,
        params: &'a ModelParams,
        config: &'a InferenceConfig,
    ) -> Result<Self> {
        config.validate()?;
        evidence.validate(params.dims())?;
        let survivors = Side::BOTH.map(|side| {
            evidence
                .side(side)
                .iter()
                .enumerate()
                .filter(|(_, h)| h.phi_h[side.detection_index()] >= config.hand_detection_threshold)
                .map(|(i, _)| i)
                .collect()
        });
        Ok(FrameInference {
            params,
            evidence,
            config,
            survivors,
        })
    }

    pub fn survivors(&self, side: Side) -> &[usize] {
        &self.survivors[side.index()]
    }

    pub fn potential(&self, a: &Assignment) -> f64 {
        assignment_potential(self.params, self.evidence, a)
    }

    /// Argmax labels of the classifiers on the reference boxes.
    pub fn initialize(&self) -> Assignment {
        let mut a = Assignment {
            action: argmax(&self.evidence.phi_a),
            sides: [SideChoice::NULL; 2],
        };
        for side in Side::BOTH {
            let hands = self.evidence.side(side);
            let d = side.detection_index();
            let mut best: Option<usize> = None;
            for &c in self.survivors(side) {
                if best.is_none_or(|b| hands[c].phi_h[d] > hands[b].phi_h[d]) {
                    best = Some(c);
                }
            }
            let Some(h) = best else { continue };
            let hand = &hands[h];
            let mut choice = SideChoice {
                hand: Some(h),
                grasp: argmax(&hand.phi_g) + 1,
                object: None,
                attribute: 0,
            };
            if let Some(reference) = hand.reference_object() {
                let mut best_obj: Option<(usize, f64)> = None;
                for (o, obj) in hand.objects.iter().enumerate() {
                    let q = iou(&obj.bbox, &reference);
                    if best_obj.is_none_or(|(_, bq)| q > bq) {
                        best_obj = Some((o, q));
                    }
                }
                if let Some((o, _)) = best_obj {
                    choice.object = Some(o);
                    choice.attribute = argmax(&hand.objects[o].phi_o) + 1;
                }
            }
            *a.side_mut(side) = choice;
        }
        a
    }

    /// Best object box of hand `h` for a fixed attribute `m > 0`.
    fn best_object_for(&self, side: Side, h: usize, m: usize) -> Option<(usize, f64)> {
        let hand = &self.evidence.side(side)[h];
        let reference = hand.reference_object()?;
        let gamma = self.params.gamma(side);
        let lambda = self.params.lambda(m);
        let mut best: Option<(usize, f64)> = None;
        for (o, obj) in hand.objects.iter().enumerate() {
            let s = gamma * iou(&obj.bbox, &reference) + dot(lambda, &obj.phi_o);
            if best.is_none_or(|(_, bs)| s > bs) {
                best = Some((o, s));
            }
        }
        best
    }

    fn block_score(&self, a: &Assignment, side: Side, choice: &SideChoice) -> f64 {
        let (l, r) = match side {
            Side::Left => (choice, a.side(Side::Right)),
            Side::Right => (a.side(Side::Left), choice),
        };
        self.params
            .alpha(a.action, l.grasp, r.grasp, l.attribute, r.attribute)
            + side_unary(self.params, self.evidence, side, choice)
    }

    /// Accepts `candidate` only if it strictly raises the total potential.
    /// Checking the full sum guards against ulp-level reordering effects.
    fn commit(&self, a: &mut Assignment, candidate: Assignment) -> bool {
        if candidate == *a {
            return false;
        }
        if self.potential(&candidate) > self.potential(a) {
            *a = candidate;
            true
        } else {
            false
        }
    }

    /// Jointly re-selects grasp label and hand box on `side`. The object box
    /// follows the hand: for the current attribute, the best object candidate
    /// of each hand is taken. A null side stays null.
    pub fn update_grasp(&self, a: &mut Assignment, side: Side) -> bool {
        let current = *a.side(side);
        if current.hand.is_none() {
            return false;
        }
        let m = current.attribute;
        let hands = self.evidence.side(side);
        let mut best: Option<(SideChoice, f64)> = None;
        let per_hand: Vec<(usize, Option<usize>, usize)> = self
            .survivors(side)
            .iter()
            .map(|&h| {
                if m == 0 || hands[h].objects.is_empty() {
                    (h, None, 0)
                } else {
                    let o = self.best_object_for(side, h, m).map(|(o, _)| o);
                    (h, o, if o.is_some() { m } else { 0 })
                }
            })
            .collect();
        for i in 1..=self.params.dims().grasps {
            for &(h, object, attribute) in &per_hand {
                let choice = SideChoice {
                    hand: Some(h),
                    grasp: i,
                    object,
                    attribute,
                };
                let s = self.block_score(a, side, &choice);
                if best.is_none_or(|(_, bs)| s > bs) {
                    best = Some((choice, s));
                }
            }
        }
        let Some((choice, _)) = best else {
            return false;
        };
        let mut candidate = *a;
        *candidate.side_mut(side) = choice;
        self.commit(a, candidate)
    }

    /// Jointly re-selects attribute label and object box on `side` among the
    /// object candidates of the current hand.
    pub fn update_object(&self, a: &mut Assignment, side: Side) -> bool {
        let current = *a.side(side);
        let Some(h) = current.hand else {
            return false;
        };
        let hand = &self.evidence.side(side)[h];
        if hand.objects.is_empty() {
            return false;
        }
        let mut best: Option<(SideChoice, f64)> = None;
        for m in 1..=self.params.dims().attributes {
            for o in 0..hand.objects.len() {
                let choice = SideChoice {
                    object: Some(o),
                    attribute: m,
                    ..current
                };
                let s = self.block_score(a, side, &choice);
                if best.is_none_or(|(_, bs)| s > bs) {
                    best = Some((choice, s));
                }
            }
        }
        let Some((choice, _)) = best else {
            return false;
        };
        let mut candidate = *a;
        *candidate.side_mut(side) = choice;
        self.commit(a, candidate)
    }

    /// Enumerates all actions with labels and boxes fixed.
    pub fn update_action(&self, a: &mut Assignment) -> bool {
        let [l, r] = a.sides;
        let mut best = (0, f64::NEG_INFINITY);
        for k in 0..self.params.dims().actions {
            let s = self
                .params
                .alpha(k, l.grasp, r.grasp, l.attribute, r.attribute)
                + dot(self.params.xi(k), &self.evidence.phi_a);
            if s > best.1 {
                best = (k, s);
            }
        }
        let candidate = Assignment {
            action: best.0,
            ..*a
        };
        self.commit(a, candidate)
    }

    /// One full sweep in the configured order. Returns whether anything
    /// changed.
    pub fn sweep(&self, a: &mut Assignment) -> bool {
        let mut changed = false;
        for step in &self.config.update_order {
            match step {
                UpdateStep::Grasp => {
                    for side in Side::BOTH {
                        changed |= self.update_grasp(a, side);
                    }
                }
                UpdateStep::Object => {
                    for side in Side::BOTH {
                        changed |= self.update_object(a, side);
                    }
                }
                UpdateStep::Action => changed |= self.update_action(a),
            }
        }
        changed
    }

    pub fn run(&self) -> InferenceResult {
        let mut a = self.initialize();
        let mut trace = vec![self.potential(&a)];
        let mut iterations_used = 0;
        for _ in 0..self.config.max_iterations {
            iterations_used += 1;
            let changed = self.sweep(&mut a);
            trace.push(self.potential(&a));
            if !changed && self.config.stop_on_convergence {
                break;
            }
        }
        InferenceResult {
            state: a.to_state(self.evidence),
            assignment: a,
            potential: self.potential(&a),
            iterations_used,
            trace,
        }
    }
}

/// First index of the maximum.
pub(crate) fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x > v[best] {
            best = i;
        }
    }
    best
}

/// Initial state from the classifiers' argmaxes on reference boxes.
pub fn initialize(
    evidence: &EvidenceBundle,
    params: &ModelParams,
    config: &InferenceConfig,
) -> Result<SceneState> {
    let fi = FrameInference::new(evidence, params, config)?;
    Ok(fi.initialize().to_state(evidence))
}

/// Initialization followed by coordinate ascent until convergence or
/// `max_iterations` sweeps.
pub fn infer(
    evidence: &EvidenceBundle,
    params: &ModelParams,
    config: &InferenceConfig,
) -> Result<InferenceResult> {
    Ok(FrameInference::new(evidence, params, config)?.run())
}

fn to_assignment(fi: &FrameInference<'_>, state: &SceneState) -> Result<Assignment> {
    state.validate(fi.params.dims())?;
    let resolved = fi.evidence.resolve(state)?;
    let mut a = Assignment {
        action: state.action,
        sides: [SideChoice::NULL; 2],
    };
    for side in Side::BOTH {
        let s = state.side(side);
        if let Some(r) = resolved.side(side) {
            if let Some(o) = r.object {
                if o.hand != r.hand {
                    return Err(Error::InconsistentState(format!(
                        "{side} object box belongs to a different hand candidate"
                    )));
                }
            }
            *a.side_mut(side) = SideChoice {
                hand: Some(r.hand),
                grasp: s.grasp,
                object: r.object.map(|o| o.index),
                attribute: s.attribute,
            };
        }
    }
    Ok(a)
}

/// Grasp/hand-box update on a [`SceneState`] using the default detection
/// threshold for the candidate set.
pub fn update_grasp(
    state: &SceneState,
    evidence: &EvidenceBundle,
    params: &ModelParams,
    side: Side,
) -> Result<SceneState> {
    let config = InferenceConfig::default();
    let fi = FrameInference::new(evidence, params, &config)?;
    let mut a = to_assignment(&fi, state)?;
    fi.update_grasp(&mut a, side);
    Ok(a.to_state(evidence))
}

pub fn update_object(
    state: &SceneState,
    evidence: &EvidenceBundle,
    params: &ModelParams,
    side: Side,
) -> Result<SceneState> {
    let config = InferenceConfig::default();
    let fi = FrameInference::new(evidence, params, &config)?;
    let mut a = to_assignment(&fi, state)?;
    fi.update_object(&mut a, side);
    Ok(a.to_state(evidence))
}

pub fn update_action(
    state: &SceneState,
    evidence: &EvidenceBundle,
    params: &ModelParams,
) -> Result<SceneState> {
    let config = InferenceConfig::default();
    let fi = FrameInference::new(evidence, params, &config)?;
    let mut a = to_assignment(&fi, state)?;
    fi.update_action(&mut a);
    Ok(a.to_state(evidence))
}
