//! The contextual potential and its six additive terms.
//!
//! ```text
//! Ψ = Ψ_FC(A,G,O) + Ψ_PC(G,O) + Ψ_SC(H,O) + Ψ_G(G,H) + Ψ_O(O) + Ψ_A(A)
//! ```
//!
//! Terms are evaluated in that fixed order, left side before right, so a
//! score is bit-reproducible for a given input.

mod params;
mod state;

pub(crate) use params::dot;
pub use params::{Block, Layout, ModelParams, HAND_SCORE_DIMS};
pub use state::{
    EvidenceBundle, HandCandidate, ObjectCandidate, ObjectRef, Resolved, ResolvedSide, SceneState,
    SideState,
};

use crate::error::{Error, Result};
use crate::geometry::{apply_offsets, iou};
use crate::labels::Side;

/// Functional context: a single lookup `alpha[A][G^l][G^r][O^l][O^r]`.
/// Null labels index the table like any other label.
pub fn score_functional(params: &ModelParams, state: &SceneState) -> Result<f64> {
    state.check_labels(params.dims())?;
    Ok(params.alpha(
        state.action,
        state.left.grasp,
        state.right.grasp,
        state.left.attribute,
        state.right.attribute,
    ))
}

/// Physical context: `Σ_s beta[G^s][O^s]` over sides where both labels are
/// non-null.
pub fn score_physical(params: &ModelParams, state: &SceneState) -> Result<f64> {
    state.check_labels(params.dims())?;
    let mut total = 0.0;
    for side in Side::BOTH {
        let s = state.side(side);
        if s.grasp > 0 && s.attribute > 0 {
            total += params.beta(s.grasp, s.attribute);
        }
    }
    Ok(total)
}

/// Spatial context: `Σ_s gamma_s · IoU(object box, offset-regressed box)`.
/// Sides without an object contribute 0.
pub fn score_spatial(
    params: &ModelParams,
    state: &SceneState,
    evidence: &EvidenceBundle,
) -> Result<f64> {
    let resolved = evidence.resolve(state)?;
    let mut total = 0.0;
    for side in Side::BOTH {
        let s = state.side(side);
        let (Some(object), Some(r)) = (s.object, resolved.side(side)) else {
            continue;
        };
        let hand = &evidence.side(side)[r.hand];
        let offset = hand.offset.ok_or_else(|| {
            Error::MissingEvidence(format!(
                "{side} object box present but its hand has no predicted offset"
            ))
        })?;
        total += params.gamma(side) * iou(&object, &apply_offsets(&hand.bbox, &offset));
    }
    Ok(total)
}

/// Grasp evidence: `Σ_s zeta_s·phi_h + eta[G^s]·phi_g` over sides with a hand.
pub fn score_grasp_evidence(
    params: &ModelParams,
    state: &SceneState,
    evidence: &EvidenceBundle,
) -> Result<f64> {
    state.check_labels(params.dims())?;
    let resolved = evidence.resolve(state)?;
    let mut total = 0.0;
    for side in Side::BOTH {
        let s = state.side(side);
        if s.grasp == 0 {
            continue;
        }
        let r = resolved.side(side).ok_or_else(|| {
            Error::MissingEvidence(format!("{side} grasp {} without a hand box", s.grasp))
        })?;
        let hand = &evidence.side(side)[r.hand];
        total += dot(params.zeta(side), &hand.phi_h) + dot(params.eta(s.grasp), &hand.phi_g);
    }
    Ok(total)
}

/// Attribute evidence: `Σ_s lambda[O^s]·phi_o` over sides with an object.
pub fn score_object_evidence(
    params: &ModelParams,
    state: &SceneState,
    evidence: &EvidenceBundle,
) -> Result<f64> {
    state.check_labels(params.dims())?;
    let resolved = evidence.resolve(state)?;
    let mut total = 0.0;
    for side in Side::BOTH {
        let s = state.side(side);
        if s.attribute == 0 {
            continue;
        }
        let obj = resolved.side(side).and_then(|r| r.object).ok_or_else(|| {
            Error::MissingEvidence(format!(
                "{side} attribute {} without an object box",
                s.attribute
            ))
        })?;
        total += dot(
            params.lambda(s.attribute),
            &evidence.object(side, obj).phi_o,
        );
    }
    Ok(total)
}

/// Action evidence: `xi[A]·phi_a`.
pub fn score_action_evidence(
    params: &ModelParams,
    state: &SceneState,
    evidence: &EvidenceBundle,
) -> Result<f64> {
    state.check_labels(params.dims())?;
    if evidence.phi_a.len() != params.dims().actions {
        return Err(Error::DimensionMismatch {
            what: "phi_a".into(),
            expected: params.dims().actions,
            found: evidence.phi_a.len(),
        });
    }
    Ok(dot(params.xi(state.action), &evidence.phi_a))
}

/// The six term values of one evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PotentialTerms {
    pub functional: f64,
    pub physical: f64,
    pub spatial: f64,
    pub grasp: f64,
    pub object: f64,
    pub action: f64,
}

impl PotentialTerms {
    pub fn evaluate(
        params: &ModelParams,
        state: &SceneState,
        evidence: &EvidenceBundle,
    ) -> Result<Self> {
        Ok(PotentialTerms {
            functional: score_functional(params, state)?,
            physical: score_physical(params, state)?,
            spatial: score_spatial(params, state, evidence)?,
            grasp: score_grasp_evidence(params, state, evidence)?,
            object: score_object_evidence(params, state, evidence)?,
            action: score_action_evidence(params, state, evidence)?,
        })
    }

    pub fn total(&self) -> f64 {
        self.functional + self.physical + self.spatial + self.grasp + self.object + self.action
    }
}

pub fn total_potential(
    params: &ModelParams,
    state: &SceneState,
    evidence: &EvidenceBundle,
) -> Result<f64> {
    Ok(PotentialTerms::evaluate(params, state, evidence)?.total())
}

/// Index-based choice for one side: which hand candidate (if any), its grasp
/// label, which of its object candidates (if any) and the attribute label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct SideChoice {
    pub hand: Option<usize>,
    pub grasp: usize,
    pub object: Option<usize>,
    pub attribute: usize,
}

impl SideChoice {
    pub const NULL: SideChoice = SideChoice {
        hand: None,
        grasp: 0,
        object: None,
        attribute: 0,
    };
}

/// A [`SceneState`] expressed as indices into an [`EvidenceBundle`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct Assignment {
    pub action: usize,
    pub sides: [SideChoice; 2],
}

impl Assignment {
    pub fn side(&self, side: Side) -> &SideChoice {
        &self.sides[side.index()]
    }

    pub fn side_mut(&mut self, side: Side) -> &mut SideChoice {
        &mut self.sides[side.index()]
    }

    pub fn to_state(&self, evidence: &EvidenceBundle) -> SceneState {
        let mut state = SceneState::new(self.action);
        for side in Side::BOTH {
            let c = self.side(side);
            let hands = evidence.side(side);
            *state.side_mut(side) = SideState {
                grasp: c.grasp,
                attribute: c.attribute,
                hand: c.hand.map(|h| hands[h].bbox),
                object: c.hand.zip(c.object).map(|(h, o)| hands[h].objects[o].bbox),
            };
        }
        state
    }
}

/// Everything in Ψ that depends on one side alone: Ψ_PC, Ψ_SC, Ψ_G and Ψ_O
/// restricted to `side`.
#[inline]
pub fn side_unary(
    params: &ModelParams,
    evidence: &EvidenceBundle,
    side: Side,
    choice: &SideChoice,
) -> f64 {
    let Some(h) = choice.hand else {
        return 0.0;
    };
    let hand = &evidence.side(side)[h];
    let mut score = params.beta(choice.grasp, choice.attribute);
    score += dot(params.zeta(side), &hand.phi_h);
    if choice.grasp > 0 {
        score += dot(params.eta(choice.grasp), &hand.phi_g);
    }
    if let Some(o) = choice.object {
        let obj = &hand.objects[o];
        if let Some(reference) = hand.reference_object() {
            score += params.gamma(side) * iou(&obj.bbox, &reference);
        }
        if choice.attribute > 0 {
            score += dot(params.lambda(choice.attribute), &obj.phi_o);
        }
    }
    score
}

/// Ψ for an index-based assignment. Agrees with [`total_potential`] up to
/// floating-point summation order.
pub fn assignment_potential(
    params: &ModelParams,
    evidence: &EvidenceBundle,
    a: &Assignment,
) -> f64 {
    let [l, r] = &a.sides;
    params.alpha(a.action, l.grasp, r.grasp, l.attribute, r.attribute)
        + dot(params.xi(a.action), &evidence.phi_a)
        + side_unary(params, evidence, Side::Left, l)
        + side_unary(params, evidence, Side::Right, r)
}
