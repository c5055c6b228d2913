//! Brute-force MAP over every feasible assignment of candidate boxes and
//! labels. Used as the oracle for coordinate ascent.

use crate::error::{Error, Result};
use crate::labels::Side;
use crate::potentials::{
    assignment_potential, dot, side_unary, Assignment, EvidenceBundle, ModelParams, SceneState,
    SideChoice,
};

pub const DEFAULT_STATE_CAP: u128 = 10_000_000;

/// Every feasible choice for one side, null first, then ordered by
/// (hand, grasp, object, attribute).
fn side_options(evidence: &EvidenceBundle, params: &ModelParams, side: Side) -> Vec<SideChoice> {
    let dims = params.dims();
    let mut out = vec![SideChoice::NULL];
    for (h, hand) in evidence.side(side).iter().enumerate() {
        for grasp in 1..=dims.grasps {
            if hand.objects.is_empty() {
                out.push(SideChoice {
                    hand: Some(h),
                    grasp,
                    object: None,
                    attribute: 0,
                });
                continue;
            }
            for o in 0..hand.objects.len() {
                for attribute in 1..=dims.attributes {
                    out.push(SideChoice {
                        hand: Some(h),
                        grasp,
                        object: Some(o),
                        attribute,
                    });
                }
            }
        }
    }
    out
}

fn side_option_count(evidence: &EvidenceBundle, params: &ModelParams, side: Side) -> u128 {
    let dims = params.dims();
    1 + evidence
        .side(side)
        .iter()
        .map(|h| {
            let per_grasp = if h.objects.is_empty() {
                1
            } else {
                (h.objects.len() * dims.attributes) as u128
            };
            dims.grasps as u128 * per_grasp
        })
        .sum::<u128>()
}

/// Number of feasible joint assignments.
pub fn state_space_size(evidence: &EvidenceBundle, params: &ModelParams) -> u128 {
    params.dims().actions as u128
        * side_option_count(evidence, params, Side::Left)
        * side_option_count(evidence, params, Side::Right)
}

fn check(evidence: &EvidenceBundle, params: &ModelParams, cap: u128) -> Result<()> {
    evidence.validate(params.dims())?;
    let size = state_space_size(evidence, params);
    if size > cap {
        return Err(Error::StateSpaceTooLarge { size, cap });
    }
    Ok(())
}

/// Exact maximizer of the total potential. Because the potential couples the
/// two sides only through alpha (which sees labels, not boxes), the box
/// choice per label pair is maximized first on each side; the result equals
/// full enumeration. Ties resolve to the lowest action, then to label pairs
/// in (grasp, attribute) order with null first, then to the earliest boxes.
pub fn exhaustive_map(
    evidence: &EvidenceBundle,
    params: &ModelParams,
    cap: u128,
) -> Result<(SceneState, Assignment, f64)> {
    check(evidence, params, cap)?;
    let dims = params.dims();
    let (g1, o1) = (dims.grasps + 1, dims.attributes + 1);

    // best[side][(g, m)] = (choice, unary)
    let best_by_labels = |side: Side| {
        let mut best: Vec<Option<(SideChoice, f64)>> = vec![None; g1 * o1];
        for choice in side_options(evidence, params, side) {
            let slot = choice.grasp * o1 + choice.attribute;
            let u = side_unary(params, evidence, side, &choice);
            if best[slot].is_none_or(|(_, bu)| u > bu) {
                best[slot] = Some((choice, u));
            }
        }
        best
    };
    let left = best_by_labels(Side::Left);
    let right = best_by_labels(Side::Right);
    let left_pairs: Vec<(SideChoice, f64)> = left.into_iter().flatten().collect();
    let right_pairs: Vec<(SideChoice, f64)> = right.into_iter().flatten().collect();

    let mut best: Option<(Assignment, f64)> = None;
    for k in 0..dims.actions {
        let xi = dot(params.xi(k), &evidence.phi_a);
        for (lc, lu) in &left_pairs {
            for (rc, ru) in &right_pairs {
                let s =
                    params.alpha(k, lc.grasp, rc.grasp, lc.attribute, rc.attribute) + xi + lu + ru;
                if best.is_none_or(|(_, bs)| s > bs) {
                    best = Some((
                        Assignment {
                            action: k,
                            sides: [*lc, *rc],
                        },
                        s,
                    ));
                }
            }
        }
    }
    let (a, _) = best.expect("at least one action exists");
    let potential = assignment_potential(params, evidence, &a);
    Ok((a.to_state(evidence), a, potential))
}

/// Literal enumeration of every assignment. Exponentially slower than
/// [`exhaustive_map`]; kept for cross-checking it on tiny instances.
pub fn naive_exhaustive_map(
    evidence: &EvidenceBundle,
    params: &ModelParams,
    cap: u128,
) -> Result<(Assignment, f64)> {
    check(evidence, params, cap)?;
    let left = side_options(evidence, params, Side::Left);
    let right = side_options(evidence, params, Side::Right);
    let mut best: Option<(Assignment, f64)> = None;
    for action in 0..params.dims().actions {
        for l in &left {
            for r in &right {
                let a = Assignment {
                    action,
                    sides: [*l, *r],
                };
                let s = assignment_potential(params, evidence, &a);
                if best.is_none_or(|(_, bs)| s > bs) {
                    best = Some((a, s));
                }
            }
        }
    }
    Ok(best.expect("at least one action exists"))
}
