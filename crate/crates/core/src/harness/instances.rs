//! Random small inference instances for oracle comparisons and property
//! tests.

use rand::Rng;

use crate::geometry::{apply_offsets, BoundingBox, OffsetVector};
use crate::labels::{Dims, Side};
use crate::learning::TrainingFrame;
use crate::potentials::{
    Assignment, Block, EvidenceBundle, HandCandidate, ModelParams, ObjectCandidate, SceneState,
    SideChoice, SideState,
};

/// Upper bounds for a random instance; actual sizes are drawn uniformly from
/// `1..=max`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InstanceSizes {
    pub max_actions: usize,
    pub max_grasps: usize,
    pub max_attributes: usize,
    /// Maximum hand candidates per side.
    pub max_candidates: usize,
    /// Maximum object candidates per hand.
    pub max_objects: usize,
    /// Probability that a side has no hand candidates at all.
    pub empty_side_prob: f64,
}

impl Default for InstanceSizes {
    fn default() -> Self {
        InstanceSizes {
            max_actions: 4,
            max_grasps: 5,
            max_attributes: 4,
            max_candidates: 5,
            max_objects: 5,
            empty_side_prob: 0.15,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Instance {
    pub params: ModelParams,
    pub evidence: EvidenceBundle,
}

impl Instance {
    pub fn dims(&self) -> Dims {
        self.params.dims()
    }

    /// A uniformly drawn feasible assignment (any side may be null).
    pub fn random_assignment<R: Rng>(&self, rng: &mut R) -> Assignment {
        let dims = self.dims();
        let mut a = Assignment {
            action: rng.random_range(0..dims.actions),
            sides: [SideChoice::NULL; 2],
        };
        for side in Side::BOTH {
            let hands = self.evidence.side(side);
            if hands.is_empty() || rng.random_bool(0.2) {
                continue;
            }
            let h = rng.random_range(0..hands.len());
            let mut c = SideChoice {
                hand: Some(h),
                grasp: rng.random_range(1..=dims.grasps),
                object: None,
                attribute: 0,
            };
            if !hands[h].objects.is_empty() {
                c.object = Some(rng.random_range(0..hands[h].objects.len()));
                c.attribute = rng.random_range(1..=dims.attributes);
            }
            *a.side_mut(side) = c;
        }
        a
    }
}

/// Draws random dims, evidence and parameters. All hand candidates pass a
/// 0.8 detection threshold on their own side. With `zero_context` the
/// alpha, beta and gamma blocks are zero.
pub fn random_instance<R: Rng>(rng: &mut R, sizes: &InstanceSizes, zero_context: bool) -> Instance {
    let dims = Dims {
        actions: rng.random_range(1..=sizes.max_actions),
        grasps: rng.random_range(1..=sizes.max_grasps),
        attributes: rng.random_range(1..=sizes.max_attributes),
    };
    let evidence = random_evidence(rng, dims, sizes);
    let mut params = ModelParams::zeros(dims);
    for v in params.values_mut() {
        *v = rng.random_range(0.0..1.0);
    }
    if zero_context {
        params.clear(&[Block::Alpha, Block::Beta, Block::Gamma]);
    }
    Instance { params, evidence }
}

pub fn random_evidence<R: Rng>(rng: &mut R, dims: Dims, sizes: &InstanceSizes) -> EvidenceBundle {
    let mut ev = EvidenceBundle::new(
        (0..dims.actions)
            .map(|_| rng.random_range(0.0..1.0))
            .collect(),
    );
    for side in Side::BOTH {
        if rng.random_bool(sizes.empty_side_prob) {
            continue;
        }
        let n_hands = rng.random_range(1..=sizes.max_candidates);
        let base_x = if side == Side::Left { 200.0 } else { 440.0 };
        for _ in 0..n_hands {
            let bbox = BoundingBox {
                cx: base_x + rng.random_range(-20.0..20.0),
                cy: 300.0 + rng.random_range(-20.0..20.0),
                w: rng.random_range(60.0..100.0),
                h: rng.random_range(60.0..100.0),
            };
            let side_score = rng.random_range(0.8..1.0);
            let rest = 1.0 - side_score;
            let bg = rng.random_range(0.0..=rest);
            let mut phi_h = [bg, 0.0, 0.0];
            phi_h[side.detection_index()] = side_score;
            phi_h[side.other().detection_index()] = rest - bg;
            let offset = OffsetVector {
                nx: rng.random_range(-0.5..0.5),
                ny: rng.random_range(-0.5..0.5),
                nw: rng.random_range(0.5..1.5),
                nh: rng.random_range(0.5..1.5),
            };
            let reference = apply_offsets(&bbox, &offset);
            let n_obj = rng.random_range(1..=sizes.max_objects);
            let objects = (0..n_obj)
                .map(|_| ObjectCandidate {
                    bbox: BoundingBox {
                        cx: reference.cx + rng.random_range(-0.3..0.3) * reference.w,
                        cy: reference.cy + rng.random_range(-0.3..0.3) * reference.h,
                        w: reference.w * rng.random_range(0.7..1.3),
                        h: reference.h * rng.random_range(0.7..1.3),
                    },
                    phi_o: (0..dims.attributes)
                        .map(|_| rng.random_range(0.0..1.0))
                        .collect(),
                })
                .collect();
            ev.side_mut(side).push(HandCandidate {
                bbox,
                phi_h,
                phi_g: (0..dims.grasps)
                    .map(|_| rng.random_range(0.0..1.0))
                    .collect(),
                offset: Some(offset),
                objects,
            });
        }
    }
    ev
}

/// Random annotated frame with evidence at the ground-truth boxes only. Each
/// side has a hand with probability 0.75 and, given a hand, an object with
/// probability 0.75.
pub fn random_training_frame<R: Rng>(rng: &mut R, dims: Dims) -> TrainingFrame {
    let mut evidence = EvidenceBundle::new(
        (0..dims.actions)
            .map(|_| rng.random_range(0.0..1.0))
            .collect(),
    );
    let mut truth = SceneState::new(rng.random_range(0..dims.actions));
    for side in Side::BOTH {
        if !rng.random_bool(0.75) {
            continue;
        }
        let hand = BoundingBox {
            cx: rng.random_range(100.0..500.0),
            cy: rng.random_range(100.0..400.0),
            w: rng.random_range(40.0..120.0),
            h: rng.random_range(40.0..120.0),
        };
        let offset = OffsetVector {
            nx: rng.random_range(-0.5..0.5),
            ny: rng.random_range(-0.5..0.5),
            nw: rng.random_range(0.5..1.5),
            nh: rng.random_range(0.5..1.5),
        };
        let mut state = SideState {
            grasp: rng.random_range(1..=dims.grasps),
            hand: Some(hand),
            ..SideState::NULL
        };
        let mut objects = Vec::new();
        if rng.random_bool(0.75) {
            let reference = apply_offsets(&hand, &offset);
            let bbox = BoundingBox {
                cx: reference.cx + rng.random_range(-0.2..0.2) * reference.w,
                cy: reference.cy + rng.random_range(-0.2..0.2) * reference.h,
                ..reference
            };
            objects.push(ObjectCandidate {
                bbox,
                phi_o: (0..dims.attributes)
                    .map(|_| rng.random_range(0.0..1.0))
                    .collect(),
            });
            state.attribute = rng.random_range(1..=dims.attributes);
            state.object = Some(bbox);
        }
        let phi_h = [(); 3].map(|_| rng.random_range(0.0..1.0));
        evidence.side_mut(side).push(HandCandidate {
            bbox: hand,
            phi_h,
            phi_g: (0..dims.grasps)
                .map(|_| rng.random_range(0.0..1.0))
                .collect(),
            offset: Some(offset),
            objects,
        });
        *truth.side_mut(side) = state;
    }
    TrainingFrame { evidence, truth }
}
