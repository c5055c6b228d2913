use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{BoundingBox, OffsetVector};
use crate::labels::{Dims, Side};
use crate::potentials::params::HAND_SCORE_DIMS;

/// A candidate object box regressed from one hand candidate, with the
/// attribute classifier's scores on it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectCandidate {
    #[serde(rename = "box")]
    pub bbox: BoundingBox,
    pub phi_o: Vec<f64>,
}

/// A candidate hand box with detector/classifier outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HandCandidate {
    #[serde(rename = "box")]
    pub bbox: BoundingBox,
    /// Detection scores over {Background, LeftHand, RightHand}.
    pub phi_h: [f64; HAND_SCORE_DIMS],
    pub phi_g: Vec<f64>,
    /// Predicted hand→object offsets; required whenever an object is
    /// attached to this hand.
    #[serde(default)]
    pub offset: Option<OffsetVector>,
    /// Object candidates generated around the regressed reference box.
    #[serde(default)]
    pub objects: Vec<ObjectCandidate>,
}

impl HandCandidate {
    /// Object box predicted by the regression offsets, if any.
    pub fn reference_object(&self) -> Option<BoundingBox> {
        self.offset
            .as_ref()
            .map(|o| crate::geometry::apply_offsets(&self.bbox, o))
    }
}

/// Per-frame classifier and detector outputs that stand in for image
/// features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvidenceBundle {
    pub phi_a: Vec<f64>,
    #[serde(default)]
    pub left: Vec<HandCandidate>,
    #[serde(default)]
    pub right: Vec<HandCandidate>,
}

impl EvidenceBundle {
    pub fn new(phi_a: Vec<f64>) -> Self {
        EvidenceBundle {
            phi_a,
            left: Vec::new(),
            right: Vec::new(),
        }
    }

    pub fn side(&self, side: Side) -> &[HandCandidate] {
        match side {
            Side::Left => &self.left,
            Side::Right => &self.right,
        }
    }

    pub fn side_mut(&mut self, side: Side) -> &mut Vec<HandCandidate> {
        match side {
            Side::Left => &mut self.left,
            Side::Right => &mut self.right,
        }
    }

    /// Checks vector lengths against `dims`, phi_h ranges and box validity.
    /// Errors name the offending field as a dotted path.
    pub fn validate(&self, dims: Dims) -> Result<()> {
        let bad = |field: String, message: String| Error::Schema {
            line: 0,
            field,
            message,
        };
        check_vec("phi_a", &self.phi_a, dims.actions).map_err(|m| bad("phi_a".into(), m))?;
        for side in Side::BOTH {
            for (c, hand) in self.side(side).iter().enumerate() {
                let path = format!("{side}[{c}]");
                if !hand.bbox.is_valid() {
                    return Err(bad(format!("{path}.box"), "invalid box".into()));
                }
                if hand.phi_h.iter().any(|v| !(0.0..=1.0).contains(v)) {
                    return Err(bad(
                        format!("{path}.phi_h"),
                        "entries must lie in [0, 1]".into(),
                    ));
                }
                check_vec("phi_g", &hand.phi_g, dims.grasps)
                    .map_err(|m| bad(format!("{path}.phi_g"), m))?;
                if let Some(off) = &hand.offset {
                    if !off.is_valid() {
                        return Err(bad(format!("{path}.offset"), "invalid offset".into()));
                    }
                }
                if !hand.objects.is_empty() && hand.offset.is_none() {
                    return Err(bad(
                        format!("{path}.offset"),
                        "object candidates need a predicted offset".into(),
                    ));
                }
                for (o, obj) in hand.objects.iter().enumerate() {
                    if !obj.bbox.is_valid() {
                        return Err(bad(
                            format!("{path}.objects[{o}].box"),
                            "invalid box".into(),
                        ));
                    }
                    check_vec("phi_o", &obj.phi_o, dims.attributes)
                        .map_err(|m| bad(format!("{path}.objects[{o}].phi_o"), m))?;
                }
            }
        }
        Ok(())
    }

    fn find_hand(&self, side: Side, bbox: &BoundingBox) -> Option<usize> {
        self.side(side).iter().position(|h| h.bbox == *bbox)
    }

    /// Locates the evidence behind every box of `state`.
    pub fn resolve(&self, state: &SceneState) -> Result<Resolved> {
        let mut out = [None, None];
        for side in Side::BOTH {
            let s = state.side(side);
            let Some(hand_box) = &s.hand else {
                continue;
            };
            let hand = self.find_hand(side, hand_box).ok_or_else(|| {
                Error::MissingEvidence(format!("no {side} hand candidate matches {hand_box:?}"))
            })?;
            let object = match &s.object {
                None => None,
                Some(obj_box) => Some(self.find_object(side, hand, obj_box).ok_or_else(|| {
                    Error::MissingEvidence(format!(
                        "no {side} object candidate matches {obj_box:?}"
                    ))
                })?),
            };
            out[side.index()] = Some(ResolvedSide { hand, object });
        }
        Ok(Resolved(out))
    }

    /// Object candidates are searched under the selected hand first, then
    /// under the other hands of the same side.
    fn find_object(&self, side: Side, hand: usize, bbox: &BoundingBox) -> Option<ObjectRef> {
        let hands = self.side(side);
        if let Some(o) = hands[hand].objects.iter().position(|c| c.bbox == *bbox) {
            return Some(ObjectRef { hand, index: o });
        }
        hands.iter().enumerate().find_map(|(h, cand)| {
            cand.objects
                .iter()
                .position(|c| c.bbox == *bbox)
                .map(|index| ObjectRef { hand: h, index })
        })
    }

    pub fn object(&self, side: Side, r: ObjectRef) -> &ObjectCandidate {
        &self.side(side)[r.hand].objects[r.index]
    }
}

fn check_vec(name: &str, v: &[f64], expected: usize) -> std::result::Result<(), String> {
    if v.len() != expected {
        return Err(format!(
            "{name} has length {}, expected {expected}",
            v.len()
        ));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(format!("{name} contains a non-finite entry"));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ObjectRef {
    pub hand: usize,
    pub index: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ResolvedSide {
    pub hand: usize,
    pub object: Option<ObjectRef>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Resolved(pub [Option<ResolvedSide>; 2]);

impl Resolved {
    pub fn side(&self, side: Side) -> Option<ResolvedSide> {
        self.0[side.index()]
    }
}

/// Labels and boxes for one side. Grasp 0 means no hand, attribute 0 no
/// object.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SideState {
    pub grasp: usize,
    pub attribute: usize,
    #[serde(default)]
    pub hand: Option<BoundingBox>,
    #[serde(default)]
    pub object: Option<BoundingBox>,
}

impl SideState {
    pub const NULL: SideState = SideState {
        grasp: 0,
        attribute: 0,
        hand: None,
        object: None,
    };

    pub fn has_hand(&self) -> bool {
        self.grasp > 0
    }

    pub fn has_object(&self) -> bool {
        self.attribute > 0
    }
}

/// One joint assignment of the model's variables.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SceneState {
    pub action: usize,
    pub left: SideState,
    pub right: SideState,
}

impl SceneState {
    pub fn new(action: usize) -> Self {
        SceneState {
            action,
            left: SideState::NULL,
            right: SideState::NULL,
        }
    }

    pub fn side(&self, side: Side) -> &SideState {
        match side {
            Side::Left => &self.left,
            Side::Right => &self.right,
        }
    }

    pub fn side_mut(&mut self, side: Side) -> &mut SideState {
        match side {
            Side::Left => &mut self.left,
            Side::Right => &mut self.right,
        }
    }

    /// Label bounds plus the box/label coupling: grasp 0 ⇔ no hand box,
    /// attribute 0 ⇔ no object box, object ⇒ hand.
    pub fn validate(&self, dims: Dims) -> Result<()> {
        self.check_labels(dims)?;
        for side in Side::BOTH {
            let s = self.side(side);
            if s.has_hand() != s.hand.is_some() {
                return Err(Error::InconsistentState(format!(
                    "{side}: grasp {} with hand box {}",
                    s.grasp,
                    if s.hand.is_some() {
                        "present"
                    } else {
                        "absent"
                    }
                )));
            }
            if s.has_object() != s.object.is_some() {
                return Err(Error::InconsistentState(format!(
                    "{side}: attribute {} with object box {}",
                    s.attribute,
                    if s.object.is_some() {
                        "present"
                    } else {
                        "absent"
                    }
                )));
            }
            if s.object.is_some() && s.hand.is_none() {
                return Err(Error::InconsistentState(format!(
                    "{side}: object box without a hand box"
                )));
            }
            for b in [s.hand, s.object].into_iter().flatten() {
                if !b.is_valid() {
                    return Err(Error::InconsistentState(format!(
                        "{side}: invalid box {b:?}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Label-range check only.
    pub fn check_labels(&self, dims: Dims) -> Result<()> {
        if self.action >= dims.actions {
            return Err(Error::LabelOutOfRange(format!(
                "action {} ≥ {}",
                self.action, dims.actions
            )));
        }
        for side in Side::BOTH {
            let s = self.side(side);
            if s.grasp > dims.grasps {
                return Err(Error::LabelOutOfRange(format!(
                    "{side} grasp {} > {}",
                    s.grasp, dims.grasps
                )));
            }
            if s.attribute > dims.attributes {
                return Err(Error::LabelOutOfRange(format!(
                    "{side} attribute {} > {}",
                    s.attribute, dims.attributes
                )));
            }
        }
        Ok(())
    }
}
