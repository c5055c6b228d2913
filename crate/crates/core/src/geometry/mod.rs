//! Box arithmetic, hand→object offset regression and candidate generation.

mod blobs;

pub use blobs::{extract_blobs, extract_reference_hand_boxes, Blob, BlobConfig, ProbabilityMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Axis-aligned box in center-size form (pixels).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub cx: f64,
    pub cy: f64,
    pub w: f64,
    pub h: f64,
}

impl BoundingBox {
    pub fn new(cx: f64, cy: f64, w: f64, h: f64) -> Result<Self> {
        let b = BoundingBox { cx, cy, w, h };
        if !b.is_valid() {
            return Err(Error::InvalidConfig(format!(
                "bounding box needs finite coordinates and positive size, got {b:?}"
            )));
        }
        Ok(b)
    }

    pub fn is_valid(&self) -> bool {
        self.cx.is_finite()
            && self.cy.is_finite()
            && self.w.is_finite()
            && self.h.is_finite()
            && self.w > 0.0
            && self.h > 0.0
    }

    /// Builds a box from its top-left and bottom-right corners.
    pub fn from_corners(x0: f64, y0: f64, x1: f64, y1: f64) -> Result<Self> {
        BoundingBox::new((x0 + x1) / 2.0, (y0 + y1) / 2.0, x1 - x0, y1 - y0)
    }

    /// `(x0, y0, x1, y1)`
    pub fn corners(&self) -> (f64, f64, f64, f64) {
        let hw = self.w / 2.0;
        let hh = self.h / 2.0;
        (self.cx - hw, self.cy - hh, self.cx + hw, self.cy + hh)
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }

    pub fn intersection_area(&self, other: &BoundingBox) -> f64 {
        let (ax0, ay0, ax1, ay1) = self.corners();
        let (bx0, by0, bx1, by1) = other.corners();
        let iw = (ax1.min(bx1) - ax0.max(bx0)).max(0.0);
        let ih = (ay1.min(by1) - ay0.max(by0)).max(0.0);
        iw * ih
    }
}

/// Intersection over union, in `[0, 1]`; 0 for disjoint boxes.
pub fn iou(a: &BoundingBox, b: &BoundingBox) -> f64 {
    if a == b {
        return 1.0;
    }
    let inter = a.intersection_area(b);
    if inter <= 0.0 {
        return 0.0;
    }
    let union = a.area() + b.area() - inter;
    (inter / union).clamp(0.0, 1.0)
}

/// Scale-normalized transform from a hand box to the box of the object it
/// holds: center displacement in units of hand size, plus size ratios.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OffsetVector {
    pub nx: f64,
    pub ny: f64,
    pub nw: f64,
    pub nh: f64,
}

impl OffsetVector {
    pub const IDENTITY: OffsetVector = OffsetVector {
        nx: 0.0,
        ny: 0.0,
        nw: 1.0,
        nh: 1.0,
    };

    pub fn new(nx: f64, ny: f64, nw: f64, nh: f64) -> Result<Self> {
        let o = OffsetVector { nx, ny, nw, nh };
        if !o.is_valid() {
            return Err(Error::InvalidConfig(format!(
                "offset needs finite entries and positive size ratios, got {o:?}"
            )));
        }
        Ok(o)
    }

    pub fn is_valid(&self) -> bool {
        self.nx.is_finite()
            && self.ny.is_finite()
            && self.nw.is_finite()
            && self.nh.is_finite()
            && self.nw > 0.0
            && self.nh > 0.0
    }
}

/// Object box implied by a hand box and a predicted offset.
pub fn apply_offsets(hand: &BoundingBox, off: &OffsetVector) -> BoundingBox {
    BoundingBox {
        cx: hand.cx + off.nx * hand.w,
        cy: hand.cy + off.ny * hand.h,
        w: off.nw * hand.w,
        h: off.nh * hand.h,
    }
}

/// Offsets that map `hand` onto `object`; inverse of [`apply_offsets`].
pub fn compute_offsets(hand: &BoundingBox, object: &BoundingBox) -> OffsetVector {
    OffsetVector {
        nx: (object.cx - hand.cx) / hand.w,
        ny: (object.cy - hand.cy) / hand.h,
        nw: object.w / hand.w,
        nh: object.h / hand.h,
    }
}

/// Sliding-window grid around a reference box. Shifts are multiples of
/// `shift_step` times the reference width (horizontal) or height (vertical);
/// each scale multiplies width and height jointly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateGrid {
    pub shift_step: f64,
    pub shift_multipliers: Vec<f64>,
    pub scales: Vec<f64>,
}

impl Default for CandidateGrid {
    fn default() -> Self {
        CandidateGrid {
            shift_step: 1.0 / 8.0,
            shift_multipliers: vec![-1.0, 0.0, 1.0],
            scales: vec![0.75, 1.0, 1.25],
        }
    }
}

impl CandidateGrid {
    /// Only the reference box itself.
    pub fn identity() -> Self {
        CandidateGrid {
            shift_step: 1.0 / 8.0,
            shift_multipliers: vec![0.0],
            scales: vec![1.0],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.shift_step.is_finite() || self.shift_step < 0.0 {
            return Err(Error::InvalidConfig(
                "shift_step must be finite and ≥ 0".into(),
            ));
        }
        if self.shift_multipliers.is_empty() || self.scales.is_empty() {
            return Err(Error::InvalidConfig(
                "candidate grid needs at least one shift and one scale".into(),
            ));
        }
        if self.shift_multipliers.iter().any(|m| !m.is_finite()) {
            return Err(Error::InvalidConfig(
                "shift multipliers must be finite".into(),
            ));
        }
        if self.scales.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
            return Err(Error::InvalidConfig("scales must be positive".into()));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.shift_multipliers.len() * self.shift_multipliers.len() * self.scales.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Candidates ordered by horizontal shift, then vertical shift, then scale.
pub fn generate_candidates(reference: &BoundingBox, grid: &CandidateGrid) -> Vec<BoundingBox> {
    let dx = grid.shift_step * reference.w;
    let dy = grid.shift_step * reference.h;
    let mut out = Vec::with_capacity(grid.len());
    for &mx in &grid.shift_multipliers {
        for &my in &grid.shift_multipliers {
            for &s in &grid.scales {
                out.push(BoundingBox {
                    cx: reference.cx + mx * dx,
                    cy: reference.cy + my * dy,
                    w: s * reference.w,
                    h: s * reference.h,
                });
            }
        }
    }
    out
}
