//! Joint recognition of manipulation actions, hand grasp types and object
//! attributes with a contextual conditional random field.
//!
//! The crate is organized bottom-up:
//!
//! - [`labels`]: label spaces and object shape classification.
//! - [`geometry`]: boxes, IoU, offset regression, candidate grids and
//!   hand-box extraction from probability maps.
//! - [`potentials`]: parameters, evidence, scene states and the potential.
//! - [`inference`]: initialization, coordinate ascent and the exhaustive oracle.
//! - [`learning`]: maximum-likelihood fitting and context export.
//! - [`io`]: on-disk formats.
//! - [`harness`]: synthetic data, evaluation and the oracle suite.

pub mod error;
pub mod geometry;
pub mod harness;
pub mod inference;
pub mod io;
pub mod labels;
pub mod learning;
pub mod potentials;

pub use error::{Error, Result};
pub use geometry::{apply_offsets, compute_offsets, iou, BoundingBox, OffsetVector};
pub use inference::{exhaustive_map, infer, InferenceConfig, InferenceResult};
pub use labels::{Dims, LabelSpace, Side};
pub use potentials::{total_potential, EvidenceBundle, ModelParams, SceneState};
