//! Parameter files: one JSON document with each block stored as a shape
//! plus row-major values.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::labels::{Dims, LabelSpace};
use crate::potentials::{Block, ModelParams, HAND_SCORE_DIMS};

use super::SCHEMA_VERSION;

const KIND: &str = "params";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Tensor {
    shape: Vec<usize>,
    values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ParamsDoc {
    schema_version: u32,
    kind: String,
    label_space_fingerprint: String,
    dims: Dims,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    mode: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    objective: Option<f64>,
    blocks: BTreeMap<String, Tensor>,
}

/// Optional provenance stored next to the parameters.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamsMeta {
    /// Ablation mode the parameters were fitted under.
    pub mode: Option<String>,
    /// Final training objective.
    pub objective: Option<f64>,
}

pub fn block_shape(block: Block, dims: Dims) -> Vec<usize> {
    let (a, g, o) = (dims.actions, dims.grasps, dims.attributes);
    match block {
        Block::Alpha => vec![a, g + 1, g + 1, o + 1, o + 1],
        Block::Beta => vec![g, o],
        Block::Gamma => vec![2],
        Block::Zeta => vec![2, HAND_SCORE_DIMS],
        Block::Eta => vec![g, g],
        Block::Lambda => vec![o, o],
        Block::Xi => vec![a, a],
    }
}

pub fn params_to_string(
    params: &ModelParams,
    space: &LabelSpace,
    meta: &ParamsMeta,
) -> Result<String> {
    params.check_dims(space.dims())?;
    let blocks = Block::ALL
        .iter()
        .map(|&b| {
            (
                b.name().to_string(),
                Tensor {
                    shape: block_shape(b, params.dims()),
                    values: params.block(b).to_vec(),
                },
            )
        })
        .collect();
    let doc = ParamsDoc {
        schema_version: SCHEMA_VERSION,
        kind: KIND.into(),
        label_space_fingerprint: space.fingerprint(),
        dims: params.dims(),
        mode: meta.mode.clone(),
        objective: meta.objective,
        blocks,
    };
    if params.values().iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidConfig(
            "parameters contain non-finite values".into(),
        ));
    }
    Ok(serde_json::to_string_pretty(&doc)?)
}

pub fn params_from_str(text: &str, space: &LabelSpace) -> Result<(ModelParams, ParamsMeta)> {
    let doc: ParamsDoc = serde_json::from_str(text)?;
    let bad = |field: &str, message: String| Error::Schema {
        line: 0,
        field: field.into(),
        message,
    };
    if doc.schema_version != SCHEMA_VERSION {
        return Err(bad(
            "schema_version",
            format!("unsupported version {}", doc.schema_version),
        ));
    }
    if doc.kind != KIND {
        return Err(bad("kind", format!("expected `{KIND}`")));
    }
    let expected = space.fingerprint();
    if doc.label_space_fingerprint != expected {
        return Err(Error::Fingerprint {
            expected,
            found: doc.label_space_fingerprint,
        });
    }
    let dims = space.dims();
    if doc.dims != dims {
        return Err(bad("dims", "do not match the label space".into()));
    }
    let mut params = ModelParams::zeros(dims);
    for b in Block::ALL {
        let t = doc
            .blocks
            .get(b.name())
            .ok_or_else(|| bad(&format!("blocks.{}", b.name()), "missing".into()))?;
        let shape = block_shape(b, dims);
        if t.shape != shape {
            return Err(bad(
                &format!("blocks.{}.shape", b.name()),
                format!("expected {shape:?}, found {:?}", t.shape),
            ));
        }
        let dst = params.block_mut(b);
        if t.values.len() != dst.len() {
            return Err(Error::DimensionMismatch {
                what: format!("blocks.{}.values", b.name()),
                expected: dst.len(),
                found: t.values.len(),
            });
        }
        if t.values.iter().any(|v| !v.is_finite()) {
            return Err(bad(
                &format!("blocks.{}.values", b.name()),
                "non-finite entry".into(),
            ));
        }
        dst.copy_from_slice(&t.values);
    }
    if let Some(extra) = doc
        .blocks
        .keys()
        .find(|k| Block::ALL.iter().all(|b| b.name() != *k))
    {
        return Err(bad("blocks", format!("unknown block `{extra}`")));
    }
    Ok((
        params,
        ParamsMeta {
            mode: doc.mode,
            objective: doc.objective,
        },
    ))
}

pub fn write_params(
    path: impl AsRef<Path>,
    params: &ModelParams,
    space: &LabelSpace,
    meta: &ParamsMeta,
) -> Result<()> {
    std::fs::write(path, params_to_string(params, space, meta)?)?;
    Ok(())
}

pub fn read_params(
    path: impl AsRef<Path>,
    space: &LabelSpace,
) -> Result<(ModelParams, ParamsMeta)> {
    let path = path.as_ref();
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    params_from_str(&std::fs::read_to_string(path)?, space)
}
