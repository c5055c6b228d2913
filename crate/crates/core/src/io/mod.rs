//! On-disk formats. Every format carries `schema_version`; files tied to a
//! taxonomy carry the label-space fingerprint. Floats are written as
//! shortest round-trip decimals, so write → read is bit-exact.

mod frames;
mod manifest;
mod params;
mod pgm;
mod results;

pub use frames::{parse_frames, read_frames, write_frames, FrameReader, FrameRecord, FrameWriter};
pub use manifest::{Dataset, Manifest, Splits};
pub use params::{
    block_shape, params_from_str, params_to_string, read_params, write_params, ParamsMeta,
};
pub use pgm::{encode_pgm, parse_pgm, read_pgm, write_pgm};
pub use results::{
    read_accuracy_csv, write_accuracy_csv, write_confusion_csv, write_context_tables, write_json,
    Confusion,
};

pub const SCHEMA_VERSION: u32 = 1;

#[cfg(test)]
mod tests;
