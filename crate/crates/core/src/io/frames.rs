//! JSON-lines frame files.
//!
//! Line 1 is a header naming the label space; every following non-blank line
//! is one [`FrameRecord`]:
//!
//! ```text
//! {"schema_version":1,"kind":"frames","label_space_fingerprint":"…","dims":{"actions":3,"grasps":4,"attributes":3}}
//! {"frame_id":"f0","phi_a":[…],"left":[{"box":{…},"phi_h":[…],"phi_g":[…],"offset":{…},"objects":[…]}],"right":[],"truth":{…}}
//! ```

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::labels::{Dims, LabelSpace};
use crate::potentials::{EvidenceBundle, SceneState};

use super::SCHEMA_VERSION;

const KIND: &str = "frames";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    schema_version: u32,
    kind: String,
    label_space_fingerprint: String,
    dims: Dims,
}

/// One frame of evidence with optional ground truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameRecord {
    pub frame_id: String,
    #[serde(flatten)]
    pub evidence: EvidenceBundle,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truth: Option<SceneState>,
}

impl FrameRecord {
    /// Evidence shape checks plus, when present, truth consistency: labels in
    /// range and boxes coupled to labels. Truth boxes need not be among the
    /// candidates; learning checks that separately.
    pub fn validate(&self, dims: Dims) -> Result<()> {
        if self.frame_id.is_empty() {
            return Err(schema(0, "frame_id", "must not be empty"));
        }
        self.evidence.validate(dims)?;
        if let Some(t) = &self.truth {
            t.validate(dims)
                .map_err(|e| schema(0, "truth", &e.to_string()))?;
        }
        Ok(())
    }
}

fn schema(line: usize, field: &str, message: &str) -> Error {
    Error::Schema {
        line,
        field: field.into(),
        message: message.into(),
    }
}

fn at_line(e: Error, line: usize) -> Error {
    match e {
        Error::Schema { field, message, .. } => Error::Schema {
            line,
            field,
            message,
        },
        other => other,
    }
}

/// Streaming reader over a frames file. Yields records in file order.
pub struct FrameReader<R> {
    lines: std::io::Lines<R>,
    line_no: usize,
    dims: Dims,
}

impl<R: BufRead> FrameReader<R> {
    /// Reads and checks the header against `space`. An input with no
    /// non-blank lines is an empty stream.
    pub fn new(reader: R, space: &LabelSpace) -> Result<Self> {
        let mut lines = reader.lines();
        let mut line_no = 0;
        let dims = space.dims();
        loop {
            let Some(line) = lines.next() else {
                return Ok(FrameReader {
                    lines,
                    line_no,
                    dims,
                });
            };
            let line = line?;
            line_no += 1;
            if line.trim().is_empty() {
                continue;
            }
            let header: Header = serde_json::from_str(&line)
                .map_err(|e| schema(line_no, "header", &e.to_string()))?;
            if header.schema_version != SCHEMA_VERSION {
                return Err(schema(
                    line_no,
                    "schema_version",
                    &format!("unsupported version {}", header.schema_version),
                ));
            }
            if header.kind != KIND {
                return Err(schema(line_no, "kind", &format!("expected `{KIND}`")));
            }
            let expected = space.fingerprint();
            if header.label_space_fingerprint != expected {
                return Err(Error::Fingerprint {
                    expected,
                    found: header.label_space_fingerprint,
                });
            }
            if header.dims != dims {
                return Err(schema(line_no, "dims", "do not match the label space"));
            }
            return Ok(FrameReader {
                lines,
                line_no,
                dims,
            });
        }
    }
}

impl FrameReader<BufReader<File>> {
    pub fn open(path: impl AsRef<Path>, space: &LabelSpace) -> Result<Self> {
        let path = path.as_ref();
        if !path.exists() {
            return Err(Error::MissingFile(path.to_path_buf()));
        }
        FrameReader::new(BufReader::new(File::open(path)?), space)
    }
}

impl<R: BufRead> Iterator for FrameReader<R> {
    type Item = Result<FrameRecord>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            let line = match self.lines.next()? {
                Ok(l) => l,
                Err(e) => return Some(Err(e.into())),
            };
            self.line_no += 1;
            if line.trim().is_empty() {
                continue;
            }
            let n = self.line_no;
            let record: FrameRecord = match serde_json::from_str(&line) {
                Ok(r) => r,
                Err(e) => return Some(Err(schema(n, "record", &e.to_string()))),
            };
            return Some(
                record
                    .validate(self.dims)
                    .map(|_| record)
                    .map_err(|e| at_line(e, n)),
            );
        }
    }
}

/// Reads every record of a file.
pub fn read_frames(path: impl AsRef<Path>, space: &LabelSpace) -> Result<Vec<FrameRecord>> {
    FrameReader::open(path, space)?.collect()
}

/// Parses frames from an in-memory buffer.
pub fn parse_frames(bytes: &[u8], space: &LabelSpace) -> Result<Vec<FrameRecord>> {
    FrameReader::new(bytes, space)?.collect()
}

/// Writes the header, then one line per record.
pub struct FrameWriter<W: Write> {
    out: W,
    dims: Dims,
}

impl<W: Write> FrameWriter<W> {
    pub fn new(mut out: W, space: &LabelSpace) -> Result<Self> {
        let header = Header {
            schema_version: SCHEMA_VERSION,
            kind: KIND.into(),
            label_space_fingerprint: space.fingerprint(),
            dims: space.dims(),
        };
        serde_json::to_writer(&mut out, &header)?;
        out.write_all(b"\n")?;
        Ok(FrameWriter {
            out,
            dims: space.dims(),
        })
    }

    /// Validates and appends one record.
    pub fn write(&mut self, record: &FrameRecord) -> Result<()> {
        record.validate(self.dims)?;
        serde_json::to_writer(&mut self.out, record)?;
        self.out.write_all(b"\n")?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<W> {
        self.out.flush()?;
        Ok(self.out)
    }
}

pub fn write_frames<'a>(
    path: impl AsRef<Path>,
    space: &LabelSpace,
    records: impl IntoIterator<Item = &'a FrameRecord>,
) -> Result<()> {
    let mut w = FrameWriter::new(BufWriter::new(File::create(path)?), space)?;
    for r in records {
        w.write(r)?;
    }
    w.finish()?;
    Ok(())
}
