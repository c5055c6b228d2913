//! Binary greymap (P5) probability maps. A pixel value `v` maps to the
//! probability `v / maxval`.

use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::ProbabilityMap;

fn err(msg: impl Into<String>) -> Error {
    Error::Pgm(msg.into())
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    /// Skips whitespace and `#` comments.
    fn skip_space(&mut self) {
        while let Some(&b) = self.bytes.get(self.pos) {
            if b == b'#' {
                while let Some(&c) = self.bytes.get(self.pos) {
                    self.pos += 1;
                    if c == b'\n' || c == b'\r' {
                        break;
                    }
                }
            } else if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn number(&mut self, what: &str) -> Result<usize> {
        self.skip_space();
        let start = self.pos;
        while self.bytes.get(self.pos).is_some_and(u8::is_ascii_digit) {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(err(format!("expected {what}")));
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .expect("digits are ASCII")
            .parse()
            .map_err(|_| err(format!("{what} out of range")))
    }
}

pub fn parse_pgm(bytes: &[u8]) -> Result<ProbabilityMap> {
    if !bytes.starts_with(b"P5") {
        return Err(err("missing P5 magic"));
    }
    let mut c = Cursor { bytes, pos: 2 };
    let width = c.number("width")?;
    let height = c.number("height")?;
    let maxval = c.number("maxval")?;
    if width == 0 || height == 0 {
        return Err(err("dimensions must be positive"));
    }
    if !(1..=65535).contains(&maxval) {
        return Err(err(format!("maxval {maxval} outside 1..=65535")));
    }
    if !bytes.get(c.pos).is_some_and(u8::is_ascii_whitespace) {
        return Err(err("expected whitespace after maxval"));
    }
    c.pos += 1;
    let bpp = if maxval < 256 { 1 } else { 2 };
    let n = width
        .checked_mul(height)
        .and_then(|n| n.checked_mul(bpp))
        .ok_or_else(|| err("dimensions overflow"))?;
    let data = &bytes[c.pos..];
    if data.len() < n {
        return Err(err(format!(
            "expected {n} data bytes, found {}",
            data.len()
        )));
    }
    let max = maxval as f64;
    let mut values = Vec::with_capacity(width * height);
    for i in 0..width * height {
        let v = if bpp == 1 {
            data[i] as usize
        } else {
            u16::from_be_bytes([data[2 * i], data[2 * i + 1]]) as usize
        };
        if v > maxval {
            return Err(err(format!("pixel value {v} exceeds maxval {maxval}")));
        }
        values.push(v as f64 / max);
    }
    ProbabilityMap::new(width, height, values)
}

/// Encodes with the given `maxval`, rounding each probability to the nearest
/// level.
pub fn encode_pgm(map: &ProbabilityMap, maxval: u16) -> Result<Vec<u8>> {
    if maxval == 0 {
        return Err(err("maxval must be positive"));
    }
    let mut out = format!("P5\n{} {}\n{}\n", map.width(), map.height(), maxval).into_bytes();
    let max = maxval as f64;
    for &p in map.values() {
        let v = (p * max).round() as u16;
        if maxval < 256 {
            out.push(v as u8);
        } else {
            out.extend_from_slice(&v.to_be_bytes());
        }
    }
    Ok(out)
}

pub fn read_pgm(path: impl AsRef<Path>) -> Result<ProbabilityMap> {
    let path = path.as_ref();
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    parse_pgm(&std::fs::read(path)?)
}

pub fn write_pgm(path: impl AsRef<Path>, map: &ProbabilityMap, maxval: u16) -> Result<()> {
    std::fs::write(path, encode_pgm(map, maxval)?)?;
    Ok(())
}
