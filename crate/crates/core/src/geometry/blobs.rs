//! Hand-blob extraction from a hand probability map.
//!
//! Threshold → 8-connected components → area filter → second-moment ellipse
//! → forearm truncation along the major axis → axis-aligned box.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::geometry::BoundingBox;

/// Row-major grid of per-pixel hand probabilities in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityMap {
    width: usize,
    height: usize,
    values: Vec<f64>,
}

impl ProbabilityMap {
    pub fn new(width: usize, height: usize, values: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Pgm("map dimensions must be positive".into()));
        }
        if values.len() != width * height {
            return Err(Error::DimensionMismatch {
                what: "probability map values".into(),
                expected: width * height,
                found: values.len(),
            });
        }
        if let Some(v) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::Pgm(format!("probability {v} outside [0, 1]")));
        }
        Ok(ProbabilityMap {
            width,
            height,
            values,
        })
    }

    pub fn zeros(width: usize, height: usize) -> Result<Self> {
        ProbabilityMap::new(width, height, vec![0.0; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.values[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, v: f64) {
        assert!((0.0..=1.0).contains(&v), "probability {v} outside [0, 1]");
        self.values[y * self.width + x] = v;
    }
}

/// Parameters of the blob stage.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlobConfig {
    /// Pixels with probability ≥ threshold are foreground.
    pub threshold: f64,
    /// Accepted blob area range as a fraction of the image area.
    pub min_area_frac: f64,
    pub max_area_frac: f64,
    /// Retained major-axis length as a multiple of the minor-axis length.
    pub keep_ratio: f64,
}

impl Default for BlobConfig {
    fn default() -> Self {
        BlobConfig {
            threshold: 0.5,
            min_area_frac: 0.005,
            max_area_frac: 0.30,
            keep_ratio: 1.5,
        }
    }
}

impl BlobConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "threshold must lie in (0, 1), got {}",
                self.threshold
            )));
        }
        if !(0.0..=1.0).contains(&self.min_area_frac)
            || !(0.0..=1.0).contains(&self.max_area_frac)
            || self.min_area_frac > self.max_area_frac
        {
            return Err(Error::InvalidConfig(format!(
                "area fractions must satisfy 0 ≤ min ≤ max ≤ 1, got [{}, {}]",
                self.min_area_frac, self.max_area_frac
            )));
        }
        if !(self.keep_ratio.is_finite() && self.keep_ratio > 0.0) {
            return Err(Error::InvalidConfig("keep_ratio must be positive".into()));
        }
        Ok(())
    }
}

/// One surviving blob with its fitted ellipse and truncated box.
#[derive(Debug, Clone, PartialEq)]
pub struct Blob {
    pub area: usize,
    /// Ellipse center in continuous pixel coordinates.
    pub center: (f64, f64),
    /// Full axis lengths.
    pub major_length: f64,
    pub minor_length: f64,
    /// Angle of the major axis, radians from +x.
    pub angle: f64,
    pub reference_box: BoundingBox,
}

/// Reference hand boxes for every accepted blob, in raster order of each
/// blob's first pixel. An empty mask yields an empty list.
pub fn extract_reference_hand_boxes(
    map: &ProbabilityMap,
    threshold: f64,
    min_area_frac: f64,
    max_area_frac: f64,
) -> Result<Vec<BoundingBox>> {
    let cfg = BlobConfig {
        threshold,
        min_area_frac,
        max_area_frac,
        ..BlobConfig::default()
    };
    Ok(extract_blobs(map, &cfg)?
        .into_iter()
        .map(|b| b.reference_box)
        .collect())
}

pub fn extract_blobs(map: &ProbabilityMap, cfg: &BlobConfig) -> Result<Vec<Blob>> {
    cfg.validate()?;
    let (w, h) = (map.width, map.height);
    let image_area = (w * h) as f64;
    let mask: Vec<bool> = map.values.iter().map(|&v| v >= cfg.threshold).collect();

    let mut blobs = Vec::new();
    for component in connected_components(&mask, w, h) {
        let frac = component.len() as f64 / image_area;
        if frac < cfg.min_area_frac || frac > cfg.max_area_frac {
            continue;
        }
        if let Some(blob) = fit_blob(&component, w, h, cfg.keep_ratio) {
            blobs.push(blob);
        }
    }
    Ok(blobs)
}

/// 8-connected components as lists of `(x, y)` pixels.
fn connected_components(mask: &[bool], w: usize, h: usize) -> Vec<Vec<(usize, usize)>> {
    let mut seen = vec![false; mask.len()];
    let mut out = Vec::new();
    let mut queue = VecDeque::new();
    for start in 0..mask.len() {
        if !mask[start] || seen[start] {
            continue;
        }
        seen[start] = true;
        queue.push_back(start);
        let mut pixels = Vec::new();
        while let Some(idx) = queue.pop_front() {
            let (x, y) = (idx % w, idx / w);
            pixels.push((x, y));
            for dy in -1i64..=1 {
                for dx in -1i64..=1 {
                    if dx == 0 && dy == 0 {
                        continue;
                    }
                    let nx = x as i64 + dx;
                    let ny = y as i64 + dy;
                    if nx < 0 || ny < 0 || nx >= w as i64 || ny >= h as i64 {
                        continue;
                    }
                    let n = ny as usize * w + nx as usize;
                    if mask[n] && !seen[n] {
                        seen[n] = true;
                        queue.push_back(n);
                    }
                }
            }
        }
        out.push(pixels);
    }
    out
}

#[derive(Clone, Copy)]
enum Border {
    Top,
    Bottom,
    Left,
    Right,
}

fn fit_blob(pixels: &[(usize, usize)], w: usize, h: usize, keep_ratio: f64) -> Option<Blob> {
    let n = pixels.len() as f64;
    let centers = || {
        pixels
            .iter()
            .map(|&(x, y)| (x as f64 + 0.5, y as f64 + 0.5))
    };
    let (sx, sy) = centers().fold((0.0, 0.0), |(a, b), (x, y)| (a + x, b + y));
    let (mx, my) = (sx / n, sy / n);
    let (mut cxx, mut cxy, mut cyy) = (0.0, 0.0, 0.0);
    for (x, y) in centers() {
        let (dx, dy) = (x - mx, y - my);
        cxx += dx * dx;
        cxy += dx * dy;
        cyy += dy * dy;
    }
    // pixel footprint adds 1/12 per axis to the point-sample variance
    cxx = cxx / n + 1.0 / 12.0;
    cyy = cyy / n + 1.0 / 12.0;
    cxy /= n;

    let mean = (cxx + cyy) / 2.0;
    let disc = (((cxx - cyy) / 2.0).powi(2) + cxy * cxy).sqrt();
    let (l1, l2) = (mean + disc, (mean - disc).max(0.0));
    let angle = 0.5 * (2.0 * cxy).atan2(cxx - cyy);
    // uniform filled ellipse: variance along a semi-axis r is r²/4
    let major_length = 4.0 * l1.sqrt();
    let minor_length = 4.0 * l2.sqrt();
    let (ux, uy) = (angle.cos(), angle.sin());

    let proj = |(x, y): (f64, f64)| (x - mx) * ux + (y - my) * uy;
    let (mut s_min, mut s_max) = (f64::INFINITY, f64::NEG_INFINITY);
    for p in centers() {
        let s = proj(p);
        s_min = s_min.min(s);
        s_max = s_max.max(s);
    }
    // half a pixel beyond the extreme pixel centers approximates the blob edge
    let (s_min, s_max) = (s_min - 0.5, s_max + 0.5);
    let end_plus = (mx + s_max * ux, my + s_max * uy);
    let end_minus = (mx + s_min * ux, my + s_min * uy);

    let touched = touched_borders(pixels, w, h);
    let keep_plus = if touched.is_empty() {
        // farther from the bottom edge means smaller y
        end_plus.1 <= end_minus.1
    } else {
        let dist = |p: (f64, f64)| {
            touched
                .iter()
                .map(|b| match b {
                    Border::Top => p.1,
                    Border::Bottom => h as f64 - p.1,
                    Border::Left => p.0,
                    Border::Right => w as f64 - p.0,
                })
                .fold(f64::INFINITY, f64::min)
        };
        dist(end_plus) >= dist(end_minus)
    };

    let keep_len = keep_ratio * minor_length;
    let kept: Vec<(usize, usize)> = if s_max - s_min <= keep_len {
        pixels.to_vec()
    } else {
        pixels
            .iter()
            .copied()
            .filter(|&(x, y)| {
                let s = proj((x as f64 + 0.5, y as f64 + 0.5));
                if keep_plus {
                    s >= s_max - keep_len
                } else {
                    s <= s_min + keep_len
                }
            })
            .collect()
    };
    if kept.is_empty() {
        return None;
    }
    let x0 = kept.iter().map(|p| p.0).min()? as f64;
    let x1 = kept.iter().map(|p| p.0).max()? as f64 + 1.0;
    let y0 = kept.iter().map(|p| p.1).min()? as f64;
    let y1 = kept.iter().map(|p| p.1).max()? as f64 + 1.0;
    Some(Blob {
        area: pixels.len(),
        center: (mx, my),
        major_length,
        minor_length,
        angle,
        reference_box: BoundingBox::from_corners(x0, y0, x1, y1).ok()?,
    })
}

fn touched_borders(pixels: &[(usize, usize)], w: usize, h: usize) -> Vec<Border> {
    let mut out = Vec::new();
    if pixels.iter().any(|p| p.1 + 1 == h) {
        out.push(Border::Bottom);
    }
    if pixels.iter().any(|p| p.0 == 0) {
        out.push(Border::Left);
    }
    if pixels.iter().any(|p| p.0 + 1 == w) {
        out.push(Border::Right);
    }
    if pixels.iter().any(|p| p.1 == 0) {
        out.push(Border::Top);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Rasterizes a filled ellipse (pixel centers inside the curve).
    fn raster_ellipse(
        map: &mut ProbabilityMap,
        cx: f64,
        cy: f64,
        semi_major: f64,
        semi_minor: f64,
        angle: f64,
    ) {
        let (c, s) = (angle.cos(), angle.sin());
        for y in 0..map.height() {
            for x in 0..map.width() {
                let dx = x as f64 + 0.5 - cx;
                let dy = y as f64 + 0.5 - cy;
                let u = dx * c + dy * s;
                let v = -dx * s + dy * c;
                if (u / semi_major).powi(2) + (v / semi_minor).powi(2) <= 1.0 {
                    map.set(x, y, 1.0);
                }
            }
        }
    }

    #[test]
    fn zero_map_is_empty() {
        let map = ProbabilityMap::zeros(64, 48).unwrap();
        assert!(extract_reference_hand_boxes(&map, 0.5, 0.0, 1.0)
            .unwrap()
            .is_empty());
    }

    #[test]
    fn vertical_ellipse_keeps_top_part() {
        // major:minor = 3:1, close to the bottom edge
        let mut map = ProbabilityMap::zeros(200, 200).unwrap();
        let (cx, cy, a, b) = (100.0, 130.0, 60.0, 20.0);
        raster_ellipse(&mut map, cx, cy, a, b, std::f64::consts::FRAC_PI_2);
        let boxes = extract_reference_hand_boxes(&map, 0.5, 0.001, 0.5).unwrap();
        assert_eq!(boxes.len(), 1);
        let (x0, y0, x1, y1) = boxes[0].corners();
        // analytic: top = cy - a, retained length 1.5·2b = 60 → bottom = cy
        assert!((y0 - (cy - a)).abs() <= 2.0, "top {y0}");
        assert!((y1 - cy).abs() <= 2.0, "bottom {y1}");
        assert!((x0 - (cx - b)).abs() <= 2.0 && (x1 - (cx + b)).abs() <= 2.0);
    }

    #[test]
    fn blob_touching_bottom_keeps_far_end() {
        let mut map = ProbabilityMap::zeros(120, 100).unwrap();
        // ellipse cut by the bottom border: the arm enters from below
        raster_ellipse(
            &mut map,
            60.0,
            85.0,
            45.0,
            12.0,
            std::f64::consts::FRAC_PI_2,
        );
        let boxes = extract_reference_hand_boxes(&map, 0.5, 0.001, 0.5).unwrap();
        assert_eq!(boxes.len(), 1);
        let (_, y0, _, y1) = boxes[0].corners();
        assert!((y0 - 40.0).abs() <= 1.0, "top {y0}");
        assert!(
            y1 < 100.0 - 10.0,
            "kept region must leave the border, got {y1}"
        );
    }

    #[test]
    fn area_filter() {
        let mut map = ProbabilityMap::zeros(100, 100).unwrap();
        raster_ellipse(&mut map, 30.0, 30.0, 20.0, 10.0, 0.0);
        // tiny 2×2 speck, 0.04% of the image
        for (x, y) in [(80, 80), (81, 80), (80, 81), (81, 81)] {
            map.set(x, y, 0.9);
        }
        let boxes = extract_reference_hand_boxes(&map, 0.5, 0.005, 0.3).unwrap();
        assert_eq!(boxes.len(), 1);
        assert!(boxes[0].cx < 60.0);
    }

    #[test]
    fn diagonal_pixels_are_connected() {
        let mut map = ProbabilityMap::zeros(10, 10).unwrap();
        map.set(2, 2, 1.0);
        map.set(3, 3, 1.0);
        map.set(4, 4, 1.0);
        let boxes = extract_reference_hand_boxes(&map, 0.5, 0.0, 1.0).unwrap();
        assert_eq!(boxes.len(), 1);
    }

    #[test]
    fn invalid_threshold() {
        let map = ProbabilityMap::zeros(4, 4).unwrap();
        assert!(extract_reference_hand_boxes(&map, 1.5, 0.0, 1.0).is_err());
        assert!(extract_reference_hand_boxes(&map, 0.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn short_blob_not_truncated() {
        let mut map = ProbabilityMap::zeros(100, 100).unwrap();
        raster_ellipse(&mut map, 50.0, 50.0, 15.0, 14.0, 0.0);
        let blob = &extract_blobs(
            &map,
            &BlobConfig {
                min_area_frac: 0.0,
                ..Default::default()
            },
        )
        .unwrap()[0];
        let (x0, y0, x1, y1) = blob.reference_box.corners();
        assert!((x0 - 35.0).abs() <= 1.0 && (x1 - 65.0).abs() <= 1.0);
        assert!((y0 - 36.0).abs() <= 1.0 && (y1 - 64.0).abs() <= 1.0);
        assert!((blob.major_length - 30.0).abs() < 1.0);
        assert!((blob.minor_length - 28.0).abs() < 1.0);
    }
}
