//! Discrete label taxonomies for actions, grasp types and object attributes.
//!
//! Grasp and attribute lists always carry the null class at index 0 ("no
//! hand" / "no object"), so every parameter tensor can be indexed with raw
//! label indices. `n_grasps()` and `n_attributes()` count the non-null
//! classes only.

use std::collections::HashSet;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const SCHEMA_VERSION: u32 = 1;

const GTEA_CONFIG: &str = include_str!("../data/gtea.toml");

/// The two hand sides. Every per-side quantity is indexed by `Side`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
}

impl Side {
    pub const BOTH: [Side; 2] = [Side::Left, Side::Right];

    pub fn index(self) -> usize {
        match self {
            Side::Left => 0,
            Side::Right => 1,
        }
    }

    pub fn other(self) -> Side {
        match self {
            Side::Left => Side::Right,
            Side::Right => Side::Left,
        }
    }

    /// Position of this side's entry in a {Background, LeftHand, RightHand}
    /// hand-detection score vector.
    pub fn detection_index(self) -> usize {
        self.index() + 1
    }
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Side::Left => f.write_str("left"),
            Side::Right => f.write_str("right"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassLabel {
    pub id: String,
    pub name: String,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub null: bool,
}

#[derive(Debug, Deserialize, Serialize)]
struct LabelSpaceDoc {
    schema_version: u32,
    #[serde(default)]
    name: Option<String>,
    #[serde(default)]
    actions: Vec<ClassLabel>,
    #[serde(default)]
    grasps: Vec<ClassLabel>,
    #[serde(default)]
    attributes: Vec<ClassLabel>,
}

/// Validated, immutable label taxonomy.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelSpace {
    name: Option<String>,
    actions: Vec<ClassLabel>,
    grasps: Vec<ClassLabel>,
    attributes: Vec<ClassLabel>,
}

impl LabelSpace {
    /// Builds a label space from explicit lists. `grasps` and `attributes`
    /// must start with their null class.
    pub fn new(
        actions: Vec<ClassLabel>,
        grasps: Vec<ClassLabel>,
        attributes: Vec<ClassLabel>,
    ) -> Result<Self> {
        let space = LabelSpace {
            name: None,
            actions,
            grasps,
            attributes,
        };
        space.validate()?;
        Ok(space)
    }

    /// A generated space with `n_grasps`/`n_attributes` non-null classes.
    pub fn synthetic(n_actions: usize, n_grasps: usize, n_attributes: usize) -> Result<Self> {
        let mk = |prefix: &str, n: usize| -> Vec<ClassLabel> {
            (1..=n)
                .map(|i| ClassLabel {
                    id: format!("{prefix}{i:02}"),
                    name: format!("{prefix}{i:02}"),
                    null: false,
                })
                .collect()
        };
        let null = |id: &str, name: &str| ClassLabel {
            id: id.to_string(),
            name: name.to_string(),
            null: true,
        };
        let mut grasps = vec![null("g00", "no hand")];
        grasps.extend(mk("g", n_grasps));
        let mut attributes = vec![null("o00", "no object")];
        attributes.extend(mk("o", n_attributes));
        let mut space = LabelSpace::new(mk("a", n_actions), grasps, attributes)?;
        space.name = Some(format!("synthetic-{n_actions}x{n_grasps}x{n_attributes}"));
        Ok(space)
    }

    /// The bundled GTEA taxonomy (10 actions, 13 grasp types, 9 attributes).
    pub fn gtea() -> Self {
        LabelSpace::from_toml_str(GTEA_CONFIG).expect("bundled GTEA config is valid")
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let doc: LabelSpaceDoc = toml::from_str(text)?;
        if doc.schema_version != SCHEMA_VERSION {
            return Err(Error::LabelSpace(format!(
                "unsupported schema_version {}",
                doc.schema_version
            )));
        }
        let space = LabelSpace {
            name: doc.name,
            actions: doc.actions,
            grasps: doc.grasps,
            attributes: doc.attributes,
        };
        space.validate()?;
        Ok(space)
    }

    pub fn to_toml_string(&self) -> String {
        let doc = LabelSpaceDoc {
            schema_version: SCHEMA_VERSION,
            name: self.name.clone(),
            actions: self.actions.clone(),
            grasps: self.grasps.clone(),
            attributes: self.attributes.clone(),
        };
        toml::to_string(&doc).expect("label space serializes")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        if !path.exists() {
            return Err(Error::MissingFile(path.to_path_buf()));
        }
        LabelSpace::from_toml_str(&std::fs::read_to_string(path)?)
    }

    fn validate(&self) -> Result<()> {
        check_list("actions", &self.actions, false)?;
        check_list("grasps", &self.grasps, true)?;
        check_list("attributes", &self.attributes, true)?;
        Ok(())
    }

    pub fn name(&self) -> Option<&str> {
        self.name.as_deref()
    }

    pub fn n_actions(&self) -> usize {
        self.actions.len()
    }

    /// Number of non-null grasp types.
    pub fn n_grasps(&self) -> usize {
        self.grasps.len() - 1
    }

    /// Number of non-null object attributes.
    pub fn n_attributes(&self) -> usize {
        self.attributes.len() - 1
    }

    pub fn actions(&self) -> &[ClassLabel] {
        &self.actions
    }

    /// Grasp classes, null class first.
    pub fn grasps(&self) -> &[ClassLabel] {
        &self.grasps
    }

    /// Attribute classes, null class first.
    pub fn attributes(&self) -> &[ClassLabel] {
        &self.attributes
    }

    pub fn dims(&self) -> Dims {
        Dims {
            actions: self.n_actions(),
            grasps: self.n_grasps(),
            attributes: self.n_attributes(),
        }
    }

    /// Hex SHA-256 of the ordered class names of all three lists.
    pub fn fingerprint(&self) -> String {
        let mut hasher = Sha256::new();
        for (section, list) in [
            ("actions", &self.actions),
            ("grasps", &self.grasps),
            ("attributes", &self.attributes),
        ] {
            hasher.update(section.as_bytes());
            hasher.update([0u8]);
            for label in list {
                hasher.update(label.name.as_bytes());
                hasher.update([0u8]);
            }
            hasher.update([1u8]);
        }
        hasher
            .finalize()
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}

fn check_list(section: &str, list: &[ClassLabel], has_null: bool) -> Result<()> {
    let min = if has_null { 2 } else { 1 };
    if list.len() < min {
        return Err(Error::LabelSpace(format!(
            "`{section}` needs at least {min} entr{}",
            if min == 1 {
                "y"
            } else {
                "ies (null class plus one real class)"
            }
        )));
    }
    let mut seen_names = HashSet::new();
    let mut seen_ids = HashSet::new();
    for (idx, label) in list.iter().enumerate() {
        if label.name.trim().is_empty() || label.id.trim().is_empty() {
            return Err(Error::LabelSpace(format!(
                "`{section}` entry {idx} has an empty id or name"
            )));
        }
        if !seen_names.insert(label.name.as_str()) {
            return Err(Error::LabelSpace(format!(
                "duplicate name `{}` in `{section}`",
                label.name
            )));
        }
        if !seen_ids.insert(label.id.as_str()) {
            return Err(Error::LabelSpace(format!(
                "duplicate id `{}` in `{section}`",
                label.id
            )));
        }
        let should_be_null = has_null && idx == 0;
        if label.null != should_be_null {
            return Err(Error::LabelSpace(if should_be_null {
                format!("`{section}` must declare its null class first (`null = true`)")
            } else {
                format!("`{section}` entry `{}` cannot be a null class", label.name)
            }));
        }
    }
    Ok(())
}

/// Tensor sizes derived from a label space. `grasps` and `attributes` count
/// non-null classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Dims {
    pub actions: usize,
    pub grasps: usize,
    pub attributes: usize,
}

/// Extents of an object along its three principal dimensions, `a ≥ b ≥ c > 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjectDimensions {
    a: f64,
    b: f64,
    c: f64,
}

impl ObjectDimensions {
    pub fn new(a: f64, b: f64, c: f64) -> Result<Self> {
        if !(a.is_finite() && b.is_finite() && c.is_finite()) {
            return Err(Error::ObjectDimensions("lengths must be finite".into()));
        }
        if c <= 0.0 {
            return Err(Error::ObjectDimensions(format!("C = {c} must be positive")));
        }
        if !(a >= b && b >= c) {
            return Err(Error::ObjectDimensions(format!(
                "expected A ≥ B ≥ C, got ({a}, {b}, {c})"
            )));
        }
        Ok(ObjectDimensions { a, b, c })
    }

    pub fn a(&self) -> f64 {
        self.a
    }
    pub fn b(&self) -> f64 {
        self.b
    }
    pub fn c(&self) -> f64 {
        self.c
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Shape {
    Prismatic,
    Round,
    Flat,
}

/// Set of shape classes an object satisfies. The criteria overlap, so an
/// object may be e.g. both prismatic and flat; an empty set means none.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ShapeSet {
    pub prismatic: bool,
    pub round: bool,
    pub flat: bool,
}

impl ShapeSet {
    pub fn contains(&self, shape: Shape) -> bool {
        match shape {
            Shape::Prismatic => self.prismatic,
            Shape::Round => self.round,
            Shape::Flat => self.flat,
        }
    }

    pub fn is_none(&self) -> bool {
        !(self.prismatic || self.round || self.flat)
    }

    pub fn iter(&self) -> impl Iterator<Item = Shape> + '_ {
        [Shape::Prismatic, Shape::Round, Shape::Flat]
            .into_iter()
            .filter(|s| self.contains(*s))
    }
}

pub fn classify_shape(dims: &ObjectDimensions) -> ShapeSet {
    let ObjectDimensions { a, b, c } = *dims;
    ShapeSet {
        prismatic: a > 2.0 * b,
        round: b <= a && a < 2.0 * b && c <= a && a < 2.0 * c,
        flat: b > 2.0 * c,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn shapes(a: f64, b: f64, c: f64) -> Vec<Shape> {
        classify_shape(&ObjectDimensions::new(a, b, c).unwrap())
            .iter()
            .collect()
    }

    #[test]
    fn gtea_sizes() {
        let gtea = LabelSpace::gtea();
        assert_eq!(gtea.n_actions(), 10);
        assert_eq!(gtea.n_grasps(), 13);
        assert_eq!(gtea.n_attributes(), 9);
        assert_eq!(gtea.grasps()[1].id, "g01");
        assert_eq!(gtea.grasps()[13].id, "g13");
        assert_eq!(gtea.attributes()[9].id, "o09");
        assert_eq!(gtea.actions()[9].name, "take");
        assert!(gtea.grasps()[0].null && gtea.attributes()[0].null);
    }

    #[test]
    fn minimal_space() {
        let text = r#"
schema_version = 1
[[actions]]
id = "a1"
name = "act"
[[grasps]]
id = "g0"
name = "no hand"
null = true
[[grasps]]
id = "g1"
name = "power wrap"
[[attributes]]
id = "o0"
name = "no object"
null = true
[[attributes]]
id = "o1"
name = "rigid"
"#;
        let space = LabelSpace::from_toml_str(text).unwrap();
        assert_eq!(
            space.dims(),
            Dims {
                actions: 1,
                grasps: 1,
                attributes: 1
            }
        );
    }

    #[test]
    fn duplicate_names_rejected() {
        let text = r#"
schema_version = 1
[[actions]]
id = "a1"
name = "act"
[[grasps]]
id = "g0"
name = "no hand"
null = true
[[grasps]]
id = "g1"
name = "power wrap"
[[grasps]]
id = "g2"
name = "power wrap"
[[attributes]]
id = "o0"
name = "no object"
null = true
[[attributes]]
id = "o1"
name = "rigid"
"#;
        let err = LabelSpace::from_toml_str(text).unwrap_err();
        assert!(
            err.to_string().contains("duplicate name `power wrap`"),
            "{err}"
        );
    }

    #[test]
    fn empty_and_missing_null_rejected() {
        let empty_actions = r#"
schema_version = 1
[[grasps]]
id = "g0"
name = "no hand"
null = true
[[grasps]]
id = "g1"
name = "wrap"
[[attributes]]
id = "o0"
name = "no object"
null = true
[[attributes]]
id = "o1"
name = "rigid"
"#;
        assert!(LabelSpace::from_toml_str(empty_actions).is_err());

        let no_null = r#"
schema_version = 1
[[actions]]
id = "a1"
name = "act"
[[grasps]]
id = "g1"
name = "wrap"
[[attributes]]
id = "o0"
name = "no object"
null = true
[[attributes]]
id = "o1"
name = "rigid"
"#;
        let err = LabelSpace::from_toml_str(no_null).unwrap_err();
        assert!(err.to_string().contains("null"), "{err}");
    }

    #[test]
    fn toml_round_trip_and_fingerprint() {
        let gtea = LabelSpace::gtea();
        let back = LabelSpace::from_toml_str(&gtea.to_toml_string()).unwrap();
        assert_eq!(gtea, back);
        assert_eq!(gtea.fingerprint(), back.fingerprint());
        let other = LabelSpace::synthetic(10, 12, 9).unwrap();
        assert_ne!(gtea.fingerprint(), other.fingerprint());
    }

    #[test]
    fn shape_examples() {
        assert_eq!(shapes(10.0, 4.0, 1.0), vec![Shape::Prismatic, Shape::Flat]);
        assert_eq!(shapes(5.0, 4.0, 3.0), vec![Shape::Round]);
        assert_eq!(shapes(2.0, 2.0, 2.0), vec![Shape::Round]);
        // 3 > 2·1.5 fails, round needs 3 < 2·1, flat needs 1.5 > 2
        assert!(classify_shape(&ObjectDimensions::new(3.0, 1.5, 1.0).unwrap()).is_none());
    }

    #[test]
    fn bad_dimensions() {
        assert!(ObjectDimensions::new(1.0, 2.0, 0.5).is_err());
        assert!(ObjectDimensions::new(3.0, 2.0, 0.0).is_err());
        assert!(ObjectDimensions::new(3.0, 2.0, 2.5).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn sorted_dims() -> impl Strategy<Value = (f64, f64, f64)> {
            (0.01f64..100.0, 0.01f64..100.0, 0.01f64..100.0).prop_map(|(x, y, z)| {
                let mut v = [x, y, z];
                v.sort_by(|p, q| q.partial_cmp(p).unwrap());
                (v[0], v[1], v[2])
            })
        }

        proptest! {
            #[test]
            fn scale_invariant((a, b, c) in sorted_dims(), k in prop::sample::select(vec![0.25f64, 0.5, 2.0, 4.0, 8.0])) {
                // power-of-two factors keep the comparisons exact
                let base = classify_shape(&ObjectDimensions::new(a, b, c).unwrap());
                let scaled = classify_shape(&ObjectDimensions::new(a * k, b * k, c * k).unwrap());
                prop_assert_eq!(base, scaled);
            }

            #[test]
            fn matches_inequalities((a, b, c) in sorted_dims()) {
                let set = classify_shape(&ObjectDimensions::new(a, b, c).unwrap());
                prop_assert_eq!(set.prismatic, a > b + b);
                prop_assert_eq!(set.round, (b <= a && a < b + b) && (c <= a && a < c + c));
                prop_assert_eq!(set.flat, b > c + c);
            }
        }
    }
}
