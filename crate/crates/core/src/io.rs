//! Text formats: tree measures, atomic measures, metric spaces, cube families.
//!
//! All files are JSON. Rationals are written as `"p/q"` strings and read from
//! strings or JSON numbers without rounding. Serialization is deterministic,
//! so parse followed by write reproduces a file written by this module byte
//! for byte.

use std::collections::BTreeSet;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::christ::MetricSpace;
use crate::error::{Error, Result};
use crate::measures::{Atom, AtomicMeasure, TreeMeasure};
use crate::rational::{ExactRational, Rational};
use crate::tree::{CubeId, TreeKind, WeightedTree};

pub const DYADIC: &str = "dyadic";
pub const CHRIST_REF: &str = "christ-ref";

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MassEntry {
    pub level: u32,
    pub index: Vec<u64>,
    pub mass: ExactRational,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasureFile {
    pub tree: String,
    pub d: usize,
    pub depth: u32,
    pub masses: Vec<MassEntry>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AtomEntry {
    pub x: Vec<ExactRational>,
    pub t: ExactRational,
    pub w: ExactRational,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AtomsFile {
    pub atoms: Vec<AtomEntry>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PointId {
    Name(String),
    Number(u64),
}

impl PointId {
    fn text(&self) -> String {
        match self {
            PointId::Name(s) => s.clone(),
            PointId::Number(n) => n.to_string(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricFile {
    pub points: Vec<PointId>,
    pub dist: Vec<Vec<ExactRational>>,
    pub weights: Vec<ExactRational>,
}

fn parse_json<'a, T: Deserialize<'a>>(text: &'a str, what: &str) -> Result<T> {
    serde_json::from_str(text).map_err(|e| Error::Parse(format!("{what}: {e}")))
}

/// Top-level keys one per line, arrays one element per line, everything
/// deeper compact.
fn to_json<T: Serialize>(value: &T) -> String {
    let value = serde_json::to_value(value).expect("plain data serializes");
    let compact = |v: &Value| serde_json::to_string(v).expect("plain data serializes");
    let block = |v: &Value, indent: &str| match v {
        Value::Array(items) if !items.is_empty() => {
            let lines: Vec<String> = items.iter().map(|i| format!("{indent}  {}", compact(i))).collect();
            format!("[\n{}\n{indent}]", lines.join(",\n"))
        }
        other => compact(other),
    };
    let mut s = match &value {
        Value::Object(map) => {
            let lines: Vec<String> = map
                .iter()
                .map(|(k, v)| format!("  {}: {}", compact(&Value::String(k.clone())), block(v, "  ")))
                .collect();
            format!("{{\n{}\n}}", lines.join(",\n"))
        }
        other => block(other, ""),
    };
    s.push('\n');
    s
}

pub fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text)?;
    Ok(())
}

// ---- tree measures ---------------------------------------------------------

/// The tree a measure file refers to: dyadic trees are rebuilt from `d` and
/// `depth`; `christ-ref` files need the tree supplied by the caller.
pub fn measure_file_tree(file: &MeasureFile, christ: Option<&Arc<WeightedTree>>) -> Result<Arc<WeightedTree>> {
    match file.tree.as_str() {
        DYADIC => Ok(Arc::new(WeightedTree::dyadic(file.d, file.depth)?)),
        CHRIST_REF => {
            let tree = christ.ok_or_else(|| {
                Error::Parse("field `tree`: christ-ref measures need the metric space they refer to".into())
            })?;
            if tree.depth() != file.depth {
                return Err(Error::Parse(format!(
                    "field `depth`: file says {}, tree has depth {}",
                    file.depth,
                    tree.depth()
                )));
            }
            Ok(tree.clone())
        }
        other => Err(Error::Parse(format!(
            "field `tree`: expected \"{DYADIC}\" or \"{CHRIST_REF}\", got {other:?}"
        ))),
    }
}

/// Build a measure on `tree`; nodes absent from the file get mass zero.
pub fn measure_from_file(file: &MeasureFile, tree: Arc<WeightedTree>) -> Result<TreeMeasure> {
    let mut mass = vec![Rational::from_integer(0.into()); tree.len()];
    let mut seen = BTreeSet::new();
    for (i, entry) in file.masses.iter().enumerate() {
        let label = CubeId {
            level: entry.level,
            index: entry.index.clone(),
        };
        let v = tree
            .find(&label)
            .ok_or_else(|| Error::Parse(format!("masses[{i}]: no node {label} in the tree")))?;
        if !seen.insert(v) {
            return Err(Error::Parse(format!("masses[{i}]: node {label} listed twice")));
        }
        if entry.mass.0 < Rational::from_integer(0.into()) {
            return Err(Error::Parse(format!("masses[{i}].mass: negative mass {}", entry.mass)));
        }
        mass[v.index()] = entry.mass.0.clone();
    }
    TreeMeasure::new(tree, mass)
}

/// Every node is listed, in node order.
pub fn measure_to_file(m: &TreeMeasure) -> MeasureFile {
    let tree = m.tree();
    let (kind, d) = match tree.kind() {
        TreeKind::Dyadic { d } => (DYADIC, *d),
        TreeKind::Generic => (CHRIST_REF, 1),
    };
    MeasureFile {
        tree: kind.to_string(),
        d,
        depth: tree.depth(),
        masses: tree
            .nodes()
            .map(|v| MassEntry {
                level: tree.label(v).level,
                index: tree.label(v).index.clone(),
                mass: ExactRational(m.mass(v).clone()),
            })
            .collect(),
    }
}

pub fn parse_measure_file(text: &str) -> Result<MeasureFile> {
    parse_json(text, "measure file")
}

/// Parse a measure file; `christ` supplies the tree for `christ-ref` files.
pub fn parse_measure(text: &str, christ: Option<&Arc<WeightedTree>>) -> Result<TreeMeasure> {
    let file = parse_measure_file(text)?;
    let tree = measure_file_tree(&file, christ)?;
    measure_from_file(&file, tree)
}

pub fn measure_to_json(m: &TreeMeasure) -> String {
    to_json(&measure_to_file(m))
}

/// As [`measure_to_json`] but with an explicit dimension, for Christ trees
/// audited at a dimension other than 1.
pub fn measure_to_json_with_dimension(m: &TreeMeasure, d: usize) -> String {
    let mut file = measure_to_file(m);
    file.d = d;
    to_json(&file)
}

// ---- atomic measures -------------------------------------------------------

pub fn parse_atoms(text: &str) -> Result<AtomicMeasure> {
    let file: AtomsFile = parse_json(text, "atoms file")?;
    let atoms = file
        .atoms
        .into_iter()
        .map(|a| Atom::new(a.x.into_iter().map(|c| c.0).collect(), a.t.0, a.w.0))
        .collect();
    AtomicMeasure::new(atoms).map_err(|e| Error::Parse(format!("atoms: {e}")))
}

pub fn atoms_to_json(m: &AtomicMeasure) -> String {
    to_json(&AtomsFile {
        atoms: m
            .atoms
            .iter()
            .map(|a| AtomEntry {
                x: a.x.iter().cloned().map(ExactRational).collect(),
                t: ExactRational(a.t.clone()),
                w: ExactRational(a.w.clone()),
            })
            .collect(),
    })
}

// ---- metric spaces ---------------------------------------------------------

pub fn parse_metric(text: &str) -> Result<MetricSpace> {
    let file: MetricFile = parse_json(text, "metric file")?;
    let ids = file.points.iter().map(PointId::text).collect();
    let dist = file
        .dist
        .into_iter()
        .map(|row| row.into_iter().map(|r| r.0).collect())
        .collect();
    let weights = file.weights.into_iter().map(|w| w.0).collect();
    MetricSpace::new(ids, dist, weights).map_err(|e| Error::Parse(format!("metric file: {e}")))
}

pub fn metric_to_json(space: &MetricSpace) -> String {
    to_json(&MetricFile {
        points: space.ids().iter().cloned().map(PointId::Name).collect(),
        dist: space
            .distances()
            .iter()
            .map(|row| row.iter().cloned().map(ExactRational).collect())
            .collect(),
        weights: space.weights().iter().cloned().map(ExactRational).collect(),
    })
}

// ---- cube families ---------------------------------------------------------

pub fn parse_family(text: &str) -> Result<Vec<CubeId>> {
    let cubes: Vec<CubeId> = parse_json(text, "family file")?;
    for (i, c) in cubes.iter().enumerate() {
        CubeId::new(c.level, c.index.clone()).map_err(|e| Error::Parse(format!("family[{i}]: {e}")))?;
    }
    Ok(cubes)
}

pub fn family_to_json(cubes: &[CubeId]) -> String {
    to_json(&cubes)
}

/// `"level:j1,j2"` as printed by `CubeId`'s `Display`.
pub fn parse_cube(text: &str) -> Result<CubeId> {
    let bad = || Error::Parse(format!("cube {text:?}: expected level:j1,j2,..."));
    let (level, index) = text.split_once(':').ok_or_else(bad)?;
    let level: u32 = level.trim().parse().map_err(|_| bad())?;
    let index = index
        .split(',')
        .map(|j| j.trim().parse::<u64>().map_err(|_| bad()))
        .collect::<Result<Vec<_>>>()?;
    CubeId::new(level, index).map_err(|e| Error::Parse(format!("cube {text:?}: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{frac, int};
    use proptest::prelude::*;

    fn dyadic(d: usize, depth: u32) -> Arc<WeightedTree> {
        Arc::new(WeightedTree::dyadic(d, depth).unwrap())
    }

    #[test]
    fn measure_round_trip_is_identity() {
        let tree = dyadic(1, 2);
        let m = TreeMeasure::from_fn(tree, |t, v| frac(t.level(v) as i64 + 1, 7)).unwrap();
        let text = measure_to_json(&m);
        let back = parse_measure(&text, None).unwrap();
        assert_eq!(back.masses(), m.masses());
        assert_eq!(measure_to_json(&back), text);
    }

    #[test]
    fn sparse_and_decimal_input() {
        let text = r#"{"tree":"dyadic","d":1,"depth":1,
            "masses":[{"level":1,"index":[0],"mass":0.25}]}"#;
        let m = parse_measure(text, None).unwrap();
        let l = m.tree().find(&CubeId::new(1, vec![0]).unwrap()).unwrap();
        assert_eq!(m.mass(l), &frac(1, 4));
        assert_eq!(m.total(), &frac(1, 4));
    }

    #[test]
    fn parse_errors_name_the_field() {
        let missing = r#"{"tree":"dyadic","d":1,"depth":1,"masses":[{"level":1,"index":[0]}]}"#;
        let e = parse_measure(missing, None).unwrap_err().to_string();
        assert!(e.contains("mass") && e.contains("line"), "{e}");

        let bad_rational = r#"{"tree":"dyadic","d":1,"depth":1,
"masses":[{"level":1,"index":[0],"mass":"1/0"}]}"#;
        let e = parse_measure(bad_rational, None).unwrap_err().to_string();
        assert!(e.contains("line 2"), "{e}");

        let unknown = r#"{"tree":"dyadic","d":1,"depth":1,"masses":[{"level":2,"index":[0],"mass":"1"}]}"#;
        let e = parse_measure(unknown, None).unwrap_err().to_string();
        assert!(e.contains("masses[0]"), "{e}");

        let negative = r#"{"tree":"dyadic","d":1,"depth":1,"masses":[{"level":0,"index":[0],"mass":"-1"}]}"#;
        assert!(parse_measure(negative, None).is_err());

        let kind = r#"{"tree":"ternary","d":1,"depth":1,"masses":[]}"#;
        assert!(parse_measure(kind, None).unwrap_err().to_string().contains("tree"));
        let christ = r#"{"tree":"christ-ref","d":1,"depth":1,"masses":[]}"#;
        assert!(parse_measure(christ, None).is_err());
    }

    #[test]
    fn atoms_round_trip() {
        let m = AtomicMeasure::new(vec![
            Atom::new(vec![frac(1, 3)], frac(1, 5), int(2)),
            Atom::new(vec![int(0)], int(1), frac(1, 2)),
        ])
        .unwrap();
        let text = atoms_to_json(&m);
        assert_eq!(parse_atoms(&text).unwrap(), m);
        let bad = r#"{"atoms":[{"x":[1.5],"t":"1/2","w":"1"}]}"#;
        assert!(parse_atoms(bad).is_err());
    }

    #[test]
    fn metric_round_trip_and_validation() {
        let text = r#"{"points":["a","b",3],"dist":[[0,"1/2",1],["1/2",0,"1/2"],[1,"1/2",0]],"weights":["1/3","1/3","1/3"]}"#;
        let space = parse_metric(text).unwrap();
        assert_eq!(space.ids(), &["a", "b", "3"]);
        let again = metric_to_json(&space);
        assert_eq!(metric_to_json(&parse_metric(&again).unwrap()), again);
        let broken = r#"{"points":["a","b","c"],"dist":[[0,"1/4",1],["1/4",0,"1/4"],[1,"1/4",0]],"weights":["1/3","1/3","1/3"]}"#;
        assert!(parse_metric(broken).unwrap_err().to_string().contains("triangle"));
    }

    #[test]
    fn family_and_cube_text() {
        let cubes = vec![CubeId::new(1, vec![0]).unwrap(), CubeId::new(2, vec![3]).unwrap()];
        let text = family_to_json(&cubes);
        assert_eq!(parse_family(&text).unwrap(), cubes);
        assert!(parse_family(r#"[{"level":1,"index":[2]}]"#).is_err());
        assert_eq!(parse_cube("2:1,3").unwrap(), CubeId::new(2, vec![1, 3]).unwrap());
        assert!(parse_cube("2-1").is_err());
    }

    proptest! {
        #[test]
        fn measure_files_round_trip(d in 1usize..3, depth in 1u32..3, seed in proptest::collection::vec(0i64..9, 21)) {
            let tree = dyadic(d, depth);
            let m = TreeMeasure::from_fn(tree, |_, v| frac(seed[v.index() % seed.len()], 1 + (v.index() as i64 % 5))).unwrap();
            let text = measure_to_json(&m);
            let back = parse_measure(&text, None).unwrap();
            prop_assert_eq!(measure_to_json(&back), text);
        }
    }
}
