//! Seeded test-corpus generators.
//!
//! Every generator draws from `ChaCha8Rng::seed_from_u64(seed)` in a fixed
//! order (nodes in node order, children in label order), so a seed pins the
//! output on every platform. Random rationals are small-denominator values
//! `k / 16` unless stated otherwise.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::christ::MetricSpace;
use crate::error::{Error, Result};
use crate::measures::{carleson_constant, Atom, AtomicMeasure, TreeMeasure};
use crate::rational::{frac, int, Rational};
use crate::tree::{CubeId, NodeId, WeightedTree};

pub type Generator = ChaCha8Rng;

pub fn rng(seed: u64) -> Generator {
    ChaCha8Rng::seed_from_u64(seed)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Kind {
    Product,
    SubtreeSingular,
    Cascade,
}

impl std::str::FromStr for Kind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "product" => Ok(Kind::Product),
            "subtree-singular" => Ok(Kind::SubtreeSingular),
            "cascade" => Ok(Kind::Cascade),
            other => Err(Error::Parse(format!(
                "unknown generator {other:?}; expected product, subtree-singular or cascade"
            ))),
        }
    }
}

#[derive(Clone, Debug)]
pub struct Params {
    pub kind: Kind,
    pub d: usize,
    pub depth: u32,
    /// `product`: the Carleson constant to scale to (default 1).
    pub target: Option<Rational>,
    /// `subtree-singular`: the cube carrying all the mass (default the first
    /// child of the root).
    pub node: Option<CubeId>,
    /// `cascade`: split every parent evenly instead of at random.
    pub uniform: bool,
}

impl Params {
    pub fn new(kind: Kind, d: usize, depth: u32) -> Self {
        Params {
            kind,
            d,
            depth,
            target: None,
            node: None,
            uniform: false,
        }
    }
}

pub fn generate(params: &Params, seed: u64) -> Result<TreeMeasure> {
    let tree = Arc::new(WeightedTree::dyadic(params.d, params.depth)?);
    let mut g = rng(seed);
    match params.kind {
        Kind::Product => {
            let target = params.target.clone().unwrap_or_else(|| int(1));
            product(&mut g, tree, &target)
        }
        Kind::SubtreeSingular => {
            let label = match &params.node {
                Some(c) => c.clone(),
                None => tree
                    .label(*tree.children(tree.root()).first().unwrap_or(&tree.root()))
                    .clone(),
            };
            let v = tree
                .find(&label)
                .ok_or_else(|| Error::Domain(format!("{label} is not in the tree")))?;
            subtree_singular(&mut g, tree, v)
        }
        Kind::Cascade => cascade(&mut g, tree, params.uniform),
    }
}

/// `k / 16` with `k` uniform in `0..=16`.
pub fn sixteenth(g: &mut Generator) -> Rational {
    frac(g.gen_range(0..=16), 16)
}

/// Independent masses `U_v sigma(v)`, `U_v` in `{0, 1/16, ..., 1}`, zero with
/// probability 1/4, then scaled so that `C1` equals `target` (unless all zero).
pub fn product(g: &mut Generator, tree: Arc<WeightedTree>, target: &Rational) -> Result<TreeMeasure> {
    let raw: Vec<Rational> = tree
        .nodes()
        .map(|v| {
            let u = sixteenth(g);
            if g.gen_range(0..4) == 0 {
                int(0)
            } else {
                u * tree.sigma(v)
            }
        })
        .collect();
    let m = TreeMeasure::new(tree, raw)?;
    let c1 = carleson_constant(&m).value;
    if c1 == int(0) {
        return Ok(m);
    }
    m.scaled(&(target / c1))
}

/// Random masses on the subtree of `v` only, with `mass(v) > 0`.
pub fn subtree_singular(g: &mut Generator, tree: Arc<WeightedTree>, v: NodeId) -> Result<TreeMeasure> {
    let mass: Vec<Rational> = tree
        .nodes()
        .map(|u| {
            let k = g.gen_range(0..=16);
            if u == v {
                frac(k + 1, 17) * tree.sigma(u)
            } else if tree.is_descendant(u, v) {
                frac(k, 16) * tree.sigma(u)
            } else {
                int(0)
            }
        })
        .collect();
    TreeMeasure::new(tree, mass)
}

/// Unit mass split multiplicatively from the root down to the leaves. Random
/// proportions are `k_c / sum k`, `k_c` uniform in `1..=8`.
pub fn cascade(g: &mut Generator, tree: Arc<WeightedTree>, uniform: bool) -> Result<TreeMeasure> {
    let mut share = vec![int(0); tree.len()];
    share[tree.root().0] = int(1);
    for v in tree.nodes() {
        let children = tree.children(v);
        if children.is_empty() {
            continue;
        }
        let weights: Vec<i64> = children
            .iter()
            .map(|_| if uniform { 1 } else { g.gen_range(1..=8) })
            .collect();
        let total: i64 = weights.iter().sum();
        for (c, w) in children.iter().zip(&weights) {
            share[c.0] = &share[v.0] * frac(*w, total);
        }
    }
    let mass = tree
        .nodes()
        .map(|v| if tree.is_leaf(v) { share[v.0].clone() } else { int(0) })
        .collect();
    TreeMeasure::new(tree, mass)
}

/// Masses `k / 16 * sigma(v)` on the given tree, each node zero with
/// probability `1 / 3`. Used for random `(mu, nu)` pairs on any tree.
pub fn random_measure(g: &mut Generator, tree: Arc<WeightedTree>) -> Result<TreeMeasure> {
    let mass = tree
        .nodes()
        .map(|v| {
            let u = sixteenth(g);
            if g.gen_range(0..3) == 0 {
                int(0)
            } else {
                u * tree.sigma(v)
            }
        })
        .collect();
    TreeMeasure::new(tree, mass)
}

/// A sparse measure: a handful of nodes get random mass, the rest zero.
pub fn sparse_measure(g: &mut Generator, tree: Arc<WeightedTree>) -> Result<TreeMeasure> {
    let hits = g.gen_range(1..=4.min(tree.len()));
    let mut mass = vec![int(0); tree.len()];
    for _ in 0..hits {
        let v = g.gen_range(0..tree.len());
        mass[v] += sixteenth(g) * tree.sigma(NodeId(v));
    }
    TreeMeasure::new(tree, mass)
}

/// `delta` in `{1/16, ..., 16/16}`.
pub fn random_delta(g: &mut Generator) -> Rational {
    frac(g.gen_range(1..=16), 16)
}

/// `n` atoms with `x` on the grid `2^-10 Z^d`, heights binnable at `depth`
/// (`2^-(depth+1) < t <= 1`, on the grid `2^-(depth+6) Z`) and weights `k / 16`.
pub fn random_atoms(g: &mut Generator, d: usize, depth: u32, n: usize) -> Result<AtomicMeasure> {
    let grid = 1i64 << 10;
    let hgrid = 1i64 << (depth + 6);
    let lo = hgrid >> (depth + 1);
    let atoms = (0..n)
        .map(|_| {
            let x = (0..d).map(|_| frac(g.gen_range(0..grid), grid)).collect();
            let t = frac(g.gen_range(lo + 1..=hgrid), hgrid);
            let w = frac(g.gen_range(1..=16), 16);
            Atom::new(x, t, w)
        })
        .collect();
    AtomicMeasure::new(atoms)
}

/// A random pairwise-disjoint family of dyadic subcubes of `q`, at most
/// `max_depth` levels below it: each cube is taken with probability 1/3,
/// split with probability 1/3 (when allowed), or skipped.
pub fn random_disjoint_family(g: &mut Generator, q: &CubeId, max_depth: u32) -> Vec<CubeId> {
    let mut out = Vec::new();
    let mut stack: Vec<CubeId> = q.children().into_iter().rev().collect();
    while let Some(c) = stack.pop() {
        let roll = g.gen_range(0..3);
        if roll == 0 {
            out.push(c);
        } else if roll == 1 && c.level < q.level + max_depth {
            stack.extend(c.children().into_iter().rev());
        }
    }
    out
}

/// `n` distinct points on the grid `2^-k Z^dim` of `[0,1)^dim`, sup-norm
/// metric, uniform weights. Requires `n <= 2^(k dim)`.
pub fn random_metric_space(g: &mut Generator, n: usize, dim: usize, k: u32) -> Result<MetricSpace> {
    let side = 1u64 << k;
    let cells = side.checked_pow(dim as u32).unwrap_or(u64::MAX);
    if n == 0 || n as u64 > cells {
        return Err(Error::Domain(format!("cannot place {n} distinct points on the grid")));
    }
    let mut seen = std::collections::BTreeSet::new();
    let mut points = Vec::with_capacity(n);
    while points.len() < n {
        let p: Vec<u64> = (0..dim).map(|_| g.gen_range(0..side)).collect();
        if seen.insert(p.clone()) {
            points.push(p.into_iter().map(|c| Rational::new((c as i64).into(), (side as i64).into())).collect());
        }
    }
    MetricSpace::from_points(&points)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::measure_to_json;
    use crate::measures::top_constant;
    use crate::rational::pow2_neg;

    #[test]
    fn uniform_cascade_is_flat() {
        let mut p = Params::new(Kind::Cascade, 2, 3);
        p.uniform = true;
        let m = generate(&p, 1).unwrap();
        let t = m.tree();
        for v in t.nodes() {
            let expected = if t.is_leaf(v) { pow2_neg(6) } else { int(0) };
            assert_eq!(m.mass(v), &expected);
        }
        assert_eq!(m.total(), &int(1));
    }

    #[test]
    fn random_cascade_has_unit_mass() {
        let m = generate(&Params::new(Kind::Cascade, 1, 5), 9).unwrap();
        assert_eq!(m.total(), &int(1));
    }

    #[test]
    fn seeds_are_reproducible() {
        for kind in [Kind::Product, Kind::SubtreeSingular, Kind::Cascade] {
            let p = Params::new(kind, 1, 4);
            assert_eq!(measure_to_json(&generate(&p, 7).unwrap()), measure_to_json(&generate(&p, 7).unwrap()));
        }
        let p = Params::new(Kind::Product, 1, 4);
        assert_ne!(measure_to_json(&generate(&p, 7).unwrap()), measure_to_json(&generate(&p, 8).unwrap()));
    }

    #[test]
    fn product_hits_target() {
        let mut p = Params::new(Kind::Product, 2, 2);
        p.target = Some(frac(3, 2));
        for seed in 0..10 {
            let m = generate(&p, seed).unwrap();
            assert!(m.is_zero() || carleson_constant(&m).value == frac(3, 2));
        }
    }

    #[test]
    fn subtree_singular_peaks_inside() {
        let mut p = Params::new(Kind::SubtreeSingular, 1, 3);
        let l = CubeId::new(1, vec![0]).unwrap();
        p.node = Some(l.clone());
        for seed in 0..10 {
            let m = generate(&p, seed).unwrap();
            let t = m.tree();
            let v = t.find(&l).unwrap();
            assert!(t.is_descendant(carleson_constant(&m).argmax, v));
            assert!(t.is_descendant(top_constant(&m).argmax, v));
        }
    }

    #[test]
    fn random_objects_are_valid() {
        let mut g = rng(3);
        let atoms = random_atoms(&mut g, 1, 4, 50).unwrap();
        assert!(atoms.atoms.iter().all(|a| a.t > pow2_neg(5)));
        let q = CubeId::root(1);
        for _ in 0..20 {
            let fam = random_disjoint_family(&mut g, &q, 4);
            for (i, a) in fam.iter().enumerate() {
                assert!(fam[i + 1..].iter().all(|b| a.is_disjoint_from(b)));
            }
        }
        let space = random_metric_space(&mut g, 40, 2, 6).unwrap();
        assert_eq!(space.len(), 40);
    }
}
