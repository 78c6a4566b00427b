//! Discrete measures on tree nodes, finite atomic measures on the half-space,
//! and the two Carleson-type constants.

use std::sync::Arc;

use num::traits::Zero;

use crate::error::{Error, Result};
use crate::rational::{format_rational, is_nonnegative, pow2_neg, Rational};
use crate::tree::{locate, CubeId, NodeId, TreeKind, WeightedTree};

/// Nonnegative mass per node (`alpha_Q` or `beta_Q`). Subtree sums are cached
/// at construction so `mu(Q*)` queries are O(1).
#[derive(Clone, Debug)]
pub struct TreeMeasure {
    tree: Arc<WeightedTree>,
    mass: Vec<Rational>,
    subtree: Vec<Rational>,
}

/// A supremum together with the first node attaining it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Supremum {
    pub value: Rational,
    pub argmax: NodeId,
}

impl TreeMeasure {
    pub fn new(tree: Arc<WeightedTree>, mass: Vec<Rational>) -> Result<Self> {
        if mass.len() != tree.len() {
            return Err(Error::Domain(format!(
                "measure has {} masses for a tree of {} nodes",
                mass.len(),
                tree.len()
            )));
        }
        if let Some(i) = mass.iter().position(|m| !is_nonnegative(m)) {
            return Err(Error::Domain(format!(
                "negative mass at {}",
                tree.label(NodeId(i))
            )));
        }
        // Reverse pre-order visits children before parents.
        let mut subtree = mass.clone();
        for &v in tree.preorder().iter().rev() {
            if let Some(p) = tree.parent(v) {
                let child = subtree[v.0].clone();
                subtree[p.0] += child;
            }
        }
        Ok(TreeMeasure {
            tree,
            mass,
            subtree,
        })
    }

    pub fn zero(tree: Arc<WeightedTree>) -> Self {
        let n = tree.len();
        Self::new(tree, vec![Rational::zero(); n]).expect("zero measure is valid")
    }

    /// Build from a node function.
    pub fn from_fn(tree: Arc<WeightedTree>, f: impl Fn(&WeightedTree, NodeId) -> Rational) -> Result<Self> {
        let mass = tree.nodes().map(|v| f(&tree, v)).collect();
        Self::new(tree, mass)
    }

    pub fn tree(&self) -> &WeightedTree {
        &self.tree
    }

    pub fn shared_tree(&self) -> &Arc<WeightedTree> {
        &self.tree
    }

    pub fn mass(&self, v: NodeId) -> &Rational {
        &self.mass[v.0]
    }

    pub fn masses(&self) -> &[Rational] {
        &self.mass
    }

    /// `mu(Q*)`: mass of the whole subtree of `v`, `v` included.
    pub fn subtree_mass(&self, v: NodeId) -> &Rational {
        &self.subtree[v.0]
    }

    pub fn total(&self) -> &Rational {
        &self.subtree[0]
    }

    pub fn scaled(&self, c: &Rational) -> Result<Self> {
        Self::new(self.tree.clone(), self.mass.iter().map(|m| m * c).collect())
    }

    pub fn is_zero(&self) -> bool {
        self.mass.iter().all(Zero::is_zero)
    }
}

pub fn subtree_mass(m: &TreeMeasure, q: NodeId) -> Result<Rational> {
    m.tree().check(q)?;
    Ok(m.subtree_mass(q).clone())
}

fn sup_ratio(m: &TreeMeasure, numerator: impl Fn(NodeId) -> Rational) -> Supremum {
    let tree = m.tree();
    let mut best = Supremum {
        value: numerator(tree.root()) / tree.sigma(tree.root()),
        argmax: tree.root(),
    };
    // NodeId order is shallowest-then-lexicographic; strict > keeps the first.
    for v in tree.nodes().skip(1) {
        let r = numerator(v) / tree.sigma(v);
        if r > best.value {
            best = Supremum { value: r, argmax: v };
        }
    }
    best
}

/// `C1(mu) = max_Q mu(Q*) / sigma(Q)`.
pub fn carleson_constant(m: &TreeMeasure) -> Supremum {
    sup_ratio(m, |v| m.subtree_mass(v).clone())
}

/// `C2(nu) = max_Q nu(T(Q)) / sigma(Q)`.
pub fn top_constant(m: &TreeMeasure) -> Supremum {
    sup_ratio(m, |v| m.mass(v).clone())
}

/// A weighted point `(x, t)` of the half-space over `[0,1)^d`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Atom {
    pub x: Vec<Rational>,
    pub t: Rational,
    pub w: Rational,
}

impl Atom {
    pub fn new(x: Vec<Rational>, t: Rational, w: Rational) -> Self {
        Atom { x, t, w }
    }

    /// Membership in the Carleson box `Q* = Q x (0, l(Q)]`.
    pub fn in_box(&self, q: &CubeId) -> bool {
        q.contains_point(&self.x) && self.t > Rational::zero() && self.t <= q.side()
    }

    /// Membership in the top layer `T(Q) = Q x (l(Q)/2, l(Q)]`.
    pub fn in_top_layer(&self, q: &CubeId) -> bool {
        let side = q.side();
        q.contains_point(&self.x) && self.t <= side && self.t > side / Rational::from_integer(2.into())
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct AtomicMeasure {
    pub atoms: Vec<Atom>,
}

impl AtomicMeasure {
    pub fn new(atoms: Vec<Atom>) -> Result<Self> {
        for (i, a) in atoms.iter().enumerate() {
            if !is_nonnegative(&a.w) {
                return Err(Error::Domain(format!("atom #{i} has negative weight")));
            }
            if a.t <= Rational::zero() || a.t > Rational::from_integer(1.into()) {
                return Err(Error::Domain(format!("atom #{i} has t outside (0,1]")));
            }
            if a.x.iter().any(|c| c < &Rational::zero() || c >= &Rational::from_integer(1.into())) {
                return Err(Error::Domain(format!("atom #{i} has x outside [0,1)^d")));
            }
        }
        if let Some(first) = atoms.first() {
            if atoms.iter().any(|a| a.x.len() != first.x.len()) {
                return Err(Error::Domain("atoms of mixed dimension".into()));
            }
        }
        Ok(AtomicMeasure { atoms })
    }

    pub fn empty() -> Self {
        AtomicMeasure::default()
    }

    pub fn total(&self) -> Rational {
        self.atoms.iter().map(|a| a.w.clone()).sum()
    }

    /// Atomic mass of the Carleson box `Q*`.
    pub fn box_mass(&self, q: &CubeId) -> Rational {
        self.atoms
            .iter()
            .filter(|a| a.in_box(q))
            .map(|a| a.w.clone())
            .sum()
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }
}

/// Level `n` with `2^-(n+1) < t <= 2^-n`.
fn top_layer_level(t: &Rational) -> u32 {
    let mut n = 0;
    while t <= &pow2_neg(n + 1) {
        n += 1;
    }
    n
}

/// Bin every atom into the node whose top layer `T(Q)` holds it.
pub fn tree_measure_from_atoms(m: &AtomicMeasure, tree: Arc<WeightedTree>) -> Result<TreeMeasure> {
    let d = match tree.kind() {
        TreeKind::Dyadic { d } => *d,
        TreeKind::Generic => {
            return Err(Error::Domain(
                "atomic measures bin only into dyadic trees".into(),
            ))
        }
    };
    let depth = tree.depth();
    let floor = pow2_neg(depth + 1);
    let mut mass = vec![Rational::zero(); tree.len()];
    for (i, atom) in m.atoms.iter().enumerate() {
        if atom.x.len() != d {
            return Err(Error::Domain(format!(
                "atom #{i} has dimension {} but the tree has d = {d}",
                atom.x.len()
            )));
        }
        if atom.t <= floor {
            return Err(Error::DepthInsufficient {
                atom: i,
                t: format_rational(&atom.t),
                floor: format_rational(&floor),
                depth,
            });
        }
        let cube = locate(&atom.x, top_layer_level(&atom.t))?;
        let v = tree
            .find(&cube)
            .ok_or_else(|| Error::UnknownNode(cube.to_string()))?;
        mass[v.0] += &atom.w;
    }
    TreeMeasure::new(tree, mass)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{frac, int};
    use proptest::prelude::*;

    fn dyadic(d: usize, depth: u32) -> Arc<WeightedTree> {
        Arc::new(WeightedTree::dyadic(d, depth).unwrap())
    }

    fn node(t: &WeightedTree, level: u32, index: &[u64]) -> NodeId {
        t.find(&CubeId::new(level, index.to_vec()).unwrap()).unwrap()
    }

    fn left_quarter() -> TreeMeasure {
        let t = dyadic(1, 1);
        let l = node(&t, 1, &[0]);
        TreeMeasure::from_fn(t, |_, v| if v == l { frac(1, 4) } else { int(0) }).unwrap()
    }

    #[test]
    fn single_atom_bins_to_root() {
        let t = dyadic(1, 2);
        let m = AtomicMeasure::new(vec![Atom::new(vec![frac(3, 10)], frac(6, 10), int(1))]).unwrap();
        let tm = tree_measure_from_atoms(&m, t.clone()).unwrap();
        assert_eq!(tm.mass(t.root()), &int(1));
        assert_eq!(tm.total(), &int(1));
        assert!(t.nodes().skip(1).all(|v| tm.mass(v).is_zero()));
    }

    #[test]
    fn empty_atoms_give_zero_measure() {
        let tm = tree_measure_from_atoms(&AtomicMeasure::empty(), dyadic(1, 2)).unwrap();
        assert!(tm.is_zero());
    }

    #[test]
    fn two_atoms_bin_to_level_one() {
        let t = dyadic(1, 2);
        let m = AtomicMeasure::new(vec![
            Atom::new(vec![frac(1, 10)], frac(4, 10), frac(1, 2)),
            Atom::new(vec![frac(6, 10)], frac(4, 10), frac(1, 2)),
        ])
        .unwrap();
        let tm = tree_measure_from_atoms(&m, t.clone()).unwrap();
        assert_eq!(tm.mass(node(&t, 1, &[0])), &frac(1, 2));
        assert_eq!(tm.mass(node(&t, 1, &[1])), &frac(1, 2));
        assert_eq!(tm.total(), &int(1));
    }

    #[test]
    fn atom_below_deepest_layer_is_rejected() {
        let m = AtomicMeasure::new(vec![Atom::new(vec![frac(1, 10)], frac(1, 8), int(1))]).unwrap();
        let err = tree_measure_from_atoms(&m, dyadic(1, 2)).unwrap_err();
        assert!(matches!(err, Error::DepthInsufficient { atom: 0, .. }));
    }

    #[test]
    fn subtree_sums() {
        let m = left_quarter();
        let t = m.tree();
        assert_eq!(subtree_mass(&m, t.root()).unwrap(), frac(1, 4));
        assert_eq!(subtree_mass(&m, node(t, 1, &[0])).unwrap(), frac(1, 4));
        assert!(subtree_mass(&m, NodeId(99)).is_err());
        let z = TreeMeasure::zero(dyadic(1, 1));
        assert!(z.tree().nodes().all(|v| z.subtree_mass(v).is_zero()));
    }

    #[test]
    fn carleson_constant_of_left_quarter() {
        let m = left_quarter();
        let sup = carleson_constant(&m);
        assert_eq!(sup.value, frac(1, 2));
        assert_eq!(m.tree().label(sup.argmax), &CubeId::new(1, vec![0]).unwrap());
        let top = top_constant(&m);
        assert_eq!(top.value, frac(1, 2));
    }

    #[test]
    fn zero_measure_constants_are_zero() {
        let z = TreeMeasure::zero(dyadic(2, 2));
        assert!(carleson_constant(&z).value.is_zero());
        assert!(top_constant(&z).value.is_zero());
        assert_eq!(carleson_constant(&z).argmax, z.tree().root());
    }

    #[test]
    fn uniform_layers_accumulate_along_chain() {
        // mass c * sigma on every node: C1 = (D + 1) c at the root.
        let c = frac(3, 7);
        let t = dyadic(1, 3);
        let m = TreeMeasure::from_fn(t.clone(), |t, v| &c * t.sigma(v)).unwrap();
        // Brute force: sum over every descendant, no cached sums.
        let brute = t
            .nodes()
            .map(|q| {
                let s: Rational = t.nodes().filter(|&u| t.is_descendant(u, q)).map(|u| &c * t.sigma(u)).sum();
                s / t.sigma(q)
            })
            .max()
            .unwrap();
        assert_eq!(brute, &c * int(4));
        assert_eq!(carleson_constant(&m).value, brute);
        assert_eq!(carleson_constant(&m).argmax, t.root());
        assert_eq!(top_constant(&m).value, c);
    }

    #[test]
    fn negative_mass_rejected() {
        let t = dyadic(1, 1);
        assert!(TreeMeasure::new(t, vec![int(0), int(-1), int(0)]).is_err());
    }

    proptest! {
        #[test]
        fn top_constant_never_exceeds_carleson(masses in proptest::collection::vec(0i64..20, 15)) {
            let t = dyadic(1, 3);
            let m = TreeMeasure::new(t, masses.into_iter().map(|k| frac(k, 16)).collect()).unwrap();
            prop_assert!(top_constant(&m).value <= carleson_constant(&m).value);
        }

        #[test]
        fn binning_preserves_mass_and_boxes(
            raw in proptest::collection::vec((0i64..64, 5i64..=64, 0i64..10), 0..30)
        ) {
            let depth = 4;
            let t = dyadic(1, depth);
            let atoms: Vec<Atom> = raw.iter()
                .map(|&(x, t, w)| Atom::new(vec![frac(x, 64)], frac(t, 64), frac(w, 3)))
                .collect();
            let m = AtomicMeasure::new(atoms).unwrap();
            let tm = tree_measure_from_atoms(&m, t.clone()).unwrap();
            prop_assert_eq!(tm.total(), &m.total());
            for v in t.nodes() {
                prop_assert_eq!(tm.subtree_mass(v), &m.box_mass(t.label(v)));
            }
        }
    }
}
