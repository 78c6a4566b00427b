//! Dyadic cubes in `[0,1)^d` and the finite weighted trees the stopping-time
//! machinery runs on.
//!
//! Cubes are half-open in every coordinate, so each point of `[0,1)^d` lies in
//! exactly one cube per level and cube boundaries never carry mass.
//!
//! A [`WeightedTree`] stores its nodes so that `NodeId` order is "shallowest
//! first, then lexicographic by label". Every deterministic tie-break in the
//! crate is "smallest `NodeId`".

use std::collections::HashMap;
use std::fmt;

use num::bigint::BigInt;
use num::traits::{ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rational::{frac, is_positive, pow2_neg, Rational};

/// Address of a dyadic cube: `prod_k [j_k 2^-n, (j_k + 1) 2^-n)`.
///
/// Trees that are not geometric (Christ trees) reuse this type as a
/// `(depth, [ordinal])` label.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CubeId {
    pub level: u32,
    pub index: Vec<u64>,
}

impl CubeId {
    pub fn new(level: u32, index: Vec<u64>) -> Result<Self> {
        let side = 1u64
            .checked_shl(level)
            .ok_or_else(|| Error::Domain(format!("level {level} too deep")))?;
        if index.iter().any(|&j| j >= side) {
            return Err(Error::Domain(format!(
                "index {index:?} out of range for level {level}"
            )));
        }
        Ok(CubeId { level, index })
    }

    pub fn root(d: usize) -> Self {
        CubeId {
            level: 0,
            index: vec![0; d],
        }
    }

    pub fn dim(&self) -> usize {
        self.index.len()
    }

    /// `ℓ(Q) = 2^-n`.
    pub fn side(&self) -> Rational {
        pow2_neg(self.level)
    }

    /// `|Q| = 2^-nd`.
    pub fn volume(&self) -> Rational {
        pow2_neg(self.level * self.dim() as u32)
    }

    /// Lower and upper corners `a_k`, `b_k`.
    pub fn bounds(&self) -> Vec<(Rational, Rational)> {
        let side = self.side();
        self.index
            .iter()
            .map(|&j| {
                let a = Rational::from_integer(BigInt::from(j)) * &side;
                let b = &a + &side;
                (a, b)
            })
            .collect()
    }

    /// The `2^d` children in lexicographic index order.
    pub fn children(&self) -> Vec<CubeId> {
        let d = self.dim();
        (0..1u64 << d)
            .map(|bits| CubeId {
                level: self.level + 1,
                // First coordinate is the most significant bit so the
                // enumeration is lexicographic.
                index: (0..d)
                    .map(|k| 2 * self.index[k] + ((bits >> (d - 1 - k)) & 1))
                    .collect(),
            })
            .collect()
    }

    pub fn parent(&self) -> Option<CubeId> {
        (self.level > 0).then(|| CubeId {
            level: self.level - 1,
            index: self.index.iter().map(|j| j / 2).collect(),
        })
    }

    /// Ancestor (or self) at a shallower level.
    pub fn ancestor_at(&self, level: u32) -> Option<CubeId> {
        (level <= self.level).then(|| {
            let shift = self.level - level;
            CubeId {
                level,
                index: self.index.iter().map(|j| j >> shift).collect(),
            }
        })
    }

    /// Half-open containment; reflexive.
    pub fn is_subcube_of(&self, other: &CubeId) -> bool {
        self.dim() == other.dim() && self.ancestor_at(other.level).as_ref() == Some(other)
    }

    pub fn contains_point(&self, x: &[Rational]) -> bool {
        x.len() == self.dim()
            && self
                .bounds()
                .iter()
                .zip(x)
                .all(|((a, b), xk)| a <= xk && xk < b)
    }

    /// Interiors are disjoint iff neither cube contains the other.
    pub fn is_disjoint_from(&self, other: &CubeId) -> bool {
        !self.is_subcube_of(other) && !other.is_subcube_of(self)
    }
}

impl fmt::Display for CubeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:", self.level)?;
        for (k, j) in self.index.iter().enumerate() {
            if k > 0 {
                f.write_str(",")?;
            }
            write!(f, "{j}")?;
        }
        Ok(())
    }
}

pub fn child_cubes(q: &CubeId) -> Vec<CubeId> {
    q.children()
}

pub fn is_subcube(q1: &CubeId, q2: &CubeId) -> bool {
    q1.is_subcube_of(q2)
}

/// The unique level-`level` cube containing `x`.
pub fn locate(x: &[Rational], level: u32) -> Result<CubeId> {
    if x.is_empty() {
        return Err(Error::Domain("point has no coordinates".into()));
    }
    let scale = Rational::from_integer(BigInt::from(1u64) << level);
    let index = x
        .iter()
        .map(|xk| {
            if xk < &Rational::zero() || xk >= &Rational::from_integer(1.into()) {
                return Err(Error::Domain(format!(
                    "coordinate {xk} outside [0,1)"
                )));
            }
            (xk * &scale)
                .floor()
                .to_integer()
                .to_u64()
                .ok_or_else(|| Error::Domain("index overflow".into()))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CubeId { level, index })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(pub usize);

impl NodeId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum TreeKind {
    /// Full `2^d`-ary tree of dyadic subcubes of `[0,1)^d`.
    Dyadic { d: usize },
    /// Any other partition tree (e.g. Christ cubes); labels are `(depth, [ordinal])`.
    Generic,
}

#[derive(Clone, Debug)]
struct Node {
    label: CubeId,
    level: u32,
    parent: Option<NodeId>,
    children: Vec<NodeId>,
    sigma: Rational,
}

/// A finite rooted tree whose children partition their parent:
/// `sum sigma(children) = sigma(parent)` and `sigma(child) <= theta * sigma(parent)`.
#[derive(Clone, Debug)]
pub struct WeightedTree {
    kind: TreeKind,
    nodes: Vec<Node>,
    theta: Rational,
    depth: u32,
    by_label: HashMap<CubeId, NodeId>,
    by_level: Vec<Vec<NodeId>>,
    // Pre-order positions; the subtree of v is `preorder[enter[v]..exit[v]]`.
    preorder: Vec<NodeId>,
    enter: Vec<usize>,
    exit: Vec<usize>,
}

/// One node handed to [`WeightedTree::from_nodes`].
#[derive(Clone, Debug)]
pub struct NodeSpec {
    pub label: CubeId,
    pub parent: Option<usize>,
    pub sigma: Rational,
}

impl WeightedTree {
    /// The dyadic tree of `[0,1)^d` down to level `depth`; `sigma = |Q|`,
    /// `theta = 2^-d`.
    pub fn dyadic(d: usize, depth: u32) -> Result<Self> {
        if d == 0 {
            return Err(Error::Domain("dimension must be at least 1".into()));
        }
        if (d as u32) * depth > 40 {
            return Err(Error::Size(format!(
                "dyadic tree with d = {d}, depth = {depth} is too large"
            )));
        }
        let mut specs: Vec<NodeSpec> = Vec::new();
        let mut position: HashMap<CubeId, usize> = HashMap::new();
        let mut level_cubes = vec![CubeId::root(d)];
        for level in 0..=depth {
            let mut sorted = level_cubes.clone();
            sorted.sort();
            for cube in &sorted {
                let parent = cube.parent().map(|p| position[&p]);
                position.insert(cube.clone(), specs.len());
                specs.push(NodeSpec {
                    label: cube.clone(),
                    parent,
                    sigma: cube.volume(),
                });
            }
            if level < depth {
                level_cubes = sorted.iter().flat_map(|c| c.children()).collect();
            }
        }
        Self::build(TreeKind::Dyadic { d }, specs, Some(pow2_neg(d as u32)))
    }

    /// A generic tree. Node order must list parents before children and be
    /// sorted by `(depth, label)`; `theta` is the largest child/parent ratio and
    /// must be `< 1`.
    pub fn from_nodes(specs: Vec<NodeSpec>) -> Result<Self> {
        Self::build(TreeKind::Generic, specs, None)
    }

    fn build(kind: TreeKind, specs: Vec<NodeSpec>, theta: Option<Rational>) -> Result<Self> {
        if specs.is_empty() {
            return Err(Error::Domain("tree has no nodes".into()));
        }
        let mut nodes: Vec<Node> = Vec::with_capacity(specs.len());
        for (i, spec) in specs.into_iter().enumerate() {
            if !is_positive(&spec.sigma) {
                return Err(Error::Domain(format!(
                    "node {} has non-positive sigma",
                    spec.label
                )));
            }
            let level = match spec.parent {
                None if i == 0 => 0,
                None => return Err(Error::Domain("only the first node may be the root".into())),
                Some(p) if p < i => nodes[p].level + 1,
                Some(_) => {
                    return Err(Error::Domain(format!(
                        "node {} listed before its parent",
                        spec.label
                    )))
                }
            };
            if let Some(prev) = nodes.last() {
                if (prev.level, &prev.label) >= (level, &spec.label) {
                    return Err(Error::Domain(format!(
                        "nodes not sorted by (depth, label) at {}",
                        spec.label
                    )));
                }
            }
            if let Some(p) = spec.parent {
                nodes[p].children.push(NodeId(i));
            }
            nodes.push(Node {
                label: spec.label,
                level,
                parent: spec.parent.map(NodeId),
                children: Vec::new(),
                sigma: spec.sigma,
            });
        }

        let mut max_ratio = Rational::zero();
        for node in &nodes {
            if node.children.is_empty() {
                continue;
            }
            let mut total = Rational::zero();
            for c in &node.children {
                let s = &nodes[c.0].sigma;
                total += s;
                let ratio = s / &node.sigma;
                if ratio > max_ratio {
                    max_ratio = ratio;
                }
            }
            if total != node.sigma {
                return Err(Error::Domain(format!(
                    "children of {} do not partition it: {} != {}",
                    node.label, total, node.sigma
                )));
            }
        }
        let theta = match theta {
            Some(t) => {
                if max_ratio > t {
                    return Err(Error::Domain(format!(
                        "child ratio {max_ratio} exceeds theta {t}"
                    )));
                }
                t
            }
            None if max_ratio.is_zero() => frac(1, 2),
            None => max_ratio,
        };
        if theta >= Rational::from_integer(1.into()) {
            return Err(Error::Domain(
                "theta must be < 1 (collapse unary chains first)".into(),
            ));
        }

        let depth = nodes.iter().map(|n| n.level).max().unwrap_or(0);
        let mut by_level = vec![Vec::new(); depth as usize + 1];
        let mut by_label = HashMap::with_capacity(nodes.len());
        for (i, n) in nodes.iter().enumerate() {
            by_level[n.level as usize].push(NodeId(i));
            if by_label.insert(n.label.clone(), NodeId(i)).is_some() {
                return Err(Error::Domain(format!("duplicate label {}", n.label)));
            }
        }

        let mut preorder = Vec::with_capacity(nodes.len());
        let mut enter = vec![0; nodes.len()];
        let mut exit = vec![0; nodes.len()];
        let mut stack = vec![(NodeId(0), false)];
        while let Some((v, done)) = stack.pop() {
            if done {
                exit[v.0] = preorder.len();
                continue;
            }
            enter[v.0] = preorder.len();
            preorder.push(v);
            stack.push((v, true));
            for c in nodes[v.0].children.iter().rev() {
                stack.push((*c, false));
            }
        }

        Ok(WeightedTree {
            kind,
            nodes,
            theta,
            depth,
            by_label,
            by_level,
            preorder,
            enter,
            exit,
        })
    }

    pub fn kind(&self) -> &TreeKind {
        &self.kind
    }

    pub fn dimension(&self) -> Option<usize> {
        match self.kind {
            TreeKind::Dyadic { d } => Some(d),
            TreeKind::Generic => None,
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn root(&self) -> NodeId {
        NodeId(0)
    }

    pub fn depth(&self) -> u32 {
        self.depth
    }

    pub fn theta(&self) -> &Rational {
        &self.theta
    }

    pub fn nodes(&self) -> impl DoubleEndedIterator<Item = NodeId> + ExactSizeIterator {
        (0..self.nodes.len()).map(NodeId)
    }

    pub fn contains(&self, v: NodeId) -> bool {
        v.0 < self.nodes.len()
    }

    pub fn check(&self, v: NodeId) -> Result<()> {
        if self.contains(v) {
            Ok(())
        } else {
            Err(Error::UnknownNode(format!("#{}", v.0)))
        }
    }

    pub fn label(&self, v: NodeId) -> &CubeId {
        &self.nodes[v.0].label
    }

    pub fn find(&self, label: &CubeId) -> Option<NodeId> {
        self.by_label.get(label).copied()
    }

    pub fn level(&self, v: NodeId) -> u32 {
        self.nodes[v.0].level
    }

    pub fn sigma(&self, v: NodeId) -> &Rational {
        &self.nodes[v.0].sigma
    }

    pub fn parent(&self, v: NodeId) -> Option<NodeId> {
        self.nodes[v.0].parent
    }

    pub fn children(&self, v: NodeId) -> &[NodeId] {
        &self.nodes[v.0].children
    }

    pub fn is_leaf(&self, v: NodeId) -> bool {
        self.nodes[v.0].children.is_empty()
    }

    pub fn level_nodes(&self, level: u32) -> &[NodeId] {
        self.by_level
            .get(level as usize)
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    /// `a` lies in the subtree of `b` (reflexive).
    pub fn is_descendant(&self, a: NodeId, b: NodeId) -> bool {
        self.enter[b.0] <= self.enter[a.0] && self.enter[a.0] < self.exit[b.0]
    }

    pub fn comparable(&self, a: NodeId, b: NodeId) -> bool {
        self.is_descendant(a, b) || self.is_descendant(b, a)
    }

    /// Nodes of the subtree of `v` in pre-order (parents before children).
    pub fn subtree(&self, v: NodeId) -> &[NodeId] {
        &self.preorder[self.enter[v.0]..self.exit[v.0]]
    }

    pub fn subtree_size(&self, v: NodeId) -> usize {
        self.exit[v.0] - self.enter[v.0]
    }

    /// `E_k(v)`: descendants exactly `k` levels below `v`, in `NodeId` order.
    pub fn descendants_at(&self, v: NodeId, k: u32) -> Vec<NodeId> {
        let mut out: Vec<NodeId> = self
            .subtree(v)
            .iter()
            .copied()
            .filter(|&u| self.level(u) == self.level(v) + k)
            .collect();
        out.sort();
        out
    }

    /// Ancestors of `v` from `v` itself up to the root.
    pub fn ancestors(&self, v: NodeId) -> impl Iterator<Item = NodeId> + '_ {
        std::iter::successors(Some(v), move |&u| self.parent(u))
    }

    /// Pre-order position of every node; useful for array-backed subtree scans.
    pub fn preorder(&self) -> &[NodeId] {
        &self.preorder
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::int;
    use proptest::prelude::*;

    fn cube(level: u32, index: &[u64]) -> CubeId {
        CubeId::new(level, index.to_vec()).unwrap()
    }

    #[test]
    fn children_of_unit_interval() {
        assert_eq!(
            child_cubes(&cube(0, &[0])),
            vec![cube(1, &[0]), cube(1, &[1])]
        );
        assert_eq!(
            child_cubes(&cube(1, &[1])),
            vec![cube(2, &[2]), cube(2, &[3])]
        );
    }

    #[test]
    fn quadrants_are_lexicographic() {
        assert_eq!(
            child_cubes(&cube(0, &[0, 0])),
            vec![
                cube(1, &[0, 0]),
                cube(1, &[0, 1]),
                cube(1, &[1, 0]),
                cube(1, &[1, 1])
            ]
        );
    }

    #[test]
    fn subcube_relation() {
        assert!(is_subcube(&cube(2, &[0]), &cube(1, &[0])));
        assert!(!is_subcube(&cube(2, &[1]), &cube(1, &[1])));
        assert!(is_subcube(&cube(3, &[5]), &cube(3, &[5])));
        assert!(!is_subcube(&cube(1, &[0]), &cube(2, &[0])));
    }

    #[test]
    fn locate_uses_half_open_rule() {
        assert_eq!(locate(&[frac(3, 10)], 1).unwrap(), cube(1, &[0]));
        assert_eq!(locate(&[frac(1, 2)], 1).unwrap(), cube(1, &[1]));
        assert_eq!(
            locate(&[frac(7, 10), frac(2, 10)], 1).unwrap(),
            cube(1, &[1, 0])
        );
        assert!(matches!(locate(&[int(1)], 2), Err(Error::Domain(_))));
        assert!(matches!(locate(&[frac(-1, 3)], 0), Err(Error::Domain(_))));
    }

    #[test]
    fn cube_out_of_range_is_rejected() {
        assert!(CubeId::new(1, vec![2]).is_err());
    }

    #[test]
    fn dyadic_tree_shape() {
        let t = WeightedTree::dyadic(2, 2).unwrap();
        assert_eq!(t.len(), 1 + 4 + 16);
        assert_eq!(t.theta(), &frac(1, 4));
        for v in t.nodes() {
            if !t.is_leaf(v) {
                assert_eq!(t.children(v).len(), 4);
            }
            assert_eq!(t.sigma(v), &t.label(v).volume());
        }
        // NodeId order is (level, lexicographic index).
        let labels: Vec<_> = t.nodes().map(|v| t.label(v).clone()).collect();
        let mut sorted = labels.clone();
        sorted.sort();
        assert_eq!(labels, sorted);
    }

    #[test]
    fn descendant_queries() {
        let t = WeightedTree::dyadic(1, 3).unwrap();
        let l = t.find(&cube(1, &[0])).unwrap();
        let ll = t.find(&cube(2, &[1])).unwrap();
        let r = t.find(&cube(1, &[1])).unwrap();
        assert!(t.is_descendant(ll, l));
        assert!(!t.is_descendant(ll, r));
        assert_eq!(t.subtree_size(l), 7);
        assert_eq!(t.descendants_at(l, 2).len(), 4);
        assert_eq!(t.ancestors(ll).count(), 3);
    }

    #[test]
    fn generic_tree_validates_partition() {
        let specs = vec![
            NodeSpec { label: cube(0, &[0]), parent: None, sigma: int(1) },
            NodeSpec { label: cube(1, &[0]), parent: Some(0), sigma: frac(1, 3) },
            NodeSpec { label: cube(1, &[1]), parent: Some(0), sigma: frac(1, 3) },
        ];
        assert!(WeightedTree::from_nodes(specs.clone()).is_err());
        let mut fixed = specs;
        fixed[2].sigma = frac(2, 3);
        let t = WeightedTree::from_nodes(fixed).unwrap();
        assert_eq!(t.theta(), &frac(2, 3));
    }

    #[test]
    fn unary_chain_rejected() {
        let specs = vec![
            NodeSpec { label: cube(0, &[0]), parent: None, sigma: int(1) },
            NodeSpec { label: cube(1, &[0]), parent: Some(0), sigma: int(1) },
        ];
        assert!(WeightedTree::from_nodes(specs).is_err());
    }

    fn unit_point(d: usize) -> impl Strategy<Value = Vec<Rational>> {
        proptest::collection::vec((0i64..1000).prop_map(|n| frac(n, 1000)), d)
    }

    proptest! {
        #[test]
        fn locate_refines(x in unit_point(2), n in 0u32..8) {
            let here = locate(&x, n).unwrap();
            let below = locate(&x, n + 1).unwrap();
            prop_assert_eq!(below.parent().unwrap(), here.clone());
            prop_assert!(here.contains_point(&x));
            // Exactly one cube of the level contains x.
            let siblings = here.parent().map(|p| p.children()).unwrap_or_else(|| vec![here.clone()]);
            prop_assert_eq!(siblings.iter().filter(|c| c.contains_point(&x)).count(), 1);
        }

        #[test]
        fn children_partition_sigma(d in 1usize..3, depth in 0u32..4) {
            let t = WeightedTree::dyadic(d, depth).unwrap();
            for v in t.nodes() {
                if t.is_leaf(v) { continue; }
                let total: Rational = t.children(v).iter().map(|c| t.sigma(*c).clone()).sum();
                prop_assert_eq!(&total, t.sigma(v));
                for c in t.children(v) {
                    prop_assert!(t.sigma(*c) <= &(t.theta() * t.sigma(v)));
                }
            }
        }
    }
}
