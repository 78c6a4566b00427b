//! Brute-force reference implementations for small trees.
//!
//! Nothing here calls into `extrapolation`; membership is decided by walking
//! parent pointers and sums are plain loops. Exhaustive modes refuse subtrees
//! with more than [`NODE_CAP`] nodes.

use crate::error::{Error, Result};
use crate::extrapolation::StoppingFamily;
use crate::measures::TreeMeasure;
use crate::rational::Rational;
use crate::tree::{NodeId, WeightedTree};

pub const NODE_CAP: usize = 31;

fn check_cap(tree: &WeightedTree, q: NodeId) -> Result<()> {
    tree.check(q)?;
    let n = tree.subtree_size(q);
    if n > NODE_CAP {
        return Err(Error::Size(format!(
            "subtree of {} has {n} nodes; exhaustive modes stop at {NODE_CAP}",
            tree.label(q)
        )));
    }
    Ok(())
}

/// `u` lies in the subtree of `v` (walks parent pointers).
pub fn is_under(tree: &WeightedTree, u: NodeId, v: NodeId) -> bool {
    let mut cur = Some(u);
    while let Some(w) = cur {
        if w == v {
            return true;
        }
        cur = tree.parent(w);
    }
    false
}

fn nodes_under(tree: &WeightedTree, v: NodeId) -> Vec<NodeId> {
    tree.nodes().filter(|&u| is_under(tree, u, v)).collect()
}

fn zero() -> Rational {
    Rational::from_integer(0.into())
}

// ---- naive measures ---------------------------------------------------------

pub fn naive_subtree_mass(mu: &TreeMeasure, v: NodeId) -> Rational {
    let tree = mu.tree();
    let mut total = zero();
    for u in tree.nodes() {
        if is_under(tree, u, v) {
            total += mu.mass(u);
        }
    }
    total
}

/// `(C1, first argmax)`.
pub fn naive_carleson_constant(mu: &TreeMeasure) -> (Rational, NodeId) {
    let tree = mu.tree();
    let mut best = (zero(), tree.root());
    for v in tree.nodes() {
        let r = naive_subtree_mass(mu, v) / tree.sigma(v);
        if r > best.0 {
            best = (r, v);
        }
    }
    best
}

/// `(C2, first argmax)`.
pub fn naive_top_constant(mu: &TreeMeasure) -> (Rational, NodeId) {
    let tree = mu.tree();
    let mut best = (zero(), tree.root());
    for v in tree.nodes() {
        let r = mu.mass(v) / tree.sigma(v);
        if r > best.0 {
            best = (r, v);
        }
    }
    best
}

pub fn naive_bad_set(mu: &TreeMeasure, delta: &Rational) -> Vec<NodeId> {
    let tree = mu.tree();
    tree.nodes()
        .filter(|&v| mu.mass(v) >= &(delta * tree.sigma(v)))
        .collect()
}

/// `mu(Qp* \ U_F Q''*) / sigma(Qp)` summed node by node.
pub fn naive_local_excess(mu: &TreeMeasure, qp: NodeId, family: &[NodeId]) -> Rational {
    let tree = mu.tree();
    let mut total = zero();
    for u in tree.nodes() {
        if is_under(tree, u, qp) && !family.iter().any(|&f| is_under(tree, u, f)) {
            total += mu.mass(u);
        }
    }
    total / tree.sigma(qp)
}

/// The first node of the subtree of `q`, in node order (shallowest, then
/// lexicographic), whose excess exceeds `delta`.
pub fn naive_smallness_violator(
    mu: &TreeMeasure,
    q: NodeId,
    family: &[NodeId],
    delta: &Rational,
) -> Option<NodeId> {
    let tree = mu.tree();
    tree.nodes()
        .filter(|&v| is_under(tree, v, q))
        .find(|&v| &naive_local_excess(mu, v, family) > delta)
}

// ---- antichain enumeration --------------------------------------------------

fn antichains_below(tree: &WeightedTree, v: NodeId) -> Vec<Vec<NodeId>> {
    let mut acc: Vec<Vec<NodeId>> = vec![Vec::new()];
    for &c in tree.children(v) {
        let mut options = vec![vec![c]];
        options.extend(antichains_below(tree, c));
        let mut next = Vec::with_capacity(acc.len() * options.len());
        for a in &acc {
            for o in &options {
                let mut f = a.clone();
                f.extend_from_slice(o);
                next.push(f);
            }
        }
        acc = next;
    }
    acc
}

/// Every antichain of strict descendants of `q`, once each, ordered by size
/// and then by the sorted member list.
pub fn enumerate_families(q: NodeId, tree: &WeightedTree) -> Result<Vec<StoppingFamily>> {
    check_cap(tree, q)?;
    let mut all = antichains_below(tree, q);
    for f in &mut all {
        f.sort();
    }
    all.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
    all.into_iter()
        .map(|f| StoppingFamily::new(tree, q, f))
        .collect()
}

/// Number of antichains of strict descendants, `a(v) = prod_c (1 + a(c))`.
pub fn antichain_count(tree: &WeightedTree, v: NodeId) -> u128 {
    tree.children(v).iter().map(|&c| 1 + antichain_count(tree, c)).product()
}

// ---- minimality --------------------------------------------------------------

fn covered_by(tree: &WeightedTree, u: NodeId, family: &[NodeId]) -> bool {
    family.iter().any(|&f| is_under(tree, u, f))
}

/// Why `family` is not a minimal construction output, or `None` when it is.
///
/// The steps are rebuilt from the family alone: `F_n` is the part of the family
/// at relative depth `<= n`, `R_{n+1}` the uncovered nodes at depth `n + 1`,
/// `S_{n+1}` the good members in `R_{n+1}`.
pub fn explain_non_minimality(
    mu: &TreeMeasure,
    q: NodeId,
    delta: &Rational,
    family: &StoppingFamily,
) -> Result<Option<String>> {
    check_cap(mu.tree(), q)?;
    let tree = mu.tree();
    let members: Vec<NodeId> = family.iter().collect();
    if let Some(v) = naive_smallness_violator(mu, q, &members, delta) {
        return Ok(Some(format!("smallness fails at {}", tree.label(v))));
    }
    let base = tree.level(q);
    let below = nodes_under(tree, q);
    let at = |k: u32| -> Vec<NodeId> {
        below.iter().copied().filter(|&u| tree.level(u) == base + k).collect()
    };
    let bad = |u: NodeId| mu.mass(u) >= &(delta * tree.sigma(u));
    let max_depth = below.iter().map(|&u| tree.level(u) - base).max().unwrap_or(0);
    for n in 0..max_depth {
        let f_n: Vec<NodeId> = members.iter().copied().filter(|&m| tree.level(m) - base <= n).collect();
        let remainder: Vec<NodeId> = at(n + 1).into_iter().filter(|&u| !covered_by(tree, u, &f_n)).collect();
        if remainder.is_empty() {
            break;
        }
        let forced: Vec<NodeId> = remainder.iter().copied().filter(|&u| bad(u)).collect();
        if let Some(&u) = forced.iter().find(|u| !members.contains(u)) {
            return Ok(Some(format!("bad remainder cube {} missing", tree.label(u))));
        }
        let s: Vec<NodeId> = remainder
            .iter()
            .copied()
            .filter(|u| !bad(*u) && members.contains(u))
            .collect();
        let completed = |s: &[NodeId]| -> Vec<NodeId> {
            let mut fam: Vec<NodeId> = f_n.iter().chain(s).chain(&forced).copied().collect();
            let next: Vec<NodeId> = at(n + 2).into_iter().filter(|&u| !covered_by(tree, u, &fam)).collect();
            fam.extend(next);
            fam
        };
        if naive_smallness_violator(mu, q, &completed(&s), delta).is_some() {
            return Ok(Some(format!("step {} selection is infeasible", n + 1)));
        }
        for &x in &s {
            let smaller: Vec<NodeId> = s.iter().copied().filter(|&y| y != x).collect();
            if naive_smallness_violator(mu, q, &completed(&smaller), delta).is_none() {
                return Ok(Some(format!(
                    "step {}: {} can be removed",
                    n + 1,
                    tree.label(x)
                )));
            }
        }
    }
    Ok(None)
}

/// True iff `family` satisfies the smallness condition at `q` and no single
/// selected cube of any step can be dropped while keeping that step feasible.
pub fn brute_force_minimal_check(
    mu: &TreeMeasure,
    q: NodeId,
    delta: &Rational,
    family: &StoppingFamily,
) -> Result<bool> {
    Ok(explain_non_minimality(mu, q, delta, family)?.is_none())
}

// ---- hypothesis ---------------------------------------------------------------

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Counterexample {
    pub q: NodeId,
    pub family: StoppingFamily,
    /// `nu(Q* \ U_F Q'*)`.
    pub region_mass: Rational,
    /// `C sigma(Q)`.
    pub allowed: Rational,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HypothesisCheck {
    pub pairs_checked: usize,
    pub admissible_pairs: usize,
    pub counterexample: Option<Counterexample>,
}

impl HypothesisCheck {
    pub fn holds(&self) -> bool {
        self.counterexample.is_none()
    }
}

/// Uncovered mass of every node below `q`, children before parents.
fn uncovered(m: &TreeMeasure, below: &[NodeId], covered: &[bool]) -> Vec<Rational> {
    let tree = m.tree();
    let mut out = vec![zero(); tree.len()];
    for &u in below.iter().rev() {
        if covered[u.0] {
            continue;
        }
        let mut s = m.mass(u).clone();
        for &c in tree.children(u) {
            s += &out[c.0];
        }
        out[u.0] = s;
    }
    out
}

/// Check `nu(Q* \ U_F Q'*) <= C sigma(Q)` for every cube `Q` and every
/// antichain `F` below it that satisfies the smallness condition for `mu`.
/// Stops at the first violation.
pub fn exhaustive_hypothesis_check(
    mu: &TreeMeasure,
    nu: &TreeMeasure,
    delta: &Rational,
    capc: &Rational,
) -> Result<HypothesisCheck> {
    let tree = mu.tree();
    if tree.len() > NODE_CAP {
        return Err(Error::Size(format!(
            "tree has {} nodes; exhaustive modes stop at {NODE_CAP}",
            tree.len()
        )));
    }
    if nu.tree().len() != tree.len() {
        return Err(Error::Domain("mu and nu live on different trees".into()));
    }
    let mut report = HypothesisCheck {
        pairs_checked: 0,
        admissible_pairs: 0,
        counterexample: None,
    };
    for q in tree.nodes() {
        let below = nodes_under(tree, q);
        let allowed = capc * tree.sigma(q);
        for family in enumerate_families(q, tree)? {
            report.pairs_checked += 1;
            let mut covered = vec![false; tree.len()];
            for f in family.iter() {
                for &u in &below {
                    if is_under(tree, u, f) {
                        covered[u.0] = true;
                    }
                }
            }
            let mu_left = uncovered(mu, &below, &covered);
            let small = below
                .iter()
                .all(|&u| mu_left[u.0] <= delta * tree.sigma(u));
            if !small {
                continue;
            }
            report.admissible_pairs += 1;
            let region_mass = uncovered(nu, &below, &covered)[q.0].clone();
            if region_mass > allowed {
                report.counterexample = Some(Counterexample {
                    q,
                    family,
                    region_mass,
                    allowed,
                });
                return Ok(report);
            }
        }
    }
    Ok(report)
}
