//! The stopping-time construction behind Carleson-measure extrapolation.
//!
//! For a cube `Q` that is not bad, the stopping family `F(Q)` is grown one
//! level at a time. At relative level `n + 1` the uncovered remainder
//! `R_{n+1}(Q)` is split into its bad part, which is always taken, and a good
//! part `S` chosen inclusion-minimal subject to the smallness condition
//!
//! ```text
//! mu(Q'* \ U_{F~} Q''*) <= delta * sigma(Q')   for every Q' in the subtree of Q,
//! ```
//!
//! where `F~` completes `F_{n+1}` by the still-uncovered cubes one level
//! further down. Generations `G_n(Q)` iterate `G_1` (children for bad cubes,
//! `F` for the rest) and their regions `U(Q')` partition the Carleson box.
//!
//! Everything works on any [`WeightedTree`]: the dyadic factor `2^d / (2^d - 1)`
//! appears as `1 / (1 - theta)`.

use std::cell::OnceCell;
use std::collections::{BTreeMap, BTreeSet};

use num::traits::{One, Zero};

use crate::error::{Error, Result};
use crate::measures::{carleson_constant, top_constant, TreeMeasure};
use crate::rational::{format_rational, is_positive, Rational};
use crate::tree::{NodeId, WeightedTree};

/// A pairwise-incomparable set of strict descendants of `scope`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StoppingFamily {
    scope: NodeId,
    members: BTreeSet<NodeId>,
}

impl StoppingFamily {
    pub fn new(
        tree: &WeightedTree,
        scope: NodeId,
        members: impl IntoIterator<Item = NodeId>,
    ) -> Result<Self> {
        tree.check(scope)?;
        let members: BTreeSet<NodeId> = members.into_iter().collect();
        for &m in &members {
            tree.check(m)?;
            if m == scope || !tree.is_descendant(m, scope) {
                return Err(Error::Domain(format!(
                    "{} is not a strict descendant of {}",
                    tree.label(m),
                    tree.label(scope)
                )));
            }
        }
        for &a in &members {
            for &b in members.range(a..).skip(1) {
                if tree.comparable(a, b) {
                    return Err(Error::Domain(format!(
                        "{} and {} are nested",
                        tree.label(a),
                        tree.label(b)
                    )));
                }
            }
        }
        Ok(StoppingFamily { scope, members })
    }

    pub fn empty(scope: NodeId) -> Self {
        StoppingFamily {
            scope,
            members: BTreeSet::new(),
        }
    }

    pub fn scope(&self) -> NodeId {
        self.scope
    }

    pub fn members(&self) -> &BTreeSet<NodeId> {
        &self.members
    }

    pub fn contains(&self, v: NodeId) -> bool {
        self.members.contains(&v)
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.members.iter().copied()
    }

    fn mask(&self, n: usize) -> Vec<bool> {
        let mut mask = vec![false; n];
        for m in &self.members {
            mask[m.0] = true;
        }
        mask
    }
}

/// `B = { Q : mu(T(Q)) >= delta * sigma(Q) }`; ties are bad.
pub fn bad_set(mu: &TreeMeasure, delta: &Rational) -> BTreeSet<NodeId> {
    let tree = mu.tree();
    tree.nodes()
        .filter(|&v| is_bad(mu, delta, v))
        .collect()
}

fn is_bad(mu: &TreeMeasure, delta: &Rational, v: NodeId) -> bool {
    mu.mass(v) >= &(delta * mu.tree().sigma(v))
}

/// `mu(Q'* \ U_{F} Q''*)` for every `Q'` in the subtree of `q`, indexed by node.
/// Nodes lying inside a family member get zero.
fn uncovered_masses(mu: &TreeMeasure, q: NodeId, in_family: &[bool]) -> Vec<Rational> {
    let tree = mu.tree();
    let sub = tree.subtree(q);
    let mut covered = vec![false; tree.len()];
    for &u in sub {
        let inherited = u != q && tree.parent(u).is_some_and(|p| covered[p.0]);
        covered[u.0] = in_family[u.0] || inherited;
    }
    let mut removed = vec![Rational::zero(); tree.len()];
    for &u in sub.iter().rev() {
        if in_family[u.0] {
            removed[u.0] = mu.subtree_mass(u).clone();
        } else {
            let mut sum = Rational::zero();
            for c in tree.children(u) {
                sum += &removed[c.0];
            }
            removed[u.0] = sum;
        }
    }
    let mut out = vec![Rational::zero(); tree.len()];
    for &u in sub {
        if !covered[u.0] {
            out[u.0] = mu.subtree_mass(u) - &removed[u.0];
        }
    }
    out
}

/// First (shallowest, then lexicographic) node of the subtree of `q` whose
/// uncovered mass exceeds `delta * sigma`.
fn first_violation(
    mu: &TreeMeasure,
    q: NodeId,
    in_family: &[bool],
    delta: &Rational,
) -> Option<NodeId> {
    let tree = mu.tree();
    let uncovered = uncovered_masses(mu, q, in_family);
    tree.subtree(q)
        .iter()
        .copied()
        .filter(|&u| uncovered[u.0] > delta * tree.sigma(u))
        .min()
}

/// `mu(Q'* \ U_F Q''*) / sigma(Q')`.
pub fn local_excess(mu: &TreeMeasure, qp: NodeId, f: &StoppingFamily) -> Result<Rational> {
    let tree = mu.tree();
    tree.check(qp)?;
    if !tree.is_descendant(qp, f.scope()) {
        return Err(Error::Precondition(format!(
            "{} is outside the scope {}",
            tree.label(qp),
            tree.label(f.scope())
        )));
    }
    let uncovered = uncovered_masses(mu, f.scope(), &f.mask(tree.len()));
    Ok(&uncovered[qp.0] / tree.sigma(qp))
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Smallness {
    pub holds: bool,
    /// Shallowest-then-lexicographic node whose excess exceeds `delta`.
    pub violator: Option<NodeId>,
}

pub fn smallness_holds(
    mu: &TreeMeasure,
    q: NodeId,
    f: &StoppingFamily,
    delta: &Rational,
) -> Result<Smallness> {
    let tree = mu.tree();
    tree.check(q)?;
    if f.scope() != q {
        return Err(Error::Precondition(format!(
            "family scoped at {} checked at {}",
            tree.label(f.scope()),
            tree.label(q)
        )));
    }
    let violator = first_violation(mu, q, &f.mask(tree.len()), delta);
    Ok(Smallness {
        holds: violator.is_none(),
        violator,
    })
}

/// One pass of the level-by-level construction.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StepRecord {
    /// Relative level `n + 1` of the cubes considered.
    pub level: u32,
    /// `R_{n+1}(Q)`.
    pub remainder: Vec<NodeId>,
    /// `B ∩ R_{n+1}(Q)`.
    pub bad: Vec<NodeId>,
    /// `S_{n+1}(Q)`.
    pub selected: Vec<NodeId>,
    /// Candidates that could not be dropped, each with the node whose
    /// smallness fails without it.
    pub certificates: Vec<(NodeId, NodeId)>,
}

#[derive(Clone, Debug)]
pub struct Augmentation {
    pub family: StoppingFamily,
    pub record: StepRecord,
}

/// `R_{n+1}(Q)`: cubes at relative level `n + 1` not inside a member of `F_n`.
fn remainder(tree: &WeightedTree, q: NodeId, f_n: &[bool], next_level: u32) -> Vec<NodeId> {
    tree.descendants_at(q, next_level)
        .into_iter()
        .filter(|&u| {
            !tree
                .ancestors(u)
                .take_while(|&a| a != q)
                .any(|a| f_n[a.0])
        })
        .collect()
}

/// `F~_S` as a node mask: `F_n ∪ S ∪ (B ∩ R)` plus the children of every
/// remainder cube left out.
fn completed_mask(
    tree: &WeightedTree,
    base: &[bool],
    remainder: &[NodeId],
    kept: &[bool],
) -> Vec<bool> {
    let mut mask = base.to_vec();
    for &r in remainder {
        if kept[r.0] {
            mask[r.0] = true;
        } else {
            for c in tree.children(r) {
                mask[c.0] = true;
            }
        }
    }
    mask
}

/// Grow `F_n(Q)` to `F_{n+1}(Q)`.
///
/// `S` starts as all of `R_{n+1} \ B`, which is feasible by the inductive
/// hypothesis, and each candidate is dropped in lexicographic order whenever
/// the smaller set stays feasible. Feasibility is monotone in `S`, so the
/// result admits no single deletion.
pub fn minimal_augmentation(
    mu: &TreeMeasure,
    q: NodeId,
    f_n: &StoppingFamily,
    n: u32,
    delta: &Rational,
) -> Result<Augmentation> {
    let tree = mu.tree();
    tree.check(q)?;
    if f_n.scope() != q {
        return Err(Error::Precondition("family scoped at a different node".into()));
    }
    let size = tree.len();
    let base = f_n.mask(size);
    let rem = remainder(tree, q, &base, n + 1);
    let (bad, good): (Vec<NodeId>, Vec<NodeId>) =
        rem.iter().partition(|&&u| is_bad(mu, delta, u));

    let mut kept = vec![false; size];
    for &u in &rem {
        kept[u.0] = true;
    }
    if let Some(v) = first_violation(mu, q, &completed_mask(tree, &base, &rem, &kept), delta) {
        return Err(Error::InternalInvariant(format!(
            "inductive hypothesis fails at {} for scope {}, level {}",
            tree.label(v),
            tree.label(q),
            n + 1
        )));
    }

    let mut certificates = Vec::new();
    for &c in &good {
        kept[c.0] = false;
        match first_violation(mu, q, &completed_mask(tree, &base, &rem, &kept), delta) {
            None => {}
            Some(v) => {
                kept[c.0] = true;
                certificates.push((c, v));
            }
        }
    }
    let selected: Vec<NodeId> = good.iter().copied().filter(|u| kept[u.0]).collect();
    let family = StoppingFamily {
        scope: q,
        members: f_n
            .members
            .iter()
            .copied()
            .chain(selected.iter().copied())
            .chain(bad.iter().copied())
            .collect(),
    };
    Ok(Augmentation {
        family,
        record: StepRecord {
            level: n + 1,
            remainder: rem,
            bad,
            selected,
            certificates,
        },
    })
}

#[derive(Clone, Debug)]
pub struct StoppingConstruction {
    pub family: StoppingFamily,
    pub steps: Vec<StepRecord>,
}

/// `F(Q) = U_n F_n(Q)`, run until nothing at the next level is uncovered.
pub fn build_stopping_family(
    mu: &TreeMeasure,
    q: NodeId,
    delta: &Rational,
) -> Result<StoppingConstruction> {
    let tree = mu.tree();
    tree.check(q)?;
    if !is_positive(delta) {
        return Err(Error::Precondition("delta must be positive".into()));
    }
    if is_bad(mu, delta, q) {
        return Err(Error::Precondition(format!(
            "{} is bad; its G_1 is its children",
            tree.label(q)
        )));
    }
    let mut family = StoppingFamily::empty(q);
    let mut steps = Vec::new();
    let mut n = 0;
    loop {
        if remainder(tree, q, &family.mask(tree.len()), n + 1).is_empty() {
            break;
        }
        let aug = minimal_augmentation(mu, q, &family, n, delta)?;
        family = aug.family;
        steps.push(aug.record);
        n += 1;
    }
    if let Some(v) = first_violation(mu, q, &family.mask(tree.len()), delta) {
        return Err(Error::InternalInvariant(format!(
            "constructed family for {} fails smallness at {}",
            tree.label(q),
            tree.label(v)
        )));
    }
    Ok(StoppingConstruction { family, steps })
}

/// Lazily computed stopping families for one `(mu, delta)`; `F(Q')` depends
/// only on `Q'`, so every decomposition over the same measure shares them.
pub struct StoppingTime<'m> {
    mu: &'m TreeMeasure,
    delta: Rational,
    bad: Vec<bool>,
    constructions: Vec<OnceCell<StoppingConstruction>>,
}

impl<'m> StoppingTime<'m> {
    pub fn new(mu: &'m TreeMeasure, delta: Rational) -> Result<Self> {
        if !is_positive(&delta) {
            return Err(Error::Precondition("delta must be positive".into()));
        }
        let bad = mu.tree().nodes().map(|v| is_bad(mu, &delta, v)).collect();
        Ok(StoppingTime {
            mu,
            delta,
            bad,
            constructions: (0..mu.tree().len()).map(|_| OnceCell::new()).collect(),
        })
    }

    pub fn mu(&self) -> &TreeMeasure {
        self.mu
    }

    pub fn delta(&self) -> &Rational {
        &self.delta
    }

    pub fn is_bad(&self, v: NodeId) -> bool {
        self.bad[v.0]
    }

    /// `None` for bad cubes.
    pub fn construction(&self, v: NodeId) -> Result<Option<&StoppingConstruction>> {
        if self.bad[v.0] {
            return Ok(None);
        }
        let cell = &self.constructions[v.0];
        if cell.get().is_none() {
            let built = build_stopping_family(self.mu, v, &self.delta)?;
            let _ = cell.set(built);
        }
        Ok(cell.get())
    }

    /// `G_1(v)`.
    pub fn first_generation(&self, v: NodeId) -> Result<Vec<NodeId>> {
        Ok(match self.construction(v)? {
            None => self.mu.tree().children(v).to_vec(),
            Some(c) => c.family.iter().collect(),
        })
    }

    pub fn decomposition(&self, nu: &TreeMeasure, q: NodeId) -> Result<Decomposition> {
        let tree = self.mu.tree();
        tree.check(q)?;
        same_tree(self.mu, nu)?;
        let bad = tree
            .subtree(q)
            .iter()
            .copied()
            .filter(|&v| self.bad[v.0])
            .collect();
        let mut families = BTreeMap::new();
        let mut steps = BTreeMap::new();
        let mut region_mass = BTreeMap::new();
        let mut generations = Vec::new();
        let mut current = vec![q];
        while !current.is_empty() {
            let mut next = Vec::new();
            for &v in &current {
                match self.construction(v)? {
                    None => {
                        region_mass.insert(v, nu.mass(v).clone());
                        next.extend_from_slice(tree.children(v));
                    }
                    Some(c) => {
                        let mut region = nu.subtree_mass(v).clone();
                        for m in c.family.iter() {
                            region -= nu.subtree_mass(m);
                        }
                        region_mass.insert(v, region);
                        next.extend(c.family.iter());
                        families.insert(v, c.family.clone());
                        steps.insert(v, c.steps.clone());
                    }
                }
            }
            next.sort();
            generations.push(current);
            current = next;
        }
        let mut dec = Decomposition {
            root: q,
            bad,
            families,
            steps,
            generations,
            region_mass,
            witnesses: BTreeMap::new(),
        };
        let total: Rational = dec.region_mass.values().sum();
        if &total != nu.subtree_mass(q) {
            return Err(Error::InternalInvariant(format!(
                "region masses sum to {} but nu({}*) = {}",
                total,
                tree.label(q),
                nu.subtree_mass(q)
            )));
        }
        dec.witnesses = lemma_witnesses(self.mu, &dec, &self.delta)?;
        Ok(dec)
    }
}

fn same_tree(mu: &TreeMeasure, nu: &TreeMeasure) -> Result<()> {
    let (a, b) = (mu.tree(), nu.tree());
    let identical = std::sync::Arc::ptr_eq(mu.shared_tree(), nu.shared_tree())
        || (a.len() == b.len()
            && a.nodes()
                .all(|v| a.label(v) == b.label(v) && a.sigma(v) == b.sigma(v)));
    if identical {
        Ok(())
    } else {
        Err(Error::Domain("mu and nu live on different trees".into()))
    }
}

/// The output of the construction for one root.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Decomposition {
    pub root: NodeId,
    /// `B` restricted to the subtree of the root.
    pub bad: BTreeSet<NodeId>,
    /// `F(Q')` for every processed cube that is not bad.
    pub families: BTreeMap<NodeId, StoppingFamily>,
    pub steps: BTreeMap<NodeId, Vec<StepRecord>>,
    /// `G_0 = {root}, G_1, ...`.
    pub generations: Vec<Vec<NodeId>>,
    /// `nu(U(Q'))` for every processed cube.
    pub region_mass: BTreeMap<NodeId, Rational>,
    /// Member of some `F(Q'') \ B` mapped to its witness ancestor.
    pub witnesses: BTreeMap<NodeId, NodeId>,
}

impl Decomposition {
    pub fn processed(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.generations.iter().flatten().copied()
    }

    /// One line per construction step, in processing order.
    pub fn trace_lines(&self, tree: &WeightedTree) -> Vec<String> {
        let mut lines = Vec::new();
        for v in self.processed() {
            let Some(steps) = self.steps.get(&v) else { continue };
            for s in steps {
                let certs: Vec<String> = s
                    .certificates
                    .iter()
                    .map(|(c, w)| format!("{}<{}", tree.label(*c), tree.label(*w)))
                    .collect();
                lines.push(format!(
                    "step scope={} level={} remainder={} bad={} selected={} certificates=[{}]",
                    tree.label(v),
                    s.level,
                    s.remainder.len(),
                    s.bad.len(),
                    s.selected.len(),
                    certs.join(" ")
                ));
            }
        }
        lines
    }
}

pub fn build_decomposition(
    mu: &TreeMeasure,
    nu: &TreeMeasure,
    q: NodeId,
    delta: &Rational,
) -> Result<Decomposition> {
    StoppingTime::new(mu, delta.clone())?.decomposition(nu, q)
}

fn witness_threshold(tree: &WeightedTree, delta: &Rational) -> Rational {
    (Rational::one() - tree.theta()) * delta
}

/// For each non-bad member `Q'` of a constructed `F(Q'')`, the first ancestor
/// `Q~` (from `Q'` up to `Q''`) with excess at least `(1 - theta) delta`.
pub fn lemma_witnesses(
    mu: &TreeMeasure,
    dec: &Decomposition,
    delta: &Rational,
) -> Result<BTreeMap<NodeId, NodeId>> {
    let tree = mu.tree();
    let threshold = witness_threshold(tree, delta);
    let mut out = BTreeMap::new();
    for (&scope, family) in &dec.families {
        let uncovered = uncovered_masses(mu, scope, &family.mask(tree.len()));
        for m in family.iter().filter(|&m| !is_bad(mu, delta, m)) {
            let hit = tree
                .ancestors(m)
                .take(1 + (tree.level(m) - tree.level(scope)) as usize)
                .find(|&a| uncovered[a.0] >= &threshold * tree.sigma(a));
            match hit {
                Some(a) => {
                    out.insert(m, a);
                }
                None => {
                    return Err(Error::TheoremViolation(format!(
                        "no witness for {} in F({})",
                        tree.label(m),
                        tree.label(scope)
                    )))
                }
            }
        }
    }
    Ok(out)
}

/// Maximal cubes of the subtree of `scope` with excess `>= (1 - theta) delta`
/// relative to `family`, kept only when they contain a non-bad member.
pub fn witness_cover(
    mu: &TreeMeasure,
    family: &StoppingFamily,
    delta: &Rational,
) -> Vec<NodeId> {
    let tree = mu.tree();
    let scope = family.scope();
    let threshold = witness_threshold(tree, delta);
    let uncovered = uncovered_masses(mu, scope, &family.mask(tree.len()));
    let qualifies = |u: NodeId| uncovered[u.0] >= &threshold * tree.sigma(u);
    let good_members: Vec<NodeId> = family.iter().filter(|&m| !is_bad(mu, delta, m)).collect();
    tree.subtree(scope)
        .iter()
        .copied()
        .filter(|&u| qualifies(u))
        .filter(|&u| {
            !tree
                .ancestors(u)
                .skip(1)
                .take((tree.level(u) - tree.level(scope)) as usize)
                .any(qualifies)
        })
        .filter(|&u| good_members.iter().any(|&m| tree.is_descendant(m, u)))
        .collect()
}

/// Quantitative audit of the extrapolation bound and the inequalities of its
/// proof. Scalar fields other than the global constants describe the
/// decomposition rooted at the tree root; the boolean checks cover every node
/// taken as root.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AuditReport {
    pub delta: Rational,
    pub capc: Rational,
    pub theta: Rational,
    pub c1_mu: Rational,
    pub c2_nu: Rational,
    /// `sum_{bad processed} nu(T(Q'))`.
    pub bad_part: Rational,
    /// `sum_{good processed} nu(U(Q'))`.
    pub good_part: Rational,
    /// `sum over good processed Q' of sum_{H(Q')} sigma`.
    pub witness_cover_mass: Rational,
    /// `(C2(nu) + C / (1 - theta)) C1(mu) / delta`.
    pub predicted_bound: Rational,
    /// `predicted_bound + C`: what the chain of inequalities yields once the
    /// generation-0 region `U(Q)` is counted.
    pub bound_with_root_term: Rational,
    pub measured_c1_nu: Rational,
    pub measured_argmax: NodeId,
    pub roots_checked: usize,
    pub partition_identity: bool,
    pub bad_part_inequality: bool,
    pub witness_cover_inequality: bool,
    pub good_part_inequality: bool,
    pub witnesses_found: bool,
    pub predicted_bound_holds: bool,
    pub root_term_bound_holds: bool,
    pub pass: bool,
    pub root_decomposition: Decomposition,
}

struct GoodNodeFacts {
    nu_region: Rational,
    cover_sigma: Rational,
}

/// Run the construction from every node and check every inequality.
///
/// Hypothesis `nu(U(Q')) <= C sigma(Q')` is checked on every constructed
/// family; a failure is returned as [`Error::HypothesisViolation`].
pub fn audit_bound(
    mu: &TreeMeasure,
    nu: &TreeMeasure,
    delta: &Rational,
    capc: &Rational,
) -> Result<AuditReport> {
    same_tree(mu, nu)?;
    let tree = mu.tree();
    let engine = StoppingTime::new(mu, delta.clone())?;
    let theta = tree.theta().clone();
    let one_minus_theta = Rational::one() - &theta;
    let c1 = carleson_constant(mu).value;
    let c2 = top_constant(nu).value;
    let measured = carleson_constant(nu);
    let predicted = (&c2 + capc / &one_minus_theta) * &c1 / delta;
    let with_root = &predicted + capc;

    // Per-node facts; F(Q') and everything derived from it ignore the root.
    let mut facts: Vec<Option<GoodNodeFacts>> = Vec::with_capacity(tree.len());
    let mut witnesses_found = true;
    let mut witness_cover_ok = true;
    for v in tree.nodes() {
        let Some(c) = engine.construction(v)? else {
            facts.push(None);
            continue;
        };
        let family = &c.family;
        let mut nu_region = nu.subtree_mass(v).clone();
        let mut mu_region = mu.subtree_mass(v).clone();
        for m in family.iter() {
            nu_region -= nu.subtree_mass(m);
            mu_region -= mu.subtree_mass(m);
        }
        let allowed = capc * tree.sigma(v);
        if nu_region > allowed {
            return Err(Error::HypothesisViolation {
                node: tree.label(v).to_string(),
                region_mass: format_rational(&nu_region),
                allowed: format_rational(&allowed),
            });
        }
        let member_sigma: Rational = family
            .iter()
            .filter(|&m| !engine.is_bad(m))
            .map(|m| tree.sigma(m).clone())
            .sum();
        let cover: Vec<NodeId> = witness_cover(mu, family, delta);
        let cover_sigma: Rational = cover.iter().map(|&h| tree.sigma(h).clone()).sum();
        let lhs_ok = member_sigma <= cover_sigma;
        let rhs_ok = &cover_sigma * &one_minus_theta * delta <= mu_region;
        let covers_members = family
            .iter()
            .filter(|&m| !engine.is_bad(m))
            .all(|m| cover.iter().any(|&h| tree.is_descendant(m, h)));
        witness_cover_ok &= lhs_ok && rhs_ok && covers_members;
        facts.push(Some(GoodNodeFacts {
            nu_region,
            cover_sigma,
        }));
    }

    let mut partition_ok = true;
    let mut bad_ok = true;
    let mut good_ok = true;
    let mut root_term_ok = true;
    let mut root_dec = None;
    let mut root_scalars = (Rational::zero(), Rational::zero(), Rational::zero());
    for q in tree.nodes() {
        let dec = engine.decomposition(nu, q)?;
        witnesses_found &= dec
            .families
            .values()
            .flat_map(|f| f.iter())
            .filter(|&m| !engine.is_bad(m))
            .all(|m| dec.witnesses.contains_key(&m));
        let sigma_q = tree.sigma(q);
        let mut bad_nu = Rational::zero();
        let mut bad_mu = Rational::zero();
        let mut good_nu = Rational::zero();
        let mut later_good_nu = Rational::zero();
        let mut later_good_sigma = Rational::zero();
        let mut cover_sigma = Rational::zero();
        let mut region_total = Rational::zero();
        for (gen, nodes) in dec.generations.iter().enumerate() {
            for &v in nodes {
                region_total += &dec.region_mass[&v];
                match &facts[v.0] {
                    None => {
                        bad_nu += nu.mass(v);
                        bad_mu += mu.mass(v);
                    }
                    Some(f) => {
                        debug_assert_eq!(f.nu_region, dec.region_mass[&v]);
                        good_nu += &f.nu_region;
                        cover_sigma += &f.cover_sigma;
                        if gen > 0 {
                            later_good_nu += &f.nu_region;
                            later_good_sigma += tree.sigma(v);
                        }
                    }
                }
            }
        }
        let box_mass = nu.subtree_mass(q);
        partition_ok &= &region_total == box_mass;
        // sum nu(T) <= (C2/delta) sum mu(T) <= (C1 C2 / delta) sigma(Q)
        bad_ok &= &bad_nu * delta <= &c2 * &bad_mu && bad_mu <= &c1 * sigma_q;
        // sum_{n>=1} sum_{G_n \ B} sigma <= C1 sigma(Q) / ((1-theta) delta), and the
        // nu-form with the extra factor C.
        let sigma_budget = &c1 * sigma_q;
        good_ok &= &later_good_sigma * &one_minus_theta * delta <= sigma_budget
            && &later_good_nu * &one_minus_theta * delta <= capc * &sigma_budget;
        root_term_ok &= box_mass <= &(&with_root * sigma_q);
        if q == tree.root() {
            root_scalars = (bad_nu, good_nu, cover_sigma);
            root_dec = Some(dec);
        }
    }

    let predicted_ok = measured.value <= predicted;
    let root_term_ok = root_term_ok && measured.value <= with_root;
    let pass = predicted_ok
        && partition_ok
        && bad_ok
        && witness_cover_ok
        && good_ok
        && witnesses_found;
    Ok(AuditReport {
        delta: delta.clone(),
        capc: capc.clone(),
        theta,
        c1_mu: c1,
        c2_nu: c2,
        bad_part: root_scalars.0,
        good_part: root_scalars.1,
        witness_cover_mass: root_scalars.2,
        predicted_bound: predicted,
        bound_with_root_term: with_root,
        measured_c1_nu: measured.value,
        measured_argmax: measured.argmax,
        roots_checked: tree.len(),
        partition_identity: partition_ok,
        bad_part_inequality: bad_ok,
        witness_cover_inequality: witness_cover_ok,
        good_part_inequality: good_ok,
        witnesses_found,
        predicted_bound_holds: predicted_ok,
        root_term_bound_holds: root_term_ok,
        pass,
        root_decomposition: root_dec.expect("the root is always checked"),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{frac, int};
    use crate::tree::CubeId;
    use std::sync::Arc;

    fn dyadic(d: usize, depth: u32) -> Arc<WeightedTree> {
        Arc::new(WeightedTree::dyadic(d, depth).unwrap())
    }

    fn node(t: &WeightedTree, level: u32, index: &[u64]) -> NodeId {
        t.find(&CubeId::new(level, index.to_vec()).unwrap()).unwrap()
    }

    fn point_mass(t: &Arc<WeightedTree>, at: &[(NodeId, Rational)]) -> TreeMeasure {
        TreeMeasure::from_fn(t.clone(), |_, v| {
            at.iter()
                .find(|(u, _)| *u == v)
                .map(|(_, m)| m.clone())
                .unwrap_or_else(|| int(0))
        })
        .unwrap()
    }

    #[test]
    fn bad_set_examples() {
        let t = dyadic(1, 1);
        let l = node(&t, 1, &[0]);
        assert!(bad_set(&TreeMeasure::zero(t.clone()), &frac(1, 3)).is_empty());
        let mu = point_mass(&t, &[(l, frac(1, 4))]);
        assert_eq!(bad_set(&mu, &frac(1, 2)), BTreeSet::from([l]));
        let uniform = TreeMeasure::from_fn(t.clone(), |t, v| t.sigma(v).clone()).unwrap();
        assert_eq!(bad_set(&uniform, &int(1)).len(), 3);
    }

    #[test]
    fn local_excess_examples() {
        let t = dyadic(1, 2);
        let root = t.root();
        let l = node(&t, 1, &[0]);
        let ll = node(&t, 2, &[0]);
        let mu = point_mass(&t, &[(root, frac(1, 8)), (ll, frac(1, 8))]);
        let f = StoppingFamily::new(&t, root, [l]).unwrap();
        assert_eq!(local_excess(&mu, root, &f).unwrap(), frac(1, 8));
        // Inside a member nothing is left.
        assert_eq!(local_excess(&mu, l, &f).unwrap(), int(0));
        assert_eq!(local_excess(&mu, ll, &f).unwrap(), int(0));
        let empty = StoppingFamily::empty(root);
        assert_eq!(local_excess(&mu, root, &empty).unwrap(), frac(1, 4));
        assert_eq!(local_excess(&mu, ll, &empty).unwrap(), frac(1, 2));
        let scoped_at_l = StoppingFamily::new(&t, l, [ll]).unwrap();
        assert!(local_excess(&mu, root, &scoped_at_l).is_err());
    }

    #[test]
    fn smallness_examples() {
        let t = dyadic(1, 1);
        let root = t.root();
        let l = node(&t, 1, &[0]);
        let r = node(&t, 1, &[1]);
        let zero = TreeMeasure::zero(t.clone());
        assert!(smallness_holds(&zero, root, &StoppingFamily::empty(root), &frac(1, 100)).unwrap().holds);
        let mu = point_mass(&t, &[(l, frac(1, 4)), (r, int(5))]);
        let all = StoppingFamily::new(&t, root, [l, r]).unwrap();
        assert!(smallness_holds(&mu, root, &all, &frac(1, 100)).unwrap().holds);
        let only_l = point_mass(&t, &[(l, frac(1, 4))]);
        let s = smallness_holds(&only_l, root, &StoppingFamily::empty(root), &frac(1, 4)).unwrap();
        assert_eq!(s, Smallness { holds: false, violator: Some(l) });
    }

    #[test]
    fn family_validation() {
        let t = dyadic(1, 2);
        let l = node(&t, 1, &[0]);
        let ll = node(&t, 2, &[0]);
        assert!(StoppingFamily::new(&t, t.root(), [l, ll]).is_err());
        assert!(StoppingFamily::new(&t, t.root(), [t.root()]).is_err());
        assert!(StoppingFamily::new(&t, l, [node(&t, 1, &[1])]).is_err());
    }

    #[test]
    fn zero_measure_never_stops() {
        let t = dyadic(1, 3);
        let zero = TreeMeasure::zero(t.clone());
        for v in t.nodes() {
            let c = build_stopping_family(&zero, v, &frac(1, 5)).unwrap();
            assert!(c.family.is_empty());
            assert!(c.steps.iter().all(|s| s.selected.is_empty()));
        }
    }

    #[test]
    fn bad_left_child_is_the_whole_family() {
        let t = dyadic(1, 2);
        let l = node(&t, 1, &[0]);
        let mu = point_mass(&t, &[(l, frac(1, 2))]);
        let aug = minimal_augmentation(&mu, t.root(), &StoppingFamily::empty(t.root()), 0, &frac(1, 4)).unwrap();
        assert_eq!(aug.family.members(), &BTreeSet::from([l]));
        assert!(aug.record.selected.is_empty());
        let c = build_stopping_family(&mu, t.root(), &frac(1, 4)).unwrap();
        assert_eq!(c.family.members(), &BTreeSet::from([l]));
    }

    #[test]
    fn bad_grandchildren_join_at_level_two() {
        let t = dyadic(1, 2);
        let leaves: Vec<_> = t.level_nodes(2).to_vec();
        let mu = point_mass(&t, &leaves.iter().map(|&v| (v, frac(1, 16))).collect::<Vec<_>>());
        let delta = frac(1, 8);
        let step1 = minimal_augmentation(&mu, t.root(), &StoppingFamily::empty(t.root()), 0, &delta).unwrap();
        assert!(step1.family.is_empty());
        let step2 = minimal_augmentation(&mu, t.root(), &step1.family, 1, &delta).unwrap();
        assert_eq!(step2.record.bad, leaves);
        assert!(step2.record.selected.is_empty());
        assert_eq!(step2.family.len(), 4);
    }

    #[test]
    fn bad_root_is_rejected() {
        let t = dyadic(1, 1);
        let mu = point_mass(&t, &[(t.root(), int(1))]);
        assert!(matches!(
            build_stopping_family(&mu, t.root(), &frac(1, 2)),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn half_delta_layers_force_stopping() {
        let t = dyadic(1, 3);
        let delta = frac(1, 3);
        let mu = TreeMeasure::from_fn(t.clone(), |t, v| &delta * t.sigma(v) * frac(1, 2)).unwrap();
        assert!(bad_set(&mu, &delta).is_empty());
        let c = build_stopping_family(&mu, t.root(), &delta).unwrap();
        assert!(!c.family.is_empty());
        assert!(smallness_holds(&mu, t.root(), &c.family, &delta).unwrap().holds);
    }

    #[test]
    fn decomposition_of_bad_left_fixture() {
        let t = dyadic(1, 1);
        let l = node(&t, 1, &[0]);
        let mu = point_mass(&t, &[(l, frac(1, 4))]);
        let nu = TreeMeasure::from_fn(t.clone(), |t, v| t.sigma(v).clone()).unwrap();
        let dec = build_decomposition(&mu, &nu, t.root(), &frac(1, 2)).unwrap();
        assert_eq!(dec.generations, vec![vec![t.root()], vec![l]]);
        assert_eq!(dec.region_mass[&t.root()], frac(3, 2));
        assert_eq!(dec.region_mass[&l], frac(1, 2));
        assert_eq!(dec.bad, BTreeSet::from([l]));
        assert!(dec.witnesses.is_empty());
    }

    #[test]
    fn decomposition_with_zero_mu_is_one_region() {
        let t = dyadic(2, 2);
        let nu = TreeMeasure::from_fn(t.clone(), |_, v| frac(v.0 as i64, 7)).unwrap();
        let dec = build_decomposition(&TreeMeasure::zero(t.clone()), &nu, t.root(), &frac(1, 2)).unwrap();
        assert_eq!(dec.generations, vec![vec![t.root()]]);
        assert_eq!(&dec.region_mass[&t.root()], nu.total());
    }

    #[test]
    fn audit_formula_value() {
        // C2 = 1, C = 1, theta = 1/2, C1(mu) = 1, delta = 1/2 -> 6.
        let t = dyadic(1, 0);
        let mu = point_mass(&t, &[(t.root(), int(1))]);
        let nu = point_mass(&t, &[(t.root(), int(1))]);
        let report = audit_bound(&mu, &nu, &frac(1, 2), &int(1)).unwrap();
        assert_eq!(report.predicted_bound, int(6));
        assert!(report.pass);
    }

    #[test]
    fn audit_zero_nu_passes() {
        let t = dyadic(1, 3);
        let mu = TreeMeasure::from_fn(t.clone(), |_, v| frac((v.0 % 3) as i64, 9)).unwrap();
        let report = audit_bound(&mu, &TreeMeasure::zero(t.clone()), &frac(1, 4), &int(1)).unwrap();
        assert!(report.pass);
        assert_eq!(report.measured_c1_nu, int(0));
    }

    #[test]
    fn audit_rejects_hypothesis_failure() {
        let t = dyadic(1, 2);
        let nu = TreeMeasure::from_fn(t.clone(), |t, v| t.sigma(v).clone()).unwrap();
        let err = audit_bound(&TreeMeasure::zero(t.clone()), &nu, &frac(1, 2), &int(1)).unwrap_err();
        assert!(matches!(err, Error::HypothesisViolation { .. }));
    }

    #[test]
    fn zero_mu_exposes_missing_root_term() {
        // mu = 0 admits every family, so the hypothesis already forces
        // C1(nu) <= C; the stated bound collapses to 0 while the root term survives.
        let t = dyadic(1, 2);
        let nu = TreeMeasure::from_fn(t.clone(), |t, v| t.sigma(v).clone()).unwrap();
        let report = audit_bound(&TreeMeasure::zero(t.clone()), &nu, &frac(1, 2), &int(3)).unwrap();
        assert_eq!(report.predicted_bound, int(0));
        assert_eq!(report.measured_c1_nu, int(3));
        assert!(!report.predicted_bound_holds);
        assert!(report.root_term_bound_holds);
        assert!(!report.pass);
    }
}
