//! Tents, sawtooth regions, and the reduction of half-space atomic measures
//! to tree measures.
//!
//! Distances use the sup norm, so every quantity stays rational. For a
//! half-open cube `Q = prod [a_k, b_k)` and `x` in `Q`,
//! `dist(x, complement of Q) = min_k min(x_k - a_k, b_k - x_k)`.

use std::sync::Arc;

use num::traits::{Signed, Zero};

use crate::error::{Error, Result};
use crate::extrapolation::StoppingFamily;
use crate::measures::{tree_measure_from_atoms, Atom, AtomicMeasure, TreeMeasure};
use crate::rational::Rational;
use crate::tree::{CubeId, NodeId, WeightedTree};

/// Sup-norm distance from `x` to the boundary of `q`; `None` when `x` is not in `q`.
pub fn boundary_distance(q: &CubeId, x: &[Rational]) -> Option<Rational> {
    if !q.contains_point(x) {
        return None;
    }
    q.bounds()
        .iter()
        .zip(x)
        .map(|((a, b), xk)| std::cmp::min(xk - a, b - xk))
        .min()
}

/// `T_Q = {(x, t) : x in Q, 0 <= t <= dist(x, complement of Q)}`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TentRegion {
    pub base: CubeId,
}

impl TentRegion {
    pub fn contains(&self, x: &[Rational], t: &Rational) -> bool {
        tent_contains(&self.base, x, t)
    }
}

pub fn tent_contains(q: &CubeId, x: &[Rational], t: &Rational) -> bool {
    match boundary_distance(q, x) {
        Some(dist) => !t.is_negative() && t <= &dist,
        None => false,
    }
}

/// `psi(x) = dist(x, boundary of Q_j)` on each `Q_j` of a pairwise disjoint
/// family, zero elsewhere. Lipschitz with constant 1 in the sup norm.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SawtoothFunction {
    base: CubeId,
    cubes: Vec<CubeId>,
}

impl SawtoothFunction {
    pub fn new(base: CubeId, cubes: Vec<CubeId>) -> Result<Self> {
        for (i, c) in cubes.iter().enumerate() {
            if !c.is_subcube_of(&base) {
                return Err(Error::Domain(format!("{c} is not inside {base}")));
            }
            if let Some(other) = cubes[i + 1..].iter().find(|o| !c.is_disjoint_from(o)) {
                return Err(Error::Domain(format!("{c} and {other} overlap")));
            }
        }
        Ok(SawtoothFunction { base, cubes })
    }

    /// The sawtooth of a stopping family on a dyadic tree.
    pub fn from_family(tree: &WeightedTree, family: &StoppingFamily) -> Result<Self> {
        let cubes = family.iter().map(|v| tree.label(v).clone()).collect();
        Self::new(tree.label(family.scope()).clone(), cubes)
    }

    pub fn base(&self) -> &CubeId {
        &self.base
    }

    pub fn cubes(&self) -> &[CubeId] {
        &self.cubes
    }

    pub fn value(&self, x: &[Rational]) -> Rational {
        sawtooth_value(self, x)
    }
}

pub fn sawtooth_value(psi: &SawtoothFunction, x: &[Rational]) -> Rational {
    psi.cubes
        .iter()
        .find_map(|c| boundary_distance(c, x))
        .unwrap_or_else(Rational::zero)
}

/// `(x, t)` lies in `Omega_psi = {t >= psi(x)}`.
pub fn region_contains(psi: &SawtoothFunction, x: &[Rational], t: &Rational) -> bool {
    t >= &sawtooth_value(psi, x)
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SetIdentityReport {
    pub checked: usize,
    /// Atoms whose membership differs between the two sides, off the frontier.
    pub disagreements: Vec<usize>,
    /// Atoms with `t = psi(x) > 0` inside some `Q_j*`: the closed sawtooth and
    /// the closed tent both claim them, so the two sides always differ there.
    /// These sit on the tent boundaries, which carry no mass by assumption.
    pub frontier: Vec<usize>,
}

impl SetIdentityReport {
    pub fn holds(&self) -> bool {
        self.disagreements.is_empty()
    }
}

/// Compare, atom by atom,
/// `Q* ∩ Omega_psi` with `(Q* \ U_j Q_j*) ∪ U_j (Q_j* \ T_{Q_j})`.
pub fn verify_set_identity(
    q: &CubeId,
    cubes: &[CubeId],
    m: &AtomicMeasure,
) -> Result<SetIdentityReport> {
    let psi = SawtoothFunction::new(q.clone(), cubes.to_vec())?;
    let mut report = SetIdentityReport::default();
    for (i, atom) in m.atoms.iter().enumerate() {
        report.checked += 1;
        let in_box = atom.in_box(q);
        let left = in_box && region_contains(&psi, &atom.x, &atom.t);
        let in_some_box = cubes.iter().find(|c| atom.in_box(c));
        let right = match in_some_box {
            None => in_box,
            Some(c) => !tent_contains(c, &atom.x, &atom.t),
        };
        if left != right {
            let on_frontier = in_some_box.is_some() && atom.t == sawtooth_value(&psi, &atom.x);
            if on_frontier {
                report.frontier.push(i);
            } else {
                report.disagreements.push(i);
            }
        }
    }
    Ok(report)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Truncation {
    pub kept: AtomicMeasure,
    pub dropped_mass: Rational,
}

/// Drop the atoms of `Q*` outside the tent `T_Q`; atoms outside `Q*` stay.
pub fn truncate_outside_tent(m: &AtomicMeasure, q: &CubeId) -> Truncation {
    let mut dropped = Rational::zero();
    let mut kept = Vec::with_capacity(m.atoms.len());
    for atom in &m.atoms {
        if atom.in_box(q) && !tent_contains(q, &atom.x, &atom.t) {
            dropped += &atom.w;
        } else {
            kept.push(atom.clone());
        }
    }
    Truncation {
        kept: AtomicMeasure { atoms: kept },
        dropped_mass: dropped,
    }
}

/// Result of discretizing atomic `(mu, nu)` over a base cube.
#[derive(Clone, Debug)]
pub struct Reduction {
    pub mu: TreeMeasure,
    pub nu: TreeMeasure,
    /// `nu` after truncation and restriction to `Q*`, the measure `nu~` reproduces.
    pub nu_atoms: AtomicMeasure,
    pub mu_atoms: AtomicMeasure,
    pub dropped_nu_mass: Rational,
    /// `dropped <= (C2 + d) |Q|` with `C2` the top-layer constant of the untruncated `nu`.
    pub truncation_bound_holds: bool,
}

fn restrict_to_box(m: &AtomicMeasure, q: &CubeId) -> AtomicMeasure {
    AtomicMeasure {
        atoms: m.atoms.iter().filter(|a| a.in_box(q)).cloned().collect(),
    }
}

/// Truncate `nu` to the tent over `q`, then bin both measures into the dyadic
/// tree of depth `depth`, checking that every subtree sum below `q` equals
/// the atomic mass of the matching Carleson box.
pub fn reduce_to_dyadic(
    mu_atoms: &AtomicMeasure,
    nu_atoms: &AtomicMeasure,
    q: &CubeId,
    depth: u32,
) -> Result<Reduction> {
    let tree = Arc::new(WeightedTree::dyadic(q.dim(), depth)?);
    if tree.find(q).is_none() {
        return Err(Error::Domain(format!("{q} is deeper than depth {depth}")));
    }
    let mu_in = restrict_to_box(mu_atoms, q);
    let nu_box = restrict_to_box(nu_atoms, q);
    let truncation = truncate_outside_tent(&nu_box, q);
    let mu = tree_measure_from_atoms(&mu_in, tree.clone())?;
    let nu = tree_measure_from_atoms(&truncation.kept, tree.clone())?;

    let untruncated = tree_measure_from_atoms(&nu_box, tree.clone())?;
    let c2 = tree
        .nodes()
        .filter(|&v| tree.label(v).is_subcube_of(q))
        .map(|v| untruncated.mass(v) / tree.sigma(v))
        .max()
        .unwrap_or_else(Rational::zero);
    let allowance = (c2 + Rational::from_integer(q.dim().into())) * q.volume();
    let truncation_bound_holds = truncation.dropped_mass <= allowance;

    for v in tree.nodes().filter(|&v| tree.label(v).is_subcube_of(q)) {
        check_box(&mu, &mu_in, v, "mu")?;
        check_box(&nu, &truncation.kept, v, "nu")?;
    }
    Ok(Reduction {
        mu,
        nu,
        nu_atoms: truncation.kept,
        mu_atoms: mu_in,
        dropped_nu_mass: truncation.dropped_mass,
        truncation_bound_holds,
    })
}

fn check_box(m: &TreeMeasure, atoms: &AtomicMeasure, v: NodeId, name: &str) -> Result<()> {
    let cube = m.tree().label(v);
    let atomic = atoms.box_mass(cube);
    if m.subtree_mass(v) != &atomic {
        return Err(Error::InternalInvariant(format!(
            "{name}~({cube}*) = {} but {name}({cube}*) = {atomic}",
            m.subtree_mass(v)
        )));
    }
    Ok(())
}

/// Atom constructor for tests and examples.
pub fn atom(x: &[Rational], t: Rational, w: Rational) -> Atom {
    Atom::new(x.to_vec(), t, w)
}
