//! Christ-type dyadic cubes on a finite metric measure space.
//!
//! Level `j` uses the scale `r_j = 2^{-N j}`. Its centers extend the centers
//! of level `j - 1` to a maximal `r_j`-separated net by farthest-point
//! traversal (ties to the lower point index). Each point then joins the
//! nearest new center inside its current cell that lies closer than `r_j`,
//! or failing that the cell of its parent's center, so every level refines
//! the previous one.

use num::traits::{One, Zero};

use crate::error::{Error, Result};
use crate::rational::{is_nonnegative, is_positive, pow2_neg, Rational};
use crate::tree::{CubeId, NodeSpec, WeightedTree};

/// A finite metric space with a probability weight on its points.
#[derive(Clone, Debug)]
pub struct MetricSpace {
    ids: Vec<String>,
    dist: Vec<Vec<Rational>>,
    weights: Vec<Rational>,
}

impl MetricSpace {
    /// Validates symmetry, zero diagonal, separation of distinct points, the
    /// triangle inequality, and total weight 1.
    pub fn new(ids: Vec<String>, dist: Vec<Vec<Rational>>, weights: Vec<Rational>) -> Result<Self> {
        let n = ids.len();
        let space = Self::unchecked(ids, dist, weights)?;
        for i in 0..n {
            for j in 0..n {
                let dij = &space.dist[i][j];
                if dij != &space.dist[j][i] {
                    return Err(Error::Domain(format!("dist[{i}][{j}] != dist[{j}][{i}]")));
                }
                if (i == j) != dij.is_zero() {
                    return Err(Error::Domain(format!(
                        "dist[{i}][{j}] = {dij}: must vanish exactly on the diagonal"
                    )));
                }
                if !is_nonnegative(dij) {
                    return Err(Error::Domain(format!("dist[{i}][{j}] is negative")));
                }
            }
        }
        for k in 0..n {
            for i in 0..n {
                for j in (i + 1)..n {
                    if space.dist[i][j] > &space.dist[i][k] + &space.dist[k][j] {
                        return Err(Error::Domain(format!(
                            "triangle inequality fails for ({i}, {j}) through {k}"
                        )));
                    }
                }
            }
        }
        Ok(space)
    }

    fn unchecked(ids: Vec<String>, dist: Vec<Vec<Rational>>, weights: Vec<Rational>) -> Result<Self> {
        let n = ids.len();
        if n == 0 {
            return Err(Error::Domain("metric space has no points".into()));
        }
        if dist.len() != n || dist.iter().any(|row| row.len() != n) {
            return Err(Error::Domain(format!("distance matrix must be {n} x {n}")));
        }
        if weights.len() != n {
            return Err(Error::Domain(format!("expected {n} weights")));
        }
        if let Some(i) = weights.iter().position(|w| !is_positive(w)) {
            return Err(Error::Domain(format!("weight of point {i} must be positive")));
        }
        let total: Rational = weights.iter().sum();
        if !total.is_one() {
            return Err(Error::Domain(format!("weights sum to {total}, not 1")));
        }
        Ok(MetricSpace { ids, dist, weights })
    }

    /// Points of `[0,1)^k` under the sup norm with uniform weights.
    /// Coordinates must be pairwise distinct points.
    pub fn from_points(points: &[Vec<Rational>]) -> Result<Self> {
        let n = points.len();
        let dist: Vec<Vec<Rational>> = points
            .iter()
            .map(|p| {
                points
                    .iter()
                    .map(|q| {
                        p.iter()
                            .zip(q)
                            .map(|(a, b)| (a - b).abs_rational())
                            .max()
                            .unwrap_or_else(Rational::zero)
                    })
                    .collect()
            })
            .collect();
        for i in 0..n {
            for j in (i + 1)..n {
                if dist[i][j].is_zero() {
                    return Err(Error::Domain(format!("points {i} and {j} coincide")));
                }
            }
        }
        let weights = vec![Rational::new(1.into(), (n as i64).into()); n];
        Self::unchecked((0..n).map(|i| format!("p{i}")).collect(), dist, weights)
    }

    /// `2^m` equally spaced points `k / 2^m` of `[0,1)`, uniform weights.
    pub fn uniform_grid(m: u32) -> Result<Self> {
        let n = 1i64 << m;
        let points: Vec<Vec<Rational>> = (0..n).map(|k| vec![Rational::new(k.into(), n.into())]).collect();
        Self::from_points(&points)
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn dist(&self, i: usize, j: usize) -> &Rational {
        &self.dist[i][j]
    }

    pub fn distances(&self) -> &[Vec<Rational>] {
        &self.dist
    }

    pub fn weight(&self, i: usize) -> &Rational {
        &self.weights[i]
    }

    pub fn weights(&self) -> &[Rational] {
        &self.weights
    }

    pub fn diameter(&self) -> Rational {
        self.dist
            .iter()
            .flat_map(|row| row.iter())
            .max()
            .cloned()
            .unwrap_or_else(Rational::zero)
    }
}

trait AbsRational {
    fn abs_rational(self) -> Rational;
}

impl AbsRational for Rational {
    fn abs_rational(self) -> Rational {
        if self < Rational::zero() {
            -self
        } else {
            self
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Cell {
    /// Sorted point indices.
    pub points: Vec<usize>,
    pub center: usize,
    /// Index of the parent cell in the previous level.
    pub parent: Option<usize>,
    pub sigma: Rational,
}

#[derive(Clone, Debug)]
pub struct ChristTree {
    scale_ratio: u32,
    levels: Vec<Vec<Cell>>,
}

impl ChristTree {
    pub fn scale_ratio(&self) -> u32 {
        self.scale_ratio
    }

    pub fn levels(&self) -> &[Vec<Cell>] {
        &self.levels
    }

    pub fn depth(&self) -> u32 {
        (self.levels.len() - 1) as u32
    }

    /// `l(Q) = 2^{-N j}` for a level-`j` cell.
    pub fn side(&self, level: usize) -> Rational {
        pow2_neg(self.scale_ratio * level as u32)
    }

    pub fn children(&self, level: usize, cell: usize) -> Vec<usize> {
        self.levels
            .get(level + 1)
            .map(|next| {
                next.iter()
                    .enumerate()
                    .filter(|(_, c)| c.parent == Some(cell))
                    .map(|(i, _)| i)
                    .collect()
            })
            .unwrap_or_default()
    }

    /// Collapse unary chains and return the weighted tree together with the
    /// `(level, cell)` at the top of each node's chain.
    pub fn to_weighted_tree(&self) -> Result<(WeightedTree, Vec<(usize, usize)>)> {
        let children: Vec<Vec<Vec<usize>>> = (0..self.levels.len())
            .map(|j| (0..self.levels[j].len()).map(|i| self.children(j, i)).collect())
            .collect();
        // Follow a cell down its unary chain to the cell that branches (or ends).
        let bottom = |mut j: usize, mut i: usize| {
            while children[j][i].len() == 1 {
                i = children[j][i][0];
                j += 1;
            }
            (j, i)
        };
        let mut specs = Vec::new();
        let mut origin = Vec::new();
        let mut frontier = vec![(0usize, 0usize, None::<usize>)];
        let mut depth = 0u32;
        while !frontier.is_empty() {
            let mut next = Vec::new();
            for (ordinal, &(j, i, parent)) in frontier.iter().enumerate() {
                let id = specs.len();
                specs.push(NodeSpec {
                    label: CubeId {
                        level: depth,
                        index: vec![ordinal as u64],
                    },
                    parent,
                    sigma: self.levels[j][i].sigma.clone(),
                });
                origin.push((j, i));
                let (bj, bi) = bottom(j, i);
                for &c in &children[bj][bi] {
                    next.push((bj + 1, c, Some(id)));
                }
            }
            frontier = next;
            depth += 1;
        }
        Ok((WeightedTree::from_nodes(specs)?, origin))
    }
}

pub fn build_christ_tree(space: &MetricSpace, scale_ratio: u32, max_depth: u32) -> Result<ChristTree> {
    if scale_ratio == 0 {
        return Err(Error::Domain("scale ratio N must be at least 1".into()));
    }
    if space.is_empty() {
        return Err(Error::Domain("metric space has no points".into()));
    }
    if space.diameter() > Rational::one() {
        return Err(Error::Domain("distances must be at most 1; normalize first".into()));
    }
    let n = space.len();
    let root = Cell {
        points: (0..n).collect(),
        center: 0,
        parent: None,
        sigma: space.weights().iter().sum(),
    };
    let mut levels = vec![vec![root]];
    let mut centers = vec![0usize];
    let mut nearest: Vec<Rational> = (0..n).map(|p| space.dist(p, 0).clone()).collect();

    for j in 1..=max_depth {
        let previous = levels.last().expect("root level");
        if previous.iter().all(|c| c.points.len() == 1) {
            break;
        }
        let r = pow2_neg(scale_ratio * j);
        loop {
            // Farthest point from the current net; ties to the lower index.
            let (far, gap) = nearest
                .iter()
                .enumerate()
                .fold((0, &nearest[0]), |best, (p, d)| if d > best.1 { (p, d) } else { best });
            if gap < &r {
                break;
            }
            centers.push(far);
            for p in 0..n {
                if space.dist(p, far) < &nearest[p] {
                    nearest[p] = space.dist(p, far).clone();
                }
            }
        }
        let is_center = {
            let mut mask = vec![false; n];
            for &c in &centers {
                mask[c] = true;
            }
            mask
        };
        let mut level = Vec::new();
        for (pi, parent) in previous.iter().enumerate() {
            let local: Vec<usize> = parent.points.iter().copied().filter(|&p| is_center[p]).collect();
            let base = level.len();
            for &c in &local {
                level.push(Cell {
                    points: Vec::new(),
                    center: c,
                    parent: Some(pi),
                    sigma: Rational::zero(),
                });
            }
            let home = local
                .iter()
                .position(|&c| c == parent.center)
                .expect("parent center survives into the finer net");
            for &p in &parent.points {
                let mut choice: Option<(usize, &Rational)> = None;
                for (k, &c) in local.iter().enumerate() {
                    let d = space.dist(p, c);
                    if d < &r && choice.is_none_or(|(_, best)| d < best) {
                        choice = Some((k, d));
                    }
                }
                let k = choice.map(|(k, _)| k).unwrap_or(home);
                level[base + k].points.push(p);
                level[base + k].sigma += space.weight(p);
            }
        }
        debug_assert!(level.iter().all(|c| !c.points.is_empty()));
        levels.push(level);
    }
    Ok(ChristTree {
        scale_ratio,
        levels,
    })
}

/// Best constants realized by a built tree, plus its structural checks.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ChristAudit {
    /// `max_j max_{Q in D_j} diam(Q) / 2^{-N j}`.
    pub diam_ratio: Rational,
    /// Largest `c_0` with `B(x_Q, c_0 l(Q)) ∩ X ⊆ Q` for every cell (open
    /// balls); `None` when no cell has points outside it, i.e. a one-point space.
    pub c0: Option<Rational>,
    /// Smallest `c_2` with `l^d / c_2 <= sigma(Q) <= c_2 l^d`.
    pub c2: Rational,
    /// Smallest `c_1` with `R^d / c_1 <= sigma(B(x, R)) <= c_1 R^d` over the
    /// sampled pairs: every point `x` and every distinct positive distance
    /// `R` from it (closed balls). `None` for a one-point space.
    pub c1: Option<Rational>,
    pub c1_samples: usize,
    pub partition: bool,
    pub nesting: bool,
    pub separation: bool,
    pub sigma_consistent: bool,
}

fn power(r: &Rational, d: u32) -> Rational {
    (0..d).fold(Rational::one(), |acc, _| acc * r)
}

fn symmetric_ratio(a: &Rational, b: &Rational) -> Rational {
    let x = a / b;
    let y = b / a;
    if x > y {
        x
    } else {
        y
    }
}

/// Measure the constants of the Christ-cube properties. Never fails.
pub fn audit_christ_properties(tree: &ChristTree, space: &MetricSpace, d: u32) -> ChristAudit {
    let n = space.len();
    let mut diam_ratio = Rational::zero();
    let mut c0: Option<Rational> = None;
    let mut c2 = Rational::one();
    let mut partition = true;
    let mut nesting = true;
    let mut separation = true;
    let mut sigma_consistent = true;

    for (j, level) in tree.levels().iter().enumerate() {
        let side = tree.side(j);
        let mut seen = vec![0usize; n];
        for cell in level {
            for &p in &cell.points {
                seen[p] += 1;
            }
            let mut diam = Rational::zero();
            for (a, &p) in cell.points.iter().enumerate() {
                for &q in &cell.points[a + 1..] {
                    if space.dist(p, q) > &diam {
                        diam = space.dist(p, q).clone();
                    }
                }
            }
            let ratio = &diam / &side;
            if ratio > diam_ratio {
                diam_ratio = ratio;
            }
            let inside = {
                let mut mask = vec![false; n];
                for &p in &cell.points {
                    mask[p] = true;
                }
                mask
            };
            if let Some(out) = (0..n).filter(|&p| !inside[p]).map(|p| space.dist(cell.center, p)).min() {
                let ratio = out / &side;
                if c0.as_ref().is_none_or(|c| &ratio < c) {
                    c0 = Some(ratio);
                }
            }
            if !cell.points.contains(&cell.center) {
                partition = false;
            }
            let r = symmetric_ratio(&cell.sigma, &power(&side, d));
            if r > c2 {
                c2 = r;
            }
            let weight: Rational = cell.points.iter().map(|&p| space.weight(p)).sum();
            sigma_consistent &= weight == cell.sigma;
            if let Some(pi) = cell.parent {
                let parent = &tree.levels()[j - 1][pi];
                nesting &= cell.points.iter().all(|p| parent.points.binary_search(p).is_ok());
            } else {
                nesting &= j == 0;
            }
        }
        partition &= seen.iter().all(|&k| k == 1);
        for (a, x) in level.iter().enumerate() {
            for y in &level[a + 1..] {
                separation &= space.dist(x.center, y.center) >= &side;
            }
        }
        if j > 0 {
            let parents = &tree.levels()[j - 1];
            for (pi, parent) in parents.iter().enumerate() {
                let total: Rational = level
                    .iter()
                    .filter(|c| c.parent == Some(pi))
                    .map(|c| c.sigma.clone())
                    .sum();
                sigma_consistent &= total == parent.sigma;
            }
        }
    }

    let diameter = space.diameter();
    let mut c1: Option<Rational> = None;
    let mut samples = 0;
    for x in 0..n {
        let mut by_distance: Vec<(Rational, Rational)> = (0..n)
            .map(|p| (space.dist(x, p).clone(), space.weight(p).clone()))
            .collect();
        by_distance.sort();
        let mut mass = Rational::zero();
        for (k, (r, w)) in by_distance.iter().enumerate() {
            mass += w;
            let last_at_radius = by_distance.get(k + 1).is_none_or(|(next, _)| next != r);
            if r.is_zero() || !last_at_radius || r > &diameter {
                continue;
            }
            samples += 1;
            let ratio = symmetric_ratio(&mass, &power(r, d));
            if c1.as_ref().is_none_or(|c| &ratio > c) {
                c1 = Some(ratio);
            }
        }
    }

    ChristAudit {
        diam_ratio,
        c0,
        c2,
        c1,
        c1_samples: samples,
        partition,
        nesting,
        separation,
        sigma_consistent,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{frac, int};

    fn line(xs: &[Rational]) -> MetricSpace {
        MetricSpace::from_points(&xs.iter().map(|x| vec![x.clone()]).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn single_point_space() {
        let space = line(&[frac(1, 2)]);
        let tree = build_christ_tree(&space, 1, 5).unwrap();
        assert_eq!(tree.levels().len(), 1);
        let audit = audit_christ_properties(&tree, &space, 1);
        assert_eq!(audit.diam_ratio, int(0));
        assert_eq!(audit.c0, None);
        assert_eq!(audit.c1, None);
        assert_eq!(audit.c2, int(1));
        let (wt, _) = tree.to_weighted_tree().unwrap();
        assert_eq!(wt.len(), 1);
    }

    #[test]
    fn two_points_split_at_level_one() {
        let space = MetricSpace::new(
            vec!["a".into(), "b".into()],
            vec![vec![int(0), int(1)], vec![int(1), int(0)]],
            vec![frac(1, 2), frac(1, 2)],
        )
        .unwrap();
        let tree = build_christ_tree(&space, 1, 4).unwrap();
        assert_eq!(tree.levels().len(), 2);
        assert_eq!(tree.levels()[1].len(), 2);
        assert!(tree.levels()[1].iter().all(|c| c.points.len() == 1));
    }

    #[test]
    fn four_points_on_a_line() {
        let space = line(&[frac(0, 1), frac(3, 10), frac(6, 10), frac(9, 10)]);
        let tree = build_christ_tree(&space, 1, 6).unwrap();
        let level1 = &tree.levels()[1];
        let cells: Vec<_> = level1.iter().map(|c| c.points.clone()).collect();
        assert_eq!(cells, vec![vec![0, 1], vec![2, 3]]);
        // Farthest-point traversal from point 0 picks 9/10 next.
        let centers: Vec<_> = level1.iter().map(|c| c.center).collect();
        assert_eq!(centers, vec![0, 3]);
        assert!(tree.levels()[2].iter().all(|c| c.points.len() == 1));
        assert_eq!(tree.levels().len(), 3);

        let audit = audit_christ_properties(&tree, &space, 1);
        assert!(audit.partition && audit.nesting && audit.separation && audit.sigma_consistent);
        // Level 1 diam(0, 3/10) / (1/2) = 3/5; root 9/10 / 1 is larger.
        let level1_ratio = frac(3, 10) / frac(1, 2);
        assert_eq!(level1_ratio, frac(3, 5));
        assert_eq!(audit.diam_ratio, frac(9, 10));
    }

    #[test]
    fn weighted_tree_collapses_chains() {
        // Three points: at level 1 one cell is a singleton and then stays unary.
        let space = line(&[frac(0, 1), frac(1, 16), frac(15, 16)]);
        let tree = build_christ_tree(&space, 1, 6).unwrap();
        let (wt, origin) = tree.to_weighted_tree().unwrap();
        assert_eq!(origin[0], (0, 0));
        assert!(wt.theta() < &int(1));
        for v in wt.nodes() {
            assert_ne!(wt.children(v).len(), 1);
        }
        assert_eq!(wt.level_nodes(0).len(), 1);
        let leaves = wt.nodes().filter(|&v| wt.is_leaf(v)).count();
        assert_eq!(leaves, 3);
    }

    #[test]
    fn invalid_spaces_rejected() {
        let d = vec![vec![int(0), int(1), int(3)], vec![int(1), int(0), int(1)], vec![int(3), int(1), int(0)]];
        let w = vec![frac(1, 3); 3];
        let ids: Vec<String> = vec!["a".into(), "b".into(), "c".into()];
        assert!(MetricSpace::new(ids.clone(), d, w.clone()).is_err());
        let asym = vec![vec![int(0), int(1)], vec![frac(1, 2), int(0)]];
        assert!(MetricSpace::new(ids[..2].to_vec(), asym, vec![frac(1, 2); 2]).is_err());
        let ok = vec![vec![int(0), int(1)], vec![int(1), int(0)]];
        assert!(MetricSpace::new(ids[..2].to_vec(), ok, vec![frac(1, 3); 2]).is_err());
        assert!(MetricSpace::new(vec![], vec![], vec![]).is_err());
    }

    #[test]
    fn grid_constants_stay_bounded() {
        for m in 4..=6 {
            let space = MetricSpace::uniform_grid(m).unwrap();
            let tree = build_christ_tree(&space, 1, 12).unwrap();
            let audit = audit_christ_properties(&tree, &space, 1);
            assert!(audit.partition && audit.nesting && audit.separation);
            assert!(audit.c2 < int(4), "m = {m}: c2 = {}", audit.c2);
        }
    }
}
