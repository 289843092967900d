//! Supernodal multicolor ordering and lifted sparsity pattern.
//!
//! The maximin ordering is cut into scale levels (see
//! [`build_levels`](crate::ordering::build_levels)). Distances are measured
//! in the hierarchical pseudometric
//!
//! ```text
//! d(i, j) = dist(x_i, x_j) / (l_ref * h^min(level(i), level(j)))
//! ```
//!
//! On each level, centers are picked greedily in maximin order so that no
//! two centers are within `rho` of each other; every index joins its nearest
//! center. Two supernodes interact when some of their members are within
//! `rho`, and the lifted pattern connects all members of interacting
//! supernodes. Same-level supernodes are colored so that interacting ones
//! differ, which lets same-colored supernodes be eliminated independently.
//!
//! The final ordering lists levels coarse to fine, then colors, then
//! supernodes by center index, then members in maximin order.

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::geometry::PointCloud;
use crate::ordering::{build_levels, invert_permutation, max_rule_pattern, MaximinOrdering, SparsityPattern};

#[derive(Debug, Clone, PartialEq)]
pub struct SupernodalPlan {
    pub rho: f64,
    pub h: f64,
    /// Reference length of the level hierarchy.
    pub l_ref: f64,
    /// Level (from 1) of each point, by original index.
    pub levels: Vec<usize>,
    /// Center (original index) of each supernode. Supernode ids index this.
    pub centers: Vec<usize>,
    /// Members of each supernode (original indices, maximin order).
    pub members: Vec<Vec<usize>>,
    /// Supernode id of each point, by original index.
    pub assignment: Vec<usize>,
    /// Color of each supernode; colors restart at 0 on every level.
    pub colors: Vec<usize>,
    /// Interacting supernodes (sorted ids, including the node itself).
    pub interactions: Vec<Vec<usize>>,
    /// Supernodal order: position -> original index.
    pub order: Vec<usize>,
    /// Lifted pattern over positions of `order`.
    pub pattern: SparsityPattern,
}

impl SupernodalPlan {
    pub fn num_supernodes(&self) -> usize {
        self.centers.len()
    }

    /// Level of supernode `s`.
    pub fn supernode_level(&self, s: usize) -> usize {
        self.levels[self.centers[s]]
    }

    /// Largest number of colors used on any level.
    pub fn max_colors(&self) -> usize {
        self.colors.iter().map(|c| c + 1).max().unwrap_or(0)
    }

    /// Center (original index) each point is assigned to.
    pub fn assigned_centers(&self) -> Vec<usize> {
        self.assignment.iter().map(|&s| self.centers[s]).collect()
    }

    /// Pseudodistance between original indices `i` and `j`.
    pub fn pseudodist(&self, cloud: &PointCloud, i: usize, j: usize) -> f64 {
        pseudo(cloud.dist(i, j), self.l_ref, self.h, self.levels[i].min(self.levels[j]))
    }
}

#[inline]
fn pseudo(dist: f64, l_ref: f64, h: f64, level: usize) -> f64 {
    dist / (l_ref * h.powi(level as i32))
}

/// Default level ratio. Coarser ratios leave too few pattern entries per
/// level at small `rho` and the factorization loses pivots.
pub const DEFAULT_H: f64 = 0.8;

/// Builds the supernodal plan for a maximin ordering of `cloud`.
pub fn build_supernodal(ordering: &MaximinOrdering, cloud: &PointCloud, rho: f64, h: f64) -> Result<SupernodalPlan> {
    check_inputs(ordering, cloud, rho)?;
    // Every pair with d <= rho satisfies dist <= rho * l[coarser], so the
    // max-rule pattern at the same rho holds all candidates.
    let candidates = max_rule_pattern(ordering, cloud, rho)?;
    build_with_candidates(ordering, &candidates, cloud, rho, h)
}

fn check_inputs(ordering: &MaximinOrdering, cloud: &PointCloud, rho: f64) -> Result<()> {
    if !(rho.is_finite() && rho >= 1.0) {
        return Err(Error::InvalidParameter(format!("rho must be finite and >= 1, got {rho}")));
    }
    if ordering.len() != cloud.len() {
        return Err(Error::Inconsistent(format!(
            "ordering has {} entries, cloud has {} points",
            ordering.len(),
            cloud.len()
        )));
    }
    Ok(())
}

/// Same as [`build_supernodal`], reusing a max-rule pattern computed at the
/// same `rho` (or larger) for the neighbour search.
pub(crate) fn build_with_candidates(
    ordering: &MaximinOrdering,
    candidates: &SparsityPattern,
    cloud: &PointCloud,
    rho: f64,
    h: f64,
) -> Result<SupernodalPlan> {
    check_inputs(ordering, cloud, rho)?;
    let lv = build_levels(ordering, h)?;
    let n = cloud.len();
    let perm = ordering.perm();
    let level_pos = &lv.by_position;
    let l_ref = if lv.l_ref.is_finite() && lv.l_ref > 0.0 { lv.l_ref } else { 1.0 };

    let mut nbrs: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for (r, c) in candidates.entries() {
        if r == c {
            continue;
        }
        let d = pseudo(cloud.dist(perm[r], perm[c]), l_ref, h, level_pos[r].min(level_pos[c]));
        if d <= rho {
            nbrs[r].push((c, d));
            nbrs[c].push((r, d));
        }
    }

    // Greedy centers, scanned in maximin order.
    let mut is_center = vec![false; n];
    for p in 0..n {
        let blocked = nbrs[p].iter().any(|&(q, _)| is_center[q] && level_pos[q] == level_pos[p]);
        is_center[p] = !blocked;
    }
    let center_pos: Vec<usize> = (0..n).filter(|&p| is_center[p]).collect();
    let mut node_of_center = vec![usize::MAX; n];
    for (s, &p) in center_pos.iter().enumerate() {
        node_of_center[p] = s;
    }

    // Nearest same-level center, ties to the lowest original index.
    let mut node_pos = vec![usize::MAX; n];
    for p in 0..n {
        if is_center[p] {
            node_pos[p] = node_of_center[p];
            continue;
        }
        let mut best: Option<(f64, usize, usize)> = None;
        for &(q, d) in &nbrs[p] {
            if !is_center[q] || level_pos[q] != level_pos[p] {
                continue;
            }
            let cand = (d, perm[q], q);
            if best.is_none_or(|b| cand.0 < b.0 || (cand.0 == b.0 && cand.1 < b.1)) {
                best = Some(cand);
            }
        }
        let (_, _, q) = best.expect("a non-center has a center within rho");
        node_pos[p] = node_of_center[q];
    }

    let num_nodes = center_pos.len();
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); num_nodes];
    for p in 0..n {
        members[node_pos[p]].push(perm[p]);
    }

    let mut interactions: Vec<BTreeSet<usize>> = (0..num_nodes).map(|s| BTreeSet::from([s])).collect();
    for p in 0..n {
        for &(q, _) in &nbrs[p] {
            let (a, b) = (node_pos[p], node_pos[q]);
            interactions[a].insert(b);
            interactions[b].insert(a);
        }
    }
    let interactions: Vec<Vec<usize>> = interactions.into_iter().map(|s| s.into_iter().collect()).collect();

    // Greedy coloring of each level's interaction graph, in center-index order.
    let node_level: Vec<usize> = center_pos.iter().map(|&p| level_pos[p]).collect();
    let mut by_center: Vec<usize> = (0..num_nodes).collect();
    by_center.sort_by_key(|&s| perm[center_pos[s]]);
    let mut colors = vec![usize::MAX; num_nodes];
    let mut used = Vec::new();
    for &s in &by_center {
        used.clear();
        for &t in &interactions[s] {
            if t != s && node_level[t] == node_level[s] && colors[t] != usize::MAX {
                used.push(colors[t]);
            }
        }
        used.sort_unstable();
        used.dedup();
        let mut c = 0;
        while used.binary_search(&c).is_ok() {
            c += 1;
        }
        colors[s] = c;
    }

    let mut node_order: Vec<usize> = (0..num_nodes).collect();
    node_order.sort_by_key(|&s| (node_level[s], colors[s], perm[center_pos[s]]));
    let order: Vec<usize> = node_order.iter().flat_map(|&s| members[s].iter().copied()).collect();
    let rank = invert_permutation(&order)?;

    let mut assignment = vec![0; n];
    let mut levels = vec![0; n];
    for p in 0..n {
        assignment[perm[p]] = node_pos[p];
        levels[perm[p]] = level_pos[p];
    }
    let centers: Vec<usize> = center_pos.iter().map(|&p| perm[p]).collect();

    let pattern = lift(&members, &interactions, &rank)?;
    Ok(SupernodalPlan {
        rho,
        h,
        l_ref,
        levels,
        centers,
        members,
        assignment,
        colors,
        interactions,
        order,
        pattern,
    })
}

fn lift(members: &[Vec<usize>], interactions: &[Vec<usize>], rank: &[usize]) -> Result<SparsityPattern> {
    let n = rank.len();
    let mut columns: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (s, mine) in members.iter().enumerate() {
        let mut reach: Vec<usize> = interactions[s]
            .iter()
            .flat_map(|&t| members[t].iter().map(|&i| rank[i]))
            .collect();
        reach.sort_unstable();
        for &i in mine {
            let c = rank[i];
            let start = reach.partition_point(|&r| r < c);
            columns[c] = reach[start..].to_vec();
        }
    }
    SparsityPattern::from_columns(columns)
}

/// Recomputes the lifted pattern of a plan from its supernodes and
/// interactions.
pub fn lift_pattern(plan: &SupernodalPlan) -> Result<SparsityPattern> {
    let rank = invert_permutation(&plan.order)?;
    lift(&plan.members, &plan.interactions, &rank)
}
