//! Brute-force checks of a supernodal plan, recomputed from the cloud and the
//! maximin ordering without reusing the construction code.

use std::collections::BTreeSet;

use kchol::geometry::PointCloud;
use kchol::ordering::MaximinOrdering;
use kchol::supernodal::SupernodalPlan;

#[allow(dead_code)]
#[derive(Debug)]
pub struct PlanReport {
    /// Largest pseudodistance over rho among lifted pattern entries.
    pub max_ratio: f64,
    /// Lifted entries with pseudodistance above 2 rho.
    pub over_two_rho: usize,
    pub max_colors: usize,
}

fn levels_from_lengths(ordering: &MaximinOrdering, h: f64) -> (Vec<usize>, f64) {
    let n = ordering.len();
    let first = ordering.length_at(0);
    let l_ref = if first.is_finite() || n == 1 { first } else { ordering.length_at(1) };
    let mut by_pos = vec![1usize; n];
    if l_ref.is_finite() && l_ref > 0.0 {
        for k in 0..n {
            let ratio = ordering.length_at(k) / l_ref;
            if ratio > 0.0 {
                let mut lev = 1;
                while h.powi(lev as i32) > ratio {
                    lev += 1;
                }
                by_pos[k] = lev;
            } else {
                by_pos[k] = 0;
            }
        }
        let deepest = by_pos.iter().copied().max().unwrap().max(1);
        for lev in by_pos.iter_mut() {
            if *lev == 0 {
                *lev = deepest + 1;
            }
        }
    }
    let mut levels = vec![0; n];
    for (k, &i) in ordering.perm().iter().enumerate() {
        levels[i] = by_pos[k];
    }
    (levels, l_ref)
}

pub fn check_plan(plan: &SupernodalPlan, ordering: &MaximinOrdering, cloud: &PointCloud) -> Result<PlanReport, String> {
    let n = cloud.len();
    let rho = plan.rho;
    let (levels, l_ref) = levels_from_lengths(ordering, plan.h);
    if levels != plan.levels {
        return Err("levels differ from the length-scale recomputation".into());
    }
    let scale = if l_ref.is_finite() && l_ref > 0.0 { l_ref } else { 1.0 };
    if plan.l_ref != scale {
        return Err(format!("l_ref {} != {}", plan.l_ref, scale));
    }
    let d = |i: usize, j: usize| cloud.dist(i, j) / (scale * plan.h.powi(levels[i].min(levels[j]) as i32));

    // Supernodes partition the indices and stay on one level.
    let s_count = plan.centers.len();
    let mut seen = vec![false; n];
    for (s, m) in plan.members.iter().enumerate() {
        if !m.contains(&plan.centers[s]) {
            return Err(format!("center of supernode {s} is not a member"));
        }
        for &i in m {
            if seen[i] {
                return Err(format!("index {i} in two supernodes"));
            }
            seen[i] = true;
            if plan.assignment[i] != s {
                return Err(format!("assignment of {i} disagrees with member lists"));
            }
            if levels[i] != levels[plan.centers[s]] {
                return Err(format!("index {i} assigned across levels"));
            }
        }
    }
    if seen.iter().any(|&b| !b) {
        return Err("some index belongs to no supernode".into());
    }

    // Balls of radius rho/2 around same-level centers are disjoint.
    for i in 0..n {
        let hits = plan
            .centers
            .iter()
            .filter(|&&c| levels[c] == levels[i] && d(i, c) <= rho / 2.0)
            .count();
        if hits > 1 {
            return Err(format!("index {i} lies in {hits} center balls of radius rho/2"));
        }
    }

    // Nearest-center assignment within rho, ties to the lowest index.
    for i in 0..n {
        let best = plan
            .centers
            .iter()
            .copied()
            .filter(|&c| levels[c] == levels[i])
            .min_by(|&a, &b| d(i, a).partial_cmp(&d(i, b)).unwrap().then(a.cmp(&b)))
            .unwrap();
        let got = plan.centers[plan.assignment[i]];
        if got != best {
            return Err(format!("index {i} assigned to {got}, nearest is {best}"));
        }
        if d(i, got) > rho {
            return Err(format!("index {i} is {} from its center", d(i, got)));
        }
    }

    // Auxiliary pattern from all pairs.
    let mut aux: Vec<BTreeSet<usize>> = (0..s_count).map(|s| BTreeSet::from([s])).collect();
    for i in 0..n {
        for j in 0..i {
            if d(i, j) <= rho {
                let (a, b) = (plan.assignment[i], plan.assignment[j]);
                aux[a].insert(b);
                aux[b].insert(a);
            }
        }
    }
    for s in 0..s_count {
        let want: Vec<usize> = aux[s].iter().copied().collect();
        if plan.interactions[s] != want {
            return Err(format!("interactions of supernode {s} differ from brute force"));
        }
    }

    // Coloring.
    for s in 0..s_count {
        for &t in &aux[s] {
            if t != s && levels[plan.centers[s]] == levels[plan.centers[t]] && plan.colors[s] == plan.colors[t] {
                return Err(format!("adjacent supernodes {s} and {t} share color {}", plan.colors[s]));
            }
        }
    }

    // Ordering rules.
    let mut sorted = plan.order.clone();
    sorted.sort_unstable();
    if sorted != (0..n).collect::<Vec<_>>() {
        return Err("order is not a permutation".into());
    }
    let node_seq: Vec<usize> = plan.order.iter().map(|&i| plan.assignment[i]).collect();
    let mut closed_nodes = BTreeSet::new();
    let mut closed_colors = BTreeSet::new();
    for p in 0..n {
        let i = plan.order[p];
        if p > 0 {
            let prev = plan.order[p - 1];
            if levels[prev] > levels[i] {
                return Err(format!("levels decrease at position {p}"));
            }
            let (a, b) = (node_seq[p - 1], node_seq[p]);
            if a != b {
                closed_nodes.insert(a);
                if plan.colors[a] != plan.colors[b] || levels[prev] != levels[i] {
                    closed_colors.insert((levels[prev], plan.colors[a]));
                }
            }
        }
        if closed_nodes.contains(&node_seq[p]) {
            return Err(format!("supernode {} is not contiguous", node_seq[p]));
        }
        if closed_colors.contains(&(levels[i], plan.colors[node_seq[p]])) {
            return Err(format!("color {} on level {} is not contiguous", plan.colors[node_seq[p]], levels[i]));
        }
    }

    // Lifted pattern equals the lift of the auxiliary pattern.
    let mut rank = vec![0; n];
    for (p, &i) in plan.order.iter().enumerate() {
        rank[i] = p;
    }
    let mut max_ratio = 0.0f64;
    let mut over_two_rho = 0;
    let mut nnz = 0;
    for i in 0..n {
        for j in 0..n {
            if rank[i] < rank[j] {
                continue;
            }
            let lifted = aux[plan.assignment[i]].contains(&plan.assignment[j]);
            if lifted != plan.pattern.contains(rank[i], rank[j]) {
                return Err(format!("pattern entry ({i}, {j}) disagrees with the lift"));
            }
            let dij = d(i, j);
            if dij <= rho && !lifted {
                return Err(format!("pair ({i}, {j}) at pseudodistance {dij} missing"));
            }
            if lifted {
                nnz += 1;
                max_ratio = max_ratio.max(dij / rho);
                if dij > 2.0 * rho {
                    over_two_rho += 1;
                }
            }
        }
    }
    if nnz != plan.pattern.nnz() {
        return Err("pattern has entries outside the lift".into());
    }
    if max_ratio > 5.0 * (1.0 + 1e-12) {
        return Err(format!("lifted entry at {max_ratio} rho exceeds the triangle bound 5 rho"));
    }
    Ok(PlanReport { max_ratio, over_two_rho, max_colors: plan.max_colors() })
}
