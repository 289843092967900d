//! Maximin elimination ordering, length scales and distance-based sparsity
//! patterns.
//!
//! The maximin ordering picks, at every step, the point that is furthest
//! from the boundary and from all points picked before it. The distance at
//! which a point is picked is its length scale `l[i]`; length scales are
//! non-increasing along the ordering. The pattern `S_rho` keeps the pair
//! `(i, j)` whenever `dist(x_i, x_j) <= rho * max(l[i], l[j])`, and the first
//! column is always dense.
//!
//! [`maximin_fast`] computes both in `O(rho^d N log^2 N)` with a mutable
//! max-heap and parent/children lists that restrict every distance query to
//! a neighbourhood found on a coarser scale. [`maximin_naive`] is the
//! quadratic reference used to test it.

use crate::error::{Error, Result};
use crate::geometry::PointCloud;
use crate::heap::MutableMaxHeap;

/// Largest problem the quadratic reference routines accept by default.
pub const DEFAULT_ORACLE_CAP: usize = 5000;

/// Relative slack applied to the pruning tests so that rounding in the
/// triangle inequality can never drop a neighbour.
const PRUNE_SLACK: f64 = 1e-12;

/// A maximin ordering of a point cloud.
#[derive(Debug, Clone, PartialEq)]
pub struct MaximinOrdering {
    perm: Vec<usize>,
    lengths: Vec<f64>,
    rank: Vec<usize>,
}

impl MaximinOrdering {
    /// Assembles an ordering from `perm` (position -> original index) and
    /// `lengths` (indexed by original index). Validates the permutation.
    pub fn from_parts(perm: Vec<usize>, lengths: Vec<f64>) -> Result<Self> {
        let n = perm.len();
        if lengths.len() != n {
            return Err(Error::DimensionMismatch { expected: n, found: lengths.len() });
        }
        let rank = invert_permutation(&perm)?;
        Ok(MaximinOrdering { perm, lengths, rank })
    }

    pub fn len(&self) -> usize {
        self.perm.len()
    }

    pub fn is_empty(&self) -> bool {
        self.perm.is_empty()
    }

    /// Position -> original index.
    pub fn perm(&self) -> &[usize] {
        &self.perm
    }

    /// Original index -> position.
    pub fn rank(&self) -> &[usize] {
        &self.rank
    }

    /// Length scales indexed by original index.
    pub fn lengths(&self) -> &[f64] {
        &self.lengths
    }

    /// Length scale of the point at order position `k`.
    pub fn length_at(&self, k: usize) -> f64 {
        self.lengths[self.perm[k]]
    }
}

pub(crate) fn invert_permutation(perm: &[usize]) -> Result<Vec<usize>> {
    let n = perm.len();
    let mut rank = vec![usize::MAX; n];
    for (pos, &i) in perm.iter().enumerate() {
        if i >= n || rank[i] != usize::MAX {
            return Err(Error::Inconsistent("ordering is not a permutation".into()));
        }
        rank[i] = pos;
    }
    Ok(rank)
}

/// Lower-triangular sparsity pattern over order positions in
/// column-compressed form. Row indices of each column are sorted and start
/// with the diagonal.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SparsityPattern {
    n: usize,
    colptr: Vec<usize>,
    rowidx: Vec<usize>,
}

impl SparsityPattern {
    /// Validates and wraps column-compressed storage.
    pub fn from_csc(n: usize, colptr: Vec<usize>, rowidx: Vec<usize>) -> Result<Self> {
        if colptr.len() != n + 1 || colptr[0] != 0 || colptr[n] != rowidx.len() {
            return Err(Error::Format("malformed column pointers".into()));
        }
        for j in 0..n {
            let (s, e) = (colptr[j], colptr[j + 1]);
            if e <= s || e > rowidx.len() {
                return Err(Error::MissingDiagonal(j));
            }
            let rows = &rowidx[s..e];
            if rows[0] != j {
                return Err(Error::MissingDiagonal(j));
            }
            if rows.windows(2).any(|w| w[0] >= w[1]) || rows[rows.len() - 1] >= n {
                return Err(Error::Format(format!("column {j} rows not strictly increasing in range")));
            }
        }
        Ok(SparsityPattern { n, colptr, rowidx })
    }

    /// Builds a pattern from per-column row lists; each list gets the
    /// diagonal added, is sorted and deduplicated.
    pub fn from_columns(columns: Vec<Vec<usize>>) -> Result<Self> {
        let n = columns.len();
        let mut colptr = Vec::with_capacity(n + 1);
        colptr.push(0);
        let mut rowidx = Vec::with_capacity(columns.iter().map(Vec::len).sum::<usize>() + n);
        for (j, mut rows) in columns.into_iter().enumerate() {
            rows.push(j);
            rows.sort_unstable();
            rows.dedup();
            if rows[0] < j {
                return Err(Error::Inconsistent(format!("column {j} has entries above the diagonal")));
            }
            rowidx.extend_from_slice(&rows);
            colptr.push(rowidx.len());
        }
        SparsityPattern::from_csc(n, colptr, rowidx)
    }

    /// The complete lower triangle.
    pub fn full(n: usize) -> Self {
        let columns = (0..n).map(|j| (j..n).collect()).collect();
        Self::from_columns(columns).expect("full pattern is well formed")
    }

    /// Diagonal only.
    pub fn diagonal(n: usize) -> Self {
        SparsityPattern { n, colptr: (0..=n).collect(), rowidx: (0..n).collect() }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.rowidx.len()
    }

    pub fn colptr(&self) -> &[usize] {
        &self.colptr
    }

    pub fn rowidx(&self) -> &[usize] {
        &self.rowidx
    }

    /// Sorted rows of column `j`, diagonal first.
    #[inline]
    pub fn column(&self, j: usize) -> &[usize] {
        &self.rowidx[self.colptr[j]..self.colptr[j + 1]]
    }

    /// Whether `(i, j)` (either orientation) is stored.
    pub fn contains(&self, i: usize, j: usize) -> bool {
        let (r, c) = if i >= j { (i, j) } else { (j, i) };
        self.column(c).binary_search(&r).is_ok()
    }

    /// Storage offset of `(row, col)` with `row >= col`.
    pub fn find(&self, row: usize, col: usize) -> Option<usize> {
        self.column(col).binary_search(&row).ok().map(|p| self.colptr[col] + p)
    }

    /// Iterates `(row, col)` pairs column by column.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.n).flat_map(move |j| self.column(j).iter().map(move |&i| (i, j)))
    }
}

/// Output of the ordering routines.
#[derive(Debug, Clone, PartialEq)]
pub struct MaximinResult {
    pub ordering: MaximinOrdering,
    pub pattern: SparsityPattern,
    /// Set when `rho < 2`, below the range covered by the whole-space
    /// complexity analysis. The result is still exact.
    pub rho_warning: bool,
}

fn check_rho(rho: f64, min: f64) -> Result<()> {
    if !rho.is_finite() || rho < min {
        return Err(Error::InvalidParameter(format!("rho must be finite and >= {min}, got {rho}")));
    }
    Ok(())
}

/// Maximin ordering and max-rule pattern in `O(rho^d N log^2 N)`.
///
/// Ties in the heap and in the parent selection go to the smallest original
/// index; with no boundary the first point is therefore index 0.
pub fn maximin_fast(cloud: &PointCloud, rho: f64) -> Result<MaximinResult> {
    check_rho(rho, 1.0)?;
    let n = cloud.len();
    if n == 0 {
        return Err(Error::EmptyCloud);
    }
    let mut heap = MutableMaxHeap::new((0..n).map(|i| cloud.boundary_dist(i)).collect());
    let mut lengths = vec![0.0; n];
    let mut perm = Vec::with_capacity(n);
    // children[k]: (distance to k, index), sorted; parents[j]: indices whose
    // children lists contain j.
    let mut children: Vec<Vec<(f64, u32)>> = vec![Vec::new(); n];
    let mut parents: Vec<Vec<u32>> = vec![Vec::new(); n];

    let (first, first_len) = heap.pop().expect("non-empty");
    lengths[first] = first_len;
    perm.push(first);
    let mut first_children: Vec<(f64, u32)> = (0..n).map(|j| (cloud.dist(first, j), j as u32)).collect();
    sort_children(&mut first_children);
    for &(d, j) in &first_children {
        let j = j as usize;
        if j != first {
            parents[j].push(first as u32);
            heap.decrease(j, d);
        }
    }
    children[first] = first_children;

    while let Some((i, li)) = heap.pop() {
        lengths[i] = li;
        let reach = rho * li;

        // Closest parent whose children provably include every candidate of i.
        let mut parent = first;
        let mut parent_dist = cloud.dist(i, first);
        for &k in &std::mem::take(&mut parents[i]) {
            let k = k as usize;
            if k == first {
                continue;
            }
            let dik = cloud.dist(i, k);
            if (dik + reach) * (1.0 + PRUNE_SLACK) <= rho * lengths[k]
                && (dik < parent_dist || (dik == parent_dist && k < parent))
            {
                parent = k;
                parent_dist = dik;
            }
        }

        let bound = (parent_dist + reach) * (1.0 + PRUNE_SLACK);
        let mut mine = vec![(0.0, i as u32)];
        for &(djk, j) in &children[parent] {
            if djk > bound {
                break;
            }
            let j = j as usize;
            if j == i || !heap.contains(j) {
                continue;
            }
            let dij = cloud.dist(i, j);
            heap.decrease(j, dij);
            if dij <= reach {
                mine.push((dij, j as u32));
                parents[j].push(i as u32);
            }
        }
        sort_children(&mut mine);
        children[i] = mine;
        perm.push(i);
    }

    let rank = invert_permutation(&perm)?;
    let columns = perm
        .iter()
        .map(|&i| children[i].iter().map(|&(_, j)| rank[j as usize]).collect())
        .collect();
    Ok(MaximinResult {
        ordering: MaximinOrdering { perm, lengths, rank },
        pattern: SparsityPattern::from_columns(columns)?,
        rho_warning: rho < 2.0,
    })
}

fn sort_children(c: &mut [(f64, u32)]) {
    c.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
}

/// Quadratic reference for [`maximin_fast`], limited to
/// [`DEFAULT_ORACLE_CAP`] points.
pub fn maximin_naive(cloud: &PointCloud, rho: f64) -> Result<MaximinResult> {
    maximin_naive_with_cap(cloud, rho, DEFAULT_ORACLE_CAP)
}

pub fn maximin_naive_with_cap(cloud: &PointCloud, rho: f64, cap: usize) -> Result<MaximinResult> {
    check_rho(rho, 0.0)?;
    let n = cloud.len();
    if n == 0 {
        return Err(Error::EmptyCloud);
    }
    if n > cap {
        return Err(Error::OracleCapExceeded { n, cap });
    }
    let mut key: Vec<f64> = (0..n).map(|i| cloud.boundary_dist(i)).collect();
    let mut taken = vec![false; n];
    let mut perm = Vec::with_capacity(n);
    let mut lengths = vec![0.0; n];
    for _ in 0..n {
        let mut best = usize::MAX;
        for j in 0..n {
            if !taken[j] && (best == usize::MAX || key[j] > key[best]) {
                best = j;
            }
        }
        taken[best] = true;
        lengths[best] = key[best];
        perm.push(best);
        for j in 0..n {
            if !taken[j] {
                key[j] = key[j].min(cloud.dist(best, j));
            }
        }
    }

    let mut columns = vec![Vec::new(); n];
    for (p, col) in columns.iter_mut().enumerate() {
        let i = perm[p];
        let reach = rho * lengths[i];
        for (q, &j) in perm.iter().enumerate().skip(p + 1) {
            if p == 0 || cloud.dist(i, j) <= reach {
                col.push(q);
            }
        }
    }
    Ok(MaximinResult {
        ordering: MaximinOrdering::from_parts(perm, lengths)?,
        pattern: SparsityPattern::from_columns(columns)?,
        rho_warning: rho < 2.0,
    })
}

/// Pairs `(earlier, later)` of a given ordering with
/// `dist <= rho * l[earlier]`, plus the dense first column, as a pattern
/// over order positions.
///
/// Replays the neighbourhood pruning of [`maximin_fast`] with the ordering
/// already fixed, so it works for any `rho > 0`.
pub fn max_rule_pattern(ordering: &MaximinOrdering, cloud: &PointCloud, rho: f64) -> Result<SparsityPattern> {
    check_consistent(ordering, cloud)?;
    if !rho.is_finite() || rho <= 0.0 {
        return Err(Error::InvalidParameter(format!("rho must be finite and positive, got {rho}")));
    }
    let n = cloud.len();
    let perm = ordering.perm();
    let rank = ordering.rank();
    let lengths = ordering.lengths();
    let first = perm[0];

    let mut children: Vec<Vec<(f64, u32)>> = vec![Vec::new(); n];
    let mut parents: Vec<Vec<u32>> = vec![Vec::new(); n];
    let mut first_children: Vec<(f64, u32)> = (0..n).map(|j| (cloud.dist(first, j), j as u32)).collect();
    sort_children(&mut first_children);
    children[first] = first_children;

    for (pos, &i) in perm.iter().enumerate().skip(1) {
        let reach = rho * lengths[i];
        let mut parent = first;
        let mut parent_dist = cloud.dist(i, first);
        for &k in &std::mem::take(&mut parents[i]) {
            let k = k as usize;
            let dik = cloud.dist(i, k);
            if (dik + reach) * (1.0 + PRUNE_SLACK) <= rho * lengths[k]
                && (dik < parent_dist || (dik == parent_dist && k < parent))
            {
                parent = k;
                parent_dist = dik;
            }
        }
        let bound = (parent_dist + reach) * (1.0 + PRUNE_SLACK);
        let mut mine = vec![(0.0, i as u32)];
        for &(djk, j) in &children[parent] {
            if djk > bound {
                break;
            }
            let j = j as usize;
            if rank[j] <= pos {
                continue;
            }
            let dij = cloud.dist(i, j);
            if dij <= reach {
                mine.push((dij, j as u32));
                parents[j].push(i as u32);
            }
        }
        sort_children(&mut mine);
        children[i] = mine;
    }
    let columns = perm
        .iter()
        .map(|&i| children[i].iter().map(|&(_, j)| rank[j as usize]).collect())
        .collect();
    SparsityPattern::from_columns(columns)
}

fn check_consistent(ordering: &MaximinOrdering, cloud: &PointCloud) -> Result<()> {
    if ordering.len() != cloud.len() {
        return Err(Error::DimensionMismatch { expected: cloud.len(), found: ordering.len() });
    }
    if ordering.is_empty() {
        return Err(Error::EmptyCloud);
    }
    Ok(())
}

/// Min-rule pattern `dist(x_i, x_j) <= rho * min(l[i], l[j])`, expressed in
/// the *reversed* ordering: column `c` holds the point at maximin position
/// `N - 1 - c`, and its rows are coarser points.
///
/// Used to factor precision matrices, whose Cholesky factors are sparse when
/// eliminating fine scales first.
pub fn min_rule_pattern(ordering: &MaximinOrdering, cloud: &PointCloud, rho: f64) -> Result<SparsityPattern> {
    check_consistent(ordering, cloud)?;
    if !rho.is_finite() || rho < 0.0 {
        return Err(Error::InvalidParameter(format!("rho must be finite and nonnegative, got {rho}")));
    }
    let n = cloud.len();
    if rho == 0.0 {
        return Ok(SparsityPattern::diagonal(n));
    }
    let perm = ordering.perm();
    let lengths = ordering.lengths();
    let max_rule = max_rule_pattern(ordering, cloud, rho)?;
    let mut columns = vec![Vec::new(); n];
    for (row, col) in max_rule.entries() {
        if row == col {
            continue;
        }
        // col is the coarser point, row the finer one.
        let (coarse, fine) = (perm[col], perm[row]);
        if cloud.dist(coarse, fine) <= rho * lengths[fine] {
            columns[n - 1 - row].push(n - 1 - col);
        }
    }
    SparsityPattern::from_columns(columns)
}

/// Reverses an ordering's permutation (position `p` -> `perm[N - 1 - p]`).
pub fn reversed_perm(ordering: &MaximinOrdering) -> Vec<usize> {
    ordering.perm().iter().rev().copied().collect()
}

/// Level hierarchy implied by a maximin ordering.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelAssignment {
    /// Level (starting at 1) of each order position; non-decreasing.
    pub by_position: Vec<usize>,
    /// Reference length the ratios are taken against.
    pub l_ref: f64,
    pub h: f64,
    /// Number of levels.
    pub count: usize,
}

impl LevelAssignment {
    /// Level of the point at order position `k`.
    pub fn level(&self, k: usize) -> usize {
        self.by_position[k]
    }
}

/// Splits the ordering into levels `h^k <= l / l_ref < h^(k-1)`.
///
/// `l_ref` is the first length scale; when that is infinite (no boundary)
/// the second one is used instead and the first point is put on level 1.
/// Ratios at or above 1 land on level 1. Zero length scales (points on the
/// boundary) go one level below the deepest positive ratio.
pub fn build_levels(ordering: &MaximinOrdering, h: f64) -> Result<LevelAssignment> {
    if !(h > 0.0 && h < 1.0) {
        return Err(Error::InvalidParameter(format!("h must lie in (0, 1), got {h}")));
    }
    let n = ordering.len();
    if n == 0 {
        return Err(Error::EmptyCloud);
    }
    let l_ref = if ordering.length_at(0).is_finite() || n == 1 {
        ordering.length_at(0)
    } else {
        ordering.length_at(1)
    };
    let mut by_position = vec![1usize; n];
    let mut zero = Vec::new();
    if l_ref.is_finite() && l_ref > 0.0 {
        for (k, level) in by_position.iter_mut().enumerate() {
            let ratio = ordering.length_at(k) / l_ref;
            if ratio > 0.0 {
                *level = level_of_ratio(ratio, h);
            } else {
                zero.push(k);
            }
        }
    }
    let deepest = by_position.iter().copied().max().unwrap_or(1);
    for k in zero.iter().copied() {
        by_position[k] = deepest + 1;
    }
    let count = by_position.iter().copied().max().unwrap_or(1);
    Ok(LevelAssignment { by_position, l_ref, h, count })
}

fn level_of_ratio(ratio: f64, h: f64) -> usize {
    if ratio >= 1.0 {
        return 1;
    }
    let mut k = ((ratio.ln() / h.ln()).floor() as i64 + 1).max(1);
    while h.powi(k as i32) > ratio {
        k += 1;
    }
    while k > 1 && h.powi(k as i32 - 1) <= ratio {
        k -= 1;
    }
    k as usize
}
