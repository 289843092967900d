//! Little-endian binary containers for points, orderings, factors and
//! vectors.
//!
//! | magic  | contents |
//! |--------|----------|
//! | `KPTS` | u32 version (1), u64 N, u32 d, f64 coordinates (row-major) |
//! | `KORD` | u64 N, u64 perm, f64 lengths by original index, u64 colptr, u64 rowidx, optional `SNPL` section |
//! | `SNPL` | u64 S, u32 levels by original index, u64 assigned center by original index, u32 colors by supernode |
//! | `KCHL` | u64 N, u64 perm, u64 colptr, u64 rowidx, f64 values, u64 rank |
//! | `KVEC` | u64 N, f64 values |
//!
//! Supernodes in `SNPL` are numbered by the position of their center in the
//! maximin ordering. Writing what was read reproduces the input bytes.

use std::io::{self, Read, Write};

use byteorder::{LittleEndian as LE, ReadBytesExt, WriteBytesExt};

use crate::error::{Error, Result};
use crate::geometry::{BoundaryPolicy, PointCloud};
use crate::ichol::SparseLowerFactor;
use crate::ordering::{MaximinOrdering, SparsityPattern};
use crate::supernodal::SupernodalPlan;

pub const POINTS_MAGIC: &[u8; 4] = b"KPTS";
pub const ORDER_MAGIC: &[u8; 4] = b"KORD";
pub const PLAN_MAGIC: &[u8; 4] = b"SNPL";
pub const FACTOR_MAGIC: &[u8; 4] = b"KCHL";
pub const VECTOR_MAGIC: &[u8; 4] = b"KVEC";
pub const POINTS_VERSION: u32 = 1;

fn eof(e: io::Error) -> Error {
    if e.kind() == io::ErrorKind::UnexpectedEof {
        Error::Format("file is truncated".into())
    } else {
        Error::Io(e)
    }
}

fn expect_magic(r: &mut impl Read, magic: &[u8; 4]) -> Result<()> {
    let mut got = [0u8; 4];
    r.read_exact(&mut got).map_err(eof)?;
    if &got != magic {
        return Err(Error::Format(format!(
            "expected {} header, found {:?}",
            String::from_utf8_lossy(magic),
            String::from_utf8_lossy(&got)
        )));
    }
    Ok(())
}

fn read_len(r: &mut impl Read) -> Result<usize> {
    let v = r.read_u64::<LE>().map_err(eof)?;
    usize::try_from(v).map_err(|_| Error::Format(format!("length {v} does not fit in memory")))
}

// Capacity hints are clamped so a corrupt length cannot trigger a huge
// allocation before the data runs out.
fn read_usizes(r: &mut impl Read, n: usize) -> Result<Vec<usize>> {
    let mut out = Vec::with_capacity(n.min(1 << 20));
    for _ in 0..n {
        out.push(read_len(r)?);
    }
    Ok(out)
}

fn read_f64s(r: &mut impl Read, n: usize) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(n.min(1 << 20));
    for _ in 0..n {
        out.push(r.read_f64::<LE>().map_err(eof)?);
    }
    Ok(out)
}

fn write_usizes(w: &mut impl Write, v: &[usize]) -> Result<()> {
    for &x in v {
        w.write_u64::<LE>(x as u64)?;
    }
    Ok(())
}

fn write_f64s(w: &mut impl Write, v: &[f64]) -> Result<()> {
    for &x in v {
        w.write_f64::<LE>(x)?;
    }
    Ok(())
}

fn expect_end(r: &mut impl Read) -> Result<()> {
    let mut probe = [0u8; 1];
    match r.read(&mut probe)? {
        0 => Ok(()),
        _ => Err(Error::Format("trailing bytes after payload".into())),
    }
}

pub fn write_points(w: &mut impl Write, cloud: &PointCloud) -> Result<()> {
    w.write_all(POINTS_MAGIC)?;
    w.write_u32::<LE>(POINTS_VERSION)?;
    w.write_u64::<LE>(cloud.len() as u64)?;
    w.write_u32::<LE>(cloud.dim() as u32)?;
    write_f64s(w, cloud.coords())
}

/// Reads a `KPTS` file. The cloud gets the given boundary policy.
pub fn read_points(r: &mut impl Read, boundary: BoundaryPolicy) -> Result<PointCloud> {
    expect_magic(r, POINTS_MAGIC)?;
    let version = r.read_u32::<LE>().map_err(eof)?;
    if version != POINTS_VERSION {
        return Err(Error::Format(format!("unsupported point file version {version}")));
    }
    let n = read_len(r)?;
    let d = r.read_u32::<LE>().map_err(eof)? as usize;
    let total = n.checked_mul(d).ok_or_else(|| Error::Format("point count overflows".into()))?;
    let coords = read_f64s(r, total)?;
    expect_end(r)?;
    PointCloud::new(coords, d, boundary)
}

/// Supernodal plan data stored next to an ordering.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanSection {
    /// Level of each point, by original index.
    pub levels: Vec<u32>,
    /// Assigned center (original index) of each point.
    pub assignment: Vec<usize>,
    /// Color of each supernode, supernodes numbered by center position in
    /// the maximin ordering.
    pub colors: Vec<u32>,
}

impl PlanSection {
    /// Extracts the stored fields; `ordering` is the maximin ordering the
    /// plan was built from.
    pub fn from_plan(plan: &SupernodalPlan, ordering: &MaximinOrdering) -> Self {
        // Centers are numbered in maximin order by construction; re-derive
        // that numbering so the file does not depend on it.
        let rank = ordering.rank();
        let mut nodes: Vec<usize> = (0..plan.num_supernodes()).collect();
        nodes.sort_by_key(|&s| rank[plan.centers[s]]);
        PlanSection {
            levels: plan.levels.iter().map(|&l| l as u32).collect(),
            assignment: plan.assigned_centers(),
            colors: nodes.iter().map(|&s| plan.colors[s] as u32).collect(),
        }
    }
}

/// Contents of a `KORD` file.
#[derive(Debug, Clone, PartialEq)]
pub struct OrderFile {
    pub ordering: MaximinOrdering,
    pub pattern: SparsityPattern,
    pub plan: Option<PlanSection>,
}

fn write_pattern(w: &mut impl Write, p: &SparsityPattern) -> Result<()> {
    write_usizes(w, p.colptr())?;
    write_usizes(w, p.rowidx())
}

fn read_pattern(r: &mut impl Read, n: usize) -> Result<SparsityPattern> {
    let colptr = read_usizes(r, n + 1)?;
    let nnz = *colptr.last().unwrap_or(&0);
    let rowidx = read_usizes(r, nnz)?;
    SparsityPattern::from_csc(n, colptr, rowidx)
}

pub fn write_ordering(
    w: &mut impl Write,
    ordering: &MaximinOrdering,
    pattern: &SparsityPattern,
    plan: Option<&PlanSection>,
) -> Result<()> {
    let n = ordering.len();
    if pattern.n() != n {
        return Err(Error::DimensionMismatch { expected: n, found: pattern.n() });
    }
    w.write_all(ORDER_MAGIC)?;
    w.write_u64::<LE>(n as u64)?;
    write_usizes(w, ordering.perm())?;
    write_f64s(w, ordering.lengths())?;
    write_pattern(w, pattern)?;
    if let Some(p) = plan {
        if p.levels.len() != n || p.assignment.len() != n {
            return Err(Error::DimensionMismatch { expected: n, found: p.levels.len().min(p.assignment.len()) });
        }
        w.write_all(PLAN_MAGIC)?;
        w.write_u64::<LE>(p.colors.len() as u64)?;
        for &l in &p.levels {
            w.write_u32::<LE>(l)?;
        }
        write_usizes(w, &p.assignment)?;
        for &c in &p.colors {
            w.write_u32::<LE>(c)?;
        }
    }
    Ok(())
}

pub fn read_ordering(r: &mut impl Read) -> Result<OrderFile> {
    expect_magic(r, ORDER_MAGIC)?;
    let n = read_len(r)?;
    let perm = read_usizes(r, n)?;
    let lengths = read_f64s(r, n)?;
    let ordering = MaximinOrdering::from_parts(perm, lengths)?;
    let pattern = read_pattern(r, n)?;
    let mut tag = [0u8; 4];
    let got = read_up_to(r, &mut tag)?;
    let plan = match got {
        0 => None,
        4 if &tag == PLAN_MAGIC => {
            let s = read_len(r)?;
            let mut levels = Vec::with_capacity(n.min(1 << 20));
            for _ in 0..n {
                levels.push(r.read_u32::<LE>().map_err(eof)?);
            }
            let assignment = read_usizes(r, n)?;
            let mut colors = Vec::with_capacity(s.min(1 << 20));
            for _ in 0..s {
                colors.push(r.read_u32::<LE>().map_err(eof)?);
            }
            if assignment.iter().any(|&c| c >= n) {
                return Err(Error::Format("assigned center out of range".into()));
            }
            let centers = assignment.iter().enumerate().filter(|&(i, &c)| i == c).count();
            if centers != s {
                return Err(Error::Format(format!("plan lists {s} colors for {centers} supernodes")));
            }
            expect_end(r)?;
            Some(PlanSection { levels, assignment, colors })
        }
        _ => return Err(Error::Format("unknown section after ordering".into())),
    };
    Ok(OrderFile { ordering, pattern, plan })
}

fn read_up_to(r: &mut impl Read, buf: &mut [u8]) -> Result<usize> {
    let mut filled = 0;
    while filled < buf.len() {
        match r.read(&mut buf[filled..])? {
            0 => break,
            k => filled += k,
        }
    }
    Ok(filled)
}

pub fn write_factor(w: &mut impl Write, f: &SparseLowerFactor) -> Result<()> {
    w.write_all(FACTOR_MAGIC)?;
    w.write_u64::<LE>(f.n() as u64)?;
    write_usizes(w, &f.perm)?;
    write_pattern(w, &f.pattern)?;
    write_f64s(w, &f.values)?;
    w.write_u64::<LE>(f.rank as u64)?;
    Ok(())
}

/// Reads a `KCHL` file; zeroed columns are recovered from zero diagonals.
pub fn read_factor(r: &mut impl Read) -> Result<SparseLowerFactor> {
    expect_magic(r, FACTOR_MAGIC)?;
    let n = read_len(r)?;
    let perm = read_usizes(r, n)?;
    let pattern = read_pattern(r, n)?;
    let values = read_f64s(r, pattern.nnz())?;
    let rank = read_len(r)?;
    expect_end(r)?;
    crate::ordering::invert_permutation(&perm)?;
    let cp = pattern.colptr();
    let mut zeroed = Vec::new();
    for j in 0..n {
        let d = values[cp[j]];
        if !(d >= 0.0) {
            return Err(Error::Format(format!("negative diagonal in column {j}")));
        }
        if d == 0.0 {
            zeroed.push(j);
        }
    }
    if rank + zeroed.len() != n {
        return Err(Error::Format(format!("stored rank {rank} disagrees with {} zero pivots", zeroed.len())));
    }
    Ok(SparseLowerFactor { pattern, values, perm, rank, zeroed_columns: zeroed })
}

pub fn write_vector(w: &mut impl Write, v: &[f64]) -> Result<()> {
    w.write_all(VECTOR_MAGIC)?;
    w.write_u64::<LE>(v.len() as u64)?;
    write_f64s(w, v)
}

pub fn read_vector(r: &mut impl Read) -> Result<Vec<f64>> {
    expect_magic(r, VECTOR_MAGIC)?;
    let n = read_len(r)?;
    let v = read_f64s(r, n)?;
    expect_end(r)?;
    Ok(v)
}

/// One value per line in the shortest form that parses back exactly.
pub fn write_vector_text(w: &mut impl Write, v: &[f64]) -> Result<()> {
    for x in v {
        writeln!(w, "{x}")?;
    }
    Ok(())
}

/// Reads one value per line; blank lines are skipped.
pub fn read_vector_text(r: &mut impl Read) -> Result<Vec<f64>> {
    let mut s = String::new();
    r.read_to_string(&mut s)?;
    s.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(k, l)| {
            l.trim().parse::<f64>().map_err(|_| Error::Format(format!("line {}: not a number: {l:?}", k + 1)))
        })
        .collect()
}

/// Reads a vector in either format, detected by the `KVEC` header.
pub fn read_vector_any(bytes: &[u8]) -> Result<Vec<f64>> {
    if bytes.starts_with(VECTOR_MAGIC) {
        read_vector(&mut &bytes[..])
    } else {
        read_vector_text(&mut &bytes[..])
    }
}
