//! Canonical vertex enumeration of one forest factor, plus the
//! component-pool bookkeeping layered on it.
//!
//! Components occupy *positions*: finite-multiplicity batches fill a
//! contiguous prefix in listed order, then the omega-multiplicity batches
//! share all remaining positions round-robin. A vertex is coded as
//! `pair(position, local)`; its global index is the rank of that code among
//! all valid codes, which dovetails the components fairly. Ranks are
//! computed in closed form per batch (arithmetic-progression sums), so the
//! bijection stays exact far beyond any materialized window.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::count::Count;
use crate::enumeration::{isqrt, pair, unpair, unpair_wide};
use crate::error::{Error, Result};
use crate::forest::generator::Shape;

/// A vertex of one factor, named by its canonical index.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ForestVertex {
    pub factor: u64,
    pub index: u64,
}

/// A component of one factor, named by pool and rank within the pool.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ComponentRef {
    pub factor: u64,
    pub pool: u64,
    pub rank: u64,
}

/// Pool and intra-pool rank of the component at a canonical position: the
/// position-0 component forms pool 0 alone; every later pool is infinite.
pub fn pool_of_position(position: u64) -> (u64, u64) {
    if position == 0 {
        (0, 0)
    } else {
        let (a, b) = unpair(position - 1);
        (a + 1, b)
    }
}

/// Canonical position of the rank-`rank` component of a pool.
pub fn position_of_pool(pool: u64, rank: u64) -> Result<u64> {
    if pool == 0 {
        if rank == 0 {
            Ok(0)
        } else {
            Err(Error::PoolZeroRank(rank))
        }
    } else {
        pair(pool - 1, rank)?
            .checked_add(1)
            .ok_or(Error::Overflow("pool position"))
    }
}

fn ck_add(a: u128, b: u128) -> Result<u128> {
    a.checked_add(b)
        .ok_or(Error::Overflow("factor enumeration"))
}

fn ck_mul(a: u128, b: u128) -> Result<u128> {
    a.checked_mul(b)
        .ok_or(Error::Overflow("factor enumeration"))
}

/// Code of the vertex at (position, local).
pub(crate) fn code_of(position: u64, local: u64) -> Result<u128> {
    let s = position as u128 + local as u128;
    Ok(ck_mul(s, s + 1)? / 2 + local as u128)
}

/// Largest s with s(s+3)/2 < x, for x ≥ 1. Counts how far a fixed-position
/// scan of codes reaches: code_of(p, l) < c iff (p+l)(p+l+3)/2 < c+p.
fn smax(x: u128) -> Result<u128> {
    debug_assert!(x > 0);
    let r = isqrt(ck_add(ck_mul(8, x)?, 9)?);
    let mut s = r / 2;
    while s > 0 && ck_mul(s, s + 3)? / 2 >= x {
        s -= 1;
    }
    while ck_mul(s + 1, s + 4)? / 2 < x {
        s += 1;
    }
    Ok(s)
}

/// Largest s with s(s+1)/2 < x, for x ≥ 1.
fn tmax(x: u128) -> Result<u128> {
    debug_assert!(x > 0);
    let r = isqrt(ck_add(ck_mul(8, x)?, 1)?);
    let mut s = r / 2 + 1;
    while s > 0 && ck_mul(s, s + 1)? / 2 >= x {
        s -= 1;
    }
    while ck_mul(s + 1, s + 2)? / 2 < x {
        s += 1;
    }
    Ok(s)
}

/// Number of locals l (ignoring component order) with code_of(p, l) < c.
fn lmax(p: u128, c: u128) -> Result<u128> {
    if c == 0 {
        return Ok(0);
    }
    let s = smax(ck_add(c, p)?)?;
    Ok(if s < p { 0 } else { s - p + 1 })
}

/// Number of positions p with code_of(p, l) < c; they form a prefix 0..pmax.
fn pmax(l: u128, c: u128) -> Result<u128> {
    if c <= l {
        return Ok(0);
    }
    let t = tmax(c - l)?;
    Ok(if t < l { 0 } else { t - l + 1 })
}

/// Terms of the progression first, first+step, … lying below `bound`.
fn ap_count(first: u128, step: u128, bound: u128) -> u128 {
    if bound <= first {
        0
    } else {
        (bound - first).div_ceil(step)
    }
}

/// Sum of lmax(p, c) over the progression p = first, first+step, …
/// restricted to p < bound. Walks intervals on which smax(c+p) is constant;
/// their number is O(smax(c+bound) − smax(c)), tiny even for huge c.
fn sum_lmax_over_ap(first: u128, step: u128, bound: u128, c: u128) -> Result<u128> {
    if c == 0 {
        return Ok(0);
    }
    let p_end = pmax(0, c)?.min(bound);
    if p_end <= first {
        return Ok(0);
    }
    let mut total: u128 = 0;
    let mut p = first;
    while p < p_end {
        let s = smax(ck_add(c, p)?)?;
        // smax(c+q) = s exactly while c+q ≤ (s+1)(s+4)/2.
        let cut = (ck_mul(s + 1, s + 4)? / 2 + 1)
            .saturating_sub(c)
            .max(p + 1)
            .min(p_end);
        let terms = ap_count(p, step, cut);
        // Each term q contributes s − q + 1; q < p_end keeps that positive.
        let linear = ck_mul(terms, s + 1 - p)?;
        let drift = ck_mul(step, ck_mul(terms, terms - 1)? / 2)?;
        total = ck_add(total, linear - drift)?;
        p = ck_add(p, ck_mul(terms, step)?)?;
    }
    Ok(total)
}

/// Position layout of one factor: finite batches as a prefix, omega batches
/// round-robin afterwards.
#[derive(Clone, Debug)]
pub struct FactorLayout {
    blocks: Vec<FiniteBlock>,
    omega: Vec<Arc<Shape>>,
    finite_total: u64,
}

#[derive(Clone, Debug)]
struct FiniteBlock {
    start: u64,
    count: u64,
    shape: Arc<Shape>,
}

impl FactorLayout {
    /// Builds the layout; at least one batch must repeat omega times so
    /// every position is occupied.
    pub fn new(batches: Vec<(Arc<Shape>, Count)>) -> Result<FactorLayout> {
        let mut blocks = Vec::new();
        let mut omega = Vec::new();
        let mut start = 0u64;
        for (shape, mult) in batches {
            match mult {
                Count::Finite(count) => {
                    blocks.push(FiniteBlock {
                        start,
                        count,
                        shape,
                    });
                    start = start
                        .checked_add(count)
                        .ok_or(Error::Overflow("finite batch prefix"))?;
                }
                Count::Omega => omega.push(shape),
            }
        }
        if omega.is_empty() {
            return Err(Error::InvalidFamily(1));
        }
        Ok(FactorLayout {
            blocks,
            omega,
            finite_total: start,
        })
    }

    pub fn shape_at(&self, position: u64) -> &Shape {
        if position < self.finite_total {
            for b in &self.blocks {
                if position < b.start + b.count {
                    return &b.shape;
                }
            }
            unreachable!("finite blocks tile the position prefix");
        }
        let g = ((position - self.finite_total) % self.omega.len() as u64) as usize;
        &self.omega[g]
    }

    pub fn order_at(&self, position: u64) -> Count {
        self.shape_at(position).order()
    }

    /// Number of valid vertex codes strictly below `c`.
    fn count_below(&self, c: u128) -> Result<u128> {
        let mut total: u128 = 0;
        for b in &self.blocks {
            let start = b.start as u128;
            let end = start + b.count as u128;
            match b.shape.order() {
                Count::Finite(n) => {
                    for l in 0..n {
                        if l as u128 >= c {
                            break;
                        }
                        let thr = pmax(l as u128, c)?.min(end);
                        if thr > start {
                            total = ck_add(total, thr - start)?;
                        }
                    }
                }
                Count::Omega => {
                    total = ck_add(total, sum_lmax_over_ap(start, 1, end, c)?)?;
                }
            }
        }
        let g = self.omega.len() as u128;
        for (gi, shape) in self.omega.iter().enumerate() {
            let first = self.finite_total as u128 + gi as u128;
            match shape.order() {
                Count::Finite(n) => {
                    for l in 0..n {
                        if l as u128 >= c {
                            break;
                        }
                        let thr = pmax(l as u128, c)?;
                        total = ck_add(total, ap_count(first, g, thr))?;
                    }
                }
                Count::Omega => {
                    total = ck_add(total, sum_lmax_over_ap(first, g, u128::MAX, c)?)?;
                }
            }
        }
        Ok(total)
    }
}

/// One factor's enumeration surface: either a layout taken whole, or the
/// batch-restricted view used when a factor's components are split across
/// host components (virtual position v maps to base position pair(batch,v)).
#[derive(Clone, Debug)]
pub struct Factor {
    view: View,
}

#[derive(Clone, Debug)]
enum View {
    Direct(Arc<FactorLayout>),
    Batch {
        base: Arc<FactorLayout>,
        batch: u64,
        scan_cap: u64,
    },
}

impl Factor {
    pub fn direct(layout: Arc<FactorLayout>) -> Factor {
        Factor {
            view: View::Direct(layout),
        }
    }

    pub fn batch(base: Arc<FactorLayout>, batch: u64, scan_cap: u64) -> Factor {
        Factor {
            view: View::Batch {
                base,
                batch,
                scan_cap,
            },
        }
    }

    /// Base-layout position backing this view's `position`.
    pub fn underlying_position(&self, position: u64) -> Result<u64> {
        match &self.view {
            View::Direct(_) => Ok(position),
            View::Batch { batch, .. } => pair(*batch, position),
        }
    }

    pub fn shape_at(&self, position: u64) -> Result<&Shape> {
        let up = self.underlying_position(position)?;
        Ok(match &self.view {
            View::Direct(layout) => layout.shape_at(up),
            View::Batch { base, .. } => base.shape_at(up),
        })
    }

    pub fn order_at(&self, position: u64) -> Result<Count> {
        Ok(self.shape_at(position)?.order())
    }

    /// Every admissible factor has infinitely many vertices.
    pub fn vertex_count(&self) -> Count {
        Count::Omega
    }

    /// Number of valid codes strictly below `c` under this view.
    pub fn count_below(&self, c: u128) -> Result<u128> {
        match &self.view {
            View::Direct(layout) => layout.count_below(c),
            View::Batch {
                base,
                batch,
                scan_cap,
            } => {
                if c == 0 {
                    return Ok(0);
                }
                let limit = pmax(0, c)?;
                if limit > *scan_cap as u128 {
                    return Err(Error::BudgetExceeded {
                        budget: *scan_cap,
                        during: "batch-view vertex counting",
                    });
                }
                let mut total: u128 = 0;
                for v in 0..limit as u64 {
                    let raw = lmax(v as u128, c)?;
                    let clamped = match base.order_at(pair(*batch, v)?) {
                        Count::Finite(n) => raw.min(n as u128),
                        Count::Omega => raw,
                    };
                    total = ck_add(total, clamped)?;
                }
                Ok(total)
            }
        }
    }

    /// Code of the i-th vertex: smallest code with i+1 valid codes at or
    /// below it. Exponential search then bisection over count_below.
    fn nth_code(&self, i: u64) -> Result<u128> {
        let want = i as u128 + 1;
        let mut hi: u128 = 1;
        while self.count_below(hi)? < want {
            hi = ck_mul(hi, 2)?;
        }
        let mut lo: u128 = 0;
        while hi - lo > 1 {
            let mid = lo + (hi - lo) / 2;
            if self.count_below(mid)? < want {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(hi - 1)
    }

    /// (position, local) of the vertex with global index `i`.
    pub fn decode(&self, i: u64) -> Result<(u64, u64)> {
        let (p, l) = unpair_wide(self.nth_code(i)?);
        let p = u64::try_from(p).map_err(|_| Error::Overflow("decoded position"))?;
        let l = u64::try_from(l).map_err(|_| Error::Overflow("decoded local"))?;
        Ok((p, l))
    }

    /// Global index of the vertex at (position, local).
    pub fn encode(&self, position: u64, local: u64) -> Result<u64> {
        debug_assert!(
            self.order_at(position)
                .map(|o| o.admits(local))
                .unwrap_or(true),
            "encode of a local outside its component"
        );
        let rank = self.count_below(code_of(position, local)?)?;
        u64::try_from(rank).map_err(|_| Error::Overflow("vertex index"))
    }

    pub fn degree(&self, i: u64) -> Result<Count> {
        let (p, l) = self.decode(i)?;
        Ok(self.shape_at(p)?.degree(l))
    }

    /// The k-th neighbor in ascending global-index order.
    pub fn kth_neighbor(&self, i: u64, k: u64) -> Result<u64> {
        let (p, l) = self.decode(i)?;
        let shape = self.shape_at(p)?;
        match shape.neighbor(l, k)? {
            Some(nl) => self.encode(p, nl),
            None => Err(Error::NeighborRange {
                rank: k,
                degree: match shape.degree(l) {
                    Count::Finite(d) => d,
                    Count::Omega => unreachable!("omega degree admits every rank"),
                },
            }),
        }
    }

    /// First (least-index) vertex of the component at `position`.
    pub fn root_index_of_position(&self, position: u64) -> Result<u64> {
        self.encode(position, 0)
    }

    pub fn adjacent(&self, i: u64, j: u64) -> Result<bool> {
        let (pi, li) = self.decode(i)?;
        let (pj, lj) = self.decode(j)?;
        if pi != pj {
            return Ok(false);
        }
        let shape = self.shape_at(pi)?;
        Ok(shape.parent(li) == Some(lj) || shape.parent(lj) == Some(li))
    }
}
