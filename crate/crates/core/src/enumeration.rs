//! Enumeration kernel: the pairing bijection and the orders derived from it.
//!
//! Everything that needs a canonical bijection between naturals and pairs
//! (or triples) of naturals goes through `pair`/`unpair`; no other encoding
//! is used anywhere in the workspace. All arithmetic is overflow-checked:
//! a result that does not fit in `u64` is an error, never a wrapped value.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Diagonal pairing bijection N x N -> N:
/// `pair(a, b) = (a + b)(a + b + 1)/2 + b`.
pub fn pair(a: u64, b: u64) -> Result<u64> {
    // Any diagonal past 2^33 starts beyond u64 already; rejecting it first
    // keeps the wide multiply below exact.
    let s = a as u128 + b as u128;
    if s > 1 << 33 {
        return Err(Error::Overflow("pair"));
    }
    let code = pair_wide(a as u128, b as u128);
    u64::try_from(code).map_err(|_| Error::Overflow("pair"))
}

/// Pairing over `u128`, exact for all `u64` inputs.
pub(crate) fn pair_wide(a: u128, b: u128) -> u128 {
    let s = a + b;
    s * (s + 1) / 2 + b
}

/// Inverse of [`pair`]: `unpair(pair(a, b)) == (a, b)` for all a, b.
pub fn unpair(n: u64) -> (u64, u64) {
    let (a, b) = unpair_wide(n as u128);
    (a as u64, b as u64)
}

pub(crate) fn unpair_wide(n: u128) -> (u128, u128) {
    // Largest s with s(s+1)/2 <= n; n then sits on diagonal s at offset b.
    let s = {
        let mut s = isqrt(2 * n);
        while s * (s + 1) / 2 > n {
            s -= 1;
        }
        while (s + 1) * (s + 2) / 2 <= n {
            s += 1;
        }
        s
    };
    let b = n - s * (s + 1) / 2;
    (s - b, b)
}

/// Integer square root over `u128`: Newton iteration from a power-of-two
/// seed that is provably at or above the root, so no overflow and no
/// dependence on f64 precision.
pub(crate) fn isqrt(n: u128) -> u128 {
    if n < 2 {
        return n;
    }
    let shift = (128 - n.leading_zeros()).div_ceil(2);
    let mut x = 1u128 << shift;
    loop {
        let y = (x + n / x) / 2;
        if y >= x {
            return x;
        }
        x = y;
    }
}

/// Canonical bijection N -> N^3 by iterated unpairing: the outer coordinate
/// first, then the middle, then the residual rank.
pub fn triple_decode(s: u64) -> (u64, u64, u64) {
    let (m, rest) = unpair(s);
    let (t, r) = unpair(rest);
    (m, t, r)
}

/// Inverse of [`triple_decode`].
pub fn triple_encode(m: u64, t: u64, r: u64) -> Result<u64> {
    pair(m, pair(t, r)?)
}

/// A scheduler step identity `(factor, pass, vertex)` ordered lexicographically;
/// `derive(Ord)` on the field order is exactly that order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct StepId {
    pub factor: u64,
    pub pass: u64,
    pub vertex: u64,
}

impl StepId {
    pub fn new(factor: u64, pass: u64, vertex: u64) -> Self {
        StepId {
            factor,
            pass,
            vertex,
        }
    }
}

/// Rank of a slot path within its own depth level.
///
/// Depth-1 paths rank by their single slot; deeper paths fold left:
/// `rank(w + [s]) = pair(rank(w), s)`. Per depth this is a bijection onto N.
pub fn level_rank(slots: &[u64]) -> Result<u64> {
    let mut it = slots.iter();
    let mut acc = match it.next() {
        Some(&s) => s,
        None => return Ok(0),
    };
    for &s in it {
        acc = pair(acc, s)?;
    }
    Ok(acc)
}

/// Inverse of [`level_rank`] at a fixed depth.
///
/// Depth 0 has the empty path only, so `rank > 0` is an error there.
pub fn level_unrank(depth: u64, rank: u64) -> Result<Vec<u64>> {
    if depth == 0 {
        return if rank == 0 {
            Ok(Vec::new())
        } else {
            Err(Error::RootRank(rank))
        };
    }
    let mut slots = vec![0u64; depth as usize];
    let mut acc = rank;
    for i in (1..depth as usize).rev() {
        let (head, s) = unpair(acc);
        slots[i] = s;
        acc = head;
    }
    slots[0] = acc;
    Ok(slots)
}
