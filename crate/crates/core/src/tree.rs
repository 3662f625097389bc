//! The host: the rooted tree in which every vertex has countably many sons.
//!
//! Vertices are finite slot paths from the root. The tree is never stored;
//! iterators and rank arithmetic expose any finite window of it on demand.

use crate::enumeration::{level_rank, level_unrank};
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

/// A vertex of the host tree: the sequence of son slots walked from the root.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct TreeAddress(Vec<u64>);

impl TreeAddress {
    pub fn root() -> Self {
        TreeAddress(Vec::new())
    }

    pub fn new(slots: Vec<u64>) -> Self {
        TreeAddress(slots)
    }

    pub fn slots(&self) -> &[u64] {
        &self.0
    }

    pub fn depth(&self) -> u64 {
        self.0.len() as u64
    }

    pub fn is_root(&self) -> bool {
        self.0.is_empty()
    }

    /// Slot under the parent, `None` at the root.
    pub fn last_slot(&self) -> Option<u64> {
        self.0.last().copied()
    }

    pub fn parent(&self) -> Option<TreeAddress> {
        if self.0.is_empty() {
            None
        } else {
            Some(TreeAddress(self.0[..self.0.len() - 1].to_vec()))
        }
    }

    pub fn son(&self, slot: u64) -> TreeAddress {
        let mut slots = self.0.clone();
        slots.push(slot);
        TreeAddress(slots)
    }

    /// Rank of this address within its depth level.
    pub fn rank_in_level(&self) -> Result<u64> {
        level_rank(&self.0)
    }

    /// Address of the `rank`-th vertex at `depth`.
    pub fn from_level_rank(depth: u64, rank: u64) -> Result<TreeAddress> {
        level_unrank(depth, rank).map(TreeAddress)
    }
}

impl fmt::Display for TreeAddress {
    /// Text form: `/` for the root, otherwise `/`-separated slots (`/3/1`).
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return write!(f, "/");
        }
        for s in &self.0 {
            write!(f, "/{s}")?;
        }
        Ok(())
    }
}

impl FromStr for TreeAddress {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "/" {
            return Ok(TreeAddress::root());
        }
        let Some(body) = s.strip_prefix('/') else {
            return Err(Error::AddressSyntax(s.to_string()));
        };
        let mut slots = Vec::new();
        for part in body.split('/') {
            let n: u64 = part
                .parse()
                .map_err(|_| Error::AddressSyntax(s.to_string()))?;
            slots.push(n);
        }
        Ok(TreeAddress(slots))
    }
}

impl Serialize for TreeAddress {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for TreeAddress {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// All depth-`depth` addresses with every slot below `sons`, in
/// lexicographic slot order (an odometer over the restricted alphabet).
pub fn sphere(depth: u64, sons: u64) -> SphereIter {
    SphereIter {
        next: Some(vec![0; depth as usize]),
        sons,
        root_done: false,
        depth,
    }
}

pub struct SphereIter {
    next: Option<Vec<u64>>,
    sons: u64,
    depth: u64,
    root_done: bool,
}

impl Iterator for SphereIter {
    type Item = TreeAddress;

    fn next(&mut self) -> Option<TreeAddress> {
        if self.depth == 0 {
            if self.root_done {
                return None;
            }
            self.root_done = true;
            return Some(TreeAddress::root());
        }
        if self.sons == 0 {
            return None;
        }
        let cur = self.next.take()?;
        let out = TreeAddress(cur.clone());
        let mut slots = cur;
        for i in (0..slots.len()).rev() {
            if slots[i] + 1 < self.sons {
                slots[i] += 1;
                for s in &mut slots[i + 1..] {
                    *s = 0;
                }
                self.next = Some(slots);
                return Some(out);
            }
        }
        Some(out)
    }
}

/// All addresses of depth at most `radius` with slots below `sons`,
/// shallow levels first: the parent of every yielded vertex is yielded
/// before it.
pub fn ball(radius: u64, sons: u64) -> impl Iterator<Item = TreeAddress> {
    (0..=radius).flat_map(move |d| sphere(d, sons))
}

/// Number of addresses `ball(radius, sons)` yields, checked.
pub fn ball_len(radius: u64, sons: u64) -> Result<u64> {
    let mut total: u64 = 0;
    let mut level: u64 = 1;
    for _ in 0..=radius {
        total = total
            .checked_add(level)
            .ok_or(Error::Overflow("ball_len"))?;
        level = level.checked_mul(sons).ok_or(Error::Overflow("ball_len"))?;
        if level == 0 {
            break;
        }
    }
    Ok(total)
}
