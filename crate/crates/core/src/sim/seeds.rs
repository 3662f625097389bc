//! Host instances for exercising the scheduler: a hand-built family whose
//! frontier provably climbs every pass, and a deterministic fuzzer.

use super::{ClassSpec, SimBounds, SimConfig};

/// Deterministic 64-bit generator (splitmix64). Tiny on purpose: fuzzed
/// configs must reproduce byte-for-byte from a seed forever.
pub struct SplitMix64(u64);

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        SplitMix64(seed)
    }

    pub fn next_u64(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform-enough draw below `n` (n > 0); modulo bias is irrelevant at
    /// these ranges.
    pub fn below(&mut self, n: u64) -> u64 {
        self.next_u64() % n
    }
}

/// A star-of-stars host on which every factor's frontier strictly climbs
/// each pass until the pass bound.
///
/// Vertex 0 is the root; vertices 1..=passes+2 are hubs (sons of the root,
/// class (0, 0)); every vertex up to the hub range then receives passes+2
/// fresh leaves per class (m, t) with m < factors and t < passes. The hub
/// count covers every row the frontier can reach, and the per-class leaf
/// count outpaces the slots the frontier opens, so each pass both fills
/// the stalled frontier column and opens a new row.
pub fn adequate_host(factors: u64, passes: u64) -> SimConfig {
    let hubs = passes + 2;
    let per_class = passes + 2;
    let mut parent: Vec<Option<u64>> = vec![None];
    let mut classes: Vec<Option<(u64, u64)>> = vec![None];
    let mut edges = Vec::new();
    for h in 1..=hubs {
        parent.push(Some(0));
        classes.push(Some((0, 0)));
        edges.push((0, h));
    }
    for p in 0..=hubs {
        for m in 0..factors {
            for t in 0..passes {
                for _ in 0..per_class {
                    let i = parent.len() as u64;
                    parent.push(Some(p));
                    classes.push(Some((m, t)));
                    edges.push((p, i));
                }
            }
        }
    }
    SimConfig {
        bounds: SimBounds {
            factors,
            passes,
            vertices: parent.len() as u64,
        },
        edges,
        parent,
        classes: ClassSpec::Explicit(classes),
    }
}

/// Random valid config: a random rooted tree plus extra host edges, with
/// either derived or random explicit classes. Same seed, same config.
pub fn fuzz_config(seed: u64) -> SimConfig {
    let mut rng = SplitMix64::new(seed);
    let n = 2 + rng.below(199);
    let factors = 1 + rng.below(4);
    let passes = 1 + rng.below(6);
    let mut parent: Vec<Option<u64>> = vec![None];
    let mut edge_set = std::collections::BTreeSet::new();
    for i in 1..n {
        let p = rng.below(i);
        parent.push(Some(p));
        edge_set.insert((p, i));
    }
    for _ in 0..rng.below(n) {
        let a = rng.below(n);
        let b = rng.below(n);
        if a != b {
            edge_set.insert((a.min(b), a.max(b)));
        }
    }
    // Out-of-bound class coordinates are allowed; such vertices simply
    // never activate, which the condition logic must tolerate.
    let classes = if rng.next_u64().is_multiple_of(2) {
        ClassSpec::Auto
    } else {
        let mut list = vec![None];
        for _ in 1..n {
            list.push(Some((rng.below(factors + 2), rng.below(passes + 2))));
        }
        ClassSpec::Explicit(list)
    };
    SimConfig {
        bounds: SimBounds {
            factors,
            passes,
            vertices: n,
        },
        edges: edge_set.into_iter().collect(),
        parent,
        classes,
    }
}
