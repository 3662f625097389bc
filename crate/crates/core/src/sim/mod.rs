//! Finite-truncation executor of the transfinite row/pass scheduler.
//!
//! Steps run in lexicographic order over (factor m, pass τ, vertex i) with
//! all three coordinates truncated to configured bounds. Each step logs the
//! full eight-entry condition vector it evaluated, the action taken, and
//! the frontier value σ before and after. The conditions, in order:
//!
//! 1. the vertex holds no slot and sits in no bucket for this factor;
//! 2. the vertex is a lower-indexed host neighbor's son candidate (i > j);
//! 3. the candidate row has a free slot, all earlier slots filled;
//! 4. no earlier factor assigned this vertex a slot in the same row;
//! 5. no earlier factor bucketed this vertex in the same row;
//! 6. the vertex's seed class neither postdates (m, τ) under its own
//!    parent row nor equals (m, τ) under a different row;
//! 7. row and slot both lie within the current frontier σ;
//! 8. some row satisfies conditions 2-7 (the least such row is used).
//!
//! A step assigns when conditions 1 and 8 hold; otherwise, if condition 1
//! holds and some row passes 2, 4, 5 and 6, the vertex is bucketed at the
//! least such row; otherwise the step is a skip.

pub mod seeds;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use serde::de::{self, Deserializer, SeqAccess, Unexpected};
use serde::ser::{SerializeSeq, Serializer};
use serde::{Deserialize, Serialize};

use crate::enumeration::{triple_decode, StepId};
use crate::error::{Error, Result};

/// Truncation bounds: factors m < factors, passes τ < passes, vertices
/// i < vertices.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimBounds {
    pub factors: u64,
    pub passes: u64,
    pub vertices: u64,
}

/// Seed classes: either derived from son ranks by the canonical triple
/// decoding, or listed explicitly per vertex (null for the root).
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ClassSpec {
    Auto,
    Explicit(Vec<Option<(u64, u64)>>),
}

impl Serialize for ClassSpec {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            ClassSpec::Auto => s.serialize_str("auto"),
            ClassSpec::Explicit(v) => {
                let mut seq = s.serialize_seq(Some(v.len()))?;
                for e in v {
                    seq.serialize_element(e)?;
                }
                seq.end()
            }
        }
    }
}

impl<'de> Deserialize<'de> for ClassSpec {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        struct V;
        impl<'de> de::Visitor<'de> for V {
            type Value = ClassSpec;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                write!(f, "\"auto\" or an array of per-vertex [m, t] classes")
            }
            fn visit_str<E: de::Error>(self, s: &str) -> std::result::Result<ClassSpec, E> {
                if s == "auto" {
                    Ok(ClassSpec::Auto)
                } else {
                    Err(E::invalid_value(Unexpected::Str(s), &self))
                }
            }
            fn visit_seq<A: SeqAccess<'de>>(
                self,
                mut seq: A,
            ) -> std::result::Result<ClassSpec, A::Error> {
                let mut v = Vec::new();
                while let Some(e) = seq.next_element()? {
                    v.push(e);
                }
                Ok(ClassSpec::Explicit(v))
            }
        }
        d.deserialize_any(V)
    }
}

/// Complete simulator input: bounds, host edges, rooted spanning forest
/// (parent map, root = vertex 0), and the seed class of every non-root
/// vertex.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub bounds: SimBounds,
    pub edges: Vec<(u64, u64)>,
    pub parent: Vec<Option<u64>>,
    pub classes: ClassSpec,
}

/// Frontier value: a natural, or "exhausted" once every in-truncation slot
/// of the factor is filled.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sigma {
    Value(u64),
    Exhausted,
}

impl Serialize for Sigma {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Sigma::Value(n) => s.serialize_u64(*n),
            Sigma::Exhausted => s.serialize_str("exhausted"),
        }
    }
}

impl<'de> Deserialize<'de> for Sigma {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        struct V;
        impl<'de> de::Visitor<'de> for V {
            type Value = Sigma;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                write!(f, "a natural number or the string \"exhausted\"")
            }
            fn visit_u64<E: de::Error>(self, n: u64) -> std::result::Result<Sigma, E> {
                Ok(Sigma::Value(n))
            }
            fn visit_str<E: de::Error>(self, s: &str) -> std::result::Result<Sigma, E> {
                if s == "exhausted" {
                    Ok(Sigma::Exhausted)
                } else {
                    Err(E::invalid_value(Unexpected::Str(s), &self))
                }
            }
        }
        d.deserialize_any(V)
    }
}

/// What a step did.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Action {
    Assign { row: u64, slot: u64 },
    Bucket { row: u64 },
    Skip,
}

/// One logged step: identity, frontier before/after, the eight-entry
/// condition vector at the decisive row, and the action.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimStep {
    pub step: StepId,
    pub sigma_before: Sigma,
    pub sigma_after: Sigma,
    pub conditions: [bool; 8],
    pub action: Action,
}

/// Full run output: the config it came from plus every step in order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimTrace {
    pub config: SimConfig,
    pub steps: Vec<SimStep>,
}

/// One output factor as a finite edge list (row, vertex) with row < vertex.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FactorGraph {
    pub factor: u64,
    pub edges: Vec<(u64, u64)>,
}

/// Exact verdicts for the per-row set conditions plus the finitary
/// surrogates for the infinitary ones: row-size bounds and edge coverage.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CReport {
    pub c1_rows_are_higher_neighbors: bool,
    pub c2_rows_disjoint_within_factor: bool,
    pub c3_factors_disjoint_within_row: bool,
    pub c4_row_size_min: u64,
    pub c4_row_size_max: u64,
    pub c5_covered_edges: u64,
    pub c5_total_edges: u64,
    pub c5_coverage: f64,
}

/// Frontier values at each pass start, per factor, with a monotonicity
/// verdict: strictly increasing while finite, sticky once exhausted.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SigmaProgress {
    pub per_factor: Vec<Vec<Sigma>>,
    pub strictly_increasing: Vec<bool>,
}

struct Validated {
    n: u64,
    /// Host neighbors below each vertex, ascending.
    lower: Vec<Vec<u64>>,
    parent: Vec<Option<u64>>,
    classes: Vec<Option<(u64, u64)>>,
}

fn validate(config: &SimConfig) -> Result<Validated> {
    let n = config.bounds.vertices;
    let bad = |msg: String| Err(Error::InvalidSim(msg));
    if n == 0 {
        return bad("vertex bound must be at least 1".into());
    }
    if config.bounds.factors == 0 || config.bounds.passes == 0 {
        return bad("factor and pass bounds must be at least 1".into());
    }
    let mut adjacency = vec![BTreeSet::new(); n as usize];
    for &(a, b) in &config.edges {
        if a >= n || b >= n {
            return bad(format!("edge ({a}, {b}) leaves the vertex range 0..{n}"));
        }
        if a == b {
            return bad(format!("edge ({a}, {b}) is a self-loop"));
        }
        if !adjacency[a as usize].insert(b) {
            return bad(format!("edge ({a}, {b}) is listed twice"));
        }
        adjacency[b as usize].insert(a);
    }
    if config.parent.len() as u64 != n {
        return bad(format!(
            "parent map has {} entries for {n} vertices",
            config.parent.len()
        ));
    }
    if config.parent[0].is_some() {
        return bad("vertex 0 is the root and must have a null parent".into());
    }
    for i in 1..n {
        let Some(p) = config.parent[i as usize] else {
            return bad(format!("vertex {i} has no parent; only the root may"));
        };
        if p >= i {
            return bad(format!(
                "vertex {i} has parent {p}; sons must come after their parent"
            ));
        }
        if !adjacency[i as usize].contains(&p) {
            return bad(format!("forest edge ({p}, {i}) is not a host edge"));
        }
    }
    let classes = match &config.classes {
        ClassSpec::Auto => {
            // Son rank within the parent's ascending son list decodes to
            // the class triple; the residual coordinate is dropped.
            let mut son_count: HashMap<u64, u64> = HashMap::new();
            let mut classes = vec![None; n as usize];
            for i in 1..n {
                let p = config.parent[i as usize].expect("validated above");
                let rank = son_count.entry(p).or_insert(0);
                let (m, t, _) = triple_decode(*rank);
                *rank += 1;
                classes[i as usize] = Some((m, t));
            }
            classes
        }
        ClassSpec::Explicit(list) => {
            if list.len() as u64 != n {
                return bad(format!(
                    "class list has {} entries for {n} vertices",
                    list.len()
                ));
            }
            if list[0].is_some() {
                return bad("the root carries no class".into());
            }
            for (i, c) in list.iter().enumerate().skip(1) {
                if c.is_none() {
                    return bad(format!("vertex {i} is missing its class"));
                }
            }
            list.clone()
        }
    };
    let lower = adjacency
        .iter()
        .enumerate()
        .map(|(i, nb)| nb.iter().copied().filter(|&j| j < i as u64).collect())
        .collect();
    Ok(Validated {
        n,
        lower,
        parent: config.parent.clone(),
        classes,
    })
}

/// Per-factor slot table with incremental frontier bookkeeping.
#[derive(Default)]
struct FactorState {
    /// vertex -> (row, slot): the unique slot the vertex fills.
    assigned: HashMap<u64, (u64, u64)>,
    /// row -> number of filled slots (slots fill gap-free, so this is also
    /// the next free slot).
    column_len: HashMap<u64, u64>,
    /// vertex -> row of its bucket.
    bucket: HashMap<u64, u64>,
    /// Count of filled slots by max(row, slot); cum tracks the prefix up to
    /// the current sigma.
    by_max: Vec<u64>,
    cum: u64,
    sigma: u64,
    exhausted: bool,
}

impl FactorState {
    fn sigma_view(&self) -> Sigma {
        if self.exhausted {
            Sigma::Exhausted
        } else {
            Sigma::Value(self.sigma)
        }
    }

    fn note_slot(&mut self, row: u64, slot: u64, n: u64) {
        let mx = row.max(slot) as usize;
        if self.by_max.len() <= mx {
            self.by_max.resize(mx + 1, 0);
        }
        self.by_max[mx] += 1;
        if (mx as u64) <= self.sigma {
            self.cum += 1;
        }
        // The frontier is the least s whose (s+1)-square of slots is not
        // fully defined; advance while the current square is complete.
        while !self.exhausted && self.cum == (self.sigma + 1) * (self.sigma + 1) {
            if self.sigma + 1 >= n {
                self.exhausted = true;
            } else {
                self.sigma += 1;
                self.cum += self.by_max.get(self.sigma as usize).copied().unwrap_or(0);
            }
        }
    }
}

/// Runs every step (m, τ, i) in lexicographic order and logs the trace.
pub fn run(config: &SimConfig) -> Result<SimTrace> {
    let v = validate(config)?;
    let bounds = config.bounds;
    let mut states: Vec<FactorState> = (0..bounds.factors)
        .map(|_| FactorState::default())
        .collect();
    let mut steps = Vec::new();
    for m in 0..bounds.factors {
        for pass in 0..bounds.passes {
            for i in 0..v.n {
                steps.push(step(&v, &mut states, bounds, m, pass, i));
            }
        }
    }
    Ok(SimTrace {
        config: config.clone(),
        steps,
    })
}

/// Conditions 3-7 at one candidate row, plus the forced slot for 3.
fn row_conditions(
    states: &[FactorState],
    v: &Validated,
    bounds: SimBounds,
    m: u64,
    pass: u64,
    i: u64,
    row: u64,
) -> ([bool; 5], u64) {
    let st = &states[m as usize];
    let slot = st.column_len.get(&row).copied().unwrap_or(0);
    let d3 = slot < bounds.vertices;
    let d4 = !states[..m as usize]
        .iter()
        .any(|s| s.assigned.get(&i).is_some_and(|&(r, _)| r == row));
    let d5 = !states[..m as usize]
        .iter()
        .any(|s| s.bucket.get(&i) == Some(&row));
    // Condition 6: the vertex's seed class must not come after (m, τ)
    // when the candidate row is its forest parent, and must not equal
    // (m, τ) when it is not.
    let d6 = {
        let class = v.classes[i as usize].expect("non-root vertices carry a class");
        if v.parent[i as usize] == Some(row) {
            class <= (m, pass)
        } else {
            class != (m, pass)
        }
    };
    let d7 = st.exhausted || (row <= st.sigma && slot <= st.sigma);
    ([d3, d4, d5, d6, d7], slot)
}

fn step(
    v: &Validated,
    states: &mut [FactorState],
    bounds: SimBounds,
    m: u64,
    pass: u64,
    i: u64,
) -> SimStep {
    let sigma_before = states[m as usize].sigma_view();
    let d1 = {
        let st = &states[m as usize];
        !st.assigned.contains_key(&i) && !st.bucket.contains_key(&i)
    };
    let candidates: &[u64] = &v.lower[i as usize];

    let mut assign_at: Option<(u64, u64)> = None;
    for &row in candidates {
        let ([d3, d4, d5, d6, d7], slot) = row_conditions(states, v, bounds, m, pass, i, row);
        if d3 && d4 && d5 && d6 && d7 {
            assign_at = Some((row, slot));
            break;
        }
    }
    let d8 = assign_at.is_some();

    let (action, conditions) = if d1 && d8 {
        let (row, slot) = assign_at.expect("checked");
        (Action::Assign { row, slot }, [true; 8])
    } else {
        let mut bucket_at = None;
        for &row in candidates {
            let ([_, d4, d5, d6, _], _) = row_conditions(states, v, bounds, m, pass, i, row);
            if d4 && d5 && d6 {
                bucket_at = Some(row);
                break;
            }
        }
        if let (true, Some(row)) = (d1, bucket_at) {
            let ([d3, _, _, _, d7], _) = row_conditions(states, v, bounds, m, pass, i, row);
            (
                Action::Bucket { row },
                [d1, true, d3, true, true, true, d7, d8],
            )
        } else if let Some(&row) = candidates.first() {
            let ([d3, d4, d5, d6, d7], _) = row_conditions(states, v, bounds, m, pass, i, row);
            (Action::Skip, [d1, true, d3, d4, d5, d6, d7, d8])
        } else {
            (
                Action::Skip,
                [d1, false, false, false, false, false, false, d8],
            )
        }
    };

    match action {
        Action::Assign { row, slot } => {
            let st = &mut states[m as usize];
            st.assigned.insert(i, (row, slot));
            st.column_len.insert(row, slot + 1);
            st.note_slot(row, slot, bounds.vertices);
        }
        Action::Bucket { row } => {
            states[m as usize].bucket.insert(i, row);
        }
        Action::Skip => {}
    }

    SimStep {
        step: StepId::new(m, pass, i),
        sigma_before,
        sigma_after: states[m as usize].sigma_view(),
        conditions,
        action,
    }
}

/// Edge sets of the output factors: row r gains the stepped vertex for
/// every assign or bucket action.
pub fn build_factors(trace: &SimTrace) -> Vec<FactorGraph> {
    let mut factors: Vec<FactorGraph> = (0..trace.config.bounds.factors)
        .map(|factor| FactorGraph {
            factor,
            edges: Vec::new(),
        })
        .collect();
    for s in &trace.steps {
        let row = match s.action {
            Action::Assign { row, .. } => row,
            Action::Bucket { row } => row,
            Action::Skip => continue,
        };
        factors[s.step.factor as usize]
            .edges
            .push((row, s.step.vertex));
    }
    factors
}

/// Exact row-set conditions plus size and coverage statistics. Membership
/// only grows during a run, so holding at the end is equivalent to holding
/// after every step.
pub fn check_c(trace: &SimTrace) -> CReport {
    let n = trace.config.bounds.vertices;
    let m_bound = trace.config.bounds.factors;
    let mut adjacency = vec![BTreeSet::new(); n as usize];
    for &(a, b) in &trace.config.edges {
        adjacency[a as usize].insert(b);
        adjacency[b as usize].insert(a);
    }
    // members[(m, row)] = vertices in that row's set.
    let mut members: BTreeMap<(u64, u64), BTreeSet<u64>> = BTreeMap::new();
    let mut c1 = true;
    for s in &trace.steps {
        let row = match s.action {
            Action::Assign { row, .. } => row,
            Action::Bucket { row } => row,
            Action::Skip => continue,
        };
        let i = s.step.vertex;
        c1 &= i > row && adjacency[row as usize].contains(&i);
        members.entry((s.step.factor, row)).or_default().insert(i);
    }
    let mut row_of: HashMap<(u64, u64), u64> = HashMap::new();
    let mut factor_of: HashMap<(u64, u64), u64> = HashMap::new();
    let mut c2 = true;
    let mut c3 = true;
    for (&(m, row), set) in &members {
        for &i in set {
            if let Some(&other) = row_of.get(&(m, i)) {
                c2 &= other == row;
            } else {
                row_of.insert((m, i), row);
            }
            if let Some(&other) = factor_of.get(&(row, i)) {
                c3 &= other == m;
            } else {
                factor_of.insert((row, i), m);
            }
        }
    }
    let mut c4_min = u64::MAX;
    let mut c4_max = 0;
    for m in 0..m_bound {
        for row in 0..n {
            let size = members.get(&(m, row)).map(|s| s.len() as u64).unwrap_or(0);
            c4_min = c4_min.min(size);
            c4_max = c4_max.max(size);
        }
    }
    if m_bound == 0 || n == 0 {
        c4_min = 0;
    }
    let mut covered = 0u64;
    let mut total = 0u64;
    for &(a, b) in &trace.config.edges {
        let (j, i) = (a.min(b), a.max(b));
        total += 1;
        if (0..m_bound).any(|m| members.get(&(m, j)).is_some_and(|s| s.contains(&i))) {
            covered += 1;
        }
    }
    CReport {
        c1_rows_are_higher_neighbors: c1,
        c2_rows_disjoint_within_factor: c2,
        c3_factors_disjoint_within_row: c3,
        c4_row_size_min: c4_min,
        c4_row_size_max: c4_max,
        c5_covered_edges: covered,
        c5_total_edges: total,
        c5_coverage: if total == 0 {
            1.0
        } else {
            covered as f64 / total as f64
        },
    }
}

/// Frontier at each pass start (vertex-0 steps) per factor, with the
/// strict-increase-until-exhausted verdict.
pub fn sigma_progress(trace: &SimTrace) -> SigmaProgress {
    let bounds = trace.config.bounds;
    let mut per_factor: Vec<Vec<Sigma>> = vec![Vec::new(); bounds.factors as usize];
    for s in &trace.steps {
        if s.step.vertex == 0 {
            per_factor[s.step.factor as usize].push(s.sigma_before);
        }
    }
    let strictly_increasing = per_factor
        .iter()
        .map(|seq| {
            seq.windows(2).all(|w| match (w[0], w[1]) {
                (Sigma::Value(a), Sigma::Value(b)) => b > a,
                (Sigma::Value(_), Sigma::Exhausted) => true,
                (Sigma::Exhausted, Sigma::Exhausted) => true,
                (Sigma::Exhausted, Sigma::Value(_)) => false,
            })
        })
        .collect();
    SigmaProgress {
        per_factor,
        strictly_increasing,
    }
}

/// One line of JSON per record: the config first, then every step.
pub fn trace_to_jsonl(trace: &SimTrace) -> String {
    let mut out = serde_json::to_string(&trace.config).expect("config serialization");
    out.push('\n');
    for s in &trace.steps {
        out.push_str(&serde_json::to_string(s).expect("step serialization"));
        out.push('\n');
    }
    out
}

/// Inverse of [`trace_to_jsonl`]; reports the first offending line.
pub fn trace_from_jsonl(text: &str) -> Result<SimTrace> {
    let mut lines = text.lines().enumerate();
    let Some((_, first)) = lines.next() else {
        return Err(Error::TraceSyntax {
            line: 1,
            reason: "empty trace".into(),
        });
    };
    let config: SimConfig = serde_json::from_str(first).map_err(|e| Error::TraceSyntax {
        line: 1,
        reason: e.to_string(),
    })?;
    let mut steps = Vec::new();
    for (idx, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        steps.push(serde_json::from_str(line).map_err(|e| Error::TraceSyntax {
            line: idx + 1,
            reason: e.to_string(),
        })?);
    }
    Ok(SimTrace {
        config: config.clone(),
        steps,
    })
}

/// All output factors in one DOT graph, edges attributed by factor.
pub fn factors_to_dot(factors: &[FactorGraph]) -> String {
    let mut out = String::from("graph factors {\n");
    for f in factors {
        for &(a, b) in &f.edges {
            out.push_str(&format!("  {a} -- {b} [factor={}];\n", f.factor));
        }
    }
    out.push_str("}\n");
    out
}
