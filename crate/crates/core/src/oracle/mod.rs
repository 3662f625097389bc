//! Independent verification of the engine and the scheduler simulator.
//!
//! The oracle re-derives every allocation decision from the written rules
//! by exhaustive enumeration: demand columns are rebuilt by scanning codes
//! in order, component ranks by walking whole levels, frontier values by
//! recounting filled squares. It shares only the forest, tree, and pairing
//! primitives with the engine; none of the engine's memo machinery is
//! reused. All checks are exact and every failure carries a concrete
//! counterexample.
//!
//! Window checks assert only obligations fully determined inside the
//! window: a boundary vertex's sons lie outside scope, so son-side
//! obligations are never inferred for it.

use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::engine::pipeline::Pipeline;
use crate::engine::{BallMaterialization, Demand, Engine};
use crate::enumeration::{triple_decode, unpair, StepId};
use crate::error::{Error, Result};
use crate::forest::{pool_of_position, position_of_pool, Family};
use crate::sim::{Action, Sigma, SimConfig, SimTrace};
use crate::tree::{ball_len, TreeAddress};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Pass,
    Fail,
}

/// Outcome of one named check over one scope; failing reports always carry
/// a concrete counterexample.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub check: String,
    pub scope: String,
    pub verdict: Verdict,
    pub counterexample: Option<String>,
    pub details: String,
}

impl VerificationReport {
    fn from_outcome(
        check: &str,
        scope: &str,
        outcome: Result<Option<String>>,
        details: String,
    ) -> VerificationReport {
        let (verdict, counterexample) = match outcome {
            Ok(None) => (Verdict::Pass, None),
            Ok(Some(ce)) => (Verdict::Fail, Some(ce)),
            Err(e) => (Verdict::Fail, Some(format!("query failed: {e}"))),
        };
        VerificationReport {
            check: check.to_string(),
            scope: scope.to_string(),
            verdict,
            counterexample,
            details,
        }
    }

    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Pass
    }
}

/// True when every report in a batch passed.
pub fn all_passed(reports: &[VerificationReport]) -> bool {
    reports.iter().all(VerificationReport::passed)
}

#[derive(Default)]
struct OracleColumn {
    demands: Vec<Demand>,
    /// (position, local) of each demand's target label.
    places: Vec<(u64, u64)>,
    next_code: u64,
}

/// Schedule-independent transcription of the allocation rules, memoized by
/// tree address. Labels, demand columns, and component ranks are derived
/// from scratch here and compared against the engine elsewhere.
pub struct RuleOracle {
    family: Family,
    labels: HashMap<(TreeAddress, u64), (u64, u64, u64)>,
    columns: HashMap<TreeAddress, OracleColumn>,
    /// servings[d][r] = factor served by the rank-r vertex at depth d.
    servings: Vec<Vec<u64>>,
}

impl RuleOracle {
    pub fn new(family: Family) -> RuleOracle {
        RuleOracle {
            family,
            labels: HashMap::new(),
            columns: HashMap::new(),
            servings: Vec::new(),
        }
    }

    /// First `n` demands of `w`: every code `pair(m, k)` in ascending order
    /// whose factor-m label still admits a k-th child.
    pub fn brute_force_allocation(&mut self, w: &TreeAddress, n: u64) -> Result<Vec<Demand>> {
        if n == 0 {
            return Ok(Vec::new());
        }
        self.extend_column(w, n - 1)?;
        Ok(self.columns[w].demands[..n as usize].to_vec())
    }

    /// Global forest index of w's factor-m label.
    pub fn label_index(&mut self, w: &TreeAddress, m: u64) -> Result<u64> {
        self.label(w, m).map(|(index, _, _)| index)
    }

    fn label(&mut self, w: &TreeAddress, m: u64) -> Result<(u64, u64, u64)> {
        if let Some(&hit) = self.labels.get(&(w.clone(), m)) {
            return Ok(hit);
        }
        let out = if w.is_root() {
            // The anchor: every factor labels the root with its first
            // component's root.
            let index = self.family.factor(m).encode(0, 0)?;
            (index, 0, 0)
        } else {
            let parent = w.parent().expect("non-root address");
            let slot = w.last_slot().expect("non-root address");
            let (served, place) = self.served_demand(&parent, slot)?;
            if served.factor == m {
                (served.target, place.0, place.1)
            } else {
                // Fresh component root: rank = vertices before w at its
                // level whose serving factor differs from m.
                let depth = w.depth();
                let rank = w.rank_in_level()?;
                self.fill_servings(depth, rank)?;
                let gap = self.servings[depth as usize][..rank as usize]
                    .iter()
                    .filter(|&&f| f != m)
                    .count() as u64;
                let position = position_of_pool(depth, gap)?;
                let index = self.family.factor(m).encode(position, 0)?;
                (index, position, 0)
            }
        };
        self.labels.insert((w.clone(), m), out);
        Ok(out)
    }

    fn served_demand(&mut self, w: &TreeAddress, slot: u64) -> Result<(Demand, (u64, u64))> {
        self.extend_column(w, slot)?;
        let column = &self.columns[w];
        Ok((column.demands[slot as usize], column.places[slot as usize]))
    }

    fn extend_column(&mut self, w: &TreeAddress, slot: u64) -> Result<()> {
        loop {
            let column = self.columns.entry(w.clone()).or_default();
            if (column.demands.len() as u64) > slot {
                return Ok(());
            }
            let code = column.next_code;
            column.next_code = code
                .checked_add(1)
                .ok_or(Error::Overflow("oracle code scan"))?;
            let (m, k) = unpair(code);
            let (_, position, local) = self.label(w, m)?;
            let factor = self.family.factor(m);
            let shape = factor.shape_at(position)?;
            if shape.child_count(local).admits(k) {
                let child = shape.child(local, k)?;
                let target = factor.encode(position, child)?;
                let column = self.columns.get_mut(w).expect("column exists");
                column.demands.push(Demand {
                    factor: m,
                    continuation: k,
                    target,
                });
                column.places.push((position, child));
            }
        }
    }

    fn fill_servings(&mut self, depth: u64, upto: u64) -> Result<()> {
        while (self.servings.len() as u64) <= depth {
            self.servings.push(Vec::new());
        }
        let mut len = self.servings[depth as usize].len() as u64;
        while len < upto {
            let v = TreeAddress::from_level_rank(depth, len)?;
            let parent = v.parent().expect("depth is at least 1");
            let slot = v.last_slot().expect("depth is at least 1");
            let (served, _) = self.served_demand(&parent, slot)?;
            self.servings[depth as usize].push(served.factor);
            len += 1;
        }
        Ok(())
    }
}

fn window_scope(ball: &BallMaterialization) -> String {
    format!(
        "radius={} sons={} factors={}",
        ball.radius, ball.sons, ball.factors
    )
}

/// Every vertex carries exactly one label per factor below the bound.
fn check_spanning(ball: &BallMaterialization) -> Result<Option<String>> {
    for v in &ball.vertices {
        if v.labels.len() as u64 != ball.factors {
            return Ok(Some(format!(
                "vertex {} carries {} labels, expected {}",
                v.address,
                v.labels.len(),
                ball.factors
            )));
        }
    }
    Ok(None)
}

/// No two window vertices share a label within one factor.
fn check_injective(ball: &BallMaterialization) -> Result<Option<String>> {
    for m in 0..ball.factors {
        let mut seen: HashMap<u64, &TreeAddress> = HashMap::new();
        for v in &ball.vertices {
            let Some(&label) = v.labels.get(m as usize) else {
                continue;
            };
            if let Some(prior) = seen.insert(label, &v.address) {
                return Ok(Some(format!(
                    "factor {m}: vertices {prior} and {} share label {label}",
                    v.address
                )));
            }
        }
    }
    Ok(None)
}

/// Every window label equals the oracle's from-scratch derivation.
fn check_rederived(family: &Family, ball: &BallMaterialization) -> Result<Option<String>> {
    let mut oracle = RuleOracle::new(family.clone());
    for v in &ball.vertices {
        for (m, &label) in v.labels.iter().enumerate() {
            let want = oracle.label_index(&v.address, m as u64)?;
            if label != want {
                return Ok(Some(format!(
                    "vertex {} factor {m}: window label {label}, derived {want}",
                    v.address
                )));
            }
        }
    }
    Ok(None)
}

/// Labels of two window vertices are forest-adjacent in factor m exactly
/// when the pair is a tree edge assigned to m.
fn check_adjacency_iff(family: &Family, ball: &BallMaterialization) -> Result<Option<String>> {
    let owner: HashMap<TreeAddress, u64> = ball
        .edges
        .iter()
        .map(|e| (e.parent.son(e.slot), e.assignment.factor))
        .collect();
    let factors: Vec<_> = (0..ball.factors).map(|m| family.factor(m)).collect();
    for (ai, a) in ball.vertices.iter().enumerate() {
        for b in &ball.vertices[ai + 1..] {
            let assigned = if a.address.parent().as_ref() == Some(&b.address) {
                owner.get(&a.address).copied()
            } else if b.address.parent().as_ref() == Some(&a.address) {
                owner.get(&b.address).copied()
            } else {
                None
            };
            for (m, factor) in factors.iter().enumerate().take(ball.factors as usize) {
                let (Some(&la), Some(&lb)) = (a.labels.get(m), b.labels.get(m)) else {
                    continue;
                };
                let forest = factor.adjacent(la, lb)?;
                let claimed = assigned == Some(m as u64);
                if forest != claimed {
                    return Ok(Some(format!(
                        "vertices {} and {} factor {m}: labels {la}, {lb} \
                         forest-adjacent={forest} but edge-assigned={claimed}",
                        a.address, b.address
                    )));
                }
            }
        }
    }
    Ok(None)
}

/// Every in-window tree edge is listed exactly once, carries a unique
/// (factor, i, j) with i < j, and its endpoints are the endpoint labels.
fn check_edges(ball: &BallMaterialization) -> Result<Option<String>> {
    let labels: HashMap<&TreeAddress, &Vec<u64>> = ball
        .vertices
        .iter()
        .map(|v| (&v.address, &v.labels))
        .collect();
    let mut seen_slots = HashSet::new();
    let mut seen_assignments = HashSet::new();
    for e in &ball.edges {
        let child = e.parent.son(e.slot);
        if !seen_slots.insert((e.parent.clone(), e.slot)) {
            return Ok(Some(format!(
                "edge {} slot {} listed twice",
                e.parent, e.slot
            )));
        }
        let a = e.assignment;
        if a.i >= a.j {
            return Ok(Some(format!(
                "edge {} slot {}: endpoints ({}, {}) not strictly ordered",
                e.parent, e.slot, a.i, a.j
            )));
        }
        if !seen_assignments.insert((a.factor, a.i, a.j)) {
            return Ok(Some(format!(
                "assignment (factor {}, {}, {}) claimed by two edges",
                a.factor, a.i, a.j
            )));
        }
        if a.factor < ball.factors {
            let (Some(pl), Some(cl)) = (labels.get(&e.parent), labels.get(&child)) else {
                return Ok(Some(format!(
                    "edge {} slot {} touches a vertex outside the window",
                    e.parent, e.slot
                )));
            };
            let (Some(&pi), Some(&ci)) = (pl.get(a.factor as usize), cl.get(a.factor as usize))
            else {
                continue;
            };
            if (pi.min(ci), pi.max(ci)) != (a.i, a.j) {
                return Ok(Some(format!(
                    "edge {} slot {} factor {}: endpoints ({}, {}) but labels ({pi}, {ci})",
                    e.parent, e.slot, a.factor, a.i, a.j
                )));
            }
        }
    }
    // Existence: every non-root window vertex has its parent edge listed.
    for v in &ball.vertices {
        if let Some(parent) = v.address.parent() {
            let slot = v.address.last_slot().expect("non-root");
            if !seen_slots.contains(&(parent.clone(), slot)) {
                return Ok(Some(format!("edge {} slot {slot} missing", parent)));
            }
        }
    }
    Ok(None)
}

/// Depth law: pool depth of the label's component plus the label's
/// distance to its component root (counted by walking shape parents)
/// equals the vertex's tree depth.
fn check_depth_law(family: &Family, ball: &BallMaterialization) -> Result<Option<String>> {
    let factors: Vec<_> = (0..ball.factors).map(|m| family.factor(m)).collect();
    for v in &ball.vertices {
        for (m, &label) in v.labels.iter().enumerate() {
            let (position, local) = factors[m].decode(label)?;
            let (pool, _) = pool_of_position(position);
            let shape = factors[m].shape_at(position)?;
            let mut distance = 0u64;
            let mut at = local;
            while let Some(parent) = shape.parent(at) {
                at = parent;
                distance += 1;
            }
            if at != 0 {
                return Ok(Some(format!(
                    "vertex {} factor {m}: label {label} not connected to its component root",
                    v.address
                )));
            }
            if pool + distance != v.address.depth() {
                return Ok(Some(format!(
                    "vertex {} factor {m}: pool {pool} + distance {distance} != depth {}",
                    v.address,
                    v.address.depth()
                )));
            }
        }
    }
    Ok(None)
}

/// All window checks for a single-stage factorization.
pub fn verify_window(family: &Family, ball: &BallMaterialization) -> Vec<VerificationReport> {
    let scope = window_scope(ball);
    let vertices = ball.vertices.len();
    let edges = ball.edges.len();
    let labels = format!("{} vertices x {} factors", vertices, ball.factors);
    vec![
        VerificationReport::from_outcome("spanning", &scope, check_spanning(ball), labels.clone()),
        VerificationReport::from_outcome(
            "labels-injective",
            &scope,
            check_injective(ball),
            labels.clone(),
        ),
        VerificationReport::from_outcome(
            "labels-rederived",
            &scope,
            check_rederived(family, ball),
            labels.clone(),
        ),
        VerificationReport::from_outcome(
            "adjacency-iff",
            &scope,
            check_adjacency_iff(family, ball),
            format!(
                "{} vertex pairs x {} factors",
                vertices * vertices.saturating_sub(1) / 2,
                ball.factors
            ),
        ),
        VerificationReport::from_outcome(
            "edge-owner-unique",
            &scope,
            check_edges(ball),
            format!("{edges} edges"),
        ),
        VerificationReport::from_outcome(
            "depth-law",
            &scope,
            check_depth_law(family, ball),
            labels,
        ),
    ]
}

/// Materializes and verifies a window; on failure, retries strictly
/// smaller scopes in ascending volume and reports the smallest failing
/// one, so counterexamples stay minimal.
pub fn verify_engine_window(
    engine: &Engine,
    radius: u64,
    sons: u64,
    factors: u64,
) -> Result<Vec<VerificationReport>> {
    shrink_verify(engine.family(), radius, sons, factors, |d, k, m| {
        engine.materialize_ball(d, k, m)
    })
}

fn shrink_verify(
    family: &Family,
    radius: u64,
    sons: u64,
    factors: u64,
    materialize: impl Fn(u64, u64, u64) -> Result<BallMaterialization>,
) -> Result<Vec<VerificationReport>> {
    let full = materialize(radius, sons, factors)?;
    let reports = verify_window(family, &full);
    if all_passed(&reports) {
        return Ok(reports);
    }
    let mut scopes = Vec::new();
    for d in 0..=radius {
        for k in 0..=sons {
            for m in 1..=factors {
                if (d, k, m) != (radius, sons, factors) {
                    scopes.push((d, k, m));
                }
            }
        }
    }
    scopes.sort_by_key(|&(d, k, m)| {
        (
            ball_len(d, k).unwrap_or(u64::MAX).saturating_mul(m),
            d,
            k,
            m,
        )
    });
    for (d, k, m) in scopes {
        let ball = materialize(d, k, m)?;
        let smaller = verify_window(family, &ball);
        if !all_passed(&smaller) {
            return Ok(smaller);
        }
    }
    Ok(reports)
}

/// Window checks for the two-stage composition: label and edge conditions
/// hold verbatim; the depth law is a single-stage notion and is replaced
/// by totality of the first stage's labels.
pub fn verify_pipeline_window(
    pipeline: &Pipeline,
    radius: u64,
    sons: u64,
    factors: u64,
) -> Result<Vec<VerificationReport>> {
    let ball = pipeline.materialize_ball(radius, sons, factors)?;
    let scope = format!("pipeline {}", window_scope(&ball));
    let labels = format!(
        "{} vertices x {} factors",
        ball.vertices.len(),
        ball.factors
    );
    let stage_one = || -> Result<Option<String>> {
        for v in &ball.vertices {
            for m in 0..factors {
                pipeline.stage1().label_of(&v.address, m)?;
            }
        }
        Ok(None)
    };
    Ok(vec![
        VerificationReport::from_outcome("spanning", &scope, check_spanning(&ball), labels.clone()),
        VerificationReport::from_outcome(
            "labels-injective",
            &scope,
            check_injective(&ball),
            labels.clone(),
        ),
        VerificationReport::from_outcome(
            "adjacency-iff",
            &scope,
            check_adjacency_iff(pipeline.family(), &ball),
            format!(
                "{} vertex pairs x {} factors",
                ball.vertices.len() * ball.vertices.len().saturating_sub(1) / 2,
                ball.factors
            ),
        ),
        VerificationReport::from_outcome(
            "edge-owner-unique",
            &scope,
            check_edges(&ball),
            format!("{} edges", ball.edges.len()),
        ),
        VerificationReport::from_outcome("stage-one-spanning", &scope, stage_one(), labels),
    ])
}

/// Replay state for one factor: same rules as the simulator, different
/// bookkeeping (frontier recounted from the filled-cell set instead of
/// tracked by diagonal counters).
#[derive(Default)]
struct ReplayFactor {
    slot_of: HashMap<u64, (u64, u64)>,
    next_slot: HashMap<u64, u64>,
    bucket_row: HashMap<u64, u64>,
    cells: HashSet<(u64, u64)>,
    sigma: u64,
    in_square: u64,
    exhausted: bool,
}

impl ReplayFactor {
    fn sigma_view(&self) -> Sigma {
        if self.exhausted {
            Sigma::Exhausted
        } else {
            Sigma::Value(self.sigma)
        }
    }

    fn fill(&mut self, row: u64, slot: u64, n: u64) {
        self.cells.insert((row, slot));
        if row.max(slot) <= self.sigma {
            self.in_square += 1;
        }
        while !self.exhausted && self.in_square == (self.sigma + 1) * (self.sigma + 1) {
            if self.sigma + 1 >= n {
                self.exhausted = true;
            } else {
                self.sigma += 1;
                let s = self.sigma;
                self.in_square = self.cells.iter().filter(|&&(a, b)| a.max(b) <= s).count() as u64;
            }
        }
    }
}

struct Replayer {
    lower: Vec<Vec<u64>>,
    parent: Vec<Option<u64>>,
    classes: Vec<Option<(u64, u64)>>,
    factors: Vec<ReplayFactor>,
    n: u64,
}

impl Replayer {
    fn new(config: &SimConfig) -> Result<Replayer> {
        let n = config.bounds.vertices;
        let err = |msg: &str| Error::InvalidSim(msg.to_string());
        if config.parent.len() as u64 != n || config.parent.first() != Some(&None) {
            return Err(err("parent map malformed"));
        }
        let mut lower = vec![Vec::new(); n as usize];
        let mut seen = HashSet::new();
        for &(a, b) in &config.edges {
            if a >= n || b >= n || a == b || !seen.insert((a.min(b), a.max(b))) {
                return Err(err("edge list malformed"));
            }
            lower[a.max(b) as usize].push(a.min(b));
        }
        for nb in &mut lower {
            nb.sort_unstable();
        }
        let classes = match &config.classes {
            crate::sim::ClassSpec::Auto => {
                let mut ranks: HashMap<u64, u64> = HashMap::new();
                let mut classes = vec![None; n as usize];
                for i in 1..n {
                    let p = config.parent[i as usize].ok_or_else(|| err("missing parent"))?;
                    let r = ranks.entry(p).or_insert(0);
                    let (m, t, _) = triple_decode(*r);
                    *r += 1;
                    classes[i as usize] = Some((m, t));
                }
                classes
            }
            crate::sim::ClassSpec::Explicit(list) => {
                if list.len() as u64 != n {
                    return Err(err("class list malformed"));
                }
                list.clone()
            }
        };
        Ok(Replayer {
            lower,
            parent: config.parent.clone(),
            classes,
            factors: (0..config.bounds.factors)
                .map(|_| ReplayFactor::default())
                .collect(),
            n,
        })
    }

    fn conditions_at(&self, m: u64, pass: u64, i: u64, row: u64) -> ([bool; 5], u64) {
        let st = &self.factors[m as usize];
        let slot = st.next_slot.get(&row).copied().unwrap_or(0);
        let d3 = slot < self.n;
        let d4 = !self.factors[..m as usize]
            .iter()
            .any(|f| f.slot_of.get(&i).is_some_and(|&(r, _)| r == row));
        let d5 = !self.factors[..m as usize]
            .iter()
            .any(|f| f.bucket_row.get(&i) == Some(&row));
        let class = self.classes[i as usize].expect("non-root stepped vertex");
        let d6 = if self.parent[i as usize] == Some(row) {
            class <= (m, pass)
        } else {
            class != (m, pass)
        };
        let d7 = st.exhausted || (row <= st.sigma && slot <= st.sigma);
        ([d3, d4, d5, d6, d7], slot)
    }

    fn expected(&mut self, m: u64, pass: u64, i: u64) -> (Sigma, [bool; 8], Action, Sigma) {
        let before = self.factors[m as usize].sigma_view();
        let st = &self.factors[m as usize];
        let d1 = !st.slot_of.contains_key(&i) && !st.bucket_row.contains_key(&i);
        let rows = self.lower[i as usize].clone();
        let mut winner = None;
        for &row in &rows {
            let ([d3, d4, d5, d6, d7], slot) = self.conditions_at(m, pass, i, row);
            if d3 && d4 && d5 && d6 && d7 {
                winner = Some((row, slot));
                break;
            }
        }
        let d8 = winner.is_some();
        let (action, conditions) = if d1 && d8 {
            let (row, slot) = winner.expect("checked");
            (Action::Assign { row, slot }, [true; 8])
        } else {
            let bucket = rows.iter().copied().find(|&row| {
                let ([_, d4, d5, d6, _], _) = self.conditions_at(m, pass, i, row);
                d4 && d5 && d6
            });
            match (d1, bucket, rows.first()) {
                (true, Some(row), _) => {
                    let ([d3, _, _, _, d7], _) = self.conditions_at(m, pass, i, row);
                    (
                        Action::Bucket { row },
                        [d1, true, d3, true, true, true, d7, d8],
                    )
                }
                (_, _, Some(&row)) => {
                    let ([d3, d4, d5, d6, d7], _) = self.conditions_at(m, pass, i, row);
                    (Action::Skip, [d1, true, d3, d4, d5, d6, d7, d8])
                }
                (_, _, None) => (
                    Action::Skip,
                    [d1, false, false, false, false, false, false, d8],
                ),
            }
        };
        let st = &mut self.factors[m as usize];
        match action {
            Action::Assign { row, slot } => {
                st.slot_of.insert(i, (row, slot));
                st.next_slot.insert(row, slot + 1);
                let n = self.n;
                st.fill(row, slot, n);
            }
            Action::Bucket { row } => {
                st.bucket_row.insert(i, row);
            }
            Action::Skip => {}
        }
        let after = self.factors[m as usize].sigma_view();
        (before, conditions, action, after)
    }
}

fn trace_scope(trace: &SimTrace) -> String {
    let b = trace.config.bounds;
    format!(
        "factors={} passes={} vertices={} steps={}",
        b.factors,
        b.passes,
        b.vertices,
        trace.steps.len()
    )
}

fn check_step_order(trace: &SimTrace) -> Result<Option<String>> {
    let b = trace.config.bounds;
    let mut expected = Vec::new();
    for m in 0..b.factors {
        for pass in 0..b.passes {
            for i in 0..b.vertices {
                expected.push(StepId::new(m, pass, i));
            }
        }
    }
    if trace.steps.len() != expected.len() {
        return Ok(Some(format!(
            "{} steps logged, schedule has {}",
            trace.steps.len(),
            expected.len()
        )));
    }
    for (s, want) in trace.steps.iter().zip(&expected) {
        if s.step != *want {
            return Ok(Some(format!(
                "step ({}, {}, {}) out of order, expected ({}, {}, {})",
                s.step.factor, s.step.pass, s.step.vertex, want.factor, want.pass, want.vertex
            )));
        }
    }
    Ok(None)
}

fn check_replay(trace: &SimTrace) -> Result<Option<String>> {
    let mut replay = Replayer::new(&trace.config)?;
    for s in &trace.steps {
        let (before, conditions, action, after) =
            replay.expected(s.step.factor, s.step.pass, s.step.vertex);
        let id = format!(
            "step ({}, {}, {})",
            s.step.factor, s.step.pass, s.step.vertex
        );
        if s.sigma_before != before {
            return Ok(Some(format!(
                "{id}: logged sigma_before {:?}, replay {:?}",
                s.sigma_before, before
            )));
        }
        if s.conditions != conditions {
            return Ok(Some(format!(
                "{id}: logged conditions {:?}, replay {conditions:?}",
                s.conditions
            )));
        }
        if s.action != action {
            return Ok(Some(format!(
                "{id}: logged action {:?}, replay {action:?}",
                s.action
            )));
        }
        if s.sigma_after != after {
            return Ok(Some(format!(
                "{id}: logged sigma_after {:?}, replay {:?}",
                s.sigma_after, after
            )));
        }
    }
    Ok(None)
}

fn check_c_sets(trace: &SimTrace) -> Result<Option<String>> {
    let mut host = HashSet::new();
    for &(a, b) in &trace.config.edges {
        host.insert((a.min(b), a.max(b)));
    }
    let mut row_of: HashMap<(u64, u64), u64> = HashMap::new();
    let mut factor_of: HashMap<(u64, u64), u64> = HashMap::new();
    for s in &trace.steps {
        let row = match s.action {
            Action::Assign { row, .. } => row,
            Action::Bucket { row } => row,
            Action::Skip => continue,
        };
        let (m, i) = (s.step.factor, s.step.vertex);
        if i <= row || !host.contains(&(row, i)) {
            return Ok(Some(format!(
                "factor {m}: row {row} took vertex {i}, not a higher host neighbor"
            )));
        }
        if let Some(&other) = row_of.get(&(m, i)) {
            if other != row {
                return Ok(Some(format!(
                    "factor {m}: vertex {i} sits in rows {other} and {row}"
                )));
            }
        }
        row_of.insert((m, i), row);
        if let Some(&other) = factor_of.get(&(row, i)) {
            if other != m {
                return Ok(Some(format!(
                    "row {row}: vertex {i} taken by factors {other} and {m}"
                )));
            }
        }
        factor_of.insert((row, i), m);
    }
    Ok(None)
}

fn check_acyclic(trace: &SimTrace) -> Result<Option<String>> {
    let n = trace.config.bounds.vertices as usize;
    let mut roots: Vec<Vec<usize>> = (0..trace.config.bounds.factors)
        .map(|_| (0..n).collect())
        .collect();
    fn find(root: &mut [usize], mut x: usize) -> usize {
        while root[x] != x {
            root[x] = root[root[x]];
            x = root[x];
        }
        x
    }
    for s in &trace.steps {
        let row = match s.action {
            Action::Assign { row, .. } => row,
            Action::Bucket { row } => row,
            Action::Skip => continue,
        };
        let uf = &mut roots[s.step.factor as usize];
        let (a, b) = (find(uf, row as usize), find(uf, s.step.vertex as usize));
        if a == b {
            return Ok(Some(format!(
                "factor {}: edge ({row}, {}) closes a cycle",
                s.step.factor, s.step.vertex
            )));
        }
        uf[a] = b;
    }
    Ok(None)
}

/// All trace checks: schedule order, full decision replay, row-set
/// conditions, and per-factor acyclicity.
pub fn verify_trace(trace: &SimTrace) -> Vec<VerificationReport> {
    let scope = trace_scope(trace);
    let steps = format!("{} steps", trace.steps.len());
    vec![
        VerificationReport::from_outcome(
            "step-order",
            &scope,
            check_step_order(trace),
            steps.clone(),
        ),
        VerificationReport::from_outcome(
            "d-vector-replay",
            &scope,
            check_replay(trace),
            steps.clone(),
        ),
        VerificationReport::from_outcome("c-sets", &scope, check_c_sets(trace), steps.clone()),
        VerificationReport::from_outcome("factor-acyclicity", &scope, check_acyclic(trace), steps),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::EngineConfig;
    use crate::forest::builtin_family;
    use crate::sim::seeds::{adequate_host, fuzz_config};
    use crate::sim::{run, SimBounds};
    use crate::Family;

    fn family(name: &str) -> Family {
        Family::new(builtin_family(name).expect("builtin")).expect("valid")
    }

    #[test]
    fn oracle_matches_engine_demand_prefixes() {
        for name in ["k2-family", "omega-regular", "star-mix"] {
            let engine = Engine::new(family(name));
            let mut oracle = RuleOracle::new(family(name));
            for w in [
                TreeAddress::root(),
                TreeAddress::new(vec![0]),
                TreeAddress::new(vec![2, 1]),
                TreeAddress::new(vec![1, 0, 3]),
            ] {
                let want = engine.demands(&w, 10).unwrap();
                let got = oracle.brute_force_allocation(&w, 10).unwrap();
                assert_eq!(got, want, "{name} at {w}");
            }
        }
    }

    #[test]
    fn oracle_prefixes_are_order_insensitive() {
        let w = TreeAddress::new(vec![1, 2]);
        let mut a = RuleOracle::new(family("k2-family"));
        a.brute_force_allocation(&w, 4).unwrap();
        let grown = a.brute_force_allocation(&w, 9).unwrap();
        let mut b = RuleOracle::new(family("k2-family"));
        assert_eq!(grown, b.brute_force_allocation(&w, 9).unwrap());
    }

    #[test]
    fn windows_verify_on_builtin_families() {
        for name in ["k2-family", "lambda:3", "star-mix"] {
            let engine = Engine::new(family(name));
            let reports = verify_engine_window(&engine, 2, 3, 4).unwrap();
            assert!(
                all_passed(&reports),
                "{name}: {:?}",
                reports.iter().find(|r| !r.passed())
            );
            assert_eq!(reports.len(), 6);
        }
    }

    #[test]
    fn fault_duplicate_label_is_caught() {
        let engine = Engine::new(family("k2-family"));
        let mut ball = engine.materialize_ball(2, 3, 3).unwrap();
        ball.vertices[3].labels[1] = ball.vertices[1].labels[1];
        let reports = verify_window(engine.family(), &ball);
        let r = reports
            .iter()
            .find(|r| r.check == "labels-injective")
            .unwrap();
        assert_eq!(r.verdict, Verdict::Fail);
        let ce = r.counterexample.as_ref().unwrap();
        assert!(
            ce.contains(&ball.vertices[3].address.to_string()),
            "counterexample names the vertex: {ce}"
        );
    }

    #[test]
    fn fault_wrong_label_is_caught() {
        let engine = Engine::new(family("k2-family"));
        let mut ball = engine.materialize_ball(2, 3, 3).unwrap();
        ball.vertices[2].labels[2] += 1000;
        let reports = verify_window(engine.family(), &ball);
        let r = reports
            .iter()
            .find(|r| r.check == "labels-rederived")
            .unwrap();
        assert_eq!(r.verdict, Verdict::Fail);
        assert!(r.counterexample.as_ref().unwrap().contains("derived"));
    }

    #[test]
    fn fault_truncated_labels_is_caught() {
        let engine = Engine::new(family("k2-family"));
        let mut ball = engine.materialize_ball(2, 3, 3).unwrap();
        ball.vertices[5].labels.pop();
        let reports = verify_window(engine.family(), &ball);
        let r = reports.iter().find(|r| r.check == "spanning").unwrap();
        assert_eq!(r.verdict, Verdict::Fail);
    }

    #[test]
    fn fault_wrong_edge_factor_is_caught() {
        let engine = Engine::new(family("k2-family"));
        let mut ball = engine.materialize_ball(2, 3, 3).unwrap();
        ball.edges[0].assignment.factor += 1;
        let reports = verify_window(engine.family(), &ball);
        let r = reports.iter().find(|r| r.check == "adjacency-iff").unwrap();
        assert_eq!(r.verdict, Verdict::Fail);
    }

    #[test]
    fn fault_repeated_assignment_is_caught() {
        let engine = Engine::new(family("k2-family"));
        let mut ball = engine.materialize_ball(2, 3, 3).unwrap();
        let mut copy = ball.edges[0].clone();
        copy.slot = 17;
        ball.edges.push(copy);
        let reports = verify_window(engine.family(), &ball);
        let r = reports
            .iter()
            .find(|r| r.check == "edge-owner-unique")
            .unwrap();
        assert_eq!(r.verdict, Verdict::Fail);
        assert!(r.counterexample.as_ref().unwrap().contains("two edges"));
    }

    #[test]
    fn fault_wrong_pool_label_is_caught() {
        let engine = Engine::new(family("k2-family"));
        let mut ball = engine.materialize_ball(2, 3, 3).unwrap();
        // Vertex /0 serves factor 0, so its factor-1 label is a fresh
        // pool-1 root; repoint it at a pool-2 component root instead.
        let factor = engine.factor_view(1).unwrap();
        let wrong = factor.encode(position_of_pool(2, 0).unwrap(), 0).unwrap();
        let at = ball
            .vertices
            .iter()
            .position(|v| v.address == TreeAddress::new(vec![0]))
            .unwrap();
        ball.vertices[at].labels[1] = wrong;
        let reports = verify_window(engine.family(), &ball);
        let r = reports.iter().find(|r| r.check == "depth-law").unwrap();
        assert_eq!(r.verdict, Verdict::Fail, "{:?}", r.counterexample);
    }

    #[test]
    fn shrinking_reports_the_smallest_failing_scope() {
        let engine = Engine::new(family("k2-family"));
        // Corrupt every scope the same way: the root's factor-0 label is
        // wrong everywhere, so the minimal scope must be reported.
        let reports = shrink_verify(engine.family(), 2, 3, 3, |d, k, m| {
            let mut ball = engine.materialize_ball(d, k, m)?;
            ball.vertices[0].labels[0] += 7;
            Ok(ball)
        })
        .unwrap();
        assert!(!all_passed(&reports));
        assert!(
            reports
                .iter()
                .all(|r| r.scope == "radius=0 sons=0 factors=1"),
            "shrunk to the single-vertex window: {}",
            reports[0].scope
        );
    }

    #[test]
    fn pipeline_windows_verify() {
        let pipeline = Pipeline::with_config(
            builtin_family("mixed-finite").unwrap(),
            EngineConfig::default(),
        )
        .unwrap();
        let reports = verify_pipeline_window(&pipeline, 2, 2, 4).unwrap();
        assert!(
            all_passed(&reports),
            "{:?}",
            reports.iter().find(|r| !r.passed())
        );
        assert_eq!(reports.len(), 5);
        assert!(reports.iter().any(|r| r.check == "stage-one-spanning"));
    }

    #[test]
    fn traces_verify_green() {
        let config = adequate_host(2, 3);
        let trace = run(&config).unwrap();
        assert!(all_passed(&verify_trace(&trace)));
        for seed in 0..10 {
            let trace = run(&fuzz_config(seed)).unwrap();
            let reports = verify_trace(&trace);
            assert!(
                all_passed(&reports),
                "seed {seed}: {:?}",
                reports.iter().find(|r| !r.passed())
            );
        }
    }

    #[test]
    fn fault_wrong_sigma_is_caught_at_first_divergence() {
        let config = adequate_host(1, 2);
        let mut trace = run(&config).unwrap();
        let at = trace
            .steps
            .iter()
            .position(|s| matches!(s.action, Action::Assign { .. }))
            .unwrap();
        trace.steps[at].sigma_after = Sigma::Value(999);
        let reports = verify_trace(&trace);
        let r = reports
            .iter()
            .find(|r| r.check == "d-vector-replay")
            .unwrap();
        assert_eq!(r.verdict, Verdict::Fail);
        let id = format!(
            "step ({}, {}, {})",
            trace.steps[at].step.factor, trace.steps[at].step.pass, trace.steps[at].step.vertex
        );
        assert!(
            r.counterexample.as_ref().unwrap().starts_with(&id),
            "flagged at the corrupted step: {:?}",
            r.counterexample
        );
    }

    #[test]
    fn fault_reordered_steps_are_caught() {
        let mut trace = run(&adequate_host(1, 1)).unwrap();
        trace.steps.swap(0, 1);
        let r = verify_trace(&trace);
        let order = r.iter().find(|r| r.check == "step-order").unwrap();
        assert_eq!(order.verdict, Verdict::Fail);
    }

    #[test]
    fn fault_cyclic_factor_is_caught() {
        use crate::sim::{ClassSpec, SimStep};
        // Triangle host; hand-written steps wire 0-1, 1-2, 0-2 into one
        // factor, closing a cycle.
        let config = SimConfig {
            bounds: SimBounds {
                factors: 1,
                passes: 1,
                vertices: 3,
            },
            edges: vec![(0, 1), (0, 2), (1, 2)],
            parent: vec![None, Some(0), Some(1)],
            classes: ClassSpec::Auto,
        };
        let mk = |i: u64, row: u64| SimStep {
            step: StepId::new(0, 0, i),
            sigma_before: Sigma::Value(0),
            sigma_after: Sigma::Value(0),
            conditions: [true; 8],
            action: Action::Assign { row, slot: 0 },
        };
        let trace = SimTrace {
            config,
            steps: vec![mk(1, 0), mk(2, 1), mk(2, 0)],
        };
        let reports = verify_trace(&trace);
        let r = reports
            .iter()
            .find(|r| r.check == "factor-acyclicity")
            .unwrap();
        assert_eq!(r.verdict, Verdict::Fail);
        assert!(r.counterexample.as_ref().unwrap().contains("cycle"));
    }

    #[test]
    fn reports_serialize_deterministically() {
        let engine = Engine::new(family("k2-family"));
        let a = serde_json::to_string(&verify_engine_window(&engine, 2, 2, 3).unwrap()).unwrap();
        let engine2 = Engine::new(family("k2-family"));
        let b = serde_json::to_string(&verify_engine_window(&engine2, 2, 2, 3).unwrap()).unwrap();
        assert_eq!(a, b);
        assert!(a.contains("\"verdict\":\"pass\""));
    }
}
