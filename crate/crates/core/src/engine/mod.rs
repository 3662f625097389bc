//! The lazy factorization engine over the infinitely branching rooted tree.
//!
//! Every tree vertex carries one label per factor; every tree edge belongs
//! to exactly one factor. The schedule is fully deterministic:
//!
//! * the n-th son of a vertex serves the n-th valid demand `(m, k)` in
//!   ascending `pair(m, k)` order, where `(m, k)` is valid when the
//!   vertex's factor-m label still has a k-th unextended neighbor;
//! * a son whose serving factor is not `m` carries a fresh factor-m
//!   component root: the r-th non-m son at its level (in level-rank order)
//!   hosts the rank-r component of pool `depth`.
//!
//! All bookkeeping is memoized per (vertex, factor) and per level; caches
//! never change observable answers, and a configurable budget bounds the
//! total work any query sequence may trigger.

pub mod export;
pub mod pipeline;

use std::collections::HashMap;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::enumeration::{level_rank, pair, unpair};
use crate::error::{Error, Result};
use crate::forest::{position_of_pool, Factor, Family};
use crate::tree::{ball, TreeAddress};

/// Where an engine's factors come from: the family itself, or one
/// component batch of every factor in one dovetail group (the inner stage
/// of the composed construction).
#[derive(Clone, Debug)]
enum SourceView {
    Direct,
    Batch {
        group: u64,
        component: u64,
        scan_cap: u64,
    },
}

#[derive(Clone, Debug)]
struct FactorSource {
    family: Family,
    view: SourceView,
}

impl FactorSource {
    fn factor(&self, m: u64) -> Result<Factor> {
        match self.view {
            SourceView::Direct => Ok(self.family.factor(m)),
            SourceView::Batch {
                group,
                component,
                scan_cap,
            } => {
                let backing = pair(group, m)?;
                Ok(Factor::batch(
                    self.family.layout(backing),
                    component,
                    scan_cap,
                ))
            }
        }
    }
}

/// One pending continuation obligation at a tree vertex: son slots serve
/// these in order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Demand {
    /// Factor whose label the son extends.
    pub factor: u64,
    /// Which unextended neighbor of the vertex's label the son receives.
    pub continuation: u64,
    /// Forest index of the label the son will carry.
    pub target: u64,
}

/// A tree edge's unique factor membership, with forest endpoints i < j.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EdgeAssignment {
    pub factor: u64,
    pub i: u64,
    pub j: u64,
}

/// Label of one (vertex, factor) pair, with its component coordinates.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelView {
    /// Global forest index of the label.
    pub index: u64,
    /// Component position within the factor's enumeration.
    pub position: u64,
    /// Vertex number inside the component.
    pub local: u64,
    /// True when the label extends the parent's label (the parent edge
    /// belongs to this factor); false for component roots.
    pub continuation: bool,
}

/// Finite window over the factorization: all labels for factors below a
/// bound plus the exact assignment of every in-window edge.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BallMaterialization {
    pub radius: u64,
    pub sons: u64,
    pub factors: u64,
    pub vertices: Vec<BallVertex>,
    pub edges: Vec<BallEdge>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BallVertex {
    pub address: TreeAddress,
    /// labels[m] is the factor-m forest index of this vertex, m < factors.
    pub labels: Vec<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BallEdge {
    pub parent: TreeAddress,
    pub slot: u64,
    pub assignment: EdgeAssignment,
}

/// Engine limits: a depth cap for whole-ball materialization and a work
/// budget charged per memo entry and per scanned demand code.
#[derive(Clone, Copy, Debug)]
pub struct EngineConfig {
    pub max_depth: u64,
    pub budget: u64,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            max_depth: 6,
            budget: 1 << 27,
        }
    }
}

#[derive(Clone, Copy, Debug)]
struct LabelInfo {
    index: u64,
    position: u64,
    local: u64,
    continuation: bool,
}

#[derive(Clone, Copy, Debug)]
struct StoredDemand {
    factor: u64,
    continuation: u64,
    position: u64,
    local: u64,
    index: u64,
}

#[derive(Debug, Default)]
struct DemandColumn {
    demands: Vec<StoredDemand>,
    next_code: u64,
}

#[derive(Debug, Default)]
struct MemoState {
    labels: HashMap<(u64, u64, u64), LabelInfo>,
    columns: HashMap<(u64, u64), DemandColumn>,
    /// level_factors[d][r] = serving factor of the rank-r vertex at depth d.
    level_factors: Vec<Vec<u64>>,
    /// Ascending level ranks served by (depth, factor); backs gap ranking.
    occurrences: HashMap<(u64, u64), Vec<u64>>,
    used: u64,
}

/// Lazy engine for one family; all queries are answered with finite work
/// and are independent of query order and cache state.
pub struct Engine {
    source: FactorSource,
    config: EngineConfig,
    state: Mutex<MemoState>,
}

impl Engine {
    pub fn new(family: Family) -> Engine {
        Engine::with_config(family, EngineConfig::default())
    }

    pub fn with_config(family: Family, config: EngineConfig) -> Engine {
        Engine {
            source: FactorSource {
                family,
                view: SourceView::Direct,
            },
            config,
            state: Mutex::new(MemoState::default()),
        }
    }

    /// Inner-stage engine: factor `m` enumerates component batch
    /// `component` of the family's factor pair(group, m).
    pub(crate) fn batch_stage(
        family: Family,
        group: u64,
        component: u64,
        config: EngineConfig,
    ) -> Engine {
        Engine {
            source: FactorSource {
                family,
                view: SourceView::Batch {
                    group,
                    component,
                    scan_cap: 1 << 22,
                },
            },
            config,
            state: Mutex::new(MemoState::default()),
        }
    }

    pub fn family(&self) -> &Family {
        &self.source.family
    }

    /// The exact enumeration surface this engine uses for factor `m`; for
    /// inner-stage engines this differs from `family().factor(m)`.
    pub fn factor_view(&self, m: u64) -> Result<Factor> {
        self.source.factor(m)
    }

    pub fn config(&self) -> EngineConfig {
        self.config
    }

    /// Work units consumed so far (memo entries plus scanned codes).
    pub fn budget_used(&self) -> u64 {
        self.state.lock().expect("engine lock").used
    }

    /// Forest index of the factor-m label of `w`.
    pub fn label_of(&self, w: &TreeAddress, m: u64) -> Result<u64> {
        Ok(self.label_details(w, m)?.index)
    }

    /// Full label record of `(w, m)`.
    pub fn label_details(&self, w: &TreeAddress, m: u64) -> Result<LabelView> {
        let (d, r) = address_key(w)?;
        let st = &mut *self.state.lock().expect("engine lock");
        let info = self.label_worker(st, d, r, m)?;
        Ok(LabelView {
            index: info.index,
            position: info.position,
            local: info.local,
            continuation: info.continuation,
        })
    }

    /// First `count` demands of `w` in canonical order.
    pub fn demands(&self, w: &TreeAddress, count: usize) -> Result<Vec<Demand>> {
        let (d, r) = address_key(w)?;
        let st = &mut *self.state.lock().expect("engine lock");
        self.extend_column_to_slot(st, d, r, count.saturating_sub(1) as u64)?;
        let column = st.columns.get(&(d, r)).expect("column just extended");
        Ok(column.demands[..count.min(column.demands.len())]
            .iter()
            .map(|s| Demand {
                factor: s.factor,
                continuation: s.continuation,
                target: s.index,
            })
            .collect())
    }

    /// The demand served by son slot `slot` of `w`.
    pub fn demand_at(&self, w: &TreeAddress, slot: u64) -> Result<Demand> {
        let (d, r) = address_key(w)?;
        let st = &mut *self.state.lock().expect("engine lock");
        let stored = self.demand_worker(st, d, r, slot)?;
        Ok(Demand {
            factor: stored.factor,
            continuation: stored.continuation,
            target: stored.index,
        })
    }

    /// Unique factor membership of the edge from `w` to its `slot`-th son.
    pub fn factor_of_edge(&self, w: &TreeAddress, slot: u64) -> Result<EdgeAssignment> {
        let (d, r) = address_key(w)?;
        let st = &mut *self.state.lock().expect("engine lock");
        self.edge_worker(st, d, r, slot)
    }

    /// The unique address whose factor-m label is `i`.
    pub fn vertex_of(&self, m: u64, i: u64) -> Result<TreeAddress> {
        let factor = self.factor(m)?;
        let (position, local) = factor.decode(i)?;
        // Child ranks along the component path from its root down to local.
        let shape = factor.shape_at(position)?;
        let mut path = Vec::new();
        let mut cur = local;
        while let Some(parent) = shape.parent(cur) {
            path.push(shape.child_rank(cur));
            cur = parent;
        }
        path.reverse();
        let st = &mut *self.state.lock().expect("engine lock");
        let root = self.component_root_address(st, m, position)?;
        self.descend_worker(st, m, root, &path)
    }

    /// Canonical placement of `w` inside its factor-m component: the
    /// component's position plus the address of `w` in the component tree
    /// rooted at the label's component root (son order = demand order).
    pub fn component_iso(&self, m: u64, w: &TreeAddress) -> Result<(u64, TreeAddress)> {
        let st = &mut *self.state.lock().expect("engine lock");
        let (d0, r0) = address_key(w)?;
        let info = self.label_worker(st, d0, r0, m)?;
        let mut slots = Vec::new();
        let mut cur = w.clone();
        let mut cur_info = info;
        while cur_info.continuation {
            let parent = cur
                .parent()
                .expect("continuation labels sit below the root");
            let (pd, pr) = address_key(&parent)?;
            let serving = self.demand_worker(st, pd, pr, cur.last_slot().expect("non-root"))?;
            slots.push(serving.continuation);
            cur_info = self.label_worker(st, pd, pr, m)?;
            cur = parent;
        }
        slots.reverse();
        Ok((info.position, TreeAddress::new(slots)))
    }

    /// Inverse of [`Engine::component_iso`]: the real address of the
    /// canonical vertex `a` within component `position` of factor `m`.
    pub fn component_vertex(&self, m: u64, position: u64, a: &TreeAddress) -> Result<TreeAddress> {
        let st = &mut *self.state.lock().expect("engine lock");
        let root = self.component_root_address(st, m, position)?;
        self.descend_worker(st, m, root, a.slots())
    }

    /// Materializes every label (m < factors) and every edge assignment on
    /// the ball of the given radius with `sons` materialized slots.
    pub fn materialize_ball(
        &self,
        radius: u64,
        sons: u64,
        factors: u64,
    ) -> Result<BallMaterialization> {
        if radius > self.config.max_depth {
            return Err(Error::DepthCap {
                requested: radius,
                max: self.config.max_depth,
            });
        }
        let st = &mut *self.state.lock().expect("engine lock");
        let mut vertices = Vec::new();
        let mut edges = Vec::new();
        for address in ball(radius, sons) {
            let (d, r) = address_key(&address)?;
            let mut labels = Vec::with_capacity(factors as usize);
            for m in 0..factors {
                labels.push(self.label_worker(st, d, r, m)?.index);
            }
            if let (Some(parent), Some(slot)) = (address.parent(), address.last_slot()) {
                let (pd, pr) = address_key(&parent)?;
                edges.push(BallEdge {
                    parent,
                    slot,
                    assignment: self.edge_worker(st, pd, pr, slot)?,
                });
            }
            vertices.push(BallVertex { address, labels });
        }
        Ok(BallMaterialization {
            radius,
            sons,
            factors,
            vertices,
            edges,
        })
    }

    fn factor(&self, m: u64) -> Result<Factor> {
        self.source.factor(m)
    }

    fn charge(&self, st: &mut MemoState, during: &'static str) -> Result<()> {
        st.used += 1;
        if st.used > self.config.budget {
            Err(Error::BudgetExceeded {
                budget: self.config.budget,
                during,
            })
        } else {
            Ok(())
        }
    }

    fn label_worker(&self, st: &mut MemoState, d: u64, r: u64, m: u64) -> Result<LabelInfo> {
        if let Some(info) = st.labels.get(&(d, r, m)) {
            return Ok(*info);
        }
        let info = if d == 0 {
            LabelInfo {
                index: 0,
                position: 0,
                local: 0,
                continuation: false,
            }
        } else {
            let (pr, slot) = split_rank(d, r);
            let serving = self.demand_worker(st, d - 1, pr, slot)?;
            if serving.factor == m {
                LabelInfo {
                    index: serving.index,
                    position: serving.position,
                    local: serving.local,
                    continuation: true,
                }
            } else {
                // Fresh component root: rank = how many earlier vertices of
                // this level are not m-continuations.
                self.ensure_level(st, d, r)?;
                let gap = r - occurrences_below(st, d, m, r);
                let position = position_of_pool(d, gap)?;
                let index = self.factor(m)?.encode(position, 0)?;
                LabelInfo {
                    index,
                    position,
                    local: 0,
                    continuation: false,
                }
            }
        };
        self.charge(st, "label memoization")?;
        st.labels.insert((d, r, m), info);
        Ok(info)
    }

    fn demand_worker(&self, st: &mut MemoState, d: u64, r: u64, slot: u64) -> Result<StoredDemand> {
        self.extend_column_to_slot(st, d, r, slot)?;
        Ok(st.columns.get(&(d, r)).expect("column extended").demands[slot as usize])
    }

    fn extend_column_to_slot(&self, st: &mut MemoState, d: u64, r: u64, slot: u64) -> Result<()> {
        loop {
            let column = st.columns.entry((d, r)).or_default();
            if (column.demands.len() as u64) > slot {
                return Ok(());
            }
            let code = column.next_code;
            self.charge(st, "demand enumeration")?;
            let column = st.columns.get_mut(&(d, r)).expect("column exists");
            column.next_code = code
                .checked_add(1)
                .ok_or(Error::Overflow("demand code scan"))?;
            let (m, k) = unpair(code);
            let label = self.label_worker(st, d, r, m)?;
            let factor = self.factor(m)?;
            let shape = factor.shape_at(label.position)?;
            if shape.child_count(label.local).admits(k) {
                let child_local = shape.child(label.local, k)?;
                let index = factor.encode(label.position, child_local)?;
                let stored = StoredDemand {
                    factor: m,
                    continuation: k,
                    position: label.position,
                    local: child_local,
                    index,
                };
                st.columns
                    .get_mut(&(d, r))
                    .expect("column exists")
                    .demands
                    .push(stored);
            }
        }
    }

    fn edge_worker(&self, st: &mut MemoState, d: u64, r: u64, slot: u64) -> Result<EdgeAssignment> {
        let serving = self.demand_worker(st, d, r, slot)?;
        let parent_label = self.label_worker(st, d, r, serving.factor)?;
        let (i, j) = if parent_label.index < serving.index {
            (parent_label.index, serving.index)
        } else {
            (serving.index, parent_label.index)
        };
        Ok(EdgeAssignment {
            factor: serving.factor,
            i,
            j,
        })
    }

    /// Fills level_factors[d] densely for ranks below `upto`.
    fn ensure_level(&self, st: &mut MemoState, d: u64, upto: u64) -> Result<()> {
        debug_assert!(d >= 1, "level 0 has no serving factors");
        while (st.level_factors.len() as u64) <= d {
            st.level_factors.push(Vec::new());
        }
        let mut len = st.level_factors[d as usize].len() as u64;
        while len < upto {
            let (pr, slot) = split_rank(d, len);
            let factor = self.demand_worker(st, d - 1, pr, slot)?.factor;
            self.charge(st, "level fill")?;
            st.level_factors[d as usize].push(factor);
            st.occurrences.entry((d, factor)).or_default().push(len);
            len += 1;
        }
        Ok(())
    }

    /// Address of the component root: component `position` of factor `m`.
    fn component_root_address(
        &self,
        st: &mut MemoState,
        m: u64,
        position: u64,
    ) -> Result<TreeAddress> {
        if position == 0 {
            return Ok(TreeAddress::root());
        }
        let (pool, rank) = crate::forest::pool_of_position(position);
        let level_rank = self.nth_gap(st, pool, m, rank)?;
        TreeAddress::from_level_rank(pool, level_rank)
    }

    /// The rank of the r-th vertex at depth `d` that is not an
    /// m-continuation, in level-rank order.
    fn nth_gap(&self, st: &mut MemoState, d: u64, m: u64, r: u64) -> Result<u64> {
        // Least R with r+1 non-m entries in [0, R]; iterate R = r + (m-count
        // at or below R) to the fixpoint, extending the level as needed.
        let mut cur = r;
        loop {
            self.ensure_level(st, d, cur + 1)?;
            let c = occurrences_below(st, d, m, cur + 1);
            let next = r + c;
            if next == cur {
                debug_assert_ne!(st.level_factors[d as usize][cur as usize], m);
                return Ok(cur);
            }
            cur = next;
        }
    }

    /// Walks down from `from`, at each step taking the son that serves
    /// demand (m, k) for the next child rank k in `path`.
    fn descend_worker(
        &self,
        st: &mut MemoState,
        m: u64,
        from: TreeAddress,
        path: &[u64],
    ) -> Result<TreeAddress> {
        let mut cur = from;
        for &k in path {
            let (d, r) = address_key(&cur)?;
            let slot = self.slot_of_demand(st, d, r, m, k)?;
            cur = cur.son(slot);
        }
        Ok(cur)
    }

    /// Son slot of `w` serving demand (m, k).
    fn slot_of_demand(&self, st: &mut MemoState, d: u64, r: u64, m: u64, k: u64) -> Result<u64> {
        let code = crate::enumeration::pair(m, k)?;
        // The slot is the number of valid demands with smaller codes; extend
        // the column until the scan passes `code`.
        loop {
            let column = st.columns.entry((d, r)).or_default();
            if column.next_code > code {
                break;
            }
            let have = column.demands.len() as u64;
            self.extend_column_to_slot(st, d, r, have)?;
        }
        let column = st.columns.get(&(d, r)).expect("column extended");
        let slot = column
            .demands
            .iter()
            .position(|s| s.factor == m && s.continuation == k)
            .ok_or(Error::VertexRange {
                factor: m,
                index: k,
            })?;
        Ok(slot as u64)
    }
}

fn address_key(w: &TreeAddress) -> Result<(u64, u64)> {
    Ok((w.depth(), level_rank(w.slots())?))
}

/// Parent level rank and son slot of the rank-r vertex at depth d ≥ 1.
/// Level ranks compose as rank(son) = pair(rank(parent), slot), except at
/// depth 1 where the rank is the slot itself.
fn split_rank(d: u64, r: u64) -> (u64, u64) {
    if d == 1 {
        (0, r)
    } else {
        unpair(r)
    }
}

fn occurrences_below(st: &MemoState, d: u64, m: u64, upto: u64) -> u64 {
    st.occurrences
        .get(&(d, m))
        .map(|v| v.partition_point(|&x| x < upto) as u64)
        .unwrap_or(0)
}
