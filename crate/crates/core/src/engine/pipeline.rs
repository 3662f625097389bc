//! Two-stage factorization of the host tree by an arbitrary family.
//!
//! Input factors are dovetailed into groups: factor f = pair(m, r) belongs
//! to group m as its r-th member. Stage 1 factorizes the host tree into ω
//! spanning forests whose components are ω-regular trees. Inside the
//! stage-1 factor m, every component is re-addressed canonically via
//! [`Engine::component_iso`] and factorized by the group-m members; each
//! member contributes exactly one component batch per stage-1 component
//! (batch c of factor pair(m, r) lands in component c), so every input
//! component is placed exactly once end to end.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use crate::enumeration::{pair, unpair};
use crate::error::{Error, Result};
use crate::forest::{builtin_family, Family, FamilySpec};
use crate::tree::{ball, TreeAddress};

use super::{BallEdge, BallMaterialization, BallVertex, EdgeAssignment, Engine, EngineConfig};

/// Composed two-stage engine; exposes the same query surface as [`Engine`]
/// with factor indices ranging over the input family.
pub struct Pipeline {
    family: Family,
    stage1: Engine,
    config: EngineConfig,
    inner: Mutex<HashMap<(u64, u64), Arc<Engine>>>,
}

impl Pipeline {
    pub fn new(spec: FamilySpec) -> Result<Pipeline> {
        Pipeline::with_config(spec, EngineConfig::default())
    }

    pub fn with_config(spec: FamilySpec, config: EngineConfig) -> Result<Pipeline> {
        let family = Family::new(spec)?;
        let host = Family::new(builtin_family("omega-regular").expect("builtin"))
            .expect("the omega-regular family is valid");
        Ok(Pipeline {
            family,
            stage1: Engine::with_config(host, config),
            config,
            inner: Mutex::new(HashMap::new()),
        })
    }

    pub fn family(&self) -> &Family {
        &self.family
    }

    /// The outer spanning-forest engine.
    pub fn stage1(&self) -> &Engine {
        &self.stage1
    }

    fn inner_engine(&self, group: u64, component: u64) -> Arc<Engine> {
        let mut map = self.inner.lock().expect("pipeline lock");
        map.entry((group, component))
            .or_insert_with(|| {
                Arc::new(Engine::batch_stage(
                    self.family.clone(),
                    group,
                    component,
                    self.config,
                ))
            })
            .clone()
    }

    /// Rewrites an inner-stage index (batch view of factor f in stage-1
    /// component c) as an index of the input factor f.
    fn translate(&self, inner: &Engine, f: u64, r: u64, c: u64, iv: u64) -> Result<u64> {
        let (pv, local) = inner.factor_view(r)?.decode(iv)?;
        let backing_position = pair(c, pv)?;
        self.family.factor(f).encode(backing_position, local)
    }

    /// Forest index of the factor-f label of `w` under the composition.
    pub fn label_of(&self, w: &TreeAddress, f: u64) -> Result<u64> {
        let (m, r) = unpair(f);
        let (c, a) = self.stage1.component_iso(m, w)?;
        let inner = self.inner_engine(m, c);
        let iv = inner.label_of(&a, r)?;
        self.translate(&inner, f, r, c, iv)
    }

    /// Unique composed membership of the edge from `w` to its `slot`-th son.
    pub fn factor_of_edge(&self, w: &TreeAddress, slot: u64) -> Result<EdgeAssignment> {
        let m = self.stage1.factor_of_edge(w, slot)?.factor;
        let child = w.son(slot);
        let (c, a_child) = self.stage1.component_iso(m, &child)?;
        let a_parent = a_child
            .parent()
            .expect("a claimed edge maps inside the component, below its root");
        let k = a_child.last_slot().expect("non-root canonical address");
        let inner = self.inner_engine(m, c);
        let e = inner.factor_of_edge(&a_parent, k)?;
        let f = pair(m, e.factor)?;
        let i = self.translate(&inner, f, e.factor, c, e.i)?;
        let j = self.translate(&inner, f, e.factor, c, e.j)?;
        Ok(EdgeAssignment {
            factor: f,
            i: i.min(j),
            j: i.max(j),
        })
    }

    /// The unique address whose factor-f label is `i`.
    pub fn vertex_of(&self, f: u64, i: u64) -> Result<TreeAddress> {
        let (m, r) = unpair(f);
        let (backing_position, local) = self.family.factor(f).decode(i)?;
        let (c, pv) = unpair(backing_position);
        let inner = self.inner_engine(m, c);
        let iv = inner.factor_view(r)?.encode(pv, local)?;
        let a = inner.vertex_of(r, iv)?;
        self.stage1.component_vertex(m, c, &a)
    }

    /// Same window shape as [`Engine::materialize_ball`], with composed
    /// labels and assignments.
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
        let mut vertices = Vec::new();
        let mut edges = Vec::new();
        for address in ball(radius, sons) {
            let mut labels = Vec::with_capacity(factors as usize);
            for f in 0..factors {
                labels.push(self.label_of(&address, f)?);
            }
            if let (Some(parent), Some(slot)) = (address.parent(), address.last_slot()) {
                let assignment = self.factor_of_edge(&parent, slot)?;
                edges.push(BallEdge {
                    parent,
                    slot,
                    assignment,
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
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pipeline(name: &str) -> Pipeline {
        Pipeline::new(builtin_family(name).unwrap()).unwrap()
    }

    #[test]
    fn composed_root_labels_are_component_roots() {
        let p = pipeline("mixed-finite");
        for f in 0..6u64 {
            let i = p.label_of(&TreeAddress::root(), f).unwrap();
            assert_eq!(
                p.vertex_of(f, i).unwrap(),
                TreeAddress::root(),
                "composed labels invert at the root, f={f}"
            );
        }
    }

    #[test]
    fn composed_labels_invert_on_a_window() {
        let p = pipeline("mixed-finite");
        for w in ball(2, 3) {
            for f in 0..4u64 {
                let i = p.label_of(&w, f).unwrap();
                assert_eq!(p.vertex_of(f, i).unwrap(), w, "w={w} f={f}");
            }
        }
    }

    #[test]
    fn composed_edges_are_unique_and_adjacent() {
        let p = pipeline("star-mix");
        let window = p.materialize_ball(2, 3, 4).unwrap();
        assert_eq!(window.edges.len(), 12);
        for edge in &window.edges {
            let a = edge.assignment;
            assert!(a.i < a.j);
            // Endpoints really are adjacent in the input factor.
            assert!(p.family().factor(a.factor).adjacent(a.i, a.j).unwrap());
            // Re-query is identical.
            assert_eq!(p.factor_of_edge(&edge.parent, edge.slot).unwrap(), a);
            // The claimed endpoints carry the claimed labels.
            let child = edge.parent.son(edge.slot);
            let li = p.label_of(&edge.parent, a.factor).unwrap();
            let lj = p.label_of(&child, a.factor).unwrap();
            assert_eq!(
                (li.min(lj), li.max(lj)),
                (a.i, a.j),
                "assignment endpoints match the endpoint labels"
            );
        }
    }

    #[test]
    fn stage_one_is_spanning_on_windows() {
        let p = pipeline("mixed-finite");
        for w in ball(2, 3) {
            for m in 0..4u64 {
                let i = p.stage1().label_of(&w, m).unwrap();
                assert_eq!(p.stage1().vertex_of(m, i).unwrap(), w);
            }
        }
    }

    #[test]
    fn pipeline_exports_are_deterministic() {
        let make = || {
            let p = pipeline("star-mix");
            crate::engine::export::ball_to_json(&p.materialize_ball(2, 2, 3).unwrap())
        };
        assert_eq!(make(), make());
    }
}
