//! Byte-stable exports of materialized windows: JSON for machine
//! consumers, DOT for graph viewers, and mask restriction for packings.

use crate::error::Result;
use crate::forest::{Family, PackMask};

use super::BallMaterialization;

/// Edge colors cycle through this palette by factor index.
const PALETTE: [&str; 10] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
    "#bcbd22", "#17becf",
];

/// Pretty JSON with a trailing newline; identical inputs yield identical
/// bytes (struct field order is fixed, all collections are ordered).
pub fn ball_to_json(ball: &BallMaterialization) -> String {
    let mut text = serde_json::to_string_pretty(ball).expect("window serialization");
    text.push('\n');
    text
}

/// One undirected DOT graph; nodes are addresses, each edge carries its
/// factor membership under the attribute keys factor, i, j.
pub fn ball_to_dot(ball: &BallMaterialization) -> String {
    let mut out = String::from("graph window {\n");
    for v in &ball.vertices {
        let labels: Vec<String> = v.labels.iter().map(u64::to_string).collect();
        out.push_str(&format!(
            "  \"{}\" [labels=\"{}\"];\n",
            v.address,
            labels.join(",")
        ));
    }
    for e in &ball.edges {
        let child = e.parent.son(e.slot);
        let a = &e.assignment;
        out.push_str(&format!(
            "  \"{}\" -- \"{}\" [factor={}, i={}, j={}, color=\"{}\"];\n",
            e.parent,
            child,
            a.factor,
            a.i,
            a.j,
            PALETTE[(a.factor % PALETTE.len() as u64) as usize]
        ));
    }
    out.push_str("}\n");
    out
}

/// The packing view of a window: keeps exactly the edges whose assignment
/// lands in a masked factor and component. Labels stay untouched; a packing
/// restricts the edge decomposition, not the labeling.
pub fn restrict_ball(
    family: &Family,
    ball: &BallMaterialization,
    mask: &PackMask,
) -> Result<BallMaterialization> {
    let mut restricted = ball.clone();
    let mut kept = Vec::with_capacity(restricted.edges.len());
    for edge in restricted.edges.drain(..) {
        let a = edge.assignment;
        let (position, _) = family.factor(a.factor).decode(a.i)?;
        if mask.admits(a.factor, position) {
            kept.push(edge);
        }
    }
    restricted.edges = kept;
    Ok(restricted)
}
