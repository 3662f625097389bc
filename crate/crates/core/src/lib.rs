//! Lazy factorizations of the infinitely branching rooted tree into
//! prescribed forest families, with exact global vertex enumeration, a
//! finite-truncation scheduler simulator, and independent verification.

pub mod count;
pub mod engine;
pub mod enumeration;
pub mod error;
pub mod forest;
pub mod oracle;
pub mod sim;
pub mod tree;

pub use count::Count;
pub use engine::pipeline::Pipeline;
pub use engine::{BallMaterialization, Demand, EdgeAssignment, Engine, EngineConfig, LabelView};
pub use error::{Error, Result};
pub use forest::{
    builtin_family, lambda_family, normalize, pack_family, validate, ComponentBatch, ComponentRef,
    Factor, FactorTemplate, Family, FamilySpec, ForestVertex, PackMask, ShapeSpec,
    ValidationReport, Violation,
};
pub use oracle::{RuleOracle, Verdict, VerificationReport};
pub use sim::{
    Action, CReport, ClassSpec, FactorGraph, Sigma, SigmaProgress, SimBounds, SimConfig, SimStep,
    SimTrace,
};
pub use tree::TreeAddress;
