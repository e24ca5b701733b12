//! Hierarchical models as directed acyclic graphs.

mod density;
mod graph;
pub mod spec;

pub use graph::{ModelGraph, NodeId, UpdateScope};
pub use spec::{Family, ModelSpec, NodeKind, NodeSpec, OpKind, ParamValue, ValueSpec};
