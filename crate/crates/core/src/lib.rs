//! hp-adaptive sparse grid interpolation on hierarchical knot trees.

pub mod basis;
pub mod bench;
pub mod domain;
pub mod experiment;
pub mod grid;
pub mod kink;
pub mod knot;
pub mod refine;

pub use basis::{BasisError, BasisSpec1D, BasisSpecNd};
pub use bench::{ErrorReport, FunctionKind, TestFunction};
pub use domain::{Domain, DomainError};
pub use grid::{GridDump, GridError, GridNode, NodeRecord, SparseGrid};
pub use kink::{JumpEstimate, KinkError, Stencil, StencilVariant};
pub use knot::{Knot1D, KnotError, MultiKnot, Support1D, MAX_LEVEL};
pub use refine::{build, build_serial, BuildReport, RefineConfig, RefineError, Strategy};
