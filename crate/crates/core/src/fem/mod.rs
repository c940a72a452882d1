//! Finite-element core: meshes, Lagrange spaces, quadrature, metric tensors
//! and the sparse linear algebra used by the fluid solver.

pub mod basis;
pub mod krylov;
pub mod mesh;
pub mod mesh_io;
pub mod quadrature;
pub mod space;
pub mod sparse;

pub use basis::LagrangeElement;
pub use krylov::{solve, SolveStats, SolverOptions};
pub use mesh::{build_structured_mesh, build_structured_mesh_at, BoundaryFacet, BoundaryTag, BoxTags, Mesh};
pub use quadrature::QuadratureRule;
pub use space::{compute_metric_tensors, FeSpace, FeValues, Field, MetricTensors, ScalarEval, ShapeEval};
pub use sparse::{CsrMatrix, LocalContribution, SparsityPattern};
