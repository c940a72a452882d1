//! Heart-valve opening with a lumped valve model: a scalar opening
//! coefficient driven by band integrals of the flow, coupled weakly to
//! penalised incompressible Navier-Stokes on a structured finite element
//! mesh. The leaflets enter the flow only through a level set and its
//! smeared delta.

// Index loops mirror the tensor notation; negated comparisons reject NaN;
// bracketed units such as [Pa] are not links.
#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]
#![allow(rustdoc::broken_intra_doc_links)]

pub mod driver;
pub mod error;
pub mod fem;
pub mod fluid;
pub mod geometry;
pub mod linalg;
pub mod valve;

pub use error::{Error, Result};
