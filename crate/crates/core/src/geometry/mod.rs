//! Immersed surface geometry: triangulated leaflets, exact signed distance,
//! smeared delta, extended normal and curvature, closest-point pullback.

pub mod bvh;
pub mod closest;
pub mod levelset;
pub mod shapes;
pub mod surface;
pub mod surface_io;
pub mod valve;

pub use levelset::{
    build_level_set, normal_and_curvature, reference_curvature, side_sign, smeared_delta, LevelSet, LevelSetPoint,
};
pub use surface::{ImmersedSurface, Pullback, SurfaceProjection};
pub use valve::{ChannelValve, RootValve};
