//! Numerical laboratory for billiards in smooth planar domains.
//!
//! The crate is organized bottom-up: [`geom`] holds plane primitives,
//! [`boundary`] turns shape descriptors into arc-length parametrized curves,
//! [`dynamics`] implements the billiard map and its differential, [`orbits`]
//! finds and classifies period-3 orbits, and [`fractal`] estimates dimension
//! and tangent structure of planar point clouds.

pub mod boundary;
pub mod dynamics;
pub mod fractal;
pub mod geom;
pub mod orbits;

pub use boundary::{BoundaryCurve, BoundaryError, ShapeDescriptor};
pub use dynamics::{
    differential, iterate, measure_defect, shoot, DynamicsError, Jacobian2, PhasePoint,
    StepFailure, GRAZING_TOL,
};
pub use fractal::{
    angular_density, asymptotic_ray, box_dimension, cantor_dust_fixture, density, derivative_along,
    derivative_along_map, hausdorff_premeasure, segment_fixture, tangent_test, DimensionEstimate,
    FractalError, PointCloud, TangentParams, TangentReport,
};
pub use geom::Vec2;
pub use orbits::{
    dt3_defect, extended_length, fermat_defect, fermat_defect_at, find_period3, perimeter,
    perimeter_gradient, sample_p3, wojtkowski_residual, wojtkowski_residual_at, Classification,
    OrbitError, OrbitTriple,
};
