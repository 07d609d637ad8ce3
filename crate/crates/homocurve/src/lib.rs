//! Elastic shape analysis of curves in homogeneous spaces M = G/K,
//! specialized to the sphere S^n = SO(n+1)/SO(n).
//!
//! Curves on the sphere are identified with their horizontal lifts in
//! SO(n+1) and represented by the square-root-velocity transform
//! Q(α) = (α(0), q). Geodesic distances and geodesics are computed in
//! four quotient spaces (parametrized, modulo reparametrization, modulo
//! rigid motion, modulo both), and ensembles of curves support Karcher
//! means, tangent PCA, and classical MDS.
//!
//! The numerics are generic over the scalar type ([`scalar::Scalar`],
//! i.e. f32 or f64); the aliases below pin the default f64 instantiation.

pub mod alignment;
pub mod data_io;
pub mod homogeneous;
pub mod lie_group;
pub mod scalar;
pub mod srv_core;
pub mod statistics;
pub mod synthetic;

/// Default scalar for the concrete aliases and the CLI.
pub type Real = f64;

pub type RotationMatrix = lie_group::RotationMatrix<Real>;
pub type AlgebraElement = lie_group::AlgebraElement<Real>;
pub type SubalgebraBasis = lie_group::SubalgebraBasis<Real>;
pub type GroupCurve = srv_core::GroupCurve<Real>;
pub type SrvPair = srv_core::SrvPair<Real>;
pub type SphereCurve = homogeneous::SphereCurve<Real>;
pub type OptimizerConfig = homogeneous::OptimizerConfig<Real>;
pub type Reparametrization = alignment::Reparametrization<Real>;
pub type AlignmentResult = alignment::AlignmentResult<Real>;
pub type Ensemble = statistics::Ensemble<Real>;
pub type PcaResult = statistics::PcaResult<Real>;
