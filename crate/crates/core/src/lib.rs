//! Knowledge-grounded generation and attention-guided evolution of
//! safety-critical driving scenarios, with a 2D closed-loop replay and a
//! metric suite.
//!
//! The numeric core (geometry, trajectories, relevance, loss and projection)
//! is generic over the scalar type; the aliases below name the two concrete
//! instantiations.

pub mod geom;
pub mod graph;
pub mod harness;
pub mod knowledge;
pub mod metrics;
pub mod model;
pub mod perturb;
pub mod roads;
pub mod scalar;
pub mod sim;

pub type Vec2F32 = geom::Vec2<f32>;
pub type Vec2F64 = geom::Vec2<f64>;
pub type PolylineF32 = geom::Polyline<f32>;
pub type PolylineF64 = geom::Polyline<f64>;
pub type OrientedRectF32 = geom::OrientedRect<f32>;
pub type OrientedRectF64 = geom::OrientedRect<f64>;
pub type TrajectoryF32 = model::Trajectory<f32>;
pub type TrajectoryF64 = model::Trajectory<f64>;
pub type RelevanceMatrixF32 = graph::RelevanceMatrix<f32>;
pub type RelevanceMatrixF64 = graph::RelevanceMatrix<f64>;
pub type LossWeightsF32 = perturb::LossWeights<f32>;
pub type LossWeightsF64 = perturb::LossWeights<f64>;
pub type FeasibilityConstraintsF32 = perturb::FeasibilityConstraints<f32>;
pub type FeasibilityConstraintsF64 = perturb::FeasibilityConstraints<f64>;
pub type OptimizerConfigF32 = perturb::OptimizerConfig<f32>;
pub type OptimizerConfigF64 = perturb::OptimizerConfig<f64>;
