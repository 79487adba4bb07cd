//! Blue-noise point sampling of triangle meshes driven by optimal transport.
//!
//! The crate is split along the sampling pipeline:
//!
//! * [`geometry`]: triangles, meshes, canonicalization to the unit square and
//!   the square/triangle parametrizations.
//! * [`measures`]: discrete measures and exact grid quadrature of a triangle.
//! * [`ot`]: log-domain Sinkhorn, exact assignment, power diagrams, the
//!   semi-discrete dual solver and the capacity-constrained Lloyd oracle.
//! * [`model`]: the small feed-forward sampler network, its loss, gradients,
//!   optimizer, dataset generation and weight files.
//! * [`sampler`]: area-proportional budget allocation and per-face dispatch
//!   to the uniform, oracle and learned back-ends.
//! * [`metrics`]: Chamfer, EMD, Hausdorff, F-score and normal consistency on
//!   top of an exact k-d tree.

pub mod error;
pub mod geometry;
pub mod measures;
pub mod metrics;
pub mod model;
pub mod ot;
pub mod rng;
pub mod sampler;

pub use error::{Error, Result};
pub use geometry::{CanonicalTriangle, Mesh, SimilarityTransform, Triangle, Vec2, Vec3};
pub use measures::DiscreteMeasure;
pub use metrics::{MetricReport, NNIndex};
pub use model::{MlpParams, TrainConfig, TrainingExample};
pub use sampler::{PointCloud, SamplerMethod};
