//! vesselflow — iterative tracking of vessel-like networks in 3D scalar
//! volumes from a single seed point.
//!
//! The pipeline, cone by cone:
//!
//! 1. **sampling** — place a conical cloud of sample points on concentric
//!    spherical calottes at the current seed, along the local vessel axis.
//! 2. **vesselness** — fit a two-cylinder Gaussian contrast model at each
//!    promising sample point with differential evolution and keep the
//!    plausible vessel detections.
//! 3. **flowgraph** — arrange detections in a layered split-node graph and
//!    pull out branches one unit of flow at a time (an exact DAG shortest
//!    path per branch), with toll penalties steering later branches away
//!    from earlier ones and claimed detections acting as bifurcation
//!    entrances.
//! 4. **network** — validate branches against the growing network
//!    (duplicate and loop rejection) and derive the next seeds from branch
//!    endings.
//!
//! The `synth` module generates phantoms with analytic ground truth and
//! `metrics` scores segmentations (Dice, RMS and Hausdorff surface
//! distances). All numeric code is generic over the scalar type through
//! [`scalar::Real`]; the aliases below fix `f64`, which is what the CLI and
//! the file formats use.

pub mod de;
pub mod error;
pub mod flowgraph;
pub mod io;
pub mod metrics;
pub mod network;
pub mod sampling;
pub mod scalar;
pub mod synth;
pub mod tracker;
pub mod vec3;
pub mod vesselness;
pub mod volume;

pub use error::{Error, Result};
pub use scalar::Real;

/// Double-precision aliases for the concrete types most callers use.
pub type Vec3f = vec3::Vec3<f64>;
pub type Volume64 = volume::Volume<f64>;
pub type ConeParams64 = sampling::ConeParams<f64>;
pub type DEParams64 = vesselness::DEParams<f64>;
pub type Detection64 = vesselness::Detection<f64>;
pub type GraphParams64 = flowgraph::GraphParams<f64>;
pub type VesselNetwork64 = network::VesselNetwork<f64>;
pub type TrackerConfig64 = tracker::TrackerConfig<f64>;
pub type PhantomSpec64 = synth::PhantomSpec<f64>;
