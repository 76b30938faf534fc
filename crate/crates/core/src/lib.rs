//! Deterministic multimodal simulation engine for integrated sensing and
//! communication studies: scene construction, platform mobility with
//! synthetic sensors, specular ray-traced radio propagation, OFDM link
//! evaluation, and channel-knowledge-map generation, all coordinated over a
//! shared-clock publish/subscribe bus with bit-exact record and replay.

pub mod beampred;
pub mod bus;
pub mod ckm;
pub mod config;
pub mod geometry;
pub mod linksys;
pub mod mobility;
pub mod msgs;
pub mod prng;
pub mod raytracer;
pub mod real;
pub mod scene;
pub mod session;
pub mod timebase;
pub mod wire;

pub use real::Real;

// Concrete double-precision aliases for everyday engine use. The geometry
// core stays generic over the scalar so callers can pick `f32` when memory
// dominates.
pub type Vec3 = geometry::Vec3<f64>;
pub type Quat = geometry::Quat<f64>;
pub type Pose = geometry::Pose<f64>;
pub type Twist = geometry::Twist<f64>;
pub type TriangleMesh = geometry::TriangleMesh<f64>;
pub type Ray = geometry::Ray<f64>;
pub type Hit = geometry::Hit<f64>;
pub type Aabb = geometry::Aabb<f64>;
pub type Bvh = geometry::Bvh<f64>;

/// Speed of light in vacuum (m/s).
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Vacuum permittivity (F/m).
pub const VACUUM_PERMITTIVITY: f64 = 8.854_187_8128e-12;

/// Boltzmann constant (J/K).
pub const BOLTZMANN: f64 = 1.380_649e-23;

/// Standard gravity (m/s^2), used by the inertial sensor model.
pub const STANDARD_GRAVITY: f64 = 9.806_65;
