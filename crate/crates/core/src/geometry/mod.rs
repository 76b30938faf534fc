//! Scalar-generic geometric primitives: vectors, rotations, poses, meshes,
//! and ray acceleration structures.

pub mod bvh;
pub mod mesh;
pub mod pose;
pub mod quat;
pub mod vec;

pub use bvh::{Aabb, Bvh};
pub use mesh::{first_hit_scan, ray_triangle, Hit, MeshError, Ray, TriangleMesh};
pub use pose::{Pose, Twist};
pub use quat::Quat;
pub use vec::{mirror_across_plane, NonUnitNormal, Vec3};
