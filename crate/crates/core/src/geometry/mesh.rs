//! Indexed triangle meshes and ray-triangle intersection.

use thiserror::Error;

use crate::real::{real, Real};

use super::vec::Vec3;

/// Hits closer than this along the ray are ignored so that rays spawned on
/// a surface do not re-hit it.
pub const SELF_HIT_EPS: f64 = 1e-6;

/// Minimum triangle area; smaller triangles are rejected as degenerate.
pub const MIN_TRIANGLE_AREA: f64 = 1e-12;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MeshError {
    #[error("triangle {0} references vertex {1} out of range")]
    IndexOutOfRange(usize, u32),
    #[error("triangle {0} is degenerate (area <= 1e-12 m^2)")]
    DegenerateTriangle(usize),
    #[error("triangle/object id lists have mismatched lengths")]
    ObjectIdMismatch,
}

/// Indexed triangle mesh with a per-triangle object id.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TriangleMesh<T> {
    pub vertices: Vec<Vec3<T>>,
    pub triangles: Vec<[u32; 3]>,
    pub object_ids: Vec<u32>,
}

impl<T: Real> TriangleMesh<T> {
    pub fn new(
        vertices: Vec<Vec3<T>>,
        triangles: Vec<[u32; 3]>,
        object_ids: Vec<u32>,
    ) -> Result<Self, MeshError> {
        let mesh = Self {
            vertices,
            triangles,
            object_ids,
        };
        mesh.validate()?;
        Ok(mesh)
    }

    pub fn validate(&self) -> Result<(), MeshError> {
        if self.object_ids.len() != self.triangles.len() {
            return Err(MeshError::ObjectIdMismatch);
        }
        for (i, tri) in self.triangles.iter().enumerate() {
            for &v in tri {
                if v as usize >= self.vertices.len() {
                    return Err(MeshError::IndexOutOfRange(i, v));
                }
            }
            if self.triangle_area(i) <= real(MIN_TRIANGLE_AREA) {
                return Err(MeshError::DegenerateTriangle(i));
            }
        }
        Ok(())
    }

    pub fn triangle_vertices(&self, index: usize) -> [Vec3<T>; 3] {
        let [a, b, c] = self.triangles[index];
        [
            self.vertices[a as usize],
            self.vertices[b as usize],
            self.vertices[c as usize],
        ]
    }

    pub fn triangle_area(&self, index: usize) -> T {
        let [a, b, c] = self.triangle_vertices(index);
        (b - a).cross(c - a).norm() / real(2.0)
    }

    /// Unit normal following the right-hand winding rule.
    pub fn triangle_normal(&self, index: usize) -> Vec3<T> {
        let [a, b, c] = self.triangle_vertices(index);
        (b - a).cross(c - a).normalized()
    }

    pub fn total_area(&self) -> T {
        (0..self.triangles.len()).fold(T::zero(), |acc, i| acc + self.triangle_area(i))
    }

    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }
}

/// Half-open ray with a valid parameter window `[t_min, t_max]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ray<T> {
    pub origin: Vec3<T>,
    pub direction: Vec3<T>,
    pub t_min: T,
    pub t_max: T,
}

impl<T: Real> Ray<T> {
    pub fn new(origin: Vec3<T>, direction: Vec3<T>, t_min: T, t_max: T) -> Self {
        debug_assert!(direction.is_unit());
        debug_assert!(t_min >= T::zero() && t_max > t_min);
        Self {
            origin,
            direction,
            t_min,
            t_max,
        }
    }

    pub fn at(&self, t: T) -> Vec3<T> {
        self.origin + self.direction * t
    }
}

/// Result of a ray-mesh query.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hit<T> {
    pub t: T,
    pub point: Vec3<T>,
    pub triangle: usize,
    pub object_id: u32,
    pub normal: Vec3<T>,
}

/// Ray-triangle intersection (Moller-Trumbore with a barycentric epsilon).
/// Returns the ray parameter `t`, or `None` when the ray misses. Hits with
/// `t < max(t_min, SELF_HIT_EPS)` are rejected.
pub fn ray_triangle<T: Real>(ray: &Ray<T>, a: Vec3<T>, b: Vec3<T>, c: Vec3<T>) -> Option<T> {
    let eps: T = real(1e-12);
    let edge1 = b - a;
    let edge2 = c - a;
    let pvec = ray.direction.cross(edge2);
    let det = edge1.dot(pvec);
    if det.abs() < eps {
        return None;
    }
    let inv_det = T::one() / det;
    let tvec = ray.origin - a;
    let u = tvec.dot(pvec) * inv_det;
    let bary_eps: T = real(1e-9);
    if u < -bary_eps || u > T::one() + bary_eps {
        return None;
    }
    let qvec = tvec.cross(edge1);
    let v = ray.direction.dot(qvec) * inv_det;
    if v < -bary_eps || u + v > T::one() + bary_eps {
        return None;
    }
    let t = edge2.dot(qvec) * inv_det;
    let t_floor = ray.t_min.max(real(SELF_HIT_EPS));
    let t_eps: T = real(1e-9);
    if t < t_floor - t_eps || t > ray.t_max + t_eps {
        return None;
    }
    Some(t)
}

/// Exhaustive nearest-hit scan over every triangle. Ties on `t` resolve to
/// the lowest triangle index; this is the reference the BVH must match.
pub fn first_hit_scan<T: Real>(
    mesh: &TriangleMesh<T>,
    ray: &Ray<T>,
    exclude: &[usize],
) -> Option<Hit<T>> {
    let mut best: Option<(T, usize)> = None;
    for i in 0..mesh.triangles.len() {
        if exclude.contains(&i) {
            continue;
        }
        let [a, b, c] = mesh.triangle_vertices(i);
        if let Some(t) = ray_triangle(ray, a, b, c) {
            let better = match best {
                None => true,
                Some((bt, bi)) => t < bt || (t == bt && i < bi),
            };
            if better {
                best = Some((t, i));
            }
        }
    }
    best.map(|(t, i)| Hit {
        t,
        point: ray.at(t),
        triangle: i,
        object_id: mesh.object_ids[i],
        normal: mesh.triangle_normal(i),
    })
}
