//! Unit quaternions for 3-D rotations.

use crate::real::{real, Real};

use super::vec::Vec3;

/// Unit quaternion `(w, x, y, z)` representing a rotation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quat<T> {
    pub w: T,
    pub x: T,
    pub y: T,
    pub z: T,
}

impl<T: Real> Default for Quat<T> {
    fn default() -> Self {
        Self::identity()
    }
}

impl<T: Real> Quat<T> {
    pub const fn new(w: T, x: T, y: T, z: T) -> Self {
        Self { w, x, y, z }
    }

    pub fn identity() -> Self {
        Self::new(T::one(), T::zero(), T::zero(), T::zero())
    }

    /// Rotation of `angle` radians about a unit `axis`.
    pub fn from_axis_angle(axis: Vec3<T>, angle: T) -> Self {
        let half = angle / real(2.0);
        let s = half.sin();
        Self::new(half.cos(), axis.x * s, axis.y * s, axis.z * s)
    }

    /// Rotation about +z (heading), the common case for ground platforms.
    pub fn from_yaw(yaw: T) -> Self {
        Self::from_axis_angle(Vec3::new(T::zero(), T::zero(), T::one()), yaw)
    }

    pub fn norm(self) -> T {
        (self.w * self.w + self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    pub fn is_unit(self) -> bool {
        (self.norm() - T::one()).abs() <= real(1e-9)
    }

    pub fn normalized(self) -> Self {
        let n = self.norm();
        Self::new(self.w / n, self.x / n, self.y / n, self.z / n)
    }

    pub fn conjugate(self) -> Self {
        Self::new(self.w, -self.x, -self.y, -self.z)
    }

    /// Hamilton product; `a * b` applies `b` first, then `a`.
    pub fn mul(self, rhs: Self) -> Self {
        Self::new(
            self.w * rhs.w - self.x * rhs.x - self.y * rhs.y - self.z * rhs.z,
            self.w * rhs.x + self.x * rhs.w + self.y * rhs.z - self.z * rhs.y,
            self.w * rhs.y - self.x * rhs.z + self.y * rhs.w + self.z * rhs.x,
            self.w * rhs.z + self.x * rhs.y - self.y * rhs.x + self.z * rhs.w,
        )
    }

    /// Rotates a vector: `q v q*`.
    pub fn rotate(self, v: Vec3<T>) -> Vec3<T> {
        let u = Vec3::new(self.x, self.y, self.z);
        let two = real::<T>(2.0);
        let t = u.cross(v) * two;
        v + t * self.w + u.cross(t)
    }

    pub fn dot(self, rhs: Self) -> T {
        self.w * rhs.w + self.x * rhs.x + self.y * rhs.y + self.z * rhs.z
    }

    /// Spherical linear interpolation from `self` (u=0) to `rhs` (u=1),
    /// taking the shorter arc. Endpoints are returned exactly.
    pub fn slerp(self, rhs: Self, u: T) -> Self {
        if u == T::zero() {
            return self;
        }
        if u == T::one() {
            return rhs;
        }
        let mut cos_half = self.dot(rhs);
        let mut end = rhs;
        if cos_half < T::zero() {
            cos_half = -cos_half;
            end = Self::new(-rhs.w, -rhs.x, -rhs.y, -rhs.z);
        }
        if cos_half > real(1.0 - 1e-12) {
            // Nearly identical rotations: linear blend avoids 0/0.
            return Self::new(
                self.w + (end.w - self.w) * u,
                self.x + (end.x - self.x) * u,
                self.y + (end.y - self.y) * u,
                self.z + (end.z - self.z) * u,
            )
            .normalized();
        }
        let half = cos_half.min(T::one()).acos();
        let sin_half = half.sin();
        let a = ((T::one() - u) * half).sin() / sin_half;
        let b = (u * half).sin() / sin_half;
        Self::new(
            self.w * a + end.w * b,
            self.x * a + end.x * b,
            self.y * a + end.y * b,
            self.z * a + end.z * b,
        )
    }

    /// Rotation vector (axis * angle) of the shortest rotation, radians.
    pub fn to_rotation_vector(self) -> Vec3<T> {
        let q = if self.w < T::zero() {
            Self::new(-self.w, -self.x, -self.y, -self.z)
        } else {
            self
        };
        let v = Vec3::new(q.x, q.y, q.z);
        let sin_half = v.norm();
        if sin_half < real(1e-12) {
            return v * real(2.0);
        }
        let angle = real::<T>(2.0) * sin_half.min(T::one()).asin();
        v * (angle / sin_half)
    }
}

impl<T: Real> std::ops::Mul for Quat<T> {
    type Output = Self;

    fn mul(self, rhs: Self) -> Self {
        Quat::mul(self, rhs)
    }
}
