//! 3-D vectors in a right-handed, z-up frame. Units are meters unless the
//! vector is a direction.

use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub, SubAssign};

use crate::real::{real, Real};

/// A 3-D vector or point.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Vec3<T> {
    pub x: T,
    pub y: T,
    pub z: T,
}

impl<T: Real> Vec3<T> {
    pub const fn new(x: T, y: T, z: T) -> Self {
        Self { x, y, z }
    }

    pub fn zero() -> Self {
        Self::new(T::zero(), T::zero(), T::zero())
    }

    pub fn splat(v: T) -> Self {
        Self::new(v, v, v)
    }

    pub fn dot(self, rhs: Self) -> T {
        self.x * rhs.x + self.y * rhs.y + self.z * rhs.z
    }

    pub fn cross(self, rhs: Self) -> Self {
        Self::new(
            self.y * rhs.z - self.z * rhs.y,
            self.z * rhs.x - self.x * rhs.z,
            self.x * rhs.y - self.y * rhs.x,
        )
    }

    pub fn norm_squared(self) -> T {
        self.dot(self)
    }

    pub fn norm(self) -> T {
        self.norm_squared().sqrt()
    }

    /// Returns the unit vector, or `None` when the norm is below `1e-12`.
    pub fn try_normalized(self) -> Option<Self> {
        let n = self.norm();
        if n < real(1e-12) {
            None
        } else {
            Some(self / n)
        }
    }

    pub fn normalized(self) -> Self {
        self.try_normalized().expect("cannot normalize zero vector")
    }

    /// Whether the vector has unit norm within `1e-9`.
    pub fn is_unit(self) -> bool {
        (self.norm() - T::one()).abs() <= real(1e-9)
    }

    pub fn distance(self, rhs: Self) -> T {
        (self - rhs).norm()
    }

    pub fn component(self, axis: usize) -> T {
        match axis {
            0 => self.x,
            1 => self.y,
            _ => self.z,
        }
    }

    pub fn min_by_component(self, rhs: Self) -> Self {
        Self::new(self.x.min(rhs.x), self.y.min(rhs.y), self.z.min(rhs.z))
    }

    pub fn max_by_component(self, rhs: Self) -> Self {
        Self::new(self.x.max(rhs.x), self.y.max(rhs.y), self.z.max(rhs.z))
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }
}

impl<T: Real> Add for Vec3<T> {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        Self::new(self.x + rhs.x, self.y + rhs.y, self.z + rhs.z)
    }
}

impl<T: Real> AddAssign for Vec3<T> {
    fn add_assign(&mut self, rhs: Self) {
        *self = *self + rhs;
    }
}

impl<T: Real> Sub for Vec3<T> {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        Self::new(self.x - rhs.x, self.y - rhs.y, self.z - rhs.z)
    }
}

impl<T: Real> SubAssign for Vec3<T> {
    fn sub_assign(&mut self, rhs: Self) {
        *self = *self - rhs;
    }
}

impl<T: Real> Mul<T> for Vec3<T> {
    type Output = Self;
    fn mul(self, rhs: T) -> Self {
        Self::new(self.x * rhs, self.y * rhs, self.z * rhs)
    }
}

impl<T: Real> Div<T> for Vec3<T> {
    type Output = Self;
    fn div(self, rhs: T) -> Self {
        Self::new(self.x / rhs, self.y / rhs, self.z / rhs)
    }
}

impl<T: Real> Neg for Vec3<T> {
    type Output = Self;
    fn neg(self) -> Self {
        Self::new(-self.x, -self.y, -self.z)
    }
}

/// Mirrors a point across the plane through `plane_point` with unit normal
/// `normal`: `p - 2((p - q) . n) n`. Applying it twice returns the input.
pub fn mirror_across_plane<T: Real>(
    point: Vec3<T>,
    plane_point: Vec3<T>,
    normal: Vec3<T>,
) -> Result<Vec3<T>, NonUnitNormal> {
    if !normal.is_unit() {
        return Err(NonUnitNormal);
    }
    let d = (point - plane_point).dot(normal);
    Ok(point - normal * (d + d))
}

/// The plane normal passed to [`mirror_across_plane`] was not unit length.
#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("plane normal is not unit length")]
pub struct NonUnitNormal;
