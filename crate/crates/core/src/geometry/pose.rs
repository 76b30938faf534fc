//! Rigid transforms (translation + rotation) and velocity twists.

use crate::real::Real;

use super::quat::Quat;
use super::vec::Vec3;

/// Rigid transform: rotate then translate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose<T> {
    pub translation: Vec3<T>,
    pub rotation: Quat<T>,
}

impl<T: Real> Default for Pose<T> {
    fn default() -> Self {
        Self::identity()
    }
}

impl<T: Real> Pose<T> {
    pub fn new(translation: Vec3<T>, rotation: Quat<T>) -> Self {
        Self {
            translation,
            rotation,
        }
    }

    pub fn identity() -> Self {
        Self::new(Vec3::zero(), Quat::identity())
    }

    pub fn from_translation(translation: Vec3<T>) -> Self {
        Self::new(translation, Quat::identity())
    }

    /// Maps a point from the pose's local frame into the parent frame.
    pub fn apply(&self, point: Vec3<T>) -> Vec3<T> {
        self.rotation.rotate(point) + self.translation
    }

    /// Rotates a direction without translating it.
    pub fn apply_direction(&self, dir: Vec3<T>) -> Vec3<T> {
        self.rotation.rotate(dir)
    }

    /// `self` then `rhs` in local coordinates: `(a.compose(b)).apply(p) ==
    /// a.apply(b.apply(p))`.
    pub fn compose(&self, rhs: &Self) -> Self {
        Self::new(self.apply(rhs.translation), self.rotation.mul(rhs.rotation))
    }

    pub fn inverse(&self) -> Self {
        let inv_rot = self.rotation.conjugate();
        Self::new(-inv_rot.rotate(self.translation), inv_rot)
    }

    /// Interpolates between two poses: translation linearly, rotation
    /// spherically. Endpoints are returned exactly.
    pub fn interpolate(&self, rhs: &Self, u: T) -> Self {
        if u == T::zero() {
            return *self;
        }
        if u == T::one() {
            return *rhs;
        }
        let t = self.translation + (rhs.translation - self.translation) * u;
        Self::new(t, self.rotation.slerp(rhs.rotation, u))
    }
}

/// Linear and angular velocity, world frame, m/s and rad/s.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Twist<T> {
    pub linear: Vec3<T>,
    pub angular: Vec3<T>,
}

impl<T: Real> Twist<T> {
    pub fn zero() -> Self {
        Self {
            linear: Vec3::zero(),
            angular: Vec3::zero(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.linear.is_finite() && self.angular.is_finite()
    }
}
