//! Platform mobility and synthetic sensing.
//!
//! A [`Trajectory`] is an ordered list of stamped waypoints; between
//! waypoints the translation is piecewise linear (constant velocity per
//! segment) and the rotation is spherically interpolated (constant angular
//! rate per segment). The sensing half ray-casts pinhole depth/semantic
//! images and lidar sweeps against scene geometry and synthesizes GNSS and
//! IMU samples with seeded Gaussian noise.

use thiserror::Error;

use crate::geometry::bvh::ray_mesh_first_hit;
use crate::msgs::{DepthImage, GnssMsg, ImuMsg, PointCloud, SemanticImage, NO_HIT_ID};
use crate::prng::SplitMix64;
use crate::timebase::SimTime;
use crate::{Bvh, Pose, Quat, Ray, TriangleMesh, Twist, Vec3, STANDARD_GRAVITY};

#[derive(Debug, Error, PartialEq)]
pub enum MobilityError {
    #[error("trajectory needs at least one waypoint")]
    Empty,
    #[error("waypoint {index} stamp {stamp} does not increase")]
    NonIncreasingStamp { index: usize, stamp: SimTime },
    #[error("trajectory line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("t={t} outside trajectory span [{first}, {last}]")]
    OutOfSpan {
        t: SimTime,
        first: SimTime,
        last: SimTime,
    },
    #[error("read failed: {0}")]
    Io(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Waypoint {
    pub stamp: SimTime,
    pub pose: Pose,
}

/// Timed pose track for one platform.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub platform: String,
    pub waypoints: Vec<Waypoint>,
}

impl Trajectory {
    pub fn new(platform: &str, waypoints: Vec<Waypoint>) -> Result<Self, MobilityError> {
        if waypoints.is_empty() {
            return Err(MobilityError::Empty);
        }
        for i in 1..waypoints.len() {
            if waypoints[i].stamp <= waypoints[i - 1].stamp {
                return Err(MobilityError::NonIncreasingStamp {
                    index: i,
                    stamp: waypoints[i].stamp,
                });
            }
        }
        Ok(Self {
            platform: platform.to_string(),
            waypoints,
        })
    }

    /// Parses the waypoint file format: one `t x y z qw qx qy qz` per line
    /// (t in seconds), `#` comments and blank lines ignored.
    pub fn parse(text: &str, platform: &str) -> Result<Self, MobilityError> {
        let mut waypoints = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let trimmed = raw.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = trimmed.split_whitespace().collect();
            if fields.len() != 8 {
                return Err(MobilityError::Parse {
                    line,
                    msg: format!("expected 8 fields `t x y z qw qx qy qz`, got {}", fields.len()),
                });
            }
            let mut nums = [0.0f64; 8];
            for (k, f) in fields.iter().enumerate() {
                nums[k] = f.parse().map_err(|_| MobilityError::Parse {
                    line,
                    msg: format!("bad number {f:?}"),
                })?;
            }
            if !nums.iter().all(|v| v.is_finite()) {
                return Err(MobilityError::Parse {
                    line,
                    msg: "non-finite value".into(),
                });
            }
            if nums[0] < 0.0 {
                return Err(MobilityError::Parse {
                    line,
                    msg: format!("negative time {}", nums[0]),
                });
            }
            let q = Quat {
                w: nums[4],
                x: nums[5],
                y: nums[6],
                z: nums[7],
            };
            if q.norm() < 1e-9 {
                return Err(MobilityError::Parse {
                    line,
                    msg: "zero-norm quaternion".into(),
                });
            }
            waypoints.push(Waypoint {
                stamp: SimTime::from_secs_f64(nums[0]),
                pose: Pose {
                    translation: Vec3::new(nums[1], nums[2], nums[3]),
                    rotation: q.normalized(),
                },
            });
        }
        Self::new(platform, waypoints)
    }

    pub fn load(path: &std::path::Path, platform: &str) -> Result<Self, MobilityError> {
        let text =
            std::fs::read_to_string(path).map_err(|e| MobilityError::Io(format!("{path:?}: {e}")))?;
        Self::parse(&text, platform)
    }

    pub fn first_stamp(&self) -> SimTime {
        self.waypoints[0].stamp
    }

    pub fn last_stamp(&self) -> SimTime {
        self.waypoints[self.waypoints.len() - 1].stamp
    }

    /// Pose and world-frame twist at `t`.
    ///
    /// A single-waypoint trajectory is a static platform and answers any
    /// `t`; otherwise `t` must lie within the waypoint span.
    pub fn state_at(&self, t: SimTime) -> Result<(Pose, Twist), MobilityError> {
        if self.waypoints.len() == 1 {
            return Ok((self.waypoints[0].pose, Twist::zero()));
        }
        let (first, last) = (self.first_stamp(), self.last_stamp());
        if t < first || t > last {
            return Err(MobilityError::OutOfSpan { t, first, last });
        }
        // Segment i covers [stamp_i, stamp_{i+1}); the final stamp maps to
        // the last segment so its twist stays defined.
        let seg = match self
            .waypoints
            .binary_search_by(|w| w.stamp.cmp(&t))
        {
            Ok(i) => i.min(self.waypoints.len() - 2),
            Err(i) => i - 1,
        };
        let (a, b) = (&self.waypoints[seg], &self.waypoints[seg + 1]);
        let dt_ns = b.stamp.nanos() - a.stamp.nanos();
        let dt = dt_ns as f64 * 1e-9;
        let frac = (t.nanos() - a.stamp.nanos()) as f64 / dt_ns as f64;
        let pose = Pose::interpolate(&a.pose, &b.pose, frac);
        let linear = (b.pose.translation - a.pose.translation) / dt;
        // World-frame rotation delta over the segment; shortest arc to match
        // the slerp the pose takes.
        let mut dq = b.pose.rotation * a.pose.rotation.conjugate();
        if dq.w < 0.0 {
            dq = Quat {
                w: -dq.w,
                x: -dq.x,
                y: -dq.y,
                z: -dq.z,
            };
        }
        let angular = dq.normalized().to_rotation_vector() / dt;
        Ok((pose, Twist { linear, angular }))
    }

    /// Central-difference linear acceleration at `t` with half-window `h`
    /// seconds, clamped to the trajectory span.
    pub fn acceleration_at(&self, t: SimTime, h: f64) -> Result<Vec3, MobilityError> {
        if self.waypoints.len() == 1 {
            return Ok(Vec3::zero());
        }
        let (first, last) = (self.first_stamp(), self.last_stamp());
        let lo = SimTime::from_secs_f64((t.secs_f64() - h).max(first.secs_f64()));
        let hi = SimTime::from_secs_f64((t.secs_f64() + h).min(last.secs_f64()));
        if hi <= lo {
            return Ok(Vec3::zero());
        }
        let (_, tw_lo) = self.state_at(lo)?;
        let (_, tw_hi) = self.state_at(hi)?;
        Ok((tw_hi.linear - tw_lo.linear) / (hi.secs_f64() - lo.secs_f64()))
    }
}

// ============================================================================
// Sensor models
// ============================================================================

/// Pinhole camera. The camera frame looks along +x; pixel `u` grows toward
/// −y (image right) and `v` toward −z (image down). Pixel centers sit at
/// half-integer coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct CameraIntrinsics {
    pub width: u32,
    pub height: u32,
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub max_range: f64,
}

impl CameraIntrinsics {
    /// Symmetric camera with a given horizontal field of view (degrees).
    pub fn with_fov(width: u32, height: u32, fov_x_deg: f64, max_range: f64) -> Self {
        let fx = width as f64 / (2.0 * (fov_x_deg.to_radians() / 2.0).tan());
        Self {
            width,
            height,
            fx,
            fy: fx,
            cx: width as f64 / 2.0,
            cy: height as f64 / 2.0,
            max_range,
        }
    }

    /// Camera-frame unit ray through pixel (u, v).
    pub fn ray_direction(&self, u: u32, v: u32) -> Vec3 {
        let du = (u as f64 + 0.5 - self.cx) / self.fx;
        let dv = (v as f64 + 0.5 - self.cy) / self.fy;
        Vec3::new(1.0, -du, -dv).normalized()
    }

    /// Projects a camera-frame point to pixel coordinates; None when the
    /// point is behind the camera or lands outside the image.
    pub fn project(&self, p_cam: Vec3) -> Option<(f64, f64)> {
        if p_cam.x <= 0.0 {
            return None;
        }
        let u = self.cx - self.fx * p_cam.y / p_cam.x;
        let v = self.cy - self.fy * p_cam.z / p_cam.x;
        if u < 0.0 || v < 0.0 || u >= self.width as f64 || v >= self.height as f64 {
            return None;
        }
        Some((u, v))
    }
}

/// Spinning lidar: `azimuth_count` bearings per listed elevation ring.
#[derive(Debug, Clone, PartialEq)]
pub struct LidarPattern {
    pub azimuth_count: u32,
    pub elevation_deg: Vec<f64>,
    pub max_range: f64,
}

impl LidarPattern {
    /// Sensor-frame unit beam directions, elevation-major then azimuth.
    pub fn directions(&self) -> Vec<Vec3> {
        let mut dirs = Vec::with_capacity(self.elevation_deg.len() * self.azimuth_count as usize);
        for &el_deg in &self.elevation_deg {
            let el = el_deg.to_radians();
            for k in 0..self.azimuth_count {
                let az = std::f64::consts::TAU * k as f64 / self.azimuth_count as f64;
                dirs.push(Vec3::new(
                    el.cos() * az.cos(),
                    el.cos() * az.sin(),
                    el.sin(),
                ));
            }
        }
        dirs
    }
}

/// Everything a platform carries: imaging, lidar, and nav sensor models
/// with their rates and mounting poses (relative to the platform body).
#[derive(Debug, Clone)]
pub struct SensorSuite {
    pub camera: CameraIntrinsics,
    pub camera_mount: Pose,
    pub camera_rate_hz: f64,
    pub lidar: LidarPattern,
    pub lidar_mount: Pose,
    pub lidar_rate_hz: f64,
    pub gnss_sigma: Vec3,
    pub gnss_rate_hz: f64,
    pub accel_sigma: f64,
    pub gyro_sigma: f64,
    pub imu_rate_hz: f64,
}

impl SensorSuite {
    pub fn validate(&self) -> Result<(), MobilityError> {
        let rates = [
            self.camera_rate_hz,
            self.lidar_rate_hz,
            self.gnss_rate_hz,
            self.imu_rate_hz,
        ];
        if rates.iter().any(|r| !(*r > 0.0)) {
            return Err(MobilityError::Parse {
                line: 0,
                msg: "sensor rates must be positive".into(),
            });
        }
        if self.camera.width == 0 || self.camera.height == 0 {
            return Err(MobilityError::Parse {
                line: 0,
                msg: "camera dimensions must be positive".into(),
            });
        }
        Ok(())
    }
}

// ============================================================================
// Ray-cast rendering
// ============================================================================

fn cast(
    mesh: &TriangleMesh,
    bvh: &Bvh,
    origin: Vec3,
    dir: Vec3,
    max_range: f64,
) -> Option<crate::Hit> {
    let ray = Ray::new(origin, dir, 0.0, max_range);
    ray_mesh_first_hit(bvh, mesh, &ray, &[])
}

/// Depth image: range along each pixel ray in meters, 0 where nothing was
/// hit inside `max_range`.
pub fn render_depth(
    mesh: &TriangleMesh,
    bvh: &Bvh,
    sensor_pose: &Pose,
    cam: &CameraIntrinsics,
) -> DepthImage {
    let origin = sensor_pose.translation;
    let mut data = vec![0.0f32; (cam.width * cam.height) as usize];
    for v in 0..cam.height {
        for u in 0..cam.width {
            let dir = sensor_pose.apply_direction(cam.ray_direction(u, v));
            if let Some(hit) = cast(mesh, bvh, origin, dir, cam.max_range) {
                data[(v * cam.width + u) as usize] = hit.t as f32;
            }
        }
    }
    DepthImage {
        width: cam.width,
        height: cam.height,
        data,
    }
}

/// Semantic image: per-pixel hit object id, `NO_HIT_ID` where the ray
/// escapes. Pixel-aligned with [`render_depth`] at the same pose.
pub fn render_semantic(
    mesh: &TriangleMesh,
    bvh: &Bvh,
    sensor_pose: &Pose,
    cam: &CameraIntrinsics,
) -> SemanticImage {
    let origin = sensor_pose.translation;
    let mut data = vec![NO_HIT_ID; (cam.width * cam.height) as usize];
    for v in 0..cam.height {
        for u in 0..cam.width {
            let dir = sensor_pose.apply_direction(cam.ray_direction(u, v));
            if let Some(hit) = cast(mesh, bvh, origin, dir, cam.max_range) {
                data[(v * cam.width + u) as usize] = hit.object_id;
            }
        }
    }
    SemanticImage {
        width: cam.width,
        height: cam.height,
        data,
    }
}

/// Lidar sweep: sensor-frame hit points (beam direction × range); missed
/// beams produce no point.
pub fn scan_lidar(
    mesh: &TriangleMesh,
    bvh: &Bvh,
    sensor_pose: &Pose,
    lidar: &LidarPattern,
) -> PointCloud {
    let origin = sensor_pose.translation;
    let mut points = Vec::new();
    for dir_sensor in lidar.directions() {
        let dir_world = sensor_pose.apply_direction(dir_sensor);
        if let Some(hit) = cast(mesh, bvh, origin, dir_world, lidar.max_range) {
            let p = dir_sensor * hit.t;
            points.push([p.x as f32, p.y as f32, p.z as f32]);
        }
    }
    PointCloud { points }
}

// ============================================================================
// Nav sensors
// ============================================================================

/// GNSS fix: ground-truth position plus per-axis seeded Gaussian noise.
pub fn sample_gnss(pose: &Pose, sigma: Vec3, rng: &mut SplitMix64) -> GnssMsg {
    GnssMsg {
        position: pose.translation
            + Vec3::new(
                rng.gaussian(sigma.x),
                rng.gaussian(sigma.y),
                rng.gaussian(sigma.z),
            ),
    }
}

/// IMU sample in the body frame: specific force (kinematic acceleration
/// minus gravity, rotated into the body) and angular rate, each with
/// isotropic Gaussian noise. A platform at rest reads (0, 0, +g).
pub fn sample_imu(
    pose: &Pose,
    twist: &Twist,
    accel_world: Vec3,
    accel_sigma: f64,
    gyro_sigma: f64,
    rng: &mut SplitMix64,
) -> ImuMsg {
    let gravity = Vec3::new(0.0, 0.0, -STANDARD_GRAVITY);
    let inv = pose.rotation.conjugate();
    let specific_force = inv.rotate(accel_world - gravity)
        + Vec3::new(
            rng.gaussian(accel_sigma),
            rng.gaussian(accel_sigma),
            rng.gaussian(accel_sigma),
        );
    let angular_rate = inv.rotate(twist.angular)
        + Vec3::new(
            rng.gaussian(gyro_sigma),
            rng.gaussian(gyro_sigma),
            rng.gaussian(gyro_sigma),
        );
    ImuMsg {
        specific_force,
        angular_rate,
    }
}
