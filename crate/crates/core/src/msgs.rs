//! Message schemas carried on the bus.
//!
//! Every schema serializes its fields little-endian in declared order with
//! no padding, so payloads are bit-exact across platforms. Wireless
//! messages (`cir`, `kpi`) are encoded by their producing modules; this
//! module owns the clock, transform, navigation, and imaging schemas.

use crate::timebase::StampedTransform;
use crate::wire::{self, Reader, WireError};
use crate::{Pose, Quat, Twist, Vec3};

/// Topic names used by the stock session graph.
pub mod topics {
    pub const CLOCK: &str = "/clock";
    pub const TF: &str = "/tf";
    pub const GNSS: &str = "/gnss";
    pub const IMU: &str = "/imu";
    pub const DEPTH: &str = "/depth";
    pub const SEMANTIC: &str = "/semantic";
    pub const LIDAR: &str = "/lidar";
    pub const CIR: &str = "/channel/cir";
    pub const KPI: &str = "/channel/kpi";

    pub fn platform_pose(platform: &str) -> String {
        format!("/platform/{platform}/pose")
    }
}

/// Schema (message-type) names.
pub mod schemas {
    pub const CLOCK: &str = "clock";
    pub const TF: &str = "tf";
    pub const ODOM: &str = "odom";
    pub const GNSS: &str = "gnss";
    pub const IMU: &str = "imu";
    pub const DEPTH: &str = "depth";
    pub const SEMANTIC: &str = "semantic";
    pub const POINTS: &str = "points";
    pub const CIR: &str = "cir";
    pub const KPI: &str = "kpi";
}

/// Semantic-image value for pixels whose ray hits nothing.
pub const NO_HIT_ID: u32 = u32::MAX;

pub fn put_vec3(out: &mut Vec<u8>, v: Vec3) {
    wire::put_f64(out, v.x);
    wire::put_f64(out, v.y);
    wire::put_f64(out, v.z);
}

pub fn get_vec3(r: &mut Reader<'_>, what: &'static str) -> Result<Vec3, WireError> {
    Ok(Vec3::new(r.f64(what)?, r.f64(what)?, r.f64(what)?))
}

pub fn put_quat(out: &mut Vec<u8>, q: Quat) {
    wire::put_f64(out, q.w);
    wire::put_f64(out, q.x);
    wire::put_f64(out, q.y);
    wire::put_f64(out, q.z);
}

pub fn get_quat(r: &mut Reader<'_>, what: &'static str) -> Result<Quat, WireError> {
    Ok(Quat {
        w: r.f64(what)?,
        x: r.f64(what)?,
        y: r.f64(what)?,
        z: r.f64(what)?,
    })
}

pub fn put_pose(out: &mut Vec<u8>, p: &Pose) {
    put_vec3(out, p.translation);
    put_quat(out, p.rotation);
}

pub fn get_pose(r: &mut Reader<'_>, what: &'static str) -> Result<Pose, WireError> {
    Ok(Pose::new(get_vec3(r, what)?, get_quat(r, what)?))
}

// ============================================================================
// Clock
// ============================================================================

/// `/clock` payload: the new simulated time.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ClockMsg {
    pub nanos: u64,
}

impl ClockMsg {
    pub fn encode(&self) -> Vec<u8> {
        self.nanos.to_le_bytes().to_vec()
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, WireError> {
        let mut r = Reader::new(bytes);
        let nanos = r.u64("clock nanos")?;
        r.finish()?;
        Ok(Self { nanos })
    }
}

// ============================================================================
// Transforms
// ============================================================================

/// `/tf` payload; the stamp rides in the envelope header.
#[derive(Debug, Clone, PartialEq)]
pub struct TfMsg {
    pub parent: String,
    pub child: String,
    pub pose: Pose,
}

impl TfMsg {
    pub fn from_stamped(tf: &StampedTransform) -> Self {
        Self {
            parent: tf.parent.clone(),
            child: tf.child.clone(),
            pose: tf.pose,
        }
    }

    pub fn encode(&self) -> Result<Vec<u8>, WireError> {
        let mut out = Vec::new();
        wire::put_str(&mut out, &self.parent)?;
        wire::put_str(&mut out, &self.child)?;
        put_pose(&mut out, &self.pose);
        Ok(out)
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, WireError> {
        let mut r = Reader::new(bytes);
        let parent = r.str("tf parent")?;
        let child = r.str("tf child")?;
        let pose = get_pose(&mut r, "tf pose")?;
        r.finish()?;
        Ok(Self { parent, child, pose })
    }
}

// ============================================================================
// Navigation
// ============================================================================

/// Ground-truth platform state: pose plus world-frame twist.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdomMsg {
    pub pose: Pose,
    pub twist: Twist,
}

impl OdomMsg {
    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::new();
        put_pose(&mut out, &self.pose);
        put_vec3(&mut out, self.twist.linear);
        put_vec3(&mut out, self.twist.angular);
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, WireError> {
        let mut r = Reader::new(bytes);
        let pose = get_pose(&mut r, "odom pose")?;
        let linear = get_vec3(&mut r, "odom linear")?;
        let angular = get_vec3(&mut r, "odom angular")?;
        r.finish()?;
        Ok(Self {
            pose,
            twist: Twist { linear, angular },
        })
    }
}

/// Noised position fix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GnssMsg {
    pub position: Vec3,
}

impl GnssMsg {
    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::new();
        put_vec3(&mut out, self.position);
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, WireError> {
        let mut r = Reader::new(bytes);
        let position = get_vec3(&mut r, "gnss position")?;
        r.finish()?;
        Ok(Self { position })
    }
}

/// Body-frame specific force and angular rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImuMsg {
    pub specific_force: Vec3,
    pub angular_rate: Vec3,
}

impl ImuMsg {
    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::new();
        put_vec3(&mut out, self.specific_force);
        put_vec3(&mut out, self.angular_rate);
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, WireError> {
        let mut r = Reader::new(bytes);
        let specific_force = get_vec3(&mut r, "imu force")?;
        let angular_rate = get_vec3(&mut r, "imu rate")?;
        r.finish()?;
        Ok(Self {
            specific_force,
            angular_rate,
        })
    }
}

// ============================================================================
// Imaging
// ============================================================================

/// Per-pixel range in metres, row-major; 0 marks a miss.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthImage {
    pub width: u32,
    pub height: u32,
    pub data: Vec<f32>,
}

impl DepthImage {
    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::new();
        wire::put_u32(&mut out, self.width);
        wire::put_u32(&mut out, self.height);
        for &d in &self.data {
            wire::put_f32(&mut out, d);
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, WireError> {
        let mut r = Reader::new(bytes);
        let width = r.u32("depth width")?;
        let height = r.u32("depth height")?;
        let n = width as usize * height as usize;
        let mut data = Vec::with_capacity(n);
        for _ in 0..n {
            data.push(r.f32("depth pixel")?);
        }
        r.finish()?;
        Ok(Self { width, height, data })
    }
}

/// Per-pixel hit object id, row-major; [`NO_HIT_ID`] marks a miss.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SemanticImage {
    pub width: u32,
    pub height: u32,
    pub data: Vec<u32>,
}

impl SemanticImage {
    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::new();
        wire::put_u32(&mut out, self.width);
        wire::put_u32(&mut out, self.height);
        for &d in &self.data {
            wire::put_u32(&mut out, d);
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, WireError> {
        let mut r = Reader::new(bytes);
        let width = r.u32("semantic width")?;
        let height = r.u32("semantic height")?;
        let n = width as usize * height as usize;
        let mut data = Vec::with_capacity(n);
        for _ in 0..n {
            data.push(r.u32("semantic pixel")?);
        }
        r.finish()?;
        Ok(Self { width, height, data })
    }
}

/// Sensor-frame point cloud; misses are simply absent.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PointCloud {
    pub points: Vec<[f32; 3]>,
}

impl PointCloud {
    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::new();
        wire::put_u32(&mut out, self.points.len() as u32);
        for p in &self.points {
            wire::put_f32(&mut out, p[0]);
            wire::put_f32(&mut out, p[1]);
            wire::put_f32(&mut out, p[2]);
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, WireError> {
        let mut r = Reader::new(bytes);
        let n = r.u32("point count")?;
        let mut points = Vec::with_capacity(n as usize);
        for _ in 0..n {
            points.push([r.f32("point x")?, r.f32("point y")?, r.f32("point z")?]);
        }
        r.finish()?;
        Ok(Self { points })
    }
}
