//! Single-config session orchestration.
//!
//! One process hosts the whole graph: a clock driver, the frame tree, the
//! kinematic/sensing front end, the ray tracer, and the link evaluator,
//! all exchanging messages over the in-process bus while a recorder
//! captures every topic into a session bag. Replay rebuilds the same graph
//! but republishes the recorded source topics and recomputes the channel
//! outputs from the replayed poses, terminating when the bag ends.
//!
//! Determinism contract: (config, seed) fully determines every published
//! byte, so identical runs produce byte-identical bags.

use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::bus::bag::{read_bag, BagError, BagFile, BagSummary, Recorder};
use crate::bus::{Bus, BusError, Header};
use crate::ckm::{CkmError, CkmJob, GridSpec};
use crate::config::{Config, ConfigError};
use crate::geometry::bvh::Bvh;
use crate::linksys::{
    cir_to_cfr, evaluate_link, ArrayConfig, BlerCurve, DftCodebook, LinkError, OfdmConfig,
};
use crate::mobility::{
    render_depth, render_semantic, sample_gnss, sample_imu, scan_lidar, CameraIntrinsics,
    LidarPattern, MobilityError, SensorSuite, Trajectory,
};
use crate::msgs::{schemas, topics, ClockMsg, OdomMsg, TfMsg};
use crate::prng::SplitMix64;
use crate::raytracer::{
    assemble_cir, compute_paths_cached, ImageCache, RadioEndpoint, RtConfig, RtError, RtScene,
};
use crate::scene::{
    assign_materials, extrude_footprints, load_footprints, simplify_mesh, ExtrudeOptions,
    MaterialLibrary, RtMesh, SceneAsset, SceneError, SimplifyConfig, UnknownMaterial,
};
use crate::timebase::{stamped, ClockError, FrameTree, SimClock, SimTime};
use crate::wire::WireError;
use crate::{Pose, Quat, Vec3};

#[derive(Debug, Error)]
pub enum SessionError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("scene: {0}")]
    Scene(#[from] SceneError),
    #[error("material: {0}")]
    Material(#[from] UnknownMaterial),
    #[error("mobility: {0}")]
    Mobility(#[from] MobilityError),
    #[error("ray tracing: {0}")]
    Rt(#[from] RtError),
    #[error("link: {0}")]
    Link(#[from] LinkError),
    #[error("bus: {0}")]
    Bus(#[from] BusError),
    #[error("bag: {0}")]
    Bag(#[from] BagError),
    #[error("clock: {0}")]
    Clock(#[from] ClockError),
    #[error("wire: {0}")]
    Wire(#[from] WireError),
    #[error("map: {0}")]
    Ckm(#[from] CkmError),
    #[error("{0}")]
    Invalid(String),
    #[error("contract violated at record {record}: {message}")]
    Audit { record: usize, message: String },
}

// ============================================================================
// Config -> typed setups
// ============================================================================

/// Scene construction parameters (`scene.*`, `simplify.*`).
#[derive(Debug, Clone)]
pub struct SceneSetup {
    pub footprints_path: PathBuf,
    pub wall_subdivisions: usize,
    pub material_rules: Vec<(String, String)>,
    pub default_material: String,
    pub simplify: SimplifyConfig,
}

pub fn scene_setup(cfg: &Config) -> Result<SceneSetup, SessionError> {
    let mut rules = crate::scene::synth::demo_material_rules();
    for key in cfg.keys().map(str::to_string).collect::<Vec<_>>() {
        if let Some(class) = key.strip_prefix("scene.material.") {
            let material = cfg.require(&key)?.to_string();
            match rules.iter_mut().find(|(c, _)| c == class) {
                Some(rule) => rule.1 = material,
                None => rules.push((class.to_string(), material)),
            }
        }
    }
    let defaults = SimplifyConfig::default();
    let detail = if cfg.contains("simplify.detail_classes") {
        cfg.str_list_or_empty("simplify.detail_classes")
    } else {
        defaults.detail_classes.clone()
    };
    Ok(SceneSetup {
        footprints_path: cfg.path("scene.footprints")?,
        wall_subdivisions: cfg.usize_or("scene.wall_subdivisions", 1)?,
        material_rules: rules,
        default_material: cfg.str_or("scene.default_material", "concrete").to_string(),
        simplify: SimplifyConfig {
            size_threshold: cfg.f64_or("simplify.size_threshold_m2", defaults.size_threshold)?,
            ratio: cfg.f64_or("simplify.ratio", defaults.ratio)?,
            sharp_angle_deg: cfg.f64_or("simplify.sharp_angle_deg", defaults.sharp_angle_deg)?,
            detail_classes: detail,
        },
    })
}

/// Loads footprints, extrudes the high-fidelity asset, and decimates the
/// propagation mesh.
pub fn build_scene(setup: &SceneSetup) -> Result<(SceneAsset, RtMesh), SessionError> {
    let set = load_footprints(&setup.footprints_path).map_err(SceneError::Footprint)?;
    let mut asset = extrude_footprints(
        &set,
        &ExtrudeOptions {
            wall_subdivisions: setup.wall_subdivisions,
        },
    )?;
    let library = MaterialLibrary::standard();
    assign_materials(
        &mut asset,
        &setup.material_rules,
        Some(&setup.default_material),
        &library,
    )?;
    let rtmesh = simplify_mesh(&asset, &setup.simplify)?;
    Ok((asset, rtmesh))
}

/// Everything a live or replay session needs besides the scene.
#[derive(Debug, Clone)]
pub struct SessionSetup {
    pub seed: u64,
    pub tick_ns: u64,
    pub duration_s: Option<f64>,
    pub platform: String,
    pub trajectory_path: PathBuf,
    pub suite: SensorSuite,
    pub tx_pose: Pose,
    pub tx_id: u32,
    pub rx_id: u32,
    pub rt: RtConfig,
    pub array: ArrayConfig,
    pub ofdm: OfdmConfig,
    pub bler: BlerCurve,
    pub link_rate_hz: f64,
}

pub fn rt_config(cfg: &Config) -> Result<RtConfig, SessionError> {
    Ok(RtConfig::new(
        cfg.f64("rt.carrier_hz")?,
        cfg.u32_or("rt.max_order", 2)?,
        cfg.f64_or("rt.tx_power_dbm", 30.0)?,
    )?)
}

pub fn array_config(cfg: &Config) -> Result<ArrayConfig, SessionError> {
    let mut array = ArrayConfig::new(
        cfg.usize_or("array.n_x", 8)?,
        cfg.usize_or("array.n_y", 8)?,
    )?;
    array.spacing_wavelengths = cfg.f64_or("array.spacing_wavelengths", 0.5)?;
    Ok(array)
}

pub fn ofdm_config(cfg: &Config) -> Result<OfdmConfig, SessionError> {
    Ok(OfdmConfig::new(
        cfg.usize_or("ofdm.n_subcarriers", 64)?,
        cfg.f64_or("ofdm.subcarrier_spacing_hz", 30e3)?,
        cfg.f64_or("ofdm.noise_figure_db", 7.0)?,
    )?)
}

pub fn bler_curve(cfg: &Config) -> Result<BlerCurve, SessionError> {
    let d = BlerCurve::default();
    Ok(BlerCurve {
        threshold_db: cfg.f64_or("bler.threshold_db", d.threshold_db)?,
        slope_per_db: cfg.f64_or("bler.slope_per_db", d.slope_per_db)?,
    })
}

/// Transmitter pose: position plus a yaw that points the array boresight.
pub fn tx_pose(cfg: &Config) -> Result<Pose, SessionError> {
    let position = cfg.vec3("tx.position")?;
    let yaw = cfg.f64_or("tx.yaw_deg", 0.0)?.to_radians();
    Ok(Pose::new(position, Quat::from_yaw(yaw)))
}

pub fn grid_spec(cfg: &Config) -> Result<GridSpec, SessionError> {
    let grid = GridSpec {
        x0: cfg.f64("grid.x0")?,
        y0: cfg.f64("grid.y0")?,
        n_x: cfg.usize("grid.n_x")?,
        n_y: cfg.usize("grid.n_y")?,
        cell_m: cfg.f64("grid.cell_m")?,
        rx_height_m: cfg.f64("grid.rx_height_m")?,
    };
    grid.validate()?;
    Ok(grid)
}

/// Grid-scan job assembled from the same config a session runs from.
pub fn ckm_job(cfg: &Config) -> Result<CkmJob, SessionError> {
    Ok(CkmJob {
        tx_pose: tx_pose(cfg)?,
        tx_id: cfg.u32_or("tx.id", 0)?,
        grid: grid_spec(cfg)?,
        rt: rt_config(cfg)?,
        array: array_config(cfg)?,
        ofdm: ofdm_config(cfg)?,
        bler: bler_curve(cfg)?,
    })
}

fn sensor_suite(cfg: &Config) -> Result<SensorSuite, SessionError> {
    let camera = CameraIntrinsics::with_fov(
        cfg.u32_or("sensors.camera_width", 64)?,
        cfg.u32_or("sensors.camera_height", 48)?,
        cfg.f64_or("sensors.camera_fov_deg", 90.0)?,
        cfg.f64_or("sensors.camera_range_m", 120.0)?,
    );
    let elevations = if cfg.contains("sensors.lidar_elevations_deg") {
        cfg.f64_list("sensors.lidar_elevations_deg")?
    } else {
        vec![-15.0, 0.0, 15.0]
    };
    let suite = SensorSuite {
        camera,
        camera_mount: Pose::from_translation(cfg.vec3_or(
            "sensors.camera_mount",
            Vec3::zero(),
        )?),
        camera_rate_hz: cfg.f64_or("sensors.camera_rate_hz", 5.0)?,
        lidar: LidarPattern {
            azimuth_count: cfg.u32_or("sensors.lidar_azimuths", 64)?,
            elevation_deg: elevations,
            max_range: cfg.f64_or("sensors.lidar_range_m", 120.0)?,
        },
        lidar_mount: Pose::from_translation(cfg.vec3_or("sensors.lidar_mount", Vec3::zero())?),
        lidar_rate_hz: cfg.f64_or("sensors.lidar_rate_hz", 10.0)?,
        gnss_sigma: cfg.vec3_or("sensors.gnss_sigma", Vec3::zero())?,
        gnss_rate_hz: cfg.f64_or("sensors.gnss_rate_hz", 10.0)?,
        accel_sigma: cfg.f64_or("sensors.accel_sigma", 0.0)?,
        gyro_sigma: cfg.f64_or("sensors.gyro_sigma", 0.0)?,
        imu_rate_hz: cfg.f64_or("sensors.imu_rate_hz", 100.0)?,
    };
    suite.validate()?;
    Ok(suite)
}

pub fn session_setup(cfg: &Config) -> Result<SessionSetup, SessionError> {
    let tick_ms = cfg.f64_or("session.tick_ms", 10.0)?;
    if !(tick_ms > 0.0) {
        return Err(SessionError::Invalid("session.tick_ms must be positive".into()));
    }
    let duration_s = if cfg.contains("session.duration_s") {
        Some(cfg.f64("session.duration_s")?)
    } else {
        None
    };
    Ok(SessionSetup {
        seed: cfg.u64_or("session.seed", 0)?,
        tick_ns: (tick_ms * 1e6).round() as u64,
        duration_s,
        platform: cfg.str_or("platform.name", "rover").to_string(),
        trajectory_path: cfg.path("platform.trajectory")?,
        suite: sensor_suite(cfg)?,
        tx_pose: tx_pose(cfg)?,
        tx_id: cfg.u32_or("tx.id", 0)?,
        rx_id: cfg.u32_or("rx.id", 1)?,
        rt: rt_config(cfg)?,
        array: array_config(cfg)?,
        ofdm: ofdm_config(cfg)?,
        bler: bler_curve(cfg)?,
        link_rate_hz: cfg.f64_or("link.rate_hz", 10.0)?,
    })
}

// ============================================================================
// Rate gating
// ============================================================================

/// Fires on the first stamp at or past each period boundary, regardless of
/// how the tick and the period divide.
#[derive(Debug, Clone)]
struct RateDivider {
    period_ns: u64,
    next: u64,
}

impl RateDivider {
    fn new(rate_hz: f64, start: SimTime) -> Self {
        let period_ns = ((1e9 / rate_hz).round() as u64).max(1);
        Self {
            period_ns,
            next: start.nanos(),
        }
    }

    fn fires(&mut self, t: SimTime) -> bool {
        if t.nanos() < self.next {
            return false;
        }
        while self.next <= t.nanos() {
            self.next += self.period_ns;
        }
        true
    }
}

// ============================================================================
// Session graph
// ============================================================================

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Mode {
    /// Poses streamed from the trajectory front end.
    Online,
    /// Source topics republished from a bag; channel outputs recomputed.
    Replay(PathBuf),
}

#[derive(Debug)]
pub struct SessionReport {
    pub bag_path: PathBuf,
    pub summary: BagSummary,
    pub ticks: u64,
}

/// The in-process link pipeline shared by live and replay sessions.
struct LinkStage<'a> {
    scene: &'a RtScene,
    cache: ImageCache,
    book: DftCodebook,
    array_rotation: Quat,
    setup: &'a SessionSetup,
}

impl<'a> LinkStage<'a> {
    fn new(scene: &'a RtScene, setup: &'a SessionSetup) -> Result<Self, SessionError> {
        Ok(Self {
            scene,
            cache: ImageCache::build(setup.tx_pose.translation, scene, setup.rt.max_order),
            book: DftCodebook::new(&setup.array)?,
            array_rotation: setup.tx_pose.rotation * setup.array.mount.rotation,
            setup,
        })
    }

    /// Traces the link, evaluates it, and publishes `/channel/cir` then
    /// `/channel/kpi`.
    fn step(&self, bus: &Bus, stamp: SimTime, odom: &OdomMsg) -> Result<(), SessionError> {
        let tx = RadioEndpoint {
            position: self.setup.tx_pose.translation,
            velocity: Vec3::zero(),
        };
        let rx = RadioEndpoint {
            position: odom.pose.translation,
            velocity: odom.twist.linear,
        };
        let paths = compute_paths_cached(&tx, &rx, self.scene, &self.setup.rt, &self.cache);
        let cir = assemble_cir(paths, stamp, self.setup.tx_id, self.setup.rx_id);
        bus.publish(topics::CIR, schemas::CIR, cir.header("tx"), cir.encode())?;
        let h = cir_to_cfr(&cir, &self.setup.array, self.array_rotation, &self.setup.ofdm);
        let kpi = evaluate_link(
            &h,
            &self.book,
            &self.setup.ofdm,
            self.setup.rt.tx_power_dbm,
            &self.setup.bler,
            &[],
            stamp,
            self.setup.tx_id,
            self.setup.rx_id,
        )?;
        bus.publish(topics::KPI, schemas::KPI, kpi.header("tx"), kpi.encode())?;
        Ok(())
    }
}

fn header(stamp: SimTime, frame: &str) -> Header {
    Header {
        stamp,
        frame_id: frame.to_string(),
    }
}

/// Runs a session and records every topic into `out_bag`.
///
/// Online mode walks the trajectory on the session tick; replay mode
/// republishes the recorded source topics (everything except the channel
/// outputs) at their stored stamps and recomputes `/channel/cir` and
/// `/channel/kpi` from the replayed ground-truth poses. A replayed
/// recording of an unmodified session is therefore byte-identical to the
/// original bag.
pub fn run_session(
    cfg: &Config,
    mode: Mode,
    out_bag: &Path,
) -> Result<SessionReport, SessionError> {
    let setup = session_setup(cfg)?;
    let (asset, rtmesh) = build_scene(&scene_setup(cfg)?)?;
    let scene = RtScene::new(&rtmesh, &MaterialLibrary::standard())?;
    let link = LinkStage::new(&scene, &setup)?;
    match mode {
        Mode::Online => run_online(cfg, &setup, &asset, &link, out_bag),
        Mode::Replay(bag_path) => run_replay(&setup, &link, &bag_path, out_bag),
    }
}

fn run_online(
    _cfg: &Config,
    setup: &SessionSetup,
    asset: &SceneAsset,
    link: &LinkStage<'_>,
    out_bag: &Path,
) -> Result<SessionReport, SessionError> {
    let traj = Trajectory::load(&setup.trajectory_path, &setup.platform)?;
    let start = traj.first_stamp();
    let span_end = traj.last_stamp();
    let end = match setup.duration_s {
        Some(d) => {
            let req = SimTime::from_secs_f64(start.secs_f64() + d);
            if req > span_end {
                span_end
            } else {
                req
            }
        }
        None => span_end,
    };

    let sense_bvh = Bvh::build(&asset.mesh);
    let bus = Bus::new();
    let mut recorder = Recorder::attach_all(&bus);
    let mut clock = SimClock::new();
    if start > SimTime::ZERO {
        clock.set(start)?;
    }

    let platform = setup.platform.as_str();
    let camera_frame = format!("{platform}/camera");
    let lidar_frame = format!("{platform}/lidar");
    let imu_frame = format!("{platform}/imu");
    let odom_topic = topics::platform_pose(platform);

    let mut gnss_rng = SplitMix64::substream(setup.seed, "sensor-gnss");
    let mut imu_rng = SplitMix64::substream(setup.seed, "sensor-imu");
    let mut gnss_div = RateDivider::new(setup.suite.gnss_rate_hz, start);
    let mut imu_div = RateDivider::new(setup.suite.imu_rate_hz, start);
    let mut camera_div = RateDivider::new(setup.suite.camera_rate_hz, start);
    let mut lidar_div = RateDivider::new(setup.suite.lidar_rate_hz, start);
    let mut link_div = RateDivider::new(setup.link_rate_hz, start);
    let accel_h = (setup.tick_ns as f64 / 1e9).max(1e-4);

    let mut ticks = 0u64;
    loop {
        let t = clock.now();
        if t > end {
            break;
        }
        ticks += 1;

        // Clock first: everything below is stamped with this tick.
        bus.publish(
            topics::CLOCK,
            schemas::CLOCK,
            header(t, "world"),
            ClockMsg { nanos: t.nanos() }.encode(),
        )?;

        // Transforms, republished every tick so lookups at this stamp
        // resolve without extrapolation.
        let (pose, twist) = traj.state_at(t)?;
        let tf_batch = [
            ("world", platform, pose),
            (platform, camera_frame.as_str(), setup.suite.camera_mount),
            (platform, lidar_frame.as_str(), setup.suite.lidar_mount),
            (platform, imu_frame.as_str(), Pose::identity()),
            ("world", "tx", setup.tx_pose),
        ];
        for (parent, child, tf_pose) in &tf_batch {
            let msg = TfMsg {
                parent: parent.to_string(),
                child: child.to_string(),
                pose: *tf_pose,
            };
            bus.publish(topics::TF, schemas::TF, header(t, "world"), msg.encode()?)?;
        }

        // Ground-truth state for the channel stage (and the record).
        let odom = OdomMsg { pose, twist };
        bus.publish(&odom_topic, schemas::ODOM, header(t, "world"), odom.encode())?;

        // Sensors at their own rates.
        if gnss_div.fires(t) {
            let fix = sample_gnss(&pose, setup.suite.gnss_sigma, &mut gnss_rng);
            bus.publish(topics::GNSS, schemas::GNSS, header(t, "world"), fix.encode())?;
        }
        if imu_div.fires(t) {
            let accel = traj.acceleration_at(t, accel_h)?;
            let imu = sample_imu(
                &pose,
                &twist,
                accel,
                setup.suite.accel_sigma,
                setup.suite.gyro_sigma,
                &mut imu_rng,
            );
            bus.publish(topics::IMU, schemas::IMU, header(t, &imu_frame), imu.encode())?;
        }
        if camera_div.fires(t) {
            let cam_pose = pose.compose(&setup.suite.camera_mount);
            let depth = render_depth(&asset.mesh, &sense_bvh, &cam_pose, &setup.suite.camera);
            bus.publish(
                topics::DEPTH,
                schemas::DEPTH,
                header(t, &camera_frame),
                depth.encode(),
            )?;
            let sem = render_semantic(&asset.mesh, &sense_bvh, &cam_pose, &setup.suite.camera);
            bus.publish(
                topics::SEMANTIC,
                schemas::SEMANTIC,
                header(t, &camera_frame),
                sem.encode(),
            )?;
        }
        if lidar_div.fires(t) {
            let lidar_pose = pose.compose(&setup.suite.lidar_mount);
            let cloud = scan_lidar(&asset.mesh, &sense_bvh, &lidar_pose, &setup.suite.lidar);
            bus.publish(
                topics::LIDAR,
                schemas::POINTS,
                header(t, &lidar_frame),
                cloud.encode(),
            )?;
        }

        // Channel outputs last within the tick.
        if link_div.fires(t) {
            link.step(&bus, t, &odom)?;
        }

        recorder.collect();
        if t.saturating_add(setup.tick_ns) > end {
            break;
        }
        clock.advance(setup.tick_ns)?;
    }

    let summary = recorder.finish(out_bag)?;
    Ok(SessionReport {
        bag_path: out_bag.to_path_buf(),
        summary,
        ticks,
    })
}

fn run_replay(
    setup: &SessionSetup,
    link: &LinkStage<'_>,
    in_bag: &Path,
    out_bag: &Path,
) -> Result<SessionReport, SessionError> {
    let input = read_bag(in_bag)?;
    let odom_topic = topics::platform_pose(&setup.platform);
    if input.topic_id(&odom_topic).is_none() {
        return Err(SessionError::Invalid(format!(
            "replay bag {} carries no `{}` topic",
            in_bag.display(),
            odom_topic
        )));
    }

    let bus = Bus::new();
    let mut recorder = Recorder::attach_all(&bus);
    let mut clock = SimClock::new();
    let first_stamp = input
        .records
        .first()
        .map(|r| r.stamp)
        .unwrap_or(SimTime::ZERO);
    let mut link_div = RateDivider::new(setup.link_rate_hz, first_stamp);
    let mut latest_odom: Option<OdomMsg> = None;
    let mut ticks = 0u64;

    let mut i = 0;
    while i < input.records.len() {
        let stamp = input.records[i].stamp;
        if stamp > clock.now() {
            clock.set(stamp)?;
        } else if stamp < clock.now() {
            return Err(SessionError::Bag(BagError::NonMonotonicReplay));
        }
        ticks += 1;

        // Republish every source record carrying this stamp, in stored
        // order; recorded channel outputs are dropped and recomputed.
        while i < input.records.len() && input.records[i].stamp == stamp {
            let record = &input.records[i];
            i += 1;
            let env = input.envelope(record);
            if env.topic == topics::CIR || env.topic == topics::KPI {
                continue;
            }
            if env.topic == odom_topic {
                latest_odom = Some(OdomMsg::decode(&env.payload)?);
            }
            bus.publish(&env.topic, &env.schema, env.header, env.payload)?;
        }

        if link_div.fires(stamp) {
            if let Some(odom) = &latest_odom {
                link.step(&bus, stamp, odom)?;
            }
        }
        recorder.collect();
    }

    let summary = recorder.finish(out_bag)?;
    Ok(SessionReport {
        bag_path: out_bag.to_path_buf(),
        summary,
        ticks,
    })
}

// ============================================================================
// Contract audit
// ============================================================================

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContractAudit {
    pub records: usize,
    pub transforms: usize,
    pub frames: Vec<String>,
}

/// Verifies the session contract over a recorded bag: stamps are
/// non-decreasing, every envelope is stamped with the clock value of its
/// tick, and every frame id resolves in the transform tree at that stamp.
pub fn audit_bag_contract(bag: &BagFile) -> Result<ContractAudit, SessionError> {
    let violation = |record: usize, message: String| SessionError::Audit { record, message };
    let mut tree = FrameTree::new("world", SimTime::from_millis(1000).nanos());
    let mut current: Option<SimTime> = None;
    let mut previous: Option<SimTime> = None;
    let mut transforms = 0usize;

    for (idx, record) in bag.records.iter().enumerate() {
        let topic = &bag
            .topic(record.topic_id)
            .ok_or_else(|| violation(idx, format!("unknown topic id {}", record.topic_id)))?
            .name;
        if let Some(prev) = previous {
            if record.stamp < prev {
                return Err(violation(
                    idx,
                    format!("stamp went backwards: {} after {}", record.stamp, prev),
                ));
            }
        }
        previous = Some(record.stamp);

        if topic == topics::CLOCK {
            let msg = ClockMsg::decode(&record.payload)
                .map_err(|e| violation(idx, format!("clock payload: {e}")))?;
            if msg.nanos != record.stamp.nanos() {
                return Err(violation(
                    idx,
                    format!(
                        "clock payload {} disagrees with stamp {}",
                        msg.nanos,
                        record.stamp.nanos()
                    ),
                ));
            }
            current = Some(record.stamp);
        } else {
            match current {
                Some(tick) if tick == record.stamp => {}
                Some(tick) => {
                    return Err(violation(
                        idx,
                        format!("stamp {} is not the current clock {}", record.stamp, tick),
                    ))
                }
                None => {
                    return Err(violation(idx, "message published before any clock".into()))
                }
            }
        }

        if topic == topics::TF {
            let msg = TfMsg::decode(&record.payload)
                .map_err(|e| violation(idx, format!("tf payload: {e}")))?;
            tree.set_transform(&stamped(record.stamp, &msg.parent, &msg.child, msg.pose))
                .map_err(|e| violation(idx, format!("tf rejected: {e}")))?;
            transforms += 1;
        }

        if record.frame_id.is_empty() {
            return Err(violation(idx, "empty frame id".into()));
        }
        tree.lookup_transform(&record.frame_id, "world", record.stamp)
            .map_err(|e| {
                violation(
                    idx,
                    format!("frame `{}` unresolvable at {}: {e}", record.frame_id, record.stamp),
                )
            })?;
    }

    let mut frames = tree.frames();
    frames.sort();
    Ok(ContractAudit {
        records: bag.records.len(),
        transforms,
        frames,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::fs;

    fn demo_files(dir: &Path) -> PathBuf {
        let footprints = "\
origin local demo
fp ground class=ground height=0
v -60 -60
v 60 -60
v 60 60
v -60 60
end
fp east class=building height=12
v 12 -10
v 24 -10
v 24 10
v 12 10
end
fp west class=building height=9
v -24 -10
v -12 -10
v -12 10
v -24 10
end
";
        fs::write(dir.join("footprints.txt"), footprints).unwrap();
        let trajectory = "\
# t x y z qw qx qy qz
0.0  0 -20 1.5  1 0 0 0
1.0  0   0 1.5  1 0 0 0
2.0  0  20 1.5  1 0 0 0
";
        fs::write(dir.join("trajectory.txt"), trajectory).unwrap();
        let config = "\
session.seed = 7
session.tick_ms = 50
session.duration_s = 1.0
scene.footprints = footprints.txt
scene.wall_subdivisions = 2
simplify.ratio = 0.5
platform.name = rover
platform.trajectory = trajectory.txt
sensors.camera_width = 16
sensors.camera_height = 12
sensors.camera_rate_hz = 4
sensors.lidar_azimuths = 16
sensors.lidar_rate_hz = 4
sensors.gnss_rate_hz = 10
sensors.gnss_sigma = 0.2 0.2 0.4
sensors.imu_rate_hz = 20
tx.position = 0 30 10
tx.yaw_deg = -90
rt.carrier_hz = 3.5e9
rt.max_order = 1
rt.tx_power_dbm = 30
array.n_x = 4
array.n_y = 4
ofdm.n_subcarriers = 16
ofdm.subcarrier_spacing_hz = 30e3
link.rate_hz = 10
grid.x0 = -30
grid.y0 = -30
grid.n_x = 4
grid.n_y = 4
grid.cell_m = 15
grid.rx_height_m = 1.5
";
        let path = dir.join("demo.conf");
        fs::write(&path, config).unwrap();
        path
    }

    #[test]
    fn divider_fires_on_period_boundaries() {
        let mut div = RateDivider::new(10.0, SimTime::ZERO);
        let tick = 10_000_000u64; // 10 ms
        let fired: Vec<u64> = (0..25)
            .map(|i| SimTime::from_nanos(i * tick))
            .filter(|t| div.fires(*t))
            .map(|t| t.nanos())
            .collect();
        assert_eq!(fired, vec![0, 100_000_000, 200_000_000]);
        // A rate that does not divide the tick still fires regularly.
        let mut odd = RateDivider::new(7.0, SimTime::ZERO);
        let odd_fires = (0..700)
            .map(|i| SimTime::from_nanos(i * tick))
            .filter(|t| odd.fires(*t))
            .count();
        assert!((48..=50).contains(&odd_fires), "{odd_fires} fires in 7 s at 7 Hz");
    }

    #[test]
    fn missing_required_key_names_it() {
        let dir = tempfile::tempdir().unwrap();
        let path = demo_files(dir.path());
        let text = fs::read_to_string(&path)
            .unwrap()
            .replace("rt.carrier_hz = 3.5e9\n", "");
        fs::write(&path, text).unwrap();
        let cfg = Config::load(&path).unwrap();
        let err = session_setup(&cfg).unwrap_err();
        assert!(err.to_string().contains("rt.carrier_hz"), "{err}");
    }

    #[test]
    fn online_session_records_the_expected_topics() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = Config::load(&demo_files(dir.path())).unwrap();
        let out = dir.path().join("session.bag");
        let report = run_session(&cfg, Mode::Online, &out).unwrap();
        assert_eq!(report.ticks, 21, "1 s at 50 ms ticks, inclusive");
        let names: Vec<&str> = report
            .summary
            .topics
            .iter()
            .map(|(n, _, _)| n.as_str())
            .collect();
        for expect in [
            topics::CLOCK,
            topics::TF,
            "/platform/rover/pose",
            topics::GNSS,
            topics::IMU,
            topics::DEPTH,
            topics::SEMANTIC,
            topics::LIDAR,
            topics::CIR,
            topics::KPI,
        ] {
            assert!(names.contains(&expect), "missing {expect}: {names:?}");
        }
        let count = |topic: &str| {
            report
                .summary
                .topics
                .iter()
                .find(|(n, _, _)| n == topic)
                .map(|(_, _, c)| *c)
                .unwrap()
        };
        assert_eq!(count(topics::CLOCK), 21);
        assert_eq!(count(topics::TF), 105);
        assert_eq!(count(topics::KPI), 11, "10 Hz over [0, 1] inclusive");
        assert_eq!(count(topics::CIR), count(topics::KPI));
        assert_eq!(count(topics::GNSS), 11);
        assert_eq!(count(topics::DEPTH), 5, "4 Hz fires at 0, .25, .5, .75, 1.0");
    }

    #[test]
    fn identical_configs_produce_identical_bags() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = Config::load(&demo_files(dir.path())).unwrap();
        let out_a = dir.path().join("a.bag");
        let out_b = dir.path().join("b.bag");
        run_session(&cfg, Mode::Online, &out_a).unwrap();
        run_session(&cfg, Mode::Online, &out_b).unwrap();
        assert_eq!(fs::read(&out_a).unwrap(), fs::read(&out_b).unwrap());
    }

    #[test]
    fn replay_reproduces_the_live_bag_byte_for_byte() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = Config::load(&demo_files(dir.path())).unwrap();
        let live = dir.path().join("live.bag");
        run_session(&cfg, Mode::Online, &live).unwrap();
        let replayed = dir.path().join("replayed.bag");
        run_session(&cfg, Mode::Replay(live.clone()), &replayed).unwrap();
        assert_eq!(
            fs::read(&live).unwrap(),
            fs::read(&replayed).unwrap(),
            "recomputed channel outputs must match the recording"
        );
    }

    #[test]
    fn audit_passes_live_sessions_and_catches_tampering() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = Config::load(&demo_files(dir.path())).unwrap();
        let out = dir.path().join("session.bag");
        run_session(&cfg, Mode::Online, &out).unwrap();
        let bag = read_bag(&out).unwrap();
        let audit = audit_bag_contract(&bag).unwrap();
        assert_eq!(audit.records as u64, read_bag(&out).unwrap().records.len() as u64);
        assert!(audit.frames.contains(&"rover/camera".to_string()));

        // Tamper: shift one non-clock record's stamp off its tick.
        let mut tampered = read_bag(&out).unwrap();
        let idx = tampered
            .records
            .iter()
            .position(|r| {
                tampered.topic(r.topic_id).unwrap().name == topics::GNSS
            })
            .unwrap();
        tampered.records[idx].stamp = tampered.records[idx].stamp.saturating_add(1);
        let err = audit_bag_contract(&tampered).unwrap_err();
        assert!(err.to_string().contains("record"), "{err}");
    }

    #[test]
    fn ckm_job_reads_the_same_config() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = Config::load(&demo_files(dir.path())).unwrap();
        let job = ckm_job(&cfg).unwrap();
        assert_eq!(job.grid.n_x, 4);
        assert_eq!(job.rt.carrier_hz, 3.5e9);
        assert_eq!(job.array.elements(), 16);
        assert_eq!(job.tx_pose.translation, Vec3::new(0.0, 30.0, 10.0));
        // Yaw -90° points the boresight along -y (towards the grid).
        let boresight = job.tx_pose.rotation.rotate(Vec3::new(1.0, 0.0, 0.0));
        assert!((boresight.y + 1.0).abs() < 1e-12);
    }
}
