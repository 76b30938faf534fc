//! Channel knowledge maps: grid-scan link statistics over a ground plane.
//!
//! A virtual receiver is placed at every cell center of a 2-D grid at a
//! fixed height; paths are traced from one fixed transmitter, the link is
//! evaluated, and each cell is reduced to seven summary layers. Layers
//! serialize to a bit-exact raster format and render to portable-pixmap
//! heatmaps. Generation is embarrassingly parallel and byte-deterministic
//! regardless of the worker count.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use num_complex::Complex64;
use rayon::prelude::*;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::linksys::{
    cir_to_cfr, evaluate_link, ArrayConfig, BlerCurve, DftCodebook, LinkError, LinkKpi, OfdmConfig,
};
use crate::raytracer::{
    compute_paths_cached, Cir, ImageCache, PropPath, RadioEndpoint, RtConfig, RtScene,
};
use crate::timebase::SimTime;
use crate::geometry::bvh::ray_mesh_first_hit;
use crate::{Pose, Ray, Vec3};

/// Layer order is fixed; rasters and lookups follow it.
pub const LAYER_NAMES: [&str; 7] = [
    "path_loss_db",
    "rx_power_dbm",
    "rms_delay_spread_s",
    "angular_spread_rad",
    "sinr_eff_db",
    "rate_bpshz",
    "best_beam",
];

pub fn layer_units(name: &str) -> &'static str {
    match name {
        "path_loss_db" => "dB",
        "rx_power_dbm" => "dBm",
        "rms_delay_spread_s" => "s",
        "angular_spread_rad" => "rad",
        "sinr_eff_db" => "dB",
        "rate_bpshz" => "bit/s/Hz",
        "best_beam" => "index",
        _ => "unknown",
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum CkmError {
    #[error("grid invalid: {0}")]
    BadGrid(&'static str),
    #[error("transmitter is inside scene geometry")]
    TxInsideGeometry,
    #[error(transparent)]
    Link(#[from] LinkError),
    #[error("({x}, {y}) is outside the grid")]
    OutsideGrid { x: f64, y: f64 },
    #[error("raster malformed: {0}")]
    BadRaster(String),
    #[error("{path}: {message}")]
    Io { path: String, message: String },
}

fn io_err(path: &Path, e: std::io::Error) -> CkmError {
    CkmError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

/// Ground-plane scan grid. Cell (i, j) covers
/// [x₀+i·cell, x₀+(i+1)·cell) × [y₀+j·cell, y₀+(j+1)·cell) and its
/// receiver sits at the center, at a fixed height.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub x0: f64,
    pub y0: f64,
    pub n_x: usize,
    pub n_y: usize,
    pub cell_m: f64,
    pub rx_height_m: f64,
}

impl GridSpec {
    pub fn validate(&self) -> Result<(), CkmError> {
        if self.n_x == 0 || self.n_y == 0 {
            return Err(CkmError::BadGrid("extent must be at least 1x1"));
        }
        if !(self.cell_m > 0.0) {
            return Err(CkmError::BadGrid("cell size must be positive"));
        }
        if !(self.x0.is_finite() && self.y0.is_finite() && self.rx_height_m.is_finite()) {
            return Err(CkmError::BadGrid("origin and height must be finite"));
        }
        Ok(())
    }

    pub fn cells(&self) -> usize {
        self.n_x * self.n_y
    }

    pub fn cell_center(&self, i: usize, j: usize) -> Vec3 {
        Vec3::new(
            self.x0 + (i as f64 + 0.5) * self.cell_m,
            self.y0 + (j as f64 + 0.5) * self.cell_m,
            self.rx_height_m,
        )
    }
}

/// One named grid of cell statistics; NaN marks cells with no paths.
/// Storage is row-major with x fastest: index = j·n_x + i.
#[derive(Debug, Clone, PartialEq)]
pub struct CkmLayer {
    pub name: String,
    pub units: String,
    pub n_x: usize,
    pub n_y: usize,
    pub values: Vec<f64>,
}

impl CkmLayer {
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[j * self.n_x + i]
    }
}

/// The full multi-layer map for one transmitter.
#[derive(Debug, Clone, PartialEq)]
pub struct Ckm {
    pub grid: GridSpec,
    pub tx_pose: Pose,
    /// SHA-256 over scene geometry, materials, and every generation
    /// parameter; equal digests imply byte-identical rasters.
    pub digest: String,
    pub layers: Vec<CkmLayer>,
}

impl Ckm {
    pub fn layer(&self, name: &str) -> Option<&CkmLayer> {
        self.layers.iter().find(|l| l.name == name)
    }
}

/// Everything needed to scan one transmitter over a grid.
#[derive(Debug, Clone)]
pub struct CkmJob {
    pub tx_pose: Pose,
    pub tx_id: u32,
    pub grid: GridSpec,
    pub rt: RtConfig,
    pub array: ArrayConfig,
    pub ofdm: OfdmConfig,
    pub bler: BlerCurve,
}

/// Reduces one cell's paths and link KPIs to the seven layer values, in
/// `LAYER_NAMES` order. `beam_gain_db` is the best-beam combining gain
/// relative to the total (isotropic) path power. No paths → all NaN.
pub fn reduce_cell(
    paths: &[PropPath],
    kpi: &LinkKpi,
    tx_power_dbm: f64,
    beam_gain_db: f64,
) -> [f64; 7] {
    if paths.is_empty() {
        return [f64::NAN; 7];
    }
    let total: f64 = paths.iter().map(|p| p.amplitude.norm_sqr()).sum();
    let path_loss_db = -10.0 * total.log10();
    let rx_power_dbm = tx_power_dbm - path_loss_db + beam_gain_db;

    let mut mean_delay = 0.0;
    let mut mean_delay_sq = 0.0;
    let mut resultant = Complex64::new(0.0, 0.0);
    for p in paths {
        let w = p.amplitude.norm_sqr() / total;
        mean_delay += w * p.delay;
        mean_delay_sq += w * p.delay * p.delay;
        let azimuth = p.arr_dir.y.atan2(p.arr_dir.x);
        resultant += w * Complex64::from_polar(1.0, azimuth);
    }
    let delay_spread = (mean_delay_sq - mean_delay * mean_delay).max(0.0).sqrt();
    let r = resultant.norm().min(1.0);
    let angular_spread = if r <= 0.0 {
        std::f64::consts::PI
    } else {
        (-2.0 * r.ln()).max(0.0).sqrt()
    };

    [
        path_loss_db,
        rx_power_dbm,
        delay_spread,
        angular_spread,
        kpi.sinr_eff_db,
        kpi.rate_bpshz,
        kpi.best_beam as f64,
    ]
}

/// True when `p` sits inside solid geometry (or under the ground plane):
/// the first surface straight up is then seen from its back side.
fn point_inside_geometry(scene: &RtScene, p: Vec3) -> bool {
    if scene.mesh.triangles.is_empty() {
        return false;
    }
    let ray = Ray::new(p, Vec3::new(0.0, 0.0, 1.0), 0.0, 1e7);
    match ray_mesh_first_hit(&scene.bvh, &scene.mesh, &ray, &[]) {
        Some(hit) => hit.normal.z > 0.0,
        None => false,
    }
}

fn scene_fingerprint(scene: &RtScene) -> String {
    let mut hasher = Sha256::new();
    let mesh = &scene.mesh;
    hasher.update((mesh.triangles.len() as u64).to_le_bytes());
    for t in 0..mesh.triangles.len() {
        for v in mesh.triangle_vertices(t) {
            hasher.update(v.x.to_le_bytes());
            hasher.update(v.y.to_le_bytes());
            hasher.update(v.z.to_le_bytes());
        }
        hasher.update(scene.material(t).name.as_bytes());
        hasher.update([0u8]);
    }
    hex(&hasher.finalize())
}

fn hex(bytes: &[u8]) -> String {
    let mut s = String::with_capacity(bytes.len() * 2);
    for b in bytes {
        let _ = write!(s, "{b:02x}");
    }
    s
}

/// Canonical digest over the scene and every knob that shapes the map.
pub fn config_digest(scene: &RtScene, job: &CkmJob) -> String {
    let t = job.tx_pose.translation;
    let q = job.tx_pose.rotation;
    let g = &job.grid;
    let text = format!(
        "scene {}\ntx {} {} {} {} {} {} {}\ngrid {} {} {} {} {} {}\n\
         rt {} {} {}\narray {} {} {} {} {} {} {} {} {} {} {}\n\
         ofdm {} {} {} {}\nbler {} {}\n",
        scene_fingerprint(scene),
        t.x, t.y, t.z, q.w, q.x, q.y, q.z,
        g.x0, g.y0, g.n_x, g.n_y, g.cell_m, g.rx_height_m,
        job.rt.carrier_hz, job.rt.max_order, job.rt.tx_power_dbm,
        job.array.n_x, job.array.n_y, job.array.spacing_wavelengths,
        job.array.mount.translation.x, job.array.mount.translation.y,
        job.array.mount.translation.z, job.array.mount.rotation.w,
        job.array.mount.rotation.x, job.array.mount.rotation.y,
        job.array.mount.rotation.z, job.tx_id,
        job.ofdm.n_subcarriers, job.ofdm.subcarrier_spacing_hz,
        job.ofdm.noise_figure_db, job.ofdm.temperature_k,
        job.bler.threshold_db, job.bler.slope_per_db,
    );
    let mut hasher = Sha256::new();
    hasher.update(text.as_bytes());
    hex(&hasher.finalize())
}

/// Evaluates one receiver position against a prebuilt image cache and
/// returns the seven layer values for that cell.
fn scan_cell(
    scene: &RtScene,
    job: &CkmJob,
    cache: &ImageCache,
    book: &DftCodebook,
    array_rotation: crate::Quat,
    cell_index: usize,
) -> [f64; 7] {
    let i = cell_index % job.grid.n_x;
    let j = cell_index / job.grid.n_x;
    let tx = RadioEndpoint::fixed(job.tx_pose.translation);
    let rx = RadioEndpoint::fixed(job.grid.cell_center(i, j));
    let paths = compute_paths_cached(&tx, &rx, scene, &job.rt, cache);
    if paths.is_empty() {
        return [f64::NAN; 7];
    }
    let cir = Cir {
        stamp: SimTime::ZERO,
        tx_id: job.tx_id,
        rx_id: cell_index as u32,
        paths,
    };
    let h = cir_to_cfr(&cir, &job.array, array_rotation, &job.ofdm);
    let kpi = evaluate_link(
        &h,
        book,
        &job.ofdm,
        job.rt.tx_power_dbm,
        &job.bler,
        &[],
        SimTime::ZERO,
        job.tx_id,
        cell_index as u32,
    )
    .expect("cell CFR dimensions are consistent by construction");
    let total: f64 = cir.paths.iter().map(|p| p.amplitude.norm_sqr()).sum();
    let gains = h.beamformed_power(book.weight(kpi.best_beam as usize));
    let mean_gain = gains.iter().sum::<f64>() / gains.len() as f64;
    let beam_gain_db = 10.0 * (mean_gain / total).log10();
    reduce_cell(&cir.paths, &kpi, job.rt.tx_power_dbm, beam_gain_db)
}

/// Scans the grid and assembles the map. Cells are evaluated in parallel
/// and written back by index, so the result does not depend on the worker
/// count or schedule.
pub fn generate_ckm(scene: &RtScene, job: &CkmJob) -> Result<Ckm, CkmError> {
    job.grid.validate()?;
    if point_inside_geometry(scene, job.tx_pose.translation) {
        return Err(CkmError::TxInsideGeometry);
    }
    let book = DftCodebook::new(&job.array)?;
    let array_rotation = job.tx_pose.rotation * job.array.mount.rotation;
    let cache = ImageCache::build(job.tx_pose.translation, scene, job.rt.max_order);

    let rows: Vec<[f64; 7]> = (0..job.grid.cells())
        .into_par_iter()
        .map(|idx| scan_cell(scene, job, &cache, &book, array_rotation, idx))
        .collect();

    let mut layers: Vec<CkmLayer> = LAYER_NAMES
        .iter()
        .map(|&name| CkmLayer {
            name: name.to_string(),
            units: layer_units(name).to_string(),
            n_x: job.grid.n_x,
            n_y: job.grid.n_y,
            values: vec![f64::NAN; job.grid.cells()],
        })
        .collect();
    for (idx, row) in rows.iter().enumerate() {
        for (l, &v) in row.iter().enumerate() {
            layers[l].values[idx] = v;
        }
    }

    Ok(Ckm {
        grid: job.grid,
        tx_pose: job.tx_pose,
        digest: config_digest(scene, job),
        layers,
    })
}

/// Writes one layer raster: an ASCII header line
/// `CKM1 <layer> <n_x> <n_y> <x0> <y0> <cell> <rx_h> <units>` followed by
/// n_x·n_y little-endian float32 values, row-major (x fastest), NaN as
/// nodata.
pub fn write_raster(layer: &CkmLayer, grid: &GridSpec, path: &Path) -> Result<(), CkmError> {
    let mut buf = Vec::with_capacity(96 + 4 * layer.values.len());
    buf.extend_from_slice(
        format!(
            "CKM1 {} {} {} {} {} {} {} {}\n",
            layer.name,
            layer.n_x,
            layer.n_y,
            grid.x0,
            grid.y0,
            grid.cell_m,
            grid.rx_height_m,
            layer.units
        )
        .as_bytes(),
    );
    for &v in &layer.values {
        buf.extend_from_slice(&(v as f32).to_le_bytes());
    }
    fs::write(path, buf).map_err(|e| io_err(path, e))
}

/// Reads a layer raster back; the grid is reconstructed from the header.
pub fn read_raster(path: &Path) -> Result<(GridSpec, CkmLayer), CkmError> {
    let data = fs::read(path).map_err(|e| io_err(path, e))?;
    let newline = data
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| CkmError::BadRaster("missing header line".to_string()))?;
    let header = std::str::from_utf8(&data[..newline])
        .map_err(|_| CkmError::BadRaster("header is not UTF-8".to_string()))?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    if fields.len() != 9 || fields[0] != "CKM1" {
        return Err(CkmError::BadRaster(format!(
            "bad header: {header:?} (want 9 fields starting with CKM1)"
        )));
    }
    let parse_usize = |s: &str, what: &str| {
        s.parse::<usize>()
            .map_err(|_| CkmError::BadRaster(format!("{what}: {s:?} is not an integer")))
    };
    let parse_f64 = |s: &str, what: &str| {
        s.parse::<f64>()
            .map_err(|_| CkmError::BadRaster(format!("{what}: {s:?} is not a number")))
    };
    let n_x = parse_usize(fields[2], "n_x")?;
    let n_y = parse_usize(fields[3], "n_y")?;
    let grid = GridSpec {
        x0: parse_f64(fields[4], "x0")?,
        y0: parse_f64(fields[5], "y0")?,
        n_x,
        n_y,
        cell_m: parse_f64(fields[6], "cell")?,
        rx_height_m: parse_f64(fields[7], "rx_h")?,
    };
    grid.validate()?;
    let payload = &data[newline + 1..];
    if payload.len() != 4 * n_x * n_y {
        return Err(CkmError::BadRaster(format!(
            "payload is {} bytes, want {}",
            payload.len(),
            4 * n_x * n_y
        )));
    }
    let values = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
        .collect();
    Ok((
        grid,
        CkmLayer {
            name: fields[1].to_string(),
            units: fields[8].to_string(),
            n_x,
            n_y,
            values,
        },
    ))
}

/// Five-stop color ramp (deep blue → cyan-blue → green → yellow → red),
/// linearly interpolated; nodata renders black.
const RAMP: [[u8; 3]; 5] = [
    [0, 0, 128],
    [0, 128, 255],
    [0, 255, 0],
    [255, 255, 0],
    [255, 0, 0],
];

fn ramp_color(t: f64) -> [u8; 3] {
    let t = t.clamp(0.0, 1.0) * (RAMP.len() - 1) as f64;
    let seg = (t.floor() as usize).min(RAMP.len() - 2);
    let f = t - seg as f64;
    let lerp = |a: u8, b: u8| (a as f64 + (b as f64 - a as f64) * f).round() as u8;
    [
        lerp(RAMP[seg][0], RAMP[seg + 1][0]),
        lerp(RAMP[seg][1], RAMP[seg + 1][1]),
        lerp(RAMP[seg][2], RAMP[seg + 1][2]),
    ]
}

/// Renders a layer as a binary portable pixmap: linear min→max over finite
/// cells through the five-stop ramp, +y up (row 0 is the highest y).
pub fn write_heatmap(layer: &CkmLayer, path: &Path) -> Result<(), CkmError> {
    let finite: Vec<f64> = layer.values.iter().copied().filter(|v| v.is_finite()).collect();
    let min = finite.iter().copied().fold(f64::INFINITY, f64::min);
    let max = finite.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = max - min;
    let mut buf = format!("P6\n{} {}\n255\n", layer.n_x, layer.n_y).into_bytes();
    for j in (0..layer.n_y).rev() {
        for i in 0..layer.n_x {
            let v = layer.at(i, j);
            let rgb = if !v.is_finite() {
                [0, 0, 0]
            } else if span > 0.0 {
                ramp_color((v - min) / span)
            } else {
                ramp_color(0.0)
            };
            buf.extend_from_slice(&rgb);
        }
    }
    fs::write(path, buf).map_err(|e| io_err(path, e))
}

/// Writes every layer as `<name>.ckm` + `<name>.ppm` under `dir`, plus
/// `digest.txt` carrying the config digest.
pub fn write_outputs(ckm: &Ckm, dir: &Path) -> Result<(), CkmError> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    for layer in &ckm.layers {
        write_raster(layer, &ckm.grid, &dir.join(format!("{}.ckm", layer.name)))?;
        write_heatmap(layer, &dir.join(format!("{}.ppm", layer.name)))?;
    }
    let digest_path = dir.join("digest.txt");
    fs::write(&digest_path, format!("{}\n", ckm.digest)).map_err(|e| io_err(&digest_path, e))
}

/// One cell's values pulled out of every layer.
#[derive(Debug, Clone, PartialEq)]
pub struct CellLookup {
    pub i: usize,
    pub j: usize,
    pub center: Vec3,
    pub values: Vec<(String, f64)>,
}

/// Returns the cell containing (x, y); points exactly on the outer
/// boundary resolve to the nearest cell.
pub fn lookup(ckm: &Ckm, x: f64, y: f64) -> Result<CellLookup, CkmError> {
    let g = &ckm.grid;
    let fx = (x - g.x0) / g.cell_m;
    let fy = (y - g.y0) / g.cell_m;
    if !(0.0..=g.n_x as f64).contains(&fx) || !(0.0..=g.n_y as f64).contains(&fy) {
        return Err(CkmError::OutsideGrid { x, y });
    }
    let i = (fx.floor() as usize).min(g.n_x - 1);
    let j = (fy.floor() as usize).min(g.n_y - 1);
    Ok(CellLookup {
        i,
        j,
        center: g.cell_center(i, j),
        values: ckm
            .layers
            .iter()
            .map(|l| (l.name.clone(), l.at(i, j)))
            .collect(),
    })
}
