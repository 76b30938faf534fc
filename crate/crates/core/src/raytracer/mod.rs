//! Deterministic specular propagation via the image method.
//!
//! For a transmitter and a reflective triangle sequence, mirroring the
//! transmitter across each triangle plane in turn yields an image point;
//! the straight segment from the final image to the receiver unfolds into
//! the true reflected polyline. A path is kept when every reflection point
//! lands inside its triangle, every incident segment approaches its surface
//! from the front, and every leg is unoccluded. Image points depend only on
//! the transmitter, so they are cached once and reused across receivers
//! (grid scans, reciprocity sweeps).

pub mod fresnel;

use num_complex::Complex64;
use thiserror::Error;

use crate::bus::Header;
use crate::scene::{Material, MaterialLibrary, RtMesh, UnknownMaterial};
use crate::timebase::SimTime;
use crate::wire::{put_f64, put_u16, put_u32, put_u8, Reader, WireError};
use crate::{Bvh, Ray, TriangleMesh, Vec3, SPEED_OF_LIGHT};

pub use fresnel::{complex_permittivity, fresnel_gamma};

/// Endpoints must sit strictly in front of a face for it to reflect; also
/// the minimum segment-plane crossing clearance.
const FRONT_EPS: f64 = 1e-9;
/// Clearance shaved off both ends of every occlusion test segment, so
/// reflection points do not shadow their own surfaces.
const OCCLUSION_EPS: f64 = 1e-6;
/// Barycentric slack for the reflection-point-inside-triangle test.
const BARY_EPS: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum RtError {
    #[error("carrier frequency must be positive, got {0}")]
    BadCarrier(f64),
    #[error("reflection order {0} unsupported (max 3)")]
    BadOrder(u32),
    #[error(transparent)]
    UnknownMaterial(#[from] UnknownMaterial),
}

/// Ray-tracing configuration: carrier, maximum reflection order, transmit
/// power. Polarization is fixed (single vertical component).
#[derive(Debug, Clone, PartialEq)]
pub struct RtConfig {
    pub carrier_hz: f64,
    pub max_order: u32,
    pub tx_power_dbm: f64,
}

impl RtConfig {
    pub fn new(carrier_hz: f64, max_order: u32, tx_power_dbm: f64) -> Result<Self, RtError> {
        if !(carrier_hz > 0.0) {
            return Err(RtError::BadCarrier(carrier_hz));
        }
        if max_order > 3 {
            return Err(RtError::BadOrder(max_order));
        }
        Ok(Self {
            carrier_hz,
            max_order,
            tx_power_dbm,
        })
    }

    pub fn wavelength(&self) -> f64 {
        SPEED_OF_LIGHT / self.carrier_hz
    }
}

/// One radio terminal: position and velocity in world coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RadioEndpoint {
    pub position: Vec3,
    pub velocity: Vec3,
}

impl RadioEndpoint {
    pub fn fixed(position: Vec3) -> Self {
        Self {
            position,
            velocity: Vec3::zero(),
        }
    }
}

/// Scene prepared for tracing: mesh, acceleration structure, and per-
/// triangle materials resolved from the library.
#[derive(Debug)]
pub struct RtScene {
    pub mesh: TriangleMesh,
    pub bvh: Bvh,
    tri_materials: Vec<Material>,
}

impl RtScene {
    pub fn new(rtmesh: &RtMesh, library: &MaterialLibrary) -> Result<Self, UnknownMaterial> {
        let tri_materials = (0..rtmesh.mesh.triangles.len())
            .map(|t| library.get(rtmesh.triangle_material(t)).cloned())
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self {
            bvh: Bvh::build(&rtmesh.mesh),
            mesh: rtmesh.mesh.clone(),
            tri_materials,
        })
    }

    /// Free-space scene: no geometry at all.
    pub fn empty() -> Self {
        let mesh = TriangleMesh::new(vec![], vec![], vec![]).expect("empty mesh");
        Self {
            bvh: Bvh::build(&mesh),
            mesh,
            tri_materials: Vec::new(),
        }
    }

    pub fn material(&self, triangle: usize) -> &Material {
        &self.tri_materials[triangle]
    }

    /// Signed distance of `p` to the (right-hand winding) plane of `tri`.
    fn front_distance(&self, tri: usize, p: Vec3) -> f64 {
        let n = self.mesh.triangle_normal(tri);
        let v = self.mesh.triangle_vertices(tri);
        n.dot(p - v[0])
    }

    /// True when the open segment (a, b) is blocked by anything except the
    /// excluded triangles; endpoints get `OCCLUSION_EPS` clearance.
    fn segment_blocked(&self, a: Vec3, b: Vec3, exclude: &[usize]) -> bool {
        let d = b - a;
        let dist = d.norm();
        if dist <= 2.0 * OCCLUSION_EPS {
            return false;
        }
        let ray = Ray::new(a, d / dist, 0.0, dist - OCCLUSION_EPS);
        self.bvh.is_occluded(&self.mesh, &ray, exclude)
    }
}

/// Path class: direct line of sight or a k-th order specular reflection.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PathKind {
    Los,
    Reflection(u32),
}

impl PathKind {
    pub fn order(&self) -> u32 {
        match self {
            PathKind::Los => 0,
            PathKind::Reflection(k) => *k,
        }
    }
}

/// One propagation path between a TX/RX pair.
#[derive(Debug, Clone, PartialEq)]
pub struct PropPath {
    pub kind: PathKind,
    /// Polyline: TX point, interaction points, RX point.
    pub vertices: Vec<Vec3>,
    /// Reflecting triangle indices, in traversal order.
    pub triangles: Vec<u32>,
    /// Total polyline length (m).
    pub length: f64,
    /// Propagation delay τ = L/c (s).
    pub delay: f64,
    /// Complex amplitude a = (λ/4πL)·ΠΓᵢ·e^{−j2πfτ}.
    pub amplitude: Complex64,
    /// Unit departure direction at the TX.
    pub dep_dir: Vec3,
    /// Unit direction of propagation arriving at the RX.
    pub arr_dir: Vec3,
    /// Doppler shift f_D = (f/c)(û_dep·v_tx − û_arr·v_rx) (Hz).
    pub doppler_hz: f64,
}

/// Channel impulse response: all surviving paths of one (tx, rx, stamp)
/// evaluation, delay-sorted. An empty path list marks an outage.
#[derive(Debug, Clone, PartialEq)]
pub struct Cir {
    pub stamp: SimTime,
    pub tx_id: u32,
    pub rx_id: u32,
    pub paths: Vec<PropPath>,
}

// ============================================================================
// Image cache
// ============================================================================

/// A mirrored-transmitter candidate: the triangle sequence and the chain of
/// image points (image k = TX mirrored across the first k planes).
#[derive(Debug, Clone, Copy)]
struct Candidate {
    order: u8,
    tris: [u32; 3],
    images: [Vec3; 3],
}

/// All receiver-independent mirror work for one TX position: reused across
/// every receiver in a grid scan.
#[derive(Debug)]
pub struct ImageCache {
    tx_position: Vec3,
    max_order: u32,
    candidates: Vec<Candidate>,
}

impl ImageCache {
    /// Enumerates reflective triangle sequences up to `max_order`, pruning
    /// sequences whose running image falls behind the next plane (such a
    /// reflection cannot illuminate the front side) and immediate repeats
    /// of the same triangle.
    pub fn build(tx_position: Vec3, scene: &RtScene, max_order: u32) -> Self {
        let n = scene.mesh.triangles.len();
        let mut candidates = Vec::new();
        if max_order >= 1 {
            for i in 0..n {
                if scene.front_distance(i, tx_position) <= FRONT_EPS {
                    continue;
                }
                let img1 = mirror(scene, i, tx_position);
                candidates.push(Candidate {
                    order: 1,
                    tris: [i as u32, 0, 0],
                    images: [img1, Vec3::zero(), Vec3::zero()],
                });
                if max_order < 2 {
                    continue;
                }
                for j in 0..n {
                    if j == i || scene.front_distance(j, img1) <= FRONT_EPS {
                        continue;
                    }
                    let img2 = mirror(scene, j, img1);
                    candidates.push(Candidate {
                        order: 2,
                        tris: [i as u32, j as u32, 0],
                        images: [img1, img2, Vec3::zero()],
                    });
                    if max_order < 3 {
                        continue;
                    }
                    for l in 0..n {
                        if l == j || scene.front_distance(l, img2) <= FRONT_EPS {
                            continue;
                        }
                        let img3 = mirror(scene, l, img2);
                        candidates.push(Candidate {
                            order: 3,
                            tris: [i as u32, j as u32, l as u32],
                            images: [img1, img2, img3],
                        });
                    }
                }
            }
        }
        Self {
            tx_position,
            max_order,
            candidates,
        }
    }

    pub fn candidate_count(&self) -> usize {
        self.candidates.len()
    }
}

fn mirror(scene: &RtScene, tri: usize, p: Vec3) -> Vec3 {
    let n = scene.mesh.triangle_normal(tri);
    let v0 = scene.mesh.triangle_vertices(tri)[0];
    p - n * (2.0 * n.dot(p - v0))
}

/// Where the segment (a, b) crosses the plane of `tri` strictly between its
/// endpoints and inside the triangle; `a` must be behind, `b` in front.
fn segment_triangle_crossing(scene: &RtScene, tri: usize, a: Vec3, b: Vec3) -> Option<Vec3> {
    let da = scene.front_distance(tri, a);
    let db = scene.front_distance(tri, b);
    if !(da < -FRONT_EPS && db > FRONT_EPS) {
        return None;
    }
    let t = da / (da - db);
    let p = a + (b - a) * t;
    // Barycentric containment in the triangle's own plane.
    let v = scene.mesh.triangle_vertices(tri);
    let (e0, e1, ep) = (v[1] - v[0], v[2] - v[0], p - v[0]);
    let (d00, d01, d11) = (e0.dot(e0), e0.dot(e1), e1.dot(e1));
    let (dp0, dp1) = (ep.dot(e0), ep.dot(e1));
    let denom = d00 * d11 - d01 * d01;
    if denom.abs() < 1e-18 {
        return None;
    }
    let u = (d11 * dp0 - d01 * dp1) / denom;
    let w = (d00 * dp1 - d01 * dp0) / denom;
    if u >= -BARY_EPS && w >= -BARY_EPS && u + w <= 1.0 + BARY_EPS {
        Some(p)
    } else {
        None
    }
}

// ============================================================================
// Path computation
// ============================================================================

/// Enumerates all propagation paths for one TX/RX pair, building the image
/// cache on the fly. For many receivers against a fixed TX, build the cache
/// once and call [`compute_paths_cached`].
pub fn compute_paths(
    tx: &RadioEndpoint,
    rx: &RadioEndpoint,
    scene: &RtScene,
    cfg: &RtConfig,
) -> Vec<PropPath> {
    let cache = ImageCache::build(tx.position, scene, cfg.max_order);
    compute_paths_cached(tx, rx, scene, cfg, &cache)
}

/// Validates every cached candidate against one receiver and assembles the
/// surviving paths, delay-sorted.
pub fn compute_paths_cached(
    tx: &RadioEndpoint,
    rx: &RadioEndpoint,
    scene: &RtScene,
    cfg: &RtConfig,
    cache: &ImageCache,
) -> Vec<PropPath> {
    assert_eq!(
        cache.tx_position, tx.position,
        "image cache built for a different TX position"
    );
    assert!(cache.max_order >= cfg.max_order, "cache order too low");
    let mut paths = Vec::new();

    // Line of sight.
    if !scene.segment_blocked(tx.position, rx.position, &[]) {
        if let Some(path) = finish_path(tx, rx, cfg, PathKind::Los, vec![], vec![]) {
            paths.push(path);
        }
    }

    for cand in &cache.candidates {
        let order = cand.order as usize;
        if cand.order as u32 > cfg.max_order {
            continue;
        }
        if let Some(points) = backtrack(scene, cand, rx.position) {
            // Occlusion along every leg, excluding the reflecting faces at
            // each end of the leg.
            let tris: Vec<u32> = cand.tris[..order].to_vec();
            let mut chain = Vec::with_capacity(order + 2);
            chain.push(tx.position);
            chain.extend_from_slice(&points);
            chain.push(rx.position);
            let mut blocked = false;
            for leg in 0..chain.len() - 1 {
                let mut exclude = Vec::with_capacity(2);
                if leg > 0 {
                    exclude.push(tris[leg - 1] as usize);
                }
                if leg < tris.len() {
                    exclude.push(tris[leg] as usize);
                }
                if scene.segment_blocked(chain[leg], chain[leg + 1], &exclude) {
                    blocked = true;
                    break;
                }
            }
            if blocked {
                continue;
            }
            if let Some(path) = finish_path(
                tx,
                rx,
                cfg,
                PathKind::Reflection(cand.order as u32),
                points,
                tris,
            ) {
                let gamma = reflection_product(scene, cfg, &path);
                let mut path = path;
                path.amplitude *= gamma;
                if path.amplitude.norm() > 0.0 {
                    paths.push(path);
                }
            }
        }
    }

    paths.sort_by(|a, b| {
        a.delay
            .total_cmp(&b.delay)
            .then(a.kind.order().cmp(&b.kind.order()))
            .then(a.triangles.cmp(&b.triangles))
    });
    paths
}

/// Walks the image chain backward from the receiver, producing the
/// interaction points in traversal order, or None when any reflection point
/// leaves its triangle or approaches from behind.
fn backtrack(scene: &RtScene, cand: &Candidate, rx: Vec3) -> Option<Vec<Vec3>> {
    let order = cand.order as usize;
    let mut points = vec![Vec3::zero(); order];
    let mut q = rx;
    for k in (0..order).rev() {
        let tri = cand.tris[k] as usize;
        let p = segment_triangle_crossing(scene, tri, cand.images[k], q)?;
        points[k] = p;
        q = p;
    }
    Some(points)
}

/// Assembles geometry-derived fields; the Fresnel product is applied by the
/// caller (it needs the finished vertex chain).
fn finish_path(
    tx: &RadioEndpoint,
    rx: &RadioEndpoint,
    cfg: &RtConfig,
    kind: PathKind,
    interactions: Vec<Vec3>,
    triangles: Vec<u32>,
) -> Option<PropPath> {
    let mut vertices = Vec::with_capacity(interactions.len() + 2);
    vertices.push(tx.position);
    vertices.extend_from_slice(&interactions);
    vertices.push(rx.position);
    let mut length = 0.0;
    for w in vertices.windows(2) {
        length += (w[1] - w[0]).norm();
    }
    if length < OCCLUSION_EPS {
        return None;
    }
    let dep_dir = (vertices[1] - vertices[0]).try_normalized()?;
    let n = vertices.len();
    let arr_dir = (vertices[n - 1] - vertices[n - 2]).try_normalized()?;
    let delay = length / SPEED_OF_LIGHT;
    let lambda = cfg.wavelength();
    let phase = -std::f64::consts::TAU * cfg.carrier_hz * delay;
    let amplitude = Complex64::from_polar(lambda / (4.0 * std::f64::consts::PI * length), phase);
    let doppler_hz =
        cfg.carrier_hz / SPEED_OF_LIGHT * (dep_dir.dot(tx.velocity) - arr_dir.dot(rx.velocity));
    Some(PropPath {
        kind,
        vertices,
        triangles,
        length,
        delay,
        amplitude,
        dep_dir,
        arr_dir,
        doppler_hz,
    })
}

/// Product of Fresnel coefficients along a reflected path.
fn reflection_product(scene: &RtScene, cfg: &RtConfig, path: &PropPath) -> Complex64 {
    let mut gamma = Complex64::new(1.0, 0.0);
    for (k, &tri) in path.triangles.iter().enumerate() {
        let incident = (path.vertices[k + 1] - path.vertices[k]).normalized();
        let normal = scene.mesh.triangle_normal(tri as usize);
        let cos_i = incident.dot(normal).abs().min(1.0);
        let theta_i = cos_i.acos().min(std::f64::consts::FRAC_PI_2 - 1e-12);
        gamma *= fresnel_gamma(scene.material(tri as usize), theta_i, cfg.carrier_hz);
    }
    gamma
}

/// Doppler shift of a path given its unit directions and terminal
/// velocities: f_D = (f/c)(û_dep·v_tx − û_arr·v_rx).
pub fn path_doppler(dep_dir: Vec3, arr_dir: Vec3, v_tx: Vec3, v_rx: Vec3, f: f64) -> f64 {
    f / SPEED_OF_LIGHT * (dep_dir.dot(v_tx) - arr_dir.dot(v_rx))
}

/// Wraps a path list into a delay-sorted [`Cir`].
pub fn assemble_cir(mut paths: Vec<PropPath>, stamp: SimTime, tx_id: u32, rx_id: u32) -> Cir {
    paths.sort_by(|a, b| {
        a.delay
            .total_cmp(&b.delay)
            .then(a.kind.order().cmp(&b.kind.order()))
            .then(a.triangles.cmp(&b.triangles))
    });
    Cir {
        stamp,
        tx_id,
        rx_id,
        paths,
    }
}

// ============================================================================
// Wire codec
// ============================================================================

fn put_vec3(buf: &mut Vec<u8>, v: Vec3) {
    put_f64(buf, v.x);
    put_f64(buf, v.y);
    put_f64(buf, v.z);
}

fn get_vec3(r: &mut Reader, what: &'static str) -> Result<Vec3, WireError> {
    Ok(Vec3::new(r.f64(what)?, r.f64(what)?, r.f64(what)?))
}

impl Cir {
    /// Bus frame and payload for `/channel/cir`.
    pub fn header(&self, frame_id: &str) -> Header {
        Header {
            stamp: self.stamp,
            frame_id: frame_id.to_string(),
        }
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        put_u32(&mut buf, self.tx_id);
        put_u32(&mut buf, self.rx_id);
        put_u16(&mut buf, self.paths.len() as u16);
        for p in &self.paths {
            put_u8(&mut buf, p.kind.order() as u8);
            put_u16(&mut buf, p.vertices.len() as u16);
            for &v in &p.vertices {
                put_vec3(&mut buf, v);
            }
            put_u16(&mut buf, p.triangles.len() as u16);
            for &t in &p.triangles {
                put_u32(&mut buf, t);
            }
            put_f64(&mut buf, p.length);
            put_f64(&mut buf, p.delay);
            put_f64(&mut buf, p.amplitude.re);
            put_f64(&mut buf, p.amplitude.im);
            put_vec3(&mut buf, p.dep_dir);
            put_vec3(&mut buf, p.arr_dir);
            put_f64(&mut buf, p.doppler_hz);
        }
        buf
    }

    pub fn decode(stamp: SimTime, payload: &[u8]) -> Result<Self, WireError> {
        let mut r = Reader::new(payload);
        let tx_id = r.u32("tx_id")?;
        let rx_id = r.u32("rx_id")?;
        let n_paths = r.u16("path count")? as usize;
        let mut paths = Vec::with_capacity(n_paths);
        for _ in 0..n_paths {
            let order = r.u8("path order")? as u32;
            let kind = if order == 0 {
                PathKind::Los
            } else {
                PathKind::Reflection(order)
            };
            let n_vertices = r.u16("vertex count")? as usize;
            let mut vertices = Vec::with_capacity(n_vertices);
            for _ in 0..n_vertices {
                vertices.push(get_vec3(&mut r, "path vertex")?);
            }
            let n_tris = r.u16("triangle count")? as usize;
            let mut triangles = Vec::with_capacity(n_tris);
            for _ in 0..n_tris {
                triangles.push(r.u32("triangle index")?);
            }
            let length = r.f64("length")?;
            let delay = r.f64("delay")?;
            let amplitude = Complex64::new(r.f64("amplitude re")?, r.f64("amplitude im")?);
            let dep_dir = get_vec3(&mut r, "departure direction")?;
            let arr_dir = get_vec3(&mut r, "arrival direction")?;
            let doppler_hz = r.f64("doppler")?;
            paths.push(PropPath {
                kind,
                vertices,
                triangles,
                length,
                delay,
                amplitude,
                dep_dir,
                arr_dir,
                doppler_hz,
            });
        }
        r.finish()?;
        Ok(Self {
            stamp,
            tx_id,
            rx_id,
            paths,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prng::SplitMix64;
    use crate::scene::{synth, MaterialLibrary, SceneObject};

    fn cfg(k: u32) -> RtConfig {
        RtConfig::new(3.5e9, k, 30.0).unwrap()
    }

    fn friis_db(d: f64, lambda: f64) -> f64 {
        20.0 * (4.0 * std::f64::consts::PI * d / lambda).log10()
    }

    /// Big ground plane on z=0 (two triangles), all one material.
    fn ground_scene(material: &str) -> RtScene {
        let half = 10_000.0;
        let mesh = TriangleMesh::new(
            vec![
                Vec3::new(-half, -half, 0.0),
                Vec3::new(half, -half, 0.0),
                Vec3::new(half, half, 0.0),
                Vec3::new(-half, half, 0.0),
            ],
            vec![[0, 1, 2], [0, 2, 3]],
            vec![0, 0],
        )
        .unwrap();
        let rtmesh = RtMesh {
            origin: Vec3::zero(),
            mesh,
            objects: vec![SceneObject {
                name: "ground".into(),
                class: "ground".into(),
                material: material.into(),
            }],
        };
        RtScene::new(&rtmesh, &MaterialLibrary::standard()).unwrap()
    }

    #[test]
    fn free_space_has_one_los_path_matching_friis() {
        let scene = RtScene::empty();
        let c = cfg(2);
        for d in [50.0, 100.0, 500.0] {
            let tx = RadioEndpoint::fixed(Vec3::zero());
            let rx = RadioEndpoint::fixed(Vec3::new(d, 0.0, 0.0));
            let paths = compute_paths(&tx, &rx, &scene, &c);
            assert_eq!(paths.len(), 1);
            let p = &paths[0];
            assert_eq!(p.kind, PathKind::Los);
            assert!((p.length - d).abs() < 1e-9);
            assert!((p.delay - d / SPEED_OF_LIGHT).abs() < 1e-18);
            let pl_db = -20.0 * p.amplitude.norm().log10();
            assert!(
                (pl_db - friis_db(d, c.wavelength())).abs() < 0.01,
                "d={d}: {pl_db}"
            );
        }
        // Pinned: 100 m at 3.5 GHz.
        let tx = RadioEndpoint::fixed(Vec3::zero());
        let rx = RadioEndpoint::fixed(Vec3::new(100.0, 0.0, 0.0));
        let p = &compute_paths(&tx, &rx, &scene, &c)[0];
        assert!((p.delay - 333.564e-9).abs() < 1e-12);
        assert!((-20.0 * p.amplitude.norm().log10() - 83.33).abs() < 0.01);
    }

    #[test]
    fn two_ray_ground_geometry() {
        let scene = ground_scene("medium_dry_ground");
        let tx = RadioEndpoint::fixed(Vec3::new(0.0, 0.0, 10.0));
        let rx = RadioEndpoint::fixed(Vec3::new(100.0, 0.0, 2.0));
        let paths = compute_paths(&tx, &rx, &scene, &cfg(1));
        assert_eq!(paths.len(), 2, "want LOS + ground bounce");

        let los_len = (100.0f64.powi(2) + 8.0f64.powi(2)).sqrt();
        let ref_len = (100.0f64.powi(2) + 12.0f64.powi(2)).sqrt();
        assert_eq!(paths[0].kind, PathKind::Los);
        assert!((paths[0].length - los_len).abs() < 1e-6);
        assert_eq!(paths[1].kind, PathKind::Reflection(1));
        assert!((paths[1].length - ref_len).abs() < 1e-6);

        // Delay gap 1.327 ns within a picosecond.
        let gap = paths[1].delay - paths[0].delay;
        assert!((gap - (ref_len - los_len) / SPEED_OF_LIGHT).abs() < 1e-15);
        assert!((gap - 1.327e-9).abs() < 1e-12, "gap {gap}");

        // Bounce point at x = 100·h_tx/(h_tx+h_rx).
        let bounce = paths[1].vertices[1];
        assert!((bounce - Vec3::new(1000.0 / 12.0, 0.0, 0.0)).norm() < 1e-6);

        // Reflection only attenuates.
        let lambda = cfg(1).wavelength();
        let free = lambda / (4.0 * std::f64::consts::PI * paths[1].length);
        assert!(paths[1].amplitude.norm() < free);
        assert!(paths[1].amplitude.norm() > 0.0);
    }

    #[test]
    fn wall_blocks_los_entirely_at_order_zero() {
        // Wall between TX and RX, big enough to cover every path.
        let mesh = TriangleMesh::new(
            vec![
                Vec3::new(5.0, -50.0, -50.0),
                Vec3::new(5.0, 50.0, -50.0),
                Vec3::new(5.0, 50.0, 50.0),
                Vec3::new(5.0, -50.0, 50.0),
            ],
            vec![[0, 1, 2], [0, 2, 3]],
            vec![0, 0],
        )
        .unwrap();
        let rtmesh = RtMesh {
            origin: Vec3::zero(),
            mesh,
            objects: vec![SceneObject {
                name: "wall".into(),
                class: "building".into(),
                material: "concrete".into(),
            }],
        };
        let scene = RtScene::new(&rtmesh, &MaterialLibrary::standard()).unwrap();
        let tx = RadioEndpoint::fixed(Vec3::new(0.0, 0.0, 0.0));
        let rx = RadioEndpoint::fixed(Vec3::new(10.0, 0.0, 0.0));
        let paths = compute_paths(&tx, &rx, &scene, &cfg(0));
        assert!(paths.is_empty());
    }

    /// Brute-force mirror enumeration with no pruning: the validation
    /// oracle for the cached image method.
    fn enumerate_paths_naive(
        tx: Vec3,
        rx: Vec3,
        scene: &RtScene,
        max_order: usize,
    ) -> Vec<Vec<u32>> {
        let n = scene.mesh.triangles.len();
        let mut found = Vec::new();
        if !scene.segment_blocked(tx, rx, &[]) {
            found.push(vec![]);
        }
        let mut sequences: Vec<Vec<usize>> = vec![vec![]];
        for _ in 0..max_order {
            let mut next = Vec::new();
            for seq in &sequences {
                for t in 0..n {
                    let mut s = seq.clone();
                    s.push(t);
                    next.push(s);
                }
            }
            for seq in &next {
                if let Some(points) = validate_naive(tx, rx, scene, seq) {
                    let mut chain = vec![tx];
                    chain.extend_from_slice(&points);
                    chain.push(rx);
                    let mut ok = true;
                    for leg in 0..chain.len() - 1 {
                        let mut exclude = Vec::new();
                        if leg > 0 {
                            exclude.push(seq[leg - 1]);
                        }
                        if leg < seq.len() {
                            exclude.push(seq[leg]);
                        }
                        if scene.segment_blocked(chain[leg], chain[leg + 1], &exclude) {
                            ok = false;
                            break;
                        }
                    }
                    if ok {
                        found.push(seq.iter().map(|&t| t as u32).collect());
                    }
                }
            }
            sequences = next;
        }
        found.sort();
        found
    }

    fn validate_naive(tx: Vec3, rx: Vec3, scene: &RtScene, seq: &[usize]) -> Option<Vec<Vec3>> {
        // Forward images with the front-side requirement at every mirror.
        let mut images = vec![tx];
        for &t in seq {
            let prev = *images.last().unwrap();
            if scene.front_distance(t, prev) <= FRONT_EPS {
                return None;
            }
            images.push(mirror(scene, t, prev));
        }
        // Backward walk.
        let mut points = vec![Vec3::zero(); seq.len()];
        let mut q = rx;
        for k in (0..seq.len()).rev() {
            let p = segment_triangle_crossing(scene, seq[k], images[k + 1], q)?;
            points[k] = p;
            q = p;
        }
        Some(points)
    }

    #[test]
    fn corridor_matches_exhaustive_enumeration() {
        // Two parallel walls: 4 triangles, K=2 → up to double bounces.
        let mesh = TriangleMesh::new(
            vec![
                // south wall (normal +y)
                Vec3::new(-30.0, -5.0, 0.0),
                Vec3::new(30.0, -5.0, 0.0),
                Vec3::new(30.0, -5.0, 10.0),
                Vec3::new(-30.0, -5.0, 10.0),
                // north wall (normal −y)
                Vec3::new(-30.0, 5.0, 0.0),
                Vec3::new(30.0, 5.0, 0.0),
                Vec3::new(30.0, 5.0, 10.0),
                Vec3::new(-30.0, 5.0, 10.0),
            ],
            vec![[0, 2, 1], [0, 3, 2], [4, 5, 6], [4, 6, 7]],
            vec![0, 0, 1, 1],
        )
        .unwrap();
        let rtmesh = RtMesh {
            origin: Vec3::zero(),
            mesh,
            objects: vec![
                SceneObject {
                    name: "south".into(),
                    class: "building".into(),
                    material: "concrete".into(),
                },
                SceneObject {
                    name: "north".into(),
                    class: "building".into(),
                    material: "concrete".into(),
                },
            ],
        };
        let scene = RtScene::new(&rtmesh, &MaterialLibrary::standard()).unwrap();
        let tx = RadioEndpoint::fixed(Vec3::new(-10.0, -1.0, 5.0));
        let rx = RadioEndpoint::fixed(Vec3::new(12.0, 2.0, 5.0));
        let paths = compute_paths(&tx, &rx, &scene, &cfg(2));
        let mut got: Vec<Vec<u32>> = paths.iter().map(|p| p.triangles.clone()).collect();
        got.sort();
        let oracle = enumerate_paths_naive(tx.position, rx.position, &scene, 2);
        assert_eq!(got, oracle);
        // LOS + 2 single bounces + 2 double bounces in an open corridor.
        assert_eq!(paths.len(), 5, "{paths:#?}");
    }

    #[test]
    fn reciprocity_in_the_demo_scene() {
        let asset = synth::demo_city_asset().unwrap();
        let rtmesh = crate::scene::simplify_mesh(&asset, &Default::default()).unwrap();
        let scene = RtScene::new(&rtmesh, &MaterialLibrary::standard()).unwrap();
        let c = cfg(2);
        let mut rng = SplitMix64::substream(11, "reciprocity");
        let mut checked = 0;
        for _ in 0..10 {
            let a = RadioEndpoint::fixed(Vec3::new(
                rng.uniform(-90.0, 90.0),
                rng.uniform(-90.0, 90.0),
                rng.uniform(1.5, 40.0),
            ));
            let b = RadioEndpoint::fixed(Vec3::new(
                rng.uniform(-90.0, 90.0),
                rng.uniform(-90.0, 90.0),
                rng.uniform(1.5, 40.0),
            ));
            let fwd = compute_paths(&a, &b, &scene, &c);
            let rev = compute_paths(&b, &a, &scene, &c);
            assert_eq!(fwd.len(), rev.len());
            let mut f: Vec<(Vec<u32>, f64, f64)> = fwd
                .iter()
                .map(|p| (p.triangles.clone(), p.length, p.amplitude.norm()))
                .collect();
            let mut r: Vec<(Vec<u32>, f64, f64)> = rev
                .iter()
                .map(|p| {
                    let mut t = p.triangles.clone();
                    t.reverse();
                    (t, p.length, p.amplitude.norm())
                })
                .collect();
            f.sort_by(|x, y| x.0.cmp(&y.0));
            r.sort_by(|x, y| x.0.cmp(&y.0));
            for (pf, pr) in f.iter().zip(&r) {
                assert_eq!(pf.0, pr.0);
                assert!((pf.1 - pr.1).abs() <= 1e-9 * pf.1.max(1.0));
                assert!((pf.2 - pr.2).abs() <= 1e-9 * pf.2.max(1e-12));
                checked += 1;
            }
        }
        assert!(checked > 10, "too few paths exercised: {checked}");
    }

    #[test]
    fn doppler_shift_examples() {
        let f = 3.5e9;
        let dir = Vec3::new(1.0, 0.0, 0.0);
        assert_eq!(path_doppler(dir, dir, Vec3::zero(), Vec3::zero(), f), 0.0);
        // RX closing on the TX radially at 10 m/s: +v/λ.
        let v_rx = Vec3::new(-10.0, 0.0, 0.0);
        let fd = path_doppler(dir, dir, Vec3::zero(), v_rx, f);
        assert!((fd - 116.7477).abs() < 1e-3, "{fd}");
        let fd_back = path_doppler(dir, dir, Vec3::zero(), v_rx * -1.0, f);
        assert!((fd + fd_back).abs() < 1e-12);
        // Same number out of compute_paths.
        let scene = RtScene::empty();
        let tx = RadioEndpoint::fixed(Vec3::zero());
        let rx = RadioEndpoint {
            position: Vec3::new(100.0, 0.0, 0.0),
            velocity: v_rx,
        };
        let p = &compute_paths(&tx, &rx, &scene, &cfg(0))[0];
        assert!((p.doppler_hz - fd).abs() < 1e-9);
    }

    #[test]
    fn translation_invariance() {
        let scene_a = ground_scene("concrete");
        let tx = RadioEndpoint::fixed(Vec3::new(3.0, -2.0, 12.0));
        let rx = RadioEndpoint::fixed(Vec3::new(80.0, 14.0, 3.0));
        let base = compute_paths(&tx, &rx, &scene_a, &cfg(1));

        // Same scene rigidly translated along the plane, endpoints moved
        // with it: identical lengths and magnitudes.
        let shift = Vec3::new(500.0, -250.0, 0.0);
        let tx2 = RadioEndpoint::fixed(tx.position + shift);
        let rx2 = RadioEndpoint::fixed(rx.position + shift);
        let moved = compute_paths(&tx2, &rx2, &scene_a, &cfg(1));
        assert_eq!(base.len(), moved.len());
        for (a, b) in base.iter().zip(&moved) {
            assert!((a.length - b.length).abs() < 1e-9);
            assert!((a.amplitude.norm() - b.amplitude.norm()).abs() < 1e-12);
        }
    }

    #[test]
    fn reflections_never_beat_free_space_of_equal_length() {
        let scene = ground_scene("metal");
        let tx = RadioEndpoint::fixed(Vec3::new(0.0, 0.0, 30.0));
        let c = cfg(1);
        let lambda = c.wavelength();
        let mut rng = SplitMix64::substream(5, "energy-ordering");
        for _ in 0..50 {
            let rx = RadioEndpoint::fixed(Vec3::new(
                rng.uniform(-200.0, 200.0),
                rng.uniform(-200.0, 200.0),
                rng.uniform(0.5, 60.0),
            ));
            for p in compute_paths(&tx, &rx, &scene, &c) {
                let free = lambda / (4.0 * std::f64::consts::PI * p.length);
                match p.kind {
                    PathKind::Los => assert!((p.amplitude.norm() - free).abs() < 1e-15),
                    PathKind::Reflection(_) => assert!(p.amplitude.norm() < free),
                }
            }
        }
    }

    #[test]
    fn assemble_cir_sorts_and_round_trips() {
        let scene = ground_scene("medium_dry_ground");
        let tx = RadioEndpoint::fixed(Vec3::new(0.0, 0.0, 10.0));
        let rx = RadioEndpoint {
            position: Vec3::new(100.0, 5.0, 2.0),
            velocity: Vec3::new(-3.0, 1.0, 0.0),
        };
        let mut paths = compute_paths(&tx, &rx, &scene, &cfg(1));
        paths.reverse(); // deliberately unsorted input
        let cir = assemble_cir(paths, SimTime::from_millis(250), 1, 2);
        assert!(cir.paths.windows(2).all(|w| w[0].delay <= w[1].delay));

        let bytes = cir.encode();
        let back = Cir::decode(cir.stamp, &bytes).unwrap();
        assert_eq!(back, cir);

        // Empty CIR is a valid outage marker.
        let empty = assemble_cir(vec![], SimTime::ZERO, 1, 2);
        let back = Cir::decode(empty.stamp, &empty.encode()).unwrap();
        assert!(back.paths.is_empty());
    }

    #[test]
    fn image_cache_is_reused_across_receivers() {
        let scene = ground_scene("concrete");
        let tx = RadioEndpoint::fixed(Vec3::new(0.0, 0.0, 10.0));
        let c = cfg(1);
        let cache = ImageCache::build(tx.position, &scene, c.max_order);
        assert!(cache.candidate_count() >= 2);
        for x in [20.0, 50.0, 120.0] {
            let rx = RadioEndpoint::fixed(Vec3::new(x, 0.0, 2.0));
            let cached = compute_paths_cached(&tx, &rx, &scene, &c, &cache);
            let fresh = compute_paths(&tx, &rx, &scene, &c);
            assert_eq!(cached, fresh);
        }
    }

    #[test]
    fn doppler_is_zero_for_static_terminals_in_scene_paths() {
        let scene = ground_scene("concrete");
        let tx = RadioEndpoint::fixed(Vec3::new(0.0, 0.0, 10.0));
        let rx = RadioEndpoint::fixed(Vec3::new(50.0, 0.0, 2.0));
        for p in compute_paths(&tx, &rx, &scene, &cfg(1)) {
            assert_eq!(p.doppler_hz, 0.0);
        }
        // And dep/arr are unit.
        for p in compute_paths(&tx, &rx, &scene, &cfg(1)) {
            assert!(p.dep_dir.is_unit());
            assert!(p.arr_dir.is_unit());
        }
    }
}
