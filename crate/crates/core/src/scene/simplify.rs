//! Propagation-mesh simplification.
//!
//! Three stages: (1) drop whole objects tagged with a detail class or whose
//! total area falls under a size threshold; (2) quadric-error-metric edge
//! collapse per object down to a triangle budget, never collapsing edges
//! whose dihedral angle exceeds the sharp-edge limit and only sliding
//! boundary vertices along straight boundary chains; (3) materials carry
//! over from the source objects. Collapses reuse existing vertex positions
//! (subset placement), so every surviving vertex is an original one.

use std::cmp::Ordering;
use std::collections::{BTreeSet, BinaryHeap};

use rayon::prelude::*;

use crate::{TriangleMesh, Vec3};

use super::{RtMesh, SceneAsset, SceneError, DEFAULT_DETAIL_CLASSES};

#[derive(Debug, Clone)]
pub struct SimplifyConfig {
    /// Objects with total surface area below this (m²) are removed.
    pub size_threshold: f64,
    /// Per-object triangle budget as a fraction of the post-filter count.
    pub ratio: f64,
    /// Edges folded more than this (degrees, angle between face normals)
    /// are never collapsed.
    pub sharp_angle_deg: f64,
    /// Object classes removed outright.
    pub detail_classes: Vec<String>,
}

impl Default for SimplifyConfig {
    fn default() -> Self {
        Self {
            size_threshold: 1.0,
            ratio: 0.1,
            sharp_angle_deg: 40.0,
            detail_classes: DEFAULT_DETAIL_CLASSES.iter().map(|s| s.to_string()).collect(),
        }
    }
}

pub fn simplify_mesh(asset: &SceneAsset, config: &SimplifyConfig) -> Result<RtMesh, SceneError> {
    if !(config.ratio > 0.0 && config.ratio <= 1.0) {
        return Err(SceneError::BadRatio(config.ratio));
    }

    // Stage 1: object filter.
    let mut keep: Vec<usize> = Vec::new();
    for (i, obj) in asset.objects.iter().enumerate() {
        if config.detail_classes.iter().any(|c| *c == obj.class) {
            continue;
        }
        let area: f64 = (0..asset.mesh.triangles.len())
            .filter(|&t| asset.mesh.object_ids[t] as usize == i)
            .map(|t| asset.mesh.triangle_area(t))
            .sum();
        if area < config.size_threshold {
            continue;
        }
        keep.push(i);
    }

    // Ratio 1.0 with nothing filtered is the identity.
    if config.ratio >= 1.0 && keep.len() == asset.objects.len() {
        return Ok(RtMesh {
            origin: asset.origin,
            mesh: asset.mesh.clone(),
            objects: asset.objects.clone(),
        });
    }

    // Stage 2: per-object decimation (objects share no state).
    let submeshes: Vec<(Vec<Vec3>, Vec<[u32; 3]>)> = keep
        .par_iter()
        .map(|&obj_id| {
            let (positions, faces) = extract_object(&asset.mesh, obj_id);
            if config.ratio >= 1.0 {
                return (positions, faces);
            }
            let target = ((config.ratio * faces.len() as f64).floor() as usize).max(2);
            decimate(positions, faces, target, config.sharp_angle_deg)
        })
        .collect();

    // Stage 3: reassemble with inherited materials.
    let mut vertices = Vec::new();
    let mut triangles = Vec::new();
    let mut object_ids = Vec::new();
    let mut objects = Vec::new();
    for (new_id, (&old_id, (positions, faces))) in keep.iter().zip(&submeshes).enumerate() {
        let base = vertices.len() as u32;
        vertices.extend_from_slice(positions);
        for &[a, b, c] in faces {
            triangles.push([base + a, base + b, base + c]);
            object_ids.push(new_id as u32);
        }
        objects.push(asset.objects[old_id].clone());
    }
    let mesh = TriangleMesh::new(vertices, triangles, object_ids).map_err(SceneError::Mesh)?;
    Ok(RtMesh {
        origin: asset.origin,
        mesh,
        objects,
    })
}

/// Pulls one object out as an independent submesh, preserving vertex order.
fn extract_object(mesh: &TriangleMesh, obj_id: usize) -> (Vec<Vec3>, Vec<[u32; 3]>) {
    let tri_ids: Vec<usize> = (0..mesh.triangles.len())
        .filter(|&t| mesh.object_ids[t] as usize == obj_id)
        .collect();
    let mut used: Vec<u32> = tri_ids.iter().flat_map(|&t| mesh.triangles[t]).collect();
    used.sort_unstable();
    used.dedup();
    let mut remap = vec![u32::MAX; mesh.vertices.len()];
    for (new, &old) in used.iter().enumerate() {
        remap[old as usize] = new as u32;
    }
    let positions = used.iter().map(|&v| mesh.vertices[v as usize]).collect();
    let faces = tri_ids
        .iter()
        .map(|&t| {
            let [a, b, c] = mesh.triangles[t];
            [remap[a as usize], remap[b as usize], remap[c as usize]]
        })
        .collect();
    (positions, faces)
}

// ============================================================================
// Quadrics
// ============================================================================

/// Symmetric 4×4 error quadric, upper triangle stored row-major.
#[derive(Debug, Clone, Copy, Default)]
struct Quadric([f64; 10]);

impl Quadric {
    /// Quadric of the plane n·p + d = 0 (unit n), scaled by `weight`.
    fn from_plane(n: Vec3, d: f64, weight: f64) -> Self {
        let (a, b, c) = (n.x, n.y, n.z);
        Self([
            weight * a * a,
            weight * a * b,
            weight * a * c,
            weight * a * d,
            weight * b * b,
            weight * b * c,
            weight * b * d,
            weight * c * c,
            weight * c * d,
            weight * d * d,
        ])
    }

    fn add(&mut self, o: &Quadric) {
        for i in 0..10 {
            self.0[i] += o.0[i];
        }
    }

    /// [p 1] Q [p 1]ᵀ — weighted squared distance to the accumulated planes.
    fn eval(&self, p: Vec3) -> f64 {
        let q = &self.0;
        q[0] * p.x * p.x
            + 2.0 * q[1] * p.x * p.y
            + 2.0 * q[2] * p.x * p.z
            + 2.0 * q[3] * p.x
            + q[4] * p.y * p.y
            + 2.0 * q[5] * p.y * p.z
            + 2.0 * q[6] * p.y
            + q[7] * p.z * p.z
            + 2.0 * q[8] * p.z
            + q[9]
    }
}

// ============================================================================
// Edge-collapse decimation
// ============================================================================

#[derive(Debug, PartialEq, Eq, Clone, Copy)]
enum EdgeKind {
    Smooth,
    Boundary,
    Sharp,
    NonManifold,
}

#[derive(Debug)]
enum VertexKind {
    Smooth,
    /// On a feature chain; carries the two feature-edge neighbors.
    Crease(u32, u32),
    Corner,
}

/// Min-heap candidate: collapse `vanish` into `survive` (which keeps its
/// position) at `cost`. Version stamps detect staleness.
struct Candidate {
    cost: f64,
    survive: u32,
    vanish: u32,
    ver_s: u32,
    ver_v: u32,
}

impl PartialEq for Candidate {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Candidate {}
impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Candidate {
    // Reversed so BinaryHeap pops the cheapest; ties break on indices for
    // run-to-run determinism.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .cost
            .total_cmp(&self.cost)
            .then(other.survive.cmp(&self.survive))
            .then(other.vanish.cmp(&self.vanish))
    }
}

struct Decimator {
    positions: Vec<Vec3>,
    faces: Vec<[u32; 3]>,
    alive: Vec<bool>,
    /// vertex -> alive faces touching it (ordered for determinism).
    vfaces: Vec<BTreeSet<u32>>,
    quadrics: Vec<Quadric>,
    versions: Vec<u32>,
    alive_count: usize,
    /// cos of the sharp-edge angle; normals agreeing less than this mark a
    /// sharp edge.
    sharp_cos: f64,
}

fn face_normal_area(positions: &[Vec3], f: [u32; 3]) -> (Vec3, f64) {
    let (a, b, c) = (
        positions[f[0] as usize],
        positions[f[1] as usize],
        positions[f[2] as usize],
    );
    let cross = (b - a).cross(c - a);
    let double_area = cross.norm();
    if double_area < 1e-18 {
        (Vec3::zero(), 0.0)
    } else {
        (cross / double_area, double_area / 2.0)
    }
}

impl Decimator {
    fn new(positions: Vec<Vec3>, faces: Vec<[u32; 3]>, sharp_angle_deg: f64) -> Self {
        let nv = positions.len();
        let nf = faces.len();
        let mut vfaces = vec![BTreeSet::new(); nv];
        for (fi, f) in faces.iter().enumerate() {
            for &v in f {
                vfaces[v as usize].insert(fi as u32);
            }
        }
        let mut dec = Self {
            positions,
            faces,
            alive: vec![true; nf],
            vfaces,
            quadrics: vec![Quadric::default(); nv],
            versions: vec![0; nv],
            alive_count: nf,
            sharp_cos: sharp_angle_deg.to_radians().cos(),
        };
        dec.seed_quadrics();
        dec
    }

    fn seed_quadrics(&mut self) {
        for fi in 0..self.faces.len() {
            let f = self.faces[fi];
            let (n, area) = face_normal_area(&self.positions, f);
            if area == 0.0 {
                continue;
            }
            let d = -n.dot(self.positions[f[0] as usize]);
            let q = Quadric::from_plane(n, d, area);
            for &v in &f {
                self.quadrics[v as usize].add(&q);
            }
            // Boundary penalty: for each boundary edge, a heavily weighted
            // plane through the edge, perpendicular to the face. Straight
            // chains stay collapsible along themselves; anything pulling a
            // vertex off the boundary line costs dearly.
            for k in 0..3 {
                let (a, b) = (f[k], f[(k + 1) % 3]);
                if self.edge_faces(a, b).len() != 1 {
                    continue;
                }
                let (pa, pb) = (self.positions[a as usize], self.positions[b as usize]);
                let edge = pb - pa;
                let len = edge.norm();
                if len < 1e-12 {
                    continue;
                }
                let pen_n = n.cross(edge / len);
                let pen = Quadric::from_plane(pen_n, -pen_n.dot(pa), 100.0 * len * len);
                self.quadrics[a as usize].add(&pen);
                self.quadrics[b as usize].add(&pen);
            }
        }
    }

    /// Alive faces containing both endpoints.
    fn edge_faces(&self, a: u32, b: u32) -> Vec<u32> {
        self.vfaces[a as usize]
            .intersection(&self.vfaces[b as usize])
            .filter(|&&f| self.alive[f as usize])
            .copied()
            .collect()
    }

    fn edge_kind(&self, a: u32, b: u32) -> EdgeKind {
        let shared = self.edge_faces(a, b);
        match shared.len() {
            0 => EdgeKind::NonManifold, // stale edge
            1 => EdgeKind::Boundary,
            2 => {
                let (n0, _) = face_normal_area(&self.positions, self.faces[shared[0] as usize]);
                let (n1, _) = face_normal_area(&self.positions, self.faces[shared[1] as usize]);
                if n0.dot(n1) < self.sharp_cos {
                    EdgeKind::Sharp
                } else {
                    EdgeKind::Smooth
                }
            }
            _ => EdgeKind::NonManifold,
        }
    }

    /// Neighbors of `v` over alive faces.
    fn neighbors(&self, v: u32) -> BTreeSet<u32> {
        let mut out = BTreeSet::new();
        for &f in &self.vfaces[v as usize] {
            if !self.alive[f as usize] {
                continue;
            }
            for &u in &self.faces[f as usize] {
                if u != v {
                    out.insert(u);
                }
            }
        }
        out
    }

    fn classify_vertex(&self, v: u32) -> VertexKind {
        let mut features: Vec<u32> = Vec::new();
        for u in self.neighbors(v) {
            match self.edge_kind(v, u) {
                EdgeKind::Boundary | EdgeKind::Sharp => features.push(u),
                EdgeKind::NonManifold => return VertexKind::Corner,
                EdgeKind::Smooth => {}
            }
        }
        match features.len() {
            0 => VertexKind::Smooth,
            2 => {
                let p = self.positions[v as usize];
                let d1 = (self.positions[features[0] as usize] - p).normalized();
                let d2 = (self.positions[features[1] as usize] - p).normalized();
                // The two feature edges must continue each other (within 5°)
                // for the vertex to slide along the chain.
                if d1.dot(d2) <= -0.9962 {
                    VertexKind::Crease(features[0], features[1])
                } else {
                    VertexKind::Corner
                }
            }
            _ => VertexKind::Corner,
        }
    }

    /// May `vanish` be folded into `survive`? Enforces the sharp-edge and
    /// feature-preservation rules.
    fn collapse_allowed(&self, survive: u32, vanish: u32) -> bool {
        match self.edge_kind(survive, vanish) {
            EdgeKind::Sharp | EdgeKind::NonManifold => return false,
            EdgeKind::Smooth | EdgeKind::Boundary => {}
        }
        match self.classify_vertex(vanish) {
            VertexKind::Smooth => true,
            VertexKind::Corner => false,
            // A crease vertex may only slide along its own chain.
            VertexKind::Crease(a, b) => survive == a || survive == b,
        }
    }

    fn cost(&self, survive: u32, vanish: u32) -> f64 {
        let mut q = self.quadrics[survive as usize];
        q.add(&self.quadrics[vanish as usize]);
        q.eval(self.positions[survive as usize]).max(0.0)
    }

    fn push_candidates_for_edge(&self, heap: &mut BinaryHeap<Candidate>, a: u32, b: u32) {
        for (s, v) in [(a, b), (b, a)] {
            if self.collapse_allowed(s, v) {
                heap.push(Candidate {
                    cost: self.cost(s, v),
                    survive: s,
                    vanish: v,
                    ver_s: self.versions[s as usize],
                    ver_v: self.versions[v as usize],
                });
            }
        }
    }

    fn seed_heap(&self) -> BinaryHeap<Candidate> {
        let mut edges = BTreeSet::new();
        for (fi, f) in self.faces.iter().enumerate() {
            if !self.alive[fi] {
                continue;
            }
            for k in 0..3 {
                let (a, b) = (f[k], f[(k + 1) % 3]);
                edges.insert((a.min(b), a.max(b)));
            }
        }
        let mut heap = BinaryHeap::new();
        for (a, b) in edges {
            self.push_candidates_for_edge(&mut heap, a, b);
        }
        heap
    }

    /// Folds `vanish` into `survive`. Returns the set of vertices whose
    /// neighborhoods changed, or None when the collapse would flip or
    /// degenerate a face.
    fn try_collapse(&mut self, survive: u32, vanish: u32) -> Option<BTreeSet<u32>> {
        let shared = self.edge_faces(survive, vanish);
        if shared.is_empty() {
            return None;
        }
        let moving: Vec<u32> = self.vfaces[vanish as usize]
            .iter()
            .filter(|&&f| self.alive[f as usize] && !shared.contains(&f))
            .copied()
            .collect();
        // Pre-check every retargeted face for flips and degeneracy.
        for &fi in &moving {
            let f = self.faces[fi as usize];
            let (old_n, old_area) = face_normal_area(&self.positions, f);
            let new_f = f.map(|v| if v == vanish { survive } else { v });
            let (new_n, new_area) = face_normal_area(&self.positions, new_f);
            if new_area < 1e-10 || old_area == 0.0 || new_n.dot(old_n) <= 0.0 {
                return None;
            }
        }

        let mut touched: BTreeSet<u32> = BTreeSet::new();
        touched.insert(survive);
        for &fi in &shared {
            self.alive[fi as usize] = false;
            self.alive_count -= 1;
            for &v in &self.faces[fi as usize] {
                touched.insert(v);
                self.vfaces[v as usize].remove(&fi);
            }
        }
        for &fi in &moving {
            let f = &mut self.faces[fi as usize];
            for v in f.iter_mut() {
                if *v == vanish {
                    *v = survive;
                }
            }
            for &v in self.faces[fi as usize].iter() {
                touched.insert(v);
            }
            self.vfaces[survive as usize].insert(fi);
            self.vfaces[vanish as usize].remove(&fi);
        }
        let vanish_quadric = self.quadrics[vanish as usize];
        self.quadrics[survive as usize].add(&vanish_quadric);
        touched.remove(&vanish);
        for &v in &touched {
            self.versions[v as usize] += 1;
        }
        self.versions[vanish as usize] += 1;
        Some(touched)
    }

    fn run(mut self, target: usize) -> (Vec<Vec3>, Vec<[u32; 3]>) {
        let mut heap = self.seed_heap();
        while self.alive_count > target {
            let Some(c) = heap.pop() else { break };
            if self.versions[c.survive as usize] != c.ver_s
                || self.versions[c.vanish as usize] != c.ver_v
            {
                continue;
            }
            if !self.collapse_allowed(c.survive, c.vanish) {
                continue;
            }
            let Some(touched) = self.try_collapse(c.survive, c.vanish) else {
                continue;
            };
            // Refresh candidates around everything that changed.
            let mut edges = BTreeSet::new();
            for &v in &touched {
                for &fi in &self.vfaces[v as usize] {
                    if !self.alive[fi as usize] {
                        continue;
                    }
                    let f = self.faces[fi as usize];
                    for k in 0..3 {
                        let (a, b) = (f[k], f[(k + 1) % 3]);
                        edges.insert((a.min(b), a.max(b)));
                    }
                }
            }
            for (a, b) in edges {
                self.push_candidates_for_edge(&mut heap, a, b);
            }
        }
        self.compact()
    }

    fn compact(self) -> (Vec<Vec3>, Vec<[u32; 3]>) {
        let alive_faces: Vec<[u32; 3]> = self
            .faces
            .iter()
            .zip(&self.alive)
            .filter(|(_, &a)| a)
            .map(|(f, _)| *f)
            .collect();
        let mut used: Vec<u32> = alive_faces.iter().flatten().copied().collect();
        used.sort_unstable();
        used.dedup();
        let mut remap = vec![u32::MAX; self.positions.len()];
        for (new, &old) in used.iter().enumerate() {
            remap[old as usize] = new as u32;
        }
        let positions = used.iter().map(|&v| self.positions[v as usize]).collect();
        let faces = alive_faces
            .iter()
            .map(|&[a, b, c]| [remap[a as usize], remap[b as usize], remap[c as usize]])
            .collect();
        (positions, faces)
    }
}

fn decimate(
    positions: Vec<Vec3>,
    faces: Vec<[u32; 3]>,
    target: usize,
    sharp_angle_deg: f64,
) -> (Vec<Vec3>, Vec<[u32; 3]>) {
    if faces.len() <= target {
        return (positions, faces);
    }
    Decimator::new(positions, faces, sharp_angle_deg).run(target)
}
