//! SimMesh: the diff-able structured-text mesh format both scene assets
//! are stored in.
//!
//! ```text
//! origin <x> <y> <z>
//! o <name> class=<tag> material=<mat>
//! v <x> <y> <z>
//! f <i> <j> <k>        (1-based, global vertex numbering)
//! ```
//!
//! One record per line; `#` starts a comment. Objects own the faces that
//! follow them; vertices are written grouped by object. Floats use Rust's
//! shortest round-trip formatting, so parse(format(x)) is bit-exact.

use std::path::Path;

use thiserror::Error;

use crate::geometry::mesh::MeshError;
use crate::{TriangleMesh, Vec3};

use super::{RtMesh, SceneAsset, SceneObject};

#[derive(Debug, Error, PartialEq)]
pub enum SimMeshError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error("i/o failed: {0}")]
    Io(String),
}

/// Serializes a scene to SimMesh text. Vertices are emitted per object in
/// ascending global-index order, which preserves the vertex order of
/// assets whose objects own contiguous vertex ranges (everything this
/// engine builds).
pub fn format_simmesh(origin: Vec3, mesh: &TriangleMesh, objects: &[SceneObject]) -> String {
    let mut out = String::new();
    out.push_str(&format!("origin {} {} {}\n", origin.x, origin.y, origin.z));
    // Map old vertex index -> new 1-based index, assigned per object.
    let mut remap: Vec<u32> = vec![0; mesh.vertices.len()];
    let mut next: u32 = 1;
    for (obj_id, obj) in objects.iter().enumerate() {
        out.push_str(&format!(
            "o {} class={} material={}\n",
            obj.name, obj.class, obj.material
        ));
        let tri_indices: Vec<usize> = (0..mesh.triangles.len())
            .filter(|&t| mesh.object_ids[t] as usize == obj_id)
            .collect();
        let mut used: Vec<u32> = tri_indices
            .iter()
            .flat_map(|&t| mesh.triangles[t])
            .collect();
        used.sort_unstable();
        used.dedup();
        for &v in &used {
            let p = mesh.vertices[v as usize];
            out.push_str(&format!("v {} {} {}\n", p.x, p.y, p.z));
            remap[v as usize] = next;
            next += 1;
        }
        for &t in &tri_indices {
            let [a, b, c] = mesh.triangles[t];
            out.push_str(&format!(
                "f {} {} {}\n",
                remap[a as usize], remap[b as usize], remap[c as usize]
            ));
        }
    }
    out
}

/// Parses SimMesh text back into (origin, mesh, objects).
pub fn parse_simmesh(text: &str) -> Result<(Vec3, TriangleMesh, Vec<SceneObject>), SimMeshError> {
    let mut origin = Vec3::zero();
    let mut saw_origin = false;
    let mut vertices: Vec<Vec3> = Vec::new();
    let mut triangles: Vec<[u32; 3]> = Vec::new();
    let mut object_ids: Vec<u32> = Vec::new();
    let mut objects: Vec<SceneObject> = Vec::new();

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |msg: String| SimMeshError::Parse { line: line_no, msg };
        let mut parts = line.split_whitespace();
        match parts.next().unwrap() {
            "origin" => {
                let mut next_f = || -> Result<f64, SimMeshError> {
                    parts
                        .next()
                        .and_then(|s| s.parse().ok())
                        .ok_or_else(|| err("origin needs <x> <y> <z>".into()))
                };
                origin = Vec3::new(next_f()?, next_f()?, next_f()?);
                saw_origin = true;
            }
            "o" => {
                let name = parts
                    .next()
                    .ok_or_else(|| err("o needs a name".into()))?
                    .to_string();
                let mut class = None;
                let mut material = None;
                for kv in parts {
                    match kv.split_once('=') {
                        Some(("class", v)) => class = Some(v.to_string()),
                        Some(("material", v)) => material = Some(v.to_string()),
                        _ => return Err(err(format!("unknown attribute `{kv}`"))),
                    }
                }
                objects.push(SceneObject {
                    name,
                    class: class.ok_or_else(|| err("o needs class=<tag>".into()))?,
                    material: material.ok_or_else(|| err("o needs material=<mat>".into()))?,
                });
            }
            "v" => {
                let mut next_f = || -> Result<f64, SimMeshError> {
                    parts
                        .next()
                        .and_then(|s| s.parse().ok())
                        .ok_or_else(|| err("v needs <x> <y> <z>".into()))
                };
                vertices.push(Vec3::new(next_f()?, next_f()?, next_f()?));
            }
            "f" => {
                if objects.is_empty() {
                    return Err(err("face before any object record".into()));
                }
                let mut next_i = || -> Result<u32, SimMeshError> {
                    let i: u64 = parts
                        .next()
                        .and_then(|s| s.parse().ok())
                        .ok_or_else(|| err("f needs <i> <j> <k>".into()))?;
                    if i == 0 || i > vertices.len() as u64 {
                        return Err(err(format!("face index {i} out of range (1-based)")));
                    }
                    Ok((i - 1) as u32)
                };
                triangles.push([next_i()?, next_i()?, next_i()?]);
                object_ids.push(objects.len() as u32 - 1);
            }
            other => return Err(err(format!("unknown record `{other}`"))),
        }
    }
    if !saw_origin {
        return Err(SimMeshError::Parse {
            line: 0,
            msg: "missing origin record".into(),
        });
    }
    let mesh = TriangleMesh::new(vertices, triangles, object_ids)?;
    Ok((origin, mesh, objects))
}

pub fn save_scene(
    path: &Path,
    origin: Vec3,
    mesh: &TriangleMesh,
    objects: &[SceneObject],
) -> Result<(), SimMeshError> {
    std::fs::write(path, format_simmesh(origin, mesh, objects))
        .map_err(|e| SimMeshError::Io(format!("{path:?}: {e}")))
}

pub fn load_scene(path: &Path) -> Result<(Vec3, TriangleMesh, Vec<SceneObject>), SimMeshError> {
    let text = std::fs::read_to_string(path).map_err(|e| SimMeshError::Io(format!("{path:?}: {e}")))?;
    parse_simmesh(&text)
}

impl SceneAsset {
    pub fn to_simmesh(&self) -> String {
        format_simmesh(self.origin, &self.mesh, &self.objects)
    }

    pub fn save(&self, path: &Path) -> Result<(), SimMeshError> {
        save_scene(path, self.origin, &self.mesh, &self.objects)
    }

    pub fn load(path: &Path) -> Result<Self, SimMeshError> {
        let (origin, mesh, objects) = load_scene(path)?;
        Ok(Self {
            origin,
            mesh,
            objects,
        })
    }
}

impl RtMesh {
    pub fn to_simmesh(&self) -> String {
        format_simmesh(self.origin, &self.mesh, &self.objects)
    }

    pub fn save(&self, path: &Path) -> Result<(), SimMeshError> {
        save_scene(path, self.origin, &self.mesh, &self.objects)
    }

    pub fn load(path: &Path) -> Result<Self, SimMeshError> {
        let (origin, mesh, objects) = load_scene(path)?;
        Ok(Self {
            origin,
            mesh,
            objects,
        })
    }
}

/// Writes both aligned assets into `dir` under their canonical names.
pub fn export_assets(
    asset: &SceneAsset,
    rtmesh: &RtMesh,
    dir: &Path,
) -> Result<(std::path::PathBuf, std::path::PathBuf), SimMeshError> {
    std::fs::create_dir_all(dir).map_err(|e| SimMeshError::Io(format!("{dir:?}: {e}")))?;
    let asset_path = dir.join("scene_asset.simmesh");
    let rt_path = dir.join("rtmesh.simmesh");
    asset.save(&asset_path)?;
    rtmesh.save(&rt_path)?;
    Ok((asset_path, rt_path))
}
