//! Footprint extrusion into 3-D scene geometry.
//!
//! Buildings become side walls plus a flat roof (no floor — nothing
//! propagates underground); planar classes (ground, road) become meshes at
//! z = 0. Triangles are one-sided with outward-facing winding.

use crate::{TriangleMesh, Vec3};

use super::footprint::{ear_clip, FootprintSet};
use super::{class_is_planar, SceneAsset, SceneError, SceneObject};

/// Extrusion tuning.
#[derive(Debug, Clone, Copy)]
pub struct ExtrudeOptions {
    /// Wall tessellation density: each wall quad is split into an n×n grid
    /// of cells (two triangles each). 1 keeps plain quads; higher values
    /// produce dense "high-fidelity" geometry for simplification studies.
    pub wall_subdivisions: usize,
}

impl Default for ExtrudeOptions {
    fn default() -> Self {
        Self {
            wall_subdivisions: 1,
        }
    }
}

/// Builds the high-fidelity scene asset from footprints. Every object gets
/// the placeholder material `default`, replaced by material assignment.
pub fn extrude_footprints(
    set: &FootprintSet,
    options: &ExtrudeOptions,
) -> Result<SceneAsset, SceneError> {
    let subdiv = options.wall_subdivisions.max(1);
    let mut vertices: Vec<Vec3> = Vec::new();
    let mut triangles: Vec<[u32; 3]> = Vec::new();
    let mut object_ids: Vec<u32> = Vec::new();
    let mut objects: Vec<SceneObject> = Vec::new();

    for fp in &set.footprints {
        let mut fp = fp.clone();
        fp.validate().map_err(SceneError::Footprint)?;
        let object_id = objects.len() as u32;
        let planar = class_is_planar(&fp.class) || fp.height == 0.0;

        if planar {
            // Flat mesh at z = 0, facing up.
            let base = vertices.len() as u32;
            vertices.extend(fp.polygon.iter().map(|&[x, y]| Vec3::new(x, y, 0.0)));
            for [a, b, c] in ear_clip(&fp.polygon) {
                triangles.push([base + a, base + b, base + c]);
                object_ids.push(object_id);
            }
        } else {
            // Walls: the polygon is CCW seen from above, so the outward
            // side of edge (p, q) is to the right of travel; winding
            // bottom-p, bottom-q, top-q faces outward.
            let n = fp.polygon.len();
            for i in 0..n {
                let [px, py] = fp.polygon[i];
                let [qx, qy] = fp.polygon[(i + 1) % n];
                let base = vertices.len() as u32;
                let cols = subdiv as u32;
                let rows = subdiv as u32;
                for r in 0..=rows {
                    let z = fp.height * r as f64 / rows as f64;
                    for c in 0..=cols {
                        let u = c as f64 / cols as f64;
                        vertices.push(Vec3::new(px + (qx - px) * u, py + (qy - py) * u, z));
                    }
                }
                let stride = cols + 1;
                for r in 0..rows {
                    for c in 0..cols {
                        let v00 = base + r * stride + c;
                        let v01 = v00 + 1;
                        let v10 = v00 + stride;
                        let v11 = v10 + 1;
                        triangles.push([v00, v01, v11]);
                        triangles.push([v00, v11, v10]);
                        object_ids.push(object_id);
                        object_ids.push(object_id);
                    }
                }
            }
            // Roof: CCW at z = height faces up/outward.
            let base = vertices.len() as u32;
            vertices.extend(fp.polygon.iter().map(|&[x, y]| Vec3::new(x, y, fp.height)));
            for [a, b, c] in ear_clip(&fp.polygon) {
                triangles.push([base + a, base + b, base + c]);
                object_ids.push(object_id);
            }
        }

        objects.push(SceneObject {
            name: fp.name.clone(),
            class: fp.class.clone(),
            material: "default".to_string(),
        });
    }

    let mesh = TriangleMesh::new(vertices, triangles, object_ids).map_err(SceneError::Mesh)?;
    Ok(SceneAsset {
        origin: Vec3::zero(),
        mesh,
        objects,
    })
}
