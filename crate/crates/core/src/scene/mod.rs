//! Dual scene construction: a high-fidelity asset for sensing and a
//! simplified, material-annotated mesh for radio propagation, kept
//! spatially aligned in one local frame.

pub mod extrude;
pub mod footprint;
pub mod material;
pub mod simmesh;
pub mod simplify;
pub mod synth;

use std::collections::HashMap;

use thiserror::Error;

use crate::geometry::mesh::MeshError;
use crate::{TriangleMesh, Vec3};

pub use extrude::{extrude_footprints, ExtrudeOptions};
pub use footprint::{
    load_footprints, parse_footprints, Footprint, FootprintError, FootprintSet, OriginRecord,
};
pub use material::{Material, MaterialLibrary, UnknownMaterial};
pub use simmesh::{export_assets, load_scene, save_scene, SimMeshError};
pub use simplify::{simplify_mesh, SimplifyConfig};

#[derive(Debug, Error, PartialEq)]
pub enum SceneError {
    #[error(transparent)]
    Footprint(#[from] FootprintError),
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Material(#[from] UnknownMaterial),
    #[error("class `{0}` has no material rule and no default is configured")]
    UnmappedClass(String),
    #[error("decimation ratio {0} outside (0, 1]")]
    BadRatio(f64),
    #[error("origins differ: asset {0:?} vs propagation mesh {1:?}")]
    OriginMismatch(Vec3, Vec3),
    #[error("landmark vertex {index} deviates {distance:.3e} m from the asset surface")]
    LandmarkDeviation { index: usize, distance: f64 },
}

/// Classes that stay planar at z = 0 instead of being extruded.
pub fn class_is_planar(class: &str) -> bool {
    matches!(class, "ground" | "road" | "water")
}

/// Detail classes removed by default before propagation-mesh decimation.
pub const DEFAULT_DETAIL_CLASSES: [&str; 4] =
    ["window_frame", "railing", "vegetation", "furniture"];

/// One named object of the scene: a class tag and a material, spanning the
/// triangles whose object id points at it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SceneObject {
    pub name: String,
    pub class: String,
    pub material: String,
}

/// High-fidelity scene: full geometry with per-object metadata and the
/// embedded local-frame origin shared with the propagation mesh.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneAsset {
    pub origin: Vec3,
    pub mesh: TriangleMesh,
    pub objects: Vec<SceneObject>,
}

/// Simplified propagation mesh: decimated geometry whose triangles resolve
/// to materials through the surviving objects.
#[derive(Debug, Clone, PartialEq)]
pub struct RtMesh {
    pub origin: Vec3,
    pub mesh: TriangleMesh,
    pub objects: Vec<SceneObject>,
}

impl SceneAsset {
    /// Material name for one triangle.
    pub fn triangle_material(&self, triangle: usize) -> &str {
        &self.objects[self.mesh.object_ids[triangle] as usize].material
    }
}

impl RtMesh {
    pub fn triangle_material(&self, triangle: usize) -> &str {
        &self.objects[self.mesh.object_ids[triangle] as usize].material
    }

    /// Every referenced material must exist in the library.
    pub fn check_materials(&self, library: &MaterialLibrary) -> Result<(), UnknownMaterial> {
        for obj in &self.objects {
            library.get(&obj.material)?;
        }
        Ok(())
    }
}

/// Applies class→material rules to every object. Later rules for the same
/// class win; classes without a rule fall back to `default`, and error out
/// when no default is given. Material names are checked against `library`.
pub fn assign_materials(
    asset: &mut SceneAsset,
    rules: &[(String, String)],
    default: Option<&str>,
    library: &MaterialLibrary,
) -> Result<(), SceneError> {
    let mut map: HashMap<&str, &str> = HashMap::new();
    for (class, material) in rules {
        map.insert(class, material);
    }
    for obj in &mut asset.objects {
        let material = match map.get(obj.class.as_str()) {
            Some(m) => *m,
            None => default.ok_or_else(|| SceneError::UnmappedClass(obj.class.clone()))?,
        };
        library.get(material).map_err(SceneError::Material)?;
        obj.material = material.to_string();
    }
    Ok(())
}

/// Checks that the two assets share a coordinate frame: identical embedded
/// origins (within 1e-9 m) and every sampled propagation-mesh vertex lying
/// within 1e-6 m of some asset vertex. Decimation keeps surviving vertices
/// at their original positions, so the shared landmarks must coincide.
pub fn verify_alignment(asset: &SceneAsset, rtmesh: &RtMesh) -> Result<(), SceneError> {
    if (asset.origin - rtmesh.origin).norm() > 1e-9 {
        return Err(SceneError::OriginMismatch(asset.origin, rtmesh.origin));
    }
    if rtmesh.mesh.vertices.is_empty() {
        return Ok(());
    }
    // Sample up to 64 landmarks, evenly spread over the vertex list.
    let n = rtmesh.mesh.vertices.len();
    let step = (n / 64).max(1);
    for index in (0..n).step_by(step) {
        let v = rtmesh.mesh.vertices[index];
        let distance = asset
            .mesh
            .vertices
            .iter()
            .map(|&a| (a - v).norm())
            .fold(f64::INFINITY, f64::min);
        if distance > 1e-6 {
            return Err(SceneError::LandmarkDeviation { index, distance });
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_building_asset() -> SceneAsset {
        let set = footprint::parse_footprints(
            "origin local t\nfp b class=building height=5\nv 0 0\nv 4 0\nv 4 4\nv 0 4\nend\n",
        )
        .unwrap();
        extrude_footprints(&set, &ExtrudeOptions::default()).unwrap()
    }

    #[test]
    fn material_rules_apply_per_class() {
        let mut asset = one_building_asset();
        let lib = MaterialLibrary::standard();
        assign_materials(
            &mut asset,
            &[("building".into(), "concrete".into())],
            None,
            &lib,
        )
        .unwrap();
        assert_eq!(asset.objects[0].material, "concrete");
    }

    #[test]
    fn unknown_class_uses_default_or_errors() {
        let mut asset = one_building_asset();
        asset.objects[0].class = "gazebo".into();
        let lib = MaterialLibrary::standard();
        let err = assign_materials(&mut asset, &[], None, &lib).unwrap_err();
        assert_eq!(err, SceneError::UnmappedClass("gazebo".into()));
        assign_materials(&mut asset, &[], Some("medium_dry_ground"), &lib).unwrap();
        assert_eq!(asset.objects[0].material, "medium_dry_ground");
    }

    #[test]
    fn later_rule_for_same_class_wins() {
        let mut asset = one_building_asset();
        let lib = MaterialLibrary::standard();
        assign_materials(
            &mut asset,
            &[
                ("building".into(), "glass".into()),
                ("building".into(), "concrete".into()),
            ],
            None,
            &lib,
        )
        .unwrap();
        assert_eq!(asset.objects[0].material, "concrete");
    }

    #[test]
    fn rule_with_unknown_material_errors() {
        let mut asset = one_building_asset();
        let lib = MaterialLibrary::standard();
        let err = assign_materials(
            &mut asset,
            &[("building".into(), "cheese".into())],
            None,
            &lib,
        )
        .unwrap_err();
        assert_eq!(err, SceneError::Material(UnknownMaterial("cheese".into())));
    }

    #[test]
    fn alignment_accepts_identity_and_rejects_shift() {
        let asset = one_building_asset();
        let rt = RtMesh {
            origin: asset.origin,
            mesh: asset.mesh.clone(),
            objects: asset.objects.clone(),
        };
        verify_alignment(&asset, &rt).unwrap();

        let mut shifted = rt.clone();
        shifted.origin = Vec3::new(1.0, 0.0, 0.0);
        assert!(matches!(
            verify_alignment(&asset, &shifted).unwrap_err(),
            SceneError::OriginMismatch(..)
        ));

        let mut moved = rt;
        for v in &mut moved.mesh.vertices {
            *v = *v + Vec3::new(0.01, 0.0, 0.0);
        }
        assert!(matches!(
            verify_alignment(&asset, &moved).unwrap_err(),
            SceneError::LandmarkDeviation { .. }
        ));
    }
}
