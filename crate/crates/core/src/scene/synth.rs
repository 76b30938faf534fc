//! Deterministic synthetic scenes for demos and self-tests.
//!
//! The generated city is a regular block grid with pseudo-random building
//! heights drawn from a fixed named substream, so every call yields the
//! exact same geometry.

use crate::prng::SplitMix64;
use crate::Vec3;

use super::{
    assign_materials, extrude_footprints, ExtrudeOptions, Footprint, FootprintSet,
    MaterialLibrary, OriginRecord, SceneAsset, SceneError,
};

/// Footprint layout of the demo city: a ground slab, a 5×4 block grid of
/// buildings with varying heights, and a few small detail-class objects.
pub fn demo_city() -> FootprintSet {
    let mut rng = SplitMix64::substream(20_240_901, "demo-city-heights");
    let mut footprints = Vec::new();

    footprints.push(rect_footprint("ground", "ground", 0.0, -100.0, -100.0, 200.0, 200.0));

    let pitch = 36.0;
    for gy in 0..4 {
        for gx in 0..5 {
            let x0 = -82.0 + pitch * gx as f64;
            let y0 = -64.0 + pitch * gy as f64;
            let w = 14.0 + 6.0 * rng.next_f64();
            let d = 12.0 + 6.0 * rng.next_f64();
            let h = 8.0 + 20.0 * rng.next_f64();
            footprints.push(rect_footprint(
                &format!("bldg_{gx}{gy}"),
                "building",
                h,
                x0,
                y0,
                w,
                d,
            ));
        }
    }

    // Street furniture that simplification is expected to discard.
    footprints.push(rect_footprint("rail_a", "railing", 1.1, -60.0, 10.0, 6.0, 0.3));
    footprints.push(rect_footprint("rail_b", "railing", 1.1, 20.0, -30.0, 0.3, 6.0));
    footprints.push(rect_footprint("frame_a", "window_frame", 0.4, 5.0, 5.0, 1.2, 0.2));

    FootprintSet {
        origin: OriginRecord::Local("demo_city".into()),
        footprints,
    }
}

fn rect_footprint(
    name: &str,
    class: &str,
    height: f64,
    x0: f64,
    y0: f64,
    w: f64,
    d: f64,
) -> Footprint {
    Footprint {
        name: name.into(),
        class: class.into(),
        height,
        polygon: vec![[x0, y0], [x0 + w, y0], [x0 + w, y0 + d], [x0, y0 + d]],
    }
}

/// Default class → material mapping for generated scenes.
pub fn demo_material_rules() -> Vec<(String, String)> {
    [
        ("ground", "medium_dry_ground"),
        ("road", "medium_dry_ground"),
        ("water", "wet_ground"),
        ("building", "concrete"),
        ("railing", "metal"),
        ("window_frame", "glass"),
    ]
    .iter()
    .map(|(c, m)| (c.to_string(), m.to_string()))
    .collect()
}

/// Extruded demo city with standard materials assigned. Walls are
/// subdivided so decimation has real work to do.
pub fn demo_city_asset() -> Result<SceneAsset, SceneError> {
    let set = demo_city();
    let mut asset = extrude_footprints(&set, &ExtrudeOptions { wall_subdivisions: 4 })?;
    let library = MaterialLibrary::standard();
    assign_materials(&mut asset, &demo_material_rules(), Some("concrete"), &library)?;
    Ok(asset)
}

/// A minimal open scene: one ground slab and two facing buildings forming a
/// street canyon. Handy for propagation tests with countable reflections.
pub fn canyon_asset(
    half_gap: f64,
    wall_height: f64,
    length: f64,
) -> Result<SceneAsset, SceneError> {
    let footprints = vec![
        rect_footprint("ground", "ground", 0.0, -length, -3.0 * half_gap, 2.0 * length, 6.0 * half_gap),
        rect_footprint("south", "building", wall_height, -length / 2.0, -half_gap - 8.0, length, 8.0),
        rect_footprint("north", "building", wall_height, -length / 2.0, half_gap, length, 8.0),
    ];
    let set = FootprintSet {
        origin: OriginRecord::Local("canyon".into()),
        footprints,
    };
    let mut asset = extrude_footprints(&set, &ExtrudeOptions::default())?;
    let library = MaterialLibrary::standard();
    assign_materials(&mut asset, &demo_material_rules(), Some("concrete"), &library)?;
    Ok(asset)
}

/// Center of the demo city in scene coordinates.
pub fn demo_city_center() -> Vec3 {
    Vec3::new(0.0, 0.0, 0.0)
}
