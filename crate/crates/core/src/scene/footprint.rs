//! 2-D footprints: polygons with heights and class tags, plus the
//! structured-text file they are loaded from and the ear-clipping
//! triangulation used for roofs and ground surfaces.

use std::fmt;
use std::path::Path;

use thiserror::Error;

/// Geographic or named-local anchor of a footprint set.
#[derive(Debug, Clone, PartialEq)]
pub enum OriginRecord {
    Local(String),
    Geo { lat: f64, lon: f64 },
}

impl Default for OriginRecord {
    fn default() -> Self {
        Self::Local("local".to_string())
    }
}

impl fmt::Display for OriginRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Local(name) => write!(f, "local {name}"),
            Self::Geo { lat, lon } => write!(f, "geo {lat} {lon}"),
        }
    }
}

/// One footprint: a simple polygon in metres, an extrusion height, and a
/// class tag that drives material assignment and detail filtering.
#[derive(Debug, Clone, PartialEq)]
pub struct Footprint {
    pub name: String,
    pub class: String,
    /// Extrusion height in metres; 0 for planar classes (ground, road).
    pub height: f64,
    /// Ordered 2-D vertices; orientation is normalized on validation.
    pub polygon: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct FootprintSet {
    pub origin: OriginRecord,
    pub footprints: Vec<Footprint>,
}

#[derive(Debug, Error, PartialEq)]
pub enum FootprintError {
    #[error("footprint `{0}` has fewer than 3 vertices")]
    TooFewVertices(String),
    #[error("footprint `{0}` is self-intersecting")]
    SelfIntersecting(String),
    #[error("footprint `{0}` is degenerate (zero area)")]
    ZeroArea(String),
    #[error("footprint `{0}` has negative height {1}")]
    NegativeHeight(String, f64),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("read failed: {0}")]
    Io(String),
}

/// Twice the signed area; positive for counter-clockwise winding.
pub fn signed_area2(poly: &[[f64; 2]]) -> f64 {
    let n = poly.len();
    let mut acc = 0.0;
    for i in 0..n {
        let [x0, y0] = poly[i];
        let [x1, y1] = poly[(i + 1) % n];
        acc += x0 * y1 - x1 * y0;
    }
    acc
}

pub fn polygon_area(poly: &[[f64; 2]]) -> f64 {
    signed_area2(poly).abs() / 2.0
}

pub fn polygon_perimeter(poly: &[[f64; 2]]) -> f64 {
    let n = poly.len();
    (0..n)
        .map(|i| {
            let [x0, y0] = poly[i];
            let [x1, y1] = poly[(i + 1) % n];
            ((x1 - x0).powi(2) + (y1 - y0).powi(2)).sqrt()
        })
        .sum()
}

fn segments_properly_intersect(a: [f64; 2], b: [f64; 2], c: [f64; 2], d: [f64; 2]) -> bool {
    let cross = |o: [f64; 2], p: [f64; 2], q: [f64; 2]| {
        (p[0] - o[0]) * (q[1] - o[1]) - (p[1] - o[1]) * (q[0] - o[0])
    };
    let d1 = cross(a, b, c);
    let d2 = cross(a, b, d);
    let d3 = cross(c, d, a);
    let d4 = cross(c, d, b);
    (d1 * d2 < 0.0) && (d3 * d4 < 0.0)
}

impl Footprint {
    /// Checks simplicity and orientation; normalizes winding to
    /// counter-clockwise.
    pub fn validate(&mut self) -> Result<(), FootprintError> {
        if self.polygon.len() < 3 {
            return Err(FootprintError::TooFewVertices(self.name.clone()));
        }
        if self.height < 0.0 {
            return Err(FootprintError::NegativeHeight(self.name.clone(), self.height));
        }
        // Intersection first: a symmetric bow-tie also has zero signed area,
        // and the crossing is the more useful diagnosis.
        let n = self.polygon.len();
        for i in 0..n {
            for j in i + 1..n {
                // Adjacent edges share an endpoint; skip them.
                if j == i || (j + 1) % n == i || (i + 1) % n == j {
                    continue;
                }
                if segments_properly_intersect(
                    self.polygon[i],
                    self.polygon[(i + 1) % n],
                    self.polygon[j],
                    self.polygon[(j + 1) % n],
                ) {
                    return Err(FootprintError::SelfIntersecting(self.name.clone()));
                }
            }
        }
        let area2 = signed_area2(&self.polygon);
        if area2.abs() < 1e-12 {
            return Err(FootprintError::ZeroArea(self.name.clone()));
        }
        if area2 < 0.0 {
            self.polygon.reverse();
        }
        Ok(())
    }

    pub fn area(&self) -> f64 {
        polygon_area(&self.polygon)
    }
}

// ============================================================================
// Ear-clipping triangulation
// ============================================================================

fn point_in_triangle(p: [f64; 2], a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> bool {
    let sign = |p1: [f64; 2], p2: [f64; 2], p3: [f64; 2]| {
        (p1[0] - p3[0]) * (p2[1] - p3[1]) - (p2[0] - p3[0]) * (p1[1] - p3[1])
    };
    let d1 = sign(p, a, b);
    let d2 = sign(p, b, c);
    let d3 = sign(p, c, a);
    let has_neg = d1 < 0.0 || d2 < 0.0 || d3 < 0.0;
    let has_pos = d1 > 0.0 || d2 > 0.0 || d3 > 0.0;
    !(has_neg && has_pos)
}

/// Triangulates a simple counter-clockwise polygon by ear clipping.
/// Returns index triples into the input slice, CCW winding preserved.
pub fn ear_clip(poly: &[[f64; 2]]) -> Vec<[u32; 3]> {
    let n = poly.len();
    debug_assert!(n >= 3);
    let mut remaining: Vec<u32> = (0..n as u32).collect();
    let mut triangles = Vec::with_capacity(n - 2);
    let mut guard = 0usize;
    while remaining.len() > 3 {
        let m = remaining.len();
        let mut clipped = false;
        for k in 0..m {
            let ia = remaining[(k + m - 1) % m];
            let ib = remaining[k];
            let ic = remaining[(k + 1) % m];
            let (a, b, c) = (poly[ia as usize], poly[ib as usize], poly[ic as usize]);
            // Convex corner in a CCW polygon has positive cross product.
            let cross = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]);
            if cross <= 1e-12 {
                continue;
            }
            // An ear contains no other remaining vertex.
            let blocked = remaining.iter().any(|&iv| {
                iv != ia && iv != ib && iv != ic && point_in_triangle(poly[iv as usize], a, b, c)
            });
            if blocked {
                continue;
            }
            triangles.push([ia, ib, ic]);
            remaining.remove(k);
            clipped = true;
            break;
        }
        // A simple polygon always has an ear; the guard only trips on
        // numerically degenerate input, where we fall back to a fan.
        guard += 1;
        if !clipped || guard > 4 * n {
            for k in 1..remaining.len() - 1 {
                triangles.push([remaining[0], remaining[k], remaining[k + 1]]);
            }
            return triangles;
        }
    }
    triangles.push([remaining[0], remaining[1], remaining[2]]);
    triangles
}

// ============================================================================
// Footprint file parsing
// ============================================================================

/// Parses the footprint text format:
///
/// ```text
/// origin local <name>           (or: origin geo <lat> <lon>)
/// fp <name> class=<tag> height=<m>
/// v <x> <y>
/// ...
/// end
/// ```
///
/// Blank lines and `#` comments are ignored.
pub fn parse_footprints(text: &str) -> Result<FootprintSet, FootprintError> {
    let mut set = FootprintSet::default();
    let mut current: Option<Footprint> = None;
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |msg: String| FootprintError::Parse { line: line_no, msg };
        let mut parts = line.split_whitespace();
        match parts.next().unwrap() {
            "origin" => {
                let kind = parts.next().ok_or_else(|| err("origin needs a kind".into()))?;
                set.origin = match kind {
                    "local" => OriginRecord::Local(
                        parts
                            .next()
                            .ok_or_else(|| err("origin local needs a name".into()))?
                            .to_string(),
                    ),
                    "geo" => {
                        let lat: f64 = parts
                            .next()
                            .and_then(|s| s.parse().ok())
                            .ok_or_else(|| err("origin geo needs <lat> <lon>".into()))?;
                        let lon: f64 = parts
                            .next()
                            .and_then(|s| s.parse().ok())
                            .ok_or_else(|| err("origin geo needs <lat> <lon>".into()))?;
                        OriginRecord::Geo { lat, lon }
                    }
                    other => return Err(err(format!("unknown origin kind `{other}`"))),
                };
            }
            "fp" => {
                if current.is_some() {
                    return Err(err("previous footprint not closed with `end`".into()));
                }
                let name = parts
                    .next()
                    .ok_or_else(|| err("fp needs a name".into()))?
                    .to_string();
                let mut class = None;
                let mut height = None;
                for kv in parts {
                    match kv.split_once('=') {
                        Some(("class", v)) => class = Some(v.to_string()),
                        Some(("height", v)) => {
                            height = Some(v.parse().map_err(|_| {
                                err(format!("bad height `{v}`"))
                            })?)
                        }
                        _ => return Err(err(format!("unknown attribute `{kv}`"))),
                    }
                }
                current = Some(Footprint {
                    name,
                    class: class.ok_or_else(|| err("fp needs class=<tag>".into()))?,
                    height: height.ok_or_else(|| err("fp needs height=<m>".into()))?,
                    polygon: Vec::new(),
                });
            }
            "v" => {
                let fp = current
                    .as_mut()
                    .ok_or_else(|| err("vertex outside a footprint".into()))?;
                let x: f64 = parts
                    .next()
                    .and_then(|s| s.parse().ok())
                    .ok_or_else(|| err("v needs <x> <y>".into()))?;
                let y: f64 = parts
                    .next()
                    .and_then(|s| s.parse().ok())
                    .ok_or_else(|| err("v needs <x> <y>".into()))?;
                fp.polygon.push([x, y]);
            }
            "end" => {
                let mut fp = current
                    .take()
                    .ok_or_else(|| err("`end` without an open footprint".into()))?;
                fp.validate()?;
                set.footprints.push(fp);
            }
            other => return Err(err(format!("unknown record `{other}`"))),
        }
    }
    if let Some(fp) = current {
        return Err(FootprintError::Parse {
            line: text.lines().count(),
            msg: format!("footprint `{}` not closed with `end`", fp.name),
        });
    }
    Ok(set)
}

pub fn load_footprints(path: &Path) -> Result<FootprintSet, FootprintError> {
    let text =
        std::fs::read_to_string(path).map_err(|e| FootprintError::Io(format!("{path:?}: {e}")))?;
    parse_footprints(&text)
}

/// Serializes a footprint set back into the text format.
pub fn format_footprints(set: &FootprintSet) -> String {
    let mut out = String::new();
    out.push_str(&format!("origin {}\n", set.origin));
    for fp in &set.footprints {
        out.push_str(&format!(
            "fp {} class={} height={}\n",
            fp.name, fp.class, fp.height
        ));
        for [x, y] in &fp.polygon {
            out.push_str(&format!("v {x} {y}\n"));
        }
        out.push_str("end\n");
    }
    out
}
