//! Bounding volume hierarchy for ray-mesh queries.
//!
//! Binary tree over axis-aligned boxes, split at the median centroid along
//! the widest axis. Queries return exactly the result of an exhaustive scan
//! over all triangles; the tree only prunes work.

use crate::real::{real, Real};

use super::mesh::{ray_triangle, Hit, Ray, TriangleMesh};
use super::vec::Vec3;

const LEAF_SIZE: usize = 4;

/// Axis-aligned bounding box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aabb<T> {
    pub min: Vec3<T>,
    pub max: Vec3<T>,
}

impl<T: Real> Aabb<T> {
    pub fn empty() -> Self {
        Self {
            min: Vec3::splat(T::infinity()),
            max: Vec3::splat(T::neg_infinity()),
        }
    }

    pub fn from_points(points: &[Vec3<T>]) -> Self {
        points.iter().fold(Self::empty(), |b, &p| b.expanded(p))
    }

    pub fn expanded(self, p: Vec3<T>) -> Self {
        Self {
            min: self.min.min_by_component(p),
            max: self.max.max_by_component(p),
        }
    }

    pub fn union(self, other: Self) -> Self {
        Self {
            min: self.min.min_by_component(other.min),
            max: self.max.max_by_component(other.max),
        }
    }

    pub fn centroid(&self) -> Vec3<T> {
        (self.min + self.max) / real(2.0)
    }

    pub fn contains(&self, p: Vec3<T>) -> bool {
        p.x >= self.min.x
            && p.x <= self.max.x
            && p.y >= self.min.y
            && p.y <= self.max.y
            && p.z >= self.min.z
            && p.z <= self.max.z
    }

    /// Index of the widest extent axis (0 = x, 1 = y, 2 = z).
    pub fn widest_axis(&self) -> usize {
        let d = self.max - self.min;
        if d.x >= d.y && d.x >= d.z {
            0
        } else if d.y >= d.z {
            1
        } else {
            2
        }
    }

    /// Slab test: does the ray touch the box anywhere in `[t_min, t_entry_cap]`?
    /// Conservative (inclusive bounds, infinity-safe).
    fn hit_by(&self, ray: &Ray<T>, t_cap: T) -> bool {
        let mut t0 = ray.t_min;
        let mut t1 = t_cap;
        for axis in 0..3 {
            let o = ray.origin.component(axis);
            let d = ray.direction.component(axis);
            let lo = self.min.component(axis);
            let hi = self.max.component(axis);
            if d.abs() < T::min_positive_value() {
                if o < lo || o > hi {
                    return false;
                }
                continue;
            }
            let inv = T::one() / d;
            let (mut near, mut far) = ((lo - o) * inv, (hi - o) * inv);
            if near > far {
                core::mem::swap(&mut near, &mut far);
            }
            t0 = t0.max(near);
            t1 = t1.min(far);
            if t0 > t1 {
                return false;
            }
        }
        true
    }
}

#[derive(Debug, Clone)]
enum Node<T> {
    Leaf {
        bounds: Aabb<T>,
        /// Range into `Bvh::order`.
        start: usize,
        count: usize,
    },
    Inner {
        bounds: Aabb<T>,
        left: usize,
        right: usize,
    },
}

impl<T: Copy> Node<T> {
    fn bounds(&self) -> Aabb<T>
    where
        T: Real,
    {
        match self {
            Node::Leaf { bounds, .. } | Node::Inner { bounds, .. } => *bounds,
        }
    }
}

/// Median-split BVH over the triangles of a mesh. Holds only indices; the
/// mesh itself is passed to each query.
#[derive(Debug, Clone)]
pub struct Bvh<T> {
    nodes: Vec<Node<T>>,
    order: Vec<usize>,
    root: Option<usize>,
}

impl<T: Real> Bvh<T> {
    pub fn build(mesh: &TriangleMesh<T>) -> Self {
        let n = mesh.triangles.len();
        let boxes: Vec<Aabb<T>> = (0..n)
            .map(|i| Aabb::from_points(&mesh.triangle_vertices(i)))
            .collect();
        let mut order: Vec<usize> = (0..n).collect();
        let mut nodes = Vec::new();
        let root = if n == 0 {
            None
        } else {
            Some(build_node(&boxes, &mut order, 0, n, &mut nodes))
        };
        Self { nodes, order, root }
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    /// Nearest hit along the ray, skipping triangles listed in `exclude`.
    /// Equal-`t` ties resolve to the lowest triangle index, matching
    /// [`first_hit_scan`].
    pub fn first_hit(
        &self,
        mesh: &TriangleMesh<T>,
        ray: &Ray<T>,
        exclude: &[usize],
    ) -> Option<Hit<T>> {
        let root = self.root?;
        let mut best: Option<(T, usize)> = None;
        let mut stack = vec![root];
        while let Some(idx) = stack.pop() {
            let t_cap = best.map_or(ray.t_max, |(t, _)| t);
            match &self.nodes[idx] {
                Node::Leaf {
                    bounds,
                    start,
                    count,
                } => {
                    if !bounds.hit_by(ray, t_cap) {
                        continue;
                    }
                    for &tri in &self.order[*start..*start + *count] {
                        if exclude.contains(&tri) {
                            continue;
                        }
                        let [a, b, c] = mesh.triangle_vertices(tri);
                        if let Some(t) = ray_triangle(ray, a, b, c) {
                            let better = match best {
                                None => true,
                                Some((bt, bi)) => t < bt || (t == bt && tri < bi),
                            };
                            if better {
                                best = Some((t, tri));
                            }
                        }
                    }
                }
                Node::Inner {
                    bounds,
                    left,
                    right,
                } => {
                    if !bounds.hit_by(ray, t_cap) {
                        continue;
                    }
                    stack.push(*right);
                    stack.push(*left);
                }
            }
        }
        best.map(|(t, i)| Hit {
            t,
            point: ray.at(t),
            triangle: i,
            object_id: mesh.object_ids[i],
            normal: mesh.triangle_normal(i),
        })
    }

    /// Any-hit query: is anything (other than excluded triangles) in the
    /// ray's `[t_min, t_max]` window?
    pub fn is_occluded(&self, mesh: &TriangleMesh<T>, ray: &Ray<T>, exclude: &[usize]) -> bool {
        let Some(root) = self.root else {
            return false;
        };
        let mut stack = vec![root];
        while let Some(idx) = stack.pop() {
            let node = &self.nodes[idx];
            if !node.bounds().hit_by(ray, ray.t_max) {
                continue;
            }
            match node {
                Node::Leaf { start, count, .. } => {
                    for &tri in &self.order[*start..*start + *count] {
                        if exclude.contains(&tri) {
                            continue;
                        }
                        let [a, b, c] = mesh.triangle_vertices(tri);
                        if ray_triangle(ray, a, b, c).is_some() {
                            return true;
                        }
                    }
                }
                Node::Inner { left, right, .. } => {
                    stack.push(*left);
                    stack.push(*right);
                }
            }
        }
        false
    }
}

fn build_node<T: Real>(
    boxes: &[Aabb<T>],
    order: &mut [usize],
    start: usize,
    count: usize,
    nodes: &mut Vec<Node<T>>,
) -> usize {
    let slice = &mut order[start..start + count];
    let bounds = slice
        .iter()
        .fold(Aabb::empty(), |b, &i| b.union(boxes[i]));
    if count <= LEAF_SIZE {
        nodes.push(Node::Leaf {
            bounds,
            start,
            count,
        });
        return nodes.len() - 1;
    }
    let centroid_bounds = slice
        .iter()
        .fold(Aabb::empty(), |b, &i| b.expanded(boxes[i].centroid()));
    let axis = centroid_bounds.widest_axis();
    let mid = count / 2;
    slice.select_nth_unstable_by(mid, |&a, &b| {
        let ca = boxes[a].centroid().component(axis);
        let cb = boxes[b].centroid().component(axis);
        ca.partial_cmp(&cb).unwrap().then(a.cmp(&b))
    });
    let left = build_node(boxes, order, start, mid, nodes);
    let right = build_node(boxes, order, start + mid, count - mid, nodes);
    nodes.push(Node::Inner {
        bounds,
        left,
        right,
    });
    nodes.len() - 1
}

/// Nearest hit using the BVH; falls back to a scan only for the reference
/// oracle in tests.
pub fn ray_mesh_first_hit<T: Real>(
    bvh: &Bvh<T>,
    mesh: &TriangleMesh<T>,
    ray: &Ray<T>,
    exclude: &[usize],
) -> Option<Hit<T>> {
    bvh.first_hit(mesh, ray, exclude)
}

#[cfg(test)]
mod tests {
    use super::super::mesh::first_hit_scan;
    use super::*;

    /// Small deterministic generator for test geometry (not the engine PRNG).
    struct TestRng(u64);
    impl TestRng {
        fn next_f64(&mut self) -> f64 {
            self.0 = self.0.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (self.0 >> 11) as f64 / (1u64 << 53) as f64
        }
        fn in_range(&mut self, lo: f64, hi: f64) -> f64 {
            lo + (hi - lo) * self.next_f64()
        }
    }

    fn random_scene(rng: &mut TestRng, n: usize) -> TriangleMesh<f64> {
        let mut vertices = Vec::new();
        let mut triangles = Vec::new();
        let mut object_ids = Vec::new();
        let mut i = 0usize;
        while triangles.len() < n {
            let center = Vec3::new(
                rng.in_range(-10.0, 10.0),
                rng.in_range(-10.0, 10.0),
                rng.in_range(-10.0, 10.0),
            );
            let a = center
                + Vec3::new(
                    rng.in_range(-1.0, 1.0),
                    rng.in_range(-1.0, 1.0),
                    rng.in_range(-1.0, 1.0),
                );
            let b = center
                + Vec3::new(
                    rng.in_range(-1.0, 1.0),
                    rng.in_range(-1.0, 1.0),
                    rng.in_range(-1.0, 1.0),
                );
            let c = center
                + Vec3::new(
                    rng.in_range(-1.0, 1.0),
                    rng.in_range(-1.0, 1.0),
                    rng.in_range(-1.0, 1.0),
                );
            if (b - a).cross(c - a).norm() / 2.0 <= 1e-6 {
                continue;
            }
            let base = vertices.len() as u32;
            vertices.extend_from_slice(&[a, b, c]);
            triangles.push([base, base + 1, base + 2]);
            object_ids.push((i % 7) as u32);
            i += 1;
        }
        TriangleMesh::new(vertices, triangles, object_ids).unwrap()
    }

    #[test]
    fn bvh_matches_linear_scan_on_random_scene() {
        // 200 triangles, 1000 rays: every query must agree with the
        // exhaustive reference, including the hit triangle index.
        let mut rng = TestRng(0x5eed_cafe);
        let mesh = random_scene(&mut rng, 200);
        let bvh = Bvh::build(&mesh);
        let mut hits = 0usize;
        for _ in 0..1000 {
            let origin = Vec3::new(
                rng.in_range(-15.0, 15.0),
                rng.in_range(-15.0, 15.0),
                rng.in_range(-15.0, 15.0),
            );
            // Aim at a point inside the populated region so a useful share
            // of rays actually hit something.
            let target = Vec3::new(
                rng.in_range(-8.0, 8.0),
                rng.in_range(-8.0, 8.0),
                rng.in_range(-8.0, 8.0),
            );
            let dir = target - origin;
            if dir.norm() < 1e-6 {
                continue;
            }
            let ray = Ray::new(origin, dir.normalized(), 0.0, 100.0);
            let fast = bvh.first_hit(&mesh, &ray, &[]);
            let slow = first_hit_scan(&mesh, &ray, &[]);
            match (fast, slow) {
                (None, None) => {}
                (Some(f), Some(s)) => {
                    assert_eq!(f.triangle, s.triangle, "hit index diverged");
                    assert!((f.t - s.t).abs() < 1e-12, "hit distance diverged");
                    hits += 1;
                }
                (f, s) => panic!("BVH/scan disagreement: {f:?} vs {s:?}"),
            }
        }
        assert!(hits > 100, "test scene too sparse to be meaningful: {hits}");
    }

    #[test]
    fn occlusion_matches_scan_on_random_scene() {
        let mut rng = TestRng(0xabcd_1234);
        let mesh = random_scene(&mut rng, 150);
        let bvh = Bvh::build(&mesh);
        for _ in 0..500 {
            let origin = Vec3::new(
                rng.in_range(-12.0, 12.0),
                rng.in_range(-12.0, 12.0),
                rng.in_range(-12.0, 12.0),
            );
            let dir = Vec3::new(
                rng.in_range(-1.0, 1.0),
                rng.in_range(-1.0, 1.0),
                rng.in_range(-1.0, 1.0),
            );
            if dir.norm() < 1e-6 {
                continue;
            }
            let ray = Ray::new(origin, dir.normalized(), 0.0, 8.0);
            let any = bvh.is_occluded(&mesh, &ray, &[]);
            let reference = first_hit_scan(&mesh, &ray, &[]).is_some();
            assert_eq!(any, reference);
        }
    }

    #[test]
    fn excluded_triangle_is_transparent() {
        let mesh: TriangleMesh<f64> = TriangleMesh::new(
            vec![
                Vec3::new(-1.0, -1.0, 1.0),
                Vec3::new(1.0, -1.0, 1.0),
                Vec3::new(0.0, 1.0, 1.0),
                Vec3::new(-1.0, -1.0, 2.0),
                Vec3::new(1.0, -1.0, 2.0),
                Vec3::new(0.0, 1.0, 2.0),
            ],
            vec![[0, 1, 2], [3, 4, 5]],
            vec![0, 1],
        )
        .unwrap();
        let bvh = Bvh::build(&mesh);
        let ray = Ray::new(Vec3::zero(), Vec3::new(0.0, 0.0, 1.0), 0.0, 10.0);
        let hit = bvh.first_hit(&mesh, &ray, &[0]).unwrap();
        assert_eq!(hit.triangle, 1);
        assert!((hit.t - 2.0).abs() < 1e-12);
        assert!(!bvh.is_occluded(&mesh, &ray, &[0, 1]));
    }

    #[test]
    fn self_hit_epsilon_skips_surface_of_origin() {
        let mesh: TriangleMesh<f64> = TriangleMesh::new(
            vec![
                Vec3::new(-1.0, -1.0, 0.0),
                Vec3::new(1.0, -1.0, 0.0),
                Vec3::new(0.0, 1.0, 0.0),
            ],
            vec![[0, 1, 2]],
            vec![0],
        )
        .unwrap();
        let bvh = Bvh::build(&mesh);
        // Origin sits 1e-9 above the triangle: the downward hit is below the
        // self-hit cutoff and must be ignored.
        let ray = Ray::new(
            Vec3::new(0.0, 0.0, 1e-9),
            Vec3::new(0.0, 0.0, -1.0),
            0.0,
            10.0,
        );
        assert!(bvh.first_hit(&mesh, &ray, &[]).is_none());
    }

    #[test]
    fn empty_bvh_reports_nothing() {
        let mesh = TriangleMesh::<f64>::default();
        let bvh = Bvh::build(&mesh);
        let ray = Ray::new(Vec3::zero(), Vec3::new(1.0, 0.0, 0.0), 0.0, 10.0);
        assert!(bvh.first_hit(&mesh, &ray, &[]).is_none());
        assert!(!bvh.is_occluded(&mesh, &ray, &[]));
    }
}
