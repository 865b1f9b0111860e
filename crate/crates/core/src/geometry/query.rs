//! Ray casting, point containment and closest-point queries against a mesh.

use rayon::prelude::*;

use super::mesh::Mesh;
use super::primitives::{closest_point_triangle, ray_triangle_classify, RayHit};
use super::spatial::PointGrid;
use crate::error::Result;
use crate::Vec3;

const LEAF_SIZE: usize = 4;
/// Jittered re-casts tried when a ray grazes an edge or vertex.
const MAX_JITTER_RETRIES: usize = 8;

#[derive(Debug, Clone)]
struct Node {
    lo: Vec3,
    hi: Vec3,
    /// Leaf: `start..start+count` in `order`. Inner: children at `left`, `left+1`.
    start: usize,
    count: usize,
    left: usize,
}

/// Bounding volume hierarchy over the triangles of a mesh.
#[derive(Debug, Clone)]
pub struct TriangleBvh {
    tris: Vec<[Vec3; 3]>,
    order: Vec<usize>,
    nodes: Vec<Node>,
}

impl TriangleBvh {
    pub fn new(mesh: &Mesh) -> Self {
        let tris: Vec<[Vec3; 3]> = (0..mesh.faces().len()).map(|i| mesh.triangle(i)).collect();
        let centers: Vec<Vec3> = tris.iter().map(|t| (t[0] + t[1] + t[2]) / 3.0).collect();
        let mut order: Vec<usize> = (0..tris.len()).collect();
        let mut nodes = vec![Node {
            lo: Vec3::zeros(),
            hi: Vec3::zeros(),
            start: 0,
            count: tris.len(),
            left: 0,
        }];
        let mut stack = vec![0usize];
        while let Some(ni) = stack.pop() {
            let (start, count) = (nodes[ni].start, nodes[ni].count);
            let (mut lo, mut hi) = (Vec3::repeat(f64::INFINITY), Vec3::repeat(f64::NEG_INFINITY));
            let (mut clo, mut chi) = (lo, hi);
            for &t in &order[start..start + count] {
                for v in &tris[t] {
                    lo = lo.inf(v);
                    hi = hi.sup(v);
                }
                clo = clo.inf(&centers[t]);
                chi = chi.sup(&centers[t]);
            }
            nodes[ni].lo = lo;
            nodes[ni].hi = hi;
            if count <= LEAF_SIZE {
                continue;
            }
            let axis = (chi - clo).imax();
            let slice = &mut order[start..start + count];
            let mid = count / 2;
            slice.select_nth_unstable_by(mid, |&a, &b| {
                centers[a][axis].total_cmp(&centers[b][axis]).then(a.cmp(&b))
            });
            let left = nodes.len();
            nodes[ni].left = left;
            nodes[ni].count = 0;
            nodes.push(Node { lo, hi, start, count: mid, left: 0 });
            nodes.push(Node { lo, hi, start: start + mid, count: count - mid, left: 0 });
            stack.push(left);
            stack.push(left + 1);
        }
        TriangleBvh { tris, order, nodes }
    }

    fn is_leaf(node: &Node) -> bool {
        node.count > 0 || node.left == 0
    }

    /// Visits every triangle whose box the ray enters (t ≥ 0).
    fn for_ray(&self, origin: &Vec3, dir: &Vec3, mut f: impl FnMut(&[Vec3; 3])) {
        if self.tris.is_empty() {
            return;
        }
        let inv = dir.map(|c| 1.0 / c);
        let mut stack = vec![0usize];
        while let Some(ni) = stack.pop() {
            let n = &self.nodes[ni];
            if !ray_box(origin, &inv, &n.lo, &n.hi) {
                continue;
            }
            if Self::is_leaf(n) {
                for &t in &self.order[n.start..n.start + n.count] {
                    f(&self.tris[t]);
                }
            } else {
                stack.push(n.left);
                stack.push(n.left + 1);
            }
        }
    }

    /// Closest surface point as (point, triangle index, distance).
    pub fn closest_point(&self, p: &Vec3) -> (Vec3, usize, f64) {
        let mut best = (Vec3::zeros(), usize::MAX, f64::INFINITY);
        let mut stack = vec![0usize];
        while let Some(ni) = stack.pop() {
            let n = &self.nodes[ni];
            if box_distance(p, &n.lo, &n.hi) >= best.2 {
                continue;
            }
            if Self::is_leaf(n) {
                for &t in &self.order[n.start..n.start + n.count] {
                    let q = closest_point_triangle(p, &self.tris[t]);
                    let d = (p - q).norm();
                    if d < best.2 || (d == best.2 && t < best.1) {
                        best = (q, t, d);
                    }
                }
            } else {
                let (a, b) = (n.left, n.left + 1);
                let da = box_distance(p, &self.nodes[a].lo, &self.nodes[a].hi);
                let db = box_distance(p, &self.nodes[b].lo, &self.nodes[b].hi);
                // nearer child popped first
                if da <= db {
                    stack.push(b);
                    stack.push(a);
                } else {
                    stack.push(a);
                    stack.push(b);
                }
            }
        }
        best
    }

    pub fn bounds(&self) -> (Vec3, Vec3) {
        (self.nodes[0].lo, self.nodes[0].hi)
    }
}

fn ray_box(origin: &Vec3, inv: &Vec3, lo: &Vec3, hi: &Vec3) -> bool {
    let mut tmin: f64 = 0.0;
    let mut tmax = f64::INFINITY;
    for a in 0..3 {
        let t1 = (lo[a] - origin[a]) * inv[a];
        let t2 = (hi[a] - origin[a]) * inv[a];
        let (n, f) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
        tmin = tmin.max(n);
        tmax = tmax.min(f);
    }
    // small slack keeps rays through box faces
    tmin <= tmax * (1.0 + 1e-12) + 1e-12
}

fn box_distance(p: &Vec3, lo: &Vec3, hi: &Vec3) -> f64 {
    let d = (lo - p).sup(&(p - hi)).sup(&Vec3::zeros());
    d.norm()
}

/// Parity-test ray direction for attempt `k` (0 = the nominal diagonal).
fn ray_direction(k: usize) -> Vec3 {
    let base = Vec3::new(1.0, 1.0, 1.0);
    if k == 0 {
        return base.normalize();
    }
    let kf = k as f64;
    let jitter = Vec3::new((1.7 * kf).sin(), (2.3 * kf).cos(), (3.1 * kf).sin()) * 0.15;
    (base + jitter).normalize()
}

/// A watertight mesh prepared for containment and proximity queries.
#[derive(Debug, Clone)]
pub struct MeshQuery {
    mesh: Mesh,
    bvh: TriangleBvh,
    vertex_grid: PointGrid,
    face_normals: Vec<Vec3>,
}

impl MeshQuery {
    /// Fails if the mesh is not watertight.
    pub fn new(mesh: Mesh) -> Result<Self> {
        mesh.check_watertight()?;
        let bvh = TriangleBvh::new(&mesh);
        let vertex_grid = PointGrid::new(mesh.vertices())?;
        let face_normals = (0..mesh.faces().len()).map(|f| mesh.face_normal(f)).collect();
        Ok(MeshQuery {
            mesh,
            bvh,
            vertex_grid,
            face_normals,
        })
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn vertex_grid(&self) -> &PointGrid {
        &self.vertex_grid
    }

    pub fn face_normal(&self, face: usize) -> Vec3 {
        self.face_normals[face]
    }

    /// Strict containment by ray-crossing parity; surface points are outside.
    pub fn contains(&self, p: &Vec3) -> bool {
        let (lo, hi) = self.bvh.bounds();
        if (0..3).any(|a| p[a] < lo[a] || p[a] > hi[a]) {
            return false;
        }
        let scale = (hi - lo).max();
        let on_surface = 1e-12 * scale.max(1.0);
        let mut last = false;
        for k in 0..=MAX_JITTER_RETRIES {
            let dir = ray_direction(k);
            let mut crossings = 0usize;
            let mut grazing = false;
            let mut surface = false;
            self.bvh.for_ray(p, &dir, |tri| match ray_triangle_classify(p, &dir, tri) {
                RayHit::Hit(t) if t <= on_surface => surface = true,
                RayHit::Hit(_) => crossings += 1,
                RayHit::Grazing(t) if t.abs() <= on_surface => surface = true,
                RayHit::Grazing(_) => grazing = true,
                RayHit::Miss => {}
            });
            if surface {
                return false;
            }
            last = crossings % 2 == 1;
            if !grazing {
                return last;
            }
        }
        last
    }

    pub fn points_inside(&self, points: &[Vec3]) -> Vec<bool> {
        points.par_iter().map(|p| self.contains(p)).collect()
    }

    /// Nearest mesh vertex as (distance, vertex index).
    pub fn nearest_vertex(&self, p: &Vec3) -> (f64, usize) {
        self.vertex_grid.nearest(p)
    }

    /// Closest surface point as (point, face index, distance).
    pub fn closest_point(&self, p: &Vec3) -> (Vec3, usize, f64) {
        self.bvh.closest_point(p)
    }
}

/// Pene_h membership: which points lie strictly inside a watertight mesh.
pub fn points_inside(mesh: &Mesh, points: &[Vec3]) -> Result<Vec<bool>> {
    let q = MeshQuery::new(mesh.clone())?;
    Ok(q.points_inside(points))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;
    use crate::geometry::shapes;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn unit_cube() -> Mesh {
        shapes::box_mesh(Vec3::new(1.0, 1.0, 1.0), 1.0)
    }

    #[test]
    fn cube_containment() {
        let q = MeshQuery::new(unit_cube()).unwrap();
        assert!(q.contains(&Vec3::zeros()));
        assert!(!q.contains(&Vec3::new(2.0, 0.0, 0.0)));
        // surface points are outside; the diagonal ray from the origin hits a vertex
        assert!(!q.contains(&Vec3::new(0.5, 0.0, 0.0)));
        assert!(!q.contains(&Vec3::new(0.5, 0.5, 0.5)));
        assert!(q.contains(&Vec3::new(0.25, 0.25, 0.25)));
    }

    #[test]
    fn open_mesh_rejected() {
        let m = unit_cube();
        let open = Mesh::new(m.vertices().to_vec(), m.faces()[1..].to_vec()).unwrap();
        assert!(matches!(points_inside(&open, &[Vec3::zeros()]), Err(Error::NotWatertight(_))));
    }

    #[test]
    fn random_points_vs_analytic_box_and_sphere() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let cube = MeshQuery::new(shapes::box_mesh(Vec3::new(1.0, 1.0, 1.0), 0.25)).unwrap();
        let pts: Vec<Vec3> = (0..10_000)
            .map(|_| Vec3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        let inside = cube.points_inside(&pts);
        for (p, got) in pts.iter().zip(&inside) {
            assert_eq!(*got, p.amax() < 0.5, "{p:?}");
        }
        let sphere = shapes::sphere(1.0, 0.1);
        let sq = MeshQuery::new(sphere).unwrap();
        let inside = sq.points_inside(&pts);
        // polygonal sphere: compare away from the faceting band
        for (p, got) in pts.iter().zip(&inside) {
            let r = p.norm();
            if r < 0.99 {
                assert!(*got, "{p:?}");
            } else if r > 1.0 {
                assert!(!*got, "{p:?}");
            }
        }
    }

    #[test]
    fn closest_point_matches_brute_force() {
        let m = shapes::sphere(2.0, 0.4);
        let q = MeshQuery::new(m.clone()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..200 {
            let p = Vec3::new(rng.gen_range(-4.0..4.0), rng.gen_range(-4.0..4.0), rng.gen_range(-4.0..4.0));
            let brute = (0..m.faces().len())
                .map(|f| (p - closest_point_triangle(&p, &m.triangle(f))).norm())
                .fold(f64::INFINITY, f64::min);
            assert_eq!(q.closest_point(&p).2, brute);
        }
    }
}
