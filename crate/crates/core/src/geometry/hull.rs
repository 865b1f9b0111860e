//! Quickhull in 3D and signed distance to convex polytopes.

use std::collections::{HashMap, VecDeque};

use super::mesh::{aabb_of, Mesh};
use super::primitives::closest_point_triangle;
use crate::error::{Error, Result};
use crate::Vec3;

struct Face {
    v: [usize; 3],
    normal: Vec3,
    offset: f64,
    outside: Vec<usize>,
    alive: bool,
}

impl Face {
    fn new(points: &[Vec3], v: [usize; 3]) -> Self {
        let (a, b, c) = (points[v[0]], points[v[1]], points[v[2]]);
        let n = (b - a).cross(&(c - a));
        let normal = n.try_normalize(0.0).unwrap_or_else(Vec3::zeros);
        Face {
            v,
            normal,
            offset: normal.dot(&a),
            outside: Vec::new(),
            alive: true,
        }
    }

    fn dist(&self, p: &Vec3) -> f64 {
        self.normal.dot(p) - self.offset
    }
}

/// Convex hull of a point set as a closed mesh with outward winding. Only
/// hull vertices are kept.
pub fn convex_hull(points: &[Vec3]) -> Result<Mesh> {
    if points.len() < 4 {
        return Err(Error::Degenerate(format!(
            "convex hull needs at least 4 points, got {}",
            points.len()
        )));
    }
    let (lo, hi) = aabb_of(points);
    let scale = (hi - lo).max();
    if !scale.is_finite() || scale <= 0.0 {
        return Err(Error::Degenerate("coincident points".into()));
    }
    let eps = 5e-11 * scale;
    let simplex = initial_simplex(points, eps)?;

    let interior = simplex.iter().map(|&i| points[i]).sum::<Vec3>() / 4.0;
    let mut faces: Vec<Face> = Vec::new();
    let [i0, i1, i2, i3] = simplex;
    for tri in [[i0, i1, i2], [i0, i3, i1], [i1, i3, i2], [i0, i2, i3]] {
        let mut f = Face::new(points, tri);
        if f.dist(&interior) > 0.0 {
            f = Face::new(points, [tri[0], tri[2], tri[1]]);
        }
        faces.push(f);
    }
    let mut edges: HashMap<(usize, usize), usize> = HashMap::new();
    for (fi, f) in faces.iter().enumerate() {
        for k in 0..3 {
            edges.insert((f.v[k], f.v[(k + 1) % 3]), fi);
        }
    }
    for (pi, p) in points.iter().enumerate() {
        if simplex.contains(&pi) {
            continue;
        }
        assign(&mut faces, 0..4, pi, p, eps);
    }

    let mut cursor = 0;
    loop {
        while cursor < faces.len() && (!faces[cursor].alive || faces[cursor].outside.is_empty()) {
            cursor += 1;
        }
        if cursor == faces.len() {
            // rescan: earlier faces never regain points once cleared, but keep
            // the loop robust to any stragglers
            if let Some(i) = faces.iter().position(|f| f.alive && !f.outside.is_empty()) {
                cursor = i;
            } else {
                break;
            }
        }
        let start = cursor;
        let apex = {
            let f = &faces[start];
            let mut best = f.outside[0];
            let mut best_d = f.dist(&points[best]);
            for &q in &f.outside[1..] {
                let d = f.dist(&points[q]);
                if d > best_d {
                    best = q;
                    best_d = d;
                }
            }
            best
        };
        let p = points[apex];

        // visible region grown through edge adjacency
        let mut visible = vec![start];
        let mut is_visible: HashMap<usize, bool> = HashMap::new();
        is_visible.insert(start, true);
        let mut queue = VecDeque::from([start]);
        while let Some(fi) = queue.pop_front() {
            let v = faces[fi].v;
            for k in 0..3 {
                let nb = edges[&(v[(k + 1) % 3], v[k])];
                if is_visible.contains_key(&nb) {
                    continue;
                }
                let vis = faces[nb].dist(&p) > eps;
                is_visible.insert(nb, vis);
                if vis {
                    visible.push(nb);
                    queue.push_back(nb);
                }
            }
        }
        let mut horizon = Vec::new();
        for &fi in &visible {
            let v = faces[fi].v;
            for k in 0..3 {
                let (a, b) = (v[k], v[(k + 1) % 3]);
                let nb = edges[&(b, a)];
                if !is_visible.get(&nb).copied().unwrap_or(false) {
                    horizon.push((a, b));
                }
            }
        }
        let mut orphans = Vec::new();
        for &fi in &visible {
            let f = &mut faces[fi];
            f.alive = false;
            orphans.append(&mut f.outside);
            let v = f.v;
            for k in 0..3 {
                edges.remove(&(v[k], v[(k + 1) % 3]));
            }
        }
        let first_new = faces.len();
        for (a, b) in horizon {
            let f = Face::new(points, [a, b, apex]);
            let fi = faces.len();
            for k in 0..3 {
                edges.insert((f.v[k], f.v[(k + 1) % 3]), fi);
            }
            faces.push(f);
        }
        let new_range = first_new..faces.len();
        for q in orphans {
            if q != apex {
                assign(&mut faces, new_range.clone(), q, &points[q], eps);
            }
        }
        cursor = cursor.min(first_new);
    }

    let mut remap: HashMap<usize, usize> = HashMap::new();
    let mut vertices = Vec::new();
    let mut tris = Vec::new();
    for f in faces.iter().filter(|f| f.alive) {
        let mut t = [0; 3];
        for k in 0..3 {
            t[k] = *remap.entry(f.v[k]).or_insert_with(|| {
                vertices.push(points[f.v[k]]);
                vertices.len() - 1
            });
        }
        tris.push(t);
    }
    Mesh::new(vertices, tris)
}

fn assign(faces: &mut [Face], range: std::ops::Range<usize>, pi: usize, p: &Vec3, eps: f64) {
    let mut best = None;
    let mut best_d = eps;
    for fi in range {
        let d = faces[fi].dist(p);
        if d > best_d {
            best_d = d;
            best = Some(fi);
        }
    }
    if let Some(fi) = best {
        faces[fi].outside.push(pi);
    }
}

fn initial_simplex(points: &[Vec3], eps: f64) -> Result<[usize; 4]> {
    // extremes along each axis
    let mut extremes = [0usize; 6];
    for (i, p) in points.iter().enumerate() {
        for a in 0..3 {
            if p[a] < points[extremes[2 * a]][a] {
                extremes[2 * a] = i;
            }
            if p[a] > points[extremes[2 * a + 1]][a] {
                extremes[2 * a + 1] = i;
            }
        }
    }
    let mut best = (0, 0, -1.0);
    for &i in &extremes {
        for &j in &extremes {
            let d = (points[i] - points[j]).norm_squared();
            if d > best.2 {
                best = (i, j, d);
            }
        }
    }
    let (a, b) = (best.0, best.1);
    if best.2.sqrt() <= eps {
        return Err(Error::Degenerate("coincident points".into()));
    }
    let ab = (points[b] - points[a]).normalize();
    let (c, dc) = farthest(points, |p| {
        let ap = p - points[a];
        (ap - ab * ab.dot(&ap)).norm()
    });
    if dc <= eps {
        return Err(Error::Degenerate("collinear points".into()));
    }
    let n = (points[b] - points[a]).cross(&(points[c] - points[a])).normalize();
    let (d, dd) = farthest(points, |p| n.dot(&(p - points[a])).abs());
    if dd <= eps {
        return Err(Error::Degenerate("coplanar points".into()));
    }
    Ok([a, b, c, d])
}

fn farthest(points: &[Vec3], f: impl Fn(&Vec3) -> f64) -> (usize, f64) {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, p) in points.iter().enumerate() {
        let d = f(p);
        if d > best.1 {
            best = (i, d);
        }
    }
    best
}

/// Convex polytope given by its boundary mesh, with merged face planes.
#[derive(Debug, Clone)]
pub struct ConvexPolytope {
    mesh: Mesh,
    planes: Vec<(Vec3, f64)>,
}

impl ConvexPolytope {
    /// Audits the mesh for closure and convexity before accepting it.
    pub fn new(mesh: Mesh) -> Result<Self> {
        mesh.check_watertight()?;
        let (lo, hi) = mesh.aabb();
        let tol = 1e-9 * (hi - lo).max().max(1.0);
        let mut planes: Vec<(Vec3, f64)> = Vec::new();
        for fi in 0..mesh.faces().len() {
            let n = mesh.face_normal(fi);
            let d = n.dot(&mesh.triangle(fi)[0]);
            if !planes
                .iter()
                .any(|(m, e)| (m - n).norm() < 1e-9 && (e - d).abs() < tol)
            {
                planes.push((n, d));
            }
        }
        for (n, d) in &planes {
            if let Some(v) = mesh.vertices().iter().find(|v| n.dot(v) - d > tol) {
                return Err(Error::Contract(format!(
                    "mesh is not convex: vertex {v:?} lies outside face plane"
                )));
            }
        }
        Ok(ConvexPolytope { mesh, planes })
    }

    pub fn from_points(points: &[Vec3]) -> Result<Self> {
        Self::new(convex_hull(points)?)
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    /// Distinct supporting planes as (outward unit normal, offset).
    pub fn planes(&self) -> &[(Vec3, f64)] {
        &self.planes
    }

    /// Largest signed plane distance; equals the SDF inside the polytope.
    pub fn max_plane_distance(&self, p: &Vec3) -> f64 {
        self.planes
            .iter()
            .map(|(n, d)| n.dot(p) - d)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Signed distance: positive outside, negative inside.
    pub fn sdf(&self, p: &Vec3) -> f64 {
        let m = self.max_plane_distance(p);
        if m <= 0.0 {
            return m;
        }
        (0..self.mesh.faces().len())
            .map(|fi| (p - closest_point_triangle(p, &self.mesh.triangle(fi))).norm())
            .fold(f64::INFINITY, f64::min)
    }

    /// Gradient of the SDF outside; `None` inside, where the caller works
    /// with the active planes instead.
    pub fn outside_gradient(&self, p: &Vec3) -> Option<Vec3> {
        if self.max_plane_distance(p) <= 0.0 {
            return None;
        }
        let mut best = (f64::INFINITY, Vec3::zeros());
        for fi in 0..self.mesh.faces().len() {
            let q = closest_point_triangle(p, &self.mesh.triangle(fi));
            let d = (p - q).norm();
            if d < best.0 {
                best = (d, q);
            }
        }
        (p - best.1).try_normalize(0.0)
    }
}

/// Signed distance from `p` to a convex hull mesh.
pub fn sdf_convex(hull: &ConvexPolytope, p: &Vec3) -> f64 {
    hull.sdf(p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cube_corners() -> Vec<Vec3> {
        let mut v = Vec::new();
        for x in [-0.5, 0.5] {
            for y in [-0.5, 0.5] {
                for z in [-0.5, 0.5] {
                    v.push(Vec3::new(x, y, z));
                }
            }
        }
        v
    }

    #[test]
    fn cube_hull_drops_interior_point() {
        let mut pts = cube_corners();
        pts.push(Vec3::zeros());
        let h = convex_hull(&pts).unwrap();
        assert_eq!(h.vertices().len(), 8);
        assert_eq!(h.faces().len(), 12);
        h.check_watertight().unwrap();
        assert!((h.signed_volume() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn tetrahedron_hull() {
        let pts = vec![Vec3::zeros(), Vec3::x(), Vec3::y(), Vec3::z()];
        let h = convex_hull(&pts).unwrap();
        assert_eq!(h.vertices().len(), 4);
        assert_eq!(h.faces().len(), 4);
        assert!(h.signed_volume() > 0.0);
    }

    #[test]
    fn degenerate_inputs_rejected() {
        let flat: Vec<Vec3> = (0..10).map(|i| Vec3::new(i as f64, (i * i) as f64, 0.0)).collect();
        assert!(matches!(convex_hull(&flat), Err(Error::Degenerate(_))));
        let line: Vec<Vec3> = (0..10).map(|i| Vec3::new(i as f64, 0.0, 0.0)).collect();
        assert!(matches!(convex_hull(&line), Err(Error::Degenerate(_))));
        assert!(matches!(convex_hull(&line[..3]), Err(Error::Degenerate(_))));
    }

    #[test]
    fn random_ball_containment() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let pts: Vec<Vec3> = (0..100)
            .map(|_| loop {
                let p = Vec3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
                if p.norm() <= 1.0 {
                    break p;
                }
            })
            .collect();
        let hull = ConvexPolytope::from_points(&pts).unwrap();
        for p in &pts {
            // half-space test against every face
            for fi in 0..hull.mesh().faces().len() {
                let n = hull.mesh().face_normal(fi);
                let d = n.dot(&(p - hull.mesh().triangle(fi)[0]));
                assert!(d <= 1e-9, "point outside face by {d}");
            }
            assert!(hull.sdf(p) <= 1e-9);
        }
    }

    #[test]
    fn cube_sdf_values() {
        let hull = ConvexPolytope::from_points(&cube_corners()).unwrap();
        assert_eq!(hull.planes().len(), 6);
        assert!((hull.sdf(&Vec3::zeros()) + 0.5).abs() < 1e-12);
        assert!((hull.sdf(&Vec3::new(1.0, 0.0, 0.0)) - 0.5).abs() < 1e-12);
        assert!(hull.sdf(&Vec3::new(0.5, 0.0, 0.0)).abs() < 1e-9);
        // outside a corner: Euclidean distance to the vertex
        let d = hull.sdf(&Vec3::new(1.5, 1.5, 1.5));
        assert!((d - 3f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn non_convex_mesh_is_contract_violation() {
        let m = crate::geometry::shapes::mug(2.0, 3.0, 0.3, 0.5);
        assert!(matches!(ConvexPolytope::new(m), Err(Error::Contract(_))));
    }
}
