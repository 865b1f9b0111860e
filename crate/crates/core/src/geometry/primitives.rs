use crate::Vec3;

/// Barycentric/edge slack treated as grazing by the parity test.
pub(crate) const GRAZE_EPS: f64 = 1e-9;

/// Outcome of a ray/triangle test that also reports numerically fragile hits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum RayHit {
    Miss,
    Hit(f64),
    /// The ray passes within tolerance of an edge or vertex, or lies in the
    /// triangle's plane. Carries the hit distance when defined.
    Grazing(f64),
}

/// Möller–Trumbore intersection. Returns the hit distance `t > 0` when
/// `origin + t·dir` lies inside the triangle; edges and vertices count as
/// inside.
pub fn ray_triangle(origin: &Vec3, dir: &Vec3, tri: &[Vec3; 3]) -> Option<f64> {
    let e1 = tri[1] - tri[0];
    let e2 = tri[2] - tri[0];
    let p = dir.cross(&e2);
    let det = e1.dot(&p);
    if det.abs() < 1e-15 * e1.norm() * e2.norm() {
        return None;
    }
    let inv = 1.0 / det;
    let s = origin - tri[0];
    let u = s.dot(&p) * inv;
    if !(0.0..=1.0).contains(&u) {
        return None;
    }
    let q = s.cross(&e1);
    let v = dir.dot(&q) * inv;
    if v < 0.0 || u + v > 1.0 {
        return None;
    }
    let t = e2.dot(&q) * inv;
    (t > 0.0).then_some(t)
}

pub(crate) fn ray_triangle_classify(origin: &Vec3, dir: &Vec3, tri: &[Vec3; 3]) -> RayHit {
    let e1 = tri[1] - tri[0];
    let e2 = tri[2] - tri[0];
    let p = dir.cross(&e2);
    let det = e1.dot(&p);
    let scale = e1.norm() * e2.norm();
    let s = origin - tri[0];
    if det.abs() < 1e-12 * scale {
        // parallel: only matters if the ray lies in the plane
        let n = e1.cross(&e2);
        if n.dot(&s).abs() < 1e-12 * scale.sqrt() * n.norm() {
            return RayHit::Grazing(f64::INFINITY);
        }
        return RayHit::Miss;
    }
    let inv = 1.0 / det;
    let u = s.dot(&p) * inv;
    let q = s.cross(&e1);
    let v = dir.dot(&q) * inv;
    let w = 1.0 - u - v;
    if u < -GRAZE_EPS || v < -GRAZE_EPS || w < -GRAZE_EPS {
        return RayHit::Miss;
    }
    let t = e2.dot(&q) * inv;
    if t < -1e-12 {
        return RayHit::Miss;
    }
    if u < GRAZE_EPS || v < GRAZE_EPS || w < GRAZE_EPS {
        return RayHit::Grazing(t);
    }
    RayHit::Hit(t)
}

/// Closest point on a triangle to `p`.
pub fn closest_point_triangle(p: &Vec3, tri: &[Vec3; 3]) -> Vec3 {
    let [a, b, c] = *tri;
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;
    let d1 = ab.dot(&ap);
    let d2 = ac.dot(&ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return a;
    }
    let bp = p - b;
    let d3 = ab.dot(&bp);
    let d4 = ac.dot(&bp);
    if d3 >= 0.0 && d4 <= d3 {
        return b;
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        return a + ab * (d1 / (d1 - d3));
    }
    let cp = p - c;
    let d5 = ab.dot(&cp);
    let d6 = ac.dot(&cp);
    if d6 >= 0.0 && d5 <= d6 {
        return c;
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        return a + ac * (d2 / (d2 - d6));
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        return b + (c - b) * ((d4 - d3) / ((d4 - d3) + (d5 - d6)));
    }
    let denom = 1.0 / (va + vb + vc);
    a + ab * (vb * denom) + ac * (vc * denom)
}
