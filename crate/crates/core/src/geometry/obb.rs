//! Tight oriented bounding boxes on principal axes.

use nalgebra::{Matrix3, SymmetricEigen, Vector2};
use serde::{Deserialize, Serialize};

use super::hull::convex_hull;
use super::mesh::vertex_centroid;
use crate::error::{Error, Result};
use crate::Vec3;

/// Eigenvalues closer than this (relative to the largest) share an eigenspace.
const EIGEN_TIE: f64 = 1e-8;

/// Fixed direction used to pick axis signs.
fn sign_reference() -> Vec3 {
    Vec3::new(1.0, 2.0, 3.0).normalize()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObbResult {
    /// Extents along `axes`, ascending.
    pub lengths: [f64; 3],
    /// Right-handed orthonormal frame; `axes[k]` carries `lengths[k]`.
    pub axes: [Vec3; 3],
    /// Centroid of the input points.
    pub center: Vec3,
}

impl ObbResult {
    pub fn frame(&self) -> Matrix3<f64> {
        Matrix3::from_columns(&self.axes)
    }
}

/// PCA box: axes are covariance eigenvectors, lengths are the max − min
/// projections. Inside a repeated eigenspace every basis is an eigenbasis, so
/// the basis giving the smallest box is used; this keeps the result
/// independent of the input orientation.
pub fn pca_obb(points: &[Vec3]) -> Result<ObbResult> {
    if points.len() < 4 {
        return Err(Error::Degenerate(format!(
            "bounding box needs at least 4 points, got {}",
            points.len()
        )));
    }
    let center = vertex_centroid(points);
    let mut cov = Matrix3::zeros();
    for p in points {
        let d = p - center;
        cov += d * d.transpose();
    }
    cov /= points.len() as f64;
    let eig = SymmetricEigen::new(cov);
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let lam = order.map(|i| eig.eigenvalues[i]);
    let vecs = order.map(|i| eig.eigenvectors.column(i).into_owned());
    if !(lam[2] > 0.0) || lam[0] <= 1e-12 * lam[2] {
        return Err(Error::Degenerate(
            "points do not span three dimensions".into(),
        ));
    }
    let tie01 = (lam[1] - lam[0]) <= EIGEN_TIE * lam[2];
    let tie12 = (lam[2] - lam[1]) <= EIGEN_TIE * lam[2];
    let axes: [Vec3; 3] = match (tie01, tie12) {
        (false, false) => vecs,
        (true, false) => plane_axes(points, &vecs[2]),
        (false, true) => plane_axes(points, &vecs[0]),
        (true, true) => isotropic_axes(points)?,
    };

    let mut boxes: Vec<(f64, Vec3)> = axes
        .iter()
        .map(|a| (extent(points, a), *a))
        .collect();
    boxes.sort_by(|a, b| a.0.total_cmp(&b.0));
    let r = sign_reference();
    let mut a0 = boxes[0].1;
    let mut a1 = boxes[1].1;
    if a0.dot(&r) < 0.0 {
        a0 = -a0;
    }
    if a1.dot(&r) < 0.0 {
        a1 = -a1;
    }
    let a2 = a0.cross(&a1).normalize();
    Ok(ObbResult {
        lengths: [boxes[0].0, boxes[1].0, boxes[2].0],
        axes: [a0, a1, a2],
        center,
    })
}

fn extent(points: &[Vec3], axis: &Vec3) -> f64 {
    let (lo, hi) = points.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
        let t = axis.dot(p);
        (lo.min(t), hi.max(t))
    });
    hi - lo
}

fn orthonormal_pair(n: &Vec3) -> (Vec3, Vec3) {
    let helper = if n.x.abs() < 0.9 { Vec3::x() } else { Vec3::y() };
    let u = n.cross(&helper).normalize();
    let v = n.cross(&u);
    (u, v)
}

/// Frame `[u, v, n]` where (u, v) is the minimum-area rectangle of the points
/// projected on the plane orthogonal to `n`.
fn plane_axes(points: &[Vec3], n: &Vec3) -> [Vec3; 3] {
    let (e1, e2) = orthonormal_pair(n);
    let projected: Vec<Vector2<f64>> = points
        .iter()
        .map(|p| Vector2::new(e1.dot(p), e2.dot(p)))
        .collect();
    let (dir, _) = min_area_rectangle(&projected);
    let u = e1 * dir.x + e2 * dir.y;
    let v = n.cross(&u);
    [u, v, *n]
}

/// For isotropic covariance: try each hull face normal as an axis and keep the
/// smallest-volume box.
fn isotropic_axes(points: &[Vec3]) -> Result<[Vec3; 3]> {
    let hull = convex_hull(points)?;
    let hv = hull.vertices();
    let mut best: Option<(f64, [Vec3; 3])> = None;
    for fi in 0..hull.faces().len() {
        let n = hull.face_normal(fi);
        let axes = plane_axes(hv, &n);
        let vol: f64 = axes.iter().map(|a| extent(hv, a)).product();
        if best.as_ref().map_or(true, |(b, _)| vol < *b * (1.0 - 1e-12)) {
            best = Some((vol, axes));
        }
    }
    Ok(best.expect("hull has faces").1)
}

/// Minimum-area enclosing rectangle via rotating edges of the 2D hull.
/// Returns the unit direction of one rectangle side and the area.
pub(crate) fn min_area_rectangle(points: &[Vector2<f64>]) -> (Vector2<f64>, f64) {
    let hull = hull_2d(points);
    if hull.len() < 3 {
        return (Vector2::x(), 0.0);
    }
    let mut best = (Vector2::x(), f64::INFINITY);
    for i in 0..hull.len() {
        let e = hull[(i + 1) % hull.len()] - hull[i];
        let Some(d) = e.try_normalize(0.0) else { continue };
        let perp = Vector2::new(-d.y, d.x);
        let (mut lo_a, mut hi_a, mut lo_b, mut hi_b) =
            (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
        for p in &hull {
            let a = d.dot(p);
            let b = perp.dot(p);
            lo_a = lo_a.min(a);
            hi_a = hi_a.max(a);
            lo_b = lo_b.min(b);
            hi_b = hi_b.max(b);
        }
        let area = (hi_a - lo_a) * (hi_b - lo_b);
        if area < best.1 * (1.0 - 1e-12) {
            best = (d, area);
        }
    }
    best
}

/// Andrew's monotone chain, counter-clockwise, collinear points removed.
fn hull_2d(points: &[Vector2<f64>]) -> Vec<Vector2<f64>> {
    let mut pts = points.to_vec();
    pts.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let cross = |o: &Vector2<f64>, a: &Vector2<f64>, b: &Vector2<f64>| {
        (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x)
    };
    let mut lower: Vec<Vector2<f64>> = Vec::new();
    for p in &pts {
        while lower.len() >= 2 && cross(&lower[lower.len() - 2], &lower[lower.len() - 1], p) <= 0.0 {
            lower.pop();
        }
        lower.push(*p);
    }
    let mut upper: Vec<Vector2<f64>> = Vec::new();
    for p in pts.iter().rev() {
        while upper.len() >= 2 && cross(&upper[upper.len() - 2], &upper[upper.len() - 1], p) <= 0.0 {
            upper.pop();
        }
        upper.push(*p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}
