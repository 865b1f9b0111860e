//! Largest inscribed ball of the hand's convex hull. Open or flat hands have
//! thin hulls and are rejected as non-grasping poses.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::HandModel;
use crate::error::Result;
use crate::geometry::ConvexPolytope;
use crate::Vec3;

pub const DEFAULT_GATE_THRESHOLD: f64 = 0.4;

const ITERS_PER_START: usize = 500;
const MAX_ACTIVE: usize = 12;

/// Jitter directions for the extra starts, scaled by 0.1·scale(H).
const JITTER: [[f64; 3]; 7] = [
    [1.0, 1.0, 1.0],
    [-1.0, 1.0, -1.0],
    [1.0, -1.0, -1.0],
    [-1.0, -1.0, 1.0],
    [1.0, 0.0, 0.0],
    [0.0, 1.0, 0.0],
    [0.0, 0.0, -1.0],
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InscribedBall {
    pub center: Vec3,
    /// Radius in the input's units.
    pub radius: f64,
    /// Circumradius of the hull about its vertex centroid.
    pub hull_scale: f64,
    /// Optimizer trace of the winning start: (center, SDF + scale).
    pub trace: Vec<(Vec3, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateReport {
    pub hull_scale: f64,
    pub inscribed_radius: f64,
    pub inscribed_radius_normalized: f64,
    pub center: Vec3,
    pub threshold: f64,
    pub accepted: bool,
    pub trace: Vec<(Vec3, f64)>,
}

/// Runs the inscribed-ball gate on the hand's vertices. The radius is
/// normalized by the hand's normalization scale; the hand is accepted iff the
/// normalized radius is at least `threshold`.
pub fn grasp_gate(hand: &HandModel, threshold: f64) -> Result<GateReport> {
    let ball = inscribed_ball(hand.mesh().vertices())?;
    let normalized = ball.radius / hand.normalization_scale();
    Ok(GateReport {
        hull_scale: ball.hull_scale,
        inscribed_radius: ball.radius,
        inscribed_radius_normalized: normalized,
        center: ball.center,
        threshold,
        accepted: normalized >= threshold,
        trace: ball.trace,
    })
}

/// Maximizes the inscribed-ball radius of the convex hull of `points` by
/// minimizing SDF(H, o) + scale(H) over the center `o` from 8 fixed starts.
pub fn inscribed_ball(points: &[Vec3]) -> Result<InscribedBall> {
    let hull = ConvexPolytope::from_points(points)?;
    let verts = hull.mesh().vertices();
    let centroid = verts.iter().sum::<Vec3>() / verts.len() as f64;
    let scale = verts
        .iter()
        .map(|v| (v - centroid).norm())
        .fold(0.0, f64::max);

    let mut starts = vec![centroid];
    starts.extend(
        JITTER
            .iter()
            .map(|d| centroid + Vec3::from(*d).normalize() * (0.1 * scale)),
    );
    let runs: Vec<(Vec3, f64, Vec<(Vec3, f64)>)> = starts
        .par_iter()
        .map(|s| descend(&hull, *s, scale))
        .collect();
    // deterministic best: lowest loss, earliest start on ties
    let mut best = 0;
    for (i, r) in runs.iter().enumerate() {
        if r.1 < runs[best].1 {
            best = i;
        }
    }
    let (center, _, trace) = runs.into_iter().nth(best).expect("eight starts");
    let radius = (-hull.sdf(&center)).max(0.0);
    Ok(InscribedBall {
        center,
        radius,
        hull_scale: scale,
        trace,
    })
}

fn descend(hull: &ConvexPolytope, start: Vec3, scale: f64) -> (Vec3, f64, Vec<(Vec3, f64)>) {
    let loss = |o: &Vec3| hull.sdf(o) + scale;
    let mut o = start;
    let mut f = loss(&o);
    let mut step = 0.01 * scale;
    let floor = 1e-13 * scale;
    let mut trace = Vec::with_capacity(ITERS_PER_START + 1);
    trace.push((o, f));
    for _ in 0..ITERS_PER_START {
        if step < floor {
            break;
        }
        let dir = match hull.outside_gradient(&o) {
            Some(g) => -g,
            None => {
                let m = min_norm_active(hull, &o, 2.0 * step);
                match m.try_normalize(1e-12) {
                    Some(m) => -m,
                    None => {
                        // already optimal within the current tolerance
                        step *= 0.5;
                        trace.push((o, f));
                        continue;
                    }
                }
            }
        };
        let cand = o + dir * step;
        let fc = loss(&cand);
        if fc < f {
            o = cand;
            f = fc;
        } else {
            step *= 0.5;
        }
        trace.push((o, f));
    }
    (o, f, trace)
}

/// Minimum-norm element of the convex hull of the normals of planes within
/// `eps` of the most active one: the steepest-descent direction of the
/// max-of-planes function.
fn min_norm_active(hull: &ConvexPolytope, o: &Vec3, eps: f64) -> Vec3 {
    let mut dist: Vec<(f64, Vec3)> = hull
        .planes()
        .iter()
        .map(|(n, d)| (n.dot(o) - d, *n))
        .collect();
    dist.sort_by(|a, b| b.0.total_cmp(&a.0));
    let top = dist[0].0;
    let normals: Vec<Vec3> = dist
        .iter()
        .take(MAX_ACTIVE)
        .take_while(|(d, _)| *d >= top - eps)
        .map(|(_, n)| *n)
        .collect();
    min_norm_point(&normals)
}

/// Exact minimum-norm point of the convex hull of a few 3-vectors by
/// enumerating supporting faces of size one to three.
pub(crate) fn min_norm_point(v: &[Vec3]) -> Vec3 {
    let n = v.len();
    let optimal = |m: &Vec3| {
        let mm = m.norm_squared();
        v.iter().all(|p| p.dot(m) >= mm - 1e-12)
    };
    let mut best: Option<Vec3> = None;
    let mut consider = |m: Vec3| {
        if optimal(&m) && best.map_or(true, |b| m.norm_squared() < b.norm_squared()) {
            best = Some(m);
        }
    };
    for i in 0..n {
        consider(v[i]);
        for j in i + 1..n {
            if let Some(m) = affine_min_norm(&[v[i], v[j]]) {
                consider(m);
            }
            for k in j + 1..n {
                if let Some(m) = affine_min_norm(&[v[i], v[j], v[k]]) {
                    consider(m);
                }
            }
        }
    }
    // no face is optimal: the origin lies in the hull
    best.unwrap_or_else(Vec3::zeros)
}

/// Min-norm point of the affine hull of `pts`, if its barycentric weights are
/// all non-negative.
fn affine_min_norm(pts: &[Vec3]) -> Option<Vec3> {
    let p0 = pts[0];
    let e: Vec<Vec3> = pts[1..].iter().map(|p| p - p0).collect();
    let k = e.len();
    let mut a = nalgebra::DMatrix::<f64>::zeros(k, k);
    let mut rhs = nalgebra::DVector::<f64>::zeros(k);
    for r in 0..k {
        for c in 0..k {
            a[(r, c)] = e[r].dot(&e[c]);
        }
        rhs[r] = -e[r].dot(&p0);
    }
    let w = a.lu().solve(&rhs)?;
    let w0 = 1.0 - w.sum();
    if w0 < -1e-12 || w.iter().any(|x| *x < -1e-12) {
        return None;
    }
    let mut m = p0;
    for r in 0..k {
        m += e[r] * w[r];
    }
    Some(m)
}
