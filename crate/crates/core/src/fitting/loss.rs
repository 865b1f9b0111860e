//! Attraction, repulsion and simulation losses with their semi-smooth
//! gradient. Discrete choices (penetration set, nearest pairs, contacts) are
//! captured in a [`FrozenStructure`]; loss and gradient are then smooth
//! functions of the pose.

use std::f64::consts::FRAC_PI_2;

use nalgebra::{Matrix3, Rotation3};
use serde::{Deserialize, Serialize};

use super::closure::{closure_center_gradient, closure_terms, NO_CONTACT_PENALTY};
use super::{FitConfig, PoseParams};
use crate::error::{Error, Result};
use crate::geometry::{Mesh, PointGrid};
use crate::hand::{HandModel, InsideCache, PreparedHand};
use crate::Vec3;

/// Bounded scale `s(x) = 2k / (1 + exp(1 − x)) + 1 − k`, in (1 − k, 1 + k).
/// Evaluated as the equivalent `1 + k tanh((x − 1) / 2)`, which cannot round
/// past the bounds.
pub fn scale_map(x: f64, k: f64) -> f64 {
    1.0 + k * ((x - 1.0) / 2.0).tanh()
}

pub(crate) fn scale_map_derivative(x: f64, k: f64) -> f64 {
    let t = ((x - 1.0) / 2.0).tanh();
    0.5 * k * (1.0 - t * t)
}

/// `Φ_α(x) = α tan(x / α)` with the argument clamped below the pole at
/// `0.99 α π / 2`.
pub fn phi_alpha(x: f64, alpha: f64) -> Result<f64> {
    if x < 0.0 {
        return Err(Error::Contract(format!("phi_alpha needs x >= 0, got {x}")));
    }
    Ok(phi(x, alpha).0)
}

/// Value and derivative; the derivative is zero beyond the clamp.
pub(crate) fn phi(x: f64, alpha: f64) -> (f64, f64) {
    let limit = 0.99 * alpha * FRAC_PI_2;
    if x >= limit {
        return (alpha * (limit / alpha).tan(), 0.0);
    }
    let c = (x / alpha).cos();
    (alpha * (x / alpha).tan(), 1.0 / (c * c))
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LossComponents {
    pub attraction: f64,
    pub repulsion: f64,
    pub sim: f64,
    pub total: f64,
}

/// Discrete choices made at one pose.
#[derive(Debug, Clone, PartialEq)]
pub struct FrozenStructure {
    /// Per region: (hand vertex, object vertex) of the closest pair between
    /// the region and the non-penetrating object vertices.
    pub attraction: Vec<(usize, usize)>,
    /// (penetrating object vertex, nearest hand vertex).
    pub repulsion: Vec<(usize, usize)>,
    /// (hand vertex within the contact threshold of the posed object,
    /// nearest object vertex).
    pub contacts: Vec<(usize, usize)>,
}

/// SO(3) left Jacobian: `R(ω + δ) ≈ Exp(J_l(ω) δ) R(ω)`.
pub(crate) fn left_jacobian(w: &Vec3) -> Matrix3<f64> {
    let theta = w.norm();
    let k = crate::fitting::closure::skew(w);
    let (a, b) = if theta < 1e-4 {
        let t2 = theta * theta;
        (0.5 - t2 / 24.0, 1.0 / 6.0 - t2 / 120.0)
    } else {
        let t2 = theta * theta;
        ((1.0 - theta.cos()) / t2, (theta - theta.sin()) / (t2 * theta))
    };
    Matrix3::identity() + k * a + k * k * b
}

/// Fitting problem: a prepared hand and object vertices in the object's
/// local frame (posed as `R s v + t`).
pub struct Problem<'a> {
    pub(crate) hand: &'a PreparedHand,
    pub(crate) local: Vec<Vec3>,
    pub(crate) local_centroid: Vec3,
    object_cell: f64,
    pub(crate) config: &'a FitConfig,
}

impl<'a> Problem<'a> {
    pub fn new(hand: &'a PreparedHand, local: Vec<Vec3>, config: &'a FitConfig) -> Result<Self> {
        if local.is_empty() {
            return Err(Error::EmptyMesh);
        }
        let grid = PointGrid::new(&local)?;
        let local_centroid = local.iter().sum::<Vec3>() / local.len() as f64;
        Ok(Problem {
            hand,
            local,
            local_centroid,
            // posed scale stays within (1 − k, 1 + k)
            object_cell: grid.cell_size(),
            config,
        })
    }

    pub fn posed(&self, pose: &PoseParams) -> Vec<Vec3> {
        let (r, s) = (pose.rotation_matrix(), pose.scale(self.config.k));
        self.local.iter().map(|u| r * (u * s) + pose.translation).collect()
    }

    fn posed_one(&self, r: &Rotation3<f64>, s: f64, t: &Vec3, j: usize) -> Vec3 {
        r * (self.local[j] * s) + t
    }

    /// Freezes penetration, nearest pairs and contacts at `posed`.
    pub fn structure(&self, posed: &[Vec3], cache: &mut InsideCache) -> FrozenStructure {
        let hand_v = self.hand.hand().mesh().vertices();
        let inside = self.hand.inside_cached(posed, cache);

        let free: Vec<usize> = (0..posed.len()).filter(|&j| !inside[j]).collect();
        let mut attraction = Vec::new();
        if !free.is_empty() {
            let pts: Vec<Vec3> = free.iter().map(|&j| posed[j]).collect();
            let grid = PointGrid::with_cell(&pts, self.object_cell).expect("non-empty");
            for region in self.hand.hand().contact_regions() {
                let mut best = (f64::INFINITY, 0usize, 0usize);
                for &h in region {
                    if let Some((d, k)) = grid.nearest_below(&hand_v[h], best.0) {
                        best = (d, h, free[k]);
                    }
                }
                attraction.push((best.1, best.2));
            }
        }

        let repulsion = (0..posed.len())
            .filter(|&j| inside[j])
            .map(|j| (j, self.hand.query().nearest_vertex(&posed[j]).1))
            .collect();

        // every hand vertex within the contact threshold, paired with its
        // nearest object vertex
        let thr = self.hand.contact_threshold();
        let (lo, hi) = self.hand.query().mesh().aabb();
        let mut best = vec![(f64::INFINITY, usize::MAX); hand_v.len()];
        for (j, p) in posed.iter().enumerate() {
            if (0..3).any(|a| p[a] < lo[a] - thr || p[a] > hi[a] + thr) {
                continue;
            }
            // hand vertices lie on the surface
            if cache.surface_distance_bound(j, p) > thr {
                continue;
            }
            self.hand.contacts_near(p, |d, h| {
                if d < best[h].0 {
                    best[h] = (d, j);
                }
            });
        }
        let contacts = best
            .iter()
            .enumerate()
            .filter(|(_, b)| b.1 != usize::MAX)
            .map(|(h, b)| (h, b.1))
            .collect();

        FrozenStructure {
            attraction,
            repulsion,
            contacts,
        }
    }

    /// Loss of the frozen structure at `pose`.
    pub fn loss(&self, s: &FrozenStructure, pose: &PoseParams) -> LossComponents {
        self.evaluate(s, pose, false).0
    }

    /// Loss and gradient (translation, axis-angle, scale logit) of the frozen
    /// structure at `pose`.
    pub fn gradient(&self, s: &FrozenStructure, pose: &PoseParams) -> (LossComponents, [f64; 7]) {
        self.evaluate(s, pose, true)
    }

    fn evaluate(&self, st: &FrozenStructure, pose: &PoseParams, want_grad: bool) -> (LossComponents, [f64; 7]) {
        let cfg = self.config;
        let hand = self.hand.hand();
        let hv = hand.mesh().vertices();
        let r = pose.rotation_matrix();
        let sc = pose.scale(cfg.k);
        let t = pose.translation;
        // (local point, dL/dp) pairs; the centroid enters through the sim terms
        let mut grads: Vec<(Vec3, Vec3)> = Vec::new();

        let mut la = 0.0;
        for &(h, j) in &st.attraction {
            let p = self.posed_one(&r, sc, &t, j);
            let diff = p - hv[h];
            let d = diff.norm();
            let (v, dv) = phi(d, cfg.alpha);
            la += v;
            if want_grad && d > 0.0 {
                grads.push((self.local[j], diff * (cfg.lambda_a * dv / d)));
            }
        }

        let mut lr = 0.0;
        for &(j, h) in &st.repulsion {
            let p = self.posed_one(&r, sc, &t, j);
            let diff = p - hv[h];
            let d = diff.norm();
            let (v, dv) = phi(d, cfg.alpha);
            lr += v;
            if want_grad && d > 0.0 {
                grads.push((self.local[j], diff * (cfg.lambda_r * dv / d)));
            }
        }

        let lsim = if st.contacts.is_empty() {
            NO_CONTACT_PENALTY
        } else {
            let c = r * (self.local_centroid * sc) + t;
            let normals = hand.mesh().vertex_normals();
            let rel: Vec<Vec3> = st.contacts.iter().map(|&(h, _)| hv[h] - c).collect();
            let ns: Vec<Vec3> = st.contacts.iter().map(|&(h, _)| normals[h]).collect();
            // averaged over contacts: hinge(ε − λ_min/N) + ‖G n̂‖/N + λ_dist mean d
            let n_c = st.contacts.len() as f64;
            let terms = closure_terms(&rel, &ns, cfg.epsilon_fc * n_c);
            let mut dist = 0.0;
            for &(h, j) in &st.contacts {
                let p = self.posed_one(&r, sc, &t, j);
                let diff = p - hv[h];
                let d = diff.norm();
                dist += d;
                if want_grad && d > 0.0 {
                    grads.push((self.local[j], diff * (cfg.lambda_sim * cfg.lambda_dist / (d * n_c))));
                }
            }
            if want_grad {
                let gc = closure_center_gradient(&rel, &ns, cfg.epsilon_fc * n_c);
                grads.push((self.local_centroid, gc * (cfg.lambda_sim / n_c)));
            }
            (terms.hinge + terms.wrench + cfg.lambda_dist * dist) / n_c
        };

        let total = cfg.lambda_a * la + cfg.lambda_r * lr + cfg.lambda_sim * lsim;
        let comps = LossComponents {
            attraction: la,
            repulsion: lr,
            sim: lsim,
            total,
        };
        if !want_grad {
            return (comps, [0.0; 7]);
        }

        let ds = scale_map_derivative(pose.scale_logit, cfg.k);
        let mut gt = Vec3::zeros();
        let mut torque = Vec3::zeros();
        let mut gs = 0.0;
        for (u, g) in &grads {
            gt += g;
            let ru = r * u;
            torque += (ru * sc).cross(g);
            gs += g.dot(&(ru * ds));
        }
        let gw = left_jacobian(&pose.rotation).transpose() * torque;
        (comps, [gt.x, gt.y, gt.z, gw.x, gw.y, gw.z, gs])
    }
}

/// Attraction loss of posed object vertices: per contact region, Φ_α of
/// the distance to the nearest object vertex outside the hand (regions with
/// no such vertex contribute zero).
pub fn attraction_loss(hand: &HandModel, posed: &[Vec3], alpha: f64) -> Result<f64> {
    let prep = PreparedHand::new(hand, 1.0)?;
    let inside = prep.query().points_inside(posed);
    let free: Vec<Vec3> = posed.iter().zip(&inside).filter(|(_, i)| !**i).map(|(p, _)| *p).collect();
    if free.is_empty() {
        return Ok(0.0);
    }
    let grid = PointGrid::new(&free)?;
    let hv = hand.mesh().vertices();
    Ok(hand
        .contact_regions()
        .iter()
        .map(|r| {
            let d = r.iter().map(|&h| grid.nearest(&hv[h]).0).fold(f64::INFINITY, f64::min);
            phi(d, alpha).0
        })
        .sum())
}

/// Repulsion loss: Σ over object vertices strictly inside the hand of Φ_α of
/// the distance to the nearest hand vertex.
pub fn repulsion_loss(hand: &HandModel, posed: &[Vec3], alpha: f64) -> Result<f64> {
    let prep = PreparedHand::new(hand, 1.0)?;
    let inside = prep.query().points_inside(posed);
    Ok(posed
        .iter()
        .zip(inside)
        .filter(|(_, i)| *i)
        .map(|(p, _)| phi(prep.query().nearest_vertex(p).0, alpha).0)
        .sum())
}

fn problem_for<'a>(prep: &'a PreparedHand, object: &Mesh, config: &'a FitConfig) -> Result<Problem<'a>> {
    Problem::new(prep, object.vertices().to_vec(), config)
}

/// Total loss with object vertices posed as `R(ω) s(σ) v + t`.
pub fn total_loss(hand: &HandModel, object: &Mesh, pose: &PoseParams, config: &FitConfig) -> Result<LossComponents> {
    config.validate()?;
    let prep = PreparedHand::new(hand, config.contact_threshold)?;
    let problem = problem_for(&prep, object, config)?;
    let st = problem.structure(&problem.posed(pose), &mut InsideCache::default());
    Ok(problem.loss(&st, pose))
}

/// Semi-smooth gradient of [`total_loss`] with respect to
/// (translation, axis-angle, scale logit).
pub fn gradient(hand: &HandModel, object: &Mesh, pose: &PoseParams, config: &FitConfig) -> Result<[f64; 7]> {
    config.validate()?;
    let prep = PreparedHand::new(hand, config.contact_threshold)?;
    let problem = problem_for(&prep, object, config)?;
    let st = problem.structure(&problem.posed(pose), &mut InsideCache::default());
    Ok(problem.gradient(&st, pose).1)
}
