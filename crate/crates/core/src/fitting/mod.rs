//! Object pose and scale fitting against a fixed hand.

mod closure;
mod loss;

use std::time::Instant;

use log::debug;
use nalgebra::{Rotation3, Unit};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Mesh;
use crate::hand::{HandModel, InsideCache, PreparedHand, DEFAULT_CONTACT_THRESHOLD};
use crate::Vec3;

pub use closure::{
    closure_center_gradient, closure_terms, grasp_gram, grasp_matrix, normal_wrench, sim_loss, skew,
    ClosureTerms, NO_CONTACT_PENALTY,
};
pub use loss::{
    attraction_loss, gradient, phi_alpha, repulsion_loss, scale_map, total_loss, FrozenStructure,
    LossComponents, Problem,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoseParams {
    /// [cm]
    pub translation: Vec3,
    /// Axis-angle [rad], kept at magnitude ≤ π.
    pub rotation: Vec3,
    /// Unbounded; the applied scale is `scale_map(scale_logit, k)`.
    pub scale_logit: f64,
}

impl Default for PoseParams {
    fn default() -> Self {
        PoseParams {
            translation: Vec3::zeros(),
            rotation: Vec3::zeros(),
            scale_logit: 1.0,
        }
    }
}

impl PoseParams {
    pub fn rotation_matrix(&self) -> Rotation3<f64> {
        Rotation3::new(self.rotation)
    }

    pub fn scale(&self, k: f64) -> f64 {
        scale_map(self.scale_logit, k)
    }

    pub fn to_array(&self) -> [f64; 7] {
        let (t, w) = (self.translation, self.rotation);
        [t.x, t.y, t.z, w.x, w.y, w.z, self.scale_logit]
    }

    pub fn from_array(a: &[f64; 7]) -> Self {
        PoseParams {
            translation: Vec3::new(a[0], a[1], a[2]),
            rotation: Vec3::new(a[3], a[4], a[5]),
            scale_logit: a[6],
        }
    }

    /// Maps the rotation to the equivalent axis-angle with magnitude ≤ π.
    pub fn wrap_rotation(&mut self) {
        let theta = self.rotation.norm();
        if theta > std::f64::consts::PI {
            let wrapped = theta - 2.0 * std::f64::consts::PI * ((theta + std::f64::consts::PI) / (2.0 * std::f64::consts::PI)).floor();
            self.rotation *= wrapped / theta;
        }
    }

    /// Homogeneous matrix of `x ↦ R s (x − pivot) + t`.
    pub fn matrix(&self, k: f64, pivot: &Vec3) -> [[f64; 4]; 4] {
        let rs = self.rotation_matrix().into_inner() * self.scale(k);
        let off = self.translation - rs * pivot;
        let mut m = [[0.0; 4]; 4];
        for r in 0..3 {
            for c in 0..3 {
                m[r][c] = rs[(r, c)];
            }
            m[r][3] = off[r];
        }
        m[3][3] = 1.0;
        m
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitConfig {
    pub lambda_a: f64,
    pub lambda_r: f64,
    pub lambda_sim: f64,
    pub lambda_dist: f64,
    /// [cm]
    pub alpha: f64,
    /// Scale range of `scale_map`.
    pub k: f64,
    pub epsilon_fc: f64,
    /// Hand/object contact distance [cm].
    pub contact_threshold: f64,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
    pub max_iters: usize,
    /// Early stop once the total loss moved less than `tolerance` over
    /// `patience` iterations.
    pub patience: usize,
    pub tolerance: f64,
    /// Place the object's centroid on the hand's centroid before fitting;
    /// otherwise start from the object's own placement.
    pub overlap_centers: bool,
    /// Seeded perturbation of the initial pose: translation radius [cm] and
    /// rotation angle [rad].
    pub init_jitter_translation: f64,
    pub init_jitter_rotation: f64,
    pub seed: u64,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            lambda_a: 1.0,
            lambda_r: 4.0,
            lambda_sim: 0.5,
            lambda_dist: 0.1,
            alpha: 2.0,
            k: 0.1,
            epsilon_fc: 1e-2,
            contact_threshold: DEFAULT_CONTACT_THRESHOLD,
            lr: 1e-2,
            beta1: 0.9,
            beta2: 0.999,
            adam_eps: 1e-8,
            max_iters: 4000,
            patience: 100,
            tolerance: 1e-6,
            overlap_centers: true,
            init_jitter_translation: 0.0,
            init_jitter_rotation: 0.0,
            seed: 0,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        let non_negative = [
            ("lambda_a", self.lambda_a),
            ("lambda_r", self.lambda_r),
            ("lambda_sim", self.lambda_sim),
            ("lambda_dist", self.lambda_dist),
            ("epsilon_fc", self.epsilon_fc),
            ("tolerance", self.tolerance),
            ("init_jitter_translation", self.init_jitter_translation),
            ("init_jitter_rotation", self.init_jitter_rotation),
        ];
        for (name, v) in non_negative {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be non-negative, got {v}")));
            }
        }
        let positive = [
            ("alpha", self.alpha),
            ("contact_threshold", self.contact_threshold),
            ("lr", self.lr),
            ("adam_eps", self.adam_eps),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.k > 0.0 && self.k < 1.0) {
            return Err(Error::Config(format!("k must lie in (0, 1), got {}", self.k)));
        }
        for (name, b) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(0.0..1.0).contains(&b) {
                return Err(Error::Config(format!("{name} must lie in [0, 1), got {b}")));
            }
        }
        if self.max_iters == 0 || self.patience == 0 {
            return Err(Error::Config("max_iters and patience must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub pose: PoseParams,
    /// Applied scale `scale_map(scale_logit, k)`.
    pub scale: f64,
    /// Object-frame point the pose rotates and scales about (its vertex
    /// centroid).
    pub pivot: Vec3,
    /// Row-major homogeneous transform from object to hand coordinates.
    pub matrix: [[f64; 4]; 4],
    pub trace: Vec<LossComponents>,
    /// First iteration whose total loss is at most half the initial loss.
    pub iters_to_half_loss: Option<usize>,
    pub converged: bool,
    pub iterations: usize,
    /// Excluded from JSON so reports are reproducible byte for byte.
    #[serde(skip)]
    pub wall_time_s: f64,
}

impl FitReport {
    /// Applies the fitted transform to the object mesh.
    pub fn posed_mesh(&self, object: &Mesh) -> Result<Mesh> {
        object.map_vertices(|v| crate::pipeline::apply_matrix(&self.matrix, v))
    }
}

/// First index whose value is at most half of the first.
pub fn half_loss_index(totals: &[f64]) -> Option<usize> {
    let first = *totals.first()?;
    totals.iter().position(|&v| v <= 0.5 * first)
}

/// Fits translation, rotation and bounded scale of `object` to the static
/// hand with Adam.
pub fn fit(hand: &HandModel, object: &Mesh, config: &FitConfig) -> Result<FitReport> {
    config.validate()?;
    let prep = PreparedHand::new(hand, config.contact_threshold)?;
    fit_prepared(&prep, object, config)
}

pub fn fit_prepared(hand: &PreparedHand, object: &Mesh, config: &FitConfig) -> Result<FitReport> {
    config.validate()?;
    object.check_watertight()?;
    let start = Instant::now();
    let pivot = object.centroid();
    let local: Vec<Vec3> = object.vertices().iter().map(|v| v - pivot).collect();
    let problem = Problem::new(hand, local, config)?;

    let mut pose = PoseParams {
        translation: if config.overlap_centers {
            hand.hand().mesh().centroid()
        } else {
            pivot
        },
        ..PoseParams::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    if config.init_jitter_translation > 0.0 {
        pose.translation += random_unit(&mut rng) * (config.init_jitter_translation * rng.gen::<f64>().cbrt());
    }
    if config.init_jitter_rotation > 0.0 {
        pose.rotation = random_unit(&mut rng) * (config.init_jitter_rotation * rng.gen::<f64>());
    }

    let mut cache = InsideCache::default();
    let mut m = [0.0; 7];
    let mut v = [0.0; 7];
    let mut trace: Vec<LossComponents> = Vec::new();
    let mut half = None;
    let mut converged = false;
    for it in 0..config.max_iters {
        let posed = problem.posed(&pose);
        let st = problem.structure(&posed, &mut cache);
        let (comps, grad) = problem.gradient(&st, &pose);
        if !comps.total.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFinite { iteration: it });
        }
        trace.push(comps);
        if half.is_none() && comps.total <= 0.5 * trace[0].total {
            half = Some(it);
        }
        if it >= config.patience && (comps.total - trace[it - config.patience].total).abs() < config.tolerance {
            converged = true;
            break;
        }
        if it + 1 == config.max_iters {
            break;
        }
        // Adam
        let step = (it + 1) as i32;
        let c1 = 1.0 - config.beta1.powi(step);
        let c2 = 1.0 - config.beta2.powi(step);
        let mut p = pose.to_array();
        for k in 0..7 {
            m[k] = config.beta1 * m[k] + (1.0 - config.beta1) * grad[k];
            v[k] = config.beta2 * v[k] + (1.0 - config.beta2) * grad[k] * grad[k];
            p[k] -= config.lr * (m[k] / c1) / ((v[k] / c2).sqrt() + config.adam_eps);
        }
        pose = PoseParams::from_array(&p);
        pose.wrap_rotation();
        if it % 500 == 0 {
            debug!(
                "iter {it}: total {:.5} (A {:.4}, R {:.4}, sim {:.4}), {} penetrating, {} contacts",
                comps.total,
                comps.attraction,
                comps.repulsion,
                comps.sim,
                st.repulsion.len(),
                st.contacts.len()
            );
        }
    }
    let iterations = trace.len();
    Ok(FitReport {
        scale: pose.scale(config.k),
        matrix: pose.matrix(config.k, &pivot),
        pose,
        pivot,
        trace,
        iters_to_half_loss: half,
        converged,
        iterations,
        wall_time_s: start.elapsed().as_secs_f64(),
    })
}

fn random_unit(rng: &mut ChaCha8Rng) -> Vec3 {
    loop {
        let v = Vec3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        let n = v.norm();
        if n > 1e-3 && n <= 1.0 {
            return *Unit::new_normalize(v);
        }
    }
}
