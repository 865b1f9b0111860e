//! Grasp-quality metrics: penetration depth and volume, contact-region
//! coverage, and a simulation-distance proxy from a small rigid-body
//! simulation of the object under gravity against the static hand.

use std::path::Path;

use nalgebra::{Matrix3, UnitQuaternion};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fitting::FitReport;
use crate::geometry::{intersection_volume_prepared, Mesh, MeshQuery, PointGrid};
use crate::hand::{HandModel, InsideCache, PreparedHand};
use crate::Vec3;

pub const DEFAULT_VOXEL_SIZE: f64 = 0.5;
pub const DEFAULT_COVERAGE_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    /// [cm/s²]
    pub gravity: Vec3,
    /// [s]
    pub timestep: f64,
    pub steps: usize,
    /// Depth at which one penetrating vertex alone carries the object's
    /// weight [cm]; sets the per-vertex penalty stiffness.
    pub rest_depth: f64,
    /// Fraction of critical damping of the aggregate contact spring.
    pub damping_ratio: f64,
    pub friction: f64,
    /// Fraction of the tangential velocity at a contact that friction may
    /// remove per step, before the Coulomb cap.
    pub friction_gain: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            gravity: Vec3::new(0.0, 0.0, -980.0),
            timestep: 1e-4,
            steps: 5000,
            rest_depth: 0.05,
            damping_ratio: 0.1,
            friction: 1.0,
            friction_gain: 0.25,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.timestep > 0.0 && self.timestep.is_finite()) {
            return Err(Error::Config(format!("timestep must be positive, got {}", self.timestep)));
        }
        if self.steps == 0 {
            return Err(Error::Config("steps must be at least 1".into()));
        }
        if !(self.friction >= 0.0 && self.friction.is_finite()) {
            return Err(Error::Config(format!("friction must be non-negative, got {}", self.friction)));
        }
        if !(self.rest_depth > 0.0) || !(self.damping_ratio >= 0.0) {
            return Err(Error::Config("rest_depth must be positive and damping_ratio non-negative".into()));
        }
        if !(self.friction_gain > 0.0 && self.friction_gain <= 1.0) {
            return Err(Error::Config(format!("friction_gain must lie in (0, 1], got {}", self.friction_gain)));
        }
        if !self.gravity.iter().all(|g| g.is_finite()) {
            return Err(Error::Config("gravity must be finite".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub sim: SimConfig,
    /// [cm]
    pub voxel_size: f64,
    /// A region is covered when it comes this close to the object [cm].
    pub coverage_threshold: f64,
    pub success_max_sd: f64,
    pub success_max_depth: f64,
}

impl EvalConfig {
    pub fn validate(&self) -> Result<()> {
        self.sim.validate()?;
        for (name, v) in [
            ("voxel_size", self.voxel_size),
            ("coverage_threshold", self.coverage_threshold),
            ("success_max_sd", self.success_max_sd),
            ("success_max_depth", self.success_max_depth),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            sim: SimConfig::default(),
            voxel_size: DEFAULT_VOXEL_SIZE,
            coverage_threshold: DEFAULT_COVERAGE_THRESHOLD,
            success_max_sd: 2.0,
            success_max_depth: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    /// [cm]
    pub penetration_depth: f64,
    /// [cm³]
    pub penetration_volume: f64,
    /// Displacement from the in-house rigid-body proxy [cm]; not comparable
    /// to numbers from other simulators.
    #[serde(rename = "sd_proxy_cm")]
    pub sim_distance: f64,
    pub contact_region_coverage: usize,
    pub success: bool,
}

/// Largest distance from an object vertex inside the hand to the nearest hand
/// vertex; 0 without penetration.
pub fn penetration_depth(hand: &HandModel, object: &Mesh) -> Result<f64> {
    object.check_watertight()?;
    let q = MeshQuery::new(hand.mesh().clone())?;
    Ok(depth_with(&q, object))
}

fn depth_with(q: &MeshQuery, object: &Mesh) -> f64 {
    object
        .vertices()
        .iter()
        .filter(|p| q.contains(p))
        .map(|p| q.nearest_vertex(p).0)
        .fold(0.0, f64::max)
}

/// Voxelized hand/object overlap volume.
pub fn penetration_volume(hand: &HandModel, object: &Mesh, voxel_size: f64) -> Result<f64> {
    let a = MeshQuery::new(hand.mesh().clone())?;
    let b = MeshQuery::new(object.clone())?;
    intersection_volume_prepared(&a, &b, voxel_size)
}

/// Number of contact regions with a vertex within `threshold` of an object
/// vertex.
pub fn contact_region_coverage(hand: &HandModel, object: &Mesh, threshold: f64) -> Result<usize> {
    let grid = PointGrid::new(object.vertices())?;
    let hv = hand.mesh().vertices();
    Ok(hand
        .contact_regions()
        .iter()
        .filter(|r| r.iter().any(|&h| grid.nearest_below(&hv[h], threshold * (1.0 + 1e-12)).is_some()))
        .count())
}

/// Rigid body of uniform unit density.
#[derive(Debug, Clone)]
struct Body {
    mass: f64,
    inertia_body: Matrix3<f64>,
    /// Vertex offsets from the center of mass in the body frame.
    offsets: Vec<Vec3>,
    com: Vec3,
}

impl Body {
    fn new(object: &Mesh) -> Result<Self> {
        let (volume, com, inertia) = object.mass_properties();
        if !(volume > 0.0) {
            return Err(Error::Degenerate(format!("object volume {volume} is not positive")));
        }
        Ok(Body {
            mass: volume,
            inertia_body: inertia,
            offsets: object.vertices().iter().map(|v| v - com).collect(),
            com,
        })
    }
}

/// Displacement of the object's center of mass after simulating it under
/// gravity against the static hand.
pub fn simulation_distance(hand: &HandModel, object: &Mesh, sim: &SimConfig) -> Result<f64> {
    object.check_watertight()?;
    let prep = PreparedHand::new(hand, crate::hand::DEFAULT_CONTACT_THRESHOLD)?;
    simulate(&prep, object, sim)
}

pub(crate) fn simulate(hand: &PreparedHand, object: &Mesh, sim: &SimConfig) -> Result<f64> {
    sim.validate()?;
    let body = Body::new(object)?;
    let (m, dt) = (body.mass, sim.timestep);
    let g_norm = sim.gravity.norm();
    // per-vertex stiffness: one vertex at rest_depth carries the weight
    let k = m * g_norm.max(1.0) / sim.rest_depth;
    let inv_inertia_body = body
        .inertia_body
        .try_inverse()
        .ok_or_else(|| Error::Degenerate("singular inertia".into()))?;
    let (lo, hi) = object.aabb();
    let size = (hi - lo).norm();
    let query = hand.query();

    let mut x = body.com;
    let mut q = UnitQuaternion::identity();
    let mut v = Vec3::zeros();
    let mut w = Vec3::zeros();
    let mut cache = InsideCache::default();
    let mut contacts: Vec<(Vec3, Vec3, f64)> = Vec::new();
    for step in 0..sim.steps {
        let rot = q.to_rotation_matrix();
        let arms: Vec<Vec3> = body.offsets.iter().map(|r| rot * r).collect();
        let points: Vec<Vec3> = arms.iter().map(|r| r + x).collect();
        let inside = hand.inside_cached(&points, &mut cache);
        contacts.clear();
        for (i, p) in points.iter().enumerate() {
            if inside[i] {
                let (_, face, depth) = query.closest_point(p);
                contacts.push((arms[i], query.face_normal(face), depth));
            }
        }

        let inv_inertia = rot * inv_inertia_body * rot.transpose();
        let mut force = sim.gravity * m;
        let mut torque = Vec3::zeros();
        if !contacts.is_empty() {
            let n_c = contacts.len() as f64;
            let c = 2.0 * sim.damping_ratio * (k * m / n_c).sqrt();
            for &(arm, n, depth) in &contacts {
                let vel = v + w.cross(&arm);
                let vn = vel.dot(&n);
                let fn_mag = (k * depth - c * vn).max(0.0);
                let mut f = n * fn_mag;
                let vt = vel - n * vn;
                let speed = vt.norm();
                if speed > 0.0 && sim.friction > 0.0 {
                    // force that would remove `friction_gain` of the slip this
                    // step if this contact acted alone, shared across contacts
                    let t = vt / speed;
                    let inv_mass = 1.0 / m + arm.cross(&t).dot(&(inv_inertia * arm.cross(&t)));
                    let stop = sim.friction_gain * speed / (inv_mass * dt * n_c);
                    f -= t * stop.min(sim.friction * fn_mag);
                }
                force += f;
                torque += arm.cross(&f);
            }
        }

        // symplectic Euler
        v += force * (dt / m);
        let inertia = rot * body.inertia_body * rot.transpose();
        w += inv_inertia * (torque - w.cross(&(inertia * w))) * dt;
        x += v * dt;
        q = UnitQuaternion::from_scaled_axis(w * dt) * q;

        let energy = 0.5 * m * v.norm_squared() + 0.5 * w.dot(&(inertia * w));
        let drop = (x - body.com).dot(&sim.gravity) / g_norm.max(1e-12);
        let bound = 10.0 * m * g_norm.max(1.0) * drop.max(size);
        if !energy.is_finite() || energy > bound {
            return Err(Error::Unstable { step, energy, bound });
        }
    }
    Ok((x - body.com).norm())
}

/// All metrics for an object already posed against the hand.
pub fn evaluate(hand: &HandModel, object: &Mesh, config: &EvalConfig) -> Result<MetricsReport> {
    let prep = PreparedHand::new(hand, crate::hand::DEFAULT_CONTACT_THRESHOLD)?;
    evaluate_prepared(&prep, object, config)
}

pub fn evaluate_prepared(hand: &PreparedHand, object: &Mesh, config: &EvalConfig) -> Result<MetricsReport> {
    config.validate()?;
    let obj_query = MeshQuery::new(object.clone())?;
    let penetration_depth = depth_with(hand.query(), object);
    let penetration_volume = intersection_volume_prepared(hand.query(), &obj_query, config.voxel_size)?;
    let coverage = contact_region_coverage(hand.hand(), object, config.coverage_threshold)?;
    let sim_distance = simulate(hand, object, &config.sim)?;
    Ok(MetricsReport {
        penetration_depth,
        penetration_volume,
        sim_distance,
        contact_region_coverage: coverage,
        success: sim_distance <= config.success_max_sd && penetration_depth <= config.success_max_depth,
    })
}

/// Metrics for `object` placed by a fit.
pub fn evaluate_fit(hand: &HandModel, object: &Mesh, fit: &FitReport, config: &EvalConfig) -> Result<MetricsReport> {
    evaluate(hand, &fit.posed_mesh(object)?, config)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    /// Sample standard deviation (n − 1); 0 for a single value.
    pub std: f64,
}

impl MeanStd {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len();
        if n == 0 {
            return MeanStd { mean: 0.0, std: 0.0 };
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let std = if n > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        MeanStd { mean, std }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchSummary {
    pub count: usize,
    pub sd_proxy_cm: MeanStd,
    pub pene_depth_cm: MeanStd,
    pub pene_vox_cm3: MeanStd,
    pub coverage: MeanStd,
    pub success_rate: f64,
}

pub fn summarize(reports: &[MetricsReport]) -> BatchSummary {
    let col = |f: fn(&MetricsReport) -> f64| MeanStd::of(&reports.iter().map(f).collect::<Vec<_>>());
    BatchSummary {
        count: reports.len(),
        sd_proxy_cm: col(|r| r.sim_distance),
        pene_depth_cm: col(|r| r.penetration_depth),
        pene_vox_cm3: col(|r| r.penetration_volume),
        coverage: col(|r| r.contact_region_coverage as f64),
        success_rate: if reports.is_empty() {
            0.0
        } else {
            reports.iter().filter(|r| r.success).count() as f64 / reports.len() as f64
        },
    }
}

pub const CSV_HEADER: [&str; 6] = ["id", "sd_proxy_cm", "pene_depth_cm", "pene_vox_cm3", "coverage", "success"];

/// One CSV row per report, in the given order.
pub fn write_csv(path: &Path, rows: &[(String, MetricsReport)]) -> Result<()> {
    let io = |e: csv::Error| Error::io(path, std::io::Error::other(e));
    let mut out = csv::Writer::from_writer(Vec::new());
    out.write_record(CSV_HEADER).map_err(io)?;
    for (id, r) in rows {
        out.write_record([
            id.clone(),
            r.sim_distance.to_string(),
            r.penetration_depth.to_string(),
            r.penetration_volume.to_string(),
            r.contact_region_coverage.to_string(),
            r.success.to_string(),
        ])
        .map_err(io)?;
    }
    let bytes = out.into_inner().map_err(|e| Error::io(path, e.into_error()))?;
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}
