//! End-to-end run: gate → predict code → select → fit → evaluate.
//!
//! Fitting happens in the hand's canonical frame so catalog objects start in
//! a consistent orientation relative to the palm; posed meshes and metrics are
//! reported in the input hand's frame (where gravity is defined).

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use log::info;
use nalgebra::{Isometry3, Matrix4};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::catalog::{load_catalog, predict_code, select_object, ExemplarSet, ObjectCode};
use crate::error::{Error, Result};
use crate::eval::{evaluate_prepared, EvalConfig, MetricsReport};
use crate::fitting::{fit_prepared, FitConfig};
use crate::fixtures::write_json;
use crate::hand::{grasp_gate, hand_paths, GateReport, HandModel, PreparedHand, DEFAULT_GATE_THRESHOLD};
use crate::Vec3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Hand mesh + sidecar: either file or their common stem.
    pub hand: PathBuf,
    /// Catalog index (`catalog.json`).
    pub catalog: PathBuf,
    pub exemplars: PathBuf,
    pub output: PathBuf,
    pub fit: FitConfig,
    pub eval: EvalConfig,
    pub gate_threshold: f64,
    /// Exemplars considered by code prediction.
    pub neighbors: usize,
    /// Sample `s` uses seed `seed + s` for prediction, selection and fitting.
    pub seed: u64,
    pub samples: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            hand: PathBuf::new(),
            catalog: PathBuf::new(),
            exemplars: PathBuf::new(),
            output: PathBuf::from("out"),
            fit: FitConfig::default(),
            eval: EvalConfig::default(),
            gate_threshold: DEFAULT_GATE_THRESHOLD,
            neighbors: 5,
            seed: 0,
            samples: 3,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        let (obj, sidecar) = hand_paths(&self.hand);
        for (what, p) in [
            ("hand mesh", &obj),
            ("hand sidecar", &sidecar),
            ("catalog", &self.catalog),
            ("exemplars", &self.exemplars),
        ] {
            if !p.is_file() {
                return Err(Error::Config(format!("{what} not found: {}", p.display())));
            }
        }
        if self.samples == 0 || self.neighbors == 0 {
            return Err(Error::Config("samples and neighbors must be at least 1".into()));
        }
        if !(self.gate_threshold >= 0.0) {
            return Err(Error::Config(format!("gate_threshold must be non-negative, got {}", self.gate_threshold)));
        }
        self.fit.validate()?;
        self.eval.validate()
    }

    pub fn sample_seeds(&self) -> Vec<u64> {
        (0..self.samples as u64).map(|s| self.seed.wrapping_add(s)).collect()
    }

    /// SHA-256 of the JSON form, excluding the output directory.
    pub fn hash(&self) -> String {
        let mut v = serde_json::to_value(self).expect("config serializes");
        if let Some(obj) = v.as_object_mut() {
            obj.remove("output");
        }
        sha256_hex(v.to_string().as_bytes())
    }
}

/// Selection and placement of one sample, alongside its fit report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub sample: usize,
    pub seed: u64,
    pub code: ObjectCode,
    pub category: String,
    pub object_id: String,
    pub code_distance: f64,
    /// Row-major transform from the rescaled object to the input hand frame.
    pub world_matrix: [[f64; 4]; 4],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rejection {
    pub accepted: bool,
    pub reason: String,
    pub inscribed_radius_normalized: f64,
    pub threshold: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub started_unix_s: f64,
    pub total_s: f64,
    pub fit_s: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub config_sha256: String,
    pub seed: u64,
    pub sample_seeds: Vec<u64>,
    /// Path → SHA-256 of every file read.
    pub inputs: BTreeMap<String, String>,
    pub outputs: Vec<String>,
    pub accepted: bool,
    /// Wall-clock data; the only non-reproducible part of a run.
    pub timing: Timing,
}

#[derive(Debug, Clone)]
pub enum PipelineOutcome {
    Rejected(GateReport),
    Completed(Vec<(SampleRecord, MetricsReport)>),
}

pub const MANIFEST_FILE: &str = "manifest.json";
pub const GATE_FILE: &str = "gate.json";
pub const REJECTION_FILE: &str = "rejection.json";

/// Runs the full pipeline and writes its artifacts under `config.output`.
/// Samples run on up to `jobs` threads; results do not depend on `jobs`.
pub fn run_pipeline(config: &PipelineConfig, jobs: usize) -> Result<PipelineOutcome> {
    config.validate()?;
    let started = Instant::now();
    let started_unix_s = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0);
    let out = &config.output;
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;

    let mut inputs = BTreeMap::new();
    let (obj, sidecar) = hand_paths(&config.hand);
    for p in [&obj, &sidecar, &config.catalog, &config.exemplars] {
        record_input(&mut inputs, p)?;
    }

    let hand = HandModel::load(&obj, &sidecar)?;
    let to_canonical = hand.canonical_transform()?;
    let canon = hand.transformed(&to_canonical)?;
    let gate = grasp_gate(&canon, config.gate_threshold)?;
    write_json(&out.join(GATE_FILE), &gate)?;
    let mut outputs = vec![GATE_FILE.to_string()];
    let seeds = config.sample_seeds();

    let manifest = |inputs, outputs, accepted, fit_s| RunManifest {
        tool: env!("CARGO_PKG_NAME").into(),
        version: env!("CARGO_PKG_VERSION").into(),
        config_sha256: config.hash(),
        seed: config.seed,
        sample_seeds: seeds.clone(),
        inputs,
        outputs,
        accepted,
        timing: Timing {
            started_unix_s,
            total_s: started.elapsed().as_secs_f64(),
            fit_s,
        },
    };

    if !gate.accepted {
        info!(
            "hand rejected: normalized inscribed radius {:.4} < {}",
            gate.inscribed_radius_normalized, gate.threshold
        );
        write_json(
            &out.join(REJECTION_FILE),
            &Rejection {
                accepted: false,
                reason: "normalized inscribed radius below gate threshold".into(),
                inscribed_radius_normalized: gate.inscribed_radius_normalized,
                threshold: gate.threshold,
            },
        )?;
        outputs.push(REJECTION_FILE.into());
        write_json(&out.join(MANIFEST_FILE), &manifest(inputs, outputs, false, Vec::new()))?;
        return Ok(PipelineOutcome::Rejected(gate));
    }

    let exemplars = ExemplarSet::load(&config.exemplars)?;
    let catalog = load_catalog(&config.catalog)?;
    let b = canon.principal_bone_length();
    let canon_prep = PreparedHand::new(&canon, config.fit.contact_threshold)?;
    let world_prep = PreparedHand::new(&hand, config.fit.contact_threshold)?;
    let to_world = to_canonical.inverse();

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let results: Vec<Result<SampleOutput>> = pool.install(|| {
        seeds
            .par_iter()
            .enumerate()
            .map(|(sample, &seed)| {
                let (code, category) = predict_code(&canon, &exemplars, config.neighbors, seed);
                let sel = select_object(&code, &category, &catalog, b, seed)?;
                let fit_cfg = FitConfig {
                    seed,
                    ..config.fit.clone()
                };
                let report = fit_prepared(&canon_prep, &sel.mesh, &fit_cfg)?;
                let world_matrix = compose(&to_world, &report.matrix);
                let posed = report.posed_mesh(&sel.mesh)?.map_vertices(|v| {
                    (to_world * nalgebra::Point3::from(*v)).coords
                })?;
                let metrics = evaluate_prepared(&world_prep, &posed, &config.eval)?;
                info!(
                    "sample {sample} (seed {seed}): {} [{}], {} iterations, sd {:.3} cm, depth {:.3} cm",
                    sel.id, sel.category, report.iterations, metrics.sim_distance, metrics.penetration_depth
                );
                let mesh_path = catalog
                    .entries
                    .iter()
                    .find(|e| e.id == sel.id)
                    .map(|e| catalog.mesh_path(e));
                Ok(SampleOutput {
                    record: SampleRecord {
                        sample,
                        seed,
                        code,
                        category: sel.category,
                        object_id: sel.id,
                        code_distance: sel.distance,
                        world_matrix,
                    },
                    fit_s: report.wall_time_s,
                    report,
                    metrics,
                    posed,
                    mesh_path,
                })
            })
            .collect()
    });

    let mut completed = Vec::new();
    let mut fit_s = Vec::new();
    for r in results {
        let s = r?;
        if let Some(p) = &s.mesh_path {
            record_input(&mut inputs, p)?;
        }
        let dir_name = format!("sample_{:02}", s.record.sample);
        let dir = out.join(&dir_name);
        std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        s.posed.write_obj(dir.join("posed.obj"))?;
        write_json(&dir.join("sample.json"), &s.record)?;
        write_json(&dir.join("fit_report.json"), &s.report)?;
        write_json(&dir.join("metrics.json"), &s.metrics)?;
        for f in ["posed.obj", "sample.json", "fit_report.json", "metrics.json"] {
            outputs.push(format!("{dir_name}/{f}"));
        }
        fit_s.push(s.fit_s);
        completed.push((s.record, s.metrics));
    }
    write_json(&out.join(MANIFEST_FILE), &manifest(inputs, outputs, true, fit_s))?;
    Ok(PipelineOutcome::Completed(completed))
}

struct SampleOutput {
    record: SampleRecord,
    report: crate::fitting::FitReport,
    metrics: MetricsReport,
    posed: crate::geometry::Mesh,
    mesh_path: Option<PathBuf>,
    fit_s: f64,
}

fn compose(iso: &Isometry3<f64>, m: &[[f64; 4]; 4]) -> [[f64; 4]; 4] {
    let inner = Matrix4::from_fn(|r, c| m[r][c]);
    let full = iso.to_homogeneous() * inner;
    std::array::from_fn(|r| std::array::from_fn(|c| full[(r, c)]))
}

fn record_input(inputs: &mut BTreeMap<String, String>, path: &Path) -> Result<()> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    inputs.insert(path.display().to_string(), sha256_hex(&bytes));
    Ok(())
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Applies a row-major homogeneous transform to a point.
pub fn apply_matrix(m: &[[f64; 4]; 4], v: &Vec3) -> Vec3 {
    Vec3::new(
        m[0][0] * v.x + m[0][1] * v.y + m[0][2] * v.z + m[0][3],
        m[1][0] * v.x + m[1][1] * v.y + m[1][2] * v.z + m[1][3],
        m[2][0] * v.x + m[2][1] * v.y + m[2][2] * v.z + m[2][3],
    )
}
