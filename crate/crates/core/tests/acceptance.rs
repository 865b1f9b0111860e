//! Acceptance checks, one PASS/FAIL line per criterion.
//!
//! Failures are reported, not hidden: the process exits non-zero only when
//! `ACCEPTANCE_STRICT=1` so the regular test run records the outcome of every
//! criterion without aborting the workspace run.

use std::path::Path;
use std::time::Instant;

use nalgebra::{DMatrix, Isometry3, Rotation3, SymmetricEigen, Translation3, UnitQuaternion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use graspfit::catalog::{compute_object_code, rescale_to_code, ObjectCode};
use graspfit::eval::{evaluate, simulation_distance, EvalConfig, MetricsReport, SimConfig};
use graspfit::fitting::{closure_terms, fit, FitConfig, FitReport, PoseParams, Problem};
use graspfit::fixtures::{self, HandPose};
use graspfit::geometry::{intersection_volume, min_dist_set_set, shapes, Mesh, MeshQuery};
use graspfit::hand::{grasp_gate, inscribed_ball, InsideCache, PreparedHand};
use graspfit::pipeline::{run_pipeline, PipelineConfig};
use graspfit::Vec3;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn random_rotation(rng: &mut ChaCha8Rng) -> Rotation3<f64> {
    let q = UnitQuaternion::from_quaternion(nalgebra::Quaternion::new(
        rng.gen_range(-1.0..1.0),
        rng.gen_range(-1.0..1.0),
        rng.gen_range(-1.0..1.0),
        rng.gen_range(-1.0..1.0),
    ));
    q.to_rotation_matrix()
}

// 1 ─────────────────────────────────────────────────────────────────────────

fn gradient_correctness() -> Outcome {
    const H: f64 = 1e-4;
    const TOL: f64 = 1e-4;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let cfg = FitConfig::default();
    let catalog = fixtures::objects(0);
    let poses = [HandPose::Curled, HandPose::Pinch, HandPose::Cup, HandPose::Flat];
    let mut worst: f64 = 0.0;
    // (config, component, error of the same component at h/10)
    let mut worst_at = (0, 0, 0.0);
    let mut active = [0usize; 3];
    for i in 0..20 {
        let fx = fixtures::hand(poses[i % 4], rng.gen_range(0..100));
        let object = if i % 2 == 0 {
            fx.matched_object.clone()
        } else {
            let (_, _, m) = &catalog[rng.gen_range(0..catalog.len())];
            m.translated(&fx.hand.mesh().centroid())
        };
        let prep = PreparedHand::new(&fx.hand, cfg.contact_threshold).unwrap();
        let pivot = object.centroid();
        let local: Vec<Vec3> = object.vertices().iter().map(|v| v - pivot).collect();
        let problem = Problem::new(&prep, local, &cfg).unwrap();
        let pose = PoseParams {
            translation: pivot + Vec3::from_fn(|_, _| rng.gen_range(-0.5..0.5)),
            rotation: Vec3::from_fn(|_, _| rng.gen_range(-0.3..0.3)),
            scale_logit: rng.gen_range(-1.5..1.5),
        };
        let st = problem.structure(&problem.posed(&pose), &mut InsideCache::default());
        active[0] += !st.attraction.is_empty() as usize;
        active[1] += !st.repulsion.is_empty() as usize;
        active[2] += !st.contacts.is_empty() as usize;
        let (_, g) = problem.gradient(&st, &pose);
        let gnorm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        for k in 0..7 {
            let fd = |h: f64| {
                let (mut a, mut b) = (pose.to_array(), pose.to_array());
                a[k] += h;
                b[k] -= h;
                (problem.loss(&st, &PoseParams::from_array(&a)).total
                    - problem.loss(&st, &PoseParams::from_array(&b)).total)
                    / (2.0 * h)
            };
            let rel = |fd: f64| (g[k] - fd).abs() / g[k].abs().max(fd.abs()).max(1e-6 * gnorm).max(1e-12);
            let err = rel(fd(H));
            if err > worst {
                worst = err;
                worst_at = (i, k, rel(fd(H / 10.0)));
            }
        }
    }
    outcome(
        worst <= TOL,
        format!(
            "worst per-component relative error {worst:.2e} (tol {TOL:.0e}, h {H:.0e}) at config {} \
             component {}, {:.2e} there with h/10; configs with attraction/repulsion/contacts \
             active: {}/{}/{} of 20",
            worst_at.0, worst_at.1, worst_at.2, active[0], active[1], active[2]
        ),
    )
}

// 2 ─────────────────────────────────────────────────────────────────────────

fn code_invariance() -> Outcome {
    const TOL: f64 = 1e-6;
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    // first object of each of five categories
    let all = fixtures::objects(0);
    let mut chosen: Vec<&(String, String, Mesh)> = Vec::new();
    for entry in &all {
        if chosen.len() < 5 && !chosen.iter().any(|c| c.1 == entry.1) {
            chosen.push(entry);
        }
    }
    let b = 8.0;
    let (mut worst_rigid, mut worst_trip): (f64, f64) = (0.0, 0.0);
    for (_, _, mesh) in &chosen {
        let base = compute_object_code(mesh, b).unwrap();
        for _ in 0..100 {
            let iso = Isometry3::from_parts(
                Translation3::from(Vec3::from_fn(|_, _| rng.gen_range(-50.0..50.0))),
                UnitQuaternion::from_rotation_matrix(&random_rotation(&mut rng)),
            );
            let moved = mesh.map_vertices(|v| (iso * nalgebra::Point3::from(*v)).coords).unwrap();
            let c = compute_object_code(&moved, b).unwrap();
            for k in 0..3 {
                worst_rigid = worst_rigid.max((c.0[k] - base.0[k]).abs());
            }
        }
        for _ in 0..5 {
            let target = ObjectCode::new([rng.gen_range(0.2..2.0), rng.gen_range(1.0..3.0), rng.gen_range(1.0..3.0)]).unwrap();
            let scaled = rescale_to_code(mesh, &target, b).unwrap();
            let back = compute_object_code(&scaled, b).unwrap();
            for k in 0..3 {
                worst_trip = worst_trip.max((back.0[k] - target.0[k]).abs());
            }
        }
    }
    let names: Vec<&str> = chosen.iter().map(|c| c.0.as_str()).collect();
    outcome(
        worst_rigid <= TOL && worst_trip <= TOL,
        format!(
            "objects {names:?}: max deviation under 100 rigid transforms {worst_rigid:.2e}, \
             rescale round trip {worst_trip:.2e} (tol {TOL:.0e})"
        ),
    )
}

// 3 ─────────────────────────────────────────────────────────────────────────

/// Dense G = [I … I; [g₁]× … [gₙ]×] assembled entry by entry.
fn dense_gram_min_eig(contacts: &[Vec3]) -> f64 {
    let n = contacts.len();
    let mut g = DMatrix::<f64>::zeros(6, 3 * n);
    for (i, c) in contacts.iter().enumerate() {
        for k in 0..3 {
            g[(k, 3 * i + k)] = 1.0;
        }
        let (x, y, z) = (c.x, c.y, c.z);
        let rows = [[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]];
        for (r, row) in rows.iter().enumerate() {
            for (k, v) in row.iter().enumerate() {
                g[(3 + r, 3 * i + k)] = *v;
            }
        }
    }
    let m = &g * g.transpose();
    SymmetricEigen::new(m).eigenvalues.min()
}

fn closure_spectrum() -> Outcome {
    let eps = FitConfig::default().epsilon_fc;
    let pair = [Vec3::new(0.0, 0.0, 1.5), Vec3::new(0.0, 0.0, -1.5)];
    let pair_n = [-Vec3::z(), Vec3::z()];
    let tp = closure_terms(&pair, &pair_n, eps);
    let dense_pair = dense_gram_min_eig(&pair);

    let s = 1.0 / 3f64.sqrt();
    let tet = [
        Vec3::new(1.0, 1.0, 1.0) * s,
        Vec3::new(1.0, -1.0, -1.0) * s,
        Vec3::new(-1.0, 1.0, -1.0) * s,
        Vec3::new(-1.0, -1.0, 1.0) * s,
    ];
    let tet_n: Vec<Vec3> = tet.iter().map(|g| -g).collect();
    let tt = closure_terms(&tet, &tet_n, eps);
    let dense_tet = dense_gram_min_eig(&tet);

    let pass = tp.lambda_min.abs() <= 1e-12
        && dense_pair.abs() <= 1e-12
        && tt.wrench <= 1e-9
        && tt.lambda_min > 0.0
        && dense_tet > 0.0
        && (tt.lambda_min - dense_tet).abs() <= 1e-9;
    outcome(
        pass,
        format!(
            "antipodal λ₀ = {:.1e} (dense {:.1e}); tetrahedral ‖G n̂‖ = {:.1e}, λ₀ = {:.6} (dense {:.6})",
            tp.lambda_min, dense_pair, tt.wrench, tt.lambda_min, dense_tet
        ),
    )
}

// 4 ─────────────────────────────────────────────────────────────────────────

/// Facet planes (unit normal n, offset d with n·x ≤ d inside) of the hull of
/// `pts`, by testing every triple.
fn brute_hull_planes(pts: &[Vec3]) -> Vec<(Vec3, f64)> {
    let mut planes = Vec::new();
    for i in 0..pts.len() {
        for j in i + 1..pts.len() {
            for k in j + 1..pts.len() {
                let Some(n) = (pts[j] - pts[i]).cross(&(pts[k] - pts[i])).try_normalize(1e-12) else {
                    continue;
                };
                let d = n.dot(&pts[i]);
                let (mut above, mut below) = (false, false);
                for p in pts {
                    let s = n.dot(p) - d;
                    above |= s > 1e-9;
                    below |= s < -1e-9;
                }
                if !above {
                    planes.push((n, d));
                } else if !below {
                    planes.push((-n, -d));
                }
            }
        }
    }
    planes
}

/// Inscribed radius by exhaustive 64³ grid search, then the same grid
/// shrunk around the best cell to remove the discretization error.
fn grid_inscribed_radius(pts: &[Vec3]) -> f64 {
    let planes = brute_hull_planes(pts);
    let depth = |p: &Vec3| planes.iter().map(|(n, d)| d - n.dot(p)).fold(f64::INFINITY, f64::min);
    let (mut lo, mut hi) = (pts[0], pts[0]);
    for p in pts {
        lo = lo.inf(p);
        hi = hi.sup(p);
    }
    let mut best = (f64::NEG_INFINITY, lo);
    for _ in 0..4 {
        let step = (hi - lo) / 63.0;
        for i in 0..64 {
            for j in 0..64 {
                for k in 0..64 {
                    let p = lo + Vec3::new(i as f64 * step.x, j as f64 * step.y, k as f64 * step.z);
                    let r = depth(&p);
                    if r > best.0 {
                        best = (r, p);
                    }
                }
            }
        }
        lo = best.1 - step * 2.0;
        hi = best.1 + step * 2.0;
    }
    best.0
}

fn inscribed_gate() -> Outcome {
    let cube: Vec<Vec3> = (0..8)
        .map(|i| Vec3::new((i & 1) as f64, ((i >> 1) & 1) as f64, ((i >> 2) & 1) as f64))
        .collect();
    let r_cube = inscribed_ball(&cube).unwrap().radius;
    let tet = [
        Vec3::new(0.0, 0.0, 0.0),
        Vec3::new(1.0, 0.0, 0.0),
        Vec3::new(0.5, 3f64.sqrt() / 2.0, 0.0),
        Vec3::new(0.5, 3f64.sqrt() / 6.0, (2.0f64 / 3.0).sqrt()),
    ];
    let r_tet = inscribed_ball(&tet).unwrap().radius;
    let r_tet_exact = 1.0 / (2.0 * 6f64.sqrt());

    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst_hull: f64 = 0.0;
    for _ in 0..5 {
        let n = rng.gen_range(12..30);
        let stretch = Vec3::new(rng.gen_range(0.5..2.0), rng.gen_range(0.5..2.0), rng.gen_range(0.5..2.0));
        let rot = random_rotation(&mut rng);
        let pts: Vec<Vec3> = (0..n)
            .map(|_| rot * Vec3::from_fn(|_, _| rng.gen_range(-1.0..1.0)).component_mul(&stretch))
            .collect();
        let opt = inscribed_ball(&pts).unwrap().radius;
        let oracle = grid_inscribed_radius(&pts);
        worst_hull = worst_hull.max((opt - oracle).abs() / oracle);
    }

    let mut labels_ok = true;
    let mut label_detail = Vec::new();
    for pose in HandPose::ALL {
        for seed in 0..3 {
            let fx = fixtures::hand(pose, seed);
            let g = grasp_gate(&fx.hand, 0.4).unwrap();
            labels_ok &= g.accepted == pose.is_grasp();
            if seed == 0 {
                label_detail.push(format!("{}={:.3}", pose.name(), g.inscribed_radius_normalized));
            }
        }
    }
    let pass = (r_cube - 0.5).abs() <= 1e-3
        && (r_tet - r_tet_exact).abs() <= 1e-3
        && worst_hull <= 0.02
        && labels_ok;
    outcome(
        pass,
        format!(
            "cube r = {r_cube:.5} (0.5), tetra r = {r_tet:.5} ({r_tet_exact:.5}), \
             worst hull vs grid oracle {:.3}% (tol 2%), labels {} [{}]",
            worst_hull * 100.0,
            if labels_ok { "match" } else { "MISMATCH" },
            label_detail.join(", ")
        ),
    )
}

// 5–7 ───────────────────────────────────────────────────────────────────────

struct FitRun {
    report: FitReport,
    metrics: MetricsReport,
}

fn fit_and_score(pose: HandPose, seed: u64, object_scale: f64, lambda_sim: Option<f64>) -> FitRun {
    let fx = fixtures::hand(pose, seed);
    let c = fx.matched_object.centroid();
    let object = fx.matched_object.map_vertices(|v| c + (v - c) * object_scale).unwrap();
    let mut cfg = FitConfig {
        seed,
        ..FitConfig::default()
    };
    if let Some(l) = lambda_sim {
        cfg.lambda_sim = l;
    }
    let report = fit(&fx.hand, &object, &cfg).unwrap();
    let posed = report.posed_mesh(&object).unwrap();
    let metrics = evaluate(&fx.hand, &posed, &EvalConfig::default()).unwrap();
    FitRun { report, metrics }
}

fn fitting_end_to_end(curled: &[FitRun]) -> Outcome {
    let ok: Vec<bool> = curled
        .iter()
        .map(|r| {
            r.report.iterations <= 4000
                && r.metrics.penetration_depth <= 0.2
                && r.metrics.penetration_volume <= 1.0
                && r.metrics.contact_region_coverage >= 3
        })
        .collect();
    let passed = ok.iter().filter(|&&b| b).count();
    let worst_depth = curled.iter().map(|r| r.metrics.penetration_depth).fold(0.0, f64::max);
    let worst_vol = curled.iter().map(|r| r.metrics.penetration_volume).fold(0.0, f64::max);
    let min_cov = curled.iter().map(|r| r.metrics.contact_region_coverage).min().unwrap_or(0);
    outcome(
        passed >= 9,
        format!(
            "{passed}/10 seeds clean (need 9); worst depth {worst_depth:.3} cm (≤ 0.2), \
             worst volume {worst_vol:.3} cm³ (≤ 1), min coverage {min_cov}/6 (≥ 3)"
        ),
    )
}

fn selection_plausibility(matched: &[FitRun]) -> Outcome {
    let cap = FitConfig::default().max_iters + 1;
    let iters = |r: &FitRun| r.report.iters_to_half_loss.unwrap_or(cap) as f64;
    let mut a: Vec<f64> = matched.iter().map(iters).collect();
    let mut b: Vec<f64> = (0..10u64)
        .map(|seed| iters(&fit_and_score(HandPose::Curled, seed, 3.0, None)))
        .collect();
    let (ma, mb) = (median(&mut a), median(&mut b));
    outcome(
        ma < mb,
        format!("median iterations to half loss: matched {ma} vs ×3 mismatched {mb} (need <); matched {a:?}, mismatched {b:?}"),
    )
}

const SIM_POSES: [HandPose; 3] = [HandPose::Curled, HandPose::Pinch, HandPose::Cup];

fn simulation_loss_echo(curled: &[FitRun]) -> Outcome {
    let mut with = Vec::new();
    let mut without = Vec::new();
    for seed in 0..10u64 {
        let pose = SIM_POSES[seed as usize % 3];
        with.push(if pose == HandPose::Curled {
            curled[seed as usize].metrics.sim_distance
        } else {
            fit_and_score(pose, seed, 1.0, None).metrics.sim_distance
        });
        without.push(fit_and_score(pose, seed, 1.0, Some(0.0)).metrics.sim_distance);
    }
    let fmt = |v: &[f64]| v.iter().map(|x| format!("{x:.2}")).collect::<Vec<_>>().join(" ");
    let detail = format!(
        "per seed (curled/pinch/cup cycling) default: [{}], λ_sim=0: [{}]",
        fmt(&with),
        fmt(&without)
    );
    let (mw, mo) = (median(&mut with), median(&mut without));
    outcome(mw <= mo, format!("median SD proxy {mw:.3} cm (default) vs {mo:.3} cm (λ_sim = 0), need ≤; {detail}"))
}

// 8 ─────────────────────────────────────────────────────────────────────────

fn physics_sanity() -> Outcome {
    let sim = SimConfig::default();
    let fx = fixtures::hand(HandPose::Cup, 0);
    let far = shapes::sphere(1.0, 0.4).translated(&(fx.hand.mesh().centroid() + Vec3::new(80.0, 0.0, 0.0)));
    let t = sim.timestep * sim.steps as f64;
    let expected = 0.5 * sim.gravity.norm() * t * t;
    let fall_a = simulation_distance(&fx.hand, &far, &sim).unwrap();
    let fall_b = simulation_distance(&fx.hand, &far, &sim).unwrap();
    let rest_a = simulation_distance(&fx.hand, &fx.matched_object, &sim).unwrap();
    let rest_b = simulation_distance(&fx.hand, &fx.matched_object, &sim).unwrap();
    let fall_err = (fall_a - expected).abs() / expected;
    let deterministic = fall_a.to_bits() == fall_b.to_bits() && rest_a.to_bits() == rest_b.to_bits();
    outcome(
        fall_err <= 0.02 && rest_a <= 0.1 && deterministic,
        format!(
            "free fall {fall_a:.4} cm vs ½gt² {expected:.4} cm ({:.3}%, tol 2%); \
             supported box {rest_a:.4} cm (≤ 0.1); reruns bit-identical: {deterministic}",
            fall_err * 100.0
        ),
    )
}

// 9 ─────────────────────────────────────────────────────────────────────────

fn geometry_oracles() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let size = Vec3::new(2.0, 3.0, 1.5);
    let bx = MeshQuery::new(shapes::box_mesh(size, 0.5)).unwrap();
    let r = 1.5;
    let sphere = MeshQuery::new(shapes::sphere(r, 0.1)).unwrap();
    let mut agree_box = 0;
    let mut agree_sphere = 0;
    const N: usize = 10_000;
    for _ in 0..N {
        let p = Vec3::from_fn(|_, _| rng.gen_range(-2.0..2.0));
        let inside_box = (0..3).all(|k| p[k].abs() < size[k] / 2.0);
        agree_box += (bx.contains(&p) == inside_box) as usize;
        agree_sphere += (sphere.contains(&p) == (p.norm() < r)) as usize;
    }
    let (fb, fs) = (agree_box as f64 / N as f64, agree_sphere as f64 / N as f64);

    let a = shapes::box_mesh(Vec3::new(1.0, 1.0, 1.0), 0.25);
    let b = a.translated(&Vec3::new(0.5, 0.0, 0.0));
    let vol = intersection_volume(&a, &b, 0.05).unwrap();
    let vol_err = (vol - 0.5).abs() / 0.5;

    let ca: Vec<Vec3> = (0..500).map(|_| Vec3::from_fn(|_, _| rng.gen_range(-5.0..5.0))).collect();
    let cb: Vec<Vec3> = (0..500)
        .map(|_| Vec3::from_fn(|_, _| rng.gen_range(-5.0..5.0)) + Vec3::new(3.0, 0.0, 0.0))
        .collect();
    let fast = min_dist_set_set(&ca, &cb).unwrap();
    let brute = ca
        .iter()
        .flat_map(|p| cb.iter().map(move |q| (p - q).norm()))
        .fold(f64::INFINITY, f64::min);
    let dist_err = (fast - brute).abs();

    outcome(
        fb >= 0.999 && fs >= 0.999 && vol_err <= 0.05 && dist_err <= 1e-9,
        format!(
            "point-in-mesh agreement box {:.2}% sphere {:.2}% (≥ 99.9%); two-cube overlap {vol:.4} \
             ({:.2}% off 0.5, tol 5%); min distance |fast − brute| {dist_err:.1e} (tol 1e-9)",
            fb * 100.0,
            fs * 100.0,
            vol_err * 100.0
        ),
    )
}

// 10 ────────────────────────────────────────────────────────────────────────

fn report_files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else if p.file_name().unwrap() != "manifest.json" {
                out.push((p.strip_prefix(dir).unwrap().display().to_string(), std::fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

fn manifest_without_timing(dir: &Path) -> serde_json::Value {
    let mut v: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.join("manifest.json")).unwrap()).unwrap();
    v.as_object_mut().unwrap().remove("timing");
    v
}

fn reproducibility() -> Outcome {
    let tmp = tempfile::TempDir::new().unwrap();
    let fx = tmp.path().join("fixtures");
    graspfit::fixtures::write_fixtures(&fx, 7).unwrap();
    let run = |name: &str| {
        let out = tmp.path().join(name);
        let cfg = PipelineConfig {
            hand: fx.join("hands/curled"),
            catalog: fx.join("catalog.json"),
            exemplars: fx.join("exemplars.json"),
            output: out.clone(),
            seed: 7,
            ..PipelineConfig::default()
        };
        run_pipeline(&cfg, 1).unwrap();
        out
    };
    let (a, b) = (run("run_a"), run("run_b"));
    let (fa, fb) = (report_files(&a), report_files(&b));
    let json_count = fa.iter().filter(|(n, _)| n.ends_with(".json")).count();
    let identical = fa == fb && manifest_without_timing(&a) == manifest_without_timing(&b);
    outcome(
        identical && json_count >= 7,
        format!(
            "{} artifacts ({json_count} JSON) byte-identical across two seed-7 runs: {identical}; \
             manifests equal apart from timing",
            fa.len()
        ),
    )
}

fn main() {
    let start = Instant::now();
    let mut results: Vec<(usize, &str, Outcome, f64)> = Vec::new();
    let mut record = |id: usize, name: &'static str, f: &mut dyn FnMut() -> Outcome| {
        let t = Instant::now();
        let o = f();
        let secs = t.elapsed().as_secs_f64();
        println!(
            "{} [{id}] {name}: {} ({secs:.1}s)",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail
        );
        results.push((id, name, o, secs));
    };

    record(1, "gradient correctness", &mut gradient_correctness);
    record(2, "object-code invariance", &mut code_invariance);
    record(3, "force-closure spectrum", &mut closure_spectrum);
    record(4, "inscribed-ball gate", &mut inscribed_gate);
    let t = Instant::now();
    let curled: Vec<FitRun> = (0..10u64).map(|s| fit_and_score(HandPose::Curled, s, 1.0, None)).collect();
    let shared = t.elapsed().as_secs_f64();
    record(5, "fitting end-to-end", &mut || fitting_end_to_end(&curled));
    record(6, "selection plausibility", &mut || selection_plausibility(&curled));
    record(7, "simulation-loss effect", &mut || simulation_loss_echo(&curled));
    record(8, "physics sanity", &mut physics_sanity);
    record(9, "geometry oracles", &mut geometry_oracles);
    record(10, "reproducibility", &mut reproducibility);

    let failed: Vec<usize> = results.iter().filter(|r| !r.2.pass).map(|r| r.0).collect();
    println!(
        "acceptance: {}/{} criteria passed in {:.0}s (shared curled fits {shared:.0}s){}",
        results.len() - failed.len(),
        results.len(),
        start.elapsed().as_secs_f64(),
        if failed.is_empty() {
            String::new()
        } else {
            format!("; failed: {failed:?}")
        }
    );
    if !failed.is_empty() && std::env::var("ACCEPTANCE_STRICT").as_deref() == Ok("1") {
        std::process::exit(1);
    }
}
