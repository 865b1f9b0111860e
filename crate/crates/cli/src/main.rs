use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::Value;

use graspfit::catalog::{
    build_catalog, compute_object_code, load_catalog, predict_code, select_object, ExemplarSet, ObjectCode,
};
use graspfit::eval::{evaluate, summarize, write_csv, EvalConfig, MetricsReport};
use graspfit::fitting::{fit, FitConfig};
use graspfit::fixtures::write_fixtures;
use graspfit::geometry::load_mesh;
use graspfit::hand::{grasp_gate, HandModel, DEFAULT_GATE_THRESHOLD};
use graspfit::pipeline::{run_pipeline, PipelineConfig, PipelineOutcome};
use graspfit::{Error, Result};

/// Held-object synthesis for a fixed 3D hand.
#[derive(Debug, Parser)]
#[command(name = "graspfit", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Gate, predict a code, select, fit and evaluate `--samples` objects.
    Pipeline(PipelineArgs),
    /// Write the synthetic hands, objects, exemplars and catalog.
    Fixtures {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Object code of a mesh for bone length `--bone` (or the hand's).
    Code {
        #[arg(long)]
        object: PathBuf,
        #[arg(long, conflicts_with = "hand", required_unless_present = "hand")]
        bone: Option<f64>,
        #[arg(long)]
        hand: Option<PathBuf>,
    },
    /// Predict a code for the hand and select a rescaled catalog object.
    Select {
        #[arg(long)]
        hand: PathBuf,
        #[arg(long)]
        catalog: PathBuf,
        #[arg(long)]
        exemplars: PathBuf,
        #[arg(long, default_value_t = 5)]
        neighbors: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write the rescaled mesh here.
        #[arg(long)]
        mesh_out: Option<PathBuf>,
        #[command(flatten)]
        io: IoArgs,
    },
    /// Inscribed-ball grasp gate.
    Gate {
        #[arg(long)]
        hand: PathBuf,
        #[arg(long, default_value_t = DEFAULT_GATE_THRESHOLD)]
        threshold: f64,
        #[command(flatten)]
        io: IoArgs,
    },
    /// Fit an object's pose and scale to the hand.
    Fit {
        #[arg(long)]
        hand: PathBuf,
        #[arg(long)]
        object: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        max_iters: Option<usize>,
        #[arg(long)]
        lambda_sim: Option<f64>,
        /// Write the posed mesh here.
        #[arg(long)]
        mesh_out: Option<PathBuf>,
        #[command(flatten)]
        io: IoArgs,
    },
    /// Metrics of an object already placed against the hand.
    Eval {
        #[arg(long)]
        hand: PathBuf,
        #[arg(long)]
        object: PathBuf,
        #[command(flatten)]
        io: IoArgs,
    },
    /// Metrics of several placed objects, as CSV plus a JSON summary.
    EvalBatch {
        #[arg(long)]
        hand: PathBuf,
        #[arg(long, num_args = 1.., required = true)]
        objects: Vec<PathBuf>,
        #[arg(long)]
        csv: PathBuf,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        #[command(flatten)]
        io: IoArgs,
    },
    /// Index a directory of OBJ meshes.
    CatalogBuild {
        #[arg(long)]
        dir: PathBuf,
        /// Defaults to `<dir>/catalog.json`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
struct IoArgs {
    /// JSON file whose fields override the command-line options.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Write the JSON result here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct PipelineArgs {
    #[arg(long)]
    hand: Option<PathBuf>,
    #[arg(long)]
    catalog: Option<PathBuf>,
    #[arg(long)]
    exemplars: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    neighbors: Option<usize>,
    #[arg(long)]
    gate_threshold: Option<f64>,
    #[arg(long)]
    max_iters: Option<usize>,
    #[arg(long)]
    lambda_sim: Option<f64>,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// JSON file whose fields override the command-line options.
    #[arg(long)]
    config: Option<PathBuf>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("GRASPFIT_LOG", "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Pipeline(args) => pipeline(args),
        Command::Fixtures { out, seed } => emit(&write_fixtures(&out, seed)?, None),
        Command::Code { object, bone, hand } => {
            let b = match (bone, hand) {
                (Some(b), _) => b,
                (None, Some(h)) => HandModel::load_pair(h)?.principal_bone_length(),
                (None, None) => unreachable!("clap requires one of --bone/--hand"),
            };
            emit(&compute_object_code(&load_mesh(object)?, b)?, None)
        }
        Command::Select {
            hand,
            catalog,
            exemplars,
            neighbors,
            seed,
            mesh_out,
            io,
        } => {
            #[derive(Serialize, serde::Deserialize)]
            #[serde(deny_unknown_fields)]
            struct Params {
                neighbors: usize,
                seed: u64,
            }
            let p: Params = with_overrides(Params { neighbors, seed }, io.config.as_deref())?;
            let hand = HandModel::load_pair(hand)?.canonicalize()?;
            let catalog = load_catalog(catalog)?;
            let (code, category) = predict_code(&hand, &ExemplarSet::load(exemplars)?, p.neighbors, p.seed);
            let sel = select_object(&code, &category, &catalog, hand.principal_bone_length(), p.seed)?;
            if let Some(path) = mesh_out {
                sel.mesh.write_obj(path)?;
            }
            #[derive(Serialize)]
            struct Selected {
                seed: u64,
                code: ObjectCode,
                category: String,
                object_id: String,
                code_distance: f64,
            }
            emit(
                &Selected {
                    seed: p.seed,
                    code,
                    category,
                    object_id: sel.id,
                    code_distance: sel.distance,
                },
                io.out.as_deref(),
            )
        }
        Command::Gate { hand, threshold, io } => {
            #[derive(Serialize, serde::Deserialize)]
            #[serde(deny_unknown_fields)]
            struct Params {
                threshold: f64,
            }
            let p: Params = with_overrides(Params { threshold }, io.config.as_deref())?;
            emit(&grasp_gate(&HandModel::load_pair(hand)?, p.threshold)?, io.out.as_deref())
        }
        Command::Fit {
            hand,
            object,
            seed,
            max_iters,
            lambda_sim,
            mesh_out,
            io,
        } => {
            let mut cfg = FitConfig {
                seed,
                ..FitConfig::default()
            };
            if let Some(n) = max_iters {
                cfg.max_iters = n;
            }
            if let Some(l) = lambda_sim {
                cfg.lambda_sim = l;
            }
            let cfg: FitConfig = with_overrides(cfg, io.config.as_deref())?;
            let object = load_mesh(object)?;
            let report = fit(&HandModel::load_pair(hand)?, &object, &cfg)?;
            if let Some(path) = mesh_out {
                report.posed_mesh(&object)?.write_obj(path)?;
            }
            emit(&report, io.out.as_deref())
        }
        Command::Eval { hand, object, io } => {
            let cfg: EvalConfig = with_overrides(EvalConfig::default(), io.config.as_deref())?;
            emit(&evaluate(&HandModel::load_pair(hand)?, &load_mesh(object)?, &cfg)?, io.out.as_deref())
        }
        Command::EvalBatch {
            hand,
            objects,
            csv,
            jobs,
            io,
        } => {
            let cfg: EvalConfig = with_overrides(EvalConfig::default(), io.config.as_deref())?;
            let hand = HandModel::load_pair(hand)?;
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(jobs.max(1))
                .build()
                .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
            let rows: Vec<(String, MetricsReport)> = pool.install(|| {
                objects
                    .par_iter()
                    .map(|p| Ok((p.display().to_string(), evaluate(&hand, &load_mesh(p)?, &cfg)?)))
                    .collect::<Result<_>>()
            })?;
            write_csv(&csv, &rows)?;
            let reports: Vec<MetricsReport> = rows.into_iter().map(|r| r.1).collect();
            emit(&summarize(&reports), io.out.as_deref())
        }
        Command::CatalogBuild { dir, out } => {
            let catalog = build_catalog(&dir)?;
            let path = out.unwrap_or_else(|| dir.join("catalog.json"));
            catalog.save(&path)?;
            #[derive(Serialize)]
            struct Built {
                index: String,
                entries: usize,
                excluded: usize,
            }
            emit(
                &Built {
                    index: path.display().to_string(),
                    entries: catalog.entries.len(),
                    excluded: catalog.excluded.len(),
                },
                None,
            )
        }
    }
}

fn pipeline(args: PipelineArgs) -> Result<()> {
    let mut cfg = PipelineConfig::default();
    macro_rules! set {
        ($($field:ident => $target:expr),* $(,)?) => {
            $(if let Some(v) = args.$field { $target = v; })*
        };
    }
    set!(
        hand => cfg.hand,
        catalog => cfg.catalog,
        exemplars => cfg.exemplars,
        out => cfg.output,
        seed => cfg.seed,
        samples => cfg.samples,
        neighbors => cfg.neighbors,
        gate_threshold => cfg.gate_threshold,
        max_iters => cfg.fit.max_iters,
        lambda_sim => cfg.fit.lambda_sim,
    );
    let cfg: PipelineConfig = with_overrides(cfg, args.config.as_deref())?;
    match run_pipeline(&cfg, args.jobs)? {
        PipelineOutcome::Rejected(gate) => {
            eprintln!(
                "hand rejected by the grasp gate (normalized radius {:.4} < {}); record written to {}",
                gate.inscribed_radius_normalized,
                gate.threshold,
                cfg.output.display()
            );
        }
        PipelineOutcome::Completed(samples) => {
            for (record, metrics) in samples {
                println!(
                    "sample {} seed {}: {} sd {:.3} cm depth {:.3} cm coverage {} success {}",
                    record.sample,
                    record.seed,
                    record.object_id,
                    metrics.sim_distance,
                    metrics.penetration_depth,
                    metrics.contact_region_coverage,
                    metrics.success
                );
            }
        }
    }
    Ok(())
}

/// Deep-merges the JSON object in `config` over `base`.
fn with_overrides<T: Serialize + DeserializeOwned>(base: T, config: Option<&Path>) -> Result<T> {
    let Some(path) = config else { return Ok(base) };
    let text = std::fs::read_to_string(path).map_err(|e| io_error(path, e))?;
    let patch: Value = serde_json::from_str(&text).map_err(|e| json_error(path, e))?;
    let mut merged = serde_json::to_value(base).expect("config serializes");
    merge(&mut merged, patch);
    serde_json::from_value(merged).map_err(|e| json_error(path, e))
}

fn merge(base: &mut Value, patch: Value) {
    match (base, patch) {
        (Value::Object(b), Value::Object(p)) => {
            for (k, v) in p {
                merge(b.entry(k).or_insert(Value::Null), v);
            }
        }
        (b, p) => *b = p,
    }
}

fn emit<T: Serialize>(value: &T, out: Option<&Path>) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("report serializes");
    text.push('\n');
    match out {
        Some(path) => std::fs::write(path, text).map_err(|e| io_error(path, e)),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn io_error(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.into(),
        source,
    }
}

fn json_error(path: &Path, source: serde_json::Error) -> Error {
    Error::Json {
        path: path.into(),
        source,
    }
}
