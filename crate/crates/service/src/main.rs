use std::io::Write;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use bronchial_dx::baselines::{train_binary, BaselineParams, ModelDocument};
use bronchial_dx::cdamm::{InconclusivePolicy, RetrievalMode};
use bronchial_dx::cohort::{encode_records, generate, split, write_trio, CohortConfig, SET_FILE};
use bronchial_dx::dataset::read_dataset;
use bronchial_dx::evaluate::{train_memory, Algo, POSITIVE};
use bronchial_dx::imaging::{
    extract_features, iterative_threshold, Connectivity, GlcmOptions, GrayImage, ImagingConfig,
};
use bronchial_dx_service::engine::{bootstrap_memory, memory_from_file, run_evaluation, DEFAULT_PHI};
use bronchial_dx_service::payload::{parse_diagnose, CohortSource, DatasetPaths, EvaluateRequest};
use bronchial_dx_service::{router, AppState, CaseStore, Engine, ServiceError, ServiceResult};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "bronchial-dx", version, about = "Asthma screening service and tools")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct PolicyArgs {
    /// Minimum top probability for a conclusive CDAMM verdict.
    #[arg(long, env = "BDX_MIN_TOP", default_value_t = 0.5)]
    min_top: f64,
    /// Minimum gap between the top two probabilities.
    #[arg(long, env = "BDX_MIN_GAP", default_value_t = 0.1)]
    min_gap: f64,
    #[arg(long, env = "BDX_MODE", value_parser = parse_mode, default_value = "sequential")]
    mode: RetrievalMode,
    /// Score threshold for the questionnaire-only baseline.
    #[arg(long, env = "BDX_PHI", default_value_t = DEFAULT_PHI)]
    phi: u32,
}

fn parse_mode(s: &str) -> Result<RetrievalMode, String> {
    match s {
        "sequential" => Ok(RetrievalMode::Sequential),
        "summed" => Ok(RetrievalMode::Summed),
        _ => Err(format!("unknown mode `{s}`; expected sequential or summed")),
    }
}

impl PolicyArgs {
    fn policy(&self) -> InconclusivePolicy {
        InconclusivePolicy { min_top: self.min_top, min_gap: self.min_gap, ..Default::default() }
    }

    fn engine(&self, model_dir: Option<&Path>) -> ServiceResult<Engine> {
        let mut engine =
            Engine { policy: self.policy(), mode: self.mode, threshold_phi: self.phi, ..Default::default() };
        if let Some(dir) = model_dir {
            engine.load_models(dir)?;
        }
        Ok(engine)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run the HTTP API.
    Serve {
        #[arg(long, env = "BDX_HOST", default_value = "127.0.0.1")]
        host: String,
        #[arg(long, env = "BDX_PORT", default_value_t = 8080)]
        port: u16,
        /// Case log, snapshots and evaluation datasets.
        #[arg(long, env = "BDX_DATA_DIR", default_value = "var")]
        data_dir: PathBuf,
        /// Initial memory (`Asthma.set`) and baseline model documents.
        #[arg(long, env = "BDX_MODEL_DIR")]
        model_dir: Option<PathBuf>,
        /// Snapshot the memory after this many log events; 0 disables.
        #[arg(long, env = "BDX_SNAPSHOT_EVERY", default_value_t = 100)]
        snapshot_every: u64,
        #[command(flatten)]
        policy: PolicyArgs,
    },
    /// Diagnose one JSON payload offline and print the outcome.
    Diagnose {
        /// Payload file in the `POST /api/diagnose` format.
        #[arg(long)]
        input: PathBuf,
        /// Overrides the payload's `algo`.
        #[arg(long)]
        algo: Option<Algo>,
        #[arg(long, env = "BDX_MODEL_DIR")]
        model_dir: Option<PathBuf>,
        #[command(flatten)]
        policy: PolicyArgs,
    },
    /// Train on one split, tally the other and print the metrics.
    Evaluate {
        #[arg(long, default_value = "cdamm")]
        algo: Algo,
        /// Preset name or path to a cohort JSON file.
        #[arg(long, default_value = "default")]
        cohort: String,
        #[arg(long)]
        size: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = 0.5)]
        train_fraction: f64,
        #[arg(long, default_value_t = 1)]
        split_seed: u64,
        /// Training file; use with `--test` instead of a cohort.
        #[arg(long, requires = "test")]
        train: Option<PathBuf>,
        #[arg(long, requires = "train")]
        test: Option<PathBuf>,
        /// Print the full report as JSON.
        #[arg(long)]
        json: bool,
        #[command(flatten)]
        policy: PolicyArgs,
    },
    /// Generate a synthetic cohort and write the dataset trio.
    Cohort {
        /// Preset name or path to a cohort JSON file.
        #[arg(long, default_value = "default")]
        cohort: String,
        #[arg(long)]
        size: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = 0.5)]
        train_fraction: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit a baseline on a training file and write its model document.
    Train {
        #[arg(long)]
        algo: Algo,
        #[arg(long)]
        train: PathBuf,
        /// Directory receiving `<algo>.json`.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Segment a grayscale image and print its ROI features.
    Roi {
        #[arg(long)]
        image: PathBuf,
        #[arg(long, default_value_t = 0.5)]
        epsilon: f64,
        /// Use 8-connectivity for the region.
        #[arg(long)]
        eight: bool,
        /// Gray levels of the co-occurrence matrix.
        #[arg(long, default_value_t = 8)]
        levels: usize,
        /// Co-occurrence offset as `dx,dy`.
        #[arg(long, default_value = "1,0", value_parser = parse_offset, allow_hyphen_values = true)]
        offset: (i32, i32),
        /// Count each pair in both directions.
        #[arg(long)]
        symmetric: bool,
    },
}

fn parse_offset(s: &str) -> Result<(i32, i32), String> {
    let (dx, dy) = s.split_once(',').ok_or("expected dx,dy")?;
    let parse = |v: &str| v.trim().parse::<i32>().map_err(|e| format!("{v:?}: {e}"));
    Ok((parse(dx)?, parse(dy)?))
}

fn load_cohort(name: &str) -> ServiceResult<CohortConfig> {
    let path = Path::new(name);
    if path.extension().is_some_and(|e| e == "json") {
        Ok(CohortConfig::from_path(path)?)
    } else {
        Ok(CohortConfig::preset(name)?)
    }
}

/// Writes to stdout; a closed pipe (`| head`) ends the process quietly.
fn emit(text: &str) -> ServiceResult<()> {
    let mut out = std::io::stdout().lock();
    match out.write_all(text.as_bytes()).and_then(|()| out.flush()) {
        Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => std::process::exit(0),
        r => Ok(r?),
    }
}

fn print_json(v: &impl serde::Serialize) -> ServiceResult<()> {
    emit(&(serde_json::to_string_pretty(v).map_err(|e| ServiceError::Internal(e.to_string()))? + "\n"))
}

fn initial_memory(model_dir: Option<&Path>, engine: &Engine) -> ServiceResult<bronchial_dx::cdamm::Memory> {
    match model_dir.map(|d| d.join(SET_FILE)).filter(|p| p.exists()) {
        Some(p) => memory_from_file(&p),
        None => bootstrap_memory(&engine.encoder),
    }
}

async fn serve(addr: SocketAddr, state: Arc<AppState>) -> ServiceResult<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!(%addr, "listening");
    axum::serve(listener, router(state.clone()))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    state.store.snapshot()
}

fn run(cli: Cli) -> ServiceResult<()> {
    match cli.command {
        Command::Serve { host, port, data_dir, model_dir, snapshot_every, policy } => {
            let engine = policy.engine(model_dir.as_deref())?;
            let store = CaseStore::open(&data_dir, || initial_memory(model_dir.as_deref(), &engine), snapshot_every)?;
            tracing::info!(cases = store.case_count(), version = store.memory_version(), "store opened");
            let addr: SocketAddr = format!("{host}:{port}")
                .parse()
                .map_err(|e| ServiceError::BadRequest(format!("bad listen address: {e}")))?;
            let state = Arc::new(AppState { engine, store, data_dir: Some(data_dir) });
            tokio::runtime::Runtime::new()?.block_on(serve(addr, state))
        }
        Command::Diagnose { input, algo, model_dir, policy } => {
            let engine = policy.engine(model_dir.as_deref())?;
            let text = std::fs::read_to_string(&input)?;
            let value =
                serde_json::from_str(&text).map_err(|e| ServiceError::BadRequest(format!("malformed JSON: {e}")))?;
            let mut req = parse_diagnose(&value, &engine.encoder, &engine.imaging)?;
            if let Some(a) = algo {
                req.algo = a;
            }
            let memory = initial_memory(model_dir.as_deref(), &engine)?;
            print_json(&engine.run(&memory, &req.input, req.algo)?)
        }
        Command::Evaluate { algo, cohort, size, seed, train_fraction, split_seed, train, test, json, policy } => {
            let req = EvaluateRequest {
                algo,
                cohort: CohortSource::Inline(Box::new(load_cohort(&cohort)?)),
                size,
                seed,
                train_fraction,
                split_seed,
                dataset: train.zip(test).map(|(tr, te)| DatasetPaths {
                    train: tr.to_string_lossy().into_owned(),
                    test: te.to_string_lossy().into_owned(),
                }),
                policy: policy.policy(),
                mode: policy.mode,
                train_seed: 1,
            };
            let enc = policy.engine(None)?.encoder;
            // CLI paths are used as given; only HTTP requests are confined to the data directory.
            let report = match &req.dataset {
                Some(paths) => {
                    let train = read_dataset(&paths.train)?;
                    let test = read_dataset(&paths.test)?;
                    let cfg =
                        bronchial_dx::evaluate::EvalConfig { policy: req.policy.clone(), mode: req.mode, seed: 1 };
                    bronchial_dx::evaluate::evaluate(algo, &enc, &train, &test, &cfg)?
                }
                None => run_evaluation(&req, &enc, None)?,
            };
            if json {
                print_json(&report)
            } else {
                let mut text = format!(
                    "algo {}  train {}  test {}  {:.1} ms\n",
                    report.algo, report.train_size, report.test_size, report.runtime_ms
                );
                if let Some(phi) = report.phi {
                    text += &format!("phi {phi}\n");
                }
                emit(&(text + &report.metrics.to_table()))
            }
        }
        Command::Cohort { cohort, size, seed, train_fraction, out } => {
            let mut cfg = load_cohort(&cohort)?;
            if let Some(n) = size {
                cfg.size = n;
            }
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let engine = Engine::default();
            let enc = &engine.encoder;
            let records = generate(&cfg, enc)?;
            let (tr, te) = split(&records, train_fraction, cfg.seed)?;
            let (train, test) = (encode_records(&tr, enc)?, encode_records(&te, enc)?);
            let memory = train_memory(enc, &train)?;
            let manifest = write_trio(&out, &memory.to_document(), &train, &test, cfg.seed, train_fraction)?;
            print_json(&manifest)
        }
        Command::Train { algo, train, out, seed } => {
            let ds = read_dataset(&train)?;
            let model = train_binary(algo, &ds, POSITIVE, seed, &BaselineParams::default())?;
            std::fs::create_dir_all(&out)?;
            let path = out.join(format!("{algo}.json"));
            std::fs::write(&path, ModelDocument::new(model).to_json()?)?;
            emit(&format!("wrote {}\n", path.display()))
        }
        Command::Roi { image, epsilon, eight, levels, offset, symmetric } => {
            let img = GrayImage::open(&image)?;
            let cfg = ImagingConfig {
                epsilon,
                connectivity: if eight { Connectivity::Eight } else { Connectivity::Four },
                glcm: GlcmOptions { levels, offset, symmetric },
            };
            let t = iterative_threshold(&img, epsilon)?;
            let features = extract_features(&img, &cfg)?;
            print_json(&serde_json::json!({ "threshold": t, "features": features }))
        }
    }
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()))
        .with_writer(std::io::stderr)
        .init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if let ServiceError::Validation(fields) = &e {
                for f in fields {
                    eprintln!("  {f}");
                }
            }
            ExitCode::FAILURE
        }
    }
}
