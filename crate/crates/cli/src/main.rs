//! `assist`: run assembly sessions, serve a simulated robot, run experiments.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use assist_core::catalog::ComponentCatalog;
use assist_core::chat::{HttpChatClient, LlmEndpoint};
use assist_core::detection::{
    write_fixture, DetectionError, DetectionReport, Detector, ImageSpec, LlmDetector, OracleDetector, PayloadRef,
    RecordingDetector, ReplayDetector,
};
use assist_core::eval::{run_and_render, write_report, ExperimentKind, ExperimentSpec};
use assist_core::orchestrator::{
    run_session, ConsoleOperator, InProcessRobot, OperatorSource, ResumePoint, RobotDriver, SessionBackends,
    SessionHooks, SessionLog, SessionResult, SessionView,
};
use assist_core::planner::{LlmPlanner, Planner, ReferencePlanner};
use assist_core::scenario::Scenario;
use assist_core::workcell::{
    CycleTimeModel, OperatorPolicy, RobotSimState, SceneSnapshot, ScriptedChoice, SimOperator, WorldHandle,
    WorldState,
};
use assist_gateway::Gateway;
use assist_robot_link::{serve_simulated_robot, RobotClient, DEFAULT_REPLY_TIMEOUT};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use thiserror::Error;

const DEFAULT_MODEL: &str = "gpt-4o";

#[derive(Parser)]
#[command(name = "assist", version, about)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run one assembly session.
    Run(RunArgs),
    /// Serve the simulated robot controller over TCP.
    ServeRobot(ServeArgs),
    /// Run an experiment and write CSV/markdown/JSON reports.
    Eval(EvalArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum DetectorKind {
    Oracle,
    Llm,
    Replay,
}

#[derive(Clone, Copy, ValueEnum)]
enum PlannerKind {
    Reference,
    Llm,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    scenario: PathBuf,
    #[arg(long, value_enum, default_value = "oracle")]
    detector: DetectorKind,
    /// Fixture consumed by `--detector replay`.
    #[arg(long)]
    replay_fixture: Option<PathBuf>,
    /// Write every detection request/response pair to this fixture file.
    #[arg(long)]
    record: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "reference")]
    planner: PlannerKind,
    /// `compliant`, `script:<file>`, `random:<seed>` or `console`.
    /// Defaults to the scenario's policy.
    #[arg(long)]
    operator: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Session directory for the step log and per-iteration detection files.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Continue the interrupted session logged in `--out`.
    #[arg(long, requires = "out")]
    resume: bool,
    /// Remote robot controller (`host:port`); the in-process simulator otherwise.
    #[arg(long)]
    robot: Option<String>,
    /// Serve the console gateway on this address.
    #[arg(long)]
    listen: Option<String>,
    /// Seconds the console operator may take per wait point.
    #[arg(long, default_value_t = 600)]
    operator_wait: u64,
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long)]
    listen: String,
    /// Scenario whose catalog and layout to use; built-in kit otherwise.
    #[arg(long)]
    scenario: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum EvalKind {
    E1,
    E2,
    E3,
    Pr,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(value_enum)]
    experiment: EvalKind,
    #[arg(long)]
    spec: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Error)]
enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Failed(String),
}

fn failed(e: impl std::fmt::Display) -> CliError {
    CliError::Failed(e.to_string())
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "warn".into()),
        )
        .with_writer(std::io::stderr)
        .init();
    let cli = Cli::parse();
    let outcome = match cli.cmd {
        Cmd::Run(a) => run(a),
        Cmd::ServeRobot(a) => serve_robot(a),
        Cmd::Eval(a) => eval(a),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                CliError::Usage(_) => ExitCode::from(64),
                CliError::Failed(_) => ExitCode::from(1),
            }
        }
    }
}

fn catalog_image(catalog: &ComponentCatalog, base: &Path) -> ImageSpec {
    let payload = match catalog.catalog_image() {
        Some(p) => PayloadRef::File(base.join(p)),
        None => PayloadRef::Symbolic("sim:catalog".into()),
    };
    ImageSpec::catalog_sheet(payload)
}

/// Lets the caller read the recorded fixture after the session consumed the detector.
struct SharedRecorder(Arc<Mutex<RecordingDetector<Box<dyn Detector>>>>);

impl Detector for SharedRecorder {
    fn detect(
        &mut self,
        scene: &SceneSnapshot,
        prior: Option<&DetectionReport>,
    ) -> Result<DetectionReport, DetectionError> {
        self.0.lock().expect("recorder lock").detect(scene, prior)
    }
}

fn parse_operator(spec: &str, scenario_dir: &Path) -> Result<Option<OperatorPolicy>, CliError> {
    if spec == "console" {
        return Ok(None);
    }
    if spec == "compliant" {
        return Ok(Some(OperatorPolicy::compliant()));
    }
    if let Some(file) = spec.strip_prefix("script:") {
        let path = scenario_dir.join(file);
        let text = std::fs::read_to_string(&path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
        let script: Vec<ScriptedChoice> =
            serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
        return Ok(Some(OperatorPolicy::deviate(script)));
    }
    if let Some(seed) = spec.strip_prefix("random:") {
        let seed = seed.parse().map_err(|_| CliError::Usage(format!("bad seed in {spec:?}")))?;
        return Ok(Some(OperatorPolicy::seeded_random(seed, 0.25)));
    }
    Err(CliError::Usage(format!(
        "--operator must be compliant, script:<file>, random:<seed> or console, got {spec:?}"
    )))
}

#[derive(Serialize)]
struct RunSummary<'a> {
    success: bool,
    termination: assist_core::orchestrator::Termination,
    detail: &'a str,
    sequence: String,
    deliveries: usize,
    iterations: usize,
    false_positives: u32,
    false_negatives: u32,
    rejected_attempts: usize,
    total_seconds: f64,
    avg_llm_seconds: f64,
}

fn summary(r: &SessionResult) -> RunSummary<'_> {
    RunSummary {
        success: r.success,
        termination: r.termination,
        detail: &r.detail,
        sequence: r.sequence.to_string(),
        deliveries: r.deliveries,
        iterations: r.steps.last().map_or(0, |s| s.iteration),
        false_positives: r.total_fp(),
        false_negatives: r.total_fn(),
        rejected_attempts: r.rejected_attempts(),
        total_seconds: r.total_seconds,
        avg_llm_seconds: r.avg_llm_seconds,
    }
}

fn run(a: RunArgs) -> Result<ExitCode, CliError> {
    let loaded = Scenario::load(&a.scenario).map_err(|e| CliError::Usage(e.to_string()))?;
    let base = a.scenario.parent().unwrap_or(Path::new(".")).to_path_buf();
    let mut config = loaded.config;
    let mut noise = loaded.scenario.noise.clone();
    if let Some(seed) = a.seed {
        config.seed = seed;
        noise.rng_seed = seed;
    }
    let catalog = config.catalog.clone();
    let world = WorldHandle::spawn(WorldState::initial(&catalog).map_err(failed)?);

    let sheet = catalog_image(&catalog, &base);
    let inner: Box<dyn Detector> = match a.detector {
        DetectorKind::Oracle => Box::new(OracleDetector::new(catalog.clone(), noise)),
        DetectorKind::Llm => {
            let client = HttpChatClient::new(LlmEndpoint::from_env(DEFAULT_MODEL));
            let model = client.model().to_string();
            Box::new(LlmDetector::new(Box::new(client), model, catalog.clone(), sheet.clone()))
        }
        DetectorKind::Replay => {
            let path = a
                .replay_fixture
                .as_ref()
                .ok_or_else(|| CliError::Usage("--detector replay needs --replay-fixture".into()))?;
            Box::new(ReplayDetector::from_file(catalog.clone(), sheet.clone(), path).map_err(failed)?)
        }
    };
    let (detector, recorder): (Box<dyn Detector>, _) = match &a.record {
        Some(_) => {
            let r = Arc::new(Mutex::new(RecordingDetector::new(inner, catalog.clone(), sheet.clone())));
            (Box::new(SharedRecorder(Arc::clone(&r))), Some(r))
        }
        None => (inner, None),
    };

    let planner: Box<dyn Planner> = match a.planner {
        PlannerKind::Reference => Box::new(ReferencePlanner::new(catalog.clone())),
        PlannerKind::Llm => {
            let client = HttpChatClient::new(LlmEndpoint::from_env(DEFAULT_MODEL));
            let model = client.model().to_string();
            Box::new(LlmPlanner::new(Box::new(client), model, catalog.clone()))
        }
    };

    let robot: Box<dyn RobotDriver> = match &a.robot {
        Some(addr) => Box::new(RobotClient::connect(addr, DEFAULT_REPLY_TIMEOUT).map_err(failed)?),
        None => Box::new(InProcessRobot::new(
            RobotSimState::new(CycleTimeModel::for_job_seconds(config.time_model.robot_cycle_seconds)),
            world.clone(),
            config.layout.clone(),
            catalog.clone(),
        )),
    };

    let policy = match &a.operator {
        Some(spec) => parse_operator(spec, &base)?,
        None => Some(loaded.scenario.policy.clone()),
    };
    if let Some(p) = &policy {
        p.validate(&catalog).map_err(CliError::Usage)?;
    }
    let mut console_tx = None;
    let operator: Box<dyn OperatorSource> = match policy {
        Some(p) => Box::new(SimOperator::new(p)),
        None => {
            if a.listen.is_none() {
                return Err(CliError::Usage("--operator console needs --listen".into()));
            }
            let (tx, op) = ConsoleOperator::channel(Some(Duration::from_secs(a.operator_wait)));
            console_tx = Some(tx);
            Box::new(op)
        }
    };

    let mut hooks = SessionHooks::default();
    if let Some(out) = &a.out {
        if a.resume {
            hooks.resume = Some(ResumePoint::from_dir(out).map_err(failed)?);
        }
        hooks.log = Some(SessionLog::open(out).map_err(failed)?);
    }

    let _runtime = match &a.listen {
        Some(addr) => {
            let tx = console_tx.unwrap_or_else(|| std::sync::mpsc::channel().0);
            let gw = Gateway::new(SessionView::initial(&catalog, world.snapshot()), tx);
            let rt = tokio::runtime::Runtime::new().map_err(failed)?;
            let listener = rt.block_on(tokio::net::TcpListener::bind(addr)).map_err(failed)?;
            eprintln!("gateway listening on http://{}", listener.local_addr().map_err(failed)?);
            rt.spawn(assist_gateway::serve(listener, gw.clone()));
            hooks.observer = Some(Box::new(gw.observer()));
            Some(rt)
        }
        None => None,
    };

    let backends = SessionBackends {
        world,
        detector,
        planner,
        robot,
        operator,
    };
    let result = run_session(&config, backends, hooks).map_err(failed)?;

    if let (Some(path), Some(rec)) = (&a.record, recorder) {
        let records = rec.lock().expect("recorder lock").records().to_vec();
        write_fixture(path, &records).map_err(failed)?;
    }
    if let Some(out) = &a.out {
        let json = serde_json::to_string_pretty(&result).map_err(failed)?;
        std::fs::write(out.join("result.json"), json).map_err(failed)?;
    }
    println!("{}", serde_json::to_string_pretty(&summary(&result)).map_err(failed)?);
    Ok(if result.success {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(2)
    })
}

fn serve_robot(a: ServeArgs) -> Result<ExitCode, CliError> {
    let config = match &a.scenario {
        Some(p) => Scenario::load(p).map_err(|e| CliError::Usage(e.to_string()))?.config,
        None => assist_core::orchestrator::SessionConfig::default_aircraft(),
    };
    let world = WorldHandle::spawn(WorldState::initial(&config.catalog).map_err(failed)?);
    let server = serve_simulated_robot(
        &a.listen,
        world,
        RobotSimState::new(CycleTimeModel::for_job_seconds(config.time_model.robot_cycle_seconds)),
        config.layout,
        config.catalog,
    )
    .map_err(failed)?;
    eprintln!("simulated robot listening on {}", server.local_addr());
    server.wait();
    Ok(ExitCode::SUCCESS)
}

fn eval(a: EvalArgs) -> Result<ExitCode, CliError> {
    let spec = ExperimentSpec::from_file(&a.spec).map_err(|e| CliError::Usage(e.to_string()))?;
    let (want, name) = match a.experiment {
        EvalKind::E1 => (ExperimentKind::E1, "e1"),
        EvalKind::E2 => (ExperimentKind::E2, "e2"),
        EvalKind::E3 => (ExperimentKind::E3, "e3"),
        EvalKind::Pr => (ExperimentKind::Pr, "pr"),
    };
    if spec.experiment != want {
        return Err(CliError::Usage(format!(
            "{} describes experiment {:?}, not {name}",
            a.spec.display(),
            spec.experiment
        )));
    }
    let report = run_and_render(&spec).map_err(failed)?;
    write_report(&a.out, name, &report).map_err(failed)?;
    print!("{}", report.markdown);
    Ok(ExitCode::SUCCESS)
}
