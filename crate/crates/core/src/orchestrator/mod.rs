//! The session loop: detect, plan, deliver, wait for the operator, repeat.

mod log;
mod operator_source;
mod robot;

use std::collections::BTreeMap;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::belief::BeliefState;
use crate::catalog::{format_set, ComponentCatalog, ComponentId, ComponentSet};
use crate::detection::{
    detect_with_retry, DetectionReport, Detector, NoiseModel, OracleDetector, DETECTION_RETRIES,
};
use crate::planner::motion::{generate_actions, MagazineLayout};
use crate::planner::{PlanDecision, Planner, ReferencePlanner};
use crate::sequence::AssemblySequence;
use crate::workcell::{
    sample_step_time, snapshot, CycleTimeModel, OperatorEvent, OperatorPolicy, RobotSimState,
    SimOperator, StepKind, TimeModel, WorldHandle, WorldState,
};

pub use self::log::{det_file_name, read_log, LogError, LogRecord, ResumePoint, SessionLog, SESSION_FILE};
pub use operator_source::{ConsoleOperator, ConsoleRequest, OperatorSource};
pub use robot::{InProcessRobot, JobError, JobReport, RobotDriver};

/// Consecutive no-change iterations that count as a deadlock.
pub const DEFAULT_DEADLOCK_WINDOW: usize = 3;
pub const DEFAULT_MAX_ITERATIONS: usize = 20;

#[derive(Debug, Clone)]
pub struct SessionConfig {
    pub catalog: ComponentCatalog,
    pub layout: MagazineLayout,
    pub time_model: TimeModel,
    /// Seeds the time-model draws.
    pub seed: u64,
    pub max_iterations: usize,
    pub deadlock_window: usize,
    pub detection_retries: u32,
}

impl SessionConfig {
    pub fn new(catalog: ComponentCatalog, layout: MagazineLayout) -> Self {
        Self {
            catalog,
            layout,
            time_model: TimeModel::guided_default(),
            seed: 0,
            max_iterations: DEFAULT_MAX_ITERATIONS,
            deadlock_window: DEFAULT_DEADLOCK_WINDOW,
            detection_retries: DETECTION_RETRIES,
        }
    }

    pub fn default_aircraft() -> Self {
        Self::new(ComponentCatalog::default_aircraft(), MagazineLayout::default_layout())
    }

    pub fn validate(&self) -> Result<(), OrchestratorError> {
        if self.max_iterations < self.catalog.len() {
            return Err(OrchestratorError::Config(format!(
                "max_iterations {} is below the catalog size {}",
                self.max_iterations,
                self.catalog.len()
            )));
        }
        if self.deadlock_window == 0 {
            return Err(OrchestratorError::Config("deadlock_window must be >= 1".into()));
        }
        self.layout
            .validate_for(&self.catalog)
            .map_err(|e| OrchestratorError::Config(e.to_string()))?;
        self.time_model.validate().map_err(OrchestratorError::Config)
    }
}

#[derive(Debug, Error)]
pub enum OrchestratorError {
    #[error("invalid session config: {0}")]
    Config(String),
    #[error(transparent)]
    Log(#[from] LogError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Completed,
    Deadlock,
    MaxIterations,
    BackendFailure,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum DetectionClass {
    Tp,
    Fp,
    Fn,
    Tn,
}

/// Per-component outcome of one report against the physical truth.
pub fn classify_detection(
    report: &DetectionReport,
    truth: &ComponentSet,
) -> BTreeMap<ComponentId, DetectionClass> {
    report
        .verdicts
        .iter()
        .map(|(id, v)| {
            let class = match (v.is_present(), truth.contains(id)) {
                (true, true) => DetectionClass::Tp,
                (true, false) => DetectionClass::Fp,
                (false, true) => DetectionClass::Fn,
                (false, false) => DetectionClass::Tn,
            };
            (*id, class)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Progress {
    Progress,
    Deadlock,
}

/// `marks[i]` is `det ∪ brought` after iteration `i + 1`. Deadlock when the
/// last `window` iterations all left it unchanged.
pub fn detect_deadlock(marks: &[ComponentSet], window: usize) -> Progress {
    if window == 0 || marks.len() <= window {
        return Progress::Progress;
    }
    let tail = &marks[marks.len() - window - 1..];
    if tail.windows(2).all(|w| w[0] == w[1]) {
        Progress::Deadlock
    } else {
        Progress::Progress
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum JobStatus {
    Completed,
    Nack { seq: u64, reason: String },
    ConnectionLost,
    Timeout { seq: u64 },
    NotPlannable { reason: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobOutcome {
    pub component: ComponentId,
    pub actions: usize,
    pub acks: usize,
    pub elapsed_s: f64,
    #[serde(flatten)]
    pub status: JobStatus,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct StepTimes {
    pub llm_s: f64,
    pub robot_s: f64,
    pub human_s: f64,
    /// Simulated clock at the end of the iteration.
    pub clock_s: f64,
    pub wall_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub iteration: usize,
    pub detection: DetectionReport,
    pub detection_attempts: u32,
    pub classification: BTreeMap<ComponentId, DetectionClass>,
    pub plan: PlanDecision,
    pub job: Option<JobOutcome>,
    /// What this iteration added to `brought`.
    pub delivered: Option<ComponentId>,
    pub operator: OperatorEvent,
    pub belief_after: BeliefState,
    pub world_after: WorldState,
    pub times: StepTimes,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionResult {
    pub success: bool,
    pub termination: Termination,
    pub detail: String,
    pub steps: Vec<StepRecord>,
    pub drain_events: Vec<OperatorEvent>,
    pub fp_count: BTreeMap<ComponentId, u32>,
    pub fn_count: BTreeMap<ComponentId, u32>,
    pub total_seconds: f64,
    pub llm_calls: u32,
    pub avg_llm_seconds: f64,
    pub deliveries: usize,
    pub sequence: AssemblySequence,
    pub final_world: WorldState,
}

impl SessionResult {
    pub fn total_fp(&self) -> u32 {
        self.fp_count.values().sum()
    }

    pub fn total_fn(&self) -> u32 {
        self.fn_count.values().sum()
    }

    pub fn rejected_attempts(&self) -> usize {
        self.steps
            .iter()
            .map(|s| &s.operator)
            .chain(self.drain_events.iter())
            .filter(|e| e.is_rejection())
            .count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionStatus {
    Running,
    WaitingForOperator,
    Finished,
}

/// Everything a console needs to draw the current state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionView {
    pub status: SessionStatus,
    pub iteration: usize,
    pub belief: BeliefState,
    pub recommendation: Option<ComponentId>,
    pub world: WorldState,
    pub termination: Option<Termination>,
    pub success: Option<bool>,
    pub detail: Option<String>,
}

impl SessionView {
    /// State before the first iteration.
    pub fn initial(catalog: &ComponentCatalog, world: WorldState) -> Self {
        Self {
            status: SessionStatus::Running,
            iteration: 0,
            belief: BeliefState::initial(catalog),
            recommendation: None,
            world,
            termination: None,
            success: None,
            detail: None,
        }
    }
}

pub enum SessionEvent<'a> {
    Waiting,
    Step(&'a StepRecord),
    Finished(&'a SessionResult),
}

pub trait SessionObserver: Send {
    fn notify(&mut self, view: &SessionView, event: SessionEvent<'_>);
}

pub struct SessionBackends {
    pub world: WorldHandle,
    pub detector: Box<dyn Detector>,
    pub planner: Box<dyn Planner>,
    pub robot: Box<dyn RobotDriver>,
    pub operator: Box<dyn OperatorSource>,
}

impl SessionBackends {
    /// Fully simulated backends: noisy oracle, reference planner, in-process
    /// robot and a simulated operator, all sharing one fresh world.
    pub fn simulated(
        config: &SessionConfig,
        noise: NoiseModel,
        policy: OperatorPolicy,
    ) -> Result<Self, OrchestratorError> {
        let world = WorldState::initial(&config.catalog)
            .map_err(|e| OrchestratorError::Config(e.to_string()))?;
        let world = WorldHandle::spawn(world);
        let cycle = CycleTimeModel::for_job_seconds(config.time_model.robot_cycle_seconds);
        Ok(Self {
            detector: Box::new(OracleDetector::new(config.catalog.clone(), noise)),
            planner: Box::new(ReferencePlanner::new(config.catalog.clone())),
            robot: Box::new(InProcessRobot::new(
                RobotSimState::new(cycle),
                world.clone(),
                config.layout.clone(),
                config.catalog.clone(),
            )),
            operator: Box::new(SimOperator::new(policy)),
            world,
        })
    }
}

#[derive(Default)]
pub struct SessionHooks {
    pub observer: Option<Box<dyn SessionObserver>>,
    pub log: Option<SessionLog>,
    pub resume: Option<ResumePoint>,
}

struct LoopState {
    t: usize,
    belief: BeliefState,
    prior: Option<DetectionReport>,
    clock: f64,
    llm_seconds: f64,
    llm_calls: u32,
    fp: BTreeMap<ComponentId, u32>,
    fn_: BTreeMap<ComponentId, u32>,
    marks: Vec<ComponentSet>,
    steps: Vec<StepRecord>,
}

impl LoopState {
    fn fresh(catalog: &ComponentCatalog) -> Self {
        Self {
            t: 0,
            belief: BeliefState::initial(catalog),
            prior: None,
            clock: 0.0,
            llm_seconds: 0.0,
            llm_calls: 0,
            fp: BTreeMap::new(),
            fn_: BTreeMap::new(),
            marks: Vec::new(),
            steps: Vec::new(),
        }
    }

    fn resumed(catalog: &ComponentCatalog, resume: ResumePoint) -> Self {
        let mut st = Self::fresh(catalog);
        for step in resume.steps {
            st.absorb_counts(&step);
            st.t = step.iteration;
            st.belief = step.belief_after.clone();
            st.prior = Some(step.detection.clone());
            st.clock = step.times.clock_s;
            st.marks.push(mark(&step.belief_after));
            st.steps.push(step);
        }
        st
    }

    fn absorb_counts(&mut self, step: &StepRecord) {
        for (id, class) in &step.classification {
            match class {
                DetectionClass::Fp => *self.fp.entry(*id).or_default() += 1,
                DetectionClass::Fn => *self.fn_.entry(*id).or_default() += 1,
                _ => {}
            }
        }
        let llm_calls = step.detection_attempts;
        self.llm_calls += llm_calls;
        self.llm_seconds += step.times.llm_s;
    }
}

fn mark(b: &BeliefState) -> ComponentSet {
    b.det.union(&b.brought).copied().collect()
}

struct Runner<'a> {
    config: &'a SessionConfig,
    b: SessionBackends,
    hooks: SessionHooks,
    rng: ChaCha8Rng,
    st: LoopState,
}

impl Runner<'_> {
    fn view(&self, status: SessionStatus, recommendation: Option<ComponentId>) -> SessionView {
        SessionView {
            status,
            iteration: self.st.t,
            belief: self.st.belief.clone(),
            recommendation,
            world: self.b.world.snapshot(),
            termination: None,
            success: None,
            detail: None,
        }
    }

    fn notify(&mut self, view: &SessionView, event: SessionEvent<'_>) {
        if let Some(obs) = self.hooks.observer.as_mut() {
            obs.notify(view, event);
        }
    }

    fn human_time(&mut self, event: &OperatorEvent) -> f64 {
        if matches!(event, OperatorEvent::NoOp { .. }) {
            0.0
        } else {
            sample_step_time(&self.config.time_model, StepKind::HumanAssemble, &mut self.rng)
        }
    }

    fn deliver(&mut self, plan: &PlanDecision) -> (Option<JobOutcome>, Option<ComponentId>, Option<String>) {
        let Some(c) = plan.next else {
            return (None, None, None);
        };
        let actions = match generate_actions(c, &self.config.layout, &self.config.catalog) {
            Ok(a) => a,
            Err(e) => {
                let outcome = JobOutcome {
                    component: c,
                    actions: 0,
                    acks: 0,
                    elapsed_s: 0.0,
                    status: JobStatus::NotPlannable { reason: e.to_string() },
                };
                return (Some(outcome), None, None);
            }
        };
        let n = actions.len();
        match self.b.robot.send_job(&actions) {
            Ok(report) => {
                if !self.b.robot.shares_world() {
                    self.b.world.with(move |w| {
                        // Mirror the remote delivery into the local ground truth.
                        if w.robot_pick(c).is_ok() {
                            let _ = w.robot_place(c);
                        }
                    });
                }
                let outcome = JobOutcome {
                    component: c,
                    actions: n,
                    acks: report.completed,
                    elapsed_s: report.elapsed_s,
                    status: JobStatus::Completed,
                };
                (Some(outcome), Some(c), None)
            }
            Err(e) => {
                let report = e.report();
                let fatal = e.is_fatal().then(|| format!("robot: {e}"));
                let status = match e {
                    JobError::NackReceived { seq, reason, .. } => JobStatus::Nack { seq, reason },
                    JobError::ConnectionLost { .. } => JobStatus::ConnectionLost,
                    JobError::Timeout { seq, .. } => JobStatus::Timeout { seq },
                };
                let outcome = JobOutcome {
                    component: c,
                    actions: n,
                    acks: report.completed,
                    elapsed_s: report.elapsed_s,
                    status,
                };
                (Some(outcome), None, fatal)
            }
        }
    }

    /// One loop iteration. Returns a termination cause when the session must stop.
    fn iterate(&mut self) -> Result<Option<(Termination, String)>, OrchestratorError> {
        let catalog = &self.config.catalog;
        self.st.t += 1;
        let wall = Instant::now();
        let truth = self.b.world.snapshot();
        let mut scene = snapshot(&truth);
        scene.clock = self.st.clock;

        let (report, attempts) =
            match detect_with_retry(&mut *self.b.detector, &scene, self.st.prior.as_ref(), self.config.detection_retries) {
                Ok(ok) => ok,
                Err((e, attempts)) => {
                    let detail = format!("detection failed after {attempts} attempts: {e}");
                    return Ok(Some((Termination::BackendFailure, detail)));
                }
            };
        let mut llm_s = 0.0;
        for _ in 0..attempts {
            llm_s += sample_step_time(&self.config.time_model, StepKind::LlmCall, &mut self.rng);
        }
        self.st.llm_calls += attempts;

        let classification = classify_detection(&report, &truth.assembled);
        let observed = self.st.belief.observe(report.present());
        let plan = self.b.planner.plan(&observed);
        if self.b.planner.uses_llm() {
            llm_s += sample_step_time(&self.config.time_model, StepKind::LlmCall, &mut self.rng);
            self.st.llm_calls += 1;
        }
        self.st.llm_seconds += llm_s;

        let (job, delivered, fatal) = self.deliver(&plan);
        let robot_s = job.as_ref().map_or(0.0, |j| j.elapsed_s);
        let belief_after = observed.record_delivery(delivered);
        self.st.clock += llm_s + robot_s;
        self.b.world.set_clock(self.st.clock);

        let (operator, human_s) = if fatal.is_some() {
            (
                OperatorEvent::NoOp {
                    reason: "robot unavailable".into(),
                },
                0.0,
            )
        } else {
            self.st.belief = belief_after.clone();
            let v = self.view(SessionStatus::WaitingForOperator, delivered);
            self.notify(&v, SessionEvent::Waiting);
            let ev = self.b.operator.act(&self.b.world, delivered, catalog);
            let h = self.human_time(&ev);
            (ev, h)
        };
        self.st.clock += human_s;
        self.b.world.set_clock(self.st.clock);

        let record = StepRecord {
            iteration: self.st.t,
            detection: report.clone(),
            detection_attempts: attempts,
            classification,
            plan,
            job,
            delivered,
            operator,
            belief_after: belief_after.clone(),
            world_after: self.b.world.snapshot(),
            times: StepTimes {
                llm_s,
                robot_s,
                human_s,
                clock_s: self.st.clock,
                wall_ms: wall.elapsed().as_secs_f64() * 1e3,
            },
        };
        for (id, class) in &record.classification {
            match class {
                DetectionClass::Fp => *self.st.fp.entry(*id).or_default() += 1,
                DetectionClass::Fn => *self.st.fn_.entry(*id).or_default() += 1,
                _ => {}
            }
        }
        if let Some(log) = self.hooks.log.as_mut() {
            log.append_step(&record, catalog)?;
        }
        self.st.belief = belief_after;
        self.st.prior = Some(report);
        self.st.marks.push(mark(&self.st.belief));
        let v = self.view(SessionStatus::Running, None);
        self.notify(&v, SessionEvent::Step(&record));
        self.st.steps.push(record);

        if let Some(detail) = fatal {
            return Ok(Some((Termination::BackendFailure, detail)));
        }
        if !self.st.belief.is_done()
            && detect_deadlock(&self.st.marks, self.config.deadlock_window) == Progress::Deadlock
        {
            let detail = format!(
                "no change in detected or brought components for {} iterations; still available: {}",
                self.config.deadlock_window,
                format_set(&self.st.belief.avail)
            );
            return Ok(Some((Termination::Deadlock, detail)));
        }
        Ok(None)
    }

    /// After the belief runs out, let the operator mount whatever is still
    /// waiting in the delivery zone.
    fn drain(&mut self) -> Vec<OperatorEvent> {
        let mut events = Vec::new();
        for _ in 0..self.config.catalog.len() {
            if self.b.world.with(|w| w.delivery_zone.is_empty()) {
                break;
            }
            let v = self.view(SessionStatus::WaitingForOperator, None);
            self.notify(&v, SessionEvent::Waiting);
            let ev = self.b.operator.act(&self.b.world, None, &self.config.catalog);
            self.st.clock += self.human_time(&ev);
            self.b.world.set_clock(self.st.clock);
            let progressed = ev.assembled().is_some();
            events.push(ev);
            if !progressed {
                break;
            }
        }
        events
    }

    fn run(mut self) -> Result<SessionResult, OrchestratorError> {
        let catalog = self.config.catalog.clone();
        if self.st.t == 0 && self.st.steps.is_empty() {
            // The operator mounts the parts they start with.
            let start = self.b.world.with(|w| w.history.len());
            for _ in 0..start {
                self.st.clock +=
                    sample_step_time(&self.config.time_model, StepKind::HumanAssemble, &mut self.rng);
            }
            self.b.world.set_clock(self.st.clock);
        }

        let stopped = loop {
            if self.st.belief.is_done() {
                break None;
            }
            if self.st.t >= self.config.max_iterations {
                break Some((
                    Termination::MaxIterations,
                    format!("stopped after {} iterations", self.st.t),
                ));
            }
            if let Some(stop) = self.iterate()? {
                break Some(stop);
            }
        };

        let mut drain_events = Vec::new();
        let (termination, detail) = match stopped {
            Some(stop) => stop,
            None => {
                drain_events = self.drain();
                let world = self.b.world.snapshot();
                if world.is_complete(&catalog) {
                    (Termination::Completed, "all components assembled".to_string())
                } else {
                    let missing: ComponentSet =
                        catalog.all_ids().difference(&world.assembled).copied().collect();
                    (
                        Termination::Deadlock,
                        format!(
                            "belief reports everything handled but {} never got assembled",
                            format_set(&missing)
                        ),
                    )
                }
            }
        };

        let final_world = self.b.world.snapshot();
        let success = termination == Termination::Completed && final_world.is_complete(&catalog);
        let deliveries = self.st.steps.iter().filter(|s| s.delivered.is_some()).count();
        let result = SessionResult {
            success,
            termination,
            detail,
            drain_events,
            fp_count: self.st.fp.clone(),
            fn_count: self.st.fn_.clone(),
            total_seconds: self.st.clock,
            llm_calls: self.st.llm_calls,
            avg_llm_seconds: if self.st.llm_calls > 0 {
                self.st.llm_seconds / self.st.llm_calls as f64
            } else {
                0.0
            },
            deliveries,
            sequence: final_world.history.clone(),
            final_world,
            steps: std::mem::take(&mut self.st.steps),
        };
        if let Some(log) = self.hooks.log.as_mut() {
            log.append_finish(&result)?;
        }
        let mut v = self.view(SessionStatus::Finished, None);
        v.termination = Some(result.termination);
        v.success = Some(result.success);
        v.detail = Some(result.detail.clone());
        self.notify(&v, SessionEvent::Finished(&result));
        Ok(result)
    }
}

/// Runs one session to a classified end.
///
/// Backend and robot faults end the session with a termination cause; only
/// an invalid config or an unwritable log is returned as an error.
pub fn run_session(
    config: &SessionConfig,
    backends: SessionBackends,
    mut hooks: SessionHooks,
) -> Result<SessionResult, OrchestratorError> {
    config.validate()?;
    let st = match hooks.resume.take() {
        Some(resume) => {
            if let Some(last) = resume.steps.last() {
                backends.world.replace(last.world_after.clone());
            }
            LoopState::resumed(&config.catalog, resume)
        }
        None => LoopState::fresh(&config.catalog),
    };
    // Offset the time stream on resume so replayed and fresh draws differ.
    let rng = ChaCha8Rng::seed_from_u64(config.seed ^ (st.t as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    Runner {
        config,
        b: backends,
        hooks,
        rng,
        st,
    }
    .run()
}

/// Simulated session with default hooks.
pub fn run_simulated(
    config: &SessionConfig,
    noise: NoiseModel,
    policy: OperatorPolicy,
) -> Result<SessionResult, OrchestratorError> {
    let backends = SessionBackends::simulated(config, noise, policy)?;
    run_session(config, backends, SessionHooks::default())
}

#[cfg(test)]
mod tests;
