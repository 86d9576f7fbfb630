use std::time::Duration;

use super::*;
use crate::catalog::set_of;
use crate::detection::{ComponentNoise, DetectionError, DetectionSource, Persistence, Verdict};
use crate::planner::motion::RobotAction;
use crate::sequence::validate_sequence;
use crate::workcell::{ScriptedChoice, SceneSnapshot};

fn config() -> SessionConfig {
    SessionConfig::default_aircraft()
}

/// Truthful detector that flips chosen components on chosen calls.
struct Flipping {
    call: usize,
    flips: Vec<(usize, u32)>,
}

impl Detector for Flipping {
    fn detect(
        &mut self,
        scene: &SceneSnapshot,
        _prior: Option<&DetectionReport>,
    ) -> Result<DetectionReport, DetectionError> {
        self.call += 1;
        let cat = ComponentCatalog::default_aircraft();
        let mut r = DetectionReport::from_present(&cat, &scene.view, DetectionSource::Oracle, scene.clock);
        for (call, id) in &self.flips {
            if *call == self.call {
                let v = r.verdicts.get_mut(&ComponentId(*id)).unwrap();
                *v = Verdict::from_bool(!v.is_present());
            }
        }
        Ok(r)
    }
}

fn with_detector(cfg: &SessionConfig, det: Box<dyn Detector>, policy: OperatorPolicy) -> SessionResult {
    let mut b = SessionBackends::simulated(cfg, NoiseModel::noiseless(), policy).unwrap();
    b.detector = det;
    run_session(cfg, b, SessionHooks::default()).unwrap()
}

fn assert_faithful(r: &SessionResult) {
    let mut brought = ComponentSet::new();
    for (i, s) in r.steps.iter().enumerate() {
        assert_eq!(s.iteration, i + 1);
        let det = s.detection.present();
        brought.extend(s.delivered);
        assert_eq!(s.belief_after.det, det);
        assert_eq!(s.belief_after.brought, brought);
        let expect: ComponentSet = s
            .belief_after
            .avail0
            .iter()
            .filter(|c| !det.contains(c) && !brought.contains(c))
            .copied()
            .collect();
        assert_eq!(s.belief_after.avail, expect);
    }
}

#[test]
fn happy_path() {
    let r = run_simulated(&config(), NoiseModel::noiseless(), OperatorPolicy::compliant()).unwrap();
    assert!(r.success, "{}", r.detail);
    assert_eq!(r.termination, Termination::Completed);
    assert_eq!(r.deliveries, 7);
    assert_eq!(r.sequence.to_string(), "1-2-3-4-5-6-7-8-9");
    assert!(validate_sequence(&r.sequence, &config().catalog).unwrap().is_valid());
    assert_eq!(r.total_fp() + r.total_fn(), 0);
    assert_eq!(r.llm_calls, 7);
    assert!(r.total_seconds > 200.0 && r.total_seconds < 450.0, "{}", r.total_seconds);
    assert_faithful(&r);
}

#[test]
fn sticky_chassis_false_positive_deadlocks() {
    let noise = NoiseModel::noiseless().set(
        7,
        ComponentNoise {
            fp_rate: 1.0,
            fn_rate: 0.0,
            persistence: Persistence::Sticky,
        },
    );
    let r = run_simulated(&config(), noise, OperatorPolicy::compliant()).unwrap();
    assert!(!r.success);
    assert_eq!(r.termination, Termination::Deadlock);
    assert!(r.fp_count[&ComponentId(7)] >= 1);
    assert!(!r.final_world.assembled.contains(&ComponentId(7)));
    assert!(r.rejected_attempts() >= 1);
    assert_faithful(&r);
}

#[test]
fn single_tail_wing_false_negative_recovers() {
    // Tail wing goes in at iteration 3 and is first seen at iteration 4.
    let det = Flipping { call: 0, flips: vec![(4, 5)] };
    let r = with_detector(&config(), Box::new(det), OperatorPolicy::compliant());
    assert!(r.success, "{}", r.detail);
    assert_eq!(r.fn_count.get(&ComponentId(5)), Some(&1));
    assert_eq!(r.total_fp(), 0);
    assert_faithful(&r);
}

#[test]
fn deviation_to_wheels_at_step_five() {
    let policy = OperatorPolicy::deviate(vec![ScriptedChoice {
        step: 5,
        component: ComponentId(8),
    }]);
    let r = run_simulated(&config(), NoiseModel::noiseless(), policy).unwrap();
    assert!(r.success, "{}", r.detail);
    assert_eq!(r.sequence.to_string(), "1-2-3-4-8-5-6-7-9");
    // The robot never fetched component 8.
    assert!(r.steps.iter().all(|s| s.delivered != Some(ComponentId(8))));
    assert_faithful(&r);
}

#[test]
fn infeasible_deviation_is_rejected_and_session_succeeds() {
    let policy = OperatorPolicy::deviate(vec![ScriptedChoice {
        step: 5,
        component: ComponentId(9),
    }]);
    let r = run_simulated(&config(), NoiseModel::noiseless(), policy).unwrap();
    assert!(r.success);
    assert_eq!(r.rejected_attempts(), 1);
}

#[test]
fn detector_outage_ends_with_backend_failure() {
    struct Down;
    impl Detector for Down {
        fn detect(&mut self, _: &SceneSnapshot, _: Option<&DetectionReport>) -> Result<DetectionReport, DetectionError> {
            Err(DetectionError::BackendTimeout)
        }
    }
    let r = with_detector(&config(), Box::new(Down), OperatorPolicy::compliant());
    assert_eq!(r.termination, Termination::BackendFailure);
    assert!(!r.success);
    assert!(r.detail.contains("3 attempts"), "{}", r.detail);
}

#[test]
fn refused_job_is_retried_next_iteration() {
    struct NackOnce {
        inner: InProcessRobot,
        refused: bool,
    }
    impl RobotDriver for NackOnce {
        fn send_job(&mut self, actions: &[RobotAction]) -> Result<JobReport, JobError> {
            if !self.refused {
                self.refused = true;
                return Err(JobError::NackReceived {
                    seq: 1,
                    reason: "busy".into(),
                    report: JobReport::default(),
                });
            }
            self.inner.send_job(actions)
        }
    }
    let cfg = config();
    let mut b = SessionBackends::simulated(&cfg, NoiseModel::noiseless(), OperatorPolicy::compliant()).unwrap();
    b.robot = Box::new(NackOnce {
        inner: InProcessRobot::new(
            RobotSimState::new(CycleTimeModel::default()),
            b.world.clone(),
            cfg.layout.clone(),
            cfg.catalog.clone(),
        ),
        refused: false,
    });
    let r = run_session(&cfg, b, SessionHooks::default()).unwrap();
    assert!(r.success);
    assert_eq!(r.steps[0].delivered, None);
    assert!(matches!(r.steps[0].job.as_ref().unwrap().status, JobStatus::Nack { .. }));
    assert_eq!(r.steps[1].delivered, Some(ComponentId(3)));
    assert_faithful(&r);
}

#[test]
fn idle_operator_deadlocks_then_max_iterations() {
    let cfg = config();
    let mut b = SessionBackends::simulated(&cfg, NoiseModel::noiseless(), OperatorPolicy::compliant()).unwrap();
    let (_tx, console) = ConsoleOperator::channel(Some(Duration::ZERO));
    b.operator = Box::new(console);
    let r = run_session(&cfg, b, SessionHooks::default()).unwrap();
    assert_eq!(r.termination, Termination::Deadlock);
    assert_eq!(r.steps.len(), 1 + DEFAULT_DEADLOCK_WINDOW);

    let mut cfg = config();
    cfg.deadlock_window = 1000;
    cfg.max_iterations = 9;
    let mut b = SessionBackends::simulated(&cfg, NoiseModel::noiseless(), OperatorPolicy::compliant()).unwrap();
    let (_tx, console) = ConsoleOperator::channel(Some(Duration::ZERO));
    b.operator = Box::new(console);
    let r = run_session(&cfg, b, SessionHooks::default()).unwrap();
    assert_eq!(r.termination, Termination::MaxIterations);
    assert_eq!(r.steps.len(), 9);
}

#[test]
fn config_validation() {
    let mut cfg = config();
    cfg.max_iterations = 5;
    assert!(cfg.validate().is_err());
    let mut cfg = config();
    cfg.deadlock_window = 0;
    assert!(cfg.validate().is_err());
}

#[test]
fn deadlock_window_semantics() {
    let a = set_of([1, 2]);
    let b = set_of([1, 2, 3]);
    assert_eq!(detect_deadlock(std::slice::from_ref(&a), 3), Progress::Progress);
    assert_eq!(detect_deadlock(&[a.clone(), b.clone(), b.clone(), b.clone()], 3), Progress::Progress);
    assert_eq!(
        detect_deadlock(&[a.clone(), b.clone(), b.clone(), b.clone(), b.clone()], 3),
        Progress::Deadlock
    );
    let growing: Vec<ComponentSet> = (2..=9).map(|n| set_of(1..=n)).collect();
    assert_eq!(detect_deadlock(&growing, 3), Progress::Progress);
}

#[test]
fn classification() {
    let cat = ComponentCatalog::default_aircraft();
    let truth = set_of([1, 2, 5]);
    let report = DetectionReport::from_present(&cat, &set_of([1, 2, 7]), DetectionSource::Oracle, 0.0);
    let c = classify_detection(&report, &truth);
    assert_eq!(c[&ComponentId(7)], DetectionClass::Fp);
    assert_eq!(c[&ComponentId(5)], DetectionClass::Fn);
    assert_eq!(c[&ComponentId(1)], DetectionClass::Tp);
    assert_eq!(c[&ComponentId(9)], DetectionClass::Tn);
    let same = DetectionReport::from_present(&cat, &truth, DetectionSource::Oracle, 0.0);
    assert!(classify_detection(&same, &truth)
        .values()
        .all(|k| matches!(k, DetectionClass::Tp | DetectionClass::Tn)));
}

#[test]
fn seeded_sessions_repeat() {
    let mut cfg = config();
    cfg.seed = 9;
    let noise = NoiseModel::noiseless().with_seed(4).set(
        5,
        ComponentNoise {
            fp_rate: 0.1,
            fn_rate: 0.3,
            persistence: Persistence::IndependentPerCall,
        },
    );
    let a = run_simulated(&cfg, noise.clone(), OperatorPolicy::seeded_random(3, 0.3)).unwrap();
    let b = run_simulated(&cfg, noise, OperatorPolicy::seeded_random(3, 0.3)).unwrap();
    let strip = |r: &SessionResult| {
        let mut r = r.clone();
        for s in &mut r.steps {
            s.times.wall_ms = 0.0;
        }
        r
    };
    assert_eq!(strip(&a), strip(&b));
}

#[test]
fn log_and_resume() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config();
    let b = SessionBackends::simulated(&cfg, NoiseModel::noiseless(), OperatorPolicy::compliant()).unwrap();
    let hooks = SessionHooks {
        log: Some(SessionLog::open(dir.path()).unwrap()),
        ..Default::default()
    };
    let full = run_session(&cfg, b, hooks).unwrap();
    assert!(full.success);
    let det2 = std::fs::read_to_string(dir.path().join("det_002.txt")).unwrap();
    assert!(det2.starts_with("1 (lower fuselage): YES\n2 (upper fuselage): YES\n3 (motor): YES\n4 (propeller): NO"));
    assert!(matches!(
        ResumePoint::from_dir(dir.path()),
        Err(LogError::AlreadyFinished(_))
    ));

    // Simulate a crash after iteration 3, with a torn fourth line.
    let log_path = dir.path().join("session.jsonl");
    let text = std::fs::read_to_string(&log_path).unwrap();
    let mut kept: String = text.lines().take(3).map(|l| format!("{l}\n")).collect();
    kept.push_str("{\"step\":{\"iter");
    std::fs::write(&log_path, kept).unwrap();

    let resume = ResumePoint::from_dir(dir.path()).unwrap();
    assert_eq!(resume.last_iteration(), 3);
    let b = SessionBackends::simulated(&cfg, NoiseModel::noiseless(), OperatorPolicy::compliant()).unwrap();
    let hooks = SessionHooks {
        log: Some(SessionLog::open(dir.path()).unwrap()),
        resume: Some(resume),
        ..Default::default()
    };
    let resumed = run_session(&cfg, b, hooks).unwrap();
    assert!(resumed.success, "{}", resumed.detail);
    assert_eq!(resumed.sequence, full.sequence);
    assert_eq!(resumed.steps.len(), 7);
    assert_eq!(resumed.deliveries, 7);
    assert_faithful(&resumed);
    let records = log::read_log(dir.path()).unwrap();
    assert_eq!(records.len(), 8);
}

#[test]
fn observer_sees_waits_steps_and_finish() {
    use std::sync::{Arc, Mutex};
    #[derive(Clone, Default)]
    struct Tally(Arc<Mutex<(usize, usize, usize)>>);
    impl SessionObserver for Tally {
        fn notify(&mut self, view: &SessionView, event: SessionEvent<'_>) {
            let mut t = self.0.lock().unwrap();
            match event {
                SessionEvent::Waiting => {
                    assert_eq!(view.status, SessionStatus::WaitingForOperator);
                    t.0 += 1
                }
                SessionEvent::Step(_) => t.1 += 1,
                SessionEvent::Finished(r) => {
                    assert_eq!(view.success, Some(r.success));
                    t.2 += 1
                }
            }
        }
    }
    let cfg = config();
    let tally = Tally::default();
    let b = SessionBackends::simulated(&cfg, NoiseModel::noiseless(), OperatorPolicy::compliant()).unwrap();
    let hooks = SessionHooks {
        observer: Some(Box::new(tally.clone())),
        ..Default::default()
    };
    run_session(&cfg, b, hooks).unwrap();
    assert_eq!(*tally.0.lock().unwrap(), (7, 7, 1));
}

