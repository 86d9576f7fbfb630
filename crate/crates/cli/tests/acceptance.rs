//! Acceptance criteria, one PASS/FAIL line each. Exits non-zero if any fails.

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use assist_core::belief::BeliefState;
use assist_core::catalog::{ComponentCatalog, ComponentId, ComponentSet};
use assist_core::detection::{estimate_image_tokens, ComponentNoise, Detail, ImageSpec, NoiseModel, PayloadRef, Persistence};
use assist_core::eval::{
    compute_pr, fmt_metric, load_detection_log, run_experiment1, run_experiment2, run_experiment3,
    single_deviation_scripts, DetectionLogRow, ExperimentKind, ExperimentSpec,
};
use assist_core::orchestrator::{run_simulated, RobotDriver, SessionConfig, Termination};
use assist_core::planner::motion::{generate_actions, GripperCommand, MagazineLayout, RobotAction, SpeedClass};
use assist_core::planner::plan_next_reference;
use assist_core::sequence::{validate_sequence, AssemblySequence};
use assist_core::workcell::{CycleTimeModel, OperatorPolicy, RobotSimState, WorldHandle, WorldState};
use assist_robot_link::{decode, encode, serve_simulated_robot, RobotClient, WireFrame};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = fn() -> Result<String, String>;

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn data(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data").join(rel)
}

fn spec(name: &str) -> Result<ExperimentSpec, String> {
    ExperimentSpec::from_file(&data(&format!("experiments/{name}.json"))).map_err(|e| e.to_string())
}

fn cat() -> ComponentCatalog {
    ComponentCatalog::default_aircraft()
}

/// Independent chain check: 1, 2, 3, 4 appear in that relative order and
/// everything else comes after 4, with 9 last among 5..=9.
fn respects_precedence(order: &[u32]) -> bool {
    let pos = |c: u32| order.iter().position(|x| *x == c).unwrap();
    let chain = pos(1) < pos(2) && pos(2) < pos(3) && pos(3) < pos(4);
    let middle = (5..=8).all(|c| pos(c) > pos(4) && pos(c) < pos(9));
    chain && middle
}

fn ac1() -> Result<String, String> {
    let cat = cat();
    for order in ["1-2-3-4-8-5-6-7-9", "1-2-3-4-6-7-8-5-9", "1-2-3-4-8-6-5-7-9"] {
        let seq: AssemblySequence = order.parse().unwrap();
        ensure(validate_sequence(&seq, &cat).unwrap().is_valid(), format!("{order} rejected"))?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut ids: Vec<u32> = (1..=9).collect();
    let (mut invalid, mut checked) = (0, 0);
    for _ in 0..20_000 {
        ids.shuffle(&mut rng);
        let seq = AssemblySequence::from_ids(ids.iter().copied());
        let valid = validate_sequence(&seq, &cat).unwrap().is_valid();
        ensure(valid == respects_precedence(&ids), format!("verdict mismatch on {seq}"))?;
        let pos = |c: u32| ids.iter().position(|x| *x == c).unwrap();
        if !(pos(1) < pos(2) && pos(2) < pos(3) && pos(3) < pos(4)) {
            ensure(!valid, format!("{seq} breaks the 1-2-3-4 chain but validated"))?;
            invalid += 1;
        }
        checked += 1;
    }
    Ok(format!("3 recorded orders valid; {invalid}/{checked} chain-violating permutations invalid"))
}

fn ac2() -> Result<String, String> {
    let cat = cat();
    for seed in 0..100u64 {
        let mut cfg = SessionConfig::default_aircraft();
        cfg.seed = seed;
        let r = run_simulated(&cfg, NoiseModel::noiseless().with_seed(seed), OperatorPolicy::compliant())
            .map_err(|e| e.to_string())?;
        ensure(r.success && r.deliveries == 7, format!("seed {seed}: {:?}, {} deliveries", r.termination, r.deliveries))?;
        ensure(validate_sequence(&r.sequence, &cat).unwrap().is_valid(), format!("seed {seed}: invalid {}", r.sequence))?;
        ensure(r.sequence.len() == 9, format!("seed {seed}: incomplete {}", r.sequence))?;
    }
    Ok("100/100 runs: 7 deliveries, valid complete sequence".into())
}

fn ac3() -> Result<String, String> {
    let scripts = single_deviation_scripts(&cat());
    ensure(scripts.len() == 12, format!("{} scripts enumerated", scripts.len()))?;
    for s in &scripts {
        let step = s[0].step;
        let c = s[0].component.get();
        ensure((5..=8).contains(&step) && (5..=8).contains(&c) && step as u32 != c, format!("unexpected script {s:?}"))?;
    }
    let mut e2 = ExperimentSpec::new(ExperimentKind::E2, 1, 5);
    e2.scripts = Some(scripts);
    let r = run_experiment2(&e2).map_err(|e| e.to_string())?;
    let ok = r.rows.iter().filter(|x| x.success).count();
    ensure(ok == 12, format!("{ok}/12 succeeded"))?;
    let mut table = spec("e2_table")?;
    table.sessions = 1;
    let t = run_experiment2(&table).map_err(|e| e.to_string())?;
    let orders: Vec<&str> = t.rows.iter().map(|x| x.order.as_str()).collect();
    ensure(
        orders == ["1-2-3-4-8-5-6-7-9", "1-2-3-4-6-7-8-5-9", "1-2-3-4-8-6-5-7-9"] && t.rows.iter().all(|x| x.success),
        format!("recorded patterns gave {orders:?}"),
    )?;
    let live = r.rows.iter().filter(|x| x.deviated).count();
    Ok(format!("12/12 scripts succeed ({live} take a magazine part); 3/3 recorded orders reproduced"))
}

fn ac4() -> Result<String, String> {
    let sticky = NoiseModel::noiseless().set(
        7,
        ComponentNoise { fp_rate: 1.0, fn_rate: 0.0, persistence: Persistence::Sticky },
    );
    for seed in 0..100u64 {
        let mut cfg = SessionConfig::default_aircraft();
        cfg.seed = seed;
        let r = run_simulated(&cfg, sticky.clone().with_seed(seed), OperatorPolicy::compliant()).map_err(|e| e.to_string())?;
        ensure(
            r.termination == Termination::Deadlock && !r.success && r.fp_count.get(&ComponentId(7)).copied().unwrap_or(0) >= 1,
            format!("sticky seed {seed}: {:?}", r.termination),
        )?;
    }
    let transient = |fp, fn_| ComponentNoise { fp_rate: fp, fn_rate: fn_, persistence: Persistence::IndependentPerCall };
    let mut noisy = NoiseModel::noiseless()
        .set(5, transient(0.1, 0.3))
        .set(4, transient(0.0, 0.3))
        .set(8, transient(0.0, 0.3));
    noisy.max_transient_errors = Some(2);
    let mut with_errors = 0;
    for seed in 0..100u64 {
        let mut cfg = SessionConfig::default_aircraft();
        cfg.seed = seed;
        let r = run_simulated(&cfg, noisy.clone().with_seed(seed), OperatorPolicy::compliant()).map_err(|e| e.to_string())?;
        ensure(r.success, format!("transient seed {seed}: {:?} {}", r.termination, r.detail))?;
        ensure(r.total_fp() + r.total_fn() <= 2, "transient cap exceeded")?;
        if r.total_fp() + r.total_fn() > 0 {
            with_errors += 1;
        }
    }
    ensure(with_errors >= 50, format!("only {with_errors} sessions saw an error"))?;
    Ok(format!("sticky chassis: 100/100 deadlock; transient (<=2): 100/100 success, {with_errors} with errors"))
}

fn ac5() -> Result<String, String> {
    let s = spec("e1_mc")?;
    ensure(s.sessions == 1000, "spec must run 1000 sessions")?;
    let r = run_experiment1(&s).map_err(|e| e.to_string())?;
    let rate = r.stats.success_rate;
    ensure((rate - 0.83).abs() <= 0.04, format!("success rate {rate:.3}"))?;
    Ok(format!("success rate {rate:.3} over 1000 sessions (target 0.83 +/- 0.04)"))
}

fn ac6() -> Result<String, String> {
    let img = |w, h, detail| ImageSpec::new(w, h, detail, PayloadRef::Symbolic("x".into())).unwrap();
    let high = estimate_image_tokens(&img(680, 480, Detail::High));
    ensure(high == 425, format!("680x480 high = {high}"))?;
    for (w, h) in [(680, 480), (768, 2048), (1, 1), (4096, 4096), (512, 512)] {
        let low = estimate_image_tokens(&img(w, h, Detail::Low));
        ensure(low == 85, format!("{w}x{h} low = {low}"))?;
    }
    Ok("680x480 high = 425; low = 85 for all sizes tried".into())
}

fn brute_force(rows: &[DetectionLogRow]) -> BTreeMap<String, [u32; 4]> {
    let mut names: Vec<&str> = rows.iter().map(|r| r.component.as_str()).collect();
    names.sort();
    names.dedup();
    names
        .into_iter()
        .map(|n| {
            let count = |gt: bool, pred: bool| {
                rows.iter()
                    .filter(|r| r.component == n && r.ground_truth == gt && r.predicted == pred)
                    .count() as u32
            };
            (n.to_string(), [count(true, true), count(false, true), count(true, false), count(false, false)])
        })
        .collect()
}

fn ac7() -> Result<String, String> {
    let load = |f: &str| load_detection_log(&data(&format!("detection_logs/{f}"))).map_err(|e| e.to_string());
    let detgpt = compute_pr(&load("detgpt_v.csv")?);
    let wheel = detgpt.get("wheel").ok_or("no wheel row")?;
    let (p, r) = (fmt_metric(wheel.precision()), fmt_metric(wheel.recall()));
    ensure(p == "1.00" && r == "0.91", format!("DetGPT-V wheel P={p} R={r}"))?;
    let vild = compute_pr(&load("vild.csv")?);
    let motor = vild.get("motor").ok_or("no motor row")?;
    let (mp, mr) = (fmt_metric(motor.precision()), fmt_metric(motor.recall()));
    ensure(mp == "N/A" && mr == "0.00", format!("ViLD motor P={mp} R={mr}"))?;

    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let names = ["fuselage", "motor", "tail wing", "wheel", "wing"];
    for i in 0..50 {
        let n = rng.random_range(0..300);
        let rows: Vec<DetectionLogRow> = (0..n)
            .map(|k| DetectionLogRow {
                test_id: (k % 12 + 1).to_string(),
                component: names[rng.random_range(0..names.len())].to_string(),
                ground_truth: rng.random(),
                predicted: rng.random(),
            })
            .collect();
        let got = compute_pr(&rows);
        let want = brute_force(&rows);
        ensure(got.components.len() == want.len(), format!("log {i}: component sets differ"))?;
        for (name, [tp, fp, fn_, tn]) in want {
            let m = got.get(&name).ok_or(format!("log {i}: missing {name}"))?;
            ensure([m.tp, m.fp, m.fn_, m.tn] == [tp, fp, fn_, tn], format!("log {i}: {name} counts differ"))?;
            let p = (tp + fp > 0).then(|| tp as f64 / (tp + fp) as f64);
            let r = (tp + fn_ > 0).then(|| tp as f64 / (tp + fn_) as f64);
            ensure(m.precision() == p && m.recall() == r, format!("log {i}: {name} ratios differ"))?;
        }
    }
    Ok("wheel P=1.00 R=0.91; motor P=N/A R=0.00; 50/50 random logs match recount".into())
}

fn all_subsets(n: u32) -> Vec<ComponentSet> {
    (0u32..(1 << n))
        .map(|mask| (0..n).filter(|b| mask & (1 << b) != 0).map(|b| ComponentId(b + 1)).collect())
        .collect()
}

fn ac8() -> Result<String, String> {
    let cat = cat();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let (mut steps, mut sessions) = (0usize, 0u64);
    while steps < 10_000 {
        let mut noise = NoiseModel::noiseless().with_seed(rng.random());
        for id in 3..=9 {
            if rng.random_bool(0.4) {
                let persistence = if rng.random_bool(0.1) { Persistence::Sticky } else { Persistence::IndependentPerCall };
                noise = noise.set(
                    id,
                    ComponentNoise { fp_rate: rng.random_range(0.0..0.3), fn_rate: rng.random_range(0.0..0.3), persistence },
                );
            }
        }
        let mut cfg = SessionConfig::default_aircraft();
        cfg.seed = rng.random();
        let r = run_simulated(&cfg, noise, OperatorPolicy::seeded_random(rng.random(), 0.3)).map_err(|e| e.to_string())?;
        let avail0 = cat.all_ids();
        let mut brought_prev = ComponentSet::new();
        for s in &r.steps {
            let bring: ComponentSet = s.delivered.into_iter().collect();
            let brought: ComponentSet = bring.union(&brought_prev).copied().collect();
            let det = s.detection.present();
            let seen: ComponentSet = det.union(&brought).copied().collect();
            let avail: ComponentSet = avail0.difference(&seen).copied().collect();
            ensure(s.belief_after.brought == brought, format!("session {sessions} step {}: brought", s.iteration))?;
            ensure(s.belief_after.avail == avail, format!("session {sessions} step {}: avail", s.iteration))?;
            ensure(s.belief_after.det == det, format!("session {sessions} step {}: det", s.iteration))?;
            if let Some(c) = s.plan.next {
                ensure(!brought_prev.contains(&c), format!("session {sessions}: {c} delivered twice"))?;
            }
            brought_prev = brought;
            steps += 1;
        }
        sessions += 1;
    }

    // Exhaustive planner safety over every (det, brought) pair.
    let subsets = all_subsets(9);
    let mut states = 0u64;
    for det in &subsets {
        for brought in &subsets {
            let belief = BeliefState::with_sets(det.clone(), brought.clone(), cat.all_ids());
            if let Some(c) = plan_next_reference(&belief, &cat).next {
                ensure(cat.prerequisites(c).is_subset(det), format!("picked {c} with det {det:?}"))?;
                ensure(belief.avail.contains(&c) && cat.spec(c).robot_deliverable, format!("picked unavailable {c}"))?;
            }
            states += 1;
        }
    }
    Ok(format!("{steps} steps over {sessions} sessions, 0 violations; {states} belief states, planner safe"))
}

fn ac9() -> Result<String, String> {
    let frames = vec![
        WireFrame::Hello { seq: 1 },
        WireFrame::MoveTo { seq: u64::MAX, position: [0.4, -0.3, 0.05], orientation: [0.0, 1.0, 0.0, 0.0], speed_class: SpeedClass::Transit },
        WireFrame::SetGripper { seq: 3, gripper: GripperCommand::Close },
        WireFrame::Ack { seq: 4, elapsed_s: 1.25 },
        WireFrame::Nack { seq: 5, reason: "empty_slot".into() },
        WireFrame::Status { position: [0.1, 0.2, 0.3], orientation: [1.0, 0.0, 0.0, 0.0], gripper: GripperCommand::Open, held: Some(ComponentId(3)) },
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut all = frames.clone();
    for i in 0..1000u64 {
        let v = |r: &mut ChaCha8Rng| r.random_range(-10.0..10.0);
        all.push(WireFrame::MoveTo {
            seq: i,
            position: [v(&mut rng), v(&mut rng), v(&mut rng)],
            orientation: [v(&mut rng), v(&mut rng), v(&mut rng), v(&mut rng)],
            speed_class: SpeedClass::Approach,
        });
        all.push(WireFrame::Ack { seq: rng.random(), elapsed_s: rng.random_range(0.0..100.0) });
    }
    for f in &all {
        let back = decode(&encode(f)).map_err(|e| e.to_string())?;
        ensure(&back == f, format!("round trip changed {f:?} into {back:?}"))?;
    }

    let cat = cat();
    let layout = MagazineLayout::default_layout();
    let world = WorldHandle::spawn(WorldState::initial(&cat).unwrap());
    let server = serve_simulated_robot("127.0.0.1:0", world.clone(), RobotSimState::new(CycleTimeModel::default()), layout.clone(), cat.clone())
        .map_err(|e| e.to_string())?;
    let mut client = RobotClient::connect(&server.local_addr().to_string(), Duration::from_secs(5))
        .map_err(|e| e.to_string())?;
    let report = client
        .send_job(&generate_actions(ComponentId(6), &layout, &cat).unwrap())
        .map_err(|e| e.to_string())?;
    let w = world.snapshot();
    ensure(
        report.completed == 8 && !w.magazine.contains(&ComponentId(6)) && w.delivery_zone == vec![ComponentId(6)],
        format!("pick-place: {} acks, delivery {:?}", report.completed, w.delivery_zone),
    )?;

    let ids: Vec<ComponentId> = cat.deliverable_ids().into_iter().collect();
    for job in 0..1000 {
        let c = ids[rng.random_range(0..ids.len())];
        let mut actions = generate_actions(c, &layout, &cat).unwrap();
        match rng.random_range(0..3) {
            0 => actions.truncate(rng.random_range(1..8)),
            1 => {
                if let RobotAction::MoveTo { pose, .. } = &mut actions[rng.random_range(0..8)] {
                    pose.position[1] += 0.005;
                }
            }
            _ => {}
        }
        let _ = client.send_job(&actions);
        let held = server.sim_state().held;
        let w = world.snapshot();
        ensure(w.in_gripper == held && w.conservation_holds(&cat), format!("job {job}: conservation broken"))?;
        if let Some(h) = held {
            let unload = generate_actions(h, &layout, &cat).unwrap().split_off(4);
            client.send_job(&unload).map_err(|e| e.to_string())?;
        }
        if world.snapshot().magazine.is_empty() {
            world.replace(WorldState::initial(&cat).unwrap());
        }
        ensure(world.snapshot().conservation_holds(&cat), format!("job {job}: conservation broken after unload"))?;
    }
    Ok(format!("{} frames round-trip; 8/8 acks over TCP; conservation over 1000 jobs", all.len()))
}

fn ac10() -> Result<String, String> {
    let s = spec("e3")?;
    ensure(s.sessions == 10, "spec must run 10 sessions per group")?;
    let r = run_experiment3(&s).map_err(|e| e.to_string())?;
    let (g, m) = (&r.guided, &r.manual);
    ensure((263.0..=346.0).contains(&g.mean), format!("guided mean {:.1}", g.mean))?;
    ensure(g.std < m.std, format!("guided sd {:.1} >= manual sd {:.1}", g.std, m.std))?;
    ensure(r.reduction_pct >= 25.0, format!("reduction {:.1}%", r.reduction_pct))?;
    let md = r.render().markdown;
    ensure(md.to_lowercase().contains("calibration"), "report not labeled as calibration")?;
    Ok(format!(
        "guided {:.1} s (sd {:.1}), manual {:.1} s (sd {:.1}), reduction {:.1}%",
        g.mean, g.std, m.mean, m.std, r.reduction_pct
    ))
}

fn main() -> ExitCode {
    let criteria: [(&str, &str, Check, Duration); 10] = [
        ("AC1", "sequence semantics", ac1, Duration::from_secs(1)),
        ("AC2", "happy path", ac2, Duration::from_secs(5)),
        ("AC3", "deviation recovery", ac3, Duration::from_secs(10)),
        ("AC4", "deadlock and transient noise", ac4, Duration::from_secs(10)),
        ("AC5", "success-rate calibration", ac5, Duration::from_secs(60)),
        ("AC6", "token accounting", ac6, Duration::from_secs(1)),
        ("AC7", "metrics oracle", ac7, Duration::from_secs(5)),
        ("AC8", "loop faithfulness", ac8, Duration::from_secs(60)),
        ("AC9", "wire protocol", ac9, Duration::from_secs(30)),
        ("AC10", "time calibration", ac10, Duration::from_secs(10)),
    ];
    let mut failures = 0;
    for (id, name, check, budget) in criteria {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        let took = start.elapsed();
        let outcome = match outcome {
            Ok(msg) if took > budget => Err(format!("{msg}; over time budget {budget:?}")),
            other => other,
        };
        match outcome {
            Ok(msg) => println!("{id} PASS {name}: {msg} ({:.2} s)", took.as_secs_f64()),
            Err(msg) => {
                failures += 1;
                println!("{id} FAIL {name}: {msg} ({:.2} s)", took.as_secs_f64());
            }
        }
    }
    println!("{} of 10 acceptance criteria passed", 10 - failures);
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
