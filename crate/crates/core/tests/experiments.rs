use std::path::{Path, PathBuf};

use assist_core::eval::{
    compute_pr, load_detection_log, run_and_render, run_experiment1, run_experiment2, run_experiment3, run_pr,
    ExperimentKind, ExperimentSpec,
};

fn data(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data").join(rel)
}

fn spec(name: &str) -> ExperimentSpec {
    ExperimentSpec::from_file(&data(&format!("experiments/{name}.json"))).unwrap()
}

#[test]
fn shipped_specs_parse() {
    for (name, kind) in [
        ("e1", ExperimentKind::E1),
        ("e1_mc", ExperimentKind::E1),
        ("e2", ExperimentKind::E2),
        ("e2_table", ExperimentKind::E2),
        ("e3", ExperimentKind::E3),
        ("pr", ExperimentKind::Pr),
    ] {
        assert_eq!(spec(name).experiment, kind, "{name}");
    }
}

#[test]
fn monte_carlo_success_rate() {
    let r = run_experiment1(&spec("e1_mc")).unwrap();
    println!("success rate {}", r.stats.success_rate);
    assert!((r.stats.success_rate - 0.83).abs() <= 0.04, "{}", r.stats.success_rate);
}

#[test]
fn exhaustive_deviations_all_succeed() {
    let r = run_experiment2(&spec("e2")).unwrap();
    assert_eq!(r.rows.len(), 12);
    assert!(r.rows.iter().all(|row| row.success));
}

#[test]
fn time_calibration() {
    let r = run_experiment3(&spec("e3")).unwrap();
    println!("{:?} {:?} {}", (r.guided.mean, r.guided.std), (r.manual.mean, r.manual.std), r.reduction_pct);
    assert!((263.0..=346.0).contains(&r.guided.mean));
    assert!(r.guided.std < r.manual.std);
    assert!(r.reduction_pct >= 25.0);
}

#[test]
fn table_rows_from_fixture_logs() {
    let r = run_pr(&spec("pr")).unwrap();
    let md = run_and_render(&spec("pr")).unwrap().markdown;
    assert!(md.contains("| wheel | 1.00 | 0.91 |"), "{md}");
    let vild = &r.detectors[1].1;
    assert_eq!(vild.get("motor").unwrap().precision(), None);
    assert_eq!(compute_pr(&load_detection_log(&data("detection_logs/vild.csv")).unwrap()), *vild);
}

#[test]
fn rendered_reports_are_byte_stable() {
    for name in ["e1", "e2", "e3"] {
        let a = run_and_render(&spec(name)).unwrap();
        let b = run_and_render(&spec(name)).unwrap();
        assert_eq!(a, b, "{name}");
    }
}
