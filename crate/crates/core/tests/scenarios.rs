mod common;

use colscan_core::mission::{CompletionReason, MissionEvent};
use colscan_core::report::{read_report, replay, write_report, ReportError};
use colscan_core::sim::SimEvent;
use colscan_core::{
    run_headless, CaptureReason, DamageState, MissionMode, RunLimit, RunReport, TerminationReason,
};

fn run(name: &str) -> RunReport {
    let (scenario, pilot) = common::load(name);
    let params = scenario.params();
    run_headless(&scenario, &pilot, 0, params, RunLimit::UntilDone)
}

fn completion(report: &RunReport) -> Vec<CompletionReason> {
    report
        .events
        .iter()
        .filter_map(|e| match &e.event {
            SimEvent::Mission {
                event: MissionEvent::ScanComplete { reason, .. },
            } => Some(*reason),
            _ => None,
        })
        .collect()
}

#[test]
fn center_completes_full_circle() {
    let report = run("center");
    assert_eq!(report.termination, TerminationReason::AllColumnsInspected);
    assert_eq!(completion(&report), vec![CompletionReason::FullCircle]);
    assert_eq!(report.captures(CaptureReason::ScanStart).count(), 1);
    assert_eq!(report.captures(CaptureReason::Interval).count(), 12);
    assert_eq!(report.captures(CaptureReason::ArcEnd).count(), 0);
    assert_eq!(report.collisions, 0);
    let a = &report.assessments[0];
    assert_eq!(a.fused_state, DamageState::Ds2Severe);
    assert_eq!(a.coverage_fraction, 1.0);
    assert!(!a.coverage_incomplete);
}

#[test]
fn wall_and_corner_end_on_second_obstacle() {
    for name in ["wall", "corner"] {
        let report = run(name);
        assert_eq!(
            completion(&report),
            vec![CompletionReason::SecondArcEnd],
            "{name}"
        );
        assert_eq!(report.captures(CaptureReason::ArcEnd).count(), 2, "{name}");
        assert_eq!(report.collisions, 0, "{name}");
        assert!(report.assessments[0].coverage_incomplete, "{name}");
        assert!(
            report.min_clearance >= 0.35,
            "{name}: {}",
            report.min_clearance
        );
    }
}

#[test]
fn trajectory_is_contiguous_and_follows_the_mission_graph() {
    for name in ["center", "wall", "corner"] {
        let report = run(name);
        assert_eq!(report.trajectory.len() as u64, report.ticks);
        for (i, e) in report.trajectory.iter().enumerate() {
            assert_eq!(e.tick, i as u64);
        }
        for pair in report.trajectory.windows(2) {
            assert!(
                pair[0].mode.can_transition_to(&pair[1].mode),
                "{name}: {:?} -> {:?}",
                pair[0].mode,
                pair[1].mode
            );
        }
        assert_eq!(report.trajectory[0].mode, MissionMode::Manual);
    }
}

#[test]
fn pilot_input_is_dropped_under_autopilot() {
    let (scenario, mut pilot) = common::load("center");
    // A command scheduled mid-scan must not be recorded or change anything.
    pilot.push(colscan_core::PilotEntry {
        tick: 300,
        v_forward: 1.0,
        v_lateral: 0.0,
        yaw_rate: 0.0,
    });
    let params = scenario.params();
    let with_extra = run_headless(&scenario, &pilot, 0, params, RunLimit::UntilDone);
    let baseline = run("center");
    assert_eq!(with_extra.capture_log, baseline.capture_log);
    assert!(with_extra.pilot_inputs.iter().all(|p| p.tick != 300));
}

#[test]
fn report_round_trip_and_replay() {
    let dir = tempfile::tempdir().unwrap();
    for name in ["center", "wall"] {
        let report = run(name);
        let path = dir.path().join(format!("{name}.json"));
        write_report(&report, &path).unwrap();
        let back = read_report(&path).unwrap();
        assert_eq!(
            back.to_canonical_json().unwrap(),
            report.to_canonical_json().unwrap()
        );
        let verdict = replay(&back, Some(&path)).unwrap();
        assert!(verdict.is_match(), "{name}: {:?}", verdict.first_difference);
    }
}

#[test]
fn same_inputs_same_bytes() {
    let a = run("corner").to_canonical_json().unwrap();
    let b = run("corner").to_canonical_json().unwrap();
    assert_eq!(a, b);
}

#[test]
fn tampered_scenario_is_detected() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(common::scenario_path("center")).unwrap();
    let scen_path = dir.path().join("s.json");
    std::fs::write(&scen_path, &text).unwrap();
    let scenario = colscan_core::load_scenario(&scen_path).unwrap();
    let (_, pilot) = common::load("center");
    let report = run_headless(&scenario, &pilot, 0, scenario.params(), RunLimit::Ticks(50));
    std::fs::write(
        &scen_path,
        text.replace("\"height\": 3.0", "\"height\": 3.5"),
    )
    .unwrap();
    assert!(matches!(
        replay(&report, None),
        Err(ReportError::ScenarioChanged { .. })
    ));
}

#[test]
fn non_finite_report_is_refused() {
    let mut report = run("corner");
    report.min_clearance = f64::NAN;
    let dir = tempfile::tempdir().unwrap();
    let err = write_report(&report, dir.path().join("r.json")).unwrap_err();
    assert!(matches!(err, ReportError::NonFinite(_)), "{err}");
}

#[test]
fn malformed_report_names_the_field() {
    let mut value: serde_json::Value =
        serde_json::from_str(&run("corner").to_canonical_json().unwrap()).unwrap();
    value["seed"] = serde_json::json!("zero");
    let err = RunReport::from_json(&value.to_string(), "r.json").unwrap_err();
    match err {
        ReportError::Schema { field, .. } => assert_eq!(field, "seed"),
        other => panic!("{other}"),
    }
}

#[test]
fn tick_budget_stops_the_run() {
    let (scenario, pilot) = common::load("center");
    let mut params = scenario.params();
    params.apply("tick_budget", 100.0).unwrap();
    let report = run_headless(&scenario, &pilot, 0, params, RunLimit::UntilDone);
    assert_eq!(report.termination, TerminationReason::TickBudgetExhausted);
    assert_eq!(report.ticks, 100);
}

#[test]
fn pilot_script_ending_without_detection() {
    let (scenario, _) = common::load("center");
    // Turning away from the column forever: never detects, budget runs out.
    let pilot = vec![colscan_core::PilotEntry {
        tick: 0,
        v_forward: 0.0,
        v_lateral: 0.0,
        yaw_rate: 0.0,
    }];
    let mut params = scenario.params();
    params.apply("tick_budget", 200.0).unwrap();
    let report = run_headless(&scenario, &pilot, 0, params, RunLimit::UntilDone);
    assert_eq!(report.termination, TerminationReason::TickBudgetExhausted);
    assert!(report.capture_log.is_empty());
}
