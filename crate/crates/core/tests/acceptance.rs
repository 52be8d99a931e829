//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fail.

mod common;

use colscan_core::fusion::{figure5_check, fuse, DamageReport, DamageState};
use colscan_core::geometry::Vec2;
use colscan_core::kinematics::{MavPose, VelocityCommand};
use colscan_core::mission::{CaptureRecord, CompletionReason, MissionEvent};
use colscan_core::perception::{detect_damage, DamageDetection, DetectorConfig, NoiseParams};
use colscan_core::report::replay;
use colscan_core::scenario::parse_scenario;
use colscan_core::sensors::{camera_capture, BBox, ImageObservation, VisiblePatch};
use colscan_core::sim::SimEvent;
use colscan_core::{
    run_headless, CaptureReason, DamageKind, MissionMode, RunLimit, RunReport, Simulation,
    TerminationReason,
};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::time::{Duration, Instant};

const GAP_TOL_DEG: f64 = 0.75;
const ARC_TOL_DEG: f64 = 5.0;
const AREA_THRESHOLD: f64 = 0.10;
const ORBIT_TOL: f64 = 0.01;
const SAFETY_MIN: f64 = 0.35;
const RUNTIME_LIMIT: Duration = Duration::from_secs(2);
const MISS_RATE: f64 = 0.3;
const DETECT_FREQ_TOL: f64 = 0.01;

type Outcome = Result<String, String>;
type Check = fn() -> Outcome;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn run(name: &str) -> (RunReport, Duration) {
    let (scenario, pilot) = common::load(name);
    let params = scenario.params();
    let started = Instant::now();
    let report = run_headless(&scenario, &pilot, 0, params, RunLimit::UntilDone);
    (report, started.elapsed())
}

fn mission_events(report: &RunReport) -> impl Iterator<Item = (u64, &MissionEvent)> {
    report.events.iter().filter_map(|e| match &e.event {
        SimEvent::Mission { event } => Some((e.tick, event)),
        _ => None,
    })
}

fn orbit(report: &RunReport) -> Option<(Vec2, f64)> {
    mission_events(report).find_map(|(_, e)| match e {
        MissionEvent::OrbitPlanned { center, radius, .. } => Some((*center, *radius)),
        _ => None,
    })
}

fn completion(report: &RunReport) -> Vec<CompletionReason> {
    mission_events(report)
        .filter_map(|(_, e)| match e {
            MissionEvent::ScanComplete { reason, .. } => Some(*reason),
            _ => None,
        })
        .collect()
}

fn angle_gap(a: f64, b: f64) -> f64 {
    let d = (b - a).rem_euclid(360.0);
    d.min(360.0 - d)
}

fn criterion_1() -> Outcome {
    let (report, elapsed) = run("center");
    ensure(
        completion(&report) == [CompletionReason::FullCircle],
        || format!("completion {:?}", completion(&report)),
    )?;
    let starts = report.captures(CaptureReason::ScanStart).count();
    let intervals: Vec<&CaptureRecord> = report.captures(CaptureReason::Interval).collect();
    ensure(starts == 1 && intervals.len() == 12, || {
        format!("{starts} ScanStart, {} Interval captures", intervals.len())
    })?;
    let worst = intervals
        .windows(2)
        .map(|w| (angle_gap(w[0].azimuth_deg, w[1].azimuth_deg) - 30.0).abs())
        .fold(0.0, f64::max);
    ensure(worst <= GAP_TOL_DEG, || {
        format!("interval gap off by {worst:.3} deg")
    })?;
    ensure(elapsed < RUNTIME_LIMIT, || format!("runtime {elapsed:?}"))?;
    Ok(format!(
        "13 captures, max gap error {worst:.3} deg, runtime {:.0} ms",
        elapsed.as_secs_f64() * 1e3
    ))
}

fn criterion_2() -> Outcome {
    let mut notes = Vec::new();
    for name in ["wall", "corner"] {
        let (report, _) = run(name);
        let (scenario, _) = common::load(name);
        let params = scenario.params();
        ensure(
            completion(&report) == [CompletionReason::SecondArcEnd],
            || format!("{name}: completion {:?}", completion(&report)),
        )?;
        let ends = report.captures(CaptureReason::ArcEnd).count();
        ensure(ends == 2, || format!("{name}: {ends} ArcEnd captures"))?;
        let (center, radius) = orbit(&report).ok_or_else(|| format!("{name}: no orbit"))?;
        let start = report
            .captures(CaptureReason::ScanStart)
            .next()
            .ok_or_else(|| format!("{name}: no ScanStart"))?
            .azimuth_deg;
        let (ccw, cw) = common::reachable_arc(
            &scenario.world,
            center,
            radius,
            start,
            params.mission.obstacle_stop_distance,
            params.sensors.ultrasound_cone_half_angle_deg.to_radians(),
            params.sensors.ultrasound_max_range,
            0.1,
        );
        let swept = report.capture_log.iter().map(|c| c.swept_deg);
        let max = swept.clone().fold(f64::NEG_INFINITY, f64::max);
        let min = swept.fold(f64::INFINITY, f64::min);
        let total = max - min;
        let expected = ccw + cw;
        ensure((total - expected).abs() <= ARC_TOL_DEG, || {
            format!("{name}: swept {total:.2} deg, oracle {expected:.2} deg")
        })?;
        notes.push(format!("{name} {total:.1}/{expected:.1} deg"));
    }
    Ok(notes.join(", "))
}

fn criterion_3() -> Outcome {
    let mut notes = Vec::new();
    for name in ["center", "wall", "corner"] {
        let (report, _) = run(name);
        let (scenario, _) = common::load(name);
        let cfg = scenario.params().sensors;
        let target = mission_events(&report)
            .find_map(|(_, e)| match e {
                MissionEvent::TargetSelected { column_id, .. } => Some(column_id.clone()),
                _ => None,
            })
            .ok_or_else(|| format!("{name}: no target"))?;
        let tick = mission_events(&report)
            .find_map(|(t, e)| match e {
                MissionEvent::ModeSwitch {
                    from: MissionMode::Approach,
                    to: MissionMode::ScanInit,
                    ..
                } => Some(t),
                _ => None,
            })
            .ok_or_else(|| format!("{name}: no Approach to ScanInit"))?;
        let area = |t: u64| {
            let pose = report.trajectory[t as usize].pose;
            camera_capture(&scenario.world, &pose, t, &cfg)
                .column_box(&target)
                .map_or(0.0, |b| b.area_fraction)
        };
        let (now, before) = (area(tick), area(tick - 1));
        ensure(now >= AREA_THRESHOLD && before < AREA_THRESHOLD, || {
            format!("{name}: area {before:.4} then {now:.4} at tick {tick}")
        })?;
        notes.push(format!("{name} {before:.4}->{now:.4}"));
    }
    Ok(notes.join(", "))
}

fn criterion_4() -> Outcome {
    let mut worst = 0.0f64;
    for name in ["center", "wall", "corner"] {
        let (report, _) = run(name);
        let (center, radius) = orbit(&report).ok_or_else(|| format!("{name}: no orbit"))?;
        let mut n = 0;
        for e in &report.trajectory {
            if matches!(e.mode, MissionMode::Scanning { .. }) {
                let err = (common::dist(e.pose.position, center) - radius).abs() / radius;
                worst = worst.max(err);
                n += 1;
            }
        }
        ensure(n > 0, || format!("{name}: never scanned"))?;
    }
    ensure(worst <= ORBIT_TOL, || {
        format!("radial error {:.3}% of radius", worst * 100.0)
    })?;
    Ok(format!("max radial error {:.4}% of radius", worst * 100.0))
}

fn criterion_5() -> Outcome {
    let mut notes = Vec::new();
    for name in ["center", "wall", "corner"] {
        let (report, _) = run(name);
        let (scenario, _) = common::load(name);
        let oracle = report
            .trajectory
            .iter()
            .map(|e| common::clearance(&scenario.world, e.pose.position, None))
            .fold(f64::INFINITY, f64::min);
        ensure(report.collisions == 0, || {
            format!("{name}: {} collisions", report.collisions)
        })?;
        ensure(
            oracle >= SAFETY_MIN && report.min_clearance >= SAFETY_MIN,
            || {
                format!(
                    "{name}: clearance {oracle:.3} m (reported {:.3})",
                    report.min_clearance
                )
            },
        )?;
        notes.push(format!("{name} {oracle:.3} m"));
    }
    Ok(notes.join(", "))
}

fn criterion_6() -> Outcome {
    let (report, _) = run("center");
    let (scenario, _) = common::load("center");
    let params = scenario.params();
    let a = report.assessments.first().ok_or("no assessment")?;
    let col = &scenario.world.columns[0];
    // Azimuth 0 looks at the undamaged side.
    let eye = col.center + Vec2::new(3.0, 0.0);
    let pose = MavPose::new(eye.x, eye.y, std::f64::consts::PI);
    let detector = DetectorConfig {
        noise: NoiseParams::default(),
        seed: 0,
    };
    let check = figure5_check(
        &scenario.world,
        &pose,
        &params.sensors,
        &detector,
        &a.reports,
    )
    .map_err(|e| e.to_string())?;
    ensure(check.single_view_state == DamageState::Ds0None, || {
        format!("single view {:?}", check.single_view_state)
    })?;
    ensure(
        check.fused_state == DamageState::Ds2Severe && a.fused_state == DamageState::Ds2Severe,
        || format!("fused {:?}", a.fused_state),
    )?;
    ensure(a.coverage_fraction == 1.0, || {
        format!("coverage {}", a.coverage_fraction)
    })?;
    Ok("single view DS0_None, fused DS2_Severe, coverage 1.0".into())
}

fn level_of(kind: DamageKind) -> u8 {
    match kind {
        DamageKind::Spalling => 1,
        DamageKind::RebarExposure => 2,
    }
}

fn state_rank(s: DamageState) -> u8 {
    match s {
        DamageState::Ds0None => 0,
        DamageState::Ds1Light => 1,
        DamageState::Ds2Severe => 2,
    }
}

fn random_report(rng: &mut ChaCha8Rng, tick: u64) -> DamageReport {
    let n = rng.gen_range(0..4);
    let detections = (0..n)
        .map(|_| DamageDetection {
            kind: if rng.gen() {
                DamageKind::Spalling
            } else {
                DamageKind::RebarExposure
            },
            region: BBox {
                x_min: 0.1,
                y_min: 0.1,
                x_max: 0.3,
                y_max: 0.3,
            },
            confidence: rng.gen(),
            source_patch: None,
        })
        .collect();
    DamageReport::new(
        CaptureRecord {
            column_id: "C1".into(),
            tick,
            pose: MavPose::new(1.0, 1.0, 0.0),
            azimuth_deg: 0.0,
            swept_deg: 0.0,
            reason: CaptureReason::Interval,
        },
        detections,
    )
}

fn criterion_7() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for set in 0..1000 {
        let n = rng.gen_range(1..16);
        let reports: Vec<DamageReport> = (0..n).map(|t| random_report(&mut rng, t)).collect();
        let brute = reports
            .iter()
            .flat_map(|r| r.detections.iter().map(|d| level_of(d.kind)))
            .max()
            .unwrap_or(0);
        let fused = fuse("C1", reports.clone(), 1.0)
            .map_err(|e| e.to_string())?
            .fused_state;
        ensure(state_rank(fused) == brute, || {
            format!("set {set}: fused {fused:?}, max {brute}")
        })?;
        let mut shuffled = reports.clone();
        shuffled.shuffle(&mut rng);
        let again = fuse("C1", shuffled, 1.0)
            .map_err(|e| e.to_string())?
            .fused_state;
        ensure(again == fused, || {
            format!("set {set}: order changed verdict")
        })?;
        let mut more = reports;
        more.push(random_report(&mut rng, 100));
        let after = fuse("C1", more, 1.0)
            .map_err(|e| e.to_string())?
            .fused_state;
        ensure(after >= fused, || {
            format!("set {set}: append lowered verdict")
        })?;
    }
    Ok("1000 sets: max, permutation-invariant, monotone".into())
}

struct RandomPatch {
    start: f64,
    width: f64,
    kind: DamageKind,
}

fn random_scenario(rng: &mut ChaCha8Rng, index: usize) -> (String, Vec<RandomPatch>) {
    let r: f64 = rng.gen_range(0.2..0.45);
    let layout = index % 3;
    let (cx, cy, attached, az_lo, az_hi) = match layout {
        0 => (
            8.0 + rng.gen_range(-1.0..1.0),
            8.0 + rng.gen_range(-1.0..1.0),
            false,
            0.0,
            360.0,
        ),
        1 => (rng.gen_range(6.5..9.5), r, true, 20.0, 160.0),
        _ => (r, r, true, 20.0, 70.0),
    };
    let n_patches = if index % 5 == 4 {
        0
    } else {
        rng.gen_range(1..4)
    };
    let patches: Vec<RandomPatch> = (0..n_patches)
        .map(|_| RandomPatch {
            start: rng.gen_range(0.0..360.0),
            width: rng.gen_range(10.0..90.0),
            kind: if rng.gen() {
                DamageKind::Spalling
            } else {
                DamageKind::RebarExposure
            },
        })
        .collect();
    let (mx, my, heading) = loop {
        let az: f64 = rng.gen_range(az_lo..az_hi);
        let d: f64 = rng.gen_range(6.0..7.5);
        let (x, y) = (
            cx + d * az.to_radians().cos(),
            cy + d * az.to_radians().sin(),
        );
        if (0.5..15.5).contains(&x) && (0.5..15.5).contains(&y) {
            break (x, y, az + 180.0);
        }
    };
    let damage: Vec<String> = patches
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let kind = match p.kind {
                DamageKind::Spalling => "spalling",
                DamageKind::RebarExposure => "rebar_exposure",
            };
            format!(
                r#"{{"id": "p{i}", "kind": "{kind}", "az_start_deg": {}, "az_end_deg": {}, "z_low": 0.4, "z_high": 2.2}}"#,
                p.start,
                (p.start + p.width) % 360.0
            )
        })
        .collect();
    let text = format!(
        r#"{{"name": "random-{index}", "bounds": [16.0, 16.0], "walls": [], "obstacles": [],
  "columns": [{{"id": "C1", "cx": {cx}, "cy": {cy}, "radius": {r}, "height": 3.0, "attached": {attached},
    "damage": [{}]}}],
  "mav": {{"x": {mx}, "y": {my}, "heading_deg": {heading}}}, "params": {{}}}}"#,
        damage.join(", ")
    );
    (text, patches)
}

fn in_patch(az: f64, p: &RandomPatch, margin: f64) -> bool {
    let rel = (az - (p.start - margin)).rem_euclid(360.0);
    rel <= p.width + 2.0 * margin && p.width + 2.0 * margin > 0.0
}

fn criterion_8() -> Outcome {
    const STEP: f64 = 0.5;
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut damaged = 0;
    let mut partial = 0;
    for index in 0..50 {
        let (text, patches) = random_scenario(&mut rng, index);
        let scenario =
            parse_scenario(&text, &format!("random-{index}")).map_err(|e| e.to_string())?;
        let params = scenario.params();
        let report = run_headless(&scenario, &[], index as u64, params, RunLimit::UntilDone);
        let a = report
            .assessments
            .first()
            .ok_or_else(|| format!("scenario {index}: no assessment ({:?})", report.termination))?;

        let mut covered = vec![false; (360.0 / STEP) as usize];
        for c in &report.capture_log {
            for (k, v) in common::visible_samples(&scenario.world, 0, c.pose.position, STEP)
                .into_iter()
                .enumerate()
            {
                covered[k] |= v;
            }
        }
        let covered_az: Vec<f64> = covered
            .iter()
            .enumerate()
            .filter(|(_, v)| **v)
            .map(|(k, _)| k as f64 * STEP)
            .collect();
        let level = |margin: f64| {
            patches
                .iter()
                .filter(|p| covered_az.iter().any(|az| in_patch(*az, p, margin)))
                .map(|p| level_of(p.kind))
                .max()
                .unwrap_or(0)
        };
        // Strictly inside by a degree versus touching within a degree and a
        // half: the sampled oracle cannot resolve anything finer.
        let (sure, possible) = (level(-1.0), level(1.5));
        let truth_max = patches.iter().map(|p| level_of(p.kind)).max().unwrap_or(0);
        let fused = state_rank(a.fused_state);
        ensure(fused >= sure && fused <= possible, || {
            format!("scenario {index}: fused {fused}, covered ground truth {sure}..{possible}")
        })?;
        ensure(fused <= truth_max, || {
            format!("scenario {index}: fused {fused} exceeds truth {truth_max}")
        })?;
        if patches.is_empty() {
            ensure(fused == 0, || {
                format!("scenario {index}: damage reported with no patches")
            })?;
        }
        if fused > 0 {
            damaged += 1;
        }
        if a.coverage_incomplete {
            partial += 1;
        }
    }
    Ok(format!(
        "50 scenarios ({damaged} damaged, {partial} partial coverage)"
    ))
}

fn criterion_9() -> Outcome {
    let config = DetectorConfig {
        noise: NoiseParams {
            miss_rate: MISS_RATE,
            false_positive_rate: 0.0,
            jitter_sigma: 0.0,
        },
        seed: 9,
    };
    let patch = VisiblePatch {
        column_id: "C1".into(),
        patch_id: "p".into(),
        kind: DamageKind::Spalling,
        bbox: BBox {
            x_min: 0.4,
            y_min: 0.3,
            x_max: 0.6,
            y_max: 0.7,
        },
    };
    let n = 10_000;
    let detected = (0..n)
        .filter(|&tick| {
            let obs = ImageObservation {
                pose: MavPose::new(0.0, 0.0, 0.0),
                tick,
                column_boxes: vec![],
                visible_patches: vec![patch.clone()],
            };
            !detect_damage(&obs, &config).is_empty()
        })
        .count();
    let freq = detected as f64 / n as f64;
    ensure((freq - (1.0 - MISS_RATE)).abs() <= DETECT_FREQ_TOL, || {
        format!("frequency {freq:.4}")
    })?;
    Ok(format!("detection frequency {freq:.4}"))
}

fn criterion_10() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    for name in ["center", "wall", "corner"] {
        let (a, _) = run(name);
        let (b, _) = run(name);
        let (ta, tb) = (a.to_canonical_json(), b.to_canonical_json());
        ensure(ta.is_ok() && ta.ok() == tb.ok(), || {
            format!("{name}: runs differ")
        })?;
    }
    // Live-style session: inputs arrive tick by tick and the session is
    // ended by hand, then the recording is replayed headless.
    let (scenario, _) = common::load("center");
    let mut sim = Simulation::new(scenario.clone(), scenario.params(), 21);
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    for tick in 0..900u64 {
        if tick % 7 == 0 && !sim.mode().is_autopilot() {
            let cmd = if tick < 40 {
                VelocityCommand::new(rng.gen_range(0.2..0.6), rng.gen_range(-0.1..0.1), 0.0)
            } else {
                VelocityCommand::new(0.0, 0.0, rng.gen_range(0.2..0.6))
            };
            sim.submit_pilot(cmd).map_err(|e| e.to_string())?;
        }
        sim.step();
    }
    let live = sim.into_report(TerminationReason::SessionEnded);
    let path = dir.path().join("live.json");
    colscan_core::write_report(&live, &path).map_err(|e| e.to_string())?;
    let verdict = replay(&live, Some(&path)).map_err(|e| e.to_string())?;
    ensure(!live.capture_log.is_empty(), || {
        "live session captured nothing".into()
    })?;
    ensure(verdict.capture_log_matches && verdict.bytes_match, || {
        format!("replay differs at {:?}", verdict.first_difference)
    })?;
    Ok(format!(
        "byte-identical reruns; live session of {} captures replays exactly",
        live.capture_log.len()
    ))
}

fn main() {
    let criteria: [(&str, Check); 10] = [
        ("center scenario 360 rule and capture spacing", criterion_1),
        (
            "wall and corner scenarios end on second ArcEnd",
            criterion_2,
        ),
        ("approach threshold crossing", criterion_3),
        ("orbit radius invariant", criterion_4),
        ("safety clearance and no collisions", criterion_5),
        ("single view versus fused scan", criterion_6),
        ("fusion properties", criterion_7),
        ("zero-noise soundness and completeness", criterion_8),
        ("noise calibration", criterion_9),
        ("determinism and record/replay", criterion_10),
    ];
    let mut failed = 0;
    for (i, (title, check)) in criteria.iter().enumerate() {
        match check() {
            Ok(detail) => println!("criterion {:>2} PASS  {title}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {:>2} FAIL  {title}: {why}", i + 1);
            }
        }
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        criteria.len() - failed
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
