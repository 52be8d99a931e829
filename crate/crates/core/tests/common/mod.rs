//! Brute-force reference computations shared by the integration tests.
//! Nothing here calls the library's geometry code.

#![allow(dead_code, clippy::too_many_arguments)]

use colscan_core::geometry::Vec2;
use colscan_core::scenario::{load_pilot_script, load_scenario, PilotEntry, Scenario};
use colscan_core::world::World;
use std::f64::consts::PI;

pub fn scenario_path(name: &str) -> String {
    format!("{}/scenarios/{name}.json", env!("CARGO_MANIFEST_DIR"))
}

pub fn load(name: &str) -> (Scenario, Vec<PilotEntry>) {
    let scenario = load_scenario(scenario_path(name)).expect("scenario loads");
    let pilot = load_pilot_script(format!(
        "{}/scenarios/{name}.pilot.json",
        env!("CARGO_MANIFEST_DIR")
    ))
    .expect("pilot loads");
    (scenario, pilot)
}

fn v(x: f64, y: f64) -> Vec2 {
    Vec2 { x, y }
}

fn sub(a: Vec2, b: Vec2) -> (f64, f64) {
    (a.x - b.x, a.y - b.y)
}

pub fn dist(a: Vec2, b: Vec2) -> f64 {
    let (dx, dy) = sub(a, b);
    dx.hypot(dy)
}

pub fn seg_dist(p: Vec2, a: Vec2, b: Vec2) -> f64 {
    let (abx, aby) = sub(b, a);
    let (apx, apy) = sub(p, a);
    let len2 = abx * abx + aby * aby;
    let t = if len2 == 0.0 {
        0.0
    } else {
        ((apx * abx + apy * aby) / len2).clamp(0.0, 1.0)
    };
    dist(p, v(a.x + t * abx, a.y + t * aby))
}

/// Distance from `p` to the nearest surface, skipping column `skip`.
pub fn clearance(world: &World, p: Vec2, skip: Option<usize>) -> f64 {
    let walls = world.walls.iter().map(|w| seg_dist(p, w.a, w.b));
    let obstacles = world.obstacles.iter().map(|o| dist(p, o.center) - o.radius);
    let columns = world
        .columns
        .iter()
        .enumerate()
        .filter(|(i, _)| Some(*i) != skip)
        .map(|(_, c)| dist(p, c.center) - c.radius);
    walls
        .chain(obstacles)
        .chain(columns)
        .fold(f64::INFINITY, f64::min)
}

/// Sphere-traces a ray against the exact distance field.
pub fn march(world: &World, origin: Vec2, angle: f64, max_range: f64) -> Option<f64> {
    let (c, s) = (angle.cos(), angle.sin());
    let mut t = 0.0;
    while t <= max_range {
        let d = clearance(world, v(origin.x + t * c, origin.y + t * s), None);
        if d < 1e-7 {
            return Some(t);
        }
        t += d;
    }
    None
}

/// Minimum over a densely sampled cone (0.1 degree spacing).
pub fn dense_cone(
    world: &World,
    origin: Vec2,
    axis: f64,
    half_angle: f64,
    max_range: f64,
) -> Option<f64> {
    let n = (2.0 * half_angle.to_degrees() / 0.1).round() as usize;
    (0..=n)
        .filter_map(|k| {
            let a = axis - half_angle + 2.0 * half_angle * k as f64 / n as f64;
            march(world, origin, a, max_range)
        })
        .min_by(f64::total_cmp)
}

/// Whether the straight segment `from → to` passes through anything other
/// than column `skip`, sampled every 2 mm.
pub fn segment_blocked(world: &World, from: Vec2, to: Vec2, skip: usize) -> bool {
    let len = dist(from, to);
    let n = (len / 0.002).ceil().max(1.0) as usize;
    (1..n).any(|k| {
        let t = k as f64 / n as f64;
        let p = v(from.x + t * (to.x - from.x), from.y + t * (to.y - from.y));
        clearance(world, p, Some(skip)) < 0.0
    })
}

/// Surface azimuths of column `ci` visible from `viewpoint`, sampled every
/// `step_deg`. Entry `k` is azimuth `k * step_deg`.
pub fn visible_samples(world: &World, ci: usize, viewpoint: Vec2, step_deg: f64) -> Vec<bool> {
    let col = &world.columns[ci];
    let n = (360.0 / step_deg).round() as usize;
    (0..n)
        .map(|k| {
            let az = (k as f64 * step_deg).to_radians();
            let normal = (az.cos(), az.sin());
            let p = v(
                col.center.x + col.radius * normal.0,
                col.center.y + col.radius * normal.1,
            );
            let (tx, ty) = sub(viewpoint, p);
            // Strictly facing; grazing points do not count.
            if normal.0 * tx + normal.1 * ty <= 1e-9 {
                return false;
            }
            !segment_blocked(world, viewpoint, p, ci)
        })
        .collect()
}

pub fn visible_measure_deg(world: &World, ci: usize, viewpoint: Vec2) -> f64 {
    let step = 0.1;
    visible_samples(world, ci, viewpoint, step)
        .iter()
        .filter(|b| **b)
        .count() as f64
        * step
}

/// Fraction of a `w × h` pixel grid covered by the column: a pixel is lit
/// when its horizontal ray hits the disc and its elevation is within the
/// column's half height as seen at the surface distance.
pub fn rasterized_area(
    center: Vec2,
    radius: f64,
    height: f64,
    eye: Vec2,
    heading: f64,
    hfov: f64,
    vfov: f64,
    w: usize,
    h: usize,
) -> f64 {
    let d_center = dist(center, eye);
    let d_surface = d_center - radius;
    let half_h = (0.5 * height / d_surface).atan();
    let rows_lit = (0..h)
        .filter(|&j| {
            let elev = (0.5 - (j as f64 + 0.5) / h as f64) * vfov;
            elev.abs() <= half_h
        })
        .count();
    let cols_lit = (0..w)
        .filter(|&i| {
            let bearing = heading + (0.5 - (i as f64 + 0.5) / w as f64) * hfov;
            let (c, s) = (bearing.cos(), bearing.sin());
            let (ox, oy) = sub(center, eye);
            let along = ox * c + oy * s;
            let perp = (ox * s - oy * c).abs();
            along > 0.0 && perp <= radius
        })
        .count();
    (rows_lit * cols_lit) as f64 / (w * h) as f64
}

/// How far the orbit can sweep from `start_deg` in each direction before the
/// sensor facing the direction of travel reads below `stop`, walking in
/// `step_deg` increments. Returns (counter-clockwise extent, clockwise extent).
pub fn reachable_arc(
    world: &World,
    center: Vec2,
    radius: f64,
    start_deg: f64,
    stop: f64,
    cone_half: f64,
    max_range: f64,
    step_deg: f64,
) -> (f64, f64) {
    let walk = |sign: f64| {
        let mut swept = 0.0;
        while swept < 360.0 {
            let az = (start_deg + sign * swept).to_radians();
            let p = v(center.x + radius * az.cos(), center.y + radius * az.sin());
            let travel = az + sign * 0.5 * PI;
            if let Some(r) = dense_cone(world, p, travel, cone_half, max_range) {
                if r < stop {
                    return swept;
                }
            }
            swept += step_deg;
        }
        360.0
    };
    (walk(1.0), walk(-1.0))
}
