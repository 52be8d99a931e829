//! Static plan-view environment: walls, disc obstacles and circular columns
//! carrying ground-truth damage patches, plus the exact geometry queries the
//! sensors are built on.

use crate::geometry::{
    point_segment_distance, ray_disc, ray_segment, segment_segment_distance, Arc, ArcSet, Vec2,
};
use serde::{Deserialize, Serialize};
use std::fmt;
use thiserror::Error;

/// Tolerance for "touching" contacts (attached columns, sight lines that end
/// on a surface).
pub const CONTACT_EPS: f64 = 1e-7;

/// Angular step of the coarse sight-line scan in [`visible_surface_arc`].
const ARC_SCAN_STEP_DEG: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DamageKind {
    Spalling,
    RebarExposure,
}

impl fmt::Display for DamageKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DamageKind::Spalling => f.write_str("spalling"),
            DamageKind::RebarExposure => f.write_str("rebar_exposure"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DamagePatch {
    pub id: String,
    pub kind: DamageKind,
    /// Surface azimuths about the column center.
    pub azimuth: Arc,
    pub z_low: f64,
    pub z_high: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Column {
    pub id: String,
    pub center: Vec2,
    pub radius: f64,
    pub height: f64,
    /// Declared flush against a wall; permits zero wall clearance.
    pub attached: bool,
    pub patches: Vec<DamagePatch>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Wall {
    pub a: Vec2,
    pub b: Vec2,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Obstacle {
    pub center: Vec2,
    pub radius: f64,
}

/// Anything a ray can hit. Indices refer to the owning [`World`] vectors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", content = "index", rename_all = "snake_case")]
pub enum Entity {
    Wall(usize),
    Obstacle(usize),
    Column(usize),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RayHit {
    pub distance: f64,
    pub entity: Entity,
}

#[derive(Debug, Error, PartialEq)]
pub enum GeometryError {
    #[error("viewpoint ({x:.3}, {y:.3}) lies inside column {column}")]
    ViewpointInsideColumn { column: String, x: f64, y: f64 },
}

#[derive(Debug, Error, PartialEq)]
#[error("{entity}: {message}")]
pub struct InvariantViolation {
    pub entity: String,
    pub message: String,
}

/// Immutable environment. The first four walls are the bounds rectangle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct World {
    pub name: String,
    pub width: f64,
    pub height: f64,
    pub walls: Vec<Wall>,
    pub obstacles: Vec<Obstacle>,
    pub columns: Vec<Column>,
}

impl World {
    /// Builds a world whose walls are the four bounds edges followed by
    /// `interior_walls`, then checks every invariant.
    pub fn new(
        name: impl Into<String>,
        width: f64,
        height: f64,
        interior_walls: Vec<Wall>,
        obstacles: Vec<Obstacle>,
        columns: Vec<Column>,
    ) -> Result<Self, InvariantViolation> {
        if !(width > 0.0 && height > 0.0 && width.is_finite() && height.is_finite()) {
            return Err(violation("bounds", "width and height must be positive"));
        }
        let corners = [
            Vec2::new(0.0, 0.0),
            Vec2::new(width, 0.0),
            Vec2::new(width, height),
            Vec2::new(0.0, height),
        ];
        let mut walls: Vec<Wall> = (0..4)
            .map(|i| Wall {
                a: corners[i],
                b: corners[(i + 1) % 4],
            })
            .collect();
        walls.extend(interior_walls);
        let world = Self {
            name: name.into(),
            width,
            height,
            walls,
            obstacles,
            columns,
        };
        world.validate()?;
        Ok(world)
    }

    pub fn contains(&self, p: Vec2) -> bool {
        p.x >= -CONTACT_EPS
            && p.y >= -CONTACT_EPS
            && p.x <= self.width + CONTACT_EPS
            && p.y <= self.height + CONTACT_EPS
    }

    pub fn column_index(&self, id: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.id == id)
    }

    pub fn entity_name(&self, e: Entity) -> String {
        match e {
            Entity::Wall(i) => format!("wall#{i}"),
            Entity::Obstacle(i) => format!("obstacle#{i}"),
            Entity::Column(i) => format!("column {}", self.columns[i].id),
        }
    }

    fn validate(&self) -> Result<(), InvariantViolation> {
        for (i, w) in self.walls.iter().enumerate() {
            let name = format!("wall#{i}");
            if !(w.a.is_finite() && w.b.is_finite()) || w.a == w.b {
                return Err(violation(&name, "degenerate or non-finite segment"));
            }
            if !self.contains(w.a) || !self.contains(w.b) {
                return Err(violation(&name, "endpoint outside bounds"));
            }
        }
        for (i, o) in self.obstacles.iter().enumerate() {
            let name = format!("obstacle#{i}");
            if !(o.radius > 0.0 && o.center.is_finite()) {
                return Err(violation(&name, "radius must be positive"));
            }
            if !self.disc_inside(o.center, o.radius) {
                return Err(violation(&name, "disc extends outside bounds"));
            }
        }
        for (ci, col) in self.columns.iter().enumerate() {
            let name = format!("column {}", col.id);
            if !(col.radius > 0.0 && col.radius.is_finite()) {
                return Err(violation(&name, "radius must be positive"));
            }
            if !(col.height > 0.0 && col.height.is_finite()) {
                return Err(violation(&name, "height must be positive"));
            }
            if !self.disc_inside(col.center, col.radius) {
                return Err(violation(&name, "disc extends outside bounds"));
            }
            if self.columns[..ci].iter().any(|c| c.id == col.id) {
                return Err(violation(&name, "duplicate column id"));
            }
            for (wi, w) in self.walls.iter().enumerate() {
                let clearance = point_segment_distance(col.center, w.a, w.b) - col.radius;
                let ok = if col.attached {
                    clearance >= -CONTACT_EPS
                } else {
                    clearance > CONTACT_EPS
                };
                if !ok {
                    let msg = if col.attached {
                        format!("overlaps wall#{wi} (clearance {clearance:.4} m)")
                    } else {
                        format!(
                            "touches or overlaps wall#{wi} (clearance {clearance:.4} m); \
                             declare `attached: true` for flush columns"
                        )
                    };
                    return Err(violation(&name, &msg));
                }
            }
            for (oi, o) in self.obstacles.iter().enumerate() {
                if col.center.distance(o.center) - col.radius - o.radius <= CONTACT_EPS {
                    return Err(violation(&name, &format!("overlaps obstacle#{oi}")));
                }
            }
            for other in &self.columns[..ci] {
                if col.center.distance(other.center) - col.radius - other.radius <= CONTACT_EPS {
                    return Err(violation(&name, &format!("overlaps column {}", other.id)));
                }
            }
            for (pi, p) in col.patches.iter().enumerate() {
                let pname = format!("{name} patch {}", p.id);
                if col.patches[..pi].iter().any(|q| q.id == p.id) {
                    return Err(violation(&pname, "duplicate patch id"));
                }
                if p.azimuth.width_deg.is_nan() || p.azimuth.width_deg <= 0.0 {
                    return Err(violation(&pname, "empty azimuth interval"));
                }
                if !(0.0 <= p.z_low && p.z_low < p.z_high && p.z_high <= col.height) {
                    return Err(violation(
                        &pname,
                        "vertical band must satisfy 0 <= z_low < z_high <= height",
                    ));
                }
            }
        }
        Ok(())
    }

    fn disc_inside(&self, c: Vec2, r: f64) -> bool {
        c.x - r >= -CONTACT_EPS
            && c.y - r >= -CONTACT_EPS
            && c.x + r <= self.width + CONTACT_EPS
            && c.y + r <= self.height + CONTACT_EPS
    }

    /// Nearest intersection of the ray with any wall, obstacle or column
    /// within `max_range`. `direction` must be a unit vector.
    pub fn ray_cast(&self, origin: Vec2, direction: Vec2, max_range: f64) -> Option<RayHit> {
        let mut best: Option<RayHit> = None;
        let mut consider = |t: Option<f64>, entity: Entity| {
            if let Some(t) = t {
                if t <= max_range && best.is_none_or(|b| t < b.distance) {
                    best = Some(RayHit {
                        distance: t,
                        entity,
                    });
                }
            }
        };
        for (i, w) in self.walls.iter().enumerate() {
            consider(ray_segment(origin, direction, w.a, w.b), Entity::Wall(i));
        }
        for (i, o) in self.obstacles.iter().enumerate() {
            consider(
                ray_disc(origin, direction, o.center, o.radius),
                Entity::Obstacle(i),
            );
        }
        for (i, c) in self.columns.iter().enumerate() {
            consider(
                ray_disc(origin, direction, c.center, c.radius),
                Entity::Column(i),
            );
        }
        best
    }

    /// Distance from `p` to the nearest wall, obstacle or column surface.
    /// Negative inside a disc.
    pub fn clearance(&self, p: Vec2) -> f64 {
        let walls = self
            .walls
            .iter()
            .map(|w| point_segment_distance(p, w.a, w.b));
        let obstacles = self
            .obstacles
            .iter()
            .map(|o| p.distance(o.center) - o.radius);
        let columns = self.columns.iter().map(|c| p.distance(c.center) - c.radius);
        walls
            .chain(obstacles)
            .chain(columns)
            .fold(f64::INFINITY, f64::min)
    }

    /// Minimum clearance along the segment `p0`–`p1`.
    pub fn swept_clearance(&self, p0: Vec2, p1: Vec2) -> f64 {
        let walls = self
            .walls
            .iter()
            .map(|w| segment_segment_distance(p0, p1, w.a, w.b));
        let obstacles = self
            .obstacles
            .iter()
            .map(|o| point_segment_distance(o.center, p0, p1) - o.radius);
        let columns = self
            .columns
            .iter()
            .map(|c| point_segment_distance(c.center, p0, p1) - c.radius);
        walls
            .chain(obstacles)
            .chain(columns)
            .fold(f64::INFINITY, f64::min)
    }

    /// True if the open sight line `from`–`to` passes through any geometry
    /// other than column `skip`. Contacts within [`CONTACT_EPS`] of either
    /// end do not count.
    pub fn sight_line_blocked(&self, from: Vec2, to: Vec2, skip: Option<usize>) -> bool {
        let delta = to - from;
        let len = delta.norm();
        let Some(dir) = delta.normalized() else {
            return false;
        };
        let within = |t: Option<f64>| t.is_some_and(|t| t > CONTACT_EPS && t < len - CONTACT_EPS);
        self.walls
            .iter()
            .any(|w| within(ray_segment(from, dir, w.a, w.b)))
            || self
                .obstacles
                .iter()
                .any(|o| within(ray_disc(from, dir, o.center, o.radius)))
            || self
                .columns
                .iter()
                .enumerate()
                .filter(|(i, _)| Some(*i) != skip)
                .any(|(_, c)| within(ray_disc(from, dir, c.center, c.radius)))
    }
}

fn violation(entity: &str, message: &str) -> InvariantViolation {
    InvariantViolation {
        entity: entity.to_string(),
        message: message.to_string(),
    }
}

impl Column {
    pub fn surface_point(&self, azimuth_deg: f64) -> Vec2 {
        self.center + Vec2::from_angle(azimuth_deg.to_radians()) * self.radius
    }
}

/// The geometric (unoccluded) arc of `column`'s surface seen from
/// `viewpoint`: half-width `arccos(r / D)` centered on the viewpoint's
/// azimuth about the column center.
pub fn tangent_arc(column: &Column, viewpoint: Vec2) -> Result<Arc, GeometryError> {
    let offset = viewpoint - column.center;
    let dist = offset.norm();
    if dist <= column.radius {
        return Err(GeometryError::ViewpointInsideColumn {
            column: column.id.clone(),
            x: viewpoint.x,
            y: viewpoint.y,
        });
    }
    let half = (column.radius / dist).acos().to_degrees();
    Ok(Arc::centered(offset.angle().to_degrees(), half))
}

/// Visible part of column `column_index`'s surface from `viewpoint`, with
/// sight lines blocked by walls, obstacles and other columns removed.
///
/// Sight lines are scanned every half degree and visibility transitions are
/// refined by bisection, so occluders narrower than the scan step can be
/// missed.
pub fn visible_surface_arc(
    world: &World,
    column_index: usize,
    viewpoint: Vec2,
) -> Result<ArcSet, GeometryError> {
    let column = &world.columns[column_index];
    let arc = tangent_arc(column, viewpoint)?;
    // Tangent points are grazing; keep them out of the occlusion test.
    let lo = arc.start_deg + 1e-9;
    let hi = arc.start_deg + arc.width_deg - 1e-9;
    if hi <= lo {
        return Ok(ArcSet::new());
    }
    let visible = |az: f64| {
        !world.sight_line_blocked(viewpoint, column.surface_point(az), Some(column_index))
    };

    let steps = ((hi - lo) / ARC_SCAN_STEP_DEG).ceil().max(1.0) as usize;
    let sample = |k: usize| lo + (hi - lo) * k as f64 / steps as f64;
    let mut set = ArcSet::new();
    let mut run_start = visible(lo).then_some(lo);
    let mut prev_az = lo;
    let mut prev_vis = run_start.is_some();
    for k in 1..=steps {
        let az = sample(k);
        let vis = visible(az);
        if vis != prev_vis {
            let edge = bisect_transition(prev_az, az, prev_vis, &visible);
            if vis {
                run_start = Some(edge);
            } else if let Some(s) = run_start.take() {
                set.insert(Arc::new(s, edge - s));
            }
        }
        prev_az = az;
        prev_vis = vis;
    }
    if let Some(s) = run_start {
        set.insert(Arc::new(s, hi - s));
    }
    Ok(set)
}

fn bisect_transition(mut a: f64, mut b: f64, vis_a: bool, visible: &impl Fn(f64) -> bool) -> f64 {
    for _ in 0..40 {
        let m = 0.5 * (a + b);
        if visible(m) == vis_a {
            a = m;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}
