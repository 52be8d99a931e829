//! Simulated payload: forward 1D lidar, three ultrasonic cone rangers and a
//! pinhole-style camera that reports column and damage-patch bounding boxes.
//!
//! Image coordinates are normalized to `[0, 1]²` with `x` growing to the
//! right and `y` growing downward. Angles map linearly onto the field of
//! view, so a target on the left of the heading has `x < 0.5`.

use crate::geometry::{wrap_pi, Vec2};
use crate::kinematics::MavPose;
use crate::world::{visible_surface_arc, DamageKind, World};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensorConfig {
    pub lidar_max_range: f64,
    pub ultrasound_max_range: f64,
    pub ultrasound_cone_half_angle_deg: f64,
    /// Odd number of rays spanning each ultrasonic cone.
    pub ultrasound_rays: u32,
    pub hfov_deg: f64,
    pub vfov_deg: f64,
    pub min_detectable_area_fraction: f64,
}

impl Default for SensorConfig {
    fn default() -> Self {
        Self {
            lidar_max_range: 12.0,
            ultrasound_max_range: 4.0,
            ultrasound_cone_half_angle_deg: 15.0,
            ultrasound_rays: 11,
            hfov_deg: 70.0,
            vfov_deg: 50.0,
            min_detectable_area_fraction: 0.005,
        }
    }
}

impl SensorConfig {
    pub fn validate(&self) -> Result<(), String> {
        let half = self.ultrasound_cone_half_angle_deg;
        if !(half > 0.0 && half < 90.0) {
            return Err(format!(
                "ultrasound_cone_half_angle_deg must be in (0, 90), got {half}"
            ));
        }
        for (name, fov) in [("hfov_deg", self.hfov_deg), ("vfov_deg", self.vfov_deg)] {
            if !(fov > 0.0 && fov < 180.0) {
                return Err(format!("{name} must be in (0, 180), got {fov}"));
            }
        }
        if self.ultrasound_rays == 0 || self.ultrasound_rays.is_multiple_of(2) {
            return Err(format!(
                "ultrasound_rays must be odd, got {}",
                self.ultrasound_rays
            ));
        }
        if !(self.lidar_max_range > 0.0 && self.ultrasound_max_range > 0.0) {
            return Err("sensor ranges must be positive".into());
        }
        if !(0.0..1.0).contains(&self.min_detectable_area_fraction) {
            return Err("min_detectable_area_fraction must be in [0, 1)".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UltrasoundMount {
    Left,
    Right,
    Rear,
}

impl UltrasoundMount {
    pub const ALL: [UltrasoundMount; 3] = [Self::Left, Self::Right, Self::Rear];

    /// Mount azimuth relative to heading, radians.
    pub fn azimuth(self) -> f64 {
        match self {
            Self::Left => std::f64::consts::FRAC_PI_2,
            Self::Right => -std::f64::consts::FRAC_PI_2,
            Self::Rear => std::f64::consts::PI,
        }
    }
}

/// Single ray along the heading. `None` is out of range.
pub fn lidar_read(world: &World, pose: &MavPose, config: &SensorConfig) -> Option<f64> {
    world
        .ray_cast(pose.position, pose.heading_unit(), config.lidar_max_range)
        .map(|h| h.distance)
}

/// Minimum range over the rays evenly spanning the mount's cone.
pub fn ultrasound_read(
    world: &World,
    pose: &MavPose,
    mount: UltrasoundMount,
    config: &SensorConfig,
) -> Option<f64> {
    let axis = pose.heading + mount.azimuth();
    let half = config.ultrasound_cone_half_angle_deg.to_radians();
    let n = config.ultrasound_rays.max(1);
    (0..n)
        .filter_map(|k| {
            let offset = if n == 1 {
                0.0
            } else {
                -half + 2.0 * half * f64::from(k) / f64::from(n - 1)
            };
            world
                .ray_cast(
                    pose.position,
                    Vec2::from_angle(axis + offset),
                    config.ultrasound_max_range,
                )
                .map(|h| h.distance)
        })
        .min_by(f64::total_cmp)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UltrasoundReadings {
    pub left: Option<f64>,
    pub right: Option<f64>,
    pub rear: Option<f64>,
}

impl UltrasoundReadings {
    pub fn read(world: &World, pose: &MavPose, config: &SensorConfig) -> Self {
        Self {
            left: ultrasound_read(world, pose, UltrasoundMount::Left, config),
            right: ultrasound_read(world, pose, UltrasoundMount::Right, config),
            rear: ultrasound_read(world, pose, UltrasoundMount::Rear, config),
        }
    }

    pub fn get(&self, mount: UltrasoundMount) -> Option<f64> {
        match mount {
            UltrasoundMount::Left => self.left,
            UltrasoundMount::Right => self.right,
            UltrasoundMount::Rear => self.rear,
        }
    }
}

/// Axis-aligned box in normalized image coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BBox {
    pub x_min: f64,
    pub y_min: f64,
    pub x_max: f64,
    pub y_max: f64,
}

impl BBox {
    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> f64 {
        self.y_max - self.y_min
    }

    pub fn center_x(&self) -> f64 {
        0.5 * (self.x_min + self.x_max)
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn is_normalized(&self) -> bool {
        (0.0..=1.0).contains(&self.x_min)
            && (0.0..=1.0).contains(&self.x_max)
            && (0.0..=1.0).contains(&self.y_min)
            && (0.0..=1.0).contains(&self.y_max)
            && self.x_min <= self.x_max
            && self.y_min <= self.y_max
    }

    /// Clips to the unit square; `None` if nothing remains.
    fn clipped(x0: f64, y0: f64, x1: f64, y1: f64) -> Option<BBox> {
        let b = BBox {
            x_min: x0.clamp(0.0, 1.0),
            y_min: y0.clamp(0.0, 1.0),
            x_max: x1.clamp(0.0, 1.0),
            y_max: y1.clamp(0.0, 1.0),
        };
        (b.x_max > b.x_min && b.y_max > b.y_min).then_some(b)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnBox {
    pub column_id: String,
    pub bbox: BBox,
    pub area_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VisiblePatch {
    pub column_id: String,
    pub patch_id: String,
    pub kind: DamageKind,
    pub bbox: BBox,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageObservation {
    pub pose: MavPose,
    pub tick: u64,
    pub column_boxes: Vec<ColumnBox>,
    pub visible_patches: Vec<VisiblePatch>,
}

impl ImageObservation {
    pub fn column_box(&self, column_id: &str) -> Option<&ColumnBox> {
        self.column_boxes.iter().find(|b| b.column_id == column_id)
    }
}

/// Horizontal image coordinate of a bearing relative to the heading.
fn image_x(relative_bearing: f64, hfov: f64) -> f64 {
    0.5 - relative_bearing / hfov
}

/// Vertical image coordinate of an elevation angle (camera at column mid-height).
fn image_y(elevation: f64, vfov: f64) -> f64 {
    0.5 - elevation / vfov
}

/// Synthetic camera frame.
///
/// A column is imaged when its center bearing is inside the horizontal field
/// of view and the sight line to its nearest surface point is clear. Box
/// extents follow the angular size of the disc (`2·asin(r/D)`) and of its
/// height seen from the surface distance, both clipped to the frame.
pub fn camera_capture(
    world: &World,
    pose: &MavPose,
    tick: u64,
    config: &SensorConfig,
) -> ImageObservation {
    let hfov = config.hfov_deg.to_radians();
    let vfov = config.vfov_deg.to_radians();
    let mut column_boxes = Vec::new();
    let mut visible_patches = Vec::new();

    for (ci, col) in world.columns.iter().enumerate() {
        let to_center = col.center - pose.position;
        let dist_center = to_center.norm();
        if dist_center <= col.radius {
            continue;
        }
        let rel = wrap_pi(to_center.angle() - pose.heading);
        if rel.abs() > 0.5 * hfov {
            continue;
        }
        let dist_surface = dist_center - col.radius;
        let nearest = col.center - to_center * (col.radius / dist_center);
        if world.sight_line_blocked(pose.position, nearest, Some(ci)) {
            continue;
        }
        let half_width = (col.radius / dist_center).asin();
        let half_height = (0.5 * col.height / dist_surface).atan();
        let Some(bbox) = BBox::clipped(
            image_x(rel + half_width, hfov),
            image_y(half_height, vfov),
            image_x(rel - half_width, hfov),
            image_y(-half_height, vfov),
        ) else {
            continue;
        };
        let area_fraction = bbox.area();
        if area_fraction < config.min_detectable_area_fraction {
            continue;
        }

        let visible = if col.patches.is_empty() {
            Default::default()
        } else {
            visible_surface_arc(world, ci, pose.position).unwrap_or_default()
        };
        for patch in &col.patches {
            let pieces = visible.intersect_arc(patch.azimuth);
            if pieces.is_empty() {
                continue;
            }
            // Bearing to surface points is monotone across the visible arc,
            // so the piece endpoints bound the horizontal extent.
            let (mut x_lo, mut x_hi) = (f64::INFINITY, f64::NEG_INFINITY);
            for (lo, hi) in pieces {
                for az in [lo, hi] {
                    let p = col.surface_point(az);
                    let x = image_x(wrap_pi((p - pose.position).angle() - pose.heading), hfov);
                    x_lo = x_lo.min(x);
                    x_hi = x_hi.max(x);
                }
            }
            let mid = 0.5 * col.height;
            let top = image_y(((patch.z_high - mid) / dist_surface).atan(), vfov);
            let bottom = image_y(((patch.z_low - mid) / dist_surface).atan(), vfov);
            if let Some(bbox) = BBox::clipped(x_lo, top, x_hi, bottom) {
                visible_patches.push(VisiblePatch {
                    column_id: col.id.clone(),
                    patch_id: patch.id.clone(),
                    kind: patch.kind,
                    bbox,
                });
            }
        }
        column_boxes.push(ColumnBox {
            column_id: col.id.clone(),
            bbox,
            area_fraction,
        });
    }

    ImageObservation {
        pose: *pose,
        tick,
        column_boxes,
        visible_patches,
    }
}

/// Largest box by area; ties go to the lower column id.
pub fn detect_column(observation: &ImageObservation) -> Option<&ColumnBox> {
    observation.column_boxes.iter().min_by(|a, b| {
        b.area_fraction
            .total_cmp(&a.area_fraction)
            .then_with(|| a.column_id.cmp(&b.column_id))
    })
}

/// Angular half-width of a column box, recovered from its normalized width.
pub fn bbox_half_angle(bbox: &BBox, config: &SensorConfig) -> f64 {
    0.5 * bbox.width() * config.hfov_deg.to_radians()
}
