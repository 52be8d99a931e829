//! Per-image damage detection.
//!
//! [`DamageDetector`] is the seam where a learned model would plug in. The
//! shipped [`OracleDetector`] reads ground truth from the synthetic frame and
//! degrades it with a seeded noise model: per-patch misses, box jitter and
//! Poisson-distributed false positives.

use crate::sensors::{BBox, ImageObservation};
use crate::world::DamageKind;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseParams {
    /// Probability of dropping each visible patch, `[0, 1]`.
    pub miss_rate: f64,
    /// Expected number of spurious detections per image.
    pub false_positive_rate: f64,
    /// Standard deviation of the per-edge box perturbation, normalized units.
    pub jitter_sigma: f64,
}

impl NoiseParams {
    pub fn validate(&self) -> Result<(), String> {
        if !(0.0..=1.0).contains(&self.miss_rate) {
            return Err(format!(
                "miss_rate must be in [0, 1], got {}",
                self.miss_rate
            ));
        }
        if !(self.false_positive_rate >= 0.0 && self.false_positive_rate.is_finite()) {
            return Err("false_positive_rate must be non-negative".into());
        }
        if !(self.jitter_sigma >= 0.0 && self.jitter_sigma.is_finite()) {
            return Err("jitter_sigma must be non-negative".into());
        }
        Ok(())
    }

    pub fn is_exact(&self) -> bool {
        self.miss_rate == 0.0 && self.false_positive_rate == 0.0 && self.jitter_sigma == 0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct DetectorConfig {
    pub noise: NoiseParams,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DamageDetection {
    pub kind: DamageKind,
    pub region: BBox,
    pub confidence: f64,
    /// Ground-truth patch behind the detection; `None` for false positives.
    pub source_patch: Option<String>,
}

pub trait DamageDetector {
    fn detect(&self, observation: &ImageObservation) -> Vec<DamageDetection>;
}

/// Ground-truth detector with the configured noise model.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct OracleDetector {
    pub config: DetectorConfig,
}

impl OracleDetector {
    pub fn new(config: DetectorConfig) -> Self {
        Self { config }
    }
}

impl DamageDetector for OracleDetector {
    fn detect(&self, observation: &ImageObservation) -> Vec<DamageDetection> {
        detect_damage(observation, &self.config)
    }
}

/// Random stream for one frame: ChaCha keyed by the run seed, with the frame
/// tick selecting the stream so frames never share draws.
fn frame_rng(seed: u64, tick: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(tick);
    rng
}

pub fn detect_damage(
    observation: &ImageObservation,
    config: &DetectorConfig,
) -> Vec<DamageDetection> {
    let noise = &config.noise;
    let mut rng = frame_rng(config.seed, observation.tick);
    let jitter = (noise.jitter_sigma > 0.0)
        .then(|| Normal::new(0.0, noise.jitter_sigma).expect("validated sigma"));
    let mut out = Vec::with_capacity(observation.visible_patches.len());

    for patch in &observation.visible_patches {
        // One draw per patch regardless of outcome keeps streams aligned.
        let keep = rng.gen::<f64>() >= noise.miss_rate;
        if !keep {
            continue;
        }
        let region = match &jitter {
            Some(n) => jittered(&patch.bbox, |r: &mut ChaCha8Rng| n.sample(r), &mut rng),
            None => patch.bbox,
        };
        out.push(DamageDetection {
            kind: patch.kind,
            region,
            confidence: 1.0,
            source_patch: Some(patch.patch_id.clone()),
        });
    }

    if noise.false_positive_rate > 0.0 {
        let count = Poisson::new(noise.false_positive_rate)
            .expect("validated rate")
            .sample(&mut rng) as u64;
        for _ in 0..count {
            let kind = if rng.gen::<bool>() {
                DamageKind::Spalling
            } else {
                DamageKind::RebarExposure
            };
            let (x0, x1) = ordered(rng.gen(), rng.gen());
            let (y0, y1) = ordered(rng.gen(), rng.gen());
            out.push(DamageDetection {
                kind,
                region: BBox {
                    x_min: x0,
                    y_min: y0,
                    x_max: x1,
                    y_max: y1,
                },
                confidence: rng.gen(),
                source_patch: None,
            });
        }
    }
    out
}

fn ordered(a: f64, b: f64) -> (f64, f64) {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

fn jittered(
    b: &BBox,
    mut sample: impl FnMut(&mut ChaCha8Rng) -> f64,
    rng: &mut ChaCha8Rng,
) -> BBox {
    let mut edge = |v: f64| (v + sample(rng)).clamp(0.0, 1.0);
    let (x0, x1) = ordered(edge(b.x_min), edge(b.x_max));
    let (y0, y1) = ordered(edge(b.y_min), edge(b.y_max));
    BBox {
        x_min: x0,
        y_min: y0,
        x_max: x1,
        y_max: y1,
    }
}
