//! Geometric stand-in for the camera object detector.
//!
//! Detections are the clipped projections of the UEs, perturbed by a simple
//! error model: misses, box jitter, class confusion and spurious boxes.

use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};

use crate::scene::{project_bbox, BoundingBox, CameraModel, Scene};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub class_id: usize,
    pub bbox: BoundingBox,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorNoise {
    /// Standard deviation of the center and size perturbation, pixels.
    pub bbox_jitter_std: f64,
    pub miss_prob: f64,
    /// Mean number of spurious boxes per image.
    pub false_positive_rate: f64,
    pub class_confusion_prob: f64,
}

impl Default for DetectorNoise {
    fn default() -> Self {
        Self {
            bbox_jitter_std: 2.0,
            miss_prob: 0.02,
            false_positive_rate: 0.05,
            class_confusion_prob: 0.0,
        }
    }
}

impl DetectorNoise {
    pub fn none() -> Self {
        Self {
            bbox_jitter_std: 0.0,
            miss_prob: 0.0,
            false_positive_rate: 0.0,
            class_confusion_prob: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let prob = |p: f64| (0.0..=1.0).contains(&p);
        if !prob(self.miss_prob) || !prob(self.class_confusion_prob) {
            return Err(Error::InvalidConfig("detector probabilities must be in [0, 1]".into()));
        }
        if !(self.bbox_jitter_std >= 0.0) || !(self.false_positive_rate >= 0.0) {
            return Err(Error::InvalidConfig(
                "detector jitter and false-positive rate must be non-negative".into(),
            ));
        }
        Ok(())
    }
}

/// Smallest side of a jittered box, pixels.
const MIN_BOX_SIDE: f64 = 1.0;

fn jitter<R: Rng + ?Sized>(b: &BoundingBox, std: f64, rng: &mut R) -> BoundingBox {
    let n = Normal::new(0.0, std).expect("std is finite and non-negative");
    BoundingBox {
        x_center: b.x_center + n.sample(rng),
        y_center: b.y_center + n.sample(rng),
        width: (b.width + n.sample(rng)).max(MIN_BOX_SIDE),
        height: (b.height + n.sample(rng)).max(MIN_BOX_SIDE),
    }
}

fn other_class<R: Rng + ?Sized>(class_id: usize, num_classes: usize, rng: &mut R) -> usize {
    if num_classes < 2 {
        return class_id;
    }
    let k = rng.random_range(0..num_classes - 1);
    if k >= class_id {
        k + 1
    } else {
        k
    }
}

/// Runs the detector for `camera` over every UE of the scene. The output
/// order is shuffled.
pub fn detect<R: Rng + ?Sized>(
    scene: &Scene,
    camera: &CameraModel,
    num_classes: usize,
    noise: &DetectorNoise,
    rng: &mut R,
) -> Vec<Detection> {
    let (w, h) = (camera.width as f64, camera.height as f64);
    let mut out = Vec::new();
    for ue in &scene.ues {
        let Some(bbox) = project_bbox(camera, ue) else {
            continue;
        };
        if noise.miss_prob > 0.0 && rng.random::<f64>() < noise.miss_prob {
            continue;
        }
        let bbox = if noise.bbox_jitter_std > 0.0 {
            match jitter(&bbox, noise.bbox_jitter_std, rng).clip(w, h) {
                Some(b) => b,
                None => continue,
            }
        } else {
            bbox
        };
        let mut class_id = ue.class_id;
        if noise.class_confusion_prob > 0.0 && rng.random::<f64>() < noise.class_confusion_prob {
            class_id = other_class(class_id, num_classes, rng);
        }
        out.push(Detection { class_id, bbox });
    }

    if noise.false_positive_rate > 0.0 {
        let count = Poisson::new(noise.false_positive_rate)
            .expect("rate is positive")
            .sample(rng) as usize;
        for _ in 0..count {
            let width = w * (0.02 + 0.18 * rng.random::<f64>());
            let height = width * (0.4 + 0.6 * rng.random::<f64>());
            let bbox = BoundingBox {
                x_center: w * rng.random::<f64>(),
                y_center: h * rng.random::<f64>(),
                width,
                height,
            };
            if let Some(bbox) = bbox.clip(w, h) {
                out.push(Detection {
                    class_id: rng.random_range(0..num_classes.max(1)),
                    bbox,
                });
            }
        }
    }

    out.shuffle(rng);
    out
}
