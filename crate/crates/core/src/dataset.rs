//! Network inputs and targets built from detections and beam sets.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::detector::Detection;
use crate::rate::BeamSet;
use crate::rng::{stream_rng, Stream};
use crate::scene::CameraModel;
use crate::{Error, Result};

/// Features per detected UE beyond the one-hot class block.
pub const BBOX_FEATURES: usize = 4;

/// One image: the padded detection matrix and its multi-hot label.
///
/// `v` holds a `(C + 4) x U_max` matrix column by column, so column `u`
/// occupies `v[u * (C + 4)..(u + 1) * (C + 4)]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub scene_id: u64,
    pub camera_id: usize,
    pub v: Vec<f64>,
    pub t_star: Vec<u8>,
}

impl Sample {
    pub fn target(&self) -> Vec<f64> {
        self.t_star.iter().map(|&b| f64::from(b)).collect()
    }

    pub fn beam_set(&self) -> BeamSet {
        label_to_set(&self.t_star)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub num_classes: usize,
    pub u_max: usize,
    pub q_size: usize,
    pub image_width: u32,
    pub image_height: u32,
    pub camera_id: usize,
    pub split_seed: u64,
    pub count: usize,
    /// Hash of the configuration that produced the data, empty if unknown.
    pub config_hash: String,
}

impl DatasetMeta {
    pub fn rows(&self) -> usize {
        self.num_classes + BBOX_FEATURES
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub meta: DatasetMeta,
    pub samples: Vec<Sample>,
}

impl Dataset {
    /// Checks every sample against the header.
    pub fn validate(&self) -> Result<()> {
        let m = &self.meta;
        if m.count != self.samples.len() {
            return Err(Error::DimensionMismatch(alloc::format!(
                "header declares {} samples, found {}",
                m.count,
                self.samples.len()
            )));
        }
        for s in &self.samples {
            if s.v.len() != m.rows() * m.u_max || s.t_star.len() != m.q_size {
                return Err(Error::DimensionMismatch(alloc::format!(
                    "sample of scene {} has |V| = {}, |t*| = {}",
                    s.scene_id,
                    s.v.len(),
                    s.t_star.len()
                )));
            }
            if s.camera_id != m.camera_id {
                return Err(Error::InvalidConfig(alloc::format!(
                    "sample of scene {} belongs to camera {}, dataset to camera {}",
                    s.scene_id,
                    s.camera_id,
                    m.camera_id
                )));
            }
        }
        Ok(())
    }
}

/// Builds the `(C + 4) x U_max` input matrix, column-major.
///
/// Column `u` is `[one_hot(c); x / w; y / h; width / w; height / h]`; unused
/// columns stay zero. With more than `U_max` detections the smallest boxes
/// are dropped and the rest keep their order.
pub fn encode_input(dets: &[Detection], num_classes: usize, u_max: usize, camera: &CameraModel) -> Vec<f64> {
    let rows = num_classes + BBOX_FEATURES;
    let mut v = vec![0.0; rows * u_max];
    let mut keep: Vec<usize> = (0..dets.len()).collect();
    if dets.len() > u_max {
        keep.sort_by(|&a, &b| dets[b].bbox.area().total_cmp(&dets[a].bbox.area()).then(a.cmp(&b)));
        keep.truncate(u_max);
        keep.sort_unstable();
    }
    let (w, h) = (camera.width as f64, camera.height as f64);
    for (col, &i) in keep.iter().enumerate() {
        let d = &dets[i];
        let c = &mut v[col * rows..(col + 1) * rows];
        if d.class_id < num_classes {
            c[d.class_id] = 1.0;
        }
        c[num_classes] = d.bbox.x_center / w;
        c[num_classes + 1] = d.bbox.y_center / h;
        c[num_classes + 2] = d.bbox.width / w;
        c[num_classes + 3] = d.bbox.height / h;
    }
    v
}

/// Multi-hot vector of length `q_size` with ones at the set's beams.
pub fn encode_label(set: &BeamSet, q_size: usize) -> Result<Vec<u8>> {
    let mut t = vec![0u8; q_size];
    for q in set.iter() {
        if q == 0 || q > q_size {
            return Err(Error::BeamIndexOutOfRange { index: q, size: q_size });
        }
        t[q - 1] = 1;
    }
    Ok(t)
}

/// Inverse of [`encode_label`].
pub fn label_to_set(bits: &[u8]) -> BeamSet {
    bits.iter()
        .enumerate()
        .filter(|(_, &b)| b != 0)
        .map(|(i, _)| i + 1)
        .collect()
}

/// Seeded shuffle followed by a split into `(train, test)`.
///
/// The train part gets `round(n * train_fraction)` items, kept within
/// `1..=n - 1` so neither side is empty.
pub fn split<T>(items: Vec<T>, train_fraction: f64, seed: u64) -> Result<(Vec<T>, Vec<T>)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::InvalidConfig("train_fraction must be in (0, 1)".into()));
    }
    let n = items.len();
    if n < 2 {
        return Err(Error::NotEnoughSamples { needed: 2, got: n });
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut stream_rng(seed, Stream::Split, 0));
    let n_train = (libm::round(n as f64 * train_fraction) as usize).clamp(1, n - 1);
    let mut slots: Vec<Option<T>> = items.into_iter().map(Some).collect();
    let mut take = |idx: &[usize]| -> Vec<T> {
        idx.iter()
            .map(|&i| slots[i].take().expect("indices are a permutation"))
            .collect()
    };
    let train = take(&order[..n_train]);
    let test = take(&order[n_train..]);
    Ok((train, test))
}
