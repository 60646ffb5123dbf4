//! Achievable rate, exhaustive beam search and top-k beam training.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::vec::Vec;

use num_complex::Complex64;

use crate::channel::{ChannelModel, FreqChannel};
use crate::codebook::Codebook;
use crate::scene::{los_visible, project_bbox, CameraModel, Scene};
use crate::{Error, Result};

/// Both hops of an RIS-assisted link plus the BS beam.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkChannels {
    /// RIS-UE channel, `M x 1` per subcarrier.
    pub h_r: FreqChannel,
    /// BS-RIS channel, `M x N` per subcarrier.
    pub h_t: FreqChannel,
    /// Unit-norm BS beam of length `N`.
    pub f: Vec<Complex64>,
    pub snr: f64,
}

impl LinkChannels {
    pub fn ris_elements(&self) -> usize {
        self.h_r.rows
    }
}

/// Set of one-based beam indices.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct BeamSet(BTreeSet<usize>);

impl BeamSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds a set from one-based indices, rejecting any outside `1..=q_size`.
    pub fn from_indices<I: IntoIterator<Item = usize>>(indices: I, q_size: usize) -> Result<Self> {
        let mut set = BTreeSet::new();
        for q in indices {
            if q == 0 || q > q_size {
                return Err(Error::BeamIndexOutOfRange {
                    index: q,
                    size: q_size,
                });
            }
            set.insert(q);
        }
        Ok(Self(set))
    }

    pub fn insert(&mut self, q: usize) -> bool {
        self.0.insert(q)
    }

    pub fn contains(&self, q: usize) -> bool {
        self.0.contains(&q)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Ascending indices.
    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().copied()
    }

    pub fn intersection_len(&self, other: &BeamSet) -> usize {
        self.0.intersection(&other.0).count()
    }

    pub fn is_superset(&self, other: &BeamSet) -> bool {
        self.0.is_superset(&other.0)
    }
}

impl FromIterator<usize> for BeamSet {
    fn from_iter<T: IntoIterator<Item = usize>>(iter: T) -> Self {
        Self(iter.into_iter().collect())
    }
}

/// Effective channels `g_k = h_R,k ⊙ (H_T,k f)`, one vector per subcarrier.
pub fn cascade(link: &LinkChannels) -> Result<Vec<Vec<Complex64>>> {
    let (h_r, h_t) = (&link.h_r, &link.h_t);
    let m = h_r.rows;
    let n = h_t.cols;
    if h_r.cols != 1 || h_t.rows != m || link.f.len() != n || h_r.subcarriers != h_t.subcarriers {
        return Err(Error::DimensionMismatch(format!(
            "h_R {}x{} x{}, H_T {}x{} x{}, f {}",
            h_r.rows, h_r.cols, h_r.subcarriers, h_t.rows, h_t.cols, h_t.subcarriers, link.f.len()
        )));
    }
    let mut out = Vec::with_capacity(h_r.subcarriers);
    for k in 0..h_r.subcarriers {
        let hr = h_r.subcarrier(k);
        let ht = h_t.subcarrier(k);
        let g: Vec<Complex64> = (0..m)
            .map(|i| {
                let row = &ht[i * n..(i + 1) * n];
                let hf: Complex64 = row.iter().zip(&link.f).map(|(a, b)| a * b).sum();
                hr[i] * hf
            })
            .collect();
        out.push(g);
    }
    Ok(out)
}

/// `(1/K) sum_k log2(1 + snr |g_k^T psi|^2)` on a precomputed cascade.
pub fn rate_from_cascade(cascade: &[Vec<Complex64>], snr: f64, psi: &[Complex64]) -> f64 {
    if cascade.is_empty() {
        return 0.0;
    }
    let total: f64 = cascade
        .iter()
        .map(|g| {
            let y: Complex64 = g.iter().zip(psi).map(|(a, b)| a * b).sum();
            libm::log2(1.0 + snr * y.norm_sqr())
        })
        .sum();
    total / cascade.len() as f64
}

/// Achievable rate in bits/s/Hz of reflection beam `psi`.
pub fn achievable_rate(link: &LinkChannels, psi: &[Complex64]) -> Result<f64> {
    let g = cascade(link)?;
    if psi.len() != link.ris_elements() {
        return Err(Error::DimensionMismatch(format!(
            "beam has {} entries, RIS has {}",
            psi.len(),
            link.ris_elements()
        )));
    }
    Ok(rate_from_cascade(&g, link.snr, psi))
}

/// Rate of every codebook beam for one link, zero-based by beam.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamRates(pub Vec<f64>);

impl BeamRates {
    pub fn compute(link: &LinkChannels, cb: &Codebook) -> Result<Self> {
        let g = cascade(link)?;
        if cb.geometry().len() != link.ris_elements() {
            return Err(Error::DimensionMismatch(format!(
                "codebook has {} elements, RIS has {}",
                cb.geometry().len(),
                link.ris_elements()
            )));
        }
        Ok(Self(
            cb.beams()
                .iter()
                .map(|psi| rate_from_cascade(&g, link.snr, psi))
                .collect(),
        ))
    }

    /// One-based index of the best beam; lowest index wins ties.
    pub fn best_beam(&self) -> usize {
        let mut best = 0;
        for (i, r) in self.0.iter().enumerate() {
            if *r > self.0[best] {
                best = i;
            }
        }
        best + 1
    }

    pub fn best_rate(&self) -> f64 {
        self.0[self.best_beam() - 1]
    }

    /// Best rate among the given one-based beams; zero for an empty sweep.
    pub fn best_among<I: IntoIterator<Item = usize>>(&self, beams: I) -> f64 {
        beams
            .into_iter()
            .map(|q| self.0[q - 1])
            .fold(0.0, f64::max)
    }
}

/// Exhaustive search: one-based index of the highest-rate beam.
pub fn best_beam(link: &LinkChannels, cb: &Codebook) -> Result<usize> {
    Ok(BeamRates::compute(link, cb)?.best_beam())
}

/// UEs that a camera sees and whose direct BS link is blocked.
pub fn candidate_ues(scene: &Scene, camera: &CameraModel) -> Vec<usize> {
    scene
        .ues
        .iter()
        .enumerate()
        .filter(|(_, ue)| {
            project_bbox(camera, ue).is_some() && !los_visible(scene, ue.position, scene.bs_position)
        })
        .map(|(i, _)| i)
        .collect()
}

/// Optimal beam set of the image taken by `scene.cameras[camera]`.
pub fn scene_beam_set(scene: &Scene, camera: usize, cb: &Codebook, model: &ChannelModel) -> Result<BeamSet> {
    let cam = scene.cameras.get(camera).ok_or_else(|| {
        Error::InvalidConfig(format!("scene has no camera {camera}"))
    })?;
    let candidates = candidate_ues(scene, cam);
    let mut set = BeamSet::new();
    if candidates.is_empty() {
        return Ok(set);
    }
    let h_t = model.bs_channel(scene);
    for ue in candidates {
        let link = model.link_with(scene, &h_t, ue);
        set.insert(best_beam(&link, cb)?);
    }
    Ok(set)
}

/// One-based indices of the `k` highest scores, best first; ties go to the
/// lower index.
pub fn top_k(scores: &[f64], k: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    order.truncate(k);
    order.into_iter().map(|i| i + 1).collect()
}

/// Best rate found by sweeping the `k` top-scoring beams.
pub fn topk_trained_rate(scores: &[f64], k: usize, link: &LinkChannels, cb: &Codebook) -> Result<f64> {
    if scores.len() != cb.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} scores for {} beams",
            scores.len(),
            cb.len()
        )));
    }
    if k == 0 || k > cb.len() {
        return Err(Error::InvalidConfig(format!("k = {k} outside 1..={}", cb.len())));
    }
    let g = cascade(link)?;
    Ok(top_k(scores, k)
        .into_iter()
        .map(|q| rate_from_cascade(&g, link.snr, &cb.beams()[q - 1]))
        .fold(0.0, f64::max))
}
