//! Thresholding, set accuracy and recall, and top-k rate ratios.
//!
//! Per-sample precision with an empty prediction counts as 1 when the
//! optimal set is empty too and 0 otherwise. Samples with an empty optimal
//! set do not enter the recall average.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::rate::{top_k, BeamRates, BeamSet};
use crate::{Error, Result};

/// Beams whose score is strictly above `delta`.
pub fn threshold(t: &[f64], delta: f64) -> BeamSet {
    t.iter()
        .enumerate()
        .filter(|(_, &x)| x > delta)
        .map(|(i, _)| i + 1)
        .collect()
}

/// `|Q* ∩ Q̂| / |Q̂|` for one sample.
pub fn sample_precision(q_star: &BeamSet, q_hat: &BeamSet) -> f64 {
    if q_hat.is_empty() {
        return if q_star.is_empty() { 1.0 } else { 0.0 };
    }
    q_star.intersection_len(q_hat) as f64 / q_hat.len() as f64
}

/// `|Q* ∩ Q̂| / |Q*|` for one sample, `None` when `Q*` is empty.
pub fn sample_recall(q_star: &BeamSet, q_hat: &BeamSet) -> Option<f64> {
    (!q_star.is_empty()).then(|| q_star.intersection_len(q_hat) as f64 / q_star.len() as f64)
}

/// Mean per-sample precision over `(Q*, Q̂)` pairs; zero for no pairs.
pub fn accuracy(pairs: &[(BeamSet, BeamSet)]) -> f64 {
    if pairs.is_empty() {
        return 0.0;
    }
    pairs.iter().map(|(s, h)| sample_precision(s, h)).sum::<f64>() / pairs.len() as f64
}

/// Mean per-sample recall over the pairs with a nonempty `Q*`.
pub fn recall(pairs: &[(BeamSet, BeamSet)]) -> f64 {
    let vals: Vec<f64> = pairs.iter().filter_map(|(s, h)| sample_recall(s, h)).collect();
    if vals.is_empty() {
        0.0
    } else {
        vals.iter().sum::<f64>() / vals.len() as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub scene_id: u64,
    pub q_star: Vec<usize>,
    pub q_hat: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub accuracy: f64,
    pub recall: f64,
    pub n_test: usize,
    /// Samples that entered the recall average.
    pub n_recall: usize,
    pub records: Vec<SampleRecord>,
}

impl EvalReport {
    /// Scores every `(scene_id, Q*, scores)` triple at threshold `delta`.
    pub fn from_scores<'a, I>(samples: I, delta: f64) -> Self
    where
        I: IntoIterator<Item = (u64, BeamSet, &'a [f64])>,
    {
        let mut pairs = Vec::new();
        let mut records = Vec::new();
        for (scene_id, q_star, scores) in samples {
            let q_hat = threshold(scores, delta);
            records.push(SampleRecord {
                scene_id,
                q_star: q_star.iter().collect(),
                q_hat: q_hat.iter().collect(),
            });
            pairs.push((q_star, q_hat));
        }
        Self {
            accuracy: accuracy(&pairs),
            recall: recall(&pairs),
            n_test: pairs.len(),
            n_recall: pairs.iter().filter(|(s, _)| !s.is_empty()).count(),
            records,
        }
    }
}

/// Mean ratio of the best rate among the `k` top-scoring beams to the
/// exhaustive-search rate, for each `k`.
///
/// `ue_rates[i]` holds the per-beam rates of every qualifying UE of sample
/// `i`. Ratios are averaged over the UEs of a sample, then over samples;
/// samples without UEs are skipped. The returned `k` values are sorted and
/// deduplicated.
pub fn rate_ratio_curve(scores: &[Vec<f64>], ue_rates: &[Vec<BeamRates>], k_values: &[usize]) -> Result<Vec<(usize, f64)>> {
    if scores.len() != ue_rates.len() {
        return Err(Error::DimensionMismatch(alloc::format!(
            "{} score vectors for {} samples",
            scores.len(),
            ue_rates.len()
        )));
    }
    let mut ks = k_values.to_vec();
    ks.sort_unstable();
    ks.dedup();
    let mut sums = alloc::vec![0.0; ks.len()];
    let mut n = 0usize;
    for (s, ues) in scores.iter().zip(ue_rates) {
        let ues: Vec<&BeamRates> = ues.iter().filter(|r| r.best_rate() > 0.0).collect();
        if ues.is_empty() {
            continue;
        }
        for (slot, &k) in ks.iter().enumerate() {
            if k == 0 || k > s.len() {
                return Err(Error::InvalidConfig(alloc::format!("k = {k} outside 1..={}", s.len())));
            }
            let beams = top_k(s, k);
            let mut acc = 0.0;
            for r in &ues {
                if r.0.len() != s.len() {
                    return Err(Error::DimensionMismatch(alloc::format!(
                        "{} scores for {} beams",
                        s.len(),
                        r.0.len()
                    )));
                }
                acc += r.best_among(beams.iter().copied()) / r.best_rate();
            }
            sums[slot] += acc / ues.len() as f64;
        }
        n += 1;
    }
    if n == 0 {
        return Err(Error::NotEnoughSamples { needed: 1, got: 0 });
    }
    Ok(ks.into_iter().zip(sums).map(|(k, s)| (k, s / n as f64)).collect())
}
