//! The four pipeline stages: generate, train, evaluate, sweep.

use std::fs;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use rayon::prelude::*;
use risbeam_core::channel::{ChannelModel, FreqChannel};
use risbeam_core::codebook::Codebook;
use risbeam_core::dataset::{encode_input, encode_label, split, Dataset, DatasetMeta, Sample};
use risbeam_core::detector::detect;
use risbeam_core::metrics::{rate_ratio_curve, EvalReport};
use risbeam_core::rate::{candidate_ues, BeamRates, BeamSet};
use risbeam_core::rng::{stream_rng, Stream};
use risbeam_core::scene::{generate_scene, Scene};
use risbeam_core::setnet::{train, LearningCurves, NetShape, SetNetwork, Variant};

use crate::formats::{self, CameraEntry, ComplexArray, Manifest};
use crate::{Error, Result, RunConfig};

pub const MANIFEST_FORMAT: &str = "risbeam-manifest 1";

/// Anything that maps an input sample to per-beam scores in `[0, 1]`.
pub trait Scorer: Sync {
    fn scores(&self, sample: &Sample) -> Result<Vec<f64>>;
}

impl Scorer for SetNetwork {
    fn scores(&self, sample: &Sample) -> Result<Vec<f64>> {
        Ok(self.forward(&sample.v)?)
    }
}

/// Scores each sample with its own label.
#[derive(Debug, Clone, Copy, Default)]
pub struct OracleScorer;

impl Scorer for OracleScorer {
    fn scores(&self, sample: &Sample) -> Result<Vec<f64>> {
        Ok(sample.target())
    }
}

/// One scene with its per-camera samples; `None` where the image has no
/// candidate UE.
#[derive(Debug, Clone)]
pub struct SceneOutcome {
    pub scene: Scene,
    pub samples: Vec<Option<Sample>>,
}

pub struct Generated {
    pub scenes: Vec<Scene>,
    pub datasets: Vec<Dataset>,
    pub empty_beam_sets: Vec<usize>,
}

/// Per-beam rates of every candidate UE of `camera` in `scene`.
pub fn candidate_rates(scene: &Scene, camera: usize, model: &ChannelModel, cb: &Codebook) -> Result<Vec<BeamRates>> {
    let cam = scene
        .cameras
        .get(camera)
        .ok_or_else(|| Error::Mismatch(format!("scene has no camera {camera}")))?;
    let cands = candidate_ues(scene, cam);
    if cands.is_empty() {
        return Ok(Vec::new());
    }
    let h_t = model.bs_channel(scene);
    cands
        .into_iter()
        .map(|u| Ok(BeamRates::compute(&model.link_with(scene, &h_t, u), cb)?))
        .collect()
}

/// Scene, oracle labels and detector inputs for scene `index`.
pub fn process_scene(cfg: &RunConfig, model: &ChannelModel, cb: &Codebook, index: u64) -> Result<SceneOutcome> {
    let scene = generate_scene(&cfg.scenario, index)?;
    let cameras = &scene.cameras;
    let cands: Vec<Vec<usize>> = cameras.iter().map(|c| candidate_ues(&scene, c)).collect();
    let mut best = vec![None; scene.ues.len()];
    if cands.iter().any(|c| !c.is_empty()) {
        let h_t = model.bs_channel(&scene);
        for &u in cands.iter().flatten() {
            if best[u].is_none() {
                best[u] = Some(BeamRates::compute(&model.link_with(&scene, &h_t, u), cb)?.best_beam());
            }
        }
    }
    let num_classes = cfg.num_classes();
    let mut samples = Vec::with_capacity(cameras.len());
    for (c, cam) in cameras.iter().enumerate() {
        let q_star: BeamSet = cands[c].iter().map(|&u| best[u].expect("computed above")).collect();
        if q_star.is_empty() {
            samples.push(None);
            continue;
        }
        let mut rng = stream_rng(scene.scene_seed, Stream::Detector, c as u64);
        let dets = detect(&scene, cam, num_classes, &cfg.detector, &mut rng);
        samples.push(Some(Sample {
            scene_id: index,
            camera_id: c,
            v: encode_input(&dets, num_classes, cfg.u_max, cam),
            t_star: encode_label(&q_star, cb.len())?,
        }));
    }
    Ok(SceneOutcome { scene, samples })
}

/// Runs generation in memory; scenes are processed in parallel and
/// collected in index order.
pub fn generate(cfg: &RunConfig) -> Result<Generated> {
    cfg.validate()?;
    let model = cfg.channel_model();
    let cb = cfg.build_codebook()?;
    let outcomes: Vec<SceneOutcome> = (0..cfg.scenes)
        .into_par_iter()
        .map(|i| process_scene(cfg, &model, &cb, i))
        .collect::<Result<_>>()?;

    let hash = cfg.hash();
    let n_cam = cfg.scenario.cameras.len();
    let mut datasets = Vec::with_capacity(n_cam);
    let mut empty = vec![0; n_cam];
    for (c, cam) in cfg.scenario.cameras.iter().enumerate() {
        let samples: Vec<Sample> = outcomes.iter().filter_map(|o| o.samples[c].clone()).collect();
        empty[c] = outcomes.len() - samples.len();
        datasets.push(Dataset {
            meta: DatasetMeta {
                num_classes: cfg.num_classes(),
                u_max: cfg.u_max,
                q_size: cb.len(),
                image_width: cam.width,
                image_height: cam.height,
                camera_id: c,
                split_seed: cfg.seed,
                count: samples.len(),
                config_hash: hash.clone(),
            },
            samples,
        });
    }
    Ok(Generated {
        scenes: outcomes.into_iter().map(|o| o.scene).collect(),
        datasets,
        empty_beam_sets: empty,
    })
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

pub fn dataset_file_name(camera: usize) -> String {
    format!("dataset_cam{camera}.txt")
}

/// `dims = [M, N, K]`, entry `(m, n, k)` at `(m * N + n) * K + k`.
fn freq_to_array(h: &FreqChannel) -> ComplexArray {
    let (m, n, k) = (h.rows, h.cols, h.subcarriers);
    let mut data = vec![Complex64::new(0.0, 0.0); m * n * k];
    for kk in 0..k {
        for (e, z) in h.subcarrier(kk).iter().enumerate() {
            data[e * k + kk] = *z;
        }
    }
    ComplexArray {
        dims: [m as u64, n as u64, k as u64],
        data,
    }
}

/// Codebook as `dims = [M, 1, |Q|]`; beam `q` is the last index `q - 1`.
pub fn codebook_array(cb: &Codebook) -> ComplexArray {
    let m = cb.geometry().len();
    let q = cb.len();
    let mut data = vec![Complex64::new(0.0, 0.0); m * q];
    for (j, beam) in cb.beams().iter().enumerate() {
        for (i, z) in beam.iter().enumerate() {
            data[i * q + j] = *z;
        }
    }
    ComplexArray {
        dims: [m as u64, 1, q as u64],
        data,
    }
}

fn dump_channels(cfg: &RunConfig, scenes: &[Scene], dir: &Path) -> Result<()> {
    ensure_dir(dir)?;
    let model = cfg.channel_model();
    scenes.par_iter().try_for_each(|s| {
        let id = s.scene_index;
        formats::write_complex(&dir.join(format!("scene{id:05}_bs.bin")), &freq_to_array(&model.bs_channel(s)))?;
        for (u, ue) in s.ues.iter().enumerate() {
            let name = format!("scene{id:05}_ue{}.bin", ue.id);
            formats::write_complex(&dir.join(name), &freq_to_array(&model.ue_channel(s, u)))?;
        }
        Ok(())
    })
}

/// `gen`: writes one dataset per camera, the scenes, the codebook and a
/// manifest into `out`.
pub fn run_gen(cfg: &RunConfig, out: &Path, with_channels: bool) -> Result<Manifest> {
    cfg.validate()?;
    ensure_dir(out)?;
    let g = generate(cfg)?;
    let mut cameras = Vec::new();
    for (c, ds) in g.datasets.iter().enumerate() {
        let name = dataset_file_name(c);
        formats::write_dataset(&out.join(&name), ds)?;
        cameras.push(CameraEntry {
            camera_id: c,
            dataset: name,
            samples: ds.samples.len(),
            empty_beam_sets: g.empty_beam_sets[c],
        });
    }
    formats::write_scenes(&out.join("scenes.jsonl"), &g.scenes)?;
    formats::write_complex(&out.join("codebook.bin"), &codebook_array(&cfg.build_codebook()?))?;
    if with_channels {
        dump_channels(cfg, &g.scenes, &out.join("channels"))?;
    }
    let manifest = Manifest {
        format: MANIFEST_FORMAT.into(),
        seed: cfg.seed,
        config_hash: cfg.hash(),
        scenes: cfg.scenes,
        ues: g.scenes.iter().map(|s| s.ues.len()).sum(),
        scene_ids: g.scenes.iter().map(|s| s.scene_index).collect(),
        cameras,
    };
    formats::write_manifest(&out.join("manifest.json"), &manifest)?;
    Ok(manifest)
}

/// Loads a dataset and checks that it came from `cfg`.
pub fn load_dataset(cfg: &RunConfig, path: &Path) -> Result<Dataset> {
    let ds = formats::read_dataset(path)?;
    if ds.meta.config_hash != cfg.hash() {
        return Err(Error::Mismatch(format!(
            "{} was generated from config {}, current config is {}",
            path.display(),
            ds.meta.config_hash,
            cfg.hash()
        )));
    }
    Ok(ds)
}

pub fn shape_of(meta: &DatasetMeta) -> NetShape {
    NetShape {
        rows: meta.rows(),
        u_max: meta.u_max,
        q_size: meta.q_size,
    }
}

/// Rejects a model whose input or output size differs from the dataset's.
pub fn check_compatible(net: &SetNetwork, meta: &DatasetMeta) -> Result<()> {
    let want = shape_of(meta);
    if net.shape() != want {
        return Err(Error::Mismatch(format!(
            "model expects {:?}, dataset provides {want:?}",
            net.shape()
        )));
    }
    Ok(())
}

/// Seeded `(train, test)` split of a dataset.
pub fn split_dataset(ds: &Dataset, train_fraction: f64) -> Result<(Vec<Sample>, Vec<Sample>)> {
    Ok(split(ds.samples.clone(), train_fraction, ds.meta.split_seed)?)
}

pub fn train_on(cfg: &RunConfig, ds: &Dataset, variant: Variant) -> Result<(SetNetwork, LearningCurves)> {
    let (train_set, test_set) = split_dataset(ds, cfg.train_fraction)?;
    Ok(train(variant, shape_of(&ds.meta), &train_set, &test_set, &cfg.train, &mut |_| {})?)
}

pub fn model_file_name(variant: Variant, camera: usize) -> String {
    format!("model_{variant}_cam{camera}.ckpt")
}

pub struct TrainOutputs {
    pub model: PathBuf,
    pub curves: PathBuf,
    pub net: SetNetwork,
    pub history: LearningCurves,
}

/// `train`: fits `variant` on the training split; writes the checkpoint and
/// the learning curves.
pub fn run_train(cfg: &RunConfig, dataset: &Path, variant: Variant, out: &Path) -> Result<TrainOutputs> {
    cfg.train.validate()?;
    let ds = load_dataset(cfg, dataset)?;
    ensure_dir(out)?;
    let (net, history) = train_on(cfg, &ds, variant)?;
    let c = ds.meta.camera_id;
    let model = out.join(model_file_name(variant, c));
    let curves = out.join(format!("curves_{variant}_cam{c}.csv"));
    formats::save_model(&model, &net)?;
    formats::write_text(&curves, &formats::curves_csv(&history))?;
    Ok(TrainOutputs {
        model,
        curves,
        net,
        history,
    })
}

/// Accuracy and recall of `scorer` on `samples`.
pub fn evaluate(scorer: &dyn Scorer, samples: &[Sample], threshold: f64) -> Result<EvalReport> {
    let scores: Vec<Vec<f64>> = samples.par_iter().map(|s| scorer.scores(s)).collect::<Result<_>>()?;
    Ok(EvalReport::from_scores(
        samples
            .iter()
            .zip(&scores)
            .map(|(s, t)| (s.scene_id, s.beam_set(), t.as_slice())),
        threshold,
    ))
}

/// Top-`k` rate ratios of `scorer` on `samples`; scenes are regenerated
/// from `cfg`.
pub fn rate_ratios(cfg: &RunConfig, scorer: &dyn Scorer, samples: &[Sample], ks: &[usize]) -> Result<Vec<(usize, f64)>> {
    let model = cfg.channel_model();
    let cb = cfg.build_codebook()?;
    let per_sample: Vec<(Vec<f64>, Vec<BeamRates>)> = samples
        .par_iter()
        .map(|s| {
            let scene = generate_scene(&cfg.scenario, s.scene_id)?;
            Ok((scorer.scores(s)?, candidate_rates(&scene, s.camera_id, &model, &cb)?))
        })
        .collect::<Result<_>>()?;
    let (scores, rates): (Vec<_>, Vec<_>) = per_sample.into_iter().unzip();
    Ok(rate_ratio_curve(&scores, &rates, ks)?)
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "model".into())
}

fn load_for_eval(cfg: &RunConfig, dataset: &Path, model: &Path) -> Result<(SetNetwork, Dataset, Vec<Sample>)> {
    let ds = load_dataset(cfg, dataset)?;
    let net = formats::load_model(model)?;
    check_compatible(&net, &ds.meta)?;
    let (_, test) = split_dataset(&ds, cfg.train_fraction)?;
    Ok((net, ds, test))
}

/// `eval`: accuracy and recall on the test split. Writes
/// `eval_<model>.csv` and `eval_<model>_samples.csv`.
pub fn run_eval(cfg: &RunConfig, dataset: &Path, model: &Path, out: &Path) -> Result<EvalReport> {
    let (net, ds, test) = load_for_eval(cfg, dataset, model)?;
    ensure_dir(out)?;
    let report = evaluate(&net, &test, cfg.threshold)?;
    let label = stem(model);
    formats::write_text(
        &out.join(format!("eval_{label}.csv")),
        &formats::eval_csv(&label, ds.meta.camera_id, &report),
    )?;
    formats::write_text(&out.join(format!("eval_{label}_samples.csv")), &formats::eval_samples_csv(&report))?;
    Ok(report)
}

/// `sweep`: rate ratio for each `k` on the test split. Writes
/// `sweep_<model>.csv`.
pub fn run_sweep(cfg: &RunConfig, dataset: &Path, model: &Path, ks: &[usize], out: &Path) -> Result<Vec<(usize, f64)>> {
    let (net, _, test) = load_for_eval(cfg, dataset, model)?;
    ensure_dir(out)?;
    let curve = rate_ratios(cfg, &net, &test, ks)?;
    formats::write_text(&out.join(format!("sweep_{}.csv", stem(model))), &formats::sweep_csv(&curve))?;
    Ok(curve)
}
