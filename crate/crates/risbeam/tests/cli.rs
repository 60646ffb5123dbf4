use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rand::SeedableRng;
use risbeam::formats::{read_manifest, save_model};
use risbeam_core::setnet::{NetShape, SetNetwork, Variant};

fn smoke() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/smoke.toml")
}

fn risbeam(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_risbeam"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = risbeam(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn err(args: &[&str]) -> String {
    let out = risbeam(args);
    assert!(!out.status.success(), "{args:?} unexpectedly succeeded");
    String::from_utf8(out.stderr).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn gen(dir: &Path) {
    ok(&["gen", "--config", s(&smoke()), "--out", s(dir)]);
}

#[test]
fn gen_writes_one_dataset_per_camera_and_is_repeatable() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    gen(a.path());
    gen(b.path());
    let m = read_manifest(&a.path().join("manifest.json")).unwrap();
    assert_eq!(m.scene_ids, (0..200).collect::<Vec<u64>>());
    assert_eq!(m.cameras.len(), 2);
    for cam in &m.cameras {
        let name = &cam.dataset;
        assert_eq!(cam.samples + cam.empty_beam_sets, 200);
        assert_eq!(fs::read(a.path().join(name)).unwrap(), fs::read(b.path().join(name)).unwrap());
    }
    assert_eq!(
        fs::read(a.path().join("scenes.jsonl")).unwrap(),
        fs::read(b.path().join("scenes.jsonl")).unwrap()
    );
}

#[test]
fn seed_flag_changes_the_data() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    gen(a.path());
    ok(&["gen", "--config", s(&smoke()), "--seed", "99", "--out", s(b.path())]);
    let read = |d: &Path| fs::read(d.join("dataset_cam0.txt")).unwrap();
    assert_ne!(read(a.path()), read(b.path()));
    assert_eq!(read_manifest(&b.path().join("manifest.json")).unwrap().seed, 99);
}

#[test]
fn config_without_cameras_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let text = fs::read_to_string(smoke()).unwrap();
    let start = text.find("cameras = [").unwrap();
    let end = start + text[start..].find("\n]").unwrap() + 2;
    let cfg = dir.path().join("nocam.toml");
    fs::write(&cfg, format!("{}cameras = []{}", &text[..start], &text[end..])).unwrap();
    let msg = err(&["gen", "--config", s(&cfg), "--out", s(&dir.path().join("out"))]);
    assert!(msg.contains("camera"), "{msg}");
}

#[test]
fn unwritable_output_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("plain");
    fs::write(&file, "x").unwrap();
    err(&["gen", "--config", s(&smoke()), "--out", s(&file.join("sub"))]);
}

#[test]
fn unknown_variant_lists_valid_tags() {
    let dir = tempfile::tempdir().unwrap();
    gen(dir.path());
    let ds = dir.path().join("dataset_cam0.txt");
    let msg = err(&[
        "train", "--config", s(&smoke()), "--out", s(dir.path()), "--dataset", s(&ds), "--variant", "transformer",
    ]);
    for tag in ["set_sum", "reuse_concat", "vanilla_fc"] {
        assert!(msg.contains(tag), "{msg}");
    }
}

#[test]
fn missing_dataset_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let msg = err(&[
        "train", "--config", s(&smoke()), "--out", s(dir.path()), "--dataset", s(&dir.path().join("none.txt")),
    ]);
    assert!(msg.contains("none.txt"), "{msg}");
}

#[test]
fn dataset_from_another_config_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    gen(dir.path());
    let ds = dir.path().join("dataset_cam0.txt");
    let msg = err(&[
        "train", "--config", s(&smoke()), "--seed", "5", "--out", s(dir.path()), "--dataset", s(&ds),
    ]);
    assert!(msg.contains("config"), "{msg}");
}

#[test]
fn model_with_wrong_shape_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    gen(dir.path());
    let shape = NetShape {
        rows: 6,
        u_max: 8,
        q_size: 32,
    };
    let net = SetNetwork::new(Variant::SetSum, shape, &[4], &mut rand_chacha::ChaCha8Rng::seed_from_u64(0)).unwrap();
    let model = dir.path().join("wrong.ckpt");
    save_model(&model, &net).unwrap();
    let ds = dir.path().join("dataset_cam0.txt");
    let msg = err(&[
        "eval", "--config", s(&smoke()), "--out", s(dir.path()), "--dataset", s(&ds), "--model", s(&model),
    ]);
    assert!(msg.contains("model expects"), "{msg}");
}

#[test]
fn train_eval_sweep_round() {
    let dir = tempfile::tempdir().unwrap();
    gen(dir.path());
    let ds = dir.path().join("dataset_cam1.txt");
    let out = ok(&["train", "--config", s(&smoke()), "--out", s(dir.path()), "--dataset", s(&ds)]);
    assert!(out.contains("epoch 20"), "{out}");
    let model = dir.path().join("model_set_sum_cam1.ckpt");
    let curves = fs::read_to_string(dir.path().join("curves_set_sum_cam1.csv")).unwrap();
    assert_eq!(curves.lines().next(), Some("epoch,train_loss,test_loss"));
    assert_eq!(curves.lines().count(), 21);
    let last_test: f64 = curves.lines().last().unwrap().split(',').nth(2).unwrap().parse().unwrap();
    assert!(last_test < std::f64::consts::LN_2);

    ok(&["eval", "--config", s(&smoke()), "--out", s(dir.path()), "--dataset", s(&ds), "--model", s(&model)]);
    let eval = fs::read_to_string(dir.path().join("eval_model_set_sum_cam1.csv")).unwrap();
    assert!(eval.starts_with("model,camera_id,n_test,n_recall,accuracy,recall\nmodel_set_sum_cam1,1,"));

    ok(&[
        "sweep", "--config", s(&smoke()), "--out", s(dir.path()), "--dataset", s(&ds), "--model", s(&model), "--k",
        "64,8,1,8",
    ]);
    let sweep = fs::read_to_string(dir.path().join("sweep_model_set_sum_cam1.csv")).unwrap();
    let ks: Vec<&str> = sweep.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(ks, ["1", "8", "64"]);
    assert!(sweep.ends_with("64,1.0\n"), "{sweep}");
}

#[test]
fn sweep_rejects_out_of_range_k() {
    let dir = tempfile::tempdir().unwrap();
    gen(dir.path());
    let ds = dir.path().join("dataset_cam0.txt");
    ok(&["train", "--config", s(&smoke()), "--out", s(dir.path()), "--dataset", s(&ds), "--variant", "vanilla_fc"]);
    let model = dir.path().join("model_vanilla_fc_cam0.ckpt");
    err(&[
        "sweep", "--config", s(&smoke()), "--out", s(dir.path()), "--dataset", s(&ds), "--model", s(&model), "--k", "65",
    ]);
}
