use std::f64::consts::FRAC_PI_2;

use risbeam_core::channel::{ChannelModel, PropagationConfig, RadioConfig, UpaGeometry};
use risbeam_core::codebook::build_codebook;
use risbeam_core::dataset::encode_input;
use risbeam_core::detector::{detect, DetectorNoise};
use risbeam_core::geometry::{Aabb, Vec3};
use risbeam_core::rate::{achievable_rate, candidate_ues, scene_beam_set, BeamSet};
use risbeam_core::rng::{stream_rng, Stream};
use risbeam_core::scene::{
    generate_scene, los_visible, project_bbox, BlockerSpec, CameraModel, RisPose, ScenarioConfig, UeClassSpec,
};

fn scenario(blockers: Vec<BlockerSpec>) -> ScenarioConfig {
    ScenarioConfig {
        ris_pose: RisPose {
            position: Vec3::new(0.0, 0.0, 6.0),
            yaw: FRAC_PI_2,
            tilt: 0.0,
        },
        bs_position: Vec3::new(0.0, 80.0, 12.0),
        street_axis: Vec3::new(1.0, 0.0, 0.0),
        ue_count_range: [2, 6],
        ue_speed_range: [0.0, 10.0],
        ue_region: Aabb::new(Vec3::new(-30.0, 5.0, 0.75), Vec3::new(30.0, 18.0, 1.6)),
        ue_classes: vec![
            UeClassSpec {
                weight: 0.6,
                extents: Vec3::new(4.5, 1.8, 1.5),
            },
            UeClassSpec {
                weight: 0.4,
                extents: Vec3::new(9.0, 2.5, 3.2),
            },
        ],
        blockers,
        cameras: vec![CameraModel {
            position: Vec3::new(0.0, 0.0, 6.5),
            yaw: FRAC_PI_2,
            pitch: -0.35,
            horizontal_fov: 100f64.to_radians(),
            width: 640,
            height: 480,
        }],
        master_seed: 11,
    }
}

fn buildings() -> Vec<BlockerSpec> {
    [-57.5, 57.5]
        .into_iter()
        .map(|x| BlockerSpec {
            center: Vec3::new(x, 40.0, 15.0),
            extents: Vec3::new(105.0, 40.0, 30.0),
        })
        .collect()
}

fn model() -> ChannelModel {
    ChannelModel {
        ris: UpaGeometry::new(4, 4),
        bs: UpaGeometry::new(2, 1),
        radio: RadioConfig {
            subcarriers: 16,
            taps: 8,
            noise_var: 1e-14,
            ..RadioConfig::default()
        },
        propagation: PropagationConfig {
            max_scatter_paths: 2,
            scatter_region: Aabb::new(Vec3::new(-40.0, 18.5, 0.0), Vec3::new(40.0, 19.9, 20.0)),
            reflection_gain: 0.5,
        },
    }
}

#[test]
fn oracle_set_is_argmax_over_candidates() {
    let cfg = scenario(buildings());
    let model = model();
    let cb = build_codebook(&model.ris, 4, 4).unwrap();
    let mut nonempty = 0;
    for i in 0..40 {
        let scene = generate_scene(&cfg, i).unwrap();
        let cam = &scene.cameras[0];
        let mut expected = BeamSet::new();
        for (u, ue) in scene.ues.iter().enumerate() {
            let candidate = project_bbox(cam, ue).is_some() && !los_visible(&scene, ue.position, scene.bs_position);
            assert_eq!(candidate, candidate_ues(&scene, cam).contains(&u));
            if !candidate {
                continue;
            }
            let link = model.link(&scene, u);
            let rates: Vec<f64> = cb.beams().iter().map(|psi| achievable_rate(&link, psi).unwrap()).collect();
            let mut best = 0;
            for q in 1..rates.len() {
                if rates[q] > rates[best] {
                    best = q;
                }
            }
            expected.insert(best + 1);
        }
        let got = scene_beam_set(&scene, 0, &cb, &model).unwrap();
        nonempty += usize::from(!got.is_empty());
        assert_eq!(got, expected, "scene {i}");
    }
    assert!(nonempty > 0);
}

#[test]
fn open_street_has_no_candidates() {
    let cfg = scenario(vec![]);
    let model = model();
    let cb = build_codebook(&model.ris, 4, 4).unwrap();
    for i in 0..20 {
        let scene = generate_scene(&cfg, i).unwrap();
        assert!(candidate_ues(&scene, &scene.cameras[0]).is_empty());
        assert!(scene_beam_set(&scene, 0, &cb, &model).unwrap().is_empty());
    }
}

#[test]
fn noiseless_detections_encode_visible_ues() {
    let cfg = scenario(buildings());
    for i in 0..20 {
        let scene = generate_scene(&cfg, i).unwrap();
        let cam = &scene.cameras[0];
        let mut rng = stream_rng(scene.scene_seed, Stream::Detector, 0);
        let dets = detect(&scene, cam, 2, &DetectorNoise::none(), &mut rng);
        let visible: Vec<_> = scene.ues.iter().filter(|ue| project_bbox(cam, ue).is_some()).collect();
        assert_eq!(dets.len(), visible.len());
        let v = encode_input(&dets, 2, 8, cam);
        for col in v.chunks(6).take(dets.len().min(8)) {
            assert_eq!(col[0] + col[1], 1.0);
            assert!(col[2..].iter().all(|x| (0.0..=1.0).contains(x)));
        }
        assert!(v.chunks(6).skip(dets.len()).all(|c| c.iter().all(|&x| x == 0.0)));
    }
}
