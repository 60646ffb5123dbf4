//! Run configuration: one TOML file drives generation, training and evaluation.

use std::f64::consts::FRAC_PI_2;
use std::path::Path;

use risbeam_core::channel::{ChannelModel, PropagationConfig, Pulse, RadioConfig, UpaGeometry};
use risbeam_core::codebook::{build_codebook, Codebook};
use risbeam_core::detector::DetectorNoise;
use risbeam_core::geometry::{Aabb, Vec3};
use risbeam_core::scene::{BlockerSpec, CameraModel, RisPose, ScenarioConfig, UeClassSpec};
use risbeam_core::setnet::{OptimizerKind, TrainConfig};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CodebookGrid {
    pub azimuth: usize,
    pub elevation: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    /// Root of every random stream. Overrides `scenario.master_seed` and
    /// `train.seed`, and doubles as the train/test split seed.
    pub seed: u64,
    pub scenes: u64,
    pub u_max: usize,
    pub train_fraction: f64,
    /// Score threshold for the predicted beam set.
    pub threshold: f64,
    pub scenario: ScenarioConfig,
    pub radio: RadioConfig,
    pub ris: UpaGeometry,
    pub bs: UpaGeometry,
    pub codebook: CodebookGrid,
    pub propagation: PropagationConfig,
    pub detector: DetectorNoise,
    pub train: TrainConfig,
}

impl RunConfig {
    /// Desk-scale benchmark: an 8x8 RIS on a street corner, a 64-beam
    /// codebook and 2000 scenes seen by one camera next to the RIS.
    pub fn benchmark() -> Self {
        let building = |x: f64| BlockerSpec {
            center: Vec3::new(x, 40.0, 15.0),
            extents: Vec3::new(105.0, 40.0, 30.0),
        };
        Self {
            seed: 7,
            scenes: 2000,
            u_max: 8,
            train_fraction: 0.8,
            threshold: 0.5,
            scenario: ScenarioConfig {
                ris_pose: RisPose {
                    position: Vec3::new(0.0, 0.0, 6.0),
                    yaw: FRAC_PI_2,
                    tilt: 0.0,
                },
                bs_position: Vec3::new(0.0, 80.0, 12.0),
                street_axis: Vec3::new(1.0, 0.0, 0.0),
                ue_count_range: [1, 6],
                ue_speed_range: [0.0, 15.0],
                ue_region: Aabb::new(Vec3::new(-30.0, 5.0, 0.75), Vec3::new(30.0, 18.0, 1.6)),
                ue_classes: vec![
                    UeClassSpec {
                        weight: 0.7,
                        extents: Vec3::new(4.5, 1.8, 1.5),
                    },
                    UeClassSpec {
                        weight: 0.3,
                        extents: Vec3::new(9.0, 2.5, 3.2),
                    },
                ],
                blockers: vec![building(-57.5), building(57.5)],
                cameras: vec![CameraModel {
                    position: Vec3::new(0.0, 0.0, 6.5),
                    yaw: FRAC_PI_2,
                    pitch: -0.35,
                    horizontal_fov: 110f64.to_radians(),
                    width: 800,
                    height: 600,
                }],
                master_seed: 7,
            },
            radio: RadioConfig {
                subcarriers: 64,
                sample_period: 1e-8,
                taps: 32,
                tx_power: 1.0,
                noise_var: 1e-14,
                pathloss: 1.0,
                pulse: Pulse::Sinc,
                carrier_hz: 28e9,
            },
            ris: UpaGeometry::new(8, 8),
            bs: UpaGeometry::new(2, 2),
            codebook: CodebookGrid {
                azimuth: 8,
                elevation: 8,
            },
            propagation: PropagationConfig {
                max_scatter_paths: 3,
                scatter_region: Aabb::new(Vec3::new(-40.0, 18.5, 0.0), Vec3::new(40.0, 19.9, 20.0)),
                reflection_gain: 0.5,
            },
            detector: DetectorNoise::default(),
            train: TrainConfig {
                learning_rate: 3e-3,
                optimizer: OptimizerKind::Adam {
                    beta1: 0.9,
                    beta2: 0.999,
                    eps: 1e-8,
                },
                seed: 7,
                ..TrainConfig::default()
            },
        }
    }

    pub fn from_toml(text: &str) -> Result<Self, Error> {
        let mut cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.apply_seed(cfg.seed);
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, Error> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is representable as TOML")
    }

    /// Sets the root seed and every seed derived from it.
    pub fn apply_seed(&mut self, seed: u64) {
        self.seed = seed;
        self.scenario.master_seed = seed;
        self.train.seed = seed;
    }

    pub fn with_seed(mut self, seed: Option<u64>) -> Self {
        if let Some(s) = seed {
            self.apply_seed(s);
        }
        self
    }

    pub fn validate(&self) -> Result<(), Error> {
        if self.scenario.cameras.is_empty() {
            return Err(Error::Config("at least one camera is required".into()));
        }
        if self.scenes == 0 {
            return Err(Error::Config("scenes must be positive".into()));
        }
        if self.u_max == 0 {
            return Err(Error::Config("u_max must be positive".into()));
        }
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return Err(Error::Config("threshold must be in (0, 1)".into()));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::Config("train_fraction must be in (0, 1)".into()));
        }
        self.scenario.validate(self.u_max)?;
        self.radio.validate()?;
        self.ris.validate()?;
        self.bs.validate()?;
        self.detector.validate()?;
        self.train.validate()?;
        if self.propagation.max_scatter_paths > 0 && !(self.propagation.scatter_region.volume() > 0.0) {
            return Err(Error::Config("scatter_region has zero volume".into()));
        }
        self.build_codebook()?;
        Ok(())
    }

    /// Hex SHA-256 of the canonical JSON form of everything that shapes the
    /// generated data. Training and evaluation settings are left out.
    pub fn hash(&self) -> String {
        let mut value = serde_json::to_value(self).expect("config serializes");
        let map = value.as_object_mut().expect("config is a JSON object");
        for key in ["train", "train_fraction", "threshold"] {
            map.remove(key);
        }
        hex::encode(Sha256::digest(value.to_string().as_bytes()))
    }

    pub fn num_classes(&self) -> usize {
        self.scenario.num_classes()
    }

    pub fn q_size(&self) -> usize {
        self.codebook.azimuth * self.codebook.elevation
    }

    pub fn channel_model(&self) -> ChannelModel {
        ChannelModel {
            ris: self.ris,
            bs: self.bs,
            radio: self.radio,
            propagation: self.propagation,
        }
    }

    pub fn build_codebook(&self) -> Result<Codebook, Error> {
        Ok(build_codebook(&self.ris, self.codebook.azimuth, self.codebook.elevation)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn benchmark_is_valid() {
        let cfg = RunConfig::benchmark();
        cfg.validate().unwrap();
        assert_eq!(cfg.q_size(), 64);
        assert_eq!(cfg.ris.len(), 64);
    }

    #[test]
    fn toml_round_trip() {
        let cfg = RunConfig::benchmark();
        let back = RunConfig::from_toml(&cfg.to_toml()).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.hash(), cfg.hash());
    }

    #[test]
    fn seed_propagates_and_changes_hash() {
        let cfg = RunConfig::benchmark();
        let other = cfg.clone().with_seed(Some(11));
        assert_eq!(other.scenario.master_seed, 11);
        assert_eq!(other.train.seed, 11);
        assert_ne!(other.hash(), cfg.hash());
        assert_eq!(cfg.clone().with_seed(None), cfg);
    }

    #[test]
    fn training_settings_do_not_change_hash() {
        let cfg = RunConfig::benchmark();
        let mut other = cfg.clone();
        other.train.epochs = 3;
        other.threshold = 0.7;
        assert_eq!(other.hash(), cfg.hash());
        other.radio.noise_var *= 2.0;
        assert_ne!(other.hash(), cfg.hash());
    }

    #[test]
    fn zero_cameras_rejected() {
        let mut cfg = RunConfig::benchmark();
        cfg.scenario.cameras.clear();
        assert!(cfg.validate().is_err());
    }
}
