//! Randomized street scenes and their geometry queries.

use alloc::format;
use alloc::vec::Vec;

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::geometry::{Aabb, Vec3};
use crate::rng::{stream_rng, Stream};
use crate::{Error, Result};

/// Position and orientation of the RIS.
///
/// `yaw` is the azimuth of the boresight (surface normal) in the horizontal
/// plane, measured from +x towards +y. `tilt` raises the boresight above the
/// horizon. Columns of the array run along the "right" axis, rows along "up".
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RisPose {
    pub position: Vec3,
    pub yaw: f64,
    #[serde(default)]
    pub tilt: f64,
}

impl RisPose {
    pub fn normal(&self) -> Vec3 {
        Vec3::new(
            libm::cos(self.yaw) * libm::cos(self.tilt),
            libm::sin(self.yaw) * libm::cos(self.tilt),
            libm::sin(self.tilt),
        )
    }

    /// Axis along the array columns.
    pub fn column_axis(&self) -> Vec3 {
        Vec3::new(libm::sin(self.yaw), -libm::cos(self.yaw), 0.0)
    }

    /// Axis along the array rows.
    pub fn row_axis(&self) -> Vec3 {
        self.column_axis().cross(self.normal())
    }

    /// Local `(azimuth, elevation)` of the direction from the RIS towards `point`.
    pub fn local_angles(&self, point: Vec3) -> (f64, f64) {
        let u = (point - self.position).normalized();
        let elevation = libm::asin(u.dot(self.row_axis()).clamp(-1.0, 1.0));
        let azimuth = libm::atan2(u.dot(self.column_axis()), u.dot(self.normal()));
        (azimuth, elevation)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraModel {
    pub position: Vec3,
    /// Heading in the horizontal plane, from +x towards +y.
    pub yaw: f64,
    /// Positive looks up.
    pub pitch: f64,
    pub horizontal_fov: f64,
    pub width: u32,
    pub height: u32,
}

impl CameraModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.horizontal_fov > 0.0 && self.horizontal_fov < core::f64::consts::PI) {
            return Err(Error::InvalidConfig(format!(
                "camera horizontal_fov {} outside (0, pi)",
                self.horizontal_fov
            )));
        }
        if self.width == 0 || self.height == 0 {
            return Err(Error::InvalidConfig("camera image size must be positive".into()));
        }
        Ok(())
    }

    /// Focal length in pixels, shared by both image axes.
    pub fn focal_px(&self) -> f64 {
        (self.width as f64 / 2.0) / libm::tan(self.horizontal_fov / 2.0)
    }

    pub fn forward(&self) -> Vec3 {
        Vec3::new(
            libm::cos(self.yaw) * libm::cos(self.pitch),
            libm::sin(self.yaw) * libm::cos(self.pitch),
            libm::sin(self.pitch),
        )
    }

    pub fn right(&self) -> Vec3 {
        Vec3::new(libm::sin(self.yaw), -libm::cos(self.yaw), 0.0)
    }

    pub fn down(&self) -> Vec3 {
        self.forward().cross(self.right())
    }

    /// Camera-frame coordinates `(right, down, depth)` of a world point.
    pub fn to_camera_frame(&self, p: Vec3) -> Vec3 {
        let d = p - self.position;
        Vec3::new(d.dot(self.right()), d.dot(self.down()), d.dot(self.forward()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlockerSpec {
    pub center: Vec3,
    pub extents: Vec3,
}

impl BlockerSpec {
    pub fn aabb(&self) -> Aabb {
        Aabb::from_center_extents(self.center, self.extents)
    }
}

/// One vehicle class: relative frequency and physical size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UeClassSpec {
    pub weight: f64,
    pub extents: Vec3,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub ris_pose: RisPose,
    pub bs_position: Vec3,
    pub street_axis: Vec3,
    /// Inclusive `[min, max]` number of UEs per scene.
    pub ue_count_range: [usize; 2],
    /// Inclusive `[min, max]` speed in m/s.
    pub ue_speed_range: [f64; 2],
    pub ue_region: Aabb,
    pub ue_classes: Vec<UeClassSpec>,
    pub blockers: Vec<BlockerSpec>,
    pub cameras: Vec<CameraModel>,
    #[serde(default)]
    pub master_seed: u64,
}

impl ScenarioConfig {
    pub fn num_classes(&self) -> usize {
        self.ue_classes.len()
    }

    /// Checks the scenario invariants. `u_max` bounds the UE count.
    pub fn validate(&self, u_max: usize) -> Result<()> {
        let [lo, hi] = self.ue_count_range;
        if lo > hi || hi > u_max {
            return Err(Error::InvalidConfig(format!(
                "ue_count_range [{lo}, {hi}] must satisfy min <= max <= u_max = {u_max}"
            )));
        }
        if !(self.ue_region.volume() > 0.0) {
            return Err(Error::InvalidConfig("ue_region has zero volume".into()));
        }
        if self.ue_region.contains(self.bs_position) {
            return Err(Error::InvalidConfig("ue_region contains the BS position".into()));
        }
        let [smin, smax] = self.ue_speed_range;
        if !(smin >= 0.0 && smin <= smax) {
            return Err(Error::InvalidConfig("ue_speed_range must be 0 <= min <= max".into()));
        }
        if self.street_axis.norm() == 0.0 || !self.street_axis.is_finite() {
            return Err(Error::InvalidConfig("street_axis must be a nonzero vector".into()));
        }
        if self.ue_classes.is_empty() {
            return Err(Error::InvalidConfig("at least one UE class is required".into()));
        }
        for (i, class) in self.ue_classes.iter().enumerate() {
            if !(class.weight > 0.0) {
                return Err(Error::InvalidConfig(format!("class {i} weight must be positive")));
            }
            if !(class.extents.x > 0.0 && class.extents.y > 0.0 && class.extents.z > 0.0) {
                return Err(Error::InvalidConfig(format!("class {i} extents must be positive")));
            }
        }
        for (i, b) in self.blockers.iter().enumerate() {
            if !(b.extents.x > 0.0 && b.extents.y > 0.0 && b.extents.z > 0.0) {
                return Err(Error::InvalidConfig(format!("blocker {i} extents must be positive")));
            }
        }
        for cam in &self.cameras {
            cam.validate()?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ue {
    pub id: u32,
    pub position: Vec3,
    pub class_id: usize,
    pub extents: Vec3,
    pub velocity: Vec3,
}

impl Ue {
    pub fn aabb(&self) -> Aabb {
        Aabb::from_center_extents(self.position, self.extents)
    }
}

/// Pixel-space box, center plus size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub x_center: f64,
    pub y_center: f64,
    pub width: f64,
    pub height: f64,
}

impl BoundingBox {
    pub fn from_corners(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        Self {
            x_center: 0.5 * (x0 + x1),
            y_center: 0.5 * (y0 + y1),
            width: x1 - x0,
            height: y1 - y0,
        }
    }

    pub fn corners(&self) -> (f64, f64, f64, f64) {
        let (hw, hh) = (0.5 * self.width, 0.5 * self.height);
        (
            self.x_center - hw,
            self.y_center - hh,
            self.x_center + hw,
            self.y_center + hh,
        )
    }

    pub fn area(&self) -> f64 {
        self.width * self.height
    }

    /// Clips to `[0, w] x [0, h]`; `None` if nothing with positive area remains.
    pub fn clip(&self, w: f64, h: f64) -> Option<Self> {
        let (x0, y0, x1, y1) = self.corners();
        let (x0, x1) = (x0.max(0.0), x1.min(w));
        let (y0, y1) = (y0.max(0.0), y1.min(h));
        if x1 > x0 && y1 > y0 {
            Some(Self::from_corners(x0, y0, x1, y1))
        } else {
            None
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub scene_index: u64,
    /// Root of every per-scene random stream (channels, detector).
    pub scene_seed: u64,
    pub ues: Vec<Ue>,
    pub blockers: Vec<BlockerSpec>,
    pub ris: RisPose,
    pub bs_position: Vec3,
    pub cameras: Vec<CameraModel>,
}

/// Samples scene `scene_index` of the scenario. Pure in `(config, scene_index)`.
pub fn generate_scene(config: &ScenarioConfig, scene_index: u64) -> Result<Scene> {
    if !(config.ue_region.volume() > 0.0) {
        return Err(Error::InvalidConfig("ue_region has zero volume".into()));
    }
    let [lo, hi] = config.ue_count_range;
    if lo > hi {
        return Err(Error::InvalidConfig("ue_count_range min exceeds max".into()));
    }
    if config.ue_classes.is_empty() {
        return Err(Error::InvalidConfig("at least one UE class is required".into()));
    }

    let mut rng = stream_rng(config.master_seed, Stream::Scene, scene_index);
    let scene_seed = rng.next_u64();
    let count = rng.random_range(lo..=hi);
    let total_weight: f64 = config.ue_classes.iter().map(|c| c.weight).sum();
    let axis = config.street_axis.normalized();
    let region = config.ue_region;

    let mut ues = Vec::with_capacity(count);
    for id in 0..count {
        let mut position = Vec3::ZERO;
        for (i, slot) in [&mut position.x, &mut position.y, &mut position.z]
            .into_iter()
            .enumerate()
        {
            let (a, b) = (region.min.axis(i), region.max.axis(i));
            *slot = a + (b - a) * rng.random::<f64>();
        }
        let mut pick = rng.random::<f64>() * total_weight;
        let mut class_id = config.ue_classes.len() - 1;
        for (c, class) in config.ue_classes.iter().enumerate() {
            if pick < class.weight {
                class_id = c;
                break;
            }
            pick -= class.weight;
        }
        let [smin, smax] = config.ue_speed_range;
        let speed = smin + (smax - smin) * rng.random::<f64>();
        let heading = if rng.random::<bool>() { 1.0 } else { -1.0 };
        ues.push(Ue {
            id: id as u32,
            position,
            class_id,
            extents: config.ue_classes[class_id].extents,
            velocity: axis * (speed * heading),
        });
    }

    Ok(Scene {
        scene_index,
        scene_seed,
        ues,
        blockers: config.blockers.clone(),
        ris: config.ris_pose,
        bs_position: config.bs_position,
        cameras: config.cameras.clone(),
    })
}

/// True iff the open segment `a`-`b` crosses no blocker interior.
pub fn los_visible(scene: &Scene, a: Vec3, b: Vec3) -> bool {
    los_clear(&scene.blockers, a, b)
}

pub(crate) fn los_clear(blockers: &[BlockerSpec], a: Vec3, b: Vec3) -> bool {
    !blockers
        .iter()
        .any(|bl| bl.aabb().segment_intersects_open(a, b))
}

/// Depth below which a box corner is pulled onto the near plane.
const NEAR_PLANE: f64 = 1e-3;

/// Pinhole projection of the UE's box onto the image, clipped to the frame.
///
/// Returns `None` when the UE center is not in front of the camera or the
/// projected hull misses the image entirely.
pub fn project_bbox(camera: &CameraModel, ue: &Ue) -> Option<BoundingBox> {
    let center = camera.to_camera_frame(ue.position);
    if center.z <= NEAR_PLANE {
        return None;
    }
    let f = camera.focal_px();
    let (w, h) = (camera.width as f64, camera.height as f64);
    let (mut x0, mut y0) = (f64::INFINITY, f64::INFINITY);
    let (mut x1, mut y1) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    for corner in ue.aabb().corners() {
        let c = camera.to_camera_frame(corner);
        let depth = c.z.max(NEAR_PLANE);
        let u = w / 2.0 + f * c.x / depth;
        let v = h / 2.0 + f * c.y / depth;
        x0 = x0.min(u);
        x1 = x1.max(u);
        y0 = y0.min(v);
        y1 = y1.max(v);
    }
    BoundingBox::from_corners(x0, y0, x1, y1).clip(w, h)
}
