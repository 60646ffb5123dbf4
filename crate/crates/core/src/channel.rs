//! Wideband geometric channels for the BS-RIS and RIS-UE links.
//!
//! A link is a short list of [`PathCluster`]s. Each cluster is spread over
//! delay taps by the pulse shape and steered across the array by the UPA
//! response, giving a [`DelayChannel`]; a per-subcarrier DFT of the taps
//! gives the [`FreqChannel`] used for rate evaluation.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::geometry::{sinc, Aabb, Vec3};
use crate::rate::LinkChannels;
use crate::rng::{stream_rng, Stream};
use crate::scene::{los_clear, RisPose, Scene};
use crate::{Error, Result, SPEED_OF_LIGHT};

fn cis(phase: f64) -> Complex64 {
    Complex64::new(libm::cos(phase), libm::sin(phase))
}

/// One ray: complex gain, delay and angles.
///
/// `azimuth`/`elevation` are the angles of the ray at the RIS. The departure
/// angles are measured at the far end in a frame whose boresight points at
/// the RIS; they only matter for multi-antenna base stations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathCluster {
    pub alpha: Complex64,
    pub tau: f64,
    pub azimuth: f64,
    pub elevation: f64,
    pub departure_azimuth: f64,
    pub departure_elevation: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Pulse {
    Sinc,
    RaisedCosine { roll_off: f64 },
}

impl Pulse {
    /// Pulse value at `t / Ts = x`.
    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            Pulse::Sinc => sinc(x),
            Pulse::RaisedCosine { roll_off } => {
                if roll_off == 0.0 {
                    return sinc(x);
                }
                let denom = 1.0 - (2.0 * roll_off * x) * (2.0 * roll_off * x);
                if libm::fabs(denom) < 1e-12 {
                    PI / 4.0 * sinc(1.0 / (2.0 * roll_off))
                } else {
                    sinc(x) * libm::cos(PI * roll_off * x) / denom
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadioConfig {
    /// Number of OFDM subcarriers K.
    pub subcarriers: usize,
    /// Sample period Ts in seconds.
    pub sample_period: f64,
    /// Number of delay taps D.
    pub taps: usize,
    /// Total transmit power in W.
    pub tx_power: f64,
    /// Noise variance in W.
    pub noise_var: f64,
    /// Extra pathloss factor applied on top of the per-path free-space gains.
    pub pathloss: f64,
    pub pulse: Pulse,
    pub carrier_hz: f64,
}

impl Default for RadioConfig {
    fn default() -> Self {
        Self {
            subcarriers: 64,
            sample_period: 1.0 / 100e6,
            taps: 32,
            tx_power: 1.0,
            noise_var: 1e-13,
            pathloss: 1.0,
            pulse: Pulse::Sinc,
            carrier_hz: 28e9,
        }
    }
}

impl RadioConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.subcarriers >= 1
            && self.taps >= 1
            && self.tx_power > 0.0
            && self.noise_var > 0.0
            && self.sample_period > 0.0
            && self.pathloss > 0.0
            && self.carrier_hz > 0.0;
        if !ok {
            return Err(Error::InvalidConfig(
                "radio config needs K, D >= 1 and positive Ts, pt, noise, pathloss, carrier".into(),
            ));
        }
        if let Pulse::RaisedCosine { roll_off } = self.pulse {
            if !(0.0..=1.0).contains(&roll_off) {
                return Err(Error::InvalidConfig("raised-cosine roll-off must be in [0, 1]".into()));
            }
        }
        Ok(())
    }

    /// `pt / (K * noise_var)`.
    pub fn snr(&self) -> f64 {
        self.tx_power / (self.subcarriers as f64 * self.noise_var)
    }

    pub fn wavelength(&self) -> f64 {
        SPEED_OF_LIGHT / self.carrier_hz
    }
}

/// Uniform planar array: `cols` x `rows` elements, spacing in wavelengths.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UpaGeometry {
    pub cols: usize,
    pub rows: usize,
    #[serde(default = "half_wavelength")]
    pub spacing: f64,
}

fn half_wavelength() -> f64 {
    0.5
}

impl UpaGeometry {
    pub fn new(cols: usize, rows: usize) -> Self {
        Self {
            cols,
            rows,
            spacing: 0.5,
        }
    }

    pub fn with_spacing(mut self, wavelengths: f64) -> Self {
        self.spacing = wavelengths;
        self
    }

    pub fn len(&self) -> usize {
        self.cols * self.rows
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn validate(&self) -> Result<()> {
        if self.is_empty() {
            return Err(Error::InvalidConfig("array needs at least one element".into()));
        }
        if !(self.spacing > 0.0) {
            return Err(Error::InvalidConfig("element spacing must be positive".into()));
        }
        Ok(())
    }
}

/// Steering vector of the UPA towards `(azimuth, elevation)`.
///
/// Element `(p, q)` (column `p`, row `q`) sits at index `q * cols + p` and has
/// phase `2 pi s (p sin(az) cos(el) + q sin(el))`.
pub fn array_response(geom: &UpaGeometry, azimuth: f64, elevation: f64) -> Vec<Complex64> {
    let u = libm::sin(azimuth) * libm::cos(elevation);
    let v = libm::sin(elevation);
    steering_from_direction_cosines(geom, u, v)
}

/// Steering vector from the direction cosines `(sin(az) cos(el), sin(el))`.
pub(crate) fn steering_from_direction_cosines(geom: &UpaGeometry, u: f64, v: f64) -> Vec<Complex64> {
    let k = 2.0 * PI * geom.spacing;
    let mut out = Vec::with_capacity(geom.len());
    for q in 0..geom.rows {
        for p in 0..geom.cols {
            out.push(cis(k * (p as f64 * u + q as f64 * v)));
        }
    }
    out
}

/// Scatterer placement for the non-line-of-sight rays.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PropagationConfig {
    /// Upper bound on single-bounce rays per link.
    pub max_scatter_paths: usize,
    /// Scatter points are drawn uniformly in this box.
    pub scatter_region: Aabb,
    /// Amplitude of the reflection coefficient; each bounce draws from
    /// `[0.5, 1] * reflection_gain`.
    pub reflection_gain: f64,
}

impl PropagationConfig {
    pub fn line_of_sight_only() -> Self {
        Self {
            max_scatter_paths: 0,
            scatter_region: Aabb::new(Vec3::ZERO, Vec3::new(1.0, 1.0, 1.0)),
            reflection_gain: 0.0,
        }
    }
}

fn departure_frame(from: Vec3, to: Vec3) -> RisPose {
    let d = to - from;
    let horiz = libm::sqrt(d.x * d.x + d.y * d.y);
    RisPose {
        position: from,
        yaw: libm::atan2(d.y, d.x),
        tilt: libm::atan2(d.z, horiz),
    }
}

/// Free-space ray from `tx` to the RIS at `rx`, optionally via `bounce`.
fn make_path(
    ris: &RisPose,
    tx: Vec3,
    rx: Vec3,
    bounce: Option<Vec3>,
    reflection: Complex64,
    wavelength: f64,
) -> PathCluster {
    let (last_hop, length) = match bounce {
        Some(p) => (p, tx.distance(p) + p.distance(rx)),
        None => (tx, tx.distance(rx)),
    };
    let first_hop = bounce.unwrap_or(rx);
    let arrival = RisPose {
        position: rx,
        ..*ris
    };
    let (azimuth, elevation) = arrival.local_angles(last_hop);
    let (departure_azimuth, departure_elevation) =
        departure_frame(tx, rx).local_angles(first_hop);
    let amplitude = wavelength / (4.0 * PI * length);
    PathCluster {
        alpha: reflection * cis(-2.0 * PI * length / wavelength) * amplitude,
        tau: length / SPEED_OF_LIGHT,
        azimuth,
        elevation,
        departure_azimuth,
        departure_elevation,
    }
}

/// Rays from `tx` arriving at the RIS located at `rx`.
///
/// The line-of-sight ray is present iff the segment is unobstructed. Up to
/// `max_scatter_paths` single-bounce rays are added through random scatter
/// points whose two legs are both clear. Angles are taken at the RIS.
pub fn synth_paths<R: Rng + ?Sized>(
    scene: &Scene,
    tx: Vec3,
    rx: Vec3,
    prop: &PropagationConfig,
    carrier_hz: f64,
    rng: &mut R,
) -> Vec<PathCluster> {
    let wavelength = SPEED_OF_LIGHT / carrier_hz;
    let mut paths = Vec::new();
    if los_clear(&scene.blockers, tx, rx) {
        paths.push(make_path(&scene.ris, tx, rx, None, Complex64::new(1.0, 0.0), wavelength));
    }
    if prop.max_scatter_paths == 0 {
        return paths;
    }
    let n = rng.random_range(0..=prop.max_scatter_paths);
    let region = prop.scatter_region;
    for _ in 0..n {
        let mut p = Vec3::ZERO;
        for (i, slot) in [&mut p.x, &mut p.y, &mut p.z].into_iter().enumerate() {
            let (a, b) = (region.min.axis(i), region.max.axis(i));
            *slot = a + (b - a) * rng.random::<f64>();
        }
        let magnitude = prop.reflection_gain * (0.5 + 0.5 * rng.random::<f64>());
        let phase = 2.0 * PI * rng.random::<f64>();
        if !los_clear(&scene.blockers, tx, p) || !los_clear(&scene.blockers, p, rx) {
            continue;
        }
        paths.push(make_path(&scene.ris, tx, rx, Some(p), cis(phase) * magnitude, wavelength));
    }
    paths
}

/// Shifts all delays so that the earliest ray arrives at `t = 0`.
pub fn align_delays(paths: &mut [PathCluster]) {
    let first = paths.iter().map(|p| p.tau).fold(f64::INFINITY, f64::min);
    if first.is_finite() {
        for p in paths {
            p.tau -= first;
        }
    }
}

/// Time-domain taps: `taps` matrices of `rows x cols` (row-major).
#[derive(Debug, Clone, PartialEq)]
pub struct DelayChannel {
    pub rows: usize,
    pub cols: usize,
    pub taps: Vec<Vec<Complex64>>,
    /// Rays whose delay lies beyond the last tap.
    pub truncated_paths: usize,
}

impl DelayChannel {
    pub fn zeros(rows: usize, cols: usize, taps: usize) -> Self {
        Self {
            rows,
            cols,
            taps: vec![vec![Complex64::new(0.0, 0.0); rows * cols]; taps],
            truncated_paths: 0,
        }
    }

    pub fn energy(&self) -> f64 {
        self.taps
            .iter()
            .flat_map(|t| t.iter())
            .map(|z| z.norm_sqr())
            .sum()
    }
}

/// Per-subcarrier matrices `rows x cols` (row-major), `K` of them.
#[derive(Debug, Clone, PartialEq)]
pub struct FreqChannel {
    pub rows: usize,
    pub cols: usize,
    pub subcarriers: usize,
    pub data: Vec<Complex64>,
}

impl FreqChannel {
    pub fn subcarrier(&self, k: usize) -> &[Complex64] {
        let n = self.rows * self.cols;
        &self.data[k * n..(k + 1) * n]
    }

    pub fn energy(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum()
    }

    /// Multiplies every entry by `c`.
    pub fn scaled(&self, c: Complex64) -> Self {
        Self {
            data: self.data.iter().map(|z| z * c).collect(),
            ..self.clone()
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }
}

/// RIS-side delay taps `sqrt(M / rho) sum_l alpha_l p(d Ts - tau_l) a(az_l, el_l)`.
pub fn delay_channel(paths: &[PathCluster], geom: &UpaGeometry, radio: &RadioConfig) -> DelayChannel {
    delay_channel_matrix(paths, geom, &UpaGeometry::new(1, 1), radio)
}

/// BS-to-RIS taps for an `N`-antenna BS: each ray contributes
/// `a_ris(arrival) a_bs(departure)^T`, scaled by `sqrt(M N / rho)`.
pub fn delay_channel_matrix(
    paths: &[PathCluster],
    ris: &UpaGeometry,
    bs: &UpaGeometry,
    radio: &RadioConfig,
) -> DelayChannel {
    let (m, n) = (ris.len(), bs.len());
    let mut dc = DelayChannel::zeros(m, n, radio.taps);
    let scale = libm::sqrt((m * n) as f64 / radio.pathloss);
    let horizon = radio.taps as f64 * radio.sample_period;
    for path in paths {
        if path.tau >= horizon {
            dc.truncated_paths += 1;
        }
        let a_ris = array_response(ris, path.azimuth, path.elevation);
        let a_bs = array_response(bs, path.departure_azimuth, path.departure_elevation);
        for (d, tap) in dc.taps.iter_mut().enumerate() {
            let p = radio.pulse.eval(d as f64 - path.tau / radio.sample_period);
            if p == 0.0 {
                continue;
            }
            let g = path.alpha * (scale * p);
            for (i, ar) in a_ris.iter().enumerate() {
                let gi = g * ar;
                for (j, ab) in a_bs.iter().enumerate() {
                    tap[i * n + j] += gi * ab;
                }
            }
        }
    }
    dc
}

/// `h_k = sum_d h_d exp(-j 2 pi k d / K)`, evaluated directly for each `k`.
pub fn freq_channel(dc: &DelayChannel, subcarriers: usize) -> FreqChannel {
    let k_total = subcarriers.max(1);
    let twiddles: Vec<Complex64> = (0..k_total)
        .map(|r| cis(-2.0 * PI * r as f64 / k_total as f64))
        .collect();
    let width = dc.rows * dc.cols;
    let mut data = vec![Complex64::new(0.0, 0.0); k_total * width];
    for k in 0..k_total {
        let out = &mut data[k * width..(k + 1) * width];
        for (d, tap) in dc.taps.iter().enumerate() {
            let w = twiddles[(k * d) % k_total];
            for (o, h) in out.iter_mut().zip(tap) {
                *o += h * w;
            }
        }
    }
    FreqChannel {
        rows: dc.rows,
        cols: dc.cols,
        subcarriers: k_total,
        data,
    }
}

/// Everything needed to turn a scene into per-UE link channels.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelModel {
    pub ris: UpaGeometry,
    pub bs: UpaGeometry,
    pub radio: RadioConfig,
    pub propagation: PropagationConfig,
}

impl ChannelModel {
    fn link_paths(&self, scene: &Scene, tx: Vec3, stream_index: u64) -> DelayChannel {
        let mut rng = stream_rng(scene.scene_seed, Stream::Channel, stream_index);
        let mut paths = synth_paths(
            scene,
            tx,
            scene.ris.position,
            &self.propagation,
            self.radio.carrier_hz,
            &mut rng,
        );
        align_delays(&mut paths);
        delay_channel_matrix(&paths, &self.ris, &self.bs, &self.radio)
    }

    /// BS-to-RIS channel `H_T` (M x N per subcarrier).
    pub fn bs_channel(&self, scene: &Scene) -> FreqChannel {
        let dc = self.link_paths(scene, scene.bs_position, 0);
        freq_channel(&dc, self.radio.subcarriers)
    }

    /// RIS-to-UE channel `h_R` (M x 1 per subcarrier) for `scene.ues[ue]`.
    pub fn ue_channel(&self, scene: &Scene, ue: usize) -> FreqChannel {
        let u = &scene.ues[ue];
        let mut rng = stream_rng(scene.scene_seed, Stream::Channel, u64::from(u.id) + 1);
        let mut paths = synth_paths(
            scene,
            u.position,
            scene.ris.position,
            &self.propagation,
            self.radio.carrier_hz,
            &mut rng,
        );
        align_delays(&mut paths);
        let dc = delay_channel(&paths, &self.ris, &self.radio);
        freq_channel(&dc, self.radio.subcarriers)
    }

    /// BS beam: normalized conjugate steering vector towards the RIS.
    pub fn bs_beam(&self) -> Vec<Complex64> {
        // the departure frame points at the RIS, so the steering vector is broadside
        let a = array_response(&self.bs, 0.0, 0.0);
        let norm = 1.0 / libm::sqrt(a.len() as f64);
        a.iter().map(|z| z.conj() * norm).collect()
    }

    /// Full link for one UE, reusing a precomputed BS channel.
    pub fn link_with(&self, scene: &Scene, bs_channel: &FreqChannel, ue: usize) -> LinkChannels {
        LinkChannels {
            h_r: self.ue_channel(scene, ue),
            h_t: bs_channel.clone(),
            f: self.bs_beam(),
            snr: self.radio.snr(),
        }
    }

    pub fn link(&self, scene: &Scene, ue: usize) -> LinkChannels {
        let h_t = self.bs_channel(scene);
        self.link_with(scene, &h_t, ue)
    }
}
