//! Reflection codebook: conjugate steering vectors on a sine-space grid.

use alloc::format;
use alloc::vec::Vec;

use num_complex::Complex64;

use crate::channel::{array_response, UpaGeometry};
use crate::{Error, Result};

/// Largest grid dimension accepted by [`build_codebook`].
pub const MAX_GRID_POINTS: usize = 4096;

#[derive(Debug, Clone, PartialEq)]
pub struct Codebook {
    geom: UpaGeometry,
    n_az: usize,
    n_el: usize,
    /// Steering `(azimuth, elevation)` per beam, same order as `beams`.
    angles: Vec<(f64, f64)>,
    beams: Vec<Vec<Complex64>>,
}

/// Grid point `i` of `n` uniformly covering `(-1, 1)` in sine space.
fn sine_grid(i: usize, n: usize) -> f64 {
    -1.0 + (2 * i + 1) as f64 / n as f64
}

/// Builds `n_az * n_el` beams. Beam `(i, j)` steers towards the `i`-th
/// azimuth and `j`-th elevation grid point and sits at zero-based index
/// `i * n_el + j`.
pub fn build_codebook(geom: &UpaGeometry, n_az: usize, n_el: usize) -> Result<Codebook> {
    geom.validate()?;
    if n_az == 0 || n_el == 0 {
        return Err(Error::InvalidConfig("codebook grid needs n_az, n_el >= 1".into()));
    }
    if n_az > MAX_GRID_POINTS || n_el > MAX_GRID_POINTS {
        return Err(Error::InvalidConfig(format!(
            "codebook grid {n_az} x {n_el} exceeds {MAX_GRID_POINTS} points per axis"
        )));
    }
    let mut angles = Vec::with_capacity(n_az * n_el);
    let mut beams = Vec::with_capacity(n_az * n_el);
    for i in 0..n_az {
        let az = libm::asin(sine_grid(i, n_az));
        for j in 0..n_el {
            let el = libm::asin(sine_grid(j, n_el));
            angles.push((az, el));
            beams.push(array_response(geom, az, el).iter().map(|z| z.conj()).collect());
        }
    }
    Ok(Codebook {
        geom: *geom,
        n_az,
        n_el,
        angles,
        beams,
    })
}

impl Codebook {
    /// Number of beams `|Q|`.
    pub fn len(&self) -> usize {
        self.beams.len()
    }

    pub fn is_empty(&self) -> bool {
        self.beams.is_empty()
    }

    pub fn geometry(&self) -> &UpaGeometry {
        &self.geom
    }

    pub fn grid(&self) -> (usize, usize) {
        (self.n_az, self.n_el)
    }

    /// Beam `q`, one-based.
    pub fn beam(&self, q: usize) -> Result<&[Complex64]> {
        if q == 0 || q > self.beams.len() {
            return Err(Error::BeamIndexOutOfRange {
                index: q,
                size: self.beams.len(),
            });
        }
        Ok(&self.beams[q - 1])
    }

    /// Steering angles of beam `q`, one-based.
    pub fn angles(&self, q: usize) -> Result<(f64, f64)> {
        self.beam(q)?;
        Ok(self.angles[q - 1])
    }

    /// Beams in index order, zero-based.
    pub fn beams(&self) -> &[Vec<Complex64>] {
        &self.beams
    }
}
