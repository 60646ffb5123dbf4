//! FFT evaluation of the per-subcarrier channel.

use num_complex::Complex64;
use risbeam_core::channel::{DelayChannel, FreqChannel};
use rustfft::FftPlanner;

/// Same result as [`risbeam_core::channel::freq_channel`], computed with one
/// length-`K` FFT per array entry. Taps beyond `K` wrap around modulo `K`.
pub fn fft_freq_channel(dc: &DelayChannel, subcarriers: usize) -> FreqChannel {
    let k_total = subcarriers.max(1);
    let width = dc.rows * dc.cols;
    let fft = FftPlanner::new().plan_fft_forward(k_total);
    let mut data = vec![Complex64::new(0.0, 0.0); k_total * width];
    let mut buf = vec![Complex64::new(0.0, 0.0); k_total];
    for e in 0..width {
        buf.iter_mut().for_each(|z| *z = Complex64::new(0.0, 0.0));
        for (d, tap) in dc.taps.iter().enumerate() {
            buf[d % k_total] += tap[e];
        }
        fft.process(&mut buf);
        for (k, z) in buf.iter().enumerate() {
            data[k * width + e] = *z;
        }
    }
    FreqChannel {
        rows: dc.rows,
        cols: dc.cols,
        subcarriers: k_total,
        data,
    }
}
