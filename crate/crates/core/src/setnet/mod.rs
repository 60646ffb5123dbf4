//! Beam-set prediction networks.
//!
//! [`Variant::SetSum`] runs every detected UE through one shared MLP, sums
//! the per-UE outputs and applies a sigmoid. Padded (all-zero) columns are
//! skipped and the remaining columns are summed in a canonical order, which
//! makes the output exactly invariant to column permutations and to extra
//! padding.
//!
//! Two baselines share the same parameter machinery:
//! [`Variant::ReuseConcat`] concatenates the per-UE outputs and feeds them
//! through a final linear layer, and [`Variant::VanillaFc`] is a plain MLP on
//! the flattened input matrix.
//!
//! All parameters live in one flat vector; each dense layer stores its
//! `out x in` weights row-major followed by its bias.

mod train;

pub use train::{evaluate_loss, train, EpochRecord, LearningCurves, OptimizerKind, TrainConfig};

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::fmt;
use core::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Probabilities are kept this far from 0 and 1 inside the loss.
pub const LOSS_CLAMP: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    SetSum,
    ReuseConcat,
    VanillaFc,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::SetSum, Variant::ReuseConcat, Variant::VanillaFc];

    pub fn tag(self) -> &'static str {
        match self {
            Variant::SetSum => "set_sum",
            Variant::ReuseConcat => "reuse_concat",
            Variant::VanillaFc => "vanilla_fc",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.tag() == s)
            .ok_or_else(|| {
                Error::InvalidConfig(format!(
                    "unknown variant `{s}`; valid variants: set_sum, reuse_concat, vanilla_fc"
                ))
            })
    }
}

/// Input and output sizes shared by all variants.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetShape {
    /// Rows of the input matrix, `C + 4`.
    pub rows: usize,
    pub u_max: usize,
    pub q_size: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Layer {
    input: usize,
    output: usize,
    offset: usize,
}

impl Layer {
    fn weights<'a>(&self, p: &'a [f64]) -> &'a [f64] {
        &p[self.offset..self.offset + self.input * self.output]
    }

    fn bias<'a>(&self, p: &'a [f64]) -> &'a [f64] {
        let start = self.offset + self.input * self.output;
        &p[start..start + self.output]
    }

    fn len(&self) -> usize {
        (self.input + 1) * self.output
    }

    fn forward(&self, p: &[f64], x: &[f64], out: &mut Vec<f64>, relu: bool) {
        let w = self.weights(p);
        out.clear();
        out.extend_from_slice(self.bias(p));
        for (o, acc) in out.iter_mut().enumerate() {
            let row = &w[o * self.input..(o + 1) * self.input];
            *acc += row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
            if relu && *acc < 0.0 {
                *acc = 0.0;
            }
        }
    }

    /// Adds `delta x^T` and `delta` to the gradient; writes `W^T delta` into
    /// `d_input` when requested.
    fn backward(&self, p: &[f64], x: &[f64], delta: &[f64], grads: &mut [f64], d_input: Option<&mut Vec<f64>>) {
        let n_w = self.input * self.output;
        let (gw, rest) = grads[self.offset..self.offset + self.len()].split_at_mut(n_w);
        for (o, &d) in delta.iter().enumerate() {
            if d == 0.0 {
                continue;
            }
            for (g, xi) in gw[o * self.input..(o + 1) * self.input].iter_mut().zip(x) {
                *g += d * xi;
            }
            rest[o] += d;
        }
        if let Some(d_in) = d_input {
            let w = self.weights(p);
            d_in.clear();
            d_in.resize(self.input, 0.0);
            for (o, &d) in delta.iter().enumerate() {
                if d == 0.0 {
                    continue;
                }
                for (di, wi) in d_in.iter_mut().zip(&w[o * self.input..(o + 1) * self.input]) {
                    *di += wi * d;
                }
            }
        }
    }
}

/// Reusable activation buffers.
#[derive(Debug, Default, Clone)]
pub struct Workspace {
    /// `acts[column][layer]`: output of each stack layer for each column.
    acts: Vec<Vec<Vec<f64>>>,
    features: Vec<f64>,
    head_out: Vec<f64>,
    delta: Vec<f64>,
    d_in: Vec<f64>,
    d_features: Vec<f64>,
    order: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SetNetwork {
    variant: Variant,
    shape: NetShape,
    stack_widths: Vec<usize>,
    layers: Vec<Layer>,
    params: Vec<f64>,
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + libm::exp(-z))
    } else {
        let e = libm::exp(z);
        e / (1.0 + e)
    }
}

/// Elementwise binary cross-entropy averaged over the entries.
pub fn loss(t: &[f64], t_star: &[f64]) -> f64 {
    let n = t.len().max(1) as f64;
    -t.iter()
        .zip(t_star)
        .map(|(&p, &y)| {
            let p = p.clamp(LOSS_CLAMP, 1.0 - LOSS_CLAMP);
            y * libm::log(p) + (1.0 - y) * libm::log(1.0 - p)
        })
        .sum::<f64>()
        / n
}

fn column_is_padding(col: &[f64]) -> bool {
    col.iter().all(|&x| x == 0.0)
}

fn lexicographic(a: &[f64], b: &[f64]) -> Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or(Ordering::Equal)
}

impl SetNetwork {
    /// Fresh network with hidden widths `hidden` and random weights.
    pub fn new<R: Rng + ?Sized>(variant: Variant, shape: NetShape, hidden: &[usize], rng: &mut R) -> Result<Self> {
        let mut net = Self::zeroed(variant, shape, hidden)?;
        let last_stack = net.stack_widths.len() - 2;
        let mut params = core::mem::take(&mut net.params);
        for (l, layer) in net.layers.iter().enumerate() {
            // He init before a ReLU, Xavier-style on the linear outputs
            let gain = if l < last_stack { 2.0 } else { 1.0 };
            let std = libm::sqrt(gain / layer.input as f64);
            let normal = Normal::new(0.0, std).map_err(|_| Error::InvalidConfig("bad init scale".into()))?;
            let n_w = layer.input * layer.output;
            for w in &mut params[layer.offset..layer.offset + n_w] {
                *w = normal.sample(rng);
            }
        }
        net.params = params;
        Ok(net)
    }

    /// Network with all parameters zero; shapes only.
    pub fn zeroed(variant: Variant, shape: NetShape, hidden: &[usize]) -> Result<Self> {
        if shape.rows == 0 || shape.u_max == 0 || shape.q_size == 0 || hidden.contains(&0) {
            return Err(Error::InvalidConfig(format!(
                "network sizes must be positive: {shape:?}, hidden {hidden:?}"
            )));
        }
        let input = match variant {
            Variant::VanillaFc => shape.rows * shape.u_max,
            _ => shape.rows,
        };
        let mut stack_widths = vec![input];
        stack_widths.extend_from_slice(hidden);
        stack_widths.push(shape.q_size);

        let mut layers = Vec::new();
        let mut offset = 0;
        for w in stack_widths.windows(2) {
            let layer = Layer {
                input: w[0],
                output: w[1],
                offset,
            };
            offset += layer.len();
            layers.push(layer);
        }
        if variant == Variant::ReuseConcat {
            let head = Layer {
                input: shape.u_max * shape.q_size,
                output: shape.q_size,
                offset,
            };
            offset += head.len();
            layers.push(head);
        }
        Ok(Self {
            variant,
            shape,
            stack_widths,
            layers,
            params: vec![0.0; offset],
        })
    }

    /// Rebuilds a network from its shape and flat parameters.
    pub fn from_parts(variant: Variant, shape: NetShape, hidden: &[usize], params: Vec<f64>) -> Result<Self> {
        let mut net = Self::zeroed(variant, shape, hidden)?;
        if params.len() != net.params.len() {
            return Err(Error::DimensionMismatch(format!(
                "expected {} parameters, got {}",
                net.params.len(),
                params.len()
            )));
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::InvalidConfig("parameters must be finite".into()));
        }
        net.params = params;
        Ok(net)
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn shape(&self) -> NetShape {
        self.shape
    }

    /// Widths of the (shared) stack including input and output.
    pub fn stack_widths(&self) -> &[usize] {
        &self.stack_widths
    }

    pub fn hidden_widths(&self) -> &[usize] {
        &self.stack_widths[1..self.stack_widths.len() - 1]
    }

    /// `(in, out)` of every dense layer in parameter order.
    pub fn layer_dims(&self) -> Vec<(usize, usize)> {
        self.layers.iter().map(|l| (l.input, l.output)).collect()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    fn stack_layers(&self) -> &[Layer] {
        &self.layers[..self.stack_widths.len() - 1]
    }

    fn head(&self) -> Option<&Layer> {
        match self.variant {
            Variant::ReuseConcat => self.layers.last(),
            _ => None,
        }
    }

    fn columns(&self, v: &[f64]) -> Result<usize> {
        let rows = self.shape.rows;
        if !v.len().is_multiple_of(rows) {
            return Err(Error::DimensionMismatch(format!(
                "input of length {} is not a multiple of {rows} rows",
                v.len()
            )));
        }
        let cols = v.len() / rows;
        if self.variant != Variant::SetSum && cols != self.shape.u_max {
            return Err(Error::DimensionMismatch(format!(
                "{} expects {} columns, got {cols}",
                self.variant, self.shape.u_max
            )));
        }
        Ok(cols)
    }

    fn stack_forward(&self, x: &[f64], bufs: &mut Vec<Vec<f64>>) {
        let layers = self.stack_layers();
        bufs.resize_with(layers.len(), Vec::new);
        for (l, layer) in layers.iter().enumerate() {
            let relu = l + 1 < layers.len();
            let (done, rest) = bufs.split_at_mut(l);
            let input = if l == 0 { x } else { &done[l - 1][..] };
            layer.forward(&self.params, input, &mut rest[0], relu);
        }
    }

    /// Backprop of `d_out` (gradient w.r.t. the stack output) for one input.
    fn stack_backward(&self, x: &[f64], bufs: &[Vec<f64>], d_out: &[f64], grads: &mut [f64], delta: &mut Vec<f64>, d_in: &mut Vec<f64>) {
        let layers = self.stack_layers();
        delta.clear();
        delta.extend_from_slice(d_out);
        for l in (0..layers.len()).rev() {
            let input = if l == 0 { x } else { &bufs[l - 1][..] };
            if l == 0 {
                layers[l].backward(&self.params, input, delta, grads, None);
            } else {
                layers[l].backward(&self.params, input, delta, grads, Some(d_in));
                for (d, a) in d_in.iter_mut().zip(&bufs[l - 1]) {
                    if *a <= 0.0 {
                        *d = 0.0;
                    }
                }
                core::mem::swap(delta, d_in);
            }
        }
    }

    /// Pre-sigmoid scores; fills `ws` for a following backward pass.
    fn logits(&self, v: &[f64], ws: &mut Workspace) -> Result<Vec<f64>> {
        let cols = self.columns(v)?;
        let rows = self.shape.rows;
        let q = self.shape.q_size;
        let col = |u: usize| &v[u * rows..(u + 1) * rows];
        match self.variant {
            Variant::VanillaFc => {
                ws.acts.resize_with(1, Vec::new);
                self.stack_forward(v, &mut ws.acts[0]);
                Ok(ws.acts[0].last().cloned().unwrap_or_default())
            }
            Variant::SetSum => {
                ws.order.clear();
                ws.order.extend((0..cols).filter(|&u| !column_is_padding(col(u))));
                ws.order.sort_by(|&a, &b| lexicographic(col(a), col(b)).then(a.cmp(&b)));
                ws.acts.resize_with(cols, Vec::new);
                let mut z = vec![0.0; q];
                for &u in &ws.order {
                    self.stack_forward(col(u), &mut ws.acts[u]);
                    for (zi, fi) in z.iter_mut().zip(ws.acts[u].last().expect("stack has layers")) {
                        *zi += fi;
                    }
                }
                Ok(z)
            }
            Variant::ReuseConcat => {
                ws.order.clear();
                ws.order.extend((0..cols).filter(|&u| !column_is_padding(col(u))));
                ws.acts.resize_with(cols, Vec::new);
                ws.features.clear();
                ws.features.resize(cols * q, 0.0);
                for &u in &ws.order {
                    self.stack_forward(col(u), &mut ws.acts[u]);
                    ws.features[u * q..(u + 1) * q].copy_from_slice(ws.acts[u].last().expect("stack has layers"));
                }
                let head = self.head().expect("concat variant has a head");
                head.forward(&self.params, &ws.features, &mut ws.head_out, false);
                Ok(ws.head_out.clone())
            }
        }
    }

    /// Output scores in `(0, 1)` for a column-major input matrix.
    ///
    /// `set_sum` accepts any number of columns; the baselines need exactly
    /// `u_max`.
    pub fn forward(&self, v: &[f64]) -> Result<Vec<f64>> {
        self.forward_with(v, &mut Workspace::default())
    }

    pub fn forward_with(&self, v: &[f64], ws: &mut Workspace) -> Result<Vec<f64>> {
        Ok(self
            .logits(v, ws)?
            .into_iter()
            .map(|z| sigmoid(z).clamp(f64::EPSILON, 1.0 - f64::EPSILON))
            .collect())
    }

    /// Adds `scale * dL/dparams` for one sample to `grads` and returns the
    /// sample loss.
    pub fn accumulate_gradient(&self, v: &[f64], target: &[f64], scale: f64, grads: &mut [f64], ws: &mut Workspace) -> Result<f64> {
        if target.len() != self.shape.q_size {
            return Err(Error::DimensionMismatch(format!(
                "target has {} entries, network outputs {}",
                target.len(),
                self.shape.q_size
            )));
        }
        if grads.len() != self.params.len() {
            return Err(Error::DimensionMismatch("gradient buffer size".into()));
        }
        let z = self.logits(v, ws)?;
        let t: Vec<f64> = z.iter().map(|&z| sigmoid(z)).collect();
        let sample_loss = loss(&t, target);
        let q = self.shape.q_size as f64;
        let dz: Vec<f64> = t.iter().zip(target).map(|(p, y)| scale * (p - y) / q).collect();

        self.backprop(v, &dz, grads, ws);
        Ok(sample_loss)
    }

    /// Backprop of the logit gradient `dz` through the graph recorded in `ws`.
    fn backprop(&self, v: &[f64], dz: &[f64], grads: &mut [f64], ws: &mut Workspace) {
        let rows = self.shape.rows;
        let Workspace {
            acts,
            delta,
            d_in,
            d_features,
            features,
            order,
            ..
        } = ws;
        match self.variant {
            Variant::VanillaFc => {
                self.stack_backward(v, &acts[0], dz, grads, delta, d_in);
            }
            Variant::SetSum => {
                for &u in order.iter() {
                    self.stack_backward(&v[u * rows..(u + 1) * rows], &acts[u], dz, grads, delta, d_in);
                }
            }
            Variant::ReuseConcat => {
                let head = *self.head().expect("concat variant has a head");
                head.backward(&self.params, features, dz, grads, Some(d_features));
                let qs = self.shape.q_size;
                for &u in order.iter() {
                    let d_out = &d_features[u * qs..(u + 1) * qs];
                    self.stack_backward(&v[u * rows..(u + 1) * rows], &acts[u], d_out, grads, delta, d_in);
                }
            }
        }
    }

    /// Loss and full gradient for one sample.
    pub fn gradient(&self, v: &[f64], target: &[f64]) -> Result<(f64, Vec<f64>)> {
        let mut grads = vec![0.0; self.params.len()];
        let l = self.accumulate_gradient(v, target, 1.0, &mut grads, &mut Workspace::default())?;
        Ok((l, grads))
    }
}

#[cfg(test)]
mod tests;
