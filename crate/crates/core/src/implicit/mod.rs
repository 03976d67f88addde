//! Single-shape occupancy MLP: `3 -> Linear(w) -> k residual blocks -> act
//! -> Linear(1) -> logistic`, trained with binary cross-entropy.

mod checkpoint;
mod train;

pub use checkpoint::{from_bytes, read_checkpoint, to_bytes, write_checkpoint};
pub use train::{fit, fit_with_history, gradient, loss, loss_and_gradient, relative_error, PROB_CLIP, RELATIVE_ERROR_FLOOR};

use crate::geometry::Point3;
use crate::mesh::{MeshError, TriangleMesh};
use crate::occupancy::{OccupancyError, OccupancyGrid};
use crate::seed;
use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FitError {
    #[error("loss became non-finite at epoch {epoch}")]
    Diverged { epoch: usize },
    #[error("invalid fit config: {0}")]
    InvalidConfig(String),
    #[error("empty sample batch")]
    EmptyBatch,
    #[error("sample {0} has a non-finite coordinate")]
    NonFiniteSample(usize),
    #[error("parameter vector has length {actual}, architecture needs {expected}")]
    ParameterCount { expected: usize, actual: usize },
    #[error("malformed checkpoint: {0}")]
    Malformed(String),
    #[error("checkpoint checksum mismatch")]
    ChecksumMismatch,
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Occupancy(#[from] OccupancyError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Softplus,
    #[default]
    Relu,
}

impl Activation {
    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Softplus => x.max(0.0) + (-x.abs()).exp().ln_1p(),
            Activation::Relu => x.max(0.0),
        }
    }

    #[inline]
    pub fn derivative(self, x: f64) -> f64 {
        match self {
            Activation::Softplus => logistic(x),
            Activation::Relu => (x > 0.0) as u8 as f64,
        }
    }

    fn code(self) -> u8 {
        match self {
            Activation::Softplus => 0,
            Activation::Relu => 1,
        }
    }

    fn from_code(c: u8) -> Option<Self> {
        match c {
            0 => Some(Activation::Softplus),
            1 => Some(Activation::Relu),
            _ => None,
        }
    }
}

#[inline]
pub fn logistic(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub seed: u64,
    pub width: usize,
    pub blocks: usize,
    pub activation: Activation,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            epochs: 2000,
            batch_size: 512,
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            seed: 0,
            width: 64,
            blocks: 5,
            activation: Activation::Relu,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<(), FitError> {
        let bad = |m: &str| Err(FitError::InvalidConfig(m.to_string()));
        if self.epochs == 0 {
            return bad("epochs must be >= 1");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be >= 1");
        }
        if self.width == 0 {
            return bad("width must be >= 1");
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return bad("learning_rate must be positive");
        }
        for (name, b) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(0.0..1.0).contains(&b) {
                return Err(FitError::InvalidConfig(format!("{name} must lie in [0, 1)")));
            }
        }
        if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
            return bad("epsilon must be positive");
        }
        Ok(())
    }
}

/// Offsets of each tensor inside the flat parameter vector.
#[derive(Debug, Clone, Copy)]
struct Layout {
    width: usize,
    blocks: usize,
}

impl Layout {
    fn block_len(&self) -> usize {
        2 * self.width * self.width + 2 * self.width
    }
    fn w0(&self) -> usize {
        0
    }
    fn b0(&self) -> usize {
        3 * self.width
    }
    fn block(&self, k: usize) -> usize {
        4 * self.width + k * self.block_len()
    }
    fn w1(&self, k: usize) -> usize {
        self.block(k)
    }
    fn b1(&self, k: usize) -> usize {
        self.block(k) + self.width * self.width
    }
    fn w2(&self, k: usize) -> usize {
        self.b1(k) + self.width
    }
    fn b2(&self, k: usize) -> usize {
        self.w2(k) + self.width * self.width
    }
    fn wout(&self) -> usize {
        self.block(self.blocks)
    }
    fn bout(&self) -> usize {
        self.wout() + self.width
    }
    fn len(&self) -> usize {
        self.bout() + 1
    }
}

pub fn parameter_count(width: usize, blocks: usize) -> usize {
    Layout { width, blocks }.len()
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpOccupancy {
    pub width: usize,
    pub blocks: usize,
    pub activation: Activation,
    pub params: Vec<f64>,
    /// Seed the weights were initialized and trained from.
    pub seed: u64,
}

/// Intermediate values kept for the backward pass.
pub(crate) struct ForwardCache {
    pub x: Array2<f64>,
    /// Residual stream before each block plus the final one.
    pub h: Vec<Array2<f64>>,
    /// Pre-activation of the first linear layer inside each block.
    pub u: Vec<Array2<f64>>,
    pub z: Array1<f64>,
}

impl MlpOccupancy {
    /// Fan-in uniform initialization; the output bias starts at 0.
    pub fn init(width: usize, blocks: usize, activation: Activation, seed_value: u64) -> Self {
        let layout = Layout { width, blocks };
        let mut params = vec![0.0; layout.len()];
        let mut rng = seed::rng(seed::derive_seed(seed_value, seed::stream::FIT_INIT, 0));
        let mut fill = |params: &mut [f64], fan_in: usize| {
            let bound = 1.0 / (fan_in as f64).sqrt();
            for p in params {
                *p = rng.random_range(-bound..bound);
            }
        };
        fill(&mut params[layout.w0()..layout.b0() + width], 3);
        for k in 0..blocks {
            fill(&mut params[layout.block(k)..layout.block(k + 1)], width);
        }
        fill(&mut params[layout.wout()..layout.bout()], width);
        Self {
            width,
            blocks,
            activation,
            params,
            seed: seed_value,
        }
    }

    pub fn from_config(config: &FitConfig) -> Self {
        Self::init(config.width, config.blocks, config.activation, config.seed)
    }

    pub fn from_params(
        width: usize,
        blocks: usize,
        activation: Activation,
        params: Vec<f64>,
        seed_value: u64,
    ) -> Result<Self, FitError> {
        let expected = parameter_count(width, blocks);
        if params.len() != expected {
            return Err(FitError::ParameterCount {
                expected,
                actual: params.len(),
            });
        }
        Ok(Self {
            width,
            blocks,
            activation,
            params,
            seed: seed_value,
        })
    }

    fn layout(&self) -> Layout {
        Layout {
            width: self.width,
            blocks: self.blocks,
        }
    }

    pub fn parameter_count(&self) -> usize {
        self.params.len()
    }

    fn mat(&self, offset: usize, rows: usize, cols: usize) -> ArrayView2<'_, f64> {
        ArrayView2::from_shape((rows, cols), &self.params[offset..offset + rows * cols]).unwrap()
    }

    fn vec(&self, offset: usize, len: usize) -> ArrayView1<'_, f64> {
        ArrayView1::from(&self.params[offset..offset + len])
    }

    pub(crate) fn forward_cached(&self, x: Array2<f64>) -> ForwardCache {
        let l = self.layout();
        let w = self.width;
        let act = self.activation;
        let mut h = Vec::with_capacity(self.blocks + 1);
        let mut u = Vec::with_capacity(self.blocks);
        h.push(x.dot(&self.mat(l.w0(), w, 3).t()) + self.vec(l.b0(), w));
        for k in 0..self.blocks {
            let a = h[k].mapv(|v| act.apply(v));
            let uk = a.dot(&self.mat(l.w1(k), w, w).t()) + self.vec(l.b1(k), w);
            let v = uk.mapv(|v| act.apply(v));
            let next = &h[k] + &(v.dot(&self.mat(l.w2(k), w, w).t()) + self.vec(l.b2(k), w));
            u.push(uk);
            h.push(next);
        }
        let af = h[self.blocks].mapv(|v| act.apply(v));
        let z = af.dot(&self.vec(l.wout(), w)) + self.params[l.bout()];
        ForwardCache { x, h, u, z }
    }

    /// Gradient of `sum_i dz_i * z_i` with respect to every parameter.
    pub(crate) fn backward(&self, cache: &ForwardCache, dz: &Array1<f64>) -> Vec<f64> {
        let l = self.layout();
        let w = self.width;
        let act = self.activation;
        let mut g = vec![0.0; l.len()];
        let mut put = |offset: usize, src: &[f64]| g[offset..offset + src.len()].copy_from_slice(src);

        let hb = &cache.h[self.blocks];
        let af = hb.mapv(|v| act.apply(v));
        put(l.wout(), af.t().dot(dz).as_slice().unwrap());
        put(l.bout(), &[dz.sum()]);
        let wout = self.vec(l.wout(), w);
        let mut dh = Array2::from_shape_fn(hb.raw_dim(), |(i, j)| {
            dz[i] * wout[j] * act.derivative(hb[[i, j]])
        });
        for k in (0..self.blocks).rev() {
            let uk = &cache.u[k];
            let hk = &cache.h[k];
            let v = uk.mapv(|x| act.apply(x));
            put(l.w2(k), dh.t().dot(&v).as_standard_layout().as_slice().unwrap());
            put(l.b2(k), dh.sum_axis(Axis(0)).as_slice().unwrap());
            let mut du = dh.dot(&self.mat(l.w2(k), w, w));
            du.zip_mut_with(uk, |d, &x| *d *= act.derivative(x));
            let a = hk.mapv(|x| act.apply(x));
            put(l.w1(k), du.t().dot(&a).as_standard_layout().as_slice().unwrap());
            put(l.b1(k), du.sum_axis(Axis(0)).as_slice().unwrap());
            let mut da = du.dot(&self.mat(l.w1(k), w, w));
            da.zip_mut_with(hk, |d, &x| *d *= act.derivative(x));
            dh += &da;
        }
        put(l.w0(), dh.t().dot(&cache.x).as_standard_layout().as_slice().unwrap());
        put(l.b0(), dh.sum_axis(Axis(0)).as_slice().unwrap());
        g
    }

    /// Pre-logistic outputs for a batch.
    pub fn logits(&self, points: &[Point3]) -> Vec<f64> {
        let x = Array2::from_shape_fn((points.len(), 3), |(i, a)| points[i][a]);
        self.forward_cached(x).z.to_vec()
    }

    pub fn forward_batch(&self, points: &[Point3]) -> Vec<f64> {
        self.logits(points).into_iter().map(logistic).collect()
    }

    pub fn forward(&self, p: &Point3) -> f64 {
        self.forward_batch(std::slice::from_ref(p))[0]
    }
}

/// Model probabilities on the cell-centered unit-cube grid.
pub fn model_grid(model: &MlpOccupancy, resolution: usize) -> Result<OccupancyGrid, FitError> {
    let (origin, spacing) = OccupancyGrid::unit_cube_layout(resolution)?;
    let r = resolution;
    let mut values = vec![0.0; r * r * r];
    values.par_chunks_mut(r * r).enumerate().for_each(|(z, slab)| {
        let pts: Vec<Point3> = (0..r * r)
            .map(|i| {
                let (x, y) = (i % r, i / r);
                Point3::new(
                    origin.x + x as f64 * spacing,
                    origin.y + y as f64 * spacing,
                    origin.z + z as f64 * spacing,
                )
            })
            .collect();
        slab.copy_from_slice(&model.forward_batch(&pts));
    });
    Ok(OccupancyGrid {
        resolution: [r; 3],
        values,
        origin,
        spacing,
    })
}

pub const DEFAULT_THRESHOLD: f64 = 0.5;

/// Marching cubes of `{forward > threshold}` on a unit-cube grid, closed at
/// the cube boundary.
pub fn extract_mesh(model: &MlpOccupancy, resolution: usize, threshold: f64) -> Result<TriangleMesh, FitError> {
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(MeshError::InvalidIso(threshold).into());
    }
    Ok(model_grid(model, resolution)?.to_mesh(threshold)?)
}
