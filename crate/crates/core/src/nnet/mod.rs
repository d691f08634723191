//! Minimal reverse-mode differentiable network engine and the three toy
//! models built on it: the patch reconstructor, its training
//! discriminator, and the overlap-score regressor.
//!
//! Activations flow as plain [`Tensor`]s; parameters and attack inputs
//! are [`DiffTensor`]s that accumulate gradients. All arithmetic is f64;
//! parameter values are kept on the f32 grid so checkpoints round-trip
//! losslessly.

mod checkpoint;
mod layers;
mod loss;
mod models;
mod optim;
mod train;

pub use checkpoint::{load_rec_model, load_reg_model, save_rec_model, save_reg_model};
pub use layers::{concat_channels, split_channels, Conv2d, LeakyRelu, Linear, Sigmoid, Upsample2x};
pub use loss::{bce_logit_loss, mae_loss, mse_loss};
pub use models::{generate, predict_dsc, DiscModel, RecModel, RegModel};
pub use optim::Adam;
pub use train::{
    train_recnet, train_regnet, RecSample, RecTraining, ReconLoss, RegSample, RegTraining,
    StepStats, TrainConfig,
};

use crate::error::{Error, Result};

/// A shaped value array in channel-major (C, H, W) order.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        let expect: usize = shape.iter().product();
        if data.len() != expect {
            return Err(Error::Shape(format!(
                "tensor data length {} != shape {:?}",
                data.len(),
                shape
            )));
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let len = shape.iter().product();
        Self { shape, data: vec![0.0; len] }
    }

    /// Stack row-major planes of equal size into a (C, H, W) tensor.
    pub fn from_planes(planes: &[&[f64]], h: usize, w: usize) -> Result<Self> {
        let mut data = Vec::with_capacity(planes.len() * h * w);
        for p in planes {
            if p.len() != h * w {
                return Err(Error::Shape(format!("plane length {} != {h}x{w}", p.len())));
            }
            data.extend_from_slice(p);
        }
        Tensor::new(vec![planes.len(), h, w], data)
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    /// Same data under a new shape of equal length.
    pub fn reshaped(mut self, shape: Vec<usize>) -> Result<Self> {
        let expect: usize = shape.iter().product();
        if expect != self.data.len() {
            return Err(Error::Shape(format!(
                "cannot reshape {} elements to {:?}",
                self.data.len(),
                shape
            )));
        }
        self.shape = shape;
        Ok(self)
    }

    /// One channel plane of a (C, H, W) tensor.
    pub fn channel(&self, c: usize) -> &[f64] {
        let plane = self.shape[1] * self.shape[2];
        &self.data[c * plane..(c + 1) * plane]
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

/// A shaped value array with an accumulated gradient of the same shape.
#[derive(Debug, Clone, PartialEq)]
pub struct DiffTensor {
    pub shape: Vec<usize>,
    pub values: Vec<f64>,
    pub grad: Vec<f64>,
}

impl DiffTensor {
    pub fn new(shape: Vec<usize>, values: Vec<f64>) -> Result<Self> {
        let expect: usize = shape.iter().product();
        if values.len() != expect {
            return Err(Error::Shape(format!(
                "tensor data length {} != shape {:?}",
                values.len(),
                shape
            )));
        }
        let grad = vec![0.0; values.len()];
        Ok(Self { shape, values, grad })
    }

    pub fn from_tensor(t: &Tensor) -> Self {
        Self { shape: t.shape.clone(), values: t.data.clone(), grad: vec![0.0; t.data.len()] }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn zero_grad(&mut self) {
        self.grad.iter_mut().for_each(|g| *g = 0.0);
    }

    pub fn all_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}
