use genboot_tensor::Tensor;

use crate::error::{Error, Result};
use crate::rng::{fill_standard_normal, GbRng};

/// `(len + window) x noise_dim` matrix of iid standard normal draws feeding
/// one generated path of length `len`.
#[derive(Clone, Debug, PartialEq)]
pub struct NoiseBlock {
    matrix: Tensor,
    window: usize,
}

impl NoiseBlock {
    pub fn draw(len: usize, window: usize, noise_dim: usize, rng: &mut GbRng) -> Result<Self> {
        if len == 0 || noise_dim == 0 {
            return Err(Error::Config("noise block needs len >= 1 and noise_dim >= 1".into()));
        }
        let mut data = vec![0.0; (len + window) * noise_dim];
        fill_standard_normal(rng, &mut data);
        Ok(NoiseBlock {
            matrix: Tensor::new(vec![len + window, noise_dim], data)?,
            window,
        })
    }

    pub fn from_matrix(matrix: Tensor, window: usize) -> Result<Self> {
        if matrix.rank() != 2 || matrix.shape()[0] <= window {
            return Err(Error::Config(format!(
                "noise matrix {:?} needs rank 2 and more than {window} rows",
                matrix.shape()
            )));
        }
        Ok(NoiseBlock { matrix, window })
    }

    pub fn matrix(&self) -> &Tensor {
        &self.matrix
    }

    pub fn window(&self) -> usize {
        self.window
    }

    /// Length of the path this block generates.
    pub fn output_len(&self) -> usize {
        self.matrix.shape()[0] - self.window
    }
}

/// `(n, len + window, noise_dim)` noise for a batch of `n` paths.
pub fn noise_batch(n: usize, len: usize, window: usize, noise_dim: usize, rng: &mut GbRng) -> Tensor {
    let mut data = vec![0.0; n * (len + window) * noise_dim];
    fill_standard_normal(rng, &mut data);
    Tensor::new(vec![n, len + window, noise_dim], data).expect("length matches shape")
}
