//! Desk-scale forward passes and the training losses.
//!
//! No training loop: weights are seeded at random or loaded from a file.

mod attention;
mod backbone;
mod heads;
mod losses;
mod matrix;
mod ssm;

pub use attention::{attention_weights, graph_attention};
pub use backbone::{Backbone, BackboneConfig, BackboneOutput, LayerKind, TensorStore};
pub use heads::{DetectionHead, QuantileForecast};
pub use losses::{emd_loss, focal_loss, pinball, pinball_loss, FocalLoss, FOCAL_EPS};
pub use matrix::Matrix;
pub use ssm::{ssm_scan, SsmParams};

use alloc::vec::Vec;

/// Non-overlapping patches of one channel.
#[derive(Debug, Clone, PartialEq)]
pub struct Patches {
    pub patch_len: usize,
    /// `n_patches x patch_len`; the tail of the last patch is zero-padded.
    pub data: Matrix,
    /// Valid samples per patch.
    pub valid: Vec<usize>,
}

impl Patches {
    pub fn n_patches(&self) -> usize {
        self.valid.len()
    }

    /// Concatenated valid samples.
    pub fn unpadded(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.valid.iter().sum());
        for (p, &v) in self.valid.iter().enumerate() {
            out.extend_from_slice(&self.data.row(p)[..v]);
        }
        out
    }
}

pub fn patchify(x: &[f64], patch_len: usize) -> crate::Result<Patches> {
    if patch_len == 0 {
        return Err(crate::Error::Config("patch length must be at least 1".into()));
    }
    let n = x.len().div_ceil(patch_len);
    let mut data = Matrix::zeros(n, patch_len);
    let mut valid = Vec::with_capacity(n);
    for (p, chunk) in x.chunks(patch_len).enumerate() {
        data.row_mut(p)[..chunk.len()].copy_from_slice(chunk);
        valid.push(chunk.len());
    }
    Ok(Patches { patch_len, data, valid })
}
