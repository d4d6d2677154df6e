//! Parameterized building blocks shared by the encoder and both GAN networks.

use rand::Rng;

use crate::error::{Error, Result};
use crate::params::{Bound, ModelParams, ParamId};
use crate::tape::{Tape, Var};
use crate::tensor::Tensor;

/// Standard deviation for linear weight initialization.
pub const INIT_STD: f64 = 0.02;

pub const LAYER_NORM_EPS: f64 = 1e-5;

/// Affine map over the last axis, weight stored as `[in, out]`.
#[derive(Debug, Clone)]
pub struct Linear {
    pub weight: ParamId,
    pub bias: Option<ParamId>,
    pub in_dim: usize,
    pub out_dim: usize,
}

impl Linear {
    pub fn new(
        params: &mut ModelParams,
        name: &str,
        in_dim: usize,
        out_dim: usize,
        bias: bool,
        rng: &mut impl Rng,
    ) -> Self {
        let weight = params.push_normal(format!("{name}.weight"), &[in_dim, out_dim], INIT_STD, rng);
        let bias = bias.then(|| params.push(format!("{name}.bias"), Tensor::zeros(&[out_dim])));
        Self {
            weight,
            bias,
            in_dim,
            out_dim,
        }
    }

    pub fn forward(&self, tape: &mut Tape, p: &Bound, x: Var) -> Result<Var> {
        tape.linear(x, p[self.weight], self.bias.map(|b| p[b]))
    }
}

#[derive(Debug, Clone)]
pub struct LayerNorm {
    pub gamma: ParamId,
    pub beta: ParamId,
    pub eps: f64,
}

impl LayerNorm {
    pub fn new(params: &mut ModelParams, name: &str, width: usize) -> Self {
        Self {
            gamma: params.push(format!("{name}.gamma"), Tensor::ones(&[width])),
            beta: params.push(format!("{name}.beta"), Tensor::zeros(&[width])),
            eps: LAYER_NORM_EPS,
        }
    }

    pub fn forward(&self, tape: &mut Tape, p: &Bound, x: Var) -> Result<Var> {
        tape.layer_norm(x, p[self.gamma], p[self.beta], self.eps)
    }
}

/// 1×1 convolution over a `(B, H, 1, W)` map: every timestep's `H`-vector is
/// mapped to `C` outputs by `weights: [C, H]` plus `bias: [C]`, giving
/// `(B, C, 1, W)`.
pub fn pointwise_channel_projection(
    tape: &mut Tape,
    x: Var,
    weights: Var,
    bias: Var,
) -> Result<Var> {
    let xs = tape.shape(x).to_vec();
    let ws = tape.shape(weights).to_vec();
    if xs.len() != 4 || xs[2] != 1 || ws.len() != 2 || ws[1] != xs[1] {
        return Err(Error::dim("pointwise_channel_projection", &xs, &ws));
    }
    if tape.shape(bias) != [ws[0]] {
        return Err(Error::dim("pointwise_channel_projection", &ws, tape.shape(bias)));
    }
    // (B, H, 1, W) -> (B, 1, W, H)
    let per_step = tape.permute(x, &[0, 2, 3, 1])?;
    let wt = tape.permute(weights, &[1, 0])?;
    let mapped = tape.linear(per_step, wt, Some(bias))?;
    tape.permute(mapped, &[0, 3, 1, 2])
}

/// Learned [`pointwise_channel_projection`] layer.
#[derive(Debug, Clone)]
pub struct ChannelProjection {
    pub weight: ParamId,
    pub bias: ParamId,
}

impl ChannelProjection {
    pub fn new(
        params: &mut ModelParams,
        name: &str,
        in_channels: usize,
        out_channels: usize,
        rng: &mut impl Rng,
    ) -> Self {
        Self {
            weight: params.push_normal(
                format!("{name}.weight"),
                &[out_channels, in_channels],
                INIT_STD,
                rng,
            ),
            bias: params.push(format!("{name}.bias"), Tensor::zeros(&[out_channels])),
        }
    }

    pub fn forward(&self, tape: &mut Tape, p: &Bound, x: Var) -> Result<Var> {
        pointwise_channel_projection(tape, x, p[self.weight], p[self.bias])
    }
}
