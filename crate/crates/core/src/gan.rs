//! Generator and discriminator networks.
//!
//! Generator: `z (B, latent)` → linear to `W·M` → `W/Ng` tokens of width
//! `Ng·M` → positional table → encoder stack → `(B, M, 1, W)` → 1×1 channel
//! projection → `(B, C, 1, W)`.
//!
//! Discriminator: `(B, C, 1, W)` → patches of `N` timesteps → linear patch
//! embedding → classification token prepended → positional table of
//! `W/N + 1` rows → encoder stack → linear head on the classification token.

use rand::Rng;
use rand_distr::{Distribution, Open01};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{ChannelProjection, Linear, INIT_STD};
use crate::params::{Bound, ModelParams, ParamId};
use crate::tape::{Mode, Tape, Var};
use crate::tensor::Tensor;
use crate::transformer::{
    add_positional, embed_tokens, patchify_var, positional_table, EncoderConfig, EncoderStack,
    PatchSpec,
};

pub const DEFAULT_LATENT_DIM: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GanConfig {
    pub channels: usize,
    pub seq_len: usize,
    /// Discriminator patch length `N`.
    pub patch_len: usize,
    pub latent_dim: usize,
    /// `embed_dim` is the per-timestep width `M`; the encoder itself runs at
    /// `M * generator_patch_len()`.
    pub generator: EncoderConfig,
    pub discriminator: EncoderConfig,
}

impl GanConfig {
    /// 5-channel, 24-step sinusoids.
    pub fn sinusoid() -> Self {
        Self::with_shape(5, 24, 4, 10)
    }

    /// 3-axis accelerometer windows of 150 steps.
    pub fn har() -> Self {
        Self::with_shape(3, 150, 15, 15)
    }

    /// Single-lead heartbeat windows of 50 steps.
    pub fn ecg() -> Self {
        Self::with_shape(1, 50, 5, 10)
    }

    pub fn with_shape(channels: usize, seq_len: usize, patch_len: usize, embed_dim: usize) -> Self {
        let enc = EncoderConfig {
            embed_dim,
            ..EncoderConfig::default()
        };
        Self {
            channels,
            seq_len,
            patch_len,
            latent_dim: DEFAULT_LATENT_DIM,
            generator: enc,
            discriminator: enc,
        }
    }

    pub fn patch_spec(&self) -> PatchSpec {
        PatchSpec {
            seq_len: self.seq_len,
            patch_len: self.patch_len,
            channels: self.channels,
        }
    }

    /// The generator groups timesteps like the discriminator when the
    /// sequence divides evenly, and uses one token per timestep otherwise.
    pub fn generator_patch_len(&self) -> usize {
        if self.patch_len > 0 && self.seq_len % self.patch_len == 0 {
            self.patch_len
        } else {
            1
        }
    }

    pub fn generator_tokens(&self) -> usize {
        self.seq_len / self.generator_patch_len()
    }

    pub fn generator_encoder(&self) -> EncoderConfig {
        EncoderConfig {
            embed_dim: self.generator.embed_dim * self.generator_patch_len(),
            ..self.generator
        }
    }

    /// Discriminator token count, `W/N + 1`.
    pub fn discriminator_tokens(&self) -> usize {
        self.seq_len / self.patch_len + 1
    }

    pub fn validate(&self) -> Result<()> {
        if self.latent_dim == 0 {
            return Err(Error::Config("latent_dim must be positive".into()));
        }
        self.patch_spec().validate()?;
        self.generator_encoder()
            .validate()
            .map_err(|e| Error::Config(format!("generator: {e}")))?;
        self.discriminator
            .validate()
            .map_err(|e| Error::Config(format!("discriminator: {e}")))
    }
}

/// `B × latent_dim` matrix of i.i.d. draws from the open interval (0, 1).
pub fn sample_latent(batch: usize, latent_dim: usize, rng: &mut impl Rng) -> Tensor {
    let data = (0..batch * latent_dim)
        .map(|_| <Open01 as Distribution<f64>>::sample(&Open01, rng))
        .collect();
    Tensor::new(vec![batch, latent_dim], data).expect("latent shape")
}

#[derive(Debug, Clone)]
pub struct Generator {
    config: GanConfig,
    params: ModelParams,
    input: Linear,
    pos: ParamId,
    encoder: EncoderStack,
    head: ChannelProjection,
}

impl Generator {
    pub fn new(config: GanConfig, rng: &mut impl Rng) -> Result<Self> {
        config.validate()?;
        let m = config.generator.embed_dim;
        let enc = config.generator_encoder();
        let mut params = ModelParams::new();
        let input = Linear::new(&mut params, "gen.input", config.latent_dim, config.seq_len * m, true, rng);
        let pos = positional_table(&mut params, "gen.pos", config.generator_tokens(), enc.embed_dim);
        let encoder = EncoderStack::new(&mut params, "gen.encoder", &enc, rng)?;
        let head = ChannelProjection::new(&mut params, "gen.head", m, config.channels, rng);
        Ok(Self {
            config,
            params,
            input,
            pos,
            encoder,
            head,
        })
    }

    pub fn config(&self) -> &GanConfig {
        &self.config
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ModelParams {
        &mut self.params
    }

    /// Maps `z: (B, latent_dim)` to sequences `(B, C, 1, W)`.
    pub fn forward(&self, tape: &mut Tape, p: &Bound, z: Var, mode: &mut Mode<'_>) -> Result<Var> {
        let cfg = &self.config;
        let b = match *tape.shape(z) {
            [b, l] if l == cfg.latent_dim => b,
            ref s => return Err(Error::dim("generator_forward", s, &[0, cfg.latent_dim])),
        };
        let m = cfg.generator.embed_dim;
        let (w, tokens) = (cfg.seq_len, cfg.generator_tokens());
        let width = m * cfg.generator_patch_len();

        let h = self.input.forward(tape, p, z)?;
        // W tokens of width M, grouped into W/Ng tokens of width Ng·M
        let h = tape.reshape(h, &[b, tokens, width])?;
        let h = add_positional(tape, h, p[self.pos])?;
        let h = self.encoder.forward(tape, p, h, mode)?;
        let h = tape.reshape(h, &[b, w, m])?;
        let h = tape.permute(h, &[0, 2, 1])?;
        let h = tape.reshape(h, &[b, m, 1, w])?;
        self.head.forward(tape, p, h)
    }

    /// Runs the generator outside of any training graph.
    pub fn generate(&self, z: &Tensor, mode: &mut Mode<'_>) -> Result<Tensor> {
        let mut tape = Tape::new();
        let p = self.params.bind_frozen(&mut tape);
        let zv = tape.constant(z.clone());
        let out = self.forward(&mut tape, &p, zv, mode)?;
        Ok(tape.value(out).clone())
    }
}

#[derive(Debug, Clone)]
pub struct Discriminator {
    config: GanConfig,
    params: ModelParams,
    patch_embed: Linear,
    cls_token: ParamId,
    pos: ParamId,
    encoder: EncoderStack,
    head: Linear,
}

impl Discriminator {
    pub fn new(config: GanConfig, rng: &mut impl Rng) -> Result<Self> {
        config.validate()?;
        let spec = config.patch_spec();
        let m = config.discriminator.embed_dim;
        let mut params = ModelParams::new();
        let patch_embed = Linear::new(&mut params, "dis.patch_embed", spec.patch_dim(), m, true, rng);
        let cls_token = params.push_normal("dis.cls_token", &[1, m], INIT_STD, rng);
        let pos = positional_table(&mut params, "dis.pos", config.discriminator_tokens(), m);
        let encoder = EncoderStack::new(&mut params, "dis.encoder", &config.discriminator, rng)?;
        let head = Linear::new(&mut params, "dis.head", m, 1, true, rng);
        Ok(Self {
            config,
            params,
            patch_embed,
            cls_token,
            pos,
            encoder,
            head,
        })
    }

    pub fn config(&self) -> &GanConfig {
        &self.config
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ModelParams {
        &mut self.params
    }

    /// Encoder input tokens `(B, W/N + 1, M)`, classification token first.
    pub fn tokenize(&self, tape: &mut Tape, p: &Bound, x: Var) -> Result<Var> {
        let spec = self.config.patch_spec();
        let patches = patchify_var(tape, x, &spec)?;
        let b = tape.shape(patches)[0];
        let m = self.config.discriminator.embed_dim;
        let tokens = embed_tokens(tape, p, patches, &self.patch_embed)?;
        let ones = tape.constant(Tensor::ones(&[b, 1]));
        let cls = tape.matmul(ones, p[self.cls_token])?;
        let cls = tape.reshape(cls, &[b, 1, m])?;
        let tokens = tape.concat(&[cls, tokens], 1)?;
        add_positional(tape, tokens, p[self.pos])
    }

    /// One logit per sequence, shaped `(B, 1)`.
    pub fn forward(&self, tape: &mut Tape, p: &Bound, x: Var, mode: &mut Mode<'_>) -> Result<Var> {
        let tokens = self.tokenize(tape, p, x)?;
        let b = tape.shape(tokens)[0];
        let m = self.config.discriminator.embed_dim;
        let h = self.encoder.forward(tape, p, tokens, mode)?;
        let cls = tape.narrow(h, 1, 0, 1)?;
        let cls = tape.reshape(cls, &[b, m])?;
        self.head.forward(tape, p, cls)
    }

    pub fn score(&self, x: &Tensor, mode: &mut Mode<'_>) -> Result<Tensor> {
        let mut tape = Tape::new();
        let p = self.params.bind_frozen(&mut tape);
        let xv = tape.constant(x.clone());
        let out = self.forward(&mut tape, &p, xv, mode)?;
        Ok(tape.value(out).clone())
    }
}
