//! Patch tokenization of `(B, C, 1, W)` sequences and the pre-norm
//! transformer encoder shared by the generator and discriminator.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{LayerNorm, Linear};
use crate::params::{Bound, ModelParams, ParamId};
use crate::tape::{Mode, Tape, Var};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EncoderConfig {
    pub embed_dim: usize,
    pub num_heads: usize,
    pub mlp_ratio: usize,
    pub dropout_p: f64,
    pub depth: usize,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        Self {
            embed_dim: 10,
            num_heads: 5,
            mlp_ratio: 4,
            dropout_p: 0.1,
            depth: 3,
        }
    }
}

impl EncoderConfig {
    pub fn validate(&self) -> Result<()> {
        if self.embed_dim == 0 || self.num_heads == 0 || self.mlp_ratio == 0 || self.depth == 0 {
            return Err(Error::Config(format!(
                "encoder dimensions must be positive: {self:?}"
            )));
        }
        if self.embed_dim % self.num_heads != 0 {
            return Err(Error::Config(format!(
                "embed_dim {} is not divisible by num_heads {}",
                self.embed_dim, self.num_heads
            )));
        }
        if !(0.0..1.0).contains(&self.dropout_p) {
            return Err(Error::Config(format!(
                "dropout_p {} outside [0, 1)",
                self.dropout_p
            )));
        }
        Ok(())
    }

    pub fn head_dim(&self) -> usize {
        self.embed_dim / self.num_heads
    }
}

/// How a `(C, 1, W)` sequence is cut into width-`patch_len` tokens.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatchSpec {
    pub seq_len: usize,
    pub patch_len: usize,
    pub channels: usize,
}

impl PatchSpec {
    pub fn new(seq_len: usize, patch_len: usize, channels: usize) -> Result<Self> {
        let spec = Self {
            seq_len,
            patch_len,
            channels,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.seq_len == 0 || self.patch_len == 0 || self.channels == 0 {
            return Err(Error::Config(format!("patch spec has a zero field: {self:?}")));
        }
        if self.seq_len % self.patch_len != 0 {
            return Err(Error::Config(format!(
                "sequence length {} is not divisible by patch length {}",
                self.seq_len, self.patch_len
            )));
        }
        Ok(())
    }

    pub fn num_patches(&self) -> usize {
        self.seq_len / self.patch_len
    }

    /// Width of a flattened patch, `patch_len * channels`.
    pub fn patch_dim(&self) -> usize {
        self.patch_len * self.channels
    }

    fn check_input(&self, shape: &[usize]) -> Result<usize> {
        self.validate()?;
        match shape {
            &[b, c, 1, w] if c == self.channels && w == self.seq_len => Ok(b),
            _ => Err(Error::dim(
                "patchify",
                shape,
                &[0, self.channels, 1, self.seq_len],
            )),
        }
    }
}

// Within a patch, values are laid out channel-major: index c * patch_len + j.
const TO_PATCHES: [usize; 4] = [0, 2, 1, 3];

/// `(B, C, 1, W)` → `(B, W/N, N·C)`; patch `t` holds timesteps `[tN, (t+1)N)`.
pub fn patchify(x: &Tensor, spec: &PatchSpec) -> Result<Tensor> {
    let b = spec.check_input(x.shape())?;
    let (c, t, n) = (spec.channels, spec.num_patches(), spec.patch_len);
    x.clone()
        .reshape(&[b, c, t, n])?
        .permute(&TO_PATCHES)?
        .reshape(&[b, t, c * n])
}

/// Exact inverse of [`patchify`].
pub fn unpatchify(patches: &Tensor, spec: &PatchSpec) -> Result<Tensor> {
    spec.validate()?;
    let (c, t, n) = (spec.channels, spec.num_patches(), spec.patch_len);
    let b = match patches.shape() {
        &[b, tt, d] if tt == t && d == c * n => b,
        s => return Err(Error::dim("unpatchify", s, &[0, t, c * n])),
    };
    patches
        .clone()
        .reshape(&[b, t, c, n])?
        .permute(&TO_PATCHES)?
        .reshape(&[b, c, 1, spec.seq_len])
}

/// Differentiable [`patchify`].
pub fn patchify_var(tape: &mut Tape, x: Var, spec: &PatchSpec) -> Result<Var> {
    let b = spec.check_input(tape.shape(x))?;
    let (c, t, n) = (spec.channels, spec.num_patches(), spec.patch_len);
    let split = tape.reshape(x, &[b, c, t, n])?;
    let moved = tape.permute(split, &TO_PATCHES)?;
    tape.reshape(moved, &[b, t, c * n])
}

/// Linear projection of each `(N·C)`-wide patch to the embedding width.
pub fn embed_tokens(tape: &mut Tape, p: &Bound, patches: Var, projection: &Linear) -> Result<Var> {
    let s = tape.shape(patches);
    if s.len() != 3 || s[2] != projection.in_dim {
        return Err(Error::dim("embed_tokens", s, &[0, 0, projection.in_dim]));
    }
    projection.forward(tape, p, patches)
}

/// Adds a `(T, M)` table to every sequence of `(B, T, M)` tokens.
pub fn add_positional(tape: &mut Tape, tokens: Var, pos: Var) -> Result<Var> {
    let ts = tape.shape(tokens);
    let ps = tape.shape(pos);
    if ts.len() != 3 || ps != &ts[1..] {
        return Err(Error::dim("add_positional", ts, ps));
    }
    tape.add(tokens, pos)
}

#[derive(Debug, Clone)]
pub struct MultiHeadAttention {
    pub query: Linear,
    pub key: Linear,
    pub value: Linear,
    pub out: Linear,
    pub num_heads: usize,
    pub embed_dim: usize,
}

impl MultiHeadAttention {
    pub fn new(params: &mut ModelParams, name: &str, cfg: &EncoderConfig, rng: &mut impl Rng) -> Result<Self> {
        cfg.validate()?;
        let m = cfg.embed_dim;
        Ok(Self {
            query: Linear::new(params, &format!("{name}.query"), m, m, true, rng),
            key: Linear::new(params, &format!("{name}.key"), m, m, true, rng),
            value: Linear::new(params, &format!("{name}.value"), m, m, true, rng),
            out: Linear::new(params, &format!("{name}.out"), m, m, true, rng),
            num_heads: cfg.num_heads,
            embed_dim: m,
        })
    }

    pub fn forward(&self, tape: &mut Tape, p: &Bound, x: Var) -> Result<Var> {
        self.forward_with_weights(tape, p, x).map(|(out, _)| out)
    }

    /// Returns the projected output and the attention weights, shaped
    /// `(B, heads, T, T)`.
    pub fn forward_with_weights(&self, tape: &mut Tape, p: &Bound, x: Var) -> Result<(Var, Var)> {
        let (b, t) = match *tape.shape(x) {
            [b, t, m] if m == self.embed_dim => (b, t),
            ref s => return Err(Error::dim("multi_head_attention", s, &[0, 0, self.embed_dim])),
        };
        let h = self.num_heads;
        if self.embed_dim % h != 0 {
            return Err(Error::Config(format!(
                "embed_dim {} is not divisible by num_heads {h}",
                self.embed_dim
            )));
        }
        let d = self.embed_dim / h;

        let split = |tape: &mut Tape, lin: &Linear| -> Result<Var> {
            let y = lin.forward(tape, p, x)?;
            let y = tape.reshape(y, &[b, t, h, d])?;
            let y = tape.permute(y, &[0, 2, 1, 3])?;
            tape.reshape(y, &[b * h, t, d])
        };
        let q = split(tape, &self.query)?;
        let k = split(tape, &self.key)?;
        let v = split(tape, &self.value)?;

        let kt = tape.permute(k, &[0, 2, 1])?;
        let scores = tape.matmul(q, kt)?;
        let scores = tape.scale(scores, 1.0 / (d as f64).sqrt());
        let weights = tape.softmax(scores, 2)?;
        let ctx = tape.matmul(weights, v)?;

        let ctx = tape.reshape(ctx, &[b, h, t, d])?;
        let ctx = tape.permute(ctx, &[0, 2, 1, 3])?;
        let ctx = tape.reshape(ctx, &[b, t, self.embed_dim])?;
        let out = self.out.forward(tape, p, ctx)?;
        let weights = tape.reshape(weights, &[b, h, t, t])?;
        Ok((out, weights))
    }
}

/// Pre-norm block: `x + Drop(MHA(LN(x)))`, then `x + Drop(MLP(LN(x)))`.
#[derive(Debug, Clone)]
pub struct EncoderBlock {
    pub norm1: LayerNorm,
    pub attention: MultiHeadAttention,
    pub norm2: LayerNorm,
    pub fc1: Linear,
    pub fc2: Linear,
    pub dropout_p: f64,
}

impl EncoderBlock {
    pub fn new(params: &mut ModelParams, name: &str, cfg: &EncoderConfig, rng: &mut impl Rng) -> Result<Self> {
        cfg.validate()?;
        let m = cfg.embed_dim;
        let hidden = m * cfg.mlp_ratio;
        Ok(Self {
            norm1: LayerNorm::new(params, &format!("{name}.norm1"), m),
            attention: MultiHeadAttention::new(params, &format!("{name}.attn"), cfg, rng)?,
            norm2: LayerNorm::new(params, &format!("{name}.norm2"), m),
            fc1: Linear::new(params, &format!("{name}.mlp.fc1"), m, hidden, true, rng),
            fc2: Linear::new(params, &format!("{name}.mlp.fc2"), hidden, m, true, rng),
            dropout_p: cfg.dropout_p,
        })
    }

    pub fn forward(&self, tape: &mut Tape, p: &Bound, x: Var, mode: &mut Mode<'_>) -> Result<Var> {
        let h = self.norm1.forward(tape, p, x)?;
        let h = self.attention.forward(tape, p, h)?;
        let h = tape.dropout(h, self.dropout_p, mode)?;
        let x = tape.add(x, h)?;

        let h = self.norm2.forward(tape, p, x)?;
        let h = self.fc1.forward(tape, p, h)?;
        let h = tape.gelu(h);
        let h = self.fc2.forward(tape, p, h)?;
        let h = tape.dropout(h, self.dropout_p, mode)?;
        tape.add(x, h)
    }
}

#[derive(Debug, Clone)]
pub struct EncoderStack {
    pub blocks: Vec<EncoderBlock>,
}

impl EncoderStack {
    pub fn new(params: &mut ModelParams, name: &str, cfg: &EncoderConfig, rng: &mut impl Rng) -> Result<Self> {
        cfg.validate()?;
        let blocks = (0..cfg.depth)
            .map(|i| EncoderBlock::new(params, &format!("{name}.blocks.{i}"), cfg, rng))
            .collect::<Result<_>>()?;
        Ok(Self { blocks })
    }

    pub fn forward(&self, tape: &mut Tape, p: &Bound, mut x: Var, mode: &mut Mode<'_>) -> Result<Var> {
        for block in &self.blocks {
            x = block.forward(tape, p, x, mode)?;
        }
        Ok(x)
    }
}

/// True for parameters belonging to attention or MLP sublayers; zeroing them
/// turns every encoder block into the identity map.
pub fn is_residual_branch_param(name: &str) -> bool {
    name.contains(".attn.") || name.contains(".mlp.")
}

/// Learned `(T, M)` positional table, initialized to zero.
pub fn positional_table(params: &mut ModelParams, name: &str, tokens: usize, width: usize) -> ParamId {
    params.push(name, Tensor::zeros(&[tokens, width]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn seq(b: usize, c: usize, w: usize) -> Tensor {
        Tensor::from_fn(&[b, c, 1, w], |i| (i[0] * 1000 + i[1] * 100 + i[3]) as f64)
    }

    #[test]
    fn patchify_groups_timesteps() {
        let spec = PatchSpec::new(24, 4, 5).unwrap();
        let x = seq(2, 5, 24);
        let p = patchify(&x, &spec).unwrap();
        assert_eq!(p.shape(), &[2, 6, 20]);
        // patch 2 of sample 1, channel 3, offset 1 -> timestep 9
        assert_eq!(p.get(&[1, 2, 3 * 4 + 1]), 1000.0 + 300.0 + 9.0);
        assert_eq!(unpatchify(&p, &spec).unwrap(), x);
    }

    #[test]
    fn single_patch_is_flattened_sequence() {
        let spec = PatchSpec::new(6, 6, 2).unwrap();
        let x = seq(1, 2, 6);
        let p = patchify(&x, &spec).unwrap();
        assert_eq!(p.shape(), &[1, 1, 12]);
        assert_eq!(p.data(), x.data());
    }

    #[test]
    fn indivisible_patch_is_config_error() {
        assert!(matches!(PatchSpec::new(24, 5, 1), Err(Error::Config(_))));
    }

    #[test]
    fn patchify_var_matches_plain() {
        let spec = PatchSpec::new(12, 3, 2).unwrap();
        let x = seq(3, 2, 12);
        let mut tape = Tape::new();
        let v = tape.constant(x.clone());
        let p = patchify_var(&mut tape, v, &spec).unwrap();
        assert_eq!(tape.value(p), &patchify(&x, &spec).unwrap());
    }

    #[test]
    fn head_divisibility_checked() {
        let cfg = EncoderConfig {
            embed_dim: 10,
            num_heads: 3,
            ..Default::default()
        };
        let mut params = ModelParams::new();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(
            MultiHeadAttention::new(&mut params, "a", &cfg, &mut rng),
            Err(Error::Config(_))
        ));
    }
}
