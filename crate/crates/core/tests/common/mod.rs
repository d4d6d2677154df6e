#![allow(dead_code)]

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use tsforge::gan::GanConfig;
use tsforge::tape::{Tape, Var};
use tsforge::transformer::EncoderConfig;
use tsforge::{Result, Tensor};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn randn(shape: &[usize], std: f64, rng: &mut ChaCha8Rng) -> Tensor {
    Tensor::from_fn(shape, |_| {
        let z: f64 = StandardNormal.sample(rng);
        std * z
    })
}

/// `sum(x * w)` for a fixed random `w`, so every output entry gets a distinct weight.
pub fn probe_loss(tape: &mut Tape, x: Var, seed: u64) -> Result<Var> {
    let w = randn(tape.shape(x), 1.0, &mut rng(seed));
    let w = tape.constant(w);
    let y = tape.mul(x, w)?;
    Ok(tape.sum(y))
}

/// Smallest configuration that exercises every code path: 2 patches of 2
/// steps, 3 discriminator tokens, widths of at most 6.
pub fn tiny_gan() -> GanConfig {
    let enc = EncoderConfig {
        embed_dim: 4,
        num_heads: 2,
        mlp_ratio: 2,
        dropout_p: 0.0,
        depth: 1,
    };
    GanConfig {
        channels: 2,
        seq_len: 4,
        patch_len: 2,
        latent_dim: 3,
        generator: EncoderConfig { embed_dim: 3, num_heads: 3, ..enc },
        discriminator: enc,
    }
}
