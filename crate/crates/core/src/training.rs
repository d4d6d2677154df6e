//! Least-squares adversarial training with Adam.

use std::io::Write;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::checkpoint::{Checkpoint, RngState};
use crate::config::RunConfig;
use crate::data::{BatchIter, SequenceBatch};
use crate::error::{Error, Result};
use crate::gan::{sample_latent, Discriminator, Generator};
use crate::params::{Bound, ModelParams};
use crate::tape::{Gradients, Mode, Tape, Var};
use crate::tensor::Tensor;

/// Target values for the discriminator and generator losses.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum LabelMode {
    /// real = 1, fake = 0.
    Hard,
    Soft { real: f64, fake: f64 },
    /// Discriminator targets swapped; the generator still aims for 1.
    Flipped,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Labels {
    pub d_real: f64,
    pub d_fake: f64,
    pub g_target: f64,
}

impl LabelMode {
    pub fn labels(&self) -> Labels {
        match *self {
            LabelMode::Hard => Labels {
                d_real: 1.0,
                d_fake: 0.0,
                g_target: 1.0,
            },
            LabelMode::Soft { real, fake } => Labels {
                d_real: real,
                d_fake: fake,
                g_target: real,
            },
            LabelMode::Flipped => Labels {
                d_real: 0.0,
                d_fake: 1.0,
                g_target: 1.0,
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub lr_g: f64,
    pub lr_d: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub label_mode: LabelMode,
    pub seed: u64,
    pub checkpoint_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr_g: 1e-4,
            lr_d: 3e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            batch_size: 32,
            epochs: 200,
            label_mode: LabelMode::Hard,
            seed: 0,
            checkpoint_every: 0,
        }
    }
}

impl TrainConfig {
    pub fn generator_adam(&self) -> AdamHyper {
        AdamHyper {
            lr: self.lr_g,
            beta1: self.beta1,
            beta2: self.beta2,
            eps: self.eps,
        }
    }

    pub fn discriminator_adam(&self) -> AdamHyper {
        AdamHyper {
            lr: self.lr_d,
            ..self.generator_adam()
        }
    }
}

fn check_logits(tape: &Tape, logits: Var, op: &'static str) -> Result<()> {
    match tape.shape(logits) {
        [_, 1] => Ok(()),
        s => Err(Error::dim(op, s, &[0, 1])),
    }
}

/// `MSE(real_logits, real_label) + MSE(fake_logits, fake_label)`.
pub fn discriminator_loss(
    tape: &mut Tape,
    real_logits: Var,
    fake_logits: Var,
    real_label: f64,
    fake_label: f64,
) -> Result<Var> {
    check_logits(tape, real_logits, "discriminator_loss")?;
    check_logits(tape, fake_logits, "discriminator_loss")?;
    let real = tape.mse(real_logits, Tensor::scalar(real_label))?;
    let fake = tape.mse(fake_logits, Tensor::scalar(fake_label))?;
    tape.add(real, fake)
}

/// `MSE(fake_logits, real_label)`.
pub fn generator_loss(tape: &mut Tape, fake_logits: Var, real_label: f64) -> Result<Var> {
    check_logits(tape, fake_logits, "generator_loss")?;
    tape.mse(fake_logits, Tensor::scalar(real_label))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamHyper {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

/// First and second moment estimates for every tensor of one [`ModelParams`].
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<Tensor>,
    pub v: Vec<Tensor>,
    pub t: u64,
}

impl AdamState {
    pub fn new(params: &ModelParams) -> Self {
        let zeros: Vec<Tensor> = params.tensors().iter().map(|t| Tensor::zeros(t.shape())).collect();
        Self {
            m: zeros.clone(),
            v: zeros,
            t: 0,
        }
    }

    /// True when both moment buffers line up with `params` tensor by tensor.
    pub fn matches(&self, params: &ModelParams) -> bool {
        let fits = |moments: &[Tensor]| {
            moments.len() == params.len()
                && moments.iter().zip(params.tensors()).all(|(a, b)| a.shape() == b.shape())
        };
        fits(&self.m) && fits(&self.v)
    }
}

/// Bias-corrected Adam update. A missing gradient counts as zero.
pub fn adam_step(
    params: &mut ModelParams,
    grads: &[Option<Tensor>],
    state: &mut AdamState,
    hp: &AdamHyper,
) -> Result<()> {
    if grads.len() != params.len() || state.m.len() != params.len() || state.v.len() != params.len() {
        return Err(Error::dim(
            "adam_step",
            &[params.len()],
            &[grads.len(), state.m.len(), state.v.len()],
        ));
    }
    state.t += 1;
    let t = state.t as f64;
    let c1 = 1.0 - hp.beta1.powf(t);
    let c2 = 1.0 - hp.beta2.powf(t);
    for (i, p) in params.tensors_mut().iter_mut().enumerate() {
        let g = match &grads[i] {
            Some(g) if g.shape() == p.shape() => Some(g.data()),
            Some(g) => return Err(Error::dim("adam_step", p.shape(), g.shape())),
            None => None,
        };
        let m = state.m[i].data_mut();
        let v = state.v[i].data_mut();
        if m.len() != p.numel() || v.len() != p.numel() {
            return Err(Error::dim("adam_step", p.shape(), &[m.len(), v.len()]));
        }
        for (j, x) in p.data_mut().iter_mut().enumerate() {
            let gj = g.map_or(0.0, |g| g[j]);
            m[j] = hp.beta1 * m[j] + (1.0 - hp.beta1) * gj;
            v[j] = hp.beta2 * v[j] + (1.0 - hp.beta2) * gj * gj;
            let m_hat = m[j] / c1;
            let v_hat = v[j] / c2;
            *x -= hp.lr * m_hat / (v_hat.sqrt() + hp.eps);
        }
    }
    Ok(())
}

fn collect_grads(grads: &Gradients, bound: &Bound) -> Vec<Option<Tensor>> {
    bound.vars().iter().map(|&v| grads.get(v).cloned()).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepLosses {
    pub d_loss: f64,
    pub g_loss: f64,
}

fn finite(loss: f64, what: &str) -> Result<f64> {
    if loss.is_finite() {
        Ok(loss)
    } else {
        Err(Error::Numeric(format!("{what} became {loss}")))
    }
}

/// Updates only the discriminator, on `real` and a freshly generated batch
/// that is materialized outside the graph. Returns the discriminator loss.
pub fn discriminator_step<R: RngCore>(
    real: &Tensor,
    generator: &Generator,
    discriminator: &mut Discriminator,
    opt_d: &mut AdamState,
    cfg: &TrainConfig,
    rng: &mut R,
) -> Result<f64> {
    let batch = real.shape().first().copied().unwrap_or(0);
    let labels = cfg.label_mode.labels();
    let z = sample_latent(batch, generator.config().latent_dim, rng);
    let fake = generator.generate(&z, &mut Mode::Train(rng))?;

    let mut tape = Tape::new();
    let pd = discriminator.params().bind(&mut tape);
    let real_v = tape.constant(real.clone());
    let fake_v = tape.constant(fake);
    let real_logits = discriminator.forward(&mut tape, &pd, real_v, &mut Mode::Train(rng))?;
    let fake_logits = discriminator.forward(&mut tape, &pd, fake_v, &mut Mode::Train(rng))?;
    let loss = discriminator_loss(&mut tape, real_logits, fake_logits, labels.d_real, labels.d_fake)?;
    let value = finite(tape.value(loss).item()?, "discriminator loss")?;
    let grads = tape.backward(loss)?;
    adam_step(
        discriminator.params_mut(),
        &collect_grads(&grads, &pd),
        opt_d,
        &cfg.discriminator_adam(),
    )?;
    Ok(value)
}

/// Updates only the generator, through a frozen copy of the discriminator.
/// Returns the generator loss.
pub fn generator_step<R: RngCore>(
    batch: usize,
    generator: &mut Generator,
    discriminator: &Discriminator,
    opt_g: &mut AdamState,
    cfg: &TrainConfig,
    rng: &mut R,
) -> Result<f64> {
    let target = cfg.label_mode.labels().g_target;
    let z = sample_latent(batch, generator.config().latent_dim, rng);

    let mut tape = Tape::new();
    let pg = generator.params().bind(&mut tape);
    let pd = discriminator.params().bind_frozen(&mut tape);
    let zv = tape.constant(z);
    let fake = generator.forward(&mut tape, &pg, zv, &mut Mode::Train(rng))?;
    let fake_logits = discriminator.forward(&mut tape, &pd, fake, &mut Mode::Train(rng))?;
    let loss = generator_loss(&mut tape, fake_logits, target)?;
    let value = finite(tape.value(loss).item()?, "generator loss")?;
    let grads = tape.backward(loss)?;
    adam_step(
        generator.params_mut(),
        &collect_grads(&grads, &pg),
        opt_g,
        &cfg.generator_adam(),
    )?;
    Ok(value)
}

/// One [`discriminator_step`] followed by one [`generator_step`] on a batch
/// of the same size.
pub fn train_step<R: RngCore>(
    real: &Tensor,
    generator: &mut Generator,
    discriminator: &mut Discriminator,
    opt_g: &mut AdamState,
    opt_d: &mut AdamState,
    cfg: &TrainConfig,
    rng: &mut R,
) -> Result<StepLosses> {
    let d_loss = discriminator_step(real, generator, discriminator, opt_d, cfg, rng)?;
    let batch = real.shape().first().copied().unwrap_or(0);
    let g_loss = generator_step(batch, generator, discriminator, opt_g, cfg, rng)?;
    Ok(StepLosses { d_loss, g_loss })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossRecord {
    pub step: u64,
    pub d_loss: f64,
    pub g_loss: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct LossHistory {
    pub records: Vec<LossRecord>,
}

impl LossHistory {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn extend(&mut self, other: LossHistory) {
        self.records.extend(other.records);
    }

    /// CSV with header `step,d_loss,g_loss`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "step,d_loss,g_loss")?;
        for r in &self.records {
            writeln!(out, "{},{},{}", r.step, r.d_loss, r.g_loss)?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Random stream for dataset simulation, separate from the training stream.
pub fn data_rng(seed: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    rng
}

/// Owns both networks, their optimizers and the run's random stream.
#[derive(Debug, Clone)]
pub struct Trainer {
    config: RunConfig,
    train: TrainConfig,
    generator: Generator,
    discriminator: Discriminator,
    opt_g: AdamState,
    opt_d: AdamState,
    rng: ChaCha8Rng,
    step: u64,
    epoch: u64,
}

impl Trainer {
    /// Initializes both networks from the configured seed.
    pub fn new(config: RunConfig) -> Result<Self> {
        config.validate()?;
        let train = config.train_config();
        let gan = config.gan_config();
        let mut rng = ChaCha8Rng::seed_from_u64(train.seed);
        let generator = Generator::new(gan, &mut rng)?;
        let discriminator = Discriminator::new(gan, &mut rng)?;
        Ok(Self {
            opt_g: AdamState::new(generator.params()),
            opt_d: AdamState::new(discriminator.params()),
            config,
            train,
            generator,
            discriminator,
            rng,
            step: 0,
            epoch: 0,
        })
    }

    /// Restores a run exactly where the checkpoint left it. `epochs` and
    /// `checkpoint_every` may be overridden through `config_override`.
    pub fn from_checkpoint(ckpt: Checkpoint, config_override: Option<RunConfig>) -> Result<Self> {
        let config = config_override.unwrap_or(ckpt.config.clone());
        let mut trainer = Self::new(config)?;
        trainer.generator.params_mut().assign(&ckpt.generator)?;
        trainer.discriminator.params_mut().assign(&ckpt.discriminator)?;
        for (state, params) in [(&ckpt.adam_g, &ckpt.generator), (&ckpt.adam_d, &ckpt.discriminator)] {
            if !state.matches(params) {
                return Err(Error::Config("optimizer state does not match parameters".into()));
            }
        }
        trainer.opt_g = ckpt.adam_g;
        trainer.opt_d = ckpt.adam_d;
        trainer.rng = ckpt.rng.restore();
        trainer.step = ckpt.step;
        trainer.epoch = ckpt.epoch;
        Ok(trainer)
    }

    pub fn config(&self) -> &RunConfig {
        &self.config
    }

    pub fn generator(&self) -> &Generator {
        &self.generator
    }

    pub fn discriminator(&self) -> &Discriminator {
        &self.discriminator
    }

    pub fn step(&self) -> u64 {
        self.step
    }

    pub fn epoch(&self) -> u64 {
        self.epoch
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint {
            config: self.config.clone(),
            generator: self.generator.params().clone(),
            discriminator: self.discriminator.params().clone(),
            adam_g: self.opt_g.clone(),
            adam_d: self.opt_d.clone(),
            step: self.step,
            epoch: self.epoch,
            rng: RngState::capture(&self.rng),
        }
    }

    pub fn train_step(&mut self, real: &Tensor) -> Result<StepLosses> {
        let losses = train_step(
            real,
            &mut self.generator,
            &mut self.discriminator,
            &mut self.opt_g,
            &mut self.opt_d,
            &self.train,
            &mut self.rng,
        )?;
        self.step += 1;
        Ok(losses)
    }

    fn check_dataset(&self, data: &SequenceBatch) -> Result<()> {
        let gan = self.generator.config();
        if data.is_empty() {
            return Err(Error::Data("training dataset is empty".into()));
        }
        if (data.channels(), data.seq_len()) != (gan.channels, gan.seq_len) {
            return Err(Error::dim(
                "train",
                data.data().shape(),
                &[0, gan.channels, 1, gan.seq_len],
            ));
        }
        if data.len() < self.train.batch_size {
            return Err(Error::Data(format!(
                "{} sequences cannot fill a batch of {}",
                data.len(),
                self.train.batch_size
            )));
        }
        Ok(())
    }

    /// One pass over `data` in freshly shuffled batches.
    pub fn run_epoch(&mut self, data: &SequenceBatch) -> Result<LossHistory> {
        self.check_dataset(data)?;
        let mut history = LossHistory::default();
        for batch in BatchIter::new(data, self.train.batch_size, &mut self.rng)? {
            let losses = self.train_step(batch?.data())?;
            history.records.push(LossRecord {
                step: self.step,
                d_loss: losses.d_loss,
                g_loss: losses.g_loss,
            });
        }
        self.epoch += 1;
        Ok(history)
    }

    /// Trains until the configured epoch count, calling `on_checkpoint`
    /// every `checkpoint_every` epochs and once more at the end.
    pub fn run(
        &mut self,
        data: &SequenceBatch,
        mut on_checkpoint: impl FnMut(&Checkpoint) -> Result<()>,
    ) -> Result<LossHistory> {
        self.check_dataset(data)?;
        let target = self.train.epochs as u64;
        let every = self.train.checkpoint_every as u64;
        let mut history = LossHistory::default();
        while self.epoch < target {
            history.extend(self.run_epoch(data)?);
            if every > 0 && self.epoch % every == 0 && self.epoch < target {
                on_checkpoint(&self.checkpoint())?;
            }
        }
        on_checkpoint(&self.checkpoint())?;
        Ok(history)
    }
}

/// Trains from scratch and returns the final checkpoint and loss history.
pub fn train(dataset: &SequenceBatch, config: &RunConfig) -> Result<(Checkpoint, LossHistory)> {
    let mut trainer = Trainer::new(config.clone())?;
    let history = trainer.run(dataset, |_| Ok(()))?;
    Ok((trainer.checkpoint(), history))
}

/// Draws `n` sequences from a trained generator in eval mode.
pub fn generate(generator: &Generator, n: usize, seed: u64) -> Result<SequenceBatch> {
    const CHUNK: usize = 256;
    if n == 0 {
        return Err(Error::Parameter("cannot generate zero sequences".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cfg = generator.config();
    let mut values = Vec::with_capacity(n * cfg.channels * cfg.seq_len);
    let mut done = 0;
    while done < n {
        let b = CHUNK.min(n - done);
        let z = sample_latent(b, cfg.latent_dim, &mut rng);
        let out = generator.generate(&z, &mut Mode::Eval)?;
        if !out.is_finite() {
            return Err(Error::Numeric("generator produced non-finite values".into()));
        }
        values.extend_from_slice(out.data());
        done += b;
    }
    SequenceBatch::new(
        Tensor::new(vec![n, cfg.channels, 1, cfg.seq_len], values)?,
        None,
        crate::data::Source::Generated,
    )
}
