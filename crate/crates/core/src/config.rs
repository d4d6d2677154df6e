//! Flat, serializable run configuration.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::data::{DatasetKind, DatasetSpec};
use crate::error::{Error, Result};
use crate::evaluation::{JsReduction, MetricOptions, DEFAULT_BINS};
use crate::gan::{GanConfig, DEFAULT_LATENT_DIM};
use crate::training::{LabelMode, TrainConfig};
use crate::transformer::EncoderConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LabelModeName {
    Hard,
    Soft,
    Flipped,
}

/// Every knob of a run, as one flat JSON object. Missing keys take defaults;
/// unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub dataset: DatasetKind,
    pub data_path: Option<PathBuf>,
    pub n_samples: usize,
    pub seq_len: usize,
    pub channels: usize,
    pub class_filter: Option<String>,
    pub window_start: Option<usize>,
    pub window_end: Option<usize>,
    pub normalize: bool,

    pub patch_len: usize,
    pub latent_dim: usize,
    pub gen_embed_dim: usize,
    pub dis_embed_dim: usize,
    pub num_heads: usize,
    pub mlp_ratio: usize,
    pub dropout: f64,
    pub depth: usize,

    pub lr_g: f64,
    pub lr_d: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub label_mode: LabelModeName,
    pub soft_real: f64,
    pub soft_fake: f64,
    pub seed: u64,
    /// Epochs between checkpoints; 0 writes only the final one.
    pub checkpoint_every: usize,

    pub output_dir: PathBuf,
    pub js_bins: usize,
    pub js_reduction: JsReduction,
}

impl Default for RunConfig {
    fn default() -> Self {
        let enc = EncoderConfig::default();
        let train = TrainConfig::default();
        Self {
            dataset: DatasetKind::Sinusoid,
            data_path: None,
            n_samples: 10_000,
            seq_len: 24,
            channels: 5,
            class_filter: None,
            window_start: None,
            window_end: None,
            normalize: false,

            patch_len: 4,
            latent_dim: DEFAULT_LATENT_DIM,
            gen_embed_dim: enc.embed_dim,
            dis_embed_dim: enc.embed_dim,
            num_heads: enc.num_heads,
            mlp_ratio: enc.mlp_ratio,
            dropout: enc.dropout_p,
            depth: enc.depth,

            lr_g: train.lr_g,
            lr_d: train.lr_d,
            beta1: train.beta1,
            beta2: train.beta2,
            adam_eps: train.eps,
            batch_size: train.batch_size,
            epochs: train.epochs,
            label_mode: LabelModeName::Hard,
            soft_real: 0.9,
            soft_fake: 0.1,
            seed: train.seed,
            checkpoint_every: train.checkpoint_every,

            output_dir: PathBuf::from("runs/default"),
            js_bins: DEFAULT_BINS,
            js_reduction: JsReduction::Mean,
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("config: {e}")))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Model shape after any window slicing.
    pub fn effective_seq_len(&self) -> usize {
        match (self.window_start, self.window_end) {
            (Some(s), Some(e)) if e > s => e - s,
            _ => self.seq_len,
        }
    }

    fn encoder(&self, embed_dim: usize) -> EncoderConfig {
        EncoderConfig {
            embed_dim,
            num_heads: self.num_heads,
            mlp_ratio: self.mlp_ratio,
            dropout_p: self.dropout,
            depth: self.depth,
        }
    }

    pub fn gan_config(&self) -> GanConfig {
        GanConfig {
            channels: self.channels,
            seq_len: self.effective_seq_len(),
            patch_len: self.patch_len,
            latent_dim: self.latent_dim,
            generator: self.encoder(self.gen_embed_dim),
            discriminator: self.encoder(self.dis_embed_dim),
        }
    }

    pub fn label_mode(&self) -> LabelMode {
        match self.label_mode {
            LabelModeName::Hard => LabelMode::Hard,
            LabelModeName::Soft => LabelMode::Soft {
                real: self.soft_real,
                fake: self.soft_fake,
            },
            LabelModeName::Flipped => LabelMode::Flipped,
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            lr_g: self.lr_g,
            lr_d: self.lr_d,
            beta1: self.beta1,
            beta2: self.beta2,
            eps: self.adam_eps,
            batch_size: self.batch_size,
            epochs: self.epochs,
            label_mode: self.label_mode(),
            seed: self.seed,
            checkpoint_every: self.checkpoint_every,
        }
    }

    pub fn dataset_spec(&self) -> DatasetSpec {
        DatasetSpec {
            kind: self.dataset,
            path: self.data_path.clone(),
            n_samples: self.n_samples,
            seq_len: self.seq_len,
            channels: self.channels,
            class_filter: self.class_filter.clone(),
            window: self.window_start.zip(self.window_end),
            normalize: self.normalize,
            seed: self.seed,
        }
    }

    pub fn metric_options(&self) -> MetricOptions {
        MetricOptions {
            bins: self.js_bins,
            reduction: self.js_reduction,
        }
    }

    /// Checks every field and reports all violations at once, by name.
    pub fn validate(&self) -> Result<()> {
        let mut bad: Vec<String> = Vec::new();
        let mut require = |ok: bool, field: &str, why: &str| {
            if !ok {
                bad.push(format!("{field}: {why}"));
            }
        };
        require(self.seq_len > 0, "seq_len", "must be positive");
        require(self.channels > 0, "channels", "must be positive");
        require(
            self.dataset != DatasetKind::Sinusoid || self.n_samples > 0,
            "n_samples",
            "must be positive for simulated data",
        );
        require(
            self.dataset != DatasetKind::Csv || self.data_path.is_some(),
            "data_path",
            "required when dataset is csv",
        );
        require(
            self.window_start.is_some() == self.window_end.is_some(),
            "window_start/window_end",
            "set both or neither",
        );
        if let (Some(s), Some(e)) = (self.window_start, self.window_end) {
            require(s < e, "window_start", "must be below window_end");
        }
        let w = self.effective_seq_len();
        require(self.patch_len > 0, "patch_len", "must be positive");
        require(
            self.patch_len > 0 && w % self.patch_len == 0,
            "patch_len",
            "must divide the sequence length",
        );
        require(self.latent_dim > 0, "latent_dim", "must be positive");
        require(self.gen_embed_dim > 0, "gen_embed_dim", "must be positive");
        require(self.dis_embed_dim > 0, "dis_embed_dim", "must be positive");
        require(self.num_heads > 0, "num_heads", "must be positive");
        if self.num_heads > 0 {
            let gen_width = self.gen_embed_dim * self.gan_config().generator_patch_len();
            require(
                gen_width % self.num_heads == 0,
                "gen_embed_dim",
                "gen_embed_dim * patch_len must be divisible by num_heads",
            );
            require(
                self.dis_embed_dim % self.num_heads == 0,
                "dis_embed_dim",
                "must be divisible by num_heads",
            );
        }
        require(self.mlp_ratio > 0, "mlp_ratio", "must be positive");
        require((0.0..1.0).contains(&self.dropout), "dropout", "must be in [0, 1)");
        require(self.depth > 0, "depth", "must be positive");
        require(self.lr_g > 0.0, "lr_g", "must be positive");
        require(self.lr_d > 0.0, "lr_d", "must be positive");
        require(
            0.0 <= self.beta1 && self.beta1 < self.beta2 && self.beta2 < 1.0,
            "beta1/beta2",
            "need 0 <= beta1 < beta2 < 1",
        );
        require(self.adam_eps > 0.0, "adam_eps", "must be positive");
        require(self.batch_size > 0, "batch_size", "must be positive");
        if self.label_mode == LabelModeName::Soft {
            require(
                0.0 <= self.soft_fake && self.soft_fake < self.soft_real && self.soft_real <= 1.0,
                "soft_real/soft_fake",
                "need 0 <= soft_fake < soft_real <= 1",
            );
        }
        require(self.js_bins > 0, "js_bins", "must be positive");
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid fields: {}", bad.join("; "))))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate_and_round_trip() {
        let cfg = RunConfig::default();
        cfg.validate().unwrap();
        assert_eq!(RunConfig::from_json(&cfg.to_json()).unwrap(), cfg);
    }

    #[test]
    fn partial_json_takes_defaults() {
        let cfg = RunConfig::from_json(r#"{"epochs": 3, "label_mode": "soft"}"#).unwrap();
        assert_eq!(cfg.epochs, 3);
        assert_eq!(cfg.batch_size, 32);
        assert_eq!(cfg.label_mode(), LabelMode::Soft { real: 0.9, fake: 0.1 });
    }

    #[test]
    fn unknown_field_rejected() {
        assert!(RunConfig::from_json(r#"{"epoch": 3}"#).is_err());
    }

    #[test]
    fn all_invalid_fields_named() {
        let cfg = RunConfig {
            lr_g: 0.0,
            patch_len: 5,
            beta1: 0.9999,
            ..Default::default()
        };
        let msg = cfg.validate().unwrap_err().to_string();
        for field in ["lr_g", "patch_len", "beta1/beta2"] {
            assert!(msg.contains(field), "{msg}");
        }
    }

    #[test]
    fn window_changes_model_length() {
        let cfg = RunConfig {
            seq_len: 188,
            window_start: Some(5),
            window_end: Some(55),
            channels: 1,
            patch_len: 5,
            ..Default::default()
        };
        cfg.validate().unwrap();
        assert_eq!(cfg.gan_config().seq_len, 50);
    }
}
