mod common;

use common::{randn, rng};
use proptest::prelude::*;
use tsforge::data::{read_csv, write_csv};
use tsforge::evaluation::{avg_cos_sim, avg_jen_dis, extract_features, FeatureMatrix};
use tsforge::gan::sample_latent;
use tsforge::params::ModelParams;
use tsforge::tape::{Mode, Tape};
use tsforge::training::{adam_step, AdamHyper, AdamState, LabelMode};
use tsforge::transformer::{is_residual_branch_param, patchify, unpatchify, EncoderStack, MultiHeadAttention};
use tsforge::{Discriminator, EncoderConfig, GanConfig, Generator, PatchSpec, SequenceBatch, Source, Tensor};

fn valid_gan() -> impl Strategy<Value = (GanConfig, usize)> {
    (
        1usize..=4,  // channels
        1usize..=5,  // patch_len
        1usize..=5,  // patches
        1usize..=3,  // heads
        1usize..=3,  // discriminator head width
        1usize..=3,  // generator width multiple
        1usize..=2,  // depth
        1usize..=3,  // mlp ratio
        1usize..=8,  // latent
        1usize..=3,  // batch
    )
        .prop_map(|(c, n, t, h, hd, gk, depth, ratio, latent, b)| {
            let enc = EncoderConfig {
                embed_dim: h * hd,
                num_heads: h,
                mlp_ratio: ratio,
                dropout_p: 0.1,
                depth,
            };
            let cfg = GanConfig {
                channels: c,
                seq_len: n * t,
                patch_len: n,
                latent_dim: latent,
                generator: EncoderConfig { embed_dim: h * gk, ..enc },
                discriminator: enc,
            };
            (cfg, b)
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn architecture_shapes((cfg, b) in valid_gan(), seed in any::<u64>()) {
        let mut r = rng(seed);
        let g = Generator::new(cfg, &mut r).unwrap();
        let d = Discriminator::new(cfg, &mut r).unwrap();
        let z = sample_latent(b, cfg.latent_dim, &mut r);
        let x = g.generate(&z, &mut Mode::Train(&mut r)).unwrap();
        prop_assert_eq!(x.shape(), &[b, cfg.channels, 1, cfg.seq_len]);

        let mut tape = Tape::new();
        let p = d.params().bind_frozen(&mut tape);
        let xv = tape.constant(x);
        let tokens = d.tokenize(&mut tape, &p, xv).unwrap();
        prop_assert_eq!(tape.shape(tokens), &[b, cfg.seq_len / cfg.patch_len + 1, cfg.discriminator.embed_dim]);
        let logits = d.forward(&mut tape, &p, xv, &mut Mode::Eval).unwrap();
        prop_assert_eq!(tape.shape(logits), &[b, 1]);
    }

    #[test]
    fn zeroed_blocks_are_identity(
        heads in 1usize..=3, hd in 1usize..=3, depth in 1usize..=3, tokens in 1usize..=5, seed in any::<u64>()
    ) {
        let cfg = EncoderConfig { embed_dim: heads * hd, num_heads: heads, mlp_ratio: 2, dropout_p: 0.2, depth };
        let mut params = ModelParams::new();
        let stack = EncoderStack::new(&mut params, "enc", &cfg, &mut rng(seed)).unwrap();
        params.zero_where(is_residual_branch_param);
        let x = randn(&[2, tokens, cfg.embed_dim], 1.0, &mut rng(seed ^ 1));
        let mut tape = Tape::new();
        let p = params.bind_frozen(&mut tape);
        let xv = tape.constant(x.clone());
        let mut drop_rng = rng(seed ^ 2);
        let y = stack.forward(&mut tape, &p, xv, &mut Mode::Train(&mut drop_rng)).unwrap();
        prop_assert!(tape.value(y).max_abs_diff(&x).unwrap() < 1e-12);
    }

    #[test]
    fn patchify_round_trip(c in 1usize..=4, n in 1usize..=5, t in 1usize..=5, b in 1usize..=3, seed in any::<u64>()) {
        let spec = PatchSpec::new(n * t, n, c).unwrap();
        let x = randn(&[b, c, 1, n * t], 1.0, &mut rng(seed));
        let p = patchify(&x, &spec).unwrap();
        prop_assert_eq!(p.shape(), &[b, t, n * c]);
        // patch k holds timesteps [kN, (k+1)N), channel-major inside the patch
        for (bi, k, ch, j) in [(b - 1, t - 1, c - 1, n - 1), (0, 0, 0, 0)] {
            prop_assert_eq!(p.get(&[bi, k, ch * n + j]), x.get(&[bi, ch, 0, k * n + j]));
        }
        prop_assert_eq!(unpatchify(&p, &spec).unwrap(), x);
    }

    #[test]
    fn softmax_rows_are_distributions(rows in 1usize..=4, cols in 1usize..=6, scale in 0.1f64..50.0, seed in any::<u64>()) {
        let mut tape = Tape::new();
        let x = tape.constant(randn(&[rows, cols], scale, &mut rng(seed)));
        let y = tape.softmax(x, 1).unwrap();
        for row in tape.value(y).data().chunks(cols) {
            prop_assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            prop_assert!(row.iter().all(|&v| (0.0..=1.0).contains(&v)));
        }
    }

    #[test]
    fn attention_weights_are_stochastic(heads in 1usize..=3, hd in 1usize..=3, t in 1usize..=5, seed in any::<u64>()) {
        let cfg = EncoderConfig { embed_dim: heads * hd, num_heads: heads, ..EncoderConfig::default() };
        let mut params = ModelParams::new();
        let mha = MultiHeadAttention::new(&mut params, "a", &cfg, &mut rng(seed)).unwrap();
        let mut tape = Tape::new();
        let p = params.bind_frozen(&mut tape);
        let x = tape.constant(randn(&[2, t, cfg.embed_dim], 1.0, &mut rng(seed ^ 3)));
        let (out, w) = mha.forward_with_weights(&mut tape, &p, x).unwrap();
        prop_assert_eq!(tape.shape(out), &[2, t, cfg.embed_dim]);
        prop_assert_eq!(tape.shape(w), &[2, heads, t, t]);
        for row in tape.value(w).data().chunks(t) {
            prop_assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn layer_norm_standardizes(width in 2usize..=8, shift in -5.0f64..5.0, seed in any::<u64>()) {
        let mut tape = Tape::new();
        let x = randn(&[3, width], 2.0, &mut rng(seed)).map(|v| v + shift);
        let x = tape.constant(x);
        let g = tape.constant(Tensor::ones(&[width]));
        let b = tape.constant(Tensor::zeros(&[width]));
        let y = tape.layer_norm(x, g, b, 0.0).unwrap();
        for row in tape.value(y).data().chunks(width) {
            let mean = row.iter().sum::<f64>() / width as f64;
            let var = row.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / width as f64;
            prop_assert!(mean.abs() < 1e-12);
            prop_assert!((var - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn eval_dropout_is_identity(p in 0.0f64..0.99, seed in any::<u64>()) {
        let mut tape = Tape::new();
        let x = tape.constant(randn(&[4, 4], 1.0, &mut rng(seed)));
        let y = tape.dropout(x, p, &mut Mode::Eval).unwrap();
        prop_assert_eq!(tape.value(y), tape.value(x));
    }

    #[test]
    fn cosine_scale_invariant(seed in any::<u64>(), scales in prop::collection::vec(0.01f64..100.0, 8)) {
        let real = randn(&[8, 5], 1.0, &mut rng(seed));
        let syn = randn(&[6, 5], 1.0, &mut rng(seed ^ 4));
        let rows = |t: &Tensor| -> Vec<Vec<f64>> { t.data().chunks(5).map(<[f64]>::to_vec).collect() };
        let scaled: Vec<Vec<f64>> = rows(&real).into_iter().zip(&scales).map(|(r, s)| r.iter().map(|v| v * s).collect()).collect();
        let syn = FeatureMatrix::from_rows(&rows(&syn)).unwrap();
        let a = avg_cos_sim(&FeatureMatrix::from_rows(&rows(&real)).unwrap(), &syn).unwrap();
        let b = avg_cos_sim(&FeatureMatrix::from_rows(&scaled).unwrap(), &syn).unwrap();
        prop_assert!((a - b).abs() < 1e-12);
        prop_assert!((-1.0..=1.0).contains(&a));
    }

    #[test]
    fn jensen_shannon_bounded_and_symmetric(seed in any::<u64>(), shift in -2.0f64..2.0, bins in 1usize..=60) {
        let real = randn(&[30, 3], 1.0, &mut rng(seed));
        let syn = randn(&[20, 3], 1.0, &mut rng(seed ^ 5)).map(|v| v + shift);
        let rows = |t: &Tensor| FeatureMatrix::from_rows(&t.data().chunks(3).map(<[f64]>::to_vec).collect::<Vec<_>>()).unwrap();
        let ab = avg_jen_dis(&rows(&real), &rows(&syn), bins).unwrap();
        let ba = avg_jen_dis(&rows(&syn), &rows(&real), bins).unwrap();
        prop_assert!((0.0..=1.0).contains(&ab));
        prop_assert!((ab - ba).abs() < 1e-12);
    }

    #[test]
    fn feature_invariants(c in 1usize..=4, w in 1usize..=12, seed in any::<u64>()) {
        let seq = randn(&[c, w], 3.0, &mut rng(seed));
        let f = extract_features(seq.data(), c).unwrap();
        for block in f.values().chunks(7) {
            let [median, _mean, std, var, _rms, max, min] = block.try_into().unwrap();
            prop_assert!((var - std * std).abs() < 1e-9);
            prop_assert!(min <= median && median <= max);
        }
        // reversing the channel order reverses the 7-blocks
        let reversed: Vec<f64> = seq.data().chunks(w).rev().flatten().copied().collect();
        let g = extract_features(&reversed, c).unwrap();
        let expect: Vec<f64> = f.values().chunks(7).rev().flatten().copied().collect();
        prop_assert_eq!(g.values(), expect.as_slice());
    }

    #[test]
    fn adam_zero_gradient_fixed_point(seed in any::<u64>(), steps in 1u64..=5) {
        let mut params = ModelParams::new();
        params.push("w", randn(&[3, 2], 1.0, &mut rng(seed)));
        let before = params.clone();
        let mut state = AdamState::new(&params);
        let hp = AdamHyper { lr: 0.1, beta1: 0.9, beta2: 0.999, eps: 1e-8 };
        for _ in 0..steps {
            adam_step(&mut params, &[Some(Tensor::zeros(&[3, 2]))], &mut state, &hp).unwrap();
        }
        prop_assert_eq!(params, before);
        prop_assert_eq!(state.t, steps);
    }

    #[test]
    fn label_contract(r in 0.5f64..=1.0, f in 0.0f64..0.5) {
        let soft = LabelMode::Soft { real: r, fake: f }.labels();
        prop_assert_eq!((soft.d_real, soft.d_fake, soft.g_target), (r, f, r));
        let flipped = LabelMode::Flipped.labels();
        let hard = LabelMode::Hard.labels();
        prop_assert_eq!((flipped.d_real, flipped.d_fake), (hard.d_fake, hard.d_real));
        prop_assert_eq!(flipped.g_target, hard.g_target);
    }

    #[test]
    fn csv_round_trip(n in 1usize..=4, c in 1usize..=3, w in 1usize..=6, seed in any::<u64>()) {
        let data = randn(&[n, c, 1, w], 1e3, &mut rng(seed));
        let batch = SequenceBatch::new(data, None, Source::Generated).unwrap();
        let mut buf = Vec::new();
        write_csv(&batch, "syn", &mut buf).unwrap();
        let back = read_csv(buf.as_slice()).unwrap();
        prop_assert_eq!(back.data(), batch.data());
        prop_assert!(back.labels().unwrap().iter().all(|l| l == "syn"));
    }
}
