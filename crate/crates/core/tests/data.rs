mod common;

use common::{randn, rng};
use rand::seq::SliceRandom;
use tsforge::data::{
    channel_stats, epoch_batches, load_csv, normalize_channelwise, read_csv, render_sinusoids, save_csv,
    simulate_sinusoids, slice_window, write_csv, write_param_log, BatchIter, DatasetKind, DatasetSpec,
    SinusoidParams,
};
use tsforge::gan::sample_latent;
use tsforge::tape::{Mode, Tape};
use tsforge::{Error, SequenceBatch, Source, Tensor};

#[test]
fn default_simulation_shape_and_range() {
    let (batch, params) = simulate_sinusoids(10_000, 24, 5, &mut rng(0)).unwrap();
    assert_eq!(batch.data().shape(), &[10_000, 5, 1, 24]);
    assert_eq!(params.len(), 50_000);
    assert!(batch.data().data().iter().all(|v| (-1.0..=1.0).contains(v)));
    assert!(params.iter().all(|p| p.a > 0.0 && p.a < 0.1 && p.b > 0.0 && p.b < 0.1));
    assert_eq!(*batch.source(), Source::Simulated);
}

#[test]
fn zero_parameters_give_zero_sequence() {
    let params: Vec<SinusoidParams> = (0..3)
        .map(|channel| SinusoidParams {
            sample_id: 0,
            channel,
            a: 0.0,
            b: 0.0,
        })
        .collect();
    let batch = render_sinusoids(&params, 1, 24, 3).unwrap();
    assert!(batch.data().data().iter().all(|&v| v == 0.0));
}

#[test]
fn formula_replay_from_logged_parameters() {
    let (batch, params) = simulate_sinusoids(20, 24, 5, &mut rng(1)).unwrap();
    let mut log = Vec::new();
    write_param_log(&params, &mut log).unwrap();
    let text = String::from_utf8(log).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("sample_id,channel,A,B"));
    for line in lines {
        let f: Vec<&str> = line.split(',').collect();
        let (i, ch): (usize, usize) = (f[0].parse().unwrap(), f[1].parse().unwrap());
        let (a, b): (f64, f64) = (f[2].parse().unwrap(), f[3].parse().unwrap());
        let seq = batch.sequence(i);
        for t in 0..24 {
            assert!((seq[ch * 24 + t] - (a * t as f64 + b).sin()).abs() < 1e-12);
        }
    }
}

#[test]
fn simulation_is_seed_reproducible() {
    let csv = |seed| {
        let (b, _) = simulate_sinusoids(50, 24, 5, &mut rng(seed)).unwrap();
        let mut out = Vec::new();
        write_csv(&b, "sine", &mut out).unwrap();
        out
    };
    assert_eq!(csv(7), csv(7));
    assert_ne!(csv(7), csv(8));
}

#[test]
fn simulation_rejects_empty() {
    assert!(matches!(simulate_sinusoids(0, 24, 5, &mut rng(0)), Err(Error::Data(_))));
}

#[test]
fn csv_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let labels = vec!["walk".to_string(), "run".to_string(), "walk".to_string()];
    let data = randn(&[3, 2, 1, 7], 1.0, &mut rng(2));
    let batch = SequenceBatch::new(data, Some(labels.clone()), Source::Generated).unwrap();
    let path = dir.path().join("d.csv");
    save_csv(&batch, "unused", &path).unwrap();
    let first = load_csv(&path).unwrap();
    assert_eq!(first.data(), batch.data());
    assert_eq!(first.labels().unwrap(), labels.as_slice());
    assert_eq!(*first.source(), Source::File(path.clone()));

    let again = dir.path().join("again.csv");
    save_csv(&first, "unused", &again).unwrap();
    assert_eq!(load_csv(&again).unwrap().data(), batch.data());
    assert_eq!(first.filter_class("walk").unwrap().len(), 2);
}

#[test]
fn csv_rows_may_arrive_in_any_order() {
    let text = "sample_id,label,channel,t,value\n\
        s,x,1,1,4\ns,x,0,0,1\ns,x,1,0,3\ns,x,0,1,2\n";
    let b = read_csv(text.as_bytes()).unwrap();
    assert_eq!(b.data().shape(), &[1, 2, 1, 2]);
    assert_eq!(b.data().data(), &[1.0, 2.0, 3.0, 4.0]);
}

#[test]
fn irregular_csv_is_rejected() {
    let cases = [
        ("ragged", "sample_id,label,channel,t,value\na,x,0,0,1\na,x,0,1,2\nb,x,0,0,3\n"),
        ("missing channel", "sample_id,label,channel,t,value\na,x,0,0,1\na,x,1,0,2\nb,x,0,0,3\n"),
        ("duplicate", "sample_id,label,channel,t,value\na,x,0,0,1\na,x,0,0,2\n"),
        ("bad header", "id,label,channel,t,value\na,x,0,0,1\n"),
        ("label conflict", "sample_id,label,channel,t,value\na,x,0,0,1\na,y,0,1,2\n"),
        ("gap in time", "sample_id,label,channel,t,value\na,x,0,0,1\na,x,0,2,2\n"),
    ];
    for (name, text) in cases {
        let err = read_csv(text.as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Data(_)), "{name}: {err}");
        assert!(err.to_string().contains("row"), "{name}: {err}");
    }
    assert!(matches!(
        load_csv(std::path::Path::new("/nonexistent/x.csv")),
        Err(Error::Data(_))
    ));
}

#[test]
fn normalize_analytic_and_postcondition() {
    let b = SequenceBatch::new(
        Tensor::new(vec![2, 1, 1, 1], vec![1.0, 3.0]).unwrap(),
        None,
        Source::Generated,
    )
    .unwrap();
    assert_eq!(normalize_channelwise(&b).unwrap().data().data(), &[-1.0, 1.0]);

    // accelerometer-shaped: 3 channels of 151 steps, offset and scaled per channel
    let raw = randn(&[40, 3, 1, 151], 1.0, &mut rng(3));
    let raw = Tensor::from_fn(raw.shape(), |i| raw.get(i) * (i[1] + 1) as f64 * 4.0 + 9.8 * i[1] as f64);
    let b = SequenceBatch::new(raw, None, Source::Generated).unwrap();
    let n = normalize_channelwise(&b).unwrap();
    let stats = channel_stats(&n);
    for ch in 0..3 {
        assert!(stats.mean[ch].abs() < 1e-9);
        assert!((stats.std[ch].powi(2) - 1.0).abs() < 1e-6);
    }
    let twice = normalize_channelwise(&n).unwrap();
    assert!(twice.data().max_abs_diff(n.data()).unwrap() < 1e-9);
}

#[test]
fn zero_variance_channel_is_named() {
    let data = Tensor::from_fn(&[4, 2, 1, 5], |i| if i[1] == 1 { 2.0 } else { i[3] as f64 });
    let b = SequenceBatch::new(data, None, Source::Generated).unwrap();
    let err = normalize_channelwise(&b).unwrap_err();
    assert!(matches!(err, Error::Data(_)));
    assert!(err.to_string().contains("channel 1"), "{err}");
}

#[test]
fn window_slicing() {
    let data = Tensor::from_fn(&[2, 1, 1, 188], |i| i[3] as f64);
    let b = SequenceBatch::new(data, None, Source::Generated).unwrap();
    let s = slice_window(&b, 5, 55).unwrap();
    assert_eq!(s.seq_len(), 50);
    let expect: Vec<f64> = (5..55).map(|t| t as f64).collect();
    assert_eq!(s.sequence(1), expect.as_slice());
    assert_eq!(slice_window(&b, 0, 188).unwrap().data(), b.data());
    assert!(matches!(slice_window(&b, 5, 189), Err(Error::Parameter(_))));
    assert!(matches!(slice_window(&b, 5, 5), Err(Error::Parameter(_))));
}

#[test]
fn batch_counting_and_permutation_audit() {
    let batches = epoch_batches(100, 32, &mut rng(4)).unwrap();
    assert_eq!(batches.len(), 3);
    assert!(batches.iter().all(|b| b.len() == 32));

    let mut perm: Vec<usize> = (0..100).collect();
    perm.shuffle(&mut rng(4));
    let flat: Vec<usize> = batches.concat();
    assert_eq!(flat, perm[..96]);
    assert_eq!(epoch_batches(100, 32, &mut rng(4)).unwrap(), batches);
}

#[test]
fn batch_iter_yields_selected_rows() {
    let data = Tensor::from_fn(&[10, 1, 1, 2], |i| (i[0] * 10 + i[3]) as f64);
    let b = SequenceBatch::new(data, None, Source::Generated).unwrap();
    let groups = epoch_batches(10, 4, &mut rng(5)).unwrap();
    let yielded: Vec<SequenceBatch> = BatchIter::new(&b, 4, &mut rng(5)).unwrap().map(Result::unwrap).collect();
    assert_eq!(yielded.len(), 2);
    for (g, y) in groups.iter().zip(&yielded) {
        for (k, &i) in g.iter().enumerate() {
            assert_eq!(y.sequence(k), b.sequence(i));
        }
    }
}

#[test]
fn dataset_spec_pipeline() {
    let spec = DatasetSpec {
        kind: DatasetKind::Sinusoid,
        path: None,
        n_samples: 30,
        seq_len: 24,
        channels: 2,
        class_filter: None,
        window: Some((4, 20)),
        normalize: true,
        seed: 0,
    };
    let b = spec.load(&mut rng(6)).unwrap();
    assert_eq!(b.data().shape(), &[30, 2, 1, 16]);
    assert!(channel_stats(&b).mean.iter().all(|m| m.abs() < 1e-9));
}

#[test]
fn dropout_preserves_expectation() {
    let mut r = rng(7);
    let p = 0.1;
    let n = 200_000;
    let mut tape = Tape::new();
    let x = tape.constant(Tensor::ones(&[n]));
    let y = tape.dropout(x, p, &mut Mode::Train(&mut r)).unwrap();
    let v = tape.value(y).data();
    let zeros = v.iter().filter(|&&e| e == 0.0).count() as f64 / n as f64;
    let mean = v.iter().sum::<f64>() / n as f64;
    // 5 sigma bands for a Bernoulli(0.1) average over 2e5 draws
    assert!((zeros - p).abs() < 5.0 * (p * (1.0 - p) / n as f64).sqrt());
    assert!((mean - 1.0).abs() < 5.0 * (p / (1.0 - p) / n as f64).sqrt());
}

#[test]
fn latent_moments() {
    let z = sample_latent(2_000, 100, &mut rng(8));
    let n = z.numel() as f64;
    let mean = z.data().iter().sum::<f64>() / n;
    let var = z.data().iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    assert!((mean - 0.5).abs() < 5.0 * (1.0 / 12.0 / n).sqrt());
    assert!((var - 1.0 / 12.0).abs() < 1e-3);
}
