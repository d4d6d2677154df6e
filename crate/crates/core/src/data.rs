//! Sequence datasets: sinusoid simulation, long-form CSV ingestion,
//! preprocessing and seeded mini-batching.
//!
//! The CSV schema has one row per value:
//!
//! ```text
//! sample_id,label,channel,t,value
//! 0,jumping,0,0,0.125
//! ```
//!
//! Samples keep their order of first appearance. Every sample must provide
//! every `(channel, t)` pair exactly once.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Open01};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const CSV_HEADER: [&str; 5] = ["sample_id", "label", "channel", "t", "value"];
pub const PARAM_LOG_HEADER: [&str; 4] = ["sample_id", "channel", "A", "B"];

#[derive(Debug, Clone, PartialEq)]
pub enum Source {
    Simulated,
    Generated,
    /// Parsed from an in-memory reader.
    Inline,
    File(PathBuf),
}

/// `(B, C, 1, W)` sequences with optional per-sequence class labels.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceBatch {
    data: Tensor,
    labels: Option<Vec<String>>,
    source: Source,
}

impl SequenceBatch {
    pub fn new(data: Tensor, labels: Option<Vec<String>>, source: Source) -> Result<Self> {
        match *data.shape() {
            [b, _, 1, _] => {
                if let Some(l) = &labels {
                    if l.len() != b {
                        return Err(Error::Data(format!(
                            "{} labels for {b} sequences",
                            l.len()
                        )));
                    }
                }
            }
            ref s => return Err(Error::dim("SequenceBatch", s, &[0, 0, 1, 0])),
        }
        Ok(Self {
            data,
            labels,
            source,
        })
    }

    pub fn data(&self) -> &Tensor {
        &self.data
    }

    pub fn into_data(self) -> Tensor {
        self.data
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    pub fn source(&self) -> &Source {
        &self.source
    }

    pub fn len(&self) -> usize {
        self.data.shape()[0]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn channels(&self) -> usize {
        self.data.shape()[1]
    }

    pub fn seq_len(&self) -> usize {
        self.data.shape()[3]
    }

    /// Flat `C × W` values of sequence `i`.
    pub fn sequence(&self, i: usize) -> &[f64] {
        let n = self.channels() * self.seq_len();
        &self.data.data()[i * n..(i + 1) * n]
    }

    pub fn select(&self, indices: &[usize]) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::Data("selection is empty".into()));
        }
        let (c, w) = (self.channels(), self.seq_len());
        let mut values = Vec::with_capacity(indices.len() * c * w);
        for &i in indices {
            if i >= self.len() {
                return Err(Error::Data(format!("index {i} out of range for {} sequences", self.len())));
            }
            values.extend_from_slice(self.sequence(i));
        }
        let labels = self
            .labels
            .as_ref()
            .map(|l| indices.iter().map(|&i| l[i].clone()).collect());
        Self::new(
            Tensor::new(vec![indices.len(), c, 1, w], values)?,
            labels,
            self.source.clone(),
        )
    }

    /// First `n` sequences and the rest.
    pub fn split_at(&self, n: usize) -> Result<(Self, Self)> {
        if n == 0 || n >= self.len() {
            return Err(Error::Data(format!(
                "cannot split {} sequences at {n}",
                self.len()
            )));
        }
        let head: Vec<usize> = (0..n).collect();
        let tail: Vec<usize> = (n..self.len()).collect();
        Ok((self.select(&head)?, self.select(&tail)?))
    }

    /// Keeps sequences whose label equals `class`.
    pub fn filter_class(&self, class: &str) -> Result<Self> {
        let labels = self
            .labels
            .as_ref()
            .ok_or_else(|| Error::Data("class filter on unlabeled data".into()))?;
        let keep: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        if keep.is_empty() {
            return Err(Error::Data(format!("no sequences with label '{class}'")));
        }
        self.select(&keep)
    }
}

/// Frequency and phase drawn for one channel of one simulated sequence.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SinusoidParams {
    pub sample_id: usize,
    pub channel: usize,
    pub a: f64,
    pub b: f64,
}

/// Upper bound of the open ranges for frequency `A` and phase `B`.
pub const SINUSOID_PARAM_MAX: f64 = 0.1;

/// Draws `n` sequences where channel `i` is `sin(A·t + B)` for
/// `t = 0..W`, with `A, B ~ U(0, 0.1)` drawn independently per channel.
pub fn simulate_sinusoids(
    n: usize,
    seq_len: usize,
    channels: usize,
    rng: &mut impl Rng,
) -> Result<(SequenceBatch, Vec<SinusoidParams>)> {
    if n == 0 || seq_len == 0 || channels == 0 {
        return Err(Error::Data(format!(
            "sinusoid dataset needs n, W, C >= 1 (got {n}, {seq_len}, {channels})"
        )));
    }
    let mut params = Vec::with_capacity(n * channels);
    for sample_id in 0..n {
        for channel in 0..channels {
            let a: f64 = SINUSOID_PARAM_MAX * Distribution::<f64>::sample(&Open01, rng);
            let b: f64 = SINUSOID_PARAM_MAX * Distribution::<f64>::sample(&Open01, rng);
            params.push(SinusoidParams {
                sample_id,
                channel,
                a,
                b,
            });
        }
    }
    let batch = render_sinusoids(&params, n, seq_len, channels)?;
    Ok((batch, params))
}

/// Evaluates `sin(A·t + B)` for logged parameters, ordered sample-major then channel.
pub fn render_sinusoids(
    params: &[SinusoidParams],
    n: usize,
    seq_len: usize,
    channels: usize,
) -> Result<SequenceBatch> {
    if params.len() != n * channels {
        return Err(Error::Data(format!(
            "{} parameter rows for {n} samples x {channels} channels",
            params.len()
        )));
    }
    let mut values = Vec::with_capacity(n * channels * seq_len);
    for p in params {
        values.extend((0..seq_len).map(|t| (p.a * t as f64 + p.b).sin()));
    }
    SequenceBatch::new(
        Tensor::new(vec![n, channels, 1, seq_len], values)?,
        None,
        Source::Simulated,
    )
}

pub fn write_param_log<W: Write>(params: &[SinusoidParams], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(PARAM_LOG_HEADER).map_err(csv_err)?;
    for p in params {
        w.write_record([
            p.sample_id.to_string(),
            p.channel.to_string(),
            p.a.to_string(),
            p.b.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Data(format!("csv: {other:?}")),
    }
}

/// Writes `batch` in the long-form schema. Unlabeled sequences get `default_label`.
pub fn write_csv<W: Write>(batch: &SequenceBatch, default_label: &str, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER).map_err(csv_err)?;
    let (c, len) = (batch.channels(), batch.seq_len());
    for i in 0..batch.len() {
        let label = batch.labels().map_or(default_label, |l| l[i].as_str());
        let seq = batch.sequence(i);
        let id = i.to_string();
        for ch in 0..c {
            let ch_s = ch.to_string();
            for t in 0..len {
                w.write_record([
                    id.as_str(),
                    label,
                    ch_s.as_str(),
                    t.to_string().as_str(),
                    seq[ch * len + t].to_string().as_str(),
                ])
                .map_err(csv_err)?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

pub fn save_csv(batch: &SequenceBatch, default_label: &str, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path)?;
    write_csv(batch, default_label, std::io::BufWriter::new(file))
}

pub fn load_csv(path: &Path) -> Result<SequenceBatch> {
    let file = std::fs::File::open(path)
        .map_err(|e| Error::Data(format!("cannot open {}: {e}", path.display())))?;
    let mut batch = read_csv(std::io::BufReader::new(file))?;
    batch.source = Source::File(path.to_path_buf());
    Ok(batch)
}

struct PendingSample {
    label: String,
    first_row: usize,
    cells: HashMap<(usize, usize), f64>,
}

/// Parses the long-form schema. Row numbers in errors count the header as row 1.
pub fn read_csv<R: Read>(input: R) -> Result<SequenceBatch> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
    let header = reader.headers().map_err(csv_err)?.clone();
    if header.is_empty() {
        return Err(Error::Data("empty file: missing header".into()));
    }
    if header.iter().map(str::trim).ne(CSV_HEADER) {
        return Err(Error::Data(format!(
            "row 1: expected header {}, found {}",
            CSV_HEADER.join(","),
            header.iter().collect::<Vec<_>>().join(",")
        )));
    }

    let mut order: Vec<String> = Vec::new();
    let mut samples: HashMap<String, PendingSample> = HashMap::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 2;
        let record = record.map_err(|e| Error::Data(format!("row {row}: {e}")))?;
        if record.len() != CSV_HEADER.len() {
            return Err(Error::Data(format!(
                "row {row}: expected {} fields, found {}",
                CSV_HEADER.len(),
                record.len()
            )));
        }
        let id = record[0].trim().to_string();
        let label = record[1].trim().to_string();
        let channel = parse_index(&record[2], "channel", row)?;
        let t = parse_index(&record[3], "t", row)?;
        let value: f64 = record[4]
            .trim()
            .parse()
            .map_err(|_| Error::Data(format!("row {row}: non-numeric value '{}'", &record[4])))?;
        if !value.is_finite() {
            return Err(Error::Data(format!("row {row}: non-finite value '{}'", &record[4])));
        }
        let sample = samples.entry(id.clone()).or_insert_with(|| {
            order.push(id.clone());
            PendingSample {
                label: label.clone(),
                first_row: row,
                cells: HashMap::new(),
            }
        });
        if sample.label != label {
            return Err(Error::Data(format!(
                "row {row}: sample '{id}' has label '{label}' but row {} says '{}'",
                sample.first_row, sample.label
            )));
        }
        if sample.cells.insert((channel, t), value).is_some() {
            return Err(Error::Data(format!(
                "row {row}: duplicate value for sample '{id}', channel {channel}, t {t}"
            )));
        }
    }
    if order.is_empty() {
        return Err(Error::Data("file contains no data rows".into()));
    }

    let shape_of = |s: &PendingSample| {
        let c = s.cells.keys().map(|k| k.0).max().map_or(0, |m| m + 1);
        let w = s.cells.keys().map(|k| k.1).max().map_or(0, |m| m + 1);
        (c, w)
    };
    let first = &samples[&order[0]];
    let (channels, len) = shape_of(first);
    let mut values = Vec::with_capacity(order.len() * channels * len);
    let mut labels = Vec::with_capacity(order.len());
    for id in &order {
        let s = &samples[id];
        let (c, w) = shape_of(s);
        if (c, w) != (channels, len) {
            return Err(Error::Data(format!(
                "sample '{id}' (from row {}) has {c} channels x {w} timesteps, expected {channels} x {len}",
                s.first_row
            )));
        }
        for ch in 0..channels {
            for t in 0..len {
                let v = s.cells.get(&(ch, t)).ok_or_else(|| {
                    Error::Data(format!(
                        "sample '{id}' (from row {}) is missing channel {ch}, t {t}",
                        s.first_row
                    ))
                })?;
                values.push(*v);
            }
        }
        labels.push(s.label.clone());
    }
    SequenceBatch::new(
        Tensor::new(vec![order.len(), channels, 1, len], values)?,
        Some(labels),
        Source::Inline,
    )
}

fn parse_index(cell: &str, field: &str, row: usize) -> Result<usize> {
    cell.trim()
        .parse()
        .map_err(|_| Error::Data(format!("row {row}: {field} '{cell}' is not a non-negative integer")))
}

/// Per-channel mean and standard deviation over all samples and timesteps.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

pub fn channel_stats(batch: &SequenceBatch) -> ChannelStats {
    let (c, w, n) = (batch.channels(), batch.seq_len(), batch.len());
    let count = (n * w) as f64;
    let mut mean = vec![0.0; c];
    let mut var = vec![0.0; c];
    for i in 0..n {
        let seq = batch.sequence(i);
        for ch in 0..c {
            mean[ch] += seq[ch * w..(ch + 1) * w].iter().sum::<f64>();
        }
    }
    mean.iter_mut().for_each(|m| *m /= count);
    for i in 0..n {
        let seq = batch.sequence(i);
        for ch in 0..c {
            var[ch] += seq[ch * w..(ch + 1) * w]
                .iter()
                .map(|v| (v - mean[ch]).powi(2))
                .sum::<f64>();
        }
    }
    let std = var.iter().map(|v| (v / count).sqrt()).collect();
    ChannelStats { mean, std }
}

/// Rescales each channel to zero mean and unit variance, using statistics
/// pooled over every sample and timestep of the batch.
pub fn normalize_channelwise(batch: &SequenceBatch) -> Result<SequenceBatch> {
    let stats = channel_stats(batch);
    if let Some(ch) = stats.std.iter().position(|&s| !(s > 0.0)) {
        return Err(Error::Data(format!("channel {ch} has zero variance")));
    }
    let (c, w) = (batch.channels(), batch.seq_len());
    let mut data = batch.data.clone();
    for (i, v) in data.data_mut().iter_mut().enumerate() {
        let ch = (i / w) % c;
        *v = (*v - stats.mean[ch]) / stats.std[ch];
    }
    Ok(SequenceBatch {
        data,
        labels: batch.labels.clone(),
        source: batch.source.clone(),
    })
}

/// Keeps timesteps `[start, end)`.
pub fn slice_window(batch: &SequenceBatch, start: usize, end: usize) -> Result<SequenceBatch> {
    let w = batch.seq_len();
    if start >= end || end > w {
        return Err(Error::Parameter(format!(
            "window [{start}, {end}) invalid for sequences of length {w}"
        )));
    }
    let (n, c) = (batch.len(), batch.channels());
    let mut values = Vec::with_capacity(n * c * (end - start));
    for row in batch.data.data().chunks_exact(w) {
        values.extend_from_slice(&row[start..end]);
    }
    SequenceBatch::new(
        Tensor::new(vec![n, c, 1, end - start], values)?,
        batch.labels.clone(),
        batch.source.clone(),
    )
}

/// Shuffled index groups for one epoch; the trailing partial batch is dropped.
pub fn epoch_batches(n: usize, batch_size: usize, rng: &mut impl Rng) -> Result<Vec<Vec<usize>>> {
    if batch_size == 0 {
        return Err(Error::Parameter("batch_size must be at least 1".into()));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    Ok(order
        .chunks_exact(batch_size)
        .map(<[usize]>::to_vec)
        .collect())
}

/// Iterator over the shuffled batches of one epoch.
pub struct BatchIter<'a> {
    dataset: &'a SequenceBatch,
    groups: std::vec::IntoIter<Vec<usize>>,
}

impl<'a> BatchIter<'a> {
    pub fn new(dataset: &'a SequenceBatch, batch_size: usize, rng: &mut impl Rng) -> Result<Self> {
        Ok(Self {
            dataset,
            groups: epoch_batches(dataset.len(), batch_size, rng)?.into_iter(),
        })
    }
}

impl Iterator for BatchIter<'_> {
    type Item = Result<SequenceBatch>;

    fn next(&mut self) -> Option<Self::Item> {
        self.groups.next().map(|g| self.dataset.select(&g))
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        self.groups.size_hint()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetKind {
    Sinusoid,
    Csv,
}

/// Where a training set comes from and how it is preprocessed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSpec {
    pub kind: DatasetKind,
    pub path: Option<PathBuf>,
    pub n_samples: usize,
    pub seq_len: usize,
    pub channels: usize,
    pub class_filter: Option<String>,
    pub window: Option<(usize, usize)>,
    pub normalize: bool,
    pub seed: u64,
}

impl DatasetSpec {
    pub fn validate(&self) -> Result<()> {
        if let Some((s, e)) = self.window {
            if s >= e {
                return Err(Error::Config(format!("window start {s} must be below end {e}")));
            }
        }
        match self.kind {
            DatasetKind::Csv if self.path.is_none() => {
                Err(Error::Config("csv dataset requires a path".into()))
            }
            DatasetKind::Sinusoid if self.n_samples == 0 => {
                Err(Error::Data("sinusoid dataset with zero samples".into()))
            }
            _ => Ok(()),
        }
    }

    /// Builds the dataset: simulate or load, filter by class, window, normalize.
    pub fn load(&self, rng: &mut impl Rng) -> Result<SequenceBatch> {
        self.validate()?;
        let mut batch = match self.kind {
            DatasetKind::Sinusoid => {
                simulate_sinusoids(self.n_samples, self.seq_len, self.channels, rng)?.0
            }
            DatasetKind::Csv => load_csv(self.path.as_deref().expect("validated"))?,
        };
        if let Some(class) = &self.class_filter {
            batch = batch.filter_class(class)?;
        }
        if let Some((s, e)) = self.window {
            batch = slice_window(&batch, s, e)?;
        }
        if self.normalize {
            batch = normalize_channelwise(&batch)?;
        }
        Ok(batch)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const FIXTURE: &str = "sample_id,label,channel,t,value\n\
        a,run,0,0,1.5\na,run,0,1,2\na,run,0,2,-3\n\
        b,run,0,2,6\nb,run,0,0,4\nb,run,0,1,5\n";

    #[test]
    fn fixture_loads_with_exact_values() {
        let b = read_csv(FIXTURE.as_bytes()).unwrap();
        assert_eq!(b.data().shape(), &[2, 1, 1, 3]);
        assert_eq!(b.data().data(), &[1.5, 2.0, -3.0, 4.0, 5.0, 6.0]);
        assert_eq!(b.labels().unwrap(), &["run", "run"]);
    }

    #[test]
    fn empty_file_is_data_error() {
        assert!(matches!(read_csv("".as_bytes()), Err(Error::Data(_))));
        let header_only = "sample_id,label,channel,t,value\n";
        assert!(matches!(read_csv(header_only.as_bytes()), Err(Error::Data(_))));
    }

    #[test]
    fn non_numeric_cell_reports_row() {
        let text = "sample_id,label,channel,t,value\na,x,0,0,1\na,x,0,1,oops\n";
        let err = read_csv(text.as_bytes()).unwrap_err().to_string();
        assert!(err.contains("row 3"), "{err}");
    }

    #[test]
    fn ragged_and_missing_are_errors() {
        let ragged = "sample_id,label,channel,t,value\na,x,0,0,1\na,x,0,1,1\nb,x,0,0,1\n";
        assert!(matches!(read_csv(ragged.as_bytes()), Err(Error::Data(_))));
        let missing = "sample_id,label,channel,t,value\na,x,0,0,1\na,x,1,1,1\n";
        let err = read_csv(missing.as_bytes()).unwrap_err().to_string();
        assert!(err.contains("missing channel"), "{err}");
    }

    #[test]
    fn channel_values_one_three_normalize_to_unit() {
        let t = Tensor::new(vec![1, 1, 1, 2], vec![1.0, 3.0]).unwrap();
        let b = SequenceBatch::new(t, None, Source::Simulated).unwrap();
        let n = normalize_channelwise(&b).unwrap();
        assert_eq!(n.data().data(), &[-1.0, 1.0]);
    }

    #[test]
    fn zero_variance_channel_named() {
        let t = Tensor::new(vec![2, 2, 1, 2], vec![1.0, 2.0, 5.0, 5.0, 3.0, 4.0, 5.0, 5.0]).unwrap();
        let b = SequenceBatch::new(t, None, Source::Simulated).unwrap();
        let err = normalize_channelwise(&b).unwrap_err().to_string();
        assert!(err.contains("channel 1"), "{err}");
    }

    #[test]
    fn window_slicing() {
        let t = Tensor::from_fn(&[2, 1, 1, 188], |i| (i[0] * 1000 + i[3]) as f64);
        let b = SequenceBatch::new(t, None, Source::Simulated).unwrap();
        let s = slice_window(&b, 5, 55).unwrap();
        assert_eq!(s.seq_len(), 50);
        let expect: Vec<f64> = (5..55).map(|v| 1000.0 + v as f64).collect();
        assert_eq!(s.sequence(1), expect.as_slice());
        assert_eq!(slice_window(&b, 0, 188).unwrap(), b);
        assert!(matches!(slice_window(&b, 5, 189), Err(Error::Parameter(_))));
        assert!(matches!(slice_window(&b, 10, 10), Err(Error::Parameter(_))));
    }

    #[test]
    fn batch_counting_and_permutation() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let groups = epoch_batches(100, 32, &mut rng).unwrap();
        assert_eq!(groups.len(), 3);

        let mut replay = ChaCha8Rng::seed_from_u64(9);
        let mut perm: Vec<usize> = (0..100).collect();
        perm.shuffle(&mut replay);
        let yielded: Vec<usize> = groups.concat();
        assert_eq!(yielded, perm[..96]);
    }

    #[test]
    fn zero_params_render_zero() {
        let params: Vec<SinusoidParams> = (0..3)
            .map(|channel| SinusoidParams {
                sample_id: 0,
                channel,
                a: 0.0,
                b: 0.0,
            })
            .collect();
        let b = render_sinusoids(&params, 1, 24, 3).unwrap();
        assert!(b.data().data().iter().all(|&v| v == 0.0));
    }
}
