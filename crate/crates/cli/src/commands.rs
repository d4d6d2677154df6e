use std::fmt;
use std::fs::{self, File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::Serialize;
use tsforge::checkpoint::{load_checkpoint, save_checkpoint};
use tsforge::data::{load_csv, save_csv, simulate_sinusoids, write_param_log};
use tsforge::evaluation::{feature_matrix, similarity_report, JsReduction, MetricOptions, Pca, DEFAULT_BINS};
use tsforge::training::{data_rng, generate, LossHistory, Trainer};
use tsforge::{Error, RunConfig, SequenceBatch, VERSION};

pub const SEED_ENV: &str = "TSFORGE_SEED";

#[derive(Debug, Parser)]
#[command(name = "tsforge", version, about = "Transformer GAN for multi-channel time series")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a simulated sinusoid dataset and its parameter log.
    Simulate {
        #[arg(long, default_value_t = 10_000)]
        n: usize,
        #[arg(long, default_value_t = 24)]
        timesteps: usize,
        #[arg(long, default_value_t = 5)]
        channels: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a GAN from a JSON run configuration.
    Train {
        #[arg(long)]
        config: PathBuf,
        /// Continue from a checkpoint written by an earlier run.
        #[arg(long)]
        resume: Option<PathBuf>,
    },
    /// Sample sequences from a trained checkpoint.
    Generate {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long, default_value_t = 1000)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compare real and synthetic datasets.
    Eval {
        #[arg(long)]
        real: PathBuf,
        #[arg(long)]
        syn: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = DEFAULT_BINS)]
        bins: usize,
        /// Sum per-feature distances instead of averaging them.
        #[arg(long)]
        sum: bool,
    },
}

#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Data(String),
    Runtime(String),
}

impl Failure {
    pub fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Data(_) => 2,
            Failure::Runtime(_) => 3,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Usage(m) | Failure::Data(m) | Failure::Runtime(m) => f.write_str(m),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let msg = e.to_string();
        match e {
            Error::Config(_) | Error::Parameter(_) => Failure::Usage(msg),
            Error::Data(_) | Error::Dimension { .. } | Error::Checkpoint(_) | Error::Metric(_) => {
                Failure::Data(msg)
            }
            Error::Numeric(_) | Error::Contract(_) | Error::Io(_) => Failure::Runtime(msg),
        }
    }
}

fn io_failure(path: &Path, e: std::io::Error) -> Failure {
    Failure::Runtime(format!("{}: {e}", path.display()))
}

type CmdResult = Result<(), Failure>;

pub fn run(cli: Cli) -> CmdResult {
    match cli.command {
        Command::Simulate {
            n,
            timesteps,
            channels,
            seed,
            out,
        } => simulate(n, timesteps, channels, seed, &out),
        Command::Train { config, resume } => train(&config, resume.as_deref()),
        Command::Generate { ckpt, n, seed, out } => generate_cmd(&ckpt, n, seed, &out),
        Command::Eval {
            real,
            syn,
            out,
            bins,
            sum,
        } => eval(&real, &syn, &out, bins, sum),
    }
}

fn prepare_dir(dir: &Path) -> CmdResult {
    fs::create_dir_all(dir).map_err(|e| io_failure(dir, e))?;
    write_file(&dir.join("VERSION"), format!("{VERSION}\n").as_bytes())
}

fn write_file(path: &Path, bytes: &[u8]) -> CmdResult {
    fs::write(path, bytes).map_err(|e| io_failure(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> CmdResult {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Failure::Runtime(e.to_string()))?;
    text.push('\n');
    write_file(path, text.as_bytes())
}

#[derive(Serialize)]
struct SimulateSnapshot {
    command: &'static str,
    n: usize,
    timesteps: usize,
    channels: usize,
    seed: u64,
}

fn simulate(n: usize, timesteps: usize, channels: usize, seed: u64, out: &Path) -> CmdResult {
    let (batch, params) = simulate_sinusoids(n, timesteps, channels, &mut data_rng(seed))?;
    prepare_dir(out)?;
    write_json(
        &out.join("config.json"),
        &SimulateSnapshot {
            command: "simulate",
            n,
            timesteps,
            channels,
            seed,
        },
    )?;
    save_csv(&batch, "sinusoid", &out.join("dataset.csv"))?;
    let path = out.join("params.csv");
    let file = File::create(&path).map_err(|e| io_failure(&path, e))?;
    write_param_log(&params, BufWriter::new(file))?;
    eprintln!("wrote {n} sequences to {}", out.display());
    Ok(())
}

fn read_config(path: &Path) -> Result<RunConfig, Failure> {
    let text = fs::read_to_string(path)
        .map_err(|e| Failure::Usage(format!("cannot read config {}: {e}", path.display())))?;
    let mut config = RunConfig::from_json(&text)?;
    if let Ok(raw) = std::env::var(SEED_ENV) {
        config.seed = raw
            .trim()
            .parse()
            .map_err(|_| Failure::Usage(format!("{SEED_ENV}={raw} is not an unsigned integer")))?;
    }
    config.validate()?;
    Ok(config)
}

fn append_history(path: &Path, history: &LossHistory, fresh: bool) -> CmdResult {
    let exists = path.exists();
    let file = OpenOptions::new()
        .create(true)
        .write(true)
        .append(!fresh)
        .truncate(fresh)
        .open(path)
        .map_err(|e| io_failure(path, e))?;
    let mut out = BufWriter::new(file);
    if fresh || !exists {
        history.write_csv(&mut out)?;
    } else {
        // continuing an existing log: rows only
        let mut rows = Vec::new();
        history.write_csv(&mut rows)?;
        let body = rows.splitn(2, |&b| b == b'\n').nth(1).unwrap_or_default();
        out.write_all(body).map_err(|e| io_failure(path, e))?;
    }
    out.flush().map_err(|e| io_failure(path, e))
}

fn train(config_path: &Path, resume: Option<&Path>) -> CmdResult {
    let config = read_config(config_path)?;
    let mut trainer = match resume {
        Some(path) => {
            let ckpt = load_checkpoint(path)?;
            Trainer::from_checkpoint(ckpt, Some(config.clone()))?
        }
        None => Trainer::new(config.clone())?,
    };
    let data = config.dataset_spec().load(&mut data_rng(config.seed))?;
    let out = config.output_dir.clone();
    prepare_dir(&out)?;
    write_file(&out.join("config.json"), format!("{}\n", config.to_json()).as_bytes())?;

    let start_epoch = trainer.epoch();
    let target = config.epochs as u64;
    eprintln!(
        "training on {} sequences from epoch {start_epoch} to {target}",
        data.len()
    );
    let history = trainer.run(&data, |ckpt| {
        let name = if ckpt.epoch == target {
            "final.ckpt".to_string()
        } else {
            format!("epoch_{:04}.ckpt", ckpt.epoch)
        };
        save_checkpoint(&out.join(name), ckpt)?;
        Ok(())
    })?;
    if let Some(last) = history.records.last() {
        eprintln!(
            "step {}: d_loss {:.5}, g_loss {:.5}",
            last.step, last.d_loss, last.g_loss
        );
    }
    append_history(&out.join("loss_history.csv"), &history, resume.is_none())
}

#[derive(Serialize)]
struct GenerateSnapshot<'a> {
    command: &'static str,
    checkpoint: &'a Path,
    n: usize,
    seed: u64,
    run: &'a RunConfig,
}

fn generate_cmd(ckpt_path: &Path, n: usize, seed: u64, out: &Path) -> CmdResult {
    let ckpt = load_checkpoint(ckpt_path)?;
    let trainer = Trainer::from_checkpoint(ckpt, None)?;
    let batch = generate(trainer.generator(), n, seed)?;
    prepare_dir(out)?;
    let config = trainer.config();
    write_json(
        &out.join("config.json"),
        &GenerateSnapshot {
            command: "generate",
            checkpoint: ckpt_path,
            n,
            seed,
            run: config,
        },
    )?;
    let label = config.class_filter.as_deref().unwrap_or("synthetic");
    save_csv(&batch, label, &out.join("synthetic.csv"))?;
    eprintln!("wrote {n} sequences to {}", out.display());
    Ok(())
}

#[derive(Serialize)]
struct EvalSnapshot<'a> {
    command: &'static str,
    real: &'a Path,
    syn: &'a Path,
    metrics: MetricOptions,
}

fn flat_rows(batch: &SequenceBatch) -> Vec<Vec<f64>> {
    (0..batch.len()).map(|i| batch.sequence(i).to_vec()).collect()
}

fn eval(real_path: &Path, syn_path: &Path, out: &Path, bins: usize, sum: bool) -> CmdResult {
    if bins == 0 {
        return Err(Failure::Usage("--bins must be positive".into()));
    }
    let metrics = MetricOptions {
        bins,
        reduction: if sum { JsReduction::Sum } else { JsReduction::Mean },
    };
    let real = load_csv(real_path)?;
    let syn = load_csv(syn_path)?;
    if (real.channels(), real.seq_len()) != (syn.channels(), syn.seq_len()) {
        return Err(Failure::Data(format!(
            "shape mismatch: real sequences are {}x{}, synthetic are {}x{}",
            real.channels(),
            real.seq_len(),
            syn.channels(),
            syn.seq_len()
        )));
    }
    let report = similarity_report(&feature_matrix(&real)?, &feature_matrix(&syn)?, &metrics)?;

    // Axes come from the real data; synthetic sequences are projected onto them.
    let real_rows = flat_rows(&real);
    let k = 2.min(real_rows[0].len());
    let pca = Pca::fit(&real_rows, k)?;
    let mut csv = String::from("sample_id,origin,pc1,pc2\n");
    for (origin, rows) in [("real", real_rows), ("syn", flat_rows(&syn))] {
        for (i, p) in pca.transform(&rows)?.iter().enumerate() {
            let pc2 = p.get(1).copied().unwrap_or(0.0);
            csv.push_str(&format!("{i},{origin},{},{pc2}\n", p[0]));
        }
    }

    prepare_dir(out)?;
    write_json(
        &out.join("config.json"),
        &EvalSnapshot {
            command: "eval",
            real: real_path,
            syn: syn_path,
            metrics,
        },
    )?;
    write_json(&out.join("report.json"), &report)?;
    write_file(&out.join("pca.csv"), csv.as_bytes())?;
    println!(
        "avg_cos_sim {:.6}  avg_jen_dis {:.6}  ({} real, {} synthetic)",
        report.avg_cos_sim, report.avg_jen_dis, report.n_real, report.n_syn
    );
    Ok(())
}
