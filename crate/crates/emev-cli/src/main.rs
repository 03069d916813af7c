//! Command-line harness: generate datasets, train/evaluate the classifiers,
//! sweep SNR, and report parameter/FLOP/latency overhead.
//!
//! Exit codes: 0 success, 1 usage error, 2 runtime failure.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};
use serde::Serialize;

use emev::channel::los_probability;
use emev::dataset::{
    self, apply_awgn_dataset, feature_set, generate_dataset, load_manifest, Dataset, Mode,
};
use emev::nn::{
    count_flops, count_params, evaluate, inference_latency, layer_table, load_checkpoint,
    save_checkpoint, train, Arch, EvalReport, ModelSpec, ModelState, SampleInput, TrainConfig,
};

const SCHEMA_VERSION: u32 = 1;
const DEFAULT_SNR_GRID: &str = "10,12,14,16,18,20";

#[derive(Parser)]
#[command(name = "emev-cli", about = "CDL channel-type identification workbench", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the CSI + EMEV datasets and manifest.
    Generate {
        /// Samples per channel class (5 classes total).
        #[arg(long, value_name = "N")]
        per_class: usize,
        /// Master seed; all per-sample randomness derives from it.
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Output directory.
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
    },
    /// Train a classifier on a generated dataset.
    Train {
        /// Architecture: emev | csi.
        #[arg(long)]
        arch: String,
        /// Dataset directory (as produced by `generate`).
        #[arg(long, value_name = "DIR")]
        data: PathBuf,
        /// Output directory for checkpoint/history (defaults to --data).
        #[arg(long, value_name = "DIR")]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 30)]
        epochs: usize,
        #[arg(long, default_value_t = 1e-3)]
        lr: f64,
        #[arg(long, default_value_t = 64)]
        batch_size: usize,
        /// Seed for weight init and batch shuffling.
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Evaluate a checkpoint on the test split; optionally sweep AWGN SNRs.
    Eval {
        #[arg(long, value_name = "FILE")]
        checkpoint: PathBuf,
        #[arg(long, value_name = "DIR")]
        data: PathBuf,
        /// Comma-separated SNR grid in dB; bare `--snr` uses the default
        /// sweep 10..20 dB in 2 dB steps.
        #[arg(long, value_name = "LIST", num_args = 0..=1, default_missing_value = DEFAULT_SNR_GRID)]
        snr: Option<String>,
        /// Output directory for metrics (defaults to --data).
        #[arg(long, value_name = "DIR")]
        out: Option<PathBuf>,
    },
    /// Report parameters, FLOPs, checkpoint size and CPU latency for both
    /// architectures.
    Overhead {
        /// Optional directory for the JSON report.
        #[arg(long, value_name = "DIR")]
        out: Option<PathBuf>,
        /// Latency repetitions per architecture.
        #[arg(long, default_value_t = 15)]
        reps: usize,
    },
    /// LOS probability for a 2-D distance and UE height.
    LosProb {
        #[arg(long, allow_hyphen_values = true)]
        d2d: f64,
        #[arg(long, allow_hyphen_values = true)]
        hut: f64,
    },
}

enum AppError {
    Usage(String),
    Runtime(anyhow::Error),
}

impl<E: Into<anyhow::Error>> From<E> for AppError {
    fn from(e: E) -> Self {
        AppError::Runtime(e.into())
    }
}

fn usage(msg: impl Into<String>) -> AppError {
    AppError::Usage(msg.into())
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    match run(cli.command) {
        Ok(()) => {}
        Err(AppError::Usage(msg)) => {
            eprintln!("usage error: {msg}");
            std::process::exit(1);
        }
        Err(AppError::Runtime(e)) => {
            eprintln!("error: {e:#}");
            std::process::exit(2);
        }
    }
}

fn run(command: Command) -> Result<(), AppError> {
    match command {
        Command::Generate { per_class, seed, out } => cmd_generate(per_class, seed, &out),
        Command::Train { arch, data, out, epochs, lr, batch_size, seed } => {
            let arch = Arch::parse(&arch).map_err(|e| usage(e.to_string()))?;
            let out = out.unwrap_or_else(|| data.clone());
            cmd_train(arch, &data, &out, epochs, lr, batch_size, seed)
        }
        Command::Eval { checkpoint, data, snr, out } => {
            let grid = match snr {
                Some(list) => Some(parse_snr_list(&list).map_err(usage)?),
                None => None,
            };
            let out = out.unwrap_or_else(|| data.clone());
            cmd_eval(&checkpoint, &data, grid, &out)
        }
        Command::Overhead { out, reps } => cmd_overhead(out.as_deref(), reps),
        Command::LosProb { d2d, hut } => cmd_los_prob(d2d, hut),
    }
}

fn parse_snr_list(list: &str) -> Result<Vec<f64>, String> {
    let grid: Result<Vec<f64>, _> =
        list.split(',').map(|s| s.trim().parse::<f64>()).collect();
    match grid {
        Ok(g) if !g.is_empty() && g.iter().all(|x| x.is_finite()) => Ok(g),
        _ => Err(format!("cannot parse SNR list {list:?}")),
    }
}

/// Guard against concurrent runs writing the same directory.
struct DirLock {
    path: PathBuf,
}

impl DirLock {
    fn acquire(dir: &Path) -> Result<DirLock, AppError> {
        std::fs::create_dir_all(dir)
            .map_err(|e| AppError::Runtime(anyhow::anyhow!("create {}: {e}", dir.display())))?;
        let path = dir.join(".emev.lock");
        match std::fs::OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(_) => Ok(DirLock { path }),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => {
                Err(AppError::Runtime(anyhow::anyhow!(
                    "output directory {} is locked by another run (stale? remove {})",
                    dir.display(),
                    path.display()
                )))
            }
            Err(e) => Err(AppError::Runtime(e.into())),
        }
    }
}

impl Drop for DirLock {
    fn drop(&mut self) {
        let _ = std::fs::remove_file(&self.path);
    }
}

#[derive(Serialize)]
struct ResultRecord<C: Serialize, M: Serialize> {
    schema_version: u32,
    command: &'static str,
    timestamp_utc: String,
    config: C,
    config_sha256: String,
    metrics: M,
}

fn write_record<C: Serialize, M: Serialize>(
    path: &Path,
    command: &'static str,
    config: C,
    metrics: M,
) -> anyhow::Result<()> {
    use sha2::{Digest, Sha256};
    let config_json = serde_json::to_string(&config)?;
    let record = ResultRecord {
        schema_version: SCHEMA_VERSION,
        command,
        timestamp_utc: chrono::Utc::now().to_rfc3339(),
        config,
        config_sha256: format!("{:x}", Sha256::digest(config_json.as_bytes())),
        metrics,
    };
    std::fs::write(path, serde_json::to_string_pretty(&record)? + "\n")?;
    Ok(())
}

fn cmd_generate(per_class: usize, seed: u64, out: &Path) -> Result<(), AppError> {
    if per_class == 0 {
        return Err(usage("--per-class must be >= 1"));
    }
    let _lock = DirLock::acquire(out)?;
    let link = emev::channel::LinkConfig::default();
    let manifest = generate_dataset(per_class, &link, seed, out)?;
    println!(
        "generated {} samples ({} per class x {} classes) with master seed {}",
        manifest.total_samples(),
        manifest.per_class,
        manifest.class_labels.len(),
        manifest.master_seed
    );
    println!(
        "split: {} train / {} val / {} test",
        manifest.split.train.len(),
        manifest.split.val.len(),
        manifest.split.test.len()
    );
    println!("wrote dataset_csi.bin, dataset_emev.bin, manifest.json to {}", out.display());
    Ok(())
}

fn dataset_path(dir: &Path, mode: Mode) -> PathBuf {
    dir.join(format!("dataset_{}.bin", mode.as_str()))
}

fn load_matching_dataset(dir: &Path, arch: Arch) -> Result<Dataset, AppError> {
    let mode = match arch {
        Arch::EmevIdNet => Mode::Emev,
        Arch::CsiIdNet => Mode::Csi,
    };
    let path = dataset_path(dir, mode);
    if !path.exists() {
        return Err(AppError::Runtime(anyhow::anyhow!(
            "dataset file {} not found (run `generate` first)",
            path.display()
        )));
    }
    Ok(dataset::deserialize(&path)?)
}

#[derive(Serialize)]
struct TrainRunConfig {
    arch: &'static str,
    data_dir: String,
    epochs: usize,
    learning_rate: f64,
    batch_size: usize,
    train_seed: u64,
    dataset_master_seed: u64,
    per_class: usize,
}

fn cmd_train(
    arch: Arch,
    data: &Path,
    out: &Path,
    epochs: usize,
    lr: f64,
    batch_size: usize,
    seed: u64,
) -> Result<(), AppError> {
    let manifest = load_manifest(&data.join("manifest.json"))?;
    let set = load_matching_dataset(data, arch)?;
    if set.samples.len() != manifest.total_samples() {
        return Err(AppError::Runtime(anyhow::anyhow!(
            "dataset has {} samples but manifest expects {}",
            set.samples.len(),
            manifest.total_samples()
        )));
    }
    let _lock = DirLock::acquire(out)?;

    let spec = ModelSpec::new(arch, set.n_rb, set.n_r, set.n_t);
    let mut state = ModelState::<f32>::init(spec, seed);
    let train_feats = feature_set(&set, &manifest.split.train)?;
    let val_feats = feature_set(&set, &manifest.split.val)?;
    let cfg = TrainConfig {
        learning_rate: lr,
        epochs,
        batch_size,
        seed,
        ..TrainConfig::default()
    };
    println!(
        "training {} on {} samples ({} val), {} params",
        arch.as_str(),
        train_feats.len(),
        val_feats.len(),
        state.num_params()
    );
    let history = train(&mut state, &train_feats, &val_feats, &cfg)?;
    for h in &history {
        println!(
            "epoch {:>3}  train loss {:.4} acc {:.4}  val loss {:.4} acc {:.4}",
            h.epoch, h.train_loss, h.train_accuracy, h.val_loss, h.val_accuracy
        );
    }

    let ckpt_path = out.join(format!("{}.ckpt", arch.as_str()));
    save_checkpoint(&state, &ckpt_path)?;
    let mut csv = String::from("epoch,train_loss,train_accuracy,val_loss,val_accuracy\n");
    for h in &history {
        writeln!(
            csv,
            "{},{},{},{},{}",
            h.epoch, h.train_loss, h.train_accuracy, h.val_loss, h.val_accuracy
        )
        .unwrap();
    }
    std::fs::write(out.join(format!("{}_history.csv", arch.as_str())), csv)
        .map_err(anyhow::Error::from)?;

    let config = TrainRunConfig {
        arch: arch.as_str(),
        data_dir: data.display().to_string(),
        epochs,
        learning_rate: lr,
        batch_size,
        train_seed: seed,
        dataset_master_seed: manifest.master_seed,
        per_class: manifest.per_class,
    };
    let final_stats = history.last().cloned();
    write_record(
        &out.join(format!("{}_train.json", arch.as_str())),
        "train",
        config,
        serde_json::json!({ "epochs_run": history.len(), "final": final_stats }),
    )?;
    println!("checkpoint written to {}", ckpt_path.display());
    Ok(())
}

fn confusion_csv(report: &EvalReport) -> String {
    let labels = ["A", "B", "C", "D", "E"];
    let mut csv = String::from("true\\pred,A,B,C,D,E\n");
    for (i, row) in report.confusion.iter().enumerate() {
        let cells: Vec<String> = row.iter().map(|c| c.to_string()).collect();
        writeln!(csv, "{},{}", labels[i], cells.join(",")).unwrap();
    }
    csv
}

#[derive(Serialize)]
struct EvalRunConfig {
    arch: &'static str,
    checkpoint: String,
    data_dir: String,
    snr_grid_db: Option<Vec<f64>>,
    dataset_master_seed: u64,
}

fn cmd_eval(
    checkpoint: &Path,
    data: &Path,
    snr_grid: Option<Vec<f64>>,
    out: &Path,
) -> Result<(), AppError> {
    let state = load_checkpoint::<f32>(checkpoint)?;
    let arch = state.spec.arch;
    let manifest = load_manifest(&data.join("manifest.json"))?;
    let set = load_matching_dataset(data, arch)?;
    if (set.n_rb, set.n_r, set.n_t) != (state.spec.n_rb, state.spec.n_r, state.spec.n_t) {
        return Err(AppError::Runtime(anyhow::anyhow!(
            "checkpoint dims {}x{}x{} do not match dataset {}x{}x{}",
            state.spec.n_rb,
            state.spec.n_r,
            state.spec.n_t,
            set.n_rb,
            set.n_r,
            set.n_t
        )));
    }
    let _lock = DirLock::acquire(out)?;

    let test_feats = feature_set(&set, &manifest.split.test)?;
    let clean = evaluate(&state, &test_feats)?;
    println!("clean test accuracy: {:.4} ({} samples)", clean.accuracy, clean.samples);
    std::fs::write(
        out.join(format!("{}_confusion.csv", arch.as_str())),
        confusion_csv(&clean),
    )
    .map_err(anyhow::Error::from)?;

    let mut sweep: Vec<serde_json::Value> = Vec::new();
    if let Some(grid) = &snr_grid {
        let csi_path = dataset_path(data, Mode::Csi);
        let clean_csi = dataset::deserialize(&csi_path)?;
        let target = match arch {
            Arch::EmevIdNet => Mode::Emev,
            Arch::CsiIdNet => Mode::Csi,
        };
        let mut csv = String::from("snr_db,accuracy\n");
        for &snr in grid {
            let noisy = apply_awgn_dataset(&clean_csi, snr, target)?;
            let feats = feature_set(&noisy, &manifest.split.test)?;
            let report = evaluate(&state, &feats)?;
            println!("snr {snr:>5} dB: accuracy {:.4}", report.accuracy);
            writeln!(csv, "{snr},{}", report.accuracy).unwrap();
            sweep.push(serde_json::json!({ "snr_db": snr, "accuracy": report.accuracy }));
        }
        std::fs::write(out.join(format!("{}_snr_sweep.csv", arch.as_str())), csv)
            .map_err(anyhow::Error::from)?;
    }

    let config = EvalRunConfig {
        arch: arch.as_str(),
        checkpoint: checkpoint.display().to_string(),
        data_dir: data.display().to_string(),
        snr_grid_db: snr_grid,
        dataset_master_seed: manifest.master_seed,
    };
    write_record(
        &out.join(format!("{}_eval.json", arch.as_str())),
        "eval",
        config,
        serde_json::json!({
            "clean_accuracy": clean.accuracy,
            "clean_mean_loss": clean.mean_loss,
            "confusion": clean.confusion,
            "per_class_accuracy": clean.per_class_accuracy(),
            "snr_sweep": sweep,
        }),
    )?;
    Ok(())
}

fn zero_input(spec: &ModelSpec) -> SampleInput<f32> {
    let ([d0, d1, d2], cin) = spec.u_branch_input();
    let secondary = match spec.arch {
        Arch::EmevIdNet => {
            let ([s0, s1], s_cin) = spec.s_branch_input();
            Some(vec![0.1f32; s0 * s1 * s_cin])
        }
        Arch::CsiIdNet => None,
    };
    SampleInput { primary: vec![0.1f32; d0 * d1 * d2 * cin], secondary }
}

fn cmd_overhead(out: Option<&Path>, reps: usize) -> Result<(), AppError> {
    if reps == 0 {
        return Err(usage("--reps must be >= 1"));
    }
    let tmp = tempdir_in_std()?;
    let mut rows = Vec::new();
    for arch in [Arch::EmevIdNet, Arch::CsiIdNet] {
        let spec = ModelSpec::at_default_dims(arch);
        let state = ModelState::<f32>::init(spec, 0);
        let ckpt = tmp.join(format!("{}.ckpt", arch.as_str()));
        save_checkpoint(&state, &ckpt)?;
        let file_bytes = std::fs::metadata(&ckpt).map_err(anyhow::Error::from)?.len();
        let latency = inference_latency(&state, &zero_input(&spec), reps)?;
        rows.push(serde_json::json!({
            "arch": arch.as_str(),
            "params": count_params(&spec),
            "flops": count_flops(&spec),
            "checkpoint_bytes": file_bytes,
            "median_latency_us": latency.as_secs_f64() * 1e6,
            "layers": layer_table(&spec),
        }));
    }
    let _ = std::fs::remove_dir_all(&tmp);

    let p = |row: &serde_json::Value, key: &str| row[key].as_f64().unwrap_or(f64::NAN);
    println!(
        "{:<6} {:>12} {:>14} {:>14} {:>16}",
        "arch", "params", "flops", "ckpt bytes", "latency (us)"
    );
    for row in &rows {
        println!(
            "{:<6} {:>12} {:>14} {:>14} {:>16.1}",
            row["arch"].as_str().unwrap(),
            row["params"],
            row["flops"],
            row["checkpoint_bytes"],
            p(row, "median_latency_us"),
        );
    }
    let ratios = serde_json::json!({
        "params": p(&rows[0], "params") / p(&rows[1], "params"),
        "flops": p(&rows[0], "flops") / p(&rows[1], "flops"),
        "checkpoint_bytes": p(&rows[0], "checkpoint_bytes") / p(&rows[1], "checkpoint_bytes"),
        "median_latency": p(&rows[0], "median_latency_us") / p(&rows[1], "median_latency_us"),
    });
    println!(
        "emev/csi ratios: params {:.3}, flops {:.3}, latency {:.3}",
        ratios["params"].as_f64().unwrap(),
        ratios["flops"].as_f64().unwrap(),
        ratios["median_latency"].as_f64().unwrap()
    );
    if let Some(dir) = out {
        let _lock = DirLock::acquire(dir)?;
        write_record(
            &dir.join("overhead.json"),
            "overhead",
            serde_json::json!({ "latency_reps": reps }),
            serde_json::json!({ "architectures": rows, "emev_over_csi": ratios }),
        )?;
        println!("report written to {}", dir.join("overhead.json").display());
    }
    Ok(())
}

fn tempdir_in_std() -> anyhow::Result<PathBuf> {
    let dir = std::env::temp_dir().join(format!("emev-overhead-{}", std::process::id()));
    std::fs::create_dir_all(&dir)?;
    Ok(dir)
}

fn cmd_los_prob(d2d: f64, hut: f64) -> Result<(), AppError> {
    let p = los_probability(d2d, hut).map_err(|e| usage(e.to_string()))?;
    println!("{p}");
    Ok(())
}
