//! The `pmri` command line: `simulate`, `train`, `reconstruct`, `evaluate`.

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::io::dataset::{
    files_with_suffix, sample_name, KSPACE_SUFFIX, MANIFEST, MASK_FILE, RECON_SUFFIX, SENSITIVITY_FILE,
    SINGLE_SUFFIX, TRUTH_SUFFIX,
};
use crate::io::{
    apply_train_keys, load_complex, load_dataset, load_kspace, load_mask, save_complex, save_mask, write_png,
    Checkpoint, ConfigFile, TRAIN_KEYS,
};
use crate::metrics::{evaluate_magnitudes, MetricReport, Peak};
use crate::mri::{make_cartesian_mask, simulate_with_maps, PhantomSpec, SensitivitySpec};
use crate::network::forward_pass;
use crate::numerics::{magnitude, RealImage};
use crate::training::{sos, train_from, EpochRecord, LossConfig, TrainConfig, TrainState};

/// Environment variable capping the number of worker threads.
pub const THREADS_ENV: &str = "PMRI_THREADS";

pub const CHECKPOINT_FILE: &str = "checkpoint.pmck";
pub const LOG_FILE: &str = "train_log.jsonl";

/// Keys understood by `simulate`.
pub const SIM_KEYS: &[&str] = &[
    "height",
    "width",
    "coils",
    "samples",
    "ratio",
    "acs_lines",
    "noise_sigma",
    "jitter",
    "extra_ellipses",
    "phase_amplitude",
    "coil_radius",
    "coil_width",
    "coil_phase_slope",
    "normalize_coils",
    "seed",
];

/// Keys used only by `train` and `evaluate`, beyond [`TRAIN_KEYS`].
pub const EXTRA_KEYS: &[&str] = &["val_samples", "checkpoint_every", "psnr_peak"];

#[derive(Debug, Parser)]
#[command(name = "pmri", version, about = "Parallel MRI reconstruction without coil sensitivities")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Clone, Default)]
pub struct CommonArgs {
    /// Flat `key = value` config file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Overrides the `seed` config key.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Single-threaded execution with sequential reductions.
    #[arg(long)]
    pub deterministic: bool,
    /// Output directory (created if missing).
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Writes a synthetic multi-coil dataset.
    Simulate {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Trains the network on a dataset directory.
    Train {
        #[command(flatten)]
        common: CommonArgs,
        /// Dataset directory written by `simulate`.
        #[arg(long)]
        data: PathBuf,
        /// Continue from a checkpoint.
        #[arg(long)]
        resume: Option<PathBuf>,
    },
    /// Runs a trained network on k-space files.
    Reconstruct {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        checkpoint: PathBuf,
        /// A `.kspace.pmrt` file or a directory of them.
        #[arg(long)]
        input: PathBuf,
        /// Mask file; defaults to `mask.pmrt` next to the input.
        #[arg(long)]
        mask: Option<PathBuf>,
    },
    /// Computes PSNR / SSIM / RMSE of reconstructions against ground truths.
    Evaluate {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        recon: PathBuf,
        #[arg(long)]
        truth: PathBuf,
    },
}

fn load_config(common: &CommonArgs, known: &[&[&str]]) -> Result<ConfigFile> {
    let file = match &common.config {
        Some(p) => ConfigFile::load(p)?,
        None => ConfigFile::default(),
    };
    let all: Vec<&str> = known.iter().flat_map(|k| k.iter().copied()).collect();
    file.check_known(&all)?;
    Ok(file)
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Worker count: the configured value (or the machine's parallelism),
/// capped by `PMRI_THREADS`; 1 in deterministic mode.
pub fn worker_threads(configured: Option<usize>, deterministic: bool) -> Result<usize> {
    if deterministic {
        return Ok(1);
    }
    let base = configured.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    let cap = match std::env::var(THREADS_ENV) {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| Error::param(format!("{THREADS_ENV}={v:?} must be a positive integer")))?,
        Err(_) => usize::MAX,
    };
    Ok(base.clamp(1, cap))
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimulateConfig {
    pub phantom: PhantomSpec,
    pub coils: SensitivitySpec,
    pub samples: usize,
    pub ratio: f64,
    pub acs_lines: usize,
    pub noise_sigma: f64,
    pub seed: u64,
}

impl SimulateConfig {
    pub fn new(size: usize, coils: usize) -> Self {
        let mut phantom = PhantomSpec::new(size, size);
        phantom.jitter = 0.5;
        phantom.max_extra_ellipses = 3;
        phantom.phase_amplitude = 0.5;
        Self {
            phantom,
            coils: SensitivitySpec::new(coils),
            samples: 8,
            ratio: 0.3156,
            acs_lines: 8,
            noise_sigma: 0.0,
            seed: 0,
        }
    }

    pub fn from_file(file: &ConfigFile) -> Result<Self> {
        let mut c = Self::new(64, 4);
        file.read_into("height", &mut c.phantom.height)?;
        c.phantom.width = c.phantom.height;
        file.read_into("width", &mut c.phantom.width)?;
        file.read_into("coils", &mut c.coils.coils)?;
        file.read_into("samples", &mut c.samples)?;
        file.read_into("ratio", &mut c.ratio)?;
        file.read_into("acs_lines", &mut c.acs_lines)?;
        file.read_into("noise_sigma", &mut c.noise_sigma)?;
        file.read_into("jitter", &mut c.phantom.jitter)?;
        file.read_into("extra_ellipses", &mut c.phantom.max_extra_ellipses)?;
        file.read_into("phase_amplitude", &mut c.phantom.phase_amplitude)?;
        file.read_into("coil_radius", &mut c.coils.radius)?;
        file.read_into("coil_width", &mut c.coils.width)?;
        file.read_into("coil_phase_slope", &mut c.coils.phase_slope)?;
        file.read_into("normalize_coils", &mut c.coils.normalize)?;
        file.read_into("seed", &mut c.seed)?;
        Ok(c)
    }
}

/// Writes the dataset for `cfg` into `out`.
pub fn simulate_dataset(cfg: &SimulateConfig, out: &Path) -> Result<()> {
    create_dir(out)?;
    let (h, w) = (cfg.phantom.height, cfg.phantom.width);
    let mask = make_cartesian_mask(h, w, cfg.ratio, cfg.acs_lines)?;
    let maps = cfg.coils.maps(h, w)?;
    save_mask(out.join(MASK_FILE), &mask)?;
    save_complex(out.join(SENSITIVITY_FILE), maps.maps())?;
    let mut seeds = ChaCha8Rng::seed_from_u64(cfg.seed);
    for i in 0..cfg.samples {
        let s = simulate_with_maps(&cfg.phantom, &maps, &mask, cfg.noise_sigma, seeds.random::<u64>())?;
        let name = sample_name(i);
        save_complex(out.join(format!("{name}{KSPACE_SUFFIX}")), s.sample.kspace.coils())?;
        save_complex(out.join(format!("{name}{TRUTH_SUFFIX}")), &s.sample.truth)?;
    }
    let sampled = mask.count_sampled();
    let manifest = format!(
        "format = pmri-dataset-1\nsamples = {}\nheight = {h}\nwidth = {w}\ncoils = {}\n\
         ratio = {}\nacs_lines = {}\nsampled_entries = {sampled}\nsampled_lines = {}\nmeasured_ratio = {}\n\
         noise_sigma = {}\njitter = {}\nextra_ellipses = {}\nphase_amplitude = {}\ncoil_radius = {}\n\
         coil_width = {}\ncoil_phase_slope = {}\nnormalize_coils = {}\nseed = {}\n",
        cfg.samples,
        cfg.coils.coils,
        cfg.ratio,
        cfg.acs_lines,
        mask.sampled_lines().len(),
        sampled as f64 / (h * w) as f64,
        cfg.noise_sigma,
        cfg.phantom.jitter,
        cfg.phantom.max_extra_ellipses,
        cfg.phantom.phase_amplitude,
        cfg.coils.radius,
        cfg.coils.width,
        cfg.coils.phase_slope,
        cfg.coils.normalize,
        cfg.seed,
    );
    write_text(&out.join(MANIFEST), &manifest)
}

fn cmd_simulate(common: &CommonArgs) -> Result<()> {
    let file = load_config(common, &[TRAIN_KEYS, EXTRA_KEYS, SIM_KEYS])?;
    let mut cfg = SimulateConfig::from_file(&file)?;
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    simulate_dataset(&cfg, &common.out)?;
    eprintln!("wrote {} samples to {}", cfg.samples, common.out.display());
    Ok(())
}

fn read_log(path: &Path, keep: usize) -> Result<Vec<String>> {
    if !path.exists() {
        return Ok(Vec::new());
    }
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let lines = BufReader::new(file)
        .lines()
        .take(keep)
        .collect::<std::io::Result<Vec<_>>>()
        .map_err(|e| Error::io(path, e))?;
    Ok(lines)
}

fn cmd_train(common: &CommonArgs, data: &Path, resume: Option<&Path>) -> Result<()> {
    let file = load_config(common, &[TRAIN_KEYS, EXTRA_KEYS, SIM_KEYS])?;
    let samples = load_dataset(data)?;
    let coils = samples
        .first()
        .map(|s| s.kspace.num_coils())
        .ok_or_else(|| Error::format(data, "dataset has no samples"))?;
    let (mut cfg, loss_cfg, mut state) = match resume {
        Some(path) => {
            let ck = Checkpoint::load(path)?;
            let mut cfg = ck.config;
            // Only the schedule length may change on resume.
            file.read_into("epochs", &mut cfg.epochs)?;
            (cfg, ck.loss, ck.state)
        }
        None => {
            let mut cfg = TrainConfig::new(coils);
            let mut loss = LossConfig::default();
            apply_train_keys(&file, &mut cfg, &mut loss)?;
            if let Some(seed) = common.seed {
                cfg.seed = seed;
            }
            let state = TrainState::new(&cfg)?;
            (cfg, loss, state)
        }
    };
    cfg.threads = worker_threads(file.value("threads")?, common.deterministic)?;
    let val_count: usize = file.value("val_samples")?.unwrap_or(0);
    let every: usize = file.value("checkpoint_every")?.unwrap_or(0);
    if val_count >= samples.len() {
        return Err(Error::param(format!(
            "val_samples = {val_count} leaves no training data out of {}",
            samples.len()
        )));
    }
    let (train_set, val_set) = samples.split_at(samples.len() - val_count);

    create_dir(&common.out)?;
    let log_path = common.out.join(LOG_FILE);
    let previous = read_log(&log_path, state.epochs_done)?;
    let log_file = File::create(&log_path).map_err(|e| Error::io(&log_path, e))?;
    let mut log = BufWriter::new(log_file);
    for line in &previous {
        writeln!(log, "{line}").map_err(|e| Error::io(&log_path, e))?;
    }
    log.flush().map_err(|e| Error::io(&log_path, e))?;

    let out = common.out.clone();
    let snapshot = |state: &TrainState| Checkpoint {
        config: cfg.clone(),
        loss: loss_cfg,
        state: state.clone(),
    };
    let total = cfg.epochs;
    let result = train_from(&mut state, train_set, val_set, &cfg, &loss_cfg, |st, rec: &EpochRecord| {
        let line = serde_json::to_string(rec).expect("plain record");
        writeln!(log, "{line}")
            .and_then(|_| log.flush())
            .map_err(|e| Error::io(&log_path, e))?;
        eprintln!(
            "epoch {}/{} loss {:.6e}{}",
            rec.epoch,
            total,
            rec.mean_loss,
            rec.val_psnr.map(|p| format!(" val_psnr {p:.3}")).unwrap_or_default()
        );
        if every > 0 && rec.epoch % every == 0 {
            snapshot(st).save(out.join(format!("checkpoint_epoch_{:04}.pmck", rec.epoch)))?;
        }
        Ok(())
    });
    // The last finite state is kept even when training diverges.
    snapshot(&state).save(common.out.join(CHECKPOINT_FILE))?;
    result.map(|_| ())
}

fn output_stem(path: &Path) -> String {
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    name.strip_suffix(KSPACE_SUFFIX)
        .or_else(|| name.strip_suffix(".pmrt"))
        .unwrap_or(&name)
        .to_string()
}

fn cmd_reconstruct(common: &CommonArgs, checkpoint: &Path, input: &Path, mask: Option<&Path>) -> Result<()> {
    let ck = Checkpoint::load(checkpoint)?;
    let inputs: Vec<PathBuf> = if input.is_dir() {
        files_with_suffix(input, KSPACE_SUFFIX)?.into_iter().map(|(_, p)| p).collect()
    } else {
        vec![input.to_path_buf()]
    };
    if inputs.is_empty() {
        return Err(Error::format(input, format!("no *{KSPACE_SUFFIX} files")));
    }
    let mask_path = match mask {
        Some(m) => m.to_path_buf(),
        None => {
            let dir = if input.is_dir() { input } else { input.parent().unwrap_or(Path::new(".")) };
            dir.join(MASK_FILE)
        }
    };
    let mask = load_mask(&mask_path)?;
    create_dir(&common.out)?;
    for path in &inputs {
        let f = load_kspace(path, &mask)?;
        let rec = forward_pass(&f, &ck.state.params)?;
        let stem = output_stem(path);
        save_complex(common.out.join(format!("{stem}{RECON_SUFFIX}")), &rec.coils)?;
        save_complex(common.out.join(format!("{stem}{SINGLE_SUFFIX}")), &rec.single)?;
        write_png(common.out.join(format!("{stem}.sos.png")), &sos(&rec.coils))?;
    }
    eprintln!("reconstructed {} file(s) into {}", inputs.len(), common.out.display());
    Ok(())
}

/// Evaluates matching `*.recon.pmrt` (or, failing that, `*.truth.pmrt`)
/// files against `*.truth.pmrt` files, with `*.single.pmrt` when present
/// for every reconstruction.
pub fn evaluate_dirs(recon_dir: &Path, truth_dir: &Path, peak: Peak) -> Result<MetricReport> {
    let truths = files_with_suffix(truth_dir, TRUTH_SUFFIX)?;
    let mut recons = files_with_suffix(recon_dir, RECON_SUFFIX)?;
    if recons.is_empty() {
        recons = files_with_suffix(recon_dir, TRUTH_SUFFIX)?;
    }
    if recons.len() != truths.len() {
        return Err(Error::shape(format!(
            "{} reconstructions in {} but {} ground truths in {}",
            recons.len(),
            recon_dir.display(),
            truths.len(),
            truth_dir.display()
        )));
    }
    if truths.is_empty() {
        return Err(Error::format(truth_dir, format!("no *{TRUTH_SUFFIX} files")));
    }
    let mut names = Vec::new();
    let mut recon_sos = Vec::new();
    let mut truth_sos = Vec::new();
    let mut singles: Option<Vec<RealImage>> = Some(Vec::new());
    for ((rs, rp), (ts, tp)) in recons.iter().zip(&truths) {
        if rs != ts {
            return Err(Error::format(rp, format!("no reconstruction for ground truth {ts}")));
        }
        recon_sos.push(sos(&load_complex(rp)?));
        truth_sos.push(sos(&load_complex(tp)?));
        let single_path = recon_dir.join(format!("{rs}{SINGLE_SUFFIX}"));
        singles = match (singles, single_path.exists()) {
            (Some(mut v), true) => {
                let x = load_complex(&single_path)?;
                v.push(magnitude(&x).map_err(|e| Error::format(&single_path, e.to_string()))?);
                Some(v)
            }
            _ => None,
        };
        names.push(rs.clone());
    }
    evaluate_magnitudes(names, &recon_sos, singles.as_deref(), &truth_sos, peak)
}

fn cmd_evaluate(common: &CommonArgs, recon: &Path, truth: &Path) -> Result<()> {
    let file = load_config(common, &[TRAIN_KEYS, EXTRA_KEYS, SIM_KEYS])?;
    let peak = match file.get("psnr_peak") {
        Some(p) => Peak::parse(p)?,
        None => Peak::default(),
    };
    let report = evaluate_dirs(recon, truth, peak)?;
    create_dir(&common.out)?;
    write_text(&common.out.join("report.tsv"), &report.to_tsv())?;
    let table = report.to_table();
    write_text(&common.out.join("report.txt"), &table)?;
    print!("{table}");
    Ok(())
}

pub fn run(cli: Cli) -> Result<()> {
    match &cli.command {
        Command::Simulate { common } => cmd_simulate(common),
        Command::Train { common, data, resume } => cmd_train(common, data, resume.as_deref()),
        Command::Reconstruct {
            common,
            checkpoint,
            input,
            mask,
        } => cmd_reconstruct(common, checkpoint, input, mask.as_deref()),
        Command::Evaluate { common, recon, truth } => cmd_evaluate(common, recon, truth),
    }
}
