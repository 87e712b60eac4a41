//! The `wavefuse` command line: `train`, `fuse`, `eval` and `bench`.
//!
//! Exit codes: 0 on success, 1 for usage errors, 2 for runtime failures.

use std::ffi::OsString;
use std::fs::{self, OpenOptions};
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use wavefuse_core::fusion::{FusionRule, FusionRuleConfig};
use wavefuse_core::image::GrayImage;
use wavefuse_core::metrics::{evaluate_all, MetricReport};
use wavefuse_core::network::{
    fuse_images, fuse_images_baseline, train_from, ArchitectureSpec, ModelWeights, TrainConfig,
};
use wavefuse_core::wavelet::{Extension, Wavelet};

use crate::dataset::{find_pairs, harmonize, load_training_set};
use crate::error::{Error, Result};
use crate::imageio::{load_grayscale, save_grayscale};
use crate::model_io::{load_model, save_model};
use crate::report::{
    reports_json, write_bench_csv, write_loss_csv, write_report_csv, BenchRow, ReportRow,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;

/// Upper bound accepted for `--levels`.
const MAX_LEVELS: usize = 6;

#[derive(Debug, Parser)]
#[command(
    name = "wavefuse",
    version,
    about = "Wavelet-domain feature fusion of grayscale images"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train the autoencoder to reconstruct the images in a directory.
    Train(TrainArgs),
    /// Fuse two source images.
    Fuse(FuseArgs),
    /// Score fused images against their sources.
    Eval(EvalArgs),
    /// Sweep decomposition levels, bases and rules over a set of pairs.
    Bench(BenchArgs),
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Directory of training images (PGM or PNG).
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value_t = 100)]
    pub epochs: usize,
    #[arg(long, default_value_t = 16)]
    pub batch: usize,
    #[arg(long, default_value_t = 1e-4)]
    pub lr: f64,
    /// Weight of the SSIM term.
    #[arg(long, default_value_t = 1000.0)]
    pub lambda: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Training images are resized to SIZE x SIZE.
    #[arg(long, default_value_t = 256)]
    pub size: usize,
    /// Stop after this many optimizer steps.
    #[arg(long)]
    pub max_steps: Option<usize>,
    /// Model file; the loss log is written next to it.
    #[arg(long, default_value = "model.wvfs")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ExtensionArg {
    Symmetric,
    Periodization,
}

impl From<ExtensionArg> for Extension {
    fn from(e: ExtensionArg) -> Self {
        match e {
            ExtensionArg::Symmetric => Extension::Symmetric,
            ExtensionArg::Periodization => Extension::Periodization,
        }
    }
}

#[derive(Debug, Args, Clone)]
pub struct RuleArgs {
    /// regional, l1 or combined.
    #[arg(long, default_value = "combined")]
    pub rule: FusionRule,
    #[arg(long, default_value_t = 2)]
    pub levels: usize,
    /// db1, db2, db3 or db4.
    #[arg(long, default_value = "db1")]
    pub wavelet: Wavelet,
    /// Regional-energy window side (odd).
    #[arg(long, default_value_t = 3)]
    pub window: usize,
    #[arg(long, default_value_t = 0.6)]
    pub match_threshold: f64,
    #[arg(long, default_value_t = 1)]
    pub block_radius: usize,
    #[arg(long, value_enum, default_value_t = ExtensionArg::Symmetric)]
    pub extension: ExtensionArg,
}

impl RuleArgs {
    pub fn config(&self) -> FusionRuleConfig {
        FusionRuleConfig {
            rule: self.rule,
            window: self.window,
            match_threshold: self.match_threshold,
            block_radius: self.block_radius,
            levels: self.levels,
            wavelet: self.wavelet,
            extension: self.extension.into(),
            ..FusionRuleConfig::default()
        }
    }
}

#[derive(Debug, Args)]
pub struct FuseArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(short = 'a')]
    pub a: PathBuf,
    #[arg(short = 'b')]
    pub b: PathBuf,
    /// Output image (.pgm or .png).
    #[arg(short = 'o', long = "out")]
    pub out: PathBuf,
    #[command(flatten)]
    pub rule: RuleArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(
        short = 'a',
        required_unless_present = "batch",
        conflicts_with = "batch"
    )]
    pub a: Option<PathBuf>,
    #[arg(
        short = 'b',
        required_unless_present = "batch",
        conflicts_with = "batch"
    )]
    pub b: Option<PathBuf>,
    #[arg(long, required_unless_present = "batch", conflicts_with = "batch")]
    pub fused: Option<PathBuf>,
    /// CSV manifest with columns a,b,fused; relative paths resolve against its directory.
    #[arg(long)]
    pub batch: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    /// Write here instead of stdout; CSV output is appended to an existing file.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Directory of `<name>_a` / `<name>_b` image pairs.
    #[arg(long)]
    pub pairs: PathBuf,
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "1,2")]
    pub levels: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "db1,db2")]
    pub wavelets: Vec<Wavelet>,
    #[arg(long, value_delimiter = ',', default_value = "regional,l1,combined")]
    pub rules: Vec<FusionRule>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Parses `args` (program name first) and runs the command; returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli) {
        Ok(()) => EXIT_OK,
        Err(Error::Usage(msg)) => {
            eprintln!("error: {msg}");
            EXIT_USAGE
        }
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_RUNTIME
        }
    }
}

pub fn execute(cli: Cli) -> Result<()> {
    let pool = thread_pool()?;
    pool.install(|| match cli.command {
        Command::Train(a) => cmd_train(&a),
        Command::Fuse(a) => cmd_fuse(&a),
        Command::Eval(a) => cmd_eval(&a),
        Command::Bench(a) => cmd_bench(&a),
    })
}

/// Worker pool capped by `WAVEFUSE_THREADS` when set.
fn thread_pool() -> Result<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var("WAVEFUSE_THREADS") {
        let n: usize = v.trim().parse().ok().filter(|&n| n > 0).ok_or_else(|| {
            Error::Usage(format!(
                "WAVEFUSE_THREADS must be a positive integer, got '{v}'"
            ))
        })?;
        b = b.num_threads(n);
    }
    b.build()
        .map_err(|e| Error::Runtime(format!("cannot start worker threads: {e}")))
}

fn warn(msg: impl AsRef<str>) {
    eprintln!("warning: {}", msg.as_ref());
}

fn usage_from_core(e: wavefuse_core::Error) -> Error {
    Error::Usage(e.to_string())
}

fn check_rule_config(cfg: &FusionRuleConfig) -> Result<()> {
    cfg.validate().map_err(usage_from_core)?;
    if cfg.levels > MAX_LEVELS {
        return Err(Error::Usage(format!(
            "--levels must be between 1 and {MAX_LEVELS}, got {}",
            cfg.levels
        )));
    }
    Ok(())
}

/// Path of the per-epoch loss log belonging to a model file.
pub fn loss_csv_path(model: &Path) -> PathBuf {
    model.with_extension("loss.csv")
}

pub fn train_config(a: &TrainArgs) -> TrainConfig {
    TrainConfig {
        learning_rate: a.lr,
        batch_size: a.batch,
        epochs: a.epochs,
        lambda_ssim: a.lambda,
        seed: a.seed,
        image_size: a.size,
        max_steps: a.max_steps,
    }
}

pub fn cmd_train(a: &TrainArgs) -> Result<()> {
    let cfg = train_config(a);
    cfg.validate().map_err(usage_from_core)?;
    if a.max_steps == Some(0) {
        return Err(Error::Usage("--max-steps must be at least 1".into()));
    }
    let images = load_training_set(&a.data, cfg.image_size)?;
    eprintln!(
        "training on {} images of {}x{}",
        images.len(),
        cfg.image_size,
        cfg.image_size
    );
    let tensors: Vec<_> = images.iter().map(GrayImage::to_tensor).collect();
    let weights = ModelWeights::init(ArchitectureSpec::default(), cfg.seed)?;
    let outcome = train_from(weights, &tensors, &cfg, |r| {
        eprintln!(
            "epoch {:>4}  loss {:.6}  pixel {:.6}  ssim {:.6}",
            r.epoch, r.loss.total, r.loss.pixel, r.loss.ssim_loss
        );
    })?;
    save_model(&outcome.weights, &a.out)?;
    let log = loss_csv_path(&a.out);
    let file = fs::File::create(&log).map_err(|e| Error::io(&log, e))?;
    write_loss_csv(file, &outcome.history)?;
    eprintln!("wrote {} and {}", a.out.display(), log.display());
    Ok(())
}

fn load_pair(a: &Path, b: &Path) -> Result<(GrayImage, GrayImage)> {
    let (ia, ib) = (load_grayscale(a)?, load_grayscale(b)?);
    let (dims_a, dims_b) = ((ia.width(), ia.height()), (ib.width(), ib.height()));
    let (ia, ib, resized) = harmonize(ia, ib)?;
    if resized {
        warn(format!(
            "{} is {}x{} and {} is {}x{}; both resized to {}x{}",
            a.display(),
            dims_a.0,
            dims_a.1,
            b.display(),
            dims_b.0,
            dims_b.1,
            ia.width(),
            ia.height()
        ));
    }
    Ok((ia, ib))
}

pub fn cmd_fuse(a: &FuseArgs) -> Result<()> {
    let cfg = a.rule.config();
    check_rule_config(&cfg)?;
    let weights = load_model(&a.model)?;
    let (ia, ib) = load_pair(&a.a, &a.b)?;
    let fused = fuse_images(&ia, &ib, &weights, &cfg)?;
    save_grayscale(&fused, &a.out)
}

fn evaluate_files(a: &Path, b: &Path, fused: &Path) -> Result<ReportRow> {
    let (ia, ib, f) = (
        load_grayscale(a)?,
        load_grayscale(b)?,
        load_grayscale(fused)?,
    );
    let report = evaluate_all(&ia, &ib, &f)?;
    Ok(ReportRow {
        a: a.display().to_string(),
        b: b.display().to_string(),
        fused: fused.display().to_string(),
        report,
    })
}

/// Reads `a,b,fused` triples; a header row naming those columns is optional.
/// Malformed rows are reported as `Err(reason)` in file order.
pub fn read_manifest(path: &Path) -> Result<Vec<std::result::Result<[PathBuf; 3], String>>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let base = path.parent().unwrap_or(Path::new(""));
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 1;
        let rec = match rec {
            Ok(r) => r,
            Err(e) => {
                rows.push(Err(format!("line {line}: {e}")));
                continue;
            }
        };
        if i == 0
            && rec
                .iter()
                .map(str::to_ascii_lowercase)
                .eq(["a", "b", "fused"])
        {
            continue;
        }
        if rec.iter().all(str::is_empty) {
            continue;
        }
        if rec.len() != 3 || rec.iter().any(str::is_empty) {
            rows.push(Err(format!(
                "line {line}: expected 3 non-empty fields, got {}",
                rec.len()
            )));
            continue;
        }
        rows.push(Ok([0, 1, 2].map(|k| base.join(&rec[k]))));
    }
    Ok(rows)
}

fn open_output(path: &Path, append: bool) -> Result<fs::File> {
    OpenOptions::new()
        .create(true)
        .write(true)
        .append(append)
        .truncate(!append)
        .open(path)
        .map_err(|e| Error::io(path, e))
}

fn emit_reports(rows: &[ReportRow], format: Format, out: Option<&Path>) -> Result<()> {
    match (format, out) {
        (Format::Csv, None) => write_report_csv(io::stdout().lock(), rows, true),
        (Format::Csv, Some(p)) => {
            let fresh = fs::metadata(p).map(|m| m.len() == 0).unwrap_or(true);
            write_report_csv(open_output(p, true)?, rows, fresh)
        }
        (Format::Json, out) => {
            let text =
                serde_json::to_string_pretty(&reports_json(rows)).expect("reports serialize");
            match out {
                None => {
                    println!("{text}");
                    Ok(())
                }
                Some(p) => fs::write(p, text + "\n").map_err(|e| Error::io(p, e)),
            }
        }
    }
}

pub fn cmd_eval(a: &EvalArgs) -> Result<()> {
    let rows = if let Some(manifest) = &a.batch {
        let entries = read_manifest(manifest)?;
        let results: Vec<std::result::Result<ReportRow, String>> = entries
            .into_par_iter()
            .map(|entry| {
                let [pa, pb, pf] = entry?;
                evaluate_files(&pa, &pb, &pf).map_err(|e| e.to_string())
            })
            .collect();
        let mut rows = Vec::new();
        for r in results {
            match r {
                Ok(row) => rows.push(row),
                Err(msg) => warn(format!("skipping manifest row: {msg}")),
            }
        }
        if rows.is_empty() {
            return Err(Error::Runtime(format!(
                "no valid rows in {}",
                manifest.display()
            )));
        }
        rows
    } else {
        let (Some(pa), Some(pb), Some(pf)) = (&a.a, &a.b, &a.fused) else {
            return Err(Error::Usage(
                "-a, -b and --fused are required without --batch".into(),
            ));
        };
        vec![evaluate_files(pa, pb, pf)?]
    };
    emit_reports(&rows, a.format, a.out.as_deref())
}

/// 8-bit round trip, matching what `eval` sees after the image is saved.
fn as_saved(img: &GrayImage) -> GrayImage {
    GrayImage::from_u8(img.width(), img.height(), &img.to_u8()).expect("dims unchanged")
}

/// One bench configuration; `None` is the feature-averaging baseline.
fn fuse_for_bench(
    a: &GrayImage,
    b: &GrayImage,
    w: &ModelWeights,
    cfg: Option<&FusionRuleConfig>,
) -> Result<GrayImage> {
    Ok(match cfg {
        Some(c) => fuse_images(a, b, w, c)?,
        None => fuse_images_baseline(a, b, w)?,
    })
}

pub fn cmd_bench(a: &BenchArgs) -> Result<()> {
    let mut grid: Vec<FusionRuleConfig> = Vec::new();
    for &levels in &a.levels {
        for &wavelet in &a.wavelets {
            for &rule in &a.rules {
                let cfg = FusionRuleConfig {
                    rule,
                    levels,
                    wavelet,
                    ..FusionRuleConfig::default()
                };
                check_rule_config(&cfg)?;
                grid.push(cfg);
            }
        }
    }
    let weights = load_model(&a.model)?;
    let pairs = find_pairs(&a.pairs)?;
    if pairs.is_empty() {
        return Err(Error::Runtime(format!(
            "no <name>_a / <name>_b pairs found in {}",
            a.pairs.display()
        )));
    }
    let sources = pairs
        .par_iter()
        .map(|p| load_pair(&p.a, &p.b))
        .collect::<Result<Vec<_>>>()?;
    let configs: Vec<Option<&FusionRuleConfig>> =
        std::iter::once(None).chain(grid.iter().map(Some)).collect();
    let mut rows = Vec::with_capacity(configs.len());
    for cfg in configs {
        let reports = sources
            .par_iter()
            .map(|(ia, ib)| {
                let fused = as_saved(&fuse_for_bench(ia, ib, &weights, cfg)?);
                Ok(evaluate_all(ia, ib, &fused)?)
            })
            .collect::<Result<Vec<MetricReport>>>()?;
        let report = MetricReport::mean(&reports).expect("pair set is non-empty");
        rows.push(match cfg {
            None => BenchRow {
                config: "none".into(),
                levels: None,
                wavelet: None,
                rule: "mean-features".into(),
                pairs: reports.len(),
                report,
            },
            Some(c) => BenchRow {
                config: format!("L{}-{}-{}", c.levels, c.wavelet, c.rule),
                levels: Some(c.levels),
                wavelet: Some(c.wavelet.to_string()),
                rule: c.rule.to_string(),
                pairs: reports.len(),
                report,
            },
        });
    }
    match &a.out {
        None => write_bench_csv(io::stdout().lock(), &rows),
        Some(p) => {
            let mut f = open_output(p, false)?;
            write_bench_csv(&mut f, &rows)?;
            f.flush().map_err(|e| Error::io(p, e))
        }
    }
}
