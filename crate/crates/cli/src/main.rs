//! Command-line interface for the restega steganography pipeline:
//! train / embed / extract / evaluate / baseline / analyze.
//!
//! Exit codes: 0 success, 1 configuration or usage error, 2 data error,
//! 3 numerical failure during training.

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use restega_core::checkpoint::Checkpoint;
use restega_core::error::Error;
use restega_core::image_io::{Image8, ImageTensor};
use restega_core::lsb::{LsbCodec, LsbConfig};
use restega_core::metrics::{evaluate, quantize};
use restega_core::models::StegoSystem;
use restega_core::steganalysis::{emit_analysis, StegoRecord};
use restega_core::training::{export_loss_curve, load_dataset, train, TrainConfig};
use std::path::{Path, PathBuf};

const EXIT_CONFIG: i32 = 1;
const EXIT_DATA: i32 = 2;
const EXIT_NUMERICAL: i32 = 3;

/// Environment variable overriding the checkpoint directory for `train`.
const CHECKPOINT_DIR_ENV: &str = "RESTEGA_CHECKPOINT_DIR";

#[derive(Parser)]
#[command(
    name = "restega",
    about = "Hide a full-size color image inside another with a trained \
             encoder/decoder pair, and evaluate the result",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a stego system on a directory of images
    Train(TrainArgs),
    /// Hide a secret image inside a cover image
    Embed(EmbedArgs),
    /// Recover the hidden image from a stego image
    Extract(ExtractArgs),
    /// Compute PSNR/SSIM/capacity metrics over dataset pairs
    Evaluate(EvaluateArgs),
    /// Run the k-bit LSB baseline over dataset pairs
    Baseline(BaselineArgs),
    /// Emit histogram and difference analyses for one cover/secret pair
    Analyze(AnalyzeArgs),
}

#[derive(Args)]
struct TrainArgs {
    /// Directory of training images (PNG/JPEG)
    #[arg(long = "data")]
    data: Option<PathBuf>,
    /// Config file of key=value lines; flags override file values
    #[arg(long)]
    config: Option<PathBuf>,
    /// Square image size, multiple of 8
    #[arg(long)]
    size: Option<usize>,
    /// Loss weight between stego and extraction quality, in [0, 1]
    #[arg(long)]
    alpha: Option<f64>,
    /// Adam learning rate
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    batch: Option<usize>,
    #[arg(long)]
    epochs: Option<u32>,
    /// Master seed for init, pairing, and shuffling
    #[arg(long)]
    seed: Option<u64>,
    /// Use at most this many images from the dataset directory
    #[arg(long)]
    limit: Option<usize>,
    /// Where the checkpoint and loss curve land
    #[arg(long = "ckpt-dir")]
    ckpt_dir: Option<PathBuf>,
    /// Also write a checkpoint every N epochs
    #[arg(long = "ckpt-every")]
    ckpt_every: Option<u32>,
}

#[derive(Args)]
struct EmbedArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    cover: PathBuf,
    #[arg(long)]
    secret: PathBuf,
    /// Output stego PNG
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ExtractArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    stego: PathBuf,
    /// Output extracted-secret PNG
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    /// Directory of evaluation images, paired like training data
    #[arg(long = "data")]
    data: PathBuf,
    /// Number of pairs to evaluate (default: all)
    #[arg(long)]
    n: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output CSV path
    #[arg(long, default_value = "metrics.csv")]
    out: PathBuf,
}

#[derive(Args)]
struct BaselineArgs {
    /// Bits substituted per sample, 1-8
    #[arg(long)]
    k: u8,
    #[arg(long = "data")]
    data: PathBuf,
    #[arg(long)]
    n: Option<usize>,
    /// Square image size the dataset is resized to
    #[arg(long, default_value_t = 64)]
    size: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "baseline.csv")]
    out: PathBuf,
}

#[derive(Args)]
struct AnalyzeArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    cover: PathBuf,
    #[arg(long)]
    secret: PathBuf,
    /// Directory for the histogram CSVs, difference PNGs, and summary
    #[arg(long = "out-dir")]
    out_dir: PathBuf,
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();

    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // --help / --version exit 0; usage errors exit 1.
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => EXIT_CONFIG,
            };
            let _ = e.print();
            std::process::exit(code);
        }
    };

    let result = match cli.command {
        Command::Train(args) => cmd_train(args),
        Command::Embed(args) => cmd_embed(args),
        Command::Extract(args) => cmd_extract(args),
        Command::Evaluate(args) => cmd_evaluate(args),
        Command::Baseline(args) => cmd_baseline(args),
        Command::Analyze(args) => cmd_analyze(args),
    };

    match result {
        Ok(()) => {}
        Err(e) => {
            log::error!("{e}");
            std::process::exit(exit_code(&e));
        }
    }
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::InvalidArg(_) => EXIT_CONFIG,
        Error::CheckpointVersion { .. }
        | Error::CheckpointIntegrity(_)
        | Error::CheckpointArch(_) => EXIT_CONFIG,
        Error::Dataset(_) | Error::Shape { .. } | Error::Io(_) | Error::Image(_) => EXIT_DATA,
        Error::Numerical(_) => EXIT_NUMERICAL,
    }
}

/// Resolution order: defaults, then config file, then the environment
/// checkpoint-dir override, then explicit flags.
fn resolve_train_config(args: &TrainArgs) -> Result<TrainConfig, Error> {
    let mut config = TrainConfig::default();
    if let Some(path) = &args.config {
        let text = std::fs::read_to_string(path).map_err(|e| {
            Error::InvalidArg(format!("cannot read config {}: {e}", path.display()))
        })?;
        config.apply_config_text(&text)?;
    }
    if let Ok(dir) = std::env::var(CHECKPOINT_DIR_ENV) {
        config.checkpoint_dir = PathBuf::from(dir);
    }
    if let Some(v) = &args.data {
        config.dataset_dir = v.clone();
    }
    if let Some(v) = args.size {
        config.image_size = v;
    }
    if let Some(v) = args.alpha {
        config.alpha = v;
    }
    if let Some(v) = args.lr {
        config.learning_rate = v;
    }
    if let Some(v) = args.batch {
        config.batch_size = v;
    }
    if let Some(v) = args.epochs {
        config.epochs = v;
    }
    if let Some(v) = args.seed {
        config.seed = v;
    }
    if let Some(v) = args.limit {
        config.limit = Some(v);
    }
    if let Some(v) = &args.ckpt_dir {
        config.checkpoint_dir = v.clone();
    }
    if let Some(v) = args.ckpt_every {
        config.checkpoint_every = v;
    }
    if config.dataset_dir.as_os_str().is_empty() {
        return Err(Error::InvalidArg(
            "no dataset directory: pass --data or set dataset_dir in the config file".into(),
        ));
    }
    config.validate()?;
    Ok(config)
}

fn log_config(config: &TrainConfig) {
    log::info!(
        "resolved config: image_size={} alpha={} learning_rate={} batch_size={} epochs={} \
         seed={} dataset_dir={} checkpoint_dir={} checkpoint_every={} limit={:?}",
        config.image_size,
        config.alpha,
        config.learning_rate,
        config.batch_size,
        config.epochs,
        config.seed,
        config.dataset_dir.display(),
        config.checkpoint_dir.display(),
        config.checkpoint_every,
        config.limit
    );
}

fn cmd_train(args: TrainArgs) -> Result<(), Error> {
    let config = resolve_train_config(&args)?;
    log_config(&config);
    let dataset =
        load_dataset::<f32>(&config.dataset_dir, config.image_size, config.limit, config.seed)?;
    log::info!("dataset: {} cover/secret pairs", dataset.pair_count());
    let outcome = train(&config, &dataset)?;
    let loss_path = config.checkpoint_dir.join("loss.csv");
    export_loss_curve(&outcome.log, &loss_path)?;
    log::info!(
        "wrote {} and {}",
        outcome.checkpoint_path.display(),
        loss_path.display()
    );
    Ok(())
}

fn load_system(path: &Path) -> Result<(StegoSystem<f32>, usize), Error> {
    let ckpt = Checkpoint::load(path)?;
    let size = ckpt.architecture().image_size;
    Ok((ckpt.instantiate::<f32>()?, size))
}

/// Load an image and check it against the checkpoint's trained size.
fn load_image_for(path: &Path, expected: usize, role: &str) -> Result<ImageTensor<f32>, Error> {
    let img = Image8::load(path)?;
    if img.height() % 8 != 0 || img.width() % 8 != 0 {
        return Err(Error::shape(
            "input image",
            format!(
                "{role} {} is {}x{}; dimensions must be divisible by 8 - resize it first",
                path.display(),
                img.height(),
                img.width()
            ),
        ));
    }
    if img.height() != expected || img.width() != expected {
        return Err(Error::shape(
            "input image",
            format!(
                "{role} {} is {}x{}, but the checkpoint was trained at {expected}x{expected}; \
                 resize it to match",
                path.display(),
                img.height(),
                img.width()
            ),
        ));
    }
    Ok(img.to_float())
}

fn cmd_embed(args: EmbedArgs) -> Result<(), Error> {
    let (system, size) = load_system(&args.checkpoint)?;
    log::info!(
        "embed: checkpoint={} cover={} secret={} out={}",
        args.checkpoint.display(),
        args.cover.display(),
        args.secret.display(),
        args.out.display()
    );
    let cover = load_image_for(&args.cover, size, "cover")?;
    let secret = load_image_for(&args.secret, size, "secret")?;
    let stego = system.embed_images(&cover, &secret)?;
    quantize(&stego).save_png(&args.out)?;
    log::info!("wrote {}", args.out.display());
    Ok(())
}

fn cmd_extract(args: ExtractArgs) -> Result<(), Error> {
    let (system, size) = load_system(&args.checkpoint)?;
    log::info!(
        "extract: checkpoint={} stego={} out={}",
        args.checkpoint.display(),
        args.stego.display(),
        args.out.display()
    );
    let stego = load_image_for(&args.stego, size, "stego")?;
    let extracted = system.extract_images(&stego)?;
    quantize(&extracted).save_png(&args.out)?;
    log::info!("wrote {}", args.out.display());
    Ok(())
}

fn resolve_pairs(n: Option<usize>, available: usize) -> Result<usize, Error> {
    let n = n.unwrap_or(available);
    if n == 0 || n > available {
        return Err(Error::InvalidArg(format!(
            "requested {n} pairs but the dataset provides {available}"
        )));
    }
    Ok(n)
}

fn cmd_evaluate(args: EvaluateArgs) -> Result<(), Error> {
    let (system, size) = load_system(&args.checkpoint)?;
    log::info!(
        "evaluate: checkpoint={} data={} size={size} seed={}",
        args.checkpoint.display(),
        args.data.display(),
        args.seed
    );
    let dataset = load_dataset::<f32>(&args.data, size, None, args.seed)?;
    let n = resolve_pairs(args.n, dataset.pair_count())?;
    let pairs: Vec<_> = dataset.covers.into_iter().zip(dataset.secrets).collect();
    let report = evaluate(&system, &pairs, n)?;
    report.write_csv(&args.out)?;
    log::info!(
        "evaluated {n} pairs: mean PSNR(cover,stego) {:.2} dB, mean SSIM {:.4} -> {}",
        report.mean(|r| r.psnr_cover_stego),
        report.mean(|r| r.ssim_cover_stego),
        args.out.display()
    );
    Ok(())
}

fn cmd_baseline(args: BaselineArgs) -> Result<(), Error> {
    let config = LsbConfig::new(args.k)?;
    if args.size == 0 || !args.size.is_multiple_of(8) {
        return Err(Error::InvalidArg(format!(
            "--size must be a positive multiple of 8, got {}",
            args.size
        )));
    }
    log::info!(
        "baseline: k={} data={} size={} seed={}",
        args.k,
        args.data.display(),
        args.size,
        args.seed
    );
    let dataset = load_dataset::<f32>(&args.data, args.size, None, args.seed)?;
    let n = resolve_pairs(args.n, dataset.pair_count())?;
    let pairs: Vec<_> = dataset.covers.into_iter().zip(dataset.secrets).collect();
    let codec = LsbCodec { config };
    let report = evaluate(&codec, &pairs, n)?;
    report.write_csv(&args.out)?;
    log::info!(
        "k={} LSB over {n} pairs: mean PSNR(cover,stego) {:.2} dB -> {}",
        args.k,
        report.mean(|r| r.psnr_cover_stego),
        args.out.display()
    );
    Ok(())
}

fn cmd_analyze(args: AnalyzeArgs) -> Result<(), Error> {
    let (system, size) = load_system(&args.checkpoint)?;
    log::info!(
        "analyze: checkpoint={} cover={} secret={} out_dir={}",
        args.checkpoint.display(),
        args.cover.display(),
        args.secret.display(),
        args.out_dir.display()
    );
    let cover = load_image_for(&args.cover, size, "cover")?;
    let secret = load_image_for(&args.secret, size, "secret")?;
    let stego = system.embed_images(&cover, &secret)?;
    let extracted = system.extract_images(&stego)?;
    let record = StegoRecord {
        cover: quantize(&cover),
        secret: quantize(&secret),
        stego: quantize(&stego),
        extracted: quantize(&extracted),
    };
    let files = emit_analysis(&record, &args.out_dir)?;
    for f in files {
        log::info!("wrote {}", f.display());
    }
    Ok(())
}
