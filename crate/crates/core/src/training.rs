//! Dataset ingestion, the end-to-end training loop, loss logging, and
//! checkpoint persistence policy.

use crate::autodiff::Tape;
use crate::checkpoint::{snapshot, Checkpoint};
use crate::error::{Error, Result};
use crate::image_io::{resize_bilinear, stack_batch, Image8, ImageTensor};
use crate::models::{check_alpha, StegoSystem};
use crate::optim::AdamState;
use crate::param::ParamModule;
use crate::scalar::Scalar;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use std::time::Instant;

/// Training hyperparameters and paths. The defaults are desk-scale
/// (64x64 images, small batches); the full-scale recipe (256x256,
/// batch 100, 2000 epochs) uses the same knobs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub image_size: usize,
    pub alpha: f64,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: u32,
    pub seed: u64,
    pub dataset_dir: PathBuf,
    pub checkpoint_dir: PathBuf,
    /// Also write a checkpoint every this many epochs.
    pub checkpoint_every: u32,
    /// Cap on the number of images read from the dataset directory.
    pub limit: Option<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            image_size: 64,
            alpha: 0.5,
            learning_rate: 0.001,
            batch_size: 10,
            epochs: 50,
            seed: 0,
            dataset_dir: PathBuf::new(),
            checkpoint_dir: PathBuf::from("."),
            checkpoint_every: 10,
            limit: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.image_size == 0 || !self.image_size.is_multiple_of(8) {
            return Err(Error::InvalidArg(format!(
                "image_size must be a positive multiple of 8, got {}",
                self.image_size
            )));
        }
        check_alpha(self.alpha)?;
        if self.learning_rate.is_nan() || self.learning_rate <= 0.0 {
            return Err(Error::InvalidArg(format!(
                "learning_rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidArg("batch_size must be >= 1".into()));
        }
        if self.checkpoint_every == 0 {
            return Err(Error::InvalidArg("checkpoint_every must be >= 1".into()));
        }
        Ok(())
    }

    /// Apply one `key=value` setting (config file syntax).
    pub fn apply_kv(&mut self, key: &str, value: &str) -> Result<()> {
        fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
            value
                .parse()
                .map_err(|_| Error::InvalidArg(format!("bad value for {key}: {value}")))
        }
        match key {
            "image_size" => self.image_size = parse(key, value)?,
            "alpha" => self.alpha = parse(key, value)?,
            "learning_rate" => self.learning_rate = parse(key, value)?,
            "batch_size" => self.batch_size = parse(key, value)?,
            "epochs" => self.epochs = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "dataset_dir" => self.dataset_dir = PathBuf::from(value),
            "checkpoint_dir" => self.checkpoint_dir = PathBuf::from(value),
            "checkpoint_every" => self.checkpoint_every = parse(key, value)?,
            "limit" => self.limit = Some(parse(key, value)?),
            other => {
                return Err(Error::InvalidArg(format!("unknown config key: {other}")));
            }
        }
        Ok(())
    }

    /// Parse `key=value` lines; `#` starts a comment, blank lines are
    /// skipped.
    pub fn apply_config_text(&mut self, text: &str) -> Result<()> {
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::InvalidArg(format!("config line {}: expected key=value", lineno + 1))
            })?;
            self.apply_kv(key.trim(), value.trim())?;
        }
        Ok(())
    }
}

/// Cover/secret pairs cut from one image set: after a seeded shuffle the
/// first half become covers and the second half secrets, so the two
/// sets are disjoint by construction.
pub struct PairedDataset<T> {
    pub covers: Vec<ImageTensor<T>>,
    pub secrets: Vec<ImageTensor<T>>,
    /// Source files in the shuffled order backing covers ++ secrets.
    pub source_files: Vec<PathBuf>,
    pub seed: u64,
}

impl<T> PairedDataset<T> {
    pub fn pair_count(&self) -> usize {
        self.covers.len()
    }
}

/// Decode, resize and pair every usable image under `dir`.
/// Files are taken in sorted name order, undecodable ones are skipped
/// with a warning, and an odd count drops the last image.
pub fn load_dataset<T: Scalar>(
    dir: &Path,
    image_size: usize,
    limit: Option<usize>,
    seed: u64,
) -> Result<PairedDataset<T>> {
    if image_size == 0 || !image_size.is_multiple_of(8) {
        return Err(Error::InvalidArg(format!(
            "image_size must be a positive multiple of 8, got {image_size}"
        )));
    }
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| Error::Dataset(format!("cannot read {}: {e}", dir.display())))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| {
            matches!(
                p.extension().and_then(|e| e.to_str()).map(str::to_lowercase),
                Some(ref ext) if ext == "png" || ext == "jpg" || ext == "jpeg"
            )
        })
        .collect();
    files.sort();
    if let Some(limit) = limit {
        files.truncate(limit);
    }

    let decoded: Vec<(PathBuf, Option<ImageTensor<T>>)> = files
        .par_iter()
        .map(|path| {
            let img = match Image8::load(path) {
                Ok(img) => {
                    let float: ImageTensor<T> = img.to_float();
                    Some(resize_bilinear(&float, image_size, image_size))
                }
                Err(e) => {
                    log::warn!("skipping {}: {e}", path.display());
                    None
                }
            };
            (path.clone(), img)
        })
        .collect();

    let mut usable: Vec<(PathBuf, ImageTensor<T>)> = decoded
        .into_iter()
        .filter_map(|(p, img)| img.map(|i| (p, i)))
        .collect();
    if usable.len() < 2 {
        return Err(Error::Dataset(format!(
            "need at least 2 decodable images in {}, found {}",
            dir.display(),
            usable.len()
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    usable.shuffle(&mut rng);
    // Drop the odd one out, then split half/half.
    if usable.len() % 2 == 1 {
        usable.pop();
    }
    let half = usable.len() / 2;
    let source_files = usable.iter().map(|(p, _)| p.clone()).collect();
    let mut images: Vec<ImageTensor<T>> = usable.into_iter().map(|(_, i)| i).collect();
    let secrets = images.split_off(half);
    Ok(PairedDataset {
        covers: images,
        secrets,
        source_files,
        seed,
    })
}

/// Per-epoch training record.
#[derive(Clone, Debug, PartialEq)]
pub struct EpochRecord {
    pub epoch: u32,
    pub mean_loss: f64,
    pub mean_mse_cover_stego: f64,
    pub mean_mse_secret_extracted: f64,
    pub wall_seconds: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct LossLog {
    pub records: Vec<EpochRecord>,
}

pub const LOSS_CSV_HEADER: &str = "epoch,mean_loss,mse_cover_stego,mse_secret_extracted,wall_seconds";

impl LossLog {
    /// The reproducible columns: everything except wall-clock timing.
    /// `(seed, config, dataset)` fully determine this view.
    pub fn deterministic_view(&self) -> Vec<(u32, f64, f64, f64)> {
        self.records
            .iter()
            .map(|r| {
                (
                    r.epoch,
                    r.mean_loss,
                    r.mean_mse_cover_stego,
                    r.mean_mse_secret_extracted,
                )
            })
            .collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(LOSS_CSV_HEADER);
        out.push('\n');
        for r in &self.records {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                r.epoch,
                r.mean_loss,
                r.mean_mse_cover_stego,
                r.mean_mse_secret_extracted,
                r.wall_seconds
            ));
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }

    pub fn parse_csv(text: &str) -> Result<LossLog> {
        let mut lines = text.lines();
        match lines.next() {
            Some(h) if h == LOSS_CSV_HEADER => {}
            other => {
                return Err(Error::InvalidArg(format!(
                    "bad loss CSV header: {other:?}"
                )))
            }
        }
        let mut records = Vec::new();
        for line in lines {
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 5 {
                return Err(Error::InvalidArg(format!("bad loss CSV row: {line}")));
            }
            let num = |i: usize| -> Result<f64> {
                fields[i]
                    .parse()
                    .map_err(|_| Error::InvalidArg(format!("bad number in row: {line}")))
            };
            records.push(EpochRecord {
                epoch: fields[0]
                    .parse()
                    .map_err(|_| Error::InvalidArg(format!("bad epoch in row: {line}")))?,
                mean_loss: num(1)?,
                mean_mse_cover_stego: num(2)?,
                mean_mse_secret_extracted: num(3)?,
                wall_seconds: num(4)?,
            });
        }
        Ok(LossLog { records })
    }
}

/// Export the loss curve (header plus one row per epoch).
pub fn export_loss_curve(log: &LossLog, path: &Path) -> Result<()> {
    log.write_csv(path)
}

/// Training metadata stored in checkpoints.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainingMeta {
    pub config: TrainConfig,
    pub epochs_completed: u32,
    pub final_mean_loss: Option<f64>,
}

/// Outcome of [`train`]: the trained system, its loss log, and the path
/// of the final checkpoint.
pub struct TrainOutcome<T> {
    pub system: StegoSystem<T>,
    pub log: LossLog,
    pub checkpoint: Checkpoint,
    pub checkpoint_path: PathBuf,
}

/// End-to-end training: per batch, embed, extract, form the weighted
/// loss, backpropagate, and step Adam over all four sub-models jointly.
///
/// Per epoch the pair order is reshuffled (seeded); the last partial
/// batch is dropped. A checkpoint lands in `checkpoint_dir` every
/// `checkpoint_every` epochs and at the end. A non-finite loss aborts
/// with the epoch, batch, and parameter norms in the error.
pub fn train<T: Scalar>(config: &TrainConfig, dataset: &PairedDataset<T>) -> Result<TrainOutcome<T>> {
    config.validate()?;
    let pairs = dataset.pair_count();
    if pairs == 0 {
        return Err(Error::Dataset("dataset has no pairs".into()));
    }
    if config.batch_size > pairs {
        return Err(Error::InvalidArg(format!(
            "batch_size {} exceeds the {} available pairs",
            config.batch_size, pairs
        )));
    }
    for img in dataset.covers.iter().chain(&dataset.secrets) {
        if img.height() != config.image_size || img.width() != config.image_size {
            return Err(Error::shape(
                "train",
                format!(
                    "dataset image is {}x{}, config expects {}",
                    img.height(),
                    img.width(),
                    config.image_size
                ),
            ));
        }
    }
    std::fs::create_dir_all(&config.checkpoint_dir)?;

    let mut system = StegoSystem::<T>::new(config.alpha, config.seed)?;
    let mut adam = AdamState::new(T::from_f64_lossy(config.learning_rate));
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(config.seed);
    shuffle_rng.set_stream(2);
    let mut log = LossLog::default();

    for epoch in 1..=config.epochs {
        let started = Instant::now();
        let mut order: Vec<usize> = (0..pairs).collect();
        order.shuffle(&mut shuffle_rng);

        let mut sum_loss = 0.0;
        let mut sum_mse_cs = 0.0;
        let mut sum_mse_se = 0.0;
        let mut batches = 0u32;

        for (batch_idx, chunk) in order.chunks_exact(config.batch_size).enumerate() {
            let covers: Vec<&ImageTensor<T>> = chunk.iter().map(|&i| &dataset.covers[i]).collect();
            let secrets: Vec<&ImageTensor<T>> =
                chunk.iter().map(|&i| &dataset.secrets[i]).collect();
            let cover_batch = stack_batch(&covers)?;
            let secret_batch = stack_batch(&secrets)?;

            let mut tape = Tape::new();
            let nodes = system.training_step_nodes(&mut tape, cover_batch, secret_batch)?;
            let loss = tape.value(nodes.loss).item()?.to_f64_lossy();
            if !loss.is_finite() {
                return Err(Error::Numerical(format!(
                    "loss became {loss} at epoch {epoch}, batch {batch_idx}; {}",
                    param_norm_summary(&system)
                )));
            }
            sum_loss += loss;
            sum_mse_cs += tape.value(nodes.mse_cover_stego).item()?.to_f64_lossy();
            sum_mse_se += tape.value(nodes.mse_secret_extracted).item()?.to_f64_lossy();
            batches += 1;

            tape.backward(nodes.loss)?;
            system.zero_grads();
            system.accumulate_grads(tape.param_grads())?;
            adam.step(&mut system)?;
        }

        if batches == 0 {
            return Err(Error::InvalidArg(format!(
                "batch_size {} leaves no full batch over {} pairs",
                config.batch_size, pairs
            )));
        }
        let record = EpochRecord {
            epoch,
            mean_loss: sum_loss / batches as f64,
            mean_mse_cover_stego: sum_mse_cs / batches as f64,
            mean_mse_secret_extracted: sum_mse_se / batches as f64,
            wall_seconds: (started.elapsed().as_secs_f64() * 1000.0).round() / 1000.0,
        };
        log::info!(
            "epoch {}/{}: loss {:.6} (cover/stego {:.6}, secret/extracted {:.6}) in {:.3}s",
            record.epoch,
            config.epochs,
            record.mean_loss,
            record.mean_mse_cover_stego,
            record.mean_mse_secret_extracted,
            record.wall_seconds
        );
        log.records.push(record);

        if epoch % config.checkpoint_every == 0 && epoch != config.epochs {
            let meta = TrainingMeta {
                config: config.clone(),
                epochs_completed: epoch,
                final_mean_loss: log.records.last().map(|r| r.mean_loss),
            };
            snapshot(&system, meta).save(&config.checkpoint_dir.join(format!(
                "checkpoint_epoch{epoch:04}.bin"
            )))?;
        }
    }

    let meta = TrainingMeta {
        config: config.clone(),
        epochs_completed: config.epochs,
        final_mean_loss: log.records.last().map(|r| r.mean_loss),
    };
    let checkpoint = snapshot(&system, meta);
    let checkpoint_path = config.checkpoint_dir.join("checkpoint.bin");
    checkpoint.save(&checkpoint_path)?;

    Ok(TrainOutcome {
        system,
        log,
        checkpoint,
        checkpoint_path,
    })
}

fn param_norm_summary<T: Scalar>(system: &StegoSystem<T>) -> String {
    let mut total = 0.0f64;
    let mut worst_name = String::new();
    let mut worst = -1.0f64;
    system.visit_params(&mut |p| {
        let sq = p.value.sq_norm();
        total += sq;
        if sq > worst {
            worst = sq;
            worst_name = p.name.clone();
        }
    });
    format!(
        "total parameter norm {:.4e}, largest {} ({:.4e})",
        total.sqrt(),
        worst_name,
        worst.max(0.0).sqrt()
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_test_images(dir: &Path, count: usize, size: usize) {
        for i in 0..count {
            let data: Vec<u8> = (0..size * size * 3)
                .map(|j| ((i * 37 + j * 11) % 256) as u8)
                .collect();
            let img = Image8::new(size, size, data).unwrap();
            img.save_png(&dir.join(format!("img_{i:03}.png"))).unwrap();
        }
    }

    #[test]
    fn dataset_split_counts_and_determinism() {
        let dir = tempfile::tempdir().unwrap();
        write_test_images(dir.path(), 9, 16);
        let ds: PairedDataset<f32> = load_dataset(dir.path(), 16, None, 7).unwrap();
        // 9 images: one dropped, 4 covers + 4 secrets.
        assert_eq!(ds.pair_count(), 4);
        assert_eq!(ds.secrets.len(), 4);
        assert_eq!(ds.source_files.len(), 8);
        for img in ds.covers.iter().chain(&ds.secrets) {
            assert_eq!((img.height(), img.width()), (16, 16));
            assert!(img.data().iter().all(|&v| (0.0..=1.0).contains(&v)));
        }
        let ds2: PairedDataset<f32> = load_dataset(dir.path(), 16, None, 7).unwrap();
        assert_eq!(ds.source_files, ds2.source_files);
        assert_eq!(ds.covers[0], ds2.covers[0]);
        // Different seed, different pairing.
        let ds3: PairedDataset<f32> = load_dataset(dir.path(), 16, None, 8).unwrap();
        assert_ne!(ds.source_files, ds3.source_files);
    }

    #[test]
    fn dataset_cover_secret_sources_disjoint() {
        let dir = tempfile::tempdir().unwrap();
        write_test_images(dir.path(), 10, 8);
        let ds: PairedDataset<f32> = load_dataset(dir.path(), 8, None, 3).unwrap();
        let covers: std::collections::HashSet<_> =
            ds.source_files[..ds.pair_count()].iter().collect();
        let secrets: std::collections::HashSet<_> =
            ds.source_files[ds.pair_count()..].iter().collect();
        assert!(covers.is_disjoint(&secrets));
    }

    #[test]
    fn dataset_skips_undecodable_and_requires_two() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("junk.png"), b"not a png").unwrap();
        let r: Result<PairedDataset<f32>> = load_dataset(dir.path(), 8, None, 0);
        assert!(matches!(r, Err(Error::Dataset(_))));
        write_test_images(dir.path(), 4, 8);
        let ds: PairedDataset<f32> = load_dataset(dir.path(), 8, None, 0).unwrap();
        assert_eq!(ds.pair_count(), 2);
    }

    #[test]
    fn dataset_limit_truncates() {
        let dir = tempfile::tempdir().unwrap();
        write_test_images(dir.path(), 8, 8);
        let ds: PairedDataset<f32> = load_dataset(dir.path(), 8, Some(4), 0).unwrap();
        assert_eq!(ds.pair_count(), 2);
    }

    #[test]
    fn loss_csv_roundtrip() {
        let log = LossLog {
            records: vec![
                EpochRecord {
                    epoch: 1,
                    mean_loss: 0.123456789,
                    mean_mse_cover_stego: 0.1,
                    mean_mse_secret_extracted: 0.2,
                    wall_seconds: 1.25,
                },
                EpochRecord {
                    epoch: 2,
                    mean_loss: 0.0625,
                    mean_mse_cover_stego: 0.05,
                    mean_mse_secret_extracted: 0.075,
                    wall_seconds: 1.5,
                },
                EpochRecord {
                    epoch: 3,
                    mean_loss: 0.03125,
                    mean_mse_cover_stego: 0.02,
                    mean_mse_secret_extracted: 0.04,
                    wall_seconds: 1.75,
                },
            ],
        };
        let csv = log.to_csv();
        assert_eq!(csv.lines().count(), 4);
        let parsed = LossLog::parse_csv(&csv).unwrap();
        assert_eq!(parsed, log);
        // Monotone synthetic log keeps its order in column 2.
        let vals: Vec<f64> = parsed.records.iter().map(|r| r.mean_loss).collect();
        assert!(vals.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn config_file_parsing_and_validation() {
        let mut cfg = TrainConfig::default();
        cfg.apply_config_text(
            "# comment\nimage_size = 32\nalpha=0.7\nepochs = 3\nseed=9\nlimit = 10\n",
        )
        .unwrap();
        assert_eq!(cfg.image_size, 32);
        assert_eq!(cfg.alpha, 0.7);
        assert_eq!(cfg.epochs, 3);
        assert_eq!(cfg.limit, Some(10));
        assert!(cfg.apply_config_text("nonsense\n").is_err());
        assert!(cfg.apply_config_text("unknown_key=1\n").is_err());
        cfg.image_size = 20;
        assert!(cfg.validate().is_err());
        cfg.image_size = 32;
        cfg.alpha = 1.5;
        assert!(cfg.validate().is_err());
    }
}
