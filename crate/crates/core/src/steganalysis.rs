//! Security analyses: per-channel histograms, difference images, and
//! amplified difference images, emitted as CSVs and PNGs.

use crate::error::{Error, Result};
use crate::image_io::Image8;
use std::io::Write;
use std::path::{Path, PathBuf};

/// 256 bins per color channel.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Histogram {
    pub bins: [[u64; 256]; 3],
    /// Which image the counts came from (used in emitted file names).
    pub source: String,
}

impl Histogram {
    pub fn channel_total(&self, channel: usize) -> u64 {
        self.bins[channel].iter().sum()
    }

    /// `bin,red,green,blue` rows with a header.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("bin,red,green,blue\n");
        for b in 0..256 {
            out.push_str(&format!(
                "{b},{},{},{}\n",
                self.bins[0][b], self.bins[1][b], self.bins[2][b]
            ));
        }
        out
    }
}

/// Count samples per intensity level, per channel.
pub fn channel_histogram(image: &Image8, source: &str) -> Histogram {
    let mut bins = [[0u64; 256]; 3];
    for px in image.data().chunks_exact(3) {
        for c in 0..3 {
            bins[c][px[c] as usize] += 1;
        }
    }
    Histogram {
        bins,
        source: source.to_string(),
    }
}

/// Per-sample absolute difference.
pub fn difference_image(a: &Image8, b: &Image8) -> Result<Image8> {
    if !a.same_dims(b) {
        return Err(Error::shape(
            "difference_image",
            format!(
                "{}x{} vs {}x{}",
                a.height(),
                a.width(),
                b.height(),
                b.width()
            ),
        ));
    }
    let data: Vec<u8> = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(&x, &y)| x.abs_diff(y))
        .collect();
    Image8::new(a.height(), a.width(), data)
}

/// `min(|a - b| * factor, 255)` per sample; saturates instead of
/// wrapping so amplification never fabricates structure.
pub fn amplified_difference(a: &Image8, b: &Image8, factor: u32) -> Result<Image8> {
    if factor < 1 {
        return Err(Error::InvalidArg("amplification factor must be >= 1".into()));
    }
    let mut diff = difference_image(a, b)?;
    for v in diff.data_mut() {
        *v = ((*v as u32) * factor).min(255) as u8;
    }
    Ok(diff)
}

/// Mean over channels of the L1 distance between the normalized
/// (probability) histograms; ranges over `[0, 2]`.
pub fn histogram_distance(h1: &Histogram, h2: &Histogram) -> f64 {
    let mut total = 0.0;
    for c in 0..3 {
        let n1 = h1.channel_total(c) as f64;
        let n2 = h2.channel_total(c) as f64;
        let mut l1 = 0.0;
        for b in 0..256 {
            l1 += (h1.bins[c][b] as f64 / n1 - h2.bins[c][b] as f64 / n2).abs();
        }
        total += l1;
    }
    total / 3.0
}

/// One evaluated pair: the four images the analyses run on.
#[derive(Clone, Debug)]
pub struct StegoRecord {
    pub cover: Image8,
    pub secret: Image8,
    pub stego: Image8,
    pub extracted: Image8,
}

/// Write the analysis file set for one record into `out_dir`:
/// histogram CSVs for cover and stego, the cover/stego difference PNG,
/// its 10x amplified PNG, and a one-line summary with the histogram
/// distance. Returns the created paths.
pub fn emit_analysis(record: &StegoRecord, out_dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(out_dir)?;
    let cover_hist = channel_histogram(&record.cover, "cover");
    let stego_hist = channel_histogram(&record.stego, "stego");
    let mut written = Vec::new();

    for hist in [&cover_hist, &stego_hist] {
        let path = out_dir.join(format!("{}_histogram.csv", hist.source));
        std::fs::write(&path, hist.to_csv())?;
        written.push(path);
    }

    let diff = difference_image(&record.cover, &record.stego)?;
    let diff_path = out_dir.join("difference_cover_stego.png");
    diff.save_png(&diff_path)?;
    written.push(diff_path);

    let amplified = amplified_difference(&record.cover, &record.stego, 10)?;
    let amp_path = out_dir.join("difference_cover_stego_x10.png");
    amplified.save_png(&amp_path)?;
    written.push(amp_path);

    let distance = histogram_distance(&cover_hist, &stego_hist);
    let summary_path = out_dir.join("summary.txt");
    let mut f = std::fs::File::create(&summary_path)?;
    writeln!(f, "histogram_distance={distance}")?;
    written.push(summary_path);

    Ok(written)
}
