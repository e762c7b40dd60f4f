//! Image-quality metrics and the per-pair evaluation report.
//!
//! All metrics run on quantized 8-bit images with `Max = 255`. SSIM uses
//! whole-image statistics per channel (the single-window product of
//! luminance, contrast and structure factors), not the sliding-window
//! variant; variances and covariances are population (biased) estimates.

use crate::error::{Error, Result};
use crate::image_io::{Image8, ImageTensor};
use crate::scalar::Scalar;
use rayon::prelude::*;
use std::io::Write;
use std::path::Path;

/// SSIM stabilizer constants for 8-bit dynamic range.
pub const SSIM_C1: f64 = (0.01 * 255.0) * (0.01 * 255.0);
pub const SSIM_C2: f64 = (0.03 * 255.0) * (0.03 * 255.0);
pub const SSIM_C3: f64 = SSIM_C2 / 2.0;

/// Round a `[0, 1]` float image to 8 bits (half rounds away from zero).
/// Out-of-range values are clamped; the count of clamped samples is
/// returned alongside so callers can warn.
pub fn quantize_counting<T: Scalar>(img: &ImageTensor<T>) -> (Image8, usize) {
    let mut clamped = 0usize;
    let data: Vec<u8> = img
        .data()
        .iter()
        .map(|v| {
            let x = v.to_f64_lossy();
            if !(0.0..=1.0).contains(&x) {
                clamped += 1;
            }
            (x * 255.0).round().clamp(0.0, 255.0) as u8
        })
        .collect();
    (
        Image8::new(img.height(), img.width(), data).expect("same dims"),
        clamped,
    )
}

pub fn quantize<T: Scalar>(img: &ImageTensor<T>) -> Image8 {
    quantize_counting(img).0
}

/// Mean squared error over all samples on the 0-255 scale.
pub fn mse_255(a: &Image8, b: &Image8) -> Result<f64> {
    if !a.same_dims(b) {
        return Err(Error::shape(
            "mse",
            format!(
                "{}x{} vs {}x{}",
                a.height(),
                a.width(),
                b.height(),
                b.width()
            ),
        ));
    }
    let acc: f64 = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(&x, &y)| {
            let d = x as f64 - y as f64;
            d * d
        })
        .sum();
    Ok(acc / a.data().len() as f64)
}

/// Peak signal-to-noise ratio in dB: `10 log10(255^2 / mse)`.
/// Identical images return `f64::INFINITY` (rendered as `inf`).
pub fn psnr(a: &Image8, b: &Image8) -> Result<f64> {
    let mse = mse_255(a, b)?;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (255.0 * 255.0 / mse).log10())
}

/// Structural similarity: per channel, the product of luminance,
/// contrast and structure factors from whole-image statistics, averaged
/// over the three channels. Result lies in `[-1, 1]`.
pub fn ssim(a: &Image8, b: &Image8) -> Result<f64> {
    if !a.same_dims(b) {
        return Err(Error::shape(
            "ssim",
            format!(
                "{}x{} vs {}x{}",
                a.height(),
                a.width(),
                b.height(),
                b.width()
            ),
        ));
    }
    let n = (a.height() * a.width()) as f64;
    let mut total = 0.0;
    for c in 0..3 {
        let (mut sum_a, mut sum_b) = (0.0f64, 0.0f64);
        for i in (c..a.data().len()).step_by(3) {
            sum_a += a.data()[i] as f64;
            sum_b += b.data()[i] as f64;
        }
        let mu_a = sum_a / n;
        let mu_b = sum_b / n;
        let (mut var_a, mut var_b, mut cov) = (0.0f64, 0.0f64, 0.0f64);
        for i in (c..a.data().len()).step_by(3) {
            let da = a.data()[i] as f64 - mu_a;
            let db = b.data()[i] as f64 - mu_b;
            var_a += da * da;
            var_b += db * db;
            cov += da * db;
        }
        var_a /= n;
        var_b /= n;
        cov /= n;
        let sd_a = var_a.sqrt();
        let sd_b = var_b.sqrt();

        let luminance = (2.0 * mu_a * mu_b + SSIM_C1) / (mu_a * mu_a + mu_b * mu_b + SSIM_C1);
        let contrast = (2.0 * sd_a * sd_b + SSIM_C2) / (var_a + var_b + SSIM_C2);
        let structure = (cov + SSIM_C3) / (sd_a * sd_b + SSIM_C3);
        total += luminance * contrast * structure;
    }
    Ok(total / 3.0)
}

/// Hidden bits per cover sample: `(M*N*O*8) / (Mc*Nc*O)`. For the
/// equal-size 3-channel scheme this is 8 bpp; the channel count cancels
/// whenever cover and secret share it.
pub fn relative_capacity(secret_dims: (usize, usize, usize), cover_dims: (usize, usize)) -> f64 {
    let (m, n, o) = secret_dims;
    let (mc, nc) = cover_dims;
    (m * n * o * 8) as f64 / (mc * nc * o) as f64
}

/// Bits per pixel recovered accurately: `(1 - mae) * 8 * 3`, where `mae`
/// is the mean absolute error over all samples on the normalized
/// `[0, 1]` scale. Always in `[0, 24]`.
pub fn payload_capacity(secret: &Image8, extracted: &Image8) -> Result<f64> {
    if !secret.same_dims(extracted) {
        return Err(Error::shape(
            "payload_capacity",
            format!(
                "{}x{} vs {}x{}",
                secret.height(),
                secret.width(),
                extracted.height(),
                extracted.width()
            ),
        ));
    }
    let acc: f64 = secret
        .data()
        .iter()
        .zip(extracted.data())
        .map(|(&s, &r)| ((s as f64 - r as f64) / 255.0).abs())
        .sum();
    let mae = acc / secret.data().len() as f64;
    Ok((1.0 - mae) * 24.0)
}

/// Anything that can hide one image inside another and recover it.
/// Implemented by the trained system and by the LSB baselines; tests use
/// stub codecs.
pub trait StegoCodec<T: Scalar> {
    fn embed_pair(&self, cover: &ImageTensor<T>, secret: &ImageTensor<T>)
        -> Result<ImageTensor<T>>;
    fn extract_stego(&self, stego: &ImageTensor<T>) -> Result<ImageTensor<T>>;

    /// Relative capacity of the scheme in bits per cover sample. The
    /// default is the full-depth image-in-image value; k-bit LSB
    /// substitution overrides this with k.
    fn relative_capacity_bpp(
        &self,
        secret_dims: (usize, usize, usize),
        cover_dims: (usize, usize),
    ) -> f64 {
        relative_capacity(secret_dims, cover_dims)
    }
}

impl<T: Scalar> StegoCodec<T> for crate::models::StegoSystem<T> {
    fn embed_pair(
        &self,
        cover: &ImageTensor<T>,
        secret: &ImageTensor<T>,
    ) -> Result<ImageTensor<T>> {
        self.embed_images(cover, secret)
    }
    fn extract_stego(&self, stego: &ImageTensor<T>) -> Result<ImageTensor<T>> {
        self.extract_images(stego)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PairMetrics {
    pub pair_id: usize,
    pub psnr_cover_stego: f64,
    pub ssim_cover_stego: f64,
    pub psnr_secret_extracted: f64,
    pub ssim_secret_extracted: f64,
    pub payload_bpp: f64,
    pub relative_bpp: f64,
}

/// Per-pair metric rows plus recomputable aggregates.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct MetricsReport {
    pub rows: Vec<PairMetrics>,
}

type MetricColumn = fn(&PairMetrics) -> f64;

/// Column accessors used for aggregation and CSV layout.
const COLUMNS: &[(&str, MetricColumn)] = &[
    ("psnr_cover_stego", |r| r.psnr_cover_stego),
    ("ssim_cover_stego", |r| r.ssim_cover_stego),
    ("psnr_secret_extracted", |r| r.psnr_secret_extracted),
    ("ssim_secret_extracted", |r| r.ssim_secret_extracted),
    ("payload_bpp", |r| r.payload_bpp),
    ("relative_bpp", |r| r.relative_bpp),
];

impl MetricsReport {
    pub fn mean(&self, col: fn(&PairMetrics) -> f64) -> f64 {
        self.rows.iter().map(col).sum::<f64>() / self.rows.len() as f64
    }

    pub fn min(&self, col: fn(&PairMetrics) -> f64) -> f64 {
        self.rows.iter().map(col).fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self, col: fn(&PairMetrics) -> f64) -> f64 {
        self.rows.iter().map(col).fold(f64::NEG_INFINITY, f64::max)
    }

    /// Per-pair rows followed by a mean/min/max summary block. Infinite
    /// PSNR renders as the literal token `inf`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("pair");
        for (name, _) in COLUMNS {
            out.push(',');
            out.push_str(name);
        }
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.pair_id.to_string());
            for (_, col) in COLUMNS {
                out.push(',');
                out.push_str(&format_metric(col(row)));
            }
            out.push('\n');
        }
        for (label, agg) in [
            ("mean", MetricsReport::mean as fn(&Self, fn(&PairMetrics) -> f64) -> f64),
            ("min", MetricsReport::min),
            ("max", MetricsReport::max),
        ] {
            out.push_str(label);
            for (_, col) in COLUMNS {
                out.push(',');
                out.push_str(&format_metric(agg(self, *col)));
            }
            out.push('\n');
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path)?;
        f.write_all(self.to_csv().as_bytes())?;
        Ok(())
    }
}

fn format_metric(v: f64) -> String {
    // f64 Display is shortest-roundtrip; infinities print as inf/-inf.
    format!("{v}")
}

/// Run embed + extract over the first `n_pairs` pairs, quantize, and
/// compute every metric. Pairs evaluate in parallel; row order is the
/// input order.
pub fn evaluate<T: Scalar, C: StegoCodec<T> + Sync>(
    codec: &C,
    pairs: &[(ImageTensor<T>, ImageTensor<T>)],
    n_pairs: usize,
) -> Result<MetricsReport> {
    if n_pairs == 0 || n_pairs > pairs.len() {
        return Err(Error::InvalidArg(format!(
            "n_pairs {n_pairs} out of range (have {})",
            pairs.len()
        )));
    }
    let rows: Result<Vec<PairMetrics>> = pairs[..n_pairs]
        .par_iter()
        .enumerate()
        .map(|(pair_id, (cover, secret))| {
            let stego = codec.embed_pair(cover, secret)?;
            let extracted = codec.extract_stego(&stego)?;
            let cover8 = quantize(cover);
            let secret8 = quantize(secret);
            let stego8 = quantize(&stego);
            let extracted8 = quantize(&extracted);
            Ok(PairMetrics {
                pair_id,
                psnr_cover_stego: psnr(&cover8, &stego8)?,
                ssim_cover_stego: ssim(&cover8, &stego8)?,
                psnr_secret_extracted: psnr(&secret8, &extracted8)?,
                ssim_secret_extracted: ssim(&secret8, &extracted8)?,
                payload_bpp: payload_capacity(&secret8, &extracted8)?,
                relative_bpp: codec.relative_capacity_bpp(
                    (secret.height(), secret.width(), 3),
                    (cover.height(), cover.width()),
                ),
            })
        })
        .collect();
    Ok(MetricsReport { rows: rows? })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seeded_image(h: usize, w: usize, seed: u64) -> Image8 {
        let mut state = seed.wrapping_mul(0x9E3779B97F4A7C15).wrapping_add(7);
        let data: Vec<u8> = (0..h * w * 3)
            .map(|_| {
                state = state
                    .wrapping_mul(6364136223846793005)
                    .wrapping_add(1442695040888963407);
                (state >> 56) as u8
            })
            .collect();
        Image8::new(h, w, data).unwrap()
    }

    #[test]
    fn quantize_endpoints_and_rounding() {
        let img = ImageTensor::<f64>::new(1, 2, vec![0.0, 1.0, 0.5, 0.25, 0.75, 0.999]).unwrap();
        let q = quantize(&img);
        // 0.5 * 255 = 127.5 rounds half away from zero -> 128.
        assert_eq!(q.data(), &[0, 255, 128, 64, 191, 255]);
    }

    #[test]
    fn quantize_clamps_and_counts() {
        let img = ImageTensor::<f64>::new(1, 1, vec![-0.5, 1.5, 0.5]).unwrap();
        let (q, clamped) = quantize_counting(&img);
        assert_eq!(q.data(), &[0, 255, 128]);
        assert_eq!(clamped, 2);
    }

    #[test]
    fn quantize_is_idempotent_through_dequantize() {
        let img = seeded_image(5, 7, 1);
        let float: ImageTensor<f64> = img.to_float();
        let back = quantize(&float);
        assert_eq!(img, back);
    }

    #[test]
    fn psnr_oracle_values() {
        let x = seeded_image(8, 8, 2);
        assert_eq!(psnr(&x, &x).unwrap(), f64::INFINITY);

        // Every sample offset by exactly one level: 20 log10(255).
        let mut y = x.clone();
        for v in y.data_mut() {
            *v = if *v == 255 { 254 } else { *v + 1 };
        }
        let p = psnr(&x, &y).unwrap();
        assert!((p - 48.1308).abs() < 1e-3, "{p}");

        // All zeros vs all 255: mse = 255^2, psnr = 0.
        let zeros = Image8::filled(4, 4, 0);
        let maxed = Image8::filled(4, 4, 255);
        assert_eq!(psnr(&zeros, &maxed).unwrap(), 0.0);
    }

    #[test]
    fn psnr_uniform_error_ladder() {
        // 20 log10(255 / k): derived closed form.
        for (k, expect) in [(1u8, 48.1308), (2, 42.1102), (4, 36.0896), (8, 30.0690)] {
            let x = Image8::filled(6, 6, 100);
            let y = Image8::filled(6, 6, 100 + k);
            let p = psnr(&x, &y).unwrap();
            assert!((p - expect).abs() < 1e-3, "k={k}: {p}");
        }
    }

    #[test]
    fn psnr_and_ssim_are_symmetric() {
        let a = seeded_image(9, 9, 3);
        let b = seeded_image(9, 9, 4);
        assert_eq!(psnr(&a, &b).unwrap(), psnr(&b, &a).unwrap());
        let d = (ssim(&a, &b).unwrap() - ssim(&b, &a).unwrap()).abs();
        assert!(d < 1e-12);
    }

    #[test]
    fn ssim_identical_and_constant_images() {
        let x = seeded_image(8, 8, 5);
        assert!((ssim(&x, &x).unwrap() - 1.0).abs() < 1e-9);
        let c = Image8::filled(4, 4, 77);
        assert!((ssim(&c, &c.clone()).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ssim_negative_on_inverted_image() {
        let x = seeded_image(16, 16, 6);
        let mut inv = x.clone();
        for v in inv.data_mut() {
            *v = 255 - *v;
        }
        let s = ssim(&x, &inv).unwrap();
        assert!(s < 0.0, "inverted image should anti-correlate, got {s}");
    }

    #[test]
    fn ssim_stays_in_range() {
        for seed in 10..20 {
            let a = seeded_image(8, 8, seed);
            let b = seeded_image(8, 8, seed + 100);
            let s = ssim(&a, &b).unwrap();
            assert!((-1.0..=1.0).contains(&s), "{s}");
        }
    }

    #[test]
    fn brute_force_mse_cross_validation() {
        // Independent triple-loop accumulation in image index order.
        fn mse_brute(a: &Image8, b: &Image8) -> f64 {
            let (h, w) = (a.height(), a.width());
            let mut acc = 0.0f64;
            for y in 0..h {
                for x in 0..w {
                    for c in 0..3 {
                        let i = (y * w + x) * 3 + c;
                        let d = a.data()[i] as f64 - b.data()[i] as f64;
                        acc += d * d;
                    }
                }
            }
            acc / (h * w * 3) as f64
        }
        for seed in 0..10 {
            let a = seeded_image(16, 16, seed);
            let b = seeded_image(16, 16, seed + 55);
            let fast = mse_255(&a, &b).unwrap();
            let slow = mse_brute(&a, &b);
            assert!((fast - slow).abs() < 1e-9, "{fast} vs {slow}");
        }
    }

    #[test]
    fn capacity_formulas() {
        assert_eq!(relative_capacity((256, 256, 3), (256, 256)), 8.0);
        assert_eq!(relative_capacity((1, 1, 1), (1, 1)), 8.0);
        let s = seeded_image(8, 8, 9);
        assert_eq!(payload_capacity(&s, &s).unwrap(), 24.0);
        // Complement of a saturated image: mae = 1 -> 0 bpp.
        let zeros = Image8::filled(4, 4, 0);
        let maxed = Image8::filled(4, 4, 255);
        assert_eq!(payload_capacity(&zeros, &maxed).unwrap(), 0.0);
        // mae = 1/60 -> 23.6 bpp exactly. 255/60 = 4.25 levels, realized
        // as differences of 4 on 36 samples and 5 on 12 samples.
        let a = Image8::filled(4, 4, 0);
        let mut b = Image8::filled(4, 4, 4);
        for v in b.data_mut().iter_mut().take(12) {
            *v = 5;
        }
        let p = payload_capacity(&a, &b).unwrap();
        assert!((p - 23.6).abs() < 1e-12, "{p}");
    }

    #[test]
    fn payload_capacity_in_range_on_random_images() {
        for seed in 0..20 {
            let a = seeded_image(6, 6, seed);
            let b = seeded_image(6, 6, seed * 31 + 7);
            let p = payload_capacity(&a, &b).unwrap();
            assert!((0.0..=24.0).contains(&p), "{p}");
        }
    }

    struct IdentityCodec;
    impl StegoCodec<f64> for IdentityCodec {
        fn embed_pair(
            &self,
            cover: &ImageTensor<f64>,
            _secret: &ImageTensor<f64>,
        ) -> Result<ImageTensor<f64>> {
            Ok(cover.clone())
        }
        fn extract_stego(&self, stego: &ImageTensor<f64>) -> Result<ImageTensor<f64>> {
            Ok(stego.clone())
        }
    }

    #[test]
    fn evaluate_identity_codec_and_csv() {
        // stego := cover; extracted := stego. Pair the same image with
        // itself so every metric hits its ideal value.
        let img: ImageTensor<f64> = seeded_image(8, 8, 11).to_float();
        let pairs = vec![(img.clone(), img.clone()), (img.clone(), img)];
        let report = evaluate(&IdentityCodec, &pairs, 2).unwrap();
        assert_eq!(report.rows.len(), 2);
        for row in &report.rows {
            assert_eq!(row.psnr_cover_stego, f64::INFINITY);
            assert!((row.ssim_cover_stego - 1.0).abs() < 1e-9);
            assert_eq!(row.payload_bpp, 24.0);
            assert_eq!(row.relative_bpp, 8.0);
        }
        // Single pair: aggregates equal the row.
        let single = evaluate(&IdentityCodec, &pairs, 1).unwrap();
        assert_eq!(single.mean(|r| r.ssim_cover_stego), single.rows[0].ssim_cover_stego);

        let csv = report.to_csv();
        assert!(csv.starts_with("pair,psnr_cover_stego"));
        assert!(csv.contains("inf"));
        assert_eq!(csv.lines().count(), 1 + 2 + 3);
        assert!(evaluate(&IdentityCodec, &pairs, 3).is_err());
    }
}
