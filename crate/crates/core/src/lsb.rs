//! k-bit LSB substitution baselines.
//!
//! The classic spatial-domain scheme the deep system is compared
//! against: the top `k` bits of each secret sample replace the low `k`
//! bits of the corresponding cover sample.

use crate::error::{Error, Result};
use crate::image_io::{Image8, ImageTensor};
use crate::metrics::{psnr, StegoCodec};
use crate::scalar::Scalar;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LsbConfig {
    k: u8,
}

impl LsbConfig {
    pub fn new(k: u8) -> Result<Self> {
        if !(1..=8).contains(&k) {
            return Err(Error::InvalidArg(format!(
                "LSB bit count must be in [1, 8], got {k}"
            )));
        }
        Ok(LsbConfig { k })
    }

    pub fn k(&self) -> u8 {
        self.k
    }

    /// Bits of hidden information per cover sample.
    pub fn relative_capacity(&self) -> f64 {
        self.k as f64
    }
}

#[inline]
fn embed_sample(cover: u8, secret: u8, k: u8) -> u8 {
    let keep_mask = if k == 8 { 0 } else { 0xFFu8 << k };
    (cover & keep_mask) | (secret >> (8 - k))
}

#[inline]
fn extract_sample(stego: u8, k: u8) -> u8 {
    let low_mask = if k == 8 { 0xFF } else { (1u8 << k) - 1 };
    (stego & low_mask) << (8 - k)
}

/// Substitute the secret's top `k` bits into the cover's low `k` bits,
/// per sample.
pub fn lsb_embed(cover: &Image8, secret: &Image8, config: LsbConfig) -> Result<Image8> {
    if !cover.same_dims(secret) {
        return Err(Error::shape(
            "lsb_embed",
            format!(
                "cover {}x{} vs secret {}x{}",
                cover.height(),
                cover.width(),
                secret.height(),
                secret.width()
            ),
        ));
    }
    let data: Vec<u8> = cover
        .data()
        .iter()
        .zip(secret.data())
        .map(|(&c, &s)| embed_sample(c, s, config.k))
        .collect();
    Image8::new(cover.height(), cover.width(), data)
}

/// Recover the secret's top `k` bits from the stego's low `k` bits; the
/// remaining low bits of each sample are zero-filled.
pub fn lsb_extract(stego: &Image8, config: LsbConfig) -> Result<Image8> {
    let data: Vec<u8> = stego
        .data()
        .iter()
        .map(|&v| extract_sample(v, config.k))
        .collect();
    Image8::new(stego.height(), stego.width(), data)
}

/// Mean PSNR(cover, stego) over seeded uniform-random cover/secret
/// pairs. Empirical oracle for the expected stego distortion of k-bit
/// substitution (k = 1 on uniform data sits at 51.14 dB).
pub fn lsb_expected_psnr(config: LsbConfig, trials: usize, seed: u64) -> Result<f64> {
    if trials == 0 {
        return Err(Error::InvalidArg("trials must be >= 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (h, w) = (64, 64);
    let mut total = 0.0;
    for _ in 0..trials {
        let cover = random_image(h, w, &mut rng);
        let secret = random_image(h, w, &mut rng);
        let stego = lsb_embed(&cover, &secret, config)?;
        total += psnr(&cover, &stego)?;
    }
    Ok(total / trials as f64)
}

fn random_image(h: usize, w: usize, rng: &mut ChaCha8Rng) -> Image8 {
    let data: Vec<u8> = (0..h * w * 3).map(|_| rng.gen::<u8>()).collect();
    Image8::new(h, w, data).expect("dims")
}

/// LSB as a [`StegoCodec`], so `evaluate` produces the same report
/// columns as the deep system. Floats quantize to 8 bits at the
/// boundary and come back exactly (n/255 scaling is lossless for u8).
pub struct LsbCodec {
    pub config: LsbConfig,
}

impl<T: Scalar> StegoCodec<T> for LsbCodec {
    fn embed_pair(
        &self,
        cover: &ImageTensor<T>,
        secret: &ImageTensor<T>,
    ) -> Result<ImageTensor<T>> {
        let stego = lsb_embed(
            &crate::metrics::quantize(cover),
            &crate::metrics::quantize(secret),
            self.config,
        )?;
        Ok(stego.to_float())
    }
    fn extract_stego(&self, stego: &ImageTensor<T>) -> Result<ImageTensor<T>> {
        let out = lsb_extract(&crate::metrics::quantize(stego), self.config)?;
        Ok(out.to_float())
    }

    fn relative_capacity_bpp(&self, _: (usize, usize, usize), _: (usize, usize)) -> f64 {
        self.config.relative_capacity()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::mse_255;

    fn img1(v: u8) -> Image8 {
        Image8::new(1, 1, vec![v, 0, 0]).unwrap()
    }

    #[test]
    fn bit_arithmetic_examples() {
        // k=1: cover 200 (11001000b), secret 255 (top bit 1) -> 201.
        assert_eq!(embed_sample(200, 255, 1), 201);
        // k=4: (0xF0 & 0xF0) | (0xF0 >> 4) = 0xFF.
        assert_eq!(embed_sample(0xF0, 0xF0, 4), 0xFF);
        // k=8: full substitution.
        assert_eq!(embed_sample(0xAB, 0x3C, 8), 0x3C);
        // Extraction: stego 201, k=1 -> low bit 1 -> 10000000b = 128.
        assert_eq!(extract_sample(201, 1), 128);
    }

    #[test]
    fn embed_extract_image_level() {
        let cover = img1(200);
        let secret = img1(255);
        let k1 = LsbConfig::new(1).unwrap();
        let stego = lsb_embed(&cover, &secret, k1).unwrap();
        assert_eq!(stego.data()[0], 201);
        let rec = lsb_extract(&stego, k1).unwrap();
        assert_eq!(rec.data()[0], 128);

        let k8 = LsbConfig::new(8).unwrap();
        let stego8 = lsb_embed(&cover, &secret, k8).unwrap();
        assert_eq!(stego8, secret);
        assert_eq!(lsb_extract(&stego8, k8).unwrap(), secret);
    }

    #[test]
    fn k_out_of_range_rejected() {
        assert!(LsbConfig::new(0).is_err());
        assert!(LsbConfig::new(9).is_err());
    }

    #[test]
    fn mismatched_dims_rejected() {
        let a = Image8::filled(2, 2, 0);
        let b = Image8::filled(2, 3, 0);
        assert!(lsb_embed(&a, &b, LsbConfig::new(1).unwrap()).is_err());
    }

    #[test]
    fn exhaustive_roundtrip_error_bound() {
        // For every (cover, secret, k): the recovered sample differs from
        // the secret by less than 2^(8-k) (only the low 8-k bits are lost).
        for k in 1..=8u8 {
            let bound = 1i32 << (8 - k);
            for c in 0..=255u8 {
                for s in 0..=255u8 {
                    let rec = extract_sample(embed_sample(c, s, k), k) as i32;
                    let err = (rec - s as i32).abs();
                    assert!(err < bound, "k={k} c={c} s={s}: err {err} >= {bound}");
                }
            }
        }
    }

    #[test]
    fn capacity_and_imperceptibility_tradeoff() {
        // MSE(cover, stego) non-decreasing in k; MSE(secret, recovered)
        // non-increasing in k.
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let cover = random_image(16, 16, &mut rng);
        let secret = random_image(16, 16, &mut rng);
        let mut prev_cs = -1.0;
        let mut prev_sr = f64::INFINITY;
        for k in 1..=8u8 {
            let cfg = LsbConfig::new(k).unwrap();
            let stego = lsb_embed(&cover, &secret, cfg).unwrap();
            let rec = lsb_extract(&stego, cfg).unwrap();
            let cs = mse_255(&cover, &stego).unwrap();
            let sr = mse_255(&secret, &rec).unwrap();
            assert!(cs >= prev_cs, "k={k}: cover MSE fell");
            assert!(sr <= prev_sr, "k={k}: secret MSE rose");
            prev_cs = cs;
            prev_sr = sr;
        }
    }

    #[test]
    fn expected_psnr_matches_analytic_value() {
        // Uniform random data, k=1: expected per-sample MSE is 0.5, so
        // PSNR = 10 log10(255^2 / 0.5) = 51.14 dB.
        let p = lsb_expected_psnr(LsbConfig::new(1).unwrap(), 8, 1234).unwrap();
        assert!((p - 51.14).abs() < 0.5, "{p}");
    }

    #[test]
    fn full_substitution_stego_is_the_secret() {
        // k=8 replaces every cover bit, so PSNR(cover, stego) collapses
        // to PSNR(cover, secret) of the random pair.
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let cover = random_image(16, 16, &mut rng);
        let secret = random_image(16, 16, &mut rng);
        let stego = lsb_embed(&cover, &secret, LsbConfig::new(8).unwrap()).unwrap();
        assert_eq!(stego, secret);
        assert_eq!(
            psnr(&cover, &stego).unwrap(),
            psnr(&cover, &secret).unwrap()
        );
    }

    #[test]
    fn relative_capacity_is_k() {
        for k in [1u8, 2, 4, 7] {
            assert_eq!(LsbConfig::new(k).unwrap().relative_capacity(), k as f64);
        }
    }
}
