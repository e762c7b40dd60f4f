//! In-memory image types and file I/O.
//!
//! [`ImageTensor`] is the canonical float image: height x width x RGB in
//! `[0, 1]`. [`Image8`] is the 8-bit form used for files and for all
//! quality metrics. Models consume channel-major tensors; conversion
//! happens here, at the boundary.

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;
use std::path::Path;

/// Float RGB image, row-major `height x width x 3`, values in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct ImageTensor<T> {
    height: usize,
    width: usize,
    data: Vec<T>,
}

impl<T: Scalar> ImageTensor<T> {
    pub fn new(height: usize, width: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != height * width * 3 {
            return Err(Error::shape(
                "image",
                format!(
                    "{}x{} RGB needs {} values, got {}",
                    height,
                    width,
                    height * width * 3,
                    data.len()
                ),
            ));
        }
        Ok(ImageTensor {
            height,
            width,
            data,
        })
    }

    pub fn zeros(height: usize, width: usize) -> Self {
        ImageTensor {
            height,
            width,
            data: vec![T::zero(); height * width * 3],
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    /// Channel-major tensor `[3, h, w]` for model input.
    pub fn to_chw(&self) -> Tensor<T> {
        let (h, w) = (self.height, self.width);
        let mut out = Tensor::zeros(&[3, h, w]);
        let od = out.data_mut();
        for y in 0..h {
            for x in 0..w {
                for c in 0..3 {
                    od[(c * h + y) * w + x] = self.data[(y * w + x) * 3 + c];
                }
            }
        }
        out
    }

    /// Rebuild from a channel-major `[3, h, w]` tensor.
    pub fn from_chw(t: &Tensor<T>) -> Result<Self> {
        let s = t.shape();
        if s.len() != 3 || s[0] != 3 {
            return Err(Error::shape(
                "image",
                format!("expected [3, h, w] tensor, got {:?}", s),
            ));
        }
        let (h, w) = (s[1], s[2]);
        let td = t.data();
        let mut data = vec![T::zero(); h * w * 3];
        for y in 0..h {
            for x in 0..w {
                for c in 0..3 {
                    data[(y * w + x) * 3 + c] = td[(c * h + y) * w + x];
                }
            }
        }
        Ok(ImageTensor {
            height: h,
            width: w,
            data,
        })
    }
}

/// 8-bit RGB image, row-major `height x width x 3`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Image8 {
    height: usize,
    width: usize,
    data: Vec<u8>,
}

impl Image8 {
    pub fn new(height: usize, width: usize, data: Vec<u8>) -> Result<Self> {
        if data.len() != height * width * 3 {
            return Err(Error::shape(
                "image8",
                format!(
                    "{}x{} RGB needs {} bytes, got {}",
                    height,
                    width,
                    height * width * 3,
                    data.len()
                ),
            ));
        }
        Ok(Image8 {
            height,
            width,
            data,
        })
    }

    pub fn filled(height: usize, width: usize, value: u8) -> Self {
        Image8 {
            height,
            width,
            data: vec![value; height * width * 3],
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [u8] {
        &mut self.data
    }

    pub fn same_dims(&self, other: &Image8) -> bool {
        self.height == other.height && self.width == other.width
    }

    /// Scale to floats in `[0, 1]`.
    pub fn to_float<T: Scalar>(&self) -> ImageTensor<T> {
        let inv = T::from_f64_lossy(1.0 / 255.0);
        ImageTensor {
            height: self.height,
            width: self.width,
            data: self
                .data
                .iter()
                .map(|&b| T::from_usize_lossy(b as usize) * inv)
                .collect(),
        }
    }

    /// Decode a PNG or JPEG file; non-RGB color types are converted.
    pub fn load(path: &Path) -> Result<Image8> {
        let img = image::open(path)?.to_rgb8();
        let (w, h) = img.dimensions();
        Image8::new(h as usize, w as usize, img.into_raw())
    }

    /// Write as PNG (lossless, 8-bit RGB).
    pub fn save_png(&self, path: &Path) -> Result<()> {
        let buf: image::RgbImage = image::ImageBuffer::from_raw(
            self.width as u32,
            self.height as u32,
            self.data.clone(),
        )
        .expect("buffer length matches dimensions");
        buf.save_with_format(path, image::ImageFormat::Png)?;
        Ok(())
    }
}

/// Bilinear resize with pixel-center sampling (the convention where
/// sample positions are `(i + 0.5) * scale - 0.5`; corners are not
/// pinned). Fixed here so resized datasets are reproducible.
pub fn resize_bilinear<T: Scalar>(
    img: &ImageTensor<T>,
    out_h: usize,
    out_w: usize,
) -> ImageTensor<T> {
    let (in_h, in_w) = (img.height, img.width);
    if (in_h, in_w) == (out_h, out_w) {
        return img.clone();
    }
    let scale_y = in_h as f64 / out_h as f64;
    let scale_x = in_w as f64 / out_w as f64;
    let mut out = ImageTensor::zeros(out_h, out_w);
    for oy in 0..out_h {
        let sy = ((oy as f64 + 0.5) * scale_y - 0.5).max(0.0);
        let y0 = (sy.floor() as usize).min(in_h - 1);
        let y1 = (y0 + 1).min(in_h - 1);
        let fy = sy - y0 as f64;
        for ox in 0..out_w {
            let sx = ((ox as f64 + 0.5) * scale_x - 0.5).max(0.0);
            let x0 = (sx.floor() as usize).min(in_w - 1);
            let x1 = (x0 + 1).min(in_w - 1);
            let fx = sx - x0 as f64;
            for c in 0..3 {
                let p00 = img.data[(y0 * in_w + x0) * 3 + c].to_f64_lossy();
                let p01 = img.data[(y0 * in_w + x1) * 3 + c].to_f64_lossy();
                let p10 = img.data[(y1 * in_w + x0) * 3 + c].to_f64_lossy();
                let p11 = img.data[(y1 * in_w + x1) * 3 + c].to_f64_lossy();
                let top = p00 + (p01 - p00) * fx;
                let bottom = p10 + (p11 - p10) * fx;
                out.data_mut()[(oy * out_w + ox) * 3 + c] =
                    T::from_f64_lossy(top + (bottom - top) * fy);
            }
        }
    }
    out
}

/// Stack images into a `[batch, 3, h, w]` tensor. All images must share
/// one size.
pub fn stack_batch<T: Scalar>(images: &[&ImageTensor<T>]) -> Result<Tensor<T>> {
    let first = images
        .first()
        .ok_or_else(|| Error::InvalidArg("empty batch".into()))?;
    let (h, w) = (first.height, first.width);
    let mut out = Tensor::zeros(&[images.len(), 3, h, w]);
    let plane = 3 * h * w;
    for (bi, img) in images.iter().enumerate() {
        if img.height != h || img.width != w {
            return Err(Error::shape(
                "stack_batch",
                format!(
                    "image {bi} is {}x{}, expected {h}x{w}",
                    img.height, img.width
                ),
            ));
        }
        let chw = img.to_chw();
        out.data_mut()[bi * plane..(bi + 1) * plane].copy_from_slice(chw.data());
    }
    Ok(out)
}

/// Pull image `index` out of a `[batch, 3, h, w]` tensor.
pub fn image_from_batch<T: Scalar>(t: &Tensor<T>, index: usize) -> Result<ImageTensor<T>> {
    let (b, c, h, w) = t.dims4("image_from_batch")?;
    if c != 3 || index >= b {
        return Err(Error::shape(
            "image_from_batch",
            format!("index {index} of {:?}", t.shape()),
        ));
    }
    let plane = 3 * h * w;
    let slice = Tensor::from_vec(&[3, h, w], t.data()[index * plane..(index + 1) * plane].to_vec())?;
    ImageTensor::from_chw(&slice)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chw_roundtrip_preserves_pixels() {
        let data: Vec<f32> = (0..2 * 3 * 3).map(|i| i as f32 / 18.0).collect();
        let img = ImageTensor::new(2, 3, data).unwrap();
        let back = ImageTensor::from_chw(&img.to_chw()).unwrap();
        assert_eq!(img, back);
    }

    #[test]
    fn resize_identity_and_constant() {
        let img = ImageTensor::<f32>::new(4, 4, vec![0.25; 48]).unwrap();
        let same = resize_bilinear(&img, 4, 4);
        assert_eq!(img, same);
        let smaller = resize_bilinear(&img, 2, 2);
        assert!(smaller.data().iter().all(|&v| (v - 0.25).abs() < 1e-6));
    }

    #[test]
    fn resize_preserves_horizontal_gradient_direction() {
        let mut img = ImageTensor::<f64>::zeros(2, 8);
        for y in 0..2 {
            for x in 0..8 {
                for c in 0..3 {
                    img.data_mut()[(y * 8 + x) * 3 + c] = x as f64 / 7.0;
                }
            }
        }
        let out = resize_bilinear(&img, 2, 4);
        for x in 1..4 {
            assert!(out.data()[x * 3] > out.data()[(x - 1) * 3]);
        }
    }

    #[test]
    fn stack_and_unstack() {
        let a = ImageTensor::<f32>::new(2, 2, vec![0.1; 12]).unwrap();
        let b = ImageTensor::<f32>::new(2, 2, vec![0.9; 12]).unwrap();
        let batch = stack_batch(&[&a, &b]).unwrap();
        assert_eq!(batch.shape(), &[2, 3, 2, 2]);
        assert_eq!(image_from_batch(&batch, 1).unwrap(), b);
    }

    #[test]
    fn png_save_load_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.png");
        let data: Vec<u8> = (0..4 * 5 * 3).map(|i| (i * 7 % 256) as u8).collect();
        let img = Image8::new(4, 5, data).unwrap();
        img.save_png(&path).unwrap();
        let back = Image8::load(&path).unwrap();
        assert_eq!(img, back);
    }
}
