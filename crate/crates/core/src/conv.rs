//! Convolution arithmetic shared by `conv2d` and `conv_transpose2d`.
//!
//! Both directions reduce to an `im2col`/`col2im` pair around a GEMM:
//! transposed convolution is the gradient of convolution with the same
//! kernel/stride/padding, so the two share their lowering helpers.

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;
use rayon::prelude::*;

/// Output size of a convolution along one axis.
pub fn conv_out_dim(input: usize, k: usize, stride: usize, padding: usize) -> usize {
    (input + 2 * padding - k) / stride + 1
}

/// Output size of a transposed convolution along one axis.
pub fn conv_transpose_out_dim(input: usize, k: usize, stride: usize, padding: usize) -> usize {
    (input - 1) * stride + k - 2 * padding
}

fn check_conv_args(
    context: &'static str,
    h: usize,
    w: usize,
    k: usize,
    stride: usize,
    padding: usize,
) -> Result<()> {
    if k == 0 || stride == 0 {
        return Err(Error::InvalidArg(format!(
            "{context}: kernel and stride must be >= 1 (k={k}, stride={stride})"
        )));
    }
    if h + 2 * padding < k || w + 2 * padding < k {
        return Err(Error::shape(
            context,
            format!("spatial dims {h}x{w} with padding {padding} smaller than kernel {k}"),
        ));
    }
    Ok(())
}

/// Gather `src` (one image, `[c, h, w]`) into columns `[c*k*k, gh*gw]`,
/// where `(gh, gw)` is the convolution grid for `(k, stride, padding)`.
#[allow(clippy::too_many_arguments)]
fn im2col<T: Scalar>(
    src: &[T],
    c: usize,
    h: usize,
    w: usize,
    k: usize,
    stride: usize,
    padding: usize,
    cols: &mut [T],
) {
    let gh = conv_out_dim(h, k, stride, padding);
    let gw = conv_out_dim(w, k, stride, padding);
    debug_assert_eq!(cols.len(), c * k * k * gh * gw);

    let mut row = 0;
    for ci in 0..c {
        let plane = &src[ci * h * w..(ci + 1) * h * w];
        for u in 0..k {
            for v in 0..k {
                let out_row = &mut cols[row * gh * gw..(row + 1) * gh * gw];
                for gi in 0..gh {
                    let ih = (gi * stride + u) as isize - padding as isize;
                    let dst = &mut out_row[gi * gw..(gi + 1) * gw];
                    if ih < 0 || ih >= h as isize {
                        for d in dst.iter_mut() {
                            *d = T::zero();
                        }
                        continue;
                    }
                    let src_row = &plane[ih as usize * w..(ih as usize + 1) * w];
                    for (gj, d) in dst.iter_mut().enumerate() {
                        let iw = (gj * stride + v) as isize - padding as isize;
                        *d = if iw < 0 || iw >= w as isize {
                            T::zero()
                        } else {
                            src_row[iw as usize]
                        };
                    }
                }
                row += 1;
            }
        }
    }
}

/// Scatter-add columns `[c*k*k, gh*gw]` back into `dst` (`[c, h, w]`).
/// Exact adjoint of [`im2col`].
#[allow(clippy::too_many_arguments)]
fn col2im_add<T: Scalar>(
    cols: &[T],
    c: usize,
    h: usize,
    w: usize,
    k: usize,
    stride: usize,
    padding: usize,
    dst: &mut [T],
) {
    let gh = conv_out_dim(h, k, stride, padding);
    let gw = conv_out_dim(w, k, stride, padding);
    debug_assert_eq!(cols.len(), c * k * k * gh * gw);

    let mut row = 0;
    for ci in 0..c {
        let plane = &mut dst[ci * h * w..(ci + 1) * h * w];
        for u in 0..k {
            for v in 0..k {
                let col_row = &cols[row * gh * gw..(row + 1) * gh * gw];
                for gi in 0..gh {
                    let ih = (gi * stride + u) as isize - padding as isize;
                    if ih < 0 || ih >= h as isize {
                        continue;
                    }
                    let dst_row = &mut plane[ih as usize * w..(ih as usize + 1) * w];
                    let src_row = &col_row[gi * gw..(gi + 1) * gw];
                    for (gj, s) in src_row.iter().enumerate() {
                        let iw = (gj * stride + v) as isize - padding as isize;
                        if iw >= 0 && (iw as usize) < w {
                            dst_row[iw as usize] += *s;
                        }
                    }
                }
                row += 1;
            }
        }
    }
}

/// Cross-correlation of `x` `[b, c_in, h, w]` with `weight`
/// `[c_out, c_in, k, k]` plus per-channel `bias`.
pub fn conv2d_forward<T: Scalar>(
    x: &Tensor<T>,
    weight: &Tensor<T>,
    bias: &Tensor<T>,
    stride: usize,
    padding: usize,
) -> Result<Tensor<T>> {
    let (b, c_in, h, w) = x.dims4("conv2d input")?;
    let ws = weight.shape();
    if ws.len() != 4 || ws[2] != ws[3] {
        return Err(Error::shape(
            "conv2d weight",
            format!("expected [c_out, c_in, k, k], got {:?}", ws),
        ));
    }
    let (c_out, wc_in, k) = (ws[0], ws[1], ws[2]);
    if wc_in != c_in {
        return Err(Error::shape(
            "conv2d",
            format!("input has {c_in} channels but weight expects {wc_in}"),
        ));
    }
    if bias.shape() != [c_out] {
        return Err(Error::shape(
            "conv2d bias",
            format!("expected [{c_out}], got {:?}", bias.shape()),
        ));
    }
    check_conv_args("conv2d", h, w, k, stride, padding)?;

    let oh = conv_out_dim(h, k, stride, padding);
    let ow = conv_out_dim(w, k, stride, padding);
    let mut out = Tensor::zeros(&[b, c_out, oh, ow]);

    let ckk = c_in * k * k;
    let x_data = x.data();
    let w_data = weight.data();
    let b_data = bias.data();

    out.data_mut()
        .par_chunks_mut(c_out * oh * ow)
        .zip(x_data.par_chunks(c_in * h * w))
        .for_each(|(out_img, x_img)| {
            let mut cols = vec![T::zero(); ckk * oh * ow];
            im2col(x_img, c_in, h, w, k, stride, padding, &mut cols);
            T::gemm(c_out, ckk, oh * ow, T::one(), w_data, &cols, T::zero(), out_img);
            for co in 0..c_out {
                let bias_v = b_data[co];
                for v in out_img[co * oh * ow..(co + 1) * oh * ow].iter_mut() {
                    *v += bias_v;
                }
            }
        });

    Ok(out)
}

/// Gradients of [`conv2d_forward`]. Returns `(dx, dweight, dbias)`; the
/// first two are computed only when requested.
pub fn conv2d_backward<T: Scalar>(
    x: &Tensor<T>,
    weight: &Tensor<T>,
    dy: &Tensor<T>,
    stride: usize,
    padding: usize,
    need_dx: bool,
    need_dw: bool,
) -> (Option<Tensor<T>>, Option<Tensor<T>>, Tensor<T>) {
    let (b, c_in, h, w) = x.dims4("conv2d backward").expect("checked in forward");
    let ws = weight.shape();
    let (c_out, k) = (ws[0], ws[2]);
    let oh = conv_out_dim(h, k, stride, padding);
    let ow = conv_out_dim(w, k, stride, padding);
    let ckk = c_in * k * k;

    let x_data = x.data();
    let w_data = weight.data();
    let dy_data = dy.data();

    let mut dbias = Tensor::zeros(&[c_out]);
    {
        let db = dbias.data_mut();
        for bi in 0..b {
            let dy_img = &dy_data[bi * c_out * oh * ow..(bi + 1) * c_out * oh * ow];
            for co in 0..c_out {
                let mut acc = 0.0f64;
                for v in &dy_img[co * oh * ow..(co + 1) * oh * ow] {
                    acc += v.to_f64_lossy();
                }
                db[co] += T::from_f64_lossy(acc);
            }
        }
    }

    let dx = if need_dx {
        let mut dx = Tensor::zeros(&[b, c_in, h, w]);
        dx.data_mut()
            .par_chunks_mut(c_in * h * w)
            .zip(dy_data.par_chunks(c_out * oh * ow))
            .for_each(|(dx_img, dy_img)| {
                let mut cols = vec![T::zero(); ckk * oh * ow];
                // dX_cols = W^T (c_out x ckk)^T . dY (c_out x oh*ow)
                T::gemm_tn(c_out, ckk, oh * ow, w_data, dy_img, &mut cols);
                col2im_add(&cols, c_in, h, w, k, stride, padding, dx_img);
            });
        Some(dx)
    } else {
        None
    };

    let dw = if need_dw {
        // Per-image partials, then a deterministic in-order reduction.
        let partials: Vec<Vec<T>> = (0..b)
            .into_par_iter()
            .map(|bi| {
                let x_img = &x_data[bi * c_in * h * w..(bi + 1) * c_in * h * w];
                let dy_img = &dy_data[bi * c_out * oh * ow..(bi + 1) * c_out * oh * ow];
                let mut cols = vec![T::zero(); ckk * oh * ow];
                im2col(x_img, c_in, h, w, k, stride, padding, &mut cols);
                let mut dw_img = vec![T::zero(); c_out * ckk];
                // dW = dY (c_out x oh*ow) . X_cols^T (oh*ow x ckk)
                T::gemm_nt(c_out, oh * ow, ckk, dy_img, &cols, &mut dw_img);
                dw_img
            })
            .collect();
        let mut dw = Tensor::zeros(weight.shape());
        for part in &partials {
            for (d, p) in dw.data_mut().iter_mut().zip(part.iter()) {
                *d += *p;
            }
        }
        Some(dw)
    } else {
        None
    };

    (dx, dw, dbias)
}

/// Transposed convolution (fractionally strided): `x` `[b, c_in, h, w]`,
/// `weight` `[c_in, c_out, k, k]`, output `[(h-1)*stride - 2*padding + k]²`.
pub fn conv_transpose2d_forward<T: Scalar>(
    x: &Tensor<T>,
    weight: &Tensor<T>,
    bias: &Tensor<T>,
    stride: usize,
    padding: usize,
) -> Result<Tensor<T>> {
    let (b, c_in, h, w) = x.dims4("conv_transpose2d input")?;
    let ws = weight.shape();
    if ws.len() != 4 || ws[2] != ws[3] {
        return Err(Error::shape(
            "conv_transpose2d weight",
            format!("expected [c_in, c_out, k, k], got {:?}", ws),
        ));
    }
    let (wc_in, c_out, k) = (ws[0], ws[1], ws[2]);
    if wc_in != c_in {
        return Err(Error::shape(
            "conv_transpose2d",
            format!("input has {c_in} channels but weight expects {wc_in}"),
        ));
    }
    if bias.shape() != [c_out] {
        return Err(Error::shape(
            "conv_transpose2d bias",
            format!("expected [{c_out}], got {:?}", bias.shape()),
        ));
    }
    if k == 0 || stride == 0 {
        return Err(Error::InvalidArg(format!(
            "conv_transpose2d: kernel and stride must be >= 1 (k={k}, stride={stride})"
        )));
    }
    if (h - 1) * stride + k < 2 * padding + 1 {
        return Err(Error::shape(
            "conv_transpose2d",
            format!("padding {padding} too large for input {h}x{w} with kernel {k}"),
        ));
    }

    let oh = conv_transpose_out_dim(h, k, stride, padding);
    let ow = conv_transpose_out_dim(w, k, stride, padding);
    let okk = c_out * k * k;
    let mut out = Tensor::zeros(&[b, c_out, oh, ow]);

    let x_data = x.data();
    let w_data = weight.data();
    let b_data = bias.data();

    out.data_mut()
        .par_chunks_mut(c_out * oh * ow)
        .zip(x_data.par_chunks(c_in * h * w))
        .for_each(|(out_img, x_img)| {
            // cols = W^T (c_in x okk)^T . X (c_in x h*w)
            let mut cols = vec![T::zero(); okk * h * w];
            T::gemm_tn(c_in, okk, h * w, w_data, x_img, &mut cols);
            // Scatter onto the output plane: the output plays the role of
            // the convolution's input grid.
            col2im_add(&cols, c_out, oh, ow, k, stride, padding, out_img);
            for co in 0..c_out {
                let bias_v = b_data[co];
                for v in out_img[co * oh * ow..(co + 1) * oh * ow].iter_mut() {
                    *v += bias_v;
                }
            }
        });

    Ok(out)
}

/// Gradients of [`conv_transpose2d_forward`].
pub fn conv_transpose2d_backward<T: Scalar>(
    x: &Tensor<T>,
    weight: &Tensor<T>,
    dy: &Tensor<T>,
    stride: usize,
    padding: usize,
    need_dx: bool,
    need_dw: bool,
) -> (Option<Tensor<T>>, Option<Tensor<T>>, Tensor<T>) {
    let (b, c_in, h, w) = x.dims4("conv_transpose2d backward").expect("checked in forward");
    let ws = weight.shape();
    let (c_out, k) = (ws[1], ws[2]);
    let oh = conv_transpose_out_dim(h, k, stride, padding);
    let ow = conv_transpose_out_dim(w, k, stride, padding);
    let okk = c_out * k * k;

    let x_data = x.data();
    let w_data = weight.data();
    let dy_data = dy.data();

    let mut dbias = Tensor::zeros(&[c_out]);
    {
        let db = dbias.data_mut();
        for bi in 0..b {
            let dy_img = &dy_data[bi * c_out * oh * ow..(bi + 1) * c_out * oh * ow];
            for co in 0..c_out {
                let mut acc = 0.0f64;
                for v in &dy_img[co * oh * ow..(co + 1) * oh * ow] {
                    acc += v.to_f64_lossy();
                }
                db[co] += T::from_f64_lossy(acc);
            }
        }
    }

    let dx = if need_dx {
        let mut dx = Tensor::zeros(&[b, c_in, h, w]);
        dx.data_mut()
            .par_chunks_mut(c_in * h * w)
            .zip(dy_data.par_chunks(c_out * oh * ow))
            .for_each(|(dx_img, dy_img)| {
                // dX = W (c_in x okk) . im2col(dY) (okk x h*w)
                let mut cols = vec![T::zero(); okk * h * w];
                im2col(dy_img, c_out, oh, ow, k, stride, padding, &mut cols);
                T::gemm(c_in, okk, h * w, T::one(), w_data, &cols, T::zero(), dx_img);
            });
        Some(dx)
    } else {
        None
    };

    let dw = if need_dw {
        let partials: Vec<Vec<T>> = (0..b)
            .into_par_iter()
            .map(|bi| {
                let x_img = &x_data[bi * c_in * h * w..(bi + 1) * c_in * h * w];
                let dy_img = &dy_data[bi * c_out * oh * ow..(bi + 1) * c_out * oh * ow];
                let mut cols = vec![T::zero(); okk * h * w];
                im2col(dy_img, c_out, oh, ow, k, stride, padding, &mut cols);
                let mut dw_img = vec![T::zero(); c_in * okk];
                // dW = X (c_in x h*w) . cols^T (h*w x okk)
                T::gemm_nt(c_in, h * w, okk, x_img, &cols, &mut dw_img);
                dw_img
            })
            .collect();
        let mut dw = Tensor::zeros(weight.shape());
        for part in &partials {
            for (d, p) in dw.data_mut().iter_mut().zip(part.iter()) {
                *d += *p;
            }
        }
        Some(dw)
    } else {
        None
    };

    (dx, dw, dbias)
}
