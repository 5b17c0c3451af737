//! 2-D convolution as im2col + GEMM.
//!
//! Cross-correlation convention: the kernel is not flipped, so
//! `out[n,f,y,x] = bias[f] + Σ_{c,i,j} in[n,c,y·s+i−p,x·s+j−p] · k[f,c,i,j]`
//! with zero padding outside the input.

use super::{gemm, Scalar, Tensor};
use crate::error::{invalid, Result};

/// Output extent along one axis: `floor((size + 2·pad − k) / stride) + 1`.
pub fn conv_output_size(size: usize, k: usize, stride: usize, pad: usize) -> Option<usize> {
    if stride == 0 || k == 0 || k > size + 2 * pad {
        return None;
    }
    Some((size + 2 * pad - k) / stride + 1)
}

struct Geometry {
    c: usize,
    h: usize,
    w: usize,
    kh: usize,
    kw: usize,
    oh: usize,
    ow: usize,
    stride: usize,
    pad: usize,
}

impl Geometry {
    fn rows(&self) -> usize {
        self.c * self.kh * self.kw
    }

    fn cols(&self) -> usize {
        self.oh * self.ow
    }
}

fn geometry<T: Scalar>(
    input: &Tensor<T>,
    kernel: &Tensor<T>,
    stride: usize,
    pad: usize,
) -> Result<(usize, usize, Geometry)> {
    let (n, c, h, w) = input.dims4("conv input")?;
    let (f, kc, kh, kw) = kernel.dims4("conv kernel")?;
    if kc != c {
        return Err(invalid(format!(
            "conv kernel has {kc} input channels, input has {c}"
        )));
    }
    if stride == 0 {
        return Err(invalid("conv stride must be positive"));
    }
    let oh = conv_output_size(h, kh, stride, pad)
        .ok_or_else(|| invalid(format!("kernel height {kh} exceeds padded input {h}+2·{pad}")))?;
    let ow = conv_output_size(w, kw, stride, pad)
        .ok_or_else(|| invalid(format!("kernel width {kw} exceeds padded input {w}+2·{pad}")))?;
    Ok((
        n,
        f,
        Geometry {
            c,
            h,
            w,
            kh,
            kw,
            oh,
            ow,
            stride,
            pad,
        },
    ))
}

fn im2col<T: Scalar>(x: &[T], g: &Geometry, cols: &mut [T]) {
    let p = g.cols();
    for c in 0..g.c {
        for i in 0..g.kh {
            for j in 0..g.kw {
                let row = (c * g.kh + i) * g.kw + j;
                let dst = &mut cols[row * p..(row + 1) * p];
                for oy in 0..g.oh {
                    let iy = (oy * g.stride + i) as isize - g.pad as isize;
                    let line = &mut dst[oy * g.ow..(oy + 1) * g.ow];
                    if iy < 0 || iy >= g.h as isize {
                        line.fill(T::zero());
                        continue;
                    }
                    let src = &x[(c * g.h + iy as usize) * g.w..][..g.w];
                    for (ox, v) in line.iter_mut().enumerate() {
                        let ix = (ox * g.stride + j) as isize - g.pad as isize;
                        *v = if ix < 0 || ix >= g.w as isize {
                            T::zero()
                        } else {
                            src[ix as usize]
                        };
                    }
                }
            }
        }
    }
}

fn col2im<T: Scalar>(cols: &[T], g: &Geometry, dx: &mut [T]) {
    let p = g.cols();
    for c in 0..g.c {
        for i in 0..g.kh {
            for j in 0..g.kw {
                let row = (c * g.kh + i) * g.kw + j;
                let src = &cols[row * p..(row + 1) * p];
                for oy in 0..g.oh {
                    let iy = (oy * g.stride + i) as isize - g.pad as isize;
                    if iy < 0 || iy >= g.h as isize {
                        continue;
                    }
                    let dst = &mut dx[(c * g.h + iy as usize) * g.w..][..g.w];
                    for ox in 0..g.ow {
                        let ix = (ox * g.stride + j) as isize - g.pad as isize;
                        if ix >= 0 && ix < g.w as isize {
                            dst[ix as usize] += src[oy * g.ow + ox];
                        }
                    }
                }
            }
        }
    }
}

/// Forward convolution `[N,C,H,W] ⊛ [F,C,kH,kW] → [N,F,H',W']`.
pub fn conv2d_forward<T: Scalar>(
    input: &Tensor<T>,
    kernel: &Tensor<T>,
    bias: Option<&Tensor<T>>,
    stride: usize,
    pad: usize,
) -> Result<Tensor<T>> {
    let (n, f, g) = geometry(input, kernel, stride, pad)?;
    if let Some(b) = bias {
        if b.shape() != [f] {
            return Err(invalid(format!("conv bias shape {:?}, expected [{f}]", b.shape())));
        }
    }
    let (r, p) = (g.rows(), g.cols());
    let in_per = g.c * g.h * g.w;
    let mut cols = vec![T::zero(); r * p];
    let mut out = vec![T::zero(); n * f * p];
    for s in 0..n {
        im2col(&input.data()[s * in_per..(s + 1) * in_per], &g, &mut cols);
        let dst = &mut out[s * f * p..(s + 1) * f * p];
        gemm(false, false, f, p, r, kernel.data(), &cols, T::zero(), dst);
        if let Some(b) = bias {
            for (fi, &bv) in b.data().iter().enumerate() {
                dst[fi * p..(fi + 1) * p].iter_mut().for_each(|v| *v += bv);
            }
        }
    }
    Tensor::new(&[n, f, g.oh, g.ow], out)
}

#[derive(Clone, Debug)]
pub struct Conv2dGrads<T> {
    pub input: Tensor<T>,
    pub kernel: Tensor<T>,
    pub bias: Tensor<T>,
}

/// Gradients of [`conv2d_forward`] with respect to input, kernel and bias.
///
/// Per-sample kernel contributions are accumulated in sample order, so the
/// result does not depend on how the batch is scheduled.
pub fn conv2d_backward<T: Scalar>(
    grad_out: &Tensor<T>,
    input: &Tensor<T>,
    kernel: &Tensor<T>,
    stride: usize,
    pad: usize,
) -> Result<Conv2dGrads<T>> {
    let (n, f, g) = geometry(input, kernel, stride, pad)?;
    if grad_out.shape() != [n, f, g.oh, g.ow] {
        return Err(invalid(format!(
            "conv grad_out shape {:?}, forward output is {:?}",
            grad_out.shape(),
            [n, f, g.oh, g.ow]
        )));
    }
    let (r, p) = (g.rows(), g.cols());
    let in_per = g.c * g.h * g.w;
    let mut cols = vec![T::zero(); r * p];
    let mut dcols = vec![T::zero(); r * p];
    let mut dx = vec![T::zero(); input.len()];
    let mut dk = vec![T::zero(); kernel.len()];
    let mut db = vec![T::zero(); f];
    for s in 0..n {
        let go = &grad_out.data()[s * f * p..(s + 1) * f * p];
        im2col(&input.data()[s * in_per..(s + 1) * in_per], &g, &mut cols);
        // dK[f×r] += dY[f×p] · colsᵀ[p×r]
        gemm(false, true, f, r, p, go, &cols, T::one(), &mut dk);
        // dcols[r×p] = Kᵀ[r×f] · dY[f×p]
        gemm(true, false, r, p, f, kernel.data(), go, T::zero(), &mut dcols);
        col2im(&dcols, &g, &mut dx[s * in_per..(s + 1) * in_per]);
        for (fi, acc) in db.iter_mut().enumerate() {
            *acc += go[fi * p..(fi + 1) * p].iter().copied().sum::<T>();
        }
    }
    Ok(Conv2dGrads {
        input: Tensor::new(input.shape(), dx)?,
        kernel: Tensor::new(kernel.shape(), dk)?,
        bias: Tensor::new(&[f], db)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::{finite_diff_check, Rng};

    fn random(shape: &[usize], rng: &mut Rng) -> Tensor<f64> {
        Tensor::from_fn(shape, |_| rng.uniform_range(-1.0, 1.0))
    }

    /// Six nested loops straight from the definition.
    fn brute_force(
        x: &Tensor<f64>,
        k: &Tensor<f64>,
        b: &Tensor<f64>,
        stride: usize,
        pad: usize,
    ) -> Vec<f64> {
        let (n, c, h, w) = x.dims4("x").unwrap();
        let (f, _, kh, kw) = k.dims4("k").unwrap();
        let oh = (h + 2 * pad - kh) / stride + 1;
        let ow = (w + 2 * pad - kw) / stride + 1;
        let mut out = Vec::new();
        for s in 0..n {
            for fi in 0..f {
                for oy in 0..oh {
                    for ox in 0..ow {
                        let mut acc = b.data()[fi];
                        for ci in 0..c {
                            for i in 0..kh {
                                for j in 0..kw {
                                    let iy = (oy * stride + i) as i64 - pad as i64;
                                    let ix = (ox * stride + j) as i64 - pad as i64;
                                    if iy >= 0 && ix >= 0 && (iy as usize) < h && (ix as usize) < w
                                    {
                                        acc += x.data()
                                            [((s * c + ci) * h + iy as usize) * w + ix as usize]
                                            * k.data()[((fi * c + ci) * kh + i) * kw + j];
                                    }
                                }
                            }
                        }
                        out.push(acc);
                    }
                }
            }
        }
        out
    }

    #[test]
    fn identity_kernel_reproduces_input() {
        let x = Tensor::<f32>::from_fn(&[1, 1, 3, 3], |i| i as f32 + 1.0);
        let mut k = Tensor::<f32>::zeros(&[1, 1, 3, 3]);
        k.data_mut()[4] = 1.0;
        let y = conv2d_forward(&x, &k, None, 1, 1).unwrap();
        assert_eq!(y.data(), x.data());
    }

    #[test]
    fn zero_kernel_gives_zero_output() {
        let mut rng = Rng::new(1);
        let x = random(&[2, 3, 5, 5], &mut rng);
        let k = Tensor::zeros(&[4, 3, 3, 3]);
        let b = Tensor::zeros(&[4]);
        let y = conv2d_forward(&x, &k, Some(&b), 1, 1).unwrap();
        assert!(y.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn matches_brute_force_stride2_pad1() {
        let mut rng = Rng::new(2);
        let x = random(&[2, 3, 8, 8], &mut rng);
        let k = random(&[4, 3, 3, 3], &mut rng);
        let b = random(&[4], &mut rng);
        let y = conv2d_forward(&x, &k, Some(&b), 2, 1).unwrap();
        assert_eq!(y.shape(), &[2, 4, 4, 4]);
        for (a, e) in y.data().iter().zip(brute_force(&x, &k, &b, 2, 1)) {
            assert!((a - e).abs() <= 1e-6);
        }
    }

    #[test]
    fn channel_mismatch_is_rejected() {
        let x = Tensor::<f32>::zeros(&[1, 2, 4, 4]);
        let k = Tensor::<f32>::zeros(&[1, 3, 3, 3]);
        assert!(matches!(
            conv2d_forward(&x, &k, None, 1, 0),
            Err(crate::Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn oversized_kernel_is_rejected() {
        let x = Tensor::<f32>::zeros(&[1, 1, 2, 2]);
        let k = Tensor::<f32>::zeros(&[1, 1, 5, 5]);
        assert!(conv2d_forward(&x, &k, None, 1, 1).is_err());
    }

    #[test]
    fn backward_zero_grad_out() {
        let mut rng = Rng::new(3);
        let x = random(&[1, 2, 5, 5], &mut rng);
        let k = random(&[3, 2, 3, 3], &mut rng);
        let go = Tensor::zeros(&[1, 3, 5, 5]);
        let g = conv2d_backward(&go, &x, &k, 1, 1).unwrap();
        assert!(g.input.data().iter().all(|&v| v == 0.0));
        assert!(g.kernel.data().iter().all(|&v| v == 0.0));
        assert!(g.bias.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn backward_rejects_wrong_grad_shape() {
        let x = Tensor::<f64>::zeros(&[1, 1, 4, 4]);
        let k = Tensor::<f64>::zeros(&[1, 1, 2, 2]);
        let go = Tensor::zeros(&[1, 1, 4, 4]);
        assert!(conv2d_backward(&go, &x, &k, 1, 0).is_err());
    }

    fn check_grads(x_shape: &[usize], k_shape: &[usize], stride: usize, pad: usize, seed: u64) {
        let mut rng = Rng::new(seed);
        let x = random(x_shape, &mut rng);
        let k = random(k_shape, &mut rng);
        let b = random(&[k_shape[0]], &mut rng);
        let y = conv2d_forward(&x, &k, Some(&b), stride, pad).unwrap();
        let r = random(y.shape(), &mut rng);
        let g = conv2d_backward(&r, &x, &k, stride, pad).unwrap();
        let dot = |y: &Tensor<f64>| y.data().iter().zip(r.data()).map(|(a, b)| a * b).sum::<f64>();

        let xr = finite_diff_check(
            |p| dot(&conv2d_forward(&Tensor::new(x.shape(), p.to_vec()).unwrap(), &k, Some(&b), stride, pad).unwrap()),
            x.data(),
            g.input.data(),
            1e-5,
        );
        let kr = finite_diff_check(
            |p| dot(&conv2d_forward(&x, &Tensor::new(k.shape(), p.to_vec()).unwrap(), Some(&b), stride, pad).unwrap()),
            k.data(),
            g.kernel.data(),
            1e-5,
        );
        let br = finite_diff_check(
            |p| dot(&conv2d_forward(&x, &k, Some(&Tensor::new(b.shape(), p.to_vec()).unwrap()), stride, pad).unwrap()),
            b.data(),
            g.bias.data(),
            1e-5,
        );
        for rep in [xr, kr, br] {
            assert!(rep.max_rel_error <= 1e-4, "{rep:?}");
        }
    }

    #[test]
    fn backward_matches_finite_differences() {
        check_grads(&[1, 1, 4, 4], &[1, 1, 2, 2], 1, 0, 10);
    }

    #[test]
    fn backward_stride2_matches_finite_differences() {
        check_grads(&[2, 2, 6, 6], &[3, 2, 3, 3], 2, 1, 11);
    }

    #[test]
    fn bias_gradient_is_channel_sum() {
        let mut rng = Rng::new(4);
        let x = random(&[2, 1, 3, 3], &mut rng);
        let k = random(&[2, 1, 3, 3], &mut rng);
        let go = random(&[2, 2, 3, 3], &mut rng);
        let g = conv2d_backward(&go, &x, &k, 1, 1).unwrap();
        for f in 0..2 {
            let s: f64 = (0..2)
                .flat_map(|n| go.data()[(n * 2 + f) * 9..(n * 2 + f + 1) * 9].iter())
                .sum();
            assert!((g.bias.data()[f] - s).abs() < 1e-12);
        }
    }
}
