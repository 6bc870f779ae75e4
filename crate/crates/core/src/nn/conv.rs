//! Stride-1, zero same-padded 2-D cross-correlation without bias.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Debug, Clone, PartialEq)]
pub struct ConvLayer {
    pub kernel_h: usize,
    pub kernel_w: usize,
    pub in_channels: usize,
    pub out_channels: usize,
    /// `[out_channels, in_channels, kernel_h, kernel_w]`
    pub weights: Tensor,
}

impl ConvLayer {
    pub fn new(weights: Tensor) -> Result<Self> {
        match *weights.shape() {
            [out_channels, in_channels, kernel_h, kernel_w] => Ok(ConvLayer {
                kernel_h,
                kernel_w,
                in_channels,
                out_channels,
                weights,
            }),
            _ => Err(Error::ShapeMismatch(format!(
                "conv weights must be [n, in, m, r], got {:?}",
                weights.shape()
            ))),
        }
    }

    pub fn zeros(in_channels: usize, out_channels: usize, kernel_h: usize, kernel_w: usize) -> Self {
        ConvLayer {
            kernel_h,
            kernel_w,
            in_channels,
            out_channels,
            weights: Tensor::zeros(&[out_channels, in_channels, kernel_h, kernel_w]),
        }
    }

    /// m · r · in · n
    pub fn param_count(&self) -> u64 {
        (self.kernel_h * self.kernel_w * self.in_channels * self.out_channels) as u64
    }

    fn kernel_offsets(&self) -> impl Iterator<Item = (usize, isize, isize)> + '_ {
        let (ph, pw) = (same_pad(self.kernel_h), same_pad(self.kernel_w));
        (0..self.kernel_h).flat_map(move |ky| {
            (0..self.kernel_w).map(move |kx| {
                (
                    ky * self.kernel_w + kx,
                    ky as isize - ph as isize,
                    kx as isize - pw as isize,
                )
            })
        })
    }

    fn check_input(&self, input: &Tensor) -> Result<(usize, usize, usize, usize)> {
        let dims = input.dims4()?;
        if dims.1 != self.in_channels {
            return Err(Error::ChannelMismatch {
                expected: self.in_channels,
                found: dims.1,
            });
        }
        Ok(dims)
    }
}

/// Leading zero padding for a same-size output; odd kernels are symmetric.
fn same_pad(k: usize) -> usize {
    (k - 1) / 2
}

fn valid_range(len: usize, shift: isize) -> (usize, usize) {
    let lo = (-shift).max(0) as usize;
    let hi = (len as isize - shift).clamp(0, len as isize) as usize;
    (lo, hi.max(lo))
}

/// Unrolls one `[C_in, H, W]` sample into `[C_in * K, H * W]` columns, where
/// row `ci * K + k` holds the input shifted by kernel offset `k` (zeros off the edge).
fn im2col(src: &[f32], c_in: usize, h: usize, w: usize, offsets: &[(usize, isize, isize)]) -> Vec<f32> {
    let plane = h * w;
    let mut col = Vec::with_capacity(c_in * offsets.len() * plane);
    for ci in 0..c_in {
        let s = &src[ci * plane..][..plane];
        for &(_, dy, dx) in offsets {
            let (y0, y1) = valid_range(h, dy);
            let (x0, x1) = valid_range(w, dx);
            let row_end = col.len() + plane;
            col.resize(col.len() + y0 * w, 0.0);
            for y in y0..y1 {
                let sy = (y as isize + dy) as usize;
                let s0 = (x0 as isize + dx) as usize;
                col.resize(col.len() + x0, 0.0);
                col.extend_from_slice(&s[sy * w + s0..sy * w + s0 + (x1 - x0)]);
                col.resize(col.len() + (w - x1), 0.0);
            }
            col.resize(row_end, 0.0);
        }
    }
    col
}

/// Adjoint of [`im2col`]: scatters columns back onto `[C_in, H, W]`, accumulating.
fn col2im(col: &[f32], c_in: usize, h: usize, w: usize, offsets: &[(usize, isize, isize)], dst: &mut [f32]) {
    let plane = h * w;
    let kernel = offsets.len();
    for ci in 0..c_in {
        let d = &mut dst[ci * plane..][..plane];
        for &(k, dy, dx) in offsets {
            let row = &col[(ci * kernel + k) * plane..][..plane];
            let (y0, y1) = valid_range(h, dy);
            let (x0, x1) = valid_range(w, dx);
            for y in y0..y1 {
                let sy = (y as isize + dy) as usize;
                let s0 = (x0 as isize + dx) as usize;
                let target = &mut d[sy * w + s0..sy * w + s0 + (x1 - x0)];
                for (t, v) in target.iter_mut().zip(&row[y * w + x0..y * w + x1]) {
                    *t += v;
                }
            }
        }
    }
}

/// Row/column strides of a matrix operand.
#[derive(Clone, Copy)]
struct Strides(isize, isize);

/// `c = a · b + beta · c` with `a: m × k`, `b: k × n`, `c: m × n` row-major.
#[allow(clippy::too_many_arguments)]
fn gemm(m: usize, k: usize, n: usize, a: &[f32], sa: Strides, b: &[f32], sb: Strides, c: &mut [f32], beta: f32) {
    let max_index = |rows: usize, cols: usize, s: Strides| {
        (rows.saturating_sub(1) as isize * s.0 + cols.saturating_sub(1) as isize * s.1) as usize
    };
    assert!(m == 0 || k == 0 || max_index(m, k, sa) < a.len());
    assert!(k == 0 || n == 0 || max_index(k, n, sb) < b.len());
    assert!(c.len() >= m * n);
    // SAFETY: the asserts bound every index the kernel touches.
    unsafe {
        matrixmultiply::sgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            sa.0,
            sa.1,
            b.as_ptr(),
            sb.0,
            sb.1,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

pub(crate) fn conv_forward_with_bias(
    input: &Tensor,
    layer: &ConvLayer,
    bias: Option<&[f32]>,
) -> Result<Tensor> {
    let (n, c_in, h, w) = layer.check_input(input)?;
    let plane = h * w;
    let c_out = layer.out_channels;
    let rows = c_in * layer.kernel_h * layer.kernel_w;
    let offsets: Vec<_> = layer.kernel_offsets().collect();
    let weights = layer.weights.data();
    let src = input.data();
    let mut out = vec![0.0f32; n * c_out * plane];
    out.par_chunks_mut(c_out * plane).enumerate().for_each(|(b, dst)| {
        let col = im2col(&src[b * c_in * plane..][..c_in * plane], c_in, h, w, &offsets);
        let beta = match bias {
            Some(bias) => {
                for (co, d) in dst.chunks_mut(plane).enumerate() {
                    d.fill(bias[co]);
                }
                1.0
            }
            None => 0.0,
        };
        gemm(c_out, rows, plane, weights, Strides(rows as isize, 1), &col, Strides(plane as isize, 1), dst, beta);
    });
    let shape = if input.rank() == 3 { vec![c_out, h, w] } else { vec![n, c_out, h, w] };
    Ok(Tensor::from_parts(shape, out))
}

/// Forward pass on `[C_in, H, W]` or `[N, C_in, H, W]`; output keeps the input's rank.
pub fn conv2d_forward(input: &Tensor, layer: &ConvLayer) -> Result<Tensor> {
    conv_forward_with_bias(input, layer, None)
}

/// Returns `(grad_input, grad_weights)` for the forward pass above.
pub fn conv2d_backward(input: &Tensor, layer: &ConvLayer, grad_out: &Tensor) -> Result<(Tensor, Tensor)> {
    let (n, c_in, h, w) = layer.check_input(input)?;
    let c_out = layer.out_channels;
    let (gn, gc, gh, gw) = grad_out.dims4()?;
    if gc != c_out {
        return Err(Error::ChannelMismatch {
            expected: c_out,
            found: gc,
        });
    }
    if (gn, gh, gw) != (n, h, w) {
        return Err(Error::ShapeMismatch(format!(
            "grad_out {:?} does not match conv output for input {:?}",
            grad_out.shape(),
            input.shape()
        )));
    }
    let plane = h * w;
    let rows = c_in * layer.kernel_h * layer.kernel_w;
    let offsets: Vec<_> = layer.kernel_offsets().collect();
    let weights = layer.weights.data();
    let src = input.data();
    let go = grad_out.data();

    let mut grad_in = vec![0.0f32; n * c_in * plane];
    // per-sample weight gradients, summed afterwards in sample order
    let partial_w: Vec<Vec<f32>> = grad_in
        .par_chunks_mut(c_in * plane)
        .enumerate()
        .map(|(b, dst)| {
            let g = &go[b * c_out * plane..][..c_out * plane];
            let mut col = im2col(&src[b * c_in * plane..][..c_in * plane], c_in, h, w, &offsets);
            let mut gw_b = vec![0.0f32; c_out * rows];
            gemm(c_out, plane, rows, g, Strides(plane as isize, 1), &col, Strides(1, plane as isize), &mut gw_b, 0.0);
            gemm(rows, c_out, plane, weights, Strides(1, rows as isize), g, Strides(plane as isize, 1), &mut col, 0.0);
            col2im(&col, c_in, h, w, &offsets, dst);
            gw_b
        })
        .collect();
    let mut grad_w = vec![0.0f32; c_out * rows];
    for part in &partial_w {
        for (a, b) in grad_w.iter_mut().zip(part) {
            *a += b;
        }
    }

    Ok((
        input.with_shape_of(grad_in),
        Tensor::from_parts(layer.weights.shape().to_vec(), grad_w),
    ))
}
