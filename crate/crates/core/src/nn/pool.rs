use crate::error::{Error, Result};
use crate::tensor::Tensor;

fn windows(len: usize, size: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..len.div_ceil(size)).map(move |i| (i * size, ((i + 1) * size).min(len)))
}

/// Output spatial dims of a non-overlapping pool; a trailing partial window counts.
pub fn pooled_dims(h: usize, w: usize, pool_h: usize, pool_w: usize) -> (usize, usize) {
    (h.div_ceil(pool_h), w.div_ceil(pool_w))
}

fn dims4_of(shape: &[usize]) -> Result<(usize, usize, usize, usize)> {
    match *shape {
        [c, h, w] => Ok((1, c, h, w)),
        [n, c, h, w] => Ok((n, c, h, w)),
        _ => Err(Error::ShapeMismatch(format!("expected [C, H, W] or [N, C, H, W], got {shape:?}"))),
    }
}

fn check_pool(h: usize, w: usize, pool_h: usize, pool_w: usize) -> Result<()> {
    if pool_h == 0 || pool_w == 0 || pool_h > h || pool_w > w {
        return Err(Error::InvalidShape(format!(
            "pool {pool_h}×{pool_w} does not fit spatial dims {h}×{w}"
        )));
    }
    Ok(())
}

/// Non-overlapping average pooling (stride == window). Trailing rows/cols that
/// do not fill a window are averaged over the elements actually present.
pub fn avg_pool2d(input: &Tensor, pool_h: usize, pool_w: usize) -> Result<Tensor> {
    let (n, c, h, w) = input.dims4()?;
    check_pool(h, w, pool_h, pool_w)?;
    let (oh, ow) = pooled_dims(h, w, pool_h, pool_w);
    let mut out = Vec::with_capacity(n * c * oh * ow);
    for plane in input.data().chunks_exact(h * w) {
        for (y0, y1) in windows(h, pool_h) {
            for (x0, x1) in windows(w, pool_w) {
                let mut sum = 0.0f32;
                for y in y0..y1 {
                    sum += plane[y * w + x0..y * w + x1].iter().sum::<f32>();
                }
                out.push(sum / ((y1 - y0) * (x1 - x0)) as f32);
            }
        }
    }
    let shape = if input.rank() == 3 { vec![c, oh, ow] } else { vec![n, c, oh, ow] };
    Ok(Tensor::from_parts(shape, out))
}

/// `input_shape` is the shape of the forward input.
pub fn avg_pool2d_backward(input_shape: &[usize], pool_h: usize, pool_w: usize, grad_out: &Tensor) -> Result<Tensor> {
    let (n, c, h, w) = dims4_of(input_shape)?;
    check_pool(h, w, pool_h, pool_w)?;
    let (oh, ow) = pooled_dims(h, w, pool_h, pool_w);
    if grad_out.len() != n * c * oh * ow {
        return Err(Error::ShapeMismatch(format!(
            "grad_out {:?} does not match pooled output of {input_shape:?}",
            grad_out.shape(),
        )));
    }
    let mut grad_in = vec![0.0f32; n * c * h * w];
    for (dst, g) in grad_in.chunks_exact_mut(h * w).zip(grad_out.data().chunks_exact(oh * ow)) {
        let mut gi = g.iter();
        for (y0, y1) in windows(h, pool_h) {
            for (x0, x1) in windows(w, pool_w) {
                let share = gi.next().unwrap() / ((y1 - y0) * (x1 - x0)) as f32;
                for y in y0..y1 {
                    dst[y * w + x0..y * w + x1].iter_mut().for_each(|v| *v = share);
                }
            }
        }
    }
    Ok(Tensor::from_parts(input_shape.to_vec(), grad_in))
}

/// Per-channel mean over all spatial positions: `[C, H, W] -> [C]`, `[N, C, H, W] -> [N, C]`.
pub fn global_avg_pool(input: &Tensor) -> Result<Tensor> {
    let (n, c, h, w) = input.dims4()?;
    let plane = h * w;
    let out = input
        .data()
        .chunks_exact(plane)
        .map(|p| p.iter().sum::<f32>() / plane as f32)
        .collect();
    let shape = if input.rank() == 3 { vec![c] } else { vec![n, c] };
    Ok(Tensor::from_parts(shape, out))
}

pub fn global_avg_pool_backward(input_shape: &[usize], grad_out: &Tensor) -> Result<Tensor> {
    let (n, c, h, w) = dims4_of(input_shape)?;
    if grad_out.len() != n * c {
        return Err(Error::ShapeMismatch(format!(
            "grad_out {:?} does not match {n}×{c}",
            grad_out.shape()
        )));
    }
    let plane = h * w;
    let mut grad_in = vec![0.0f32; n * c * plane];
    for (dst, &g) in grad_in.chunks_exact_mut(plane).zip(grad_out.data()) {
        dst.fill(g / plane as f32);
    }
    Ok(Tensor::from_parts(input_shape.to_vec(), grad_in))
}
