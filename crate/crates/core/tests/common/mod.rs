//! Naive double-precision reference implementations used as test oracles.
//! Nothing in this file calls into the crate's numeric code; `checks` pairs
//! these references with the crate's implementations.

#![allow(dead_code)]

pub mod checks;

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform(rng: &mut ChaCha8Rng, len: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..len).map(|_| rng.random_range(lo..hi)).collect()
}

pub fn to_f32(v: &[f64]) -> Vec<f32> {
    v.iter().map(|&x| x as f32).collect()
}

pub fn to_f64(v: &[f32]) -> Vec<f64> {
    v.iter().map(|&x| f64::from(x)).collect()
}

/// `|a - n| / max(|a|, |n|, floor)`
pub fn rel_err(analytic: f64, numeric: f64, floor: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor)
}

pub const FD_STEP: f64 = 1e-3;
/// Magnitude below which relative error is measured against this floor.
pub const REL_FLOOR: f64 = 1e-2;

/// Central finite differences of scalar `f` at `x`.
pub fn numeric_grad(x: &[f64], mut f: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
    let mut work = x.to_vec();
    (0..x.len())
        .map(|i| {
            let orig = work[i];
            work[i] = orig + FD_STEP;
            let plus = f(&work);
            work[i] = orig - FD_STEP;
            let minus = f(&work);
            work[i] = orig;
            (plus - minus) / (2.0 * FD_STEP)
        })
        .collect()
}

pub fn max_rel_err(analytic: &[f32], numeric: &[f64]) -> f64 {
    assert_eq!(analytic.len(), numeric.len());
    analytic
        .iter()
        .zip(numeric)
        .map(|(&a, &n)| rel_err(f64::from(a), n, REL_FLOOR))
        .fold(0.0, f64::max)
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Six nested loops, zero same-padding, cross-correlation.
pub fn conv2d(x: &[f64], n: usize, cin: usize, h: usize, w: usize, wt: &[f64], cout: usize, kh: usize, kw: usize) -> Vec<f64> {
    let (ph, pw) = ((kh - 1) / 2, (kw - 1) / 2);
    let mut out = vec![0.0; n * cout * h * w];
    for b in 0..n {
        for co in 0..cout {
            for oy in 0..h {
                for ox in 0..w {
                    let mut acc = 0.0;
                    for ci in 0..cin {
                        for ky in 0..kh {
                            for kx in 0..kw {
                                let iy = oy as isize + ky as isize - ph as isize;
                                let ix = ox as isize + kx as isize - pw as isize;
                                if iy < 0 || ix < 0 || iy >= h as isize || ix >= w as isize {
                                    continue;
                                }
                                acc += x[((b * cin + ci) * h + iy as usize) * w + ix as usize]
                                    * wt[((co * cin + ci) * kh + ky) * kw + kx];
                            }
                        }
                    }
                    out[((b * cout + co) * h + oy) * w + ox] = acc;
                }
            }
        }
    }
    out
}

/// Per-channel mean and biased variance over (batch, H, W).
pub fn channel_mean_var(x: &[f64], n: usize, c: usize, plane: usize) -> (Vec<f64>, Vec<f64>) {
    let count = (n * plane) as f64;
    let mut mean = vec![0.0; c];
    let mut var = vec![0.0; c];
    for ch in 0..c {
        for b in 0..n {
            for i in 0..plane {
                mean[ch] += x[(b * c + ch) * plane + i];
            }
        }
        mean[ch] /= count;
        for b in 0..n {
            for i in 0..plane {
                var[ch] += (x[(b * c + ch) * plane + i] - mean[ch]).powi(2);
            }
        }
        var[ch] /= count;
    }
    (mean, var)
}

pub fn batchnorm_with(x: &[f64], n: usize, c: usize, plane: usize, mean: &[f64], var: &[f64], gamma: &[f64], beta: &[f64], eps: f64) -> Vec<f64> {
    let mut out = x.to_vec();
    for b in 0..n {
        for ch in 0..c {
            for i in 0..plane {
                let k = (b * c + ch) * plane + i;
                out[k] = gamma[ch] * (x[k] - mean[ch]) / (var[ch] + eps).sqrt() + beta[ch];
            }
        }
    }
    out
}

pub fn batchnorm_train(x: &[f64], n: usize, c: usize, plane: usize, gamma: &[f64], beta: &[f64], eps: f64) -> Vec<f64> {
    let (mean, var) = channel_mean_var(x, n, c, plane);
    batchnorm_with(x, n, c, plane, &mean, &var, gamma, beta, eps)
}

pub fn relu(x: &[f64]) -> Vec<f64> {
    x.iter().map(|&v| v.max(0.0)).collect()
}

pub fn dense(x: &[f64], n: usize, fin: usize, wt: &[f64], fout: usize) -> Vec<f64> {
    let mut out = vec![0.0; n * fout];
    for b in 0..n {
        for o in 0..fout {
            for i in 0..fin {
                out[b * fout + o] += wt[o * fin + i] * x[b * fin + i];
            }
        }
    }
    out
}

pub fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = logits.iter().map(|&v| (v - max).exp()).sum::<f64>().ln() + max;
    logits.iter().map(|&v| v - lse).collect()
}

pub fn cross_entropy(logits: &[f64], label: usize) -> f64 {
    -log_softmax(logits)[label]
}

pub fn avg_pool(x: &[f64], planes: usize, h: usize, w: usize, ph: usize, pw: usize) -> Vec<f64> {
    let (oh, ow) = (h.div_ceil(ph), w.div_ceil(pw));
    let mut out = Vec::with_capacity(planes * oh * ow);
    for p in 0..planes {
        for oy in 0..oh {
            for ox in 0..ow {
                let (mut sum, mut count) = (0.0, 0usize);
                for y in oy * ph..((oy + 1) * ph).min(h) {
                    for xx in ox * pw..((ox + 1) * pw).min(w) {
                        sum += x[(p * h + y) * w + xx];
                        count += 1;
                    }
                }
                out.push(sum / count as f64);
            }
        }
    }
    out
}

pub fn global_pool(x: &[f64], planes: usize, plane: usize) -> Vec<f64> {
    (0..planes)
        .map(|p| x[p * plane..(p + 1) * plane].iter().sum::<f64>() / plane as f64)
        .collect()
}

/// Parameters of one bottleneck block in f64.
#[derive(Clone)]
pub struct RefBlock {
    pub width: usize,
    pub narrow: usize,
    pub wa: Vec<f64>,
    pub ga: Vec<f64>,
    pub ba: Vec<f64>,
    pub wb: Vec<f64>,
    pub gb: Vec<f64>,
    pub bb: Vec<f64>,
}

/// relu(bn_b(conv_b(relu(bn_a(conv_a(x))))) + x) with batch statistics.
/// Also returns the smallest |pre-activation| seen, for kink avoidance.
pub fn residual_train(x: &[f64], n: usize, h: usize, w: usize, p: &RefBlock, eps: f64) -> (Vec<f64>, f64) {
    let plane = h * w;
    let za = batchnorm_train(&conv2d(x, n, p.width, h, w, &p.wa, p.narrow, 3, 3), n, p.narrow, plane, &p.ga, &p.ba, eps);
    let ya = relu(&za);
    let zb = batchnorm_train(&conv2d(&ya, n, p.narrow, h, w, &p.wb, p.width, 3, 3), n, p.width, plane, &p.gb, &p.bb, eps);
    let sum: Vec<f64> = zb.iter().zip(x).map(|(a, b)| a + b).collect();
    let min_abs = za.iter().chain(&sum).map(|v| v.abs()).fold(f64::INFINITY, f64::min);
    (relu(&sum), min_abs)
}

/// Naive O(n²) DFT.
pub fn dft(x: &[f64]) -> Vec<(f64, f64)> {
    let n = x.len();
    (0..n)
        .map(|k| {
            x.iter().enumerate().fold((0.0, 0.0), |(re, im), (t, &v)| {
                let ang = -2.0 * PI * (k * t) as f64 / n as f64;
                (re + v * ang.cos(), im + v * ang.sin())
            })
        })
        .collect()
}

/// High-pass then low-pass 2nd-order Butterworth sections simulated sample by sample
/// in direct form I, from textbook bilinear-transform Butterworth formulas.
pub fn butterworth_cascade(x: &[f64], fs: f64, hp_hz: f64, lp_hz: f64) -> Vec<f64> {
    fn section(x: &[f64], b: [f64; 3], a: [f64; 3]) -> Vec<f64> {
        let mut y = vec![0.0; x.len()];
        for i in 0..x.len() {
            let xm1 = if i >= 1 { x[i - 1] } else { 0.0 };
            let xm2 = if i >= 2 { x[i - 2] } else { 0.0 };
            let ym1 = if i >= 1 { y[i - 1] } else { 0.0 };
            let ym2 = if i >= 2 { y[i - 2] } else { 0.0 };
            y[i] = (b[0] * x[i] + b[1] * xm1 + b[2] * xm2 - a[1] * ym1 - a[2] * ym2) / a[0];
        }
        y
    }
    // analog prototype 1 / (s^2 + sqrt2 s + 1) through s = K (z - 1) / (z + 1)
    let sqrt2 = 2f64.sqrt();
    let k_hp = 1.0 / (PI * hp_hz / fs).tan();
    let k_lp = 1.0 / (PI * lp_hz / fs).tan();
    let den = |k: f64| [k * k + sqrt2 * k + 1.0, 2.0 - 2.0 * k * k, k * k - sqrt2 * k + 1.0];
    let hp = section(x, [k_hp * k_hp, -2.0 * k_hp * k_hp, k_hp * k_hp], den(k_hp));
    section(&hp, [1.0, 2.0, 1.0], den(k_lp))
}

pub fn rms(x: &[f64]) -> f64 {
    (x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64).sqrt()
}

pub fn sine(freq: f64, len: usize, fs: f64) -> Vec<f64> {
    (0..len).map(|i| (2.0 * PI * freq * i as f64 / fs).sin()).collect()
}
