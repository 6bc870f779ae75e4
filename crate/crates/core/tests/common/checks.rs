//! One seeded instance per call: crate implementation vs. reference oracle.

use edgespeech::arch::{build_network, ArchitectureSpec, Classifier};
use edgespeech::frontend::Fft;
use edgespeech::nn::{
    self, argmax, batchnorm_backward, batchnorm_forward_train, conv2d_backward, conv2d_forward, cross_entropy,
    dense_backward, relu_backward, softmax, BatchNormLayer, ConvBn, ConvLayer, DenseLayer, ResidualBlock,
};
use edgespeech::Tensor;
use num_complex::Complex64;
use rand::Rng;

use super::*;

const EPS: f64 = 1e-5;

fn dims(rng: &mut ChaCha8Rng) -> (usize, usize, usize) {
    (rng.random_range(1..=4), rng.random_range(2..=6), rng.random_range(2..=6))
}

/// Worst relative error of conv2d_backward (input and weights) vs central differences.
pub fn conv_gradcheck(seed: u64) -> f64 {
    let mut r = rng(seed);
    let (cin, h, w) = dims(&mut r);
    let cout = r.random_range(1..=4);
    let k = if r.random_bool(0.8) { 3 } else { 1 };
    let n = r.random_range(1..=2);
    let x = uniform(&mut r, n * cin * h * w, -1.0, 1.0);
    let wt = uniform(&mut r, cout * cin * k * k, -1.0, 1.0);
    let probe = uniform(&mut r, n * cout * h * w, -1.0, 1.0);

    let layer = ConvLayer::new(Tensor::new(vec![cout, cin, k, k], to_f32(&wt)).unwrap()).unwrap();
    let input = Tensor::new(vec![n, cin, h, w], to_f32(&x)).unwrap();
    let g = Tensor::new(vec![n, cout, h, w], to_f32(&probe)).unwrap();
    let (gi, gw) = conv2d_backward(&input, &layer, &g).unwrap();

    let num_x = numeric_grad(&x, |xv| dot(&conv2d(xv, n, cin, h, w, &wt, cout, k, k), &probe));
    let num_w = numeric_grad(&wt, |wv| dot(&conv2d(&x, n, cin, h, w, wv, cout, k, k), &probe));
    max_rel_err(gi.data(), &num_x).max(max_rel_err(gw.data(), &num_w))
}

/// Max abs difference between conv2d_forward and the six-loop reference.
pub fn conv_forward_error(seed: u64) -> f64 {
    let mut r = rng(seed);
    let (cin, h, w) = (2, 5, 5);
    let cout = 3;
    let x = uniform(&mut r, cin * h * w, -1.0, 1.0);
    let wt = uniform(&mut r, cout * cin * 9, -1.0, 1.0);
    let layer = ConvLayer::new(Tensor::new(vec![cout, cin, 3, 3], to_f32(&wt)).unwrap()).unwrap();
    let out = conv2d_forward(&Tensor::new(vec![cin, h, w], to_f32(&x)).unwrap(), &layer).unwrap();
    let want = conv2d(&to_f64(&to_f32(&x)), 1, cin, h, w, &to_f64(&to_f32(&wt)), cout, 3, 3);
    out.data()
        .iter()
        .zip(&want)
        .map(|(&a, &b)| (f64::from(a) - b).abs())
        .fold(0.0, f64::max)
}

pub fn batchnorm_gradcheck(seed: u64) -> f64 {
    let mut r = rng(seed);
    let (c, h, w) = dims(&mut r);
    let n = 2;
    let plane = h * w;
    let x = uniform(&mut r, n * c * plane, -2.0, 2.0);
    let gamma = uniform(&mut r, c, 0.5, 1.5);
    let beta = uniform(&mut r, c, -0.5, 0.5);
    let probe = uniform(&mut r, n * c * plane, -1.0, 1.0);

    let mut bn = BatchNormLayer::new(c);
    bn.gamma = to_f32(&gamma);
    bn.beta = to_f32(&beta);
    let input = Tensor::new(vec![n, c, h, w], to_f32(&x)).unwrap();
    let (_, stats) = batchnorm_forward_train(&input, &mut bn).unwrap();
    let g = Tensor::new(vec![n, c, h, w], to_f32(&probe)).unwrap();
    let (gi, gg, gb) = batchnorm_backward(&input, &bn, &g, &stats).unwrap();

    let loss = |xv: &[f64], gm: &[f64], bt: &[f64]| dot(&batchnorm_train(xv, n, c, plane, gm, bt, EPS), &probe);
    let num_x = numeric_grad(&x, |v| loss(v, &gamma, &beta));
    let num_g = numeric_grad(&gamma, |v| loss(&x, v, &beta));
    let num_b = numeric_grad(&beta, |v| loss(&x, &gamma, v));
    max_rel_err(gi.data(), &num_x)
        .max(max_rel_err(&gg, &num_g))
        .max(max_rel_err(&gb, &num_b))
}

/// Max abs difference of train-mode batch norm against the naive reference.
pub fn batchnorm_forward_error(seed: u64) -> f64 {
    let mut r = rng(seed);
    let (n, c, h, w) = (3, 4, 5, 6);
    let x = to_f64(&to_f32(&uniform(&mut r, n * c * h * w, -3.0, 3.0)));
    let gamma = to_f64(&to_f32(&uniform(&mut r, c, 0.5, 2.0)));
    let beta = to_f64(&to_f32(&uniform(&mut r, c, -1.0, 1.0)));
    let mut bn = BatchNormLayer::new(c);
    bn.gamma = to_f32(&gamma);
    bn.beta = to_f32(&beta);
    let (out, _) = batchnorm_forward_train(&Tensor::new(vec![n, c, h, w], to_f32(&x)).unwrap(), &mut bn).unwrap();
    let want = batchnorm_train(&x, n, c, h * w, &gamma, &beta, EPS);
    out.data()
        .iter()
        .zip(&want)
        .map(|(&a, &b)| (f64::from(a) - b).abs())
        .fold(0.0, f64::max)
}

pub fn relu_gradcheck(seed: u64) -> f64 {
    let mut r = rng(seed);
    let len = r.random_range(4..=64);
    // keep clear of the kink so central differences are exact
    let x: Vec<f64> = (0..len)
        .map(|_| {
            let v: f64 = r.random_range(0.05..2.0);
            if r.random_bool(0.5) { v } else { -v }
        })
        .collect();
    let probe = uniform(&mut r, len, -1.0, 1.0);
    let g = relu_backward(
        &Tensor::new(vec![len], to_f32(&x)).unwrap(),
        &Tensor::new(vec![len], to_f32(&probe)).unwrap(),
    )
    .unwrap();
    let num = numeric_grad(&x, |v| dot(&relu(v), &probe));
    max_rel_err(g.data(), &num)
}

pub fn dense_gradcheck(seed: u64) -> f64 {
    let mut r = rng(seed);
    let (n, fin, fout) = (r.random_range(1..=3), r.random_range(1..=45), r.random_range(1..=12));
    let x = uniform(&mut r, n * fin, -1.0, 1.0);
    let wt = uniform(&mut r, fout * fin, -1.0, 1.0);
    let probe = uniform(&mut r, n * fout, -1.0, 1.0);
    let layer = DenseLayer::new(Tensor::new(vec![fout, fin], to_f32(&wt)).unwrap()).unwrap();
    let (gi, gw) = dense_backward(
        &Tensor::new(vec![n, fin], to_f32(&x)).unwrap(),
        &layer,
        &Tensor::new(vec![n, fout], to_f32(&probe)).unwrap(),
    )
    .unwrap();
    let num_x = numeric_grad(&x, |v| dot(&dense(v, n, fin, &wt, fout), &probe));
    let num_w = numeric_grad(&wt, |v| dot(&dense(&x, n, fin, v, fout), &probe));
    max_rel_err(gi.data(), &num_x).max(max_rel_err(gw.data(), &num_w))
}

pub fn softmax_ce_gradcheck(seed: u64) -> f64 {
    let mut r = rng(seed);
    let k = r.random_range(2..=12);
    let logits = uniform(&mut r, k, -4.0, 4.0);
    let label = r.random_range(0..k);
    let probs = softmax(&Tensor::new(vec![k], to_f32(&logits)).unwrap()).unwrap();
    let (loss, grad) = cross_entropy(probs.data(), label).unwrap();
    let num = numeric_grad(&logits, |v| super::cross_entropy(v, label));
    let loss_err = rel_err(f64::from(loss), super::cross_entropy(&logits, label), REL_FLOOR);
    max_rel_err(&grad, &num).max(loss_err)
}

fn ref_block(r: &mut ChaCha8Rng) -> (RefBlock, usize, usize) {
    let width = r.random_range(2..=4);
    let narrow = r.random_range(1..width);
    let (h, w) = (r.random_range(3..=6), r.random_range(3..=6));
    let block = RefBlock {
        width,
        narrow,
        wa: uniform(r, narrow * width * 9, -0.6, 0.6),
        ga: uniform(r, narrow, 0.5, 1.5),
        ba: uniform(r, narrow, -0.5, 0.5),
        wb: uniform(r, width * narrow * 9, -0.6, 0.6),
        gb: uniform(r, width, 0.5, 1.5),
        bb: uniform(r, width, -0.5, 0.5),
    };
    (block, h, w)
}

fn unit(wt: &[f64], cout: usize, cin: usize, gamma: &[f64], beta: &[f64]) -> ConvBn {
    let mut bn = BatchNormLayer::new(cout);
    bn.gamma = to_f32(gamma);
    bn.beta = to_f32(beta);
    ConvBn::new(ConvLayer::new(Tensor::new(vec![cout, cin, 3, 3], to_f32(wt)).unwrap()).unwrap(), bn).unwrap()
}

/// Residual block composite: gradients w.r.t. input and all six parameter groups.
/// Instances with a pre-activation within 0.05 of the ReLU kink are redrawn.
pub fn residual_gradcheck(seed: u64) -> f64 {
    let mut r = rng(seed);
    let n = 2;
    let (p, x, h, w) = loop {
        let (p, h, w) = ref_block(&mut r);
        let x = to_f64(&to_f32(&uniform(&mut r, n * p.width * h * w, -1.0, 1.0)));
        let p = RefBlock {
            wa: to_f64(&to_f32(&p.wa)),
            ga: to_f64(&to_f32(&p.ga)),
            ba: to_f64(&to_f32(&p.ba)),
            wb: to_f64(&to_f32(&p.wb)),
            gb: to_f64(&to_f32(&p.gb)),
            bb: to_f64(&to_f32(&p.bb)),
            ..p
        };
        if residual_train(&x, n, h, w, &p, EPS).1 > 0.05 {
            break (p, x, h, w);
        }
    };
    let probe = uniform(&mut r, x.len(), -1.0, 1.0);

    let mut block = ResidualBlock::new(
        unit(&p.wa, p.narrow, p.width, &p.ga, &p.ba),
        unit(&p.wb, p.width, p.narrow, &p.gb, &p.bb),
    )
    .unwrap();
    let input = Tensor::new(vec![n, p.width, h, w], to_f32(&x)).unwrap();
    let (_, cache) = block.forward_train(&input).unwrap();
    let (gi, grads) = block
        .backward(&cache, &Tensor::new(vec![n, p.width, h, w], to_f32(&probe)).unwrap())
        .unwrap();

    let loss = |q: &RefBlock, xv: &[f64]| dot(&residual_train(xv, n, h, w, q, EPS).0, &probe);
    let mut worst = max_rel_err(gi.data(), &numeric_grad(&x, |v| loss(&p, v)));
    let fields: [(fn(&mut RefBlock) -> &mut Vec<f64>, &[f32]); 6] = [
        (|q| &mut q.wa, grads.a.weights.data()),
        (|q| &mut q.ga, &grads.a.gamma),
        (|q| &mut q.ba, &grads.a.beta),
        (|q| &mut q.wb, grads.b.weights.data()),
        (|q| &mut q.gb, &grads.b.gamma),
        (|q| &mut q.bb, &grads.b.beta),
    ];
    for (field, analytic) in fields {
        let base = field(&mut p.clone()).clone();
        let num = numeric_grad(&base, |v| {
            let mut q = p.clone();
            *field(&mut q) = v.to_vec();
            loss(&q, &x)
        });
        worst = worst.max(max_rel_err(analytic, &num));
    }
    worst
}

/// Random batch-norm statistics so that folding is not a no-op.
pub fn randomize_norms(net: &mut edgespeech::arch::Network, seed: u64) {
    let mut r = rng(seed);
    for stage in net.stages_mut() {
        let units: Vec<&mut ConvBn> = match stage {
            edgespeech::arch::Stage::ConvBnRelu { unit, .. } => vec![unit],
            edgespeech::arch::Stage::Residual { block, .. } => vec![&mut block.a, &mut block.b],
            _ => vec![],
        };
        for u in units {
            let c = u.bn.channels();
            u.bn.gamma = to_f32(&uniform(&mut r, c, 0.5, 1.5));
            u.bn.beta = to_f32(&uniform(&mut r, c, -0.5, 0.5));
            u.bn.running_mean = to_f32(&uniform(&mut r, c, -0.5, 0.5));
            u.bn.running_var = to_f32(&uniform(&mut r, c, 0.5, 2.0));
        }
    }
}

/// Folded vs unfolded probabilities on one random input:
/// `(max abs difference, argmax agrees)`.
pub fn fold_equivalence(spec: &ArchitectureSpec, seed: u64) -> (f64, bool) {
    let mut net = build_network(spec, seed).unwrap();
    randomize_norms(&mut net, seed ^ 0x5eed);
    let folded = net.fold().unwrap();
    let mut r = rng(seed.wrapping_add(1000));
    let [c, h, w] = spec.input;
    let input = Tensor::new(vec![1, c, h, w], to_f32(&uniform(&mut r, c * h * w, -3.0, 3.0))).unwrap();
    let a = net.predict_proba(&input).unwrap();
    let b = folded.predict_proba(&input).unwrap();
    let diff = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(x, y)| f64::from((x - y).abs()))
        .fold(0.0, f64::max);
    (diff, argmax(a.data()) == argmax(b.data()))
}

/// Worst per-bin absolute error of the FFT against the naive DFT.
pub fn fft_error(size: usize, seed: u64) -> f64 {
    let mut r = rng(seed);
    let x = uniform(&mut r, size, -1.0, 1.0);
    let mut buf: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    Fft::new(size).unwrap().process(&mut buf);
    dft(&x)
        .iter()
        .zip(&buf)
        .map(|(&(re, im), c)| (c.re - re).abs().max((c.im - im).abs()))
        .fold(0.0, f64::max)
}

pub fn pool_gradcheck(seed: u64) -> f64 {
    let mut r = rng(seed);
    let (c, h, w) = dims(&mut r);
    let (ph, pw) = (r.random_range(1..=h), r.random_range(1..=w));
    let x = uniform(&mut r, c * h * w, -1.0, 1.0);
    let (oh, ow) = (h.div_ceil(ph), w.div_ceil(pw));
    let probe = uniform(&mut r, c * oh * ow, -1.0, 1.0);
    let g = nn::avg_pool2d_backward(&[c, h, w], ph, pw, &Tensor::new(vec![c, oh, ow], to_f32(&probe)).unwrap()).unwrap();
    let num = numeric_grad(&x, |v| dot(&avg_pool(v, c, h, w, ph, pw), &probe));
    let gprobe = uniform(&mut r, c, -1.0, 1.0);
    let gg = nn::global_avg_pool_backward(&[c, h, w], &Tensor::new(vec![c], to_f32(&gprobe)).unwrap()).unwrap();
    let gnum = numeric_grad(&x, |v| dot(&global_pool(v, c, h * w), &gprobe));
    max_rel_err(g.data(), &num).max(max_rel_err(gg.data(), &gnum))
}

/// Random small residual network: stem, 1-3 bottleneck blocks, optional pool, head.
pub fn random_spec(seed: u64) -> ArchitectureSpec {
    use edgespeech::arch::LayerSpec;
    let mut r = rng(seed);
    let width = r.random_range(2..=8);
    let mut layers = vec![LayerSpec::conv(3, 3, width)];
    if r.random_bool(0.5) {
        layers.push(LayerSpec::avg_pool(2, 2));
    }
    for _ in 0..r.random_range(1..=3) {
        layers.push(LayerSpec::conv(3, 3, r.random_range(1..width)));
        layers.push(LayerSpec::conv(3, 3, width));
    }
    layers.push(LayerSpec::global_pool());
    layers.push(LayerSpec::dense(r.random_range(2..=12)));
    layers.push(LayerSpec::softmax());
    ArchitectureSpec {
        name: format!("random-{seed}"),
        input: [1, r.random_range(4..=12), r.random_range(4..=10)],
        layers,
        reported_total: None,
    }
}
