#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sicnet::cxnn::{CxArray, Graph};
use sicnet::models::{Model, ModelKind, ModelSpec};
use sicnet::C64;

pub fn random_signal(rng: &mut ChaCha8Rng, n: usize) -> Vec<C64> {
    (0..n)
        .map(|_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect()
}

/// Input and a nonlinear target, both `[signals, time, 1]`.
pub fn synthetic_batch(signals: usize, time: usize, seed: u64) -> (CxArray, CxArray) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = random_signal(&mut rng, signals * time);
    let y: Vec<C64> = x
        .iter()
        .map(|v| v * (1.5 * v.norm()).atan() / v.norm().max(1e-12) + C64::new(0.05, -0.02))
        .collect();
    (
        CxArray::signals(x, signals, time, 1).unwrap(),
        CxArray::signals(y, signals, time, 1).unwrap(),
    )
}

fn loss(model: &Model, x: &CxArray, t: &CxArray) -> f64 {
    let mut g = Graph::new();
    let xi = g.input(x.clone());
    let y = model.record(&mut g, xi).unwrap();
    let ti = g.input(t.clone());
    let r = g.sub(ti, y).unwrap();
    let l = g.mse_loss(r).unwrap();
    g.value(l).data()[0].re
}

/// Worst relative error between the backward gradient and central finite
/// differences (step `h`), per parameter. Relative error of an element is
/// taken against the largest finite-difference magnitude of its parameter,
/// so vanishing entries do not divide by zero.
pub fn gradient_check(kind: ModelKind, signals: usize, time: usize, seed: u64) -> Vec<(String, f64)> {
    let h = 1e-6;
    let spec = ModelSpec::new(kind).with_signals(signals).with_seed(seed);
    let mut model = Model::build(spec).unwrap();
    let (x, t) = synthetic_batch(signals, time, seed + 100);

    let mut g = Graph::new();
    let xi = g.input(x.clone());
    let y = model.record(&mut g, xi).unwrap();
    let ti = g.input(t.clone());
    let r = g.sub(ti, y).unwrap();
    let l = g.mse_loss(r).unwrap();
    let grads = g.backward(l).unwrap();

    let mut out = Vec::new();
    for pi in 0..model.parameters().len() {
        let analytic = grads.get(pi).unwrap().data().to_vec();
        let n = analytic.len();
        let mut numeric = Vec::with_capacity(n);
        for e in 0..n {
            let mut d = [0.0; 2];
            for (c, step) in [C64::new(h, 0.0), C64::new(0.0, h)].into_iter().enumerate() {
                let orig = model.parameters()[pi].values.data()[e];
                model.parameters_mut()[pi].values.data_mut()[e] = orig + step;
                let up = loss(&model, &x, &t);
                model.parameters_mut()[pi].values.data_mut()[e] = orig - step;
                let down = loss(&model, &x, &t);
                model.parameters_mut()[pi].values.data_mut()[e] = orig;
                d[c] = (up - down) / (2.0 * h);
            }
            numeric.push(C64::new(d[0], d[1]));
        }
        let scale = numeric.iter().map(|v| v.norm()).fold(0.0, f64::max).max(1e-300);
        let worst = analytic
            .iter()
            .zip(&numeric)
            .map(|(a, b)| (a - b).norm() / scale)
            .fold(0.0, f64::max);
        out.push((model.parameters()[pi].name.clone(), worst));
    }
    out
}

/// `out[k] = Σ_l k[l]·x[k−l]` by direct summation.
pub fn brute_conv(x: &[C64], k: &[C64]) -> Vec<C64> {
    (0..x.len())
        .map(|n| {
            let mut acc = C64::new(0.0, 0.0);
            for (l, kv) in k.iter().enumerate() {
                if l <= n {
                    acc += kv * x[n - l];
                }
            }
            acc
        })
        .collect()
}

/// Triple loop for the multi-channel depthwise convolution: input
/// `[P, T, S]`, kernels `[S, P, L]`, output `[1, T, S]`.
pub fn brute_depthwise_multi(x: &[C64], k: &[C64], p: usize, t: usize, s: usize, l: usize) -> Vec<C64> {
    let mut out = vec![C64::new(0.0, 0.0); t * s];
    for sig in 0..s {
        for n in 0..t {
            for c in 0..p {
                for lag in 0..l.min(n + 1) {
                    out[n * s + sig] += k[(sig * p + c) * l + lag] * x[(c * t + n - lag) * s + sig];
                }
            }
        }
    }
    out
}

pub fn max_diff(a: &[C64], b: &[C64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}
