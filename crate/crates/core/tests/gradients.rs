mod common;

use common::{gradient_check, random_signal};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sicnet::cxnn::{Axis, CxArray, Graph, Var};
use sicnet::models::ModelKind;
use sicnet::C64;

const H: f64 = 1e-6;
const TOL: f64 = 1e-5;

fn array(dims: &[usize], axes: &[Axis], seed: u64) -> CxArray {
    let n = dims.iter().product();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    CxArray::new(random_signal(&mut rng, n), dims, axes).unwrap()
}

/// Finite-difference check of an arbitrary graph. `build` receives one
/// variable per parameter and returns the scalar loss.
fn check(params: Vec<CxArray>, build: impl Fn(&mut Graph, &[Var]) -> Var) -> f64 {
    let eval = |ps: &[CxArray]| {
        let mut g = Graph::new();
        let vars: Vec<Var> = ps.iter().enumerate().map(|(i, p)| g.param(i, p.clone())).collect();
        let l = build(&mut g, &vars);
        g.value(l).data()[0].re
    };
    let mut g = Graph::new();
    let vars: Vec<Var> = params.iter().enumerate().map(|(i, p)| g.param(i, p.clone())).collect();
    let l = build(&mut g, &vars);
    let grads = g.backward(l).unwrap();
    let mut worst: f64 = 0.0;
    let mut ps = params.clone();
    for pi in 0..ps.len() {
        let analytic = grads.get(pi).unwrap().data().to_vec();
        let mut numeric = Vec::new();
        for e in 0..analytic.len() {
            let orig = ps[pi].data()[e];
            let mut d = [0.0; 2];
            for (c, step) in [C64::new(H, 0.0), C64::new(0.0, H)].into_iter().enumerate() {
                ps[pi].data_mut()[e] = orig + step;
                let up = eval(&ps);
                ps[pi].data_mut()[e] = orig - step;
                let down = eval(&ps);
                ps[pi].data_mut()[e] = orig;
                d[c] = (up - down) / (2.0 * H);
            }
            numeric.push(C64::new(d[0], d[1]));
        }
        let scale = numeric.iter().map(|v| v.norm()).fold(0.0, f64::max).max(1e-300);
        for (a, b) in analytic.iter().zip(&numeric) {
            worst = worst.max((a - b).norm() / scale);
        }
    }
    worst
}

fn target(g: &mut Graph, like: Var, seed: u64) -> Var {
    let v = g.value(like);
    let t = array(&v.dims().to_vec(), &v.axes().to_vec(), seed);
    g.input(t)
}

fn mse_against(g: &mut Graph, y: Var, seed: u64) -> Var {
    let t = target(g, y, seed);
    let r = g.sub(t, y).unwrap();
    g.mse_loss(r).unwrap()
}

#[test]
fn dense_and_split_tanh() {
    let x = array(&[7, 3], &[Axis::Time, Axis::Channels], 1);
    let w = array(&[3, 4], &[Axis::Inputs, Axis::Outputs], 2);
    let err = check(vec![x, w], |g, v| {
        let h = g.dense(v[0], v[1]).unwrap();
        let h = g.split_tanh(h).unwrap();
        mse_against(g, h, 3)
    });
    assert!(err < TOL, "{err}");
}

#[test]
fn polar_path() {
    // the phase factor is a constant of the backward pass; only the
    // magnitude branch carries gradient
    let x = array(&[2, 9, 1], &[Axis::Signals, Axis::Time, Axis::Channels], 4);
    let w = array(&[1, 1], &[Axis::Inputs, Axis::Outputs], 5);
    let ph = x.clone();
    let err = check(vec![w], move |g, v| {
        let xi = g.input(ph.clone());
        let (mag, phase) = g.mag_phase_split(xi).unwrap();
        let y = g.dense(mag, v[0]).unwrap();
        let y = g.split_tanh(y).unwrap();
        let y = g.recombine(y, phase).unwrap();
        mse_against(g, y, 6)
    });
    assert!(err < TOL, "{err}");
    // magnitude gradient w.r.t. the input, phase held at its unperturbed value
    let (_, phase_value) = sicnet::cxnn::ops::mag_phase_split(&x);
    let err = check(vec![x], move |g, v| {
        let (mag, _) = g.mag_phase_split(v[0]).unwrap();
        let fixed = g.input(phase_value.clone());
        let y = g.recombine(mag, fixed).unwrap();
        mse_against(g, y, 7)
    });
    assert!(err < TOL, "{err}");
}

#[test]
fn convolutions() {
    let (s, t, l, p) = (3, 24, 5, 2);
    let x = array(&[s, t, 1], &[Axis::Signals, Axis::Time, Axis::Channels], 8);
    let k = array(&[l], &[Axis::Taps], 9);
    let err = check(vec![x, k], |g, v| {
        let y = g.conv1d_causal(v[0], v[1]).unwrap();
        mse_against(g, y, 10)
    });
    assert!(err < TOL, "conv1d {err}");

    let x = array(&[1, t, s], &[Axis::Channels, Axis::Time, Axis::Signals], 11);
    let k = array(&[s, l], &[Axis::Signals, Axis::Taps], 12);
    let err = check(vec![x, k], |g, v| {
        let y = g.depthwise_conv(v[0], v[1]).unwrap();
        mse_against(g, y, 13)
    });
    assert!(err < TOL, "depthwise {err}");

    let x = array(&[p, t, s], &[Axis::Channels, Axis::Time, Axis::Signals], 14);
    let k = array(&[s, p, l], &[Axis::Signals, Axis::Channels, Axis::Taps], 15);
    let err = check(vec![x, k], |g, v| {
        let y = g.depthwise_conv_multi(v[0], v[1]).unwrap();
        let y = g.transpose(y).unwrap();
        mse_against(g, y, 16)
    });
    assert!(err < TOL, "depthwise multi {err}");
}

#[test]
fn composed_models() {
    for kind in [ModelKind::GlobalH, ModelKind::AdaptiveH, ModelKind::ParallelH] {
        for (name, err) in gradient_check(kind, 4, 64, 21) {
            assert!(err < TOL, "{kind} {name}: {err}");
        }
    }
}
