//! Forward and backward kernels.
//!
//! Gradients follow the real-pair convention: for a real loss `ℓ` and a
//! complex quantity `z = a + ib`, the gradient is `∂ℓ/∂a + i·∂ℓ/∂b`. Under
//! this convention a holomorphic map `y = w·x` back-propagates as
//! `g_x = g_y·conj(w)` and `g_w = g_y·conj(x)`.

use super::array::{pooled_map, pooled_zeros, pooled_zip, Axis, CxArray};
use crate::{Error, Result, C64};

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

// ---------------------------------------------------------------------------
// Planar causal convolution primitives. Splitting real and imaginary parts
// lets the inner loops vectorize.

#[derive(Default, Clone)]
pub(crate) struct Planar {
    pub re: Vec<f64>,
    pub im: Vec<f64>,
}

impl Planar {
    pub(crate) fn zeros(n: usize) -> Self {
        Self {
            re: vec![0.0; n],
            im: vec![0.0; n],
        }
    }
}

/// Output block width of the convolution kernels.
const BLOCK: usize = 8;

fn split_kernel(kernel: &[C64]) -> (Vec<f64>, Vec<f64>) {
    (kernel.iter().map(|k| k.re).collect(), kernel.iter().map(|k| k.im).collect())
}

/// `a·b + c`, fused when the target has FMA.
#[inline(always)]
fn fma(a: f64, b: f64, c: f64) -> f64 {
    #[cfg(target_feature = "fma")]
    {
        a.mul_add(b, c)
    }
    #[cfg(not(target_feature = "fma"))]
    {
        a * b + c
    }
}

#[inline(always)]
fn block(s: &[f64], at: usize) -> &[f64; BLOCK] {
    s[at..at + BLOCK].try_into().unwrap()
}

/// `out[t] += Σ_l k[l]·x[t−l]` over `t` in `0..x.len()`.
fn conv_acc(xr: &[f64], xi: &[f64], kernel: &[C64], or: &mut [f64], oi: &mut [f64]) {
    let n = xr.len();
    let l = kernel.len().min(n);
    let (kr, ki) = split_kernel(&kernel[..l]);
    let scalar = |t: usize, or: &mut [f64], oi: &mut [f64]| {
        let (mut ar, mut ai) = (0.0, 0.0);
        for j in 0..l.min(t + 1) {
            ar += kr[j] * xr[t - j] - ki[j] * xi[t - j];
            ai += kr[j] * xi[t - j] + ki[j] * xr[t - j];
        }
        or[t] += ar;
        oi[t] += ai;
    };
    let head = (l - 1).min(n);
    for t in 0..head {
        scalar(t, or, oi);
    }
    // every tap is in range from here on
    let mut t = head;
    while t + BLOCK <= n {
        let mut ar = [0.0; BLOCK];
        let mut ai = [0.0; BLOCK];
        for (j, (&a, &b)) in kr.iter().zip(&ki).enumerate() {
            let (xs_r, xs_i) = (block(xr, t - j), block(xi, t - j));
            for w in 0..BLOCK {
                ar[w] = fma(-b, xs_i[w], fma(a, xs_r[w], ar[w]));
                ai[w] = fma(b, xs_r[w], fma(a, xs_i[w], ai[w]));
            }
        }
        let (o_r, o_i) = (&mut or[t..t + BLOCK], &mut oi[t..t + BLOCK]);
        for w in 0..BLOCK {
            o_r[w] += ar[w];
            o_i[w] += ai[w];
        }
        t += BLOCK;
    }
    for t in t..n {
        scalar(t, or, oi);
    }
}

/// `gx[t] += Σ_l g[t+l]·conj(k[l])`.
fn conv_grad_input(gr: &[f64], gi: &[f64], kernel: &[C64], xr: &mut [f64], xi: &mut [f64]) {
    let n = gr.len();
    let l = kernel.len().min(n);
    let (kr, ki) = split_kernel(&kernel[..l]);
    let scalar = |t: usize, xr: &mut [f64], xi: &mut [f64]| {
        let (mut ar, mut ai) = (0.0, 0.0);
        for j in 0..l.min(n - t) {
            ar += gr[t + j] * kr[j] + gi[t + j] * ki[j];
            ai += gi[t + j] * kr[j] - gr[t + j] * ki[j];
        }
        xr[t] += ar;
        xi[t] += ai;
    };
    let mut t = 0;
    while t + BLOCK + l - 1 <= n {
        let mut ar = [0.0; BLOCK];
        let mut ai = [0.0; BLOCK];
        for (j, (&a, &b)) in kr.iter().zip(&ki).enumerate() {
            let (gs_r, gs_i) = (block(gr, t + j), block(gi, t + j));
            for w in 0..BLOCK {
                ar[w] = fma(gs_i[w], b, fma(gs_r[w], a, ar[w]));
                ai[w] = fma(-gs_r[w], b, fma(gs_i[w], a, ai[w]));
            }
        }
        let (x_r, x_i) = (&mut xr[t..t + BLOCK], &mut xi[t..t + BLOCK]);
        for w in 0..BLOCK {
            x_r[w] += ar[w];
            x_i[w] += ai[w];
        }
        t += BLOCK;
    }
    for t in t..n {
        scalar(t, xr, xi);
    }
}

/// Samples per time tile of [`conv_grad_kernel`].
const TILE: usize = 32 * BLOCK;

/// `gk[l] += Σ_t g[t]·conj(x[t−l])`, each lag summed in `BLOCK` fixed lanes.
fn conv_grad_kernel(gr: &[f64], gi: &[f64], xr: &[f64], xi: &[f64], gk: &mut [C64]) {
    let n = gr.len();
    let nl = gk.len().min(n);
    let mut sr = vec![0.0; nl];
    let mut si = vec![0.0; nl];
    let term = |t: usize, l: usize| {
        (
            gr[t] * xr[t - l] + gi[t] * xi[t - l],
            gi[t] * xr[t - l] - gr[t] * xi[t - l],
        )
    };
    let start = nl - 1;
    for t in 0..start {
        for l in 0..=t {
            let (a, b) = term(t, l);
            sr[l] += a;
            si[l] += b;
        }
    }
    // from `start` on every lag is in range; walk time in tiles that stay
    // in cache while all lags are accumulated
    let body = (n - start) / BLOCK * BLOCK;
    let mut ar = vec![[0.0; BLOCK]; nl];
    let mut ai = vec![[0.0; BLOCK]; nl];
    let mut t0 = start;
    while t0 < start + body {
        let t1 = (t0 + TILE).min(start + body);
        for (l, (acc_r, acc_i)) in ar.iter_mut().zip(ai.iter_mut()).enumerate() {
            let (mut ar, mut ai) = (*acc_r, *acc_i);
            let mut t = t0;
            while t < t1 {
                let (a, b, p, q) = (block(gr, t), block(gi, t), block(xr, t - l), block(xi, t - l));
                for w in 0..BLOCK {
                    ar[w] = fma(b[w], q[w], fma(a[w], p[w], ar[w]));
                    ai[w] = fma(-a[w], q[w], fma(b[w], p[w], ai[w]));
                }
                t += BLOCK;
            }
            (*acc_r, *acc_i) = (ar, ai);
        }
        t0 = t1;
    }
    for t in start + body..n {
        for l in 0..nl {
            let (a, b) = term(t, l);
            sr[l] += a;
            si[l] += b;
        }
    }
    for l in 0..nl {
        gk[l] += C64::new(sr[l] + ar[l].iter().sum::<f64>(), si[l] + ai[l].iter().sum::<f64>());
    }
}

/// Gather a strided complex sequence into planar form.
fn gather(data: &[C64], start: usize, stride: usize, n: usize, dst: &mut Planar) {
    dst.re.resize(n, 0.0);
    dst.im.resize(n, 0.0);
    for t in 0..n {
        let v = data[start + t * stride];
        dst.re[t] = v.re;
        dst.im[t] = v.im;
    }
}

fn scatter_add(src: &Planar, data: &mut [C64], start: usize, stride: usize) {
    for t in 0..src.re.len() {
        data[start + t * stride] += C64::new(src.re[t], src.im[t]);
    }
}

// ---------------------------------------------------------------------------
// Dense

fn dense_dims(x: &CxArray, w: &CxArray) -> Result<(usize, usize)> {
    let &[wi, wo] = w.dims() else {
        return Err(Error::shape(format!("dense weights must be 2-D, got {:?}", w.dims())));
    };
    let xi = *x.dims().last().unwrap();
    if xi != wi {
        return Err(Error::shape(format!(
            "dense: input has {xi} units, weights expect {wi}"
        )));
    }
    Ok((wi, wo))
}

/// Rows per block in the dense kernels.
const ROWS: usize = 64;

/// Planar copy of `units` columns for rows `r0..r0 + n`, laid out `[unit][row]`.
fn gather_rows(data: &[C64], units: usize, r0: usize, n: usize, re: &mut [f64], im: &mut [f64]) {
    for r in 0..n {
        for (u, v) in data[(r0 + r) * units..(r0 + r + 1) * units].iter().enumerate() {
            re[u * ROWS + r] = v.re;
            im[u * ROWS + r] = v.im;
        }
    }
}

fn scatter_rows(re: &[f64], im: &[f64], units: usize, r0: usize, n: usize, data: &mut [C64]) {
    for r in 0..n {
        for (u, v) in data[(r0 + r) * units..(r0 + r + 1) * units].iter_mut().enumerate() {
            *v = C64::new(re[u * ROWS + r], im[u * ROWS + r]);
        }
    }
}

/// Complex matrix product over the last axis, no bias.
pub fn dense(x: &CxArray, w: &CxArray) -> Result<CxArray> {
    let (ni, no) = dense_dims(x, w)?;
    let rows = x.len() / ni;
    let wd = w.data();
    let mut out = pooled_zeros(rows * no);
    let (mut xr, mut xi) = (vec![0.0; ni * ROWS], vec![0.0; ni * ROWS]);
    let (mut yr, mut yi) = (vec![0.0; no * ROWS], vec![0.0; no * ROWS]);
    for r0 in (0..rows).step_by(ROWS) {
        let n = ROWS.min(rows - r0);
        gather_rows(x.data(), ni, r0, n, &mut xr, &mut xi);
        yr.fill(0.0);
        yi.fill(0.0);
        for i in 0..ni {
            let xr: &[f64; ROWS] = xr[i * ROWS..(i + 1) * ROWS].try_into().unwrap();
            let xi: &[f64; ROWS] = xi[i * ROWS..(i + 1) * ROWS].try_into().unwrap();
            for o in 0..no {
                let (a, b) = (wd[i * no + o].re, wd[i * no + o].im);
                let yr: &mut [f64; ROWS] = (&mut yr[o * ROWS..(o + 1) * ROWS]).try_into().unwrap();
                let yi: &mut [f64; ROWS] = (&mut yi[o * ROWS..(o + 1) * ROWS]).try_into().unwrap();
                for r in 0..ROWS {
                    yr[r] = fma(-b, xi[r], fma(a, xr[r], yr[r]));
                    yi[r] = fma(b, xr[r], fma(a, xi[r], yi[r]));
                }
            }
        }
        scatter_rows(&yr, &yi, no, r0, n, &mut out);
    }
    let mut dims = x.dims().to_vec();
    *dims.last_mut().unwrap() = no;
    Ok(CxArray::from_parts_unchecked(out, dims, x.axes().to_vec()))
}

/// Returns `(g_x, g_w)`; `g_x` only when `need_input`.
pub fn dense_backward(
    x: &CxArray,
    w: &CxArray,
    g: &CxArray,
    need_input: bool,
) -> (Option<CxArray>, CxArray) {
    let (ni, no) = (w.dims()[0], w.dims()[1]);
    let rows = x.len() / ni;
    let wd = w.data();
    let mut gw = pooled_zeros(ni * no);
    let mut gx = need_input.then(|| pooled_zeros(x.len()));
    let (mut xr, mut xi) = (vec![0.0; ni * ROWS], vec![0.0; ni * ROWS]);
    let (mut gr, mut gi) = (vec![0.0; no * ROWS], vec![0.0; no * ROWS]);
    let (mut hr, mut hi) = (vec![0.0; ni * ROWS], vec![0.0; ni * ROWS]);
    for r0 in (0..rows).step_by(ROWS) {
        let n = ROWS.min(rows - r0);
        gather_rows(x.data(), ni, r0, n, &mut xr, &mut xi);
        gather_rows(g.data(), no, r0, n, &mut gr, &mut gi);
        // rows past `n` hold stale values; zero the gradient there
        for o in 0..no {
            gr[o * ROWS + n..(o + 1) * ROWS].fill(0.0);
            gi[o * ROWS + n..(o + 1) * ROWS].fill(0.0);
        }
        for i in 0..ni {
            let xr: &[f64; ROWS] = xr[i * ROWS..(i + 1) * ROWS].try_into().unwrap();
            let xi: &[f64; ROWS] = xi[i * ROWS..(i + 1) * ROWS].try_into().unwrap();
            for o in 0..no {
                let gr: &[f64; ROWS] = gr[o * ROWS..(o + 1) * ROWS].try_into().unwrap();
                let gi: &[f64; ROWS] = gi[o * ROWS..(o + 1) * ROWS].try_into().unwrap();
                let mut ar = [0.0; BLOCK];
                let mut ai = [0.0; BLOCK];
                for c in 0..ROWS / BLOCK {
                    for j in 0..BLOCK {
                        let r = c * BLOCK + j;
                        ar[j] = fma(gi[r], xi[r], fma(gr[r], xr[r], ar[j]));
                        ai[j] = fma(-gr[r], xi[r], fma(gi[r], xr[r], ai[j]));
                    }
                }
                gw[i * no + o] += C64::new(ar.iter().sum(), ai.iter().sum());
            }
        }
        if let Some(gx) = gx.as_mut() {
            hr.fill(0.0);
            hi.fill(0.0);
            for i in 0..ni {
                let hr: &mut [f64; ROWS] = (&mut hr[i * ROWS..(i + 1) * ROWS]).try_into().unwrap();
                let hi: &mut [f64; ROWS] = (&mut hi[i * ROWS..(i + 1) * ROWS]).try_into().unwrap();
                for o in 0..no {
                    let (a, b) = (wd[i * no + o].re, wd[i * no + o].im);
                    let gr: &[f64; ROWS] = gr[o * ROWS..(o + 1) * ROWS].try_into().unwrap();
                    let gi: &[f64; ROWS] = gi[o * ROWS..(o + 1) * ROWS].try_into().unwrap();
                    for r in 0..ROWS {
                        hr[r] = fma(gi[r], b, fma(gr[r], a, hr[r]));
                        hi[r] = fma(-gr[r], b, fma(gi[r], a, hi[r]));
                    }
                }
            }
            scatter_rows(&hr, &hi, ni, r0, n, gx);
        }
    }
    (
        gx.map(|d| CxArray::from_parts_unchecked(d, x.dims().to_vec(), x.axes().to_vec())),
        CxArray::from_parts_unchecked(gw, w.dims().to_vec(), w.axes().to_vec()),
    )
}

// ---------------------------------------------------------------------------
// Activations and polar split

/// `exp(z)` for `z ≤ 0`, branch-free so that slices of it vectorize.
#[inline(always)]
fn exp_nonpositive(z: f64) -> f64 {
    const LN2_HI: f64 = 6.931_471_803_691_238_2e-1;
    const LN2_LO: f64 = 1.908_214_929_270_587_7e-10;
    const SHIFT: f64 = 6_755_399_441_055_744.0; // 1.5 * 2^52
    let z = z.max(-700.0);
    let kf = z * std::f64::consts::LOG2_E + SHIFT;
    let k = kf - SHIFT;
    let r = (z - k * LN2_HI) - k * LN2_LO;
    // Taylor series to degree 13, |r| ≤ ln2/2
    let p = 1.0 / 6_227_020_800.0;
    let p = fma(p, r, 1.0 / 479_001_600.0);
    let p = fma(p, r, 1.0 / 39_916_800.0);
    let p = fma(p, r, 1.0 / 3_628_800.0);
    let p = fma(p, r, 1.0 / 362_880.0);
    let p = fma(p, r, 1.0 / 40_320.0);
    let p = fma(p, r, 1.0 / 5_040.0);
    let p = fma(p, r, 1.0 / 720.0);
    let p = fma(p, r, 1.0 / 120.0);
    let p = fma(p, r, 1.0 / 24.0);
    let p = fma(p, r, 1.0 / 6.0);
    let p = fma(p, r, 0.5);
    let p = fma(p, r, 1.0);
    let p = fma(p, r, 1.0);
    let bits = kf.to_bits().wrapping_sub(SHIFT.to_bits()).wrapping_add(1023) << 52;
    p * f64::from_bits(bits)
}

#[inline(always)]
pub(crate) fn tanh(x: f64) -> f64 {
    let e = exp_nonpositive(-2.0 * x.abs());
    ((1.0 - e) / (1.0 + e)).copysign(x)
}

/// Elementwise `tanh(re) + i·tanh(im)`.
pub fn split_tanh(x: &CxArray) -> CxArray {
    let mut data = pooled_zeros(x.len());
    let flat: &mut [f64] = bytemuck::cast_slice_mut(&mut data);
    let src: &[f64] = bytemuck::cast_slice(x.data());
    for (o, &v) in flat.iter_mut().zip(src) {
        *o = tanh(v);
    }
    CxArray::from_parts_unchecked(data, x.dims().to_vec(), x.axes().to_vec())
}

pub fn split_tanh_backward(y: &CxArray, g: &CxArray) -> CxArray {
    let data = pooled_zip(y.data(), g.data(), |y, g| {
        C64::new(g.re * (1.0 - y.re * y.re), g.im * (1.0 - y.im * y.im))
    });
    CxArray::from_parts_unchecked(data, y.dims().to_vec(), y.axes().to_vec())
}

/// `(|x|, x/|x|)` with the unit phasor defined as 1 at the origin.
pub fn mag_phase_split(x: &CxArray) -> (CxArray, CxArray) {
    let mag = pooled_map(x.data(), |v| C64::new(v.norm_sqr().sqrt(), 0.0));
    let phase = pooled_zip(x.data(), &mag, |v, r| {
        if r.re == 0.0 {
            C64::new(1.0, 0.0)
        } else {
            v / r.re
        }
    });
    (
        CxArray::from_parts_unchecked(mag, x.dims().to_vec(), x.axes().to_vec()),
        CxArray::from_parts_unchecked(phase, x.dims().to_vec(), x.axes().to_vec()),
    )
}

/// Gradient of `|x|` with the phase held constant: `Re(g)·x/|x|`.
pub fn magnitude_backward(x: &CxArray, g: &CxArray) -> CxArray {
    let data = pooled_zip(x.data(), g.data(), |v, g| {
        let r = v.norm_sqr().sqrt();
        if r == 0.0 {
            ZERO
        } else {
            v * (g.re / r)
        }
    });
    CxArray::from_parts_unchecked(data, x.dims().to_vec(), x.axes().to_vec())
}

fn phase_broadcast(y: &CxArray, phase: &CxArray) -> Result<usize> {
    let yd = y.dims3()?;
    let pd = phase.dims3()?;
    if yd[0] != pd[0] || yd[1] != pd[1] || (pd[2] != yd[2] && pd[2] != 1) {
        return Err(Error::shape(format!(
            "recombine: cannot broadcast phase {pd:?} onto {yd:?}"
        )));
    }
    Ok(pd[2])
}

/// `y·phase`, broadcasting a single-channel phase over all channels.
pub fn recombine(y: &CxArray, phase: &CxArray) -> Result<CxArray> {
    let pc = phase_broadcast(y, phase)?;
    let c = y.dims()[2];
    let p = phase.data();
    let mut data = pooled_zeros(y.len());
    for ((out, ys), ps) in data.chunks_exact_mut(c).zip(y.data().chunks_exact(c)).zip(p.chunks_exact(pc)) {
        for (ch, (o, &v)) in out.iter_mut().zip(ys).enumerate() {
            *o = v * ps[if pc == 1 { 0 } else { ch }];
        }
    }
    Ok(CxArray::from_parts_unchecked(data, y.dims().to_vec(), y.axes().to_vec()))
}

pub fn recombine_backward(phase: &CxArray, g: &CxArray) -> CxArray {
    let c = g.dims()[2];
    let pc = phase.dims()[2];
    let p = phase.data();
    let mut data = pooled_zeros(g.len());
    for ((out, gs), ps) in data.chunks_exact_mut(c).zip(g.data().chunks_exact(c)).zip(p.chunks_exact(pc)) {
        for (ch, (o, &v)) in out.iter_mut().zip(gs).enumerate() {
            *o = v * ps[if pc == 1 { 0 } else { ch }].conj();
        }
    }
    CxArray::from_parts_unchecked(data, g.dims().to_vec(), g.axes().to_vec())
}

/// Swap the first and last of three axes.
pub fn transpose(x: &CxArray) -> Result<CxArray> {
    let [a, b, c] = x.dims3()?;
    let src = x.data();
    let mut out = pooled_zeros(src.len());
    for j in 0..b {
        for i in 0..a {
            let row = &src[(i * b + j) * c..(i * b + j + 1) * c];
            for (k, &v) in row.iter().enumerate() {
                out[(k * b + j) * a + i] = v;
            }
        }
    }
    let ax = x.axes();
    Ok(CxArray::from_parts_unchecked(
        out,
        vec![c, b, a],
        vec![ax[2], ax[1], ax[0]],
    ))
}

pub fn sub(a: &CxArray, b: &CxArray) -> Result<CxArray> {
    if !a.same_shape(b) {
        return Err(Error::shape(format!(
            "subtract {:?} and {:?}",
            a.dims(),
            b.dims()
        )));
    }
    let data = pooled_zip(a.data(), b.data(), |x, y| x - y);
    Ok(CxArray::from_parts_unchecked(data, a.dims().to_vec(), a.axes().to_vec()))
}

// ---------------------------------------------------------------------------
// Convolutions

fn kernel_len(k: &CxArray, what: &str) -> Result<usize> {
    let l = *k.dims().last().unwrap();
    if l == 0 {
        return Err(Error::shape(format!("{what}: empty kernel")));
    }
    Ok(l)
}

/// Shared causal kernel over `[signals, time, 1]`.
pub fn conv1d_causal(x: &CxArray, k: &CxArray) -> Result<CxArray> {
    let [s, t, c] = x.dims3()?;
    if c != 1 || k.dims().len() != 1 {
        return Err(Error::shape(format!(
            "conv1d: input {:?} must have one channel and kernel {:?} one axis",
            x.dims(),
            k.dims()
        )));
    }
    let l = kernel_len(k, "conv1d")?;
    if l > t {
        return Err(Error::shape(format!("conv1d: kernel length {l} exceeds {t} samples")));
    }
    let mut out = pooled_zeros(x.len());
    let mut xp = Planar::default();
    let mut op = Planar::zeros(t);
    for sig in 0..s {
        gather(x.data(), sig * t, 1, t, &mut xp);
        op.re.iter_mut().for_each(|v| *v = 0.0);
        op.im.iter_mut().for_each(|v| *v = 0.0);
        conv_acc(&xp.re, &xp.im, k.data(), &mut op.re, &mut op.im);
        scatter_add(&op, &mut out, sig * t, 1);
    }
    Ok(CxArray::from_parts_unchecked(out, x.dims().to_vec(), x.axes().to_vec()))
}

pub fn conv1d_causal_backward(
    x: &CxArray,
    k: &CxArray,
    g: &CxArray,
    need_input: bool,
) -> (Option<CxArray>, CxArray) {
    let [s, t, _] = x.dims3().expect("checked in forward");
    let mut gk = pooled_zeros(k.len());
    let mut gx = need_input.then(|| pooled_zeros(x.len()));
    let (mut xp, mut gp, mut gxp) = (Planar::default(), Planar::default(), Planar::zeros(t));
    for sig in 0..s {
        gather(x.data(), sig * t, 1, t, &mut xp);
        gather(g.data(), sig * t, 1, t, &mut gp);
        conv_grad_kernel(&gp.re, &gp.im, &xp.re, &xp.im, &mut gk);
        if let Some(gx) = gx.as_mut() {
            gxp.re.iter_mut().for_each(|v| *v = 0.0);
            gxp.im.iter_mut().for_each(|v| *v = 0.0);
            conv_grad_input(&gp.re, &gp.im, k.data(), &mut gxp.re, &mut gxp.im);
            scatter_add(&gxp, gx, sig * t, 1);
        }
    }
    (
        gx.map(|d| CxArray::from_parts_unchecked(d, x.dims().to_vec(), x.axes().to_vec())),
        CxArray::from_parts_unchecked(gk, k.dims().to_vec(), k.axes().to_vec()),
    )
}

/// Per-signal kernels over `[1, time, signals]`; kernels are `[signals, L]`.
pub fn depthwise_conv(x: &CxArray, k: &CxArray) -> Result<CxArray> {
    let [one, _, s] = x.dims3()?;
    match k.dims() {
        &[ks, _] if one == 1 && ks == s => {}
        kd => {
            return Err(Error::shape(format!(
                "depthwise: input {:?} and kernels {kd:?} disagree",
                x.dims()
            )))
        }
    }
    // A depthwise convolution is the single-channel case of the multi form.
    let k3 = CxArray::from_parts_unchecked(
        k.data().to_vec(),
        vec![s, 1, k.dims()[1]],
        vec![Axis::Signals, Axis::Channels, Axis::Taps],
    );
    depthwise_conv_multi(x, &k3)
}

pub fn depthwise_conv_backward(
    x: &CxArray,
    k: &CxArray,
    g: &CxArray,
    need_input: bool,
) -> (Option<CxArray>, CxArray) {
    let s = k.dims()[0];
    let k3 = CxArray::from_parts_unchecked(
        k.data().to_vec(),
        vec![s, 1, k.dims()[1]],
        vec![Axis::Signals, Axis::Channels, Axis::Taps],
    );
    let (gx, gk) = depthwise_conv_multi_backward(x, &k3, g, need_input);
    (
        gx,
        CxArray::from_parts_unchecked(gk.into_data(), k.dims().to_vec(), k.axes().to_vec()),
    )
}

/// `out[0, t, s] = Σ_p Σ_l k[s, p, l]·x[p, t−l, s]` over `[P, time, signals]`.
pub fn depthwise_conv_multi(x: &CxArray, k: &CxArray) -> Result<CxArray> {
    let [p, t, s] = x.dims3()?;
    match k.dims() {
        &[ks, kp, kl] if ks == s && kp == p && kl > 0 => {}
        kd => {
            return Err(Error::shape(format!(
                "depthwise_multi: input {:?} and kernels {kd:?} disagree",
                x.dims()
            )))
        }
    }
    let l = k.dims()[2];
    let kd = k.data();
    let mut out = pooled_zeros(t * s);
    let mut xp = Planar::default();
    let mut op = Planar::zeros(t);
    for sig in 0..s {
        op.re.iter_mut().for_each(|v| *v = 0.0);
        op.im.iter_mut().for_each(|v| *v = 0.0);
        for ch in 0..p {
            gather(x.data(), ch * t * s + sig, s, t, &mut xp);
            let kern = &kd[(sig * p + ch) * l..(sig * p + ch + 1) * l];
            conv_acc(&xp.re, &xp.im, kern, &mut op.re, &mut op.im);
        }
        scatter_add(&op, &mut out, sig, s);
    }
    Ok(CxArray::from_parts_unchecked(
        out,
        vec![1, t, s],
        x.axes().to_vec(),
    ))
}

pub fn depthwise_conv_multi_backward(
    x: &CxArray,
    k: &CxArray,
    g: &CxArray,
    need_input: bool,
) -> (Option<CxArray>, CxArray) {
    let [p, t, s] = x.dims3().expect("checked in forward");
    let l = k.dims()[2];
    let kd = k.data();
    let mut gk = pooled_zeros(k.len());
    let mut gx = need_input.then(|| pooled_zeros(x.len()));
    let (mut xp, mut gp, mut gxp) = (Planar::default(), Planar::default(), Planar::zeros(t));
    for sig in 0..s {
        gather(g.data(), sig, s, t, &mut gp);
        for ch in 0..p {
            let base = (sig * p + ch) * l;
            gather(x.data(), ch * t * s + sig, s, t, &mut xp);
            conv_grad_kernel(&gp.re, &gp.im, &xp.re, &xp.im, &mut gk[base..base + l]);
            if let Some(gx) = gx.as_mut() {
                gxp.re.iter_mut().for_each(|v| *v = 0.0);
                gxp.im.iter_mut().for_each(|v| *v = 0.0);
                conv_grad_input(&gp.re, &gp.im, &kd[base..base + l], &mut gxp.re, &mut gxp.im);
                scatter_add(&gxp, gx, ch * t * s + sig, s);
            }
        }
    }
    (
        gx.map(|d| CxArray::from_parts_unchecked(d, x.dims().to_vec(), x.axes().to_vec())),
        CxArray::from_parts_unchecked(gk, k.dims().to_vec(), k.axes().to_vec()),
    )
}
