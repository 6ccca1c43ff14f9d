//! Memoryless AM/AM nonlinearities, the SI-SDR metric and calibration of a
//! nonlinearity parameter to a target SI-SDR.

use std::fmt;

use crate::{Error, Result, C64};

/// Upper cap reported by [`si_sdr`] when the distortion term underflows.
pub const SI_SDR_CAP_DB: f64 = 150.0;

/// Bisection bracket for the nonlinearity parameter.
pub const PARAM_BRACKET: (f64, f64) = (1e-3, 1e3);
pub const CALIBRATION_TOLERANCE_DB: f64 = 0.1;
const MAX_BISECTION_STEPS: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NonlinearityKind {
    /// Power amplifier soft limiter, `arctan(c_f |s|)`.
    PaArctan,
    /// LNA and ADC hard clip at `c_g`.
    AdClip,
}

impl NonlinearityKind {
    pub fn code(self) -> u8 {
        match self {
            NonlinearityKind::PaArctan => 0,
            NonlinearityKind::AdClip => 1,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(NonlinearityKind::PaArctan),
            1 => Some(NonlinearityKind::AdClip),
            _ => None,
        }
    }

    pub fn apply(self, x: C64, param: f64) -> C64 {
        match self {
            NonlinearityKind::PaArctan => pa_apply(x, param),
            NonlinearityKind::AdClip => ad_apply(x, param),
        }
    }

    pub fn apply_all(self, xs: &[C64], param: f64) -> Vec<C64> {
        xs.iter().map(|&x| self.apply(x, param)).collect()
    }
}

impl fmt::Display for NonlinearityKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NonlinearityKind::PaArctan => "pa-arctan",
            NonlinearityKind::AdClip => "ad-clip",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NonlinearitySpec {
    pub kind: NonlinearityKind,
    /// `c_f` for the PA, `c_g` for the clip.
    pub param: f64,
    /// SI-SDR of the nonlinearity on its calibration probe.
    pub achieved_si_sdr: f64,
}

impl NonlinearitySpec {
    pub fn apply(&self, xs: &[C64]) -> Vec<C64> {
        self.kind.apply_all(xs, self.param)
    }
}

/// `arctan(c_f·|s|)·e^{j·arg s}`, zero at the origin.
pub fn pa_apply(s: C64, c_f: f64) -> C64 {
    let r = s.norm();
    if r == 0.0 {
        return C64::new(0.0, 0.0);
    }
    s * ((c_f * r).atan() / r)
}

/// Identity below `c_g`, magnitude clipped to `c_g` with the phase kept.
pub fn ad_apply(x: C64, c_g: f64) -> C64 {
    let r = x.norm();
    if r < c_g {
        x
    } else {
        x * (c_g / r)
    }
}

/// Scale-invariant signal-to-distortion ratio in dB.
///
/// The estimate is projected onto the reference with the complex gain
/// `α = ⟨estimate, reference⟩ / ‖reference‖²`; the result is the power of
/// `α·reference` over the power of what remains, capped at
/// [`SI_SDR_CAP_DB`].
pub fn si_sdr(estimate: &[C64], reference: &[C64]) -> Result<f64> {
    if estimate.len() != reference.len() {
        return Err(Error::shape(format!(
            "SI-SDR on signals of length {} and {}",
            estimate.len(),
            reference.len()
        )));
    }
    let ref_energy: f64 = reference.iter().map(|r| r.norm_sqr()).sum();
    if !(ref_energy > 0.0) {
        return Err(Error::Degenerate("SI-SDR against an all-zero reference".into()));
    }
    let inner: C64 = estimate
        .iter()
        .zip(reference)
        .map(|(e, r)| e * r.conj())
        .sum();
    let alpha = inner / ref_energy;
    let target_energy = alpha.norm_sqr() * ref_energy;
    let distortion: f64 = estimate
        .iter()
        .zip(reference)
        .map(|(&e, &r)| (e - alpha * r).norm_sqr())
        .sum();
    if distortion == 0.0 {
        return Ok(SI_SDR_CAP_DB);
    }
    Ok((10.0 * (target_energy / distortion).log10()).min(SI_SDR_CAP_DB))
}

/// SI-SDR of `kind` at `param` measured on `probe`.
pub fn si_sdr_at(kind: NonlinearityKind, param: f64, probe: &[C64]) -> Result<f64> {
    si_sdr(&kind.apply_all(probe, param), probe)
}

/// SI-SDR values at the two ends of the parameter bracket, as `(min, max)`.
pub fn attainable_range(kind: NonlinearityKind, probe: &[C64]) -> Result<(f64, f64)> {
    let a = si_sdr_at(kind, PARAM_BRACKET.0, probe)?;
    let b = si_sdr_at(kind, PARAM_BRACKET.1, probe)?;
    Ok((a.min(b), a.max(b)))
}

/// Find the parameter whose SI-SDR on `probe` equals `target_db`.
///
/// SI-SDR falls with `c_f` for the PA and rises with `c_g` for the clip, so
/// a log-domain bisection over [`PARAM_BRACKET`] converges for either kind.
pub fn calibrate(kind: NonlinearityKind, target_db: f64, probe: &[C64]) -> Result<NonlinearitySpec> {
    let (lo_p, hi_p) = PARAM_BRACKET;
    let at_lo = si_sdr_at(kind, lo_p, probe)?;
    let at_hi = si_sdr_at(kind, hi_p, probe)?;
    let (min, max) = (at_lo.min(at_hi), at_lo.max(at_hi));
    if !target_db.is_finite() || target_db < min || target_db > max {
        return Err(Error::Calibration {
            message: format!(
                "{kind} SI-SDR target {target_db} dB outside attainable [{min:.3}, {max:.3}] dB"
            ),
            attainable: Some((min, max)),
        });
    }
    let decreasing = at_lo > at_hi;

    let (mut lo, mut hi) = (lo_p.ln(), hi_p.ln());
    let mut best = (f64::INFINITY, lo_p, at_lo);
    for _ in 0..MAX_BISECTION_STEPS {
        let mid = 0.5 * (lo + hi);
        let param = mid.exp();
        let sdr = si_sdr_at(kind, param, probe)?;
        let err = (sdr - target_db).abs();
        if err < best.0 {
            best = (err, param, sdr);
        }
        if err < 1e-9 {
            break;
        }
        if (sdr > target_db) == decreasing {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let (err, param, achieved) = best;
    if err > CALIBRATION_TOLERANCE_DB {
        return Err(Error::Calibration {
            message: format!("{kind} bisection stalled {err:.3} dB from {target_db} dB"),
            attainable: Some((min, max)),
        });
    }
    Ok(NonlinearitySpec {
        kind,
        param,
        achieved_si_sdr: achieved,
    })
}
