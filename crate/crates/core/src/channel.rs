//! Self-interference channel sampling.
//!
//! The SI channel is a 12-tap FIR response at 50 ns spacing. Tap 0 is the
//! quasi-static internal path between the TX and RX antennas (deterministic,
//! zero phase). Taps 1..11 are the external reflections: Rayleigh fading with
//! an exponentially decaying power delay profile whose decay constant is
//! solved so that the whole profile hits a target RMS delay spread.

use rand::Rng;

use crate::rng::{complex_gaussian, derive_seed, rng_from_seed, Stream};
use crate::{Error, Result, C64};

pub const NUM_TAPS: usize = 12;
pub const TAP_SPACING_NS: f64 = 50.0;

/// Window for the internal-over-strongest-external power ratio.
pub const DOMINANCE_RANGE_DB: (f64, f64) = (5.0, 10.0);
/// Window for the RMS delay spread.
pub const RMS_DS_RANGE_NS: (f64, f64) = (20.0, 40.0);

pub const MAX_RESAMPLE_ATTEMPTS: usize = 100;

const MAX_DECAY_NS: f64 = 10_000.0;
const MIN_DECAY_NS: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct SIChannel {
    taps: [C64; NUM_TAPS],
    rms_delay_spread_ns: f64,
    internal_dominance_db: f64,
}

impl SIChannel {
    /// Wrap raw taps, computing the delay-spread and dominance metadata.
    pub fn from_taps(taps: [C64; NUM_TAPS]) -> Result<Self> {
        let rms = rms_delay_spread(&taps, TAP_SPACING_NS)?;
        let dominance = internal_dominance_db(&taps);
        Ok(Self {
            taps,
            rms_delay_spread_ns: rms,
            internal_dominance_db: dominance,
        })
    }

    pub fn taps(&self) -> &[C64; NUM_TAPS] {
        &self.taps
    }

    pub fn internal_index(&self) -> usize {
        0
    }

    pub fn internal(&self) -> C64 {
        self.taps[0]
    }

    /// Everything but the internal path.
    pub fn external(&self) -> &[C64] {
        &self.taps[1..]
    }

    pub fn rms_delay_spread_ns(&self) -> f64 {
        self.rms_delay_spread_ns
    }

    pub fn internal_dominance_db(&self) -> f64 {
        self.internal_dominance_db
    }

    pub fn total_power(&self) -> f64 {
        self.taps.iter().map(|t| t.norm_sqr()).sum()
    }

    /// Causal linear convolution truncated to the input length.
    pub fn apply(&self, input: &[C64]) -> Vec<C64> {
        convolve_causal(input, &self.taps)
    }
}

pub fn convolve_causal(input: &[C64], taps: &[C64]) -> Vec<C64> {
    let mut out = vec![C64::new(0.0, 0.0); input.len()];
    for (k, o) in out.iter_mut().enumerate() {
        let mut acc = C64::new(0.0, 0.0);
        for (l, &h) in taps.iter().enumerate().take(k + 1) {
            acc += h * input[k - l];
        }
        *o = acc;
    }
    out
}

/// Power-weighted standard deviation of tap delays.
pub fn rms_delay_spread(taps: &[C64], sample_period_ns: f64) -> Result<f64> {
    let powers: Vec<f64> = taps.iter().map(|t| t.norm_sqr()).collect();
    rms_of_profile(&powers, sample_period_ns)
}

fn rms_of_profile(powers: &[f64], sample_period_ns: f64) -> Result<f64> {
    let total: f64 = powers.iter().sum();
    if !(total > 0.0) {
        return Err(Error::Degenerate(
            "RMS delay spread of an all-zero response".into(),
        ));
    }
    let mean = powers
        .iter()
        .enumerate()
        .map(|(l, p)| p * l as f64 * sample_period_ns)
        .sum::<f64>()
        / total;
    let var = powers
        .iter()
        .enumerate()
        .map(|(l, p)| {
            let d = l as f64 * sample_period_ns - mean;
            p * d * d
        })
        .sum::<f64>()
        / total;
    Ok(var.sqrt())
}

/// 10·log10 of internal tap power over the strongest external tap.
pub fn internal_dominance_db(taps: &[C64]) -> f64 {
    let strongest = taps[1..].iter().map(|t| t.norm_sqr()).fold(0.0, f64::max);
    10.0 * (taps[0].norm_sqr() / strongest).log10()
}

/// Expected tap powers, normalized to unit total power.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerDelayProfile {
    pub powers: [f64; NUM_TAPS],
    pub decay_ns: f64,
}

fn exponential_profile(dominance_db: f64, decay_ns: f64) -> [f64; NUM_TAPS] {
    let mut p = [0.0; NUM_TAPS];
    p[0] = 10f64.powf(dominance_db / 10.0);
    for (l, v) in p.iter_mut().enumerate().skip(1) {
        *v = (-((l - 1) as f64) * TAP_SPACING_NS / decay_ns).exp();
    }
    let total: f64 = p.iter().sum();
    p.iter_mut().for_each(|v| *v /= total);
    p
}

/// Solve the external decay constant for a target RMS delay spread.
pub fn pdp_from_spec(target_rms_ds_ns: f64, dominance_db: f64) -> Result<PowerDelayProfile> {
    let (ds_lo, ds_hi) = RMS_DS_RANGE_NS;
    let (dom_lo, dom_hi) = DOMINANCE_RANGE_DB;
    if !(ds_lo..=ds_hi).contains(&target_rms_ds_ns) {
        return Err(Error::InvalidArgument(format!(
            "target RMS delay spread {target_rms_ds_ns} ns outside [{ds_lo}, {ds_hi}]"
        )));
    }
    if !(dom_lo..=dom_hi).contains(&dominance_db) {
        return Err(Error::InvalidArgument(format!(
            "dominance {dominance_db} dB outside [{dom_lo}, {dom_hi}]"
        )));
    }

    let rms_at = |decay: f64| rms_of_profile(&exponential_profile(dominance_db, decay), TAP_SPACING_NS);
    // RMS spread grows monotonically with the decay constant.
    let (mut lo, mut hi) = (MIN_DECAY_NS, MAX_DECAY_NS);
    let (r_lo, r_hi) = (rms_at(lo)?, rms_at(hi)?);
    if target_rms_ds_ns < r_lo || target_rms_ds_ns > r_hi {
        return Err(Error::Calibration {
            message: format!(
                "RMS delay spread {target_rms_ds_ns} ns unreachable at {dominance_db} dB dominance"
            ),
            attainable: Some((r_lo, r_hi)),
        });
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let r = rms_at(mid)?;
        if (r - target_rms_ds_ns).abs() < 1e-10 {
            lo = mid;
            hi = mid;
            break;
        }
        if r < target_rms_ds_ns {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let decay_ns = 0.5 * (lo + hi);
    Ok(PowerDelayProfile {
        powers: exponential_profile(dominance_db, decay_ns),
        decay_ns,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSpec {
    pub target_rms_ds_ns: f64,
    pub dominance_db: f64,
    pub decay_ns: f64,
    pub seed: u64,
}

impl ChannelSpec {
    pub fn new(target_rms_ds_ns: f64, dominance_db: f64, seed: u64) -> Result<Self> {
        let pdp = pdp_from_spec(target_rms_ds_ns, dominance_db)?;
        Ok(Self {
            target_rms_ds_ns,
            dominance_db,
            decay_ns: pdp.decay_ns,
            seed,
        })
    }

    /// Draw target spread and dominance uniformly from their windows,
    /// redrawing combinations the exponential profile cannot reach.
    pub fn draw(seed: u64) -> Result<Self> {
        let mut rng = rng_from_seed(derive_seed(seed, Stream::Channel, u64::MAX));
        for _ in 0..MAX_RESAMPLE_ATTEMPTS {
            let ds = rng.random_range(RMS_DS_RANGE_NS.0..=RMS_DS_RANGE_NS.1);
            let dom = rng.random_range(DOMINANCE_RANGE_DB.0..=DOMINANCE_RANGE_DB.1);
            match Self::new(ds, dom, seed) {
                Ok(spec) => return Ok(spec),
                Err(Error::Calibration { .. }) => continue,
                Err(e) => return Err(e),
            }
        }
        Err(Error::Generation {
            attempts: MAX_RESAMPLE_ATTEMPTS,
        })
    }

    pub fn profile(&self) -> Result<PowerDelayProfile> {
        pdp_from_spec(self.target_rms_ds_ns, self.dominance_db)
    }
}

/// One fading realization of a profile, without any acceptance check.
pub fn draw_taps<R: Rng + ?Sized>(pdp: &PowerDelayProfile, rng: &mut R) -> [C64; NUM_TAPS] {
    let mut taps = [C64::new(0.0, 0.0); NUM_TAPS];
    taps[0] = C64::new(pdp.powers[0].sqrt(), 0.0);
    for (t, &p) in taps.iter_mut().zip(&pdp.powers).skip(1) {
        *t = complex_gaussian(rng, p);
    }
    taps
}

/// Sample a channel whose realized dominance and RMS delay spread both fall
/// inside their windows, resampling the external taps as needed.
pub fn sample_si_channel(spec: &ChannelSpec) -> Result<SIChannel> {
    let pdp = spec.profile()?;
    let mut rng = rng_from_seed(spec.seed);
    for _ in 0..MAX_RESAMPLE_ATTEMPTS {
        let taps = draw_taps(&pdp, &mut rng);
        let ch = SIChannel::from_taps(taps)?;
        let dom = ch.internal_dominance_db();
        let ds = ch.rms_delay_spread_ns();
        if (DOMINANCE_RANGE_DB.0..=DOMINANCE_RANGE_DB.1).contains(&dom)
            && (RMS_DS_RANGE_NS.0..=RMS_DS_RANGE_NS.1).contains(&ds)
        {
            return Ok(ch);
        }
    }
    Err(Error::Generation {
        attempts: MAX_RESAMPLE_ATTEMPTS,
    })
}

/// Convenience: draw a spec from `seed` and sample it.
pub fn random_si_channel(seed: u64) -> Result<SIChannel> {
    sample_si_channel(&ChannelSpec::draw(seed)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn single_tap_has_no_spread() {
        let mut taps = [c(0.0, 0.0); 5];
        taps[2] = c(0.3, -0.4);
        assert_eq!(rms_delay_spread(&taps, 50.0).unwrap(), 0.0);
    }

    #[test]
    fn two_equal_taps() {
        let taps = [c(1.0, 0.0), c(0.0, 1.0)];
        assert!((rms_delay_spread(&taps, 50.0).unwrap() - 25.0).abs() < 1e-12);
    }

    #[test]
    fn all_zero_is_degenerate() {
        assert!(matches!(
            rms_delay_spread(&[c(0.0, 0.0); 12], 50.0),
            Err(Error::Degenerate(_))
        ));
    }

    /// RMS spread of the exponential profile from geometric-series sums.
    fn closed_form_rms(pdp: &PowerDelayProfile) -> f64 {
        let ts = TAP_SPACING_NS;
        let q = (-ts / pdp.decay_ns).exp();
        let p1 = pdp.powers[1];
        let p0 = pdp.powers[0];
        let m = 11.0;
        // sums over j = 0..m-1 of q^j, j q^j, j^2 q^j
        let s0 = (1.0 - q.powf(m)) / (1.0 - q);
        let s1 = (q - m * q.powf(m) + (m - 1.0) * q.powf(m + 1.0)) / (1.0 - q).powi(2);
        let s2 = {
            // d/dq (q * d/dq sum q^j) * q
            let num = q * (1.0 + q) - q.powf(m) * ((m * m) - (2.0 * m * m - 2.0 * m - 1.0) * q + (m - 1.0).powi(2) * q * q);
            num / (1.0 - q).powi(3)
        };
        // delay of tap l = l*ts with l = j+1
        let total = p0 + p1 * s0;
        let mean = p1 * ts * (s1 + s0) / total;
        let second = p1 * ts * ts * (s2 + 2.0 * s1 + s0) / total;
        (second - mean * mean).sqrt()
    }

    #[test]
    fn closed_form_oracle_matches_brute_force_sum() {
        let pdp = PowerDelayProfile {
            powers: exponential_profile(7.0, 33.0),
            decay_ns: 33.0,
        };
        let brute = rms_of_profile(&pdp.powers, TAP_SPACING_NS).unwrap();
        assert!((closed_form_rms(&pdp) - brute).abs() < 1e-9);
    }

    #[test]
    fn profile_hits_target_spread() {
        let pdp = pdp_from_spec(30.0, 7.5).unwrap();
        assert!((closed_form_rms(&pdp) - 30.0).abs() < 0.5);
        for (target, dom) in [(20.0, 10.0), (40.0, 10.0), (40.0, 5.0)] {
            let pdp = pdp_from_spec(target, dom).unwrap();
            assert!((closed_form_rms(&pdp) - target).abs() < 0.5, "{target} {dom}");
        }
    }

    #[test]
    fn profile_normalization_and_dominance() {
        let pdp = pdp_from_spec(25.0, 10.0).unwrap();
        assert!((pdp.powers.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        assert!((10.0 * (pdp.powers[0] / pdp.powers[1]).log10() - 10.0).abs() < 1e-6);
        for w in pdp.powers[1..].windows(2) {
            assert!(w[1] < w[0]);
        }
    }

    #[test]
    fn unreachable_spread_is_calibration_failure() {
        // At 5 dB dominance even a two-tap profile spreads beyond 20 ns.
        match pdp_from_spec(20.0, 5.0) {
            Err(Error::Calibration { attainable: Some((lo, _)), .. }) => assert!(lo > 20.0),
            other => panic!("{other:?}"),
        }
        assert!(pdp_from_spec(19.0, 7.0).is_err());
        assert!(pdp_from_spec(30.0, 11.0).is_err());
    }

    #[test]
    fn sampled_channels_respect_windows() {
        for seed in 0..200 {
            let ch = random_si_channel(seed).unwrap();
            assert_eq!(ch.taps().len(), 12);
            assert_eq!(ch.internal().im, 0.0);
            assert!((5.0..=10.0).contains(&ch.internal_dominance_db()));
            assert!((20.0..=40.0).contains(&ch.rms_delay_spread_ns()));
        }
    }

    #[test]
    fn sampling_is_deterministic() {
        let spec = ChannelSpec::draw(42).unwrap();
        assert_eq!(sample_si_channel(&spec).unwrap(), sample_si_channel(&spec).unwrap());
        assert_ne!(random_si_channel(42).unwrap(), random_si_channel(43).unwrap());
    }

    #[test]
    fn mean_fading_power_follows_profile() {
        let pdp = pdp_from_spec(30.0, 8.0).unwrap();
        let mut rng = rng_from_seed(9);
        let n = 10_000;
        let mut acc = [0.0; NUM_TAPS];
        for _ in 0..n {
            for (a, t) in acc.iter_mut().zip(draw_taps(&pdp, &mut rng)) {
                *a += t.norm_sqr();
            }
        }
        for (a, p) in acc.iter().zip(&pdp.powers) {
            let rel = (a / n as f64 - p).abs() / p;
            assert!(rel < 0.1, "{rel}");
        }
    }

    #[test]
    fn convolution_is_causal_and_truncated() {
        let x = vec![c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(2.0, 0.0)];
        let y = convolve_causal(&x, &[c(0.5, 0.0), c(0.0, 1.0)]);
        assert_eq!(y, vec![c(0.5, 0.0), c(0.0, 1.0), c(0.0, 0.0), c(1.0, 0.0)]);
    }
}
