//! OFDM baseband transmit packets.
//!
//! Packets are payload-only OFDM symbol streams: random 64-QAM symbols on the
//! data subcarriers, zeros on DC and the guard band, an inverse FFT and a
//! cyclic prefix per symbol. The stream is truncated to the packet length and
//! normalized to unit mean power.

use rand::Rng;
use rustfft::FftPlanner;

use crate::rng::rng_from_seed;
use crate::{Error, Result, C64};

/// Baseband sample rate of the 20 MHz channel.
pub const SAMPLE_RATE_HZ: f64 = 20.0e6;

/// Number of samples in one WLAN packet.
pub const PACKET_SAMPLES: usize = 3218;

/// A finite sequence of complex baseband samples.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexSignal {
    samples: Vec<C64>,
    sample_rate: f64,
}

impl ComplexSignal {
    pub fn new(samples: Vec<C64>, sample_rate: f64) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::shape("signal must contain at least one sample"));
        }
        if !(sample_rate > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "sample rate must be positive, got {sample_rate}"
            )));
        }
        Ok(Self {
            samples,
            sample_rate,
        })
    }

    /// Signal at the default 20 MHz rate.
    pub fn baseband(samples: Vec<C64>) -> Result<Self> {
        Self::new(samples, SAMPLE_RATE_HZ)
    }

    pub fn samples(&self) -> &[C64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<C64> {
        self.samples
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn mean_power(&self) -> f64 {
        mean_power(&self.samples)
    }
}

pub fn mean_power(samples: &[C64]) -> f64 {
    samples.iter().map(|s| s.norm_sqr()).sum::<f64>() / samples.len() as f64
}

/// Peak-to-average power ratio in dB.
pub fn papr_db(samples: &[C64]) -> f64 {
    let peak = samples.iter().map(|s| s.norm_sqr()).fold(0.0, f64::max);
    10.0 * (peak / mean_power(samples)).log10()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Constellation {
    Qam64,
}

impl Constellation {
    pub fn bits_per_symbol(self) -> usize {
        match self {
            Constellation::Qam64 => 6,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OfdmConfig {
    pub fft_size: usize,
    pub cp_length: usize,
    /// Active subcarriers, split evenly on both sides of DC.
    pub data_subcarriers: usize,
    pub constellation: Constellation,
    pub packet_samples: usize,
}

impl Default for OfdmConfig {
    fn default() -> Self {
        Self {
            fft_size: 64,
            cp_length: 16,
            data_subcarriers: 52,
            constellation: Constellation::Qam64,
            packet_samples: PACKET_SAMPLES,
        }
    }
}

impl OfdmConfig {
    pub fn validate(&self) -> Result<()> {
        if self.fft_size < 4 || !self.fft_size.is_power_of_two() {
            return Err(Error::InvalidArgument(format!(
                "fft_size must be a power of two >= 4, got {}",
                self.fft_size
            )));
        }
        if self.cp_length >= self.fft_size {
            return Err(Error::InvalidArgument(format!(
                "cp_length {} must be smaller than fft_size {}",
                self.cp_length, self.fft_size
            )));
        }
        if self.data_subcarriers == 0
            || self.data_subcarriers % 2 != 0
            || self.data_subcarriers >= self.fft_size
            || self.data_subcarriers / 2 >= self.fft_size / 2
        {
            return Err(Error::InvalidArgument(format!(
                "data_subcarriers must be even, nonzero and fit beside DC in {} bins, got {}",
                self.fft_size, self.data_subcarriers
            )));
        }
        if self.packet_samples == 0 {
            return Err(Error::InvalidArgument("packet_samples must be > 0".into()));
        }
        Ok(())
    }

    pub fn symbol_length(&self) -> usize {
        self.fft_size + self.cp_length
    }

    /// FFT bin indices of the data subcarriers (DC excluded).
    pub fn data_bins(&self) -> Vec<usize> {
        let half = self.data_subcarriers / 2;
        let n = self.fft_size;
        (1..=half)
            .map(|k| n - k)
            .rev()
            .chain(1..=half)
            .collect()
    }
}

/// 802.11 3-bit Gray code to PAM level.
fn gray_level(b0: u8, b1: u8, b2: u8) -> f64 {
    match (b0, b1, b2) {
        (0, 0, 0) => -7.0,
        (0, 0, 1) => -5.0,
        (0, 1, 1) => -3.0,
        (0, 1, 0) => -1.0,
        (1, 1, 0) => 1.0,
        (1, 1, 1) => 3.0,
        (1, 0, 1) => 5.0,
        _ => 7.0,
    }
}

/// Gray-mapped square 64-QAM with unit average energy.
///
/// `bits` holds one bit per element (0 or 1); the first three bits of each
/// group select the in-phase level and the last three the quadrature level.
pub fn qam64_map(bits: &[u8]) -> Result<Vec<C64>> {
    if bits.len() % 6 != 0 {
        return Err(Error::shape(format!(
            "64-QAM needs a multiple of 6 bits, got {}",
            bits.len()
        )));
    }
    if let Some(pos) = bits.iter().position(|&b| b > 1) {
        return Err(Error::InvalidArgument(format!(
            "bit {pos} has value {}, expected 0 or 1",
            bits[pos]
        )));
    }
    let scale = 1.0 / 42f64.sqrt();
    Ok(bits
        .chunks_exact(6)
        .map(|g| {
            C64::new(
                gray_level(g[0], g[1], g[2]) * scale,
                gray_level(g[3], g[4], g[5]) * scale,
            )
        })
        .collect())
}

/// One packet of OFDM baseband samples, deterministic in `seed`.
pub fn generate_ofdm_packet(seed: u64, config: &OfdmConfig) -> Result<ComplexSignal> {
    config.validate()?;
    let mut rng = rng_from_seed(seed);
    let bins = config.data_bins();
    let n = config.fft_size;
    let sym_len = config.symbol_length();
    let n_symbols = config.packet_samples.div_ceil(sym_len);
    let bits_per_symbol = config.constellation.bits_per_symbol() * bins.len();

    let ifft = FftPlanner::<f64>::new().plan_fft_inverse(n);
    let mut out = Vec::with_capacity(n_symbols * sym_len);
    let mut bits = vec![0u8; bits_per_symbol];
    let mut freq = vec![C64::new(0.0, 0.0); n];
    for _ in 0..n_symbols {
        for b in bits.iter_mut() {
            *b = rng.random_range(0..2u8);
        }
        let symbols = qam64_map(&bits)?;
        freq.iter_mut().for_each(|f| *f = C64::new(0.0, 0.0));
        for (&bin, &sym) in bins.iter().zip(&symbols) {
            freq[bin] = sym;
        }
        let mut time = freq.clone();
        ifft.process(&mut time);
        out.extend_from_slice(&time[n - config.cp_length..]);
        out.extend_from_slice(&time);
    }
    out.truncate(config.packet_samples);

    let scale = 1.0 / mean_power(&out).sqrt();
    out.iter_mut().for_each(|s| *s *= scale);
    ComplexSignal::baseband(out)
}
