//! Labeled SI datasets and their on-disk format.
//!
//! A dataset holds ten file records, each one time-invariant SI system
//! driven by its own OFDM packet. Hammerstein records pass the packet
//! through the PA, then the channel, then add receiver noise. Wiener
//! records pass the packet through the channel, add noise, then clip.
//!
//! # Binary format
//!
//! All integers and floats are little-endian.
//!
//! ```text
//! header   "SICD" | version u16 | system u8 | taxonomy u8 | records u16
//!          | si_sdr0 f64 | master_seed u64
//! record   file_id u16 | samples u32 | input (re f64, im f64)*samples
//!          | output (re f64, im f64)*samples | 12 taps (re f64, im f64)
//!          | nl kind u8 | nl param f64 | achieved SI-SDR f64 | noise_seed u64
//! ```

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::Rng;
use serde::Serialize;

use crate::channel::{random_si_channel, SIChannel, NUM_TAPS};
use crate::nonlinearity::{attainable_range, calibrate, NonlinearityKind, NonlinearitySpec};
use crate::rng::{complex_gaussian, derive_seed, rng_from_seed, Stream};
use crate::waveform::{generate_ofdm_packet, ComplexSignal, OfdmConfig};
use crate::{Error, Result, C64};

pub const MAGIC: &[u8; 4] = b"SICD";
pub const FORMAT_VERSION: u16 = 1;
pub const RECORDS_PER_DATASET: usize = 10;
pub const DEFAULT_SI_SDR0_DB: f64 = 10.0;
/// Half-width of the SI-SDR draw interval for variable nonlinearities.
pub const SI_SDR_SPREAD_DB: f64 = 4.0;
/// Receiver noise level relative to the SI component.
pub const NOISE_LEVEL_DB: f64 = -90.0;
/// Seed of the fixed OFDM packet every nonlinearity is calibrated on.
pub const PROBE_SEED: u64 = 0x5EED_0F_C0FFEE;
pub const SI_SDR0_RANGE_DB: (f64, f64) = (2.0, 40.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SystemKind {
    Hammerstein,
    Wiener,
}

impl SystemKind {
    pub fn code(self) -> u8 {
        match self {
            SystemKind::Hammerstein => 0,
            SystemKind::Wiener => 1,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(SystemKind::Hammerstein),
            1 => Some(SystemKind::Wiener),
            _ => None,
        }
    }
}

impl fmt::Display for SystemKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SystemKind::Hammerstein => "hammerstein",
            SystemKind::Wiener => "wiener",
        })
    }
}

impl FromStr for SystemKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "h" | "hammerstein" => Ok(SystemKind::Hammerstein),
            "w" | "wiener" => Ok(SystemKind::Wiener),
            other => Err(Error::InvalidArgument(format!("unknown system '{other}'"))),
        }
    }
}

/// Which parts of the SI system change between file records.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Taxonomy {
    InvNlInvSi,
    InvNlVarSi,
    VarNlVarSi,
}

impl Taxonomy {
    pub const ALL: [Taxonomy; 3] = [Taxonomy::InvNlInvSi, Taxonomy::InvNlVarSi, Taxonomy::VarNlVarSi];

    pub fn code(self) -> u8 {
        match self {
            Taxonomy::InvNlInvSi => 0,
            Taxonomy::InvNlVarSi => 1,
            Taxonomy::VarNlVarSi => 2,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        Self::ALL.into_iter().find(|t| t.code() == code)
    }

    pub fn variable_channel(self) -> bool {
        !matches!(self, Taxonomy::InvNlInvSi)
    }

    pub fn variable_nonlinearity(self) -> bool {
        matches!(self, Taxonomy::VarNlVarSi)
    }

    /// Label in the naming order used for `system`.
    pub fn label(self, system: SystemKind) -> &'static str {
        match (system, self) {
            (SystemKind::Hammerstein, Taxonomy::InvNlInvSi) => "invNL+invSI",
            (SystemKind::Hammerstein, Taxonomy::InvNlVarSi) => "invNL+varSI",
            (SystemKind::Hammerstein, Taxonomy::VarNlVarSi) => "varNL+varSI",
            (SystemKind::Wiener, Taxonomy::InvNlInvSi) => "invSI+invNL",
            (SystemKind::Wiener, Taxonomy::InvNlVarSi) => "varSI+invNL",
            (SystemKind::Wiener, Taxonomy::VarNlVarSi) => "varSI+varNL",
        }
    }
}

impl FromStr for Taxonomy {
    type Err = Error;

    /// Accepts either naming order, case-insensitively.
    fn from_str(s: &str) -> Result<Self> {
        let norm = s.to_ascii_lowercase().replace(['_', '-', ' '], "+");
        let mut parts: Vec<&str> = norm.split('+').filter(|p| !p.is_empty()).collect();
        parts.sort_unstable();
        match parts.as_slice() {
            ["invnl", "invsi"] => Ok(Taxonomy::InvNlInvSi),
            ["invnl", "varsi"] => Ok(Taxonomy::InvNlVarSi),
            ["varnl", "varsi"] => Ok(Taxonomy::VarNlVarSi),
            _ => Err(Error::InvalidArgument(format!(
                "unknown taxonomy '{s}' (expected invNL+invSI, invNL+varSI or varNL+varSI)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FileRecord {
    pub file_id: u16,
    /// `s[k]` for Hammerstein records, `z[k]` for Wiener records.
    pub input: ComplexSignal,
    /// `y_H[k]` or `y_W[k]`.
    pub output: ComplexSignal,
    pub truth_channel: SIChannel,
    pub truth_nl: NonlinearitySpec,
    pub noise_seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub system: SystemKind,
    pub taxonomy: Taxonomy,
    pub si_sdr0: f64,
    pub master_seed: u64,
    pub records: Vec<FileRecord>,
}

impl Dataset {
    pub fn label(&self) -> &'static str {
        self.taxonomy.label(self.system)
    }

    pub fn samples_per_record(&self) -> usize {
        self.records.first().map_or(0, |r| r.input.len())
    }
}

/// Seeds and operating point for one generated dataset.
///
/// Components the taxonomy holds invariant (the channel, the nonlinearity)
/// derive from `system_seed`; waveforms, noise and variable components
/// derive from `master_seed`. Two requests sharing a `system_seed` therefore
/// describe the same invariant system driven by different data.
#[derive(Debug, Clone, PartialEq)]
pub struct GenerationRequest {
    pub system: SystemKind,
    pub taxonomy: Taxonomy,
    pub si_sdr0: f64,
    pub master_seed: u64,
    pub system_seed: u64,
    pub ofdm: OfdmConfig,
}

impl GenerationRequest {
    pub fn new(system: SystemKind, taxonomy: Taxonomy, si_sdr0: f64, master_seed: u64) -> Self {
        Self {
            system,
            taxonomy,
            si_sdr0,
            master_seed,
            system_seed: master_seed,
            ofdm: OfdmConfig::default(),
        }
    }

    pub fn with_system_seed(mut self, system_seed: u64) -> Self {
        self.system_seed = system_seed;
        self
    }
}

pub fn generate_hammerstein(taxonomy: Taxonomy, si_sdr0: f64, master_seed: u64) -> Result<Dataset> {
    generate(&GenerationRequest::new(SystemKind::Hammerstein, taxonomy, si_sdr0, master_seed))
}

pub fn generate_wiener(taxonomy: Taxonomy, si_sdr0: f64, master_seed: u64) -> Result<Dataset> {
    generate(&GenerationRequest::new(SystemKind::Wiener, taxonomy, si_sdr0, master_seed))
}

pub fn calibration_probe() -> Vec<C64> {
    generate_ofdm_packet(PROBE_SEED, &OfdmConfig::default())
        .expect("default OFDM config is valid")
        .into_samples()
}

/// Target SI-SDR for a variable nonlinearity: uniform over `si_sdr0 ± 4 dB`,
/// truncated to what the nonlinearity can attain on the probe.
fn draw_target(seed: u64, si_sdr0: f64, attainable: (f64, f64)) -> Result<f64> {
    let margin = 0.05;
    let lo = (si_sdr0 - SI_SDR_SPREAD_DB).max(attainable.0 + margin);
    let hi = (si_sdr0 + SI_SDR_SPREAD_DB).min(attainable.1 - margin);
    if lo > hi {
        return Err(Error::Calibration {
            message: format!(
                "SI-SDR interval {si_sdr0} ± {SI_SDR_SPREAD_DB} dB lies outside the attainable range"
            ),
            attainable: Some(attainable),
        });
    }
    let mut rng = rng_from_seed(seed);
    Ok(rng.random_range(lo..=hi))
}

fn noise(seed: u64, len: usize, power: f64) -> Vec<C64> {
    let mut rng = rng_from_seed(seed);
    (0..len).map(|_| complex_gaussian(&mut rng, power)).collect()
}

fn noise_power_for(si: &[C64]) -> f64 {
    let p = si.iter().map(|x| x.norm_sqr()).sum::<f64>() / si.len() as f64;
    p * 10f64.powf(NOISE_LEVEL_DB / 10.0)
}

/// `PA(s) * h + n` with noise 90 dB below the empirical SI power.
pub fn hammerstein_output(
    input: &[C64],
    channel: &SIChannel,
    nl: &NonlinearitySpec,
    noise_seed: u64,
) -> Vec<C64> {
    let si = channel.apply(&nl.apply(input));
    let n = noise(noise_seed, si.len(), noise_power_for(&si));
    si.iter().zip(&n).map(|(a, b)| a + b).collect()
}

/// `AD(z * h + n)` with noise 90 dB below the empirical SI power.
pub fn wiener_output(
    input: &[C64],
    channel: &SIChannel,
    nl: &NonlinearitySpec,
    noise_seed: u64,
) -> Vec<C64> {
    let si = channel.apply(input);
    let n = noise(noise_seed, si.len(), noise_power_for(&si));
    let received: Vec<C64> = si.iter().zip(&n).map(|(a, b)| a + b).collect();
    nl.apply(&received)
}

pub fn generate(req: &GenerationRequest) -> Result<Dataset> {
    let (lo, hi) = SI_SDR0_RANGE_DB;
    if !(lo..=hi).contains(&req.si_sdr0) {
        return Err(Error::InvalidArgument(format!(
            "si_sdr0 {} dB outside [{lo}, {hi}]",
            req.si_sdr0
        )));
    }
    let probe = calibration_probe();
    let nl_kind = match req.system {
        SystemKind::Hammerstein => NonlinearityKind::PaArctan,
        SystemKind::Wiener => NonlinearityKind::AdClip,
    };

    // The reference channel is the shared channel for invariant-SI data and
    // the clip calibration channel for invariant-NL Wiener data.
    let reference_channel = random_si_channel(derive_seed(req.system_seed, Stream::Channel, 0))?;

    let calibrate_for = |channel: &SIChannel, target: f64| -> Result<NonlinearitySpec> {
        match req.system {
            SystemKind::Hammerstein => calibrate(nl_kind, target, &probe),
            SystemKind::Wiener => calibrate(nl_kind, target, &channel.apply(&probe)),
        }
    };
    let shared_nl = if req.taxonomy.variable_nonlinearity() {
        None
    } else {
        Some(calibrate_for(&reference_channel, req.si_sdr0)?)
    };

    let mut records = Vec::with_capacity(RECORDS_PER_DATASET);
    for id in 0..RECORDS_PER_DATASET as u64 {
        let input = generate_ofdm_packet(derive_seed(req.master_seed, Stream::Waveform, id), &req.ofdm)?;
        let channel = if req.taxonomy.variable_channel() {
            random_si_channel(derive_seed(req.master_seed, Stream::Channel, id + 1))?
        } else {
            reference_channel.clone()
        };
        let nl = match shared_nl {
            Some(nl) => nl,
            None => {
                let attainable = match req.system {
                    SystemKind::Hammerstein => attainable_range(nl_kind, &probe)?,
                    SystemKind::Wiener => attainable_range(nl_kind, &channel.apply(&probe))?,
                };
                let target = draw_target(
                    derive_seed(req.master_seed, Stream::Nonlinearity, id),
                    req.si_sdr0,
                    attainable,
                )?;
                calibrate_for(&channel, target)?
            }
        };
        let noise_seed = derive_seed(req.master_seed, Stream::Noise, id);
        let output = match req.system {
            SystemKind::Hammerstein => hammerstein_output(input.samples(), &channel, &nl, noise_seed),
            SystemKind::Wiener => wiener_output(input.samples(), &channel, &nl, noise_seed),
        };
        records.push(FileRecord {
            file_id: id as u16,
            output: ComplexSignal::new(output, input.sample_rate())?,
            input,
            truth_channel: channel,
            truth_nl: nl,
            noise_seed,
        });
    }

    Ok(Dataset {
        system: req.system,
        taxonomy: req.taxonomy,
        si_sdr0: req.si_sdr0,
        master_seed: req.master_seed,
        records,
    })
}

// ---------------------------------------------------------------------------
// Binary encoding

fn put_c64(buf: &mut Vec<u8>, v: C64) {
    buf.extend_from_slice(&v.re.to_le_bytes());
    buf.extend_from_slice(&v.im.to_le_bytes());
}

pub fn encode_dataset(ds: &Dataset) -> Result<Vec<u8>> {
    let n = ds.samples_per_record();
    let mut buf = Vec::with_capacity(32 + ds.records.len() * (n * 32 + 256));
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    buf.push(ds.system.code());
    buf.push(ds.taxonomy.code());
    let count = u16::try_from(ds.records.len())
        .map_err(|_| Error::InvalidArgument("too many records".into()))?;
    buf.extend_from_slice(&count.to_le_bytes());
    buf.extend_from_slice(&ds.si_sdr0.to_le_bytes());
    buf.extend_from_slice(&ds.master_seed.to_le_bytes());
    for rec in &ds.records {
        if rec.input.len() != rec.output.len() {
            return Err(Error::shape(format!(
                "record {}: input length {} != output length {}",
                rec.file_id,
                rec.input.len(),
                rec.output.len()
            )));
        }
        buf.extend_from_slice(&rec.file_id.to_le_bytes());
        let len = u32::try_from(rec.input.len())
            .map_err(|_| Error::InvalidArgument("record too long".into()))?;
        buf.extend_from_slice(&len.to_le_bytes());
        for &s in rec.input.samples().iter().chain(rec.output.samples()) {
            put_c64(&mut buf, s);
        }
        for &t in rec.truth_channel.taps() {
            put_c64(&mut buf, t);
        }
        buf.push(rec.truth_nl.kind.code());
        buf.extend_from_slice(&rec.truth_nl.param.to_le_bytes());
        buf.extend_from_slice(&rec.truth_nl.achieved_si_sdr.to_le_bytes());
        buf.extend_from_slice(&rec.noise_seed.to_le_bytes());
    }
    Ok(buf)
}

/// Bounds-checked little-endian reader that reports byte offsets.
pub(crate) struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    pub(crate) fn new(bytes: &'a [u8]) -> Self {
        Self { bytes, pos: 0 }
    }

    pub(crate) fn pos(&self) -> usize {
        self.pos
    }

    pub(crate) fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        match end {
            Some(end) => {
                let s = &self.bytes[self.pos..end];
                self.pos = end;
                Ok(s)
            }
            None => Err(Error::Format {
                offset: self.pos,
                message: format!(
                    "truncated: need {n} bytes for {what}, {} left",
                    self.bytes.len() - self.pos
                ),
            }),
        }
    }

    pub(crate) fn u8(&mut self, what: &str) -> Result<u8> {
        Ok(self.take(1, what)?[0])
    }

    pub(crate) fn u16(&mut self, what: &str) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2, what)?.try_into().unwrap()))
    }

    pub(crate) fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    pub(crate) fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }

    pub(crate) fn f64(&mut self, what: &str) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }

    pub(crate) fn c64(&mut self, what: &str) -> Result<C64> {
        let re = self.f64(what)?;
        let im = self.f64(what)?;
        Ok(C64::new(re, im))
    }

    pub(crate) fn error(&self, offset: usize, message: impl Into<String>) -> Error {
        Error::Format {
            offset,
            message: message.into(),
        }
    }

    pub(crate) fn finish(&self) -> Result<()> {
        if self.pos != self.bytes.len() {
            return Err(self.error(
                self.pos,
                format!("{} trailing bytes", self.bytes.len() - self.pos),
            ));
        }
        Ok(())
    }
}

pub fn decode_dataset(bytes: &[u8]) -> Result<Dataset> {
    let mut r = Reader::new(bytes);
    let magic = r.take(4, "magic")?;
    if magic != MAGIC {
        return Err(r.error(0, format!("bad magic {magic:02x?}, expected \"SICD\"")));
    }
    let at = r.pos();
    let version = r.u16("version")?;
    if version != FORMAT_VERSION {
        return Err(r.error(at, format!("unsupported version {version}, expected {FORMAT_VERSION}")));
    }
    let at = r.pos();
    let system = SystemKind::from_code(r.u8("system")?)
        .ok_or_else(|| r.error(at, "unknown system code"))?;
    let at = r.pos();
    let taxonomy = Taxonomy::from_code(r.u8("taxonomy")?)
        .ok_or_else(|| r.error(at, "unknown taxonomy code"))?;
    let count = r.u16("record count")? as usize;
    let si_sdr0 = r.f64("si_sdr0")?;
    let master_seed = r.u64("master_seed")?;

    let mut records = Vec::with_capacity(count.min(1024));
    for _ in 0..count {
        let file_id = r.u16("file_id")?;
        let at = r.pos();
        let n = r.u32("sample count")? as usize;
        if n == 0 {
            return Err(r.error(at, "record with zero samples"));
        }
        // Reject absurd counts before allocating.
        if n.saturating_mul(32) > bytes.len() - r.pos() {
            return Err(r.error(at, format!("truncated: record claims {n} samples")));
        }
        let mut input = Vec::with_capacity(n);
        for _ in 0..n {
            input.push(r.c64("input sample")?);
        }
        let mut output = Vec::with_capacity(n);
        for _ in 0..n {
            output.push(r.c64("output sample")?);
        }
        let mut taps = [C64::new(0.0, 0.0); NUM_TAPS];
        for t in taps.iter_mut() {
            *t = r.c64("channel tap")?;
        }
        let at = r.pos();
        let kind = NonlinearityKind::from_code(r.u8("nonlinearity kind")?)
            .ok_or_else(|| r.error(at, "unknown nonlinearity kind"))?;
        let param = r.f64("nonlinearity param")?;
        let achieved_si_sdr = r.f64("achieved SI-SDR")?;
        let noise_seed = r.u64("noise_seed")?;
        let truth_channel = SIChannel::from_taps(taps).map_err(|e| r.error(at, e.to_string()))?;
        records.push(FileRecord {
            file_id,
            input: ComplexSignal::baseband(input)?,
            output: ComplexSignal::baseband(output)?,
            truth_channel,
            truth_nl: NonlinearitySpec {
                kind,
                param,
                achieved_si_sdr,
            },
            noise_seed,
        });
    }
    r.finish()?;
    Ok(Dataset {
        system,
        taxonomy,
        si_sdr0,
        master_seed,
        records,
    })
}

pub fn write_dataset(ds: &Dataset, path: &Path) -> Result<()> {
    let bytes = encode_dataset(ds)?;
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))?;
    write_sidecar(ds, &sidecar_path(path))
}

pub fn read_dataset(path: &Path) -> Result<Dataset> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_dataset(&bytes)
}

/// `<path>.toml`, next to the binary file.
pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".toml");
    PathBuf::from(s)
}

#[derive(Serialize)]
struct SidecarRecord {
    file_id: u16,
    samples: usize,
    channel_taps: Vec<[f64; 2]>,
    rms_delay_spread_ns: f64,
    internal_dominance_db: f64,
    nonlinearity: String,
    nonlinearity_param: f64,
    achieved_si_sdr_db: f64,
    noise_seed: u64,
}

#[derive(Serialize)]
struct Sidecar {
    format: String,
    version: u16,
    system: String,
    taxonomy: String,
    si_sdr0_db: f64,
    master_seed: u64,
    record_count: usize,
    records: Vec<SidecarRecord>,
}

pub fn sidecar_text(ds: &Dataset) -> Result<String> {
    let side = Sidecar {
        format: "SICD".into(),
        version: FORMAT_VERSION,
        system: ds.system.to_string(),
        taxonomy: ds.label().into(),
        si_sdr0_db: ds.si_sdr0,
        master_seed: ds.master_seed,
        record_count: ds.records.len(),
        records: ds
            .records
            .iter()
            .map(|r| SidecarRecord {
                file_id: r.file_id,
                samples: r.input.len(),
                channel_taps: r.truth_channel.taps().iter().map(|t| [t.re, t.im]).collect(),
                rms_delay_spread_ns: r.truth_channel.rms_delay_spread_ns(),
                internal_dominance_db: r.truth_channel.internal_dominance_db(),
                nonlinearity: r.truth_nl.kind.to_string(),
                nonlinearity_param: r.truth_nl.param,
                achieved_si_sdr_db: r.truth_nl.achieved_si_sdr,
                noise_seed: r.noise_seed,
            })
            .collect(),
    };
    toml::to_string(&side).map_err(|e| Error::Config(e.to_string()))
}

fn write_sidecar(ds: &Dataset, path: &Path) -> Result<()> {
    std::fs::write(path, sidecar_text(ds)?).map_err(|e| Error::io(path, e))
}
