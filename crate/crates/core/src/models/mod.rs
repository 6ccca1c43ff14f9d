//! Neural Hammerstein architectures and least-squares baselines.
//!
//! All three networks share the same magnitude MLP front end: the input is
//! split into magnitude and unit phase, the magnitude runs through bias-free
//! complex dense layers with split-tanh activations, and the result is
//! recombined with the phase before the linear (convolutional) stage.
//!
//! | kind         | MLP                       | linear stage                              |
//! |--------------|---------------------------|-------------------------------------------|
//! | `GlobalH`    | 1→P→P→1, shared           | one causal kernel of length L, shared     |
//! | `AdaptiveH`  | 1→P→P→1, shared           | one kernel per signal, adaptive           |
//! | `ParallelH`  | 1→P→P (no output layer)   | P kernels per signal summed, adaptive     |

mod baseline;
mod snapshot;
mod sweep;
mod train;

use std::fmt;
use std::str::FromStr;

use crate::cxnn::{Axis, CxArray, Graph, Parameter, Role, Var};
use crate::dataset::Dataset;
use crate::rng::{complex_gaussian, derive_seed, rng_from_seed, Stream};
use crate::{Error, Result, C64};

pub use baseline::{
    linear_fir_fit, memory_poly_basis, memory_poly_fit, memory_poly_fit_scoped, FitScope, PolyFit, RIDGE,
};
pub use snapshot::{decode_model, encode_model, read_model, write_model, MODEL_MAGIC};
pub use sweep::{sdr_sweep, SweepConfig, SweepRow};
pub use train::{
    adapt, evaluate, fit, fit_monitored, TracePoint, TrainConfig, TrainTrace, DEFAULT_EPOCHS, DEFAULT_LOG_EVERY,
};

pub const DEFAULT_NONLINEAR_ORDER: usize = 8;
pub const DEFAULT_LINEAR_ORDER: usize = 32;
pub const DEFAULT_NUM_SIGNALS: usize = 10;

const DENSE_INIT_STD: f64 = 0.1;
const KERNEL_INIT_GAIN: f64 = 0.1;
const KERNEL_INIT_STD: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelKind {
    GlobalH,
    AdaptiveH,
    ParallelH,
    MemoryPoly,
    LinearFir,
}

impl ModelKind {
    pub fn is_neural(self) -> bool {
        matches!(self, ModelKind::GlobalH | ModelKind::AdaptiveH | ModelKind::ParallelH)
    }

    pub fn code(self) -> u8 {
        match self {
            ModelKind::GlobalH => 0,
            ModelKind::AdaptiveH => 1,
            ModelKind::ParallelH => 2,
            ModelKind::MemoryPoly => 3,
            ModelKind::LinearFir => 4,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        [
            ModelKind::GlobalH,
            ModelKind::AdaptiveH,
            ModelKind::ParallelH,
            ModelKind::MemoryPoly,
            ModelKind::LinearFir,
        ]
        .into_iter()
        .find(|k| k.code() == code)
    }

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::GlobalH => "global",
            ModelKind::AdaptiveH => "adaptive",
            ModelKind::ParallelH => "parallel",
            ModelKind::MemoryPoly => "memory_poly",
            ModelKind::LinearFir => "linear_fir",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "global" | "global_h" => Ok(ModelKind::GlobalH),
            "adaptive" | "adaptive_h" => Ok(ModelKind::AdaptiveH),
            "parallel" | "parallel_h" => Ok(ModelKind::ParallelH),
            "memory_poly" | "mp" => Ok(ModelKind::MemoryPoly),
            "linear_fir" | "fir" | "linear" => Ok(ModelKind::LinearFir),
            other => Err(Error::InvalidArgument(format!("unknown model kind '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModelSpec {
    pub kind: ModelKind,
    /// Hidden units of the MLP, `P`.
    pub nonlinear_order: usize,
    /// Kernel length of the linear stage, `L`.
    pub linear_order: usize,
    pub num_signals: usize,
    pub init_seed: u64,
}

impl ModelSpec {
    pub fn new(kind: ModelKind) -> Self {
        Self {
            kind,
            nonlinear_order: DEFAULT_NONLINEAR_ORDER,
            linear_order: DEFAULT_LINEAR_ORDER,
            num_signals: DEFAULT_NUM_SIGNALS,
            init_seed: 0,
        }
    }

    pub fn with_orders(mut self, nonlinear_order: usize, linear_order: usize) -> Self {
        self.nonlinear_order = nonlinear_order;
        self.linear_order = linear_order;
        self
    }

    pub fn with_signals(mut self, num_signals: usize) -> Self {
        self.num_signals = num_signals;
        self
    }

    pub fn with_seed(mut self, init_seed: u64) -> Self {
        self.init_seed = init_seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.nonlinear_order == 0 || self.linear_order == 0 || self.num_signals == 0 {
            return Err(Error::InvalidArgument(format!(
                "model orders must be >= 1, got P={} L={} signals={}",
                self.nonlinear_order, self.linear_order, self.num_signals
            )));
        }
        Ok(())
    }
}

fn gaussian_array(dims: &[usize], axes: &[Axis], std: f64, seed: u64) -> CxArray {
    let mut rng = rng_from_seed(seed);
    let n = dims.iter().product();
    let data = (0..n).map(|_| complex_gaussian(&mut rng, std * std)).collect();
    CxArray::new(data, dims, axes).expect("consistent dims")
}

/// Kernels start near `0.1·δ[l]`: lag-0 gain plus small noise on every tap.
fn kernel_array(dims: &[usize], axes: &[Axis], seed: u64) -> CxArray {
    let mut arr = gaussian_array(dims, axes, KERNEL_INIT_STD, seed);
    let l = *dims.last().unwrap();
    for (i, v) in arr.data_mut().iter_mut().enumerate() {
        if i % l == 0 {
            *v += C64::new(KERNEL_INIT_GAIN, 0.0);
        }
    }
    arr
}

const W1: usize = 0;
const W2: usize = 1;
const W3: usize = 2;

#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    spec: ModelSpec,
    params: Vec<Parameter>,
}

impl Model {
    pub fn build(spec: ModelSpec) -> Result<Self> {
        spec.validate()?;
        if !spec.kind.is_neural() {
            return Err(Error::Unsupported(format!(
                "{} is a least-squares baseline, fit it with memory_poly_fit / linear_fir_fit",
                spec.kind
            )));
        }
        let p = spec.nonlinear_order;
        let seed = |i| derive_seed(spec.init_seed, Stream::Init, i);
        let dense_axes = [Axis::Inputs, Axis::Outputs];
        let mut params = vec![
            Parameter::new("mlp.dense1", Role::Shared, gaussian_array(&[1, p], &dense_axes, DENSE_INIT_STD, seed(0))),
            Parameter::new("mlp.dense2", Role::Shared, gaussian_array(&[p, p], &dense_axes, DENSE_INIT_STD, seed(1))),
        ];
        if spec.kind != ModelKind::ParallelH {
            params.push(Parameter::new(
                "mlp.dense3",
                Role::Shared,
                gaussian_array(&[p, 1], &dense_axes, DENSE_INIT_STD, seed(2)),
            ));
        }
        let mut model = Self { spec, params };
        let linear = model.fresh_linear_stage(seed(3));
        model.params.push(linear);
        Ok(model)
    }

    fn fresh_linear_stage(&self, seed: u64) -> Parameter {
        let ModelSpec {
            nonlinear_order: p,
            linear_order: l,
            num_signals: s,
            ..
        } = self.spec;
        match self.spec.kind {
            ModelKind::GlobalH => Parameter::new("fir.kernel", Role::Shared, kernel_array(&[l], &[Axis::Taps], seed)),
            ModelKind::AdaptiveH => Parameter::new(
                "depthwise.kernels",
                Role::Adaptive,
                kernel_array(&[s, l], &[Axis::Signals, Axis::Taps], seed),
            ),
            _ => Parameter::new(
                "parallel.kernels",
                Role::Adaptive,
                kernel_array(&[s, p, l], &[Axis::Signals, Axis::Channels, Axis::Taps], seed),
            ),
        }
    }

    pub(crate) fn from_parts(spec: ModelSpec, params: Vec<Parameter>) -> Result<Self> {
        let reference = Self::build(spec)?;
        if reference.params.len() != params.len()
            || reference
                .params
                .iter()
                .zip(&params)
                .any(|(a, b)| a.name != b.name || a.role != b.role || a.values.dims() != b.values.dims())
        {
            return Err(Error::InvalidArgument(format!(
                "parameter manifest does not match a {} model",
                spec.kind
            )));
        }
        Ok(Self { spec, params })
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn kind(&self) -> ModelKind {
        self.spec.kind
    }

    pub fn parameters(&self) -> &[Parameter] {
        &self.params
    }

    pub fn parameters_mut(&mut self) -> &mut [Parameter] {
        &mut self.params
    }

    /// Complex weight count, optionally restricted to one role.
    pub fn weight_count(&self, role: Option<Role>) -> usize {
        self.params
            .iter()
            .filter(|p| role.is_none_or(|r| p.role == r))
            .map(Parameter::count)
            .sum()
    }

    pub fn has_adaptive(&self) -> bool {
        self.params.iter().any(|p| p.role == Role::Adaptive)
    }

    /// Re-draw every adaptive parameter from its initial distribution.
    pub fn reinit_adaptive(&mut self, seed: u64) {
        if !self.has_adaptive() {
            return;
        }
        let fresh = self.fresh_linear_stage(seed);
        let last = self.params.len() - 1;
        self.params[last] = fresh;
    }

    /// Record the forward pass on `g`; `input` is `[signals, time, 1]`.
    pub fn record(&self, g: &mut Graph, input: Var) -> Result<Var> {
        self.record_with(g, input, None)
    }

    /// As [`Model::record`], but parameters of the `frozen` role enter the
    /// graph as constants.
    pub(crate) fn record_with(&self, g: &mut Graph, input: Var, frozen: Option<Role>) -> Result<Var> {
        let features = self.record_features(g, input, frozen)?;
        self.record_linear(g, features, frozen)
    }

    fn param_var(&self, g: &mut Graph, i: usize, frozen: Option<Role>) -> Var {
        let p = &self.params[i];
        if Some(p.role) == frozen {
            g.input(p.values.clone())
        } else {
            g.param(i, p.values.clone())
        }
    }

    /// Everything before the linear stage: the MLP, the phase recombination
    /// and, for the per-signal kinds, the move of signals onto the channel axis.
    pub(crate) fn record_features(&self, g: &mut Graph, input: Var, frozen: Option<Role>) -> Result<Var> {
        let dims = g.value(input).dims3()?;
        if dims[2] != 1 {
            return Err(Error::shape(format!("model input must have one channel, got {dims:?}")));
        }
        if self.spec.kind != ModelKind::GlobalH && dims[0] != self.spec.num_signals {
            return Err(Error::shape(format!(
                "{} model built for {} signals, got {}",
                self.spec.kind, self.spec.num_signals, dims[0]
            )));
        }
        let (mag, phase) = g.mag_phase_split(input)?;
        let w1 = self.param_var(g, W1, frozen);
        let h = g.dense(mag, w1)?;
        let h = g.split_tanh(h)?;
        let w2 = self.param_var(g, W2, frozen);
        let h = g.dense(h, w2)?;
        let h = g.split_tanh(h)?;
        match self.spec.kind {
            ModelKind::GlobalH => {
                let w3 = self.param_var(g, W3, frozen);
                let y = g.dense(h, w3)?;
                g.recombine(y, phase)
            }
            ModelKind::AdaptiveH => {
                let w3 = self.param_var(g, W3, frozen);
                let y = g.dense(h, w3)?;
                let y = g.recombine(y, phase)?;
                g.transpose(y)
            }
            _ => {
                let y = g.recombine(h, phase)?;
                g.transpose(y)
            }
        }
    }

    /// The convolutional stage applied to the output of [`Model::record_features`].
    pub(crate) fn record_linear(&self, g: &mut Graph, features: Var, frozen: Option<Role>) -> Result<Var> {
        let k = self.param_var(g, self.params.len() - 1, frozen);
        match self.spec.kind {
            ModelKind::GlobalH => g.conv1d_causal(features, k),
            ModelKind::AdaptiveH => {
                let y = g.depthwise_conv(features, k)?;
                g.transpose(y)
            }
            _ => {
                let y = g.depthwise_conv_multi(features, k)?;
                g.transpose(y)
            }
        }
    }

    pub fn forward(&self, input: &CxArray) -> Result<CxArray> {
        let mut g = Graph::new();
        let x = g.input(input.clone());
        let y = self.record(&mut g, x)?;
        Ok(g.value(y).clone())
    }
}

/// `[signals, time, 1]` input and target arrays of a dataset.
pub fn dataset_batch(ds: &Dataset) -> Result<(CxArray, CxArray)> {
    let s = ds.records.len();
    let t = ds.samples_per_record();
    if s == 0 || ds.records.iter().any(|r| r.input.len() != t || r.output.len() != t) {
        return Err(Error::shape("dataset records must be non-empty and equally long"));
    }
    let input = ds.records.iter().flat_map(|r| r.input.samples().iter().copied()).collect();
    let target = ds.records.iter().flat_map(|r| r.output.samples().iter().copied()).collect();
    Ok((CxArray::signals(input, s, t, 1)?, CxArray::signals(target, s, t, 1)?))
}
