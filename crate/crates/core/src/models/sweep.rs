use crate::dataset::{generate, GenerationRequest, SystemKind, Taxonomy};
use crate::rng::{derive_seed, Stream};
use crate::{Error, Result};

use super::{fit, linear_fir_fit, memory_poly_fit, Model, ModelKind, ModelSpec, TrainConfig};

/// Settings shared by every point of an SI-SDR sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    /// Orders used for the neural models; `kind` and `init_seed` are replaced.
    pub model: ModelSpec,
    pub train: TrainConfig,
    pub poly_order: usize,
    pub poly_memory: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        let model = ModelSpec::new(ModelKind::ParallelH);
        Self {
            poly_order: model.nonlinear_order,
            poly_memory: model.linear_order,
            model,
            train: TrainConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub kind: ModelKind,
    pub si_sdr0: f64,
    /// Mean over repeats of the fitted mse in dB.
    pub mean_mse_db: f64,
    pub per_repeat: Vec<f64>,
}

/// For each grid point and seed, generate varNL+varSI Hammerstein data and
/// fit every kind on it. Rows are ordered by kind, then grid point.
pub fn sdr_sweep(kinds: &[ModelKind], grid: &[f64], seeds: &[u64], cfg: &SweepConfig) -> Result<Vec<SweepRow>> {
    if grid.is_empty() || seeds.is_empty() || kinds.is_empty() {
        return Err(Error::InvalidArgument("sweep needs kinds, grid points and seeds".into()));
    }
    let mut table: Vec<Vec<Vec<f64>>> = vec![vec![Vec::with_capacity(seeds.len()); grid.len()]; kinds.len()];
    for (gi, &sdr) in grid.iter().enumerate() {
        for &seed in seeds {
            let data_seed = derive_seed(seed, Stream::Sweep, gi as u64);
            let req = GenerationRequest::new(SystemKind::Hammerstein, Taxonomy::VarNlVarSi, sdr, data_seed);
            let ds = generate(&req)?;
            for (ki, &kind) in kinds.iter().enumerate() {
                let mse = match kind {
                    ModelKind::MemoryPoly => memory_poly_fit(&ds, cfg.poly_order, cfg.poly_memory)?.mse_db,
                    ModelKind::LinearFir => linear_fir_fit(&ds, cfg.poly_memory)?.mse_db,
                    _ => {
                        let spec = ModelSpec {
                            kind,
                            init_seed: seed,
                            num_signals: ds.records.len(),
                            ..cfg.model
                        };
                        let mut model = Model::build(spec)?;
                        let trace = fit(&mut model, &ds, &cfg.train)?;
                        trace.final_train().expect("fit logs the final epoch")
                    }
                };
                table[ki][gi].push(mse);
            }
        }
    }
    let mut rows = Vec::with_capacity(kinds.len() * grid.len());
    for (ki, &kind) in kinds.iter().enumerate() {
        for (gi, &sdr) in grid.iter().enumerate() {
            let per_repeat = std::mem::take(&mut table[ki][gi]);
            let mean_mse_db = per_repeat.iter().sum::<f64>() / per_repeat.len() as f64;
            rows.push(SweepRow {
                kind,
                si_sdr0: sdr,
                mean_mse_db,
                per_repeat,
            });
        }
    }
    Ok(rows)
}
