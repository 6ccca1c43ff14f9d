//! Experiment orchestration behind the `sicnet` binary.
//!
//! Every run writes into one output directory: the generated datasets,
//! fitted model snapshots, CSV traces, a `results.csv` summary and a
//! `manifest.toml` holding the full configuration and derived seeds.
//! Runs are deterministic, so a manifest is enough to reproduce every
//! output byte.

mod config;
mod trace;

use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::dataset::{generate, write_dataset, Dataset, GenerationRequest, SystemKind, Taxonomy};
use crate::models::{
    adapt, evaluate, fit, fit_monitored, linear_fir_fit, memory_poly_fit, sdr_sweep, write_model, FitScope, Model,
    ModelKind, PolyFit, SweepRow,
};
use crate::rng::{derive_seed, Stream};
use crate::{Error, Result};

pub use config::{
    BaselineSection, DataSection, Experiment, ExperimentConfig, ModelSection, SweepSection, TrainSection,
    DEFAULT_POLY_MEMORY, DEFAULT_POLY_ORDER, DEFAULT_SWEEP_GRID, DEFAULT_SWEEP_REPEATS,
};
pub use trace::{emit_trace, format_value, merge_points, parse_trace, trace_csv, TraceRow, TRACE_HEADER};

pub const MANIFEST_FILE: &str = "manifest.toml";
pub const RESULTS_FILE: &str = "results.csv";
pub const SWEEP_FILE: &str = "sweep.csv";

/// Seeds derived from the master seed of a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct RunSeeds {
    /// Invariant channel and nonlinearity.
    pub system: u64,
    pub train_data: u64,
    pub test_data: u64,
    pub model_init: u64,
}

impl RunSeeds {
    pub fn new(master_seed: u64) -> Self {
        Self {
            system: master_seed,
            train_data: master_seed,
            test_data: derive_seed(master_seed, Stream::Split, 1),
            model_init: master_seed,
        }
    }
}

/// Final normalized MSE of one model, in dB.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub model: String,
    pub train: Option<f64>,
    pub test: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub experiment: Experiment,
    pub results: Vec<ResultRow>,
    /// File name and rows of every trace written.
    pub traces: Vec<(String, Vec<TraceRow>)>,
    pub sweep: Vec<SweepRow>,
    pub files: Vec<String>,
}

impl RunOutput {
    pub fn result(&self, model: &str) -> Option<&ResultRow> {
        self.results.iter().find(|r| r.model == model)
    }

    pub fn trace(&self, file: &str) -> Option<&[TraceRow]> {
        self.traces.iter().find(|(f, _)| f == file).map(|(_, rows)| rows.as_slice())
    }

    pub fn sweep_mean(&self, kind: ModelKind, si_sdr0: f64) -> Option<f64> {
        self.sweep
            .iter()
            .find(|r| r.kind == kind && r.si_sdr0 == si_sdr0)
            .map(|r| r.mean_mse_db)
    }
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    experiment: String,
    files: &'a [String],
    seeds: RunSeeds,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    sweep_seeds: Vec<u64>,
    config: ExperimentConfig,
}

struct OutDir {
    dir: PathBuf,
    files: Vec<String>,
}

impl OutDir {
    fn create(dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        })
    }

    fn path(&mut self, name: &str) -> PathBuf {
        self.files.push(name.to_string());
        self.dir.join(name)
    }

    fn write(&mut self, name: &str, text: &str) -> Result<()> {
        let p = self.path(name);
        std::fs::write(&p, text).map_err(|e| Error::io(&p, e))
    }

    fn dataset(&mut self, name: &str, ds: &Dataset) -> Result<()> {
        let p = self.path(name);
        write_dataset(ds, &p)?;
        self.files.push(format!("{name}.toml"));
        Ok(())
    }

    fn model(&mut self, name: &str, m: &Model) -> Result<()> {
        let p = self.path(name);
        write_model(m, &p)?;
        self.files.push(format!("{name}.toml"));
        Ok(())
    }
}

fn results_csv(rows: &[ResultRow]) -> String {
    let cell = |v: Option<f64>| v.map(format_value).unwrap_or_default();
    let mut out = String::from("model,mse_db_train,mse_db_test\n");
    for r in rows {
        out.push_str(&format!("{},{},{}\n", r.model, cell(r.train), cell(r.test)));
    }
    out
}

fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from("model,si_sdr0_db,mean_mse_db,min_mse_db,max_mse_db,repeats\n");
    for r in rows {
        let min = r.per_repeat.iter().copied().fold(f64::INFINITY, f64::min);
        let max = r.per_repeat.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.kind,
            format_value(r.si_sdr0),
            format_value(r.mean_mse_db),
            format_value(min),
            format_value(max),
            r.per_repeat.len()
        ));
    }
    out
}

fn datasets(cfg: &ExperimentConfig, system: SystemKind, taxonomy: Taxonomy) -> Result<(Dataset, Dataset)> {
    let seeds = RunSeeds::new(cfg.master_seed);
    let req = |seed| GenerationRequest::new(system, taxonomy, cfg.si_sdr0, seed).with_system_seed(seeds.system);
    Ok((generate(&req(seeds.train_data))?, generate(&req(seeds.test_data))?))
}

/// Least-squares baselines. Coefficients fitted jointly carry over to the
/// test data; per-record fits are re-identified on it, the counterpart of
/// adapting a neural model.
fn baseline_row(name: &str, train: &Dataset, test: &Dataset, f: impl Fn(&Dataset) -> Result<PolyFit>) -> Result<ResultRow> {
    let fitted = f(train)?;
    let test_db = match fitted.scope {
        FitScope::Joint => fitted.evaluate(test)?,
        FitScope::PerRecord => f(test)?.mse_db,
    };
    Ok(ResultRow {
        model: name.into(),
        train: Some(fitted.mse_db),
        test: Some(test_db),
    })
}

fn identification(cfg: &ExperimentConfig, taxonomy: Taxonomy, out: &mut OutDir, run: &mut RunOutput) -> Result<()> {
    let (train, test) = datasets(cfg, SystemKind::Hammerstein, taxonomy)?;
    out.dataset("train.sicd", &train)?;
    out.dataset("test.sicd", &test)?;
    let tc = cfg.train_config();
    for &kind in cfg.experiment.models() {
        let mut model = Model::build(cfg.model_spec(kind, train.records.len()))?;
        let name = kind.name();
        let rows = if model.has_adaptive() {
            let fitted = fit(&mut model, &train, &tc)?;
            out.model(&format!("model_{name}.sicm"), &model)?;
            let adapted = adapt(&mut model, &test, &tc)?;
            out.model(&format!("model_{name}_adapted.sicm"), &model)?;
            merge_points(name, &fitted.points, &adapted.points)
        } else {
            let fitted = fit_monitored(&mut model, &train, Some(&test), &tc)?;
            out.model(&format!("model_{name}.sicm"), &model)?;
            fitted.points.iter().map(|p| TraceRow::from_point(name, p)).collect()
        };
        let last = rows.last().expect("training logs the final epoch");
        run.results.push(ResultRow {
            model: name.into(),
            train: last.train,
            test: last.test,
        });
        run.traces.push((format!("trace_{name}.csv"), rows));
    }
    let b = &cfg.baseline;
    let baselines = [
        baseline_row(ModelKind::LinearFir.name(), &train, &test, |d| linear_fir_fit(d, b.fir_memory))?,
        baseline_row(ModelKind::MemoryPoly.name(), &train, &test, |d| {
            memory_poly_fit(d, b.poly_order, b.poly_memory)
        })?,
    ];
    // closed-form fits have no epochs; their rows join the first trace
    if let Some((_, rows)) = run.traces.first_mut() {
        rows.extend(baselines.iter().map(|r| TraceRow {
            epoch: None,
            train: r.train,
            test: r.test,
            model: r.model.clone(),
        }));
    }
    run.results.extend(baselines);
    for (file, rows) in &run.traces {
        let p = out.path(file);
        emit_trace(rows, &p)?;
    }
    out.write(RESULTS_FILE, &results_csv(&run.results))
}

/// Repeat seeds of an SI-SDR sweep.
pub fn sweep_seeds(cfg: &ExperimentConfig) -> Vec<u64> {
    (0..cfg.sweep.repeats as u64).map(|r| cfg.master_seed.wrapping_add(r)).collect()
}

/// Run one experiment, writing every output into `out`.
pub fn run_experiment(cfg: &ExperimentConfig, out: &Path) -> Result<RunOutput> {
    cfg.validate()?;
    let mut dir = OutDir::create(out)?;
    let mut run = RunOutput {
        experiment: cfg.experiment,
        results: Vec::new(),
        traces: Vec::new(),
        sweep: Vec::new(),
        files: Vec::new(),
    };
    let mut manifest_sweep_seeds = Vec::new();
    match cfg.experiment {
        Experiment::GenOnly => {
            let (system, taxonomy) = cfg.data_kind()?;
            let (train, test) = datasets(cfg, system, taxonomy)?;
            dir.dataset("train.sicd", &train)?;
            dir.dataset("test.sicd", &test)?;
        }
        Experiment::Fig8Sweep => {
            let seeds = sweep_seeds(cfg);
            let kinds = [ModelKind::ParallelH, ModelKind::MemoryPoly];
            run.sweep = sdr_sweep(&kinds, &cfg.sweep.grid, &seeds, &cfg.sweep_config())?;
            dir.write(SWEEP_FILE, &sweep_csv(&run.sweep))?;
            manifest_sweep_seeds = seeds;
        }
        e => {
            let taxonomy = e.taxonomy().expect("identification experiments have a taxonomy");
            identification(cfg, taxonomy, &mut dir, &mut run)?;
        }
    }
    dir.files.push(MANIFEST_FILE.into());
    let manifest = Manifest {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        experiment: cfg.experiment.to_string(),
        files: &dir.files,
        seeds: RunSeeds::new(cfg.master_seed),
        sweep_seeds: manifest_sweep_seeds,
        config: ExperimentConfig {
            output_dir: None,
            ..cfg.clone()
        },
    };
    let text = toml::to_string(&manifest).map_err(|e| Error::Config(e.to_string()))?;
    let p = dir.dir.join(MANIFEST_FILE);
    std::fs::write(&p, text).map_err(|e| Error::io(&p, e))?;
    run.files = dir.files;
    Ok(run)
}

#[derive(Serialize)]
struct EvalManifest<'a> {
    tool: &'static str,
    version: &'static str,
    model: &'a str,
    data: &'a str,
    model_kind: String,
    records: usize,
    mse_db: f64,
}

/// Evaluate a snapshot on a dataset; writes `evaluation.csv` and a manifest.
pub fn run_evaluate(model: &Model, model_path: &Path, data: &Dataset, data_path: &Path, out: &Path) -> Result<f64> {
    let db = evaluate(model, data)?;
    let mut dir = OutDir::create(out)?;
    dir.write(
        "evaluation.csv",
        &format!("model,records,mse_db\n{},{},{}\n", model.kind(), data.records.len(), format_value(db)),
    )?;
    let manifest = EvalManifest {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        model: &model_path.display().to_string(),
        data: &data_path.display().to_string(),
        model_kind: model.kind().to_string(),
        records: data.records.len(),
        mse_db: db,
    };
    let text = toml::to_string(&manifest).map_err(|e| Error::Config(e.to_string()))?;
    dir.write(MANIFEST_FILE, &text)?;
    Ok(db)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny(e: Experiment) -> ExperimentConfig {
        let mut c = ExperimentConfig::new(e);
        c.train.epochs = 3;
        c.train.log_every = 1;
        c.model.nonlinear_order = 2;
        c.model.linear_order = 4;
        c.baseline = BaselineSection {
            poly_order: 2,
            poly_memory: 3,
            fir_memory: 4,
        };
        c.sweep.grid = vec![10.0];
        c
    }

    #[test]
    fn fig6_writes_traces_results_and_manifest() {
        let dir = tempfile::tempdir().unwrap();
        let run = run_experiment(&tiny(Experiment::Fig6VarSi), dir.path()).unwrap();
        for f in ["trace_global.csv", "trace_adaptive.csv", RESULTS_FILE, MANIFEST_FILE, "train.sicd", "model_adaptive_adapted.sicm"] {
            assert!(dir.path().join(f).exists(), "{f}");
            assert!(run.files.iter().any(|x| x == f), "{f}");
        }
        let global = run.trace("trace_global.csv").unwrap();
        // epochs 0..=3 plus two baseline rows
        assert_eq!(global.len(), 6);
        assert!(global[..4].iter().all(|r| r.train.is_some() && r.test.is_some()));
        assert_eq!(global[4].model, "linear_fir");
        let adaptive = run.trace("trace_adaptive.csv").unwrap();
        assert_eq!(adaptive.len(), 4);
        let text = std::fs::read_to_string(dir.path().join("trace_adaptive.csv")).unwrap();
        let parsed = parse_trace(&text).unwrap();
        assert_eq!(parsed.len(), adaptive.len());
        for (a, b) in parsed.iter().zip(adaptive) {
            assert_eq!((a.epoch, &a.model), (b.epoch, &b.model));
            let (x, y) = (a.train.unwrap(), b.train.unwrap());
            assert!((x - y).abs() <= 1e-11 * y.abs(), "{x} vs {y}");
        }
        assert!(run.result("memory_poly").unwrap().test.is_some());
        let manifest = std::fs::read_to_string(dir.path().join(MANIFEST_FILE)).unwrap();
        assert!(manifest.contains("test_data"));
        assert!(manifest.contains("experiment = \"fig6\""));
    }

    #[test]
    fn sweep_and_gen_only() {
        let dir = tempfile::tempdir().unwrap();
        let run = run_experiment(&tiny(Experiment::Fig8Sweep), dir.path()).unwrap();
        assert_eq!(run.sweep.len(), 2);
        assert!(run.sweep_mean(ModelKind::MemoryPoly, 10.0).is_some());
        let text = std::fs::read_to_string(dir.path().join(SWEEP_FILE)).unwrap();
        assert_eq!(text.lines().count(), 3);

        let dir = tempfile::tempdir().unwrap();
        let mut c = tiny(Experiment::GenOnly);
        c.data.system = "w".into();
        let run = run_experiment(&c, dir.path()).unwrap();
        assert!(run.results.is_empty());
        let ds = crate::dataset::read_dataset(&dir.path().join("test.sicd")).unwrap();
        assert_eq!(ds.system, SystemKind::Wiener);
    }
}
