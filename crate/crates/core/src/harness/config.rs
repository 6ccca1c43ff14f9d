use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dataset::{SystemKind, Taxonomy, DEFAULT_SI_SDR0_DB};
use crate::models::{ModelKind, ModelSpec, SweepConfig, TrainConfig};
use crate::{Error, Result};

/// Nonlinear order of the memory polynomial baseline.
pub const DEFAULT_POLY_ORDER: usize = 6;
/// Memory of the memory polynomial baseline, one sample per channel tap.
pub const DEFAULT_POLY_MEMORY: usize = 12;
pub const DEFAULT_SWEEP_GRID: [f64; 6] = [5.0, 10.0, 15.0, 20.0, 25.0, 30.0];
/// Data draws averaged per grid point.
pub const DEFAULT_SWEEP_REPEATS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Experiment {
    Fig5Inv,
    Fig6VarSi,
    Fig7VarNlVarSi,
    Fig8Sweep,
    GenOnly,
}

impl Experiment {
    pub const ALL: [Experiment; 5] = [
        Experiment::Fig5Inv,
        Experiment::Fig6VarSi,
        Experiment::Fig7VarNlVarSi,
        Experiment::Fig8Sweep,
        Experiment::GenOnly,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::Fig5Inv => "fig5",
            Experiment::Fig6VarSi => "fig6",
            Experiment::Fig7VarNlVarSi => "fig7",
            Experiment::Fig8Sweep => "fig8",
            Experiment::GenOnly => "gen-only",
        }
    }

    /// Data taxonomy of the identification experiments.
    pub fn taxonomy(self) -> Option<Taxonomy> {
        match self {
            Experiment::Fig5Inv => Some(Taxonomy::InvNlInvSi),
            Experiment::Fig6VarSi => Some(Taxonomy::InvNlVarSi),
            Experiment::Fig7VarNlVarSi => Some(Taxonomy::VarNlVarSi),
            Experiment::Fig8Sweep | Experiment::GenOnly => None,
        }
    }

    /// Neural models trained and adapted, in output order.
    pub fn models(self) -> &'static [ModelKind] {
        match self {
            Experiment::Fig5Inv => &[ModelKind::GlobalH],
            Experiment::Fig6VarSi => &[ModelKind::GlobalH, ModelKind::AdaptiveH],
            Experiment::Fig7VarNlVarSi => &[ModelKind::AdaptiveH, ModelKind::ParallelH],
            Experiment::Fig8Sweep | Experiment::GenOnly => &[],
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Experiment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.to_ascii_lowercase().replace('_', "-");
        let short = match norm.as_str() {
            "fig5-inv" => "fig5",
            "fig6-varsi" => "fig6",
            "fig7-varnl-varsi" => "fig7",
            "fig8-sweep" => "fig8",
            "gen" | "genonly" => "gen-only",
            other => other,
        };
        Self::ALL.into_iter().find(|e| e.name() == short).ok_or_else(|| {
            Error::InvalidArgument(format!("unknown experiment '{s}' (expected fig5, fig6, fig7, fig8 or gen-only)"))
        })
    }
}

impl TryFrom<String> for Experiment {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Experiment> for String {
    fn from(e: Experiment) -> String {
        e.name().to_string()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub epochs: usize,
    pub lr: f64,
    pub log_every: usize,
}

impl Default for TrainSection {
    fn default() -> Self {
        let t = TrainConfig::default();
        Self {
            epochs: t.epochs,
            lr: t.lr,
            log_every: t.log_every,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub nonlinear_order: usize,
    pub linear_order: usize,
}

impl Default for ModelSection {
    fn default() -> Self {
        let m = ModelSpec::new(ModelKind::GlobalH);
        Self {
            nonlinear_order: m.nonlinear_order,
            linear_order: m.linear_order,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BaselineSection {
    pub poly_order: usize,
    pub poly_memory: usize,
    pub fir_memory: usize,
}

impl Default for BaselineSection {
    fn default() -> Self {
        Self {
            poly_order: DEFAULT_POLY_ORDER,
            poly_memory: DEFAULT_POLY_MEMORY,
            fir_memory: ModelSection::default().linear_order,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub grid: Vec<f64>,
    pub repeats: usize,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            grid: DEFAULT_SWEEP_GRID.to_vec(),
            repeats: DEFAULT_SWEEP_REPEATS,
        }
    }
}

/// Data written by `gen-only`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataSection {
    pub system: String,
    pub taxonomy: String,
}

impl Default for DataSection {
    fn default() -> Self {
        Self {
            system: "h".into(),
            taxonomy: Taxonomy::InvNlInvSi.label(SystemKind::Hammerstein).into(),
        }
    }
}

/// One experiment run, read from TOML:
///
/// ```toml
/// experiment = "fig5"
/// si_sdr0 = 10.0
/// master_seed = 1
///
/// [train]
/// epochs = 10000
/// lr = 0.01
/// log_every = 100
/// ```
///
/// Every field has a default; the output directory is normally given on
/// the command line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub si_sdr0: f64,
    pub master_seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    pub train: TrainSection,
    pub model: ModelSection,
    pub baseline: BaselineSection,
    pub sweep: SweepSection,
    pub data: DataSection,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            experiment: Experiment::Fig5Inv,
            si_sdr0: DEFAULT_SI_SDR0_DB,
            master_seed: 1,
            output_dir: None,
            train: TrainSection::default(),
            model: ModelSection::default(),
            baseline: BaselineSection::default(),
            sweep: SweepSection::default(),
            data: DataSection::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn new(experiment: Experiment) -> Self {
        Self {
            experiment,
            ..Self::default()
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            epochs: self.train.epochs,
            lr: self.train.lr,
            log_every: self.train.log_every,
        }
    }

    pub fn model_spec(&self, kind: ModelKind, num_signals: usize) -> ModelSpec {
        ModelSpec::new(kind)
            .with_orders(self.model.nonlinear_order, self.model.linear_order)
            .with_signals(num_signals)
            .with_seed(self.master_seed)
    }

    pub fn sweep_config(&self) -> SweepConfig {
        SweepConfig {
            model: self.model_spec(ModelKind::ParallelH, 1),
            train: self.train_config(),
            poly_order: self.baseline.poly_order,
            poly_memory: self.baseline.poly_memory,
        }
    }

    pub fn data_kind(&self) -> Result<(SystemKind, Taxonomy)> {
        Ok((self.data.system.parse()?, self.data.taxonomy.parse()?))
    }

    pub fn validate(&self) -> Result<()> {
        self.train_config().validate()?;
        self.model_spec(ModelKind::GlobalH, 1).validate()?;
        let b = &self.baseline;
        if b.poly_order == 0 || b.poly_memory == 0 || b.fir_memory == 0 {
            return Err(Error::Config("baseline orders and memories must be >= 1".into()));
        }
        if !self.si_sdr0.is_finite() {
            return Err(Error::Config(format!("si_sdr0 must be finite, got {}", self.si_sdr0)));
        }
        if self.experiment == Experiment::Fig8Sweep {
            if self.sweep.grid.is_empty() || self.sweep.repeats == 0 {
                return Err(Error::Config("sweep needs a nonempty grid and at least one repeat".into()));
            }
            if self.sweep.grid.iter().any(|v| !v.is_finite()) {
                return Err(Error::Config("sweep grid values must be finite".into()));
            }
        }
        self.data_kind()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{DEFAULT_EPOCHS, DEFAULT_LOG_EVERY};

    #[test]
    fn defaults_follow_the_models() {
        let c = ExperimentConfig::default();
        assert_eq!(c.train.epochs, DEFAULT_EPOCHS);
        assert_eq!(c.train.log_every, DEFAULT_LOG_EVERY);
        assert_eq!((c.model.nonlinear_order, c.model.linear_order), (8, 32));
        c.validate().unwrap();
    }

    #[test]
    fn toml_round_trip() {
        let mut c = ExperimentConfig::new(Experiment::Fig8Sweep);
        c.sweep.grid = vec![5.0, 30.0];
        c.train.epochs = 7;
        let text = c.to_toml().unwrap();
        assert_eq!(ExperimentConfig::from_toml(&text).unwrap(), c);
    }

    #[test]
    fn partial_file_fills_defaults() {
        let c = ExperimentConfig::from_toml("experiment = \"FIG6_VARSI\"\n[train]\nepochs = 3\n").unwrap();
        assert_eq!(c.experiment, Experiment::Fig6VarSi);
        assert_eq!(c.train.epochs, 3);
        assert_eq!(c.train.lr, 0.01);
    }

    #[test]
    fn rejects_bad_files() {
        assert!(ExperimentConfig::from_toml("experiment = \"fig9\"").is_err());
        assert!(ExperimentConfig::from_toml("epochs = 3").is_err());
        assert!(ExperimentConfig::from_toml("[train]\nepochs = 0").is_err());
        assert!(ExperimentConfig::from_toml("[data]\ntaxonomy = \"x\"").is_err());
    }

    #[test]
    fn experiment_names() {
        for e in Experiment::ALL {
            assert_eq!(e.name().parse::<Experiment>().unwrap(), e);
        }
        assert_eq!("FIG7_VARNL_VARSI".parse::<Experiment>().unwrap(), Experiment::Fig7VarNlVarSi);
    }
}
