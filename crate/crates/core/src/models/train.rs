use crate::cxnn::{adam_step, energy_ratio_db, mse_db, AdamConfig, AdamState, CxArray, Graph, Role};
use crate::dataset::{Dataset, SystemKind};
use crate::rng::{derive_seed, Stream};
use crate::{Error, Result};

use super::{dataset_batch, Model};

pub const DEFAULT_EPOCHS: usize = 10_000;
pub const DEFAULT_LOG_EVERY: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub lr: f64,
    pub log_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: DEFAULT_EPOCHS,
            lr: AdamConfig::default().lr,
            log_every: DEFAULT_LOG_EVERY,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.log_every == 0 {
            return Err(Error::InvalidArgument(format!(
                "epochs and log_every must be >= 1, got {} and {}",
                self.epochs, self.log_every
            )));
        }
        if !(self.lr.is_finite() && self.lr > 0.0) {
            return Err(Error::InvalidArgument(format!("learning rate must be positive, got {}", self.lr)));
        }
        Ok(())
    }

    fn logs(&self, epoch: usize) -> bool {
        epoch % self.log_every == 0 || epoch == self.epochs
    }
}

/// Normalized MSE in dB after `epoch` optimizer updates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TracePoint {
    pub epoch: usize,
    pub train: Option<f64>,
    pub test: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainTrace {
    pub points: Vec<TracePoint>,
    /// Model state after the last epoch.
    pub model: Model,
}

impl TrainTrace {
    pub fn final_train(&self) -> Option<f64> {
        self.points.last().and_then(|p| p.train)
    }

    pub fn final_test(&self) -> Option<f64> {
        self.points.last().and_then(|p| p.test)
    }

    pub fn at_epoch(&self, epoch: usize) -> Option<&TracePoint> {
        self.points.iter().find(|p| p.epoch == epoch)
    }
}

struct Batch {
    input: CxArray,
    target: CxArray,
    energy: f64,
}

impl Batch {
    fn new(model: &Model, ds: &Dataset) -> Result<Self> {
        if ds.system != SystemKind::Hammerstein {
            return Err(Error::Unsupported(format!(
                "neural models identify Hammerstein data, got {}",
                ds.system
            )));
        }
        let (input, target) = dataset_batch(ds)?;
        if model.has_adaptive() && ds.records.len() != model.spec().num_signals {
            return Err(Error::shape(format!(
                "{} model built for {} signals, dataset has {} records",
                model.kind(),
                model.spec().num_signals,
                ds.records.len()
            )));
        }
        let energy = target.energy();
        Ok(Self { input, target, energy })
    }

    fn mse_db(&self, model: &Model) -> Result<f64> {
        let y = model.forward(&self.input)?;
        let r: Vec<_> = self.target.data().iter().zip(y.data()).map(|(a, b)| a - b).collect();
        Ok(mse_db(&r, self.target.data()))
    }
}

#[derive(Clone, Copy, PartialEq)]
enum Column {
    Train,
    Test,
}

fn run(
    model: &mut Model,
    batch: &Batch,
    cfg: &TrainConfig,
    frozen: Option<Role>,
    column: Column,
    monitor: Option<&Batch>,
) -> Result<Vec<TracePoint>> {
    let mut state = AdamState::new(
        AdamConfig {
            lr: cfg.lr,
            ..AdamConfig::default()
        },
        model.parameters(),
    );
    let mut points = Vec::with_capacity(cfg.epochs / cfg.log_every + 2);
    // with the shared part frozen, the features feeding the linear stage
    // never change and are computed once
    let features = if frozen == Some(Role::Shared) {
        let mut g = Graph::new();
        let x = g.input(batch.input.clone());
        let f = model.record_features(&mut g, x, frozen)?;
        Some(g.value(f).clone())
    } else {
        None
    };
    for epoch in 0..=cfg.epochs {
        let mut g = Graph::new();
        let y = match &features {
            Some(f) => {
                let f = g.input(f.clone());
                model.record_linear(&mut g, f, frozen)?
            }
            None => {
                let x = g.input(batch.input.clone());
                model.record_with(&mut g, x, frozen)?
            }
        };
        let t = g.input(batch.target.clone());
        let r = g.sub(t, y)?;
        let loss = g.mse_loss(r)?;
        let value = g.value(loss).data()[0].re;
        if !value.is_finite() {
            return Err(Error::Divergence { epoch, loss: value });
        }
        if cfg.logs(epoch) {
            let db = energy_ratio_db(value * batch.target.len() as f64, batch.energy);
            let other = monitor.map(|m| m.mse_db(model)).transpose()?;
            points.push(match column {
                Column::Train => TracePoint {
                    epoch,
                    train: Some(db),
                    test: other,
                },
                Column::Test => TracePoint {
                    epoch,
                    train: None,
                    test: Some(db),
                },
            });
        }
        if epoch == cfg.epochs {
            break;
        }
        let mut grads = g.backward(loss)?;
        drop(g);
        for (i, p) in model.parameters_mut().iter_mut().enumerate() {
            p.gradient = grads.take(i).unwrap_or_else(|| p.values.zeros_like());
        }
        adam_step(model.parameters_mut(), &mut state, frozen);
    }
    Ok(points)
}

/// Full-batch Adam over every parameter on `train`.
pub fn fit(model: &mut Model, train: &Dataset, cfg: &TrainConfig) -> Result<TrainTrace> {
    fit_monitored(model, train, None, cfg)
}

/// As [`fit`], additionally evaluating a model without adaptive parameters
/// on `monitor` at every logged epoch.
pub fn fit_monitored(
    model: &mut Model,
    train: &Dataset,
    monitor: Option<&Dataset>,
    cfg: &TrainConfig,
) -> Result<TrainTrace> {
    cfg.validate()?;
    if monitor.is_some() && model.has_adaptive() {
        return Err(Error::InvalidArgument(
            "adaptive models need adaptation before test evaluation".into(),
        ));
    }
    let batch = Batch::new(model, train)?;
    let monitor = monitor.map(|m| Batch::new(model, m)).transpose()?;
    let points = run(model, &batch, cfg, None, Column::Train, monitor.as_ref())?;
    Ok(TrainTrace {
        points,
        model: model.clone(),
    })
}

/// Test-time adaptation: shared parameters stay frozen, adaptive ones are
/// redrawn and retrained on `test`. A model without adaptive parameters is
/// only evaluated, once per logged epoch.
pub fn adapt(model: &mut Model, test: &Dataset, cfg: &TrainConfig) -> Result<TrainTrace> {
    cfg.validate()?;
    let batch = Batch::new(model, test)?;
    let points = if model.has_adaptive() {
        model.reinit_adaptive(derive_seed(model.spec().init_seed, Stream::Adapt, 0));
        run(model, &batch, cfg, Some(Role::Shared), Column::Test, None)?
    } else {
        let db = batch.mse_db(model)?;
        (0..=cfg.epochs)
            .filter(|&e| cfg.logs(e))
            .map(|epoch| TracePoint {
                epoch,
                train: None,
                test: Some(db),
            })
            .collect()
    };
    Ok(TrainTrace {
        points,
        model: model.clone(),
    })
}

/// Normalized MSE of the model output against the dataset outputs, in dB.
pub fn evaluate(model: &Model, ds: &Dataset) -> Result<f64> {
    Batch::new(model, ds)?.mse_db(model)
}
