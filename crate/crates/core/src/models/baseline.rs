//! Least-squares baselines: the memory polynomial
//! `ŷ[k] = Σ_p Σ_l a[p][l] · s[k−l] · |s[k−l]|^(p−1)` and its order-one
//! special case, the linear FIR filter.

use nalgebra::{Cholesky, DMatrix, DVector};

use crate::cxnn::energy_ratio_db;
use crate::dataset::{Dataset, SystemKind, Taxonomy};
use crate::{Error, Result, C64};

/// Ridge added to the equilibrated normal equations.
pub const RIDGE: f64 = 1e-10;

/// Whether one coefficient set is fitted across all records or one per record.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FitScope {
    Joint,
    PerRecord,
}

impl FitScope {
    /// Joint for fully invariant data, per file ID otherwise.
    pub fn for_taxonomy(taxonomy: Taxonomy) -> Self {
        match taxonomy {
            Taxonomy::InvNlInvSi => FitScope::Joint,
            _ => FitScope::PerRecord,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolyFit {
    pub order: usize,
    pub memory: usize,
    pub scope: FitScope,
    /// One coefficient set per group, laid out as `[p * memory + l]`.
    pub coefficients: Vec<Vec<C64>>,
    pub mse_db: f64,
}

impl PolyFit {
    pub fn coefficient(&self, group: usize, p: usize, l: usize) -> C64 {
        self.coefficients[group][p * self.memory + l]
    }

    /// Model output for `input` using the coefficients of `group`.
    pub fn predict(&self, group: usize, input: &[C64]) -> Vec<C64> {
        predict(&self.coefficients[group], input, self.order, self.memory)
    }

    /// Coefficient set that applies to record `index`.
    pub fn group_of(&self, index: usize) -> usize {
        match self.scope {
            FitScope::Joint => 0,
            FitScope::PerRecord => index,
        }
    }

    /// Normalized error of the fitted coefficients on other data, in dB.
    /// Per-record fits need one record per coefficient set.
    pub fn evaluate(&self, ds: &Dataset) -> Result<f64> {
        if self.scope == FitScope::PerRecord && ds.records.len() != self.coefficients.len() {
            return Err(Error::shape(format!(
                "fit holds {} coefficient sets, dataset has {} records",
                self.coefficients.len(),
                ds.records.len()
            )));
        }
        let mut residual_energy = 0.0;
        let mut target_energy = 0.0;
        for (i, rec) in ds.records.iter().enumerate() {
            let y = rec.output.samples();
            let yhat = self.predict(self.group_of(i), rec.input.samples());
            residual_energy += y.iter().zip(&yhat).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>();
            target_energy += y.iter().map(|v| v.norm_sqr()).sum::<f64>();
        }
        Ok(energy_ratio_db(residual_energy, target_energy))
    }
}

/// `s[k]·|s[k]|^p` for `p = 0..order`, undelayed.
fn power_terms(input: &[C64], order: usize) -> Vec<Vec<C64>> {
    let mags: Vec<f64> = input.iter().map(|v| v.norm()).collect();
    let mut out = Vec::with_capacity(order);
    let mut cur = input.to_vec();
    for _ in 0..order {
        out.push(cur.clone());
        for (c, m) in cur.iter_mut().zip(&mags) {
            *c *= m;
        }
    }
    out
}

/// Regressor columns, column `p * memory + l` being `s[k−l]·|s[k−l]|^p`
/// with zeros before the start of the signal.
pub fn memory_poly_basis(input: &[C64], order: usize, memory: usize) -> Vec<Vec<C64>> {
    let n = input.len();
    let zero = C64::new(0.0, 0.0);
    let mut cols = Vec::with_capacity(order * memory);
    for term in power_terms(input, order) {
        for l in 0..memory {
            let mut col = vec![zero; n];
            if l < n {
                col[l..].copy_from_slice(&term[..n - l]);
            }
            cols.push(col);
        }
    }
    cols
}

fn predict(coefs: &[C64], input: &[C64], order: usize, memory: usize) -> Vec<C64> {
    let n = input.len();
    let mut out = vec![C64::new(0.0, 0.0); n];
    for (p, term) in power_terms(input, order).iter().enumerate() {
        for l in 0..memory.min(n) {
            let a = coefs[p * memory + l];
            for (o, t) in out[l..].iter_mut().zip(term) {
                *o += a * t;
            }
        }
    }
    out
}

struct NormalEquations {
    n: usize,
    gram: Vec<C64>,
    rhs: Vec<C64>,
}

impl NormalEquations {
    fn new(n: usize) -> Self {
        Self {
            n,
            gram: vec![C64::new(0.0, 0.0); n * n],
            rhs: vec![C64::new(0.0, 0.0); n],
        }
    }

    fn accumulate(&mut self, cols: &[Vec<C64>], target: &[C64]) {
        let n = self.n;
        for i in 0..n {
            let a = &cols[i];
            for j in i..n {
                let b = &cols[j];
                let dot: C64 = a.iter().zip(b).map(|(x, y)| x.conj() * y).sum();
                self.gram[i * n + j] += dot;
            }
            self.rhs[i] += a.iter().zip(target).map(|(x, y)| x.conj() * y).sum::<C64>();
        }
    }

    /// Solve the column-equilibrated, ridge-regularized system.
    fn solve(&self) -> Result<Vec<C64>> {
        let n = self.n;
        let scale: Vec<f64> = (0..n)
            .map(|i| {
                let d = self.gram[i * n + i].re;
                if d > 0.0 {
                    1.0 / d.sqrt()
                } else {
                    0.0
                }
            })
            .collect();
        let m = DMatrix::from_fn(n, n, |i, j| {
            let g = if i <= j {
                self.gram[i * n + j]
            } else {
                self.gram[j * n + i].conj()
            };
            let v = g * scale[i] * scale[j];
            if i == j {
                v + RIDGE
            } else {
                v
            }
        });
        let b = DVector::from_fn(n, |i, _| self.rhs[i] * scale[i]);
        let chol = Cholesky::new(m)
            .ok_or_else(|| Error::Numeric("normal equations are not positive definite".into()))?;
        let x = chol.solve(&b);
        let out: Vec<C64> = x.iter().zip(&scale).map(|(v, s)| v * s).collect();
        if out.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::Numeric("least-squares solution is not finite".into()));
        }
        Ok(out)
    }
}

/// Memory polynomial fit with an explicit scope.
pub fn memory_poly_fit_scoped(ds: &Dataset, order: usize, memory: usize, scope: FitScope) -> Result<PolyFit> {
    if order == 0 || memory == 0 {
        return Err(Error::InvalidArgument(format!(
            "polynomial order and memory must be >= 1, got {order} and {memory}"
        )));
    }
    if ds.system != SystemKind::Hammerstein {
        return Err(Error::Unsupported(format!(
            "polynomial baselines identify Hammerstein data, got {}",
            ds.system
        )));
    }
    if ds.records.is_empty() {
        return Err(Error::shape("dataset has no records"));
    }
    let n = order * memory;
    let groups: Vec<Vec<usize>> = match scope {
        FitScope::Joint => vec![(0..ds.records.len()).collect()],
        FitScope::PerRecord => (0..ds.records.len()).map(|i| vec![i]).collect(),
    };
    let mut coefficients = Vec::with_capacity(groups.len());
    let mut residual_energy = 0.0;
    let mut target_energy = 0.0;
    for group in &groups {
        let mut ne = NormalEquations::new(n);
        for &i in group {
            let rec = &ds.records[i];
            let cols = memory_poly_basis(rec.input.samples(), order, memory);
            ne.accumulate(&cols, rec.output.samples());
        }
        let coefs = ne.solve()?;
        for &i in group {
            let rec = &ds.records[i];
            let y = rec.output.samples();
            let yhat = predict(&coefs, rec.input.samples(), order, memory);
            residual_energy += y.iter().zip(&yhat).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>();
            target_energy += y.iter().map(|v| v.norm_sqr()).sum::<f64>();
        }
        coefficients.push(coefs);
    }
    Ok(PolyFit {
        order,
        memory,
        scope,
        coefficients,
        mse_db: energy_ratio_db(residual_energy, target_energy),
    })
}

/// Memory polynomial of nonlinear order `order` and memory `memory`, jointly
/// on invariant data and per file ID otherwise.
pub fn memory_poly_fit(ds: &Dataset, order: usize, memory: usize) -> Result<PolyFit> {
    memory_poly_fit_scoped(ds, order, memory, FitScope::for_taxonomy(ds.taxonomy))
}

/// Linear FIR of length `memory`: the order-one memory polynomial.
pub fn linear_fir_fit(ds: &Dataset, memory: usize) -> Result<PolyFit> {
    memory_poly_fit(ds, 1, memory)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::random_si_channel;
    use crate::dataset::FileRecord;
    use crate::nonlinearity::{NonlinearityKind, NonlinearitySpec};
    use crate::rng::{complex_gaussian, rng_from_seed};
    use crate::waveform::ComplexSignal;
    use nalgebra::DMatrix;

    fn synthetic(records: usize, n: usize, f: impl Fn(usize, &[C64]) -> Vec<C64>) -> Dataset {
        let mut rng = rng_from_seed(11);
        let recs = (0..records)
            .map(|i| {
                let x: Vec<C64> = (0..n).map(|_| complex_gaussian(&mut rng, 1.0)).collect();
                let y = f(i, &x);
                FileRecord {
                    file_id: i as u16,
                    input: ComplexSignal::baseband(x).unwrap(),
                    output: ComplexSignal::baseband(y).unwrap(),
                    truth_channel: random_si_channel(1).unwrap(),
                    truth_nl: NonlinearitySpec {
                        kind: NonlinearityKind::PaArctan,
                        param: 1.0,
                        achieved_si_sdr: 10.0,
                    },
                    noise_seed: 0,
                }
            })
            .collect();
        Dataset {
            system: SystemKind::Hammerstein,
            taxonomy: Taxonomy::InvNlVarSi,
            si_sdr0: 10.0,
            master_seed: 0,
            records: recs,
        }
    }

    #[test]
    fn recovers_exact_polynomial() {
        let order = 3;
        let memory = 4;
        let truth: Vec<C64> = (0..order * memory)
            .map(|i| C64::new((i as f64 * 0.7).sin(), (i as f64 * 1.3).cos()) / (1 + i) as f64)
            .collect();
        let ds = synthetic(2, 300, |_, x| predict(&truth, x, order, memory));
        let fit = memory_poly_fit(&ds, order, memory).unwrap();
        assert_eq!(fit.coefficients.len(), 2);
        for g in 0..2 {
            for (a, b) in fit.coefficients[g].iter().zip(&truth) {
                assert!((a - b).norm() < 1e-6, "{a} vs {b}");
            }
        }
        assert!(fit.mse_db < -100.0);
    }

    #[test]
    fn matches_svd_least_squares() {
        // independent route: dense least squares through the SVD
        let ds = synthetic(1, 200, |_, x| {
            x.iter()
                .enumerate()
                .map(|(k, v)| v * v.norm() * 0.3 + v.powi(2) + C64::new(0.0, (k as f64).sin()))
                .collect()
        });
        let (order, memory) = (2, 3);
        let fit = memory_poly_fit(&ds, order, memory).unwrap();
        let rec = &ds.records[0];
        let cols = memory_poly_basis(rec.input.samples(), order, memory);
        let a = DMatrix::from_fn(200, order * memory, |r, c| cols[c][r]);
        let b = DMatrix::from_fn(200, 1, |r, _| rec.output.samples()[r]);
        let x = a.svd(true, true).solve(&b, 1e-14).unwrap();
        for (u, v) in fit.coefficients[0].iter().zip(x.iter()) {
            assert!((u - v).norm() < 1e-7, "{u} vs {v}");
        }
    }

    #[test]
    fn fir_is_order_one_polynomial() {
        let ds = synthetic(3, 256, |i, x| {
            x.iter().map(|v| v * v.norm() + C64::new(i as f64, 0.0)).collect()
        });
        let a = linear_fir_fit(&ds, 5).unwrap();
        let b = memory_poly_fit(&ds, 1, 5).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn fir_identifies_linear_channel() {
        let ch = random_si_channel(5).unwrap();
        let ds = synthetic(2, 400, |_, x| ch.apply(x));
        let fit = linear_fir_fit(&ds, 16).unwrap();
        assert!(fit.mse_db < -150.0);
        for (a, b) in fit.coefficients[0].iter().zip(ch.taps()) {
            assert!((a - b).norm() < 1e-9);
        }
        assert!(fit.coefficients[0][12..].iter().all(|v| v.norm() < 1e-9));
    }

    #[test]
    fn evaluate_on_training_data_reproduces_fit_error() {
        let ds = synthetic(3, 256, |i, x| x.iter().map(|v| v * (1.0 + i as f64) + v * v.norm()).collect());
        let fit = memory_poly_fit(&ds, 1, 3).unwrap();
        assert!((fit.evaluate(&ds).unwrap() - fit.mse_db).abs() < 1e-12);
        let fewer = synthetic(2, 256, |_, x| x.to_vec());
        assert!(fit.evaluate(&fewer).is_err());
    }

    #[test]
    fn rejects_bad_arguments() {
        let ds = synthetic(1, 32, |_, x| x.to_vec());
        assert!(memory_poly_fit(&ds, 0, 4).is_err());
        assert!(linear_fir_fit(&ds, 0).is_err());
        let mut w = ds.clone();
        w.system = SystemKind::Wiener;
        assert!(linear_fir_fit(&w, 4).is_err());
    }
}
