use super::array::{pooled_map, CxArray};
use crate::C64;

/// Floor for [`mse_db`] when the residual vanishes.
pub const MSE_DB_FLOOR: f64 = -300.0;

/// Mean of `|r|²` over all elements.
pub fn mse_loss(residual: &CxArray) -> f64 {
    residual.energy() / residual.len() as f64
}

pub(crate) fn mse_loss_backward(residual: &CxArray, seed: f64) -> CxArray {
    let scale = 2.0 * seed / residual.len() as f64;
    let data = pooled_map(residual.data(), |r| r * scale);
    CxArray::from_parts_unchecked(data, residual.dims().to_vec(), residual.axes().to_vec())
}

/// Residual energy relative to reference energy, in dB.
pub fn mse_db(residual: &[C64], reference: &[C64]) -> f64 {
    let r: f64 = residual.iter().map(|v| v.norm_sqr()).sum();
    let y: f64 = reference.iter().map(|v| v.norm_sqr()).sum();
    energy_ratio_db(r, y)
}

pub(crate) fn energy_ratio_db(residual_energy: f64, reference_energy: f64) -> f64 {
    if residual_energy == 0.0 {
        return MSE_DB_FLOOR;
    }
    (10.0 * (residual_energy / reference_energy).log10()).max(MSE_DB_FLOOR)
}
