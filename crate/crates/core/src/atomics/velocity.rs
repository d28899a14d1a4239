//! Discretized one-dimensional Maxwell–Boltzmann velocity distribution.

use serde::Serialize;

use super::scheme::BOLTZMANN;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VelocityGrid {
    velocities: Vec<f64>,
    weights: Vec<f64>,
    pub temperature_k: f64,
    pub mass_kg: f64,
    pub sigma_v: f64,
}

impl VelocityGrid {
    pub fn velocities(&self) -> &[f64] {
        &self.velocities
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.velocities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.velocities.is_empty()
    }

    /// A single class at rest carrying all the weight (Doppler-free limit).
    pub fn stationary(temperature_k: f64, mass_kg: f64) -> Self {
        VelocityGrid {
            velocities: vec![0.0],
            weights: vec![1.0],
            temperature_k,
            mass_kg,
            sigma_v: thermal_speed(temperature_k, mass_kg),
        }
    }

    /// Reorder classes by `perm` (class `i` of the result is class `perm[i]`).
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let mut out = self.clone();
        out.velocities = perm.iter().map(|&i| self.velocities[i]).collect();
        out.weights = perm.iter().map(|&i| self.weights[i]).collect();
        out
    }

    /// Classes sorted by velocity (then weight). The solver works on this
    /// order so that results do not depend on how the grid was listed.
    pub fn sorted(&self) -> Self {
        let mut perm: Vec<usize> = (0..self.len()).collect();
        perm.sort_by(|&a, &b| {
            self.velocities[a].total_cmp(&self.velocities[b]).then(self.weights[a].total_cmp(&self.weights[b]))
        });
        self.permuted(&perm)
    }

    /// Discrete second moment Σ w v².
    pub fn second_moment(&self) -> f64 {
        self.velocities.iter().zip(&self.weights).map(|(v, w)| w * v * v).sum()
    }
}

/// σ_v = sqrt(k_B T / m) in m/s.
pub fn thermal_speed(temperature_k: f64, mass_kg: f64) -> f64 {
    (BOLTZMANN * temperature_k / mass_kg).sqrt()
}

/// Uniform grid on `[-span·σ_v, span·σ_v]` with weights proportional to the
/// Gaussian density, renormalized to sum to one.
pub fn velocity_grid(temperature_k: f64, mass_kg: f64, n_classes: usize, span: f64) -> Result<VelocityGrid> {
    if !(temperature_k > 0.0) {
        return Err(Error::domain(format!("temperature must be positive, got {temperature_k} K")));
    }
    if !(mass_kg > 0.0) {
        return Err(Error::domain(format!("mass must be positive, got {mass_kg} kg")));
    }
    if n_classes < 3 || n_classes.is_multiple_of(2) {
        return Err(Error::domain(format!("velocity class count must be odd and at least 3, got {n_classes}")));
    }
    if !(span > 0.0) {
        return Err(Error::domain(format!("velocity span must be positive, got {span}")));
    }
    let sigma_v = thermal_speed(temperature_k, mass_kg);
    let half = (n_classes / 2) as i64;
    let step = span / half as f64;
    let mut velocities = Vec::with_capacity(n_classes);
    let mut weights = Vec::with_capacity(n_classes);
    for k in -half..=half {
        let x = k as f64 * step;
        velocities.push(x * sigma_v);
        weights.push((-0.5 * x * x).exp());
    }
    // Pairwise-symmetric normalization keeps the mean exactly zero.
    let total: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= total);
    Ok(VelocityGrid { velocities, weights, temperature_k, mass_kg, sigma_v })
}
