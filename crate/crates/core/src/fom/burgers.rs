//! Inviscid Burgers' equation on `[0, 1]` with a Godunov finite-volume scheme.
//!
//! Parameters are the inflow value and the source exponent:
//! `w_t + (w^2/2)_x = 0.02 exp(mu_2 x)`, `w(0, t) = mu_1`, `w(x, 0) = 1`.

use nalgebra::DVector;

use super::{ModelError, ParamDomain, ParameterPoint, SemiDiscreteModel, SparseRows};
use crate::linalg::{BandMatrix, MassOperator};

/// Godunov flux for `f(w) = w^2 / 2`.
pub fn godunov_flux(left: f64, right: f64) -> f64 {
    if left > right {
        if left + right >= 0.0 {
            0.5 * left * left
        } else {
            0.5 * right * right
        }
    } else if left >= 0.0 {
        0.5 * left * left
    } else if right <= 0.0 {
        0.5 * right * right
    } else {
        0.0
    }
}

/// Partial derivatives of [`godunov_flux`] with respect to `(left, right)`.
fn godunov_flux_partials(left: f64, right: f64) -> (f64, f64) {
    if left > right {
        if left + right >= 0.0 {
            (left, 0.0)
        } else {
            (0.0, right)
        }
    } else if left >= 0.0 {
        (left, 0.0)
    } else if right <= 0.0 {
        (0.0, right)
    } else {
        (0.0, 0.0)
    }
}

#[derive(Debug, Clone)]
pub struct BurgersModel {
    n_cells: usize,
    dx: f64,
    centers: Vec<f64>,
    source_amplitude: f64,
    domain: ParamDomain,
    mass: MassOperator,
}

/// Uniform grid of `n_cells` cells with the benchmark source amplitude 0.02.
pub fn burgers_model(n_cells: usize) -> Result<BurgersModel, ModelError> {
    if n_cells < 2 {
        return Err(ModelError::Discretization(format!("Burgers needs at least 2 cells, got {n_cells}")));
    }
    let dx = 1.0 / n_cells as f64;
    Ok(BurgersModel {
        n_cells,
        dx,
        centers: (0..n_cells).map(|i| (i as f64 + 0.5) * dx).collect(),
        source_amplitude: 0.02,
        domain: ParamDomain::new(vec![1.2, 0.02], vec![1.5, 0.025]),
        mass: MassOperator::Identity(n_cells),
    })
}

impl BurgersModel {
    pub fn with_source_amplitude(mut self, amplitude: f64) -> Self {
        self.source_amplitude = amplitude;
        self
    }

    pub fn with_param_domain(mut self, domain: ParamDomain) -> Self {
        self.domain = domain;
        self
    }

    pub fn cell_centers(&self) -> &[f64] {
        &self.centers
    }

    fn check(&self, mu: &ParameterPoint) -> Result<(), ModelError> {
        if mu.len() != 2 {
            return Err(ModelError::ParamCount { expected: 2, found: mu.len() });
        }
        Ok(())
    }

    #[inline]
    fn left_of(&self, u: &DVector<f64>, i: usize, inflow: f64) -> f64 {
        if i == 0 {
            inflow
        } else {
            u[i - 1]
        }
    }

    #[inline]
    fn right_of(&self, u: &DVector<f64>, i: usize) -> f64 {
        if i + 1 == self.n_cells {
            u[i]
        } else {
            u[i + 1]
        }
    }

    fn row_value(&self, u: &DVector<f64>, i: usize, mu: &[f64]) -> f64 {
        let (l, c, r) = (self.left_of(u, i, mu[0]), u[i], self.right_of(u, i));
        let flux_in = godunov_flux(l, c);
        let flux_out = godunov_flux(c, r);
        -(flux_out - flux_in) / self.dx + self.source_amplitude * (mu[1] * self.centers[i]).exp()
    }

    fn row_partials(&self, u: &DVector<f64>, i: usize, mu: &[f64]) -> Vec<(usize, f64)> {
        let (l, c, r) = (self.left_of(u, i, mu[0]), u[i], self.right_of(u, i));
        let (din_l, din_c) = godunov_flux_partials(l, c);
        let (dout_c, dout_r) = godunov_flux_partials(c, r);
        let inv = 1.0 / self.dx;
        let mut row = Vec::with_capacity(3);
        if i > 0 {
            row.push((i - 1, din_l * inv));
        }
        if i + 1 == self.n_cells {
            row.push((i, (din_c - dout_c - dout_r) * inv));
        } else {
            row.push((i, (din_c - dout_c) * inv));
            row.push((i + 1, -dout_r * inv));
        }
        row
    }
}

impl SemiDiscreteModel for BurgersModel {
    fn name(&self) -> &str {
        "burgers"
    }

    fn n_space(&self) -> usize {
        self.n_cells
    }

    fn param_domain(&self) -> &ParamDomain {
        &self.domain
    }

    fn mass(&self) -> &MassOperator {
        &self.mass
    }

    fn initial_state(&self, mu: &ParameterPoint) -> Result<DVector<f64>, ModelError> {
        self.check(mu)?;
        Ok(DVector::from_element(self.n_cells, 1.0))
    }

    fn velocity(&self, u: &DVector<f64>, _t: f64, mu: &ParameterPoint) -> Result<DVector<f64>, ModelError> {
        self.check(mu)?;
        Ok(DVector::from_fn(self.n_cells, |i, _| self.row_value(u, i, mu.values())))
    }

    fn jacobian(&self, u: &DVector<f64>, _t: f64, mu: &ParameterPoint) -> Result<BandMatrix, ModelError> {
        self.check(mu)?;
        let mut jac = BandMatrix::zeros(self.n_cells, 1, 1);
        for i in 0..self.n_cells {
            for (j, v) in self.row_partials(u, i, mu.values()) {
                jac.set(i, j, v);
            }
        }
        Ok(jac)
    }

    fn stencil(&self, row: usize) -> Vec<usize> {
        (row.saturating_sub(1)..(row + 2).min(self.n_cells)).collect()
    }

    fn velocity_rows(&self, u: &DVector<f64>, rows: &[usize], _t: f64, mu: &ParameterPoint) -> Result<DVector<f64>, ModelError> {
        self.check(mu)?;
        Ok(DVector::from_iterator(rows.len(), rows.iter().map(|&i| self.row_value(u, i, mu.values()))))
    }

    fn jacobian_rows(&self, u: &DVector<f64>, rows: &[usize], _t: f64, mu: &ParameterPoint) -> Result<SparseRows, ModelError> {
        self.check(mu)?;
        Ok(rows.iter().map(|&i| self.row_partials(u, i, mu.values())).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shock_and_rarefaction_fluxes() {
        assert_eq!(godunov_flux(2.0, 1.0), 2.0);
        assert_eq!(godunov_flux(-1.0, 1.0), 0.0);
        assert_eq!(godunov_flux(1.0, 2.0), 0.5);
        assert_eq!(godunov_flux(-2.0, -1.0), 0.5);
        assert_eq!(godunov_flux(1.0, -3.0), 4.5);
    }

    #[test]
    fn constant_state_leaves_only_the_source() {
        let model = burgers_model(20).unwrap();
        let mu = ParameterPoint::new([1.0, 0.02]);
        let u = DVector::from_element(20, 1.0);
        let f = model.velocity(&u, 0.0, &mu).unwrap();
        for (i, x) in model.cell_centers().iter().enumerate() {
            assert!((f[i] - 0.02 * (0.02 * x).exp()).abs() < 1e-12);
        }
    }
}
