//! Nonlinear diffusion `u_t = div((kappa + alpha u) grad u)` on the unit square
//! with bilinear finite elements and natural boundary conditions.

use nalgebra::DVector;

use super::{ModelError, ParamDomain, ParameterPoint, SemiDiscreteModel, SparseRows};
use crate::linalg::{BandMatrix, MassOperator};

const KAPPA: f64 = 0.5;
const ALPHA: f64 = 0.01;

/// Reference-element data at the 2x2 Gauss points.
#[derive(Debug, Clone)]
struct Reference {
    shape: [[f64; 4]; 4],
    /// Physical gradients, `[point][node] = (d/dx, d/dy)`.
    grad: [[(f64, f64); 4]; 4],
    det: f64,
}

impl Reference {
    fn new(h: f64) -> Self {
        let g = 1.0 / 3f64.sqrt();
        let points = [(-g, -g), (g, -g), (g, g), (-g, g)];
        let corners = [(-1.0, -1.0), (1.0, -1.0), (1.0, 1.0), (-1.0, 1.0)];
        let mut shape = [[0.0; 4]; 4];
        let mut grad = [[(0.0, 0.0); 4]; 4];
        for (q, &(xi, eta)) in points.iter().enumerate() {
            for (a, &(xa, ya)) in corners.iter().enumerate() {
                shape[q][a] = 0.25 * (1.0 + xa * xi) * (1.0 + ya * eta);
                let dxi = 0.25 * xa * (1.0 + ya * eta);
                let deta = 0.25 * ya * (1.0 + xa * xi);
                grad[q][a] = (dxi * 2.0 / h, deta * 2.0 / h);
            }
        }
        Self { shape, grad, det: h * h / 4.0 }
    }
}

#[derive(Debug, Clone)]
pub struct DiffusionModel {
    per_side: usize,
    h: f64,
    kappa: f64,
    alpha: f64,
    reference: Reference,
    elements: Vec<[usize; 4]>,
    /// Elements touching each node.
    patches: Vec<Vec<usize>>,
    domain: ParamDomain,
    mass: MassOperator,
}

/// Uniform `n x n` mesh of bilinear quadrilaterals with a consistent mass matrix.
pub fn diffusion_model(elements_per_side: usize) -> Result<DiffusionModel, ModelError> {
    DiffusionModel::new(elements_per_side, KAPPA, ALPHA)
}

impl DiffusionModel {
    pub fn new(elements_per_side: usize, kappa: f64, alpha: f64) -> Result<Self, ModelError> {
        let n = elements_per_side;
        if n < 2 {
            return Err(ModelError::Discretization(format!("need at least 2 elements per side, got {n}")));
        }
        let h = 1.0 / n as f64;
        let nodes_per_side = n + 1;
        let node = |i: usize, j: usize| j * nodes_per_side + i;
        let mut elements = Vec::with_capacity(n * n);
        let mut patches = vec![Vec::new(); nodes_per_side * nodes_per_side];
        for j in 0..n {
            for i in 0..n {
                let e = [node(i, j), node(i + 1, j), node(i + 1, j + 1), node(i, j + 1)];
                for &a in &e {
                    patches[a].push(elements.len());
                }
                elements.push(e);
            }
        }
        let reference = Reference::new(h);
        let band = n + 2;
        let mut m = BandMatrix::zeros(nodes_per_side * nodes_per_side, band, band);
        for e in &elements {
            for a in 0..4 {
                for b in 0..4 {
                    let v: f64 = (0..4).map(|q| reference.shape[q][a] * reference.shape[q][b]).sum::<f64>() * reference.det;
                    m.add(e[a], e[b], v);
                }
            }
        }
        Ok(Self {
            per_side: n,
            h,
            kappa,
            alpha,
            reference,
            elements,
            patches,
            domain: ParamDomain::empty(),
            mass: MassOperator::banded(m)?,
        })
    }

    pub fn elements_per_side(&self) -> usize {
        self.per_side
    }

    pub fn node_position(&self, index: usize) -> (f64, f64) {
        let side = self.per_side + 1;
        ((index % side) as f64 * self.h, (index / side) as f64 * self.h)
    }

    fn bandwidth(&self) -> usize {
        self.per_side + 2
    }

    /// Element contribution to the velocity and, optionally, its Jacobian.
    fn element(&self, e: usize, u: &DVector<f64>, jac: Option<&mut [[f64; 4]; 4]>) -> [f64; 4] {
        let nodes = self.elements[e];
        let ue = nodes.map(|a| u[a]);
        let r = &self.reference;
        let mut f = [0.0; 4];
        let mut local = [[0.0; 4]; 4];
        let want_jac = jac.is_some();
        for q in 0..4 {
            let uq: f64 = (0..4).map(|b| r.shape[q][b] * ue[b]).sum();
            let (gx, gy) = (0..4).fold((0.0, 0.0), |(x, y), b| (x + r.grad[q][b].0 * ue[b], y + r.grad[q][b].1 * ue[b]));
            let k = self.kappa + self.alpha * uq;
            for a in 0..4 {
                let (ax, ay) = r.grad[q][a];
                let flux = ax * gx + ay * gy;
                f[a] -= k * flux * r.det;
                if want_jac {
                    for c in 0..4 {
                        let (cx, cy) = r.grad[q][c];
                        local[a][c] -= (k * (ax * cx + ay * cy) + self.alpha * r.shape[q][c] * flux) * r.det;
                    }
                }
            }
        }
        if let Some(j) = jac {
            *j = local;
        }
        f
    }

    /// Stiffness matrix `K(u)` with coefficient `kappa + alpha u` at the quadrature points.
    pub fn stiffness(&self, u: &DVector<f64>) -> BandMatrix {
        let r = &self.reference;
        let mut k = BandMatrix::zeros(self.n_space(), self.bandwidth(), self.bandwidth());
        for nodes in &self.elements {
            for q in 0..4 {
                let uq: f64 = (0..4).map(|b| r.shape[q][b] * u[nodes[b]]).sum();
                let coef = (self.kappa + self.alpha * uq) * r.det;
                for a in 0..4 {
                    for b in 0..4 {
                        let dot = r.grad[q][a].0 * r.grad[q][b].0 + r.grad[q][a].1 * r.grad[q][b].1;
                        k.add(nodes[a], nodes[b], coef * dot);
                    }
                }
            }
        }
        k
    }

    fn local_index(&self, e: usize, node: usize) -> usize {
        self.elements[e].iter().position(|&a| a == node).expect("node belongs to its patch")
    }
}

impl SemiDiscreteModel for DiffusionModel {
    fn name(&self) -> &str {
        "diffusion"
    }

    fn n_space(&self) -> usize {
        (self.per_side + 1) * (self.per_side + 1)
    }

    fn param_domain(&self) -> &ParamDomain {
        &self.domain
    }

    fn mass(&self) -> &MassOperator {
        &self.mass
    }

    fn initial_state(&self, mu: &ParameterPoint) -> Result<DVector<f64>, ModelError> {
        self.domain.check(mu)?;
        Ok(DVector::from_fn(self.n_space(), |i, _| {
            let (x, y) = self.node_position(i);
            if x * x + y * y <= 0.25 {
                2.0
            } else {
                1.0
            }
        }))
    }

    fn velocity(&self, u: &DVector<f64>, _t: f64, mu: &ParameterPoint) -> Result<DVector<f64>, ModelError> {
        self.domain.check(mu)?;
        let mut f = DVector::zeros(self.n_space());
        for (e, nodes) in self.elements.iter().enumerate() {
            let fe = self.element(e, u, None);
            for a in 0..4 {
                f[nodes[a]] += fe[a];
            }
        }
        Ok(f)
    }

    fn jacobian(&self, u: &DVector<f64>, _t: f64, mu: &ParameterPoint) -> Result<BandMatrix, ModelError> {
        self.domain.check(mu)?;
        let mut jac = BandMatrix::zeros(self.n_space(), self.bandwidth(), self.bandwidth());
        let mut local = [[0.0; 4]; 4];
        for (e, nodes) in self.elements.iter().enumerate() {
            self.element(e, u, Some(&mut local));
            for a in 0..4 {
                for c in 0..4 {
                    jac.add(nodes[a], nodes[c], local[a][c]);
                }
            }
        }
        Ok(jac)
    }

    fn stencil(&self, row: usize) -> Vec<usize> {
        let mut s: Vec<usize> = self.patches[row].iter().flat_map(|&e| self.elements[e]).collect();
        s.sort_unstable();
        s.dedup();
        s
    }

    fn velocity_rows(&self, u: &DVector<f64>, rows: &[usize], _t: f64, mu: &ParameterPoint) -> Result<DVector<f64>, ModelError> {
        self.domain.check(mu)?;
        Ok(DVector::from_iterator(
            rows.len(),
            rows.iter().map(|&row| {
                self.patches[row].iter().map(|&e| self.element(e, u, None)[self.local_index(e, row)]).sum::<f64>()
            }),
        ))
    }

    fn jacobian_rows(&self, u: &DVector<f64>, rows: &[usize], _t: f64, mu: &ParameterPoint) -> Result<SparseRows, ModelError> {
        self.domain.check(mu)?;
        let mut local = [[0.0; 4]; 4];
        Ok(rows
            .iter()
            .map(|&row| {
                let mut entries: Vec<(usize, f64)> = Vec::with_capacity(16);
                for &e in &self.patches[row] {
                    self.element(e, u, Some(&mut local));
                    let a = self.local_index(e, row);
                    for (c, &node) in self.elements[e].iter().enumerate() {
                        entries.push((node, local[a][c]));
                    }
                }
                entries.sort_by_key(|&(j, _)| j);
                let mut merged: Vec<(usize, f64)> = Vec::with_capacity(9);
                for (j, v) in entries {
                    match merged.last_mut() {
                        Some((k, acc)) if *k == j => *acc += v,
                        _ => merged.push((j, v)),
                    }
                }
                merged
            })
            .collect())
    }
}
