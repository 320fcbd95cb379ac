//! Quasi-one-dimensional Euler flow in a converging-diverging nozzle.
//!
//! Cell-centred finite volumes with Roe fluxes (Harten entropy fix) on the
//! conservative variables `(rho, rho u, e)`, interleaved per cell. Boundary
//! states enter through ghost values computed from the current state, so their
//! dependence shows up in the Jacobian. Face Jacobians come from forward-mode
//! dual numbers.

use nalgebra::DVector;
use num_dual::{DualNum, DualSVec64};

use super::{ModelError, ParamDomain, ParameterPoint, SemiDiscreteModel, SparseRows};
use crate::linalg::{BandMatrix, MassOperator};

pub const GAMMA: f64 = 1.3;
pub const GAS_CONSTANT: f64 = 355.4;
pub const TOTAL_TEMPERATURE: f64 = 300.0;
pub const TOTAL_PRESSURE: f64 = 1.0e6;
const SHOCK_POSITION: f64 = 0.85;
const THROAT: f64 = 0.5;
const MACH_CEILING: f64 = 10.0;

/// One of the four cubic pieces of the nozzle area, evaluated at `x`.
pub fn nozzle_area_segment(segment: usize, x: f64) -> f64 {
    match segment {
        0 => -0.288 * x.powi(3) + 0.408 * x.powi(2) - 0.192 * x + 0.2,
        1 => {
            let s = x - 0.25;
            -0.288 * s.powi(3) + 0.192 * s.powi(2) - 0.042 * s + 0.173
        }
        2 => {
            let s = x - 0.5;
            0.288 * s.powi(3) - 0.024 * s.powi(2) + 0.17
        }
        3 => {
            let s = x - 0.75;
            0.288 * s.powi(3) + 0.192 * s.powi(2) + 0.042 * s + 0.173
        }
        _ => panic!("nozzle has four segments, got {segment}"),
    }
}

/// Cross-sectional area in square meters for `x` in `[0, 1]`.
pub fn nozzle_area(x: f64) -> Result<f64, ModelError> {
    if !(0.0..=1.0).contains(&x) {
        return Err(ModelError::OutsideNozzle { x });
    }
    let segment = ((x / 0.25) as usize).min(3);
    Ok(nozzle_area_segment(segment, x))
}

fn stagnation_factor(mach: f64) -> f64 {
    1.0 + 0.5 * (GAMMA - 1.0) * mach * mach
}

/// Supersonic root of the area-Mach relation anchored at the throat. The
/// bracket starts at the sonic point since the spline dips just below the
/// throat area on either side of it.
fn isentropic_mach(x: f64, area: f64, throat_mach: f64) -> Result<f64, ModelError> {
    let throat_area = nozzle_area(THROAT)?;
    let exponent = (GAMMA + 1.0) / (2.0 * (GAMMA - 1.0));
    let base = stagnation_factor(throat_mach);
    let g = |m: f64| m - throat_mach * throat_area / area * (stagnation_factor(m) / base).powf(exponent);
    let (mut lo, mut hi) = (1.0, MACH_CEILING);
    let (g_lo, g_hi) = (g(lo), g(hi));
    if g_lo == 0.0 {
        return Ok(lo);
    }
    if g_lo.signum() == g_hi.signum() {
        return Err(ModelError::MachRelation { x });
    }
    while hi - lo > 1e-12 {
        let mid = 0.5 * (lo + hi);
        if g(mid).signum() == g_lo.signum() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// `(rho, u, p)` from the isentropic relations at Mach number `mach`.
fn isentropic_primitive(mach: f64) -> (f64, f64, f64) {
    let factor = stagnation_factor(mach);
    let temperature = TOTAL_TEMPERATURE / factor;
    let pressure = TOTAL_PRESSURE * factor.powf(-GAMMA / (GAMMA - 1.0));
    let density = pressure / (GAS_CONSTANT * temperature);
    let sound = (GAMMA * pressure / density).sqrt();
    (density, mach * sound, pressure)
}

fn conservative(rho: f64, u: f64, p: f64) -> [f64; 3] {
    [rho, rho * u, p / (GAMMA - 1.0) + 0.5 * rho * u * u]
}

/// Downstream `(rho, u, p)` of a stationary normal shock with upstream
/// `(rho, u, p)`. The jump quadratic has the upstream velocity as one root; the
/// other (smaller) root is the subsonic downstream velocity. Both coincide for a
/// sonic upstream state.
pub fn normal_shock(rho: f64, u: f64, p: f64) -> Result<(f64, f64, f64), ModelError> {
    let m = rho * u;
    let n = rho * u * u + p;
    let e = p / (GAMMA - 1.0) + 0.5 * rho * u * u;
    let h = (e + p) / rho;
    let g = GAMMA / (GAMMA - 1.0);
    let (a, b, c) = (0.5 - g, g * n / m, -h);
    let mut discriminant = b * b - 4.0 * a * c;
    if discriminant < 0.0 {
        if discriminant < -1e-10 * b * b {
            return Err(ModelError::ShockQuadratic { discriminant });
        }
        discriminant = 0.0;
    }
    let q = -0.5 * (b + b.signum() * discriminant.sqrt());
    let u2 = (c / q).min(q / a);
    if u2 <= 0.0 {
        return Err(ModelError::ShockQuadratic { discriminant });
    }
    let rho2 = m / u2;
    Ok((rho2, u2, n - m * u2))
}

/// Boundary data for a given parameter point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryData {
    /// Conservative inflow state, imposed through the inlet ghost cell.
    pub inflow: [f64; 3],
    /// Static pressure of the outlet ghost cell.
    pub exit_pressure: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AreaProfile {
    Nozzle,
    Constant(f64),
}

impl AreaProfile {
    fn at(self, x: f64) -> Result<f64, ModelError> {
        match self {
            AreaProfile::Nozzle => nozzle_area(x),
            AreaProfile::Constant(a) => Ok(a),
        }
    }
}

fn check_nozzle_params(mu: &ParameterPoint) -> Result<(f64, f64), ModelError> {
    if mu.len() != 2 {
        return Err(ModelError::ParamCount { expected: 2, found: mu.len() });
    }
    Ok((mu.values()[0], mu.values()[1]))
}

/// Conservative initial state: isentropic flow, a normal shock at
/// `x = 0.85`, and the outlet cell's pressure scaled by the exit factor.
pub fn euler_initial_state(mu: &ParameterPoint, n_cells: usize) -> Result<DVector<f64>, ModelError> {
    let (exit_factor, throat_mach) = check_nozzle_params(mu)?;
    if n_cells < 10 {
        return Err(ModelError::Discretization(format!("nozzle needs at least 10 cells, got {n_cells}")));
    }
    let dx = 1.0 / n_cells as f64;
    let mut w = DVector::zeros(3 * n_cells);
    for i in 0..n_cells {
        let x = (i as f64 + 0.5) * dx;
        let mach = isentropic_mach(x, nozzle_area(x)?, throat_mach)?;
        let (mut rho, mut u, mut p) = isentropic_primitive(mach);
        if x > SHOCK_POSITION {
            (rho, u, p) = normal_shock(rho, u, p)?;
        }
        if i + 1 == n_cells {
            p *= exit_factor;
        }
        w.fixed_rows_mut::<3>(3 * i).copy_from_slice(&conservative(rho, u, p));
    }
    Ok(w)
}

fn nozzle_boundary(mu: &ParameterPoint, n_cells: usize) -> Result<BoundaryData, ModelError> {
    let (exit_factor, throat_mach) = check_nozzle_params(mu)?;
    let (rho, u, p) = isentropic_primitive(isentropic_mach(0.0, nozzle_area(0.0)?, throat_mach)?);
    let x_last = 1.0 - 0.5 / n_cells as f64;
    let (r1, u1, p1) = isentropic_primitive(isentropic_mach(x_last, nozzle_area(x_last)?, throat_mach)?);
    let (_, _, p_exit) = normal_shock(r1, u1, p1)?;
    Ok(BoundaryData { inflow: conservative(rho, u, p), exit_pressure: exit_factor * p_exit })
}

#[inline]
fn pressure<D: DualNum<Primitive = f64> + Copy>(w: &[D; 3]) -> D {
    (w[2] - w[1] * w[1] / w[0] * 0.5) * (GAMMA - 1.0)
}

fn check_state(w: &[f64; 3], cell: usize) -> Result<(), ModelError> {
    let p = pressure(w);
    if !(w[0] > 0.0 && p > 0.0) {
        return Err(ModelError::NonPhysical { cell, density: w[0], pressure: p });
    }
    Ok(())
}

/// Roe flux with Harten's entropy fix, generic over the scalar so that the
/// same code yields derivatives. States must already be checked as physical.
fn roe_generic<D: DualNum<Primitive = f64> + Copy>(wl: &[D; 3], wr: &[D; 3]) -> Option<[D; 3]> {
    let (pl, pr) = (pressure(wl), pressure(wr));
    let (ul, ur) = (wl[1] / wl[0], wr[1] / wr[0]);
    let (hl, hr) = ((wl[2] + pl) / wl[0], (wr[2] + pr) / wr[0]);
    let (sl, sr) = (wl[0].sqrt(), wr[0].sqrt());
    let ut = (sl * ul + sr * ur) / (sl + sr);
    let ht = (sl * hl + sr * hr) / (sl + sr);
    let c2 = (ht - ut * ut * 0.5) * (GAMMA - 1.0);
    if c2.re() <= 0.0 {
        return None;
    }
    let c = c2.sqrt();
    let rt = sl * sr;
    let (dp, du, dr) = (pr - pl, ur - ul, wr[0] - wl[0]);
    let a1 = (dp - rt * c * du) / (c2 * 2.0);
    let a2 = dr - dp / c2;
    let a3 = (dp + rt * c * du) / (c2 * 2.0);
    let delta = (ut.abs() + c) * 0.05;
    let fix = |lambda: D| {
        let a = lambda.abs();
        if a.re() < delta.re() {
            (lambda * lambda + delta * delta) / (delta * 2.0)
        } else {
            a
        }
    };
    let (l1, l2, l3) = (fix(ut - c), fix(ut), fix(ut + c));
    let r1 = [D::one(), ut - c, ht - ut * c];
    let r2 = [D::one(), ut, ut * ut * 0.5];
    let r3 = [D::one(), ut + c, ht + ut * c];
    let fl = [wl[1], wl[1] * ul + pl, ul * (wl[2] + pl)];
    let fr = [wr[1], wr[1] * ur + pr, ur * (wr[2] + pr)];
    Some(std::array::from_fn(|k| {
        (fl[k] + fr[k]) * 0.5 - (l1 * a1 * r1[k] + l2 * a2 * r2[k] + l3 * a3 * r3[k]) * 0.5
    }))
}

/// Roe intercell flux for conservative states `(rho, rho u, e)`.
pub fn roe_flux(left: [f64; 3], right: [f64; 3]) -> Result<[f64; 3], ModelError> {
    check_state(&left, 0)?;
    check_state(&right, 1)?;
    roe_generic(&left, &right).ok_or(ModelError::NonPhysical { cell: 0, density: left[0], pressure: f64::NAN })
}

/// A face flux with derivatives; `d_*[k][j] = dF_k / dw_j`.
#[derive(Debug, Clone, Copy)]
struct FaceEval {
    flux: [f64; 3],
    d_left: [[f64; 3]; 3],
    d_right: [[f64; 3]; 3],
}

type Dual6 = DualSVec64<6>;
type Dual3 = DualSVec64<3>;

fn seeded<const N: usize>(w: &[f64; 3], offset: usize) -> [DualSVec64<N>; 3] {
    std::array::from_fn(|k| DualSVec64::<N>::from_re(w[k]).derivative(offset + k))
}

fn partials<const N: usize>(f: &DualSVec64<N>) -> [f64; N] {
    let mut out = [0.0; N];
    if let Some(eps) = f.eps.0.as_ref() {
        out.copy_from_slice(eps.as_slice());
    }
    out
}

#[derive(Debug, Clone)]
pub struct EulerModel {
    n_cells: usize,
    dx: f64,
    profile: AreaProfile,
    face_area: Vec<f64>,
    cell_area: Vec<f64>,
    boundary_override: Option<BoundaryData>,
    domain: ParamDomain,
    mass: MassOperator,
}

pub fn euler_model(n_cells: usize) -> Result<EulerModel, ModelError> {
    EulerModel::new(n_cells, AreaProfile::Nozzle)
}

impl EulerModel {
    pub fn new(n_cells: usize, profile: AreaProfile) -> Result<Self, ModelError> {
        if n_cells < 10 {
            return Err(ModelError::Discretization(format!("nozzle needs at least 10 cells, got {n_cells}")));
        }
        let dx = 1.0 / n_cells as f64;
        let face_area = (0..=n_cells).map(|i| profile.at(i as f64 * dx)).collect::<Result<_, _>>()?;
        let cell_area = (0..n_cells).map(|i| profile.at((i as f64 + 0.5) * dx)).collect::<Result<_, _>>()?;
        Ok(Self {
            n_cells,
            dx,
            profile,
            face_area,
            cell_area,
            boundary_override: None,
            domain: ParamDomain::new(vec![1.7, 1.7], vec![1.73, 1.72]),
            mass: MassOperator::Identity(3 * n_cells),
        })
    }

    /// Replaces the parameter-derived boundary data.
    pub fn with_boundary(mut self, boundary: BoundaryData) -> Self {
        self.boundary_override = Some(boundary);
        self
    }

    pub fn n_cells(&self) -> usize {
        self.n_cells
    }

    pub fn profile(&self) -> AreaProfile {
        self.profile
    }

    pub fn boundary(&self, mu: &ParameterPoint) -> Result<BoundaryData, ModelError> {
        match self.boundary_override {
            Some(b) => {
                check_nozzle_params(mu)?;
                Ok(b)
            }
            None => nozzle_boundary(mu, self.n_cells),
        }
    }

    fn cell(u: &DVector<f64>, i: usize) -> [f64; 3] {
        [u[3 * i], u[3 * i + 1], u[3 * i + 2]]
    }

    fn outlet_ghost<D: DualNum<Primitive = f64> + Copy>(w: &[D; 3], exit_pressure: f64) -> [D; 3] {
        let u = w[1] / w[0];
        [w[0], w[1], w[1] * u * 0.5 + exit_pressure / (GAMMA - 1.0)]
    }

    fn nonphysical(&self, u: &DVector<f64>, i: usize) -> ModelError {
        let w = Self::cell(u, i);
        ModelError::NonPhysical { cell: i, density: w[0], pressure: pressure(&w) }
    }

    /// Flux through face `f` (between cells `f - 1` and `f`).
    fn face_flux(&self, u: &DVector<f64>, f: usize, bc: &BoundaryData) -> Result<[f64; 3], ModelError> {
        let (left, right) = self.face_states(u, f, bc)?;
        roe_generic(&left, &right).ok_or_else(|| self.nonphysical(u, f.min(self.n_cells - 1)))
    }

    fn face_states(&self, u: &DVector<f64>, f: usize, bc: &BoundaryData) -> Result<([f64; 3], [f64; 3]), ModelError> {
        let n = self.n_cells;
        if f > 0 {
            check_state(&Self::cell(u, f - 1), f - 1)?;
        }
        if f < n {
            check_state(&Self::cell(u, f), f)?;
        }
        Ok(match f {
            0 => (bc.inflow, Self::cell(u, 0)),
            f if f == n => {
                let w = Self::cell(u, n - 1);
                (w, Self::outlet_ghost(&w, bc.exit_pressure))
            }
            f => (Self::cell(u, f - 1), Self::cell(u, f)),
        })
    }

    fn face_eval(&self, u: &DVector<f64>, f: usize, bc: &BoundaryData) -> Result<FaceEval, ModelError> {
        let n = self.n_cells;
        self.face_states(u, f, bc)?;
        let fail = || self.nonphysical(u, f.min(n - 1));
        let mut eval = FaceEval { flux: [0.0; 3], d_left: [[0.0; 3]; 3], d_right: [[0.0; 3]; 3] };
        if f == 0 {
            let left: [Dual3; 3] = std::array::from_fn(|k| Dual3::from_re(bc.inflow[k]));
            let right = seeded::<3>(&Self::cell(u, 0), 0);
            let flux = roe_generic(&left, &right).ok_or_else(fail)?;
            for k in 0..3 {
                eval.flux[k] = flux[k].re;
                eval.d_right[k] = partials(&flux[k]);
            }
        } else if f == n {
            let left = seeded::<3>(&Self::cell(u, n - 1), 0);
            let right = Self::outlet_ghost(&left, bc.exit_pressure);
            let flux = roe_generic(&left, &right).ok_or_else(fail)?;
            for k in 0..3 {
                eval.flux[k] = flux[k].re;
                eval.d_left[k] = partials(&flux[k]);
            }
        } else {
            let left = seeded::<6>(&Self::cell(u, f - 1), 0);
            let right = seeded::<6>(&Self::cell(u, f), 3);
            let flux: [Dual6; 3] = roe_generic(&left, &right).ok_or_else(fail)?;
            for k in 0..3 {
                eval.flux[k] = flux[k].re;
                let d = partials(&flux[k]);
                eval.d_left[k].copy_from_slice(&d[..3]);
                eval.d_right[k].copy_from_slice(&d[3..]);
            }
        }
        Ok(eval)
    }

    fn cell_velocity(&self, u: &DVector<f64>, i: usize, west: &[f64; 3], east: &[f64; 3]) -> [f64; 3] {
        let (aw, ae) = (self.face_area[i], self.face_area[i + 1]);
        let scale = 1.0 / (self.cell_area[i] * self.dx);
        let p = pressure(&Self::cell(u, i));
        std::array::from_fn(|k| {
            let source = if k == 1 { p * (ae - aw) * scale } else { 0.0 };
            -(ae * east[k] - aw * west[k]) * scale + source
        })
    }

    /// Jacobian block of cell `i` against cells `i - 1, i, i + 1` (columns 0..9).
    fn cell_jacobian(&self, u: &DVector<f64>, i: usize, west: &FaceEval, east: &FaceEval) -> [[f64; 9]; 3] {
        let (aw, ae) = (self.face_area[i], self.face_area[i + 1]);
        let scale = 1.0 / (self.cell_area[i] * self.dx);
        let w = Self::cell(u, i);
        let vel = w[1] / w[0];
        let dp = [(GAMMA - 1.0) * 0.5 * vel * vel, -(GAMMA - 1.0) * vel, GAMMA - 1.0];
        let mut block = [[0.0; 9]; 3];
        for k in 0..3 {
            for j in 0..3 {
                block[k][j] = aw * scale * west.d_left[k][j];
                block[k][3 + j] = -ae * scale * east.d_left[k][j] + aw * scale * west.d_right[k][j];
                block[k][6 + j] = -ae * scale * east.d_right[k][j];
            }
        }
        for j in 0..3 {
            block[1][3 + j] += (ae - aw) * scale * dp[j];
        }
        block
    }

    fn block_row(&self, i: usize, row: &[f64; 9]) -> Vec<(usize, f64)> {
        let first = if i == 0 { 1 } else { 0 };
        let last = if i + 1 == self.n_cells { 2 } else { 3 };
        (first..last).flat_map(|b| (0..3).map(move |j| (3 * (i + b) + j - 3, row[3 * b + j]))).collect()
    }
}

impl SemiDiscreteModel for EulerModel {
    fn name(&self) -> &str {
        "euler"
    }

    fn n_space(&self) -> usize {
        3 * self.n_cells
    }

    fn param_domain(&self) -> &ParamDomain {
        &self.domain
    }

    fn mass(&self) -> &MassOperator {
        &self.mass
    }

    fn initial_state(&self, mu: &ParameterPoint) -> Result<DVector<f64>, ModelError> {
        euler_initial_state(mu, self.n_cells)
    }

    fn velocity(&self, u: &DVector<f64>, _t: f64, mu: &ParameterPoint) -> Result<DVector<f64>, ModelError> {
        let bc = self.boundary(mu)?;
        let fluxes = (0..=self.n_cells).map(|f| self.face_flux(u, f, &bc)).collect::<Result<Vec<_>, _>>()?;
        let mut out = DVector::zeros(self.n_space());
        for i in 0..self.n_cells {
            let v = self.cell_velocity(u, i, &fluxes[i], &fluxes[i + 1]);
            out.fixed_rows_mut::<3>(3 * i).copy_from_slice(&v);
        }
        Ok(out)
    }

    fn jacobian(&self, u: &DVector<f64>, _t: f64, mu: &ParameterPoint) -> Result<BandMatrix, ModelError> {
        let bc = self.boundary(mu)?;
        let faces = (0..=self.n_cells).map(|f| self.face_eval(u, f, &bc)).collect::<Result<Vec<_>, _>>()?;
        let mut jac = BandMatrix::zeros(self.n_space(), 5, 5);
        for i in 0..self.n_cells {
            let block = self.cell_jacobian(u, i, &faces[i], &faces[i + 1]);
            for (k, row) in block.iter().enumerate() {
                for (j, v) in self.block_row(i, row) {
                    jac.set(3 * i + k, j, v);
                }
            }
        }
        Ok(jac)
    }

    fn stencil(&self, row: usize) -> Vec<usize> {
        let i = row / 3;
        let lo = i.saturating_sub(1);
        let hi = (i + 2).min(self.n_cells);
        (3 * lo..3 * hi).collect()
    }

    fn velocity_rows(&self, u: &DVector<f64>, rows: &[usize], _t: f64, mu: &ParameterPoint) -> Result<DVector<f64>, ModelError> {
        let bc = self.boundary(mu)?;
        let mut cached: Option<(usize, [f64; 3])> = None;
        let mut out = DVector::zeros(rows.len());
        for (r, &row) in rows.iter().enumerate() {
            let i = row / 3;
            let values = match cached {
                Some((c, v)) if c == i => v,
                _ => {
                    let v = self.cell_velocity(u, i, &self.face_flux(u, i, &bc)?, &self.face_flux(u, i + 1, &bc)?);
                    cached = Some((i, v));
                    v
                }
            };
            out[r] = values[row % 3];
        }
        Ok(out)
    }

    fn jacobian_rows(&self, u: &DVector<f64>, rows: &[usize], _t: f64, mu: &ParameterPoint) -> Result<SparseRows, ModelError> {
        let bc = self.boundary(mu)?;
        let mut cached: Option<(usize, [[f64; 9]; 3])> = None;
        let mut out = Vec::with_capacity(rows.len());
        for &row in rows {
            let i = row / 3;
            let block = match cached {
                Some((c, b)) if c == i => b,
                _ => {
                    let b = self.cell_jacobian(u, i, &self.face_eval(u, i, &bc)?, &self.face_eval(u, i + 1, &bc)?);
                    cached = Some((i, b));
                    b
                }
            };
            out.push(self.block_row(i, &block[row % 3]));
        }
        Ok(out)
    }
}
