//! Linearized operators about a rest state, their spectra and the discrete
//! energy identity.
//!
//! Unknowns are stacked as `(zeta on cells, v on free nodes, theta on cells)`.
//! On a wall grid the two boundary nodes carry `v = 0` and are dropped; on a
//! periodic grid every node is free.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::discretization::{Boundary, Grid1D};
use crate::dynamics::{fit_decay_tail, DecayFit};
use crate::error::{MixturaError, Result};
use crate::model::{EquilibriumCoefficients, SpatialCoefficients};

/// Eigenvalues with modulus below this count as conserved modes.
pub const ZERO_MODE_TOL: f64 = 1e-10;

/// Where the coefficients of an operator came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Provenance {
    Constant(EquilibriumCoefficients),
    Variable(SpatialCoefficients),
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearizedOperator {
    pub matrix: DMatrix<f64>,
    pub grid: Grid1D,
    pub viscosity: f64,
    pub provenance: Provenance,
}

impl LinearizedOperator {
    pub fn n_cells(&self) -> usize {
        self.grid.n_cells()
    }

    /// Number of velocity unknowns after eliminating pinned wall nodes.
    pub fn n_velocity(&self) -> usize {
        free_nodes(&self.grid)
    }

    pub fn dim(&self) -> usize {
        2 * self.n_cells() + self.n_velocity()
    }

    pub fn zeta_range(&self) -> std::ops::Range<usize> {
        0..self.n_cells()
    }

    pub fn v_range(&self) -> std::ops::Range<usize> {
        self.n_cells()..self.n_cells() + self.n_velocity()
    }

    pub fn theta_range(&self) -> std::ops::Range<usize> {
        self.n_cells() + self.n_velocity()..self.dim()
    }

    /// The `theta`-`theta` block.
    pub fn theta_block(&self) -> DMatrix<f64> {
        let r = self.theta_range();
        self.matrix.view((r.start, r.start), (r.len(), r.len())).into_owned()
    }

    pub fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.matrix * x
    }

    /// Unit-amplitude conserved modes: constant `zeta`, constant `theta` and,
    /// on periodic grids, constant `v`.
    pub fn kernel_vectors(&self) -> Vec<DVector<f64>> {
        let mut out = Vec::new();
        for r in [self.zeta_range(), self.theta_range()] {
            let mut k = DVector::zeros(self.dim());
            k.rows_mut(r.start, r.len()).fill(1.0);
            out.push(k);
        }
        if self.grid.is_periodic() {
            let r = self.v_range();
            let mut k = DVector::zeros(self.dim());
            k.rows_mut(r.start, r.len()).fill(1.0);
            out.push(k);
        }
        out
    }

    fn constant(&self) -> Result<EquilibriumCoefficients> {
        match &self.provenance {
            Provenance::Constant(c) => Ok(*c),
            Provenance::Variable(_) => Err(MixturaError::InvalidParameter(
                "the energy identity needs a constant-coefficient operator".into(),
            )),
        }
    }
}

fn free_nodes(grid: &Grid1D) -> usize {
    match grid.bc() {
        Boundary::Wall => grid.n() - 1,
        Boundary::Periodic => grid.n(),
    }
}

/// Velocity index of node `j`, `None` for a pinned wall node.
fn v_index(grid: &Grid1D, j: usize) -> Option<usize> {
    match grid.bc() {
        Boundary::Wall => (j > 0 && j < grid.n()).then(|| j - 1),
        Boundary::Periodic => Some(j % grid.n()),
    }
}

/// Cells to the left and right of node `j`; `None` outside a wall grid.
fn node_cells(grid: &Grid1D, j: usize) -> (Option<usize>, Option<usize>) {
    let n = grid.n();
    match grid.bc() {
        Boundary::Wall => ((j > 0).then(|| j - 1), (j < n).then_some(j)),
        Boundary::Periodic => (Some((j + n - 1) % n), Some(j % n)),
    }
}

/// Uniform coefficients routed through [`assemble_variable`], so the two agree
/// exactly. The `a1` slot of the uniform fields is `rho* / sigma(rho*)`, the
/// value `gamma1` takes at a constant state.
pub fn assemble_constant(coeffs: &EquilibriumCoefficients, grid: &Grid1D, viscosity: f64) -> Result<LinearizedOperator> {
    let spatial = SpatialCoefficients::uniform(coeffs, grid.n_cells());
    let mut op = assemble_variable(&spatial, grid, viscosity)?;
    op.provenance = Provenance::Constant(*coeffs);
    Ok(op)
}

/// `zeta_t = -D(rho0 v)`,
/// `rho0 v_t = visc L v - gamma1 G zeta - gamma2 G theta`,
/// `gamma3 theta_t = -gamma2 D v + D(gamma4 G theta)` with zero flux at walls.
/// Node values of cell coefficients are two-point means.
pub fn assemble_variable(coeffs: &SpatialCoefficients, grid: &Grid1D, viscosity: f64) -> Result<LinearizedOperator> {
    coeffs.validate()?;
    if coeffs.len() != grid.n_cells() {
        return Err(MixturaError::InvalidParameter(format!(
            "{} coefficient values for {} cells",
            coeffs.len(),
            grid.n_cells()
        )));
    }
    if !(viscosity > 0.0) || !viscosity.is_finite() {
        return Err(MixturaError::InvalidParameter(format!("viscosity {viscosity} must be positive")));
    }
    let nc = grid.n_cells();
    let nv = free_nodes(grid);
    let dim = 2 * nc + nv;
    let (zo, vo, to) = (0, nc, nc + nv);
    let dx = grid.dx();
    let mut a = DMatrix::zeros(dim, dim);
    let node_mean = |f: &[f64], j: usize| match node_cells(grid, j) {
        (Some(l), Some(r)) => 0.5 * (f[l] + f[r]),
        (Some(c), None) | (None, Some(c)) => f[c],
        (None, None) => unreachable!(),
    };

    // Continuity and the theta equation, row by cell.
    for i in 0..nc {
        let (jl, jr) = (i, i + 1);
        let g3 = coeffs.gamma3[i];
        for (j, s) in [(jl, -1.0), (jr, 1.0)] {
            if let Some(k) = v_index(grid, j) {
                a[(zo + i, vo + k)] += -s * node_mean(&coeffs.rho0, j) / dx;
                a[(to + i, vo + k)] += -s * coeffs.gamma2[i] / (g3 * dx);
            }
        }
        for j in [jl, jr] {
            if let (Some(l), Some(r)) = node_cells(grid, j) {
                let g4 = node_mean(&coeffs.gamma4, j);
                let other = if l == i { r } else { l };
                if other == i {
                    continue;
                }
                let w = g4 / (g3 * dx * dx);
                a[(to + i, to + other)] += w;
                a[(to + i, to + i)] -= w;
            }
        }
    }

    // Momentum, row by free node.
    for j in 0..grid.n_nodes() {
        let Some(k) = v_index(grid, j) else { continue };
        if grid.is_periodic() && j == grid.n() {
            continue;
        }
        let (Some(l), Some(r)) = node_cells(grid, j) else { continue };
        let rho = node_mean(&coeffs.rho0, j);
        let g1 = node_mean(&coeffs.gamma1, j);
        let g2 = node_mean(&coeffs.gamma2, j);
        let w = viscosity / (rho * dx * dx);
        a[(vo + k, vo + k)] -= 2.0 * w;
        for nb in [j.wrapping_sub(1), j + 1] {
            let nb = if grid.is_periodic() { (nb.wrapping_add(grid.n())) % grid.n() } else { nb };
            if let Some(m) = v_index(grid, nb) {
                a[(vo + k, vo + m)] += w;
            }
        }
        a[(vo + k, zo + r)] -= g1 / (rho * dx);
        a[(vo + k, zo + l)] += g1 / (rho * dx);
        a[(vo + k, to + r)] -= g2 / (rho * dx);
        a[(vo + k, to + l)] += g2 / (rho * dx);
    }

    Ok(LinearizedOperator {
        matrix: a,
        grid: *grid,
        viscosity,
        provenance: Provenance::Variable(coeffs.clone()),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumReport {
    /// `[re, im]` pairs sorted by decreasing real part.
    pub eigenvalues: Vec<[f64; 2]>,
    pub spectral_abscissa_mean_zero: f64,
    pub zero_mode_count: usize,
    pub decay_rate: f64,
    /// Largest `|A k|_inf / |A|_inf` over the explicitly built kernel vectors.
    pub kernel_residual: f64,
    /// Zero modes expected from the conserved quantities of the boundary setup.
    pub expected_zero_modes: usize,
}

pub fn spectrum(op: &LinearizedOperator) -> Result<SpectrumReport> {
    let dim = op.dim();
    let schur = nalgebra::linalg::Schur::try_new(op.matrix.clone(), 1e-14, 100 * dim.max(10))
        .ok_or_else(|| MixturaError::Eigen(format!("Schur iteration did not converge for a {dim}x{dim} operator")))?;
    let ev = schur.complex_eigenvalues();
    let mut eigenvalues: Vec<[f64; 2]> = ev.iter().map(|z| [z.re, z.im]).collect();
    if eigenvalues.iter().any(|z| !z[0].is_finite() || !z[1].is_finite()) {
        return Err(MixturaError::Eigen("non-finite eigenvalue".into()));
    }
    eigenvalues.sort_by(|a, b| b[0].total_cmp(&a[0]).then(b[1].total_cmp(&a[1])));
    let zero = |z: &[f64; 2]| z[0].hypot(z[1]) < ZERO_MODE_TOL;
    let zero_mode_count = eigenvalues.iter().filter(|z| zero(z)).count();
    let abscissa = eigenvalues
        .iter()
        .filter(|z| !zero(z))
        .map(|z| z[0])
        .fold(f64::NEG_INFINITY, f64::max);
    let norm = op.matrix.abs().column_sum().max().max(f64::MIN_POSITIVE);
    let kernel = op.kernel_vectors();
    let kernel_residual = kernel
        .iter()
        .map(|k| op.apply(k).amax() / norm)
        .fold(0.0, f64::max);
    Ok(SpectrumReport {
        eigenvalues,
        spectral_abscissa_mean_zero: abscissa,
        zero_mode_count,
        decay_rate: -abscissa,
        kernel_residual,
        expected_zero_modes: kernel.len(),
    })
}

/// Terms of `dE/dt` for one state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyRate {
    pub energy: f64,
    /// `x^T W A x`.
    pub de_dt: f64,
    /// `visc |Dv|^2 + a4 |G theta|^2`.
    pub dissipation: f64,
    /// Sum of the magnitudes of the four coupling products.
    pub cross_magnitude: f64,
    /// `de_dt + dissipation`; what is left after the coupling terms cancel.
    pub residual: f64,
}

impl EnergyRate {
    pub fn relative_residual(&self) -> f64 {
        let scale = self.cross_magnitude + self.dissipation + self.de_dt.abs();
        if scale == 0.0 {
            0.0
        } else {
            self.residual.abs() / scale
        }
    }
}

fn energy_weights(op: &LinearizedOperator, c: &EquilibriumCoefficients) -> DVector<f64> {
    let dx = op.grid.dx();
    let mut w = DVector::zeros(op.dim());
    w.rows_mut(op.zeta_range().start, op.n_cells()).fill(c.a1 / c.a0 * dx);
    w.rows_mut(op.v_range().start, op.n_velocity()).fill(c.a0 * dx);
    w.rows_mut(op.theta_range().start, op.n_cells()).fill(c.a3 * dx);
    w
}

/// `E = (a1/(2 a0))|zeta|^2 + (a0/2)|v|^2 + (a3/2)|theta|^2` with `dx` weights.
pub fn weighted_energy(op: &LinearizedOperator, x: &DVector<f64>) -> Result<f64> {
    let c = op.constant()?;
    let w = energy_weights(op, &c);
    Ok(0.5 * x.component_mul(x).dot(&w))
}

/// Evaluates the energy balance of the linear flow at `x`.
pub fn energy_rate(op: &LinearizedOperator, x: &DVector<f64>) -> Result<EnergyRate> {
    let c = op.constant()?;
    if x.len() != op.dim() {
        return Err(MixturaError::InvalidParameter(format!("state of length {} for dimension {}", x.len(), op.dim())));
    }
    let grid = &op.grid;
    let dx = grid.dx();
    let w = energy_weights(op, &c);
    let ax = op.apply(x);
    let de_dt = x.component_mul(&w).dot(&ax);
    let (zeta, v, theta) = (
        x.rows(op.zeta_range().start, op.n_cells()),
        x.rows(op.v_range().start, op.n_velocity()),
        x.rows(op.theta_range().start, op.n_cells()),
    );
    let vn = |j: usize| v_index(grid, j).map_or(0.0, |k| v[k]);
    // (f, D v) over cells.
    let mut zeta_dv = 0.0;
    let mut theta_dv = 0.0;
    let mut dv2 = 0.0;
    for i in 0..op.n_cells() {
        let dv = (vn(i + 1) - vn(i)) / dx;
        zeta_dv += zeta[i] * dv * dx;
        theta_dv += theta[i] * dv * dx;
        dv2 += dv * dv * dx;
    }
    // (v, G f) over free nodes.
    let mut v_gzeta = 0.0;
    let mut v_gtheta = 0.0;
    let mut gtheta2 = 0.0;
    for j in 0..grid.n_nodes() {
        if grid.is_periodic() && j == grid.n() {
            continue;
        }
        if let (Some(l), Some(r)) = node_cells(grid, j) {
            let gz = (zeta[r] - zeta[l]) / dx;
            let gt = (theta[r] - theta[l]) / dx;
            let vj = vn(j);
            v_gzeta += vj * gz * dx;
            v_gtheta += vj * gt * dx;
            gtheta2 += gt * gt * dx;
        }
    }
    let dissipation = op.viscosity * dv2 + c.a4 * gtheta2;
    let cross_magnitude = c.a1 * (zeta_dv.abs() + v_gzeta.abs()) + c.a2.abs() * (v_gtheta.abs() + theta_dv.abs());
    Ok(EnergyRate {
        energy: 0.5 * x.component_mul(x).dot(&w),
        de_dt,
        dissipation,
        cross_magnitude,
        residual: de_dt + dissipation,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyReport {
    pub trials: usize,
    pub max_de_dt: f64,
    pub max_relative_residual: f64,
    /// Every trial had `dE/dt <= 0` up to rounding.
    pub all_dissipative: bool,
    /// Every Backward Euler step of every trial kept `E` from growing.
    pub all_monotone: bool,
}

/// A random state with entries uniform in `[-1, 1]`.
pub fn random_state(op: &LinearizedOperator, rng: &mut impl Rng) -> DVector<f64> {
    DVector::from_fn(op.dim(), |_, _| rng.gen_range(-1.0..1.0))
}

/// Removes the components along the conserved modes (`dx`-weighted means).
pub fn project_mean_zero(op: &LinearizedOperator, x: &mut DVector<f64>) {
    let mut ranges = vec![op.zeta_range(), op.theta_range()];
    if op.grid.is_periodic() {
        ranges.push(op.v_range());
    }
    for r in ranges {
        let mean = x.rows(r.start, r.len()).mean();
        x.rows_mut(r.start, r.len()).add_scalar_mut(-mean);
    }
}

/// Checks the energy identity on `trials` seeded random states, then marches
/// each one `march_steps` Backward Euler steps of size `dt` and checks that
/// `E` never grows.
pub fn energy_dissipation_check(
    op: &LinearizedOperator,
    trials: usize,
    seed: u64,
    dt: f64,
    march_steps: usize,
) -> Result<EnergyReport> {
    op.constant()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let lu = be_factor(op, dt)?;
    let mut report = EnergyReport {
        trials,
        max_de_dt: f64::NEG_INFINITY,
        max_relative_residual: 0.0,
        all_dissipative: true,
        all_monotone: true,
    };
    for _ in 0..trials {
        let mut x = random_state(op, &mut rng);
        let r = energy_rate(op, &x)?;
        report.max_de_dt = report.max_de_dt.max(r.de_dt);
        report.max_relative_residual = report.max_relative_residual.max(r.relative_residual());
        let slack = 1e-12 * (r.cross_magnitude + r.dissipation);
        report.all_dissipative &= r.de_dt <= slack;
        let mut e = r.energy;
        for _ in 0..march_steps {
            x = lu
                .solve(&x)
                .ok_or_else(|| MixturaError::Singular("Backward Euler matrix".into()))?;
            let e_next = weighted_energy(op, &x)?;
            report.all_monotone &= e_next <= e * (1.0 + 1e-13);
            e = e_next;
        }
    }
    if trials == 0 {
        report.max_de_dt = 0.0;
    }
    Ok(report)
}

fn be_factor(op: &LinearizedOperator, dt: f64) -> Result<nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(MixturaError::InvalidParameter(format!("time step {dt} must be positive")));
    }
    let m = DMatrix::identity(op.dim(), op.dim()) - &op.matrix * dt;
    Ok(m.lu())
}

/// Decay of a Backward Euler march of the linear system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarchedDecay {
    pub times: Vec<f64>,
    /// `sqrt(E)` at each sample.
    pub norms: Vec<f64>,
    pub fit: DecayFit,
}

/// Marches a seeded mean-zero random state to `t_end` and fits the decay of
/// `sqrt(E)` over the trailing `window` of samples.
pub fn marched_decay(op: &LinearizedOperator, dt: f64, t_end: f64, seed: u64, window: f64) -> Result<MarchedDecay> {
    let lu = be_factor(op, dt)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = random_state(op, &mut rng);
    project_mean_zero(op, &mut x);
    let steps = (t_end / dt).round() as usize;
    let every = (steps / 400).max(1);
    let mut times = vec![0.0];
    let mut norms = vec![weighted_energy(op, &x)?.sqrt()];
    for k in 1..=steps {
        x = lu
            .solve(&x)
            .ok_or_else(|| MixturaError::Singular("Backward Euler matrix".into()))?;
        if k % every == 0 {
            times.push(k as f64 * dt);
            norms.push(weighted_energy(op, &x)?.sqrt());
        }
    }
    let fit = fit_decay_tail(&times, &norms, window)?;
    Ok(MarchedDecay { times, norms, fit })
}
