//! Backward Euler with Picard-lagged coefficients.
//!
//! Every Picard sweep assembles one coupled linear system in the interleaved
//! unknowns `(a_0, u_0, b_0, a_1, u_1, b_1, ...)`, where `(a, b)` is
//! `(rho, h)` or `(rho1, rho2)` on cells and `u` lives on nodes. The bilinear
//! mass flux `rho u` is linearized about the previous iterate, so at
//! convergence the discrete nonlinear system holds with all coefficients
//! evaluated at the new time level.

use serde::{Deserialize, Serialize};

use super::state::{EntropicState, Formulation, InitialCondition, PrimitiveState};
use crate::discretization::{Boundary, DiscreteOperator, Grid1D};
use crate::error::{MixturaError, Result};
use crate::model::{phi, point_coefficients, EntropicPoint, MixtureParams, PointCoefficients};

pub const DEFAULT_PICARD_TOL: f64 = 1e-10;
pub const DEFAULT_PICARD_MAX: usize = 50;
pub const DEFAULT_CFL: f64 = 0.5;
/// Velocity floor in the CFL denominator.
pub const U_FLOOR: f64 = 1e-8;

/// Everything needed to run a simulation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub params: MixtureParams,
    pub grid: Grid1D,
    pub rho1_star: f64,
    pub rho2_star: f64,
    pub dt: f64,
    pub t_end: f64,
    pub formulation: Formulation,
    pub picard_tol: f64,
    pub picard_max: usize,
    pub cfl_limit: f64,
    pub initial: InitialCondition,
    pub output_every: usize,
}

impl SimConfig {
    /// Reference densities `(1, 1)`, default solver settings and a mode-1 perturbation.
    pub fn new(params: MixtureParams, grid: Grid1D, dt: f64, t_end: f64, formulation: Formulation) -> Self {
        Self {
            params,
            grid,
            rho1_star: 1.0,
            rho2_star: 1.0,
            dt,
            t_end,
            formulation,
            picard_tol: DEFAULT_PICARD_TOL,
            picard_max: DEFAULT_PICARD_MAX,
            cfl_limit: DEFAULT_CFL,
            initial: InitialCondition::default(),
            output_every: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("dt", self.dt),
            ("picard_tol", self.picard_tol),
            ("cfl_limit", self.cfl_limit),
            ("rho1_star", self.rho1_star),
            ("rho2_star", self.rho2_star),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(MixturaError::InvalidParameter(format!(
                    "{name} must be finite and positive, got {v}"
                )));
            }
        }
        if !(self.t_end.is_finite() && self.t_end >= 0.0) {
            return Err(MixturaError::InvalidParameter(format!(
                "t_end must be non-negative, got {}",
                self.t_end
            )));
        }
        if self.picard_max == 0 || self.output_every == 0 {
            return Err(MixturaError::InvalidParameter(
                "picard_max and output_every must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// Source terms added to the right-hand sides of the primitive system.
pub trait Forcing {
    /// Sources of the two species balances at `(x, t)`.
    fn species(&self, x: f64, t: f64) -> (f64, f64);
    /// Source of the momentum balance at `(x, t)`.
    fn momentum(&self, x: f64, t: f64) -> f64;
}

/// Result of one (possibly sub-stepped) time step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome<S> {
    pub state: S,
    /// Picard sweeps summed over sub-steps.
    pub picard_iters: usize,
    pub substeps: usize,
}

/// Placement of the unknowns in the interleaved vector.
#[derive(Debug, Clone, Copy)]
struct Layout {
    n: usize,
    periodic: bool,
}

impl Layout {
    fn new(grid: &Grid1D) -> Self {
        Self {
            n: grid.n(),
            periodic: grid.bc() == Boundary::Periodic,
        }
    }

    fn dim(&self) -> usize {
        if self.periodic {
            3 * self.n
        } else {
            3 * self.n + 1
        }
    }

    fn n_nodes(&self) -> usize {
        if self.periodic {
            self.n
        } else {
            self.n + 1
        }
    }

    fn a(&self, i: usize) -> usize {
        3 * i
    }

    fn b(&self, i: usize) -> usize {
        3 * i + 2
    }

    fn u(&self, j: usize) -> usize {
        if j == self.n {
            3 * self.n
        } else {
            3 * j + 1
        }
    }

    fn interior_nodes(&self) -> std::ops::Range<usize> {
        if self.periodic {
            0..self.n
        } else {
            1..self.n
        }
    }

    /// Cells on either side of an interior node.
    fn cells_of(&self, j: usize) -> (usize, usize) {
        ((j + self.n - 1) % self.n, j % self.n)
    }

    /// Nodes bounding a cell.
    fn nodes_of(&self, i: usize) -> (usize, usize) {
        (i, if self.periodic { (i + 1) % self.n } else { i + 1 })
    }

    /// Neighbouring cells; wall grids mirror the boundary cell.
    fn cell_neighbours(&self, i: usize) -> (usize, usize) {
        if self.periodic {
            ((i + self.n - 1) % self.n, (i + 1) % self.n)
        } else {
            (i.saturating_sub(1), (i + 1).min(self.n - 1))
        }
    }

    /// Neighbouring nodes of an interior node.
    fn node_neighbours(&self, j: usize) -> (usize, usize) {
        if self.periodic {
            ((j + self.n - 1) % self.n, (j + 1) % self.n)
        } else {
            (j - 1, j + 1)
        }
    }

    fn pack(&self, a: &[f64], b: &[f64], u: &[f64]) -> Vec<f64> {
        let mut x = vec![0.0; self.dim()];
        for i in 0..self.n {
            x[self.a(i)] = a[i];
            x[self.b(i)] = b[i];
        }
        for (j, &v) in u.iter().enumerate() {
            x[self.u(j)] = v;
        }
        x
    }

    fn unpack(&self, x: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        (
            (0..self.n).map(|i| x[self.a(i)]).collect(),
            (0..self.n).map(|i| x[self.b(i)]).collect(),
            (0..self.n_nodes()).map(|j| x[self.u(j)]).collect(),
        )
    }
}

/// Adds a face flux `F = sum c_k x_k + f0` with `+F/dx` to the row of the
/// cell on its left and `-F/dx` to the row of the cell on its right.
fn add_face_flux(
    op: &mut DiscreteOperator,
    rhs: &mut [f64],
    (row_l, row_r): (usize, usize),
    terms: &[(usize, f64)],
    f0: f64,
    dx: f64,
) {
    for &(col, c) in terms {
        op.add(row_l, col, c / dx);
        op.add(row_r, col, -c / dx);
    }
    rhs[row_l] -= f0 / dx;
    rhs[row_r] += f0 / dx;
}

/// Linearized advective flux `q u` about the iterate `(qf, uk)`.
fn mass_flux_terms(lay: &Layout, cols: (usize, usize), j: usize, qf: f64, uk: f64) -> ([(usize, f64); 3], f64) {
    (
        [(lay.u(j), qf), (cols.0, 0.5 * uk), (cols.1, 0.5 * uk)],
        -qf * uk,
    )
}

enum Pressure<'a> {
    /// `w G rho + c2 G h` with node coefficients.
    Entropic { w: &'a [f64], c2: &'a [f64] },
    /// `G (rho1 / m1 + rho2 / m2)`.
    Primitive { m1: f64, m2: f64 },
}

/// Momentum rows on interior nodes and pinned rows on wall nodes.
#[allow(clippy::too_many_arguments)]
fn add_momentum(
    op: &mut DiscreteOperator,
    rhs: &mut [f64],
    lay: &Layout,
    grid: &Grid1D,
    rho_node: &[f64],
    uk: &[f64],
    old: &[f64],
    pressure: Pressure<'_>,
    visc: f64,
    dt: f64,
    source: impl Fn(f64) -> f64,
) {
    let dx = grid.dx();
    let d2 = dx * dx;
    for j in lay.interior_nodes() {
        let row = lay.u(j);
        let (l, r) = lay.cells_of(j);
        let (jl, jr) = lay.node_neighbours(j);
        let rn = rho_node[j];
        op.add(row, row, rn / dt + 2.0 * visc / d2);
        rhs[row] += rn * old[row] / dt + source(grid.node(j));
        let adv = rn * uk[j] / (2.0 * dx);
        op.add(row, lay.u(jr), adv - visc / d2);
        op.add(row, lay.u(jl), -adv - visc / d2);
        match pressure {
            Pressure::Entropic { w, c2 } => {
                op.add(row, lay.a(r), w[j] / dx);
                op.add(row, lay.a(l), -w[j] / dx);
                op.add(row, lay.b(r), c2[j] / dx);
                op.add(row, lay.b(l), -c2[j] / dx);
            }
            Pressure::Primitive { m1, m2 } => {
                op.add(row, lay.a(r), 1.0 / (m1 * dx));
                op.add(row, lay.a(l), -1.0 / (m1 * dx));
                op.add(row, lay.b(r), 1.0 / (m2 * dx));
                op.add(row, lay.b(l), -1.0 / (m2 * dx));
            }
        }
    }
    if !lay.periodic {
        for j in [0, lay.n] {
            op.add(lay.u(j), lay.u(j), 1.0);
        }
    }
}

/// Arithmetic mean of the cells adjacent to every node (zero at wall nodes,
/// which carry no unknown flux).
fn node_mean(lay: &Layout, cell: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; lay.n_nodes()];
    for j in lay.interior_nodes() {
        let (l, r) = lay.cells_of(j);
        out[j] = 0.5 * (cell[l] + cell[r]);
    }
    out
}

fn entropic_coefficients(rho: &[f64], h: &[f64], params: &MixtureParams) -> Result<Vec<PointCoefficients>> {
    rho.iter()
        .zip(h)
        .map(|(&rho, &h)| point_coefficients(phi(EntropicPoint { h, rho }, params)?, params))
        .collect()
}

fn assemble_entropic(
    lay: &Layout,
    grid: &Grid1D,
    params: &MixtureParams,
    old: &[f64],
    lag: &[f64],
    dt: f64,
) -> Result<(DiscreteOperator, Vec<f64>)> {
    let dx = grid.dx();
    let (rho_k, _, u_k) = lay.unpack(lag);
    let h_k: Vec<f64> = (0..lay.n).map(|i| lag[lay.b(i)]).collect();
    let coef = entropic_coefficients(&rho_k, &h_k, params)?;
    let pick = |f: fn(&PointCoefficients) -> f64| -> Vec<f64> { coef.iter().map(f).collect() };
    let (w, c2, c3, g4) = (
        pick(|c| c.pressure_weight),
        pick(|c| c.coupling),
        pick(|c| c.capacity),
        pick(|c| c.diffusivity),
    );
    let rho_node = node_mean(lay, &rho_k);
    let (w_node, c2_node) = (node_mean(lay, &w), node_mean(lay, &c2));

    let mut op = DiscreteOperator::square(lay.dim());
    let mut rhs = vec![0.0; lay.dim()];
    for i in 0..lay.n {
        let (ra, rb) = (lay.a(i), lay.b(i));
        op.add(ra, ra, 1.0 / dt);
        rhs[ra] += old[ra] / dt;
        op.add(rb, rb, c3[i] / dt);
        rhs[rb] += c3[i] * old[rb] / dt;
        let (jl, jr) = lay.nodes_of(i);
        let adv = c3[i] * 0.5 * (u_k[jl] + u_k[jr]) / (2.0 * dx);
        let (il, ir) = lay.cell_neighbours(i);
        op.add(rb, lay.b(ir), adv);
        op.add(rb, lay.b(il), -adv);
        op.add(rb, lay.u(jr), c2[i] / dx);
        op.add(rb, lay.u(jl), -c2[i] / dx);
    }
    for j in lay.interior_nodes() {
        let (l, r) = lay.cells_of(j);
        let (terms, f0) = mass_flux_terms(lay, (lay.a(l), lay.a(r)), j, rho_node[j], u_k[j]);
        add_face_flux(&mut op, &mut rhs, (lay.a(l), lay.a(r)), &terms, f0, dx);
        let g = 0.5 * (g4[l] + g4[r]);
        add_face_flux(
            &mut op,
            &mut rhs,
            (lay.b(l), lay.b(r)),
            &[(lay.b(r), -g / dx), (lay.b(l), g / dx)],
            0.0,
            dx,
        );
    }
    add_momentum(
        &mut op,
        &mut rhs,
        lay,
        grid,
        &rho_node,
        &u_k,
        old,
        Pressure::Entropic { w: &w_node, c2: &c2_node },
        params.viscosity(),
        dt,
        |_| 0.0,
    );
    Ok((op, rhs))
}

/// Face coefficients `(A, B)` of the diffusion flux
/// `F1 = -(A d rho1 - B d rho2)` with `A = rho2/(p rho m1)`, `B = rho1/(p rho m2)`.
fn diffusion_face(r1: f64, r2: f64, params: &MixtureParams) -> (f64, f64) {
    let p = r1 / params.m1() + r2 / params.m2();
    let q = p * (r1 + r2);
    (r2 / (q * params.m1()), r1 / (q * params.m2()))
}

#[allow(clippy::too_many_arguments)]
fn assemble_primitive(
    lay: &Layout,
    grid: &Grid1D,
    params: &MixtureParams,
    old: &[f64],
    lag: &[f64],
    dt: f64,
    forcing: Option<&dyn Forcing>,
    t_new: f64,
) -> (DiscreteOperator, Vec<f64>) {
    let dx = grid.dx();
    let (r1_k, r2_k, u_k) = lay.unpack(lag);
    let r1_node = node_mean(lay, &r1_k);
    let r2_node = node_mean(lay, &r2_k);
    let rho_node: Vec<f64> = r1_node.iter().zip(&r2_node).map(|(a, b)| a + b).collect();

    let mut op = DiscreteOperator::square(lay.dim());
    let mut rhs = vec![0.0; lay.dim()];
    for i in 0..lay.n {
        let (ra, rb) = (lay.a(i), lay.b(i));
        op.add(ra, ra, 1.0 / dt);
        op.add(rb, rb, 1.0 / dt);
        rhs[ra] += old[ra] / dt;
        rhs[rb] += old[rb] / dt;
        if let Some(f) = forcing {
            let (s1, s2) = f.species(grid.cell(i), t_new);
            rhs[ra] += s1;
            rhs[rb] += s2;
        }
    }
    for j in lay.interior_nodes() {
        let (l, r) = lay.cells_of(j);
        let rows1 = (lay.a(l), lay.a(r));
        let rows2 = (lay.b(l), lay.b(r));
        let (t1, f1) = mass_flux_terms(lay, rows1, j, r1_node[j], u_k[j]);
        add_face_flux(&mut op, &mut rhs, rows1, &t1, f1, dx);
        let (t2, f2) = mass_flux_terms(lay, rows2, j, r2_node[j], u_k[j]);
        add_face_flux(&mut op, &mut rhs, rows2, &t2, f2, dx);
        let (a, b) = diffusion_face(r1_node[j], r2_node[j], params);
        let j1 = [
            (lay.a(r), -a / dx),
            (lay.a(l), a / dx),
            (lay.b(r), b / dx),
            (lay.b(l), -b / dx),
        ];
        let j2 = j1.map(|(c, v)| (c, -v));
        add_face_flux(&mut op, &mut rhs, rows1, &j1, 0.0, dx);
        add_face_flux(&mut op, &mut rhs, rows2, &j2, 0.0, dx);
    }
    add_momentum(
        &mut op,
        &mut rhs,
        lay,
        grid,
        &rho_node,
        &u_k,
        old,
        Pressure::Primitive {
            m1: params.m1(),
            m2: params.m2(),
        },
        params.viscosity(),
        dt,
        |x| forcing.map_or(0.0, |f| f.momentum(x, t_new)),
    );
    (op, rhs)
}

fn linf(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn check_positive(lay: &Layout, grid: &Grid1D, x: &[f64], fields: &[(&'static str, bool)], time: f64) -> Result<()> {
    for i in 0..lay.n {
        for &(name, second) in fields {
            let v = x[if second { lay.b(i) } else { lay.a(i) }];
            if !(v > 0.0 && v.is_finite()) {
                return Err(MixturaError::Positivity {
                    time,
                    x: grid.cell(i),
                    field: name,
                    value: v,
                });
            }
        }
    }
    Ok(())
}

/// Fixed-point loop: re-assemble with the latest iterate until the update is
/// below `tol * max(|x|_inf, 1)`.
fn picard(
    old: &[f64],
    config: &SimConfig,
    time: f64,
    mut sweep: impl FnMut(&[f64]) -> Result<Vec<f64>>,
) -> Result<(Vec<f64>, usize)> {
    let mut x = old.to_vec();
    let mut change = f64::INFINITY;
    for it in 1..=config.picard_max {
        let next = sweep(&x)?;
        change = next
            .iter()
            .zip(&x)
            .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
        let scale = linf(&next).max(1.0);
        x = next;
        if change <= config.picard_tol * scale {
            return Ok((x, it));
        }
    }
    Err(MixturaError::Picard {
        time,
        iterations: config.picard_max,
        change,
    })
}

/// Conservative update `q = q_old - dt D(F)` from face fluxes on interior nodes.
fn conservative_update(lay: &Layout, q_old: &[f64], flux: &[f64], dt: f64, dx: f64) -> Vec<f64> {
    (0..lay.n)
        .map(|i| {
            let (jl, jr) = lay.nodes_of(i);
            q_old[i] - dt * (flux[jr] - flux[jl]) / dx
        })
        .collect()
}

fn be_entropic(state: &EntropicState, t: f64, dt: f64, config: &SimConfig) -> Result<(EntropicState, usize)> {
    let grid = &config.grid;
    let lay = Layout::new(grid);
    let old = lay.pack(&state.rho, &state.h, &state.u);
    let t_new = t + dt;
    let (x, iters) = picard(&old, config, t_new, |lag| {
        let (op, rhs) = assemble_entropic(&lay, grid, &config.params, &old, lag, dt)?;
        let x = op.factor()?.solve(&rhs)?;
        check_positive(&lay, grid, &x, &[("rho", false)], t_new)?;
        Ok(x)
    })?;
    let (rho, h, u) = lay.unpack(&x);
    let rho_node = node_mean(&lay, &rho);
    let flux: Vec<f64> = rho_node.iter().zip(&u).map(|(r, v)| r * v).collect();
    let rho = conservative_update(&lay, &state.rho, &flux, dt, grid.dx());
    let x = lay.pack(&rho, &h, &u);
    check_positive(&lay, grid, &x, &[("rho", false)], t_new)?;
    Ok((EntropicState { rho, h, u }, iters))
}

fn be_primitive(
    state: &PrimitiveState,
    t: f64,
    dt: f64,
    config: &SimConfig,
    forcing: Option<&dyn Forcing>,
) -> Result<(PrimitiveState, usize)> {
    let grid = &config.grid;
    let params = &config.params;
    let lay = Layout::new(grid);
    let old = lay.pack(&state.rho1, &state.rho2, &state.u);
    let t_new = t + dt;
    let species = [("rho1", false), ("rho2", true)];
    let (x, iters) = picard(&old, config, t_new, |lag| {
        let (op, rhs) = assemble_primitive(&lay, grid, params, &old, lag, dt, forcing, t_new);
        let x = op.factor()?.solve(&rhs)?;
        check_positive(&lay, grid, &x, &species, t_new)?;
        Ok(x)
    })?;
    let (r1, r2, u) = lay.unpack(&x);
    let dx = grid.dx();
    let (f1, f2) = species_face_fluxes(
        &PrimitiveState {
            rho1: r1,
            rho2: r2,
            u: u.clone(),
        },
        grid,
        params,
    );
    let mut rho1 = conservative_update(&lay, &state.rho1, &f1, dt, dx);
    let mut rho2 = conservative_update(&lay, &state.rho2, &f2, dt, dx);
    if let Some(f) = forcing {
        for i in 0..lay.n {
            let (s1, s2) = f.species(grid.cell(i), t_new);
            rho1[i] += dt * s1;
            rho2[i] += dt * s2;
        }
    }
    let x = lay.pack(&rho1, &rho2, &u);
    check_positive(&lay, grid, &x, &species, t_new)?;
    Ok((PrimitiveState { rho1, rho2, u }, iters))
}

/// Largest stable step for the advective CFL condition at velocity `u`.
pub fn cfl_step(u: &[f64], grid: &Grid1D, cfl_limit: f64) -> f64 {
    cfl_limit * grid.dx() / linf(u).max(U_FLOOR)
}

/// Advances `[t, t + dt]` in sub-steps that each respect the CFL limit.
fn substepped<S>(
    state: &S,
    t: f64,
    dt: f64,
    config: &SimConfig,
    velocity: impl Fn(&S) -> &[f64],
    mut step: impl FnMut(&S, f64, f64) -> Result<(S, usize)>,
) -> Result<StepOutcome<S>>
where
    S: Clone,
{
    let mut current = state.clone();
    let mut done = 0.0;
    let mut iters = 0;
    let mut substeps = 0;
    while done < dt {
        let remaining = dt - done;
        let limit = cfl_step(velocity(&current), &config.grid, config.cfl_limit);
        let h = if remaining <= limit * (1.0 + 1e-12) {
            remaining
        } else {
            limit.min(remaining)
        };
        let (next, it) = step(&current, t + done, h)?;
        current = next;
        iters += it;
        substeps += 1;
        done = if h == remaining { dt } else { done + h };
    }
    Ok(StepOutcome {
        state: current,
        picard_iters: iters,
        substeps,
    })
}

/// One Backward Euler step of the entropic system from time `t`.
pub fn step_entropic(state: &EntropicState, t: f64, dt: f64, config: &SimConfig) -> Result<StepOutcome<EntropicState>> {
    state.check(&config.grid)?;
    substepped(state, t, dt, config, |s| &s.u, |s, t, h| be_entropic(s, t, h, config))
}

/// One Backward Euler step of the primitive system from time `t`.
pub fn step_primitive(
    state: &PrimitiveState,
    t: f64,
    dt: f64,
    config: &SimConfig,
) -> Result<StepOutcome<PrimitiveState>> {
    step_primitive_forced(state, t, dt, config, None)
}

/// As [`step_primitive`], with optional source terms evaluated at the new time level.
pub fn step_primitive_forced(
    state: &PrimitiveState,
    t: f64,
    dt: f64,
    config: &SimConfig,
    forcing: Option<&dyn Forcing>,
) -> Result<StepOutcome<PrimitiveState>> {
    state.check(&config.grid)?;
    substepped(state, t, dt, config, |s| &s.u, |s, t, h| {
        be_primitive(s, t, h, config, forcing)
    })
}

/// Face fluxes `(F1, F2)` of the two species at the interior nodes of a
/// primitive state, walls carrying zero flux.
pub fn species_face_fluxes(state: &PrimitiveState, grid: &Grid1D, params: &MixtureParams) -> (Vec<f64>, Vec<f64>) {
    let lay = Layout::new(grid);
    let dx = grid.dx();
    let (r1, r2, u) = (&state.rho1, &state.rho2, &state.u);
    let mut f1 = vec![0.0; lay.n_nodes()];
    let mut f2 = vec![0.0; lay.n_nodes()];
    for j in lay.interior_nodes() {
        let (l, r) = lay.cells_of(j);
        let (q1, q2) = (0.5 * (r1[l] + r1[r]), 0.5 * (r2[l] + r2[r]));
        let (a, b) = diffusion_face(q1, q2, params);
        let diff = -(a * (r1[r] - r1[l]) - b * (r2[r] - r2[l])) / dx;
        f1[j] = q1 * u[j] + diff;
        f2[j] = q2 * u[j] - diff;
    }
    (f1, f2)
}
