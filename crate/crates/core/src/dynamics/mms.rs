//! Manufactured solutions for the primitive system.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::scheme::{step_primitive_forced, Forcing, SimConfig};
use super::state::PrimitiveState;
use crate::discretization::{l2_norm, Location};
use crate::error::{MixturaError, Result};
use crate::model::MixtureParams;

/// Value and partial derivatives of a scalar field at one point.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Jet {
    pub v: f64,
    pub x: f64,
    pub xx: f64,
    pub t: f64,
}

/// A smooth `(rho1, rho2, u)` used to manufacture source terms.
pub trait ManufacturedSolution {
    fn rho1(&self, x: f64, t: f64) -> Jet;
    fn rho2(&self, x: f64, t: f64) -> Jet;
    fn u(&self, x: f64, t: f64) -> Jet;
}

/// Constant densities at rest; its sources vanish.
#[derive(Debug, Clone, Copy)]
pub struct ConstantSolution {
    pub rho1: f64,
    pub rho2: f64,
}

impl ManufacturedSolution for ConstantSolution {
    fn rho1(&self, _: f64, _: f64) -> Jet {
        Jet { v: self.rho1, ..Jet::default() }
    }

    fn rho2(&self, _: f64, _: f64) -> Jet {
        Jet { v: self.rho2, ..Jet::default() }
    }

    fn u(&self, _: f64, _: f64) -> Jet {
        Jet::default()
    }
}

/// `rho1 = r1 + a cos(k x) cos t`, `rho2 = r2 + a cos(2 k x) cos t`,
/// `u = a sin(k x) cos t` with `k = pi / L`. Velocity and density slopes vanish
/// at `x = 0` and `x = L`, so the wall conditions hold exactly.
#[derive(Debug, Clone, Copy)]
pub struct TrigSolution {
    pub rho1: f64,
    pub rho2: f64,
    pub amplitude: f64,
    pub length: f64,
}

impl TrigSolution {
    fn cos_jet(&self, base: f64, k: f64, x: f64, t: f64) -> Jet {
        let a = self.amplitude;
        Jet {
            v: base + a * (k * x).cos() * t.cos(),
            x: -a * k * (k * x).sin() * t.cos(),
            xx: -a * k * k * (k * x).cos() * t.cos(),
            t: -a * (k * x).cos() * t.sin(),
        }
    }
}

impl ManufacturedSolution for TrigSolution {
    fn rho1(&self, x: f64, t: f64) -> Jet {
        self.cos_jet(self.rho1, PI / self.length, x, t)
    }

    fn rho2(&self, x: f64, t: f64) -> Jet {
        self.cos_jet(self.rho2, 2.0 * PI / self.length, x, t)
    }

    fn u(&self, x: f64, t: f64) -> Jet {
        let (a, k) = (self.amplitude, PI / self.length);
        Jet {
            v: a * (k * x).sin() * t.cos(),
            x: a * k * (k * x).cos() * t.cos(),
            xx: -a * k * k * (k * x).sin() * t.cos(),
            t: -a * (k * x).sin() * t.sin(),
        }
    }
}

/// Sources that make a [`ManufacturedSolution`] an exact solution of the
/// primitive system.
pub struct MmsForcing<'a, M: ?Sized> {
    pub solution: &'a M,
    pub params: MixtureParams,
}

impl<M: ManufacturedSolution + ?Sized> MmsForcing<'_, M> {
    /// Species-1 diffusion flux and its x-derivative.
    pub fn diffusion_flux(&self, x: f64, t: f64) -> (f64, f64) {
        let (m1, m2) = (self.params.m1(), self.params.m2());
        let r1 = self.solution.rho1(x, t);
        let r2 = self.solution.rho2(x, t);
        let rho = r1.v + r2.v;
        let rho_x = r1.x + r2.x;
        let p = r1.v / m1 + r2.v / m2;
        let p_x = r1.x / m1 + r2.x / m2;
        let a = r2.v * r1.x / m1 - r1.v * r2.x / m2;
        let a_x = r2.x * r1.x / m1 + r2.v * r1.xx / m1 - r1.x * r2.x / m2 - r1.v * r2.xx / m2;
        let q = p * rho;
        let q_x = p_x * rho + p * rho_x;
        (-a / q, -(a_x * q - a * q_x) / (q * q))
    }
}

impl<M: ManufacturedSolution + ?Sized> Forcing for MmsForcing<'_, M> {
    fn species(&self, x: f64, t: f64) -> (f64, f64) {
        let r1 = self.solution.rho1(x, t);
        let r2 = self.solution.rho2(x, t);
        let u = self.solution.u(x, t);
        let (_, f_x) = self.diffusion_flux(x, t);
        (
            r1.t + r1.x * u.v + r1.v * u.x + f_x,
            r2.t + r2.x * u.v + r2.v * u.x - f_x,
        )
    }

    fn momentum(&self, x: f64, t: f64) -> f64 {
        let (m1, m2) = (self.params.m1(), self.params.m2());
        let r1 = self.solution.rho1(x, t);
        let r2 = self.solution.rho2(x, t);
        let u = self.solution.u(x, t);
        let p_x = r1.x / m1 + r2.x / m2;
        (r1.v + r2.v) * (u.t + u.v * u.x) - self.params.viscosity() * u.xx + p_x
    }
}

/// Discrete L2 errors at the final time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MmsErrors {
    pub n: usize,
    pub dt: f64,
    pub steps: usize,
    pub l2_rho1: f64,
    pub l2_rho2: f64,
    pub l2_u: f64,
    /// `sqrt` of the sum of the squared field errors.
    pub l2_total: f64,
}

/// Exact primitive state of `solution` sampled on the grid at time `t`.
pub fn sample(solution: &dyn ManufacturedSolution, config: &SimConfig, t: f64) -> PrimitiveState {
    let cells = config.grid.coordinates(Location::Cell);
    let nodes = config.grid.coordinates(Location::Node);
    PrimitiveState {
        rho1: cells.iter().map(|&x| solution.rho1(x, t).v).collect(),
        rho2: cells.iter().map(|&x| solution.rho2(x, t).v).collect(),
        u: nodes.iter().map(|&x| solution.u(x, t).v).collect(),
    }
}

/// Runs the forced primitive scheme from the exact data at `t = 0` to
/// `config.t_end` with steps of `config.dt` (the last one shortened).
pub fn mms_run(config: &SimConfig, solution: &dyn ManufacturedSolution) -> Result<MmsErrors> {
    config.validate()?;
    let forcing = MmsForcing {
        solution,
        params: config.params,
    };
    let mut state = sample(solution, config, 0.0);
    let steps = (config.t_end / config.dt - 1e-9).ceil().max(0.0) as usize;
    let mut t = 0.0;
    for k in 0..steps {
        let h = if k + 1 == steps { config.t_end - t } else { config.dt };
        state = step_primitive_forced(&state, t, h, config, Some(&forcing))
            .map_err(|e| MixturaError::Step {
                step: k + 1,
                source: Box::new(e),
            })?
            .state;
        t = if k + 1 == steps { config.t_end } else { t + h };
    }
    let exact = sample(solution, config, config.t_end);
    let grid = &config.grid;
    let diff = |a: &[f64], b: &[f64]| -> Vec<f64> { a.iter().zip(b).map(|(x, y)| x - y).collect() };
    let l2_rho1 = l2_norm(&diff(&state.rho1, &exact.rho1), grid, Location::Cell);
    let l2_rho2 = l2_norm(&diff(&state.rho2, &exact.rho2), grid, Location::Cell);
    let l2_u = l2_norm(&diff(&state.u, &exact.u), grid, Location::Node);
    Ok(MmsErrors {
        n: grid.n(),
        dt: config.dt,
        steps,
        l2_rho1,
        l2_rho2,
        l2_u,
        l2_total: (l2_rho1 * l2_rho1 + l2_rho2 * l2_rho2 + l2_u * l2_u).sqrt(),
    })
}

/// Observed orders `ln(e_i / e_{i+1}) / ln(h_i / h_{i+1})` between successive levels.
pub fn observed_orders(h: &[f64], err: &[f64]) -> Vec<f64> {
    h.windows(2)
        .zip(err.windows(2))
        .map(|(h, e)| (e[0] / e[1]).ln() / (h[0] / h[1]).ln())
        .collect()
}
