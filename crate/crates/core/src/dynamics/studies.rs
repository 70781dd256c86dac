//! Resolution sweeps shared by the command line and the acceptance suite.

use serde::{Deserialize, Serialize};

use super::mms::{mms_run, observed_orders, ManufacturedSolution, MmsErrors};
use super::scheme::SimConfig;
use super::state::{initial_state, Formulation};
use super::run_from;
use crate::discretization::{linf_norm, Grid1D};
use crate::error::Result;

/// Max-norm gap between the primitive run and the entropic run mapped back to
/// partial densities, at one resolution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EquivalenceRow {
    pub n: usize,
    pub dt: f64,
    pub steps: usize,
    pub linf_rho1: f64,
    pub linf_rho2: f64,
    pub linf_u: f64,
    pub linf_max: f64,
    /// `linf_max` of the previous (coarser) row over this one.
    pub ratio: Option<f64>,
}

pub const EQUIVALENCE_HEADER: &str = "n,dt,steps,linf_rho1,linf_rho2,linf_u,linf_max,ratio";

impl EquivalenceRow {
    pub fn csv_row(&self) -> String {
        let ratio = self.ratio.map_or(String::new(), |r| format!("{r:.16e}"));
        format!(
            "{},{:.16e},{},{:.16e},{:.16e},{:.16e},{:.16e},{ratio}",
            self.n, self.dt, self.steps, self.linf_rho1, self.linf_rho2, self.linf_u, self.linf_max
        )
    }
}

fn diff(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// Runs both formulations from the same data on `config.grid` with
/// `config.dt` and `config.t_end`.
pub fn equivalence_gap(config: &SimConfig) -> Result<EquivalenceRow> {
    let mut prim = *config;
    prim.formulation = Formulation::Primitive;
    prim.output_every = usize::MAX;
    let mut ent = prim;
    ent.formulation = Formulation::Entropic;
    let start = |c: &SimConfig| initial_state(&c.grid, &c.params, c.rho1_star, c.rho2_star, &c.initial, c.formulation);
    let a = run_from(&prim, start(&prim)?, |_| {})?;
    let b = run_from(&ent, start(&ent)?, |_| {})?;
    let pa = a.final_state.primitive(&config.params)?;
    let pb = b.final_state.primitive(&config.params)?;
    let linf_rho1 = linf_norm(&diff(&pa.rho1, &pb.rho1));
    let linf_rho2 = linf_norm(&diff(&pa.rho2, &pb.rho2));
    let linf_u = linf_norm(&diff(&pa.u, &pb.u));
    Ok(EquivalenceRow {
        n: config.grid.n(),
        dt: config.dt,
        steps: a.steps,
        linf_rho1,
        linf_rho2,
        linf_u,
        linf_max: linf_rho1.max(linf_rho2).max(linf_u),
        ratio: None,
    })
}

/// [`equivalence_gap`] on each of `resolutions` with `dt = dt_factor * dx^2`.
pub fn equivalence_sweep(base: &SimConfig, resolutions: &[usize], dt_factor: f64) -> Result<Vec<EquivalenceRow>> {
    let mut rows: Vec<EquivalenceRow> = Vec::with_capacity(resolutions.len());
    for &n in resolutions {
        let mut c = *base;
        c.grid = Grid1D::new(n, base.grid.length(), base.grid.bc())?;
        c.dt = dt_factor * c.grid.dx() * c.grid.dx();
        let mut row = equivalence_gap(&c)?;
        row.ratio = rows.last().map(|p| p.linf_max / row.linf_max);
        rows.push(row);
    }
    Ok(rows)
}

/// One level of an MMS sweep with its observed order against the previous level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    /// `"space"` or `"time"`.
    pub kind: &'static str,
    pub errors: MmsErrors,
    pub order: Option<f64>,
}

pub const CONVERGENCE_HEADER: &str = "kind,n,dt,steps,l2_rho1,l2_rho2,l2_u,l2_total,order";

impl ConvergenceRow {
    pub fn csv_row(&self) -> String {
        let e = &self.errors;
        let order = self.order.map_or(String::new(), |p| format!("{p:.16e}"));
        format!(
            "{},{},{:.16e},{},{:.16e},{:.16e},{:.16e},{:.16e},{order}",
            self.kind, e.n, e.dt, e.steps, e.l2_rho1, e.l2_rho2, e.l2_u, e.l2_total
        )
    }
}

fn with_orders(kind: &'static str, errors: Vec<MmsErrors>, h: &[f64]) -> Vec<ConvergenceRow> {
    let totals: Vec<f64> = errors.iter().map(|e| e.l2_total).collect();
    let orders = observed_orders(h, &totals);
    errors
        .into_iter()
        .enumerate()
        .map(|(i, errors)| ConvergenceRow {
            kind,
            errors,
            order: i.checked_sub(1).map(|j| orders[j]),
        })
        .collect()
}

/// Refines the grid with `dt = dt_factor * dx^2`, so the time error stays a
/// fixed fraction of the space error.
pub fn spatial_sweep(
    base: &SimConfig,
    solution: &dyn ManufacturedSolution,
    resolutions: &[usize],
    dt_factor: f64,
) -> Result<Vec<ConvergenceRow>> {
    let mut errors = Vec::with_capacity(resolutions.len());
    let mut h = Vec::with_capacity(resolutions.len());
    for &n in resolutions {
        let mut c = *base;
        c.grid = Grid1D::new(n, base.grid.length(), base.grid.bc())?;
        c.dt = dt_factor * c.grid.dx() * c.grid.dx();
        h.push(c.grid.dx());
        errors.push(mms_run(&c, solution)?);
    }
    Ok(with_orders("space", errors, &h))
}

/// Refines `dt` on the fixed grid of `base`.
pub fn temporal_sweep(base: &SimConfig, solution: &dyn ManufacturedSolution, steps: &[f64]) -> Result<Vec<ConvergenceRow>> {
    let mut errors = Vec::with_capacity(steps.len());
    for &dt in steps {
        let mut c = *base;
        c.dt = dt;
        errors.push(mms_run(&c, solution)?);
    }
    Ok(with_orders("time", errors, steps))
}
