//! Nonlinear time integration of the primitive and entropic systems.
//!
//! Both formulations share one staggered grid: densities (or `rho` and `h`)
//! on cells, velocity on nodes. Steps are Backward Euler with
//! Picard-lagged coefficients; mass fluxes are applied in conservative form so
//! cell sums telescope.

mod diagnostics;
mod mms;
mod scheme;
mod state;
mod studies;

pub use diagnostics::{fit_decay, fit_decay_tail, record, write_series_csv, DecayFit, TimeSeriesRecord, SERIES_HEADER};
pub use mms::{
    mms_run, observed_orders, sample, ConstantSolution, Jet, ManufacturedSolution, MmsErrors, MmsForcing, TrigSolution,
};
pub use scheme::{
    cfl_step, species_face_fluxes, step_entropic, step_primitive, step_primitive_forced, Forcing, SimConfig,
    StepOutcome, DEFAULT_CFL, DEFAULT_PICARD_MAX, DEFAULT_PICARD_TOL, U_FLOOR,
};
pub use studies::{
    equivalence_gap, equivalence_sweep, spatial_sweep, temporal_sweep, ConvergenceRow, EquivalenceRow, CONVERGENCE_HEADER,
    EQUIVALENCE_HEADER,
};
pub use state::{
    initial_entropic, initial_state, EntropicState, Formulation, InitialCondition, InitialKind, PrimitiveState, State,
};

use crate::error::{MixturaError, Result};

/// Final state and sampled diagnostics of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub final_state: State,
    pub final_time: f64,
    pub steps: usize,
    pub records: Vec<TimeSeriesRecord>,
}

/// Advances one step in whichever formulation `state` carries.
pub fn step(state: &State, t: f64, dt: f64, config: &SimConfig) -> Result<StepOutcome<State>> {
    Ok(match state {
        State::Entropic(s) => {
            let o = step_entropic(s, t, dt, config)?;
            StepOutcome {
                state: State::Entropic(o.state),
                picard_iters: o.picard_iters,
                substeps: o.substeps,
            }
        }
        State::Primitive(s) => {
            let o = step_primitive(s, t, dt, config)?;
            StepOutcome {
                state: State::Primitive(o.state),
                picard_iters: o.picard_iters,
                substeps: o.substeps,
            }
        }
    })
}

/// Runs from the configured initial condition.
pub fn run(config: &SimConfig) -> Result<RunOutput> {
    run_with(config, |_| {})
}

/// Runs from the configured initial condition, calling `observe` with every record.
pub fn run_with(config: &SimConfig, observe: impl FnMut(&TimeSeriesRecord)) -> Result<RunOutput> {
    config.validate()?;
    let state = initial_state(
        &config.grid,
        &config.params,
        config.rho1_star,
        config.rho2_star,
        &config.initial,
        config.formulation,
    )?;
    run_from(config, state, observe)
}

/// Steps `state` from `t = 0` to `config.t_end`, recording every
/// `output_every` steps and at the final time.
pub fn run_from(config: &SimConfig, mut state: State, mut observe: impl FnMut(&TimeSeriesRecord)) -> Result<RunOutput> {
    config.validate()?;
    let grid = &config.grid;
    let params = &config.params;
    let steps = (config.t_end / config.dt - 1e-9).ceil().max(0.0) as usize;
    let mut records = Vec::new();
    let first = record(&state, grid, params, 0.0, 0)?;
    observe(&first);
    records.push(first);
    let mut t = 0.0;
    for k in 1..=steps {
        let last = k == steps;
        let h = if last { config.t_end - t } else { config.dt };
        let out = step(&state, t, h, config).map_err(|e| MixturaError::Step {
            step: k,
            source: Box::new(e),
        })?;
        state = out.state;
        t = if last { config.t_end } else { t + h };
        if k % config.output_every == 0 || last {
            let r = record(&state, grid, params, t, out.picard_iters)?;
            observe(&r);
            records.push(r);
        }
    }
    Ok(RunOutput {
        final_state: state,
        final_time: t,
        steps,
        records,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discretization::{Boundary, Grid1D};
    use crate::model::MixtureParams;

    fn cfg(formulation: Formulation, bc: Boundary) -> SimConfig {
        let params = MixtureParams::new(1.0, 2.0, 0.1, 0.1).unwrap();
        let grid = Grid1D::new(32, 1.0, bc).unwrap();
        SimConfig::new(params, grid, 1e-2, 0.2, formulation)
    }

    #[test]
    fn zero_end_time_records_initial_only() {
        let mut c = cfg(Formulation::Entropic, Boundary::Wall);
        c.t_end = 0.0;
        let out = run(&c).unwrap();
        assert_eq!(out.records.len(), 1);
        assert_eq!(out.steps, 0);
    }

    #[test]
    fn output_every_and_final_sample() {
        let mut c = cfg(Formulation::Primitive, Boundary::Periodic);
        c.output_every = 3;
        let out = run(&c).unwrap();
        assert_eq!(out.steps, 20);
        // t = 0, steps 3, 6, ..., 18, and the final step 20.
        assert_eq!(out.records.len(), 1 + 6 + 1);
        assert!((out.records.last().unwrap().t - 0.2).abs() < 1e-15);
    }

    #[test]
    fn runs_are_deterministic() {
        let mut c = cfg(Formulation::Entropic, Boundary::Wall);
        c.initial.kind = InitialKind::Random;
        c.initial.seed = 4;
        let a = run(&c).unwrap();
        let b = run(&c).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn masses_are_conserved() {
        for f in [Formulation::Entropic, Formulation::Primitive] {
            for bc in [Boundary::Wall, Boundary::Periodic] {
                let out = run(&cfg(f, bc)).unwrap();
                let m0 = out.records[0];
                for r in &out.records {
                    assert!((r.mass_total - m0.mass_total).abs() <= 1e-13 * m0.mass_total);
                    if f == Formulation::Primitive {
                        assert!((r.mass1 - m0.mass1).abs() <= 1e-13 * m0.mass1);
                        assert!((r.mass2 - m0.mass2).abs() <= 1e-13 * m0.mass2);
                    }
                }
            }
        }
    }

    #[test]
    fn step_errors_carry_index() {
        let mut c = cfg(Formulation::Entropic, Boundary::Wall);
        c.picard_max = 1;
        match run(&c) {
            Err(MixturaError::Step { step, .. }) => assert_eq!(step, 1),
            other => panic!("unexpected {other:?}"),
        }
    }
}
