use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::discretization::{Boundary, Grid1D, Location};
use crate::error::{MixturaError, Result};
use crate::model::{phi, psi, EntropicPoint, MixtureParams, PointState};

/// Which form of the equations is advanced in time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Formulation {
    Primitive,
    Entropic,
}

impl std::str::FromStr for Formulation {
    type Err = MixturaError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "primitive" => Ok(Self::Primitive),
            "entropic" => Ok(Self::Entropic),
            other => Err(MixturaError::InvalidParameter(format!(
                "unknown formulation '{other}'"
            ))),
        }
    }
}

/// Partial densities on cells and velocity on nodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrimitiveState {
    pub rho1: Vec<f64>,
    pub rho2: Vec<f64>,
    pub u: Vec<f64>,
}

/// Total density and `h` on cells, velocity on nodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntropicState {
    pub rho: Vec<f64>,
    pub h: Vec<f64>,
    pub u: Vec<f64>,
}

fn check_lengths(grid: &Grid1D, a: usize, b: usize, u: usize) -> Result<()> {
    let (nc, nn) = (grid.n_cells(), grid.n_nodes());
    if a != nc || b != nc || u != nn {
        return Err(MixturaError::InvalidParameter(format!(
            "state sizes ({a}, {b}, {u}) do not match grid ({nc} cells, {nn} nodes)"
        )));
    }
    Ok(())
}

impl PrimitiveState {
    pub fn check(&self, grid: &Grid1D) -> Result<()> {
        check_lengths(grid, self.rho1.len(), self.rho2.len(), self.u.len())
    }

    pub fn to_entropic(&self, params: &MixtureParams) -> Result<EntropicState> {
        let mut rho = Vec::with_capacity(self.rho1.len());
        let mut h = Vec::with_capacity(self.rho1.len());
        for (&r1, &r2) in self.rho1.iter().zip(&self.rho2) {
            let e = psi(PointState { rho1: r1, rho2: r2 }, params)?;
            rho.push(e.rho);
            h.push(e.h);
        }
        Ok(EntropicState {
            rho,
            h,
            u: self.u.clone(),
        })
    }
}

impl EntropicState {
    pub fn check(&self, grid: &Grid1D) -> Result<()> {
        check_lengths(grid, self.rho.len(), self.h.len(), self.u.len())
    }

    pub fn to_primitive(&self, params: &MixtureParams) -> Result<PrimitiveState> {
        let mut rho1 = Vec::with_capacity(self.rho.len());
        let mut rho2 = Vec::with_capacity(self.rho.len());
        for (&rho, &h) in self.rho.iter().zip(&self.h) {
            let p = phi(EntropicPoint { h, rho }, params)?;
            rho1.push(p.rho1);
            rho2.push(p.rho2);
        }
        Ok(PrimitiveState {
            rho1,
            rho2,
            u: self.u.clone(),
        })
    }
}

/// A state in either formulation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "formulation", rename_all = "lowercase")]
pub enum State {
    Primitive(PrimitiveState),
    Entropic(EntropicState),
}

impl State {
    pub fn formulation(&self) -> Formulation {
        match self {
            State::Primitive(_) => Formulation::Primitive,
            State::Entropic(_) => Formulation::Entropic,
        }
    }

    pub fn velocity(&self) -> &[f64] {
        match self {
            State::Primitive(s) => &s.u,
            State::Entropic(s) => &s.u,
        }
    }

    pub fn primitive(&self, params: &MixtureParams) -> Result<PrimitiveState> {
        match self {
            State::Primitive(s) => Ok(s.clone()),
            State::Entropic(s) => s.to_primitive(params),
        }
    }

    pub fn entropic(&self, params: &MixtureParams) -> Result<EntropicState> {
        match self {
            State::Primitive(s) => s.to_entropic(params),
            State::Entropic(s) => Ok(s.clone()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitialKind {
    /// The constant state `(rho1*, rho2*, u = 0)`.
    Equilibrium,
    /// `cos(2 pi k x / L)` on `rho` and `h`; a compact bump (walls) or
    /// `sin(2 pi k x / L)` (periodic) on `u`.
    Mode,
    /// A few seeded random Fourier modes on every field.
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InitialCondition {
    pub kind: InitialKind,
    pub amplitude: f64,
    pub mode: usize,
    pub seed: u64,
}

impl Default for InitialCondition {
    fn default() -> Self {
        Self {
            kind: InitialKind::Mode,
            amplitude: 1e-2,
            mode: 1,
            seed: 0,
        }
    }
}

const RANDOM_MODES: usize = 4;

/// Polynomial bump `(1 - r^2)^4` centred at `L/2` with half-width `L/4`.
/// It vanishes with three derivatives at its edges, so `u` is zero near walls.
fn bump(x: f64, length: f64) -> f64 {
    let r = (x - 0.5 * length) / (0.25 * length);
    if r.abs() >= 1.0 {
        0.0
    } else {
        (1.0 - r * r).powi(4)
    }
}

/// Builds the initial state in entropic variables around `(rho1*, rho2*)`.
pub fn initial_entropic(
    grid: &Grid1D,
    params: &MixtureParams,
    rho1_star: f64,
    rho2_star: f64,
    ic: &InitialCondition,
) -> Result<EntropicState> {
    let star = psi(PointState::new(rho1_star, rho2_star)?, params)?;
    if !ic.amplitude.is_finite() {
        return Err(MixturaError::InvalidParameter("amplitude must be finite".into()));
    }
    let cells = grid.coordinates(Location::Cell);
    let nodes = grid.coordinates(Location::Node);
    let l = grid.length();
    let eps = ic.amplitude;
    let wall = grid.bc() == Boundary::Wall;
    let mut state = EntropicState {
        rho: vec![star.rho; cells.len()],
        h: vec![star.h; cells.len()],
        u: vec![0.0; nodes.len()],
    };
    match ic.kind {
        InitialKind::Equilibrium => {}
        InitialKind::Mode => {
            if ic.mode == 0 {
                return Err(MixturaError::InvalidParameter("mode number must be at least 1".into()));
            }
            let k = 2.0 * PI * ic.mode as f64 / l;
            for (i, &x) in cells.iter().enumerate() {
                state.rho[i] = star.rho * (1.0 + eps * (k * x).cos());
                state.h[i] = star.h + eps * (k * x).cos();
            }
            for (i, &x) in nodes.iter().enumerate() {
                state.u[i] = if wall { eps * bump(x, l) } else { eps * (k * x).sin() };
            }
        }
        InitialKind::Random => {
            let mut rng = ChaCha8Rng::seed_from_u64(ic.seed);
            for j in 1..=RANDOM_MODES {
                let w = 1.0 / j as f64;
                let (a, b, c) = (
                    rng.gen_range(-1.0..1.0) * w,
                    rng.gen_range(-1.0..1.0) * w,
                    rng.gen_range(-1.0..1.0) * w,
                );
                // cos(j pi x / L) satisfies the zero-slope wall condition and
                // sin(j pi x / L) vanishes there; periodic grids use 2 pi.
                let k = if wall { PI } else { 2.0 * PI } * j as f64 / l;
                for (i, &x) in cells.iter().enumerate() {
                    state.rho[i] += star.rho * eps * a * (k * x).cos();
                    state.h[i] += eps * b * (k * x).cos();
                }
                for (i, &x) in nodes.iter().enumerate() {
                    state.u[i] += eps * c * (k * x).sin();
                }
            }
        }
    }
    if wall {
        let n = grid.n();
        state.u[0] = 0.0;
        state.u[n] = 0.0;
    }
    if let Some((i, &r)) = state.rho.iter().enumerate().find(|(_, r)| **r <= 0.0) {
        return Err(MixturaError::Positivity {
            time: 0.0,
            x: cells[i],
            field: "rho",
            value: r,
        });
    }
    Ok(state)
}

/// The initial state in the requested formulation; primitive data are the
/// pointwise image of the entropic data under the inverse change of variables.
pub fn initial_state(
    grid: &Grid1D,
    params: &MixtureParams,
    rho1_star: f64,
    rho2_star: f64,
    ic: &InitialCondition,
    formulation: Formulation,
) -> Result<State> {
    let e = initial_entropic(grid, params, rho1_star, rho2_star, ic)?;
    Ok(match formulation {
        Formulation::Entropic => State::Entropic(e),
        Formulation::Primitive => State::Primitive(e.to_primitive(params)?),
    })
}
