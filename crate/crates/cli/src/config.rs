use std::path::{Path, PathBuf};

use mixtura_core::discretization::{Boundary, Grid1D};
use mixtura_core::dynamics::{
    Formulation, InitialCondition, InitialKind, SimConfig, DEFAULT_CFL, DEFAULT_PICARD_MAX, DEFAULT_PICARD_TOL,
};
use mixtura_core::model::MixtureParams;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub mixture: MixtureSection,
    pub grid: GridSection,
    pub time: TimeSection,
    #[serde(default)]
    pub initial: InitialSection,
    #[serde(default)]
    pub output: OutputSection,
    #[serde(default)]
    pub equivalence: EquivalenceSection,
    #[serde(default)]
    pub convergence: ConvergenceSection,
    #[serde(default)]
    pub lagrangian: LagrangianSection,
    #[serde(default)]
    pub analysis: AnalysisSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixtureSection {
    pub m1: f64,
    pub m2: f64,
    pub mu: f64,
    pub nu: f64,
    #[serde(default = "one")]
    pub rho1_star: f64,
    #[serde(default = "one")]
    pub rho2_star: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub n: usize,
    #[serde(default = "one")]
    pub length: f64,
    #[serde(default = "wall")]
    pub bc: Boundary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeSection {
    pub dt: f64,
    pub t_end: f64,
    #[serde(default = "entropic")]
    pub formulation: Formulation,
    #[serde(default = "picard_tol")]
    pub picard_tol: f64,
    #[serde(default = "picard_max")]
    pub picard_max: usize,
    #[serde(default = "cfl")]
    pub cfl: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InitialSection {
    pub kind: InitialKind,
    pub amplitude: f64,
    pub mode: usize,
    pub seed: u64,
}

impl Default for InitialSection {
    fn default() -> Self {
        let ic = InitialCondition::default();
        Self {
            kind: ic.kind,
            amplitude: ic.amplitude,
            mode: ic.mode,
            seed: ic.seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    /// Relative paths resolve against the working directory.
    pub dir: PathBuf,
    /// Record every this many steps (the final step is always recorded).
    pub every: usize,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
            every: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EquivalenceSection {
    pub resolutions: Vec<usize>,
    /// `dt = dt_factor * dx^2` at each resolution.
    pub dt_factor: f64,
    pub t_end: f64,
}

impl Default for EquivalenceSection {
    fn default() -> Self {
        Self {
            resolutions: vec![32, 64, 128],
            dt_factor: 1.0,
            t_end: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConvergenceSection {
    pub amplitude: f64,
    pub resolutions: Vec<usize>,
    pub dt_factor: f64,
    pub t_end: f64,
    pub temporal_n: usize,
    pub temporal_dt: Vec<f64>,
    pub temporal_t_end: f64,
}

impl Default for ConvergenceSection {
    fn default() -> Self {
        Self {
            amplitude: 0.1,
            resolutions: vec![32, 64, 128],
            dt_factor: 2.0,
            t_end: 0.2,
            temporal_n: 256,
            temporal_dt: vec![0.02, 0.01, 0.005],
            temporal_t_end: 0.4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LagrangianSection {
    pub n: usize,
    pub amplitudes: Vec<f64>,
    pub t: f64,
    pub delta: f64,
    pub quadrature_steps: usize,
    pub trials: usize,
    pub seed: u64,
}

impl Default for LagrangianSection {
    fn default() -> Self {
        Self {
            n: 64,
            amplitudes: vec![1e-2, 5e-3, 2.5e-3],
            t: 1.0,
            delta: 0.5,
            quadrature_steps: 64,
            trials: 1000,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalysisSection {
    pub energy_trials: usize,
    pub seed: u64,
}

impl Default for AnalysisSection {
    fn default() -> Self {
        Self {
            energy_trials: 100,
            seed: 0,
        }
    }
}

fn one() -> f64 {
    1.0
}
fn wall() -> Boundary {
    Boundary::Wall
}
fn entropic() -> Formulation {
    Formulation::Entropic
}
fn picard_tol() -> f64 {
    DEFAULT_PICARD_TOL
}
fn picard_max() -> usize {
    DEFAULT_PICARD_MAX
}
fn cfl() -> f64 {
    DEFAULT_CFL
}

/// A parsed config together with the bytes it came from.
#[derive(Debug, Clone)]
pub struct Loaded {
    pub config: Config,
    pub path: PathBuf,
    pub raw: String,
}

pub fn load(path: &Path) -> Result<Loaded, String> {
    let raw = std::fs::read_to_string(path).map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
    let config: Config = toml::from_str(&raw).map_err(|e| format!("invalid config {}: {e}", path.display()))?;
    config.sim()?;
    Ok(Loaded {
        config,
        path: path.to_path_buf(),
        raw,
    })
}

impl Config {
    pub fn params(&self) -> Result<MixtureParams, String> {
        let m = &self.mixture;
        MixtureParams::new(m.m1, m.m2, m.mu, m.nu).map_err(|e| e.to_string())
    }

    pub fn grid(&self) -> Result<Grid1D, String> {
        Grid1D::new(self.grid.n, self.grid.length, self.grid.bc).map_err(|e| e.to_string())
    }

    pub fn sim(&self) -> Result<SimConfig, String> {
        let mut c = SimConfig::new(self.params()?, self.grid()?, self.time.dt, self.time.t_end, self.time.formulation);
        c.rho1_star = self.mixture.rho1_star;
        c.rho2_star = self.mixture.rho2_star;
        c.picard_tol = self.time.picard_tol;
        c.picard_max = self.time.picard_max;
        c.cfl_limit = self.time.cfl;
        c.output_every = self.output.every;
        c.initial = InitialCondition {
            kind: self.initial.kind,
            amplitude: self.initial.amplitude,
            mode: self.initial.mode,
            seed: self.initial.seed,
        };
        c.validate().map_err(|e| e.to_string())?;
        Ok(c)
    }
}
