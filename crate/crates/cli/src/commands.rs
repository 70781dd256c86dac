use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use mixtura_core::discretization::Boundary;
use mixtura_core::dynamics::{
    equivalence_sweep, run_with, spatial_sweep, temporal_sweep, write_series_csv, State, TrigSolution,
    CONVERGENCE_HEADER, EQUIVALENCE_HEADER,
};
use mixtura_core::lagrangian::{
    amplitude_sweep, inverse_identity_residual, perturbed_fields, remainders, AmplitudeSweep, AtRest,
    RemainderOptions,
};
use mixtura_core::linear_analysis::{assemble_constant, energy_dissipation_check, spectrum, EnergyReport, SpectrumReport};
use mixtura_core::model::{equilibrium_coefficients, psi, EquilibriumCoefficients, PointState};
use mixtura_core::MixturaError;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::{Config, Loaded};

pub const EXIT_OK: u8 = 0;
pub const EXIT_CONFIG: u8 = 1;
pub const EXIT_NUMERICAL: u8 = 2;

/// Why a command stopped.
#[derive(Debug)]
pub enum Failure {
    Config(String),
    Numerical(MixturaError),
}

impl From<MixturaError> for Failure {
    fn from(e: MixturaError) -> Self {
        Failure::Numerical(e)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Simulate,
    Linearize,
    Equivalence,
    LagrangianCheck,
    Convergence,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Linearize => "linearize",
            Command::Equivalence => "equivalence",
            Command::LagrangianCheck => "lagrangian-check",
            Command::Convergence => "convergence",
        }
    }

    fn outputs(self) -> &'static [&'static str] {
        match self {
            Command::Simulate => &["series.csv", "final_state.json"],
            Command::Linearize => &["spectrum.json"],
            Command::Equivalence => &["equivalence.csv"],
            Command::LagrangianCheck => &["lagrangian.json"],
            Command::Convergence => &["convergence.csv"],
        }
    }
}

pub struct Invocation {
    pub command: Command,
    pub config: PathBuf,
    pub out: Option<PathBuf>,
    pub force: bool,
}

/// `--out`, then `MIXTURA_OUT`, then `[output] dir`.
pub fn output_dir(cli: Option<&Path>, env: Option<&str>, config: &Config) -> PathBuf {
    if let Some(p) = cli {
        return p.to_path_buf();
    }
    match env {
        Some(e) if !e.is_empty() => PathBuf::from(e),
        _ => config.output.dir.clone(),
    }
}

#[derive(Serialize)]
struct ManifestEntry<'a> {
    command: &'a str,
    config_path: String,
    config_sha256: String,
    version: &'a str,
    outputs: Vec<String>,
    wall_clock_seconds: f64,
    status: &'a str,
    exit_code: u8,
}

fn write_json(path: &Path, value: &impl Serialize) -> std::io::Result<()> {
    let mut s = serde_json::to_string_pretty(value).map_err(std::io::Error::other)?;
    s.push('\n');
    fs::write(path, s)
}

/// Adds or replaces this command's entry in `manifest.json`, keeping the
/// entries of other commands run into the same directory.
fn update_manifest(dir: &Path, entry: &ManifestEntry) -> std::io::Result<()> {
    let path = dir.join("manifest.json");
    let mut runs = fs::read_to_string(&path)
        .ok()
        .and_then(|s| serde_json::from_str::<serde_json::Value>(&s).ok())
        .and_then(|v| v.get("runs").cloned())
        .and_then(|v| v.as_object().cloned())
        .unwrap_or_default();
    runs.insert(
        entry.command.to_string(),
        serde_json::to_value(entry).map_err(std::io::Error::other)?,
    );
    write_json(&path, &serde_json::json!({ "runs": runs }))
}

pub fn execute(inv: &Invocation) -> u8 {
    let started = Instant::now();
    let loaded = match crate::config::load(&inv.config) {
        Ok(l) => l,
        Err(msg) => {
            eprintln!("error: {msg}");
            return EXIT_CONFIG;
        }
    };
    let env = std::env::var("MIXTURA_OUT").ok();
    let dir = output_dir(inv.out.as_deref(), env.as_deref(), &loaded.config);
    if let Err(msg) = prepare_dir(&dir, inv.command, inv.force) {
        eprintln!("error: {msg}");
        return EXIT_CONFIG;
    }
    let result = dispatch(inv.command, &loaded, &dir);
    let (status, code) = match &result {
        Ok(()) => ("success", EXIT_OK),
        Err(Failure::Config(_)) => ("config_error", EXIT_CONFIG),
        Err(Failure::Numerical(_)) => ("numerical_failure", EXIT_NUMERICAL),
    };
    let mut outputs: Vec<String> = if result.is_ok() {
        inv.command.outputs().iter().map(|s| s.to_string()).collect()
    } else {
        Vec::new()
    };
    match &result {
        Ok(()) => {}
        Err(Failure::Config(msg)) => eprintln!("error: {msg}"),
        Err(Failure::Numerical(e)) => {
            eprintln!("numerical failure: {e}");
            let diag = serde_json::json!({
                "command": inv.command.name(),
                "status": status,
                "error": e.to_string(),
                "detail": format!("{e:?}"),
            });
            if write_json(&dir.join("diagnostic.json"), &diag).is_ok() {
                outputs.push("diagnostic.json".into());
            }
        }
    }
    let entry = ManifestEntry {
        command: inv.command.name(),
        config_path: loaded.path.display().to_string(),
        config_sha256: hex::encode(Sha256::digest(loaded.raw.as_bytes())),
        version: env!("CARGO_PKG_VERSION"),
        outputs,
        wall_clock_seconds: started.elapsed().as_secs_f64(),
        status,
        exit_code: code,
    };
    if let Err(e) = update_manifest(&dir, &entry) {
        eprintln!("error: cannot write manifest in {}: {e}", dir.display());
        return if code == EXIT_OK { EXIT_NUMERICAL } else { code };
    }
    code
}

fn prepare_dir(dir: &Path, command: Command, force: bool) -> Result<(), String> {
    fs::create_dir_all(dir).map_err(|e| format!("cannot create output directory {}: {e}", dir.display()))?;
    if !force {
        if let Some(existing) = command.outputs().iter().map(|f| dir.join(f)).find(|p| p.exists()) {
            return Err(format!("{} exists; pass --force to overwrite", existing.display()));
        }
    }
    Ok(())
}

fn io(path: &Path) -> impl FnOnce(std::io::Error) -> Failure + '_ {
    move |e| Failure::Config(format!("cannot write {}: {e}", path.display()))
}

fn dispatch(command: Command, loaded: &Loaded, dir: &Path) -> Result<(), Failure> {
    match command {
        Command::Simulate => simulate(&loaded.config, dir),
        Command::Linearize => linearize(&loaded.config, dir),
        Command::Equivalence => equivalence(&loaded.config, dir),
        Command::LagrangianCheck => lagrangian_check(&loaded.config, dir),
        Command::Convergence => convergence(&loaded.config, dir),
    }
}

#[derive(Serialize)]
struct FinalState<'a> {
    t: f64,
    steps: usize,
    n: usize,
    length: f64,
    bc: Boundary,
    state: &'a State,
}

fn simulate(config: &Config, dir: &Path) -> Result<(), Failure> {
    let sim = config.sim().map_err(Failure::Config)?;
    let out = run_with(&sim, |_| {})?;
    let series = dir.join("series.csv");
    let file = fs::File::create(&series).map_err(io(&series))?;
    write_series_csv(&out.records, std::io::BufWriter::new(file)).map_err(io(&series))?;
    let fin = dir.join("final_state.json");
    write_json(
        &fin,
        &FinalState {
            t: out.final_time,
            steps: out.steps,
            n: sim.grid.n(),
            length: sim.grid.length(),
            bc: sim.grid.bc(),
            state: &out.final_state,
        },
    )
    .map_err(io(&fin))?;
    println!("simulate: {} steps to t = {}, {} samples", out.steps, out.final_time, out.records.len());
    Ok(())
}

#[derive(Serialize)]
struct SpectrumFile<'a> {
    #[serde(flatten)]
    report: &'a SpectrumReport,
    n: usize,
    bc: Boundary,
    coefficients: EquilibriumCoefficients,
    energy: EnergyReport,
}

fn linearize(config: &Config, dir: &Path) -> Result<(), Failure> {
    let params = config.params().map_err(Failure::Config)?;
    let grid = config.grid().map_err(Failure::Config)?;
    let coeffs = equilibrium_coefficients(config.mixture.rho1_star, config.mixture.rho2_star, &params)
        .map_err(|e| Failure::Config(e.to_string()))?;
    let op = assemble_constant(&coeffs, &grid, params.viscosity())?;
    let report = spectrum(&op)?;
    let energy = energy_dissipation_check(&op, config.analysis.energy_trials, config.analysis.seed, config.time.dt, 0)?;
    let path = dir.join("spectrum.json");
    write_json(
        &path,
        &SpectrumFile {
            report: &report,
            n: grid.n(),
            bc: grid.bc(),
            coefficients: coeffs,
            energy,
        },
    )
    .map_err(io(&path))?;
    println!(
        "linearize: {} eigenvalues, {} zero modes, decay rate {}",
        report.eigenvalues.len(),
        report.zero_mode_count,
        report.decay_rate
    );
    Ok(())
}

fn equivalence(config: &Config, dir: &Path) -> Result<(), Failure> {
    let mut sim = config.sim().map_err(Failure::Config)?;
    let e = &config.equivalence;
    if e.resolutions.is_empty() || !(e.dt_factor > 0.0) || !(e.t_end >= 0.0) {
        return Err(Failure::Config("[equivalence] needs resolutions, dt_factor > 0 and t_end >= 0".into()));
    }
    sim.t_end = e.t_end;
    let rows = equivalence_sweep(&sim, &e.resolutions, e.dt_factor)?;
    let path = dir.join("equivalence.csv");
    let mut s = format!("{EQUIVALENCE_HEADER}\n");
    for r in &rows {
        s.push_str(&r.csv_row());
        s.push('\n');
    }
    fs::write(&path, s).map_err(io(&path))?;
    for r in &rows {
        println!("equivalence: n = {:4}  max gap {:.3e}  ratio {:?}", r.n, r.linf_max, r.ratio);
    }
    Ok(())
}

#[derive(Serialize)]
struct LagrangianFile {
    inverse_identity_trials: usize,
    inverse_identity_max_residual: f64,
    zero_history_max_norms: [f64; 4],
    sweep: AmplitudeSweep,
}

fn lagrangian_check(config: &Config, dir: &Path) -> Result<(), Failure> {
    let l = &config.lagrangian;
    let params = config.params().map_err(Failure::Config)?;
    let grid = mixtura_core::discretization::Grid1D::new(l.n, config.grid.length, Boundary::Wall)
        .map_err(|e| Failure::Config(e.to_string()))?;
    let star = PointState::new(config.mixture.rho1_star, config.mixture.rho2_star)
        .and_then(|p| psi(p, &params))
        .map_err(|e| Failure::Config(e.to_string()))?;
    let opts = RemainderOptions {
        t: l.t,
        n_quad: l.quadrature_steps,
        delta: l.delta,
    };
    let residual = inverse_identity_residual(l.trials, 2, l.delta, l.seed)?;
    let (mut rest, _) = perturbed_fields(&grid, l.amplitudes.first().copied().unwrap_or(0.0), star.rho, star.h, l.t);
    rest.v.iter_mut().for_each(|v| *v = 0.0);
    let zero = remainders(&grid, &rest, &AtRest, &params, opts)?.max_norms();
    let sweep = amplitude_sweep(&grid, &params, star.rho, star.h, &l.amplitudes, opts)?;
    let path = dir.join("lagrangian.json");
    println!(
        "lagrangian-check: identity residual {residual:.3e}, min slopes {:?}",
        sweep.min_slopes
    );
    write_json(
        &path,
        &LagrangianFile {
            inverse_identity_trials: l.trials,
            inverse_identity_max_residual: residual,
            zero_history_max_norms: zero,
            sweep,
        },
    )
    .map_err(io(&path))
}

fn convergence(config: &Config, dir: &Path) -> Result<(), Failure> {
    let c = &config.convergence;
    let mut sim = config.sim().map_err(Failure::Config)?;
    sim.formulation = mixtura_core::dynamics::Formulation::Primitive;
    let solution = TrigSolution {
        rho1: sim.rho1_star,
        rho2: sim.rho2_star,
        amplitude: c.amplitude,
        length: sim.grid.length(),
    };
    let mut space = sim;
    space.t_end = c.t_end;
    let mut rows = spatial_sweep(&space, &solution, &c.resolutions, c.dt_factor)?;
    let mut time = sim;
    time.grid = mixtura_core::discretization::Grid1D::new(c.temporal_n, sim.grid.length(), sim.grid.bc())
        .map_err(|e| Failure::Config(e.to_string()))?;
    time.t_end = c.temporal_t_end;
    rows.extend(temporal_sweep(&time, &solution, &c.temporal_dt)?);
    let path = dir.join("convergence.csv");
    let mut s = format!("{CONVERGENCE_HEADER}\n");
    for r in &rows {
        s.push_str(&r.csv_row());
        s.push('\n');
    }
    fs::write(&path, s).map_err(io(&path))?;
    for r in &rows {
        println!("convergence: {} n = {} dt = {:.3e} error {:.3e} order {:?}", r.kind, r.errors.n, r.errors.dt, r.errors.l2_total, r.order);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config() -> Config {
        toml::from_str("[mixture]\nm1 = 1.0\nm2 = 2.0\nmu = 0.1\nnu = 0.1\n[grid]\nn = 16\n[time]\ndt = 0.01\nt_end = 0.1\n[output]\ndir = \"from-config\"\n")
            .unwrap()
    }

    #[test]
    fn output_precedence() {
        let c = config();
        assert_eq!(output_dir(Some(Path::new("cli")), Some("env"), &c), PathBuf::from("cli"));
        assert_eq!(output_dir(None, Some("env"), &c), PathBuf::from("env"));
        assert_eq!(output_dir(None, Some(""), &c), PathBuf::from("from-config"));
        assert_eq!(output_dir(None, None, &c), PathBuf::from("from-config"));
    }
}
