use std::io::Write;

use serde::{Deserialize, Serialize};

use super::state::State;
use crate::discretization::{l2_norm, linf_norm, Grid1D, Location};
use crate::error::{MixturaError, Result};
use crate::model::MixtureParams;

pub const SERIES_HEADER: &str = "t,mass_total,mass1,mass2,l2_zeta,l2_u,l2_h,linf_zeta,linf_u,linf_h,min_rho1,max_rho1,min_rho2,max_rho2,picard_iters";

/// Diagnostics of one sample of a run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeSeriesRecord {
    pub t: f64,
    pub mass_total: f64,
    pub mass1: f64,
    pub mass2: f64,
    pub l2_zeta: f64,
    pub l2_u: f64,
    pub l2_h: f64,
    pub linf_zeta: f64,
    pub linf_u: f64,
    pub linf_h: f64,
    pub min_rho1: f64,
    pub max_rho1: f64,
    pub min_rho2: f64,
    pub max_rho2: f64,
    pub picard_iters: usize,
}

fn cell_sum(v: &[f64], dx: f64) -> f64 {
    v.iter().fold(0.0, |acc, x| acc + x * dx)
}

fn min_max(v: &[f64]) -> (f64, f64) {
    v.iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)))
}

/// Perturbations are measured from the spatial means of `rho` and `h`.
pub fn record(state: &State, grid: &Grid1D, params: &MixtureParams, t: f64, picard_iters: usize) -> Result<TimeSeriesRecord> {
    let e = state.entropic(params)?;
    let p = state.primitive(params)?;
    let dx = grid.dx();
    let l = grid.length();
    let mass_total = cell_sum(&e.rho, dx);
    let h_mean = cell_sum(&e.h, dx) / l;
    let rho_mean = mass_total / l;
    let zeta: Vec<f64> = e.rho.iter().map(|r| r - rho_mean).collect();
    let theta: Vec<f64> = e.h.iter().map(|h| h - h_mean).collect();
    let (min_rho1, max_rho1) = min_max(&p.rho1);
    let (min_rho2, max_rho2) = min_max(&p.rho2);
    Ok(TimeSeriesRecord {
        t,
        mass_total,
        mass1: cell_sum(&p.rho1, dx),
        mass2: cell_sum(&p.rho2, dx),
        l2_zeta: l2_norm(&zeta, grid, Location::Cell),
        l2_u: l2_norm(&e.u, grid, Location::Node),
        l2_h: l2_norm(&theta, grid, Location::Cell),
        linf_zeta: linf_norm(&zeta),
        linf_u: linf_norm(&e.u),
        linf_h: linf_norm(&theta),
        min_rho1,
        max_rho1,
        min_rho2,
        max_rho2,
        picard_iters,
    })
}

impl TimeSeriesRecord {
    /// Row in the series CSV format; floats carry 17 significant digits.
    pub fn csv_row(&self) -> String {
        let floats = [
            self.t,
            self.mass_total,
            self.mass1,
            self.mass2,
            self.l2_zeta,
            self.l2_u,
            self.l2_h,
            self.linf_zeta,
            self.linf_u,
            self.linf_h,
            self.min_rho1,
            self.max_rho1,
            self.min_rho2,
            self.max_rho2,
        ];
        let mut s: String = floats.iter().map(|v| format!("{v:.16e},")).collect();
        s.push_str(&self.picard_iters.to_string());
        s
    }

    /// Energy-weighted perturbation norm
    /// `sqrt(a1/(2 a0) |zeta|^2 + a0/2 |u|^2 + a3/2 |h - mean|^2)`.
    pub fn weighted_norm(&self, a0: f64, a1: f64, a3: f64) -> f64 {
        (a1 / (2.0 * a0) * self.l2_zeta.powi(2) + 0.5 * a0 * self.l2_u.powi(2) + 0.5 * a3 * self.l2_h.powi(2)).sqrt()
    }
}

pub fn write_series_csv<W: Write>(records: &[TimeSeriesRecord], mut out: W) -> std::io::Result<()> {
    writeln!(out, "{SERIES_HEADER}")?;
    for r in records {
        writeln!(out, "{}", r.csv_row())?;
    }
    Ok(())
}

/// Least-squares fit of `ln y = intercept - rate * t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub rate: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

pub fn fit_decay(t: &[f64], y: &[f64]) -> Result<DecayFit> {
    if t.len() != y.len() || t.len() < 2 {
        return Err(MixturaError::InvalidParameter(
            "decay fit needs at least two paired samples".into(),
        ));
    }
    if y.iter().any(|v| !(*v > 0.0)) {
        return Err(MixturaError::InvalidParameter(
            "decay fit needs positive samples".into(),
        ));
    }
    let n = t.len() as f64;
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let tm = t.iter().sum::<f64>() / n;
    let lm = ly.iter().sum::<f64>() / n;
    let sxx: f64 = t.iter().map(|x| (x - tm).powi(2)).sum();
    let sxy: f64 = t.iter().zip(&ly).map(|(x, l)| (x - tm) * (l - lm)).sum();
    let syy: f64 = ly.iter().map(|l| (l - lm).powi(2)).sum();
    if sxx == 0.0 {
        return Err(MixturaError::InvalidParameter("decay fit needs distinct times".into()));
    }
    let slope = sxy / sxx;
    let r_squared = if syy == 0.0 { 1.0 } else { (sxy * sxy / (sxx * syy)).clamp(0.0, 1.0) };
    Ok(DecayFit {
        rate: -slope,
        intercept: lm - slope * tm,
        r_squared,
    })
}

/// Fit over the trailing `window` fraction of the samples.
pub fn fit_decay_tail(t: &[f64], y: &[f64], window: f64) -> Result<DecayFit> {
    let n = t.len();
    let start = ((1.0 - window.clamp(0.0, 1.0)) * n as f64).floor() as usize;
    fit_decay(&t[start.min(n)..], &y[start.min(n)..])
}
