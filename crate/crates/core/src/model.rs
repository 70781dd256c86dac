//! Constitutive laws of the binary ideal-gas mixture.
//!
//! The mixture is described either by the partial densities `(rho1, rho2)` or by
//! the entropic pair `(h, rho)` with
//!
//! ```text
//! h   = ln(rho2) / m2 - ln(rho1) / m1
//! rho = rho1 + rho2
//! ```
//!
//! [`psi`] maps partial densities to entropic variables and [`phi`] inverts it.
//! The gas constant is 1 throughout, so the pressure is `rho1/m1 + rho2/m2`.

use serde::{Deserialize, Serialize};

use crate::error::{MixturaError, Result};

/// Molar masses and viscosities of the mixture.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixtureParams {
    m1: f64,
    m2: f64,
    mu: f64,
    nu: f64,
}

impl MixtureParams {
    /// Validates and builds the parameter set. Equal molar masses are rejected.
    pub fn new(m1: f64, m2: f64, mu: f64, nu: f64) -> Result<Self> {
        for (name, v) in [("m1", m1), ("m2", m2), ("mu", mu), ("nu", nu)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(MixturaError::InvalidParameter(format!(
                    "{name} must be finite and positive, got {v}"
                )));
            }
        }
        if m1 == m2 {
            return Err(MixturaError::InvalidParameter(format!(
                "molar masses must differ, got m1 = m2 = {m1}"
            )));
        }
        Ok(Self { m1, m2, mu, nu })
    }

    pub fn m1(&self) -> f64 {
        self.m1
    }

    pub fn m2(&self) -> f64 {
        self.m2
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    /// Effective 1-D viscosity: the stress divergence reduces to `(mu + nu) u_xx`.
    pub fn viscosity(&self) -> f64 {
        self.mu + self.nu
    }
}

/// Partial densities at a point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointState {
    pub rho1: f64,
    pub rho2: f64,
}

impl PointState {
    pub fn new(rho1: f64, rho2: f64) -> Result<Self> {
        let p = Self { rho1, rho2 };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rho1.is_finite() && self.rho1 > 0.0) {
            return Err(MixturaError::Domain(format!(
                "rho1 must be positive, got {}",
                self.rho1
            )));
        }
        if !(self.rho2.is_finite() && self.rho2 > 0.0) {
            return Err(MixturaError::Domain(format!(
                "rho2 must be positive, got {}",
                self.rho2
            )));
        }
        Ok(())
    }

    pub fn total(&self) -> f64 {
        self.rho1 + self.rho2
    }
}

/// Entropic variable `h` and total density `rho`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EntropicPoint {
    pub h: f64,
    pub rho: f64,
}

/// Mixture pressure `rho1/m1 + rho2/m2`.
pub fn pressure(p: PointState, params: &MixtureParams) -> Result<f64> {
    p.validate()?;
    Ok(p.rho1 / params.m1 + p.rho2 / params.m2)
}

/// `Sigma_rho = m1 rho1 + m2 rho2`.
pub fn sigma(p: PointState, params: &MixtureParams) -> Result<f64> {
    p.validate()?;
    Ok(params.m1 * p.rho1 + params.m2 * p.rho2)
}

/// Forward change of variables `(rho1, rho2) -> (h, rho)`.
pub fn psi(p: PointState, params: &MixtureParams) -> Result<EntropicPoint> {
    p.validate()?;
    Ok(EntropicPoint {
        h: p.rho2.ln() / params.m2 - p.rho1.ln() / params.m1,
        rho: p.rho1 + p.rho2,
    })
}

const PHI_TOL: f64 = 1e-14;
const PHI_REL_TOL: f64 = 1e-13;
const PHI_MAX_ITER: usize = 100;

/// Inverse change of variables `(h, rho) -> (rho1, rho2)`.
///
/// At fixed `rho`, `h` is strictly decreasing in `rho1`, so the inverse is a
/// scalar monotone root. The root is sought for whichever species is the
/// smaller one, in the variable `s = ln(x)`, with Newton steps safeguarded by
/// bisection on a bracket of width at most `ln(2) * max(m1, m2) / min(m1, m2)`.
pub fn phi(e: EntropicPoint, params: &MixtureParams) -> Result<PointState> {
    if !(e.rho.is_finite() && e.rho > 0.0) {
        return Err(MixturaError::Domain(format!(
            "rho must be positive, got {}",
            e.rho
        )));
    }
    if !e.h.is_finite() {
        return Err(MixturaError::Domain(format!("h must be finite, got {}", e.h)));
    }
    let (m1, m2) = (params.m1, params.m2);
    let half = 0.5 * e.rho;
    let ln_half = half.ln();

    // Relation for the small species x: ln(x)/mx = ln(rho - x)/my + sign*h.
    // rho1 <= rho/2 exactly when the rho1-branch residual at x = rho/2 is >= 0.
    let rho1_small = ln_half / m1 - ln_half / m2 + e.h >= 0.0;
    let (mx, my, sign) = if rho1_small {
        (m1, m2, -1.0)
    } else {
        (m2, m1, 1.0)
    };

    let residual = |s: f64| -> f64 {
        let x = s.exp();
        s / mx - (e.rho - x).ln() / my - sign * e.h
    };
    let slope = |s: f64| -> f64 {
        let x = s.exp();
        1.0 / mx + x / (my * (e.rho - x))
    };

    let mut lo = mx * (ln_half / my + sign * e.h);
    let mut hi = (mx * (e.rho.ln() / my + sign * e.h)).min(ln_half);
    if lo > hi {
        // Only possible through rounding when the root sits at rho/2.
        lo = hi;
    }
    let mut s = 0.5 * (lo + hi);
    let mut converged = false;
    for _ in 0..PHI_MAX_ITER {
        let f = residual(s);
        if f == 0.0 {
            converged = true;
            break;
        }
        if f > 0.0 {
            hi = s;
        } else {
            lo = s;
        }
        let mut next = s - f / slope(s);
        if !(next > lo && next < hi) || !next.is_finite() {
            next = 0.5 * (lo + hi);
        }
        let step = (next - s).abs();
        s = next;
        // Absolute tolerance on x, plus a relative one so tiny densities are
        // resolved to full precision as well.
        let abs_step = step * s.exp();
        if (abs_step <= PHI_TOL && step <= PHI_REL_TOL)
            || hi - lo <= 4.0 * f64::EPSILON * s.abs().max(1.0)
        {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(MixturaError::RootFinding {
            iterations: PHI_MAX_ITER,
            h: e.h,
            rho: e.rho,
        });
    }
    let x = s.exp();
    let y = e.rho - x;
    let p = if rho1_small {
        PointState { rho1: x, rho2: y }
    } else {
        PointState { rho1: y, rho2: x }
    };
    p.validate()?;
    Ok(p)
}

/// Diffusion flux of species 1 from partial-density gradients:
/// `F1 = -(1/p) [ (rho2/rho) d(rho1/m1) - (rho1/rho) d(rho2/m2) ]`.
pub fn flux_closed_form(
    p: PointState,
    grad_rho1: f64,
    grad_rho2: f64,
    params: &MixtureParams,
) -> Result<f64> {
    let pr = pressure(p, params)?;
    let rho = p.total();
    Ok(-(p.rho2 / rho * grad_rho1 / params.m1 - p.rho1 / rho * grad_rho2 / params.m2) / pr)
}

/// Both species fluxes; the second is the negation of the first.
pub fn species_fluxes(
    p: PointState,
    grad_rho1: f64,
    grad_rho2: f64,
    params: &MixtureParams,
) -> Result<(f64, f64)> {
    let f1 = flux_closed_form(p, grad_rho1, grad_rho2, params)?;
    Ok((f1, -f1))
}

/// Diffusion flux of species 1 in entropic form: `F1 = rho1 rho2 / (p rho) dh`.
pub fn flux_entropic(p: PointState, grad_h: f64, params: &MixtureParams) -> Result<f64> {
    Ok(diffusivity(p, params)? * grad_h)
}

/// The positive factor `rho1 rho2 / (p rho)` multiplying `grad h` in the flux.
pub fn diffusivity(p: PointState, params: &MixtureParams) -> Result<f64> {
    let pr = pressure(p, params)?;
    Ok(p.rho1 * p.rho2 / (pr * p.total()))
}

/// Recovers `(grad rho1, grad rho2)` from `(grad rho, grad h)`.
pub fn gradient_reconstruction(
    p: PointState,
    grad_rho: f64,
    grad_h: f64,
    params: &MixtureParams,
) -> Result<(f64, f64)> {
    let s = sigma(p, params)?;
    let a = params.m1 * p.rho1;
    let b = params.m2 * p.rho2;
    let cross = a * b / s;
    let g1 = a / s * grad_rho - cross * grad_h;
    let g2 = b / s * grad_rho + cross * grad_h;
    Ok((g1, g2))
}

/// Pointwise coefficients of the entropic system at a state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointCoefficients {
    /// `Sigma_rho`
    pub sigma: f64,
    /// `rho / Sigma_rho`, multiplies `grad rho` in the momentum balance.
    pub pressure_weight: f64,
    /// `(m1 - m2) rho1 rho2 / Sigma_rho`, couples `grad h` and `div u`.
    pub coupling: f64,
    /// `m1 m2 rho1 rho2 / Sigma_rho`, multiplies the material derivative of `h`.
    pub capacity: f64,
    /// `rho1 rho2 / (p rho)`
    pub diffusivity: f64,
    pub pressure: f64,
}

pub fn point_coefficients(p: PointState, params: &MixtureParams) -> Result<PointCoefficients> {
    let s = sigma(p, params)?;
    let pr = pressure(p, params)?;
    let rho = p.total();
    let prod = p.rho1 * p.rho2;
    Ok(PointCoefficients {
        sigma: s,
        pressure_weight: rho / s,
        coupling: (params.m1 - params.m2) * prod / s,
        capacity: params.m1 * params.m2 * prod / s,
        diffusivity: prod / (pr * rho),
        pressure: pr,
    })
}

/// Coefficient fields of the linearization about a non-constant reference state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpatialCoefficients {
    pub rho0: Vec<f64>,
    pub sigma_rho0: Vec<f64>,
    pub gamma1: Vec<f64>,
    pub gamma2: Vec<f64>,
    pub gamma3: Vec<f64>,
    pub gamma4: Vec<f64>,
    pub p0: Vec<f64>,
}

impl SpatialCoefficients {
    pub fn len(&self) -> usize {
        self.rho0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rho0.is_empty()
    }

    /// Checks the positivity of `rho0, gamma1, gamma3, gamma4, sigma_rho0, p0`
    /// and that all fields have a common length.
    pub fn validate(&self) -> Result<()> {
        let n = self.rho0.len();
        let fields: [(&str, &Vec<f64>, bool); 7] = [
            ("rho0", &self.rho0, true),
            ("sigma_rho0", &self.sigma_rho0, true),
            ("gamma1", &self.gamma1, true),
            ("gamma2", &self.gamma2, false),
            ("gamma3", &self.gamma3, true),
            ("gamma4", &self.gamma4, true),
            ("p0", &self.p0, true),
        ];
        for (name, f, positive) in fields {
            if f.len() != n {
                return Err(MixturaError::Domain(format!(
                    "coefficient field {name} has length {} but rho0 has {n}",
                    f.len()
                )));
            }
            if let Some((i, v)) = f
                .iter()
                .enumerate()
                .find(|(_, v)| !v.is_finite() || (positive && **v <= 0.0))
            {
                return Err(MixturaError::Domain(format!(
                    "coefficient {name}[{i}] = {v} violates positivity"
                )));
            }
        }
        Ok(())
    }

    /// Constant fields of length `n` built from equilibrium coefficients.
    pub fn uniform(eq: &EquilibriumCoefficients, n: usize) -> Self {
        Self {
            rho0: vec![eq.a0; n],
            sigma_rho0: vec![eq.sigma_rho_star; n],
            gamma1: vec![eq.a1; n],
            gamma2: vec![eq.a2; n],
            gamma3: vec![eq.a3; n],
            gamma4: vec![eq.a4; n],
            p0: vec![eq.p_star; n],
        }
    }
}

/// Coefficients `gamma_i(x)` of the linearization at `(rho10(x), rho20(x), u = 0)`.
pub fn spatial_coefficients(
    rho10: &[f64],
    rho20: &[f64],
    params: &MixtureParams,
) -> Result<SpatialCoefficients> {
    if rho10.len() != rho20.len() {
        return Err(MixturaError::Domain(format!(
            "density fields differ in length: {} vs {}",
            rho10.len(),
            rho20.len()
        )));
    }
    let n = rho10.len();
    let mut out = SpatialCoefficients {
        rho0: Vec::with_capacity(n),
        sigma_rho0: Vec::with_capacity(n),
        gamma1: Vec::with_capacity(n),
        gamma2: Vec::with_capacity(n),
        gamma3: Vec::with_capacity(n),
        gamma4: Vec::with_capacity(n),
        p0: Vec::with_capacity(n),
    };
    for (&r1, &r2) in rho10.iter().zip(rho20) {
        let c = point_coefficients(PointState::new(r1, r2)?, params)?;
        out.rho0.push(r1 + r2);
        out.sigma_rho0.push(c.sigma);
        out.gamma1.push(c.pressure_weight);
        out.gamma2.push(c.coupling);
        out.gamma3.push(c.capacity);
        out.gamma4.push(c.diffusivity);
        out.p0.push(c.pressure);
    }
    Ok(out)
}

/// Coefficients of the constant-state linearization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumCoefficients {
    pub a0: f64,
    pub a1: f64,
    pub a2: f64,
    pub a3: f64,
    pub a4: f64,
    pub sigma_rho_star: f64,
    pub p_star: f64,
}

pub fn equilibrium_coefficients(
    rho1_star: f64,
    rho2_star: f64,
    params: &MixtureParams,
) -> Result<EquilibriumCoefficients> {
    let p = PointState::new(rho1_star, rho2_star)?;
    let c = point_coefficients(p, params)?;
    let a0 = p.total();
    Ok(EquilibriumCoefficients {
        a0,
        a1: a0 / c.sigma,
        a2: c.coupling,
        a3: c.capacity,
        a4: c.diffusivity,
        sigma_rho_star: c.sigma,
        p_star: c.pressure,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn params(m1: f64, m2: f64) -> MixtureParams {
        MixtureParams::new(m1, m2, 0.1, 0.1).unwrap()
    }

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn rejects_bad_params() {
        assert!(MixtureParams::new(1.0, 1.0, 0.1, 0.1).is_err());
        assert!(MixtureParams::new(0.0, 1.0, 0.1, 0.1).is_err());
        assert!(MixtureParams::new(1.0, 2.0, -0.1, 0.1).is_err());
        assert!(MixtureParams::new(1.0, 2.0, 0.1, f64::NAN).is_err());
    }

    #[test]
    fn pressure_values() {
        let p = pressure(PointState::new(1.0, 2.0).unwrap(), &params(1.0, 2.0)).unwrap();
        assert_eq!(p, 2.0);
        let p = pressure(PointState { rho1: 0.3, rho2: 0.7 }, &params(2.0, 5.0)).unwrap();
        assert!(close(p, 0.29, 1e-15));
        // m1 = m2 = 1 is rejected by MixtureParams; evaluate the law directly.
        let raw = MixtureParams {
            m1: 1.0,
            m2: 1.0,
            mu: 0.1,
            nu: 0.1,
        };
        assert_eq!(pressure(PointState { rho1: 1.0, rho2: 1.0 }, &raw).unwrap(), 2.0);
    }

    #[test]
    fn pressure_domain_error() {
        let err = pressure(PointState { rho1: 0.0, rho2: 1.0 }, &params(1.0, 2.0));
        assert!(matches!(err, Err(MixturaError::Domain(_))));
        assert!(PointState::new(1.0, -1.0).is_err());
    }

    #[test]
    fn psi_values() {
        let e = psi(PointState { rho1: 1.0, rho2: 2.0 }, &params(1.0, 2.0)).unwrap();
        assert!(close(e.h, 0.5 * 2f64.ln(), 1e-15));
        assert_eq!(e.rho, 3.0);
        let raw = MixtureParams {
            m1: 1.0,
            m2: 1.0,
            mu: 0.1,
            nu: 0.1,
        };
        let e = psi(PointState { rho1: 1.0, rho2: 1.0 }, &raw).unwrap();
        assert_eq!(e.h, 0.0);
        assert_eq!(e.rho, 2.0);
    }

    #[test]
    fn phi_values() {
        let raw = MixtureParams {
            m1: 1.0,
            m2: 1.0,
            mu: 0.1,
            nu: 0.1,
        };
        let p = phi(EntropicPoint { h: 0.0, rho: 2.0 }, &raw).unwrap();
        assert!(close(p.rho1, 1.0, 1e-14) && close(p.rho2, 1.0, 1e-14));

        let p = phi(
            EntropicPoint {
                h: 0.5 * 2f64.ln(),
                rho: 3.0,
            },
            &params(1.0, 2.0),
        )
        .unwrap();
        assert!(close(p.rho1, 1.0, 1e-13), "{p:?}");
        assert!(close(p.rho2, 2.0, 1e-13), "{p:?}");
    }

    #[test]
    fn phi_domain_errors() {
        let pr = params(1.0, 2.0);
        assert!(phi(EntropicPoint { h: 0.0, rho: 0.0 }, &pr).is_err());
        assert!(phi(EntropicPoint { h: f64::NAN, rho: 1.0 }, &pr).is_err());
    }

    #[test]
    fn phi_extreme_h() {
        let pr = params(1.0, 2.0);
        for h in [-40.0, -10.0, 10.0, 40.0] {
            let p = phi(EntropicPoint { h, rho: 1.5 }, &pr).unwrap();
            let back = psi(p, &pr).unwrap();
            assert!(close(back.h, h, 1e-12 * h.abs()), "h = {h}: {back:?}");
            assert!(close(p.rho1 + p.rho2, 1.5, 1e-15));
        }
    }

    #[test]
    fn h_is_strictly_decreasing_in_rho1() {
        let pr = params(1.0, 2.0);
        let rho = 2.0;
        let hs: Vec<f64> = (1..200)
            .map(|i| {
                let r1 = rho * i as f64 / 200.0;
                psi(PointState { rho1: r1, rho2: rho - r1 }, &pr).unwrap().h
            })
            .collect();
        assert!(hs.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn flux_values() {
        let pr = params(1.0, 2.0);
        let p = PointState { rho1: 1.0, rho2: 1.0 };
        assert_eq!(flux_closed_form(p, 0.0, 0.0, &pr).unwrap(), 0.0);
        assert!(close(flux_closed_form(p, 1.0, 0.0, &pr).unwrap(), -1.0 / 3.0, 1e-15));
        assert_eq!(flux_entropic(p, 0.0, &pr).unwrap(), 0.0);
        assert!(close(flux_entropic(p, 1.0, &pr).unwrap(), 1.0 / 3.0, 1e-15));
        let (f1, f2) = species_fluxes(p, 0.3, -0.7, &pr).unwrap();
        assert_eq!(f1 + f2, 0.0);
    }

    #[test]
    fn gradient_reconstruction_zero() {
        let pr = params(1.0, 2.0);
        let g = gradient_reconstruction(PointState { rho1: 0.4, rho2: 3.0 }, 0.0, 0.0, &pr).unwrap();
        assert_eq!(g, (0.0, 0.0));
    }

    #[test]
    fn spatial_coefficient_values() {
        let c = spatial_coefficients(&[1.0], &[1.0], &params(1.0, 2.0)).unwrap();
        assert!(close(c.sigma_rho0[0], 3.0, 1e-15));
        assert!(close(c.gamma1[0], 2.0 / 3.0, 1e-15));
        assert!(close(c.gamma2[0], -1.0 / 3.0, 1e-15));
        assert!(close(c.gamma3[0], 2.0 / 3.0, 1e-15));
        assert!(close(c.p0[0], 1.5, 1e-15));
        assert!(close(c.gamma4[0], 1.0 / 3.0, 1e-15));
        c.validate().unwrap();
        assert!(spatial_coefficients(&[1.0, 0.0], &[1.0, 1.0], &params(1.0, 2.0)).is_err());
        assert!(spatial_coefficients(&[1.0], &[1.0, 1.0], &params(1.0, 2.0)).is_err());
    }

    #[test]
    fn gamma2_vanishes_for_equal_masses() {
        // Equal masses are not a valid MixtureParams; check the limit directly.
        let raw = MixtureParams {
            m1: 1.0,
            m2: 1.0,
            mu: 0.1,
            nu: 0.1,
        };
        let c = point_coefficients(PointState { rho1: 1.0, rho2: 1.0 }, &raw).unwrap();
        assert_eq!(c.coupling, 0.0);
    }

    #[test]
    fn equilibrium_values_and_swap() {
        let a = equilibrium_coefficients(1.0, 1.0, &params(1.0, 2.0)).unwrap();
        assert!(close(a.a0, 2.0, 1e-15));
        assert!(close(a.a1, 2.0 / 3.0, 1e-15));
        assert!(close(a.a2, -1.0 / 3.0, 1e-15));
        assert!(close(a.a3, 2.0 / 3.0, 1e-15));
        assert!(close(a.a4, 1.0 / 3.0, 1e-15));
        let b = equilibrium_coefficients(1.0, 1.0, &params(2.0, 1.0)).unwrap();
        assert_eq!(b.a2, -a.a2);
        assert!(equilibrium_coefficients(-1.0, 1.0, &params(1.0, 2.0)).is_err());
    }

    #[test]
    fn spatial_matches_equilibrium_at_constant_state() {
        let pr = params(1.3, 0.7);
        let eq = equilibrium_coefficients(0.8, 1.7, &pr).unwrap();
        let sc = spatial_coefficients(&[0.8; 5], &[1.7; 5], &pr).unwrap();
        assert_eq!(sc, SpatialCoefficients::uniform(&eq, 5));
    }

    fn state() -> impl Strategy<Value = (f64, f64)> {
        (0.01f64..20.0, 0.01f64..20.0)
    }

    fn masses() -> impl Strategy<Value = (f64, f64)> {
        (0.2f64..5.0, 0.2f64..5.0).prop_filter("distinct masses", |(a, b)| (a - b).abs() > 1e-3)
    }

    proptest! {
        #[test]
        fn roundtrip_phi_psi((r1, r2) in state(), (m1, m2) in masses()) {
            let pr = params(m1, m2);
            let p = PointState::new(r1, r2).unwrap();
            let back = phi(psi(p, &pr).unwrap(), &pr).unwrap();
            prop_assert!((back.rho1 - r1).abs() <= 1e-12 * r1.max(1.0));
            prop_assert!((back.rho2 - r2).abs() <= 1e-12 * r2.max(1.0));
        }

        #[test]
        fn roundtrip_psi_phi(h in -8.0f64..8.0, rho in 0.05f64..30.0, (m1, m2) in masses()) {
            let pr = params(m1, m2);
            let p = phi(EntropicPoint { h, rho }, &pr).unwrap();
            let e = psi(p, &pr).unwrap();
            prop_assert!((e.h - h).abs() <= 1e-12 * h.abs().max(1.0));
            prop_assert!((e.rho - rho).abs() <= 1e-12 * rho);
        }

        #[test]
        fn reconstruction_row_sum(
            (r1, r2) in state(), (m1, m2) in masses(),
            gr in -10.0f64..10.0, gh in -10.0f64..10.0,
        ) {
            let pr = params(m1, m2);
            let p = PointState::new(r1, r2).unwrap();
            let (g1, g2) = gradient_reconstruction(p, gr, gh, &pr).unwrap();
            let scale = gr.abs() + gh.abs() * m1 * r1 * m2 * r2 / (m1 * r1 + m2 * r2) + 1.0;
            prop_assert!((g1 + g2 - gr).abs() <= 1e-14 * scale);
        }

        #[test]
        fn pressure_gradient_identity(
            (r1, r2) in state(), (m1, m2) in masses(),
            gr in -10.0f64..10.0, gh in -10.0f64..10.0,
        ) {
            let pr = params(m1, m2);
            let p = PointState::new(r1, r2).unwrap();
            let s = m1 * r1 + m2 * r2;
            let entropic = (r1 + r2) / s * gr + (m1 - m2) * r1 * r2 / s * gh;
            let (g1, g2) = gradient_reconstruction(p, gr, gh, &pr).unwrap();
            let primitive = g1 / m1 + g2 / m2;
            let scale = 1.0 + entropic.abs() + (g1 / m1).abs() + (g2 / m2).abs();
            prop_assert!((entropic - primitive).abs() <= 1e-13 * scale);
        }

        #[test]
        fn flux_forms_agree(
            (r1, r2) in state(), (m1, m2) in masses(),
            gr in -10.0f64..10.0, gh in -10.0f64..10.0,
        ) {
            let pr = params(m1, m2);
            let p = PointState::new(r1, r2).unwrap();
            let (g1, g2) = gradient_reconstruction(p, gr, gh, &pr).unwrap();
            let closed = flux_closed_form(p, g1, g2, &pr).unwrap();
            let entropic = flux_entropic(p, gh, &pr).unwrap();
            let pres = pressure(p, &pr).unwrap();
            let rho = r1 + r2;
            let scale = 1.0 + (r2 / rho * g1 / m1).abs() / pres + (r1 / rho * g2 / m2).abs() / pres;
            prop_assert!((closed - entropic).abs() <= 1e-13 * scale);
        }

        #[test]
        fn coefficients_positive((r1, r2) in state(), (m1, m2) in masses()) {
            let pr = params(m1, m2);
            let c = spatial_coefficients(&[r1], &[r2], &pr).unwrap();
            prop_assert!(c.gamma1[0] > 0.0 && c.gamma3[0] > 0.0 && c.gamma4[0] > 0.0);
            prop_assert_eq!(c.gamma2[0].signum(), (m1 - m2).signum());
            let a = equilibrium_coefficients(r1, r2, &pr).unwrap();
            prop_assert!(a.a0 > 0.0 && a.a1 > 0.0 && a.a3 > 0.0 && a.a4 > 0.0);
            prop_assert!(flux_entropic(PointState::new(r1, r2).unwrap(), 1.0, &pr).unwrap() > 0.0);
        }
    }
}
