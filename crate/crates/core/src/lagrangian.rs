//! Lagrangian-coordinate algebra.
//!
//! With `x = y + int_0^t v(y, s) ds`, the Jacobian `dx/dy = I + k` where
//! `k = int_0^t grad_y v ds`. Its inverse is written `I + V0(k)` and converts
//! reference-coordinate derivatives into spatial ones. Rewriting the entropic
//! system in the reference frame leaves the Eulerian operators in `y` plus the
//! nonlinear remainders computed by [`remainders`], specialized to one space
//! dimension.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::discretization::{gradient_op, laplacian_op, Boundary, Grid1D};
use crate::error::{MixturaError, Result};
use crate::model::{phi, point_coefficients, EntropicPoint, MixtureParams};

pub const DEFAULT_DELTA: f64 = 0.5;
pub const DEFAULT_QUADRATURE_STEPS: usize = 64;

/// Lagrangian velocity `v(y, s)` with its first two reference derivatives.
pub trait VelocityHistory {
    fn velocity(&self, y: f64, s: f64) -> f64;
    fn gradient(&self, y: f64, s: f64) -> f64;
    fn second_gradient(&self, y: f64, s: f64) -> f64;
}

/// History given by closures for `v`, `v_y` and `v_yy`.
pub struct AnalyticHistory<V, G, H> {
    pub v: V,
    pub v_y: G,
    pub v_yy: H,
}

impl<V, G, H> VelocityHistory for AnalyticHistory<V, G, H>
where
    V: Fn(f64, f64) -> f64,
    G: Fn(f64, f64) -> f64,
    H: Fn(f64, f64) -> f64,
{
    fn velocity(&self, y: f64, s: f64) -> f64 {
        (self.v)(y, s)
    }

    fn gradient(&self, y: f64, s: f64) -> f64 {
        (self.v_y)(y, s)
    }

    fn second_gradient(&self, y: f64, s: f64) -> f64 {
        (self.v_yy)(y, s)
    }
}

/// `scale * inner`, used for amplitude sweeps.
pub struct ScaledHistory<'a, H: ?Sized> {
    pub inner: &'a H,
    pub scale: f64,
}

impl<H: VelocityHistory + ?Sized> VelocityHistory for ScaledHistory<'_, H> {
    fn velocity(&self, y: f64, s: f64) -> f64 {
        self.scale * self.inner.velocity(y, s)
    }

    fn gradient(&self, y: f64, s: f64) -> f64 {
        self.scale * self.inner.gradient(y, s)
    }

    fn second_gradient(&self, y: f64, s: f64) -> f64 {
        self.scale * self.inner.second_gradient(y, s)
    }
}

/// The identically zero history.
pub struct AtRest;

impl VelocityHistory for AtRest {
    fn velocity(&self, _: f64, _: f64) -> f64 {
        0.0
    }

    fn gradient(&self, _: f64, _: f64) -> f64 {
        0.0
    }

    fn second_gradient(&self, _: f64, _: f64) -> f64 {
        0.0
    }
}

/// Composite Simpson rule on `[0, t]`; `steps` is rounded up to an even number.
pub fn simpson(f: impl Fn(f64) -> f64, t: f64, steps: usize) -> f64 {
    if t == 0.0 {
        return 0.0;
    }
    let m = (steps.max(2) + 1) & !1;
    let h = t / m as f64;
    let mut acc = f(0.0) + f(t);
    for i in 1..m {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(i as f64 * h);
    }
    acc * h / 3.0
}

/// Position at time `t` of the particle labelled `y`.
pub fn flow_map<H: VelocityHistory + ?Sized>(history: &H, y: f64, t: f64, n_quad: usize) -> f64 {
    y + simpson(|s| history.velocity(y, s), t, n_quad)
}

/// Time-integrated velocity gradient at one reference point.
#[derive(Debug, Clone, PartialEq)]
pub struct DeformationAccumulator {
    /// `k = int_0^t grad_y v ds` (1 x 1 in one dimension).
    pub k: DMatrix<f64>,
    /// `int_0^t v_yy ds`, the reference derivative of `k`.
    pub k_gradient: f64,
    pub delta_bound: f64,
}

impl DeformationAccumulator {
    pub fn magnitude(&self) -> f64 {
        self.k.norm()
    }

    pub fn is_small(&self) -> bool {
        self.magnitude() <= self.delta_bound
    }

    pub fn check_smallness(&self) -> Result<()> {
        if self.is_small() {
            Ok(())
        } else {
            Err(MixturaError::Smallness {
                max_k: self.magnitude(),
                delta: self.delta_bound,
            })
        }
    }

    pub fn v0(&self) -> Result<DMatrix<f64>> {
        v0_matrix(&self.k)
    }
}

pub fn accumulate_kv<H: VelocityHistory + ?Sized>(
    history: &H,
    y: f64,
    t: f64,
    n_quad: usize,
    delta_bound: f64,
) -> DeformationAccumulator {
    let k = simpson(|s| history.gradient(y, s), t, n_quad);
    let k_gradient = simpson(|s| history.second_gradient(y, s), t, n_quad);
    DeformationAccumulator {
        k: DMatrix::from_element(1, 1, k),
        k_gradient,
        delta_bound,
    }
}

/// `V0(k) = (I + k)^{-1} - I`.
pub fn v0_matrix(k: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if !k.is_square() {
        return Err(MixturaError::Singular(format!(
            "k must be square, got {}x{}",
            k.nrows(),
            k.ncols()
        )));
    }
    let n = k.nrows();
    let jac = DMatrix::<f64>::identity(n, n) + k;
    let inv = jac
        .try_inverse()
        .ok_or_else(|| MixturaError::Singular("I + k is not invertible".into()))?;
    if inv.iter().any(|v| !v.is_finite()) {
        return Err(MixturaError::Singular("I + k is numerically singular".into()));
    }
    Ok(inv - DMatrix::<f64>::identity(n, n))
}

/// Spatial gradient from the reference gradient:
/// `grad_x f = (I + V0(k))^T grad_y f`, with `k_ij = int d v_i / d y_j`.
/// In one dimension the transpose is immaterial.
pub fn transform_gradient(grad_y: &DVector<f64>, k: &DMatrix<f64>) -> Result<DVector<f64>> {
    let v0 = v0_matrix(k)?;
    let n = k.nrows();
    if grad_y.len() != n {
        return Err(MixturaError::InvalidParameter(format!(
            "gradient has {} components, k is {n}x{n}",
            grad_y.len()
        )));
    }
    Ok((DMatrix::<f64>::identity(n, n) + v0).transpose() * grad_y)
}

/// Spatial divergence `div_x u = div_y v + sum_ij V0_ji d v_i / d y_j` from the
/// reference velocity gradient `dv[(i, j)] = d v_i / d y_j`.
pub fn transform_divergence(dv: &DMatrix<f64>, k: &DMatrix<f64>) -> Result<f64> {
    let v0 = v0_matrix(k)?;
    if dv.shape() != k.shape() {
        return Err(MixturaError::InvalidParameter(
            "velocity gradient and k differ in shape".into(),
        ));
    }
    Ok(dv.trace() + v0.transpose().component_mul(dv).sum())
}

/// One-dimensional `V0(k) = -k / (1 + k)` and its derivative `-1 / (1 + k)^2`.
fn v0_scalar(k: f64) -> (f64, f64) {
    let j = 1.0 + k;
    (1.0 / j - 1.0, -1.0 / (j * j))
}

/// Part of `d_x(d_x f)` beyond `f_yy` in reference coordinates:
/// `(2 V + V^2) f_yy + (1 + V) V'(k) k_y f_y`.
pub(crate) fn second_order_remainder(v0: f64, dv0: f64, k_y: f64, f_y: f64, f_yy: f64) -> f64 {
    (2.0 * v0 + v0 * v0) * f_yy + (1.0 + v0) * dv0 * k_y * f_y
}

/// Reference-frame fields `U = (eta, v, theta)` sampled at the nodes of a wall grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LagrangianFields {
    pub eta: Vec<f64>,
    pub v: Vec<f64>,
    pub theta: Vec<f64>,
}

/// Nonlinear remainders of the reference-frame system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Remainders {
    pub r1: Vec<f64>,
    pub r2: Vec<f64>,
    pub r3: Vec<f64>,
    /// Boundary remainder at the left (`n = -1`) and right (`n = +1`) walls.
    pub r4: [f64; 2],
}

impl Remainders {
    /// Max norms `[|R1|, |R2|, |R3|, |R4|]`.
    pub fn max_norms(&self) -> [f64; 4] {
        let m = |v: &[f64]| v.iter().fold(0.0_f64, |a, b| a.max(b.abs()));
        [m(&self.r1), m(&self.r2), m(&self.r3), m(&self.r4)]
    }
}

/// Options for [`remainders`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RemainderOptions {
    pub t: f64,
    pub n_quad: usize,
    pub delta: f64,
}

impl Default for RemainderOptions {
    fn default() -> Self {
        Self {
            t: 1.0,
            n_quad: DEFAULT_QUADRATURE_STEPS,
            delta: DEFAULT_DELTA,
        }
    }
}

/// Evaluates `R1..R4` on the nodes of a wall grid.
///
/// Reference derivatives of the fields use the node operators of
/// [`crate::discretization`]; `k` and `k_y` come from the velocity history by
/// quadrature. Returns a smallness error when `sup |k| > delta`.
pub fn remainders<H: VelocityHistory + ?Sized>(
    grid: &Grid1D,
    fields: &LagrangianFields,
    history: &H,
    params: &MixtureParams,
    opts: RemainderOptions,
) -> Result<Remainders> {
    if grid.bc() != Boundary::Wall {
        return Err(MixturaError::InvalidParameter(
            "remainders are defined on wall grids".into(),
        ));
    }
    let n = grid.n_nodes();
    for (name, f) in [("eta", &fields.eta), ("v", &fields.v), ("theta", &fields.theta)] {
        if f.len() != n {
            return Err(MixturaError::InvalidParameter(format!(
                "{name} has {} values, grid has {n} nodes",
                f.len()
            )));
        }
    }
    let ys = grid.coordinates(crate::discretization::Location::Node);
    let acc: Vec<DeformationAccumulator> = ys
        .iter()
        .map(|&y| accumulate_kv(history, y, opts.t, opts.n_quad, opts.delta))
        .collect();
    let max_k = acc.iter().map(|a| a.magnitude()).fold(0.0, f64::max);
    if max_k > opts.delta {
        return Err(MixturaError::Smallness {
            max_k,
            delta: opts.delta,
        });
    }

    let grad = gradient_op(grid);
    let lap = laplacian_op(grid);
    let eta_y = grad.apply(&fields.eta);
    let v_y = grad.apply(&fields.v);
    let v_yy = lap.apply(&fields.v);
    let th_y = grad.apply(&fields.theta);
    let th_yy = lap.apply(&fields.theta);

    let mut sigma = Vec::with_capacity(n);
    let mut coupling = Vec::with_capacity(n);
    let mut diffusivity = Vec::with_capacity(n);
    for (&eta, &theta) in fields.eta.iter().zip(&fields.theta) {
        let p = phi(EntropicPoint { h: theta, rho: eta }, params)?;
        let c = point_coefficients(p, params)?;
        sigma.push(c.sigma);
        coupling.push(c.coupling);
        diffusivity.push(c.diffusivity);
    }
    let diff_y = grad.apply(&diffusivity);
    let visc = params.viscosity();

    let mut r1 = Vec::with_capacity(n);
    let mut r2 = Vec::with_capacity(n);
    let mut r3 = Vec::with_capacity(n);
    let mut v0_at = Vec::with_capacity(n);
    for i in 0..n {
        let (v0, dv0) = v0_scalar(acc[i].k[(0, 0)]);
        let ky = acc[i].k_gradient;
        v0_at.push(v0);
        r1.push(-fields.eta[i] * v0 * v_y[i]);
        r2.push(
            visc * second_order_remainder(v0, dv0, ky, v_y[i], v_yy[i])
                - fields.eta[i] / sigma[i] * v0 * eta_y[i]
                - coupling[i] * v0 * th_y[i],
        );
        r3.push(
            diffusivity[i] * second_order_remainder(v0, dv0, ky, th_y[i], th_yy[i])
                + (2.0 * v0 + v0 * v0) * diff_y[i] * th_y[i]
                - coupling[i] * v0 * v_y[i],
        );
    }
    // The outward normal is constant (-1 on the left, +1 on the right), so the
    // Taylor term in the normal vanishes.
    let last = n - 1;
    let r4 = [v0_at[0] * th_y[0], -v0_at[last] * th_y[last]];
    Ok(Remainders { r1, r2, r3, r4 })
}

/// Sinusoidal reference-frame velocity `eps sin(pi y / L) (1 + s)` and its derivatives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SineHistory {
    pub amplitude: f64,
    pub length: f64,
}

impl VelocityHistory for SineHistory {
    fn velocity(&self, y: f64, s: f64) -> f64 {
        let k = std::f64::consts::PI / self.length;
        self.amplitude * (k * y).sin() * (1.0 + s)
    }

    fn gradient(&self, y: f64, s: f64) -> f64 {
        let k = std::f64::consts::PI / self.length;
        self.amplitude * k * (k * y).cos() * (1.0 + s)
    }

    fn second_gradient(&self, y: f64, s: f64) -> f64 {
        let k = std::f64::consts::PI / self.length;
        -self.amplitude * k * k * (k * y).sin() * (1.0 + s)
    }
}

/// Fields of amplitude `eps` about `(eta0, theta0)` paired with a [`SineHistory`]
/// of the same amplitude; `v` is the history at time `t`.
pub fn perturbed_fields(grid: &Grid1D, eps: f64, eta0: f64, theta0: f64, t: f64) -> (LagrangianFields, SineHistory) {
    use std::f64::consts::PI;
    let l = grid.length();
    let hist = SineHistory { amplitude: eps, length: l };
    let ys = grid.coordinates(crate::discretization::Location::Node);
    let fields = LagrangianFields {
        eta: ys.iter().map(|y| eta0 + eps * (PI * y / l).cos()).collect(),
        v: ys.iter().map(|&y| hist.velocity(y, t)).collect(),
        theta: ys.iter().map(|y| theta0 + eps * (2.0 * PI * y / l).cos()).collect(),
    };
    (fields, hist)
}

/// Remainder norms across an amplitude sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AmplitudeSweep {
    pub amplitudes: Vec<f64>,
    /// `[|R1|, |R2|, |R3|, |R4|]` per amplitude.
    pub norms: Vec<[f64; 4]>,
    /// Smallest log-log slope between consecutive amplitudes, per remainder.
    pub min_slopes: [f64; 4],
}

pub fn amplitude_sweep(
    grid: &Grid1D,
    params: &MixtureParams,
    eta0: f64,
    theta0: f64,
    amplitudes: &[f64],
    opts: RemainderOptions,
) -> Result<AmplitudeSweep> {
    if amplitudes.len() < 2 {
        return Err(MixturaError::InvalidParameter("a sweep needs at least two amplitudes".into()));
    }
    let mut norms = Vec::with_capacity(amplitudes.len());
    for &eps in amplitudes {
        let (f, h) = perturbed_fields(grid, eps, eta0, theta0, opts.t);
        norms.push(remainders(grid, &f, &h, params, opts)?.max_norms());
    }
    let mut min_slopes = [f64::INFINITY; 4];
    for (a, w) in amplitudes.windows(2).zip(norms.windows(2)) {
        for i in 0..4 {
            let slope = (w[0][i] / w[1][i]).ln() / (a[0] / a[1]).ln();
            min_slopes[i] = min_slopes[i].min(slope);
        }
    }
    Ok(AmplitudeSweep {
        amplitudes: amplitudes.to_vec(),
        norms,
        min_slopes,
    })
}

/// Largest entry of `(I + V0(k))(I + k) - I` over `trials` seeded random
/// `dim x dim` matrices `k` with Frobenius norm below `max_norm`.
pub fn inverse_identity_residual(trials: usize, dim: usize, max_norm: f64, seed: u64) -> Result<f64> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let id = DMatrix::<f64>::identity(dim, dim);
    let mut worst = 0.0_f64;
    for _ in 0..trials {
        let mut k = DMatrix::from_fn(dim, dim, |_, _| rng.gen_range(-1.0..1.0));
        let norm = k.norm();
        if norm > 0.0 {
            k *= rng.gen_range(0.0..max_norm) / norm;
        }
        let prod = (&id + v0_matrix(&k)?) * (&id + &k);
        worst = worst.max((prod - &id).amax());
    }
    Ok(worst)
}
