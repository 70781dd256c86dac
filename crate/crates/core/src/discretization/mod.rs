//! Grids and second-order difference operators.
//!
//! Velocity lives on nodes, scalars (densities, `h`) on cell centres. The
//! cell-to-node gradient `G` and the node-to-cell divergence `D` satisfy
//! `G = -D^T` on the interior nodes, which gives exact discrete integration by
//! parts against a velocity that vanishes on the walls. Cell-centred
//! divergences are written in face-flux form, nodes doubling as faces.

mod banded;
mod grid;
mod operator;

pub use banded::{BandLu, BandMatrix};
pub use grid::{Boundary, Field, Grid1D, Location, MIN_CELLS};
pub use operator::{DiscreteOperator, OperatorSolver};

use crate::error::{MixturaError, Result};

fn expect_location(f: &Field, grid: &Grid1D, loc: Location, what: &str) -> Result<()> {
    if f.location != loc || f.len() != grid.len(loc) {
        return Err(MixturaError::InvalidParameter(format!(
            "{what} must be a {loc:?} field of length {}",
            grid.len(loc)
        )));
    }
    Ok(())
}

/// Node-to-node first derivative: central in the interior, one-sided
/// second-order `(-3 f0 + 4 f1 - f2) / (2 dx)` at walls.
pub fn gradient_op(grid: &Grid1D) -> DiscreteOperator {
    let n = grid.n_nodes();
    let dx = grid.dx();
    let mut op = DiscreteOperator::square(n);
    let c = 0.5 / dx;
    match grid.bc() {
        Boundary::Periodic => {
            for i in 0..n {
                op.add(i, (i + 1) % n, c);
                op.add(i, (i + n - 1) % n, -c);
            }
        }
        Boundary::Wall => {
            op.add(0, 0, -3.0 * c);
            op.add(0, 1, 4.0 * c);
            op.add(0, 2, -c);
            for i in 1..n - 1 {
                op.add(i, i + 1, c);
                op.add(i, i - 1, -c);
            }
            let l = n - 1;
            op.add(l, l, 3.0 * c);
            op.add(l, l - 1, -4.0 * c);
            op.add(l, l - 2, c);
        }
    }
    op
}

/// Node-to-node second derivative: three-point in the interior, one-sided
/// second-order `(2 f0 - 5 f1 + 4 f2 - f3) / dx^2` at walls.
pub fn laplacian_op(grid: &Grid1D) -> DiscreteOperator {
    let n = grid.n_nodes();
    let c = 1.0 / (grid.dx() * grid.dx());
    let mut op = DiscreteOperator::square(n);
    match grid.bc() {
        Boundary::Periodic => {
            for i in 0..n {
                op.add(i, (i + n - 1) % n, c);
                op.add(i, i, -2.0 * c);
                op.add(i, (i + 1) % n, c);
            }
        }
        Boundary::Wall => {
            for (k, w) in [2.0, -5.0, 4.0, -1.0].into_iter().enumerate() {
                op.add(0, k, w * c);
                op.add(n - 1, n - 1 - k, w * c);
            }
            for i in 1..n - 1 {
                op.add(i, i - 1, c);
                op.add(i, i, -2.0 * c);
                op.add(i, i + 1, c);
            }
        }
    }
    op
}

/// Cell-to-node gradient `(c_i - c_{i-1}) / dx`. Rows of wall nodes are empty.
pub fn cell_gradient_op(grid: &Grid1D) -> DiscreteOperator {
    let nc = grid.n_cells();
    let inv = 1.0 / grid.dx();
    let mut op = DiscreteOperator::new(grid.n_nodes(), nc);
    for i in grid.interior_nodes() {
        op.add(i, i % nc, inv);
        op.add(i, (i + nc - 1) % nc, -inv);
    }
    op
}

/// Node-to-cell divergence `(u_{i+1} - u_i) / dx`.
pub fn node_divergence_op(grid: &Grid1D) -> DiscreteOperator {
    let nc = grid.n_cells();
    let nn = grid.n_nodes();
    let inv = 1.0 / grid.dx();
    let mut op = DiscreteOperator::new(nc, nn);
    for i in 0..nc {
        op.add(i, (i + 1) % nn, inv);
        op.add(i, i, -inv);
    }
    op
}

/// Cell divergence of a flux given at the faces (nodes):
/// `(F_{i+1} - F_i) / dx`. The cell sum times `dx` telescopes to
/// `F_right - F_left`.
pub fn divergence_conservative(flux_at_faces: &Field, grid: &Grid1D) -> Result<Field> {
    expect_location(flux_at_faces, grid, Location::Node, "flux")?;
    let f = &flux_at_faces.values;
    let nn = grid.n_nodes();
    let dx = grid.dx();
    let values = (0..grid.n_cells())
        .map(|i| (f[(i + 1) % nn] - f[i]) / dx)
        .collect();
    Ok(Field {
        location: Location::Cell,
        values,
    })
}

/// Arithmetic mean of the two cells adjacent to each node. Wall nodes take the
/// value of their single neighbouring cell.
pub fn cell_to_node_average(values: &[f64], grid: &Grid1D) -> Vec<f64> {
    let nc = grid.n_cells();
    (0..grid.n_nodes())
        .map(|i| match grid.bc() {
            Boundary::Wall if i == 0 => values[0],
            Boundary::Wall if i == nc => values[nc - 1],
            _ => 0.5 * (values[(i + nc - 1) % nc] + values[i % nc]),
        })
        .collect()
}

/// Mean of the two nodes bounding each cell.
pub fn node_to_cell_average(values: &[f64], grid: &Grid1D) -> Vec<f64> {
    let nn = grid.n_nodes();
    (0..grid.n_cells())
        .map(|i| 0.5 * (values[i] + values[(i + 1) % nn]))
        .collect()
}

/// Flux-form `div(gamma grad .)` on cell centres with arithmetic-mean face
/// coefficients. On wall grids `neumann = true` mirrors the boundary cell into
/// the ghost (zero face flux); `neumann = false` uses an odd ghost, giving a
/// homogeneous Dirichlet condition at the wall. Periodic grids ignore the flag.
pub fn variable_diffusion_op(gamma: &Field, grid: &Grid1D, neumann: bool) -> Result<DiscreteOperator> {
    expect_location(gamma, grid, Location::Cell, "diffusion coefficient")?;
    let g = &gamma.values;
    let nc = grid.n_cells();
    let c = 1.0 / (grid.dx() * grid.dx());
    let mut op = DiscreteOperator::square(nc);
    // Face i separates cells i-1 and i.
    let mut couple = |left: usize, right: usize, gf: f64| {
        op.add(left, left, -gf * c);
        op.add(left, right, gf * c);
        op.add(right, right, -gf * c);
        op.add(right, left, gf * c);
    };
    match grid.bc() {
        Boundary::Periodic => {
            for i in 0..nc {
                let l = (i + nc - 1) % nc;
                couple(l, i, 0.5 * (g[l] + g[i]));
            }
        }
        Boundary::Wall => {
            for i in 1..nc {
                couple(i - 1, i, 0.5 * (g[i - 1] + g[i]));
            }
            if !neumann {
                // Odd ghost: face flux gamma_b * (0 - 2 c_b) / dx.
                op.add(0, 0, -2.0 * g[0] * c);
                op.add(nc - 1, nc - 1, -2.0 * g[nc - 1] * c);
            }
        }
    }
    Ok(op)
}

/// Velocity values at the two walls; both vanish when the no-slip condition holds.
pub fn dirichlet_residual(u: &Field, grid: &Grid1D) -> Result<(f64, f64)> {
    expect_location(u, grid, Location::Node, "velocity")?;
    match grid.bc() {
        Boundary::Periodic => Ok((0.0, 0.0)),
        Boundary::Wall => Ok((u.values[0], u.values[grid.n()])),
    }
}

/// Sets the wall velocities to zero.
pub fn apply_dirichlet_zero(u: &mut Field, grid: &Grid1D) -> Result<()> {
    expect_location(u, grid, Location::Node, "velocity")?;
    if grid.bc() == Boundary::Wall {
        u.values[0] = 0.0;
        let n = grid.n();
        u.values[n] = 0.0;
    }
    Ok(())
}

/// Eliminates the wall rows and columns of a node-to-node operator.
pub fn eliminate_dirichlet(op: &DiscreteOperator, grid: &Grid1D) -> DiscreteOperator {
    let keep: Vec<usize> = grid.interior_nodes().collect();
    op.restrict(&keep, &keep)
}

/// One-sided second-order estimates of the wall slope of a cell field,
/// `(-2 c0 + 3 c1 - c2) / dx` and its mirror image on the right wall.
/// Zero slopes mean the homogeneous Neumann condition holds.
pub fn neumann_residual(h: &Field, grid: &Grid1D) -> Result<(f64, f64)> {
    expect_location(h, grid, Location::Cell, "h")?;
    if grid.bc() == Boundary::Periodic {
        return Ok((0.0, 0.0));
    }
    let v = &h.values;
    let n = v.len();
    let dx = grid.dx();
    let left = (-2.0 * v[0] + 3.0 * v[1] - v[2]) / dx;
    let right = (2.0 * v[n - 1] - 3.0 * v[n - 2] + v[n - 3]) / dx;
    Ok((left, right))
}

/// Cell values extended by one ghost per side: mirror images on wall grids,
/// wrapped values on periodic grids.
pub fn apply_neumann_zero(h: &Field, grid: &Grid1D) -> Result<Vec<f64>> {
    expect_location(h, grid, Location::Cell, "h")?;
    let v = &h.values;
    let n = v.len();
    let (left, right) = match grid.bc() {
        Boundary::Wall => (v[0], v[n - 1]),
        Boundary::Periodic => (v[n - 1], v[0]),
    };
    let mut out = Vec::with_capacity(n + 2);
    out.push(left);
    out.extend_from_slice(v);
    out.push(right);
    Ok(out)
}

/// Discrete L2 norm `sqrt(sum w_i v_i^2)` with the grid quadrature weights.
pub fn l2_norm(values: &[f64], grid: &Grid1D, loc: Location) -> f64 {
    let s = match loc {
        Location::Cell => values.iter().fold(0.0, |acc, v| acc + v * v * grid.dx()),
        Location::Node => values
            .iter()
            .enumerate()
            .fold(0.0, |acc, (i, v)| acc + v * v * grid.node_weight(i)),
    };
    s.sqrt()
}

pub fn linf_norm(values: &[f64]) -> f64 {
    values.iter().fold(0.0, |m, v| m.max(v.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn wall(n: usize) -> Grid1D {
        Grid1D::new(n, 1.0, Boundary::Wall).unwrap()
    }

    fn periodic(n: usize) -> Grid1D {
        Grid1D::new(n, 1.0, Boundary::Periodic).unwrap()
    }

    #[test]
    fn gradient_kernel_and_linears() {
        for g in [wall(16), periodic(16)] {
            let ones = vec![1.0; g.n_nodes()];
            assert!(linf_norm(&gradient_op(&g).apply(&ones)) < 1e-12);
            assert!(linf_norm(&laplacian_op(&g).apply(&ones)) < 1e-9);
        }
        let g = wall(16);
        let x = g.coordinates(Location::Node);
        let d = gradient_op(&g).apply(&x);
        assert!(d.iter().all(|v| (v - 1.0).abs() < 1e-12));
        let sq: Vec<f64> = x.iter().map(|x| x * x).collect();
        let lap = laplacian_op(&g).apply(&sq);
        assert!(lap.iter().all(|v| (v - 2.0).abs() < 1e-9));
    }

    fn gradient_error(n: usize) -> f64 {
        let g = periodic(n);
        let x = g.coordinates(Location::Node);
        let f: Vec<f64> = x.iter().map(|x| (2.0 * PI * x).sin()).collect();
        let d = gradient_op(&g).apply(&f);
        d.iter()
            .zip(&x)
            .map(|(d, x)| (d - 2.0 * PI * (2.0 * PI * x).cos()).abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn gradient_second_order() {
        for n in [16, 32, 64] {
            let ratio = gradient_error(n) / gradient_error(2 * n);
            assert!((3.6..=4.4).contains(&ratio), "n={n}: ratio {ratio}");
        }
    }

    #[test]
    fn wall_gradient_second_order() {
        let err = |n: usize| {
            let g = wall(n);
            let x = g.coordinates(Location::Node);
            let f: Vec<f64> = x.iter().map(|x| x.exp()).collect();
            let d = gradient_op(&g).apply(&f);
            d.iter()
                .zip(&x)
                .map(|(d, x)| (d - x.exp()).abs())
                .fold(0.0, f64::max)
        };
        let ratio = err(32) / err(64);
        assert!((3.6..=4.4).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn laplacian_second_order() {
        let err = |n: usize| {
            let g = periodic(n);
            let x = g.coordinates(Location::Node);
            let f: Vec<f64> = x.iter().map(|x| (2.0 * PI * x).cos()).collect();
            let l = laplacian_op(&g).apply(&f);
            l.iter()
                .zip(&f)
                .map(|(l, f)| (l + 4.0 * PI * PI * f).abs())
                .fold(0.0, f64::max)
        };
        let ratio = err(32) / err(64);
        assert!((3.6..=4.4).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn staggered_pair_is_skew_adjoint() {
        for g in [wall(12), periodic(12)] {
            let gr = cell_gradient_op(&g).to_dense();
            let dv = node_divergence_op(&g).to_dense();
            for i in g.interior_nodes() {
                for j in 0..g.n_cells() {
                    assert_eq!(gr[(i, j)], -dv[(j, i)]);
                }
            }
        }
    }

    #[test]
    fn conservative_divergence_telescopes() {
        let g = wall(20);
        let zero = Field::constant(&g, Location::Node, 0.0);
        let d = divergence_conservative(&zero, &g).unwrap();
        assert!(d.values.iter().all(|v| *v == 0.0));

        let flux = Field::from_fn(&g, Location::Node, |x| (3.0 * x).sin() + 0.2);
        let d = divergence_conservative(&flux, &g).unwrap();
        let total = d.integral(&g);
        let expected = flux.values[20] - flux.values[0];
        assert!((total - expected).abs() < 1e-14);

        let mut closed = Field::from_fn(&g, Location::Node, |x| (3.0 * x).sin());
        apply_dirichlet_zero(&mut closed, &g).unwrap();
        let d = divergence_conservative(&closed, &g).unwrap();
        assert!(d.integral(&g).abs() < 1e-15);
    }

    #[test]
    fn conservative_divergence_rejects_cell_input() {
        let g = wall(8);
        let f = Field::constant(&g, Location::Cell, 1.0);
        assert!(divergence_conservative(&f, &g).is_err());
    }

    #[test]
    fn unit_diffusion_is_standard_stencil() {
        let g = periodic(10);
        let op = variable_diffusion_op(&Field::constant(&g, Location::Cell, 1.0), &g, true).unwrap();
        let m = op.to_dense();
        let c = 1.0 / (g.dx() * g.dx());
        for i in 0..10 {
            assert!((m[(i, i)] + 2.0 * c).abs() < 1e-9);
            assert!((m[(i, (i + 1) % 10)] - c).abs() < 1e-9);
            assert!((m[(i, (i + 9) % 10)] - c).abs() < 1e-9);
        }
    }

    #[test]
    fn neumann_diffusion_symmetric_nsd_with_constant_kernel() {
        let g = wall(32);
        let gamma = Field::from_fn(&g, Location::Cell, |x| 1.0 + 0.3 * (5.0 * x).sin());
        let op = variable_diffusion_op(&gamma, &g, true).unwrap();
        let ones = vec![1.0; 32];
        assert!(linf_norm(&op.apply(&ones)) < 1e-9);
        let m = op.to_dense();
        let asym = (&m - m.transpose()).abs().max();
        assert!(asym <= 1e-12, "asymmetry {asym}");
        let eig = m.symmetric_eigenvalues();
        let scale = m.abs().max();
        assert!(eig.max() <= 1e-12 * scale, "max eigenvalue {}", eig.max());
    }

    #[test]
    fn dirichlet_checks() {
        let g = wall(10);
        let mut u = Field::constant(&g, Location::Node, 3.5);
        assert_eq!(dirichlet_residual(&u, &g).unwrap(), (3.5, 3.5));
        apply_dirichlet_zero(&mut u, &g).unwrap();
        assert_eq!(dirichlet_residual(&u, &g).unwrap(), (0.0, 0.0));
        let lap = eliminate_dirichlet(&laplacian_op(&g), &g);
        assert_eq!(lap.rows(), 9);
    }

    #[test]
    fn neumann_checks() {
        let g = wall(40);
        let c = Field::constant(&g, Location::Cell, 2.0);
        let (l, r) = neumann_residual(&c, &g).unwrap();
        assert!(l.abs() < 1e-12 && r.abs() < 1e-12);

        let lin = Field::from_fn(&g, Location::Cell, |x| x);
        let (l, r) = neumann_residual(&lin, &g).unwrap();
        assert!((l - 1.0).abs() < 1e-9 && (r - 1.0).abs() < 1e-9);

        // Zero endpoint slope; the residual is the O(dx^2) one-sided error.
        let err = |n: usize| {
            let g = wall(n);
            // Zero slope at both walls, nonzero third derivative.
            let q = Field::from_fn(&g, Location::Cell, |x| (PI * x).cos() + x * x * x - 1.5 * x * x);
            let (l, r) = neumann_residual(&q, &g).unwrap();
            l.abs().max(r.abs())
        };
        let ratio = err(64) / err(128);
        assert!(err(128) < 1e-3 && ratio >= 3.6, "ratio {ratio}");

        let ghosts = apply_neumann_zero(&lin, &g).unwrap();
        assert_eq!(ghosts[0], ghosts[1]);
        assert_eq!(ghosts[41], ghosts[40]);
    }

    #[test]
    fn averages() {
        let g = wall(8);
        let cells: Vec<f64> = (0..8).map(|i| i as f64).collect();
        let nodes = cell_to_node_average(&cells, &g);
        assert_eq!(nodes.len(), 9);
        assert_eq!(nodes[0], 0.0);
        assert_eq!(nodes[4], 3.5);
        assert_eq!(nodes[8], 7.0);
        let back = node_to_cell_average(&nodes, &g);
        assert_eq!(back.len(), 8);
    }
}
