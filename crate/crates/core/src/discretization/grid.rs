use serde::{Deserialize, Serialize};

use crate::error::{MixturaError, Result};

/// Boundary treatment of a 1-D grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    Periodic,
    Wall,
}

/// Where a discrete field lives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Location {
    /// Cell edges `x_i = i dx`. On wall grids both endpoints are included.
    Node,
    /// Cell centres `x_i = (i + 1/2) dx`.
    Cell,
}

/// Uniform 1-D mesh of `n` cells on `[0, length]`.
///
/// Wall grids carry `n + 1` nodes (both endpoints included) and `n` cells;
/// periodic grids carry `n` of each, node `n` being identified with node `0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid1D {
    n: usize,
    length: f64,
    bc: Boundary,
    dx: f64,
}

pub const MIN_CELLS: usize = 8;

impl Grid1D {
    pub fn new(n: usize, length: f64, bc: Boundary) -> Result<Self> {
        if n < MIN_CELLS {
            return Err(MixturaError::InvalidParameter(format!(
                "grid needs at least {MIN_CELLS} cells, got {n}"
            )));
        }
        if !(length.is_finite() && length > 0.0) {
            return Err(MixturaError::InvalidParameter(format!(
                "domain length must be positive, got {length}"
            )));
        }
        Ok(Self {
            n,
            length,
            bc,
            dx: length / n as f64,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn bc(&self) -> Boundary {
        self.bc
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn is_periodic(&self) -> bool {
        self.bc == Boundary::Periodic
    }

    pub fn n_cells(&self) -> usize {
        self.n
    }

    pub fn n_nodes(&self) -> usize {
        match self.bc {
            Boundary::Periodic => self.n,
            Boundary::Wall => self.n + 1,
        }
    }

    pub fn len(&self, loc: Location) -> usize {
        match loc {
            Location::Node => self.n_nodes(),
            Location::Cell => self.n_cells(),
        }
    }

    pub fn node(&self, i: usize) -> f64 {
        i as f64 * self.dx
    }

    pub fn cell(&self, i: usize) -> f64 {
        (i as f64 + 0.5) * self.dx
    }

    pub fn coordinates(&self, loc: Location) -> Vec<f64> {
        match loc {
            Location::Node => (0..self.n_nodes()).map(|i| self.node(i)).collect(),
            Location::Cell => (0..self.n_cells()).map(|i| self.cell(i)).collect(),
        }
    }

    /// Nodes that carry an unknown velocity (walls excluded).
    pub fn interior_nodes(&self) -> std::ops::Range<usize> {
        match self.bc {
            Boundary::Periodic => 0..self.n,
            Boundary::Wall => 1..self.n,
        }
    }

    /// Quadrature weight of a node: trapezoid on wall grids, `dx` otherwise.
    pub fn node_weight(&self, i: usize) -> f64 {
        match self.bc {
            Boundary::Wall if i == 0 || i == self.n => 0.5 * self.dx,
            _ => self.dx,
        }
    }
}

/// Values sampled at the nodes or at the cell centres of a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Field {
    pub location: Location,
    pub values: Vec<f64>,
}

impl Field {
    pub fn new(grid: &Grid1D, location: Location, values: Vec<f64>) -> Result<Self> {
        let expected = grid.len(location);
        if values.len() != expected {
            return Err(MixturaError::InvalidParameter(format!(
                "field has {} values but the grid has {expected} {location:?} points",
                values.len()
            )));
        }
        Ok(Self { location, values })
    }

    pub fn from_fn(grid: &Grid1D, location: Location, f: impl Fn(f64) -> f64) -> Self {
        Self {
            location,
            values: grid.coordinates(location).into_iter().map(f).collect(),
        }
    }

    pub fn constant(grid: &Grid1D, location: Location, value: f64) -> Self {
        Self {
            location,
            values: vec![value; grid.len(location)],
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Midpoint-rule integral for cell fields, trapezoid for wall node fields.
    /// Summation runs left to right.
    pub fn integral(&self, grid: &Grid1D) -> f64 {
        match self.location {
            Location::Cell => self.values.iter().fold(0.0, |acc, v| acc + v * grid.dx()),
            Location::Node => self
                .values
                .iter()
                .enumerate()
                .fold(0.0, |acc, (i, v)| acc + v * grid.node_weight(i)),
        }
    }
}
