//! Uniform radial grids on `[0, r_max]` and the sampled radial profiles that
//! live on them.
//!
//! Profiles are exchanged as CSV with a `r,value` header and one node per row,
//! written with 17 significant digits so that a write/read cycle is lossless.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{require_positive, Error, Result};

/// Uniform discretization `r_i = i * h`, `h = r_max / (n - 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialGrid {
    r_max: f64,
    h: f64,
    nodes: Vec<f64>,
}

impl RadialGrid {
    pub fn new(n: usize, r_max: f64) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidGrid(format!(
                "need at least 2 nodes, got {n}"
            )));
        }
        require_positive("r_max", r_max)?;
        let h = r_max / (n - 1) as f64;
        let mut nodes: Vec<f64> = (0..n).map(|i| i as f64 * h).collect();
        // Pin the endpoint; i * h can round away from r_max.
        nodes[n - 1] = r_max;
        Ok(Self { r_max, h, nodes })
    }

    pub fn n(&self) -> usize {
        self.nodes.len()
    }

    pub fn r_max(&self) -> f64 {
        self.r_max
    }

    /// Node spacing.
    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Same node count, outer radius multiplied by `factor`.
    pub fn dilated(&self, factor: f64) -> Result<Self> {
        require_positive("factor", factor)?;
        Self::new(self.n(), self.r_max * factor)
    }
}

/// A spherically symmetric field `phi(|x|)` sampled on a [`RadialGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct RadialProfile {
    grid: RadialGrid,
    values: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct ProfileRow {
    r: f64,
    value: f64,
}

impl RadialProfile {
    pub fn new(grid: RadialGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n() {
            return Err(Error::InvalidProfile(format!(
                "{} values for a grid of {} nodes",
                values.len(),
                grid.n()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidProfile(format!(
                "non-finite value {} at node {i}",
                values[i]
            )));
        }
        Ok(Self { grid, values })
    }

    /// Samples `f` at every node. Fails if `f` returns a non-finite value.
    pub fn from_fn(grid: &RadialGrid, f: impl Fn(f64) -> f64) -> Result<Self> {
        let values = grid.nodes().iter().map(|&r| f(r)).collect();
        Self::new(grid.clone(), values)
    }

    pub fn zeros(grid: &RadialGrid) -> Self {
        Self {
            grid: grid.clone(),
            values: vec![0.0; grid.n()],
        }
    }

    pub fn grid(&self) -> &RadialGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Same grid, new values. Callers guarantee length and finiteness.
    pub(crate) fn with_values(&self, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), self.values.len());
        Self {
            grid: self.grid.clone(),
            values,
        }
    }

    pub fn scaled(&self, c: f64) -> Result<Self> {
        Self::new(
            self.grid.clone(),
            self.values.iter().map(|v| c * v).collect(),
        )
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["r", "value"])?;
        for (r, v) in self.grid.nodes().iter().zip(&self.values) {
            w.write_record([format!("{r:.16e}"), format!("{v:.16e}")])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }

    /// Reads a profile CSV. The radii must form a uniform grid starting at 0.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(reader);
        let headers = rdr.headers()?.clone();
        if headers.iter().map(str::trim).ne(["r", "value"]) {
            return Err(Error::InvalidProfile(format!(
                "expected header `r,value`, found `{}`",
                headers.iter().collect::<Vec<_>>().join(",")
            )));
        }
        let rows = rdr
            .deserialize::<ProfileRow>()
            .collect::<std::result::Result<Vec<_>, _>>()?;
        if rows.len() < 2 {
            return Err(Error::InvalidProfile(format!(
                "need at least 2 rows, got {}",
                rows.len()
            )));
        }
        let r_max = rows[rows.len() - 1].r;
        let grid = RadialGrid::new(rows.len(), r_max)?;
        for (row, &node) in rows.iter().zip(grid.nodes()) {
            if (row.r - node).abs() > 1e-9 * r_max {
                return Err(Error::InvalidProfile(format!(
                    "radius {} does not lie on a uniform grid from 0 to {r_max} (expected {node})",
                    row.r
                )));
            }
        }
        Self::new(grid, rows.into_iter().map(|row| row.value).collect())
    }

    pub fn load_csv(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_csv(std::fs::File::open(path)?)
    }
}
