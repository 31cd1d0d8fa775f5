use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};

/// Uniform 2D lattice of cell centers over a rectangle `[x0, x1] x [y0, y1]`.
///
/// Fields live at cell centers: `x_i = x0 + (i + 1/2) dx`, and likewise in y.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid2 {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
    pub nx: usize,
    pub ny: usize,
}

impl Grid2 {
    pub fn new(x0: f64, x1: f64, y0: f64, y1: f64, nx: usize, ny: usize) -> Result<Self> {
        if !(x1 > x0 && y1 > y0) || nx < 2 || ny < 2 {
            return Err(CoreError::InvalidPhantom(format!(
                "degenerate grid [{x0}, {x1}] x [{y0}, {y1}] ({nx} x {ny})"
            )));
        }
        Ok(Self { x0, x1, y0, y1, nx, ny })
    }

    pub fn dx(&self) -> f64 {
        (self.x1 - self.x0) / self.nx as f64
    }

    pub fn dy(&self) -> f64 {
        (self.y1 - self.y0) / self.ny as f64
    }

    pub fn x_center(&self, i: usize) -> f64 {
        self.x0 + (i as f64 + 0.5) * self.dx()
    }

    pub fn y_center(&self, j: usize) -> f64 {
        self.y0 + (j as f64 + 0.5) * self.dy()
    }

    pub fn xs(&self) -> Vec<f64> {
        (0..self.nx).map(|i| self.x_center(i)).collect()
    }

    pub fn ys(&self) -> Vec<f64> {
        (0..self.ny).map(|j| self.y_center(j)).collect()
    }

    /// Index of the cell whose center is nearest to `x`, clamped to the grid.
    pub fn x_index(&self, x: f64) -> usize {
        let raw = ((x - self.x0) / self.dx() - 0.5).round();
        raw.clamp(0.0, (self.nx - 1) as f64) as usize
    }

    pub fn y_index(&self, y: f64) -> usize {
        let raw = ((y - self.y0) / self.dy() - 0.5).round();
        raw.clamp(0.0, (self.ny - 1) as f64) as usize
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.x0 && x <= self.x1 && y >= self.y0 && y <= self.y1
    }
}

/// `n` evenly spaced points including both endpoints.
pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    assert!(n >= 2, "linspace needs at least two points");
    let step = (b - a) / (n - 1) as f64;
    (0..n).map(|i| a + step * i as f64).collect()
}
