//! The discrete inverse problem at one detector pixel: measurement matrix
//! assembly, row/column restriction, conditioning, and SART reconstruction.
//!
//! Measurements are linear in the source, so for a pixel `s` the forward
//! sweep is a matrix `A` with one row per illumination (left heights first,
//! then right heights) and one column per height cell:
//!
//! `A[i][j] = c exp(-att_i) dy exp(-a_j) K(r_j - y_i, sigma_i)`
//!
//! with the `sigma_i = 0` rows degenerating to point evaluations. By
//! construction `A * mu` reproduces the measurement sweep on the shared
//! grid.

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::forward::{attenuation_illum, sigma, SigmaProfile, SliceKernel};
use crate::geometry::IllumSide;
use crate::heat::kernel_unchecked;
use crate::phantom::PhantomSet;

/// Dense measurement block for one detector pixel.
#[derive(Debug, Clone)]
pub struct SystemBlock {
    pub s: f64,
    /// Illumination heights shared by both sides; rows are ordered left
    /// heights then right heights.
    pub illum_heights: Vec<f64>,
    pub c: f64,
    pub a: Array2<f64>,
    pub b: Array1<f64>,
    /// Height-cell index of each column (into the phantom grid).
    pub column_cells: Vec<usize>,
    /// `(side, height)` of each row.
    pub row_labels: Vec<(IllumSide, f64)>,
    /// Ground-truth support restriction (optionally dilated).
    pub column_mask: Vec<bool>,
    pub row_mask: Vec<bool>,
}

/// Assemble the block for pixel `s`. `support_dilation` widens the
/// ground-truth column mask by that many cells to model imprecisely known
/// support.
pub fn assemble_block(
    phantom: &PhantomSet,
    s: f64,
    illum_heights: &[f64],
    c: f64,
    support_dilation: usize,
) -> Result<SystemBlock> {
    if illum_heights.is_empty() {
        return Err(CoreError::InvalidSystem("no illumination heights".into()));
    }
    let window = crate::geometry::visible_heights(&phantom.object, &phantom.domain, s, 64)?;
    if window.is_none() {
        return Err(CoreError::InvalidSystem(format!("empty visible window at s = {s}")));
    }
    let ny = phantom.grid.ny;
    let slice = SliceKernel::new(phantom, s);
    let m1 = illum_heights.len();
    let mut a = Array2::zeros((2 * m1, ny));
    let mut row_labels = Vec::with_capacity(2 * m1);
    for (block_idx, side) in [IllumSide::Left, IllumSide::Right].into_iter().enumerate() {
        for (i, &y) in illum_heights.iter().enumerate() {
            let row = block_idx * m1 + i;
            row_labels.push((side, y));
            let sig = sigma(phantom, s, y, side)?;
            let att = attenuation_illum(phantom, s, y, side)?;
            let gain = c * (-att).exp();
            if sig > 0.0 {
                for j in 0..ny {
                    let e = slice.emission[j];
                    if e != 0.0 {
                        a[[row, j]] =
                            gain * slice.dy * e * kernel_unchecked(slice.ys[j] - y, sig);
                    }
                }
            } else if crate::geometry::entry_depth(&phantom.object, &phantom.domain, y, side)?
                .map(|g| match side {
                    IllumSide::Left => g <= s,
                    IllumSide::Right => g >= s,
                })
                .unwrap_or(false)
            {
                // degenerate kernel: point evaluation at the illumination height
                let j = phantom.grid.y_index(y);
                a[[row, j]] = gain * slice.emission[j];
            }
        }
    }
    let mu = Array1::from_vec(slice.mu.clone());
    let b = a.dot(&mu);
    // ground-truth support columns, optionally dilated
    let support: Vec<bool> = slice.mu.iter().map(|&m| m > 0.0).collect();
    let mut column_mask = support.clone();
    for _ in 0..support_dilation {
        let prev = column_mask.clone();
        for j in 0..ny {
            if prev[j] || (j > 0 && prev[j - 1]) || (j + 1 < ny && prev[j + 1]) {
                column_mask[j] = true;
            }
        }
    }
    Ok(SystemBlock {
        s,
        illum_heights: illum_heights.to_vec(),
        c,
        a,
        b,
        column_cells: (0..ny).collect(),
        row_labels,
        column_mask,
        row_mask: vec![true; 2 * m1],
    })
}

impl SystemBlock {
    /// Logical submatrix: keeps exactly the selected rows and columns.
    pub fn restrict(&self, row_mask: &[bool], column_mask: &[bool]) -> Result<SystemBlock> {
        if row_mask.len() != self.a.nrows() || column_mask.len() != self.a.ncols() {
            return Err(CoreError::InvalidSystem(format!(
                "mask sizes {} / {} do not match block {} x {}",
                row_mask.len(),
                column_mask.len(),
                self.a.nrows(),
                self.a.ncols()
            )));
        }
        let rows: Vec<usize> =
            (0..self.a.nrows()).filter(|&i| row_mask[i]).collect();
        let cols: Vec<usize> =
            (0..self.a.ncols()).filter(|&j| column_mask[j]).collect();
        if rows.is_empty() || cols.is_empty() {
            return Err(CoreError::InvalidSystem("restriction leaves an empty matrix".into()));
        }
        let mut a = Array2::zeros((rows.len(), cols.len()));
        for (ri, &i) in rows.iter().enumerate() {
            for (ci, &j) in cols.iter().enumerate() {
                a[[ri, ci]] = self.a[[i, j]];
            }
        }
        let b = Array1::from_iter(rows.iter().map(|&i| self.b[i]));
        Ok(SystemBlock {
            s: self.s,
            illum_heights: self.illum_heights.clone(),
            c: self.c,
            a,
            b,
            column_cells: cols.iter().map(|&j| self.column_cells[j]).collect(),
            row_labels: rows.iter().map(|&i| self.row_labels[i]).collect(),
            column_mask: vec![true; cols.len()],
            row_mask: vec![true; rows.len()],
        })
    }

    /// Row mask selecting the illuminations inside the limited-observation
    /// intervals of the per-side profiles.
    pub fn limited_row_mask(&self, left: &SigmaProfile, right: &SigmaProfile) -> Vec<bool> {
        self.row_labels
            .iter()
            .map(|&(side, y)| {
                let prof = match side {
                    IllumSide::Left => left,
                    IllumSide::Right => right,
                };
                let ((a1, b1), (a2, b2)) = prof.observation_intervals();
                (y > a1 && y < b1) || (y > a2 && y < b2)
            })
            .collect()
    }

    /// Condition number of the current matrix.
    pub fn condition_number(&self) -> Result<f64> {
        crate::svd::condition_number(&self.a)
    }
}

/// SART controls.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SartOptions {
    pub omega: f64,
    pub max_sweeps: usize,
    pub nonneg: bool,
    pub residual_tol: f64,
    /// Noise seed carried through to the result for bookkeeping.
    pub seed: Option<u64>,
}

impl Default for SartOptions {
    fn default() -> Self {
        Self { omega: 1.0, max_sweeps: 500, nonneg: false, residual_tol: 1e-10, seed: None }
    }
}

/// Reconstruction output with the per-sweep relative residuals.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReconstructionResult {
    pub mu_hat: Vec<f64>,
    pub residual_history: Vec<f64>,
    pub iterations: usize,
    pub omega: f64,
    pub nonneg: bool,
    pub seed: Option<u64>,
}

/// Simultaneous algebraic reconstruction: simultaneous relaxed updates
/// `x <- x + omega V^-1 A^T W^-1 (b - A x)` with `V` the column sums and
/// `W` the row sums of `|A|`; rows or columns with zero sums are skipped.
pub fn sart(
    a: &Array2<f64>,
    b: &Array1<f64>,
    x0: Option<&Array1<f64>>,
    opts: &SartOptions,
) -> Result<ReconstructionResult> {
    if !(opts.omega > 0.0 && opts.omega < 2.0) {
        return Err(CoreError::InvalidRelaxation(opts.omega));
    }
    let (m, n) = a.dim();
    if b.len() != m {
        return Err(CoreError::InvalidSystem(format!(
            "rhs length {} does not match {} rows",
            b.len(),
            m
        )));
    }
    if let Some(x0) = x0 {
        if x0.len() != n {
            return Err(CoreError::InvalidSystem(format!(
                "x0 length {} does not match {} columns",
                x0.len(),
                n
            )));
        }
    }
    let row_sums: Vec<f64> = (0..m).map(|i| a.row(i).iter().map(|v| v.abs()).sum()).collect();
    let col_sums: Vec<f64> = (0..n).map(|j| a.column(j).iter().map(|v| v.abs()).sum()).collect();
    let b_norm = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    let mut x = x0.cloned().unwrap_or_else(|| Array1::zeros(n));
    let mut history = Vec::new();
    let mut sweeps = 0;
    for _ in 0..opts.max_sweeps {
        let residual = b - &a.dot(&x);
        let mut update = Array1::<f64>::zeros(n);
        for i in 0..m {
            if row_sums[i] > 0.0 {
                let w = residual[i] / row_sums[i];
                if w != 0.0 {
                    for j in 0..n {
                        update[j] += a[[i, j]] * w;
                    }
                }
            }
        }
        for j in 0..n {
            if col_sums[j] > 0.0 {
                x[j] += opts.omega * update[j] / col_sums[j];
            }
        }
        if opts.nonneg {
            x.mapv_inplace(|v| v.max(0.0));
        }
        sweeps += 1;
        let r = b - &a.dot(&x);
        let rel = if b_norm > 0.0 {
            r.iter().map(|v| v * v).sum::<f64>().sqrt() / b_norm
        } else {
            r.iter().map(|v| v * v).sum::<f64>().sqrt()
        };
        history.push(rel);
        if rel < opts.residual_tol {
            break;
        }
    }
    Ok(ReconstructionResult {
        mu_hat: x.to_vec(),
        residual_history: history,
        iterations: sweeps,
        omega: opts.omega,
        nonneg: opts.nonneg,
        seed: opts.seed,
    })
}

/// Spearman rank correlation (average ranks on ties).
pub fn spearman(xs: &[f64], ys: &[f64]) -> f64 {
    assert_eq!(xs.len(), ys.len());
    let rank = |v: &[f64]| -> Vec<f64> {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&i, &j| v[i].partial_cmp(&v[j]).unwrap());
        let mut ranks = vec![0.0; v.len()];
        let mut k = 0;
        while k < idx.len() {
            let mut k2 = k;
            while k2 + 1 < idx.len() && v[idx[k2 + 1]] == v[idx[k]] {
                k2 += 1;
            }
            let avg = (k + k2) as f64 / 2.0 + 1.0;
            for &i in &idx[k..=k2] {
                ranks[i] = avg;
            }
            k = k2 + 1;
        }
        ranks
    };
    let (rx, ry) = (rank(xs), rank(ys));
    let n = xs.len() as f64;
    let mx = rx.iter().sum::<f64>() / n;
    let my = ry.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut vx = 0.0;
    let mut vy = 0.0;
    for (a, b) in rx.iter().zip(&ry) {
        cov += (a - mx) * (b - my);
        vx += (a - mx) * (a - mx);
        vy += (b - my) * (b - my);
    }
    if vx == 0.0 || vy == 0.0 {
        return 0.0;
    }
    cov / (vx * vy).sqrt()
}
