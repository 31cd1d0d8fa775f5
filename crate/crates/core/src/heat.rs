//! Exact-kernel solver for the 1D heat equation and the norm/energy
//! functionals used by the stability experiments.
//!
//! Solutions are represented through the closed form
//! `u(y, t) = ∫ u0(r) exp(-(y-r)^2 / 4t) / sqrt(4 pi t) dr`,
//! evaluated by composite trapezoid quadrature on the sample grid of the
//! initial profile. There is no time stepping anywhere: every evaluation at
//! time `t` is a fresh kernel convolution, so the semigroup structure is
//! inherited from the Gaussian kernel itself.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};

/// Relative tolerance for the uniform-spacing invariant of [`Profile1D`].
const SPACING_RTOL: f64 = 1e-12;

/// Width, in units of `sqrt(4 t)`, beyond which Gaussian tails are dropped
/// when a grid has to cover "all of R". exp(-12^2) < 1e-62, squared < 1e-124.
pub const TAIL_WIDTHS: f64 = 12.0;

/// Heat kernel `exp(-x^2 / 4t) / sqrt(4 pi t)` for strictly positive `t`.
pub fn kernel_1d(x: f64, t: f64) -> Result<f64> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(CoreError::NonPositiveTime(t));
    }
    if !x.is_finite() {
        return Err(CoreError::InvalidProfile(format!("non-finite offset x = {x}")));
    }
    Ok(kernel_unchecked(x, t))
}

#[inline]
pub(crate) fn kernel_unchecked(x: f64, t: f64) -> f64 {
    (-x * x / (4.0 * t)).exp() / (4.0 * std::f64::consts::PI * t).sqrt()
}

/// Spatial derivative of the heat kernel, `d/dx kernel_1d(x, t)`.
#[inline]
pub(crate) fn kernel_dx_unchecked(x: f64, t: f64) -> f64 {
    -x / (2.0 * t) * kernel_unchecked(x, t)
}

/// A compactly supported initial temperature sampled on a uniform grid.
///
/// `values` are exactly zero at samples outside `[support_lo, support_hi]`;
/// quadrature only runs over the support range, so widening the grid never
/// changes an integral.
#[derive(Debug, Clone, PartialEq)]
pub struct Profile1D {
    ys: Vec<f64>,
    values: Vec<f64>,
    support_lo: f64,
    support_hi: f64,
}

impl Profile1D {
    pub fn new(ys: Vec<f64>, values: Vec<f64>, support_lo: f64, support_hi: f64) -> Result<Self> {
        if ys.len() < 2 {
            return Err(CoreError::InvalidProfile("need at least two samples".into()));
        }
        if ys.len() != values.len() {
            return Err(CoreError::InvalidProfile(format!(
                "{} abscissae vs {} values",
                ys.len(),
                values.len()
            )));
        }
        if !(support_lo <= support_hi) {
            return Err(CoreError::InvalidProfile(format!(
                "support [{support_lo}, {support_hi}] is empty"
            )));
        }
        let dy = (ys[ys.len() - 1] - ys[0]) / (ys.len() - 1) as f64;
        if !(dy > 0.0) {
            return Err(CoreError::InvalidProfile("abscissae not increasing".into()));
        }
        for w in ys.windows(2) {
            let step = w[1] - w[0];
            if !(step > 0.0) || ((step - dy) / dy).abs() > SPACING_RTOL {
                return Err(CoreError::InvalidProfile(format!(
                    "non-uniform spacing: {} vs {}",
                    step, dy
                )));
            }
        }
        for (&y, &v) in ys.iter().zip(&values) {
            if !v.is_finite() {
                return Err(CoreError::InvalidProfile(format!("non-finite value at y = {y}")));
            }
            if (y < support_lo || y > support_hi) && v != 0.0 {
                return Err(CoreError::InvalidProfile(format!(
                    "nonzero value {v} at y = {y} outside support [{support_lo}, {support_hi}]"
                )));
            }
        }
        Ok(Self { ys, values, support_lo, support_hi })
    }

    /// Sample `f` on `n` evenly spaced points over `[a, b]`; the support is
    /// the full interval.
    pub fn from_fn(a: f64, b: f64, n: usize, f: impl Fn(f64) -> f64) -> Result<Self> {
        let ys = crate::grid::linspace(a, b, n);
        let values = ys.iter().map(|&y| f(y)).collect();
        Self::new(ys, values, a, b)
    }

    /// Indicator of `[a, b]` sampled on a grid spanning `[grid_lo, grid_hi]`.
    pub fn indicator(a: f64, b: f64, grid_lo: f64, grid_hi: f64, n: usize) -> Result<Self> {
        let ys = crate::grid::linspace(grid_lo, grid_hi, n);
        let values = ys.iter().map(|&y| if y >= a && y <= b { 1.0 } else { 0.0 }).collect();
        Self::new(ys, values, a, b)
    }

    pub fn ys(&self) -> &[f64] {
        &self.ys
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn dy(&self) -> f64 {
        (self.ys[self.ys.len() - 1] - self.ys[0]) / (self.ys.len() - 1) as f64
    }

    pub fn support(&self) -> (f64, f64) {
        (self.support_lo, self.support_hi)
    }

    pub fn grid_bounds(&self) -> (f64, f64) {
        (self.ys[0], self.ys[self.ys.len() - 1])
    }

    /// Index range of samples inside the support (inclusive).
    fn support_indices(&self) -> (usize, usize) {
        let n = self.ys.len();
        let mut j0 = 0;
        while j0 < n && self.ys[j0] < self.support_lo {
            j0 += 1;
        }
        let mut j1 = n - 1;
        while j1 > 0 && self.ys[j1] > self.support_hi {
            j1 -= 1;
        }
        (j0.min(n - 1), j1)
    }

    /// Linear interpolation of the sampled values; zero outside the grid.
    pub fn value_at(&self, y: f64) -> f64 {
        let n = self.ys.len();
        if y < self.ys[0] || y > self.ys[n - 1] {
            return 0.0;
        }
        let dy = self.dy();
        let pos = (y - self.ys[0]) / dy;
        let k = (pos.floor() as usize).min(n - 2);
        let frac = pos - k as f64;
        self.values[k] * (1.0 - frac) + self.values[k + 1] * frac
    }

    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(
            self.ys.clone(),
            self.values.iter().map(|v| v * factor).collect(),
            self.support_lo,
            self.support_hi,
        )
    }

    /// Pointwise sum of two profiles sharing the same grid.
    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.ys != other.ys {
            return Err(CoreError::InvalidProfile("grids differ".into()));
        }
        Self::new(
            self.ys.clone(),
            self.values.iter().zip(&other.values).map(|(a, b)| a + b).collect(),
            self.support_lo.min(other.support_lo),
            self.support_hi.max(other.support_hi),
        )
    }
}

/// `u(y, t)` sampled on a space-time lattice (one row per time).
#[derive(Debug, Clone, PartialEq)]
pub struct SpaceTimeField {
    pub ys: Vec<f64>,
    pub ts: Vec<f64>,
    /// `values[[i, j]] = u(ys[j], ts[i])`.
    pub values: Array2<f64>,
}

impl SpaceTimeField {
    pub fn new(ys: Vec<f64>, ts: Vec<f64>, values: Array2<f64>) -> Result<Self> {
        if values.nrows() != ts.len() || values.ncols() != ys.len() {
            return Err(CoreError::InvalidField(format!(
                "value matrix {:?} does not match {} times x {} points",
                values.dim(),
                ts.len(),
                ys.len()
            )));
        }
        for w in ts.windows(2) {
            if !(w[1] > w[0]) {
                return Err(CoreError::InvalidField("times not strictly increasing".into()));
            }
        }
        if ts.first().copied().unwrap_or(0.0) < 0.0 {
            return Err(CoreError::InvalidField("negative time".into()));
        }
        Ok(Self { ys, ts, values })
    }

    pub fn dy(&self) -> f64 {
        (self.ys[self.ys.len() - 1] - self.ys[0]) / (self.ys.len() - 1) as f64
    }

    /// Index of the row holding time `t` (must match a sample time).
    pub fn row_index(&self, t: f64) -> Result<usize> {
        let tol = 1e-9 * t.abs().max(1.0);
        self.ts
            .iter()
            .position(|&ti| (ti - t).abs() <= tol)
            .ok_or_else(|| CoreError::InvalidField(format!("t = {t} is not a sampled time")))
    }
}

/// Temperature at a single point, `t >= 0`.
///
/// For `t > 0` this is the composite-trapezoid value of the kernel
/// convolution over the support of `u0`; for `t = 0` the initial condition is
/// interpolated directly (the kernel is singular there).
pub fn solve_heat(u0: &Profile1D, y: f64, t: f64) -> Result<f64> {
    if t < 0.0 || !t.is_finite() {
        return Err(CoreError::NonPositiveTime(t));
    }
    if t == 0.0 {
        return Ok(u0.value_at(y));
    }
    let (j0, j1) = u0.support_indices();
    let dy = u0.dy();
    let mut acc = 0.0;
    for j in j0..=j1 {
        let w = if j == j0 || j == j1 { 0.5 * dy } else { dy };
        let v = u0.values[j];
        if v != 0.0 {
            acc += w * v * kernel_unchecked(y - u0.ys[j], t);
        }
    }
    Ok(acc)
}

/// Spatial derivative `u_y(y, t)` for `t > 0`, obtained by differentiating
/// the kernel under the integral (no field finite differences).
pub fn solve_heat_dy(u0: &Profile1D, y: f64, t: f64) -> Result<f64> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(CoreError::NonPositiveTime(t));
    }
    let (j0, j1) = u0.support_indices();
    let dy = u0.dy();
    let mut acc = 0.0;
    for j in j0..=j1 {
        let w = if j == j0 || j == j1 { 0.5 * dy } else { dy };
        let v = u0.values[j];
        if v != 0.0 {
            acc += w * v * kernel_dx_unchecked(y - u0.ys[j], t);
        }
    }
    Ok(acc)
}

/// Batched [`solve_heat`] over the profile's own grid, one row per time.
pub fn solve_field(u0: &Profile1D, ts: &[f64]) -> Result<SpaceTimeField> {
    solve_field_on_grid(u0, u0.ys(), ts)
}

/// Batched [`solve_heat`] on an arbitrary evaluation grid.
pub fn solve_field_on_grid(u0: &Profile1D, ys: &[f64], ts: &[f64]) -> Result<SpaceTimeField> {
    let mut values = Array2::zeros((ts.len(), ys.len()));
    for (i, &t) in ts.iter().enumerate() {
        for (j, &y) in ys.iter().enumerate() {
            values[[i, j]] = solve_heat(u0, y, t)?;
        }
    }
    SpaceTimeField::new(ys.to_vec(), ts.to_vec(), values)
}

/// Integral over `[a, b]` of the piecewise-linear interpolant of the samples
/// `(xs, vals)`. On full cells this is exactly the trapezoid rule; partial
/// end cells integrate the interpolant, so adjacent regions add up exactly.
pub fn integrate_linear(xs: &[f64], vals: &[f64], a: f64, b: f64) -> f64 {
    debug_assert_eq!(xs.len(), vals.len());
    let n = xs.len();
    let (a, b) = (a.max(xs[0]), b.min(xs[n - 1]));
    if !(b > a) {
        return 0.0;
    }
    let dx = (xs[n - 1] - xs[0]) / (n - 1) as f64;
    let interp = |x: f64| -> f64 {
        let pos = (x - xs[0]) / dx;
        let k = (pos.floor() as usize).min(n - 2);
        let frac = pos - k as f64;
        vals[k] * (1.0 - frac) + vals[k + 1] * frac
    };
    let ka = ((a - xs[0]) / dx).ceil() as usize;
    let kb = ((b - xs[0]) / dx).floor() as usize;
    let (ka, kb) = (ka.min(n - 1), kb.min(n - 1));
    if ka > kb {
        // both endpoints inside one cell
        return 0.5 * (interp(a) + interp(b)) * (b - a);
    }
    let mut acc = 0.5 * (interp(a) + vals[ka]) * (xs[ka] - a);
    for k in ka..kb {
        acc += 0.5 * (vals[k] + vals[k + 1]) * dx;
    }
    acc += 0.5 * (vals[kb] + interp(b)) * (b - xs[kb]);
    acc
}

/// The norm kinds used by the stability statements.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NormKind {
    L1Space,
    L2Space,
    L2SpaceTime,
    L1Curve,
}

/// How a curve integral is weighted: by the height parameter `dy` or by the
/// diffusion-time parameter `dt` of the curve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum CurveWeighting {
    #[default]
    PerHeight,
    PerTime,
}

/// A computed region norm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegionNorm {
    pub kind: NormKind,
    pub value: f64,
}

fn check_interval(lo: f64, hi: f64, grid_lo: f64, grid_hi: f64) -> Result<(f64, f64)> {
    let slack = 1e-9 * (grid_hi - grid_lo).abs().max(1.0);
    let a = if lo == f64::NEG_INFINITY { grid_lo } else { lo };
    let b = if hi == f64::INFINITY { grid_hi } else { hi };
    if a < grid_lo - slack || b > grid_hi + slack || a > b {
        return Err(CoreError::RegionOutsideGrid(format!(
            "[{lo}, {hi}] vs grid [{grid_lo}, {grid_hi}]"
        )));
    }
    Ok((a.max(grid_lo), b.min(grid_hi)))
}

/// `L^1` norm of a profile over an interval (`+-inf` select the whole grid).
pub fn norm_l1_space(p: &Profile1D, lo: f64, hi: f64) -> Result<RegionNorm> {
    let (glo, ghi) = p.grid_bounds();
    let (a, b) = check_interval(lo, hi, glo, ghi)?;
    let abs: Vec<f64> = p.values.iter().map(|v| v.abs()).collect();
    Ok(RegionNorm { kind: NormKind::L1Space, value: integrate_linear(&p.ys, &abs, a, b) })
}

/// `L^2` norm of a profile over an interval.
pub fn norm_l2_space(p: &Profile1D, lo: f64, hi: f64) -> Result<RegionNorm> {
    let (glo, ghi) = p.grid_bounds();
    let (a, b) = check_interval(lo, hi, glo, ghi)?;
    let sq: Vec<f64> = p.values.iter().map(|v| v * v).collect();
    Ok(RegionNorm {
        kind: NormKind::L2Space,
        value: integrate_linear(&p.ys, &sq, a, b).max(0.0).sqrt(),
    })
}

/// Space-time `L^2` norm of a field over `[y_lo, y_hi] x [t_lo, t_hi]`.
pub fn norm_l2_spacetime(
    field: &SpaceTimeField,
    y_lo: f64,
    y_hi: f64,
    t_lo: f64,
    t_hi: f64,
) -> Result<RegionNorm> {
    let n = field.ys.len();
    let (a, b) = check_interval(y_lo, y_hi, field.ys[0], field.ys[n - 1])?;
    let (ta, tb) = check_interval(t_lo, t_hi, field.ts[0], field.ts[field.ts.len() - 1])?;
    let g: Vec<f64> = (0..field.ts.len())
        .map(|i| {
            let sq: Vec<f64> = field.values.row(i).iter().map(|v| v * v).collect();
            integrate_linear(&field.ys, &sq, a, b)
        })
        .collect();
    Ok(RegionNorm {
        kind: NormKind::L2SpaceTime,
        value: integrate_linear(&field.ts, &g, ta, tb).max(0.0).sqrt(),
    })
}

/// `L^1` norm of the heat solution along a sampled curve `{(y_i, t_i)}`.
///
/// The curve samples must be monotone in the chosen parameter; the values
/// `u(y_i, t_i)` come from [`solve_heat`] so the times need not lie on any
/// field grid.
pub fn norm_l1_curve(
    u0: &Profile1D,
    points: &[(f64, f64)],
    weighting: CurveWeighting,
) -> Result<RegionNorm> {
    if points.len() < 2 {
        return Err(CoreError::RegionOutsideGrid("curve needs at least two samples".into()));
    }
    let vals: Vec<f64> = points
        .iter()
        .map(|&(y, t)| solve_heat(u0, y, t).map(|u| u.abs()))
        .collect::<Result<_>>()?;
    let mut acc = 0.0;
    for i in 0..points.len() - 1 {
        let dp = match weighting {
            CurveWeighting::PerHeight => (points[i + 1].0 - points[i].0).abs(),
            CurveWeighting::PerTime => (points[i + 1].1 - points[i].1).abs(),
        };
        acc += 0.5 * (vals[i] + vals[i + 1]) * dp;
    }
    Ok(RegionNorm { kind: NormKind::L1Curve, value: acc })
}

/// Which side of the moving boundary the energy integral covers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

/// One-sided exterior energy `1/2 * integral of u(., t)^2` between the grid
/// edge and the branch position `rho(t)`.
pub fn exterior_energy(
    field: &SpaceTimeField,
    rho: impl Fn(f64) -> f64,
    t: f64,
    side: Side,
) -> Result<f64> {
    let i = field.row_index(t)?;
    let n = field.ys.len();
    let b = rho(t);
    if b < field.ys[0] || b > field.ys[n - 1] {
        return Err(CoreError::RegionOutsideGrid(format!(
            "rho(t) = {b} outside grid [{}, {}]",
            field.ys[0],
            field.ys[n - 1]
        )));
    }
    let sq: Vec<f64> = field.values.row(i).iter().map(|v| v * v).collect();
    let value = match side {
        Side::Left => integrate_linear(&field.ys, &sq, field.ys[0], b),
        Side::Right => integrate_linear(&field.ys, &sq, b, field.ys[n - 1]),
    };
    Ok(0.5 * value)
}

/// Maximal convexity violation of `t -> log ||u(., t)||_{L^2}^2` on the given
/// times; a correct solver keeps this at quadrature-noise level.
pub fn log_convexity_check(u0: &Profile1D, ts: &[f64]) -> Result<f64> {
    if ts.len() < 3 {
        return Err(CoreError::InvalidStability(format!(
            "need at least 3 times, got {}",
            ts.len()
        )));
    }
    for w in ts.windows(2) {
        if !(w[1] > w[0]) {
            return Err(CoreError::InvalidStability("times not strictly increasing".into()));
        }
    }
    let t_min = ts[0];
    let t_max = ts[ts.len() - 1];
    if !(t_min > 0.0) {
        return Err(CoreError::NonPositiveTime(t_min));
    }
    // Evaluation grid: covers the support plus the Gaussian tails, fine
    // enough that the trapezoid sum of the smoothed field is spectrally
    // accurate at the smallest time.
    let (slo, shi) = u0.support();
    let pad = TAIL_WIDTHS * (4.0 * t_max).sqrt();
    let (lo, hi) = (slo - pad, shi + pad);
    let dy = 0.5 * t_min.sqrt();
    let n = (((hi - lo) / dy).ceil() as usize + 2).max(64);
    let ys = crate::grid::linspace(lo, hi, n);

    let mut log_n = Vec::with_capacity(ts.len());
    for &t in ts {
        let mut acc = 0.0;
        for (j, &y) in ys.iter().enumerate() {
            let u = solve_heat(u0, y, t)?;
            let w = if j == 0 || j == n - 1 { 0.5 } else { 1.0 };
            acc += w * u * u;
        }
        acc *= (hi - lo) / (n - 1) as f64;
        if !(acc > 0.0) {
            return Err(CoreError::InvalidStability(format!(
                "zero L2 norm at t = {t}: log undefined"
            )));
        }
        log_n.push(acc.ln());
    }
    let mut worst = f64::NEG_INFINITY;
    for i in 1..ts.len() - 1 {
        let lambda = (ts[i + 1] - ts[i]) / (ts[i + 1] - ts[i - 1]);
        let chord = lambda * log_n[i - 1] + (1.0 - lambda) * log_n[i + 1];
        worst = worst.max(log_n[i] - chord);
    }
    Ok(worst)
}
