//! Forward model of the scanning measurement: the diffusion time
//! `sigma(s, y)`, attenuation line integrals, the camera measurement
//! `p(s, y)`, and detection of the monotone branches of `sigma`.
//!
//! At a fixed detector pixel `s`, the beam illuminating height `y` enters
//! the medium at `gamma(y)` and accumulates beam-broadening variance
//!
//! `sigma(s, y) = 1/2 * int_{gamma(y)}^{s} (s - tau)^2 psi(tau, y) dtau`.
//!
//! With the effective initial profile
//! `u0(r) = mu(s, r) exp(-int_r^inf a(s, tau) dtau)`, the measurement is the
//! heat solution `u(y, sigma(s, y))` times the illumination attenuation, so
//! every measurement is a point on the graph of `sigma` in space-time.
//! Right-side illumination mirrors the geometry through `x -> s1 - x`.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::geometry::{entry_depth, IllumSide};
use crate::heat::kernel_unchecked;
use crate::phantom::PhantomSet;

/// Relative threshold (times max sigma) below which a sigma sample counts
/// as zero during support detection. Cubic vanishing at the window edges
/// makes absolute thresholds scale-fragile.
pub const SIGMA_SUPPORT_TOL: f64 = 1e-14;

/// Composite trapezoid of `f` over `[a, b]`: interior nodes at the cell
/// centers `x0 + (i + 1/2) dx`, plus the two endpoints.
fn trap_over_centers(x0: f64, dx: f64, n: usize, a: f64, b: f64, f: impl Fn(f64) -> f64) -> f64 {
    if !(b > a) {
        return 0.0;
    }
    let mut acc = 0.0;
    let mut prev_x = a;
    let mut prev_f = f(a);
    let first = ((a - x0) / dx - 0.5).ceil().max(0.0) as usize;
    for i in first..n {
        let xc = x0 + (i as f64 + 0.5) * dx;
        if xc >= b {
            break;
        }
        if xc > a {
            let v = f(xc);
            acc += 0.5 * (prev_f + v) * (xc - prev_x);
            prev_x = xc;
            prev_f = v;
        }
    }
    let fb = f(b);
    acc + 0.5 * (prev_f + fb) * (b - prev_x)
}

/// Remap an exact boundary endpoint a hair into the medium, so that field
/// evaluations at the entry point read the interior trace instead of
/// falling on the wrong side of the boundary by one rounding error.
fn nudged(tau: f64, entry: f64, inward: f64) -> f64 {
    if tau == entry {
        tau + inward
    } else {
        tau
    }
}

/// Trapezoid of the attenuation field along x at fixed height (exposed for
/// the interval-additivity checks).
pub fn optical_depth_x(phantom: &PhantomSet, y: f64, a: f64, b: f64) -> f64 {
    let g = &phantom.grid;
    trap_over_centers(g.x0, g.dx(), g.nx, a, b, |tau| phantom.lambda_at(tau, y))
}

fn check_scan_range(phantom: &PhantomSet, s: f64) -> Result<()> {
    let tol = 1e-12 * phantom.domain.s1;
    if s < phantom.s_minus - tol || s > phantom.s_plus + tol {
        return Err(CoreError::DepthOutsideScanLimits {
            s,
            s_minus: phantom.s_minus,
            s_plus: phantom.s_plus,
        });
    }
    Ok(())
}

/// Beam path through the medium for one side: `(from, to, entry, inward)`
/// with `from < to`, `entry` the boundary endpoint and `inward` the nudge
/// direction into the medium; `None` when the beam never enters before
/// reaching the pixel.
fn beam_path(
    phantom: &PhantomSet,
    s: f64,
    y: f64,
    side: IllumSide,
) -> Result<Option<(f64, f64, f64, f64)>> {
    let gamma = entry_depth(&phantom.object, &phantom.domain, y, side)?;
    let nudge = 1e-9 * phantom.grid.dx();
    Ok(match (side, gamma) {
        (IllumSide::Left, Some(g)) if g <= s => Some((g, s, g, nudge)),
        (IllumSide::Right, Some(g)) if g >= s => Some((s, g, g, -nudge)),
        _ => None,
    })
}

/// Diffusion time accumulated by the beam before it reaches pixel `s`.
/// Zero-extension: vanishes whenever `y` is not visible from the given side.
pub fn sigma(phantom: &PhantomSet, s: f64, y: f64, side: IllumSide) -> Result<f64> {
    check_scan_range(phantom, s)?;
    match beam_path(phantom, s, y, side)? {
        None => Ok(0.0),
        Some((a, b, entry, inward)) => {
            let g = &phantom.grid;
            Ok(0.5
                * trap_over_centers(g.x0, g.dx(), g.nx, a, b, |tau| {
                    (s - tau) * (s - tau) * phantom.psi_at(nudged(tau, entry, inward), y)
                }))
        }
    }
}

/// Analytic height-derivative of `sigma` at fixed `s`: the boundary term
/// `-gamma'(y) (s - gamma)^2 psi(gamma, y) / 2` plus the integral of
/// `(s - tau)^2 d(psi)/dy / 2`, where `d(psi)/dy` differentiates only the
/// smooth interior field (the support motion is already carried by the
/// `gamma'` term). `gamma'` is a central difference on the sampled geometry.
pub fn sigma_prime(phantom: &PhantomSet, s: f64, y: f64, side: IllumSide) -> Result<f64> {
    check_scan_range(phantom, s)?;
    let (a, b, entry, inward) = match beam_path(phantom, s, y, side)? {
        None => return Ok(0.0),
        Some(p) => p,
    };
    let h = phantom.grid.dy();
    let gamma_at = |yy: f64| -> Result<Option<f64>> {
        if yy.abs() > phantom.domain.y1 {
            return Ok(None);
        }
        entry_depth(&phantom.object, &phantom.domain, yy, side)
    };
    let g0 = gamma_at(y)?
        .ok_or_else(|| CoreError::InvalidGeometry(format!("no entry depth at y = {y}")))?;
    let gamma_d = match (gamma_at(y - h)?, gamma_at(y + h)?) {
        (Some(lo), Some(hi)) => (hi - lo) / (2.0 * h),
        (None, Some(hi)) => (hi - g0) / h,
        (Some(lo), None) => (g0 - lo) / h,
        (None, None) => 0.0,
    };
    let psi_at_gamma = phantom.psi_at(g0 + inward, y);
    let boundary = match side {
        IllumSide::Left => -0.5 * gamma_d * (s - g0) * (s - g0) * psi_at_gamma,
        IllumSide::Right => 0.5 * gamma_d * (s - g0) * (s - g0) * psi_at_gamma,
    };
    let g = &phantom.grid;
    let integral = trap_over_centers(g.x0, g.dx(), g.nx, a, b, |tau| {
        (s - tau) * (s - tau) * phantom.psi_interior_dy(nudged(tau, entry, inward), y, h)
    });
    Ok(boundary + 0.5 * integral)
}

/// Optical depth of the illumination path: `int lambda` from the entry point
/// to the pixel. Zero when the beam misses the medium.
pub fn attenuation_illum(phantom: &PhantomSet, s: f64, y: f64, side: IllumSide) -> Result<f64> {
    check_scan_range(phantom, s)?;
    match beam_path(phantom, s, y, side)? {
        None => Ok(0.0),
        Some((a, b, entry, inward)) => {
            let g = &phantom.grid;
            Ok(trap_over_centers(g.x0, g.dx(), g.nx, a, b, |tau| {
                phantom.lambda_at(nudged(tau, entry, inward), y)
            }))
        }
    }
}

/// Optical depth seen by fluorescent light emitted at height `r` on its way
/// up to the camera: `int_r^{top} a(s, tau) dtau` (`a` vanishes above the
/// medium, so the tail is finite).
pub fn attenuation_fluor(phantom: &PhantomSet, s: f64, r: f64) -> f64 {
    let g = &phantom.grid;
    trap_over_centers(g.y0, g.dy(), g.ny, r, phantom.domain.y1, |tau| phantom.a_at(s, tau))
}

/// Per-pixel emission data reused across illumination heights: the source
/// slice `mu(s, .)`, the fluorescence attenuation factors, and the height
/// grid. Building it once per pixel keeps measurement sweeps O(ny) per row.
pub struct SliceKernel {
    pub s: f64,
    pub ys: Vec<f64>,
    pub dy: f64,
    pub mu: Vec<f64>,
    /// `exp(-int_r^top a)` per height cell.
    pub emission: Vec<f64>,
    /// `mu * emission` per height cell: the effective initial profile.
    pub u0_values: Vec<f64>,
}

impl SliceKernel {
    pub fn new(phantom: &PhantomSet, s: f64) -> Self {
        let ys = phantom.grid.ys();
        let mu = phantom.mu_slice(s);
        let emission: Vec<f64> =
            ys.iter().map(|&r| (-attenuation_fluor(phantom, s, r)).exp()).collect();
        let u0_values: Vec<f64> = mu.iter().zip(&emission).map(|(m, e)| m * e).collect();
        SliceKernel { s, dy: phantom.grid.dy(), ys, mu, emission, u0_values }
    }

    /// Kernel quadrature `sum_j dy * u0_j * K(r_j - y, sigma)`; the trapezoid
    /// end weights never matter because the source support keeps a margin to
    /// the domain edge.
    pub fn convolve(&self, y: f64, sig: f64) -> f64 {
        let mut acc = 0.0;
        for (j, &v) in self.u0_values.iter().enumerate() {
            if v != 0.0 {
                acc += self.dy * v * kernel_unchecked(self.ys[j] - y, sig);
            }
        }
        acc
    }

    /// Point evaluation used in the degenerate `sigma = 0` limit.
    pub fn point_value(&self, phantom: &PhantomSet, y: f64) -> f64 {
        phantom.field_at(&phantom.mu, self.s, y) * (-attenuation_fluor(phantom, self.s, y)).exp()
    }
}

/// Camera measurement `p(s, y)` for one illumination; `c` is the camera
/// gain. When `sigma = 0` the Gaussian degenerates to a point evaluation.
pub fn measure(phantom: &PhantomSet, s: f64, y: f64, side: IllumSide, c: f64) -> Result<f64> {
    let slice = SliceKernel::new(phantom, s);
    measure_with_slice(phantom, &slice, s, y, side, c)
}

/// [`measure`] with a prebuilt [`SliceKernel`] for sweep loops.
pub fn measure_with_slice(
    phantom: &PhantomSet,
    slice: &SliceKernel,
    s: f64,
    y: f64,
    side: IllumSide,
    c: f64,
) -> Result<f64> {
    check_scan_range(phantom, s)?;
    if y.abs() > phantom.domain.y1 {
        return Err(CoreError::HeightOutsideDomain { y, y1: phantom.domain.y1 });
    }
    if beam_path(phantom, s, y, side)?.is_none() {
        return Ok(0.0);
    }
    let sig = sigma(phantom, s, y, side)?;
    let att = attenuation_illum(phantom, s, y, side)?;
    let gain = c * (-att).exp();
    if sig > 0.0 {
        Ok(gain * slice.convolve(y, sig))
    } else {
        Ok(gain * slice.point_value(phantom, y))
    }
}

/// One detector pixel's sigma curve with its detected monotone branches.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SigmaProfile {
    pub s: f64,
    pub side: IllumSide,
    /// Height samples covering the sigma support window `[y_lo, y_hi]`.
    pub ys: Vec<f64>,
    pub sigma: Vec<f64>,
    /// Central finite differences of the sigma samples.
    pub sigma_prime: Vec<f64>,
    pub y_lo: f64,
    pub y_hi: f64,
    /// Monotone branch lengths after re-trimming.
    pub xi1: f64,
    pub xi2: f64,
    /// Branch end values before re-trimming.
    pub t1: f64,
    pub t2: f64,
    /// Common observation horizon `T = min(T1, T2)`.
    pub t_obs: f64,
    /// Left branch knots `(t, y)` with strictly increasing `t`.
    pub rho_left: Vec<(f64, f64)>,
    /// Right branch knots `(t, y)` with strictly increasing `t`.
    pub rho_right: Vec<(f64, f64)>,
}

/// Detect the sigma-structure of the samples `(ys, sig)`: the support
/// window, the monotone branches, the horizons `T1`/`T2`, and the re-trimmed
/// common horizon `T = min(T1, T2)`.
pub fn sigma_profile_from_samples(
    s: f64,
    side: IllumSide,
    ys: &[f64],
    sig: &[f64],
    tol_factor: f64,
) -> Result<SigmaProfile> {
    if ys.len() != sig.len() || ys.len() < 8 {
        return Err(CoreError::SigmaProperty(format!(
            "need >= 8 matching samples, got {} / {}",
            ys.len(),
            sig.len()
        )));
    }
    let max_sigma = sig.iter().cloned().fold(0.0f64, f64::max);
    if !(max_sigma > 0.0) {
        return Err(CoreError::SigmaProperty("sigma vanishes identically".into()));
    }
    let tol = tol_factor * max_sigma;
    let i0 = sig.iter().position(|&v| v > tol).unwrap();
    let i1 = sig.iter().rposition(|&v| v > tol).unwrap();
    if i1 - i0 + 1 < 4 {
        return Err(CoreError::SigmaProperty("support window too narrow".into()));
    }
    // longest strictly increasing run from the lower edge
    let mut k1 = i0;
    while k1 + 1 <= i1 && sig[k1 + 1] > sig[k1] {
        k1 += 1;
    }
    if k1 == i0 {
        return Err(CoreError::SigmaProperty(
            "no increasing run at the lower window edge (property iii fails)".into(),
        ));
    }
    // longest strictly decreasing run into the upper edge
    let mut k2 = i1;
    while k2 > i0 && sig[k2 - 1] > sig[k2] {
        k2 -= 1;
    }
    if k2 == i1 {
        return Err(CoreError::SigmaProperty(
            "no decreasing run at the upper window edge (property iii fails)".into(),
        ));
    }
    let t1 = sig[k1];
    let t2 = sig[k2];
    let t_obs = t1.min(t2);

    // left branch: knots (t, y), walking up from the lower edge and stopping
    // at the interpolated sigma = T crossing
    let mut rho_left: Vec<(f64, f64)> = vec![(0.0, ys[i0])];
    let mut left_tip = (t1, ys[k1]);
    for j in (i0 + 1)..=k1 {
        if sig[j] >= t_obs {
            let (s0, s1) = (sig[j - 1], sig[j]);
            let frac = if s1 > s0 { (t_obs - s0) / (s1 - s0) } else { 1.0 };
            left_tip = (t_obs, ys[j - 1] + frac * (ys[j] - ys[j - 1]));
            break;
        }
        rho_left.push((sig[j], ys[j]));
    }
    rho_left.push(left_tip);

    // right branch: walk down from the upper edge
    let mut rho_right: Vec<(f64, f64)> = vec![(0.0, ys[i1])];
    let mut right_tip = (t2, ys[k2]);
    for j in (k2..i1).rev() {
        if sig[j] >= t_obs {
            let (s0, s1) = (sig[j + 1], sig[j]);
            let frac = if s1 > s0 { (t_obs - s0) / (s1 - s0) } else { 1.0 };
            right_tip = (t_obs, ys[j + 1] + frac * (ys[j] - ys[j + 1]));
            break;
        }
        rho_right.push((sig[j], ys[j]));
    }
    rho_right.push(right_tip);

    let y_lo = ys[i0];
    let y_hi = ys[i1];
    let window_ys: Vec<f64> = ys[i0..=i1].to_vec();
    let window_sigma: Vec<f64> = sig[i0..=i1].to_vec();
    // central differences inside, one-sided at the window ends
    let n = window_ys.len();
    let mut sp = vec![0.0; n];
    for k in 0..n {
        let (kl, kr) = (k.saturating_sub(1), (k + 1).min(n - 1));
        sp[k] = (window_sigma[kr] - window_sigma[kl]) / (window_ys[kr] - window_ys[kl]);
    }

    Ok(SigmaProfile {
        s,
        side,
        ys: window_ys,
        sigma: window_sigma,
        sigma_prime: sp,
        y_lo,
        y_hi,
        xi1: left_tip.1 - y_lo,
        xi2: y_hi - right_tip.1,
        t1,
        t2,
        t_obs,
        rho_left,
        rho_right,
    })
}

/// Sample `sigma(s, .)` for one side of a phantom and detect its structure.
/// `n_samples = None` samples at the phantom's height cell centers.
pub fn detect_sigma_properties(
    phantom: &PhantomSet,
    s: f64,
    side: IllumSide,
    n_samples: Option<usize>,
    tol_factor: f64,
) -> Result<SigmaProfile> {
    let ys = match n_samples {
        None => phantom.grid.ys(),
        Some(n) => {
            // cell centers of an n-cell grid over the height range, so the
            // sampling stays symmetric for symmetric objects
            let dy = 2.0 * phantom.domain.y1 / n as f64;
            (0..n).map(|j| -phantom.domain.y1 + (j as f64 + 0.5) * dy).collect()
        }
    };
    let sig: Vec<f64> = ys.iter().map(|&y| sigma(phantom, s, y, side)).collect::<Result<_>>()?;
    sigma_profile_from_samples(s, side, &ys, &sig, tol_factor)
}

impl SigmaProfile {
    /// The limited-illumination heights
    /// `(y_lo, y_lo + xi1) U (y_hi - xi2, y_hi)`.
    pub fn observation_intervals(&self) -> ((f64, f64), (f64, f64)) {
        ((self.y_lo, self.y_lo + self.xi1), (self.y_hi - self.xi2, self.y_hi))
    }

    fn rho_eval(knots: &[(f64, f64)], t: f64) -> f64 {
        let t = t.clamp(knots[0].0, knots[knots.len() - 1].0);
        let idx = knots.partition_point(|&(tk, _)| tk <= t);
        if idx == 0 {
            return knots[0].1;
        }
        if idx >= knots.len() {
            return knots[knots.len() - 1].1;
        }
        let (t0, y0) = knots[idx - 1];
        let (t1, y1) = knots[idx];
        if t1 > t0 {
            y0 + (t - t0) / (t1 - t0) * (y1 - y0)
        } else {
            y0
        }
    }

    /// Left branch inverse `rho_L(t)` by monotone linear interpolation.
    pub fn rho_l(&self, t: f64) -> f64 {
        Self::rho_eval(&self.rho_left, t)
    }

    /// Right branch inverse `rho_R(t)`.
    pub fn rho_r(&self, t: f64) -> f64 {
        Self::rho_eval(&self.rho_right, t)
    }

    /// `(1/sigma') * exp(-1/sigma)` sampled along the approach to each
    /// window edge; property iv makes this tend to zero (in floating point
    /// it underflows to exactly zero close to the edge).
    pub fn exp_order_trace(&self) -> (Vec<(f64, f64)>, Vec<(f64, f64)>) {
        let n = self.ys.len();
        let take = (n / 4).max(2).min(n - 1);
        let mut left = Vec::new();
        for k in 1..take {
            let (y, sv, sp) = (self.ys[k], self.sigma[k], self.sigma_prime[k]);
            if sv > 0.0 && sp != 0.0 {
                left.push((y, (-1.0 / sv).exp() / sp));
            }
        }
        let mut right = Vec::new();
        for k in (n - take..n - 1).rev() {
            let (y, sv, sp) = (self.ys[k], self.sigma[k], self.sigma_prime[k]);
            if sv > 0.0 && sp != 0.0 {
                right.push((y, (-1.0 / sv).exp() / sp.abs()));
            }
        }
        (left, right)
    }
}

/// A point of the measurement curve: height, diffusion time, and the heat
/// value recovered from the measurement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub y: f64,
    pub t: f64,
    pub u: f64,
}

/// Invert the measurements along one profile back to heat-solution samples:
/// `u(y, sigma(y)) = exp(+int lambda) p(s, y) / c`.
pub fn curve_trace(
    profile: &SigmaProfile,
    phantom: &PhantomSet,
    c: f64,
) -> Result<Vec<CurvePoint>> {
    if c == 0.0 {
        return Err(CoreError::InvalidPhantom("camera gain c must be nonzero".into()));
    }
    let slice = SliceKernel::new(phantom, profile.s);
    let mut out = Vec::with_capacity(profile.ys.len());
    for (k, &y) in profile.ys.iter().enumerate() {
        let p = measure_with_slice(phantom, &slice, profile.s, y, profile.side, c)?;
        let att = attenuation_illum(phantom, profile.s, y, profile.side)?;
        out.push(CurvePoint { y, t: profile.sigma[k], u: att.exp() * p / c });
    }
    Ok(out)
}

/// Full measurement sweep: `m1` illumination heights per side, one column
/// per detector pixel.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MeasurementSet {
    pub s_values: Vec<f64>,
    /// Heights shared by both sides (`m1` of them, at cell centers).
    pub illum_heights: Vec<f64>,
    pub c: f64,
    pub photon_scale: f64,
    /// Shape `(m2, 2 m1)`: row = pixel, columns = left heights then right
    /// heights.
    pub p: Array2<f64>,
}

/// Evenly spread cell-center heights (`m1` of them) used as illuminations.
pub fn illumination_heights(phantom: &PhantomSet, m1: usize) -> Vec<f64> {
    let ny = phantom.grid.ny;
    let m1 = m1.min(ny);
    (0..m1)
        .map(|k| {
            let idx = ((k as f64 + 0.5) * ny as f64 / m1 as f64 - 0.5).round() as usize;
            phantom.grid.y_center(idx.min(ny - 1))
        })
        .collect()
}

/// Sweep the measurement over all pixels and illuminations.
pub fn measure_sweep(
    phantom: &PhantomSet,
    s_values: &[f64],
    m1: usize,
    c: f64,
) -> Result<MeasurementSet> {
    let heights = illumination_heights(phantom, m1);
    let mut p = Array2::zeros((s_values.len(), 2 * heights.len()));
    for (k, &s) in s_values.iter().enumerate() {
        let slice = SliceKernel::new(phantom, s);
        for (i, &y) in heights.iter().enumerate() {
            p[[k, i]] = measure_with_slice(phantom, &slice, s, y, IllumSide::Left, c)?;
            p[[k, heights.len() + i]] =
                measure_with_slice(phantom, &slice, s, y, IllumSide::Right, c)?;
        }
    }
    Ok(MeasurementSet {
        s_values: s_values.to_vec(),
        illum_heights: heights,
        c,
        photon_scale: phantom.params.photon_scale,
        p,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::heat::{solve_heat, Profile1D};
    use crate::phantom::{make_dataset, DatasetParams};
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    fn disk_phantom(c_diff: f64) -> PhantomSet {
        let params = DatasetParams { c_diff, ..DatasetParams::defaults(1) };
        make_dataset(&params, 7).unwrap()
    }

    /// Dataset-1 closed form: constant psi0 on the disk gives
    /// sigma = psi0 ((s - gamma)^3 - (s - exit)^3) / 6 with the weight
    /// clipped at the exit point.
    fn sigma_disk_exact(psi0: f64, s: f64, y: f64) -> f64 {
        let half = (0.64 - y * y).max(0.0).sqrt();
        let gamma = 1.0 - half;
        if gamma > s {
            0.0
        } else {
            let b = s.min(1.0 + half);
            psi0 / 6.0 * ((s - gamma).powi(3) - (s - b).powi(3))
        }
    }

    #[test]
    fn sigma_zero_extension() {
        let p = disk_phantom(1.0);
        assert_eq!(sigma(&p, 0.88, 0.95, IllumSide::Left).unwrap(), 0.0);
        assert_eq!(sigma(&p, 0.88, -0.95, IllumSide::Right).unwrap(), 0.0);
    }

    #[test]
    fn sigma_matches_cubic_closed_form() {
        // constant psi0 = 1 (w1 = 1, c_diff = 1): sigma(0.88, 0) = 0.68^3/6
        let p = disk_phantom(1.0);
        let got = sigma(&p, 0.88, 0.0, IllumSide::Left).unwrap();
        assert_abs_diff_eq!(got, 0.052405333333333333, epsilon = 3e-5);
        for &y in &[0.2, -0.35, 0.6] {
            let expect = sigma_disk_exact(1.0, 0.88, y);
            let got = sigma(&p, 0.88, y, IllumSide::Left).unwrap();
            assert_abs_diff_eq!(got, expect, epsilon = 5e-5);
        }
        // right side mirrors the left through x -> s1 - x
        let got_r = sigma(&p, 1.12, 0.0, IllumSide::Right).unwrap();
        let got_l = sigma(&p, 0.88, 0.0, IllumSide::Left).unwrap();
        assert_relative_eq!(got_r, got_l, max_relative = 1e-10);
    }

    #[test]
    fn sigma_rejects_out_of_scan_depths() {
        let p = disk_phantom(1.0);
        assert!(sigma(&p, 0.1, 0.0, IllumSide::Left).is_err());
        assert!(sigma(&p, 1.9, 0.0, IllumSide::Left).is_err());
    }

    #[test]
    fn sigma_prime_consistent_with_finite_differences() {
        let p = disk_phantom(1.0);
        let s = 0.88;
        for &y in &[-0.4, -0.1, 0.25, 0.5] {
            let analytic = sigma_prime(&p, s, y, IllumSide::Left).unwrap();
            let d = 1e-4;
            let fd = (sigma(&p, s, y + d, IllumSide::Left).unwrap()
                - sigma(&p, s, y - d, IllumSide::Left).unwrap())
                / (2.0 * d);
            assert_abs_diff_eq!(analytic, fd, epsilon = 5e-4);
        }
        // symmetry zero at the center height
        let at0 = sigma_prime(&p, s, 0.0, IllumSide::Left).unwrap();
        assert_abs_diff_eq!(at0, 0.0, epsilon = 1e-10);
        // vanishes toward the window edge where (s - gamma)^2 -> 0
        let w =
            crate::geometry::visible_heights(&p.object, &p.domain, s, 512).unwrap().unwrap();
        let near_edge = sigma_prime(&p, s, w.y_lo + 1e-4, IllumSide::Left).unwrap();
        assert!(near_edge.abs() < 1e-4, "sigma' near edge = {near_edge}");
    }

    #[test]
    fn attenuation_illum_constant_medium() {
        // lambda = 1 on the disk: depth from gamma = 0.2 to s = 0.88 is 0.68
        let p = disk_phantom(1.0);
        let d = attenuation_illum(&p, 0.88, 0.0, IllumSide::Left).unwrap();
        assert_abs_diff_eq!(d, 0.68, epsilon = 2e-2);
        // interval additivity of the trapezoid rule on aligned sub-paths
        let d1 = attenuation_illum(&p, 0.6, 0.0, IllumSide::Left).unwrap();
        let mid = optical_depth_x(&p, 0.0, 0.6, 0.88);
        assert_relative_eq!(d1 + mid, d, max_relative = 1e-12);
        // and on a source-driven attenuation field (dataset 3)
        let p3 = make_dataset(&DatasetParams::defaults(3), 5).unwrap();
        let whole = optical_depth_x(&p3, 0.05, 0.4, 1.3);
        let split = optical_depth_x(&p3, 0.05, 0.4, 0.77) + optical_depth_x(&p3, 0.05, 0.77, 1.3);
        assert_relative_eq!(whole, split, max_relative = 1e-12);
    }

    #[test]
    fn attenuation_fluor_profile() {
        // a = 1 on the disk: from r = 0 the remaining object height is 0.8
        let params = DatasetParams { a0: 1.0, ..DatasetParams::defaults(1) };
        let p = make_dataset(&params, 7).unwrap();
        let depth = attenuation_fluor(&p, 1.0, 0.0);
        assert_abs_diff_eq!(depth, 0.8, epsilon = 2e-2);
        // zero above the medium, nonincreasing in r
        assert_eq!(attenuation_fluor(&p, 1.0, 0.9), 0.0);
        let mut prev = f64::INFINITY;
        for &r in &[-0.5, -0.2, 0.0, 0.4, 0.7] {
            let d = attenuation_fluor(&p, 1.0, r);
            assert!(d <= prev + 1e-15);
            prev = d;
        }
    }

    #[test]
    fn zero_source_measures_zero() {
        let params = DatasetParams { n_sources: 0, c_diff: 1.0, ..DatasetParams::defaults(1) };
        let p = make_dataset(&params, 1).unwrap();
        assert_eq!(measure(&p, 0.88, 0.1, IllumSide::Left, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn measurement_is_attenuated_heat_solution() {
        let p = disk_phantom(1.0);
        let s = 0.88;
        let slice = SliceKernel::new(&p, s);
        let u0 = Profile1D::new(
            slice.ys.clone(),
            slice.u0_values.clone(),
            slice.ys[0],
            slice.ys[slice.ys.len() - 1],
        )
        .unwrap();
        for &y in &[-0.3, 0.0, 0.41] {
            let sig = sigma(&p, s, y, IllumSide::Left).unwrap();
            let att = attenuation_illum(&p, s, y, IllumSide::Left).unwrap();
            let got = measure(&p, s, y, IllumSide::Left, 1.0).unwrap();
            let expect = (-att).exp() * solve_heat(&u0, y, sig).unwrap();
            assert_relative_eq!(got, expect, max_relative = 1e-12);
        }
    }

    #[test]
    fn single_cell_source_is_one_kernel_term() {
        let mut p = disk_phantom(1.0);
        p.mu.fill(0.0);
        let iy = p.grid.y_index(0.1);
        let ix = p.grid.x_index(0.88);
        p.mu[[iy, ix]] = 2.0;
        p.support_mask = p.mu.mapv(|m| m > 0.0);
        let s = p.grid.x_center(ix);
        let y = -0.2;
        let sig = sigma(&p, s, y, IllumSide::Left).unwrap();
        let att = attenuation_illum(&p, s, y, IllumSide::Left).unwrap();
        let r0 = p.grid.y_center(iy);
        let expect = (-att).exp()
            * 2.0
            * p.grid.dy()
            * kernel_unchecked(r0 - y, sig)
            * (-attenuation_fluor(&p, s, r0)).exp();
        let got = measure(&p, s, y, IllumSide::Left, 1.0).unwrap();
        assert_relative_eq!(got, expect, max_relative = 1e-12);
    }

    #[test]
    fn tent_profile_detection() {
        let ys: Vec<f64> = (0..128).map(|k| -1.5 + (k as f64 + 0.5) * (3.0 / 128.0)).collect();
        let sig: Vec<f64> = ys.iter().map(|&y| (1.0 - y.abs()).max(0.0)).collect();
        let prof = sigma_profile_from_samples(0.5, IllumSide::Left, &ys, &sig, 1e-14).unwrap();
        assert_abs_diff_eq!(prof.y_lo, -1.0, epsilon = 0.05);
        assert_abs_diff_eq!(prof.y_hi, 1.0, epsilon = 0.05);
        assert_abs_diff_eq!(prof.xi1, 1.0, epsilon = 0.05);
        assert_abs_diff_eq!(prof.xi2, 1.0, epsilon = 0.05);
        assert_relative_eq!(prof.t1, prof.t2, max_relative = 1e-12);
        assert_eq!(prof.t_obs, prof.t1.min(prof.t2));
        let ((a, b), (c2, d)) = prof.observation_intervals();
        assert!(a < b && c2 < d && b <= c2 + 1e-12);
        // branch inverses undo the tent on their branches
        for &t in &[0.1, 0.45, 0.9] {
            let yl = prof.rho_l(t);
            assert_abs_diff_eq!((1.0 - yl.abs()).max(0.0), t, epsilon = 0.05);
            let yr = prof.rho_r(t);
            assert_abs_diff_eq!((1.0 - yr.abs()).max(0.0), t, epsilon = 0.05);
            assert!(yl < yr);
        }
    }

    #[test]
    fn dataset1_profile_is_symmetric() {
        let p = disk_phantom(0.01);
        let prof = detect_sigma_properties(&p, 0.88, IllumSide::Left, None, 1e-14).unwrap();
        // bitwise symmetry of the sampled sigma gives T1 = T2 exactly
        assert!(
            (prof.t1 - prof.t2).abs() <= 1e-10 * prof.t1.max(prof.t2),
            "T1 = {}, T2 = {}",
            prof.t1,
            prof.t2
        );
        // argmax within one cell of y = 0
        let k_max = (0..prof.sigma.len())
            .max_by(|&a, &b| prof.sigma[a].partial_cmp(&prof.sigma[b]).unwrap())
            .unwrap();
        assert!(prof.ys[k_max].abs() <= p.grid.dy() + 1e-12);
        // detected branch signs
        for k in 0..prof.ys.len() {
            let y = prof.ys[k];
            if y > prof.y_lo && y <= prof.y_lo + prof.xi1 - 1e-12 {
                assert!(prof.sigma_prime[k] > 0.0, "sigma' at {y}");
            }
            if y >= prof.y_hi - prof.xi2 + 1e-12 && y < prof.y_hi {
                assert!(prof.sigma_prime[k] < 0.0, "sigma' at {y}");
            }
        }
    }

    #[test]
    fn asymmetric_dataset_trims_to_min_horizon() {
        let p = make_dataset(&DatasetParams::defaults(2), 3).unwrap();
        let prof = detect_sigma_properties(&p, 0.959, IllumSide::Left, Some(512), 1e-14).unwrap();
        assert_eq!(prof.t_obs, prof.t1.min(prof.t2));
        assert!(prof.t1 != prof.t2, "lobed support should split the horizons");
        // re-trimmed branch tips sit at sigma = T on both sides
        let lt = prof.rho_left[prof.rho_left.len() - 1];
        let rt = prof.rho_right[prof.rho_right.len() - 1];
        assert_relative_eq!(lt.0, prof.t_obs, max_relative = 1e-12);
        assert_relative_eq!(rt.0, prof.t_obs, max_relative = 1e-12);
        let sig_tip_l = sigma(&p, prof.s, lt.1, IllumSide::Left).unwrap();
        let sig_tip_r = sigma(&p, prof.s, rt.1, IllumSide::Left).unwrap();
        assert_relative_eq!(sig_tip_l, prof.t_obs, max_relative = 2e-2);
        assert_relative_eq!(sig_tip_r, prof.t_obs, max_relative = 2e-2);
    }

    #[test]
    fn curve_trace_matches_heat_solution() {
        let p = disk_phantom(1.0);
        let prof = detect_sigma_properties(&p, 0.88, IllumSide::Left, None, 1e-14).unwrap();
        let slice = SliceKernel::new(&p, 0.88);
        let u0 = Profile1D::new(
            slice.ys.clone(),
            slice.u0_values.clone(),
            slice.ys[0],
            slice.ys[slice.ys.len() - 1],
        )
        .unwrap();
        let trace = curve_trace(&prof, &p, 2.0).unwrap();
        for pt in trace.iter().step_by(7) {
            let expect = solve_heat(&u0, pt.y, pt.t).unwrap();
            assert_abs_diff_eq!(pt.u, expect, epsilon = 1e-8 * expect.abs().max(1.0));
        }
        assert!(curve_trace(&prof, &p, 0.0).is_err());
    }

    #[test]
    fn measurements_depend_only_on_their_own_pixel() {
        let p = disk_phantom(0.01);
        let s = 0.88;
        assert_eq!(measure(&p, s, 0.95, IllumSide::Left, 1.0).unwrap(), 0.0);
        // perturbing mu away from the pixel column leaves p unchanged
        let mut q = p.clone();
        let far_ix = q.grid.x_index(1.5);
        for iy in 0..q.grid.ny {
            q.mu[[iy, far_ix]] += 3.0;
        }
        for &y in &[-0.3, 0.0, 0.4] {
            let a = measure(&p, s, y, IllumSide::Left, 1.0).unwrap();
            let b = measure(&q, s, y, IllumSide::Left, 1.0).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn sweep_shape_and_nonnegativity() {
        let p = disk_phantom(0.01);
        let ms = measure_sweep(&p, &[0.7, 0.88, 1.1], 24, 1.0).unwrap();
        assert_eq!(ms.p.dim(), (3, 48));
        assert!(ms.p.iter().all(|&v| v >= 0.0));
    }
}
