//! Numerical verification of the stability constants and energy identities:
//! the mass-leak constant `alpha(R, t)`, the recovery constants built from
//! it, the moving-boundary energy balance, and the empirical stability
//! ratios along measurement curves.
//!
//! The test family for every experiment is a mixture of compactly supported
//! cosine bells: they vanish with their first derivative at the support
//! edges, so the support hypotheses of the inequalities hold at machine
//! precision on the sample grid.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{CoreError, Result};
use crate::forward::SigmaProfile;
use crate::heat::{
    integrate_linear, norm_l1_curve, norm_l1_space, solve_heat, solve_heat_dy, CurveWeighting,
    Profile1D,
};

/// Mass that leaks outside `(-2R, 2R)` by time `t`, maximized over source
/// positions in `[-R, R]`:
/// `alpha(R, t) = [erfc(R / sqrt(4t)) + erfc(3R / sqrt(4t))] / 2`,
/// the supremum being attained at the support edge `r = R`.
pub fn alpha_mass_leak(r: f64, t: f64) -> Result<f64> {
    if !(r > 0.0) || !(t > 0.0) {
        return Err(CoreError::InvalidStability(format!(
            "alpha needs positive R and t, got R = {r}, t = {t}"
        )));
    }
    let root = (4.0 * t).sqrt();
    Ok(0.5 * (erfc(r / root) + erfc(3.0 * r / root)))
}

/// Single-time recovery constant `C7(R, t) = sqrt(4R) / (1 - alpha(R, t))`
/// (`sqrt(4R)` being the square root of the measure of `(-2R, 2R)`).
pub fn c7_constant(r: f64, t: f64) -> Result<f64> {
    let alpha = alpha_mass_leak(r, t)?;
    Ok((4.0 * r).sqrt() / (1.0 - alpha))
}

/// Time-uniform constant over `[t1, t2]`: the supremum of `C7(R, .)`
/// normalized by the time-interval measure,
/// `C8 = sup_t C7(R, t) / sqrt(t2 - t1)` (sampled supremum; `C7` is
/// increasing in `t`, so it sits at `t2`).
pub fn c8_constant(r: f64, t1: f64, t2: f64) -> Result<f64> {
    if !(t2 > t1) {
        return Err(CoreError::InvalidStability(format!("need t1 < t2, got [{t1}, {t2}]")));
    }
    let mut sup = 0.0f64;
    for k in 0..=64 {
        let t = t1 + (t2 - t1) * k as f64 / 64.0;
        sup = sup.max(c7_constant(r, t)?);
    }
    Ok(sup / (t2 - t1).sqrt())
}

/// One cosine bell `h cos^2(pi (y - center) / (2 w))` on `|y - center| < w`.
pub fn bump(
    grid_lo: f64,
    grid_hi: f64,
    n: usize,
    center: f64,
    halfwidth: f64,
    height: f64,
) -> Result<Profile1D> {
    if !(halfwidth > 0.0) {
        return Err(CoreError::InvalidStability(format!("bump halfwidth {halfwidth} <= 0")));
    }
    let ys = crate::grid::linspace(grid_lo, grid_hi, n);
    let values = ys
        .iter()
        .map(|&y| {
            let z = (y - center) / halfwidth;
            if z.abs() < 1.0 {
                height * (std::f64::consts::FRAC_PI_2 * z).cos().powi(2)
            } else {
                0.0
            }
        })
        .collect();
    Profile1D::new(ys, values, center - halfwidth, center + halfwidth)
}

/// Mixture of 1 to 5 random bells supported inside `(window_lo, window_hi)`.
pub fn bump_mixture(
    rng: &mut ChaCha8Rng,
    window_lo: f64,
    window_hi: f64,
    grid_lo: f64,
    grid_hi: f64,
    n: usize,
) -> Result<Profile1D> {
    let span = window_hi - window_lo;
    if !(span > 0.0) {
        return Err(CoreError::InvalidStability("empty support window".into()));
    }
    let ys = crate::grid::linspace(grid_lo, grid_hi, n);
    let mut values = vec![0.0; n];
    let n_bumps = rng.gen_range(1..=5usize);
    let mut lo = window_hi;
    let mut hi = window_lo;
    for _ in 0..n_bumps {
        let w = rng.gen_range(0.05 * span..=0.2 * span);
        let c = rng.gen_range(window_lo + w..=window_hi - w);
        let h = rng.gen_range(0.3..=1.5);
        lo = lo.min(c - w);
        hi = hi.max(c + w);
        for (v, &y) in values.iter_mut().zip(&ys) {
            let z = (y - c) / w;
            if z.abs() < 1.0 {
                *v += h * (std::f64::consts::FRAC_PI_2 * z).cos().powi(2);
            }
        }
    }
    Profile1D::new(ys, values, lo, hi)
}

/// Outcome of a constant-verification experiment.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StabilityReport {
    pub r: f64,
    pub t_lo: f64,
    pub t_hi: f64,
    pub alpha: f64,
    pub c7: f64,
    pub c8: Option<f64>,
    /// Per-sample ratios `||u0||_L1 / ||u(., t)||_L2(2B)`.
    pub ratios: Vec<f64>,
    /// Minimum of `C7 - ratio` over the family.
    pub margin: f64,
    pub flagged: Vec<String>,
    /// `(T', sup ratio)` pairs for horizon sweeps.
    pub t_sweep: Vec<(f64, f64)>,
}

/// Verify `||u0||_L1 <= C7 ||u(., t)||_L2(-2R, 2R)` over a random family of
/// nonnegative bump mixtures supported in `[-R, R]`.
pub fn verify_lemma(
    r: f64,
    t: f64,
    n_family: usize,
    seed: u64,
    grid_n: usize,
) -> Result<StabilityReport> {
    if n_family == 0 {
        return Err(CoreError::InvalidStability("empty test family".into()));
    }
    let alpha = alpha_mass_leak(r, t)?;
    let c7 = c7_constant(r, t)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let obs_ys = crate::grid::linspace(-2.0 * r, 2.0 * r, grid_n.max(64));
    let mut ratios = Vec::with_capacity(n_family);
    let mut flagged = Vec::new();
    let mut margin = f64::INFINITY;
    for k in 0..n_family {
        let u0 = bump_mixture(&mut rng, -r, r, -r, r, grid_n.max(64))?;
        if u0.values().iter().any(|&v| v < 0.0) {
            return Err(CoreError::InvalidStability(
                "mixed-sign initial profile rejected: the mass-leak bound needs u0 >= 0".into(),
            ));
        }
        let l1 = norm_l1_space(&u0, f64::NEG_INFINITY, f64::INFINITY)?.value;
        if l1 == 0.0 {
            flagged.push(format!("sample {k}: u0 identically zero, ratio skipped"));
            continue;
        }
        let row: Vec<f64> =
            obs_ys.iter().map(|&y| solve_heat(&u0, y, t)).collect::<Result<_>>()?;
        let row_profile = Profile1D::new(obs_ys.clone(), row, -2.0 * r, 2.0 * r)?;
        let l2 = crate::heat::norm_l2_space(&row_profile, -2.0 * r, 2.0 * r)?.value;
        if l2 == 0.0 {
            flagged.push(format!("sample {k}: zero observation norm with nonzero u0"));
            continue;
        }
        let ratio = l1 / l2;
        margin = margin.min(c7 - ratio);
        ratios.push(ratio);
    }
    Ok(StabilityReport {
        r,
        t_lo: t,
        t_hi: t,
        alpha,
        c7,
        c8: None,
        ratios,
        margin,
        flagged,
        t_sweep: Vec::new(),
    })
}

/// A monotone space-time branch `t -> rho(t)` with its slope; the energy
/// identity differentiates along it.
pub trait Branch {
    fn t_end(&self) -> f64;
    fn rho(&self, t: f64) -> f64;
    fn rho_prime(&self, t: f64) -> f64;
}

/// Straight branch `rho(t) = y0 + slope t` (analytic reference case).
pub struct LinearBranch {
    pub y0: f64,
    pub slope: f64,
    pub t_max: f64,
}

impl Branch for LinearBranch {
    fn t_end(&self) -> f64 {
        self.t_max
    }
    fn rho(&self, t: f64) -> f64 {
        self.y0 + self.slope * t
    }
    fn rho_prime(&self, _t: f64) -> f64 {
        self.slope
    }
}

/// Left sigma-branch of a constant-diffusion disk medium, inverted by
/// bisection/Newton on the closed form
/// `sigma(y) = psi0 ((s - gamma(y))^3) / 6` with
/// `gamma(y) = cx - sqrt(r^2 - (y - cy)^2)`. Smooth in `t`, so
/// finite-difference order tests see no interpolation noise.
pub struct DiskBranch {
    pub cx: f64,
    pub cy: f64,
    pub r: f64,
    pub s: f64,
    pub psi0: f64,
    y_lo: f64,
}

impl DiskBranch {
    pub fn new(cx: f64, cy: f64, r: f64, s: f64, psi0: f64) -> Result<Self> {
        if !(s > cx - r && s <= cx) {
            return Err(CoreError::InvalidStability(format!(
                "disk branch needs s in (cx - r, cx], got s = {s}"
            )));
        }
        if !(psi0 > 0.0) {
            return Err(CoreError::InvalidStability("psi0 must be positive".into()));
        }
        let y_lo = cy - (r * r - (cx - s) * (cx - s)).sqrt();
        Ok(Self { cx, cy, r, s, psi0, y_lo })
    }

    fn gamma(&self, y: f64) -> f64 {
        self.cx - (self.r * self.r - (y - self.cy) * (y - self.cy)).max(0.0).sqrt()
    }

    /// `sigma` along the branch (monotone increasing on `[y_lo, cy]`).
    pub fn sigma_of(&self, y: f64) -> f64 {
        let d = (self.s - self.gamma(y)).max(0.0);
        self.psi0 / 6.0 * d * d * d
    }

    fn sigma_prime_of(&self, y: f64) -> f64 {
        let root = (self.r * self.r - (y - self.cy) * (y - self.cy)).max(1e-300).sqrt();
        let gamma_d = (y - self.cy) / root;
        let d = (self.s - self.gamma(y)).max(0.0);
        -0.5 * self.psi0 * d * d * gamma_d
    }

    pub fn y_window_lo(&self) -> f64 {
        self.y_lo
    }
}

impl Branch for DiskBranch {
    fn t_end(&self) -> f64 {
        self.sigma_of(self.cy)
    }

    fn rho(&self, t: f64) -> f64 {
        let t = t.clamp(0.0, self.t_end());
        // bisection seed, Newton polish
        let (mut lo, mut hi) = (self.y_lo, self.cy);
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if self.sigma_of(mid) < t {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let mut y = 0.5 * (lo + hi);
        for _ in 0..4 {
            let f = self.sigma_of(y) - t;
            let fp = self.sigma_prime_of(y);
            if fp.abs() < 1e-300 {
                break;
            }
            let step = f / fp;
            let y_new = (y - step).clamp(self.y_lo, self.cy);
            if (y_new - y).abs() < 1e-15 {
                y = y_new;
                break;
            }
            y = y_new;
        }
        y
    }

    fn rho_prime(&self, t: f64) -> f64 {
        1.0 / self.sigma_prime_of(self.rho(t))
    }
}

/// Branch backed by the sampled inverse of a detected [`SigmaProfile`]
/// (linear interpolation, secant slope).
pub struct ProfileBranch<'a> {
    pub profile: &'a SigmaProfile,
    pub left: bool,
}

impl Branch for ProfileBranch<'_> {
    fn t_end(&self) -> f64 {
        self.profile.t_obs
    }
    fn rho(&self, t: f64) -> f64 {
        if self.left {
            self.profile.rho_l(t)
        } else {
            self.profile.rho_r(t)
        }
    }
    fn rho_prime(&self, t: f64) -> f64 {
        let h = 1e-4 * self.profile.t_obs;
        let (a, b) = ((t - h).max(0.0), (t + h).min(self.profile.t_obs));
        (self.rho(b) - self.rho(a)) / (b - a)
    }
}

/// Maximum deviation between the centered time difference of the exterior
/// energy `I(t) = 1/2 int_{-inf}^{rho(t)} u^2 dy` and its analytic rate
/// `g^2 rho' / 2 + g u_y(rho, t) - int_{-inf}^{rho} u_y^2 dy`, over the
/// sample times. `u` and `u_y` come from the kernel sum; the spatial
/// integrals use the composite trapezoid with an interpolated partial cell
/// on `n_quad` nodes.
pub fn energy_identity_check(
    u0: &Profile1D,
    branch: &dyn Branch,
    delta: f64,
    ts: &[f64],
    dt: f64,
    n_quad: usize,
) -> Result<f64> {
    if !(delta > 0.0) {
        return Err(CoreError::InvalidStability(format!(
            "support margin delta = {delta} must be positive"
        )));
    }
    let a1 = branch.rho(0.0);
    let (slo, _shi) = u0.support();
    if slo < a1 + delta {
        return Err(CoreError::InvalidStability(format!(
            "u0 support starts at {slo}, needs margin {delta} inside the branch foot {a1}"
        )));
    }
    let t_end = branch.t_end();
    for &t in ts {
        if !(t - dt > 0.0 && t + dt < t_end) {
            return Err(CoreError::InvalidStability(format!(
                "sample time {t} with step {dt} leaves (0, T = {t_end})"
            )));
        }
    }
    // quadrature grid covering everything left of the branch plus tails
    let t_max = ts.iter().cloned().fold(0.0f64, f64::max) + dt;
    let pad = 4.0 * (4.0 * t_max).sqrt();
    let lo = a1 - pad;
    let hi = ts
        .iter()
        .flat_map(|&t| [branch.rho(t - dt), branch.rho(t), branch.rho(t + dt)])
        .fold(f64::NEG_INFINITY, f64::max)
        + 1e-9;
    let xs = crate::grid::linspace(lo, hi, n_quad.max(64));

    let exterior = |t: f64| -> Result<f64> {
        let b = branch.rho(t);
        let sq: Vec<f64> =
            xs.iter().map(|&y| solve_heat(u0, y, t).map(|u| u * u)).collect::<Result<_>>()?;
        Ok(0.5 * integrate_linear(&xs, &sq, lo, b))
    };

    let mut worst = 0.0f64;
    for &t in ts {
        let fd = (exterior(t + dt)? - exterior(t - dt)?) / (2.0 * dt);
        let b = branch.rho(t);
        let g = solve_heat(u0, b, t)?;
        let uy_at_b = solve_heat_dy(u0, b, t)?;
        let uy_sq: Vec<f64> = xs
            .iter()
            .map(|&y| solve_heat_dy(u0, y, t).map(|v| v * v))
            .collect::<Result<_>>()?;
        let dissipation = integrate_linear(&xs, &uy_sq, lo, b);
        let rhs = 0.5 * g * g * branch.rho_prime(t) + g * uy_at_b - dissipation;
        worst = worst.max((fd - rhs).abs());
    }
    Ok(worst)
}

/// Horizon sweep of the empirical stability ratios
/// `||u0||_L1 / ||u||_L1(Gamma_L U Gamma_R, sigma <= T')`, the curve norm
/// taken in the time parameter (`|g(t)| dt` along both branches). Ratios are
/// finite and nonincreasing in `T'` whenever the observations stay positive.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LipschitzSweep {
    pub t_primes: Vec<f64>,
    pub sup_ratios: Vec<f64>,
    /// Per-sample ratios, one row per horizon.
    pub ratios: Vec<Vec<f64>>,
    pub flagged: Vec<String>,
}

pub fn empirical_lipschitz(
    profile: &SigmaProfile,
    family: &[Profile1D],
    delta: f64,
    t_primes: &[f64],
    n_t: usize,
) -> Result<LipschitzSweep> {
    if family.is_empty() {
        return Err(CoreError::InvalidStability("empty test family".into()));
    }
    if !(delta > 0.0) {
        return Err(CoreError::InvalidStability("delta must be positive".into()));
    }
    for (k, u0) in family.iter().enumerate() {
        let (slo, shi) = u0.support();
        if slo < profile.y_lo + delta || shi > profile.y_hi - delta {
            return Err(CoreError::InvalidStability(format!(
                "family member {k} supported on [{slo}, {shi}] is not {delta}-inside \
                 ({}, {})",
                profile.y_lo, profile.y_hi
            )));
        }
    }
    let t_eps = 0.01 * profile.t_obs;
    let mut sup_ratios = Vec::with_capacity(t_primes.len());
    let mut all_ratios = Vec::with_capacity(t_primes.len());
    let mut flagged = Vec::new();
    for &tp in t_primes {
        let t_hi = tp.min(0.99 * profile.t_obs);
        if !(t_hi > t_eps) {
            return Err(CoreError::InvalidStability(format!(
                "horizon {tp} inside the excluded endpoint window"
            )));
        }
        let t_grid = crate::grid::linspace(t_eps, t_hi, n_t.max(16));
        let left_pts: Vec<(f64, f64)> = t_grid.iter().map(|&t| (profile.rho_l(t), t)).collect();
        let right_pts: Vec<(f64, f64)> = t_grid.iter().map(|&t| (profile.rho_r(t), t)).collect();
        let mut sup = 0.0f64;
        let mut row = Vec::with_capacity(family.len());
        for (k, u0) in family.iter().enumerate() {
            let l1 = norm_l1_space(u0, f64::NEG_INFINITY, f64::INFINITY)?.value;
            let obs = norm_l1_curve(u0, &left_pts, CurveWeighting::PerTime)?.value
                + norm_l1_curve(u0, &right_pts, CurveWeighting::PerTime)?.value;
            if obs == 0.0 {
                if l1 > 0.0 {
                    flagged.push(format!(
                        "horizon {tp}, sample {k}: zero observation norm with nonzero u0 \
                         (quadrature underflow)"
                    ));
                }
                row.push(f64::INFINITY);
                continue;
            }
            let ratio = l1 / obs;
            row.push(ratio);
            sup = sup.max(ratio);
        }
        sup_ratios.push(sup);
        all_ratios.push(row);
    }
    Ok(LipschitzSweep {
        t_primes: t_primes.to_vec(),
        sup_ratios,
        ratios: all_ratios,
        flagged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::heat::{kernel_1d, log_convexity_check};
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    #[test]
    fn alpha_closed_form_and_quadrature_agree() {
        let alpha = alpha_mass_leak(1.0, 1.0).unwrap();
        // statrs erfc is good to ~1e-10 absolute, ample for every use here
        assert_abs_diff_eq!(alpha, 0.25669748785582137, epsilon = 1e-9);
        // independent route: 1 - trapezoid of the kernel over (-2R, 2R),
        // maximized over sampled source positions
        let mut sup = 0.0f64;
        for k in 0..=40 {
            let r0 = -1.0 + 2.0 * k as f64 / 40.0;
            let ys = crate::grid::linspace(-2.0, 2.0, 40001);
            let vals: Vec<f64> =
                ys.iter().map(|&y| kernel_1d(y - r0, 1.0).unwrap()).collect();
            let inside = integrate_linear(&ys, &vals, -2.0, 2.0);
            sup = sup.max(1.0 - inside);
        }
        assert_abs_diff_eq!(alpha, sup, epsilon = 1e-6);
    }

    #[test]
    fn alpha_limits_and_monotonicity() {
        assert!(alpha_mass_leak(1.0, 1e-4).unwrap() < 1e-20);
        let mut prev = 0.0;
        for k in 0..12 {
            let t = 1e-3 * 10f64.powf(k as f64 * 0.35);
            let a = alpha_mass_leak(1.0, t).unwrap();
            assert!(a > prev && a < 1.0, "alpha({t}) = {a}");
            prev = a;
        }
        // decreasing in R at fixed t
        let mut prev = 1.0;
        for k in 1..=10 {
            let r = 0.2 * k as f64;
            let a = alpha_mass_leak(r, 0.7).unwrap();
            assert!(a < prev && a > 0.0);
            prev = a;
        }
        assert!(alpha_mass_leak(0.0, 1.0).is_err());
        assert!(alpha_mass_leak(1.0, 0.0).is_err());
    }

    #[test]
    fn recovery_constants() {
        let c7 = c7_constant(1.0, 1.0).unwrap();
        assert_abs_diff_eq!(c7, 2.690694525208411, epsilon = 1e-8);
        // leak-free limit: C7 -> sqrt(4R)
        assert_abs_diff_eq!(c7_constant(1.0, 1e-4).unwrap(), 2.0, epsilon = 1e-12);
        // nondecreasing in t
        let mut prev = 0.0;
        for k in 1..=10 {
            let c = c7_constant(1.0, 0.1 * k as f64).unwrap();
            assert!(c >= prev);
            prev = c;
        }
        // C8 normalization and supremum at t2
        let c8 = c8_constant(1.0, 0.5, 1.0).unwrap();
        assert_relative_eq!(c8, c7 / 0.5f64.sqrt(), max_relative = 1e-12);
        assert!(c8_constant(1.0, 1.0, 0.5).is_err());
    }

    #[test]
    fn lemma_holds_on_random_family() {
        for &t in &[0.1, 0.5, 1.0] {
            let report = verify_lemma(1.0, t, 100, 2024, 513).unwrap();
            assert_eq!(report.ratios.len(), 100);
            assert!(report.flagged.is_empty());
            assert!(
                report.margin >= -1e-9 * report.c7,
                "margin {} at t = {t}",
                report.margin
            );
        }
        // indicator of the full support: still below C7 with a real margin
        let u0 = Profile1D::indicator(-1.0, 1.0, -1.0, 1.0, 1025).unwrap();
        let l1 = norm_l1_space(&u0, f64::NEG_INFINITY, f64::INFINITY).unwrap().value;
        let obs = crate::grid::linspace(-2.0, 2.0, 1025);
        let row: Vec<f64> =
            obs.iter().map(|&y| solve_heat(&u0, y, 0.5).unwrap()).collect();
        let rp = Profile1D::new(obs, row, -2.0, 2.0).unwrap();
        let l2 = crate::heat::norm_l2_space(&rp, -2.0, 2.0).unwrap().value;
        let c7 = c7_constant(1.0, 0.5).unwrap();
        assert!(l1 / l2 < c7);
    }

    #[test]
    fn log_convexity_invariant_over_family() {
        let ts: Vec<f64> = (1..=10).map(|k| 0.1 * k as f64).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut worst = f64::NEG_INFINITY;
        for _ in 0..50 {
            let u0 = bump_mixture(&mut rng, -1.0, 1.0, -1.0, 1.0, 257).unwrap();
            let v = log_convexity_check(&u0, &ts).unwrap();
            worst = worst.max(v);
        }
        assert!(worst <= 1e-6, "max violation {worst}");
    }

    #[test]
    fn energy_identity_zero_field() {
        let u0 = Profile1D::from_fn(-0.5, 0.5, 65, |_| 0.0).unwrap();
        let branch = LinearBranch { y0: -1.0, slope: 1.0, t_max: 0.5 };
        let dev =
            energy_identity_check(&u0, &branch, 0.1, &[0.2, 0.3], 0.01, 512).unwrap();
        assert_eq!(dev, 0.0);
        // delta <= 0 is rejected
        assert!(energy_identity_check(&u0, &branch, 0.0, &[0.2], 0.01, 128).is_err());
    }

    #[test]
    fn energy_identity_is_second_order_in_dt() {
        // Gaussian initial bump, straight branch: halving dt quarters the
        // deviation
        let u0 = bump(-3.0, 3.0, 769, 0.3, 0.4, 1.0).unwrap();
        let branch = LinearBranch { y0: -1.0, slope: 2.0, t_max: 0.5 };
        let ts = [0.2, 0.25, 0.3];
        let mut devs = Vec::new();
        for &dt in &[0.04, 0.02, 0.01] {
            devs.push(energy_identity_check(&u0, &branch, 0.5, &ts, dt, 2048).unwrap());
        }
        for w in devs.windows(2) {
            let ratio = w[0] / w[1];
            assert!(
                ratio > 3.0 && ratio < 5.0,
                "expected ~4x decay per halving, got {ratio} ({devs:?})"
            );
        }
    }

    #[test]
    fn lipschitz_ratios_scale_invariant_and_monotone() {
        // synthetic symmetric profile: tent-like sigma samples
        let n = 257;
        let ys: Vec<f64> = (0..n).map(|k| -1.5 + 3.0 * k as f64 / (n - 1) as f64).collect();
        let sig: Vec<f64> = ys
            .iter()
            .map(|&y| {
                let a = 1.0 - y.abs();
                (0.05 * a.max(0.0).powi(2)).min(0.05)
            })
            .collect();
        let profile = crate::forward::sigma_profile_from_samples(
            0.5,
            crate::geometry::IllumSide::Left,
            &ys,
            &sig,
            1e-14,
        )
        .unwrap();
        let grid = (profile.y_lo, profile.y_hi);
        let u0 = bump(grid.0, grid.1, 513, 0.0, 0.25, 1.0).unwrap();
        let scaled = u0.scaled(10.0).unwrap();
        let tps: Vec<f64> =
            (1..=6).map(|k| profile.t_obs * k as f64 / 6.0).collect();
        let sweep1 = empirical_lipschitz(&profile, &[u0], 0.05, &tps, 64).unwrap();
        let sweep2 = empirical_lipschitz(&profile, &[scaled], 0.05, &tps, 64).unwrap();
        assert!(sweep1.flagged.is_empty());
        for (a, b) in sweep1.sup_ratios.iter().zip(&sweep2.sup_ratios) {
            assert_relative_eq!(a, b, max_relative = 1e-12);
        }
        // nonincreasing in the horizon
        for w in sweep1.sup_ratios.windows(2) {
            assert!(w[1] <= w[0] * (1.0 + 1e-12), "sweep not monotone: {:?}", sweep1.sup_ratios);
        }
    }

    #[test]
    fn disk_branch_inverts_its_sigma() {
        let branch = DiskBranch::new(1.0, 0.0, 0.8, 0.88, 1.0).unwrap();
        let t_end = branch.t_end();
        assert_relative_eq!(t_end, 0.68f64.powi(3) / 6.0, max_relative = 1e-12);
        for k in 1..20 {
            let t = t_end * k as f64 / 20.0;
            let y = branch.rho(t);
            assert_relative_eq!(branch.sigma_of(y), t, max_relative = 1e-9);
            // slope consistency with a secant
            let h = 1e-7 * t_end;
            let secant = (branch.rho(t + h) - branch.rho(t - h)) / (2.0 * h);
            assert_relative_eq!(branch.rho_prime(t), secant, max_relative = 1e-4);
        }
        assert!(DiskBranch::new(1.0, 0.0, 0.8, 1.5, 1.0).is_err());
    }
}
