//! Standard-normal analytics: distribution function, density, quantile,
//! the indicator variance `sigma2(t) = F(t)(1 - F(t))`, and the probability
//! and quantile grids the statistics are evaluated on.

use std::f64::consts::{PI, SQRT_2};

use serde::Serialize;

use crate::error::{Error, Result};

/// `1 / sqrt(2 pi)`.
pub const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Largest probability step accepted by the statistics (`sigma2(0) = 1/4`).
pub const MAX_DELTA: f64 = 0.25;

/// Standard normal distribution function, unchecked.
///
/// Evaluated through `erfc` on the side of the origin where no cancellation
/// occurs, so the lower tail keeps full relative precision.
#[inline]
pub fn cdf(t: f64) -> f64 {
    0.5 * libm::erfc(-t / SQRT_2)
}

/// Standard normal density, unchecked.
#[inline]
pub fn density(t: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * t * t).exp()
}

/// `F(t)(1 - F(t))`, with `1 - F(t)` taken as `F(-t)`.
#[inline]
pub fn sigma2_unchecked(t: f64) -> f64 {
    cdf(t) * cdf(-t)
}

/// Standard normal quantile, unchecked. `u` must lie in (0, 1).
pub fn quantile(u: f64) -> f64 {
    debug_assert!(u > 0.0 && u < 1.0, "quantile argument {u} outside (0,1)");
    if u > 0.5 {
        // 1 - u is exact for u in [1/2, 1].
        -lower_quantile(1.0 - u)
    } else {
        lower_quantile(u)
    }
}

fn lower_quantile(u: f64) -> f64 {
    if u == 0.5 {
        return 0.0;
    }
    let mut t = initial_guess(u);
    let (mut lo, mut hi) = (-40.0_f64, 0.0_f64);
    for _ in 0..100 {
        let r = cdf(t) - u;
        if r == 0.0 {
            return t;
        }
        if r < 0.0 {
            lo = t;
        } else {
            hi = t;
        }
        let phi = density(t);
        let newton = r / phi;
        let step = newton / (1.0 + 0.5 * t * newton);
        if step.abs() <= 1e-15 * (1.0 + t.abs()) {
            return t - step;
        }
        let mut next = t - step;
        if !next.is_finite() || next <= lo || next >= hi {
            next = 0.5 * (lo + hi);
        }
        t = next;
    }
    t
}

/// Leading terms of `-sqrt(2 log(1/u) - log log(1/u) - log(4 pi))` in the
/// tail, a linear guess near the median.
fn initial_guess(u: f64) -> f64 {
    if u > 0.2 {
        return (2.0 * PI).sqrt() * (u - 0.5);
    }
    let l = (1.0 / u).ln();
    let inner = 2.0 * l - l.ln() - (4.0 * PI).ln();
    -inner.max(1e-3).sqrt()
}

fn require_finite(t: f64, what: &str) -> Result<()> {
    if t.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(format!(
            "{what} requires a finite argument, got {t}"
        )))
    }
}

fn require_open_unit(u: f64, what: &str) -> Result<()> {
    if u > 0.0 && u < 1.0 {
        Ok(())
    } else {
        Err(Error::domain(format!(
            "{what} requires u in (0,1), got {u}"
        )))
    }
}

pub fn std_normal_cdf(t: f64) -> Result<f64> {
    require_finite(t, "std_normal_cdf")?;
    Ok(cdf(t))
}

pub fn std_normal_density(t: f64) -> Result<f64> {
    require_finite(t, "std_normal_density")?;
    Ok(density(t))
}

pub fn std_normal_quantile(u: f64) -> Result<f64> {
    require_open_unit(u, "std_normal_quantile")?;
    Ok(quantile(u))
}

/// Variance of the indicator `1{g <= t}`; maximal (1/4) at the origin.
pub fn sigma2(t: f64) -> Result<f64> {
    require_finite(t, "sigma2")?;
    Ok(sigma2_unchecked(t))
}

/// Distribution function, density and indicator variance at one abscissa.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GaussianScalars {
    pub t: f64,
    pub cdf: f64,
    pub density: f64,
    pub sigma2: f64,
}

impl GaussianScalars {
    pub fn at(t: f64) -> Result<Self> {
        require_finite(t, "GaussianScalars::at")?;
        let lower = cdf(t);
        Ok(GaussianScalars {
            t,
            cdf: lower,
            density: density(t),
            sigma2: lower * cdf(-t),
        })
    }
}

/// Validates a probability step for the statistics layer.
pub fn check_delta(delta: f64) -> Result<()> {
    if delta > 0.0 && delta <= MAX_DELTA {
        Ok(())
    } else {
        Err(Error::config(
            "delta",
            format!("probability step must lie in (0, {MAX_DELTA}], got {delta}"),
        ))
    }
}

/// The probability grid `{l * delta : 1 <= l <= (1 - delta) / delta}` and
/// its image under the quantile function.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbabilityGrid {
    pub delta: f64,
    pub u_values: Vec<f64>,
    pub t_values: Vec<f64>,
}

impl ProbabilityGrid {
    pub fn new(delta: f64) -> Result<Self> {
        check_delta(delta)?;
        let count = ((1.0 - delta) / delta + 1e-9).floor() as usize;
        let u_values: Vec<f64> = (1..=count).map(|l| l as f64 * delta).collect();
        let t_values = u_values.iter().map(|&u| quantile(u)).collect();
        Ok(ProbabilityGrid {
            delta,
            u_values,
            t_values,
        })
    }

    pub fn len(&self) -> usize {
        self.u_values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u_values.is_empty()
    }
}

pub fn build_probability_grid(delta: f64) -> Result<ProbabilityGrid> {
    ProbabilityGrid::new(delta)
}

/// Reference grids for samples of size `m`:
/// `lambdas[i-1] = F^{-1}(i/m)` (with the last entry repeated) and the cell
/// means `etas[i-1] = m * int_{(i-1)/m}^{i/m} F^{-1}(u) du`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuantileGrid {
    pub m: usize,
    pub lambdas: Vec<f64>,
    pub etas: Vec<f64>,
}

impl QuantileGrid {
    pub fn new(m: usize) -> Result<Self> {
        if m < 2 {
            return Err(Error::config(
                "m",
                format!("quantile grid needs m >= 2, got {m}"),
            ));
        }
        let edges = cell_edges(m);
        let mut lambdas: Vec<f64> = edges[1..m].to_vec();
        lambdas.push(lambdas[m - 2]);
        // With u = F(t): int F^{-1}(u) du = int t f(t) dt = f(a) - f(b) over a cell.
        let mf = m as f64;
        let etas = edges
            .windows(2)
            .map(|w| mf * (density_or_zero(w[0]) - density_or_zero(w[1])))
            .collect();
        Ok(QuantileGrid { m, lambdas, etas })
    }

    /// `(sum_i (lambda_i - eta_i)^2 / m)^{1/2}`.
    pub fn lambda_eta_gap(&self) -> f64 {
        let s: f64 = self
            .lambdas
            .iter()
            .zip(&self.etas)
            .map(|(l, e)| (l - e) * (l - e))
            .sum();
        (s / self.m as f64).sqrt()
    }
}

pub fn build_quantile_grid(m: usize) -> Result<QuantileGrid> {
    QuantileGrid::new(m)
}

/// Cell boundaries `F^{-1}(i/m)` for `i = 0..=m`, with infinite end points.
pub fn cell_edges(m: usize) -> Vec<f64> {
    let mf = m as f64;
    (0..=m)
        .map(|i| match i {
            0 => f64::NEG_INFINITY,
            i if i == m => f64::INFINITY,
            i => quantile(i as f64 / mf),
        })
        .collect()
}

#[inline]
pub(crate) fn density_or_zero(t: f64) -> f64 {
    if t.is_finite() {
        density(t)
    } else {
        0.0
    }
}

/// `f(F^{-1}(u)) / (ubar sqrt(log(1/ubar)))` with `ubar = min(u, 1-u)`.
pub fn check_density_bound(u: f64) -> Result<f64> {
    require_open_unit(u, "check_density_bound")?;
    let ubar = u.min(1.0 - u);
    Ok(density(quantile(u)) / (ubar * (1.0 / ubar).ln().sqrt()))
}

/// `sigma2(t) * t * exp(t^2 / 2)` for `t >= 1`.
pub fn check_sigma_equivalence(t: f64) -> Result<f64> {
    require_finite(t, "check_sigma_equivalence")?;
    if t < 1.0 {
        return Err(Error::domain(format!(
            "check_sigma_equivalence requires t >= 1, got {t}"
        )));
    }
    Ok(sigma2_unchecked(t) * t * (0.5 * t * t).exp())
}

/// `|F(t + xi) - F(t)| / (|xi| sigma2(t) sqrt(log(1/sigma2(t))))`.
pub fn regularity_ratio(t: f64, xi: f64) -> Result<f64> {
    require_finite(t, "regularity_ratio")?;
    require_finite(xi, "regularity_ratio")?;
    if xi == 0.0 {
        return Err(Error::domain("regularity_ratio requires xi != 0"));
    }
    let s2 = sigma2_unchecked(t);
    let moved = if t + xi >= 0.0 && t >= 0.0 {
        // Upper tail differences keep precision as F(-t) - F(-t-xi).
        (cdf(-t) - cdf(-t - xi)).abs()
    } else {
        (cdf(t + xi) - cdf(t)).abs()
    };
    Ok(moved / (xi.abs() * s2 * (1.0 / s2).ln().sqrt()))
}

/// Extremes of the numeric bound sweeps.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnalyticsReport {
    /// `max |F(F^{-1}(u)) - u|` over `10^4` points of (0, 1).
    pub round_trip_max_error: f64,
    /// `max |(F(t+h) - F(t-h)) / 2h - f(t)|` over `t` in `[-8, 8]`.
    pub derivative_max_error: f64,
    /// Range of `sigma2(t) t exp(t^2/2)` over `t` in `[1, 8]`.
    pub sigma_equivalence_min: f64,
    pub sigma_equivalence_max: f64,
    /// Range of the density-bound ratio over `u` in `[1e-8, 1/2]`.
    pub density_bound_min: f64,
    pub density_bound_max: f64,
    /// Largest regularity ratio over `t` in `[-8, 8]` and
    /// `0 < xi <= 1 / (2 sqrt(log(1/sigma2(t))))`.
    pub regularity_max: f64,
    /// Range of `sigma2(t + eta t) / sigma2(t)` over `t` in `[1, 6]`,
    /// `0 < eta <= 1/t^2`.
    pub shift_ratio_min: f64,
    pub shift_ratio_max: f64,
}

fn min_max(values: impl Iterator<Item = f64>) -> (f64, f64) {
    values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
        (lo.min(v), hi.max(v))
    })
}

pub fn analytics_sweeps() -> AnalyticsReport {
    let n = 10_000;
    let round_trip_max_error = (0..n)
        .map(|k| {
            // Log-spaced in both tails plus a uniform middle.
            let s = (k as f64 + 0.5) / n as f64;
            let u = if k % 2 == 0 { s } else { 10f64.powf(-15.0 * s) };
            (cdf(quantile(u)) - u).abs()
        })
        .fold(0.0, f64::max);
    let h = 1e-5;
    let derivative_max_error = (0..=1600)
        .map(|k| {
            let t = -8.0 + k as f64 * 0.01;
            ((cdf(t + h) - cdf(t - h)) / (2.0 * h) - density(t)).abs()
        })
        .fold(0.0, f64::max);
    let (sigma_equivalence_min, sigma_equivalence_max) = min_max((0..=700).map(|k| {
        let t = 1.0 + k as f64 * 0.01;
        sigma2_unchecked(t) * t * (0.5 * t * t).exp()
    }));
    let (density_bound_min, density_bound_max) = min_max((0..=800).map(|k| {
        let u = 10f64
            .powf(-8.0 + k as f64 * (8.0 - 2f64.log10()) / 800.0)
            .min(0.5);
        let ubar = u.min(1.0 - u);
        density(quantile(u)) / (ubar * (1.0 / ubar).ln().sqrt())
    }));
    let regularity_max = (0..=320)
        .flat_map(|k| {
            let t = -8.0 + k as f64 * 0.05;
            let s2 = sigma2_unchecked(t);
            let xi_max = 0.5 / (1.0 / s2).ln().sqrt();
            [1.0, 0.5, 0.1, 0.01]
                .into_iter()
                .flat_map(move |f| [f * xi_max, -f * xi_max])
                .map(move |xi| regularity_ratio(t, xi).unwrap_or(f64::NAN))
        })
        .fold(0.0, f64::max);
    let (shift_ratio_min, shift_ratio_max) = min_max((0..=50).flat_map(|k| {
        let t = 1.0 + k as f64 * 0.1;
        [1.0, 0.5, 0.1, 0.01].into_iter().map(move |f| {
            let eta = f / (t * t);
            sigma2_unchecked(t + eta * t) / sigma2_unchecked(t)
        })
    }));
    AnalyticsReport {
        round_trip_max_error,
        derivative_max_error,
        sigma_equivalence_min,
        sigma_equivalence_max,
        density_bound_min,
        density_bound_max,
        regularity_max,
        shift_ratio_min,
        shift_ratio_max,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Adaptive Simpson on the density; independent of `erfc`.
    fn simpson_oracle_cdf(t: f64) -> f64 {
        fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> f64 {
            let c = 0.5 * (a + b);
            (b - a) / 6.0 * (f(a) + 4.0 * f(c) + f(b))
        }
        fn adapt(f: &dyn Fn(f64) -> f64, a: f64, b: f64, whole: f64, eps: f64, depth: u32) -> f64 {
            let c = 0.5 * (a + b);
            let left = simpson(f, a, c);
            let right = simpson(f, c, b);
            if depth == 0 || (left + right - whole).abs() <= 15.0 * eps {
                return left + right + (left + right - whole) / 15.0;
            }
            adapt(f, a, c, left, eps / 2.0, depth - 1) + adapt(f, c, b, right, eps / 2.0, depth - 1)
        }
        let f = |x: f64| (-0.5 * x * x).exp() / (2.0 * PI).sqrt();
        let whole = simpson(&f, 0.0, t.abs());
        let half_mass = adapt(&f, 0.0, t.abs(), whole, 1e-14, 40);
        if t >= 0.0 {
            0.5 + half_mass
        } else {
            0.5 - half_mass
        }
    }

    #[test]
    fn cdf_examples() {
        assert_eq!(std_normal_cdf(0.0).unwrap(), 0.5);
        let t = 1.7;
        assert!((cdf(t) - (1.0 - cdf(-t))).abs() <= 1e-12);
        assert!((cdf(1.959964) - 0.975).abs() <= 1e-6);
        assert!((cdf(1.959964) - simpson_oracle_cdf(1.959964)).abs() <= 1e-12);
    }

    #[test]
    fn cdf_matches_quadrature_oracle_on_a_sweep() {
        for k in -60..=60 {
            let t = k as f64 * 0.1;
            let diff = (cdf(t) - simpson_oracle_cdf(t)).abs();
            assert!(diff <= 1e-12, "t={t} diff={diff}");
        }
    }

    #[test]
    fn non_finite_inputs_are_domain_errors() {
        assert!(matches!(std_normal_cdf(f64::NAN), Err(Error::Domain(_))));
        assert!(matches!(
            std_normal_cdf(f64::INFINITY),
            Err(Error::Domain(_))
        ));
        assert!(sigma2(f64::NEG_INFINITY).is_err());
        for u in [0.0, 1.0, -0.1, 1.5, f64::NAN] {
            assert!(std_normal_quantile(u).is_err(), "u={u}");
        }
    }

    #[test]
    fn quantile_examples() {
        assert_eq!(std_normal_quantile(0.5).unwrap(), 0.0);
        let q = std_normal_quantile(0.31).unwrap();
        assert!((cdf(q) - 0.31).abs() <= 1e-10);

        let u: f64 = 1e-6;
        let l = (1.0 / u).ln();
        let q = std_normal_quantile(u).unwrap();
        let outer = -(2.0 * l).sqrt();
        let inner = -(2.0 * l - l.ln() - 5.0).sqrt();
        assert!(q >= outer && q <= inner, "{outer} <= {q} <= {inner}");
        assert!((cdf(q) - u).abs() / u < 1e-12);
    }

    #[test]
    fn quantile_is_strictly_increasing_and_odd() {
        let mut prev = f64::NEG_INFINITY;
        for k in 1..2000 {
            let u = k as f64 / 2000.0;
            let q = quantile(u);
            assert!(q > prev);
            prev = q;
            assert!((q + quantile(1.0 - u)).abs() < 1e-12);
        }
    }

    #[test]
    fn extreme_tail_quantiles_round_trip() {
        for u in [1e-300, 1e-100, 1e-30, 1e-12] {
            let q = quantile(u);
            assert!(((cdf(q) - u) / u).abs() < 1e-10, "u={u} q={q}");
        }
    }

    #[test]
    fn sigma2_examples() {
        assert_eq!(sigma2(0.0).unwrap(), 0.25);
        assert!(sigma2(8.0).unwrap() < 1e-14);
        assert!(sigma2(-8.0).unwrap() < 1e-14);
        // Oracle: Simpson CDF at t = 2 gives F(2)(1 - F(2)) = 0.0222325639...
        let oracle = {
            let f = simpson_oracle_cdf(2.0);
            f * (1.0 - f)
        };
        assert!((oracle - 0.022_232_564).abs() < 1e-9);
        assert!((sigma2(2.0).unwrap() - oracle).abs() < 1e-5);
    }

    #[test]
    fn gaussian_scalars_invariants() {
        for k in -40..=40 {
            let s = GaussianScalars::at(k as f64 * 0.2).unwrap();
            assert!((s.sigma2 - s.cdf * (1.0 - s.cdf)).abs() < 1e-15);
            assert!((0.0..=0.25).contains(&s.sigma2));
        }
    }

    #[test]
    fn probability_grid_examples() {
        let g = build_probability_grid(0.25).unwrap();
        assert_eq!(g.u_values, vec![0.25, 0.5, 0.75]);
        assert!(matches!(
            build_probability_grid(0.5),
            Err(Error::Config { .. })
        ));
        assert!(build_probability_grid(0.0).is_err());

        let g = build_probability_grid(0.1).unwrap();
        assert_eq!(g.len(), 9);
        for (a, b) in g.t_values.iter().zip(g.t_values.iter().rev()) {
            assert!((a + b).abs() < 1e-12);
        }
        for (&u, &t) in g.u_values.iter().zip(&g.t_values) {
            assert!((u - 0.1..=0.9 + 1e-12).contains(&u));
            assert!((cdf(t) - u).abs() < 1e-12);
        }
    }

    #[test]
    fn quantile_grid_examples() {
        let q = build_quantile_grid(2).unwrap();
        assert_eq!(q.lambdas, vec![0.0, 0.0]);
        let c = (2.0 / PI).sqrt();
        assert!((q.etas[0] + c).abs() < 1e-14);
        assert!((q.etas[1] - c).abs() < 1e-14);
        assert!(matches!(build_quantile_grid(1), Err(Error::Config { .. })));

        for m in [3, 10, 101, 1000] {
            let q = build_quantile_grid(m).unwrap();
            let total: f64 = q.etas.iter().sum();
            assert!(total.abs() < 1e-8, "m={m} sum={total}");
            assert!(q.lambdas.windows(2).all(|w| w[0] <= w[1]));
            assert!(q.etas.windows(2).all(|w| w[0] <= w[1]));
            assert_eq!(q.lambdas[m - 1], q.lambdas[m - 2]);
        }
    }

    #[test]
    fn etas_match_direct_quadrature_of_the_quantile() {
        // Interior cells: integrate F^{-1} in u with a 16-point rule.
        let m = 50;
        let q = build_quantile_grid(m).unwrap();
        let rule = crate::quadrature::gl16();
        for i in 2..m {
            let a = (i - 1) as f64 / m as f64;
            let b = i as f64 / m as f64;
            let direct = m as f64 * rule.integrate(a, b, quantile);
            assert!((direct - q.etas[i - 1]).abs() < 1e-9, "cell {i}");
        }
    }

    #[test]
    fn density_bound_examples() {
        let r = check_density_bound(0.5).unwrap();
        let closed = INV_SQRT_2PI / (0.5 * 2f64.ln().sqrt());
        assert!((r - closed).abs() < 1e-12);
        assert!((r - 0.9582).abs() < 1e-3);
        for u in [1e-6, 0.01, 0.2, 0.37] {
            let a = check_density_bound(u).unwrap();
            let b = check_density_bound(1.0 - u).unwrap();
            assert!((a - b).abs() < 1e-8 * a);
        }
        assert!(check_density_bound(0.0).is_err());
        assert!(check_density_bound(1.0).is_err());
    }

    #[test]
    fn sigma_equivalence_examples() {
        let oracle = {
            let f = simpson_oracle_cdf(1.0);
            f * (1.0 - f) * 0.5f64.exp()
        };
        let r = check_sigma_equivalence(1.0).unwrap();
        assert!((r - oracle).abs() < 1e-10);
        assert!((r - 0.220_08).abs() < 1e-4);
        let r8 = check_sigma_equivalence(8.0).unwrap();
        assert!(r8.is_finite() && r8 > 0.0);
        assert!(check_sigma_equivalence(0.5).is_err());
    }

    #[test]
    fn bound_sweeps_stay_in_their_bands() {
        let r = analytics_sweeps();
        assert!(r.round_trip_max_error <= 1e-10, "{r:?}");
        assert!(r.derivative_max_error <= 1e-6, "{r:?}");
        assert!(
            r.sigma_equivalence_max / r.sigma_equivalence_min <= 3.0,
            "{r:?}"
        );
        assert!(
            r.density_bound_min >= 1.0 / 3.0 && r.density_bound_max <= 3.0,
            "{r:?}"
        );
        assert!(r.regularity_max <= 10.0, "{r:?}");
        assert!(
            r.shift_ratio_min >= 0.05 && r.shift_ratio_max <= 1.0,
            "{r:?}"
        );
    }
}
