//! Gaussian samples, sorted projections, and the exact deviation statistics
//! of the empirical distribution function of one-dimensional marginals.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::gaussian::{cdf, check_delta, density, quantile, sigma2_unchecked, ProbabilityGrid};
use crate::point_sets::{dense_dot, Coords, UnitPointSet};
use crate::quadrature::gl16;
use crate::rng::stream_rng;
use crate::transport::W2Reference;

/// Largest sample matrix (entries) `draw_sample` will allocate.
pub const MAX_SAMPLE_ENTRIES: usize = 1 << 27;

/// Tolerance on `|x| = 1` for directions passed by value.
pub const UNIT_TOL: f64 = 1e-12;

pub const DEVIATION_SCHEMA: &str = "# schema: deviation-report/v1";
pub const DEVIATION_HEADER: &str =
    "trial,seed,m,d,delta,direction_index,ks_sup,ks_arg_t,ss_sup,ss_arg_t,w2,coord_stat";
pub const ENVELOPE_SCHEMA: &str = "# schema: envelope/v1";

/// `m` independent standard Gaussian vectors in `R^d`, stored row-major.
///
/// Row `i` is drawn from its own generator stream `(seed, i)`, so the matrix
/// does not depend on how rows are scheduled across threads.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleMatrix {
    pub m: usize,
    pub d: usize,
    pub seed: u64,
    pub entries: Vec<f64>,
}

impl SampleMatrix {
    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.entries[i * self.d..(i + 1) * self.d]
    }

    /// Projections `<G_i, x>` in row order.
    pub fn project(&self, x: &Coords) -> Vec<f64> {
        match x {
            Coords::Dense(v) => self
                .entries
                .chunks_exact(self.d)
                .map(|r| dense_dot(r, v))
                .collect(),
            Coords::Sparse(_) => self
                .entries
                .chunks_exact(self.d)
                .map(|r| x.dot_dense(r))
                .collect(),
        }
    }

    pub fn column_mean(&self, j: usize) -> f64 {
        (0..self.m)
            .map(|i| self.entries[i * self.d + j])
            .sum::<f64>()
            / self.m as f64
    }
}

pub fn draw_sample(m: usize, d: usize, seed: u64) -> Result<SampleMatrix> {
    if m == 0 || d == 0 {
        return Err(Error::config(
            "m",
            format!("sample needs m, d >= 1, got m={m}, d={d}"),
        ));
    }
    let total = m
        .checked_mul(d)
        .filter(|&t| t <= MAX_SAMPLE_ENTRIES)
        .ok_or_else(|| {
            Error::Resource(format!(
                "sample of {m} x {d} exceeds {MAX_SAMPLE_ENTRIES} entries"
            ))
        })?;
    let mut entries = vec![0.0; total];
    entries.par_chunks_mut(d).enumerate().for_each(|(i, row)| {
        let mut rng = stream_rng(seed, i as u64);
        for v in row.iter_mut() {
            *v = rng.sample(StandardNormal);
        }
    });
    Ok(SampleMatrix {
        m,
        d,
        seed,
        entries,
    })
}

/// Sorted projections `(Gamma x)^#` of a sample onto one direction.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProjectionSample {
    pub values: Vec<f64>,
    pub direction_index: usize,
}

impl ProjectionSample {
    /// Sorts arbitrary values into a projection sample.
    pub fn from_values(mut values: Vec<f64>, direction_index: usize) -> Self {
        values.sort_unstable_by(f64::total_cmp);
        ProjectionSample {
            values,
            direction_index,
        }
    }

    pub fn m(&self) -> usize {
        self.values.len()
    }

    /// `F_m(t) = #{i : v_i <= t} / m`.
    pub fn ecdf(&self, t: f64) -> f64 {
        self.values.partition_point(|&v| v <= t) as f64 / self.m() as f64
    }
}

pub fn project_sorted(g: &SampleMatrix, x: &[f64]) -> Result<ProjectionSample> {
    if x.len() != g.d {
        return Err(Error::domain(format!(
            "direction has dimension {}, sample has {}",
            x.len(),
            g.d
        )));
    }
    let norm = dense_dot(x, x).sqrt();
    if !((norm - 1.0).abs() <= UNIT_TOL) {
        return Err(Error::domain(format!(
            "direction is not a unit vector (norm {norm})"
        )));
    }
    Ok(ProjectionSample::from_values(
        g.project(&Coords::Dense(x.to_vec())),
        0,
    ))
}

/// Sorted projections onto point `index` of a validated set.
pub fn project_point(g: &SampleMatrix, a: &UnitPointSet, index: usize) -> ProjectionSample {
    ProjectionSample::from_values(g.project(&a.points[index]), index)
}

fn check_dims(g: &SampleMatrix, a: &UnitPointSet) -> Result<()> {
    if a.dim != g.d {
        Err(Error::domain(format!(
            "point set has dimension {}, sample has {}",
            a.dim, g.d
        )))
    } else if a.is_empty() {
        Err(Error::config("set", "point set is empty"))
    } else {
        Ok(())
    }
}

/// Exact `sup_t |F_m(t) - F(t)|` and a point `v_i` where it is attained.
pub fn ks_statistic(p: &ProjectionSample) -> (f64, f64) {
    let mf = p.m() as f64;
    let mut best = (-1.0, 0.0);
    for (k, &v) in p.values.iter().enumerate() {
        let f = cdf(v);
        let dev = ((k + 1) as f64 / mf - f)
            .abs()
            .max((k as f64 / mf - f).abs());
        if dev > best.0 {
            best = (dev, v);
        }
    }
    best
}

/// Result of the scale-sensitive statistic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScaleSensitive {
    /// `sup_t (|F_m(t) - F(t)| - delta) / (sigma(t) sqrt(delta))`.
    pub sup: f64,
    pub arg_t: f64,
    /// The same supremum restricted to the quantile grid of `delta`.
    pub grid_sup: f64,
}

#[inline]
fn ss_value(dev: f64, s2: f64, delta: f64) -> Option<f64> {
    (s2 > 0.0).then(|| (dev - delta) / (s2 * delta).sqrt())
}

/// Scale-sensitive deviation statistic.
///
/// Evaluated at both one-sided limits of every jump, at every point of the
/// quantile grid of `delta`, and at the interior stationary points of the
/// ratio between consecutive jumps, which together make it the exact
/// supremum over the real line.
pub fn scale_sensitive_statistic(p: &ProjectionSample, delta: f64) -> Result<ScaleSensitive> {
    check_delta(delta)?;
    let grid = ProbabilityGrid::new(delta)?;
    Ok(scale_sensitive_with_grid(p, delta, &grid.t_values))
}

pub(crate) fn scale_sensitive_with_grid(
    p: &ProjectionSample,
    delta: f64,
    grid_t: &[f64],
) -> ScaleSensitive {
    let m = p.m();
    let mf = m as f64;
    let mut best = (f64::NEG_INFINITY, 0.0);
    let consider = |value: Option<f64>, t: f64, best: &mut (f64, f64)| {
        if let Some(r) = value {
            if r > best.0 {
                *best = (r, t);
            }
        }
    };
    for (k, &v) in p.values.iter().enumerate() {
        let f = cdf(v);
        let s2 = sigma2_unchecked(v);
        consider(ss_value((k as f64 / mf - f).abs(), s2, delta), v, &mut best);
        consider(
            ss_value(((k + 1) as f64 / mf - f).abs(), s2, delta),
            v,
            &mut best,
        );
    }
    // Between jumps F_m = c; on the side F < c the ratio in u = F(t) is
    // stationary at u = k / (2k - 1) with k = c - delta, and symmetrically
    // on the side F > c.
    for k in 0..=m {
        let c = k as f64 / mf;
        let lo = if k == 0 { 0.0 } else { cdf(p.values[k - 1]) };
        let hi = if k == m { 1.0 } else { cdf(p.values[k]) };
        let below = c - delta;
        let above = 1.0 - (c + delta);
        let candidates = [
            (2.0 * below - 1.0 != 0.0).then(|| below / (2.0 * below - 1.0)),
            (2.0 * above - 1.0 != 0.0).then(|| 1.0 - above / (2.0 * above - 1.0)),
        ];
        for u in candidates.into_iter().flatten() {
            if u > lo && u < hi && u > 0.0 && u < 1.0 {
                consider(
                    ss_value((c - u).abs(), u * (1.0 - u), delta),
                    quantile(u),
                    &mut best,
                );
            }
        }
    }
    let mut grid_best = (f64::NEG_INFINITY, 0.0);
    for &t in grid_t {
        let f = cdf(t);
        let value = ss_value((p.ecdf(t) - f).abs(), sigma2_unchecked(t), delta);
        consider(value, t, &mut grid_best);
        consider(value, t, &mut best);
    }
    ScaleSensitive {
        sup: best.0,
        arg_t: best.1,
        grid_sup: grid_best.0,
    }
}

/// `sup_t |F_m(t) - F(t)| / (delta + sigma(t) sqrt(delta))`.
///
/// The ratio is monotone between jumps, so the one-sided jump limits give the
/// exact supremum.
pub fn envelope_ratio(p: &ProjectionSample, delta: f64) -> (f64, f64) {
    let mf = p.m() as f64;
    let sd = delta.sqrt();
    let mut best = (0.0, 0.0);
    for (k, &v) in p.values.iter().enumerate() {
        let f = cdf(v);
        let env = delta + sigma2_unchecked(v).sqrt() * sd;
        let dev = ((k + 1) as f64 / mf - f)
            .abs()
            .max((k as f64 / mf - f).abs());
        let r = dev / env;
        if r > best.0 {
            best = (r, v);
        }
    }
    best
}

/// Every statistic for one direction of one sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DirectionStats {
    pub direction_index: usize,
    pub ks_sup: f64,
    pub ks_arg_t: f64,
    pub ss_sup: f64,
    pub ss_arg_t: f64,
    pub ss_grid_sup: f64,
    pub envelope_ratio: f64,
    pub envelope_arg_t: f64,
    pub w2: f64,
    pub coord_stat: f64,
}

/// Per-direction statistics of a sample and their set-level maxima.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeviationReport {
    pub m: usize,
    pub d: usize,
    pub seed: u64,
    pub delta: f64,
    pub per_direction: Vec<DirectionStats>,
    pub ks_sup: f64,
    pub ks_arg_t: f64,
    pub scale_sensitive_sup: f64,
    pub ss_arg_t: f64,
    pub ss_grid_sup: f64,
    pub envelope_ratio: f64,
    pub w2: f64,
    pub coordinate_stat: f64,
    /// Direction attaining `envelope_ratio`.
    pub worst_direction: usize,
    pub worst_t: f64,
}

/// First index attaining the maximum of `key`.
fn argmax<T>(items: &[T], key: impl Fn(&T) -> f64) -> usize {
    let mut arg = 0;
    let mut best = f64::NEG_INFINITY;
    for (i, item) in items.iter().enumerate() {
        let k = key(item);
        if k > best {
            best = k;
            arg = i;
        }
    }
    arg
}

impl DeviationReport {
    fn from_directions(g: &SampleMatrix, delta: f64, per_direction: Vec<DirectionStats>) -> Self {
        let ks = &per_direction[argmax(&per_direction, |s| s.ks_sup)];
        let ss = &per_direction[argmax(&per_direction, |s| s.ss_sup)];
        let env = &per_direction[argmax(&per_direction, |s| s.envelope_ratio)];
        let fold = |f: fn(&DirectionStats) -> f64| {
            per_direction
                .iter()
                .map(f)
                .fold(f64::NEG_INFINITY, f64::max)
        };
        DeviationReport {
            m: g.m,
            d: g.d,
            seed: g.seed,
            delta,
            ks_sup: ks.ks_sup,
            ks_arg_t: ks.ks_arg_t,
            scale_sensitive_sup: ss.ss_sup,
            ss_arg_t: ss.ss_arg_t,
            ss_grid_sup: fold(|s| s.ss_grid_sup),
            envelope_ratio: env.envelope_ratio,
            w2: fold(|s| s.w2),
            coordinate_stat: fold(|s| s.coord_stat),
            worst_direction: env.direction_index,
            worst_t: env.envelope_arg_t,
            per_direction,
        }
    }

    /// CSV rows in the `DEVIATION_HEADER` layout, one per direction.
    pub fn csv_rows(&self, trial: usize) -> Vec<String> {
        self.per_direction
            .iter()
            .map(|s| {
                format!(
                    "{trial},{},{},{},{},{},{},{},{},{},{},{}",
                    self.seed,
                    self.m,
                    self.d,
                    self.delta,
                    s.direction_index,
                    s.ks_sup,
                    s.ks_arg_t,
                    s.ss_sup,
                    s.ss_arg_t,
                    s.w2,
                    s.coord_stat
                )
            })
            .collect()
    }
}

/// All statistics of one sorted projection.
pub fn direction_stats(
    p: &ProjectionSample,
    delta: f64,
    grid_t: &[f64],
    reference: &W2Reference,
) -> DirectionStats {
    let (ks_sup, ks_arg_t) = ks_statistic(p);
    let ss = scale_sensitive_with_grid(p, delta, grid_t);
    let (envelope_ratio, envelope_arg_t) = envelope_ratio(p, delta);
    let (w2, coord_stat) = reference.w2_and_coordinate(&p.values);
    DirectionStats {
        direction_index: p.direction_index,
        ks_sup,
        ks_arg_t,
        ss_sup: ss.sup,
        ss_arg_t: ss.arg_t,
        ss_grid_sup: ss.grid_sup,
        envelope_ratio,
        envelope_arg_t,
        w2,
        coord_stat,
    }
}

/// Statistics of every direction of `a` for the sample `g`.
pub fn deviation_report(g: &SampleMatrix, a: &UnitPointSet, delta: f64) -> Result<DeviationReport> {
    check_dims(g, a)?;
    check_delta(delta)?;
    let grid = ProbabilityGrid::new(delta)?;
    let reference = W2Reference::cached(g.m);
    let per_direction: Vec<DirectionStats> = (0..a.len())
        .into_par_iter()
        .map(|j| direction_stats(&project_point(g, a, j), delta, &grid.t_values, &reference))
        .collect();
    Ok(DeviationReport::from_directions(g, delta, per_direction))
}

/// Checks `|F_m(t) - F(t)| <= c_env (delta + sigma(t) sqrt(delta))` for every
/// direction of `a` and every `t`; the report's worst direction is the one
/// with the largest envelope ratio.
pub fn uniform_envelope_check(
    g: &SampleMatrix,
    a: &UnitPointSet,
    delta: f64,
    c_env: f64,
) -> Result<(bool, DeviationReport)> {
    if !(c_env >= 0.0) {
        return Err(Error::config(
            "c_env",
            format!("envelope constant must be nonnegative, got {c_env}"),
        ));
    }
    let report = deviation_report(g, a, delta)?;
    Ok((report.envelope_ratio > c_env, report))
}

/// `P({<G,x> <= t} xor {<G,y> <= t})` for a standard Gaussian `G`.
///
/// With `rho = <x, y>` the probability reduces to the planar integral
/// `(1/pi) int_{asin rho}^{pi/2} exp(-t^2 / (1 + sin theta)) d theta`.
pub fn symmetric_difference_probability(x: &[f64], y: &[f64], t: f64) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::domain("directions have different dimensions"));
    }
    for v in [x, y] {
        let norm = dense_dot(v, v).sqrt();
        if !((norm - 1.0).abs() <= UNIT_TOL) {
            return Err(Error::domain(format!(
                "direction is not a unit vector (norm {norm})"
            )));
        }
    }
    if !t.is_finite() {
        return Err(Error::domain(format!("level must be finite, got {t}")));
    }
    let diff: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
    let sum: f64 = x.iter().zip(y).map(|(a, b)| (a + b) * (a + b)).sum();
    // rho from the two norms keeps precision when x is close to +-y.
    let rho = ((sum - diff) / (sum + diff)).clamp(-1.0, 1.0);
    Ok(symmetric_difference_from_correlation(rho, t))
}

pub fn symmetric_difference_from_correlation(rho: f64, t: f64) -> f64 {
    let start = rho.asin();
    let end = std::f64::consts::FRAC_PI_2;
    if start >= end {
        return 0.0;
    }
    let t2 = t * t;
    let integrand = |theta: f64| {
        let s = 1.0 + theta.sin();
        if s <= 0.0 {
            if t2 == 0.0 {
                1.0
            } else {
                0.0
            }
        } else {
            (-t2 / s).exp()
        }
    };
    let total = gl16().integrate_composite(start, end, 64, integrand);
    (total / std::f64::consts::PI).clamp(0.0, 1.0)
}

/// The sample mean and `int (F - F_m) dt`, which agree exactly.
///
/// The integral is assembled between consecutive jumps from the
/// antiderivative `t F(t) + f(t)` of `F`.
pub fn mean_integral_identity(p: &ProjectionSample) -> (f64, f64) {
    let m = p.m();
    if m == 0 {
        return (0.0, 0.0);
    }
    let mf = m as f64;
    let v = &p.values;
    let lhs = v.iter().sum::<f64>() / mf;
    let big_f = |t: f64| t * cdf(t) + density(t);
    let mut rhs = big_f(v[0]);
    for k in 1..m {
        let (a, b) = (v[k - 1], v[k]);
        rhs += big_f(b) - big_f(a) - (k as f64 / mf) * (b - a);
    }
    // On [v_m, inf) the antiderivative of F - 1 is t (F(t) - 1) + f(t).
    let last = v[m - 1];
    rhs -= -last * cdf(-last) + density(last);
    (lhs, rhs)
}

/// `(t, F_m(t), F(t), |F_m - F|, delta + sigma(t) sqrt(delta))` on a grid.
pub fn envelope_curve(p: &ProjectionSample, delta: f64, ts: &[f64]) -> Vec<[f64; 5]> {
    ts.iter()
        .map(|&t| {
            let fm = p.ecdf(t);
            let f = cdf(t);
            [
                t,
                fm,
                f,
                (fm - f).abs(),
                delta + (f * (1.0 - f) * delta).sqrt(),
            ]
        })
        .collect()
}

/// One point of the symmetric-difference sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SymmetricDifferenceRow {
    pub delta: f64,
    pub t: f64,
    pub exact: f64,
    /// `exact / (sigma2(t) delta log(1 / (sigma2(t) delta)))`.
    pub ratio: f64,
    pub monte_carlo: f64,
    pub standard_error: f64,
}

pub const SWEEP_DISTANCES: [f64; 7] = [0.01, 0.02, 0.05, 0.1, 0.2, 0.3, 0.5];
pub const SWEEP_LEVELS: [f64; 4] = [0.0, 1.0, 2.0, 3.0];

/// Exact symmetric-difference probabilities over distances and levels, with
/// a Monte Carlo estimate from `samples` planar Gaussian draws shared by all
/// grid points.
pub fn symmetric_difference_sweep(samples: usize, seed: u64) -> Vec<SymmetricDifferenceRow> {
    const CHUNK: usize = 1 << 16;
    let chunks = samples.div_ceil(CHUNK);
    let cases: Vec<(f64, f64)> = SWEEP_DISTANCES
        .iter()
        .flat_map(|&d| SWEEP_LEVELS.iter().map(move |&t| (d, t)))
        .collect();
    // x = e1 and y = (rho, sqrt(1 - rho^2)) with |x - y| = delta.
    let dirs: Vec<(f64, f64)> = cases
        .iter()
        .map(|&(d, _)| {
            let rho = 1.0 - 0.5 * d * d;
            (rho, (1.0 - rho * rho).sqrt())
        })
        .collect();
    let counts: Vec<u64> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = stream_rng(seed, c as u64);
            let n = CHUNK.min(samples - c * CHUNK);
            let mut local = vec![0u64; cases.len()];
            for _ in 0..n {
                let g1: f64 = rng.sample(StandardNormal);
                let g2: f64 = rng.sample(StandardNormal);
                for (j, (&(_, t), &(a, b))) in cases.iter().zip(&dirs).enumerate() {
                    local[j] += ((g1 <= t) != (a * g1 + b * g2 <= t)) as u64;
                }
            }
            local
        })
        .reduce(
            || vec![0u64; cases.len()],
            |a, b| a.iter().zip(&b).map(|(x, y)| x + y).collect(),
        );
    cases
        .iter()
        .zip(&dirs)
        .zip(&counts)
        .map(|((&(delta, t), &(rho, _)), &hits)| {
            let exact = symmetric_difference_from_correlation(rho, t);
            let s2 = crate::gaussian::sigma2_unchecked(t);
            let p = hits as f64 / samples as f64;
            SymmetricDifferenceRow {
                delta,
                t,
                exact,
                ratio: exact / (s2 * delta * (1.0 / (s2 * delta)).ln()),
                monte_carlo: p,
                standard_error: (p * (1.0 - p) / samples as f64).sqrt(),
            }
        })
        .collect()
}
