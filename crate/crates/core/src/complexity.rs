//! Metric complexity of finite point sets: greedy covering numbers,
//! admissible sequences and the gamma functionals they bound, the
//! single-scale (Sudakov-type) lower functional, the dyadic entropy sum, and
//! the half-nets of sparse spheres.
//!
//! All covers are built from one greedy farthest-point traversal. A greedy
//! center set is separated at the scale it stops at, so its size sits between
//! the true covering number at that scale and the one at half the scale.
//! Balls are closed: a point at distance exactly `delta` from a center is
//! covered.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::point_sets::{dense_dot, UnitPointSet};
use crate::rng::stream_rng;

/// Sets up to this size get a precomputed distance matrix.
const MATRIX_LIMIT: usize = 4096;

/// Level-0 centers are searched among at most this many candidates.
const CENTER_CANDIDATES: usize = 512;

/// Dyadic scales `2, 1, 1/2, ..., 2^-20` used for covering profiles.
pub fn dyadic_scales() -> Vec<f64> {
    (0..=21).map(|j| 2f64.powi(1 - j)).collect()
}

/// Pairwise distances, cached when the set is small enough.
pub struct Distances<'a> {
    set: &'a UnitPointSet,
    matrix: Option<Vec<f64>>,
}

impl<'a> Distances<'a> {
    pub fn new(set: &'a UnitPointSet) -> Self {
        let n = set.len();
        let matrix = (n <= MATRIX_LIMIT && n > 1).then(|| {
            let dense: Option<Vec<&[f64]>> = set
                .points
                .iter()
                .map(|p| match p {
                    crate::point_sets::Coords::Dense(v) => Some(v.as_slice()),
                    crate::point_sets::Coords::Sparse(_) => None,
                })
                .collect();
            let mut out = vec![0.0; n * n];
            out.par_chunks_mut(n).enumerate().for_each(|(i, row)| {
                for (j, slot) in row.iter_mut().enumerate() {
                    if i == j {
                        continue;
                    }
                    let dot = match &dense {
                        Some(rows) => dense_dot(rows[i], rows[j]),
                        None => set.dot(i, j),
                    };
                    *slot = (2.0 - 2.0 * dot).max(0.0).sqrt();
                }
            });
            // Symmetrize so d(i, j) and d(j, i) agree bit for bit.
            for i in 0..n {
                for j in i + 1..n {
                    out[j * n + i] = out[i * n + j];
                }
            }
            out
        });
        Distances { set, matrix }
    }

    pub fn len(&self) -> usize {
        self.set.len()
    }

    pub fn is_empty(&self) -> bool {
        self.set.is_empty()
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        match &self.matrix {
            Some(m) => m[i * self.set.len() + j],
            None => {
                if i == j {
                    0.0
                } else if i < j {
                    self.set.distance(i, j)
                } else {
                    self.set.distance(j, i)
                }
            }
        }
    }
}

/// Greedy farthest-point ordering of a set.
///
/// `radii[k]` is the covering radius of the first `k + 1` centers, i.e. the
/// largest distance from any point to its nearest center among them.
#[derive(Debug, Clone)]
pub struct Traversal {
    pub order: Vec<usize>,
    pub radii: Vec<f64>,
}

impl Traversal {
    /// Smallest greedy prefix whose closed balls of radius `delta` cover the set.
    pub fn cover_size(&self, delta: f64) -> usize {
        self.radii.partition_point(|&r| r > delta) + 1
    }
}

/// State of a growing center set: nearest center and its distance per point.
struct NearestCenters {
    nearest: Vec<usize>,
    dist: Vec<f64>,
}

impl NearestCenters {
    fn new(dist: &Distances<'_>, first: usize) -> Self {
        let n = dist.len();
        let d: Vec<f64> = (0..n).into_par_iter().map(|p| dist.get(p, first)).collect();
        NearestCenters {
            nearest: vec![first; n],
            dist: d,
        }
    }

    fn add(&mut self, dist: &Distances<'_>, c: usize) {
        let nearest = &mut self.nearest;
        self.dist
            .par_iter_mut()
            .zip(nearest.par_iter_mut())
            .enumerate()
            .for_each(|(p, (best, who))| {
                let d = dist.get(p, c);
                if d < *best || (d == *best && c < *who) {
                    *best = d;
                    *who = c;
                }
            });
    }

    /// Farthest point from the centers; ties go to the lowest index.
    fn farthest(&self) -> (usize, f64) {
        let mut arg = 0;
        let mut far = f64::NEG_INFINITY;
        for (p, &d) in self.dist.iter().enumerate() {
            if d > far {
                far = d;
                arg = p;
            }
        }
        (arg, far)
    }
}

/// Farthest-point traversal from `start`, stopped after `limit` centers.
pub fn farthest_point_traversal(dist: &Distances<'_>, start: usize, limit: usize) -> Traversal {
    let n = dist.len();
    let limit = limit.min(n).max(1);
    let mut state = NearestCenters::new(dist, start);
    let mut order = vec![start];
    let mut radii = Vec::with_capacity(limit);
    loop {
        let (far, r) = state.farthest();
        radii.push(r.max(0.0));
        if order.len() == limit || r <= 0.0 {
            break;
        }
        order.push(far);
        state.add(dist, far);
    }
    Traversal { order, radii }
}

fn require_nonempty(a: &UnitPointSet) -> Result<()> {
    if a.is_empty() {
        Err(Error::config("set", "point set is empty"))
    } else {
        Ok(())
    }
}

/// Greedy upper estimate of `N(A, delta)` with closed balls, starting from
/// point 0.
pub fn covering_number(a: &UnitPointSet, delta: f64) -> Result<usize> {
    require_nonempty(a)?;
    if !(delta > 0.0) {
        return Err(Error::config(
            "delta",
            format!("covering scale must be positive, got {delta}"),
        ));
    }
    let dist = Distances::new(a);
    let full = farthest_point_traversal(&dist, 0, a.len());
    Ok(full.cover_size(delta))
}

/// Greedy covering numbers at every dyadic scale, from one traversal.
pub fn covering_profile(a: &UnitPointSet) -> Result<Vec<(f64, usize)>> {
    require_nonempty(a)?;
    let dist = Distances::new(a);
    Ok(profile_from(
        &farthest_point_traversal(&dist, 0, a.len()),
        &dyadic_scales(),
    ))
}

fn profile_from(traversal: &Traversal, scales: &[f64]) -> Vec<(f64, usize)> {
    scales
        .iter()
        .map(|&d| (d, traversal.cover_size(d)))
        .collect()
}

/// Nested subsets `A_0 ⊂ A_1 ⊂ ...` with `|A_0| = 1`, `|A_s| <= 2^{2^s}`, and
/// the nearest-point map onto each level.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AdmissibleSequence {
    /// Point indices of each level.
    pub levels: Vec<Vec<usize>>,
    /// `assignments[s][x]` is the nearest point of level `s` to point `x`.
    pub assignments: Vec<Vec<usize>>,
    /// `distances[s][x] = |x - pi_s x|`.
    pub distances: Vec<Vec<f64>>,
}

/// `1` at level 0, `min(cap, 2^{2^s})` afterwards, without overflow.
pub fn level_capacity(s: usize, cap: usize) -> usize {
    if s == 0 {
        return 1.min(cap);
    }
    if s >= 6 {
        return cap;
    }
    let exp = 1u32 << s;
    2u128.pow(exp).min(cap as u128) as usize
}

/// Point minimizing the largest distance to the set, among a deterministic
/// strided subsample of candidates.
fn minimax_center(dist: &Distances<'_>) -> usize {
    let n = dist.len();
    let stride = n.div_ceil(CENTER_CANDIDATES).max(1);
    let candidates: Vec<usize> = (0..n).step_by(stride).collect();
    let radii: Vec<f64> = candidates
        .par_iter()
        .map(|&c| (0..n).map(|p| dist.get(p, c)).fold(0.0, f64::max))
        .collect();
    let mut best = candidates[0];
    let mut best_r = f64::INFINITY;
    for (&c, &r) in candidates.iter().zip(&radii) {
        if r < best_r {
            best_r = r;
            best = c;
        }
    }
    best
}

impl AdmissibleSequence {
    /// Greedy farthest-point nets: level `s` holds the first
    /// `min(|A|, 2^{2^s})` points of a traversal started at the minimax center.
    pub fn build(a: &UnitPointSet) -> Result<Self> {
        require_nonempty(a)?;
        let dist = Distances::new(a);
        Ok(Self::build_with(&dist))
    }

    fn build_with(dist: &Distances<'_>) -> Self {
        let n = dist.len();
        let start = minimax_center(dist);
        let mut state = NearestCenters::new(dist, start);
        let mut order = vec![start];
        let mut levels = Vec::new();
        let mut assignments = Vec::new();
        let mut distances = Vec::new();
        for s in 0.. {
            let size = level_capacity(s, n);
            if size == n {
                levels.push((0..n).collect());
                assignments.push((0..n).collect());
                distances.push(vec![0.0; n]);
                break;
            }
            while order.len() < size {
                let (far, _) = state.farthest();
                order.push(far);
                state.add(dist, far);
            }
            let mut level = order.clone();
            level.sort_unstable();
            levels.push(level);
            assignments.push(state.nearest.clone());
            distances.push(state.dist.clone());
        }
        AdmissibleSequence {
            levels,
            assignments,
            distances,
        }
    }

    /// `sup_x sum_s 2^{s/alpha} |x - pi_s x|`.
    pub fn functional(&self, alpha: f64) -> f64 {
        let n = self.distances.first().map_or(0, Vec::len);
        (0..n)
            .map(|x| {
                self.distances
                    .iter()
                    .enumerate()
                    .map(|(s, d)| 2f64.powf(s as f64 / alpha) * d[x])
                    .sum::<f64>()
            })
            .fold(0.0, f64::max)
    }
}

pub fn build_admissible_sequence(a: &UnitPointSet) -> Result<AdmissibleSequence> {
    AdmissibleSequence::build(a)
}

/// Upper bound on `gamma_alpha(A)` from the greedy admissible sequence.
pub fn gamma_upper(a: &UnitPointSet, alpha: f64) -> Result<f64> {
    if !(alpha > 0.0) {
        return Err(Error::config(
            "alpha",
            format!("alpha must be positive, got {alpha}"),
        ));
    }
    Ok(AdmissibleSequence::build(a)?.functional(alpha))
}

/// `max_delta delta * log N(A, delta)` over the dyadic scales.
pub fn sudakov_lower(a: &UnitPointSet) -> Result<f64> {
    Ok(sudakov_from_profile(&covering_profile(a)?))
}

pub fn sudakov_from_profile(profile: &[(f64, usize)]) -> f64 {
    profile
        .iter()
        .map(|&(d, n)| d * (n as f64).ln())
        .fold(0.0, f64::max)
}

/// Dyadic entropy sum `sum_j delta_j log N(A, delta_j)` over
/// `delta_j = 2^{1-j}`, an upper Riemann sum of `int_0^inf log N(A, d) dd`.
/// Once the cover saturates at `|A|` the remaining geometric tail is added in
/// closed form.
pub fn dudley_upper(a: &UnitPointSet) -> Result<f64> {
    require_nonempty(a)?;
    let dist = Distances::new(a);
    Ok(dudley_from_traversal(
        &farthest_point_traversal(&dist, 0, a.len()),
        a.len(),
    ))
}

fn dudley_from_traversal(traversal: &Traversal, n: usize) -> f64 {
    if n == 1 {
        return 0.0;
    }
    let mut delta = 2.0;
    let mut total = 0.0;
    loop {
        let count = traversal.cover_size(delta);
        if count >= n {
            return total + 2.0 * delta * (n as f64).ln();
        }
        total += delta * (count as f64).ln();
        delta *= 0.5;
    }
}

/// Summary of the complexity estimates of one set.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComplexityReport {
    pub label: String,
    pub n: usize,
    pub dim: usize,
    pub symmetric: bool,
    pub gamma1_upper: f64,
    pub gamma2_upper: f64,
    pub sudakov_lower: f64,
    pub dudley_upper: f64,
    pub covering_profile: Vec<(f64, usize)>,
}

pub fn complexity_report(a: &UnitPointSet) -> Result<ComplexityReport> {
    require_nonempty(a)?;
    let dist = Distances::new(a);
    let seq = AdmissibleSequence::build_with(&dist);
    let traversal = farthest_point_traversal(&dist, 0, a.len());
    let covering_profile = profile_from(&traversal, &dyadic_scales());
    Ok(ComplexityReport {
        label: a.label.clone(),
        n: a.len(),
        dim: a.dim,
        symmetric: a.symmetric,
        gamma1_upper: seq.functional(1.0),
        gamma2_upper: seq.functional(2.0),
        sudakov_lower: sudakov_from_profile(&covering_profile),
        dudley_upper: dudley_from_traversal(&traversal, a.len()),
        covering_profile,
    })
}

/// Net-size exponent: each sub-sphere `S_E` gets `ceil(exp(NET_EXPONENT |E|))`
/// random points.
pub const NET_EXPONENT: f64 = 4.0;

/// Largest total cover size `sparse_cover` will build.
pub const SPARSE_COVER_BUDGET: usize = 2_000_000;

const MAX_SPARSE_DIM: usize = 16;

fn net_size(support: usize) -> usize {
    if support == 1 {
        2
    } else {
        (NET_EXPONENT * support as f64).exp().ceil() as usize
    }
}

/// Union over supports `E` with `|E| <= k` of random half-nets of the unit
/// sphere of the coordinate subspace spanned by `E`.
///
/// A net is accepted once every one of a batch of random test directions in
/// `S_E` lies within 1/2 of it; otherwise it is regrown at twice the size.
/// The result is sorted lexicographically.
pub fn sparse_cover(m: usize, k: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    if m == 0 || m > MAX_SPARSE_DIM {
        return Err(Error::config(
            "m",
            format!("sparse cover needs 1 <= m <= {MAX_SPARSE_DIM}, got {m}"),
        ));
    }
    if k == 0 || k > m {
        return Err(Error::config(
            "k",
            format!("sparse cover needs 1 <= k <= m = {m}, got {k}"),
        ));
    }
    let supports: Vec<u32> = (1u32..(1u32 << m))
        .filter(|s| s.count_ones() as usize <= k)
        .collect();
    let planned: f64 = supports
        .iter()
        .map(|s| net_size(s.count_ones() as usize) as f64)
        .sum();
    if planned > SPARSE_COVER_BUDGET as f64 {
        return Err(Error::config(
            "k",
            format!("sparse cover for m={m}, k={k} needs ~{planned:.3e} vectors, above the budget {SPARSE_COVER_BUDGET}"),
        ));
    }
    let nets: Vec<Vec<Vec<f64>>> = supports
        .par_iter()
        .map(|&mask| support_net(m, mask, seed))
        .collect::<Result<_>>()?;
    let mut out: Vec<Vec<f64>> = nets.into_iter().flatten().collect();
    out.sort_by(|a, b| {
        a.iter()
            .zip(b)
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    Ok(out)
}

fn support_net(m: usize, mask: u32, seed: u64) -> Result<Vec<Vec<f64>>> {
    use rand::Rng;
    use rand_distr::StandardNormal;

    let coords: Vec<usize> = (0..m).filter(|i| mask & (1 << i) != 0).collect();
    let embed = |local: &[f64]| {
        let mut v = vec![0.0; m];
        for (&c, &x) in coords.iter().zip(local) {
            v[c] = x;
        }
        v
    };
    if coords.len() == 1 {
        return Ok(vec![embed(&[1.0]), embed(&[-1.0])]);
    }
    let dim = coords.len();
    let mut rng = stream_rng(seed, mask as u64);
    let mut random_unit = move || loop {
        let v: Vec<f64> = (0..dim)
            .map(|_| rng.sample::<f64, _>(StandardNormal))
            .collect();
        let norm = dense_dot(&v, &v).sqrt();
        if norm > 1e-300 {
            break v.into_iter().map(|x| x / norm).collect::<Vec<f64>>();
        }
    };
    let mut size = net_size(dim);
    let mut net: Vec<Vec<f64>> = Vec::with_capacity(size);
    for _ in 0..6 {
        while net.len() < size {
            net.push(random_unit());
        }
        let tests = 200 * dim;
        // |x - y| <= 1/2  <=>  <x, y> >= 1 - 1/8 for unit vectors.
        let covered = (0..tests).all(|_| {
            let probe = random_unit();
            net.iter().any(|p| dense_dot(p, &probe) >= 0.875)
        });
        if covered {
            return Ok(net.iter().map(|p| embed(p)).collect());
        }
        size *= 2;
    }
    Err(Error::Resource(format!(
        "could not certify a half-net for support {mask:#b}"
    )))
}

/// `(sum of the k largest a_i^2)^{1/2}`.
pub fn top_k_norm(a: &[f64], k: usize) -> f64 {
    let mut sq: Vec<f64> = a.iter().map(|x| x * x).collect();
    sq.sort_by(|x, y| y.total_cmp(x));
    sq.iter().take(k).sum::<f64>().sqrt()
}

/// `max_{b in cover} <a, b>`.
pub fn cover_sup(cover: &[Vec<f64>], a: &[f64]) -> f64 {
    cover
        .iter()
        .map(|b| dense_dot(a, b))
        .fold(f64::NEG_INFINITY, f64::max)
}
