//! Finite index sets on the unit sphere: generators, validation and the
//! point-set CSV format.

use std::cmp::Ordering;
use std::fmt::Write as _;
use std::io::{BufRead, Write};

use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::rng::stream_rng;

/// Norm, symmetry and duplicate tolerance.
pub const POINT_TOL: f64 = 1e-12;

pub const POINT_SET_SCHEMA: &str = "# schema: point-set/v1";

/// Coordinates of one point. Sparse entries are sorted by index.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Coords {
    Dense(Vec<f64>),
    Sparse(Vec<(usize, f64)>),
}

impl Coords {
    pub fn dot(&self, other: &Coords) -> f64 {
        match (self, other) {
            (Coords::Dense(a), Coords::Dense(b)) => dense_dot(a, b),
            (Coords::Dense(a), Coords::Sparse(b)) | (Coords::Sparse(b), Coords::Dense(a)) => {
                b.iter().map(|&(k, v)| a[k] * v).sum()
            }
            (Coords::Sparse(a), Coords::Sparse(b)) => {
                let (mut i, mut j, mut acc) = (0, 0, 0.0);
                while i < a.len() && j < b.len() {
                    match a[i].0.cmp(&b[j].0) {
                        Ordering::Less => i += 1,
                        Ordering::Greater => j += 1,
                        Ordering::Equal => {
                            acc += a[i].1 * b[j].1;
                            i += 1;
                            j += 1;
                        }
                    }
                }
                acc
            }
        }
    }

    /// Inner product with a dense row such as a sample `G_i`.
    #[inline]
    pub fn dot_dense(&self, row: &[f64]) -> f64 {
        match self {
            Coords::Dense(a) => dense_dot(a, row),
            Coords::Sparse(a) => a.iter().map(|&(k, v)| row[k] * v).sum(),
        }
    }

    pub fn norm_sq(&self) -> f64 {
        match self {
            Coords::Dense(a) => dense_dot(a, a),
            Coords::Sparse(a) => a.iter().map(|&(_, v)| v * v).sum(),
        }
    }

    pub fn negated(&self) -> Coords {
        match self {
            Coords::Dense(a) => Coords::Dense(a.iter().map(|v| -v).collect()),
            Coords::Sparse(a) => Coords::Sparse(a.iter().map(|&(k, v)| (k, -v)).collect()),
        }
    }

    pub fn to_dense(&self, dim: usize) -> Vec<f64> {
        match self {
            Coords::Dense(a) => a.clone(),
            Coords::Sparse(a) => {
                let mut out = vec![0.0; dim];
                for &(k, v) in a {
                    out[k] = v;
                }
                out
            }
        }
    }

    fn max_index(&self) -> Option<usize> {
        match self {
            Coords::Dense(a) => a.len().checked_sub(1),
            Coords::Sparse(a) => a.last().map(|&(k, _)| k),
        }
    }
}

/// `|a - b|^2` computed coordinate-wise (no Gram-form cancellation).
pub fn difference_norm_sq(a: &Coords, b: &Coords) -> f64 {
    match (a, b) {
        (Coords::Dense(x), Coords::Dense(y)) => {
            x.iter().zip(y).map(|(p, q)| (p - q) * (p - q)).sum()
        }
        (Coords::Dense(x), Coords::Sparse(y)) | (Coords::Sparse(y), Coords::Dense(x)) => {
            let mut total: f64 = x.iter().map(|v| v * v).sum();
            for &(k, v) in y {
                total += (x[k] - v).powi(2) - x[k] * x[k];
            }
            total.max(0.0)
        }
        (Coords::Sparse(x), Coords::Sparse(y)) => {
            let (mut i, mut j, mut acc) = (0, 0, 0.0);
            while i < x.len() || j < y.len() {
                let ki = x.get(i).map_or(usize::MAX, |e| e.0);
                let kj = y.get(j).map_or(usize::MAX, |e| e.0);
                match ki.cmp(&kj) {
                    Ordering::Less => {
                        acc += x[i].1 * x[i].1;
                        i += 1;
                    }
                    Ordering::Greater => {
                        acc += y[j].1 * y[j].1;
                        j += 1;
                    }
                    Ordering::Equal => {
                        acc += (x[i].1 - y[j].1).powi(2);
                        i += 1;
                        j += 1;
                    }
                }
            }
            acc
        }
    }
}

/// Dot product with four independent accumulators so the loop vectorizes.
#[inline]
pub fn dense_dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 4];
    let ca = a.chunks_exact(4);
    let cb = b.chunks_exact(4);
    let tail: f64 = ca
        .remainder()
        .iter()
        .zip(cb.remainder())
        .map(|(x, y)| x * y)
        .sum();
    for (x, y) in ca.zip(cb) {
        acc[0] += x[0] * y[0];
        acc[1] += x[1] * y[1];
        acc[2] += x[2] * y[2];
        acc[3] += x[3] * y[3];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// A finite set `A` of unit vectors in `R^dim`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UnitPointSet {
    pub dim: usize,
    pub points: Vec<Coords>,
    pub symmetric: bool,
    pub label: String,
}

impl UnitPointSet {
    /// Builds a set and checks every invariant.
    pub fn new(
        dim: usize,
        points: Vec<Coords>,
        symmetric: bool,
        label: impl Into<String>,
    ) -> Result<Self> {
        let set = UnitPointSet {
            dim,
            points,
            symmetric,
            label: label.into(),
        };
        set.validate()?;
        Ok(set)
    }

    pub fn from_dense(
        dim: usize,
        rows: Vec<Vec<f64>>,
        symmetric: bool,
        label: impl Into<String>,
    ) -> Result<Self> {
        Self::new(
            dim,
            rows.into_iter().map(Coords::Dense).collect(),
            symmetric,
            label,
        )
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    #[inline]
    pub fn dot(&self, i: usize, j: usize) -> f64 {
        self.points[i].dot(&self.points[j])
    }

    /// Euclidean distance, using `|x - y|^2 = 2 - 2<x, y>` for unit vectors.
    #[inline]
    pub fn distance(&self, i: usize, j: usize) -> f64 {
        if i == j {
            return 0.0;
        }
        (2.0 - 2.0 * self.dot(i, j)).max(0.0).sqrt()
    }

    pub fn diameter(&self) -> f64 {
        let mut best: f64 = 0.0;
        for i in 0..self.len() {
            for j in i + 1..self.len() {
                best = best.max(self.distance(i, j));
            }
        }
        best
    }

    /// `A ∪ -A`, listed as the original points followed by their negatives.
    /// Points whose negative is already present are not duplicated.
    pub fn symmetrized(&self) -> Result<UnitPointSet> {
        let mut points = self.points.clone();
        let index = ProjectionIndex::build(&self.points);
        for p in &self.points {
            let neg = p.negated();
            if index.find(&self.points, &neg).is_none() {
                points.push(neg);
            }
        }
        UnitPointSet::new(self.dim, points, true, self.label.clone())
    }

    /// Checks unit norms, the symmetry flag and absence of duplicates.
    pub fn validate(&self) -> Result<()> {
        if self.dim < 1 {
            return Err(Error::config("dim", "dimension must be positive"));
        }
        for (i, p) in self.points.iter().enumerate() {
            match p {
                Coords::Dense(a) if a.len() != self.dim => {
                    return Err(Error::domain(format!(
                        "point {i} has {} coordinates, expected {}",
                        a.len(),
                        self.dim
                    )))
                }
                Coords::Sparse(a) => {
                    if a.windows(2).any(|w| w[0].0 >= w[1].0) {
                        return Err(Error::domain(format!(
                            "point {i}: sparse indices not increasing"
                        )));
                    }
                    if p.max_index().is_some_and(|k| k >= self.dim) {
                        return Err(Error::domain(format!("point {i}: index out of range")));
                    }
                }
                _ => {}
            }
            let norm = p.norm_sq().sqrt();
            if !norm.is_finite() || (norm - 1.0).abs() > POINT_TOL {
                return Err(Error::domain(format!(
                    "point {i} has norm {norm}, expected 1"
                )));
            }
        }
        let index = ProjectionIndex::build(&self.points);
        if let Some((i, j)) = index.first_duplicate(&self.points) {
            return Err(Error::domain(format!("points {i} and {j} coincide")));
        }
        if self.symmetric {
            for (i, p) in self.points.iter().enumerate() {
                if index.find(&self.points, &p.negated()).is_none() {
                    return Err(Error::domain(format!(
                        "set flagged symmetric but -x is missing for point {i}"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "{POINT_SET_SCHEMA}")?;
        writeln!(out, "dim,n,symmetric,label")?;
        writeln!(
            out,
            "{},{},{},{}",
            self.dim,
            self.len(),
            self.symmetric,
            self.label.replace(',', ";")
        )?;
        let mut line = String::new();
        for p in &self.points {
            line.clear();
            for (k, v) in p.to_dense(self.dim).iter().enumerate() {
                if k > 0 {
                    line.push(',');
                }
                write!(line, "{v}").expect("write to String");
            }
            writeln!(out, "{line}")?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(input: R) -> Result<UnitPointSet> {
        let mut lines = input
            .lines()
            .map(|l| l.map_err(Error::from))
            .filter(|l| !matches!(l, Ok(s) if s.trim().is_empty() || s.starts_with('#')));
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("empty point-set file".into()))??;
        if header.trim() != "dim,n,symmetric,label" {
            return Err(Error::Parse(format!(
                "unexpected point-set header `{header}`"
            )));
        }
        let meta = lines
            .next()
            .ok_or_else(|| Error::Parse("missing point-set metadata row".into()))??;
        let fields: Vec<&str> = meta.splitn(4, ',').collect();
        if fields.len() != 4 {
            return Err(Error::Parse(format!("bad metadata row `{meta}`")));
        }
        let parse_usize = |s: &str, what: &str| {
            s.trim()
                .parse::<usize>()
                .map_err(|e| Error::Parse(format!("{what}: {e}")))
        };
        let dim = parse_usize(fields[0], "dim")?;
        let n = parse_usize(fields[1], "n")?;
        let symmetric = fields[2]
            .trim()
            .parse::<bool>()
            .map_err(|e| Error::Parse(format!("symmetric: {e}")))?;
        let label = fields[3].trim().to_string();
        let mut rows = Vec::with_capacity(n);
        for line in lines {
            let line = line?;
            let row = line
                .split(',')
                .map(|s| {
                    s.trim()
                        .parse::<f64>()
                        .map_err(|e| Error::Parse(format!("coordinate `{s}`: {e}")))
                })
                .collect::<Result<Vec<f64>>>()?;
            if row.len() != dim {
                return Err(Error::Parse(format!(
                    "row {} has {} coordinates, expected {dim}",
                    rows.len(),
                    row.len()
                )));
            }
            rows.push(row);
        }
        if rows.len() != n {
            return Err(Error::Parse(format!(
                "expected {n} points, found {}",
                rows.len()
            )));
        }
        UnitPointSet::from_dense(dim, rows, symmetric, label)
    }
}

/// Points sorted by their projection on a fixed generic direction; nearby
/// points have nearby keys, so duplicate and antipode searches only scan a
/// short window.
struct ProjectionIndex {
    keys: Vec<(f64, usize)>,
    slack: f64,
}

impl ProjectionIndex {
    fn probe(k: usize) -> f64 {
        // Deterministic, irrational-ish weights.
        ((k as f64 + 1.0) * 0.754_877_666_246_692_7).fract() - 0.5
    }

    fn key(p: &Coords) -> f64 {
        match p {
            Coords::Dense(a) => a.iter().enumerate().map(|(k, v)| v * Self::probe(k)).sum(),
            Coords::Sparse(a) => a.iter().map(|&(k, v)| v * Self::probe(k)).sum(),
        }
    }

    fn build(points: &[Coords]) -> Self {
        let mut keys: Vec<(f64, usize)> = points
            .iter()
            .enumerate()
            .map(|(i, p)| (Self::key(p), i))
            .collect();
        keys.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let dim = points
            .iter()
            .filter_map(|p| p.max_index())
            .max()
            .map_or(1, |k| k + 1);
        let probe_norm = (0..dim).map(|k| Self::probe(k).powi(2)).sum::<f64>().sqrt();
        ProjectionIndex {
            keys,
            slack: 2.0 * POINT_TOL * probe_norm.max(1.0) + 1e-15,
        }
    }

    fn near(a: &Coords, b: &Coords) -> bool {
        difference_norm_sq(a, b) <= POINT_TOL * POINT_TOL
    }

    fn find(&self, points: &[Coords], target: &Coords) -> Option<usize> {
        let key = Self::key(target);
        let start = self.keys.partition_point(|&(k, _)| k < key - self.slack);
        self.keys[start..]
            .iter()
            .take_while(|&&(k, _)| k <= key + self.slack)
            .map(|&(_, i)| i)
            .find(|&i| Self::near(&points[i], target))
    }

    fn first_duplicate(&self, points: &[Coords]) -> Option<(usize, usize)> {
        for (a, &(ka, i)) in self.keys.iter().enumerate() {
            for &(kb, j) in &self.keys[a + 1..] {
                if kb - ka > self.slack {
                    break;
                }
                if Self::near(&points[i], &points[j]) {
                    return Some((i.min(j), i.max(j)));
                }
            }
        }
        None
    }
}

fn check_dims(d: usize, n: usize) -> Result<()> {
    if d < 2 {
        return Err(Error::config(
            "d",
            format!("dimension must be at least 2, got {d}"),
        ));
    }
    if n == 0 {
        return Err(Error::config("n", "number of points must be positive"));
    }
    Ok(())
}

fn normalize(mut v: Vec<f64>) -> Vec<f64> {
    let norm = dense_dot(&v, &v).sqrt();
    v.iter_mut().for_each(|x| *x /= norm);
    v
}

fn gaussian_vector<R: Rng>(rng: &mut R, d: usize) -> Vec<f64> {
    (0..d)
        .map(|_| rng.sample::<f64, _>(StandardNormal))
        .collect()
}

/// `n` normalized Gaussian directions plus their negatives (`2n` points).
pub fn make_sphere_grid(d: usize, n: usize, seed: u64) -> Result<UnitPointSet> {
    check_dims(d, n)?;
    let base: Vec<Coords> = (0..n)
        .map(|k| {
            let mut rng = stream_rng(seed, k as u64);
            loop {
                let v = gaussian_vector(&mut rng, d);
                if dense_dot(&v, &v) > 1e-300 {
                    break Coords::Dense(normalize(v));
                }
            }
        })
        .collect();
    let half = UnitPointSet {
        dim: d,
        points: base,
        symmetric: false,
        label: "sphere".into(),
    };
    half.symmetrized()
}

/// `n` points of the cap `(e1 + d^{-1/2} B) ∩ S^{d-1}` and their negatives.
///
/// Each point is `e1 + tau g` (with `tau = d^{-1}` so the perturbation has
/// norm close to the cap radius) normalized, retried until it lands in the cap.
pub fn make_cap(d: usize, n: usize, seed: u64) -> Result<UnitPointSet> {
    check_dims(d, n)?;
    let radius = 1.0 / (d as f64).sqrt();
    let tau = radius / (d as f64).sqrt();
    let base: Vec<Coords> = (0..n)
        .map(|k| {
            let mut rng = stream_rng(seed, k as u64);
            loop {
                let mut v: Vec<f64> = gaussian_vector(&mut rng, d)
                    .into_iter()
                    .map(|g| tau * g)
                    .collect();
                v[0] += 1.0;
                let x = normalize(v);
                let dist2 = (x[0] - 1.0).powi(2) + x[1..].iter().map(|c| c * c).sum::<f64>();
                if dist2.sqrt() <= radius {
                    break Coords::Dense(x);
                }
            }
        })
        .collect();
    let half = UnitPointSet {
        dim: d,
        points: base,
        symmetric: false,
        label: "cap".into(),
    };
    half.symmetrized()
}

/// Largest admissible step for [`make_density_example`]: `1 / (2 log d)`.
pub fn density_example_max_delta(d: usize) -> f64 {
    1.0 / (2.0 * (d as f64).ln())
}

/// The `d - 1` points `sqrt(1 - delta^2) e_1 + delta e_k`, `k = 2..=d`.
/// Stored sparsely; the set is not symmetrized.
pub fn make_density_example(d: usize, delta: f64) -> Result<UnitPointSet> {
    if d < 2 {
        return Err(Error::config(
            "d",
            format!("dimension must be at least 2, got {d}"),
        ));
    }
    let max = density_example_max_delta(d);
    if !(delta > 0.0 && delta <= max * (1.0 + 1e-12)) {
        return Err(Error::config(
            "delta",
            format!("density example needs 0 < delta <= 1/(2 log d) = {max}, got {delta}"),
        ));
    }
    let head = (1.0 - delta * delta).sqrt();
    let points = (1..d)
        .map(|k| Coords::Sparse(vec![(0, head), (k, delta)]))
        .collect();
    UnitPointSet::new(d, points, false, "density")
}

/// Greedy maximal `delta/2`-separated subset, scanning points in index order.
pub fn make_separated_subset(a: &UnitPointSet, delta: f64) -> Result<UnitPointSet> {
    if a.is_empty() {
        return Err(Error::config("set", "cannot thin an empty point set"));
    }
    if !(delta > 0.0) {
        return Err(Error::config(
            "delta",
            format!("separation scale must be positive, got {delta}"),
        ));
    }
    let kept = separated_indices(a, delta / 2.0);
    let points = kept.iter().map(|&i| a.points[i].clone()).collect();
    Ok(UnitPointSet {
        dim: a.dim,
        points,
        symmetric: false,
        label: format!("{}-separated", a.label),
    })
}

/// Indices of the greedy `sep`-separated subset.
pub fn separated_indices(a: &UnitPointSet, sep: f64) -> Vec<usize> {
    let mut kept: Vec<usize> = Vec::new();
    for i in 0..a.len() {
        if kept.iter().all(|&j| a.distance(i, j) >= sep) {
            kept.push(i);
        }
    }
    kept
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_set(d: usize, n: usize, seed: u64) -> UnitPointSet {
        let points = (0..n)
            .map(|k| {
                let mut rng = stream_rng(seed, k as u64);
                Coords::Dense(normalize(gaussian_vector(&mut rng, d)))
            })
            .collect();
        UnitPointSet::new(d, points, false, "random").unwrap()
    }

    #[test]
    fn sphere_grid_examples() {
        let s = make_sphere_grid(2, 1, 9).unwrap();
        assert_eq!(s.len(), 2);
        assert!((s.dot(0, 1) + 1.0).abs() < 1e-15);

        let s = make_sphere_grid(50, 100, 3).unwrap();
        assert_eq!(s.len(), 200);
        assert!(s.symmetric);
        for p in &s.points {
            assert!((p.norm_sq().sqrt() - 1.0).abs() <= 1e-12);
        }
        assert_eq!(make_sphere_grid(50, 100, 3).unwrap(), s);
        assert_ne!(make_sphere_grid(50, 100, 4).unwrap(), s);
        assert!(matches!(
            make_sphere_grid(3, 0, 1),
            Err(Error::Config { .. })
        ));
    }

    #[test]
    fn cap_examples() {
        for d in [2, 4, 17] {
            let c = make_cap(d, 1, 5).unwrap();
            assert_eq!(c.len(), 2);
            let x = c.points[0].to_dense(d);
            let r = 1.0 / (d as f64).sqrt();
            let dist = ((x[0] - 1.0).powi(2) + x[1..].iter().map(|v| v * v).sum::<f64>()).sqrt();
            assert!(dist <= r);
        }
        let c = make_cap(4, 30, 1).unwrap();
        for p in &c.points {
            let x = p.to_dense(4);
            let near =
                |s: f64| ((x[0] - s).powi(2) + x[1..].iter().map(|v| v * v).sum::<f64>()).sqrt();
            assert!(near(1.0) <= 0.5 + 1e-15 || near(-1.0) <= 0.5 + 1e-15);
        }
        let c = make_cap(100, 200, 2).unwrap();
        let plus: Vec<usize> = (0..c.len())
            .filter(|&i| c.points[i].to_dense(100)[0] > 0.0)
            .collect();
        assert_eq!(plus.len(), 200);
        for &i in &plus {
            for &j in &plus {
                assert!(c.distance(i, j) <= 0.2 + 1e-12);
            }
        }
    }

    #[test]
    fn density_example_examples() {
        let a = make_density_example(3, 0.1).unwrap();
        assert_eq!(a.len(), 2);
        assert!(!a.symmetric);
        for p in &a.points {
            assert!((p.norm_sq() - 1.0).abs() < 1e-15);
        }
        assert!((a.distance(0, 1) - 0.1 * 2f64.sqrt()).abs() < 1e-12);

        let d = 10;
        let delta = density_example_max_delta(d);
        let a = make_density_example(d, delta).unwrap();
        assert_eq!(a.len(), 9);
        assert!(a.diameter() <= 2.0 * delta);
        assert!(make_density_example(10, delta * 1.01).is_err());
        assert!(make_density_example(10, 0.0).is_err());
        assert!(make_density_example(1, 0.1).is_err());
    }

    #[test]
    fn separated_subset_examples() {
        let a = random_set(5, 10, 1);
        let one = make_separated_subset(&a, 10.0).unwrap();
        assert_eq!(one.len(), 1);

        let pair = UnitPointSet::from_dense(
            3,
            vec![vec![1.0, 0.0, 0.0], vec![-1.0, 0.0, 0.0]],
            true,
            "pair",
        )
        .unwrap();
        assert_eq!(make_separated_subset(&pair, 1.0).unwrap().len(), 2);

        let a = random_set(4, 100, 7);
        let s = make_separated_subset(&a, 0.3).unwrap();
        for i in 0..s.len() {
            for j in i + 1..s.len() {
                assert!(s.distance(i, j) >= 0.15);
            }
        }
        for i in 0..a.len() {
            let covered = s.points.iter().any(|p| {
                let d2 = 2.0 - 2.0 * a.points[i].dot(p);
                d2.max(0.0).sqrt() < 0.15 + 1e-12
            });
            assert!(covered);
        }
        let empty = UnitPointSet {
            dim: 3,
            points: vec![],
            symmetric: false,
            label: "empty".into(),
        };
        assert!(make_separated_subset(&empty, 0.5).is_err());
    }

    #[test]
    fn validation_rejects_broken_sets() {
        assert!(UnitPointSet::from_dense(2, vec![vec![1.0, 1.0]], false, "x").is_err());
        assert!(
            UnitPointSet::from_dense(2, vec![vec![1.0, 0.0], vec![1.0, 0.0]], false, "x").is_err()
        );
        assert!(
            UnitPointSet::from_dense(2, vec![vec![1.0, 0.0], vec![0.0, 1.0]], true, "x").is_err()
        );
        assert!(UnitPointSet::from_dense(2, vec![vec![1.0, 0.0, 0.0]], false, "x").is_err());
        assert!(
            UnitPointSet::from_dense(2, vec![vec![1.0, 0.0], vec![-1.0, 0.0]], true, "x").is_ok()
        );
    }

    #[test]
    fn sparse_and_dense_inner_products_agree() {
        let s = make_density_example(6, 0.2).unwrap();
        for i in 0..s.len() {
            for j in 0..s.len() {
                let a = Coords::Dense(s.points[i].to_dense(6));
                let b = Coords::Dense(s.points[j].to_dense(6));
                assert!((s.dot(i, j) - a.dot(&b)).abs() < 1e-15);
                assert!((s.points[i].dot(&b) - a.dot(&b)).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn csv_round_trip() {
        let s = make_cap(5, 7, 11).unwrap();
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with(POINT_SET_SCHEMA));
        let back = UnitPointSet::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back, s);

        let bad = "dim,n,symmetric,label\n2,1,false,x\n1.0,1.0\n";
        assert!(UnitPointSet::read_csv(bad.as_bytes()).is_err());
        let short = "dim,n,symmetric,label\n2,2,false,x\n1.0,0.0\n";
        assert!(UnitPointSet::read_csv(short.as_bytes()).is_err());
    }
}
