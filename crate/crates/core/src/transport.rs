//! Quadratic transport distance between an empirical marginal and the
//! standard Gaussian, and the root-mean-square gap between sorted projections
//! and the quantile grid.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use rayon::prelude::*;
use serde::Serialize;

use crate::empirical_process::{project_point, SampleMatrix};
use crate::error::{Error, Result};
use crate::gaussian::{cdf, cell_edges, density, quantile, QuantileGrid};
use crate::point_sets::UnitPointSet;
use crate::quadrature::gl16;

pub const CELL_SCHEMA: &str = "# schema: transport-cells/v1";

/// Sample-independent part of the transport cost for samples of size `m`.
///
/// On cell `i` the quantile function is compared with the constant `v_i`:
/// `int_cell (v_i - F^{-1}(u))^2 du = (v_i - eta_i)^2 / m + within[i]`,
/// where `eta_i` is the cell mean of `F^{-1}` and `within[i]` its spread.
#[derive(Debug, Clone, PartialEq)]
pub struct W2Reference {
    pub m: usize,
    pub lambdas: Vec<f64>,
    pub etas: Vec<f64>,
    pub within: Vec<f64>,
}

impl W2Reference {
    pub fn new(m: usize) -> Result<Self> {
        if m == 0 {
            return Err(Error::config("m", "transport needs m >= 1"));
        }
        if m == 1 {
            return Ok(W2Reference {
                m,
                lambdas: vec![0.0],
                etas: vec![0.0],
                within: vec![1.0],
            });
        }
        let grid = QuantileGrid::new(m)?;
        let edges = cell_edges(m);
        let mf = m as f64;
        let within = (0..m)
            .into_par_iter()
            .map(|i| {
                let eta = grid.etas[i];
                if i == 0 {
                    let b = edges[1];
                    let fb = density(b);
                    cdf(b) - b * fb + 2.0 * eta * fb + eta * eta * cdf(b)
                } else if i == m - 1 {
                    let a = edges[m - 1];
                    let fa = density(a);
                    cdf(-a) + a * fa - 2.0 * eta * fa + eta * eta * cdf(-a)
                } else {
                    let (lo, hi) = (i as f64 / mf, (i + 1) as f64 / mf);
                    gl16().integrate(lo, hi, |u| (quantile(u) - eta).powi(2))
                }
                .max(0.0)
            })
            .collect();
        Ok(W2Reference {
            m,
            lambdas: grid.lambdas,
            etas: grid.etas,
            within,
        })
    }

    /// Shared reference for `m`, built once per process.
    pub fn cached(m: usize) -> Arc<W2Reference> {
        static CACHE: OnceLock<Mutex<HashMap<usize, Arc<W2Reference>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(Default::default);
        if let Some(r) = cache.lock().unwrap().get(&m) {
            return Arc::clone(r);
        }
        let built = Arc::new(W2Reference::new(m.max(1)).expect("m >= 1"));
        Arc::clone(cache.lock().unwrap().entry(m).or_insert(built))
    }

    pub fn cell_contributions(&self, sorted: &[f64]) -> Vec<f64> {
        let mf = self.m as f64;
        sorted
            .iter()
            .zip(&self.etas)
            .zip(&self.within)
            .map(|((v, e), w)| (v - e) * (v - e) / mf + w)
            .collect()
    }

    /// `(W_2, coordinate statistic)` of a sorted sample of size `m`.
    pub fn w2_and_coordinate(&self, sorted: &[f64]) -> (f64, f64) {
        let mf = self.m as f64;
        let w2sq: f64 = self.cell_contributions(sorted).iter().sum();
        let coord: f64 = sorted
            .iter()
            .zip(&self.lambdas)
            .map(|(v, l)| (v - l) * (v - l))
            .sum();
        (w2sq.sqrt(), (coord / mf).sqrt())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TransportReport {
    pub w2: f64,
    pub coordinate_stat: f64,
    pub per_cell_contributions: Vec<f64>,
}

impl TransportReport {
    /// `i,cell_contribution` rows with 1-based cells.
    pub fn cells_csv(&self) -> String {
        let mut out = format!("{CELL_SCHEMA}\ni,cell_contribution\n");
        for (i, c) in self.per_cell_contributions.iter().enumerate() {
            out.push_str(&format!("{},{}\n", i + 1, c));
        }
        out
    }
}

/// `W_2(F_m, F)` with per-cell contributions, for a sorted sample.
pub fn w2_empirical_gaussian(
    p: &crate::empirical_process::ProjectionSample,
) -> Result<TransportReport> {
    if p.values.is_empty() {
        return Err(Error::config("m", "transport needs m >= 1"));
    }
    let reference = W2Reference::cached(p.m());
    let per_cell_contributions = reference.cell_contributions(&p.values);
    let (w2, coordinate_stat) = reference.w2_and_coordinate(&p.values);
    Ok(TransportReport {
        w2,
        coordinate_stat,
        per_cell_contributions,
    })
}

/// `((1/m) sum_i (v_i - lambda_i)^2)^{1/2}`.
pub fn coordinate_statistic(
    p: &crate::empirical_process::ProjectionSample,
    q: &QuantileGrid,
) -> Result<f64> {
    if p.m() != q.m {
        return Err(Error::domain(format!(
            "sample has {} values, grid has {}",
            p.m(),
            q.m
        )));
    }
    let s: f64 = p
        .values
        .iter()
        .zip(&q.lambdas)
        .map(|(v, l)| (v - l) * (v - l))
        .sum();
    Ok((s / q.m as f64).sqrt())
}

/// `max_{x in A} W_2(F_{m,x}, F)`.
pub fn w2_sup_over_set(g: &SampleMatrix, a: &UnitPointSet) -> Result<f64> {
    Ok(w2_and_coordinate_sup(g, a)?.0)
}

/// Set-level maxima of `W_2` and of the coordinate statistic.
pub fn w2_and_coordinate_sup(g: &SampleMatrix, a: &UnitPointSet) -> Result<(f64, f64)> {
    if a.dim != g.d {
        return Err(Error::domain(format!(
            "point set has dimension {}, sample has {}",
            a.dim, g.d
        )));
    }
    if a.is_empty() {
        return Err(Error::config("set", "point set is empty"));
    }
    let reference = W2Reference::cached(g.m);
    let per: Vec<(f64, f64)> = (0..a.len())
        .into_par_iter()
        .map(|j| reference.w2_and_coordinate(&project_point(g, a, j).values))
        .collect();
    Ok(per.iter().fold((0.0f64, 0.0f64), |acc, &(w, c)| {
        (acc.0.max(w), acc.1.max(c))
    }))
}
