//! Seeded Monte Carlo drivers. Every experiment is a pure function of its
//! configuration; trial `k` uses the seed `derive_seed(base_seed, k)`.

use std::fmt::Write as _;
use std::path::Path;

use rand::{Rng, RngCore};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::complexity::{covering_number, gamma_upper};
use crate::empirical_process::{
    draw_sample, project_point, uniform_envelope_check, DeviationReport,
};
use crate::error::{Error, Result};
use crate::gaussian::{cdf, sigma2_unchecked};
use crate::point_sets::{
    density_example_max_delta, make_cap, make_density_example, make_separated_subset,
    make_sphere_grid, UnitPointSet,
};
use crate::rng::{derive_seed, stream_rng};
use crate::transport::w2_and_coordinate_sup;

/// Largest probability step accepted by experiment configs.
pub const MAX_EXPERIMENT_DELTA: f64 = 0.1;

pub const OUTCOME_SCHEMA: &str = "# schema: outcomes/v1";
pub const VIOLATION_SCHEMA: &str = "# schema: violation-rate/v1";
pub const SCALING_SCHEMA: &str = "# schema: scaling/v1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum ExperimentKind {
    DkwEnvelope,
    Sudakov,
    Counterexample,
    MatrixStructure,
    SingleTLower,
    WassersteinScaling,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::DkwEnvelope => "dkw_envelope",
            ExperimentKind::Sudakov => "sudakov",
            ExperimentKind::Counterexample => "counterexample",
            ExperimentKind::MatrixStructure => "matrix_structure",
            ExperimentKind::SingleTLower => "single_t_lower",
            ExperimentKind::WassersteinScaling => "wasserstein_scaling",
        }
    }
}

/// Flat experiment configuration. Unknown keys are rejected.
///
/// `delta` is the probability step for the envelope, matrix and single-`t`
/// experiments, the covering scale for `sudakov`, and the offset of the
/// construction for `counterexample`. When absent it takes an
/// experiment-specific default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub m: usize,
    pub d: usize,
    pub delta: Option<f64>,
    pub c_env: f64,
    pub trials: usize,
    pub base_seed: u64,
    pub set_spec: String,
    pub output_path: String,
    pub t: f64,
    pub kappa: f64,
    pub m_sweep: Vec<usize>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            experiment: ExperimentKind::DkwEnvelope,
            m: 1000,
            d: 16,
            delta: None,
            c_env: 1.0,
            trials: 100,
            base_seed: 0,
            set_spec: "single".into(),
            output_path: "out".into(),
            t: 0.0,
            kappa: 1.0,
            m_sweep: Vec::new(),
        }
    }
}

fn config_keys() -> Vec<String> {
    match serde_json::to_value(ExperimentConfig::default()) {
        Ok(Value::Object(map)) => map.keys().cloned().collect(),
        _ => Vec::new(),
    }
}

/// Parses a `key=value` override. Values are read as JSON when possible and
/// as strings otherwise.
pub fn parse_override(text: &str) -> Result<(String, Value)> {
    let (key, raw) = text
        .split_once('=')
        .ok_or_else(|| Error::config(text, "override must have the form key=value"))?;
    let key = key.trim().to_string();
    let value =
        serde_json::from_str(raw.trim()).unwrap_or_else(|_| Value::String(raw.trim().to_string()));
    Ok((key, value))
}

impl ExperimentConfig {
    /// Reads a flat JSON object, applies overrides in order, and checks keys.
    pub fn from_json_with_overrides(
        text: Option<&str>,
        overrides: &[(String, Value)],
    ) -> Result<Self> {
        let mut map = match text {
            Some(t) => match serde_json::from_str::<Value>(t)
                .map_err(|e| Error::Parse(format!("config: {e}")))?
            {
                Value::Object(map) => map,
                _ => return Err(Error::Parse("config must be a flat JSON object".into())),
            },
            None => Map::new(),
        };
        let keys = config_keys();
        for (k, v) in overrides {
            map.insert(k.clone(), v.clone());
        }
        for k in map.keys() {
            if !keys.contains(k) {
                return Err(Error::config(k.clone(), "unknown configuration key"));
            }
        }
        let mut cfg = ExperimentConfig::default();
        for (k, v) in map {
            let mut one = Map::new();
            one.insert(k.clone(), v);
            let parsed: ExperimentConfig = serde_json::from_value(Value::Object(one))
                .map_err(|e| Error::config(k.clone(), e.to_string()))?;
            cfg.assign(&k, parsed);
        }
        Ok(cfg)
    }

    fn assign(&mut self, key: &str, from: ExperimentConfig) {
        match key {
            "experiment" => self.experiment = from.experiment,
            "m" => self.m = from.m,
            "d" => self.d = from.d,
            "delta" => self.delta = from.delta,
            "c_env" => self.c_env = from.c_env,
            "trials" => self.trials = from.trials,
            "base_seed" => self.base_seed = from.base_seed,
            "set_spec" => self.set_spec = from.set_spec,
            "output_path" => self.output_path = from.output_path,
            "t" => self.t = from.t,
            "kappa" => self.kappa = from.kappa,
            "m_sweep" => self.m_sweep = from.m_sweep,
            _ => unreachable!("key {key} validated against the config fields"),
        }
    }

    pub fn to_json(&self) -> Value {
        serde_json::to_value(self).expect("config serializes")
    }

    fn trial_seed(&self, trial: usize) -> u64 {
        derive_seed(self.base_seed, trial as u64)
    }

    fn check_common(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::config("trials", "trials must be at least 1"));
        }
        if self.m == 0 {
            return Err(Error::config("m", "m must be at least 1"));
        }
        if self.d == 0 {
            return Err(Error::config("d", "d must be at least 1"));
        }
        Ok(())
    }

    fn probability_delta(&self) -> Result<f64> {
        let delta = self
            .delta
            .ok_or_else(|| Error::config("delta", "this experiment needs delta"))?;
        check_experiment_delta(delta)?;
        Ok(delta)
    }

    fn sweep(&self) -> Vec<usize> {
        if self.m_sweep.is_empty() {
            (8..=14).map(|k| 1usize << k).collect()
        } else {
            self.m_sweep.clone()
        }
    }
}

pub fn check_experiment_delta(delta: f64) -> Result<()> {
    if delta > 0.0 && delta <= MAX_EXPERIMENT_DELTA {
        Ok(())
    } else {
        Err(Error::config(
            "delta",
            format!("delta must lie in (0, {MAX_EXPERIMENT_DELTA}], got {delta}"),
        ))
    }
}

/// Resolves a point-set descriptor in dimension `d`:
/// `single`, `antipodal`, `sphere:n=..,seed=..`, `cap:n=..,seed=..`,
/// `density[:delta=..]`, or `csv:<path>`.
pub fn resolve_set(spec: &str, d: usize) -> Result<UnitPointSet> {
    let bad = |msg: String| Error::config("set_spec", msg);
    let (kind, rest) = spec.split_once(':').unwrap_or((spec, ""));
    if kind == "csv" {
        let file =
            std::fs::File::open(rest).map_err(|e| bad(format!("cannot open {rest}: {e}")))?;
        let set = UnitPointSet::read_csv(std::io::BufReader::new(file))?;
        if set.dim != d {
            return Err(bad(format!(
                "{rest} has dimension {}, config has d = {d}",
                set.dim
            )));
        }
        return Ok(set);
    }
    let mut params = std::collections::BTreeMap::new();
    for item in rest.split(',').filter(|s| !s.is_empty()) {
        let (k, v) = item
            .split_once('=')
            .ok_or_else(|| bad(format!("malformed parameter {item:?}")))?;
        params.insert(k.trim(), v.trim());
    }
    let allowed: &[&str] = match kind {
        "single" | "antipodal" => &[],
        "sphere" | "cap" => &["n", "seed"],
        "density" => &["delta"],
        _ => return Err(bad(format!("unknown set kind {kind:?}"))),
    };
    for k in params.keys() {
        if !allowed.contains(k) {
            return Err(bad(format!("unknown parameter {k:?} for {kind}")));
        }
    }
    let int = |k: &str, default: u64| -> Result<u64> {
        params.get(k).map_or(Ok(default), |v| {
            v.parse()
                .map_err(|_| bad(format!("{k} must be an integer")))
        })
    };
    let e1 = |sign: f64| {
        let mut v = vec![0.0; d];
        v[0] = sign;
        v
    };
    match kind {
        "single" => UnitPointSet::from_dense(d, vec![e1(1.0)], false, "single"),
        "antipodal" => UnitPointSet::from_dense(d, vec![e1(1.0), e1(-1.0)], true, "antipodal"),
        "sphere" => make_sphere_grid(d, int("n", 100)? as usize, int("seed", 0)?),
        "cap" => make_cap(d, int("n", 100)? as usize, int("seed", 0)?),
        _ => {
            let delta = match params.get("delta") {
                Some(v) => v
                    .parse()
                    .map_err(|_| bad("delta must be a number".into()))?,
                None => density_example_max_delta(d),
            };
            make_density_example(d, delta)
        }
    }
}

/// Set-level maxima recorded per trial.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SupSummary {
    pub ks_sup: f64,
    pub ss_sup: f64,
    pub envelope_ratio: f64,
    pub w2: f64,
    pub coord_stat: f64,
}

impl From<&DeviationReport> for SupSummary {
    fn from(r: &DeviationReport) -> Self {
        SupSummary {
            ks_sup: r.ks_sup,
            ss_sup: r.scale_sensitive_sup,
            envelope_ratio: r.envelope_ratio,
            w2: r.w2,
            coord_stat: r.coordinate_stat,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialOutcome {
    pub trial_index: usize,
    pub seed: u64,
    pub violated: bool,
    pub sup_statistics: Option<SupSummary>,
    pub auxiliary: Vec<(String, f64)>,
}

/// CSV of trial outcomes; auxiliary columns are taken from the first row.
pub fn outcomes_csv(kind: ExperimentKind, outcomes: &[TrialOutcome]) -> String {
    let mut out = format!(
        "{OUTCOME_SCHEMA} experiment={}\ntrial,seed,violated",
        kind.name()
    );
    let with_sup = outcomes.first().is_some_and(|o| o.sup_statistics.is_some());
    if with_sup {
        out.push_str(",ks_sup,ss_sup,envelope_ratio,w2,coord_stat");
    }
    if let Some(first) = outcomes.first() {
        for (name, _) in &first.auxiliary {
            out.push(',');
            out.push_str(name);
        }
    }
    out.push('\n');
    for o in outcomes {
        let _ = write!(out, "{},{},{}", o.trial_index, o.seed, o.violated as u8);
        if let Some(s) = &o.sup_statistics {
            let _ = write!(
                out,
                ",{},{},{},{},{}",
                s.ks_sup, s.ss_sup, s.envelope_ratio, s.w2, s.coord_stat
            );
        }
        for (_, v) in &o.auxiliary {
            let _ = write!(out, ",{v}");
        }
        out.push('\n');
    }
    out
}

/// Files and summary produced by one experiment run.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutput {
    pub summary: Value,
    pub files: Vec<(String, String)>,
}

impl ExperimentOutput {
    pub fn write_to(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        for (name, body) in &self.files {
            std::fs::write(dir.join(name), body)?;
        }
        let text = serde_json::to_string_pretty(&self.summary)?;
        std::fs::write(dir.join("summary.json"), text + "\n")?;
        Ok(())
    }
}

fn std_error(p: f64, n: usize) -> f64 {
    (p * (1.0 - p) / n as f64).sqrt()
}

/// `log C(m, k)`.
fn ln_choose(m: u64, k: u64) -> f64 {
    libm::lgamma(m as f64 + 1.0) - libm::lgamma(k as f64 + 1.0) - libm::lgamma((m - k) as f64 + 1.0)
}

/// Probabilities of `Bin(m, p)` for `k = 0..=m`.
pub fn binomial_pmf(m: u64, p: f64) -> Vec<f64> {
    (0..=m)
        .map(|k| {
            if p <= 0.0 {
                return if k == 0 { 1.0 } else { 0.0 };
            }
            if p >= 1.0 {
                return if k == m { 1.0 } else { 0.0 };
            }
            (ln_choose(m, k) + k as f64 * p.ln() + (m - k) as f64 * (-p).ln_1p()).exp()
        })
        .collect()
}

/// `E |Bin(m, 1/2)/m - 1/2|`.
pub fn binomial_mean_abs_deviation(m: u64) -> f64 {
    binomial_pmf(m, 0.5)
        .iter()
        .enumerate()
        .map(|(k, p)| p * (k as f64 / m as f64 - 0.5).abs())
        .sum()
}

/// Least-squares line through `(log x, log y)`: `(slope, intercept, rms residual)`.
pub fn fit_scaling(xs: &[f64], ys: &[f64]) -> Result<(f64, f64, f64)> {
    if xs.len() != ys.len() || xs.len() < 3 {
        return Err(Error::domain("scaling fit needs at least 3 paired points"));
    }
    if xs.iter().chain(ys).any(|v| !(*v > 0.0) || !v.is_finite()) {
        return Err(Error::domain("scaling fit needs positive finite values"));
    }
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return Err(Error::domain("scaling fit needs distinct x values"));
    }
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = lx
        .iter()
        .zip(&ly)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    Ok((slope, intercept, (rss / n).sqrt()))
}

/// `gamma / m * log^3(e m / gamma)`.
pub fn nominal_delta(gamma1: f64, m: usize) -> f64 {
    let g = gamma1.max(1.0);
    let m = m as f64;
    g / m * (std::f64::consts::E * m / g).ln().powi(3)
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_unstable_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// 2.5% and 97.5% bootstrap quantiles of the median.
fn bootstrap_median_band(values: &[f64], seed: u64) -> (f64, f64) {
    let mut rng = stream_rng(seed, 0);
    let mut medians: Vec<f64> = (0..400)
        .map(|_| {
            let mut resample: Vec<f64> = (0..values.len())
                .map(|_| values[rng.random_range(0..values.len())])
                .collect();
            median(&mut resample)
        })
        .collect();
    medians.sort_unstable_by(f64::total_cmp);
    (medians[10], medians[389])
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DkwResult {
    pub violation_rate: f64,
    pub delta: f64,
    pub gamma1_upper: Option<f64>,
    pub outcomes: Vec<TrialOutcome>,
}

/// Multiples of `c_env` tabulated in the violation-rate table.
const C_ENV_MULTIPLES: [f64; 9] = [0.25, 0.5, 0.75, 1.0, 1.25, 1.5, 2.0, 3.0, 5.0];

pub fn run_dkw_envelope(cfg: &ExperimentConfig) -> Result<DkwResult> {
    cfg.check_common()?;
    let set = resolve_set(&cfg.set_spec, cfg.d)?;
    let (delta, gamma1_upper) = match cfg.delta {
        Some(_) => (cfg.probability_delta()?, None),
        None => {
            let g = gamma_upper(&set, 1.0)?;
            let delta = nominal_delta(g, cfg.m);
            check_experiment_delta(delta).map_err(|_| {
                Error::config(
                    "delta",
                    format!("default delta {delta} is out of range; set delta"),
                )
            })?;
            (delta, Some(g))
        }
    };
    if !(cfg.c_env >= 0.0) {
        return Err(Error::config("c_env", "c_env must be nonnegative"));
    }
    let outcomes = (0..cfg.trials)
        .into_par_iter()
        .map(|k| {
            let seed = cfg.trial_seed(k);
            let g = draw_sample(cfg.m, cfg.d, seed)?;
            let (violated, report) = uniform_envelope_check(&g, &set, delta, cfg.c_env)?;
            Ok(TrialOutcome {
                trial_index: k,
                seed,
                violated,
                sup_statistics: Some(SupSummary::from(&report)),
                auxiliary: vec![
                    ("worst_direction".into(), report.worst_direction as f64),
                    ("worst_t".into(), report.worst_t),
                ],
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let violated = outcomes.iter().filter(|o| o.violated).count();
    Ok(DkwResult {
        violation_rate: violated as f64 / cfg.trials as f64,
        delta,
        gamma1_upper,
        outcomes,
    })
}

/// Violation rate at `c` from recorded envelope ratios.
pub fn violation_rate_at(outcomes: &[TrialOutcome], c: f64) -> f64 {
    let hits = outcomes
        .iter()
        .filter(|o| o.sup_statistics.is_some_and(|s| s.envelope_ratio > c))
        .count();
    hits as f64 / outcomes.len() as f64
}

fn dkw_output(cfg: &ExperimentConfig, r: &DkwResult) -> ExperimentOutput {
    let dm = r.delta * cfg.m as f64;
    let mut table = format!("{VIOLATION_SCHEMA}\nc_env,delta,m,delta_m,violation_rate,trials\n");
    let mut constants = Vec::new();
    for mult in C_ENV_MULTIPLES {
        let c = mult * cfg.c_env;
        let rate = violation_rate_at(&r.outcomes, c);
        let _ = writeln!(
            table,
            "{c},{},{},{dm},{rate},{}",
            r.delta, cfg.m, cfg.trials
        );
        if rate > 0.0 {
            constants.push(json!({"c_env": c, "log_failure_over_delta_m": -rate.ln() / dm}));
        }
    }
    let summary = json!({
        "experiment": cfg.experiment.name(),
        "violation_rate": r.violation_rate,
        "standard_error": std_error(r.violation_rate, cfg.trials),
        "delta": r.delta,
        "delta_m": dm,
        "gamma1_upper": r.gamma1_upper,
        "hypothesis_m_at_least_gamma1": r.gamma1_upper.map(|g| cfg.m as f64 >= g),
        "empirical_constants": constants,
    });
    ExperimentOutput {
        summary,
        files: vec![
            (
                "outcomes.csv".into(),
                outcomes_csv(cfg.experiment, &r.outcomes),
            ),
            ("violation_rate.csv".into(), table),
        ],
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SudakovResult {
    pub estimate: f64,
    pub lower_bound: f64,
    pub ratio: f64,
    pub separated_size: usize,
    pub covering_number: usize,
    pub hypothesis_holds: bool,
    /// `E|Bin(m,1/2)/m - 1/2|`, the baseline used when the subset is a point.
    pub single_direction_baseline: f64,
    pub outcomes: Vec<TrialOutcome>,
}

pub fn run_sudakov(cfg: &ExperimentConfig) -> Result<SudakovResult> {
    cfg.check_common()?;
    let delta = cfg
        .delta
        .ok_or_else(|| Error::config("delta", "sudakov needs the covering scale delta"))?;
    if !(delta > 0.0) {
        return Err(Error::config(
            "delta",
            format!("covering scale must be positive, got {delta}"),
        ));
    }
    let set = resolve_set(&cfg.set_spec, cfg.d)?;
    let sub = make_separated_subset(&set, delta)?;
    let n_hat = sub.len();
    let cover = covering_number(&set, delta)?;
    let mf = cfg.m as f64;
    let outcomes = (0..cfg.trials)
        .into_par_iter()
        .map(|k| {
            let seed = cfg.trial_seed(k);
            let g = draw_sample(cfg.m, cfg.d, seed)?;
            let sup = (0..sub.len())
                .map(|j| {
                    let below = g
                        .project(&sub.points[j])
                        .iter()
                        .filter(|&&v| v <= 0.0)
                        .count();
                    (below as f64 / mf - 0.5).abs()
                })
                .fold(0.0, f64::max);
            Ok(TrialOutcome {
                trial_index: k,
                seed,
                violated: false,
                sup_statistics: None,
                auxiliary: vec![("sup_deviation_at_zero".into(), sup)],
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let estimate = outcomes.iter().map(|o| o.auxiliary[0].1).sum::<f64>() / cfg.trials as f64;
    let baseline = binomial_mean_abs_deviation(cfg.m as u64);
    let lower_bound = (delta * (n_hat as f64).ln() / mf).sqrt();
    let ratio = if n_hat > 1 {
        estimate / lower_bound
    } else {
        log::warn!("separated subset is a single point; ratio is taken against the single-direction baseline");
        estimate / baseline
    };
    let hypothesis = mf >= (1.0 / (delta * delta)).max((n_hat as f64).ln() / delta);
    Ok(SudakovResult {
        estimate,
        lower_bound,
        ratio,
        separated_size: n_hat,
        covering_number: cover,
        hypothesis_holds: hypothesis,
        single_direction_baseline: baseline,
        outcomes,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CounterexampleResult {
    pub violation_probability: f64,
    pub standard_error: f64,
    pub analytic_probability: f64,
    /// Fraction of trials with `sup_x sup_t |F_m - F| >= 1/10` over all `t`.
    pub raw_sup_rate: f64,
    pub subset_size: usize,
    pub delta: f64,
    pub outcomes: Vec<TrialOutcome>,
}

/// Columns of Rademacher signs packed as bits (1 = -1), `m` rows per column.
fn rademacher_column<R: RngCore>(rng: &mut R, words: usize, last_mask: u64) -> Vec<u64> {
    let mut col: Vec<u64> = (0..words).map(|_| rng.next_u64()).collect();
    if let Some(w) = col.last_mut() {
        *w &= last_mask;
    }
    col
}

fn popcount(words: &[u64]) -> u32 {
    words.iter().map(|w| w.count_ones()).sum()
}

/// `sup_t |F_m - F|` for the direction `h e_1 + delta e_k` given sign columns.
fn two_coordinate_ks(
    first: &[u64],
    other: &[u64],
    full: &[u64],
    m: usize,
    h: f64,
    delta: f64,
) -> f64 {
    let mm = first
        .iter()
        .zip(other)
        .map(|(a, b)| (a & b).count_ones())
        .sum::<u32>();
    let mp = first
        .iter()
        .zip(other)
        .map(|(a, b)| (a & !b).count_ones())
        .sum::<u32>();
    let pm = first
        .iter()
        .zip(other)
        .zip(full)
        .map(|((a, b), f)| (!a & b & f).count_ones())
        .sum::<u32>();
    let pp = m as u32 - mm - mp - pm;
    let mut atoms = [
        (-h - delta, mm),
        (-h + delta, mp),
        (h - delta, pm),
        (h + delta, pp),
    ];
    atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
    let (mut cum_emp, mut cum_true, mut sup) = (0u32, 0.0, 0.0f64);
    for (i, &(value, count)) in atoms.iter().enumerate() {
        cum_emp += count;
        cum_true += 0.25;
        if i + 1 < atoms.len() && atoms[i + 1].0 == value {
            continue;
        }
        sup = sup.max((cum_emp as f64 / m as f64 - cum_true).abs());
    }
    sup
}

pub fn run_counterexample(cfg: &ExperimentConfig) -> Result<CounterexampleResult> {
    cfg.check_common()?;
    if cfg.d < 2 {
        return Err(Error::config("d", "counterexample needs d >= 2"));
    }
    let max = density_example_max_delta(cfg.d);
    let delta = cfg.delta.unwrap_or(max);
    if !(delta > 0.0 && delta <= max * (1.0 + 1e-12)) {
        return Err(Error::config(
            "delta",
            format!("counterexample needs 0 < delta <= 1/(2 log d) = {max}"),
        ));
    }
    let m = cfg.m;
    let subset = (4 * m).div_ceil(10);
    let words = m.div_ceil(64);
    let last_mask = if m % 64 == 0 {
        u64::MAX
    } else {
        (1u64 << (m % 64)) - 1
    };
    let mut full = vec![u64::MAX; words];
    full[words - 1] = last_mask;
    let h = (1.0 - delta * delta).sqrt();
    let outcomes: Vec<TrialOutcome> = (0..cfg.trials)
        .into_par_iter()
        .map(|k| {
            let seed = cfg.trial_seed(k);
            let mut rng = stream_rng(seed, 0);
            let first = rademacher_column(&mut rng, words, last_mask);
            // I: the |I| smallest first coordinates, ties broken by row index,
            // i.e. the first |I| rows with a -1 and then rows with a +1.
            let minus = popcount(&first) as usize;
            let omega1 = minus >= subset && subset > 0;
            let mut mask = vec![0u64; words];
            if omega1 {
                let mut taken = 0;
                'rows: for (w, word) in first.iter().enumerate() {
                    for b in 0..64 {
                        if word >> b & 1 == 1 {
                            mask[w] |= 1 << b;
                            taken += 1;
                            if taken == subset {
                                break 'rows;
                            }
                        }
                    }
                }
            }
            let mut omega2 = false;
            let mut raw_sup = 0.0f64;
            for _ in 1..cfg.d {
                let col = rademacher_column(&mut rng, words, last_mask);
                if omega1 && !omega2 {
                    omega2 = col.iter().zip(&mask).all(|(c, s)| c & s == *s);
                }
                raw_sup = raw_sup.max(two_coordinate_ks(&first, &col, &full, m, h, delta));
            }
            TrialOutcome {
                trial_index: k,
                seed,
                violated: omega1 && omega2,
                sup_statistics: None,
                auxiliary: vec![
                    ("omega1".into(), omega1 as u8 as f64),
                    ("omega2".into(), omega2 as u8 as f64),
                    ("raw_sup".into(), raw_sup),
                ],
            }
        })
        .collect();
    let n = cfg.trials;
    let rate = outcomes.iter().filter(|o| o.violated).count() as f64 / n as f64;
    let raw = outcomes.iter().filter(|o| o.auxiliary[2].1 >= 0.1).count() as f64 / n as f64;
    let tail: f64 = binomial_pmf(m as u64, 0.5)[subset..].iter().sum();
    let coupon = 1.0 - (1.0 - 0.5f64.powi(subset as i32)).powf((cfg.d - 1) as f64);
    Ok(CounterexampleResult {
        violation_probability: rate,
        standard_error: std_error(rate, n),
        analytic_probability: tail * coupon,
        raw_sup_rate: raw,
        subset_size: subset,
        delta,
        outcomes,
    })
}

/// One row of a scaling sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingRow {
    pub m: usize,
    pub delta_nominal: f64,
    pub rate_reference: f64,
    pub median_coord_stat: f64,
    pub median_w2: f64,
    pub coord_band: (f64, f64),
    pub w2_band: (f64, f64),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingResult {
    pub gamma1_upper: f64,
    pub rows: Vec<ScalingRow>,
    pub coord_fit: Option<(f64, f64, f64)>,
    pub w2_fit: Option<(f64, f64, f64)>,
    pub outcomes: Vec<TrialOutcome>,
}

fn run_scaling(cfg: &ExperimentConfig) -> Result<ScalingResult> {
    if cfg.trials == 0 {
        return Err(Error::config("trials", "trials must be at least 1"));
    }
    let sweep = cfg.sweep();
    if sweep.iter().any(|&m| m < 2) {
        return Err(Error::config(
            "m_sweep",
            "every m in the sweep must be at least 2",
        ));
    }
    let set = resolve_set(&cfg.set_spec, cfg.d)?;
    let gamma1 = gamma_upper(&set, 1.0)?;
    let mut rows = Vec::new();
    let mut outcomes = Vec::new();
    for &m in &sweep {
        let m_seed = derive_seed(cfg.base_seed, m as u64);
        let per: Vec<(u64, f64, f64)> = (0..cfg.trials)
            .into_par_iter()
            .map(|k| {
                let seed = derive_seed(m_seed, k as u64);
                let g = draw_sample(m, cfg.d, seed)?;
                let (w2, coord) = w2_and_coordinate_sup(&g, &set)?;
                Ok((seed, w2, coord))
            })
            .collect::<Result<_>>()?;
        for (k, &(seed, w2, coord)) in per.iter().enumerate() {
            outcomes.push(TrialOutcome {
                trial_index: k,
                seed,
                violated: false,
                sup_statistics: None,
                auxiliary: vec![
                    ("m".into(), m as f64),
                    ("w2_sup".into(), w2),
                    ("coord_sup".into(), coord),
                ],
            });
        }
        let w2s: Vec<f64> = per.iter().map(|p| p.1).collect();
        let coords: Vec<f64> = per.iter().map(|p| p.2).collect();
        let delta_nominal = nominal_delta(gamma1, m);
        rows.push(ScalingRow {
            m,
            delta_nominal,
            rate_reference: if delta_nominal < 1.0 {
                (delta_nominal * (1.0 / delta_nominal).ln()).sqrt()
            } else {
                f64::NAN
            },
            median_coord_stat: median(&mut coords.clone()),
            median_w2: median(&mut w2s.clone()),
            coord_band: bootstrap_median_band(&coords, derive_seed(m_seed, u64::MAX)),
            w2_band: bootstrap_median_band(&w2s, derive_seed(m_seed, u64::MAX - 1)),
        });
    }
    let ms: Vec<f64> = rows.iter().map(|r| r.m as f64).collect();
    let coord: Vec<f64> = rows.iter().map(|r| r.median_coord_stat).collect();
    let w2: Vec<f64> = rows.iter().map(|r| r.median_w2).collect();
    Ok(ScalingResult {
        gamma1_upper: gamma1,
        coord_fit: fit_scaling(&ms, &coord).ok(),
        w2_fit: fit_scaling(&ms, &w2).ok(),
        rows,
        outcomes,
    })
}

/// Median over trials of `sup_x` coordinate statistic for each `m`.
pub fn run_matrix_structure(cfg: &ExperimentConfig) -> Result<ScalingResult> {
    run_scaling(cfg)
}

/// Median over trials of `sup_x W_2(F_{m,x}, F)` for each `m`.
pub fn run_wasserstein_scaling(cfg: &ExperimentConfig) -> Result<ScalingResult> {
    run_scaling(cfg)
}

fn scaling_output(
    cfg: &ExperimentConfig,
    r: &ScalingResult,
    observed_is_w2: bool,
) -> ExperimentOutput {
    let mut table = format!(
        "{SCALING_SCHEMA}\nm,delta_nominal,rate_reference,observed,observed_lo,observed_hi,median_coord_stat,median_w2\n"
    );
    for row in &r.rows {
        let (obs, band) = if observed_is_w2 {
            (row.median_w2, row.w2_band)
        } else {
            (row.median_coord_stat, row.coord_band)
        };
        let _ = writeln!(
            table,
            "{},{},{},{obs},{},{},{},{}",
            row.m,
            row.delta_nominal,
            row.rate_reference,
            band.0,
            band.1,
            row.median_coord_stat,
            row.median_w2
        );
    }
    let fit = if observed_is_w2 {
        r.w2_fit
    } else {
        r.coord_fit
    };
    let fit_json = |f: Option<(f64, f64, f64)>| {
        f.map(|(s, i, res)| json!({"slope": s, "intercept": i, "residual": res}))
    };
    let summary = json!({
        "experiment": cfg.experiment.name(),
        "gamma1_upper": r.gamma1_upper,
        "fit": fit_json(fit),
        "coord_fit": fit_json(r.coord_fit),
        "w2_fit": fit_json(r.w2_fit),
        "m_sweep": r.rows.iter().map(|row| row.m).collect::<Vec<_>>(),
        "hypothesis_m_at_least_gamma1": r.rows.iter().map(|row| row.m as f64 >= r.gamma1_upper).collect::<Vec<_>>(),
    });
    ExperimentOutput {
        summary,
        files: vec![
            (
                "outcomes.csv".into(),
                outcomes_csv(cfg.experiment, &r.outcomes),
            ),
            ("scaling.csv".into(), table),
        ],
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SingleTResult {
    pub observed_rate: f64,
    pub standard_error: f64,
    pub exact_rate: f64,
    pub reference: f64,
    pub threshold: f64,
    pub outcomes: Vec<TrialOutcome>,
}

/// `|k/m - p| >= threshold`, with a relative guard so that exact ties on the
/// lattice `k/m` count as hits in simulation and oracle alike.
fn exceeds(k: usize, m: usize, p: f64, threshold: f64) -> bool {
    (k as f64 / m as f64 - p).abs() >= threshold * (1.0 - 1e-12)
}

pub fn run_single_t_lower(cfg: &ExperimentConfig) -> Result<SingleTResult> {
    cfg.check_common()?;
    let delta = cfg.probability_delta()?;
    if !cfg.t.is_finite() {
        return Err(Error::config("t", "t must be finite"));
    }
    if !(cfg.kappa >= 0.0) {
        return Err(Error::config("kappa", "kappa must be nonnegative"));
    }
    let s2 = sigma2_unchecked(cfg.t);
    if s2 < delta {
        return Err(Error::config(
            "t",
            format!("sigma^2(t) = {s2} is below delta = {delta}"),
        ));
    }
    let p = cdf(cfg.t);
    let threshold = cfg.kappa * s2.sqrt() * delta.sqrt();
    let m = cfg.m;
    let outcomes: Vec<TrialOutcome> = (0..cfg.trials)
        .into_par_iter()
        .map(|k| {
            let seed = cfg.trial_seed(k);
            let g = draw_sample(m, 1, seed)?;
            let below = g.entries.iter().filter(|&&v| v <= cfg.t).count();
            Ok(TrialOutcome {
                trial_index: k,
                seed,
                violated: exceeds(below, m, p, threshold),
                sup_statistics: None,
                auxiliary: vec![("deviation".into(), (below as f64 / m as f64 - p).abs())],
            })
        })
        .collect::<Result<_>>()?;
    let rate = outcomes.iter().filter(|o| o.violated).count() as f64 / cfg.trials as f64;
    let exact = binomial_pmf(m as u64, p)
        .iter()
        .enumerate()
        .filter(|(k, _)| exceeds(*k, m, p, threshold))
        .map(|(_, q)| q)
        .sum();
    Ok(SingleTResult {
        observed_rate: rate,
        standard_error: std_error(rate, cfg.trials),
        exact_rate: exact,
        reference: 2.0 * (-delta * m as f64).exp(),
        threshold,
        outcomes,
    })
}

/// Runs the configured experiment and collects its files and summary.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let kind = cfg.experiment;
    let simple = |summary: Value, outcomes: &[TrialOutcome]| ExperimentOutput {
        summary,
        files: vec![("outcomes.csv".into(), outcomes_csv(kind, outcomes))],
    };
    Ok(match kind {
        ExperimentKind::DkwEnvelope => dkw_output(cfg, &run_dkw_envelope(cfg)?),
        ExperimentKind::Sudakov => {
            let r = run_sudakov(cfg)?;
            simple(
                json!({
                    "experiment": kind.name(),
                    "estimate": r.estimate,
                    "lower_bound": r.lower_bound,
                    "ratio": r.ratio,
                    "separated_size": r.separated_size,
                    "covering_number": r.covering_number,
                    "hypothesis_holds": r.hypothesis_holds,
                    "single_direction_baseline": r.single_direction_baseline,
                }),
                &r.outcomes,
            )
        }
        ExperimentKind::Counterexample => {
            let r = run_counterexample(cfg)?;
            simple(
                json!({
                    "experiment": kind.name(),
                    "violation_probability": r.violation_probability,
                    "standard_error": r.standard_error,
                    "analytic_probability": r.analytic_probability,
                    "raw_sup_rate": r.raw_sup_rate,
                    "subset_size": r.subset_size,
                    "delta": r.delta,
                }),
                &r.outcomes,
            )
        }
        ExperimentKind::MatrixStructure => scaling_output(cfg, &run_matrix_structure(cfg)?, false),
        ExperimentKind::WassersteinScaling => {
            scaling_output(cfg, &run_wasserstein_scaling(cfg)?, true)
        }
        ExperimentKind::SingleTLower => {
            let r = run_single_t_lower(cfg)?;
            simple(
                json!({
                    "experiment": kind.name(),
                    "observed_rate": r.observed_rate,
                    "standard_error": r.standard_error,
                    "exact_rate": r.exact_rate,
                    "reference_2exp_minus_delta_m": r.reference,
                    "threshold": r.threshold,
                }),
                &r.outcomes,
            )
        }
    })
}

/// Sorted projections of trial 0 onto `direction`, for rearrangement plots.
pub fn rearrangement_rows(
    g: &crate::empirical_process::SampleMatrix,
    a: &UnitPointSet,
    direction: usize,
) -> Vec<(f64, f64)> {
    let p = project_point(g, a, direction);
    let m = p.m();
    let lambdas = if m >= 2 {
        crate::gaussian::QuantileGrid::new(m)
            .map(|q| q.lambdas)
            .unwrap_or_default()
    } else {
        vec![0.0]
    };
    p.values.into_iter().zip(lambdas).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(kind: ExperimentKind) -> ExperimentConfig {
        ExperimentConfig {
            experiment: kind,
            ..Default::default()
        }
    }

    #[test]
    fn config_parsing_is_strict() {
        let text = r#"{"experiment": "dkw_envelope", "m": 500, "trials": 20, "delta": 0.05}"#;
        let c = ExperimentConfig::from_json_with_overrides(
            Some(text),
            &[parse_override("trials=10").unwrap()],
        )
        .unwrap();
        assert_eq!(c.trials, 10);
        assert_eq!(c.m, 500);
        assert_eq!(c.delta, Some(0.05));
        let err = ExperimentConfig::from_json_with_overrides(
            Some(text),
            &[parse_override("tirals=10").unwrap()],
        )
        .unwrap_err();
        assert!(matches!(&err, Error::Config { key, .. } if key == "tirals"));
        let err =
            ExperimentConfig::from_json_with_overrides(Some(r#"{"mm": 3}"#), &[]).unwrap_err();
        assert!(err.is_config());
        let err =
            ExperimentConfig::from_json_with_overrides(Some(r#"{"m": "many"}"#), &[]).unwrap_err();
        assert!(matches!(&err, Error::Config { key, .. } if key == "m"));
        let c = ExperimentConfig::from_json_with_overrides(
            None,
            &[parse_override("set_spec=cap:n=5,seed=2").unwrap()],
        )
        .unwrap();
        assert_eq!(c.set_spec, "cap:n=5,seed=2");
        let round = ExperimentConfig::from_json_with_overrides(Some(&c.to_json().to_string()), &[])
            .unwrap();
        assert_eq!(round, c);
    }

    #[test]
    fn resolve_set_descriptors() {
        assert_eq!(resolve_set("single", 4).unwrap().len(), 1);
        assert_eq!(resolve_set("antipodal", 4).unwrap().len(), 2);
        assert_eq!(resolve_set("sphere:n=7,seed=3", 5).unwrap().len(), 14);
        assert_eq!(resolve_set("cap:n=4", 5).unwrap().len(), 8);
        assert_eq!(resolve_set("density", 10).unwrap().len(), 9);
        assert!(resolve_set("cube", 3).is_err());
        assert!(resolve_set("cap:n=4,radius=2", 3).is_err());
        assert!(resolve_set("csv:/nonexistent/file.csv", 3).is_err());
    }

    #[test]
    fn fit_scaling_examples() {
        let xs = [1.0, 2.0, 4.0, 8.0];
        let (s, i, r) = fit_scaling(&xs, &xs).unwrap();
        assert!((s - 1.0).abs() < 1e-12 && i.abs() < 1e-12 && r < 1e-12);
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 / x.sqrt()).collect();
        assert!((fit_scaling(&xs, &ys).unwrap().0 + 0.5).abs() < 1e-12);
        assert!(fit_scaling(&xs, &[1.0, -1.0, 2.0, 3.0]).is_err());
        assert!(fit_scaling(&xs[..2], &xs[..2]).is_err());
        // Noisy fixture: y = x^{-1/2} (1 + e) with |e| <= 5%.
        let noise = [0.03, -0.05, 0.01, 0.04, -0.02, 0.0, -0.04];
        let xs: Vec<f64> = (8..15).map(|k| (1u64 << k) as f64).collect();
        let ys: Vec<f64> = xs
            .iter()
            .zip(noise)
            .map(|(x, e)| (1.0 + e) / x.sqrt())
            .collect();
        let (s, _, _) = fit_scaling(&xs, &ys).unwrap();
        assert!((s + 0.5).abs() < 0.02, "slope {s}");
    }

    #[test]
    fn binomial_helpers() {
        let pmf = binomial_pmf(30, 0.5);
        assert!((pmf.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!((pmf[15] - 155_117_520.0 / 2f64.powi(30)).abs() < 1e-12);
        // E|K - m/2| for m = 2 is 1/2, i.e. 1/4 after dividing by m.
        assert!((binomial_mean_abs_deviation(2) - 0.25).abs() < 1e-15);
        let m = 10_000u64;
        let asym = (1.0 / (2.0 * std::f64::consts::PI * m as f64)).sqrt();
        assert!((binomial_mean_abs_deviation(m) / asym - 1.0).abs() < 1e-3);
    }

    #[test]
    fn dkw_envelope_examples() {
        let mut c = cfg(ExperimentKind::DkwEnvelope);
        c.m = 300;
        c.d = 6;
        c.trials = 12;
        c.delta = Some(0.05);
        c.set_spec = "cap:n=5,seed=1".into();
        c.c_env = 1e6;
        assert_eq!(run_dkw_envelope(&c).unwrap().violation_rate, 0.0);
        c.c_env = 1.0;
        let a = run_dkw_envelope(&c).unwrap();
        assert_eq!(a, run_dkw_envelope(&c).unwrap());
        let rates: Vec<f64> = [0.0, 0.5, 1.0, 2.0, 4.0]
            .iter()
            .map(|&k| violation_rate_at(&a.outcomes, k))
            .collect();
        assert!(rates.windows(2).all(|w| w[0] >= w[1]));
        assert_eq!(rates[0], 1.0);
        c.delta = Some(0.2);
        assert!(matches!(run_dkw_envelope(&c), Err(Error::Config { .. })));
    }

    #[test]
    fn sudakov_single_direction_matches_binomial_oracle() {
        let mut c = cfg(ExperimentKind::Sudakov);
        c.m = 400;
        c.d = 3;
        c.trials = 4000;
        c.delta = Some(0.5);
        c.set_spec = "single".into();
        let r = run_sudakov(&c).unwrap();
        assert_eq!(r.separated_size, 1);
        let sd = (0.25 / 400.0f64).sqrt();
        assert!(
            (r.estimate - r.single_direction_baseline).abs()
                < 3.0 * sd / (c.trials as f64).sqrt() * 1.5
        );
        c.set_spec = "antipodal".into();
        c.delta = Some(0.1);
        c.trials = 50;
        let pair = run_sudakov(&c).unwrap();
        c.set_spec = "single".into();
        let one = run_sudakov(&c).unwrap();
        for (p, o) in pair.outcomes.iter().zip(&one.outcomes) {
            assert!((p.auxiliary[0].1 - o.auxiliary[0].1).abs() < 1e-12);
        }
    }

    #[test]
    fn counterexample_small_dimension_is_rare() {
        let mut c = cfg(ExperimentKind::Counterexample);
        c.m = 30;
        c.d = 2;
        c.trials = 2000;
        let r = run_counterexample(&c).unwrap();
        assert!(r.violation_probability < 0.01);
        assert!(r.analytic_probability < 1e-3);
        c.delta = Some(1.0);
        assert!(run_counterexample(&c).is_err());
    }

    #[test]
    fn two_coordinate_ks_matches_direct_count() {
        let mut rng = stream_rng(5, 0);
        let m = 70;
        let words = 2;
        let last = (1u64 << 6) - 1;
        let full = vec![u64::MAX, last];
        let a = rademacher_column(&mut rng, words, last);
        let b = rademacher_column(&mut rng, words, last);
        let (h, d) = (0.8f64, 0.6f64);
        let sign = |w: &[u64], i: usize| {
            if w[i / 64] >> (i % 64) & 1 == 1 {
                -1.0
            } else {
                1.0
            }
        };
        let values: Vec<f64> = (0..m).map(|i| h * sign(&a, i) + d * sign(&b, i)).collect();
        let atoms = [-h - d, -h + d, h - d, h + d];
        let direct = atoms
            .iter()
            .map(|&t| {
                let fm = values.iter().filter(|&&v| v <= t + 1e-12).count() as f64 / m as f64;
                let f = atoms.iter().filter(|&&s| s <= t + 1e-12).count() as f64 / 4.0;
                (fm - f).abs()
            })
            .fold(0.0, f64::max);
        assert!((two_coordinate_ks(&a, &b, &full, m, h, d) - direct).abs() < 1e-15);
    }

    #[test]
    fn single_t_examples() {
        let mut c = cfg(ExperimentKind::SingleTLower);
        c.m = 400;
        c.trials = 200;
        c.delta = Some(0.01);
        c.kappa = 0.0;
        assert_eq!(run_single_t_lower(&c).unwrap().observed_rate, 1.0);
        c.kappa = 20.0;
        assert_eq!(run_single_t_lower(&c).unwrap().observed_rate, 0.0);
        c.kappa = 1.0;
        c.t = 3.5;
        assert!(run_single_t_lower(&c).is_err());
    }

    #[test]
    fn matrix_structure_runs_and_is_deterministic() {
        let mut c = cfg(ExperimentKind::MatrixStructure);
        c.d = 8;
        c.trials = 3;
        c.set_spec = "cap:n=4,seed=1".into();
        c.m_sweep = vec![32, 64, 128];
        let a = run_experiment(&c).unwrap();
        assert_eq!(a, run_experiment(&c).unwrap());
        let r = run_matrix_structure(&c).unwrap();
        assert_eq!(r.rows.len(), 3);
        assert!(r.coord_fit.is_some());
    }
}
