//! Random polytopes K_N = conv{X_1..X_N} with i.i.d. coordinates and Monte
//! Carlo estimates of E μ_n(K_N).

pub mod planar;
pub mod simplex;

use rayon::prelude::*;
use serde::Serialize;

use crate::cramer::{CramerProfile, LambdaStarEvaluator};
use crate::error::{Error, Result};
use crate::measures::MeasureSpec;
use crate::rng::Stream;
use crate::stats::{mean_se, t_quantile, wilson_interval, Z95};

pub use simplex::{Certificate, LpOptions, MembershipResult, PointSet};

/// Default ceiling on N_max·M·R for a sweep.
pub const DEFAULT_OP_CAP: f64 = 5e9;
/// Environment variable that overrides [`DEFAULT_OP_CAP`].
pub const OP_CAP_ENV: &str = "HULLTHRESH_OP_CAP";

/// The operation cap from the environment, or the default.
pub fn op_cap_from_env() -> Result<f64> {
    match std::env::var(OP_CAP_ENV) {
        Ok(v) => {
            let cap: f64 = v
                .trim()
                .parse()
                .map_err(|_| Error::invalid(format!("{OP_CAP_ENV}={v:?} is not a number")))?;
            if !(cap > 0.0) {
                return Err(Error::invalid(format!("{OP_CAP_ENV} must be positive")));
            }
            Ok(cap)
        }
        Err(_) => Ok(DEFAULT_OP_CAP),
    }
}

/// N points of μ_n stored row-major, regenerable from (seed, stream id).
#[derive(Debug, Clone, PartialEq)]
pub struct HullSample {
    pub n: usize,
    pub points: Vec<f64>,
    pub seed: u64,
    pub stream_id: u64,
}

impl HullSample {
    /// Draw N points of μ_n. Coordinates are consumed from one stream in
    /// order, so the first k points do not depend on N.
    pub fn draw(
        spec: &MeasureSpec,
        n: usize,
        big_n: usize,
        seed: u64,
        stream_id: u64,
    ) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("dimension n must be at least 1"));
        }
        if big_n <= n {
            return Err(Error::invalid(format!(
                "need N > n, got N = {big_n}, n = {n}"
            )));
        }
        let mut rng = Stream::new(seed, stream_id);
        let points = spec.sample_vec(&mut rng, n * big_n);
        Ok(HullSample {
            n,
            points,
            seed,
            stream_id,
        })
    }

    pub fn from_points(n: usize, points: Vec<f64>) -> Result<Self> {
        if n == 0 || !points.len().is_multiple_of(n) || points.is_empty() {
            return Err(Error::invalid(
                "point data must hold a positive number of n-vectors",
            ));
        }
        if points.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("points must be finite"));
        }
        Ok(HullSample {
            n,
            points,
            seed: 0,
            stream_id: 0,
        })
    }

    pub fn len(&self) -> usize {
        self.points.len() / self.n
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn point(&self, j: usize) -> &[f64] {
        &self.points[j * self.n..(j + 1) * self.n]
    }

    pub fn point_set(&self) -> PointSet<'_> {
        PointSet {
            n: self.n,
            count: self.len(),
            data: &self.points,
        }
    }

    pub fn contains(&self, query: &[f64]) -> Result<MembershipResult> {
        self.contains_prefix(query, self.len(), &LpOptions::default())
    }

    /// Membership in the hull of the first `count` points.
    pub fn contains_prefix(
        &self,
        query: &[f64],
        count: usize,
        opts: &LpOptions,
    ) -> Result<MembershipResult> {
        simplex::contains_points(self.point_set().prefix(count), query, opts)
    }
}

/// Membership with retries: a certificate that fails re-verification is
/// usually a query within rounding distance of a facet, so the LP is re-run
/// with looser feasibility tolerances before giving up.
pub fn contains_robust(hull: &HullSample, query: &[f64], count: usize) -> Result<bool> {
    let mut last = None;
    for loosen in [1.0, 10.0, 100.0] {
        let opts = LpOptions {
            feas_tol: 1e-9 * loosen,
            ..Default::default()
        };
        match hull.contains_prefix(query, count, &opts) {
            Ok(r) => return Ok(r.inside),
            Err(e @ Error::NumericalInstability(_)) => last = Some(e),
            Err(e) => return Err(e),
        }
    }
    Err(last.expect("at least one attempt"))
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct MeasureEstimate {
    pub mean: f64,
    pub se: f64,
    pub hits: usize,
    pub trials: usize,
    pub ci_low: f64,
    pub ci_high: f64,
}

impl MeasureEstimate {
    fn from_hits(hits: usize, trials: usize) -> Self {
        let mean = hits as f64 / trials as f64;
        let (ci_low, ci_high) = wilson_interval(hits, trials, Z95);
        MeasureEstimate {
            mean,
            se: (mean * (1.0 - mean) / trials as f64).sqrt(),
            hits,
            trials,
            ci_low,
            ci_high,
        }
    }
}

/// Fraction of M test points of μ_n that fall in the hull, with a Wilson
/// interval at 95%.
pub fn estimate_measure(
    spec: &MeasureSpec,
    hull: &HullSample,
    m: usize,
    rng: &mut Stream,
) -> Result<MeasureEstimate> {
    if m == 0 {
        return Err(Error::invalid("need at least one test point"));
    }
    let n = hull.n;
    let tests = spec.sample_vec(rng, n * m);
    let inside: Vec<bool> = tests
        .par_chunks(n)
        .map(|q| contains_robust(hull, q, hull.len()))
        .collect::<Result<_>>()?;
    let hits = inside.iter().filter(|&&b| b).count();
    Ok(MeasureEstimate::from_hits(hits, m))
}

/// N(ρ) = ceil(e^{ρn}), raised to n + 1 where that is smaller.
pub fn vertex_count(rho: f64, n: usize) -> Result<usize> {
    let raw = (rho * n as f64).exp().ceil();
    if !raw.is_finite() || raw > 1e15 {
        return Err(Error::invalid(format!(
            "N(ρ) = e^(ρn) is too large for ρ = {rho}, n = {n}"
        )));
    }
    Ok((raw as usize).max(n + 1))
}

#[derive(Debug, Clone)]
pub struct SweepConfig {
    pub n: usize,
    pub rho_grid: Vec<f64>,
    pub replicates: usize,
    pub test_points: usize,
    pub delta: f64,
    pub seed: u64,
    pub op_cap: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub n: usize,
    pub rho: f64,
    #[serde(rename = "N")]
    pub big_n: usize,
    pub mean: f64,
    pub ci_half: f64,
    pub replicates: usize,
    pub test_points: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepGrid {
    pub n: usize,
    pub delta: f64,
    pub rows: Vec<SweepRow>,
    /// replicate_means[r][k]: estimate of replicate r at grid row k
    pub replicate_means: Vec<Vec<f64>>,
    pub rho_hat_low: Option<f64>,
    pub rho_hat_high: Option<f64>,
}

/// Sweep ρ over a grid with nested coupling: each replicate draws N_max
/// vertices once and uses prefixes of length N(ρ); its M test points are
/// shared by all rows. Since the hulls are nested, the first row at which a
/// test point is covered is found by bisection over the grid.
pub fn sweep(spec: &MeasureSpec, cfg: &SweepConfig) -> Result<SweepGrid> {
    validate_sweep(cfg)?;
    let n = cfg.n;
    let counts: Vec<usize> = cfg
        .rho_grid
        .iter()
        .map(|&rho| vertex_count(rho, n))
        .collect::<Result<_>>()?;
    let n_max = *counts.last().expect("non-empty grid");
    let required = n_max as f64 * cfg.test_points as f64 * cfg.replicates as f64;
    if required > cfg.op_cap {
        return Err(Error::BudgetExceeded {
            required,
            cap: cfg.op_cap,
        });
    }
    let k_rows = counts.len();
    let root = Stream::new(cfg.seed, 0);
    let mut replicate_means = Vec::with_capacity(cfg.replicates);
    for rep in 0..cfg.replicates {
        let rep_stream = root.split(rep as u64);
        let hull = HullSample::draw(spec, n, n_max, cfg.seed, rep_stream.split(0).stream_id())?;
        let mut test_rng = rep_stream.split(1);
        let tests = spec.sample_vec(&mut test_rng, n * cfg.test_points);
        let first_row: Vec<usize> = tests
            .par_chunks(n)
            .map(|q| first_covering_row(&hull, q, &counts))
            .collect::<Result<_>>()?;
        let mut hits = vec![0usize; k_rows + 1];
        for &k in &first_row {
            hits[k] += 1;
        }
        let mut means = Vec::with_capacity(k_rows);
        let mut covered = 0usize;
        for &h in hits.iter().take(k_rows) {
            covered += h;
            means.push(covered as f64 / cfg.test_points as f64);
        }
        replicate_means.push(means);
    }

    let mut rows = Vec::with_capacity(k_rows);
    for k in 0..k_rows {
        let col: Vec<f64> = replicate_means.iter().map(|r| r[k]).collect();
        let ms = mean_se(&col);
        let ci_half = if cfg.replicates >= 2 {
            t_quantile(0.95, cfg.replicates - 1) * ms.se
        } else {
            let hits = (ms.mean * cfg.test_points as f64).round() as usize;
            let (lo, hi) = wilson_interval(hits, cfg.test_points, Z95);
            0.5 * (hi - lo)
        };
        rows.push(SweepRow {
            n,
            rho: cfg.rho_grid[k],
            big_n: counts[k],
            mean: ms.mean,
            ci_half,
            replicates: cfg.replicates,
            test_points: cfg.test_points,
        });
    }
    let rho: Vec<f64> = rows.iter().map(|r| r.rho).collect();
    let mean: Vec<f64> = rows.iter().map(|r| r.mean).collect();
    let (rho_hat_low, rho_hat_high) = extract_crossings(&rho, &mean, cfg.delta);
    Ok(SweepGrid {
        n,
        delta: cfg.delta,
        rows,
        replicate_means,
        rho_hat_low,
        rho_hat_high,
    })
}

fn validate_sweep(cfg: &SweepConfig) -> Result<()> {
    if cfg.n == 0 {
        return Err(Error::invalid("dimension n must be at least 1"));
    }
    if cfg.rho_grid.is_empty() {
        return Err(Error::invalid("rho grid is empty"));
    }
    if cfg.rho_grid.iter().any(|r| !(r.is_finite() && *r > 0.0)) {
        return Err(Error::invalid("rho values must be positive and finite"));
    }
    for w in cfg.rho_grid.windows(2) {
        if !(w[1] > w[0]) {
            return Err(Error::invalid("rho grid must be strictly increasing"));
        }
    }
    if cfg.replicates == 0 || cfg.test_points == 0 {
        return Err(Error::invalid(
            "replicates and test points must be positive",
        ));
    }
    if !(cfg.delta > 0.0 && cfg.delta < 0.5) {
        return Err(Error::domain(
            "sweep",
            cfg.delta,
            "delta must lie in (0, 1/2)",
        ));
    }
    if !(cfg.op_cap > 0.0) {
        return Err(Error::invalid("operation cap must be positive"));
    }
    Ok(())
}

/// Smallest grid row whose hull contains q, or `counts.len()` if none.
fn first_covering_row(hull: &HullSample, q: &[f64], counts: &[usize]) -> Result<usize> {
    let (mut lo, mut hi) = (0usize, counts.len());
    while lo < hi {
        let mid = (lo + hi) / 2;
        if contains_robust(hull, q, counts[mid])? {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    Ok(lo)
}

/// Membership of q in the hulls of the given prefixes, each decided by its
/// own LP.
pub fn membership_profile(hull: &HullSample, q: &[f64], counts: &[usize]) -> Result<Vec<bool>> {
    counts
        .iter()
        .map(|&c| contains_robust(hull, q, c))
        .collect()
}

/// ρ̂_low: where the curve last sits at or below δ, ρ̂_high: where it first
/// reaches 1 - δ. Each is interpolated linearly toward the neighbouring row
/// that lies on the other side; missing crossings are `None`.
pub fn extract_crossings(rho: &[f64], mean: &[f64], delta: f64) -> (Option<f64>, Option<f64>) {
    let interp = |i: usize, j: usize, level: f64| {
        let (m0, m1) = (mean[i], mean[j]);
        if m1 == m0 {
            rho[i]
        } else {
            rho[i] + (level - m0) / (m1 - m0) * (rho[j] - rho[i])
        }
    };
    let low = mean.iter().rposition(|&m| m <= delta).map(|i| {
        if i + 1 < mean.len() {
            interp(i, i + 1, delta)
        } else {
            rho[i]
        }
    });
    let high = mean.iter().position(|&m| m >= 1.0 - delta).map(|j| {
        if j > 0 {
            interp(j - 1, j, 1.0 - delta)
        } else {
            rho[j]
        }
    });
    (low, high)
}

#[derive(Debug, Clone, Serialize)]
pub struct InclusionReport {
    pub n: usize,
    #[serde(rename = "N")]
    pub big_n: usize,
    pub r: f64,
    pub epsilon: f64,
    pub trials: usize,
    pub points_per_trial: usize,
    pub failures: usize,
    pub failure_rate: f64,
    pub se: f64,
    /// ln of 2 C(N,n) (1 - φ)^{N-n} with φ = exp(-(1+ε)r - 2εn)
    pub log_bound: f64,
    pub bound: f64,
    pub acceptance_rate: f64,
    pub consistent: bool,
}

/// ln C(N, n).
fn ln_binomial(big_n: usize, n: usize) -> f64 {
    (0..n)
        .map(|i| ((big_n - i) as f64).ln() - ((i + 1) as f64).ln())
        .sum()
}

/// Frequency with which K_N fails to contain sampled points of A = B_r,
/// against 2 C(N,n)(1 - φ)^{N-n} with the depth lower estimate
/// φ = exp(-(1+ε)r - 2εn). Points of A are draws of μ_n kept when
/// Λ*_n <= r; r = 0 uses A = {0}.
#[allow(clippy::too_many_arguments)]
pub fn inclusion_bound_check(
    profile: &CramerProfile,
    n: usize,
    big_n: usize,
    r: f64,
    epsilon: f64,
    trials: usize,
    points_per_trial: usize,
    rng: &mut Stream,
) -> Result<InclusionReport> {
    let spec = profile.spec();
    if spec.is_atomic() {
        return Err(Error::AtomicMeasure(spec.label()));
    }
    if n == 0 || big_n <= n {
        return Err(Error::invalid(format!(
            "need N > n >= 1, got N = {big_n}, n = {n}"
        )));
    }
    if trials == 0 || points_per_trial == 0 {
        return Err(Error::invalid(
            "trials and points per trial must be positive",
        ));
    }
    if !(r >= 0.0 && r.is_finite()) {
        return Err(Error::domain(
            "inclusion_bound_check",
            r,
            "r must be finite and >= 0",
        ));
    }
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::domain(
            "inclusion_bound_check",
            epsilon,
            "epsilon must lie in (0, 1)",
        ));
    }
    let fast = LambdaStarEvaluator::new(profile)?;
    let mut proposals = 0usize;
    let mut accepted = 0usize;
    let mut failures = 0usize;
    for trial in 0..trials {
        let trial_rng = rng.split(trial as u64);
        let hull = HullSample::draw(spec, n, big_n, rng.seed(), trial_rng.split(0).stream_id())?;
        let mut a_rng = trial_rng.split(1);
        let a_points: Vec<Vec<f64>> = if r == 0.0 {
            vec![vec![0.0; n]]
        } else {
            let mut pts = Vec::with_capacity(points_per_trial);
            while pts.len() < points_per_trial {
                let x = spec.sample_vec(&mut a_rng, n);
                proposals += 1;
                let mut s = 0.0;
                for &xi in &x {
                    s += fast.eval(xi)?;
                }
                if s <= r {
                    accepted += 1;
                    pts.push(x);
                }
                if proposals >= 10_000 && (accepted as f64) < 1e-4 * proposals as f64 {
                    return Err(Error::RejectionTooSlow {
                        rate: accepted as f64 / proposals as f64,
                    });
                }
            }
            pts
        };
        let mut all_in = true;
        for q in &a_points {
            if !contains_robust(&hull, q, big_n)? {
                all_in = false;
                break;
            }
        }
        if !all_in {
            failures += 1;
        }
    }
    let failure_rate = failures as f64 / trials as f64;
    let se = (failure_rate * (1.0 - failure_rate) / trials as f64).sqrt();
    let phi = (-(1.0 + epsilon) * r - 2.0 * epsilon * n as f64).exp();
    let log_bound =
        std::f64::consts::LN_2 + ln_binomial(big_n, n) + (big_n - n) as f64 * (-phi).ln_1p();
    let bound = log_bound.exp().min(1.0);
    Ok(InclusionReport {
        n,
        big_n,
        r,
        epsilon,
        trials,
        points_per_trial: if r == 0.0 { 1 } else { points_per_trial },
        failures,
        failure_rate,
        se,
        log_bound,
        bound,
        acceptance_rate: if proposals == 0 {
            1.0
        } else {
            accepted as f64 / proposals as f64
        },
        consistent: failure_rate <= bound + 3.0 * se,
    })
}
