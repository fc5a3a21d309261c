//! The acceptance suite behind `verify all`.
//!
//! Every criterion draws from its own seeded stream, so the rendered report
//! depends only on the seed and the operation cap. Wall-clock times are kept
//! apart from the report.

use std::fmt::Write as _;
use std::time::{Duration, Instant};

use crate::cramer::CramerProfile;
use crate::error::{Error, Result};
use crate::measures::MeasureSpec;
use crate::polytope::{self, planar, HullSample, SweepConfig};
use crate::rng::Stream;
use crate::stats::{fmt_g17, mean_se};
use crate::thresholds;

#[derive(Debug, Clone)]
pub struct Outcome {
    pub id: u32,
    pub title: &'static str,
    pub pass: bool,
    pub detail: String,
    pub elapsed: Duration,
    /// wall-clock limit attached to the criterion, if any
    pub time_limit: Option<Duration>,
}

#[derive(Debug, Clone)]
pub struct Report {
    pub seed: u64,
    pub op_cap: f64,
    pub outcomes: Vec<Outcome>,
}

impl Report {
    pub fn all_pass(&self) -> bool {
        self.outcomes.iter().all(|o| o.pass)
    }

    /// Deterministic text: one line per criterion, no timings.
    pub fn render(&self) -> String {
        let mut s = String::new();
        for o in &self.outcomes {
            let _ = writeln!(
                s,
                "criterion {:>2} {} {}: {}",
                o.id,
                if o.pass { "PASS" } else { "FAIL" },
                o.title,
                o.detail
            );
        }
        let passed = self.outcomes.iter().filter(|o| o.pass).count();
        let _ = writeln!(s, "summary: {passed}/{} passed", self.outcomes.len());
        s
    }

    pub fn render_timings(&self) -> String {
        let mut s = String::new();
        for o in &self.outcomes {
            let limit = o
                .time_limit
                .map(|l| format!(" limit {:.0} s", l.as_secs_f64()))
                .unwrap_or_default();
            let _ = writeln!(
                s,
                "timing criterion {}: {:.3} s{limit}",
                o.id,
                o.elapsed.as_secs_f64()
            );
        }
        s
    }
}

/// The numerical criteria, 1 through 11. Determinism of the whole report
/// is checked by running the suite twice and comparing bytes.
pub fn run_all(seed: u64, op_cap: f64) -> Report {
    type Check = fn(&mut Stream) -> Result<(bool, String)>;
    let checks: [(u32, &'static str, Check, Option<u64>); 10] = [
        (1, "rademacher volume constant", rademacher_kappa, Some(1)),
        (
            2,
            "uniform u-integral cross-check",
            uniform_cross_check,
            Some(5),
        ),
        (
            3,
            "exponential closed form",
            exponential_closed_form,
            Some(5),
        ),
        (4, "nu_2 exactness", gaussian_type_exactness, None),
        (5, "tilting identity", tilting_identity, None),
        (6, "exp(lambda*/2) integral bound", exp_half_bound, None),
        (
            7,
            "lambda*-condition diagnostics",
            condition_diagnostics,
            None,
        ),
        (8, "chernoff depth bound", chernoff_depth, Some(120)),
        (9, "2d oracle equivalence", planar_oracle, None),
        (11, "upper-bound curve", upper_bound, None),
    ];
    let mut outcomes = Vec::new();
    for (id, title, check, limit) in checks {
        let mut rng = Stream::new(seed, 1000 + id as u64);
        outcomes.push(timed(id, title, limit, || check(&mut rng)));
        if id == 9 {
            let mut rng = Stream::new(seed, 1010);
            outcomes.push(timed(10, "sharp-threshold sweep", Some(600), || {
                threshold_sweep(&mut rng, op_cap)
            }));
        }
    }
    Report {
        seed,
        op_cap,
        outcomes,
    }
}

fn timed(
    id: u32,
    title: &'static str,
    limit_s: Option<u64>,
    f: impl FnOnce() -> Result<(bool, String)>,
) -> Outcome {
    let start = Instant::now();
    let (pass, detail) = match f() {
        Ok(r) => r,
        Err(e) => (false, format!("error: {e}")),
    };
    Outcome {
        id,
        title,
        pass,
        detail,
        elapsed: start.elapsed(),
        time_limit: limit_s.map(Duration::from_secs),
    }
}

fn g(x: f64) -> String {
    fmt_g17(x)
}

fn profile(spec: MeasureSpec) -> Result<CramerProfile> {
    CramerProfile::new(spec)
}

pub fn uniform_t1() -> Result<f64> {
    Ok(thresholds::constants(&profile(MeasureSpec::uniform(1.0)?)?)?.t1)
}

pub fn rademacher_kappa(_: &mut Stream) -> Result<(bool, String)> {
    let c = thresholds::constants(&profile(MeasureSpec::rademacher())?)?;
    let kappa = c
        .kappa_vol
        .ok_or_else(|| Error::invalid("no kappa_vol for rademacher"))?;
    let err = (kappa - (std::f64::consts::LN_2 - 0.5)).abs();
    Ok((
        err < 1e-8,
        format!("kappa_vol={} |err|={}", g(kappa), g(err)),
    ))
}

pub fn uniform_cross_check(_: &mut Stream) -> Result<(bool, String)> {
    let c = thresholds::constants(&profile(MeasureSpec::uniform(1.0)?)?)?;
    let kappa = c
        .kappa_vol
        .ok_or_else(|| Error::invalid("no kappa_vol for uniform"))?;
    let u = thresholds::cube_kappa_u_integral()?;
    let e1 = (kappa - u).abs();
    let e2 = (c.t1 - kappa).abs();
    Ok((
        e1 < 1e-8 && e2 < 1e-8,
        format!(
            "kappa_vol={} u_integral={} t1={} |kappa-u|={} |t1-kappa|={}",
            g(kappa),
            g(u),
            g(c.t1),
            g(e1),
            g(e2)
        ),
    ))
}

fn exp_closed(x: f64) -> f64 {
    let s = (1.0 + x * x).sqrt();
    // s - 1 = x²/(s+1) avoids cancellation near 0
    x * x / (s + 1.0) - ((s + 1.0) / 2.0).ln()
}

pub fn exponential_closed_form(_: &mut Stream) -> Result<(bool, String)> {
    let e = profile(MeasureSpec::sym_exponential())?;
    let mut worst = (0.0f64, 0.0f64);
    for k in 0..=3000 {
        let x = 0.01 * k as f64;
        let err = (e.lambda_star(x)? - exp_closed(x)).abs();
        if err > worst.0 {
            worst = (err, x);
        }
    }
    Ok((
        worst.0 < 1e-7,
        format!("max |err| on [0,30] = {} at x={}", g(worst.0), g(worst.1)),
    ))
}

pub fn gaussian_type_exactness(_: &mut Stream) -> Result<(bool, String)> {
    let p = profile(MeasureSpec::pnorm(2.0)?)?;
    let (mut lam_err, mut h_err) = (0.0f64, 0.0f64);
    for k in 0..=1000 {
        let s = 0.01 * k as f64;
        lam_err = lam_err.max((p.log_mgf(s)? - s * s / 4.0).abs());
        // h beyond x_max_eval comes from the unclipped evaluator
        let (_, h) = p.lambda_star_and_h(s)?;
        h_err = h_err.max((h - 2.0 * s).abs());
    }
    Ok((
        lam_err < 1e-10 && h_err < 1e-10,
        format!(
            "max |Lambda(t)-t^2/4|={} max |h(x)-2x|={}",
            g(lam_err),
            g(h_err)
        ),
    ))
}

pub fn builtin_measures() -> Result<Vec<MeasureSpec>> {
    Ok(vec![
        MeasureSpec::rademacher(),
        MeasureSpec::uniform(1.0)?,
        MeasureSpec::sym_exponential(),
        MeasureSpec::pnorm(1.5)?,
        MeasureSpec::pnorm(2.0)?,
        MeasureSpec::pnorm(3.0)?,
    ])
}

/// 0.9·t* with t* = ∞ replaced by 5.
pub fn tilt_points(t_star: f64) -> [f64; 3] {
    [0.2, 0.5, 0.9 * t_star.min(5.0)]
}

pub fn tilting_identity(rng: &mut Stream) -> Result<(bool, String)> {
    let mut pass = true;
    let mut worst = 0.0f64;
    let mut parts = Vec::new();
    for (k, spec) in builtin_measures()?.into_iter().enumerate() {
        let label = spec.label();
        let p = profile(spec)?;
        for (j, &t) in tilt_points(p.spec().t_star()).iter().enumerate() {
            let mut child = rng.split((10 * k + j) as u64);
            let est = p.tilted_mean_mc(t, 100_000, &mut child)?;
            let slope = p.mgf_point(t)?.slope;
            let z = (est.mean - slope).abs() / est.se;
            worst = worst.max(z);
            if !(z <= 4.0) {
                pass = false;
                parts.push(format!("{label} t={} z={}", g(t), g(z)));
            }
        }
    }
    let detail = if parts.is_empty() {
        format!("18 cases, max |z|={}", g(worst))
    } else {
        format!("max |z|={}; over 4: {}", g(worst), parts.join(", "))
    };
    Ok((pass, detail))
}

pub fn exp_half_bound(_: &mut Stream) -> Result<(bool, String)> {
    let specs = [
        MeasureSpec::uniform(1.0)?,
        MeasureSpec::sym_exponential(),
        MeasureSpec::pnorm(1.5)?,
        MeasureSpec::pnorm(2.0)?,
        MeasureSpec::pnorm(3.0)?,
    ];
    let mut pass = true;
    let mut parts = Vec::new();
    for spec in specs {
        let label = spec.label();
        let v = profile(spec)?.exp_half_lambda_star_integral()?;
        pass &= v <= 4.0;
        parts.push(format!("{label}={}", g(v)));
    }
    Ok((pass, parts.join(" ")))
}

/// Geometric x grid from 1 to the largest tabulated x.
pub fn condition_grid(profile: &CramerProfile, p: f64) -> Vec<f64> {
    let x_last = if p == 1.0 { 50.0 } else { profile.x_max_eval() };
    (0..=40).map(|k| x_last.powf(k as f64 / 40.0)).collect()
}

pub fn condition_diagnostics(_: &mut Stream) -> Result<(bool, String)> {
    let mut pass = true;
    let mut parts = Vec::new();
    for p in [1.0, 2.0, 3.0] {
        let prof = profile(MeasureSpec::pnorm(p)?)?;
        let grid = condition_grid(&prof, p);
        let rows = prof.lambda_star_condition_scan(&grid)?;
        let min = rows.iter().map(|r| r.ratio).fold(f64::INFINITY, f64::min);
        let last = rows.last().expect("non-empty grid");
        let decreasing = rows.windows(2).all(|w| w[1].ratio <= w[0].ratio);
        pass &= min >= 1.0 - 1e-9 && last.ratio < 1.15 && decreasing;
        parts.push(format!(
            "p={} x_last={} ratio_last={} min={} decreasing={}",
            g(p),
            g(last.x),
            g(last.ratio),
            g(min),
            decreasing
        ));
    }
    Ok((pass, parts.join("; ")))
}

pub fn chernoff_depth(rng: &mut Stream) -> Result<(bool, String)> {
    let mut pass = true;
    let mut parts = Vec::new();
    for (k, spec) in [MeasureSpec::uniform(1.0)?, MeasureSpec::sym_exponential()]
        .into_iter()
        .enumerate()
    {
        let label = spec.label();
        let prof = profile(spec)?;
        let t1 = thresholds::constants(&prof)?.t1;
        for (j, n) in [4usize, 8].into_iter().enumerate() {
            let r = t1 * n as f64;
            let mut child = rng.split((2 * k + j) as u64);
            let rows = thresholds::chernoff_boundary_check(&prof, n, r, 20, 100_000, &mut child)?;
            let ok = rows.iter().filter(|r| r.pass).count();
            let max_tail = rows.iter().map(|r| r.tail).fold(0.0, f64::max);
            pass &= ok == rows.len();
            parts.push(format!(
                "{label} n={n}: {ok}/20 max_tail={} bound={}",
                g(max_tail),
                g((-r).exp())
            ));
        }
    }
    Ok((pass, parts.join("; ")))
}

pub fn planar_oracle(rng: &mut Stream) -> Result<(bool, String)> {
    let u = MeasureSpec::uniform(1.0)?;
    let sizes = [5usize, 10, 50];
    let mut agree = [0usize; 3];
    let mut worst = 0.0f64;
    for s in 1..=50u64 {
        let seed_stream = rng.split(s);
        for (j, &big_n) in sizes.iter().enumerate() {
            let cell = seed_stream.split(j as u64);
            let hull = HullSample::draw(&u, 2, big_n, cell.seed(), cell.split(0).stream_id())?;
            let pts: Vec<[f64; 2]> = (0..big_n)
                .map(|i| [hull.point(i)[0], hull.point(i)[1]])
                .collect();
            let exact = planar::polygon_area(&planar::convex_hull(&pts)) / 4.0;
            let est = polytope::estimate_measure(&u, &hull, 20_000, &mut cell.split(1))?;
            let z = (est.mean - exact).abs() / est.se;
            worst = worst.max(z);
            if z <= 3.0 {
                agree[j] += 1;
            }
        }
    }
    let pass = agree.iter().all(|&a| a == 50);
    Ok((
        pass,
        format!(
            "within 3 SE: N=5 {}/50, N=10 {}/50, N=50 {}/50; max |z|={}",
            agree[0],
            agree[1],
            agree[2],
            g(worst)
        ),
    ))
}

pub fn sweep_config(n: usize, t1: f64, seed: u64, op_cap: f64) -> SweepConfig {
    SweepConfig {
        n,
        rho_grid: (1..=10).map(|k| 0.2 * k as f64 * t1).collect(),
        replicates: 20,
        test_points: 2000,
        delta: 0.25,
        seed,
        op_cap,
    }
}

pub fn threshold_sweep(rng: &mut Stream, op_cap: f64) -> Result<(bool, String)> {
    let u = MeasureSpec::uniform(1.0)?;
    let t1 = uniform_t1()?;
    let mut parts = Vec::new();
    let mut widths = Vec::new();
    let mut pass = true;
    for (k, n) in [10usize, 14].into_iter().enumerate() {
        let cfg = sweep_config(n, t1, rng.split(k as u64).stream_id(), op_cap);
        let grid = match polytope::sweep(&u, &cfg) {
            Ok(grid) => grid,
            Err(Error::BudgetExceeded { required, cap }) => {
                parts.push(format!(
                    "n={n}: not run, N_max*M*R={} exceeds cap {}",
                    g(required),
                    g(cap)
                ));
                pass = false;
                widths.push(None);
                continue;
            }
            Err(e) => return Err(e),
        };
        let (lo, hi) = (grid.rho_hat_low, grid.rho_hat_high);
        if n == 10 {
            let m_low = grid.rows[1].mean;
            let m_high = grid.rows[8].mean;
            let bracket = match (lo, hi) {
                (Some(l), Some(h)) => l < h && l - 0.5 * t1 <= t1 && t1 <= h + 0.5 * t1,
                _ => false,
            };
            pass &= m_low < 0.25 && m_high > 0.75 && bracket;
            parts.push(format!(
                "n=10: mean(0.4 T1)={} mean(1.8 T1)={} rho_hat=[{}, {}]",
                g(m_low),
                g(m_high),
                opt(lo),
                opt(hi)
            ));
        } else {
            parts.push(format!("n=14: rho_hat=[{}, {}]", opt(lo), opt(hi)));
        }
        widths.push(lo.zip(hi).map(|(l, h)| h - l));
    }
    match (widths[0], widths[1]) {
        (Some(w10), Some(w14)) => {
            pass &= w14 < w10;
            parts.push(format!("width n=10 {} n=14 {}", g(w10), g(w14)));
        }
        _ => pass = false,
    }
    Ok((pass, parts.join("; ")))
}

fn opt(x: Option<f64>) -> String {
    x.map(g).unwrap_or_else(|| "null".into())
}

pub fn upper_bound(rng: &mut Stream) -> Result<(bool, String)> {
    let spec = MeasureSpec::uniform(1.0)?;
    let prof = profile(spec.clone())?;
    let t1 = thresholds::constants(&prof)?.t1;
    let n = 8usize;
    let big_n = polytope::vertex_count(0.8 * t1, n)?;
    let r = 0.9 * t1 * n as f64;

    let hulls = 40u64;
    let mut per_hull = Vec::with_capacity(hulls as usize);
    for k in 0..hulls {
        let cell = rng.split(k);
        let hull = HullSample::draw(&spec, n, big_n, cell.seed(), cell.split(0).stream_id())?;
        per_hull.push(polytope::estimate_measure(&spec, &hull, 2500, &mut cell.split(1))?.mean);
    }
    let est = mean_se(&per_hull);
    let row = thresholds::upper_bound_curve(
        &prof,
        n,
        &[r],
        big_n as f64,
        100_000,
        &mut rng.split(hulls),
    )?
    .remove(0);
    let se = (est.se * est.se + row.se * row.se).sqrt();
    let pass = est.mean <= row.total + 3.0 * se;
    Ok((
        pass,
        format!(
            "N={big_n} r={} E[mu(K_N)]={} bound={} (mu(B_r)={} N e^-r={}) SE={}",
            g(r),
            g(est.mean),
            g(row.total),
            g(row.measure),
            g(row.union_term),
            g(se)
        ),
    ))
}
