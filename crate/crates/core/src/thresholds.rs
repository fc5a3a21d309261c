//! Constants governing the threshold for E μ_n(K_N): T₁ = E_μ Λ*, its
//! variance and β = Var/T₁², the volume constant κ, the sublevel sets
//! B_r = {Σ Λ*(x_i) ≤ r} and the bounds built from them.

use serde::Serialize;

use crate::cramer::{CramerProfile, LambdaStarEvaluator};
use crate::error::{Error, Result};
use crate::quad::{integrate, QuadOptions};
use crate::rng::Stream;
use crate::stats::{wilson_interval, Z95};

const CONSTANTS_TOL: f64 = 1e-11;

#[derive(Debug, Clone, Serialize)]
pub struct ThresholdConstants {
    pub t1: f64,
    pub var_star: f64,
    pub beta: f64,
    /// (1/x*)∫₀^{x*} Λ*(x) dx, for compact support only.
    pub kappa_vol: Option<f64>,
    pub admissible: Option<bool>,
    pub warnings: Vec<String>,
}

pub fn constants(profile: &CramerProfile) -> Result<ThresholdConstants> {
    let spec = profile.spec();
    let t1 = profile.integrate_against_measure(|_, ls| ls, CONSTANTS_TOL)?;
    let second = profile.integrate_against_measure(|_, ls| ls * ls, CONSTANTS_TOL)?;
    let var_star = (second - t1 * t1).max(0.0);
    let beta = if t1 > 0.0 {
        var_star / (t1 * t1)
    } else {
        f64::NAN
    };
    let kappa_vol = if spec.x_star().is_finite() {
        let area = profile.integrate_lambda_star_dx(|_, ls| ls, CONSTANTS_TOL)?;
        Some(area / spec.x_star())
    } else {
        None
    };
    let mut warnings = Vec::new();
    match spec.admissible() {
        Some(false) => warnings.push(format!(
            "{} is not admissible; the measure threshold results do not apply",
            spec.label()
        )),
        None => warnings.push(format!(
            "admissibility of {} is not verified (log-concavity unchecked)",
            spec.label()
        )),
        Some(true) => {}
    }
    Ok(ThresholdConstants {
        t1,
        var_star,
        beta,
        kappa_vol,
        admissible: spec.admissible(),
        warnings,
    })
}

/// ∫₀^∞ (1/u - 1/(e^u - 1))² du, the volume constant of the cube written
/// without any Legendre transform.
pub fn cube_kappa_u_integral() -> Result<f64> {
    let g = |u: f64| {
        let d = if u < 1e-3 {
            // 1/u - 1/(e^u - 1) = 1/2 - u/12 + u³/720 - ...
            0.5 - u / 12.0 + u * u * u / 720.0
        } else {
            1.0 / u - 1.0 / u.exp_m1()
        };
        d * d
    };
    const U: f64 = 50.0;
    let body = integrate(
        g,
        &[0.0, 1.0, 5.0, 20.0, U],
        QuadOptions::absolute(1e-14).with_rel(1e-13),
    )?;
    // beyond U the integrand is 1/u² up to terms of order e^{-u}/u
    Ok(body + 1.0 / U)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LevelSetEval {
    pub value: f64,
    pub inside: bool,
}

fn check_point(profile: &CramerProfile, x: &[f64], op: &'static str) -> Result<()> {
    let x_star = profile.spec().x_star();
    for &xi in x {
        let outside = if profile.spec().is_atomic() {
            xi.abs() > x_star
        } else {
            xi.abs() >= x_star
        };
        if !xi.is_finite() || outside {
            return Err(Error::domain(
                op,
                xi,
                format!("coordinate outside the support (-{x_star}, {x_star})"),
            ));
        }
    }
    Ok(())
}

/// Λ*_n(x) = Σ Λ*(x_i) and whether x lies in B_r.
pub fn level_set_log_indicator(profile: &CramerProfile, x: &[f64], r: f64) -> Result<LevelSetEval> {
    check_point(profile, x, "level_set_log_indicator")?;
    let mut value = 0.0;
    for &xi in x {
        value += profile.lambda_star(xi)?;
    }
    Ok(LevelSetEval {
        value,
        inside: value <= r,
    })
}

/// exp(-Λ*_n(x)), an upper bound on the half-space depth of x.
pub fn depth_upper_bound(profile: &CramerProfile, x: &[f64]) -> Result<f64> {
    let eval = level_set_log_indicator(profile, x, f64::INFINITY)?;
    Ok((-eval.value).exp())
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct UpperBoundRow {
    pub r: f64,
    /// Monte Carlo estimate of μ_n(B_r).
    pub measure: f64,
    pub se: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    /// N e^{-r}
    pub union_term: f64,
    pub total: f64,
}

/// μ_n(B_r) + N e^{-r} along `r_grid`, with μ_n(B_r) estimated from `draws`
/// samples of μ_n shared by all r.
pub fn upper_bound_curve(
    profile: &CramerProfile,
    n: usize,
    r_grid: &[f64],
    big_n: f64,
    draws: usize,
    rng: &mut Stream,
) -> Result<Vec<UpperBoundRow>> {
    if n == 0 {
        return Err(Error::invalid("dimension n must be at least 1"));
    }
    if !(big_n > n as f64) {
        return Err(Error::invalid(format!(
            "need N > n, got N = {big_n}, n = {n}"
        )));
    }
    if draws == 0 {
        return Err(Error::invalid("need at least one draw"));
    }
    let sums = sample_lambda_star_sums(profile, n, draws, rng)?;
    r_grid
        .iter()
        .map(|&r| {
            if !(r >= 0.0) {
                return Err(Error::domain("upper_bound_curve", r, "r must be >= 0"));
            }
            let hits = sums.iter().filter(|&&s| s <= r).count();
            let p = hits as f64 / draws as f64;
            let (ci_low, ci_high) = wilson_interval(hits, draws, Z95);
            let union_term = big_n * (-r).exp();
            Ok(UpperBoundRow {
                r,
                measure: p,
                se: (p * (1.0 - p) / draws as f64).sqrt(),
                ci_low,
                ci_high,
                union_term,
                total: p + union_term,
            })
        })
        .collect()
}

/// Λ*_n(X) for `draws` independent X ~ μ_n.
pub fn sample_lambda_star_sums(
    profile: &CramerProfile,
    n: usize,
    draws: usize,
    rng: &mut Stream,
) -> Result<Vec<f64>> {
    let spec = profile.spec();
    let fast = LambdaStarEvaluator::new(profile)?;
    (0..draws)
        .map(|_| {
            let mut s = 0.0;
            for _ in 0..n {
                s += fast.eval(spec.sample(rng))?;
            }
            Ok(s)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct Window {
    pub rho1_lower: f64,
    pub rho2_upper: f64,
    /// √(2β/(nδ)), the relative slack of the lower bound divided by two
    pub zeta_lower: f64,
    /// T₁ε/(3T₁ + 4), the slack used for the upper bound
    pub zeta_upper: f64,
    pub epsilon: f64,
}

/// Sufficient bounds ρ₁ ≥ (1 - √(8β/(nδ)))T₁ and ρ₂ ≤ (1 + ε)T₁.
pub fn theoretical_window(
    consts: &ThresholdConstants,
    n: usize,
    delta: f64,
    epsilon: f64,
) -> Result<Window> {
    if !(delta > 0.0 && delta < 0.5) {
        return Err(Error::domain(
            "theoretical_window",
            delta,
            "delta must lie in (0, 1/2)",
        ));
    }
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::domain(
            "theoretical_window",
            epsilon,
            "epsilon must lie in (0, 1)",
        ));
    }
    if n == 0 {
        return Err(Error::invalid("dimension n must be at least 1"));
    }
    let nf = n as f64;
    if 8.0 * consts.beta / nf >= delta {
        return Err(Error::NotApplicable(format!(
            "8β/n = {} is not below δ = {delta}; the bound needs n > {}",
            8.0 * consts.beta / nf,
            (8.0 * consts.beta / delta).floor()
        )));
    }
    let t1 = consts.t1;
    Ok(Window {
        rho1_lower: (1.0 - (8.0 * consts.beta / (nf * delta)).sqrt()) * t1,
        rho2_upper: (1.0 + epsilon) * t1,
        zeta_lower: (2.0 * consts.beta / (nf * delta)).sqrt(),
        zeta_upper: t1 * epsilon / (3.0 * t1 + 4.0),
        epsilon,
    })
}

/// A point on the boundary of B_r: Dirichlet(1,…,1) shares of r, each
/// coordinate solving Λ*(x_i) = r w_i, with random signs.
pub fn random_boundary_point(
    profile: &CramerProfile,
    n: usize,
    r: f64,
    rng: &mut Stream,
) -> Result<Vec<f64>> {
    let w: Vec<f64> = (0..n).map(|_| rng.exponential()).collect();
    let total: f64 = w.iter().sum();
    w.iter()
        .map(|wi| {
            let x = profile.lambda_star_inverse(r * wi / total)?;
            Ok(x * rng.sign())
        })
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct ChernoffRow {
    pub point: Vec<f64>,
    pub lambda_star_n: f64,
    pub bound: f64,
    pub tail: f64,
    pub se: f64,
    pub pass: bool,
}

/// For a point x, the frequency of ⟨∇Λ*_n(x), X - x⟩ >= 0 over X ~ μ_n.
/// This half-space contains x, so its measure is at most exp(-Λ*_n(x)).
pub fn chernoff_tail(
    profile: &CramerProfile,
    x: &[f64],
    draws: usize,
    rng: &mut Stream,
) -> Result<ChernoffRow> {
    check_point(profile, x, "chernoff_tail")?;
    let mut normal = Vec::with_capacity(x.len());
    let mut lambda_star_n = 0.0;
    for &xi in x {
        let (ls, h) = profile.lambda_star_and_h(xi)?;
        lambda_star_n += ls;
        normal.push(h);
    }
    let offset: f64 = normal.iter().zip(x).map(|(h, xi)| h * xi).sum();
    let spec = profile.spec();
    let mut hits = 0usize;
    for _ in 0..draws {
        let s: f64 = normal.iter().map(|h| h * spec.sample(rng)).sum();
        if s >= offset {
            hits += 1;
        }
    }
    let p = hits as f64 / draws as f64;
    let se = (p * (1.0 - p) / draws as f64).sqrt();
    let bound = (-lambda_star_n).exp();
    Ok(ChernoffRow {
        point: x.to_vec(),
        lambda_star_n,
        bound,
        tail: p,
        se,
        pass: p <= bound + 3.0 * se,
    })
}

/// [`chernoff_tail`] at `points` random boundary points of B_r.
pub fn chernoff_boundary_check(
    profile: &CramerProfile,
    n: usize,
    r: f64,
    points: usize,
    draws: usize,
    rng: &mut Stream,
) -> Result<Vec<ChernoffRow>> {
    if n == 0 || draws == 0 {
        return Err(Error::invalid("need n >= 1 and at least one draw"));
    }
    (0..points)
        .map(|k| {
            let mut child = rng.split(k as u64);
            let x = random_boundary_point(profile, n, r, &mut child)?;
            chernoff_tail(profile, &x, draws, &mut child)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::MeasureSpec;
    use crate::stats::mean_se;

    const UNIFORM_T1: f64 = 0.760_661_401_507_812_6;
    const UNIFORM_VAR: f64 = 0.900_131_322_863_533_9;
    const EXP_T1: f64 = 0.335_567_157_341_987_35;
    const EXP_VAR: f64 = 0.308_015_676_533_105_97;

    fn profile(spec: MeasureSpec) -> CramerProfile {
        CramerProfile::new(spec).unwrap()
    }

    #[test]
    fn rademacher_constants() {
        let c = constants(&profile(MeasureSpec::rademacher())).unwrap();
        assert!((c.kappa_vol.unwrap() - (std::f64::consts::LN_2 - 0.5)).abs() < 1e-12);
        assert!((c.t1 - std::f64::consts::LN_2).abs() < 1e-15);
        assert_eq!(c.var_star, 0.0);
        assert_eq!(c.admissible, Some(false));
        assert!(!c.warnings.is_empty());
    }

    #[test]
    fn uniform_constants_match_oracle() {
        let c = constants(&profile(MeasureSpec::uniform(1.0).unwrap())).unwrap();
        let u = cube_kappa_u_integral().unwrap();
        assert!((u - UNIFORM_T1).abs() < 1e-12, "{u}");
        // the clip at 1 - 1e-12 drops about 3e-11 of the mass of Λ*
        assert!((c.t1 - UNIFORM_T1).abs() < 1e-9, "{}", c.t1);
        assert!((c.kappa_vol.unwrap() - c.t1).abs() < 1e-9);
        assert!((c.var_star - UNIFORM_VAR).abs() < 1e-8, "{}", c.var_star);
        assert!(c.warnings.is_empty());
    }

    #[test]
    fn exponential_and_gaussian_constants() {
        let c = constants(&profile(MeasureSpec::sym_exponential())).unwrap();
        assert!((c.t1 - EXP_T1).abs() < 1e-10, "{}", c.t1);
        assert!((c.var_star - EXP_VAR).abs() < 1e-9, "{}", c.var_star);
        assert!(c.kappa_vol.is_none());
        // Λ* = x² for ν₂ and E X² = 1/2, Var X² = 1/2
        let g = constants(&profile(MeasureSpec::pnorm(2.0).unwrap())).unwrap();
        assert!((g.t1 - 0.5).abs() < 1e-10);
        assert!((g.var_star - 0.5).abs() < 1e-9);
        assert!((g.beta - 2.0).abs() < 1e-8);
    }

    #[test]
    fn constants_agree_with_plain_monte_carlo() {
        let mut rng = Stream::new(2024, 3);
        for spec in [
            MeasureSpec::uniform(1.0).unwrap(),
            MeasureSpec::sym_exponential(),
            MeasureSpec::pnorm(1.5).unwrap(),
            MeasureSpec::pnorm(3.0).unwrap(),
        ] {
            let p = profile(spec.clone());
            let c = constants(&p).unwrap();
            let vals = sample_lambda_star_sums(&p, 1, 1_000_000, &mut rng).unwrap();
            let m = mean_se(&vals);
            assert!((m.mean - c.t1).abs() < 4.0 * m.se, "{} T1", spec.label());
            let sq: Vec<f64> = vals.iter().map(|v| (v - c.t1).powi(2)).collect();
            let v = mean_se(&sq);
            assert!(
                (v.mean - c.var_star).abs() < 4.0 * v.se,
                "{} Var",
                spec.label()
            );
        }
    }

    #[test]
    fn beta_scales_as_one_over_n() {
        let p = profile(MeasureSpec::uniform(1.0).unwrap());
        let c = constants(&p).unwrap();
        let mut rng = Stream::new(5, 5);
        let sums = sample_lambda_star_sums(&p, 3, 300_000, &mut rng).unwrap();
        let m = mean_se(&sums);
        let sq: Vec<f64> = sums.iter().map(|s| (s - m.mean).powi(2)).collect();
        let var = mean_se(&sq);
        let beta3 = var.mean / (m.mean * m.mean);
        // relative error of the ratio is dominated by the variance estimate
        let tol = 4.0 * var.se / (m.mean * m.mean) + 8.0 * beta3 * m.se / m.mean;
        assert!(
            (beta3 - c.beta / 3.0).abs() < tol,
            "{beta3} vs {}",
            c.beta / 3.0
        );
    }

    #[test]
    fn level_set_examples() {
        let e = profile(MeasureSpec::sym_exponential());
        let z = level_set_log_indicator(&e, &[0.0; 4], 0.0).unwrap();
        assert_eq!(z.value, 0.0);
        assert!(z.inside);
        let r = 2.0;
        let x = e.lambda_star_inverse(r / 4.0).unwrap();
        let b = level_set_log_indicator(&e, &[x, -x, x, x], r).unwrap();
        assert!((b.value - r).abs() < 1e-11);
        let u = profile(MeasureSpec::uniform(1.0).unwrap());
        assert!(matches!(
            level_set_log_indicator(&u, &[0.2, 1.5], 1.0),
            Err(Error::Domain { .. })
        ));
    }

    #[test]
    fn depth_bound_examples() {
        let u = profile(MeasureSpec::uniform(1.0).unwrap());
        assert_eq!(depth_upper_bound(&u, &[0.0, 0.0, 0.0]).unwrap(), 1.0);
        let d = depth_upper_bound(&u, &[0.5, 0.5]).unwrap();
        assert!((d - 0.441_632_301_224_467_3).abs() < 1e-12, "{d}");
        let e = profile(MeasureSpec::sym_exponential());
        let x: f64 = 2.5;
        let r = (1.0 + x * x).sqrt();
        let closed = r - 1.0 - ((r + 1.0) / 2.0).ln();
        assert!((depth_upper_bound(&e, &[x]).unwrap() - (-closed).exp()).abs() < 1e-12);
        // product structure
        let a = depth_upper_bound(&e, &[0.3, -1.7]).unwrap();
        let b = depth_upper_bound(&e, &[0.3]).unwrap() * depth_upper_bound(&e, &[-1.7]).unwrap();
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn upper_bound_curve_examples() {
        let u = profile(MeasureSpec::uniform(1.0).unwrap());
        let mut rng = Stream::new(9, 0);
        let n = 5;
        let c = constants(&u).unwrap();
        let zeta = 0.5;
        let grid = [0.0, (1.0 - zeta) * c.t1 * n as f64, c.t1 * n as f64, 200.0];
        let rows = upper_bound_curve(&u, n, &grid, 1000.0, 100_000, &mut rng).unwrap();
        assert_eq!(rows[0].measure, 0.0);
        assert_eq!(rows[0].total, 1000.0);
        // Chebyshev: μ_n(B_{(1-ζ)T_n}) <= β/(ζ² n)
        assert!(rows[1].measure <= c.beta / (zeta * zeta * n as f64));
        // the sum concentrates around T_n
        assert!(
            rows[2].measure > 0.3 && rows[2].measure < 0.7,
            "{}",
            rows[2].measure
        );
        assert_eq!(rows[3].measure, 1.0);
        assert!(upper_bound_curve(&u, n, &grid, 5.0, 10, &mut rng).is_err());
    }

    #[test]
    fn window_examples() {
        let c = constants(&profile(MeasureSpec::uniform(1.0).unwrap())).unwrap();
        let w = theoretical_window(&c, 100, 0.25, 0.1).unwrap();
        let want = (1.0 - (8.0 * c.beta / 25.0).sqrt()) * c.t1;
        assert!((w.rho1_lower - want).abs() < 1e-15);
        assert!((w.rho2_upper - 1.1 * c.t1).abs() < 1e-15);
        assert!(matches!(
            theoretical_window(&c, 10, 0.25, 0.1),
            Err(Error::NotApplicable(_))
        ));
        let tight = ThresholdConstants {
            beta: 1e-30,
            ..c.clone()
        };
        let w = theoretical_window(&tight, 10, 0.25, 1e-12).unwrap();
        assert!((w.rho1_lower - c.t1).abs() < 1e-12 && (w.rho2_upper - c.t1).abs() < 1e-11);
    }

    #[test]
    fn boundary_points_lie_on_the_level_set() {
        let mut rng = Stream::new(1, 1);
        for spec in [
            MeasureSpec::uniform(1.0).unwrap(),
            MeasureSpec::sym_exponential(),
        ] {
            let p = profile(spec);
            for _ in 0..10 {
                let x = random_boundary_point(&p, 6, 3.0, &mut rng).unwrap();
                let v = level_set_log_indicator(&p, &x, 3.0).unwrap();
                assert!((v.value - 3.0).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn chernoff_direction_check() {
        let mut rng = Stream::new(8, 2);
        for spec in [
            MeasureSpec::uniform(1.0).unwrap(),
            MeasureSpec::sym_exponential(),
        ] {
            let p = profile(spec);
            let rows = chernoff_boundary_check(&p, 4, 3.0, 5, 20_000, &mut rng).unwrap();
            for row in rows {
                assert!((row.bound - (-3.0f64).exp()).abs() < 1e-10);
                assert!(row.pass, "{row:?}");
            }
        }
    }
}
