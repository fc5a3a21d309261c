//! Log-MGF Λ, its derivatives, the inverse h = (Λ')⁻¹ and the Legendre
//! (Cramér) transform Λ* of an even measure.
//!
//! Λ'(t) and Λ''(t) are the mean and variance of the exponentially tilted
//! measure e^{tx - Λ(t)} dμ(x). Without a closed form they are obtained by one
//! vector-valued quadrature of the tilted density, shifted so its peak is 1.
//! Λ*(x) = x h(x) - Λ(h(x)), where h(x) solves Λ'(t) = x by Newton's method
//! with a bisection fallback inside a bracket taken from a cached t-grid.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::measures::{ClosedLogMgf, MeasureKind, MeasureSpec};
use crate::quad::{integrate, integrate_vec, QuadOptions};
use crate::rng::Stream;
use crate::stats::{pairwise_sum, MeanSe};

/// ln(1e-18): integrand level at which infinite supports are truncated.
const LN_TRUNCATION: f64 = -41.446_531_673_892_82;
/// Largest tail log-measure m(x) for which Λ* is evaluated.
pub const MAX_TAIL_LOG: f64 = 60.0;
/// Relative clip below x* for compactly supported measures.
pub const COMPACT_CLIP: f64 = 1e-12;
/// Clip for the numeric Legendre transform of the two-point measure.
pub const RADEMACHER_CLIP: f64 = 1e-6;
/// Below this value Λ* is treated as zero when forming m/Λ*.
pub const RATIO_FLOOR: f64 = 1e-12;

/// Λ and its first two derivatives at one t.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MgfPoint {
    pub t: f64,
    pub value: f64,
    pub slope: f64,
    pub curvature: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LogMgfMethod {
    /// Closed form when the measure has one, quadrature otherwise.
    Auto,
    /// Always integrate the tilted density (atoms are summed).
    Quadrature,
}

#[derive(Debug, Clone)]
pub struct ProfileOptions {
    pub method: LogMgfMethod,
    pub tol_newton: f64,
    pub tol_quad: f64,
    /// Explicit t-grid; generated from the measure when `None`.
    pub t_grid: Option<Vec<f64>>,
}

impl Default for ProfileOptions {
    fn default() -> Self {
        ProfileOptions {
            method: LogMgfMethod::Auto,
            tol_newton: 1e-10,
            tol_quad: 1e-12,
            t_grid: None,
        }
    }
}

/// Result of a single Cramér transform evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CramerEval {
    pub x: f64,
    pub lambda_star: f64,
    pub h_of_x: f64,
    /// m(|x|): tail log-measure beyond |x| on the side of x.
    pub tail_m: f64,
    /// tail_m / lambda_star, NaN when lambda_star < 1e-12.
    pub ratio: f64,
}

/// Tabulated and on-demand evaluations of Λ, Λ', Λ'', h and Λ* for one
/// measure. Immutable after [`CramerProfile::build`].
#[derive(Debug, Clone)]
pub struct CramerProfile {
    spec: MeasureSpec,
    method: LogMgfMethod,
    tol_newton: f64,
    tol_quad: f64,
    grid: Vec<MgfPoint>,
    x_max_eval: f64,
}

impl CramerProfile {
    pub fn new(spec: MeasureSpec) -> Result<Self> {
        Self::build(spec, ProfileOptions::default())
    }

    pub fn build(spec: MeasureSpec, opts: ProfileOptions) -> Result<Self> {
        if !(opts.tol_newton > 0.0 && opts.tol_quad > 0.0) {
            return Err(Error::invalid("tolerances must be positive"));
        }
        let mut profile = CramerProfile {
            spec,
            method: opts.method,
            tol_newton: opts.tol_newton,
            tol_quad: opts.tol_quad,
            grid: Vec::new(),
            x_max_eval: 0.0,
        };
        profile.x_max_eval = profile.find_x_max_eval()?;
        let ts = match opts.t_grid {
            Some(ts) => {
                let t_star = profile.spec.t_star();
                if ts.is_empty() {
                    return Err(Error::invalid("t-grid is empty"));
                }
                for w in ts.windows(2) {
                    if !(w[1] > w[0]) {
                        return Err(Error::invalid("t-grid must be strictly increasing"));
                    }
                }
                if ts.iter().any(|t| !t.is_finite() || t.abs() >= t_star) {
                    return Err(Error::invalid(format!(
                        "t-grid must lie inside (-{t_star}, {t_star})"
                    )));
                }
                ts
            }
            None => profile.default_t_grid()?,
        };
        profile.grid = ts
            .iter()
            .map(|&t| profile.mgf_point(t))
            .collect::<Result<_>>()?;
        Ok(profile)
    }

    pub fn spec(&self) -> &MeasureSpec {
        &self.spec
    }

    pub fn method(&self) -> LogMgfMethod {
        self.method
    }

    /// Largest |x| accepted by [`h_inverse`](Self::h_inverse) and
    /// [`cramer_transform`](Self::cramer_transform).
    pub fn x_max_eval(&self) -> f64 {
        self.x_max_eval
    }

    pub fn tol_newton(&self) -> f64 {
        self.tol_newton
    }

    pub fn tol_quad(&self) -> f64 {
        self.tol_quad
    }

    pub fn t_grid(&self) -> &[MgfPoint] {
        &self.grid
    }

    fn uses_closed_form(&self) -> Option<ClosedLogMgf> {
        match self.method {
            LogMgfMethod::Auto => self.spec.closed_log_mgf(),
            LogMgfMethod::Quadrature => None,
        }
    }

    fn find_x_max_eval(&self) -> Result<f64> {
        if self.spec.is_atomic() {
            return Ok(self.spec.x_star() * (1.0 - RADEMACHER_CLIP));
        }
        let x_star = self.spec.x_star();
        let m = |x: f64| self.spec.tail_log(x);
        let (mut lo, mut hi) = if x_star.is_finite() {
            let clip = x_star * (1.0 - COMPACT_CLIP);
            if m(clip)? <= MAX_TAIL_LOG {
                return Ok(clip);
            }
            (0.0, clip)
        } else {
            let mut hi = 1.0;
            while m(hi)? <= MAX_TAIL_LOG {
                hi *= 2.0;
            }
            (0.0, hi)
        };
        while hi - lo > 1e-14 * hi {
            let mid = 0.5 * (lo + hi);
            if m(mid)? <= MAX_TAIL_LOG {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(lo)
    }

    fn default_t_grid(&self) -> Result<Vec<f64>> {
        let t_star = self.spec.t_star();
        let mut pos = Vec::new();
        let mut t = 0.0;
        loop {
            let next = if t < 0.3 { t + 0.02 } else { t * 1.15 };
            let next = if t_star.is_finite() && next > 0.5 * (t + t_star) {
                t_star - 0.8 * (t_star - t)
            } else {
                next
            };
            if !(next > t) || next >= t_star {
                break;
            }
            t = next;
            pos.push(t);
            let p = self.mgf_point(t)?;
            if p.slope >= self.x_max_eval || pos.len() >= 600 {
                break;
            }
        }
        let mut ts: Vec<f64> = pos.iter().rev().map(|t| -t).collect();
        ts.push(0.0);
        ts.extend(pos);
        Ok(ts)
    }

    fn check_t(&self, t: f64) -> Result<()> {
        let t_star = self.spec.t_star();
        if !t.is_finite() || t.abs() >= t_star {
            return Err(Error::domain(
                "log_mgf",
                t,
                format!("requires |t| < t* = {t_star}"),
            ));
        }
        Ok(())
    }

    /// Λ(t) = ln E e^{tX}.
    pub fn log_mgf(&self, t: f64) -> Result<f64> {
        Ok(self.mgf_point(t)?.value)
    }

    /// (Λ'(t), Λ''(t)): mean and variance of the tilted measure.
    pub fn log_mgf_derivs(&self, t: f64) -> Result<(f64, f64)> {
        let p = self.mgf_point(t)?;
        Ok((p.slope, p.curvature))
    }

    pub fn mgf_point(&self, t: f64) -> Result<MgfPoint> {
        self.check_t(t)?;
        let tilt = self.tilt(t.abs())?;
        if t == 0.0 {
            return Ok(MgfPoint {
                t,
                value: 0.0,
                slope: 0.0,
                curvature: tilt.curvature,
            });
        }
        Ok(MgfPoint {
            t,
            value: tilt.value(t.abs()),
            slope: tilt.slope().copysign(t),
            curvature: tilt.curvature,
        })
    }

    fn tilt(&self, t: f64) -> Result<Tilt> {
        match self.uses_closed_form() {
            Some(form) => Ok(closed_tilt(form, t)),
            None => self.quadrature_tilt(t),
        }
    }

    fn quadrature_tilt(&self, t: f64) -> Result<Tilt> {
        if self.spec.is_atomic() {
            let atoms = self.spec.atoms();
            let anchor = atoms
                .iter()
                .map(|&(x, _)| x)
                .fold(f64::NEG_INFINITY, f64::max);
            let w: Vec<f64> = atoms
                .iter()
                .map(|&(x, p)| p * (t * (x - anchor)).exp())
                .collect();
            let z: f64 = w.iter().sum();
            let gap = atoms
                .iter()
                .zip(&w)
                .map(|(&(x, _), w)| (anchor - x) * w)
                .sum::<f64>()
                / z;
            let curvature = atoms
                .iter()
                .zip(&w)
                .map(|(&(x, _), w)| (anchor - x - gap).powi(2) * w)
                .sum::<f64>()
                / z;
            return Ok(Tilt {
                anchor,
                rest: z.ln(),
                gap,
                curvature,
            });
        }
        let spec = &self.spec;
        let (x0, scale) = self.tilted_mode(t);
        let ln_f0 = spec.log_density(x0);
        // log of the tilted density relative to its value at x0
        let phi = |x: f64| t * (x - x0) + spec.log_density(x) - ln_f0;
        let x_star = spec.x_star();

        let mut breaks: Vec<f64> = Vec::new();
        let (lo, hi) = if x_star.is_finite() {
            (-x_star, x_star)
        } else {
            let reach = |dir: f64| {
                let mut y = (2.0 * x0.abs()).max(1.0);
                while phi(x0 + dir * y) > LN_TRUNCATION {
                    y *= 2.0;
                }
                x0 + dir * y
            };
            (reach(-1.0), reach(1.0))
        };
        breaks.push(lo);
        breaks.push(hi);
        for &node in &spec.half_line_breaks() {
            if node.is_finite() {
                breaks.push(node);
                breaks.push(-node);
            }
        }
        breaks.push(x0);
        for k in [0.5, 4.0, 40.0] {
            breaks.push(x0 - k * scale);
            breaks.push(x0 + k * scale);
        }
        breaks.retain(|b| *b >= lo && *b <= hi);
        breaks.sort_by(f64::total_cmp);
        breaks.dedup();

        let tol = self.tol_quad;
        let r = integrate_vec(
            |x| {
                let w = phi(x).exp();
                let d = x - x0;
                [w, d * w, d * d * w]
            },
            &breaks,
            [tol, tol, tol],
            QuadOptions::absolute(tol).with_rel(1e-13),
        )?;
        let [j0, j1, j2] = r.value;
        if !(j0 > 0.0) {
            return Err(Error::QuadratureFailure { tol, err: f64::NAN });
        }
        let shift = j1 / j0;
        Ok(Tilt {
            anchor: x0,
            rest: ln_f0 + j0.ln(),
            gap: -shift,
            curvature: (j2 / j0 - shift * shift).max(0.0),
        })
    }

    /// Mode of the tilted density for t >= 0 and a length scale around it.
    fn tilted_mode(&self, t: f64) -> (f64, f64) {
        match self.spec.kind() {
            MeasureKind::Rademacher => (1.0, 1.0),
            MeasureKind::Uniform { half_width } => {
                if t > 0.0 {
                    (*half_width, (1.0 / t).min(*half_width))
                } else {
                    (0.0, *half_width)
                }
            }
            MeasureKind::SymExponential => (0.0, 1.0 / (1.0 - t)),
            MeasureKind::PNorm { p } => {
                let p = *p;
                if p == 1.0 {
                    (0.0, 1.0 / (1.0 - t))
                } else if t == 0.0 {
                    (0.0, 1.0)
                } else {
                    let x0 = (t / p).powf(1.0 / (p - 1.0));
                    let curv = p * (p - 1.0) * x0.powf(p - 2.0);
                    (x0, 1.0 / curv.sqrt())
                }
            }
            MeasureKind::Tabulated(tab) => {
                let x_star = tab.x_star();
                let mut best = (0.0, f64::NEG_INFINITY);
                let mut consider = |x: f64, f: f64| {
                    if f > 0.0 {
                        let v = t * x + f.ln();
                        if v > best.1 {
                            best = (x, v);
                        }
                    }
                };
                // t x + ln f(x) on a linear piece peaks where f = -slope/t
                for (a, b, fa, fb) in tab.pieces() {
                    consider(a, fa);
                    consider(b, fb);
                    let slope = (fb - fa) / (b - a);
                    if t != 0.0 && slope != 0.0 {
                        let x = a + (-slope / t - fa) / slope;
                        if x > a && x < b {
                            consider(x, fa + slope * (x - a));
                        }
                    }
                }
                let scale = if t > 0.0 {
                    (1.0 / t).min(x_star)
                } else {
                    x_star
                };
                (best.0, scale)
            }
        }
    }

    /// h(x) = (Λ')⁻¹(x) for |x| <= x_max_eval.
    pub fn h_inverse(&self, x: f64) -> Result<f64> {
        self.check_x(x, "h_inverse")?;
        Ok(self.solve_h(x, None)?.0.copysign(x))
    }

    fn check_x(&self, x: f64, op: &'static str) -> Result<()> {
        if !(x.abs() <= self.x_max_eval) {
            return Err(Error::domain(
                op,
                x,
                format!("requires |x| <= x_max_eval = {}", self.x_max_eval),
            ));
        }
        Ok(())
    }

    /// Newton on Λ'(t) = |x| with a bisection fallback. Returns h(|x|) >= 0
    /// and Λ at that point in anchored form.
    fn solve_h(&self, x: f64, hint: Option<f64>) -> Result<(f64, Tilt)> {
        let ax = x.abs();
        if ax == 0.0 {
            return Ok((0.0, self.tilt(0.0)?));
        }
        let t_star = self.spec.t_star();
        let goal = self.tol_newton * ax.max(1.0);

        // bracket from the cached grid (t >= 0 part)
        let pos_start = self.grid.partition_point(|p| p.t < 0.0);
        let pos = &self.grid[pos_start..];
        let k = pos.partition_point(|p| p.slope <= ax);
        let mut lo = if k > 0 { pos[k - 1].t.max(0.0) } else { 0.0 };
        let mut hi = if k < pos.len() {
            pos[k].t
        } else {
            f64::INFINITY
        };
        let mut t = match hint {
            Some(h) if h > lo && h < hi => h,
            _ if k > 0 && k < pos.len() => {
                let (a, b) = (&pos[k - 1], &pos[k]);
                let w = (ax - a.slope) / (b.slope - a.slope);
                a.t + w * (b.t - a.t)
            }
            _ if hi.is_finite() => 0.5 * (lo + hi),
            _ => next_above(lo, t_star),
        };

        const MAX_ITER: usize = 300;
        let mut best: Option<(f64, f64, Tilt)> = None;
        for _ in 0..MAX_ITER {
            let tilt = self.tilt(t)?;
            // Λ'(t) - |x|, formed from the gap to the anchor so it stays
            // accurate when |x| sits next to the edge of the support
            let f = (tilt.anchor - ax) - tilt.gap;
            if best.as_ref().is_none_or(|b| f.abs() < b.1) {
                best = Some((t, f.abs(), tilt));
            }
            let step = f / tilt.curvature;
            if f.abs() <= goal && (step.abs() <= 1e-12 * t || f.abs() <= 1e-15 * ax.max(1.0)) {
                return Ok((t, tilt));
            }
            if f < 0.0 {
                lo = t;
            } else {
                hi = t;
            }
            if hi.is_finite() && hi - lo <= 4.0 * f64::EPSILON * hi {
                break;
            }
            let newton = t - step;
            t = if newton > lo && newton < hi && newton < t_star && newton.is_finite() {
                newton
            } else if hi.is_finite() {
                0.5 * (lo + hi)
            } else {
                next_above(lo, t_star)
            };
        }
        match best {
            Some((t, err, tilt)) if err <= goal => Ok((t, tilt)),
            _ => Err(Error::ConvergenceFailure {
                op: "h_inverse",
                target: x,
                iterations: MAX_ITER,
            }),
        }
    }

    /// Λ*(x) for any real x: the closed form for the two-point measure,
    /// x h(x) - Λ(h(x)) inside the support and +inf outside it. Unlike
    /// [`cramer_transform`](Self::cramer_transform) this does not enforce the
    /// x_max_eval clip; it is meant for Monte Carlo over draws of μ.
    pub fn lambda_star(&self, x: f64) -> Result<f64> {
        self.lambda_star_with(x, None).map(|(v, _)| v)
    }

    /// (Λ*(x), h(x)) with the same conventions as [`lambda_star`](Self::lambda_star).
    pub fn lambda_star_and_h(&self, x: f64) -> Result<(f64, f64)> {
        self.lambda_star_with(x, None)
    }

    fn lambda_star_with(&self, x: f64, hint: Option<f64>) -> Result<(f64, f64)> {
        if !x.is_finite() {
            return Err(Error::domain("lambda_star", x, "x must be finite"));
        }
        let ax = x.abs();
        if self.spec.has_closed_lambda_star() {
            // ½(1+x)ln(1+x) + ½(1-x)ln(1-x), continuous up to |x| = 1
            if ax > 1.0 {
                return Ok((f64::INFINITY, f64::INFINITY.copysign(x)));
            }
            let xlogx = |y: f64| if y == 0.0 { 0.0 } else { y * y.ln() };
            let v = 0.5 * (xlogx(1.0 + ax) + xlogx(1.0 - ax));
            return Ok((v, ax.atanh().copysign(x)));
        }
        if ax >= self.spec.x_star() {
            return Ok((f64::INFINITY, f64::INFINITY.copysign(x)));
        }
        if ax == 0.0 {
            return Ok((0.0, 0.0));
        }
        let (h, tilt) = self.solve_h(ax, hint.map(f64::abs))?;
        let v = ((ax - tilt.anchor) * h - tilt.rest).max(0.0);
        Ok((v, h.copysign(x)))
    }

    /// Λ*(x) = x h(x) - Λ(h(x)) with m(|x|) and the ratio m/Λ*.
    pub fn cramer_transform(&self, x: f64) -> Result<CramerEval> {
        self.check_x(x, "cramer_transform")?;
        self.eval_with_hint(x, None)
    }

    fn eval_with_hint(&self, x: f64, hint: Option<f64>) -> Result<CramerEval> {
        let (lambda_star, h) = self.lambda_star_with(x, hint)?;
        let tail_m = self.spec.tail_log(x.abs())?;
        let ratio = if lambda_star < RATIO_FLOOR {
            f64::NAN
        } else {
            tail_m / lambda_star
        };
        Ok(CramerEval {
            x,
            lambda_star,
            h_of_x: h,
            tail_m,
            ratio,
        })
    }

    /// Evaluate the Λ*-condition ratio m(x)/Λ*(x) along an increasing grid in
    /// (0, x_max_eval], warm-starting each root solve from the previous h.
    pub fn lambda_star_condition_scan(&self, x_grid: &[f64]) -> Result<Vec<CramerEval>> {
        for w in x_grid.windows(2) {
            if !(w[1] > w[0]) {
                return Err(Error::invalid("x-grid must be strictly increasing"));
            }
        }
        let mut out = Vec::with_capacity(x_grid.len());
        let mut hint = None;
        for &x in x_grid {
            if !(x > 0.0) {
                return Err(Error::domain(
                    "lambda_star_condition_scan",
                    x,
                    "grid must lie in (0, x_max_eval]",
                ));
            }
            self.check_x(x, "lambda_star_condition_scan")?;
            let e = self.eval_with_hint(x, hint)?;
            hint = Some(e.h_of_x);
            out.push(e);
        }
        Ok(out)
    }

    /// The x >= 0 with Λ*(x) = level.
    pub fn lambda_star_inverse(&self, level: f64) -> Result<f64> {
        if !(level >= 0.0 && level.is_finite()) {
            return Err(Error::domain(
                "lambda_star_inverse",
                level,
                "level must be finite and >= 0",
            ));
        }
        if level == 0.0 {
            return Ok(0.0);
        }
        let x_star = self.spec.x_star();
        let sup = if self.spec.has_closed_lambda_star() {
            self.lambda_star(x_star)?
        } else {
            f64::INFINITY
        };
        if level >= sup {
            return Err(Error::domain(
                "lambda_star_inverse",
                level,
                format!("Λ* stays below {sup} on the support"),
            ));
        }
        let mut lo = 0.0;
        let mut hi = if x_star.is_finite() {
            x_star
        } else {
            let mut b = 1.0;
            while self.lambda_star(b)? < level {
                lo = b;
                b *= 2.0;
            }
            b
        };
        let goal = 1e-12 * level.max(1.0);
        let mut x = 0.5 * (lo + hi);
        let mut hint = None;
        for _ in 0..300 {
            let (v, h) = self.lambda_star_with(x, hint)?;
            hint = Some(h);
            let f = v - level;
            if f.abs() <= goal {
                return Ok(x);
            }
            if f < 0.0 {
                lo = x;
            } else {
                hi = x;
            }
            if hi - lo <= 4.0 * f64::EPSILON * hi {
                return Ok(x);
            }
            let newton = x - f / h;
            x = if newton > lo && newton < hi && h > 0.0 {
                newton
            } else {
                0.5 * (lo + hi)
            };
        }
        Err(Error::ConvergenceFailure {
            op: "lambda_star_inverse",
            target: level,
            iterations: 300,
        })
    }

    /// ∫ g(x, Λ*(x)) dμ(x) over [-x_max_eval, x_max_eval] for g even in x;
    /// atomic measures sum over atoms.
    pub fn integrate_against_measure<G>(&self, g: G, abs_tol: f64) -> Result<f64>
    where
        G: Fn(f64, f64) -> f64,
    {
        if self.spec.is_atomic() {
            let mut s = 0.0;
            for &(x, p) in self.spec.atoms() {
                s += p * g(x, self.lambda_star(x)?);
            }
            return Ok(s);
        }
        let half = self.integrate_half_line(
            |x, ls| g(x, ls) * self.spec.density(x).unwrap_or(0.0),
            self.x_max_eval,
            abs_tol / 2.0,
        )?;
        Ok(2.0 * half)
    }

    /// ∫₀^{x_end} g(x, Λ*(x)) dx for compactly supported measures, where
    /// x_end is x* when Λ* has a closed form and x_max_eval otherwise.
    pub fn integrate_lambda_star_dx<G>(&self, g: G, abs_tol: f64) -> Result<f64>
    where
        G: Fn(f64, f64) -> f64,
    {
        let x_star = self.spec.x_star();
        if !x_star.is_finite() {
            return Err(Error::invalid(format!(
                "{} has unbounded support",
                self.spec.label()
            )));
        }
        let x_end = if self.spec.has_closed_lambda_star() {
            x_star
        } else {
            self.x_max_eval
        };
        self.integrate_half_line(g, x_end, abs_tol)
    }

    fn integrate_half_line<G>(&self, g: G, x_end: f64, abs_tol: f64) -> Result<f64>
    where
        G: Fn(f64, f64) -> f64,
    {
        let failed = std::cell::Cell::new(None);
        let integrand = |x: f64| -> f64 {
            match self.lambda_star(x) {
                Ok(ls) => g(x, ls),
                Err(e) => {
                    if failed.take().is_none() {
                        failed.set(Some(e));
                    }
                    0.0
                }
            }
        };
        let mut breaks: Vec<f64> = self
            .spec
            .half_line_breaks()
            .into_iter()
            .filter(|b| b.is_finite() && *b < x_end)
            .collect();
        let x_star = self.spec.x_star();
        let opts = QuadOptions::absolute(abs_tol).with_rel(1e-13);
        let total = if x_star.is_finite() && x_end < x_star {
            // the stretch next to x* in the variable u with x = x* - (x* - cut)e^{-u},
            // which flattens the logarithmic growth of Λ* at the endpoint
            let cut = breaks.iter().cloned().fold(0.5 * x_star, f64::max);
            breaks.retain(|b| *b < cut);
            breaks.push(cut);
            let inner = if breaks.len() >= 2 {
                integrate(integrand, &breaks, opts)?
            } else {
                0.0
            };
            let width = x_star - cut;
            let u_end = (width / (x_star - x_end)).ln();
            let outer = integrate(
                |u: f64| {
                    let gap = width * (-u).exp();
                    integrand(x_star - gap) * gap
                },
                &[0.0, u_end.min(1.0), u_end.min(5.0), u_end],
                opts,
            )?;
            inner + outer
        } else {
            for extra in [1.0, 4.0, 16.0] {
                if extra < x_end {
                    breaks.push(extra);
                }
            }
            breaks.push(x_end);
            breaks.sort_by(f64::total_cmp);
            breaks.dedup();
            integrate(integrand, &breaks, opts)?
        };
        if let Some(e) = failed.take() {
            return Err(e);
        }
        Ok(total)
    }

    /// ∫ e^{Λ*(x)/2} dμ(x) over the clipped domain; bounded by 4 for
    /// admissible measures.
    pub fn exp_half_lambda_star_integral(&self) -> Result<f64> {
        if self.spec.is_atomic() {
            return Err(Error::AtomicMeasure(self.spec.label()));
        }
        if self.grid.len() < 2 {
            return Err(Error::invalid(
                "evaluation grid must contain at least two points",
            ));
        }
        self.integrate_against_measure(|_, ls| (0.5 * ls).exp(), 1e-10)
    }

    /// Self-normalised importance-sampling estimate of the tilted mean
    /// E_t(X), which equals Λ'(t). Continuous measures use a Laplace proposal
    /// centred at Λ'(t) with scale 1.5·sqrt(Λ''(t)), whose tails dominate the
    /// tilted density; atomic measures reweight draws of μ itself.
    pub fn tilted_mean_mc(&self, t: f64, draws: usize, rng: &mut Stream) -> Result<MeanSe> {
        let point = self.mgf_point(t)?;
        if draws < 2 {
            return Err(Error::invalid("need at least two draws"));
        }
        let (xs, log_w): (Vec<f64>, Vec<f64>) = if self.spec.is_atomic() {
            (0..draws)
                .map(|_| {
                    let x = self.spec.sample(rng);
                    (x, t * x)
                })
                .unzip()
        } else {
            let center = point.slope;
            let scale = 1.5 * point.curvature.sqrt();
            (0..draws)
                .map(|_| {
                    let x = center + scale * rng.laplace();
                    let log_q = -((x - center).abs() / scale) - (2.0 * scale).ln();
                    (x, t * x + self.spec.log_density(x) - log_q)
                })
                .unzip()
        };
        let c = log_w.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let w: Vec<f64> = log_w.iter().map(|l| (l - c).exp()).collect();
        let sw = pairwise_sum(&w);
        let wx: Vec<f64> = w.iter().zip(&xs).map(|(w, x)| w * x).collect();
        let mean = pairwise_sum(&wx) / sw;
        let dev: Vec<f64> = w
            .iter()
            .zip(&xs)
            .map(|(w, x)| (w * (x - mean)).powi(2))
            .collect();
        let se = pairwise_sum(&dev).sqrt() / sw;
        Ok(MeanSe {
            mean,
            se,
            count: draws,
        })
    }
}

/// Fast Λ* for Monte Carlo over draws of μ. Measures whose log-MGF needs
/// quadrature get a cubic Hermite table on [0, x_max_eval] with the exact
/// slope h at each node; the rest evaluate the profile directly.
#[derive(Debug, Clone)]
pub struct LambdaStarEvaluator<'a> {
    profile: &'a CramerProfile,
    table: Option<HermiteTable>,
}

#[derive(Debug, Clone)]
struct HermiteTable {
    step: f64,
    values: Vec<f64>,
    slopes: Vec<f64>,
}

const TABLE_NODES: usize = 4096;

impl<'a> LambdaStarEvaluator<'a> {
    pub fn new(profile: &'a CramerProfile) -> Result<Self> {
        let spec = profile.spec();
        let needs_table = profile.uses_closed_form().is_none()
            && !spec.has_closed_lambda_star()
            && !spec.x_star().is_finite();
        let table = if needs_table {
            let step = profile.x_max_eval() / (TABLE_NODES - 1) as f64;
            let mut values = Vec::with_capacity(TABLE_NODES);
            let mut slopes = Vec::with_capacity(TABLE_NODES);
            let mut hint = None;
            for k in 0..TABLE_NODES {
                let (v, h) = profile.lambda_star_with(k as f64 * step, hint)?;
                hint = Some(h);
                values.push(v);
                slopes.push(h);
            }
            Some(HermiteTable {
                step,
                values,
                slopes,
            })
        } else {
            None
        };
        Ok(LambdaStarEvaluator { profile, table })
    }

    pub fn profile(&self) -> &CramerProfile {
        self.profile
    }

    pub fn eval(&self, x: f64) -> Result<f64> {
        let Some(t) = &self.table else {
            return self.profile.lambda_star(x);
        };
        let ax = x.abs();
        let pos = ax / t.step;
        let k = pos as usize;
        if k + 1 >= t.values.len() {
            return self.profile.lambda_star(ax);
        }
        let s = pos - k as f64;
        let (y0, y1) = (t.values[k], t.values[k + 1]);
        let (d0, d1) = (t.slopes[k] * t.step, t.slopes[k + 1] * t.step);
        let s2 = s * s;
        let s3 = s2 * s;
        Ok((2.0 * s3 - 3.0 * s2 + 1.0) * y0
            + (s3 - 2.0 * s2 + s) * d0
            + (-2.0 * s3 + 3.0 * s2) * y1
            + (s3 - s2) * d1)
    }
}

fn next_above(lo: f64, t_star: f64) -> f64 {
    if t_star.is_finite() {
        lo + 0.5 * (t_star - lo)
    } else {
        (2.0 * lo).max(1.0)
    }
}

/// Λ at some t >= 0 written as anchor·t + rest, with slope = anchor - gap.
/// Choosing the anchor at the right end of the effective support keeps both
/// Λ and x·t - Λ accurate when t is huge and x is close to x*.
#[derive(Debug, Clone, Copy)]
struct Tilt {
    anchor: f64,
    rest: f64,
    gap: f64,
    curvature: f64,
}

impl Tilt {
    fn value(&self, t: f64) -> f64 {
        self.anchor * t + self.rest
    }

    fn slope(&self) -> f64 {
        self.anchor - self.gap
    }
}

fn closed_tilt(form: ClosedLogMgf, t: f64) -> Tilt {
    let plain = |value: f64, slope: f64, curvature: f64| Tilt {
        anchor: 0.0,
        rest: value,
        gap: -slope,
        curvature,
    };
    match form {
        ClosedLogMgf::LnCosh => {
            let e = (-2.0 * t).exp();
            Tilt {
                anchor: 1.0,
                rest: e.ln_1p() - std::f64::consts::LN_2,
                gap: 2.0 * e / (1.0 + e),
                curvature: 4.0 * e / ((1.0 + e) * (1.0 + e)),
            }
        }
        ClosedLogMgf::LnSinhc { half_width: a } => {
            let s = a * t;
            if s < SINHC_SERIES_CUTOFF {
                let (v, d1, d2) = ln_sinhc(s);
                return plain(v, a * d1, a * a * d2);
            }
            let e = (-2.0 * s).exp();
            // ln(sinh s / s) = s + ln(1 - e^{-2s}) - ln(2s), coth s - 1 = 2e/(1-e)
            Tilt {
                anchor: a,
                rest: (-e).ln_1p() - (2.0 * s).ln(),
                gap: a * (1.0 / s - 2.0 * e / (1.0 - e)),
                curvature: a * a * (1.0 / (s * s) - 4.0 * e / ((1.0 - e) * (1.0 - e))),
            }
        }
        ClosedLogMgf::NegLnOneMinusSquare => {
            let t2 = t * t;
            let one_m = 1.0 - t2;
            plain(
                -(-t2).ln_1p(),
                2.0 * t / one_m,
                2.0 * (1.0 + t2) / (one_m * one_m),
            )
        }
        ClosedLogMgf::QuarterSquare => plain(0.25 * t * t, 0.5 * t, 0.5),
    }
}

const SINHC_SERIES_CUTOFF: f64 = 0.3;

/// ln(sinh s / s) and its first two derivatives, s >= 0.
fn ln_sinhc(s: f64) -> (f64, f64, f64) {
    if s < SINHC_SERIES_CUTOFF {
        let z = s * s;
        let v = z
            * (1.0 / 6.0
                + z * (-1.0 / 180.0
                    + z * (1.0 / 2835.0
                        + z * (-1.0 / 37800.0
                            + z * (1.0 / 467_775.0
                                + z * (-691.0 / 3_831_077_250.0
                                    + z * (2.0 / 127_702_575.0
                                        - z * 3617.0 / 2_605_132_530_000.0)))))));
        let d1 = s
            * (1.0 / 3.0
                + z * (-1.0 / 45.0
                    + z * (2.0 / 945.0
                        + z * (-1.0 / 4725.0
                            + z * (2.0 / 93555.0
                                + z * (-1382.0 / 638_512_875.0
                                    + z * (4.0 / 18_243_225.0
                                        - z * 3617.0 / 162_820_783_125.0)))))));
        let d2 = 1.0 / 3.0
            + z * (-1.0 / 15.0
                + z * (2.0 / 189.0
                    + z * (-1.0 / 675.0
                        + z * (2.0 / 10395.0
                            + z * (-1382.0 / 58_046_625.0
                                + z * (4.0 / 1_403_325.0 - z * 3617.0 / 10_854_718_875.0))))));
        return (v, d1, d2);
    }
    let e = (-2.0 * s).exp();
    let v = s + (-e).ln_1p() - (2.0 * s).ln();
    let coth = (1.0 + e) / (1.0 - e);
    let csch2 = 4.0 * e / ((1.0 - e) * (1.0 - e));
    (v, coth - 1.0 / s, 1.0 / (s * s) - csch2)
}

/// One row of the ν_p asymptotic diagnostics along the t-grid.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct LogMgfRatioRow {
    pub t: f64,
    /// Λ(t) p^q / ((p-1) t^q)
    pub lambda_ratio: f64,
}

/// One row of the ν_p asymptotic diagnostics along the x-grid.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct TransformRatioRow {
    pub x: f64,
    /// h(x) / (p x^{p-1})
    pub h_ratio: f64,
    /// Λ*(x) / x^p
    pub lambda_star_ratio: f64,
    /// m(x) / x^p
    pub tail_ratio: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct AsymptoticsReport {
    pub p: f64,
    pub q: f64,
    pub t_rows: Vec<LogMgfRatioRow>,
    pub x_rows: Vec<TransformRatioRow>,
}

/// Ratios that tend to 1 for ν_p, p > 1: the growth of Λ like
/// ((p-1)/p^q) t^q, of h like p x^{p-1}, and of Λ* and m like x^p.
pub fn pnorm_asymptotics_report(
    p: f64,
    t_grid: &[f64],
    x_grid: &[f64],
) -> Result<AsymptoticsReport> {
    if !(p > 1.0) {
        return Err(Error::invalid(format!(
            "asymptotics report needs p > 1, got {p}"
        )));
    }
    let q = p / (p - 1.0);
    let profile = CramerProfile::new(MeasureSpec::pnorm(p)?)?;
    let t_rows = t_grid
        .iter()
        .map(|&t| {
            if !(t > 0.0) {
                return Err(Error::domain(
                    "pnorm_asymptotics_report",
                    t,
                    "t must be positive",
                ));
            }
            let lam = profile.log_mgf(t)?;
            Ok(LogMgfRatioRow {
                t,
                lambda_ratio: lam * p.powf(q) / ((p - 1.0) * t.powf(q)),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let evals = profile.lambda_star_condition_scan(x_grid)?;
    let x_rows = evals
        .iter()
        .map(|e| {
            let xp = e.x.powf(p);
            TransformRatioRow {
                x: e.x,
                h_ratio: e.h_of_x / (p * e.x.powf(p - 1.0)),
                lambda_star_ratio: e.lambda_star / xp,
                tail_ratio: e.tail_m / xp,
            }
        })
        .collect();
    Ok(AsymptoticsReport {
        p,
        q,
        t_rows,
        x_rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn profile(spec: MeasureSpec) -> CramerProfile {
        CramerProfile::new(spec).unwrap()
    }

    fn quad_profile(spec: MeasureSpec) -> CramerProfile {
        CramerProfile::build(
            spec,
            ProfileOptions {
                method: LogMgfMethod::Quadrature,
                ..Default::default()
            },
        )
        .unwrap()
    }

    #[test]
    fn log_mgf_examples() {
        let r = profile(MeasureSpec::rademacher());
        assert!((r.log_mgf(1.0).unwrap() - 0.433_780_830_483_027_2).abs() < 1e-15);
        for spec in [
            MeasureSpec::rademacher(),
            MeasureSpec::uniform(1.0).unwrap(),
            MeasureSpec::sym_exponential(),
            MeasureSpec::pnorm(3.0).unwrap(),
        ] {
            assert_eq!(profile(spec).log_mgf(0.0).unwrap(), 0.0);
        }
        let g = quad_profile(MeasureSpec::pnorm(2.0).unwrap());
        for &t in &[0.5, 1.0, 2.0] {
            assert!((g.log_mgf(t).unwrap() - t * t / 4.0).abs() < 1e-10);
        }
    }

    #[test]
    fn log_mgf_quadrature_matches_high_precision_values() {
        // 40-digit quadrature of ∫ e^{tx} dν_p
        let cases = [
            (1.5, 0.5, 0.093_397_851_901_653_12),
            (1.5, 2.0, 1.767_985_152_089_494_2),
            (3.0, 0.5, 0.046_451_754_407_001_15),
            (3.0, 2.0, 0.701_074_202_936_735_2),
        ];
        for (p, t, want) in cases {
            let prof = profile(MeasureSpec::pnorm(p).unwrap());
            let got = prof.log_mgf(t).unwrap();
            assert!((got - want).abs() < 1e-12, "p={p} t={t}: {got}");
        }
    }

    #[test]
    fn log_mgf_domain() {
        let e = profile(MeasureSpec::sym_exponential());
        assert!(matches!(e.log_mgf(1.0), Err(Error::Domain { .. })));
        assert!(e.log_mgf(-1.5).is_err());
        assert!(e.log_mgf(0.999).is_ok());
    }

    #[test]
    fn closed_forms_agree_with_quadrature() {
        for spec in [
            MeasureSpec::uniform(1.0).unwrap(),
            MeasureSpec::uniform(2.5).unwrap(),
            MeasureSpec::sym_exponential(),
            MeasureSpec::pnorm(2.0).unwrap(),
            MeasureSpec::rademacher(),
        ] {
            let a = profile(spec.clone());
            let b = quad_profile(spec.clone());
            for &t in &[0.05, 0.3, 0.5, 0.9, -0.7] {
                let (pa, pb) = (a.mgf_point(t).unwrap(), b.mgf_point(t).unwrap());
                assert!(
                    (pa.value - pb.value).abs() < 1e-10,
                    "{} t={t}",
                    spec.label()
                );
                assert!(
                    (pa.slope - pb.slope).abs() < 1e-10,
                    "{} t={t}",
                    spec.label()
                );
                assert!(
                    (pa.curvature - pb.curvature).abs() < 1e-9,
                    "{} t={t}",
                    spec.label()
                );
            }
        }
    }

    #[test]
    fn uniform_large_t_quadrature() {
        let a = profile(MeasureSpec::uniform(1.0).unwrap());
        let b = quad_profile(MeasureSpec::uniform(1.0).unwrap());
        for &t in &[5.0, 50.0, 1e4] {
            let (pa, pb) = (a.mgf_point(t).unwrap(), b.mgf_point(t).unwrap());
            assert!(
                (pa.value - pb.value).abs() < 1e-9 * pa.value.max(1.0),
                "t={t}"
            );
            assert!((pa.slope - pb.slope).abs() < 1e-10, "t={t}");
            assert!(
                (pa.curvature - pb.curvature).abs() < 1e-9 * pa.curvature,
                "t={t}"
            );
        }
    }

    #[test]
    fn sinhc_series_matches_direct_formula() {
        for &s in &[0.19, 0.2, 0.21] {
            let (v, d1, d2) = ln_sinhc(s);
            let direct_v = (s.sinh() / s).ln();
            let direct_d1 = 1.0 / s.tanh() - 1.0 / s;
            let direct_d2 = 1.0 / (s * s) - 1.0 / s.sinh().powi(2);
            assert!((v - direct_v).abs() < 1e-15);
            assert!((d1 - direct_d1).abs() < 1e-14);
            assert!((d2 - direct_d2).abs() < 1e-13);
        }
    }

    #[test]
    fn derivative_examples() {
        for spec in [
            MeasureSpec::rademacher(),
            MeasureSpec::uniform(1.0).unwrap(),
            MeasureSpec::sym_exponential(),
            MeasureSpec::pnorm(1.5).unwrap(),
        ] {
            let p = profile(spec.clone());
            let (d1, d2) = p.log_mgf_derivs(0.0).unwrap();
            assert_eq!(d1, 0.0);
            assert!((d2 - spec.variance()).abs() < 1e-11, "{}", spec.label());
        }
        let e = profile(MeasureSpec::sym_exponential());
        assert!((e.log_mgf_derivs(0.5).unwrap().0 - 4.0 / 3.0).abs() < 1e-15);

        // coth t - 1/t against central differences of the closed form
        let u = profile(MeasureSpec::uniform(1.0).unwrap());
        for &t in &[0.3, 1.0, 4.0] {
            let d1 = u.log_mgf_derivs(t).unwrap().0;
            assert!((d1 - (1.0 / t.tanh() - 1.0 / t)).abs() < 1e-14);
            let h = 1e-5;
            let fd = (u.log_mgf(t + h).unwrap() - u.log_mgf(t - h).unwrap()) / (2.0 * h);
            assert!((d1 - fd).abs() < 1e-8);
        }
    }

    #[test]
    fn derivatives_match_finite_differences() {
        for spec in [
            MeasureSpec::uniform(1.0).unwrap(),
            MeasureSpec::sym_exponential(),
            MeasureSpec::pnorm(1.5).unwrap(),
            MeasureSpec::pnorm(3.0).unwrap(),
        ] {
            let p = profile(spec.clone());
            for &t in &[-0.6, 0.1, 0.45, 0.8] {
                let pt = p.mgf_point(t).unwrap();
                // truncation error h²Λ''''/6 stays below 1e-7 relative here
                for &step in &[1e-5, 3e-5] {
                    let f = |s: f64| p.log_mgf(s).unwrap();
                    let d1 = (f(t + step) - f(t - step)) / (2.0 * step);
                    let g = |s: f64| p.log_mgf_derivs(s).unwrap().0;
                    let d2 = (g(t + step) - g(t - step)) / (2.0 * step);
                    assert!(
                        (pt.slope - d1).abs() <= 1e-7 * pt.slope.abs().max(1.0),
                        "{} t={t}",
                        spec.label()
                    );
                    assert!(
                        (pt.curvature - d2).abs() <= 2e-7 * pt.curvature.max(1.0),
                        "{} t={t}",
                        spec.label()
                    );
                }
            }
        }
    }

    #[test]
    fn grid_invariants() {
        for spec in [
            MeasureSpec::rademacher(),
            MeasureSpec::uniform(1.0).unwrap(),
            MeasureSpec::sym_exponential(),
            MeasureSpec::pnorm(3.0).unwrap(),
        ] {
            let p = profile(spec.clone());
            let g = p.t_grid();
            assert!(g.len() >= 3);
            for w in g.windows(2) {
                assert!(w[1].t > w[0].t);
                assert!(w[1].slope > w[0].slope, "{}", spec.label());
            }
            for pt in g {
                assert!(pt.curvature > 0.0);
                let mirror = p.log_mgf(-pt.t).unwrap();
                assert!((mirror - pt.value).abs() <= p.tol_quad());
            }
        }
    }

    #[test]
    fn h_inverse_examples() {
        let e = profile(MeasureSpec::sym_exponential());
        assert_eq!(e.h_inverse(0.0).unwrap(), 0.0);
        assert!((e.h_inverse(4.0 / 3.0).unwrap() - 0.5).abs() < 1e-10);
        let g = profile(MeasureSpec::pnorm(2.0).unwrap());
        assert!((g.h_inverse(1.0).unwrap() - 2.0).abs() < 1e-10);
        assert!((g.h_inverse(-1.0).unwrap() + 2.0).abs() < 1e-10);
        assert!(matches!(
            g.h_inverse(g.x_max_eval() * 1.01),
            Err(Error::Domain { .. })
        ));
    }

    #[test]
    fn h_inverse_quadrature_matches_high_precision() {
        let p15 = profile(MeasureSpec::pnorm(1.5).unwrap());
        assert!((p15.h_inverse(1.0).unwrap() - 1.190_650_553_585_804_7).abs() < 1e-9);
        let p3 = profile(MeasureSpec::pnorm(3.0).unwrap());
        assert!((p3.h_inverse(1.0).unwrap() - 3.535_623_107_165_136).abs() < 1e-9);
        let ls15 = p15.cramer_transform(1.0).unwrap().lambda_star;
        let ls3 = p3.cramer_transform(1.0).unwrap().lambda_star;
        assert!((ls15 - 0.631_608_506_870_430).abs() < 1e-11, "{ls15}");
        assert!((ls3 - 1.541_679_526_291_582).abs() < 1e-11, "{ls3}");
    }

    fn exp_closed(x: f64) -> f64 {
        let r = (1.0 + x * x).sqrt();
        r - 1.0 - ((r + 1.0) / 2.0).ln()
    }

    #[test]
    fn cramer_transform_examples() {
        for spec in [
            MeasureSpec::rademacher(),
            MeasureSpec::uniform(1.0).unwrap(),
            MeasureSpec::pnorm(3.0).unwrap(),
        ] {
            let e = profile(spec).cramer_transform(0.0).unwrap();
            assert_eq!(e.lambda_star, 0.0);
            assert_eq!(e.h_of_x, 0.0);
            assert!(e.ratio.is_nan());
        }
        let ex = profile(MeasureSpec::sym_exponential());
        for &x in &[0.1, 1.0, 7.5, 30.0] {
            let v = ex.cramer_transform(x).unwrap().lambda_star;
            assert!((v - exp_closed(x)).abs() < 1e-10, "x={x}");
        }
        let r = profile(MeasureSpec::rademacher());
        let v = r.cramer_transform(0.5).unwrap().lambda_star;
        assert!((v - 0.130_812_035_941_136_96).abs() < 1e-15);
        // endpoint value by continuity
        assert!((r.lambda_star(1.0).unwrap() - std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn uniform_transform_matches_high_precision() {
        let u = profile(MeasureSpec::uniform(1.0).unwrap());
        let cases = [
            (0.1, 0.015_045_285_074_600_91),
            (0.5, 0.408_638_820_402_771_16),
            (0.9, 1.995_732_275_615_145_5),
            (0.99, 4.298_317_366_548_036),
        ];
        for (x, want) in cases {
            let got = u.cramer_transform(x).unwrap().lambda_star;
            assert!((got - want).abs() < 1e-12, "x={x}: {got}");
        }
    }

    #[test]
    fn legendre_sup_over_dense_grid() {
        let ts: Vec<f64> = (0..=6000).map(|i| -3.0 + 0.001 * i as f64).collect();
        let spec = MeasureSpec::pnorm(1.5).unwrap();
        let p = CramerProfile::build(
            spec,
            ProfileOptions {
                t_grid: Some(ts),
                ..Default::default()
            },
        )
        .unwrap();
        for &x in &[-1.2, -0.3, 0.2, 0.8, 1.5] {
            let exact = p.cramer_transform(x).unwrap().lambda_star;
            let sup = p
                .t_grid()
                .iter()
                .map(|pt| pt.t * x - pt.value)
                .fold(f64::NEG_INFINITY, f64::max);
            assert!(exact >= sup - 1e-12, "x={x}");
            assert!(exact - sup < 1e-6, "x={x}: {exact} vs {sup}");
        }
    }

    #[test]
    fn derivative_of_transform_is_h() {
        for spec in [
            MeasureSpec::uniform(1.0).unwrap(),
            MeasureSpec::sym_exponential(),
            MeasureSpec::pnorm(3.0).unwrap(),
        ] {
            let p = profile(spec.clone());
            for &x in &[-0.7, 0.15, 0.5, 0.9] {
                let step = 1e-5;
                let f = |y: f64| p.cramer_transform(y).unwrap().lambda_star;
                let fd = (f(x + step) - f(x - step)) / (2.0 * step);
                let h = p.h_inverse(x).unwrap();
                assert!(
                    (fd - h).abs() < 1e-6 * h.abs().max(1.0),
                    "{} x={x}",
                    spec.label()
                );
            }
        }
    }

    #[test]
    fn parity_and_growth() {
        for spec in [
            MeasureSpec::rademacher(),
            MeasureSpec::uniform(1.0).unwrap(),
            MeasureSpec::sym_exponential(),
            MeasureSpec::pnorm(3.0).unwrap(),
        ] {
            let p = profile(spec.clone());
            let xm = p.x_max_eval();
            let mut prev = -1.0;
            for i in 0..=50 {
                let x = xm * i as f64 / 50.0;
                let a = p.cramer_transform(x).unwrap();
                let b = p.cramer_transform(-x).unwrap();
                assert!((a.lambda_star - b.lambda_star).abs() <= 1e-12 * a.lambda_star.max(1.0));
                assert!((a.h_of_x + b.h_of_x).abs() <= 1e-12 * a.h_of_x.abs().max(1.0));
                assert!(a.lambda_star > prev, "{} x={x}", spec.label());
                assert!(a.lambda_star <= a.tail_m + 1e-9, "{} x={x}", spec.label());
                prev = a.lambda_star;
            }
            let top = p.cramer_transform(xm).unwrap().lambda_star;
            let below = p.cramer_transform(0.9 * xm).unwrap().lambda_star;
            assert!(top > below);
        }
    }

    #[test]
    fn x_max_eval_rules() {
        let r = profile(MeasureSpec::rademacher());
        assert_eq!(r.x_max_eval(), 1.0 - RADEMACHER_CLIP);
        let u = profile(MeasureSpec::uniform(1.0).unwrap());
        assert_eq!(u.x_max_eval(), 1.0 - COMPACT_CLIP);
        let e = profile(MeasureSpec::sym_exponential());
        assert!((e.x_max_eval() - (60.0 - std::f64::consts::LN_2)).abs() < 1e-10);
        let g = profile(MeasureSpec::pnorm(2.0).unwrap());
        assert!((g.spec().tail_log(g.x_max_eval()).unwrap() - 60.0).abs() < 1e-9);
    }

    #[test]
    fn condition_scan_examples() {
        let e = profile(MeasureSpec::sym_exponential());
        let rows = e.lambda_star_condition_scan(&[1.0, 10.0, 50.0]).unwrap();
        let last = rows.last().unwrap();
        let want = (50.0 + std::f64::consts::LN_2) / exp_closed(50.0);
        assert!((last.ratio - want).abs() < 1e-9);
        assert!((last.ratio - 1.0).abs() < 0.15);
        for r in &rows {
            assert!(r.ratio >= 1.0 - 1e-9);
        }
        let u = profile(MeasureSpec::uniform(1.0).unwrap());
        let rows = u.lambda_star_condition_scan(&[0.9, 0.99, 0.999]).unwrap();
        assert!(rows[0].ratio > rows[1].ratio && rows[1].ratio > rows[2].ratio);
        assert!(rows[2].ratio < 1.2);
        assert!(e.lambda_star_condition_scan(&[0.0, 1.0]).is_err());
        assert!(e.lambda_star_condition_scan(&[2.0, 1.0]).is_err());
        assert!(e.lambda_star_condition_scan(&[1.0, 100.0]).is_err());
    }

    #[test]
    fn tiny_x_has_nan_ratio() {
        let u = profile(MeasureSpec::uniform(1.0).unwrap());
        let e = u.cramer_transform(1e-7).unwrap();
        assert!(e.lambda_star < RATIO_FLOOR);
        assert!(e.ratio.is_nan());
    }

    #[test]
    fn asymptotics_report_examples() {
        let rep = pnorm_asymptotics_report(2.0, &[10.0], &[5.0]).unwrap();
        assert_eq!(rep.q, 2.0);
        assert!((rep.t_rows[0].lambda_ratio - 1.0).abs() < 1e-15);
        assert!((rep.x_rows[0].h_ratio - 1.0).abs() < 1e-10);
        assert!((rep.x_rows[0].lambda_star_ratio - 1.0).abs() < 1e-10);

        let p3 = profile(MeasureSpec::pnorm(3.0).unwrap());
        let xm = p3.x_max_eval();
        let rep = pnorm_asymptotics_report(3.0, &[1.0, 10.0, 40.0], &[1.0, 2.0, xm]).unwrap();
        let last = rep.x_rows.last().unwrap();
        assert!((last.lambda_star_ratio - 1.0).abs() < 0.1, "{last:?}");
        // ratios approach 1 along the grid
        let t_dev: Vec<f64> = rep
            .t_rows
            .iter()
            .map(|r| (r.lambda_ratio - 1.0).abs())
            .collect();
        assert!(t_dev[2] < t_dev[0]);
        assert!(pnorm_asymptotics_report(1.0, &[1.0], &[1.0]).is_err());
    }

    #[test]
    fn exp_half_integral_bounds() {
        let u = profile(MeasureSpec::uniform(1.0).unwrap());
        let v = u.exp_half_lambda_star_integral().unwrap();
        // 40-digit value 1.7491864158580577 over the full interval; the clip
        // at 1 - 1e-12 removes about 2e-6
        assert!(v > 1.0 && v <= 4.0);
        assert!((v - 1.749_186_415_858_057_7).abs() < 1e-5, "{v}");
        let e = profile(MeasureSpec::sym_exponential());
        let v = e.exp_half_lambda_star_integral().unwrap();
        assert!((v - 1.253_460_020_566_829_3).abs() < 1e-9, "{v}");
        assert!(profile(MeasureSpec::rademacher())
            .exp_half_lambda_star_integral()
            .is_err());

        let one = CramerProfile::build(
            MeasureSpec::uniform(1.0).unwrap(),
            ProfileOptions {
                t_grid: Some(vec![0.0]),
                ..Default::default()
            },
        )
        .unwrap();
        assert!(matches!(
            one.exp_half_lambda_star_integral(),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn lambda_star_inverse_round_trip() {
        for spec in [
            MeasureSpec::uniform(1.0).unwrap(),
            MeasureSpec::sym_exponential(),
            MeasureSpec::pnorm(3.0).unwrap(),
            MeasureSpec::rademacher(),
        ] {
            let p = profile(spec.clone());
            for &level in &[0.0, 0.01, 0.3, 0.6] {
                let x = p.lambda_star_inverse(level).unwrap();
                assert!(
                    (p.lambda_star(x).unwrap() - level).abs() < 1e-11,
                    "{} {level}",
                    spec.label()
                );
            }
        }
        let r = profile(MeasureSpec::rademacher());
        assert!(r.lambda_star_inverse(0.7).is_err());
        let u = profile(MeasureSpec::uniform(1.0).unwrap());
        let x = u.lambda_star_inverse(6.0).unwrap();
        assert!(x < 1.0 && (u.lambda_star(x).unwrap() - 6.0).abs() < 1e-11);
    }

    #[test]
    fn tilted_mean_mc_agrees() {
        let mut rng = Stream::new(77, 0);
        for spec in [
            MeasureSpec::rademacher(),
            MeasureSpec::uniform(1.0).unwrap(),
            MeasureSpec::sym_exponential(),
            MeasureSpec::pnorm(3.0).unwrap(),
        ] {
            let p = profile(spec.clone());
            for &t in &[0.2, 0.5] {
                let est = p.tilted_mean_mc(t, 20_000, &mut rng).unwrap();
                let exact = p.log_mgf_derivs(t).unwrap().0;
                assert!(
                    (est.mean - exact).abs() < 4.0 * est.se,
                    "{} t={t}",
                    spec.label()
                );
            }
        }
    }

    #[test]
    fn hermite_table_matches_direct_evaluation() {
        for p in [1.5, 3.0] {
            let prof = profile(MeasureSpec::pnorm(p).unwrap());
            let fast = LambdaStarEvaluator::new(&prof).unwrap();
            assert!(fast.table.is_some());
            for i in 0..200 {
                let x = -prof.x_max_eval() + 0.01 * prof.x_max_eval() * i as f64 + 1e-3;
                let a = fast.eval(x).unwrap();
                let b = prof.lambda_star(x).unwrap();
                assert!((a - b).abs() < 1e-9 * b.max(1.0), "p={p} x={x}");
            }
            let far = 1.1 * prof.x_max_eval();
            assert_eq!(fast.eval(far).unwrap(), prof.lambda_star(far).unwrap());
        }
        let u = profile(MeasureSpec::uniform(1.0).unwrap());
        assert!(LambdaStarEvaluator::new(&u).unwrap().table.is_none());
    }

    #[test]
    fn tabulated_measure_transform() {
        use crate::measures::TabulatedDensity;
        // tabulated uniform reproduces the closed-form profile
        let tab = TabulatedDensity::from_points(&[(-1.0, 0.5), (1.0, 0.5)]).unwrap();
        let p = profile(MeasureSpec::tabulated(tab));
        let u = profile(MeasureSpec::uniform(1.0).unwrap());
        for &x in &[0.2, 0.6, 0.95] {
            let a = p.cramer_transform(x).unwrap().lambda_star;
            let b = u.cramer_transform(x).unwrap().lambda_star;
            assert!((a - b).abs() < 1e-9, "x={x}");
        }
    }

    #[test]
    fn triangular_density_vanishing_at_the_edge() {
        use crate::measures::TabulatedDensity;
        let pts: Vec<(f64, f64)> = (0..=40)
            .map(|k| {
                let x = -1.0 + k as f64 / 20.0;
                (x, 1.0 - x.abs())
            })
            .collect();
        let p = profile(MeasureSpec::tabulated(
            TabulatedDensity::from_points(&pts).unwrap(),
        ));
        // E e^{tX} = 2(cosh t - 1)/t² = e^t (1 - e^{-t})² / t²
        for &t in &[0.5f64, 3.0, 40.0] {
            let exact = t - 2.0 * t.ln() + 2.0 * (-(-t).exp()).ln_1p();
            assert!((p.log_mgf(t).unwrap() - exact).abs() < 1e-10, "t={t}");
        }
        let x = 0.999;
        let (ls, h) = p.lambda_star_and_h(x).unwrap();
        assert!(ls.is_finite() && h > 1000.0);
    }
}
