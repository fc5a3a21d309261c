//! Even probability measures on the real line: densities or atoms, exact
//! samplers, tail log-measures and support metadata.

use std::path::Path;

use statrs::function::gamma::{gamma, ln_gamma};

use crate::error::{Error, Result};
use crate::quad::{integrate, QuadOptions};
use crate::rng::Stream;

/// Closed forms of the log-MGF that the Cramér module can use instead of
/// quadrature.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ClosedLogMgf {
    /// ln cosh t
    LnCosh,
    /// ln(sinh(a t) / (a t))
    LnSinhc { half_width: f64 },
    /// -ln(1 - t^2)
    NegLnOneMinusSquare,
    /// t^2 / 4
    QuarterSquare,
}

#[derive(Debug, Clone, PartialEq)]
pub enum MeasureKind {
    Rademacher,
    Uniform { half_width: f64 },
    SymExponential,
    PNorm { p: f64 },
    Tabulated(TabulatedDensity),
}

/// An even probability measure together with the metadata the transforms
/// need. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasureSpec {
    kind: MeasureKind,
    x_star: f64,
    t_star: f64,
    atom_at_x_star: f64,
    closed_log_mgf: Option<ClosedLogMgf>,
    closed_lambda_star: bool,
    admissible: Option<bool>,
    lambda_star_condition: bool,
    // ln of the density normaliser for PNorm: ln(2 Γ(1 + 1/p))
    ln_norm: f64,
}

impl MeasureSpec {
    pub fn rademacher() -> Self {
        MeasureSpec {
            kind: MeasureKind::Rademacher,
            x_star: 1.0,
            t_star: f64::INFINITY,
            atom_at_x_star: 0.5,
            closed_log_mgf: Some(ClosedLogMgf::LnCosh),
            closed_lambda_star: true,
            admissible: Some(false),
            lambda_star_condition: false,
            ln_norm: 0.0,
        }
    }

    pub fn uniform(half_width: f64) -> Result<Self> {
        if !(half_width > 0.0 && half_width.is_finite()) {
            return Err(Error::invalid(format!(
                "uniform half-width must be positive and finite, got {half_width}"
            )));
        }
        Ok(MeasureSpec {
            kind: MeasureKind::Uniform { half_width },
            x_star: half_width,
            t_star: f64::INFINITY,
            atom_at_x_star: 0.0,
            closed_log_mgf: Some(ClosedLogMgf::LnSinhc { half_width }),
            closed_lambda_star: false,
            admissible: Some(true),
            lambda_star_condition: true,
            ln_norm: (2.0 * half_width).ln(),
        })
    }

    pub fn sym_exponential() -> Self {
        MeasureSpec {
            kind: MeasureKind::SymExponential,
            x_star: f64::INFINITY,
            t_star: 1.0,
            atom_at_x_star: 0.0,
            closed_log_mgf: Some(ClosedLogMgf::NegLnOneMinusSquare),
            closed_lambda_star: false,
            admissible: Some(true),
            lambda_star_condition: true,
            ln_norm: 2f64.ln(),
        }
    }

    /// The measure with density exp(-|x|^p) / (2 Γ(1 + 1/p)), p >= 1.
    pub fn pnorm(p: f64) -> Result<Self> {
        if !(p >= 1.0 && p.is_finite()) {
            return Err(Error::invalid(format!(
                "pnorm needs a finite p >= 1, got {p}"
            )));
        }
        let closed = if p == 1.0 {
            Some(ClosedLogMgf::NegLnOneMinusSquare)
        } else if p == 2.0 {
            Some(ClosedLogMgf::QuarterSquare)
        } else {
            None
        };
        Ok(MeasureSpec {
            kind: MeasureKind::PNorm { p },
            x_star: f64::INFINITY,
            // J is bounded only for p = 1
            t_star: if p == 1.0 { 1.0 } else { f64::INFINITY },
            atom_at_x_star: 0.0,
            closed_log_mgf: closed,
            closed_lambda_star: false,
            admissible: Some(true),
            lambda_star_condition: true,
            ln_norm: (2.0 * gamma(1.0 + 1.0 / p)).ln(),
        })
    }

    pub fn tabulated(density: TabulatedDensity) -> Self {
        let x_star = density.x_star();
        MeasureSpec {
            kind: MeasureKind::Tabulated(density),
            x_star,
            t_star: f64::INFINITY,
            atom_at_x_star: 0.0,
            closed_log_mgf: None,
            closed_lambda_star: false,
            // log-concavity of tabulated input is not checked
            admissible: None,
            lambda_star_condition: false,
            ln_norm: 0.0,
        }
    }

    /// Resolve a CLI measure name (`rademacher`, `uniform`, `exp`, `pnorm`).
    pub fn from_name(name: &str, p: Option<f64>) -> Result<Self> {
        match name {
            "rademacher" => Ok(Self::rademacher()),
            "uniform" => Self::uniform(1.0),
            "exp" => Ok(Self::sym_exponential()),
            "pnorm" => {
                let p = p.ok_or_else(|| Error::invalid("measure `pnorm` requires --p"))?;
                Self::pnorm(p)
            }
            other => Err(Error::invalid(format!(
                "unknown measure `{other}` (expected rademacher, uniform, exp, pnorm)"
            ))),
        }
    }

    pub fn kind(&self) -> &MeasureKind {
        &self.kind
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            MeasureKind::Rademacher => "rademacher",
            MeasureKind::Uniform { .. } => "uniform",
            MeasureKind::SymExponential => "exp",
            MeasureKind::PNorm { .. } => "pnorm",
            MeasureKind::Tabulated(_) => "tabulated",
        }
    }

    pub fn label(&self) -> String {
        match &self.kind {
            MeasureKind::Uniform { half_width } => format!("uniform({half_width})"),
            MeasureKind::PNorm { p } => format!("pnorm({p})"),
            _ => self.name().to_string(),
        }
    }

    pub fn x_star(&self) -> f64 {
        self.x_star
    }

    pub fn t_star(&self) -> f64 {
        self.t_star
    }

    pub fn atom_at_x_star(&self) -> f64 {
        self.atom_at_x_star
    }

    pub fn closed_log_mgf(&self) -> Option<ClosedLogMgf> {
        self.closed_log_mgf
    }

    pub fn has_closed_lambda_star(&self) -> bool {
        self.closed_lambda_star
    }

    /// `None` when admissibility is not decided (tabulated input).
    pub fn admissible(&self) -> Option<bool> {
        self.admissible
    }

    pub fn lambda_star_condition(&self) -> bool {
        self.lambda_star_condition
    }

    pub fn is_atomic(&self) -> bool {
        matches!(self.kind, MeasureKind::Rademacher)
    }

    /// Support points and masses of an atomic measure; empty otherwise.
    pub fn atoms(&self) -> &'static [(f64, f64)] {
        match self.kind {
            MeasureKind::Rademacher => &[(-1.0, 0.5), (1.0, 0.5)],
            _ => &[],
        }
    }

    pub fn density(&self, x: f64) -> Result<f64> {
        if self.is_atomic() {
            return Err(Error::AtomicMeasure(self.label()));
        }
        Ok(self.log_density(x).exp())
    }

    /// ln f(x); `-inf` outside the support. Atomic measures return `-inf`.
    pub fn log_density(&self, x: f64) -> f64 {
        let ax = x.abs();
        match &self.kind {
            MeasureKind::Rademacher => f64::NEG_INFINITY,
            MeasureKind::Uniform { half_width } => {
                if ax <= *half_width {
                    -self.ln_norm
                } else {
                    f64::NEG_INFINITY
                }
            }
            MeasureKind::SymExponential => -ax - self.ln_norm,
            MeasureKind::PNorm { p } => -ax.powf(*p) - self.ln_norm,
            MeasureKind::Tabulated(t) => t.density(ax).ln(),
        }
    }

    pub fn variance(&self) -> f64 {
        match &self.kind {
            MeasureKind::Rademacher => 1.0,
            MeasureKind::Uniform { half_width } => half_width * half_width / 3.0,
            MeasureKind::SymExponential => 2.0,
            MeasureKind::PNorm { p } => (ln_gamma(3.0 / p) - ln_gamma(1.0 / p)).exp(),
            MeasureKind::Tabulated(t) => t.second_moment(),
        }
    }

    /// One draw from the measure.
    pub fn sample(&self, rng: &mut Stream) -> f64 {
        match &self.kind {
            MeasureKind::Rademacher => rng.sign(),
            MeasureKind::Uniform { half_width } => half_width * (2.0 * rng.uniform() - 1.0),
            MeasureKind::SymExponential => rng.laplace(),
            MeasureKind::PNorm { p } => {
                let g = rng.gamma(1.0 / p);
                rng.sign() * g.powf(1.0 / p)
            }
            MeasureKind::Tabulated(t) => {
                let s = rng.sign();
                s * t.sample_abs(rng.uniform())
            }
        }
    }

    pub fn sample_vec(&self, rng: &mut Stream, len: usize) -> Vec<f64> {
        (0..len).map(|_| self.sample(rng)).collect()
    }

    /// m(x) = -ln μ([x, ∞)) for 0 <= x < x*.
    pub fn tail_log(&self, x: f64) -> Result<f64> {
        if !(x >= 0.0) || x >= self.x_star {
            return Err(Error::domain(
                "tail_log",
                x,
                format!("requires 0 <= x < x* = {}", self.x_star),
            ));
        }
        let ln2 = std::f64::consts::LN_2;
        match &self.kind {
            MeasureKind::Rademacher => Ok(ln2),
            MeasureKind::Uniform { half_width } => {
                Ok(-((half_width - x) / (2.0 * half_width)).ln())
            }
            MeasureKind::SymExponential => Ok(x + ln2),
            MeasureKind::PNorm { p } => pnorm_tail_log(*p, x, self.ln_norm),
            MeasureKind::Tabulated(t) => Ok(-t.tail_mass(x).ln()),
        }
    }

    /// Breakpoints of the support on the non-negative half-line at which the
    /// density may fail to be smooth. The last entry is x* (possibly +inf).
    pub(crate) fn half_line_breaks(&self) -> Vec<f64> {
        match &self.kind {
            MeasureKind::Tabulated(t) => t.nodes.clone(),
            _ => vec![0.0, self.x_star],
        }
    }
}

fn pnorm_tail_log(p: f64, x: f64, ln_norm: f64) -> Result<f64> {
    // μ[x,∞) = e^{-x^p} / (2γ_p) · ∫_0^∞ exp(-((x+s)^p - x^p)) ds
    let xp = x.powf(p);
    let excess = |s: f64| {
        if x > 0.0 {
            xp * (p * (s / x).ln_1p()).exp_m1()
        } else {
            s.powf(p)
        }
    };
    // truncate where the integrand falls below e^-45
    let mut upper = 1.0;
    while excess(upper) > 45.0 {
        upper *= 0.5;
    }
    while excess(upper) < 45.0 {
        upper *= 2.0;
    }
    let integral = integrate(
        |s| (-excess(s)).exp(),
        &[0.0, upper / 16.0, upper / 4.0, upper],
        QuadOptions::absolute(0.0).with_rel(1e-13),
    )?;
    Ok(xp + ln_norm - integral.ln())
}

/// A piecewise-linear even density given on non-negative nodes. Built from
/// raw (x, f(x)) samples, symmetrised by averaging f(x) and f(-x) and
/// renormalised to unit mass.
#[derive(Debug, Clone, PartialEq)]
pub struct TabulatedDensity {
    nodes: Vec<f64>,
    // per segment [nodes[k], nodes[k+1]]: values at the left and right end
    left: Vec<f64>,
    right: Vec<f64>,
    // mass of segment k and of everything from node k to x*
    seg_mass: Vec<f64>,
    tail_from: Vec<f64>,
}

impl TabulatedDensity {
    pub fn from_points(points: &[(f64, f64)]) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::invalid("tabulated density needs at least two rows"));
        }
        for w in points.windows(2) {
            if !(w[1].0 > w[0].0) {
                return Err(Error::invalid(format!(
                    "tabulated x values must be strictly increasing ({} then {})",
                    w[0].0, w[1].0
                )));
            }
        }
        for &(x, f) in points {
            if !x.is_finite() || !f.is_finite() || f < 0.0 {
                return Err(Error::invalid(format!("bad tabulated row ({x}, {f})")));
            }
        }
        let x_min = points[0].0;
        let x_max = points[points.len() - 1].0;
        let interp = |x: f64| -> f64 {
            let i = points.partition_point(|&(px, _)| px <= x);
            if i == 0 {
                return points[0].1;
            }
            if i == points.len() {
                return points[points.len() - 1].1;
            }
            let (x0, f0) = points[i - 1];
            let (x1, f1) = points[i];
            f0 + (f1 - f0) * (x - x0) / (x1 - x0)
        };
        // one-sided limits of the zero-extended interpolant
        let f_right = |x: f64| {
            if x >= x_min && x < x_max {
                interp(x)
            } else {
                0.0
            }
        };
        let f_left = |x: f64| {
            if x > x_min && x <= x_max {
                interp(x)
            } else {
                0.0
            }
        };

        let mut nodes: Vec<f64> = points.iter().map(|&(x, _)| x.abs()).collect();
        nodes.push(0.0);
        nodes.sort_by(f64::total_cmp);
        nodes.dedup();

        let mut left = Vec::with_capacity(nodes.len() - 1);
        let mut right = Vec::with_capacity(nodes.len() - 1);
        for w in nodes.windows(2) {
            left.push(0.5 * (f_right(w[0]) + f_left(-w[0])));
            right.push(0.5 * (f_left(w[1]) + f_right(-w[1])));
        }
        // drop trailing segments without mass so that the last node is x*
        while let (Some(&l), Some(&r)) = (left.last(), right.last()) {
            if l > 0.0 || r > 0.0 {
                break;
            }
            left.pop();
            right.pop();
            nodes.pop();
        }
        if left.is_empty() {
            return Err(Error::invalid("tabulated density has zero mass"));
        }
        let half_mass: f64 = nodes
            .windows(2)
            .zip(left.iter().zip(&right))
            .map(|(w, (l, r))| 0.5 * (l + r) * (w[1] - w[0]))
            .sum();
        let scale = 1.0 / (2.0 * half_mass);
        for v in left.iter_mut().chain(right.iter_mut()) {
            *v *= scale;
        }
        let seg_mass: Vec<f64> = nodes
            .windows(2)
            .zip(left.iter().zip(&right))
            .map(|(w, (l, r))| 0.5 * (l + r) * (w[1] - w[0]))
            .collect();
        let mut tail_from = vec![0.0; nodes.len()];
        for k in (0..seg_mass.len()).rev() {
            tail_from[k] = tail_from[k + 1] + seg_mass[k];
        }
        Ok(TabulatedDensity {
            nodes,
            left,
            right,
            seg_mass,
            tail_from,
        })
    }

    /// Load a two-column CSV `x,f` with a header row.
    pub fn from_csv(path: impl AsRef<Path>) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_path(path.as_ref())?;
        let mut points = Vec::new();
        for (line, rec) in reader.records().enumerate() {
            let rec = rec?;
            if rec.len() != 2 {
                return Err(Error::invalid(format!(
                    "row {}: expected 2 columns, found {}",
                    line + 2,
                    rec.len()
                )));
            }
            let parse = |s: &str| {
                s.parse::<f64>()
                    .map_err(|_| Error::invalid(format!("row {}: cannot parse `{s}`", line + 2)))
            };
            points.push((parse(&rec[0])?, parse(&rec[1])?));
        }
        Self::from_points(&points)
    }

    pub fn x_star(&self) -> f64 {
        *self.nodes.last().expect("non-empty")
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// (a, b, f(a+), f(b-)) for each linear piece on [0, x*].
    pub(crate) fn pieces(&self) -> impl Iterator<Item = (f64, f64, f64, f64)> + '_ {
        (0..self.left.len()).map(|k| {
            (
                self.nodes[k],
                self.nodes[k + 1],
                self.left[k],
                self.right[k],
            )
        })
    }

    fn segment(&self, s: f64) -> Option<usize> {
        if s > self.x_star() {
            return None;
        }
        let k = self.nodes.partition_point(|&v| v <= s);
        Some(k.saturating_sub(1).min(self.left.len() - 1))
    }

    /// Density at |x| = s.
    pub fn density(&self, s: f64) -> f64 {
        match self.segment(s) {
            None => 0.0,
            Some(k) => {
                let (a, b) = (self.nodes[k], self.nodes[k + 1]);
                self.left[k] + (self.right[k] - self.left[k]) * (s - a) / (b - a)
            }
        }
    }

    /// μ([s, ∞)) for s >= 0.
    pub fn tail_mass(&self, s: f64) -> f64 {
        match self.segment(s) {
            None => 0.0,
            Some(k) => {
                let b = self.nodes[k + 1];
                // mass of [s, b] in segment k
                let part = 0.5 * (self.density(s) + self.right[k]) * (b - s);
                part + self.tail_from[k + 1]
            }
        }
    }

    fn second_moment(&self) -> f64 {
        // exact for a linear density on each segment
        let mut m2 = 0.0;
        for k in 0..self.left.len() {
            let (a, b) = (self.nodes[k], self.nodes[k + 1]);
            let (fa, fb) = (self.left[k], self.right[k]);
            let slope = (fb - fa) / (b - a);
            let c0 = fa - slope * a;
            m2 += c0 * (b.powi(3) - a.powi(3)) / 3.0 + slope * (b.powi(4) - a.powi(4)) / 4.0;
        }
        2.0 * m2
    }

    /// Inverse CDF of |X| at probability u in (0, 1).
    fn sample_abs(&self, u: f64) -> f64 {
        let mut rem = 0.5 * u;
        for k in 0..self.seg_mass.len() {
            if rem <= self.seg_mass[k] || k + 1 == self.seg_mass.len() {
                let (a, b) = (self.nodes[k], self.nodes[k + 1]);
                let width = b - a;
                let l = self.left[k];
                let slope = (self.right[k] - l) / width;
                let rem = rem.min(self.seg_mass[k]);
                // solve l y + slope y^2 / 2 = rem for y in [0, width]
                let disc = (l * l + 2.0 * slope * rem).max(0.0);
                let y = if l + disc.sqrt() > 0.0 {
                    2.0 * rem / (l + disc.sqrt())
                } else {
                    0.0
                };
                return (a + y).min(b);
            }
            rem -= self.seg_mass[k];
        }
        self.x_star()
    }
}
