//! Convex hull membership as a phase-1 linear program.
//!
//! q ∈ conv{X_1..X_N} iff {λ >= 0, Σ λ_j X_j = q, Σ λ_j = 1} is feasible.
//! Phase 1 minimises the sum of n+1 artificial variables with a revised
//! simplex method on an explicit (n+1)×(n+1) basis inverse. At a positive
//! optimum the simplex multipliers y satisfy y·(X_j, 1) <= 0 < y·(q, 1),
//! which is a separating hyperplane. Large point sets are handled by column
//! generation: the simplex runs on a working subset and a full pricing pass
//! adds the most attractive outside columns until none remains.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct LpOptions {
    /// Phase-1 objective below which the query counts as inside.
    pub feas_tol: f64,
    /// Relative tolerance for re-verifying certificates.
    pub cert_tol: f64,
    pub max_pivots: usize,
    /// Price a working subset first when there are many points.
    pub column_generation: bool,
}

impl Default for LpOptions {
    fn default() -> Self {
        LpOptions {
            feas_tol: 1e-9,
            cert_tol: 1e-7,
            max_pivots: 20_000,
            column_generation: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Certificate {
    /// Sparse convex weights: q = Σ weights[k] X_{indices[k]}.
    Weights {
        indices: Vec<usize>,
        weights: Vec<f64>,
    },
    /// ⟨direction, X_j⟩ <= bound < ⟨direction, q⟩ for every vertex.
    Separator { direction: Vec<f64>, bound: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct MembershipResult {
    pub inside: bool,
    pub certificate: Certificate,
    pub pivots: usize,
}

/// Row-major view of `count` points in R^n.
#[derive(Debug, Clone, Copy)]
pub struct PointSet<'a> {
    pub n: usize,
    pub count: usize,
    pub data: &'a [f64],
}

impl<'a> PointSet<'a> {
    pub fn new(n: usize, data: &'a [f64]) -> Result<Self> {
        if n == 0 || !data.len().is_multiple_of(n) {
            return Err(Error::invalid(
                "point data length must be a multiple of n >= 1",
            ));
        }
        Ok(PointSet {
            n,
            count: data.len() / n,
            data,
        })
    }

    /// The first `count` points.
    pub fn prefix(&self, count: usize) -> PointSet<'a> {
        let count = count.min(self.count);
        PointSet {
            n: self.n,
            count,
            data: &self.data[..count * self.n],
        }
    }

    pub fn point(&self, j: usize) -> &'a [f64] {
        &self.data[j * self.n..(j + 1) * self.n]
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Var {
    Artificial(usize),
    Column(usize),
}

struct Phase1<'a> {
    pts: PointSet<'a>,
    m: usize,
    sign: Vec<f64>,
    rhs: Vec<f64>,
    basis: Vec<Var>,
    binv: Vec<f64>,
    x_b: Vec<f64>,
    pivots: usize,
}

impl<'a> Phase1<'a> {
    fn new(pts: PointSet<'a>, q: &[f64]) -> Self {
        let m = pts.n + 1;
        let mut sign = vec![1.0; m];
        let mut rhs = vec![1.0; m];
        for i in 0..pts.n {
            if q[i] < 0.0 {
                sign[i] = -1.0;
            }
            rhs[i] = q[i].abs();
        }
        let mut binv = vec![0.0; m * m];
        for i in 0..m {
            binv[i * m + i] = 1.0;
        }
        Phase1 {
            pts,
            m,
            sign,
            x_b: rhs.clone(),
            rhs,
            basis: (0..m).map(Var::Artificial).collect(),
            binv,
            pivots: 0,
        }
    }

    fn column(&self, v: Var, out: &mut [f64]) {
        match v {
            Var::Artificial(i) => {
                out.iter_mut().for_each(|c| *c = 0.0);
                out[i] = 1.0;
            }
            Var::Column(j) => {
                let p = self.pts.point(j);
                for i in 0..self.pts.n {
                    out[i] = self.sign[i] * p[i];
                }
                out[self.pts.n] = self.sign[self.pts.n];
            }
        }
    }

    /// Simplex multipliers y = c_B B⁻¹ with cost 1 on artificials.
    fn duals(&self) -> Vec<f64> {
        let m = self.m;
        let mut y = vec![0.0; m];
        for (r, v) in self.basis.iter().enumerate() {
            if let Var::Artificial(_) = v {
                for (yk, b) in y.iter_mut().zip(&self.binv[r * m..(r + 1) * m]) {
                    *yk += b;
                }
            }
        }
        y
    }

    fn objective(&self) -> f64 {
        self.basis
            .iter()
            .zip(&self.x_b)
            .filter(|(v, _)| matches!(v, Var::Artificial(_)))
            .map(|(_, x)| x.max(0.0))
            .sum()
    }

    /// Reduced cost of vertex column j: -y·a_j.
    fn reduced_cost(&self, y: &[f64], j: usize) -> f64 {
        let p = self.pts.point(j);
        let n = self.pts.n;
        let mut s = y[n] * self.sign[n];
        for i in 0..n {
            s += y[i] * self.sign[i] * p[i];
        }
        -s
    }

    /// Rebuild B⁻¹ from the basis columns by Gauss-Jordan elimination.
    fn refactor(&mut self) -> Result<()> {
        let m = self.m;
        let mut a = vec![0.0; m * m];
        let mut col = vec![0.0; m];
        for (r, &v) in self.basis.iter().enumerate() {
            self.column(v, &mut col);
            for i in 0..m {
                a[i * m + r] = col[i];
            }
        }
        let mut inv = vec![0.0; m * m];
        for i in 0..m {
            inv[i * m + i] = 1.0;
        }
        for c in 0..m {
            let (piv, big) = (c..m)
                .map(|r| (r, a[r * m + c].abs()))
                .fold((c, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
            if big < 1e-13 {
                return Err(Error::NumericalInstability("singular simplex basis".into()));
            }
            if piv != c {
                for k in 0..m {
                    a.swap(piv * m + k, c * m + k);
                    inv.swap(piv * m + k, c * m + k);
                }
            }
            let d = a[c * m + c];
            for k in 0..m {
                a[c * m + k] /= d;
                inv[c * m + k] /= d;
            }
            for r in 0..m {
                if r != c {
                    let f = a[r * m + c];
                    if f != 0.0 {
                        for k in 0..m {
                            a[r * m + k] -= f * a[c * m + k];
                            inv[r * m + k] -= f * inv[c * m + k];
                        }
                    }
                }
            }
        }
        self.binv = inv;
        for r in 0..m {
            self.x_b[r] = (0..m).map(|k| self.binv[r * m + k] * self.rhs[k]).sum();
        }
        Ok(())
    }

    /// One pivot bringing column j into the basis. Returns the step length.
    fn pivot(&mut self, j: usize, bland: bool) -> Result<f64> {
        let m = self.m;
        let mut a = vec![0.0; m];
        self.column(Var::Column(j), &mut a);
        let alpha: Vec<f64> = (0..m)
            .map(|r| (0..m).map(|k| self.binv[r * m + k] * a[k]).sum())
            .collect();
        let mut leave: Option<(usize, f64)> = None;
        for r in 0..m {
            if alpha[r] > 1e-11 {
                let theta = self.x_b[r].max(0.0) / alpha[r];
                let better = match leave {
                    None => true,
                    Some((lr, lt)) => {
                        if theta < lt - 1e-13 * lt.max(1.0) {
                            true
                        } else if theta <= lt + 1e-13 * lt.max(1.0) {
                            // ties: drive artificials out first, then by index
                            let rank = |v: Var| match v {
                                Var::Artificial(i) => (0, i),
                                Var::Column(c) => (1, c),
                            };
                            if bland {
                                rank(self.basis[r]) < rank(self.basis[lr])
                            } else {
                                alpha[r] > alpha[lr]
                            }
                        } else {
                            false
                        }
                    }
                };
                if better {
                    leave = Some((r, theta));
                }
            }
        }
        let Some((r, theta)) = leave else {
            return Err(Error::NumericalInstability(
                "phase-1 ratio test found no pivot row".into(),
            ));
        };
        let p = alpha[r];
        for k in 0..m {
            self.binv[r * m + k] /= p;
        }
        self.x_b[r] = self.x_b[r].max(0.0) / p;
        for (i, &f) in alpha.iter().enumerate() {
            if i != r && f != 0.0 {
                for k in 0..m {
                    self.binv[i * m + k] -= f * self.binv[r * m + k];
                }
                self.x_b[i] -= f * self.x_b[r];
            }
        }
        self.basis[r] = Var::Column(j);
        self.pivots += 1;
        if self.pivots.is_multiple_of(32) {
            self.refactor()?;
        }
        Ok(theta)
    }

    fn in_basis(&self, j: usize) -> bool {
        self.basis.contains(&Var::Column(j))
    }
}

const PRICE_TOL: f64 = 1e-11;

/// Decide q ∈ conv(pts) and return a verified certificate.
pub fn contains_points(pts: PointSet<'_>, q: &[f64], opts: &LpOptions) -> Result<MembershipResult> {
    if q.len() != pts.n {
        return Err(Error::invalid(format!(
            "query has dimension {} but the points live in R^{}",
            q.len(),
            pts.n
        )));
    }
    if pts.count == 0 {
        return Err(Error::invalid("empty point set"));
    }
    if q.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("query must be finite"));
    }
    let m = pts.n + 1;
    let mut lp = Phase1::new(pts, q);
    let scale = 1.0 + norm(q);

    // working set: everything for small inputs, else the points that reach
    // furthest in the direction of q
    let small = !opts.column_generation || pts.count <= 64 * m;
    let mut working: Vec<usize> = if small {
        (0..pts.count).collect()
    } else {
        let k = 4 * m;
        let mut scored: Vec<(f64, usize)> =
            (0..pts.count).map(|j| (dot(pts.point(j), q), j)).collect();
        scored.select_nth_unstable_by(k, |a, b| b.0.total_cmp(&a.0));
        let mut w: Vec<usize> = scored[..k].iter().map(|&(_, j)| j).collect();
        w.sort_unstable();
        w
    };
    let mut in_working = if small {
        Vec::new()
    } else {
        vec![false; pts.count]
    };
    for &j in &working {
        if !small {
            in_working[j] = true;
        }
    }

    let mut degenerate_run = 0usize;
    let mut bland = false;
    loop {
        if lp.objective() <= opts.feas_tol * scale {
            break;
        }
        if lp.pivots >= opts.max_pivots {
            return Err(Error::NumericalInstability(format!(
                "phase 1 did not finish within {} pivots",
                opts.max_pivots
            )));
        }
        let y = lp.duals();
        let mut entering: Option<(usize, f64)> = None;
        for &j in &working {
            let d = lp.reduced_cost(&y, j);
            if d < -PRICE_TOL && !lp.in_basis(j) {
                if bland {
                    entering = Some((j, d));
                    break;
                }
                if entering.is_none_or(|(_, best)| d < best) {
                    entering = Some((j, d));
                }
            }
        }
        if entering.is_none() && !small {
            // full pricing pass over the columns outside the working set
            let mut fresh: Vec<(f64, usize)> = (0..pts.count)
                .filter(|&j| !in_working[j])
                .filter_map(|j| {
                    let d = lp.reduced_cost(&y, j);
                    (d < -PRICE_TOL).then_some((d, j))
                })
                .collect();
            if !fresh.is_empty() {
                let k = (2 * m).min(fresh.len());
                if fresh.len() > k {
                    fresh.select_nth_unstable_by(k - 1, |a, b| a.0.total_cmp(&b.0));
                    fresh.truncate(k);
                }
                fresh.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
                for &(_, j) in &fresh {
                    in_working[j] = true;
                    working.push(j);
                }
                entering = Some((fresh[0].1, fresh[0].0));
            }
        }
        let Some((j, _)) = entering else {
            break;
        };
        let theta = lp.pivot(j, bland)?;
        if theta <= 1e-14 {
            degenerate_run += 1;
            if degenerate_run > 50 {
                bland = true;
            }
        } else {
            degenerate_run = 0;
            bland = false;
        }
    }
    lp.refactor()?;

    let inside_first = lp.objective() <= opts.feas_tol * scale;
    let weights = || weights_certificate(&lp, q, opts);
    let separator = || separator_certificate(&lp, q, opts);
    let (inside, certificate) = if inside_first {
        match weights() {
            Some(c) => (true, c),
            None => match separator() {
                Some(c) => (false, c),
                None => {
                    return Err(Error::NumericalInstability(
                        "no certificate verifies".into(),
                    ))
                }
            },
        }
    } else {
        match separator() {
            Some(c) => (false, c),
            None => match weights() {
                Some(c) => (true, c),
                None => {
                    return Err(Error::NumericalInstability(
                        "no certificate verifies".into(),
                    ))
                }
            },
        }
    };
    Ok(MembershipResult {
        inside,
        certificate,
        pivots: lp.pivots,
    })
}

fn weights_certificate(lp: &Phase1<'_>, q: &[f64], opts: &LpOptions) -> Option<Certificate> {
    let mut indices = Vec::new();
    let mut weights = Vec::new();
    for (r, v) in lp.basis.iter().enumerate() {
        if let Var::Column(j) = *v {
            let w = lp.x_b[r];
            if w < -opts.feas_tol {
                return None;
            }
            if w > 0.0 {
                indices.push(j);
                weights.push(w);
            }
        }
    }
    let cert = Certificate::Weights { indices, weights };
    verify(lp.pts, q, &cert, opts).then_some(cert)
}

fn separator_certificate(lp: &Phase1<'_>, q: &[f64], opts: &LpOptions) -> Option<Certificate> {
    let y = lp.duals();
    let n = lp.pts.n;
    let direction: Vec<f64> = (0..n).map(|i| y[i] * lp.sign[i]).collect();
    let bound = (0..lp.pts.count)
        .map(|j| dot(&direction, lp.pts.point(j)))
        .fold(f64::NEG_INFINITY, f64::max);
    let cert = Certificate::Separator { direction, bound };
    verify(lp.pts, q, &cert, opts).then_some(cert)
}

/// Re-check a certificate against the raw points.
pub fn verify(pts: PointSet<'_>, q: &[f64], cert: &Certificate, opts: &LpOptions) -> bool {
    let scale = 1.0 + norm(q);
    match cert {
        Certificate::Weights { indices, weights } => {
            if indices.len() != weights.len() || weights.iter().any(|w| !(*w >= 0.0)) {
                return false;
            }
            if indices.iter().any(|&j| j >= pts.count) {
                return false;
            }
            let total: f64 = weights.iter().sum();
            if (total - 1.0).abs() > opts.cert_tol {
                return false;
            }
            let mut recon = vec![0.0; pts.n];
            for (&j, &w) in indices.iter().zip(weights) {
                for (r, x) in recon.iter_mut().zip(pts.point(j)) {
                    *r += w * x;
                }
            }
            let err: f64 = recon
                .iter()
                .zip(q)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            err <= opts.cert_tol * scale
        }
        Certificate::Separator { direction, bound } => {
            let dn = norm(direction);
            if !(dn > 0.0) || direction.len() != pts.n {
                return false;
            }
            let top = (0..pts.count)
                .map(|j| dot(direction, pts.point(j)))
                .fold(f64::NEG_INFINITY, f64::max);
            top <= *bound && *bound < dot(direction, q) - opts.feas_tol * dn * scale
        }
    }
}
