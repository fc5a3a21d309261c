//! Globally adaptive Gauss-Kronrod (7/15) quadrature.
//!
//! The integrand may be vector valued (`[f64; K]`); all components share the
//! subdivision and the interval with the largest weighted error is bisected
//! first, as in QUADPACK's QAG.

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_5,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_48,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_224,
    0.063_092_092_629_978_56,
    0.104_790_010_322_250_19,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_42,
    0.204_432_940_075_298_89,
    0.209_482_141_084_727_82,
];

// Gauss weights for the odd-indexed Kronrod nodes (and the centre).
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_64,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// Tolerances and subdivision limit for one integration call.
#[derive(Debug, Clone, Copy)]
pub struct QuadOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_intervals: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        QuadOptions {
            abs_tol: 1e-12,
            rel_tol: 0.0,
            max_intervals: 4000,
        }
    }
}

impl QuadOptions {
    pub fn absolute(tol: f64) -> Self {
        QuadOptions {
            abs_tol: tol,
            ..Default::default()
        }
    }

    pub fn with_rel(mut self, rel: f64) -> Self {
        self.rel_tol = rel;
        self
    }
}

#[derive(Debug, Clone, Copy)]
pub struct QuadResult<const K: usize> {
    pub value: [f64; K],
    pub error: [f64; K],
    pub evaluations: usize,
}

#[derive(Clone, Copy)]
struct Piece<const K: usize> {
    a: f64,
    b: f64,
    value: [f64; K],
    error: [f64; K],
}

fn rescale_error(err: f64, res_abs: f64, res_asc: f64) -> f64 {
    let mut e = err.abs();
    if res_asc != 0.0 && e != 0.0 {
        let scale = (200.0 * e / res_asc).powf(1.5);
        e = if scale < 1.0 {
            res_asc * scale
        } else {
            res_asc
        };
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        let min_err = 50.0 * f64::EPSILON * res_abs;
        if min_err > e {
            e = min_err;
        }
    }
    e
}

fn gk15<const K: usize, F>(f: &F, a: f64, b: f64) -> Piece<K>
where
    F: Fn(f64) -> [f64; K],
{
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let habs = half.abs();

    let fc = f(center);
    let mut res_k = [0.0; K];
    let mut res_g = [0.0; K];
    let mut res_abs = [0.0; K];
    for c in 0..K {
        res_k[c] = fc[c] * WGK[7];
        res_g[c] = fc[c] * WG[3];
        res_abs[c] = res_k[c].abs();
    }
    let mut fv1 = [[0.0; K]; 7];
    let mut fv2 = [[0.0; K]; 7];
    for j in 0..7 {
        let x = half * XGK[j];
        let f1 = f(center - x);
        let f2 = f(center + x);
        for c in 0..K {
            let s = f1[c] + f2[c];
            res_k[c] += WGK[j] * s;
            res_abs[c] += WGK[j] * (f1[c].abs() + f2[c].abs());
            if j % 2 == 1 {
                res_g[c] += WG[j / 2] * s;
            }
        }
        fv1[j] = f1;
        fv2[j] = f2;
    }

    let mut value = [0.0; K];
    let mut error = [0.0; K];
    for c in 0..K {
        let mean = res_k[c] * 0.5;
        let mut res_asc = WGK[7] * (fc[c] - mean).abs();
        for j in 0..7 {
            res_asc += WGK[j] * ((fv1[j][c] - mean).abs() + (fv2[j][c] - mean).abs());
        }
        value[c] = res_k[c] * half;
        error[c] = rescale_error(
            (res_k[c] - res_g[c]) * half,
            res_abs[c] * habs,
            res_asc * habs,
        );
    }
    Piece { a, b, value, error }
}

/// Integrate a vector-valued function over consecutive breakpoints.
///
/// Converges when every component satisfies
/// `error <= max(abs_tol[c], rel_tol * |value|)`.
pub fn integrate_vec<const K: usize, F>(
    f: F,
    breaks: &[f64],
    abs_tol: [f64; K],
    opts: QuadOptions,
) -> Result<QuadResult<K>>
where
    F: Fn(f64) -> [f64; K],
{
    if breaks.len() < 2 {
        return Err(Error::invalid("quadrature needs at least two breakpoints"));
    }
    let mut pieces: Vec<Piece<K>> = Vec::new();
    for w in breaks.windows(2) {
        if !(w[1] >= w[0]) || !w[0].is_finite() || !w[1].is_finite() {
            return Err(Error::invalid(format!(
                "quadrature breakpoints must be finite and non-decreasing, got {} then {}",
                w[0], w[1]
            )));
        }
        if w[1] > w[0] {
            pieces.push(gk15(&f, w[0], w[1]));
        }
    }
    let mut evaluations = 15 * pieces.len();
    if pieces.is_empty() {
        return Ok(QuadResult {
            value: [0.0; K],
            error: [0.0; K],
            evaluations,
        });
    }

    let totals = |pieces: &[Piece<K>]| {
        let mut v = [0.0; K];
        let mut e = [0.0; K];
        for p in pieces {
            for c in 0..K {
                v[c] += p.value[c];
                e[c] += p.error[c];
            }
        }
        (v, e)
    };
    let tolerance = |v: &[f64; K]| {
        let mut t = [0.0; K];
        for c in 0..K {
            t[c] = abs_tol[c].max(opts.rel_tol * v[c].abs());
        }
        t
    };
    // weighted error: how far a piece is from its share of the budget
    let badness = |p: &Piece<K>, tol: &[f64; K]| {
        (0..K)
            .map(|c| {
                if tol[c] > 0.0 {
                    p.error[c] / tol[c]
                } else {
                    p.error[c]
                }
            })
            .fold(0.0f64, f64::max)
    };

    loop {
        let (value, error) = totals(&pieces);
        let tol = tolerance(&value);
        if (0..K).all(|c| error[c] <= tol[c]) {
            return Ok(QuadResult {
                value,
                error,
                evaluations,
            });
        }
        if pieces.len() >= opts.max_intervals {
            let (worst, worst_tol) =
                (0..K)
                    .map(|c| (error[c], tol[c]))
                    .fold(
                        (0.0, 0.0),
                        |acc, x| if x.0 - x.1 > acc.0 - acc.1 { x } else { acc },
                    );
            return Err(Error::QuadratureFailure {
                tol: worst_tol,
                err: worst,
            });
        }
        let (idx, _) = pieces
            .iter()
            .enumerate()
            .map(|(i, p)| (i, badness(p, &tol)))
            .fold((0, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
        let p = pieces.swap_remove(idx);
        let mid = 0.5 * (p.a + p.b);
        if !(mid > p.a && mid < p.b) {
            // interval cannot be split further in double precision
            return Err(Error::QuadratureFailure {
                tol: tol.iter().cloned().fold(f64::INFINITY, f64::min),
                err: error.iter().cloned().fold(0.0, f64::max),
            });
        }
        pieces.push(gk15(&f, p.a, mid));
        pieces.push(gk15(&f, mid, p.b));
        evaluations += 30;
    }
}

/// Scalar convenience wrapper around [`integrate_vec`].
pub fn integrate<F>(f: F, breaks: &[f64], opts: QuadOptions) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    let r = integrate_vec(|x| [f(x)], breaks, [opts.abs_tol], opts)?;
    Ok(r.value[0])
}
