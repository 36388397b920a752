//! Bracketed scalar root finding: Newton steps guarded by bisection.

use crate::error::{Error, Result};

/// Default iteration cap.
pub const MAX_ITER: usize = 200;

/// Stopping tolerances for [`solve_root`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RootTolerance {
    /// Absolute residual tolerance.
    pub atol: f64,
    /// Relative residual tolerance, multiplied by `scale`.
    pub rtol: f64,
    /// Magnitude of the terms making up the residual.
    pub scale: f64,
    pub max_iter: usize,
}

impl Default for RootTolerance {
    fn default() -> Self {
        RootTolerance {
            atol: 0.0,
            rtol: 1e-13,
            scale: 1.0,
            max_iter: MAX_ITER,
        }
    }
}

impl RootTolerance {
    pub fn with_rtol(rtol: f64) -> Self {
        RootTolerance {
            rtol,
            ..Self::default()
        }
    }

    pub fn scaled(mut self, scale: f64) -> Self {
        self.scale = scale;
        self
    }

    fn threshold(&self) -> f64 {
        self.atol + self.rtol * self.scale
    }
}

/// A nondecreasing residual on a bracket `[lo, hi]` with a sign change.
///
/// The residual returns `(R(t), R'(t))`; a non-finite or zero derivative
/// forces a bisection step.
pub struct RootProblem<F> {
    pub residual: F,
    pub lo: f64,
    pub hi: f64,
    pub tol: RootTolerance,
}

/// Outcome of a root solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RootReport {
    pub root: f64,
    pub residual: f64,
    pub iterations: usize,
    pub lo: f64,
    pub hi: f64,
}

/// Solves `R(t) = 0` on `[lo, hi]`.
///
/// Terminates when `|R(t)| <= atol + rtol * scale` or when the bracket has
/// shrunk below `1e-14 * max(1, hi)`. Endpoint roots are accepted directly.
pub fn solve_root<F>(prob: RootProblem<F>) -> Result<RootReport>
where
    F: FnMut(f64) -> (f64, f64),
{
    solve_root_from(prob, None)
}

/// A few Newton steps from `guess` without a bracket.
///
/// Returns `None` unless the residual test is met while every step stays
/// inside the sign-change interval seen so far and `R'` is finite and positive.
pub fn polish<F>(mut residual: F, guess: f64, tol: RootTolerance) -> Option<RootReport>
where
    F: FnMut(f64) -> (f64, f64),
{
    const STEPS: usize = 4;
    let thr = tol.threshold();
    let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
    let mut x = guess;
    for it in 1..=STEPS {
        let (f, df) = residual(x);
        if !f.is_finite() {
            return None;
        }
        if f.abs() <= thr {
            return Some(RootReport {
                root: x,
                residual: f,
                iterations: it,
                lo: if lo.is_finite() { lo } else { x },
                hi: if hi.is_finite() { hi } else { x },
            });
        }
        if f < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        if !(df.is_finite() && df > 0.0) {
            return None;
        }
        let next = x - f / df;
        if !(next > lo && next < hi) {
            return None;
        }
        x = next;
    }
    None
}

/// [`solve_root`] started from `guess` when it lies strictly inside the bracket.
pub fn solve_root_from<F>(prob: RootProblem<F>, guess: Option<f64>) -> Result<RootReport>
where
    F: FnMut(f64) -> (f64, f64),
{
    solve(prob, guess, None)
}

/// Like [`solve_root_from`], for brackets whose endpoints come from inexact
/// inner solves: an endpoint on the wrong side of the root is pushed outward
/// with a doubling step, never below `floor`.
pub fn solve_root_expanding<F>(
    prob: RootProblem<F>,
    floor: f64,
    guess: Option<f64>,
) -> Result<RootReport>
where
    F: FnMut(f64) -> (f64, f64),
{
    solve(prob, guess, Some(floor))
}

fn solve<F>(prob: RootProblem<F>, guess: Option<f64>, expand: Option<f64>) -> Result<RootReport>
where
    F: FnMut(f64) -> (f64, f64),
{
    let RootProblem {
        mut residual,
        mut lo,
        mut hi,
        tol,
    } = prob;
    let thr = tol.threshold();

    let (mut f_lo, mut df_lo) = residual(lo);
    let (mut f_hi, mut df_hi) = residual(hi);
    if let Some(floor) = expand {
        let mut step = (hi - lo).max(1e-13 * hi.abs().max(lo.abs()).max(f64::MIN_POSITIVE));
        for _ in 0..64 {
            if !(f_hi < 0.0) {
                break;
            }
            hi += step;
            step *= 2.0;
            (f_hi, df_hi) = residual(hi);
        }
        step = (hi - lo).max(1e-13 * lo.abs().max(f64::MIN_POSITIVE));
        for _ in 0..64 {
            if !(lo > floor && f_lo > 0.0) {
                break;
            }
            lo = (lo - step).max(floor);
            step *= 2.0;
            (f_lo, df_lo) = residual(lo);
        }
    }
    let width_tol = 1e-14 * hi.abs().max(1.0);
    let report = |root, residual, iterations| RootReport {
        root,
        residual,
        iterations,
        lo,
        hi,
    };

    if f_lo.abs() <= thr || (f_lo > 0.0 && hi - lo <= width_tol) {
        return Ok(report(lo, f_lo, 0));
    }
    if f_hi.abs() <= thr {
        return Ok(report(hi, f_hi, 0));
    }
    if f_lo > 0.0 || f_hi < 0.0 || f_lo.is_nan() || f_hi.is_nan() {
        return Err(Error::BracketViolation {
            lo,
            hi,
            r_lo: f_lo,
            r_hi: f_hi,
        });
    }

    let (mut a, mut b) = (lo, hi);
    let (mut fa, mut fb) = (f_lo, f_hi);
    // start from the guess, else the endpoint with the usable derivative closest to the root
    let mut x;
    let (mut fx, mut dfx);
    let guess = guess.filter(|g| *g > lo && *g < hi);
    if let Some(g) = guess {
        x = g;
        (fx, dfx) = residual(g);
        if fx.abs() <= thr {
            return Ok(report(x, fx, 1));
        }
        if fx < 0.0 {
            a = x;
            fa = fx;
        } else {
            b = x;
            fb = fx;
        }
    } else if df_hi.is_finite() && df_hi > 0.0 && (fb.abs() <= fa.abs() || !df_lo.is_finite()) {
        x = b;
        fx = fb;
        dfx = df_hi;
    } else if df_lo.is_finite() && df_lo > 0.0 {
        x = a;
        fx = fa;
        dfx = df_lo;
    } else {
        x = a - fa * (b - a) / (fb - fa);
        if !(x > a && x < b) {
            x = 0.5 * (a + b);
        }
        let (f, df) = residual(x);
        fx = f;
        dfx = df;
        if fx.abs() <= thr {
            return Ok(report(x, fx, 1));
        }
        if fx < 0.0 {
            a = x;
            fa = fx;
        } else {
            b = x;
            fb = fx;
        }
    }
    let mut dx_old = b - a;
    let mut dx = dx_old;

    for iter in 1..=tol.max_iter {
        let newton_ok = dfx.is_finite() && dfx > 0.0 && {
            let step = fx / dfx;
            let xn = x - step;
            xn > a && xn < b && (2.0 * step).abs() <= dx_old.abs()
        };
        if newton_ok {
            dx_old = dx;
            dx = fx / dfx;
            x -= dx;
        } else {
            dx_old = dx;
            dx = 0.5 * (b - a);
            x = a + dx;
        }
        let (f, df) = residual(x);
        fx = f;
        dfx = df;
        if !fx.is_finite() {
            // treat as a sign-ambiguous point and bisect around it
            fx = if x - a < b - x {
                -f64::MIN_POSITIVE
            } else {
                f64::MIN_POSITIVE
            };
            dfx = f64::NAN;
        }
        if fx.abs() <= thr {
            return Ok(report(x, fx, iter));
        }
        if fx < 0.0 {
            a = x;
            fa = fx;
        } else {
            b = x;
            fb = fx;
        }
        if b - a <= width_tol || dx.abs() <= 4.0 * f64::EPSILON * x.abs().max(f64::MIN_POSITIVE) {
            let root = if fa.abs() <= fb.abs() { a } else { b };
            let res = if fa.abs() <= fb.abs() { fa } else { fb };
            // x itself may be the best point when the Newton step was tiny
            return Ok(if fx.abs() <= res.abs() {
                report(x, fx, iter)
            } else {
                report(root, res, iter)
            });
        }
    }
    Err(Error::RootNotConverged {
        iterations: tol.max_iter,
        lo,
        hi,
        t: x,
        residual: fx,
    })
}

/// Central-difference derivative with step `1e-7 * max(1, |t|)`, one-sided
/// when the left point would leave `[floor, inf)`.
pub fn numeric_derivative<F: FnMut(f64) -> f64>(mut f: F, t: f64, floor: f64) -> f64 {
    let h = 1e-7 * t.abs().max(1.0);
    if t - h >= floor {
        (f(t + h) - f(t - h)) / (2.0 * h)
    } else {
        (f(t + h) - f(t)) / h
    }
}

/// Solves an increasing equation `g(theta) = 0` on `(0, inf)` through `y = ln theta`.
///
/// `g_log(y)` returns `(g(e^y), d/dy g(e^y))`. The bracket starts at
/// `[y_lo, y_hi]` and is widened until it changes sign.
pub(crate) fn solve_log_increasing<F>(
    mut g_log: F,
    mut y_lo: f64,
    mut y_hi: f64,
    rtol: f64,
    scale: f64,
) -> Result<f64>
where
    F: FnMut(f64) -> (f64, f64),
{
    let mut step = 1.0;
    while g_log(y_lo).0 > 0.0 {
        y_lo -= step;
        step *= 2.0;
        if y_lo < -800.0 {
            return Ok(0.0);
        }
    }
    step = 1.0;
    while g_log(y_hi).0 < 0.0 {
        y_hi += step;
        step *= 2.0;
        if y_hi > 800.0 {
            return Err(Error::Degenerate(
                "no upper bracket for log-variable solve".into(),
            ));
        }
    }
    let r = solve_root(RootProblem {
        residual: g_log,
        lo: y_lo,
        hi: y_hi,
        tol: RootTolerance::with_rtol(rtol).scaled(scale),
    })?;
    Ok(r.root.exp())
}
