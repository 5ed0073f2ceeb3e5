//! Scalar root bracketing and refinement used across the solvers.

use crate::error::{Error, Result};

/// Outcome of a bracketed root refinement.
#[derive(Debug, Clone, Copy)]
pub struct Root {
    pub x: f64,
    pub f: f64,
}

/// Brent's method on a sign-changing bracket [a, b].
///
/// `fa`/`fb` are the (already computed) endpoint values. Converges to
/// `xtol` on the abscissa or `ftol` on the residual, whichever first.
#[allow(clippy::too_many_arguments)]
pub fn brent<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    fa: f64,
    fb: f64,
    xtol: f64,
    ftol: f64,
    max_iter: usize,
) -> Result<Root> {
    if fa == 0.0 {
        return Ok(Root { x: a, f: fa });
    }
    if fb == 0.0 {
        return Ok(Root { x: b, f: fb });
    }
    if fa.signum() == fb.signum() {
        return Err(Error::Numerical(format!(
            "brent: no sign change on [{a}, {b}] (f: {fa}, {fb})"
        )));
    }
    let (mut a, mut b, mut fa, mut fb) = (a, b, fa, fb);
    let (mut c, mut fc) = (a, fa);
    let mut d = b - a;
    let mut e = d;
    for _ in 0..max_iter {
        if fb.abs() > fc.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol1 = 2.0 * f64::EPSILON * b.abs() + 0.5 * xtol;
        let xm = 0.5 * (c - b);
        if xm.abs() <= tol1 || fb.abs() <= ftol {
            return Ok(Root { x: b, f: fb });
        }
        if e.abs() >= tol1 && fa.abs() > fb.abs() {
            // inverse quadratic / secant step
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * xm * s;
                q = 1.0 - s;
            } else {
                let qq = fa / fc;
                let rr = fb / fc;
                p = s * (2.0 * xm * qq * (qq - rr) - (b - a) * (rr - 1.0));
                q = (qq - 1.0) * (rr - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            }
            p = p.abs();
            if 2.0 * p < (3.0 * xm * q - (tol1 * q).abs()).min((e * q).abs()) {
                e = d;
                d = p / q;
            } else {
                d = xm;
                e = d;
            }
        } else {
            d = xm;
            e = d;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol1 {
            d
        } else {
            tol1.copysign(xm)
        };
        fb = f(b);
        if (fb > 0.0) == (fc > 0.0) {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
    }
    Err(Error::NoConvergence(format!(
        "brent: iteration budget exhausted near x={b}"
    )))
}

/// Convenience wrapper that evaluates the endpoints itself.
pub fn brent_auto<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    xtol: f64,
    ftol: f64,
) -> Result<Root> {
    let fa = f(a);
    let fb = f(b);
    brent(f, a, b, fa, fb, xtol, ftol, 200)
}

/// Scan [lo, hi] on `n` uniform subintervals and return every sign-changing
/// bracket (a, b, fa, fb), in ascending order. Non-finite samples are skipped.
pub fn scan_brackets<F: FnMut(f64) -> Option<f64>>(
    mut f: F,
    lo: f64,
    hi: f64,
    n: usize,
) -> Vec<(f64, f64, f64, f64)> {
    let mut out = Vec::new();
    let mut prev: Option<(f64, f64)> = None;
    for i in 0..=n {
        let x = lo + (hi - lo) * (i as f64) / (n as f64);
        let y = match f(x) {
            Some(v) if v.is_finite() => v,
            _ => {
                prev = None;
                continue;
            }
        };
        if y == 0.0 {
            out.push((x, x, 0.0, 0.0));
            prev = Some((x, y));
            continue;
        }
        if let Some((xp, yp)) = prev {
            if yp.signum() != y.signum() {
                out.push((xp, x, yp, y));
            }
        }
        prev = Some((x, y));
    }
    out
}
