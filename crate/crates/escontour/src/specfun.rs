//! Scalar special functions underlying the saddle-point equations: the
//! standard normal CDF, its density and inverse, and the integrated helpers
//! `psi_fn` and `w_fn` (antiderivative chain W' = Psi, Psi' = Phi).
//!
//! The CDF is evaluated through a rational-approximation `erfc` (Cody's
//! three-region scheme) so the far tails keep full relative accuracy; the
//! inverse uses a rational initial guess refined by Newton iterations on
//! `norm_cdf`. Difference helpers evaluate Phi/Psi/W increments without
//! cancellation for small steps, which the equation solvers rely on.

#![allow(clippy::excessive_precision)] // published coefficient tables keep their canonical digits

use crate::error::{Error, Result};

/// 1/sqrt(2*pi)
pub const INV_SQRT_2PI: f64 = 0.39894228040143267794;
/// sqrt(2*pi)
pub const SQRT_2PI: f64 = 2.5066282746310005024;
const FRAC_1_SQRT_2: f64 = std::f64::consts::FRAC_1_SQRT_2;

// ---------------------------------------------------------------------------
// erfc: Cody's rational Chebyshev approximation (three regions), |err| < 1 ulp
// in erf and a few ulps relative in erfc over the full double range.
// ---------------------------------------------------------------------------

const ERF_A: [f64; 5] = [
    3.16112374387056560e0,
    1.13864154151050156e2,
    3.77485237685302021e2,
    3.20937758913846947e3,
    1.85777706184603153e-1,
];
const ERF_B: [f64; 4] = [
    2.36012909523441209e1,
    2.44024637934444173e2,
    1.28261652607737228e3,
    2.84423683343917062e3,
];
const ERF_C: [f64; 9] = [
    5.64188496988670089e-1,
    8.88314979438837594e0,
    6.61191906371416295e1,
    2.98635138197400131e2,
    8.81952221241769090e2,
    1.71204761263407058e3,
    2.05107837782607147e3,
    1.23033935479799725e3,
    2.15311535474403846e-8,
];
const ERF_D: [f64; 8] = [
    1.57449261107098347e1,
    1.17693950891312499e2,
    5.37181101862009858e2,
    1.62138957456669019e3,
    3.29079923573345963e3,
    4.36261909014324716e3,
    3.43936767414372164e3,
    1.23033935480374942e3,
];
const ERF_P: [f64; 6] = [
    3.05326634961232344e-1,
    3.60344899949804439e-1,
    1.25781726111229246e-1,
    1.60837851487422766e-2,
    6.58749161529837803e-4,
    1.63153871373020978e-2,
];
const ERF_Q: [f64; 5] = [
    2.56852019228982242e0,
    1.87295284992346047e0,
    5.27905102951428412e-1,
    6.05183413124413191e-2,
    2.33520497626869185e-3,
];
const INV_SQRT_PI: f64 = 5.6418958354775628695e-1;

/// erf(x) for |x| <= 0.46875.
fn erf_small(x: f64) -> f64 {
    let z = x * x;
    let mut num = ERF_A[4] * z;
    let mut den = z;
    for i in 0..3 {
        num = (num + ERF_A[i]) * z;
        den = (den + ERF_B[i]) * z;
    }
    x * (num + ERF_A[3]) / (den + ERF_B[3])
}

/// erfc(y) for y in (0.46875, 4].
fn erfc_mid(y: f64) -> f64 {
    let mut num = ERF_C[8] * y;
    let mut den = y;
    for i in 0..7 {
        num = (num + ERF_C[i]) * y;
        den = (den + ERF_D[i]) * y;
    }
    let result = (num + ERF_C[7]) / (den + ERF_D[7]);
    // Split exp(-y^2) to avoid the rounding of y*y contaminating the tail.
    let ysq = (y * 16.0).trunc() / 16.0;
    let del = (y - ysq) * (y + ysq);
    (-ysq * ysq).exp() * (-del).exp() * result
}

/// erfc(y) for y > 4, scaled-form evaluation.
fn erfc_large(y: f64) -> f64 {
    if y >= 27.3 {
        return 0.0; // exp(-y^2) underflows past the subnormal range
    }
    let z = 1.0 / (y * y);
    let mut num = ERF_P[5] * z;
    let mut den = z;
    for i in 0..4 {
        num = (num + ERF_P[i]) * z;
        den = (den + ERF_Q[i]) * z;
    }
    let poly = z * (num + ERF_P[4]) / (den + ERF_Q[4]);
    let result = (INV_SQRT_PI - poly) / y;
    let ysq = (y * 16.0).trunc() / 16.0;
    let del = (y - ysq) * (y + ysq);
    (-ysq * ysq).exp() * (-del).exp() * result
}

/// Complementary error function with full relative accuracy for positive args.
pub fn erfc(x: f64) -> f64 {
    let y = x.abs();
    let tail = if y <= 0.46875 {
        return 1.0 - erf_small(x);
    } else if y <= 4.0 {
        erfc_mid(y)
    } else {
        erfc_large(y)
    };
    if x >= 0.0 {
        tail
    } else {
        2.0 - tail
    }
}

// ---------------------------------------------------------------------------
// The four functions of the saddle-point equations
// ---------------------------------------------------------------------------

/// Standard normal CDF. Total on finite inputs; absolute error below 1e-15.
pub fn norm_cdf(x: f64) -> f64 {
    0.5 * erfc(-x * FRAC_1_SQRT_2)
}

/// Upper tail 1 - Phi(x), with full relative accuracy for large positive `x`.
pub fn norm_cdf_upper(x: f64) -> f64 {
    0.5 * erfc(x * FRAC_1_SQRT_2)
}

/// Standard normal density h(x) = exp(-x^2/2)/sqrt(2*pi).
pub fn norm_pdf(x: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * x * x).exp()
}

/// Inverse standard normal CDF on (0, 1).
///
/// Rational initial guess (Acklam's three-region approximation, ~1.2e-9
/// relative) polished by two Newton iterations on `norm_cdf`, which brings
/// the result to |Phi(x) - p| <= 1e-14.
pub fn norm_cdf_inv(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::domain(format!(
            "norm_cdf_inv requires p in (0,1), got {p}"
        )));
    }
    // Work on the small side; 1-p is exact for p >= 0.5 (Sterbenz).
    let (q, sign) = if p <= 0.5 { (p, -1.0) } else { (1.0 - p, 1.0) };
    let mut x = -sign * acklam_lower(q);
    // Newton on Phi: the density is the exact derivative. Skip when the
    // density underflows (|x| beyond ~38); the guess is already tail-exact
    // to ~1e-9 relative there.
    for _ in 0..2 {
        let pdf = norm_pdf(x);
        if pdf < 1e-300 {
            break;
        }
        // Evaluate the CDF error on the small side to preserve relative accuracy.
        let err = if p <= 0.5 {
            norm_cdf(x) - p
        } else {
            q - norm_cdf_upper(x)
        };
        x -= err / pdf;
    }
    Ok(x)
}

/// Acklam's rational approximation of Phi^{-1}(q) for q in (0, 0.5].
fn acklam_lower(q: f64) -> f64 {
    const A: [f64; 6] = [
        -3.969683028665376e+01,
        2.209460984245205e+02,
        -2.759285104469687e+02,
        1.383577518672690e+02,
        -3.066479806614716e+01,
        2.506628277459239e+00,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e+01,
        1.615858368580409e+02,
        -1.556989798598866e+02,
        6.680131188771972e+01,
        -1.328068155288572e+01,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-03,
        -3.223964580411365e-01,
        -2.400758277161838e+00,
        -2.549732539343734e+00,
        4.374664141464968e+00,
        2.938163982698783e+00,
    ];
    const D: [f64; 4] = [
        7.784695709041462e-03,
        3.224671290700398e-01,
        2.445134137142996e+00,
        3.754408661907416e+00,
    ];
    const Q_LOW: f64 = 0.02425;
    if q < Q_LOW {
        let t = (-2.0 * q.ln()).sqrt();
        (((((C[0] * t + C[1]) * t + C[2]) * t + C[3]) * t + C[4]) * t + C[5])
            / ((((D[0] * t + D[1]) * t + D[2]) * t + D[3]) * t + 1.0)
    } else {
        let u = q - 0.5;
        let t = u * u;
        (((((A[0] * t + A[1]) * t + A[2]) * t + A[3]) * t + A[4]) * t + A[5]) * u
            / (((((B[0] * t + B[1]) * t + B[2]) * t + B[3]) * t + B[4]) * t + 1.0)
    }
}

/// Psi(x) = x*Phi(x) + h(x); the antiderivative of Phi. Nonnegative.
pub fn psi_fn(x: f64) -> f64 {
    if x <= 0.0 {
        psi_at_neg(-x)
    } else {
        // Psi(x) = x + Psi(-x), exact symmetry; keeps the tiny correction
        // at full relative accuracy for large x.
        x + psi_at_neg(x)
    }
}

/// W(x) = ((x^2+1)/2)*Phi(x) + (x/2)*h(x); the antiderivative of Psi.
pub fn w_fn(x: f64) -> f64 {
    if x <= 0.0 {
        w_at_neg(-x)
    } else {
        0.5 * (x * x + 1.0) - w_at_neg(x)
    }
}

/// Psi(-a) for a >= 0, evaluated in the tail form h(a) - a*(1-Phi(a)).
pub(crate) fn psi_at_neg(a: f64) -> f64 {
    norm_pdf(a) - a * norm_cdf_upper(a)
}

/// W(-a) for a >= 0, evaluated in the tail form.
pub(crate) fn w_at_neg(a: f64) -> f64 {
    0.5 * (a * a + 1.0) * norm_cdf_upper(a) - 0.5 * a * norm_pdf(a)
}

// ---------------------------------------------------------------------------
// Cancellation-free increments used by the equation solvers.
//
// Each evaluates F(z+d) - F(z) for d >= 0. For small steps the Taylor series
// around z is summed with the Hermite recurrence for the density derivatives
// h^(n)(z) = (-1)^n He_n(z) h(z); for large steps the tail/symmetry forms of
// the functions keep the subtraction benign.
// ---------------------------------------------------------------------------

fn taylor_applicable(z: f64, d: f64) -> bool {
    d >= 0.0 && d * (z.abs() + d) <= 0.5 && d <= 0.5
}

/// Sum_{n>=0} (-1)^n He_n(z) d^(n+1+shift) / (n+1+shift)! — the `shift`-fold
/// iterated integral of the density over [z, z+d], divided by h(z).
fn density_integral_series(z: f64, d: f64, shift: u32) -> f64 {
    let mut he_prev = 0.0f64; // He_{-1}
    let mut he = 1.0f64; // He_0
    // coefficient d^(n+1+shift)/(n+1+shift)!
    let mut coef = d;
    for k in 1..=shift {
        coef *= d / (k as f64 + 1.0);
    }
    let mut sign = 1.0f64;
    let mut acc = 0.0f64;
    // individual terms may vanish (odd Hermite values at z = 0), so stop
    // only after two consecutive negligible terms
    let mut small_streak = 0u32;
    for n in 0..48u32 {
        let term = sign * he * coef;
        acc += term;
        if term.abs() <= acc.abs() * 1e-18 + 1e-320 {
            small_streak += 1;
            if small_streak >= 2 {
                break;
            }
        } else {
            small_streak = 0;
        }
        // He_{n+1} = z He_n - n He_{n-1}
        let he_next = z * he - (n as f64) * he_prev;
        he_prev = he;
        he = he_next;
        coef *= d / ((n + 2 + shift) as f64);
        sign = -sign;
    }
    acc
}

/// Phi(z+d) - Phi(z) for d >= 0, free of cancellation.
pub fn cdf_diff(z: f64, d: f64) -> f64 {
    debug_assert!(d >= 0.0);
    if d == 0.0 {
        return 0.0;
    }
    if taylor_applicable(z, d) {
        norm_pdf(z) * density_integral_series(z, d, 0)
    } else if z >= 0.0 {
        norm_cdf_upper(z) - norm_cdf_upper(z + d)
    } else {
        norm_cdf(z + d) - norm_cdf(z)
    }
}

/// Psi(z+d) - Psi(z) for d >= 0, free of cancellation.
pub fn psi_diff(z: f64, d: f64) -> f64 {
    debug_assert!(d >= 0.0);
    if d == 0.0 {
        return 0.0;
    }
    if taylor_applicable(z, d) {
        d * norm_cdf(z) + norm_pdf(z) * density_integral_series(z, d, 1)
    } else if z >= 0.0 {
        d + psi_at_neg(z + d) - psi_at_neg(z)
    } else if z + d <= 0.0 {
        psi_at_neg(-(z + d)) - psi_at_neg(-z)
    } else {
        psi_fn(z + d) - psi_fn(z)
    }
}

/// W(z+d) - W(z) for d >= 0, free of cancellation.
pub fn w_diff(z: f64, d: f64) -> f64 {
    debug_assert!(d >= 0.0);
    if d == 0.0 {
        return 0.0;
    }
    if taylor_applicable(z, d) {
        d * psi_fn(z) + 0.5 * d * d * norm_cdf(z) + norm_pdf(z) * density_integral_series(z, d, 2)
    } else if z >= 0.0 {
        // W(x) = (x^2+1)/2 - W(-x): quadratic part advances exactly.
        d * z + 0.5 * d * d + w_at_neg(z) - w_at_neg(z + d)
    } else if z + d <= 0.0 {
        w_at_neg(-(z + d)) - w_at_neg(-z)
    } else {
        w_fn(z + d) - w_fn(z)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cdf_center_and_limits() {
        assert_eq!(norm_cdf(0.0), 0.5);
        assert_eq!(norm_cdf(40.0), 1.0);
        assert_eq!(norm_cdf(-40.0), 0.0);
        assert!(norm_cdf(8.0) < 1.0);
    }

    #[test]
    fn pdf_values() {
        assert!((norm_pdf(0.0) - 0.3989422804014327).abs() < 1e-16);
        assert_eq!(norm_pdf(1.3), norm_pdf(-1.3));
    }

    #[test]
    fn inverse_center_and_domain() {
        assert_eq!(norm_cdf_inv(0.5).unwrap(), 0.0);
        assert!(norm_cdf_inv(0.0).is_err());
        assert!(norm_cdf_inv(1.0).is_err());
        assert!(norm_cdf_inv(-0.1).is_err());
    }

    #[test]
    fn psi_w_at_zero() {
        assert!((psi_fn(0.0) - 0.3989422804014327).abs() < 1e-16);
        assert!((w_fn(0.0) - 0.25).abs() < 1e-16);
    }

    #[test]
    fn psi_w_symmetries_spot() {
        // Psi(x) = x + Psi(-x); W(x) = (x^2+1)/2 - W(-x)
        assert!((psi_fn(2.0) - psi_fn(-2.0) - 2.0).abs() < 1e-15);
        let x = 1.5f64;
        assert!((w_fn(x) + w_fn(-x) - 0.5 * (x * x + 1.0)).abs() < 1e-15);
    }

    #[test]
    fn diffs_match_direct_at_moderate_step() {
        for &z in &[-3.0, -0.7, 0.0, 1.1, 2.5] {
            for &d in &[0.3, 1.0, 4.0] {
                let direct = norm_cdf(z + d) - norm_cdf(z);
                assert!((cdf_diff(z, d) - direct).abs() < 1e-14);
                let direct = psi_fn(z + d) - psi_fn(z);
                assert!((psi_diff(z, d) - direct).abs() < 1e-13);
                let direct = w_fn(z + d) - w_fn(z);
                assert!((w_diff(z, d) - direct).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn diffs_small_step_match_series_scaling() {
        // For tiny d the increment is d*F'(z) to first order.
        let z = 1.2;
        let d = 1e-9;
        assert!((cdf_diff(z, d) / d - norm_pdf(z)).abs() < 1e-9);
        assert!((psi_diff(z, d) / d - norm_cdf(z)).abs() < 1e-9);
        assert!((w_diff(z, d) / d - psi_fn(z)).abs() < 1e-9);
    }
}
