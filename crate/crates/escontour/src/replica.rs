//! Solver for the reduced saddle-point conditions of ES-optimized portfolios.
//!
//! At a control point (alpha, r = N/T) the three order parameters are the
//! squared out-of-sample error ratio q0, the weight susceptibility Delta and
//! the VaR proxy epsilon. The system is triangular in the scaled variables
//! chi = Delta/sqrt(q0) and zeta = epsilon/sqrt(q0):
//!
//!   (1)  Phi(chi + zeta) - Phi(zeta)               = r
//!   (2)  [Psi(chi + zeta) - Psi(zeta)] / chi       = alpha
//!   (3)  [W(chi + zeta) - W(zeta)] / (r chi^2)     = 1/(2 Delta^2)
//!          + (alpha/r)(zeta/chi) + 1/(2 chi^2) + 1/(2 r)
//!
//! (1)-(2) close on (chi, zeta) alone and are solved first; (3) is then
//! linear in 1/(2 Delta^2), so Delta follows in closed form. The point is
//! feasible exactly when that linear solve gives a positive right-hand side;
//! the phase boundary is its zero set.

use crate::error::{Error, Result};
use crate::parametric;
use crate::roots;
use crate::specfun::{
    cdf_diff, norm_cdf, norm_cdf_inv, norm_cdf_upper, norm_pdf, psi_at_neg, psi_diff, psi_fn,
    w_fn,
};

/// Residual magnitude below which a solution is certified.
pub const RESIDUAL_TOL: f64 = 1e-10;
/// Ratio-system residual target.
const RATIO_TOL: f64 = 1e-12;
/// Delta beyond this is reported as infeasible (the root escapes to infinity).
const DELTA_MAX: f64 = 1e12;
/// chi + zeta beyond this puts the top integration limit past double
/// resolution of the normal tail; the equations decouple there.
const TAIL_SPLIT: f64 = 8.0;

/// A location in the confidence-level x aspect-ratio plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlPoint {
    pub alpha: f64,
    pub r: f64,
}

impl ControlPoint {
    pub fn new(alpha: f64, r: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(Error::domain(format!(
                "confidence level must lie in (0,1], got {alpha}"
            )));
        }
        if !(r > 0.0) {
            return Err(Error::domain(format!("aspect ratio must be > 0, got {r}")));
        }
        Ok(ControlPoint { alpha, r })
    }
}

/// The replica solution at a feasible control point.
///
/// `delta` is the weight susceptibility (capital Delta of the equations),
/// `chi = delta/sqrt(q0)` the susceptibility of the relative error, and
/// `zeta = epsilon/sqrt(q0)`; the ratios stay finite across the phase
/// boundary while q0, delta and epsilon diverge on it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrderParams {
    pub q0: f64,
    pub delta: f64,
    pub epsilon: f64,
    pub chi: f64,
    pub zeta: f64,
}

/// The eliminated conjugate variables, recovered algebraically.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HatParams {
    /// Budget multiplier, lambda = 1/Delta.
    pub lambda: f64,
    /// Conjugate susceptibility, Delta_hat = 1/(2 Delta).
    pub delta_hat: f64,
    /// Conjugate overlap, q0_hat = (1 - q0)/(2 Delta^2); nonpositive.
    pub q0_hat: f64,
}

/// Financial error metrics derived from the order parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RiskReport {
    /// Relative estimation error of out-of-sample ES: sqrt(q0) - 1.
    pub est_error: f64,
    /// Sensitivity of the relative error to a uniform return shift: Delta/sqrt(q0).
    pub susceptibility: f64,
    /// VaR of the ES-optimized portfolio.
    pub var_proxy: f64,
    /// ES_out / ES^0 = sqrt(q0).
    pub es_out_ratio: f64,
    /// ES_in / ES^0 = r / ((1-alpha) Delta phi(alpha)).
    pub es_in_ratio: f64,
    /// Sample average of the optimal weights (identically 1).
    pub weight_mean: f64,
    /// Variance of the weight distribution, q0 - 1.
    pub weight_var: f64,
}

fn check_generic(p: ControlPoint) -> Result<()> {
    if p.alpha >= 1.0 {
        return Err(Error::domain(
            "alpha = 1 is the minimax line with divergent Delta; \
             use analytic::minimax_solution",
        ));
    }
    if p.r >= 1.0 {
        return Err(Error::domain(format!(
            "the ratio system has no solution for r >= 1 (got r = {})",
            p.r
        )));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Stable residual assembly
// ---------------------------------------------------------------------------

/// [Psi(z+c) - Psi(z)]/c - alpha, avoiding loss near alpha -> 1.
fn avg_psi_minus_alpha(z: f64, c: f64, alpha: f64) -> f64 {
    if c * (z.abs() + c) <= 0.5 && c <= 0.5 {
        // small increment: the series form of psi_diff carries full accuracy
        psi_diff(z, c) / c - alpha
    } else if z >= 0.0 {
        // increments of Psi above zero are c plus a tail correction;
        // 1 - alpha is exact for alpha >= 0.5.
        (1.0 - alpha) + (psi_at_neg(z + c) - psi_at_neg(z)) / c
    } else {
        psi_diff(z, c) / c - alpha
    }
}

/// The right-hand side of the linear-in-1/(2 Delta^2) third equation:
/// coef = [W(chi+zeta) - W(zeta)]/(r chi^2) - (alpha/r)(zeta/chi)
///        - 1/(2 chi^2) - 1/(2 r),
/// equal to 1/(2 Delta^2) at a solution. Assembled through the reflection
/// W(x) = (x^2+1)/2 - W(-x) so the quadratic growth cancels exactly and the
/// expression stays accurate for huge chi (alpha near 1).
fn third_eq_coef(alpha: f64, r: f64, zeta: f64, chi: f64) -> f64 {
    if chi * (zeta.abs() + chi) <= 0.5 && chi <= 0.5 {
        // small increment: the direct difference form is exact enough
        let wd = crate::specfun::w_diff(zeta, chi);
        wd / (r * chi * chi) - (alpha / r) * (zeta / chi) - 0.5 / (chi * chi) - 0.5 / r
    } else {
        let wneg = w_fn(-zeta) - w_fn(-(zeta + chi));
        zeta * (1.0 - alpha) / (r * chi) + wneg / (r * chi * chi) - 0.5 / (chi * chi)
    }
}

/// Residuals of the three reduced saddle-point equations at
/// (chi, zeta, Delta); all vanish at a solution.
pub fn residuals(p: ControlPoint, chi: f64, zeta: f64, delta: f64) -> Result<[f64; 3]> {
    if !(chi > 0.0) {
        return Err(Error::domain(format!("chi must be > 0, got {chi}")));
    }
    if !(delta > 0.0) {
        return Err(Error::domain(format!("Delta must be > 0, got {delta}")));
    }
    let r1 = cdf_diff(zeta, chi) - p.r;
    let r2 = avg_psi_minus_alpha(zeta, chi, p.alpha);
    let r3 = third_eq_coef(p.alpha, p.r, zeta, chi) - 0.5 / (delta * delta);
    Ok([r1, r2, r3])
}

// ---------------------------------------------------------------------------
// Ratio subsystem
// ---------------------------------------------------------------------------

/// Newton polish of the 2x2 ratio system from a nearby starting point.
fn polish_ratios(p: ControlPoint, zeta0: f64, chi0: f64) -> (f64, f64, f64) {
    let mut z = zeta0;
    let mut c = chi0.max(1e-300);
    let mut best = (z, c, f64::INFINITY);
    for _ in 0..24 {
        let r1 = cdf_diff(z, c) - p.r;
        let r2 = avg_psi_minus_alpha(z, c, p.alpha);
        let res = r1.abs().max(r2.abs());
        if res < best.2 {
            best = (z, c, res);
        }
        if res <= 1e-15 {
            break;
        }
        let h_top = norm_pdf(z + c);
        let h_bot = norm_pdf(z);
        let avg_slope = cdf_diff(z, c) / c;
        // J = [[d r1/d c, d r1/d z], [d r2/d c, d r2/d z]]
        let j11 = h_top;
        let j12 = h_top - h_bot;
        let j21 = (norm_cdf(z + c) - (r2 + p.alpha)) / c;
        let j22 = avg_slope;
        let det = j11 * j22 - j12 * j21;
        if det == 0.0 || !det.is_finite() {
            break;
        }
        let mut dc = (-r1 * j22 + r2 * j12) / det;
        let mut dz = (-j11 * r2 + j21 * r1) / det;
        // keep chi positive and steps sane
        if dc < -0.9 * c {
            dc = -0.9 * c;
        }
        let cap = 0.5 * (1.0 + c);
        if dc.abs() > cap {
            dc = cap.copysign(dc);
        }
        if dz.abs() > 1.0 {
            dz = 1.0f64.copysign(dz);
        }
        c += dc;
        z += dz;
    }
    // final evaluation at the best point
    let r1 = cdf_diff(best.0, best.1) - p.r;
    let r2 = avg_psi_minus_alpha(best.0, best.1, p.alpha);
    (best.1, best.0, r1.abs().max(r2.abs()))
}

/// Solve the closed 2x2 subsystem (1)-(2) for (chi, zeta).
///
/// The solution is parametrized by zeta: the first equation pins the top
/// limit through the upper tail, and the averaged-Phi residual of the second
/// is monotone in zeta, so a guarded Brent search always brackets. Near the
/// alpha -> 1 and alpha -> 0 edges the top (bottom) integration limit leaves
/// double range and the decoupled tail solution is used as the start instead.
/// A Newton polish certifies residuals <= 1e-12 either way.
pub fn solve_ratios(p: ControlPoint) -> Result<(f64, f64)> {
    check_generic(p)?;
    let (alpha, r) = (p.alpha, p.r);

    // zeta solving Phibar(zeta) = r exactly; anchor of both tail regimes.
    // Psi(-rho) = Psi(rho) - rho plays the decoupled role in each of them.
    let rho = -norm_cdf_inv(r)?;
    let k = psi_fn(-rho);

    // alpha -> 1 regime: top limit beyond TAIL_SPLIT, zeta -> rho
    let chi_up = k / (1.0 - alpha);
    if rho + chi_up >= TAIL_SPLIT && rho > -TAIL_SPLIT {
        let (chi, zeta, res) = polish_ratios(p, rho, chi_up);
        return certify_ratios(p, chi, zeta, res);
    }

    // alpha -> 0 regime: bottom limit below -TAIL_SPLIT, top limit -> -rho
    let chi_dn = k / alpha;
    if -rho - chi_dn <= -TAIL_SPLIT && rho < TAIL_SPLIT {
        let (chi, zeta, res) = polish_ratios(p, -rho - chi_dn, chi_dn);
        return certify_ratios(p, chi, zeta, res);
    }

    // main branch: monotone 1-D search in zeta
    let g = |zeta: f64| -> f64 {
        let qbar = norm_cdf_upper(zeta);
        let utop = qbar - r;
        if utop <= f64::MIN_POSITIVE {
            return 1.0 - alpha; // chi -> infinity limit
        }
        let u = match norm_cdf_inv(utop) {
            Ok(x) => -x,
            Err(_) => return 1.0 - alpha,
        };
        let chi = u - zeta;
        if chi <= 0.0 {
            return -alpha;
        }
        avg_psi_minus_alpha(zeta, chi, alpha)
    };
    let hi = norm_cdf_inv(alpha.min(1.0 - r))?;
    let lo = if alpha > r {
        norm_cdf_inv(alpha - r)?.max(-TAIL_SPLIT - 0.5)
    } else {
        -TAIL_SPLIT - 0.5
    };
    let glo = g(lo);
    let ghi = g(hi);
    let root = if glo >= 0.0 {
        // already nonnegative at the bottom: root at/below lo; polish from lo
        roots::Root { x: lo, f: glo }
    } else {
        roots::brent(g, lo, hi, glo, ghi, 0.0, 1e-13, 200)?
    };
    let zeta = root.x;
    let qbar = norm_cdf_upper(zeta);
    let utop = (qbar - r).max(f64::MIN_POSITIVE);
    let chi0 = (-norm_cdf_inv(utop)? - zeta).max(1e-300);
    let (chi, zeta, res) = polish_ratios(p, zeta, chi0);
    certify_ratios(p, chi, zeta, res)
}

fn certify_ratios(p: ControlPoint, chi: f64, zeta: f64, res: f64) -> Result<(f64, f64)> {
    if res <= RATIO_TOL && chi > 0.0 && chi.is_finite() {
        Ok((chi, zeta))
    } else {
        Err(Error::NoConvergence(format!(
            "ratio system at alpha={}, r={}: residual {res:.3e} (chi={chi:.6e}, zeta={zeta:.6e})",
            p.alpha, p.r
        )))
    }
}

// ---------------------------------------------------------------------------
// Full solution and derived quantities
// ---------------------------------------------------------------------------

/// Solve all three equations for the order parameters at a feasible point.
pub fn solve_order_params(p: ControlPoint) -> Result<OrderParams> {
    let (chi, zeta) = solve_ratios(p)?;
    let coef = third_eq_coef(p.alpha, p.r, zeta, chi);
    if !(coef > 0.5 / (DELTA_MAX * DELTA_MAX)) {
        let boundary = phase_boundary(p.alpha).unwrap_or(f64::NAN);
        return Err(Error::InfeasibleRegion {
            alpha: p.alpha,
            r: p.r,
            boundary,
        });
    }
    let delta = 1.0 / (2.0 * coef).sqrt();
    let q0 = (delta / chi) * (delta / chi);
    let epsilon = zeta * delta / chi;
    let op = OrderParams {
        q0,
        delta,
        epsilon,
        chi,
        zeta,
    };
    let res = residuals(p, chi, zeta, delta)?;
    // the third equation's terms grow like 1/r^2, so its residual is
    // certified relative to that scale; the first two are O(1)
    let scale3 = coef.abs().max(1.0);
    if res[0].abs() > RESIDUAL_TOL
        || res[1].abs() > RESIDUAL_TOL
        || res[2].abs() > RESIDUAL_TOL * scale3
    {
        return Err(Error::NoConvergence(format!(
            "order parameters at alpha={}, r={}: residuals {:.3e} {:.3e} {:.3e}",
            p.alpha, p.r, res[0], res[1], res[2]
        )));
    }
    Ok(op)
}

/// Recover the eliminated conjugate variables from the order parameters.
pub fn hat_params(op: &OrderParams) -> HatParams {
    let delta_hat = 0.5 / op.delta;
    HatParams {
        lambda: 1.0 / op.delta,
        delta_hat,
        q0_hat: (1.0 - op.q0) * 2.0 * delta_hat * delta_hat,
    }
}

/// All derived risk metrics at a feasible control point.
pub fn risk_report(p: ControlPoint) -> Result<RiskReport> {
    let op = solve_order_params(p)?;
    let phi = parametric::phi_factor(p.alpha)?;
    let sqrt_q0 = op.q0.sqrt();
    Ok(RiskReport {
        est_error: sqrt_q0 - 1.0,
        susceptibility: op.chi,
        var_proxy: op.epsilon,
        es_out_ratio: sqrt_q0,
        es_in_ratio: p.r / ((1.0 - p.alpha) * op.delta * phi),
        weight_mean: 1.0,
        weight_var: op.q0 - 1.0,
    })
}

/// Density at `w` of the sample-averaged weight distribution,
/// Normal(1, q0 - 1); degenerates to a point mass at w = 1 when q0 = 1.
pub fn weight_density(p: ControlPoint, w: f64) -> Result<f64> {
    let op = solve_order_params(p)?;
    let var = op.q0 - 1.0;
    if var <= 0.0 {
        return Ok(if w == 1.0 { f64::INFINITY } else { 0.0 });
    }
    let sigma = var.sqrt();
    Ok(norm_pdf((w - 1.0) / sigma) / sigma)
}

/// The aspect ratio r*(alpha) at which the order parameters diverge:
/// the zero of the third-equation coefficient along increasing r.
/// Pinned at exactly 1/2 for alpha = 1 (the minimax limit).
pub fn phase_boundary(alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::domain(format!(
            "phase boundary requires alpha in (0,1], got {alpha}"
        )));
    }
    if alpha == 1.0 {
        return Ok(0.5);
    }
    let f = |r: f64| -> Option<f64> {
        let p = ControlPoint { alpha, r };
        let (chi, zeta) = solve_ratios(p).ok()?;
        Some(third_eq_coef(alpha, r, zeta, chi))
    };
    // geometric scan from deep inside the feasible wedge to r -> 1
    let mut prev: Option<(f64, f64)> = None;
    let n = 120;
    let (lo, hi) = (1e-6f64, 1.0 - 1e-9f64);
    for i in 0..=n {
        let t = i as f64 / n as f64;
        let r = lo * (hi / lo).powf(t);
        let v = match f(r) {
            Some(v) if v.is_finite() => v,
            _ => continue,
        };
        if let Some((rp, vp)) = prev {
            if vp > 0.0 && v <= 0.0 {
                let root = roots::brent(
                    |r| f(r).unwrap_or(-1.0),
                    rp,
                    r,
                    vp,
                    v,
                    1e-14,
                    0.0,
                    200,
                )?;
                return Ok(root.x);
            }
        }
        prev = Some((r, v));
    }
    Err(Error::NoConvergence(format!(
        "phase boundary scan found no sign change for alpha={alpha}"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cp(alpha: f64, r: f64) -> ControlPoint {
        ControlPoint::new(alpha, r).unwrap()
    }

    #[test]
    fn control_point_validation() {
        assert!(ControlPoint::new(0.0, 0.1).is_err());
        assert!(ControlPoint::new(1.1, 0.1).is_err());
        assert!(ControlPoint::new(0.5, 0.0).is_err());
        assert!(ControlPoint::new(1.0, 0.3).is_ok());
    }

    #[test]
    fn generic_solver_rejects_alpha_one_and_r_ge_one() {
        assert!(matches!(
            solve_ratios(cp(1.0, 0.3)),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            solve_ratios(cp(0.9, 1.0)),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn residuals_reject_nonpositive_arguments() {
        assert!(residuals(cp(0.5, 0.3), -1.0, 0.0, 1.0).is_err());
        assert!(residuals(cp(0.5, 0.3), 1.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn ratio_solution_satisfies_both_equations() {
        for &(alpha, r) in &[
            (0.5, 0.3),
            (0.7, 0.1),
            (0.9, 0.45),
            (0.975, 0.025),
            (0.2, 0.6),
            (0.99, 0.8),
        ] {
            let p = cp(alpha, r);
            let (chi, zeta) = solve_ratios(p).unwrap();
            assert!(chi > 0.0);
            let r1 = cdf_diff(zeta, chi) - r;
            let r2 = avg_psi_minus_alpha(zeta, chi, alpha);
            assert!(
                r1.abs() < 1e-12 && r2.abs() < 1e-12,
                "alpha={alpha} r={r}: r1={r1:.2e} r2={r2:.2e}"
            );
        }
    }

    #[test]
    fn r_to_zero_limit_of_ratios() {
        // zeta -> Phi^{-1}(alpha), chi -> 0 on the horizontal axis
        for &alpha in &[0.3, 0.5, 0.9, 0.975] {
            let p = cp(alpha, 1e-8);
            let (chi, zeta) = solve_ratios(p).unwrap();
            let z_alpha = norm_cdf_inv(alpha).unwrap();
            assert!((zeta - z_alpha).abs() < 1e-3, "alpha={alpha}: zeta={zeta}");
            assert!(chi < 1e-6);
        }
    }

    #[test]
    fn order_params_certify_and_scale() {
        let p = cp(0.975, 0.025);
        let op = solve_order_params(p).unwrap();
        assert!(op.q0 >= 1.0);
        assert!(op.delta > 0.0);
        assert!((op.chi - op.delta / op.q0.sqrt()).abs() < 1e-12 * op.chi);
        assert!((op.zeta - op.epsilon / op.q0.sqrt()).abs() < 1e-12 * op.zeta.abs().max(1.0));
        let res = residuals(p, op.chi, op.zeta, op.delta).unwrap();
        for v in res {
            assert!(v.abs() <= RESIDUAL_TOL);
        }
    }

    #[test]
    fn infeasible_region_reported_beyond_boundary() {
        let err = solve_order_params(cp(0.9, 0.6)).unwrap_err();
        match err {
            Error::InfeasibleRegion { boundary, .. } => {
                assert!(boundary > 0.0 && boundary < 0.6);
            }
            other => panic!("expected InfeasibleRegion, got {other:?}"),
        }
    }

    #[test]
    fn hat_params_identities_round_trip() {
        let op = OrderParams {
            q0: 2.5,
            delta: 0.5,
            epsilon: 1.0,
            chi: 0.5 / 2.5f64.sqrt(),
            zeta: 1.0 / 2.5f64.sqrt(),
        };
        let hp = hat_params(&op);
        assert_eq!(hp.delta_hat, 1.0);
        assert_eq!(hp.lambda, 2.0);
        assert!(hp.q0_hat <= 0.0);
        // invert q0 = 1 - q0_hat/(2 Delta_hat^2)
        let q0_back = 1.0 - hp.q0_hat / (2.0 * hp.delta_hat * hp.delta_hat);
        assert!((q0_back - op.q0).abs() < 1e-14);
        // q0 = 1 gives q0_hat = 0
        let op1 = OrderParams {
            q0: 1.0,
            ..op
        };
        assert_eq!(hat_params(&op1).q0_hat, 0.0);
    }

    #[test]
    fn phase_boundary_anchors() {
        assert_eq!(phase_boundary(1.0).unwrap(), 0.5);
        assert!(phase_boundary(0.0).is_err());
        // r* -> 0 as alpha -> 0
        assert!(phase_boundary(0.05).unwrap() < 0.02);
        // monotone growth toward 1/2
        let b7 = phase_boundary(0.7).unwrap();
        let b9 = phase_boundary(0.9).unwrap();
        assert!(b7 < b9 && b9 < 0.5);
    }

    #[test]
    fn weight_density_point_mass_and_peak() {
        // q0 - 1 = 1 at the peak gives the standard normal peak value
        let p = cp(0.8, 0.05);
        let op = solve_order_params(p).unwrap();
        let d = weight_density(p, 1.0).unwrap();
        let expect = norm_pdf(0.0) / (op.q0 - 1.0).sqrt();
        assert!((d - expect).abs() < 1e-12 * expect);
    }

    #[test]
    fn risk_report_consistency() {
        let p = cp(0.975, 1.0 / 35.0);
        let rep = risk_report(p).unwrap();
        assert!(rep.est_error >= 0.0);
        assert!(rep.es_out_ratio >= 1.0);
        assert!(rep.es_in_ratio <= rep.es_out_ratio);
        assert!((rep.weight_var - (rep.es_out_ratio * rep.es_out_ratio - 1.0)).abs() < 1e-12);
    }
}
