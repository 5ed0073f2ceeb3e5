//! Closed-form and perturbative solutions on the special lines of the
//! (alpha, r) plane: the r -> 0 expansion, the alpha = 1/2 line, the
//! epsilon = 0 line and the minimax line alpha = 1. They serve as fast
//! paths and as independent oracles for the generic solver.

use crate::error::{Error, Result};
use crate::replica::OrderParams;
use crate::specfun::{norm_cdf_inv, norm_pdf, psi_fn, SQRT_2PI};

/// Closed-form minimax (alpha = 1, Maximal Loss) solution. Delta itself
/// diverges like 1/(1-alpha); its scaled limit is reported instead.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MinimaxSolution {
    /// rho = -Phi^{-1}(r); also the scaled VaR zeta on this line.
    pub rho: f64,
    /// (1 - alpha) * Delta in the alpha -> 1 limit.
    pub scaled_delta: f64,
    /// sqrt(q0).
    pub sqrt_q0: f64,
    /// VaR of the minimax portfolio, epsilon = rho * sqrt(q0).
    pub epsilon: f64,
}

/// First-order expansion of the order parameters in r around the r = 0 axis.
///
/// Valid for small r away from alpha in {0, 1} (the corrections blow up at
/// both ends); the epsilon formula additionally requires alpha > r/2.
pub fn small_r_expansion(alpha: f64, r: f64) -> Result<OrderParams> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::domain(format!(
            "small-r expansion requires alpha in (0,1), got {alpha}"
        )));
    }
    if !(r >= 0.0) {
        return Err(Error::domain(format!("r must be >= 0, got {r}")));
    }
    if alpha <= 0.5 * r {
        return Err(Error::domain(format!(
            "epsilon expansion requires alpha > r/2 (alpha={alpha}, r={r})"
        )));
    }
    let z = norm_cdf_inv(alpha)?;
    // First order in r: q0 = 1 + (1-alpha) r / h(z)^2 = 1 + 2 pi r e^{z^2} (1-alpha).
    // The constant follows from the reduced equations (1/q0 = 1 - (1-alpha)
    // chi/h(z) + O(chi^2)) and is confirmed by the alpha = 1/2 closed form,
    // whose exact small-r slope is pi.
    let h = norm_pdf(z);
    let q0 = 1.0 + (1.0 - alpha) * r / (h * h);
    let delta = r / h; // = sqrt(2 pi) r e^{z^2/2}
    let sqrt_q0 = q0.sqrt();
    let zeta = norm_cdf_inv(alpha - 0.5 * r)?;
    Ok(OrderParams {
        q0,
        delta,
        epsilon: sqrt_q0 * zeta,
        chi: delta / sqrt_q0,
        zeta,
    })
}

/// Exact solution on the alpha = 1/2 line, where epsilon = -Delta/2.
pub fn half_alpha_line(r: f64) -> Result<OrderParams> {
    if !(r > 0.0 && r < 1.0) {
        return Err(Error::domain(format!(
            "alpha = 1/2 line requires r in (0,1), got {r}"
        )));
    }
    let chi = 2.0 * norm_cdf_inv(0.5 * (1.0 + r))?;
    let inv_q0 = chi / (SQRT_2PI * r) * (-0.125 * chi * chi).exp() + 0.25 * chi * chi
        - 0.5 * chi * chi / r;
    if !(inv_q0 > 0.0) {
        return Err(Error::domain(format!(
            "r = {r} lies beyond the alpha = 1/2 boundary point (1/q0 = {inv_q0:.3e})"
        )));
    }
    let q0 = 1.0 / inv_q0;
    let sqrt_q0 = q0.sqrt();
    let delta = chi * sqrt_q0;
    Ok(OrderParams {
        q0,
        delta,
        epsilon: -0.5 * delta,
        chi,
        zeta: -0.5 * chi,
    })
}

/// The confidence level alpha(r) on which epsilon vanishes; runs from
/// (alpha = 1/2, r = 0) to (alpha = 1, r = 1/2). Only the non-trivial branch
/// is returned; the trivial chi = 0 branch is the r = 0 axis itself.
pub fn epsilon_zero_alpha(r: f64) -> Result<f64> {
    if !(r > 0.0 && r < 0.5) {
        return Err(Error::domain(format!(
            "epsilon = 0 line requires r in (0, 1/2), got {r}"
        )));
    }
    let d = norm_cdf_inv(0.5 + r)?;
    Ok(0.5 + r + (norm_pdf(d) - norm_pdf(0.0)) / d)
}

/// Closed forms on the minimax line alpha = 1 for r in (0, 1/2).
pub fn minimax_solution(r: f64) -> Result<MinimaxSolution> {
    if !(r > 0.0 && r < 0.5) {
        return Err(Error::domain(format!(
            "minimax closed forms require r in (0, 1/2), got {r}"
        )));
    }
    let rho = -norm_cdf_inv(r)?;
    // h(rho) - r*rho = Psi(-rho) > 0 on the whole interval
    let k = psi_fn(-rho);
    let sqrt_q0 = (r / (rho * k)).sqrt();
    Ok(MinimaxSolution {
        rho,
        scaled_delta: (r / rho * k).sqrt(),
        sqrt_q0,
        epsilon: rho * sqrt_q0,
    })
}

/// Leading critical behaviour of the minimax solution as r -> 1/2:
/// (1-alpha)Delta and sqrt(q0) diverge with exponent -1/2 while epsilon
/// vanishes with exponent 1/2. Returns ((1-alpha)Delta, sqrt(q0), epsilon).
pub fn minimax_critical_asymptotics(r: f64) -> Result<(f64, f64, f64)> {
    if !(r > 0.0 && r < 0.5) {
        return Err(Error::domain(format!(
            "minimax asymptotics require r in (0, 1/2), got {r}"
        )));
    }
    let s = (0.5 - r).sqrt();
    let sqrt_pi = std::f64::consts::PI.sqrt();
    Ok((
        0.5 / (sqrt_pi * s),
        std::f64::consts::FRAC_1_SQRT_2 / s,
        sqrt_pi * s,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_r_at_zero_is_exact_axis_solution() {
        let op = small_r_expansion(0.8, 0.0).unwrap();
        assert_eq!(op.q0, 1.0);
        assert_eq!(op.delta, 0.0);
        assert!((op.epsilon - norm_cdf_inv(0.8).unwrap()).abs() < 1e-15);
    }

    #[test]
    fn small_r_domain_guard() {
        assert!(small_r_expansion(0.004, 0.01).is_err());
        assert!(small_r_expansion(1.0, 0.01).is_err());
    }

    #[test]
    fn small_r_epsilon_sign_below_half() {
        // alpha = 0.5: Phi^{-1}(0.5 - r/2) < 0
        let op = small_r_expansion(0.5, 0.01).unwrap();
        assert!(op.epsilon < 0.0);
    }

    #[test]
    fn half_alpha_epsilon_ratio_exact() {
        let op = half_alpha_line(0.1).unwrap();
        assert_eq!(op.epsilon / op.delta, -0.5);
        assert_eq!(op.zeta / op.chi, -0.5);
    }

    #[test]
    fn half_alpha_beyond_boundary_rejected() {
        // deep beyond the alpha = 1/2 critical point the 1/q0 form goes negative
        assert!(half_alpha_line(0.45).is_err());
    }

    #[test]
    fn epsilon_zero_line_endpoints() {
        assert!((epsilon_zero_alpha(1e-9).unwrap() - 0.5).abs() < 1e-6);
        // the approach to (alpha = 1, r = 1/2) is logarithmically slow:
        // alpha = 1 - h(0)/Phi^{-1}(1 - s) + O(s)
        let near = epsilon_zero_alpha(0.5 - 1e-9).unwrap();
        let nearer = epsilon_zero_alpha(0.5 - 1e-13).unwrap();
        assert!(near > 0.9 && nearer > near && nearer < 1.0);
        assert!(epsilon_zero_alpha(0.0).is_err());
        assert!(epsilon_zero_alpha(0.5).is_err());
        let a = epsilon_zero_alpha(0.2).unwrap();
        assert!(a > 0.5 && a < 1.0);
    }

    #[test]
    fn minimax_identity_and_domain() {
        let m = minimax_solution(0.3).unwrap();
        assert!((m.epsilon - m.rho * m.sqrt_q0).abs() < 1e-12);
        assert!(m.sqrt_q0 >= 1.0);
        assert!(minimax_solution(0.5).is_err());
        assert!(minimax_solution(0.0).is_err());
    }

    #[test]
    fn minimax_asymptotics_converge_to_closed_form() {
        for &(r, tol) in &[(0.49f64, 0.1), (0.4999, 0.01)] {
            let m = minimax_solution(r).unwrap();
            let (sd, sq, eps) = minimax_critical_asymptotics(r).unwrap();
            assert!((sd / m.scaled_delta - 1.0).abs() < tol);
            assert!((sq / m.sqrt_q0 - 1.0).abs() < tol);
            assert!((eps / m.epsilon - 1.0).abs() < tol);
        }
    }
}
