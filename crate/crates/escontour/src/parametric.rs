//! Closed-form results for parametric ES estimates: a Gaussian is fitted to
//! the sample and ES is read off the fitted distribution. The squared error
//! ratio has the form q0 = r_c/(r_c - r) with a critical aspect ratio r_c
//! depending on the confidence level only, so contour lines are scaled-down
//! copies of the critical line.

use crate::error::{Error, Result};
use crate::specfun::{norm_cdf_inv, SQRT_2PI};

/// A point of the parametric error surface.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParametricPoint {
    pub alpha: f64,
    pub r: f64,
    pub q0: f64,
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::domain(format!(
            "parametric estimate requires alpha in (0,1), got {alpha}"
        )));
    }
    Ok(())
}

/// Gaussian ES prefactor phi(alpha) = exp(-Phi^{-1}(alpha)^2/2) / ((1-alpha) sqrt(2 pi));
/// the ES of a unit-variance Gaussian position, and the true-ES scale of the problem.
pub fn phi_factor(alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    let z = norm_cdf_inv(alpha)?;
    Ok((-0.5 * z * z).exp() / ((1.0 - alpha) * SQRT_2PI))
}

/// Critical aspect ratio r_c = phi^2/(1+phi^2) where the parametric error diverges.
pub fn r_crit_param(alpha: f64) -> Result<f64> {
    let phi = phi_factor(alpha)?;
    let p2 = phi * phi;
    Ok(p2 / (1.0 + p2))
}

/// Squared error ratio q0(alpha, r) = r_c/(r_c - r) for r below the critical ratio.
pub fn q0_param(alpha: f64, r: f64) -> Result<f64> {
    if r < 0.0 {
        return Err(Error::domain(format!("q0_param requires r >= 0, got {r}")));
    }
    let rc = r_crit_param(alpha)?;
    if r >= rc {
        return Err(Error::InfeasibleRegion {
            alpha,
            r,
            boundary: rc,
        });
    }
    Ok(rc / (rc - r))
}

/// Invert the error formula: the aspect ratio on which the parametric error
/// equals `q0`, r = ((q0-1)/q0) * r_c(alpha).
pub fn contour_r_param(alpha: f64, q0: f64) -> Result<f64> {
    if q0 < 1.0 {
        return Err(Error::domain(format!(
            "contour_r_param requires q0 >= 1, got {q0}"
        )));
    }
    let rc = r_crit_param(alpha)?;
    Ok((q0 - 1.0) / q0 * rc)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn phi_factor_at_half_is_twice_peak_density() {
        // Phi^{-1}(0.5) = 0 so phi(0.5) = 2 h(0) = 0.7978845608...
        assert!((phi_factor(0.5).unwrap() - 0.7978845608028654).abs() < 1e-14);
    }

    #[test]
    fn endpoints_rejected() {
        assert!(phi_factor(0.0).is_err());
        assert!(phi_factor(1.0).is_err());
        assert!(r_crit_param(1.0).is_err());
    }

    #[test]
    fn r_crit_below_one_and_to_one_as_alpha_to_one() {
        // r_c < 1 always; the approach to 1 is logarithmically slow in 1-alpha
        let mut prev = 0.0;
        for a in [0.5, 0.7, 0.9, 0.99, 0.999, 0.999999, 0.999999999] {
            let rc = r_crit_param(a).unwrap();
            assert!(rc > prev && rc < 1.0);
            prev = rc;
        }
        assert!(prev > 0.97);
    }

    #[test]
    fn q0_limits() {
        assert_eq!(q0_param(0.9, 0.0).unwrap(), 1.0);
        let rc = r_crit_param(0.9).unwrap();
        assert!((q0_param(0.9, 0.5 * rc).unwrap() - 2.0).abs() < 1e-12);
        assert!(matches!(
            q0_param(0.9, rc),
            Err(Error::InfeasibleRegion { .. })
        ));
    }

    #[test]
    fn contour_inverts_q0() {
        assert_eq!(contour_r_param(0.8, 1.0).unwrap(), 0.0);
        assert!(contour_r_param(0.8, 0.99).is_err());
        for &(a, q0) in &[(0.7, 1.21), (0.95, 3.0), (0.975, 1.1025)] {
            let r = contour_r_param(a, q0).unwrap();
            assert!((q0_param(a, r).unwrap() - q0).abs() < 1e-12 * q0);
        }
    }

    #[test]
    fn both_algebraic_forms_of_q0_agree() {
        // q0 = phi^2/((1-r)phi^2 - r) is the same expression as r_c/(r_c - r).
        for &(a, r) in &[(0.7, 0.1), (0.9, 0.3), (0.975, 0.5)] {
            let phi = phi_factor(a).unwrap();
            let p2 = phi * phi;
            let direct = p2 / ((1.0 - r) * p2 - r);
            assert!((q0_param(a, r).unwrap() - direct).abs() < 1e-12 * direct);
        }
    }
}
