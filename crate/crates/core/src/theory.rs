//! Constants from the worst-case and normal-model analyses of the bounds.

use alloc::format;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Arm {
    Treated,
    Untreated,
}

fn nonneg(name: &str, v: f64) -> Result<()> {
    if !(v >= 0.0) {
        return Err(Error::InvalidParameter(format!("{name} must be nonnegative, got {v}")));
    }
    Ok(())
}

/// Half-width that covers every unit when idiosyncratic errors lie in [−ζ, ζ].
///
/// A treated unit's prediction error mixes its own error with the control
/// pool's, giving 2ζ; an untreated unit also carries the treated-version
/// error, giving 4ζ. As the pool grows the pool average vanishes and the
/// bounds halve.
pub fn worst_case_halfwidth(zeta: f64, arm: Arm, asymptotic: bool) -> Result<f64> {
    nonneg("zeta", zeta)?;
    let k = match (arm, asymptotic) {
        (Arm::Treated, false) => 2.0,
        (Arm::Treated, true) => 1.0,
        (Arm::Untreated, false) => 4.0,
        (Arm::Untreated, true) => 2.0,
    };
    Ok(k * zeta)
}

/// C_{αγ} = √max((1+α)², (1+√γ)²), the ratio Z₁/Z₀ under the normal model.
pub fn shift_constant(alpha: f64, gamma: f64) -> Result<f64> {
    nonneg("gamma", gamma)?;
    let a = (1.0 + alpha) * (1.0 + alpha);
    let g = (1.0 + libm::sqrt(gamma)) * (1.0 + libm::sqrt(gamma));
    Ok(libm::sqrt(a.max(g)))
}

/// C'_η = √(C_η² + 1).
pub fn lemma2_inflation(c_eta: f64) -> Result<f64> {
    nonneg("C_eta", c_eta)?;
    Ok(libm::sqrt(c_eta * c_eta + 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn halfwidths() {
        assert_eq!(worst_case_halfwidth(1.0, Arm::Treated, false).unwrap(), 2.0);
        assert_eq!(worst_case_halfwidth(1.0, Arm::Untreated, false).unwrap(), 4.0);
        assert_eq!(worst_case_halfwidth(1.0, Arm::Treated, true).unwrap(), 1.0);
        assert_eq!(worst_case_halfwidth(1.0, Arm::Untreated, true).unwrap(), 2.0);
        assert_eq!(worst_case_halfwidth(0.0, Arm::Untreated, false).unwrap(), 0.0);
        assert!(worst_case_halfwidth(-1.0, Arm::Treated, false).is_err());
    }

    #[test]
    fn shift_constants() {
        assert_eq!(shift_constant(1.0, 1.0).unwrap(), 2.0);
        assert_eq!(shift_constant(0.0, 0.0).unwrap(), 1.0);
        assert_eq!(shift_constant(-1.0, 4.0).unwrap(), 3.0);
        assert!(shift_constant(0.0, -1.0).is_err());
    }

    #[test]
    fn inflation() {
        assert_eq!(lemma2_inflation(0.0).unwrap(), 1.0);
        assert!((lemma2_inflation(libm::sqrt(3.0)).unwrap() - 2.0).abs() < 1e-15);
    }
}
