//! Closed-form effect curves under the linear two-version outcome model.
//!
//! Potential outcomes at the treatment period are
//! Y(m) = Y(0) + δ_m + α_m·U + β_m·X + ε_m with (X, U) bivariate normal,
//! and a unit that adopts takes version 2 with probability Φ(x).

use alloc::format;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::normal;
use crate::quadrature::GaussHermite;

/// Nodes used by the projection oracles.
pub const PROJECTION_NODES: usize = 64;

/// Idiosyncratic error law; every variant has mean zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum ErrorLaw {
    /// Exp(rate) − 1/rate.
    CenteredExponential {
        rate: f64,
    },
    /// Uniform on [−h, h].
    Uniform {
        half_width: f64,
    },
    Zero,
}

/// How untreated outcomes evolve over periods.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutcomeProcess {
    /// Y_t(0) = δ_t + α₀U + β₀X + ε_t.
    Levels,
    /// Y_t(0) = Y_{t−1}(0) + δ_t + α₀U + β₀X + ε_t, starting from zero.
    RandomWalk,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DGPParams {
    /// (δ₁, δ₂).
    pub delta: [f64; 2],
    /// (α₀, α₁, α₂): loadings on U of the baseline and of each version effect.
    pub alpha: [f64; 3],
    /// (β₀, β₁, β₂): loadings on X.
    pub beta: [f64; 3],
    pub sigma2_x: f64,
    pub sigma2_u: f64,
    pub sigma_xu: f64,
    /// a in Pr(A = 1 | x) = Φ(a + x).
    pub probit_offset: f64,
    pub baseline_error: ErrorLaw,
    /// Law of ε_m, shared by both versions.
    pub version_error: ErrorLaw,
    /// Standard deviation of the common period intercepts δ_t.
    pub period_sd: f64,
    pub periods: usize,
    pub process: OutcomeProcess,
}

/// a = √2·Φ⁻¹(2/3), which makes Pr(A = 1) = 2/3 when X ~ N(0, 1).
pub fn default_probit_offset() -> f64 {
    core::f64::consts::SQRT_2 * normal::quantile(2.0 / 3.0)
}

impl Default for DGPParams {
    fn default() -> Self {
        DGPParams {
            delta: [1.0, -1.5],
            alpha: [0.5, 1.0, -1.5],
            beta: [0.5, 1.0, -1.5],
            sigma2_x: 1.0,
            sigma2_u: 1.0,
            sigma_xu: 0.125,
            probit_offset: default_probit_offset(),
            baseline_error: ErrorLaw::CenteredExponential { rate: 1.0 },
            version_error: ErrorLaw::CenteredExponential { rate: 1.5 },
            period_sd: 1.0,
            periods: 10,
            process: OutcomeProcess::Levels,
        }
    }
}

impl DGPParams {
    /// The single large draw used for the effect-curve illustration: σ_xu = 1/4.
    pub fn illustration() -> Self {
        DGPParams { sigma_xu: 0.25, ..DGPParams::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma2_x > 0.0 && self.sigma2_u > 0.0) {
            return Err(Error::InvalidParameter("variances of X and U must be positive".into()));
        }
        if !(self.sigma_xu * self.sigma_xu < self.sigma2_x * self.sigma2_u) {
            return Err(Error::InvalidParameter(format!("covariance {} makes (X, U) degenerate", self.sigma_xu)));
        }
        if self.periods < 2 {
            return Err(Error::InvalidParameter("at least two periods are needed".into()));
        }
        for law in [self.baseline_error, self.version_error] {
            let bad = match law {
                ErrorLaw::CenteredExponential { rate } => !(rate > 0.0),
                ErrorLaw::Uniform { half_width } => !(half_width >= 0.0),
                ErrorLaw::Zero => false,
            };
            if bad {
                return Err(Error::InvalidParameter(format!("invalid error law {law:?}")));
            }
        }
        if !(self.period_sd >= 0.0) {
            return Err(Error::InvalidParameter("period_sd must be nonnegative".into()));
        }
        Ok(())
    }
}

fn version(m: u32) -> Result<usize> {
    match m {
        1 | 2 => Ok(m as usize),
        _ => Err(Error::Domain(format!("treatment version must be 1 or 2, got {m}"))),
    }
}

/// ψ_m(x) = δ_m + β_m·x.
pub fn version_cde(p: &DGPParams, m: u32, x: f64) -> Result<f64> {
    let k = version(m)?;
    Ok(p.delta[k - 1] + p.beta[k] * x)
}

/// ψ̃_m(x) = δ_m + (β_m + α_m·σ_xu/σ²_x)·x, since E[U | X = x] = (σ_xu/σ²_x)·x.
pub fn version_cate(p: &DGPParams, m: u32, x: f64) -> Result<f64> {
    let k = version(m)?;
    Ok(p.delta[k - 1] + (p.beta[k] + p.alpha[k] * p.sigma_xu / p.sigma2_x) * x)
}

/// Pr(M(1) = m | x): Φ(x) for version 2.
pub fn version_weight(_p: &DGPParams, m: u32, x: f64) -> Result<f64> {
    match version(m)? {
        2 => Ok(normal::cdf(x)),
        _ => Ok(normal::sf(x)),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimandKind {
    Cate,
    Cde,
}

/// Version curves averaged with the adoption weights.
pub fn coarsened_mixture(p: &DGPParams, x: f64, kind: EstimandKind) -> f64 {
    let f = |m| match kind {
        EstimandKind::Cate => version_cate(p, m, x),
        EstimandKind::Cde => version_cde(p, m, x),
    };
    let w2 = normal::cdf(x);
    let w1 = normal::sf(x);
    // versions 1 and 2 are always valid
    w1 * f(1).unwrap_or(f64::NAN) + w2 * f(2).unwrap_or(f64::NAN)
}

/// Least-squares line (intercept, slope).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Line {
    pub intercept: f64,
    pub slope: f64,
}

impl Line {
    pub fn at(&self, x: f64) -> f64 {
        self.intercept + self.slope * x
    }
}

/// Population projection of the coarsened curve on X ~ N(0, σ²_x).
pub fn projection_oracle(p: &DGPParams, kind: EstimandKind) -> Line {
    projection_with_nodes(p, kind, PROJECTION_NODES, |_| 1.0)
}

/// Projection over the treated units' covariate law, with density
/// proportional to φ(x)·Φ(a + x). The interaction coefficients of the OLS
/// CATE fit converge to this line because untreated changes do not depend on X.
pub fn treated_design_projection(p: &DGPParams, kind: EstimandKind) -> Line {
    let a = p.probit_offset;
    projection_with_nodes(p, kind, PROJECTION_NODES, move |x| normal::cdf(a + x))
}

/// Weighted projection with an arbitrary node count; weights are relative to N(0, σ²_x).
pub fn projection_with_nodes<W: Fn(f64) -> f64>(p: &DGPParams, kind: EstimandKind, nodes: usize, weight: W) -> Line {
    let gh = GaussHermite::new(nodes);
    let sd = libm::sqrt(p.sigma2_x);
    let e = |g: &dyn Fn(f64) -> f64| gh.expect_normal(0.0, sd, |x| weight(x) * g(x));
    let w = e(&|_| 1.0);
    let mx = e(&|x| x) / w;
    let mf = e(&|x| coarsened_mixture(p, x, kind)) / w;
    let vxx = e(&|x| (x - mx) * (x - mx)) / w;
    let cxf = e(&|x| (x - mx) * (coarsened_mixture(p, x, kind) - mf)) / w;
    let slope = cxf / vxx;
    Line { intercept: mf - slope * mx, slope }
}

/// ψ_{i,m} = δ_m + α_m·u + β_m·x + ε_m.
pub fn unit_ite(p: &DGPParams, x: f64, u: f64, eps: f64, m: u32) -> Result<f64> {
    let k = version(m)?;
    Ok(p.delta[k - 1] + p.alpha[k] * u + p.beta[k] * x + eps)
}
