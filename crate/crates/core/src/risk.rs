//! Model mean squared error of the clipped estimator and calibration of the
//! clipping constant from an excess-risk budget.
//!
//! Under the model, with `ψ̃_C(r) = r − ψ_C(r)` and `r ~ N(0, 1)`,
//!
//! ```text
//! g(C)  = E[ψ̃_C(r)²] = 2[(C² + 1) Φ(−C) − C φ(C)]
//! g'(C) = 4[C Φ(−C) − φ(C)] < 0
//! MSE   = N⁻²[Σ_u σ_j² + {1/S_aa + (Σ_s w_i² v_i²) g(C)} (Σ_u a_j)²]
//! ```
//!
//! The last line drops the cross terms `E[ψ̃(r_i) ψ̃(r_k)]`, `i ≠ k`; the
//! simulation harness measures them.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{sufficient_stats, PopulationFrame};
use crate::normal;

/// Upper end of the bracket searched by [`calibrate_c`]; `g(10) < 1e-20`.
pub const C_SEARCH_MAX: f64 = 10.0;
const MAX_BISECTIONS: usize = 200;

fn check_c(c: f64) -> Result<()> {
    if c.is_nan() || c < 0.0 {
        Err(Error::InvalidArgument(format!("C must be nonnegative, got {c}")))
    } else {
        Ok(())
    }
}

/// Second moment of the clipped-away part of a standard normal residual.
pub fn g(c: f64) -> Result<f64> {
    check_c(c)?;
    if c == f64::INFINITY {
        return Ok(0.0);
    }
    Ok(2.0 * ((c * c + 1.0) * normal::sf(c) - c * normal::pdf(c)))
}

/// Derivative of [`g`].
pub fn g_prime(c: f64) -> Result<f64> {
    check_c(c)?;
    if c == f64::INFINITY {
        return Ok(0.0);
    }
    Ok(4.0 * (c * normal::sf(c) - normal::pdf(c)))
}

/// `2[(C² + 1)Φ(−C) − 2Cφ(C)]`, the expression as originally typeset. It
/// is negative for `C ≳ 0.85` and is not used for any computation.
pub fn g_as_printed(c: f64) -> f64 {
    2.0 * ((c * c + 1.0) * normal::sf(c) - 2.0 * c * normal::pdf(c))
}

/// Frame quantities the MSE depends on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RiskInputs {
    pub population_size: usize,
    /// `Σ_u σ_j²`
    pub unseen_variance: f64,
    /// `Σ_u a_j`
    pub unseen_a: f64,
    pub s_aa: f64,
    /// `Σ_s w_i² v_i²`
    pub sum_w2v2: f64,
}

impl RiskInputs {
    pub fn from_frame(frame: &PopulationFrame) -> Result<Self> {
        let stats = sufficient_stats(frame)?;
        Ok(Self {
            population_size: frame.population_size(),
            unseen_variance: frame.unsampled().map(|u| u.sigma2).sum(),
            unseen_a: frame.unsampled().map(|u| u.a).sum(),
            s_aa: stats.s_aa,
            sum_w2v2: stats.sum_w2v2(),
        })
    }

    fn n2(&self) -> f64 {
        (self.population_size as f64).powi(2)
    }

    /// Excess risk at `C = 0`, the largest attainable.
    pub fn max_excess(&self) -> f64 {
        self.sum_w2v2 * self.unseen_a * self.unseen_a / self.n2()
    }

    pub fn excess(&self, c: f64) -> Result<f64> {
        Ok(self.max_excess() * g(c)?)
    }

    pub fn report(&self, c: f64) -> Result<RiskReport> {
        let g_of_c = g(c)?;
        let n2 = self.n2();
        let a2 = self.unseen_a * self.unseen_a;
        let components = RiskComponents {
            unseen_variance: self.unseen_variance / n2,
            estimation_variance: a2 / (self.s_aa * n2),
            clipping_penalty: self.sum_w2v2 * g_of_c * a2 / n2,
        };
        let mse_baseline = components.unseen_variance + components.estimation_variance;
        Ok(RiskReport {
            mse_robust: mse_baseline + components.clipping_penalty,
            mse_baseline,
            excess: components.clipping_penalty,
            g_of_c,
            c,
            components,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiskComponents {
    /// `N⁻² Σ_u σ_j²`
    pub unseen_variance: f64,
    /// `N⁻² (Σ_u a_j)² / S_aa`
    pub estimation_variance: f64,
    /// `N⁻² (Σ_s w_i² v_i²) g(C) (Σ_u a_j)²`
    pub clipping_penalty: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiskReport {
    pub mse_robust: f64,
    /// MSE of the classical estimator (the BLUP).
    pub mse_baseline: f64,
    pub excess: f64,
    pub g_of_c: f64,
    pub c: f64,
    pub components: RiskComponents,
}

/// Model MSE of the robust population-mean estimator at clipping constant `c`.
pub fn mse_theorem2(frame: &PopulationFrame, c: f64) -> Result<RiskReport> {
    check_c(c)?;
    if frame.is_census() {
        return Err(Error::Census);
    }
    if frame.sample_size() < 2 {
        return Err(Error::Degenerate(
            "the MSE formula needs at least 2 sampled units".into(),
        ));
    }
    RiskInputs::from_frame(frame)?.report(c)
}

/// Smallest `C` whose excess risk does not exceed the budget `m`.
///
/// Returns 0 when `m ≥ excess(0)`; otherwise bisects the strictly decreasing
/// excess on `[0, C_SEARCH_MAX]` until `|excess(C) − m| ≤ 1e-12 · m`, the
/// bracket stops shrinking, or 200 steps.
pub fn calibrate_c(frame: &PopulationFrame, m: f64) -> Result<f64> {
    if !(m.is_finite() && m > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "excess budget must be positive and finite, got {m}"
        )));
    }
    let inputs = RiskInputs::from_frame(frame)?;
    calibrate_with(&inputs, m)
}

pub fn calibrate_with(inputs: &RiskInputs, m: f64) -> Result<f64> {
    let k = inputs.max_excess();
    if m >= k {
        return Ok(0.0);
    }
    let target = m / k;
    let (mut lo, mut hi) = (0.0f64, C_SEARCH_MAX);
    if g(hi)? > target {
        return Ok(hi);
    }
    for _ in 0..MAX_BISECTIONS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let excess = k * g(mid)?;
        if (excess - m).abs() <= 1e-12 * m {
            return Ok(mid);
        }
        if excess > m {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    // closer endpoint
    let (e_lo, e_hi) = (k * g(lo)? - m, m - k * g(hi)?);
    Ok(if e_lo <= e_hi { lo } else { hi })
}
