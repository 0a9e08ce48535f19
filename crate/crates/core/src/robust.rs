//! The clipped ("limited translation") estimator of `θ` and of the finite
//! population mean.
//!
//! Standardized residuals are winsorized at `±C` and added back around the
//! pooled estimate:
//!
//! ```text
//! θ̂_R = ȳ_w + Σ_s w_i v_i ψ_C(r_i),       ψ_C(r) = max(−C, min(r, C))
//!     = ȳ_w − Σ_s w_i v_i [(r_i − C)⁺ − (−r_i − C)⁺]
//! ```
//!
//! The two forms agree because `Σ_s w_i v_i r_i = 0`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{population_mean_given_theta, sufficient_stats, PopulationFrame, SufficientStats};
use crate::risk::calibrate_c;

/// Huber-type clip `ψ_C(r) = min(max(r, −C), C)`; the band is closed.
pub fn psi_clip(r: f64, c: f64) -> f64 {
    debug_assert!(c >= 0.0);
    if r > c {
        c
    } else if r < -c {
        -c
    } else {
        r
    }
}

/// Excess of `r` beyond the band: `r − ψ_C(r)`.
pub fn clip_excess(r: f64, c: f64) -> f64 {
    if r > c {
        r - c
    } else if r < -c {
        r + c
    } else {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClipMode {
    /// Clip at a fixed `C ≥ 0`.
    Fixed(f64),
    /// Solve `C` so the model excess risk equals the budget `M > 0`.
    ExcessBudget(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scaling {
    /// Residual scale `v_i`, the sd of `y_i/a_i − ȳ_w`.
    #[default]
    PooledV,
    /// Residual scale `σ_i/a_i`, for comparison with Chambers-type estimators.
    ChambersSigma,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RobustConfig {
    pub mode: ClipMode,
    pub scaling: Scaling,
}

impl RobustConfig {
    pub fn fixed(c: f64) -> Self {
        Self {
            mode: ClipMode::Fixed(c),
            scaling: Scaling::PooledV,
        }
    }

    pub fn excess_budget(m: f64) -> Self {
        Self {
            mode: ClipMode::ExcessBudget(m),
            scaling: Scaling::PooledV,
        }
    }

    pub fn with_scaling(mut self, scaling: Scaling) -> Self {
        self.scaling = scaling;
        self
    }

    pub fn validate(&self) -> Result<()> {
        match self.mode {
            ClipMode::Fixed(c) if c.is_nan() || c < 0.0 => {
                Err(Error::InvalidArgument(format!("C must be nonnegative, got {c}")))
            }
            ClipMode::ExcessBudget(m) if !(m.is_finite() && m > 0.0) => Err(
                Error::InvalidArgument(format!("excess budget must be positive and finite, got {m}")),
            ),
            _ => Ok(()),
        }
    }
}

/// `θ̂_R` with a flag for frames where it degenerates to `ȳ_w`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThetaR {
    pub theta: f64,
    /// Set when `n = 1`: no residuals exist and `θ̂_R = ȳ_w`.
    pub degenerate: bool,
}

fn check_c(c: f64) -> Result<()> {
    if c.is_nan() || c < 0.0 {
        Err(Error::InvalidArgument(format!("C must be nonnegative, got {c}")))
    } else {
        Ok(())
    }
}

/// `ȳ_w + Σ w_i v_i ψ_C(r_i)`
pub fn theta_clipped_form(stats: &SufficientStats, c: f64) -> Result<f64> {
    check_c(c)?;
    let r = stats.residuals()?;
    let shift: f64 = stats
        .w
        .iter()
        .zip(&stats.v)
        .zip(r)
        .map(|((w, v), &r)| w * v * psi_clip(r, c))
        .sum();
    Ok(stats.ybar_w + shift)
}

/// `ȳ_w − Σ w_i v_i (r_i − ψ_C(r_i))`
pub fn theta_excess_form(stats: &SufficientStats, c: f64) -> Result<f64> {
    check_c(c)?;
    let r = stats.residuals()?;
    let shift: f64 = stats
        .w
        .iter()
        .zip(&stats.v)
        .zip(r)
        .map(|((w, v), &r)| w * v * clip_excess(r, c))
        .sum();
    Ok(stats.ybar_w - shift)
}

/// Clipped estimate of `θ` at a resolved `C`.
///
/// Debug builds evaluate both algebraic forms and report disagreement beyond
/// `1e-12` relative as [`Error::Inconsistent`].
pub fn robust_theta_at(stats: &SufficientStats, c: f64) -> Result<ThetaR> {
    check_c(c)?;
    if stats.r.is_none() {
        return Ok(ThetaR {
            theta: stats.ybar_w,
            degenerate: true,
        });
    }
    let theta = theta_excess_form(stats, c)?;
    #[cfg(debug_assertions)]
    {
        let direct = theta_clipped_form(stats, c)?;
        let r = stats.residuals()?;
        let scale = stats.ybar_w.abs()
            + stats
                .w
                .iter()
                .zip(&stats.v)
                .zip(r)
                .map(|((w, v), r)| w * v * r.abs())
                .sum::<f64>();
        if (direct - theta).abs() > 1e-12 * scale.max(f64::MIN_POSITIVE) {
            return Err(Error::Inconsistent(format!(
                "clipped form {direct} and excess form {theta} disagree"
            )));
        }
    }
    Ok(ThetaR {
        theta,
        degenerate: false,
    })
}

/// Clipped estimate of `θ`. Budget mode must be resolved to a `C` first
/// (see [`robust_estimate`], which does so from the frame).
pub fn robust_theta(stats: &SufficientStats, config: &RobustConfig) -> Result<ThetaR> {
    config.validate()?;
    let c = match config.mode {
        ClipMode::Fixed(c) => c,
        ClipMode::ExcessBudget(_) => return Err(Error::UnresolvedClip),
    };
    match config.scaling {
        Scaling::PooledV => robust_theta_at(stats, c),
        Scaling::ChambersSigma => chambers_variant_theta(stats, c),
    }
}

/// Residuals standardized by `σ_i/a_i` instead of `v_i`.
pub fn chambers_residuals(stats: &SufficientStats) -> Vec<f64> {
    stats
        .ratio
        .iter()
        .zip(&stats.precision)
        .map(|(q, p)| (q - stats.ybar_w) * p.sqrt())
        .collect()
}

/// `ȳ_w + Σ w_i (σ_i/a_i) ψ_C(r̃_i)` with `r̃_i = (y_i/a_i − ȳ_w) a_i/σ_i`.
///
/// `Σ w_i (σ_i/a_i) r̃_i = 0` still holds, but there is no excess form with
/// the clipping-penalty MSE, so only the direct form is provided.
pub fn chambers_variant_theta(stats: &SufficientStats, c: f64) -> Result<ThetaR> {
    check_c(c)?;
    if stats.sample_size() < 2 {
        return Ok(ThetaR {
            theta: stats.ybar_w,
            degenerate: true,
        });
    }
    let shift: f64 = chambers_residuals(stats)
        .iter()
        .zip(&stats.w)
        .zip(&stats.precision)
        .map(|((&rt, w), p)| w / p.sqrt() * psi_clip(rt, c))
        .sum();
    Ok(ThetaR {
        theta: stats.ybar_w + shift,
        degenerate: false,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RobustEstimate {
    pub theta_hat_r: f64,
    pub ybar_p_r: f64,
    /// Units with `|r_i| > C`, in frame order.
    pub clipped_units: Vec<String>,
    pub c_used: f64,
    pub scaling: Scaling,
    /// Per sampled unit `w_i s_i ψ_C(r_i)` where `s_i` is the residual scale.
    pub contributions: Vec<f64>,
    pub degenerate: bool,
}

/// Robust estimate of the population mean,
/// `N⁻¹[Σ_s y_i + θ̂_R Σ_u a_j]`.
pub fn robust_estimate(frame: &PopulationFrame, config: &RobustConfig) -> Result<RobustEstimate> {
    config.validate()?;
    let stats = sufficient_stats(frame)?;
    let c = match config.mode {
        ClipMode::Fixed(c) => c,
        ClipMode::ExcessBudget(m) => calibrate_c(frame, m)?,
    };
    let resolved = RobustConfig {
        mode: ClipMode::Fixed(c),
        scaling: config.scaling,
    };
    let theta = robust_theta(&stats, &resolved)?;

    let (residuals, scales): (Vec<f64>, Vec<f64>) = match (&stats.r, config.scaling) {
        (None, _) => (Vec::new(), Vec::new()),
        (Some(r), Scaling::PooledV) => (r.clone(), stats.v.clone()),
        (Some(_), Scaling::ChambersSigma) => (
            chambers_residuals(&stats),
            stats.precision.iter().map(|p| 1.0 / p.sqrt()).collect(),
        ),
    };
    let clipped_units = residuals
        .iter()
        .zip(&stats.unit_ids)
        .filter(|(r, _)| r.abs() > c)
        .map(|(_, id)| id.clone())
        .collect();
    let contributions = residuals
        .iter()
        .zip(&scales)
        .zip(&stats.w)
        .map(|((&r, s), w)| w * s * psi_clip(r, c))
        .collect();

    let ybar_p_r = if frame.is_census() {
        frame.sampled().map(|(_, y)| y).sum::<f64>() / frame.population_size() as f64
    } else {
        population_mean_given_theta(frame, theta.theta)
    };

    Ok(RobustEstimate {
        theta_hat_r: theta.theta,
        ybar_p_r,
        clipped_units,
        c_used: c,
        scaling: config.scaling,
        contributions,
        degenerate: theta.degenerate,
    })
}
