//! Population frames, the normal superpopulation model and the classical
//! (posterior mean) estimator of the finite population mean.
//!
//! Conditional on `θ`, `y_i ~ N(θ a_i, σ_i²)` independently; `θ` has a flat
//! prior. With sample `s` the posterior of `θ` is `N(ȳ_w, 1/S_aa)` where
//! `S_aa = Σ_s a_i²/σ_i²` and `ȳ_w = Σ_s a_i y_i/σ_i² / S_aa`.

use serde::{Deserialize, Serialize};

use crate::divergence::GaussianSpec;
use crate::error::{Error, Result};

/// Absolute tolerance on `Σ π_i = n` for Horvitz-Thompson frames.
pub const HT_PI_SUM_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Unit {
    pub unit_id: String,
    pub a: f64,
    pub sigma2: f64,
    /// Observed value; `Some` exactly for sampled units.
    pub y: Option<f64>,
}

impl Unit {
    pub fn sampled(&self) -> bool {
        self.y.is_some()
    }
}

/// The `N` units of a finite population with their model constants and the
/// observed values of the sampled units.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PopulationFrame {
    units: Vec<Unit>,
}

impl PopulationFrame {
    pub fn new(units: Vec<Unit>) -> Result<Self> {
        if units.len() < 2 {
            return Err(Error::InvalidFrame(format!(
                "population needs at least 2 units, got {}",
                units.len()
            )));
        }
        let mut seen = std::collections::HashSet::with_capacity(units.len());
        for u in &units {
            if !seen.insert(u.unit_id.as_str()) {
                return Err(Error::InvalidFrame(format!("duplicate unit_id `{}`", u.unit_id)));
            }
            if !(u.a.is_finite() && u.a > 0.0) {
                return Err(Error::InvalidModel(format!(
                    "unit `{}`: a must be positive and finite, got {}",
                    u.unit_id, u.a
                )));
            }
            if !(u.sigma2.is_finite() && u.sigma2 > 0.0) {
                return Err(Error::InvalidModel(format!(
                    "unit `{}`: sigma2 must be positive and finite, got {}",
                    u.unit_id, u.sigma2
                )));
            }
            if let Some(y) = u.y {
                if !y.is_finite() {
                    return Err(Error::InvalidFrame(format!(
                        "unit `{}`: y is not finite",
                        u.unit_id
                    )));
                }
            }
        }
        Ok(Self { units })
    }

    /// Frame with ids `"1"..="N"` built from parallel columns.
    pub fn from_columns(a: &[f64], sigma2: &[f64], y: &[Option<f64>]) -> Result<Self> {
        if a.len() != sigma2.len() || a.len() != y.len() {
            return Err(Error::InvalidFrame(format!(
                "column lengths differ: a={}, sigma2={}, y={}",
                a.len(),
                sigma2.len(),
                y.len()
            )));
        }
        let units = a
            .iter()
            .zip(sigma2)
            .zip(y)
            .enumerate()
            .map(|(i, ((&a, &sigma2), &y))| Unit {
                unit_id: (i + 1).to_string(),
                a,
                sigma2,
                y,
            })
            .collect();
        Self::new(units)
    }

    pub fn units(&self) -> &[Unit] {
        &self.units
    }

    /// Population size `N`.
    pub fn population_size(&self) -> usize {
        self.units.len()
    }

    /// Sample size `n`.
    pub fn sample_size(&self) -> usize {
        self.units.iter().filter(|u| u.sampled()).count()
    }

    pub fn is_census(&self) -> bool {
        self.units.iter().all(Unit::sampled)
    }

    /// Sampled units paired with their observed values, in frame order.
    pub fn sampled(&self) -> impl Iterator<Item = (&Unit, f64)> + '_ {
        self.units.iter().filter_map(|u| u.y.map(|y| (u, y)))
    }

    pub fn unsampled(&self) -> impl Iterator<Item = &Unit> + '_ {
        self.units.iter().filter(|u| !u.sampled())
    }

    /// Same frame with the observed values replaced, in sampled-unit order.
    pub fn with_sample_values(&self, values: &[f64]) -> Result<Self> {
        let n = self.sample_size();
        if values.len() != n {
            return Err(Error::DimensionMismatch {
                left: values.len(),
                right: n,
            });
        }
        let mut it = values.iter();
        let units = self
            .units
            .iter()
            .map(|u| Unit {
                y: u.y.map(|_| *it.next().expect("length checked")),
                ..u.clone()
            })
            .collect();
        Self::new(units)
    }

    /// Frame with the sampled unit at sample position `k` marked unsampled.
    pub fn without_sampled(&self, k: usize) -> Result<Self> {
        let mut pos = 0usize;
        let mut found = false;
        let units = self
            .units
            .iter()
            .map(|u| {
                let mut u = u.clone();
                if u.sampled() {
                    if pos == k {
                        u.y = None;
                        found = true;
                    }
                    pos += 1;
                }
                u
            })
            .collect();
        if !found {
            return Err(Error::InvalidArgument(format!(
                "sample position {k} out of range"
            )));
        }
        Self::new(units)
    }
}

/// Named special cases of the model that fix `(a_i, σ_i²)` from auxiliaries.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum ModelSpec {
    /// `a_i = x_i`, `σ_i² = σ² x_i`: the ratio estimator.
    Ratio { sigma: f64 },
    /// `a_i = x_i`, `σ_i² = x_i²`.
    Royall,
    /// `a_i = π_i`, `σ_i² = π_i²/(1 − π_i)`: the Horvitz-Thompson estimator.
    HorvitzThompson,
    /// `(a_i, σ_i²)` given directly.
    Custom,
}

/// Per-unit auxiliary information as read from a frame file.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Auxiliary {
    /// Size variable `x_i` (ratio and Royall families).
    Size(f64),
    /// Inclusion probability `π_i` (Horvitz-Thompson family).
    Inclusion(f64),
    /// Model constants supplied directly (custom family).
    Direct { a: f64, sigma2: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RawUnit {
    pub unit_id: String,
    pub aux: Auxiliary,
    pub y: Option<f64>,
}

/// Maps raw auxiliaries to model constants according to `spec`.
pub fn build_model(raw: &[RawUnit], spec: &ModelSpec) -> Result<PopulationFrame> {
    if let ModelSpec::Ratio { sigma } = *spec {
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(Error::InvalidModel(format!(
                "ratio family needs sigma > 0, got {sigma}"
            )));
        }
    }

    let mut units = Vec::with_capacity(raw.len());
    for r in raw {
        let (a, sigma2) = match (spec, r.aux) {
            (ModelSpec::Ratio { sigma }, Auxiliary::Size(x)) => {
                check_size(&r.unit_id, x)?;
                (x, sigma * sigma * x)
            }
            (ModelSpec::Royall, Auxiliary::Size(x)) => {
                check_size(&r.unit_id, x)?;
                (x, x * x)
            }
            (ModelSpec::HorvitzThompson, Auxiliary::Inclusion(pi)) => {
                if !(pi > 0.0 && pi < 1.0) {
                    return Err(Error::InvalidModel(format!(
                        "unit `{}`: inclusion probability must lie in (0, 1), got {pi}",
                        r.unit_id
                    )));
                }
                (pi, pi * pi / (1.0 - pi))
            }
            (ModelSpec::Custom, Auxiliary::Direct { a, sigma2 }) => (a, sigma2),
            (spec, aux) => {
                return Err(Error::InvalidModel(format!(
                    "unit `{}`: auxiliary {aux:?} does not fit model {spec:?}",
                    r.unit_id
                )))
            }
        };
        units.push(Unit {
            unit_id: r.unit_id.clone(),
            a,
            sigma2,
            y: r.y,
        });
    }

    if let ModelSpec::HorvitzThompson = spec {
        let n = raw.iter().filter(|r| r.y.is_some()).count() as f64;
        let total: f64 = units.iter().map(|u| u.a).sum();
        if (total - n).abs() > HT_PI_SUM_TOL {
            return Err(Error::InvalidModel(format!(
                "inclusion probabilities sum to {total}, expected the sample size {n}"
            )));
        }
    }

    PopulationFrame::new(units)
}

fn check_size(id: &str, x: f64) -> Result<()> {
    if x.is_finite() && x > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidModel(format!(
            "unit `{id}`: size variable must be positive, got {x}"
        )))
    }
}

/// Sufficient statistics of the sample and the per-unit quantities derived
/// from them. Vectors are indexed by sample position (frame order).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SufficientStats {
    /// `Σ_s a_i²/σ_i²`, the posterior precision of `θ`.
    pub s_aa: f64,
    /// `Σ_s a_i y_i/σ_i²`
    pub s_ay: f64,
    /// Posterior mean of `θ`.
    pub ybar_w: f64,
    pub unit_ids: Vec<String>,
    /// `a_i²/σ_i²`
    pub precision: Vec<f64>,
    /// `y_i/a_i`
    pub ratio: Vec<f64>,
    /// `w_i = a_i²σ_i⁻² / S_aa`
    pub w: Vec<f64>,
    /// `v_i = (σ_i²/a_i² − 1/S_aa)^{1/2}`, the sd of `y_i/a_i − ȳ_w`.
    pub v: Vec<f64>,
    /// Standardized residuals `(y_i/a_i − ȳ_w)/v_i`; `None` when `n = 1`.
    pub r: Option<Vec<f64>>,
}

impl SufficientStats {
    pub fn sample_size(&self) -> usize {
        self.w.len()
    }

    /// Residuals, or a degenerate-frame error when `n = 1`.
    pub fn residuals(&self) -> Result<&[f64]> {
        self.r
            .as_deref()
            .ok_or_else(|| Error::Degenerate("residuals need at least 2 sampled units".into()))
    }

    /// `Σ w_i² v_i²`, the per-unit clipping-penalty weight.
    pub fn sum_w2v2(&self) -> f64 {
        self.w
            .iter()
            .zip(&self.v)
            .map(|(w, v)| (w * v).powi(2))
            .sum()
    }

    /// `Σ w_i v_i r_i`, identically zero up to rounding.
    pub fn weighted_residual_sum(&self) -> Option<f64> {
        let r = self.r.as_ref()?;
        Some(
            self.w
                .iter()
                .zip(&self.v)
                .zip(r)
                .map(|((w, v), r)| w * v * r)
                .sum(),
        )
    }
}

pub fn sufficient_stats(frame: &PopulationFrame) -> Result<SufficientStats> {
    let n = frame.sample_size();
    if n == 0 {
        return Err(Error::NoSample);
    }
    let mut unit_ids = Vec::with_capacity(n);
    let mut precision = Vec::with_capacity(n);
    let mut ratio = Vec::with_capacity(n);
    let mut s_aa = 0.0;
    let mut s_ay = 0.0;
    for (u, y) in frame.sampled() {
        let p = u.a * u.a / u.sigma2;
        s_aa += p;
        s_ay += u.a * y / u.sigma2;
        unit_ids.push(u.unit_id.clone());
        precision.push(p);
        ratio.push(y / u.a);
    }
    let ybar_w = s_ay / s_aa;
    let w: Vec<f64> = precision.iter().map(|p| p / s_aa).collect();
    // v_i² = 1/p_i − 1/S_aa = (S_aa − p_i)/(p_i S_aa), with S_aa − p_i summed
    // over the other units to avoid cancellation
    let v: Vec<f64> = (0..n)
        .map(|i| {
            let others: f64 = precision
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(_, p)| p)
                .sum();
            (others / (precision[i] * s_aa)).sqrt()
        })
        .collect();
    let r = (n >= 2).then(|| {
        ratio
            .iter()
            .zip(&v)
            .map(|(q, v)| (q - ybar_w) / v)
            .collect()
    });
    Ok(SufficientStats {
        s_aa,
        s_ay,
        ybar_w,
        unit_ids,
        precision,
        ratio,
        w,
        v,
        r,
    })
}

/// Population mean estimate `N⁻¹[Σ_s y_i + θ Σ_u a_j]` for a given `θ`.
pub(crate) fn population_mean_given_theta(frame: &PopulationFrame, theta: f64) -> f64 {
    let observed: f64 = frame.sampled().map(|(_, y)| y).sum();
    let unseen_a: f64 = frame.unsampled().map(|u| u.a).sum();
    (observed + theta * unseen_a) / frame.population_size() as f64
}

/// Classical estimator `ŷ_P = N⁻¹[Σ_s y_i + ȳ_w Σ_u a_j]`; the exact mean on
/// a census.
pub fn classical_estimate(frame: &PopulationFrame) -> Result<f64> {
    let stats = sufficient_stats(frame)?;
    Ok(population_mean_given_theta(frame, stats.ybar_w))
}

/// Posterior predictive of the unsampled values:
/// `N(ȳ_w a_u, Σ_u + a_u a_uᵀ / S_aa)`.
pub fn posterior_predictive(frame: &PopulationFrame) -> Result<GaussianSpec> {
    if frame.is_census() {
        return Err(Error::Census);
    }
    let stats = sufficient_stats(frame)?;
    let a_u: Vec<f64> = frame.unsampled().map(|u| u.a).collect();
    let p = a_u.len();
    let mean: Vec<f64> = a_u.iter().map(|a| stats.ybar_w * a).collect();
    let mut cov = vec![0.0; p * p];
    for (i, u) in frame.unsampled().enumerate() {
        for j in 0..p {
            cov[i * p + j] = a_u[i] * a_u[j] / stats.s_aa;
        }
        cov[i * p + i] += u.sigma2;
    }
    GaussianSpec::from_row_major(mean, cov)
}
