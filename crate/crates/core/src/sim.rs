//! Seeded Monte Carlo harness for the robust estimator.
//!
//! Every replication draws all `N` values from the model (optionally
//! contaminating some sampled units), then evaluates the classical and the
//! clipped estimators against the realized population mean. Replication `r`
//! uses its own counter-based substream, and partial sums are merged in a
//! fixed block order, so results are bit-identical for any thread count.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{sufficient_stats, PopulationFrame, SufficientStats, Unit};
use crate::risk::{g, RiskInputs};
use crate::rng::Substream;
use crate::robust::clip_excess;
use crate::stats::{Comoments, Estimate, Moments};

/// Replications per reduction block.
pub const REP_BLOCK: u64 = 1024;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TemplateUnit {
    pub unit_id: String,
    pub a: f64,
    pub sigma2: f64,
    pub sampled: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Contamination {
    #[default]
    None,
    /// Adds `delta · σ_i` to each listed unit.
    Shift { units: Vec<String>, delta: f64 },
    /// Multiplies the deviation from `θ a_i` by `√factor`.
    VarianceInflation { units: Vec<String>, factor: f64 },
    /// Replaces the value outright.
    Substitution { units: Vec<String>, value: f64 },
}

impl Contamination {
    fn units(&self) -> &[String] {
        match self {
            Contamination::None => &[],
            Contamination::Shift { units, .. }
            | Contamination::VarianceInflation { units, .. }
            | Contamination::Substitution { units, .. } => units,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub frame_template: Vec<TemplateUnit>,
    pub theta_true: f64,
    #[serde(default)]
    pub contamination: Contamination,
    pub c_grid: Vec<f64>,
    pub reps: u64,
    pub seed: u64,
}

fn violation(pointer: impl Into<String>, message: impl Into<String>) -> Error {
    Error::InvalidConfig {
        pointer: pointer.into(),
        message: message.into(),
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.reps < 2 {
            return Err(violation("/reps", "must be at least 2"));
        }
        if !self.theta_true.is_finite() {
            return Err(violation("/theta_true", "must be finite"));
        }
        if self.c_grid.is_empty() {
            return Err(violation("/c_grid", "must not be empty"));
        }
        for (i, c) in self.c_grid.iter().enumerate() {
            if c.is_nan() || *c < 0.0 {
                return Err(violation(format!("/c_grid/{i}"), "must be nonnegative"));
            }
        }
        let sampled = self.frame_template.iter().filter(|u| u.sampled).count();
        if sampled < 2 {
            return Err(violation("/frame_template", "needs at least 2 sampled units"));
        }
        if sampled == self.frame_template.len() {
            return Err(violation("/frame_template", "needs at least 1 unsampled unit"));
        }
        self.template_frame().map_err(|e| violation("/frame_template", e.to_string()))?;

        let kind = match &self.contamination {
            Contamination::None => return Ok(()),
            Contamination::Shift { delta, .. } => {
                if !delta.is_finite() {
                    return Err(violation("/contamination/delta", "must be finite"));
                }
                "shift"
            }
            Contamination::VarianceInflation { factor, .. } => {
                if !(factor.is_finite() && *factor > 1.0) {
                    return Err(violation("/contamination/factor", "must exceed 1"));
                }
                "variance_inflation"
            }
            Contamination::Substitution { value, .. } => {
                if !value.is_finite() {
                    return Err(violation("/contamination/value", "must be finite"));
                }
                "substitution"
            }
        };
        let by_id: HashMap<&str, &TemplateUnit> = self
            .frame_template
            .iter()
            .map(|u| (u.unit_id.as_str(), u))
            .collect();
        for (i, id) in self.contamination.units().iter().enumerate() {
            match by_id.get(id.as_str()) {
                Some(u) if u.sampled => {}
                Some(_) => {
                    return Err(violation(
                        format!("/contamination/units/{i}"),
                        format!("{kind}: unit `{id}` is not sampled"),
                    ))
                }
                None => {
                    return Err(violation(
                        format!("/contamination/units/{i}"),
                        format!("{kind}: unknown unit `{id}`"),
                    ))
                }
            }
        }
        Ok(())
    }

    /// The template as a frame with zero placeholders for sampled values.
    pub fn template_frame(&self) -> Result<PopulationFrame> {
        PopulationFrame::new(
            self.frame_template
                .iter()
                .map(|u| Unit {
                    unit_id: u.unit_id.clone(),
                    a: u.a,
                    sigma2: u.sigma2,
                    y: u.sampled.then_some(0.0),
                })
                .collect(),
        )
    }
}

/// One replication: all `N` realized values and the observed frame.
#[derive(Debug, Clone)]
pub struct SimDraw {
    pub y: Vec<f64>,
    pub frame: PopulationFrame,
}

impl SimDraw {
    pub fn population_mean(&self) -> f64 {
        self.y.iter().sum::<f64>() / self.y.len() as f64
    }
}

enum Effect {
    None,
    Shift(f64),
    Inflate(f64),
    Substitute(f64),
}

/// Template geometry shared by every replication.
struct Prepared<'a> {
    config: &'a SimConfig,
    sampled: Vec<usize>,
    effect: Vec<Effect>,
    stats: SufficientStats,
    unseen_a: f64,
}

impl<'a> Prepared<'a> {
    fn new(config: &'a SimConfig) -> Result<Self> {
        config.validate()?;
        let frame = config.template_frame()?;
        let stats = sufficient_stats(&frame)?;
        let targets: std::collections::HashSet<&str> =
            config.contamination.units().iter().map(String::as_str).collect();
        let effect = config
            .frame_template
            .iter()
            .map(|u| {
                if !targets.contains(u.unit_id.as_str()) {
                    return Effect::None;
                }
                match config.contamination {
                    Contamination::None => Effect::None,
                    Contamination::Shift { delta, .. } => Effect::Shift(delta * u.sigma2.sqrt()),
                    Contamination::VarianceInflation { factor, .. } => Effect::Inflate(factor.sqrt()),
                    Contamination::Substitution { value, .. } => Effect::Substitute(value),
                }
            })
            .collect();
        Ok(Self {
            config,
            sampled: (0..config.frame_template.len())
                .filter(|&i| config.frame_template[i].sampled)
                .collect(),
            effect,
            stats,
            unseen_a: frame.unsampled().map(|u| u.a).sum(),
        })
    }

    fn draw(&self, rep: u64) -> Vec<f64> {
        let theta = self.config.theta_true;
        let mut rng = Substream::new(self.config.seed, rep);
        self.config
            .frame_template
            .iter()
            .zip(&self.effect)
            .map(|(u, effect)| {
                let z = rng.standard_normal();
                let sd = u.sigma2.sqrt();
                match *effect {
                    Effect::None => theta * u.a + sd * z,
                    Effect::Shift(s) => theta * u.a + sd * z + s,
                    Effect::Inflate(k) => theta * u.a + k * sd * z,
                    Effect::Substitute(v) => v,
                }
            })
            .collect()
    }

    /// Pooled estimate and standardized residuals for one draw, evaluated
    /// with the same operations as [`sufficient_stats`].
    fn pooled(&self, y: &[f64]) -> (f64, Vec<f64>, f64) {
        let units = &self.config.frame_template;
        let mut s_ay = 0.0;
        let mut observed = 0.0;
        for &i in &self.sampled {
            s_ay += units[i].a * y[i] / units[i].sigma2;
            observed += y[i];
        }
        let ybar_w = s_ay / self.stats.s_aa;
        let r = self
            .sampled
            .iter()
            .zip(&self.stats.v)
            .map(|(&i, v)| (y[i] / units[i].a - ybar_w) / v)
            .collect();
        (ybar_w, r, observed)
    }
}

/// Draws replication `rep_index`; deterministic in `(config.seed, rep_index)`.
pub fn simulate_once(config: &SimConfig, rep_index: u64) -> Result<SimDraw> {
    let prepared = Prepared::new(config)?;
    let y = prepared.draw(rep_index);
    let units = config
        .frame_template
        .iter()
        .zip(&y)
        .map(|(u, &y)| Unit {
            unit_id: u.unit_id.clone(),
            a: u.a,
            sigma2: u.sigma2,
            y: u.sampled.then_some(y),
        })
        .collect();
    Ok(SimDraw {
        frame: PopulationFrame::new(units)?,
        y,
    })
}

#[derive(Clone)]
struct GridAccum {
    theta: Moments,
    pop: Moments,
    cross: Moments,
    diag: Moments,
    psi_sq: Vec<Moments>,
}

#[derive(Clone)]
struct Accum {
    grid: Vec<GridAccum>,
    classical: Moments,
    failures: u64,
}

impl Accum {
    fn new(grid: usize, n: usize) -> Self {
        Self {
            grid: vec![
                GridAccum {
                    theta: Moments::new(),
                    pop: Moments::new(),
                    cross: Moments::new(),
                    diag: Moments::new(),
                    psi_sq: vec![Moments::new(); n],
                };
                grid
            ],
            classical: Moments::new(),
            failures: 0,
        }
    }

    fn merge(&mut self, other: &Accum) {
        for (a, b) in self.grid.iter_mut().zip(&other.grid) {
            a.theta.merge(&b.theta);
            a.pop.merge(&b.pop);
            a.cross.merge(&b.cross);
            a.diag.merge(&b.diag);
            for (x, y) in a.psi_sq.iter_mut().zip(&b.psi_sq) {
                x.merge(y);
            }
        }
        self.classical.merge(&other.classical);
        self.failures += other.failures;
    }
}

/// Per-`C` summary. Squared errors of `θ̂_R` are on the `θ` scale; the
/// `_pop` fields are on the population-mean scale.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimRow {
    pub c: f64,
    pub emp_mse_theta: f64,
    pub se_theta: f64,
    pub emp_mse_pop: f64,
    pub se_pop: f64,
    /// Model MSE of the population estimate from the closed-form formula.
    pub theo_mse: f64,
    /// Mean of `Σ_{i≠k} w_i v_i w_k v_k ψ̃(r_i) ψ̃(r_k)`.
    pub cross_term: f64,
    pub se_cross: f64,
    pub classical_mse: f64,
    pub se_classical: f64,
    /// `1/S_aa + (Σ w_i² v_i²) g(C)`, the formula on the `θ` scale.
    pub theo_mse_theta: f64,
    /// Mean of `(θ̂_R − θ)² − cross`; equals `theo_mse_theta` in expectation
    /// when the model holds.
    pub diag_mse_theta: f64,
    pub se_diag: f64,
    pub g_of_c: f64,
    /// Empirical `E[ψ̃_C(r_i)²]` per sampled unit.
    pub psi_tilde_second_moment: Vec<Estimate>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimResult {
    pub reps: u64,
    pub failures: u64,
    pub seed: u64,
    pub theta_true: f64,
    pub s_aa: f64,
    pub sum_w2v2: f64,
    /// Model MSE of the classical estimator.
    pub baseline_mse: f64,
    pub rows: Vec<SimRow>,
}

/// Column order of [`SimResult::to_csv`].
pub const CSV_COLUMNS: [&str; 10] = [
    "c",
    "emp_mse_theta",
    "se_theta",
    "emp_mse_pop",
    "se_pop",
    "theo_mse",
    "cross_term",
    "se_cross",
    "classical_mse",
    "se_classical",
];

impl SimResult {
    /// One row per `C`, shortest round-trip decimals.
    pub fn to_csv(&self) -> String {
        let mut out = CSV_COLUMNS.join(",");
        out.push('\n');
        for r in &self.rows {
            let fields = [
                r.c,
                r.emp_mse_theta,
                r.se_theta,
                r.emp_mse_pop,
                r.se_pop,
                r.theo_mse,
                r.cross_term,
                r.se_cross,
                r.classical_mse,
                r.se_classical,
            ];
            let line: Vec<String> = fields.iter().map(|x| format!("{x:?}")).collect();
            out.push_str(&line.join(","));
            out.push('\n');
        }
        out
    }
}

fn run_blocks<T, F>(blocks: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..blocks).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..blocks).map(f).collect()
    }
}

/// Empirical MSE of the classical and clipped estimators over `reps`
/// replications, next to the closed-form model MSE.
pub fn empirical_risk(config: &SimConfig) -> Result<SimResult> {
    let prep = Prepared::new(config)?;
    let n = prep.sampled.len();
    let big_n = config.frame_template.len() as f64;
    let grid = &config.c_grid;
    let w = &prep.stats.w;
    let v = &prep.stats.v;

    let run_block = |block: u64| -> Accum {
        let mut acc = Accum::new(grid.len(), n);
        let start = block * REP_BLOCK;
        let end = (start + REP_BLOCK).min(config.reps);
        let mut t = vec![0.0; n];
        for rep in start..end {
            let y = prep.draw(rep);
            let ybar_p = y.iter().sum::<f64>() / big_n;
            let (ybar_w, r, observed) = prep.pooled(&y);
            if !ybar_p.is_finite() || r.iter().any(|x| !x.is_finite()) {
                acc.failures += 1;
                continue;
            }
            let classical = (observed + ybar_w * prep.unseen_a) / big_n;
            acc.classical.push((classical - ybar_p).powi(2));

            for (c, ga) in grid.iter().zip(acc.grid.iter_mut()) {
                let mut total = 0.0;
                let mut squares = 0.0;
                for i in 0..n {
                    let ex = clip_excess(r[i], *c);
                    ga.psi_sq[i].push(ex * ex);
                    t[i] = w[i] * v[i] * ex;
                    total += t[i];
                    squares += t[i] * t[i];
                }
                let theta_r = ybar_w - total;
                let err_theta = (theta_r - config.theta_true).powi(2);
                let pop = (observed + theta_r * prep.unseen_a) / big_n;
                let cross = total * total - squares;
                ga.theta.push(err_theta);
                ga.pop.push((pop - ybar_p).powi(2));
                ga.cross.push(cross);
                ga.diag.push(err_theta - cross);
            }
        }
        acc
    };

    let blocks = config.reps.div_ceil(REP_BLOCK);
    let parts = run_blocks(blocks, run_block);
    let mut total = Accum::new(grid.len(), n);
    for part in &parts {
        total.merge(part);
    }

    let inputs = RiskInputs {
        population_size: config.frame_template.len(),
        unseen_variance: config
            .frame_template
            .iter()
            .filter(|u| !u.sampled)
            .map(|u| u.sigma2)
            .sum(),
        unseen_a: prep.unseen_a,
        s_aa: prep.stats.s_aa,
        sum_w2v2: prep.stats.sum_w2v2(),
    };

    let rows = grid
        .iter()
        .zip(&total.grid)
        .map(|(&c, ga)| {
            let report = inputs.report(c)?;
            let g_of_c = g(c)?;
            Ok(SimRow {
                c,
                emp_mse_theta: ga.theta.mean(),
                se_theta: ga.theta.std_error(),
                emp_mse_pop: ga.pop.mean(),
                se_pop: ga.pop.std_error(),
                theo_mse: report.mse_robust,
                cross_term: ga.cross.mean(),
                se_cross: ga.cross.std_error(),
                classical_mse: total.classical.mean(),
                se_classical: total.classical.std_error(),
                theo_mse_theta: 1.0 / inputs.s_aa + inputs.sum_w2v2 * g_of_c,
                diag_mse_theta: ga.diag.mean(),
                se_diag: ga.diag.std_error(),
                g_of_c,
                psi_tilde_second_moment: ga.psi_sq.iter().map(Moments::estimate).collect(),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(SimResult {
        reps: config.reps,
        failures: total.failures,
        seed: config.seed,
        theta_true: config.theta_true,
        s_aa: inputs.s_aa,
        sum_w2v2: inputs.sum_w2v2,
        baseline_mse: inputs.report(f64::INFINITY)?.mse_baseline,
        rows,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResidualCorrelation {
    pub unit_i: String,
    pub unit_k: String,
    /// Empirical `E[r_i r_k]`, the correlation since each `r_i` has unit
    /// variance under the model.
    pub empirical: Estimate,
    /// Sample Pearson correlation of `(r_i, r_k)`.
    pub pearson: f64,
    /// `−(1/S_aa)/(v_i v_k)`
    pub analytic: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CovarianceProbe {
    /// Empirical `Cov(y_i/a_i − ȳ_w, ȳ_w)` per sampled unit.
    pub residual_vs_pooled: Vec<Estimate>,
    /// All pairs `i < k` of sampled units.
    pub residual_correlations: Vec<ResidualCorrelation>,
}

/// Measures the residual/pooled-estimate covariance (zero under the model)
/// and the pairwise residual correlations that the closed-form MSE ignores.
/// Cost is quadratic in the sample size.
pub fn covariance_probe(config: &SimConfig) -> Result<CovarianceProbe> {
    let prep = Prepared::new(config)?;
    let n = prep.sampled.len();
    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| ((i + 1)..n).map(move |k| (i, k)))
        .collect();

    let run_block = |block: u64| -> (Vec<Moments>, Vec<(Moments, Comoments)>) {
        let mut resid = vec![Moments::new(); n];
        let mut corr = vec![(Moments::new(), Comoments::default()); pairs.len()];
        let start = block * REP_BLOCK;
        let end = (start + REP_BLOCK).min(config.reps);
        for rep in start..end {
            let y = prep.draw(rep);
            let (ybar_w, r, _) = prep.pooled(&y);
            let centered = ybar_w - config.theta_true;
            for i in 0..n {
                resid[i].push(r[i] * prep.stats.v[i] * centered);
            }
            for ((m, cm), &(i, k)) in corr.iter_mut().zip(&pairs) {
                m.push(r[i] * r[k]);
                cm.push(r[i], r[k]);
            }
        }
        (resid, corr)
    };

    let parts = run_blocks(config.reps.div_ceil(REP_BLOCK), run_block);
    let mut resid = vec![Moments::new(); n];
    let mut corr = vec![(Moments::new(), Comoments::default()); pairs.len()];
    for (pr, pc) in &parts {
        resid.iter_mut().zip(pr).for_each(|(a, b)| a.merge(b));
        corr.iter_mut().zip(pc).for_each(|(a, b)| {
            a.0.merge(&b.0);
            a.1.merge(&b.1);
        });
    }

    let stats = &prep.stats;
    Ok(CovarianceProbe {
        residual_vs_pooled: resid.iter().map(Moments::estimate).collect(),
        residual_correlations: pairs
            .iter()
            .zip(&corr)
            .map(|(&(i, k), (m, cm))| ResidualCorrelation {
                unit_i: stats.unit_ids[i].clone(),
                unit_k: stats.unit_ids[k].clone(),
                empirical: m.estimate(),
                pearson: cm.correlation(),
                analytic: -(1.0 / stats.s_aa) / (stats.v[i] * stats.v[k]),
            })
            .collect(),
    })
}
