//! Predictive resampling of the missing trial population. Each replicate
//! forward-simulates rows k = n+1..N from a factorized predictive —
//! covariates (with the natural assignment carried alongside), a fair-coin
//! treatment, and an outcome kernel — then evaluates trial estimands on the
//! imputed empirical measure. Exchangeable kernels also expose direct
//! posterior shortcuts that skip the sequential loop.

use rand::Rng;
use rand::RngCore;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ipw::{dirichlet_posterior_draw, DirichletPosteriorSpec, PolyaUrn};
use crate::rng::derive_rng;
use crate::stats;
use crate::trees::{clever_value, BartModel, Link};

// ---------------------------------------------------------------------------
// Kernels
// ---------------------------------------------------------------------------

/// Factor D (and optionally factor C): one-step-ahead predictive over the
/// covariate row, with the natural assignment indicator carried jointly so
/// its predictive conditions on exactly the same history.
pub trait CovariateKernel: Send {
    /// Draw the next covariate row (and optional natural assignment) and
    /// absorb it into the kernel state.
    fn sample(&mut self, rng: &mut dyn RngCore) -> (Vec<f64>, Option<u8>);
}

/// Factor A: one-step-ahead predictive over the outcome given (t, x).
/// Implementations must not look at the natural assignment (factor-C
/// measurability); the engine never passes it in.
pub trait OutcomeKernel: Send {
    fn sample(&mut self, t: u8, x: &[f64], rng: &mut dyn RngCore) -> f64;
}

/// Bayesian bootstrap over rows: the predictive at step k is uniform over
/// all k-1 previously seen rows, observed and imputed alike.
pub struct BayesianBootstrapKernel {
    rows: Vec<(Vec<f64>, Option<u8>)>,
}

impl BayesianBootstrapKernel {
    /// Build from column-major covariates; `t_obs` optionally attaches the
    /// natural assignment to each row.
    pub fn new(x_cols: &[Vec<f64>], t_obs: Option<&[u8]>) -> Result<Self> {
        let n = x_cols.first().map(|c| c.len()).unwrap_or(0);
        if n == 0 {
            return Err(Error::Input("empty covariate sample".into()));
        }
        if let Some(t) = t_obs {
            if t.len() != n {
                return Err(Error::Input("t_obs length mismatch".into()));
            }
        }
        let rows = (0..n)
            .map(|i| {
                (
                    x_cols.iter().map(|c| c[i]).collect(),
                    t_obs.map(|t| t[i]),
                )
            })
            .collect();
        Ok(BayesianBootstrapKernel { rows })
    }
}

impl CovariateKernel for BayesianBootstrapKernel {
    fn sample(&mut self, rng: &mut dyn RngCore) -> (Vec<f64>, Option<u8>) {
        let i = rng.gen_range(0..self.rows.len());
        let row = self.rows[i].clone();
        self.rows.push(row.clone());
        row
    }
}

/// Direct-posterior shortcut of the Bayesian bootstrap: limiting weights
/// over the n observed rows are Dirichlet(1, ..., 1).
pub fn bayesian_bootstrap_direct_weights<R: Rng>(n: usize, rng: &mut R) -> Vec<f64> {
    // Dirichlet(1,...,1) via normalized standard exponentials.
    let mut w: Vec<f64> = (0..n).map(|_| -rng.gen::<f64>().ln()).collect();
    let total: f64 = w.iter().sum();
    for v in &mut w {
        *v /= total;
    }
    w
}

/// Outcome kernel of the design-stage model: a per-arm urn over the observed
/// outcomes, seeded with importance-weighted mass, ignoring x.
pub struct IpwUrnOutcomeKernel {
    urn: PolyaUrn,
}

impl IpwUrnOutcomeKernel {
    pub fn new(spec: &DirichletPosteriorSpec) -> Result<Self> {
        Ok(IpwUrnOutcomeKernel {
            urn: PolyaUrn::new(spec)?,
        })
    }
}

impl OutcomeKernel for IpwUrnOutcomeKernel {
    fn sample(&mut self, t: u8, _x: &[f64], mut rng: &mut dyn RngCore) -> f64 {
        self.urn.step(t, &mut rng)
    }
}

/// Degenerate outcome kernel: every outcome equals a constant.
pub struct ConstantOutcomeKernel(pub f64);

impl OutcomeKernel for ConstantOutcomeKernel {
    fn sample(&mut self, _t: u8, _x: &[f64], _rng: &mut dyn RngCore) -> f64 {
        self.0
    }
}

/// Plug-in flexible outcome kernel: one posterior ensemble draw held fixed
/// during imputation, sampling y ~ N(f(t, x, [h]), sigma). When a propensity
/// model is attached, the clever covariate is recomputed at the new (t, x)
/// from its posterior-mean propensity.
pub struct BartOutcomeKernel {
    model: BartModel,
    draw: usize,
    propensity: Option<BartModel>,
}

impl BartOutcomeKernel {
    pub fn new(model: BartModel, draw: usize, propensity: Option<BartModel>) -> Result<Self> {
        if draw >= model.draws.len() {
            return Err(Error::Input("draw index out of range".into()));
        }
        if let Some(p) = &propensity {
            if p.link != Link::Probit {
                return Err(Error::Input("propensity model must be probit".into()));
            }
        }
        Ok(BartOutcomeKernel {
            model,
            draw,
            propensity,
        })
    }

    fn features(&self, t: u8, x: &[f64]) -> Vec<f64> {
        let mut f = Vec::with_capacity(1 + x.len() + 1);
        f.push(t as f64);
        f.extend_from_slice(x);
        if let Some(p) = &self.propensity {
            let mut acc = 0.0;
            for d in 0..p.draws.len() {
                acc += p.predict_prob(d, x);
            }
            let pi = (acc / p.draws.len() as f64).clamp(1e-3, 1.0 - 1e-3);
            f.push(clever_value(t, pi));
        }
        f
    }
}

impl OutcomeKernel for BartOutcomeKernel {
    fn sample(&mut self, t: u8, x: &[f64], mut rng: &mut dyn RngCore) -> f64 {
        let f = self.features(t, x);
        self.model.predict_row_with_noise(self.draw, &f, &mut rng)
    }
}

// ---------------------------------------------------------------------------
// Imputed trial and estimands
// ---------------------------------------------------------------------------

/// One imputed row of the emulated trial (regime E throughout).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrialRow {
    pub y: f64,
    pub t: u8,
    pub t_obs: Option<u8>,
    pub x: Vec<f64>,
}

/// Rows k = n+1..N of one predictive-resampling replicate.
#[derive(Debug, Clone)]
pub struct ImputedTrial {
    pub rows: Vec<TrialRow>,
    pub n_observed: usize,
    pub horizon: usize,
    pub replicate_id: usize,
}

impl ImputedTrial {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("k,y,t,t_obs");
        let p = self.rows.first().map(|r| r.x.len()).unwrap_or(0);
        for j in 0..p {
            out.push_str(&format!(",x{j}"));
        }
        out.push('\n');
        for (i, r) in self.rows.iter().enumerate() {
            let tobs = r
                .t_obs
                .map(|v| v.to_string())
                .unwrap_or_default();
            out.push_str(&format!("{},{},{},{}", self.n_observed + 1 + i, r.y, r.t, tobs));
            for v in &r.x {
                out.push_str(&format!(",{v}"));
            }
            out.push('\n');
        }
        out
    }
}

/// Difference of arm means over the imputed rows.
pub fn ate_from_trial(trial: &ImputedTrial) -> Result<f64> {
    arm_mean_difference(trial.rows.iter().map(|r| (r.y, r.t)))
}

fn arm_mean_difference(rows: impl Iterator<Item = (f64, u8)>) -> Result<f64> {
    let (mut s1, mut n1, mut s0, mut n0) = (0.0, 0usize, 0.0, 0usize);
    for (y, t) in rows {
        if t == 1 {
            s1 += y;
            n1 += 1;
        } else {
            s0 += y;
            n0 += 1;
        }
    }
    if n1 == 0 || n0 == 0 {
        return Err(Error::EstimandUndefined(format!(
            "empty arm (n1 = {n1}, n0 = {n0})"
        )));
    }
    Ok(s1 / n1 as f64 - s0 / n0 as f64)
}

/// Difference of arm means restricted to rows with natural assignment 1.
pub fn att_from_trial(trial: &ImputedTrial) -> Result<f64> {
    if trial.rows.iter().any(|r| r.t_obs.is_none()) {
        return Err(Error::EstimandUndefined(
            "natural assignment not imputed; cannot form the treated-population estimand".into(),
        ));
    }
    arm_mean_difference(
        trial
            .rows
            .iter()
            .filter(|r| r.t_obs == Some(1))
            .map(|r| (r.y, r.t)),
    )
}

/// Per-grid-value difference in means; missing cells are reported with
/// count 0 rather than failing.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CateCell {
    pub value: f64,
    pub estimate: Option<f64>,
    pub n_rows: usize,
}

pub fn cate_by_value(trial: &ImputedTrial, column: usize, grid: &[f64]) -> Vec<CateCell> {
    grid.iter()
        .map(|&v| {
            let rows: Vec<(f64, u8)> = trial
                .rows
                .iter()
                .filter(|r| r.x[column] == v)
                .map(|r| (r.y, r.t))
                .collect();
            let n_rows = rows.len();
            CateCell {
                value: v,
                estimate: arm_mean_difference(rows.into_iter()).ok(),
                n_rows,
            }
        })
        .collect()
}

/// Ratio of arm event rates for a binary outcome.
pub fn risk_ratio_from_trial(trial: &ImputedTrial) -> Result<f64> {
    let (mut s1, mut n1, mut s0, mut n0) = (0.0, 0usize, 0.0, 0usize);
    for r in &trial.rows {
        if r.y != 0.0 && r.y != 1.0 {
            return Err(Error::Domain(format!(
                "risk ratio requires binary outcomes, found {}",
                r.y
            )));
        }
        if r.t == 1 {
            s1 += r.y;
            n1 += 1;
        } else {
            s0 += r.y;
            n0 += 1;
        }
    }
    if n1 == 0 || n0 == 0 {
        return Err(Error::EstimandUndefined("empty arm".into()));
    }
    let r0 = s0 / n0 as f64;
    if r0 == 0.0 {
        return Err(Error::EstimandUndefined(
            "no events in the control arm; risk ratio undefined".into(),
        ));
    }
    Ok((s1 / n1 as f64) / r0)
}

// ---------------------------------------------------------------------------
// Posterior summaries
// ---------------------------------------------------------------------------

/// Empirical posterior of one estimand over B replicates.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PosteriorSummary {
    pub label: String,
    pub method: String,
    pub draws: Vec<f64>,
    pub mean: f64,
    pub median: f64,
    pub sd: f64,
    pub lo95: f64,
    pub hi95: f64,
}

pub fn summarize_draws(draws: Vec<f64>, label: &str, method: &str) -> Result<PosteriorSummary> {
    if draws.len() < 2 {
        return Err(Error::Input("need at least 2 draws to summarize".into()));
    }
    if let Some(i) = draws.iter().position(|v| !v.is_finite()) {
        return Err(Error::Input(format!(
            "non-finite draw in replicate {i} for `{label}`"
        )));
    }
    let mut sorted = draws.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok(PosteriorSummary {
        label: label.to_string(),
        method: method.to_string(),
        mean: stats::mean(&draws),
        median: stats::quantile(&sorted, 0.5),
        sd: stats::sample_sd(&draws),
        lo95: stats::quantile(&sorted, 0.025),
        hi95: stats::quantile(&sorted, 0.975),
        draws,
    })
}

// ---------------------------------------------------------------------------
// The sequential engine
// ---------------------------------------------------------------------------

/// Estimand functionals the engine can evaluate on each imputed trial.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum Estimand {
    Ate,
    Att,
    RiskRatio,
    /// Difference in means within each grid value of covariate `column`.
    Cate { column: usize, grid: Vec<f64> },
}

/// Builds the per-replicate kernels. Implementations must be deterministic
/// functions of the replicate id (all randomness flows through the engine's
/// derived streams).
pub trait PredictiveFactory: Sync {
    fn covariate_kernel(&self, replicate: usize) -> Result<Box<dyn CovariateKernel>>;
    fn outcome_kernel(&self, replicate: usize) -> Result<Box<dyn OutcomeKernel>>;
}

/// Factory from plain closures.
pub struct ClosureFactory<C, O>
where
    C: Fn(usize) -> Result<Box<dyn CovariateKernel>> + Sync,
    O: Fn(usize) -> Result<Box<dyn OutcomeKernel>> + Sync,
{
    pub make_covariate: C,
    pub make_outcome: O,
}

impl<C, O> PredictiveFactory for ClosureFactory<C, O>
where
    C: Fn(usize) -> Result<Box<dyn CovariateKernel>> + Sync,
    O: Fn(usize) -> Result<Box<dyn OutcomeKernel>> + Sync,
{
    fn covariate_kernel(&self, replicate: usize) -> Result<Box<dyn CovariateKernel>> {
        (self.make_covariate)(replicate)
    }
    fn outcome_kernel(&self, replicate: usize) -> Result<Box<dyn OutcomeKernel>> {
        (self.make_outcome)(replicate)
    }
}

#[derive(Debug, Clone)]
pub struct ResamplingPlan {
    pub n_observed: usize,
    /// Total horizon N; the engine imputes N - n_observed rows.
    pub horizon: usize,
    pub replicates: usize,
    pub master_seed: u64,
    /// None: use the global rayon pool. Some(k): a dedicated k-thread pool.
    pub threads: Option<usize>,
}

/// Run one replicate's imputation loop.
pub fn impute_replicate(
    factory: &dyn PredictiveFactory,
    plan: &ResamplingPlan,
    replicate: usize,
    stream: u64,
) -> Result<ImputedTrial> {
    let mut rng = derive_rng(plan.master_seed, stream);
    let mut cov = factory.covariate_kernel(replicate)?;
    let mut out = factory.outcome_kernel(replicate)?;
    let m = plan.horizon - plan.n_observed;
    let mut rows = Vec::with_capacity(m);
    for _ in 0..m {
        let (x, t_obs) = cov.sample(&mut rng);
        let t = u8::from(rng.gen::<f64>() < 0.5);
        let y = out.sample(t, &x, &mut rng);
        rows.push(TrialRow { y, t, t_obs, x });
    }
    Ok(ImputedTrial {
        rows,
        n_observed: plan.n_observed,
        horizon: plan.horizon,
        replicate_id: replicate,
    })
}

fn evaluate(trial: &ImputedTrial, estimands: &[Estimand]) -> Result<Vec<Vec<f64>>> {
    // One value per scalar output; CATE contributes one per grid value with
    // missing cells recorded as NaN (filtered at summary time).
    let mut out = Vec::new();
    for e in estimands {
        match e {
            Estimand::Ate => out.push(vec![ate_from_trial(trial)?]),
            Estimand::Att => out.push(vec![att_from_trial(trial)?]),
            Estimand::RiskRatio => out.push(vec![risk_ratio_from_trial(trial)?]),
            Estimand::Cate { column, grid } => out.push(
                cate_by_value(trial, *column, grid)
                    .into_iter()
                    .map(|c| c.estimate.unwrap_or(f64::NAN))
                    .collect(),
            ),
        }
    }
    Ok(out)
}

fn replicate_values(
    factory: &dyn PredictiveFactory,
    plan: &ResamplingPlan,
    estimands: &[Estimand],
    replicate: usize,
) -> Result<Vec<Vec<f64>>> {
    // A replicate whose estimand is undefined (e.g. an empty arm at a tiny
    // horizon) is resampled once on a fresh stream, then it is a hard error.
    let first = impute_replicate(factory, plan, replicate, replicate as u64 + 1)
        .and_then(|t| evaluate(&t, estimands));
    match first {
        Ok(v) => Ok(v),
        Err(Error::EstimandUndefined(_)) => {
            eprintln!("replicate {replicate}: estimand undefined; resampling once");
            let retry = plan.replicates as u64 + replicate as u64 + 1;
            let trial = impute_replicate(factory, plan, replicate, retry)?;
            evaluate(&trial, estimands)
        }
        Err(e) => Err(e),
    }
}

/// Algorithm-1 driver: impute B trials in parallel and summarize each
/// estimand over replicates. Output is bit-identical for any thread count.
pub fn run_predictive_resampling(
    factory: &dyn PredictiveFactory,
    plan: &ResamplingPlan,
    estimands: &[Estimand],
    method_label: &str,
) -> Result<Vec<PosteriorSummary>> {
    if plan.horizon <= plan.n_observed {
        return Err(Error::Input("horizon must exceed the observed sample".into()));
    }
    if plan.replicates == 0 {
        return Err(Error::Input("need at least one replicate".into()));
    }
    let run = || -> Result<Vec<Vec<Vec<f64>>>> {
        (0..plan.replicates)
            .into_par_iter()
            .map(|b| replicate_values(factory, plan, estimands, b))
            .collect()
    };
    let per_replicate = match plan.threads {
        None => run()?,
        Some(k) => rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build()
            .map_err(|e| Error::Input(format!("thread pool: {e}")))?
            .install(run)?,
    };

    let mut summaries = Vec::new();
    for (ei, e) in estimands.iter().enumerate() {
        match e {
            Estimand::Cate { grid, .. } => {
                for (gi, &gv) in grid.iter().enumerate() {
                    let draws: Vec<f64> = per_replicate
                        .iter()
                        .map(|r| r[ei][gi])
                        .filter(|v| v.is_finite())
                        .collect();
                    if draws.len() < 2 {
                        continue; // cell absent from (almost) all replicates
                    }
                    summaries.push(summarize_draws(
                        draws,
                        &format!("cate@{gv}"),
                        method_label,
                    )?);
                }
            }
            _ => {
                let label = match e {
                    Estimand::Ate => "ate",
                    Estimand::Att => "att",
                    Estimand::RiskRatio => "risk_ratio",
                    Estimand::Cate { .. } => unreachable!(),
                };
                let draws: Vec<f64> = per_replicate.iter().map(|r| r[ei][0]).collect();
                summaries.push(summarize_draws(draws, label, method_label)?);
            }
        }
    }
    Ok(summaries)
}

// ---------------------------------------------------------------------------
// Direct posterior shortcuts
// ---------------------------------------------------------------------------

/// Closed-form posterior draws of the mean-difference functional for the
/// design-stage model (no sequential loop). Parallel over replicates,
/// deterministic per (master_seed, replicate).
pub fn ipw_direct_ate_draws(
    spec: &DirichletPosteriorSpec,
    replicates: usize,
    master_seed: u64,
) -> Result<Vec<f64>> {
    (0..replicates)
        .into_par_iter()
        .map(|b| {
            let mut rng = derive_rng(master_seed, b as u64 + 1);
            dirichlet_posterior_draw(spec, &mut rng).map(|d| d.theta)
        })
        .collect()
}

/// Posterior functionals of the flexible outcome model under
/// Bayesian-bootstrap covariate weights: per replicate, draw Dirichlet
/// weights over the observed rows, pair them with one ensemble draw (cycled
/// in order), and average the per-unit predicted treatment effects.
pub struct BartPosteriorFunctional {
    /// diff[d][i] = f_d(1, x_i, [h(1, x_i)]) - f_d(0, x_i, [h(0, x_i)]).
    pub diff: Vec<Vec<f64>>,
    pub n_units: usize,
}

impl BartPosteriorFunctional {
    /// `x_cols` are the covariate columns of the observed sample; `pi_hat`
    /// switches on the clever covariate, recomputed at both arms from the
    /// stored propensities.
    pub fn new(model: &BartModel, x_cols: &[Vec<f64>], pi_hat: Option<&[f64]>) -> Result<Self> {
        let n = x_cols.first().map(|c| c.len()).unwrap_or(0);
        if n == 0 {
            return Err(Error::Input("empty covariate sample".into()));
        }
        let with_h = pi_hat.is_some();
        let expected = 1 + x_cols.len() + usize::from(with_h);
        if model.n_features != expected {
            return Err(Error::Input(format!(
                "model expects {} features, design supplies {expected}",
                model.n_features
            )));
        }
        if let Some(p) = pi_hat {
            if p.len() != n {
                return Err(Error::Input("pi_hat length mismatch".into()));
            }
        }
        let diff: Vec<Vec<f64>> = (0..model.draws.len())
            .into_par_iter()
            .map(|d| {
                let mut row = vec![0.0; expected];
                (0..n)
                    .map(|i| {
                        for (j, col) in x_cols.iter().enumerate() {
                            row[1 + j] = col[i];
                        }
                        row[0] = 1.0;
                        if let Some(p) = pi_hat {
                            row[expected - 1] = clever_value(1, p[i]);
                        }
                        let f1 = model.predict_row(d, &row);
                        row[0] = 0.0;
                        if let Some(p) = pi_hat {
                            row[expected - 1] = clever_value(0, p[i]);
                        }
                        f1 - model.predict_row(d, &row)
                    })
                    .collect()
            })
            .collect();
        Ok(BartPosteriorFunctional { diff, n_units: n })
    }

    /// ATE draws: theta_b = sum_i w_i * diff_{d(b), i}.
    pub fn ate_draws(&self, replicates: usize, master_seed: u64) -> Vec<f64> {
        (0..replicates)
            .into_par_iter()
            .map(|b| {
                let mut rng = derive_rng(master_seed, b as u64 + 1);
                let w = bayesian_bootstrap_direct_weights(self.n_units, &mut rng);
                let d = &self.diff[b % self.diff.len()];
                w.iter().zip(d).map(|(wi, di)| wi * di).sum()
            })
            .collect()
    }

    /// CATE draws by distinct value of `group` (one weighted average of
    /// per-unit effects within each cell, weights renormalized per cell).
    pub fn cate_draws(
        &self,
        group: &[f64],
        grid: &[f64],
        replicates: usize,
        master_seed: u64,
    ) -> Result<Vec<(f64, Vec<f64>)>> {
        if group.len() != self.n_units {
            return Err(Error::Input("group column length mismatch".into()));
        }
        let cells: Vec<(f64, Vec<usize>)> = grid
            .iter()
            .map(|&v| {
                (
                    v,
                    (0..self.n_units).filter(|&i| group[i] == v).collect::<Vec<_>>(),
                )
            })
            .collect();
        let per_rep: Vec<Vec<f64>> = (0..replicates)
            .into_par_iter()
            .map(|b| {
                let mut rng = derive_rng(master_seed, b as u64 + 1);
                let w = bayesian_bootstrap_direct_weights(self.n_units, &mut rng);
                let d = &self.diff[b % self.diff.len()];
                cells
                    .iter()
                    .map(|(_, idx)| {
                        let tot: f64 = idx.iter().map(|&i| w[i]).sum();
                        if tot > 0.0 {
                            idx.iter().map(|&i| w[i] * d[i]).sum::<f64>() / tot
                        } else {
                            f64::NAN
                        }
                    })
                    .collect()
            })
            .collect();
        Ok(cells
            .iter()
            .enumerate()
            .map(|(ci, (v, _))| {
                (
                    *v,
                    per_rep
                        .iter()
                        .map(|r| r[ci])
                        .filter(|x| x.is_finite())
                        .collect(),
                )
            })
            .collect())
    }
}

#[cfg(test)]
mod tests;
