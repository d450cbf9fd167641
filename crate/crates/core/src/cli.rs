//! Batch front-end: `analyze` (ingest, fit, resample, report), `check`
//! (oracle suites), `simulate` (contraction experiments) and `summarize`
//! (dataset report). All artifacts are written atomically and embed the
//! config and master seed; identical config and seed reproduce identical
//! bytes at any thread count.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::data::{ingest_csv, positivity_report, summarize, CovariateSchema};
use crate::error::{Error, Result};
use crate::ipw::{
    clip_propensities, effective_sample_size, hajek_weights, weights_to_csv,
    DirichletPosteriorSpec, EssMode,
};
use crate::resampler::{
    ipw_direct_ate_draws, summarize_draws, BartPosteriorFunctional, PosteriorSummary,
};
use crate::rng::derive_rng;
use crate::stats::{ks_two_sample, mean};
use crate::trees::{
    clever_covariate, fit_continuous, fit_probit, inclusion_proportions, BartConfig, McmcSettings,
};
use crate::verify;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

/// Estimation method, matching the four reported rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    /// Sum-of-trees outcome model, Bayesian-bootstrap covariates.
    Bart,
    /// Same plus the clever covariate as an extra splitting column.
    BartCc,
    /// Closed-form weighted posterior, observed-count effective sample size.
    MargObs,
    /// Closed-form weighted posterior, importance-sampling effective sample size.
    MargIs,
}

impl Method {
    pub fn parse(s: &str) -> Result<Method> {
        match s {
            "bart" => Ok(Method::Bart),
            "bart-cc" => Ok(Method::BartCc),
            "marg-obs" => Ok(Method::MargObs),
            "marg-is" => Ok(Method::MargIs),
            other => Err(Error::Input(format!(
                "unknown method `{other}` (expected bart, bart-cc, marg-obs, marg-is)"
            ))),
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Method::Bart => "bart",
            Method::BartCc => "bart-cc",
            Method::MargObs => "marg-obs",
            Method::MargIs => "marg-is",
        }
    }
}

/// Estimand request in the run config.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum EstimandSpec {
    Ate,
    /// Difference in means per value of a covariate; grid defaults to the
    /// observed distinct values.
    Cate {
        column: String,
        #[serde(default)]
        grid: Option<Vec<f64>>,
    },
}

/// Full analysis configuration; every artifact embeds a copy.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    pub input: PathBuf,
    pub schema: PathBuf,
    pub method: Method,
    pub seed: u64,
    pub replicates: usize,
    /// Total horizon N for sequential resampling paths; recorded in
    /// artifacts and used by the equivalence suite.
    pub horizon: usize,
    #[serde(default = "default_mcmc")]
    pub mcmc: McmcSettings,
    pub estimands: Vec<EstimandSpec>,
    pub out: PathBuf,
}

fn default_mcmc() -> McmcSettings {
    McmcSettings::default()
}

impl RunConfig {
    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    fn validate(&self) -> Result<()> {
        if self.replicates == 0 {
            return Err(Error::Input("replicates must be positive".into()));
        }
        if self.estimands.is_empty() {
            return Err(Error::Input("estimand list is empty".into()));
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Command line surface
// ---------------------------------------------------------------------------

#[derive(Debug, Parser)]
#[command(
    name = "trialcast",
    about = "Emulated-trial posteriors from observational data via predictive resampling"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the full pipeline on a dataset and write report artifacts.
    Analyze {
        /// Run-config JSON path.
        #[arg(long)]
        config: PathBuf,
        /// Master seed (overrides the config).
        #[arg(long)]
        seed: Option<u64>,
        /// Method: bart, bart-cc, marg-obs, marg-is (overrides the config).
        #[arg(long)]
        method: Option<String>,
        /// Output directory (overrides the config).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Posterior replicates B (overrides the config).
        #[arg(long)]
        replicates: Option<usize>,
        /// Total horizon N (overrides the config).
        #[arg(long)]
        horizon: Option<usize>,
        /// Worker threads; defaults to available parallelism.
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Run a verification suite: oracles, martingale, contraction, equivalence.
    Check {
        /// Suite name.
        suite: String,
        #[arg(long, default_value_t = 20260824)]
        seed: u64,
        /// Report output directory.
        #[arg(long, default_value = "check-report")]
        out: PathBuf,
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Run the posterior-contraction experiment and write its table.
    Simulate {
        #[arg(long, default_value_t = 20260824)]
        seed: u64,
        #[arg(long, default_value = "simulate-out")]
        out: PathBuf,
        /// Replicates per sample size.
        #[arg(long, default_value_t = 200)]
        replicates: usize,
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Ingest a dataset and print its summary.
    Summarize {
        /// Run-config JSON path (only input/schema are used).
        #[arg(long)]
        config: PathBuf,
        /// Optional JSON output path (stdout otherwise).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Entry point used by the binary; returns the process exit code.
pub fn run(cli: Cli) -> i32 {
    let outcome = match cli.command {
        Command::Analyze {
            config,
            seed,
            method,
            out,
            replicates,
            horizon,
            threads,
        } => (|| -> Result<i32> {
            let mut cfg = RunConfig::from_json_file(&config)?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(m) = &method {
                cfg.method = Method::parse(m)?;
            }
            if let Some(o) = out {
                cfg.out = o;
            }
            if let Some(b) = replicates {
                cfg.replicates = b;
            }
            if let Some(n) = horizon {
                cfg.horizon = n;
            }
            install_pool(threads)?;
            cmd_analyze(&cfg)?;
            Ok(EXIT_OK)
        })(),
        Command::Check {
            suite,
            seed,
            out,
            threads,
        } => (|| -> Result<i32> {
            install_pool(threads)?;
            cmd_check(&suite, seed, &out)
        })(),
        Command::Simulate {
            seed,
            out,
            replicates,
            threads,
        } => (|| -> Result<i32> {
            install_pool(threads)?;
            cmd_simulate(seed, replicates, &out)?;
            Ok(EXIT_OK)
        })(),
        Command::Summarize { config, out } => (|| -> Result<i32> {
            cmd_summarize(&config, out.as_deref())?;
            Ok(EXIT_OK)
        })(),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Input(_) => EXIT_USAGE,
                _ => EXIT_FAILURE,
            }
        }
    }
}

fn install_pool(threads: Option<usize>) -> Result<()> {
    if let Some(k) = threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build_global()
            .map_err(|e| Error::Input(format!("thread pool: {e}")))?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Atomic artifact writing
// ---------------------------------------------------------------------------

fn write_atomic(path: &Path, content: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, content)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

// ---------------------------------------------------------------------------
// analyze
// ---------------------------------------------------------------------------

/// Summary artifact: config echo plus posterior summaries (draws omitted;
/// the density CSV carries them).
#[derive(Debug, Serialize)]
struct AnalysisReport<'a> {
    config: &'a RunConfig,
    n: usize,
    n_treated: usize,
    n_control: usize,
    ess_mode: Option<String>,
    ess_treated: Option<f64>,
    ess_control: Option<f64>,
    clever_inclusion: Option<f64>,
    summaries: Vec<SummaryRow>,
}

#[derive(Debug, Serialize)]
struct SummaryRow {
    label: String,
    method: String,
    mean: f64,
    median: f64,
    sd: f64,
    lo95: f64,
    hi95: f64,
}

impl From<&PosteriorSummary> for SummaryRow {
    fn from(s: &PosteriorSummary) -> Self {
        SummaryRow {
            label: s.label.clone(),
            method: s.method.clone(),
            mean: s.mean,
            median: s.median,
            sd: s.sd,
            lo95: s.lo95,
            hi95: s.hi95,
        }
    }
}

pub fn cmd_analyze(cfg: &RunConfig) -> Result<()> {
    cfg.validate()?;
    let schema = CovariateSchema::from_json_file(&cfg.schema)?;
    let ds = ingest_csv(&cfg.input, &schema)?;

    let needs_propensity = matches!(cfg.method, Method::BartCc | Method::MargObs | Method::MargIs);
    let pi_hat = if needs_propensity {
        let mut rng = derive_rng(cfg.seed, 1_000_000);
        let (_, pi) = fit_probit(&ds.x, &ds.t, &BartConfig::default(), &cfg.mcmc, &mut rng)?;
        let (pi, clipped) = clip_propensities(&pi);
        if clipped > 0 {
            eprintln!("analyze: clipped {clipped} fitted propensities away from the boundary");
        }
        Some(pi)
    } else {
        None
    };

    let mut log = String::new();
    writeln!(log, "config: {}", serde_json::to_string(cfg)?).ok();
    writeln!(log, "seed: {}", cfg.seed).ok();
    writeln!(
        log,
        "dataset: n = {}, treated = {}, control = {}",
        ds.n(),
        ds.n_treated(),
        ds.n_control()
    )
    .ok();

    let mut report = AnalysisReport {
        config: cfg,
        n: ds.n(),
        n_treated: ds.n_treated(),
        n_control: ds.n_control(),
        ess_mode: None,
        ess_treated: None,
        ess_control: None,
        clever_inclusion: None,
        summaries: Vec::new(),
    };
    let mut summaries: Vec<PosteriorSummary> = Vec::new();
    let mut cate_rows: Vec<(f64, PosteriorSummary)> = Vec::new();

    match cfg.method {
        Method::MargObs | Method::MargIs => {
            let mode = if cfg.method == Method::MargObs {
                EssMode::ObservedCount
            } else {
                EssMode::ImportanceSampling
            };
            let pi = pi_hat.as_ref().unwrap();
            let w = hajek_weights(&ds.t, pi)?.with_ess(&ds.t, mode);
            let (e1, e0) = effective_sample_size(&w, &ds.t, mode);
            report.ess_mode = Some(format!("{mode:?}"));
            report.ess_treated = Some(e1);
            report.ess_control = Some(e0);
            writeln!(log, "ess: treated = {e1:.2}, control = {e0:.2}, total = {:.2}", e1 + e0)
                .ok();
            let spec = DirichletPosteriorSpec::from_weights(&ds.y, &w)?;
            let draws = ipw_direct_ate_draws(&spec, cfg.replicates, cfg.seed)?;
            summaries.push(summarize_draws(draws, "ate", cfg.method.label())?);
            for e in &cfg.estimands {
                if let EstimandSpec::Cate { column, .. } = e {
                    writeln!(
                        log,
                        "note: `{column}` conditional effects need the outcome-model method; skipped"
                    )
                    .ok();
                }
            }
            write_atomic(
                &cfg.out.join("weights.csv"),
                &weights_to_csv(&ds.t, pi, &w),
            )?;
        }
        Method::Bart | Method::BartCc => {
            let mut rng = derive_rng(cfg.seed, 2_000_000);
            let extra: Vec<Vec<f64>> = if cfg.method == Method::BartCc {
                let h = clever_covariate(&ds.t, pi_hat.as_ref().unwrap(), "probit posterior mean")?;
                vec![h.h]
            } else {
                Vec::new()
            };
            let model = fit_continuous(&ds, &extra, &BartConfig::default(), &cfg.mcmc, &mut rng)?;
            if cfg.method == Method::BartCc {
                let incl = inclusion_proportions(&model);
                let h_prop = incl.proportions[incl.proportions.len() - 1];
                report.clever_inclusion = Some(h_prop);
                writeln!(log, "clever covariate inclusion proportion: {h_prop:.4}").ok();
                let mut csv = String::from("feature,proportion\n");
                let mut names = vec!["treatment".to_string()];
                names.extend(schema.covariate_columns().iter().map(|s| s.to_string()));
                names.push("clever".to_string());
                for (name, p) in names.iter().zip(&incl.proportions) {
                    writeln!(csv, "{name},{p}").ok();
                }
                write_atomic(&cfg.out.join("inclusion.csv"), &csv)?;
            }
            let f = BartPosteriorFunctional::new(&model, &ds.x, pi_hat.as_deref())?;
            summaries.push(summarize_draws(
                f.ate_draws(cfg.replicates, cfg.seed),
                "ate",
                cfg.method.label(),
            )?);
            for e in &cfg.estimands {
                if let EstimandSpec::Cate { column, grid } = e {
                    let col = ds
                        .column(column)
                        .ok_or_else(|| Error::MissingColumn(column.clone()))?
                        .to_vec();
                    let grid = grid.clone().unwrap_or_else(|| {
                        let mut v = col.clone();
                        v.sort_by(|a, b| a.partial_cmp(b).unwrap());
                        v.dedup();
                        v
                    });
                    for (value, draws) in f.cate_draws(&col, &grid, cfg.replicates, cfg.seed)? {
                        if draws.len() < 2 {
                            continue;
                        }
                        let s = summarize_draws(
                            draws,
                            &format!("cate:{column}={value}"),
                            cfg.method.label(),
                        )?;
                        cate_rows.push((value, s));
                    }
                }
            }
        }
    }

    // Artifacts.
    let mut table = String::from("method,label,mean,median,sd,lo95,hi95\n");
    for s in &summaries {
        writeln!(
            table,
            "{},{},{:.6},{:.6},{:.6},{:.6},{:.6}",
            s.method, s.label, s.mean, s.median, s.sd, s.lo95, s.hi95
        )
        .ok();
    }
    write_atomic(&cfg.out.join("table.csv"), &table)?;

    let mut density = String::from("method,replicate,theta\n");
    for s in &summaries {
        if s.label == "ate" {
            for (i, d) in s.draws.iter().enumerate() {
                writeln!(density, "{},{i},{d}", s.method).ok();
            }
        }
    }
    write_atomic(&cfg.out.join("ate_density.csv"), &density)?;

    if !cate_rows.is_empty() {
        let mut csv = String::from("value,mean,lo95,hi95,sd\n");
        for (v, s) in &cate_rows {
            writeln!(csv, "{v},{},{},{},{}", s.mean, s.lo95, s.hi95, s.sd).ok();
        }
        write_atomic(&cfg.out.join("cate.csv"), &csv)?;
    }

    report.summaries = summaries.iter().map(SummaryRow::from).collect();
    report
        .summaries
        .extend(cate_rows.iter().map(|(_, s)| SummaryRow::from(s)));
    write_atomic(
        &cfg.out.join("summary.json"),
        &format!("{}\n", serde_json::to_string_pretty(&report)?),
    )?;
    for s in &summaries {
        writeln!(
            log,
            "{} {}: mean = {:.4}, sd = {:.4}, 95% = [{:.4}, {:.4}]",
            s.method, s.label, s.mean, s.sd, s.lo95, s.hi95
        )
        .ok();
    }
    write_atomic(&cfg.out.join("run.log"), &log)?;
    println!("{}", log.trim_end());
    Ok(())
}

// ---------------------------------------------------------------------------
// check
// ---------------------------------------------------------------------------

struct CheckCase {
    name: String,
    passed: bool,
    detail: String,
}

fn junit_report(suite: &str, cases: &[CheckCase]) -> String {
    let failures = cases.iter().filter(|c| !c.passed).count();
    let mut xml = format!(
        "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<testsuite name=\"{suite}\" tests=\"{}\" failures=\"{failures}\">\n",
        cases.len()
    );
    for c in cases {
        if c.passed {
            writeln!(
                xml,
                "  <testcase name=\"{}\"><system-out>{}</system-out></testcase>",
                c.name, c.detail
            )
            .ok();
        } else {
            writeln!(
                xml,
                "  <testcase name=\"{}\"><failure>{}</failure></testcase>",
                c.name, c.detail
            )
            .ok();
        }
    }
    xml.push_str("</testsuite>\n");
    xml
}

pub fn cmd_check(suite: &str, seed: u64, out: &Path) -> Result<i32> {
    let cases = match suite {
        "oracles" => check_oracles(seed),
        "martingale" => check_martingale(),
        "contraction" => check_contraction(seed),
        "equivalence" => check_equivalence(seed),
        other => {
            return Err(Error::Input(format!(
                "unknown suite `{other}` (expected oracles, martingale, contraction, equivalence)"
            )))
        }
    };
    let report = junit_report(suite, &cases);
    write_atomic(&out.join(format!("{suite}.xml")), &report)?;
    let mut ok = true;
    for c in &cases {
        let status = if c.passed { "pass" } else { "FAIL" };
        println!("{status}  {}  {}", c.name, c.detail);
        ok &= c.passed;
    }
    Ok(if ok { EXIT_OK } else { EXIT_FAILURE })
}

fn check_oracles(seed: u64) -> Vec<CheckCase> {
    let mut cases = Vec::new();
    let mut rng = derive_rng(seed, 1);
    let mut worst_g = 0.0f64;
    let mut worst_att = 0.0f64;
    for _ in 0..100 {
        let world = verify::random_world(&mut rng);
        worst_g = worst_g.max(verify::ipw_identity_check(&world));
        worst_att = worst_att.max(verify::att_identification_check(&world));
    }
    cases.push(CheckCase {
        name: "ipw-identity-100-random-worlds".into(),
        passed: worst_g < 1e-12,
        detail: format!("worst residual {worst_g:.3e}"),
    });
    cases.push(CheckCase {
        name: "att-identification-100-random-worlds".into(),
        passed: worst_att < 1e-12,
        detail: format!("worst residual {worst_att:.3e}"),
    });

    // Negative controls must fail their checks.
    let world = verify::random_world(&mut rng);
    let wrong_pi: Vec<f64> = world.propensity.iter().map(|p| (p + 0.17).min(0.95)).collect();
    let r = verify::ipw_identity_residual(&world, &wrong_pi);
    cases.push(CheckCase {
        name: "negative-control-wrong-pi".into(),
        passed: r > 1e-6,
        detail: format!("expected-fail: {} (residual {r:.3e})", if r > 1e-6 { "ok" } else { "NOT DETECTED" }),
    });
    let broken = [world.outcome_probs[1].clone(), world.outcome_probs[0].clone()];
    let r = verify::att_identification_residual(&world, &broken);
    cases.push(CheckCase {
        name: "negative-control-broken-modularity".into(),
        passed: r > 1e-6,
        detail: format!("expected-fail: {} (residual {r:.3e})", if r > 1e-6 { "ok" } else { "NOT DETECTED" }),
    });
    cases
}

fn check_martingale() -> Vec<CheckCase> {
    let mut cases = Vec::new();
    let bb = verify::ExactBayesianBootstrap::new(vec![2, 1, 1]);
    let c = verify::cid_exact_check(&bb, 2);
    cases.push(CheckCase {
        name: "bayesian-bootstrap-exact-cid".into(),
        passed: c.holds,
        detail: format!("worst residual {}", c.worst_residual),
    });
    let urn = verify::ExactPolyaUrn::new(vec![
        verify::ratio(3, 2),
        verify::ratio(1, 2),
        verify::ratio(1, 1),
    ]);
    let c = verify::cid_exact_check(&urn, 2);
    cases.push(CheckCase {
        name: "weighted-urn-exact-cid".into(),
        passed: c.holds,
        detail: format!("worst residual {}", c.worst_residual),
    });
    let drift = verify::DriftingKernel::uniform(3);
    let c = verify::cid_exact_check(&drift, 2);
    cases.push(CheckCase {
        name: "negative-control-drifting-kernel".into(),
        passed: !c.holds,
        detail: format!(
            "expected-fail: {} (worst residual {})",
            if c.holds { "NOT DETECTED" } else { "ok" },
            c.worst_residual
        ),
    });
    cases
}

fn check_contraction(seed: u64) -> Vec<CheckCase> {
    let mut cases = Vec::new();
    for mode in [EssMode::ObservedCount, EssMode::ImportanceSampling] {
        let rows =
            verify::contraction_experiment(&verify::ContinuousDgp { tau: 2.0 }, &[250, 1000, 4000], 200, mode, seed);
        let mut ok = true;
        let mut detail = String::new();
        for pair in rows.windows(2) {
            let ratio = pair[1].mean_posterior_sd / pair[0].mean_posterior_sd;
            ok &= (0.40..=0.62).contains(&ratio);
            write!(detail, "sd ratio {} -> {}: {ratio:.3}; ", pair[0].n, pair[1].n).ok();
        }
        cases.push(CheckCase {
            name: format!("contraction-rate-{mode:?}"),
            passed: ok,
            detail,
        });
    }
    cases
}

fn check_equivalence(seed: u64) -> Vec<CheckCase> {
    use crate::resampler::{
        run_predictive_resampling, BayesianBootstrapKernel, ClosureFactory, CovariateKernel,
        Estimand, IpwUrnOutcomeKernel, OutcomeKernel, ResamplingPlan,
    };
    // Small observed sample so posterior spread dominates truncation noise.
    let y = vec![
        12.0, 9.5, 14.0, 8.0, 11.0, 10.5, 13.5, 7.5, 12.5, 9.0, 11.5, 10.0, 13.0, 8.5, 12.2,
        9.8, 11.8, 10.2, 12.8, 8.8, 30.0, 2.0, 15.0, 6.0, 11.1, 10.9, 13.2, 7.9, 12.1, 9.4,
        11.6, 10.6, 12.9, 8.2, 12.4, 9.1, 11.3, 10.3, 12.6, 8.6,
    ];
    let t: Vec<u8> = (0..40).map(|i| u8::from(i % 2 == 0)).collect();
    let pi: Vec<f64> = (0..40).map(|i| 0.3 + 0.4 * ((i % 5) as f64 / 4.0)).collect();
    let w = hajek_weights(&t, &pi)
        .unwrap()
        .with_ess(&t, EssMode::ObservedCount);
    let spec = DirichletPosteriorSpec::from_weights(&y, &w).unwrap();
    let x: Vec<Vec<f64>> = vec![(0..40).map(|i| i as f64).collect()];

    let mut passes = 0;
    let mut detail = String::new();
    for s in 0..5u64 {
        let spec_cl = spec.clone();
        let x_cl = x.clone();
        let factory = ClosureFactory {
            make_covariate: move |_r: usize| -> Result<Box<dyn CovariateKernel>> {
                Ok(Box::new(BayesianBootstrapKernel::new(&x_cl, None)?))
            },
            make_outcome: move |_r: usize| -> Result<Box<dyn OutcomeKernel>> {
                Ok(Box::new(IpwUrnOutcomeKernel::new(&spec_cl)?))
            },
        };
        let plan = ResamplingPlan {
            n_observed: 40,
            horizon: 40 + 10_000,
            replicates: 2000,
            master_seed: seed.wrapping_add(2 * s),
            threads: None,
        };
        let seq =
            run_predictive_resampling(&factory, &plan, &[Estimand::Ate], "urn").expect("urn run");
        let direct = ipw_direct_ate_draws(&spec, 2000, seed.wrapping_add(2 * s + 1))
            .expect("closed-form draws");
        let (d, p) = ks_two_sample(&seq[0].draws, &direct);
        let pass = p > 0.01;
        passes += i32::from(pass);
        write!(detail, "seed {s}: D = {d:.4}, p = {p:.4}; ").ok();
    }
    vec![CheckCase {
        name: "urn-vs-closed-form-ks".into(),
        passed: passes >= 4,
        detail: format!("{passes}/5 seeds passed; {detail}"),
    }]
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

pub fn cmd_simulate(seed: u64, replicates: usize, out: &Path) -> Result<()> {
    let mut csv = String::from("mode,n,mean_abs_error,mean_posterior_sd,seed\n");
    let mut log = String::new();
    writeln!(log, "seed: {seed}, replicates per n: {replicates}").ok();
    for mode in [EssMode::ObservedCount, EssMode::ImportanceSampling] {
        let rows = verify::contraction_experiment(
            &verify::ContinuousDgp { tau: 2.0 },
            &[250, 1000, 4000],
            replicates,
            mode,
            seed,
        );
        for r in &rows {
            writeln!(
                csv,
                "{mode:?},{},{},{},{seed}",
                r.n, r.mean_abs_error, r.mean_posterior_sd
            )
            .ok();
        }
        let slope = verify::rate_exponent(&rows);
        writeln!(log, "{mode:?}: fitted contraction exponent {slope:.3}").ok();
    }
    write_atomic(&out.join("contraction.csv"), &csv)?;
    write_atomic(&out.join("simulate.log"), &log)?;
    println!("{}", log.trim_end());
    Ok(())
}

// ---------------------------------------------------------------------------
// summarize
// ---------------------------------------------------------------------------

#[derive(Debug, Serialize)]
struct SummarizeReport {
    summary: crate::data::DatasetSummary,
    whole_file_outcome_mean: f64,
    whole_file_rows: usize,
    positivity_violations: usize,
}

pub fn cmd_summarize(config: &Path, out: Option<&Path>) -> Result<()> {
    let cfg = RunConfig::from_json_file(config)?;
    let schema = CovariateSchema::from_json_file(&cfg.schema)?;
    let ds = ingest_csv(&cfg.input, &schema)?;
    let summary = summarize(&ds);

    // Whole-file outcome mean, before eligibility filtering.
    let raw = std::fs::read_to_string(&cfg.input)?;
    let unfiltered = ingest_csv_str_unfiltered(&raw, &schema)?;
    let whole_mean = mean(&unfiltered.0);

    // Positivity bands from a quick propensity fit are costly; report the
    // trivial arm-count check here and leave bands to `analyze`.
    let pr = positivity_report(
        &ds,
        &vec![ds.n_treated() as f64 / ds.n() as f64; ds.n()],
        0.01,
    )?;

    let report = SummarizeReport {
        summary,
        whole_file_outcome_mean: whole_mean,
        whole_file_rows: unfiltered.0.len(),
        positivity_violations: pr.violations(),
    };
    let text = format!("{}\n", serde_json::to_string_pretty(&report)?);
    match out {
        Some(path) => write_atomic(path, &text)?,
        None => print!("{text}"),
    }
    Ok(())
}

/// Outcome column of every data row, ignoring eligibility filters.
fn ingest_csv_str_unfiltered(text: &str, schema: &CovariateSchema) -> Result<(Vec<f64>,)> {
    let mut unfiltered = schema.clone();
    unfiltered.eligibility_filters = Vec::new();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(text.as_bytes());
    let headers = reader.headers()?.clone();
    let idx = headers
        .iter()
        .position(|h| h == schema.outcome_column)
        .ok_or_else(|| Error::MissingColumn(schema.outcome_column.clone()))?;
    let mut y = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record?;
        let raw = record.get(idx).unwrap_or("").trim();
        if raw.is_empty() {
            continue;
        }
        y.push(raw.parse::<f64>().map_err(|e| Error::Parse {
            row,
            column: schema.outcome_column.clone(),
            message: e.to_string(),
        })?);
    }
    Ok((y,))
}

#[cfg(test)]
mod tests;
