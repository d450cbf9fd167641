use super::*;
use crate::ipw::{hajek_weights, EssMode};
use crate::rng::derive_rng;
use crate::stats::ks_two_sample;
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, Zero};

fn trial(rows: Vec<TrialRow>) -> ImputedTrial {
    let n = rows.len();
    ImputedTrial {
        rows,
        n_observed: 4,
        horizon: 4 + n,
        replicate_id: 0,
    }
}

fn row(y: f64, t: u8) -> TrialRow {
    TrialRow {
        y,
        t,
        t_obs: None,
        x: vec![0.0],
    }
}

fn row_obs(y: f64, t: u8, t_obs: u8) -> TrialRow {
    TrialRow {
        y,
        t,
        t_obs: Some(t_obs),
        x: vec![0.0],
    }
}

// -- estimand functionals ---------------------------------------------------

#[test]
fn ate_hand_examples() {
    let t1 = trial(vec![row(1.0, 1), row(0.0, 0)]);
    assert_eq!(ate_from_trial(&t1).unwrap(), 1.0);

    let t2 = trial(vec![row(3.0, 1), row(5.0, 1), row(2.0, 0), row(6.0, 0)]);
    assert_eq!(ate_from_trial(&t2).unwrap(), 0.0);

    let mut rows = t2.rows.clone();
    rows.reverse();
    assert_eq!(ate_from_trial(&trial(rows)).unwrap(), 0.0);

    let empty_arm = trial(vec![row(1.0, 1), row(2.0, 1)]);
    assert!(matches!(
        ate_from_trial(&empty_arm),
        Err(Error::EstimandUndefined(_))
    ));
}

#[test]
fn att_restricts_to_naturally_treated() {
    // All t_obs = 1: restriction vacuous.
    let t1 = trial(vec![row_obs(3.0, 1, 1), row_obs(1.0, 0, 1)]);
    assert_eq!(att_from_trial(&t1).unwrap(), 2.0);

    // Fixture: among t_obs = 1 rows, treated mean 4, control mean 1.
    let t2 = trial(vec![
        row_obs(4.0, 1, 1),
        row_obs(1.0, 0, 1),
        row_obs(100.0, 1, 0),
        row_obs(-50.0, 0, 0),
    ]);
    assert_eq!(att_from_trial(&t2).unwrap(), 3.0);

    // Perturbing a t_obs = 0 row's outcome changes nothing.
    let mut t3 = t2.clone();
    t3.rows[2].y = -999.0;
    assert_eq!(att_from_trial(&t3).unwrap(), 3.0);

    // Missing natural assignment is an error, not a silent ATE.
    assert!(att_from_trial(&trial(vec![row(1.0, 1), row(0.0, 0)])).is_err());
}

#[test]
fn cate_hand_examples() {
    // Single grid value covering all rows equals the ATE.
    let t1 = trial(vec![row(3.0, 1), row(1.0, 0)]);
    let cells = cate_by_value(&t1, 0, &[0.0]);
    assert_eq!(cells[0].estimate, Some(2.0));
    assert_eq!(cells[0].n_rows, 2);

    // Two-value fixture.
    let mk = |y, t, v| TrialRow {
        y,
        t,
        t_obs: None,
        x: vec![v],
    };
    let t2 = trial(vec![
        mk(5.0, 1, 1.0),
        mk(1.0, 0, 1.0),
        mk(2.0, 1, 2.0),
        mk(2.0, 0, 2.0),
    ]);
    let cells = cate_by_value(&t2, 0, &[1.0, 2.0, 3.0]);
    assert_eq!(cells[0].estimate, Some(4.0));
    assert_eq!(cells[1].estimate, Some(0.0));
    assert_eq!(cells[2].estimate, None);
    assert_eq!(cells[2].n_rows, 0);
}

#[test]
fn risk_ratio_hand_examples() {
    // Identical arms -> 1.
    let t1 = trial(vec![row(1.0, 1), row(0.0, 1), row(1.0, 0), row(0.0, 0)]);
    assert_eq!(risk_ratio_from_trial(&t1).unwrap(), 1.0);

    // Arm rates 0.4 vs 0.2 -> 2.
    let mut rows = Vec::new();
    for i in 0..5 {
        rows.push(row(if i < 2 { 1.0 } else { 0.0 }, 1));
    }
    for i in 0..5 {
        rows.push(row(if i < 1 { 1.0 } else { 0.0 }, 0));
    }
    let t2 = trial(rows.clone());
    assert!((risk_ratio_from_trial(&t2).unwrap() - 2.0).abs() < 1e-15);

    // Adding a treated event weakly increases the ratio.
    rows.push(row(1.0, 1));
    assert!(risk_ratio_from_trial(&trial(rows)).unwrap() >= 2.0);

    // Zero control events -> undefined.
    let t3 = trial(vec![row(1.0, 1), row(0.0, 0)]);
    assert!(risk_ratio_from_trial(&t3).is_err());

    // Non-binary outcome rejected.
    let t4 = trial(vec![row(0.5, 1), row(0.0, 0)]);
    assert!(risk_ratio_from_trial(&t4).is_err());
}

#[test]
fn summarize_hand_examples() {
    let s = summarize_draws(vec![7.0; 10], "ate", "m").unwrap();
    assert_eq!(s.mean, 7.0);
    assert_eq!(s.median, 7.0);
    assert_eq!(s.sd, 0.0);
    assert_eq!((s.lo95, s.hi95), (7.0, 7.0));

    let s = summarize_draws(vec![1.0, 2.0, 3.0, 4.0], "ate", "m").unwrap();
    assert_eq!(s.mean, 2.5);
    assert_eq!(s.median, 2.5);

    let err = summarize_draws(vec![1.0, f64::NAN, 3.0], "ate", "m");
    assert!(err.unwrap_err().to_string().contains("replicate 1"));
}

// -- kernels ----------------------------------------------------------------

#[test]
fn bootstrap_with_single_row_repeats_it() {
    let mut k = BayesianBootstrapKernel::new(&[vec![2.5], vec![-1.0]], Some(&[1])).unwrap();
    let mut rng = derive_rng(1, 1);
    for _ in 0..20 {
        let (x, t_obs) = k.sample(&mut rng);
        assert_eq!(x, vec![2.5, -1.0]);
        assert_eq!(t_obs, Some(1));
    }
}

#[test]
fn direct_weights_have_uniform_mean() {
    let n = 8;
    let reps = 100_000;
    let mut rng = derive_rng(2, 1);
    let mut sums = vec![0.0; n];
    for _ in 0..reps {
        let w = bayesian_bootstrap_direct_weights(n, &mut rng);
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        for (s, v) in sums.iter_mut().zip(w) {
            *s += v;
        }
    }
    // Var of a Dirichlet(1,..,1) coordinate is (n-1)/(n^2 (n+1)).
    let se = ((n as f64 - 1.0) / (n as f64 * n as f64 * (n as f64 + 1.0)) / reps as f64).sqrt();
    for s in sums {
        assert!((s / reps as f64 - 1.0 / n as f64).abs() < 3.0 * se);
    }
}

fn small_spec(mode: EssMode) -> DirichletPosteriorSpec {
    let y = vec![1.0, 3.0, 2.0, 5.0, 4.0, 0.0];
    let t = vec![1u8, 0, 1, 0, 1, 0];
    let pi = vec![0.4, 0.3, 0.6, 0.5, 0.5, 0.7];
    let w = hajek_weights(&t, &pi).unwrap().with_ess(&t, mode);
    DirichletPosteriorSpec::from_weights(&y, &w).unwrap()
}

struct UrnFactory {
    spec: DirichletPosteriorSpec,
    x: Vec<Vec<f64>>,
}

impl PredictiveFactory for UrnFactory {
    fn covariate_kernel(&self, _replicate: usize) -> Result<Box<dyn CovariateKernel>> {
        Ok(Box::new(BayesianBootstrapKernel::new(&self.x, None)?))
    }
    fn outcome_kernel(&self, _replicate: usize) -> Result<Box<dyn OutcomeKernel>> {
        Ok(Box::new(IpwUrnOutcomeKernel::new(&self.spec)?))
    }
}

struct ConstantFactory {
    x: Vec<Vec<f64>>,
    c: f64,
}

impl PredictiveFactory for ConstantFactory {
    fn covariate_kernel(&self, _replicate: usize) -> Result<Box<dyn CovariateKernel>> {
        Ok(Box::new(BayesianBootstrapKernel::new(&self.x, None)?))
    }
    fn outcome_kernel(&self, _replicate: usize) -> Result<Box<dyn OutcomeKernel>> {
        Ok(Box::new(ConstantOutcomeKernel(self.c)))
    }
}

#[test]
fn constant_outcomes_give_zero_ate_draws() {
    let factory = ConstantFactory {
        x: vec![vec![0.0, 1.0, 2.0]],
        c: 4.25,
    };
    let plan = ResamplingPlan {
        n_observed: 3,
        horizon: 103,
        replicates: 20,
        master_seed: 9,
        threads: Some(2),
    };
    let out = run_predictive_resampling(&factory, &plan, &[Estimand::Ate], "const").unwrap();
    assert!(out[0].draws.iter().all(|&d| d == 0.0));
}

#[test]
fn treatment_frequency_is_half() {
    let factory = ConstantFactory {
        x: vec![vec![0.0]],
        c: 0.0,
    };
    let plan = ResamplingPlan {
        n_observed: 1,
        horizon: 501,
        replicates: 40,
        master_seed: 5,
        threads: Some(2),
    };
    let mut treated = 0usize;
    let mut total = 0usize;
    for b in 0..plan.replicates {
        let t = impute_replicate(&factory, &plan, b, b as u64 + 1).unwrap();
        treated += t.rows.iter().filter(|r| r.t == 1).count();
        total += t.rows.len();
    }
    let frac = treated as f64 / total as f64;
    let tol = 4.0 * (0.25 / total as f64).sqrt();
    assert!((frac - 0.5).abs() < tol, "frac = {frac}");
}

#[test]
fn outcome_kernel_never_sees_natural_assignment() {
    // Same seed, same covariate rows, but opposite natural-assignment
    // labels: every imputed y and t must be identical.
    let x = vec![vec![1.0, 2.0, 3.0]];
    let spec = small_spec(EssMode::ObservedCount);
    let plan = ResamplingPlan {
        n_observed: 3,
        horizon: 203,
        replicates: 1,
        master_seed: 33,
        threads: None,
    };
    struct F {
        x: Vec<Vec<f64>>,
        t_obs: Vec<u8>,
        spec: DirichletPosteriorSpec,
    }
    impl PredictiveFactory for F {
        fn covariate_kernel(&self, _r: usize) -> Result<Box<dyn CovariateKernel>> {
            Ok(Box::new(BayesianBootstrapKernel::new(
                &self.x,
                Some(&self.t_obs),
            )?))
        }
        fn outcome_kernel(&self, _r: usize) -> Result<Box<dyn OutcomeKernel>> {
            Ok(Box::new(IpwUrnOutcomeKernel::new(&self.spec)?))
        }
    }
    let fa = F {
        x: x.clone(),
        t_obs: vec![1, 1, 0],
        spec: spec.clone(),
    };
    let fb = F {
        x,
        t_obs: vec![0, 0, 1],
        spec,
    };
    let ta = impute_replicate(&fa, &plan, 0, 1).unwrap();
    let tb = impute_replicate(&fb, &plan, 0, 1).unwrap();
    for (ra, rb) in ta.rows.iter().zip(&tb.rows) {
        assert_eq!(ra.y, rb.y);
        assert_eq!(ra.t, rb.t);
        assert_eq!(ra.x, rb.x);
        assert_ne!(ra.t_obs, rb.t_obs);
    }
}

#[test]
fn engine_output_identical_across_thread_counts() {
    let factory = UrnFactory {
        spec: small_spec(EssMode::ObservedCount),
        x: vec![vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.0]],
    };
    let mk_plan = |threads| ResamplingPlan {
        n_observed: 6,
        horizon: 306,
        replicates: 30,
        master_seed: 77,
        threads,
    };
    let a = run_predictive_resampling(&factory, &mk_plan(Some(1)), &[Estimand::Ate], "urn").unwrap();
    let b = run_predictive_resampling(&factory, &mk_plan(Some(4)), &[Estimand::Ate], "urn").unwrap();
    assert_eq!(
        serde_json::to_string(&a).unwrap(),
        serde_json::to_string(&b).unwrap()
    );
}

#[test]
fn sequential_urn_matches_closed_form_smoke() {
    // Modest-size version of the posterior-equivalence check; the full-size
    // run lives in the acceptance suite.
    let spec = small_spec(EssMode::ObservedCount);
    let factory = UrnFactory {
        spec: spec.clone(),
        x: vec![vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.0]],
    };
    let plan = ResamplingPlan {
        n_observed: 6,
        horizon: 2006,
        replicates: 400,
        master_seed: 101,
        threads: None,
    };
    let seq = run_predictive_resampling(&factory, &plan, &[Estimand::Ate], "urn").unwrap();
    let direct = ipw_direct_ate_draws(&spec, 400, 202).unwrap();
    let (_, p) = ks_two_sample(&seq[0].draws, &direct);
    assert!(p > 0.01, "KS p = {p}");
}

#[test]
fn truncation_horizon_is_stable() {
    let spec = small_spec(EssMode::ObservedCount);
    let factory = UrnFactory {
        spec,
        x: vec![vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.0]],
    };
    let run = |m: usize, seed: u64| {
        let plan = ResamplingPlan {
            n_observed: 6,
            horizon: 6 + m,
            replicates: 300,
            master_seed: seed,
            threads: None,
        };
        run_predictive_resampling(&factory, &plan, &[Estimand::Ate], "urn").unwrap()[0].clone()
    };
    let short = run(5_000, 1);
    let long = run(20_000, 2);
    let se = (short.sd * short.sd / 300.0 + long.sd * long.sd / 300.0).sqrt();
    assert!(
        (short.mean - long.mean).abs() < 4.0 * se,
        "means {} vs {} (se {se})",
        short.mean,
        long.mean
    );
    assert!((short.sd - long.sd).abs() / long.sd < 0.25);
}

#[test]
fn empty_arm_at_tiny_horizon_is_resampled_once() {
    // Horizon of 1 imputed row always leaves one arm empty, so the retry
    // also fails and the error surfaces.
    let factory = ConstantFactory {
        x: vec![vec![0.0]],
        c: 1.0,
    };
    let plan = ResamplingPlan {
        n_observed: 1,
        horizon: 2,
        replicates: 3,
        master_seed: 4,
        threads: None,
    };
    assert!(run_predictive_resampling(&factory, &plan, &[Estimand::Ate], "c").is_err());
}

// -- composite exact c.i.d. check ------------------------------------------

/// Exact composite predictive over z = (x index, t, y index) for a 3-unit
/// dataset: Bayesian-bootstrap covariates, fair-coin treatment, per-arm urn
/// outcomes. Verifies E[P_{k+1}(z) | G_k] = P_k(z) in rational arithmetic.
#[test]
fn composite_kernel_is_exactly_cid() {
    type Q = BigRational;
    fn q(n: i64, d: i64) -> Q {
        Q::new(BigInt::from(n), BigInt::from(d))
    }

    #[derive(Clone)]
    struct Composite {
        x_counts: [i64; 3],
        // urn mass per (arm, y atom); y atoms shared with x indices here.
        urn: [[Q; 3]; 2],
    }
    impl Composite {
        fn prob(&self, z: (usize, usize, usize)) -> Q {
            let (xi, t, yi) = z;
            let xt: i64 = self.x_counts.iter().sum();
            let px = q(self.x_counts[xi], xt);
            let ut: Q = self.urn[t].iter().cloned().sum();
            let py = self.urn[t][yi].clone() / ut;
            px * q(1, 2) * py
        }
        fn update(&mut self, z: (usize, usize, usize)) {
            self.x_counts[z.0] += 1;
            self.urn[z.1][z.2] += q(1, 1);
        }
    }

    let base = Composite {
        x_counts: [1, 1, 1],
        urn: [
            [q(3, 2), q(1, 2), q(1, 1)],
            [q(1, 1), q(2, 1), q(1, 2)],
        ],
    };

    let atoms: Vec<(usize, usize, usize)> = (0..3)
        .flat_map(|x| (0..2).flat_map(move |t| (0..3).map(move |y| (x, t, y))))
        .collect();

    // Two levels deep: check at the base state and at every one-step state.
    let mut states = vec![base.clone()];
    for &z in &atoms {
        let mut s = base.clone();
        s.update(z);
        states.push(s);
    }
    for s in &states {
        for &target in &atoms {
            let mut expected = Q::zero();
            for &d in &atoms {
                let pd = s.prob(d);
                if pd.is_zero() {
                    continue;
                }
                let mut next = s.clone();
                next.update(d);
                expected += pd * next.prob(target);
            }
            let resid = (expected - s.prob(target)).abs();
            assert!(resid.is_zero(), "residual {resid} at {target:?}");
        }
    }
}

// -- direct BART functional -------------------------------------------------

#[test]
fn bart_functional_validates_shapes() {
    use crate::trees::{BartConfig, EnsembleDraw, McmcSettings, Scaling, Tree};
    let model = BartModel {
        config: BartConfig::default(),
        mcmc: McmcSettings::default(),
        link: Link::Identity,
        scaling: Scaling {
            offset: 0.0,
            scale: 1.0,
        },
        n_features: 2,
        sigma_mu: 0.1,
        draws: vec![EnsembleDraw {
            trees: vec![Tree::new_leaf(1.5)],
            sigma: 1.0,
        }],
        seed_note: String::new(),
    };
    // 1 covariate column + treatment = 2 features: ok.
    let f = BartPosteriorFunctional::new(&model, &[vec![0.0, 1.0]], None).unwrap();
    // A constant tree has zero treatment effect everywhere.
    assert!(f.diff[0].iter().all(|&d| d == 0.0));
    let draws = f.ate_draws(50, 7);
    assert!(draws.iter().all(|&d| d == 0.0));
    // Wrong column count is rejected.
    assert!(BartPosteriorFunctional::new(&model, &[vec![0.0], vec![1.0]], None).is_err());
}

#[test]
fn bart_functional_recovers_known_effect() {
    use crate::trees::{BartConfig, EnsembleDraw, McmcSettings, Scaling, Tree, ROOT};
    // Single tree splitting on the treatment column: effect exactly 2.
    let mut tree = Tree::new_leaf(0.0);
    let (l, r) = tree.grow(ROOT, 0, 0.5);
    tree.set_leaf_value(l, 1.0); // t = 0
    tree.set_leaf_value(r, 3.0); // t = 1
    let model = BartModel {
        config: BartConfig::default(),
        mcmc: McmcSettings::default(),
        link: Link::Identity,
        scaling: Scaling {
            offset: 0.0,
            scale: 1.0,
        },
        n_features: 2,
        sigma_mu: 0.1,
        draws: vec![EnsembleDraw {
            trees: vec![tree],
            sigma: 0.5,
        }],
        seed_note: String::new(),
    };
    let f = BartPosteriorFunctional::new(&model, &[vec![0.0, 1.0, 2.0]], None).unwrap();
    let draws = f.ate_draws(100, 3);
    assert!(draws.iter().all(|&d| (d - 2.0).abs() < 1e-12));

    // CATE over the covariate grid: every cell has the same effect.
    let cells = f
        .cate_draws(&[0.0, 1.0, 2.0], &[0.0, 1.0, 2.0], 50, 3)
        .unwrap();
    for (_, ds) in cells {
        assert!(ds.iter().all(|&d| (d - 2.0).abs() < 1e-12));
    }
}
