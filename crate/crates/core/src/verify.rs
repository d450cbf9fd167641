//! Independent oracles: exact identification on discrete synthetic worlds,
//! rational-arithmetic martingale checks for the urn kernels, and the
//! posterior contraction experiment.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, Zero};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ipw::{self, EssMode};
use crate::rng::derive_rng;
use crate::stats;

// ---------------------------------------------------------------------------
// Discrete worlds and identification oracles
// ---------------------------------------------------------------------------

/// A fully enumerable observational world on finite supports. A single
/// outcome table serves both regimes, so modularity holds by construction;
/// the trial assignment is Bernoulli(0.5).
#[derive(Debug, Clone)]
pub struct DiscreteWorld {
    /// P(X = x | O) over the covariate support.
    pub x_probs: Vec<f64>,
    /// P(T = 1 | x, O) per covariate point.
    pub propensity: Vec<f64>,
    /// P(T^O = 1 | x, O) per covariate point. In the observational regime
    /// this coincides with `propensity`; it is kept separate so negative
    /// controls can break the link deliberately.
    pub natural_assignment: Vec<f64>,
    /// Finite outcome support.
    pub y_support: Vec<f64>,
    /// outcome_probs[t][x][j] = P(Y = y_j | T = t, X = x, O).
    pub outcome_probs: [Vec<Vec<f64>>; 2],
}

impl DiscreteWorld {
    pub fn validate(&self) -> Result<()> {
        let nx = self.x_probs.len();
        let check_norm = |p: &[f64], what: &str| -> Result<()> {
            let s: f64 = p.iter().sum();
            if (s - 1.0).abs() > 1e-12 || p.iter().any(|&v| v < 0.0) {
                return Err(Error::Domain(format!("{what} not a distribution")));
            }
            Ok(())
        };
        check_norm(&self.x_probs, "x_probs")?;
        for t in 0..2 {
            if self.outcome_probs[t].len() != nx {
                return Err(Error::Input("outcome table shape mismatch".into()));
            }
            for x in 0..nx {
                check_norm(&self.outcome_probs[t][x], "outcome table")?;
            }
        }
        for &p in self.propensity.iter().chain(&self.natural_assignment) {
            if !(p > 0.0 && p < 1.0) {
                return Err(Error::Positivity(format!("table probability {p} on boundary")));
            }
        }
        Ok(())
    }

    /// E[Y | T = t, X = x, O].
    fn cond_mean(&self, t: usize, x: usize) -> f64 {
        self.outcome_probs[t][x]
            .iter()
            .zip(&self.y_support)
            .map(|(p, y)| p * y)
            .sum()
    }

    /// Draw one observational unit (y, t, x index).
    pub fn sample_observational<R: Rng>(&self, rng: &mut R) -> (f64, u8, usize) {
        let x = sample_categorical(&self.x_probs, rng);
        let t = u8::from(rng.gen::<f64>() < self.propensity[x]);
        let j = sample_categorical(&self.outcome_probs[t as usize][x], rng);
        (self.y_support[j], t, x)
    }
}

fn sample_categorical<R: Rng>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.len() - 1
}

/// ATE by exact g-formula summation:
/// sum_x (E[Y|1,x,O] - E[Y|0,x,O]) P(x|O).
pub fn gformula_ate(world: &DiscreteWorld) -> f64 {
    world
        .x_probs
        .iter()
        .enumerate()
        .map(|(x, px)| (world.cond_mean(1, x) - world.cond_mean(0, x)) * px)
        .sum()
}

/// Residual of the IPW identity E[TY/pi(X) | O] = E[Y | T=1, E], both sides
/// by exact summation. `pi_weight` is the propensity used inside the weight;
/// passing anything other than the world's true propensity is a deliberate
/// misspecification (negative control).
pub fn ipw_identity_residual(world: &DiscreteWorld, pi_weight: &[f64]) -> f64 {
    let mut lhs = 0.0;
    let mut rhs = 0.0;
    for (x, px) in world.x_probs.iter().enumerate() {
        // E[TY/w(X)|O] summed over x: P(x) * pi(x) * E[Y|1,x] / w(x).
        lhs += px * world.propensity[x] * world.cond_mean(1, x) / pi_weight[x];
        rhs += px * world.cond_mean(1, x);
    }
    (lhs - rhs).abs()
}

pub fn ipw_identity_check(world: &DiscreteWorld) -> f64 {
    ipw_identity_residual(world, &world.propensity)
}

/// Joint probability table P(Y = y_j, T = t, T^O = s, X = x | E) built from
/// the extended g-formula factorization, with an explicit outcome table so
/// negative controls can break modularity.
fn trial_joint(world: &DiscreteWorld, outcome_probs: &[Vec<Vec<f64>>; 2]) -> Vec<f64> {
    let nx = world.x_probs.len();
    let ny = world.y_support.len();
    let mut joint = vec![0.0; ny * 2 * 2 * nx];
    for x in 0..nx {
        for s in 0..2 {
            let ps = if s == 1 {
                world.natural_assignment[x]
            } else {
                1.0 - world.natural_assignment[x]
            };
            for t in 0..2 {
                for j in 0..ny {
                    let p = outcome_probs[t][x][j] * 0.5 * ps * world.x_probs[x];
                    joint[((j * 2 + t) * 2 + s) * nx + x] = p;
                }
            }
        }
    }
    joint
}

/// Residual comparing the intention-to-treat identification formula
/// (Corollary route) against direct conditioning in the full trial joint.
/// `trial_outcome_probs` defaults to the world's table; passing a different
/// table breaks modularity on purpose.
pub fn att_identification_residual(
    world: &DiscreteWorld,
    trial_outcome_probs: &[Vec<Vec<f64>>; 2],
) -> f64 {
    let nx = world.x_probs.len();
    let ny = world.y_support.len();
    let joint = trial_joint(world, trial_outcome_probs);

    let mut worst: f64 = 0.0;
    for t in 0..2 {
        // Direct route: E[Y | T=t, T^O=1, E] from the joint table.
        let mut num = 0.0;
        let mut den = 0.0;
        for j in 0..ny {
            for x in 0..nx {
                let p = joint[((j * 2 + t) * 2 + 1) * nx + x];
                num += p * world.y_support[j];
                den += p;
            }
        }
        let direct = num / den;

        // Identification route: sum_x E[Y|t,x,O] P(x | T^O=1, O).
        let norm: f64 = world
            .x_probs
            .iter()
            .zip(&world.natural_assignment)
            .map(|(px, rho)| px * rho)
            .sum();
        let formula: f64 = world
            .x_probs
            .iter()
            .zip(&world.natural_assignment)
            .enumerate()
            .map(|(x, (px, rho))| world.cond_mean(t, x) * px * rho / norm)
            .sum();
        worst = worst.max((direct - formula).abs());
    }
    worst
}

pub fn att_identification_check(world: &DiscreteWorld) -> f64 {
    att_identification_residual(world, &world.outcome_probs)
}

/// Random valid world within enumeration-friendly bounds:
/// |X| <= 5, |Y| <= 4, all table probabilities in [0.1, 0.9].
pub fn random_world<R: Rng>(rng: &mut R) -> DiscreteWorld {
    let nx = rng.gen_range(2..=5);
    let ny = rng.gen_range(2..=4);
    let x_probs = random_simplex(nx, rng);
    let propensity: Vec<f64> = (0..nx).map(|_| rng.gen_range(0.1..0.9)).collect();
    let natural_assignment: Vec<f64> = (0..nx).map(|_| rng.gen_range(0.1..0.9)).collect();
    let y_support: Vec<f64> = (0..ny).map(|_| rng.gen_range(-5.0..5.0)).collect();
    let outcome_probs = [
        (0..nx).map(|_| random_simplex(ny, rng)).collect(),
        (0..nx).map(|_| random_simplex(ny, rng)).collect(),
    ];
    DiscreteWorld {
        x_probs,
        propensity,
        natural_assignment,
        y_support,
        outcome_probs,
    }
}

fn random_simplex<R: Rng>(k: usize, rng: &mut R) -> Vec<f64> {
    // Floor at 0.05 so every cell keeps strictly positive mass.
    let raw: Vec<f64> = (0..k).map(|_| rng.gen_range(0.05..1.0)).collect();
    let s: f64 = raw.iter().sum();
    raw.into_iter().map(|v| v / s).collect()
}

// ---------------------------------------------------------------------------
// Exact c.i.d. checks in rational arithmetic
// ---------------------------------------------------------------------------

pub type Rational = BigRational;

pub fn ratio(num: i64, den: i64) -> Rational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

/// A one-step-ahead predictive over an enumerable atom set, exposing exact
/// probabilities and the update applied after observing an atom.
pub trait ExactKernel: Clone {
    fn n_atoms(&self) -> usize;
    fn prob(&self, atom: usize) -> Rational;
    fn update(&mut self, atom: usize);
}

/// Bayesian bootstrap urn: predictive is the empirical measure of everything
/// seen so far; each observation adds unit mass to its atom.
#[derive(Debug, Clone)]
pub struct ExactBayesianBootstrap {
    counts: Vec<u64>,
    total: u64,
}

impl ExactBayesianBootstrap {
    pub fn new(initial_counts: Vec<u64>) -> Self {
        let total = initial_counts.iter().sum();
        assert!(total > 0);
        ExactBayesianBootstrap {
            counts: initial_counts,
            total,
        }
    }
}

impl ExactKernel for ExactBayesianBootstrap {
    fn n_atoms(&self) -> usize {
        self.counts.len()
    }
    fn prob(&self, atom: usize) -> Rational {
        BigRational::new(BigInt::from(self.counts[atom]), BigInt::from(self.total))
    }
    fn update(&mut self, atom: usize) {
        self.counts[atom] += 1;
        self.total += 1;
    }
}

/// Polya urn with rational initial masses (ess * Hajek weight per atom);
/// every observation adds unit mass.
#[derive(Debug, Clone)]
pub struct ExactPolyaUrn {
    init_mass: Vec<Rational>,
    extra: Vec<u64>,
}

impl ExactPolyaUrn {
    pub fn new(init_mass: Vec<Rational>) -> Self {
        assert!(init_mass.iter().any(|m| m > &Rational::zero()));
        let extra = vec![0; init_mass.len()];
        ExactPolyaUrn { init_mass, extra }
    }
}

impl ExactKernel for ExactPolyaUrn {
    fn n_atoms(&self) -> usize {
        self.init_mass.len()
    }
    fn prob(&self, atom: usize) -> Rational {
        let total: Rational = self
            .init_mass
            .iter()
            .cloned()
            .sum::<Rational>()
            + BigRational::from(BigInt::from(self.extra.iter().sum::<u64>()));
        let mass = self.init_mass[atom].clone() + BigRational::from(BigInt::from(self.extra[atom]));
        mass / total
    }
    fn update(&mut self, atom: usize) {
        self.extra[atom] += 1;
    }
}

/// Deliberately non-martingale kernel: after each observation the predictive
/// drifts half its mass onto atom 0 regardless of what was drawn, so the
/// one-step conditional-mean identity fails unless all mass already sits
/// on atom 0. (Moving mass onto the *drawn* atom would still be a
/// martingale -- that is just an urn.)
#[derive(Debug, Clone)]
pub struct DriftingKernel {
    probs: Vec<Rational>,
}

impl DriftingKernel {
    pub fn uniform(n: usize) -> Self {
        DriftingKernel {
            probs: vec![ratio(1, n as i64); n],
        }
    }
}

impl ExactKernel for DriftingKernel {
    fn n_atoms(&self) -> usize {
        self.probs.len()
    }
    fn prob(&self, atom: usize) -> Rational {
        self.probs[atom].clone()
    }
    fn update(&mut self, _atom: usize) {
        let keep = ratio(1, 2);
        for p in &mut self.probs {
            *p *= keep.clone();
        }
        self.probs[0] += ratio(1, 2);
    }
}

/// Result of an exact martingale check: whether every one-step condition
/// held exactly, and the worst residual observed.
#[derive(Debug, Clone)]
pub struct CidCheck {
    pub holds: bool,
    pub worst_residual: Rational,
}

/// Verify E[P_k(a) | G_{k-1}] = P_{k-1}(a) for every atom a, recursively
/// over all histories of the given depth, in exact rational arithmetic.
pub fn cid_exact_check<K: ExactKernel>(kernel: &K, steps: usize) -> CidCheck {
    let mut worst = Rational::zero();
    check_recursive(kernel, steps, &mut worst);
    CidCheck {
        holds: worst.is_zero(),
        worst_residual: worst,
    }
}

fn check_recursive<K: ExactKernel>(kernel: &K, steps: usize, worst: &mut Rational) {
    if steps == 0 {
        return;
    }
    let n = kernel.n_atoms();
    for target in 0..n {
        // E[P_k(target)] = sum over next draws d of P_{k-1}(d) * P_k^{(d)}(target)
        let mut expected = Rational::zero();
        for d in 0..n {
            let p_d = kernel.prob(d);
            if p_d.is_zero() {
                continue;
            }
            let mut next = kernel.clone();
            next.update(d);
            expected += p_d * next.prob(target);
        }
        let residual = (expected - kernel.prob(target)).abs();
        if residual > *worst {
            *worst = residual;
        }
    }
    for d in 0..n {
        if kernel.prob(d).is_zero() {
            continue;
        }
        let mut next = kernel.clone();
        next.update(d);
        check_recursive(&next, steps - 1, worst);
    }
}

// ---------------------------------------------------------------------------
// Contraction experiment (Theorem-style rate check with known propensity)
// ---------------------------------------------------------------------------

/// Continuous data-generating process with known propensity:
/// X ~ U(0,1), pi(x) = 0.2 + 0.6 x, Y = 1 + 2x + tau * t + N(0,1).
#[derive(Debug, Clone, Copy)]
pub struct ContinuousDgp {
    pub tau: f64,
}

impl ContinuousDgp {
    pub fn true_ate(&self) -> f64 {
        self.tau
    }

    pub fn sample<R: Rng>(&self, n: usize, rng: &mut R) -> (Vec<f64>, Vec<u8>, Vec<f64>) {
        let noise = Normal::new(0.0, 1.0).unwrap();
        let mut y = Vec::with_capacity(n);
        let mut t = Vec::with_capacity(n);
        let mut pi = Vec::with_capacity(n);
        for _ in 0..n {
            let x: f64 = rng.gen();
            let p = 0.2 + 0.6 * x;
            let ti = u8::from(rng.gen::<f64>() < p);
            y.push(1.0 + 2.0 * x + self.tau * ti as f64 + noise.sample(rng));
            t.push(ti);
            pi.push(p);
        }
        (y, t, pi)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ContractionRow {
    pub n: usize,
    pub mode: EssMode,
    pub mean_abs_error: f64,
    pub mean_posterior_sd: f64,
}

/// For each n: simulate `reps` datasets, compute the closed-form IPW
/// posterior with the true propensity, and record the error of the posterior
/// mean and the analytic posterior sd.
pub fn contraction_experiment(
    dgp: &ContinuousDgp,
    n_grid: &[usize],
    reps_per_n: usize,
    mode: EssMode,
    master_seed: u64,
) -> Vec<ContractionRow> {
    let theta0 = dgp.true_ate();
    n_grid
        .iter()
        .enumerate()
        .map(|(gi, &n)| {
            let mut abs_err = 0.0;
            let mut post_sd = 0.0;
            let mut done = 0usize;
            for rep in 0..reps_per_n {
                let mut rng = derive_rng(master_seed, (gi as u64) << 32 | rep as u64);
                let (y, t, pi) = dgp.sample(n, &mut rng);
                let w = match ipw::hajek_weights(&t, &pi) {
                    Ok(w) => w.with_ess(&t, mode),
                    Err(_) => continue, // single-arm sample at tiny n
                };
                let spec = ipw::DirichletPosteriorSpec::from_weights(&y, &w).unwrap();
                abs_err += (ipw::posterior_mean_analytic(&spec) - theta0).abs();
                post_sd += (ipw::posterior_variance_analytic(&spec, 1)
                    + ipw::posterior_variance_analytic(&spec, 0))
                .sqrt();
                done += 1;
            }
            ContractionRow {
                n,
                mode,
                mean_abs_error: abs_err / done as f64,
                mean_posterior_sd: post_sd / done as f64,
            }
        })
        .collect()
}

/// Least-squares slope of log(sd) on log(n); the theoretical rate is -1/2.
pub fn rate_exponent(rows: &[ContractionRow]) -> f64 {
    let xs: Vec<f64> = rows.iter().map(|r| (r.n as f64).ln()).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.mean_posterior_sd.ln()).collect();
    let mx = stats::mean(&xs);
    let my = stats::mean(&ys);
    let num: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let den: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    num / den
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::derive_rng;

    fn two_point_world() -> DiscreteWorld {
        // Hand-built tables on |X| = 2, |Y| = 2.
        DiscreteWorld {
            x_probs: vec![0.4, 0.6],
            propensity: vec![0.3, 0.7],
            natural_assignment: vec![0.3, 0.7],
            y_support: vec![0.0, 10.0],
            outcome_probs: [
                vec![vec![0.8, 0.2], vec![0.5, 0.5]], // t = 0
                vec![vec![0.4, 0.6], vec![0.1, 0.9]], // t = 1
            ],
        }
    }

    #[test]
    fn gformula_hand_summed() {
        let w = two_point_world();
        w.validate().unwrap();
        // E[Y|1,x0]=6, E[Y|0,x0]=2, E[Y|1,x1]=9, E[Y|0,x1]=5
        // ATE = 0.4*(6-2) + 0.6*(9-5) = 4.0
        assert!((gformula_ate(&w) - 4.0).abs() < 1e-14);
    }

    #[test]
    fn gformula_null_effect() {
        let mut w = two_point_world();
        w.outcome_probs[1] = w.outcome_probs[0].clone();
        assert!(gformula_ate(&w).abs() < 1e-14);
    }

    #[test]
    fn ipw_identity_exact_and_negative_control() {
        let w = two_point_world();
        assert!(ipw_identity_check(&w) < 1e-12);
        // constant pi = 0.5 world
        let mut wc = two_point_world();
        wc.propensity = vec![0.5, 0.5];
        assert!(ipw_identity_check(&wc) < 1e-12);
        // wrong pi in the weight must be detected
        assert!(ipw_identity_residual(&w, &[0.5, 0.5]) > 1e-6);
    }

    #[test]
    fn att_identity_exact_and_negative_control() {
        let w = two_point_world();
        assert!(att_identification_check(&w) < 1e-12);
        // Constant natural assignment: ATT equals ATE.
        let mut wc = two_point_world();
        wc.natural_assignment = vec![0.4, 0.4];
        assert!(att_identification_check(&wc) < 1e-12);
        // Broken modularity: trial side uses a different outcome table.
        let broken = [w.outcome_probs[1].clone(), w.outcome_probs[0].clone()];
        assert!(att_identification_residual(&w, &broken) > 1e-6);
    }

    #[test]
    fn random_worlds_pass_all_identities() {
        let mut rng = derive_rng(1234, 0);
        for _ in 0..100 {
            let w = random_world(&mut rng);
            w.validate().unwrap();
            assert!(ipw_identity_check(&w) < 1e-12);
            assert!(att_identification_check(&w) < 1e-12);
        }
    }

    #[test]
    fn gformula_matches_monte_carlo_closed_form_posterior() {
        // Simulate observational data from the world and check the IPW
        // closed-form posterior mean (true propensity) against the exact
        // g-formula ATE within 3 standard errors.
        let w = two_point_world();
        let truth = gformula_ate(&w);
        let mut rng = derive_rng(88, 0);
        let n = 20_000;
        let mut y = Vec::new();
        let mut t = Vec::new();
        let mut pi = Vec::new();
        for _ in 0..n {
            let (yi, ti, xi) = w.sample_observational(&mut rng);
            y.push(yi);
            t.push(ti);
            pi.push(w.propensity[xi]);
        }
        let weights = ipw::hajek_weights(&t, &pi)
            .unwrap()
            .with_ess(&t, EssMode::ImportanceSampling);
        let spec = ipw::DirichletPosteriorSpec::from_weights(&y, &weights).unwrap();
        let est = ipw::posterior_mean_analytic(&spec);
        let se = (ipw::posterior_variance_analytic(&spec, 1)
            + ipw::posterior_variance_analytic(&spec, 0))
        .sqrt();
        assert!((est - truth).abs() < 3.0 * se, "est {est} truth {truth} se {se}");
    }

    #[test]
    fn bayesian_bootstrap_exactly_cid() {
        let k = ExactBayesianBootstrap::new(vec![1, 1, 1]);
        let check = cid_exact_check(&k, 2);
        assert!(check.holds);
        assert!(check.worst_residual.is_zero());
    }

    #[test]
    fn polya_urn_exactly_cid() {
        // Rational Hajek-style masses.
        let k = ExactPolyaUrn::new(vec![ratio(3, 5), ratio(9, 10), ratio(1, 2)]);
        let check = cid_exact_check(&k, 2);
        assert!(check.holds);
    }

    #[test]
    fn drifting_kernel_detected() {
        let k = DriftingKernel::uniform(3);
        let check = cid_exact_check(&k, 1);
        assert!(!check.holds);
        assert!(check.worst_residual > Rational::zero());
    }

    #[test]
    fn contraction_rate_near_half() {
        let dgp = ContinuousDgp { tau: 1.0 };
        let grid = [250, 1000, 4000];
        for mode in [EssMode::ObservedCount, EssMode::ImportanceSampling] {
            let rows = contraction_experiment(&dgp, &grid, 200, mode, 2024);
            for pair in rows.windows(2) {
                let ratio = pair[1].mean_posterior_sd / pair[0].mean_posterior_sd;
                assert!(
                    (0.40..=0.62).contains(&ratio),
                    "mode {mode:?}: sd ratio {ratio}"
                );
            }
            let slope = rate_exponent(&rows);
            assert!((slope + 0.5).abs() < 0.1, "mode {mode:?}: slope {slope}");
        }
    }

    #[test]
    fn contraction_deterministic() {
        let dgp = ContinuousDgp { tau: 1.0 };
        let a = contraction_experiment(&dgp, &[250, 1000], 50, EssMode::ObservedCount, 7);
        let b = contraction_experiment(&dgp, &[250, 1000], 50, EssMode::ObservedCount, 7);
        for (ra, rb) in a.iter().zip(&b) {
            assert_eq!(ra.mean_abs_error, rb.mean_abs_error);
            assert_eq!(ra.mean_posterior_sd, rb.mean_posterior_sd);
        }
    }

    #[test]
    fn posterior_mean_unbiased_at_large_n() {
        let dgp = ContinuousDgp { tau: 1.0 };
        let rows = contraction_experiment(&dgp, &[4000], 200, EssMode::ObservedCount, 99);
        // Hajek bias is O(1/n); mean abs error should track the posterior sd scale.
        assert!(rows[0].mean_abs_error < 3.0 * rows[0].mean_posterior_sd);
    }
}
