//! Marginal prediction with inverse probability weighting: Hajek weights as
//! predictive probabilities, effective sample sizes, the Polya-urn update and
//! the closed-form Dirichlet martingale posterior with its analytic moments.

use rand::Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Propensities are clipped to this band before weighting; estimated models
/// can violate strict positivity numerically.
pub const PROPENSITY_CLIP: f64 = 1e-3;

/// Clip propensities into [PROPENSITY_CLIP, 1 - PROPENSITY_CLIP], returning
/// the clipped vector and the number of values touched.
pub fn clip_propensities(pi: &[f64]) -> (Vec<f64>, usize) {
    let mut clipped = 0usize;
    let out = pi
        .iter()
        .map(|&p| {
            let c = p.clamp(PROPENSITY_CLIP, 1.0 - PROPENSITY_CLIP);
            if c != p {
                clipped += 1;
            }
            c
        })
        .collect();
    (out, clipped)
}

/// Which effective-sample-size rule fills `ess1`/`ess0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EssMode {
    /// Arm counts: sum of 1(T_i = t).
    ObservedCount,
    /// 1 / sum of squared Hajek weights.
    ImportanceSampling,
}

/// Normalized per-arm inverse-propensity weights, plus effective sample
/// sizes once `with_ess` has been applied.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HajekWeightSet {
    pub lambda1: Vec<f64>,
    pub lambda0: Vec<f64>,
    pub ess_mode: Option<EssMode>,
    pub ess1: Option<f64>,
    pub ess0: Option<f64>,
}

impl HajekWeightSet {
    pub fn with_ess(mut self, t: &[u8], mode: EssMode) -> Self {
        let (e1, e0) = effective_sample_size(&self, t, mode);
        self.ess_mode = Some(mode);
        self.ess1 = Some(e1);
        self.ess0 = Some(e0);
        self
    }
}

/// Hajek weights: lambda_ti proportional to the arm-t inverse-propensity
/// weight, normalized to sum to one within each arm.
pub fn hajek_weights(t: &[u8], pi: &[f64]) -> Result<HajekWeightSet> {
    if t.len() != pi.len() {
        return Err(Error::Input(format!(
            "t length {} != pi length {}",
            t.len(),
            pi.len()
        )));
    }
    if t.is_empty() {
        return Err(Error::Input("empty input".into()));
    }
    for &p in pi {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::Domain(format!("propensity {p} outside (0,1)")));
        }
    }
    let n1 = t.iter().filter(|&&ti| ti == 1).count();
    if n1 == 0 || n1 == t.len() {
        return Err(Error::Positivity("single-arm input".into()));
    }

    let w1: Vec<f64> = t
        .iter()
        .zip(pi)
        .map(|(&ti, &p)| if ti == 1 { 1.0 / p } else { 0.0 })
        .collect();
    let w0: Vec<f64> = t
        .iter()
        .zip(pi)
        .map(|(&ti, &p)| if ti == 0 { 1.0 / (1.0 - p) } else { 0.0 })
        .collect();
    let s1: f64 = w1.iter().sum();
    let s0: f64 = w0.iter().sum();
    Ok(HajekWeightSet {
        lambda1: w1.into_iter().map(|w| w / s1).collect(),
        lambda0: w0.into_iter().map(|w| w / s0).collect(),
        ess_mode: None,
        ess1: None,
        ess0: None,
    })
}

/// Effective sample sizes (ess1, ess0) under the chosen rule.
pub fn effective_sample_size(w: &HajekWeightSet, t: &[u8], mode: EssMode) -> (f64, f64) {
    match mode {
        EssMode::ObservedCount => {
            let n1 = t.iter().filter(|&&ti| ti == 1).count() as f64;
            (n1, t.len() as f64 - n1)
        }
        EssMode::ImportanceSampling => {
            let s1: f64 = w.lambda1.iter().map(|l| l * l).sum();
            let s0: f64 = w.lambda0.iter().map(|l| l * l).sum();
            (1.0 / s1, 1.0 / s0)
        }
    }
}

/// Finite base measure for prior shrinkage towards a Dirichlet-process-style
/// prior: atoms with normalized weights, total prior mass `alpha`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ShrinkageBase {
    pub atoms: Vec<f64>,
    pub weights: Vec<f64>,
    pub alpha: f64,
}

/// Closed-form Dirichlet martingale posterior: per arm, weights over the
/// observed outcomes with concentrations ess_t * lambda_ti.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DirichletPosteriorSpec {
    pub atoms: Vec<f64>,
    pub concentration1: Vec<f64>,
    pub concentration0: Vec<f64>,
    pub shrink_base: Option<ShrinkageBase>,
}

impl DirichletPosteriorSpec {
    /// Build from outcomes and weights whose ESS fields are filled.
    pub fn from_weights(y: &[f64], w: &HajekWeightSet) -> Result<Self> {
        let (ess1, ess0) = match (w.ess1, w.ess0) {
            (Some(a), Some(b)) => (a, b),
            _ => {
                return Err(Error::Input(
                    "effective sample sizes not filled; call with_ess first".into(),
                ))
            }
        };
        if y.len() != w.lambda1.len() {
            return Err(Error::Input("outcome/weight length mismatch".into()));
        }
        Ok(DirichletPosteriorSpec {
            atoms: y.to_vec(),
            concentration1: w.lambda1.iter().map(|l| ess1 * l).collect(),
            concentration0: w.lambda0.iter().map(|l| ess0 * l).collect(),
            shrink_base: None,
        })
    }

    pub fn with_shrinkage(mut self, base: ShrinkageBase) -> Self {
        self.shrink_base = Some(base);
        self
    }

    /// Atoms and concentrations for one arm, with any shrinkage base folded
    /// in as extra atoms carrying alpha-scaled mass.
    fn arm_atoms(&self, arm: u8) -> (Vec<f64>, Vec<f64>) {
        let conc = if arm == 1 {
            &self.concentration1
        } else {
            &self.concentration0
        };
        let mut atoms = self.atoms.clone();
        let mut c = conc.clone();
        if let Some(base) = &self.shrink_base {
            if base.alpha > 0.0 {
                atoms.extend_from_slice(&base.atoms);
                c.extend(base.weights.iter().map(|w| base.alpha * w));
            }
        }
        (atoms, c)
    }

    fn validate_arm(&self, arm: u8) -> Result<()> {
        let (_, c) = self.arm_atoms(arm);
        if c.iter().any(|&v| v < 0.0) {
            return Err(Error::Domain("negative concentration".into()));
        }
        if !c.iter().any(|&v| v > 0.0) {
            return Err(Error::DegenerateArm(format!(
                "arm {arm} has all-zero concentration"
            )));
        }
        Ok(())
    }
}

/// One draw of the limiting predictive: per-arm weights over the atoms and
/// the treatment-effect functional theta = weighted mean difference.
#[derive(Debug, Clone)]
pub struct DirichletPosteriorDraw {
    pub weights1: Vec<f64>,
    pub weights0: Vec<f64>,
    pub atoms1: Vec<f64>,
    pub atoms0: Vec<f64>,
    pub theta: f64,
}

/// Sample Dirichlet weights by normalizing independent Gamma(c_i, 1)
/// variates; rand_distr's Gamma handles shapes below one by boosting, so
/// tiny concentrations do not underflow.
fn dirichlet_draw<R: Rng>(conc: &[f64], rng: &mut R) -> Vec<f64> {
    let mut g: Vec<f64> = conc
        .iter()
        .map(|&c| {
            if c == 0.0 {
                0.0
            } else {
                Gamma::new(c, 1.0).expect("valid gamma shape").sample(rng)
            }
        })
        .collect();
    let total: f64 = g.iter().sum();
    if total > 0.0 {
        for v in &mut g {
            *v /= total;
        }
    }
    g
}

pub fn dirichlet_posterior_draw<R: Rng>(
    spec: &DirichletPosteriorSpec,
    rng: &mut R,
) -> Result<DirichletPosteriorDraw> {
    spec.validate_arm(1)?;
    spec.validate_arm(0)?;
    let (atoms1, c1) = spec.arm_atoms(1);
    let (atoms0, c0) = spec.arm_atoms(0);
    let w1 = dirichlet_draw(&c1, rng);
    let w0 = dirichlet_draw(&c0, rng);
    let m1: f64 = w1.iter().zip(&atoms1).map(|(w, y)| w * y).sum();
    let m0: f64 = w0.iter().zip(&atoms0).map(|(w, y)| w * y).sum();
    Ok(DirichletPosteriorDraw {
        weights1: w1,
        weights0: w0,
        atoms1,
        atoms0,
        theta: m1 - m0,
    })
}

/// Analytic posterior mean of theta: the Hajek estimator
/// sum_i (lambda_1i - lambda_0i) y_i (Dirichlet mean = normalized
/// concentration).
pub fn posterior_mean_analytic(spec: &DirichletPosteriorSpec) -> f64 {
    let (atoms1, c1) = spec.arm_atoms(1);
    let (atoms0, c0) = spec.arm_atoms(0);
    arm_mean(&atoms1, &c1) - arm_mean(&atoms0, &c0)
}

fn arm_mean(atoms: &[f64], conc: &[f64]) -> f64 {
    let total: f64 = conc.iter().sum();
    atoms.iter().zip(conc).map(|(y, c)| y * c).sum::<f64>() / total
}

/// Analytic posterior variance of the arm mean:
/// (weighted second moment - weighted mean^2) / (ess + 1).
pub fn posterior_variance_analytic(spec: &DirichletPosteriorSpec, arm: u8) -> f64 {
    let (atoms, conc) = spec.arm_atoms(arm);
    let total: f64 = conc.iter().sum();
    let mean = arm_mean(&atoms, &conc);
    let second: f64 = atoms.iter().zip(&conc).map(|(y, c)| y * y * c).sum::<f64>() / total;
    (second - mean * mean) / (total + 1.0)
}

/// One arm of the Polya urn: initial atoms carry ess-scaled Hajek mass,
/// every imputed outcome adds unit mass, an optional base measure adds
/// alpha-scaled mass.
#[derive(Debug, Clone)]
struct UrnArm {
    atoms: Vec<f64>,
    /// Cumulative masses over `atoms` (initial + optional base), static.
    cum_mass: Vec<f64>,
    static_mass: f64,
    imputed: Vec<f64>,
}

impl UrnArm {
    fn new(atoms: Vec<f64>, masses: Vec<f64>) -> Result<Self> {
        let mut cum = Vec::with_capacity(masses.len());
        let mut total = 0.0;
        for m in &masses {
            if *m < 0.0 {
                return Err(Error::Domain("negative urn mass".into()));
            }
            total += m;
            cum.push(total);
        }
        if total <= 0.0 {
            return Err(Error::DegenerateArm("urn arm with zero total mass".into()));
        }
        Ok(UrnArm {
            atoms,
            cum_mass: cum,
            static_mass: total,
            imputed: Vec::new(),
        })
    }

    fn total_mass(&self) -> f64 {
        self.static_mass + self.imputed.len() as f64
    }

    fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        let u = rng.gen::<f64>() * self.total_mass();
        if u < self.static_mass {
            let idx = self.cum_mass.partition_point(|&c| c < u);
            self.atoms[idx.min(self.atoms.len() - 1)]
        } else {
            let idx = ((u - self.static_mass) as usize).min(self.imputed.len() - 1);
            self.imputed[idx]
        }
    }
}

/// Stateful two-arm Polya urn over outcome values.
#[derive(Debug, Clone)]
pub struct PolyaUrn {
    arm1: UrnArm,
    arm0: UrnArm,
}

impl PolyaUrn {
    pub fn new(spec: &DirichletPosteriorSpec) -> Result<Self> {
        spec.validate_arm(1)?;
        spec.validate_arm(0)?;
        let (a1, c1) = spec.arm_atoms(1);
        let (a0, c0) = spec.arm_atoms(0);
        Ok(PolyaUrn {
            arm1: UrnArm::new(a1, c1)?,
            arm0: UrnArm::new(a0, c0)?,
        })
    }

    /// Sample a new outcome from the current arm predictive and add it to
    /// that arm with unit mass.
    pub fn step<R: Rng>(&mut self, t_new: u8, rng: &mut R) -> f64 {
        let arm = if t_new == 1 { &mut self.arm1 } else { &mut self.arm0 };
        let y = arm.sample(rng);
        arm.imputed.push(y);
        y
    }

    /// Current predictive mass of an arm (ess + imputations + alpha).
    pub fn arm_mass(&self, arm: u8) -> f64 {
        if arm == 1 {
            self.arm1.total_mass()
        } else {
            self.arm0.total_mass()
        }
    }
}

/// Audit CSV for weights: index, t, pi, lambda1, lambda0.
pub fn weights_to_csv(t: &[u8], pi: &[f64], w: &HajekWeightSet) -> String {
    let mut out = String::from("index,t,pi,lambda1,lambda0\n");
    for i in 0..t.len() {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            i, t[i], pi[i], w.lambda1[i], w.lambda0[i]
        ));
    }
    out
}
