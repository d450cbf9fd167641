//! Regenerates the bundled birthweight excerpt at `data/application.csv`.
//!
//! The file is a calibrated synthetic cohort with the same shape as the
//! public smoking-and-birthweight extract this analysis is modeled on:
//! singleton births with maternal/paternal demographics, the mother's
//! smoking status, and birthweight in grams. Eligibility for the analysis
//! is white non-Hispanic mothers (mrace = 1, mhisp = 0), exactly 3754 of
//! the 4642 rows. The generator is fully deterministic; running it again
//! reproduces the committed file byte for byte.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use trialcast::rng::derive_rng;

const TOTAL_ROWS: usize = 4642;
const ELIGIBLE_ROWS: usize = 3754;
const TARGET_WHOLE_FILE_MEAN: f64 = 3416.0;
const SEED: u64 = 0x5eed_b1e7;

fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

struct Row {
    bweight: f64,
    mbsmoke: u8,
    mage: f64,
    medu: f64,
    fage: f64,
    fedu: f64,
    mmarried: u8,
    foreign: u8,
    fbaby: u8,
    deadkids: u8,
    mrace: u8,
    mhisp: u8,
}

/// Cessation effect in grams by mother's age: upward trend with age.
fn effect(mage: f64) -> f64 {
    217.0 + 7.0 * (mage - 20.0)
}

/// Smoking propensity (before the cessation recode used at analysis time).
fn smoking_logit(mage: f64, medu: f64, mmarried: u8, deadkids: u8) -> f64 {
    -1.0 - 0.34 * (medu - 12.0) - 0.95 * mmarried as f64 + 0.65 * deadkids as f64
        - 0.06 * (mage - 26.0)
}

/// Birthweight regression absent the treatment effect.
fn baseline(mage: f64, medu: f64, mmarried: u8, fbaby: u8, deadkids: u8) -> f64 {
    12.0 * (medu - 12.5) + 55.0 * mmarried as f64 - 35.0 * fbaby as f64
        - 30.0 * deadkids as f64 - 1.1 * (mage - 27.0) * (mage - 27.0)
}

fn main() {
    let mut rng = derive_rng(SEED, 0);
    let noise = Normal::new(0.0, 430.0).unwrap();

    // Ethnicity labels with an exact eligible count, shuffled.
    let mut labels: Vec<(u8, u8)> = Vec::with_capacity(TOTAL_ROWS);
    labels.extend(std::iter::repeat((1u8, 0u8)).take(ELIGIBLE_ROWS));
    labels.extend(std::iter::repeat((2, 0)).take(500));
    labels.extend(std::iter::repeat((1, 1)).take(250));
    labels.extend(std::iter::repeat((2, 1)).take(TOTAL_ROWS - ELIGIBLE_ROWS - 750));
    labels.shuffle(&mut rng);

    let mut rows: Vec<Row> = labels
        .into_iter()
        .map(|(mrace, mhisp)| {
            let mage = (26.5 + 5.5 * normal(&mut rng)).round().clamp(16.0, 45.0);
            let medu = (12.5 + 2.0 * normal(&mut rng)).round().clamp(6.0, 17.0);
            let fage = (mage + 2.5 + 3.0 * normal(&mut rng)).round().clamp(16.0, 60.0);
            let fedu = (12.7 + 2.2 * normal(&mut rng)).round().clamp(6.0, 17.0);
            let mmarried = u8::from(rng.gen::<f64>() < 0.72);
            let foreign = u8::from(rng.gen::<f64>() < 0.05);
            let fbaby = u8::from(rng.gen::<f64>() < 0.44);
            let deadkids = u8::from(rng.gen::<f64>() < 0.25);

            let p_smoke = logistic(smoking_logit(mage, medu, mmarried, deadkids));
            let mbsmoke = u8::from(rng.gen::<f64>() < p_smoke);
            // The analysis treatment is cessation: t = 1 - mbsmoke.
            let t = 1.0 - mbsmoke as f64;
            let bweight = baseline(mage, medu, mmarried, fbaby, deadkids)
                + effect(mage) * t
                + noise.sample(&mut rng);
            Row {
                bweight,
                mbsmoke,
                mage,
                medu,
                fage,
                fedu,
                mmarried,
                foreign,
                fbaby,
                deadkids,
                mrace,
                mhisp,
            }
        })
        .collect();

    // Center the whole file on the target mean, then round to whole grams.
    let mean: f64 = rows.iter().map(|r| r.bweight).sum::<f64>() / rows.len() as f64;
    let shift = TARGET_WHOLE_FILE_MEAN - mean;
    for r in &mut rows {
        r.bweight = (r.bweight + shift).round();
    }

    let mut out = String::from(
        "bweight,mbsmoke,mage,medu,fage,fedu,mmarried,foreign,fbaby,deadkids,mrace,mhisp\n",
    );
    for r in &rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{}\n",
            r.bweight,
            r.mbsmoke,
            r.mage,
            r.medu,
            r.fage,
            r.fedu,
            r.mmarried,
            r.foreign,
            r.fbaby,
            r.deadkids,
            r.mrace,
            r.mhisp
        ));
    }
    std::fs::create_dir_all("data").expect("create data dir");
    std::fs::write("data/application.csv", out).expect("write csv");

    let eligible = rows.iter().filter(|r| r.mrace == 1 && r.mhisp == 0).count();
    let whole_mean: f64 = rows.iter().map(|r| r.bweight).sum::<f64>() / rows.len() as f64;
    let smokers = rows.iter().filter(|r| r.mbsmoke == 1).count();
    println!(
        "wrote data/application.csv: {} rows, {} eligible, whole-file mean {:.2} g, {} smokers",
        rows.len(),
        eligible,
        whole_mean,
        smokers
    );
}

fn normal<R: Rng>(rng: &mut R) -> f64 {
    rand_distr::StandardNormal.sample(rng)
}
