//! Posterior contraction under a known-propensity data-generating process:
//! as n grows the closed-form weighted posterior should shrink at the
//! root-n rate (doubling n twice should halve the spread each time).
//!
//!     cargo run --release --example contraction_experiment

use trialcast::ipw::EssMode;
use trialcast::verify::{contraction_experiment, rate_exponent, ContinuousDgp};

fn main() {
    let dgp = ContinuousDgp { tau: 2.0 };
    let grid = [250, 500, 1000, 2000, 4000, 8000];
    for mode in [EssMode::ObservedCount, EssMode::ImportanceSampling] {
        let rows = contraction_experiment(&dgp, &grid, 400, mode, 99);
        println!("{mode:?}:");
        println!("  {:>6} {:>14} {:>14}", "n", "mean |error|", "posterior sd");
        for r in &rows {
            println!("  {:>6} {:>14.4} {:>14.4}", r.n, r.mean_abs_error, r.mean_posterior_sd);
        }
        println!(
            "  fitted rate: sd ~ n^{:.3} (theory: n^-0.5)\n",
            rate_exponent(&rows)
        );
    }
}
