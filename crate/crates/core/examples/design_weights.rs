//! Design-stage model: fit propensities with the probit tree ensemble, form
//! the self-normalized inverse-propensity (Hajek) weights, and print the
//! closed-form posterior of the average treatment effect under both
//! effective-sample-size rules.
//!
//!     cargo run --release --example design_weights

use trialcast::data::{ingest_csv, positivity_report, CovariateSchema};
use trialcast::ipw::{
    clip_propensities, effective_sample_size, hajek_weights, posterior_mean_analytic,
    posterior_variance_analytic, DirichletPosteriorSpec, EssMode,
};
use trialcast::rng::derive_rng;
use trialcast::trees::{fit_probit, BartConfig, McmcSettings};

fn main() -> trialcast::Result<()> {
    let schema = CovariateSchema::from_json_file("config/application.json")?;
    let ds = ingest_csv("data/application.csv", &schema)?;

    let mut rng = derive_rng(7, 0);
    let mcmc = McmcSettings {
        burn_in: 500,
        draws: 500,
        thin: 1,
    };
    println!("fitting probit propensity model on {} units ...", ds.n());
    let (_, pi_raw) = fit_probit(&ds.x, &ds.t, &BartConfig::default(), &mcmc, &mut rng)?;
    let (pi_hat, clipped) = clip_propensities(&pi_raw);
    if clipped > 0 {
        println!("clipped {clipped} propensities away from the boundary");
    }

    let report = positivity_report(&ds, &pi_hat, 0.01)?;
    println!(
        "positivity: pi_hat in [{:.4}, {:.4}], {} units outside the 0.01 band",
        report.min_pi,
        report.max_pi,
        report.violations()
    );

    for mode in [EssMode::ObservedCount, EssMode::ImportanceSampling] {
        let w = hajek_weights(&ds.t, &pi_hat)?.with_ess(&ds.t, mode);
        let (e1, e0) = effective_sample_size(&w, &ds.t, mode);
        let spec = DirichletPosteriorSpec::from_weights(&ds.y, &w)?;
        let mean = posterior_mean_analytic(&spec);
        let sd = (posterior_variance_analytic(&spec, 1) + posterior_variance_analytic(&spec, 0))
            .sqrt();
        println!(
            "{mode:?}: ESS = {:.1} + {:.1} = {:.1} of n = {}; posterior = {:.2} +- {:.2} {}",
            e1,
            e0,
            e1 + e0,
            ds.n(),
            mean,
            sd,
            ds.schema.outcome_units
        );
    }
    Ok(())
}
