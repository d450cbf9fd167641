//! Load the bundled birthweight excerpt, apply the eligibility filters and
//! the treatment recode from the schema, and print per-arm summaries.
//!
//!     cargo run --release --example ingest_and_summarize

use trialcast::data::{ingest_csv, summarize, CovariateSchema};

fn main() -> trialcast::Result<()> {
    let schema = CovariateSchema::from_json_file("config/application.json")?;
    let ds = ingest_csv("data/application.csv", &schema)?;
    let s = summarize(&ds);

    println!(
        "eligible units: {} ({} treated, {} control)",
        s.n, s.n_treated, s.n_control
    );
    println!(
        "outcome mean ({}): {:.1} overall, {:.1} treated, {:.1} control",
        ds.schema.outcome_units, s.mean_outcome, s.mean_outcome_treated, s.mean_outcome_control
    );
    println!("covariate means:");
    for (name, m) in &s.covariate_means {
        println!("  {name:10} {m:8.3}");
    }
    println!(
        "\nnaive arm-mean difference: {:.2} {} (confounded; see full_analysis)",
        s.mean_outcome_treated - s.mean_outcome_control,
        ds.schema.outcome_units
    );
    Ok(())
}
