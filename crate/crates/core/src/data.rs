//! Ingestion of the observational study: eligibility filtering, treatment
//! recoding and a typed dataset with verified positivity.

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Optional recode applied to the raw treatment column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TreatmentRecode {
    /// t := 1 - raw. Used when the trial arm of interest is the complement
    /// of the recorded exposure (e.g. cessation vs. recorded smoking).
    Invert,
}

/// Column layout and eligibility rules for an observational CSV file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CovariateSchema {
    pub numeric_columns: Vec<String>,
    pub binary_columns: Vec<String>,
    pub treatment_column: String,
    pub outcome_column: String,
    #[serde(default)]
    pub outcome_units: String,
    /// (column, allowed values) pairs; a row survives iff every filter
    /// column takes one of its allowed values.
    #[serde(default)]
    pub eligibility_filters: Vec<(String, Vec<f64>)>,
    #[serde(default)]
    pub treatment_recode: Option<TreatmentRecode>,
}

impl CovariateSchema {
    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let schema: CovariateSchema = serde_json::from_str(&text)?;
        schema.validate()?;
        Ok(schema)
    }

    /// Covariate columns in dataset order (numeric first, then binary).
    pub fn covariate_columns(&self) -> Vec<&str> {
        self.numeric_columns
            .iter()
            .chain(self.binary_columns.iter())
            .map(|s| s.as_str())
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        for col in self.covariate_columns() {
            if col == self.treatment_column || col == self.outcome_column {
                return Err(Error::Input(format!(
                    "column `{col}` listed both as covariate and treatment/outcome"
                )));
            }
        }
        if self.treatment_column == self.outcome_column {
            return Err(Error::Input(
                "treatment and outcome columns must differ".into(),
            ));
        }
        Ok(())
    }

    /// Schema for re-ingesting a canonical emission of a dataset: same
    /// columns, no filters, no recode.
    pub fn canonical(&self) -> CovariateSchema {
        CovariateSchema {
            eligibility_filters: Vec::new(),
            treatment_recode: None,
            ..self.clone()
        }
    }
}

/// Eligible units z_i = (y_i, t_i, x_i) from an observational study.
#[derive(Debug, Clone)]
pub struct ObservationalDataset {
    pub y: Vec<f64>,
    pub t: Vec<u8>,
    /// Covariates stored column-major, in `schema.covariate_columns()` order.
    pub x: Vec<Vec<f64>>,
    pub schema: CovariateSchema,
}

impl ObservationalDataset {
    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn n_covariates(&self) -> usize {
        self.x.len()
    }

    pub fn n_treated(&self) -> usize {
        self.t.iter().filter(|&&t| t == 1).count()
    }

    pub fn n_control(&self) -> usize {
        self.n() - self.n_treated()
    }

    /// Covariate column by name.
    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.schema
            .covariate_columns()
            .iter()
            .position(|c| *c == name)
            .map(|j| self.x[j].as_slice())
    }

    fn check_invariants(&self) -> Result<()> {
        if self.y.is_empty() {
            return Err(Error::Positivity("dataset is empty after filtering".into()));
        }
        let n1 = self.n_treated();
        if n1 == 0 || n1 == self.n() {
            return Err(Error::Positivity(format!(
                "single-arm dataset: {n1} treated of {} units",
                self.n()
            )));
        }
        Ok(())
    }

    /// Canonical CSV emission: header `outcome,treatment,covariates...` using
    /// schema names, post-recode values, shortest-roundtrip float formatting.
    pub fn to_canonical_csv(&self) -> String {
        let mut out = String::new();
        out.push_str(&self.schema.outcome_column);
        out.push(',');
        out.push_str(&self.schema.treatment_column);
        for col in self.schema.covariate_columns() {
            out.push(',');
            out.push_str(col);
        }
        out.push('\n');
        for i in 0..self.n() {
            out.push_str(&format!("{}", self.y[i]));
            out.push_str(&format!(",{}", self.t[i]));
            for col in &self.x {
                out.push_str(&format!(",{}", col[i]));
            }
            out.push('\n');
        }
        out
    }
}

/// Ingest a CSV file under a schema. Rows failing eligibility filters are
/// dropped; rows with missing required fields are rejected; the treatment is
/// recoded per the schema.
pub fn ingest_csv(path: impl AsRef<Path>, schema: &CovariateSchema) -> Result<ObservationalDataset> {
    let text = std::fs::read_to_string(path)?;
    ingest_csv_str(&text, schema)
}

pub fn ingest_csv_str(text: &str, schema: &CovariateSchema) -> Result<ObservationalDataset> {
    schema.validate()?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(text.as_bytes());

    let headers = reader.headers()?.clone();
    let col_index: HashMap<&str, usize> = headers
        .iter()
        .enumerate()
        .map(|(i, name)| (name, i))
        .collect();

    let mut required: Vec<&str> = vec![&schema.outcome_column, &schema.treatment_column];
    required.extend(schema.covariate_columns());
    for (col, _) in &schema.eligibility_filters {
        required.push(col);
    }
    for col in &required {
        if !col_index.contains_key(*col) {
            return Err(Error::MissingColumn(col.to_string()));
        }
    }

    let parse = |record: &csv::StringRecord, row: usize, col: &str| -> Result<f64> {
        let raw = record.get(col_index[col]).unwrap_or("");
        if raw.trim().is_empty() {
            return Err(Error::Parse {
                row,
                column: col.to_string(),
                message: "missing value".into(),
            });
        }
        raw.trim().parse::<f64>().map_err(|e| Error::Parse {
            row,
            column: col.to_string(),
            message: e.to_string(),
        })
    };

    let covariates = schema.covariate_columns();
    let mut y = Vec::new();
    let mut t = Vec::new();
    let mut x: Vec<Vec<f64>> = vec![Vec::new(); covariates.len()];
    let mut dropped_missing = 0usize;

    for (row, record) in reader.records().enumerate() {
        let record = record?;
        // Eligibility first; filter columns must still parse.
        let mut eligible = true;
        for (col, allowed) in &schema.eligibility_filters {
            let v = parse(&record, row, col)?;
            if !allowed.iter().any(|a| *a == v) {
                eligible = false;
                break;
            }
        }
        if !eligible {
            continue;
        }
        // Reject (and count) rows with missing required fields.
        let mut parsed = Vec::with_capacity(2 + covariates.len());
        let mut missing = false;
        for col in std::iter::once(schema.outcome_column.as_str())
            .chain(std::iter::once(schema.treatment_column.as_str()))
            .chain(covariates.iter().copied())
        {
            match parse(&record, row, col) {
                Ok(v) => parsed.push(v),
                Err(Error::Parse { message, .. }) if message == "missing value" => {
                    missing = true;
                    break;
                }
                Err(e) => return Err(e),
            }
        }
        if missing {
            dropped_missing += 1;
            continue;
        }

        let raw_t = parsed[1];
        if raw_t != 0.0 && raw_t != 1.0 {
            return Err(Error::Parse {
                row,
                column: schema.treatment_column.clone(),
                message: format!("treatment value {raw_t} not in {{0,1}}"),
            });
        }
        let mut t_val = raw_t as u8;
        if schema.treatment_recode == Some(TreatmentRecode::Invert) {
            t_val = 1 - t_val;
        }

        for (j, col) in covariates.iter().enumerate() {
            let v = parsed[2 + j];
            if j >= schema.numeric_columns.len() && v != 0.0 && v != 1.0 {
                return Err(Error::Parse {
                    row,
                    column: col.to_string(),
                    message: format!("binary column value {v} not in {{0,1}}"),
                });
            }
            x[j].push(v);
        }
        y.push(parsed[0]);
        t.push(t_val);
    }

    if dropped_missing > 0 {
        eprintln!("ingest: dropped {dropped_missing} rows with missing required fields");
    }

    let ds = ObservationalDataset {
        y,
        t,
        x,
        schema: schema.clone(),
    };
    ds.check_invariants()?;
    Ok(ds)
}

/// Per-arm counts and means of the outcome and covariates.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub n: usize,
    pub n_treated: usize,
    pub n_control: usize,
    pub mean_outcome: f64,
    pub mean_outcome_treated: f64,
    pub mean_outcome_control: f64,
    pub covariate_means: Vec<(String, f64)>,
}

pub fn summarize(ds: &ObservationalDataset) -> DatasetSummary {
    let n = ds.n();
    let n1 = ds.n_treated();
    let n0 = n - n1;
    let mut sum = 0.0;
    let mut sum1 = 0.0;
    for i in 0..n {
        sum += ds.y[i];
        if ds.t[i] == 1 {
            sum1 += ds.y[i];
        }
    }
    let covariate_means = ds
        .schema
        .covariate_columns()
        .iter()
        .zip(&ds.x)
        .map(|(name, col)| (name.to_string(), col.iter().sum::<f64>() / n as f64))
        .collect();
    DatasetSummary {
        n,
        n_treated: n1,
        n_control: n0,
        mean_outcome: sum / n as f64,
        mean_outcome_treated: sum1 / n1 as f64,
        mean_outcome_control: (sum - sum1) / n0 as f64,
        covariate_means,
    }
}

/// Propensity diagnostics against an epsilon band.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PositivityReport {
    pub min_pi: f64,
    pub max_pi: f64,
    pub eps: f64,
    pub below_eps: usize,
    pub above_one_minus_eps: usize,
}

impl PositivityReport {
    pub fn violations(&self) -> usize {
        self.below_eps + self.above_one_minus_eps
    }
}

pub fn positivity_report(
    ds: &ObservationalDataset,
    pi_hat: &[f64],
    eps: f64,
) -> Result<PositivityReport> {
    if pi_hat.len() != ds.n() {
        return Err(Error::Input(format!(
            "pi_hat length {} does not match n = {}",
            pi_hat.len(),
            ds.n()
        )));
    }
    let mut min_pi = f64::INFINITY;
    let mut max_pi = f64::NEG_INFINITY;
    let mut below = 0;
    let mut above = 0;
    for &p in pi_hat {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::Domain(format!("propensity {p} outside (0,1)")));
        }
        min_pi = min_pi.min(p);
        max_pi = max_pi.max(p);
        if p < eps {
            below += 1;
        }
        if p > 1.0 - eps {
            above += 1;
        }
    }
    Ok(PositivityReport {
        min_pi,
        max_pi,
        eps,
        below_eps: below,
        above_one_minus_eps: above,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy_schema() -> CovariateSchema {
        CovariateSchema {
            numeric_columns: vec!["age".into()],
            binary_columns: vec!["married".into()],
            treatment_column: "smoke".into(),
            outcome_column: "weight".into(),
            outcome_units: "grams".into(),
            eligibility_filters: vec![("race".into(), vec![1.0])],
            treatment_recode: Some(TreatmentRecode::Invert),
        }
    }

    const FIXTURE: &str = "\
weight,smoke,age,married,race
3000,0,25,1,1
2500,1,30,0,1
3100,0,22,1,1
2800,1,28,0,2
";

    #[test]
    fn filter_and_invert_recode() {
        // Filter keeps rows 1-3 (race = 1); smoke (0,1,0) inverts to t = (1,0,1).
        let ds = ingest_csv_str(FIXTURE, &toy_schema()).unwrap();
        assert_eq!(ds.n(), 3);
        assert_eq!(ds.t, vec![1, 0, 1]);
        assert_eq!(ds.y, vec![3000.0, 2500.0, 3100.0]);
        assert_eq!(ds.column("age").unwrap(), &[25.0, 30.0, 22.0]);
    }

    #[test]
    fn missing_column_is_named() {
        let mut schema = toy_schema();
        schema.numeric_columns.push("height".into());
        match ingest_csv_str(FIXTURE, &schema) {
            Err(Error::MissingColumn(c)) => assert_eq!(c, "height"),
            other => panic!("expected MissingColumn, got {other:?}"),
        }
    }

    #[test]
    fn non_numeric_cell_reports_row() {
        let bad = FIXTURE.replace("3100", "oops");
        match ingest_csv_str(&bad, &toy_schema()) {
            Err(Error::Parse { row, column, .. }) => {
                assert_eq!(row, 2);
                assert_eq!(column, "weight");
            }
            other => panic!("expected Parse, got {other:?}"),
        }
    }

    #[test]
    fn empty_input_is_positivity_error() {
        let empty = "weight,smoke,age,married,race\n";
        assert!(matches!(
            ingest_csv_str(empty, &toy_schema()),
            Err(Error::Positivity(_))
        ));
    }

    #[test]
    fn single_arm_is_positivity_error() {
        let one_arm = "\
weight,smoke,age,married,race
3000,0,25,1,1
3100,0,22,1,1
";
        assert!(matches!(
            ingest_csv_str(one_arm, &toy_schema()),
            Err(Error::Positivity(_))
        ));
    }

    #[test]
    fn summarize_hand_computed() {
        // 5-row fixture, spreadsheet arithmetic.
        let schema = CovariateSchema {
            numeric_columns: vec!["age".into()],
            binary_columns: vec![],
            treatment_column: "t".into(),
            outcome_column: "y".into(),
            outcome_units: String::new(),
            eligibility_filters: vec![],
            treatment_recode: None,
        };
        let text = "\
y,t,age
10,1,20
20,1,30
30,0,40
40,0,50
50,0,60
";
        let ds = ingest_csv_str(text, &schema).unwrap();
        let s = summarize(&ds);
        assert_eq!(s.n, 5);
        assert_eq!(s.n_treated, 2);
        assert_eq!(s.mean_outcome, 30.0);
        assert_eq!(s.mean_outcome_treated, 15.0);
        assert_eq!(s.mean_outcome_control, 40.0);
        assert_eq!(s.covariate_means[0], ("age".into(), 40.0));
    }

    #[test]
    fn summarize_weighted_recombination() {
        let ds = ingest_csv_str(FIXTURE, &toy_schema()).unwrap();
        let s = summarize(&ds);
        let recombined = (s.n_treated as f64 * s.mean_outcome_treated
            + s.n_control as f64 * s.mean_outcome_control)
            / s.n as f64;
        assert!((recombined - s.mean_outcome).abs() / s.mean_outcome.abs() < 1e-12);
    }

    #[test]
    fn constant_outcome_equal_arm_means() {
        let text = "\
y,t,age
7,1,20
7,0,30
7,1,40
";
        let schema = CovariateSchema {
            numeric_columns: vec!["age".into()],
            binary_columns: vec![],
            treatment_column: "t".into(),
            outcome_column: "y".into(),
            outcome_units: String::new(),
            eligibility_filters: vec![],
            treatment_recode: None,
        };
        let s = summarize(&ingest_csv_str(text, &schema).unwrap());
        assert_eq!(s.mean_outcome_treated, 7.0);
        assert_eq!(s.mean_outcome_control, 7.0);
    }

    #[test]
    fn canonical_emission_roundtrips_bit_for_bit() {
        let ds = ingest_csv_str(FIXTURE, &toy_schema()).unwrap();
        let emitted = ds.to_canonical_csv();
        let reingested = ingest_csv_str(&emitted, &ds.schema.canonical()).unwrap();
        assert_eq!(reingested.to_canonical_csv(), emitted);
        assert_eq!(reingested.y, ds.y);
        assert_eq!(reingested.t, ds.t);
        assert_eq!(reingested.x, ds.x);
    }

    #[test]
    fn positivity_report_bands() {
        let ds = ingest_csv_str(FIXTURE, &toy_schema()).unwrap();
        let r = positivity_report(&ds, &[0.5, 0.5, 0.5], 0.01).unwrap();
        assert_eq!(r.violations(), 0);
        let r = positivity_report(&ds, &[0.004, 0.5, 0.5], 0.01).unwrap();
        assert_eq!(r.below_eps, 1);
        assert_eq!(r.violations(), 1);
        assert!(positivity_report(&ds, &[0.0, 0.5, 0.5], 0.01).is_err());
    }
}
