//! Trial data model and CSV ingestion.
//!
//! A [`TrialDataset`] holds the covariate matrix, treatment codes, and observed
//! responses of a randomized trial. Ingestion supports two-arm selection from
//! multi-arm files ([`ArmPair`], mapping the pair onto T = +1/-1) and real-valued
//! dose encodings for multi-dose trials ([`DoseEncoding`]).

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

/// Minimum patients per arm enforced at ingestion so per-arm means and
/// variances are estimable with some slack.
pub const MIN_PER_ARM: usize = 4;

/// Immutable trial dataset: N patients, D covariates.
///
/// Invariants (enforced on construction):
/// - covariates, treatment, and response agree on N; names agree on D;
/// - the treatment vector has at least two distinct values, each appearing
///   at least twice;
/// - every stored value is finite.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialDataset {
    covariates: Vec<Vec<f64>>,
    covariate_names: Vec<String>,
    treatment: Vec<f64>,
    response: Vec<f64>,
}

impl TrialDataset {
    /// Build a dataset from column-major covariates, validating all invariants.
    pub fn new(
        covariates: Vec<Vec<f64>>,
        covariate_names: Vec<String>,
        treatment: Vec<f64>,
        response: Vec<f64>,
    ) -> Result<Self> {
        let n = treatment.len();
        if response.len() != n {
            return Err(Error::LengthMismatch {
                left: n,
                right: response.len(),
            });
        }
        if covariate_names.len() != covariates.len() {
            return Err(Error::LengthMismatch {
                left: covariates.len(),
                right: covariate_names.len(),
            });
        }
        for (j, col) in covariates.iter().enumerate() {
            if col.len() != n {
                return Err(Error::LengthMismatch {
                    left: n,
                    right: col.len(),
                });
            }
            if let Some(i) = col.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFinite {
                    row: i + 1,
                    column: covariate_names[j].clone(),
                });
            }
        }
        if let Some(i) = treatment.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                row: i + 1,
                column: "treatment".into(),
            });
        }
        if let Some(i) = response.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                row: i + 1,
                column: "response".into(),
            });
        }
        let ds = Self {
            covariates,
            covariate_names,
            treatment,
            response,
        };
        let arms = ds.arms();
        if arms.len() < 2 {
            return Err(Error::SingleArm);
        }
        for (label, count) in &arms {
            if *count < 2 {
                return Err(Error::TooFewPerArm {
                    label: format!("{label}"),
                    count: *count,
                    min: 2,
                });
            }
        }
        Ok(ds)
    }

    pub fn n_patients(&self) -> usize {
        self.treatment.len()
    }

    pub fn n_covariates(&self) -> usize {
        self.covariates.len()
    }

    pub fn covariate(&self, j: usize) -> &[f64] {
        &self.covariates[j]
    }

    pub fn covariate_names(&self) -> &[String] {
        &self.covariate_names
    }

    pub fn treatment(&self) -> &[f64] {
        &self.treatment
    }

    pub fn response(&self) -> &[f64] {
        &self.response
    }

    /// Distinct treatment values with their patient counts, ascending.
    pub fn arms(&self) -> Vec<(f64, usize)> {
        let mut counts: BTreeMap<u64, (f64, usize)> = BTreeMap::new();
        for &t in &self.treatment {
            let key = key_of(t);
            counts.entry(key).or_insert((t, 0)).1 += 1;
        }
        let mut arms: Vec<(f64, usize)> = counts.into_values().collect();
        arms.sort_by(|a, b| a.0.total_cmp(&b.0));
        arms
    }

    /// Row indices belonging to the arm with the given treatment value.
    pub fn arm_rows(&self, label: f64) -> Vec<usize> {
        self.treatment
            .iter()
            .enumerate()
            .filter(|(_, &t)| t == label)
            .map(|(i, _)| i)
            .collect()
    }

    /// Re-serialize the dataset as CSV: covariate columns in order, then
    /// `treatment` and `response`. Numeric formatting is the shortest decimal
    /// representation that round-trips, so ingesting the output reproduces
    /// every retained value bit for bit.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header: Vec<String> = self.covariate_names.clone();
        header.push("treatment".into());
        header.push("response".into());
        w.write_record(&header)?;
        for i in 0..self.n_patients() {
            let mut rec: Vec<String> = Vec::with_capacity(header.len());
            for col in &self.covariates {
                rec.push(format!("{}", col[i]));
            }
            rec.push(format!("{}", self.treatment[i]));
            rec.push(format!("{}", self.response[i]));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

// Total-order key so that distinct f64 bit patterns of equal value (0.0/-0.0)
// collapse to one arm.
fn key_of(t: f64) -> u64 {
    let t = if t == 0.0 { 0.0 } else { t };
    let bits = t.to_bits();
    if t.is_sign_negative() {
        !bits
    } else {
        bits | (1 << 63)
    }
}

/// A pair of arm labels selecting a two-arm comparison from a multi-arm file.
/// `arm_a` maps to T = +1, `arm_b` to T = -1; rows from other arms are dropped.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ArmPair {
    arm_a: String,
    arm_b: String,
}

impl ArmPair {
    pub fn new(arm_a: impl Into<String>, arm_b: impl Into<String>) -> Result<Self> {
        let (arm_a, arm_b) = (arm_a.into(), arm_b.into());
        if arm_a == arm_b {
            return Err(Error::Invalid(format!(
                "arm pair labels must be distinct, got `{arm_a}` twice"
            )));
        }
        Ok(Self { arm_a, arm_b })
    }

    pub fn arm_a(&self) -> &str {
        &self.arm_a
    }

    pub fn arm_b(&self) -> &str {
        &self.arm_b
    }
}

/// Injective mapping from raw dose labels to real treatment codes.
#[derive(Debug, Clone, PartialEq)]
pub struct DoseEncoding {
    map: Vec<(String, f64)>,
}

impl DoseEncoding {
    pub fn new(map: Vec<(String, f64)>) -> Result<Self> {
        for (i, (la, va)) in map.iter().enumerate() {
            if !va.is_finite() {
                return Err(Error::Invalid(format!("dose `{la}` maps to a non-finite value")));
            }
            for (lb, vb) in &map[i + 1..] {
                if la == lb {
                    return Err(Error::Invalid(format!("dose label `{la}` listed twice")));
                }
                if va == vb {
                    return Err(Error::DoseNotInjective(la.clone(), lb.clone()));
                }
            }
        }
        Ok(Self { map })
    }

    pub fn encode(&self, label: &str) -> Result<f64> {
        self.map
            .iter()
            .find(|(l, _)| l == label)
            .map(|(_, v)| *v)
            .ok_or_else(|| Error::UnknownDose(label.to_string()))
    }

    pub fn labels(&self) -> impl Iterator<Item = &str> {
        self.map.iter().map(|(l, _)| l.as_str())
    }
}

/// Column selection and treatment coding for [`ingest_csv`].
#[derive(Debug, Clone)]
pub struct IngestConfig {
    pub treatment_column: String,
    pub response_column: String,
    pub arm_pair: Option<ArmPair>,
    pub dose_encoding: Option<DoseEncoding>,
    pub delimiter: u8,
}

impl IngestConfig {
    pub fn new(treatment_column: impl Into<String>, response_column: impl Into<String>) -> Self {
        Self {
            treatment_column: treatment_column.into(),
            response_column: response_column.into(),
            arm_pair: None,
            dose_encoding: None,
            delimiter: b',',
        }
    }
}

/// Read a trial dataset from a CSV file (UTF-8, header row required,
/// `.` decimal separator).
///
/// All columns other than the designated treatment/response columns are taken
/// as covariates, in file order; row order is preserved. Covariate cells must
/// already be numeric (categorical covariates are expected to be pre-coded).
/// With an [`ArmPair`], rows from other arms are dropped before any cell of
/// theirs is parsed, and the retained arms are coded +1/-1. With a
/// [`DoseEncoding`], treatment labels are mapped through the encoding.
pub fn ingest_csv<P: AsRef<Path>>(path: P, config: &IngestConfig) -> Result<TrialDataset> {
    let file = std::fs::File::open(path.as_ref())?;
    ingest_reader(file, config)
}

/// Same as [`ingest_csv`] but reading from any `io::Read`.
pub fn ingest_reader<R: std::io::Read>(reader: R, config: &IngestConfig) -> Result<TrialDataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(config.delimiter)
        .has_headers(true)
        .flexible(false)
        .from_reader(reader);

    let headers = rdr.headers()?.clone();
    let find = |name: &str| headers.iter().position(|h| h == name);
    let t_idx = find(&config.treatment_column)
        .ok_or_else(|| Error::MissingColumn(config.treatment_column.clone()))?;
    let r_idx = find(&config.response_column)
        .ok_or_else(|| Error::MissingColumn(config.response_column.clone()))?;
    if t_idx == r_idx {
        return Err(Error::Invalid(
            "treatment and response columns must differ".into(),
        ));
    }

    let cov_idx: Vec<usize> = (0..headers.len())
        .filter(|&j| j != t_idx && j != r_idx)
        .collect();
    let covariate_names: Vec<String> = cov_idx.iter().map(|&j| headers[j].to_string()).collect();

    let mut covariates: Vec<Vec<f64>> = vec![Vec::new(); cov_idx.len()];
    let mut treatment: Vec<f64> = Vec::new();
    let mut response: Vec<f64> = Vec::new();
    let mut seen_a = false;
    let mut seen_b = false;

    let parse_cell = |row: usize, column: &str, value: &str| -> Result<f64> {
        let v: f64 = value.trim().parse().map_err(|_| Error::BadCell {
            row,
            column: column.to_string(),
            value: value.to_string(),
        })?;
        if !v.is_finite() {
            return Err(Error::NonFinite {
                row,
                column: column.to_string(),
            });
        }
        Ok(v)
    };

    for (rec_no, record) in rdr.records().enumerate() {
        let record = record?;
        let row = rec_no + 1; // 1-based data row, matching how users count
        let raw_t = record.get(t_idx).unwrap_or("");

        let t_value = if let Some(pair) = &config.arm_pair {
            if raw_t == pair.arm_a() {
                seen_a = true;
                1.0
            } else if raw_t == pair.arm_b() {
                seen_b = true;
                -1.0
            } else {
                continue; // row belongs to another arm; drop before parsing cells
            }
        } else if let Some(enc) = &config.dose_encoding {
            enc.encode(raw_t)?
        } else {
            parse_cell(row, &config.treatment_column, raw_t)?
        };

        response.push(parse_cell(
            row,
            &config.response_column,
            record.get(r_idx).unwrap_or(""),
        )?);
        treatment.push(t_value);
        for (slot, &j) in covariates.iter_mut().zip(cov_idx.iter()) {
            slot.push(parse_cell(row, &headers[j], record.get(j).unwrap_or(""))?);
        }
    }

    if let Some(pair) = &config.arm_pair {
        if !seen_a {
            return Err(Error::ArmNotFound(pair.arm_a().to_string()));
        }
        if !seen_b {
            return Err(Error::ArmNotFound(pair.arm_b().to_string()));
        }
    }

    // per-arm minimum before the general invariants so the message names the arm
    {
        let mut counts: BTreeMap<u64, (f64, usize)> = BTreeMap::new();
        for &t in &treatment {
            counts.entry(key_of(t)).or_insert((t, 0)).1 += 1;
        }
        if counts.is_empty() {
            return Err(Error::SingleArm);
        }
        for (label, count) in counts.values() {
            if *count < MIN_PER_ARM {
                return Err(Error::TooFewPerArm {
                    label: format!("{label}"),
                    count: *count,
                    min: MIN_PER_ARM,
                });
            }
        }
    }

    TrialDataset::new(covariates, covariate_names, treatment, response)
}
