//! CSV input: numeric tables, design matrices and the small auxiliary files
//! (historical summaries and elicited hyperparameters).

use std::path::Path;

use hpp_core::elicitation::HistoricalSummary;
use hpp_core::{Family, GlmData};
use nalgebra::{DMatrix, DVector};

use crate::config::DataSpec;
use crate::error::{CliError, CliResult};

/// Name given to the prepended column of ones.
pub const INTERCEPT: &str = "intercept";

/// A numeric CSV file held column by column.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub headers: Vec<String>,
    pub columns: Vec<Vec<f64>>,
}

impl Table {
    pub fn read(path: &Path) -> CliResult<Self> {
        let file = std::fs::File::open(path).map_err(|e| CliError::io("open", path, e))?;
        Self::from_reader(file).map_err(|e| match e {
            CliError::Data(msg) => CliError::Data(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn from_reader<R: std::io::Read>(reader: R) -> CliResult<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers: Vec<String> = rdr
            .headers()
            .map_err(|e| CliError::Data(format!("unreadable header: {e}")))?
            .iter()
            .map(str::to_string)
            .collect();
        if headers.is_empty() || headers.iter().any(String::is_empty) {
            return Err(CliError::Data("header row has empty column names".into()));
        }
        for (i, h) in headers.iter().enumerate() {
            if headers[..i].contains(h) {
                return Err(CliError::Data(format!("duplicate column `{h}`")));
            }
        }
        let mut columns = vec![Vec::new(); headers.len()];
        for (row, record) in rdr.records().enumerate() {
            // Line 1 is the header.
            let line = row + 2;
            let record = record.map_err(|e| CliError::Data(format!("line {line}: {e}")))?;
            for (j, field) in record.iter().enumerate() {
                let value: f64 = field.parse().map_err(|_| {
                    CliError::Data(format!(
                        "line {line}, column `{}`: `{field}` is not a number",
                        headers[j]
                    ))
                })?;
                if !value.is_finite() {
                    return Err(CliError::Data(format!(
                        "line {line}, column `{}`: value is not finite",
                        headers[j]
                    )));
                }
                columns[j].push(value);
            }
        }
        if columns[0].is_empty() {
            return Err(CliError::Data("no data rows".into()));
        }
        Ok(Self { headers, columns })
    }

    pub fn n_rows(&self) -> usize {
        self.columns[0].len()
    }

    pub fn column(&self, name: &str) -> CliResult<&[f64]> {
        self.headers
            .iter()
            .position(|h| h == name)
            .map(|j| self.columns[j].as_slice())
            .ok_or_else(|| {
                CliError::Data(format!(
                    "no column `{name}`; available columns: {}",
                    self.headers.join(", ")
                ))
            })
    }

    /// A raw column or `log(name)`.
    pub fn covariate(&self, spec: &str) -> CliResult<Vec<f64>> {
        let spec = spec.trim();
        if let Some(inner) = spec.strip_prefix("log(").and_then(|s| s.strip_suffix(')')) {
            let inner = inner.trim();
            let raw = self.column(inner)?;
            if let Some(i) = raw.iter().position(|&v| v <= 0.0) {
                return Err(CliError::Data(format!(
                    "log({inner}) needs positive values; row {} holds {}",
                    i + 1,
                    raw[i]
                )));
            }
            Ok(raw.iter().map(|v| v.ln()).collect())
        } else {
            Ok(self.column(spec)?.to_vec())
        }
    }

    /// Design matrix and its column names.
    pub fn design(&self, covariates: &[String], intercept: bool) -> CliResult<(DMatrix<f64>, Vec<String>)> {
        let mut cols = Vec::new();
        let mut names = Vec::new();
        if intercept {
            cols.push(vec![1.0; self.n_rows()]);
            names.push(INTERCEPT.to_string());
        }
        for c in covariates {
            cols.push(self.covariate(c)?);
            names.push(c.trim().to_string());
        }
        if cols.is_empty() {
            return Err(CliError::Config(
                "the model has no columns: add covariates or keep the intercept".into(),
            ));
        }
        let x = DMatrix::from_fn(self.n_rows(), cols.len(), |i, j| cols[j][i]);
        Ok((x, names))
    }

    /// Response, design matrix and column names per `spec`.
    pub fn glm_data(&self, family: Family, spec: &DataSpec) -> CliResult<GlmData> {
        let y = DVector::from_vec(self.column(&spec.response)?.to_vec());
        let (x, names) = self.design(&spec.covariates, spec.intercept)?;
        let data = GlmData::new(family, y, x).map_err(|e| match e {
            hpp_core::Error::DataSupport { index, value, .. } => CliError::Data(format!(
                "response `{}` at row {} is {value}, outside the support of the {family} family",
                spec.response,
                index + 1
            )),
            hpp_core::Error::InvalidArgument(msg) => CliError::Data(msg),
            other => CliError::from(other),
        })?;
        Ok(data.with_column_names(names)?)
    }
}

pub fn load_glm_data(family: Family, spec: &DataSpec) -> CliResult<(Table, GlmData)> {
    let table = Table::read(&spec.path)?;
    let data = table.glm_data(family, spec).map_err(|e| match e {
        CliError::Data(msg) => CliError::Data(format!("{}: {msg}", spec.path.display())),
        other => other,
    })?;
    Ok((table, data))
}

/// Reads `name,estimate,se` rows and orders them like `columns`.
pub fn read_summary(path: &Path, columns: &[String]) -> CliResult<HistoricalSummary> {
    let file = std::fs::File::open(path).map_err(|e| CliError::io("open", path, e))?;
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    let headers = rdr
        .headers()
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?
        .clone();
    if headers.iter().collect::<Vec<_>>() != ["name", "estimate", "se"] {
        return Err(CliError::Data(format!(
            "{}: summary header must be `name,estimate,se`",
            path.display()
        )));
    }
    let mut rows: Vec<(String, f64, f64)> = Vec::new();
    for (k, record) in rdr.records().enumerate() {
        let line = k + 2;
        let record = record.map_err(|e| CliError::Data(format!("{}: line {line}: {e}", path.display())))?;
        let number = |j: usize| -> CliResult<f64> {
            record[j].parse().map_err(|_| {
                CliError::Data(format!(
                    "{}: line {line}: `{}` is not a number",
                    path.display(),
                    &record[j]
                ))
            })
        };
        rows.push((record[0].to_string(), number(1)?, number(2)?));
    }
    let mut estimate = DVector::zeros(columns.len());
    let mut se = DVector::zeros(columns.len());
    for (j, name) in columns.iter().enumerate() {
        let row = rows.iter().find(|r| &r.0 == name).ok_or_else(|| {
            CliError::Data(format!(
                "{}: no entry for model column `{name}`",
                path.display()
            ))
        })?;
        estimate[j] = row.1;
        se[j] = row.2;
    }
    if rows.len() != columns.len() {
        let extra: Vec<&str> = rows
            .iter()
            .filter(|r| !columns.contains(&r.0))
            .map(|r| r.0.as_str())
            .collect();
        return Err(CliError::Data(format!(
            "{}: entries {extra:?} do not match the model columns {columns:?}",
            path.display()
        )));
    }
    HistoricalSummary::new(estimate, se).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

pub fn write_summary_csv(summary: &HistoricalSummary, columns: &[String]) -> String {
    let mut out = String::from("name,estimate,se\n");
    for (j, name) in columns.iter().enumerate() {
        out.push_str(&format!("{name},{},{}\n", summary.beta0_hat[j], summary.se0[j]));
    }
    out
}

/// μ₀ and λ₀ vectors from a file written by `hpp elicit`.
pub fn read_hyper_file(path: &Path) -> CliResult<(DVector<f64>, DVector<f64>)> {
    let table = Table::read(path)?;
    let mu0 = table.column("mu0")?;
    let lambda0 = table.column("lambda0")?;
    Ok((
        DVector::from_column_slice(mu0),
        DVector::from_column_slice(lambda0),
    ))
}
