use nalgebra::{DMatrix, DVector};

use crate::error::{check_len, Error, Result};
use crate::expfam::{check_responses, Family};

/// Response vector, design matrix and an optional cell structure.
#[derive(Debug, Clone, PartialEq)]
pub struct GlmData {
    pub y: DVector<f64>,
    pub x: DMatrix<f64>,
    pub column_names: Vec<String>,
    /// Cell label of each row, present when the design is one-hot.
    pub groups: Option<Vec<usize>>,
}

impl GlmData {
    pub fn new(family: Family, y: DVector<f64>, x: DMatrix<f64>) -> Result<Self> {
        check_len("design rows", y.len(), x.nrows())?;
        check_responses(family, y.as_slice())?;
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(
                "design matrix has non-finite entries".into(),
            ));
        }
        if x.ncols() == 0 || x.ncols() > x.nrows() {
            return Err(Error::InvalidArgument(format!(
                "design must have between 1 and n = {} columns, found {}",
                x.nrows(),
                x.ncols()
            )));
        }
        let column_names = (0..x.ncols()).map(|j| format!("beta[{j}]")).collect();
        let groups = cell_labels(&x);
        Ok(Self {
            y,
            x,
            column_names,
            groups,
        })
    }

    pub fn with_column_names(mut self, names: Vec<String>) -> Result<Self> {
        check_len("column names", self.x.ncols(), names.len())?;
        self.column_names = names;
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }
}

/// Row-to-cell labels when every row of `x` is a unit indicator vector.
pub fn cell_labels(x: &DMatrix<f64>) -> Option<Vec<usize>> {
    let mut labels = Vec::with_capacity(x.nrows());
    for row in x.row_iter() {
        let mut cell = None;
        for (j, &v) in row.iter().enumerate() {
            if v == 1.0 {
                if cell.is_some() {
                    return None;
                }
                cell = Some(j);
            } else if v != 0.0 {
                return None;
            }
        }
        labels.push(cell?);
    }
    Some(labels)
}
