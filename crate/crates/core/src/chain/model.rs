use std::collections::VecDeque;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default relative tolerance for row sums of a rate matrix.
pub const DEFAULT_ROW_SUM_TOL: f64 = 1e-10;

/// A validated finite-state generator: non-negative off-diagonal rates,
/// zero row sums and a strongly connected rate graph.
#[derive(Debug, Clone, PartialEq)]
pub struct CtmcModel {
    q: DMatrix<f64>,
    labels: Option<Vec<String>>,
}

/// Raw model file contents: `{"n": .., "Q": [[..]], "labels": [..]?, "f": [..]?}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub n: usize,
    #[serde(rename = "Q")]
    pub q: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f: Option<Vec<f64>>,
}

impl ModelFile {
    pub fn into_model(self) -> Result<CtmcModel> {
        if self.q.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: self.q.len(),
            });
        }
        let mut model = validate_model(&self.q)?;
        if let Some(labels) = self.labels {
            model = model.with_labels(labels)?;
        }
        Ok(model)
    }
}

/// Validates a raw row-major rate matrix. Every violated invariant is
/// reported: a single violation is returned as itself, several are wrapped
/// in [`Error::Invalid`].
pub fn validate_model(raw: &[Vec<f64>]) -> Result<CtmcModel> {
    validate_model_with_tol(raw, DEFAULT_ROW_SUM_TOL)
}

pub fn validate_model_with_tol(raw: &[Vec<f64>], row_sum_tol: f64) -> Result<CtmcModel> {
    let n = raw.len();
    if n == 0 {
        return Err(Error::Empty);
    }
    for (row, r) in raw.iter().enumerate() {
        if r.len() != n {
            return Err(Error::NotSquare {
                rows: n,
                row,
                cols: r.len(),
            });
        }
    }
    let q = DMatrix::from_fn(n, n, |i, j| raw[i][j]);
    CtmcModel::from_matrix_with_tol(q, row_sum_tol)
}

impl CtmcModel {
    pub fn from_matrix(q: DMatrix<f64>) -> Result<Self> {
        Self::from_matrix_with_tol(q, DEFAULT_ROW_SUM_TOL)
    }

    pub fn from_matrix_with_tol(q: DMatrix<f64>, row_sum_tol: f64) -> Result<Self> {
        let n = q.nrows();
        if n == 0 {
            return Err(Error::Empty);
        }
        if q.ncols() != n {
            return Err(Error::NotSquare {
                rows: n,
                row: 0,
                cols: q.ncols(),
            });
        }
        let mut violations = Vec::new();
        for i in 0..n {
            for j in 0..n {
                let v = q[(i, j)];
                if !v.is_finite() {
                    violations.push(Error::NonFinite { row: i, col: j });
                } else if i != j && v < 0.0 {
                    violations.push(Error::NegativeOffDiagonal {
                        row: i,
                        col: j,
                        value: v,
                    });
                }
            }
        }
        for i in 0..n {
            let row = q.row(i);
            let sum: f64 = row.iter().sum();
            let scale = row.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
            if sum.is_finite() && sum.abs() > row_sum_tol * scale {
                violations.push(Error::NonzeroRowSum { row: i, sum });
            }
        }
        if let Some(err) = reducibility(&q) {
            violations.push(err);
        }
        match violations.len() {
            0 => Ok(Self { q, labels: None }),
            1 => Err(violations.pop().unwrap()),
            count => Err(Error::Invalid { count, violations }),
        }
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Result<Self> {
        if labels.len() != self.n() {
            return Err(Error::DimensionMismatch {
                expected: self.n(),
                got: labels.len(),
            });
        }
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.q.nrows()
    }

    pub fn rates(&self) -> &DMatrix<f64> {
        &self.q
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    /// Index of the state called `label`, if labels are present.
    pub fn state_index(&self, label: &str) -> Option<usize> {
        self.labels.as_ref()?.iter().position(|l| l == label)
    }

    /// Total jump rate out of `state`.
    pub fn exit_rate(&self, state: usize) -> f64 {
        -self.q[(state, state)]
    }

    /// The model with every rate multiplied by `k > 0`.
    pub fn scaled(&self, k: f64) -> Result<Self> {
        if !(k > 0.0 && k.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "scale factor must be positive, got {k}"
            )));
        }
        Ok(Self {
            q: &self.q * k,
            labels: self.labels.clone(),
        })
    }

    pub fn to_file(&self) -> ModelFile {
        let n = self.n();
        ModelFile {
            n,
            q: (0..n)
                .map(|i| self.q.row(i).iter().copied().collect())
                .collect(),
            labels: self.labels.clone(),
            f: None,
        }
    }
}

/// Forward and reverse breadth-first search from state 0 over positive
/// off-diagonal rates; returns the first unreachable pair.
fn reducibility(q: &DMatrix<f64>) -> Option<Error> {
    let n = q.nrows();
    let edge = |i: usize, j: usize| i != j && q[(i, j)] > 0.0;
    let reach = |forward: bool| {
        let mut seen = vec![false; n];
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
        while let Some(i) = queue.pop_front() {
            for (j, s) in seen.iter_mut().enumerate() {
                let e = if forward { edge(i, j) } else { edge(j, i) };
                if e && !*s {
                    *s = true;
                    queue.push_back(j);
                }
            }
        }
        seen
    };
    if let Some(to) = reach(true).iter().position(|s| !s) {
        return Some(Error::Reducible { from: 0, to });
    }
    if let Some(from) = reach(false).iter().position(|s| !s) {
        return Some(Error::Reducible { from, to: 0 });
    }
    None
}
