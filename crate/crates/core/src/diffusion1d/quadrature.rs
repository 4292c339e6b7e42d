use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Rule {
    Trapezoid,
    Simpson,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureConfig {
    pub rule: Rule,
    /// Largest admissible stationary mass beyond `x_max`.
    pub tail_tolerance: f64,
    /// Number of grid coarsenings reported alongside quadrature results.
    pub refinement_levels: usize,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self {
            rule: Rule::Simpson,
            tail_tolerance: 1e-8,
            refinement_levels: 1,
        }
    }
}

impl QuadratureConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tail_tolerance > 0.0 && self.tail_tolerance <= 1e-3) {
            return Err(Error::InvalidConfig(format!(
                "tail tolerance must lie in (0, 1e-3], got {}",
                self.tail_tolerance
            )));
        }
        Ok(())
    }
}

/// Integral of `values` over each grid interval `[x_i, x_{i+1}]` of a
/// uniform grid with spacing `h`.
///
/// The Simpson rule integrates the local quadratic interpolant on each half
/// of a node pair, so sums over pairs reproduce composite Simpson exactly
/// while every node still gets a cumulative value.
pub fn interval_integrals(values: &[f64], h: f64, rule: Rule) -> Vec<f64> {
    let n = values.len();
    if n < 2 {
        return Vec::new();
    }
    let f = values;
    (0..n - 1)
        .map(|i| match rule {
            Rule::Trapezoid => 0.5 * h * (f[i] + f[i + 1]),
            Rule::Simpson if n < 3 => 0.5 * h * (f[i] + f[i + 1]),
            Rule::Simpson => {
                if i % 2 == 0 && i + 2 < n {
                    h / 12.0 * (5.0 * f[i] + 8.0 * f[i + 1] - f[i + 2])
                } else {
                    h / 12.0 * (-f[i - 1] + 8.0 * f[i] + 5.0 * f[i + 1])
                }
            }
        })
        .collect()
}

/// `int_{x_0}^{x_k}` for every node `k`.
pub fn cumulative(values: &[f64], h: f64, rule: Rule) -> Vec<f64> {
    let mut out = Vec::with_capacity(values.len());
    let mut acc = 0.0;
    out.push(0.0);
    for piece in interval_integrals(values, h, rule) {
        acc += piece;
        out.push(acc);
    }
    out
}

/// `int_{x_k}^{x_last}` for every node `k`, accumulated from the right so
/// that small tails keep their relative accuracy.
pub fn cumulative_tail(values: &[f64], h: f64, rule: Rule) -> Vec<f64> {
    let pieces = interval_integrals(values, h, rule);
    let mut out = vec![0.0; values.len()];
    let mut acc = 0.0;
    for k in (0..pieces.len()).rev() {
        acc += pieces[k];
        out[k] = acc;
    }
    out
}

pub fn integrate(values: &[f64], h: f64, rule: Rule) -> f64 {
    interval_integrals(values, h, rule).iter().sum()
}

/// Derivative samples by central differences, second-order one-sided
/// stencils at both ends.
pub fn central_difference(values: &[f64], h: f64) -> Vec<f64> {
    let n = values.len();
    let f = values;
    if n < 3 {
        return if n == 2 {
            vec![(f[1] - f[0]) / h; 2]
        } else {
            vec![0.0; n]
        };
    }
    (0..n)
        .map(|i| {
            if i == 0 {
                (-3.0 * f[0] + 4.0 * f[1] - f[2]) / (2.0 * h)
            } else if i == n - 1 {
                (3.0 * f[n - 1] - 4.0 * f[n - 2] + f[n - 3]) / (2.0 * h)
            } else {
                (f[i + 1] - f[i - 1]) / (2.0 * h)
            }
        })
        .collect()
}
