use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of batches `floor(sqrt(T) / divisor)`, capped to `[min, max]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BatchPolicy {
    pub divisor: f64,
    pub min_batches: usize,
    pub max_batches: usize,
}

impl Default for BatchPolicy {
    fn default() -> Self {
        Self {
            divisor: 1.0,
            min_batches: 16,
            max_batches: 1024,
        }
    }
}

/// Batch count for an estimation window of length `effective_t`; too
/// short a window is an error rather than a silently weak estimate.
pub fn batch_count(effective_t: f64, policy: &BatchPolicy) -> Result<usize> {
    let raw = (effective_t.max(0.0).sqrt() / policy.divisor).floor() as usize;
    if raw < policy.min_batches {
        return Err(Error::TooFewBatches {
            got: raw,
            needed: policy.min_batches,
        });
    }
    Ok(raw.min(policy.max_batches))
}

/// Accumulates `int f(X_s) ds` over equal-length batches of `[start, end)`
/// from piecewise-constant segments.
#[derive(Debug, Clone)]
pub struct BatchAccumulator {
    start: f64,
    end: f64,
    length: f64,
    integrals: Vec<f64>,
}

impl BatchAccumulator {
    pub fn new(start: f64, end: f64, n_batches: usize) -> Self {
        Self {
            start,
            end,
            length: (end - start) / n_batches as f64,
            integrals: vec![0.0; n_batches],
        }
    }

    pub fn batch_length(&self) -> f64 {
        self.length
    }

    /// Adds `value` held on `[t0, t1)`, split across batch boundaries.
    pub fn add(&mut self, t0: f64, t1: f64, value: f64) {
        let (mut lo, hi) = (t0.max(self.start), t1.min(self.end));
        if hi <= lo || value == 0.0 {
            return;
        }
        let n = self.integrals.len();
        while lo < hi {
            let k = (((lo - self.start) / self.length) as usize).min(n - 1);
            let boundary = if k + 1 == n {
                self.end
            } else {
                self.start + (k + 1) as f64 * self.length
            };
            let seg_end = hi.min(boundary);
            self.integrals[k] += value * (seg_end - lo);
            if seg_end <= lo {
                break;
            }
            lo = seg_end;
        }
    }

    pub fn into_integrals(self) -> Vec<f64> {
        self.integrals
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn batch_count_policy() {
        let p = BatchPolicy::default();
        assert_eq!(batch_count(1e5, &p).unwrap(), 316);
        assert_eq!(batch_count(1e7, &p).unwrap(), 1024);
        assert_eq!(
            batch_count(10.0, &p),
            Err(Error::TooFewBatches { got: 3, needed: 16 })
        );
        assert_eq!(batch_count(256.0, &p).unwrap(), 16);
    }

    #[test]
    fn segments_split_at_boundaries() {
        let mut acc = BatchAccumulator::new(0.0, 4.0, 4);
        acc.add(0.5, 2.5, 1.0);
        acc.add(3.5, 9.0, 2.0);
        acc.add(-1.0, 0.25, 4.0);
        let v = acc.into_integrals();
        assert_eq!(v, vec![0.5 + 1.0, 1.0, 0.5, 1.0]);
    }
}
