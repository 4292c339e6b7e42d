//! Reversible nearest-neighbour chains approximating
//! `div(A grad u) + <A grad V, grad u>` on a rectangular grid, whose
//! stationary law is proportional to `e^V`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{CtmcModel, StationaryDistribution};
use crate::error::{Error, Result};

/// Cell-centred rectangular grid; node `(i, j)` sits at
/// `origin + ((i + 1/2) h, (j + 1/2) h)` and has flat index `i + nx * j`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec2d {
    pub nx: usize,
    pub ny: usize,
    pub h: f64,
    pub origin: (f64, f64),
    pub periodic: bool,
}

impl GridSpec2d {
    /// Square grid covering `[-half_width, half_width]^2` with spacing `h`.
    pub fn centered_square(half_width: f64, h: f64) -> Self {
        let m = (2.0 * half_width / h).round() as usize;
        Self {
            nx: m,
            ny: m,
            h,
            origin: (-half_width, -half_width),
            periodic: false,
        }
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        i + self.nx * j
    }

    pub fn point(&self, k: usize) -> (f64, f64) {
        let (i, j) = (k % self.nx, k / self.nx);
        (
            self.origin.0 + (i as f64 + 0.5) * self.h,
            self.origin.1 + (j as f64 + 0.5) * self.h,
        )
    }

    pub fn points(&self) -> Vec<(f64, f64)> {
        (0..self.len()).map(|k| self.point(k)).collect()
    }

    /// Samples `g` at every node.
    pub fn sample(&self, g: impl Fn(f64, f64) -> f64) -> Vec<f64> {
        self.points().into_iter().map(|(x, y)| g(x, y)).collect()
    }
}

/// Diagonal diffusion coefficient `A(x) = diag(a1(x), a2(x))` sampled on a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagonalDiffusion {
    pub a1: Vec<f64>,
    pub a2: Vec<f64>,
}

impl DiagonalDiffusion {
    pub fn constant(grid: &GridSpec2d, a1: f64, a2: f64) -> Self {
        Self {
            a1: vec![a1; grid.len()],
            a2: vec![a2; grid.len()],
        }
    }

    pub fn scaled(&self, k: f64) -> Self {
        Self {
            a1: self.a1.iter().map(|a| a * k).collect(),
            a2: self.a2.iter().map(|a| a * k).collect(),
        }
    }
}

/// Builds the chain with rates
/// `q(x, y) = sqrt(a_i(x) a_i(y)) sqrt(pi(y) / pi(x)) / h^2` between
/// neighbours along axis `i`, where `pi ∝ e^V`. Detailed balance holds
/// by construction.
pub fn from_reversible_diffusion_2d(
    grid: &GridSpec2d,
    potential: &[f64],
    diffusion: &DiagonalDiffusion,
) -> Result<(CtmcModel, StationaryDistribution)> {
    let n = grid.len();
    if grid.nx < 2 || grid.ny < 2 {
        return Err(Error::InvalidConfig(
            "grid needs at least 2 nodes per axis".into(),
        ));
    }
    if !(grid.h > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "grid spacing must be positive, got {}",
            grid.h
        )));
    }
    for (what, len) in [
        ("V", potential.len()),
        ("a1", diffusion.a1.len()),
        ("a2", diffusion.a2.len()),
    ] {
        if len != n {
            return Err(Error::InvalidConfig(format!(
                "{what} has {len} samples, grid has {n}"
            )));
        }
    }
    for (axis, coeff) in [(1, &diffusion.a1), (2, &diffusion.a2)] {
        if let Some(k) = coeff.iter().position(|a| !(*a > 0.0) || !a.is_finite()) {
            let (x, y) = grid.point(k);
            return Err(Error::NonpositiveCoefficient {
                location: format!("a{axis} at ({x}, {y})"),
                value: coeff[k],
            });
        }
    }
    let vmax = potential.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !vmax.is_finite() {
        return Err(Error::InvalidConfig("potential must be finite".into()));
    }
    let weights: Vec<f64> = potential.iter().map(|v| (v - vmax).exp()).collect();
    let total: f64 = weights.iter().sum();
    let pi = DVector::from_iterator(n, weights.iter().map(|w| w / total));

    let h2 = grid.h * grid.h;
    let mut q = DMatrix::zeros(n, n);
    let mut link = |x: usize, y: usize, a: &[f64]| {
        let rate = (a[x] * a[y]).sqrt() * (pi[y] / pi[x]).sqrt() / h2;
        q[(x, y)] += rate;
        q[(y, x)] += (a[x] * a[y]).sqrt() * (pi[x] / pi[y]).sqrt() / h2;
    };
    for j in 0..grid.ny {
        for i in 0..grid.nx {
            let x = grid.index(i, j);
            if i + 1 < grid.nx {
                link(x, grid.index(i + 1, j), &diffusion.a1);
            } else if grid.periodic && grid.nx > 2 {
                link(x, grid.index(0, j), &diffusion.a1);
            }
            if j + 1 < grid.ny {
                link(x, grid.index(i, j + 1), &diffusion.a2);
            } else if grid.periodic && grid.ny > 2 {
                link(x, grid.index(i, 0), &diffusion.a2);
            }
        }
    }
    for x in 0..n {
        let out: f64 = q.row(x).iter().sum();
        q[(x, x)] = -out;
    }
    let model = CtmcModel::from_matrix(q)?;
    Ok((model, StationaryDistribution::new(pi)?))
}
