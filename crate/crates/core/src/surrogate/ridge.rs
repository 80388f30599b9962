//! Weighted ridge regression with an unpenalized intercept.
//!
//! Minimizes
//!
//! ```text
//!     Σᵢ wᵢ (yᵢ − b − xᵢ·β)² + α ‖β‖²
//! ```
//!
//! by solving the weighted normal equations of the design augmented with an
//! all-ones column. The penalty only touches the feature block. Targets are
//! shifted by `y₀` before the solve and the shift is folded back into the
//! intercept, so constant targets give exactly-zero slopes.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative pivot size below which the normal matrix counts as singular.
const PIVOT_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RidgeFit {
    pub coefficients: Vec<f64>,
    pub intercept: f64,
}

impl RidgeFit {
    pub fn predict(&self, row: &[f64]) -> f64 {
        self.intercept
            + row
                .iter()
                .zip(&self.coefficients)
                .map(|(x, b)| x * b)
                .sum::<f64>()
    }
}

pub fn fit_weighted_ridge(
    design: &[Vec<f64>],
    targets: &[f64],
    weights: &[f64],
    alpha: f64,
) -> Result<RidgeFit> {
    let n = design.len();
    if n == 0 {
        return Err(Error::Contract("ridge fit needs at least one row".into()));
    }
    if targets.len() != n || weights.len() != n {
        return Err(Error::Contract(format!(
            "{n} design rows, {} targets, {} weights",
            targets.len(),
            weights.len()
        )));
    }
    if !(alpha >= 0.0 && alpha.is_finite()) {
        return Err(Error::Contract(format!(
            "ridge alpha must be >= 0, got {alpha}"
        )));
    }
    let p = design[0].len();
    if let Some(i) = design.iter().position(|r| r.len() != p) {
        return Err(Error::Contract(format!(
            "design row {i} has the wrong width"
        )));
    }
    if let Some(w) = weights.iter().find(|w| !(**w > 0.0 && w.is_finite())) {
        return Err(Error::Contract(format!(
            "weights must be positive, got {w}"
        )));
    }
    if let Some(y) = targets.iter().find(|y| !y.is_finite()) {
        return Err(Error::Contract(format!("non-finite target {y}")));
    }

    // Augmented system of size p + 1; the intercept is the last unknown.
    let dim = p + 1;
    let shift = targets[0];
    let mut gram = vec![0.0; dim * dim];
    let mut rhs = vec![0.0; dim];
    let mut row = vec![1.0; dim];
    for ((x, &y), &w) in design.iter().zip(targets).zip(weights) {
        row[..p].copy_from_slice(x);
        let y = y - shift;
        for i in 0..dim {
            let wi = w * row[i];
            if wi == 0.0 {
                continue;
            }
            rhs[i] += wi * y;
            for j in 0..=i {
                gram[i * dim + j] += wi * row[j];
            }
        }
    }
    for i in 0..p {
        gram[i * dim + i] += alpha;
    }

    let solution = cholesky_solve(&mut gram, &mut rhs, dim).ok_or_else(|| {
        Error::Singular(format!(
            "weighted normal equations for {n} rows x {p} features are rank deficient"
        ))
    })?;
    Ok(RidgeFit {
        coefficients: solution[..p].to_vec(),
        intercept: solution[p] + shift,
    })
}

/// In-place Cholesky factorization and solve of the symmetric system whose
/// lower triangle is stored in `a`. Returns `None` on a non-positive pivot.
fn cholesky_solve(a: &mut [f64], b: &mut [f64], dim: usize) -> Option<Vec<f64>> {
    let scale = (0..dim)
        .map(|i| a[i * dim + i].abs())
        .fold(0.0, f64::max)
        .max(f64::MIN_POSITIVE);
    for j in 0..dim {
        let mut d = a[j * dim + j];
        for k in 0..j {
            d -= a[j * dim + k] * a[j * dim + k];
        }
        if d.is_nan() || d <= PIVOT_TOLERANCE * scale {
            return None;
        }
        let d = d.sqrt();
        a[j * dim + j] = d;
        for i in j + 1..dim {
            let mut s = a[i * dim + j];
            for k in 0..j {
                s -= a[i * dim + k] * a[j * dim + k];
            }
            a[i * dim + j] = s / d;
        }
    }
    // L z = b
    for i in 0..dim {
        let mut s = b[i];
        for k in 0..i {
            s -= a[i * dim + k] * b[k];
        }
        b[i] = s / a[i * dim + i];
    }
    // Lᵀ x = z
    for i in (0..dim).rev() {
        let mut s = b[i];
        for k in i + 1..dim {
            s -= a[k * dim + i] * b[k];
        }
        b[i] = s / a[i * dim + i];
    }
    Some(b.to_vec())
}
