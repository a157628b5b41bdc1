//! The coupling matrix `A` (one FDTD step as a linear map on `[p; ox; oy]`)
//! and the reservoir weights derived from it.
//!
//! With `W = (A - (1 - α) I) / α`, the leaky reservoir update
//! `x' = (1 - α) x + α f(W x + ...)` reduces to `x' = A x` when `f` is the
//! identity and the input and bias vanish.

use crate::error::{check_len, invalid, Result};
use crate::fdtd::coupling_coefficients;
use crate::fields::{DampingField, SpeedField};
use crate::grid::GridSpec;
use crate::sparse::CsrMatrix;

/// Sparse `3n² × 3n²` matrix applying one explicit FDTD step.
#[derive(Clone, Debug, PartialEq)]
pub struct CouplingMatrix {
    matrix: CsrMatrix,
}

impl CouplingMatrix {
    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.matrix.mul_vec(x)
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }
}

/// Upper bound on the nonzeros in one row of `A`: an o-row combines its own
/// retention term with the two pressure rows it differences, which share
/// the o-neuron itself.
pub const MAX_ROW_NNZ: usize = 9;

/// Assembles `A` from the stencil. Each row is written out term by term from
/// the update formulas rather than by probing the stepper.
pub fn build_coupling_matrix(
    c: &SpeedField,
    k: &DampingField,
    spec: &GridSpec,
) -> Result<CouplingMatrix> {
    spec.validate()?;
    check_len("speed field", spec.cells(), c.values().len())?;
    check_len("kx", spec.cells(), k.kx.len())?;
    check_len("ky", spec.cells(), k.ky.len())?;
    let n = spec.n;
    let g = coupling_coefficients(c, spec);

    // Linear form of the updated pressure p'[i][j] over the old state.
    let pressure_row = |i: usize, j: usize| -> Vec<(usize, f64)> {
        let gij = g[spec.flat(i, j)];
        let mut row = vec![(spec.p_index(i, j), 1.0)];
        if spec.ox_active(i, j) {
            row.push((spec.ox_index(i, j), -gij));
        }
        if j > 0 && spec.ox_active(i, j - 1) {
            row.push((spec.ox_index(i, j - 1), gij));
        }
        if spec.oy_active(i, j) {
            row.push((spec.oy_index(i, j), -gij));
        }
        if i > 0 && spec.oy_active(i - 1, j) {
            row.push((spec.oy_index(i - 1, j), gij));
        }
        row
    };
    let negate = |row: Vec<(usize, f64)>| row.into_iter().map(|(c, v)| (c, -v));

    let mut rows = Vec::with_capacity(spec.state_dim());
    for i in 0..n {
        for j in 0..n {
            rows.push(pressure_row(i, j));
        }
    }
    let conv = spec.k_convention;
    for i in 0..n {
        for j in 0..n {
            let mut row = Vec::new();
            if spec.ox_active(i, j) {
                row.push((spec.ox_index(i, j), conv.retention(k.kx_at(i, j))));
                row.extend(pressure_row(i, j));
                if j + 1 < n {
                    row.extend(negate(pressure_row(i, j + 1)));
                }
            }
            rows.push(row);
        }
    }
    for i in 0..n {
        for j in 0..n {
            let mut row = Vec::new();
            if spec.oy_active(i, j) {
                row.push((spec.oy_index(i, j), conv.retention(k.ky_at(i, j))));
                row.extend(pressure_row(i, j));
                if i + 1 < n {
                    row.extend(negate(pressure_row(i + 1, j)));
                }
            }
            rows.push(row);
        }
    }
    let matrix = CsrMatrix::from_rows(spec.state_dim(), rows);
    debug_assert!(matrix.max_row_nnz() <= MAX_ROW_NNZ);
    Ok(CouplingMatrix { matrix })
}

/// `W = (A - (1 - α) I) / α`.
pub fn coupling_to_reservoir_weights(a: &CouplingMatrix, alpha: f64) -> Result<CsrMatrix> {
    check_alpha(alpha)?;
    Ok(a.matrix.shifted_scaled(-(1.0 - alpha), 1.0 / alpha))
}

pub(crate) fn check_alpha(alpha: f64) -> Result<()> {
    if alpha.is_finite() && alpha > 0.0 && alpha <= 1.0 {
        Ok(())
    } else {
        Err(invalid(format!(
            "leak rate must lie in (0, 1], got {alpha}"
        )))
    }
}
