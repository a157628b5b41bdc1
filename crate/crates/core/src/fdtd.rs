//! Direct explicit FDTD stepping of the damped linear wave equations on a
//! staggered grid. This is the reference the coupling matrix is checked
//! against.
//!
//! One step, in leapfrog order (p from the old o, then o from the new p):
//!
//! ```text
//! p'[i][j]  = p[i][j] - g[i][j] * (ox[i][j] - ox[i][j-1] + oy[i][j] - oy[i-1][j])
//! ox'[i][j] = r(kx[i][j]) * ox[i][j] - (p'[i][j+1] - p'[i][j])
//! oy'[i][j] = r(ky[i][j]) * oy[i][j] - (p'[i+1][j] - p'[i][j])
//! ```
//!
//! with `g = λ²/2`, `λ = c / c_ref` the 2D Courant number, and `r(k)` the
//! retention factor of the [`KConvention`](crate::grid::KConvention).
//! Terms before row/column 0 are zero (rigid wall). Past the last row/column
//! the ghost pressure is zero, or the o-neuron is clamped for
//! [`Boundary::Rigid`](crate::grid::Boundary::Rigid).

use crate::error::{check_len, Result};
use crate::fields::{DampingField, SpeedField};
use crate::grid::{GridSpec, WaveState};

/// Pressure coupling coefficient `g = (c/c_ref)² / 2` for every cell.
pub fn coupling_coefficients(c: &SpeedField, spec: &GridSpec) -> Vec<f64> {
    c.values()
        .iter()
        .map(|&v| {
            let courant = v / spec.c_ref;
            0.5 * courant * courant
        })
        .collect()
}

fn check_inputs(
    state: &WaveState,
    c: &SpeedField,
    k: &DampingField,
    spec: &GridSpec,
) -> Result<()> {
    state.check(spec)?;
    check_len("speed field", spec.cells(), c.values().len())?;
    check_len("kx", spec.cells(), k.kx.len())?;
    check_len("ky", spec.cells(), k.ky.len())
}

/// Advances `state` by one explicit step.
pub fn fdtd_step(
    state: &WaveState,
    c: &SpeedField,
    k: &DampingField,
    spec: &GridSpec,
) -> Result<WaveState> {
    check_inputs(state, c, k, spec)?;
    let n = spec.n;
    let g = coupling_coefficients(c, spec);
    let ox = |i: usize, j: usize| {
        if spec.ox_active(i, j) {
            state.ox[i * n + j]
        } else {
            0.0
        }
    };
    let oy = |i: usize, j: usize| {
        if spec.oy_active(i, j) {
            state.oy[i * n + j]
        } else {
            0.0
        }
    };

    let mut next = WaveState::zeros(spec);
    for i in 0..n {
        for j in 0..n {
            let left = if j > 0 { ox(i, j - 1) } else { 0.0 };
            let up = if i > 0 { oy(i - 1, j) } else { 0.0 };
            let div = ox(i, j) - left + oy(i, j) - up;
            next.p[i * n + j] = state.p[i * n + j] - g[i * n + j] * div;
        }
    }
    let conv = spec.k_convention;
    for i in 0..n {
        for j in 0..n {
            let here = next.p[i * n + j];
            if spec.ox_active(i, j) {
                let right = if j + 1 < n {
                    next.p[i * n + j + 1]
                } else {
                    0.0
                };
                next.ox[i * n + j] =
                    conv.retention(k.kx[i * n + j]) * state.ox[i * n + j] - (right - here);
            }
            if spec.oy_active(i, j) {
                let below = if i + 1 < n {
                    next.p[(i + 1) * n + j]
                } else {
                    0.0
                };
                next.oy[i * n + j] =
                    conv.retention(k.ky[i * n + j]) * state.oy[i * n + j] - (below - here);
            }
        }
    }
    Ok(next)
}

/// The quadratic form conserved exactly by an undamped leapfrog step:
///
/// `Σ p²/g + Σ o² + Σ o·(∇p)`, where `∇p` is the forward difference along
/// each o-neuron (ghost pressure zero past the open edges).
///
/// It is positive definite whenever every `g ≤ 1/2`, so conservation bounds
/// the whole state.
pub fn leapfrog_energy(state: &WaveState, c: &SpeedField, spec: &GridSpec) -> Result<f64> {
    state.check(spec)?;
    let n = spec.n;
    let g = coupling_coefficients(c, spec);
    let mut e = 0.0;
    for i in 0..n {
        for j in 0..n {
            let idx = i * n + j;
            let p = state.p[idx];
            e += p * p / g[idx];
            if spec.ox_active(i, j) {
                let o = state.ox[idx];
                let right = if j + 1 < n { state.p[idx + 1] } else { 0.0 };
                e += o * o + o * (right - p);
            }
            if spec.oy_active(i, j) {
                let o = state.oy[idx];
                let below = if i + 1 < n { state.p[idx + n] } else { 0.0 };
                e += o * o + o * (below - p);
            }
        }
    }
    Ok(e)
}
