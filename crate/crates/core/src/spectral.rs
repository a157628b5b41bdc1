//! Spectral-radius computations: exact (dense eigenvalues) for small
//! matrices, growth-rate power iteration for large sparse ones.

use nalgebra::{DMatrix, Schur};
use rand::Rng;

use crate::error::{Error, Result};
use crate::rng::seeded;
use crate::sparse::CsrMatrix;

/// Largest eigenvalue modulus from a real Schur decomposition.
/// Cubic in the dimension; intended for `dim ≲ 1000`.
///
/// Shifted QR can stall on matrices with exact structural symmetries; the
/// fallback applies a random orthogonal similarity first, which leaves the
/// spectrum unchanged.
pub fn dense_spectral_radius(m: &CsrMatrix) -> Result<f64> {
    assert_eq!(m.nrows(), m.ncols());
    let dim = m.nrows();
    let dense = DMatrix::from_row_slice(dim, dim, &m.to_dense());
    let max_niter = 200 * dim.max(10);
    if let Some(r) = schur_radius(dense.clone(), max_niter) {
        return Ok(r);
    }
    let mut rng = seeded(0x5eed);
    let g = DMatrix::from_fn(dim, dim, |_, _| rng.gen::<f64>() - 0.5);
    let q = g.qr().q();
    let rotated = q.transpose() * dense * &q;
    schur_radius(rotated, max_niter)
        .ok_or_else(|| Error::Numerical("Schur decomposition did not converge".into()))
}

fn schur_radius(m: DMatrix<f64>, max_niter: usize) -> Option<f64> {
    let schur = Schur::try_new(m, 1e-14, max_niter)?;
    Some(
        schur
            .complex_eigenvalues()
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max),
    )
}

/// Settings for [`estimate_spectral_radius`].
#[derive(Clone, Copy, Debug)]
pub struct PowerIteration {
    /// Iterations discarded before measuring growth.
    pub burn_in: usize,
    /// Iterations over which the growth rate is measured.
    pub span: usize,
    /// Maximum relative disagreement between the two halves of the span.
    pub tolerance: f64,
    pub seed: u64,
}

impl Default for PowerIteration {
    fn default() -> Self {
        Self {
            burn_in: 1000,
            span: 1000,
            tolerance: 2e-3,
            seed: 0,
        }
    }
}

/// Estimates `ρ(M)` as the asymptotic growth rate `‖Mᵏ x‖^(1/k)`.
///
/// Plain Rayleigh-quotient power iteration stalls when the dominant
/// eigenvalues form a complex pair or a dense ring (the generic case for a
/// random matrix); the geometric mean of per-step norm ratios converges in
/// both. The span is split in two and the estimates compared; disagreement
/// beyond `tolerance` is reported as non-convergence.
pub fn estimate_spectral_radius(m: &CsrMatrix, opts: &PowerIteration) -> Result<f64> {
    assert_eq!(m.nrows(), m.ncols());
    let dim = m.nrows();
    if opts.span < 2 {
        return Err(Error::InvalidParameter(
            "power iteration span must be >= 2".into(),
        ));
    }
    let mut rng = seeded(opts.seed);
    let mut x: Vec<f64> = (0..dim).map(|_| rng.gen::<f64>() - 0.5).collect();
    normalize(&mut x);
    let mut y = vec![0.0; dim];

    let step = |x: &mut Vec<f64>, y: &mut Vec<f64>| -> f64 {
        m.mul_vec_into(x, y);
        let norm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            for (xi, yi) in x.iter_mut().zip(y.iter()) {
                *xi = yi / norm;
            }
        }
        norm
    };

    for _ in 0..opts.burn_in {
        if step(&mut x, &mut y) == 0.0 {
            return Ok(0.0);
        }
    }
    let half = opts.span / 2;
    let mut logs = [0.0f64; 2];
    for it in 0..2 * half {
        let norm = step(&mut x, &mut y);
        if norm == 0.0 {
            return Ok(0.0);
        }
        if !norm.is_finite() {
            return Err(Error::Numerical("power iteration overflowed".into()));
        }
        logs[it / half] += norm.ln();
    }
    let first = (logs[0] / half as f64).exp();
    let second = (logs[1] / half as f64).exp();
    let rel = (first - second).abs() / second.max(f64::MIN_POSITIVE);
    if rel > opts.tolerance {
        return Err(Error::Numerical(format!(
            "spectral radius estimate did not settle: {first:.6} vs {second:.6}"
        )));
    }
    Ok(((logs[0] + logs[1]) / (2 * half) as f64).exp())
}

fn normalize(x: &mut [f64]) {
    let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm > 0.0 {
        x.iter_mut().for_each(|v| *v /= norm);
    }
}
