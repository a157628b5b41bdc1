//! Conventional random sparse reservoir used as the comparison baseline.
//! It shares the input convention, leak rate and noise of the wave model;
//! only `W` differs.

use rand::Rng;

use crate::error::{invalid, Error, Result};
use crate::grid::GridSpec;
use crate::reservoir::{fast_row_input_weights, ReservoirModel, ReservoirParams, WeightSource};
use crate::rng::{derive_seed, seeded};
use crate::sparse::CsrMatrix;
use crate::spectral::{estimate_spectral_radius, PowerIteration};

/// Attempts with fresh seeds before giving up on a radius estimate.
const MAX_ATTEMPTS: u64 = 5;

/// Draws a `dim × dim` matrix whose entries are nonzero with probability
/// `density`, uniform on `(-1, 1)`, then rescales it to `spectral_radius`.
pub fn random_weights(
    dim: usize,
    density: f64,
    spectral_radius: f64,
    seed: u64,
) -> Result<CsrMatrix> {
    if !(density > 0.0 && density < 1.0) {
        return Err(invalid(format!(
            "density must lie in (0, 1), got {density}"
        )));
    }
    if !(spectral_radius.is_finite() && spectral_radius > 0.0) {
        return Err(invalid(format!(
            "spectral radius must be positive, got {spectral_radius}"
        )));
    }
    let mut rng = seeded(seed);
    let rows = (0..dim).map(|_| {
        let mut row = Vec::new();
        for col in 0..dim {
            if rng.gen::<f64>() < density {
                row.push((col, rng.gen_range(-1.0..1.0)));
            }
        }
        row
    });
    let raw = CsrMatrix::from_rows(dim, rows.collect::<Vec<_>>());
    let opts = PowerIteration {
        seed: derive_seed(seed, &[1]),
        ..PowerIteration::default()
    };
    let rho = estimate_spectral_radius(&raw, &opts)?;
    if rho == 0.0 {
        return Err(Error::Numerical("random matrix is nilpotent".into()));
    }
    Ok(raw.scaled(spectral_radius / rho))
}

/// Builds the baseline reservoir. If the radius estimate does not settle the
/// matrix is redrawn with a derived seed; the seed actually used is kept in
/// the model so rebuilding is deterministic.
pub fn random_reservoir(
    spec: &GridSpec,
    density: f64,
    spectral_radius: f64,
    seed: u64,
    params: &ReservoirParams,
    input_seed: u64,
) -> Result<ReservoirModel> {
    spec.validate()?;
    params.validate()?;
    let mut last_err = None;
    for attempt in 0..MAX_ATTEMPTS {
        let used = if attempt == 0 {
            seed
        } else {
            derive_seed(seed, &[attempt])
        };
        match random_weights(spec.state_dim(), density, spectral_radius, used) {
            Ok(_) => {
                let w_in = fast_row_input_weights(spec, params.input_gain, input_seed);
                let source = WeightSource::Random {
                    density,
                    spectral_radius,
                    seed: used,
                };
                return ReservoirModel::from_parts(spec.clone(), *params, input_seed, w_in, source);
            }
            Err(e @ Error::Numerical(_)) => {
                log::warn!("random reservoir attempt {attempt} failed: {e}");
                last_err = Some(e);
            }
            Err(e) => return Err(e),
        }
    }
    Err(last_err.unwrap_or_else(|| Error::Numerical("no attempts made".into())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::dense_spectral_radius;

    #[test]
    fn rescaled_radius_matches_dense_eigenvalues() {
        let w = random_weights(300, 0.05, 0.95, 3).unwrap();
        let exact = dense_spectral_radius(&w).unwrap();
        assert!((exact - 0.95).abs() / 0.95 < 0.01, "{exact}");
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(random_weights(10, 0.0, 0.9, 0).is_err());
        assert!(random_weights(10, 1.0, 0.9, 0).is_err());
        assert!(random_weights(10, 0.5, 0.0, 0).is_err());
    }

    #[test]
    fn baseline_shares_input_convention() {
        let spec = GridSpec::new(6, 0.006, 300.0).unwrap();
        let params = ReservoirParams::default();
        let m = random_reservoir(&spec, 0.05, 0.95, 1, &params, 2).unwrap();
        let wave_in = fast_row_input_weights(&spec, params.input_gain, 2);
        assert_eq!(m.w_in, wave_in);
        assert!(m.speed_field().is_none());
    }
}
