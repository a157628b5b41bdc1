//! Speed (`c`) and damping (`k`) fields of the physical reservoir.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, invalid, Result};
use crate::grid::GridSpec;
use crate::rng::seeded;

/// Per-cell wave speed. Larger `c` means faster propagation and higher
/// local resonance frequencies.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpeedField {
    n: usize,
    values: Vec<f64>,
    /// Signed sum of the relative rescalings applied by synchronisation.
    pub scale_accum: f64,
}

impl SpeedField {
    pub fn from_values(spec: &GridSpec, values: Vec<f64>) -> Result<Self> {
        check_len("speed field", spec.cells(), values.len())?;
        let field = Self {
            n: spec.n,
            values,
            scale_accum: 0.0,
        };
        field.validate(spec)?;
        Ok(field)
    }

    pub fn uniform(spec: &GridSpec, c: f64) -> Result<Self> {
        Self::from_values(spec, vec![c; spec.cells()])
    }

    /// Positivity and the Courant ceiling `c <= c_ref`.
    pub fn validate(&self, spec: &GridSpec) -> Result<()> {
        check_len("speed field", spec.cells(), self.values.len())?;
        for (idx, &v) in self.values.iter().enumerate() {
            if !(v.is_finite() && v > 0.0) {
                return Err(invalid(format!(
                    "speed at cell {idx} must be positive, got {v}"
                )));
            }
            if v > spec.c_ref {
                return Err(invalid(format!(
                    "speed {v} at cell {idx} exceeds c_ref {} (Courant violation)",
                    spec.c_ref
                )));
            }
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::MIN, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::MAX, f64::min)
    }

    /// Mean speed of grid row `i`.
    pub fn row_mean(&self, i: usize) -> f64 {
        self.values[i * self.n..(i + 1) * self.n]
            .iter()
            .sum::<f64>()
            / self.n as f64
    }

    /// Multiplies every cell by `factor`, clipping at `c_ref`. Returns the new
    /// field and the number of clipped cells. `scale_accum` is left untouched.
    pub fn scaled(&self, factor: f64, c_ref: f64) -> (Self, usize) {
        let mut clipped = 0;
        let values = self
            .values
            .iter()
            .map(|&v| {
                let s = v * factor;
                if s > c_ref {
                    clipped += 1;
                    c_ref
                } else {
                    s
                }
            })
            .collect();
        (
            Self {
                n: self.n,
                values,
                scale_accum: self.scale_accum,
            },
            clipped,
        )
    }
}

/// Initialises the graded speed field: `c0 + grad_per_row * i - u`, with
/// `u ~ U[0, noise_amp)` drawn row-major from `seed`.
pub fn init_speed_field(
    spec: &GridSpec,
    c0: f64,
    grad_per_row: f64,
    noise_amp: f64,
    seed: u64,
) -> Result<SpeedField> {
    spec.validate()?;
    if !(c0.is_finite() && c0 > 0.0) {
        return Err(invalid(format!("c0 must be positive, got {c0}")));
    }
    if !(noise_amp.is_finite() && noise_amp >= 0.0) {
        return Err(invalid(format!(
            "noise amplitude must be >= 0, got {noise_amp}"
        )));
    }
    let mut rng = seeded(seed);
    let mut values = Vec::with_capacity(spec.cells());
    for i in 0..spec.n {
        for _ in 0..spec.n {
            let u = noise_amp * rng.gen::<f64>();
            values.push(c0 + grad_per_row * i as f64 - u);
        }
    }
    SpeedField::from_values(spec, values)
}

/// Allowed range for damping entries.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KBounds {
    pub min: f64,
    pub max: f64,
}

impl Default for KBounds {
    fn default() -> Self {
        Self {
            min: -0.01,
            max: 0.1,
        }
    }
}

impl KBounds {
    pub fn validate(&self) -> Result<()> {
        if !(self.min.is_finite() && self.max.is_finite() && self.min <= self.max) {
            return Err(invalid(format!(
                "bad damping bounds [{}, {}]",
                self.min, self.max
            )));
        }
        if self.max >= 1.0 {
            return Err(invalid("damping upper bound must stay below 1"));
        }
        Ok(())
    }

    #[inline]
    pub fn contains(&self, k: f64) -> bool {
        k >= self.min && k <= self.max
    }

    #[inline]
    pub fn clamp(&self, k: f64) -> f64 {
        k.clamp(self.min, self.max)
    }
}

/// Per-o-neuron damping: `kx` on horizontal, `ky` on vertical o-neurons.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DampingField {
    n: usize,
    pub kx: Vec<f64>,
    pub ky: Vec<f64>,
}

impl DampingField {
    pub fn from_parts(
        spec: &GridSpec,
        kx: Vec<f64>,
        ky: Vec<f64>,
        bounds: &KBounds,
    ) -> Result<Self> {
        check_len("kx", spec.cells(), kx.len())?;
        check_len("ky", spec.cells(), ky.len())?;
        let field = Self { n: spec.n, kx, ky };
        field.validate(bounds)?;
        Ok(field)
    }

    pub fn validate(&self, bounds: &KBounds) -> Result<()> {
        for (name, grid) in [("kx", &self.kx), ("ky", &self.ky)] {
            if let Some((idx, &k)) = grid.iter().enumerate().find(|(_, k)| !bounds.contains(**k)) {
                return Err(invalid(format!(
                    "{name}[{idx}] = {k} outside [{}, {}]",
                    bounds.min, bounds.max
                )));
            }
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn kx_at(&self, i: usize, j: usize) -> f64 {
        self.kx[i * self.n + j]
    }

    #[inline]
    pub fn ky_at(&self, i: usize, j: usize) -> f64 {
        self.ky[i * self.n + j]
    }

    pub fn iter_all(&self) -> impl Iterator<Item = f64> + '_ {
        self.kx.iter().chain(self.ky.iter()).copied()
    }
}

pub fn init_damping_field(spec: &GridSpec, k0: f64, bounds: &KBounds) -> Result<DampingField> {
    spec.validate()?;
    bounds.validate()?;
    if !bounds.contains(k0) {
        return Err(invalid(format!(
            "initial damping {k0} outside [{}, {}]",
            bounds.min, bounds.max
        )));
    }
    let m = spec.cells();
    DampingField::from_parts(spec, vec![k0; m], vec![k0; m], bounds)
}
