//! Grid geometry and the stacked `[p; ox; oy]` state layout.
//!
//! Every grid quantity is stored row-major: cell `(i, j)` lives at flat index
//! `i * n + j`. Row 0 is the fast end of the reservoir (where the input is
//! injected), row `n - 1` the slow end.
//!
//! The horizontal intermediate neuron `ox[i][j]` sits between `p[i][j]` and
//! `p[i][j + 1]`; the vertical one `oy[i][j]` between `p[i][j]` and
//! `p[i + 1][j]`. The o-neurons past the last column/row face the grid edge,
//! and what happens there is decided by [`Boundary`].

use serde::{Deserialize, Serialize};

use crate::error::{check_len, invalid, Result};

/// Edge treatment of the FDTD grid.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Boundary {
    /// Rigid walls before row 0 and column 0; pressure-release edges (ghost
    /// `p = 0`) past the last row and column. Every o-neuron is live.
    #[default]
    RigidOpen,
    /// Rigid walls on all four sides. The last-column `ox` and last-row `oy`
    /// neurons are clamped to zero, which leaves a conserved uniform-pressure
    /// mode with eigenvalue exactly 1.
    Rigid,
}

/// How the damping field enters the velocity update.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KConvention {
    /// `o' = (1 - k) o - grad p`: positive `k` removes energy.
    #[default]
    Damping,
    /// `o' = (1 + k) o - grad p`: the literal sign of `d_t o - k o + grad p = 0`.
    Amplifying,
}

impl KConvention {
    /// Multiplier applied to the previous o value.
    #[inline]
    pub fn retention(self, k: f64) -> f64 {
        match self {
            KConvention::Damping => 1.0 - k,
            KConvention::Amplifying => 1.0 + k,
        }
    }
}

/// Size and time discretisation of the square reservoir grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSpec {
    /// Side length in p-cells.
    pub n: usize,
    /// Sample period in seconds.
    pub dt: f64,
    /// Speed at which the 2D Courant number `c dt sqrt(2) / dx` equals one.
    pub c_ref: f64,
    #[serde(default)]
    pub boundary: Boundary,
    #[serde(default)]
    pub k_convention: KConvention,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            n: 40,
            dt: 0.006,
            c_ref: 300.0,
            boundary: Boundary::default(),
            k_convention: KConvention::default(),
        }
    }
}

impl GridSpec {
    pub fn new(n: usize, dt: f64, c_ref: f64) -> Result<Self> {
        let spec = Self {
            n,
            dt,
            c_ref,
            ..Self::default()
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_boundary(mut self, boundary: Boundary) -> Self {
        self.boundary = boundary;
        self
    }

    pub fn with_k_convention(mut self, convention: KConvention) -> Self {
        self.k_convention = convention;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(invalid(format!("grid side n must be >= 2, got {}", self.n)));
        }
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(invalid(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.c_ref.is_finite() && self.c_ref > 0.0) {
            return Err(invalid(format!(
                "c_ref must be positive, got {}",
                self.c_ref
            )));
        }
        Ok(())
    }

    /// Number of p-neurons, `n²`.
    #[inline]
    pub fn cells(&self) -> usize {
        self.n * self.n
    }

    /// Dimension of the stacked state, `3n²`.
    #[inline]
    pub fn state_dim(&self) -> usize {
        3 * self.cells()
    }

    #[inline]
    pub fn flat(&self, i: usize, j: usize) -> usize {
        i * self.n + j
    }

    #[inline]
    pub fn p_index(&self, i: usize, j: usize) -> usize {
        self.flat(i, j)
    }

    #[inline]
    pub fn ox_index(&self, i: usize, j: usize) -> usize {
        self.cells() + self.flat(i, j)
    }

    #[inline]
    pub fn oy_index(&self, i: usize, j: usize) -> usize {
        2 * self.cells() + self.flat(i, j)
    }

    /// Whether `ox[i][j]` is a live neuron (false only for clamped walls).
    #[inline]
    pub fn ox_active(&self, _i: usize, j: usize) -> bool {
        j + 1 < self.n || self.boundary == Boundary::RigidOpen
    }

    #[inline]
    pub fn oy_active(&self, i: usize, _j: usize) -> bool {
        i + 1 < self.n || self.boundary == Boundary::RigidOpen
    }
}

/// One snapshot of the wave variables.
#[derive(Clone, Debug, PartialEq)]
pub struct WaveState {
    pub p: Vec<f64>,
    pub ox: Vec<f64>,
    pub oy: Vec<f64>,
}

impl WaveState {
    pub fn zeros(spec: &GridSpec) -> Self {
        let m = spec.cells();
        Self {
            p: vec![0.0; m],
            ox: vec![0.0; m],
            oy: vec![0.0; m],
        }
    }

    /// Splits a stacked `[p; ox; oy]` vector.
    pub fn from_stacked(spec: &GridSpec, x: &[f64]) -> Result<Self> {
        check_len("stacked state", spec.state_dim(), x.len())?;
        let m = spec.cells();
        Ok(Self {
            p: x[..m].to_vec(),
            ox: x[m..2 * m].to_vec(),
            oy: x[2 * m..].to_vec(),
        })
    }

    pub fn to_stacked(&self) -> Vec<f64> {
        let mut x = Vec::with_capacity(self.p.len() * 3);
        x.extend_from_slice(&self.p);
        x.extend_from_slice(&self.ox);
        x.extend_from_slice(&self.oy);
        x
    }

    pub(crate) fn check(&self, spec: &GridSpec) -> Result<()> {
        let m = spec.cells();
        check_len("p", m, self.p.len())?;
        check_len("ox", m, self.ox.len())?;
        check_len("oy", m, self.oy.len())
    }
}
