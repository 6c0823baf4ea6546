use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Choice of the free parameter in the least-change polyhedron update.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NuPolicy {
    /// Stay as close as possible to the current edge lengths.
    #[default]
    Current,
    /// Pull towards uniform edge lengths.
    Ones,
}

/// Which root of the area quadratic to keep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RootPolicy {
    /// Root closest to the current critical edge length.
    #[default]
    Near,
    Low,
    High,
}

impl std::str::FromStr for NuPolicy {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "current" => Ok(NuPolicy::Current),
            "ones" => Ok(NuPolicy::Ones),
            other => Err(format!("unknown nu policy `{other}` (expected current|ones)")),
        }
    }
}

impl std::str::FromStr for RootPolicy {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "near" => Ok(RootPolicy::Near),
            "low" => Ok(RootPolicy::Low),
            "high" => Ok(RootPolicy::High),
            other => Err(format!("unknown root policy `{other}` (expected near|low|high)")),
        }
    }
}

/// Tolerances and policies shared by every solver stage.
///
/// All tolerances are relative; see the individual fields for the quantity
/// each one is scaled by.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    /// Face planarity, relative to the face's bounding-box diagonal.
    pub tol_planar: f64,
    /// Vertex reconstruction closure, relative to the largest edge length.
    pub tol_closure: f64,
    /// RREF zero threshold, relative to the largest matrix entry.
    pub tol_pivot: f64,
    /// Singular-value cutoff, relative to the largest singular value.
    pub rcond: f64,
    /// Solvability residual, relative to `1 + |b|`.
    pub tol_solve: f64,
    /// Achieved-area check, relative to the face perimeter squared.
    pub tol_area: f64,
    /// Zero-force threshold, relative to the face perimeter squared.
    pub tol_zero: f64,
    pub nu_policy: NuPolicy,
    pub root_policy: RootPolicy,
    /// Uniform value of the dual's free parameter; only ratios are meaningful.
    pub xi_scale: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            tol_planar: 1e-6,
            tol_closure: 1e-7,
            tol_pivot: 1e-10,
            rcond: 1e-12,
            tol_solve: 1e-8,
            tol_area: 1e-8,
            tol_zero: 1e-8,
            nu_policy: NuPolicy::Current,
            root_policy: RootPolicy::Near,
            xi_scale: 1.0,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let tolerances = [
            ("tol_planar", self.tol_planar),
            ("tol_closure", self.tol_closure),
            ("tol_pivot", self.tol_pivot),
            ("rcond", self.rcond),
            ("tol_solve", self.tol_solve),
            ("tol_area", self.tol_area),
            ("tol_zero", self.tol_zero),
        ];
        for (name, value) in tolerances {
            if !(value > 0.0 && value.is_finite()) {
                return Err(Error::InvalidDocument(format!(
                    "tolerance {name} must be positive and finite, got {value}"
                )));
            }
        }
        if !(self.xi_scale.is_finite() && self.xi_scale != 0.0) {
            return Err(Error::InvalidDocument(format!(
                "xi_scale must be finite and nonzero, got {}",
                self.xi_scale
            )));
        }
        Ok(())
    }
}
