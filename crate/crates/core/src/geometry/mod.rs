//! Vorticity-direction geometry: direction sets, double cones, great-circle
//! obstruction, alignment moduli and the stretching integral.

mod align;
mod cone;
mod stretch;

pub use align::{cf_determinant, holder_modulus, pairwise_alignment, HolderExponent, HolderModulus};
pub use cone::{
    cone_constant, cone_deficiency, cone_deficiency_with, delta_from_alignment,
    great_circle_obstruction, ConeFit, ConeOptions, Obstruction,
};
pub use stretch::{stretching_factor, stretching_factor_with, StretchMethod, Stretching, StretchingOptions};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fields::{norm, periodic_delta, CylinderRegion, FieldError, VectorField};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("threshold must be nonnegative and finite, got {0}")]
    Threshold(f64),
    #[error("no direction samples")]
    NoData,
    #[error("vorticity vanishes at the evaluation point")]
    VanishingVorticity,
    #[error("invalid option: {0}")]
    Options(String),
    #[error(transparent)]
    Field(#[from] FieldError),
}

/// One vorticity direction `xi = omega / |omega|` with its base point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DirectionSample {
    pub position: [f64; 3],
    pub direction: [f64; 3],
    pub magnitude: f64,
}

impl DirectionSample {
    /// Normalises `omega`; `None` where it vanishes.
    pub fn from_vorticity(position: [f64; 3], omega: [f64; 3]) -> Option<Self> {
        let magnitude = norm(omega);
        if !(magnitude > 0.0 && magnitude.is_finite()) {
            return None;
        }
        let direction = [omega[0] / magnitude, omega[1] / magnitude, omega[2] / magnitude];
        Some(Self {
            position,
            direction,
            magnitude,
        })
    }

    /// A bare direction, normalised, at the origin.
    pub fn direction_only(d: [f64; 3]) -> Option<Self> {
        Self::from_vorticity([0.0; 3], d).map(|mut s| {
            s.magnitude = 1.0;
            s
        })
    }
}

/// Directions of all nodes where `|omega| > threshold`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirectionSet {
    pub samples: Vec<DirectionSample>,
    pub threshold: f64,
    pub region: Option<CylinderRegion>,
    /// Box period for the distance metric; `None` for free space.
    pub period: Option<[f64; 3]>,
}

impl DirectionSet {
    pub fn from_directions(dirs: &[[f64; 3]]) -> Self {
        Self {
            samples: dirs.iter().filter_map(|d| DirectionSample::direction_only(*d)).collect(),
            threshold: 0.0,
            region: None,
            period: None,
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn directions(&self) -> Vec<[f64; 3]> {
        self.samples.iter().map(|s| s.direction).collect()
    }

    pub(crate) fn distance(&self, a: [f64; 3], b: [f64; 3]) -> f64 {
        norm(periodic_delta(self.period, a, b))
    }
}

/// Direction samples at every grid node with `|omega| > m`.
pub fn direction_field(omega: &VectorField, m: f64) -> Result<DirectionSet, GeometryError> {
    collect(omega, m, None)
}

/// As [`direction_field`], restricted to the spatial part of `region`.
pub fn direction_field_in(
    omega: &VectorField,
    m: f64,
    region: CylinderRegion,
) -> Result<DirectionSet, GeometryError> {
    collect(omega, m, Some(region))
}

fn collect(
    omega: &VectorField,
    m: f64,
    region: Option<CylinderRegion>,
) -> Result<DirectionSet, GeometryError> {
    if !(m.is_finite() && m >= 0.0) {
        return Err(GeometryError::Threshold(m));
    }
    let grid = omega.grid;
    let period = Some(grid.len);
    let samples = (0..grid.len())
        .filter_map(|idx| {
            let x = grid.position(idx);
            if let Some(r) = &region {
                let d = periodic_delta(period, x, r.center);
                let local = [r.center[0] + d[0], r.center[1] + d[1], r.center[2] + d[2]];
                if !r.contains(local) {
                    return None;
                }
            }
            let w = omega.at(idx);
            let s = DirectionSample::from_vorticity(x, w)?;
            (s.magnitude > m).then_some(s)
        })
        .collect();
    Ok(DirectionSet {
        samples,
        threshold: m,
        region,
        period,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{curl, AnalyticField, GridSpec};
    use crate::quad::Shape;

    #[test]
    fn shear_vorticity_points_along_the_vertical() {
        let g = GridSpec::cube(16).unwrap();
        let w = VectorField::from_fn(g, 0.0, |x| [0.0, 0.0, -x[1].cos()]);
        let ds = direction_field(&w, 0.0).unwrap();
        assert!(!ds.is_empty());
        for s in &ds.samples {
            assert_eq!(s.direction[0], 0.0);
            assert_eq!(s.direction[1], 0.0);
            assert_eq!(s.direction[2].abs(), 1.0);
            assert_eq!(s.direction[2], -s.position[1].cos().signum());
        }
    }

    #[test]
    fn threshold_at_maximum_is_empty() {
        let g = GridSpec::cube(16).unwrap();
        let v = AnalyticField::abc(1.0, 0.8, 0.6, 1.0).sample(g, 0.0);
        let w = curl(&v).unwrap();
        let ds = direction_field(&w, w.max_norm()).unwrap();
        assert!(ds.is_empty());
        assert!(direction_field(&w, -1.0).is_err());
    }

    #[test]
    fn region_filter_keeps_only_interior_nodes() {
        let g = GridSpec::cube(16).unwrap();
        let w = VectorField::from_fn(g, 0.0, |_| [0.0, 0.0, 1.0]);
        let r = CylinderRegion::new(1.0, [0.1, 0.1, 0.1], 0.0, Shape::Ball).unwrap();
        let ds = direction_field_in(&w, 0.0, r).unwrap();
        let brute = (0..g.len())
            .filter(|&i| norm(periodic_delta(Some(g.len), g.position(i), r.center)) < 1.0)
            .count();
        assert_eq!(ds.len(), brute);
        assert!(brute > 0);
    }
}
