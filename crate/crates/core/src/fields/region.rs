use serde::{Deserialize, Serialize};

use super::FieldError;
use crate::quad::Shape;

/// Space-time probe `Q(r; x0, t0)`: the spatial shape times `(t0 - r^2, t0)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CylinderRegion {
    pub radius: f64,
    pub center: [f64; 3],
    pub t0: f64,
    pub shape: Shape,
}

impl CylinderRegion {
    pub fn new(radius: f64, center: [f64; 3], t0: f64, shape: Shape) -> Result<Self, FieldError> {
        if !(radius.is_finite() && radius > 0.0) {
            return Err(FieldError::InvalidParameter(format!("region radius {radius}")));
        }
        Ok(Self {
            radius,
            center,
            t0,
            shape,
        })
    }

    pub fn t_start(&self) -> f64 {
        self.t0 - self.radius * self.radius
    }

    /// Rejects regions that would overlap their periodic images.
    pub fn check_fits(&self, safe_radius: Option<f64>) -> Result<(), FieldError> {
        match safe_radius {
            Some(limit) if self.radius > limit * (1.0 + 1e-12) => Err(FieldError::RegionTooLarge {
                radius: self.radius,
                limit,
            }),
            _ => Ok(()),
        }
    }

    pub fn contains(&self, x: [f64; 3]) -> bool {
        let d = [x[0] - self.center[0], x[1] - self.center[1], x[2] - self.center[2]];
        match self.shape {
            Shape::Ball => d[0] * d[0] + d[1] * d[1] + d[2] * d[2] < self.radius * self.radius,
            Shape::AxisCylinder => {
                d[0] * d[0] + d[1] * d[1] < self.radius * self.radius && d[2].abs() < self.radius
            }
        }
    }
}

/// Horizontal disc `{|x_h - c_h| < r, x3 = z}` at time `t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiscSpec {
    pub r: f64,
    pub z: f64,
    pub t: f64,
    /// Horizontal center; the axis of the probe.
    pub center: [f64; 2],
}

impl DiscSpec {
    pub fn new(r: f64, z: f64, t: f64, center: [f64; 2]) -> Result<Self, FieldError> {
        if !(r.is_finite() && r >= 0.0) {
            return Err(FieldError::InvalidParameter(format!("disc radius {r}")));
        }
        Ok(Self { r, z, t, center })
    }

    pub fn check_fits(&self, safe_radius: Option<f64>) -> Result<(), FieldError> {
        match safe_radius {
            Some(limit) if self.r > limit * (1.0 + 1e-12) => Err(FieldError::RegionTooLarge {
                radius: self.r,
                limit,
            }),
            _ => Ok(()),
        }
    }
}
