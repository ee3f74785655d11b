use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::FieldError;

/// Uniform periodic grid on the box `[0, L1) x [0, L2) x [0, L3)`.
///
/// Samples are stored x1-fastest: node `(i, j, k)` lives at
/// `i + n1 * (j + n2 * k)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub n: [usize; 3],
    pub len: [f64; 3],
}

impl GridSpec {
    pub fn new(n: [usize; 3], len: [f64; 3]) -> Result<Self, FieldError> {
        for axis in 0..3 {
            if n[axis] < 4 || !n[axis].is_multiple_of(2) {
                return Err(FieldError::InvalidGrid(format!(
                    "axis {} has {} points; need an even count >= 4",
                    axis + 1,
                    n[axis]
                )));
            }
            if !(len[axis].is_finite() && len[axis] > 0.0) {
                return Err(FieldError::InvalidGrid(format!(
                    "axis {} has box length {}",
                    axis + 1,
                    len[axis]
                )));
            }
        }
        Ok(Self { n, len })
    }

    /// `n^3` nodes on the `2 pi` periodic cube.
    pub fn cube(n: usize) -> Result<Self, FieldError> {
        Self::new([n; 3], [2.0 * PI; 3])
    }

    pub fn len(&self) -> usize {
        self.n[0] * self.n[1] * self.n[2]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn spacing(&self) -> [f64; 3] {
        [
            self.len[0] / self.n[0] as f64,
            self.len[1] / self.n[1] as f64,
            self.len[2] / self.n[2] as f64,
        ]
    }

    pub fn min_spacing(&self) -> f64 {
        let h = self.spacing();
        h[0].min(h[1]).min(h[2])
    }

    pub fn cell_volume(&self) -> f64 {
        let h = self.spacing();
        h[0] * h[1] * h[2]
    }

    pub fn volume(&self) -> f64 {
        self.len[0] * self.len[1] * self.len[2]
    }

    /// Largest probe radius accepted on this box: `min(L_i) / 4`.
    pub fn safe_radius(&self) -> f64 {
        self.len[0].min(self.len[1]).min(self.len[2]) / 4.0
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.n[0] * (j + self.n[1] * k)
    }

    #[inline]
    pub fn unindex(&self, idx: usize) -> [usize; 3] {
        let i = idx % self.n[0];
        let rest = idx / self.n[0];
        [i, rest % self.n[1], rest / self.n[1]]
    }

    #[inline]
    pub fn position(&self, idx: usize) -> [f64; 3] {
        let [i, j, k] = self.unindex(idx);
        let h = self.spacing();
        [i as f64 * h[0], j as f64 * h[1], k as f64 * h[2]]
    }

    /// Signed wavenumbers of one axis in FFT order.
    pub fn wavenumbers(&self, axis: usize) -> Vec<f64> {
        let n = self.n[axis];
        let scale = 2.0 * PI / self.len[axis];
        (0..n)
            .map(|m| {
                let m = if m <= n / 2 { m as f64 } else { m as f64 - n as f64 };
                m * scale
            })
            .collect()
    }

    /// Minimum-image displacement `b - a` on the periodic box.
    pub fn periodic_delta(&self, a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
        periodic_delta(Some(self.len), a, b)
    }
}

pub fn periodic_delta(period: Option<[f64; 3]>, a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    let mut d = [b[0] - a[0], b[1] - a[1], b[2] - a[2]];
    if let Some(len) = period {
        for axis in 0..3 {
            let l = len[axis];
            d[axis] -= l * (d[axis] / l).round();
        }
    }
    d
}

/// Real samples on a grid at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    pub grid: GridSpec,
    pub values: Vec<f64>,
    pub time: f64,
}

impl ScalarField {
    pub fn new(grid: GridSpec, values: Vec<f64>, time: f64) -> Result<Self, FieldError> {
        if values.len() != grid.len() {
            return Err(FieldError::LengthMismatch {
                expected: grid.len(),
                found: values.len(),
            });
        }
        if let Some(idx) = values.iter().position(|v| !v.is_finite()) {
            return Err(FieldError::NonFinite { index: idx });
        }
        Ok(Self { grid, values, time })
    }

    pub fn zeros(grid: GridSpec, time: f64) -> Self {
        Self {
            grid,
            values: vec![0.0; grid.len()],
            time,
        }
    }

    pub fn from_fn(grid: GridSpec, time: f64, f: impl Fn([f64; 3]) -> f64) -> Self {
        let values = (0..grid.len()).map(|idx| f(grid.position(idx))).collect();
        Self { grid, values, time }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    pub(crate) fn check_finite(&self) -> Result<(), FieldError> {
        match self.values.iter().position(|v| !v.is_finite()) {
            Some(index) => Err(FieldError::NonFinite { index }),
            None => Ok(()),
        }
    }
}

/// Three components on a shared grid and time.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    pub grid: GridSpec,
    pub components: [Vec<f64>; 3],
    pub time: f64,
}

impl VectorField {
    pub fn new(grid: GridSpec, components: [Vec<f64>; 3], time: f64) -> Result<Self, FieldError> {
        for c in &components {
            if c.len() != grid.len() {
                return Err(FieldError::LengthMismatch {
                    expected: grid.len(),
                    found: c.len(),
                });
            }
        }
        let field = Self {
            grid,
            components,
            time,
        };
        field.check_finite()?;
        Ok(field)
    }

    pub fn zeros(grid: GridSpec, time: f64) -> Self {
        let n = grid.len();
        Self {
            grid,
            components: [vec![0.0; n], vec![0.0; n], vec![0.0; n]],
            time,
        }
    }

    pub fn from_fn(grid: GridSpec, time: f64, f: impl Fn([f64; 3]) -> [f64; 3]) -> Self {
        let mut out = Self::zeros(grid, time);
        for idx in 0..grid.len() {
            let v = f(grid.position(idx));
            for c in 0..3 {
                out.components[c][idx] = v[c];
            }
        }
        out
    }

    pub fn from_scalars(a: ScalarField, b: ScalarField, c: ScalarField) -> Result<Self, FieldError> {
        if a.grid != b.grid || a.grid != c.grid {
            return Err(FieldError::GridMismatch);
        }
        if a.time != b.time || a.time != c.time {
            return Err(FieldError::TimeMismatch);
        }
        Ok(Self {
            grid: a.grid,
            time: a.time,
            components: [a.values, b.values, c.values],
        })
    }

    pub fn component(&self, c: usize) -> ScalarField {
        ScalarField {
            grid: self.grid,
            values: self.components[c].clone(),
            time: self.time,
        }
    }

    #[inline]
    pub fn at(&self, idx: usize) -> [f64; 3] {
        [
            self.components[0][idx],
            self.components[1][idx],
            self.components[2][idx],
        ]
    }

    pub fn magnitude(&self) -> ScalarField {
        let values = (0..self.grid.len()).map(|i| norm(self.at(i))).collect();
        ScalarField {
            grid: self.grid,
            values,
            time: self.time,
        }
    }

    pub fn max_norm(&self) -> f64 {
        (0..self.grid.len()).fold(0.0_f64, |m, i| m.max(norm(self.at(i))))
    }

    pub fn max_abs(&self) -> f64 {
        self.components
            .iter()
            .flat_map(|c| c.iter())
            .fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn means(&self) -> [f64; 3] {
        let n = self.grid.len() as f64;
        [
            self.components[0].iter().sum::<f64>() / n,
            self.components[1].iter().sum::<f64>() / n,
            self.components[2].iter().sum::<f64>() / n,
        ]
    }

    pub fn map_nodes(&self, f: impl Fn([f64; 3]) -> [f64; 3]) -> VectorField {
        let mut out = VectorField::zeros(self.grid, self.time);
        for idx in 0..self.grid.len() {
            let w = f(self.at(idx));
            for c in 0..3 {
                out.components[c][idx] = w[c];
            }
        }
        out
    }

    pub(crate) fn check_finite(&self) -> Result<(), FieldError> {
        for c in &self.components {
            if let Some(index) = c.iter().position(|v| !v.is_finite()) {
                return Err(FieldError::NonFinite { index });
            }
        }
        Ok(())
    }
}

#[inline]
pub fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

#[inline]
pub fn norm(a: [f64; 3]) -> f64 {
    (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_odd_or_tiny_grids() {
        assert!(GridSpec::new([5, 8, 8], [1.0; 3]).is_err());
        assert!(GridSpec::new([2, 8, 8], [1.0; 3]).is_err());
        assert!(GridSpec::new([8, 8, 8], [1.0, -1.0, 1.0]).is_err());
        assert!(GridSpec::new([8, 6, 4], [1.0, 2.0, 3.0]).is_ok());
    }

    #[test]
    fn index_roundtrip_is_x1_fastest() {
        let g = GridSpec::new([4, 6, 8], [1.0; 3]).unwrap();
        assert_eq!(g.index(1, 0, 0), 1);
        assert_eq!(g.index(0, 1, 0), 4);
        assert_eq!(g.index(0, 0, 1), 24);
        for idx in 0..g.len() {
            let [i, j, k] = g.unindex(idx);
            assert_eq!(g.index(i, j, k), idx);
        }
    }

    #[test]
    fn wavenumbers_follow_fft_order() {
        let g = GridSpec::new([8, 8, 8], [PI; 3]).unwrap();
        let k = g.wavenumbers(0);
        assert_eq!(k, vec![0.0, 2.0, 4.0, 6.0, 8.0, -6.0, -4.0, -2.0]);
    }

    #[test]
    fn periodic_delta_uses_minimum_image() {
        let g = GridSpec::cube(8).unwrap();
        let d = g.periodic_delta([0.1, 0.0, 0.0], [2.0 * PI - 0.1, 0.0, 0.0]);
        assert!((d[0] + 0.2).abs() < 1e-12);
    }

    #[test]
    fn non_finite_values_rejected() {
        let g = GridSpec::new([4, 4, 4], [1.0; 3]).unwrap();
        let mut v = vec![0.0; 64];
        v[7] = f64::NAN;
        assert!(matches!(
            ScalarField::new(g, v, 0.0),
            Err(FieldError::NonFinite { index: 7 })
        ));
    }
}
