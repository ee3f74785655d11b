//! Closed-form velocity fields used as exact references.
//!
//! Each field is a finite sum of plane waves with exponential time factors,
//! so values, derivatives of any order, the induced pressure and the
//! Navier-Stokes rescaling are all available in closed form.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::grid::{GridSpec, VectorField};
use super::trig::{ScalarMode, TrigScalar, TrigVector};

/// One vector plane wave: `(a cos(k.x) + b sin(k.x)) e^{-decay t}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VelocityMode {
    pub wave: [f64; 3],
    pub cos: [f64; 3],
    pub sin: [f64; 3],
    pub decay: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum AnalyticKind {
    /// `(sin x cos y cos z, -cos x sin y cos z, 0)` under Stokes decay.
    TaylorGreen { amplitude: f64 },
    /// `(sin x cos y, -cos x sin y, 0) e^{-2t}`, an exact solution.
    TaylorGreen2d { amplitude: f64 },
    /// Beltrami field with curl eigenvalue `k`, exact solution decaying as `e^{-k^2 t}`.
    Abc { a: f64, b: f64, c: f64, k: f64 },
    /// `(amplitude sin(k x2), 0, 0)`, exact solution decaying as `e^{-k^2 t}`.
    Shear { amplitude: f64, k: f64 },
    /// User supplied plane waves.
    Custom,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalyticField {
    pub kind: AnalyticKind,
    pub modes: Vec<VelocityMode>,
}

impl AnalyticField {
    pub fn abc(a: f64, b: f64, c: f64, k: f64) -> Self {
        let d = k * k;
        let modes = vec![
            VelocityMode { wave: [0.0, 0.0, k], cos: [0.0, a, 0.0], sin: [a, 0.0, 0.0], decay: d },
            VelocityMode { wave: [k, 0.0, 0.0], cos: [0.0, 0.0, b], sin: [0.0, b, 0.0], decay: d },
            VelocityMode { wave: [0.0, k, 0.0], cos: [c, 0.0, 0.0], sin: [0.0, 0.0, c], decay: d },
        ];
        Self {
            kind: AnalyticKind::Abc { a, b, c, k },
            modes,
        }
    }

    pub fn taylor_green(amplitude: f64) -> Self {
        let v1 = sin1(0).mul(&cos1(1)).mul(&cos1(2));
        let v2 = cos1(0).mul(&sin1(1)).mul(&cos1(2));
        let mut field = Self::from_components([&scaled(&v1, amplitude), &scaled(&v2, -amplitude), &TrigScalar::default()]);
        field.apply_stokes_decay();
        field.kind = AnalyticKind::TaylorGreen { amplitude };
        field
    }

    pub fn taylor_green_2d(amplitude: f64) -> Self {
        let v1 = sin1(0).mul(&cos1(1));
        let v2 = cos1(0).mul(&sin1(1));
        let mut field = Self::from_components([&scaled(&v1, amplitude), &scaled(&v2, -amplitude), &TrigScalar::default()]);
        field.apply_stokes_decay();
        field.kind = AnalyticKind::TaylorGreen2d { amplitude };
        field
    }

    pub fn shear(amplitude: f64, k: f64) -> Self {
        Self {
            kind: AnalyticKind::Shear { amplitude, k },
            modes: vec![VelocityMode {
                wave: [0.0, k, 0.0],
                cos: [0.0; 3],
                sin: [amplitude, 0.0, 0.0],
                decay: k * k,
            }],
        }
    }

    /// Spatially constant, steady velocity.
    pub fn constant(c: [f64; 3]) -> Self {
        Self::custom(vec![VelocityMode {
            wave: [0.0; 3],
            cos: c,
            sin: [0.0; 3],
            decay: 0.0,
        }])
    }

    pub fn custom(modes: Vec<VelocityMode>) -> Self {
        Self {
            kind: AnalyticKind::Custom,
            modes,
        }
    }

    /// Sum of two fields (kind becomes `Custom`).
    pub fn plus(&self, other: &AnalyticField) -> Self {
        let mut modes = self.modes.clone();
        modes.extend_from_slice(&other.modes);
        Self::custom(modes)
    }

    pub fn scaled(&self, s: f64) -> Self {
        let modes = self
            .modes
            .iter()
            .map(|m| VelocityMode {
                cos: m.cos.map(|a| a * s),
                sin: m.sin.map(|b| b * s),
                ..*m
            })
            .collect();
        Self {
            kind: AnalyticKind::Custom,
            modes,
        }
    }

    fn from_components(c: [&TrigScalar; 3]) -> Self {
        let mut merged: BTreeMap<([u64; 3], u64), VelocityMode> = BTreeMap::new();
        for (comp, poly) in c.iter().enumerate() {
            for m in &poly.modes {
                let key = (m.wave.map(f64::to_bits), m.decay.to_bits());
                let e = merged.entry(key).or_insert(VelocityMode {
                    wave: m.wave,
                    cos: [0.0; 3],
                    sin: [0.0; 3],
                    decay: m.decay,
                });
                e.cos[comp] += m.cos;
                e.sin[comp] += m.sin;
            }
        }
        Self::custom(merged.into_values().collect())
    }

    fn apply_stokes_decay(&mut self) {
        for m in &mut self.modes {
            m.decay = m.wave.iter().map(|k| k * k).sum();
        }
    }

    pub fn component(&self, c: usize) -> TrigScalar {
        TrigScalar {
            modes: self
                .modes
                .iter()
                .map(|m| ScalarMode {
                    wave: m.wave,
                    cos: m.cos[c],
                    sin: m.sin[c],
                    decay: m.decay,
                })
                .filter(|m| m.cos != 0.0 || m.sin != 0.0)
                .collect(),
        }
    }

    /// The velocity frozen at time `t`.
    pub fn at(&self, t: f64) -> TrigVector {
        let mut out = TrigVector::empty();
        for m in &self.modes {
            let f = (-m.decay * t).exp();
            out.push(m.wave, m.cos.map(|a| a * f), m.sin.map(|b| b * f));
        }
        out
    }

    pub fn velocity(&self, x: [f64; 3], t: f64) -> [f64; 3] {
        self.at(t).value(x)
    }

    /// Pressure solving `-Delta p = div(v . grad v)`, without its constant part.
    pub fn pressure(&self) -> TrigScalar {
        let comps: Vec<TrigScalar> = (0..3).map(|c| self.component(c)).collect();
        let mut rhs = TrigScalar::default();
        for i in 0..3 {
            for j in i..3 {
                let prod = comps[i].mul(&comps[j]);
                let w = if i == j { 1.0 } else { 2.0 };
                // Delta p = -d_i d_j (v_i v_j)
                rhs.add_scaled(&prod.second_derivative(i, j), -w);
            }
        }
        rhs.inverse_laplacian()
    }

    /// Nodal samples at time `t`.
    pub fn sample(&self, grid: GridSpec, t: f64) -> VectorField {
        let trig = self.at(t);
        VectorField::from_fn(grid, t, |x| trig.value(x))
    }

    /// `lambda v(x0 + lambda x, t0 + lambda^2 t)`, again in closed form.
    pub fn rescale(&self, lambda: f64, x0: [f64; 3], t0: f64) -> AnalyticField {
        let modes = self
            .modes
            .iter()
            .map(|m| {
                let phase = m.wave[0] * x0[0] + m.wave[1] * x0[1] + m.wave[2] * x0[2];
                let (s, c) = phase.sin_cos();
                let f = lambda * (-m.decay * t0).exp();
                VelocityMode {
                    wave: m.wave.map(|k| k * lambda),
                    cos: std::array::from_fn(|i| f * (m.cos[i] * c + m.sin[i] * s)),
                    sin: std::array::from_fn(|i| f * (m.sin[i] * c - m.cos[i] * s)),
                    decay: m.decay * lambda * lambda,
                }
            })
            .collect();
        AnalyticField {
            kind: AnalyticKind::Custom,
            modes,
        }
    }

    /// Largest pointwise `|div v|` bound from the coefficients.
    pub fn divergence_bound(&self) -> f64 {
        self.modes
            .iter()
            .map(|m| {
                let kc: f64 = (0..3).map(|i| m.wave[i] * m.cos[i]).sum();
                let ks: f64 = (0..3).map(|i| m.wave[i] * m.sin[i]).sum();
                kc.abs() + ks.abs()
            })
            .sum()
    }
}

fn sin1(axis: usize) -> TrigScalar {
    let mut wave = [0.0; 3];
    wave[axis] = 1.0;
    TrigScalar {
        modes: vec![ScalarMode { wave, cos: 0.0, sin: 1.0, decay: 0.0 }],
    }
}

fn cos1(axis: usize) -> TrigScalar {
    let mut wave = [0.0; 3];
    wave[axis] = 1.0;
    TrigScalar {
        modes: vec![ScalarMode { wave, cos: 1.0, sin: 0.0, decay: 0.0 }],
    }
}

fn scaled(p: &TrigScalar, s: f64) -> TrigScalar {
    TrigScalar {
        modes: p
            .modes
            .iter()
            .map(|m| ScalarMode {
                cos: m.cos * s,
                sin: m.sin * s,
                ..*m
            })
            .collect(),
    }
}
