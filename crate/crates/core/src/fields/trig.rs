//! Exact trigonometric-polynomial fields.
//!
//! Every field the diagnostics touch is a finite sum of plane waves: the
//! built-in analytic flows by construction, sampled snapshots through their
//! discrete Fourier series. Keeping that form lets us evaluate values and
//! derivatives of any order at arbitrary points without interpolation error.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

/// Value, gradient and Hessian of a 3-component field at one point.
///
/// `grad[c][i] = d_i f_c`, `hess[c][i][j] = d_i d_j f_c`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Jet {
    pub val: [f64; 3],
    pub grad: [[f64; 3]; 3],
    pub hess: [[[f64; 3]; 3]; 3],
}

impl Jet {
    pub fn laplacian(&self, c: usize) -> f64 {
        self.hess[c][0][0] + self.hess[c][1][1] + self.hess[c][2][2]
    }

    pub fn divergence(&self) -> f64 {
        self.grad[0][0] + self.grad[1][1] + self.grad[2][2]
    }

    /// Frobenius norm of the gradient tensor.
    pub fn grad_norm(&self) -> f64 {
        self.grad
            .iter()
            .flat_map(|r| r.iter())
            .map(|g| g * g)
            .sum::<f64>()
            .sqrt()
    }

    pub fn hess_norm(&self) -> f64 {
        self.hess
            .iter()
            .flat_map(|m| m.iter().flat_map(|r| r.iter()))
            .map(|g| g * g)
            .sum::<f64>()
            .sqrt()
    }
}

/// `a cos(k.x) + b sin(k.x)` for each of three components.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrigVector {
    pub waves: Vec<[f64; 3]>,
    pub cos: Vec<[f64; 3]>,
    pub sin: Vec<[f64; 3]>,
}

impl TrigVector {
    pub fn empty() -> Self {
        Self {
            waves: Vec::new(),
            cos: Vec::new(),
            sin: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.waves.len()
    }

    pub fn is_empty(&self) -> bool {
        self.waves.is_empty()
    }

    pub fn push(&mut self, wave: [f64; 3], cos: [f64; 3], sin: [f64; 3]) {
        self.waves.push(wave);
        self.cos.push(cos);
        self.sin.push(sin);
    }

    /// Exact curl, term by term.
    pub fn curl(&self) -> TrigVector {
        // curl(A cos t + B sin t) = (k x B) cos t - (k x A) sin t
        let mut out = TrigVector::empty();
        for n in 0..self.len() {
            let k = self.waves[n];
            let kb = crate::fields::cross(k, self.sin[n]);
            let ka = crate::fields::cross(k, self.cos[n]);
            out.push(k, kb, [-ka[0], -ka[1], -ka[2]]);
        }
        out
    }

    pub fn value(&self, x: [f64; 3]) -> [f64; 3] {
        let mut v = [0.0; 3];
        for n in 0..self.len() {
            let k = self.waves[n];
            let (s, c) = (k[0] * x[0] + k[1] * x[1] + k[2] * x[2]).sin_cos();
            let a = self.cos[n];
            let b = self.sin[n];
            for comp in 0..3 {
                v[comp] += a[comp] * c + b[comp] * s;
            }
        }
        v
    }

    /// Value and derivatives up to `order` (0, 1 or 2).
    pub fn jet(&self, x: [f64; 3], order: usize) -> Jet {
        let mut jet = Jet::default();
        for n in 0..self.len() {
            let k = self.waves[n];
            let (s, c) = (k[0] * x[0] + k[1] * x[1] + k[2] * x[2]).sin_cos();
            let a = self.cos[n];
            let b = self.sin[n];
            for comp in 0..3 {
                let f0 = a[comp] * c + b[comp] * s;
                jet.val[comp] += f0;
                if order >= 1 {
                    let f1 = b[comp] * c - a[comp] * s;
                    for i in 0..3 {
                        jet.grad[comp][i] += k[i] * f1;
                    }
                    if order >= 2 {
                        for i in 0..3 {
                            for j in i..3 {
                                jet.hess[comp][i][j] -= k[i] * k[j] * f0;
                            }
                        }
                    }
                }
            }
        }
        if order >= 2 {
            for comp in 0..3 {
                for i in 0..3 {
                    for j in 0..i {
                        jet.hess[comp][i][j] = jet.hess[comp][j][i];
                    }
                }
            }
        }
        jet
    }

    /// Zeroes coefficients below `rel * max` and drops terms left empty.
    pub fn prune(&mut self, rel: f64) {
        let max = self
            .cos
            .iter()
            .chain(self.sin.iter())
            .flat_map(|c| c.iter())
            .fold(0.0_f64, |m, v| m.max(v.abs()));
        let cut = |c: [f64; 3]| c.map(|v| if v.abs() > rel * max { v } else { 0.0 });
        let mut out = TrigVector::empty();
        for n in 0..self.len() {
            let (a, b) = (cut(self.cos[n]), cut(self.sin[n]));
            if a.iter().chain(b.iter()).any(|v| *v != 0.0) {
                out.push(self.waves[n], a, b);
            }
        }
        *self = out;
    }
}

/// One time-dependent scalar term: `(a cos(k.x) + b sin(k.x)) e^{-decay t}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalarMode {
    pub wave: [f64; 3],
    pub cos: f64,
    pub sin: f64,
    pub decay: f64,
}

/// Time-dependent scalar trigonometric polynomial.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrigScalar {
    pub modes: Vec<ScalarMode>,
}

impl TrigScalar {
    pub fn value(&self, x: [f64; 3], t: f64) -> f64 {
        self.modes
            .iter()
            .map(|m| {
                let (s, c) = (m.wave[0] * x[0] + m.wave[1] * x[1] + m.wave[2] * x[2]).sin_cos();
                (m.cos * c + m.sin * s) * (-m.decay * t).exp()
            })
            .sum()
    }

    /// Product of two polynomials, expanded with product-to-sum identities.
    pub fn mul(&self, other: &TrigScalar) -> TrigScalar {
        let mut acc = ModeAccumulator::default();
        for p in &self.modes {
            for q in &other.modes {
                let decay = p.decay + q.decay;
                let minus = [
                    p.wave[0] - q.wave[0],
                    p.wave[1] - q.wave[1],
                    p.wave[2] - q.wave[2],
                ];
                let plus = [
                    p.wave[0] + q.wave[0],
                    p.wave[1] + q.wave[1],
                    p.wave[2] + q.wave[2],
                ];
                acc.add(
                    minus,
                    decay,
                    0.5 * (p.cos * q.cos + p.sin * q.sin),
                    0.5 * (p.sin * q.cos - p.cos * q.sin),
                );
                acc.add(
                    plus,
                    decay,
                    0.5 * (p.cos * q.cos - p.sin * q.sin),
                    0.5 * (p.sin * q.cos + p.cos * q.sin),
                );
            }
        }
        acc.finish()
    }

    /// `d_i d_j` applied term by term.
    pub fn second_derivative(&self, i: usize, j: usize) -> TrigScalar {
        TrigScalar {
            modes: self
                .modes
                .iter()
                .map(|m| {
                    let f = -m.wave[i] * m.wave[j];
                    ScalarMode {
                        cos: m.cos * f,
                        sin: m.sin * f,
                        ..*m
                    }
                })
                .collect(),
        }
    }

    pub fn add_scaled(&mut self, other: &TrigScalar, scale: f64) {
        let mut acc = ModeAccumulator::default();
        for m in self.modes.iter() {
            acc.add(m.wave, m.decay, m.cos, m.sin);
        }
        for m in other.modes.iter() {
            acc.add(m.wave, m.decay, scale * m.cos, scale * m.sin);
        }
        *self = acc.finish();
    }

    /// Solves `Delta u = self` for the non-constant part; constants are dropped.
    pub fn inverse_laplacian(&self) -> TrigScalar {
        TrigScalar {
            modes: self
                .modes
                .iter()
                .filter_map(|m| {
                    let k2 = m.wave[0] * m.wave[0] + m.wave[1] * m.wave[1] + m.wave[2] * m.wave[2];
                    (k2 > 0.0).then(|| ScalarMode {
                        cos: -m.cos / k2,
                        sin: -m.sin / k2,
                        ..*m
                    })
                })
                .collect(),
        }
    }

    /// Freezes the time dependence at `t`.
    pub fn at(&self, t: f64) -> StaticScalar {
        let mut out = StaticScalar::default();
        for m in &self.modes {
            let f = (-m.decay * t).exp();
            out.waves.push(m.wave);
            out.cos.push(m.cos * f);
            out.sin.push(m.sin * f);
        }
        out
    }
}

/// Time-independent scalar polynomial used for pressure slices.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct StaticScalar {
    pub waves: Vec<[f64; 3]>,
    pub cos: Vec<f64>,
    pub sin: Vec<f64>,
}

impl StaticScalar {
    pub fn value(&self, x: [f64; 3]) -> f64 {
        let mut v = 0.0;
        for n in 0..self.waves.len() {
            let k = self.waves[n];
            let (s, c) = (k[0] * x[0] + k[1] * x[1] + k[2] * x[2]).sin_cos();
            v += self.cos[n] * c + self.sin[n] * s;
        }
        v
    }

    pub fn prune(&mut self, rel: f64) {
        let max = self
            .cos
            .iter()
            .chain(self.sin.iter())
            .fold(0.0_f64, |m, v| m.max(v.abs()));
        let mut out = StaticScalar::default();
        for n in 0..self.waves.len() {
            if self.cos[n].abs().max(self.sin[n].abs()) > rel * max {
                out.waves.push(self.waves[n]);
                out.cos.push(self.cos[n]);
                out.sin.push(self.sin[n]);
            }
        }
        *self = out;
    }
}

/// Merges terms that share a wave (up to sign) and decay rate.
#[derive(Default)]
struct ModeAccumulator {
    terms: BTreeMap<([u64; 3], u64), (f64, f64)>,
}

impl ModeAccumulator {
    fn add(&mut self, wave: [f64; 3], decay: f64, cos: f64, sin: f64) {
        let (wave, sign) = canonical_wave(wave);
        let sin = if wave == [0.0; 3] { 0.0 } else { sin * sign };
        if cos == 0.0 && sin == 0.0 {
            return;
        }
        let key = (
            [wave[0].to_bits(), wave[1].to_bits(), wave[2].to_bits()],
            decay.to_bits(),
        );
        let e = self.terms.entry(key).or_insert((0.0, 0.0));
        e.0 += cos;
        e.1 += sin;
    }

    fn finish(self) -> TrigScalar {
        let mut modes = Vec::with_capacity(self.terms.len());
        for ((w, d), (c, s)) in self.terms {
            let wave = [f64::from_bits(w[0]), f64::from_bits(w[1]), f64::from_bits(w[2])];
            let scale = c.abs().max(s.abs());
            if scale > 0.0 {
                modes.push(ScalarMode {
                    wave,
                    cos: c,
                    sin: s,
                    decay: f64::from_bits(d),
                });
            }
        }
        // cancellation leftovers from the product expansion
        let max = modes
            .iter()
            .fold(0.0_f64, |m, t| m.max(t.cos.abs().max(t.sin.abs())));
        modes.retain(|t| t.cos.abs().max(t.sin.abs()) > 1e-15 * max);
        TrigScalar { modes }
    }
}

/// Maps `k` and `-k` to one representative; returns the sign applied.
fn canonical_wave(mut k: [f64; 3]) -> ([f64; 3], f64) {
    for v in k.iter_mut() {
        if *v == 0.0 {
            *v = 0.0; // normalise -0.0
        }
    }
    let first = k.iter().copied().find(|v| *v != 0.0).unwrap_or(0.0);
    if first < 0.0 {
        ([-k[0], -k[1], -k[2]], -1.0)
    } else {
        (k, 1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mode(wave: [f64; 3], cos: f64, sin: f64) -> ScalarMode {
        ScalarMode {
            wave,
            cos,
            sin,
            decay: 0.0,
        }
    }

    #[test]
    fn product_matches_pointwise_multiplication() {
        let p = TrigScalar {
            modes: vec![mode([1.0, 0.0, 0.0], 0.7, -0.3), mode([0.0, 2.0, 1.0], 0.2, 1.1)],
        };
        let q = TrigScalar {
            modes: vec![mode([1.0, -1.0, 0.0], 1.3, 0.4), mode([0.0, 0.0, 0.0], 0.5, 0.0)],
        };
        let pq = p.mul(&q);
        for x in [[0.1, 0.2, 0.3], [1.0, -2.0, 0.5], [3.0, 4.0, 5.0]] {
            let want = p.value(x, 0.0) * q.value(x, 0.0);
            assert!((pq.value(x, 0.0) - want).abs() < 1e-14);
        }
    }

    #[test]
    fn jet_matches_finite_differences() {
        let mut f = TrigVector::empty();
        f.push([1.0, 2.0, -1.0], [0.3, -0.2, 0.5], [0.1, 0.4, -0.7]);
        f.push([0.0, 1.0, 3.0], [1.0, 0.0, 0.2], [0.0, -0.3, 0.6]);
        let x = [0.4, -0.3, 1.2];
        let jet = f.jet(x, 2);
        let h = 1e-5;
        for i in 0..3 {
            let mut xp = x;
            let mut xm = x;
            xp[i] += h;
            xm[i] -= h;
            let jp = f.jet(xp, 1);
            let jm = f.jet(xm, 1);
            for c in 0..3 {
                let fd = (jp.val[c] - jm.val[c]) / (2.0 * h);
                assert!((fd - jet.grad[c][i]).abs() < 1e-8);
                for j in 0..3 {
                    let fd2 = (jp.grad[c][j] - jm.grad[c][j]) / (2.0 * h);
                    assert!((fd2 - jet.hess[c][i][j]).abs() < 1e-8);
                }
            }
        }
    }

    #[test]
    fn curl_of_curl_free_term_vanishes() {
        let mut f = TrigVector::empty();
        // gradient of cos(k.x) is parallel to k
        f.push([1.0, 2.0, 3.0], [0.0; 3], [-1.0, -2.0, -3.0]);
        let w = f.curl();
        let v = w.value([0.3, 0.2, 0.1]);
        assert!(v.iter().all(|c| c.abs() < 1e-14));
    }

    #[test]
    fn inverse_laplacian_drops_mean() {
        let p = TrigScalar {
            modes: vec![mode([0.0; 3], 2.0, 0.0), mode([0.0, 2.0, 0.0], 4.0, 0.0)],
        };
        let u = p.inverse_laplacian();
        assert_eq!(u.modes.len(), 1);
        assert!((u.modes[0].cos + 1.0).abs() < 1e-15);
    }
}
