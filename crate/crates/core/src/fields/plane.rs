//! Batched evaluation of plane-wave sums.
//!
//! Quadrature points come in horizontal layers. On a layer `x3 = z` the
//! vertical phase of every term is a constant, so terms sharing `(k1, k2)`
//! merge and each point then costs one product per distinct horizontal wave
//! instead of one `sin_cos` per term.

use std::collections::{BTreeMap, HashMap};

use rayon::prelude::*;

use super::trig::{StaticScalar, TrigVector};

/// Point sets smaller than this are summed term by term.
const MIN_LAYER: usize = 48;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Source {
    Velocity,
    Vorticity,
    /// Value only through the generic path; derivatives need a plane-wave slice.
    Pressure,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Deriv {
    Value,
    D(usize),
    DD(usize, usize),
}

impl Deriv {
    pub fn order(self) -> usize {
        match self {
            Deriv::Value => 0,
            Deriv::D(_) => 1,
            Deriv::DD(..) => 2,
        }
    }
}

/// One scalar quantity to sample: a component of a field or of a derivative.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Channel {
    pub source: Source,
    pub comp: usize,
    pub deriv: Deriv,
}

impl Channel {
    pub const fn v(comp: usize) -> Self {
        Self { source: Source::Velocity, comp, deriv: Deriv::Value }
    }

    pub const fn w(comp: usize) -> Self {
        Self { source: Source::Vorticity, comp, deriv: Deriv::Value }
    }

    pub const fn p() -> Self {
        Self { source: Source::Pressure, comp: 0, deriv: Deriv::Value }
    }

    pub const fn d(self, i: usize) -> Self {
        Self { deriv: Deriv::D(i), ..self }
    }

    pub const fn dd(self, i: usize, j: usize) -> Self {
        Self { deriv: Deriv::DD(i, j), ..self }
    }
}

/// A scalar plane-wave sum `sum a cos(k.x) + b sin(k.x)`.
#[derive(Debug, Clone, Default)]
pub(crate) struct Terms(Vec<([f64; 3], f64, f64)>);

impl Terms {
    pub fn of_vector(poly: &TrigVector, comp: usize, deriv: Deriv) -> Self {
        let raw = (0..poly.len()).map(|n| (poly.waves[n], poly.cos[n][comp], poly.sin[n][comp]));
        Self::build(raw, deriv)
    }

    pub fn of_scalar(poly: &StaticScalar, deriv: Deriv) -> Self {
        let raw = (0..poly.waves.len()).map(|n| (poly.waves[n], poly.cos[n], poly.sin[n]));
        Self::build(raw, deriv)
    }

    fn build(raw: impl Iterator<Item = ([f64; 3], f64, f64)>, deriv: Deriv) -> Self {
        let dirs: &[usize] = match &deriv {
            Deriv::Value => &[],
            Deriv::D(i) => std::slice::from_ref(i),
            Deriv::DD(i, j) => &[*i, *j][..],
        };
        let dirs = dirs.to_vec();
        Terms(
            raw.filter_map(|(k, mut a, mut b)| {
                for &i in &dirs {
                    (a, b) = (k[i] * b, -k[i] * a);
                }
                (a != 0.0 || b != 0.0).then_some((k, a, b))
            })
            .collect(),
        )
    }

    fn value(&self, x: [f64; 3]) -> f64 {
        self.0
            .iter()
            .map(|(k, a, b)| {
                let (s, c) = (k[0] * x[0] + k[1] * x[1] + k[2] * x[2]).sin_cos();
                a * c + b * s
            })
            .sum()
    }
}

/// Channels collapsed onto one layer.
struct Layer {
    k1: Vec<f64>,
    k2: Vec<f64>,
    pairs: Vec<(u32, u32)>,
    /// `(A, B)` per pair and channel.
    coef: Vec<(f64, f64)>,
    channels: usize,
}

fn key(x: f64) -> u64 {
    (x + 0.0).to_bits()
}

impl Layer {
    fn build(terms: &[Terms], z: f64) -> Self {
        let nc = terms.len();
        let mut k1: Vec<f64> = Vec::new();
        let mut k2: Vec<f64> = Vec::new();
        let mut k1_at: HashMap<u64, u32> = HashMap::new();
        let mut k2_at: HashMap<u64, u32> = HashMap::new();
        let mut pair_at: HashMap<(u32, u32), usize> = HashMap::new();
        let mut pairs = Vec::new();
        let mut coef: Vec<(f64, f64)> = Vec::new();
        for (c, t) in terms.iter().enumerate() {
            for &(k, a, b) in &t.0 {
                let flip = k[0] < 0.0 || (k[0] == 0.0 && k[1] < 0.0);
                let (k, b) = if flip { ([-k[0], -k[1], -k[2]], -b) } else { (k, b) };
                let (s, co) = (k[2] * z).sin_cos();
                let big_a = a * co + b * s;
                let big_b = b * co - a * s;
                let i1 = *k1_at.entry(key(k[0])).or_insert_with(|| {
                    k1.push(k[0]);
                    (k1.len() - 1) as u32
                });
                let i2 = *k2_at.entry(key(k[1])).or_insert_with(|| {
                    k2.push(k[1]);
                    (k2.len() - 1) as u32
                });
                let p = *pair_at.entry((i1, i2)).or_insert_with(|| {
                    pairs.push((i1, i2));
                    coef.extend(std::iter::repeat_n((0.0, 0.0), nc));
                    pairs.len() - 1
                });
                let slot = &mut coef[p * nc + c];
                slot.0 += big_a;
                slot.1 += big_b;
            }
        }
        Self { k1, k2, pairs, coef, channels: nc }
    }

    fn eval(&self, x: [f64; 2], out: &mut [f64]) {
        let cs1: Vec<(f64, f64)> = self.k1.iter().map(|k| (k * x[0]).sin_cos()).collect();
        let cs2: Vec<(f64, f64)> = self.k2.iter().map(|k| (k * x[1]).sin_cos()).collect();
        let nc = self.channels;
        for (p, &(i1, i2)) in self.pairs.iter().enumerate() {
            let (s1, c1) = cs1[i1 as usize];
            let (s2, c2) = cs2[i2 as usize];
            let c = c1 * c2 - s1 * s2;
            let s = s1 * c2 + c1 * s2;
            for (o, (a, b)) in out.iter_mut().zip(&self.coef[p * nc..(p + 1) * nc]) {
                *o += a * c + b * s;
            }
        }
    }
}

/// Samples every channel at every point; output is point-major.
pub(crate) fn sample_terms(terms: &[Terms], pts: &[[f64; 3]]) -> Vec<f64> {
    let nc = terms.len();
    let mut out = vec![0.0; pts.len() * nc];
    if nc == 0 {
        return out;
    }
    let mut layers: BTreeMap<u64, Vec<usize>> = BTreeMap::new();
    for (i, p) in pts.iter().enumerate() {
        layers.entry(key(p[2])).or_default().push(i);
    }
    for (zb, idx) in layers {
        let vals: Vec<f64> = if idx.len() < MIN_LAYER {
            idx.iter()
                .flat_map(|&i| terms.iter().map(move |t| t.value(pts[i])))
                .collect()
        } else {
            let layer = Layer::build(terms, f64::from_bits(zb));
            let mut vals = vec![0.0; idx.len() * nc];
            vals.par_chunks_mut(nc)
                .zip(idx.par_iter())
                .for_each(|(o, &i)| layer.eval([pts[i][0], pts[i][1]], o));
            vals
        };
        for (n, &i) in idx.iter().enumerate() {
            out[i * nc..(i + 1) * nc].copy_from_slice(&vals[n * nc..(n + 1) * nc]);
        }
    }
    out
}
