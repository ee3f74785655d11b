use serde::{Deserialize, Serialize};

use super::{DirectionSet, GeometryError};
use crate::fields::{cross, dot, norm};
use crate::par;

const GOLDEN_ANGLE: f64 = 2.399_963_229_728_653;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConeOptions {
    /// Fibonacci lattice size on the upper hemisphere.
    pub lattice: usize,
    /// Number of best lattice axes handed to local refinement.
    pub candidates: usize,
    pub simplex_iterations: usize,
}

impl Default for ConeOptions {
    fn default() -> Self {
        Self {
            lattice: 4000,
            candidates: 8,
            simplex_iterations: 200,
        }
    }
}

/// Best double cone `|xi x e| <= 1 - delta` containing every sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConeFit {
    pub axis: [f64; 3],
    /// Worst alignment `min |xi . e|`.
    pub s: f64,
    pub delta: f64,
    /// `|omega_h| <= C |omega . e|` constant; infinite without a cone.
    #[serde(rename = "C")]
    pub constant: f64,
    /// Index of the sample attaining `s`.
    pub worst: usize,
    pub n_samples: usize,
}

/// `delta = 1 - sqrt(1 - s^2)`.
pub fn delta_from_alignment(s: f64) -> f64 {
    1.0 - (1.0 - s * s).max(0.0).sqrt()
}

/// `(1 - delta) / sqrt(2 delta - delta^2)`, infinite at `delta = 0`.
pub fn cone_constant(delta: f64) -> f64 {
    if delta <= 0.0 {
        return f64::INFINITY;
    }
    (1.0 - delta) / (2.0 * delta - delta * delta).sqrt()
}

pub fn cone_deficiency(ds: &DirectionSet) -> Result<ConeFit, GeometryError> {
    cone_deficiency_with(ds, &ConeOptions::default())
}

pub fn cone_deficiency_with(ds: &DirectionSet, opts: &ConeOptions) -> Result<ConeFit, GeometryError> {
    if ds.is_empty() {
        return Err(GeometryError::NoData);
    }
    if opts.lattice == 0 || opts.candidates == 0 {
        return Err(GeometryError::Options("lattice and candidates must be positive".into()));
    }
    let dirs = ds.directions();
    let lattice = fibonacci_hemisphere(opts.lattice);
    let scores: Vec<f64> = lattice.iter().map(|&e| worst(&dirs, e).0).collect();
    let mut order: Vec<usize> = (0..lattice.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    let step = (2.0 * std::f64::consts::PI / opts.lattice as f64).sqrt();

    let mut best = (f64::NEG_INFINITY, [0.0; 3]);
    for &c in order.iter().take(opts.candidates) {
        let e = nelder_mead(&dirs, lattice[c], step, opts.simplex_iterations);
        let e = polish(&dirs, e);
        let s = worst(&dirs, e).0;
        if s > best.0 {
            best = (s, e);
        }
    }
    let axis = canonical(best.1);
    let (s, idx) = worst(&dirs, axis);
    let xi = dirs[idx];
    let c = norm(cross(xi, axis));
    let identity = c * c + s * s - 1.0;
    debug_assert!(identity.abs() < 1e-12, "cone identity off by {identity}");
    let delta = delta_from_alignment(s);
    Ok(ConeFit {
        axis,
        s,
        delta,
        constant: cone_constant(delta),
        worst: idx,
        n_samples: dirs.len(),
    })
}

/// Either every great circle meets the set, or the pole of one that misses it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "result", rename_all = "kebab-case")]
pub enum Obstruction {
    Obstructed { best_gap: f64 },
    Avoided { pole: [f64; 3], gap: f64 },
}

impl Obstruction {
    pub fn is_obstructed(&self) -> bool {
        matches!(self, Obstruction::Obstructed { .. })
    }
}

pub fn great_circle_obstruction(ds: &DirectionSet, tol: f64) -> Result<Obstruction, GeometryError> {
    let fit = cone_deficiency(ds)?;
    Ok(if fit.s > tol {
        Obstruction::Avoided {
            pole: fit.axis,
            gap: fit.s,
        }
    } else {
        Obstruction::Obstructed { best_gap: fit.s }
    })
}

fn worst(dirs: &[[f64; 3]], e: [f64; 3]) -> (f64, usize) {
    let mut best = (f64::INFINITY, 0);
    for (i, d) in dirs.iter().enumerate() {
        let a = dot(*d, e).abs();
        if a < best.0 {
            best = (a, i);
        }
    }
    best
}

fn fibonacci_hemisphere(n: usize) -> Vec<[f64; 3]> {
    (0..n)
        .map(|i| {
            let z = (i as f64 + 0.5) / n as f64;
            let r = (1.0 - z * z).sqrt();
            let phi = GOLDEN_ANGLE * i as f64;
            [r * phi.cos(), r * phi.sin(), z]
        })
        .collect()
}

fn unit(v: [f64; 3]) -> [f64; 3] {
    let n = norm(v);
    [v[0] / n, v[1] / n, v[2] / n]
}

/// Sign convention for the reported axis: last nonzero component positive.
fn canonical(e: [f64; 3]) -> [f64; 3] {
    let e = unit(e);
    let lead = e.iter().rev().find(|c| c.abs() > 1e-14).copied().unwrap_or(1.0);
    if lead < 0.0 {
        [-e[0], -e[1], -e[2]]
    } else {
        e
    }
}

fn tangent_basis(e: [f64; 3]) -> ([f64; 3], [f64; 3]) {
    let helper = if e[0].abs() < 0.9 { [1.0, 0.0, 0.0] } else { [0.0, 1.0, 0.0] };
    let u = unit(cross(e, helper));
    (u, cross(e, u))
}

fn nelder_mead(dirs: &[[f64; 3]], e0: [f64; 3], step: f64, iters: usize) -> [f64; 3] {
    let (u, w) = tangent_basis(e0);
    let at = |p: [f64; 2]| {
        unit([
            e0[0] + p[0] * u[0] + p[1] * w[0],
            e0[1] + p[0] * u[1] + p[1] * w[1],
            e0[2] + p[0] * u[2] + p[1] * w[2],
        ])
    };
    let cost = |p: [f64; 2]| -worst(dirs, at(p)).0;
    let mut simplex = [[0.0, 0.0], [step, 0.0], [0.0, step]];
    let mut vals = simplex.map(cost);
    for _ in 0..iters {
        let mut idx = [0, 1, 2];
        idx.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
        simplex = idx.map(|i| simplex[i]);
        vals = idx.map(|i| vals[i]);
        let size = (simplex[1][0] - simplex[0][0])
            .abs()
            .max((simplex[1][1] - simplex[0][1]).abs())
            .max((simplex[2][0] - simplex[0][0]).abs())
            .max((simplex[2][1] - simplex[0][1]).abs());
        if size < 1e-12 {
            break;
        }
        let c = [
            0.5 * (simplex[0][0] + simplex[1][0]),
            0.5 * (simplex[0][1] + simplex[1][1]),
        ];
        let toward = |t: f64| {
            [
                c[0] + t * (simplex[2][0] - c[0]),
                c[1] + t * (simplex[2][1] - c[1]),
            ]
        };
        let r = toward(-1.0);
        let fr = cost(r);
        if fr < vals[0] {
            let x = toward(-2.0);
            let fx = cost(x);
            (simplex[2], vals[2]) = if fx < fr { (x, fx) } else { (r, fr) };
        } else if fr < vals[1] {
            (simplex[2], vals[2]) = (r, fr);
        } else {
            let k = if fr < vals[2] { toward(-0.5) } else { toward(0.5) };
            let fk = cost(k);
            if fk < vals[2].min(fr) {
                (simplex[2], vals[2]) = (k, fk);
            } else {
                for i in 1..3 {
                    simplex[i] = [
                        simplex[0][0] + 0.5 * (simplex[i][0] - simplex[0][0]),
                        simplex[0][1] + 0.5 * (simplex[i][1] - simplex[0][1]),
                    ];
                    vals[i] = cost(simplex[i]);
                }
            }
        }
    }
    let best = (0..3).min_by(|&a, &b| vals[a].total_cmp(&vals[b])).unwrap_or(0);
    at(simplex[best])
}

/// Fixes the signs seen from `e`, then solves the resulting one-sided problem
/// exactly: the best axis for `min p.e` is the direction of the point of
/// `conv(p)` closest to the origin. Repeats while the score improves.
fn polish(dirs: &[[f64; 3]], mut e: [f64; 3]) -> [f64; 3] {
    let mut score = worst(dirs, e).0;
    for _ in 0..32 {
        let pts: Vec<[f64; 3]> = dirs
            .iter()
            .map(|d| if dot(*d, e) >= 0.0 { *d } else { [-d[0], -d[1], -d[2]] })
            .collect();
        let x = min_norm_point(&pts);
        let nx = norm(x);
        if nx <= 1e-15 {
            break;
        }
        let cand = [x[0] / nx, x[1] / nx, x[2] / nx];
        let s = worst(dirs, cand).0;
        if s < score - 4.0 * f64::EPSILON || cand == e {
            break;
        }
        e = cand;
        score = s;
    }
    e
}

/// Wolfe's minimum-norm-point algorithm on a 3D point cloud.
fn min_norm_point(p: &[[f64; 3]]) -> [f64; 3] {
    let scale = p.iter().map(|q| dot(*q, *q)).fold(0.0, f64::max);
    let eps = 1e-13 * scale;
    let start = par::argmax(p.len(), |i| -dot(p[i], p[i])).map_or(0, |(i, _)| i);
    let mut set = vec![start];
    let mut lam = vec![1.0];
    let mut x = p[start];
    let combine = |set: &[usize], lam: &[f64]| {
        let mut x = [0.0; 3];
        for (&i, &l) in set.iter().zip(lam) {
            for c in 0..3 {
                x[c] += l * p[i][c];
            }
        }
        x
    };
    for _ in 0..10_000 {
        let xx = dot(x, x);
        if xx <= 1e-28 * scale {
            return [0.0; 3];
        }
        let (j, pj) = p
            .iter()
            .enumerate()
            .map(|(i, q)| (i, dot(*q, x)))
            .fold((0, f64::INFINITY), |a, b| if b.1 < a.1 { b } else { a });
        if xx - pj <= eps || set.contains(&j) {
            break;
        }
        set.push(j);
        lam.push(0.0);
        loop {
            let pts: Vec<[f64; 3]> = set.iter().map(|&i| p[i]).collect();
            let Some(mu) = affine_min(&pts) else {
                set.pop();
                lam.pop();
                return combine(&set, &lam);
            };
            if mu.iter().all(|&m| m > 1e-15) {
                lam = mu;
                x = combine(&set, &lam);
                break;
            }
            let mut theta = 1.0_f64;
            for (l, m) in lam.iter().zip(&mu) {
                if *m <= 1e-15 && l - m > 0.0 {
                    theta = theta.min(l / (l - m));
                }
            }
            for (l, m) in lam.iter_mut().zip(&mu) {
                *l += theta * (m - *l);
            }
            let mut k = 0;
            while k < set.len() {
                if lam[k] <= 1e-15 {
                    set.remove(k);
                    lam.remove(k);
                } else {
                    k += 1;
                }
            }
            let total: f64 = lam.iter().sum();
            lam.iter_mut().for_each(|l| *l /= total);
        }
    }
    x
}

/// Weights `mu` (summing to one) of the point of the affine hull nearest the
/// origin; `None` if the points are affinely dependent.
fn affine_min(q: &[[f64; 3]]) -> Option<Vec<f64>> {
    let m = q.len();
    if m == 1 {
        return Some(vec![1.0]);
    }
    let d: Vec<[f64; 3]> = q[1..]
        .iter()
        .map(|p| [p[0] - q[0][0], p[1] - q[0][1], p[2] - q[0][2]])
        .collect();
    let k = m - 1;
    let mut a = vec![vec![0.0; k + 1]; k];
    for i in 0..k {
        for j in 0..k {
            a[i][j] = dot(d[i], d[j]);
        }
        a[i][k] = -dot(d[i], q[0]);
    }
    let scale = a.iter().map(|r| r[..k].iter().fold(0.0_f64, |s, v| s.max(v.abs()))).fold(0.0, f64::max);
    for col in 0..k {
        let piv = (col..k).max_by(|&x, &y| a[x][col].abs().total_cmp(&a[y][col].abs()))?;
        if a[piv][col].abs() <= 1e-12 * scale {
            return None;
        }
        a.swap(col, piv);
        for r in 0..k {
            if r != col {
                let f = a[r][col] / a[col][col];
                for c in col..=k {
                    a[r][c] -= f * a[col][c];
                }
            }
        }
    }
    let tail: Vec<f64> = (0..k).map(|i| a[i][k] / a[i][i]).collect();
    let mut mu = vec![1.0 - tail.iter().sum::<f64>()];
    mu.extend(tail);
    Some(mu)
}
