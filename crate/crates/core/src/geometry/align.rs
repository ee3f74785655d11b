use serde::{Deserialize, Serialize};

use super::DirectionSet;
use crate::fields::{cross, dot, norm};
use crate::par;

/// Largest set handled by the plain quadratic scan.
const BRUTE_LIMIT: usize = 5000;
/// Cube-map bins per face edge for the bounded search.
const BINS: usize = 8;

/// `D(a, b, c) = (a . c) Det(a, b, c)`.
pub fn cf_determinant(a: [f64; 3], b: [f64; 3], c: [f64; 3]) -> f64 {
    dot(a, c) * dot(a, cross(b, c))
}

/// `max |xi_i x xi_j|` over all pairs; zero for fewer than two samples.
pub fn pairwise_alignment(ds: &DirectionSet) -> f64 {
    let dirs = ds.directions();
    if dirs.len() <= BRUTE_LIMIT {
        brute_alignment(&dirs)
    } else {
        bounded_alignment(&dirs)
    }
}

pub(crate) fn brute_alignment(dirs: &[[f64; 3]]) -> f64 {
    par::argmax(dirs.len(), |i| {
        let a = dirs[i];
        dirs[i + 1..].iter().map(|b| norm(cross(a, *b))).fold(0.0, f64::max)
    })
    .map_or(0.0, |(_, v)| v)
}

/// Exact maximum using cells on the sphere: lines are binned, each bin is
/// bounded by a spherical cap, and bin pairs whose best possible cross product
/// cannot beat the running maximum are skipped.
fn bounded_alignment(dirs: &[[f64; 3]]) -> f64 {
    let lines: Vec<[f64; 3]> = dirs
        .iter()
        .map(|d| {
            let lead = if d[2] != 0.0 { d[2] } else if d[1] != 0.0 { d[1] } else { d[0] };
            if lead < 0.0 {
                [-d[0], -d[1], -d[2]]
            } else {
                *d
            }
        })
        .collect();
    let mut bins: Vec<Vec<usize>> = vec![Vec::new(); 6 * BINS * BINS];
    for (i, d) in lines.iter().enumerate() {
        bins[bin_of(*d)].push(i);
    }
    let cells: Vec<(Vec<usize>, [f64; 3], f64)> = bins
        .into_iter()
        .filter(|b| !b.is_empty())
        .map(|members| {
            let mut c = [0.0; 3];
            for &i in &members {
                for k in 0..3 {
                    c[k] += lines[i][k];
                }
            }
            let n = norm(c);
            let c = [c[0] / n, c[1] / n, c[2] / n];
            let radius = members
                .iter()
                .map(|&i| dot(lines[i], c).clamp(-1.0, 1.0).acos())
                .fold(0.0, f64::max);
            (members, c, radius)
        })
        .collect();
    let half_pi = std::f64::consts::FRAC_PI_2;
    let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
    for a in 0..cells.len() {
        for b in a..cells.len() {
            let theta = dot(cells[a].1, cells[b].1).clamp(-1.0, 1.0).acos();
            let line_angle = theta.min(std::f64::consts::PI - theta);
            // Slack keeps rounding in the cap radii from excluding a true maximum.
            let reach = (line_angle + cells[a].2 + cells[b].2 + 1e-9).min(half_pi);
            pairs.push((reach.sin(), a, b));
        }
    }
    pairs.sort_by(|x, y| y.0.total_cmp(&x.0).then((x.1, x.2).cmp(&(y.1, y.2))));
    let mut best = 0.0_f64;
    for (bound, a, b) in pairs {
        if bound <= best {
            break;
        }
        let (ma, mb) = (&cells[a].0, &cells[b].0);
        for (pos, &i) in ma.iter().enumerate() {
            let others: &[usize] = if a == b { &ma[pos + 1..] } else { mb };
            for &j in others {
                best = best.max(norm(cross(dirs[i], dirs[j])));
            }
        }
    }
    best
}

fn bin_of(d: [f64; 3]) -> usize {
    let ax = (0..3).max_by(|&a, &b| d[a].abs().total_cmp(&d[b].abs())).unwrap_or(2);
    let face = 2 * ax + usize::from(d[ax] < 0.0);
    let (u, v) = ((ax + 1) % 3, (ax + 2) % 3);
    let m = d[ax].abs();
    let q = |x: f64| (((x / m + 1.0) * 0.5 * BINS as f64) as usize).min(BINS - 1);
    (face * BINS + q(d[u])) * BINS + q(d[v])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum HolderExponent {
    /// `alpha = 1`
    Lipschitz,
    /// `alpha = 1/2`
    Half,
}

impl HolderExponent {
    pub fn alpha(self) -> f64 {
        match self {
            HolderExponent::Lipschitz => 1.0,
            HolderExponent::Half => 0.5,
        }
    }

    fn power(self, r: f64) -> f64 {
        match self {
            HolderExponent::Lipschitz => r,
            HolderExponent::Half => r.sqrt(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HolderModulus {
    pub exponent: HolderExponent,
    /// Smallest admissible constant; infinite when distinct directions share a node.
    pub constant: f64,
    /// Pair attaining the constant.
    pub witness: Option<(usize, usize)>,
}

/// Smallest `C` with `|xi(x) x xi(y)| <= C |x - y|^alpha` over all pairs.
pub fn holder_modulus(ds: &DirectionSet, exponent: HolderExponent) -> HolderModulus {
    let s = &ds.samples;
    let row = |i: usize| -> (f64, usize) {
        let mut best = (0.0, usize::MAX);
        for j in i + 1..s.len() {
            let c = norm(cross(s[i].direction, s[j].direction));
            if c == 0.0 {
                continue;
            }
            let r = ds.distance(s[i].position, s[j].position);
            let q = if r == 0.0 { f64::INFINITY } else { c / exponent.power(r) };
            if q > best.0 {
                best = (q, j);
            }
        }
        best
    };
    let found = par::argmax(s.len(), |i| row(i).0).filter(|(_, v)| *v > 0.0);
    match found {
        Some((i, constant)) => HolderModulus {
            exponent,
            constant,
            witness: Some((i, row(i).1)),
        },
        None => HolderModulus {
            exponent,
            constant: 0.0,
            witness: None,
        },
    }
}
