use serde::{Deserialize, Serialize};

use super::CriticalityError;
use crate::fields::{Channel, CylinderRegion, FieldSlice, Flow};
use crate::quad::Shape;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShellOptions {
    pub a_min: f64,
    pub a_max: f64,
    pub a_count: usize,
    /// Candidate half-widths, each in `(0, 1/10)`.
    pub deltas: Vec<f64>,
    /// Radial samples from the center to `a_max + max(delta)`.
    pub radial: usize,
    /// Polar rings and points per ring of the direction lattice.
    pub polar: usize,
    pub azimuthal: usize,
}

impl Default for ShellOptions {
    fn default() -> Self {
        Self {
            a_min: 2.0 / 3.0,
            a_max: 0.75,
            a_count: 9,
            deltas: vec![0.01, 0.025, 0.05, 0.075, 0.0999],
            radial: 48,
            polar: 16,
            azimuthal: 48,
        }
    }
}

/// The parabolic shell `Q(a + delta) \ Q(a - delta)` with the smallest
/// `sup(|v| + |grad v| + |grad^2 v|)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShellSearch {
    pub a: f64,
    pub delta: f64,
    pub sup: f64,
    /// `(a, delta, sup)` for every candidate.
    pub table: Vec<(f64, f64, f64)>,
}

const JET2: [Channel; 30] = {
    let mut out = [Channel::v(0); 30];
    let mut c = 0;
    while c < 3 {
        out[c] = Channel::v(c);
        let mut i = 0;
        while i < 3 {
            out[3 + 3 * c + i] = Channel::v(c).d(i);
            i += 1;
        }
        let pairs = [(0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2)];
        let mut k = 0;
        while k < 6 {
            out[12 + 6 * c + k] = Channel::v(c).dd(pairs[k].0, pairs[k].1);
            k += 1;
        }
        c += 1;
    }
    out
};

/// `|v| + |grad v| + |grad^2 v|` with Frobenius norms, from one row of [`JET2`].
fn magnitude(row: &[f64]) -> f64 {
    let v: f64 = row[..3].iter().map(|x| x * x).sum();
    let g: f64 = row[3..12].iter().map(|x| x * x).sum();
    // off-diagonal second derivatives appear twice in the full tensor
    let mut h = 0.0;
    for c in 0..3 {
        for (k, w) in [1.0, 2.0, 2.0, 1.0, 2.0, 1.0].iter().enumerate() {
            h += w * row[12 + 6 * c + k].powi(2);
        }
    }
    v.sqrt() + g.sqrt() + h.sqrt()
}

/// Space-time points `|x - x0| = rho`, sampled on latitude rings so that
/// every ring lies in one horizontal plane.
fn sphere(center: [f64; 3], rho: f64, polar: usize, azimuthal: usize) -> Vec<[f64; 3]> {
    if rho == 0.0 {
        return vec![center];
    }
    let mut pts = Vec::with_capacity(polar * azimuthal);
    for i in 0..polar {
        let theta = std::f64::consts::PI * (i as f64 + 0.5) / polar as f64;
        let (st, ct) = theta.sin_cos();
        for j in 0..azimuthal {
            let phi = 2.0 * std::f64::consts::PI * (j as f64 + 0.5 * (i % 2) as f64) / azimuthal as f64;
            pts.push([center[0] + rho * st * phi.cos(), center[1] + rho * st * phi.sin(), center[2] + rho * ct]);
        }
    }
    pts
}

pub fn regular_shell_search<F: Flow>(
    flow: &F,
    center: [f64; 3],
    t0: f64,
    opts: &ShellOptions,
) -> Result<ShellSearch, CriticalityError> {
    let bad = |m: &str| Err(CriticalityError::InvalidParameter(m.into()));
    if !(opts.a_min < opts.a_max) || opts.a_count == 0 || opts.radial < 2 {
        return bad("need a_min < a_max and positive lattice sizes");
    }
    if opts.deltas.is_empty() || opts.deltas.iter().any(|d| !(*d > 0.0 && *d < 0.1)) {
        return bad("deltas must lie in (0, 1/10)");
    }
    let d_max = opts.deltas.iter().cloned().fold(0.0, f64::max);
    let outer = opts.a_max + d_max;
    CylinderRegion::new(outer, center, t0, Shape::Ball)?.check_fits(flow.safe_radius())?;
    let radii: Vec<f64> = (0..opts.radial).map(|i| outer * i as f64 / (opts.radial - 1) as f64).collect();
    let mut pts = Vec::new();
    let mut owner = Vec::new();
    for (i, &rho) in radii.iter().enumerate() {
        let ring = sphere(center, rho, opts.polar, opts.azimuthal);
        owner.extend(std::iter::repeat_n(i, ring.len()));
        pts.extend(ring);
    }
    // sup over each sampled sphere, per sample time
    let times = flow.time_samples(t0 - outer * outer, t0)?;
    let mut table = Vec::with_capacity(times.len());
    for &t in &times {
        let vals = flow.slice(t)?.sample(&pts, &JET2);
        let mut per = vec![0.0_f64; radii.len()];
        for (row, &i) in vals.chunks(JET2.len()).zip(&owner) {
            per[i] = per[i].max(magnitude(row));
        }
        table.push(per);
    }
    let a_lattice: Vec<f64> = (0..opts.a_count)
        .map(|k| {
            if opts.a_count == 1 {
                0.5 * (opts.a_min + opts.a_max)
            } else {
                opts.a_min + (opts.a_max - opts.a_min) * k as f64 / (opts.a_count - 1) as f64
            }
        })
        .collect();
    let mut out = ShellSearch {
        a: a_lattice[0],
        delta: opts.deltas[0],
        sup: f64::INFINITY,
        table: Vec::new(),
    };
    let eps = 1e-12 * outer;
    for &a in &a_lattice {
        for &delta in &opts.deltas {
            let (hi, lo) = (a + delta, a - delta);
            let mut sup = 0.0_f64;
            for (t, per) in times.iter().zip(&table) {
                let s = t0 - t;
                if s > hi * hi + eps {
                    continue;
                }
                for (rho, m) in radii.iter().zip(per) {
                    let inside_outer = *rho <= hi + eps;
                    let inside_inner = *rho < lo - eps && s < lo * lo - eps;
                    if inside_outer && !inside_inner {
                        sup = sup.max(*m);
                    }
                }
            }
            out.table.push((a, delta, sup));
            // strict: ties keep the first lattice point
            if sup < out.sup {
                out.a = a;
                out.delta = delta;
                out.sup = sup;
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{AnalyticField, AnalyticFlow, Jet, Steady};

    #[test]
    fn zero_field_picks_the_first_lattice_point() {
        let flow = AnalyticFlow::new(AnalyticField::constant([0.0; 3])).with_time_nodes(3);
        let s = regular_shell_search(&flow, [0.0; 3], 0.0, &ShellOptions::default()).unwrap();
        assert_eq!((s.a, s.delta, s.sup), (2.0 / 3.0, 0.01, 0.0));
    }

    /// `v = (0, 0, b(|x|))` with `b` a smooth bump supported in `0.73 < |x| < 0.75`.
    struct RadialBump;

    impl RadialBump {
        fn b(rho: f64) -> f64 {
            let s = (rho - 0.74) / 0.01;
            if s.abs() >= 1.0 {
                0.0
            } else {
                (1.0 - 1.0 / (1.0 - s * s)).exp()
            }
        }
    }

    impl FieldSlice for RadialBump {
        fn time(&self) -> f64 {
            0.0
        }
        fn velocity(&self, x: [f64; 3], order: usize) -> Jet {
            let rho = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
            let mut j = Jet::default();
            j.val[2] = Self::b(rho);
            if order >= 1 && rho > 0.0 {
                // one-sided differences are enough to see the support
                let h = 1e-6;
                let d = (Self::b(rho + h) - Self::b(rho - h)) / (2.0 * h);
                for i in 0..3 {
                    j.grad[2][i] = d * x[i] / rho;
                }
            }
            j
        }
        fn vorticity(&self, _x: [f64; 3], _order: usize) -> Jet {
            Jet::default()
        }
        fn pressure(&self, _x: [f64; 3]) -> f64 {
            0.0
        }
    }

    #[test]
    fn selected_shell_avoids_a_localized_bump() {
        let flow = Steady::new(RadialBump);
        let opts = ShellOptions { radial: 241, polar: 8, azimuthal: 8, ..ShellOptions::default() };
        let s = regular_shell_search(&flow, [0.0; 3], 0.0, &opts).unwrap();
        assert_eq!(s.sup, 0.0);
        assert!(s.a + s.delta < 0.73);
        assert!(s.table.iter().any(|r| r.2 > 0.5));
    }

    #[test]
    fn taylor_green_sup_matches_dense_sampling() {
        let flow = AnalyticFlow::new(AnalyticField::taylor_green(1.0)).with_time_nodes(5);
        let x0 = [0.2, 0.1, -0.3];
        let coarse = regular_shell_search(&flow, x0, 0.0, &ShellOptions::default()).unwrap();
        let dense_opts = ShellOptions { radial: 193, polar: 64, azimuthal: 128, ..ShellOptions::default() };
        let dense = regular_shell_search(&flow, x0, 0.0, &dense_opts).unwrap();
        for (c, d) in coarse.table.iter().zip(&dense.table) {
            assert!((c.2 - d.2).abs() <= 0.02 * d.2, "{c:?} vs {d:?}");
        }
    }
}
