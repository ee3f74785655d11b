use serde::{Deserialize, Serialize};

use super::{AxisymError, MeridianField, MeridianGrid};
use crate::quad::GaussLegendre;

/// Nodes per local interpolation stencil.
const STENCIL: usize = 8;

/// First index of the `m`-point stencil around `x`.
fn window(nodes: &[f64], x: f64, m: usize) -> usize {
    let i = nodes.partition_point(|&n| n <= x).saturating_sub(1);
    (i + 1).saturating_sub(m / 2).min(nodes.len() - m)
}

/// Lagrange weights and derivative weights of `nodes` at `x`.
fn lagrange(nodes: &[f64], x: f64) -> (Vec<f64>, Vec<f64>) {
    let m = nodes.len();
    let mut w = vec![0.0; m];
    let mut dw = vec![0.0; m];
    for j in 0..m {
        let mut l = 1.0;
        for k in 0..m {
            if k != j {
                l *= (x - nodes[k]) / (nodes[j] - nodes[k]);
            }
        }
        w[j] = l;
        let mut d = 0.0;
        for i in 0..m {
            if i == j {
                continue;
            }
            let mut p = 1.0 / (nodes[j] - nodes[i]);
            for k in 0..m {
                if k != j && k != i {
                    p *= (x - nodes[k]) / (nodes[j] - nodes[k]);
                }
            }
            d += p;
        }
        dw[j] = d;
    }
    (w, dw)
}

/// Stencil start plus value and derivative weights.
fn weights(nodes: &[f64], x: f64) -> (usize, Vec<f64>, Vec<f64>) {
    let m = STENCIL.min(nodes.len());
    let s = window(nodes, x, m);
    let (w, dw) = lagrange(&nodes[s..s + m], x);
    (s, w, dw)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StreamOptions {
    /// Gauss points per radial cell.
    pub gauss: usize,
    /// Allowed `max |dz psi + r v_r|` relative to the largest of `|r v_r|`, `|r v_z|`.
    pub tolerance: f64,
}

impl Default for StreamOptions {
    fn default() -> Self {
        Self {
            gauss: 4,
            tolerance: 1e-6,
        }
    }
}

/// `psi` with `dr psi = r v_z`, `dz psi = -r v_r`, `psi(0, z) = 0`, on a
/// meridian grid, interpolated by local 8-point Lagrange stencils.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreamFunction {
    pub grid: MeridianGrid,
    pub psi: Vec<f64>,
    /// Relative compatibility residual measured on construction.
    pub residual: f64,
}

impl StreamFunction {
    pub fn from_fn(grid: MeridianGrid, f: impl Fn(f64, f64) -> f64) -> Self {
        let psi = grid.from_fn(f);
        Self {
            grid,
            psi,
            residual: 0.0,
        }
    }

    /// `[psi, dr psi, dz psi]` at `(r, z)`.
    pub fn eval(&self, r: f64, z: f64) -> Result<[f64; 3], AxisymError> {
        let g = &self.grid;
        let slack = 1e-12 * (g.radii[g.radii.len() - 1] + g.heights[g.heights.len() - 1].abs().max(g.heights[0].abs()));
        let inside = |v: &[f64], x: f64| x >= v[0] - slack && x <= v[v.len() - 1] + slack;
        if !inside(&g.radii, r) || !inside(&g.heights, z) {
            return Err(AxisymError::OutOfDomain { r, z });
        }
        let (sr, wr, dwr) = weights(&g.radii, r);
        let (sz, wz, dwz) = weights(&g.heights, z);
        let mut out = [0.0; 3];
        for (b, (a, da)) in wz.iter().zip(&dwz).enumerate() {
            for (c, (w, dw)) in wr.iter().zip(&dwr).enumerate() {
                let p = self.psi[g.index(sr + c, sz + b)];
                out[0] += a * w * p;
                out[1] += a * dw * p;
                out[2] += da * w * p;
            }
        }
        Ok(out)
    }

    /// Smallest `C1` with `|dr psi| <= C1 + c2 |dz psi|` at every node.
    pub fn slope_bound(&self, c2: f64) -> Result<f64, AxisymError> {
        let mut c1: f64 = 0.0;
        for i in 0..self.grid.len() {
            let (r, z) = self.grid.node(i);
            let [_, dr, dz] = self.eval(r, z)?;
            c1 = c1.max(dr.abs() - c2 * dz.abs());
        }
        Ok(c1)
    }
}

/// Integrates `r v_z` outward from the axis on every height and checks
/// `dz psi + r v_r` against the tolerance.
pub fn stream_function(m: &MeridianField, opts: &StreamOptions) -> Result<StreamFunction, AxisymError> {
    if opts.gauss == 0 {
        return Err(AxisymError::InvalidParameter("need at least one Gauss point".into()));
    }
    let grid = &m.grid;
    let (nr, nz) = (grid.radii.len(), grid.heights.len());
    let rule = GaussLegendre::new(opts.gauss);
    // interpolation weights at every Gauss point of every cell, shared by all heights
    let mut cells = Vec::with_capacity(nr - 1);
    for i in 0..nr - 1 {
        let pts: Vec<(usize, Vec<f64>, f64)> = rule
            .on(grid.radii[i], grid.radii[i + 1])
            .map(|(x, w)| {
                let (s, l, _) = weights(&grid.radii, x);
                (s, l, w)
            })
            .collect();
        cells.push(pts);
    }
    let mut psi = vec![0.0; grid.len()];
    for iz in 0..nz {
        let g: Vec<f64> = (0..nr).map(|ir| grid.radii[ir] * m.vz[grid.index(ir, iz)]).collect();
        let mut acc = 0.0;
        for (ir, cell) in cells.iter().enumerate() {
            for (s, l, w) in cell {
                acc += w * l.iter().enumerate().map(|(k, lk)| lk * g[s + k]).sum::<f64>();
            }
            psi[grid.index(ir + 1, iz)] = acc;
        }
    }
    let mut out = StreamFunction {
        grid: grid.clone(),
        psi,
        residual: 0.0,
    };
    let mut scale: f64 = 0.0;
    let mut worst: f64 = 0.0;
    for i in 0..grid.len() {
        let (r, z) = grid.node(i);
        scale = scale.max((r * m.vr[i]).abs()).max((r * m.vz[i]).abs());
        let [_, _, dz] = out.eval(r, z)?;
        worst = worst.max((dz + r * m.vr[i]).abs());
    }
    out.residual = if scale > 0.0 { worst / scale } else { worst };
    if out.residual > opts.tolerance {
        return Err(AxisymError::Incompatible {
            residual: out.residual,
            tolerance: opts.tolerance,
        });
    }
    Ok(out)
}
