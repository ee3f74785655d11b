//! Diagnostics for flows that are symmetric about an axis: meridian
//! decomposition, swirl, stream function, the velocity-direction cone test and
//! the level-set exploration with its certificate.

mod explore;
mod stream;

pub use explore::{
    explore_level_set, AnalyticStream, ExplorationTrace, ExploreOptions, Mode, Segment, StreamSource,
};
pub use stream::{stream_function, StreamFunction, StreamOptions};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fields::{cross, dot, Channel, FieldError, FieldSlice, TrigSlice, VectorField};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AxisymError {
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error("field depends on the angle: deviation {deviation:e} exceeds {tolerance:e}")]
    NotAxisymmetric { deviation: f64, tolerance: f64 },
    #[error("meridian velocity is not compatible with a stream function: residual {residual:e} exceeds {tolerance:e}")]
    Incompatible { residual: f64, tolerance: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("point (r = {r}, z = {z}) lies outside the meridian domain")]
    OutOfDomain { r: f64, z: f64 },
    #[error("exploration did not reach the axis within {steps} steps")]
    NonTermination { steps: usize, trace: Box<ExplorationTrace> },
    #[error("slope guard violated at (r = {r}, z = {z}): |dr psi| = {dr:e}, |dz psi| = {dz:e}")]
    GuardViolation {
        r: f64,
        z: f64,
        dr: f64,
        dz: f64,
        trace: Box<ExplorationTrace>,
    },
}

/// Symmetry axis `point + z * direction`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub point: [f64; 3],
    pub direction: [f64; 3],
}

impl Axis {
    pub fn vertical(x: f64, y: f64) -> Self {
        Self {
            point: [x, y, 0.0],
            direction: [0.0, 0.0, 1.0],
        }
    }

    /// Orthonormal `(e1, e2, e3)` with `e3` along the axis.
    pub fn frame(&self) -> Result<[[f64; 3]; 3], AxisymError> {
        let n = dot(self.direction, self.direction).sqrt();
        if !(n > 0.0) || !n.is_finite() {
            return Err(AxisymError::InvalidParameter("axis direction must be nonzero".into()));
        }
        let e3 = self.direction.map(|c| c / n);
        let seed = if e3[0].abs() < 0.9 { [1.0, 0.0, 0.0] } else { [0.0, 1.0, 0.0] };
        let s = dot(seed, e3);
        let e1 = [0, 1, 2].map(|i| seed[i] - s * e3[i]);
        let m = dot(e1, e1).sqrt();
        let e1 = e1.map(|c| c / m);
        Ok([e1, cross(e3, e1), e3])
    }
}

/// Tensor grid in the meridian half plane. `radii[0]` is the axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeridianGrid {
    pub radii: Vec<f64>,
    pub heights: Vec<f64>,
}

impl MeridianGrid {
    pub fn new(radii: Vec<f64>, heights: Vec<f64>) -> Result<Self, AxisymError> {
        let increasing = |v: &[f64]| v.windows(2).all(|w| w[1] > w[0]) && v.iter().all(|x| x.is_finite());
        if radii.len() < 2 || heights.len() < 2 || !increasing(&radii) || !increasing(&heights) {
            return Err(AxisymError::InvalidParameter(
                "meridian grid needs at least two strictly increasing radii and heights".into(),
            ));
        }
        if radii[0] != 0.0 {
            return Err(AxisymError::InvalidParameter("the first radius must be 0".into()));
        }
        Ok(Self { radii, heights })
    }

    /// `nr` radii on `[0, r_max]` and `nz` heights on `[z_min, z_max]`.
    pub fn uniform(r_max: f64, nr: usize, z_min: f64, z_max: f64, nz: usize) -> Result<Self, AxisymError> {
        let lin = |a: f64, b: f64, n: usize| -> Vec<f64> {
            (0..n).map(|i| a + (b - a) * i as f64 / (n.max(2) - 1) as f64).collect()
        };
        Self::new(lin(0.0, r_max, nr), lin(z_min, z_max, nz))
    }

    pub fn len(&self) -> usize {
        self.radii.len() * self.heights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Flat index, heights outermost.
    pub fn index(&self, ir: usize, iz: usize) -> usize {
        iz * self.radii.len() + ir
    }

    pub fn node(&self, idx: usize) -> (f64, f64) {
        let nr = self.radii.len();
        (self.radii[idx % nr], self.heights[idx / nr])
    }

    pub fn from_fn(&self, f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
        (0..self.len())
            .map(|i| {
                let (r, z) = self.node(i);
                f(r, z)
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeridianField {
    pub grid: MeridianGrid,
    pub vr: Vec<f64>,
    pub vtheta: Vec<f64>,
    pub vz: Vec<f64>,
    /// Largest angular deviation found on ingestion, relative to the peak speed.
    pub deviation: f64,
}

impl MeridianField {
    /// Analytic meridian data; `f(r, z) = [v_r, v_theta, v_z]`. Axis values of
    /// `v_r` and `v_theta` are forced to zero.
    pub fn from_fn(grid: MeridianGrid, f: impl Fn(f64, f64) -> [f64; 3]) -> Self {
        let n = grid.len();
        let (mut vr, mut vt, mut vz) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
        for i in 0..n {
            let (r, z) = grid.node(i);
            let v = f(r, z);
            if r > 0.0 {
                vr[i] = v[0];
                vt[i] = v[1];
            }
            vz[i] = v[2];
        }
        Self {
            grid,
            vr,
            vtheta: vt,
            vz,
            deviation: 0.0,
        }
    }

    pub fn speed(&self, i: usize) -> f64 {
        (self.vr[i].powi(2) + self.vtheta[i].powi(2) + self.vz[i].powi(2)).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CylindricalOptions {
    pub grid: MeridianGrid,
    /// Rays per ring.
    pub angles: usize,
    /// Allowed angular deviation relative to the peak speed.
    pub tolerance: f64,
}

impl CylindricalOptions {
    pub fn new(grid: MeridianGrid) -> Self {
        Self {
            grid,
            angles: 64,
            tolerance: 1e-8,
        }
    }
}

pub fn to_cylindrical(v: &VectorField, axis: &Axis, opts: &CylindricalOptions) -> Result<MeridianField, AxisymError> {
    let slice = TrigSlice::from_sampled(std::sync::Arc::new(v.clone()));
    to_cylindrical_slice(&slice, axis, opts)
}

/// Angular averages of the cylindrical components over `opts.angles` rays.
pub fn to_cylindrical_slice(
    slice: &dyn FieldSlice,
    axis: &Axis,
    opts: &CylindricalOptions,
) -> Result<MeridianField, AxisymError> {
    let [e1, e2, e3] = axis.frame()?;
    let na = opts.angles;
    if na < 4 {
        return Err(AxisymError::InvalidParameter("need at least 4 angles".into()));
    }
    let grid = &opts.grid;
    let dirs: Vec<(f64, f64)> = (0..na)
        .map(|a| {
            let th = std::f64::consts::TAU * a as f64 / na as f64;
            (th.cos(), th.sin())
        })
        .collect();
    let mut pts = Vec::with_capacity(grid.len() * na);
    for i in 0..grid.len() {
        let (r, z) = grid.node(i);
        for &(c, s) in &dirs {
            pts.push([0, 1, 2].map(|k| axis.point[k] + z * e3[k] + r * (c * e1[k] + s * e2[k])));
        }
    }
    let chans = [Channel::v(0), Channel::v(1), Channel::v(2)];
    let vals = slice.sample(&pts, &chans);
    let n = grid.len();
    let mut comps = vec![[0.0; 3]; n * na];
    let mut peak: f64 = 0.0;
    for i in 0..n {
        for (a, &(c, s)) in dirs.iter().enumerate() {
            let v = &vals[(i * na + a) * 3..(i * na + a) * 3 + 3];
            let v = [v[0], v[1], v[2]];
            let er = [0, 1, 2].map(|k| c * e1[k] + s * e2[k]);
            let et = [0, 1, 2].map(|k| -s * e1[k] + c * e2[k]);
            comps[i * na + a] = [dot(v, er), dot(v, et), dot(v, e3)];
            peak = peak.max(dot(v, v).sqrt());
        }
    }
    let (mut vr, mut vt, mut vz) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    let mut dev: f64 = 0.0;
    for i in 0..n {
        let ring = &comps[i * na..(i + 1) * na];
        let mean = [0, 1, 2].map(|k| ring.iter().map(|c| c[k]).sum::<f64>() / na as f64);
        let on_axis = grid.node(i).0 == 0.0;
        for c in ring {
            if on_axis {
                // horizontal velocity must vanish on the axis
                dev = dev.max(c[0].hypot(c[1])).max((c[2] - mean[2]).abs());
            } else {
                for k in 0..3 {
                    dev = dev.max((c[k] - mean[k]).abs());
                }
            }
        }
        if !on_axis {
            vr[i] = mean[0];
            vt[i] = mean[1];
        }
        vz[i] = mean[2];
    }
    let deviation = if peak > 0.0 { dev / peak } else { 0.0 };
    if deviation > opts.tolerance {
        return Err(AxisymError::NotAxisymmetric {
            deviation,
            tolerance: opts.tolerance,
        });
    }
    Ok(MeridianField {
        grid: grid.clone(),
        vr,
        vtheta: vt,
        vz,
        deviation,
    })
}

/// Values on a meridian grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeridianScalar {
    pub grid: MeridianGrid,
    pub values: Vec<f64>,
}

/// `r v_theta` at every node.
pub fn swirl(m: &MeridianField) -> MeridianScalar {
    let values = (0..m.grid.len()).map(|i| m.grid.node(i).0 * m.vtheta[i]).collect();
    MeridianScalar {
        grid: m.grid.clone(),
        values,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConeNode {
    pub r: f64,
    pub z: f64,
    pub speed: f64,
    /// `|v_z| / |v|`
    pub ratio: f64,
}

/// Best `delta` for a speed threshold `m`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrontierPoint {
    pub m: f64,
    pub delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VelocityConeCheck {
    pub delta: f64,
    pub m: f64,
    pub pass: bool,
    /// Largest ratio among nodes faster than `m`; first node on ties.
    pub worst: Option<ConeNode>,
    /// Staircase of `(M, best delta)`, `M` decreasing.
    pub frontier: Vec<FrontierPoint>,
}

/// Checks `|v| <= m` or `|v_z| / |v| <= 1 - delta` at every node.
pub fn velocity_cone_check(field: &MeridianField, delta: f64, m: f64) -> Result<VelocityConeCheck, AxisymError> {
    if !(delta > 0.0 && delta <= 1.0) || !(m >= 0.0) {
        return Err(AxisymError::InvalidParameter("need delta in (0, 1] and M >= 0".into()));
    }
    let nodes: Vec<ConeNode> = (0..field.grid.len())
        .map(|i| {
            let (r, z) = field.grid.node(i);
            let speed = field.speed(i);
            let ratio = if speed > 0.0 { field.vz[i].abs() / speed } else { 0.0 };
            ConeNode { r, z, speed, ratio }
        })
        .collect();
    let mut worst: Option<ConeNode> = None;
    for n in nodes.iter().filter(|n| n.speed > m) {
        if worst.is_none_or(|w| n.ratio > w.ratio) {
            worst = Some(*n);
        }
    }
    let pass = worst.is_none_or(|w| w.ratio <= 1.0 - delta);

    let mut order: Vec<&ConeNode> = nodes.iter().filter(|n| n.speed > 0.0).collect();
    order.sort_by(|a, b| b.speed.total_cmp(&a.speed));
    let mut frontier = Vec::new();
    let mut running: f64 = 0.0;
    let mut k = 0;
    while k < order.len() {
        let s = order[k].speed;
        let mut group: f64 = 0.0;
        while k < order.len() && order[k].speed == s {
            group = group.max(order[k].ratio);
            k += 1;
        }
        if group > running {
            // M = s excludes this group and everything slower
            frontier.push(FrontierPoint { m: s, delta: 1.0 - running });
            running = group;
        }
    }
    frontier.push(FrontierPoint { m: 0.0, delta: 1.0 - running });
    Ok(VelocityConeCheck {
        delta,
        m,
        pass,
        worst,
        frontier,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::GridSpec;
    use std::f64::consts::PI;

    fn gaussian_vortex(g: GridSpec) -> VectorField {
        VectorField::from_fn(g, 0.0, |x| {
            let (a, b) = (x[0] - PI, x[1] - PI);
            let e = (-(a * a + b * b) / 0.36).exp();
            [-b * e, a * e, 0.0]
        })
    }

    fn opts() -> CylindricalOptions {
        CylindricalOptions::new(MeridianGrid::uniform(1.5, 16, 0.0, 2.0, 5).unwrap())
    }

    #[test]
    fn swirl_free_vortex_maps_to_azimuthal_velocity() {
        let v = gaussian_vortex(GridSpec::cube(64).unwrap());
        let m = to_cylindrical(&v, &Axis::vertical(PI, PI), &opts()).unwrap();
        for i in 0..m.grid.len() {
            let (r, _) = m.grid.node(i);
            let expect = r * (-r * r / 0.36).exp();
            assert!((m.vtheta[i] - expect).abs() < 1e-9, "{i}");
            assert!(m.vr[i].abs() < 1e-9 && m.vz[i].abs() < 1e-9);
        }
        assert!(m.deviation <= 1e-8);
        let s = swirl(&m);
        for i in 0..m.grid.len() {
            let (r, _) = m.grid.node(i);
            assert!((s.values[i] - r * r * (-r * r / 0.36).exp()).abs() < 1e-9);
        }
    }

    #[test]
    fn vertical_jet_and_taylor_green() {
        let g = GridSpec::cube(64).unwrap();
        let jet = VectorField::from_fn(g, 0.0, |x| {
            let rr = (x[0] - PI).powi(2) + (x[1] - PI).powi(2);
            [0.0, 0.0, (-rr / 0.36).exp()]
        });
        let m = to_cylindrical(&jet, &Axis::vertical(PI, PI), &opts()).unwrap();
        for i in 0..m.grid.len() {
            let (r, _) = m.grid.node(i);
            assert!((m.vz[i] - (-r * r / 0.36).exp()).abs() < 1e-9);
            assert!(m.vr[i].abs() < 1e-9 && m.vtheta[i].abs() < 1e-9);
        }
        let tg = VectorField::from_fn(g, 0.0, |x| {
            [x[0].sin() * x[1].cos() * x[2].cos(), -x[0].cos() * x[1].sin() * x[2].cos(), 0.0]
        });
        match to_cylindrical(&tg, &Axis::vertical(PI, PI), &opts()) {
            Err(AxisymError::NotAxisymmetric { deviation, .. }) => assert!(deviation > 1e-3),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn tilted_axis_frame_is_orthonormal() {
        let f = Axis {
            point: [0.0; 3],
            direction: [1.0, 2.0, -0.5],
        }
        .frame()
        .unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let d = dot(f[i], f[j]);
                assert!((d - if i == j { 1.0 } else { 0.0 }).abs() < 1e-14);
            }
        }
        assert!((dot(cross(f[0], f[1]), f[2]) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn rigid_rotation_swirl() {
        let grid = MeridianGrid::uniform(1.0, 11, 0.0, 1.0, 3).unwrap();
        let m = MeridianField::from_fn(grid, |r, _| [0.0, r, 0.0]);
        let s = swirl(&m);
        for i in 0..s.grid.len() {
            let r = s.grid.node(i).0;
            assert!((s.values[i] - r * r).abs() < 1e-15);
        }
        let far = MeridianField::from_fn(
            MeridianGrid::new(vec![0.0, 0.5, 1.0, 2.0], vec![0.0, 1.0]).unwrap(),
            |r, _| [0.0, 1.0 / r, 0.0],
        );
        let s = swirl(&far);
        for i in 0..s.grid.len() {
            if s.grid.node(i).0 > 0.0 {
                assert!((s.values[i] - 1.0).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn cone_check_trivial_cases() {
        let grid = MeridianGrid::uniform(1.0, 5, -1.0, 1.0, 5).unwrap();
        let flat = MeridianField::from_fn(grid.clone(), |r, z| [z, 1.0 + r, 0.0]);
        for d in [0.1, 0.5, 0.999] {
            assert!(velocity_cone_check(&flat, d, 0.0).unwrap().pass);
        }
        let up = MeridianField::from_fn(grid, |_, _| [0.0, 0.0, 1.0]);
        for d in [1e-6, 0.3, 1.0] {
            let c = velocity_cone_check(&up, d, 0.0).unwrap();
            assert!(!c.pass);
            let w = c.worst.unwrap();
            assert_eq!(w.ratio, 1.0);
            assert_eq!((w.r, w.z), (0.0, -1.0));
        }
        assert!(velocity_cone_check(&up, 0.5, 1.0).unwrap().pass);
        assert!(velocity_cone_check(&up, 0.0, 1.0).is_err());
    }

    #[test]
    fn cone_check_matches_brute_force_and_frontier() {
        let grid = MeridianGrid::uniform(1.0, 13, -1.0, 1.0, 9).unwrap();
        let m = MeridianField::from_fn(grid, |r, z| [r * z, (3.0 * r).sin(), (z * 2.0).cos() * r + 0.2]);
        let (delta, thr) = (0.3, 0.4);
        let c = velocity_cone_check(&m, delta, thr).unwrap();
        let mut best = (-1.0, 0);
        for i in 0..m.grid.len() {
            let s = m.speed(i);
            if s > thr {
                let q = m.vz[i].abs() / s;
                if q > best.0 {
                    best = (q, i);
                }
            }
        }
        let w = c.worst.unwrap();
        assert_eq!(w.ratio, best.0);
        assert_eq!((w.r, w.z), m.grid.node(best.1));
        assert_eq!(c.pass, best.0 <= 1.0 - delta);
        // every frontier pair passes, and a slightly larger delta fails
        assert!(c.frontier.len() > 1);
        for f in c.frontier.iter().filter(|f| f.delta > 0.0) {
            assert!(velocity_cone_check(&m, f.delta, f.m).unwrap().pass);
            if f.delta < 1.0 - 1e-9 {
                assert!(!velocity_cone_check(&m, f.delta + 1e-9, f.m).unwrap().pass);
            }
        }
    }
}
