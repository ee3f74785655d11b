use serde::{Deserialize, Serialize};

use super::{AxisymError, StreamFunction};

/// Something that yields `[psi, dr psi, dz psi]` in the meridian plane.
pub trait StreamSource {
    fn eval(&self, r: f64, z: f64) -> Result<[f64; 3], AxisymError>;
    /// Natural resolution; the default exploration step.
    fn spacing(&self) -> f64;
}

impl StreamSource for StreamFunction {
    fn eval(&self, r: f64, z: f64) -> Result<[f64; 3], AxisymError> {
        StreamFunction::eval(self, r, z)
    }

    fn spacing(&self) -> f64 {
        let min_gap = |v: &[f64]| v.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
        min_gap(&self.grid.radii).min(min_gap(&self.grid.heights))
    }
}

/// Closed-form `psi` with its gradient.
pub struct AnalyticStream<F> {
    pub f: F,
    pub spacing: f64,
}

impl<F: Fn(f64, f64) -> [f64; 3]> StreamSource for AnalyticStream<F> {
    fn eval(&self, r: f64, z: f64) -> Result<[f64; 3], AxisymError> {
        Ok((self.f)(r, z))
    }

    fn spacing(&self) -> f64 {
        self.spacing
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    /// Follow the level set toward the axis.
    LevelSet,
    /// Move toward the axis at fixed height.
    Radial,
}

/// Consecutive trace points `start..=end` walked in one mode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub mode: Mode,
    pub start: usize,
    pub end: usize,
    /// `psi(end) - psi(start)`
    pub psi_change: f64,
    /// Sum of the per-step `|delta psi|`.
    pub variation: f64,
    pub radial_travel: f64,
    pub steps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplorationTrace {
    pub start: [f64; 2],
    pub c1: f64,
    pub c2: f64,
    pub step: f64,
    pub drift_tolerance: f64,
    /// Visited `(r, z)`.
    pub points: Vec<[f64; 2]>,
    pub psi: Vec<f64>,
    pub segments: Vec<Segment>,
    pub final_point: [f64; 2],
    pub reached_axis: bool,
    /// Arrival at the axis while following a level set.
    pub axis_in_level_set_mode: bool,
    pub inside_unit_ball: bool,
    pub psi_start_abs: f64,
    /// Accumulated `|delta psi|` over radial segments.
    pub radial_variation: f64,
    /// Accumulated `|delta psi|` over level-set segments.
    pub level_set_drift: f64,
    /// `3 C1 r0`
    pub bound: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExploreOptions {
    /// Defaults to the source spacing.
    pub step: Option<f64>,
    pub max_steps: usize,
    /// Allowed `|psi|` drift per level-set step, relative to `C1 * step`.
    pub drift_rel: f64,
    pub newton_iterations: usize,
}

impl Default for ExploreOptions {
    fn default() -> Self {
        Self {
            step: None,
            max_steps: 1_000_000,
            drift_rel: 1e-6,
            newton_iterations: 8,
        }
    }
}

struct Tracer<'a, S: ?Sized> {
    src: &'a S,
    trace: ExplorationTrace,
    steps: usize,
    max_steps: usize,
}

impl<S: StreamSource + ?Sized> Tracer<'_, S> {
    fn push(&mut self, p: [f64; 2], psi: f64) {
        self.trace.points.push(p);
        self.trace.psi.push(psi);
    }

    fn tick(&mut self) -> Result<(), AxisymError> {
        self.steps += 1;
        if self.steps > self.max_steps {
            return Err(AxisymError::NonTermination {
                steps: self.max_steps,
                trace: Box::new(self.finish()),
            });
        }
        Ok(())
    }

    fn finish(&self) -> ExplorationTrace {
        let mut t = self.trace.clone();
        let last = *t.points.last().unwrap_or(&t.start);
        t.final_point = last;
        t.inside_unit_ball = t.points.iter().all(|p| p[0] * p[0] + p[1] * p[1] <= 1.0);
        t.radial_variation = t.segments.iter().filter(|s| s.mode == Mode::Radial).map(|s| s.variation).sum();
        t.level_set_drift = t.segments.iter().filter(|s| s.mode == Mode::LevelSet).map(|s| s.variation).sum();
        t.pass = t.reached_axis && t.psi_start_abs <= t.bound;
        t
    }

    fn open(&mut self, mode: Mode) {
        let i = self.trace.points.len() - 1;
        self.trace.segments.push(Segment {
            mode,
            start: i,
            end: i,
            psi_change: 0.0,
            variation: 0.0,
            radial_travel: 0.0,
            steps: 0,
        });
    }

    fn advance(&mut self, p: [f64; 2], psi: f64) {
        let (q, qpsi) = (*self.trace.points.last().unwrap(), *self.trace.psi.last().unwrap());
        self.push(p, psi);
        let end = self.trace.points.len() - 1;
        let seg = self.trace.segments.last_mut().unwrap();
        let first = self.trace.psi[seg.start];
        seg.end = end;
        seg.psi_change = psi - first;
        seg.variation += (psi - qpsi).abs();
        seg.radial_travel += (q[0] - p[0]).max(0.0);
        seg.steps += 1;
    }
}

/// Unit tangent of the level set through a point, oriented toward the axis.
fn tangent(dr: f64, dz: f64) -> [f64; 2] {
    let n = dr.hypot(dz);
    let t = [-dz / n, dr / n];
    if t[0] > 0.0 {
        [-t[0], -t[1]]
    } else {
        t
    }
}

/// Walks from `start = (r0, z0)` to the axis, alternating between following
/// level sets where `|dr psi|` is large and radial moves where it is small,
/// with switching thresholds `2 C1 - 1` and `2 C1 + 1`.
pub fn explore_level_set<S: StreamSource + ?Sized>(
    src: &S,
    start: [f64; 2],
    c1: f64,
    c2: f64,
    opts: &ExploreOptions,
) -> Result<ExplorationTrace, AxisymError> {
    if !(c1 > 10.0 && c2 > 10.0) {
        return Err(AxisymError::InvalidParameter("C1 and C2 must exceed 10".into()));
    }
    let eps = 1.0 / (100.0 * c2);
    let [r0, z0] = start;
    if !(r0 >= 0.0) || r0.hypot(z0) >= eps {
        return Err(AxisymError::InvalidParameter(format!(
            "start must satisfy r >= 0 and |(r, z)| < {eps}"
        )));
    }
    let h = opts.step.unwrap_or_else(|| src.spacing());
    if !(h > 0.0) || !h.is_finite() {
        return Err(AxisymError::InvalidParameter("step must be positive".into()));
    }
    let axis_tol = h / 2.0;
    let tol = opts.drift_rel * c1 * h;
    let (low, high) = (2.0 * c1 - 1.0, 2.0 * c1 + 1.0);
    let [psi0, dr0, _] = src.eval(r0, z0)?;
    let mut tr = Tracer {
        src,
        trace: ExplorationTrace {
            start,
            c1,
            c2,
            step: h,
            drift_tolerance: tol,
            points: vec![],
            psi: vec![],
            segments: vec![],
            final_point: start,
            reached_axis: false,
            axis_in_level_set_mode: false,
            inside_unit_ball: true,
            psi_start_abs: psi0.abs(),
            radial_variation: 0.0,
            level_set_drift: 0.0,
            bound: 3.0 * c1 * r0,
            pass: false,
        },
        steps: 0,
        max_steps: opts.max_steps,
    };
    tr.push(start, psi0);
    let mut mode = if dr0.abs() > 2.0 * c1 { Mode::LevelSet } else { Mode::Radial };
    tr.open(mode);
    loop {
        let p = *tr.trace.points.last().unwrap();
        if p[0] <= axis_tol {
            tr.trace.reached_axis = true;
            tr.trace.axis_in_level_set_mode = mode == Mode::LevelSet;
            break;
        }
        let [_, dr, dz] = tr.src.eval(p[0], p[1])?;
        match mode {
            Mode::LevelSet => {
                if dr.abs() <= low {
                    mode = Mode::Radial;
                    tr.open(mode);
                    continue;
                }
                if dr.abs() > 3.0 * c2 * dz.abs() {
                    return Err(AxisymError::GuardViolation {
                        r: p[0],
                        z: p[1],
                        dr: dr.abs(),
                        dz: dz.abs(),
                        trace: Box::new(tr.finish()),
                    });
                }
                tr.tick()?;
                let target = tr.trace.psi[tr.trace.segments.last().unwrap().start];
                let next = level_step(tr.src, p, [dr, dz], target, h / 4.0, tol, opts.newton_iterations)?;
                tr.advance(next.0, next.1);
            }
            Mode::Radial => {
                if dr.abs() >= high {
                    mode = Mode::LevelSet;
                    tr.open(mode);
                    continue;
                }
                tr.tick()?;
                let r1 = (p[0] - h).max(0.0);
                let [psi1, dr1, _] = tr.src.eval(r1, p[1])?;
                if dr1.abs() >= high {
                    // first crossing of the upper threshold below p
                    let (mut lo, mut hi) = (r1, p[0]);
                    for _ in 0..60 {
                        let mid = 0.5 * (lo + hi);
                        if tr.src.eval(mid, p[1])?[1].abs() >= high {
                            lo = mid;
                        } else {
                            hi = mid;
                        }
                        if hi - lo <= 1e-6 * h {
                            break;
                        }
                    }
                    let v = tr.src.eval(lo, p[1])?[0];
                    tr.advance([lo, p[1]], v);
                } else {
                    tr.advance([r1, p[1]], psi1);
                }
            }
        }
    }
    Ok(tr.finish())
}

/// One tangent step of length at most `s` followed by Newton projection back
/// onto `psi = target`; halves the step until the drift meets `tol`.
fn level_step<S: StreamSource + ?Sized>(
    src: &S,
    p: [f64; 2],
    grad: [f64; 2],
    target: f64,
    s: f64,
    tol: f64,
    iterations: usize,
) -> Result<([f64; 2], f64), AxisymError> {
    let t0 = tangent(grad[0], grad[1]);
    let mut s = s.min(p[0] / -t0[0]);
    for _ in 0..40 {
        let mid = [p[0] + 0.5 * s * t0[0], p[1] + 0.5 * s * t0[1]];
        let [_, mr, mz] = src.eval(mid[0].max(0.0), mid[1])?;
        let tm = tangent(mr, mz);
        let mut q = [(p[0] + s * tm[0]).max(0.0), p[1] + s * tm[1]];
        let mut val = src.eval(q[0], q[1])?;
        for _ in 0..iterations {
            let e = val[0] - target;
            if e.abs() <= tol {
                break;
            }
            let g2 = val[1] * val[1] + val[2] * val[2];
            q = [(q[0] - e * val[1] / g2).max(0.0), q[1] - e * val[2] / g2];
            val = src.eval(q[0], q[1])?;
        }
        if (val[0] - target).abs() <= tol && q[0] < p[0] {
            return Ok((q, val[0]));
        }
        s *= 0.5;
    }
    // accept the best available point; the drift shows up in the trace
    let q = [(p[0] + s * t0[0]).max(0.0), p[1] + s * t0[1]];
    let val = src.eval(q[0], q[1])?;
    Ok((q, val[0]))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quadratic() -> AnalyticStream<impl Fn(f64, f64) -> [f64; 3]> {
        AnalyticStream {
            f: |r: f64, _z: f64| [r * r / 2.0, r, 0.0],
            spacing: 1e-5,
        }
    }

    /// `psi = K r z + G(r)` with `G'` equal to `height` on `[a, a + w]`,
    /// smoothed over `tau`.
    fn banded(k: f64, bands: Vec<(f64, f64, f64)>, tau: f64) -> impl Fn(f64, f64) -> [f64; 3] {
        let lncosh = |x: f64| x.abs() + (-2.0 * x.abs()).exp().ln_1p() - std::f64::consts::LN_2;
        move |r: f64, z: f64| {
            let mut g = 0.0;
            let mut dg = 0.0;
            for &(a, w, hgt) in &bands {
                let prim = |x: f64| 0.5 * hgt * tau * (lncosh((x - a) / tau) - lncosh((x - a - w) / tau));
                g += prim(r) - prim(0.0);
                dg += 0.5 * hgt * (((r - a) / tau).tanh() - ((r - a - w) / tau).tanh());
            }
            [k * r * z + g, k * z + dg, k * r]
        }
    }

    #[test]
    fn quadratic_psi_is_a_single_radial_segment() {
        let t = explore_level_set(&quadratic(), [5e-4, 1e-4], 11.0, 11.0, &ExploreOptions::default()).unwrap();
        assert_eq!(t.segments.len(), 1);
        assert_eq!(t.segments[0].mode, Mode::Radial);
        assert!(t.points.iter().all(|p| p[1] == 1e-4));
        assert!(t.reached_axis && t.pass);
        assert!((t.psi_start_abs - 1.25e-7).abs() < 1e-20);
        assert!(t.points.windows(2).all(|w| w[1][0] < w[0][0]));
    }

    #[test]
    fn zero_psi_terminates_immediately() {
        let zero = AnalyticStream {
            f: |_: f64, _: f64| [0.0; 3],
            spacing: 1e-3,
        };
        let t = explore_level_set(&zero, [2e-4, 0.0], 11.0, 11.0, &ExploreOptions::default()).unwrap();
        assert_eq!(t.points.len(), 1);
        assert!(t.pass && t.psi_start_abs == 0.0);
    }

    #[test]
    fn preconditions_are_enforced() {
        let o = ExploreOptions::default();
        assert!(explore_level_set(&quadratic(), [5e-4, 0.0], 10.0, 11.0, &o).is_err());
        assert!(explore_level_set(&quadratic(), [1e-3, 0.0], 11.0, 11.0, &o).is_err());
        assert!(explore_level_set(&quadratic(), [-1e-5, 0.0], 11.0, 11.0, &o).is_err());
    }

    #[test]
    fn banded_psi_switches_modes_and_keeps_the_certificate() {
        let k = 1e4;
        let f = banded(k, vec![(6e-4, 1.2e-5, 30.0), (3e-4, 1.2e-5, 30.0)], 1e-6);
        // slope bound on the box r <= 1e-3, |z| <= 5e-4
        for i in 0..=200 {
            for j in 0..=200 {
                let (r, z) = (1e-3 * i as f64 / 200.0, -5e-4 + 1e-3 * j as f64 / 200.0);
                let [_, dr, dz] = f(r, z);
                assert!(dr.abs() <= 11.0 + 11.0 * dz.abs(), "{r} {z}");
            }
        }
        let src = AnalyticStream { f, spacing: 1e-6 };
        let t = explore_level_set(&src, [8e-4, -1e-4], 11.0, 11.0, &ExploreOptions::default()).unwrap();
        let modes: Vec<Mode> = t.segments.iter().map(|s| s.mode).collect();
        assert_eq!(
            modes,
            [Mode::Radial, Mode::LevelSet, Mode::Radial, Mode::LevelSet, Mode::Radial]
        );
        assert!(t.reached_axis && !t.axis_in_level_set_mode && t.inside_unit_ball);
        assert!(t.points.iter().all(|p| p[1].abs() <= 5e-4));
        let direct = (src.f)(8e-4, -1e-4)[0].abs();
        assert_eq!(t.psi_start_abs, direct);
        assert!(t.pass && direct <= 3.0 * 11.0 * 8e-4);
        for s in &t.segments {
            match s.mode {
                Mode::LevelSet => assert!(s.psi_change.abs() <= t.drift_tolerance * s.steps as f64),
                Mode::Radial => assert!(s.psi_change.abs() <= 23.0 * s.radial_travel * (1.0 + 1e-9)),
            }
        }
        assert!(t.segments.iter().filter(|s| s.mode == Mode::Radial).all(|s| {
            t.points[s.start..=s.end].windows(2).all(|w| w[1][0] <= w[0][0])
        }));
    }

    #[test]
    fn guard_violation_is_reported() {
        // steep radial slope with a flat height profile
        let src = AnalyticStream {
            f: |r: f64, z: f64| [50.0 * r + 1e-3 * r * z, 50.0 + 1e-3 * z, 1e-3 * r],
            spacing: 1e-5,
        };
        match explore_level_set(&src, [5e-4, 0.0], 11.0, 11.0, &ExploreOptions::default()) {
            Err(AxisymError::GuardViolation { trace, .. }) => assert_eq!(trace.points.len(), 1),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn works_on_a_gridded_stream_function() {
        let grid = super::super::MeridianGrid::uniform(1e-3, 101, -1e-3, 1e-3, 41).unwrap();
        let s = StreamFunction::from_fn(grid, |r, z| r * r * (1.0 + z));
        let t = explore_level_set(&s, [6e-4, 2e-4], 11.0, 11.0, &ExploreOptions::default()).unwrap();
        assert!(t.pass && t.reached_axis);
        assert!((t.step - 1e-5).abs() < 1e-18);
        assert!(t.psi.last().unwrap().abs() < 1e-9);
    }
}
