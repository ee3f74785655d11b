//! Pointwise access to flows in space and time.
//!
//! A [`FieldSlice`] is one instant of a flow that can be evaluated anywhere,
//! together with derivatives. A [`Flow`] hands out slices and knows how to
//! integrate and difference in time, which differs between closed-form fields
//! (any instant is available) and snapshot series (only the stored instants).

use std::sync::{Arc, OnceLock};

use super::analytic::AnalyticField;
use super::grid::{GridSpec, VectorField};
use super::plane::{sample_terms, Channel, Deriv, Source, Terms};
use super::spectral::{pressure_spectrum, Spectral};
use super::trig::{Jet, StaticScalar, TrigScalar, TrigVector};
use super::FieldError;
use crate::quad::GaussLegendre;

/// Relative magnitude below which Fourier terms of sampled fields are dropped.
pub const PRUNE_REL: f64 = 1e-14;

pub trait FieldSlice: Send + Sync {
    fn time(&self) -> f64;
    /// Velocity with derivatives up to `order` (0, 1 or 2).
    fn velocity(&self, x: [f64; 3], order: usize) -> Jet;
    fn vorticity(&self, x: [f64; 3], order: usize) -> Jet;
    /// Pressure with zero spatial mean.
    fn pressure(&self, x: [f64; 3]) -> f64;

    /// `channels` at every point, point-major. Pressure derivatives are only
    /// available from slices that override this.
    fn sample(&self, pts: &[[f64; 3]], channels: &[Channel]) -> Vec<f64> {
        let order = |src: Source| {
            channels
                .iter()
                .filter(|c| c.source == src)
                .map(|c| c.deriv.order())
                .max()
        };
        let (ov, ow) = (order(Source::Velocity), order(Source::Vorticity));
        let mut out = Vec::with_capacity(pts.len() * channels.len());
        for &x in pts {
            let jv = ov.map(|o| self.velocity(x, o));
            let jw = ow.map(|o| self.vorticity(x, o));
            for ch in channels {
                out.push(match ch.source {
                    Source::Velocity => pick(jv.as_ref(), ch),
                    Source::Vorticity => pick(jw.as_ref(), ch),
                    Source::Pressure if ch.deriv == Deriv::Value => self.pressure(x),
                    Source::Pressure => f64::NAN,
                });
            }
        }
        out
    }
}

fn pick(jet: Option<&Jet>, ch: &Channel) -> f64 {
    let j = jet.expect("jet requested for channel");
    match ch.deriv {
        Deriv::Value => j.val[ch.comp],
        Deriv::D(i) => j.grad[ch.comp][i],
        Deriv::DD(i, k) => j.hess[ch.comp][i][k],
    }
}

pub trait Flow: Sync {
    type Slice: FieldSlice;

    fn slice(&self, t: f64) -> Result<Arc<Self::Slice>, FieldError>;

    /// Nodes and weights integrating over `[a, b]` in time.
    fn time_rule(&self, a: f64, b: f64) -> Result<Vec<(f64, f64)>, FieldError>;

    /// Nodes and weights for `int_a^b g(t) weight(t) dt`, where `g` is only
    /// evaluated at the nodes and `weight` is known everywhere.
    fn weighted_time_rule(
        &self,
        a: f64,
        b: f64,
        weight: &dyn Fn(f64) -> f64,
    ) -> Result<Vec<(f64, f64)>, FieldError> {
        Ok(self
            .time_rule(a, b)?
            .into_iter()
            .map(|(t, w)| (t, w * weight(t)))
            .collect())
    }

    /// Instants in `[a, b]` over which suprema in time are taken.
    fn time_samples(&self, a: f64, b: f64) -> Result<Vec<f64>, FieldError>;

    /// Instants `(t_minus, t_plus)` bracketing `t` for a centered difference.
    fn time_neighbors(&self, t: f64) -> Result<(f64, f64), FieldError>;

    /// Largest probe radius free of periodic self-overlap, if the flow is periodic.
    fn safe_radius(&self) -> Option<f64>;

    fn period(&self) -> Option<[f64; 3]>;
}

/// Trigonometric interpolant of a sampled vector field.
pub fn trig_of(v: &VectorField) -> TrigVector {
    let sp = Spectral::new(v.grid);
    sp.to_trig(&sp.forward3(&v.components), PRUNE_REL)
}

/// Samples components or derivatives of a plane-wave sum, point-major.
pub fn sample_poly(poly: &TrigVector, pts: &[[f64; 3]], channels: &[(usize, Deriv)]) -> Vec<f64> {
    let terms: Vec<Terms> = channels.iter().map(|&(c, d)| Terms::of_vector(poly, c, d)).collect();
    sample_terms(&terms, pts)
}

/// A slice held as explicit plane-wave sums.
#[derive(Debug)]
pub struct TrigSlice {
    time: f64,
    period: Option<[f64; 3]>,
    velocity: TrigVector,
    vorticity: TrigVector,
    pressure: OnceLock<StaticScalar>,
    source: Option<Arc<VectorField>>,
}

impl TrigSlice {
    pub fn from_analytic(field: &AnalyticField, pressure: &TrigScalar, t: f64) -> Self {
        let velocity = field.at(t);
        let vorticity = velocity.curl();
        Self {
            time: t,
            period: None,
            velocity,
            vorticity,
            pressure: OnceLock::from(pressure.at(t)),
            source: None,
        }
    }

    /// Trigonometric interpolant of nodal samples; pressure is built on first use.
    pub fn from_sampled(v: Arc<VectorField>) -> Self {
        let sp = Spectral::new(v.grid);
        let spec = sp.forward3(&v.components);
        let velocity = sp.to_trig(&spec, PRUNE_REL);
        let vorticity = velocity.curl();
        Self {
            time: v.time,
            period: Some(v.grid.len),
            velocity,
            vorticity,
            pressure: OnceLock::new(),
            source: Some(v),
        }
    }

    pub fn velocity_poly(&self) -> &TrigVector {
        &self.velocity
    }

    pub fn vorticity_poly(&self) -> &TrigVector {
        &self.vorticity
    }

    pub fn period(&self) -> Option<[f64; 3]> {
        self.period
    }

    pub fn pressure_poly(&self) -> &StaticScalar {
        self.pressure.get_or_init(|| match &self.source {
            Some(v) => {
                let (fine, spec) = pressure_spectrum(v);
                fine.scalar_to_trig(&spec, PRUNE_REL)
            }
            None => StaticScalar::default(),
        })
    }
}

impl FieldSlice for TrigSlice {
    fn time(&self) -> f64 {
        self.time
    }

    fn velocity(&self, x: [f64; 3], order: usize) -> Jet {
        self.velocity.jet(x, order)
    }

    fn vorticity(&self, x: [f64; 3], order: usize) -> Jet {
        self.vorticity.jet(x, order)
    }

    fn pressure(&self, x: [f64; 3]) -> f64 {
        self.pressure_poly().value(x)
    }

    fn sample(&self, pts: &[[f64; 3]], channels: &[Channel]) -> Vec<f64> {
        let terms: Vec<Terms> = channels
            .iter()
            .map(|ch| match ch.source {
                Source::Velocity => Terms::of_vector(&self.velocity, ch.comp, ch.deriv),
                Source::Vorticity => Terms::of_vector(&self.vorticity, ch.comp, ch.deriv),
                Source::Pressure => Terms::of_scalar(self.pressure_poly(), ch.deriv),
            })
            .collect();
        sample_terms(&terms, pts)
    }
}

/// Closed-form flow; any instant is available.
#[derive(Debug, Clone)]
pub struct AnalyticFlow {
    pub field: AnalyticField,
    pressure: TrigScalar,
    /// Gauss nodes per time integral and samples per time supremum.
    pub time_nodes: usize,
    /// Half-width of centered time differences.
    pub time_step: f64,
}

impl AnalyticFlow {
    pub fn new(field: AnalyticField) -> Self {
        let pressure = field.pressure();
        Self {
            field,
            pressure,
            time_nodes: 16,
            time_step: 1e-4,
        }
    }

    pub fn with_time_nodes(mut self, n: usize) -> Self {
        self.time_nodes = n.max(2);
        self
    }

    /// The exact rescaled flow `lambda v(x0 + lambda x, t0 + lambda^2 t)`.
    pub fn rescale(&self, lambda: f64, x0: [f64; 3], t0: f64) -> Self {
        Self {
            field: self.field.rescale(lambda, x0, t0),
            pressure: TrigScalar::default(),
            time_nodes: self.time_nodes,
            time_step: self.time_step,
        }
        .with_pressure()
    }

    fn with_pressure(mut self) -> Self {
        self.pressure = self.field.pressure();
        self
    }

    pub fn pressure_poly(&self) -> &TrigScalar {
        &self.pressure
    }
}

impl Flow for AnalyticFlow {
    type Slice = TrigSlice;

    fn slice(&self, t: f64) -> Result<Arc<TrigSlice>, FieldError> {
        Ok(Arc::new(TrigSlice::from_analytic(&self.field, &self.pressure, t)))
    }

    fn time_rule(&self, a: f64, b: f64) -> Result<Vec<(f64, f64)>, FieldError> {
        Ok(GaussLegendre::new(self.time_nodes).on(a, b).collect())
    }

    fn weighted_time_rule(
        &self,
        a: f64,
        b: f64,
        weight: &dyn Fn(f64) -> f64,
    ) -> Result<Vec<(f64, f64)>, FieldError> {
        Ok(composite(a, b, self.time_nodes)
            .into_iter()
            .map(|(t, w)| (t, w * weight(t)))
            .collect())
    }

    fn time_samples(&self, a: f64, b: f64) -> Result<Vec<f64>, FieldError> {
        Ok(uniform(a, b, self.time_nodes))
    }

    fn time_neighbors(&self, t: f64) -> Result<(f64, f64), FieldError> {
        Ok((t - self.time_step, t + self.time_step))
    }

    fn safe_radius(&self) -> Option<f64> {
        None
    }

    fn period(&self) -> Option<[f64; 3]> {
        None
    }
}

/// `pieces` panels of 8-point Gauss rules.
fn composite(a: f64, b: f64, pieces: usize) -> Vec<(f64, f64)> {
    let gl = GaussLegendre::new(8);
    let pieces = pieces.max(1);
    let h = (b - a) / pieces as f64;
    (0..pieces)
        .flat_map(|i| gl.on(a + i as f64 * h, a + (i + 1) as f64 * h).collect::<Vec<_>>())
        .collect()
}

fn uniform(a: f64, b: f64, n: usize) -> Vec<f64> {
    if n < 2 || a == b {
        return vec![b];
    }
    (0..n)
        .map(|i| a + (b - a) * i as f64 / (n - 1) as f64)
        .collect()
}

struct Entry {
    field: Arc<VectorField>,
    slice: OnceLock<Arc<TrigSlice>>,
}

/// Time-ordered snapshots on one grid.
///
/// Time integrals use the piecewise-linear interpolant between snapshots.
pub struct SnapshotSeries {
    grid: GridSpec,
    entries: Vec<Entry>,
}

impl std::fmt::Debug for SnapshotSeries {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SnapshotSeries")
            .field("grid", &self.grid)
            .field("times", &self.times())
            .finish()
    }
}

impl SnapshotSeries {
    pub fn new(mut fields: Vec<VectorField>) -> Result<Self, FieldError> {
        let Some(first) = fields.first() else {
            return Err(FieldError::InsufficientSnapshots { needed: 1, found: 0 });
        };
        let grid = first.grid;
        for f in &fields {
            if f.grid != grid {
                return Err(FieldError::GridMismatch);
            }
            f.check_finite()?;
        }
        fields.sort_by(|a, b| a.time.total_cmp(&b.time));
        for w in fields.windows(2) {
            if w[1].time <= w[0].time {
                return Err(FieldError::NonMonotoneTimes(w[1].time));
            }
        }
        let entries = fields
            .into_iter()
            .map(|f| Entry {
                field: Arc::new(f),
                slice: OnceLock::new(),
            })
            .collect();
        Ok(Self { grid, entries })
    }

    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn times(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.field.time).collect()
    }

    pub fn field(&self, i: usize) -> &VectorField {
        &self.entries[i].field
    }

    pub fn fields(&self) -> impl Iterator<Item = &VectorField> {
        self.entries.iter().map(|e| e.field.as_ref())
    }

    pub fn slice_at(&self, i: usize) -> Arc<TrigSlice> {
        let e = &self.entries[i];
        e.slice
            .get_or_init(|| Arc::new(TrigSlice::from_sampled(e.field.clone())))
            .clone()
    }

    fn span(&self) -> (f64, f64) {
        (
            self.entries[0].field.time,
            self.entries[self.entries.len() - 1].field.time,
        )
    }

    fn tol(&self) -> f64 {
        let (a, b) = self.span();
        1e-9 * a.abs().max(b.abs()).max(1.0)
    }

    /// Index of the snapshot at time `t`, if any.
    pub fn locate(&self, t: f64) -> Option<usize> {
        let tol = self.tol();
        self.entries
            .iter()
            .position(|e| (e.field.time - t).abs() <= tol)
    }

    fn coverage_error(&self, t: f64) -> FieldError {
        let (start, end) = self.span();
        FieldError::OutsideCoverage { time: t, start, end }
    }
}

impl Flow for SnapshotSeries {
    type Slice = TrigSlice;

    fn slice(&self, t: f64) -> Result<Arc<TrigSlice>, FieldError> {
        self.locate(t)
            .map(|i| self.slice_at(i))
            .ok_or_else(|| self.coverage_error(t))
    }

    fn time_rule(&self, a: f64, b: f64) -> Result<Vec<(f64, f64)>, FieldError> {
        let (start, end) = self.span();
        let tol = self.tol();
        for t in [a, b] {
            if t < start - tol || t > end + tol {
                return Err(self.coverage_error(t));
            }
        }
        let (a, b) = (a.max(start), b.min(end));
        let times = self.times();
        let mut weights = vec![0.0; times.len()];
        if b > a {
            for i in 0..times.len().saturating_sub(1) {
                let (t0, t1) = (times[i], times[i + 1]);
                let lo = a.max(t0);
                let hi = b.min(t1);
                if hi <= lo {
                    continue;
                }
                let h = t1 - t0;
                // trapezoid of the linear interpolant on [lo, hi]
                let alpha_lo = (lo - t0) / h;
                let alpha_hi = (hi - t0) / h;
                let half = 0.5 * (hi - lo);
                weights[i] += half * ((1.0 - alpha_lo) + (1.0 - alpha_hi));
                weights[i + 1] += half * (alpha_lo + alpha_hi);
            }
        }
        Ok(times
            .into_iter()
            .zip(weights)
            .filter(|(_, w)| *w != 0.0)
            .collect())
    }

    /// Product integration: the weight is integrated exactly (to Gauss
    /// accuracy) against the hat functions of the linear interpolant.
    fn weighted_time_rule(
        &self,
        a: f64,
        b: f64,
        weight: &dyn Fn(f64) -> f64,
    ) -> Result<Vec<(f64, f64)>, FieldError> {
        let (start, end) = self.span();
        let tol = self.tol();
        for t in [a, b] {
            if t < start - tol || t > end + tol {
                return Err(self.coverage_error(t));
            }
        }
        let (a, b) = (a.max(start), b.min(end));
        let times = self.times();
        let mut weights = vec![0.0; times.len()];
        let gl = GaussLegendre::new(16);
        for i in 0..times.len().saturating_sub(1) {
            let (t0, t1) = (times[i], times[i + 1]);
            let (lo, hi) = (a.max(t0), b.min(t1));
            if hi <= lo {
                continue;
            }
            for (s, ws) in gl.on(lo, hi) {
                let alpha = (s - t0) / (t1 - t0);
                let w = ws * weight(s);
                weights[i] += w * (1.0 - alpha);
                weights[i + 1] += w * alpha;
            }
        }
        Ok(times
            .into_iter()
            .zip(weights)
            .filter(|(_, w)| *w != 0.0)
            .collect())
    }

    fn time_samples(&self, a: f64, b: f64) -> Result<Vec<f64>, FieldError> {
        let tol = self.tol();
        let out: Vec<f64> = self
            .times()
            .into_iter()
            .filter(|t| *t >= a - tol && *t <= b + tol)
            .collect();
        if out.is_empty() {
            return Err(self.coverage_error(b));
        }
        Ok(out)
    }

    fn time_neighbors(&self, t: f64) -> Result<(f64, f64), FieldError> {
        let i = self.locate(t).ok_or_else(|| self.coverage_error(t))?;
        if i == 0 || i + 1 >= self.entries.len() {
            return Err(FieldError::InsufficientSnapshots {
                needed: 3,
                found: self.entries.len(),
            });
        }
        Ok((self.entries[i - 1].field.time, self.entries[i + 1].field.time))
    }

    fn safe_radius(&self) -> Option<f64> {
        Some(self.grid.safe_radius())
    }

    fn period(&self) -> Option<[f64; 3]> {
        Some(self.grid.len)
    }
}

/// A time-independent slice viewed as a flow.
pub struct Steady<S> {
    pub slice: Arc<S>,
    pub time_nodes: usize,
}

impl<S: FieldSlice> Steady<S> {
    pub fn new(slice: S) -> Self {
        Self {
            slice: Arc::new(slice),
            time_nodes: 8,
        }
    }
}

impl<S: FieldSlice> Flow for Steady<S> {
    type Slice = S;

    fn slice(&self, _t: f64) -> Result<Arc<S>, FieldError> {
        Ok(self.slice.clone())
    }

    fn time_rule(&self, a: f64, b: f64) -> Result<Vec<(f64, f64)>, FieldError> {
        Ok(GaussLegendre::new(self.time_nodes).on(a, b).collect())
    }

    fn weighted_time_rule(
        &self,
        a: f64,
        b: f64,
        weight: &dyn Fn(f64) -> f64,
    ) -> Result<Vec<(f64, f64)>, FieldError> {
        let total = composite(a, b, self.time_nodes).into_iter().map(|(t, w)| w * weight(t)).sum();
        Ok(vec![(b, total)])
    }

    fn time_samples(&self, a: f64, b: f64) -> Result<Vec<f64>, FieldError> {
        Ok(uniform(a, b, self.time_nodes))
    }

    fn time_neighbors(&self, t: f64) -> Result<(f64, f64), FieldError> {
        Ok((t - 1e-3, t + 1e-3))
    }

    fn safe_radius(&self) -> Option<f64> {
        None
    }

    fn period(&self) -> Option<[f64; 3]> {
        None
    }
}

/// `lambda v(x0 + lambda x, t0 + lambda^2 t)` for any flow.
pub struct Rescaled<F> {
    pub inner: F,
    pub lambda: f64,
    pub x0: [f64; 3],
    pub t0: f64,
}

impl<F: Flow> Rescaled<F> {
    pub fn new(inner: F, lambda: f64, x0: [f64; 3], t0: f64) -> Result<Self, FieldError> {
        if !(lambda.is_finite() && lambda > 0.0) {
            return Err(FieldError::InvalidParameter(format!("scale factor {lambda}")));
        }
        Ok(Self {
            inner,
            lambda,
            x0,
            t0,
        })
    }

    fn inner_time(&self, t: f64) -> f64 {
        self.t0 + self.lambda * self.lambda * t
    }

    fn outer_time(&self, s: f64) -> f64 {
        (s - self.t0) / (self.lambda * self.lambda)
    }
}

pub struct RescaledSlice<S> {
    inner: Arc<S>,
    lambda: f64,
    x0: [f64; 3],
    time: f64,
}

impl<S> RescaledSlice<S> {
    fn map(&self, x: [f64; 3]) -> [f64; 3] {
        [
            self.x0[0] + self.lambda * x[0],
            self.x0[1] + self.lambda * x[1],
            self.x0[2] + self.lambda * x[2],
        ]
    }
}

fn scale_jet(mut j: Jet, lambda: f64, power: i32) -> Jet {
    let s0 = lambda.powi(power);
    let s1 = s0 * lambda;
    let s2 = s1 * lambda;
    for c in 0..3 {
        j.val[c] *= s0;
        for i in 0..3 {
            j.grad[c][i] *= s1;
            for k in 0..3 {
                j.hess[c][i][k] *= s2;
            }
        }
    }
    j
}

impl<S: FieldSlice> FieldSlice for RescaledSlice<S> {
    fn time(&self) -> f64 {
        self.time
    }

    fn velocity(&self, x: [f64; 3], order: usize) -> Jet {
        scale_jet(self.inner.velocity(self.map(x), order), self.lambda, 1)
    }

    fn vorticity(&self, x: [f64; 3], order: usize) -> Jet {
        scale_jet(self.inner.vorticity(self.map(x), order), self.lambda, 2)
    }

    fn pressure(&self, x: [f64; 3]) -> f64 {
        self.lambda * self.lambda * self.inner.pressure(self.map(x))
    }

    fn sample(&self, pts: &[[f64; 3]], channels: &[Channel]) -> Vec<f64> {
        let mapped: Vec<[f64; 3]> = pts.iter().map(|x| self.map(*x)).collect();
        let scale: Vec<f64> = channels
            .iter()
            .map(|ch| {
                let base = if ch.source == Source::Velocity { 1 } else { 2 };
                self.lambda.powi(base + ch.deriv.order() as i32)
            })
            .collect();
        let mut out = self.inner.sample(&mapped, channels);
        for row in out.chunks_mut(channels.len().max(1)) {
            for (v, s) in row.iter_mut().zip(&scale) {
                *v *= s;
            }
        }
        out
    }
}

impl<F: Flow> Flow for Rescaled<F> {
    type Slice = RescaledSlice<F::Slice>;

    fn slice(&self, t: f64) -> Result<Arc<Self::Slice>, FieldError> {
        let inner = self.inner.slice(self.inner_time(t))?;
        Ok(Arc::new(RescaledSlice {
            inner,
            lambda: self.lambda,
            x0: self.x0,
            time: t,
        }))
    }

    fn time_rule(&self, a: f64, b: f64) -> Result<Vec<(f64, f64)>, FieldError> {
        let l2 = self.lambda * self.lambda;
        Ok(self
            .inner
            .time_rule(self.inner_time(a), self.inner_time(b))?
            .into_iter()
            .map(|(s, w)| (self.outer_time(s), w / l2))
            .collect())
    }

    fn weighted_time_rule(
        &self,
        a: f64,
        b: f64,
        weight: &dyn Fn(f64) -> f64,
    ) -> Result<Vec<(f64, f64)>, FieldError> {
        let l2 = self.lambda * self.lambda;
        let inner_weight = |s: f64| weight(self.outer_time(s));
        Ok(self
            .inner
            .weighted_time_rule(self.inner_time(a), self.inner_time(b), &inner_weight)?
            .into_iter()
            .map(|(s, w)| (self.outer_time(s), w / l2))
            .collect())
    }

    fn time_samples(&self, a: f64, b: f64) -> Result<Vec<f64>, FieldError> {
        Ok(self
            .inner
            .time_samples(self.inner_time(a), self.inner_time(b))?
            .into_iter()
            .map(|s| self.outer_time(s))
            .collect())
    }

    fn time_neighbors(&self, t: f64) -> Result<(f64, f64), FieldError> {
        let (a, b) = self.inner.time_neighbors(self.inner_time(t))?;
        Ok((self.outer_time(a), self.outer_time(b)))
    }

    fn safe_radius(&self) -> Option<f64> {
        self.inner.safe_radius().map(|r| r / self.lambda)
    }

    fn period(&self) -> Option<[f64; 3]> {
        self.inner.period().map(|p| p.map(|l| l / self.lambda))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_interpolant_weights_integrate_linear_functions() {
        let g = GridSpec::cube(4).unwrap();
        let fields = [0.0, 0.1, 0.25, 0.4]
            .iter()
            .map(|&t| VectorField::zeros(g, t))
            .collect();
        let s = SnapshotSeries::new(fields).unwrap();
        let rule = s.time_rule(0.05, 0.3).unwrap();
        let total: f64 = rule.iter().map(|(_, w)| w).sum();
        assert!((total - 0.25).abs() < 1e-15);
        let first: f64 = rule.iter().map(|(t, w)| w * t).sum();
        assert!((first - 0.5 * (0.09 - 0.0025)).abs() < 1e-15);
        assert!(s.time_rule(-0.1, 0.2).is_err());
        assert_eq!(s.time_neighbors(0.1).unwrap(), (0.0, 0.25));
        assert!(s.time_neighbors(0.0).is_err());
    }

    #[test]
    fn snapshot_slice_interpolates_band_limited_field() {
        let g = GridSpec::cube(16).unwrap();
        let f = AnalyticField::abc(1.0, 0.5, 0.2, 2.0);
        let s = SnapshotSeries::new(vec![f.sample(g, 0.0)]).unwrap();
        let slice = s.slice(0.0).unwrap();
        let exact = f.at(0.0);
        let x = [0.123, 2.5, -1.1];
        let a = slice.velocity(x, 1);
        let b = exact.jet(x, 1);
        for c in 0..3 {
            assert!((a.val[c] - b.val[c]).abs() < 1e-13);
            for i in 0..3 {
                assert!((a.grad[c][i] - b.grad[c][i]).abs() < 1e-12);
            }
        }
        let w = slice.vorticity(x, 0).val;
        for c in 0..3 {
            assert!((w[c] - 2.0 * a.val[c]).abs() < 1e-12);
        }
    }

    #[test]
    fn sampled_pressure_matches_symbolic_pressure() {
        let g = GridSpec::cube(16).unwrap();
        let f = AnalyticField::taylor_green(1.0);
        let exact = f.pressure();
        let s = SnapshotSeries::new(vec![f.sample(g, 0.0)]).unwrap();
        let slice = s.slice(0.0).unwrap();
        for x in [[0.1, 0.2, 0.3], [1.0, -2.0, 0.5]] {
            assert!((slice.pressure(x) - exact.value(x, 0.0)).abs() < 1e-13);
        }
    }

    #[test]
    fn generic_rescaling_agrees_with_closed_form() {
        let flow = AnalyticFlow::new(AnalyticField::taylor_green(1.0));
        let (lambda, x0, t0) = (0.4, [0.3, 0.1, -0.2], 0.05);
        let closed = flow.rescale(lambda, x0, t0);
        let generic = Rescaled::new(flow, lambda, x0, t0).unwrap();
        let x = [0.7, -0.4, 1.3];
        let (a, b) = (closed.slice(0.1).unwrap(), generic.slice(0.1).unwrap());
        let (ja, jb) = (a.vorticity(x, 2), b.vorticity(x, 2));
        for c in 0..3 {
            assert!((ja.val[c] - jb.val[c]).abs() < 1e-14);
            assert!((ja.hess[c][0][1] - jb.hess[c][0][1]).abs() < 1e-13);
        }
        assert!((a.pressure(x) - b.pressure(x)).abs() < 1e-14);
    }

    #[test]
    fn batched_sampling_matches_pointwise_jets() {
        let flow = AnalyticFlow::new(AnalyticField::abc(1.0, 0.7, 0.4, 1.0));
        let generic = Rescaled::new(flow, 0.5, [0.2, 0.0, 0.1], 0.0).unwrap();
        let s = generic.slice(0.02).unwrap();
        let chans = [Channel::v(2).d(0), Channel::w(1).dd(2, 2), Channel::p(), Channel::p().d(1)];
        let pts: Vec<[f64; 3]> = (0..80).map(|i| [0.05 * i as f64, 1.0 - 0.02 * i as f64, 0.3]).collect();
        let got = s.sample(&pts, &chans);
        let h = 1e-5;
        for (n, &x) in pts.iter().enumerate() {
            let row = &got[n * 4..n * 4 + 4];
            assert!((row[0] - s.velocity(x, 1).grad[2][0]).abs() < 1e-13);
            assert!((row[1] - s.vorticity(x, 2).hess[1][2][2]).abs() < 1e-12);
            assert!((row[2] - s.pressure(x)).abs() < 1e-13);
            let fd = (s.pressure([x[0], x[1] + h, x[2]]) - s.pressure([x[0], x[1] - h, x[2]])) / (2.0 * h);
            assert!((row[3] - fd).abs() < 1e-8);
        }
    }
}
