//! Pseudo-spectral Navier-Stokes integrator with unit viscosity.
//!
//! The velocity is evolved in Fourier space with classical RK4 applied to the
//! full right-hand side `P(v x omega) - |k|^2 v`, where `P` is the Leray
//! projection and the nonlinear product is dealiased.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fields::{
    curl, divergence, pressure_spectrum, AnalyticField, FieldError, GridSpec, ScalarField,
    Spectral, VectorField,
};

/// RK4 is stable for `dt * lambda` up to about 2.78 on the negative real axis.
const VISCOUS_LIMIT: f64 = 2.7;

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("invalid solver configuration: {0}")]
    Config(String),
    #[error("CFL violation at t = {time}: max|v| dt / h = {courant:.4} exceeds {limit}")]
    Cfl { time: f64, courant: f64, limit: f64 },
    #[error("viscous stability violated: dt k_max^2 = {value:.3} exceeds {limit}")]
    Viscous { value: f64, limit: f64 },
    #[error("initial velocity has nonzero mean {mean:e} in component {component}")]
    NonZeroMean { component: usize, mean: f64 },
    #[error("solution became non-finite at t = {0}")]
    Blowup(f64),
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error("snapshot sink failed: {0}")]
    Sink(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Dealias {
    TwoThirds,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Integrator {
    Rk4,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub dt: f64,
    pub t_end: f64,
    pub snap_every: f64,
    pub dealias: Dealias,
    pub integrator: Integrator,
    /// Largest accepted `max|v| dt / h`.
    pub cfl_limit: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            t_end: 0.1,
            snap_every: 0.01,
            dealias: Dealias::TwoThirds,
            integrator: Integrator::Rk4,
            cfl_limit: 0.5,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<(), SolverError> {
        let bad = |m: String| Err(SolverError::Config(m));
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return bad(format!("dt = {} must be positive", self.dt));
        }
        if !(self.t_end.is_finite() && self.t_end >= 0.0) {
            return bad(format!("t_end = {} must be nonnegative", self.t_end));
        }
        if !(self.snap_every.is_finite() && self.snap_every >= self.dt) {
            return bad(format!(
                "snapshot interval {} must be at least dt = {}",
                self.snap_every, self.dt
            ));
        }
        let ratio = self.snap_every / self.dt;
        if (ratio - ratio.round()).abs() > 1e-6 * ratio {
            return bad(format!(
                "snapshot interval {} is not a multiple of dt = {}",
                self.snap_every, self.dt
            ));
        }
        if !(self.cfl_limit > 0.0) {
            return bad(format!("CFL limit {} must be positive", self.cfl_limit));
        }
        Ok(())
    }

    pub fn steps_per_snapshot(&self) -> usize {
        (self.snap_every / self.dt).round() as usize
    }

    pub fn total_steps(&self) -> usize {
        (self.t_end / self.dt - 1e-9).ceil().max(0.0) as usize
    }
}

/// Spectral velocity at one time.
#[derive(Clone)]
pub struct SolverState {
    pub grid: GridSpec,
    pub spec: [Vec<Complex64>; 3],
    pub time: f64,
    ops: Spectral,
    mask: std::sync::Arc<Vec<bool>>,
    k2_max: f64,
}

impl std::fmt::Debug for SolverState {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SolverState")
            .field("grid", &self.grid)
            .field("time", &self.time)
            .finish()
    }
}

fn build_mask(ops: &Spectral, dealias: Dealias) -> Vec<bool> {
    let n = ops.grid.n;
    (0..ops.grid.len())
        .map(|idx| {
            let m = ops.grid.unindex(idx);
            (0..3).all(|a| {
                let s = if m[a] <= n[a] / 2 { m[a] } else { n[a] - m[a] };
                match dealias {
                    Dealias::TwoThirds => 3 * s < n[a],
                    Dealias::None => 2 * s < n[a],
                }
            })
        })
        .collect()
}

impl SolverState {
    /// Projects and truncates `v`; rejects nonzero mean flow.
    pub fn from_velocity(v: &VectorField, dealias: Dealias) -> Result<Self, SolverError> {
        v.check_finite()?;
        let scale = v.max_abs().max(f64::MIN_POSITIVE);
        for (component, mean) in v.means().into_iter().enumerate() {
            if mean.abs() > 1e-12 * scale {
                return Err(SolverError::NonZeroMean { component, mean });
            }
        }
        let ops = Spectral::new(v.grid);
        let mask = build_mask(&ops, dealias);
        let mut spec = ops.forward3(&v.components);
        ops.project(&mut spec);
        for c in &mut spec {
            c[0] = Complex64::default();
            c.par_iter_mut().zip(mask.par_iter()).for_each(|(z, keep)| {
                if !keep {
                    *z = Complex64::default();
                }
            });
        }
        let k2 = ops.map_modes(|idx, k, _| {
            if mask[idx] {
                k[0] * k[0] + k[1] * k[1] + k[2] * k[2]
            } else {
                0.0
            }
        });
        let k2_max = k2.into_iter().fold(0.0, f64::max);
        Ok(Self {
            grid: v.grid,
            spec,
            time: v.time,
            ops,
            mask: std::sync::Arc::new(mask),
            k2_max,
        })
    }

    pub fn velocity(&self) -> VectorField {
        VectorField {
            grid: self.grid,
            time: self.time,
            components: self.ops.inverse3(&self.spec),
        }
    }

    /// `(1/2) int |v|^2` over the box.
    pub fn energy(&self) -> f64 {
        let s = crate::par::sum(self.grid.len(), |i| {
            (0..3).map(|c| self.spec[c][i].norm_sqr()).sum::<f64>()
        });
        0.5 * self.grid.volume() * s
    }

    /// `int |grad v|^2` over the box.
    pub fn dissipation(&self) -> f64 {
        let k2 = self.ops.map_modes(|_, k, _| k[0] * k[0] + k[1] * k[1] + k[2] * k[2]);
        let s = crate::par::sum(self.grid.len(), |i| {
            k2[i] * (0..3).map(|c| self.spec[c][i].norm_sqr()).sum::<f64>()
        });
        self.grid.volume() * s
    }

    /// Largest `|k|^2` among retained modes.
    pub fn k2_max(&self) -> f64 {
        self.k2_max
    }

    /// Largest `|k . v_hat|` relative to the largest `|k| |v_hat|`.
    pub fn spectral_divergence(&self) -> f64 {
        let pairs = self.ops.map_modes(|idx, k, _| {
            let d = self.spec[0][idx] * k[0] + self.spec[1][idx] * k[1] + self.spec[2][idx] * k[2];
            let kn = (k[0] * k[0] + k[1] * k[1] + k[2] * k[2]).sqrt();
            let vn = (0..3).map(|c| self.spec[c][idx].norm_sqr()).sum::<f64>().sqrt();
            (d.norm(), kn * vn)
        });
        let (num, den) = pairs
            .into_iter()
            .fold((0.0_f64, 0.0_f64), |a, b| (a.0.max(b.0), a.1.max(b.1)));
        if den == 0.0 {
            0.0
        } else {
            num / den
        }
    }

    /// Right-hand side and the largest nodal speed of the input.
    fn rhs(&self, spec: &[Vec<Complex64>; 3]) -> ([Vec<Complex64>; 3], f64) {
        let ops = &self.ops;
        let w_spec = ops.curl_spec(spec);
        let phys = ops.inverse_many(&[&spec[0], &spec[1], &spec[2], &w_spec[0], &w_spec[1], &w_spec[2]]);
        let (v, w) = phys.split_at(3);
        let n = self.grid.len();
        let mut prod: [Vec<f64>; 3] = std::array::from_fn(|_| vec![0.0; n]);
        {
            let [p0, p1, p2] = &mut prod;
            p0.par_iter_mut()
                .zip(p1.par_iter_mut())
                .zip(p2.par_iter_mut())
                .enumerate()
                .for_each(|(i, ((a, b), c))| {
                    let (vx, vy, vz) = (v[0][i], v[1][i], v[2][i]);
                    let (wx, wy, wz) = (w[0][i], w[1][i], w[2][i]);
                    *a = vy * wz - vz * wy;
                    *b = vz * wx - vx * wz;
                    *c = vx * wy - vy * wx;
                });
        }
        let speed = (0..n)
            .into_par_iter()
            .map(|i| (v[0][i] * v[0][i] + v[1][i] * v[1][i] + v[2][i] * v[2][i]).sqrt())
            .reduce(|| 0.0, f64::max);
        let mut out = ops.forward3(&prod);
        // Leray projection, dealiasing and viscous term in one sweep
        let [n0, n1, _] = self.grid.n;
        let kw = [ops.wavenumbers(0), ops.wavenumbers(1), ops.wavenumbers(2)];
        let [o0, o1, o2] = &mut out;
        o0.par_chunks_mut(n0)
            .zip(o1.par_chunks_mut(n0))
            .zip(o2.par_chunks_mut(n0))
            .enumerate()
            .for_each(|(row, ((a, b), c))| {
                let (ky, kz) = (kw[1][row % n1], kw[2][row / n1]);
                let base = row * n0;
                for i in 0..n0 {
                    let idx = base + i;
                    if !self.mask[idx] {
                        a[i] = Complex64::default();
                        b[i] = Complex64::default();
                        c[i] = Complex64::default();
                        continue;
                    }
                    let kx = kw[0][i];
                    let k2 = kx * kx + ky * ky + kz * kz;
                    if k2 == 0.0 {
                        a[i] = Complex64::default();
                        b[i] = Complex64::default();
                        c[i] = Complex64::default();
                        continue;
                    }
                    let kn = (a[i] * kx + b[i] * ky + c[i] * kz) / k2;
                    a[i] = a[i] - kn * kx - spec[0][idx] * k2;
                    b[i] = b[i] - kn * ky - spec[1][idx] * k2;
                    c[i] = c[i] - kn * kz - spec[2][idx] * k2;
                }
            });
        (out, speed)
    }
}

fn axpy(base: &[Vec<Complex64>; 3], k: &[Vec<Complex64>; 3], a: f64) -> [Vec<Complex64>; 3] {
    std::array::from_fn(|c| {
        base[c]
            .par_iter()
            .zip(k[c].par_iter())
            .map(|(x, y)| x + y * a)
            .collect()
    })
}

/// One RK4 step; fails if the CFL or viscous stability limits are exceeded.
pub fn step(state: &SolverState, dt: f64, cfl_limit: f64) -> Result<SolverState, SolverError> {
    let visc = dt * state.k2_max();
    if visc > VISCOUS_LIMIT {
        return Err(SolverError::Viscous {
            value: visc,
            limit: VISCOUS_LIMIT,
        });
    }
    let s = &state.spec;
    let (k1, speed) = state.rhs(s);
    let courant = speed * dt / state.grid.min_spacing();
    if courant > cfl_limit {
        return Err(SolverError::Cfl {
            time: state.time,
            courant,
            limit: cfl_limit,
        });
    }
    let (k2, _) = state.rhs(&axpy(s, &k1, 0.5 * dt));
    let (k3, _) = state.rhs(&axpy(s, &k2, 0.5 * dt));
    let (k4, _) = state.rhs(&axpy(s, &k3, dt));
    let spec: [Vec<Complex64>; 3] = std::array::from_fn(|c| {
        (0..s[c].len())
            .into_par_iter()
            .map(|i| s[c][i] + (k1[c][i] + (k2[c][i] + k3[c][i]) * 2.0 + k4[c][i]) * (dt / 6.0))
            .collect()
    });
    if spec.iter().any(|c| c.iter().any(|z| !z.re.is_finite() || !z.im.is_finite())) {
        return Err(SolverError::Blowup(state.time + dt));
    }
    Ok(SolverState {
        spec,
        time: state.time + dt,
        ..state.clone()
    })
}

/// Mean-zero pressure at the grid nodes, from the alias-free product.
pub fn pressure(state: &SolverState) -> ScalarField {
    pressure_of(&state.velocity())
}

pub fn pressure_of(v: &VectorField) -> ScalarField {
    let (fine, spec) = pressure_spectrum(v);
    let values_fine = fine.inverse(&spec);
    let g = v.grid;
    let nf = fine.grid;
    let values = (0..g.len())
        .map(|idx| {
            let [i, j, k] = g.unindex(idx);
            values_fine[nf.index(2 * i, 2 * j, 2 * k)]
        })
        .collect();
    ScalarField {
        grid: g,
        values,
        time: v.time,
    }
}

/// Max-norm residual of the vorticity equation at the middle snapshot,
/// with a centered time difference.
pub fn vorticity_residual(
    before: &VectorField,
    mid: &VectorField,
    after: &VectorField,
) -> Result<f64, SolverError> {
    if before.grid != mid.grid || after.grid != mid.grid {
        return Err(FieldError::GridMismatch.into());
    }
    if !(before.time < mid.time && mid.time < after.time) {
        return Err(FieldError::NonMonotoneTimes(mid.time).into());
    }
    let wb = curl(before)?;
    let wa = curl(after)?;
    let w = curl(mid)?;
    let ops = Spectral::new(mid.grid);
    let grad_v = ops.gradient_tensor(mid);
    let grad_w = ops.gradient_tensor(&w);
    let lap_w: Vec<Vec<f64>> = (0..3)
        .map(|c| ops.inverse(&ops.laplacian_spec(&ops.forward(&w.components[c]))))
        .collect();
    let span = after.time - before.time;
    let res = (0..mid.grid.len())
        .into_par_iter()
        .map(|i| {
            let v = mid.at(i);
            let om = w.at(i);
            let mut worst: f64 = 0.0;
            for c in 0..3 {
                let dt = (wa.components[c][i] - wb.components[c][i]) / span;
                let adv: f64 = (0..3).map(|j| v[j] * grad_w[c][j][i]).sum();
                let stretch: f64 = (0..3).map(|j| om[j] * grad_v[c][j][i]).sum();
                worst = worst.max((dt - lap_w[c][i] + adv - stretch).abs());
            }
            worst
        })
        .reduce(|| 0.0, f64::max);
    Ok(res)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotRecord {
    pub time: f64,
    pub energy: f64,
    pub dissipation: f64,
    /// Largest `|div v|` over nodes, relative to `max |grad v|`.
    pub divergence_rel: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyAudit {
    pub monotone: bool,
    /// `|E(T) - E(0) + int_0^T D| / E(0)`.
    pub balance_rel_error: f64,
    pub balance_tolerance: f64,
    pub max_divergence_rel: f64,
    pub divergence_tolerance: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub config: SolverConfig,
    pub grid: GridSpec,
    pub steps: usize,
    pub snapshots: Vec<SnapshotRecord>,
    pub audit: EnergyAudit,
}

fn divergence_rel(v: &VectorField) -> Result<f64, SolverError> {
    let div = divergence(v)?.max_abs();
    let ops = Spectral::new(v.grid);
    let g = ops.gradient_tensor(v);
    let scale = (0..v.grid.len())
        .map(|i| {
            g.iter()
                .flat_map(|row| row.iter())
                .map(|c| c[i] * c[i])
                .sum::<f64>()
                .sqrt()
        })
        .fold(0.0, f64::max);
    Ok(if scale == 0.0 { div } else { div / scale })
}

/// Integrates from `init` and hands every snapshot (including the initial one)
/// to `sink` in time order.
pub fn simulate(
    init: &VectorField,
    config: &SolverConfig,
    mut sink: impl FnMut(VectorField) -> Result<(), SolverError>,
) -> Result<RunSummary, SolverError> {
    config.validate()?;
    let mut state = SolverState::from_velocity(init, config.dealias)?;
    let t0 = init.time;
    let every = config.steps_per_snapshot();
    let total = config.total_steps();
    let mut records = Vec::new();
    let mut emit = |state: &SolverState, records: &mut Vec<SnapshotRecord>| -> Result<(), SolverError> {
        let v = state.velocity();
        records.push(SnapshotRecord {
            time: state.time,
            energy: state.energy(),
            dissipation: state.dissipation(),
            divergence_rel: divergence_rel(&v)?,
        });
        sink(v)
    };
    emit(&state, &mut records)?;
    let e0 = state.energy();
    let mut dissipated = 0.0;
    let mut d_prev = state.dissipation();
    let mut monotone = true;
    let mut e_prev = e0;
    for n in 1..=total {
        state = step(&state, config.dt, config.cfl_limit)?;
        state.time = t0 + n as f64 * config.dt;
        let d = state.dissipation();
        dissipated += 0.5 * config.dt * (d + d_prev);
        d_prev = d;
        let e = state.energy();
        if e > e_prev * (1.0 + 1e-14) + 1e-300 {
            monotone = false;
        }
        e_prev = e;
        if n % every == 0 || n == total {
            emit(&state, &mut records)?;
        }
    }
    let balance = if e0 > 0.0 {
        (e_prev - e0 + dissipated).abs() / e0
    } else {
        0.0
    };
    let max_div = records.iter().map(|r| r.divergence_rel).fold(0.0, f64::max);
    let audit = EnergyAudit {
        monotone,
        balance_rel_error: balance,
        balance_tolerance: 1e-3,
        max_divergence_rel: max_div,
        divergence_tolerance: 1e-12,
        pass: monotone && balance <= 1e-3 && max_div <= 1e-12,
    };
    Ok(RunSummary {
        config: *config,
        grid: init.grid,
        steps: total,
        snapshots: records,
        audit,
    })
}

/// Initial data offered by the command line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitialCondition {
    Abc { a: f64, b: f64, c: f64 },
    TaylorGreen { amplitude: f64 },
    TaylorGreen2d { amplitude: f64 },
    /// Taylor-Green plus a seeded random solenoidal perturbation at low wavenumbers.
    Perturbed { amplitude: f64, perturbation: f64, seed: u64 },
}

impl InitialCondition {
    pub fn sample(&self, grid: GridSpec) -> VectorField {
        match *self {
            InitialCondition::Abc { a, b, c } => AnalyticField::abc(a, b, c, 1.0).sample(grid, 0.0),
            InitialCondition::TaylorGreen { amplitude } => {
                AnalyticField::taylor_green(amplitude).sample(grid, 0.0)
            }
            InitialCondition::TaylorGreen2d { amplitude } => {
                AnalyticField::taylor_green_2d(amplitude).sample(grid, 0.0)
            }
            InitialCondition::Perturbed {
                amplitude,
                perturbation,
                seed,
            } => perturbed_taylor_green(amplitude, perturbation, seed).sample(grid, 0.0),
        }
    }
}

/// Taylor-Green flow plus random divergence-free modes with `|k_i| <= 2`.
pub fn perturbed_taylor_green(amplitude: f64, perturbation: f64, seed: u64) -> AnalyticField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut modes = Vec::new();
    for i in -2..=2i32 {
        for j in -2..=2i32 {
            for k in -2..=2i32 {
                // one representative of each +-k pair: first nonzero index positive
                let first = [i, j, k].into_iter().find(|m| *m != 0);
                if first.is_none_or(|m| m < 0) {
                    continue;
                }
                let wave = [i as f64, j as f64, k as f64];
                let k2: f64 = wave.iter().map(|x| x * x).sum();
                let mut draw = || -> [f64; 3] {
                    let raw: [f64; 3] = std::array::from_fn(|_| rng.gen_range(-1.0..1.0));
                    let kd: f64 = (0..3).map(|c| raw[c] * wave[c]).sum::<f64>() / k2;
                    std::array::from_fn(|c| (raw[c] - kd * wave[c]) * perturbation / k2)
                };
                let cos = draw();
                let sin = draw();
                modes.push(crate::fields::VelocityMode {
                    wave,
                    cos,
                    sin,
                    decay: k2,
                });
            }
        }
    }
    AnalyticField::taylor_green(amplitude).plus(&AnalyticField::custom(modes))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_to(v: &VectorField, dt: f64, t_end: f64) -> VectorField {
        let cfg = SolverConfig {
            dt,
            t_end,
            snap_every: t_end,
            ..Default::default()
        };
        let mut last = None;
        simulate(v, &cfg, |s| {
            last = Some(s);
            Ok(())
        })
        .unwrap();
        last.unwrap()
    }

    #[test]
    fn zero_data_stays_zero() {
        let g = GridSpec::cube(8).unwrap();
        let v = run_to(&VectorField::zeros(g, 0.0), 1e-2, 0.05);
        assert_eq!(v.max_abs(), 0.0);
    }

    #[test]
    fn beltrami_decay_on_small_grid() {
        let g = GridSpec::cube(16).unwrap();
        let f = AnalyticField::abc(1.0, 1.0, 1.0, 1.0);
        let v = run_to(&f.sample(g, 0.0), 1e-2, 0.1);
        let exact = f.sample(g, 0.1);
        let err = (0..g.len())
            .flat_map(|i| (0..3).map(move |c| (i, c)))
            .map(|(i, c)| (v.components[c][i] - exact.components[c][i]).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-8 * exact.max_abs(), "{err}");
    }

    #[test]
    fn config_validation() {
        let mut c = SolverConfig::default();
        c.snap_every = c.dt / 2.0;
        assert!(c.validate().is_err());
        c = SolverConfig { dt: -1.0, ..Default::default() };
        assert!(c.validate().is_err());
        assert!(SolverConfig::default().validate().is_ok());
    }

    #[test]
    fn cfl_violation_is_reported() {
        let g = GridSpec::cube(16).unwrap();
        let v = AnalyticField::abc(10.0, 10.0, 10.0, 1.0).sample(g, 0.0);
        let s = SolverState::from_velocity(&v, Dealias::TwoThirds).unwrap();
        assert!(matches!(step(&s, 0.02, 0.5), Err(SolverError::Cfl { .. })));
    }

    #[test]
    fn nonzero_mean_rejected() {
        let g = GridSpec::cube(8).unwrap();
        let v = AnalyticField::constant([1.0, 0.0, 0.0]).sample(g, 0.0);
        assert!(matches!(
            SolverState::from_velocity(&v, Dealias::TwoThirds),
            Err(SolverError::NonZeroMean { .. })
        ));
    }

    #[test]
    fn perturbed_field_is_solenoidal() {
        let f = perturbed_taylor_green(1.0, 0.3, 7);
        assert!(f.divergence_bound() < 1e-14);
    }
}
