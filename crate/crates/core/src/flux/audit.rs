use serde::{Deserialize, Serialize};

use super::disc::gammas;
use super::{f_of, sign_with_zero, FluxError, ZERO_REL};
use crate::fields::{Channel, DiscSpec, FieldSlice, Flow};
use crate::quad::DiscQuadrature;

/// Probe points `(r, z, t)` around one vertical axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeLattice {
    pub center: [f64; 2],
    pub radii: Vec<f64>,
    pub heights: Vec<f64>,
    pub times: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AuditOptions {
    pub quad: DiscQuadrature,
    /// Finite-difference step in `r` and `z` as a fraction of the probe radius.
    pub stencil: f64,
}

impl Default for AuditOptions {
    fn default() -> Self {
        Self {
            quad: DiscQuadrature::default(),
            stencil: 0.02,
        }
    }
}

/// `|a - b| / max(|a|, |b|, floor)`, zero when all vanish.
fn relative(a: f64, b: f64, floor: f64) -> f64 {
    let s = a.abs().max(b.abs()).max(floor);
    if s > 0.0 {
        (a - b).abs() / s
    } else {
        0.0
    }
}

// ω3, ∂ω3 (3), ∂11 ω3, ∂22 ω3, ∂33 ω3, v (3), ω1, ω2, ∇v3 (3)
const CHANNELS: [Channel; 15] = [
    Channel::w(2),
    Channel::w(2).d(0),
    Channel::w(2).d(1),
    Channel::w(2).d(2),
    Channel::w(2).dd(0, 0),
    Channel::w(2).dd(1, 1),
    Channel::w(2).dd(2, 2),
    Channel::v(0),
    Channel::v(1),
    Channel::v(2),
    Channel::w(0),
    Channel::w(1),
    Channel::v(2).d(0),
    Channel::v(2).d(1),
    Channel::v(2).d(2),
];

/// Every disc and circle integral the audits need, from one batched sample.
#[derive(Debug, Clone, Copy, Default)]
struct DiscIntegrals {
    gamma: f64,
    w: f64,
    /// `int_D sgn(w3) lap w3`
    lap_bulk: f64,
    /// `int_D sgn(w3) (v . grad w3 - w . grad v3)`
    nl_bulk: f64,
    /// `int_S sgn(w3) (v_r w3 - w_r v3)`
    nl_boundary: f64,
    b1: f64,
    b2: f64,
    /// `int_D -v . grad f + (w3 / f) w . grad v3`
    a_int: f64,
    /// `int_D -d3 v3 / f - (w_h . grad_h w3 / f^3) v3`
    b_int: f64,
    /// `int_D |grad w3|^2 / f^3`
    dissipation: f64,
    /// L1 sizes of the integrands, used to normalize identities whose sides may both vanish.
    nl_scale: f64,
    ibp_scale: f64,
    near_zero_set: bool,
}

fn integrals<S: FieldSlice + ?Sized>(slice: &S, center: [f64; 2], r: f64, z: f64, quad: &DiscQuadrature) -> DiscIntegrals {
    let disc = quad.disc(center, r);
    let ring = quad.circle(center, r);
    let pts: Vec<[f64; 3]> = disc
        .iter()
        .map(|(p, _)| [p[0], p[1], z])
        .chain(ring.iter().map(|(p, _, _)| [p[0], p[1], z]))
        .collect();
    let nc = CHANNELS.len();
    let vals = slice.sample(&pts, &CHANNELS);
    let row = |i: usize| &vals[i * nc..(i + 1) * nc];
    let zero = ZERO_REL * (0..pts.len()).map(|i| row(i)[0].abs()).fold(0.0, f64::max);
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    let mut out = DiscIntegrals::default();
    for (i, (_, wt)) in disc.iter().enumerate() {
        let c = row(i);
        let (w3, g, v, wh, gv3) = (c[0], [c[1], c[2], c[3]], [c[7], c[8], c[9]], [c[10], c[11]], [c[12], c[13], c[14]]);
        let s = sign_with_zero(w3, zero);
        let f = f_of(w3);
        let v_grad_w3 = v[0] * g[0] + v[1] * g[1] + v[2] * g[2];
        let w_grad_v3 = wh[0] * gv3[0] + wh[1] * gv3[1] + w3 * gv3[2];
        out.gamma += wt * w3.abs();
        out.w += wt * f;
        out.lap_bulk += wt * s * (c[4] + c[5] + c[6]);
        out.nl_bulk += wt * s * (v_grad_w3 - w_grad_v3);
        out.a_int += wt * (-(w3 / f) * v_grad_w3 + (w3 / f) * w_grad_v3);
        out.b_int += wt * (-gv3[2] / f - (wh[0] * g[0] + wh[1] * g[1]) / f.powi(3) * v[2]);
        out.dissipation += wt * (g[0] * g[0] + g[1] * g[1] + g[2] * g[2]) / f.powi(3);
        out.nl_scale += wt * (v_grad_w3.abs() + w_grad_v3.abs());
        out.ibp_scale += wt * ((w3 / f * v_grad_w3).abs() + (w3 / f * w_grad_v3).abs() + (gv3[2] / f).abs());
        lo = lo.min(w3);
        hi = hi.max(w3);
    }
    for (i, (_, n, ds)) in ring.iter().enumerate() {
        let c = row(disc.len() + i);
        let (w3, v) = (c[0], [c[7], c[8], c[9]]);
        let s = sign_with_zero(w3, zero);
        let f = f_of(w3);
        let v_r = v[0] * n[0] + v[1] * n[1];
        let w_r = c[10] * n[0] + c[11] * n[1];
        let dr_w3 = c[1] * n[0] + c[2] * n[1];
        out.nl_boundary += ds * s * (v_r * w3 - w_r * v[2]);
        out.b1 += ds * w3 / f * dr_w3;
        out.b2 += ds * (-f * v_r + v[2] * w3 * w_r / f);
        out.nl_scale += ds * ((v_r * w3).abs() + (w_r * v[2]).abs());
        out.ibp_scale += ds * ((f * v_r).abs() + (v[2] * w3 * w_r / f).abs());
        lo = lo.min(w3);
        hi = hi.max(w3);
    }
    out.near_zero_set = !(lo > zero || hi < -zero) && r > 0.0;
    out
}

/// Centered derivative in time from values at unequally spaced `t - h_minus, t, t + h_plus`.
fn time_derivative(f_minus: f64, f0: f64, f_plus: f64, h_minus: f64, h_plus: f64) -> f64 {
    (h_minus * h_minus * f_plus - h_plus * h_plus * f_minus + (h_plus * h_plus - h_minus * h_minus) * f0)
        / (h_minus * h_plus * (h_minus + h_plus))
}

fn d1(f: [f64; 5], h: f64) -> f64 {
    (-f[4] + 8.0 * f[3] - 8.0 * f[1] + f[0]) / (12.0 * h)
}

fn d2(f: [f64; 5], h: f64) -> f64 {
    (-f[4] + 16.0 * f[3] - 30.0 * f[2] + 16.0 * f[1] - f[0]) / (12.0 * h * h)
}

/// The parabolic inequality for `Gamma` at one probe point, with its two
/// underlying identities audited separately.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaAuditPoint {
    pub t: f64,
    pub z: f64,
    pub r: f64,
    pub gamma: f64,
    pub dt_gamma: f64,
    pub dzz_gamma: f64,
    pub drr_gamma: f64,
    pub dr_gamma: f64,
    /// `int_S (v_r |w3| - w~_r v3) ds`
    pub circle_term: f64,
    /// Signed; positive beyond discretization error is a finding.
    pub ineq_lhs: f64,
    pub laplacian_bulk: f64,
    pub laplacian_rhs: f64,
    pub id_0115_3_resid: f64,
    pub nonlinear_bulk: f64,
    pub nonlinear_boundary: f64,
    /// Normalized by the larger side or the L1 size of the integrands.
    pub id_0115_4_resid: f64,
    /// `W`, `B1`, `B2` on the disc of this row's radius.
    pub w: f64,
    pub b1: f64,
    pub b2: f64,
    /// `omega_3` changes sign or vanishes on the probe.
    pub near_zero_set: bool,
    /// Spatial step and the two time steps of the stencils.
    pub step: f64,
    pub dt_steps: (f64, f64),
}

pub fn gamma_inequality_audit<F: Flow>(
    flow: &F,
    lattice: &ProbeLattice,
    opts: &AuditOptions,
) -> Result<Vec<GammaAuditPoint>, FluxError> {
    if !(opts.stencil > 0.0 && opts.stencil < 0.5) {
        return Err(FluxError::InvalidParameter(format!("stencil {}", opts.stencil)));
    }
    if lattice.radii.iter().any(|r| !(*r > 0.0)) {
        return Err(FluxError::InvalidParameter("probe radii must be positive".into()));
    }
    let rmax = lattice.radii.iter().cloned().fold(0.0, f64::max) * (1.0 + 2.0 * opts.stencil);
    DiscSpec::new(rmax, 0.0, 0.0, lattice.center)?.check_fits(flow.safe_radius())?;
    let c = lattice.center;
    let q = &opts.quad;
    let mut out = Vec::new();
    for &t in &lattice.times {
        let (tm, tp) = flow.time_neighbors(t)?;
        let (now, before, after) = (flow.slice(t)?, flow.slice(tm)?, flow.slice(tp)?);
        for &z in &lattice.heights {
            for &r in &lattice.radii {
                let h = opts.stencil * r;
                let radial = gammas(&*now, c, z, &[r - 2.0 * h, r - h, r, r + h, r + 2.0 * h], q);
                let mut vertical = [0.0; 5];
                for (m, v) in vertical.iter_mut().enumerate() {
                    *v = if m == 2 {
                        radial[2]
                    } else {
                        gammas(&*now, c, z + (m as f64 - 2.0) * h, &[r], q)[0]
                    };
                }
                let g_minus = gammas(&*before, c, z, &[r], q)[0];
                let g_plus = gammas(&*after, c, z, &[r], q)[0];
                let radial: [f64; 5] = radial.try_into().expect("five radii");
                let dt_gamma = time_derivative(g_minus, radial[2], g_plus, t - tm, tp - t);
                let dzz = d2(vertical, h);
                let drr = d2(radial, h);
                let dr = d1(radial, h);
                let di = integrals(&*now, c, r, z, q);
                let laplacian_rhs = dzz + drr - dr / r;
                out.push(GammaAuditPoint {
                    t,
                    z,
                    r,
                    gamma: di.gamma,
                    dt_gamma,
                    dzz_gamma: dzz,
                    drr_gamma: drr,
                    dr_gamma: dr,
                    circle_term: di.nl_boundary,
                    ineq_lhs: dt_gamma - dzz - drr + dr / r + di.nl_boundary,
                    laplacian_bulk: di.lap_bulk,
                    laplacian_rhs,
                    id_0115_3_resid: relative(di.lap_bulk, laplacian_rhs, 0.0),
                    nonlinear_bulk: di.nl_bulk,
                    nonlinear_boundary: di.nl_boundary,
                    id_0115_4_resid: relative(di.nl_bulk, di.nl_boundary, di.nl_scale),
                    w: di.w,
                    b1: di.b1,
                    b2: di.b2,
                    near_zero_set: di.near_zero_set,
                    step: h,
                    dt_steps: (t - tm, tp - t),
                });
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WPoint {
    pub z: f64,
    pub t: f64,
    pub w: f64,
    pub b1: f64,
    pub b2: f64,
    /// Nonlinear bulk integrand before integration by parts.
    pub ibp_bulk: f64,
    /// The reduced bulk integrand after integration by parts.
    pub reduced_bulk: f64,
    /// `|ibp_bulk - (reduced_bulk + b2)|` over the larger side or the L1 size of the integrands.
    pub ibp_residual: f64,
    pub dt_w: f64,
    pub dzz_w: f64,
    pub dissipation: f64,
    /// `dt W - dzz W + dissipation - (ibp_bulk + b1)`; zero for smooth solutions.
    pub heat_residual: f64,
    pub near_zero_set: bool,
    pub dz_step: f64,
    pub dt_steps: (f64, f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WProfile {
    pub a: f64,
    pub center: [f64; 2],
    pub heights: Vec<f64>,
    pub times: Vec<f64>,
    /// Time-major, then height.
    pub rows: Vec<WPoint>,
}

impl WProfile {
    pub fn values(&self) -> Vec<f64> {
        self.rows.iter().map(|p| p.w).collect()
    }
}

/// `W(z, t) = int_D(a) f(omega_3)` with its boundary terms and heat-inequality audit.
pub fn w_profile<F: Flow>(
    flow: &F,
    center: [f64; 2],
    a: f64,
    heights: &[f64],
    times: &[f64],
    opts: &AuditOptions,
) -> Result<WProfile, FluxError> {
    if !(a > 0.0) {
        return Err(FluxError::InvalidParameter(format!("radius {a}")));
    }
    DiscSpec::new(a, 0.0, 0.0, center)?.check_fits(flow.safe_radius())?;
    let q = &opts.quad;
    let h = opts.stencil * a;
    let w_at = |s: &F::Slice, z: f64| -> f64 {
        let disc = q.disc(center, a);
        let pts: Vec<[f64; 3]> = disc.iter().map(|(p, _)| [p[0], p[1], z]).collect();
        let w3 = s.sample(&pts, &[Channel::w(2)]);
        w3.iter().zip(&disc).map(|(v, (_, wt))| wt * f_of(*v)).sum()
    };
    let mut rows = Vec::new();
    for &t in times {
        let (tm, tp) = flow.time_neighbors(t)?;
        let (now, before, after) = (flow.slice(t)?, flow.slice(tm)?, flow.slice(tp)?);
        for &z in heights {
            let di = integrals(&*now, center, a, z, q);
            let mut col = [0.0; 5];
            for (m, v) in col.iter_mut().enumerate() {
                *v = if m == 2 { di.w } else { w_at(&now, z + (m as f64 - 2.0) * h) };
            }
            let dt_w = time_derivative(w_at(&before, z), di.w, w_at(&after, z), t - tm, tp - t);
            let dzz_w = d2(col, h);
            rows.push(WPoint {
                z,
                t,
                w: di.w,
                b1: di.b1,
                b2: di.b2,
                ibp_bulk: di.a_int,
                reduced_bulk: di.b_int,
                ibp_residual: relative(di.a_int, di.b_int + di.b2, di.ibp_scale),
                dt_w,
                dzz_w,
                dissipation: di.dissipation,
                heat_residual: dt_w - dzz_w + di.dissipation - (di.a_int + di.b1),
                near_zero_set: di.near_zero_set,
                dz_step: h,
                dt_steps: (t - tm, tp - t),
            });
        }
    }
    Ok(WProfile {
        a,
        center,
        heights: heights.to_vec(),
        times: times.to_vec(),
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{AnalyticField, AnalyticFlow, VelocityMode};
    use std::f64::consts::PI;

    fn abc() -> AnalyticFlow {
        AnalyticFlow::new(AnalyticField::abc(1.0, 0.8, 0.6, 1.0))
    }

    #[test]
    fn time_stencil_is_exact_for_quadratics() {
        let f = |t: f64| 3.0 - 2.0 * t + 0.7 * t * t;
        let (t, hm, hp) = (0.4, 0.1, 0.25);
        let d = time_derivative(f(t - hm), f(t), f(t + hp), hm, hp);
        assert!((d - (-2.0 + 1.4 * t)).abs() < 1e-12);
    }

    #[test]
    fn identities_hold_where_vertical_vorticity_is_positive() {
        // For ABC (1, 0.8, 0.6): w3 = 0.8 cos x + 0.6 sin y > 0 near (0, pi/2).
        let lattice = ProbeLattice {
            center: [0.0, PI / 2.0],
            radii: [0.2, 0.4].to_vec(),
            heights: [0.0, 0.7].to_vec(),
            times: [0.0, 0.3].to_vec(),
        };
        let pts = gamma_inequality_audit(&abc(), &lattice, &AuditOptions::default()).unwrap();
        assert_eq!(pts.len(), 8);
        for p in &pts {
            assert!(!p.near_zero_set);
            assert!(p.id_0115_3_resid < 1e-7, "{p:?}");
            assert!(p.id_0115_4_resid < 1e-7, "{p:?}");
            assert!(p.ineq_lhs.abs() < 1e-5, "{p:?}");
            assert!((p.dt_gamma + p.gamma).abs() < 1e-5 * p.gamma);
        }
    }

    #[test]
    fn nonlinear_identity_on_a_non_beltrami_field() {
        // Shear plus a vertical column; the nonlinear terms no longer cancel.
        let field = AnalyticField::custom(vec![
            VelocityMode { wave: [0.0, 1.0, 0.0], cos: [0.0; 3], sin: [0.0, 0.0, 1.0], decay: 1.0 },
            VelocityMode { wave: [1.0, 0.0, 0.0], cos: [0.0, 2.0, 0.0], sin: [0.0; 3], decay: 1.0 },
            VelocityMode { wave: [0.0, 0.0, 1.0], cos: [0.5, 0.0, 0.0], sin: [0.0, 0.3, 0.0], decay: 1.0 },
            VelocityMode { wave: [0.0, 1.0, 1.0], cos: [0.2, 0.0, 0.0], sin: [0.0, 0.0, 0.0], decay: 2.0 },
        ]);
        let lattice = ProbeLattice {
            center: [-1.5, 0.2],
            radii: [0.5].to_vec(),
            heights: [0.3].to_vec(),
            times: [0.0].to_vec(),
        };
        let p = gamma_inequality_audit(&AnalyticFlow::new(field), &lattice, &AuditOptions::default()).unwrap()[0];
        assert!(!p.near_zero_set);
        assert!(p.nonlinear_bulk.abs() > 1e-3, "{p:?}");
        assert!(p.id_0115_4_resid < 1e-7, "{p:?}");
        assert!(p.id_0115_3_resid < 1e-7, "{p:?}");
    }

    #[test]
    fn constant_vertical_vorticity_at_rest_has_no_terms() {
        // v = (-y/2, x/2, 0) has w = e3; restricted to its plane-wave part it is
        // zero, so use a slowly varying stand-in: w3 = cos(eps x) with eps -> tiny.
        let eps = 1e-9;
        let field = AnalyticField::custom(vec![VelocityMode {
            wave: [eps, 0.0, 0.0],
            cos: [0.0; 3],
            sin: [0.0, 1.0 / eps, 0.0],
            decay: 0.0,
        }]);
        let lattice = ProbeLattice {
            center: [0.0, 0.0],
            radii: [0.5].to_vec(),
            heights: [0.0].to_vec(),
            times: [0.0].to_vec(),
        };
        let p = gamma_inequality_audit(&AnalyticFlow::new(field), &lattice, &AuditOptions::default()).unwrap()[0];
        assert!((p.gamma - PI / 4.0).abs() < 1e-8);
        assert!(p.laplacian_bulk.abs() < 1e-8 && p.nonlinear_bulk.abs() < 1e-12);
    }

    #[test]
    fn w_profile_identities_on_beltrami_flow() {
        let prof = w_profile(&abc(), [0.0, PI / 2.0], 0.4, &[0.0, 0.5], &[0.0, 0.2], &AuditOptions::default()).unwrap();
        for p in &prof.rows {
            assert!(p.w >= PI * 0.16);
            assert!(p.ibp_residual < 1e-10, "{p:?}");
            assert!(p.heat_residual.abs() < 1e-5, "{p:?}");
        }
    }

    #[test]
    fn w_of_zero_vertical_vorticity_is_disc_area() {
        let flow = AnalyticFlow::new(AnalyticField::custom(vec![VelocityMode {
            wave: [1.0, 0.0, 0.0],
            cos: [0.0; 3],
            sin: [0.0, 0.0, 1.0],
            decay: 1.0,
        }]));
        let prof = w_profile(&flow, [0.3, 0.1], 0.5, &[0.0], &[0.0], &AuditOptions::default()).unwrap();
        let p = prof.rows[0];
        assert!((p.w - PI * 0.25).abs() < 1e-12);
        assert_eq!(p.b1, 0.0);
    }
}
