//! Scale-invariant quantities of local regularity theory, Type I scans,
//! critical norms, the local energy balance and regular-shell search.

mod energy;
mod shell;

pub use energy::{local_energy_residual, Bump, LocalEnergy};
pub use shell::{regular_shell_search, ShellOptions, ShellSearch};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fields::{Channel, CylinderRegion, DiscSpec, FieldError, FieldSlice, Flow};
use crate::quad::{DiscQuadrature, Shape, VolumeQuadrature};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CriticalityError {
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

/// Threshold used by [`epsilon_regularity_flag`] unless configured otherwise.
pub const EPSILON_CKN: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaleOptions {
    pub shape: Shape,
    pub quad: VolumeQuadrature,
}

impl Default for ScaleOptions {
    fn default() -> Self {
        Self {
            shape: Shape::Ball,
            quad: VolumeQuadrature::default(),
        }
    }
}

/// `F`, `E`, `A`, `D` on the parabolic region of radius `radius` ending at `(center, t0)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaleQuantities {
    pub center: [f64; 3],
    pub t0: f64,
    pub radius: f64,
    pub shape: Shape,
    #[serde(rename = "F")]
    pub f: f64,
    #[serde(rename = "E")]
    pub e: f64,
    #[serde(rename = "A")]
    pub a: f64,
    #[serde(rename = "D")]
    pub d: f64,
}

impl ScaleQuantities {
    pub fn total(&self) -> f64 {
        self.f + self.e + self.a + self.d
    }
}

// v, grad v (row-major by component), p
const VGP: [Channel; 13] = [
    Channel::v(0),
    Channel::v(1),
    Channel::v(2),
    Channel::v(0).d(0),
    Channel::v(0).d(1),
    Channel::v(0).d(2),
    Channel::v(1).d(0),
    Channel::v(1).d(1),
    Channel::v(1).d(2),
    Channel::v(2).d(0),
    Channel::v(2).d(1),
    Channel::v(2).d(2),
    Channel::p(),
];

fn check_region<F: Flow>(flow: &F, shape: Shape, center: [f64; 3], t0: f64, r: f64) -> Result<(), CriticalityError> {
    CylinderRegion::new(r, center, t0, shape)?.check_fits(flow.safe_radius())?;
    Ok(())
}

/// Spatial integrals `(int |v|^3, int |grad v|^2, int |v|^2, int |p|^{3/2})` at one instant.
fn spatial<S: FieldSlice + ?Sized>(slice: &S, pts: &[[f64; 3]], weights: &[f64]) -> [f64; 4] {
    let vals = slice.sample(pts, &VGP);
    let mut out = [0.0; 4];
    for (row, w) in vals.chunks(VGP.len()).zip(weights) {
        let v2 = row[0] * row[0] + row[1] * row[1] + row[2] * row[2];
        let g2: f64 = row[3..12].iter().map(|g| g * g).sum();
        out[0] += w * v2 * v2.sqrt();
        out[1] += w * g2;
        out[2] += w * v2;
        out[3] += w * row[12].abs().powf(1.5);
    }
    out
}

pub fn scale_quantities<F: Flow>(
    flow: &F,
    center: [f64; 3],
    t0: f64,
    radii: &[f64],
    opts: &ScaleOptions,
) -> Result<Vec<ScaleQuantities>, CriticalityError> {
    radii
        .iter()
        .map(|&r| {
            if !(r > 0.0) {
                return Err(CriticalityError::InvalidParameter(format!("radius {r}")));
            }
            check_region(flow, opts.shape, center, t0, r)?;
            let (pts, weights): (Vec<[f64; 3]>, Vec<f64>) = opts.quad.points(opts.shape, center, r).into_iter().unzip();
            let (mut v3, mut g2, mut p32) = (0.0, 0.0, 0.0);
            for (t, wt) in flow.time_rule(t0 - r * r, t0)? {
                let s = spatial(&*flow.slice(t)?, &pts, &weights);
                v3 += wt * s[0];
                g2 += wt * s[1];
                p32 += wt * s[3];
            }
            let mut a = 0.0_f64;
            for t in flow.time_samples(t0 - r * r, t0)? {
                let s = spatial(&*flow.slice(t)?, &pts, &weights);
                a = a.max(s[2]);
            }
            Ok(ScaleQuantities {
                center,
                t0,
                radius: r,
                shape: opts.shape,
                f: v3 / (r * r),
                e: g2 / r,
                a: a / r,
                d: p32 / (r * r),
            })
        })
        .collect()
}

/// `sup_r sup_t r^{q-3} int_{B(r)} |v|^q` over the probed radii and sample times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaQ {
    pub q: f64,
    pub center: [f64; 3],
    pub t0: f64,
    pub value: f64,
    pub radius: f64,
    pub time: f64,
    /// `(r, t, value)` for every probe.
    pub table: Vec<(f64, f64, f64)>,
}

pub fn lambda_q<F: Flow>(
    flow: &F,
    q: f64,
    center: [f64; 3],
    t0: f64,
    radii: &[f64],
    opts: &ScaleOptions,
) -> Result<LambdaQ, CriticalityError> {
    if !(q > 1.5 && q < 2.0) {
        return Err(CriticalityError::InvalidParameter(format!("q = {q} must lie in (3/2, 2)")));
    }
    let mut out = LambdaQ {
        q,
        center,
        t0,
        value: 0.0,
        radius: radii.first().copied().unwrap_or(0.0),
        time: t0,
        table: Vec::new(),
    };
    for &r in radii {
        if !(r > 0.0) {
            return Err(CriticalityError::InvalidParameter(format!("radius {r}")));
        }
        check_region(flow, opts.shape, center, t0, r)?;
        let (pts, weights): (Vec<[f64; 3]>, Vec<f64>) = opts.quad.points(opts.shape, center, r).into_iter().unzip();
        for t in flow.time_samples(t0 - r * r, t0)? {
            let vals = flow.slice(t)?.sample(&pts, &VGP[..3]);
            let integral: f64 = vals
                .chunks(3)
                .zip(&weights)
                .map(|(v, w)| w * (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).powf(q / 2.0))
                .sum();
            let value = r.powf(q - 3.0) * integral;
            out.table.push((r, t, value));
            if value > out.value {
                out.value = value;
                out.radius = r;
                out.time = t;
            }
        }
    }
    Ok(out)
}

/// `sup_{z, t} int_{D(radius, z, t)} |omega| dx_1 dx_2` around a vertical axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalFluxNorm {
    pub center: [f64; 2],
    pub radius: f64,
    pub value: f64,
    pub z: f64,
    pub t: f64,
}

pub fn critical_flux_norm<F: Flow>(
    flow: &F,
    center: [f64; 2],
    radius: f64,
    heights: &[f64],
    times: &[f64],
    quad: &DiscQuadrature,
) -> Result<CriticalFluxNorm, CriticalityError> {
    DiscSpec::new(radius, 0.0, 0.0, center)?.check_fits(flow.safe_radius())?;
    let disc = quad.disc(center, radius);
    let mut out = CriticalFluxNorm {
        center,
        radius,
        value: 0.0,
        z: heights.first().copied().unwrap_or(0.0),
        t: times.first().copied().unwrap_or(0.0),
    };
    for &t in times {
        let slice = flow.slice(t)?;
        for &z in heights {
            let pts: Vec<[f64; 3]> = disc.iter().map(|(p, _)| [p[0], p[1], z]).collect();
            let vals = slice.sample(&pts, &[Channel::w(0), Channel::w(1), Channel::w(2)]);
            let value: f64 = vals
                .chunks(3)
                .zip(&disc)
                .map(|(w, (_, wt))| wt * (w[0] * w[0] + w[1] * w[1] + w[2] * w[2]).sqrt())
                .sum();
            if value > out.value {
                out.value = value;
                out.z = z;
                out.t = t;
            }
        }
    }
    Ok(out)
}

/// `int_{Q(radius)} (|v|^3 + |p|^{3/2}) + 2`.
pub fn g_energy<F: Flow>(
    flow: &F,
    center: [f64; 3],
    t0: f64,
    radius: f64,
    opts: &ScaleOptions,
) -> Result<f64, CriticalityError> {
    check_region(flow, opts.shape, center, t0, radius)?;
    let (pts, weights): (Vec<[f64; 3]>, Vec<f64>) = opts.quad.points(opts.shape, center, radius).into_iter().unzip();
    let mut total = 0.0;
    for (t, wt) in flow.time_rule(t0 - radius * radius, t0)? {
        let s = spatial(&*flow.slice(t)?, &pts, &weights);
        total += wt * (s[0] + s[3]);
    }
    Ok(total + 2.0)
}

/// Heuristic smallness test `F + D <= eps` at the probed scale.
pub fn epsilon_regularity_flag(sq: &ScaleQuantities, eps: f64) -> bool {
    sq.f + sq.d <= eps
}

/// Scale quantities over a set of centers and dyadic radii.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TypeIReport {
    pub t0: f64,
    pub radii: Vec<f64>,
    pub rows: Vec<ScaleQuantities>,
    pub sup: Sup,
    pub lambda_q: Vec<LambdaQ>,
    #[serde(rename = "G")]
    pub g: f64,
    pub g_radius: f64,
    pub critical_flux_norm: CriticalFluxNorm,
    pub epsilon_ckn: f64,
    /// Per row; heuristic, since the threshold constant is not known.
    pub epsilon_regular: Vec<bool>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Sup {
    #[serde(rename = "F")]
    pub f: f64,
    #[serde(rename = "E")]
    pub e: f64,
    #[serde(rename = "A")]
    pub a: f64,
    #[serde(rename = "D")]
    pub d: f64,
    pub total: f64,
}

impl Sup {
    pub fn of(rows: &[ScaleQuantities]) -> Self {
        rows.iter().fold(Sup::default(), |s, r| Sup {
            f: s.f.max(r.f),
            e: s.e.max(r.e),
            a: s.a.max(r.a),
            d: s.d.max(r.d),
            total: s.total.max(r.total()),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TypeIOptions {
    pub scale: ScaleOptions,
    pub q: f64,
    pub epsilon_ckn: f64,
    pub disc: DiscQuadrature,
    /// Radius of the region defining `G`; clipped to the flow's safe radius
    /// and the largest scan radius.
    pub g_radius: f64,
}

impl Default for TypeIOptions {
    fn default() -> Self {
        Self {
            scale: ScaleOptions::default(),
            q: 1.8,
            epsilon_ckn: EPSILON_CKN,
            disc: DiscQuadrature::default(),
            g_radius: 1.0,
        }
    }
}

/// Dyadic radii `r_max 2^-m`, `m = 0..levels`.
pub fn dyadic(r_max: f64, levels: usize) -> Vec<f64> {
    (0..levels).map(|m| r_max * 0.5_f64.powi(m as i32)).collect()
}

pub fn type_i_scan<F: Flow>(
    flow: &F,
    centers: &[[f64; 3]],
    t0: f64,
    radii: &[f64],
    opts: &TypeIOptions,
) -> Result<TypeIReport, CriticalityError> {
    if centers.is_empty() || radii.is_empty() {
        return Err(CriticalityError::InvalidParameter("need at least one center and radius".into()));
    }
    let mut rows = Vec::new();
    let mut lq = Vec::new();
    for &c in centers {
        rows.extend(scale_quantities(flow, c, t0, radii, &opts.scale)?);
        lq.push(lambda_q(flow, opts.q, c, t0, radii, &opts.scale)?);
    }
    // the largest scan radius bounds every window the data must cover
    let r_top = radii.iter().cloned().fold(0.0, f64::max);
    let g_radius = flow.safe_radius().map_or(opts.g_radius, |s| opts.g_radius.min(s)).min(r_top);
    let g = g_energy(flow, centers[0], t0, g_radius, &opts.scale)?;
    let r_disc = flow.safe_radius().map_or(0.5, |s| s.min(0.5)).min(r_top);
    let heights: Vec<f64> = (0..9).map(|i| centers[0][2] - r_disc + r_disc * i as f64 / 4.0).collect();
    let times = flow.time_samples(t0 - r_disc * r_disc, t0)?;
    let cfn = critical_flux_norm(flow, [centers[0][0], centers[0][1]], r_disc, &heights, &times, &opts.disc)?;
    Ok(TypeIReport {
        t0,
        radii: radii.to_vec(),
        sup: Sup::of(&rows),
        epsilon_regular: rows.iter().map(|r| epsilon_regularity_flag(r, opts.epsilon_ckn)).collect(),
        rows,
        lambda_q: lq,
        g,
        g_radius,
        critical_flux_norm: cfn,
        epsilon_ckn: opts.epsilon_ckn,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{AnalyticField, AnalyticFlow, VelocityMode};
    use std::f64::consts::PI;

    fn constant(c: [f64; 3]) -> AnalyticFlow {
        AnalyticFlow::new(AnalyticField::constant(c))
    }

    #[test]
    fn zero_field_has_zero_quantities() {
        let flow = constant([0.0; 3]);
        let q = scale_quantities(&flow, [0.1; 3], 0.0, &[0.5, 0.25], &ScaleOptions::default()).unwrap();
        assert!(q.iter().all(|s| s.total() == 0.0));
        assert!(epsilon_regularity_flag(&q[0], 0.0));
        assert_eq!(g_energy(&flow, [0.0; 3], 0.0, 1.0, &ScaleOptions::default()).unwrap(), 2.0);
        assert_eq!(lambda_q(&flow, 1.8, [0.0; 3], 0.0, &[0.5], &ScaleOptions::default()).unwrap().value, 0.0);
    }

    #[test]
    fn constant_velocity_closed_forms() {
        let c: [f64; 3] = [0.3, -0.4, 1.2];
        let m = (c[0] * c[0] + c[1] * c[1] + c[2] * c[2]).sqrt();
        let flow = constant(c);
        let radii = dyadic(0.8, 3);
        for s in scale_quantities(&flow, [0.2, 0.0, -0.1], 0.5, &radii, &ScaleOptions::default()).unwrap() {
            let r = s.radius;
            assert!((s.f - 4.0 / 3.0 * PI * m.powi(3) * r.powi(3)).abs() < 1e-10 * s.f);
            assert!((s.a - 4.0 / 3.0 * PI * m * m * r * r).abs() < 1e-10 * s.a);
            assert_eq!(s.e, 0.0);
            assert!(s.d < 1e-24);
        }
        let q = 1.8;
        let l = lambda_q(&flow, q, [0.0; 3], 0.0, &radii, &ScaleOptions::default()).unwrap();
        assert!((l.value - m.powf(q) * 4.0 / 3.0 * PI * 0.8_f64.powf(q)).abs() < 1e-10 * l.value);
        assert_eq!(l.radius, 0.8);
        let g = g_energy(&flow, [0.0; 3], 0.0, 1.0, &ScaleOptions::default()).unwrap();
        assert!((g - 2.0 - 4.0 / 3.0 * PI * m.powi(3)).abs() < 1e-10);
        for q in [1.5, 2.0] {
            assert!(lambda_q(&flow, q, [0.0; 3], 0.0, &radii, &ScaleOptions::default()).is_err());
        }
    }

    #[test]
    fn epsilon_flag_boundary_is_inclusive() {
        let sq = ScaleQuantities {
            center: [0.0; 3],
            t0: 0.0,
            radius: 0.1,
            shape: Shape::Ball,
            f: 0.03,
            e: 7.0,
            a: 1.0,
            d: 0.02,
        };
        assert!(epsilon_regularity_flag(&sq, 0.05));
        assert!(!epsilon_regularity_flag(&sq, 0.0499));
    }

    #[test]
    fn critical_flux_norm_of_uniform_vertical_vorticity() {
        // v = (-sin(eps y), sin(eps x), 0) / (2 eps) has curl close to e3 near the origin.
        let eps = 1e-6;
        let field = AnalyticField::custom(vec![
            VelocityMode { wave: [0.0, eps, 0.0], cos: [0.0; 3], sin: [-0.5 / eps, 0.0, 0.0], decay: 0.0 },
            VelocityMode { wave: [eps, 0.0, 0.0], cos: [0.0; 3], sin: [0.0, 0.5 / eps, 0.0], decay: 0.0 },
        ]);
        let c = critical_flux_norm(&AnalyticFlow::new(field), [0.0; 2], 0.5, &[0.0, 0.3], &[0.0], &DiscQuadrature::default()).unwrap();
        assert!((c.value - PI / 4.0).abs() < 1e-8);
        let zero = critical_flux_norm(&constant([0.0; 3]), [0.0; 2], 0.5, &[0.0], &[0.0], &DiscQuadrature::default()).unwrap();
        assert_eq!(zero.value, 0.0);
    }

    #[test]
    fn type_i_sup_is_the_table_max() {
        let flow = AnalyticFlow::new(AnalyticField::taylor_green(1.0)).with_time_nodes(4);
        let opts = TypeIOptions {
            scale: ScaleOptions { shape: Shape::Ball, quad: VolumeQuadrature { vertical: 8, disc: DiscQuadrature::new(8, 16) } },
            disc: DiscQuadrature::new(16, 32),
            ..TypeIOptions::default()
        };
        let rep = type_i_scan(&flow, &[[0.0; 3], [1.0, 0.5, 0.2]], 0.0, &dyadic(0.5, 3), &opts).unwrap();
        assert_eq!(rep.rows.len(), 6);
        let max_f = rep.rows.iter().map(|r| r.f).fold(0.0, f64::max);
        assert_eq!(rep.sup.f, max_f);
        assert!(rep.g >= 2.0);
    }
}
