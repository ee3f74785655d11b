use serde::{Deserialize, Serialize};

use super::{CriticalityError, VGP};
use crate::fields::{dot, CylinderRegion, FieldSlice, Flow};
use crate::quad::{Shape, VolumeQuadrature};

/// `phi(x, t) = (1 + tilt . (x - x0) / R) eta(|x - x0| / R) eta((t_end - t) / T)`
/// with `eta(s) = (1 - s^2)^power` on `[0, 1]`.
///
/// `phi` equals the spatial profile at `t_end` and vanishes to order `power`
/// at `t_end - T` and on `|x - x0| = R`. Being polynomial, the bump is
/// integrated exactly by the Gauss rules.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bump {
    pub center: [f64; 3],
    pub radius: f64,
    pub t_end: f64,
    pub duration: f64,
    /// `|tilt| <= 1` keeps `phi` nonnegative.
    pub tilt: [f64; 3],
    /// At least 3, so `phi` is twice continuously differentiable.
    pub power: u32,
}

impl Bump {
    pub fn new(center: [f64; 3], radius: f64, t_end: f64, duration: f64) -> Self {
        Self {
            center,
            radius,
            t_end,
            duration,
            tilt: [0.0; 3],
            power: 4,
        }
    }

    /// `eta`, `eta'`, `eta'' ` and `eta'(s) / s`.
    fn eta(&self, s: f64) -> [f64; 4] {
        if s.abs() >= 1.0 {
            return [0.0; 4];
        }
        let k = self.power as i32;
        let kf = k as f64;
        let u = 1.0 - s * s;
        let d1_over_s = -2.0 * kf * u.powi(k - 1);
        let d2 = d1_over_s + 4.0 * kf * (kf - 1.0) * s * s * u.powi(k - 2);
        [u.powi(k), s * d1_over_s, d2, d1_over_s]
    }
}

impl Bump {
    fn validate(&self) -> Result<(), CriticalityError> {
        if !(self.radius > 0.0 && self.duration > 0.0) || dot(self.tilt, self.tilt) > 1.0 || self.power < 3 {
            return Err(CriticalityError::InvalidParameter(
                "bump needs positive radius and duration, |tilt| <= 1 and power >= 3".into(),
            ));
        }
        Ok(())
    }

    /// Spatial profile: value, gradient and Laplacian.
    pub fn space(&self, x: [f64; 3]) -> (f64, [f64; 3], f64) {
        let r = self.radius;
        let y = [x[0] - self.center[0], x[1] - self.center[1], x[2] - self.center[2]];
        let rho = dot(y, y).sqrt();
        let s = rho / r;
        let [g, _, g2, g1_over_s] = self.eta(s);
        if g == 0.0 {
            return (0.0, [0.0; 3], 0.0);
        }
        // g'(rho) / rho, finite at the center
        let g1_over_rho = g1_over_s / (r * r);
        let grad_g = y.map(|c| g1_over_rho * c);
        let lap_g = g2 / (r * r) + 2.0 * g1_over_rho;
        let p = 1.0 + dot(self.tilt, y) / r;
        let grad_p = self.tilt.map(|c| c / r);
        let grad = [0, 1, 2].map(|i| p * grad_g[i] + g * grad_p[i]);
        (p * g, grad, p * lap_g + 2.0 * dot(grad_p, grad_g))
    }

    /// Time profile and its derivative.
    pub fn time(&self, t: f64) -> (f64, f64) {
        let s = (self.t_end - t) / self.duration;
        if s < 0.0 {
            return (0.0, 0.0);
        }
        let [e, d1, ..] = self.eta(s);
        (e, -d1 / self.duration)
    }
}

/// Terms of the local energy balance for one test function.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocalEnergy {
    /// `int |v|^2 phi` at `t_end`.
    pub kinetic: f64,
    /// `2 int int |grad v|^2 phi`
    pub dissipation: f64,
    /// `int int |v|^2 (dt phi + lap phi) + (|v|^2 + 2p) v . grad phi`
    pub rhs: f64,
    /// `kinetic + dissipation - rhs`; at most zero for suitable solutions, zero for smooth ones.
    pub residual: f64,
}

pub fn local_energy_residual<F: Flow>(
    flow: &F,
    phi: &Bump,
    quad: &VolumeQuadrature,
) -> Result<LocalEnergy, CriticalityError> {
    phi.validate()?;
    CylinderRegion::new(phi.radius, phi.center, phi.t_end, Shape::Ball)?.check_fits(flow.safe_radius())?;
    let pts_w = quad.points(Shape::Ball, phi.center, phi.radius);
    let pts: Vec<[f64; 3]> = pts_w.iter().map(|p| p.0).collect();
    let prof: Vec<(f64, [f64; 3], f64)> = pts.iter().map(|x| phi.space(*x)).collect();
    // Spatial integrals paired with the time profile (bulk, dissipation) and
    // with its derivative (kinetic).
    let integrals = |slice: &dyn FieldSlice| -> [f64; 3] {
        let vals = slice.sample(&pts, &VGP);
        let mut out = [0.0; 3];
        for ((row, (_, w)), (ps, grad, lap)) in vals.chunks(VGP.len()).zip(&pts_w).zip(&prof) {
            let v = [row[0], row[1], row[2]];
            let v2 = dot(v, v);
            let g2: f64 = row[3..12].iter().map(|g| g * g).sum();
            out[0] += w * (v2 * lap + (v2 + 2.0 * row[12]) * dot(v, *grad));
            out[1] += w * 2.0 * g2 * ps;
            out[2] += w * v2 * ps;
        }
        out
    };
    let t_start = phi.t_end - phi.duration;
    let tau = |t: f64| phi.time(t).0;
    let dtau = |t: f64| phi.time(t).1;
    let rule_a = flow.weighted_time_rule(t_start, phi.t_end, &tau)?;
    let rule_b = flow.weighted_time_rule(t_start, phi.t_end, &dtau)?;
    let mut nodes: Vec<f64> = rule_a.iter().chain(&rule_b).map(|n| n.0).collect();
    nodes.sort_by(f64::total_cmp);
    nodes.dedup();
    let (mut bulk, mut dt_part, mut dissipation) = (0.0, 0.0, 0.0);
    for t in nodes {
        let slice = flow.slice(t)?;
        let [a, d, b] = integrals(&*slice);
        let wa: f64 = rule_a.iter().filter(|n| n.0 == t).map(|n| n.1).sum();
        let wb: f64 = rule_b.iter().filter(|n| n.0 == t).map(|n| n.1).sum();
        bulk += wa * a;
        dissipation += wa * d;
        dt_part += wb * b;
    }
    let kinetic = integrals(&*flow.slice(phi.t_end)?)[2];
    let rhs = bulk + dt_part;
    Ok(LocalEnergy {
        kinetic,
        dissipation,
        rhs,
        residual: kinetic + dissipation - rhs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{AnalyticField, AnalyticFlow, GridSpec, SnapshotSeries};

    fn bump() -> Bump {
        Bump {
            tilt: [0.3, 0.2, -0.4],
            ..Bump::new([0.3, -0.2, 0.1], 0.9, 0.05, 0.05)
        }
    }

    #[test]
    fn bump_derivatives_match_differences() {
        let b = bump();
        let x = [0.6, 0.1, -0.3];
        let (_, grad, lap) = b.space(x);
        let h = 1e-4;
        let mut fd_lap = -6.0 * b.space(x).0;
        for i in 0..3 {
            let mut xp = x;
            let mut xm = x;
            xp[i] += h;
            xm[i] -= h;
            let (fp, fm) = (b.space(xp).0, b.space(xm).0);
            assert!(((fp - fm) / (2.0 * h) - grad[i]).abs() < 1e-6);
            fd_lap += fp + fm;
        }
        assert!((fd_lap / (h * h) - lap).abs() < 1e-5);
        let (_, dt) = b.time(0.03);
        let fd = (b.time(0.03 + h * 1e-2).0 - b.time(0.03 - h * 1e-2).0) / (2e-2 * h);
        assert!((fd - dt).abs() < 1e-5 * dt.abs().max(1.0));
        assert_eq!(b.time(0.0).0, 0.0);
        assert_eq!(b.time(0.05).0, 1.0);
        assert!(b.space(b.center).2.is_finite());
    }

    #[test]
    fn zero_field_and_constant_field_balance() {
        let quad = VolumeQuadrature::default();
        let zero = AnalyticFlow::new(AnalyticField::constant([0.0; 3]));
        assert_eq!(local_energy_residual(&zero, &bump(), &quad).unwrap().residual, 0.0);
        let c = AnalyticFlow::new(AnalyticField::constant([0.5, 1.0, -0.25]));
        let r = local_energy_residual(&c, &bump(), &quad).unwrap();
        assert!(r.residual.abs() < 1e-8 * r.kinetic, "{r:?}");
    }

    #[test]
    fn beltrami_flow_satisfies_the_balance_with_equality() {
        let flow = AnalyticFlow::new(AnalyticField::abc(1.0, 0.8, 0.6, 1.0));
        let r = local_energy_residual(&flow, &bump(), &VolumeQuadrature::default()).unwrap();
        assert!(r.residual.abs() < 1e-8, "{r:?}");
        assert!(r.kinetic > 0.1);
    }

    #[test]
    fn snapshot_series_uses_product_integration() {
        let g = GridSpec::cube(16).unwrap();
        let field = AnalyticField::abc(1.0, 0.8, 0.6, 1.0);
        let snaps = (0..=10).map(|i| field.sample(g, 0.005 * i as f64)).collect();
        let series = SnapshotSeries::new(snaps).unwrap();
        let r = local_energy_residual(&series, &bump(), &VolumeQuadrature::default()).unwrap();
        assert!(r.residual.abs() < 1e-5, "{r:?}");
    }
}
