use std::f64::consts::PI;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::GeometryError;
use crate::fields::{biot_savart, cross, dot, norm, FieldSlice, TrigSlice, TrigVector, VectorField};
use crate::par;
use crate::quad::GaussLegendre;

/// How the truncated integrals are evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StretchMethod {
    /// Spherical-shell quadrature over a tapered window.
    #[default]
    Quadrature,
    /// Closed-form Fourier transform of the kernel outside the cut, one term
    /// per mode of the vorticity; no window.
    Spectral,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StretchingOptions {
    pub method: StretchMethod,
    /// Outer radius of the integration window; defaults to four times the largest box side.
    pub window: Option<f64>,
    /// The window tapers as `cos^2` from `taper_start * window` outwards.
    pub taper_start: f64,
    pub radial_nodes: usize,
    pub min_polar: usize,
    pub max_polar: usize,
}

impl Default for StretchingOptions {
    fn default() -> Self {
        Self {
            method: StretchMethod::Quadrature,
            window: None,
            taper_start: 0.5,
            radial_nodes: 16,
            min_polar: 8,
            max_polar: 256,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stretching {
    pub direction: [f64; 3],
    /// Extrapolated principal value.
    pub pv: f64,
    /// Truncated integrals at `rho_cut` and `2 rho_cut`.
    pub pv_at_cut: f64,
    pub pv_at_double_cut: f64,
    /// `xi . (grad v) xi` from spectral derivatives.
    pub direct: f64,
    pub rho_cut: f64,
    /// Outer radius; infinite for the spectral method.
    pub window: f64,
    pub method: StretchMethod,
}

impl Stretching {
    pub fn relative_gap(&self) -> f64 {
        (self.pv - self.direct).abs() / self.direct.abs().max(f64::MIN_POSITIVE)
    }
}

pub fn stretching_factor(omega: &VectorField, x: [f64; 3], rho_cut: f64) -> Result<Stretching, GeometryError> {
    stretching_factor_with(omega, x, rho_cut, &StretchingOptions::default())
}

/// Singular-integral form of the stretching factor at `x`, excluding a ball
/// of radius `rho_cut` and extrapolating the `O(rho^2)` error away.
pub fn stretching_factor_with(
    omega: &VectorField,
    x: [f64; 3],
    rho_cut: f64,
    opts: &StretchingOptions,
) -> Result<Stretching, GeometryError> {
    let grid = omega.grid;
    if !(rho_cut.is_finite() && rho_cut > grid.min_spacing()) {
        return Err(GeometryError::Options(format!(
            "rho_cut {rho_cut} must exceed the grid spacing {}",
            grid.min_spacing()
        )));
    }
    let window = match opts.method {
        StretchMethod::Quadrature => opts.window.unwrap_or(4.0 * grid.len.iter().cloned().fold(0.0, f64::max)),
        StretchMethod::Spectral => f64::INFINITY,
    };
    if !(window > 4.0 * rho_cut) || !(0.0..1.0).contains(&opts.taper_start) || opts.radial_nodes == 0 {
        return Err(GeometryError::Options(format!("window {window} too small or bad taper")));
    }
    let v = biot_savart(omega)?;
    let slice = TrigSlice::from_sampled(Arc::new(v));
    let w = slice.vorticity_poly();
    let w0 = w.value(x);
    let scale = omega.max_norm();
    if norm(w0) <= 1e-12 * scale || scale == 0.0 {
        return Err(GeometryError::VanishingVorticity);
    }
    let n0 = norm(w0);
    let xi = [w0[0] / n0, w0[1] / n0, w0[2] / n0];

    let grad = slice.velocity(x, 1).grad;
    let mut direct = 0.0;
    for c in 0..3 {
        for i in 0..3 {
            direct += xi[c] * grad[c][i] * xi[i];
        }
    }

    let integral = Integral {
        w,
        x,
        xi,
        window,
        taper_start: opts.taper_start * window,
        k_max: w.waves.iter().map(|k| norm(*k)).fold(0.0, f64::max),
        opts,
    };
    let (pv_at_cut, pv_at_double_cut) = match opts.method {
        StretchMethod::Quadrature => (integral.truncated(rho_cut), integral.truncated(2.0 * rho_cut)),
        StretchMethod::Spectral => (spectral_truncated(w, x, xi, rho_cut), spectral_truncated(w, x, xi, 2.0 * rho_cut)),
    };
    Ok(Stretching {
        direction: xi,
        pv: (4.0 * pv_at_cut - pv_at_double_cut) / 3.0,
        pv_at_cut,
        pv_at_double_cut,
        direct,
        rho_cut,
        window,
        method: opts.method,
    })
}

/// `j1(u) / u`
fn j1_over(u: f64) -> f64 {
    if u < 1e-2 {
        let u2 = u * u;
        1.0 / 3.0 - u2 / 30.0 + u2 * u2 / 840.0
    } else {
        (u.sin() - u * u.cos()) / (u * u * u)
    }
}

/// Truncated integral summed mode by mode. Outside the ball of radius `rho`
/// the kernel `(n n - I/3) / |y|^3` transforms to
/// `-4 pi (k^ k^ - I/3) j1(|k| rho) / (|k| rho)`; the `I/3` part drops out
/// against `xi . (omega x xi) = 0`.
fn spectral_truncated(w: &TrigVector, x: [f64; 3], xi: [f64; 3], rho: f64) -> f64 {
    par::sum(w.len(), |n| {
        let k = w.waves[n];
        let kn = norm(k);
        if kn == 0.0 {
            return 0.0;
        }
        let (s, c) = dot(k, x).sin_cos();
        let (a, b) = (w.cos[n], w.sin[n]);
        let wk = [a[0] * c + b[0] * s, a[1] * c + b[1] * s, a[2] * c + b[2] * s];
        let kh = [k[0] / kn, k[1] / kn, k[2] / kn];
        -3.0 * j1_over(kn * rho) * dot(xi, kh) * dot(kh, cross(wk, xi))
    })
}

struct Integral<'a> {
    w: &'a TrigVector,
    x: [f64; 3],
    xi: [f64; 3],
    window: f64,
    taper_start: f64,
    k_max: f64,
    opts: &'a StretchingOptions,
}

impl Integral<'_> {
    fn taper(&self, r: f64) -> f64 {
        if r <= self.taper_start {
            return 1.0;
        }
        let u = (r - self.taper_start) / (self.window - self.taper_start);
        (0.5 * PI * u).cos().powi(2)
    }

    /// Radial panel breakpoints: geometric near the cut, at most one shortest
    /// wavelength wide, with a break where the taper starts.
    fn breakpoints(&self, rho: f64) -> Vec<f64> {
        let max_width = if self.k_max > 0.0 { 2.0 * PI / self.k_max } else { f64::INFINITY };
        let mut out = vec![rho];
        let mut r = rho;
        while r < self.window {
            let mut next = (2.0 * r).min(r + max_width);
            if r < self.taper_start && next > self.taper_start {
                next = self.taper_start;
            }
            r = next.min(self.window);
            out.push(r);
        }
        out
    }

    /// `(3 / 4 pi) int_{rho < |y| < R} D(y^, xi(x+y), xi(x)) |omega(x+y)| W(|y|) dy / |y|^3`
    fn truncated(&self, rho: f64) -> f64 {
        let gl = GaussLegendre::new(self.opts.radial_nodes);
        let cuts = self.breakpoints(rho);
        let mut total = 0.0;
        for pair in cuts.windows(2) {
            for (r, wr) in gl.on(pair[0], pair[1]) {
                total += wr * self.taper(r) / r * self.shell(r);
            }
        }
        3.0 / (4.0 * PI) * total
    }

    fn shell(&self, r: f64) -> f64 {
        let polar = ((0.6 * self.k_max * r).ceil() as usize + self.opts.min_polar).min(self.opts.max_polar);
        let azim = 2 * polar;
        let gl = GaussLegendre::new(polar);
        let nodes: Vec<(f64, f64)> = gl.on(-1.0, 1.0).collect();
        let dphi = 2.0 * PI / azim as f64;
        par::sum(polar * azim, |idx| {
            let (ct, wt) = nodes[idx / azim];
            let phi = (idx % azim) as f64 * dphi;
            let st = (1.0 - ct * ct).max(0.0).sqrt();
            let n = [st * phi.cos(), st * phi.sin(), ct];
            let y = [self.x[0] + r * n[0], self.x[1] + r * n[1], self.x[2] + r * n[2]];
            let wy = self.w.value(y);
            wt * dphi * dot(n, self.xi) * dot(n, cross(wy, self.xi))
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{curl, AnalyticField, GridSpec};
    use crate::fields::VectorField;

    #[test]
    fn planar_flow_has_no_stretching() {
        let g = GridSpec::cube(32).unwrap();
        let v = AnalyticField::taylor_green_2d(1.0).sample(g, 0.0);
        let w = curl(&v).unwrap();
        let s = stretching_factor(&w, [0.3, 0.2, 0.1], 4.0 * g.min_spacing()).unwrap();
        assert_eq!(s.pv, 0.0);
        assert_eq!(s.direct, 0.0);
    }

    #[test]
    fn vanishing_vorticity_is_rejected() {
        let g = GridSpec::cube(16).unwrap();
        let v = AnalyticField::taylor_green_2d(1.0).sample(g, 0.0);
        let w = curl(&v).unwrap();
        let zero = [0.0, 0.7, 0.0];
        let h = g.min_spacing();
        assert!(matches!(
            stretching_factor(&w, zero, 4.0 * h),
            Err(GeometryError::VanishingVorticity)
        ));
        assert!(stretching_factor(&w, [0.1; 3], 0.5 * h).is_err());
    }

    #[test]
    fn constant_direction_vorticity_gives_zero() {
        let g = GridSpec::cube(16).unwrap();
        let w = VectorField::from_fn(g, 0.0, |x| [(x[1] + 0.3).sin() * (2.0 * x[2]).cos(), 0.0, 0.0]);
        let s = stretching_factor(&w, [0.4, 0.9, 0.2], 4.0 * g.min_spacing()).unwrap();
        assert_eq!(s.pv, 0.0);
        assert_eq!(s.direction, [1.0, 0.0, 0.0]);
    }

    fn spectral() -> StretchingOptions {
        StretchingOptions {
            method: StretchMethod::Spectral,
            ..StretchingOptions::default()
        }
    }

    #[test]
    fn spectral_sum_converges_to_the_gradient() {
        let g = GridSpec::cube(64).unwrap();
        let v = VectorField::from_fn(g, 0.0, |x| {
            [
                (x[1] + 2.0 * x[2]).sin() + 0.3 * (3.0 * x[2]).cos(),
                (x[2] - x[0]).cos() + 0.5 * (2.0 * x[0] + x[2]).sin(),
                (x[0] + 0.2).sin() * 0.7 + (x[1] - 3.0 * x[0]).cos() * 0.4,
            ]
        });
        let w = curl(&v).unwrap();
        let x = [0.4, 1.1, -0.3];
        let h = g.min_spacing();
        let s = stretching_factor_with(&w, x, 1.5 * h, &spectral()).unwrap();
        assert!(s.window.is_infinite());
        assert!(s.relative_gap() < 1e-3, "{s:?}");
        // the truncation error is O(rho^2), halving rho cuts the gap
        let coarse = stretching_factor_with(&w, x, 3.0 * h, &spectral()).unwrap();
        assert!((s.pv_at_cut - s.direct).abs() < 0.3 * (coarse.pv_at_cut - s.direct).abs());
    }

    #[test]
    fn spectral_and_quadrature_agree_on_abc() {
        let g = GridSpec::cube(64).unwrap();
        let v = AnalyticField::abc(1.0, 1.0, 1.0, 1.0).sample(g, 0.0);
        let w = curl(&v).unwrap();
        let x = [0.3, 0.8, 1.9];
        let rho = 4.0 * g.min_spacing();
        let q = stretching_factor(&w, x, rho).unwrap();
        let s = stretching_factor_with(&w, x, rho, &spectral()).unwrap();
        assert_eq!(q.direct, s.direct);
        assert!((q.pv - s.pv).abs() < 0.05 * s.direct.abs().max(1e-3), "{q:?} {s:?}");
        assert!(s.relative_gap() < 1e-3);
    }
}
