use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{divfree_defect, f_of, sign_with_zero, DivDefect, DivergenceStencil, FluxError, ZERO_REL};
use crate::fields::{
    sample_poly, trig_of, Channel, Deriv, DiscSpec, FieldSlice, Flow, TrigVector, VectorField,
};
use crate::quad::{DiscQuadrature, GaussLegendre};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FluxIntegrand {
    /// `|omega_3|`
    AbsOmega3,
    /// `sgn(omega_3) omega_3`, with the zero-set convention
    Omega3Tilde,
    /// `sqrt(omega_3^2 + 1)`
    FOmega3,
}

impl FluxIntegrand {
    fn apply(self, w3: f64, zero: f64) -> f64 {
        match self {
            FluxIntegrand::AbsOmega3 => w3.abs(),
            FluxIntegrand::Omega3Tilde => sign_with_zero(w3, zero) * w3,
            FluxIntegrand::FOmega3 => f_of(w3),
        }
    }
}

fn disc_points(disc: &DiscSpec, quad: &DiscQuadrature) -> (Vec<[f64; 3]>, Vec<f64>) {
    quad.disc(disc.center, disc.r)
        .into_iter()
        .map(|(p, w)| ([p[0], p[1], disc.z], w))
        .unzip()
}

fn integrate(w3: &[f64], weights: &[f64], integrand: FluxIntegrand) -> f64 {
    let zero = ZERO_REL * w3.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    w3.iter().zip(weights).map(|(v, w)| w * integrand.apply(*v, zero)).sum()
}

/// `int_D integrand(omega_3) dx1 dx2` over a horizontal disc of a flow slice.
pub fn disc_flux<S: FieldSlice + ?Sized>(
    slice: &S,
    disc: &DiscSpec,
    integrand: FluxIntegrand,
    quad: &DiscQuadrature,
) -> f64 {
    let (pts, weights) = disc_points(disc, quad);
    let w3 = slice.sample(&pts, &[Channel::w(2)]);
    integrate(&w3, &weights, integrand)
}

/// As [`disc_flux`], for a sampled vorticity field.
pub fn disc_flux_sampled(
    omega: &VectorField,
    disc: &DiscSpec,
    integrand: FluxIntegrand,
    quad: &DiscQuadrature,
) -> Result<f64, FluxError> {
    disc.check_fits(Some(omega.grid.safe_radius()))?;
    let poly = trig_of(omega);
    let (pts, weights) = disc_points(disc, quad);
    let w3 = sample_poly(&poly, &pts, &[(2, Deriv::Value)]);
    Ok(integrate(&w3, &weights, integrand))
}

/// `Gamma(r, z, t)` on a lattice; values are stored time-major, then height, then radius.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FluxProfile {
    pub center: [f64; 2],
    pub radii: Vec<f64>,
    pub heights: Vec<f64>,
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub quadrature: DiscQuadrature,
    pub interpolation: String,
}

impl FluxProfile {
    pub fn get(&self, it: usize, iz: usize, ir: usize) -> f64 {
        self.values[(it * self.heights.len() + iz) * self.radii.len() + ir]
    }

    /// First lattice point where `Gamma` drops as `r` grows (radii sorted ascending).
    pub fn check_monotone(&self) -> Result<(), FluxError> {
        for it in 0..self.times.len() {
            for iz in 0..self.heights.len() {
                for ir in 1..self.radii.len() {
                    if self.get(it, iz, ir) < self.get(it, iz, ir - 1) {
                        return Err(FluxError::NotMonotone {
                            t: self.times[it],
                            z: self.heights[iz],
                            r: self.radii[ir],
                        });
                    }
                }
            }
        }
        Ok(())
    }
}

fn check_radii(radii: &[f64]) -> Result<(), FluxError> {
    if radii.is_empty() || radii.windows(2).any(|w| w[1] <= w[0]) || radii[0] < 0.0 {
        return Err(FluxError::InvalidParameter("radii must be nonnegative and increasing".into()));
    }
    Ok(())
}

pub fn flux_profile<F: Flow>(
    flow: &F,
    center: [f64; 2],
    radii: &[f64],
    heights: &[f64],
    times: &[f64],
    quad: &DiscQuadrature,
) -> Result<FluxProfile, FluxError> {
    check_radii(radii)?;
    let rmax = radii[radii.len() - 1];
    DiscSpec::new(rmax, 0.0, 0.0, center)?.check_fits(flow.safe_radius())?;
    let mut values = Vec::with_capacity(times.len() * heights.len() * radii.len());
    for &t in times {
        let slice = flow.slice(t)?;
        for &z in heights {
            values.extend(gammas(&*slice, center, z, radii, quad));
        }
    }
    let profile = FluxProfile {
        center,
        radii: radii.to_vec(),
        heights: heights.to_vec(),
        times: times.to_vec(),
        values,
        quadrature: *quad,
        interpolation: "trigonometric".into(),
    };
    profile.check_monotone()?;
    Ok(profile)
}

/// `Gamma` at several radii on one layer with a single batched evaluation.
pub(crate) fn gammas<S: FieldSlice + ?Sized>(
    slice: &S,
    center: [f64; 2],
    z: f64,
    radii: &[f64],
    quad: &DiscQuadrature,
) -> Vec<f64> {
    let mut pts = Vec::new();
    let mut spans = Vec::new();
    let mut weights = Vec::new();
    for &r in radii {
        let (p, w) = disc_points(&DiscSpec { r, z, t: 0.0, center }, quad);
        spans.push((pts.len(), pts.len() + p.len()));
        pts.extend(p);
        weights.extend(w);
    }
    let w3 = slice.sample(&pts, &[Channel::w(2)]);
    spans
        .iter()
        .map(|&(a, b)| w3[a..b].iter().zip(&weights[a..b]).map(|(v, w)| w * v.abs()).sum())
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BalanceOptions {
    pub quad: DiscQuadrature,
    /// Gauss nodes along the cylinder side.
    pub vertical: usize,
    /// Divergence defect above which the pre-check is reported as failed.
    pub defect_tolerance: f64,
}

impl Default for BalanceOptions {
    fn default() -> Self {
        Self {
            quad: DiscQuadrature::default(),
            vertical: 64,
            defect_tolerance: 1e-8,
        }
    }
}

/// Divergence theorem on the cylinder `|x_h - c| < a, z < x3 < z_top`:
/// `bottom = top + side` for a solenoidal field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FluxBalance {
    pub bottom: f64,
    pub top: f64,
    pub side: f64,
    pub residual: f64,
    pub relative: f64,
    pub defect: Option<DivDefect>,
    pub precheck_passed: bool,
}

/// Flux balance of a sampled field, with its divergence defect as pre-check.
pub fn flux_balance(
    w: &VectorField,
    center: [f64; 2],
    a: f64,
    z: f64,
    z_top: f64,
    opts: &BalanceOptions,
) -> Result<FluxBalance, FluxError> {
    DiscSpec::new(a, z, 0.0, center)?.check_fits(Some(w.grid.safe_radius()))?;
    let defect = divfree_defect(w, |_| false, DivergenceStencil::Spectral)?;
    let mut out = flux_balance_poly(&trig_of(w), center, a, z, z_top, opts)?;
    out.precheck_passed = defect.relative <= opts.defect_tolerance;
    out.defect = Some(defect);
    Ok(out)
}

/// Flux balance of an explicit plane-wave field.
pub fn flux_balance_poly(
    poly: &TrigVector,
    center: [f64; 2],
    a: f64,
    z: f64,
    z_top: f64,
    opts: &BalanceOptions,
) -> Result<FluxBalance, FluxError> {
    if !(a > 0.0 && z_top > z) {
        return Err(FluxError::InvalidParameter(format!("need a > 0 and z_top > z (a={a}, z={z}, z_top={z_top})")));
    }
    let flux = |height: f64| {
        let (pts, weights) = disc_points(&DiscSpec { r: a, z: height, t: 0.0, center }, &opts.quad);
        let w3 = sample_poly(poly, &pts, &[(2, Deriv::Value)]);
        w3.iter().zip(&weights).map(|(v, w)| v * w).sum::<f64>()
    };
    let (bottom, top) = (flux(z), flux(z_top));
    let ring = opts.quad.circle(center, a);
    let layers: Vec<(f64, f64)> = GaussLegendre::new(opts.vertical).on(z, z_top).collect();
    let side: f64 = layers
        .par_iter()
        .map(|&(zeta, wz)| {
            let pts: Vec<[f64; 3]> = ring.iter().map(|(p, _, _)| [p[0], p[1], zeta]).collect();
            let vals = sample_poly(poly, &pts, &[(0, Deriv::Value), (1, Deriv::Value)]);
            wz * ring
                .iter()
                .enumerate()
                .map(|(i, (_, n, ds))| ds * (vals[2 * i] * n[0] + vals[2 * i + 1] * n[1]))
                .sum::<f64>()
        })
        .collect::<Vec<_>>()
        .into_iter()
        .sum();
    let residual = (bottom - top - side).abs();
    let scale = bottom.abs().max(top.abs()).max(side.abs());
    Ok(FluxBalance {
        bottom,
        top,
        side,
        residual,
        relative: if scale > 0.0 { residual / scale } else { 0.0 },
        defect: None,
        precheck_passed: true,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayOptions {
    pub quad: DiscQuadrature,
    /// Heights sampled across `|z - z0| <= r` at each level.
    pub heights: usize,
}

impl Default for DecayOptions {
    fn default() -> Self {
        Self {
            quad: DiscQuadrature::default(),
            heights: 9,
        }
    }
}

/// `sup Gamma` over the cylinders `Q(r; x0, t0)` for dyadic `r`, largest first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayProfile {
    pub center: [f64; 3],
    pub t0: f64,
    pub radii: Vec<f64>,
    pub sup_gamma: Vec<f64>,
    /// `(z, t)` attaining each supremum.
    pub argmax: Vec<(f64, f64)>,
}

impl DecayProfile {
    /// `log2(sup(r) / sup(r/2))` for consecutive levels.
    pub fn slopes(&self) -> Vec<f64> {
        self.sup_gamma.windows(2).map(|w| (w[0] / w[1]).log2()).collect()
    }

    /// Least-squares slope of `log sup` against `log r`.
    pub fn fitted_slope(&self) -> f64 {
        let pts: Vec<(f64, f64)> = self
            .radii
            .iter()
            .zip(&self.sup_gamma)
            .filter(|(_, g)| **g > 0.0)
            .map(|(r, g)| (r.log2(), g.log2()))
            .collect();
        let n = pts.len() as f64;
        let (mx, my) = pts.iter().fold((0.0, 0.0), |a, p| (a.0 + p.0 / n, a.1 + p.1 / n));
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
        sxy / sxx
    }
}

pub fn gamma_decay_profile<F: Flow>(
    flow: &F,
    x0: [f64; 3],
    t0: f64,
    r0: f64,
    levels: usize,
    opts: &DecayOptions,
) -> Result<DecayProfile, FluxError> {
    if !(r0 > 0.0) || levels == 0 || opts.heights < 2 {
        return Err(FluxError::InvalidParameter("need r0 > 0, levels >= 1, heights >= 2".into()));
    }
    DiscSpec::new(r0, x0[2], t0, [x0[0], x0[1]])?.check_fits(flow.safe_radius())?;
    let radii: Vec<f64> = (0..levels).map(|m| r0 * 0.5_f64.powi(m as i32)).collect();
    // Smallest level first; every level also revisits the (z, t) samples of the
    // levels inside it so the table is monotone by construction.
    let mut samples: Vec<(f64, f64)> = Vec::new();
    let mut sup = vec![0.0; levels];
    let mut arg = vec![(x0[2], t0); levels];
    for m in (0..levels).rev() {
        let r = radii[m];
        for t in flow.time_samples(t0 - r * r, t0)? {
            for i in 0..opts.heights {
                let z = x0[2] - r + 2.0 * r * i as f64 / (opts.heights - 1) as f64;
                samples.push((z, t));
            }
        }
        let mut times: Vec<f64> = samples.iter().map(|s| s.1).collect();
        times.sort_by(f64::total_cmp);
        times.dedup();
        for t in times {
            let slice = flow.slice(t)?;
            for &(z, _) in samples.iter().filter(|s| s.1 == t) {
                let g = gammas(&*slice, [x0[0], x0[1]], z, &[r], &opts.quad)[0];
                if g > sup[m] {
                    sup[m] = g;
                    arg[m] = (z, t);
                }
            }
        }
    }
    Ok(DecayProfile {
        center: x0,
        t0,
        radii,
        sup_gamma: sup,
        argmax: arg,
    })
}
