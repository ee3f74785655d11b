//! Absolute vorticity flux through horizontal discs and the identities that
//! govern it: flipped vorticity, flux balance, the `W` profile and the
//! parabolic inequality for `Gamma`.

mod audit;
mod disc;

pub use audit::{
    gamma_inequality_audit, w_profile, AuditOptions, GammaAuditPoint, ProbeLattice, WPoint, WProfile,
};
pub use disc::{
    disc_flux, disc_flux_sampled, flux_balance, flux_balance_poly, flux_profile, gamma_decay_profile,
    BalanceOptions, DecayOptions, DecayProfile, FluxBalance, FluxIntegrand, FluxProfile,
};

use thiserror::Error;

use crate::fields::{FieldError, Spectral, VectorField};

/// `|omega_3|` below this fraction of its maximum counts as zero.
pub const ZERO_REL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FluxError {
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error("every node is excluded")]
    NoData,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("flux profile decreases in r at t={t}, z={z}, r={r}")]
    NotMonotone { t: f64, z: f64, r: f64 },
}

/// `f(s) = sqrt(s^2 + 1)`.
pub fn f_of(s: f64) -> f64 {
    (s * s + 1.0).sqrt()
}

fn sign_with_zero(x: f64, zero: f64) -> f64 {
    if x.abs() < zero {
        0.0
    } else {
        x.signum()
    }
}

fn zero_level(omega: &VectorField) -> f64 {
    ZERO_REL * omega.components[2].iter().fold(0.0_f64, |m, v| m.max(v.abs()))
}

/// `omega sgn(omega_3)`, or with `eta > 0` the smooth surrogate
/// `omega_3 / sqrt(omega_3^2 + eta^2) omega`.
pub fn flipped_vorticity(omega: &VectorField, eta: f64) -> Result<VectorField, FluxError> {
    if !(eta.is_finite() && eta >= 0.0) {
        return Err(FluxError::InvalidParameter(format!("eta {eta}")));
    }
    let zero = zero_level(omega);
    Ok(omega.map_nodes(|w| {
        let s = if eta == 0.0 {
            sign_with_zero(w[2], zero)
        } else {
            w[2] / (w[2] * w[2] + eta * eta).sqrt()
        };
        [s * w[0], s * w[1], s * w[2]]
    }))
}

/// `omega omega_3 / sqrt(omega_3^2 + 1)`.
pub fn modified_vorticity(omega: &VectorField) -> VectorField {
    omega.map_nodes(|w| {
        let s = w[2] / f_of(w[2]);
        [s * w[0], s * w[1], s * w[2]]
    })
}

/// Nodes where `omega_3` counts as zero.
pub fn zero_set(omega: &VectorField) -> Vec<bool> {
    let zero = zero_level(omega);
    omega.components[2].iter().map(|v| v.abs() < zero).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DivergenceStencil {
    Spectral,
    /// Fourth-order centered differences; reaches two nodes, matching the exclusion band.
    Central4,
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct DivDefect {
    pub max_abs: f64,
    /// `max_abs` over `max|w|` times the fundamental wavenumber of the box.
    pub relative: f64,
    pub worst: usize,
    pub checked: usize,
}

/// Largest `|div w|` over nodes farther than two grid spacings from every excluded node.
pub fn divfree_defect(
    w: &VectorField,
    excluded: impl Fn(usize) -> bool,
    stencil: DivergenceStencil,
) -> Result<DivDefect, FluxError> {
    let grid = w.grid;
    let n = grid.n;
    let h = grid.spacing();
    let reach = 2.0 * h.iter().cloned().fold(0.0, f64::max);
    let span = |a: usize| (reach / h[a]).floor() as i64;
    let mut offsets = Vec::new();
    for di in -span(0)..=span(0) {
        for dj in -span(1)..=span(1) {
            for dk in -span(2)..=span(2) {
                let d2 = (di as f64 * h[0]).powi(2) + (dj as f64 * h[1]).powi(2) + (dk as f64 * h[2]).powi(2);
                if d2 <= reach * reach * (1.0 + 1e-12) {
                    offsets.push([di, dj, dk]);
                }
            }
        }
    }
    let mut banned = vec![false; grid.len()];
    for idx in (0..grid.len()).filter(|&i| excluded(i)) {
        let [i, j, k] = grid.unindex(idx);
        for o in &offsets {
            let wrap = |a: usize, d: i64, m: usize| ((a as i64 + d).rem_euclid(m as i64)) as usize;
            banned[grid.index(wrap(i, o[0], n[0]), wrap(j, o[1], n[1]), wrap(k, o[2], n[2]))] = true;
        }
    }
    let parts: [Vec<f64>; 3] = match stencil {
        DivergenceStencil::Spectral => {
            let sp = Spectral::new(grid);
            [0, 1, 2].map(|a| sp.derivative(&w.components[a], a))
        }
        DivergenceStencil::Central4 => [0, 1, 2].map(|a| central4(w, a)),
    };
    let mut out = DivDefect {
        max_abs: 0.0,
        relative: 0.0,
        worst: 0,
        checked: 0,
    };
    for idx in (0..grid.len()).filter(|&i| !banned[i]) {
        out.checked += 1;
        let d = parts[0][idx] + parts[1][idx] + parts[2][idx];
        if d.abs() > out.max_abs {
            out.max_abs = d.abs();
            out.worst = idx;
        }
    }
    if out.checked == 0 {
        return Err(FluxError::NoData);
    }
    let k0 = 2.0 * std::f64::consts::PI / grid.len.iter().cloned().fold(f64::INFINITY, f64::min);
    let s = w.max_norm() * k0;
    out.relative = if s > 0.0 { out.max_abs / s } else { 0.0 };
    Ok(out)
}

fn central4(w: &VectorField, axis: usize) -> Vec<f64> {
    let grid = w.grid;
    let n = grid.n;
    let h = grid.spacing()[axis];
    let f = &w.components[axis];
    (0..grid.len())
        .map(|idx| {
            let p = grid.unindex(idx);
            let at = |d: i64| {
                let mut q = p;
                q[axis] = ((p[axis] as i64 + d).rem_euclid(n[axis] as i64)) as usize;
                f[grid.index(q[0], q[1], q[2])]
            };
            (-at(2) + 8.0 * at(1) - 8.0 * at(-1) + at(-2)) / (12.0 * h)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{curl, AnalyticField, GridSpec};

    fn grid() -> GridSpec {
        GridSpec::cube(16).unwrap()
    }

    #[test]
    fn flipping_examples() {
        let down = VectorField::from_fn(grid(), 0.0, |_| [0.3, 0.0, -1.0]);
        let up = flipped_vorticity(&down, 0.0).unwrap();
        assert_eq!(up.at(5), [-0.3, 0.0, 1.0]);
        let pos = VectorField::from_fn(grid(), 0.0, |x| [x[0].sin(), 0.1, 2.0 + x[1].cos()]);
        assert_eq!(flipped_vorticity(&pos, 0.0).unwrap(), pos);
        let shear = VectorField::from_fn(grid(), 0.0, |x| [0.0, 0.0, -x[1].cos()]);
        let flipped = flipped_vorticity(&shear, 0.0).unwrap();
        for i in 0..grid().len() {
            let want = grid().position(i)[1].cos().abs();
            assert!((flipped.at(i)[2] - want).abs() < 1e-15);
        }
    }

    #[test]
    fn smooth_flip_converges_away_from_zero_set() {
        let shear = VectorField::from_fn(grid(), 0.0, |x| [0.2, 0.0, -x[1].cos()]);
        let sharp = flipped_vorticity(&shear, 0.0).unwrap();
        let far: Vec<usize> = (0..grid().len()).filter(|&i| shear.at(i)[2].abs() > 0.1).collect();
        let mut last = f64::INFINITY;
        for eta in [1e-2, 1e-4, 1e-6] {
            let smooth = flipped_vorticity(&shear, eta).unwrap();
            let err = far
                .iter()
                .flat_map(|&i| (0..3).map(move |c| (i, c)))
                .map(|(i, c)| (smooth.at(i)[c] - sharp.at(i)[c]).abs())
                .fold(0.0, f64::max);
            assert!(err < last);
            last = err;
        }
        assert!(last < 1e-9);
    }

    #[test]
    fn modified_vorticity_examples() {
        let w = VectorField::from_fn(grid(), 0.0, |_| [0.0, 0.0, 1.0]);
        let m = modified_vorticity(&w);
        assert!((m.at(3)[2] - 0.5_f64.sqrt()).abs() < 1e-15);
        let flat = VectorField::from_fn(grid(), 0.0, |x| [x[0].cos(), 1.0, 0.0]);
        assert!(modified_vorticity(&flat).max_abs() == 0.0);
    }

    #[test]
    fn curls_and_constants_are_divergence_free() {
        let v = AnalyticField::taylor_green(1.0).sample(grid(), 0.0);
        let w = curl(&v).unwrap();
        let d = divfree_defect(&w, |_| false, DivergenceStencil::Spectral).unwrap();
        assert!(d.relative < 1e-10, "{d:?}");
        assert_eq!(d.checked, grid().len());
        let c = VectorField::from_fn(grid(), 0.0, |_| [1.0, -2.0, 0.5]);
        assert_eq!(divfree_defect(&c, |_| false, DivergenceStencil::Central4).unwrap().max_abs, 0.0);
        assert_eq!(divfree_defect(&c, |_| true, DivergenceStencil::Spectral), Err(FluxError::NoData));
    }

    #[test]
    fn exclusion_band_is_two_spacings_wide() {
        let c = VectorField::from_fn(grid(), 0.0, |_| [1.0, 0.0, 0.0]);
        let d = divfree_defect(&c, |i| i == 0, DivergenceStencil::Central4).unwrap();
        // Ball of radius two spacings on a cubic lattice: 33 nodes.
        assert_eq!(d.checked, grid().len() - 33);
    }
}
