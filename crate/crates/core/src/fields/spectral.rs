//! FFT-based calculus on periodic grids.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

use super::grid::{GridSpec, ScalarField, VectorField};
use super::trig::{StaticScalar, TrigVector};
use super::FieldError;

type Plan = Arc<dyn Fft<f64>>;

struct Plans {
    forward: [Plan; 3],
    inverse: [Plan; 3],
}

/// Per-size FFT plans, shared by all workers.
fn plans(n: [usize; 3]) -> Arc<Plans> {
    static CACHE: OnceLock<Mutex<HashMap<[usize; 3], Arc<Plans>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().expect("fft plan cache poisoned");
    guard
        .entry(n)
        .or_insert_with(|| {
            let mut planner = FftPlanner::new();
            Arc::new(Plans {
                forward: [
                    planner.plan_fft_forward(n[0]),
                    planner.plan_fft_forward(n[1]),
                    planner.plan_fft_forward(n[2]),
                ],
                inverse: [
                    planner.plan_fft_inverse(n[0]),
                    planner.plan_fft_inverse(n[1]),
                    planner.plan_fft_inverse(n[2]),
                ],
            })
        })
        .clone()
}

/// Spectral operators bound to one grid.
///
/// Coefficients are normalised so that `f(x) = sum_k c_k exp(i k.x)`.
#[derive(Clone)]
pub struct Spectral {
    pub grid: GridSpec,
    plans: Arc<Plans>,
    k: [Vec<f64>; 3],
}

impl Spectral {
    pub fn new(grid: GridSpec) -> Self {
        Self {
            grid,
            plans: plans(grid.n),
            k: [grid.wavenumbers(0), grid.wavenumbers(1), grid.wavenumbers(2)],
        }
    }

    pub fn wavenumbers(&self, axis: usize) -> &[f64] {
        &self.k[axis]
    }

    #[inline]
    pub fn wave(&self, idx: usize) -> [f64; 3] {
        let [i, j, k] = self.grid.unindex(idx);
        [self.k[0][i], self.k[1][j], self.k[2][k]]
    }

    /// True when any axis index sits on its Nyquist mode.
    #[inline]
    pub fn has_nyquist(&self, idx: usize) -> bool {
        let m = self.grid.unindex(idx);
        (0..3).any(|a| m[a] == self.grid.n[a] / 2)
    }

    pub fn forward(&self, values: &[f64]) -> Vec<Complex64> {
        let mut data: Vec<Complex64> = values.par_iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.transform(&mut data, true);
        let scale = 1.0 / self.grid.len() as f64;
        data.par_iter_mut().for_each(|c| *c *= scale);
        data
    }

    pub fn inverse(&self, spec: &[Complex64]) -> Vec<f64> {
        let mut data = spec.to_vec();
        self.transform(&mut data, false);
        data.into_par_iter().map(|c| c.re).collect()
    }

    /// Forward transforms of two real arrays through one complex transform.
    pub fn forward_pair(&self, a: &[f64], b: &[f64]) -> (Vec<Complex64>, Vec<Complex64>) {
        let mut z: Vec<Complex64> = a
            .par_iter()
            .zip(b.par_iter())
            .map(|(&x, &y)| Complex64::new(x, y))
            .collect();
        self.transform(&mut z, true);
        let scale = 0.5 / self.grid.len() as f64;
        let [n0, n1, n2] = self.grid.n;
        let mut fa = vec![Complex64::default(); z.len()];
        let mut fb = vec![Complex64::default(); z.len()];
        fa.par_chunks_mut(n0)
            .zip(fb.par_chunks_mut(n0))
            .enumerate()
            .for_each(|(row, (ra, rb))| {
                let (j, l) = (row % n1, row / n1);
                let crow = (n1 - j) % n1 + n1 * ((n2 - l) % n2);
                let (zr, zc) = (&z[row * n0..(row + 1) * n0], &z[crow * n0..(crow + 1) * n0]);
                for i in 0..n0 {
                    let p = zr[i];
                    let q = zc[(n0 - i) % n0].conj();
                    ra[i] = (p + q) * scale;
                    let d = (p - q) * scale;
                    rb[i] = Complex64::new(d.im, -d.re);
                }
            });
        (fa, fb)
    }

    /// Inverse transforms of two Hermitian spectra through one complex transform.
    pub fn inverse_pair(&self, a: &[Complex64], b: &[Complex64]) -> (Vec<f64>, Vec<f64>) {
        let mut z: Vec<Complex64> = a
            .par_iter()
            .zip(b.par_iter())
            .map(|(x, y)| x + Complex64::new(-y.im, y.re))
            .collect();
        self.transform(&mut z, false);
        let re = z.par_iter().map(|c| c.re).collect();
        let im = z.par_iter().map(|c| c.im).collect();
        (re, im)
    }

    /// Forward transforms of several real arrays, two per complex transform.
    pub fn forward_many(&self, fields: &[&[f64]]) -> Vec<Vec<Complex64>> {
        let mut out = Vec::with_capacity(fields.len());
        for pair in fields.chunks(2) {
            if let [a, b] = pair {
                let (fa, fb) = self.forward_pair(a, b);
                out.push(fa);
                out.push(fb);
            } else {
                out.push(self.forward(pair[0]));
            }
        }
        out
    }

    /// Inverse transforms of several Hermitian spectra, two per complex transform.
    pub fn inverse_many(&self, specs: &[&[Complex64]]) -> Vec<Vec<f64>> {
        let mut out = Vec::with_capacity(specs.len());
        for pair in specs.chunks(2) {
            if let [a, b] = pair {
                let (fa, fb) = self.inverse_pair(a, b);
                out.push(fa);
                out.push(fb);
            } else {
                out.push(self.inverse(pair[0]));
            }
        }
        out
    }

    pub fn forward3(&self, v: &[Vec<f64>; 3]) -> [Vec<Complex64>; 3] {
        let (a, b) = self.forward_pair(&v[0], &v[1]);
        [a, b, self.forward(&v[2])]
    }

    pub fn inverse3(&self, s: &[Vec<Complex64>; 3]) -> [Vec<f64>; 3] {
        let (a, b) = self.inverse_pair(&s[0], &s[1]);
        [a, b, self.inverse(&s[2])]
    }

    fn transform(&self, data: &mut [Complex64], forward: bool) {
        let [n0, n1, n2] = self.grid.n;
        let plans = if forward {
            &self.plans.forward
        } else {
            &self.plans.inverse
        };
        let scratch = |p: &Plan| vec![Complex64::default(); p.get_inplace_scratch_len()];
        let plane = n0 * n1;
        let rows_per_task = (4096 / n0).max(1);
        data.par_chunks_mut(n0 * rows_per_task).for_each_init(
            || scratch(&plans[0]),
            |s, lanes| plans[0].process_with_scratch(lanes, s),
        );
        // axis 1: transpose each x3-plane so x2 lanes are contiguous
        thread_local! {
            static BUF: std::cell::RefCell<Vec<Complex64>> = const { std::cell::RefCell::new(Vec::new()) };
        }
        let mut buf = BUF.with(|b| std::mem::take(&mut *b.borrow_mut()));
        buf.resize(data.len(), Complex64::default());
        data.par_chunks_mut(plane)
            .zip(buf.par_chunks_mut(plane))
            .for_each_init(
                || scratch(&plans[1]),
                |s, (d, b)| {
                    transpose::transpose(d, b, n0, n1);
                    plans[1].process_with_scratch(b, s);
                    transpose::transpose(b, d, n1, n0);
                },
            );
        // axis 2: the whole array is an n3 x (n1 n2) matrix
        transpose::transpose(data, &mut buf, plane, n2);
        let lanes_per_task = (4096 / n2).max(1);
        buf.par_chunks_mut(n2 * lanes_per_task).for_each_init(
            || scratch(&plans[2]),
            |s, lanes| plans[2].process_with_scratch(lanes, s),
        );
        transpose::transpose(&buf, data, n2, plane);
        BUF.with(|b| *b.borrow_mut() = buf);
    }

    /// Builds one value per mode from `(index, wave, nyquist flags)`, in index order.
    pub fn map_modes<T: Send + Default + Clone>(
        &self,
        f: impl Fn(usize, [f64; 3], [bool; 3]) -> T + Sync,
    ) -> Vec<T> {
        let mut out = vec![T::default(); self.grid.len()];
        self.update_modes(&mut out, |idx, k, nyq, slot| *slot = f(idx, k, nyq));
        out
    }

    /// Updates `data[idx]` in place from `(index, wave, nyquist flags)`.
    pub fn update_modes<T: Send>(
        &self,
        data: &mut [T],
        f: impl Fn(usize, [f64; 3], [bool; 3], &mut T) + Sync,
    ) {
        let [n0, n1, n2] = self.grid.n;
        let k = &self.k;
        data.par_chunks_mut(n0).enumerate().for_each(|(row, lane)| {
            let (j, l) = (row % n1, row / n1);
            for (i, slot) in lane.iter_mut().enumerate() {
                f(
                    row * n0 + i,
                    [k[0][i], k[1][j], k[2][l]],
                    [2 * i == n0, 2 * j == n1, 2 * l == n2],
                    slot,
                );
            }
        });
    }

    /// First derivative along `axis` in spectral space (Nyquist zeroed).
    pub fn derivative_spec(&self, spec: &[Complex64], axis: usize) -> Vec<Complex64> {
        self.map_modes(|idx, k, nyq| {
            if nyq[axis] {
                Complex64::default()
            } else {
                let c = spec[idx];
                Complex64::new(-k[axis] * c.im, k[axis] * c.re)
            }
        })
    }

    pub fn derivative(&self, values: &[f64], axis: usize) -> Vec<f64> {
        let spec = self.forward(values);
        self.inverse(&self.derivative_spec(&spec, axis))
    }

    /// All nine `d_j v_i`, as `grad[i][j]`.
    pub fn gradient_tensor(&self, v: &VectorField) -> [[Vec<f64>; 3]; 3] {
        let spec = self.forward3(&v.components);
        std::array::from_fn(|i| {
            self.inverse3(&std::array::from_fn(|j| self.derivative_spec(&spec[i], j)))
        })
    }

    pub fn laplacian_spec(&self, spec: &[Complex64]) -> Vec<Complex64> {
        self.map_modes(|idx, k, _| -spec[idx] * (k[0] * k[0] + k[1] * k[1] + k[2] * k[2]))
    }

    /// `i k x s` with Nyquist derivatives zeroed.
    pub fn curl_spec(&self, spec: &[Vec<Complex64>; 3]) -> [Vec<Complex64>; 3] {
        let [n0, n1, n2] = self.grid.n;
        let k = &self.k;
        let len = self.grid.len();
        let mut out: [Vec<Complex64>; 3] = std::array::from_fn(|_| vec![Complex64::default(); len]);
        let [o0, o1, o2] = &mut out;
        o0.par_chunks_mut(n0)
            .zip(o1.par_chunks_mut(n0))
            .zip(o2.par_chunks_mut(n0))
            .enumerate()
            .for_each(|(row, ((a, b), c))| {
                let (j, l) = (row % n1, row / n1);
                let ky = if 2 * j == n1 { 0.0 } else { k[1][j] };
                let kz = if 2 * l == n2 { 0.0 } else { k[2][l] };
                let base = row * n0;
                for i in 0..n0 {
                    let kx = if 2 * i == n0 { 0.0 } else { k[0][i] };
                    let (x, y, z) = (spec[0][base + i], spec[1][base + i], spec[2][base + i]);
                    let cx = z * ky - y * kz;
                    let cy = x * kz - z * kx;
                    let cz = y * kx - x * ky;
                    a[i] = Complex64::new(-cx.im, cx.re);
                    b[i] = Complex64::new(-cy.im, cy.re);
                    c[i] = Complex64::new(-cz.im, cz.re);
                }
            });
        out
    }

    /// Leray projection onto divergence-free modes, in place.
    pub fn project(&self, spec: &mut [Vec<Complex64>; 3]) {
        let [n0, n1, _] = self.grid.n;
        let k = &self.k;
        let [a, b, c] = spec;
        a.par_chunks_mut(n0)
            .zip(b.par_chunks_mut(n0))
            .zip(c.par_chunks_mut(n0))
            .enumerate()
            .for_each(|(row, ((x, y), z))| {
                let (ky, kz) = (k[1][row % n1], k[2][row / n1]);
                for i in 0..n0 {
                    let kx = k[0][i];
                    let k2 = kx * kx + ky * ky + kz * kz;
                    if k2 == 0.0 {
                        continue;
                    }
                    let kv = (x[i] * kx + y[i] * ky + z[i] * kz) / k2;
                    x[i] -= kv * kx;
                    y[i] -= kv * ky;
                    z[i] -= kv * kz;
                }
            });
    }

    /// Converts normalised coefficients into an explicit plane-wave sum.
    ///
    /// Terms whose magnitude is below `prune_rel` of the largest are dropped.
    pub fn to_trig(&self, spec: &[Vec<Complex64>; 3], prune_rel: f64) -> TrigVector {
        let n = self.grid.n;
        let mut out = TrigVector::empty();
        for idx in 0..self.grid.len() {
            let [i, j, k] = self.grid.unindex(idx);
            let conj = self.grid.index((n[0] - i) % n[0], (n[1] - j) % n[1], (n[2] - k) % n[2]);
            if conj < idx {
                continue;
            }
            let wave = self.wave(idx);
            let c = [spec[0][idx], spec[1][idx], spec[2][idx]];
            if c.iter().all(|z| z.norm_sqr() == 0.0) {
                continue;
            }
            if conj == idx {
                out.push(wave, [c[0].re, c[1].re, c[2].re], [0.0; 3]);
            } else {
                out.push(
                    wave,
                    [2.0 * c[0].re, 2.0 * c[1].re, 2.0 * c[2].re],
                    [-2.0 * c[0].im, -2.0 * c[1].im, -2.0 * c[2].im],
                );
            }
        }
        out.prune(prune_rel);
        out
    }

    pub fn scalar_to_trig(&self, spec: &[Complex64], prune_rel: f64) -> StaticScalar {
        let n = self.grid.n;
        let mut out = StaticScalar::default();
        for idx in 0..self.grid.len() {
            let [i, j, k] = self.grid.unindex(idx);
            let conj = self.grid.index((n[0] - i) % n[0], (n[1] - j) % n[1], (n[2] - k) % n[2]);
            if conj < idx || spec[idx].norm_sqr() == 0.0 {
                continue;
            }
            let c = spec[idx];
            out.waves.push(self.wave(idx));
            if conj == idx {
                out.cos.push(c.re);
                out.sin.push(0.0);
            } else {
                out.cos.push(2.0 * c.re);
                out.sin.push(-2.0 * c.im);
            }
        }
        out.prune(prune_rel);
        out
    }
}

/// Pressure from `-Delta p = d_i d_j (v_i v_j)`, computed on a grid padded
/// by two in every direction so that the quadratic products are alias-free.
///
/// Returns the padded operator together with the pressure spectrum on it.
pub fn pressure_spectrum(v: &VectorField) -> (Spectral, Vec<Complex64>) {
    let fine = GridSpec {
        n: [v.grid.n[0] * 2, v.grid.n[1] * 2, v.grid.n[2] * 2],
        len: v.grid.len,
    };
    let coarse = Spectral::new(v.grid);
    let padded = Spectral::new(fine);
    let phys: Vec<Vec<f64>> = (0..3)
        .map(|c| {
            let spec = coarse.forward(&v.components[c]);
            padded.inverse(&pad_spectrum(&coarse, &padded, &spec))
        })
        .collect();
    let mut p = vec![Complex64::default(); fine.len()];
    for i in 0..3 {
        for j in i..3 {
            let prod: Vec<f64> = phys[i]
                .par_iter()
                .zip(phys[j].par_iter())
                .map(|(a, b)| a * b)
                .collect();
            let spec = padded.forward(&prod);
            let weight = if i == j { 1.0 } else { 2.0 };
            padded.update_modes(&mut p, |idx, k, _, slot| {
                let k2 = k[0] * k[0] + k[1] * k[1] + k[2] * k[2];
                if k2 > 0.0 {
                    *slot -= spec[idx] * (weight * k[i] * k[j] / k2);
                }
            });
        }
    }
    (padded, p)
}

/// Zero-pads normalised coefficients from `coarse` onto the larger `fine` grid.
/// Nyquist coefficients are split evenly between the `+N/2` and `-N/2` modes.
pub fn pad_spectrum(coarse: &Spectral, fine: &Spectral, spec: &[Complex64]) -> Vec<Complex64> {
    let nc = coarse.grid.n;
    let nf = fine.grid.n;
    let mut out = vec![Complex64::default(); fine.grid.len()];
    for idx in 0..coarse.grid.len() {
        let m = coarse.grid.unindex(idx);
        let mut targets: Vec<([usize; 3], f64)> = vec![([0; 3], 1.0)];
        for axis in 0..3 {
            let mut next = Vec::with_capacity(targets.len() * 2);
            for (t, w) in targets {
                let signed = if m[axis] <= nc[axis] / 2 {
                    m[axis] as i64
                } else {
                    m[axis] as i64 - nc[axis] as i64
                };
                let place = |s: i64| -> usize { s.rem_euclid(nf[axis] as i64) as usize };
                if m[axis] == nc[axis] / 2 {
                    let mut a = t;
                    a[axis] = place(signed);
                    let mut b = t;
                    b[axis] = place(-signed);
                    next.push((a, w * 0.5));
                    next.push((b, w * 0.5));
                } else {
                    let mut a = t;
                    a[axis] = place(signed);
                    next.push((a, w));
                }
            }
            targets = next;
        }
        for (t, w) in targets {
            out[fine.grid.index(t[0], t[1], t[2])] += spec[idx] * w;
        }
    }
    out
}

/// Vorticity by spectral differentiation.
pub fn curl(v: &VectorField) -> Result<VectorField, FieldError> {
    v.check_finite()?;
    let ops = Spectral::new(v.grid);
    let spec = ops.forward3(&v.components);
    let w = ops.curl_spec(&spec);
    Ok(VectorField {
        grid: v.grid,
        time: v.time,
        components: ops.inverse3(&w),
    })
}

pub fn divergence(v: &VectorField) -> Result<ScalarField, FieldError> {
    v.check_finite()?;
    let ops = Spectral::new(v.grid);
    let mut acc = vec![Complex64::default(); v.grid.len()];
    for c in 0..3 {
        let d = ops.derivative_spec(&ops.forward(&v.components[c]), c);
        acc.par_iter_mut().zip(d).for_each(|(a, b)| *a += b);
    }
    Ok(ScalarField {
        grid: v.grid,
        values: ops.inverse(&acc),
        time: v.time,
    })
}

pub fn gradient(s: &ScalarField) -> Result<VectorField, FieldError> {
    s.check_finite()?;
    let ops = Spectral::new(s.grid);
    let spec = ops.forward(&s.values);
    Ok(VectorField {
        grid: s.grid,
        time: s.time,
        components: std::array::from_fn(|a| ops.inverse(&ops.derivative_spec(&spec, a))),
    })
}

pub fn laplacian(s: &ScalarField) -> Result<ScalarField, FieldError> {
    s.check_finite()?;
    let ops = Spectral::new(s.grid);
    let spec = ops.forward(&s.values);
    Ok(ScalarField {
        grid: s.grid,
        values: ops.inverse(&ops.laplacian_spec(&spec)),
        time: s.time,
    })
}

/// Mean-zero, divergence-free velocity whose curl is the solenoidal part of `omega`.
pub fn biot_savart(omega: &VectorField) -> Result<VectorField, FieldError> {
    omega.check_finite()?;
    let scale = omega.max_abs().max(f64::MIN_POSITIVE);
    let means = omega.means();
    for (c, m) in means.iter().enumerate() {
        if m.abs() > 1e-10 * scale {
            return Err(FieldError::NonZeroMean {
                component: c,
                mean: *m,
            });
        }
    }
    let ops = Spectral::new(omega.grid);
    let spec = ops.forward3(&omega.components);
    // v_hat = i k x w_hat / |k|^2
    let mut out: [Vec<Complex64>; 3] = std::array::from_fn(|_| vec![Complex64::default(); omega.grid.len()]);
    for idx in 0..omega.grid.len() {
        if ops.has_nyquist(idx) {
            continue;
        }
        let k = ops.wave(idx);
        let k2 = k[0] * k[0] + k[1] * k[1] + k[2] * k[2];
        if k2 == 0.0 {
            continue;
        }
        let w = [spec[0][idx], spec[1][idx], spec[2][idx]];
        let kxw = [
            w[2] * k[1] - w[1] * k[2],
            w[0] * k[2] - w[2] * k[0],
            w[1] * k[0] - w[0] * k[1],
        ];
        for c in 0..3 {
            out[c][idx] = Complex64::new(-kxw[c].im, kxw[c].re) / k2;
        }
    }
    Ok(VectorField {
        grid: omega.grid,
        time: omega.time,
        components: ops.inverse3(&out),
    })
}
