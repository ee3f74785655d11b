use std::f64::consts::{PI, TAU};

use proptest::prelude::*;

use nsgeom::axisym::{
    explore_level_set, to_cylindrical, velocity_cone_check, AnalyticStream, Axis, CylindricalOptions, ExploreOptions,
    MeridianGrid,
};
use nsgeom::cli::report::{read_csv, write_csv, FluxRow};
use nsgeom::criticality::{critical_flux_norm, g_energy, lambda_q, scale_quantities, ScaleOptions};
use nsgeom::fields::{
    biot_savart, curl, divergence, AnalyticField, AnalyticFlow, DiscSpec, Flow, GridSpec, Spectral, VectorField,
    VelocityMode,
};
use nsgeom::flux::{disc_flux, flux_profile, FluxIntegrand};
use nsgeom::geometry::{cone_deficiency, great_circle_obstruction, pairwise_alignment, DirectionSet};
use nsgeom::quad::DiscQuadrature;

fn config(cases: u32) -> ProptestConfig {
    ProptestConfig {
        cases,
        ..ProptestConfig::default()
    }
}

fn unit(v: [f64; 3]) -> [f64; 3] {
    let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    v.map(|c| c / n)
}

fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn vec3() -> impl Strategy<Value = [f64; 3]> {
    [-1.0..1.0_f64, -1.0..1.0_f64, -1.0..1.0_f64]
}

fn direction() -> impl Strategy<Value = [f64; 3]> {
    vec3().prop_filter("not too short", |v| dot(*v, *v) > 0.01).prop_map(unit)
}

fn mode(kmax: i32) -> impl Strategy<Value = VelocityMode> {
    ([-kmax..=kmax, -kmax..=kmax, -kmax..=kmax], vec3(), vec3(), 0.0..2.0_f64)
        .prop_filter("nonzero wavenumber", |(k, ..)| *k != [0, 0, 0])
        .prop_map(|(k, cos, sin, decay)| VelocityMode {
            wave: k.map(f64::from),
            cos,
            sin,
            decay,
        })
}

fn field(kmax: i32, max_modes: usize) -> impl Strategy<Value = AnalyticField> {
    prop::collection::vec(mode(kmax), 1..=max_modes).prop_map(AnalyticField::custom)
}

/// Rotation about `axis` by `angle`.
fn rotation(axis: [f64; 3], angle: f64) -> [[f64; 3]; 3] {
    let [x, y, z] = axis;
    let (s, c) = angle.sin_cos();
    let t = 1.0 - c;
    [
        [c + x * x * t, x * y * t - z * s, x * z * t + y * s],
        [y * x * t + z * s, c + y * y * t, y * z * t - x * s],
        [z * x * t - y * s, z * y * t + x * s, c + z * z * t],
    ]
}

fn apply(m: &[[f64; 3]; 3], v: [f64; 3]) -> [f64; 3] {
    [dot(m[0], v), dot(m[1], v), dot(m[2], v)]
}

/// Directions filling a double cone of half-angle `theta` around `e`, with the
/// rim sampled evenly so the axis is unique.
fn cone_cloud(e: [f64; 3], theta: f64, interior: &[(f64, f64, bool)]) -> Vec<[f64; 3]> {
    let helper = if e[0].abs() < 0.9 { [1.0, 0.0, 0.0] } else { [0.0, 1.0, 0.0] };
    let d = dot(helper, e);
    let u = unit([helper[0] - d * e[0], helper[1] - d * e[1], helper[2] - d * e[2]]);
    let v = [e[1] * u[2] - e[2] * u[1], e[2] * u[0] - e[0] * u[2], e[0] * u[1] - e[1] * u[0]];
    let at = |th: f64, ph: f64| -> [f64; 3] {
        std::array::from_fn(|i| th.cos() * e[i] + th.sin() * (ph.cos() * u[i] + ph.sin() * v[i]))
    };
    let mut out: Vec<[f64; 3]> = (0..12).map(|k| at(theta, 2.0 * PI * k as f64 / 12.0)).collect();
    for &(f, ph, flip) in interior {
        let p = at(f * theta, ph);
        out.push(if flip { p.map(|c| -c) } else { p });
    }
    out
}

proptest! {
    #![proptest_config(config(12))]

    #[test]
    fn div_curl_vanishes_and_biot_savart_inverts_curl(f in field(4, 6)) {
        let g = GridSpec::cube(16).unwrap();
        let u = curl(&f.sample(g, 0.0)).unwrap();
        let grad = Spectral::new(g).gradient_tensor(&u);
        let scale = grad.iter().flatten().flat_map(|c| c.iter()).fold(0.0_f64, |m, v| m.max(v.abs()));
        prop_assume!(scale > 1e-8);
        prop_assert!(divergence(&u).unwrap().max_abs() <= 1e-10 * scale);
        let w = curl(&u).unwrap();
        let back = curl(&biot_savart(&w).unwrap()).unwrap();
        let err = (0..3)
            .flat_map(|c| back.components[c].iter().zip(&w.components[c]).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max);
        prop_assert!(err <= 1e-10 * w.max_abs());
    }

    #[test]
    fn rescaling_composes(
        f in field(3, 4),
        l1 in 0.3..3.0_f64, l2 in 0.3..3.0_f64,
        x1 in vec3(), x2 in vec3(), t1 in -0.5..0.5_f64, t2 in -0.5..0.5_f64,
        x in vec3(), t in -0.2..0.2_f64,
    ) {
        let twice = f.rescale(l1, x1, t1).rescale(l2, x2, t2);
        let x0 = std::array::from_fn(|i| x1[i] + l1 * x2[i]);
        let once = f.rescale(l1 * l2, x0, t1 + l1 * l1 * t2);
        let (a, b) = (twice.velocity(x, t), once.velocity(x, t));
        let scale = b.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
        for i in 0..3 {
            prop_assert!((a[i] - b[i]).abs() <= 1e-10 * scale, "{a:?} {b:?}");
        }
    }

    #[test]
    fn gamma_is_monotone_in_r_sign_blind_and_scale_invariant(
        f in field(2, 4),
        lambda in 0.4..2.0_f64,
        x0 in vec3(),
        t0 in 0.0..0.3_f64,
    ) {
        let flow = AnalyticFlow::new(f.clone());
        let radii = [0.1, 0.25, 0.5, 0.8];
        let q = DiscQuadrature::new(16, 32);
        let p = flux_profile(&flow, [0.0, 0.0], &radii, &[0.0, 0.3], &[-0.1, 0.0], &q).unwrap();
        prop_assert!(p.values.chunks(radii.len()).all(|c| c.windows(2).all(|w| w[0] <= w[1])));
        let neg = flux_profile(&AnalyticFlow::new(f.scaled(-1.0)), [0.0, 0.0], &radii, &[0.0, 0.3], &[-0.1, 0.0], &q).unwrap();
        prop_assert_eq!(&p.values, &neg.values);

        let base = AnalyticFlow::new(f);
        let scaled = base.rescale(lambda, x0, t0);
        let s = flux_profile(&scaled, [0.0, 0.0], &radii, &[0.3], &[-0.1], &q).unwrap();
        let big: Vec<f64> = radii.iter().map(|r| lambda * r).collect();
        let b = flux_profile(&base, [x0[0], x0[1]], &big, &[x0[2] + 0.3 * lambda], &[t0 - 0.1 * lambda * lambda], &q).unwrap();
        for (u, v) in s.values.iter().zip(&b.values) {
            prop_assert!((u - v).abs() <= 1e-8 * v.abs().max(1e-12), "{u} {v}");
        }
    }

    #[test]
    fn cone_fit_ignores_sign_flips(
        e in direction(),
        theta in 0.2..1.0_f64,
        interior in prop::collection::vec((0.0..0.9_f64, 0.0..TAU, any::<bool>()), 0..30),
        flips in prop::collection::vec(any::<bool>(), 42),
    ) {
        let dirs = cone_cloud(e, theta, &interior);
        let flipped: Vec<[f64; 3]> = dirs
            .iter()
            .zip(flips.iter().cycle())
            .map(|(d, f)| if *f { d.map(|c| -c) } else { *d })
            .collect();
        let a = cone_deficiency(&DirectionSet::from_directions(&dirs)).unwrap();
        let b = cone_deficiency(&DirectionSet::from_directions(&flipped)).unwrap();
        prop_assert!((a.s - b.s).abs() <= 1e-9);
        prop_assert!(dot(a.axis, b.axis).abs() >= (1e-6_f64).cos());
        // delta and s are tied by |xi x e|^2 + (xi . e)^2 = 1
        prop_assert!((a.delta - (1.0 - (1.0 - a.s * a.s).sqrt())).abs() <= 1e-12);
    }

    #[test]
    fn cone_fit_is_rotation_equivariant(
        e in direction(),
        theta in 0.2..1.0_f64,
        interior in prop::collection::vec((0.0..0.9_f64, 0.0..TAU, any::<bool>()), 0..30),
        axis in direction(),
        angle in 0.0..TAU,
    ) {
        let r = rotation(axis, angle);
        let dirs = cone_cloud(e, theta, &interior);
        let turned: Vec<[f64; 3]> = dirs.iter().map(|d| apply(&r, *d)).collect();
        let a = cone_deficiency(&DirectionSet::from_directions(&dirs)).unwrap();
        let b = cone_deficiency(&DirectionSet::from_directions(&turned)).unwrap();
        prop_assert!((a.s - b.s).abs() <= 1e-3, "{} {}", a.s, b.s);
        prop_assert!(dot(apply(&r, a.axis), b.axis).abs() >= 1.0 - 1e-6);
    }

    #[test]
    fn obstruction_agrees_with_the_cone(
        dirs in prop::collection::vec(direction(), 1..40),
        tol in 0.0..0.5_f64,
    ) {
        let ds = DirectionSet::from_directions(&dirs);
        let fit = cone_deficiency(&ds).unwrap();
        let ob = great_circle_obstruction(&ds, tol).unwrap();
        prop_assert_eq!(ob.is_obstructed(), fit.s <= tol);
    }

    #[test]
    fn alignment_vanishes_exactly_on_parallel_sets(
        d in direction(),
        signs in prop::collection::vec(any::<bool>(), 1..20),
        other in direction(),
    ) {
        let mut dirs: Vec<[f64; 3]> = signs.iter().map(|s| if *s { d } else { d.map(|c| -c) }).collect();
        prop_assert_eq!(pairwise_alignment(&DirectionSet::from_directions(&dirs)), 0.0);
        prop_assume!(dot(d, other).abs() < 1.0 - 1e-9);
        dirs.push(other);
        prop_assert!(pairwise_alignment(&DirectionSet::from_directions(&dirs)) > 0.0);
    }

    #[test]
    fn flipped_flux_equals_absolute_flux_where_omega3_is_positive(z in -1.0..1.0_f64, t in 0.0..0.5_f64) {
        // w3 = 0.8 cos x + 0.6 sin y > 0 on the disc of radius 0.4 around (0, pi/2)
        let flow = AnalyticFlow::new(AnalyticField::abc(1.0, 0.8, 0.6, 1.0));
        let slice = flow.slice(t).unwrap();
        let disc = DiscSpec::new(0.4, z, t, [0.0, PI / 2.0]).unwrap();
        let q = DiscQuadrature::default();
        let a = disc_flux(&*slice, &disc, FluxIntegrand::AbsOmega3, &q);
        let b = disc_flux(&*slice, &disc, FluxIntegrand::Omega3Tilde, &q);
        prop_assert_eq!(a, b);
    }
}

/// Mirror image under `x3 -> -x3`: `(v1, v2, -v3)(x1, x2, -x3)`.
fn reflect(f: &AnalyticField) -> AnalyticField {
    let p = |v: [f64; 3]| [v[0], v[1], -v[2]];
    AnalyticField::custom(
        f.modes
            .iter()
            .map(|m| VelocityMode {
                wave: p(m.wave),
                cos: p(m.cos),
                sin: p(m.sin),
                decay: m.decay,
            })
            .collect(),
    )
}

proptest! {
    #![proptest_config(config(6))]

    #[test]
    fn scale_quantities_respect_reflection_and_domination(
        f in field(2, 3),
        c in vec3(),
        t0 in 0.0..0.3_f64,
        grow in 1.0..3.0_f64,
    ) {
        let opts = ScaleOptions::default();
        let radii = [0.3, 0.6];
        let flow = AnalyticFlow::new(f.clone());
        let mirror = AnalyticFlow::new(reflect(&f));
        let a = scale_quantities(&flow, c, t0, &radii, &opts).unwrap();
        let b = scale_quantities(&mirror, [c[0], c[1], -c[2]], t0, &radii, &opts).unwrap();
        for (p, q) in a.iter().zip(&b) {
            for (u, v) in [(p.f, q.f), (p.e, q.e), (p.a, q.a), (p.d, q.d)] {
                prop_assert!((u - v).abs() <= 1e-9 * v.abs().max(1e-12), "{u} {v}");
            }
            prop_assert!(p.f >= 0.0 && p.e >= 0.0 && p.a >= 0.0 && p.d >= 0.0);
        }
        // |grow v| >= |v| pointwise
        let big = AnalyticFlow::new(f.scaled(grow));
        let d = scale_quantities(&big, c, t0, &radii, &opts).unwrap();
        for (p, q) in a.iter().zip(&d) {
            prop_assert!(p.f <= q.f && p.a <= q.a && p.e <= q.e);
        }
        let l1 = lambda_q(&flow, 1.8, c, t0, &radii, &opts).unwrap();
        let l2 = lambda_q(&big, 1.8, c, t0, &radii, &opts).unwrap();
        prop_assert!(l1.value <= l2.value);
        let q = DiscQuadrature::new(16, 32);
        let n1 = critical_flux_norm(&flow, [c[0], c[1]], 0.5, &[0.0, 0.2], &[t0], &q).unwrap();
        let n2 = critical_flux_norm(&big, [c[0], c[1]], 0.5, &[0.0, 0.2], &[t0], &q).unwrap();
        prop_assert!(n1.value <= n2.value);
        prop_assert!(g_energy(&flow, c, t0, 0.5, &opts).unwrap() >= 2.0);
    }

    #[test]
    fn velocity_cone_check_is_invariant_about_the_axis(
        angle in 0.0..TAU,
        shift in -2.0..2.0_f64,
        delta in 0.05..0.9_f64,
        m in 0.0..0.5_f64,
    ) {
        let g = GridSpec::cube(32).unwrap();
        // axisymmetric about (pi, pi) and 2 pi periodic in z
        let profile = |x: [f64; 3]| -> [f64; 3] {
            let (a, b) = (x[0] - PI, x[1] - PI);
            let e = (-(a * a + b * b) / 0.36).exp();
            let (gr, gt, gz) = (0.3 * x[2].sin(), x[2].cos(), 1.0 + 0.5 * x[2].cos());
            [e * (a * gr - b * gt), e * (b * gr + a * gt), e * gz]
        };
        let r = rotation([0.0, 0.0, 1.0], angle);
        let back = rotation([0.0, 0.0, 1.0], -angle);
        let turned = VectorField::from_fn(g, 0.0, |x| {
            let y = apply(&back, [x[0] - PI, x[1] - PI, x[2]]);
            apply(&r, profile([y[0] + PI, y[1] + PI, y[2]]))
        });
        let moved = VectorField::from_fn(g, 0.0, |x| profile([x[0], x[1], x[2] - shift]));
        let plain = VectorField::from_fn(g, 0.0, profile);
        let axis = Axis::vertical(PI, PI);
        let grid = |z0: f64| MeridianGrid::uniform(1.0, 9, z0 - 1.0, z0 + 1.0, 9).unwrap();
        let check = |v: &VectorField, z0: f64| {
            let mf = to_cylindrical(v, &axis, &CylindricalOptions::new(grid(z0))).unwrap();
            velocity_cone_check(&mf, delta, m).unwrap()
        };
        let base = check(&plain, 0.0);
        for other in [check(&turned, 0.0), check(&moved, shift)] {
            match (base.worst, other.worst) {
                (Some(a), Some(b)) => {
                    prop_assert!((a.ratio - b.ratio).abs() <= 1e-8);
                    prop_assert!((a.speed - b.speed).abs() <= 1e-8);
                    if (a.ratio - (1.0 - delta)).abs() > 1e-6 {
                        prop_assert_eq!(base.pass, other.pass);
                    }
                }
                (None, None) => prop_assert!(other.pass),
                _ => prop_assert!(false, "speed threshold splits differently"),
            }
        }
    }
}

/// `psi = K r z + G(r) + c r^2`, `G'` a sum of smoothed bands `(a, w, height)`.
fn banded(k: f64, bands: Vec<(f64, f64, f64)>, tau: f64, c: f64) -> impl Fn(f64, f64) -> [f64; 3] {
    let lncosh = |x: f64| x.abs() + (-2.0 * x.abs()).exp().ln_1p() - std::f64::consts::LN_2;
    move |r: f64, z: f64| {
        let (mut g, mut dg) = (0.0, 0.0);
        for &(a, w, h) in &bands {
            let prim = |x: f64| 0.5 * h * tau * (lncosh((x - a) / tau) - lncosh((x - a - w) / tau));
            g += prim(r) - prim(0.0);
            dg += 0.5 * h * (((r - a) / tau).tanh() - ((r - a - w) / tau).tanh());
        }
        [k * r * z + g + c * r * r, k * z + dg + 2.0 * c * r, k * r]
    }
}

proptest! {
    #![proptest_config(config(32))]

    #[test]
    fn certificate_holds_for_admissible_stream_functions(
        k in 6e3..1e4_f64,
        band in (4e-4..8.5e-4_f64, 5e-6..3e-5_f64, 0.5..1.0_f64, any::<bool>()),
        c in -1000.0..1000.0_f64,
        rho in 0.3..0.95_f64,
        phi in -1.4..1.4_f64,
    ) {
        let (a, w, frac, neg) = band;
        let h = frac * (11.0 * k * a - 3.0).min(40.0) * if neg { -1.0 } else { 1.0 };
        let f = banded(k, vec![(a, w, h)], w / 10.0, c);
        let eps = 1.0 / 1100.0;
        let admissible = |d: [f64; 3]| d[1].abs() <= 11.0 + 11.0 * d[2].abs();
        for i in 0..=60 {
            for j in 0..=120 {
                let (r, z) = (1.2 * eps * i as f64 / 60.0, 1.2 * eps * (j as f64 / 60.0 - 1.0));
                prop_assert!(admissible(f(r, z)));
            }
        }
        let start = [rho * eps * phi.cos(), rho * eps * phi.sin()];
        let src = AnalyticStream { f, spacing: 1e-6 };
        let t = explore_level_set(&src, start, 11.0, 11.0, &ExploreOptions::default()).unwrap();
        prop_assert!(t.reached_axis);
        prop_assert!(t.psi_start_abs <= 33.0 * start[0]);
        prop_assert!(t.pass && t.inside_unit_ball);
        for s in &t.segments {
            if s.mode == nsgeom::axisym::Mode::LevelSet {
                prop_assert!(s.psi_change.abs() <= t.drift_tolerance * s.steps as f64);
            } else {
                prop_assert!(s.psi_change.abs() <= 23.0 * s.radial_travel * (1.0 + 1e-9));
            }
        }
    }

    #[test]
    fn flux_rows_survive_csv(vals in prop::collection::vec(any::<f64>().prop_filter("finite", |v| v.is_finite()), 10)) {
        let row = FluxRow {
            t: vals[0], z: vals[1], r: vals[2], gamma: vals[3], w: vals[4], b1: vals[5], b2: vals[6],
            ineq_lhs: vals[7], id_0115_3_resid: vals[8], id_0115_4_resid: vals[9],
        };
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("rows.csv");
        write_csv(&p, &[row, row]).unwrap();
        let back: Vec<FluxRow> = read_csv(&p).unwrap();
        prop_assert_eq!(back, vec![row, row]);
    }
}
