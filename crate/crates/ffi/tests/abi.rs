use std::ffi::{CStr, CString};
use std::ptr;

use nsgeom::fields::snapshot::write_velocity;
use nsgeom::fields::{AnalyticField, GridSpec};
use nsgeom_ffi::*;

fn last_error() -> String {
    let p = nsg_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn abc_field(n: usize) -> *mut NsgField {
    let g = GridSpec::cube(n).unwrap();
    let v = AnalyticField::abc(1.0, 1.0, 1.0, 1.0).sample(g, 0.0);
    let mut h = ptr::null_mut();
    let st = unsafe {
        nsg_field_new(
            g.n.as_ptr(),
            g.len.as_ptr(),
            0.0,
            v.components[0].as_ptr(),
            v.components[1].as_ptr(),
            v.components[2].as_ptr(),
            &mut h,
        )
    };
    assert_eq!(st, NsgStatus::Ok);
    h
}

#[test]
fn version_is_the_crate_version() {
    let v = unsafe { CStr::from_ptr(nsg_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn field_round_trip_and_shape() {
    let h = abc_field(8);
    let mut n = [0usize; 3];
    let mut len = [0.0; 3];
    let mut t = -1.0;
    assert_eq!(unsafe { nsg_field_shape(h, n.as_mut_ptr(), len.as_mut_ptr(), &mut t) }, NsgStatus::Ok);
    assert_eq!(n, [8, 8, 8]);
    assert_eq!(t, 0.0);
    let mut buf = vec![0.0; 512];
    assert_eq!(unsafe { nsg_field_component(h, 2, buf.as_mut_ptr(), buf.len()) }, NsgStatus::Ok);
    // v3 = sin(x) + cos(y) at the origin node
    assert!((buf[0] - 1.0).abs() < 1e-15);
    assert_eq!(unsafe { nsg_field_component(h, 2, buf.as_mut_ptr(), 10) }, NsgStatus::InvalidArgument);
    assert!(last_error().contains("need 512"));
    assert_eq!(unsafe { nsg_field_component(h, 3, buf.as_mut_ptr(), buf.len()) }, NsgStatus::InvalidArgument);

    let dir = tempfile::tempdir().unwrap();
    let path = CString::new(dir.path().join("f.vxs").to_str().unwrap()).unwrap();
    assert_eq!(unsafe { nsg_field_write(h, path.as_ptr()) }, NsgStatus::Ok);
    let mut back = ptr::null_mut();
    assert_eq!(unsafe { nsg_field_read(path.as_ptr(), &mut back) }, NsgStatus::Ok);
    let mut again = vec![0.0; 512];
    unsafe { nsg_field_component(back, 2, again.as_mut_ptr(), 512) };
    assert_eq!(buf, again);
    unsafe {
        nsg_field_free(h);
        nsg_field_free(back);
        nsg_field_free(ptr::null_mut());
    }
}

#[test]
fn errors_map_to_status_codes() {
    let mut h = ptr::null_mut();
    assert_eq!(unsafe { nsg_field_read(ptr::null(), &mut h) }, NsgStatus::NullPointer);
    let missing = CString::new("/nonexistent/x.vxs").unwrap();
    assert_eq!(unsafe { nsg_field_read(missing.as_ptr(), &mut h) }, NsgStatus::Io);
    assert!(h.is_null());

    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("junk.vxs");
    std::fs::write(&p, b"not a snapshot at all").unwrap();
    let junk = CString::new(p.to_str().unwrap()).unwrap();
    assert_eq!(unsafe { nsg_field_read(junk.as_ptr(), &mut h) }, NsgStatus::Format);
    assert!(last_error().contains("bad magic"));

    let n = [6usize, 5, 6];
    let len = [1.0; 3];
    let v = [0.0; 180];
    let st = unsafe { nsg_field_new(n.as_ptr(), len.as_ptr(), 0.0, v.as_ptr(), v.as_ptr(), v.as_ptr(), &mut h) };
    assert_eq!(st, NsgStatus::InvalidArgument);

    // success clears the message
    let f = abc_field(8);
    assert!(nsg_last_error().is_null());
    unsafe { nsg_field_free(f) };
}

#[test]
fn cone_stretching_and_flux_match_the_library() {
    let v = abc_field(32);
    let mut w = ptr::null_mut();
    assert_eq!(unsafe { nsg_field_curl(v, &mut w) }, NsgStatus::Ok);

    let mut cone = NsgCone::default();
    assert_eq!(unsafe { nsg_cone_fit(w, 0.5, &mut cone) }, NsgStatus::Ok);
    assert!(cone.n_samples > 0);
    assert!((cone.axis.iter().map(|a| a * a).sum::<f64>() - 1.0).abs() < 1e-12);
    assert_eq!(unsafe { nsg_cone_fit(w, -1.0, &mut cone) }, NsgStatus::InvalidArgument);

    let x = [0.3, 0.8, 1.9];
    let mut s = NsgStretching::default();
    let h = 2.0 * std::f64::consts::PI / 32.0;
    assert_eq!(unsafe { nsg_stretching(w, x.as_ptr(), 4.0 * h, NsgStretchMethod::Spectral, &mut s) }, NsgStatus::Ok);
    assert!((s.pv - s.direct).abs() < 0.1 * s.direct.abs());
    assert_eq!(unsafe { nsg_stretching(w, x.as_ptr(), 0.5 * h, NsgStretchMethod::Spectral, &mut s) }, NsgStatus::InvalidArgument);

    // ABC with unit amplitudes: omega_3 = v_3 = sin x + cos y
    let c = [std::f64::consts::PI, std::f64::consts::PI];
    let mut flux = 0.0;
    assert_eq!(unsafe { nsg_disc_flux(w, c.as_ptr(), 0.0, 0.5, NsgFluxIntegrand::Omega3Tilde, &mut flux) }, NsgStatus::Ok);
    let mut abs = 0.0;
    unsafe { nsg_disc_flux(w, c.as_ptr(), 0.0, 0.5, NsgFluxIntegrand::AbsOmega3, &mut abs) };
    assert!((flux - abs).abs() < 1e-12 * abs.max(1.0));
    // midpoint rule in polar coordinates
    let oracle = {
        let m = 400;
        let mut acc = 0.0;
        for i in 0..m {
            let rr = 0.5 * (i as f64 + 0.5) / m as f64;
            for j in 0..m {
                let th = std::f64::consts::TAU * (j as f64 + 0.5) / m as f64;
                let (xx, yy) = (c[0] + rr * th.cos(), c[1] + rr * th.sin());
                acc += (xx.sin() + yy.cos()).abs() * rr;
            }
        }
        acc * 0.5 / m as f64 * std::f64::consts::TAU / m as f64
    };
    assert!((abs - oracle).abs() < 1e-5 * oracle, "{abs} {oracle}");
    unsafe {
        nsg_field_free(v);
        nsg_field_free(w);
    }
}

#[test]
fn series_info_and_decay() {
    let dir = tempfile::tempdir().unwrap();
    let g = GridSpec::cube(16).unwrap();
    let tg = AnalyticField::taylor_green(1.0);
    for k in 0..5 {
        let t = 0.01 * k as f64;
        write_velocity(&dir.path().join(format!("s{k}.vxs")), &tg.sample(g, t)).unwrap();
    }
    let p = CString::new(dir.path().to_str().unwrap()).unwrap();
    let mut s = ptr::null_mut();
    assert_eq!(unsafe { nsg_series_load(p.as_ptr(), &mut s) }, NsgStatus::Ok);
    let (mut n, mut a, mut b) = (0usize, 0.0, 0.0);
    assert_eq!(unsafe { nsg_series_info(s, &mut n, &mut a, &mut b) }, NsgStatus::Ok);
    assert_eq!((n, a, b), (5, 0.0, 0.04));
    let x0 = [1.0, 2.0, 0.5];
    let mut out = [0.0; 3];
    assert_eq!(unsafe { nsg_gamma_decay(s, x0.as_ptr(), 0.04, 0.2, 3, out.as_mut_ptr()) }, NsgStatus::Ok);
    assert!(out[0] >= out[1] && out[1] >= out[2] && out[2] > 0.0, "{out:?}");
    unsafe { nsg_series_free(s) };

    let empty = tempfile::tempdir().unwrap();
    let p = CString::new(empty.path().to_str().unwrap()).unwrap();
    assert_eq!(unsafe { nsg_series_load(p.as_ptr(), &mut s) }, NsgStatus::Format);
}
