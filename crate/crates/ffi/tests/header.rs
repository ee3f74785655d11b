use std::path::{Path, PathBuf};
use std::process::Command;

fn target_dir() -> PathBuf {
    // tests run from target/<profile>/deps
    std::env::current_exe().unwrap().parent().unwrap().parent().unwrap().to_path_buf()
}

const PROGRAM: &str = r#"
#include <math.h>
#include <stdio.h>
#include "nsgeom.h"

int main(void) {
    size_t n[3] = {8, 8, 8};
    double len[3] = {6.283185307179586, 6.283185307179586, 6.283185307179586};
    double v1[512], v2[512], v3[512];
    for (size_t i = 0; i < 512; i++) {
        double x = len[0] * (double)(i % 8) / 8.0, y = len[1] * (double)((i / 8) % 8) / 8.0, z = len[2] * (double)(i / 64) / 8.0;
        v1[i] = sin(z) + cos(y);
        v2[i] = sin(x) + cos(z);
        v3[i] = sin(y) + cos(x);
    }
    NsgField *f = NULL, *w = NULL;
    if (nsg_field_new(n, len, 0.0, v1, v2, v3, &f) != NSG_STATUS_OK) return 1;
    if (nsg_field_curl(f, &w) != NSG_STATUS_OK) return 2;
    NsgCone cone;
    if (nsg_cone_fit(w, 0.5, &cone) != NSG_STATUS_OK || cone.n_samples == 0) return 3;
    if (nsg_field_read(NULL, &f) != NSG_STATUS_NULL_POINTER || nsg_last_error() == NULL) return 4;
    printf("%s %zu\n", nsg_version(), cone.n_samples);
    nsg_field_free(f);
    nsg_field_free(w);
    return 0;
}
"#;

#[test]
fn header_compiles_and_links_from_c() {
    let include = Path::new(env!("CARGO_MANIFEST_DIR")).join("include");
    assert!(include.join("nsgeom.h").exists());
    let lib = target_dir().join("libnsgeom_ffi.a");
    assert!(lib.exists(), "{} missing", lib.display());
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("main.c");
    std::fs::write(&src, PROGRAM).unwrap();
    let exe = dir.path().join("main");
    let out = Command::new("cc")
        .args(["-std=c99", "-Wall", "-Werror", "-o"])
        .arg(&exe)
        .arg(&src)
        .arg("-I")
        .arg(&include)
        .arg(&lib)
        .args(["-lm", "-lpthread", "-ldl"])
        .output()
        .expect("cc runs");
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let run = Command::new(&exe).output().unwrap();
    assert!(run.status.success(), "exit {:?}", run.status.code());
    let text = String::from_utf8(run.stdout).unwrap();
    assert!(text.starts_with(env!("CARGO_PKG_VERSION")), "{text}");
}
