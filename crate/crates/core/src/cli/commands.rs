use std::fs;
use std::path::Path;

use rand::seq::index::sample;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::json;

use super::report::{
    write_csv, AuditEntry, DecayRow, DiagnosticsReport, DirectionRow, FluxRow, ScaleRow,
};
use super::{AxisymArgs, CliError, ConeArgs, DiagnoseArgs, FluxArgs, Init, SimulateArgs, SolveArgs, TypeIArgs, ValidateArgs};
use crate::axisym::{
    explore_level_set, stream_function, swirl, to_cylindrical, velocity_cone_check, Axis, CylindricalOptions,
    ExploreOptions, MeridianGrid, Mode, StreamOptions,
};
use crate::criticality::{dyadic, local_energy_residual, type_i_scan, Bump, TypeIOptions};
use crate::fields::snapshot::{list, read_velocity, write_velocity};
use crate::fields::{curl, divergence, dot, GridSpec, SnapshotSeries, VectorField};
use crate::flux::{gamma_decay_profile, gamma_inequality_audit, AuditOptions, DecayOptions, ProbeLattice};
use crate::geometry::{
    cone_deficiency, direction_field, stretching_factor_with, ConeFit, DirectionSet, StretchMethod, StretchingOptions,
};
use crate::par;
use crate::quad::VolumeQuadrature;
use crate::solver::{self, InitialCondition, RunSummary, SolverConfig, SolverError};

/// Per-snapshot ingestion record.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SnapshotAudit {
    pub file: String,
    pub time: f64,
    pub max_speed: f64,
    /// `max |div v| / (max |v| 2 pi / L_min)`
    pub divergence_rel: f64,
}

pub struct Ingested {
    pub series: SnapshotSeries,
    pub records: Vec<SnapshotAudit>,
}

fn divergence_rel(v: &VectorField) -> Result<f64, CliError> {
    let peak = v.max_norm();
    if peak == 0.0 {
        return Ok(0.0);
    }
    let l = v.grid.len.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok(divergence(v)?.max_abs() / (peak * std::f64::consts::TAU / l))
}

/// Reads a snapshot file or every snapshot in a directory, ordered by time.
pub fn ingest(path: &Path) -> Result<Ingested, CliError> {
    let files = list(path)?;
    let mut fields = Vec::with_capacity(files.len());
    let mut records = Vec::with_capacity(files.len());
    for f in &files {
        let v = read_velocity(f)?;
        records.push(SnapshotAudit {
            file: f.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default(),
            time: v.time,
            max_speed: v.max_norm(),
            divergence_rel: divergence_rel(&v)?,
        });
        fields.push(v);
    }
    records.sort_by(|a, b| a.time.total_cmp(&b.time));
    let series = SnapshotSeries::new(fields).map_err(|e| CliError::Input(e.to_string()))?;
    Ok(Ingested { series, records })
}

fn initial(a: &SolveArgs, seed: u64) -> Result<VectorField, CliError> {
    if a.init == Init::File {
        let p = a.file.as_ref().ok_or_else(|| CliError::Config("--init file needs --file".into()))?;
        return Ok(read_velocity(p)?);
    }
    let grid = GridSpec::cube(a.n)?;
    let ic = match a.init {
        Init::Abc => InitialCondition::Abc {
            a: a.amplitude,
            b: a.amplitude,
            c: a.amplitude,
        },
        Init::Tg => InitialCondition::TaylorGreen { amplitude: a.amplitude },
        Init::Tg2d => InitialCondition::TaylorGreen2d { amplitude: a.amplitude },
        Init::Perturbed => InitialCondition::Perturbed {
            amplitude: a.amplitude,
            perturbation: a.perturbation,
            seed,
        },
        Init::File => unreachable!(),
    };
    Ok(ic.sample(grid))
}

fn solver_config(a: &SolveArgs) -> SolverConfig {
    SolverConfig {
        dt: a.dt,
        t_end: a.t_end,
        snap_every: a.snap_every,
        ..SolverConfig::default()
    }
}

fn run_audits(s: &RunSummary) -> Vec<AuditEntry> {
    vec![
        AuditEntry::flag("energy_monotone", s.audit.monotone),
        AuditEntry::at_most("energy_balance", s.audit.balance_rel_error, s.audit.balance_tolerance),
        AuditEntry::at_most("spectral_divergence", s.audit.max_divergence_rel, s.audit.divergence_tolerance),
    ]
}

pub fn simulate(a: &SimulateArgs, seed: u64) -> Result<DiagnosticsReport, CliError> {
    let init = initial(&a.solve, seed)?;
    fs::create_dir_all(&a.out).map_err(|e| CliError::Output(format!("{}: {e}", a.out.display())))?;
    let mut k = 0usize;
    let summary = solver::simulate(&init, &solver_config(&a.solve), |v| {
        let p = a.out.join(format!("snap_{k:05}.vxs"));
        k += 1;
        write_velocity(&p, &v).map_err(|e| SolverError::Sink(e.to_string()))
    })?;
    let audits = run_audits(&summary);
    let report = DiagnosticsReport::new("simulate", seed, a, json!({ "run": summary }), audits);
    report.emit(Some(&a.out.join("manifest.json")))?;
    Ok(report)
}

fn last_field(series: &SnapshotSeries) -> &VectorField {
    series.field(series.len() - 1)
}

/// Grid node of largest `|omega_3|`; first node on ties.
fn peak_omega3(omega: &VectorField) -> [f64; 3] {
    let w3 = &omega.components[2];
    let (i, _) = par::argmax(w3.len(), |i| w3[i].abs()).expect("grid is nonempty");
    omega.grid.position(i)
}

#[derive(Debug, Clone, Serialize)]
struct ConeTable {
    time: f64,
    max_vorticity: f64,
    threshold: f64,
    axis: [f64; 3],
    s: f64,
    delta: f64,
    #[serde(rename = "C")]
    c: f64,
    n_samples: usize,
    obstructed: bool,
}

fn cone_of(omega: &VectorField, fraction: f64, tol: f64) -> Result<(ConeTable, DirectionSet, ConeFit), CliError> {
    if !(fraction >= 0.0) {
        return Err(CliError::Config("--M must be nonnegative".into()));
    }
    let peak = omega.max_norm();
    let ds = direction_field(omega, fraction * peak)?;
    let fit = cone_deficiency(&ds)?;
    let t = ConeTable {
        time: omega.time,
        max_vorticity: peak,
        threshold: fraction * peak,
        axis: fit.axis,
        s: fit.s,
        delta: fit.delta,
        c: fit.constant,
        n_samples: fit.n_samples,
        obstructed: fit.s <= tol,
    };
    Ok((t, ds, fit))
}

fn cone_audits(ds: &DirectionSet, fit: &ConeFit) -> Vec<AuditEntry> {
    let xi = ds.samples[fit.worst].direction;
    let c = dot(xi, fit.axis);
    let cr = crate::fields::cross(xi, fit.axis);
    let unit = (dot(cr, cr) + c * c - 1.0).abs();
    let conv = (fit.delta - (1.0 - (1.0 - fit.s * fit.s).max(0.0).sqrt())).abs();
    vec![
        AuditEntry::at_most("cone_unit_identity", unit, 1e-12),
        AuditEntry::at_most("cone_delta_from_s", conv, 1e-15),
    ]
}

pub fn cone(a: &ConeArgs, seed: u64) -> Result<DiagnosticsReport, CliError> {
    let ing = ingest(&a.input)?;
    let omega = curl(last_field(&ing.series))?;
    let (table, ds, fit) = cone_of(&omega, a.m, a.tol)?;
    if let Some(dir) = &a.plot_dir {
        let rows: Vec<DirectionRow> = ds.samples.iter().map(|s| DirectionRow::of(s.direction)).collect();
        write_csv(&dir.join("directions.csv"), &rows)?;
    }
    let report = DiagnosticsReport::new("cone", seed, a, serde_json::to_value(&table).unwrap(), cone_audits(&ds, &fit));
    report.emit(a.report.as_deref())?;
    Ok(report)
}

fn interior_times(series: &SnapshotSeries) -> Result<Vec<f64>, CliError> {
    let t = series.times();
    if t.len() < 3 {
        return Err(CliError::Input(format!(
            "time derivatives need at least 3 snapshots, found {}",
            t.len()
        )));
    }
    Ok(t[1..t.len() - 1].to_vec())
}

fn flux_audits(rows: &[FluxRow], near_zero: &[bool]) -> Vec<AuditEntry> {
    let mut drops = 0usize;
    for w in rows.windows(2) {
        if w[0].t == w[1].t && w[0].z == w[1].z && w[1].r > w[0].r && w[1].gamma < w[0].gamma {
            drops += 1;
        }
    }
    let regular = rows.iter().zip(near_zero).filter(|(_, z)| !**z).map(|(r, _)| r);
    let (mut i3, mut i4) = (0.0_f64, 0.0_f64);
    for r in regular {
        i3 = i3.max(r.id_0115_3_resid);
        i4 = i4.max(r.id_0115_4_resid);
    }
    let skipped = near_zero.iter().filter(|z| **z).count();
    let note = format!("{skipped} probes near the zero set of omega_3 skipped");
    vec![
        AuditEntry::at_most("gamma_monotone_in_r", drops as f64, 0.0),
        AuditEntry::at_most("laplacian_identity", i3, 1e-6).with_detail(note.clone()),
        AuditEntry::at_most("nonlinear_identity", i4, 1e-6).with_detail(note),
    ]
}

pub fn flux(a: &FluxArgs, seed: u64) -> Result<DiagnosticsReport, CliError> {
    if !(a.a > 0.0) || a.scales == 0 {
        return Err(CliError::Config("need --a > 0 and --scales >= 1".into()));
    }
    let ing = ingest(&a.input)?;
    let times = interior_times(&ing.series)?;
    let center = match a.center {
        Some(c) => c,
        None => {
            let mid = ing.series.field(ing.series.len() / 2);
            peak_omega3(&curl(mid)?)
        }
    };
    let mut radii = dyadic(a.a, a.scales);
    radii.reverse();
    let lattice = ProbeLattice {
        center: [center[0], center[1]],
        radii,
        heights: vec![center[2]],
        times,
    };
    let pts = gamma_inequality_audit(&ing.series, &lattice, &AuditOptions::default())?;
    let rows: Vec<FluxRow> = pts
        .iter()
        .map(|p| FluxRow {
            t: p.t,
            z: p.z,
            r: p.r,
            gamma: p.gamma,
            w: p.w,
            b1: p.b1,
            b2: p.b2,
            ineq_lhs: p.ineq_lhs,
            id_0115_3_resid: p.id_0115_3_resid,
            id_0115_4_resid: p.id_0115_4_resid,
        })
        .collect();
    let near: Vec<bool> = pts.iter().map(|p| p.near_zero_set).collect();
    write_csv(&a.report, &rows)?;
    if let Some(dir) = &a.plot_dir {
        write_csv(&dir.join("gamma_vs_r.csv"), &rows)?;
    }
    let tables = json!({ "center": center, "lattice": lattice, "points": pts });
    let report = DiagnosticsReport::new("flux", seed, a, tables, flux_audits(&rows, &near));
    report.emit(Some(&a.report.with_extension("json")))?;
    Ok(report)
}

fn parse_centers(spec: &str, grid: GridSpec) -> Result<Vec<[f64; 3]>, CliError> {
    if let Some(k) = spec.strip_prefix("grid:") {
        let k: usize = k
            .parse()
            .ok()
            .filter(|k| *k > 0)
            .ok_or_else(|| CliError::Config(format!("bad center grid `{spec}`")))?;
        let mut out = Vec::with_capacity(k * k * k);
        for c in 0..k {
            for b in 0..k {
                for a in 0..k {
                    let f = |i: usize, ax: usize| (i as f64 + 0.5) / k as f64 * grid.len[ax];
                    out.push([f(a, 0), f(b, 1), f(c, 2)]);
                }
            }
        }
        return Ok(out);
    }
    spec.split(';')
        .map(|p| super::parse_vec3(p).map_err(CliError::Config))
        .collect()
}

/// Largest radius whose cylinder the data covers.
fn covered_radius(series: &SnapshotSeries, t0: f64) -> f64 {
    let t = series.times();
    (t0 - t[0]).max(0.0).sqrt().min(series.grid().safe_radius()).min(1.0)
}

fn scale_rows(centers: &[[f64; 3]], rep: &crate::criticality::TypeIReport) -> Vec<ScaleRow> {
    let per = rep.radii.len();
    rep.rows
        .iter()
        .enumerate()
        .map(|(i, q)| ScaleRow {
            center: i / per,
            x: centers[i / per][0],
            y: centers[i / per][1],
            z: centers[i / per][2],
            r: q.radius,
            f: q.f,
            e: q.e,
            a: q.a,
            d: q.d,
        })
        .collect()
}

fn type_i_audits(rep: &crate::criticality::TypeIReport) -> Vec<AuditEntry> {
    let bad = rep
        .rows
        .iter()
        .filter(|q| ![q.f, q.e, q.a, q.d].iter().all(|v| v.is_finite() && *v >= 0.0))
        .count();
    let lq = rep.lambda_q.iter().filter(|l| !(l.value.is_finite() && l.value >= 0.0)).count();
    vec![
        AuditEntry::at_most("scale_quantities_finite_nonnegative", bad as f64, 0.0),
        AuditEntry::at_most("lambda_q_finite", lq as f64, 0.0),
    ]
}

pub fn type_i(a: &TypeIArgs, seed: u64) -> Result<DiagnosticsReport, CliError> {
    let ing = ingest(&a.input)?;
    let series = &ing.series;
    let t0 = a.t0.unwrap_or(*series.times().last().unwrap());
    let r_max = a.r_max.unwrap_or_else(|| covered_radius(series, t0));
    if !(r_max > 0.0) || a.scales == 0 {
        return Err(CliError::Config("need a positive radius (more than one snapshot) and --scales >= 1".into()));
    }
    let centers = parse_centers(&a.centers, series.grid())?;
    let opts = TypeIOptions {
        q: a.q,
        ..TypeIOptions::default()
    };
    let rep = type_i_scan(series, &centers, t0, &dyadic(r_max, a.scales), &opts)?;
    if let Some(dir) = &a.plot_dir {
        write_csv(&dir.join("scales.csv"), &scale_rows(&centers, &rep))?;
    }
    let audits = type_i_audits(&rep);
    let tables = json!({ "centers": centers, "type_i": rep });
    let report = DiagnosticsReport::new("typeI", seed, a, tables, audits);
    report.emit(a.report.as_deref())?;
    Ok(report)
}

pub fn axisym(a: &AxisymArgs, seed: u64) -> Result<DiagnosticsReport, CliError> {
    let ing = ingest(&a.input)?;
    let v = last_field(&ing.series);
    let origin = a.origin.unwrap_or([0.5 * v.grid.len[0], 0.5 * v.grid.len[1], 0.5 * v.grid.len[2]]);
    let axis = Axis {
        point: origin,
        direction: [0.0, 0.0, 1.0],
    };
    let grid = MeridianGrid::uniform(a.r_max, a.nr, -a.z_half, a.z_half, a.nz)?;
    let opts = CylindricalOptions {
        tolerance: a.tolerance,
        ..CylindricalOptions::new(grid)
    };
    let m = to_cylindrical(v, &axis, &opts)?;
    let sw = swirl(&m);
    let swirl_max = sw.values.iter().fold(0.0_f64, |s, x| s.max(x.abs()));
    let sf = stream_function(&m, &StreamOptions::default())?;
    let check = velocity_cone_check(&m, a.delta, a.m)?;
    let needed_c1 = sf.slope_bound(a.c2)?;
    let trace = explore_level_set(&sf, a.start, a.c1, a.c2, &ExploreOptions::default())?;

    let mut fidelity: f64 = 0.0;
    let mut radial: f64 = 0.0;
    for s in &trace.segments {
        match s.mode {
            Mode::LevelSet => fidelity = fidelity.max(s.psi_change.abs() - trace.drift_tolerance * s.steps as f64),
            Mode::Radial => radial = radial.max(s.psi_change.abs() - (2.0 * a.c1 + 1.0) * s.radial_travel),
        }
    }
    let audits = vec![
        AuditEntry::at_most("angular_deviation", m.deviation, a.tolerance),
        AuditEntry::at_most("stream_compatibility", sf.residual, StreamOptions::default().tolerance),
        AuditEntry::flag("trace_reached_axis", trace.reached_axis),
        AuditEntry::flag("trace_inside_unit_ball", trace.inside_unit_ball),
        AuditEntry::at_most("level_set_fidelity_excess", fidelity, 0.0),
        AuditEntry::at_most("radial_variation_excess", radial, 1e-15),
        AuditEntry::at_most("certificate", trace.psi_start_abs, trace.bound),
        AuditEntry::at_most("slope_bound_c1", needed_c1, a.c1).with_detail(format!("C2 = {}", a.c2)),
    ];
    let tables = json!({
        "time": v.time,
        "axis": axis,
        "deviation": m.deviation,
        "swirl_max": swirl_max,
        "stream_residual": sf.residual,
        "required_c1": needed_c1,
        "cone_check": check,
        "trace": trace,
    });
    let report = DiagnosticsReport::new("axisym", seed, a, tables, audits);
    report.emit(a.report.as_deref())?;
    Ok(report)
}

pub fn validate(a: &ValidateArgs, seed: u64) -> Result<DiagnosticsReport, CliError> {
    let ing = ingest(&a.input)?;
    let worst = ing.records.iter().map(|r| r.divergence_rel).fold(0.0, f64::max);
    let audits = vec![AuditEntry::at_most("divergence", worst, a.div_tol)];
    let tables = json!({ "grid": ing.series.grid(), "snapshots": ing.records });
    let report = DiagnosticsReport::new("validate", seed, a, tables, audits);
    report.emit(a.report.as_deref())?;
    Ok(report)
}

#[derive(Debug, Clone, Serialize)]
struct StretchProbe {
    node: usize,
    position: [f64; 3],
    stretching: crate::geometry::Stretching,
}

pub fn diagnose(a: &DiagnoseArgs, seed: u64) -> Result<DiagnosticsReport, CliError> {
    let mut audits = Vec::new();
    let mut run = None;
    let (series, records) = match &a.input {
        Some(p) => {
            let ing = ingest(p)?;
            (ing.series, ing.records)
        }
        None => {
            let init = initial(&a.solve, seed)?;
            let mut fields = Vec::new();
            let summary = solver::simulate(&init, &solver_config(&a.solve), |v| {
                fields.push(v);
                Ok(())
            })?;
            audits.extend(run_audits(&summary));
            run = Some(summary);
            let mut records = Vec::new();
            for v in &fields {
                records.push(SnapshotAudit {
                    file: String::new(),
                    time: v.time,
                    max_speed: v.max_norm(),
                    divergence_rel: divergence_rel(v)?,
                });
            }
            (SnapshotSeries::new(fields)?, records)
        }
    };
    if series.len() < 2 {
        return Err(CliError::Input("diagnose needs at least two snapshots".into()));
    }
    let worst_div = records.iter().map(|r| r.divergence_rel).fold(0.0, f64::max);
    audits.push(AuditEntry::at_most("snapshot_divergence", worst_div, 1e-8));

    let last = last_field(&series);
    let omega = curl(last)?;
    let (cone_table, ds, fit) = cone_of(&omega, a.m, 1e-2)?;
    audits.extend(cone_audits(&ds, &fit));

    // seeded stretching probes among the thresholded nodes
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let strong: Vec<usize> = (0..omega.grid.len())
        .filter(|&i| {
            let w = omega.at(i);
            dot(w, w).sqrt() > cone_table.threshold
        })
        .collect();
    let picks = sample(&mut rng, strong.len(), a.probes.min(strong.len())).into_vec();
    let mut probes = Vec::new();
    for k in picks {
        let node = strong[k];
        let x = omega.grid.position(node);
        let opts = StretchingOptions {
            method: StretchMethod::Spectral,
            ..StretchingOptions::default()
        };
        let s = stretching_factor_with(&omega, x, 4.0 * omega.grid.min_spacing(), &opts)?;
        probes.push(StretchProbe {
            node,
            position: x,
            stretching: s,
        });
    }

    let times = series.times();
    let t0 = *times.last().unwrap();
    let x0 = peak_omega3(&omega);
    let r0 = covered_radius(&series, t0).min(0.5 * series.grid().safe_radius());
    let decay = gamma_decay_profile(&series, x0, t0, r0, a.scales.max(1), &DecayOptions::default())?;
    let type_i = type_i_scan(&series, &[x0], t0, &dyadic(r0, a.scales.max(1)), &TypeIOptions::default())?;
    audits.extend(type_i_audits(&type_i));

    let bump = Bump::new(x0, r0, t0, t0 - times[0]);
    let le = local_energy_residual(&series, &bump, &VolumeQuadrature::default())?;
    let le_rel = le.residual.abs() / (le.kinetic + le.dissipation).max(f64::MIN_POSITIVE);
    audits.push(AuditEntry::at_most("local_energy_balance", le_rel, 1e-2));

    if let Some(dir) = &a.plot_dir {
        let rows: Vec<DirectionRow> = ds.samples.iter().map(|s| DirectionRow::of(s.direction)).collect();
        write_csv(&dir.join("directions.csv"), &rows)?;
        let rows: Vec<DecayRow> = decay
            .radii
            .iter()
            .zip(&decay.sup_gamma)
            .enumerate()
            .map(|(level, (r, g))| DecayRow {
                level,
                r: *r,
                sup_gamma: *g,
            })
            .collect();
        write_csv(&dir.join("gamma_decay.csv"), &rows)?;
        write_csv(&dir.join("scales.csv"), &scale_rows(&[x0], &type_i))?;
    }
    let tables = json!({
        "grid": series.grid(),
        "snapshots": records,
        "run": run,
        "cone": cone_table,
        "stretching": probes,
        "gamma_decay": { "profile": decay, "slopes": decay.slopes() },
        "type_i": type_i,
        "local_energy": { "bump": bump, "terms": le, "relative": le_rel },
    });
    let report = DiagnosticsReport::new("diagnose", seed, a, tables, audits);
    report.emit(a.report.as_deref())?;
    Ok(report)
}
