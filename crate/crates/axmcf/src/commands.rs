//! Experiment drivers. Each config kind maps to one function that runs the
//! numerics and writes its artifacts into the output directory, finishing
//! with a `report.json` that echoes the resolved configuration.
//!
//! Outputs are a pure function of config and seed: reports carry no clocks
//! or host names, and JSON maps are sorted, so reruns are bit-identical.

use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use axmcf_core::analysis::{self, EocRow};
use axmcf_core::curve::{sample_initial, DiscreteCurve, InitialData, SphereSolution};
use axmcf_core::grid::{sbp_defect, sobolev_slacks, GridFunction};
use axmcf_core::shrinker::{bisect_profile, find_profile, scan_brackets, shrinker_residual};
use axmcf_core::stepper::{self, DtMode, RunTrace, Termination};
use axmcf_core::Vec2;

use crate::config::{ExperimentConfig, ExperimentKind, InitialSpec};
use crate::io;
use crate::AppError;

pub fn execute(cfg: &ExperimentConfig) -> Result<(), AppError> {
    std::fs::create_dir_all(&cfg.output_dir).map_err(|e| AppError::io(e, &cfg.output_dir))?;
    match cfg.kind {
        ExperimentKind::Run => run_cmd(cfg),
        ExperimentKind::EocSweep => eoc_sweep_cmd(cfg),
        ExperimentKind::ConsistencySweep => consistency_sweep_cmd(cfg),
        ExperimentKind::ShrinkerSearch => shrinker_search_cmd(cfg),
        ExperimentKind::Diagnostics => diagnostics_cmd(cfg),
    }
}

fn numerical(e: impl std::fmt::Display) -> AppError {
    AppError::Numerical(e.to_string())
}

/// Maps `f` over `items` on a bounded worker pool, keeping result order.
/// `threads == 0` means available parallelism.
pub fn pool_map<I, T, F>(items: &[I], threads: usize, f: F) -> Vec<T>
where
    I: Sync,
    T: Send,
    F: Fn(&I) -> T + Sync,
{
    let n = items.len();
    if n == 0 {
        return Vec::new();
    }
    let workers = match threads {
        0 => std::thread::available_parallelism().map(|p| p.get()).unwrap_or(1),
        t => t,
    }
    .min(n);
    let next = AtomicUsize::new(0);
    let slots: Vec<Mutex<Option<T>>> = (0..n).map(|_| Mutex::new(None)).collect();
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= n {
                    break;
                }
                let out = f(&items[i]);
                *slots[i].lock().expect("worker result slot poisoned") = Some(out);
            });
        }
    });
    slots
        .into_iter()
        .map(|m| m.into_inner().expect("worker result slot poisoned").expect("worker wrote its slot"))
        .collect()
}

// ---- report plumbing -----------------------------------------------------------

fn dt_mode_json(mode: DtMode) -> Value {
    match mode {
        DtMode::ProportionalH => json!("h"),
        DtMode::QuadraticH => json!("h2"),
        DtMode::Fixed(dt) => json!({ "fixed": dt }),
    }
}

fn config_json(cfg: &ExperimentConfig) -> Value {
    let snapshots = match &cfg.snapshots {
        stepper::SnapshotSchedule::None => json!("none"),
        stepper::SnapshotSchedule::EveryK(k) => json!({ "every": k }),
        stepper::SnapshotSchedule::AtTimes(ts) => json!({ "at": ts }),
    };
    let mut out = json!({
        "kind": cfg.kind.name(),
        "output_dir": cfg.output_dir.display().to_string(),
        "seed": cfg.seed,
        "scheme": {
            "segments": cfg.scheme.segments,
            "dt_mode": dt_mode_json(cfg.scheme.dt_mode),
            "dt": cfg.scheme.dt(),
            "final_time": cfg.scheme.final_time,
            "max_steps": cfg.scheme.max_steps,
            "eps_axis": cfg.scheme.eps_axis,
            "eps_len": cfg.scheme.eps_len,
        },
    });
    let extra = match cfg.kind {
        ExperimentKind::Run => json!({
            "initial": cfg.initial.describe(),
            "snapshots": snapshots,
            "intersections_every": cfg.intersections_every,
        }),
        ExperimentKind::EocSweep | ExperimentKind::ConsistencySweep => json!({
            "segment_list": cfg.sweep.segment_list,
            "radius": cfg.sweep.radius,
            "threads": cfg.sweep.threads,
        }),
        ExperimentKind::ShrinkerSearch => json!({
            "intersections": cfg.search.intersections,
            "bracket": [cfg.search.bracket.0, cfg.search.bracket.1],
            "ds": cfg.search.ds,
            "segments": cfg.search.segments,
            "scan": cfg.search.scan.map(|(lo, hi, n)| json!([lo, hi, n])),
        }),
        ExperimentKind::Diagnostics => json!({
            "cases": cfg.diagnostics.cases,
            "max_segments": cfg.diagnostics.max_segments,
        }),
    };
    let obj = out.as_object_mut().expect("config echo is an object");
    for (k, v) in extra.as_object().expect("extras are an object") {
        obj.insert(k.clone(), v.clone());
    }
    out
}

fn termination_json(t: &Termination) -> Value {
    match t {
        Termination::ReachedFinalTime => json!({ "reason": "reached_final_time" }),
        Termination::ReachedMaxSteps => json!({ "reason": "reached_max_steps" }),
        Termination::StepFailed { step, error } => {
            json!({ "reason": "step_failed", "step": step, "error": error.to_string() })
        }
    }
}

fn write_report(dir: &Path, mut report: Value, cfg: &ExperimentConfig) -> Result<(), AppError> {
    let obj = report.as_object_mut().expect("report is an object");
    obj.insert("config".into(), config_json(cfg));
    let mut text = serde_json::to_string_pretty(&report).expect("report serializes");
    text.push('\n');
    io::write_atomic(&dir.join("report.json"), &text)
}

// ---- run -----------------------------------------------------------------------

fn resolve_initial(cfg: &ExperimentConfig) -> Result<(DiscreteCurve, Option<SphereSolution>), AppError> {
    match &cfg.initial {
        InitialSpec::Family(data) => {
            let curve = sample_initial(data, cfg.scheme.segments).map_err(numerical)?;
            let oracle = match data {
                InitialData::Sphere { radius } => Some(SphereSolution::new(*radius).map_err(numerical)?),
                _ => None,
            };
            Ok((curve, oracle))
        }
        InitialSpec::Csv(path) => {
            let nodes = io::read_curve_csv(path)?;
            if nodes.len() != cfg.scheme.segments + 1 {
                return Err(AppError::Validation(vec![format!(
                    "{} holds {} nodes but segments = {} needs {}; set segments to {}",
                    path.display(),
                    nodes.len(),
                    cfg.scheme.segments,
                    cfg.scheme.segments + 1,
                    nodes.len() - 1
                )]));
            }
            let curve = DiscreteCurve::new(GridFunction::new(nodes), 0.0)
                .map_err(|e| AppError::Validation(vec![format!("{}: {e}", path.display())]))?;
            Ok((curve, None))
        }
        InitialSpec::Shrinker { intersections, bracket, ds } => {
            let profile = find_profile(*intersections, *bracket, *ds, cfg.scheme.segments)
                .map_err(numerical)?;
            Ok((profile.curve, None))
        }
    }
}

fn check_trace_finite(trace: &RunTrace) -> Result<(), AppError> {
    let finite = trace.times.iter().chain(&trace.areas).chain(&trace.min_radii).all(|v| v.is_finite());
    let errs_finite = trace
        .errors
        .as_ref()
        .map_or(true, |e| e.iter().all(|(a, b)| a.is_finite() && b.is_finite()));
    let increasing = trace.times.windows(2).all(|w| w[1] > w[0]);
    if !finite || !errs_finite {
        return Err(AppError::Numerical("recorded series contains non-finite values".into()));
    }
    if !increasing {
        return Err(AppError::Numerical("recorded series times are not strictly increasing".into()));
    }
    Ok(())
}

fn run_cmd(cfg: &ExperimentConfig) -> Result<(), AppError> {
    let dir = &cfg.output_dir;
    let (initial, oracle) = resolve_initial(cfg)?;
    let every = (cfg.intersections_every > 0).then_some(cfg.intersections_every);
    let trace = stepper::run(initial, &cfg.scheme, &cfg.snapshots, every, oracle.as_ref());
    check_trace_finite(&trace)?;

    let mut snapshot_meta = Vec::new();
    for (i, curve) in trace.snapshots.iter().enumerate() {
        let name = format!("snapshot_{i:04}.csv");
        io::write_curve_csv(&dir.join(&name), curve)?;
        snapshot_meta.push((curve.time(), name));
    }
    io::write_curve_csv(&dir.join("final.csv"), &trace.final_curve)?;
    io::write_atomic(&dir.join("series.csv"), &io::series_csv(&trace))?;
    io::write_atomic(&dir.join("plot_area.gp"), &io::area_plot_script("series.csv"))?;
    if !snapshot_meta.is_empty() {
        let entries: Vec<(String, String)> = snapshot_meta
            .iter()
            .map(|(t, name)| (format!("t={t:.6}"), name.clone()))
            .collect();
        io::write_atomic(&dir.join("plot_curves.gp"), &io::curves_plot_script(&entries))?;
    }

    let final_curve = &trace.final_curve;
    let report = json!({
        "termination": termination_json(&trace.termination),
        "steps": trace.steps,
        "series_rows": trace.times.len(),
        "final": {
            "time": final_curve.time(),
            "area": final_curve.surface_area(),
            "min_radius": final_curve.min_radius(),
        },
        "snapshots": snapshot_meta
            .iter()
            .map(|(t, name)| json!({ "time": t, "file": name }))
            .collect::<Vec<_>>(),
        "files": ["series.csv", "final.csv", "report.json"],
    });
    write_report(dir, report, cfg)?;

    match &trace.termination {
        Termination::StepFailed { step, error } => {
            Err(AppError::Numerical(format!("run stopped at step {step}: {error}")))
        }
        _ => Ok(()),
    }
}

// ---- convergence sweeps ----------------------------------------------------------

fn eoc_sweep_cmd(cfg: &ExperimentConfig) -> Result<(), AppError> {
    let dir = &cfg.output_dir;
    let list = &cfg.sweep.segment_list;
    let results = pool_map(list, cfg.sweep.threads, |&jn| {
        let mut params = cfg.scheme.clone();
        params.segments = jn;
        params
            .validate()
            .map_err(|e| e.to_string())
            .and_then(|_| {
                analysis::error_series(cfg.sweep.radius, &params)
                    .map(|(_, summary)| summary)
                    .map_err(|e| e.to_string())
            })
    });

    let mut rows: Vec<EocRow> = Vec::new();
    let mut members = Vec::new();
    let mut failures = 0usize;
    for (i, (&jn, result)) in list.iter().zip(&results).enumerate() {
        match result {
            Ok(summary) => {
                let prev = (i > 0 && results[i - 1].is_ok()).then(|| rows.last().expect("previous row kept"));
                let eoc = |cur: f64, prev_val: Option<f64>| {
                    prev_val.map(|p| (p / cur).log2())
                };
                let row = EocRow {
                    segments: jn,
                    err_l2: summary.max_err_l2,
                    eoc_l2: eoc(summary.max_err_l2, prev.map(|r| r.err_l2)),
                    err_h1: summary.max_err_h1,
                    eoc_h1: eoc(summary.max_err_h1, prev.map(|r| r.err_h1)),
                    summed_h2_dquot: summary.summed_h2_dquot,
                };
                members.push(json!({
                    "segments": jn,
                    "err_0h": row.err_l2,
                    "eoc_0h": row.eoc_l2,
                    "err_1h": row.err_h1,
                    "eoc_1h": row.eoc_h1,
                    "err_max": summary.max_err_max,
                    "summed_h2_dquot": row.summed_h2_dquot,
                }));
                rows.push(row);
            }
            Err(e) => {
                failures += 1;
                members.push(json!({ "segments": jn, "error": e }));
            }
        }
    }

    io::write_atomic(&dir.join("eoc.csv"), &io::eoc_csv(&rows))?;

    // Log-log slope of the summed second-order quantity against h.
    let fitted: Vec<&EocRow> = rows.iter().filter(|r| r.summed_h2_dquot > 0.0).collect();
    let summed_slope = if fitted.len() >= 2 {
        let xs: Vec<f64> = fitted.iter().map(|r| (1.0 / r.segments as f64).ln()).collect();
        let ys: Vec<f64> = fitted.iter().map(|r| r.summed_h2_dquot.ln()).collect();
        analysis::fit_line(&xs, &ys).ok().map(|(slope, _)| slope)
    } else {
        None
    };

    let report = json!({
        "members": members,
        "failures": failures,
        "summed_bound_slope": summed_slope,
        "files": ["eoc.csv", "report.json"],
    });
    write_report(dir, report, cfg)?;

    if failures > 0 {
        return Err(AppError::Numerical(format!("{failures} sweep member(s) failed; see report.json")));
    }
    Ok(())
}

fn consistency_sweep_cmd(cfg: &ExperimentConfig) -> Result<(), AppError> {
    let dir = &cfg.output_dir;
    let list = &cfg.sweep.segment_list;
    let results = pool_map(list, cfg.sweep.threads, |&jn| {
        let h = 1.0 / jn as f64;
        let dt = cfg.scheme.dt_mode.dt(h);
        // Last step before the final time, away from extinction.
        let steps = (cfg.scheme.final_time / dt).round().max(1.0);
        let t = (steps - 1.0) * dt;
        analysis::consistency_residuals(jn, dt, t, cfg.sweep.radius)
            .map(|(interior_max, boundary_sum)| analysis::ConsistencyRow {
                segments: jn,
                h,
                dt,
                time: t,
                interior_max,
                boundary_sum,
            })
            .map_err(|e| e.to_string())
    });

    let mut rows = Vec::new();
    let mut members = Vec::new();
    let mut failures = 0usize;
    for (&jn, result) in list.iter().zip(&results) {
        match result {
            Ok(row) => {
                members.push(json!({
                    "segments": jn,
                    "interior_max": row.interior_max,
                    "boundary_sum": row.boundary_sum,
                }));
                rows.push(*row);
            }
            Err(e) => {
                failures += 1;
                members.push(json!({ "segments": jn, "error": e }));
            }
        }
    }
    io::write_atomic(&dir.join("consistency.csv"), &io::consistency_csv(&rows))?;

    let slopes = if rows.len() >= 2 {
        let xs: Vec<f64> = rows.iter().map(|r| r.h.ln()).collect();
        let interior: Vec<f64> = rows.iter().map(|r| r.interior_max.ln()).collect();
        let boundary: Vec<f64> = rows.iter().map(|r| r.boundary_sum.ln()).collect();
        let i = analysis::fit_line(&xs, &interior).ok().map(|(s, _)| s);
        let b = analysis::fit_line(&xs, &boundary).ok().map(|(s, _)| s);
        json!({ "interior": i, "boundary": b })
    } else {
        json!(null)
    };

    let report = json!({
        "members": members,
        "failures": failures,
        "slopes": slopes,
        "files": ["consistency.csv", "report.json"],
    });
    write_report(dir, report, cfg)?;

    if failures > 0 {
        return Err(AppError::Numerical(format!("{failures} sweep member(s) failed; see report.json")));
    }
    Ok(())
}

// ---- shrinker search ---------------------------------------------------------------

fn polyline_length(curve: &DiscreteCurve) -> f64 {
    let g = curve.positions();
    let h = g.spacing();
    (1..=curve.segments()).map(|j| g.backward_diff(j).norm() * h).sum()
}

fn shrinker_search_cmd(cfg: &ExperimentConfig) -> Result<(), AppError> {
    let dir = &cfg.output_dir;
    let spec = &cfg.search;

    let scan = spec.scan.map(|(lo, hi, samples)| {
        let brackets = scan_brackets((lo, hi), samples, spec.ds);
        json!(brackets.iter().map(|(a, b)| json!([a, b])).collect::<Vec<_>>())
    });

    let profile = match find_profile(spec.intersections, spec.bracket, spec.ds, spec.segments) {
        Ok(p) => p,
        Err(e) => {
            let report = json!({
                "scan_brackets": scan,
                "error": e.to_string(),
                "files": ["report.json"],
            });
            write_report(dir, report, cfg)?;
            return Err(numerical(e));
        }
    };

    io::write_curve_csv(&dir.join("profile.csv"), &profile.curve)?;
    let entries = vec![("shrinker profile".to_string(), "profile.csv".to_string())];
    io::write_atomic(&dir.join("plot_profile.gp"), &io::curves_plot_script(&entries))?;

    let residual = shrinker_residual(&profile.curve);
    // The round sphere at the same resolution calibrates the residual scale.
    let sphere_baseline = bisect_profile((1.9, 2.1), spec.ds, spec.segments)
        .map(|p| shrinker_residual(&p.curve))
        .ok();

    let report = json!({
        "scan_brackets": scan,
        "start_height": profile.start_height,
        "end_height": profile.end_height,
        "closure_defect": profile.closure_defect,
        "intersections": profile.intersections,
        "bisection_steps": profile.bisection_steps,
        "polyline_length": polyline_length(&profile.curve),
        "residual": residual,
        "sphere_baseline_residual": sphere_baseline,
        "residual_over_baseline": sphere_baseline.map(|b| residual / b),
        "files": ["profile.csv", "plot_profile.gp", "report.json"],
    });
    write_report(dir, report, cfg)
}

// ---- diagnostics ----------------------------------------------------------------------

/// Random grid function in the magnitude class of discrete curve data:
/// values and difference quotients both O(1). Nodal white noise would put
/// O(1/h) quotients into the identities and drown them in h^-2 roundoff.
fn random_grid(rng: &mut ChaCha8Rng, segments: usize, pin_axis: bool) -> GridFunction {
    let h = 1.0 / segments as f64;
    let mut p = Vec2::new(rng.gen_range(-1.0..=1.0), rng.gen_range(-1.0..=1.0));
    let mut values = Vec::with_capacity(segments + 1);
    values.push(p);
    for _ in 0..segments {
        p = p + Vec2::new(rng.gen_range(-2.0 * h..=2.0 * h), rng.gen_range(-2.0 * h..=2.0 * h));
        values.push(p);
    }
    if pin_axis {
        // Bridge the radial walk down to exact zeros at both ends.
        let (start, end) = (values[0].x1, values[segments].x1);
        for (j, v) in values.iter_mut().enumerate() {
            v.x1 -= start + (end - start) * (j as f64 * h);
        }
        values[0].x1 = 0.0;
        values[segments].x1 = 0.0;
    }
    GridFunction::new(values)
}

fn perturbed_sphere(rng: &mut ChaCha8Rng, segments: usize) -> DiscreteCurve {
    let sphere = sample_initial(&InitialData::Sphere { radius: 1.0 }, segments)
        .expect("sphere samples at any resolution");
    let h = sphere.spacing();
    let mut values = sphere.positions().values().to_vec();
    for (j, v) in values.iter_mut().enumerate() {
        // Interior radii stay positive: sin(pi h) > 0.2 h with room to spare.
        let amp = 0.2 * h;
        if j > 0 && j < segments {
            v.x1 += rng.gen_range(-amp..=amp);
        }
        v.x2 += rng.gen_range(-amp..=amp);
    }
    DiscreteCurve::new(GridFunction::new(values), 0.0).expect("perturbation keeps the curve valid")
}

fn diagnostics_cmd(cfg: &ExperimentConfig) -> Result<(), AppError> {
    let dir = &cfg.output_dir;
    let spec = &cfg.diagnostics;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let mut max_sbp = 0.0f64;
    let mut min_inverse = f64::INFINITY;
    let mut min_max_value = f64::INFINITY;
    let mut min_max_diff = f64::INFINITY;
    let mut min_axis_weighted = f64::INFINITY;
    let mut axis_cases = 0usize;
    for case in 0..spec.cases {
        let jn = rng.gen_range(4..=spec.max_segments);
        let pin = case % 2 == 0;
        let v = random_grid(&mut rng, jn, pin);
        let w = random_grid(&mut rng, jn, false);
        max_sbp = max_sbp.max(sbp_defect(&v, &w));
        let slacks = sobolev_slacks(&v);
        min_inverse = min_inverse.min(slacks.inverse_bound);
        min_max_value = min_max_value.min(slacks.max_value_bound);
        min_max_diff = min_max_diff.min(slacks.max_diff_bound);
        if let Some(a) = slacks.axis_weighted_bound {
            min_axis_weighted = min_axis_weighted.min(a);
            axis_cases += 1;
        }
    }

    // Block-Thomas against the dense-LU oracle on assembled step systems.
    let mut max_rel_diff = 0.0f64;
    let mut systems = 0usize;
    for jn in 4..=spec.max_segments {
        let curve = perturbed_sphere(&mut rng, jn);
        let dt = 1.0 / jn as f64;
        let sys = stepper::assemble(&curve, dt, 1e-12, 1e-12).map_err(numerical)?;
        let (thomas, _) = sys.solve_block_thomas().map_err(|j| {
            AppError::Numerical(format!("block elimination broke down at row {j} (J = {jn})"))
        })?;
        let dense = sys
            .solve_dense()
            .map_err(|j| AppError::Numerical(format!("dense elimination broke down at row {j} (J = {jn})")))?;
        let mut diff = 0.0f64;
        let mut scale = 0.0f64;
        for (a, b) in thomas.iter().zip(&dense) {
            diff += (*a - *b).norm_sq();
            scale += b.norm_sq();
        }
        max_rel_diff = max_rel_diff.max((diff / scale).sqrt());
        systems += 1;
    }

    // Axis-endpoint structure of the exact sphere at a few resolutions.
    let mut boundary_rows = Vec::new();
    let mut jn = 32;
    while jn <= spec.max_segments.max(256) {
        let d = analysis::boundary_diagnostics(jn, 0.05, 1.0).map_err(numerical)?;
        boundary_rows.push(json!({
            "segments": jn,
            "second_radial": d.second_radial,
            "second_tangential": d.second_tangential,
            "third_height": d.third_height,
            "speed_defect": d.speed_defect,
            "axis_weight_min": d.axis_weight_min,
        }));
        jn *= 2;
    }

    let report = json!({
        "cases": spec.cases,
        "max_sbp_defect": max_sbp,
        "min_slacks": {
            "inverse_bound": min_inverse,
            "max_value_bound": min_max_value,
            "max_diff_bound": min_max_diff,
            "axis_weighted_bound": if axis_cases > 0 { json!(min_axis_weighted) } else { json!(null) },
            "axis_weighted_cases": axis_cases,
        },
        "solver_cross_check": {
            "systems": systems,
            "max_relative_difference": max_rel_diff,
        },
        "boundary": boundary_rows,
        "files": ["report.json"],
    });
    write_report(dir, report, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pool_map_keeps_order_and_runs_everything() {
        let items: Vec<usize> = (0..97).collect();
        for threads in [1, 3, 0] {
            let out = pool_map(&items, threads, |&i| 2 * i + 1);
            assert_eq!(out.len(), items.len());
            for (i, v) in out.iter().enumerate() {
                assert_eq!(*v, 2 * i + 1);
            }
        }
    }

    #[test]
    fn pool_map_handles_empty_input() {
        let out: Vec<usize> = pool_map(&[], 4, |&i: &usize| i);
        assert!(out.is_empty());
    }
}
