//! File formats: curve snapshot CSV, series CSV, convergence-table CSV,
//! JSON reports, and gnuplot scripts. All writes are atomic
//! (temp-then-rename) and floats carry 17 significant digits so files
//! round-trip through the readers bit-exactly.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use axmcf_core::analysis::{ConsistencyRow, EocRow};
use axmcf_core::curve::DiscreteCurve;
use axmcf_core::stepper::RunTrace;
use axmcf_core::Vec2;

use crate::AppError;

/// 17 significant digits: enough to reproduce any f64 exactly.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Writes via a temp file in the same directory, then renames into place.
pub fn write_atomic(path: &Path, content: &str) -> Result<(), AppError> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    std::fs::write(&tmp, content).map_err(|e| AppError::io(e, &tmp))?;
    std::fs::rename(&tmp, path).map_err(|e| AppError::io(e, path))
}

// ---- curve snapshots --------------------------------------------------------

pub fn curve_csv(curve: &DiscreteCurve) -> String {
    let mut out = String::from("rho,x1,x2\n");
    let g = curve.positions();
    for j in 0..=curve.segments() {
        let p = g.get(j);
        let _ = writeln!(out, "{},{},{}", fmt_f64(g.node(j)), fmt_f64(p.x1), fmt_f64(p.x2));
    }
    out
}

pub fn write_curve_csv(path: &Path, curve: &DiscreteCurve) -> Result<(), AppError> {
    write_atomic(path, &curve_csv(curve))
}

/// Reads a curve snapshot back as nodal positions. Strict about the header
/// and column count; rho values must be the uniform grid.
pub fn read_curve_csv(path: &Path) -> Result<Vec<Vec2>, AppError> {
    let text = std::fs::read_to_string(path).map_err(|e| AppError::io(e, path))?;
    parse_curve_csv(&text).map_err(|e| AppError::Validation(vec![format!("{}: {e}", path.display())]))
}

pub fn parse_curve_csv(text: &str) -> Result<Vec<Vec2>, String> {
    let mut lines = text.lines();
    match lines.next() {
        Some("rho,x1,x2") => {}
        Some(other) => return Err(format!("bad header '{other}', want 'rho,x1,x2'")),
        None => return Err("empty file".into()),
    }
    let mut nodes = Vec::new();
    for (k, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let mut cols = line.split(',');
        let mut field = |name: &str| -> Result<f64, String> {
            cols.next()
                .ok_or_else(|| format!("row {k}: missing {name}"))?
                .trim()
                .parse::<f64>()
                .map_err(|_| format!("row {k}: {name} is not a number"))
        };
        let rho = field("rho")?;
        let x1 = field("x1")?;
        let x2 = field("x2")?;
        if cols.next().is_some() {
            return Err(format!("row {k}: too many columns"));
        }
        if !rho.is_finite() {
            return Err(format!("row {k}: rho is not finite"));
        }
        nodes.push(Vec2::new(x1, x2));
    }
    if nodes.len() < 3 {
        return Err(format!("only {} rows, need at least 3", nodes.len()));
    }
    let segments = nodes.len() - 1;
    // Recheck the parameter column against the uniform grid.
    for (k, line) in text.lines().skip(1).filter(|l| !l.is_empty()).enumerate() {
        let rho: f64 = line.split(',').next().unwrap().trim().parse().unwrap();
        let expect = k as f64 / segments as f64;
        if (rho - expect).abs() > 1e-12 {
            return Err(format!("row {k}: rho {rho} is not uniform (want {expect})"));
        }
    }
    Ok(nodes)
}

// ---- observable series -------------------------------------------------------

/// Columns: step, t, area, min_radius, then optionally intersections and the
/// two error norms when the run recorded them.
pub fn series_csv(trace: &RunTrace) -> String {
    let with_intersections = !trace.intersections.is_empty();
    let with_errors = trace.errors.is_some();
    let mut header = String::from("step,t,area,min_radius");
    if with_intersections {
        header.push_str(",intersections");
    }
    if with_errors {
        header.push_str(",err_0h,err_1h");
    }
    header.push('\n');

    let mut out = header;
    let mut inter = trace.intersections.iter().peekable();
    for (k, &t) in trace.times.iter().enumerate() {
        let _ = write!(
            out,
            "{k},{},{},{}",
            fmt_f64(t),
            fmt_f64(trace.areas[k]),
            fmt_f64(trace.min_radii[k])
        );
        if with_intersections {
            match inter.peek() {
                Some(&&(ti, n)) if ti == t => {
                    let _ = write!(out, ",{n}");
                    inter.next();
                }
                _ => out.push(','),
            }
        }
        if let Some(errs) = &trace.errors {
            // The oracle stops once the exact solution is extinct, so the
            // error columns can end before the series does.
            match errs.get(k) {
                Some((e0, e1)) => {
                    let _ = write!(out, ",{},{}", fmt_f64(*e0), fmt_f64(*e1));
                }
                None => out.push_str(",,"),
            }
        }
        out.push('\n');
    }
    out
}

// ---- convergence and consistency tables ---------------------------------------

pub fn eoc_csv(rows: &[EocRow]) -> String {
    let mut out = String::from("J,err_0h,eoc_0h,err_1h,eoc_1h\n");
    for r in rows {
        let eoc = |v: Option<f64>| v.map(fmt_f64).unwrap_or_default();
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            r.segments,
            fmt_f64(r.err_l2),
            eoc(r.eoc_l2),
            fmt_f64(r.err_h1),
            eoc(r.eoc_h1)
        );
    }
    out
}

pub fn consistency_csv(rows: &[ConsistencyRow]) -> String {
    let mut out = String::from("J,h,dt,t,interior_max,boundary_sum\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            r.segments,
            fmt_f64(r.h),
            fmt_f64(r.dt),
            fmt_f64(r.time),
            fmt_f64(r.interior_max),
            fmt_f64(r.boundary_sum)
        );
    }
    out
}

// ---- plot scripts --------------------------------------------------------------

/// Gnuplot overlay of curve snapshots; each profile is drawn with its
/// mirror image to show the full cross-section through the rotation axis.
pub fn curves_plot_script(snapshots: &[(String, String)]) -> String {
    let mut out = String::from(
        "set size ratio -1\nset datafile separator ','\nset xlabel 'x1'\nset ylabel 'x2'\nset key outside\nplot \\\n",
    );
    let lines: Vec<String> = snapshots
        .iter()
        .map(|(label, file)| {
            format!(
                "  '{file}' using 2:3 with lines title '{label}', \\\n  '{file}' using (-$2):3 with lines notitle"
            )
        })
        .collect();
    out.push_str(&lines.join(", \\\n"));
    out.push('\n');
    out.push_str("pause -1 'press enter'\n");
    out
}

pub fn area_plot_script(series_file: &str) -> String {
    format!(
        "set datafile separator ','\nset xlabel 't'\nset ylabel 'surface area'\nplot '{series_file}' using 2:3 with lines title 'area', \\\n  0 with lines notitle\npause -1 'press enter'\n"
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use axmcf_core::curve::{sample_initial, InitialData};

    #[test]
    fn curve_csv_roundtrips_exactly() {
        let c = sample_initial(&InitialData::Limacon { amplitude: 1.5 }, 64).unwrap();
        let text = curve_csv(&c);
        let nodes = parse_curve_csv(&text).unwrap();
        assert_eq!(nodes.len(), 65);
        for (a, b) in nodes.iter().zip(c.positions().values()) {
            assert_eq!(a.x1, b.x1);
            assert_eq!(a.x2, b.x2);
        }
    }

    #[test]
    fn curve_csv_rejects_malformed_input() {
        assert!(parse_curve_csv("").is_err());
        assert!(parse_curve_csv("x,y\n").is_err());
        assert!(parse_curve_csv("rho,x1,x2\n0,0,1\n").is_err());
        assert!(parse_curve_csv("rho,x1,x2\n0,0,1\n0.5,1,0\n1,0,nope\n").is_err());
        assert!(parse_curve_csv("rho,x1,x2\n0,0,1\n0.4,1,0\n1,0,-1\n").is_err());
        assert!(parse_curve_csv("rho,x1,x2\n0,0,1,9\n0.5,1,0\n1,0,-1\n").is_err());
    }

    #[test]
    fn atomic_write_replaces_content() {
        let dir = std::env::temp_dir().join(format!("axmcf-io-test-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("probe.txt");
        write_atomic(&path, "one").unwrap();
        write_atomic(&path, "two").unwrap();
        assert_eq!(std::fs::read_to_string(&path).unwrap(), "two");
        assert!(!path.with_extension("txt.tmp").exists());
        std::fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn float_format_is_lossless() {
        for v in [0.1, -3.5744e-2, 1.0 / 3.0, 4.0 * core::f64::consts::PI] {
            let s = fmt_f64(v);
            assert_eq!(s.parse::<f64>().unwrap(), v, "{s}");
        }
    }
}
