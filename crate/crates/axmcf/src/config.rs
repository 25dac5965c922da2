//! Experiment configuration: TOML file, command line overrides, and the
//! resolved, validated form the commands execute.
//!
//! Resolution order, strongest last: built-in defaults, config file,
//! command line flags, then the AXMCF_OUT_DIR environment variable for the
//! output directory. Validation collects every violation instead of
//! stopping at the first.

use std::path::{Path, PathBuf};

use axmcf_core::curve::InitialData;
use axmcf_core::stepper::{DtMode, SchemeParams, SnapshotSchedule};
use serde::Deserialize;

use crate::AppError;

pub const OUT_DIR_ENV: &str = "AXMCF_OUT_DIR";
pub const DEFAULT_OUT_DIR: &str = "axmcf-out";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Run,
    EocSweep,
    ConsistencySweep,
    ShrinkerSearch,
    Diagnostics,
}

impl ExperimentKind {
    pub fn name(&self) -> &'static str {
        match self {
            ExperimentKind::Run => "run",
            ExperimentKind::EocSweep => "eoc-sweep",
            ExperimentKind::ConsistencySweep => "consistency-sweep",
            ExperimentKind::ShrinkerSearch => "shrinker-search",
            ExperimentKind::Diagnostics => "diagnostics",
        }
    }
}

/// Initial data as configured; files and searches resolve at execute time.
#[derive(Clone, Debug)]
pub enum InitialSpec {
    Family(InitialData),
    Csv(PathBuf),
    /// Evolve a shrinker profile found by bisection.
    Shrinker { intersections: usize, bracket: (f64, f64), ds: f64 },
}

impl InitialSpec {
    /// Short human-readable descriptor echoed into reports.
    pub fn describe(&self) -> String {
        match self {
            InitialSpec::Family(InitialData::Sphere { radius }) => format!("sphere({radius})"),
            InitialSpec::Family(InitialData::Limacon { amplitude }) => {
                format!("limacon({amplitude})")
            }
            InitialSpec::Family(InitialData::Cones { contact_angle_deg, apex_heights }) => {
                format!("cones({contact_angle_deg} deg, {} to {})", apex_heights.0, apex_heights.1)
            }
            InitialSpec::Family(InitialData::Nodes(n)) => format!("nodes({})", n.len()),
            InitialSpec::Csv(p) => format!("csv({})", p.display()),
            InitialSpec::Shrinker { intersections, .. } => {
                format!("shrinker({intersections} intersections)")
            }
        }
    }
}

#[derive(Clone, Debug)]
pub struct SweepSpec {
    pub segment_list: Vec<usize>,
    pub radius: f64,
    pub threads: usize,
}

#[derive(Clone, Debug)]
pub struct SearchSpec {
    pub intersections: usize,
    pub bracket: (f64, f64),
    pub ds: f64,
    pub segments: usize,
    /// Optional pre-scan (lo, hi, samples) reported alongside the search.
    pub scan: Option<(f64, f64, usize)>,
}

#[derive(Clone, Debug)]
pub struct DiagnosticsSpec {
    pub cases: usize,
    pub max_segments: usize,
}

/// Fully resolved and validated experiment description.
#[derive(Clone, Debug)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub output_dir: PathBuf,
    pub seed: u64,
    pub scheme: SchemeParams,
    pub initial: InitialSpec,
    pub snapshots: SnapshotSchedule,
    /// Count polyline self-intersections every this many steps (0 = never).
    pub intersections_every: usize,
    pub sweep: SweepSpec,
    pub search: SearchSpec,
    pub diagnostics: DiagnosticsSpec,
}

// ---- file form ------------------------------------------------------------

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub kind: Option<ExperimentKind>,
    pub output_dir: Option<PathBuf>,
    pub seed: Option<u64>,
    pub scheme: Option<SchemeSection>,
    pub initial: Option<InitialSection>,
    pub snapshots: Option<SnapshotSection>,
    pub sweep: Option<SweepSection>,
    pub search: Option<SearchSection>,
    pub diagnostics: Option<DiagnosticsSection>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemeSection {
    pub segments: Option<usize>,
    pub dt_mode: Option<String>,
    pub final_time: Option<f64>,
    pub eps_axis: Option<f64>,
    pub eps_len: Option<f64>,
    pub max_steps: Option<usize>,
    pub intersections_every: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialSection {
    pub family: Option<String>,
    pub radius: Option<f64>,
    pub amplitude: Option<f64>,
    pub contact_angle_deg: Option<f64>,
    pub apex_top: Option<f64>,
    pub apex_bottom: Option<f64>,
    pub path: Option<PathBuf>,
    pub intersections: Option<usize>,
    pub bracket: Option<[f64; 2]>,
    pub ds: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SnapshotSection {
    /// "none", "every" (with `every`), or "at-times" (with `times`).
    pub mode: Option<String>,
    pub every: Option<usize>,
    pub times: Option<Vec<f64>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub segment_list: Option<Vec<usize>>,
    pub radius: Option<f64>,
    pub threads: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchSection {
    pub intersections: Option<usize>,
    pub bracket: Option<[f64; 2]>,
    pub ds: Option<f64>,
    pub segments: Option<usize>,
    pub scan: Option<ScanSection>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanSection {
    pub lo: f64,
    pub hi: f64,
    pub samples: usize,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiagnosticsSection {
    pub cases: Option<usize>,
    pub max_segments: Option<usize>,
}

impl FileConfig {
    pub fn parse(text: &str) -> Result<Self, AppError> {
        toml::from_str(text).map_err(|e| AppError::Validation(vec![format!("config file: {e}")]))
    }

    pub fn load(path: &Path) -> Result<Self, AppError> {
        let text = std::fs::read_to_string(path).map_err(|e| AppError::io(e, path))?;
        Self::parse(&text)
    }
}

// ---- command line overrides ------------------------------------------------

/// Flag-level overrides; every field beats the config file when present.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub segments: Option<usize>,
    pub dt_mode: Option<String>,
    pub final_time: Option<f64>,
    pub max_steps: Option<usize>,
    pub initial: Option<String>,
    pub snapshots: Option<String>,
    pub intersections_every: Option<usize>,
    pub segment_list: Option<Vec<usize>>,
    pub radius: Option<f64>,
    pub threads: Option<usize>,
    pub intersections: Option<usize>,
    pub bracket: Option<(f64, f64)>,
    pub ds: Option<f64>,
    pub scan: Option<(f64, f64, usize)>,
    pub cases: Option<usize>,
    pub max_segments: Option<usize>,
}

pub fn parse_dt_mode(s: &str) -> Result<DtMode, String> {
    match s {
        "h" => Ok(DtMode::ProportionalH),
        "h2" => Ok(DtMode::QuadraticH),
        _ => match s.strip_prefix("fixed:") {
            Some(v) => v
                .parse::<f64>()
                .map(DtMode::Fixed)
                .map_err(|_| format!("dt mode 'fixed:{v}': not a number")),
            None => Err(format!("dt mode '{s}': expected h, h2, or fixed:<value>")),
        },
    }
}

/// Parses the `--initial` shorthand, e.g. "sphere:1.0", "limacon:1.5",
/// "cones:45", "cones:45:1.4:-0.5", "csv:path", "shrinker:3".
fn parse_initial_flag(s: &str) -> Result<InitialSection, String> {
    let mut section = InitialSection::default();
    let (family, rest) = match s.split_once(':') {
        Some((f, r)) => (f, Some(r)),
        None => (s, None),
    };
    section.family = Some(family.to_string());
    let parse_num = |v: &str, what: &str| -> Result<f64, String> {
        v.parse::<f64>().map_err(|_| format!("initial '{s}': {what} is not a number"))
    };
    match family {
        "sphere" => {
            if let Some(r) = rest {
                section.radius = Some(parse_num(r, "radius")?);
            }
        }
        "limacon" => {
            if let Some(a) = rest {
                section.amplitude = Some(parse_num(a, "amplitude")?);
            }
        }
        "cones" => {
            if let Some(r) = rest {
                let parts: Vec<&str> = r.split(':').collect();
                if parts.len() != 1 && parts.len() != 3 {
                    return Err(format!("initial '{s}': cones wants angle or angle:top:bottom"));
                }
                section.contact_angle_deg = Some(parse_num(parts[0], "contact angle")?);
                if parts.len() == 3 {
                    section.apex_top = Some(parse_num(parts[1], "top apex")?);
                    section.apex_bottom = Some(parse_num(parts[2], "bottom apex")?);
                }
            }
        }
        "csv" => match rest {
            Some(p) if !p.is_empty() => section.path = Some(PathBuf::from(p)),
            _ => return Err(format!("initial '{s}': csv wants a path")),
        },
        "shrinker" => {
            if let Some(n) = rest {
                section.intersections = Some(
                    n.parse::<usize>()
                        .map_err(|_| format!("initial '{s}': intersection count"))?,
                );
            }
        }
        other => return Err(format!("unknown initial family '{other}'")),
    }
    Ok(section)
}

/// Parses the `--snapshots` shorthand: "none", "every:K", "at:t1,t2,...".
fn parse_snapshots_flag(s: &str) -> Result<SnapshotSection, String> {
    let mut section = SnapshotSection::default();
    if s == "none" {
        section.mode = Some("none".into());
        return Ok(section);
    }
    if let Some(k) = s.strip_prefix("every:") {
        section.mode = Some("every".into());
        section.every =
            Some(k.parse::<usize>().map_err(|_| format!("snapshots '{s}': bad count"))?);
        return Ok(section);
    }
    if let Some(list) = s.strip_prefix("at:") {
        let times: Result<Vec<f64>, _> = list.split(',').map(|t| t.parse::<f64>()).collect();
        section.mode = Some("at-times".into());
        section.times = Some(times.map_err(|_| format!("snapshots '{s}': bad time list"))?);
        return Ok(section);
    }
    Err(format!("snapshots '{s}': expected none, every:K, or at:t1,t2,..."))
}

// ---- resolution -----------------------------------------------------------

/// Merges file config and overrides into a validated ExperimentConfig,
/// collecting every validation failure.
pub fn resolve(
    kind: ExperimentKind,
    file: FileConfig,
    over: &Overrides,
) -> Result<ExperimentConfig, AppError> {
    let mut errors: Vec<String> = Vec::new();

    if let Some(file_kind) = file.kind {
        if file_kind != kind {
            errors.push(format!(
                "config kind '{}' does not match subcommand '{}'",
                file_kind.name(),
                kind.name()
            ));
        }
    }

    let scheme_section = file.scheme.unwrap_or_default();
    let segments = over.segments.or(scheme_section.segments).unwrap_or(128);
    let dt_mode_str = over
        .dt_mode
        .clone()
        .or(scheme_section.dt_mode)
        .unwrap_or_else(|| "h2".to_string());
    let dt_mode = match parse_dt_mode(&dt_mode_str) {
        Ok(m) => m,
        Err(e) => {
            errors.push(format!("scheme.dt_mode: {e}"));
            DtMode::QuadraticH
        }
    };
    let final_time = over.final_time.or(scheme_section.final_time).unwrap_or(0.125);

    let mut scheme = SchemeParams::new(2, DtMode::QuadraticH, 1.0)
        .expect("placeholder parameters are valid");
    scheme.segments = segments;
    scheme.dt_mode = dt_mode;
    scheme.final_time = final_time;
    if let Some(e) = scheme_section.eps_axis {
        scheme.eps_axis = e;
    }
    if let Some(e) = scheme_section.eps_len {
        scheme.eps_len = e;
    }
    if let Some(m) = over.max_steps.or(scheme_section.max_steps) {
        scheme.max_steps = m;
    }
    if let Err(e) = scheme.validate() {
        errors.push(format!("scheme: {e}"));
    }

    // Initial data: the --initial flag replaces the whole section.
    let initial_section = match &over.initial {
        Some(flag) => match parse_initial_flag(flag) {
            Ok(s) => s,
            Err(e) => {
                errors.push(format!("initial: {e}"));
                InitialSection::default()
            }
        },
        None => file.initial.unwrap_or_default(),
    };
    let initial = resolve_initial(&initial_section, &mut errors);

    let snapshot_section = match &over.snapshots {
        Some(flag) => match parse_snapshots_flag(flag) {
            Ok(s) => s,
            Err(e) => {
                errors.push(format!("snapshots: {e}"));
                SnapshotSection::default()
            }
        },
        None => file.snapshots.unwrap_or_default(),
    };
    let snapshots = resolve_snapshots(&snapshot_section, &scheme, &mut errors);

    let sweep_section = file.sweep.unwrap_or_default();
    let segment_list = over
        .segment_list
        .clone()
        .or(sweep_section.segment_list)
        .unwrap_or_else(|| vec![32, 64, 128, 256, 512]);
    if segment_list.is_empty() {
        errors.push("sweep.segment_list: empty".into());
    }
    for pair in segment_list.windows(2) {
        if pair[1] != 2 * pair[0] {
            errors.push(format!(
                "sweep.segment_list: {} then {} (must double)",
                pair[0], pair[1]
            ));
        }
    }
    let radius = over.radius.or(sweep_section.radius).unwrap_or(1.0);
    if !(radius > 0.0 && radius.is_finite()) {
        errors.push(format!("sweep.radius: {radius} must be positive"));
    }
    let threads = over.threads.or(sweep_section.threads).unwrap_or(0);

    let search_section = file.search.unwrap_or_default();
    let search = SearchSpec {
        intersections: over
            .intersections
            .or(search_section.intersections)
            .or(initial_section.intersections)
            .unwrap_or(0),
        bracket: over
            .bracket
            .or(search_section.bracket.map(|b| (b[0], b[1])))
            .or(initial_section.bracket.map(|b| (b[0], b[1])))
            .unwrap_or((1.9, 2.1)),
        ds: over.ds.or(search_section.ds).or(initial_section.ds).unwrap_or(1e-4),
        segments: search_section.segments.unwrap_or(segments),
        scan: over.scan.or(search_section.scan.map(|s| (s.lo, s.hi, s.samples))),
    };
    if !(search.bracket.0 > 0.0 && search.bracket.1 > search.bracket.0) {
        errors.push(format!(
            "search.bracket: [{}, {}] must satisfy 0 < lo < hi",
            search.bracket.0, search.bracket.1
        ));
    }
    if !(search.ds > 0.0 && search.ds < 0.1) {
        errors.push(format!("search.ds: {} out of (0, 0.1)", search.ds));
    }
    if let Some((lo, hi, samples)) = search.scan {
        if !(lo > 0.0 && hi > lo) || samples < 2 {
            errors.push(format!("search.scan: bad range [{lo}, {hi}] x {samples}"));
        }
    }

    let diag_section = file.diagnostics.unwrap_or_default();
    let diagnostics = DiagnosticsSpec {
        cases: over.cases.or(diag_section.cases).unwrap_or(1000),
        max_segments: over.max_segments.or(diag_section.max_segments).unwrap_or(64),
    };
    if diagnostics.cases == 0 {
        errors.push("diagnostics.cases: must be positive".into());
    }
    if diagnostics.max_segments < 4 {
        errors.push("diagnostics.max_segments: must be at least 4".into());
    }

    // Output directory: environment beats flags beats file.
    let output_dir = std::env::var_os(OUT_DIR_ENV)
        .map(PathBuf::from)
        .or_else(|| over.out.clone())
        .or(file.output_dir)
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR));

    let seed = over.seed.or(file.seed).unwrap_or(0);

    if !errors.is_empty() {
        return Err(AppError::Validation(errors));
    }
    Ok(ExperimentConfig {
        kind,
        output_dir,
        seed,
        scheme,
        initial,
        snapshots,
        intersections_every: over
            .intersections_every
            .or(scheme_section.intersections_every)
            .unwrap_or(0),
        sweep: SweepSpec { segment_list, radius, threads },
        search,
        diagnostics,
    })
}

fn resolve_initial(section: &InitialSection, errors: &mut Vec<String>) -> InitialSpec {
    let fallback = InitialSpec::Family(InitialData::Sphere { radius: 1.0 });
    let family = match &section.family {
        Some(f) => f.as_str(),
        None => {
            // Minimal configs default to the unit sphere.
            if section.radius.is_some() {
                "sphere"
            } else {
                return fallback;
            }
        }
    };
    let forbid = |errors: &mut Vec<String>, what: &str, set: bool| {
        if set {
            errors.push(format!("initial.{what}: not valid for family '{family}'"));
        }
    };
    match family {
        "sphere" => {
            forbid(errors, "amplitude", section.amplitude.is_some());
            forbid(errors, "path", section.path.is_some());
            let radius = section.radius.unwrap_or(1.0);
            if !(radius > 0.0 && radius.is_finite()) {
                errors.push(format!("initial.radius: {radius} must be positive"));
            }
            InitialSpec::Family(InitialData::Sphere { radius })
        }
        "limacon" => {
            forbid(errors, "radius", section.radius.is_some());
            forbid(errors, "path", section.path.is_some());
            let amplitude = section.amplitude.unwrap_or(1.5);
            if !(amplitude.is_finite() && amplitude > -1.0) {
                errors.push(format!("initial.amplitude: {amplitude} must exceed -1"));
            }
            InitialSpec::Family(InitialData::Limacon { amplitude })
        }
        "cones" => {
            forbid(errors, "radius", section.radius.is_some());
            forbid(errors, "amplitude", section.amplitude.is_some());
            forbid(errors, "path", section.path.is_some());
            let default = InitialData::cones_default();
            let (mut angle, mut apexes) = match default {
                InitialData::Cones { contact_angle_deg, apex_heights } => {
                    (contact_angle_deg, apex_heights)
                }
                _ => unreachable!(),
            };
            if let Some(a) = section.contact_angle_deg {
                angle = a;
            }
            match (section.apex_top, section.apex_bottom) {
                (Some(t), Some(b)) => apexes = (t, b),
                (None, None) => {}
                _ => errors.push("initial: cones needs both apex heights or neither".into()),
            }
            if !(angle > 0.0 && angle < 90.0) {
                errors.push(format!("initial.contact_angle_deg: {angle} out of (0, 90)"));
            }
            if !(apexes.0 > apexes.1) {
                errors.push(format!(
                    "initial.apex heights: top {} must exceed bottom {}",
                    apexes.0, apexes.1
                ));
            }
            InitialSpec::Family(InitialData::Cones {
                contact_angle_deg: angle,
                apex_heights: apexes,
            })
        }
        "csv" => match &section.path {
            Some(p) => {
                if !p.exists() {
                    errors.push(format!("initial.path: {} does not exist", p.display()));
                }
                InitialSpec::Csv(p.clone())
            }
            None => {
                errors.push("initial.path: required for family 'csv'".into());
                fallback
            }
        },
        "shrinker" => InitialSpec::Shrinker {
            intersections: section.intersections.unwrap_or(3),
            bracket: section.bracket.map(|b| (b[0], b[1])).unwrap_or((0.39, 0.397)),
            ds: section.ds.unwrap_or(1e-4),
        },
        other => {
            errors.push(format!("initial.family: unknown family '{other}'"));
            fallback
        }
    }
}

fn resolve_snapshots(
    section: &SnapshotSection,
    scheme: &SchemeParams,
    errors: &mut Vec<String>,
) -> SnapshotSchedule {
    let mode = section.mode.as_deref().unwrap_or("every");
    match mode {
        "none" => SnapshotSchedule::None,
        "every" => {
            // Default cadence: about ten snapshots over the run.
            let cadence = section.every.unwrap_or_else(|| {
                let steps = (scheme.final_time / scheme.dt()).ceil() as usize;
                (steps / 10).max(1)
            });
            if cadence == 0 {
                errors.push("snapshots.every: must be positive".into());
                SnapshotSchedule::None
            } else {
                SnapshotSchedule::EveryK(cadence)
            }
        }
        "at-times" => match &section.times {
            Some(times) if !times.is_empty() => {
                let mut ts = times.clone();
                if ts.iter().any(|t| !t.is_finite() || *t < 0.0) {
                    errors.push("snapshots.times: times must be finite and nonnegative".into());
                }
                ts.sort_by(f64::total_cmp);
                SnapshotSchedule::AtTimes(ts)
            }
            _ => {
                errors.push("snapshots.times: required for mode 'at-times'".into());
                SnapshotSchedule::None
            }
        },
        other => {
            errors.push(format!("snapshots.mode: unknown mode '{other}'"));
            SnapshotSchedule::None
        }
    }
}
