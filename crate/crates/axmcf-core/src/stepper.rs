//! Semi-implicit time stepping for the axisymmetric flow.
//!
//! One step solves a linear block tridiagonal system with 2x2 blocks. At an
//! interior node j the unknown next curve X' satisfies
//!
//!   (X'_j - X_j)/dt = D2 X'_j / |D1 X_j|^2
//!                     - (D1 X'_j . e2) / (|D1 X_j|^2 (X_j . e1)) * (D1 X_j)^perp
//!
//! with central (D1) and second (D2) differences, all geometric coefficients
//! frozen at the current curve. The axis rows impose X' . e1 = 0 together
//! with the one-sided height conditions
//!
//!   D+ X'_0 . e2 = (h/4) |D+ X_0|^2 (X'_0 - X_0)/dt . e2
//!   D- X'_J . e2 = -(h/4) |D- X_J|^2 (X'_J - X_J)/dt . e2
//!
//! which are the discrete form of the perpendicular axis contact.
//!
//! The system is solved by block Thomas elimination; if a pivot block
//! becomes numerically singular the solver falls back to dense elimination
//! with partial pivoting, and only reports failure if that also breaks down.

use alloc::vec;
use alloc::vec::Vec;

use crate::curve::{CurveError, DiscreteCurve, InitialData, SphereSolution, sample_initial};
use crate::grid::GridFunction;
use crate::vec2::{Mat2, Vec2};

/// Relative determinant floor for a 2x2 pivot block.
const PIVOT_TOL: f64 = 1e-14;
/// Relative residual each accepted step must satisfy.
const RESIDUAL_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum DtMode {
    Fixed(f64),
    /// dt = h.
    ProportionalH,
    /// dt = h^2.
    QuadraticH,
}

impl DtMode {
    pub fn dt(&self, h: f64) -> f64 {
        match self {
            DtMode::Fixed(dt) => *dt,
            DtMode::ProportionalH => h,
            DtMode::QuadraticH => h * h,
        }
    }
}

#[derive(Clone, Debug)]
pub struct SchemeParams {
    pub segments: usize,
    pub dt_mode: DtMode,
    pub final_time: f64,
    /// Magnitude floor for the interior axis distances |X_j . e1|.
    pub eps_axis: f64,
    /// Magnitude floor for the difference quotients entering denominators.
    pub eps_len: f64,
    pub max_steps: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub enum ParamError {
    TooFewSegments { segments: usize },
    NonPositiveFinalTime { final_time: f64 },
    NonPositiveDt { dt: f64 },
    EpsOutOfRange { name: &'static str, value: f64 },
}

impl core::fmt::Display for ParamError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            ParamError::TooFewSegments { segments } => write!(f, "need at least 2 segments, got {segments}"),
            ParamError::NonPositiveFinalTime { final_time } => {
                write!(f, "final time must be positive, got {final_time}")
            }
            ParamError::NonPositiveDt { dt } => write!(f, "fixed time step must be positive, got {dt}"),
            ParamError::EpsOutOfRange { name, value } => {
                write!(f, "{name} must lie in (0, 1e-6], got {value:e}")
            }
        }
    }
}

impl SchemeParams {
    pub fn new(segments: usize, dt_mode: DtMode, final_time: f64) -> Result<Self, ParamError> {
        let p = SchemeParams {
            segments,
            dt_mode,
            final_time,
            eps_axis: 1e-12,
            eps_len: 1e-12,
            max_steps: 10_000_000,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), ParamError> {
        if self.segments < 2 {
            return Err(ParamError::TooFewSegments { segments: self.segments });
        }
        if !(self.final_time > 0.0) || !self.final_time.is_finite() {
            return Err(ParamError::NonPositiveFinalTime { final_time: self.final_time });
        }
        if let DtMode::Fixed(dt) = self.dt_mode {
            if !(dt > 0.0) || !dt.is_finite() {
                return Err(ParamError::NonPositiveDt { dt });
            }
        }
        for (name, value) in [("eps_axis", self.eps_axis), ("eps_len", self.eps_len)] {
            if !(value > 0.0 && value <= 1e-6) {
                return Err(ParamError::EpsOutOfRange { name, value });
            }
        }
        Ok(())
    }

    pub fn spacing(&self) -> f64 {
        1.0 / self.segments as f64
    }

    pub fn dt(&self) -> f64 {
        self.dt_mode.dt(self.spacing())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum StepError {
    /// An interior node sits within eps_axis of the rotation axis, the
    /// rotational term cannot be formed.
    AxisPinch { node: usize, x1: f64 },
    /// A difference quotient entering a denominator is shorter than eps_len.
    TangentCollapse { node: usize, len: f64 },
    /// Both solver routes hit a vanishing pivot.
    SingularSystem { node: usize },
    /// The accepted solution failed the relative residual check.
    ResidualTooLarge { relative: f64 },
}

impl core::fmt::Display for StepError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            StepError::AxisPinch { node, x1 } => {
                write!(f, "node {node} is pinched onto the axis (x1 = {x1:e})")
            }
            StepError::TangentCollapse { node, len } => {
                write!(f, "degenerate tangent at node {node} (|dx| = {len:e})")
            }
            StepError::SingularSystem { node } => write!(f, "singular system at block row {node}"),
            StepError::ResidualTooLarge { relative } => {
                write!(f, "solver residual too large (relative {relative:e})")
            }
        }
    }
}

/// Block tridiagonal system with 2x2 blocks; row j couples nodes j-1, j, j+1.
/// lower[0] and upper[J] are unused and held at zero.
#[derive(Clone, Debug)]
pub struct BlockTridiagonalSystem {
    pub lower: Vec<Mat2>,
    pub diag: Vec<Mat2>,
    pub upper: Vec<Mat2>,
    pub rhs: Vec<Vec2>,
}

#[derive(Clone, Copy, Debug)]
pub struct SolveDiagnostics {
    /// Smallest |det| / scale ratio over the pivot blocks of the route taken.
    pub min_pivot: f64,
    /// Relative residual |A x - b| / (|A||x| + |b|).
    pub relative_residual: f64,
    pub dense_fallback: bool,
}

impl BlockTridiagonalSystem {
    pub fn rows(&self) -> usize {
        self.diag.len()
    }

    pub fn apply(&self, x: &[Vec2]) -> Vec<Vec2> {
        let n = self.rows();
        assert_eq!(x.len(), n, "vector length must match block rows");
        let mut out = vec![Vec2::ZERO; n];
        for j in 0..n {
            let mut v = self.diag[j].mul_vec(x[j]);
            if j > 0 {
                v += self.lower[j].mul_vec(x[j - 1]);
            }
            if j + 1 < n {
                v += self.upper[j].mul_vec(x[j + 1]);
            }
            out[j] = v;
        }
        out
    }

    pub fn relative_residual(&self, x: &[Vec2]) -> f64 {
        let ax = self.apply(x);
        let mut num = 0.0;
        let mut xnorm = 0.0;
        let mut bnorm = 0.0;
        let mut anorm = 0.0;
        for j in 0..self.rows() {
            num += (ax[j] - self.rhs[j]).norm_sq();
            xnorm += x[j].norm_sq();
            bnorm += self.rhs[j].norm_sq();
            anorm += self.lower[j].frobenius_sq() + self.diag[j].frobenius_sq() + self.upper[j].frobenius_sq();
        }
        let scale = libm::sqrt(anorm) * libm::sqrt(xnorm) + libm::sqrt(bnorm);
        if scale == 0.0 {
            return libm::sqrt(num);
        }
        libm::sqrt(num) / scale
    }

    /// Block Thomas elimination. Returns the solution and the smallest pivot
    /// ratio, or the row whose pivot block was numerically singular.
    pub fn solve_block_thomas(&self) -> Result<(Vec<Vec2>, f64), usize> {
        let n = self.rows();
        let mut gain = vec![Mat2::ZERO; n]; // P_j^{-1} U_j
        let mut carry = vec![Vec2::ZERO; n]; // P_j^{-1} rhs'_j
        let mut min_pivot = f64::INFINITY;
        let mut pivot = self.diag[0];
        let mut rhs = self.rhs[0];
        for j in 0..n {
            if j > 0 {
                pivot = self.diag[j] - self.lower[j] * gain[j - 1];
                rhs = self.rhs[j] - self.lower[j].mul_vec(carry[j - 1]);
            }
            let scale = pivot.frobenius_sq();
            let det = libm::fabs(pivot.det());
            let ratio = if scale > 0.0 { det / scale } else { 0.0 };
            min_pivot = min_pivot.min(ratio);
            if det <= PIVOT_TOL * scale {
                return Err(j);
            }
            let inv = pivot.inverse();
            if j + 1 < n {
                gain[j] = inv * self.upper[j];
            }
            carry[j] = inv.mul_vec(rhs);
        }
        let mut x = carry;
        for j in (0..n - 1).rev() {
            let correction = gain[j].mul_vec(x[j + 1]);
            x[j] -= correction;
        }
        Ok((x, min_pivot))
    }

    /// Dense elimination with partial pivoting on the scattered 2(J+1)
    /// system; the independent route used as fallback and as test oracle.
    pub fn solve_dense(&self) -> Result<Vec<Vec2>, usize> {
        let nb = self.rows();
        let n = 2 * nb;
        let mut a = vec![0.0; n * n];
        let mut b = vec![0.0; n];
        let mut scatter = |row: usize, col: usize, m: &Mat2| {
            a[(2 * row) * n + 2 * col] = m.a;
            a[(2 * row) * n + 2 * col + 1] = m.b;
            a[(2 * row + 1) * n + 2 * col] = m.c;
            a[(2 * row + 1) * n + 2 * col + 1] = m.d;
        };
        for j in 0..nb {
            scatter(j, j, &self.diag[j]);
            if j > 0 {
                scatter(j, j - 1, &self.lower[j]);
            }
            if j + 1 < nb {
                scatter(j, j + 1, &self.upper[j]);
            }
            b[2 * j] = self.rhs[j].x1;
            b[2 * j + 1] = self.rhs[j].x2;
        }
        let mut max_entry = 0.0f64;
        for v in &a {
            max_entry = max_entry.max(libm::fabs(*v));
        }
        for col in 0..n {
            let mut best = col;
            let mut best_abs = libm::fabs(a[col * n + col]);
            for row in col + 1..n {
                let cand = libm::fabs(a[row * n + col]);
                if cand > best_abs {
                    best = row;
                    best_abs = cand;
                }
            }
            if best_abs <= PIVOT_TOL * max_entry {
                return Err(col / 2);
            }
            if best != col {
                for k in 0..n {
                    a.swap(col * n + k, best * n + k);
                }
                b.swap(col, best);
            }
            let inv = 1.0 / a[col * n + col];
            for row in col + 1..n {
                let factor = a[row * n + col] * inv;
                if factor == 0.0 {
                    continue;
                }
                a[row * n + col] = 0.0;
                for k in col + 1..n {
                    a[row * n + k] -= factor * a[col * n + k];
                }
                b[row] -= factor * b[col];
            }
        }
        for col in (0..n).rev() {
            let mut s = b[col];
            for k in col + 1..n {
                s -= a[col * n + k] * b[k];
            }
            b[col] = s / a[col * n + col];
        }
        Ok((0..nb).map(|j| Vec2::new(b[2 * j], b[2 * j + 1])).collect())
    }

    /// Block Thomas with dense fallback plus the residual diagnostic.
    pub fn solve(&self) -> Result<(Vec<Vec2>, SolveDiagnostics), StepError> {
        match self.solve_block_thomas() {
            Ok((x, min_pivot)) => {
                let relative_residual = self.relative_residual(&x);
                Ok((x, SolveDiagnostics { min_pivot, relative_residual, dense_fallback: false }))
            }
            Err(_) => {
                let x = self.solve_dense().map_err(|node| StepError::SingularSystem { node })?;
                let relative_residual = self.relative_residual(&x);
                Ok((x, SolveDiagnostics { min_pivot: 0.0, relative_residual, dense_fallback: true }))
            }
        }
    }
}

/// Builds the linear system for one step away from `curve`.
///
/// Preconditions checked here, each reported with the offending node:
/// interior |X_j . e1| > eps_axis, interior |D1 X_j| > eps_len, and at the
/// ends |D+ X_0| > eps_len, |D- X_J| > eps_len.
pub fn assemble(
    curve: &DiscreteCurve,
    dt: f64,
    eps_axis: f64,
    eps_len: f64,
) -> Result<BlockTridiagonalSystem, StepError> {
    assert!(dt > 0.0, "time step must be positive");
    let g = curve.positions();
    let jn = g.segments();
    let h = g.spacing();
    let mut sys = BlockTridiagonalSystem {
        lower: vec![Mat2::ZERO; jn + 1],
        diag: vec![Mat2::ZERO; jn + 1],
        upper: vec![Mat2::ZERO; jn + 1],
        rhs: vec![Vec2::ZERO; jn + 1],
    };

    let e2 = Vec2::new(0.0, 1.0);

    let d_plus_0 = g.forward_diff(0);
    if d_plus_0.norm() <= eps_len {
        return Err(StepError::TangentCollapse { node: 0, len: d_plus_0.norm() });
    }
    let c0 = h / (4.0 * dt) * d_plus_0.norm_sq();
    sys.diag[0] = Mat2::new(1.0, 0.0, 0.0, -1.0 / h - c0);
    sys.upper[0] = Mat2::new(0.0, 0.0, 0.0, 1.0 / h);
    sys.rhs[0] = Vec2::new(0.0, -c0 * g.get(0).x2);

    for j in 1..jn {
        let xj = g.get(j);
        if libm::fabs(xj.x1) <= eps_axis {
            return Err(StepError::AxisPinch { node: j, x1: xj.x1 });
        }
        let d1 = g.central_diff(j);
        let len = d1.norm();
        if len <= eps_len {
            return Err(StepError::TangentCollapse { node: j, len });
        }
        let a = 1.0 / d1.norm_sq();
        let rot = Mat2::outer(d1.perp(), e2) * (a / xj.x1);
        let diffusion = Mat2::scaled_identity(a / (h * h));
        sys.diag[j] = Mat2::scaled_identity(1.0 / dt + 2.0 * a / (h * h));
        sys.lower[j] = Mat2::ZERO - diffusion - rot * (1.0 / (2.0 * h));
        sys.upper[j] = Mat2::ZERO - diffusion + rot * (1.0 / (2.0 * h));
        sys.rhs[j] = xj / dt;
    }

    let d_minus_j = g.backward_diff(jn);
    if d_minus_j.norm() <= eps_len {
        return Err(StepError::TangentCollapse { node: jn, len: d_minus_j.norm() });
    }
    let cj = h / (4.0 * dt) * d_minus_j.norm_sq();
    sys.diag[jn] = Mat2::new(1.0, 0.0, 0.0, 1.0 / h + cj);
    sys.lower[jn] = Mat2::new(0.0, 0.0, 0.0, -1.0 / h);
    sys.rhs[jn] = Vec2::new(0.0, cj * g.get(jn).x2);

    Ok(sys)
}

#[derive(Clone, Debug)]
pub struct StepOutcome {
    pub curve: DiscreteCurve,
    pub diagnostics: SolveDiagnostics,
}

/// Advances the curve by one time step.
pub fn step(curve: &DiscreteCurve, dt: f64, eps_axis: f64, eps_len: f64) -> Result<StepOutcome, StepError> {
    let sys = assemble(curve, dt, eps_axis, eps_len)?;
    let (mut x, diagnostics) = sys.solve()?;
    if diagnostics.relative_residual > RESIDUAL_TOL {
        return Err(StepError::ResidualTooLarge { relative: diagnostics.relative_residual });
    }
    // The axis rows produce exact zeros up to the sign of zero.
    let jn = x.len() - 1;
    x[0].x1 = 0.0;
    x[jn].x1 = 0.0;
    let next = DiscreteCurve::new(GridFunction::new(x), curve.time() + dt)
        .expect("stepped curve keeps exact axis endpoints");
    Ok(StepOutcome { curve: next, diagnostics })
}

/// When snapshots of the evolving curve are kept.
#[derive(Clone, Debug, PartialEq)]
pub enum SnapshotSchedule {
    None,
    /// Every k-th step, including step 0.
    EveryK(usize),
    /// At the first step reaching each listed time (sorted ascending).
    AtTimes(Vec<f64>),
}

#[derive(Clone, Debug, PartialEq)]
pub enum Termination {
    ReachedFinalTime,
    ReachedMaxSteps,
    StepFailed { step: usize, error: StepError },
}

impl Termination {
    pub fn is_clean(&self) -> bool {
        !matches!(self, Termination::StepFailed { .. })
    }
}

/// Per-step observables plus the snapshots the schedule selected.
#[derive(Clone, Debug)]
pub struct RunTrace {
    pub termination: Termination,
    pub steps: usize,
    pub times: Vec<f64>,
    pub areas: Vec<f64>,
    pub min_radii: Vec<f64>,
    /// (time, crossing count), recorded on the configured cadence.
    pub intersections: Vec<(f64, usize)>,
    /// Trapezoidal l2 and backward-difference h1 errors against the exact
    /// sphere, present when the run was started from exact sphere data.
    pub errors: Option<Vec<(f64, f64)>>,
    pub snapshots: Vec<DiscreteCurve>,
    pub final_curve: DiscreteCurve,
}

/// Evolves `initial` until final time, the step budget, or a degeneracy.
///
/// `intersection_every` sets the cadence (in steps) of the quadratic-cost
/// self-intersection count; `oracle` attaches the exact sphere solution for
/// per-step error norms.
pub fn run(
    initial: DiscreteCurve,
    params: &SchemeParams,
    schedule: &SnapshotSchedule,
    intersection_every: Option<usize>,
    oracle: Option<&SphereSolution>,
) -> RunTrace {
    let dt = params.dt();
    let t_tol = 1e-12 * params.final_time.max(1.0);
    let mut curve = initial;
    let mut times = Vec::new();
    let mut areas = Vec::new();
    let mut min_radii = Vec::new();
    let mut intersections = Vec::new();
    let mut errors = oracle.map(|_| Vec::new());
    let mut snapshots = Vec::new();
    let mut next_snap_time = 0usize; // index into AtTimes list
    let mut step_index = 0usize;

    let termination = loop {
        times.push(curve.time());
        areas.push(curve.surface_area());
        min_radii.push(curve.min_radius());
        if let Some(k) = intersection_every {
            if k > 0 && step_index % k == 0 {
                intersections.push((curve.time(), curve.self_intersections()));
            }
        }
        if let (Some(errs), Some(sol)) = (errors.as_mut(), oracle) {
            if let Ok(exact) = sol.sample(curve.segments(), curve.time()) {
                let diff: Vec<Vec2> = exact
                    .positions()
                    .values()
                    .iter()
                    .zip(curve.positions().values())
                    .map(|(a, b)| *a - *b)
                    .collect();
                let e = GridFunction::new(diff);
                errs.push((e.norm_l2(), e.seminorm_h1()));
            }
        }
        match schedule {
            SnapshotSchedule::None => {}
            SnapshotSchedule::EveryK(k) => {
                if *k > 0 && step_index % k == 0 {
                    snapshots.push(curve.clone());
                }
            }
            SnapshotSchedule::AtTimes(list) => {
                while next_snap_time < list.len() && curve.time() >= list[next_snap_time] - 1e-9 {
                    snapshots.push(curve.clone());
                    next_snap_time += 1;
                }
            }
        }

        if curve.time() >= params.final_time - t_tol {
            break Termination::ReachedFinalTime;
        }
        if step_index >= params.max_steps {
            break Termination::ReachedMaxSteps;
        }
        match step(&curve, dt, params.eps_axis, params.eps_len) {
            Ok(outcome) => {
                curve = outcome.curve;
                step_index += 1;
            }
            Err(error) => break Termination::StepFailed { step: step_index + 1, error },
        }
    };

    RunTrace {
        termination,
        steps: step_index,
        times,
        areas,
        min_radii,
        intersections,
        errors,
        snapshots,
        final_curve: curve,
    }
}

/// Convenience: sample the family, then run.
pub fn run_initial_data(
    data: &InitialData,
    params: &SchemeParams,
    schedule: &SnapshotSchedule,
    intersection_every: Option<usize>,
) -> Result<RunTrace, CurveError> {
    let initial = sample_initial(data, params.segments)?;
    let oracle = match data {
        InitialData::Sphere { radius } => Some(SphereSolution::new(*radius)?),
        _ => None,
    };
    Ok(run(initial, params, schedule, intersection_every, oracle.as_ref()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curve::{InitialData, PI, sample_initial};

    fn sphere(jn: usize) -> DiscreteCurve {
        sample_initial(&InitialData::Sphere { radius: 1.0 }, jn).unwrap()
    }

    #[test]
    fn assembly_is_deterministic() {
        let c = sphere(16);
        let a = assemble(&c, 1e-3, 1e-12, 1e-12).unwrap();
        let b = assemble(&c, 1e-3, 1e-12, 1e-12).unwrap();
        for j in 0..=16 {
            assert_eq!(a.diag[j], b.diag[j]);
            assert_eq!(a.lower[j], b.lower[j]);
            assert_eq!(a.upper[j], b.upper[j]);
            assert_eq!(a.rhs[j], b.rhs[j]);
        }
    }

    #[test]
    fn axis_rows_impose_exact_zero() {
        let c = sphere(32);
        let out = step(&c, 1.0 / 32.0, 1e-12, 1e-12).unwrap();
        assert_eq!(out.curve.node(0).x1, 0.0);
        assert_eq!(out.curve.node(32).x1, 0.0);
        assert!(out.curve.node(0).x1.is_sign_positive());
        assert_eq!(out.curve.time(), 1.0 / 32.0);
    }

    #[test]
    fn thomas_and_dense_routes_agree() {
        for jn in [4usize, 8, 16, 33, 64] {
            let c = sphere(jn);
            let sys = assemble(&c, 0.5 / jn as f64, 1e-12, 1e-12).unwrap();
            let (xt, _) = sys.solve_block_thomas().unwrap();
            let xd = sys.solve_dense().unwrap();
            let mut num = 0.0f64;
            let mut den = 0.0f64;
            for j in 0..=jn {
                num += (xt[j] - xd[j]).norm_sq();
                den += xd[j].norm_sq();
            }
            let rel = libm::sqrt(num) / libm::sqrt(den);
            assert!(rel <= 1e-10, "solver routes differ by {rel:e} at J = {jn}");
        }
    }

    #[test]
    fn step_residual_is_tiny() {
        let c = sphere(64);
        let out = step(&c, 1.0 / 64.0, 1e-12, 1e-12).unwrap();
        assert!(out.diagnostics.relative_residual <= 1e-12);
        assert!(!out.diagnostics.dense_fallback);
        assert!(out.diagnostics.min_pivot > 1e-8);
    }

    #[test]
    fn one_step_tracks_exact_sphere() {
        // Local truncation: a single step from exact data stays within
        // O(dt (h^2 + dt)) of the exact solution.
        let jn = 32;
        let dt = 1.0 / 32.0;
        let c = sphere(jn);
        let out = step(&c, dt, 1e-12, 1e-12).unwrap();
        let exact = SphereSolution::unit().sample(jn, dt).unwrap();
        let mut worst = 0.0f64;
        for j in 0..=jn {
            worst = worst.max((out.curve.node(j) - exact.node(j)).norm());
        }
        let scale = dt * ((PI / jn as f64).powi(2) + dt);
        assert!(worst <= 10.0 * scale, "one-step error {worst:e} vs scale {scale:e}");
    }

    #[test]
    fn reflection_equivariance_bit_level() {
        let c = sample_initial(&InitialData::cones_default(), 48).unwrap();
        let dt = 1e-4;
        let direct = step(&c, dt, 1e-12, 1e-12).unwrap().curve;
        let mirrored = step(&c.reflected(), dt, 1e-12, 1e-12).unwrap().curve.reflected();
        for j in 0..=48 {
            let d = (direct.node(j) - mirrored.node(j)).norm();
            assert!(d <= 1e-12, "node {j} differs by {d:e} under reflection");
        }
    }

    #[test]
    fn interior_radius_stays_near_exact() {
        // All interior nodes keep |X_j| within O(h^2 + dt) of the shrinking
        // radius along the whole run.
        let jn = 64;
        let params = SchemeParams::new(jn, DtMode::QuadraticH, 0.125).unwrap();
        let trace = run_initial_data(
            &InitialData::Sphere { radius: 1.0 },
            &params,
            &SnapshotSchedule::None,
            None,
        )
        .unwrap();
        assert_eq!(trace.termination, Termination::ReachedFinalTime);
        let r = SphereSolution::unit().radius_at(trace.final_curve.time()).unwrap();
        let mut worst = 0.0f64;
        for j in 1..jn {
            worst = worst.max((trace.final_curve.node(j).norm() - r).abs());
        }
        assert!(worst <= 5e-4, "radius drift {worst:e}");
    }

    #[test]
    fn sphere_run_past_extinction_fails_gracefully() {
        let params = SchemeParams::new(32, DtMode::ProportionalH, 0.5).unwrap();
        let trace = run_initial_data(
            &InitialData::Sphere { radius: 1.0 },
            &params,
            &SnapshotSchedule::None,
            None,
        )
        .unwrap();
        assert!(matches!(trace.termination, Termination::StepFailed { .. }));
        // The recorded radii shrink toward the end.
        let radii = &trace.min_radii;
        let n = radii.len();
        assert!(n > 5);
        for k in n - 4..n {
            assert!(radii[k] < radii[k - 1], "min radius not shrinking near extinction");
        }
    }

    #[test]
    fn max_steps_is_honoured() {
        let mut params = SchemeParams::new(16, DtMode::QuadraticH, 0.1).unwrap();
        params.max_steps = 7;
        let trace = run_initial_data(
            &InitialData::Sphere { radius: 1.0 },
            &params,
            &SnapshotSchedule::None,
            None,
        )
        .unwrap();
        assert_eq!(trace.termination, Termination::ReachedMaxSteps);
        assert_eq!(trace.steps, 7);
        assert_eq!(trace.times.len(), 8);
    }

    #[test]
    fn snapshot_schedules() {
        let params = SchemeParams::new(16, DtMode::Fixed(1e-3), 0.01).unwrap();
        let every = run_initial_data(
            &InitialData::Sphere { radius: 1.0 },
            &params,
            &SnapshotSchedule::EveryK(5),
            None,
        )
        .unwrap();
        assert_eq!(every.snapshots.len(), 3); // steps 0, 5, 10
        let listed = run_initial_data(
            &InitialData::Sphere { radius: 1.0 },
            &params,
            &SnapshotSchedule::AtTimes(alloc::vec![0.0, 0.0042, 0.01]),
            None,
        )
        .unwrap();
        assert_eq!(listed.snapshots.len(), 3);
        assert!((listed.snapshots[1].time() - 0.005).abs() < 1e-12);
    }

    #[test]
    fn params_validation() {
        assert!(matches!(
            SchemeParams::new(1, DtMode::ProportionalH, 0.1),
            Err(ParamError::TooFewSegments { .. })
        ));
        assert!(matches!(
            SchemeParams::new(8, DtMode::ProportionalH, 0.0),
            Err(ParamError::NonPositiveFinalTime { .. })
        ));
        assert!(matches!(
            SchemeParams::new(8, DtMode::Fixed(0.0), 0.1),
            Err(ParamError::NonPositiveDt { .. })
        ));
        let mut p = SchemeParams::new(8, DtMode::ProportionalH, 0.1).unwrap();
        p.eps_axis = 1e-3;
        assert!(matches!(p.validate(), Err(ParamError::EpsOutOfRange { .. })));
    }

    #[test]
    fn assemble_reports_offending_node() {
        let mut vals = sphere(8).positions().values().to_vec();
        vals[3].x1 = 0.0;
        let c = DiscreteCurve::new(GridFunction::new(vals), 0.0).unwrap();
        match assemble(&c, 1e-3, 1e-12, 1e-12) {
            Err(StepError::AxisPinch { node, .. }) => assert_eq!(node, 3),
            other => panic!("expected axis pinch, got {other:?}"),
        }
    }
}
