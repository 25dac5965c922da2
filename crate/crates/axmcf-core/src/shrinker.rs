//! Rotationally symmetric self-shrinkers by shooting from the axis.
//!
//! A profile x(s) = (x1(s), x2(s)) parametrised by arclength, with tangent
//! angle theta, solves
//!
//!   x1' = cos(theta),  x2' = sin(theta),
//!   theta' = -sin(theta)/x1 + (x1 sin(theta) - x2 cos(theta))/2,
//!
//! starting on the axis at (0, h0) with theta(0) = 0. The right-hand side of
//! theta' has a removable singularity at the axis with theta'(0) = -h0/4.
//! A profile that returns to the axis with theta = -pi (perpendicularly,
//! from the right half plane) closes up to a smooth shrinker surface. The
//! round sphere of radius 2 is the exact solution h0 = 2.
//!
//! The return to the axis is singular off the closing solution: the angle
//! deviation phi = theta + pi obeys phi' ~ phi/x1 on the approach, so almost
//! every shot whips away from vertical and integrating into the axis is
//! hopeless. Shots therefore stop on the section x1 = COLLAR, where closure
//! is measured against the local expansion of the regular touchdown family
//!
//!   x2 = b - (b/8) x1^2,    tan(phi/2) x1 = -(b/8) x1^2 + O(x1^4),
//!
//! through the scaled defect psi = 2 tan(phi/2) + x2 x1 / 4 at the section.
//! psi vanishes on closing profiles and its sign is the side the shot
//! missed on; shots that whip before reaching the section classify by the
//! sign of phi instead, which agrees with the sign of psi.

use alloc::vec::Vec;

use crate::curve::{CurveError, DiscreteCurve};
use crate::grid::GridFunction;
use crate::vec2::Vec2;

/// How a shot from the axis ended.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ShotEnd {
    /// Reached the matching section x1 = COLLAR moving towards the axis;
    /// `height` and `angle` are the state there.
    Section { height: f64, angle: f64 },
    /// Whipped away from vertical near the axis without reaching the
    /// section; `defect` is the signed angle deviation at detection.
    Turned { defect: f64 },
    /// Crossed x1 = 0 before ever getting away from the axis.
    HitAxis { height: f64, angle: f64 },
    /// Ran past the arclength cap without approaching the axis again.
    MaxLength,
    /// The integration produced a non-finite state.
    BlowUp,
}

#[derive(Clone, Debug)]
pub struct ShrinkerShot {
    pub start_height: f64,
    pub end: ShotEnd,
    /// Sampled states (x1, x2) at every accepted step, including both ends.
    pub points: Vec<Vec2>,
    /// Tangent angles matching `points`.
    pub angles: Vec<f64>,
    /// Total arclength of the trace.
    pub length: f64,
    /// Signed closure defect; zero exactly on a closing profile. For Section
    /// ends this is psi (an angle-like quantity), for Turned and HitAxis
    /// ends the angle deviation itself. NaN for MaxLength/BlowUp.
    pub defect: f64,
}

impl ShrinkerShot {
    /// Sign used for bisection: which side of a closing profile the shot
    /// ended on. None for MaxLength/BlowUp ends.
    pub fn closure_sign(&self) -> Option<f64> {
        match self.end {
            ShotEnd::Section { .. } | ShotEnd::Turned { .. } | ShotEnd::HitAxis { .. } => {
                (self.defect != 0.0 && self.defect.is_finite()).then(|| self.defect.signum())
            }
            _ => None,
        }
    }
}

/// Wraps an angle to (-pi, pi].
pub fn wrap_angle(a: f64) -> f64 {
    let two_pi = 2.0 * crate::curve::PI;
    let mut w = a - two_pi * libm::round(a / two_pi);
    if w <= -crate::curve::PI {
        w += two_pi;
    }
    w
}

#[derive(Clone, Copy, Debug)]
struct State {
    x1: f64,
    x2: f64,
    theta: f64,
}

fn rhs(s: State) -> State {
    let (sin_t, cos_t) = libm::sincos(s.theta);
    State {
        x1: cos_t,
        x2: sin_t,
        theta: -sin_t / s.x1 + 0.5 * (s.x1 * sin_t - s.x2 * cos_t),
    }
}

fn rk4(s: State, ds: f64) -> State {
    let add = |a: State, b: State, f: f64| State {
        x1: a.x1 + f * b.x1,
        x2: a.x2 + f * b.x2,
        theta: a.theta + f * b.theta,
    };
    let k1 = rhs(s);
    let k2 = rhs(add(s, k1, 0.5 * ds));
    let k3 = rhs(add(s, k2, 0.5 * ds));
    let k4 = rhs(add(s, k3, ds));
    State {
        x1: s.x1 + ds / 6.0 * (k1.x1 + 2.0 * k2.x1 + 2.0 * k3.x1 + k4.x1),
        x2: s.x2 + ds / 6.0 * (k1.x2 + 2.0 * k2.x2 + 2.0 * k3.x2 + k4.x2),
        theta: s.theta + ds / 6.0 * (k1.theta + 2.0 * k2.theta + 2.0 * k3.theta + k4.theta),
    }
}

/// Arclength cap for a single shot, in units of h0 + 1.
const LENGTH_CAP_FACTOR: f64 = 40.0;
/// The matching section sits at this x1. Small enough for the touchdown
/// expansion (error O(COLLAR^3) in the recovered start height), large
/// enough that the integration never sees the 1/x1 blow-up.
const COLLAR: f64 = 0.01;
/// A shot is "near the axis again" below this x1; leaving this band arms
/// the return detectors.
const AXIS_WINDOW: f64 = 0.25;
/// Within the window, an angle defect beyond this is a committed whip: the
/// tangent cannot become horizontal (a turning point) without the defect
/// passing pi/2 first.
const TURN_DEFECT: f64 = 1.5707963267948966;

/// Scaled closure defect at the section, zero for a regular touchdown.
fn section_defect(state: State) -> f64 {
    let phi = wrap_angle(state.theta + crate::curve::PI);
    2.0 * libm::tan(0.5 * phi) + 0.25 * state.x2 * state.x1
}

/// Integrates one profile from (0, h0) with fixed step RK4. The first step
/// leaves the axis by the series expansion
/// x1 = s, x2 = h0 - (h0/8) s^2, theta = -(h0/4) s, which resolves the
/// removable singularity of theta' at x1 = 0.
pub fn shoot(start_height: f64, ds: f64) -> ShrinkerShot {
    assert!(start_height > 0.0 && start_height.is_finite(), "start height must be positive");
    assert!(ds > 0.0 && ds < 0.1, "step length out of range");
    let h0 = start_height;
    let cap = LENGTH_CAP_FACTOR * (h0 + 1.0);
    let max_steps = (cap / ds) as usize + 2;

    let mut points = Vec::with_capacity(max_steps / 8 + 2);
    let mut angles = Vec::with_capacity(max_steps / 8 + 2);
    points.push(Vec2::new(0.0, h0));
    angles.push(0.0);

    let mut s = State {
        x1: ds,
        x2: h0 - h0 / 8.0 * ds * ds,
        theta: -h0 / 4.0 * ds,
    };
    let mut len = ds;
    points.push(Vec2::new(s.x1, s.x2));
    angles.push(s.theta);

    // The return detectors stay off until the launch has left the axis band.
    let mut armed = false;
    for _ in 0..max_steps {
        let next = rk4(s, ds);
        len += ds;
        if !(next.x1.is_finite() && next.x2.is_finite() && next.theta.is_finite()) {
            return ShrinkerShot {
                start_height: h0,
                end: ShotEnd::BlowUp,
                points,
                angles,
                length: len,
                defect: f64::NAN,
            };
        }
        if armed && next.x1 <= COLLAR {
            // Land exactly on the section by bisecting the step fraction;
            // x1 decreases monotonically through the collar band.
            let mut lo = 0.0f64;
            let mut hi = ds;
            let mut hit = next;
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                let probe = rk4(s, mid);
                if probe.x1 > COLLAR {
                    lo = mid;
                } else {
                    hi = mid;
                    hit = probe;
                }
                if hi - lo <= 1e-16 {
                    break;
                }
            }
            points.push(Vec2::new(hit.x1, hit.x2));
            angles.push(hit.theta);
            return ShrinkerShot {
                start_height: h0,
                end: ShotEnd::Section { height: hit.x2, angle: hit.theta },
                points,
                angles,
                length: len - ds + hi,
                defect: section_defect(hit),
            };
        }
        if next.x1 <= 0.0 {
            // Only reachable before arming: the launch bent straight back.
            let frac = s.x1 / (s.x1 - next.x1);
            let height = s.x2 + frac * (next.x2 - s.x2);
            let angle = s.theta + frac * (next.theta - s.theta);
            points.push(Vec2::new(0.0, height));
            angles.push(angle);
            let defect = wrap_angle(angle + crate::curve::PI);
            return ShrinkerShot {
                start_height: h0,
                end: ShotEnd::HitAxis { height, angle },
                points,
                angles,
                length: len - ds + frac * ds,
                defect,
            };
        }
        points.push(Vec2::new(next.x1, next.x2));
        angles.push(next.theta);
        if next.x1 > AXIS_WINDOW {
            armed = true;
        } else if armed {
            let defect = wrap_angle(next.theta + crate::curve::PI);
            if libm::fabs(defect) >= TURN_DEFECT {
                // Committed to whipping away without reaching the section.
                return ShrinkerShot {
                    start_height: h0,
                    end: ShotEnd::Turned { defect },
                    points,
                    angles,
                    length: len,
                    defect,
                };
            }
        }
        s = next;
    }
    ShrinkerShot {
        start_height: h0,
        end: ShotEnd::MaxLength,
        points,
        angles,
        length: len,
        defect: f64::NAN,
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum ShrinkerError {
    /// The two bracket ends do not classify to opposite sides.
    NoSignChange { lo: f64, hi: f64 },
    /// A bisection iterate produced an unclassifiable shot.
    Unclassifiable { start_height: f64 },
    /// Bisection converged but the closure defect stayed above tolerance.
    NotClosed { start_height: f64, defect: f64 },
    /// The closed profile has the wrong number of self-intersections.
    WrongIntersections { found: usize, wanted: usize },
    Curve(CurveError),
    BadParameter { what: &'static str },
}

impl core::fmt::Display for ShrinkerError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            ShrinkerError::NoSignChange { lo, hi } => {
                write!(f, "no closure sign change over [{lo}, {hi}]")
            }
            ShrinkerError::Unclassifiable { start_height } => {
                write!(f, "shot from {start_height} cannot be classified")
            }
            ShrinkerError::NotClosed { start_height, defect } => {
                write!(f, "profile from {start_height} left closure defect {defect:e}")
            }
            ShrinkerError::WrongIntersections { found, wanted } => {
                write!(f, "profile has {found} self-intersections, wanted {wanted}")
            }
            ShrinkerError::Curve(e) => write!(f, "{e}"),
            ShrinkerError::BadParameter { what } => write!(f, "bad parameter: {what}"),
        }
    }
}

impl From<CurveError> for ShrinkerError {
    fn from(e: CurveError) -> Self {
        ShrinkerError::Curve(e)
    }
}

/// A closed shrinker profile, resampled to a uniform parameter grid.
#[derive(Clone, Debug)]
pub struct ShrinkerProfile {
    pub start_height: f64,
    /// Height where the profile meets the axis again (negative for the
    /// sphere-like profiles).
    pub end_height: f64,
    pub curve: DiscreteCurve,
    pub closure_defect: f64,
    pub intersections: usize,
    pub bisection_steps: usize,
}

/// Scans start heights and returns the sub-brackets of `range` where the
/// closure sign flips. `samples` shots are taken at uniform spacing.
pub fn scan_brackets(range: (f64, f64), samples: usize, ds: f64) -> Vec<(f64, f64)> {
    assert!(samples >= 2 && range.0 > 0.0 && range.1 > range.0, "bad scan range");
    let mut out = Vec::new();
    let step = (range.1 - range.0) / (samples - 1) as f64;
    let mut prev: Option<(f64, f64)> = None;
    for k in 0..samples {
        let h0 = range.0 + step * k as f64;
        let sign = shoot(h0, ds).closure_sign();
        if let (Some((ph, ps)), Some(sg)) = (prev, sign) {
            if ps * sg < 0.0 {
                out.push((ph, h0));
            }
        }
        prev = sign.map(|sg| (h0, sg));
    }
    out
}

/// Extends a section-terminated trace down to the axis along the regular
/// touchdown expansion and returns the closed polyline.
fn closed_polyline(shot: &ShrinkerShot, ds: f64) -> Result<Vec<Vec2>, ShrinkerError> {
    let height = match shot.end {
        ShotEnd::Section { height, .. } => height,
        _ => return Err(ShrinkerError::BadParameter { what: "shot did not reach the section" }),
    };
    let b = height / (1.0 - COLLAR * COLLAR / 8.0);
    let mut pts = shot.points.clone();
    let steps = (COLLAR / ds) as usize + 1;
    for k in 1..steps {
        let x1 = COLLAR * (1.0 - k as f64 / steps as f64);
        pts.push(Vec2::new(x1, b - b / 8.0 * x1 * x1));
    }
    pts.push(Vec2::new(0.0, b));
    Ok(pts)
}

/// Resamples a polyline to `segments + 1` nodes, uniform in arclength.
fn resample(pts: &[Vec2], segments: usize) -> Result<DiscreteCurve, ShrinkerError> {
    if pts.len() < 3 {
        return Err(ShrinkerError::BadParameter { what: "trace too short to resample" });
    }
    let mut cum = Vec::with_capacity(pts.len());
    cum.push(0.0);
    for w in pts.windows(2) {
        let d = (w[1] - w[0]).norm();
        cum.push(cum.last().unwrap() + d);
    }
    let total = *cum.last().unwrap();
    if !(total > 0.0) {
        return Err(ShrinkerError::BadParameter { what: "trace too short to resample" });
    }
    let mut vals = Vec::with_capacity(segments + 1);
    let mut seg = 0usize;
    for j in 0..=segments {
        let target = total * j as f64 / segments as f64;
        while seg + 2 < cum.len() && cum[seg + 1] < target {
            seg += 1;
        }
        let span = cum[seg + 1] - cum[seg];
        let frac = if span > 0.0 { (target - cum[seg]) / span } else { 0.0 };
        vals.push(pts[seg] + (pts[seg + 1] - pts[seg]) * frac);
    }
    vals[0] = Vec2::new(0.0, pts[0].x2);
    let last = *pts.last().unwrap();
    vals[segments] = Vec2::new(0.0, last.x2);
    Ok(DiscreteCurve::new(GridFunction::new(vals), 0.0)?)
}

/// Bisects the closure sign over `bracket` and returns the closed profile,
/// whatever its self-intersection count.
pub fn bisect_profile(
    bracket: (f64, f64),
    ds: f64,
    segments: usize,
) -> Result<ShrinkerProfile, ShrinkerError> {
    let (mut lo, mut hi) = bracket;
    if !(lo > 0.0 && hi > lo) {
        return Err(ShrinkerError::BadParameter { what: "bracket must satisfy 0 < lo < hi" });
    }
    let classify = |h0: f64| -> Result<f64, ShrinkerError> {
        shoot(h0, ds)
            .closure_sign()
            .ok_or(ShrinkerError::Unclassifiable { start_height: h0 })
    };
    let sign_lo = classify(lo)?;
    let sign_hi = classify(hi)?;
    if sign_lo * sign_hi >= 0.0 {
        return Err(ShrinkerError::NoSignChange { lo, hi });
    }

    let mut steps = 0usize;
    while hi - lo > 1e-13 * hi.max(1.0) && steps < 200 {
        let mid = 0.5 * (lo + hi);
        let sign_mid = classify(mid)?;
        if sign_mid == sign_lo {
            lo = mid;
        } else {
            hi = mid;
        }
        steps += 1;
    }

    let h0 = 0.5 * (lo + hi);
    let shot = shoot(h0, ds);
    let defect = shot.defect;
    // The defect passes through zero at the root; at the resolved bracket it
    // must be far below any whipped shot's.
    if !(libm::fabs(defect) <= 1e-3) {
        return Err(ShrinkerError::NotClosed { start_height: h0, defect });
    }
    let pts = closed_polyline(&shot, ds)?;
    let end_height = pts.last().unwrap().x2;
    let curve = resample(&pts, segments)?;
    let found = curve.self_intersections();
    Ok(ShrinkerProfile {
        start_height: h0,
        end_height,
        curve,
        closure_defect: defect,
        intersections: found,
        bisection_steps: steps,
    })
}

/// Bisects the closure sign over `bracket` and returns the closed profile,
/// requiring exactly `target_intersections` self-intersections.
pub fn find_profile(
    target_intersections: usize,
    bracket: (f64, f64),
    ds: f64,
    segments: usize,
) -> Result<ShrinkerProfile, ShrinkerError> {
    let profile = bisect_profile(bracket, ds, segments)?;
    if profile.intersections != target_intersections {
        return Err(ShrinkerError::WrongIntersections {
            found: profile.intersections,
            wanted: target_intersections,
        });
    }
    Ok(profile)
}

/// Pointwise defect of the shrinker equation H + (x . nu)/2 = 0 over the
/// interior nodes, using the discrete mean curvature and normal.
pub fn shrinker_residual(curve: &DiscreteCurve) -> f64 {
    let mut worst = 0.0f64;
    for j in 1..curve.segments() {
        let nu = curve.normal(j);
        let x = curve.positions().get(j);
        let r = curve.mean_curvature(j) + 0.5 * x.dot(nu);
        worst = worst.max(libm::fabs(r));
    }
    worst
}
