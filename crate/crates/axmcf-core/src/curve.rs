//! Discrete generating curves and initial data families.
//!
//! A curve is a grid function of nodes in the (x1, x2) half plane together
//! with a time stamp. Both endpoints sit exactly on the rotation axis
//! (x1 = 0 bit-exact); rotating the curve about the x2-axis produces the
//! genus-0 surface being evolved.
//!
//! The limacon family deliberately crosses the axis for amplitudes above 1:
//! its polar radius changes sign, the polyline passes through the origin
//! region twice and the rotated surface self-intersects around the equator.
//! Embeddedness (x1 >= 0) is therefore only enforced for families that
//! promise it (sphere, cones).

use alloc::vec::Vec;

use crate::grid::GridFunction;
use crate::vec2::Vec2;

pub const PI: f64 = core::f64::consts::PI;

#[derive(Clone, Debug, PartialEq)]
pub enum CurveError {
    /// Exact sphere solution queried at or past its extinction time.
    Extinct { time: f64 },
    TooFewNodes { count: usize },
    NonFinite { node: usize },
    EndpointOffAxis { node: usize, x1: f64 },
    /// A family that promises an embedded curve produced x1 < 0.
    NegativeRadius { node: usize, x1: f64 },
    BadParameter { what: &'static str },
}

impl core::fmt::Display for CurveError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            CurveError::Extinct { time } => write!(f, "exact sphere is extinct at t = {time}"),
            CurveError::TooFewNodes { count } => write!(f, "curve needs at least 3 nodes, got {count}"),
            CurveError::NonFinite { node } => write!(f, "non-finite coordinates at node {node}"),
            CurveError::EndpointOffAxis { node, x1 } => {
                write!(f, "endpoint node {node} off the rotation axis (x1 = {x1:e})")
            }
            CurveError::NegativeRadius { node, x1 } => {
                write!(f, "node {node} has negative distance from the axis (x1 = {x1:e})")
            }
            CurveError::BadParameter { what } => write!(f, "bad family parameter: {what}"),
        }
    }
}

/// Open curve over [0,1] with endpoints on the rotation axis.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscreteCurve {
    positions: GridFunction,
    time: f64,
}

impl DiscreteCurve {
    /// Validates node count, finiteness and bit-exact on-axis endpoints.
    pub fn new(positions: GridFunction, time: f64) -> Result<Self, CurveError> {
        let jn = positions.segments();
        for (j, v) in positions.values().iter().enumerate() {
            if !v.is_finite() {
                return Err(CurveError::NonFinite { node: j });
            }
        }
        for j in [0, jn] {
            let x1 = positions.get(j).x1;
            if x1 != 0.0 {
                return Err(CurveError::EndpointOffAxis { node: j, x1 });
            }
        }
        Ok(DiscreteCurve { positions, time })
    }

    pub fn positions(&self) -> &GridFunction {
        &self.positions
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn segments(&self) -> usize {
        self.positions.segments()
    }

    pub fn spacing(&self) -> f64 {
        self.positions.spacing()
    }

    pub fn node(&self, j: usize) -> Vec2 {
        self.positions.get(j)
    }

    /// Area of the surface of revolution, by the first-order quadrature
    /// 2 pi h sum_j (x_j . e1) |Dx_j| over the backward differences.
    pub fn surface_area(&self) -> f64 {
        let h = self.spacing();
        let mut s = 0.0;
        for j in 1..=self.segments() {
            s += self.node(j).x1 * self.positions.backward_diff(j).norm();
        }
        2.0 * PI * h * s
    }

    /// Smallest distance from the axis over the interior nodes (signed:
    /// negative when the curve has crossed the axis).
    pub fn min_radius(&self) -> f64 {
        (1..self.segments()).map(|j| self.node(j).x1).fold(f64::INFINITY, f64::min)
    }

    /// Number of transversal crossings between non-adjacent segments of the
    /// polyline. Orientation tests with near-ties (relative magnitude below
    /// 1e-12) are treated as non-transversal and skipped.
    pub fn self_intersections(&self) -> usize {
        let pts = self.positions.values();
        let n = pts.len() - 1; // segments
        let mut count = 0;
        for i in 0..n {
            for k in (i + 2)..n {
                if segments_cross(pts[i], pts[i + 1], pts[k], pts[k + 1]) {
                    count += 1;
                }
            }
        }
        count
    }

    /// Unit normal at interior node j: clockwise-rotated tangent from the
    /// central difference.
    pub fn normal(&self, j: usize) -> Vec2 {
        let d = self.positions.central_diff(j);
        d.perp() / d.norm()
    }

    /// Profile curvature at interior node j, (D2x . nu) / |D1x|^2.
    pub fn profile_curvature(&self, j: usize) -> f64 {
        let d1 = self.positions.central_diff(j);
        let d2 = self.positions.second_diff(j);
        d2.dot(d1.perp()) / (d1.norm() * d1.norm_sq())
    }

    /// Sum of the principal curvatures of the surface of revolution at
    /// interior node j: profile curvature minus the rotational term
    /// (nu . e1)/(x . e1). Finite only away from the axis.
    pub fn mean_curvature(&self, j: usize) -> f64 {
        let nu = self.normal(j);
        self.profile_curvature(j) - nu.x1 / self.node(j).x1
    }

    pub fn mean_curvatures(&self) -> Vec<f64> {
        (1..self.segments()).map(|j| self.mean_curvature(j)).collect()
    }

    /// Mirror image across the equatorial plane (x2 negated).
    pub fn reflected(&self) -> DiscreteCurve {
        let vals = self.positions.values().iter().map(|v| Vec2::new(v.x1, -v.x2)).collect();
        DiscreteCurve { positions: GridFunction::new(vals), time: self.time }
    }
}

/// Orientation of c relative to the segment a->b, with ties (relative size
/// below 1e-12) flattened to zero.
fn orientation(a: Vec2, b: Vec2, c: Vec2) -> i8 {
    let d = (b - a).cross(c - a);
    let scale = (b - a).norm() * ((c - a).norm() + (c - b).norm());
    if libm::fabs(d) <= 1e-12 * scale {
        0
    } else if d > 0.0 {
        1
    } else {
        -1
    }
}

/// Strict transversal crossing of the open segments pq and rs.
fn segments_cross(p: Vec2, q: Vec2, r: Vec2, s: Vec2) -> bool {
    let o1 = orientation(p, q, r);
    let o2 = orientation(p, q, s);
    let o3 = orientation(r, s, p);
    let o4 = orientation(r, s, q);
    o1 * o2 < 0 && o3 * o4 < 0
}

/// Exact shrinking sphere: radius (r0^2 - 4t)^{1/2}, extinct at t = r0^2/4.
/// The generating curve is radius(t) * (sin(pi rho), cos(pi rho)).
#[derive(Clone, Copy, Debug)]
pub struct SphereSolution {
    initial_radius: f64,
}

impl SphereSolution {
    pub fn new(initial_radius: f64) -> Result<Self, CurveError> {
        if !(initial_radius > 0.0) || !initial_radius.is_finite() {
            return Err(CurveError::BadParameter { what: "sphere radius must be positive and finite" });
        }
        Ok(SphereSolution { initial_radius })
    }

    pub fn unit() -> Self {
        SphereSolution { initial_radius: 1.0 }
    }

    pub fn extinction_time(&self) -> f64 {
        0.25 * self.initial_radius * self.initial_radius
    }

    pub fn radius_at(&self, t: f64) -> Result<f64, CurveError> {
        let sq = self.initial_radius * self.initial_radius - 4.0 * t;
        if sq <= 0.0 {
            return Err(CurveError::Extinct { time: t });
        }
        Ok(libm::sqrt(sq))
    }

    pub fn point(&self, rho: f64, t: f64) -> Result<Vec2, CurveError> {
        let r = self.radius_at(t)?;
        Ok(Vec2::new(r * libm::sin(PI * rho), r * libm::cos(PI * rho)))
    }

    /// Exact solution sampled on the J+1 node grid, endpoints snapped to the
    /// axis (sin(pi) rounds away from zero).
    pub fn sample(&self, segments: usize, t: f64) -> Result<DiscreteCurve, CurveError> {
        let r = self.radius_at(t)?;
        let mut g = GridFunction::from_fn(segments, |q| {
            Vec2::new(r * libm::sin(PI * q), r * libm::cos(PI * q))
        });
        let jn = g.segments();
        g.values_mut()[0] = Vec2::new(0.0, r);
        g.values_mut()[jn] = Vec2::new(0.0, -r);
        DiscreteCurve::new(g, t)
    }
}

/// Initial data families.
#[derive(Clone, Debug, PartialEq)]
pub enum InitialData {
    /// Round sphere of the given radius.
    Sphere { radius: f64 },
    /// Polar profile r(phi) = 1 + amplitude * cos(2 phi), phi = pi rho.
    /// Amplitudes above 1 make the radius change sign: the curve runs through
    /// the origin twice and the rotated surface carries an equatorial loop
    /// (a torus inside a sphere).
    Limacon { amplitude: f64 },
    /// Piecewise profile with straight flanks meeting the axis at the given
    /// contact angle: an outward cone at the top apex, an inward one at the
    /// bottom apex, joined by a tangent-continuous pair of circular arcs.
    Cones { contact_angle_deg: f64, apex_heights: (f64, f64) },
    /// Explicit nodes (J+1 of them), e.g. a self-shrinker profile read back
    /// from a snapshot.
    Nodes(Vec<Vec2>),
}

impl InitialData {
    pub fn cones_default() -> Self {
        InitialData::Cones { contact_angle_deg: 45.0, apex_heights: (1.4, -0.5) }
    }
}

/// Samples the family on the J+1 node grid at time 0.
pub fn sample_initial(data: &InitialData, segments: usize) -> Result<DiscreteCurve, CurveError> {
    if segments < 2 {
        return Err(CurveError::TooFewNodes { count: segments + 1 });
    }
    match data {
        InitialData::Sphere { radius } => SphereSolution::new(*radius)?.sample(segments, 0.0),
        InitialData::Limacon { amplitude } => sample_limacon(*amplitude, segments),
        InitialData::Cones { contact_angle_deg, apex_heights } => {
            let c = sample_cones(*contact_angle_deg, *apex_heights, segments)?;
            require_embedded(&c)?;
            Ok(c)
        }
        InitialData::Nodes(nodes) => {
            if nodes.len() != segments + 1 {
                return Err(CurveError::BadParameter { what: "node count does not match the requested grid" });
            }
            DiscreteCurve::new(GridFunction::new(nodes.clone()), 0.0)
        }
    }
}

fn require_embedded(c: &DiscreteCurve) -> Result<(), CurveError> {
    for j in 1..c.segments() {
        let x1 = c.node(j).x1;
        if x1 < 0.0 {
            return Err(CurveError::NegativeRadius { node: j, x1 });
        }
    }
    Ok(())
}

fn sample_limacon(amplitude: f64, segments: usize) -> Result<DiscreteCurve, CurveError> {
    if !amplitude.is_finite() || amplitude <= -1.0 {
        return Err(CurveError::BadParameter { what: "limacon amplitude must be finite and above -1" });
    }
    let mut g = GridFunction::from_fn(segments, |q| {
        let phi = PI * q;
        let r = 1.0 + amplitude * libm::cos(2.0 * phi);
        Vec2::new(r * libm::sin(phi), r * libm::cos(phi))
    });
    let jn = g.segments();
    g.values_mut()[0] = Vec2::new(0.0, 1.0 + amplitude);
    g.values_mut()[jn] = Vec2::new(0.0, -(1.0 + amplitude));
    DiscreteCurve::new(g, 0.0)
}

/// One circular arc or straight piece of the cones profile.
enum Piece {
    Line { start: Vec2, dir: Vec2, len: f64 },
    Arc { center: Vec2, start: Vec2, sweep: f64, len: f64 },
}

impl Piece {
    fn len(&self) -> f64 {
        match self {
            Piece::Line { len, .. } | Piece::Arc { len, .. } => *len,
        }
    }

    fn at(&self, s: f64) -> Vec2 {
        match self {
            Piece::Line { start, dir, .. } => *start + *dir * s,
            Piece::Arc { center, start, sweep, len } => {
                let ang = sweep * s / len;
                let rel = *start - *center;
                let (sin, cos) = (libm::sin(ang), libm::cos(ang));
                *center + Vec2::new(cos * rel.x1 - sin * rel.x2, sin * rel.x1 + cos * rel.x2)
            }
        }
    }
}

/// Tangent-continuous pair of arcs from (p0, t0) to (p1, t1), the classical
/// biarc with equal chord parameters: the joint tangent tm and joint m solve
/// m - p0 = lam (t0 + tm), p1 - m = lam (tm + t1) with a common lam > 0.
fn biarc(p0: Vec2, t0: Vec2, p1: Vec2, t1: Vec2) -> Result<[Piece; 2], CurveError> {
    let v = p1 - p0;
    let tsum = t0 + t1;
    let dot = t0.dot(t1);
    let lam = if dot >= 1.0 - 1e-14 {
        let vt = v.dot(tsum);
        if vt <= 0.0 {
            return Err(CurveError::BadParameter { what: "cone profile tangents do not admit a blend" });
        }
        v.norm_sq() / (2.0 * vt)
    } else {
        let vt = v.dot(tsum);
        let disc = vt * vt + 2.0 * (1.0 - dot) * v.norm_sq();
        (-vt + libm::sqrt(disc)) / (2.0 * (1.0 - dot))
    };
    if !(lam > 0.0) || !lam.is_finite() {
        return Err(CurveError::BadParameter { what: "cone profile blend is degenerate" });
    }
    let tm = (v - tsum * lam) / (2.0 * lam);
    let m = p0 + (t0 + tm) * lam;
    Ok([arc_between(p0, t0, m)?, arc_between(m, tm, p1)?])
}

/// Arc (or line) from a with unit tangent ta to b; the chord of a circular
/// arc makes equal angles with the end tangents, so the sweep is twice the
/// tangent-to-chord angle.
fn arc_between(a: Vec2, ta: Vec2, b: Vec2) -> Result<Piece, CurveError> {
    let chord = b - a;
    let clen = chord.norm();
    if !(clen > 0.0) {
        return Err(CurveError::BadParameter { what: "cone profile blend collapsed" });
    }
    let sweep = 2.0 * libm::atan2(ta.cross(chord), ta.dot(chord));
    if libm::fabs(sweep) < 1e-9 {
        return Ok(Piece::Line { start: a, dir: chord / clen, len: clen });
    }
    let radius = clen / (2.0 * libm::sin(0.5 * sweep));
    // Center sits along the left normal, signed by the sweep direction.
    let left = Vec2::new(-ta.x2, ta.x1);
    let center = a + left * radius;
    let len = libm::fabs(radius * sweep);
    Ok(Piece::Arc { center, start: a, sweep, len })
}

fn sample_cones(
    angle_deg: f64,
    (top, bottom): (f64, f64),
    segments: usize,
) -> Result<DiscreteCurve, CurveError> {
    if !(angle_deg > 0.0 && angle_deg < 90.0) {
        return Err(CurveError::BadParameter { what: "cone contact angle must lie strictly between 0 and 90 degrees" });
    }
    if !(top > bottom) || !top.is_finite() || !bottom.is_finite() {
        return Err(CurveError::BadParameter { what: "cone apex heights must be finite with top above bottom" });
    }
    let alpha = angle_deg * PI / 180.0;
    let (sin_a, cos_a) = (libm::sin(alpha), libm::cos(alpha));
    // Straight flank length, a fixed fraction of the apex separation, short
    // enough that the blend never reaches back to the axis.
    let flank = 0.35 * (top - bottom);
    let apex_top = Vec2::new(0.0, top);
    let apex_bottom = Vec2::new(0.0, bottom);
    let dir_top = Vec2::new(sin_a, -cos_a);
    let dir_bottom = Vec2::new(-sin_a, cos_a);
    let p0 = apex_top + dir_top * flank;
    let p1 = apex_bottom - dir_bottom * flank;
    let [arc0, arc1] = biarc(p0, dir_top, p1, dir_bottom)?;
    let pieces = [
        Piece::Line { start: apex_top, dir: dir_top, len: flank },
        arc0,
        arc1,
        Piece::Line { start: p1, dir: dir_bottom, len: flank },
    ];
    let total: f64 = pieces.iter().map(Piece::len).sum();
    let mut values = Vec::with_capacity(segments + 1);
    for j in 0..=segments {
        let mut s = total * j as f64 / segments as f64;
        let mut point = apex_bottom;
        for (k, piece) in pieces.iter().enumerate() {
            if s <= piece.len() || k == pieces.len() - 1 {
                point = piece.at(s.min(piece.len()));
                break;
            }
            s -= piece.len();
        }
        values.push(point);
    }
    values[0] = apex_top;
    values[segments] = apex_bottom;
    DiscreteCurve::new(GridFunction::new(values), 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sphere_sample_nodes_have_exact_radius() {
        // First quadrant values of the J=4 unit sphere: (0,1), (s,s), (1,0),
        // (s,-s), (0,-1) with s = sqrt(2)/2.
        let c = sample_initial(&InitialData::Sphere { radius: 1.0 }, 4).unwrap();
        let s = libm::sqrt(2.0) / 2.0;
        let expect = [
            Vec2::new(0.0, 1.0),
            Vec2::new(s, s),
            Vec2::new(1.0, 0.0),
            Vec2::new(s, -s),
            Vec2::new(0.0, -1.0),
        ];
        for (j, e) in expect.iter().enumerate() {
            assert!((c.node(j) - *e).norm() < 1e-15, "node {j}: {:?} vs {:?}", c.node(j), e);
        }
        for j in 0..=4 {
            assert!((c.node(j).norm() - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn sphere_exact_rejects_extinction() {
        let sol = SphereSolution::unit();
        assert!(sol.point(0.3, 0.2499).is_ok());
        assert!(matches!(sol.point(0.3, 0.25), Err(CurveError::Extinct { .. })));
        assert!(matches!(sol.point(0.3, 0.3), Err(CurveError::Extinct { .. })));
    }

    #[test]
    fn sphere_area_quadrature_second_order() {
        // Quadrature error against 4 pi r^2 drops at second order in h.
        let sol = SphereSolution::unit();
        let exact = 4.0 * PI;
        let mut prev = f64::NAN;
        for jn in [64usize, 128, 256, 512] {
            let area = sol.sample(jn, 0.0).unwrap().surface_area();
            let err = (area - exact).abs();
            if !prev.is_nan() {
                let eoc = libm::log2(prev / err);
                assert!(eoc >= 1.9, "area quadrature order {eoc} at J = {jn}");
            }
            prev = err;
        }
        let at512 = sol.sample(512, 0.0).unwrap().surface_area();
        assert!((at512 - exact).abs() <= exact * 1e-4);
    }

    #[test]
    fn limacon_crosses_axis_and_self_intersects() {
        let c = sample_initial(&InitialData::Limacon { amplitude: 1.5 }, 1024).unwrap();
        assert_eq!(c.node(0), Vec2::new(0.0, 2.5));
        assert_eq!(c.node(1024), Vec2::new(0.0, -2.5));
        assert!(c.min_radius() < 0.0, "amplitude 1.5 must dip across the axis");
        let hits = c.self_intersections();
        assert!(hits >= 1, "expected an equatorial loop, found {hits} crossings");
        // The crossing sits near the equator plane: find it coarsely.
        let mid = c.node(512);
        assert!(mid.x1 < 0.0 && mid.x2.abs() < 1e-12);
    }

    #[test]
    fn limacon_unit_amplitude_stays_nonnegative() {
        let c = sample_initial(&InitialData::Limacon { amplitude: 0.5 }, 256).unwrap();
        assert!(c.min_radius() >= 0.0);
        assert_eq!(c.self_intersections(), 0);
    }

    #[test]
    fn figure_eight_polyline_counts_one_crossing() {
        let nodes = alloc::vec![
            Vec2::new(0.0, 1.0),
            Vec2::new(2.0, -1.0),
            Vec2::new(2.0, 1.0),
            Vec2::new(0.0, -1.0),
        ];
        let c = sample_initial(&InitialData::Nodes(nodes), 3).unwrap();
        assert_eq!(c.self_intersections(), 1);
    }

    #[test]
    fn adjacent_segments_do_not_count() {
        let c = sample_initial(&InitialData::Sphere { radius: 2.0 }, 64).unwrap();
        assert_eq!(c.self_intersections(), 0);
    }

    #[test]
    fn cones_respect_contact_angle_and_apexes() {
        let c = sample_initial(&InitialData::cones_default(), 512).unwrap();
        assert_eq!(c.node(0), Vec2::new(0.0, 1.4));
        assert_eq!(c.node(512), Vec2::new(0.0, -0.5));
        assert!(c.min_radius() > 0.0);
        // First and last chords at 45 degrees to the axis.
        let d0 = c.node(1) - c.node(0);
        let d1 = c.node(512) - c.node(511);
        let angle0 = libm::atan2(d0.x1, -d0.x2) * 180.0 / PI;
        assert!((angle0 - 45.0).abs() < 1e-9, "top contact angle {angle0}");
        // Bottom flank heads up-left into the apex.
        let a1 = libm::atan2(-d1.x1, d1.x2) * 180.0 / PI;
        assert!((a1 - 45.0).abs() < 1e-9, "bottom contact angle {a1}");
        // Arclength-uniform: chord lengths agree to a few percent.
        let lens: Vec<f64> = (1..=512).map(|j| (c.node(j) - c.node(j - 1)).norm()).collect();
        let (min, max) = lens.iter().fold((f64::MAX, 0.0f64), |(a, b), &l| (a.min(l), b.max(l)));
        assert!(max / min < 1.001, "chord spread {min}..{max}");
    }

    #[test]
    fn cones_reject_bad_parameters() {
        assert!(sample_initial(&InitialData::Cones { contact_angle_deg: 0.0, apex_heights: (1.0, -1.0) }, 8).is_err());
        assert!(sample_initial(&InitialData::Cones { contact_angle_deg: 95.0, apex_heights: (1.0, -1.0) }, 8).is_err());
        assert!(sample_initial(&InitialData::Cones { contact_angle_deg: 45.0, apex_heights: (-1.0, 1.0) }, 8).is_err());
    }

    #[test]
    fn custom_nodes_validate_endpoints() {
        let bad = InitialData::Nodes(alloc::vec![
            Vec2::new(0.1, 1.0),
            Vec2::new(1.0, 0.0),
            Vec2::new(0.0, -1.0),
        ]);
        assert!(matches!(sample_initial(&bad, 2), Err(CurveError::EndpointOffAxis { node: 0, .. })));
    }

    #[test]
    fn mean_curvature_of_sphere_is_two_over_radius() {
        for radius in [1.0f64, 2.0] {
            let c = sample_initial(&InitialData::Sphere { radius }, 128).unwrap();
            for j in [1usize, 32, 64, 100, 127] {
                let hj = c.mean_curvature(j);
                assert!(
                    (hj - 2.0 / radius).abs() < 5e-4 / radius,
                    "H at node {j} = {hj}, want {}",
                    2.0 / radius
                );
            }
        }
    }

    #[test]
    fn reflection_flips_heights() {
        let c = sample_initial(&InitialData::cones_default(), 32).unwrap();
        let r = c.reflected();
        for j in 0..=32 {
            assert_eq!(r.node(j).x1, c.node(j).x1);
            assert_eq!(r.node(j).x2, -c.node(j).x2);
        }
    }
}
