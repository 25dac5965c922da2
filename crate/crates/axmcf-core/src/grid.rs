//! Uniform grid functions on [0,1] and their difference calculus.
//!
//! A grid function holds J+1 planar values at the nodes q_j = j*h, h = 1/J.
//! The difference operators are
//!
//!   backward   (v_j - v_{j-1}) / h        for 1 <= j <= J
//!   forward    (v_{j+1} - v_j) / h        for 0 <= j <= J-1
//!   central    (v_{j+1} - v_{j-1}) / (2h) for 1 <= j <= J-1
//!   second     (v_{j+1} - 2 v_j + v_{j-1}) / h^2, same range as central
//!
//! and the mesh-dependent norms are the trapezoidal l2 norm (half weights at
//! the endpoints), the backward-difference h1 seminorm, their combination,
//! and the second-difference h2 seminorm. Sums are accumulated in plain
//! order; the magnitudes in play never need compensation.

use alloc::vec::Vec;

use crate::vec2::Vec2;

#[derive(Clone, Debug, PartialEq)]
pub struct GridFunction {
    values: Vec<Vec2>,
    h: f64,
}

impl GridFunction {
    /// Wraps J+1 nodal values; panics if fewer than 3 are supplied (J >= 2).
    pub fn new(values: Vec<Vec2>) -> Self {
        assert!(values.len() >= 3, "grid function needs J >= 2, got {} values", values.len());
        let h = 1.0 / (values.len() - 1) as f64;
        GridFunction { values, h }
    }

    pub fn from_fn(segments: usize, f: impl Fn(f64) -> Vec2) -> Self {
        assert!(segments >= 2, "grid needs J >= 2, got J = {segments}");
        let h = 1.0 / segments as f64;
        let values = (0..=segments).map(|j| f(j as f64 * h)).collect();
        GridFunction { values, h }
    }

    /// Number of segments J.
    pub fn segments(&self) -> usize {
        self.values.len() - 1
    }

    pub fn spacing(&self) -> f64 {
        self.h
    }

    /// Node coordinate q_j = j*h.
    pub fn node(&self, j: usize) -> f64 {
        j as f64 * self.h
    }

    pub fn values(&self) -> &[Vec2] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Vec2] {
        &mut self.values
    }

    pub fn get(&self, j: usize) -> Vec2 {
        self.values[j]
    }

    // Pointwise operators. Out-of-range indices panic: the admissible ranges
    // are part of the operator definitions.

    pub fn backward_diff(&self, j: usize) -> Vec2 {
        assert!(j >= 1 && j <= self.segments(), "backward difference needs 1 <= j <= J, got j = {j}");
        (self.values[j] - self.values[j - 1]) / self.h
    }

    pub fn forward_diff(&self, j: usize) -> Vec2 {
        assert!(j < self.segments(), "forward difference needs 0 <= j <= J-1, got j = {j}");
        (self.values[j + 1] - self.values[j]) / self.h
    }

    pub fn central_diff(&self, j: usize) -> Vec2 {
        assert!(j >= 1 && j < self.segments(), "central difference needs 1 <= j <= J-1, got j = {j}");
        (self.values[j + 1] - self.values[j - 1]) / (2.0 * self.h)
    }

    pub fn second_diff(&self, j: usize) -> Vec2 {
        assert!(j >= 1 && j < self.segments(), "second difference needs 1 <= j <= J-1, got j = {j}");
        (self.values[j + 1] - 2.0 * self.values[j] + self.values[j - 1]) / (self.h * self.h)
    }

    // Whole-grid forms. Entry k of the returned vector is the operator at
    // the k-th admissible index (so backward_diffs()[k] is the backward
    // difference at j = k+1, and central_diffs()[k] is at j = k+1).

    pub fn backward_diffs(&self) -> Vec<Vec2> {
        (1..=self.segments()).map(|j| self.backward_diff(j)).collect()
    }

    pub fn forward_diffs(&self) -> Vec<Vec2> {
        (0..self.segments()).map(|j| self.forward_diff(j)).collect()
    }

    pub fn central_diffs(&self) -> Vec<Vec2> {
        (1..self.segments()).map(|j| self.central_diff(j)).collect()
    }

    pub fn second_diffs(&self) -> Vec<Vec2> {
        (1..self.segments()).map(|j| self.second_diff(j)).collect()
    }

    /// Trapezoidal l2 norm: half weights on the endpoint values.
    pub fn norm_l2(&self) -> f64 {
        let j_last = self.segments();
        let mut s = 0.5 * (self.values[0].norm_sq() + self.values[j_last].norm_sq());
        for v in &self.values[1..j_last] {
            s += v.norm_sq();
        }
        libm::sqrt(self.h * s)
    }

    /// h1 seminorm: l2 norm of the backward differences over 1 <= j <= J.
    pub fn seminorm_h1(&self) -> f64 {
        let mut s = 0.0;
        for j in 1..=self.segments() {
            s += self.backward_diff(j).norm_sq();
        }
        libm::sqrt(self.h * s)
    }

    /// Full h1 norm, sqrt(l2^2 + h1 seminorm^2).
    pub fn norm_h1(&self) -> f64 {
        let l2 = self.norm_l2();
        let h1 = self.seminorm_h1();
        libm::sqrt(l2 * l2 + h1 * h1)
    }

    /// h2 seminorm: l2 norm of the second differences over the interior.
    pub fn seminorm_h2(&self) -> f64 {
        let mut s = 0.0;
        for j in 1..self.segments() {
            s += self.second_diff(j).norm_sq();
        }
        libm::sqrt(self.h * s)
    }

    pub fn max_value_norm(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn max_backward_diff_norm(&self) -> f64 {
        (1..=self.segments()).map(|j| self.backward_diff(j).norm()).fold(0.0, f64::max)
    }
}

/// Defect of the summation by parts identity
///
///   h * sum_{j=1..J} Dv_j . Dw_j
///     = -h * sum_{j=1..J-1} v_j . D2w_j + v_J . Dw_J - v_0 . D+w_0
///
/// (D backward, D2 second, D+ forward difference). Exact for the continuum
/// integration by parts; here it holds to rounding, so the returned
/// |lhs - rhs| is a pure floating point defect.
///
/// Panics if the two grid functions have different J.
pub fn sbp_defect(v: &GridFunction, w: &GridFunction) -> f64 {
    assert_eq!(v.segments(), w.segments(), "summation by parts needs matching grids");
    let jn = v.segments();
    let h = v.spacing();
    let mut lhs = 0.0;
    for j in 1..=jn {
        lhs += v.backward_diff(j).dot(w.backward_diff(j));
    }
    lhs *= h;
    let mut rhs = 0.0;
    for j in 1..jn {
        rhs += v.get(j).dot(w.second_diff(j));
    }
    rhs = -h * rhs + v.get(jn).dot(w.backward_diff(jn)) - v.get(0).dot(w.forward_diff(0));
    libm::fabs(lhs - rhs)
}

/// Slacks (rhs - lhs, nonnegative when the inequality holds) of the discrete
/// Sobolev-type embeddings:
///
///   max_j |Dv_j|     <= h^{-1/2} |v|_{h1}
///   max_j |v_j|^2    <= |v|_{l2}^2 + 2 |v|_{l2} |v|_{h1}
///   max_j |Dv_j|^2   <= |v|_{h1}^2 + 2 |v|_{h1} |v|_{h2}
///   |v_j . e1|       <= 2 q_j (1 - q_j) max_k |Dv_k|   (needs on-axis ends)
///
/// The last bound requires v_0 . e1 = v_J . e1 = 0; its slack is `None`
/// when that precondition fails.
#[derive(Clone, Copy, Debug)]
pub struct SobolevSlacks {
    pub inverse_bound: f64,
    pub max_value_bound: f64,
    pub max_diff_bound: f64,
    pub axis_weighted_bound: Option<f64>,
}

impl SobolevSlacks {
    /// Smallest slack among the applicable bounds.
    pub fn min(&self) -> f64 {
        let mut m = self.inverse_bound.min(self.max_value_bound).min(self.max_diff_bound);
        if let Some(a) = self.axis_weighted_bound {
            m = m.min(a);
        }
        m
    }
}

pub fn sobolev_slacks(v: &GridFunction) -> SobolevSlacks {
    let jn = v.segments();
    let l2 = v.norm_l2();
    let h1 = v.seminorm_h1();
    let h2 = v.seminorm_h2();
    let max_v = v.max_value_norm();
    let max_d = v.max_backward_diff_norm();

    let inverse_bound = h1 / libm::sqrt(v.spacing()) - max_d;
    let max_value_bound = l2 * l2 + 2.0 * l2 * h1 - max_v * max_v;
    let max_diff_bound = h1 * h1 + 2.0 * h1 * h2 - max_d * max_d;

    let on_axis = v.get(0).x1 == 0.0 && v.get(jn).x1 == 0.0;
    let axis_weighted_bound = on_axis.then(|| {
        let mut slack = f64::INFINITY;
        for j in 0..=jn {
            let q = v.node(j);
            let bound = 2.0 * q * (1.0 - q) * max_d;
            slack = slack.min(bound - libm::fabs(v.get(j).x1));
        }
        slack
    });

    SobolevSlacks { inverse_bound, max_value_bound, max_diff_bound, axis_weighted_bound }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(jn: usize, f: impl Fn(f64) -> (f64, f64)) -> GridFunction {
        GridFunction::from_fn(jn, |q| {
            let (a, b) = f(q);
            Vec2::new(a, b)
        })
    }

    #[test]
    fn operators_on_linear_data_are_exact() {
        let v = sample(8, |q| (3.0 * q, -2.0 * q + 1.0));
        for j in 1..=8 {
            let d = v.backward_diff(j);
            assert!((d.x1 - 3.0).abs() < 1e-13 && (d.x2 + 2.0).abs() < 1e-13);
        }
        for j in 1..8 {
            assert!(v.second_diff(j).norm() < 1e-11);
        }
    }

    #[test]
    fn central_is_mean_of_onesided() {
        let v = sample(16, |q| (q * q, libm::sin(q)));
        for j in 1..16 {
            let mean = (v.backward_diff(j) + v.forward_diff(j)) * 0.5;
            assert!((v.central_diff(j) - mean).norm() < 1e-13);
        }
    }

    #[test]
    #[should_panic(expected = "backward difference")]
    fn backward_diff_rejects_j_zero() {
        sample(4, |q| (q, 0.0)).backward_diff(0);
    }

    #[test]
    #[should_panic(expected = "central difference")]
    fn central_diff_rejects_last_node() {
        sample(4, |q| (q, 0.0)).central_diff(4);
    }

    #[test]
    fn whole_grid_forms_match_pointwise() {
        let v = sample(9, |q| (libm::cos(3.0 * q), q * q * q));
        let b = v.backward_diffs();
        let c = v.central_diffs();
        let s = v.second_diffs();
        let f = v.forward_diffs();
        assert_eq!(b.len(), 9);
        assert_eq!(f.len(), 9);
        assert_eq!(c.len(), 8);
        assert_eq!(s.len(), 8);
        for j in 1..=9 {
            assert_eq!(b[j - 1], v.backward_diff(j));
            assert_eq!(f[j - 1], v.forward_diff(j - 1));
        }
        for j in 1..9 {
            assert_eq!(c[j - 1], v.central_diff(j));
            assert_eq!(s[j - 1], v.second_diff(j));
        }
    }

    #[test]
    fn norms_of_constant_function() {
        // Constant (1,0): l2 norm 1 (weights sum to 1), seminorms 0.
        let v = sample(12, |_| (1.0, 0.0));
        assert!((v.norm_l2() - 1.0).abs() < 1e-14);
        assert!(v.seminorm_h1() == 0.0);
        assert!(v.seminorm_h2() == 0.0);
        assert!((v.norm_h1() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn norms_of_linear_ramp() {
        // v = (q, 0) on J=4: l2^2 = h*(1/16 + 1/4 + 9/16 + 1/2) = 11/32,
        // h1 seminorm 1 exactly.
        let v = sample(4, |q| (q, 0.0));
        assert!((v.norm_l2() - libm::sqrt(11.0 / 32.0)).abs() < 1e-15);
        assert!((v.seminorm_h1() - 1.0).abs() < 1e-15);
        assert!(v.seminorm_h2() < 1e-12);
    }

    #[test]
    fn sbp_defect_is_rounding_level() {
        let v = sample(17, |q| (libm::sin(2.0 * q), q * q));
        let w = sample(17, |q| (libm::exp(-q), libm::cos(5.0 * q)));
        assert!(sbp_defect(&v, &w) < 1e-13);
    }

    #[test]
    fn sobolev_slacks_nonnegative_on_smooth_data() {
        let v = sample(32, |q| (libm::sin(3.141592653589793 * q), libm::cos(2.0 * q)));
        let s = sobolev_slacks(&v);
        assert!(s.inverse_bound >= -1e-12);
        assert!(s.max_value_bound >= -1e-12);
        assert!(s.max_diff_bound >= -1e-12);
        // sin(pi q) rounds away from zero at q = 1, so pin the endpoints to
        // the axis to make the weighted bound applicable.
        let mut w = GridFunction::from_fn(32, |q| Vec2::new(libm::sin(core::f64::consts::PI * q), 0.0));
        let jn = w.segments();
        w.values_mut()[0].x1 = 0.0;
        w.values_mut()[jn].x1 = 0.0;
        let sw = sobolev_slacks(&w);
        assert!(sw.axis_weighted_bound.expect("ends on axis") >= -1e-12);
    }

    #[test]
    fn axis_weighted_bound_needs_on_axis_ends() {
        let v = sample(8, |q| (q + 1.0, 0.0));
        assert!(sobolev_slacks(&v).axis_weighted_bound.is_none());
    }
}
