#![allow(dead_code)]

use std::f64::consts::{PI, SQRT_2};

use nalgebra::{DMatrix, DVector};
use wm_core::fem1d::{eval_fe, FeSpace};
use wm_core::quadrature::GaussLegendre;

/// `(Σ a_j √2 sin(jπx), Σ a_j √2 jπ cos(jπx))` by angle-addition recursion.
pub fn series_value_and_slope(a: &[f64], x: f64) -> (f64, f64) {
    let (s1, c1) = (PI * x).sin_cos();
    let (mut s, mut c) = (s1, c1);
    let mut v = 0.0;
    let mut d = 0.0;
    for (j, &aj) in a.iter().enumerate() {
        v += aj * s;
        d += aj * (j + 1) as f64 * c;
        let sn = s * c1 + c * s1;
        c = c * c1 - s * s1;
        s = sn;
    }
    (SQRT_2 * v, SQRT_2 * PI * d)
}

/// `(‖u_h - u‖_{L2}, ‖u_h' - u'‖_{L2})` by composite Gauss quadrature with at
/// least `min_panels` panels aligned to the element boundaries.
pub fn quadrature_errors(fe: &FeSpace, coeffs: &[f64], a: &[f64], min_panels: usize) -> (f64, f64) {
    let gl = GaussLegendre::new(4);
    let ne = fe.n_elements();
    let per = min_panels.div_ceil(ne);
    let width = fe.h() / per as f64;
    let mut l2 = 0.0;
    let mut h1 = 0.0;
    for e in 0..ne {
        let x0 = e as f64 * fe.h();
        for k in 0..per {
            let a0 = x0 + k as f64 * width;
            for (t, w) in gl.nodes.iter().zip(&gl.weights) {
                let x = a0 + t * width;
                let (v, d) = series_value_and_slope(a, x);
                let vh = eval_fe(fe, coeffs, x, 0).unwrap();
                let dh = eval_fe(fe, coeffs, x, 1).unwrap();
                l2 += w * width * (vh - v).powi(2);
                h1 += w * width * (dh - d).powi(2);
            }
        }
    }
    (l2.sqrt(), h1.sqrt())
}

fn gl_on(gl: &GaussLegendre, a: f64, b: f64, f: &dyn Fn(f64) -> f64) -> f64 {
    gl.nodes
        .iter()
        .zip(&gl.weights)
        .map(|(t, w)| w * f(a + t * (b - a)))
        .sum::<f64>()
        * (b - a)
}

/// Adaptive bisection with an 8-point rule against its two halves.
pub fn adaptive(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn rec(gl: &GaussLegendre, f: &dyn Fn(f64) -> f64, a: f64, b: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let left = gl_on(gl, a, m, f);
        let right = gl_on(gl, m, b, f);
        if (left + right - whole).abs() <= tol.max(1e-16) || depth > 30 {
            return left + right;
        }
        rec(gl, f, a, m, left, 0.5 * tol, depth + 1) + rec(gl, f, m, b, right, 0.5 * tol, depth + 1)
    }
    let gl = GaussLegendre::new(8);
    let whole = gl_on(&gl, a, b, f);
    rec(&gl, f, a, b, whole, tol, 0)
}

/// `∫ φ_i e_j` (or `∫ φ_i' e_j'`) by adaptive quadrature on each element.
pub fn sine_products_adaptive(fe: &FeSpace, j: usize, derivative: bool) -> DVector<f64> {
    let w = j as f64 * PI;
    let mut out = DVector::zeros(fe.n_dofs());
    for e in 0..fe.n_elements() {
        let a = e as f64 * fe.h();
        let b = a + fe.h();
        for dof in fe.element_dofs(e).flatten() {
            let f = |x: f64| {
                let phi = fe
                    .basis_at(x, derivative as usize)
                    .unwrap()
                    .into_iter()
                    .find(|&(i, _)| i == dof)
                    .map_or(0.0, |(_, v)| v);
                let mode = if derivative {
                    SQRT_2 * w * (w * x).cos()
                } else {
                    SQRT_2 * (w * x).sin()
                };
                phi * mode
            };
            out[dof] += adaptive(&f, a, b, 1e-13);
        }
    }
    out
}

/// Max entrywise difference relative to the largest entry of `b`.
pub fn rel_max_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).amax() / b.amax()
}
