//! Quadrature on the reference triangle `{(s, r) : s, r >= 0, s + r <= 1}` and
//! on the unit interval.
//!
//! Triangle rules are collapsed (Duffy) tensor products of Gauss-Legendre
//! rules, so any exactness degree up to [`MAX_EXACTNESS`] is available with
//! positive weights and interior points.

use std::f64::consts::PI;

use crate::error::{Error, Result};

pub const MAX_EXACTNESS: usize = 30;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Domain {
    Triangle,
    Interval,
}

#[derive(Clone, Debug)]
pub struct QuadratureRule {
    domain: Domain,
    exactness: usize,
    /// Reference coordinates; for interval rules only the first entry is used.
    points: Vec<[f64; 2]>,
    weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn exactness(&self) -> usize {
        self.exactness
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn points(&self) -> &[[f64; 2]] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Barycentric coordinates of point `q` of a triangle rule.
    pub fn barycentric(&self, q: usize) -> [f64; 3] {
        let [s, r] = self.points[q];
        [1.0 - s - r, s, r]
    }

    pub fn iter(&self) -> impl Iterator<Item = ([f64; 2], f64)> + '_ {
        self.points
            .iter()
            .copied()
            .zip(self.weights.iter().copied())
    }
}

/// Gauss-Legendre nodes and weights on `[-1, 1]` by Newton iteration on `P_n`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, dp) = legendre_with_derivative(n, x);
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

/// Gauss-Legendre rule on `[0, 1]` exact for polynomials of degree `exactness`.
pub fn interval_rule(exactness: usize) -> Result<QuadratureRule> {
    if exactness > MAX_EXACTNESS {
        return Err(Error::UnsupportedQuadrature(exactness));
    }
    let n = exactness / 2 + 1;
    let (x, w) = gauss_legendre(n);
    Ok(QuadratureRule {
        domain: Domain::Interval,
        exactness,
        points: x.iter().map(|&xi| [0.5 * (xi + 1.0), 0.0]).collect(),
        weights: w.iter().map(|&wi| 0.5 * wi).collect(),
    })
}

/// Collapsed Gauss rule on the reference triangle exact to degree `exactness`.
pub fn triangle_rule(exactness: usize) -> Result<QuadratureRule> {
    if exactness > MAX_EXACTNESS {
        return Err(Error::UnsupportedQuadrature(exactness));
    }
    // s = u, r = v (1 - u): the Jacobian (1 - u) raises the degree in u by one.
    let nu = exactness.div_ceil(2) + 1;
    let nv = exactness / 2 + 1;
    let (xu, wu) = gauss_legendre(nu);
    let (xv, wv) = gauss_legendre(nv);
    let mut points = Vec::with_capacity(nu * nv);
    let mut weights = Vec::with_capacity(nu * nv);
    for (&a, &wa) in xu.iter().zip(&wu) {
        let u = 0.5 * (a + 1.0);
        for (&b, &wb) in xv.iter().zip(&wv) {
            let v = 0.5 * (b + 1.0);
            points.push([u, v * (1.0 - u)]);
            weights.push(0.25 * wa * wb * (1.0 - u));
        }
    }
    Ok(QuadratureRule {
        domain: Domain::Triangle,
        exactness,
        points,
        weights,
    })
}
