//! Gauss-Legendre quadrature.
//!
//! Nodes and weights on `[-1, 1]` come from Newton iteration on the Legendre
//! recurrence; the rule integrates polynomials up to degree `2n - 1` exactly.
//! Used for kernel moment checks and for integrating smooth population
//! quantities against the covariate density.

use crate::{Error, Result};

/// An `n`-point Gauss-Legendre rule.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::QuadratureOrder);
        }
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let half = n / 2;
        for i in 0..half {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, x);
                dp = d;
                let step = p / d;
                x -= step;
                if step.abs() < 1e-15 {
                    break;
                }
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            // roots come out in descending order; store symmetric pairs
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            let (_, d) = legendre_with_derivative(n, 0.0);
            nodes[half] = 0.0;
            weights[half] = 2.0 / (d * d);
        }
        Ok(Self { nodes, weights })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Integral of `f` over `[a, b]`.
    pub fn integrate(&self, a: f64, b: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
        let mid = 0.5 * (a + b);
        let scale = 0.5 * (b - a);
        let mut total = 0.0;
        for (&x, &w) in self.nodes.iter().zip(&self.weights) {
            total += w * f(mid + scale * x);
        }
        total * scale
    }

    /// Tensor-product integral of `f` over the unit square.
    pub fn integrate_unit_square(&self, mut f: impl FnMut(f64, f64) -> f64) -> f64 {
        let map = |x: f64| 0.5 + 0.5 * x;
        let mut total = 0.0;
        for (&xu, &wu) in self.nodes.iter().zip(&self.weights) {
            let u = map(xu);
            let mut inner = 0.0;
            for (&xv, &wv) in self.nodes.iter().zip(&self.weights) {
                inner += wv * f(u, map(xv));
            }
            total += wu * inner;
        }
        total * 0.25
    }
}

/// Legendre polynomial `P_n` and its derivative at `x`.
fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let d = if (x * x - 1.0).abs() < 1e-300 {
        // endpoint formula, unused by interior Newton steps
        0.5 * (n * (n + 1)) as f64 * x.powi(n as i32 + 1)
    } else {
        (n as f64) * (x * p1 - p0) / (x * x - 1.0)
    };
    (p1, d)
}
