//! Gauss-Legendre quadrature.
//!
//! Nodes are the roots of the Legendre polynomial P_n, found by Newton
//! iteration from the Chebyshev-angle initial guess; weights follow from
//! the standard formula w_i = 2 / ((1 - x_i^2) P_n'(x_i)^2). Rules are
//! symmetric, so only half the roots are solved for.
//!
//! Density evaluations (Hellinger integrands, moment integrals) reuse the
//! same high-order rule many times per process, so constructed rules are
//! memoized behind [`shared_rule`].

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use crate::error::{CdeError, Result};

/// A Gauss-Legendre rule on [-1, 1] with nodes in ascending order.
#[derive(Clone, Debug)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    /// Computes the n-point rule. Errors for n = 0.
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(CdeError::InvalidParameter(
                "quadrature rule needs at least one node".into(),
            ));
        }
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let half = n / 2;
        for i in 0..half {
            // Initial guess for the i-th root in descending order.
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_and_derivative(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() <= 1e-15 {
                    // One polishing step after convergence.
                    let (p2, d2) = legendre_and_derivative(n, x);
                    dp = d2;
                    x -= p2 / d2;
                    break;
                }
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            // Roots come out descending; store ascending and mirror.
            nodes[n - 1 - i] = x;
            nodes[i] = -x;
            weights[n - 1 - i] = w;
            weights[i] = w;
        }
        if n % 2 == 1 {
            let (_, d) = legendre_and_derivative(n, 0.0);
            nodes[half] = 0.0;
            weights[half] = 2.0 / (d * d);
        }
        Ok(GaussLegendre { nodes, weights })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Integrates f over [a, b] by affine transformation of the rule.
    pub fn integrate(&self, a: f64, b: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
        let c = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        let mut sum = 0.0;
        for (&x, &w) in self.nodes.iter().zip(&self.weights) {
            sum += w * f(mid + c * x);
        }
        c * sum
    }

    /// The transformed nodes on [a, b] together with their scaled weights.
    pub fn mapped(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let c = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(move |(&x, &w)| (mid + c * x, w * c))
    }
}

/// (P_n(x), P_n'(x)) by the three-term recurrence.
fn legendre_and_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p_prev = 1.0;
    let mut p = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p_next = ((2.0 * kf - 1.0) * x * p - (kf - 1.0) * p_prev) / kf;
        p_prev = p;
        p = p_next;
    }
    let d = n as f64 * (x * p - p_prev) / (x * x - 1.0);
    (p, d)
}

/// Memoized shared rule of the given order.
pub fn shared_rule(n: usize) -> Result<Arc<GaussLegendre>> {
    static RULES: OnceLock<Mutex<HashMap<usize, Arc<GaussLegendre>>>> = OnceLock::new();
    let rules = RULES.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = rules.lock().expect("quadrature cache poisoned");
    if let Some(r) = guard.get(&n) {
        return Ok(Arc::clone(r));
    }
    let rule = Arc::new(GaussLegendre::new(n)?);
    guard.insert(n, Arc::clone(&rule));
    Ok(rule)
}
