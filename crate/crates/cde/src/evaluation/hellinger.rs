//! Hellinger distance between 1-D densities and the conditional
//! evaluation protocol built on it: average the distance between the
//! estimated and true conditionals over an x-grid spanning the bulk of
//! the covariate distribution.

use serde::{Deserialize, Serialize};

use crate::error::{CdeError, Result};
use crate::estimators::ConditionalDensity;
use crate::quadrature::shared_rule;
use crate::simulators::DensitySimulator;

/// How conditionals are compared against ground truth: where the
/// x-grid sits, how fine the y-quadrature is, and how many seeds a
/// benchmark cell group averages over.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalProtocol {
    /// Number of x-grid points between the two percentiles.
    pub n_x_points: usize,
    /// Lower x-percentile bracketing the grid.
    pub percentile_lo: f64,
    /// Upper x-percentile bracketing the grid.
    pub percentile_hi: f64,
    /// Gauss-Legendre points for each per-x integral.
    pub n_quad: usize,
    /// Seeds evaluated per benchmark cell group.
    pub seeds: Vec<u64>,
}

impl Default for EvalProtocol {
    fn default() -> Self {
        EvalProtocol {
            n_x_points: 10,
            percentile_lo: 0.1,
            percentile_hi: 0.9,
            n_quad: 10_000,
            seeds: vec![0, 1, 2, 3, 4],
        }
    }
}

impl EvalProtocol {
    pub fn validate(&self) -> Result<()> {
        if self.n_x_points == 0 {
            return Err(CdeError::InvalidConfig(
                "protocol needs at least one x point".into(),
            ));
        }
        if !(0.0 < self.percentile_lo && self.percentile_lo < self.percentile_hi
            && self.percentile_hi < 1.0)
        {
            return Err(CdeError::InvalidConfig(format!(
                "percentile range must satisfy 0 < lo < hi < 1, got [{}, {}]",
                self.percentile_lo, self.percentile_hi
            )));
        }
        if self.n_quad < 2 {
            return Err(CdeError::InvalidConfig(
                "quadrature needs at least two points".into(),
            ));
        }
        if self.seeds.is_empty() {
            return Err(CdeError::InvalidConfig("protocol needs at least one seed".into()));
        }
        Ok(())
    }

    /// Evenly spaced x-grid between the simulator's lo/hi percentiles.
    pub fn x_grid(&self, sim: &dyn DensitySimulator) -> Result<Vec<f64>> {
        self.validate()?;
        let a = sim.x_percentile(self.percentile_lo)?;
        let b = sim.x_percentile(self.percentile_hi)?;
        let n = self.n_x_points;
        if n == 1 {
            return Ok(vec![0.5 * (a + b)]);
        }
        Ok((0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect())
    }
}

/// Hellinger distance `H = sqrt(1 - ∫ sqrt(p q) dy)` over `support` by
/// Gauss-Legendre quadrature, clipped into [0, 1]. Density evaluations
/// may fail; negative values are rejected as invalid densities.
pub fn hellinger_1d(
    p: impl Fn(f64) -> Result<f64>,
    q: impl Fn(f64) -> Result<f64>,
    support: (f64, f64),
    n_points: usize,
) -> Result<f64> {
    let (lo, hi) = support;
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(CdeError::InvalidParameter(format!(
            "Hellinger support must be a finite interval, got [{lo}, {hi}]"
        )));
    }
    let rule = shared_rule(n_points)?;
    let mut overlap = 0.0;
    for (y, w) in rule.mapped(lo, hi) {
        let pv = checked_density(p(y)?, y)?;
        let qv = checked_density(q(y)?, y)?;
        overlap += w * (pv * qv).sqrt();
    }
    Ok((1.0 - overlap).max(0.0).sqrt().min(1.0))
}

fn checked_density(v: f64, y: f64) -> Result<f64> {
    if v < 0.0 || v.is_nan() {
        return Err(CdeError::InvalidDensity(format!("density {v} at y = {y}")));
    }
    Ok(v)
}

/// Mean Hellinger distance between the estimator's and the simulator's
/// conditionals over the protocol's x-grid. Both sides must be 1-D in
/// x and y; the per-x integration support is the union of the two
/// densities' y-envelopes.
pub fn conditional_hellinger(
    est: &dyn ConditionalDensity,
    sim: &dyn DensitySimulator,
    protocol: &EvalProtocol,
) -> Result<f64> {
    if est.x_dim() != sim.x_dim() || est.y_dim() != sim.y_dim() {
        return Err(CdeError::ShapeMismatch {
            context: "conditional Hellinger estimator vs simulator",
            expected: format!("x {}, y {}", sim.x_dim(), sim.y_dim()),
            got: format!("x {}, y {}", est.x_dim(), est.y_dim()),
        });
    }
    if est.y_dim() != 1 {
        return Err(CdeError::UnsupportedDimension(format!(
            "conditional Hellinger needs 1-D y, got dimension {}",
            est.y_dim()
        )));
    }
    let grid = protocol.x_grid(sim)?;
    let rule = shared_rule(protocol.n_quad)?;
    let mut p_vals = Vec::with_capacity(protocol.n_quad);
    let mut q_vals = Vec::with_capacity(protocol.n_quad);
    let mut total = 0.0;
    for &x in &grid {
        let res = (|| -> Result<f64> {
            let xq = [x];
            let (e_lo, e_hi) = est.y_envelope(&xq)?;
            let (s_lo, s_hi) = sim.y_envelope(&xq)?;
            let lo = e_lo[0].min(s_lo[0]);
            let hi = e_hi[0].max(s_hi[0]);
            let nodes: Vec<f64> = rule.mapped(lo, hi).map(|(y, _)| y).collect();
            density_on_nodes(est, &xq, &nodes, &mut p_vals)?;
            density_on_nodes(sim, &xq, &nodes, &mut q_vals)?;
            let mut overlap = 0.0;
            for (((y, w), &pv), &qv) in rule.mapped(lo, hi).zip(&p_vals).zip(&q_vals) {
                overlap += w * (checked_density(pv, y)? * checked_density(qv, y)?).sqrt();
            }
            Ok((1.0 - overlap).max(0.0).sqrt().min(1.0))
        })();
        total += res.map_err(|e| {
            CdeError::InvalidDensity(format!("conditional Hellinger at x = {x}: {e}"))
        })?;
    }
    Ok(total / grid.len() as f64)
}

/// Fills `out` with the conditional density at each node, going through
/// the mixture grid path when one exists (one mixture construction per
/// x instead of one per node).
fn density_on_nodes(
    den: &dyn ConditionalDensity,
    x: &[f64],
    nodes: &[f64],
    out: &mut Vec<f64>,
) -> Result<()> {
    if let Some(mix) = den.conditional_mixture(x)? {
        mix.log_pdf_grid_1d(nodes, out)?;
        for v in out.iter_mut() {
            *v = v.exp();
        }
        return Ok(());
    }
    out.clear();
    for &y in nodes {
        out.push(den.pdf(x, &[y])?);
    }
    Ok(())
}
