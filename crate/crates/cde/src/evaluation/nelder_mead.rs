//! Downhill simplex minimizer with the classic coefficient set
//! (reflection 1, expansion 2, contraction 0.5, shrink 0.5).

use crate::error::{CdeError, Result};

#[derive(Clone, Copy, Debug)]
pub struct NmOptions {
    pub max_iters: usize,
    /// Value-spread half of the termination test: the objective range
    /// over the simplex must drop below this.
    pub spread_tol: f64,
    /// Geometric half of the termination test: the simplex diameter
    /// (max coordinate distance from the best vertex) must also drop
    /// below this. Equal values alone can be a wide straddle of the
    /// minimum, not convergence.
    pub point_tol: f64,
    /// Offset added per coordinate to build the initial simplex around
    /// the start point.
    pub initial_step: f64,
}

impl Default for NmOptions {
    fn default() -> Self {
        NmOptions {
            max_iters: 500,
            spread_tol: 1e-8,
            point_tol: 1e-6,
            initial_step: 0.25,
        }
    }
}

/// Minimizes `f` from `start`. Returns the best point and value seen;
/// never worse than the start. Non-finite objective values during the
/// search are treated as `+inf`; a non-finite value at the start is an
/// initialization error.
pub fn nelder_mead(
    mut f: impl FnMut(&[f64]) -> f64,
    start: &[f64],
    opts: &NmOptions,
) -> Result<(Vec<f64>, f64)> {
    let d = start.len();
    if d == 0 {
        return Err(CdeError::InvalidParameter(
            "Nelder-Mead needs at least one dimension".into(),
        ));
    }
    let f0 = f(start);
    if !f0.is_finite() {
        return Err(CdeError::Initialization(format!(
            "objective is {f0} at the starting point {start:?}"
        )));
    }
    let mut eval = |x: &[f64]| -> f64 {
        let v = f(x);
        if v.is_finite() {
            v
        } else {
            f64::INFINITY
        }
    };

    let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(d + 1);
    let mut values = Vec::with_capacity(d + 1);
    simplex.push(start.to_vec());
    values.push(f0);
    for i in 0..d {
        let mut v = start.to_vec();
        v[i] += opts.initial_step;
        values.push(eval(&v));
        simplex.push(v);
    }

    let mut order: Vec<usize> = (0..=d).collect();
    for _ in 0..opts.max_iters {
        order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).expect("no NaN values"));
        let best = order[0];
        let worst = order[d];
        let second_worst = order[d - 1];
        if values[worst] - values[best] < opts.spread_tol {
            let mut diameter: f64 = 0.0;
            for &idx in &order[1..] {
                for (v, b) in simplex[idx].iter().zip(&simplex[best]) {
                    diameter = diameter.max((v - b).abs());
                }
            }
            if diameter < opts.point_tol {
                break;
            }
        }

        // Centroid of all but the worst vertex.
        let mut centroid = vec![0.0; d];
        for &idx in &order[..d] {
            for (c, &v) in centroid.iter_mut().zip(&simplex[idx]) {
                *c += v;
            }
        }
        centroid.iter_mut().for_each(|c| *c /= d as f64);

        let blend = |a: f64| -> Vec<f64> {
            // centroid + a * (centroid - worst)
            centroid
                .iter()
                .zip(&simplex[worst])
                .map(|(&c, &w)| c + a * (c - w))
                .collect()
        };

        let reflected = blend(1.0);
        let f_r = eval(&reflected);
        if f_r < values[best] {
            let expanded = blend(2.0);
            let f_e = eval(&expanded);
            if f_e < f_r {
                simplex[worst] = expanded;
                values[worst] = f_e;
            } else {
                simplex[worst] = reflected;
                values[worst] = f_r;
            }
        } else if f_r < values[second_worst] {
            simplex[worst] = reflected;
            values[worst] = f_r;
        } else {
            // Contract toward the better side; shrink on failure.
            let (contracted, f_against) = if f_r < values[worst] {
                (blend(0.5), f_r)
            } else {
                (blend(-0.5), values[worst])
            };
            let f_c = eval(&contracted);
            if f_c < f_against {
                simplex[worst] = contracted;
                values[worst] = f_c;
            } else {
                let best_point = simplex[best].clone();
                for idx in 0..=d {
                    if idx == best {
                        continue;
                    }
                    for (v, &b) in simplex[idx].iter_mut().zip(&best_point) {
                        *v = b + 0.5 * (*v - b);
                    }
                    values[idx] = eval(&simplex[idx]);
                }
            }
        }
    }

    let best = (0..=d)
        .min_by(|&a, &b| values[a].partial_cmp(&values[b]).expect("no NaN values"))
        .expect("nonempty simplex");
    if values[best] <= f0 {
        Ok((simplex.swap_remove(best), values[best]))
    } else {
        Ok((start.to_vec(), f0))
    }
}
