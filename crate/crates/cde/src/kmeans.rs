//! Lloyd's k-means with k-means++ seeding. Deterministic for a given
//! seed; returned centers are sorted lexicographically so downstream
//! consumers never depend on iteration order.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{CdeError, Result};
use crate::linalg::Matrix;

const MAX_ITERS: usize = 100;
const SHIFT_TOL: f64 = 1e-6;

/// Clusters the rows of `points` into `k` centers.
pub fn kmeans(points: &Matrix, k: usize, seed: u64) -> Result<Matrix> {
    let n = points.n_rows();
    let m = points.n_cols();
    if k == 0 {
        return Err(CdeError::InvalidParameter("k-means needs k >= 1".into()));
    }
    if k > n {
        return Err(CdeError::InvalidParameter(format!(
            "k-means needs at least as many points as centers, got {n} points for k = {k}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centers = plus_plus_init(points, k, &mut rng);
    let mut assign = vec![0usize; n];

    for _ in 0..MAX_ITERS {
        for (i, a) in assign.iter_mut().enumerate() {
            *a = nearest(points.row(i), &centers);
        }
        let mut sums = Matrix::zeros(k, m);
        let mut counts = vec![0usize; k];
        for (i, &a) in assign.iter().enumerate() {
            counts[a] += 1;
            let row = points.row(i);
            let s = sums.row_mut(a);
            for j in 0..m {
                s[j] += row[j];
            }
        }
        let mut shift: f64 = 0.0;
        for c in 0..k {
            if counts[c] == 0 {
                // Re-seed a dead center at the point farthest from its
                // current center; the next sweep re-partitions around it.
                let far = farthest_point(points, &centers, &assign);
                let delta = dist2(centers.row(c), points.row(far)).sqrt();
                centers.row_mut(c).copy_from_slice(points.row(far));
                shift = shift.max(delta);
                continue;
            }
            let inv = 1.0 / counts[c] as f64;
            let mut delta2 = 0.0;
            for j in 0..m {
                let new = sums.get(c, j) * inv;
                let d = new - centers.get(c, j);
                delta2 += d * d;
                centers.set(c, j, new);
            }
            shift = shift.max(delta2.sqrt());
        }
        if shift < SHIFT_TOL {
            break;
        }
    }

    let mut rows: Vec<Vec<f64>> = (0..k).map(|c| centers.row(c).to_vec()).collect();
    rows.sort_by(|a, b| a.partial_cmp(b).expect("finite centers"));
    Matrix::from_rows(&rows)
}

fn plus_plus_init<R: Rng>(points: &Matrix, k: usize, rng: &mut R) -> Matrix {
    let n = points.n_rows();
    let m = points.n_cols();
    let mut centers = Matrix::zeros(k, m);
    let first = rng.gen_range(0..n);
    centers.row_mut(0).copy_from_slice(points.row(first));

    let mut d2: Vec<f64> = (0..n)
        .map(|i| dist2(points.row(i), centers.row(0)))
        .collect();
    for c in 1..k {
        let total: f64 = d2.iter().sum();
        let idx = if total > 0.0 {
            let mut target = rng.gen::<f64>() * total;
            let mut chosen = n - 1;
            for (i, &d) in d2.iter().enumerate() {
                target -= d;
                if target <= 0.0 {
                    chosen = i;
                    break;
                }
            }
            chosen
        } else {
            rng.gen_range(0..n)
        };
        centers.row_mut(c).copy_from_slice(points.row(idx));
        for (i, d) in d2.iter_mut().enumerate() {
            *d = d.min(dist2(points.row(i), centers.row(c)));
        }
    }
    centers
}

fn nearest(p: &[f64], centers: &Matrix) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for c in 0..centers.n_rows() {
        let d = dist2(p, centers.row(c));
        if d < best_d {
            best_d = d;
            best = c;
        }
    }
    best
}

fn farthest_point(points: &Matrix, centers: &Matrix, assign: &[usize]) -> usize {
    let mut best = 0;
    let mut best_d = -1.0;
    for (i, &a) in assign.iter().enumerate() {
        let d = dist2(points.row(i), centers.row(a));
        if d > best_d {
            best_d = d;
            best = i;
        }
    }
    best
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn blobs() -> Matrix {
        // Three tight clusters around -5, 0, 5.
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let mut rows = Vec::new();
        for &c in &[-5.0, 0.0, 5.0] {
            for _ in 0..30 {
                rows.push(vec![c + 0.1 * (rng.gen::<f64>() - 0.5)]);
            }
        }
        Matrix::from_rows(&rows).unwrap()
    }

    #[test]
    fn recovers_separated_clusters() {
        let centers = kmeans(&blobs(), 3, 7).unwrap();
        assert!((centers.get(0, 0) - -5.0).abs() < 0.1);
        assert!((centers.get(1, 0) - 0.0).abs() < 0.1);
        assert!((centers.get(2, 0) - 5.0).abs() < 0.1);
    }

    #[test]
    fn deterministic_given_seed() {
        let pts = blobs();
        assert_eq!(kmeans(&pts, 5, 3).unwrap(), kmeans(&pts, 5, 3).unwrap());
    }

    #[test]
    fn centers_sorted_lexicographically() {
        let pts = Matrix::from_rows(&[
            vec![3.0, 0.0],
            vec![-1.0, 2.0],
            vec![-1.0, -2.0],
            vec![3.0, 1.0],
        ])
        .unwrap();
        let centers = kmeans(&pts, 4, 11).unwrap();
        for c in 1..4 {
            assert!(centers.row(c - 1) <= centers.row(c));
        }
    }

    #[test]
    fn k_equal_n_returns_the_points() {
        let pts = Matrix::from_rows(&[vec![2.0], vec![-1.0], vec![0.5]]).unwrap();
        let centers = kmeans(&pts, 3, 0).unwrap();
        assert_eq!(
            centers,
            Matrix::from_rows(&[vec![-1.0], vec![0.5], vec![2.0]]).unwrap()
        );
    }

    #[test]
    fn rejects_more_centers_than_points() {
        let pts = Matrix::from_rows(&[vec![0.0]]).unwrap();
        assert!(kmeans(&pts, 2, 0).is_err());
        assert!(kmeans(&pts, 0, 0).is_err());
    }

    #[test]
    fn survives_duplicate_points() {
        let pts = Matrix::from_rows(&vec![vec![1.0]; 6]).unwrap();
        let centers = kmeans(&pts, 2, 5).unwrap();
        assert_eq!(centers.get(0, 0), 1.0);
        assert_eq!(centers.get(1, 0), 1.0);
    }
}
