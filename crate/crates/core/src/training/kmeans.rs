use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansResult {
    pub centroids: Vec<Vec<f64>>,
    pub assignments: Vec<usize>,
    pub wcss: f64,
    /// Within-cluster sum of squares after each assignment step of the
    /// winning run.
    pub history: Vec<f64>,
}

pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(p: &[f64], centroids: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (i, c) in centroids.iter().enumerate() {
        let d = sq_dist(p, c);
        if d < best.1 {
            best = (i, d);
        }
    }
    best
}

/// k-means++ seeding: the first centre uniformly, each further centre with
/// probability proportional to its squared distance from the nearest
/// chosen centre (uniformly when every distance is zero).
pub fn kmeanspp_seed(points: &[Vec<f64>], k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let mut centres = vec![points[rng.random_range(0..points.len())].clone()];
    let mut d2: Vec<f64> = points.iter().map(|p| sq_dist(p, &centres[0])).collect();
    while centres.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut r = rng.random_range(0.0..total);
            let mut idx = points.len() - 1;
            for (i, &d) in d2.iter().enumerate() {
                if r < d {
                    idx = i;
                    break;
                }
                r -= d;
            }
            idx
        } else {
            rng.random_range(0..points.len())
        };
        centres.push(points[pick].clone());
        for (d, p) in d2.iter_mut().zip(points) {
            *d = d.min(sq_dist(p, &centres[centres.len() - 1]));
        }
    }
    centres
}

/// Lloyd iterations from the given centres until the assignment stops
/// changing or `max_iter` assignment steps have run. A cluster left empty
/// takes the point lying farthest from its current centre.
pub fn lloyd(points: &[Vec<f64>], mut centroids: Vec<Vec<f64>>, max_iter: usize) -> KMeansResult {
    let k = centroids.len();
    let dim = points[0].len();
    let mut assignments: Vec<usize> = Vec::new();
    let mut history = Vec::new();
    for _ in 0..max_iter {
        let step: Vec<(usize, f64)> = points.iter().map(|p| nearest(p, &centroids)).collect();
        let next: Vec<usize> = step.iter().map(|s| s.0).collect();
        history.push(step.iter().map(|s| s.1).sum());
        let stable = next == assignments;
        assignments = next;
        if stable {
            break;
        }
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (p, &a) in points.iter().zip(&assignments) {
            counts[a] += 1;
            for (s, x) in sums[a].iter_mut().zip(p) {
                *s += x;
            }
        }
        let mut dist: Vec<f64> = points.iter().zip(&assignments).map(|(p, &a)| sq_dist(p, &centroids[a])).collect();
        for c in 0..k {
            if counts[c] > 0 {
                centroids[c] = sums[c].iter().map(|s| s / counts[c] as f64).collect();
            }
        }
        for c in 0..k {
            if counts[c] == 0 {
                let far = (0..points.len()).fold(0, |best, i| if dist[i] > dist[best] { i } else { best });
                centroids[c] = points[far].clone();
                dist[far] = f64::NEG_INFINITY;
            }
        }
    }
    let wcss = *history.last().expect("max_iter >= 1");
    KMeansResult { centroids, assignments, wcss, history }
}

/// Best of `restarts` seeded k-means++ runs by final WCSS; earlier runs win
/// ties.
pub fn kmeans(points: &[Vec<f64>], k: usize, seed: u64, restarts: usize, max_iter: usize) -> Result<KMeansResult> {
    if points.is_empty() {
        return Err(Error::Invalid("k-means needs at least one point".into()));
    }
    if k == 0 || restarts == 0 || max_iter == 0 {
        return Err(Error::Invalid("k, restarts and max_iter must be at least 1".into()));
    }
    let dim = points[0].len();
    if points.iter().any(|p| p.len() != dim) {
        return Err(Error::Invalid("k-means points differ in dimension".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<KMeansResult> = None;
    for _ in 0..restarts {
        let run = lloyd(points, kmeanspp_seed(points, k, &mut rng), max_iter);
        if best.as_ref().is_none_or(|b| run.wcss < b.wcss) {
            best = Some(run);
        }
    }
    Ok(best.expect("restarts >= 1"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pts(v: &[[f64; 2]]) -> Vec<Vec<f64>> {
        v.iter().map(|p| p.to_vec()).collect()
    }

    #[test]
    fn separable_groups() {
        let p = pts(&[[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [10.0, 10.0], [10.0, 11.0], [11.0, 10.0]]);
        let r = kmeans(&p, 2, 3, 4, 50).unwrap();
        let mut c = r.centroids.clone();
        c.sort_by(|a, b| a[0].total_cmp(&b[0]));
        let third = 1.0 / 3.0;
        assert!((c[0][0] - third).abs() < 1e-12 && (c[0][1] - third).abs() < 1e-12);
        assert!((c[1][0] - (10.0 + third)).abs() < 1e-12);
    }

    #[test]
    fn more_clusters_than_distinct_points() {
        let p = pts(&[[1.0, 1.0], [1.0, 1.0], [5.0, 5.0], [9.0, 0.0]]);
        let r = kmeans(&p, 4, 0, 2, 20).unwrap();
        for q in [[1.0, 1.0], [5.0, 5.0], [9.0, 0.0]] {
            assert!(r.centroids.iter().any(|c| c[..] == q[..]), "{q:?} missing from {:?}", r.centroids);
        }
        assert_eq!(r.wcss, 0.0);
        assert!(r.centroids.iter().flatten().all(|x| x.is_finite()));
    }

    #[test]
    fn wcss_never_increases_within_a_run() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let p: Vec<Vec<f64>> = (0..200).map(|_| vec![rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0)]).collect();
        let r = kmeans(&p, 6, 2, 3, 100).unwrap();
        for w in r.history.windows(2) {
            assert!(w[1] <= w[0] + 1e-12, "{:?}", r.history);
        }
    }

    #[test]
    fn deterministic_under_seed() {
        let p = pts(&[[0.0, 0.0], [3.0, 1.0], [1.0, 4.0], [8.0, 8.0], [2.0, 2.0]]);
        assert_eq!(kmeans(&p, 3, 9, 3, 30).unwrap(), kmeans(&p, 3, 9, 3, 30).unwrap());
        assert!(kmeans(&[], 1, 0, 1, 1).is_err());
    }
}
