//! K-means clustering of clients by flattened predictor parameters, with
//! label alignment against the previous round.

use rand::Rng;

use crate::client::PredictorParams;
use crate::error::{Error, Result};
use crate::rng::rng_from_seed;

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansParams {
    pub max_iters: usize,
    /// Stop once no centroid moves farther than this.
    pub tol: f64,
    /// Independent k-means++ restarts; the lowest-SSE run wins.
    pub restarts: usize,
}

impl Default for KMeansParams {
    fn default() -> Self {
        Self {
            max_iters: 50,
            tol: 1e-6,
            restarts: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansFit {
    pub labels: Vec<usize>,
    pub centroids: Vec<Vec<f64>>,
    pub sse: f64,
    /// Within-cluster SSE after each assignment step.
    pub sse_trace: Vec<f64>,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(point: &[f64], centroids: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, cen) in centroids.iter().enumerate() {
        let d = sq_dist(point, cen);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

fn plus_plus_init<R: Rng>(points: &[Vec<f64>], k: usize, rng: &mut R) -> Vec<Vec<f64>> {
    let n = points.len();
    let mut centroids = vec![points[rng.random_range(0..n)].clone()];
    let mut dists: Vec<f64> = points.iter().map(|p| sq_dist(p, &centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = dists.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut chosen = n - 1;
            for (i, &d) in dists.iter().enumerate() {
                if target < d {
                    chosen = i;
                    break;
                }
                target -= d;
            }
            chosen
        } else {
            rng.random_range(0..n)
        };
        centroids.push(points[pick].clone());
        for (d, p) in dists.iter_mut().zip(points) {
            *d = d.min(sq_dist(p, &centroids[centroids.len() - 1]));
        }
    }
    centroids
}

fn sse_of(points: &[Vec<f64>], labels: &[usize], centroids: &[Vec<f64>]) -> f64 {
    points
        .iter()
        .zip(labels)
        .map(|(p, &l)| sq_dist(p, &centroids[l]))
        .sum()
}

/// Moves the point farthest from its centroid into each empty cluster.
fn repair_empty(points: &[Vec<f64>], labels: &mut [usize], centroids: &mut [Vec<f64>]) {
    let k = centroids.len();
    loop {
        let mut sizes = vec![0usize; k];
        labels.iter().for_each(|&l| sizes[l] += 1);
        let Some(empty) = sizes.iter().position(|&s| s == 0) else {
            return;
        };
        let donor = (0..points.len())
            .filter(|&i| sizes[labels[i]] > 1)
            .max_by(|&a, &b| {
                let da = sq_dist(&points[a], &centroids[labels[a]]);
                let db = sq_dist(&points[b], &centroids[labels[b]]);
                da.total_cmp(&db).then(b.cmp(&a))
            });
        let Some(donor) = donor else { return };
        labels[donor] = empty;
        centroids[empty] = points[donor].clone();
    }
}

fn lloyd(points: &[Vec<f64>], mut centroids: Vec<Vec<f64>>, params: &KMeansParams) -> KMeansFit {
    let k = centroids.len();
    let dim = points[0].len();
    let mut labels = vec![0usize; points.len()];
    let mut sse_trace = Vec::new();
    for _ in 0..params.max_iters.max(1) {
        for (l, p) in labels.iter_mut().zip(points) {
            *l = nearest(p, &centroids).0;
        }
        repair_empty(points, &mut labels, &mut centroids);
        sse_trace.push(sse_of(points, &labels, &centroids));

        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (p, &l) in points.iter().zip(&labels) {
            counts[l] += 1;
            for (s, x) in sums[l].iter_mut().zip(p) {
                *s += x;
            }
        }
        let mut moved: f64 = 0.0;
        for c in 0..k {
            if counts[c] == 0 {
                continue;
            }
            let next: Vec<f64> = sums[c].iter().map(|s| s / counts[c] as f64).collect();
            moved = moved.max(sq_dist(&next, &centroids[c]).sqrt());
            centroids[c] = next;
        }
        if moved < params.tol {
            break;
        }
    }
    // Final assignment against the converged centroids.
    for (l, p) in labels.iter_mut().zip(points) {
        *l = nearest(p, &centroids).0;
    }
    repair_empty(points, &mut labels, &mut centroids);
    let sse = sse_of(points, &labels, &centroids);
    if sse_trace.last().is_none_or(|&last| sse <= last) {
        sse_trace.push(sse);
    }
    KMeansFit {
        labels,
        centroids,
        sse,
        sse_trace,
    }
}

/// K-means with k-means++ seeding and restarts. `k` must not exceed the
/// number of points.
pub fn kmeans(points: &[Vec<f64>], k: usize, params: &KMeansParams, seed: u64) -> Result<KMeansFit> {
    if k == 0 || k > points.len() {
        return Err(Error::invalid(format!(
            "kmeans needs 1 <= k <= {} points, got k = {k}",
            points.len()
        )));
    }
    let mut rng = rng_from_seed(seed);
    let mut best: Option<KMeansFit> = None;
    for _ in 0..params.restarts.max(1) {
        let init = plus_plus_init(points, k, &mut rng);
        let fit = lloyd(points, init, params);
        if best.as_ref().is_none_or(|b| fit.sse < b.sse) {
            best = Some(fit);
        }
    }
    Ok(best.expect("at least one restart"))
}

/// Relabels `labels` (values in `0..k`) to agree as much as possible with
/// `prev`, by greedy matching on the contingency table.
pub fn align_labels(labels: &[usize], prev: &[Option<usize>], k: usize) -> Vec<usize> {
    let prev_k = prev.iter().flatten().map(|&p| p + 1).max().unwrap_or(0).max(k);
    let mut table = vec![vec![0usize; prev_k]; k];
    for (&l, p) in labels.iter().zip(prev) {
        if let Some(p) = *p {
            table[l][p] += 1;
        }
    }
    let mut map: Vec<Option<usize>> = vec![None; k];
    let mut used = vec![false; prev_k];
    loop {
        let mut best: Option<(usize, usize, usize)> = None;
        for (new, row) in table.iter().enumerate() {
            if map[new].is_some() {
                continue;
            }
            for (old, &count) in row.iter().enumerate() {
                if used[old] || count == 0 {
                    continue;
                }
                if best.is_none_or(|(_, _, c)| count > c) {
                    best = Some((new, old, count));
                }
            }
        }
        let Some((new, old, _)) = best else { break };
        map[new] = Some(old);
        used[old] = true;
    }
    // Unmatched clusters take the smallest free labels.
    let mut free = (0..prev_k).filter(|&o| !used[o]);
    let map: Vec<usize> = map
        .into_iter()
        .map(|m| m.unwrap_or_else(|| free.next().expect("enough labels")))
        .collect();
    labels.iter().map(|&l| map[l]).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterOutcome {
    /// One label per input predictor, in input order.
    pub labels: Vec<usize>,
    /// Number of clusters actually fitted this round.
    pub groups: usize,
    /// Set when fewer clients than requested groups were available.
    pub reduced: bool,
    pub sse_trace: Vec<f64>,
}

/// Clusters predictors into `g` groups. With `prev` (one entry per
/// predictor), labels are permuted to stay consistent with the last round.
pub fn cluster_clients(
    predictors: &[&PredictorParams],
    g: usize,
    prev: Option<&[Option<usize>]>,
    params: &KMeansParams,
    seed: u64,
) -> Result<ClusterOutcome> {
    if g == 0 {
        return Err(Error::invalid("group count must be >= 1"));
    }
    if predictors.is_empty() {
        return Err(Error::invalid("no predictors to cluster"));
    }
    if let Some(p) = prev {
        if p.len() != predictors.len() {
            return Err(Error::invalid("previous assignments do not match predictors"));
        }
    }
    let k = g.min(predictors.len());
    let points: Vec<Vec<f64>> = predictors.iter().map(|p| p.flatten()).collect();
    let fit = kmeans(&points, k, params, seed)?;
    let labels = match prev {
        Some(p) => align_labels(&fit.labels, p, k),
        None => fit.labels,
    };
    Ok(ClusterOutcome {
        labels,
        groups: k,
        reduced: k < g,
        sse_trace: fit.sse_trace,
    })
}
