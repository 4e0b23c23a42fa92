//! Deterministic k-means (Lloyd iterations, k-means++ seeding) and feature standardization.
//!
//! Fitting works on a canonical ordering of the points (sorted by content) and
//! the effective RNG seed mixes the caller's seed with a hash of that ordering,
//! so the result does not depend on the order in which points are supplied.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum KMeansError {
    #[error("k = {k} is invalid for {n} points")]
    InvalidK { k: usize, n: usize },
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

pub type Result<T, E = KMeansError> = std::result::Result<T, E>;

/// A non-empty set of finite points of equal dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct PointSet {
    points: Vec<Vec<f64>>,
    dim: usize,
}

impl PointSet {
    pub fn new(points: Vec<Vec<f64>>) -> Result<Self> {
        let dim = points
            .first()
            .map(Vec::len)
            .ok_or_else(|| KMeansError::InvalidInput("empty point set".into()))?;
        if dim == 0 {
            return Err(KMeansError::InvalidInput("zero-dimensional points".into()));
        }
        for (i, p) in points.iter().enumerate() {
            if p.len() != dim {
                return Err(KMeansError::InvalidInput(format!(
                    "point {i} has dimension {} (expected {dim})",
                    p.len()
                )));
            }
            if p.iter().any(|v| !v.is_finite()) {
                return Err(KMeansError::InvalidInput(format!("point {i} is not finite")));
            }
        }
        Ok(Self { points, dim })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn into_points(self) -> Vec<Vec<f64>> {
        self.points
    }
}

pub fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Index of the nearest centroid; ties go to the lowest index.
fn nearest(centroids: &[Vec<f64>], x: &[f64]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (j, c) in centroids.iter().enumerate() {
        let d = squared_distance(c, x);
        if d < best.1 {
            best = (j, d);
        }
    }
    best
}

/// `max(2, round(sqrt(n / 2)))`, never more than `n`.
pub fn default_k(n: usize) -> usize {
    let k = ((n as f64 / 2.0).sqrt().round() as usize).max(2);
    k.min(n).max(1)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KMeansParams {
    pub k: usize,
    pub seed: u64,
    pub max_iter: usize,
    pub tol: f64,
    /// Independent k-means++ seedings; the lowest-inertia run is kept.
    pub restarts: usize,
}

impl KMeansParams {
    pub fn new(k: usize, seed: u64) -> Self {
        Self {
            k,
            seed,
            max_iter: 100,
            tol: 1e-6,
            restarts: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterModel {
    pub k: usize,
    pub centroids: Vec<Vec<f64>>,
    /// Cluster index of every input point, in input order.
    pub assignment: Vec<usize>,
    /// Sum of squared distances from each point to its centroid.
    pub inertia: f64,
    /// Inertia after every assignment step of the kept run, ending with the final value.
    pub inertia_history: Vec<f64>,
    pub iterations_run: usize,
    /// Whether the kept run stopped before `max_iter`.
    pub converged: bool,
    pub seed: u64,
    pub effective_seed: u64,
}

impl ClusterModel {
    pub fn dim(&self) -> usize {
        self.centroids.first().map_or(0, Vec::len)
    }

    /// Sizes of every cluster.
    pub fn cluster_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &a in &self.assignment {
            sizes[a] += 1;
        }
        sizes
    }

    /// Compact JSON dump (reals rounded to 9 significant digits).
    pub fn to_audit_json(&self) -> serde_json::Value {
        use crate::numfmt::round_sig;
        serde_json::json!({
            "k": self.k,
            "seed": self.seed,
            "inertia": round_sig(self.inertia, 9),
            "centroids": self
                .centroids
                .iter()
                .map(|c| c.iter().map(|&v| round_sig(v, 9)).collect::<Vec<_>>())
                .collect::<Vec<_>>(),
        })
    }
}

/// Nearest centroid of `x`, ties to the lowest index.
pub fn assign(model: &ClusterModel, x: &[f64]) -> Result<usize> {
    if x.len() != model.dim() {
        return Err(KMeansError::InvalidInput(format!(
            "point has dimension {} (model has {})",
            x.len(),
            model.dim()
        )));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(KMeansError::InvalidInput("point is not finite".into()));
    }
    Ok(nearest(&model.centroids, x).0)
}

fn canonical_order(points: &[Vec<f64>]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&a, &b| {
        points[a]
            .iter()
            .zip(&points[b])
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    order
}

fn content_seed(sorted: &[&Vec<f64>]) -> u64 {
    let mut h = Sha256::new();
    for p in sorted {
        for v in p.iter() {
            h.update(v.to_le_bytes());
        }
    }
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"))
}

struct Run {
    centroids: Vec<Vec<f64>>,
    assignment: Vec<usize>,
    inertia: f64,
    history: Vec<f64>,
    iterations: usize,
    converged: bool,
}

fn plus_plus_init(points: &[&Vec<f64>], k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let n = points.len();
    let mut centroids = vec![points[rng.random_range(0..n)].clone()];
    let mut d2: Vec<f64> = points.iter().map(|p| squared_distance(p, &centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut pick = None;
            for (i, &d) in d2.iter().enumerate() {
                acc += d;
                if d > 0.0 && acc > target {
                    pick = Some(i);
                    break;
                }
            }
            // rounding can leave `acc` just short of `target`
            pick.unwrap_or_else(|| d2.iter().rposition(|&d| d > 0.0).expect("total > 0"))
        } else {
            0
        };
        let c = points[pick].clone();
        for (d, p) in d2.iter_mut().zip(points) {
            *d = d.min(squared_distance(p, &c));
        }
        centroids.push(c);
    }
    centroids
}

fn lloyd(points: &[&Vec<f64>], mut centroids: Vec<Vec<f64>>, max_iter: usize, tol: f64) -> Run {
    let n = points.len();
    let k = centroids.len();
    let dim = points[0].len();
    let mut assignment = vec![usize::MAX; n];
    let mut history = Vec::new();
    let mut iterations = 0;
    let mut converged = false;

    while iterations < max_iter {
        iterations += 1;
        let mut changed = false;
        let mut inertia = 0.0;
        for (i, p) in points.iter().enumerate() {
            let (j, d) = nearest(&centroids, p);
            changed |= assignment[i] != j;
            assignment[i] = j;
            inertia += d;
        }
        if let Some(&prev) = history.last() {
            debug_assert!(inertia <= prev + 1e-12 * f64::max(prev, 1.0), "inertia rose");
        }
        let improvement = history.last().map(|&prev: &f64| prev - inertia);
        history.push(inertia);
        if !changed || improvement.is_some_and(|imp| imp < tol) {
            converged = true;
            break;
        }
        update_centroids(points, &assignment, &mut centroids, k, dim);
    }
    if !converged {
        // the last assignment was made against the previous centroids
        for (i, p) in points.iter().enumerate() {
            assignment[i] = nearest(&centroids, p).0;
        }
    }
    update_centroids(points, &assignment, &mut centroids, k, dim);
    let inertia: f64 = points
        .iter()
        .zip(&assignment)
        .map(|(p, &a)| squared_distance(p, &centroids[a]))
        .sum();
    history.push(inertia);
    Run {
        centroids,
        assignment,
        inertia,
        history,
        iterations,
        converged,
    }
}

/// Moves every non-empty cluster's centroid to its mean. An empty cluster's
/// centroid jumps to the point farthest from it (lowest index on ties).
fn update_centroids(points: &[&Vec<f64>], assignment: &[usize], centroids: &mut [Vec<f64>], k: usize, dim: usize) {
    let mut sums = vec![vec![0.0; dim]; k];
    let mut counts = vec![0usize; k];
    for (p, &a) in points.iter().zip(assignment) {
        counts[a] += 1;
        for (s, v) in sums[a].iter_mut().zip(p.iter()) {
            *s += v;
        }
    }
    let mut used = Vec::new();
    for j in 0..k {
        if counts[j] > 0 {
            centroids[j] = sums[j].iter().map(|s| s / counts[j] as f64).collect();
        } else {
            let mut best: Option<(usize, f64)> = None;
            for (i, p) in points.iter().enumerate() {
                if used.contains(&i) {
                    continue;
                }
                let d = squared_distance(p, &centroids[j]);
                if best.is_none_or(|(_, bd)| d > bd) {
                    best = Some((i, d));
                }
            }
            if let Some((i, _)) = best {
                used.push(i);
                centroids[j] = points[i].clone();
            }
        }
    }
}

pub fn fit(points: &PointSet, params: &KMeansParams) -> Result<ClusterModel> {
    let n = points.len();
    let k = params.k;
    if k < 1 || k > n {
        return Err(KMeansError::InvalidK { k, n });
    }
    if !params.tol.is_finite() || params.tol < 0.0 {
        return Err(KMeansError::InvalidInput(format!("tol {} is invalid", params.tol)));
    }
    let order = canonical_order(&points.points);
    let sorted: Vec<&Vec<f64>> = order.iter().map(|&i| &points.points[i]).collect();
    let effective_seed = params.seed ^ content_seed(&sorted);
    let mut rng = ChaCha8Rng::seed_from_u64(effective_seed);

    let mut best: Option<Run> = None;
    for _ in 0..params.restarts.max(1) {
        let init = plus_plus_init(&sorted, k, &mut rng);
        let run = lloyd(&sorted, init, params.max_iter.max(1), params.tol);
        if best.as_ref().is_none_or(|b| run.inertia < b.inertia) {
            best = Some(run);
        }
    }
    let run = best.expect("at least one restart");

    let mut assignment = vec![0; n];
    for (pos, &orig) in order.iter().enumerate() {
        assignment[orig] = run.assignment[pos];
    }
    Ok(ClusterModel {
        k,
        centroids: run.centroids,
        assignment,
        inertia: run.inertia,
        inertia_history: run.history,
        iterations_run: run.iterations,
        converged: run.converged,
        seed: params.seed,
        effective_seed,
    })
}

/// Per-dimension affine map to zero mean and unit sample standard deviation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardization {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardization {
    /// Leaves points unchanged.
    pub fn identity(dim: usize) -> Self {
        Self {
            mean: vec![0.0; dim],
            std: vec![1.0; dim],
        }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(v, (m, s))| (v - m) / s)
            .collect()
    }
}

/// Standardizes every dimension to mean 0 and sample std 1. Constant dimensions
/// pass through unchanged and are recorded with mean 0 and std 1.
pub fn standardize(points: &PointSet) -> Result<(PointSet, Standardization)> {
    let n = points.len();
    if n < 2 {
        return Err(KMeansError::InvalidInput(format!(
            "standardization needs at least 2 points, got {n}"
        )));
    }
    let dim = points.dim();
    let mut stats = Standardization::identity(dim);
    for d in 0..dim {
        let col = points.points.iter().map(|p| p[d]);
        let mean = col.clone().sum::<f64>() / n as f64;
        let var = col.map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
        let std = var.sqrt();
        if std > 1e-12 * mean.abs().max(1.0) {
            stats.mean[d] = mean;
            stats.std[d] = std;
        }
    }
    let out = points.points.iter().map(|p| stats.apply(p)).collect();
    Ok((PointSet { points: out, dim }, stats))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ps(points: &[&[f64]]) -> PointSet {
        PointSet::new(points.iter().map(|p| p.to_vec()).collect()).unwrap()
    }

    /// Exhaustive optimum over all assignments of points to k labels.
    fn brute_force(points: &[Vec<f64>], k: usize) -> (f64, Vec<usize>) {
        let n = points.len();
        let mut best = (f64::INFINITY, vec![]);
        let mut labels = vec![0usize; n];
        loop {
            let mut cost = 0.0;
            let mut nonempty = true;
            for c in 0..k {
                let members: Vec<&Vec<f64>> = (0..n).filter(|&i| labels[i] == c).map(|i| &points[i]).collect();
                if members.is_empty() {
                    nonempty = false;
                    break;
                }
                let d = points[0].len();
                let mean: Vec<f64> = (0..d).map(|j| members.iter().map(|m| m[j]).sum::<f64>() / members.len() as f64).collect();
                cost += members.iter().map(|m| squared_distance(m, &mean)).sum::<f64>();
            }
            if nonempty && cost < best.0 {
                best = (cost, labels.clone());
            }
            let mut i = 0;
            loop {
                if i == n {
                    return best;
                }
                labels[i] += 1;
                if labels[i] < k {
                    break;
                }
                labels[i] = 0;
                i += 1;
            }
        }
    }

    fn partition(assignment: &[usize]) -> Vec<Vec<usize>> {
        let k = assignment.iter().max().map_or(0, |m| m + 1);
        let mut groups: Vec<Vec<usize>> = (0..k)
            .map(|c| (0..assignment.len()).filter(|&i| assignment[i] == c).collect())
            .filter(|g: &Vec<usize>| !g.is_empty())
            .collect();
        groups.sort();
        groups
    }

    #[test]
    fn k_equals_n() {
        let p = ps(&[&[0.0, 1.0], &[5.0, 2.0], &[-3.0, 8.0]]);
        let m = fit(&p, &KMeansParams::new(3, 1)).unwrap();
        assert_eq!(m.inertia, 0.0);
        assert_eq!(partition(&m.assignment).len(), 3);
    }

    #[test]
    fn k_one_is_the_mean() {
        let p = ps(&[&[0.0, 0.0], &[2.0, 0.0], &[4.0, 6.0]]);
        let m = fit(&p, &KMeansParams::new(1, 1)).unwrap();
        assert_eq!(m.centroids[0], vec![2.0, 2.0]);
        assert!((m.inertia - (8.0 + 4.0 + 20.0)).abs() < 1e-12);
    }

    #[test]
    fn two_blobs_match_brute_force() {
        let pts: Vec<Vec<f64>> = vec![
            vec![0.1, 0.0],
            vec![-0.1, 0.05],
            vec![0.0, -0.1],
            vec![10.1, 10.0],
            vec![9.9, 10.05],
            vec![10.0, 9.9],
        ];
        let m = fit(&PointSet::new(pts.clone()).unwrap(), &KMeansParams::new(2, 7)).unwrap();
        let (opt, labels) = brute_force(&pts, 2);
        assert!((m.inertia - opt).abs() < 1e-9);
        assert_eq!(partition(&m.assignment), partition(&labels));
        assert_eq!(partition(&m.assignment), vec![vec![0, 1, 2], vec![3, 4, 5]]);
    }

    #[test]
    fn invalid_k_and_input() {
        let p = ps(&[&[0.0], &[1.0]]);
        assert_eq!(fit(&p, &KMeansParams::new(0, 1)), Err(KMeansError::InvalidK { k: 0, n: 2 }));
        assert_eq!(fit(&p, &KMeansParams::new(3, 1)), Err(KMeansError::InvalidK { k: 3, n: 2 }));
        assert!(PointSet::new(vec![vec![f64::NAN]]).is_err());
        assert!(PointSet::new(vec![vec![1.0], vec![1.0, 2.0]]).is_err());
        assert!(PointSet::new(vec![]).is_err());
    }

    #[test]
    fn assign_examples() {
        let model = ClusterModel {
            k: 3,
            centroids: vec![vec![0.0, 0.0], vec![2.0, 0.0], vec![0.0, 5.0]],
            assignment: vec![],
            inertia: 0.0,
            inertia_history: vec![],
            iterations_run: 0,
            converged: true,
            seed: 0,
            effective_seed: 0,
        };
        assert_eq!(assign(&model, &[0.0, 5.0]).unwrap(), 2);
        assert_eq!(assign(&model, &[1.0, 0.0]).unwrap(), 0);
        assert_eq!(assign(&model, &[0.0, 100.0]).unwrap(), 2);
        assert!(assign(&model, &[1.0]).is_err());
    }

    #[test]
    fn duplicate_points_do_not_panic() {
        let p = ps(&[&[1.0], &[1.0], &[1.0], &[2.0]]);
        let m = fit(&p, &KMeansParams::new(3, 4)).unwrap();
        assert_eq!(m.assignment.len(), 4);
        assert_eq!(m.inertia, 0.0);
    }

    #[test]
    fn standardize_examples() {
        let (out, st) = standardize(&ps(&[&[0.0, 5.0], &[2.0, 5.0]])).unwrap();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert!((out.points[0][0] + h).abs() < 1e-12 && (out.points[1][0] - h).abs() < 1e-12);
        assert!((st.std[0] - 2f64.sqrt()).abs() < 1e-12);
        assert_eq!((out.points[0][1], out.points[1][1]), (5.0, 5.0));
        assert_eq!(st.std[1], 1.0);
        assert!(standardize(&ps(&[&[1.0]])).is_err());
    }

    #[test]
    fn default_k_heuristic() {
        assert_eq!(default_k(1), 1);
        assert_eq!(default_k(2), 2);
        assert_eq!(default_k(8), 2);
        assert_eq!(default_k(200), 10);
    }

    fn arb_points() -> impl Strategy<Value = Vec<Vec<f64>>> {
        (1usize..4).prop_flat_map(|d| prop::collection::vec(prop::collection::vec(-50.0f64..50.0, d), 2..25))
    }

    proptest! {
        #[test]
        fn fit_properties(pts in arb_points(), k in 1usize..5, seed in any::<u64>()) {
            let k = k.min(pts.len());
            let set = PointSet::new(pts.clone()).unwrap();
            let mut params = KMeansParams::new(k, seed);
            params.tol = 0.0;
            let m = fit(&set, &params).unwrap();
            prop_assert!(m.assignment.iter().all(|&a| a < k));
            prop_assert!(m.inertia >= 0.0);
            for w in m.inertia_history.windows(2) {
                prop_assert!(w[1] <= w[0] + 1e-9 * w[0].max(1.0), "{:?}", m.inertia_history);
            }
            if m.converged {
                for (p, &a) in pts.iter().zip(&m.assignment) {
                    prop_assert_eq!(assign(&m, p).unwrap(), a);
                }
            }
            // bit-reproducible
            prop_assert_eq!(&fit(&set, &params).unwrap(), &m);
        }

        #[test]
        fn permutation_invariant(pts in arb_points(), k in 1usize..4, seed in any::<u64>(), rot in 0usize..25) {
            let k = k.min(pts.len());
            let mut moved = pts.clone();
            moved.rotate_left(rot % pts.len());
            moved.reverse();
            let a = fit(&PointSet::new(pts.clone()).unwrap(), &KMeansParams::new(k, seed)).unwrap();
            let b = fit(&PointSet::new(moved.clone()).unwrap(), &KMeansParams::new(k, seed)).unwrap();
            prop_assert_eq!(a.inertia, b.inertia);
            let groups = |pts: &[Vec<f64>], asg: &[usize]| {
                let mut g: Vec<Vec<String>> = (0..k).map(|c| {
                    let mut v: Vec<String> = pts.iter().zip(asg).filter(|(_, &x)| x == c).map(|(p, _)| format!("{p:?}")).collect();
                    v.sort();
                    v
                }).filter(|v| !v.is_empty()).collect();
                g.sort();
                g
            };
            prop_assert_eq!(groups(&pts, &a.assignment), groups(&moved, &b.assignment));
        }

        #[test]
        fn small_instances_never_beat_optimum(pts in prop::collection::vec(prop::collection::vec(-5.0f64..5.0, 2), 2..8), k in 1usize..4, seed in any::<u64>()) {
            let k = k.min(pts.len());
            let m = fit(&PointSet::new(pts.clone()).unwrap(), &KMeansParams::new(k, seed)).unwrap();
            let (opt, _) = brute_force(&pts, k);
            prop_assert!(m.inertia >= opt - 1e-9);
        }

        #[test]
        fn restandardizing_is_identity(pts in prop::collection::vec(prop::collection::vec(-1e3f64..1e3, 3), 5..6)) {
            let (once, _) = standardize(&PointSet::new(pts).unwrap()).unwrap();
            let (twice, _) = standardize(&once).unwrap();
            for (a, b) in once.points().iter().zip(twice.points()) {
                for (x, y) in a.iter().zip(b) {
                    prop_assert!((x - y).abs() < 1e-9);
                }
            }
            for d in 0..3 {
                let col: Vec<f64> = once.points().iter().map(|p| p[d]).collect();
                let mean = col.iter().sum::<f64>() / col.len() as f64;
                prop_assert!(mean.abs() < 1e-9);
            }
        }
    }
}
