//! Sub-goal discovery: k-means++ over SR rows, cosine mapping of centroids to
//! landmark states, and L1-norm candidate filtering.

use std::collections::HashSet;
use std::io::Write;
use std::path::Path;

use rand::Rng as _;

use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::sr::SrMatrix;

#[derive(Clone, Debug, PartialEq)]
pub struct ClusterResult {
    pub k: usize,
    pub centroids: Vec<Vec<f64>>,
    /// Cluster id of each input vector, in input order.
    pub assignment: Vec<usize>,
    pub cluster_sizes: Vec<usize>,
    pub iterations: usize,
    /// Sum of squared distances to the assigned centroid after each Lloyd step.
    pub objective_trace: Vec<f64>,
}

impl ClusterResult {
    pub fn objective(&self, vectors: &[&[f64]]) -> f64 {
        vectors
            .iter()
            .zip(&self.assignment)
            .map(|(v, &c)| sq_dist(v, &self.centroids[c]))
            .sum()
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn count_distinct(vectors: &[&[f64]]) -> usize {
    vectors
        .iter()
        .map(|v| v.iter().map(|x| x.to_bits()).collect::<Vec<u64>>())
        .collect::<HashSet<_>>()
        .len()
}

fn nearest(v: &[f64], centroids: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (i, c) in centroids.iter().enumerate() {
        let d = sq_dist(v, c);
        if d < best.1 {
            best = (i, d);
        }
    }
    best
}

/// k-means++ seeding (D² sampling) followed by Lloyd iterations until the
/// assignment stops changing or `max_iters` is reached.
///
/// Empty clusters are reseeded with the point farthest from its centroid.
pub fn kmeans_pp(
    vectors: &[&[f64]],
    k: usize,
    rng: &mut Rng,
    max_iters: usize,
) -> Result<ClusterResult> {
    if vectors.is_empty() || k == 0 {
        return Err(Error::EmptyInput);
    }
    let distinct = count_distinct(vectors);
    if k > distinct {
        return Err(Error::TooManyClusters { k, distinct });
    }
    let n = vectors.len();

    let mut centroids: Vec<Vec<f64>> = Vec::with_capacity(k);
    centroids.push(vectors[rng.random_range(0..n)].to_vec());
    let mut d2: Vec<f64> = vectors.iter().map(|v| sq_dist(v, &centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut chosen = None;
            for (i, &w) in d2.iter().enumerate() {
                if w > 0.0 {
                    chosen = Some(i);
                    if target < w {
                        break;
                    }
                    target -= w;
                }
            }
            chosen.unwrap_or(0)
        } else {
            // unreachable while distinct >= k; keep the call total
            d2.iter()
                .enumerate()
                .fold((0, -1.0), |b, (i, &w)| if w > b.1 { (i, w) } else { b })
                .0
        };
        centroids.push(vectors[pick].to_vec());
        let last = centroids.last().map(|c| c.as_slice()).unwrap_or(&[]);
        for (w, v) in d2.iter_mut().zip(vectors) {
            *w = w.min(sq_dist(v, last));
        }
    }

    let dim = vectors[0].len();
    let mut assignment = vec![usize::MAX; n];
    let mut objective_trace = Vec::new();
    let mut iterations = 0;
    loop {
        let mut changed = false;
        let mut objective = 0.0;
        for (i, v) in vectors.iter().enumerate() {
            let (c, d) = nearest(v, &centroids);
            objective += d;
            if assignment[i] != c {
                assignment[i] = c;
                changed = true;
            }
        }
        // reseed empty clusters with the worst-fit point
        let mut sizes = vec![0usize; k];
        for &c in &assignment {
            sizes[c] += 1;
        }
        for empty in (0..k).filter(|&c| sizes[c] == 0).collect::<Vec<_>>() {
            let (far, d) = vectors
                .iter()
                .enumerate()
                .filter(|(i, _)| sizes[assignment[*i]] > 1)
                .map(|(i, v)| (i, sq_dist(v, &centroids[assignment[i]])))
                .fold((usize::MAX, -1.0), |b, x| if x.1 > b.1 { x } else { b });
            if far == usize::MAX {
                break;
            }
            sizes[assignment[far]] -= 1;
            sizes[empty] = 1;
            assignment[far] = empty;
            centroids[empty] = vectors[far].to_vec();
            objective -= d;
            changed = true;
        }
        objective_trace.push(objective);
        if !changed {
            break;
        }
        update_centroids(vectors, &assignment, &mut centroids, dim);
        iterations += 1;
        if iterations >= max_iters {
            break;
        }
    }

    let mut cluster_sizes = vec![0usize; k];
    for &c in &assignment {
        cluster_sizes[c] += 1;
    }
    Ok(ClusterResult {
        k,
        centroids,
        assignment,
        cluster_sizes,
        iterations,
        objective_trace,
    })
}

fn update_centroids(vectors: &[&[f64]], assignment: &[usize], centroids: &mut [Vec<f64>], dim: usize) {
    let k = centroids.len();
    let mut sums = vec![vec![0.0; dim]; k];
    let mut counts = vec![0usize; k];
    for (v, &c) in vectors.iter().zip(assignment) {
        counts[c] += 1;
        for (s, x) in sums[c].iter_mut().zip(v.iter()) {
            *s += x;
        }
    }
    for c in 0..k {
        if counts[c] > 0 {
            let inv = 1.0 / counts[c] as f64;
            centroids[c] = sums[c].iter().map(|s| s * inv).collect();
        }
    }
}

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SubGoal {
    pub cluster: usize,
    pub landmark: usize,
    pub cluster_size: usize,
    pub centroid: Vec<f64>,
}

/// Landmark states, one per surviving cluster.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SubGoalSet {
    pub goals: Vec<SubGoal>,
}

impl SubGoalSet {
    pub fn len(&self) -> usize {
        self.goals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.goals.is_empty()
    }

    pub fn landmarks(&self) -> Vec<usize> {
        self.goals.iter().map(|g| g.landmark).collect()
    }

    pub fn cluster_sizes(&self) -> Vec<usize> {
        self.goals.iter().map(|g| g.cluster_size).collect()
    }

    /// `cluster,landmark,size` lines under a header.
    pub fn write_text(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(out, "cluster,landmark,size")?;
        for g in &self.goals {
            writeln!(out, "{},{},{}", g.cluster, g.landmark, g.cluster_size)?;
        }
        out.flush()?;
        Ok(())
    }

    /// Reads the text form back; centroids are not stored and come back empty.
    pub fn read_text(path: impl AsRef<Path>) -> Result<SubGoalSet> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        let mut goals = Vec::new();
        for (i, line) in text.lines().enumerate().skip(1) {
            if line.trim().is_empty() {
                continue;
            }
            let f: Vec<usize> = line
                .split(',')
                .map(|x| x.trim().parse())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::format(path, format!("line {}: {e}", i + 1)))?;
            if f.len() != 3 {
                return Err(Error::format(path, format!("line {}: expected 3 fields", i + 1)));
            }
            goals.push(SubGoal {
                cluster: f[0],
                landmark: f[1],
                cluster_size: f[2],
                centroid: Vec::new(),
            });
        }
        Ok(SubGoalSet { goals })
    }
}

/// Maps every centroid to the participating state whose SR row has the
/// largest cosine similarity with it (lowest index on ties). When two
/// centroids pick the same state, the first keeps it and the second is dropped.
pub fn select_landmarks(
    sr: &SrMatrix,
    participants: &[usize],
    clusters: &ClusterResult,
) -> Result<SubGoalSet> {
    if participants.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut taken = HashSet::new();
    let mut goals = Vec::new();
    for (c, centroid) in clusters.centroids.iter().enumerate() {
        if centroid.iter().all(|&x| x == 0.0) {
            return Err(Error::Config(format!("centroid {c} is the zero vector")));
        }
        let mut best = (usize::MAX, f64::NEG_INFINITY);
        for &s in participants {
            let cs = cosine(sr.row(s), centroid);
            if cs > best.1 || (cs == best.1 && s < best.0) {
                best = (s, cs);
            }
        }
        if taken.insert(best.0) {
            goals.push(SubGoal {
                cluster: c,
                landmark: best.0,
                cluster_size: clusters.cluster_sizes[c],
                centroid: centroid.clone(),
            });
        }
    }
    Ok(SubGoalSet { goals })
}

/// Independent k-means++ runs in [`discover_subgoals`]; the lowest objective wins.
pub const KMEANS_RESTARTS: usize = 10;

/// Clusters the rows of `participants` and maps centroids to landmarks.
///
/// `k` is capped at the number of distinct participating rows. Runs
/// [`KMEANS_RESTARTS`] seedings from `rng` and keeps the first run with the
/// lowest objective.
pub fn discover_subgoals(
    sr: &SrMatrix,
    participants: &[usize],
    k: usize,
    rng: &mut Rng,
    max_iters: usize,
) -> Result<(ClusterResult, SubGoalSet)> {
    let rows: Vec<&[f64]> = participants.iter().map(|&s| sr.row(s)).collect();
    let k = k.min(count_distinct(&rows)).max(1);
    let mut clusters = kmeans_pp(&rows, k, rng, max_iters)?;
    let mut best = clusters.objective(&rows);
    for _ in 1..KMEANS_RESTARTS {
        let run = kmeans_pp(&rows, k, rng, max_iters)?;
        let obj = run.objective(&rows);
        if obj < best {
            best = obj;
            clusters = run;
        }
    }
    let goals = select_landmarks(sr, participants, &clusters)?;
    Ok((clusters, goals))
}

/// Nearest-rank percentile of an ascending slice (`p` in `[0, 100]`).
pub fn nearest_rank(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    let rank = ((p / 100.0) * n as f64).ceil() as usize;
    sorted[rank.clamp(1, n) - 1]
}

/// States whose (nonzero) L1 norm lies strictly between the `pct_min`-th and
/// `pct_max`-th nearest-rank percentiles of the nonzero norms.
pub fn filter_by_norms(norms: &[f64], pct_min: f64, pct_max: f64) -> Result<Vec<usize>> {
    if !(0.0..=100.0).contains(&pct_min) || !(0.0..=100.0).contains(&pct_max) || pct_min >= pct_max {
        return Err(Error::Config(format!(
            "need 0 <= pct_min < pct_max <= 100, got {pct_min}, {pct_max}"
        )));
    }
    let mut nonzero: Vec<f64> = norms.iter().copied().filter(|&x| x > 0.0).collect();
    if nonzero.len() < 2 {
        return Err(Error::TooFewStates {
            need: 2,
            found: nonzero.len(),
        });
    }
    nonzero.sort_by(f64::total_cmp);
    let lo = nearest_rank(&nonzero, pct_min);
    let hi = nearest_rank(&nonzero, pct_max);
    Ok(norms
        .iter()
        .enumerate()
        .filter(|(_, &x)| x > 0.0 && x > lo && x < hi)
        .map(|(s, _)| s)
        .collect())
}

/// Candidate sub-goals for the incremental setting: neither barely reached nor fully developed.
pub fn filter_candidates(sr: &SrMatrix, pct_min: f64, pct_max: f64) -> Result<Vec<usize>> {
    filter_by_norms(&sr.l1_norms(), pct_min, pct_max)
}
