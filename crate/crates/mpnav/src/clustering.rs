//! Affinity propagation over motion-primitive features.
//!
//! Exemplar-based clustering picks a small representative subset of the
//! generated primitives: each cluster center is an actual primitive, which is
//! exactly what the planner needs. The message-passing loop follows the
//! standard responsibility/availability formulation with damped updates.

use crate::mp::{featurize, FeatureScale, MotionPrimitive};
use ndarray::Array2;
use serde::{Deserialize, Serialize};

/// Self-similarity assigned to every diagonal entry of the similarity
/// matrix. Higher values yield more clusters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Preference {
    /// Median of the off-diagonal similarities. Tends to under-segment
    /// smooth motion-feature clouds.
    Median,
    /// A quantile of the off-diagonal similarities in `[0, 1]`; larger is
    /// closer to zero and yields more clusters.
    Quantile(f64),
    Value(f64),
}

impl Default for Preference {
    fn default() -> Self {
        // Reproduces roughly a 3.5x compression of a teleoperation-style
        // feature cloud, which is where exemplar sets stay rich enough to
        // span the achievable motions.
        Preference::Quantile(0.9)
    }
}

/// Message-passing parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ApParams {
    /// Damping factor in `[0.5, 1)`.
    pub damping: f64,
    pub max_iter: usize,
    /// Sweeps the exemplar set must stay unchanged to declare convergence.
    pub convergence_iter: usize,
    pub preference: Preference,
}

impl Default for ApParams {
    fn default() -> Self {
        ApParams {
            damping: 0.9,
            max_iter: 500,
            convergence_iter: 15,
            preference: Preference::default(),
        }
    }
}

/// Pairwise similarity matrix: `S[i][k] = -||f_i - f_k||^2` off the
/// diagonal, the preference on it.
pub fn similarity_matrix<T: AsRef<[f64]>>(features: &[T], preference: Preference) -> Array2<f64> {
    let n = features.len();
    let mut s = Array2::zeros((n, n));
    let mut off_diagonal = Vec::with_capacity(n.saturating_sub(1) * n);
    for i in 0..n {
        for k in 0..n {
            if i == k {
                continue;
            }
            let fi = features[i].as_ref();
            let fk = features[k].as_ref();
            debug_assert_eq!(fi.len(), fk.len());
            let d2: f64 = fi.iter().zip(fk).map(|(a, b)| (a - b) * (a - b)).sum();
            s[[i, k]] = -d2;
            off_diagonal.push(-d2);
        }
    }
    let pref = match preference {
        Preference::Value(v) => v,
        Preference::Median => median(&mut off_diagonal),
        Preference::Quantile(q) => quantile(&mut off_diagonal, q),
    };
    for k in 0..n {
        s[[k, k]] = pref;
    }
    s
}

fn median(values: &mut [f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    values.sort_by(f64::total_cmp);
    let mid = values.len() / 2;
    if values.len() % 2 == 1 {
        values[mid]
    } else {
        0.5 * (values[mid - 1] + values[mid])
    }
}

fn quantile(values: &mut [f64], q: f64) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    values.sort_by(f64::total_cmp);
    let idx = ((values.len() - 1) as f64 * q.clamp(0.0, 1.0)).round() as usize;
    values[idx]
}

/// Clustering result: exemplar indices (sorted) and, per input point, the
/// index of its exemplar.
#[derive(Debug, Clone, PartialEq)]
pub struct ApResult {
    pub exemplars: Vec<usize>,
    pub assignment: Vec<usize>,
    pub converged: bool,
    pub iterations: usize,
}

/// One damped responsibility + availability sweep. Returns the largest
/// absolute message change, which vanishes at a fixed point.
fn ap_sweep(s: &Array2<f64>, r: &mut Array2<f64>, a: &mut Array2<f64>, damping: f64) -> f64 {
    let n = s.nrows();
    let keep = damping;
    let fresh = 1.0 - damping;
    let mut delta = 0.0f64;

    // Responsibilities: R[i,k] = S[i,k] - max_{k' != k} (A[i,k'] + S[i,k']).
    for i in 0..n {
        let mut max1 = f64::NEG_INFINITY;
        let mut max2 = f64::NEG_INFINITY;
        let mut argmax = 0;
        for k in 0..n {
            let v = a[[i, k]] + s[[i, k]];
            if v > max1 {
                max2 = max1;
                max1 = v;
                argmax = k;
            } else if v > max2 {
                max2 = v;
            }
        }
        for k in 0..n {
            let competing = if k == argmax { max2 } else { max1 };
            let raw = s[[i, k]] - competing;
            let new = keep * r[[i, k]] + fresh * raw;
            delta = delta.max((new - r[[i, k]]).abs());
            r[[i, k]] = new;
        }
    }

    // Availabilities: A[i,k] = min(0, R[k,k] + sum_{i' not in {i,k}} max(0, R[i',k]))
    // and A[k,k] = sum_{i' != k} max(0, R[i',k]).
    for k in 0..n {
        let mut sum_pos = 0.0;
        for i in 0..n {
            if i != k {
                sum_pos += r[[i, k]].max(0.0);
            }
        }
        for i in 0..n {
            let raw = if i == k {
                sum_pos
            } else {
                (r[[k, k]] + sum_pos - r[[i, k]].max(0.0)).min(0.0)
            };
            let new = keep * a[[i, k]] + fresh * raw;
            delta = delta.max((new - a[[i, k]]).abs());
            a[[i, k]] = new;
        }
    }
    delta
}

fn exemplar_decisions(r: &Array2<f64>, a: &Array2<f64>) -> Vec<bool> {
    (0..r.nrows()).map(|k| r[[k, k]] + a[[k, k]] > 0.0).collect()
}

/// Run affinity propagation on a square similarity matrix.
///
/// Exemplars are input points; every point is assigned to the exemplar that
/// maximizes its similarity (ties to the lowest index). If the message
/// passing ends with no self-elected exemplar, the point with the strongest
/// self-evidence is used as a single exemplar and the run is flagged
/// non-converged.
pub fn affinity_propagation(s: &Array2<f64>, params: &ApParams) -> ApResult {
    assert!(s.is_square(), "similarity matrix must be square");
    assert!(
        (0.5..1.0).contains(&params.damping),
        "damping must be in [0.5, 1)"
    );
    let n = s.nrows();
    if n == 0 {
        return ApResult { exemplars: vec![], assignment: vec![], converged: true, iterations: 0 };
    }
    if n == 1 {
        return ApResult { exemplars: vec![0], assignment: vec![0], converged: true, iterations: 0 };
    }

    let mut r = Array2::zeros((n, n));
    let mut a = Array2::zeros((n, n));
    let mut stable_for = 0;
    let mut last = vec![false; n];
    let mut iterations = 0;
    let mut converged = false;
    // Message-residual scale for the fixed-point check: damped iterations
    // can hold a transient decision plateau for many sweeps, so stability of
    // the exemplar set alone is not enough.
    let residual_tol = 1e-6 * s.iter().fold(1.0f64, |m, v| m.max(v.abs()));

    for _ in 0..params.max_iter {
        let delta = ap_sweep(s, &mut r, &mut a, params.damping);
        iterations += 1;
        let decisions = exemplar_decisions(&r, &a);
        if decisions == last {
            stable_for += 1;
        } else {
            stable_for = 0;
            last = decisions;
        }
        if stable_for >= params.convergence_iter
            && delta < residual_tol
            && last.iter().any(|&e| e)
        {
            converged = true;
            break;
        }
    }

    let mut exemplars: Vec<usize> = last
        .iter()
        .enumerate()
        .filter_map(|(k, &e)| e.then_some(k))
        .collect();
    if exemplars.is_empty() {
        // Degenerate data (e.g. all-identical points): fall back to the
        // strongest self-evidence.
        let best = (0..n)
            .max_by(|&i, &j| (r[[i, i]] + a[[i, i]]).total_cmp(&(r[[j, j]] + a[[j, j]])))
            .unwrap_or(0);
        exemplars.push(best);
        converged = false;
    }

    let assignment = (0..n)
        .map(|i| {
            if exemplars.contains(&i) {
                return i;
            }
            *exemplars
                .iter()
                .max_by(|&&k1, &&k2| match s[[i, k1]].total_cmp(&s[[i, k2]]) {
                    std::cmp::Ordering::Equal => k2.cmp(&k1),
                    ord => ord,
                })
                .unwrap()
        })
        .collect();

    ApResult { exemplars, assignment, converged, iterations }
}

/// Active or candidate status of a motion-primitive cluster.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClusterStatus {
    /// Enabled for planning.
    Active,
    /// Observed but not yet trusted; ineligible for planning.
    Candidate,
}

/// A cluster of similar motion primitives represented by one exemplar, with
/// the vote score maintained by the adaptive loop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MPCluster {
    pub exemplar_id: u64,
    /// Member primitive ids, sorted; always contains `exemplar_id`.
    pub member_ids: Vec<u64>,
    pub votes: i32,
    pub status: ClusterStatus,
}

/// Featurize, build similarities, and cluster a primitive set. Clusters come
/// back sorted by exemplar id with zero votes and active status.
pub fn build_clusters(
    mps: &[MotionPrimitive],
    scale: &FeatureScale,
    params: &ApParams,
) -> Vec<MPCluster> {
    if mps.is_empty() {
        return Vec::new();
    }
    let features: Vec<[f64; crate::mp::FEATURE_LEN]> =
        mps.iter().map(|mp| featurize(mp, scale)).collect();
    let s = similarity_matrix(&features, params.preference);
    let result = affinity_propagation(&s, params);

    let mut clusters: Vec<MPCluster> = result
        .exemplars
        .iter()
        .map(|&k| MPCluster {
            exemplar_id: mps[k].id,
            member_ids: Vec::new(),
            votes: 0,
            status: ClusterStatus::Active,
        })
        .collect();
    for (i, &k) in result.assignment.iter().enumerate() {
        let pos = result.exemplars.iter().position(|&e| e == k).unwrap();
        clusters[pos].member_ids.push(mps[i].id);
    }
    for c in &mut clusters {
        c.member_ids.sort_unstable();
    }
    clusters.sort_by_key(|c| c.exemplar_id);
    clusters
}

/// On-disk cluster set, stored alongside the primitive library.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterSet {
    pub clusters: Vec<MPCluster>,
}

impl ClusterSet {
    pub fn load(path: &std::path::Path) -> Result<Self, crate::mp::LibraryIoError> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }

    pub fn save(&self, path: &std::path::Path) -> Result<(), crate::mp::LibraryIoError> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }
}
