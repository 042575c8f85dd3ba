//! Bottom-up clustering of correspondences on their compatibility vectors.
//!
//! Every correspondence starts as its own group, represented by its
//! compatibility vector. The closest pair of groups under the Tanimoto distance
//! is merged until the closest pair is farther apart than a threshold. A merged
//! group is represented by the elementwise minimum of the two representations.
//!
//! The min-update breaks the Lance-Williams recurrence, so the distance from the
//! merged group to every other group is recomputed from the vectors. A full
//! distance matrix plus a per-group nearest-neighbour cache (over higher ids
//! only) keeps each merge at `O(n²)`.

use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::compatibility::CompatibilityMatrix;

/// One group of the partition.
#[derive(Debug, Clone, PartialEq)]
pub struct Group {
    /// Sorted ascending.
    pub members: Vec<usize>,
    pub representation: Vec<f32>,
}

/// A merge executed during clustering. `kept` is the surviving (smaller) id.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Merge {
    pub kept: usize,
    pub absorbed: usize,
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterState {
    /// Group id of every correspondence.
    pub assignments: Vec<usize>,
    /// Group id is the smallest member index.
    pub groups: BTreeMap<usize, Group>,
    /// Merge history in execution order.
    pub merges: Vec<Merge>,
}

impl ClusterState {
    pub fn active_count(&self) -> usize {
        self.groups.len()
    }

    /// Member lists in ascending group id order.
    pub fn member_lists(&self) -> Vec<Vec<usize>> {
        self.groups.values().map(|g| g.members.clone()).collect()
    }
}

/// Tanimoto distance `1 − ⟨p,q⟩ / (‖p‖² + ‖q‖² − ⟨p,q⟩)`.
pub fn group_distance(p: &[f32], q: &[f32]) -> f64 {
    tanimoto(dot(p, q), dot(p, p), dot(q, q))
}

#[inline]
fn tanimoto(pq: f64, pp: f64, qq: f64) -> f64 {
    let denom = pp + qq - pq;
    if denom <= 0.0 {
        return 1.0;
    }
    (1.0 - pq / denom).max(0.0)
}

/// Eight independent lanes so the loop vectorizes; summed in f64.
#[inline]
fn dot(a: &[f32], b: &[f32]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f32; 8];
    let ca = a.chunks_exact(8);
    let cb = b.chunks_exact(8);
    let tail: f64 = ca
        .remainder()
        .iter()
        .zip(cb.remainder())
        .map(|(x, y)| (*x as f64) * (*y as f64))
        .sum();
    for (x, y) in ca.zip(cb) {
        for k in 0..8 {
            acc[k] += x[k] * y[k];
        }
    }
    acc.iter().map(|&v| v as f64).sum::<f64>() + tail
}

struct Agglomerator {
    n: usize,
    reps: Vec<f32>,
    norms: Vec<f64>,
    dist: Vec<f64>,
    /// Sorted ascending.
    active: Vec<usize>,
    /// Nearest active group with a larger id, and its distance.
    nearest: Vec<Option<(usize, f64)>>,
    members: Vec<Vec<usize>>,
}

impl Agglomerator {
    fn new(matrix: &CompatibilityMatrix) -> Self {
        let n = matrix.len();
        let reps = matrix.as_slice().to_vec();
        let norms: Vec<f64> = (0..n).map(|i| {
            let r = &reps[i * n..(i + 1) * n];
            dot(r, r)
        }).collect();
        let mut dist = vec![0.0f64; n * n];
        dist.par_chunks_mut(n).enumerate().for_each(|(i, row)| {
            let ri = &reps[i * n..(i + 1) * n];
            for j in i + 1..n {
                let rj = &reps[j * n..(j + 1) * n];
                row[j] = tanimoto(dot(ri, rj), norms[i], norms[j]);
            }
        });
        for i in 0..n {
            for j in 0..i {
                dist[i * n + j] = dist[j * n + i];
            }
        }
        let mut state = Self {
            n,
            reps,
            norms,
            dist,
            active: (0..n).collect(),
            nearest: vec![None; n],
            members: (0..n).map(|i| vec![i]).collect(),
        };
        for i in 0..n {
            state.rescan(i);
        }
        state
    }

    fn rep(&self, i: usize) -> &[f32] {
        &self.reps[i * self.n..(i + 1) * self.n]
    }

    fn rescan(&mut self, i: usize) {
        let start = self.active.partition_point(|&j| j <= i);
        let row = &self.dist[i * self.n..(i + 1) * self.n];
        let mut best: Option<(usize, f64)> = None;
        for &j in &self.active[start..] {
            let d = row[j];
            if best.is_none_or(|(_, bd)| d < bd) {
                best = Some((j, d));
            }
        }
        self.nearest[i] = best;
    }

    /// Closest pair, ties broken toward the lexicographically smallest ids.
    fn closest_pair(&self) -> Option<(usize, usize, f64)> {
        let mut best: Option<(usize, usize, f64)> = None;
        for &i in &self.active {
            if let Some((j, d)) = self.nearest[i] {
                if best.is_none_or(|(_, _, bd)| d < bd) {
                    best = Some((i, j, d));
                }
            }
        }
        best
    }

    fn merge(&mut self, a: usize, b: usize) {
        debug_assert!(a < b);
        let n = self.n;
        let pos = self.active.binary_search(&b).expect("absorbed group is active");
        self.active.remove(pos);
        self.nearest[b] = None;
        let absorbed = std::mem::take(&mut self.members[b]);
        self.members[a].extend(absorbed);

        let (head, tail) = self.reps.split_at_mut(b * n);
        let rep_a = &mut head[a * n..(a + 1) * n];
        for (x, y) in rep_a.iter_mut().zip(&tail[..n]) {
            *x = x.min(*y);
        }
        let norm_a = dot(self.rep(a), self.rep(a));
        self.norms[a] = norm_a;
        let rep_a = self.rep(a);
        let updates: Vec<(usize, f64)> = self
            .active
            .par_iter()
            .filter(|&&c| c != a)
            .map(|&c| (c, tanimoto(dot(rep_a, self.rep(c)), norm_a, self.norms[c])))
            .collect();
        for &(c, d) in &updates {
            self.dist[a * n + c] = d;
            self.dist[c * n + a] = d;
        }

        for idx in 0..self.active.len() {
            let c = self.active[idx];
            if c == a || c > b {
                continue;
            }
            match self.nearest[c] {
                Some((j, _)) if j == a || j == b => self.rescan(c),
                Some((j, d)) if c < a => {
                    let da = self.dist[c * n + a];
                    if da < d || (da == d && a < j) {
                        self.nearest[c] = Some((a, da));
                    }
                }
                None if c < a => self.rescan(c),
                _ => {}
            }
        }
        self.rescan(a);
    }
}

/// Merges groups while the closest pair is at distance `≤ min_dist_thresh`.
pub fn agglomerate(matrix: &CompatibilityMatrix, min_dist_thresh: f64) -> ClusterState {
    let n = matrix.len();
    let mut merges = Vec::new();
    let mut agg = Agglomerator::new(matrix);
    while let Some((a, b, d)) = agg.closest_pair() {
        if d > min_dist_thresh {
            break;
        }
        agg.merge(a, b);
        merges.push(Merge {
            kept: a,
            absorbed: b,
            distance: d,
        });
    }

    let mut assignments = vec![0usize; n];
    let mut groups = BTreeMap::new();
    for &id in &agg.active {
        let mut members = std::mem::take(&mut agg.members[id]);
        members.sort_unstable();
        for &m in &members {
            assignments[m] = id;
        }
        groups.insert(
            id,
            Group {
                members,
                representation: agg.rep(id).to_vec(),
            },
        );
    }
    ClusterState {
        assignments,
        groups,
        merges,
    }
}
