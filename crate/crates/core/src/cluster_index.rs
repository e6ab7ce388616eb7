//! The 2-means Cluster Index and its exhaustive-enumeration oracle.
//!
//! For a 2-partition `C_1, C_2` of the rows of `X`,
//!
//! ```text
//! CI = sum_k sum_{i in C_k} |x_i - mean_k|^2  /  sum_i |x_i - mean|^2
//! ```
//!
//! Small values mean the partition explains most of the scatter. The index is
//! invariant to translation, rotation and scaling of the data.

use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use crate::assigners::Constraints;
use crate::error::{Error, Result};

/// Cluster id. Cluster 1 is the side of the observed `Pos` labels whenever
/// labels are present.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "u8", try_from = "u8")]
pub enum Cluster {
    One,
    Two,
}

impl Cluster {
    pub fn other(self) -> Cluster {
        match self {
            Cluster::One => Cluster::Two,
            Cluster::Two => Cluster::One,
        }
    }

    pub fn index(self) -> usize {
        match self {
            Cluster::One => 0,
            Cluster::Two => 1,
        }
    }
}

impl From<Cluster> for u8 {
    fn from(c: Cluster) -> u8 {
        c.index() as u8 + 1
    }
}

impl TryFrom<u8> for Cluster {
    type Error = String;
    fn try_from(v: u8) -> std::result::Result<Self, String> {
        match v {
            1 => Ok(Cluster::One),
            2 => Ok(Cluster::Two),
            _ => Err(format!("cluster id must be 1 or 2, got {v}")),
        }
    }
}

/// Where a row's cluster came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    ObservedLabel,
    Predicted,
}

/// A full 2-cluster assignment together with its CI.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusterAssignment {
    pub clusters: Vec<Cluster>,
    pub ci: f64,
    pub provenance: Vec<Provenance>,
}

impl ClusterAssignment {
    /// Computes the CI of `clusters` on `x`.
    pub fn new(x: ArrayView2<f64>, clusters: Vec<Cluster>, provenance: Vec<Provenance>) -> Result<Self> {
        debug_assert_eq!(clusters.len(), provenance.len());
        let ci = cluster_index(x, &clusters)?;
        Ok(ClusterAssignment {
            clusters,
            ci,
            provenance,
        })
    }

    pub fn sizes(&self) -> [usize; 2] {
        let ones = self.clusters.iter().filter(|&&c| c == Cluster::One).count();
        [ones, self.clusters.len() - ones]
    }
}

/// Within-cluster over total sum of squares.
pub fn cluster_index(x: ArrayView2<f64>, clusters: &[Cluster]) -> Result<f64> {
    let (n, d) = x.dim();
    if clusters.len() != n {
        return Err(Error::InvalidArgument(format!(
            "{} cluster ids for {n} rows",
            clusters.len()
        )));
    }
    let mut sums = [vec![0.0; d], vec![0.0; d]];
    let mut counts = [0usize; 2];
    for (row, c) in x.rows().into_iter().zip(clusters) {
        counts[c.index()] += 1;
        for (s, v) in sums[c.index()].iter_mut().zip(row) {
            *s += v;
        }
    }
    if counts[0] == 0 {
        return Err(Error::EmptyCluster(1));
    }
    if counts[1] == 0 {
        return Err(Error::EmptyCluster(2));
    }
    let overall: Vec<f64> = (0..d).map(|j| (sums[0][j] + sums[1][j]) / n as f64).collect();
    let means: [Vec<f64>; 2] = [0, 1].map(|k| sums[k].iter().map(|s| s / counts[k] as f64).collect());
    let (mut within, mut total) = (0.0, 0.0);
    for (row, c) in x.rows().into_iter().zip(clusters) {
        let m = &means[c.index()];
        for j in 0..d {
            let v = row[j];
            within += (v - m[j]) * (v - m[j]);
            total += (v - overall[j]) * (v - overall[j]);
        }
    }
    if total <= 0.0 {
        return Err(Error::Degenerate("total sum of squares is zero".into()));
    }
    Ok((within / total).clamp(0.0, 1.0))
}

/// Largest `n` accepted by [`brute_force_min_ci`].
pub const BRUTE_FORCE_MAX_N: usize = 16;

/// Exhaustive minimum CI over every 2-partition that satisfies the optional
/// constraints.
///
/// Row 0 is always in cluster 1. Ties are broken by the lexicographically
/// smallest cluster-1 index set.
pub fn brute_force_min_ci(x: ArrayView2<f64>, constraints: Option<&Constraints>) -> Result<(Vec<Cluster>, f64)> {
    let n = x.nrows();
    if n > BRUTE_FORCE_MAX_N {
        return Err(Error::InvalidArgument(format!(
            "enumeration is limited to n <= {BRUTE_FORCE_MAX_N}, got {n}"
        )));
    }
    if n < 2 {
        return Err(Error::TooFewRows { min: 2, found: n });
    }
    let feasible = |clusters: &[Cluster]| -> bool {
        constraints.is_none_or(|c| {
            c.must_link.iter().all(|&(a, b)| clusters[a] == clusters[b])
                && c.cannot_link.iter().all(|&(a, b)| clusters[a] != clusters[b])
        })
    };
    let ones =
        |clusters: &[Cluster]| -> Vec<usize> { (0..clusters.len()).filter(|&i| clusters[i] == Cluster::One).collect() };
    let mut best: Option<(Vec<Cluster>, f64)> = None;
    let mut clusters = vec![Cluster::One; n];
    for mask in 1u32..(1u32 << (n - 1)) {
        for (i, c) in clusters.iter_mut().enumerate().skip(1) {
            *c = if mask & (1 << (i - 1)) != 0 {
                Cluster::Two
            } else {
                Cluster::One
            };
        }
        if !feasible(&clusters) {
            continue;
        }
        let ci = cluster_index(x, &clusters)?;
        let better = match &best {
            None => true,
            Some((b, bci)) => ci < *bci || (ci == *bci && ones(&clusters) < ones(b)),
        };
        if better {
            best = Some((clusters.clone(), ci));
        }
    }
    best.ok_or_else(|| Error::Infeasible("no 2-partition satisfies the constraints".into()))
}
