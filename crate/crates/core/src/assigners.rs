//! Strategies that complete a partially labeled dataset into a full
//! 2-cluster assignment.
//!
//! * [`two_means`]: k-means with k = 2, ignoring labels.
//! * [`cop_kmeans`]: k-means under must-link / cannot-link constraints
//!   derived from the observed labels.
//! * [`s3lda_fit`] / [`l1_lda_fit`] + [`assign_by_direction`]: fit a linear
//!   direction and split unlabeled rows by the sign of their projection.
//!
//! Both k-means variants run on the same engine. Rows joined by must-links
//! are collapsed into one weighted point; cannot-links between those points
//! form a graph whose connected components must be bipartite, and each
//! component is placed by whichever of its two orientations is cheaper for
//! the current centroids. That assignment step is exact for k = 2, so the
//! Lloyd objective never increases.

use std::str::FromStr;

use ndarray::{Array1, ArrayView2};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::cluster_index::{cluster_index, Cluster, ClusterAssignment, Provenance};
use crate::dataset::{Label, PartiallyLabeledDataset};
use crate::error::{Error, Result};
use crate::linalg::{self, sq_dist};
use crate::stream::{purpose, Seed};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AssignerKind {
    TwoMeans,
    CopKmeans,
    S3lda,
    L1Lda,
}

impl AssignerKind {
    pub fn id(self) -> &'static str {
        match self {
            AssignerKind::TwoMeans => "two-means",
            AssignerKind::CopKmeans => "cop-kmeans",
            AssignerKind::S3lda => "s3lda",
            AssignerKind::L1Lda => "l1-lda",
        }
    }

    /// Whether the assigner needs both label classes to be observed.
    pub fn needs_labels(self) -> bool {
        matches!(self, AssignerKind::S3lda | AssignerKind::L1Lda)
    }
}

impl FromStr for AssignerKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "two-means" | "kmeans" | "2-means" => Ok(AssignerKind::TwoMeans),
            "cop-kmeans" | "copkmeans" => Ok(AssignerKind::CopKmeans),
            "s3lda" => Ok(AssignerKind::S3lda),
            "l1-lda" | "l1lda" => Ok(AssignerKind::L1Lda),
            other => Err(Error::InvalidArgument(format!(
                "unknown assigner {other:?} (expected two-means, cop-kmeans, s3lda or l1-lda)"
            ))),
        }
    }
}

/// Assigner choice and its tuning parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AssignerSpec {
    pub kind: AssignerKind,
    /// k-means restarts.
    pub restarts: usize,
    /// Lloyd iterations per restart.
    pub max_iters: usize,
    /// Weight of the unlabeled hinge term in the S3LDA objective.
    pub c: f64,
    /// L1 penalty of L1-LDA.
    pub penalty: f64,
    /// Projected subgradient iterations of S3LDA.
    pub steps: usize,
}

impl Default for AssignerSpec {
    fn default() -> Self {
        AssignerSpec {
            kind: AssignerKind::TwoMeans,
            restarts: 10,
            max_iters: 100,
            c: 1.0,
            penalty: 0.1,
            steps: 500,
        }
    }
}

impl AssignerSpec {
    pub fn new(kind: AssignerKind) -> Self {
        AssignerSpec {
            kind,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.restarts == 0 || self.max_iters == 0 || self.steps == 0 {
            return Err(Error::InvalidArgument(
                "restarts, max_iters and steps must be at least 1".into(),
            ));
        }
        if !(self.c >= 0.0 && self.penalty >= 0.0) {
            return Err(Error::InvalidArgument("c and penalty must be nonnegative".into()));
        }
        Ok(())
    }
}

/// Unit-norm linear direction with intercept fixed at zero.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Direction {
    pub omega: Array1<f64>,
    pub intercept: f64,
}

impl Direction {
    pub fn new(omega: Array1<f64>) -> Result<Self> {
        let norm = omega.dot(&omega).sqrt();
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(Error::InvalidArgument("direction must be nonzero and finite".into()));
        }
        Ok(Direction {
            omega: omega / norm,
            intercept: 0.0,
        })
    }
}

/// Pairwise clustering constraints over row indices (zero-based).
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Constraints {
    pub must_link: Vec<(usize, usize)>,
    pub cannot_link: Vec<(usize, usize)>,
}

impl Constraints {
    pub fn is_empty(&self) -> bool {
        self.must_link.is_empty() && self.cannot_link.is_empty()
    }

    pub fn violations(&self, clusters: &[Cluster]) -> usize {
        self.must_link
            .iter()
            .filter(|&&(a, b)| clusters[a] != clusters[b])
            .count()
            + self
                .cannot_link
                .iter()
                .filter(|&&(a, b)| clusters[a] == clusters[b])
                .count()
    }
}

/// Must-links between rows sharing an observed label, cannot-links between
/// every `Pos`/`Neg` pair. Pairs are `(i, j)` with `i < j`.
pub fn derive_constraints(labels: &[Label]) -> Constraints {
    let mut out = Constraints::default();
    for i in 0..labels.len() {
        if !labels[i].is_observed() {
            continue;
        }
        for j in i + 1..labels.len() {
            if !labels[j].is_observed() {
                continue;
            }
            if labels[i] == labels[j] {
                out.must_link.push((i, j));
            } else {
                out.cannot_link.push((i, j));
            }
        }
    }
    out
}

// ---------------------------------------------------------------------------
// constrained Lloyd engine

struct Group {
    rows: Vec<usize>,
    point: Vec<f64>,
    weight: f64,
}

/// Must-link groups plus a 2-coloring of each cannot-link component.
struct Problem<'a> {
    x: ArrayView2<'a, f64>,
    groups: Vec<Group>,
    /// Per component: group ids and their side (false = same side as the
    /// component's first group).
    components: Vec<Vec<(usize, bool)>>,
}

fn find(parent: &mut [usize], mut i: usize) -> usize {
    while parent[i] != i {
        parent[i] = parent[parent[i]];
        i = parent[i];
    }
    i
}

impl<'a> Problem<'a> {
    fn new(x: ArrayView2<'a, f64>, constraints: &Constraints) -> Result<Self> {
        let (n, d) = x.dim();
        let mut parent: Vec<usize> = (0..n).collect();
        for &(a, b) in &constraints.must_link {
            if a >= n || b >= n {
                return Err(Error::InvalidArgument(format!("constraint ({a}, {b}) out of range")));
            }
            let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
            if ra != rb {
                parent[ra.max(rb)] = ra.min(rb);
            }
        }
        let mut group_of = vec![usize::MAX; n];
        let mut groups: Vec<Group> = Vec::new();
        for i in 0..n {
            let r = find(&mut parent, i);
            if group_of[r] == usize::MAX {
                group_of[r] = groups.len();
                groups.push(Group {
                    rows: Vec::new(),
                    point: vec![0.0; d],
                    weight: 0.0,
                });
            }
            let g = group_of[r];
            group_of[i] = g;
            groups[g].rows.push(i);
        }
        for g in &mut groups {
            for &i in &g.rows {
                for (p, v) in g.point.iter_mut().zip(x.row(i)) {
                    *p += v;
                }
            }
            g.weight = g.rows.len() as f64;
            for p in &mut g.point {
                *p /= g.weight;
            }
        }

        let mut adj: Vec<Vec<usize>> = vec![Vec::new(); groups.len()];
        for &(a, b) in &constraints.cannot_link {
            if a >= n || b >= n {
                return Err(Error::InvalidArgument(format!("constraint ({a}, {b}) out of range")));
            }
            let (ga, gb) = (group_of[a], group_of[b]);
            if ga == gb {
                return Err(Error::ContradictoryConstraints(format!(
                    "rows {a} and {b} are must-linked and cannot-linked"
                )));
            }
            adj[ga].push(gb);
            adj[gb].push(ga);
        }
        let mut side: Vec<Option<bool>> = vec![None; groups.len()];
        let mut components = Vec::new();
        for start in 0..groups.len() {
            if side[start].is_some() {
                continue;
            }
            side[start] = Some(false);
            let mut comp = vec![(start, false)];
            let mut head = 0;
            while head < comp.len() {
                let (g, s) = comp[head];
                head += 1;
                for &h in &adj[g] {
                    match side[h] {
                        None => {
                            side[h] = Some(!s);
                            comp.push((h, !s));
                        }
                        Some(t) if t == s => {
                            return Err(Error::Infeasible("cannot-link constraints admit no 2-coloring".into()))
                        }
                        Some(_) => {}
                    }
                }
            }
            components.push(comp);
        }
        Ok(Problem { x, groups, components })
    }

    fn cost(&self, g: usize, centroid: &[f64]) -> f64 {
        self.groups[g].weight * sq_dist(&self.groups[g].point, centroid)
    }

    /// Exact optimal constrained assignment of groups for fixed centroids.
    fn assign(&self, centroids: &[Vec<f64>; 2], out: &mut [Cluster]) {
        for comp in &self.components {
            let (mut keep, mut swap) = (0.0, 0.0);
            for &(g, s) in comp {
                let (c0, c1) = (self.cost(g, &centroids[0]), self.cost(g, &centroids[1]));
                if s {
                    keep += c1;
                    swap += c0;
                } else {
                    keep += c0;
                    swap += c1;
                }
            }
            let flip = swap < keep;
            for &(g, s) in comp {
                out[g] = if s != flip { Cluster::Two } else { Cluster::One };
            }
        }
    }

    fn centroids(&self, assignment: &[Cluster]) -> ([Vec<f64>; 2], [f64; 2]) {
        let d = self.x.ncols();
        let mut c = [vec![0.0; d], vec![0.0; d]];
        let mut w = [0.0; 2];
        for (g, cl) in self.groups.iter().zip(assignment) {
            let k = cl.index();
            w[k] += g.weight;
            for (a, p) in c[k].iter_mut().zip(&g.point) {
                *a += g.weight * p;
            }
        }
        for k in 0..2 {
            if w[k] > 0.0 {
                for a in &mut c[k] {
                    *a /= w[k];
                }
            }
        }
        (c, w)
    }

    /// Row-level within-cluster sum of squares about the given centroids.
    fn row_objective(&self, assignment: &[Cluster], centroids: &[Vec<f64>; 2]) -> f64 {
        self.groups
            .iter()
            .zip(assignment)
            .map(|(g, cl)| {
                g.rows
                    .iter()
                    .map(|&i| {
                        self.x
                            .row(i)
                            .iter()
                            .zip(&centroids[cl.index()])
                            .map(|(a, b)| (a - b) * (a - b))
                            .sum::<f64>()
                    })
                    .sum::<f64>()
            })
            .sum()
    }

    /// Weighted k-means++ seeding over group points.
    fn seed_centroids<R: Rng>(&self, rng: &mut R) -> [Vec<f64>; 2] {
        let total: f64 = self.groups.iter().map(|g| g.weight).sum();
        let first = pick_weighted(self.groups.iter().map(|g| g.weight), total, rng);
        let c0 = self.groups[first].point.clone();
        let dist: Vec<f64> = self.groups.iter().map(|g| g.weight * sq_dist(&g.point, &c0)).collect();
        let dsum: f64 = dist.iter().sum();
        let second = if dsum > 0.0 {
            pick_weighted(dist.iter().copied(), dsum, rng)
        } else {
            (first + 1) % self.groups.len()
        };
        [c0, self.groups[second].point.clone()]
    }

    /// Moves the group farthest from its centroid into an empty cluster.
    /// Only unconstrained groups (singleton components) can move.
    fn fill_empty(&self, assignment: &mut [Cluster], centroids: &[Vec<f64>; 2], weights: &[f64; 2]) -> bool {
        let Some(empty) = (0..2).find(|&k| weights[k] == 0.0) else {
            return false;
        };
        let donor = self
            .components
            .iter()
            .filter(|c| c.len() == 1)
            .map(|c| c[0].0)
            .map(|g| (g, self.cost(g, &centroids[assignment[g].index()])))
            .max_by(|a, b| a.1.total_cmp(&b.1).then(b.0.cmp(&a.0)));
        match donor {
            Some((g, _)) => {
                assignment[g] = if empty == 0 { Cluster::One } else { Cluster::Two };
                true
            }
            None => false,
        }
    }

    fn lloyd<R: Rng>(&self, max_iters: usize, rng: &mut R, mut trace: Option<&mut Vec<f64>>) -> Vec<Cluster> {
        let mut centroids = self.seed_centroids(rng);
        let mut assignment = vec![Cluster::One; self.groups.len()];
        self.assign(&centroids, &mut assignment);
        for _ in 0..max_iters {
            let (mut c, w) = self.centroids(&assignment);
            if self.fill_empty(&mut assignment, &c, &w) {
                c = self.centroids(&assignment).0;
            }
            centroids = c;
            if let Some(t) = trace.as_deref_mut() {
                t.push(self.row_objective(&assignment, &centroids));
            }
            let mut next = assignment.clone();
            self.assign(&centroids, &mut next);
            if next == assignment {
                break;
            }
            assignment = next;
        }
        assignment
    }

    fn rows_from_groups(&self, groups: &[Cluster]) -> Vec<Cluster> {
        let mut rows = vec![Cluster::One; self.x.nrows()];
        for (g, cl) in self.groups.iter().zip(groups) {
            for &i in &g.rows {
                rows[i] = *cl;
            }
        }
        rows
    }
}

fn pick_weighted<R: Rng>(weights: impl Iterator<Item = f64>, total: f64, rng: &mut R) -> usize {
    let target = rng.random::<f64>() * total;
    let mut acc = 0.0;
    let mut last = 0;
    for (i, w) in weights.enumerate() {
        if w > 0.0 {
            last = i;
            acc += w;
            if target < acc {
                return i;
            }
        }
    }
    last
}

fn ensure_spread(x: ArrayView2<f64>) -> Result<()> {
    if x.nrows() < 2 {
        return Err(Error::TooFewRows {
            min: 2,
            found: x.nrows(),
        });
    }
    let (c, _) = linalg::centered(x);
    if c.iter().all(|&v| v == 0.0) {
        return Err(Error::Degenerate("total sum of squares is zero".into()));
    }
    Ok(())
}

/// Relabels so cluster 1 holds the observed `Pos` rows (or, without `Pos`
/// rows, cluster 2 holds the `Neg` rows; without any labels, cluster 1 holds
/// row 0).
fn canonicalize(clusters: &mut [Cluster], labels: Option<&[Label]>) {
    let anchor = labels.and_then(|l| {
        l.iter()
            .position(|&v| v == Label::Pos)
            .map(|i| (i, Cluster::One))
            .or_else(|| l.iter().position(|&v| v == Label::Neg).map(|i| (i, Cluster::Two)))
    });
    let (row, want) = anchor.unwrap_or((0, Cluster::One));
    if clusters[row] != want {
        for c in clusters.iter_mut() {
            *c = c.other();
        }
    }
}

/// Best-of-restarts constrained 2-means. Selection is by CI, then by
/// restart index.
pub fn constrained_two_means(
    x: ArrayView2<f64>,
    constraints: &Constraints,
    labels: Option<&[Label]>,
    spec: &AssignerSpec,
    seed: Seed,
) -> Result<ClusterAssignment> {
    ensure_spread(x)?;
    spec.validate()?;
    let problem = Problem::new(x, constraints)?;
    if problem.groups.len() < 2 {
        return Err(Error::Infeasible("must-links join every row into one cluster".into()));
    }
    let mut best: Option<(Vec<Cluster>, f64)> = None;
    for r in 0..spec.restarts {
        let mut rng = seed.child(purpose::RESTART).child(r as u64).rng();
        let groups = problem.lloyd(spec.max_iters, &mut rng, None);
        let rows = problem.rows_from_groups(&groups);
        let ci = match cluster_index(x, &rows) {
            Ok(ci) => ci,
            Err(Error::EmptyCluster(_)) => continue,
            Err(e) => return Err(e),
        };
        if best.as_ref().is_none_or(|(_, b)| ci < *b) {
            best = Some((rows, ci));
        }
    }
    let (mut clusters, ci) = best.ok_or_else(|| Error::Infeasible("every restart left a cluster empty".into()))?;
    canonicalize(&mut clusters, labels);
    let provenance = match labels {
        Some(l) => l
            .iter()
            .map(|v| {
                if v.is_observed() {
                    Provenance::ObservedLabel
                } else {
                    Provenance::Predicted
                }
            })
            .collect(),
        None => vec![Provenance::Predicted; clusters.len()],
    };
    Ok(ClusterAssignment {
        clusters,
        ci,
        provenance,
    })
}

/// Plain 2-means with k-means++ seeding; labels are ignored.
pub fn two_means(x: ArrayView2<f64>, spec: &AssignerSpec, seed: Seed) -> Result<ClusterAssignment> {
    constrained_two_means(x, &Constraints::default(), None, spec, seed)
}

/// COP-KMEANS with constraints derived from the dataset's observed labels.
/// The cluster holding the `Pos` rows is reported as cluster 1.
pub fn cop_kmeans(dataset: &PartiallyLabeledDataset, spec: &AssignerSpec, seed: Seed) -> Result<ClusterAssignment> {
    let constraints = derive_constraints(dataset.labels());
    constrained_two_means(dataset.x(), &constraints, Some(dataset.labels()), spec, seed)
}

// ---------------------------------------------------------------------------
// linear directions

fn labeled_rows(dataset: &PartiallyLabeledDataset) -> (Vec<usize>, Vec<f64>) {
    dataset
        .labels()
        .iter()
        .enumerate()
        .filter_map(|(i, l)| l.sign().map(|s| (i, s)))
        .unzip()
}

fn require_both_classes(y: &[f64]) -> Result<()> {
    let pos = y.iter().filter(|&&v| v > 0.0).count();
    if y.len() < 2 || pos == 0 || pos == y.len() {
        return Err(Error::SingleClass(format!("{} labeled rows, {pos} positive", y.len())));
    }
    Ok(())
}

/// Empirical S3LDA objective
/// `(1/n_l) sum_labeled (y - w'x)^2 + C (1/n) sum_all (1 - |w'x|)_+`.
pub fn s3lda_objective(dataset: &PartiallyLabeledDataset, omega: &Array1<f64>, c: f64) -> f64 {
    let x = dataset.x();
    let proj = x.dot(omega);
    let (mut sq, mut nl) = (0.0, 0usize);
    for (p, l) in proj.iter().zip(dataset.labels()) {
        if let Some(y) = l.sign() {
            sq += (y - p) * (y - p);
            nl += 1;
        }
    }
    let hinge: f64 = proj.iter().map(|p| (1.0 - p.abs()).max(0.0)).sum();
    let ls = if nl > 0 { sq / nl as f64 } else { 0.0 };
    ls + c * hinge / dataset.n() as f64
}

/// Fitted direction plus objective values, for diagnostics.
#[derive(Clone, Debug)]
pub struct S3ldaFit {
    pub direction: Direction,
    pub initial_objective: f64,
    pub objective: f64,
}

/// Minimizes the S3LDA objective over the unit sphere by projected
/// subgradient descent.
///
/// Starts from the normalized difference of the labeled class means (first
/// axis if that difference vanishes). Each step moves along the normalized
/// tangent component of a subgradient with length `0.5 / sqrt(t)` and
/// renormalizes; the best iterate seen is returned, so the final objective
/// never exceeds the initial one. The objective is not convex and the search
/// is local. Data are used as given: center them first if the hinge term
/// should be measured from the mean.
pub fn s3lda_fit(dataset: &PartiallyLabeledDataset, spec: &AssignerSpec) -> Result<S3ldaFit> {
    let (rows, y) = labeled_rows(dataset);
    require_both_classes(&y)?;
    let x = dataset.x();
    let d = x.ncols();

    let mut diff = Array1::<f64>::zeros(d);
    let (np, nn) = (
        y.iter().filter(|&&v| v > 0.0).count() as f64,
        y.iter().filter(|&&v| v < 0.0).count() as f64,
    );
    for (&i, &s) in rows.iter().zip(&y) {
        let w = if s > 0.0 { 1.0 / np } else { -1.0 / nn };
        diff.scaled_add(w, &x.row(i));
    }
    let start = match Direction::new(diff) {
        Ok(dir) => dir.omega,
        Err(_) => {
            let mut e = Array1::zeros(d);
            e[0] = 1.0;
            e
        }
    };
    let initial = s3lda_objective(dataset, &start, spec.c);
    let (best, best_obj) = s3lda_descend(dataset, &rows, &y, spec, start);
    Ok(S3ldaFit {
        direction: Direction {
            omega: best,
            intercept: 0.0,
        },
        initial_objective: initial,
        objective: best_obj,
    })
}

fn s3lda_descend(
    dataset: &PartiallyLabeledDataset,
    rows: &[usize],
    y: &[f64],
    spec: &AssignerSpec,
    mut omega: Array1<f64>,
) -> (Array1<f64>, f64) {
    let x = dataset.x();
    let (n, d) = x.dim();
    let nl = rows.len() as f64;
    let mut best_obj = s3lda_objective(dataset, &omega, spec.c);
    let mut best = omega.clone();
    let mut grad = Array1::<f64>::zeros(d);
    for t in 1..=spec.steps {
        let proj = x.dot(&omega);
        grad.fill(0.0);
        for (&i, &s) in rows.iter().zip(y) {
            grad.scaled_add(-2.0 * (s - proj[i]) / nl, &x.row(i));
        }
        if spec.c > 0.0 {
            for i in 0..n {
                let p = proj[i];
                if p.abs() < 1.0 && p != 0.0 {
                    grad.scaled_add(-spec.c * p.signum() / n as f64, &x.row(i));
                }
            }
        }
        let radial = grad.dot(&omega);
        grad.scaled_add(-radial, &omega);
        let gnorm = grad.dot(&grad).sqrt();
        if !(gnorm > 0.0 && gnorm.is_finite()) {
            break;
        }
        let step = 0.5 / (t as f64).sqrt();
        omega.scaled_add(-step / gnorm, &grad);
        let norm = omega.dot(&omega).sqrt();
        omega /= norm;
        let obj = s3lda_objective(dataset, &omega, spec.c);
        if obj < best_obj {
            best_obj = obj;
            best.assign(&omega);
        }
    }
    (best, best_obj)
}

/// `(1/n) |y - X w|^2 + penalty |w|_1`.
pub fn lasso_objective(x: ArrayView2<f64>, y: &[f64], omega: &Array1<f64>, penalty: f64) -> f64 {
    let r = x.dot(omega);
    let sq: f64 = r.iter().zip(y).map(|(p, v)| (v - p) * (v - p)).sum();
    sq / y.len() as f64 + penalty * omega.iter().map(|w| w.abs()).sum::<f64>()
}

/// Smallest penalty at which every lasso coefficient is zero:
/// `max_j |(2/n) sum_i y_i x_ij|`.
pub fn lasso_zero_threshold(x: ArrayView2<f64>, y: &[f64]) -> f64 {
    let n = y.len() as f64;
    x.columns()
        .into_iter()
        .map(|col| (2.0 / n * col.iter().zip(y).map(|(a, b)| a * b).sum::<f64>()).abs())
        .fold(0.0, f64::max)
}

/// Coordinate-descent lasso without intercept. Returns the raw
/// (unnormalized) coefficients.
pub fn lasso(x: ArrayView2<f64>, y: &[f64], penalty: f64) -> Array1<f64> {
    const SWEEPS: usize = 1000;
    let (n, d) = x.dim();
    let nf = n as f64;
    let col_sq: Vec<f64> = x.columns().into_iter().map(|c| 2.0 / nf * c.dot(&c)).collect();
    let mut w = Array1::<f64>::zeros(d);
    let mut r = Array1::from(y.to_vec());
    for _ in 0..SWEEPS {
        let mut max_delta = 0.0_f64;
        let mut max_w = 0.0_f64;
        for j in 0..d {
            if col_sq[j] == 0.0 {
                continue;
            }
            let col = x.column(j);
            let rho = 2.0 / nf * col.dot(&r) + col_sq[j] * w[j];
            let new = if rho > penalty {
                (rho - penalty) / col_sq[j]
            } else if rho < -penalty {
                (rho + penalty) / col_sq[j]
            } else {
                0.0
            };
            let delta = new - w[j];
            if delta != 0.0 {
                r.scaled_add(-delta, &col);
                w[j] = new;
            }
            max_delta = max_delta.max(delta.abs());
            max_w = max_w.max(new.abs());
        }
        if max_delta <= 1e-12 * (1.0 + max_w) {
            break;
        }
    }
    w
}

/// L1-LDA on labeled rows: lasso-penalized least squares on the `+1/-1`
/// labels, normalized to the unit sphere.
pub fn l1_lda_fit(x_labeled: ArrayView2<f64>, y: &[f64], spec: &AssignerSpec) -> Result<Direction> {
    require_both_classes(y)?;
    if x_labeled.nrows() != y.len() {
        return Err(Error::InvalidArgument(format!(
            "{} labels for {} rows",
            y.len(),
            x_labeled.nrows()
        )));
    }
    let w = lasso(x_labeled, y, spec.penalty);
    if w.iter().all(|&v| v == 0.0) {
        return Err(Error::ZeroDirection { penalty: spec.penalty });
    }
    Direction::new(w)
}

/// Observed labels are kept (`Pos` -> 1, `Neg` -> 2); unlabeled rows go to
/// cluster 1 when `w'(x - mean) >= 0` and to cluster 2 otherwise.
///
/// `w` is first oriented so the `Pos` rows project with nonnegative mean
/// (or the `Neg` rows with nonpositive mean; without labels, so its first
/// nonzero component is positive). Flipping the input sign therefore never
/// changes the result.
pub fn assign_by_direction(dataset: &PartiallyLabeledDataset, direction: &Direction) -> Result<ClusterAssignment> {
    let x = dataset.x();
    let mean = linalg::column_means(x);
    let offset = mean.dot(&direction.omega);
    let proj: Vec<f64> = x.dot(&direction.omega).iter().map(|p| p - offset).collect();
    let labels = dataset.labels();
    let mean_of = |want: Label| -> Option<f64> {
        let v: Vec<f64> = proj
            .iter()
            .zip(labels)
            .filter(|(_, &l)| l == want)
            .map(|(p, _)| *p)
            .collect();
        (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
    };
    let flip = if let Some(m) = mean_of(Label::Pos) {
        m < 0.0
    } else if let Some(m) = mean_of(Label::Neg) {
        m > 0.0
    } else {
        direction.omega.iter().find(|v| **v != 0.0).is_some_and(|v| *v < 0.0)
    };
    let sign = if flip { -1.0 } else { 1.0 };
    let mut clusters = Vec::with_capacity(dataset.n());
    let mut provenance = Vec::with_capacity(dataset.n());
    for (p, l) in proj.iter().zip(labels) {
        let (c, prov) = match l {
            Label::Pos => (Cluster::One, Provenance::ObservedLabel),
            Label::Neg => (Cluster::Two, Provenance::ObservedLabel),
            Label::Unlabeled if sign * p >= 0.0 => (Cluster::One, Provenance::Predicted),
            Label::Unlabeled => (Cluster::Two, Provenance::Predicted),
        };
        clusters.push(c);
        provenance.push(prov);
    }
    ClusterAssignment::new(x, clusters, provenance)
}

/// Runs the assigner described by `spec`.
pub fn assign(dataset: &PartiallyLabeledDataset, spec: &AssignerSpec, seed: Seed) -> Result<ClusterAssignment> {
    match spec.kind {
        AssignerKind::TwoMeans => two_means(dataset.x(), spec, seed),
        AssignerKind::CopKmeans => cop_kmeans(dataset, spec, seed),
        AssignerKind::S3lda => assign_by_direction(dataset, &s3lda_fit(dataset, spec)?.direction),
        AssignerKind::L1Lda => {
            let (rows, y) = labeled_rows(dataset);
            let xl = dataset.x().select(ndarray::Axis(0), &rows);
            assign_by_direction(dataset, &l1_lda_fit(xl.view(), &y, spec)?)
        }
    }
}
