//! Data generators and the replicated experiment runner.
//!
//! Every case uses the diagonal covariance `D = diag(v, …, v, 1, …, 1)` with
//! `w` spiked entries. Mixtures are `0.5 N(−μ, D) + 0.5 N(μ, D)` with `μ`
//! either `(a, 0, …, 0)` or `(a, …, a)`.

use std::collections::BTreeMap;
use std::io::Write;

use ndarray::Array2;
use rand::seq::index::sample;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::assigners::{AssignerKind, AssignerSpec};
use crate::dataset::{Label, PartiallyLabeledDataset};
use crate::engines::{sigclust, sigpal, SimulationTestConfig};
use crate::error::{Error, Result};
use crate::spectral::EigenMethod;
use crate::stream::{purpose, Seed, StreamRng};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Case {
    OneCluster,
    MixtureOneDirection,
    MixtureAllDirections,
}

/// Declarative description of one simulated data set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    pub case: Case,
    pub n: usize,
    pub d: usize,
    pub v: f64,
    pub w: usize,
    pub a: f64,
    /// Mixtures: labels revealed per true component.
    #[serde(default)]
    pub labeled_per_class: usize,
    /// One cluster: rows that receive a random label.
    #[serde(default)]
    pub labeled_total: usize,
    /// One cluster: split the random labels evenly instead of flipping a
    /// fair coin per row.
    #[serde(default = "yes")]
    pub balanced_null_labels: bool,
}

fn yes() -> bool {
    true
}

impl GeneratorSpec {
    pub fn one_cluster(n: usize, d: usize, v: f64, w: usize, labeled_total: usize) -> Self {
        GeneratorSpec {
            case: Case::OneCluster,
            n,
            d,
            v,
            w,
            a: 0.0,
            labeled_per_class: 0,
            labeled_total,
            balanced_null_labels: true,
        }
    }

    pub fn mixture_one_direction(n: usize, d: usize, v: f64, w: usize, a: f64, labeled_per_class: usize) -> Self {
        GeneratorSpec {
            case: Case::MixtureOneDirection,
            labeled_per_class,
            a,
            ..GeneratorSpec::one_cluster(n, d, v, w, 0)
        }
    }

    pub fn mixture_all_directions(n: usize, d: usize, v: f64, w: usize, a: f64, labeled_per_class: usize) -> Self {
        GeneratorSpec {
            case: Case::MixtureAllDirections,
            ..GeneratorSpec::mixture_one_direction(n, d, v, w, a, labeled_per_class)
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.n < 2 || self.d == 0 {
            return bad(format!("need n >= 2 and d >= 1, got n={} d={}", self.n, self.d));
        }
        if self.w == 0 || self.w > self.d {
            return bad(format!("w must lie in 1..={}, got {}", self.d, self.w));
        }
        if !(self.v > 0.0 && self.v.is_finite()) {
            return bad(format!("v must be positive, got {}", self.v));
        }
        if !(self.a >= 0.0 && self.a.is_finite()) {
            return bad(format!("a must be nonnegative, got {}", self.a));
        }
        match self.case {
            Case::OneCluster if self.labeled_total > self.n => {
                bad(format!("labeled_total {} exceeds n {}", self.labeled_total, self.n))
            }
            Case::MixtureOneDirection | Case::MixtureAllDirections if 2 * self.labeled_per_class > self.n => {
                bad(format!(
                    "labeled_per_class {} too large for n {}",
                    self.labeled_per_class, self.n
                ))
            }
            _ => Ok(()),
        }
    }

    fn sd(&self, j: usize) -> f64 {
        if j < self.w {
            self.v.sqrt()
        } else {
            1.0
        }
    }

    fn mean(&self, j: usize) -> f64 {
        match self.case {
            Case::OneCluster => 0.0,
            Case::MixtureOneDirection if j > 0 => 0.0,
            _ => self.a,
        }
    }
}

fn gaussian_rows(spec: &GeneratorSpec, signs: &[f64], rng: &mut StreamRng) -> Array2<f64> {
    let mut x = Array2::zeros((spec.n, spec.d));
    for (mut row, &s) in x.rows_mut().into_iter().zip(signs) {
        for (j, v) in row.iter_mut().enumerate() {
            let z: f64 = rng.sample(StandardNormal);
            *v = spec.sd(j) * z + s * spec.mean(j);
        }
    }
    x
}

/// Draws from `N(0, D)`; `labeled_total` random rows receive labels that
/// carry no information.
pub fn gen_one_cluster(spec: &GeneratorSpec, seed: Seed) -> Result<PartiallyLabeledDataset> {
    spec.validate()?;
    let mut rng = seed.rng();
    let x = gaussian_rows(spec, &vec![0.0; spec.n], &mut rng);
    let mut labels = vec![Label::Unlabeled; spec.n];
    let rows = sample(&mut rng, spec.n, spec.labeled_total);
    for (k, i) in rows.into_iter().enumerate() {
        let pos = if spec.balanced_null_labels {
            k % 2 == 0
        } else {
            rng.random::<bool>()
        };
        labels[i] = if pos { Label::Pos } else { Label::Neg };
    }
    PartiallyLabeledDataset::new(x, labels)
}

/// Draws the two-component mixture and reveals `labeled_per_class` labels
/// in each component. Returns the data and the true component of every row
/// (`Pos` for `+μ`).
pub fn gen_mixture(spec: &GeneratorSpec, seed: Seed) -> Result<(PartiallyLabeledDataset, Vec<Label>)> {
    spec.validate()?;
    let mut rng = seed.rng();
    let truth = (0..100)
        .map(|_| (0..spec.n).map(|_| rng.random::<bool>()).collect::<Vec<bool>>())
        .find(|pos| {
            let k = pos.iter().filter(|&&p| p).count();
            k >= spec.labeled_per_class && spec.n - k >= spec.labeled_per_class
        })
        .ok_or_else(|| {
            Error::Infeasible(format!(
                "no draw in 100 attempts had {} rows in each component",
                spec.labeled_per_class
            ))
        })?;
    let signs: Vec<f64> = truth.iter().map(|&p| if p { 1.0 } else { -1.0 }).collect();
    let x = gaussian_rows(spec, &signs, &mut rng);
    let truth: Vec<Label> = truth.iter().map(|&p| if p { Label::Pos } else { Label::Neg }).collect();
    let mut labels = vec![Label::Unlabeled; spec.n];
    for class in [Label::Pos, Label::Neg] {
        let rows: Vec<usize> = (0..spec.n).filter(|&i| truth[i] == class).collect();
        for k in sample(&mut rng, rows.len(), spec.labeled_per_class) {
            labels[rows[k]] = class;
        }
    }
    Ok((PartiallyLabeledDataset::new(x, labels)?, truth))
}

/// Generates one data set of any case.
pub fn generate(spec: &GeneratorSpec, seed: Seed) -> Result<PartiallyLabeledDataset> {
    match spec.case {
        Case::OneCluster => gen_one_cluster(spec, seed),
        _ => gen_mixture(spec, seed).map(|(ds, _)| ds),
    }
}

/// One method of an experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "method")]
pub enum MethodConfig {
    Sigclust,
    Sigpal {
        assigner: AssignerSpec,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        sim_assigner: Option<AssignerSpec>,
    },
}

impl MethodConfig {
    pub fn sigpal(kind: AssignerKind) -> Self {
        MethodConfig::Sigpal {
            assigner: AssignerSpec::new(kind),
            sim_assigner: None,
        }
    }

    /// S3LDA on the observed data, L1-LDA on the simulated data.
    pub fn sigpal_s3lda_l1() -> Self {
        MethodConfig::Sigpal {
            assigner: AssignerSpec::new(AssignerKind::S3lda),
            sim_assigner: Some(AssignerSpec::new(AssignerKind::L1Lda)),
        }
    }

    /// The four methods compared in the simulation studies.
    pub fn standard_set() -> Vec<MethodConfig> {
        vec![
            MethodConfig::sigpal_s3lda_l1(),
            MethodConfig::sigpal(AssignerKind::S3lda),
            MethodConfig::sigpal(AssignerKind::CopKmeans),
            MethodConfig::Sigclust,
        ]
    }

    pub fn id(&self) -> String {
        match self {
            MethodConfig::Sigclust => "sigclust".into(),
            MethodConfig::Sigpal { assigner, sim_assigner } => match sim_assigner {
                Some(s) if s.kind != assigner.kind => format!("sigpal-{}", s.kind.id()),
                _ => format!("sigpal-{}", assigner.kind.id()),
            },
        }
    }
}

/// Full description of a replicated experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub name: String,
    pub generator: GeneratorSpec,
    pub methods: Vec<MethodConfig>,
    pub reps: usize,
    pub n_sim: usize,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default)]
    pub eigen: EigenMethod,
    #[serde(default)]
    pub desk_scale: bool,
}

fn default_alpha() -> f64 {
    0.05
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.generator.validate()?;
        if self.reps == 0 || self.n_sim == 0 {
            return Err(Error::InvalidArgument("reps and n_sim must be at least 1".into()));
        }
        if self.methods.is_empty() {
            return Err(Error::InvalidArgument("at least one method is required".into()));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "alpha must lie in (0, 1), got {}",
                self.alpha
            )));
        }
        Ok(())
    }

    /// Halves the replicate and simulation counts (rounding up).
    pub fn desk_scaled(mut self) -> Self {
        if !self.desk_scale {
            self.reps = self.reps.div_ceil(2);
            self.n_sim = self.n_sim.div_ceil(2);
            self.desk_scale = true;
        }
        self
    }
}

/// One (replicate, method) outcome.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub replicate: usize,
    pub method: String,
    /// `None` when the engine failed; see `error`.
    pub p_value: Option<f64>,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub config: ExperimentConfig,
    pub seed: u64,
    /// Rows with `p < alpha`, per method id.
    pub rejections: BTreeMap<String, usize>,
    pub failures: BTreeMap<String, usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub rows: Vec<ReportRow>,
    pub summary: ExperimentSummary,
}

impl ExperimentReport {
    /// Rejection counts at any level, from the stored p-values.
    pub fn rejections_at(&self, alpha: f64) -> BTreeMap<String, usize> {
        let mut out: BTreeMap<String, usize> = self.summary.config.methods.iter().map(|m| (m.id(), 0)).collect();
        for row in &self.rows {
            if row.p_value.is_some_and(|p| p < alpha) {
                *out.entry(row.method.clone()).or_default() += 1;
            }
        }
        out
    }

    pub fn p_values(&self, method: &str) -> Vec<f64> {
        self.rows
            .iter()
            .filter(|r| r.method == method)
            .filter_map(|r| r.p_value)
            .collect()
    }

    /// `replicate,method,p_value,seed`; failed rows have an empty p-value.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["replicate", "method", "p_value", "seed"])?;
        for row in &self.rows {
            out.write_record([
                row.replicate.to_string(),
                row.method.clone(),
                row.p_value.map(|p| format!("{p:?}")).unwrap_or_default(),
                row.seed.to_string(),
            ])?;
        }
        out.flush().map_err(|e| Error::Io {
            path: "<csv output>".into(),
            source: e,
        })
    }
}

fn run_method(
    method: &MethodConfig,
    data: &PartiallyLabeledDataset,
    cfg: &ExperimentConfig,
    seed: Seed,
) -> Result<f64> {
    let base = |assigner: AssignerSpec, sim_assigner: Option<AssignerSpec>| SimulationTestConfig {
        assigner,
        sim_assigner,
        eigen: cfg.eigen.clone(),
        n_sim: cfg.n_sim,
        ..SimulationTestConfig::new(AssignerSpec::default())
    };
    match method {
        MethodConfig::Sigclust => Ok(sigclust(data.x(), &base(AssignerSpec::default(), None), seed)?.p_value),
        MethodConfig::Sigpal { assigner, sim_assigner } => {
            Ok(sigpal(data, &base(assigner.clone(), sim_assigner.clone()), seed)?.p_value)
        }
    }
}

/// Runs every method on the same data in each replicate. Replicate `r`
/// generates its data from `seed.child(r)`; method `k` tests it with its own
/// derived stream. Failures are recorded per row and do not stop the run.
pub fn run_experiment(cfg: &ExperimentConfig, seed: Seed) -> Result<ExperimentReport> {
    cfg.validate()?;
    let per_replicate: Vec<Vec<ReportRow>> = (0..cfg.reps)
        .into_par_iter()
        .map(|r| {
            let base = seed.child(r as u64);
            let data = generate(&cfg.generator, base.child(purpose::GENERATE)).map_err(|e| e.to_string());
            cfg.methods
                .iter()
                .enumerate()
                .map(|(k, method)| {
                    let method_seed = base.child(purpose::METHOD).child(k as u64);
                    let outcome = data
                        .as_ref()
                        .map_err(Clone::clone)
                        .and_then(|ds| run_method(method, ds, cfg, method_seed).map_err(|e| e.to_string()));
                    ReportRow {
                        replicate: r,
                        method: method.id(),
                        p_value: outcome.as_ref().ok().copied(),
                        seed: method_seed.0,
                        error: outcome.err(),
                    }
                })
                .collect()
        })
        .collect();
    let rows: Vec<ReportRow> = per_replicate.into_iter().flatten().collect();
    let mut failures: BTreeMap<String, usize> = cfg.methods.iter().map(|m| (m.id(), 0)).collect();
    for row in rows.iter().filter(|r| r.error.is_some()) {
        *failures.entry(row.method.clone()).or_default() += 1;
    }
    let mut report = ExperimentReport {
        rows,
        summary: ExperimentSummary {
            config: cfg.clone(),
            seed: seed.0,
            rejections: BTreeMap::new(),
            failures,
        },
    };
    report.summary.rejections = report.rejections_at(cfg.alpha);
    Ok(report)
}

const TABLE1: [(f64, usize); 14] = [
    (100.0, 1),
    (50.0, 2),
    (20.0, 5),
    (10.0, 10),
    (1.0, 1),
    (3.0, 1),
    (5.0, 1),
    (10.0, 1),
    (20.0, 1),
    (50.0, 1),
    (1.0, 5),
    (10.0, 5),
    (20.0, 5),
    (50.0, 5),
];

/// Names accepted by [`preset`].
pub fn preset_names() -> Vec<String> {
    let mut names: Vec<String> = vec!["table1".into()];
    names.extend((1..=TABLE1.len()).map(|i| format!("table1-row{i}")));
    names.extend(["fig4", "fig5", "fig7", "fig8"].map(String::from));
    names
}

fn experiment(name: String, generator: GeneratorSpec) -> ExperimentConfig {
    ExperimentConfig {
        name,
        generator,
        methods: MethodConfig::standard_set(),
        reps: 100,
        n_sim: 1000,
        alpha: 0.05,
        eigen: EigenMethod::Soft,
        desk_scale: false,
    }
}

fn sweep(prefix: &str, grid: &[f64], make: impl Fn(f64) -> GeneratorSpec) -> Vec<ExperimentConfig> {
    grid.iter()
        .map(|&a| experiment(format!("{prefix}-a{a}"), make(a)))
        .collect()
}

/// Paper-scale experiment settings (100 replicates, 1000 simulations, all
/// four methods, n = 40, d = 300). Sweeps return one config per signal size.
pub fn preset(name: &str) -> Option<Vec<ExperimentConfig>> {
    let row = |i: usize| {
        let (v, w) = TABLE1[i];
        experiment(
            format!("table1-row{}", i + 1),
            GeneratorSpec::one_cluster(40, 300, v, w, 20),
        )
    };
    match name {
        "table1" => Some((0..TABLE1.len()).map(row).collect()),
        "fig4" => Some(sweep("fig4", &[0.0, 1.0, 2.0, 3.0, 4.0, 5.0], |a| {
            GeneratorSpec::mixture_one_direction(40, 300, 2.0, 50, a, 10)
        })),
        "fig5" => Some(sweep("fig5", &[0.0, 5.0, 10.0, 15.0, 18.0, 20.0], |a| {
            GeneratorSpec::mixture_one_direction(40, 300, 100.0, 1, a, 10)
        })),
        "fig7" => Some(sweep("fig7", &[0.0, 0.05, 0.1, 0.15, 0.2, 0.25], |a| {
            GeneratorSpec::mixture_all_directions(40, 300, 2.0, 50, a, 10)
        })),
        "fig8" => Some(sweep("fig8", &[0.0, 0.2, 0.4, 0.6, 0.8, 1.0], |a| {
            GeneratorSpec::mixture_all_directions(40, 300, 100.0, 1, a, 10)
        })),
        _ => {
            let i: usize = name.strip_prefix("table1-row")?.parse().ok()?;
            (1..=TABLE1.len()).contains(&i).then(|| vec![row(i - 1)])
        }
    }
}
