//! SigPal, SigClust and DiProPerm, plus empirical p-values.
//!
//! All three engines follow the same pattern: compute a statistic on the
//! data, recompute it on `N` null replicates, and report the fraction of
//! replicates that are more extreme. Replicate `r` draws from a random stream
//! derived from `(seed, r)` only, so results are identical for any number of
//! worker threads.

use std::io::Write;

use log::warn;
use ndarray::{Array1, ArrayView2};
use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::assigners::{assign, AssignerKind, AssignerSpec};
use crate::dataset::{center, Label, PartiallyLabeledDataset};
use crate::error::{Error, Result};
use crate::linalg;
use crate::spectral::{estimate_spectrum, simulate_null, EigenMethod, EigenSpectrum};
use crate::stream::{purpose, Seed};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Sigpal,
    Sigclust,
    Diproperm,
}

/// Which null statistics count against the observed one.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Comparison {
    /// Count nulls strictly below the observed value (cluster index).
    Less,
    /// Count nulls strictly above the observed value (DiProPerm statistics).
    Greater,
}

/// `#{nulls more extreme than observed} / N`, or `(# + 1) / (N + 1)` with
/// `add_one`. Comparisons are strict, so ties never count.
pub fn empirical_pvalue(observed: f64, nulls: &[f64], rule: Comparison, add_one: bool) -> Result<f64> {
    if nulls.is_empty() {
        return Err(Error::EmptyNull);
    }
    let count = nulls
        .iter()
        .filter(|&&v| match rule {
            Comparison::Less => v < observed,
            Comparison::Greater => v > observed,
        })
        .count();
    Ok(if add_one {
        (count + 1) as f64 / (nulls.len() + 1) as f64
    } else {
        count as f64 / nulls.len() as f64
    })
}

/// Descriptive fields carried along with every result.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TestMetadata {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub assigner: Option<AssignerSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sim_assigner: Option<AssignerSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eigen_method: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub noise_estimator: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub null_spectrum: Option<EigenSpectrum>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub label_placement: Option<LabelPlacement>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub direction: Option<DirectionKind>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub statistic: Option<Statistic>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub direction_fallback: Option<bool>,
    /// Data are centered before anything else; they are never rescaled.
    pub centered: bool,
    pub add_one: bool,
    pub n: usize,
    pub d: usize,
    pub n_labeled: usize,
}

/// Observed statistic, null statistics and the resulting p-value.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub method: Method,
    pub observed_stat: f64,
    pub null_stats: Vec<f64>,
    pub p_value: f64,
    pub n_sim_or_perm: usize,
    pub seed: u64,
    pub metadata: TestMetadata,
}

impl TestResult {
    /// One null statistic per line.
    pub fn write_null_stats<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for v in &self.null_stats {
            writeln!(w, "{v:?}")?;
        }
        Ok(())
    }

    pub fn rejects(&self, alpha: f64) -> bool {
        self.p_value < alpha
    }
}

/// How labels are placed on simulated null data.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LabelPlacement {
    /// A uniform random subset of the original labeled size receives the
    /// original `Pos` / `Neg` counts in random order.
    #[default]
    PreserveCounts,
    /// A uniform random subset of the original labeled size receives
    /// independent uniform `+1` / `-1` labels.
    UniformSigns,
}

/// Settings shared by SigPal and SigClust.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimulationTestConfig {
    /// Assigner for the observed data (SigClust always uses 2-means with
    /// this spec's restart settings).
    pub assigner: AssignerSpec,
    /// Assigner for simulated data; `None` reuses `assigner`.
    pub sim_assigner: Option<AssignerSpec>,
    pub eigen: EigenMethod,
    pub n_sim: usize,
    pub label_placement: LabelPlacement,
    pub add_one: bool,
}

impl SimulationTestConfig {
    /// Soft thresholding, 100 simulations, preserved label counts.
    pub fn new(assigner: AssignerSpec) -> Self {
        SimulationTestConfig {
            assigner,
            sim_assigner: None,
            eigen: EigenMethod::Soft,
            n_sim: 100,
            label_placement: LabelPlacement::PreserveCounts,
            add_one: false,
        }
    }

    pub fn null_assigner(&self) -> &AssignerSpec {
        self.sim_assigner.as_ref().unwrap_or(&self.assigner)
    }
}

fn place_labels<R: Rng>(n: usize, n_pos: usize, n_neg: usize, placement: LabelPlacement, rng: &mut R) -> Vec<Label> {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(rng);
    let mut labels = vec![Label::Unlabeled; n];
    match placement {
        LabelPlacement::PreserveCounts => {
            for (k, &i) in idx.iter().take(n_pos + n_neg).enumerate() {
                labels[i] = if k < n_pos { Label::Pos } else { Label::Neg };
            }
        }
        LabelPlacement::UniformSigns => {
            for &i in idx.iter().take(n_pos + n_neg) {
                labels[i] = if rng.random::<bool>() { Label::Pos } else { Label::Neg };
            }
        }
    }
    labels
}

struct SimulationOutcome {
    observed: f64,
    nulls: Vec<f64>,
    spectrum: EigenSpectrum,
}

/// Shared body of SigPal and SigClust on already-centered data.
fn simulate(
    centered: &PartiallyLabeledDataset,
    assigner: &AssignerSpec,
    null_assigner: &AssignerSpec,
    cfg: &SimulationTestConfig,
    seed: Seed,
) -> Result<SimulationOutcome> {
    if cfg.n_sim == 0 {
        return Err(Error::EmptyNull);
    }
    let observed = assign(centered, assigner, seed.child(purpose::OBSERVED))?.ci;
    let spectrum = estimate_spectrum(centered.x(), &cfg.eigen)?;
    let (n, n_pos, n_neg) = (centered.n(), centered.n_pos(), centered.n_neg());
    let nulls = (0..cfg.n_sim)
        .into_par_iter()
        .map(|r| {
            let base = seed.child(purpose::NULL_REPLICATE).child(r as u64);
            let x = simulate_null(&spectrum, n, &mut base.child(purpose::NULL_DATA).rng());
            let labels = place_labels(
                n,
                n_pos,
                n_neg,
                cfg.label_placement,
                &mut base.child(purpose::NULL_LABELS).rng(),
            );
            let ds = PartiallyLabeledDataset::new(x, labels)?;
            let (ds, _) = center(&ds);
            assign(&ds, null_assigner, base.child(purpose::NULL_ASSIGN)).map(|a| a.ci)
        })
        .enumerate()
        .map(|(r, res)| res.map_err(|e| e.in_replicate(r)))
        .collect::<Result<Vec<f64>>>()?;
    Ok(SimulationOutcome {
        observed,
        nulls,
        spectrum,
    })
}

fn check_simulation_input(ds: &PartiallyLabeledDataset) -> Result<()> {
    if ds.n() < 3 {
        return Err(Error::TooFewRows { min: 3, found: ds.n() });
    }
    if ds.x().iter().all(|&v| v == ds.x()[[0, 0]]) || ds.x().rows().into_iter().all(|r| r == ds.x().row(0)) {
        return Err(Error::Degenerate("all rows are identical".into()));
    }
    Ok(())
}

fn spectrum_metadata(
    cfg: &SimulationTestConfig,
    spectrum: EigenSpectrum,
) -> (Option<String>, Option<String>, Option<EigenSpectrum>) {
    let noise = match cfg.eigen {
        EigenMethod::Known(_) => None,
        _ => Some("mad-of-centered-entries".to_string()),
    };
    (Some(cfg.eigen.id().to_string()), noise, Some(spectrum))
}

/// SigClust: 2-means cluster index against Gaussian nulls with the
/// estimated spectrum.
pub fn sigclust(x: ArrayView2<f64>, cfg: &SimulationTestConfig, seed: Seed) -> Result<TestResult> {
    let ds = PartiallyLabeledDataset::unlabeled(x.to_owned())?;
    check_simulation_input(&ds)?;
    let (centered, _) = center(&ds);
    let spec = AssignerSpec {
        kind: AssignerKind::TwoMeans,
        ..cfg.assigner.clone()
    };
    let out = simulate(&centered, &spec, &spec, cfg, seed)?;
    let p_value = empirical_pvalue(out.observed, &out.nulls, Comparison::Less, cfg.add_one)?;
    let (eigen_method, noise_estimator, null_spectrum) = spectrum_metadata(cfg, out.spectrum);
    Ok(TestResult {
        method: Method::Sigclust,
        observed_stat: out.observed,
        n_sim_or_perm: out.nulls.len(),
        null_stats: out.nulls,
        p_value,
        seed: seed.0,
        metadata: TestMetadata {
            assigner: Some(spec),
            eigen_method,
            noise_estimator,
            null_spectrum,
            centered: true,
            add_one: cfg.add_one,
            n: ds.n(),
            d: ds.d(),
            n_labeled: 0,
            ..Default::default()
        },
    })
}

/// SigPal: semi-supervised cluster index against Gaussian nulls that are
/// relabeled at random with the observed labeled fraction.
pub fn sigpal(dataset: &PartiallyLabeledDataset, cfg: &SimulationTestConfig, seed: Seed) -> Result<TestResult> {
    check_simulation_input(dataset)?;
    cfg.assigner.validate()?;
    cfg.null_assigner().validate()?;
    let needs_labels = cfg.assigner.kind.needs_labels() || cfg.null_assigner().kind.needs_labels();
    if needs_labels && (dataset.n_pos() == 0 || dataset.n_neg() == 0 || dataset.n_labeled() < 2) {
        return Err(Error::SingleClass(format!(
            "{} needs at least two labeled rows from both classes",
            cfg.assigner.kind.id()
        )));
    }
    let (centered, _) = center(dataset);
    let out = simulate(&centered, &cfg.assigner, cfg.null_assigner(), cfg, seed)?;
    let p_value = empirical_pvalue(out.observed, &out.nulls, Comparison::Less, cfg.add_one)?;
    let (eigen_method, noise_estimator, null_spectrum) = spectrum_metadata(cfg, out.spectrum);
    Ok(TestResult {
        method: Method::Sigpal,
        observed_stat: out.observed,
        n_sim_or_perm: out.nulls.len(),
        null_stats: out.nulls,
        p_value,
        seed: seed.0,
        metadata: TestMetadata {
            assigner: Some(cfg.assigner.clone()),
            sim_assigner: Some(cfg.null_assigner().clone()),
            eigen_method,
            noise_estimator,
            null_spectrum,
            label_placement: Some(cfg.label_placement),
            centered: true,
            add_one: cfg.add_one,
            n: dataset.n(),
            d: dataset.d(),
            n_labeled: dataset.n_labeled(),
            ..Default::default()
        },
    })
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DirectionKind {
    #[default]
    MeanDifference,
}

/// Univariate statistic on the projected data.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Statistic {
    #[default]
    MeanDiff,
    /// Welch two-sample t statistic.
    TStat,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiPropermConfig {
    pub direction: DirectionKind,
    pub statistic: Statistic,
    pub n_perm: usize,
    pub add_one: bool,
}

impl Default for DiPropermConfig {
    fn default() -> Self {
        DiPropermConfig {
            direction: DirectionKind::MeanDifference,
            statistic: Statistic::MeanDiff,
            n_perm: 100,
            add_one: false,
        }
    }
}

/// Projects on the normalized class-mean difference and computes the
/// statistic. Returns `None` for the direction when the class means
/// coincide, in which case `fallback` is used.
fn direction_statistic(
    x: ArrayView2<f64>,
    positive: &[bool],
    statistic: Statistic,
    fallback: &dyn Fn() -> Array1<f64>,
) -> (f64, bool) {
    let d = x.ncols();
    let (mut mp, mut mn) = (Array1::<f64>::zeros(d), Array1::<f64>::zeros(d));
    let (mut np, mut nn) = (0.0, 0.0);
    for (row, &p) in x.rows().into_iter().zip(positive) {
        if p {
            mp += &row;
            np += 1.0;
        } else {
            mn += &row;
            nn += 1.0;
        }
    }
    let diff = mp / np - mn / nn;
    let norm = diff.dot(&diff).sqrt();
    let (omega, fell_back) = if norm > 0.0 {
        (diff / norm, false)
    } else {
        (fallback(), true)
    };
    let proj = x.dot(&omega);
    let (mut sp, mut sn) = (0.0, 0.0);
    for (v, &p) in proj.iter().zip(positive) {
        if p {
            sp += v;
        } else {
            sn += v;
        }
    }
    let (ap, an) = (sp / np, sn / nn);
    let stat = match statistic {
        Statistic::MeanDiff => ap - an,
        Statistic::TStat => {
            let (mut vp, mut vn) = (0.0, 0.0);
            for (v, &p) in proj.iter().zip(positive) {
                if p {
                    vp += (v - ap) * (v - ap);
                } else {
                    vn += (v - an) * (v - an);
                }
            }
            let se = (vp / (np - 1.0) / np + vn / (nn - 1.0) / nn).sqrt();
            (ap - an) / se
        }
    };
    (stat, fell_back)
}

/// DiProPerm on fully labeled data. Every permutation shuffles the labels
/// (keeping class counts) and recomputes both the direction and the
/// statistic.
pub fn diproperm(dataset: &PartiallyLabeledDataset, cfg: &DiPropermConfig, seed: Seed) -> Result<TestResult> {
    if dataset.n_unlabeled() > 0 {
        return Err(Error::InvalidArgument("diproperm requires full labels".into()));
    }
    let min_class = match cfg.statistic {
        Statistic::MeanDiff => 1,
        Statistic::TStat => 2,
    };
    if dataset.n_pos() < min_class || dataset.n_neg() < min_class {
        return Err(Error::SingleClass(format!(
            "diproperm needs at least {min_class} rows per class ({} positive, {} negative)",
            dataset.n_pos(),
            dataset.n_neg()
        )));
    }
    if cfg.n_perm == 0 {
        return Err(Error::EmptyNull);
    }
    let x = dataset.x();
    let axis = std::sync::OnceLock::new();
    let fallback = || axis.get_or_init(|| linalg::first_principal_axis(x)).clone();
    let positive: Vec<bool> = dataset.labels().iter().map(|&l| l == Label::Pos).collect();
    let (observed, fell_back) = direction_statistic(x, &positive, cfg.statistic, &fallback);
    if fell_back {
        warn!("class means coincide; projecting on the first principal axis instead");
    }
    let nulls: Vec<f64> = (0..cfg.n_perm)
        .into_par_iter()
        .map(|r| {
            let mut perm = positive.clone();
            perm.shuffle(&mut seed.child(purpose::NULL_REPLICATE).child(r as u64).rng());
            direction_statistic(x, &perm, cfg.statistic, &fallback).0
        })
        .collect();
    let p_value = empirical_pvalue(observed, &nulls, Comparison::Greater, cfg.add_one)?;
    Ok(TestResult {
        method: Method::Diproperm,
        observed_stat: observed,
        n_sim_or_perm: nulls.len(),
        null_stats: nulls,
        p_value,
        seed: seed.0,
        metadata: TestMetadata {
            direction: Some(cfg.direction),
            statistic: Some(cfg.statistic),
            direction_fallback: Some(fell_back),
            centered: false,
            add_one: cfg.add_one,
            n: dataset.n(),
            d: dataset.d(),
            n_labeled: dataset.n_labeled(),
            ..Default::default()
        },
    })
}
