//! Population cluster index for SigPal and SigClust under a single Gaussian,
//! the eigenvalue-bias quantity, and two Monte-Carlo studies.
//!
//! With `r = λ₁ / Σλ_j` and labeled fraction `θ`,
//!
//! ```text
//! TCI_sigpal   = 1 + θ − (2/π)(1 − θ)³ r
//! TCI_sigclust = 1 − (2/π) r
//! ```
//!
//! The SigPal expression integrates the labeled mass at full weight in each
//! class, so it reaches 2 at `θ = 1` while any empirical cluster index stays
//! in `[0, 1]`. Only the `θ = 0` case lines up with [`monte_carlo_tci`].

use std::f64::consts::PI;

use ndarray::Array2;
use rand::seq::index::sample;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::assigners::{AssignerKind, AssignerSpec};
use crate::cluster_index::{cluster_index, Cluster};
use crate::dataset::{Label, PartiallyLabeledDataset};
use crate::engines::{sigpal, SimulationTestConfig};
use crate::error::{Error, Result};
use crate::spectral::{simulate_null, EigenMethod, EigenSpectrum};
use crate::stream::{purpose, Seed};

/// A validated `(θ, r)` pair.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TheoryInput {
    pub theta: f64,
    pub r: f64,
}

impl TheoryInput {
    pub fn new(theta: f64, r: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&theta) {
            return Err(Error::InvalidArgument(format!("theta must lie in [0, 1], got {theta}")));
        }
        if !(r > 0.0 && r <= 1.0) {
            return Err(Error::InvalidArgument(format!("r must lie in (0, 1], got {r}")));
        }
        Ok(TheoryInput { theta, r })
    }

    /// Uses `r = λ₁ / Σλ_j` of the spectrum.
    pub fn from_spectrum(theta: f64, spectrum: &EigenSpectrum) -> Result<Self> {
        if spectrum.is_empty() || spectrum.total() <= 0.0 {
            return Err(Error::InvalidArgument("spectrum must have positive total".into()));
        }
        TheoryInput::new(theta, spectrum.top_ratio())
    }

    pub fn tci_sigpal(self) -> f64 {
        tci_sigpal(self.theta, self.r)
    }

    pub fn tci_difference(self) -> f64 {
        tci_difference(self.theta, self.r)
    }
}

pub fn tci_sigpal(theta: f64, r: f64) -> f64 {
    1.0 + theta - 2.0 / PI * (1.0 - theta).powi(3) * r
}

pub fn tci_sigclust(r: f64) -> f64 {
    1.0 - 2.0 / PI * r
}

/// `tci_sigpal(θ, r) − tci_sigclust(r)`.
pub fn tci_difference(theta: f64, r: f64) -> f64 {
    tci_sigpal(theta, r) - tci_sigclust(r)
}

/// Per-class coefficient of `λ₁ / Σλ_j` in the SigPal within-cluster sum:
/// `(1 + θ)/2 − (1/π)(1 − θ)³`.
pub fn lambda1_coefficient_per_class(theta: f64) -> f64 {
    (1.0 + theta) / 2.0 - (1.0 - theta).powi(3) / PI
}

/// Bias of the top eigenvalue ratio of an estimated spectrum.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EigenBias {
    /// `λ̂₁/Σλ̂ − λ₁/Σλ`
    pub e: f64,
    /// `λ̂₁ − λ₁`
    pub delta1: f64,
    /// `Σλ̂ − Σλ`
    pub delta_sum: f64,
    /// Sign of `Σλ·δ₁ − λ₁·Δ`, which is the sign of `e`.
    pub predicted_sign: i8,
}

impl EigenBias {
    /// Negative `e` makes a test built on the estimate anti-conservative.
    pub fn anti_conservative(&self) -> bool {
        self.e < 0.0
    }
}

pub fn eigen_bias(est: &EigenSpectrum, truth: &EigenSpectrum) -> Result<EigenBias> {
    if est.is_empty() || truth.is_empty() {
        return Err(Error::InvalidArgument("spectra must be nonempty".into()));
    }
    let (s_hat, s) = (est.total(), truth.total());
    if s_hat <= 0.0 || s <= 0.0 {
        return Err(Error::Degenerate("eigenvalue sum is zero".into()));
    }
    let (l_hat, l) = (est.largest(), truth.largest());
    let delta1 = l_hat - l;
    let delta_sum = s_hat - s;
    let numerator = s * delta1 - l * delta_sum;
    Ok(EigenBias {
        e: l_hat / s_hat - l / s,
        delta1,
        delta_sum,
        predicted_sign: if numerator > 0.0 {
            1
        } else if numerator < 0.0 {
            -1
        } else {
            0
        },
    })
}

/// Mean and standard error of a Monte-Carlo estimate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub se: f64,
}

fn mean_sd(values: &[f64]) -> (f64, f64) {
    let k = values.len() as f64;
    let mean = values.iter().sum::<f64>() / k;
    let var = if values.len() > 1 {
        values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1.0)
    } else {
        0.0
    };
    (mean, var.sqrt())
}

/// Empirical cluster index of the assignment used for the population
/// construction: a `θ` fraction of rows carries uniform ±1 labels, the rest
/// are split by the sign of the first coordinate (the top eigenvector of a
/// sorted diagonal covariance).
pub fn monte_carlo_tci(theta: f64, spectrum: &EigenSpectrum, n: usize, reps: usize, seed: Seed) -> Result<Estimate> {
    if !(0.0..=1.0).contains(&theta) {
        return Err(Error::InvalidArgument(format!("theta must lie in [0, 1], got {theta}")));
    }
    if n < 2 || reps == 0 {
        return Err(Error::InvalidArgument("need n >= 2 and reps >= 1".into()));
    }
    let n_labeled = (theta * n as f64).round() as usize;
    let values = (0..reps)
        .into_par_iter()
        .map(|r| {
            let base = seed.child(purpose::NULL_REPLICATE).child(r as u64);
            let x = simulate_null(spectrum, n, &mut base.child(purpose::NULL_DATA).rng());
            let mut clusters: Vec<Cluster> = x
                .column(0)
                .iter()
                .map(|&v| if v >= 0.0 { Cluster::One } else { Cluster::Two })
                .collect();
            let mut rng = base.child(purpose::NULL_LABELS).rng();
            for i in sample(&mut rng, n, n_labeled) {
                clusters[i] = if rng.random::<bool>() {
                    Cluster::One
                } else {
                    Cluster::Two
                };
            }
            cluster_index(x.view(), &clusters).map_err(|e| e.in_replicate(r))
        })
        .collect::<Result<Vec<f64>>>()?;
    let (mean, sd) = mean_sd(&values);
    Ok(Estimate {
        mean,
        se: sd / (reps as f64).sqrt(),
    })
}

/// Diagonal of the component covariance as a function of the dimension.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum LambdaProfile {
    Constant {
        value: f64,
    },
    /// `w` entries equal to `v`, the rest 1.
    Spiked {
        v: f64,
        w: usize,
    },
}

impl LambdaProfile {
    pub fn values(&self, d: usize) -> Vec<f64> {
        match *self {
            LambdaProfile::Constant { value } => vec![value; d],
            LambdaProfile::Spiked { v, w } => (0..d).map(|j| if j < w { v } else { 1.0 }).collect(),
        }
    }
}

/// Settings of the growing-dimension study.
///
/// Data are `η N(0, D) + (1 − η) N(μ, D)` with `D = diag(λ)` and every
/// coordinate of `μ` equal to `a`. The null uses the known diagonal
/// `λ_j + η(1 − η)a²`. The convergence result behind the study assumes
/// `Σλ_j = O(d^β)` with `β < 1`, `Σa_j² = O(d)`, `Σa_j²λ_j = O(d^γ)` with
/// `γ < 2`, and bounded `λ_j + η(1 − η)a_j²`; the constant profile at fixed
/// `n` is the desk-sized stand-in.
///
/// The defaults (`n = 3`, one label per class, 1000 simulations) keep the
/// p-values at `d = 200` resolvable: with `a = 1` the separation grows like
/// `√d`, and larger samples already give `p = 0` there.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AsymptoticStudyConfig {
    pub eta: f64,
    pub a: f64,
    pub lambda: LambdaProfile,
    pub d_grid: Vec<usize>,
    pub reps: usize,
    pub n: usize,
    pub labeled_per_class: usize,
    pub n_sim: usize,
    pub assigner: AssignerSpec,
}

impl Default for AsymptoticStudyConfig {
    fn default() -> Self {
        AsymptoticStudyConfig {
            eta: 0.5,
            a: 1.0,
            lambda: LambdaProfile::Constant { value: 1.0 },
            d_grid: vec![50, 200, 800],
            reps: 20,
            n: 3,
            labeled_per_class: 1,
            n_sim: 1000,
            assigner: AssignerSpec::new(AssignerKind::CopKmeans),
        }
    }
}

impl AsymptoticStudyConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(m.to_string()));
        if !(self.eta > 0.0 && self.eta < 1.0) {
            return bad("eta must lie in (0, 1)");
        }
        if self.d_grid.is_empty() || self.d_grid.windows(2).any(|w| w[0] >= w[1]) || self.d_grid[0] == 0 {
            return bad("d_grid must be positive and strictly increasing");
        }
        if self.reps == 0 || self.n_sim == 0 {
            return bad("reps and n_sim must be at least 1");
        }
        if 2 * self.labeled_per_class > self.n || self.n < 3 {
            return bad("n must be at least 3 and cover the labeled rows");
        }
        if !self.a.is_finite() {
            return bad("a must be finite");
        }
        self.assigner.validate()
    }
}

/// One row of the study: p-values of all replicates at one dimension.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticRow {
    pub d: usize,
    pub mean_p: f64,
    pub sd_p: f64,
    pub p_values: Vec<f64>,
}

fn draw_two_component<R: Rng>(cfg: &AsymptoticStudyConfig, d: usize, rng: &mut R) -> Result<PartiallyLabeledDataset> {
    let lambda = cfg.lambda.values(d);
    let shifted = (0..100)
        .map(|_| {
            (0..cfg.n)
                .map(|_| rng.random::<f64>() >= cfg.eta)
                .collect::<Vec<bool>>()
        })
        .find(|s| {
            let k = s.iter().filter(|&&b| b).count();
            k >= cfg.labeled_per_class && cfg.n - k >= cfg.labeled_per_class
        })
        .ok_or_else(|| Error::Infeasible("could not realize enough rows per component".into()))?;
    let mut x = Array2::zeros((cfg.n, d));
    for (i, mut row) in x.rows_mut().into_iter().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            let z: f64 = rng.sample(StandardNormal);
            *v = lambda[j].sqrt() * z + if shifted[i] { cfg.a } else { 0.0 };
        }
    }
    let mut labels = vec![Label::Unlabeled; cfg.n];
    for (flag, label) in [(true, Label::Pos), (false, Label::Neg)] {
        let rows: Vec<usize> = (0..cfg.n).filter(|&i| shifted[i] == flag).collect();
        for k in sample(rng, rows.len(), cfg.labeled_per_class) {
            labels[rows[k]] = label;
        }
    }
    PartiallyLabeledDataset::new(x, labels)
}

/// Runs SigPal with the known null spectrum on fresh draws for every `d`.
pub fn asymptotic_pvalue_study(cfg: &AsymptoticStudyConfig, seed: Seed) -> Result<Vec<AsymptoticRow>> {
    cfg.validate()?;
    cfg.d_grid
        .iter()
        .map(|&d| {
            let null: Vec<f64> = cfg
                .lambda
                .values(d)
                .into_iter()
                .map(|l| l + cfg.eta * (1.0 - cfg.eta) * cfg.a * cfg.a)
                .collect();
            let test_cfg = SimulationTestConfig {
                n_sim: cfg.n_sim,
                eigen: EigenMethod::Known(EigenSpectrum::known(null)?),
                ..SimulationTestConfig::new(cfg.assigner.clone())
            };
            let p_values = (0..cfg.reps)
                .into_par_iter()
                .map(|r| {
                    let base = seed.child(d as u64).child(r as u64);
                    let data = draw_two_component(cfg, d, &mut base.child(purpose::GENERATE).rng())?;
                    Ok(sigpal(&data, &test_cfg, base.child(purpose::METHOD))?.p_value)
                })
                .enumerate()
                .map(|(r, res): (usize, Result<f64>)| res.map_err(|e| e.in_replicate(r)))
                .collect::<Result<Vec<f64>>>()?;
            let (mean_p, sd_p) = mean_sd(&p_values);
            Ok(AsymptoticRow {
                d,
                mean_p,
                sd_p,
                p_values,
            })
        })
        .collect()
}

/// Least-squares regression of every replicate p-value on `ln d`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrendTest {
    pub slope: f64,
    pub t: f64,
    /// One-sided p-value against a decreasing trend (`slope < 0`).
    pub p_decreasing: f64,
}

pub fn decreasing_trend_test(rows: &[AsymptoticRow]) -> Result<TrendTest> {
    let points: Vec<(f64, f64)> = rows
        .iter()
        .flat_map(|row| row.p_values.iter().map(move |&p| ((row.d as f64).ln(), p)))
        .collect();
    let k = points.len() as f64;
    if points.len() < 3 || rows.len() < 2 {
        return Err(Error::InvalidArgument(
            "trend test needs two dimensions and three points".into(),
        ));
    }
    let mx = points.iter().map(|p| p.0).sum::<f64>() / k;
    let my = points.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let sse: f64 = points.iter().map(|p| (p.1 - my - slope * (p.0 - mx)).powi(2)).sum();
    let se = (sse / (k - 2.0) / sxx).sqrt();
    if se == 0.0 {
        let p = if slope < 0.0 { 0.0 } else { 1.0 };
        return Ok(TrendTest {
            slope,
            t: if slope == 0.0 {
                0.0
            } else {
                slope.signum() * f64::INFINITY
            },
            p_decreasing: if slope == 0.0 { 1.0 } else { p },
        });
    }
    let t = slope / se;
    let dist = StudentsT::new(0.0, 1.0, k - 2.0).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    Ok(TrendTest {
        slope,
        t,
        p_decreasing: dist.cdf(t),
    })
}
