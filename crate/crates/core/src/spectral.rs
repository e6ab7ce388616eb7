//! Covariance eigen-spectra: the sample spectrum, a robust background-noise
//! level, hard and soft eigenvalue thresholding, and simulation from the
//! Gaussian null `N(0, diag(lambda))`.

use ndarray::{Array2, ArrayView2};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;

/// `Phi^{-1}(0.75)`: MAD of a standard normal.
pub const MAD_NORMAL_SCALE: f64 = 0.674_489_750_196_081_7;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpectrumSource {
    Sample,
    Hard,
    Soft,
    Known,
}

/// Nonincreasing eigenvalues of a covariance matrix, in variance units.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EigenSpectrum {
    pub values: Vec<f64>,
    pub source: SpectrumSource,
    /// Background noise level used to floor the spectrum (thresholded
    /// spectra only).
    pub noise_level: Option<f64>,
    /// Soft-threshold shift.
    pub tau: Option<f64>,
    /// Whether the soft threshold preserved the total variance.
    pub energy_preserved: Option<bool>,
}

impl EigenSpectrum {
    /// A user-supplied spectrum. Values are sorted into nonincreasing order.
    pub fn known(mut values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidArgument("empty spectrum".into()));
        }
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidArgument(
                "spectrum values must be finite and nonnegative".into(),
            ));
        }
        values.sort_by(|a, b| b.total_cmp(a));
        Ok(EigenSpectrum {
            values,
            source: SpectrumSource::Known,
            noise_level: None,
            tau: None,
            energy_preserved: None,
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn largest(&self) -> f64 {
        self.values.first().copied().unwrap_or(0.0)
    }

    /// `lambda_1 / sum(lambda)`.
    pub fn top_ratio(&self) -> f64 {
        self.largest() / self.total()
    }
}

/// How the null spectrum is obtained from data.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EigenMethod {
    Hard,
    #[default]
    Soft,
    Known(EigenSpectrum),
}

impl EigenMethod {
    pub fn id(&self) -> &'static str {
        match self {
            EigenMethod::Hard => "hard",
            EigenMethod::Soft => "soft",
            EigenMethod::Known(_) => "known",
        }
    }
}

/// Eigenvalues of the sample covariance `x'x / (n - 1)` of a centered
/// matrix.
///
/// When `d > n` the nonzero eigenvalues are taken from the `n x n` Gram
/// matrix `x x' / (n - 1)` and zeros are appended up to length `d`.
pub fn sample_eigenvalues(x: ArrayView2<f64>) -> Result<EigenSpectrum> {
    let (n, d) = x.dim();
    if n < 2 {
        return Err(Error::TooFewRows { min: 2, found: n });
    }
    let scale = x.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
    let worst = linalg::column_means(x).iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    if worst > 1e-8 * scale {
        return Err(Error::NotCentered(worst));
    }
    let mut values = if d > n {
        let gram = x.dot(&x.t()) / (n as f64 - 1.0);
        let (mut v, _) = linalg::symmetric_eigen(gram.view());
        v.resize(d, 0.0);
        v
    } else {
        let cov = linalg::covariance_of_centered(x);
        linalg::symmetric_eigen(cov.view()).0
    };
    for v in &mut values {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
    Ok(EigenSpectrum {
        values,
        source: SpectrumSource::Sample,
        noise_level: None,
        tau: None,
        energy_preserved: None,
    })
}

fn median(sorted: &[f64]) -> f64 {
    let m = sorted.len() / 2;
    if sorted.len() % 2 == 1 {
        sorted[m]
    } else {
        0.5 * (sorted[m - 1] + sorted[m])
    }
}

/// Robust background noise variance: squared MAD of all column-centered
/// entries, scaled to be consistent for Gaussian noise.
pub fn background_noise(x: ArrayView2<f64>) -> Result<f64> {
    if x.len() < 2 {
        return Err(Error::InvalidArgument("need at least two entries".into()));
    }
    let (c, _) = linalg::centered(x);
    let mut entries: Vec<f64> = c.iter().copied().collect();
    entries.sort_by(f64::total_cmp);
    let med = median(&entries);
    let mut dev: Vec<f64> = entries.iter().map(|v| (v - med).abs()).collect();
    dev.sort_by(f64::total_cmp);
    let mad = median(&dev);
    if mad == 0.0 {
        return Err(Error::ZeroNoise);
    }
    let sigma = mad / MAD_NORMAL_SCALE;
    Ok(sigma * sigma)
}

/// Replaces every eigenvalue below `noise` with `noise`.
pub fn hard_threshold(sample: &EigenSpectrum, noise: f64) -> EigenSpectrum {
    assert!(noise > 0.0, "noise level must be positive");
    EigenSpectrum {
        values: sample.values.iter().map(|&v| v.max(noise)).collect(),
        source: SpectrumSource::Hard,
        noise_level: Some(noise),
        tau: None,
        energy_preserved: None,
    }
}

fn soft_map(values: &[f64], tau: f64, noise: f64) -> impl Iterator<Item = f64> + '_ {
    values
        .iter()
        .map(move |&v| if v >= tau + noise { v - tau } else { noise })
}

/// Soft thresholding: eigenvalues at least `tau + noise` are shifted down by
/// `tau`, the rest are floored at `noise`, with `tau >= 0` chosen so the
/// total variance is unchanged.
///
/// The thresholded total is continuous and nonincreasing in `tau`, so `tau`
/// is found by bisection on `[0, lambda_1]` and then solved exactly on the
/// final linear piece. When no `tau` can preserve the total (the noise floor
/// alone exceeds it) the hard-thresholded spectrum is returned with
/// `tau = 0` and `energy_preserved = false`.
pub fn soft_threshold(sample: &EigenSpectrum, noise: f64) -> EigenSpectrum {
    assert!(noise > 0.0, "noise level must be positive");
    let values = &sample.values;
    let target: f64 = values.iter().sum();
    let top = sample.largest();
    let total_at = |tau: f64| -> f64 { soft_map(values, tau, noise).sum() };

    let finish = |tau: f64, preserved: bool| EigenSpectrum {
        values: soft_map(values, tau, noise).collect(),
        source: SpectrumSource::Soft,
        noise_level: Some(noise),
        tau: Some(tau),
        energy_preserved: Some(preserved),
    };

    let floor_total = noise * values.len() as f64;
    if floor_total > target * (1.0 + 1e-12) {
        return finish(0.0, false);
    }
    if total_at(0.0) <= target * (1.0 + 1e-12) {
        return finish(0.0, true);
    }

    let (mut lo, mut hi) = (0.0_f64, top);
    let tol = 1e-12 * top;
    for _ in 0..200 {
        if hi - lo <= tol {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if total_at(mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mut tau = 0.5 * (lo + hi);
    // exact solve on the linear piece that contains tau
    let active: Vec<f64> = values.iter().copied().filter(|&v| v >= tau + noise).collect();
    if !active.is_empty() {
        let k = active.len() as f64;
        let floored = (values.len() - active.len()) as f64 * noise;
        let exact = (active.iter().sum::<f64>() + floored - target) / k;
        let same_piece = exact >= 0.0 && values.iter().all(|&v| (v >= tau + noise) == (v >= exact + noise));
        if same_piece {
            tau = exact;
        }
    }
    finish(tau, true)
}

/// Estimates the null spectrum of centered data by `method`.
pub fn estimate_spectrum(x_centered: ArrayView2<f64>, method: &EigenMethod) -> Result<EigenSpectrum> {
    match method {
        EigenMethod::Known(s) => {
            if s.len() != x_centered.ncols() {
                return Err(Error::InvalidArgument(format!(
                    "known spectrum has {} values for {} columns",
                    s.len(),
                    x_centered.ncols()
                )));
            }
            Ok(s.clone())
        }
        EigenMethod::Hard => {
            let noise = background_noise(x_centered)?;
            Ok(hard_threshold(&sample_eigenvalues(x_centered)?, noise))
        }
        EigenMethod::Soft => {
            let noise = background_noise(x_centered)?;
            Ok(soft_threshold(&sample_eigenvalues(x_centered)?, noise))
        }
    }
}

/// `n` rows with independent `N(0, lambda_j)` columns, drawn row by row.
pub fn simulate_null<R: Rng + ?Sized>(spectrum: &EigenSpectrum, n: usize, rng: &mut R) -> Array2<f64> {
    let sd: Vec<f64> = spectrum.values.iter().map(|v| v.max(0.0).sqrt()).collect();
    let d = sd.len();
    let mut data = Vec::with_capacity(n * d);
    for _ in 0..n {
        for &s in &sd {
            let z: f64 = rng.sample(StandardNormal);
            data.push(if s == 0.0 { 0.0 } else { s * z });
        }
    }
    Array2::from_shape_vec((n, d), data).expect("shape matches buffer")
}
