//! Posterior outputs: predictive glucose bands, the 3-hour prediction, and
//! parameter summaries.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::model::{self, FixedSettings, PatientParams};
use crate::sampler::PosteriorSample;

/// Prediction horizon for the post-test glucose level (hr).
pub const G3_HORIZON: f64 = 3.0;
/// Default threshold for the elevated-glucose probability (mg/dL).
pub const DEFAULT_G3_THRESHOLD: f64 = 120.0;
/// Cap on the number of draws pushed through the forward model when
/// predicting G(3h); draws beyond this are subsampled evenly.
const MAX_PREDICTION_DRAWS: usize = 5_000;
/// Number of simulated curves retained in the band for plotting.
const MAX_PLOT_CURVES: usize = 60;

/// Pointwise quantiles and mean of simulated glucose curves over a grid.
#[derive(Debug, Clone)]
pub struct PredictiveBand {
    pub times: Vec<f64>,
    pub mean: Vec<f64>,
    pub q05: Vec<f64>,
    pub q25: Vec<f64>,
    pub q50: Vec<f64>,
    pub q75: Vec<f64>,
    pub q95: Vec<f64>,
    /// Evenly thinned subset of the simulated curves, for spaghetti plots.
    pub sample_curves: Vec<Vec<f64>>,
    /// Curves dropped because their parameters failed to simulate.
    pub dropped: usize,
}

/// Linear interpolation between order statistics (R type-7 convention):
/// `h = (n - 1) q`, interpolate between `floor(h)` and `floor(h) + 1`.
/// Fixed so that outputs are identical across implementations.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of empty slice");
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * q.clamp(0.0, 1.0);
    let i = h.floor() as usize;
    if i + 1 >= n {
        sorted[n - 1]
    } else {
        sorted[i] + (h - i as f64) * (sorted[i + 1] - sorted[i])
    }
}

fn evenly_spaced_indices(total: usize, want: usize) -> Vec<usize> {
    let m = want.min(total);
    (0..m).map(|i| i * total / m).collect()
}

/// Simulate glucose curves for an evenly spaced subset of the posterior
/// draws (at most `max_curves`) and reduce them to pointwise quantiles.
///
/// Draws whose simulation fails are dropped and counted; more than 1%
/// dropped aborts the whole band.
pub fn predictive_band(
    sample: &PosteriorSample,
    fs: &FixedSettings,
    horizon: f64,
    grid_step: f64,
    max_curves: usize,
) -> Result<PredictiveBand> {
    if sample.n_kept() == 0 {
        return Err(Error::EmptySample);
    }
    if horizon <= 0.0 || horizon.is_nan() {
        return Err(Error::InvalidArgument(format!(
            "horizon must be > 0, got {horizon}"
        )));
    }
    if max_curves == 0 {
        return Err(Error::InvalidArgument("max_curves must be >= 1".into()));
    }

    let indices = evenly_spaced_indices(sample.n_kept(), max_curves);
    let mut curves: Vec<Vec<f64>> = Vec::with_capacity(indices.len());
    let mut times: Option<Vec<f64>> = None;
    let mut dropped = 0usize;
    for &i in &indices {
        let p = match PatientParams::from_vector(&sample.draws[i]) {
            Ok(p) => p,
            Err(_) => {
                dropped += 1;
                continue;
            }
        };
        match model::simulate(&p, fs, horizon, grid_step) {
            Ok(traj) => {
                if times.is_none() {
                    times = Some(traj.times.clone());
                }
                curves.push(traj.glucose());
            }
            Err(_) => dropped += 1,
        }
    }
    let total = indices.len();
    if curves.is_empty() || dropped * 100 > total {
        return Err(Error::TooManySimulationFailures { dropped, total });
    }
    let times = times.expect("at least one curve");
    let n_t = times.len();
    let mut mean = vec![0.0; n_t];
    let mut q05 = vec![0.0; n_t];
    let mut q25 = vec![0.0; n_t];
    let mut q50 = vec![0.0; n_t];
    let mut q75 = vec![0.0; n_t];
    let mut q95 = vec![0.0; n_t];
    let mut column = vec![0.0; curves.len()];
    for t in 0..n_t {
        for (k, c) in curves.iter().enumerate() {
            column[k] = c[t];
        }
        mean[t] = column.iter().sum::<f64>() / column.len() as f64;
        column.sort_by(|a, b| a.partial_cmp(b).expect("finite glucose"));
        q05[t] = quantile(&column, 0.05);
        q25[t] = quantile(&column, 0.25);
        q50[t] = quantile(&column, 0.50);
        q75[t] = quantile(&column, 0.75);
        q95[t] = quantile(&column, 0.95);
    }
    let plot_idx = evenly_spaced_indices(curves.len(), MAX_PLOT_CURVES);
    let sample_curves = plot_idx.iter().map(|&i| curves[i].clone()).collect();
    Ok(PredictiveBand {
        times,
        mean,
        q05,
        q25,
        q50,
        q75,
        q95,
        sample_curves,
        dropped,
    })
}

/// Posterior-predictive summary of blood glucose three hours after the test.
#[derive(Debug, Clone, Copy)]
pub struct G3Prediction {
    /// Mean of the latent curve values G(3), before observation noise.
    pub latent_mean: f64,
    /// Mean of the noise-jittered predictive distribution.
    pub mean: f64,
    /// Central 95% interval of the predictive distribution.
    pub lo: f64,
    pub hi: f64,
    /// P[G(3h) + e > threshold].
    pub p_above: f64,
    pub threshold: f64,
    pub n_draws: usize,
}

/// Push posterior draws through the forward model to `t = 3 h` and add
/// Gaussian observation noise (`sigma` from the fixed settings) to form the
/// posterior predictive. Deterministic given `jitter_seed`.
pub fn predict_g3h(
    sample: &PosteriorSample,
    fs: &FixedSettings,
    threshold: f64,
    jitter_seed: u64,
) -> Result<G3Prediction> {
    if sample.n_kept() == 0 {
        return Err(Error::EmptySample);
    }
    let indices = evenly_spaced_indices(sample.n_kept(), MAX_PREDICTION_DRAWS);
    let total = indices.len();
    let mut latent = Vec::with_capacity(total);
    let mut dropped = 0usize;
    for &i in &indices {
        let Ok(p) = PatientParams::from_vector(&sample.draws[i]) else {
            dropped += 1;
            continue;
        };
        match model::glucose_at(&p, fs, &[G3_HORIZON]) {
            Ok(g) => latent.push(g[0]),
            Err(_) => dropped += 1,
        }
    }
    if latent.is_empty() || dropped * 100 > total {
        return Err(Error::TooManySimulationFailures { dropped, total });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(jitter_seed);
    let predictive: Vec<f64> = latent
        .iter()
        .map(|&g| {
            let z: f64 = StandardNormal.sample(&mut rng);
            g + fs.sigma * z
        })
        .collect();
    let n = predictive.len() as f64;
    let latent_mean = latent.iter().sum::<f64>() / n;
    let mean = predictive.iter().sum::<f64>() / n;
    let p_above = predictive.iter().filter(|&&g| g > threshold).count() as f64 / n;
    let mut sorted = predictive;
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    Ok(G3Prediction {
        latent_mean,
        mean,
        lo: quantile(&sorted, 0.025),
        hi: quantile(&sorted, 0.975),
        p_above,
        threshold,
        n_draws: latent.len(),
    })
}

/// Moments and central 95% interval of one marginal.
#[derive(Debug, Clone, Copy)]
pub struct ParamSummary {
    pub mean: f64,
    pub sd: f64,
    pub median: f64,
    pub lo: f64,
    pub hi: f64,
}

pub fn summarize_column(values: &[f64]) -> ParamSummary {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    ParamSummary {
        mean,
        sd: var.sqrt(),
        median: quantile(&sorted, 0.5),
        lo: quantile(&sorted, 0.025),
        hi: quantile(&sorted, 0.975),
    }
}

/// Classification of the insulin sensitivity against configurable cutoffs.
///
/// The default cutoffs (low below 1, high above 4) are tool conventions,
/// not clinical values, and outputs label them as such.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Theta0Flag {
    Low,
    Normal,
    High,
}

impl std::fmt::Display for Theta0Flag {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Theta0Flag::Low => "low",
            Theta0Flag::Normal => "normal",
            Theta0Flag::High => "high",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Theta0Cutoffs {
    pub low: f64,
    pub high: f64,
}

impl Default for Theta0Cutoffs {
    fn default() -> Self {
        Self {
            low: 1.0,
            high: 4.0,
        }
    }
}

impl Theta0Cutoffs {
    pub fn validate(&self) -> Result<()> {
        if !(self.low > 0.0 && self.high > self.low) {
            return Err(Error::InvalidArgument(format!(
                "theta0 cutoffs must satisfy 0 < low < high, got ({}, {})",
                self.low, self.high
            )));
        }
        Ok(())
    }

    pub fn classify(&self, theta0_median: f64) -> Theta0Flag {
        if theta0_median < self.low {
            Theta0Flag::Low
        } else if theta0_median > self.high {
            Theta0Flag::High
        } else {
            Theta0Flag::Normal
        }
    }
}

/// Per-parameter summaries, the insulin-sensitivity flag, and the 3-hour
/// prediction.
#[derive(Debug, Clone)]
pub struct FitSummary {
    pub theta0: ParamSummary,
    pub theta1: ParamSummary,
    pub theta2: ParamSummary,
    pub g0: ParamSummary,
    pub theta0_flag: Theta0Flag,
    pub cutoffs: Theta0Cutoffs,
    pub g3h: G3Prediction,
    pub n_kept: usize,
    pub acceptance_rate: f64,
    pub iat: [f64; 4],
}

/// Summarize a posterior sample. The flag compares the posterior median of
/// theta0 against the cutoffs.
pub fn summarize(
    sample: &PosteriorSample,
    fs: &FixedSettings,
    cutoffs: &Theta0Cutoffs,
    g3h_threshold: f64,
    jitter_seed: u64,
) -> Result<FitSummary> {
    if sample.n_kept() == 0 {
        return Err(Error::EmptySample);
    }
    cutoffs.validate()?;
    let theta0 = summarize_column(&sample.column(0));
    let theta1 = summarize_column(&sample.column(1));
    let theta2 = summarize_column(&sample.column(2));
    let g0 = summarize_column(&sample.column(3));
    let g3h = predict_g3h(sample, fs, g3h_threshold, jitter_seed)?;
    Ok(FitSummary {
        theta0,
        theta1,
        theta2,
        g0,
        theta0_flag: cutoffs.classify(theta0.median),
        cutoffs: *cutoffs,
        g3h,
        n_kept: sample.n_kept(),
        acceptance_rate: sample.acceptance_rate,
        iat: sample.iat,
    })
}
