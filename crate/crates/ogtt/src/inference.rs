//! Priors, Gaussian likelihood, and the unnormalized log-posterior.
//!
//! Observations `d_i` at times `t_i` are modeled as `d_i = G(t_i) + e_i`
//! with `e_i ~ N(0, sigma)` and `sigma` fixed (default 5 mg/dL), so the
//! log-likelihood is the usual quadratic form. Priors:
//!
//! * `theta0, theta1 ~ Gamma(shape 2, rate 1/4)` (vague, mean 8),
//! * `theta2 ~ Gamma(shape 10, rate 20)` truncated to `[1/6, 2]`
//!   (untruncated mean 1/2 hr),
//! * `g0 ~ Normal(center, sd)` truncated to `(0, inf)`, by default centered
//!   on the fasting reading with sd 10 mg/dL.
//!
//! All prior log-densities are fully normalized (including the log-Gamma
//! terms and truncation masses) so values are comparable across parameter
//! points and usable in calibration experiments. Out-of-support parameters
//! get log-density `-inf`; the sampler rejects such proposals outright.

use rand::Rng;
use rand_distr::Distribution;
use statrs::distribution::{ContinuousCDF, Gamma as GammaDist, Normal as NormalDist};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::model::{self, FixedSettings, PatientParams, THETA2_MAX, THETA2_MIN};

pub(crate) const LN_2PI: f64 = 1.8378770664093453;

/// Default observation-noise-scaled sd of the g0 prior (mg/dL).
pub const DEFAULT_G0_PRIOR_SD: f64 = 10.0;

/// OGTT glucose readings `(t_i, d_i)`, strictly increasing in time.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationSet {
    records: Vec<(f64, f64)>,
}

impl ObservationSet {
    pub fn new(records: Vec<(f64, f64)>) -> Result<Self> {
        if records.len() < 2 {
            return Err(Error::InvalidObservations(format!(
                "need at least 2 observations, got {}",
                records.len()
            )));
        }
        for (i, &(t, d)) in records.iter().enumerate() {
            if !t.is_finite() || !d.is_finite() {
                return Err(Error::InvalidObservations(format!(
                    "record {i} is not finite"
                )));
            }
            if d <= 0.0 {
                return Err(Error::InvalidObservations(format!(
                    "glucose must be > 0, got {d} in record {i}"
                )));
            }
        }
        if records[0].0 < 0.0 {
            return Err(Error::InvalidObservations(format!(
                "first time must be >= 0, got {}",
                records[0].0
            )));
        }
        for w in records.windows(2) {
            if w[1].0 <= w[0].0 {
                return Err(Error::InvalidObservations(format!(
                    "times must be strictly increasing, got {} then {}",
                    w[0].0, w[1].0
                )));
            }
        }
        Ok(Self { records })
    }

    pub fn records(&self) -> &[(f64, f64)] {
        &self.records
    }

    pub fn times(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.0).collect()
    }

    pub fn glucose(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.1).collect()
    }

    /// The fasting reading `d_0`, used to anchor the g0 prior.
    pub fn first_glucose(&self) -> f64 {
        self.records[0].1
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn last_time(&self) -> f64 {
        self.records.last().expect("n >= 2").0
    }
}

/// Gamma prior in shape/rate form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaPrior {
    pub shape: f64,
    pub rate: f64,
    ln_norm: f64,
}

impl GammaPrior {
    pub fn new(shape: f64, rate: f64) -> Result<Self> {
        if !shape.is_finite() || !rate.is_finite() || shape <= 0.0 || rate <= 0.0 {
            return Err(Error::InvalidPrior(format!(
                "gamma shape and rate must be > 0, got ({shape}, {rate})"
            )));
        }
        Ok(Self {
            shape,
            rate,
            ln_norm: shape * rate.ln() - ln_gamma(shape),
        })
    }

    pub fn ln_pdf(&self, x: f64) -> f64 {
        if !x.is_finite() || x <= 0.0 {
            return f64::NEG_INFINITY;
        }
        self.ln_norm + (self.shape - 1.0) * x.ln() - self.rate * x
    }

    pub fn mean(&self) -> f64 {
        self.shape / self.rate
    }

    pub fn sd(&self) -> f64 {
        self.shape.sqrt() / self.rate
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        // rand_distr parameterizes by scale.
        rand_distr::Gamma::new(self.shape, 1.0 / self.rate)
            .expect("validated at construction")
            .sample(rng)
    }
}

/// Gamma prior truncated to `[lo, hi]`, normalized by the retained mass.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncatedGammaPrior {
    pub shape: f64,
    pub rate: f64,
    pub lo: f64,
    pub hi: f64,
    ln_norm: f64,
    ln_mass: f64,
    cdf_lo: f64,
    cdf_hi: f64,
}

impl TruncatedGammaPrior {
    pub fn new(shape: f64, rate: f64, lo: f64, hi: f64) -> Result<Self> {
        if !shape.is_finite() || !rate.is_finite() || shape <= 0.0 || rate <= 0.0 {
            return Err(Error::InvalidPrior(format!(
                "gamma shape and rate must be > 0, got ({shape}, {rate})"
            )));
        }
        if !lo.is_finite() || !hi.is_finite() || lo <= 0.0 || hi <= lo {
            return Err(Error::InvalidPrior(format!(
                "truncation bounds must satisfy 0 < lo < hi, got [{lo}, {hi}]"
            )));
        }
        let dist = GammaDist::new(shape, rate).expect("positive shape and rate");
        let cdf_lo = dist.cdf(lo);
        let cdf_hi = dist.cdf(hi);
        let mass = cdf_hi - cdf_lo;
        if mass.is_nan() || mass <= 1e-12 {
            return Err(Error::InvalidPrior(format!(
                "truncation [{lo}, {hi}] keeps essentially no prior mass ({mass:e})"
            )));
        }
        Ok(Self {
            shape,
            rate,
            lo,
            hi,
            ln_norm: shape * rate.ln() - ln_gamma(shape),
            ln_mass: mass.ln(),
            cdf_lo,
            cdf_hi,
        })
    }

    pub fn ln_pdf(&self, x: f64) -> f64 {
        if !x.is_finite() || x < self.lo || x > self.hi {
            return f64::NEG_INFINITY;
        }
        self.ln_norm + (self.shape - 1.0) * x.ln() - self.rate * x - self.ln_mass
    }

    /// Inverse-CDF sampling: exact support, one uniform per draw.
    pub fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        let u = self.cdf_lo + (self.cdf_hi - self.cdf_lo) * rng.random::<f64>();
        let dist = GammaDist::new(self.shape, self.rate).expect("validated");
        dist.inverse_cdf(u).clamp(self.lo, self.hi)
    }
}

/// Normal prior truncated to `(0, inf)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncatedNormalPrior {
    pub center: f64,
    pub sd: f64,
    ln_norm: f64,
    cdf_zero: f64,
}

impl TruncatedNormalPrior {
    pub fn new(center: f64, sd: f64) -> Result<Self> {
        if !sd.is_finite() || !center.is_finite() || sd <= 0.0 {
            return Err(Error::InvalidPrior(format!(
                "normal prior needs finite center and sd > 0, got ({center}, {sd})"
            )));
        }
        let std = NormalDist::standard();
        let cdf_zero = std.cdf(-center / sd);
        let mass = 1.0 - cdf_zero;
        if mass.is_nan() || mass <= 1e-12 {
            return Err(Error::InvalidPrior(format!(
                "positive-truncated normal centered at {center} keeps no mass"
            )));
        }
        Ok(Self {
            center,
            sd,
            ln_norm: -sd.ln() - 0.5 * LN_2PI - mass.ln(),
            cdf_zero,
        })
    }

    pub fn ln_pdf(&self, x: f64) -> f64 {
        if !x.is_finite() || x <= 0.0 {
            return f64::NEG_INFINITY;
        }
        let z = (x - self.center) / self.sd;
        self.ln_norm - 0.5 * z * z
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        let u = self.cdf_zero + (1.0 - self.cdf_zero) * rng.random::<f64>();
        let std = NormalDist::standard();
        (self.center + self.sd * std.inverse_cdf(u)).max(f64::MIN_POSITIVE)
    }
}

/// Per-parameter prior descriptors for `(theta0, theta1, theta2, g0)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PriorSpec {
    pub theta0: GammaPrior,
    pub theta1: GammaPrior,
    pub theta2: TruncatedGammaPrior,
    pub g0: TruncatedNormalPrior,
}

impl PriorSpec {
    /// Defaults with the g0 prior centered on the fasting reading `d0`.
    pub fn anchored_to(d0: f64) -> Result<Self> {
        Ok(Self {
            theta0: GammaPrior::new(2.0, 0.25)?,
            theta1: GammaPrior::new(2.0, 0.25)?,
            theta2: TruncatedGammaPrior::new(10.0, 20.0, THETA2_MIN, THETA2_MAX)?,
            g0: TruncatedNormalPrior::new(d0, DEFAULT_G0_PRIOR_SD)?,
        })
    }

    /// Sum of normalized component log-densities; `-inf` outside support.
    pub fn log_prior(&self, theta: &[f64; 4]) -> f64 {
        if theta.iter().any(|x| !x.is_finite()) {
            return f64::NEG_INFINITY;
        }
        let lp = self.theta0.ln_pdf(theta[0])
            + self.theta1.ln_pdf(theta[1])
            + self.theta2.ln_pdf(theta[2])
            + self.g0.ln_pdf(theta[3]);
        if lp.is_nan() {
            f64::NEG_INFINITY
        } else {
            lp
        }
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> [f64; 4] {
        [
            self.theta0.sample(rng),
            self.theta1.sample(rng),
            self.theta2.sample(rng),
            self.g0.sample(rng),
        ]
    }
}

/// Normalized prior log-density of a parameter vector.
pub fn log_prior(theta: &[f64; 4], prior: &PriorSpec) -> f64 {
    prior.log_prior(theta)
}

/// Gaussian log-likelihood of the observations under the forward model,
/// including the `-(n/2) log(2 pi sigma^2)` constant.
///
/// Integration failure is reported as `-inf` (with a debug log) so the
/// sampler simply rejects the offending parameter point.
pub fn log_likelihood(p: &PatientParams, fs: &FixedSettings, obs: &ObservationSet) -> f64 {
    log_likelihood_signed(p, fs, obs, 1.0)
}

/// `sign = 1.0` is the real model. `sign = -1.0` flips the quadratic term
/// and exists only as a deliberately broken likelihood for negative-control
/// calibration runs.
pub(crate) fn log_likelihood_signed(
    p: &PatientParams,
    fs: &FixedSettings,
    obs: &ObservationSet,
    sign: f64,
) -> f64 {
    let sigma = fs.sigma;
    if sigma <= 0.0 || sigma.is_nan() {
        return f64::NEG_INFINITY;
    }
    let g = match model::glucose_at(p, fs, &obs.times()) {
        Ok(g) => g,
        Err(e) => {
            log::debug!("forward simulation failed at {p:?}: {e}");
            return f64::NEG_INFINITY;
        }
    };
    let n = obs.len() as f64;
    let mut quad = 0.0;
    for ((_, d), gi) in obs.records().iter().zip(&g) {
        let r = d - gi;
        quad += r * r;
    }
    let value = -0.5 * n * (LN_2PI + 2.0 * sigma.ln()) - sign * quad / (2.0 * sigma * sigma);
    if value.is_nan() {
        f64::NEG_INFINITY
    } else {
        value
    }
}

/// Unnormalized posterior log-density over `(theta0, theta1, theta2, g0)`.
pub fn log_posterior(
    theta: &[f64; 4],
    fs: &FixedSettings,
    obs: &ObservationSet,
    prior: &PriorSpec,
) -> f64 {
    log_posterior_signed(theta, fs, obs, prior, 1.0)
}

pub(crate) fn log_posterior_signed(
    theta: &[f64; 4],
    fs: &FixedSettings,
    obs: &ObservationSet,
    prior: &PriorSpec,
    sign: f64,
) -> f64 {
    let lp = prior.log_prior(theta);
    if lp == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    let p = match PatientParams::from_vector(theta) {
        Ok(p) => p,
        Err(_) => return f64::NEG_INFINITY,
    };
    lp + log_likelihood_signed(&p, fs, obs, sign)
}
