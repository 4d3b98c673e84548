//! Self-adjusting two-point MCMC and chain diagnostics.
//!
//! The kernel keeps a coupled pair of points `(x, x')` with invariant
//! distribution `f(x) f(x')` and, each iteration, updates one of the two by
//! one of four scale-free proposal moves (walk, traverse, blow, hop). All
//! proposal scales derive from the current separation of the pair, which is
//! what makes the sampler self-adjusting: there is nothing to tune per
//! target, so the move probabilities and shape constants below are fixed
//! magic numbers rather than configuration.
//!
//! Out-of-support proposals carry log-density `-inf` and are never accepted,
//! so the chain cannot leave the target's support. Runs are reproducible:
//! a single ChaCha8 stream seeded from [`SamplerConfig::seed`] drives every
//! random choice, so identical configurations give bit-identical output.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::inference::PriorSpec;

// Kernel mixture and shape constants, as published for the four-move
// self-adjusting sampler.
const PROB_WALK: f64 = 0.4918;
const PROB_TRAVERSE: f64 = 0.4918;
const PROB_BLOW: f64 = 0.0082;
const WALK_SHAPE: f64 = 1.5;
const TRAVERSE_SHAPE: f64 = 6.0;
const EXPECTED_MOVED_COORDS: f64 = 4.0;

const LN_2PI: f64 = crate::inference::LN_2PI;

/// Window length for the low-acceptance stagnation check.
const STAGNATION_WINDOW: usize = 1000;

/// Default chain length and burn-in for a patient fit.
pub const DEFAULT_ITERATIONS: usize = 200_000;
pub const DEFAULT_BURN_IN: usize = 20_000;
/// Default master seed; every run prints the seed it actually used.
pub const DEFAULT_SEED: u64 = 20260809;

/// Configuration for one chain. `init` is the coupled start pair; the two
/// points must differ in every coordinate and both must have finite target
/// log-density.
#[derive(Debug, Clone)]
pub struct SamplerConfig {
    pub n_iterations: usize,
    pub burn_in: usize,
    /// Keep every `thin`-th post-burn-in state. Draws are normally stored
    /// unthinned (`thin = 1`) and thinned later from the measured
    /// autocorrelation time.
    pub thin: usize,
    pub seed: u64,
    pub init: (Vec<f64>, Vec<f64>),
}

impl SamplerConfig {
    pub fn new(n_iterations: usize, burn_in: usize, seed: u64, init: (Vec<f64>, Vec<f64>)) -> Self {
        Self {
            n_iterations,
            burn_in,
            thin: 1,
            seed,
            init,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.n_iterations <= self.burn_in {
            return Err(Error::InvalidSamplerConfig(format!(
                "n_iterations ({}) must exceed burn_in ({})",
                self.n_iterations, self.burn_in
            )));
        }
        if self.thin == 0 {
            return Err(Error::InvalidSamplerConfig("thin must be >= 1".into()));
        }
        let (a, b) = (&self.init.0, &self.init.1);
        if a.is_empty() || a.len() != b.len() {
            return Err(Error::InvalidSamplerConfig(
                "init points must be non-empty and of equal dimension".into(),
            ));
        }
        if a.iter().zip(b).any(|(x, y)| x == y) {
            return Err(Error::InvalidSamplerConfig(
                "init points must differ in every coordinate".into(),
            ));
        }
        Ok(())
    }
}

/// Raw kept draws from one chain, any dimension.
#[derive(Debug, Clone)]
pub struct Chain {
    pub dim: usize,
    draws: Vec<f64>,
    pub logpost: Vec<f64>,
    pub accepted: usize,
    pub n_iterations: usize,
    /// True if any 1000-iteration window accepted fewer than 1% of moves.
    pub stagnated: bool,
}

impl Chain {
    pub fn n_kept(&self) -> usize {
        self.logpost.len()
    }

    pub fn draw(&self, i: usize) -> &[f64] {
        &self.draws[i * self.dim..(i + 1) * self.dim]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.n_kept()).map(|i| self.draw(i)[j]).collect()
    }

    pub fn acceptance_rate(&self) -> f64 {
        self.accepted as f64 / self.n_iterations as f64
    }
}

/// Posterior draws over `(theta0, theta1, theta2, g0)` with diagnostics.
#[derive(Debug, Clone)]
pub struct PosteriorSample {
    pub draws: Vec<[f64; 4]>,
    pub logpost: Vec<f64>,
    pub acceptance_rate: f64,
    /// Integrated autocorrelation time per coordinate.
    pub iat: [f64; 4],
    pub stagnated: bool,
}

impl PosteriorSample {
    pub fn n_kept(&self) -> usize {
        self.draws.len()
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.draws.iter().map(|d| d[j]).collect()
    }

    pub fn from_chain(chain: &Chain) -> Result<Self> {
        if chain.dim != 4 {
            return Err(Error::InvalidSamplerConfig(format!(
                "posterior sample needs a 4-dimensional chain, got {}",
                chain.dim
            )));
        }
        let draws: Vec<[f64; 4]> = (0..chain.n_kept())
            .map(|i| {
                let d = chain.draw(i);
                [d[0], d[1], d[2], d[3]]
            })
            .collect();
        let mut iat = [1.0; 4];
        for (j, slot) in iat.iter_mut().enumerate() {
            *slot = integrated_autocorr_time(&chain.column(j));
        }
        Ok(Self {
            draws,
            logpost: chain.logpost.clone(),
            acceptance_rate: chain.acceptance_rate(),
            iat,
            stagnated: chain.stagnated,
        })
    }
}

enum Move {
    Walk,
    Traverse,
    Blow,
    Hop,
}

fn pick_move(u: f64) -> Move {
    if u < PROB_WALK {
        Move::Walk
    } else if u < PROB_WALK + PROB_TRAVERSE {
        Move::Traverse
    } else if u < PROB_WALK + PROB_TRAVERSE + PROB_BLOW {
        Move::Blow
    } else {
        Move::Hop
    }
}

/// Coordinate subset for a move: each coordinate participates with
/// probability `min(dim, 4)/dim`.
fn pick_subset<R: Rng>(rng: &mut R, dim: usize, phi: &mut [bool]) -> usize {
    let p = (EXPECTED_MOVED_COORDS.min(dim as f64)) / dim as f64;
    let mut n = 0;
    for slot in phi.iter_mut() {
        *slot = rng.random::<f64>() < p;
        n += *slot as usize;
    }
    n
}

/// Walk-move multiplier with density proportional to 1/sqrt(1 + z) on
/// [-a/(1+a), a], via its inverse CDF.
fn sim_walk_mult<R: Rng>(rng: &mut R) -> f64 {
    let a = WALK_SHAPE;
    let u = rng.random::<f64>();
    (a / (1.0 + a)) * (a * u * u + 2.0 * u - 1.0)
}

/// Traverse-move scale: beta < 1 with probability (a-1)/(2a), else beta > 1,
/// with matching power-law densities on either side of 1.
fn sim_traverse_scale<R: Rng>(rng: &mut R) -> f64 {
    let a = TRAVERSE_SHAPE;
    if rng.random::<f64>() < (a - 1.0) / (2.0 * a) {
        rng.random::<f64>().powf(1.0 / (a + 1.0))
    } else {
        rng.random::<f64>().powf(1.0 / (1.0 - a))
    }
}

/// Negative log-density of a diagonal Gaussian over the selected subset.
fn neg_log_gauss(sq_sum: f64, n_moved: usize, sigma: f64) -> f64 {
    let n = n_moved as f64;
    0.5 * n * LN_2PI + n * sigma.ln() + sq_sum / (2.0 * sigma * sigma)
}

fn max_abs_sep(cur: &[f64], other: &[f64], phi: &[bool]) -> f64 {
    let mut m = 0.0f64;
    for i in 0..cur.len() {
        if phi[i] {
            m = m.max((other[i] - cur[i]).abs());
        }
    }
    m
}

/// Run one chain of the two-point kernel over an arbitrary-dimension target.
/// The first point of the pair is recorded at every post-burn-in iteration.
pub fn run_chain<F>(target: F, cfg: &SamplerConfig) -> Result<Chain>
where
    F: Fn(&[f64]) -> f64,
{
    cfg.validate()?;
    let dim = cfg.init.0.len();
    let mut x = cfg.init.0.clone();
    let mut xp = cfg.init.1.clone();
    let mut fx = target(&x);
    let mut fxp = target(&xp);
    if !fx.is_finite() || !fxp.is_finite() {
        return Err(Error::InvalidSamplerConfig(
            "both init points must have finite target log-density".into(),
        ));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let n_keep = (cfg.n_iterations - cfg.burn_in) / cfg.thin;
    let mut draws = Vec::with_capacity(n_keep * dim);
    let mut logpost = Vec::with_capacity(n_keep);
    let mut accepted = 0usize;
    let mut window_accepted = 0usize;
    let mut stagnated = false;

    let mut phi = vec![false; dim];
    let mut y = vec![0.0; dim];

    for it in 0..cfg.n_iterations {
        let mv = pick_move(rng.random::<f64>());
        let move_first = rng.random::<f64>() < 0.5;
        let (cur, other, fcur) = if move_first {
            (&x, &xp, fx)
        } else {
            (&xp, &x, fxp)
        };

        let n_moved = pick_subset(&mut rng, dim, &mut phi);
        y.copy_from_slice(cur);

        // log of the proposal-density ratio q(cur|y)/q(y|cur); zero for the
        // symmetric-by-construction walk move.
        let mut log_q_ratio = 0.0;
        let mut noop = false;
        match mv {
            Move::Walk => {
                for i in 0..dim {
                    if phi[i] {
                        let z = sim_walk_mult(&mut rng);
                        y[i] = cur[i] + z * (cur[i] - other[i]);
                    }
                }
                noop = n_moved == 0;
            }
            Move::Traverse => {
                if n_moved == 0 {
                    noop = true;
                } else {
                    let beta = sim_traverse_scale(&mut rng);
                    for i in 0..dim {
                        if phi[i] {
                            y[i] = other[i] + beta * (other[i] - cur[i]);
                        }
                    }
                    log_q_ratio = (n_moved as f64 - 2.0) * beta.ln();
                }
            }
            Move::Blow => {
                if n_moved == 0 {
                    noop = true;
                } else {
                    // Jump into a Gaussian ball around the other point,
                    // scaled by the current separation.
                    let sigma_fwd = max_abs_sep(cur, other, &phi);
                    let mut fwd_sq = 0.0;
                    let mut rev_sq = 0.0;
                    for i in 0..dim {
                        if phi[i] {
                            let z: f64 = StandardNormal.sample(&mut rng);
                            y[i] = other[i] + sigma_fwd * z;
                            fwd_sq += (y[i] - other[i]) * (y[i] - other[i]);
                            rev_sq += (cur[i] - other[i]) * (cur[i] - other[i]);
                        }
                    }
                    let sigma_rev = max_abs_sep(&y, other, &phi);
                    if sigma_fwd == 0.0 || sigma_rev == 0.0 {
                        noop = true; // degenerate pair, reject below
                        log_q_ratio = f64::NEG_INFINITY;
                    } else {
                        let w_fwd = neg_log_gauss(fwd_sq, n_moved, sigma_fwd);
                        let w_rev = neg_log_gauss(rev_sq, n_moved, sigma_rev);
                        log_q_ratio = w_fwd - w_rev;
                    }
                }
            }
            Move::Hop => {
                if n_moved == 0 {
                    noop = true;
                } else {
                    // Local jump around the current point at a third of the
                    // pair separation.
                    let sigma_fwd = max_abs_sep(cur, other, &phi) / 3.0;
                    let mut fwd_sq = 0.0;
                    for i in 0..dim {
                        if phi[i] {
                            let z: f64 = StandardNormal.sample(&mut rng);
                            y[i] = cur[i] + sigma_fwd * z;
                            fwd_sq += (y[i] - cur[i]) * (y[i] - cur[i]);
                        }
                    }
                    let sigma_rev = max_abs_sep(&y, other, &phi) / 3.0;
                    if sigma_fwd == 0.0 || sigma_rev == 0.0 {
                        noop = true;
                        log_q_ratio = f64::NEG_INFINITY;
                    } else {
                        let w_fwd = neg_log_gauss(fwd_sq, n_moved, sigma_fwd);
                        let w_rev = neg_log_gauss(fwd_sq, n_moved, sigma_rev);
                        log_q_ratio = w_fwd - w_rev;
                    }
                }
            }
        }

        let mut accept = false;
        if noop && log_q_ratio == 0.0 {
            // Empty coordinate subset: proposal equals the current point.
            accept = true;
        } else if !noop {
            // The pair must stay distinct in every coordinate or later
            // separation-scaled moves degenerate.
            let distinct = y.iter().zip(other.iter()).all(|(a, b)| a != b);
            if distinct {
                let fy = target(&y);
                let log_alpha = (fy - fcur) + log_q_ratio;
                if fy > f64::NEG_INFINITY
                    && (log_alpha >= 0.0 || rng.random::<f64>().ln() < log_alpha)
                {
                    accept = true;
                    if move_first {
                        x.copy_from_slice(&y);
                        fx = fy;
                    } else {
                        xp.copy_from_slice(&y);
                        fxp = fy;
                    }
                }
            }
        }
        if accept {
            accepted += 1;
            window_accepted += 1;
        }

        if (it + 1) % STAGNATION_WINDOW == 0 {
            if window_accepted < STAGNATION_WINDOW / 100 {
                stagnated = true;
            }
            window_accepted = 0;
        }

        if it >= cfg.burn_in && (it - cfg.burn_in).is_multiple_of(cfg.thin) {
            draws.extend_from_slice(&x);
            logpost.push(fx);
        }
    }

    Ok(Chain {
        dim,
        draws,
        logpost,
        accepted,
        n_iterations: cfg.n_iterations,
        stagnated,
    })
}

/// Run the kernel on a 4-dimensional target and package the kept draws with
/// diagnostics.
pub fn run<F>(target: F, cfg: &SamplerConfig) -> Result<PosteriorSample>
where
    F: Fn(&[f64]) -> f64,
{
    if cfg.init.0.len() != 4 {
        return Err(Error::InvalidSamplerConfig(format!(
            "expected 4-dimensional init points, got {}",
            cfg.init.0.len()
        )));
    }
    let chain = run_chain(target, cfg)?;
    PosteriorSample::from_chain(&chain)
}

/// Draw two distinct in-support start points from the prior, both with
/// finite target density. Bounded retries; exhaustion signals that the data
/// and model are incompatible.
pub fn init_points_from_prior<F>(
    prior: &PriorSpec,
    target: F,
    seed: u64,
) -> Result<([f64; 4], [f64; 4])>
where
    F: Fn(&[f64]) -> f64,
{
    const MAX_ATTEMPTS: usize = 200;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut found: Option<[f64; 4]> = None;
    for _ in 0..MAX_ATTEMPTS {
        let draw = prior.sample(&mut rng);
        if !target(&draw).is_finite() {
            continue;
        }
        match found {
            None => found = Some(draw),
            Some(first) => {
                if first.iter().zip(&draw).all(|(a, b)| a != b) {
                    return Ok((first, draw));
                }
            }
        }
    }
    Err(Error::InitSearchExhausted {
        attempts: MAX_ATTEMPTS,
    })
}

/// Chain summary: acceptance rate, per-coordinate autocorrelation time and
/// effective sample size.
#[derive(Debug, Clone)]
pub struct Diagnostics {
    pub acceptance_rate: f64,
    pub iat: [f64; 4],
    pub ess: [f64; 4],
}

/// Requires at least 100 kept draws.
pub fn diagnostics(sample: &PosteriorSample) -> Result<Diagnostics> {
    let n = sample.n_kept();
    if n < 100 {
        return Err(Error::InsufficientDraws { needed: 100, got: n });
    }
    let mut ess = [0.0; 4];
    for (j, slot) in ess.iter_mut().enumerate() {
        *slot = n as f64 / sample.iat[j];
    }
    Ok(Diagnostics {
        acceptance_rate: sample.acceptance_rate,
        iat: sample.iat,
        ess,
    })
}

/// Integrated autocorrelation time with the self-consistent window
/// `M >= 6 * tau`. Returns at least 1; a zero-variance (constant) series
/// yields `f64::INFINITY` as the divergence sentinel.
pub fn integrated_autocorr_time(series: &[f64]) -> f64 {
    let n = series.len();
    if n < 2 {
        return 1.0;
    }
    let nf = n as f64;
    let mean = series.iter().sum::<f64>() / nf;
    let c0 = series.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / nf;
    if !c0.is_finite() || c0 <= 0.0 {
        return f64::INFINITY;
    }
    let mut tau = 1.0;
    let max_lag = n / 3;
    for k in 1..=max_lag {
        let mut ck = 0.0;
        for i in 0..n - k {
            ck += (series[i] - mean) * (series[i + k] - mean);
        }
        ck /= nf;
        tau += 2.0 * ck / c0;
        if (k as f64) >= 6.0 * tau {
            break;
        }
    }
    tau.max(1.0)
}

/// Split one master seed into independent named streams.
pub(crate) fn derive_seed(master: u64, stream: u64) -> u64 {
    let mut z = master ^ (stream.wrapping_add(1)).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Chain length settings for a fit; initial points come from the prior.
#[derive(Debug, Clone, Copy)]
pub struct FitSettings {
    pub n_iterations: usize,
    pub burn_in: usize,
    pub seed: u64,
}

impl Default for FitSettings {
    fn default() -> Self {
        Self {
            n_iterations: DEFAULT_ITERATIONS,
            burn_in: DEFAULT_BURN_IN,
            seed: DEFAULT_SEED,
        }
    }
}

/// Full fit: build the log-posterior for the observations, find start
/// points from the prior, and run the chain.
pub fn fit(
    obs: &crate::inference::ObservationSet,
    fs: &crate::model::FixedSettings,
    prior: &PriorSpec,
    settings: &FitSettings,
) -> Result<PosteriorSample> {
    fit_signed(obs, fs, prior, settings, 1.0)
}

pub(crate) fn fit_signed(
    obs: &crate::inference::ObservationSet,
    fs: &crate::model::FixedSettings,
    prior: &PriorSpec,
    settings: &FitSettings,
    sign: f64,
) -> Result<PosteriorSample> {
    let target = |v: &[f64]| {
        crate::inference::log_posterior_signed(&[v[0], v[1], v[2], v[3]], fs, obs, prior, sign)
    };
    let (a, b) = init_points_from_prior(prior, target, derive_seed(settings.seed, 0))?;
    let cfg = SamplerConfig::new(
        settings.n_iterations,
        settings.burn_in,
        derive_seed(settings.seed, 1),
        (a.to_vec(), b.to_vec()),
    );
    run(target, &cfg)
}
