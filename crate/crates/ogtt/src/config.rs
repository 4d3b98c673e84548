//! Flat `key = value` run configuration.
//!
//! Lines are `key = value`, `#` starts a comment, blank lines are ignored.
//! Unknown and duplicate keys are hard errors. Every override is validated
//! against the underlying type's invariants before a run starts.

use std::path::{Path, PathBuf};

use crate::analysis::Theta0Cutoffs;
use crate::error::{Error, Result};
use crate::inference::{GammaPrior, PriorSpec, TruncatedGammaPrior, TruncatedNormalPrior};
use crate::model::{FixedSettings, DEFAULT_GRID_STEP, THETA2_MAX, THETA2_MIN};
use crate::sampler::{FitSettings, DEFAULT_BURN_IN, DEFAULT_ITERATIONS, DEFAULT_SEED};

/// Analysis-stage knobs for the fit pipeline.
#[derive(Debug, Clone, Copy)]
pub struct AnalysisSettings {
    pub horizon: f64,
    pub grid_step: f64,
    pub max_curves: usize,
    pub g3h_threshold: f64,
    pub cutoffs: Theta0Cutoffs,
}

impl Default for AnalysisSettings {
    fn default() -> Self {
        Self {
            horizon: 3.0,
            grid_step: DEFAULT_GRID_STEP,
            max_curves: 400,
            g3h_threshold: crate::analysis::DEFAULT_G3_THRESHOLD,
            cutoffs: Theta0Cutoffs::default(),
        }
    }
}

const KNOWN_KEYS: &[&str] = &[
    "a",
    "b",
    "c",
    "gb",
    "v0",
    "sigma",
    "theta0_shape",
    "theta0_rate",
    "theta1_shape",
    "theta1_rate",
    "theta2_shape",
    "theta2_rate",
    "theta2_lo",
    "theta2_hi",
    "g0_center",
    "g0_sd",
    "iterations",
    "burn_in",
    "seed",
    "horizon",
    "grid_step",
    "max_curves",
    "g3h_threshold",
    "theta0_low",
    "theta0_high",
    "out_dir",
];

/// Parsed configuration; unset keys fall back to defaults at build time.
#[derive(Debug, Clone, Default)]
pub struct RunConfig {
    source: PathBuf,
    a: Option<f64>,
    b: Option<f64>,
    c: Option<f64>,
    gb: Option<f64>,
    v0: Option<f64>,
    sigma: Option<f64>,
    theta0_shape: Option<f64>,
    theta0_rate: Option<f64>,
    theta1_shape: Option<f64>,
    theta1_rate: Option<f64>,
    theta2_shape: Option<f64>,
    theta2_rate: Option<f64>,
    theta2_lo: Option<f64>,
    theta2_hi: Option<f64>,
    g0_center: Option<f64>,
    g0_sd: Option<f64>,
    iterations: Option<usize>,
    burn_in: Option<usize>,
    seed: Option<u64>,
    horizon: Option<f64>,
    grid_step: Option<f64>,
    max_curves: Option<usize>,
    g3h_threshold: Option<f64>,
    theta0_low: Option<f64>,
    theta0_high: Option<f64>,
    out_dir: Option<String>,
}

impl RunConfig {
    pub fn parse_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::ReadFile {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?;
        Self::parse_str(&text, path)
    }

    pub fn parse_str(text: &str, source: &Path) -> Result<Self> {
        let mut cfg = Self {
            source: source.to_path_buf(),
            ..Self::default()
        };
        let mut seen: Vec<String> = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = match raw.find('#') {
                Some(pos) => &raw[..pos],
                None => raw,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(cfg.line_err(line_no, format!("expected `key = value`, got `{raw}`")));
            };
            let key = key.trim();
            let value = value.trim();
            if !KNOWN_KEYS.contains(&key) {
                return Err(cfg.line_err(line_no, format!("unknown key `{key}`")));
            }
            if seen.iter().any(|k| k == key) {
                return Err(cfg.line_err(line_no, format!("duplicate key `{key}`")));
            }
            seen.push(key.to_string());
            cfg.assign(key, value, line_no)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn line_err(&self, line: usize, reason: String) -> Error {
        Error::Config {
            path: self.source.clone(),
            line,
            reason,
        }
    }

    fn assign(&mut self, key: &str, value: &str, line: usize) -> Result<()> {
        macro_rules! num {
            ($slot:ident, $ty:ty) => {{
                let parsed = value.parse::<$ty>().map_err(|_| {
                    self.line_err(line, format!("`{key}` needs a number, got `{value}`"))
                })?;
                self.$slot = Some(parsed);
            }};
        }
        match key {
            "a" => num!(a, f64),
            "b" => num!(b, f64),
            "c" => num!(c, f64),
            "gb" => num!(gb, f64),
            "v0" => num!(v0, f64),
            "sigma" => num!(sigma, f64),
            "theta0_shape" => num!(theta0_shape, f64),
            "theta0_rate" => num!(theta0_rate, f64),
            "theta1_shape" => num!(theta1_shape, f64),
            "theta1_rate" => num!(theta1_rate, f64),
            "theta2_shape" => num!(theta2_shape, f64),
            "theta2_rate" => num!(theta2_rate, f64),
            "theta2_lo" => num!(theta2_lo, f64),
            "theta2_hi" => num!(theta2_hi, f64),
            "g0_center" => num!(g0_center, f64),
            "g0_sd" => num!(g0_sd, f64),
            "iterations" => num!(iterations, usize),
            "burn_in" => num!(burn_in, usize),
            "seed" => num!(seed, u64),
            "horizon" => num!(horizon, f64),
            "grid_step" => num!(grid_step, f64),
            "max_curves" => num!(max_curves, usize),
            "g3h_threshold" => num!(g3h_threshold, f64),
            "theta0_low" => num!(theta0_low, f64),
            "theta0_high" => num!(theta0_high, f64),
            "out_dir" => self.out_dir = Some(value.to_string()),
            _ => unreachable!("key membership checked"),
        }
        Ok(())
    }

    /// Check every override against its type's invariants. Uses a
    /// placeholder anchor for the g0 prior when none is configured, since
    /// the real anchor (the fasting reading) is data-dependent.
    pub fn validate(&self) -> Result<()> {
        self.fixed_settings()?;
        self.prior_spec(self.g0_center.unwrap_or(100.0))?;
        self.fit_settings(None)?;
        self.analysis_settings()?;
        Ok(())
    }

    pub fn fixed_settings(&self) -> Result<FixedSettings> {
        let d = FixedSettings::default();
        let fs = FixedSettings {
            a: self.a.unwrap_or(d.a),
            b: self.b.unwrap_or(d.b),
            c: self.c.unwrap_or(d.c),
            gb: self.gb.unwrap_or(d.gb),
            v0: self.v0.unwrap_or(d.v0),
            sigma: self.sigma.unwrap_or(d.sigma),
        };
        fs.validate()?;
        Ok(fs)
    }

    /// Build the prior, anchoring the g0 prior at `d0` unless `g0_center`
    /// overrides it.
    pub fn prior_spec(&self, d0: f64) -> Result<PriorSpec> {
        let lo = self.theta2_lo.unwrap_or(THETA2_MIN);
        let hi = self.theta2_hi.unwrap_or(THETA2_MAX);
        if lo < THETA2_MIN || hi > THETA2_MAX {
            return Err(Error::ConfigValue {
                path: self.source.clone(),
                reason: format!(
                    "theta2 truncation [{lo}, {hi}] must stay within [{THETA2_MIN}, {THETA2_MAX}]"
                ),
            });
        }
        let fs = self.fixed_settings()?;
        if lo <= fs.c / 2.0 {
            return Err(Error::ConfigValue {
                path: self.source.clone(),
                reason: format!(
                    "theta2_lo = {lo} must exceed c/2 = {} or the digestive solution degenerates",
                    fs.c / 2.0
                ),
            });
        }
        Ok(PriorSpec {
            theta0: GammaPrior::new(
                self.theta0_shape.unwrap_or(2.0),
                self.theta0_rate.unwrap_or(0.25),
            )?,
            theta1: GammaPrior::new(
                self.theta1_shape.unwrap_or(2.0),
                self.theta1_rate.unwrap_or(0.25),
            )?,
            theta2: TruncatedGammaPrior::new(
                self.theta2_shape.unwrap_or(10.0),
                self.theta2_rate.unwrap_or(20.0),
                lo,
                hi,
            )?,
            g0: TruncatedNormalPrior::new(
                self.g0_center.unwrap_or(d0),
                self.g0_sd.unwrap_or(crate::inference::DEFAULT_G0_PRIOR_SD),
            )?,
        })
    }

    /// Run-length settings; `seed_override` (a CLI flag) wins over the file.
    pub fn fit_settings(&self, seed_override: Option<u64>) -> Result<FitSettings> {
        let s = FitSettings {
            n_iterations: self.iterations.unwrap_or(DEFAULT_ITERATIONS),
            burn_in: self.burn_in.unwrap_or(DEFAULT_BURN_IN),
            seed: seed_override.unwrap_or(self.seed.unwrap_or(DEFAULT_SEED)),
        };
        if s.n_iterations <= s.burn_in {
            return Err(Error::ConfigValue {
                path: self.source.clone(),
                reason: format!(
                    "iterations ({}) must exceed burn_in ({})",
                    s.n_iterations, s.burn_in
                ),
            });
        }
        Ok(s)
    }

    pub fn analysis_settings(&self) -> Result<AnalysisSettings> {
        let d = AnalysisSettings::default();
        let s = AnalysisSettings {
            horizon: self.horizon.unwrap_or(d.horizon),
            grid_step: self.grid_step.unwrap_or(d.grid_step),
            max_curves: self.max_curves.unwrap_or(d.max_curves),
            g3h_threshold: self.g3h_threshold.unwrap_or(d.g3h_threshold),
            cutoffs: Theta0Cutoffs {
                low: self.theta0_low.unwrap_or(d.cutoffs.low),
                high: self.theta0_high.unwrap_or(d.cutoffs.high),
            },
        };
        if !(s.horizon > 0.0 && s.grid_step > 0.0 && s.max_curves > 0) {
            return Err(Error::ConfigValue {
                path: self.source.clone(),
                reason: "horizon, grid_step and max_curves must be positive".into(),
            });
        }
        s.cutoffs.validate()?;
        Ok(s)
    }

    pub fn out_dir(&self) -> Option<&str> {
        self.out_dir.as_deref()
    }

    /// Whether the file set an explicit chain length (the experiment
    /// subcommands pick shorter per-replicate defaults otherwise).
    pub fn iterations_is_set(&self) -> bool {
        self.iterations.is_some()
    }
}
