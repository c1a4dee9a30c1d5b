//! Flat `key=value` experiment configuration.
//!
//! Blank lines and lines starting with `#` are ignored. Unknown keys are an
//! error. Every key has a default; `lambda` and `tau` default per prior and
//! sampler, `sigma_dual = 0` means `1 / (tau L^2)`.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use pixbound::conformal::{BinScale, BinningParams, Pooling};
use pixbound::priors::{DiffOperator, FoESpec, HuberParams, DIFF_NORM_SQ_BOUND};
use pixbound::samplers::{ChainSettings, Sampler, UlaConfig, UlpdaConfig};
use pixbound::toy1d::MixtureSpec;
use pixbound::Prior;
use sha2::{Digest, Sha256};

use crate::error::{io_error, CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PriorKind {
    Tv,
    HuberTv,
    Foe,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SamplerKind {
    Ula,
    Ulpda,
    Pula,
}

impl fmt::Display for PriorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PriorKind::Tv => "tv",
            PriorKind::HuberTv => "huber_tv",
            PriorKind::Foe => "foe",
        })
    }
}

impl FromStr for PriorKind {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tv" => Ok(PriorKind::Tv),
            "huber_tv" => Ok(PriorKind::HuberTv),
            "foe" => Ok(PriorKind::Foe),
            _ => Err(CliError::config(format!("unknown prior '{s}' (tv, huber_tv, foe)"))),
        }
    }
}

impl fmt::Display for SamplerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SamplerKind::Ula => "ula",
            SamplerKind::Ulpda => "ulpda",
            SamplerKind::Pula => "pula",
        })
    }
}

impl FromStr for SamplerKind {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ula" => Ok(SamplerKind::Ula),
            "ulpda" => Ok(SamplerKind::Ulpda),
            "pula" => Ok(SamplerKind::Pula),
            _ => Err(CliError::config(format!("unknown sampler '{s}' (ula, ulpda, pula)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub prior: PriorKind,
    pub sampler: SamplerKind,
    pub noise_sigma: f64,
    lambda: Option<f64>,
    pub huber_delta: f64,
    /// FoE kernel CSV; the built-in 3x3 DCT bank when unset.
    pub foe_kernels: Option<PathBuf>,
    tau: Option<f64>,
    pub sigma_dual: f64,
    pub theta: f64,
    pub iterations: usize,
    pub burn_in: usize,
    pub thinning: usize,
    /// Chain diagnostics every this many iterations; 0 disables them.
    pub diagnostics_every: usize,

    pub q: Vec<f64>,
    pub bins: usize,
    pub bin_scale: BinScale,
    pub ess_sup: f64,
    pub pooling: Pooling,
    pub seed: u64,
    /// Side of the centred square crop taken by `corrupt`; 0 keeps the image.
    pub crop: usize,

    pub labels: usize,
    pub bp_iterations: usize,
    pub bp_damping: f64,
    pub checkpoints: usize,
    pub checkpoint_factor: usize,
    pub thinning_list: Vec<usize>,
    /// Write one grid per label plus a marginal CSV of `marginal_row`.
    pub export_marginals: bool,
    pub marginal_row: usize,

    pub toy_centers: Vec<f64>,
    pub toy_sigma_x: f64,
    pub toy_weights: Vec<f64>,
    pub toy_sigma_z: f64,
    pub toy_m: usize,
    pub toy_n: usize,
    pub toy_density_points: usize,

    pub clean_dir: PathBuf,
    pub noisy_dir: PathBuf,
    pub table_dir: PathBuf,
    pub prediction_dir: PathBuf,
    /// Image for the BP studies; the first image of `clean_dir` when unset.
    pub bp_image: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            prior: PriorKind::Tv,
            sampler: SamplerKind::Ulpda,
            noise_sigma: 15.0 / 255.0,
            lambda: None,
            huber_delta: 0.01,
            foe_kernels: None,
            tau: None,
            sigma_dual: 0.0,
            theta: 1.0,
            iterations: 20_000,
            burn_in: 0,
            thinning: 1,
            diagnostics_every: 0,
            q: vec![0.85, 0.9, 0.95],
            bins: pixbound::conformal::DEFAULT_INTERIOR_BINS,
            bin_scale: BinScale::Logarithmic,
            ess_sup: pixbound::conformal::DEFAULT_ESS_SUP,
            pooling: Pooling::Joint,
            seed: 0,
            crop: 64,
            labels: 256,
            bp_iterations: 10,
            bp_damping: 0.0,
            checkpoints: 6,
            checkpoint_factor: 4,
            thinning_list: vec![1, 5, 10],
            export_marginals: false,
            marginal_row: 0,
            toy_centers: vec![-1.0, 0.0, 1.0],
            toy_sigma_x: 0.05,
            toy_weights: vec![1.0 / 3.0; 3],
            toy_sigma_z: 0.3,
            toy_m: 200_000,
            toy_n: 10_000,
            toy_density_points: 64,
            clean_dir: PathBuf::from("data/clean"),
            noisy_dir: PathBuf::from("data/noisy"),
            table_dir: PathBuf::from("out"),
            prediction_dir: PathBuf::from("out"),
            bp_image: None,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| CliError::config(format!("cannot parse {key} = '{value}'")))
}

fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    value
        .split(',')
        .map(str::trim)
        .filter(|v| !v.is_empty())
        .map(|v| parse(key, v))
        .collect()
}

fn join<T: fmt::Display>(values: &[T]) -> String {
    values.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",")
}

fn optional_path(value: &str) -> Option<PathBuf> {
    (!value.is_empty()).then(|| PathBuf::from(value))
}

impl ExperimentConfig {
    pub fn from_text(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| CliError::config(format!("line {}: expected key=value", n + 1)))?;
            cfg.set(key.trim(), value.trim())?;
        }
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| io_error(path, e))?;
        Self::from_text(&text)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "prior" => self.prior = value.parse()?,
            "sampler" => self.sampler = value.parse()?,
            "noise_sigma" => self.noise_sigma = parse(key, value)?,
            "lambda" => self.lambda = Some(parse(key, value)?),
            "huber_delta" => self.huber_delta = parse(key, value)?,
            "foe_kernels" => self.foe_kernels = optional_path(value),
            "tau" => self.tau = Some(parse(key, value)?),
            "sigma_dual" => self.sigma_dual = parse(key, value)?,
            "theta" => self.theta = parse(key, value)?,
            "iterations" => self.iterations = parse(key, value)?,
            "burn_in" => self.burn_in = parse(key, value)?,
            "thinning" => self.thinning = parse(key, value)?,
            "diagnostics_every" => self.diagnostics_every = parse(key, value)?,
            "q" => self.q = parse_list(key, value)?,
            "bins" => self.bins = parse(key, value)?,
            "bin_scale" => self.bin_scale = value.parse().map_err(CliError::Core)?,
            "ess_sup" => self.ess_sup = parse(key, value)?,
            "pooling" => self.pooling = value.parse().map_err(CliError::Core)?,
            "seed" => self.seed = parse(key, value)?,
            "crop" => self.crop = parse(key, value)?,
            "labels" => self.labels = parse(key, value)?,
            "bp_iterations" => self.bp_iterations = parse(key, value)?,
            "bp_damping" => self.bp_damping = parse(key, value)?,
            "checkpoints" => self.checkpoints = parse(key, value)?,
            "checkpoint_factor" => self.checkpoint_factor = parse(key, value)?,
            "thinning_list" => self.thinning_list = parse_list(key, value)?,
            "export_marginals" => self.export_marginals = parse(key, value)?,
            "marginal_row" => self.marginal_row = parse(key, value)?,
            "toy_centers" => self.toy_centers = parse_list(key, value)?,
            "toy_sigma_x" => self.toy_sigma_x = parse(key, value)?,
            "toy_weights" => self.toy_weights = parse_list(key, value)?,
            "toy_sigma_z" => self.toy_sigma_z = parse(key, value)?,
            "toy_m" => self.toy_m = parse(key, value)?,
            "toy_n" => self.toy_n = parse(key, value)?,
            "toy_density_points" => self.toy_density_points = parse(key, value)?,
            "clean_dir" => self.clean_dir = PathBuf::from(value),
            "noisy_dir" => self.noisy_dir = PathBuf::from(value),
            "table_dir" => self.table_dir = PathBuf::from(value),
            "prediction_dir" => self.prediction_dir = PathBuf::from(value),
            "bp_image" => self.bp_image = optional_path(value),
            _ => return Err(CliError::config(format!("unknown key '{key}'"))),
        }
        Ok(())
    }

    /// Prior weight parameter; FoE defaults to 0.125, the TV variants to 0.06.
    pub fn lambda(&self) -> f64 {
        self.lambda.unwrap_or(match self.prior {
            PriorKind::Foe => 0.125,
            PriorKind::Tv | PriorKind::HuberTv => 0.06,
        })
    }

    /// Primal step; 5e-5 for the primal-dual chain, 1e-4 otherwise.
    pub fn tau(&self) -> f64 {
        self.tau.unwrap_or(match self.sampler {
            SamplerKind::Ulpda => 5e-5,
            SamplerKind::Ula | SamplerKind::Pula => 1e-4,
        })
    }

    pub fn dual_step(&self) -> f64 {
        if self.sigma_dual > 0.0 {
            self.sigma_dual
        } else {
            1.0 / (self.tau() * DIFF_NORM_SQ_BOUND)
        }
    }

    pub fn binning(&self) -> BinningParams {
        BinningParams {
            interior_bins: self.bins,
            scale: self.bin_scale,
        }
    }

    pub fn mixture(&self) -> Result<MixtureSpec> {
        let n = self.toy_centers.len();
        Ok(MixtureSpec::new(
            self.toy_centers.clone(),
            vec![self.toy_sigma_x * self.toy_sigma_x; n],
            self.toy_weights.clone(),
            self.toy_sigma_z * self.toy_sigma_z,
        )?)
    }

    pub fn build_prior(&self) -> Result<Prior> {
        Ok(match self.prior {
            PriorKind::Tv => Prior::Tv,
            PriorKind::HuberTv => Prior::HuberTv(HuberParams::new(self.huber_delta)?),
            PriorKind::Foe => Prior::Foe(match &self.foe_kernels {
                Some(path) => FoESpec::from_csv_file(path)?,
                None => FoESpec::dct3(),
            }),
        })
    }

    /// Sampler for one chain; `stream` separates the noise of different images.
    pub fn sampler(&self, stream: u64) -> Sampler {
        let chain = ChainSettings::new(self.iterations, self.seed)
            .with_burn_in(self.burn_in)
            .with_thinning(self.thinning)
            .with_stream(stream);
        match self.sampler {
            SamplerKind::Ula => Sampler::Ula(UlaConfig::new(self.tau(), chain)),
            SamplerKind::Pula => Sampler::ProxUla(UlaConfig::new(self.tau(), chain)),
            SamplerKind::Ulpda => Sampler::PrimalDual(UlpdaConfig::new(self.tau(), self.dual_step(), self.theta, chain)),
        }
    }

    /// Checks every setting, including sampler/prior compatibility and step
    /// bounds, without touching image data.
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(CliError::config(format!("{name} must be positive and finite, got {v}")))
            }
        };
        positive("noise_sigma", self.noise_sigma)?;
        positive("lambda", self.lambda())?;
        positive("tau", self.tau())?;
        positive("huber_delta", self.huber_delta)?;
        if !(self.sigma_dual >= 0.0 && self.sigma_dual.is_finite()) {
            return Err(CliError::config("sigma_dual must be nonnegative"));
        }
        if !(0.0..=1.0).contains(&self.theta) {
            return Err(CliError::config("theta must lie in [0, 1]"));
        }
        if self.q.is_empty() || self.q.iter().any(|q| !(*q > 0.0 && *q < 1.0)) {
            return Err(CliError::config("q levels must lie in (0, 1)"));
        }
        if self.bins == 0 {
            return Err(CliError::config("bins must be at least 1"));
        }
        if !(self.ess_sup > 0.0) {
            return Err(CliError::config("ess_sup must be positive"));
        }
        if self.labels < 2 || self.bp_iterations == 0 {
            return Err(CliError::config("BP needs at least 2 labels and 1 iteration"));
        }
        if !(0.0..1.0).contains(&self.bp_damping) {
            return Err(CliError::config("bp_damping must lie in [0, 1)"));
        }
        if self.checkpoints == 0 || self.checkpoint_factor < 2 {
            return Err(CliError::config("checkpoints >= 1 and checkpoint_factor >= 2 required"));
        }
        if self.thinning_list.is_empty() || self.thinning_list.contains(&0) {
            return Err(CliError::config("thinning_list entries must be at least 1"));
        }
        if self.toy_m < 100 || self.toy_n < 100 || self.toy_density_points < 2 {
            return Err(CliError::config("toy_m, toy_n >= 100 and toy_density_points >= 2 required"));
        }
        self.mixture()?;
        self.sampler(0).chain().validate()?;

        let prior = self.build_prior()?;
        let weight = 1.0 / self.lambda();
        let data_lip = 1.0 / (self.noise_sigma * self.noise_sigma);
        let tau = self.tau();
        match (self.sampler, &prior) {
            (SamplerKind::Ulpda, Prior::Tv) => {
                let bound = self.dual_step() * tau * DIFF_NORM_SQ_BOUND;
                if bound > 1.0 + 1e-12 {
                    return Err(CliError::config(format!("sigma_dual * tau * L^2 = {bound} exceeds 1")));
                }
            }
            (SamplerKind::Ulpda, _) => {
                return Err(CliError::config(format!("sampler ulpda requires prior tv, got {}", self.prior)))
            }
            (_, Prior::Tv) => {
                return Err(CliError::config(format!(
                    "sampler {} requires a differentiable prior, got tv",
                    self.sampler
                )))
            }
            (kind, prior) => {
                let prior_lip = match prior {
                    Prior::HuberTv(p) => p.gradient_lipschitz(&DiffOperator::new(1, 1)),
                    other => other.gradient_lipschitz().unwrap_or(0.0),
                };
                let lip = weight * prior_lip + if kind == SamplerKind::Ula { data_lip } else { 0.0 };
                if lip > 0.0 && tau >= 2.0 / lip {
                    return Err(CliError::config(format!("tau = {tau} must be below 2/L = {:e}", 2.0 / lip)));
                }
            }
        }
        Ok(())
    }

    /// Every resolved setting as sorted `key=value` lines. Output locations
    /// are left out so relocated runs share a hash.
    pub fn canonical(&self) -> String {
        let path = |p: &Option<PathBuf>| p.as_ref().map(|p| p.display().to_string()).unwrap_or_default();
        let entries: BTreeMap<&str, String> = [
            ("prior", self.prior.to_string()),
            ("sampler", self.sampler.to_string()),
            ("noise_sigma", self.noise_sigma.to_string()),
            ("lambda", self.lambda().to_string()),
            ("huber_delta", self.huber_delta.to_string()),
            ("foe_kernels", path(&self.foe_kernels)),
            ("tau", self.tau().to_string()),
            ("sigma_dual", self.dual_step().to_string()),
            ("theta", self.theta.to_string()),
            ("iterations", self.iterations.to_string()),
            ("burn_in", self.burn_in.to_string()),
            ("thinning", self.thinning.to_string()),
            ("diagnostics_every", self.diagnostics_every.to_string()),
            ("q", join(&self.q)),
            ("bins", self.bins.to_string()),
            ("bin_scale", self.bin_scale.to_string()),
            ("ess_sup", self.ess_sup.to_string()),
            ("pooling", self.pooling.to_string()),
            ("seed", self.seed.to_string()),
            ("crop", self.crop.to_string()),
            ("labels", self.labels.to_string()),
            ("bp_iterations", self.bp_iterations.to_string()),
            ("bp_damping", self.bp_damping.to_string()),
            ("checkpoints", self.checkpoints.to_string()),
            ("checkpoint_factor", self.checkpoint_factor.to_string()),
            ("thinning_list", join(&self.thinning_list)),
            ("export_marginals", self.export_marginals.to_string()),
            ("marginal_row", self.marginal_row.to_string()),
            ("toy_centers", join(&self.toy_centers)),
            ("toy_sigma_x", self.toy_sigma_x.to_string()),
            ("toy_weights", join(&self.toy_weights)),
            ("toy_sigma_z", self.toy_sigma_z.to_string()),
            ("toy_m", self.toy_m.to_string()),
            ("toy_n", self.toy_n.to_string()),
            ("toy_density_points", self.toy_density_points.to_string()),
            ("clean_dir", self.clean_dir.display().to_string()),
            ("noisy_dir", self.noisy_dir.display().to_string()),
            ("bp_image", path(&self.bp_image)),
        ]
        .into_iter()
        .collect();
        entries.iter().map(|(k, v)| format!("{k}={v}\n")).collect()
    }

    /// First 16 hex digits of the SHA-256 of [`canonical`](Self::canonical).
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.canonical().as_bytes());
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}
