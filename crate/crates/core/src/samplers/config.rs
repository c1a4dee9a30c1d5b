use crate::error::{Error, Result};

/// Step-size schedule shared by all samplers.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum StepSchedule {
    /// `tau_k = tau` for every iteration.
    #[default]
    Constant,
    /// `tau_k = tau * h / (h + k)`: decays to zero with divergent sum.
    Harmonic { horizon: f64 },
}

impl StepSchedule {
    #[inline]
    pub fn factor(&self, k: usize) -> f64 {
        match *self {
            StepSchedule::Constant => 1.0,
            StepSchedule::Harmonic { horizon } => horizon / (horizon + k as f64),
        }
    }
}

/// Bookkeeping common to every chain: length, burn-in, thinning and noise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChainSettings {
    pub iterations: usize,
    pub burn_in: usize,
    /// Keep every `thinning`-th post-burn-in iterate.
    pub thinning: usize,
    pub seed: u64,
    /// Independent RNG stream, e.g. the index of the image being processed.
    pub stream: u64,
    /// Multiplier on the injected noise; `0` turns the chain into its
    /// deterministic optimizer.
    pub noise_scale: f64,
    pub schedule: StepSchedule,
}

impl ChainSettings {
    pub fn new(iterations: usize, seed: u64) -> Self {
        Self {
            iterations,
            burn_in: 0,
            thinning: 1,
            seed,
            stream: 0,
            noise_scale: 1.0,
            schedule: StepSchedule::Constant,
        }
    }

    pub fn with_burn_in(mut self, burn_in: usize) -> Self {
        self.burn_in = burn_in;
        self
    }

    pub fn with_thinning(mut self, thinning: usize) -> Self {
        self.thinning = thinning;
        self
    }

    pub fn with_stream(mut self, stream: u64) -> Self {
        self.stream = stream;
        self
    }

    pub fn with_noise_scale(mut self, noise_scale: f64) -> Self {
        self.noise_scale = noise_scale;
        self
    }

    pub fn with_schedule(mut self, schedule: StepSchedule) -> Self {
        self.schedule = schedule;
        self
    }

    /// Number of iterates that enter the statistics.
    pub fn sample_count(&self) -> usize {
        self.iterations.saturating_sub(self.burn_in) / self.thinning.max(1)
    }

    /// Whether iterate `k` (1-based) is recorded.
    #[inline]
    pub fn keeps(&self, k: usize) -> bool {
        k > self.burn_in && (k - self.burn_in).is_multiple_of(self.thinning)
    }

    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::config("iterations must be positive"));
        }
        if self.thinning == 0 {
            return Err(Error::config("thinning must be >= 1"));
        }
        if self.burn_in >= self.iterations {
            return Err(Error::config(format!(
                "burn-in {} must be smaller than iterations {}",
                self.burn_in, self.iterations
            )));
        }
        if !(self.noise_scale >= 0.0 && self.noise_scale.is_finite()) {
            return Err(Error::config("noise scale must be finite and >= 0"));
        }
        if let StepSchedule::Harmonic { horizon } = self.schedule {
            if !(horizon > 0.0 && horizon.is_finite()) {
                return Err(Error::config("schedule horizon must be > 0"));
            }
        }
        Ok(())
    }
}

/// Unadjusted Langevin settings (also used by the proximal variant).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UlaConfig {
    pub step: f64,
    pub chain: ChainSettings,
}

impl UlaConfig {
    pub fn new(step: f64, chain: ChainSettings) -> Self {
        Self { step, chain }
    }

    pub fn validate(&self) -> Result<()> {
        self.chain.validate()?;
        if !(self.step > 0.0 && self.step.is_finite()) {
            return Err(Error::config(format!("step must be > 0, got {}", self.step)));
        }
        Ok(())
    }
}

/// Primal-dual Langevin settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UlpdaConfig {
    /// Primal step.
    pub tau: f64,
    /// Dual step.
    pub sigma: f64,
    /// Dual extrapolation in `[0, 1]`.
    pub theta: f64,
    pub chain: ChainSettings,
}

impl UlpdaConfig {
    pub fn new(tau: f64, sigma: f64, theta: f64, chain: ChainSettings) -> Self {
        Self {
            tau,
            sigma,
            theta,
            chain,
        }
    }

    /// Dual step saturating `sigma * tau * L^2 <= 1`.
    pub fn with_max_dual_step(tau: f64, theta: f64, norm_sq: f64, chain: ChainSettings) -> Self {
        Self::new(tau, 1.0 / (tau * norm_sq), theta, chain)
    }

    pub fn validate(&self, norm_sq: f64) -> Result<()> {
        self.chain.validate()?;
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(Error::config(format!("tau must be > 0, got {}", self.tau)));
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(Error::config(format!("dual step must be > 0, got {}", self.sigma)));
        }
        if !(0.0..=1.0).contains(&self.theta) {
            return Err(Error::config(format!("theta must lie in [0, 1], got {}", self.theta)));
        }
        let product = self.sigma * self.tau * norm_sq;
        // relative slack so that sigma = 1/(tau L^2) passes despite rounding
        if product > 1.0 + 1e-12 {
            return Err(Error::config(format!(
                "step sizes violate sigma*tau*L^2 <= 1 (got {product})"
            )));
        }
        Ok(())
    }
}
