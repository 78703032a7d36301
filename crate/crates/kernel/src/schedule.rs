use crate::KernelError;

pub const DEFAULT_BETA_START: f64 = 8.5e-4;
pub const DEFAULT_BETA_END: f64 = 1.2e-2;
pub const DEFAULT_TRAIN_STEPS: usize = 1000;

/// Per-step noise variances and their cumulative products.
///
/// Steps are 1-based: `beta(t)` for `t` in `1..=T`. `alpha_bar(0)` is 1.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSchedule {
    betas: Vec<f64>,
    alphas: Vec<f64>,
    alpha_bars: Vec<f64>,
}

/// `T` betas spaced linearly from `beta_start` to `beta_end`, endpoints included.
pub fn linear_beta_schedule(steps: usize, beta_start: f64, beta_end: f64) -> Result<NoiseSchedule, KernelError> {
    if steps == 0 {
        return Err(KernelError::InvalidRange("need at least one step".into()));
    }
    if !(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0) {
        return Err(KernelError::InvalidRange(format!(
            "need 0 < beta_start <= beta_end < 1, got {beta_start}, {beta_end}"
        )));
    }
    let betas: Vec<f64> = if steps == 1 {
        vec![beta_start]
    } else {
        let last = (steps - 1) as f64;
        (0..steps)
            .map(|i| {
                let frac = i as f64 / last;
                beta_start * (1.0 - frac) + beta_end * frac
            })
            .collect()
    };
    NoiseSchedule::from_betas(betas)
}

impl NoiseSchedule {
    pub fn from_betas(betas: Vec<f64>) -> Result<Self, KernelError> {
        if betas.is_empty() || betas.iter().any(|&b| !(b > 0.0 && b < 1.0)) {
            return Err(KernelError::InvalidRange("every beta must lie in (0, 1)".into()));
        }
        let alphas: Vec<f64> = betas.iter().map(|b| 1.0 - b).collect();
        let alpha_bars = alphas
            .iter()
            .scan(1.0, |acc, a| {
                *acc *= a;
                Some(*acc)
            })
            .collect();
        Ok(NoiseSchedule {
            betas,
            alphas,
            alpha_bars,
        })
    }

    pub fn standard() -> Self {
        linear_beta_schedule(DEFAULT_TRAIN_STEPS, DEFAULT_BETA_START, DEFAULT_BETA_END)
            .expect("default schedule is valid")
    }

    pub fn steps(&self) -> usize {
        self.betas.len()
    }

    pub fn betas(&self) -> &[f64] {
        &self.betas
    }

    pub fn alphas(&self) -> &[f64] {
        &self.alphas
    }

    pub fn alpha_bars(&self) -> &[f64] {
        &self.alpha_bars
    }

    pub fn check_step(&self, t: usize) -> Result<(), KernelError> {
        if t > self.steps() {
            return Err(KernelError::StepOutOfRange { t, max: self.steps() });
        }
        Ok(())
    }

    pub fn beta(&self, t: usize) -> Result<f64, KernelError> {
        if t == 0 {
            return Err(KernelError::StepOutOfRange { t, max: self.steps() });
        }
        self.check_step(t)?;
        Ok(self.betas[t - 1])
    }

    /// Cumulative product up to step `t`; 1.0 at `t = 0`.
    pub fn alpha_bar(&self, t: usize) -> Result<f64, KernelError> {
        self.check_step(t)?;
        Ok(if t == 0 { 1.0 } else { self.alpha_bars[t - 1] })
    }
}
