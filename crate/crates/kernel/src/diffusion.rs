use rand::Rng;

use crate::denoiser::Denoiser;
use crate::schedule::NoiseSchedule;
use crate::tensor::Tensor5;
use crate::KernelError;

pub const DEFAULT_SAMPLING_STEPS: usize = 25;
pub const DEFAULT_GUIDANCE: f64 = 8.0;
pub const DEFAULT_NULL_RATIO: f64 = 0.1;

/// Closed-form forward noising: `sqrt(ab_t) * x0 + sqrt(1 - ab_t) * eps`.
pub fn q_sample(x0: &Tensor5, t: usize, eps: &Tensor5, schedule: &NoiseSchedule) -> Result<Tensor5, KernelError> {
    if t == 0 {
        return Err(KernelError::StepOutOfRange { t, max: schedule.steps() });
    }
    let ab = schedule.alpha_bar(t)?;
    let (a, b) = (ab.sqrt(), (1.0 - ab).sqrt());
    x0.zip_with(eps, |x, e| a * x + b * e)
}

/// Mean squared error over every element.
pub fn epsilon_loss(eps_pred: &Tensor5, eps: &Tensor5) -> Result<f64, KernelError> {
    eps_pred.check_same_shape(eps)?;
    if eps.is_empty() {
        return Ok(0.0);
    }
    let sum: f64 = eps_pred
        .data()
        .iter()
        .zip(eps.data())
        .map(|(p, e)| (p - e) * (p - e))
        .sum();
    Ok(sum / eps.len() as f64)
}

/// Classifier-free guidance: `uncond + scale * (cond - uncond)`.
pub fn cfg_combine(eps_uncond: &Tensor5, eps_cond: &Tensor5, scale: f64) -> Result<Tensor5, KernelError> {
    eps_uncond.zip_with(eps_cond, |u, c| u + scale * (c - u))
}

/// One deterministic DDIM update from step `t` to the earlier step `t_prev`.
///
/// `t_prev == t` returns `x_t` unchanged.
pub fn ddim_step(
    x_t: &Tensor5,
    eps_pred: &Tensor5,
    t: usize,
    t_prev: usize,
    schedule: &NoiseSchedule,
) -> Result<Tensor5, KernelError> {
    if t_prev > t {
        return Err(KernelError::StepOrderViolation { t, t_prev });
    }
    x_t.check_same_shape(eps_pred)?;
    schedule.check_step(t)?;
    if t_prev == t {
        return Ok(x_t.clone());
    }
    let ab_t = schedule.alpha_bar(t)?;
    let ab_prev = schedule.alpha_bar(t_prev)?;
    let (sa, sb) = (ab_t.sqrt(), (1.0 - ab_t).sqrt());
    let (pa, pb) = (ab_prev.sqrt(), (1.0 - ab_prev).sqrt());
    x_t.zip_with(eps_pred, |x, e| {
        let x0 = (x - sb * e) / sa;
        pa * x0 + pb * e
    })
}

/// Descending visit list `T, ..., 0` with `steps` updates between consecutive entries.
pub fn ddim_timesteps(train_steps: usize, steps: usize) -> Result<Vec<usize>, KernelError> {
    if steps == 0 || steps > train_steps {
        return Err(KernelError::InvalidRange(format!(
            "sampling steps must lie in 1..={train_steps}, got {steps}"
        )));
    }
    Ok((0..=steps).rev().map(|k| train_steps * k / steps).collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleOptions {
    pub steps: usize,
    /// Guidance scale; only used when a conditioning vector is supplied.
    pub guidance: f64,
}

impl Default for SampleOptions {
    fn default() -> Self {
        SampleOptions {
            steps: DEFAULT_SAMPLING_STEPS,
            guidance: DEFAULT_GUIDANCE,
        }
    }
}

/// Runs the full DDIM trajectory from `x_init` at step `T` down to step 0.
pub fn sample_ddim(
    denoiser: &dyn Denoiser,
    schedule: &NoiseSchedule,
    x_init: Tensor5,
    cond: Option<&[f64]>,
    options: SampleOptions,
) -> Result<Tensor5, KernelError> {
    let visits = ddim_timesteps(schedule.steps(), options.steps)?;
    let mut x = x_init;
    for pair in visits.windows(2) {
        let (t, t_prev) = (pair[0], pair[1]);
        let eps = match cond {
            Some(c) => {
                let uncond = denoiser.predict(&x, t, None)?;
                let conditioned = denoiser.predict(&x, t, Some(c))?;
                cfg_combine(&uncond, &conditioned, options.guidance)?
            }
            None => denoiser.predict(&x, t, None)?,
        };
        x = ddim_step(&x, &eps, t, t_prev, schedule)?;
    }
    Ok(x)
}

/// Per-example flags marking which conditioning inputs are dropped for training.
pub fn null_text_mask<R: Rng + ?Sized>(batch_size: usize, ratio: f64, rng: &mut R) -> Result<Vec<bool>, KernelError> {
    if !(0.0..=1.0).contains(&ratio) {
        return Err(KernelError::InvalidRange(format!("ratio must lie in [0, 1], got {ratio}")));
    }
    Ok((0..batch_size).map(|_| rng.random::<f64>() < ratio).collect())
}
