//! Dynamic frame extraction.
//!
//! Videos with few detected transitions are sampled evenly across their full
//! span; videos with many get a random contiguous window. With probability
//! `1 - prob` the other strategy is used instead.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::media_io::VideoBuffer;
use crate::transition::TransitionReport;
use crate::util::fnv1a64;

pub const PLAN_SCHEMA: u32 = 1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SamplerError {
    #[error("window of {n} frames does not fit in {frame_count} frames")]
    WindowTooLarge { frame_count: usize, n: usize },
    #[error("invalid sampler parameters: {0}")]
    InvalidParams(String),
    #[error("report covers {boundaries} boundaries but video has {frame_count} frames")]
    ReportMismatch { boundaries: usize, frame_count: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplerParams {
    pub n_frames: usize,
    /// Transition count above which the random window is preferred.
    pub delta: usize,
    /// Probability of using the preferred strategy.
    pub prob: f64,
    pub seed: u64,
}

impl Default for SamplerParams {
    fn default() -> Self {
        SamplerParams {
            n_frames: 16,
            delta: 3,
            prob: 0.9,
            seed: 0,
        }
    }
}

impl SamplerParams {
    pub fn validate(&self) -> Result<(), SamplerError> {
        if self.n_frames == 0 {
            return Err(SamplerError::InvalidParams("n_frames must be >= 1".into()));
        }
        if !(0.0..=1.0).contains(&self.prob) {
            return Err(SamplerError::InvalidParams(format!(
                "prob must lie in [0, 1], got {}",
                self.prob
            )));
        }
        Ok(())
    }

    /// Per-video generator derived from the global seed and the source id.
    pub fn rng_for(&self, source_id: &str) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.seed ^ fnv1a64(source_id.as_bytes()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Uniform,
    Random,
}

impl Strategy {
    pub fn other(self) -> Strategy {
        match self {
            Strategy::Uniform => Strategy::Random,
            Strategy::Random => Strategy::Uniform,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SamplingPlan {
    pub schema: u32,
    pub source_id: String,
    pub strategy: Strategy,
    /// Whether the preferred strategy was used.
    pub honored: bool,
    pub indices: Vec<usize>,
}

/// Returns the strategy to use and whether it is the preferred one.
pub fn choose_strategy<R: Rng + ?Sized>(n_transitions: usize, params: &SamplerParams, rng: &mut R) -> (Strategy, bool) {
    let preferred = if n_transitions <= params.delta {
        Strategy::Uniform
    } else {
        Strategy::Random
    };
    let honored = rng.random::<f64>() < params.prob;
    if honored {
        (preferred, true)
    } else {
        (preferred.other(), false)
    }
}

/// `n` endpoint-inclusive, evenly spaced indices over `frame_count` frames.
///
/// Index `i` is `round(i * (F - 1) / (n - 1))`, computed in integers with
/// halves rounded up. When `F < n` indices repeat.
pub fn extract_uniform(frame_count: usize, n: usize) -> Vec<usize> {
    if n <= 1 {
        return vec![0; n];
    }
    let span = frame_count.saturating_sub(1) as u128;
    let steps = (n - 1) as u128;
    (0..n as u128)
        .map(|i| ((2 * i * span + steps) / (2 * steps)) as usize)
        .collect()
}

pub fn extract_random_window<R: Rng + ?Sized>(
    frame_count: usize,
    n: usize,
    rng: &mut R,
) -> Result<Vec<usize>, SamplerError> {
    if frame_count < n {
        return Err(SamplerError::WindowTooLarge { frame_count, n });
    }
    let start = rng.random_range(0..=frame_count - n);
    Ok((start..start + n).collect())
}

pub fn extract<R: Rng + ?Sized>(
    video: &VideoBuffer,
    report: &TransitionReport,
    params: &SamplerParams,
    rng: &mut R,
) -> Result<SamplingPlan, SamplerError> {
    params.validate()?;
    let frame_count = video.frame_count();
    if report.boundaries.len() + 1 != frame_count {
        return Err(SamplerError::ReportMismatch {
            boundaries: report.boundaries.len(),
            frame_count,
        });
    }
    plan_for(video.source_id(), frame_count, report.n_transitions(), params, rng)
}

/// [`extract`] on bare counts, for callers that already hold a report summary.
pub fn plan_for<R: Rng + ?Sized>(
    source_id: &str,
    frame_count: usize,
    n_transitions: usize,
    params: &SamplerParams,
    rng: &mut R,
) -> Result<SamplingPlan, SamplerError> {
    params.validate()?;
    let (strategy, honored) = choose_strategy(n_transitions, params, rng);
    let indices = match strategy {
        Strategy::Uniform => extract_uniform(frame_count, params.n_frames),
        Strategy::Random => extract_random_window(frame_count, params.n_frames, rng)?,
    };
    Ok(SamplingPlan {
        schema: PLAN_SCHEMA,
        source_id: source_id.to_string(),
        strategy,
        honored,
        indices,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::{any, prop_assert, prop_assert_eq, prop_assume, proptest};

    fn params(delta: usize, prob: f64) -> SamplerParams {
        SamplerParams {
            n_frames: 16,
            delta,
            prob,
            seed: 7,
        }
    }

    #[test]
    fn certain_branches() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            assert_eq!(choose_strategy(2, &params(3, 1.0), &mut rng), (Strategy::Uniform, true));
            assert_eq!(choose_strategy(5, &params(3, 1.0), &mut rng), (Strategy::Random, true));
            assert_eq!(choose_strategy(3, &params(3, 0.0), &mut rng), (Strategy::Random, false));
        }
    }

    #[test]
    fn branch_frequency_tracks_prob() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let p = params(3, 0.9);
        let draws = 100_000;
        let uniform = (0..draws)
            .filter(|_| choose_strategy(0, &p, &mut rng).0 == Strategy::Uniform)
            .count();
        let freq = uniform as f64 / draws as f64;
        assert!((freq - 0.9).abs() < 0.01, "frequency {freq}");
    }

    #[test]
    fn uniform_examples() {
        assert_eq!(extract_uniform(16, 16), (0..16).collect::<Vec<_>>());
        assert_eq!(extract_uniform(31, 16), (0..16).map(|i| 2 * i).collect::<Vec<_>>());
        assert_eq!(extract_uniform(5, 2), vec![0, 4]);
        assert_eq!(extract_uniform(9, 1), vec![0]);
        assert_eq!(extract_uniform(3, 5), vec![0, 1, 1, 2, 2]);
        assert_eq!(extract_uniform(1, 3), vec![0, 0, 0]);
    }

    #[test]
    fn uniform_matches_float_rounding() {
        for f in 1..60usize {
            for n in 2..40usize {
                let want: Vec<usize> = (0..n)
                    .map(|i| (i as f64 * (f - 1) as f64 / (n - 1) as f64 + 0.5).floor() as usize)
                    .collect();
                assert_eq!(extract_uniform(f, n), want, "F={f} n={n}");
            }
        }
    }

    #[test]
    fn window_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        assert_eq!(extract_random_window(16, 16, &mut rng).unwrap(), (0..16).collect::<Vec<_>>());
        assert_eq!(
            extract_random_window(10, 16, &mut rng),
            Err(SamplerError::WindowTooLarge { frame_count: 10, n: 16 })
        );
    }

    #[test]
    fn window_starts_are_uniform() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let mut counts = [0usize; 5];
        let draws = 100_000;
        for _ in 0..draws {
            counts[extract_random_window(20, 16, &mut rng).unwrap()[0]] += 1;
        }
        for c in counts {
            assert!((c as f64 / draws as f64 - 0.2).abs() < 0.02);
        }
    }

    #[test]
    fn plans_are_deterministic() {
        let p = params(3, 0.5);
        let a = plan_for("clip-a", 40, 1, &p, &mut p.rng_for("clip-a")).unwrap();
        let b = plan_for("clip-a", 40, 1, &p, &mut p.rng_for("clip-a")).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn many_transitions_take_a_window() {
        let p = params(3, 1.0);
        let plan = plan_for("x", 32, 4, &p, &mut p.rng_for("x")).unwrap();
        assert_eq!(plan.strategy, Strategy::Random);
        assert!(plan.honored);
        assert_eq!(plan.indices.len(), 16);
        assert!(plan.indices.windows(2).all(|w| w[1] == w[0] + 1));
        assert!(*plan.indices.last().unwrap() < 32);
    }

    #[test]
    fn plan_json_shape() {
        let p = params(3, 1.0);
        let plan = plan_for("x", 16, 0, &p, &mut p.rng_for("x")).unwrap();
        let v = serde_json::to_value(&plan).unwrap();
        assert_eq!(v["strategy"], "uniform");
        assert_eq!(v["honored"], true);
        assert_eq!(v["source_id"], "x");
    }

    proptest! {
        #[test]
        fn uniform_includes_endpoints(f in 2usize..500, n in 2usize..64) {
            let idx = extract_uniform(f, n);
            prop_assert_eq!(idx.len(), n);
            prop_assert_eq!(idx[0], 0);
            prop_assert_eq!(*idx.last().unwrap(), f - 1);
            prop_assert!(idx.windows(2).all(|w| w[0] <= w[1]));
            if f >= n {
                prop_assert!(idx.windows(2).all(|w| w[0] < w[1]));
            }
        }

        #[test]
        fn windows_are_contiguous_and_in_range(f in 1usize..300, n in 1usize..64, seed in any::<u64>()) {
            prop_assume!(f >= n);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let idx = extract_random_window(f, n, &mut rng).unwrap();
            prop_assert_eq!(idx.len(), n);
            prop_assert!(idx.windows(2).all(|w| w[1] == w[0] + 1));
            prop_assert!(*idx.last().unwrap() < f);
        }
    }
}
