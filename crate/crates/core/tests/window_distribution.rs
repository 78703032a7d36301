use lapsekit::sampler::{extract_random_window, plan_for, SamplerParams, Strategy};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

fn chi_square_p(counts: &[u64]) -> f64 {
    let total: u64 = counts.iter().sum();
    let expected = total as f64 / counts.len() as f64;
    let stat: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
    let dist = ChiSquared::new((counts.len() - 1) as f64).unwrap();
    1.0 - dist.cdf(stat)
}

/// Each seed's goodness-of-fit p-value is itself uniform under the null, so
/// more than 3 of 20 below 0.01 happens with probability about 4e-5.
#[test]
fn window_starts_are_uniform() {
    let (frames, n) = (40, 16);
    let mut small = Vec::new();
    for seed in 0..20 {
        let mut counts = vec![0u64; frames - n + 1];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..25_000 {
            let w = extract_random_window(frames, n, &mut rng).unwrap();
            assert_eq!(w.len(), n);
            assert!(w.windows(2).all(|p| p[1] == p[0] + 1));
            counts[w[0]] += 1;
        }
        let p = chi_square_p(&counts);
        if p < 0.01 {
            small.push((seed, p));
        }
    }
    assert!(small.len() <= 3, "{small:?}");
}

#[test]
fn per_video_streams_differ_and_repeat() {
    let params = SamplerParams { n_frames: 4, delta: 0, prob: 0.5, seed: 7 };
    let draw = |id: &str| {
        let mut rng = params.rng_for(id);
        (0..64)
            .map(|_| plan_for(id, 30, 5, &params, &mut rng).unwrap())
            .map(|p| (p.strategy == Strategy::Random, p.indices[0]))
            .collect::<Vec<_>>()
    };
    assert_eq!(draw("a"), draw("a"));
    assert_ne!(draw("a"), draw("b"));
}

