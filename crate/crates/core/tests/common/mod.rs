//! Shared fixtures for the integration tests.
#![allow(dead_code)]

use chaosnet::ann::{train, Activation, Arch, TrainConfig, Trained};
use chaosnet::chaos::ChaoticSystem;
use chaosnet::dse::REFERENCE_ESTIMATES;
use chaosnet::dse::{read_measurements, MeasurementRecord};
use chaosnet::integrator::{build_dataset, integrate, Dataset, Trajectory};
use chaosnet::oscillator::BitStream;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Chen trajectory, dataset and trained 3-8-3 ReLU model.
pub struct Profile {
    pub trajectory: Trajectory,
    pub dataset: Dataset,
    pub trained: Trained,
}

fn chen_profile(dt: f64, cfg: &TrainConfig) -> Profile {
    let trajectory = integrate(&ChaoticSystem::chen(), &[1.0, 1.0, 1.0], dt, 10_000).unwrap();
    let dataset = build_dataset(&trajectory, 0.8, true).unwrap();
    let trained = train(&dataset, Arch::new(3, 8, 3), Activation::Relu, cfg).unwrap();
    Profile {
        trajectory,
        dataset,
        trained,
    }
}

/// 10 000 pairs at the default step dt = 0.001, default training settings.
pub fn default_profile() -> Profile {
    chen_profile(1e-3, &TrainConfig::default())
}

/// 10 000 pairs sampled every 0.03 time units. At dt = 0.001 one step is
/// nearly the identity map and the closed loop settles onto a fixed point or
/// cycle. With the coarser sampling the learned map keeps the stretching of
/// the attractor.
pub fn oscillator_profile() -> Profile {
    let cfg = TrainConfig {
        epochs: 300,
        learning_rate: 1e-3,
        ..TrainConfig::default()
    };
    chen_profile(0.03, &cfg)
}

/// Brute-force non-domination: O(n²), ordered by cost then index.
pub fn brute_force_pareto(points: &[(f64, f64)]) -> Vec<usize> {
    let mut keep: Vec<usize> = (0..points.len())
        .filter(|&i| {
            !points.iter().any(|q| {
                q.0 <= points[i].0 && q.1 <= points[i].1 && (q.0 < points[i].0 || q.1 < points[i].1)
            })
        })
        .collect();
    keep.sort_by(|&a, &b| points[a].0.total_cmp(&points[b].0).then(a.cmp(&b)));
    keep
}

/// Random points; with `grid` set, coordinates are small integers so ties
/// and duplicates are common.
pub fn random_points(rng: &mut ChaCha8Rng, n: usize, grid: bool) -> Vec<(f64, f64)> {
    (0..n)
        .map(|_| {
            if grid {
                (rng.gen_range(0..15) as f64, rng.gen_range(0..15) as f64)
            } else {
                (rng.gen_range(0.0..1e4), rng.gen_range(0.0..1e3))
            }
        })
        .collect()
}

pub fn reference_records() -> Vec<MeasurementRecord> {
    read_measurements(REFERENCE_ESTIMATES.as_bytes()).unwrap()
}

/// `n` bits from a seeded ChaCha8 stream.
pub fn reference_bits(seed: u64, n: usize) -> BitStream {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut bytes = vec![0u8; n.div_ceil(8)];
    rng.fill_bytes(&mut bytes);
    let mut bits = BitStream::from_bytes(bytes);
    bits.truncate(n);
    bits
}

/// Index of the first row where the two row-major sequences differ by more
/// than `threshold` in any coordinate.
pub fn first_divergence(a: &[f32], b: &[f32], dim: usize, threshold: f32) -> Option<usize> {
    a.chunks_exact(dim)
        .zip(b.chunks_exact(dim))
        .position(|(x, y)| x.iter().zip(y).any(|(u, v)| (u - v).abs() > threshold))
}
