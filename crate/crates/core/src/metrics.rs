//! Reliability and uniformity estimates.
//!
//! Challenges come from `seeded_rng(seed)`, so every architecture evaluated
//! with the same seed sees the same challenge list. Noise for challenge chunk
//! `i` comes from ChaCha stream `NOISE_STREAM_BASE + i`, which keeps results
//! identical regardless of the rayon thread count.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::composite::{ArchTag, PufInstance};
use crate::error::{Error, Result};
use crate::puf::{seeded_rng, sub_stream, Bit, Challenge, NoiseModel};

pub const DEFAULT_CHALLENGES: usize = 10_000;
pub const DEFAULT_REPEATS: usize = 11;

const CHUNK: usize = 512;
const NOISE_STREAM_BASE: u64 = 1 << 32;

/// Reference against which noisy responses are compared.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BerReference {
    /// Noise-free response.
    #[default]
    Golden,
    /// Majority vote of the noisy repeats themselves.
    Majority,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BerEstimate {
    pub ber: f64,
    pub challenges: usize,
    pub repeats: usize,
    pub reference: BerReference,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub arch: ArchTag,
    pub n: usize,
    /// Standard deviation of the per-weight noise actually applied.
    pub weight_noise: f64,
    pub seed: u64,
    pub ber: BerEstimate,
    pub uniformity: f64,
}

pub fn challenge_list(n: usize, count: usize, seed: u64) -> Vec<Challenge> {
    let mut rng = seeded_rng(seed);
    (0..count).map(|_| Challenge::random(n, &mut rng)).collect()
}

/// Fraction of disagreeing responses over `challenges × repeats` evaluations.
pub fn measure_ber(
    puf: &PufInstance,
    noise: &NoiseModel,
    challenges: usize,
    repeats: usize,
    seed: u64,
    reference: BerReference,
) -> Result<BerEstimate> {
    if challenges == 0 || repeats == 0 {
        return Err(Error::InvalidParameter("challenges and repeats must be positive".into()));
    }
    let list = challenge_list(puf.n(), challenges, seed);
    let disagreements: u64 = list
        .par_chunks(CHUNK)
        .enumerate()
        .map(|(chunk, cs)| {
            let mut rng = sub_stream(seed, NOISE_STREAM_BASE + chunk as u64);
            let mut noisy: Vec<Bit> = vec![0; repeats];
            let mut total = 0u64;
            for c in cs {
                for r in noisy.iter_mut() {
                    *r = puf.respond_bits(c.bits(), noise, &mut rng);
                }
                let reference_bit = match reference {
                    BerReference::Golden => puf.respond_bits(c.bits(), &NoiseModel::NONE, &mut rng),
                    BerReference::Majority => {
                        let ones = noisy.iter().filter(|&&b| b == 1).count();
                        (2 * ones > repeats) as Bit
                    }
                };
                total += noisy.iter().filter(|&&b| b != reference_bit).count() as u64;
            }
            total
        })
        .sum();
    Ok(BerEstimate {
        ber: disagreements as f64 / (challenges * repeats) as f64,
        challenges,
        repeats,
        reference,
    })
}

/// Fraction of noise-free responses equal to 1.
pub fn measure_uniformity(puf: &PufInstance, challenges: usize, seed: u64) -> Result<f64> {
    if challenges == 0 {
        return Err(Error::InvalidParameter("challenges must be positive".into()));
    }
    let list = challenge_list(puf.n(), challenges, seed);
    let ones: usize = list
        .par_chunks(CHUNK)
        .map(|cs| {
            let mut rng = seeded_rng(0);
            cs.iter()
                .filter(|c| puf.respond_bits(c.bits(), &NoiseModel::NONE, &mut rng) == 1)
                .count()
        })
        .sum();
    Ok(ones as f64 / challenges as f64)
}

pub fn measure(
    puf: &PufInstance,
    noise: &NoiseModel,
    challenges: usize,
    repeats: usize,
    seed: u64,
    reference: BerReference,
) -> Result<MetricsReport> {
    Ok(MetricsReport {
        arch: puf.arch(),
        n: puf.n(),
        weight_noise: noise.sigma(),
        seed,
        ber: measure_ber(puf, noise, challenges, repeats, seed, reference)?,
        uniformity: measure_uniformity(puf, challenges, seed)?,
    })
}
