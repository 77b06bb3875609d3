//! Linear additive delay model of a single arbiter chain.
//!
//! An `n`-stage chain is described by `n + 1` real weights `w`. A challenge
//! `c ∈ {0,1}^n` is mapped to the parity vector
//!
//! ```text
//! phi[n] = 1,   phi[i] = prod_{j=i}^{n-1} (1 - 2 c[j])
//! ```
//!
//! and the delay difference is `w · phi`. The arbiter answers 1 when the
//! difference is negative and 0 otherwise (a tie answers 0).
//!
//! Evaluation noise is modelled as a fresh vector `eta ~ N(0, sigma^2 I)`
//! added to the weights on every evaluation.
//!
//! # Randomness
//!
//! Every random quantity in the crate comes from [`PufRng`] (ChaCha with 8
//! rounds, `rand_chacha` 0.9) seeded through `SeedableRng::seed_from_u64`.
//! Gaussian draws use `rand_distr::StandardNormal` (ziggurat) scaled by the
//! requested deviation. Both are pinned by `Cargo.lock`, so a dataset is
//! reproducible for a given repository version.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A single response or challenge bit, always 0 or 1.
pub type Bit = u8;

/// The generator behind every seeded stream in the crate.
pub type PufRng = ChaCha8Rng;

/// Multiplier applied to a nominal noise level (0.02, 0.05, ...) to obtain
/// the per-weight deviation actually injected.
///
/// With weights drawn from N(0, 1) and noise added to every one of the 65
/// weights of a 64-stage chain, a raw deviation of 0.05 only flips about
/// 1.6% of responses. The constant is fixed so that a plain 64-stage APUF at
/// nominal 0.05 lands inside the 5.5%..8.5% bit-error band (population mean
/// over 20 instances is about 7.7%). All architectures share it.
pub const NOISE_CALIBRATION: f64 = 4.8;

/// Seeded stream used for instance construction.
pub fn seeded_rng(seed: u64) -> PufRng {
    PufRng::seed_from_u64(seed)
}

/// Seeded stream with an explicit ChaCha stream id, for deterministic
/// sub-streams (per chunk, per purpose) derived from one seed.
pub fn sub_stream(seed: u64, stream: u64) -> PufRng {
    let mut rng = PufRng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// A fixed-length 0/1 challenge. Bit `i` (0-based) is the select input of
/// stage `i + 1`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Challenge {
    bits: Vec<Bit>,
}

impl Challenge {
    pub fn new(bits: Vec<Bit>) -> Result<Self> {
        if bits.is_empty() {
            return Err(Error::InvalidChallenge("challenge must have at least one bit".into()));
        }
        if let Some(pos) = bits.iter().position(|&b| b > 1) {
            return Err(Error::InvalidChallenge(format!(
                "bit {} has value {} (expected 0 or 1)",
                pos, bits[pos]
            )));
        }
        Ok(Self { bits })
    }

    pub fn zeros(n: usize) -> Self {
        assert!(n > 0, "challenge length must be positive");
        Self { bits: vec![0; n] }
    }

    /// Uniform random challenge. Bits are taken LSB-first from consecutive
    /// `next_u64` words, so `n <= 64` costs exactly one word.
    pub fn random<R: RngCore + ?Sized>(n: usize, rng: &mut R) -> Self {
        assert!(n > 0, "challenge length must be positive");
        let mut bits = Vec::with_capacity(n);
        while bits.len() < n {
            let word = rng.next_u64();
            let take = (n - bits.len()).min(64);
            bits.extend((0..take).map(|j| ((word >> j) & 1) as Bit));
        }
        Self { bits }
    }

    pub fn from_bit_str(s: &str) -> Result<Self> {
        let bits = s
            .chars()
            .map(|ch| match ch {
                '0' => Ok(0),
                '1' => Ok(1),
                other => Err(Error::InvalidChallenge(format!("unexpected character {other:?}"))),
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(bits)
    }

    pub fn to_bit_string(&self) -> String {
        self.bits.iter().map(|&b| if b == 1 { '1' } else { '0' }).collect()
    }

    /// Stage count `n`.
    #[inline]
    pub fn len(&self) -> usize {
        self.bits.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    #[inline]
    pub fn bits(&self) -> &[Bit] {
        &self.bits
    }

    pub fn into_bits(self) -> Vec<Bit> {
        self.bits
    }
}

/// `phi` of length `n + 1`; entries are ±1 and the last one is always 1.
#[derive(Clone, Debug, PartialEq)]
pub struct ParityVector(Vec<f64>);

impl ParityVector {
    #[inline]
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.0.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Recover the challenge from consecutive ratios `phi[i] / phi[i+1]`.
    pub fn to_challenge(&self) -> Challenge {
        let bits = self
            .0
            .windows(2)
            .map(|w| if w[0] * w[1] < 0.0 { 1 } else { 0 })
            .collect();
        Challenge { bits }
    }
}

pub fn parity_transform(c: &Challenge) -> ParityVector {
    let n = c.len();
    let mut phi = vec![1.0; n + 1];
    suffix_parity_into(c.bits(), &mut phi[..n]);
    ParityVector(phi)
}

/// Writes `prod_{j=i}^{len-1} (1 - 2 bits[j])` into `out[i]`.
#[inline]
pub(crate) fn suffix_parity_into<T: From<i8> + Copy>(bits: &[Bit], out: &mut [T]) {
    debug_assert_eq!(bits.len(), out.len());
    let mut sign: i8 = 1;
    for i in (0..bits.len()).rev() {
        if bits[i] == 1 {
            sign = -sign;
        }
        out[i] = T::from(sign);
    }
}

/// Delay-difference parameters of one chain (`n + 1` entries, last is the
/// arbiter bias).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightVector(Vec<f64>);

impl WeightVector {
    pub fn new(w: Vec<f64>) -> Result<Self> {
        if w.len() < 2 {
            return Err(Error::ZeroStages);
        }
        if let Some(pos) = w.iter().position(|x| !x.is_finite()) {
            return Err(Error::InvalidParameter(format!("weight {pos} is not finite")));
        }
        Ok(Self(w))
    }

    #[inline]
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    /// Stage count `n` (one less than the number of weights).
    #[inline]
    pub fn stages(&self) -> usize {
        self.0.len() - 1
    }

    pub fn negated(&self) -> Self {
        Self(self.0.iter().map(|w| -w).collect())
    }
}

/// `n + 1` independent N(mu, sigma^2) draws from `seeded_rng(seed)`.
pub fn derive_weights(seed: u64, n: usize, mu: f64, sigma: f64) -> Result<WeightVector> {
    if n == 0 {
        return Err(Error::ZeroStages);
    }
    if !(sigma > 0.0 && sigma.is_finite()) || !mu.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "weight distribution needs finite mu and sigma > 0 (got mu={mu}, sigma={sigma})"
        )));
    }
    let mut rng = seeded_rng(seed);
    Ok(WeightVector(gaussian_vec(&mut rng, n + 1, mu, sigma)))
}

pub(crate) fn gaussian_vec<R: Rng + ?Sized>(rng: &mut R, len: usize, mu: f64, sigma: f64) -> Vec<f64> {
    (0..len)
        .map(|_| mu + sigma * rng.sample::<f64, _>(StandardNormal))
        .collect()
}

/// Per-weight Gaussian evaluation noise.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    sigma: f64,
}

impl NoiseModel {
    pub const NONE: NoiseModel = NoiseModel { sigma: 0.0 };

    /// Raw per-weight deviation, injected as is.
    pub fn new(sigma: f64) -> Result<Self> {
        if !(sigma >= 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "noise sigma must be finite and >= 0 (got {sigma})"
            )));
        }
        Ok(Self { sigma })
    }

    /// Nominal noise level scaled by [`NOISE_CALIBRATION`].
    pub fn calibrated(nominal: f64) -> Result<Self> {
        Self::new(nominal)?;
        Self::new(nominal * NOISE_CALIBRATION)
    }

    #[inline]
    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    #[inline]
    pub fn is_noise_free(&self) -> bool {
        self.sigma == 0.0
    }

    /// One fresh noise vector, or `None` when noise-free (no randomness is
    /// consumed in that case).
    pub fn draw<R: Rng + ?Sized>(&self, len: usize, rng: &mut R) -> Option<Vec<f64>> {
        if self.is_noise_free() {
            None
        } else {
            Some(gaussian_vec(rng, len, 0.0, self.sigma))
        }
    }

    /// A single scalar draw (0 when noise-free).
    pub fn draw_one<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        if self.is_noise_free() {
            0.0
        } else {
            self.sigma * rng.sample::<f64, _>(StandardNormal)
        }
    }
}

impl Default for NoiseModel {
    fn default() -> Self {
        Self::NONE
    }
}

/// `(w + eta) · phi` with a fresh `eta` per call.
pub fn evaluate_delay<R: Rng + ?Sized>(
    w: &WeightVector,
    phi: &ParityVector,
    noise: &NoiseModel,
    rng: &mut R,
) -> Result<f64> {
    if w.0.len() != phi.0.len() {
        return Err(Error::LengthMismatch {
            expected: w.0.len(),
            found: phi.0.len(),
        });
    }
    let eta = noise.draw(w.0.len(), rng);
    Ok(match eta {
        None => w.0.iter().zip(&phi.0).map(|(a, b)| a * b).sum(),
        Some(eta) => w
            .0
            .iter()
            .zip(&eta)
            .zip(&phi.0)
            .map(|((a, e), b)| (a + e) * b)
            .sum(),
    })
}

/// 1 if `delta < 0`, else 0.
#[inline]
pub fn arbitrate(delta: f64) -> Bit {
    if delta < 0.0 {
        1
    } else {
        0
    }
}

/// `sum_{i < bits.len()} (w[i] + eta[i]) * prod_{j=i}^{len-1} (1 - 2 bits[j])`,
/// i.e. the delay difference after the first `bits.len()` stages, without any
/// arbiter bias term.
#[inline]
pub(crate) fn stage_delay(weights: &[f64], eta: Option<&[f64]>, bits: &[Bit]) -> f64 {
    let mut sign = 1.0;
    let mut acc = 0.0;
    match eta {
        None => {
            for i in (0..bits.len()).rev() {
                if bits[i] == 1 {
                    sign = -sign;
                }
                acc += weights[i] * sign;
            }
        }
        Some(eta) => {
            for i in (0..bits.len()).rev() {
                if bits[i] == 1 {
                    sign = -sign;
                }
                acc += (weights[i] + eta[i]) * sign;
            }
        }
    }
    acc
}

/// Full chain delay `(w + eta) · phi(bits)` for `weights.len() == bits.len() + 1`.
#[inline]
pub(crate) fn chain_delay(weights: &[f64], eta: Option<&[f64]>, bits: &[Bit]) -> f64 {
    let n = bits.len();
    debug_assert_eq!(weights.len(), n + 1);
    let bias = match eta {
        None => weights[n],
        Some(eta) => weights[n] + eta[n],
    };
    stage_delay(weights, eta, bits) + bias
}

/// A plain `n`-stage arbiter PUF.
#[derive(Clone, Debug, PartialEq)]
pub struct ApufInstance {
    seed: u64,
    weights: WeightVector,
}

impl ApufInstance {
    /// Weights drawn N(0, 1) from `seed`.
    pub fn from_seed(n: usize, seed: u64) -> Result<Self> {
        Ok(Self {
            seed,
            weights: derive_weights(seed, n, 0.0, 1.0)?,
        })
    }

    /// Explicit weights; `seed` is kept only as provenance.
    pub fn with_weights(weights: WeightVector, seed: u64) -> Self {
        Self { seed, weights }
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.weights.stages()
    }

    #[inline]
    pub fn seed(&self) -> u64 {
        self.seed
    }

    #[inline]
    pub fn weights(&self) -> &WeightVector {
        &self.weights
    }

    pub fn respond<R: Rng + ?Sized>(&self, c: &Challenge, noise: &NoiseModel, rng: &mut R) -> Result<Bit> {
        self.check(c)?;
        Ok(self.respond_bits(c.bits(), noise, rng))
    }

    /// Noise-free delay difference.
    pub fn delay(&self, c: &Challenge) -> Result<f64> {
        self.check(c)?;
        Ok(chain_delay(self.weights.as_slice(), None, c.bits()))
    }

    #[inline]
    pub(crate) fn respond_bits<R: Rng + ?Sized>(&self, bits: &[Bit], noise: &NoiseModel, rng: &mut R) -> Bit {
        let eta = noise.draw(self.weights.0.len(), rng);
        arbitrate(chain_delay(self.weights.as_slice(), eta.as_deref(), bits))
    }

    fn check(&self, c: &Challenge) -> Result<()> {
        if c.len() != self.n() {
            return Err(Error::StageMismatch {
                expected: self.n(),
                found: c.len(),
            });
        }
        Ok(())
    }
}

/// `arbitrate(evaluate_delay(inst.weights, parity_transform(c), noise, rng))`.
pub fn apuf_respond<R: Rng + ?Sized>(
    inst: &ApufInstance,
    c: &Challenge,
    noise: &NoiseModel,
    rng: &mut R,
) -> Result<Bit> {
    inst.respond(c, noise, rng)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ch(bits: &[u8]) -> Challenge {
        Challenge::new(bits.to_vec()).unwrap()
    }

    #[test]
    fn derive_weights_is_deterministic_per_seed() {
        let a = derive_weights(42, 64, 0.0, 1.0).unwrap();
        let b = derive_weights(42, 64, 0.0, 1.0).unwrap();
        let c = derive_weights(43, 64, 0.0, 1.0).unwrap();
        assert_eq!(a.as_slice().len(), 65);
        assert_eq!(a, b);
        assert!(a.as_slice().iter().zip(c.as_slice()).any(|(x, y)| x != y));
    }

    #[test]
    fn derive_weights_rejects_zero_stages() {
        assert!(matches!(derive_weights(1, 0, 0.0, 1.0), Err(Error::ZeroStages)));
        assert!(derive_weights(1, 4, 0.0, 0.0).is_err());
    }

    #[test]
    fn first_weight_mean_over_many_instances() {
        // Standard error of the mean is 0.01, so 0.05 is a 5-sigma band.
        let mean: f64 = (0..10_000u64)
            .map(|s| derive_weights(s, 64, 0.0, 1.0).unwrap().as_slice()[0])
            .sum::<f64>()
            / 10_000.0;
        assert!(mean.abs() < 0.05, "mean {mean}");
    }

    #[test]
    fn parity_examples() {
        assert_eq!(parity_transform(&Challenge::zeros(4)).as_slice(), &[1.0; 5]);
        assert_eq!(parity_transform(&ch(&[0, 1, 1])).as_slice(), &[1.0, 1.0, -1.0, 1.0]);

        let mut bits = vec![0u8; 64];
        bits[0] = 1;
        let phi = parity_transform(&ch(&bits));
        assert_eq!(phi.as_slice()[0], -1.0);
        assert!(phi.as_slice()[1..].iter().all(|&p| p == 1.0));
    }

    #[test]
    fn delay_dot_product() {
        let w = WeightVector::new(vec![1.0, -2.0, 0.5]).unwrap();
        let phi = ParityVector(vec![1.0, -1.0, 1.0]);
        let mut rng = seeded_rng(0);
        let d = evaluate_delay(&w, &phi, &NoiseModel::NONE, &mut rng).unwrap();
        assert_eq!(d, 3.5);
        let d2 = evaluate_delay(&w, &phi, &NoiseModel::NONE, &mut rng).unwrap();
        assert_eq!(d, d2);
    }

    #[test]
    fn delay_length_mismatch() {
        let w = WeightVector::new(vec![1.0, -2.0, 0.5]).unwrap();
        let phi = ParityVector(vec![1.0, 1.0]);
        let err = evaluate_delay(&w, &phi, &NoiseModel::NONE, &mut seeded_rng(0)).unwrap_err();
        assert!(matches!(err, Error::LengthMismatch { expected: 3, found: 2 }));
    }

    #[test]
    fn delay_noise_spread_matches_sum_of_components() {
        let n = 64;
        let w = derive_weights(5, n, 0.0, 1.0).unwrap();
        let c = Challenge::random(n, &mut seeded_rng(9));
        let phi = parity_transform(&c);
        let noise = NoiseModel::new(0.05).unwrap();
        let mut rng = seeded_rng(11);
        let samples: Vec<f64> = (0..10_000)
            .map(|_| evaluate_delay(&w, &phi, &noise, &mut rng).unwrap())
            .collect();
        let mean = samples.iter().sum::<f64>() / samples.len() as f64;
        let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (samples.len() - 1) as f64;
        let expected = 0.05 * ((n + 1) as f64).sqrt();
        assert!((var.sqrt() - expected).abs() < 0.1 * expected, "std {} vs {}", var.sqrt(), expected);
    }

    #[test]
    fn arbitrate_cases() {
        assert_eq!(arbitrate(-0.3), 1);
        assert_eq!(arbitrate(0.3), 0);
        assert_eq!(arbitrate(0.0), 0);
    }

    #[test]
    fn bias_only_instances_are_constant() {
        let mut w = vec![0.0; 65];
        w[64] = 10.0;
        let pos = ApufInstance::with_weights(WeightVector::new(w.clone()).unwrap(), 0);
        w[64] = -10.0;
        let neg = ApufInstance::with_weights(WeightVector::new(w).unwrap(), 0);
        let mut rng = seeded_rng(3);
        for _ in 0..200 {
            let c = Challenge::random(64, &mut rng);
            assert_eq!(apuf_respond(&pos, &c, &NoiseModel::NONE, &mut rng).unwrap(), 0);
            assert_eq!(apuf_respond(&neg, &c, &NoiseModel::NONE, &mut rng).unwrap(), 1);
        }
    }

    #[test]
    fn respond_matches_explicit_dot_product() {
        let inst = ApufInstance::from_seed(64, 77).unwrap();
        let mut rng = seeded_rng(1);
        for _ in 0..100 {
            let c = Challenge::random(64, &mut rng);
            // Oracle: O(n^2) product form of the parity, then a plain dot product.
            let mut delta = 0.0;
            for i in 0..=64 {
                let mut p = 1.0;
                for j in i..64 {
                    p *= 1.0 - 2.0 * c.bits()[j] as f64;
                }
                delta += inst.weights().as_slice()[i] * p;
            }
            let expected = if delta < 0.0 { 1 } else { 0 };
            assert_eq!(apuf_respond(&inst, &c, &NoiseModel::NONE, &mut rng).unwrap(), expected);
        }
    }

    #[test]
    fn stage_mismatch_is_rejected() {
        let inst = ApufInstance::from_seed(8, 1).unwrap();
        let err = inst
            .respond(&Challenge::zeros(7), &NoiseModel::NONE, &mut seeded_rng(0))
            .unwrap_err();
        assert!(matches!(err, Error::StageMismatch { expected: 8, found: 7 }));
    }

    #[test]
    fn invalid_challenge_bits() {
        assert!(Challenge::new(vec![0, 2, 1]).is_err());
        assert!(Challenge::new(vec![]).is_err());
        assert!(Challenge::from_bit_str("01x").is_err());
        assert_eq!(Challenge::from_bit_str("0110").unwrap().bits(), &[0, 1, 1, 0]);
    }

    #[test]
    fn noise_flip_rate_is_monotone_in_sigma() {
        let inst = ApufInstance::from_seed(64, 2024).unwrap();
        let mut crng = seeded_rng(8);
        let challenges: Vec<Challenge> = (0..10_000).map(|_| Challenge::random(64, &mut crng)).collect();
        let golden: Vec<Bit> = challenges
            .iter()
            .map(|c| inst.respond(c, &NoiseModel::NONE, &mut crng).unwrap())
            .collect();
        let mut last = -1.0;
        for sigma in [0.0, 0.02, 0.05, 0.1] {
            let noise = NoiseModel::new(sigma).unwrap();
            let mut rng = seeded_rng(99);
            let flips = challenges
                .iter()
                .zip(&golden)
                .filter(|(c, &g)| inst.respond(c, &noise, &mut rng).unwrap() != g)
                .count() as f64
                / challenges.len() as f64;
            assert!(flips >= last, "sigma {sigma}: {flips} < {last}");
            last = flips;
        }
        assert!(last > 0.0);
    }

    #[test]
    fn noise_model_rejects_negative() {
        assert!(NoiseModel::new(-0.1).is_err());
        assert!(NoiseModel::new(f64::NAN).is_err());
        assert_eq!(NoiseModel::calibrated(0.05).unwrap().sigma(), 0.05 * NOISE_CALIBRATION);
    }
}
