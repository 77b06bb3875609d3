//! Challenge-obfuscated compositions built from arbiter chains: feed-forward
//! APUFs, XOR/OAX combinations of them, the Mn APUF and the interpose PUF.
//!
//! Positions in loop geometries are 1-based, as in the usual "start→end"
//! notation: a loop `15→25,30` places an intermediate arbiter after stage 15
//! and writes its output into challenge bits 25 and 30.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::puf::{
    arbitrate, chain_delay, gaussian_vec, seeded_rng, stage_delay, sub_stream, ApufInstance, Bit, Challenge,
    NoiseModel,
};

/// ChaCha stream used to draw intermediate-arbiter biases of an FF chain.
const ARBITER_BIAS_STREAM: u64 = 1;
/// ChaCha stream used to derive member seeds of a composition.
const MEMBER_SEED_STREAM: u64 = 2;

/// Seeds of the members of a composition, drawn in order from one stream.
pub fn member_seeds(master: u64, count: usize) -> Vec<u64> {
    let mut rng = sub_stream(master, MEMBER_SEED_STREAM);
    (0..count).map(|_| rng.next_u64()).collect()
}

/// One intermediate arbiter: its stage and the challenge bits it drives.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LoopShape {
    pub arbiter_stage: usize,
    pub end_positions: Vec<usize>,
}

/// Loop geometry of an FF chain, without any instance-specific parameters.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct LoopGeometry {
    loops: Vec<LoopShape>,
}

/// Named loop configurations.
pub const LOOP_CONFIGS: [(&str, &str); 7] = [
    ("Loop_A", "15→25"),
    ("Loop_B", "15→25,30"),
    ("Loop_C", "15→25,30,35"),
    ("Loop_D", "8→62;16→63;32→64"),
    ("Loop_E", "15→25,30,35,40"),
    ("Loop_F", "15→25,30,35,40,45"),
    ("Loop_G", "15→25,30,35,40,45,50"),
];

impl LoopGeometry {
    pub fn none() -> Self {
        Self::default()
    }

    /// Loops are sorted by arbiter stage; shapes with the same stage are merged.
    pub fn new(mut loops: Vec<LoopShape>) -> Result<Self> {
        for l in &mut loops {
            l.end_positions.sort_unstable();
        }
        loops.sort_by_key(|l| l.arbiter_stage);
        let mut merged: Vec<LoopShape> = Vec::with_capacity(loops.len());
        for l in loops {
            if l.end_positions.is_empty() {
                return Err(Error::InvalidLoop(format!(
                    "arbiter at stage {} drives no challenge bit",
                    l.arbiter_stage
                )));
            }
            match merged.last_mut() {
                Some(prev) if prev.arbiter_stage == l.arbiter_stage => {
                    prev.end_positions.extend(l.end_positions);
                    prev.end_positions.sort_unstable();
                }
                _ => merged.push(l),
            }
        }
        let mut ends: Vec<usize> = merged.iter().flat_map(|l| l.end_positions.iter().copied()).collect();
        ends.sort_unstable();
        if let Some(w) = ends.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::InvalidLoop(format!("end position {} is driven twice", w[0])));
        }
        for l in &merged {
            if l.arbiter_stage == 0 {
                return Err(Error::InvalidLoop("arbiter stage must be >= 1".into()));
            }
            if let Some(&e) = l.end_positions.iter().find(|&&e| e <= l.arbiter_stage) {
                return Err(Error::InvalidLoop(format!(
                    "end position {e} does not lie after arbiter stage {}",
                    l.arbiter_stage
                )));
            }
        }
        Ok(Self { loops: merged })
    }

    /// Look up a named configuration (`Loop_A` .. `Loop_G`, case-insensitive,
    /// the `Loop_` prefix is optional).
    pub fn named(id: &str) -> Result<Self> {
        let wanted = id.trim().to_ascii_lowercase();
        let wanted = wanted.strip_prefix("loop_").unwrap_or(&wanted);
        LOOP_CONFIGS
            .iter()
            .find(|(name, _)| name[5..].eq_ignore_ascii_case(wanted))
            .map(|(_, spec)| spec.parse().expect("built-in loop configs parse"))
            .ok_or_else(|| Error::UnknownLoopConfig {
                id: id.to_string(),
                valid: LOOP_CONFIGS.iter().map(|(n, _)| *n).collect::<Vec<_>>().join(", "),
            })
    }

    /// Accepts either a named configuration or explicit `s→e1,e2;s2→e3` syntax.
    pub fn resolve(spec: &str) -> Result<Self> {
        if spec.contains("→") || spec.contains("->") {
            spec.parse()
        } else if spec.trim().is_empty() || spec.trim().eq_ignore_ascii_case("none") {
            Ok(Self::none())
        } else {
            Self::named(spec)
        }
    }

    pub fn loops(&self) -> &[LoopShape] {
        &self.loops
    }

    /// All driven challenge positions, 1-based and sorted.
    pub fn end_positions(&self) -> Vec<usize> {
        let mut ends: Vec<usize> = self.loops.iter().flat_map(|l| l.end_positions.iter().copied()).collect();
        ends.sort_unstable();
        ends
    }

    /// Total number of driven positions.
    pub fn k(&self) -> usize {
        self.loops.iter().map(|l| l.end_positions.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.loops.is_empty()
    }

    /// Check the geometry against a chain of `n` stages.
    pub fn validate_for(&self, n: usize) -> Result<()> {
        for l in &self.loops {
            if l.arbiter_stage >= n {
                return Err(Error::InvalidLoop(format!(
                    "arbiter stage {} must be < n = {n}",
                    l.arbiter_stage
                )));
            }
            if let Some(&e) = l.end_positions.iter().find(|&&e| e > n) {
                return Err(Error::InvalidLoop(format!("end position {e} exceeds n = {n}")));
            }
        }
        if self.k() >= n {
            return Err(Error::InvalidLoop(format!("k = {} must be < n = {n}", self.k())));
        }
        Ok(())
    }
}

impl fmt::Display for LoopGeometry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .loops
            .iter()
            .map(|l| {
                let ends: Vec<String> = l.end_positions.iter().map(|e| e.to_string()).collect();
                format!("{}→{}", l.arbiter_stage, ends.join(","))
            })
            .collect();
        f.write_str(&parts.join(";"))
    }
}

impl FromStr for LoopGeometry {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.is_empty() {
            return Ok(Self::none());
        }
        let parse_num = |t: &str| {
            t.trim()
                .parse::<usize>()
                .map_err(|_| Error::InvalidLoop(format!("`{t}` is not a stage number")))
        };
        let mut loops = Vec::new();
        for part in s.split(';').filter(|p| !p.trim().is_empty()) {
            let (start, ends) = part
                .split_once("→")
                .or_else(|| part.split_once("->"))
                .ok_or_else(|| Error::InvalidLoop(format!("`{part}` is not of the form s→e1,e2")))?;
            loops.push(LoopShape {
                arbiter_stage: parse_num(start)?,
                end_positions: ends.split(',').map(parse_num).collect::<Result<_>>()?,
            });
        }
        Self::new(loops)
    }
}

impl Serialize for LoopGeometry {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for LoopGeometry {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Self::resolve(&s).map_err(serde::de::Error::custom)
    }
}

/// An intermediate arbiter of a concrete FF instance.
#[derive(Clone, Debug, PartialEq)]
pub struct LoopSpec {
    pub arbiter_stage: usize,
    pub end_positions: Vec<usize>,
    pub arbiter_bias: f64,
}

/// Feed-forward arbiter PUF.
#[derive(Clone, Debug, PartialEq)]
pub struct FfApufInstance {
    base: ApufInstance,
    loops: Vec<LoopSpec>,
    geometry: LoopGeometry,
}

impl FfApufInstance {
    /// Chain weights come from `seed` exactly as for [`ApufInstance::from_seed`];
    /// intermediate-arbiter biases are drawn N(0, 1) from a separate stream.
    pub fn from_seed(n: usize, geometry: &LoopGeometry, seed: u64) -> Result<Self> {
        let base = ApufInstance::from_seed(n, seed)?;
        let mut rng = sub_stream(seed, ARBITER_BIAS_STREAM);
        let biases = gaussian_vec(&mut rng, geometry.loops().len(), 0.0, 1.0);
        Self::with_biases(base, geometry, &biases)
    }

    pub fn with_biases(base: ApufInstance, geometry: &LoopGeometry, biases: &[f64]) -> Result<Self> {
        geometry.validate_for(base.n())?;
        if biases.len() != geometry.loops().len() {
            return Err(Error::LengthMismatch {
                expected: geometry.loops().len(),
                found: biases.len(),
            });
        }
        let loops = geometry
            .loops()
            .iter()
            .zip(biases)
            .map(|(l, &b)| LoopSpec {
                arbiter_stage: l.arbiter_stage,
                end_positions: l.end_positions.clone(),
                arbiter_bias: b,
            })
            .collect();
        Ok(Self {
            base,
            loops,
            geometry: geometry.clone(),
        })
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.base.n()
    }

    pub fn k(&self) -> usize {
        self.geometry.k()
    }

    pub fn base(&self) -> &ApufInstance {
        &self.base
    }

    pub fn loops(&self) -> &[LoopSpec] {
        &self.loops
    }

    pub fn geometry(&self) -> &LoopGeometry {
        &self.geometry
    }

    pub fn respond<R: Rng + ?Sized>(&self, c: &Challenge, noise: &NoiseModel, rng: &mut R) -> Result<Bit> {
        check_stages(self.n(), c)?;
        Ok(self.respond_bits(c.bits(), noise, rng))
    }

    /// Noise-free response together with the intermediate arbiter outputs,
    /// in loop order.
    pub fn trace(&self, c: &Challenge) -> Result<(Bit, Vec<Bit>)> {
        check_stages(self.n(), c)?;
        let mut bits = c.bits().to_vec();
        let inner = self.resolve_loops(&mut bits, None, &[]);
        let r = arbitrate(chain_delay(self.base.weights().as_slice(), None, &bits));
        Ok((r, inner))
    }

    pub(crate) fn respond_bits<R: Rng + ?Sized>(&self, bits: &[Bit], noise: &NoiseModel, rng: &mut R) -> Bit {
        let weights = self.base.weights().as_slice();
        // One draw for the chain, shared by the partial and full evaluations.
        let eta = noise.draw(weights.len(), rng);
        let arb_noise: Vec<f64> = self.loops.iter().map(|_| noise.draw_one(rng)).collect();
        if self.loops.is_empty() {
            return arbitrate(chain_delay(weights, eta.as_deref(), bits));
        }
        let mut modified = bits.to_vec();
        self.resolve_loops(&mut modified, eta.as_deref(), &arb_noise);
        arbitrate(chain_delay(weights, eta.as_deref(), &modified))
    }

    /// Runs the intermediate arbiters in stage order, overwriting driven bits.
    fn resolve_loops(&self, bits: &mut [Bit], eta: Option<&[f64]>, arb_noise: &[f64]) -> Vec<Bit> {
        let weights = self.base.weights().as_slice();
        let mut outputs = Vec::with_capacity(self.loops.len());
        for (idx, l) in self.loops.iter().enumerate() {
            let s = l.arbiter_stage;
            let partial = stage_delay(&weights[..s], eta.map(|e| &e[..s]), &bits[..s])
                + l.arbiter_bias
                + arb_noise.get(idx).copied().unwrap_or(0.0);
            let r = arbitrate(partial);
            for &e in &l.end_positions {
                bits[e - 1] = r;
            }
            outputs.push(r);
        }
        outputs
    }
}

/// XOR of `z` FF chains sharing one challenge.
#[derive(Clone, Debug, PartialEq)]
pub struct XorFfInstance {
    members: Vec<FfApufInstance>,
}

impl XorFfInstance {
    pub fn new(members: Vec<FfApufInstance>) -> Result<Self> {
        if members.is_empty() {
            return Err(Error::EmptyComposition("XOR-FF needs at least one member"));
        }
        let n = members[0].n();
        if let Some(m) = members.iter().find(|m| m.n() != n) {
            return Err(Error::StageMismatch {
                expected: n,
                found: m.n(),
            });
        }
        Ok(Self { members })
    }

    /// Homogeneous instance: every member shares `geometry`, member seeds come
    /// from [`member_seeds`].
    pub fn from_seed(n: usize, geometry: &LoopGeometry, z: usize, seed: u64) -> Result<Self> {
        let members = member_seeds(seed, z)
            .into_iter()
            .map(|s| FfApufInstance::from_seed(n, geometry, s))
            .collect::<Result<Vec<_>>>()?;
        Self::new(members)
    }

    pub fn n(&self) -> usize {
        self.members[0].n()
    }

    pub fn members(&self) -> &[FfApufInstance] {
        &self.members
    }

    pub fn respond<R: Rng + ?Sized>(&self, c: &Challenge, noise: &NoiseModel, rng: &mut R) -> Result<Bit> {
        check_stages(self.n(), c)?;
        Ok(self.respond_bits(c.bits(), noise, rng))
    }

    pub(crate) fn respond_bits<R: Rng + ?Sized>(&self, bits: &[Bit], noise: &NoiseModel, rng: &mut R) -> Bit {
        xor_group(&self.members, bits, noise, rng)
    }
}

fn xor_group<R: Rng + ?Sized>(members: &[FfApufInstance], bits: &[Bit], noise: &NoiseModel, rng: &mut R) -> Bit {
    members.iter().fold(0, |acc, m| acc ^ m.respond_bits(bits, noise, rng))
}

/// `OR(x members) ⊕ AND(y members) ⊕ XOR(z members)`.
#[derive(Clone, Debug, PartialEq)]
pub struct OaxFfInstance {
    or_members: Vec<FfApufInstance>,
    and_members: Vec<FfApufInstance>,
    xor_members: Vec<FfApufInstance>,
}

impl OaxFfInstance {
    pub fn new(
        or_members: Vec<FfApufInstance>,
        and_members: Vec<FfApufInstance>,
        xor_members: Vec<FfApufInstance>,
    ) -> Result<Self> {
        let all: Vec<&FfApufInstance> = or_members.iter().chain(&and_members).chain(&xor_members).collect();
        let Some(first) = all.first() else {
            return Err(Error::EmptyComposition("OAX-FF needs x + y + z >= 1"));
        };
        let n = first.n();
        if let Some(m) = all.iter().find(|m| m.n() != n) {
            return Err(Error::StageMismatch {
                expected: n,
                found: m.n(),
            });
        }
        Ok(Self {
            or_members,
            and_members,
            xor_members,
        })
    }

    /// Member seeds are assigned in OR, AND, XOR order, so `(0, 0, z)` with
    /// the same master seed has exactly the members of `z`-XOR-FF.
    pub fn from_seed(n: usize, geometry: &LoopGeometry, xyz: (usize, usize, usize), seed: u64) -> Result<Self> {
        let (x, y, z) = xyz;
        let mut members = member_seeds(seed, x + y + z)
            .into_iter()
            .map(|s| FfApufInstance::from_seed(n, geometry, s))
            .collect::<Result<Vec<_>>>()?;
        let xor_members = members.split_off(x + y);
        let and_members = members.split_off(x);
        Self::new(members, and_members, xor_members)
    }

    pub fn n(&self) -> usize {
        self.or_members
            .iter()
            .chain(&self.and_members)
            .chain(&self.xor_members)
            .next()
            .map(|m| m.n())
            .expect("non-empty by construction")
    }

    pub fn xyz(&self) -> (usize, usize, usize) {
        (self.or_members.len(), self.and_members.len(), self.xor_members.len())
    }

    pub fn members(&self) -> impl Iterator<Item = &FfApufInstance> {
        self.or_members.iter().chain(&self.and_members).chain(&self.xor_members)
    }

    pub fn respond<R: Rng + ?Sized>(&self, c: &Challenge, noise: &NoiseModel, rng: &mut R) -> Result<Bit> {
        check_stages(self.n(), c)?;
        Ok(self.respond_bits(c.bits(), noise, rng))
    }

    pub(crate) fn respond_bits<R: Rng + ?Sized>(&self, bits: &[Bit], noise: &NoiseModel, rng: &mut R) -> Bit {
        // Every member is evaluated (no short-circuit) so the noise stream
        // consumption does not depend on earlier outcomes.
        let or = self
            .or_members
            .iter()
            .fold(0, |acc, m| acc | m.respond_bits(bits, noise, rng));
        let and = if self.and_members.is_empty() {
            0
        } else {
            self.and_members
                .iter()
                .fold(1, |acc, m| acc & m.respond_bits(bits, noise, rng))
        };
        let xor = xor_group(&self.xor_members, bits, noise, rng);
        or ^ and ^ xor
    }
}

/// Main chain whose three most significant challenge bits are driven by
/// auxiliary chains of sizes S1, S2, S3.
///
/// An auxiliary chain of size `S` reads the challenge prefix `c[1..=S]`;
/// auxiliary `i` drives 1-based position `n - i`.
#[derive(Clone, Debug, PartialEq)]
pub struct MnApufInstance {
    main: ApufInstance,
    aux: [ApufInstance; 3],
}

impl MnApufInstance {
    pub fn new(main: ApufInstance, aux: [ApufInstance; 3]) -> Result<Self> {
        let n = main.n();
        if n < 3 {
            return Err(Error::SubsetOutOfRange(format!("main chain needs n >= 3, got {n}")));
        }
        if let Some(a) = aux.iter().find(|a| a.n() > n) {
            return Err(Error::SubsetOutOfRange(format!(
                "auxiliary size {} exceeds main stage count {n}",
                a.n()
            )));
        }
        Ok(Self { main, aux })
    }

    /// Main chain from member seed 0, auxiliaries from seeds 1..=3.
    pub fn from_seed(n: usize, sizes: [usize; 3], seed: u64) -> Result<Self> {
        if let Some(&s) = sizes.iter().find(|&&s| s == 0 || s > n) {
            return Err(Error::SubsetOutOfRange(format!("auxiliary size {s} not in 1..={n}")));
        }
        let seeds = member_seeds(seed, 4);
        let main = ApufInstance::from_seed(n, seeds[0])?;
        let aux = [
            ApufInstance::from_seed(sizes[0], seeds[1])?,
            ApufInstance::from_seed(sizes[1], seeds[2])?,
            ApufInstance::from_seed(sizes[2], seeds[3])?,
        ];
        Self::new(main, aux)
    }

    pub fn n(&self) -> usize {
        self.main.n()
    }

    pub fn sizes(&self) -> [usize; 3] {
        [self.aux[0].n(), self.aux[1].n(), self.aux[2].n()]
    }

    pub fn main(&self) -> &ApufInstance {
        &self.main
    }

    pub fn aux(&self) -> &[ApufInstance; 3] {
        &self.aux
    }

    /// 0-based challenge index driven by auxiliary `i`.
    pub fn driven_index(&self, i: usize) -> usize {
        self.n() - 1 - i
    }

    pub fn respond<R: Rng + ?Sized>(&self, c: &Challenge, noise: &NoiseModel, rng: &mut R) -> Result<Bit> {
        check_stages(self.n(), c)?;
        Ok(self.respond_bits(c.bits(), noise, rng))
    }

    pub(crate) fn respond_bits<R: Rng + ?Sized>(&self, bits: &[Bit], noise: &NoiseModel, rng: &mut R) -> Bit {
        let outs: [Bit; 3] = std::array::from_fn(|i| {
            let s = self.aux[i].n();
            self.aux[i].respond_bits(&bits[..s], noise, rng)
        });
        let mut modified = bits.to_vec();
        for (i, &r) in outs.iter().enumerate() {
            modified[self.driven_index(i)] = r;
        }
        self.main.respond_bits(&modified, noise, rng)
    }
}

/// `(x, y)` interpose PUF: the XOR of `x` lower chains (n stages) is inserted
/// at 1-based position `i` of the `(n + 1)`-bit challenge of `y` upper chains.
#[derive(Clone, Debug, PartialEq)]
pub struct IpufInstance {
    lower: Vec<ApufInstance>,
    upper: Vec<ApufInstance>,
    interpose_pos: usize,
}

impl IpufInstance {
    pub fn new(lower: Vec<ApufInstance>, upper: Vec<ApufInstance>, interpose_pos: usize) -> Result<Self> {
        if lower.is_empty() || upper.is_empty() {
            return Err(Error::EmptyComposition("iPUF needs x >= 1 and y >= 1"));
        }
        let n = lower[0].n();
        if let Some(m) = lower.iter().find(|m| m.n() != n) {
            return Err(Error::StageMismatch {
                expected: n,
                found: m.n(),
            });
        }
        if let Some(m) = upper.iter().find(|m| m.n() != n + 1) {
            return Err(Error::StageMismatch {
                expected: n + 1,
                found: m.n(),
            });
        }
        if interpose_pos == 0 || interpose_pos > n + 1 {
            return Err(Error::InterposeOutOfRange {
                position: interpose_pos,
                max: n + 1,
            });
        }
        Ok(Self {
            lower,
            upper,
            interpose_pos,
        })
    }

    /// Lower chains from member seeds `0..x`, upper chains from `x..x+y`.
    pub fn from_seed(n: usize, x: usize, y: usize, interpose_pos: usize, seed: u64) -> Result<Self> {
        if interpose_pos == 0 || interpose_pos > n + 1 {
            return Err(Error::InterposeOutOfRange {
                position: interpose_pos,
                max: n + 1,
            });
        }
        let seeds = member_seeds(seed, x + y);
        let lower = seeds[..x]
            .iter()
            .map(|&s| ApufInstance::from_seed(n, s))
            .collect::<Result<Vec<_>>>()?;
        let upper = seeds[x..]
            .iter()
            .map(|&s| ApufInstance::from_seed(n + 1, s))
            .collect::<Result<Vec<_>>>()?;
        Self::new(lower, upper, interpose_pos)
    }

    pub fn n(&self) -> usize {
        self.lower[0].n()
    }

    pub fn xy(&self) -> (usize, usize) {
        (self.lower.len(), self.upper.len())
    }

    pub fn interpose_pos(&self) -> usize {
        self.interpose_pos
    }

    pub fn lower(&self) -> &[ApufInstance] {
        &self.lower
    }

    pub fn upper(&self) -> &[ApufInstance] {
        &self.upper
    }

    /// `c[1..i-1] ++ bit ++ c[i..n]`.
    pub fn interpose(&self, c: &Challenge, bit: Bit) -> Challenge {
        Challenge::new(interposed_bits(c.bits(), bit, self.interpose_pos)).expect("valid bits")
    }

    pub fn respond<R: Rng + ?Sized>(&self, c: &Challenge, noise: &NoiseModel, rng: &mut R) -> Result<Bit> {
        check_stages(self.n(), c)?;
        Ok(self.respond_bits(c.bits(), noise, rng))
    }

    pub(crate) fn respond_bits<R: Rng + ?Sized>(&self, bits: &[Bit], noise: &NoiseModel, rng: &mut R) -> Bit {
        let r_x = self
            .lower
            .iter()
            .fold(0, |acc, m| acc ^ m.respond_bits(bits, noise, rng));
        let upper_bits = interposed_bits(bits, r_x, self.interpose_pos);
        self.upper
            .iter()
            .fold(0, |acc, m| acc ^ m.respond_bits(&upper_bits, noise, rng))
    }
}

fn interposed_bits(bits: &[Bit], bit: Bit, pos: usize) -> Vec<Bit> {
    let mut out = Vec::with_capacity(bits.len() + 1);
    out.extend_from_slice(&bits[..pos - 1]);
    out.push(bit);
    out.extend_from_slice(&bits[pos - 1..]);
    out
}

fn check_stages(n: usize, c: &Challenge) -> Result<()> {
    if c.len() != n {
        return Err(Error::StageMismatch {
            expected: n,
            found: c.len(),
        });
    }
    Ok(())
}

/// Short architecture identifier, also stored in dataset headers.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ArchTag {
    Apuf,
    Ff,
    XorFf,
    OaxFf,
    Mn,
    Ipuf,
}

impl ArchTag {
    pub const ALL: [ArchTag; 6] = [
        ArchTag::Apuf,
        ArchTag::Ff,
        ArchTag::XorFf,
        ArchTag::OaxFf,
        ArchTag::Mn,
        ArchTag::Ipuf,
    ];

    pub fn code(self) -> u16 {
        match self {
            ArchTag::Apuf => 0,
            ArchTag::Ff => 1,
            ArchTag::XorFf => 2,
            ArchTag::OaxFf => 3,
            ArchTag::Mn => 4,
            ArchTag::Ipuf => 5,
        }
    }

    pub fn from_code(code: u16) -> Option<Self> {
        Self::ALL.into_iter().find(|t| t.code() == code)
    }

    pub fn name(self) -> &'static str {
        match self {
            ArchTag::Apuf => "apuf",
            ArchTag::Ff => "ff",
            ArchTag::XorFf => "xor-ff",
            ArchTag::OaxFf => "oax-ff",
            ArchTag::Mn => "mn",
            ArchTag::Ipuf => "ipuf",
        }
    }
}

impl fmt::Display for ArchTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ArchTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_lowercase().replace('_', "-");
        Self::ALL
            .into_iter()
            .find(|t| t.name() == norm)
            .ok_or_else(|| Error::UnknownArchitecture(s.to_string()))
    }
}

/// Any of the simulated architectures.
#[derive(Clone, Debug, PartialEq)]
pub enum PufInstance {
    Apuf(ApufInstance),
    Ff(FfApufInstance),
    XorFf(XorFfInstance),
    OaxFf(OaxFfInstance),
    Mn(MnApufInstance),
    Ipuf(IpufInstance),
}

impl PufInstance {
    pub fn n(&self) -> usize {
        match self {
            PufInstance::Apuf(p) => p.n(),
            PufInstance::Ff(p) => p.n(),
            PufInstance::XorFf(p) => p.n(),
            PufInstance::OaxFf(p) => p.n(),
            PufInstance::Mn(p) => p.n(),
            PufInstance::Ipuf(p) => p.n(),
        }
    }

    pub fn arch(&self) -> ArchTag {
        match self {
            PufInstance::Apuf(_) => ArchTag::Apuf,
            PufInstance::Ff(_) => ArchTag::Ff,
            PufInstance::XorFf(_) => ArchTag::XorFf,
            PufInstance::OaxFf(_) => ArchTag::OaxFf,
            PufInstance::Mn(_) => ArchTag::Mn,
            PufInstance::Ipuf(_) => ArchTag::Ipuf,
        }
    }

    /// Number of FF-driven challenge positions per chain (0 for non-FF designs).
    pub fn k(&self) -> usize {
        match self {
            PufInstance::Ff(p) => p.k(),
            PufInstance::XorFf(p) => p.members()[0].k(),
            PufInstance::OaxFf(p) => p.members().next().map_or(0, |m| m.k()),
            _ => 0,
        }
    }

    pub fn respond<R: Rng + ?Sized>(&self, c: &Challenge, noise: &NoiseModel, rng: &mut R) -> Result<Bit> {
        check_stages(self.n(), c)?;
        Ok(self.respond_bits(c.bits(), noise, rng))
    }

    /// Like [`respond`](Self::respond) with the stage count already checked.
    pub(crate) fn respond_bits<R: Rng + ?Sized>(&self, bits: &[Bit], noise: &NoiseModel, rng: &mut R) -> Bit {
        match self {
            PufInstance::Apuf(p) => p.respond_bits(bits, noise, rng),
            PufInstance::Ff(p) => p.respond_bits(bits, noise, rng),
            PufInstance::XorFf(p) => p.respond_bits(bits, noise, rng),
            PufInstance::OaxFf(p) => p.respond_bits(bits, noise, rng),
            PufInstance::Mn(p) => p.respond_bits(bits, noise, rng),
            PufInstance::Ipuf(p) => p.respond_bits(bits, noise, rng),
        }
    }

    /// Noise-free response; consumes no randomness.
    pub fn golden(&self, c: &Challenge) -> Result<Bit> {
        self.respond(c, &NoiseModel::NONE, &mut seeded_rng(0))
    }
}

impl From<ApufInstance> for PufInstance {
    fn from(p: ApufInstance) -> Self {
        PufInstance::Apuf(p)
    }
}

impl From<FfApufInstance> for PufInstance {
    fn from(p: FfApufInstance) -> Self {
        PufInstance::Ff(p)
    }
}

impl From<XorFfInstance> for PufInstance {
    fn from(p: XorFfInstance) -> Self {
        PufInstance::XorFf(p)
    }
}

impl From<OaxFfInstance> for PufInstance {
    fn from(p: OaxFfInstance) -> Self {
        PufInstance::OaxFf(p)
    }
}

impl From<MnApufInstance> for PufInstance {
    fn from(p: MnApufInstance) -> Self {
        PufInstance::Mn(p)
    }
}

impl From<IpufInstance> for PufInstance {
    fn from(p: IpufInstance) -> Self {
        PufInstance::Ipuf(p)
    }
}

/// Convenience: `n` random challenges from `rng`.
pub fn random_challenges<R: RngCore + ?Sized>(n: usize, count: usize, rng: &mut R) -> Vec<Challenge> {
    (0..count).map(|_| Challenge::random(n, rng)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::puf::{derive_weights, WeightVector};

    fn geom(s: &str) -> LoopGeometry {
        s.parse().unwrap()
    }

    #[test]
    fn named_configs_expand() {
        assert_eq!(LoopGeometry::named("Loop_B").unwrap().to_string(), "15→25,30");
        assert_eq!(LoopGeometry::named("d").unwrap().to_string(), "8→62;16→63;32→64");
        assert_eq!(LoopGeometry::named("loop_g").unwrap().k(), 6);
        let err = LoopGeometry::named("Loop_Z").unwrap_err();
        assert!(err.to_string().contains("Loop_A"), "{err}");
    }

    #[test]
    fn geometry_parsing_and_validation() {
        assert_eq!(geom("15->25, 30").end_positions(), vec![25, 30]);
        assert!("15→10".parse::<LoopGeometry>().is_err());
        assert!("15→25;16→25".parse::<LoopGeometry>().is_err());
        assert!("15".parse::<LoopGeometry>().is_err());
        assert!(geom("15→65").validate_for(64).is_err());
        assert!(geom("64→65").validate_for(64).is_err());
        assert!(geom("15→64").validate_for(64).is_ok());
        // Shared start written as two loops is merged.
        assert_eq!(geom("15→30;15→25"), geom("15→25,30"));
    }

    #[test]
    fn ff_without_loops_is_plain_apuf() {
        let ff = FfApufInstance::from_seed(64, &LoopGeometry::none(), 12).unwrap();
        let apuf = ApufInstance::from_seed(64, 12).unwrap();
        let mut rng = seeded_rng(4);
        for _ in 0..500 {
            let c = Challenge::random(64, &mut rng);
            assert_eq!(
                ff.respond(&c, &NoiseModel::NONE, &mut rng).unwrap(),
                apuf.respond(&c, &NoiseModel::NONE, &mut rng).unwrap()
            );
        }
    }

    #[test]
    fn ff_ignores_driven_bits() {
        let ff = FfApufInstance::from_seed(64, &LoopGeometry::named("Loop_C").unwrap(), 3).unwrap();
        let mut rng = seeded_rng(5);
        for _ in 0..200 {
            let c = Challenge::random(64, &mut rng);
            let mut bits = c.bits().to_vec();
            for e in [25, 30, 35] {
                bits[e - 1] ^= 1;
            }
            let c2 = Challenge::new(bits).unwrap();
            assert_eq!(ff.golden_bit(&c), ff.golden_bit(&c2));
        }
    }

    impl FfApufInstance {
        fn golden_bit(&self, c: &Challenge) -> Bit {
            self.respond(c, &NoiseModel::NONE, &mut seeded_rng(0)).unwrap()
        }
    }

    /// Two-branch linear model for a single loop `s → e`, computed with
    /// explicit O(n^2) parity products: the response is the sign test of
    /// `w · phi(c with bit e := b)` where `b` is the intermediate arbiter bit.
    fn two_branch(ff: &FfApufInstance, c: &Challenge) -> (Bit, [Bit; 2]) {
        let w = ff.base().weights().as_slice();
        let n = ff.n();
        let l = &ff.loops()[0];
        let s = l.arbiter_stage;
        let parity = |bits: &[u8], from: usize, to: usize| -> f64 {
            (from..to).map(|j| 1.0 - 2.0 * bits[j] as f64).product()
        };
        let mut partial = l.arbiter_bias;
        for i in 0..s {
            partial += w[i] * parity(c.bits(), i, s);
        }
        let inner = if partial < 0.0 { 1 } else { 0 };
        let branch = |b: u8| -> Bit {
            let mut bits = c.bits().to_vec();
            for &e in &l.end_positions {
                bits[e - 1] = b;
            }
            let delta: f64 = (0..=n).map(|i| w[i] * parity(&bits, i, n)).sum();
            if delta < 0.0 {
                1
            } else {
                0
            }
        };
        (inner, [branch(0), branch(1)])
    }

    #[test]
    fn ff_matches_two_branch_model_exhaustively_at_n8() {
        for seed in 0..10u64 {
            let g = geom("3→6");
            let ff = FfApufInstance::from_seed(8, &g, seed).unwrap();
            for v in 0u32..256 {
                let bits: Vec<u8> = (0..8).map(|j| ((v >> j) & 1) as u8).collect();
                let c = Challenge::new(bits).unwrap();
                let (inner, branches) = two_branch(&ff, &c);
                let (r, trace) = ff.trace(&c).unwrap();
                assert_eq!(trace, vec![inner]);
                assert_eq!(r, branches[inner as usize], "seed {seed} challenge {v:08b}");
            }
        }
    }

    #[test]
    fn xor_identities() {
        let g = LoopGeometry::named("Loop_A").unwrap();
        let a = FfApufInstance::from_seed(64, &g, 1).unwrap();
        let single = XorFfInstance::new(vec![a.clone()]).unwrap();
        let twin = XorFfInstance::new(vec![a.clone(), a.clone()]).unwrap();
        let mut rng = seeded_rng(2);
        for _ in 0..300 {
            let c = Challenge::random(64, &mut rng);
            assert_eq!(single.respond(&c, &NoiseModel::NONE, &mut rng).unwrap(), a.golden_bit(&c));
            assert_eq!(twin.respond(&c, &NoiseModel::NONE, &mut rng).unwrap(), 0);
        }
        assert!(XorFfInstance::new(vec![]).is_err());
    }

    #[test]
    fn oax_singletons_are_plain_xor() {
        let g = LoopGeometry::named("Loop_A").unwrap();
        let oax = OaxFfInstance::from_seed(64, &g, (1, 1, 1), 9).unwrap();
        let members: Vec<&FfApufInstance> = oax.members().collect();
        let mut rng = seeded_rng(7);
        for _ in 0..300 {
            let c = Challenge::random(64, &mut rng);
            let expected = members.iter().fold(0, |acc, m| acc ^ m.golden_bit(&c));
            assert_eq!(oax.respond(&c, &NoiseModel::NONE, &mut rng).unwrap(), expected);
        }
        assert!(OaxFfInstance::new(vec![], vec![], vec![]).is_err());
    }

    #[test]
    fn oax_or_and_groups() {
        let g = LoopGeometry::none();
        let oax = OaxFfInstance::from_seed(16, &g, (2, 2, 0), 21).unwrap();
        let m: Vec<&FfApufInstance> = oax.members().collect();
        let mut rng = seeded_rng(1);
        for _ in 0..300 {
            let c = Challenge::random(16, &mut rng);
            let r: Vec<Bit> = m.iter().map(|x| x.golden_bit(&c)).collect();
            let expected = (r[0] | r[1]) ^ (r[2] & r[3]);
            assert_eq!(oax.respond(&c, &NoiseModel::NONE, &mut rng).unwrap(), expected);
        }
    }

    #[test]
    fn mn_noop_overwrite_matches_main_chain() {
        let mn = MnApufInstance::from_seed(64, [32, 16, 8], 5).unwrap();
        let mut rng = seeded_rng(13);
        let mut checked = 0;
        for _ in 0..2_000 {
            let c = Challenge::random(64, &mut rng);
            let outs: Vec<Bit> = (0..3)
                .map(|i| {
                    let s = mn.aux()[i].n();
                    mn.aux()[i]
                        .respond(&Challenge::new(c.bits()[..s].to_vec()).unwrap(), &NoiseModel::NONE, &mut rng)
                        .unwrap()
                })
                .collect();
            if (0..3).all(|i| outs[i] == c.bits()[mn.driven_index(i)]) {
                checked += 1;
                assert_eq!(
                    mn.respond(&c, &NoiseModel::NONE, &mut rng).unwrap(),
                    mn.main().respond(&c, &NoiseModel::NONE, &mut rng).unwrap()
                );
            }
        }
        assert!(checked > 100);
    }

    #[test]
    fn mn_rejects_oversized_aux() {
        assert!(matches!(
            MnApufInstance::from_seed(16, [32, 8, 4], 1),
            Err(Error::SubsetOutOfRange(_))
        ));
    }

    #[test]
    fn ipuf_with_constant_lower_reduces_to_upper() {
        let n = 64;
        let mut w = vec![0.0; n + 1];
        w[n] = 1e6;
        let lower = ApufInstance::with_weights(WeightVector::new(w).unwrap(), 0);
        let upper: Vec<ApufInstance> = (0..3).map(|s| ApufInstance::from_seed(n + 1, 100 + s).unwrap()).collect();
        let ipuf = IpufInstance::new(vec![lower], upper.clone(), 33).unwrap();
        let mut rng = seeded_rng(1);
        for _ in 0..300 {
            let c = Challenge::random(n, &mut rng);
            let c_up = ipuf.interpose(&c, 0);
            assert_eq!(c_up.len(), n + 1);
            assert_eq!(c_up.bits()[32], 0);
            let mut removed = c_up.bits().to_vec();
            removed.remove(32);
            assert_eq!(removed, c.bits());
            let expected = upper
                .iter()
                .fold(0, |acc, u| acc ^ u.respond(&c_up, &NoiseModel::NONE, &mut rng).unwrap());
            assert_eq!(ipuf.respond(&c, &NoiseModel::NONE, &mut rng).unwrap(), expected);
        }
    }

    #[test]
    fn ipuf_position_checks() {
        assert!(matches!(
            IpufInstance::from_seed(64, 1, 1, 0, 1),
            Err(Error::InterposeOutOfRange { .. })
        ));
        assert!(IpufInstance::from_seed(64, 1, 1, 66, 1).is_err());
        assert!(IpufInstance::from_seed(64, 1, 1, 65, 1).is_ok());
    }

    #[test]
    fn member_seed_schedule_is_stable() {
        assert_eq!(member_seeds(5, 3), member_seeds(5, 6)[..3].to_vec());
        let w = derive_weights(member_seeds(5, 1)[0], 64, 0.0, 1.0).unwrap();
        let xor = XorFfInstance::from_seed(64, &LoopGeometry::none(), 2, 5).unwrap();
        assert_eq!(xor.members()[0].base().weights(), &w);
    }

    #[test]
    fn arch_tag_roundtrip() {
        for t in ArchTag::ALL {
            assert_eq!(ArchTag::from_code(t.code()), Some(t));
            assert_eq!(t.name().parse::<ArchTag>().unwrap(), t);
        }
        assert!("muxpuf".parse::<ArchTag>().is_err());
    }
}
