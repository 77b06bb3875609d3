//! CRP datasets: seeded generation, splitting and a compact binary format.
//!
//! File layout (little-endian):
//!
//! ```text
//! offset  size  field
//!      0     8  magic "COPUFCRP"
//!      8     2  format version
//!     10     2  architecture code
//!     12     2  n
//!     14     2  k
//!     16     8  instance seed
//!     24     8  noise sigma (f64, raw per-weight deviation)
//!     32     8  record count
//!     40     4  CRC-32 of bytes 0..40
//!     44     -  records: ceil(n/8) challenge bytes, then 1 response byte
//! ```
//!
//! Challenge bit `j` (0-based, i.e. stage `j + 1`) lives in byte `j / 8` at
//! bit `j % 8`.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::composite::{ArchTag, PufInstance};
use crate::error::{Error, Result};
use crate::features::{FeatureMap, FeatureMatrix};
use crate::puf::{sub_stream, Bit, Challenge, NoiseModel};

pub const MAGIC: [u8; 8] = *b"COPUFCRP";
pub const FORMAT_VERSION: u16 = 1;
pub const HEADER_SIZE: usize = 44;

/// Records generated per independent random stream.
const GEN_CHUNK: usize = 4096;

/// Bytes per record for an `n`-stage challenge.
pub fn record_size(n: usize) -> usize {
    n.div_ceil(8) + 1
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CrpHeader {
    pub version: u16,
    pub arch: ArchTag,
    pub n: usize,
    pub k: usize,
    pub instance_seed: u64,
    pub sigma: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CrpRecord {
    pub challenge: Challenge,
    pub response: Bit,
}

/// Records are kept packed exactly as in the file.
#[derive(Clone, Debug, PartialEq)]
pub struct CrpSet {
    header: CrpHeader,
    data: Vec<u8>,
}

impl CrpSet {
    pub fn new(header: CrpHeader) -> Self {
        Self { header, data: Vec::new() }
    }

    pub fn with_instance_seed(mut self, seed: u64) -> Self {
        self.header.instance_seed = seed;
        self
    }

    pub fn header(&self) -> &CrpHeader {
        &self.header
    }

    pub fn n(&self) -> usize {
        self.header.n
    }

    fn rec(&self) -> usize {
        record_size(self.header.n)
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.rec()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn push(&mut self, challenge: &Challenge, response: Bit) -> Result<()> {
        if challenge.len() != self.header.n {
            return Err(Error::StageMismatch {
                expected: self.header.n,
                found: challenge.len(),
            });
        }
        if response > 1 {
            return Err(Error::InvalidParameter(format!("response {response} is not a bit")));
        }
        pack_record(challenge.bits(), response, &mut self.data);
        Ok(())
    }

    pub fn challenge(&self, i: usize) -> Challenge {
        let mut bits = vec![0; self.header.n];
        self.unpack_into(i, &mut bits);
        Challenge::new(bits).expect("packed bits are valid")
    }

    pub fn response(&self, i: usize) -> Bit {
        self.data[(i + 1) * self.rec() - 1]
    }

    pub fn record(&self, i: usize) -> CrpRecord {
        CrpRecord {
            challenge: self.challenge(i),
            response: self.response(i),
        }
    }

    pub fn records(&self) -> impl Iterator<Item = CrpRecord> + '_ {
        (0..self.len()).map(|i| self.record(i))
    }

    pub fn responses(&self) -> Vec<Bit> {
        (0..self.len()).map(|i| self.response(i)).collect()
    }

    fn unpack_into(&self, i: usize, bits: &mut [Bit]) {
        let rec = &self.data[i * self.rec()..(i + 1) * self.rec()];
        for (j, b) in bits.iter_mut().enumerate() {
            *b = (rec[j / 8] >> (j % 8)) & 1;
        }
    }

    /// Contiguous sub-range `[start, start + len)` as a new set.
    pub fn slice(&self, start: usize, len: usize) -> Result<Self> {
        if start + len > self.len() {
            return Err(Error::InsufficientRecords {
                requested: start + len,
                available: self.len(),
            });
        }
        let r = self.rec();
        Ok(Self {
            header: self.header,
            data: self.data[start * r..(start + len) * r].to_vec(),
        })
    }

    /// Disjoint contiguous train / validation / test slices in generation order.
    pub fn split(&self, train: usize, val: usize, test: usize) -> Result<(Self, Self, Self)> {
        let requested = train + val + test;
        if requested > self.len() {
            return Err(Error::InsufficientRecords {
                requested,
                available: self.len(),
            });
        }
        Ok((
            self.slice(0, train)?,
            self.slice(train, val)?,
            self.slice(train + val, test)?,
        ))
    }

    /// Feature rows computed on the fly from the stored challenges.
    pub fn features(&self, map: &FeatureMap) -> Result<FeatureMatrix> {
        if map.n() != self.header.n {
            return Err(Error::StageMismatch {
                expected: map.n(),
                found: self.header.n,
            });
        }
        let mut m = FeatureMatrix::with_capacity(map.dim(), self.len());
        let mut bits = vec![0; self.header.n];
        for i in 0..self.len() {
            self.unpack_into(i, &mut bits);
            m.push_with(|row| map.write(&bits, row), self.response(i));
        }
        Ok(m)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_SIZE + self.data.len());
        out.extend_from_slice(&MAGIC);
        out.extend_from_slice(&self.header.version.to_le_bytes());
        out.extend_from_slice(&self.header.arch.code().to_le_bytes());
        out.extend_from_slice(&(self.header.n as u16).to_le_bytes());
        out.extend_from_slice(&(self.header.k as u16).to_le_bytes());
        out.extend_from_slice(&self.header.instance_seed.to_le_bytes());
        out.extend_from_slice(&self.header.sigma.to_le_bytes());
        out.extend_from_slice(&(self.len() as u64).to_le_bytes());
        let crc = crc32fast::hash(&out);
        out.extend_from_slice(&crc.to_le_bytes());
        out.extend_from_slice(&self.data);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < HEADER_SIZE {
            return Err(Error::Truncated {
                expected: HEADER_SIZE as u64,
                found: bytes.len() as u64,
            });
        }
        if bytes[..8] != MAGIC {
            return Err(Error::VersionMismatch("bad magic, not a CRP dataset".into()));
        }
        let u16_at = |o: usize| u16::from_le_bytes([bytes[o], bytes[o + 1]]);
        let u64_at = |o: usize| u64::from_le_bytes(bytes[o..o + 8].try_into().expect("8 bytes"));
        let version = u16_at(8);
        if version != FORMAT_VERSION {
            return Err(Error::VersionMismatch(format!(
                "file version {version}, supported {FORMAT_VERSION}"
            )));
        }
        let stored = u32::from_le_bytes(bytes[40..44].try_into().expect("4 bytes"));
        let computed = crc32fast::hash(&bytes[..40]);
        if stored != computed {
            return Err(Error::Checksum { stored, computed });
        }
        let arch = ArchTag::from_code(u16_at(10))
            .ok_or_else(|| Error::UnknownArchitecture(format!("code {}", u16_at(10))))?;
        let n = u16_at(12) as usize;
        if n == 0 {
            return Err(Error::ZeroStages);
        }
        let header = CrpHeader {
            version,
            arch,
            n,
            k: u16_at(14) as usize,
            instance_seed: u64_at(16),
            sigma: f64::from_le_bytes(bytes[24..32].try_into().expect("8 bytes")),
        };
        let count = u64_at(32);
        let expected = HEADER_SIZE as u64 + count * record_size(n) as u64;
        if bytes.len() as u64 != expected {
            return Err(Error::Truncated {
                expected,
                found: bytes.len() as u64,
            });
        }
        let data = bytes[HEADER_SIZE..].to_vec();
        let rec = record_size(n);
        if let Some(i) = (0..count as usize).find(|i| data[(i + 1) * rec - 1] > 1) {
            return Err(Error::InvalidParameter(format!("record {i} has a non-bit response")));
        }
        Ok(Self { header, data })
    }

    /// SHA-256 of the serialized set, hex encoded.
    pub fn fingerprint(&self) -> String {
        hex::encode(Sha256::digest(self.to_bytes()))
    }
}

fn pack_record(bits: &[Bit], response: Bit, out: &mut Vec<u8>) {
    let start = out.len();
    out.resize(start + record_size(bits.len()), 0);
    for (j, &b) in bits.iter().enumerate() {
        out[start + j / 8] |= b << (j % 8);
    }
    *out.last_mut().expect("non-empty record") = response;
}

/// `count` uniformly random challenges, each answered once under `noise`.
///
/// Chunk `i` of 4096 records draws challenges from ChaCha stream `2i` and
/// noise from stream `2i + 1` of `seed`, so the output does not depend on the
/// thread count and a noisy set shares its challenges with the noise-free set
/// of the same seed.
pub fn generate_crps(puf: &PufInstance, count: usize, noise: &NoiseModel, seed: u64) -> Result<CrpSet> {
    if count == 0 {
        return Err(Error::InvalidParameter("count must be >= 1".into()));
    }
    let n = puf.n();
    let chunks = count.div_ceil(GEN_CHUNK);
    let parts: Vec<Vec<u8>> = (0..chunks)
        .into_par_iter()
        .map(|chunk| {
            let len = GEN_CHUNK.min(count - chunk * GEN_CHUNK);
            let mut crng = sub_stream(seed, 2 * chunk as u64);
            let mut nrng = sub_stream(seed, 2 * chunk as u64 + 1);
            let mut buf = Vec::with_capacity(len * record_size(n));
            for _ in 0..len {
                let c = Challenge::random(n, &mut crng);
                let r = puf.respond_bits(c.bits(), noise, &mut nrng);
                pack_record(c.bits(), r, &mut buf);
            }
            buf
        })
        .collect();
    Ok(CrpSet {
        header: CrpHeader {
            version: FORMAT_VERSION,
            arch: puf.arch(),
            n,
            k: puf.k(),
            instance_seed: instance_seed(puf),
            sigma: noise.sigma(),
        },
        data: parts.concat(),
    })
}

fn instance_seed(puf: &PufInstance) -> u64 {
    match puf {
        PufInstance::Apuf(p) => p.seed(),
        PufInstance::Ff(p) => p.base().seed(),
        // Composite members carry derived seeds; callers that know the master
        // seed record it with `CrpSet::with_instance_seed`.
        _ => 0,
    }
}

pub fn write_crps(set: &CrpSet, path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    w.write_all(&set.to_bytes())?;
    w.flush()?;
    Ok(())
}

pub fn read_crps(path: impl AsRef<Path>) -> Result<CrpSet> {
    CrpSet::from_bytes(&fs::read(path)?)
}

/// CSV with a `challenge,response` header; challenges as 0/1 strings, stage 1 first.
pub fn write_csv(set: &CrpSet, path: impl AsRef<Path>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["challenge", "response"])?;
    for i in 0..set.len() {
        w.write_record([set.challenge(i).to_bit_string(), set.response(i).to_string()])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::composite::{FfApufInstance, LoopGeometry};
    use crate::puf::ApufInstance;

    fn ff_set(count: usize, seed: u64) -> CrpSet {
        let ff: PufInstance = FfApufInstance::from_seed(64, &LoopGeometry::named("Loop_B").unwrap(), 7)
            .unwrap()
            .into();
        generate_crps(&ff, count, &NoiseModel::NONE, seed).unwrap()
    }

    #[test]
    fn bit_packing_layout() {
        let mut bits = vec![0u8; 10];
        bits[0] = 1;
        bits[9] = 1;
        let mut set = CrpSet::new(CrpHeader {
            version: FORMAT_VERSION,
            arch: ArchTag::Apuf,
            n: 10,
            k: 0,
            instance_seed: 0,
            sigma: 0.0,
        });
        set.push(&Challenge::new(bits.clone()).unwrap(), 1).unwrap();
        let bytes = set.to_bytes();
        assert_eq!(&bytes[HEADER_SIZE..], &[0b0000_0001, 0b0000_0010, 1]);
        assert_eq!(set.challenge(0).bits(), &bits[..]);
    }

    #[test]
    fn header_fields_are_little_endian() {
        let set = ff_set(3, 1);
        let b = set.to_bytes();
        assert_eq!(&b[..8], b"COPUFCRP");
        assert_eq!(u16::from_le_bytes([b[12], b[13]]), 64);
        assert_eq!(u16::from_le_bytes([b[14], b[15]]), 2);
        assert_eq!(u64::from_le_bytes(b[32..40].try_into().unwrap()), 3);
        assert_eq!(b.len(), 44 + 3 * 9);
    }

    #[test]
    fn roundtrip_and_reevaluation() {
        let ff: PufInstance = FfApufInstance::from_seed(64, &LoopGeometry::named("Loop_B").unwrap(), 7)
            .unwrap()
            .into();
        let set = generate_crps(&ff, 1_000, &NoiseModel::NONE, 3).unwrap();
        let back = CrpSet::from_bytes(&set.to_bytes()).unwrap();
        assert_eq!(back, set);
        for rec in set.records() {
            assert_eq!(ff.golden(&rec.challenge).unwrap(), rec.response);
        }
    }

    #[test]
    fn corrupted_files_are_rejected() {
        let good = ff_set(10, 2).to_bytes();

        let mut bad = good.clone();
        bad[0] = b'X';
        assert!(matches!(CrpSet::from_bytes(&bad), Err(Error::VersionMismatch(_))));

        let mut bad = good.clone();
        bad[16] ^= 1;
        assert!(matches!(CrpSet::from_bytes(&bad), Err(Error::Checksum { .. })));

        assert!(matches!(
            CrpSet::from_bytes(&good[..good.len() - 1]),
            Err(Error::Truncated { .. })
        ));
        assert!(matches!(CrpSet::from_bytes(&good[..20]), Err(Error::Truncated { .. })));
    }

    #[test]
    fn split_is_contiguous() {
        let set = ff_set(100, 4);
        let (a, b, c) = set.split(60, 30, 10).unwrap();
        assert_eq!((a.len(), b.len(), c.len()), (60, 30, 10));
        assert_eq!(b.record(0), set.record(60));
        assert_eq!(c.record(9), set.record(99));
        let (a, b, c) = set.split(100, 0, 0).unwrap();
        assert_eq!((a.len(), b.len(), c.len()), (100, 0, 0));
        assert!(matches!(set.split(90, 10, 1), Err(Error::InsufficientRecords { .. })));
    }

    #[test]
    fn noisy_set_shares_challenges() {
        let p: PufInstance = ApufInstance::from_seed(64, 1).unwrap().into();
        let clean = generate_crps(&p, 5_000, &NoiseModel::NONE, 9).unwrap();
        let noisy = generate_crps(&p, 5_000, &NoiseModel::calibrated(0.05).unwrap(), 9).unwrap();
        let mut diff = 0;
        for i in 0..clean.len() {
            assert_eq!(clean.challenge(i), noisy.challenge(i));
            diff += (clean.response(i) != noisy.response(i)) as usize;
        }
        assert!(diff > 0 && diff < 1_000, "{diff}");
    }

    #[test]
    fn generation_ignores_thread_count() {
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| ff_set(10_000, 5).to_bytes())
        };
        assert_eq!(run(1), run(4));
    }

    #[test]
    fn features_follow_records() {
        let set = ff_set(50, 6);
        let map = FeatureMap::segmented(64, &[25, 30]).unwrap();
        let m = set.features(&map).unwrap();
        assert_eq!((m.rows(), m.dim()), (50, 62));
        assert_eq!(m.row(17), &map.apply(&set.challenge(17)).unwrap()[..]);
        assert_eq!(m.label(17), set.response(17));
        assert!(set.features(&FeatureMap::plain(32)).is_err());
    }
}
