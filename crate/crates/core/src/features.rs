//! Challenge-to-feature transforms used as attack inputs.
//!
//! Features are ±1 values stored as `i8`. The plain map is the parity vector
//! without its constant last entry. The FF map removes the driven bits, splits
//! the remaining challenge into the segments between them and concatenates the
//! parity vectors of the segments, giving `n - k` features.

use serde::{Deserialize, Serialize};

use crate::composite::{LoopGeometry, PufInstance};
use crate::error::{Error, Result};
use crate::puf::{suffix_parity_into, Bit, Challenge};

/// Parity vector of `c` without the constant entry (dimension `n`).
pub fn plain_features(c: &Challenge) -> Vec<i8> {
    let mut out = vec![0i8; c.len()];
    suffix_parity_into(c.bits(), &mut out);
    out
}

/// Segment-wise parity features for an FF chain driving `end_positions`
/// (1-based). Dimension `n - k`.
pub fn ff_features(c: &Challenge, end_positions: &[usize]) -> Result<Vec<i8>> {
    let map = FeatureMap::segmented(c.len(), end_positions)?;
    let mut out = vec![0i8; map.dim()];
    map.write(c.bits(), &mut out);
    Ok(out)
}

/// A feature transform fixed for one stage count.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureMap {
    n: usize,
    /// Half-open 0-based ranges of challenge bits, one per segment.
    segments: Vec<(usize, usize)>,
}

impl FeatureMap {
    pub fn plain(n: usize) -> Self {
        Self {
            n,
            segments: vec![(0, n)],
        }
    }

    pub fn segmented(n: usize, end_positions: &[usize]) -> Result<Self> {
        let mut ends = end_positions.to_vec();
        ends.sort_unstable();
        ends.dedup();
        if ends.len() != end_positions.len() {
            return Err(Error::InvalidLoop("duplicate end positions".into()));
        }
        if let Some(&e) = ends.iter().find(|&&e| e == 0 || e > n) {
            return Err(Error::InvalidLoop(format!("end position {e} not in 1..={n}")));
        }
        let mut segments = Vec::with_capacity(ends.len() + 1);
        let mut start = 0;
        for e in ends {
            segments.push((start, e - 1));
            start = e;
        }
        segments.push((start, n));
        Ok(Self { n, segments })
    }

    pub fn for_geometry(n: usize, geometry: &LoopGeometry) -> Result<Self> {
        Self::segmented(n, &geometry.end_positions())
    }

    /// The transform an attacker who knows the architecture geometry would use.
    pub fn for_instance(puf: &PufInstance) -> Result<Self> {
        let n = puf.n();
        match puf {
            PufInstance::Ff(p) => Self::for_geometry(n, p.geometry()),
            PufInstance::XorFf(p) => Self::for_geometry(n, p.members()[0].geometry()),
            PufInstance::OaxFf(p) => match p.members().next() {
                Some(m) => Self::for_geometry(n, m.geometry()),
                None => Ok(Self::plain(n)),
            },
            PufInstance::Apuf(_) | PufInstance::Mn(_) | PufInstance::Ipuf(_) => Ok(Self::plain(n)),
        }
    }

    /// Stage count of the challenges this map accepts.
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.segments.iter().map(|(a, b)| b - a).sum()
    }

    /// Writes the features of `bits` into `out` (`out.len() == dim()`).
    pub fn write(&self, bits: &[Bit], out: &mut [i8]) {
        debug_assert_eq!(bits.len(), self.n);
        debug_assert_eq!(out.len(), self.dim());
        let mut off = 0;
        for &(a, b) in &self.segments {
            let len = b - a;
            suffix_parity_into(&bits[a..b], &mut out[off..off + len]);
            off += len;
        }
    }

    pub fn apply(&self, c: &Challenge) -> Result<Vec<i8>> {
        if c.len() != self.n {
            return Err(Error::StageMismatch {
                expected: self.n,
                found: c.len(),
            });
        }
        let mut out = vec![0i8; self.dim()];
        self.write(c.bits(), &mut out);
        Ok(out)
    }
}

/// Row-major matrix of ±1 features with one label per row.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct FeatureMatrix {
    dim: usize,
    data: Vec<i8>,
    labels: Vec<Bit>,
}

impl FeatureMatrix {
    pub fn with_capacity(dim: usize, rows: usize) -> Self {
        Self {
            dim,
            data: Vec::with_capacity(dim * rows),
            labels: Vec::with_capacity(rows),
        }
    }

    pub fn push(&mut self, features: &[i8], label: Bit) -> Result<()> {
        if features.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: features.len(),
            });
        }
        self.data.extend_from_slice(features);
        self.labels.push(label);
        Ok(())
    }

    pub(crate) fn push_with<F: FnOnce(&mut [i8])>(&mut self, fill: F, label: Bit) {
        let start = self.data.len();
        self.data.resize(start + self.dim, 0);
        fill(&mut self.data[start..]);
        self.labels.push(label);
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rows(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[i8] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    #[inline]
    pub fn label(&self, i: usize) -> Bit {
        self.labels[i]
    }

    pub fn labels(&self) -> &[Bit] {
        &self.labels
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::composite::FfApufInstance;
    use crate::puf::{parity_transform, seeded_rng};
    use proptest::prelude::*;

    #[test]
    fn plain_matches_parity_vector() {
        let c = Challenge::from_bit_str("0110").unwrap();
        let phi = parity_transform(&c);
        let f = plain_features(&c);
        assert_eq!(f.len(), 4);
        for (a, b) in f.iter().zip(phi.as_slice()) {
            assert_eq!(*a as f64, *b);
        }
    }

    #[test]
    fn ff_feature_dims() {
        let c = Challenge::zeros(64);
        let d = |g: &str| ff_features(&c, &LoopGeometry::named(g).unwrap().end_positions()).unwrap().len();
        assert_eq!(d("Loop_A"), 63);
        assert_eq!(d("Loop_B"), 62);
        assert_eq!(d("Loop_D"), 61);
        assert_eq!(d("Loop_G"), 58);
    }

    #[test]
    fn ff_features_by_hand() {
        // n = 6, end position 4: segments c1..c3 and c5..c6.
        let c = Challenge::from_bit_str("101011").unwrap();
        let f = ff_features(&c, &[4]).unwrap();
        // Segment 1 bits 1,0,1 -> suffix parities (+1, -1, -1).
        // Segment 2 bits 1,1 -> (+1, -1).
        assert_eq!(f, vec![1, -1, -1, 1, -1]);
    }

    #[test]
    fn ff_features_reject_bad_positions() {
        let c = Challenge::zeros(8);
        assert!(ff_features(&c, &[0]).is_err());
        assert!(ff_features(&c, &[9]).is_err());
        assert!(ff_features(&c, &[3, 3]).is_err());
    }

    #[test]
    fn instance_map_uses_member_geometry() {
        let g = LoopGeometry::named("Loop_C").unwrap();
        let ff: PufInstance = FfApufInstance::from_seed(64, &g, 1).unwrap().into();
        assert_eq!(FeatureMap::for_instance(&ff).unwrap().dim(), 61);
    }

    #[test]
    fn matrix_rejects_wrong_width() {
        let mut m = FeatureMatrix::with_capacity(3, 2);
        m.push(&[1, -1, 1], 1).unwrap();
        assert!(m.push(&[1, 1], 0).is_err());
        assert_eq!(m.rows(), 1);
        assert_eq!(m.row(0), &[1, -1, 1]);
    }

    proptest! {
        #[test]
        fn dim_is_n_minus_k(n in 2usize..=96, raw in prop::collection::btree_set(1usize..=96, 0..6)) {
            let ends: Vec<usize> = raw.into_iter().filter(|&e| e <= n).collect();
            prop_assume!(ends.len() < n);
            let c = Challenge::random(n, &mut seeded_rng(n as u64));
            let f = ff_features(&c, &ends).unwrap();
            prop_assert_eq!(f.len(), n - ends.len());
            prop_assert!(f.iter().all(|&v| v == 1 || v == -1));
        }

        #[test]
        fn driven_bits_do_not_matter(seed in any::<u64>(), flip in prop::sample::select(vec![25usize, 30])) {
            let c = Challenge::random(64, &mut seeded_rng(seed));
            let mut bits = c.bits().to_vec();
            bits[flip - 1] ^= 1;
            let c2 = Challenge::new(bits).unwrap();
            prop_assert_eq!(ff_features(&c, &[25, 30]).unwrap(), ff_features(&c2, &[25, 30]).unwrap());
        }

        #[test]
        fn flip_affects_only_its_segment_prefix(seed in any::<u64>(), j in 0usize..64) {
            // Flipping a non-driven bit changes exactly the features of its own
            // segment that sit at or before it.
            let ends = [25usize, 30];
            prop_assume!(!ends.contains(&(j + 1)));
            let c = Challenge::random(64, &mut seeded_rng(seed));
            let mut bits = c.bits().to_vec();
            bits[j] ^= 1;
            let c2 = Challenge::new(bits).unwrap();
            let map = FeatureMap::segmented(64, &ends).unwrap();
            let (a, b) = (map.apply(&c).unwrap(), map.apply(&c2).unwrap());
            let changed = a.iter().zip(&b).filter(|(x, y)| x != y).count();
            let seg_start = if j < 24 { 0 } else if j < 29 { 25 } else { 30 };
            prop_assert_eq!(changed, j - seg_start + 1);
        }
    }
}
