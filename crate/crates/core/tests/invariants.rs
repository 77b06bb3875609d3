use copuf::dataset::{generate_crps, read_crps, write_crps, CrpSet};
use copuf::experiment::{ArchSpec, InstanceDescriptor};
use copuf::features::FeatureMap;
use copuf::metrics::{measure_ber, measure_uniformity, BerReference};
use copuf::mlp::{self, MlpConfig};
use copuf::{Challenge, Error, IpufInstance, NoiseModel};
use proptest::prelude::*;
use rand::SeedableRng;

#[test]
fn xor_ber_grows_with_member_count() {
    let noise = NoiseModel::calibrated(0.05).unwrap();
    let bers: Vec<f64> = (1..=4)
        .map(|z| {
            let puf = ArchSpec::xor_ff("Loop_B", z).build(3).unwrap();
            measure_ber(&puf, &noise, 10_000, 11, 8, BerReference::Golden).unwrap().ber
        })
        .collect();
    assert!(bers.windows(2).all(|w| w[0] <= w[1]), "{bers:?}");
}

#[test]
fn xor_reduces_bias() {
    let mut better = 0;
    for seed in 0..10 {
        let bias = |z| {
            let puf = ArchSpec::xor_ff("Loop_B", z).build(seed).unwrap();
            (measure_uniformity(&puf, 10_000, seed + 100).unwrap() - 0.5).abs()
        };
        better += (bias(4) <= bias(1)) as usize;
    }
    assert!(better >= 8, "z=4 less biased on only {better}/10 seeds");
}

proptest! {
    #[test]
    fn interposed_challenge_has_one_extra_bit(seed in any::<u64>(), pos in 1usize..=65, bit in 0u8..2) {
        let p = IpufInstance::from_seed(64, 2, 2, pos, 1).unwrap();
        let c = Challenge::random(64, &mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
        let up = p.interpose(&c, bit);
        prop_assert_eq!(up.len(), 65);
        prop_assert_eq!(up.bits()[pos - 1], bit);
        let mut back = up.bits().to_vec();
        back.remove(pos - 1);
        prop_assert_eq!(&back[..], c.bits());
    }
}

#[test]
fn descriptor_to_dataset_to_attack() {
    let dir = tempfile::tempdir().unwrap();
    let desc = InstanceDescriptor::new(ArchSpec::ff("Loop_B"), 11, 0.05).unwrap();
    desc.save(dir.path().join("i.toml")).unwrap();
    let desc = InstanceDescriptor::load(dir.path().join("i.toml")).unwrap();
    let puf = desc.build().unwrap();
    let set = generate_crps(&puf, 8_000, &NoiseModel::NONE, 2).unwrap();
    write_crps(&set, dir.path().join("d.crp")).unwrap();
    let set = read_crps(dir.path().join("d.crp")).unwrap();
    let (tr, va, te) = set.split(6_000, 1_000, 1_000).unwrap();
    let map = FeatureMap::for_instance(&puf).unwrap();
    assert_eq!(map.dim(), 62);
    let mut cfg = MlpConfig::three_layer(map.dim(), mlp::choose_l(desc.arch.l_target()));
    cfg.epochs = 30;
    let (_, report) = mlp::attack(&cfg, &map, &tr, &va, &te).unwrap();
    assert!(report.test_accuracy > 0.75, "{}", report.test_accuracy);
    assert_eq!(report.fingerprints.test, te.fingerprint());
}

#[test]
fn corrupted_datasets_are_rejected() {
    let puf = ArchSpec::Apuf { n: 32 }.build(1).unwrap();
    let bytes = generate_crps(&puf, 50, &NoiseModel::NONE, 1).unwrap().to_bytes();

    let mut bad_header = bytes.clone();
    bad_header[20] ^= 1;
    assert!(matches!(CrpSet::from_bytes(&bad_header), Err(Error::Checksum { .. })));

    assert!(matches!(
        CrpSet::from_bytes(&bytes[..bytes.len() - 3]),
        Err(Error::Truncated { .. })
    ));

    let mut bad_version = bytes.clone();
    bad_version[8] = 9;
    assert!(matches!(CrpSet::from_bytes(&bad_version), Err(Error::VersionMismatch(_))));
}
