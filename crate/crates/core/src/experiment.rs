//! Architecture descriptors, instance files, table presets and single-run
//! drivers shared by the CLI and the acceptance suite.

use std::fmt;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::composite::{
    ArchTag, FfApufInstance, IpufInstance, LoopGeometry, MnApufInstance, OaxFfInstance, PufInstance, XorFfInstance,
};
use crate::dataset::{generate_crps, CrpSet};
use crate::error::{Error, Result};
use crate::features::FeatureMap;
use crate::metrics::{self, BerReference, MetricsReport};
use crate::mlp::{self, AttackReport, LTarget, MlpConfig};
use crate::puf::{ApufInstance, NoiseModel, NOISE_CALIBRATION};

/// How an auxiliary chain of an Mn design picks its challenge bits.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SubsetRule {
    /// Auxiliary of size `S` reads `c[1..=S]`.
    #[default]
    Prefix,
}

/// Architecture and its structural parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "arch", rename_all = "kebab-case")]
pub enum ArchSpec {
    Apuf {
        n: usize,
    },
    Ff {
        n: usize,
        loops: LoopGeometry,
    },
    XorFf {
        n: usize,
        loops: LoopGeometry,
        z: usize,
    },
    OaxFf {
        n: usize,
        loops: LoopGeometry,
        x: usize,
        y: usize,
        z: usize,
    },
    Mn {
        n: usize,
        sizes: [usize; 3],
        #[serde(default)]
        subset_rule: SubsetRule,
    },
    Ipuf {
        n: usize,
        x: usize,
        y: usize,
        interpose: usize,
    },
}

/// Middle of the challenge, e.g. 33 for `n = 64`.
pub fn default_interpose(n: usize) -> usize {
    n / 2 + 1
}

impl ArchSpec {
    pub fn ff(loops: &str) -> Self {
        ArchSpec::Ff {
            n: 64,
            loops: LoopGeometry::resolve(loops).expect("valid loop spec"),
        }
    }

    pub fn xor_ff(loops: &str, z: usize) -> Self {
        ArchSpec::XorFf {
            n: 64,
            loops: LoopGeometry::resolve(loops).expect("valid loop spec"),
            z,
        }
    }

    pub fn oax_ff(loops: &str, (x, y, z): (usize, usize, usize)) -> Self {
        ArchSpec::OaxFf {
            n: 64,
            loops: LoopGeometry::resolve(loops).expect("valid loop spec"),
            x,
            y,
            z,
        }
    }

    pub fn m64() -> Self {
        ArchSpec::Mn {
            n: 64,
            sizes: [32, 16, 8],
            subset_rule: SubsetRule::Prefix,
        }
    }

    pub fn ipuf(x: usize, y: usize) -> Self {
        ArchSpec::Ipuf {
            n: 64,
            x,
            y,
            interpose: default_interpose(64),
        }
    }

    /// Same architecture with a different stage count.
    pub fn with_n(mut self, stages: usize) -> Self {
        match &mut self {
            ArchSpec::Apuf { n }
            | ArchSpec::Ff { n, .. }
            | ArchSpec::XorFf { n, .. }
            | ArchSpec::OaxFf { n, .. }
            | ArchSpec::Mn { n, .. }
            | ArchSpec::Ipuf { n, .. } => *n = stages,
        }
        self
    }

    pub fn n(&self) -> usize {
        match self {
            ArchSpec::Apuf { n }
            | ArchSpec::Ff { n, .. }
            | ArchSpec::XorFf { n, .. }
            | ArchSpec::OaxFf { n, .. }
            | ArchSpec::Mn { n, .. }
            | ArchSpec::Ipuf { n, .. } => *n,
        }
    }

    pub fn tag(&self) -> ArchTag {
        match self {
            ArchSpec::Apuf { .. } => ArchTag::Apuf,
            ArchSpec::Ff { .. } => ArchTag::Ff,
            ArchSpec::XorFf { .. } => ArchTag::XorFf,
            ArchSpec::OaxFf { .. } => ArchTag::OaxFf,
            ArchSpec::Mn { .. } => ArchTag::Mn,
            ArchSpec::Ipuf { .. } => ArchTag::Ipuf,
        }
    }

    pub fn loops(&self) -> Option<&LoopGeometry> {
        match self {
            ArchSpec::Ff { loops, .. } | ArchSpec::XorFf { loops, .. } | ArchSpec::OaxFf { loops, .. } => Some(loops),
            _ => None,
        }
    }

    pub fn build(&self, seed: u64) -> Result<PufInstance> {
        Ok(match self {
            ArchSpec::Apuf { n } => ApufInstance::from_seed(*n, seed)?.into(),
            ArchSpec::Ff { n, loops } => FfApufInstance::from_seed(*n, loops, seed)?.into(),
            ArchSpec::XorFf { n, loops, z } => XorFfInstance::from_seed(*n, loops, *z, seed)?.into(),
            ArchSpec::OaxFf { n, loops, x, y, z } => OaxFfInstance::from_seed(*n, loops, (*x, *y, *z), seed)?.into(),
            ArchSpec::Mn { n, sizes, .. } => MnApufInstance::from_seed(*n, *sizes, seed)?.into(),
            ArchSpec::Ipuf { n, x, y, interpose } => IpufInstance::from_seed(*n, *x, *y, *interpose, seed)?.into(),
        })
    }

    pub fn l_target(&self) -> LTarget {
        let k = self.loops().map_or(0, |g| g.k());
        match *self {
            ArchSpec::Apuf { .. } => LTarget::Apuf,
            ArchSpec::Ff { .. } => LTarget::Ff { k },
            ArchSpec::XorFf { z, .. } => LTarget::XorFf { z, k },
            ArchSpec::OaxFf { x, y, z, .. } => LTarget::OaxFf { x, y, z, k },
            ArchSpec::Mn { .. } => LTarget::Mn,
            ArchSpec::Ipuf { x, y, .. } => LTarget::Ipuf { x, y },
        }
    }

    pub fn feature_map(&self) -> Result<FeatureMap> {
        match self.loops() {
            Some(g) => FeatureMap::for_geometry(self.n(), g),
            None => Ok(FeatureMap::plain(self.n())),
        }
    }

    /// Short identifier used for preset rows.
    pub fn short_id(&self) -> String {
        let loop_id = |g: &LoopGeometry| {
            let s = g.to_string();
            crate::composite::LOOP_CONFIGS
                .iter()
                .find(|(_, spec)| *spec == s)
                .map(|(name, _)| name[5..].to_ascii_lowercase())
                .unwrap_or(s)
        };
        let base = match self {
            ArchSpec::Apuf { .. } => "apuf".to_string(),
            ArchSpec::Ff { loops, .. } => format!("loop-{}", loop_id(loops)),
            ArchSpec::XorFf { loops, z, .. } => format!("xor-{}-{z}", loop_id(loops)),
            ArchSpec::OaxFf { loops, x, y, z, .. } => format!("oax-{}-{x}-{y}-{z}", loop_id(loops)),
            ArchSpec::Mn { n, sizes, .. } => {
                if *sizes == [32, 16, 8] {
                    format!("m{n}")
                } else {
                    format!("m{n}-{}-{}-{}", sizes[0], sizes[1], sizes[2])
                }
            }
            ArchSpec::Ipuf { x, y, interpose, n } => {
                if *interpose == default_interpose(*n) {
                    format!("ipuf-{x}-{y}")
                } else {
                    format!("ipuf-{x}-{y}-i{interpose}")
                }
            }
        };
        if self.n() != 64 && !matches!(self, ArchSpec::Mn { .. }) {
            format!("{base}-n{}", self.n())
        } else {
            base
        }
    }
}

impl fmt::Display for ArchSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ArchSpec::Apuf { n } => write!(f, "{n}-stage APUF"),
            ArchSpec::Ff { n, loops } => write!(f, "{n}-stage FF-APUF [{loops}]"),
            ArchSpec::XorFf { n, loops, z } => write!(f, "{n}-stage {z}-XOR-FF-APUF [{loops}]"),
            ArchSpec::OaxFf { n, loops, x, y, z } => write!(f, "{n}-stage ({x},{y},{z})-OAX-FF-APUF [{loops}]"),
            ArchSpec::Mn { n, sizes, .. } => write!(f, "M{n}_{{{},{},{}}}-APUF", sizes[0], sizes[1], sizes[2]),
            ArchSpec::Ipuf { n, x, y, interpose } => write!(f, "{n}-stage ({x},{y})-iPUF, i={interpose}"),
        }
    }
}

/// Self-describing instance file (TOML).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InstanceDescriptor {
    #[serde(flatten)]
    pub arch: ArchSpec,
    pub seed: u64,
    /// Nominal noise level used by default for metrics and CRP collection.
    #[serde(default = "default_sigma")]
    pub sigma: f64,
    /// Calibration constant in force when the descriptor was written.
    #[serde(default = "default_calibration")]
    pub noise_calibration: f64,
}

fn default_sigma() -> f64 {
    0.05
}

fn default_calibration() -> f64 {
    NOISE_CALIBRATION
}

impl InstanceDescriptor {
    pub fn new(arch: ArchSpec, seed: u64, sigma: f64) -> Result<Self> {
        let d = Self {
            arch,
            seed,
            sigma,
            noise_calibration: NOISE_CALIBRATION,
        };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        NoiseModel::calibrated(self.sigma)?;
        self.arch.build(self.seed).map(|_| ())
    }

    pub fn build(&self) -> Result<PufInstance> {
        self.arch.build(self.seed)
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    pub fn from_toml(s: &str) -> Result<Self> {
        let d: Self = toml::from_str(s)?;
        d.validate()?;
        Ok(d)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_toml()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml(&fs::read_to_string(path)?)
    }
}

/// One BER / uniformity measurement.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsExperiment {
    pub arch: ArchSpec,
    pub instance_seed: u64,
    pub challenge_seed: u64,
    /// Nominal noise level (scaled by the calibration constant).
    pub sigma: f64,
    pub challenges: usize,
    pub repeats: usize,
    pub reference: BerReference,
}

impl MetricsExperiment {
    pub fn run(&self) -> Result<MetricsReport> {
        let puf = self.arch.build(self.instance_seed)?;
        let noise = NoiseModel::calibrated(self.sigma)?;
        metrics::measure(
            &puf,
            &noise,
            self.challenges,
            self.repeats,
            self.challenge_seed,
            self.reference,
        )
    }
}

/// Generate data for one instance, train, evaluate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttackExperiment {
    pub arch: ArchSpec,
    pub instance_seed: u64,
    pub data_seed: u64,
    /// Nominal noise level of the collected CRPs (0 for noise-free data).
    pub sigma: f64,
    pub train: usize,
    pub val: usize,
    pub test: usize,
    pub mlp: MlpConfig,
}

impl AttackExperiment {
    pub fn datasets(&self) -> Result<(CrpSet, CrpSet, CrpSet)> {
        let puf = self.arch.build(self.instance_seed)?;
        let noise = NoiseModel::calibrated(self.sigma)?;
        let set = generate_crps(&puf, self.train + self.val + self.test, &noise, self.data_seed)?
            .with_instance_seed(self.instance_seed);
        set.split(self.train, self.val, self.test)
    }

    pub fn run(&self) -> Result<AttackReport> {
        let (tr, va, te) = self.datasets()?;
        let map = self.arch.feature_map()?;
        Ok(mlp::attack(&self.mlp, &map, &tr, &va, &te)?.1)
    }

    /// Best of `trials` trainings on the same data, see [`mlp::attack_trials`].
    pub fn run_best_of(&self, trials: usize) -> Result<(usize, Vec<AttackReport>)> {
        let (tr, va, te) = self.datasets()?;
        let map = self.arch.feature_map()?;
        mlp::attack_trials(&self.mlp, &map, &tr, &va, &te, trials)
    }
}

/// Adam step size used by presets: the small-batch rows train well at 1e-3,
/// the large-batch rows take far fewer steps and need a larger step.
pub fn preset_learning_rate(batch: usize) -> f64 {
    if batch < 100 {
        1e-3
    } else {
        5e-3
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MetricsRow {
    pub id: String,
    pub arch: ArchSpec,
    /// Nominal noise levels with the published BER at each.
    pub ber: Vec<(f64, f64)>,
    pub uniformity: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AttackRow {
    pub id: String,
    pub arch: ArchSpec,
    pub train: usize,
    pub val: usize,
    pub test: usize,
    pub epochs: usize,
    pub batch: usize,
    pub hidden: Vec<usize>,
    /// Hidden-layer exponent for three-layer rows, `None` for the baseline.
    pub l: Option<u32>,
    /// Nominal noise of the collected CRPs.
    pub sigma: f64,
    pub published_accuracy: f64,
    /// Rows small enough to run on a workstation in well under an hour.
    pub desk_scale: bool,
}

impl AttackRow {
    pub fn experiment(&self, seed: u64) -> Result<AttackExperiment> {
        let map = self.arch.feature_map()?;
        let mut mlp = MlpConfig::with_hidden(map.dim(), self.hidden.clone());
        mlp.epochs = self.epochs;
        mlp.batch_size = self.batch;
        mlp.learning_rate = preset_learning_rate(self.batch);
        mlp.seed = seed.wrapping_add(2);
        Ok(AttackExperiment {
            arch: self.arch.clone(),
            instance_seed: seed,
            data_seed: seed.wrapping_add(1),
            sigma: self.sigma,
            train: self.train,
            val: self.val,
            test: self.test,
            mlp,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(untagged)]
pub enum PresetRow {
    Metrics(MetricsRow),
    Attack(AttackRow),
}

impl PresetRow {
    pub fn id(&self) -> &str {
        match self {
            PresetRow::Metrics(r) => &r.id,
            PresetRow::Attack(r) => &r.id,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TablePreset {
    pub id: &'static str,
    pub title: &'static str,
    pub rows: Vec<PresetRow>,
}

impl TablePreset {
    /// Rows whose id equals or starts with one of the comma-separated selectors.
    pub fn select(&self, selector: Option<&str>) -> Result<Vec<&PresetRow>> {
        let Some(sel) = selector else {
            return Ok(self.rows.iter().collect());
        };
        let wanted: Vec<String> = sel.split(',').map(|s| s.trim().to_ascii_lowercase()).collect();
        let rows: Vec<&PresetRow> = self
            .rows
            .iter()
            .filter(|r| wanted.iter().any(|w| r.id() == w || r.id().starts_with(w.as_str())))
            .collect();
        if rows.is_empty() {
            return Err(Error::Config(format!(
                "no row of {} matches `{sel}` (rows: {})",
                self.id,
                self.rows.iter().map(|r| r.id()).collect::<Vec<_>>().join(", ")
            )));
        }
        Ok(rows)
    }
}

pub const TABLE_IDS: [&str; 10] = [
    "table2", "table4", "table5", "table8", "table9", "table10", "table11", "table12", "table13", "loops",
];

pub fn table(id: &str) -> Result<TablePreset> {
    let id = id.trim().to_ascii_lowercase();
    let preset = match id.as_str() {
        "table2" => table2(),
        "table4" => table4(),
        "table5" => table5(),
        "table8" => table8(),
        "table9" => table9(),
        "table10" => table10(),
        "table11" => table11(),
        "table12" => table12(),
        "table13" => table13(),
        _ => {
            return Err(Error::Config(format!(
                "unknown table `{id}` (valid: {})",
                TABLE_IDS[..9].join(", ")
            )))
        }
    };
    Ok(preset)
}

fn metrics_row(arch: ArchSpec, ber: &[(f64, f64)], uniformity: f64) -> PresetRow {
    PresetRow::Metrics(MetricsRow {
        id: arch.short_id(),
        arch,
        ber: ber.to_vec(),
        uniformity,
    })
}

/// `(train, val, test)`, epochs, batch.
type Schedule = ((usize, usize, usize), usize, usize);

fn attack_row(arch: ArchSpec, sched: Schedule, l: u32, acc: f64) -> AttackRow {
    let ((train, val, test), epochs, batch) = sched;
    let h = 1usize << (l - 1);
    AttackRow {
        id: arch.short_id(),
        arch,
        train,
        val,
        test,
        epochs,
        batch,
        hidden: vec![h, 2 * h, h],
        l: Some(l),
        sigma: 0.0,
        published_accuracy: acc,
        desk_scale: train <= 1_000_000,
    }
}

/// Gives repeated ids a `#2`, `#3` suffix in table order.
fn finish(id: &'static str, title: &'static str, mut rows: Vec<PresetRow>) -> TablePreset {
    let mut seen: Vec<String> = Vec::new();
    for r in &mut rows {
        let base = r.id().to_string();
        let count = seen.iter().filter(|s| **s == base).count();
        seen.push(base.clone());
        if count > 0 {
            let new = format!("{base}#{}", count + 1);
            match r {
                PresetRow::Metrics(m) => m.id = new,
                PresetRow::Attack(a) => a.id = new,
            }
        }
    }
    TablePreset { id, title, rows }
}

fn table2() -> TablePreset {
    let mut rows = vec![metrics_row(ArchSpec::m64(), &[(0.05, 0.223)], 0.522)];
    for (x, y, b2, b5, u) in [
        (3, 3, 0.118, 0.279, 0.502),
        (4, 4, 0.137, 0.323, 0.508),
        (5, 5, 0.166, 0.362, 0.509),
        (1, 7, 0.177, 0.389, 0.486),
    ] {
        rows.push(metrics_row(ArchSpec::ipuf(x, y), &[(0.02, b2), (0.05, b5)], u));
    }
    finish("table2", "BER and uniformity of M64 and (x,y)-iPUFs", rows)
}

fn table4() -> TablePreset {
    let rows = [
        ("B", 0.071, 0.405),
        ("C", 0.081, 0.399),
        ("D", 0.201, 0.443),
        ("E", 0.073, 0.400),
        ("F", 0.080, 0.404),
        ("G", 0.075, 0.401),
    ]
    .into_iter()
    .map(|(l, b, u)| metrics_row(ArchSpec::ff(&format!("Loop_{l}")), &[(0.05, b)], u))
    .collect();
    finish("table4", "BER and uniformity of FF-APUFs", rows)
}

const XOR_METRICS: [(&str, usize, f64, f64); 18] = [
    ("A", 2, 0.127, 0.433),
    ("A", 3, 0.225, 0.507),
    ("A", 4, 0.255, 0.496),
    ("A", 5, 0.357, 0.494),
    ("A", 6, 0.402, 0.496),
    ("B", 2, 0.117, 0.509),
    ("B", 3, 0.212, 0.503),
    ("B", 4, 0.249, 0.505),
    ("B", 5, 0.321, 0.499),
    ("C", 2, 0.130, 0.437),
    ("C", 3, 0.246, 0.506),
    ("C", 4, 0.259, 0.494),
    ("E", 2, 0.122, 0.503),
    ("E", 3, 0.218, 0.496),
    ("E", 4, 0.257, 0.503),
    ("F", 2, 0.135, 0.429),
    ("F", 3, 0.252, 0.508),
    ("G", 2, 0.138, 0.505),
];

type Xyz = (usize, usize, usize);

const OAX_METRICS: [(&str, Xyz, f64, f64); 39] = [
    ("A", (1, 2, 1), 0.200, 0.523),
    ("A", (2, 1, 1), 0.193, 0.562),
    ("A", (2, 1, 2), 0.305, 0.492),
    ("A", (1, 2, 2), 0.281, 0.497),
    ("A", (2, 2, 1), 0.226, 0.488),
    ("A", (1, 3, 1), 0.204, 0.440),
    ("A", (3, 1, 1), 0.227, 0.540),
    ("A", (1, 2, 3), 0.353, 0.494),
    ("A", (2, 1, 3), 0.349, 0.497),
    ("A", (2, 2, 2), 0.273, 0.507),
    ("A", (3, 1, 2), 0.283, 0.507),
    ("A", (1, 3, 2), 0.276, 0.484),
    ("A", (2, 3, 1), 0.192, 0.495),
    ("A", (3, 2, 1), 0.203, 0.512),
    ("A", (1, 4, 1), 0.197, 0.468),
    ("A", (4, 1, 1), 0.205, 0.519),
    ("B", (1, 2, 1), 0.185, 0.529),
    ("B", (2, 1, 1), 0.193, 0.534),
    ("B", (2, 1, 2), 0.272, 0.498),
    ("B", (1, 2, 2), 0.263, 0.495),
    ("B", (2, 2, 1), 0.215, 0.503),
    ("B", (1, 3, 1), 0.190, 0.466),
    ("B", (3, 1, 1), 0.193, 0.551),
    ("B", (1, 2, 3), 0.314, 0.501),
    ("B", (2, 1, 3), 0.323, 0.499),
    ("B", (2, 2, 2), 0.243, 0.510),
    ("B", (3, 1, 2), 0.255, 0.504),
    ("B", (1, 3, 2), 0.241, 0.505),
    ("B", (2, 3, 1), 0.168, 0.567),
    ("B", (3, 2, 1), 0.178, 0.538),
    ("B", (1, 4, 1), 0.162, 0.565),
    ("B", (4, 1, 1), 0.181, 0.515),
    ("C", (1, 2, 1), 0.206, 0.512),
    ("C", (2, 1, 1), 0.212, 0.558),
    ("C", (2, 1, 2), 0.307, 0.499),
    ("C", (1, 2, 2), 0.295, 0.498),
    ("C", (2, 2, 1), 0.241, 0.496),
    ("C", (1, 3, 1), 0.216, 0.457),
    ("C", (3, 1, 1), 0.223, 0.542),
];

fn table5() -> TablePreset {
    let mut rows: Vec<PresetRow> = XOR_METRICS
        .iter()
        .map(|&(l, z, b, u)| metrics_row(ArchSpec::xor_ff(&format!("Loop_{l}"), z), &[(0.05, b)], u))
        .collect();
    rows.extend(
        OAX_METRICS
            .iter()
            .map(|&(l, xyz, b, u)| metrics_row(ArchSpec::oax_ff(&format!("Loop_{l}"), xyz), &[(0.05, b)], u)),
    );
    finish("table5", "BER and uniformity of XOR-FF and OAX-FF APUFs", rows)
}

const SMALL: Schedule = ((20_000, 5_000, 1_000), 100, 20);
const LARGE_FAST: Schedule = ((200_000, 50_000, 1_000), 50, 200);
const LARGE_SLOW: Schedule = ((200_000, 50_000, 1_000), 100, 20);

fn table8() -> TablePreset {
    let rows = [
        ("B", SMALL, 0.936),
        ("C", SMALL, 0.885),
        ("E", LARGE_FAST, 0.924),
        ("F", LARGE_FAST, 0.894),
        ("G", LARGE_FAST, 0.861),
    ]
    .into_iter()
    .map(|(l, sched, acc)| {
        let arch = ArchSpec::ff(&format!("Loop_{l}"));
        let k = arch.loops().map_or(0, |g| g.k());
        let mut row = attack_row(arch, sched, 1, acc);
        row.hidden = vec![1 << (k + 1)];
        row.l = None;
        PresetRow::Attack(row)
    })
    .collect();
    finish("table8", "Single-hidden-layer baseline against FF-APUFs", rows)
}

fn table9() -> TablePreset {
    let rows = [
        (ArchSpec::ff("Loop_B"), SMALL, 3, 0.955),
        (ArchSpec::ff("Loop_C"), SMALL, 4, 0.913),
        (ArchSpec::ff("Loop_E"), LARGE_FAST, 5, 0.921),
        (ArchSpec::ff("Loop_F"), LARGE_FAST, 6, 0.928),
        (ArchSpec::ff("Loop_G"), LARGE_FAST, 7, 0.893),
        (ArchSpec::ff("Loop_D"), LARGE_SLOW, 4, 0.919),
        (ArchSpec::m64(), LARGE_SLOW, 4, 0.939),
    ]
    .into_iter()
    .map(|(arch, sched, l, acc)| PresetRow::Attack(attack_row(arch, sched, l, acc)))
    .collect();
    finish("table9", "Three-hidden-layer MLP against FF-APUFs and M64", rows)
}

fn table10() -> TablePreset {
    let big = |tr: usize| ((tr, tr / 4, 1_000), 100, 200);
    let small = |tr: usize| ((tr, tr / 4, 1_000), 100, 20);
    let rows: Vec<(&str, usize, Schedule, u32, f64)> = vec![
        ("A", 2, small(20_000), 4, 0.937),
        ("A", 3, small(40_000), 5, 0.919),
        ("A", 4, small(100_000), 6, 0.935),
        ("A", 5, big(400_000), 7, 0.901),
        ("A", 6, big(500_000), 8, 0.528),
        ("A", 6, big(500_000), 7, 0.507),
        ("B", 2, small(100_000), 5, 0.932),
        ("B", 3, small(200_000), 6, 0.885),
        ("B", 4, big(400_000), 7, 0.886),
        ("B", 5, big(500_000), 7, 0.854),
        ("C", 2, small(100_000), 6, 0.881),
        ("C", 3, big(500_000), 7, 0.852),
        ("C", 4, ((500_000, 100_000, 1_000), 100, 200), 7, 0.822),
        ("C", 4, big(500_000), 8, 0.794),
        ("E", 2, big(500_000), 7, 0.872),
        ("E", 3, big(500_000), 7, 0.834),
        ("E", 4, big(500_000), 7, 0.789),
        ("F", 2, big(500_000), 7, 0.839),
        ("F", 3, big(500_000), 7, 0.803),
        ("G", 2, big(500_000), 8, 0.784),
        ("G", 2, big(500_000), 7, 0.815),
    ];
    let rows = rows
        .into_iter()
        .map(|(l, z, sched, lv, acc)| {
            PresetRow::Attack(attack_row(ArchSpec::xor_ff(&format!("Loop_{l}"), z), sched, lv, acc))
        })
        .collect();
    finish("table10", "MLP against z-XOR-FF-APUFs", rows)
}

/// Loop, (x, y, z), (train, val, test), epochs, batch, l, accuracy.
type OaxAttack = (&'static str, Xyz, (usize, usize, usize), usize, usize, u32, f64);

const OAX_ATTACKS: [OaxAttack; 63] = [
    ("A", (1, 2, 1), (100000, 25000, 1000), 100, 20, 5, 0.948),
    ("A", (1, 2, 1), (100000, 25000, 1000), 100, 20, 6, 0.938),
    ("A", (2, 1, 1), (100000, 25000, 1000), 100, 20, 5, 0.949),
    ("A", (2, 1, 1), (100000, 25000, 1000), 100, 20, 6, 0.951),
    ("A", (2, 1, 2), (500000, 125000, 1000), 50, 200, 7, 0.914),
    ("A", (1, 2, 2), (500000, 125000, 1000), 50, 200, 7, 0.912),
    ("A", (2, 2, 1), (500000, 125000, 1000), 50, 200, 7, 0.938),
    ("A", (1, 3, 1), (500000, 125000, 1000), 50, 200, 7, 0.941),
    ("A", (3, 1, 1), (500000, 125000, 1000), 50, 200, 7, 0.938),
    ("A", (1, 2, 3), (500000, 125000, 1000), 50, 200, 8, 0.893),
    ("A", (2, 1, 3), (500000, 125000, 1000), 50, 200, 8, 0.876),
    ("A", (2, 2, 2), (500000, 125000, 1000), 50, 200, 8, 0.904),
    ("A", (3, 1, 2), (500000, 125000, 1000), 50, 200, 8, 0.930),
    ("A", (1, 3, 2), (500000, 125000, 1000), 50, 200, 8, 0.902),
    ("A", (2, 3, 1), (500000, 125000, 1000), 50, 200, 8, 0.950),
    ("A", (3, 2, 1), (500000, 125000, 1000), 50, 200, 8, 0.953),
    ("A", (1, 4, 1), (500000, 125000, 1000), 50, 200, 8, 0.938),
    ("A", (4, 1, 1), (500000, 125000, 1000), 50, 200, 8, 0.947),
    ("B", (1, 2, 1), (400000, 100000, 1000), 50, 200, 7, 0.919),
    ("B", (2, 1, 1), (400000, 100000, 1000), 50, 200, 7, 0.920),
    ("B", (2, 1, 2), (500000, 125000, 1000), 50, 200, 7, 0.832),
    ("B", (2, 1, 2), (500000, 125000, 1000), 50, 200, 8, 0.872),
    ("B", (1, 2, 2), (500000, 125000, 1000), 50, 200, 7, 0.869),
    ("B", (1, 2, 2), (500000, 125000, 1000), 50, 200, 8, 0.863),
    ("B", (2, 2, 1), (500000, 125000, 1000), 50, 200, 7, 0.871),
    ("B", (2, 2, 1), (500000, 125000, 1000), 50, 200, 8, 0.860),
    ("B", (1, 3, 1), (500000, 125000, 1000), 50, 200, 7, 0.869),
    ("B", (1, 3, 1), (500000, 125000, 1000), 50, 200, 8, 0.881),
    ("B", (3, 1, 1), (500000, 125000, 1000), 50, 200, 7, 0.879),
    ("B", (3, 1, 1), (500000, 125000, 1000), 50, 200, 8, 0.878),
    ("B", (1, 2, 3), (500000, 125000, 1000), 50, 200, 7, 0.735),
    ("B", (1, 2, 3), (500000, 125000, 1000), 50, 200, 8, 0.727),
    ("B", (2, 1, 3), (500000, 125000, 1000), 50, 200, 7, 0.757),
    ("B", (2, 1, 3), (500000, 125000, 1000), 50, 200, 8, 0.725),
    ("B", (2, 2, 2), (500000, 125000, 1000), 50, 200, 7, 0.788),
    ("B", (2, 2, 2), (500000, 125000, 1000), 50, 200, 8, 0.782),
    ("B", (3, 1, 2), (500000, 125000, 1000), 50, 200, 7, 0.793),
    ("B", (3, 1, 2), (500000, 125000, 1000), 50, 200, 8, 0.778),
    ("B", (1, 3, 2), (500000, 125000, 1000), 50, 200, 7, 0.798),
    ("B", (1, 3, 2), (500000, 125000, 1000), 50, 200, 8, 0.800),
    ("B", (2, 3, 1), (500000, 125000, 1000), 50, 200, 7, 0.840),
    ("B", (2, 3, 1), (500000, 125000, 1000), 50, 200, 8, 0.805),
    ("B", (3, 2, 1), (500000, 125000, 1000), 50, 200, 7, 0.842),
    ("B", (3, 2, 1), (500000, 125000, 1000), 50, 200, 8, 0.829),
    ("B", (1, 4, 1), (500000, 125000, 1000), 50, 200, 7, 0.850),
    ("B", (1, 4, 1), (500000, 125000, 1000), 50, 200, 8, 0.853),
    ("B", (4, 1, 1), (500000, 125000, 1000), 50, 200, 7, 0.853),
    ("B", (4, 1, 1), (500000, 125000, 1000), 50, 200, 8, 0.833),
    ("C", (1, 2, 1), (500000, 125000, 1000), 50, 200, 7, 0.860),
    ("C", (1, 2, 1), (500000, 125000, 1000), 50, 200, 8, 0.859),
    ("C", (2, 1, 1), (500000, 125000, 1000), 50, 200, 7, 0.877),
    ("C", (2, 1, 1), (500000, 125000, 1000), 50, 200, 8, 0.865),
    ("C", (2, 1, 2), (600000, 150000, 1000), 50, 200, 7, 0.801),
    ("C", (2, 1, 2), (600000, 150000, 1000), 50, 200, 8, 0.792),
    ("C", (2, 1, 2), (600000, 150000, 1000), 50, 200, 9, 0.773),
    ("C", (1, 2, 2), (600000, 150000, 1000), 50, 200, 7, 0.797),
    ("C", (1, 2, 2), (600000, 150000, 1000), 50, 200, 8, 0.776),
    ("C", (2, 2, 1), (600000, 150000, 1000), 50, 200, 7, 0.840),
    ("C", (2, 2, 1), (600000, 150000, 1000), 50, 200, 8, 0.821),
    ("C", (1, 3, 1), (600000, 150000, 1000), 50, 200, 7, 0.873),
    ("C", (1, 3, 1), (600000, 150000, 1000), 50, 200, 8, 0.852),
    ("C", (3, 1, 1), (600000, 150000, 1000), 50, 200, 7, 0.866),
    ("C", (3, 1, 1), (600000, 150000, 1000), 50, 200, 8, 0.853),
];

fn table11() -> TablePreset {
    let rows = OAX_ATTACKS
        .iter()
        .map(|&(l, xyz, sizes, epochs, batch, lv, acc)| {
            PresetRow::Attack(attack_row(
                ArchSpec::oax_ff(&format!("Loop_{l}"), xyz),
                (sizes, epochs, batch),
                lv,
                acc,
            ))
        })
        .collect();
    finish("table11", "MLP against (x,y,z)-OAX-FF-APUFs", rows)
}

fn table12() -> TablePreset {
    let rows: Vec<(usize, usize, Schedule, u32, f64)> = vec![
        (3, 3, ((240_000, 60_000, 1_000), 100, 1_000), 5, 0.967),
        (4, 4, ((320_000, 80_000, 1_000), 100, 200), 6, 0.939),
        (4, 4, ((320_000, 80_000, 1_000), 100, 200), 7, 0.945),
        (4, 4, ((320_000, 80_000, 1_000), 100, 1_000), 7, 0.957),
        (5, 5, ((1_200_000, 300_000, 1_000), 100, 1_000), 8, 0.743),
        (5, 5, ((2_400_000, 600_000, 1_000), 100, 10_000), 8, 0.750),
        (5, 5, ((6_000_000, 1_500_000, 1_000), 200, 10_000), 8, 0.953),
        (5, 5, ((6_000_000, 1_500_000, 1_000), 100, 10_000), 9, 0.963),
        (1, 7, ((6_000_000, 1_500_000, 1_000), 100, 10_000), 8, 0.736),
        (1, 7, ((6_000_000, 1_500_000, 1_000), 100, 10_000), 9, 0.960),
    ];
    let rows = rows
        .into_iter()
        .map(|(x, y, sched, l, acc)| PresetRow::Attack(attack_row(ArchSpec::ipuf(x, y), sched, l, acc)))
        .collect();
    finish("table12", "MLP against (x,y)-iPUFs", rows)
}

fn table13() -> TablePreset {
    // Epochs and batch size are not listed for these rows; 50 / 200 matches
    // the neighbouring large-data rows.
    let sched = |tr: usize, va: usize| ((tr, va, 1_000), 50, 200);
    let mut rows = Vec::new();
    let mut push = |arch: ArchSpec, s: Schedule, l: u32, acc: f64, sigma: f64| {
        let mut row = attack_row(arch, s, l, acc);
        row.sigma = sigma;
        row.desk_scale = false;
        rows.push(PresetRow::Attack(row));
    };
    for (xyz, acc) in [
        ((0, 0, 7), 0.496),
        ((1, 2, 4), 0.913),
        ((1, 3, 3), 0.950),
        ((2, 2, 3), 0.953),
        ((2, 3, 2), 0.958),
        ((1, 4, 2), 0.963),
    ] {
        push(ArchSpec::oax_ff("Loop_A", xyz), sched(700_000, 175_000), 8, acc, 0.02);
    }
    push(ArchSpec::oax_ff("Loop_B", (1, 2, 4)), sched(700_000, 175_000), 9, 0.537, 0.02);
    for (xyz, acc) in [
        ((0, 0, 8), 0.491),
        ((1, 2, 5), 0.5007),
        ((1, 3, 4), 0.519),
        ((2, 2, 4), 0.498),
        ((1, 4, 3), 0.930),
        ((2, 3, 3), 0.946),
    ] {
        push(ArchSpec::oax_ff("Loop_A", xyz), sched(800_000, 200_000), 9, acc, 0.02);
    }
    push(ArchSpec::oax_ff("Loop_B", (1, 2, 5)), sched(800_000, 200_000), 9, 0.501, 0.02);
    for (xyz, tr, l, acc) in [
        ((0, 0, 5), 400_000, 8, 0.502),
        ((1, 2, 2), 400_000, 7, 0.494),
        ((1, 2, 3), 500_000, 8, 0.500),
        ((1, 2, 4), 700_000, 8, 0.493),
    ] {
        push(
            ArchSpec::oax_ff("15→80", xyz).with_n(128),
            sched(tr, tr / 4),
            l,
            acc,
            0.02,
        );
    }
    push(
        ArchSpec::ff("15→80,85,90,95,100").with_n(128),
        sched(200_000, 5_000),
        6,
        0.663,
        0.05,
    );
    push(
        ArchSpec::ff("15→80,85,90,95,100,105").with_n(128),
        sched(200_000, 5_000),
        7,
        0.854,
        0.05,
    );
    finish("table13", "Larger compositions and 128-stage chains", rows)
}
