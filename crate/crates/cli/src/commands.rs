use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use serde::{Deserialize, Serialize};

use copuf::dataset::{generate_crps, read_crps, write_crps, write_csv, CrpSet};
use copuf::experiment::{self, default_interpose, preset_learning_rate, AttackRow, MetricsRow, PresetRow, SubsetRule};
use copuf::metrics::{BerReference, DEFAULT_CHALLENGES, DEFAULT_REPEATS};
use copuf::mlp::{self, AttackReport, MlpConfig};
use copuf::{
    ArchSpec, AttackExperiment, Error, InstanceDescriptor, LoopGeometry, MetricsExperiment, NoiseModel,
};

use crate::report::{self, ReportLine};
use crate::settings::Settings;
use crate::{
    ArchArgs, AttackArgs, Cli, Command, CrpsArgs, GenArgs, MetricsArgs, ReproduceArgs, RerunArgs, EXIT_CONFIG,
    EXIT_DIVERGENCE, EXIT_IO, EXIT_MISMATCH,
};

pub fn exit_code(e: &anyhow::Error) -> u8 {
    for cause in e.chain() {
        if let Some(err) = cause.downcast_ref::<Error>() {
            return match err {
                Error::Divergence { .. } => EXIT_DIVERGENCE,
                Error::Io(_)
                | Error::Truncated { .. }
                | Error::Checksum { .. }
                | Error::VersionMismatch(_)
                | Error::Csv(_) => EXIT_IO,
                _ => EXIT_CONFIG,
            };
        }
        if cause.downcast_ref::<std::io::Error>().is_some() {
            return EXIT_IO;
        }
    }
    EXIT_CONFIG
}

fn config_err(msg: impl Into<String>) -> anyhow::Error {
    anyhow!(Error::Config(msg.into()))
}

pub fn run(cli: &Cli) -> Result<u8> {
    let settings = Settings::load(cli.config.as_deref())?;
    match &cli.command {
        Command::Gen(a) => gen(cli, &settings, a),
        Command::Metrics(a) => metrics(cli, &settings, a),
        Command::Crps(a) => crps(cli, &settings, a),
        Command::Attack(a) => attack(cli, &settings, a),
        Command::Reproduce(a) => reproduce(cli, &settings, a),
        Command::Rerun(a) => rerun(a),
    }
}

fn echo(config: &impl Serialize) -> Result<()> {
    eprintln!("resolved config: {}", serde_json::to_string(config)?);
    Ok(())
}

fn load_descriptor(path: &Path) -> Result<InstanceDescriptor> {
    InstanceDescriptor::load(path).with_context(|| format!("loading instance {}", path.display()))
}

fn arch_spec(a: &ArchArgs) -> Result<ArchSpec> {
    let arch = a.arch.as_deref().ok_or_else(|| config_err("--arch is required"))?;
    let n = a.n.unwrap_or(64);
    let need = |v: Option<usize>, flag: &str| v.ok_or_else(|| config_err(format!("--{flag} is required for --arch {arch}")));
    let loops = || -> Result<LoopGeometry> {
        let spec = a
            .loops
            .as_deref()
            .ok_or_else(|| config_err(format!("--loops is required for --arch {arch}")))?;
        Ok(LoopGeometry::resolve(spec)?)
    };
    let spec = match arch.to_ascii_lowercase().as_str() {
        "apuf" => ArchSpec::Apuf { n },
        "ff" => ArchSpec::Ff { n, loops: loops()? },
        "xor-ff" => ArchSpec::XorFf {
            n,
            loops: loops()?,
            z: need(a.z, "z")?,
        },
        "oax-ff" => {
            let [x, y, z] = a.xyz.ok_or_else(|| config_err("--xyz is required for --arch oax-ff"))?;
            ArchSpec::OaxFf {
                n,
                loops: loops()?,
                x,
                y,
                z,
            }
        }
        "mn" => ArchSpec::Mn {
            n,
            sizes: a.sizes.unwrap_or([n / 2, n / 4, n / 8]),
            subset_rule: SubsetRule::Prefix,
        },
        "ipuf" => ArchSpec::Ipuf {
            n,
            x: need(a.x, "x")?,
            y: need(a.y, "y")?,
            interpose: a.interpose.unwrap_or(default_interpose(n)),
        },
        other => return Err(anyhow!(Error::UnknownArchitecture(format!(
            "{other} (valid: apuf, ff, xor-ff, oax-ff, mn, ipuf)"
        )))),
    };
    Ok(spec)
}

fn gen(cli: &Cli, s: &Settings, a: &GenArgs) -> Result<u8> {
    let arch = arch_spec(&a.arch)?;
    let seed = a.seed.or(s.seed).unwrap_or(0);
    let sigma = a.sigma.or(s.sigma).unwrap_or(0.05);
    let desc = InstanceDescriptor::new(arch, seed, sigma)?;
    let path = match &a.output {
        Some(p) => p.clone(),
        None => {
            fs::create_dir_all(&cli.out_dir)?;
            cli.out_dir.join(format!("{}-s{seed}.toml", desc.arch.short_id()))
        }
    };
    desc.save(&path).with_context(|| format!("writing {}", path.display()))?;
    print!("{}", desc.to_toml()?);
    eprintln!("wrote {} ({})", path.display(), desc.arch);
    Ok(0)
}

fn parse_reference(s: Option<&str>) -> Result<BerReference> {
    match s.map(str::to_ascii_lowercase).as_deref() {
        None | Some("golden") => Ok(BerReference::Golden),
        Some("majority") => Ok(BerReference::Majority),
        Some(other) => Err(config_err(format!("unknown reference `{other}` (golden, majority)"))),
    }
}

fn metrics(cli: &Cli, s: &Settings, a: &MetricsArgs) -> Result<u8> {
    let desc = load_descriptor(&a.instance)?;
    let exp = MetricsExperiment {
        arch: desc.arch.clone(),
        instance_seed: desc.seed,
        challenge_seed: a.seed.or(s.seed).unwrap_or(0),
        sigma: a.sigma.unwrap_or(desc.sigma),
        challenges: a.challenges.or(s.metrics.challenges).unwrap_or(DEFAULT_CHALLENGES),
        repeats: a.repeats.or(s.metrics.repeats).unwrap_or(DEFAULT_REPEATS),
        reference: parse_reference(a.reference.as_deref().or(s.metrics.reference.as_deref()))?,
    };
    echo(&exp)?;
    let result = exp.run()?;
    println!("{}", serde_json::to_string(&result)?);
    report::append(&cli.out_dir, &ReportLine::new("metrics", &exp, &result)?)?;
    Ok(0)
}

#[derive(Debug, Serialize, Deserialize)]
struct CrpsConfig {
    instance: InstanceDescriptor,
    count: usize,
    sigma: f64,
    seed: u64,
    output: PathBuf,
    csv: Option<PathBuf>,
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
struct CrpsResult {
    fingerprint: String,
    records: usize,
    bytes: usize,
}

fn collect(cfg: &CrpsConfig) -> Result<CrpSet> {
    let puf = cfg.instance.build()?;
    let noise = NoiseModel::calibrated(cfg.sigma)?;
    Ok(generate_crps(&puf, cfg.count, &noise, cfg.seed)?.with_instance_seed(cfg.instance.seed))
}

fn crps(cli: &Cli, s: &Settings, a: &CrpsArgs) -> Result<u8> {
    let desc = load_descriptor(&a.instance)?;
    let count = a
        .count
        .or(s.crps.count)
        .ok_or_else(|| config_err("--count is required"))?;
    let output = match &a.output {
        Some(p) => p.clone(),
        None => {
            let stem = a.instance.file_stem().and_then(|s| s.to_str()).unwrap_or("instance");
            cli.out_dir.join(format!("{stem}-{count}.crp"))
        }
    };
    let cfg = CrpsConfig {
        sigma: a.sigma.unwrap_or(desc.sigma),
        instance: desc,
        count,
        seed: a.seed.or(s.seed).unwrap_or(0),
        output,
        csv: a.csv.clone(),
    };
    echo(&cfg)?;
    let set = collect(&cfg)?;
    if let Some(dir) = cfg.output.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    write_crps(&set, &cfg.output).with_context(|| format!("writing {}", cfg.output.display()))?;
    if let Some(csv) = &cfg.csv {
        write_csv(&set, csv).with_context(|| format!("writing {}", csv.display()))?;
    }
    let result = CrpsResult {
        fingerprint: set.fingerprint(),
        records: set.len(),
        bytes: set.to_bytes().len(),
    };
    println!("{} records -> {} ({})", result.records, cfg.output.display(), result.fingerprint);
    report::append(&cli.out_dir, &ReportLine::new("crps", &cfg, &result)?)?;
    Ok(0)
}

#[derive(Debug, Serialize, Deserialize)]
struct AttackFileConfig {
    arch: ArchSpec,
    train: PathBuf,
    val: Option<PathBuf>,
    test: PathBuf,
    mlp: MlpConfig,
    trials: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct TrialsResult {
    best: usize,
    reports: Vec<AttackReport>,
}

fn read_set(path: &Path) -> Result<CrpSet> {
    read_crps(path).with_context(|| format!("reading dataset {}", path.display()))
}

fn run_file_attack(cfg: &AttackFileConfig) -> Result<(usize, Vec<AttackReport>)> {
    let train = read_set(&cfg.train)?;
    let test = read_set(&cfg.test)?;
    let val = match &cfg.val {
        Some(p) => read_set(p)?,
        None => train.slice(0, 0)?,
    };
    for set in [&train, &val, &test] {
        if set.n() != cfg.arch.n() {
            return Err(anyhow!(Error::StageMismatch {
                expected: cfg.arch.n(),
                found: set.n(),
            }));
        }
    }
    let map = cfg.arch.feature_map()?;
    Ok(mlp::attack_trials(&cfg.mlp, &map, &train, &val, &test, cfg.trials)?)
}

fn parse_l(s: &str, arch: &ArchSpec) -> Result<u32> {
    if s.eq_ignore_ascii_case("auto") {
        return Ok(mlp::choose_l(arch.l_target()));
    }
    match s.parse::<u32>() {
        Ok(l) if (1..=20).contains(&l) => Ok(l),
        _ => Err(config_err(format!("--l must be `auto` or an integer in 1..=20, got `{s}`"))),
    }
}

fn attack(cli: &Cli, s: &Settings, a: &AttackArgs) -> Result<u8> {
    let arch = match (&a.instance, a.arch.is_empty()) {
        (Some(p), true) => load_descriptor(p)?.arch,
        (None, false) => arch_spec(&a.arch)?,
        (Some(_), false) => return Err(config_err("give either --instance or architecture flags, not both")),
        (None, true) => return Err(config_err("--instance or --arch is required")),
    };
    for p in [Some(&a.train), a.val.as_ref(), Some(&a.test)].into_iter().flatten() {
        if !p.exists() {
            return Err(anyhow!(Error::Io(std::io::Error::new(
                std::io::ErrorKind::NotFound,
                format!("dataset file {} does not exist", p.display()),
            ))));
        }
    }
    let dim = arch.feature_map()?.dim();
    let hidden = match a.hidden.clone().or_else(|| s.attack.hidden.clone()) {
        Some(h) => h,
        None => {
            let l = parse_l(a.l.as_deref().or(s.attack.l.as_deref()).unwrap_or("auto"), &arch)?;
            MlpConfig::three_layer(dim, l).hidden
        }
    };
    let mut mlp = MlpConfig::with_hidden(dim, hidden);
    mlp.epochs = a.epochs.or(s.attack.epochs).unwrap_or(100);
    mlp.batch_size = a.batch.or(s.attack.batch).unwrap_or(20);
    mlp.learning_rate = a.lr.or(s.attack.lr).unwrap_or(preset_learning_rate(mlp.batch_size));
    mlp.seed = a.seed.or(s.seed).unwrap_or(0);
    mlp.validate()?;
    let cfg = AttackFileConfig {
        arch,
        train: a.train.clone(),
        val: a.val.clone(),
        test: a.test.clone(),
        mlp,
        trials: a.trials.or(s.attack.trials).unwrap_or(1).max(1),
    };
    echo(&cfg)?;
    let (best, reports) = run_file_attack(&cfg)?;
    let r = &reports[best];
    println!(
        "test accuracy {:.4} (best epoch {}, {:.1} s, hidden {:?})",
        r.test_accuracy, r.best_epoch, r.train_seconds, r.config.hidden
    );
    report::append(&cli.out_dir, &ReportLine::new("attack", &cfg, TrialsResult { best, reports })?)?;
    Ok(0)
}

#[derive(Debug, Serialize, Deserialize)]
struct MetricsRowConfig {
    table: String,
    row: String,
    experiments: Vec<MetricsExperiment>,
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
struct MetricsRowResult {
    mean_ber: f64,
    mean_uniformity: f64,
    published_ber: Option<f64>,
    published_uniformity: f64,
    reports: Vec<copuf::metrics::MetricsReport>,
}

fn run_metrics_row(experiments: &[MetricsExperiment]) -> Result<Vec<copuf::metrics::MetricsReport>> {
    experiments.iter().map(|e| e.run().map_err(Into::into)).collect()
}

fn summarize_metrics(
    reports: Vec<copuf::metrics::MetricsReport>,
    published_ber: Option<f64>,
    published_uniformity: f64,
) -> MetricsRowResult {
    let k = reports.len() as f64;
    MetricsRowResult {
        mean_ber: reports.iter().map(|r| r.ber.ber).sum::<f64>() / k,
        mean_uniformity: reports.iter().map(|r| r.uniformity).sum::<f64>() / k,
        published_ber,
        published_uniformity,
        reports,
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct AttackRowConfig {
    table: String,
    row: String,
    published_accuracy: f64,
    experiment: AttackExperiment,
    trials: usize,
}

fn reproduce(cli: &Cli, s: &Settings, a: &ReproduceArgs) -> Result<u8> {
    let preset = experiment::table(&a.table)?;
    let rows = preset.select(a.rows.as_deref())?;
    let seed = a.seed.or(s.seed).unwrap_or(1);
    let r = &s.reproduce;
    println!("{}: {}", preset.id, preset.title);
    for row in rows {
        match row {
            PresetRow::Metrics(m) => reproduce_metrics(cli, a, s, preset.id, m, seed)?,
            PresetRow::Attack(at) => {
                if !at.desk_scale && !a.all {
                    println!("{:<22} skipped (needs {} CRPs; pass --all)", at.id, at.train + at.val + at.test);
                    continue;
                }
                let mut e = at.experiment(seed)?;
                if let Some(v) = a.epochs.or(r.epochs) {
                    e.mlp.epochs = v;
                }
                if let Some(v) = a.batch.or(r.batch) {
                    e.mlp.batch_size = v;
                    e.mlp.learning_rate = preset_learning_rate(v);
                }
                if let Some(v) = a.lr.or(r.lr) {
                    e.mlp.learning_rate = v;
                }
                e.mlp.validate()?;
                let cfg = AttackRowConfig {
                    table: preset.id.to_string(),
                    row: at.id.clone(),
                    published_accuracy: at.published_accuracy,
                    experiment: e,
                    trials: a.trials.or(r.trials).unwrap_or(1).max(1),
                };
                reproduce_attack(cli, a.dry_run, at, &cfg)?;
            }
        }
    }
    Ok(0)
}

fn reproduce_metrics(cli: &Cli, a: &ReproduceArgs, s: &Settings, table: &str, m: &MetricsRow, seed: u64) -> Result<()> {
    let r = &s.reproduce;
    let sigmas: Vec<(f64, Option<f64>)> = match a.sigma {
        Some(sig) => vec![(sig, m.ber.iter().find(|(x, _)| (x - sig).abs() < 1e-12).map(|p| p.1))],
        None => m.ber.iter().map(|&(x, b)| (x, Some(b))).collect(),
    };
    let instances = a.instances.or(r.instances).unwrap_or(1).max(1);
    for (sigma, published) in sigmas {
        let experiments: Vec<MetricsExperiment> = (0..instances as u64)
            .map(|i| MetricsExperiment {
                arch: m.arch.clone(),
                instance_seed: seed.wrapping_add(i),
                challenge_seed: seed.wrapping_add(i).wrapping_add(1_000),
                sigma,
                challenges: a.challenges.or(r.challenges).unwrap_or(DEFAULT_CHALLENGES),
                repeats: a.repeats.or(r.repeats).unwrap_or(DEFAULT_REPEATS),
                reference: BerReference::Golden,
            })
            .collect();
        let cfg = MetricsRowConfig {
            table: table.to_string(),
            row: m.id.clone(),
            experiments,
        };
        if a.dry_run {
            println!(
                "{:<22} plan: {} sigma={sigma} instances={instances} challenges={} repeats={}",
                m.id, m.arch, cfg.experiments[0].challenges, cfg.experiments[0].repeats
            );
            continue;
        }
        echo(&cfg)?;
        let result = summarize_metrics(run_metrics_row(&cfg.experiments)?, published, m.uniformity);
        let fmt = |v: Option<f64>| v.map_or("-".to_string(), |v| format!("{v:.3}"));
        println!(
            "{:<22} sigma={sigma:<5} ber {:.3} (published {})  uniformity {:.3} (published {:.3})",
            m.id,
            result.mean_ber,
            fmt(published),
            result.mean_uniformity,
            m.uniformity
        );
        report::append(&cli.out_dir, &ReportLine::new("reproduce-metrics", &cfg, &result)?)?;
    }
    Ok(())
}

fn reproduce_attack(cli: &Cli, dry_run: bool, row: &AttackRow, cfg: &AttackRowConfig) -> Result<()> {
    let e = &cfg.experiment;
    if dry_run {
        println!(
            "{:<22} plan: {} split {}/{}/{} epochs={} batch={} hidden={:?} lr={} sigma={} (published {:.3})",
            row.id,
            e.arch,
            e.train,
            e.val,
            e.test,
            e.mlp.epochs,
            e.mlp.batch_size,
            e.mlp.hidden,
            e.mlp.learning_rate,
            e.sigma,
            row.published_accuracy
        );
        return Ok(());
    }
    echo(cfg)?;
    let (best, reports) = e.run_best_of(cfg.trials)?;
    let r = &reports[best];
    println!(
        "{:<22} accuracy {:.4} (published {:.3})  best epoch {}  {:.1} s",
        row.id, r.test_accuracy, row.published_accuracy, r.best_epoch, r.train_seconds
    );
    report::append(&cli.out_dir, &ReportLine::new("reproduce-attack", cfg, TrialsResult { best, reports })?)
}

fn same_training(a: &[AttackReport], b: &[AttackReport]) -> bool {
    a.len() == b.len()
        && a.iter()
            .zip(b)
            .all(|(x, y)| x.test_accuracy == y.test_accuracy && x.history == y.history && x.fingerprints == y.fingerprints)
}

fn rerun(a: &RerunArgs) -> Result<u8> {
    let line = report::find(&a.reports, a.id.as_deref())?;
    let matches = match line.kind.as_str() {
        "metrics" => {
            let exp: MetricsExperiment = serde_json::from_value(line.config)?;
            let new = exp.run()?;
            let old: copuf::metrics::MetricsReport = serde_json::from_value(line.result)?;
            println!("ber {} uniformity {}", new.ber.ber, new.uniformity);
            new == old
        }
        "crps" => {
            let cfg: CrpsConfig = serde_json::from_value(line.config)?;
            let set = collect(&cfg)?;
            let old: CrpsResult = serde_json::from_value(line.result)?;
            println!("fingerprint {}", set.fingerprint());
            set.fingerprint() == old.fingerprint && set.len() == old.records
        }
        "attack" => {
            let cfg: AttackFileConfig = serde_json::from_value(line.config)?;
            let old: TrialsResult = serde_json::from_value(line.result)?;
            let (best, reports) = run_file_attack(&cfg)?;
            println!("test accuracy {:.4}", reports[best].test_accuracy);
            best == old.best && same_training(&reports, &old.reports)
        }
        "reproduce-metrics" => {
            let cfg: MetricsRowConfig = serde_json::from_value(line.config)?;
            let old: MetricsRowResult = serde_json::from_value(line.result)?;
            let new = summarize_metrics(
                run_metrics_row(&cfg.experiments)?,
                old.published_ber,
                old.published_uniformity,
            );
            println!("ber {} uniformity {}", new.mean_ber, new.mean_uniformity);
            new == old
        }
        "reproduce-attack" => {
            let cfg: AttackRowConfig = serde_json::from_value(line.config)?;
            let old: TrialsResult = serde_json::from_value(line.result)?;
            let (best, reports) = cfg.experiment.run_best_of(cfg.trials)?;
            println!("test accuracy {:.4}", reports[best].test_accuracy);
            best == old.best && same_training(&reports, &old.reports)
        }
        other => bail!(Error::Config(format!("report kind `{other}` cannot be re-run"))),
    };
    if matches {
        println!("report {} reproduced exactly", line.id);
        Ok(0)
    } else {
        println!("report {} NOT reproduced", line.id);
        Ok(EXIT_MISMATCH)
    }
}
