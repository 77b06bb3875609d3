mod commands;
mod report;
mod settings;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_IO: u8 = 3;
pub const EXIT_DIVERGENCE: u8 = 4;
pub const EXIT_MISMATCH: u8 = 5;

#[derive(Parser, Debug)]
#[command(name = "copuf", version, about = "Simulate feed-forward arbiter PUF compositions and model them with MLPs")]
pub struct Cli {
    /// Directory for descriptors, datasets and the reports.jsonl file.
    #[arg(long, global = true, env = "COPUF_OUT_DIR", default_value = ".")]
    pub out_dir: PathBuf,

    /// TOML file with default settings; command-line flags take precedence.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Write an instance descriptor.
    Gen(GenArgs),
    /// Measure bit error rate and uniformity of an instance.
    Metrics(MetricsArgs),
    /// Collect a challenge-response dataset.
    Crps(CrpsArgs),
    /// Train an MLP on dataset files and report its test accuracy.
    Attack(AttackArgs),
    /// Run the preset rows of a results table.
    Reproduce(ReproduceArgs),
    /// Re-execute a report's embedded configuration and compare results.
    Rerun(RerunArgs),
}

/// Architecture selection shared by `gen` and `attack`.
#[derive(Args, Debug, Clone, Default)]
pub struct ArchArgs {
    /// apuf, ff, xor-ff, oax-ff, mn or ipuf.
    #[arg(long)]
    pub arch: Option<String>,
    /// Number of stages.
    #[arg(long)]
    pub n: Option<usize>,
    /// Loop_A..Loop_G or an explicit list such as "15→25,30" (or "15->25,30").
    #[arg(long)]
    pub loops: Option<String>,
    /// Member count of an XOR composition.
    #[arg(long)]
    pub z: Option<usize>,
    /// OR, AND and XOR group sizes of an OAX composition, e.g. 2,3,1.
    #[arg(long, value_parser = parse_triple)]
    pub xyz: Option<[usize; 3]>,
    /// Auxiliary chain sizes of an Mn design, e.g. 32,16,8.
    #[arg(long, value_parser = parse_triple)]
    pub sizes: Option<[usize; 3]>,
    /// Chains producing the interposed bit of an iPUF.
    #[arg(long)]
    pub x: Option<usize>,
    /// Chains producing the iPUF output.
    #[arg(long)]
    pub y: Option<usize>,
    /// 1-based interpose position of an iPUF (default n/2 + 1).
    #[arg(long)]
    pub interpose: Option<usize>,
}

impl ArchArgs {
    pub fn is_empty(&self) -> bool {
        self.arch.is_none()
    }
}

fn parse_triple(s: &str) -> Result<[usize; 3], String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if parts.len() != 3 {
        return Err(format!("expected three comma-separated integers, got `{s}`"));
    }
    let mut out = [0; 3];
    for (o, p) in out.iter_mut().zip(parts) {
        *o = p.parse().map_err(|_| format!("`{p}` is not a non-negative integer"))?;
    }
    Ok(out)
}

#[derive(Args, Debug)]
pub struct GenArgs {
    #[command(flatten)]
    pub arch: ArchArgs,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Nominal noise level stored as the instance default.
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Output path (default: <out-dir>/<arch-id>-s<seed>.toml).
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct MetricsArgs {
    /// Instance descriptor written by `gen`.
    #[arg(long)]
    pub instance: PathBuf,
    /// Nominal noise level (default: the descriptor's).
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Seed of the challenge list and noise streams.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub challenges: Option<usize>,
    #[arg(long)]
    pub repeats: Option<usize>,
    /// golden (noise-free reference) or majority.
    #[arg(long)]
    pub reference: Option<String>,
}

#[derive(Args, Debug)]
pub struct CrpsArgs {
    #[arg(long)]
    pub instance: PathBuf,
    #[arg(long)]
    pub count: Option<usize>,
    /// Nominal noise level (default: the descriptor's; 0 for noise-free data).
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Seed of the challenge and noise streams.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Binary dataset path (default: <out-dir>/<descriptor stem>-<count>.crp).
    #[arg(short, long)]
    pub output: Option<PathBuf>,
    /// Also export the records as CSV.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct AttackArgs {
    #[arg(long)]
    pub train: PathBuf,
    #[arg(long)]
    pub val: Option<PathBuf>,
    #[arg(long)]
    pub test: PathBuf,
    /// Descriptor of the attacked instance; alternative to the architecture flags.
    #[arg(long)]
    pub instance: Option<PathBuf>,
    #[command(flatten)]
    pub arch: ArchArgs,
    /// Hidden-layer exponent: `auto` or an integer giving layers (2^(l-1), 2^l, 2^(l-1)).
    #[arg(long)]
    pub l: Option<String>,
    /// Explicit hidden widths, e.g. 8,16,8 (overrides --l).
    #[arg(long, value_delimiter = ',')]
    pub hidden: Option<Vec<usize>>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    /// Model initialisation and shuffling seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Independent trainings; the one with the best validation accuracy is reported.
    #[arg(long)]
    pub trials: Option<usize>,
}

#[derive(Args, Debug)]
pub struct ReproduceArgs {
    /// table2, table4, table5, table8 .. table13.
    pub table: String,
    /// Comma-separated row ids or id prefixes.
    #[arg(long)]
    pub rows: Option<String>,
    /// Evaluate metrics rows at this nominal noise level only.
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Print the plan without running anything.
    #[arg(long)]
    pub dry_run: bool,
    /// Include rows that need millions of CRPs.
    #[arg(long)]
    pub all: bool,
    /// Instances averaged per metrics row.
    #[arg(long)]
    pub instances: Option<usize>,
    #[arg(long)]
    pub challenges: Option<usize>,
    #[arg(long)]
    pub repeats: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub trials: Option<usize>,
}

#[derive(Args, Debug)]
pub struct RerunArgs {
    /// A reports.jsonl file.
    pub reports: PathBuf,
    /// Report id (default: the last line).
    #[arg(long)]
    pub id: Option<String>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(commands::exit_code(&e))
        }
    }
}
