//! Command-line front end: runs one or all scheduling modes over a seed
//! range and writes CSV artifacts.
//!
//! Exit status: 0 on success, 1 on a usage error, 2 on a runtime error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, ValueEnum};
use rayon::prelude::*;

use coexsim::output::{self, MeanStats, RunManifest};
use coexsim::{run, Mode, SimConfig, SimReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModeArg {
    Lte,
    Wifi,
    Joint,
    All,
}

impl ModeArg {
    fn modes(self) -> Vec<Mode> {
        match self {
            ModeArg::Lte => vec![Mode::Lte],
            ModeArg::Wifi => vec![Mode::Wifi],
            ModeArg::Joint => vec![Mode::Joint],
            ModeArg::All => Mode::ALL.to_vec(),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "coexsim", version, about = "LTE-U / WiFi coexistence scheduling simulator")]
struct Args {
    /// TOML config file; built-in defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,

    #[arg(long, value_enum, default_value = "all")]
    mode: ModeArg,

    /// First seed; overrides the config's seed.
    #[arg(long)]
    seed: Option<u64>,

    /// Output directory, created if missing.
    #[arg(long, default_value = "out")]
    out: PathBuf,

    /// Number of consecutive seeds to sweep.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    seeds: u64,
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(&args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn execute(args: &Args) -> anyhow::Result<()> {
    let mut config = match &args.config {
        Some(path) => SimConfig::from_path(path)?,
        None => SimConfig::default(),
    };
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    let first = config.seed;
    let seeds: Vec<u64> = (0..args.seeds)
        .map(|i| first.checked_add(i).context("seed range overflows u64"))
        .collect::<anyhow::Result<_>>()?;
    let modes = args.mode.modes();

    std::fs::create_dir_all(&args.out)
        .with_context(|| format!("cannot create output directory {}", args.out.display()))?;
    let manifest = RunManifest::new(&config, &seeds, &modes, &args.out);
    write(&args.out, output::MANIFEST_FILE, manifest.to_toml().as_bytes())?;

    let jobs: Vec<(u64, Mode)> = seeds.iter().flat_map(|&s| modes.iter().map(move |&m| (s, m))).collect();
    let reports: Vec<SimReport> = jobs
        .par_iter()
        .map(|&(seed, mode)| {
            let cfg = SimConfig { seed, ..config.clone() };
            let report = run(&cfg, mode).with_context(|| format!("{} run, seed {seed}", mode.as_str()))?;
            write(&args.out, &output::per_ue_file_name(mode, seed), &output::per_ue_csv(&report)?)?;
            write(&args.out, &output::stats_file_name(mode, seed), &output::stats_csv(&report)?)?;
            Ok(report)
        })
        .collect::<anyhow::Result<_>>()?;

    if modes.len() == Mode::ALL.len() {
        let mean = |mode: Mode| {
            let stats: Vec<_> = reports.iter().filter(|r| r.mode == mode).map(|r| r.stats).collect();
            MeanStats::of(&stats)
        };
        let table = output::comparison_csv(&mean(Mode::Lte)?, &mean(Mode::Wifi)?, &mean(Mode::Joint)?)?;
        write(&args.out, output::COMPARISON_FILE, &table)?;
    }
    Ok(())
}

fn write(dir: &Path, name: &str, bytes: &[u8]) -> anyhow::Result<()> {
    output::write_atomic(dir, name, bytes).with_context(|| format!("cannot write {}", dir.join(name).display()))
}
