use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use optlat::defaults::default_config;
use optlat::{parse_config, run_scenario, RunOptions, ScenarioKind};

/// Ballistic transport of cold atoms in a 1D optical lattice.
#[derive(Debug, Parser)]
#[command(name = "optlat", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Bloch band energies and group velocities
    Bands(Common),
    /// Thermal-cloud widths, rates and profiles
    Expand(Common),
    /// One mean-field release
    Gpe(Common),
    /// Width against time at s = 1.6 and 4.9
    Fig1(Common),
    /// Expansion rate against depth
    Fig2(Common),
    /// Density profiles and sharp fronts at s = 2.25
    Fig3a(Common),
    /// Condensate at s = 13.4: mean-field against band theory
    Fig3b(Common),
    /// Expansion rate against sound speed
    Regimes(Common),
    /// Print the built-in configuration of a scenario
    Config { scenario: String },
}

#[derive(Debug, Args)]
struct Common {
    /// Scenario file; the built-in one when absent
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory [default: out/<scenario>]
    #[arg(long, env = "OPTLAT_OUT")]
    out: Option<PathBuf>,
    /// Worker threads (0: one per core)
    #[arg(long, default_value_t = 0)]
    threads: usize,
    /// Also write SVG plots
    #[arg(long)]
    svg: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (kind, common) = match cli.command {
        Command::Bands(c) => (ScenarioKind::Bands, c),
        Command::Expand(c) => (ScenarioKind::Expand, c),
        Command::Gpe(c) => (ScenarioKind::Gpe, c),
        Command::Fig1(c) => (ScenarioKind::Fig1, c),
        Command::Fig2(c) => (ScenarioKind::Fig2, c),
        Command::Fig3a(c) => (ScenarioKind::Fig3a, c),
        Command::Fig3b(c) => (ScenarioKind::Fig3b, c),
        Command::Regimes(c) => (ScenarioKind::Regimes, c),
        Command::Config { scenario } => {
            return match scenario.parse::<ScenarioKind>() {
                Ok(k) => {
                    print!("{}", default_config(k));
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(2)
                }
            };
        }
    };
    let text = match &common.config {
        Some(p) => match std::fs::read_to_string(p) {
            Ok(t) => t,
            Err(e) => {
                eprintln!("error: {}: {e}", p.display());
                return ExitCode::from(2);
            }
        },
        None => default_config(kind).to_string(),
    };
    let sc = match parse_config(&text) {
        Ok(sc) => sc,
        Err(errs) => {
            for e in &errs.0 {
                eprintln!("error: {e}");
            }
            return ExitCode::from(2);
        }
    };
    if sc.kind != kind {
        eprintln!("error: config is for scenario `{}`, not `{kind}`", sc.kind);
        return ExitCode::from(2);
    }
    for w in &sc.warnings {
        eprintln!("warning: {w}");
    }
    let opts = RunOptions {
        out_dir: common.out.unwrap_or_else(|| PathBuf::from("out").join(&sc.name)),
        threads: common.threads,
        svg: common.svg,
        config_text: text,
    };
    let manifest = run_scenario(&sc, &opts);
    for o in &manifest.outputs {
        println!("{}  {}", o.sha256, opts.out_dir.join(&o.file).display());
    }
    for e in &manifest.errors {
        eprintln!("error: {e}");
    }
    eprintln!(
        "{}: {} dataset(s) in {:.1} s",
        manifest.scenario,
        manifest.datasets(),
        manifest.wall_clock_s
    );
    if manifest.succeeded() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
