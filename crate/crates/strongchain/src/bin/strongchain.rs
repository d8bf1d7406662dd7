//! Command-line front end: run scenarios, verify invariants, sweep
//! seeds, and emit the bundled scenario corpus.

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use std::fs;
use std::io::Write;
use std::path::PathBuf;
use strongchain::harness::scenario::{bundled, bundled_by_name, Scenario};
use strongchain::harness::{report, run_scenario, sweep};
use strongchain::tcrypto::BackendKind;

#[derive(Parser)]
#[command(name = "strongchain", about = "Deterministic simulator for a causal-order blockchain")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args, Clone)]
struct ScenarioArgs {
    /// Path to a scenario JSON file
    #[arg(long, conflicts_with = "builtin")]
    scenario: Option<PathBuf>,
    /// Name of a bundled scenario (see `emit-scenarios`)
    #[arg(long)]
    builtin: Option<String>,
    /// Override the scenario seed
    #[arg(long)]
    seed: Option<u64>,
    /// Override the number of rounds
    #[arg(long)]
    rounds: Option<u64>,
    /// Override the threshold-encryption backend (mock | dlog)
    #[arg(long)]
    backend: Option<String>,
}

impl ScenarioArgs {
    fn load(&self) -> anyhow::Result<Scenario> {
        let mut sc = match (&self.scenario, &self.builtin) {
            (Some(path), _) => {
                let text = fs::read_to_string(path)
                    .with_context(|| format!("reading {}", path.display()))?;
                serde_json::from_str(&text).context("parsing scenario JSON")?
            }
            (None, Some(name)) => bundled_by_name(name)
                .with_context(|| format!("no bundled scenario named {name}"))?,
            (None, None) => bail!("pass --scenario FILE or --builtin NAME"),
        };
        if let Some(seed) = self.seed {
            sc.seed = seed;
        }
        if let Some(rounds) = self.rounds {
            sc.rounds = rounds;
        }
        if let Some(backend) = &self.backend {
            sc.backend = match backend.as_str() {
                "mock" => BackendKind::Mock,
                "dlog" => BackendKind::Dlog,
                other => bail!("unknown backend {other} (expected mock or dlog)"),
            };
        }
        sc.validate()?;
        Ok(sc)
    }
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a scenario and write trace.ndjson, chain.json and
    /// report.json
    Run {
        #[command(flatten)]
        scenario: ScenarioArgs,
        /// Output directory
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Run a scenario and exit nonzero unless every invariant holds
    Verify {
        #[command(flatten)]
        scenario: ScenarioArgs,
    },
    /// Run a scenario under many seeds and print the aggregate
    Sweep {
        #[command(flatten)]
        scenario: ScenarioArgs,
        /// How many consecutive seeds to run, starting at the
        /// scenario's seed
        #[arg(long, default_value_t = 16)]
        count: usize,
        /// Force the sequential path even when the parallel feature is
        /// compiled in
        #[arg(long)]
        sequential: bool,
    },
    /// Run a scenario and print its full report to stdout
    Report {
        #[command(flatten)]
        scenario: ScenarioArgs,
    },
    /// Write every bundled scenario as JSON into a directory
    EmitScenarios {
        #[arg(long, default_value = "scenarios")]
        dir: PathBuf,
    },
}

fn main() -> anyhow::Result<()> {
    match Cli::parse().cmd {
        Cmd::Run { scenario, out } => {
            let sc = scenario.load()?;
            let output = run_scenario(&sc)?;
            let rep = report::analyze(&output)?;
            fs::create_dir_all(&out)?;
            let mut trace = fs::File::create(out.join("trace.ndjson"))?;
            for ev in &output.trace {
                serde_json::to_writer(&mut trace, ev)?;
                trace.write_all(b"\n")?;
            }
            let chain: Vec<_> = output.tree.consensus_chain().unwrap_or_default();
            fs::write(out.join("chain.json"), serde_json::to_string_pretty(&chain)?)?;
            fs::write(out.join("report.json"), serde_json::to_string_pretty(&rep)?)?;
            println!(
                "{}: {} rounds, {} blocks, {} recorded txs, {} violations -> {}",
                sc.name,
                sc.rounds,
                rep.committed_blocks,
                rep.recorded_txs,
                rep.violations.len(),
                out.display()
            );
            if let Some(attack) = &rep.attack {
                println!("attack {:?}: success = {}", attack.kind, attack.success);
            }
            if !rep.invariants_ok() {
                bail!("invariant check failed (see report.json)");
            }
            Ok(())
        }
        Cmd::Verify { scenario } => {
            let sc = scenario.load()?;
            let rep = report::analyze(&run_scenario(&sc)?)?;
            if rep.invariants_ok() {
                println!("{}: ok", sc.name);
                Ok(())
            } else {
                bail!(
                    "{}: invariants violated (digests_consistent={}, violations={}, fairness_ok={})",
                    sc.name,
                    rep.digests_consistent,
                    rep.violations.len(),
                    rep.fairness_ok
                );
            }
        }
        Cmd::Sweep { scenario, count, sequential } => {
            let sc = scenario.load()?;
            let seeds = sweep::seeds(sc.seed, count);
            let reports = if sequential {
                sweep::sweep_sequential(&sc, &seeds)?
            } else {
                sweep::sweep(&sc, &seeds)?
            };
            let summary = sweep::summarize(&reports);
            println!("{}", serde_json::to_string_pretty(&summary)?);
            if !summary.all_ok {
                bail!("{} of {} runs violated invariants", summary.invariant_failures, summary.runs);
            }
            Ok(())
        }
        Cmd::Report { scenario } => {
            let sc = scenario.load()?;
            let rep = report::analyze(&run_scenario(&sc)?)?;
            println!("{}", serde_json::to_string_pretty(&rep)?);
            Ok(())
        }
        Cmd::EmitScenarios { dir } => {
            fs::create_dir_all(&dir)?;
            for sc in bundled() {
                let path = dir.join(format!("{}.json", sc.name));
                fs::write(&path, serde_json::to_string_pretty(&sc)?)?;
                println!("{}", path.display());
            }
            Ok(())
        }
    }
}
