use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use nbcd_core::hyperparam::grid_search;
use nbcd_core::{GibbsConfig, GridDims, GridSearchConfig, PriorCriteria};
use nbcd_sim::report::{render_table, to_csv, to_json, write_file};
use nbcd_sim::{builtin_scenarios, find_scenario, preset, run_study, study_scenarios, PresetName, Scenario, StudySpec};
use serde::Serialize;

#[derive(Parser)]
#[command(name = "nbcd", version, about = "Dual-agent dose-finding simulations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Replicate trials under one or more scenarios and report operating characteristics.
    Simulate(SimulateArgs),
    /// Built-in scenarios.
    Scenarios {
        #[command(subcommand)]
        command: ScenarioCommand,
    },
    /// Search the structured prior family for shapes matching corner medians.
    Hyperparam(HyperparamArgs),
}

#[derive(Subcommand)]
enum ScenarioCommand {
    /// Print the built-in scenarios.
    List {
        /// Emit JSON in the scenario file format.
        #[arg(long)]
        json: bool,
    },
}

#[derive(Args)]
struct SimulateArgs {
    /// Built-in name (e.g. study1/A), a path to a scenario JSON file, or
    /// `all` for every scenario of the preset. Repeatable.
    #[arg(long, required = true)]
    scenario: Vec<String>,
    #[arg(long, value_enum)]
    preset: PresetName,
    #[arg(long, default_value_t = 2000)]
    replicates: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Worker threads; defaults to the available cores.
    #[arg(long)]
    workers: Option<usize>,
    /// Kept draws per posterior chain.
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    burn_in: Option<usize>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Do not print the summary table.
    #[arg(long)]
    quiet: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum Ranges {
    Default,
    Wide,
}

#[derive(Args)]
struct HyperparamArgs {
    /// Lattice size as ROWSxCOLS, e.g. 4x4.
    #[arg(long)]
    dims: GridDims,
    #[arg(long)]
    target_min: f64,
    #[arg(long)]
    target_max: f64,
    #[arg(long, default_value_t = 0.01)]
    tolerance: f64,
    #[arg(long, value_enum, default_value = "default")]
    ranges: Ranges,
    #[arg(long)]
    n_m: Option<usize>,
    #[arg(long)]
    n_t: Option<usize>,
    #[arg(long)]
    n_l: Option<usize>,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    burn_in: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

fn default_workers() -> usize {
    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
}

fn resolve_scenarios(names: &[String], preset: PresetName) -> Result<Vec<Scenario>> {
    let mut out = Vec::new();
    for name in names {
        if name == "all" {
            out.extend(study_scenarios(preset.study()));
        } else if let Some(s) = find_scenario(name) {
            out.push(s);
        } else if Path::new(name).is_file() {
            out.push(Scenario::from_file(Path::new(name))?);
        } else {
            bail!(nbcd_sim::SimError::UnknownScenario(name.clone()));
        }
    }
    Ok(out)
}

fn simulate(a: SimulateArgs) -> Result<()> {
    let mut p = preset(a.preset);
    p.design.gibbs = GibbsConfig {
        n_samples: a.samples.unwrap_or(p.design.gibbs.n_samples),
        burn_in: a.burn_in.unwrap_or(p.design.gibbs.burn_in),
        ..p.design.gibbs
    };
    let spec = StudySpec {
        preset: p,
        scenarios: resolve_scenarios(&a.scenario, a.preset)?,
        replicates: a.replicates,
        master_seed: a.seed,
        workers: a.workers.unwrap_or_else(default_workers),
    };
    let report = run_study(&spec)?;
    write_file(&a.out, &to_json(&report))?;
    if let Some(path) = &a.csv {
        write_file(path, &to_csv(&report)?)?;
    }
    if !a.quiet {
        print!("{}", render_table(&report));
    }
    Ok(())
}

fn list_scenarios(json: bool) -> Result<()> {
    let all = builtin_scenarios();
    if json {
        let files: Vec<_> = all.iter().map(Scenario::to_file).collect();
        println!("{}", serde_json::to_string_pretty(&files)?);
        return Ok(());
    }
    for s in all {
        println!("{:<10} {}  θ = {}", s.name, s.dims, s.theta);
        for row in s.true_p.chunks(s.dims.cols()) {
            let cells: Vec<String> = row.iter().map(|p| format!("{p:.2}")).collect();
            println!("    {}", cells.join(" "));
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct HyperparamOutput {
    rows: usize,
    cols: usize,
    criteria: PriorCriteria,
    alpha: Vec<f64>,
    beta: Vec<f64>,
    template: nbcd_core::ShapeTemplate,
    alpha0: f64,
    beta0: f64,
    evaluated: usize,
    feasible: usize,
    confirmed_medians: Vec<(f64, f64)>,
}

fn hyperparam(a: HyperparamArgs) -> Result<()> {
    let base = match a.ranges {
        Ranges::Default => GridSearchConfig::default(),
        Ranges::Wide => GridSearchConfig::wide(),
    };
    let cfg = GridSearchConfig {
        n_m: a.n_m.unwrap_or(base.n_m),
        n_t: a.n_t.unwrap_or(base.n_t),
        n_l: a.n_l.unwrap_or(base.n_l),
        gibbs: GibbsConfig {
            n_samples: a.samples.unwrap_or(base.gibbs.n_samples),
            burn_in: a.burn_in.unwrap_or(base.gibbs.burn_in),
            seed: a.seed,
        },
        confirm: GibbsConfig { seed: a.seed + 1, ..base.confirm },
        ..base
    };
    let criteria = PriorCriteria::new(a.target_min, a.target_max, a.tolerance);
    let pool = rayon::ThreadPoolBuilder::new().num_threads(a.workers.unwrap_or_else(default_workers)).build()?;
    let found = pool.install(|| grid_search(&criteria, &cfg, a.dims)).context("grid search")?;
    let out = HyperparamOutput {
        rows: a.dims.rows(),
        cols: a.dims.cols(),
        criteria,
        alpha: found.best.alpha.clone(),
        beta: found.best.beta.clone(),
        template: found.template,
        alpha0: found.alpha0,
        beta0: found.beta0,
        evaluated: found.evaluated,
        feasible: found.feasible.len(),
        confirmed_medians: found.confirmed_medians.clone(),
    };
    let text = serde_json::to_string_pretty(&out)?;
    write_file(&a.out, &text)?;
    println!("{text}");
    Ok(())
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Simulate(a) => simulate(a),
        Command::Scenarios { command: ScenarioCommand::List { json } } => list_scenarios(json),
        Command::Hyperparam(a) => hyperparam(a),
    }
}
