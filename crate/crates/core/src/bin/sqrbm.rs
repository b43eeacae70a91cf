use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use sqrbm::datasets::write_dataset;
use sqrbm::experiments::{
    self, budget_specs, export_results, load_results, run_single, summarize, sweep_specs, ExperimentConfig, RunRecord,
    RunSpec,
};
use sqrbm::{par, validate, Error, Result};

#[derive(Parser)]
#[command(name = "sqrbm", version, about = "Train and benchmark RBMs and semi-quantum RBMs")]
struct Cli {
    #[command(subcommand)]
    verb: Verb,
    /// Key-value config file; defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the config's `seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// `key=value`, repeatable.
    #[arg(long = "override", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,
}

#[derive(Subcommand, Clone, Copy, PartialEq, Eq)]
enum Verb {
    /// Write the configured dataset.
    GenData,
    /// One training run.
    Train,
    /// Hidden-unit sweep over model kinds and seeds.
    Sweep,
    /// CD against shot-budgeted likelihood training.
    Budget,
    /// Oracle-equivalence and gradient checks.
    Validate,
    /// Rebuild summary and manifest for a results directory.
    Export,
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig> {
    let mut config = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    config.apply_overrides(&cli.overrides)?;
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    config.validate()?;
    Ok(config)
}

fn out_dir(cli: &Cli, default: &str) -> PathBuf {
    cli.out.clone().unwrap_or_else(|| PathBuf::from("results").join(default))
}

fn print_summary(records: &[RunRecord]) {
    println!("{:<16} {:>4} {:>14} {:>14} {:>16}", "group", "runs", "median_kl", "std_kl", "quantum_samples");
    for s in summarize(records) {
        println!(
            "{:<16} {:>4} {:>14.6e} {:>14.6e} {:>16}",
            s.group, s.runs, s.median_final_kl, s.std_final_kl, s.median_total_quantum_samples
        );
    }
}

/// Run every spec; if some fail, export the finished ones flagged as partial.
fn run_specs(config: &ExperimentConfig, specs: &[RunSpec], dir: &Path) -> Result<Vec<RunRecord>> {
    let data = experiments::prepare_data(config)?;
    let results = par::map(specs, |spec| run_single(config, spec, &data, None));
    let mut done = Vec::new();
    let mut first_error = None;
    for r in results {
        match r {
            Ok(record) => done.push(record),
            Err(e) => {
                first_error.get_or_insert(e);
            }
        }
    }
    match first_error {
        None => {
            export_results(&done, dir)?;
            Ok(done)
        }
        Some(e) => {
            if !done.is_empty() {
                experiments::export_partial(&done, dir)?;
            }
            Err(e)
        }
    }
}

fn dispatch(cli: &Cli) -> Result<()> {
    if let Some(jobs) = cli.jobs {
        par::set_jobs(jobs);
    }
    match cli.verb {
        Verb::GenData => {
            let config = load_config(cli)?;
            let dir = out_dir(cli, "data");
            std::fs::create_dir_all(&dir).map_err(|e| Error::Io { path: dir.clone(), source: e })?;
            let data = experiments::prepare_data(&config)?;
            let path = dir.join(format!("{}.txt", config.dataset));
            write_dataset(&data.dataset, &path)?;
            println!("wrote {} ({} samples)", path.display(), data.dataset.samples().len());
            if config.min_count > 1 {
                let path = dir.join(format!("{}-train.txt", config.dataset));
                write_dataset(&data.training, &path)?;
                println!(
                    "wrote {} ({} samples, support {})",
                    path.display(),
                    data.training.samples().len(),
                    data.training.empirical().support().len()
                );
            }
        }
        Verb::Train => {
            let config = load_config(cli)?;
            let dir = out_dir(cli, "train");
            let spec = experiments::train_spec(&config);
            let checkpoints = dir.join(&spec.run_id).join("checkpoints");
            let record = experiments::run_train(&config, Some(&checkpoints))?;
            export_results(std::slice::from_ref(&record), &dir)?;
            println!(
                "{}: {} iterations, final KL {:.6e}, quantum samples {}",
                spec.run_id,
                record.ledger.log.len(),
                record.final_kl(),
                record.ledger.quantum
            );
        }
        Verb::Sweep => {
            let config = load_config(cli)?;
            let records = run_specs(&config, &sweep_specs(&config), &out_dir(cli, "sweep"))?;
            print_summary(&records);
        }
        Verb::Budget => {
            let config = load_config(cli)?;
            let records = run_specs(&config, &budget_specs(&config), &out_dir(cli, "budget"))?;
            print_summary(&records);
        }
        Verb::Validate => {
            let reports = validate::run_all()?;
            for r in &reports {
                println!("{r}");
            }
            let failed: Vec<&str> = reports.iter().filter(|r| !r.passed).map(|r| r.id).collect();
            if !failed.is_empty() {
                return Err(Error::Contract(format!("failed checks: {}", failed.join(","))));
            }
        }
        Verb::Export => {
            let dir = cli.out.clone().unwrap_or_else(|| PathBuf::from("results"));
            let records = load_results(&dir)?;
            export_results(&records, &dir)?;
            print_summary(&records);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let message = e.to_string().replace('\n', " ");
            eprintln!("error: kind={} message={}", e.kind(), message);
            ExitCode::FAILURE
        }
    }
}
