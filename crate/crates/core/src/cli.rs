//! The `mmrp` command line: `generate`, `infer`, `evaluate`, `experiment`.
//!
//! Exit status is 0 on success, 1 on runtime errors and 2 on usage errors.

use std::ffi::OsString;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::error::Result;
use crate::eval::{f_sn, f_trans, run_experiment, ExperimentGrid, Metrics};
use crate::events::{read_clustering, read_events, read_events_with_truth, write_clustering, write_events, Clustering};
use crate::model::{ClutterIntensity, ModelConfig};
use crate::solver::{infer, SolverKind};
use crate::synth::{self, AnalysisParams, GeneratorConfig, GeneratorKind};
use crate::Error;

/// Environment variable naming the default model file for `infer`.
pub const MODEL_ENV: &str = "MMRP_MODEL";

#[derive(Debug, Parser)]
#[command(name = "mmrp", version, about = "Cluster timestamped observations into MRP tracks plus clutter")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic alternating-tone event file with a truth column.
    Generate(GenerateArgs),
    /// Cluster an event file with a model and write the labels.
    Infer(InferArgs),
    /// Score a predicted clustering against ground truth.
    Evaluate(EvaluateArgs),
    /// Run a grid of synthetic experiments and write CSV reports.
    Experiment(ExperimentArgs),
}

#[derive(Debug, Args)]
#[command(allow_negative_numbers = true)]
pub struct GenerateArgs {
    #[arg(long, value_enum, default_value_t = GeneratorKind::Coherent)]
    pub kind: GeneratorKind,
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u32).range(1..))]
    pub streams: u32,
    #[arg(long)]
    pub duration: Option<f64>,
    #[arg(long, default_value_t = 0.0)]
    pub snr_db: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// JSON generator settings used as the base for the flags above.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    /// Also write the matched analysis model, with the true SNR, here.
    #[arg(long)]
    pub model_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct InferArgs {
    #[arg(long)]
    pub events: PathBuf,
    #[arg(long, env = MODEL_ENV)]
    pub model: PathBuf,
    #[arg(long, value_enum, default_value_t = SolverKind::Optimal)]
    pub solver: SolverKind,
    #[arg(long)]
    pub out: PathBuf,
    /// Write the solved network as Graphviz DOT (`-` for stdout).
    #[arg(long)]
    pub dump_network: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Event file with a truth column, or a clustering file.
    #[arg(long)]
    pub truth: PathBuf,
    /// Clustering file, or event file with a truth column.
    #[arg(long)]
    pub predicted: PathBuf,
    /// Print one CSV row instead of text.
    #[arg(long)]
    pub csv: bool,
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    /// JSON grid; the built-in default grid when omitted.
    #[arg(long)]
    pub grid: Option<PathBuf>,
    #[arg(long)]
    pub runs: Option<usize>,
    #[arg(long)]
    pub master_seed: Option<u64>,
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Worker threads; 0 uses every CPU.
    #[arg(long, default_value_t = 0)]
    pub jobs: usize,
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

pub fn main() -> ExitCode {
    run(std::env::args_os())
}

pub fn execute(command: Command) -> Result<()> {
    match command {
        Command::Generate(a) => generate(a),
        Command::Infer(a) => infer_cmd(a),
        Command::Evaluate(a) => evaluate(a),
        Command::Experiment(a) => experiment(a),
    }
}

fn generate(a: GenerateArgs) -> Result<()> {
    let base = match &a.config {
        Some(path) => serde_json::from_str(&std::fs::read_to_string(path)?)?,
        None => GeneratorConfig::default(),
    };
    let config = GeneratorConfig {
        kind: a.kind,
        num_streams: a.streams as usize,
        duration: a.duration.unwrap_or(base.duration),
        snr_db: a.snr_db,
        seed: a.seed,
        ..base
    };
    let data = synth::generate(&config)?;
    write_events(&data.events, Some(&data.truth), &a.out)?;
    if let Some(path) = &a.model_out {
        let model = synth::analysis_model(
            config.kind.matched_model(),
            &config,
            &AnalysisParams::default(),
            ClutterIntensity::SnrDb(config.snr_db),
            data.clutter_region,
        )?;
        std::fs::write(path, model.to_json())?;
    }
    println!(
        "wrote {} events ({} signal, {} clutter, {} tracks) to {}",
        data.events.len(),
        data.num_signal,
        data.events.len() - data.num_signal,
        data.truth.num_clusters(),
        a.out.display()
    );
    Ok(())
}

fn infer_cmd(a: InferArgs) -> Result<()> {
    let events = read_events(&a.events)?;
    let model = ModelConfig::load(&a.model)?.resolve_for(&events)?;
    let result = infer(&events, &model, a.solver)?;
    write_clustering(&result.clustering, &a.out)?;
    if let Some(path) = &a.dump_network {
        let dot = result.network.to_dot();
        if path.as_os_str() == "-" {
            print!("{dot}");
        } else {
            std::fs::write(path, dot)?;
        }
    }
    println!(
        "K={} signal={} noise={} log_ratio={}",
        result.clustering.num_clusters(),
        result.clustering.num_signal(),
        result.clustering.num_noise(),
        result.log_ratio
    );
    Ok(())
}

/// Reads either an event file with a truth column or a clustering file.
fn read_any_clustering(path: &Path) -> Result<Clustering> {
    let mut first = String::new();
    BufReader::new(std::fs::File::open(path)?).read_line(&mut first)?;
    let fields: Vec<&str> = first.trim().split(',').map(str::trim).collect();
    if fields == ["id", "label"] {
        return read_clustering(path);
    }
    match read_events_with_truth(path)? {
        (_, Some(truth)) => Ok(truth),
        (_, None) => Err(Error::Config(format!("{} has no truth column", path.display()))),
    }
}

fn evaluate(a: EvaluateArgs) -> Result<()> {
    let truth = read_any_clustering(&a.truth)?;
    let predicted = read_any_clustering(&a.predicted)?;
    let sn = f_sn(&truth, &predicted)?;
    let tr = f_trans(&truth, &predicted)?;
    if a.csv {
        println!("metric,f,t_plus,f_plus,f_minus");
        for (name, m) in [("f_sn", sn), ("f_trans", tr)] {
            println!("{name},{},{},{},{}", m.f_measure, m.t_plus, m.f_plus, m.f_minus);
        }
    } else {
        let line = |name: &str, m: Metrics| {
            println!(
                "{name} = {:.6} (t+ {}, f+ {}, f- {})",
                m.f_measure, m.t_plus, m.f_plus, m.f_minus
            )
        };
        line("f_sn", sn);
        line("f_trans", tr);
    }
    Ok(())
}

fn experiment(a: ExperimentArgs) -> Result<()> {
    let mut grid = match &a.grid {
        Some(path) => ExperimentGrid::load(path)?,
        None => ExperimentGrid::default(),
    };
    if let Some(runs) = a.runs {
        grid.runs = runs;
    }
    if let Some(seed) = a.master_seed {
        grid.master_seed = seed;
    }
    let report = run_experiment(&grid, a.jobs)?;
    report.write(&a.out_dir)?;
    println!(
        "{} runs over {} cells written to {}",
        report.runs.len(),
        report.cells.len(),
        a.out_dir.display()
    );
    Ok(())
}
