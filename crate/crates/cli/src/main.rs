//! `agcorrect` command-line entry point.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use agcorrect::baseline::{context_weeks, predict, BaselineSource};
use agcorrect::evaluation::{ablate, per_plot_csv, AblationMode};
use agcorrect::features::{build_kg, profile_dataset};
use agcorrect::ingest::{
    generate_synthetic, write_long_csv, write_predictions_csv, ArtifactSpec, CsvSchema, PredictionTable, SeriesProfile,
    SyntheticSpec,
};
use agcorrect::runner::{audit_leakage, build_policy, load_dataset, PolicyKind, RunConfig, RunReport};
use agcorrect::toolkit::ToolName;
use agcorrect::{Error, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(name = "agcorrect", version, about = "Post-hoc correction of weekly yield forecasts")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run a season and write records.jsonl and summary.json.
    Run(RunArgs),
    /// Run the ablation matrix and print a Markdown table.
    Ablate {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, value_enum, default_value = "leave-one-out")]
        mode: ModeArg,
    },
    /// Print the dataset profile and knowledge graph summary.
    Profile(RunArgs),
    /// Write a synthetic dataset as long CSV.
    GenSynthetic(SynthArgs),
    /// Render tables from a stored run directory.
    Report {
        dir: PathBuf,
        /// Also write per_plot.csv and tool_usage.csv into the directory.
        #[arg(long)]
        csv: bool,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ModeArg {
    LeaveOneOut,
    OnlyOne,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum PolicyArg {
    Rule,
    Remote,
}

#[derive(Args, Debug, Default)]
struct RunArgs {
    /// TOML run configuration; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// External quantile predictions CSV (entity_id, week_index, q10, q50, q90).
    #[arg(long)]
    predictions: Option<PathBuf>,
    #[arg(long, value_enum)]
    policy: Option<PolicyArg>,
    #[arg(long)]
    endpoint: Option<String>,
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    horizon: Option<u32>,
    #[arg(long)]
    k: Option<usize>,
    /// Disable a tool; repeatable.
    #[arg(long = "disable-tool", value_parser = parse_tool)]
    disable_tool: Vec<ToolName>,
    /// Keep only this tool (plus apply_correction); repeatable.
    #[arg(long = "only-tool", value_parser = parse_tool)]
    only_tool: Vec<ToolName>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Column mapping as key=value pairs, e.g. `entity=State,week=Period,yield=Value`.
    #[arg(long)]
    schema: Option<String>,
}

#[derive(Args, Debug)]
struct SynthArgs {
    /// Dataset CSV to write.
    #[arg(long)]
    out: PathBuf,
    /// Also write the built-in baseline predictions (with artifacts) here.
    #[arg(long)]
    predictions_out: Option<PathBuf>,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    #[arg(long, default_value_t = 30)]
    n_train: usize,
    #[arg(long, default_value_t = 10)]
    n_test: usize,
    #[arg(long, value_enum, default_value = "seasonal")]
    profile: ProfileArg,
    /// Pre- and post-season spike magnitude relative to peak; 0 disables.
    #[arg(long, default_value_t = 0.0)]
    spike_magnitude: f64,
    #[arg(long, default_value_t = 3)]
    spike_count: usize,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ProfileArg {
    Seasonal,
    Continuous,
}

fn parse_tool(s: &str) -> std::result::Result<ToolName, String> {
    s.parse()
}

fn effective_config(args: &RunArgs) -> Result<RunConfig> {
    let mut cfg = match &args.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(p) = &args.dataset {
        cfg.dataset.path = Some(p.clone());
        cfg.dataset.synthetic = None;
    }
    if let Some(s) = &args.schema {
        cfg.dataset.schema = CsvSchema::from_pairs(s)?;
    }
    if let Some(p) = &args.predictions {
        cfg.baseline.predictions = Some(p.clone());
    }
    match args.policy {
        Some(PolicyArg::Rule) => cfg.policy.kind = PolicyKind::Rule,
        Some(PolicyArg::Remote) => cfg.policy.kind = PolicyKind::Remote,
        None => {}
    }
    if let Some(e) = &args.endpoint {
        cfg.policy.remote.endpoint = e.clone();
    }
    if let Some(m) = &args.model {
        cfg.policy.remote.model = m.clone();
    }
    if let Some(h) = args.horizon {
        cfg.horizon = h;
    }
    if let Some(k) = args.k {
        cfg.k = k;
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(d) = &args.out_dir {
        cfg.output.dir = Some(d.clone());
    }
    if !args.only_tool.is_empty() {
        if !args.disable_tool.is_empty() {
            return Err(Error::Argument("--only-tool and --disable-tool are mutually exclusive".into()));
        }
        cfg.disabled_tools = ToolName::ALL
            .into_iter()
            .filter(|t| *t != ToolName::ApplyCorrection && !args.only_tool.contains(t))
            .collect();
    }
    for t in &args.disable_tool {
        if !cfg.disabled_tools.contains(t) {
            cfg.disabled_tools.push(*t);
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

fn write(path: &Path, body: &str) -> Result<()> {
    std::fs::write(path, body).map_err(|e| Error::file(path, e))
}

fn cmd_run(args: &RunArgs) -> Result<()> {
    let mut cfg = effective_config(args)?;
    if cfg.output.dir.is_none() {
        cfg.output.dir = Some(PathBuf::from("agcorrect-out"));
    }
    let report = agcorrect::runner::run_season(&cfg)?;
    audit_leakage(&report)?;
    let dir = cfg.output.dir.as_ref().expect("output dir set above");
    print_summary(&report);
    println!("wrote {}", dir.display());
    Ok(())
}

fn print_summary(report: &RunReport) {
    let s = &report.summary;
    println!(
        "dataset {} ({} train, {} test), profile {}",
        s.dataset.name,
        s.dataset.train_entities,
        s.dataset.test_entities,
        s.profile.kind.as_str()
    );
    println!("{} predictions, {} skipped", s.records, s.skipped.len());
    if let Some(m) = &s.metrics {
        println!("\n| Forecast | MAE | RMSE | MASE |\n|---|---:|---:|---:|");
        println!("| raw | {:.4} | {:.4} | {:.4} |", m.raw.mae, m.raw.rmse, m.raw.mase);
        println!("| corrected | {:.4} | {:.4} | {:.4} |", m.corrected.mae, m.corrected.rmse, m.corrected.mase);
    }
    println!("\n{}", s.tool_usage.to_markdown());
}

fn cmd_ablate(args: &RunArgs, mode: ModeArg) -> Result<()> {
    let cfg = effective_config(args)?;
    let collection = load_dataset(&cfg.dataset)?;
    let mode = match mode {
        ModeArg::LeaveOneOut => AblationMode::LeaveOneOut,
        ModeArg::OnlyOne => AblationMode::OnlyOne,
    };
    let result = ablate(&cfg, &collection, mode)?;
    let table = result.to_markdown();
    print!("{table}");
    if let Some(dir) = &cfg.output.dir {
        std::fs::create_dir_all(dir).map_err(|e| Error::file(dir, e))?;
        write(&dir.join("ablation.md"), &table)?;
        write(&dir.join("ablation.json"), &serde_json_pretty(&result)?)?;
    }
    Ok(())
}

fn serde_json_pretty<T: serde::Serialize>(v: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(v)? + "\n")
}

fn cmd_profile(args: &RunArgs) -> Result<()> {
    let cfg = effective_config(args)?;
    let collection = load_dataset(&cfg.dataset)?;
    let kg = build_kg(collection.train())?;
    let mut policy = build_policy(&cfg.policy)?;
    let profile = profile_dataset(&kg, policy.as_mut(), cfg.seed);
    println!("profile: {} ({:?})", profile.kind.as_str(), profile.source);
    println!("median zero fraction: {:.3}", profile.median_zero_fraction);
    println!("knowledge graph: {} nodes, mean level {:.4}", kg.len(), kg.mean_level());
    match kg.typical_window() {
        Some(w) => println!("typical harvest window: weeks {}..{} (peak {})", w.start, w.end, w.peak),
        None => println!("typical harvest window: none"),
    }
    Ok(())
}

fn cmd_gen_synthetic(args: &SynthArgs) -> Result<()> {
    let mut spec = SyntheticSpec {
        seed: args.seed,
        n_train: args.n_train,
        n_test: args.n_test,
        profile: match args.profile {
            ProfileArg::Seasonal => SeriesProfile::Seasonal,
            ProfileArg::Continuous => SeriesProfile::Continuous,
        },
        ..SyntheticSpec::default()
    };
    if args.spike_magnitude > 0.0 {
        spec.artifacts = vec![
            ArtifactSpec::PreSeasonSpike { magnitude: args.spike_magnitude, count: args.spike_count },
            ArtifactSpec::PostSeasonSpike { magnitude: args.spike_magnitude, count: args.spike_count },
        ];
    }
    let collection = generate_synthetic(&spec);
    write_long_csv(&collection, &args.out)?;
    println!("wrote {} ({} entities)", args.out.display(), collection.entities.len());
    if let Some(path) = &args.predictions_out {
        let mut table = PredictionTable::new();
        for e in collection.test() {
            let artifacts: Vec<_> = collection.artifacts.iter().filter(|a| a.entity_id == e.entity_id).cloned().collect();
            for o in &e.observations {
                if context_weeks(o.week_index, 2).is_none() {
                    continue;
                }
                let raw = predict(e, o.week_index, 2, BaselineSource::Builtin, &artifacts)?;
                table.insert(&e.entity_id, o.week_index, raw.quantiles())?;
            }
        }
        write_predictions_csv(&table, path)?;
        println!("wrote {} ({} rows)", path.display(), table.len());
    }
    Ok(())
}

fn cmd_report(dir: &Path, csv: bool) -> Result<()> {
    let report = RunReport::load(dir)?;
    print_summary(&report);
    println!("| Entity | MAE raw | MAE corrected | Improvement |\n|---|---:|---:|---:|");
    for p in &report.summary.per_entity {
        println!("| {} | {:.4} | {:.4} | {:.1}% |", p.entity_id, p.mae_raw, p.mae_corrected, p.pct_improvement);
    }
    audit_leakage(&report)?;
    println!("\nleakage audit: pass");
    if csv {
        write(&dir.join("per_plot.csv"), &per_plot_csv(&report.summary.per_entity)?)?;
        write(&dir.join("tool_usage.csv"), &report.summary.tool_usage.to_csv()?)?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run(args) => cmd_run(&args),
        Command::Ablate { run, mode } => cmd_ablate(&run, mode),
        Command::Profile(args) => cmd_profile(&args),
        Command::GenSynthetic(args) => cmd_gen_synthetic(&args),
        Command::Report { dir, csv } => cmd_report(&dir, csv),
    }
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::from_default_env())
        .with_writer(std::io::stderr)
        .init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_configuration() {
                ExitCode::from(1)
            } else {
                ExitCode::from(2)
            }
        }
    }
}

