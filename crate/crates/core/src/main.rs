use std::fmt::Write as _;
use std::io::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use pcmoment::cli::{
    fit_command, ingest_path, seed_selection, simulate_command, BaselineChoice, CliError, Grouping,
    IngestOptions, Preset, SeedRule, SimulateSpec, Study, TiePolicy,
};
use pcmoment::estimator::FitConfig;
use pcmoment::links::LinkModel;
use pcmoment::simulate::MeritSlope;

#[derive(Parser)]
#[command(
    name = "pcmoment",
    version,
    about = "Moment estimation for paired comparison data"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct DataArgs {
    /// Games file with header `winner,loser[,count][,result]`.
    games: PathBuf,
    /// Link function: logistic or probit.
    #[arg(long, default_value = "probit")]
    link: String,
    /// Baseline subject label, or `fewest-wins`.
    #[arg(long, default_value = "fewest-wins")]
    baseline: String,
    /// Drawn games: drop or half.
    #[arg(long, default_value = "drop")]
    ties: String,
    /// Residual tolerance (default scales with the largest comparison total).
    #[arg(long)]
    tolerance: Option<f64>,
    #[arg(long, default_value_t = 100)]
    max_iterations: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Fit merits and print the ranking with standard errors.
    Fit {
        #[command(flatten)]
        data: DataArgs,
        /// Write the full report as JSON.
        #[arg(long, short)]
        output: Option<PathBuf>,
        /// Pairwise comparison `A:B`; repeatable.
        #[arg(long = "compare")]
        compare: Vec<String>,
        #[arg(long, default_value_t = 0.95)]
        level: f64,
    },
    /// Seed subjects per conference by won-lost percentage or merit.
    Seeds {
        #[command(flatten)]
        data: DataArgs,
        /// Grouping file with header `label,conference,division`.
        #[arg(long)]
        grouping: PathBuf,
        /// pct or merit.
        #[arg(long, default_value = "merit")]
        rule: String,
        #[arg(long, default_value_t = 6)]
        seeds: usize,
    },
    /// Run a Monte Carlo study.
    Simulate(SimulateArgs),
}

#[derive(Args)]
struct SimulateArgs {
    /// JSON file with the study settings; flags are ignored when given.
    #[arg(long)]
    config: Option<PathBuf>,
    /// table1 or table2.
    #[arg(long)]
    preset: Option<String>,
    /// connectivity, coverage or consistency.
    #[arg(long, default_value = "coverage")]
    study: String,
    /// Number of non-baseline subjects; repeat for a consistency study.
    #[arg(long, default_values_t = vec![100])]
    n: Vec<usize>,
    #[arg(long, default_value_t = 1)]
    trials: u32,
    /// half, two-thirds, quarter, linear, or a probability.
    #[arg(long, default_value = "quarter")]
    p_rule: String,
    #[arg(long, default_value_t = 0.5)]
    c: f64,
    /// Pairs `i:j`; repeatable.
    #[arg(long = "pair")]
    pairs: Vec<String>,
    #[arg(long, default_value_t = 2000)]
    replications: usize,
    #[arg(long, default_value_t = 20_190_101)]
    seed: u64,
    #[arg(long, default_value_t = 0.95)]
    level: f64,
    #[arg(long, default_value = "probit")]
    link: String,
    /// Merit slope: `log` for i·c·ln(n)/n, `unit` for i·c/n.
    #[arg(long, default_value = "log")]
    slope: String,
    /// Run replications on one thread.
    #[arg(long)]
    sequential: bool,
    /// Directory for results.jsonl and table.txt.
    #[arg(long, short)]
    output: Option<PathBuf>,
}

fn load(data: &DataArgs) -> Result<(pcmoment::cli::LabeledData, LinkModel, FitConfig), CliError> {
    let options = IngestOptions {
        tie_policy: data.ties.parse::<TiePolicy>()?,
        baseline: data.baseline.parse::<BaselineChoice>().unwrap_or_default(),
    };
    let labeled = ingest_path(&data.games, &options)?;
    let link: LinkModel = data.link.parse()?;
    let config = FitConfig {
        tolerance: data.tolerance,
        max_iterations: data.max_iterations,
        ..FitConfig::default()
    };
    Ok((labeled, link, config))
}

fn split_pair(s: &str) -> Result<(String, String), CliError> {
    s.split_once(':')
        .map(|(a, b)| (a.trim().to_string(), b.trim().to_string()))
        .ok_or_else(|| CliError::Argument(format!("expected A:B, got `{s}`")))
}

fn simulate_spec(args: &SimulateArgs) -> Result<SimulateSpec, CliError> {
    if let Some(path) = &args.config {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Argument(format!("{}: {e}", path.display())))?;
        return serde_json::from_str(&text)
            .map_err(|e| CliError::Argument(format!("{}: {e}", path.display())));
    }
    let preset = match args.preset.as_deref() {
        None => None,
        Some("table1") => Some(Preset::Table1),
        Some("table2") => Some(Preset::Table2),
        Some(other) => return Err(CliError::Argument(format!("unknown preset `{other}`"))),
    };
    let study = match args.study.as_str() {
        "connectivity" => Study::Connectivity,
        "coverage" => Study::Coverage,
        "consistency" => Study::Consistency,
        other => return Err(CliError::Argument(format!("unknown study `{other}`"))),
    };
    let pairs = args
        .pairs
        .iter()
        .map(|p| {
            let (a, b) = split_pair(p)?;
            let parse = |x: &str| {
                x.parse::<usize>()
                    .map_err(|_| CliError::Argument(format!("pair index `{x}` is not an integer")))
            };
            Ok((parse(&a)?, parse(&b)?))
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    Ok(SimulateSpec {
        preset,
        study,
        n: args.n.clone(),
        trials: args.trials,
        p_rule: args.p_rule.clone(),
        c: args.c,
        pairs: if pairs.is_empty() {
            vec![(1, 2)]
        } else {
            pairs
        },
        replications: args.replications,
        seed: args.seed,
        level: args.level,
        link: args.link.clone(),
        slope: args.slope.parse::<MeritSlope>()?,
        sequential: args.sequential,
    })
}

fn run(cli: Cli) -> Result<String, CliError> {
    let mut out = String::new();
    match cli.command {
        Command::Fit {
            data,
            output,
            compare,
            level,
        } => {
            let (labeled, link, config) = load(&data)?;
            let report = fit_command(&labeled, &link, &config, output.as_deref())?;
            out.push_str(&report.to_table());
            for c in &compare {
                let (a, b) = split_pair(c)?;
                let t = report.pairwise(&a, &b, level)?;
                let _ = writeln!(
                    out,
                    "{a} - {b}: {:.3} (se {:.3}), {:.0}% CI [{:.3}, {:.3}], z = {:.3}, p = {:.4}",
                    t.difference,
                    t.se,
                    100.0 * level,
                    t.lower,
                    t.upper,
                    t.z,
                    t.p_value
                );
            }
        }
        Command::Seeds {
            data,
            grouping,
            rule,
            seeds,
        } => {
            let (labeled, link, config) = load(&data)?;
            let rule: SeedRule = rule.parse()?;
            let grouping = Grouping::read_path(&grouping)?;
            let report = fit_command(&labeled, &link, &config, None)?;
            for conf in seed_selection(&report, &grouping, rule, seeds)? {
                let _ = writeln!(out, "{}", conf.conference);
                for s in &conf.seeds {
                    let _ = writeln!(
                        out,
                        "{:>3}  {:<28} {:>7.3}  {}{}",
                        s.seed,
                        s.label,
                        s.value,
                        s.division,
                        if s.division_winner {
                            " (division winner)"
                        } else {
                            ""
                        }
                    );
                }
            }
        }
        Command::Simulate(args) => {
            let spec = simulate_spec(&args)?;
            out = simulate_command(&spec, args.output.as_deref())?.table;
        }
    }
    Ok(out)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(text) => {
            // A closed pipe (e.g. `| head`) is not an error.
            let mut stdout = std::io::stdout().lock();
            match stdout
                .write_all(text.as_bytes())
                .and_then(|()| stdout.flush())
            {
                Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => {
                    eprintln!("error: {e}");
                    ExitCode::from(1)
                }
                _ => ExitCode::SUCCESS,
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
