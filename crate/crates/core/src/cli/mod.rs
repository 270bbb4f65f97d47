//! Command implementations behind the `pcmoment` binary.

pub mod ingest;
pub mod report;
pub mod seeds;

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::estimator::FitConfig;
use crate::links::{LinkError, LinkModel};
use crate::simulate::{
    format_connectivity_table, format_coverage_table, run_connectivity_study,
    run_consistency_study_with, run_coverage_study, table1_preset, table2_preset, Execution,
    MeritSlope, PRule, SimulationCell, SimulationError,
};

pub use ingest::{
    export_games, ingest_path, ingest_records, read_games, BaselineChoice, GameRecord, IngestError,
    IngestOptions, LabeledData, TiePolicy,
};
pub use report::{fit_ranking, PairwiseTest, RankError, RankReport};
pub use seeds::{seed_selection, ConferenceSeeds, Grouping, SeedError, SeedRule};

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Seed(#[from] SeedError),
    #[error(transparent)]
    Link(#[from] LinkError),
    #[error(transparent)]
    Simulation(#[from] SimulationError),
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("cannot write {path}: {source}")]
    Output {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("fit failed: {0}")]
    Fit(#[from] RankError),
}

impl CliError {
    /// 2 for bad input, 3 when the data cannot be fitted, 1 for I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Fit(_) => 3,
            CliError::Output { .. } => 1,
            _ => 2,
        }
    }
}

pub(crate) fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    std::fs::write(path, contents).map_err(|source| CliError::Output {
        path: path.display().to_string(),
        source,
    })
}

/// Fits ingested data and optionally writes the JSON report.
pub fn fit_command(
    data: &LabeledData,
    link: &LinkModel,
    config: &FitConfig,
    output: Option<&Path>,
) -> Result<RankReport, CliError> {
    let report = fit_ranking(data, link, config)?;
    if let Some(path) = output {
        write_file(path, &report.to_json())?;
    }
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Study {
    Connectivity,
    Coverage,
    Consistency,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    /// Connectivity failure grid.
    Table1,
    /// Coverage grid.
    Table2,
}

/// Simulation request, from flags or a JSON config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimulateSpec {
    pub preset: Option<Preset>,
    pub study: Study,
    /// Sizes; a single cell uses the first entry.
    pub n: Vec<usize>,
    pub trials: u32,
    pub p_rule: String,
    pub c: f64,
    pub pairs: Vec<(usize, usize)>,
    pub replications: usize,
    pub seed: u64,
    pub level: f64,
    pub link: String,
    pub slope: MeritSlope,
    pub sequential: bool,
}

impl Default for SimulateSpec {
    fn default() -> Self {
        Self {
            preset: None,
            study: Study::Coverage,
            n: vec![100],
            trials: 1,
            p_rule: "quarter".into(),
            c: 0.5,
            pairs: vec![(1, 2)],
            replications: 2000,
            seed: 20_190_101,
            level: 0.95,
            link: "probit".into(),
            slope: MeritSlope::default(),
            sequential: false,
        }
    }
}

/// Machine-readable lines and a text table.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationOutput {
    pub json_lines: String,
    pub table: String,
}

fn json_lines<T: Serialize>(items: &[T]) -> String {
    items
        .iter()
        .map(|r| serde_json::to_string(r).expect("record serializes") + "\n")
        .collect()
}

/// Runs the requested study; writes `results.jsonl` and `table.txt` when an
/// output directory is given.
pub fn simulate_command(
    spec: &SimulateSpec,
    out_dir: Option<&Path>,
) -> Result<SimulationOutput, CliError> {
    if spec.replications == 0 {
        return Err(SimulationError::ZeroReplications.into());
    }
    let link: LinkModel = spec.link.parse()?;
    let rule: PRule = spec.p_rule.parse()?;
    let execution = if spec.sequential {
        Execution::Sequential
    } else {
        Execution::Parallel
    };
    let prepare = |cells: Vec<SimulationCell>| -> Vec<SimulationCell> {
        cells
            .into_iter()
            .map(|mut c| {
                c.link = link.clone();
                c.execution = execution;
                c.slope = spec.slope;
                c
            })
            .collect()
    };

    let output = match (spec.preset, spec.study) {
        (Some(Preset::Table1), _) => {
            let reports = prepare(table1_preset(spec.replications, spec.seed))
                .iter()
                .map(run_connectivity_study)
                .collect::<Result<Vec<_>, _>>()?;
            SimulationOutput {
                json_lines: json_lines(&reports),
                table: format_connectivity_table(&reports),
            }
        }
        (Some(Preset::Table2), _) => {
            let reports = prepare(table2_preset(spec.replications, spec.seed))
                .iter()
                .map(|c| run_coverage_study(c, spec.level))
                .collect::<Result<Vec<_>, _>>()?;
            SimulationOutput {
                json_lines: json_lines(&reports),
                table: format_coverage_table(&reports),
            }
        }
        (None, Study::Consistency) => {
            let points = run_consistency_study_with(
                &spec.n,
                rule,
                spec.c,
                spec.replications,
                spec.seed,
                &link,
                spec.slope,
                execution,
            )?;
            let mut table = format!(
                "{:>6}  {:>8}  {:>12}  {:>10}  {:>10}\n",
                "n", "p", "median err", "fail %", "dev %"
            );
            for p in &points {
                let _ = writeln!(
                    table,
                    "{:>6}  {:>8.4}  {:>12.4}  {:>10.2}  {:>10.2}",
                    p.n,
                    p.p,
                    p.error.as_ref().map_or(f64::NAN, |e| e.median),
                    100.0 * p.fit_fail_rate,
                    100.0 * p.score_deviation_rate
                );
            }
            SimulationOutput {
                json_lines: json_lines(&points),
                table,
            }
        }
        (None, study) => {
            let &n = spec
                .n
                .first()
                .ok_or_else(|| CliError::Argument("at least one n is required".into()))?;
            let mut cell = SimulationCell::new(n, rule, spec.c, spec.replications, spec.seed)
                .with_pairs(spec.pairs.clone());
            cell.trials = spec.trials;
            let cell = prepare(vec![cell]).remove(0);
            let report = if study == Study::Connectivity {
                run_connectivity_study(&cell)?
            } else {
                run_coverage_study(&cell, spec.level)?
            };
            let table = if study == Study::Connectivity {
                format_connectivity_table(std::slice::from_ref(&report))
            } else {
                format_coverage_table(std::slice::from_ref(&report))
            };
            SimulationOutput {
                json_lines: json_lines(&[report]),
                table,
            }
        }
    };

    if let Some(dir) = out_dir {
        std::fs::create_dir_all(dir).map_err(|source| CliError::Output {
            path: dir.display().to_string(),
            source,
        })?;
        write_file(&dir.join("results.jsonl"), &output.json_lines)?;
        write_file(&dir.join("table.txt"), &output.table)?;
    }
    Ok(output)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_replications_rejected() {
        let spec = SimulateSpec {
            replications: 0,
            ..Default::default()
        };
        let err = simulate_command(&spec, None).unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn bad_rule_rejected() {
        let spec = SimulateSpec {
            p_rule: "cubic".into(),
            ..Default::default()
        };
        assert!(matches!(
            simulate_command(&spec, None),
            Err(CliError::Simulation(_))
        ));
    }

    #[test]
    fn spec_from_partial_json() {
        let spec: SimulateSpec =
            serde_json::from_str(r#"{"study":"connectivity","n":[30],"replications":5}"#).unwrap();
        assert_eq!(spec.trials, 1);
        let out = simulate_command(&spec, None).unwrap();
        assert_eq!(out.json_lines.lines().count(), 1);
    }
}
