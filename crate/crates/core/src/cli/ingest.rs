//! Games files: `winner,loser[,count][,result]` with a required header.
//!
//! `count` defaults to 1. A `result` of `tie` marks a drawn game between the
//! two listed subjects; its handling is set by [`TiePolicy`].

use std::collections::BTreeMap;
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{ComparisonData, CountMatrix, GraphError};

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Malformed { line: u64, message: String },
    #[error("header is missing the `{0}` column")]
    MissingColumn(&'static str),
    #[error("unknown tie policy `{0}` (expected drop or half)")]
    UnknownTiePolicy(String),
    #[error("baseline `{0}` does not appear in the data")]
    UnknownBaseline(String),
    #[error("need at least 2 subjects, found {0}")]
    TooFewSubjects(usize),
    #[error("count overflow for pair ({0}, {1})")]
    Overflow(String, String),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// How a drawn game enters the counts.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TiePolicy {
    /// Discard the game.
    #[default]
    Drop,
    /// Count the game as two comparisons with one win each, so the pair's
    /// expected score moves by half a game in each direction.
    Half,
}

impl FromStr for TiePolicy {
    type Err = IngestError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "drop" => Ok(TiePolicy::Drop),
            "half" => Ok(TiePolicy::Half),
            _ => Err(IngestError::UnknownTiePolicy(s.to_string())),
        }
    }
}

impl fmt::Display for TiePolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TiePolicy::Drop => "drop",
            TiePolicy::Half => "half",
        })
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum BaselineChoice {
    /// Subject with the fewest wins; ties go to the smallest label.
    #[default]
    FewestWins,
    Label(String),
}

impl FromStr for BaselineChoice {
    type Err = std::convert::Infallible;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s.trim() {
            "fewest-wins" | "fewest_wins" => BaselineChoice::FewestWins,
            other => BaselineChoice::Label(other.to_string()),
        })
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct IngestOptions {
    pub tie_policy: TiePolicy,
    pub baseline: BaselineChoice,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GameRecord {
    pub winner: String,
    pub loser: String,
    pub count: u32,
    pub tie: bool,
    /// 1-based line in the source file, 0 when built in memory.
    #[serde(skip)]
    pub line: u64,
}

impl GameRecord {
    pub fn win(winner: &str, loser: &str, count: u32) -> Self {
        Self {
            winner: winner.into(),
            loser: loser.into(),
            count,
            tie: false,
            line: 0,
        }
    }

    pub fn tie(a: &str, b: &str) -> Self {
        Self {
            tie: true,
            ..Self::win(a, b, 1)
        }
    }
}

/// Comparison data with subject labels. Index 0 is the baseline.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledData {
    pub labels: Vec<String>,
    pub data: ComparisonData,
    /// Drawn games discarded per subject under [`TiePolicy::Drop`].
    pub dropped_ties: Vec<u64>,
}

impl LabeledData {
    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    pub fn baseline_label(&self) -> &str {
        &self.labels[0]
    }

    /// Won-lost percentage with drawn games as half a win.
    pub fn pct(&self, i: usize) -> f64 {
        let d = self.dropped_ties[i] as f64;
        let games = self.data.totals()[i] as f64 + d;
        if games == 0.0 {
            0.0
        } else {
            (self.data.wins()[i] as f64 + 0.5 * d) / games
        }
    }
}

fn malformed(line: u64, message: impl Into<String>) -> IngestError {
    IngestError::Malformed {
        line,
        message: message.into(),
    }
}

/// Parses game records from CSV text.
pub fn read_games<R: Read>(reader: R) -> Result<Vec<GameRecord>, IngestError> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .flexible(true)
        .comment(Some(b'#'))
        .from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| malformed(1, e.to_string()))?
        .clone();
    let column = |name: &str| headers.iter().position(|h| h.eq_ignore_ascii_case(name));
    let winner = column("winner").ok_or(IngestError::MissingColumn("winner"))?;
    let loser = column("loser").ok_or(IngestError::MissingColumn("loser"))?;
    let count = column("count");
    let result = column("result");

    let mut games = Vec::new();
    for row in rdr.records() {
        let row = row.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            malformed(line, e.to_string())
        })?;
        let line = row.position().map_or(0, |p| p.line());
        let field = |k: usize| row.get(k).unwrap_or("");
        let w = field(winner);
        let l = field(loser);
        if w.is_empty() || l.is_empty() {
            return Err(malformed(line, "winner and loser must be nonempty"));
        }
        if w == l {
            return Err(malformed(line, format!("`{w}` cannot play itself")));
        }
        let n = match count.map(field) {
            None | Some("") => 1,
            Some(s) => match s.parse::<u32>() {
                Ok(k) if k > 0 => k,
                _ => {
                    return Err(malformed(
                        line,
                        format!("count must be a positive integer, got `{s}`"),
                    ))
                }
            },
        };
        let tie = match result.map(field) {
            None | Some("") => false,
            Some(s) if s.eq_ignore_ascii_case("tie") => true,
            Some(s) if s.eq_ignore_ascii_case("win") => false,
            Some(s) => {
                return Err(malformed(
                    line,
                    format!("result must be empty, `win` or `tie`, got `{s}`"),
                ))
            }
        };
        games.push(GameRecord {
            winner: w.to_string(),
            loser: l.to_string(),
            count: n,
            tie,
            line,
        });
    }
    Ok(games)
}

pub fn ingest_path(path: &Path, options: &IngestOptions) -> Result<LabeledData, IngestError> {
    let file = std::fs::File::open(path).map_err(|source| IngestError::Io {
        path: path.display().to_string(),
        source,
    })?;
    ingest_records(&read_games(file)?, options)
}

/// Aggregates records into counts and moves the baseline to index 0; the
/// remaining subjects follow in label order.
pub fn ingest_records(
    records: &[GameRecord],
    options: &IngestOptions,
) -> Result<LabeledData, IngestError> {
    let mut wins: BTreeMap<&str, u64> = BTreeMap::new();
    for r in records {
        wins.entry(&r.winner).or_default();
        wins.entry(&r.loser).or_default();
        if !r.tie {
            *wins.get_mut(r.winner.as_str()).unwrap() += u64::from(r.count);
        } else if options.tie_policy == TiePolicy::Half {
            *wins.get_mut(r.winner.as_str()).unwrap() += u64::from(r.count);
            *wins.get_mut(r.loser.as_str()).unwrap() += u64::from(r.count);
        }
    }
    if wins.len() < 2 {
        return Err(IngestError::TooFewSubjects(wins.len()));
    }
    let baseline = match &options.baseline {
        BaselineChoice::FewestWins => {
            // BTreeMap iterates in label order, so min_by_key keeps the
            // smallest label among equal win counts.
            wins.iter()
                .min_by_key(|(_, &w)| w)
                .map(|(l, _)| l.to_string())
                .unwrap()
        }
        BaselineChoice::Label(l) => {
            if !wins.contains_key(l.as_str()) {
                return Err(IngestError::UnknownBaseline(l.clone()));
            }
            l.clone()
        }
    };
    let mut labels = vec![baseline.clone()];
    labels.extend(
        wins.keys()
            .filter(|l| **l != baseline)
            .map(|l| l.to_string()),
    );
    let index: BTreeMap<&str, usize> = labels
        .iter()
        .enumerate()
        .map(|(k, l)| (l.as_str(), k))
        .collect();

    let n = labels.len();
    let mut a = CountMatrix::zeros(n);
    let mut dropped = vec![0u64; n];
    let bump = |a: &mut CountMatrix, i: usize, j: usize, k: u32, r: &GameRecord| {
        let v = a
            .get(i, j)
            .checked_add(k)
            .ok_or_else(|| IngestError::Overflow(r.winner.clone(), r.loser.clone()))?;
        a.set(i, j, v);
        Ok::<_, IngestError>(())
    };
    for r in records {
        let (i, j) = (index[r.winner.as_str()], index[r.loser.as_str()]);
        if !r.tie {
            bump(&mut a, i, j, r.count, r)?;
        } else {
            match options.tie_policy {
                TiePolicy::Drop => {
                    dropped[i] += u64::from(r.count);
                    dropped[j] += u64::from(r.count);
                }
                TiePolicy::Half => {
                    bump(&mut a, i, j, r.count, r)?;
                    bump(&mut a, j, i, r.count, r)?;
                }
            }
        }
    }
    let data = ComparisonData::from_wins(a)?;
    Ok(LabeledData {
        labels,
        data,
        dropped_ties: dropped,
    })
}

/// Writes one `winner,loser,count` row per nonzero `a_ij`.
pub fn export_games<W: Write>(data: &LabeledData, writer: W) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["winner", "loser", "count"])?;
    let a = data.data.a();
    for i in 0..data.labels.len() {
        for j in 0..data.labels.len() {
            let k = a.get(i, j);
            if k > 0 {
                w.write_record([
                    data.labels[i].as_str(),
                    data.labels[j].as_str(),
                    &k.to_string(),
                ])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}
