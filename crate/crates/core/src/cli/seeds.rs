//! Playoff-style seeding: division winners first, then wildcards.
//!
//! Within each conference the best subject of every division (by the chosen
//! rule) is a division winner. Division winners take the top seeds in rule
//! order and the remaining seeds go to the best other subjects. Equal values
//! are broken by label.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::io::Read;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::report::{RankReport, SubjectRow};

#[derive(Debug, Error)]
pub enum SeedError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("grouping line {line}: {message}")]
    Malformed { line: u64, message: String },
    #[error("grouping has no entry for `{0}`")]
    MissingSubject(String),
    #[error("unknown seeding rule `{0}` (expected pct or merit)")]
    UnknownRule(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeedRule {
    /// Won-lost percentage.
    Pct,
    /// Fitted merit.
    Merit,
}

impl FromStr for SeedRule {
    type Err = SeedError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "pct" => Ok(SeedRule::Pct),
            "merit" => Ok(SeedRule::Merit),
            _ => Err(SeedError::UnknownRule(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Group {
    pub conference: String,
    pub division: String,
}

/// Conference and division of each subject.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Grouping {
    pub entries: BTreeMap<String, Group>,
}

impl Grouping {
    pub fn insert(&mut self, label: &str, conference: &str, division: &str) {
        self.entries.insert(
            label.to_string(),
            Group {
                conference: conference.to_string(),
                division: division.to_string(),
            },
        );
    }

    /// Reads `label,conference,division` rows with a header.
    pub fn read<R: Read>(reader: R) -> Result<Self, SeedError> {
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(reader);
        let mut g = Grouping::default();
        for row in rdr.records() {
            let row = row.map_err(|e| SeedError::Malformed {
                line: e.position().map_or(0, |p| p.line()),
                message: e.to_string(),
            })?;
            let line = row.position().map_or(0, |p| p.line());
            if row.len() < 3 || row.iter().take(3).any(str::is_empty) {
                return Err(SeedError::Malformed {
                    line,
                    message: "expected label,conference,division".into(),
                });
            }
            g.insert(&row[0], &row[1], &row[2]);
        }
        Ok(g)
    }

    pub fn read_path(path: &Path) -> Result<Self, SeedError> {
        let file = std::fs::File::open(path).map_err(|source| SeedError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::read(file)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Seed {
    pub seed: usize,
    pub label: String,
    pub division: String,
    pub division_winner: bool,
    /// Value of the seeding statistic.
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConferenceSeeds {
    pub conference: String,
    pub seeds: Vec<Seed>,
}

impl ConferenceSeeds {
    pub fn labels(&self) -> Vec<&str> {
        self.seeds.iter().map(|s| s.label.as_str()).collect()
    }
}

fn value(row: &SubjectRow, rule: SeedRule) -> f64 {
    match rule {
        SeedRule::Pct => row.pct,
        SeedRule::Merit => row.beta_hat,
    }
}

fn better(a: &SubjectRow, b: &SubjectRow, rule: SeedRule) -> Ordering {
    value(b, rule)
        .total_cmp(&value(a, rule))
        .then_with(|| a.label.cmp(&b.label))
}

/// Up to `per_conference` seeds for every conference, conferences in name
/// order.
pub fn seed_selection(
    report: &RankReport,
    grouping: &Grouping,
    rule: SeedRule,
    per_conference: usize,
) -> Result<Vec<ConferenceSeeds>, SeedError> {
    let mut conferences: BTreeMap<&str, Vec<(&SubjectRow, &str)>> = BTreeMap::new();
    for row in &report.rows {
        let g = grouping
            .entries
            .get(&row.label)
            .ok_or_else(|| SeedError::MissingSubject(row.label.clone()))?;
        conferences
            .entry(&g.conference)
            .or_default()
            .push((row, &g.division));
    }

    Ok(conferences
        .into_iter()
        .map(|(conference, mut members)| {
            members.sort_by(|x, y| better(x.0, y.0, rule));
            let mut winners: Vec<(&SubjectRow, &str)> = Vec::new();
            for &(row, div) in &members {
                if !winners.iter().any(|w| w.1 == div) {
                    winners.push((row, div));
                }
            }
            // `members` is sorted, so `winners` already follows rule order.
            let mut seeded: Vec<(&SubjectRow, &str, bool)> =
                winners.iter().map(|&(r, d)| (r, d, true)).collect();
            seeded.extend(
                members
                    .iter()
                    .filter(|(r, _)| !winners.iter().any(|w| w.0.label == r.label))
                    .map(|&(r, d)| (r, d, false)),
            );
            seeded.truncate(per_conference);
            ConferenceSeeds {
                conference: conference.to_string(),
                seeds: seeded
                    .into_iter()
                    .enumerate()
                    .map(|(k, (r, d, w))| Seed {
                        seed: k + 1,
                        label: r.label.clone(),
                        division: d.to_string(),
                        division_winner: w,
                        value: value(r, rule),
                    })
                    .collect(),
            }
        })
        .collect())
}
