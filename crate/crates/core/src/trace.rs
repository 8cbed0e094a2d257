//! Per-arrival run records and their line-oriented file form.
//!
//! A trace file is JSON lines: one header, one record per arrival, one
//! finalization record. Rationals are `"p/q"` strings throughout.

use std::fmt;
use std::str::FromStr;

use num_traits::Zero;
use serde::{Deserialize, Serialize};

use crate::codec::{self, CodecError};
use crate::rational::{serde_opt_q, serde_q, Q};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algo {
    Greedy,
    HighDegree,
    EqualBids,
    GeneralBids,
    Random,
    Ranking,
}

impl Algo {
    pub const ALL: [Algo; 6] = [
        Algo::Greedy,
        Algo::HighDegree,
        Algo::EqualBids,
        Algo::GeneralBids,
        Algo::Random,
        Algo::Ranking,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algo::Greedy => "greedy",
            Algo::HighDegree => "high-degree",
            Algo::EqualBids => "equal-bids",
            Algo::GeneralBids => "general-bids",
            Algo::Random => "random",
            Algo::Ranking => "ranking",
        }
    }

    pub fn is_randomized(self) -> bool {
        matches!(self, Algo::Random | Algo::Ranking)
    }
}

impl fmt::Display for Algo {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algo {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Algo::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| format!("unknown algorithm `{s}`"))
    }
}

/// Post-arrival value of an advertiser's current-copy accumulator.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ZcSnapshot {
    Plain(#[serde(with = "serde_q")] Q),
    /// Most significant digit first.
    Digits(Vec<crate::rational::Ratio>),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DualDiff {
    pub adv: usize,
    #[serde(with = "serde_q")]
    pub z: Q,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub zc: Option<ZcSnapshot>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CreditKind {
    /// The matched advertiser's direct increase.
    Match,
    /// A digit spilled into place k and was credited at 1/k.
    Overflow,
    /// All k digits were non-null; their common minimum was credited.
    Common,
}

/// One increase of some `z_i` together with what paid for it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CreditEvent {
    pub adv: usize,
    pub kind: CreditKind,
    #[serde(with = "serde_q")]
    pub z_increase: Q,
    /// Drop in the numeric value of `z_i^c` attributable to the event.
    #[serde(with = "serde_q")]
    pub zc_value_drop: Q,
    /// Drop in the digit sum of `z_i^c` attributable to the event.
    #[serde(with = "serde_q")]
    pub digit_drop: Q,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArrivalRecord {
    pub index: usize,
    pub slot: usize,
    pub feasible: Vec<usize>,
    pub decision: Option<usize>,
    #[serde(default, with = "serde_opt_q", skip_serializing_if = "Option::is_none")]
    pub bid: Option<Q>,
    #[serde(with = "serde_q")]
    pub delta_p: Q,
    #[serde(with = "serde_q")]
    pub delta_d: Q,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub diffs: Vec<DualDiff>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub events: Vec<CreditEvent>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FinalRecord {
    /// Final LP dual cost minus the running dual total before the loop.
    #[serde(with = "serde_q")]
    pub delta_d: Q,
    #[serde(with = "serde_q")]
    pub dual_cost: Q,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub diffs: Vec<DualDiff>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceHeader {
    pub algo: Algo,
    pub k: u32,
    pub d: u32,
    pub tie: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none", with = "serde_opt_q")]
    pub scaling_constant: Option<Q>,
    /// Whether the run maintained dual variables at all.
    pub duals: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunTrace {
    pub header: TraceHeader,
    pub arrivals: Vec<ArrivalRecord>,
    pub finalization: FinalRecord,
}

impl RunTrace {
    pub fn primal_total(&self) -> Q {
        self.arrivals.iter().fold(Q::zero(), |acc, a| acc + &a.delta_p)
    }

    /// Dual total over arrivals, before the finalization loop.
    pub fn dual_prefinal(&self) -> Q {
        self.arrivals.iter().fold(Q::zero(), |acc, a| acc + &a.delta_d)
    }

    pub fn dual_total(&self) -> Q {
        self.dual_prefinal() + &self.finalization.delta_d
    }
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
enum Line {
    Header(TraceHeader),
    Arrival(ArrivalRecord),
    Final(FinalRecord),
}

#[derive(Debug, thiserror::Error)]
pub enum TraceError {
    #[error("trace line {line}: {source}")]
    Line { line: usize, source: CodecError },
    #[error("trace line {line}: {message}")]
    Structure { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] CodecError),
}

pub fn to_lines(trace: &RunTrace) -> String {
    let mut out = String::new();
    let mut push = |l: &Line| {
        out.push_str(&serde_json::to_string(l).expect("trace serializes"));
        out.push('\n');
    };
    push(&Line::Header(trace.header.clone()));
    for a in &trace.arrivals {
        push(&Line::Arrival(a.clone()));
    }
    push(&Line::Final(trace.finalization.clone()));
    out
}

pub fn from_lines(text: &str) -> Result<RunTrace, TraceError> {
    let mut header = None;
    let mut arrivals = Vec::new();
    let mut finalization = None;
    for (n, raw) in text.lines().enumerate() {
        let line = n + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let parsed: Line =
            codec::parse_json(raw).map_err(|source| TraceError::Line { line, source })?;
        let structure = |message: &str| TraceError::Structure {
            line,
            message: message.to_string(),
        };
        match parsed {
            Line::Header(h) => {
                if header.is_some() {
                    return Err(structure("second header"));
                }
                header = Some(h);
            }
            Line::Arrival(a) => {
                if header.is_none() || finalization.is_some() {
                    return Err(structure("arrival outside header/final bracket"));
                }
                if a.index != arrivals.len() {
                    return Err(structure("arrival index out of sequence"));
                }
                arrivals.push(a);
            }
            Line::Final(f) => {
                if finalization.is_some() {
                    return Err(structure("second final record"));
                }
                finalization = Some(f);
            }
        }
    }
    let last = text.lines().count();
    let header = header.ok_or(TraceError::Structure {
        line: last,
        message: "missing header".into(),
    })?;
    let finalization = finalization.ok_or(TraceError::Structure {
        line: last,
        message: "missing final record".into(),
    })?;
    Ok(RunTrace {
        header,
        arrivals,
        finalization,
    })
}

pub fn save(trace: &RunTrace, path: &std::path::Path) -> Result<(), CodecError> {
    std::fs::write(path, to_lines(trace)).map_err(|source| CodecError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn load(path: &std::path::Path) -> Result<RunTrace, TraceError> {
    from_lines(&codec::read_text(path)?)
}
