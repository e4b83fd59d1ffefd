//! Parsing, validation and quarterly aggregation of raw payment records.
//!
//! Monetary values are carried as integer pence from the moment they are
//! parsed until graph construction, so aggregation is exact and independent
//! of record order.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Read;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quarter::{Quarter, YearMonth};
use crate::roster::IndustryRoster;

/// One dated payment from a source industry to a destination industry.
/// Self-flows (source == dest) are legal in raw data; the aggregation step
/// decides whether to keep them.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PaymentRecord {
    pub period: YearMonth,
    pub source: String,
    pub dest: String,
    /// Strictly positive amount in integer pence.
    pub pence: u64,
}

impl PaymentRecord {
    pub fn value_gbp(&self) -> f64 {
        self.pence as f64 / 100.0
    }
}

/// Where the node set comes from.
#[derive(Debug, Clone)]
pub enum RosterPolicy {
    /// Roster supplied up front; records naming unknown industries are
    /// rejected line by line.
    Fixed(IndustryRoster),
    /// Roster inferred from the accepted records: the sorted set of codes
    /// seen as a source or destination.
    Infer,
}

#[derive(Debug, Clone, Default)]
pub struct ParseOptions {
    /// Inclusive month range; records outside it are rejected per line.
    pub period_range: Option<(YearMonth, YearMonth)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RejectReason {
    WrongFieldCount,
    BadDate,
    OutOfRange,
    NonNumericValue,
    NonPositiveValue,
    SubPennyValue,
    UnknownIndustry,
    EmptyIndustry,
}

impl fmt::Display for RejectReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            RejectReason::WrongFieldCount => "wrong field count",
            RejectReason::BadDate => "unparseable date (expected YYYY-MM)",
            RejectReason::OutOfRange => "period outside configured sample range",
            RejectReason::NonNumericValue => "non-numeric value",
            RejectReason::NonPositiveValue => "non-positive value",
            RejectReason::SubPennyValue => "value has sub-penny precision",
            RejectReason::UnknownIndustry => "unknown industry under fixed roster",
            RejectReason::EmptyIndustry => "empty industry code",
        };
        f.write_str(s)
    }
}

/// A rejected input line: 1-based line number plus the reason.
#[derive(Debug, Clone)]
pub struct RejectedLine {
    pub line: u64,
    pub reason: RejectReason,
}

#[derive(Debug)]
pub struct ParseOutcome {
    pub records: Vec<PaymentRecord>,
    pub roster: IndustryRoster,
    pub rejects: Vec<RejectedLine>,
}

/// Parses the record CSV (`date,source,dest,value`).
///
/// A malformed header is fatal; everything else (bad dates, non-positive or
/// non-numeric values, unknown industries under a fixed roster) is rejected
/// per line and reported in the outcome.
pub fn parse_records<R: Read>(
    reader: R,
    policy: RosterPolicy,
    opts: &ParseOptions,
) -> Result<ParseOutcome> {
    let mut rdr = csv::ReaderBuilder::new()
        .flexible(true)
        .comment(Some(b'#'))
        .from_reader(reader);

    let headers = rdr
        .headers()
        .map_err(|e| Error::data(format!("cannot read csv header: {e}")))?;
    let got: Vec<String> = headers
        .iter()
        .map(|h| h.trim_start_matches('\u{feff}').trim().to_string())
        .collect();
    if got != ["date", "source", "dest", "value"] {
        return Err(Error::data(format!(
            "malformed header: expected `date,source,dest,value`, got `{}`",
            got.join(",")
        )));
    }

    let fixed = match &policy {
        RosterPolicy::Fixed(r) => Some(r),
        RosterPolicy::Infer => None,
    };

    let mut records = Vec::new();
    let mut rejects = Vec::new();
    let mut record = csv::StringRecord::new();
    loop {
        match rdr.read_record(&mut record) {
            Ok(false) => break,
            Ok(true) => {}
            Err(e) => {
                let line = e.position().map(|p| p.line()).unwrap_or(0);
                rejects.push(RejectedLine { line, reason: RejectReason::WrongFieldCount });
                continue;
            }
        }
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let mut reject = |reason| rejects.push(RejectedLine { line, reason });

        if record.len() != 4 {
            reject(RejectReason::WrongFieldCount);
            continue;
        }
        let period = match YearMonth::parse(record[0].trim()) {
            Some(p) => p,
            None => {
                reject(RejectReason::BadDate);
                continue;
            }
        };
        if let Some((lo, hi)) = opts.period_range {
            if period < lo || period > hi {
                reject(RejectReason::OutOfRange);
                continue;
            }
        }
        let source = record[1].trim().to_string();
        let dest = record[2].trim().to_string();
        if source.is_empty() || dest.is_empty() {
            reject(RejectReason::EmptyIndustry);
            continue;
        }
        if let Some(r) = fixed {
            if r.index_of(&source).is_none() || r.index_of(&dest).is_none() {
                reject(RejectReason::UnknownIndustry);
                continue;
            }
        }
        let pence = match parse_gbp_pence(record[3].trim()) {
            Ok(p) => p,
            Err(reason) => {
                reject(reason);
                continue;
            }
        };
        records.push(PaymentRecord { period, source, dest, pence });
    }

    let roster = match policy {
        RosterPolicy::Fixed(r) => r,
        RosterPolicy::Infer => {
            let mut codes: Vec<String> = records
                .iter()
                .flat_map(|r| [r.source.clone(), r.dest.clone()])
                .collect();
            codes.sort();
            codes.dedup();
            if codes.len() < 2 {
                return Err(Error::data(format!(
                    "cannot infer roster: only {} distinct industry code(s) in input",
                    codes.len()
                )));
            }
            IndustryRoster::from_codes(codes)?
        }
    };

    Ok(ParseOutcome { records, roster, rejects })
}

/// Parses a plain decimal GBP amount into strictly positive integer pence.
/// At most two fractional digits are accepted.
fn parse_gbp_pence(s: &str) -> std::result::Result<u64, RejectReason> {
    if s.is_empty() {
        return Err(RejectReason::NonNumericValue);
    }
    let (negative, digits) = match s.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, s.strip_prefix('+').unwrap_or(s)),
    };
    let (int_part, frac_part) = match digits.split_once('.') {
        Some((i, f)) => (i, f),
        None => (digits, ""),
    };
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(RejectReason::NonNumericValue);
    }
    if !int_part.chars().all(|c| c.is_ascii_digit())
        || !frac_part.chars().all(|c| c.is_ascii_digit())
    {
        return Err(RejectReason::NonNumericValue);
    }
    if frac_part.len() > 2 {
        return Err(RejectReason::SubPennyValue);
    }
    let whole: u64 = if int_part.is_empty() {
        0
    } else {
        int_part.parse().map_err(|_| RejectReason::NonNumericValue)?
    };
    let frac: u64 = match frac_part.len() {
        0 => 0,
        1 => frac_part.parse::<u64>().map_err(|_| RejectReason::NonNumericValue)? * 10,
        _ => frac_part.parse().map_err(|_| RejectReason::NonNumericValue)?,
    };
    let pence = whole
        .checked_mul(100)
        .and_then(|w| w.checked_add(frac))
        .ok_or(RejectReason::NonNumericValue)?;
    if negative || pence == 0 {
        return Err(RejectReason::NonPositiveValue);
    }
    Ok(pence)
}

/// Formats integer pence as the canonical two-decimal GBP string.
pub fn pence_to_string(pence: u64) -> String {
    format!("{}.{:02}", pence / 100, pence % 100)
}

/// Whether intra-industry payments survive aggregation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelfFlowPolicy {
    /// Default: the quarterly graph is a simple digraph without loops.
    #[default]
    Drop,
    Keep,
}

/// Summed pair flows for one quarter, keyed by (source index, dest index).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PairTotals {
    pub quarter: Quarter,
    totals: BTreeMap<(u32, u32), u64>,
}

impl PairTotals {
    pub fn new(quarter: Quarter) -> Self {
        PairTotals { quarter, totals: BTreeMap::new() }
    }

    pub fn add(&mut self, source: u32, dest: u32, pence: u64) {
        if pence > 0 {
            *self.totals.entry((source, dest)).or_insert(0) += pence;
        }
    }

    pub fn get(&self, source: u32, dest: u32) -> Option<u64> {
        self.totals.get(&(source, dest)).copied()
    }

    pub fn totals(&self) -> &BTreeMap<(u32, u32), u64> {
        &self.totals
    }

    pub fn len(&self) -> usize {
        self.totals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.totals.is_empty()
    }

    pub fn sum_pence(&self) -> u64 {
        self.totals.values().sum()
    }
}

/// Buckets validated records into quarters and sums pair flows in pence.
/// Quarters with no records are simply absent from the map.
pub fn aggregate_quarterly(
    records: &[PaymentRecord],
    roster: &IndustryRoster,
    self_flows: SelfFlowPolicy,
) -> Result<BTreeMap<Quarter, PairTotals>> {
    let mut out: BTreeMap<Quarter, PairTotals> = BTreeMap::new();
    for rec in records {
        let src = roster.index_of(&rec.source).ok_or_else(|| {
            Error::data(format!("record names industry `{}` missing from roster", rec.source))
        })? as u32;
        let dst = roster.index_of(&rec.dest).ok_or_else(|| {
            Error::data(format!("record names industry `{}` missing from roster", rec.dest))
        })? as u32;
        if src == dst && self_flows == SelfFlowPolicy::Drop {
            continue;
        }
        let quarter = rec.period.quarter();
        out.entry(quarter)
            .or_insert_with(|| PairTotals::new(quarter))
            .add(src, dst, rec.pence);
    }
    Ok(out)
}

/// Canonical CSV serialization of a record list (sorted by period, source,
/// dest for byte-reproducible output).
pub fn records_to_csv(records: &[PaymentRecord]) -> String {
    let mut sorted: Vec<&PaymentRecord> = records.iter().collect();
    sorted.sort_by(|a, b| {
        (a.period, &a.source, &a.dest, a.pence).cmp(&(b.period, &b.source, &b.dest, b.pence))
    });
    let mut out = String::from("date,source,dest,value\n");
    for r in sorted {
        out.push_str(&format!(
            "{},{},{},{}\n",
            r.period,
            r.source,
            r.dest,
            pence_to_string(r.pence)
        ));
    }
    out
}
