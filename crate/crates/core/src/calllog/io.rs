//! CSV readers and writers for `beneficiaries.csv`, `calls.csv`, and
//! `interventions.csv`. Lines starting with `#` are comments (provenance).

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::str::FromStr;

use chrono::{Days, NaiveDate};
use serde::{Deserialize, Serialize};

use super::history::{CallHistory, DateWindow};
use super::profile::BeneficiaryProfile;
use super::record::{dedup_attempts, BeneficiaryId, CallRecord};
use super::CallLogError;

pub const BENEFICIARY_HEADER: [&str; 9] = [
    "beneficiary_id",
    "age",
    "education_level",
    "income_group",
    "phone_owner",
    "registration_date",
    "gestation_age",
    "language",
    "call_slot",
];
pub const CALL_HEADER: [&str; 6] =
    ["beneficiary_id", "attempt_group", "call_date", "message_id", "duration_seconds", "success"];
pub const INTERVENTION_HEADER: [&str; 4] = ["beneficiary_id", "date", "kind", "success"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum InterventionKind {
    Sms,
    Call,
}

impl InterventionKind {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Sms => "SMS",
            Self::Call => "CALL",
        }
    }
}

impl FromStr for InterventionKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "SMS" => Ok(Self::Sms),
            "CALL" => Ok(Self::Call),
            other => Err(format!("unknown intervention kind {other:?} (expected SMS or CALL)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InterventionRecord {
    pub beneficiary_id: BeneficiaryId,
    pub date: NaiveDate,
    pub kind: InterventionKind,
    pub success: bool,
}

/// A rejected input row.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub line: u64,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Parsed<T> {
    pub rows: Vec<T>,
    pub rejected: Vec<Diagnostic>,
}

/// In strict mode the first malformed row aborts the parse.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ParseOptions {
    pub strict: bool,
}

fn parse_rows<T, R: Read>(
    source: &str,
    reader: R,
    header: &[&str],
    options: ParseOptions,
    mut parse: impl FnMut(&csv::StringRecord) -> Result<T, String>,
) -> Result<Parsed<T>, CallLogError> {
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).flexible(true).trim(csv::Trim::All).from_reader(reader);
    let got =
        rdr.headers().map_err(|e| CallLogError::Csv { source_name: source.to_string(), message: e.to_string() })?;
    if got.iter().collect::<Vec<_>>() != header {
        return Err(CallLogError::Parse {
            source_name: source.to_string(),
            line: 1,
            message: format!(
                "expected header {:?}, found {:?}",
                header.join(","),
                got.iter().collect::<Vec<_>>().join(",")
            ),
        });
    }
    let mut out = Parsed { rows: Vec::new(), rejected: Vec::new() };
    for result in rdr.records() {
        let (line, parsed) = match result {
            Ok(record) => {
                let line = record.position().map_or(0, |p| p.line());
                let parsed = if record.len() != header.len() {
                    Err(format!("expected {} fields, found {}", header.len(), record.len()))
                } else {
                    parse(&record)
                };
                (line, parsed)
            }
            Err(e) => (e.position().map_or(0, |p| p.line()), Err(e.to_string())),
        };
        match parsed {
            Ok(row) => out.rows.push(row),
            Err(message) if options.strict => {
                return Err(CallLogError::Parse { source_name: source.to_string(), line, message });
            }
            Err(message) => {
                log::warn!("{source}:{line}: rejected row: {message}");
                out.rejected.push(Diagnostic { line, message });
            }
        }
    }
    Ok(out)
}

fn field<T: FromStr>(record: &csv::StringRecord, idx: usize, name: &str) -> Result<T, String>
where
    T::Err: std::fmt::Display,
{
    let raw = record.get(idx).unwrap_or("");
    if raw.is_empty() {
        return Err(format!("{name} is missing"));
    }
    raw.parse::<T>().map_err(|e| format!("{name} {raw:?}: {e}"))
}

fn flag(record: &csv::StringRecord, idx: usize, name: &str) -> Result<bool, String> {
    match record.get(idx).unwrap_or("") {
        "0" => Ok(false),
        "1" => Ok(true),
        other => Err(format!("{name} {other:?}: expected 0 or 1")),
    }
}

pub fn read_beneficiaries<R: Read>(
    reader: R,
    options: ParseOptions,
) -> Result<Parsed<BeneficiaryProfile>, CallLogError> {
    parse_rows("beneficiaries.csv", reader, &BENEFICIARY_HEADER, options, |r| {
        let profile = BeneficiaryProfile {
            beneficiary_id: BeneficiaryId(field(r, 0, "beneficiary_id")?),
            age: field(r, 1, "age")?,
            education_level: field(r, 2, "education_level")?,
            income_group: field(r, 3, "income_group")?,
            phone_owner: field(r, 4, "phone_owner")?,
            registration_date: field(r, 5, "registration_date")?,
            gestation_age: field(r, 6, "gestation_age")?,
            language: field(r, 7, "language")?,
            call_slot: field(r, 8, "call_slot")?,
        };
        profile.validate()?;
        Ok(profile)
    })
}

pub fn read_calls<R: Read>(reader: R, options: ParseOptions) -> Result<Parsed<CallRecord>, CallLogError> {
    parse_rows("calls.csv", reader, &CALL_HEADER, options, |r| {
        let duration: f64 = field(r, 4, "duration_seconds")?;
        if !(duration >= 0.0) || !duration.is_finite() {
            return Err(format!("duration_seconds {duration} must be a non-negative number"));
        }
        Ok(CallRecord {
            beneficiary_id: BeneficiaryId(field(r, 0, "beneficiary_id")?),
            attempt_group: field(r, 1, "attempt_group")?,
            call_date: field(r, 2, "call_date")?,
            message_id: field(r, 3, "message_id")?,
            duration,
            success: flag(r, 5, "success")?,
        })
    })
}

pub fn read_interventions<R: Read>(
    reader: R,
    options: ParseOptions,
) -> Result<Parsed<InterventionRecord>, CallLogError> {
    parse_rows("interventions.csv", reader, &INTERVENTION_HEADER, options, |r| {
        Ok(InterventionRecord {
            beneficiary_id: BeneficiaryId(field(r, 0, "beneficiary_id")?),
            date: field(r, 1, "date")?,
            kind: field(r, 2, "kind")?,
            success: flag(r, 3, "success")?,
        })
    })
}

fn writer<W: Write>(out: W, comments: &[String]) -> Result<csv::Writer<W>, CallLogError> {
    let mut out = out;
    for c in comments {
        writeln!(out, "# {c}").map_err(CallLogError::Io)?;
    }
    Ok(csv::Writer::from_writer(out))
}

fn csv_err(e: csv::Error) -> CallLogError {
    CallLogError::Csv { source_name: "output".into(), message: e.to_string() }
}

fn bit(b: bool) -> &'static str {
    if b {
        "1"
    } else {
        "0"
    }
}

pub fn write_beneficiaries<W: Write>(
    out: W,
    profiles: &[BeneficiaryProfile],
    comments: &[String],
) -> Result<(), CallLogError> {
    let mut w = writer(out, comments)?;
    w.write_record(BENEFICIARY_HEADER).map_err(csv_err)?;
    for p in profiles {
        w.write_record([
            p.beneficiary_id.to_string(),
            p.age.to_string(),
            p.education_level.to_string(),
            p.income_group.to_string(),
            p.phone_owner.to_string(),
            p.registration_date.to_string(),
            p.gestation_age.to_string(),
            p.language.to_string(),
            p.call_slot.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush().map_err(CallLogError::Io)
}

pub fn write_calls<W: Write>(out: W, calls: &[CallRecord], comments: &[String]) -> Result<(), CallLogError> {
    let mut w = writer(out, comments)?;
    w.write_record(CALL_HEADER).map_err(csv_err)?;
    for c in calls {
        w.write_record([
            c.beneficiary_id.to_string(),
            c.attempt_group.clone(),
            c.call_date.to_string(),
            c.message_id.to_string(),
            c.duration.to_string(),
            bit(c.success).to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush().map_err(CallLogError::Io)
}

pub fn write_interventions<W: Write>(
    out: W,
    interventions: &[InterventionRecord],
    comments: &[String],
) -> Result<(), CallLogError> {
    let mut w = writer(out, comments)?;
    w.write_record(INTERVENTION_HEADER).map_err(csv_err)?;
    for i in interventions {
        w.write_record([
            i.beneficiary_id.to_string(),
            i.date.to_string(),
            i.kind.as_str().to_string(),
            bit(i.success).to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush().map_err(CallLogError::Io)
}

/// Deduplicated, classified histories keyed by beneficiary, one per profile.
///
/// Each span starts at registration and ends the day after the last call (or
/// at `observed_until` when that is later). Calls without a profile are dropped.
pub fn build_histories(
    profiles: &[BeneficiaryProfile],
    calls: &[CallRecord],
    engagement_seconds: f64,
    observed_until: Option<NaiveDate>,
) -> Result<BTreeMap<BeneficiaryId, CallHistory>, CallLogError> {
    let mut by_id: BTreeMap<&BeneficiaryId, Vec<CallRecord>> =
        profiles.iter().map(|p| (&p.beneficiary_id, Vec::new())).collect();
    let mut orphans = 0usize;
    for record in dedup_attempts(calls) {
        match by_id.get_mut(&record.beneficiary_id) {
            Some(list) => list.push(record),
            None => orphans += 1,
        }
    }
    if orphans > 0 {
        log::warn!("{orphans} calls reference beneficiaries without a profile");
    }
    let mut out = BTreeMap::new();
    for p in profiles {
        let records = &by_id[&p.beneficiary_id];
        let last = records.iter().map(|r| r.call_date + Days::new(1)).max();
        let end = match (last, observed_until) {
            (Some(a), Some(b)) => a.max(b),
            (Some(a), None) => a,
            (None, Some(b)) => b,
            (None, None) => p.registration_date,
        }
        .max(p.registration_date);
        let span = DateWindow::new(p.registration_date, end);
        let history = CallHistory::from_records(p.beneficiary_id.clone(), records, span, engagement_seconds)?;
        out.insert(p.beneficiary_id.clone(), history);
    }
    Ok(out)
}
