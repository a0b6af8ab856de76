use std::collections::HashSet;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use super::TrialIoError;

/// Ground-truth label of a trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Key {
    BonaFide,
    Spoof,
}

impl Key {
    pub fn as_str(self) -> &'static str {
        match self {
            Key::BonaFide => "bonafide",
            Key::Spoof => "spoof",
        }
    }
}

impl fmt::Display for Key {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Key {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "bonafide" => Ok(Key::BonaFide),
            "spoof" => Ok(Key::Spoof),
            _ => Err(()),
        }
    }
}

/// One protocol line: `speaker_id trial_id env_or_dash system_or_dash key`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrialEntry {
    pub speaker_id: String,
    pub trial_id: String,
    /// Third column; `-` in logical-access protocols.
    pub environment: String,
    /// Attack label (e.g. `A11`) or `-` for bona fide trials.
    pub system_id: String,
    pub key: Key,
}

/// Parses protocol text. Blank lines are skipped; line numbers in errors are
/// 1-based.
pub fn parse_protocol_str(text: &str) -> Result<Vec<TrialEntry>, TrialIoError> {
    let mut seen = HashSet::new();
    let mut entries = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.is_empty() {
            continue;
        }
        if fields.len() != 5 {
            return Err(TrialIoError::MalformedLine {
                line: line_no,
                reason: format!("expected 5 fields, found {}", fields.len()),
            });
        }
        let key = fields[4].parse::<Key>().map_err(|_| TrialIoError::UnknownKey {
            line: line_no,
            key: fields[4].to_string(),
        })?;
        if !seen.insert(fields[1].to_string()) {
            return Err(TrialIoError::DuplicateTrialId(fields[1].to_string()));
        }
        entries.push(TrialEntry {
            speaker_id: fields[0].to_string(),
            trial_id: fields[1].to_string(),
            environment: fields[2].to_string(),
            system_id: fields[3].to_string(),
            key,
        });
    }
    Ok(entries)
}

pub fn parse_protocol(path: impl AsRef<Path>) -> Result<Vec<TrialEntry>, TrialIoError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| TrialIoError::io(path, e))?;
    parse_protocol_str(&text)
}

pub fn format_protocol_line(entry: &TrialEntry) -> String {
    format!(
        "{} {} {} {} {}",
        entry.speaker_id, entry.trial_id, entry.environment, entry.system_id, entry.key
    )
}
