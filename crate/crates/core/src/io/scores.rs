use std::path::Path;

use indexmap::IndexMap;

use crate::scalar::Real;

use super::TrialIoError;

/// Detection scores keyed by trial id, in insertion (file) order. Higher
/// scores mean "more bona fide".
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreSet<T> {
    entries: IndexMap<String, T>,
}

impl<T: Real> Default for ScoreSet<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Real> ScoreSet<T> {
    pub fn new() -> Self {
        Self {
            entries: IndexMap::new(),
        }
    }

    /// Adds a score. Rejects empty ids, duplicates and non-finite values.
    pub fn insert(&mut self, trial_id: impl Into<String>, score: T) -> Result<(), TrialIoError> {
        let trial_id = trial_id.into();
        if trial_id.is_empty() || trial_id.chars().any(char::is_whitespace) {
            return Err(TrialIoError::MalformedLine {
                line: 0,
                reason: format!("invalid trial id {trial_id:?}"),
            });
        }
        if !score.is_finite() {
            return Err(TrialIoError::NonFiniteScore { line: 0 });
        }
        if self.entries.contains_key(&trial_id) {
            return Err(TrialIoError::DuplicateTrialId(trial_id));
        }
        self.entries.insert(trial_id, score);
        Ok(())
    }

    pub fn get(&self, trial_id: &str) -> Option<T> {
        self.entries.get(trial_id).copied()
    }

    pub fn contains(&self, trial_id: &str) -> bool {
        self.entries.contains_key(trial_id)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, T)> + '_ {
        self.entries.iter().map(|(k, &v)| (k.as_str(), v))
    }

    pub fn trial_ids(&self) -> impl Iterator<Item = &str> + '_ {
        self.entries.keys().map(String::as_str)
    }
}

impl<T: Real> FromIterator<(String, T)> for ScoreSet<T> {
    /// Collects without validation; later duplicates overwrite earlier ones.
    fn from_iter<I: IntoIterator<Item = (String, T)>>(iter: I) -> Self {
        Self {
            entries: iter.into_iter().collect(),
        }
    }
}

pub fn parse_scores_str<T: Real>(text: &str) -> Result<ScoreSet<T>, TrialIoError> {
    let mut set = ScoreSet::new();
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.is_empty() {
            continue;
        }
        if fields.len() != 2 {
            return Err(TrialIoError::MalformedLine {
                line: line_no,
                reason: format!("expected `trial_id score`, found {} fields", fields.len()),
            });
        }
        let value: f64 = fields[1].parse().map_err(|_| TrialIoError::MalformedLine {
            line: line_no,
            reason: format!("`{}` is not a number", fields[1]),
        })?;
        if !value.is_finite() {
            return Err(TrialIoError::NonFiniteScore { line: line_no });
        }
        set.insert(fields[0], T::lit(value)).map_err(|e| match e {
            TrialIoError::NonFiniteScore { .. } => TrialIoError::NonFiniteScore { line: line_no },
            other => other,
        })?;
    }
    Ok(set)
}

pub fn read_scores<T: Real>(path: impl AsRef<Path>) -> Result<ScoreSet<T>, TrialIoError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| TrialIoError::io(path, e))?;
    parse_scores_str(&text)
}

/// Renders `trial_id score` lines. Scores are widened to `f64` and printed in
/// shortest round-trip form, so reading the text back is lossless.
pub fn format_scores<T: Real>(set: &ScoreSet<T>) -> String {
    let mut out = String::with_capacity(set.len() * 24);
    for (id, score) in set.iter() {
        out.push_str(id);
        out.push(' ');
        out.push_str(&format!("{:?}", score.as_f64()));
        out.push('\n');
    }
    out
}

pub fn write_scores<T: Real>(path: impl AsRef<Path>, set: &ScoreSet<T>) -> Result<(), TrialIoError> {
    let path = path.as_ref();
    std::fs::write(path, format_scores(set)).map_err(|e| TrialIoError::io(path, e))
}
