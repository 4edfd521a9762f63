//! Samples of configurations and their file format.
//!
//! ```text
//! sample <model-name> <count>
//! hash <sha256 of the model>
//! -1 2 -3 4
//! ...
//! ```
//! One configuration per line, one literal per feature in feature order.

use std::fmt::Write as _;

use thiserror::Error;

use crate::model::{Configuration, Literal};

/// An ordered set of configurations.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Sample {
    configurations: Vec<Configuration>,
}

impl Sample {
    pub fn new(configurations: Vec<Configuration>) -> Self {
        Sample { configurations }
    }

    pub fn len(&self) -> usize {
        self.configurations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.configurations.is_empty()
    }

    pub fn configurations(&self) -> &[Configuration] {
        &self.configurations
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Configuration> {
        self.configurations.iter()
    }

    pub fn push(&mut self, config: Configuration) {
        self.configurations.push(config);
    }

    pub fn into_configurations(self) -> Vec<Configuration> {
        self.configurations
    }

    /// The configurations at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Sample {
        Sample::new(indices.iter().map(|&i| self.configurations[i].clone()).collect())
    }

    /// All configurations except those at `indices`.
    pub fn without(&self, indices: &[usize]) -> Sample {
        Sample::new(
            self.configurations
                .iter()
                .enumerate()
                .filter(|(i, _)| !indices.contains(i))
                .map(|(_, c)| c.clone())
                .collect(),
        )
    }
}

impl FromIterator<Configuration> for Sample {
    fn from_iter<T: IntoIterator<Item = Configuration>>(iter: T) -> Self {
        Sample::new(iter.into_iter().collect())
    }
}

impl<'a> IntoIterator for &'a Sample {
    type Item = &'a Configuration;
    type IntoIter = std::slice::Iter<'a, Configuration>;
    fn into_iter(self) -> Self::IntoIter {
        self.configurations.iter()
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SampleFileError {
    #[error("missing or malformed `sample <name> <count>` header")]
    Header,
    #[error("line {line}: {message}")]
    Line { line: usize, message: String },
    #[error("header declares {declared} configurations, found {found}")]
    Count { declared: usize, found: usize },
}

/// Parsed contents of a sample file.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SampleFile {
    pub model_name: String,
    pub model_hash: Option<String>,
    pub sample: Sample,
}

pub fn write_sample_file(model_name: &str, model_hash: &str, sample: &Sample) -> String {
    let mut out = format!("sample {} {}\nhash {}\n", model_name, sample.len(), model_hash);
    for c in sample {
        let _ = writeln!(out, "{c}");
    }
    out
}

pub fn parse_sample_file(text: &str) -> Result<SampleFile, SampleFileError> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines.next().ok_or(SampleFileError::Header)?;
    let parts: Vec<&str> = header.split_whitespace().collect();
    if parts.len() != 3 || parts[0] != "sample" {
        return Err(SampleFileError::Header);
    }
    let model_name = parts[1].to_string();
    let declared: usize = parts[2].parse().map_err(|_| SampleFileError::Header)?;
    let mut model_hash = None;
    let mut configs = Vec::new();
    for (idx, line) in lines {
        let line = line.trim();
        if let Some(h) = line.strip_prefix("hash ") {
            model_hash = Some(h.trim().to_string());
            continue;
        }
        let lits = line
            .split_whitespace()
            .map(|t| t.parse::<i32>().ok().and_then(Literal::try_new))
            .collect::<Option<Vec<Literal>>>()
            .ok_or_else(|| SampleFileError::Line {
                line: idx + 1,
                message: format!("not a list of nonzero integers: `{line}`"),
            })?;
        let config = Configuration::from_literals(lits.len(), &lits).ok_or_else(|| {
            SampleFileError::Line {
                line: idx + 1,
                message: "configuration must assign features 1..n exactly once".into(),
            }
        })?;
        configs.push(config);
    }
    if configs.len() != declared {
        return Err(SampleFileError::Count {
            declared,
            found: configs.len(),
        });
    }
    Ok(SampleFile {
        model_name,
        model_hash,
        sample: Sample::new(configs),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(lits: &[i32]) -> Configuration {
        let lits: Vec<Literal> = lits.iter().map(|&v| Literal::new(v)).collect();
        Configuration::from_literals(lits.len(), &lits).unwrap()
    }

    #[test]
    fn file_round_trip() {
        let s = Sample::new(vec![cfg(&[1, -2, 3]), cfg(&[-1, 2, -3])]);
        let text = write_sample_file("toy", "abc", &s);
        assert!(text.starts_with("sample toy 2\nhash abc\n1 -2 3\n"));
        let parsed = parse_sample_file(&text).unwrap();
        assert_eq!(parsed.sample, s);
        assert_eq!(parsed.model_hash.as_deref(), Some("abc"));
        assert_eq!(parsed.model_name, "toy");
    }

    #[test]
    fn file_errors() {
        assert_eq!(parse_sample_file(""), Err(SampleFileError::Header));
        assert_eq!(parse_sample_file("sample x\n"), Err(SampleFileError::Header));
        assert!(matches!(
            parse_sample_file("sample x 1\n1 2 x\n"),
            Err(SampleFileError::Line { line: 2, .. })
        ));
        assert!(matches!(
            parse_sample_file("sample x 1\n1 1 2\n"),
            Err(SampleFileError::Line { .. })
        ));
        assert_eq!(
            parse_sample_file("sample x 2\n1 2\n"),
            Err(SampleFileError::Count { declared: 2, found: 1 })
        );
    }

    #[test]
    fn subset_and_without() {
        let s = Sample::new(vec![cfg(&[1]), cfg(&[-1])]);
        assert_eq!(s.subset(&[1]).configurations(), &[cfg(&[-1])]);
        assert_eq!(s.without(&[1]).configurations(), &[cfg(&[1])]);
    }
}
