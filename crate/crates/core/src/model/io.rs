//! DIMACS CNF and JSON model documents.

use std::fmt::Write as _;
use std::io::{BufRead, BufReader, Read};

use serde::{Deserialize, Serialize};

use super::{FeatureModel, ModelError, Origin};

/// Parses DIMACS CNF. Every variable becomes a concrete feature.
///
/// A clause count that disagrees with the header is logged and the actual
/// clauses are kept. Clauses may span lines; a `%` line ends the input.
pub fn parse_dimacs<R: Read>(reader: R) -> Result<FeatureModel, ModelError> {
    let reader = BufReader::new(reader);
    let mut header: Option<(usize, usize)> = None;
    let mut clauses: Vec<Vec<i32>> = Vec::new();
    let mut current: Vec<i32> = Vec::new();
    let mut last_line = 0;

    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = idx + 1;
        last_line = lineno;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('c') {
            continue;
        }
        if trimmed.starts_with('%') {
            break;
        }
        if trimmed.starts_with('p') {
            if header.is_some() {
                return Err(ModelError::Parse {
                    line: lineno,
                    message: "duplicate header".into(),
                });
            }
            header = Some(parse_header(trimmed).ok_or_else(|| ModelError::Parse {
                line: lineno,
                message: format!("malformed header `{trimmed}`"),
            })?);
            continue;
        }
        let Some((n, _)) = header else {
            return Err(ModelError::Parse {
                line: lineno,
                message: "clause before `p cnf` header".into(),
            });
        };
        for token in trimmed.split_whitespace() {
            let v: i64 = token.parse().map_err(|_| ModelError::Parse {
                line: lineno,
                message: format!("not an integer: `{token}`"),
            })?;
            if v == 0 {
                if current.is_empty() {
                    return Err(ModelError::EmptyClause {
                        index: clauses.len(),
                    });
                }
                clauses.push(std::mem::take(&mut current));
            } else if v.unsigned_abs() as usize > n {
                return Err(ModelError::LiteralOutOfRange {
                    literal: v,
                    n_features: n,
                });
            } else {
                current.push(v as i32);
            }
        }
    }
    let Some((n, m)) = header else {
        return Err(ModelError::Parse {
            line: last_line,
            message: "missing `p cnf` header".into(),
        });
    };
    if !current.is_empty() {
        log::warn!("last clause is not terminated by 0; accepting it");
        clauses.push(current);
    }
    if clauses.len() != m {
        log::warn!("header declares {m} clauses, found {}", clauses.len());
    }
    FeatureModel::new("model", n, clauses, None)
}

fn parse_header(line: &str) -> Option<(usize, usize)> {
    let mut parts = line.split_whitespace();
    if parts.next()? != "p" || parts.next()? != "cnf" {
        return None;
    }
    let n = parts.next()?.parse().ok()?;
    let m = parts.next()?.parse().ok()?;
    if parts.next().is_some() {
        return None;
    }
    Some((n, m))
}

/// Header and clauses; a simplified model is written with its fixed and
/// merged features expanded back into unit and binary clauses.
pub(crate) fn dimacs_body(model: &FeatureModel) -> String {
    let mut clauses: Vec<Vec<i32>> = model
        .clauses()
        .iter()
        .map(|c| c.literals().iter().map(|l| l.value()).collect())
        .collect();
    if let Some(r) = model.reduction() {
        for (i, origin) in r.origins().iter().enumerate() {
            let f = (i + 1) as i32;
            match *origin {
                Origin::Free => {}
                Origin::Fixed(v) => clauses.push(vec![if v { f } else { -f }]),
                Origin::Alias(l) => {
                    clauses.push(vec![-f, l.value()]);
                    clauses.push(vec![f, -l.value()]);
                }
            }
        }
    }
    let mut out = format!("p cnf {} {}\n", model.n_features(), clauses.len());
    for c in clauses {
        for v in c {
            let _ = write!(out, "{v} ");
        }
        out.push_str("0\n");
    }
    out
}

pub fn write_dimacs(model: &FeatureModel) -> String {
    format!("c {}\n{}", model.name(), dimacs_body(model))
}

/// JSON model document with an explicit concrete-feature subset.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelDocument {
    pub name: String,
    pub n_features: usize,
    pub clauses: Vec<Vec<i32>>,
    pub concrete_features: Vec<i64>,
}

pub fn parse_model_file<R: Read>(reader: R) -> Result<FeatureModel, ModelError> {
    let doc: ModelDocument = serde_json::from_reader(reader)?;
    FeatureModel::new(doc.name, doc.n_features, doc.clauses, Some(doc.concrete_features))
}

pub fn write_model_file(model: &FeatureModel) -> String {
    let body = dimacs_body(model);
    let clauses = body
        .lines()
        .skip(1)
        .map(|line| {
            line.split_whitespace()
                .map(|t| t.parse::<i32>().unwrap())
                .filter(|&v| v != 0)
                .collect()
        })
        .collect();
    let doc = ModelDocument {
        name: model.name().to_string(),
        n_features: model.n_features(),
        clauses,
        concrete_features: model.concrete_features().iter().map(|&f| f as i64).collect(),
    };
    serde_json::to_string_pretty(&doc).expect("model document serializes")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lits(model: &FeatureModel) -> Vec<Vec<i32>> {
        model
            .clauses()
            .iter()
            .map(|c| c.literals().iter().map(|l| l.value()).collect())
            .collect()
    }

    #[test]
    fn single_clause_example() {
        let m = parse_dimacs("p cnf 3 1\n-1 -3 0".as_bytes()).unwrap();
        assert_eq!(m.n_features(), 3);
        assert_eq!(lits(&m), vec![vec![-1, -3]]);
        assert_eq!(m.concrete_features(), &[1, 2, 3]);
    }

    #[test]
    fn unconstrained_example() {
        let m = parse_dimacs("p cnf 2 0\n".as_bytes()).unwrap();
        assert_eq!(m.n_features(), 2);
        assert!(m.clauses().is_empty());
    }

    #[test]
    fn two_clause_example_with_comments_and_split_lines() {
        let text = "c toy\nc another\np cnf 4 2\n1 2\n0 3 4 0\n";
        let m = parse_dimacs(text.as_bytes()).unwrap();
        assert_eq!(lits(&m), vec![vec![1, 2], vec![3, 4]]);
    }

    #[test]
    fn count_mismatch_is_accepted() {
        let m = parse_dimacs("p cnf 3 5\n1 2 0\n".as_bytes()).unwrap();
        assert_eq!(m.clauses().len(), 1);
    }

    #[test]
    fn dimacs_errors() {
        assert!(matches!(
            parse_dimacs("p cnf x 1\n1 0\n".as_bytes()),
            Err(ModelError::Parse { line: 1, .. })
        ));
        assert!(matches!(
            parse_dimacs("1 2 0\n".as_bytes()),
            Err(ModelError::Parse { .. })
        ));
        assert!(matches!(
            parse_dimacs("p cnf 2 1\n1 3 0\n".as_bytes()),
            Err(ModelError::LiteralOutOfRange { literal: 3, .. })
        ));
        assert!(matches!(
            parse_dimacs("p cnf 2 2\n1 0\n0\n".as_bytes()),
            Err(ModelError::EmptyClause { index: 1 })
        ));
        assert!(matches!(parse_dimacs("".as_bytes()), Err(ModelError::Parse { .. })));
    }

    #[test]
    fn document_equivalent_to_dimacs() {
        let doc = r#"{"name":"m","n_features":3,"clauses":[[-1,-3]],"concrete_features":[1,2,3]}"#;
        let a = parse_model_file(doc.as_bytes()).unwrap();
        let b = parse_dimacs("p cnf 3 1\n-1 -3 0".as_bytes()).unwrap();
        assert_eq!(lits(&a), lits(&b));
        assert_eq!(a.concrete_features(), b.concrete_features());
        assert_eq!(a.content_hash(), b.content_hash());
    }

    #[test]
    fn document_with_concrete_subset() {
        let doc = r#"{"name":"m","n_features":3,"clauses":[[-1,-3]],"concrete_features":[2,1]}"#;
        let m = parse_model_file(doc.as_bytes()).unwrap();
        assert_eq!(m.concrete_features(), &[1, 2]);
    }

    #[test]
    fn document_errors() {
        let empty = r#"{"name":"m","n_features":3,"clauses":[],"concrete_features":[]}"#;
        assert!(matches!(
            parse_model_file(empty.as_bytes()),
            Err(ModelError::NoConcreteFeatures)
        ));
        let range = r#"{"name":"m","n_features":3,"clauses":[],"concrete_features":[4]}"#;
        assert!(matches!(
            parse_model_file(range.as_bytes()),
            Err(ModelError::ConcreteOutOfRange { feature: 4, .. })
        ));
        let schema = r#"{"name":"m","n_features":3,"clauses":[]}"#;
        assert!(matches!(parse_model_file(schema.as_bytes()), Err(ModelError::Document(_))));
        let extra = r#"{"name":"m","n_features":3,"clauses":[],"concrete_features":[1],"x":1}"#;
        assert!(matches!(parse_model_file(extra.as_bytes()), Err(ModelError::Document(_))));
        let unsat = r#"{"name":"m","n_features":1,"clauses":[[1],[-1]],"concrete_features":[1]}"#;
        assert!(matches!(
            parse_model_file(unsat.as_bytes()),
            Err(ModelError::Unsatisfiable)
        ));
    }

    #[test]
    fn model_file_round_trip() {
        let doc = r#"{"name":"m","n_features":4,"clauses":[[1,2],[3,-4]],"concrete_features":[1,3]}"#;
        let m = parse_model_file(doc.as_bytes()).unwrap();
        let again = parse_model_file(write_model_file(&m).as_bytes()).unwrap();
        assert_eq!(lits(&m), lits(&again));
        assert_eq!(again.concrete_features(), &[1, 3]);
        assert_eq!(again.name(), "m");
    }
}
