use std::fmt::Write as _;

use super::{Clause, Cnf, Literal};
use crate::error::{Error, Result};

fn parse_error(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

/// Parses DIMACS CNF text.
///
/// Comment lines start with `c`. A line starting with `%` ends the clause
/// section (SATLIB files carry a trailing `%` / `0` pair). Clauses may span
/// lines and must be terminated by `0`; a final clause missing its
/// terminator is accepted.
pub fn parse_dimacs(text: &str) -> Result<Cnf> {
    let mut header: Option<(usize, usize)> = None;
    let mut clauses = Vec::new();
    let mut current: Vec<Literal> = Vec::new();
    let mut last_line = 0;

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        last_line = line_no;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('c') {
            continue;
        }
        if line.starts_with('%') {
            break;
        }
        if line.starts_with('p') {
            if header.is_some() {
                return Err(parse_error(line_no, "duplicate problem line"));
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 4 || fields[0] != "p" || fields[1] != "cnf" {
                return Err(parse_error(line_no, format!("malformed problem line `{line}`")));
            }
            let vars = fields[2]
                .parse::<usize>()
                .map_err(|_| parse_error(line_no, format!("bad variable count `{}`", fields[2])))?;
            let count = fields[3]
                .parse::<usize>()
                .map_err(|_| parse_error(line_no, format!("bad clause count `{}`", fields[3])))?;
            header = Some((vars, count));
            continue;
        }
        let Some((num_vars, _)) = header else {
            return Err(parse_error(line_no, "clause before `p cnf` header"));
        };
        for token in line.split_whitespace() {
            let value: i64 = token
                .parse()
                .map_err(|_| parse_error(line_no, format!("bad literal `{token}`")))?;
            if value == 0 {
                clauses.push(Clause::new(current.drain(..)));
                continue;
            }
            if value.unsigned_abs() as usize > num_vars {
                return Err(parse_error(
                    line_no,
                    format!(
                        "literal {} exceeds declared {} variables",
                        value.unsigned_abs(),
                        num_vars
                    ),
                ));
            }
            current.push(Literal::from_dimacs(value).expect("nonzero"));
        }
    }

    let Some((num_vars, declared)) = header else {
        return Err(parse_error(last_line.max(1), "missing `p cnf` header"));
    };
    if !current.is_empty() {
        clauses.push(Clause::new(current));
    }
    if clauses.len() != declared {
        return Err(parse_error(
            last_line,
            format!("header declares {declared} clauses, found {}", clauses.len()),
        ));
    }
    Cnf::new(num_vars, clauses)
}

pub fn emit_dimacs(cnf: &Cnf) -> String {
    let mut out = String::new();
    writeln!(out, "p cnf {} {}", cnf.num_vars(), cnf.num_clauses()).unwrap();
    for clause in cnf.clauses() {
        for lit in clause.literals() {
            write!(out, "{} ", lit.to_dimacs()).unwrap();
        }
        out.push_str("0\n");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_basic_instance() {
        let cnf = parse_dimacs("p cnf 2 2\n1 2 0\n-1 0\n").unwrap();
        assert_eq!(cnf, Cnf::from_dimacs_clauses(2, &[&[1, 2], &[-1]]));
    }

    #[test]
    fn skips_comments() {
        let cnf = parse_dimacs("c comment\np cnf 1 1\n1 0\n").unwrap();
        assert_eq!(cnf, Cnf::from_dimacs_clauses(1, &[&[1]]));
    }

    #[test]
    fn rejects_out_of_range_literal() {
        let err = parse_dimacs("p cnf 2 1\n3 0\n").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("literal 3 exceeds declared 2 variables"), "{msg}");
        assert!(msg.contains("line 2"), "{msg}");
    }

    #[test]
    fn rejects_missing_header() {
        let err = parse_dimacs("1 2 0\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
        assert!(parse_dimacs("c only comments\n").is_err());
    }

    #[test]
    fn rejects_clause_count_mismatch() {
        let err = parse_dimacs("p cnf 2 3\n1 0\n2 0\n").unwrap_err();
        assert!(err.to_string().contains("declares 3 clauses, found 2"));
    }

    #[test]
    fn deduplicates_literals() {
        let cnf = parse_dimacs("p cnf 2 1\n1 1 -2 0\n").unwrap();
        assert_eq!(cnf.clauses()[0].len(), 2);
    }

    #[test]
    fn handles_satlib_trailer_and_multiline_clauses() {
        let text = "c uf\np cnf 3 2\n 1 -2\n 3 0\n-1 2 0\n%\n0\n\n";
        let cnf = parse_dimacs(text).unwrap();
        assert_eq!(cnf, Cnf::from_dimacs_clauses(3, &[&[1, -2, 3], &[-1, 2]]));
    }

    #[test]
    fn emits_examples() {
        let cnf = Cnf::from_dimacs_clauses(2, &[&[1, 2], &[-1]]);
        assert_eq!(emit_dimacs(&cnf), "p cnf 2 2\n1 2 0\n-1 0\n");
        assert_eq!(emit_dimacs(&Cnf::new(0, vec![]).unwrap()), "p cnf 0 0\n");
    }

    #[test]
    fn empty_clause_round_trips() {
        let cnf = Cnf::new(1, vec![Clause::default()]).unwrap();
        let text = emit_dimacs(&cnf);
        assert_eq!(text, "p cnf 1 1\n0\n");
        assert_eq!(parse_dimacs(&text).unwrap(), cnf);
    }
}
