//! Plain-text file formats: score files, feature matrices, AP tables and
//! number formatting shared by the CLI.

use std::fmt::Write as _;

use crate::dispersion::ApTable;
use crate::error::{Error, Result};
use crate::grouping::MetaFeatureSet;
use crate::losses::ClassScores;

fn parse_err(path: &str, line: usize, column: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_string(),
        line,
        column,
        message: message.into(),
    }
}

/// Comma-separated fields with their 1-based starting column.
fn fields(line: &str) -> impl Iterator<Item = (usize, &str)> {
    let mut col = 1;
    line.split(',').map(move |f| {
        let start = col + (f.len() - f.trim_start().len());
        col += f.chars().count() + 1;
        (start, f.trim())
    })
}

fn parse_real(path: &str, line: usize, col: usize, field: &str) -> Result<f64> {
    match field.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        Ok(v) => Err(parse_err(path, line, col, format!("value {v} is not finite"))),
        Err(_) => Err(parse_err(
            path,
            line,
            col,
            format!("expected a number, found '{field}'"),
        )),
    }
}

/// Significant lines with their 1-based line numbers.
fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end()))
        .filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'))
}

/// `true_label=<index>` followed by one line of comma-separated scores.
pub fn parse_scores(text: &str, path: &str) -> Result<ClassScores> {
    let mut lines = content_lines(text);
    let (ln, header) = lines
        .next()
        .ok_or_else(|| parse_err(path, 1, 1, "missing 'true_label=<index>' line"))?;
    let value = header
        .trim()
        .strip_prefix("true_label=")
        .ok_or_else(|| parse_err(path, ln, 1, "expected 'true_label=<index>'"))?;
    let label: usize = value
        .trim()
        .parse()
        .map_err(|_| parse_err(path, ln, 12, format!("invalid class index '{value}'")))?;
    let (ln, row) = lines
        .next()
        .ok_or_else(|| parse_err(path, ln + 1, 1, "missing score line"))?;
    let scores = fields(row)
        .map(|(col, f)| parse_real(path, ln, col, f))
        .collect::<Result<Vec<_>>>()?;
    if let Some((ln, _)) = lines.next() {
        return Err(parse_err(path, ln, 1, "unexpected extra line after scores"));
    }
    ClassScores::new(scores, label).map_err(|e| parse_err(path, ln, 1, e.to_string()))
}

pub fn write_scores(s: &ClassScores) -> String {
    let row: Vec<String> = s.scores().iter().map(|v| format!("{v:e}")).collect();
    format!("true_label={}\n{}\n", s.true_label(), row.join(","))
}

/// Header `category,<f0>,...` then one row per category.
pub fn parse_features(text: &str, path: &str) -> Result<MetaFeatureSet> {
    let mut lines = content_lines(text);
    let (hl, header) = lines
        .next()
        .ok_or_else(|| parse_err(path, 1, 1, "missing header line"))?;
    let dim = fields(header).count() - 1;
    if !header.trim_start().starts_with("category") || dim == 0 {
        return Err(parse_err(path, hl, 1, "header must be 'category,<f0>,<f1>,...'"));
    }
    let mut names = Vec::new();
    let mut rows = Vec::new();
    for (ln, line) in lines {
        let mut it = fields(line);
        let (_, name) = it.next().expect("split yields at least one field");
        if name.is_empty() {
            return Err(parse_err(path, ln, 1, "empty category name"));
        }
        let row = it
            .map(|(col, f)| parse_real(path, ln, col, f))
            .collect::<Result<Vec<_>>>()?;
        if row.len() != dim {
            return Err(parse_err(
                path,
                ln,
                1,
                format!("expected {dim} feature values, found {}", row.len()),
            ));
        }
        names.push(name.to_string());
        rows.push(row);
    }
    MetaFeatureSet::new(names, rows).map_err(|e| parse_err(path, hl, 1, e.to_string()))
}

/// Values are written in shortest round-trip form so re-reading is exact.
pub fn write_features(x: &MetaFeatureSet) -> String {
    let mut out = String::from("category");
    for f in 0..x.dim() {
        write!(out, ",f{f}").unwrap();
    }
    out.push('\n');
    for (name, fv) in x.categories().iter().zip(x.features()) {
        out.push_str(name);
        for v in fv.values() {
            write!(out, ",{v:e}").unwrap();
        }
        out.push('\n');
    }
    out
}

/// Lines of `class,ap`; an optional `class,ap` header is skipped.
pub fn parse_ap_table(text: &str, path: &str) -> Result<ApTable> {
    let mut rows = Vec::new();
    let mut first = true;
    for (ln, line) in content_lines(text) {
        let parts: Vec<(usize, &str)> = fields(line).collect();
        if first && parts.len() == 2 && parts[0].1 == "class" && parts[1].1 == "ap" {
            first = false;
            continue;
        }
        first = false;
        if parts.len() != 2 {
            return Err(parse_err(path, ln, 1, "expected 'class,ap'"));
        }
        let ap = parse_real(path, ln, parts[1].0, parts[1].1)?;
        rows.push((parts[0].1.to_string(), ap));
    }
    ApTable::new(rows).map_err(|e| match e {
        Error::InvalidInput(m) => Error::InvalidInput(format!("{path}: {m}")),
        other => other,
    })
}

/// Fixed-point decimal with 9 significant digits.
pub fn fmt_sig9(v: f64) -> String {
    if !v.is_finite() {
        return format!("{v}");
    }
    if v == 0.0 {
        return "0.00000000".to_string();
    }
    // exponent after rounding to 9 digits, so 9.9999999999 becomes 10.0000000
    let sci = format!("{v:.8e}");
    let exp: i32 = sci[sci.find('e').unwrap() + 1..].parse().unwrap();
    let decimals = (8 - exp).max(0) as usize;
    format!("{v:.decimals$}")
}
