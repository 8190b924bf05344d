//! Text field dumps: one header line, then one comma-separated grid row per
//! line with `y` increasing down the file.

use std::fmt::Write as _;
use std::path::Path;

use bean_limit_core::{GridSpec, ScalarField};
use thiserror::Error;

pub const MAGIC: &str = "# bean-limit field v1";

#[derive(Debug, Error)]
pub enum DumpError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path}: line {line}: {reason}")]
    Malformed { path: String, line: usize, reason: String },
    #[error("field name `{0}` must be non-empty without whitespace")]
    BadName(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct FieldDump {
    pub name: String,
    pub t: f64,
    pub field: ScalarField,
}

fn num(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn format_field(name: &str, t: f64, field: &ScalarField) -> Result<String, DumpError> {
    if name.is_empty() || name.chars().any(char::is_whitespace) {
        return Err(DumpError::BadName(name.to_string()));
    }
    let g = field.grid();
    let n = g.n();
    let mut out = String::with_capacity(24 * n * n + 128);
    writeln!(out, "{MAGIC} L={} n={n} t={} name={name}", num(g.half_width()), num(t)).unwrap();
    for row in field.values().chunks(n) {
        let line: Vec<String> = row.iter().map(|&v| num(v)).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    Ok(out)
}

pub fn write_field(path: &Path, name: &str, t: f64, field: &ScalarField) -> Result<(), DumpError> {
    let text = format_field(name, t, field)?;
    std::fs::write(path, text).map_err(|source| DumpError::Io { path: path.display().to_string(), source })
}

pub fn parse_field(text: &str, path: &str) -> Result<FieldDump, DumpError> {
    let bad = |line: usize, reason: String| DumpError::Malformed { path: path.to_string(), line, reason };
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| bad(1, "empty file".into()))?;
    let rest = header.strip_prefix(MAGIC).ok_or_else(|| bad(1, format!("expected header starting `{MAGIC}`")))?;
    let (mut half_width, mut n, mut t, mut name) = (None, None, None, None);
    for token in rest.split_whitespace() {
        let (k, v) = token.split_once('=').ok_or_else(|| bad(1, format!("bad header token `{token}`")))?;
        let real = || v.parse::<f64>().map_err(|_| bad(1, format!("bad value for `{k}`: `{v}`")));
        match k {
            "L" => half_width = Some(real()?),
            "t" => t = Some(real()?),
            "n" => n = Some(v.parse::<usize>().map_err(|_| bad(1, format!("bad value for `n`: `{v}`")))?),
            "name" => name = Some(v.to_string()),
            _ => return Err(bad(1, format!("unknown header key `{k}`"))),
        }
    }
    let missing = |k: &str| bad(1, format!("header lacks `{k}`"));
    let (half_width, n, t, name) = (
        half_width.ok_or_else(|| missing("L"))?,
        n.ok_or_else(|| missing("n"))?,
        t.ok_or_else(|| missing("t"))?,
        name.ok_or_else(|| missing("name"))?,
    );
    let grid = GridSpec::new(half_width, n).map_err(|e| bad(1, e.to_string()))?;
    let mut values = Vec::with_capacity(n * n);
    for (k, row) in lines.enumerate() {
        let line = k + 2;
        if k >= n {
            return Err(bad(line, format!("more than {n} rows")));
        }
        let before = values.len();
        for cell in row.split(',') {
            values.push(cell.trim().parse::<f64>().map_err(|_| bad(line, format!("bad value `{cell}`")))?);
        }
        if values.len() - before != n {
            return Err(bad(line, format!("expected {n} values, found {}", values.len() - before)));
        }
    }
    if values.len() != n * n {
        return Err(bad(values.len() / n + 2, format!("expected {n} rows, found {}", values.len() / n)));
    }
    let field = ScalarField::from_values(grid, values).map_err(|e| bad(1, e.to_string()))?;
    Ok(FieldDump { name, t, field })
}

pub fn read_field(path: &Path) -> Result<FieldDump, DumpError> {
    let text =
        std::fs::read_to_string(path).map_err(|source| DumpError::Io { path: path.display().to_string(), source })?;
    parse_field(&text, &path.display().to_string())
}
