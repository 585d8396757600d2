//! Machine-readable table output: CSV with a commented header, or JSON
//! lines carrying a schema-version field. All numbers print with 10
//! significant digits, locale independent, so output is byte-stable for
//! fixed inputs.

use std::io::Write;

use serde_json::{Map, Value as Json};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    JsonLines,
}

impl std::str::FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "csv" => Ok(Format::Csv),
            "json-lines" | "jsonl" => Ok(Format::JsonLines),
            other => Err(format!("unknown format '{other}' (expected csv or json-lines)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    F(f64),
    I(i64),
    S(String),
    Empty,
}

/// Formats with 10 significant digits, mimicking printf `%.10g`.
pub fn fmt_sig(v: f64) -> String {
    if v == 0.0 {
        return "0".to_string();
    }
    if v.is_nan() {
        return "nan".to_string();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf" } else { "-inf" }.to_string();
    }
    let exp = v.abs().log10().floor() as i32;
    let s = if (-4..10).contains(&exp) {
        format!("{:.*}", (9 - exp).max(0) as usize, v)
    } else {
        let e = format!("{v:.9e}");
        return trim_exponential(&e);
    };
    trim_decimal(&s)
}

fn trim_decimal(s: &str) -> String {
    if !s.contains('.') {
        return s.to_string();
    }
    let t = s.trim_end_matches('0').trim_end_matches('.');
    t.to_string()
}

fn trim_exponential(s: &str) -> String {
    match s.split_once('e') {
        Some((mant, exp)) => format!("{}e{}", trim_decimal(mant), exp),
        None => s.to_string(),
    }
}

/// Rounds to 10 significant digits; used for JSON numeric fields.
pub fn round_sig(v: f64) -> f64 {
    if v == 0.0 || !v.is_finite() {
        return v;
    }
    let exp = v.abs().log10().floor();
    let scale = 10f64.powf(9.0 - exp);
    (v * scale).round() / scale
}

pub struct Table {
    /// Schema tag carried by every JSON-lines record.
    pub schema: &'static str,
    /// Comment lines for the CSV header, without the leading `#`.
    pub comments: Vec<String>,
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn write(&self, format: Format, w: &mut dyn Write) -> std::io::Result<()> {
        match format {
            Format::Csv => self.write_csv(w),
            Format::JsonLines => self.write_json_lines(w),
        }
    }

    fn write_csv(&self, w: &mut dyn Write) -> std::io::Result<()> {
        for c in &self.comments {
            writeln!(w, "# {c}")?;
        }
        writeln!(w, "{}", self.columns.join(","))?;
        for row in &self.rows {
            let cells: Vec<String> = row
                .iter()
                .map(|c| match c {
                    Cell::F(v) => fmt_sig(*v),
                    Cell::I(v) => v.to_string(),
                    Cell::S(s) => s.clone(),
                    Cell::Empty => String::new(),
                })
                .collect();
            writeln!(w, "{}", cells.join(","))?;
        }
        Ok(())
    }

    fn write_json_lines(&self, w: &mut dyn Write) -> std::io::Result<()> {
        for row in &self.rows {
            let mut obj = Map::new();
            obj.insert("schema".into(), Json::String(self.schema.into()));
            for (col, cell) in self.columns.iter().zip(row) {
                let v = match cell {
                    Cell::F(v) if v.is_finite() => {
                        Json::from(serde_json::Number::from_f64(round_sig(*v)).unwrap())
                    }
                    Cell::F(v) => Json::String(fmt_sig(*v)),
                    Cell::I(v) => Json::from(*v),
                    Cell::S(s) => Json::String(s.clone()),
                    Cell::Empty => Json::Null,
                };
                obj.insert((*col).into(), v);
            }
            writeln!(w, "{}", Json::Object(obj))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn test_fmt_sig() {
        assert_eq!(fmt_sig(0.0), "0");
        assert_eq!(fmt_sig(1.0), "1");
        assert_eq!(fmt_sig(0.1), "0.1");
        assert_eq!(fmt_sig(2.5e6), "2500000");
        assert_eq!(fmt_sig(0.998160), "0.99816");
        assert_eq!(fmt_sig(f64::INFINITY), "inf");
        assert_eq!(fmt_sig(1.23456789012345e-7), "1.23456789e-7");
        assert_eq!(fmt_sig(-3.0), "-3");
        assert_eq!(fmt_sig(2.7548875021634682), "2.754887502");
    }

    #[test]
    fn test_round_sig() {
        assert_eq!(round_sig(2.7548875021634682), 2.754887502);
        assert_eq!(round_sig(0.0), 0.0);
    }
}
