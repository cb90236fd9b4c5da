//! Header-addressed CSV tables with line-numbered parse errors.

use std::path::Path;

use crate::error::{Error, Result};

/// Shortest decimal form that parses back to the same `f64`.
pub fn format_f64(v: f64) -> String {
    format!("{v}")
}

/// Empty for `None`.
pub(crate) fn format_opt(v: Option<f64>) -> String {
    v.map(format_f64).unwrap_or_default()
}

/// Accumulates rows and renders them as CSV text.
pub(crate) struct TableWriter {
    inner: csv::Writer<Vec<u8>>,
}

impl TableWriter {
    pub fn new<S: AsRef<str>>(header: &[S]) -> Self {
        let mut inner = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        inner
            .write_record(header.iter().map(|h| h.as_ref()))
            .expect("writing to memory");
        Self { inner }
    }

    pub fn row<S: AsRef<str>>(&mut self, fields: &[S]) {
        self.inner
            .write_record(fields.iter().map(|f| f.as_ref()))
            .expect("writing to memory");
    }

    pub fn finish(self) -> Vec<u8> {
        self.inner.into_inner().expect("writing to memory")
    }
}

/// One data row with its 1-based line number in the source.
pub(crate) struct Row<'a> {
    table: &'a Table,
    pub line: u64,
    fields: csv::StringRecord,
}

pub(crate) struct Table {
    pub source: String,
    pub header: Vec<String>,
    rows: Vec<(u64, csv::StringRecord)>,
}

impl Table {
    /// Parses CSV text. An input without a header line is an error.
    pub fn parse(text: &str, source: &str) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let header: Vec<String> = reader
            .headers()
            .map_err(|e| csv_error(text, source, &e))?
            .iter()
            .map(str::to_owned)
            .collect();
        if header.iter().all(String::is_empty) {
            return Err(parse_error(source, 1, "empty file: missing header line"));
        }
        let mut rows = Vec::new();
        for rec in reader.records() {
            let rec = rec.map_err(|e| csv_error(text, source, &e))?;
            let line = rec.position().map(|p| line_at(text, p.byte())).unwrap_or(0);
            if rec.iter().all(str::is_empty) {
                continue;
            }
            rows.push((line, rec));
        }
        Ok(Self {
            source: source.to_owned(),
            header,
            rows,
        })
    }

    /// Fails unless the header equals `expected` exactly.
    pub fn expect_header<S: AsRef<str>>(&self, expected: &[S]) -> Result<()> {
        let want: Vec<&str> = expected.iter().map(|s| s.as_ref()).collect();
        if self
            .header
            .iter()
            .map(String::as_str)
            .ne(want.iter().copied())
        {
            return Err(parse_error(
                &self.source,
                1,
                &format!(
                    "header must be `{}`, found `{}`",
                    want.join(","),
                    self.header.join(",")
                ),
            ));
        }
        Ok(())
    }

    pub fn has_column(&self, name: &str) -> bool {
        self.header.iter().any(|h| h == name)
    }

    pub fn rows(&self) -> impl Iterator<Item = Row<'_>> {
        self.rows.iter().map(move |(line, fields)| Row {
            table: self,
            line: *line,
            fields: fields.clone(),
        })
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

impl Row<'_> {
    pub fn error(&self, message: &str) -> Error {
        parse_error(&self.table.source, self.line, message)
    }

    pub fn text(&self, column: &str) -> Result<&str> {
        let idx = self
            .table
            .header
            .iter()
            .position(|h| h == column)
            .ok_or_else(|| self.error(&format!("missing column `{column}`")))?;
        self.fields
            .get(idx)
            .ok_or_else(|| self.error(&format!("row has no field for `{column}`")))
    }

    pub fn parse<T: std::str::FromStr>(&self, column: &str) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        let raw = self.text(column)?;
        raw.parse::<T>()
            .map_err(|e| self.error(&format!("column `{column}`: cannot parse `{raw}`: {e}")))
    }

    /// `None` for an empty field.
    pub fn parse_opt(&self, column: &str) -> Result<Option<f64>> {
        if self.text(column)?.is_empty() {
            Ok(None)
        } else {
            self.parse(column).map(Some)
        }
    }
}

pub(crate) fn parse_error(source: &str, line: u64, message: &str) -> Error {
    Error::Parse {
        source_name: source.to_owned(),
        line,
        message: message.to_owned(),
    }
}

/// 1-based line of the first non-blank byte at or after `offset`. The csv
/// reader's own line counter and record offsets both include skipped blank
/// lines.
fn line_at(text: &str, offset: u64) -> u64 {
    let bytes = text.as_bytes();
    let mut end = (offset as usize).min(bytes.len());
    while end < bytes.len() && matches!(bytes[end], b'\n' | b'\r') {
        end += 1;
    }
    1 + bytes[..end].iter().filter(|&&b| b == b'\n').count() as u64
}

fn csv_error(text: &str, source: &str, e: &csv::Error) -> Error {
    let line = e.position().map(|p| line_at(text, p.byte())).unwrap_or(0);
    parse_error(source, line, &e.to_string())
}

pub(crate) fn io_error(path: &Path, e: &std::io::Error) -> Error {
    Error::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

/// Writes `contents` to a temporary file beside `path` and renames it into
/// place, so readers never observe a partial file.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    use std::io::Write;
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir).map_err(|e| io_error(dir, &e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| io_error(dir, &e))?;
    tmp.write_all(contents).map_err(|e| io_error(path, &e))?;
    tmp.as_file().sync_all().map_err(|e| io_error(path, &e))?;
    tmp.persist(path).map_err(|e| io_error(path, &e.error))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip_through_text() {
        for v in [
            0.1,
            1e-300,
            12345.678901234567,
            -2.9,
            f64::MIN_POSITIVE,
            1e22,
            f64::NAN,
        ] {
            let back: f64 = format_f64(v).parse().unwrap();
            assert!(back.to_bits() == v.to_bits() || (v.is_nan() && back.is_nan()));
        }
    }

    #[test]
    fn line_numbers_follow_the_source() {
        let t = Table::parse("a,b\n1,2\n\n3,x\n", "t.csv").unwrap();
        let rows: Vec<_> = t.rows().collect();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[1].line, 4);
        match rows[1].parse::<f64>("b") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 4),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn empty_input_is_a_parse_error() {
        assert!(matches!(
            Table::parse("", "e.csv"),
            Err(Error::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn ragged_rows_are_rejected_with_their_line() {
        match Table::parse("a,b\n1,2\n3\n", "r.csv") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{:?}", other.map(|t| t.header)),
        }
    }
}
