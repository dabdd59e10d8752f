//! Panel CSV files: a header row `period,<series>...` followed by one row per
//! period. Empty cells and `NA` are missing values.

use std::io::Read;
use std::path::Path;

use dfm_core::{Frequency, Panel, Period, TimeIndex};
use nalgebra::DMatrix;

use crate::error::{CliError, Result};
use crate::format::{fmt_opt, write_atomic};
use crate::report::table;

const MISSING_TOKEN: &str = "NA";

/// Guesses the frequency from a period label.
pub fn infer_frequency(label: &str) -> Frequency {
    match label.split_once('-') {
        Some((_, rest)) if rest.starts_with(['Q', 'q']) => Frequency::Quarterly,
        Some(_) => Frequency::Monthly,
        None => Frequency::Annual,
    }
}

fn parse_error(line: u64, column: usize, message: impl Into<String>) -> CliError {
    CliError::Parse { line, column, message: message.into() }
}

/// Parses a panel. `selection` picks and orders columns by header name.
pub fn parse_panel<R: Read>(reader: R, freq: Option<Frequency>, selection: Option<&[String]>) -> Result<Panel> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
    let header: Vec<String> =
        rdr.headers().map_err(|e| parse_error(1, 1, e.to_string()))?.iter().map(str::to_string).collect();
    if header.len() < 2 {
        return Err(parse_error(1, 1, "header needs a period column and at least one series"));
    }
    let names: Vec<String> = header[1..].to_vec();
    for (j, name) in names.iter().enumerate() {
        if name.is_empty() {
            return Err(parse_error(1, j + 2, "empty series name"));
        }
    }

    let mut rows: Vec<(Period, Vec<f64>)> = Vec::new();
    let mut freq = freq;
    for record in rdr.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            parse_error(line, 1, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let label = record.get(0).unwrap_or("");
        let f = *freq.get_or_insert_with(|| infer_frequency(label));
        let period = Period::parse(label, f).map_err(|e| parse_error(line, 1, e.to_string()))?;
        let mut values = Vec::with_capacity(names.len());
        for (j, cell) in record.iter().skip(1).enumerate() {
            if cell.is_empty() || cell == MISSING_TOKEN {
                values.push(f64::NAN);
                continue;
            }
            let v: f64 = cell.parse().map_err(|_| parse_error(line, j + 2, format!("`{cell}` is not a number")))?;
            if !v.is_finite() {
                return Err(parse_error(line, j + 2, format!("`{cell}` is not finite")));
            }
            values.push(v);
        }
        rows.push((period, values));
    }
    if rows.is_empty() {
        return Err(CliError::Data("panel file has no data rows".into()));
    }
    rows.sort_by_key(|(p, _)| p.ordinal());
    for pair in rows.windows(2) {
        if pair[0].0 == pair[1].0 {
            return Err(CliError::NonMonotonicPeriods(pair[0].0.to_string()));
        }
    }

    let start = rows[0].0;
    let len = (rows[rows.len() - 1].0.ordinal() - start.ordinal() + 1) as usize;
    let index = TimeIndex::new(start, len).map_err(CliError::model("ingest"))?;
    let columns: Vec<usize> = match selection {
        None => (0..names.len()).collect(),
        Some(sel) => sel
            .iter()
            .map(|s| names.iter().position(|n| n == s).ok_or_else(|| CliError::UnknownSeries(s.clone())))
            .collect::<Result<_>>()?,
    };
    let mut values = DMatrix::from_element(len, columns.len(), f64::NAN);
    for (period, row) in &rows {
        let t = (period.ordinal() - start.ordinal()) as usize;
        for (c, &j) in columns.iter().enumerate() {
            values[(t, c)] = row[j];
        }
    }
    let chosen = columns.iter().map(|&j| names[j].clone()).collect();
    Panel::new(index, chosen, values).map_err(CliError::model("ingest"))
}

pub fn read_panel(path: &Path, freq: Option<Frequency>, selection: Option<&[String]>) -> Result<Panel> {
    let file = std::fs::File::open(path).map_err(|source| CliError::Io { path: path.to_path_buf(), source })?;
    parse_panel(file, freq, selection)
}

pub fn format_panel(panel: &Panel) -> String {
    let mut header = vec!["period"];
    header.extend(panel.names().iter().map(String::as_str));
    let rows = (0..panel.n_periods()).map(|t| {
        let mut row = vec![panel.index().label(t)];
        row.extend((0..panel.n_series()).map(|j| fmt_opt(panel.get(t, j))));
        row
    });
    table(&header, rows)
}

pub fn write_panel(panel: &Panel, path: &Path) -> Result<()> {
    write_atomic(path, format_panel(panel).as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn parse(text: &str) -> Result<Panel> {
        parse_panel(text.as_bytes(), None, None)
    }

    #[test]
    fn blank_cell_is_missing() {
        let p = parse("period,a,b\n2000,1,2\n2001,,3\n2002,4,NA\n2003,5,6\n").unwrap();
        assert_eq!(p.n_periods(), 4);
        assert_eq!(p.get(1, 0), None);
        assert_eq!(p.get(2, 1), None);
        assert_eq!(p.get(3, 1), Some(6.0));
    }

    #[test]
    fn gaps_are_filled_and_rows_sorted() {
        let p = parse("period,a\n2002,3\n2000,1\n").unwrap();
        assert_eq!(p.n_periods(), 3);
        assert_eq!(p.index().label(1), "2001");
        assert_eq!(p.get(1, 0), None);
        assert_eq!(p.get(0, 0), Some(1.0));
    }

    #[test]
    fn quarterly_labels() {
        let p = parse("period,a\n2000-Q4,1\n2001-Q2,2\n").unwrap();
        assert_eq!(p.index().freq(), Frequency::Quarterly);
        assert_eq!(p.n_periods(), 3);
        assert_eq!(p.index().label(1), "2001-Q1");
    }

    #[test]
    fn errors() {
        assert!(matches!(parse("period,a\n2000,1\n2000,2\n"), Err(CliError::NonMonotonicPeriods(_))));
        assert!(matches!(parse("period,a,b\n2000,1,2\n2001,x,2\n"), Err(CliError::Parse { line: 3, column: 2, .. })));
        assert!(matches!(parse("period,a\n20x0,1\n"), Err(CliError::Parse { line: 2, column: 1, .. })));
        assert!(matches!(parse("period,a\n2000,1,5\n"), Err(CliError::Parse { .. })));
        let sel = vec!["zz".to_string()];
        assert!(matches!(
            parse_panel("period,a\n2000,1\n".as_bytes(), None, Some(&sel)),
            Err(CliError::UnknownSeries(_))
        ));
    }

    #[test]
    fn selection_orders_columns() {
        let sel = vec!["b".to_string(), "a".to_string()];
        let p = parse_panel("period,a,b\n2000,1,2\n".as_bytes(), None, Some(&sel)).unwrap();
        assert_eq!(p.names(), &["b".to_string(), "a".to_string()]);
        assert_eq!(p.get(0, 0), Some(2.0));
    }

    proptest! {
        #[test]
        fn write_then_read_round_trips(
            cells in prop::collection::vec(prop::option::weighted(0.85, -1e6..1e6f64), 2..60),
            quarterly in any::<bool>(),
        ) {
            let k = 2;
            let n = cells.len() / k;
            let mut values = DMatrix::from_fn(n, k, |t, j| cells[t * k + j].unwrap_or(f64::NAN));
            // a column may not be entirely missing
            values[(0, 0)] = 1.5;
            values[(0, 1)] = -2.5;
            let start = if quarterly { Period::quarterly(1999, 3).unwrap() } else { Period::annual(1990) };
            let panel = Panel::new(TimeIndex::new(start, n).unwrap(), vec!["x".into(), "y".into()], values).unwrap();
            let text = format_panel(&panel);
            let back = parse(&text).unwrap();
            prop_assert_eq!(back.index(), panel.index());
            prop_assert_eq!(back.names(), panel.names());
            for t in 0..n {
                for j in 0..k {
                    prop_assert_eq!(back.get(t, j), panel.get(t, j));
                }
            }
        }
    }
}
