//! Panel data: regular time indices, observed series with missing cells,
//! standardization and alignment.
//!
//! Missing cells are stored as `NaN` inside the value matrix and are exposed
//! through [`Panel::get`] as `None`. Non-missing cells are always finite.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;

use crate::error::{DfmError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Frequency {
    Annual,
    Quarterly,
    Monthly,
}

impl Frequency {
    pub fn periods_per_year(self) -> i64 {
        match self {
            Frequency::Annual => 1,
            Frequency::Quarterly => 4,
            Frequency::Monthly => 12,
        }
    }
}

impl FromStr for Frequency {
    type Err = DfmError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "annual" | "a" | "yearly" => Ok(Frequency::Annual),
            "quarterly" | "q" => Ok(Frequency::Quarterly),
            "monthly" | "m" => Ok(Frequency::Monthly),
            other => Err(DfmError::InvalidArgument(format!("unknown frequency `{other}`"))),
        }
    }
}

impl fmt::Display for Frequency {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Frequency::Annual => "annual",
            Frequency::Quarterly => "quarterly",
            Frequency::Monthly => "monthly",
        })
    }
}

/// A single period at a given frequency, stored as an ordinal count of
/// periods since year zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Period {
    freq: Frequency,
    ordinal: i64,
}

impl Period {
    pub fn annual(year: i64) -> Self {
        Period { freq: Frequency::Annual, ordinal: year }
    }

    pub fn quarterly(year: i64, quarter: u32) -> Result<Self> {
        if !(1..=4).contains(&quarter) {
            return Err(DfmError::InvalidArgument(format!("quarter {quarter} out of range")));
        }
        Ok(Period { freq: Frequency::Quarterly, ordinal: year * 4 + i64::from(quarter) - 1 })
    }

    pub fn monthly(year: i64, month: u32) -> Result<Self> {
        if !(1..=12).contains(&month) {
            return Err(DfmError::InvalidArgument(format!("month {month} out of range")));
        }
        Ok(Period { freq: Frequency::Monthly, ordinal: year * 12 + i64::from(month) - 1 })
    }

    pub fn freq(&self) -> Frequency {
        self.freq
    }

    pub fn ordinal(&self) -> i64 {
        self.ordinal
    }

    pub fn offset(&self, n: i64) -> Self {
        Period { freq: self.freq, ordinal: self.ordinal + n }
    }

    /// Parses `YYYY`, `YYYY-Qn` or `YYYY-MM` against the expected frequency.
    pub fn parse(label: &str, freq: Frequency) -> Result<Self> {
        let bad = || DfmError::InvalidArgument(format!("cannot parse period `{label}` as {freq}"));
        let label = label.trim();
        match freq {
            Frequency::Annual => {
                if label.len() != 4 {
                    return Err(bad());
                }
                label.parse::<i64>().map(Period::annual).map_err(|_| bad())
            }
            Frequency::Quarterly => {
                let (y, q) = label.split_once("-Q").ok_or_else(bad)?;
                if y.len() != 4 || q.len() != 1 {
                    return Err(bad());
                }
                let y = y.parse::<i64>().map_err(|_| bad())?;
                let q = q.parse::<u32>().map_err(|_| bad())?;
                Period::quarterly(y, q).map_err(|_| bad())
            }
            Frequency::Monthly => {
                let (y, m) = label.split_once('-').ok_or_else(bad)?;
                if y.len() != 4 || m.len() != 2 {
                    return Err(bad());
                }
                let y = y.parse::<i64>().map_err(|_| bad())?;
                let m = m.parse::<u32>().map_err(|_| bad())?;
                Period::monthly(y, m).map_err(|_| bad())
            }
        }
    }
}

impl fmt::Display for Period {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let per = self.freq.periods_per_year();
        let year = self.ordinal.div_euclid(per);
        let sub = self.ordinal.rem_euclid(per) + 1;
        match self.freq {
            Frequency::Annual => write!(f, "{year:04}"),
            Frequency::Quarterly => write!(f, "{year:04}-Q{sub}"),
            Frequency::Monthly => write!(f, "{year:04}-{sub:02}"),
        }
    }
}

/// A regular sequence of `len` periods starting at `start`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TimeIndex {
    start: Period,
    len: usize,
}

impl TimeIndex {
    pub fn new(start: Period, len: usize) -> Result<Self> {
        if len == 0 {
            return Err(DfmError::InvalidPanel("time index must have at least one period".into()));
        }
        Ok(TimeIndex { start, len })
    }

    pub fn start(&self) -> Period {
        self.start
    }

    pub fn end(&self) -> Period {
        self.start.offset(self.len as i64 - 1)
    }

    pub fn freq(&self) -> Frequency {
        self.start.freq
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn period(&self, i: usize) -> Period {
        self.start.offset(i as i64)
    }

    pub fn label(&self, i: usize) -> String {
        self.period(i).to_string()
    }

    /// Position of `p` inside the index, if covered.
    pub fn position(&self, p: Period) -> Option<usize> {
        if p.freq != self.freq() {
            return None;
        }
        let d = p.ordinal - self.start.ordinal;
        (d >= 0 && (d as usize) < self.len).then_some(d as usize)
    }
}

/// A T×k panel of observed series.
#[derive(Debug, Clone, PartialEq)]
pub struct Panel {
    index: TimeIndex,
    names: Vec<String>,
    values: DMatrix<f64>,
}

impl Panel {
    /// Builds a panel; `NaN` marks a missing cell. Infinite values are rejected.
    pub fn new(index: TimeIndex, names: Vec<String>, values: DMatrix<f64>) -> Result<Self> {
        if values.nrows() != index.len() {
            return Err(DfmError::DimensionMismatch(format!(
                "panel has {} rows but the index covers {} periods",
                values.nrows(),
                index.len()
            )));
        }
        if values.ncols() != names.len() {
            return Err(DfmError::DimensionMismatch(format!(
                "panel has {} columns but {} names",
                values.ncols(),
                names.len()
            )));
        }
        if names.is_empty() {
            return Err(DfmError::InvalidPanel("panel needs at least one series".into()));
        }
        let mut seen = HashSet::new();
        for name in &names {
            if name.trim().is_empty() {
                return Err(DfmError::InvalidPanel("series names must be non-empty".into()));
            }
            if !seen.insert(name.as_str()) {
                return Err(DfmError::DuplicateSeriesName(name.clone()));
            }
        }
        if values.iter().any(|v| v.is_infinite()) {
            return Err(DfmError::NonFiniteValue("panel values".into()));
        }
        for (j, name) in names.iter().enumerate() {
            if values.column(j).iter().all(|v| v.is_nan()) {
                return Err(DfmError::InvalidPanel(format!("series `{name}` is entirely missing")));
            }
        }
        Ok(Panel { index, names, values })
    }

    /// Builds a panel from rows of optional values.
    pub fn from_rows(index: TimeIndex, names: Vec<String>, rows: &[Vec<Option<f64>>]) -> Result<Self> {
        let k = names.len();
        if rows.iter().any(|r| r.len() != k) {
            return Err(DfmError::DimensionMismatch("ragged panel rows".into()));
        }
        let values = DMatrix::from_fn(rows.len(), k, |t, j| rows[t][j].unwrap_or(f64::NAN));
        Panel::new(index, names, values)
    }

    pub fn index(&self) -> &TimeIndex {
        &self.index
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    /// Raw matrix with `NaN` for missing cells.
    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn n_periods(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_series(&self) -> usize {
        self.values.ncols()
    }

    pub fn get(&self, t: usize, j: usize) -> Option<f64> {
        let v = self.values[(t, j)];
        (!v.is_nan()).then_some(v)
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    /// Observed values of column `j`, in time order.
    pub fn observed(&self, j: usize) -> Vec<f64> {
        self.values.column(j).iter().copied().filter(|v| !v.is_nan()).collect()
    }

    /// Keeps the named columns, in the given order.
    pub fn select(&self, names: &[String]) -> Result<Panel> {
        let cols = names
            .iter()
            .map(|n| self.column_index(n).ok_or_else(|| DfmError::UnknownSeries(n.clone())))
            .collect::<Result<Vec<_>>>()?;
        let values = DMatrix::from_fn(self.n_periods(), cols.len(), |t, j| self.values[(t, cols[j])]);
        Panel::new(self.index, names.to_vec(), values)
    }

    pub fn rename(&self, names: Vec<String>) -> Result<Panel> {
        Panel::new(self.index, names, self.values.clone())
    }
}

/// Location and scale of one series, computed over its observed cells.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesStats {
    pub mean: f64,
    /// Population standard deviation (divisor N).
    pub std: f64,
    pub n_obs: usize,
}

impl SeriesStats {
    pub fn from_values(xs: &[f64]) -> Option<Self> {
        if xs.is_empty() {
            return None;
        }
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let ss = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>();
        Some(SeriesStats { mean, std: (ss / n).sqrt(), n_obs: xs.len() })
    }
}

/// Rescales every column to mean zero and unit population variance over its
/// observed cells. Missing cells stay missing.
pub fn standardize(panel: &Panel) -> Result<(Panel, Vec<SeriesStats>)> {
    let mut stats = Vec::with_capacity(panel.n_series());
    let mut values = panel.values.clone();
    for (j, name) in panel.names.iter().enumerate() {
        let obs = panel.observed(j);
        if obs.len() < 2 {
            return Err(DfmError::InsufficientData(name.clone()));
        }
        let s = SeriesStats::from_values(&obs).expect("non-empty");
        // relative to the series' own magnitude so that large constant levels are caught
        let scale = s.mean.abs().max(f64::MIN_POSITIVE);
        if s.std == 0.0 || s.std <= 1e-14 * scale {
            return Err(DfmError::ZeroVarianceSeries(name.clone()));
        }
        for v in values.column_mut(j).iter_mut() {
            if !v.is_nan() {
                *v = (*v - s.mean) / s.std;
            }
        }
        stats.push(s);
    }
    Ok((Panel { index: panel.index, names: panel.names.clone(), values }, stats))
}

/// Inverse of [`standardize`]: `x * std + mean`, column by column.
pub fn destandardize(panel: &Panel, stats: &[SeriesStats]) -> Result<Panel> {
    if stats.len() != panel.n_series() {
        return Err(DfmError::DimensionMismatch(format!("{} stats for {} series", stats.len(), panel.n_series())));
    }
    if let Some(s) = stats.iter().find(|s| !(s.std > 0.0)) {
        return Err(DfmError::InvalidArgument(format!("non-positive std {}", s.std)));
    }
    let mut values = panel.values.clone();
    for (j, s) in stats.iter().enumerate() {
        for v in values.column_mut(j).iter_mut() {
            if !v.is_nan() {
                *v = *v * s.std + s.mean;
            }
        }
    }
    Ok(Panel { index: panel.index, names: panel.names.clone(), values })
}

/// Joins panels over the union of their periods. Columns keep input order;
/// cells a source does not cover are missing.
pub fn align(panels: &[Panel]) -> Result<Panel> {
    let first = panels.first().ok_or_else(|| DfmError::InvalidArgument("nothing to align".into()))?;
    let freq = first.index.freq();
    if panels.iter().any(|p| p.index.freq() != freq) {
        return Err(DfmError::FrequencyMismatch);
    }
    let start = panels.iter().map(|p| p.index.start()).min().expect("non-empty");
    let end = panels.iter().map(|p| p.index.end()).max().expect("non-empty");
    let len = (end.ordinal() - start.ordinal() + 1) as usize;
    let index = TimeIndex::new(start, len)?;

    let mut names = Vec::new();
    let mut seen = BTreeMap::new();
    for p in panels {
        for n in &p.names {
            if seen.insert(n.clone(), ()).is_some() {
                return Err(DfmError::DuplicateSeriesName(n.clone()));
            }
            names.push(n.clone());
        }
    }
    let mut values = DMatrix::from_element(len, names.len(), f64::NAN);
    let mut col = 0;
    for p in panels {
        let offset = (p.index.start().ordinal() - start.ordinal()) as usize;
        for j in 0..p.n_series() {
            for t in 0..p.n_periods() {
                values[(offset + t, col)] = p.values[(t, j)];
            }
            col += 1;
        }
    }
    Panel::new(index, names, values)
}

/// Checks that every column is within `tol` of mean zero and unit variance.
pub fn check_standardized(panel: &Panel, tol: f64) -> Result<()> {
    for (j, name) in panel.names.iter().enumerate() {
        let s = SeriesStats::from_values(&panel.observed(j)).expect("columns are never empty");
        if s.mean.abs() > tol || (s.std * s.std - 1.0).abs() > tol {
            return Err(DfmError::NotStandardized(format!(
                "series `{name}` has mean {:.3e} and variance {:.6}",
                s.mean,
                s.std * s.std
            )));
        }
    }
    Ok(())
}
