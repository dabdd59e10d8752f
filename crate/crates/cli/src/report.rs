//! Text renderings of estimation, risk, forecast and scenario results.

use std::fmt::Write as _;

use dfm_core::estimation::EstimationReport;
use dfm_core::forecast::{AlertReport, AlertRule, Forecast, ScenarioOutcome};
use dfm_core::risk::RiskSeries;
use dfm_core::SignificanceFilter;

use crate::format::{fmt_float, fmt_opt};

pub const ESTIMATION_HEADER: [&str; 5] = ["parameter", "estimate", "std_err", "z", "p"];

pub fn factor_name(j: usize) -> String {
    format!("f{}", j + 1)
}

/// Renders rows as CSV, quoting cells where needed.
pub fn table<I>(header: &[&str], rows: I) -> String
where
    I: IntoIterator<Item = Vec<String>>,
{
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for row in rows {
        w.write_record(&row).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("cells are UTF-8")
}

pub fn estimation_csv(report: &EstimationReport) -> String {
    let rows = report.rows.iter().map(|row| {
        vec![row.name.clone(), fmt_float(row.estimate), fmt_opt(row.std_error), fmt_opt(row.z), fmt_opt(row.p_value)]
    });
    table(&ESTIMATION_HEADER, rows)
}

fn cell(v: Option<f64>, width: usize, prec: usize) -> String {
    match v {
        Some(v) => format!("{v:>width$.prec$}"),
        None => format!("{:>width$}", "."),
    }
}

pub fn estimation_text(report: &EstimationReport) -> String {
    let mut out = String::new();
    let spec = report.spec;
    let _ =
        writeln!(out, "Model: {} (k={}, factors={}, p={}, q={})", spec.classify(), spec.k, spec.n_f, spec.p, spec.q);
    let _ = writeln!(
        out,
        "Sample: {} to {} ({} periods)",
        report.index.label(0),
        report.index.label(report.index.len() - 1),
        report.index.len()
    );
    let _ = writeln!(out, "Log-likelihood: {:.6}", report.log_likelihood);
    let _ = writeln!(
        out,
        "Converged: {} after {} iterations (scaled gradient {:.3e}, stop: {:?})",
        if report.converged { "yes" } else { "no" },
        report.iterations,
        report.gradient_norm,
        report.stop
    );
    for d in &report.diagnostics {
        let _ = writeln!(out, "Note: {d}");
    }
    out.push('\n');
    let width = report.rows.iter().map(|r| r.name.len()).max().unwrap_or(9).max(9);
    let _ = writeln!(out, "{:<width$}  {:>12}  {:>12}  {:>10}  {:>8}", "parameter", "estimate", "std_err", "z", "p");
    let _ = writeln!(out, "{}", "-".repeat(width + 50));
    for row in &report.rows {
        let _ = writeln!(
            out,
            "{:<width$}  {}  {}  {}  {}",
            row.name,
            cell(Some(row.estimate), 12, 6),
            cell(row.std_error, 12, 6),
            cell(row.z, 10, 4),
            cell(row.p_value, 8, 4)
        );
    }
    out
}

/// One row per period and factor with filtered and smoothed means and bands.
pub fn factor_csv(report: &EstimationReport, z: f64) -> String {
    let header = [
        "period",
        "factor",
        "filtered",
        "filtered_lower",
        "filtered_upper",
        "smoothed",
        "smoothed_lower",
        "smoothed_upper",
    ];
    let mut rows = Vec::new();
    for t in 0..report.index.len() {
        for j in 0..report.spec.n_f {
            let (fm, fs) = (report.filtered_factor[(t, j)], report.filtered_factor_var[(t, j)].max(0.0).sqrt());
            let (sm, ss) = (report.smoothed_factor[(t, j)], report.smoothed_factor_var[(t, j)].max(0.0).sqrt());
            rows.push(vec![
                report.index.label(t),
                factor_name(j),
                fmt_float(fm),
                fmt_float(fm - z * fs),
                fmt_float(fm + z * fs),
                fmt_float(sm),
                fmt_float(sm - z * ss),
                fmt_float(sm + z * ss),
            ]);
        }
    }
    table(&header, rows)
}

pub fn reduction_csv(filter: &SignificanceFilter) -> String {
    let kept = filter.kept.iter().map(|s| vec![s.clone(), "kept".into(), String::new()]);
    let dropped =
        filter.dropped.iter().enumerate().map(|(i, s)| vec![s.clone(), "dropped".into(), (i + 1).to_string()]);
    table(&["series", "status", "order"], kept.chain(dropped))
}

pub fn risk_csv(risks: &[RiskSeries]) -> String {
    let mut rows = Vec::new();
    for (j, r) in risks.iter().enumerate() {
        let latest = r.factor.last().copied().unwrap_or(f64::NAN);
        let metrics = [
            ("inverted", r.inverted.to_string()),
            ("trend_direction", r.trend.direction.to_string()),
            ("slope", fmt_float(r.trend.slope)),
            ("standardized_slope", fmt_float(r.trend.standardized_slope)),
            ("volatility", fmt_float(r.volatility)),
            ("latest_period", r.index.label(r.index.len() - 1)),
            ("latest", fmt_float(latest)),
            ("percentile_of_latest", fmt_float(r.percentile_of_latest)),
        ];
        for (name, value) in metrics {
            rows.push(vec![factor_name(j), name.to_string(), value]);
        }
    }
    table(&["factor", "metric", "value"], rows)
}

pub fn forecast_csv(fc: &Forecast) -> String {
    let mut rows = Vec::new();
    for t in 0..fc.horizon() {
        let mut row = |name: String, mean: f64, var: f64| {
            let sd = var.max(0.0).sqrt();
            rows.push(vec![
                fc.index.label(t),
                (t + 1).to_string(),
                name,
                fmt_float(mean),
                fmt_float(var),
                fmt_float(mean - fc.z * sd),
                fmt_float(mean + fc.z * sd),
            ]);
        };
        for j in 0..fc.factor_mean.ncols() {
            row(factor_name(j), fc.factor_mean[(t, j)], fc.factor_var[(t, j)]);
        }
        for (i, s) in fc.series.iter().enumerate() {
            row(s.clone(), fc.observable_mean[(t, i)], fc.observable_var[(t, i)]);
        }
    }
    table(&["period", "step", "variable", "mean", "variance", "lower", "upper"], rows)
}

pub fn scenario_csv(outcome: &ScenarioOutcome) -> String {
    let fc = &outcome.baseline;
    let mut rows = Vec::new();
    for t in 0..fc.horizon() {
        for j in 0..fc.factor_mean.ncols() {
            rows.push(vec![
                fc.index.label(t),
                (t + 1).to_string(),
                factor_name(j),
                fmt_float(fc.factor_mean[(t, j)]),
                fmt_float(outcome.scenario.factor_mean[(t, j)]),
                fmt_float(outcome.delta[(t, j)]),
            ]);
        }
    }
    table(&["period", "step", "factor", "baseline", "scenario", "delta"], rows)
}

pub fn alert_csv(rule: &AlertRule, alerts: &[AlertReport]) -> String {
    let header =
        ["factor", "percentile", "consecutive", "threshold", "fired", "first_breach_step", "first_breach_period"];
    let rows = alerts.iter().enumerate().map(|(j, a)| {
        vec![
            factor_name(j),
            fmt_float(rule.percentile),
            rule.consecutive.to_string(),
            fmt_float(a.threshold),
            a.fired.to_string(),
            a.first_breach.map(|s| s.to_string()).unwrap_or_default(),
            a.first_breach_period.clone().unwrap_or_default(),
        ]
    });
    table(&header, rows)
}

/// Parses an estimation CSV into `(parameter, [estimate, std_err, z, p])`,
/// with absent cells as `None`.
pub fn parse_estimation_csv(text: &str) -> Option<Vec<(String, [Option<f64>; 4])>> {
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    if rdr.headers().ok()?.iter().ne(ESTIMATION_HEADER) {
        return None;
    }
    rdr.records()
        .map(|rec| {
            let rec = rec.ok()?;
            let mut vals = [None; 4];
            for (i, v) in vals.iter_mut().enumerate() {
                let c = rec.get(i + 1)?;
                *v = if c.is_empty() { None } else { Some(c.parse().ok()?) };
            }
            Some((rec.get(0)?.to_string(), vals))
        })
        .collect()
}
