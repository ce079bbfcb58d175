use std::io;
use std::path::Path;

use super::slope::{fit_slope, SlopeFit};
use crate::{Error, Result};

pub const CSV_HEADER: [&str; 8] =
    ["config_hash", "policy", "tau", "norm", "max_err", "mean_err", "std_err", "subflow_evals"];

/// One `(policy, τ, norm)` measurement.
///
/// For a single deterministic run `max_err = mean_err` and `std_err = 0`.
/// For an ensemble, `mean_err` is the maximum over grid times of the
/// ensemble-mean error, `std_err` the sample standard deviation at that
/// time, and `max_err` the worst error of any single run.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub config_hash: String,
    pub policy: String,
    pub tau: f64,
    pub norm: String,
    pub max_err: f64,
    pub mean_err: f64,
    pub std_err: f64,
    pub subflow_evals: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeriesFit {
    pub policy: String,
    pub norm: String,
    pub fit: SlopeFit,
}

/// A `(policy, τ)` cell whose run failed; it has no rows.
#[derive(Debug, Clone, PartialEq)]
pub struct RowFailure {
    pub policy: String,
    pub tau: f64,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ConvergenceReport {
    pub config_hash: String,
    /// Ordered by policy (config order), norm, then τ descending.
    pub rows: Vec<ReportRow>,
    /// Slope of `mean_err` against τ per `(policy, norm)`.
    pub fits: Vec<SeriesFit>,
    pub failures: Vec<RowFailure>,
    /// Self-convergence gap of the reference solution, when one was checked.
    pub reference_gap: Option<f64>,
}

impl ConvergenceReport {
    pub fn from_rows(config_hash: impl Into<String>, rows: Vec<ReportRow>) -> Self {
        let mut report = Self { config_hash: config_hash.into(), rows, ..Self::default() };
        report.refit();
        report
    }

    /// Recompute the slope fits from the rows.
    pub fn refit(&mut self) {
        self.fits = self
            .series_keys()
            .into_iter()
            .filter_map(|(policy, norm)| {
                // Exact zeros (commuting operators) still get a fit, flagged
                // as degenerate.
                let pts: Vec<(f64, f64)> = self
                    .series(&policy, &norm)
                    .iter()
                    .map(|r| (r.tau, r.mean_err.max(f64::MIN_POSITIVE)))
                    .collect();
                fit_slope(&pts).ok().map(|fit| SeriesFit { policy, norm, fit })
            })
            .collect();
    }

    /// Distinct `(policy, norm)` pairs in row order.
    pub fn series_keys(&self) -> Vec<(String, String)> {
        let mut keys: Vec<(String, String)> = Vec::new();
        for r in &self.rows {
            if !keys.iter().any(|(p, n)| *p == r.policy && *n == r.norm) {
                keys.push((r.policy.clone(), r.norm.clone()));
            }
        }
        keys
    }

    pub fn series(&self, policy: &str, norm: &str) -> Vec<&ReportRow> {
        self.rows.iter().filter(|r| r.policy == policy && r.norm == norm).collect()
    }

    pub fn fit(&self, policy: &str, norm: &str) -> Option<&SlopeFit> {
        self.fits.iter().find(|f| f.policy == policy && f.norm == norm).map(|f| &f.fit)
    }

    pub fn is_complete(&self) -> bool {
        self.failures.is_empty()
    }
}

fn fmt_real(v: f64) -> String {
    // `{:e}` prints the shortest representation that parses back exactly.
    format!("{v:e}")
}

pub fn write_csv<W: io::Write>(report: &ConvergenceReport, out: W) -> std::result::Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for r in &report.rows {
        w.write_record([
            r.config_hash.clone(),
            r.policy.clone(),
            fmt_real(r.tau),
            r.norm.clone(),
            fmt_real(r.max_err),
            fmt_real(r.mean_err),
            fmt_real(r.std_err),
            r.subflow_evals.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn emit_csv(report: &ConvergenceReport, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
    write_csv(report, io::BufWriter::new(file)).map_err(|source| Error::Csv { path: path.to_path_buf(), source })
}

pub fn read_csv(path: &Path) -> Result<ConvergenceReport> {
    let file = std::fs::File::open(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
    read_csv_from(file).map_err(|e| match e {
        Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
        Error::Csv { source, .. } => Error::Csv { path: path.to_path_buf(), source },
        other => other,
    })
}

pub fn read_csv_from<R: io::Read>(input: R) -> Result<ConvergenceReport> {
    let mut reader = csv::Reader::from_reader(input);
    let csv_err = |source| Error::Csv { path: "<input>".into(), source };
    let header = reader.headers().map_err(csv_err)?.clone();
    if header.iter().ne(CSV_HEADER) {
        return Err(Error::config(format!("unexpected header {:?}", header.iter().collect::<Vec<_>>())));
    }
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(csv_err)?;
        let real = |k: usize| -> Result<f64> {
            record[k].parse().map_err(|_| Error::config(format!("row {}: bad number `{}`", i + 1, &record[k])))
        };
        rows.push(ReportRow {
            config_hash: record[0].to_string(),
            policy: record[1].to_string(),
            tau: real(2)?,
            norm: record[3].to_string(),
            max_err: real(4)?,
            mean_err: real(5)?,
            std_err: real(6)?,
            subflow_evals: record[7]
                .parse()
                .map_err(|_| Error::config(format!("row {}: bad count `{}`", i + 1, &record[7])))?,
        });
    }
    let hash = rows.first().map(|r| r.config_hash.clone()).unwrap_or_default();
    Ok(ConvergenceReport::from_rows(hash, rows))
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn row(policy: &str, tau: f64, err: f64) -> ReportRow {
        ReportRow {
            config_hash: "abc".into(),
            policy: policy.into(),
            tau,
            norm: "l2".into(),
            max_err: err * 1.5,
            mean_err: err,
            std_err: err / 3.0,
            subflow_evals: (2.0 / tau) as u64,
        }
    }

    #[test]
    fn empty_report_is_header_only() {
        let mut buf = Vec::new();
        write_csv(&ConvergenceReport::default(), &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), CSV_HEADER.join(",") + "\n");
    }

    #[test]
    fn one_row_round_trips() {
        let report = ConvergenceReport::from_rows("abc", vec![row("qr", 0.0625, 1.0 / 3.0)]);
        let mut buf = Vec::new();
        write_csv(&report, &mut buf).unwrap();
        assert_eq!(String::from_utf8_lossy(&buf).lines().count(), 2);
        let back = read_csv_from(buf.as_slice()).unwrap();
        assert_eq!(back.rows, report.rows);
    }

    #[test]
    fn full_report_round_trips_through_a_file() {
        let rows: Vec<ReportRow> = ["qr", "rand"]
            .iter()
            .flat_map(|p| (4..=10).map(move |q| row(p, 2f64.powi(-q), 0.7 * 2f64.powi(-2 * q) * (q as f64).ln())))
            .collect();
        let report = ConvergenceReport::from_rows("abc", rows);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.csv");
        emit_csv(&report, &path).unwrap();
        let back = read_csv(&path).unwrap();
        assert_eq!(back.rows.len(), report.rows.len());
        for (a, b) in back.rows.iter().zip(&report.rows) {
            for (x, y) in [(a.tau, b.tau), (a.max_err, b.max_err), (a.mean_err, b.mean_err), (a.std_err, b.std_err)] {
                assert!((x - y).abs() <= 1e-15 * y.abs());
            }
        }
        assert_eq!(back.fits, report.fits);
    }

    #[test]
    fn fits_per_series() {
        let rows: Vec<ReportRow> = (4..=8).map(|q| row("lie", 2f64.powi(-q), 2f64.powi(-q))).collect();
        let report = ConvergenceReport::from_rows("abc", rows);
        assert!((report.fit("lie", "l2").unwrap().slope - 1.0).abs() < 1e-12);
        assert!(report.fit("qr", "l2").is_none());

        let zeros: Vec<ReportRow> = (4..=8).map(|q| row("lie", 2f64.powi(-q), 0.0)).collect();
        assert!(ConvergenceReport::from_rows("abc", zeros).fit("lie", "l2").unwrap().degenerate);
    }

    #[test]
    fn missing_file_reports_path() {
        let err = read_csv(Path::new("/nonexistent/report.csv")).unwrap_err();
        assert!(err.to_string().contains("/nonexistent/report.csv"));
    }

    #[test]
    fn wrong_header_is_rejected() {
        assert!(read_csv_from("a,b\n1,2\n".as_bytes()).is_err());
    }
}
