use std::io::Write;

use serde::Serialize;
use serde_json::Value;

use crate::error::Result;

/// Named numeric table; `NaN` marks cells without a value.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricTable {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl MetricTable {
    pub fn new(name: &str, columns: &[&str]) -> Self {
        Self {
            name: name.to_string(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let k = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[k]).collect())
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(&self.columns)?;
        for r in &self.rows {
            wtr.write_record(r.iter().map(|v| v.to_string()))?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Pass/fail verdict against a declared tolerance window.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub lower: Option<f64>,
    pub upper: Option<f64>,
    pub pass: bool,
    pub detail: String,
}

impl Check {
    pub fn within(name: &str, value: f64, lower: Option<f64>, upper: Option<f64>) -> Self {
        let pass = value.is_finite()
            && lower.is_none_or(|l| value >= l)
            && upper.is_none_or(|u| value <= u);
        Self {
            name: name.to_string(),
            value,
            lower,
            upper,
            pass,
            detail: String::new(),
        }
    }

    /// Strictly decreasing means whose `±z·se` bars do not overlap between neighbours.
    ///
    /// `value` is the smallest gap `(m_k − z·s_k) − (m_{k+1} + z·s_{k+1})`.
    pub fn decreasing(name: &str, means: &[f64], ses: &[f64], z: f64) -> Self {
        let gap = means
            .windows(2)
            .zip(ses.windows(2))
            .map(|(m, s)| (m[0] - z * s[0]) - (m[1] + z * s[1]))
            .fold(f64::INFINITY, f64::min);
        let mut c = Self::within(name, gap, Some(f64::MIN_POSITIVE), None);
        c.pass = means.len() >= 2 && gap > 0.0 && gap.is_finite();
        c.detail = format!("means {means:?}, standard errors {ses:?}, bar width {z}");
        c
    }

    pub fn skipped(name: &str, why: &str) -> Self {
        Self {
            name: name.to_string(),
            value: f64::NAN,
            lower: None,
            upper: None,
            pass: true,
            detail: format!("skipped: {why}"),
        }
    }

    pub fn with_detail(mut self, detail: impl Into<String>) -> Self {
        self.detail = detail.into();
        self
    }
}

/// Tables, verdicts and provenance for one experiment run.
///
/// Timings are kept out of the serialised form so identical inputs give
/// byte-identical reports.
#[derive(Debug, Clone, Serialize)]
pub struct ExperimentReport {
    pub experiment: String,
    pub config: Value,
    pub seeds: Vec<u64>,
    pub tables: Vec<MetricTable>,
    pub checks: Vec<Check>,
    pub notes: Vec<String>,
    #[serde(skip)]
    pub timings: Vec<(String, f64)>,
}

impl ExperimentReport {
    pub fn new(experiment: &str, config: Value) -> Self {
        Self {
            experiment: experiment.to_string(),
            config,
            seeds: Vec::new(),
            tables: Vec::new(),
            checks: Vec::new(),
            notes: Vec::new(),
            timings: Vec::new(),
        }
    }

    pub fn table(&self, name: &str) -> Option<&MetricTable> {
        self.tables.iter().find(|t| t.name == name)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn time<T>(&mut self, stage: &str, f: impl FnOnce() -> T) -> T {
        let start = std::time::Instant::now();
        let out = f();
        self.timings
            .push((stage.to_string(), start.elapsed().as_secs_f64()));
        out
    }
}

/// Mean and standard error of the mean (`∞` with fewer than two values).
pub(crate) fn mean_se(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    if v.is_empty() {
        return (f64::NAN, f64::INFINITY);
    }
    let m = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (m, f64::INFINITY);
    }
    let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (var / n).sqrt())
}

pub(crate) fn median(v: &[f64]) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}

/// Least-squares slope of `log y` against `log x`.
pub(crate) fn log_log_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / n, ly.iter().sum::<f64>() / n);
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}
