//! Per-phase timing report for a benchmark run.
//!
//! CSV columns, in order:
//!
//! | column             | meaning                                              |
//! |--------------------|------------------------------------------------------|
//! | `label`            | fixture name, or `average` for the summary row       |
//! | `profiling_s`      | `cfg_to_msa_s + hashing_s`                           |
//! | `cfg_to_msa_s`     | parse, validate and peel arborescences               |
//! | `hashing_s`        | hash the arborescences and encrypt the signature     |
//! | `matching_s`       | decrypt and compare every peer signature             |
//! | `consensus_s`      | vote exchange and tally                              |
//! | `proposed_total_s` | `profiling_s + matching_s + consensus_s`             |
//! | `reference_exec_s` | user-supplied run time of the real job, or empty     |
//! | `overhead_percent` | `proposed_total_s / reference_exec_s * 100`, or empty |

use std::collections::BTreeMap;
use std::fmt::Write as _;

use thiserror::Error;

pub const CSV_COLUMNS: [&str; 9] = [
    "label",
    "profiling_s",
    "cfg_to_msa_s",
    "hashing_s",
    "matching_s",
    "consensus_s",
    "proposed_total_s",
    "reference_exec_s",
    "overhead_percent",
];

pub const AVERAGE_LABEL: &str = "average";

pub const FOOTER: &str = "\
profiling = cfg_to_msa + hashing (hashing includes encryption)
matching  = decrypting and comparing every peer signature on one replica
consensus = vote exchange and tally on one replica
total     = profiling + matching + consensus
overhead  = total / reference * 100, shown only when reference times are supplied";

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("row {row}: {message}")]
    Row { row: usize, message: String },
}

#[derive(Clone, Debug, PartialEq)]
pub struct TimingRow {
    pub label: String,
    pub profiling_s: f64,
    pub cfg_to_msa_s: f64,
    pub hashing_s: f64,
    pub matching_s: f64,
    pub consensus_s: f64,
    pub proposed_total_s: f64,
    pub reference_exec_s: Option<f64>,
    pub overhead_percent: Option<f64>,
}

impl TimingRow {
    /// Builds a row from its measured phases; the derived columns follow.
    pub fn new(
        label: impl Into<String>,
        cfg_to_msa_s: f64,
        hashing_s: f64,
        matching_s: f64,
        consensus_s: f64,
    ) -> Self {
        let profiling_s = cfg_to_msa_s + hashing_s;
        TimingRow {
            label: label.into(),
            profiling_s,
            cfg_to_msa_s,
            hashing_s,
            matching_s,
            consensus_s,
            proposed_total_s: profiling_s + matching_s + consensus_s,
            reference_exec_s: None,
            overhead_percent: None,
        }
    }

    pub fn with_reference(mut self, reference_exec_s: Option<f64>) -> Self {
        self.reference_exec_s = reference_exec_s;
        self.overhead_percent = reference_exec_s.map(|r| self.proposed_total_s / r * 100.0);
        self
    }

    /// Checks the report arithmetic to a relative tolerance of `1e-9`.
    pub fn check(&self) -> Result<(), String> {
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1e-12);
        if !close(self.profiling_s, self.cfg_to_msa_s + self.hashing_s) {
            return Err(format!("{}: profiling != cfg_to_msa + hashing", self.label));
        }
        if !close(
            self.proposed_total_s,
            self.profiling_s + self.matching_s + self.consensus_s,
        ) {
            return Err(format!(
                "{}: total != profiling + matching + consensus",
                self.label
            ));
        }
        match (self.reference_exec_s, self.overhead_percent) {
            (None, None) => Ok(()),
            (Some(r), Some(o)) if close(o, self.proposed_total_s / r * 100.0) => Ok(()),
            (Some(_), Some(_)) => Err(format!(
                "{}: overhead != total / reference * 100",
                self.label
            )),
            _ => Err(format!(
                "{}: overhead present without reference or vice versa",
                self.label
            )),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TimingReport {
    rows: Vec<TimingRow>,
}

impl TimingReport {
    pub fn new(rows: Vec<TimingRow>) -> Self {
        TimingReport { rows }
    }

    pub fn rows(&self) -> &[TimingRow] {
        &self.rows
    }

    /// Mean of every measured column. The reference time is averaged only
    /// when every row has one, and the overhead is then recomputed from the
    /// averages so the row obeys the same formula as the others.
    pub fn average(&self) -> Option<TimingRow> {
        if self.rows.is_empty() {
            return None;
        }
        let k = self.rows.len() as f64;
        let mean = |f: fn(&TimingRow) -> f64| self.rows.iter().map(f).sum::<f64>() / k;
        let reference = self
            .rows
            .iter()
            .map(|r| r.reference_exec_s)
            .sum::<Option<f64>>()
            .map(|s| s / k);
        Some(
            TimingRow::new(
                AVERAGE_LABEL,
                mean(|r| r.cfg_to_msa_s),
                mean(|r| r.hashing_s),
                mean(|r| r.matching_s),
                mean(|r| r.consensus_s),
            )
            .with_reference(reference),
        )
    }

    /// Rows followed by the average row.
    pub fn to_csv(&self) -> Result<String, ReportError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(CSV_COLUMNS)?;
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for r in self.rows.iter().chain(self.average().as_ref()) {
            w.write_record([
                r.label.clone(),
                r.profiling_s.to_string(),
                r.cfg_to_msa_s.to_string(),
                r.hashing_s.to_string(),
                r.matching_s.to_string(),
                r.consensus_s.to_string(),
                r.proposed_total_s.to_string(),
                opt(r.reference_exec_s),
                opt(r.overhead_percent),
            ])?;
        }
        let bytes = w
            .into_inner()
            .map_err(|e| ReportError::Csv(e.into_error().into()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    /// Parses [`to_csv`](Self::to_csv) output back into rows, including the
    /// average row.
    pub fn parse_csv(text: &str) -> Result<Vec<TimingRow>, ReportError> {
        let mut rdr = csv::Reader::from_reader(text.as_bytes());
        let headers = rdr.headers()?.clone();
        if headers.iter().ne(CSV_COLUMNS) {
            return Err(ReportError::Row {
                row: 0,
                message: format!("unexpected header {headers:?}"),
            });
        }
        let mut rows = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let row = i + 1;
            let num = |j: usize| -> Result<Option<f64>, ReportError> {
                let field = &rec[j];
                if field.is_empty() {
                    return Ok(None);
                }
                field.parse().map(Some).map_err(|e| ReportError::Row {
                    row,
                    message: format!("{}: {e}", CSV_COLUMNS[j]),
                })
            };
            let req = |j: usize| -> Result<f64, ReportError> {
                num(j)?.ok_or_else(|| ReportError::Row {
                    row,
                    message: format!("{} is empty", CSV_COLUMNS[j]),
                })
            };
            rows.push(TimingRow {
                label: rec[0].to_string(),
                profiling_s: req(1)?,
                cfg_to_msa_s: req(2)?,
                hashing_s: req(3)?,
                matching_s: req(4)?,
                consensus_s: req(5)?,
                proposed_total_s: req(6)?,
                reference_exec_s: num(7)?,
                overhead_percent: num(8)?,
            });
        }
        Ok(rows)
    }

    /// Fixed-width table in seconds to four decimals, with the footer.
    pub fn render_table(&self) -> String {
        let with_reference = self.rows.iter().any(|r| r.reference_exec_s.is_some());
        let width = self
            .rows
            .iter()
            .map(|r| r.label.len())
            .max()
            .unwrap_or(0)
            .max(AVERAGE_LABEL.len())
            .max(5);
        let mut out = String::new();
        let _ = write!(
            out,
            "{:<width$} {:>10} {:>10} {:>10} {:>10} {:>10} {:>10}",
            "label", "profiling", "cfg_to_msa", "hashing", "matching", "consensus", "total"
        );
        if with_reference {
            let _ = write!(out, " {:>10} {:>10}", "reference", "overhead%");
        }
        out.push('\n');
        let avg = self.average();
        for (i, r) in self.rows.iter().chain(avg.as_ref()).enumerate() {
            if i == self.rows.len() {
                out.push_str(&"-".repeat(width + 11 * if with_reference { 8 } else { 6 }));
                out.push('\n');
            }
            let _ = write!(
                out,
                "{:<width$} {:>10.4} {:>10.4} {:>10.4} {:>10.4} {:>10.4} {:>10.4}",
                r.label,
                r.profiling_s,
                r.cfg_to_msa_s,
                r.hashing_s,
                r.matching_s,
                r.consensus_s,
                r.proposed_total_s
            );
            if with_reference {
                let cell =
                    |v: Option<f64>| v.map(|x| format!("{x:.4}")).unwrap_or_else(|| "-".into());
                let _ = write!(
                    out,
                    " {:>10} {:>10}",
                    cell(r.reference_exec_s),
                    cell(r.overhead_percent)
                );
            }
            out.push('\n');
        }
        out.push('\n');
        out.push_str(FOOTER);
        out.push('\n');
        out
    }
}

/// Reads a `label,exec_time` CSV of user-measured run times in seconds.
pub fn parse_reference_times(text: &str) -> Result<BTreeMap<String, f64>, ReportError> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut out = BTreeMap::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row = i + 1;
        let err = |message: String| ReportError::Row { row, message };
        if rec.len() != 2 {
            return Err(err(format!(
                "expected label,exec_time, got {} fields",
                rec.len()
            )));
        }
        let t: f64 = rec[1].parse().map_err(|e| err(format!("exec_time: {e}")))?;
        if !(t.is_finite() && t > 0.0) {
            return Err(err(format!("exec_time must be positive, got {t}")));
        }
        out.insert(rec[0].to_string(), t);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> TimingReport {
        TimingReport::new(vec![
            TimingRow::new("wordmean", 0.04, 0.02, 0.0016, 0.0001).with_reference(Some(6.988)),
            TimingRow::new("pentomino", 0.05, 0.01, 0.0012, 0.0002).with_reference(Some(5.0)),
        ])
    }

    #[test]
    fn overhead_follows_formula() {
        let report = sample();
        let r = &report.rows()[0];
        assert!((r.proposed_total_s - 0.0617).abs() < 1e-12);
        assert!((r.overhead_percent.unwrap() - 0.0617 / 6.988 * 100.0).abs() < 1e-12);
        r.check().unwrap();
    }

    #[test]
    fn average_row_obeys_invariants() {
        let avg = sample().average().unwrap();
        avg.check().unwrap();
        assert_eq!(avg.label, AVERAGE_LABEL);
        assert!((avg.reference_exec_s.unwrap() - 5.994).abs() < 1e-12);
    }

    #[test]
    fn partial_reference_leaves_average_without_overhead() {
        let report = TimingReport::new(vec![
            TimingRow::new("a", 1.0, 0.0, 0.0, 0.0).with_reference(Some(10.0)),
            TimingRow::new("b", 1.0, 0.0, 0.0, 0.0),
        ]);
        let avg = report.average().unwrap();
        assert_eq!(avg.overhead_percent, None);
        avg.check().unwrap();
    }

    #[test]
    fn csv_round_trips() {
        let report = sample();
        let text = report.to_csv().unwrap();
        assert!(text.starts_with(&CSV_COLUMNS.join(",")));
        let rows = TimingReport::parse_csv(&text).unwrap();
        assert_eq!(rows.len(), 3);
        assert_eq!(&rows[..2], report.rows());
        for r in &rows {
            r.check().unwrap();
        }
    }

    #[test]
    fn check_catches_broken_rows() {
        let mut r = TimingRow::new("x", 1.0, 1.0, 1.0, 1.0);
        r.proposed_total_s = 3.0;
        assert!(r.check().is_err());
        let mut r = TimingRow::new("x", 1.0, 1.0, 1.0, 1.0).with_reference(Some(2.0));
        r.overhead_percent = Some(1.0);
        assert!(r.check().is_err());
    }

    #[test]
    fn table_has_footer_and_average() {
        let table = sample().render_table();
        assert!(table.contains("wordmean"));
        assert!(table.contains("average"));
        assert!(table.contains("overhead%"));
        assert!(table.contains("6.9880"));
        assert!(table.ends_with(&format!("{FOOTER}\n")));
        assert!(table.is_ascii());
    }

    #[test]
    fn reference_times_parse() {
        let refs = parse_reference_times("label,exec_time\nwordmean, 6.988\nbbp,2\n").unwrap();
        assert_eq!(refs["wordmean"], 6.988);
        assert_eq!(refs.len(), 2);
        assert!(parse_reference_times("label,exec_time\nx,0\n").is_err());
        assert!(parse_reference_times("label,exec_time\nx,abc\n").is_err());
    }
}
