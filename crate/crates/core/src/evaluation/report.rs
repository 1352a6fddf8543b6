use std::fmt::Write as _;
use std::str::FromStr;

use super::metrics::{CvSummary, Scores};
use super::EvalError;

pub const CSV_HEADER: &str = "fold,accuracy,precision_irr,precision_rel,recall_irr,recall_rel,f1_irr,f1_rel";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ReportFormat {
    #[default]
    Text,
    Csv,
}

impl FromStr for ReportFormat {
    type Err = EvalError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "" | "text" | "txt" => Ok(ReportFormat::Text),
            "csv" => Ok(ReportFormat::Csv),
            other => Err(EvalError::Parse(format!("unknown report format {other:?}"))),
        }
    }
}

fn pair(v: [f64; 2]) -> String {
    format!("{:.1}/{:.1}", v[0], v[1])
}

fn text_row(label: &str, s: &Scores) -> [String; 5] {
    [
        label.to_owned(),
        format!("{:.1}", s.accuracy),
        pair(s.precision),
        pair(s.recall),
        pair(s.f1),
    ]
}

fn csv_row(label: &str, s: &Scores) -> String {
    let mut row = label.to_owned();
    for v in s.values() {
        write!(row, ",{v:.1}").unwrap();
    }
    row
}

/// Class pairs read irrelevant/relevant. Values are rounded to one decimal
/// here and nowhere else.
pub fn render_report(summary: &CvSummary, format: ReportFormat) -> String {
    match format {
        ReportFormat::Csv => {
            let mut out = String::from(CSV_HEADER);
            out.push('\n');
            for f in &summary.folds {
                out.push_str(&csv_row(&f.fold.to_string(), &f.scores));
                out.push('\n');
            }
            out.push_str(&csv_row("average", &summary.average));
            out.push('\n');
            out
        }
        ReportFormat::Text => {
            let mut rows = vec![["Fold", "Accuracy", "Precision", "Recall", "F1"].map(String::from)];
            rows.extend(summary.folds.iter().map(|f| text_row(&f.fold.to_string(), &f.scores)));
            rows.push(text_row("Average", &summary.average));
            let widths: Vec<usize> = (0..5).map(|c| rows.iter().map(|r| r[c].len()).max().unwrap()).collect();
            let mut out = String::new();
            for (i, r) in rows.iter().enumerate() {
                let cells: Vec<String> = r.iter().zip(&widths).map(|(c, w)| format!("{c:<w$}")).collect();
                out.push_str(cells.join(" | ").trim_end());
                out.push('\n');
                if i == 0 {
                    let rule: Vec<String> = widths.iter().map(|w| "-".repeat(*w)).collect();
                    out.push_str(&rule.join("-+-"));
                    out.push('\n');
                }
            }
            out
        }
    }
}

/// Reads a CSV report back as `(fold label, scores)` rows.
pub fn parse_csv(text: &str) -> Result<Vec<(String, Scores)>, EvalError> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    match lines.next() {
        Some(h) if h.trim() == CSV_HEADER => {}
        other => return Err(EvalError::Parse(format!("bad CSV header {other:?}"))),
    }
    lines
        .map(|line| {
            let cells: Vec<&str> = line.split(',').map(str::trim).collect();
            if cells.len() != 8 {
                return Err(EvalError::Parse(format!("expected 8 columns in {line:?}")));
            }
            let mut v = [0.0; 7];
            for (slot, cell) in v.iter_mut().zip(&cells[1..]) {
                *slot = cell
                    .parse()
                    .map_err(|e| EvalError::Parse(format!("{cell:?}: {e}")))?;
            }
            Ok((cells[0].to_owned(), Scores::from_values(v)))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evaluation::metrics::{average, FoldReport};

    /// Fold rows as published (already rounded).
    fn published() -> Vec<FoldReport> {
        let rows: [[f64; 7]; 5] = [
            [89.0, 92.1, 86.4, 85.4, 92.7, 88.7, 89.4],
            [87.8, 97.0, 81.6, 78.0, 97.6, 86.5, 88.9],
            [86.4, 85.4, 87.5, 87.5, 85.4, 86.4, 86.4],
            [84.0, 88.9, 80.0, 78.0, 90.0, 83.1, 84.7],
            [81.5, 93.3, 74.5, 68.3, 95.0, 78.9, 83.5],
        ];
        rows.iter()
            .enumerate()
            .map(|(i, v)| FoldReport {
                fold: i + 1,
                scores: Scores::from_values(*v),
                confusion: None,
            })
            .collect()
    }

    const PUBLISHED_AVERAGE: [f64; 7] = [85.7, 91.3, 82.0, 79.5, 92.1, 84.7, 86.6];

    #[test]
    fn averages_reproduce_published_row() {
        let s = average(published()).unwrap();
        assert!((s.average.accuracy - 85.74).abs() < 1e-9);
        assert!((s.average.f1[0] - 84.72).abs() < 1e-9);
        for (got, want) in s.average.values().iter().zip(PUBLISHED_AVERAGE) {
            assert!((got - want).abs() <= 0.1 + 1e-9, "{got} vs {want}");
        }
    }

    #[test]
    fn text_table() {
        let text = render_report(&average(published()).unwrap(), ReportFormat::Text);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 8);
        assert!(lines[0].starts_with("Fold"));
        assert!(lines[2].contains("92.1/86.4"));
        let avg = lines[7];
        assert!(avg.starts_with("Average"));
        assert!(avg.contains("85.7") && avg.contains("91.3/82.0") && avg.contains("84.7/86.6"));
        assert_eq!("".parse::<ReportFormat>().unwrap(), ReportFormat::Text);
        assert!("xml".parse::<ReportFormat>().is_err());
    }

    #[test]
    fn csv_round_trip() {
        let summary = average(published()).unwrap();
        let csv = render_report(&summary, ReportFormat::Csv);
        assert!(csv.starts_with(CSV_HEADER));
        let rows = parse_csv(&csv).unwrap();
        assert_eq!(rows.len(), 6);
        assert_eq!(rows[0].0, "1");
        assert_eq!(rows[0].1, summary.folds[0].scores);
        assert_eq!(rows[5].0, "average");
        assert_eq!(rows[5].1.values().map(|v| format!("{v:.1}")), summary.average.values().map(|v| format!("{v:.1}")));
        // rendering parsed values again is a fixed point
        let again = render_report(
            &CvSummary {
                folds: rows[..5]
                    .iter()
                    .enumerate()
                    .map(|(i, (_, s))| FoldReport { fold: i + 1, scores: *s, confusion: None })
                    .collect(),
                average: rows[5].1,
            },
            ReportFormat::Csv,
        );
        assert_eq!(again, csv);
    }

    #[test]
    fn csv_rejects_garbage() {
        assert!(parse_csv("a,b\n").is_err());
        assert!(parse_csv(&format!("{CSV_HEADER}\n1,2,3\n")).is_err());
        assert!(parse_csv(&format!("{CSV_HEADER}\n1,x,0,0,0,0,0,0\n")).is_err());
    }
}
