use std::fmt::Write as _;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ClassCounts {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
}

impl ClassCounts {
    pub(crate) fn pooled(classes: &[ClassCounts]) -> (usize, usize, usize) {
        classes
            .iter()
            .fold((0, 0, 0), |(a, b, c), k| (a + k.tp, b + k.fp, c + k.fn_))
    }
}

/// Substitutions, deletions, insertions and reference count for one segment.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct SegmentCounts {
    pub s: usize,
    pub d: usize,
    pub i: usize,
    pub n: usize,
    pub(crate) fp: usize,
    pub(crate) fn_: usize,
}

impl SegmentCounts {
    pub(crate) fn finish(mut self) -> Self {
        self.s = self.fp.min(self.fn_);
        self.d = self.fn_.saturating_sub(self.fp);
        self.i = self.fp.saturating_sub(self.fn_);
        self
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MetricReport {
    pub er20: f64,
    pub f20: f64,
    pub le_cd: f64,
    pub lr_cd: f64,
    pub er: f64,
    pub f: f64,
    pub le: f64,
    pub lr: f64,
    pub classes_2020: Vec<ClassCounts>,
    pub segments_2020: Vec<SegmentCounts>,
    pub classes_2019: Vec<ClassCounts>,
    pub segments_2019: Vec<SegmentCounts>,
}

pub const CSV_HEADER: &str = "er20,f20,le_cd,lr_cd,er,f,le,lr";

impl MetricReport {
    /// Mean of `er20`, `1 - f20`, `le_cd / 180` and `1 - lr_cd`; lower is better.
    pub fn aggregate_rank(&self) -> f64 {
        (self.er20 + (1.0 - self.f20) + self.le_cd / 180.0 + (1.0 - self.lr_cd)) / 4.0
    }

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{}",
            self.er20, self.f20, self.le_cd, self.lr_cd, self.er, self.f, self.le, self.lr
        )
    }

    pub fn to_csv(&self) -> String {
        format!("{CSV_HEADER}\n{}\n", self.csv_row())
    }

    /// Per-class counts for both suites.
    pub fn class_csv(&self) -> String {
        let mut s = String::from("class,tp20,fp20,fn20,tp,fp,fn\n");
        for (k, (a, b)) in self.classes_2020.iter().zip(&self.classes_2019).enumerate() {
            let _ = writeln!(s, "{k},{},{},{},{},{},{}", a.tp, a.fp, a.fn_, b.tp, b.fp, b.fn_);
        }
        s
    }

    pub fn row_2020(&self, label: impl Into<String>) -> TableRow {
        TableRow {
            label: label.into(),
            values: [self.er20, self.f20, self.le_cd, self.lr_cd],
        }
    }

    pub fn row_2019(&self, label: impl Into<String>) -> TableRow {
        TableRow {
            label: label.into(),
            values: [self.er, self.f, self.le, self.lr],
        }
    }

    /// Both tables for a single system.
    pub fn to_table(&self, label: &str) -> String {
        format!(
            "{}\n{}",
            TableRow::render_2019(&[self.row_2019(label)]),
            TableRow::render_2020(&[self.row_2020(label)])
        )
    }
}

/// One system's line in a comparison table: error rate, F-score,
/// localization error and recall, as fractions and degrees.
#[derive(Clone, Debug, PartialEq)]
pub struct TableRow {
    pub label: String,
    pub values: [f64; 4],
}

impl TableRow {
    pub fn render_2019(rows: &[TableRow]) -> String {
        render(["ER", "F (%)", "LE (º)", "LR (%)"], rows)
    }

    pub fn render_2020(rows: &[TableRow]) -> String {
        render(["ER20º", "F20º (%)", "LEcd (º)", "LRcd (%)"], rows)
    }
}

fn render(headers: [&str; 4], rows: &[TableRow]) -> String {
    let width = rows
        .iter()
        .map(|r| r.label.chars().count())
        .chain(["framework".len()])
        .max()
        .unwrap_or(9);
    let mut s = format!(
        "{:<width$} | {:>8} | {:>8} | {:>8} | {:>8}\n",
        "framework", headers[0], headers[1], headers[2], headers[3]
    );
    let _ = writeln!(s, "{}", "-".repeat(width + 44));
    for r in rows {
        let [er, f, le, lr] = r.values;
        let _ = writeln!(
            s,
            "{:<width$} | {:>8.2} | {:>8.1} | {:>8.1} | {:>8.1}",
            r.label,
            er,
            100.0 * f,
            le,
            100.0 * lr
        );
    }
    s
}
