//! `(lambda, window)` grids of one indicator, with display caps and CSV output.

use std::io::Write;

use serde::{Deserialize, Serialize};

pub const KL_CAP: f64 = 0.15;
pub const KURTOSIS_CAP: f64 = 16.0;

/// Applied to the raw value for the display column only.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum DisplayTransform {
    Identity,
    Cap { max: f64 },
    Clip { min: f64, max: f64 },
}

impl DisplayTransform {
    pub fn apply(self, raw: f64) -> f64 {
        match self {
            DisplayTransform::Identity => raw,
            DisplayTransform::Cap { max } => raw.min(max),
            DisplayTransform::Clip { min, max } => raw.clamp(min, max),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct HeatCell {
    /// `None` marks a cell with too little data; it is never replaced by zero.
    pub value: Option<f64>,
    pub n_samples: usize,
}

impl HeatCell {
    pub fn new(value: Option<f64>, n_samples: usize) -> Self {
        Self { value, n_samples }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeatmapTable {
    pub metric: String,
    pub transform: DisplayTransform,
    pub lambdas: Vec<f64>,
    /// Upper relative-energy edge of each window.
    pub e_rel: Vec<f64>,
    /// `cells[lambda_index][window_index]`.
    pub cells: Vec<Vec<HeatCell>>,
}

/// Fixed-width scientific notation with 17 significant digits, so values replay exactly.
pub fn format_float(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        format!("{x}")
    }
}

/// Empty field for a null.
pub fn format_opt(x: Option<f64>) -> String {
    x.map(format_float).unwrap_or_default()
}

/// In-memory CSV table of preformatted fields.
pub struct CsvBuilder(csv::Writer<Vec<u8>>);

impl CsvBuilder {
    pub fn new(header: &str) -> Self {
        let mut b = Self(csv::Writer::from_writer(Vec::new()));
        b.row(header.split(','));
        b
    }

    /// Panics if the field count differs from the header's.
    pub fn row<I, T>(&mut self, fields: I)
    where
        I: IntoIterator<Item = T>,
        T: AsRef<[u8]>,
    {
        self.0.write_record(fields).expect("row width matches header");
    }

    pub fn finish(self) -> String {
        let bytes = self.0.into_inner().expect("writing to memory");
        String::from_utf8(bytes).expect("fields are UTF-8")
    }
}

pub const HEATMAP_HEADER: &str = "lambda,window_index,E_rel,value_raw,value_display,n_samples";
pub const METRICS_HEADER: &str = "lambda,window_index,E_rel,metric_name,value_raw,value_display,n_samples";

impl HeatmapTable {
    /// All-null table over `lambdas` and `windows` equal windows.
    pub fn empty(metric: impl Into<String>, transform: DisplayTransform, lambdas: Vec<f64>, windows: usize) -> Self {
        let e_rel = (0..windows).map(|i| (i + 1) as f64 / windows as f64).collect();
        let cells = vec![vec![HeatCell::default(); windows]; lambdas.len()];
        Self {
            metric: metric.into(),
            transform,
            lambdas,
            e_rel,
            cells,
        }
    }

    pub fn set(&mut self, lambda_index: usize, window_index: usize, cell: HeatCell) {
        self.cells[lambda_index][window_index] = cell;
    }

    pub fn get(&self, lambda_index: usize, window_index: usize) -> HeatCell {
        self.cells[lambda_index][window_index]
    }

    pub fn display(&self, lambda_index: usize, window_index: usize) -> Option<f64> {
        self.get(lambda_index, window_index)
            .value
            .map(|v| self.transform.apply(v))
    }

    fn rows(&self) -> impl Iterator<Item = (f64, usize, f64, HeatCell, Option<f64>)> + '_ {
        self.cells.iter().enumerate().flat_map(move |(li, row)| {
            row.iter().enumerate().map(move |(wi, &cell)| {
                let shown = cell.value.map(|v| self.transform.apply(v));
                (self.lambdas[li], wi, self.e_rel[wi], cell, shown)
            })
        })
    }

    pub fn to_csv(&self) -> String {
        let mut csv = CsvBuilder::new(HEATMAP_HEADER);
        for (lambda, wi, e, cell, shown) in self.rows() {
            csv.row([
                format_float(lambda),
                wi.to_string(),
                format_float(e),
                format_opt(cell.value),
                format_opt(shown),
                cell.n_samples.to_string(),
            ]);
        }
        csv.finish()
    }
}

/// Writes the long-format table covering every metric in `tables`.
pub fn write_metrics_csv<W: Write>(w: W, tables: &[HeatmapTable]) -> std::io::Result<()> {
    let mut csv = csv::Writer::from_writer(w);
    csv.write_record(METRICS_HEADER.split(','))?;
    for t in tables {
        for (lambda, wi, e, cell, shown) in t.rows() {
            csv.write_record([
                format_float(lambda),
                wi.to_string(),
                format_float(e),
                t.metric.clone(),
                format_opt(cell.value),
                format_opt(shown),
                cell.n_samples.to_string(),
            ])?;
        }
    }
    csv.flush()
}
