use std::io::Write;
use std::path::Path;

use super::ExperimentKind;
use crate::error::Result;
use crate::inference::Pipeline;

pub const CSV_HEADER: [&str; 11] = [
    "sweep_value",
    "pipeline",
    "mean_uncertainty",
    "uncertainty_stderr",
    "accuracy",
    "accuracy_stderr",
    "mean_effective_snr",
    "surrogate_lower",
    "surrogate_upper",
    "asymptotic_prediction",
    "feasible",
];

/// One (sweep point, pipeline) result. Metric cells are `None` when the
/// pipeline is infeasible or the experiment does not produce the quantity.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub sweep_value: f64,
    pub pipeline: Pipeline,
    pub mean_uncertainty: Option<f64>,
    pub uncertainty_stderr: Option<f64>,
    pub accuracy: Option<f64>,
    pub accuracy_stderr: Option<f64>,
    pub mean_effective_snr: Option<f64>,
    pub surrogate_lower: Option<f64>,
    pub surrogate_upper: Option<f64>,
    pub asymptotic_prediction: Option<f64>,
    pub feasible: bool,
}

impl SweepRow {
    pub fn empty(sweep_value: f64, pipeline: Pipeline) -> Self {
        Self {
            sweep_value,
            pipeline,
            mean_uncertainty: None,
            uncertainty_stderr: None,
            accuracy: None,
            accuracy_stderr: None,
            mean_effective_snr: None,
            surrogate_lower: None,
            surrogate_upper: None,
            asymptotic_prediction: None,
            feasible: true,
        }
    }

    pub fn infeasible(sweep_value: f64, pipeline: Pipeline) -> Self {
        Self {
            feasible: false,
            ..Self::empty(sweep_value, pipeline)
        }
    }

    fn record(&self) -> Vec<String> {
        let cell = |v: Option<f64>| v.map(format_sig9).unwrap_or_default();
        vec![
            format_sig9(self.sweep_value),
            self.pipeline.as_str().to_string(),
            cell(self.mean_uncertainty),
            cell(self.uncertainty_stderr),
            cell(self.accuracy),
            cell(self.accuracy_stderr),
            cell(self.mean_effective_snr),
            cell(self.surrogate_lower),
            cell(self.surrogate_upper),
            cell(self.asymptotic_prediction),
            if self.feasible { "FEASIBLE" } else { "INFEASIBLE" }.to_string(),
        ]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepReport {
    pub experiment: ExperimentKind,
    pub rows: Vec<SweepRow>,
    /// Human-readable per-point results that do not fit the row schema.
    pub summary: Vec<String>,
}

impl SweepReport {
    pub fn new(experiment: ExperimentKind) -> Self {
        Self {
            experiment,
            rows: Vec::new(),
            summary: Vec::new(),
        }
    }

    /// Rows of one pipeline, in sweep order.
    pub fn pipeline_rows(&self, pipeline: Pipeline) -> impl Iterator<Item = &SweepRow> {
        self.rows.iter().filter(move |r| r.pipeline == pipeline)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(CSV_HEADER)?;
        for row in &self.rows {
            w.write_record(row.record())?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        Ok(String::from_utf8(buf).expect("CSV output is ASCII"))
    }

    pub fn write_csv_file(&self, path: impl AsRef<Path>) -> Result<()> {
        let file = std::fs::File::create(path)?;
        self.write_csv(std::io::BufWriter::new(file))
    }
}

/// Formats like C's `%.9g`: 9 significant digits, trailing zeros removed,
/// scientific notation outside `[1e-5, 1e9)`.
pub fn format_sig9(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf" } else { "-inf" }.into();
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{x:.8e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..9).contains(&exp) {
        let decimals = (8 - exp).max(0) as usize;
        trim_zeros(format!("{x:.decimals$}"))
    } else {
        format!("{}e{}{:02}", trim_zeros(mantissa.to_string()), if exp < 0 { '-' } else { '+' }, exp.abs())
    }
}

fn trim_zeros(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}
