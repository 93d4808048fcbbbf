use std::fmt::Write as _;

use super::{ExperimentKind, SweepReport};
use crate::error::{IseaError, Result};

/// Layout of a generated matplotlib script.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotStyle {
    /// Uncertainty on a log axis against the sweep value, with surrogate bands.
    Decay,
    /// One uncertainty and one accuracy curve per pipeline.
    Overlay,
    /// Sample mean against reference mean.
    Distribution,
}

impl PlotStyle {
    pub fn for_experiment(kind: ExperimentKind) -> Self {
        match kind {
            ExperimentKind::SweepK | ExperimentKind::Bounds => PlotStyle::Decay,
            ExperimentKind::SweepN | ExperimentKind::Crossing | ExperimentKind::Aloss => PlotStyle::Overlay,
            ExperimentKind::SnrDist | ExperimentKind::BnormDist => PlotStyle::Distribution,
        }
    }
}

/// Python script plotting the CSV written for `report` at `csv_path`.
pub fn emit_plot_script(report: &SweepReport, csv_path: &str, style: PlotStyle) -> Result<String> {
    if report.rows.is_empty() {
        return Err(IseaError::invalid("cannot plot a report without rows"));
    }
    let xlabel = report.experiment.sweep_label();
    let mut s = String::new();
    let _ = writeln!(s, "import csv");
    let _ = writeln!(s, "import matplotlib.pyplot as plt");
    let _ = writeln!(s);
    let _ = writeln!(s, "def num(v):");
    let _ = writeln!(s, "    return float(v) if v else float('nan')");
    let _ = writeln!(s);
    let _ = writeln!(s, "rows = list(csv.DictReader(open({csv_path:?})))");
    let _ = writeln!(s, "pipelines = sorted({{r['pipeline'] for r in rows}})");
    let _ = writeln!(s);
    match style {
        PlotStyle::Decay => {
            let _ = writeln!(s, "fig, ax = plt.subplots()");
            let _ = writeln!(s, "for p in pipelines:");
            let _ = writeln!(s, "    sel = [r for r in rows if r['pipeline'] == p and r['feasible'] == 'FEASIBLE']");
            let _ = writeln!(s, "    x = [num(r['sweep_value']) for r in sel]");
            let _ = writeln!(s, "    ax.errorbar(x, [num(r['mean_uncertainty']) for r in sel],");
            let _ = writeln!(s, "                yerr=[3 * num(r['uncertainty_stderr']) for r in sel], label=p)");
            let _ = writeln!(s, "    ax.plot(x, [num(r['surrogate_lower']) for r in sel], '--', label=p + ' lower')");
            let _ = writeln!(s, "    ax.plot(x, [num(r['surrogate_upper']) for r in sel], ':', label=p + ' upper')");
            let _ = writeln!(s, "ax.set_yscale('log')");
            let _ = writeln!(s, "ax.set_xlabel({xlabel:?})");
            let _ = writeln!(s, "ax.set_ylabel('sensing uncertainty (nats)')");
            let _ = writeln!(s, "ax.legend()");
        }
        PlotStyle::Overlay => {
            let _ = writeln!(s, "fig, (ax_h, ax_a) = plt.subplots(1, 2, figsize=(10, 4))");
            let _ = writeln!(s, "for p in pipelines:");
            let _ = writeln!(s, "    sel = [r for r in rows if r['pipeline'] == p and r['feasible'] == 'FEASIBLE']");
            let _ = writeln!(s, "    x = [num(r['sweep_value']) for r in sel]");
            let _ = writeln!(s, "    ax_h.plot(x, [num(r['mean_uncertainty']) for r in sel], 'o-', label=p)");
            let _ = writeln!(s, "    ax_a.plot(x, [num(r['accuracy']) for r in sel], 'o-', label=p)");
            let _ = writeln!(s, "for ax, name in ((ax_h, 'sensing uncertainty (nats)'), (ax_a, 'accuracy')):");
            let _ = writeln!(s, "    ax.set_xlabel({xlabel:?})");
            let _ = writeln!(s, "    ax.set_ylabel(name)");
            let _ = writeln!(s, "    ax.legend()");
        }
        PlotStyle::Distribution => {
            let _ = writeln!(s, "fig, ax = plt.subplots()");
            let _ = writeln!(s, "sel = [r for r in rows if r['feasible'] == 'FEASIBLE']");
            let _ = writeln!(s, "x = [num(r['sweep_value']) for r in sel]");
            let _ = writeln!(s, "ax.plot(x, [num(r['mean_effective_snr']) for r in sel], 'o', label='sample mean')");
            let _ = writeln!(s, "ax.plot(x, [num(r['asymptotic_prediction']) for r in sel], 'x', label='reference mean')");
            let _ = writeln!(s, "ax.set_xlabel({xlabel:?})");
            let _ = writeln!(s, "ax.legend()");
        }
    }
    let _ = writeln!(s, "plt.tight_layout()");
    let _ = writeln!(s, "plt.savefig({:?})", format!("{csv_path}.png"));
    Ok(s)
}
