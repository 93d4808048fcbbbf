//! Experiment orchestration: parameter sweeps, distribution checks and
//! CSV / plot-script output.

mod plot;
mod report;

use std::path::PathBuf;

use rayon::prelude::*;

use crate::channel::{aircomp_effective_snr, orthogonal_effective_snr, sample_channel};
use crate::error::{IseaError, Result};
use crate::inference::{accuracy_of, run_trials, uncertainty_of, ChannelMode, Pipeline, TrialRecord};
use crate::rng::StreamKey;
use crate::scenario::{build_scenario, Scenario, ScenarioConfig};
use crate::theory::{
    b_norm_reference_cdf, crossing_probability, expected_a_loss_lower_bound, ks_statistic, loss_parameter,
    off_diagonal_moments, surrogate_uncertainty_full, uncertainty_bounds, xi_constant, zeta_air_reference_cdf,
    SeparationGeometry,
};

pub use plot::{emit_plot_script, PlotStyle};
pub use report::{format_sig9, SweepReport, SweepRow, CSV_HEADER};

/// Minimum number of channel draws for a distribution check.
pub const MIN_DISTRIBUTION_DRAWS: usize = 1_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ExperimentKind {
    /// Vary the number of sensors `K`.
    SweepK,
    /// Vary the number of receive antennas `N`.
    SweepN,
    /// Scaled AirComp alignment gain against its exponential limit, per `K`.
    SnrDist,
    /// Zero-forcing beamformer norms against their reference law, per `N`.
    BnormDist,
    /// Sensing uncertainty against its lower and upper bounds, per `K`.
    Bounds,
    /// AirComp versus orthogonal access over `N`, with the crossing probability.
    Crossing,
    /// Separation loss against transmit SNR (dB).
    Aloss,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 7] = [
        ExperimentKind::SweepK,
        ExperimentKind::SweepN,
        ExperimentKind::SnrDist,
        ExperimentKind::BnormDist,
        ExperimentKind::Bounds,
        ExperimentKind::Crossing,
        ExperimentKind::Aloss,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            ExperimentKind::SweepK => "sweep-k",
            ExperimentKind::SweepN => "sweep-n",
            ExperimentKind::SnrDist => "snr-dist",
            ExperimentKind::BnormDist => "bnorm-dist",
            ExperimentKind::Bounds => "bounds",
            ExperimentKind::Crossing => "crossing",
            ExperimentKind::Aloss => "aloss",
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.as_str() == name)
            .ok_or_else(|| IseaError::config(format!("unknown experiment `{name}`")))
    }

    /// Stream identifier used in the seeding key.
    pub fn id(&self) -> u64 {
        match self {
            ExperimentKind::SweepK => 1,
            ExperimentKind::SweepN => 2,
            ExperimentKind::SnrDist => 3,
            ExperimentKind::BnormDist => 4,
            ExperimentKind::Bounds => 5,
            ExperimentKind::Crossing => 6,
            ExperimentKind::Aloss => 7,
        }
    }

    /// Name of the swept quantity.
    pub fn sweep_label(&self) -> &'static str {
        match self {
            ExperimentKind::SweepK | ExperimentKind::SnrDist | ExperimentKind::Bounds => "K",
            ExperimentKind::SweepN | ExperimentKind::BnormDist | ExperimentKind::Crossing => "N",
            ExperimentKind::Aloss => "transmit SNR (dB)",
        }
    }

    fn integer_sweep(&self) -> bool {
        !matches!(self, ExperimentKind::Aloss)
    }
}

impl std::fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub scenario: ScenarioConfig,
    pub experiment: ExperimentKind,
    pub sweep_values: Vec<f64>,
    pub pipelines: Vec<Pipeline>,
    pub output_path: Option<PathBuf>,
    /// Worker threads; `None` uses the global pool. Results do not depend on it.
    pub workers: Option<usize>,
    /// Bound constant `c` of the upper bound.
    pub bound_constant: f64,
    /// Antenna-to-sensor ratio for `snr-dist`.
    pub omega: f64,
}

fn range(lo: usize, hi: usize) -> Vec<f64> {
    (lo..=hi).map(|v| v as f64).collect()
}

impl ExperimentSpec {
    /// Default sweep and pipelines for `experiment`. With `paper_scale` the
    /// distribution checks also run at `K = 200`.
    pub fn new(experiment: ExperimentKind, scenario: ScenarioConfig, paper_scale: bool) -> Self {
        use Pipeline::*;
        let k = scenario.num_sensors;
        let (sweep_values, pipelines) = match experiment {
            ExperimentKind::SweepK => (range(1, 12), Pipeline::ALL.to_vec()),
            ExperimentKind::Bounds => (range(1, 12), vec![Noiseless]),
            ExperimentKind::SweepN | ExperimentKind::Crossing => (range(2, 20), vec![AirComp, Orthogonal, Adaptive]),
            ExperimentKind::SnrDist if paper_scale => (vec![100.0, 200.0], vec![AirComp]),
            ExperimentKind::SnrDist => (vec![100.0], vec![AirComp]),
            ExperimentKind::BnormDist => (vec![(k + 6) as f64], vec![Orthogonal]),
            ExperimentKind::Aloss => ((-2..=6).map(|i| 5.0 * i as f64).collect(), vec![AirComp]),
        };
        Self {
            scenario,
            experiment,
            sweep_values,
            pipelines,
            output_path: None,
            workers: None,
            bound_constant: 1.0,
            omega: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.scenario.validate()?;
        if self.sweep_values.is_empty() {
            return Err(IseaError::config("sweep_values must not be empty"));
        }
        if self.sweep_values.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(IseaError::config("sweep_values must be strictly increasing"));
        }
        if self.sweep_values.iter().any(|v| !v.is_finite()) {
            return Err(IseaError::config("sweep_values must be finite"));
        }
        if self.experiment.integer_sweep()
            && self.sweep_values.iter().any(|&v| v < 1.0 || v.fract() != 0.0)
        {
            return Err(IseaError::config(format!(
                "{} sweep values must be positive integers",
                self.experiment
            )));
        }
        if self.pipelines.is_empty() {
            return Err(IseaError::config("at least one pipeline is required"));
        }
        if !(self.bound_constant > 0.0) || !self.bound_constant.is_finite() {
            return Err(IseaError::config("bound constant must be positive"));
        }
        if !(self.omega > 0.0) || !self.omega.is_finite() {
            return Err(IseaError::config("omega must be positive"));
        }
        if self.workers == Some(0) {
            return Err(IseaError::config("workers must be positive"));
        }
        Ok(())
    }
}

/// Runs the experiment and writes the CSV to `spec.output_path` if set.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<SweepReport> {
    spec.validate()?;
    let report = match spec.workers {
        None => run_points(spec)?,
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| IseaError::config(format!("cannot start worker pool: {e}")))?
            .install(|| run_points(spec))?,
    };
    if let Some(path) = &spec.output_path {
        report.write_csv_file(path)?;
    }
    Ok(report)
}

fn run_points(spec: &ExperimentSpec) -> Result<SweepReport> {
    let mut report = SweepReport::new(spec.experiment);
    for (index, &value) in spec.sweep_values.iter().enumerate() {
        let key = StreamKey::new(spec.scenario.master_seed, spec.experiment.id(), index as u64);
        match spec.experiment {
            ExperimentKind::SnrDist => snr_dist_point(spec, value, key, &mut report)?,
            ExperimentKind::BnormDist => bnorm_dist_point(spec, value, key, &mut report)?,
            _ => trial_point(spec, value, key, &mut report)?,
        }
    }
    Ok(report)
}

fn point_config(spec: &ExperimentSpec, value: f64) -> ScenarioConfig {
    let mut cfg = spec.scenario.clone();
    match spec.experiment {
        ExperimentKind::SweepK | ExperimentKind::Bounds => cfg.num_sensors = value as usize,
        ExperimentKind::SweepN | ExperimentKind::Crossing | ExperimentKind::BnormDist => {
            cfg.num_antennas = value as usize
        }
        ExperimentKind::Aloss => cfg.transmit_snr_db = value,
        ExperimentKind::SnrDist => {
            cfg.num_sensors = value as usize;
            cfg.num_antennas = ((spec.omega * value).round() as usize).max(1);
        }
    }
    cfg
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    s / n as f64
}

fn trial_point(spec: &ExperimentSpec, value: f64, key: StreamKey, report: &mut SweepReport) -> Result<()> {
    let cfg = point_config(spec, value);
    let scenario = build_scenario(&cfg)?;
    let (n, k, m, l) = (cfg.num_antennas, cfg.num_sensors, cfg.feature_dim, cfg.num_classes);
    let geometry = SeparationGeometry::new(&scenario);
    let (d_bar, _) = off_diagonal_moments(&geometry.pairwise(None));
    let omega = n as f64 / k as f64;

    for &pipeline in &spec.pipelines {
        if !pipeline.feasible(n, k) {
            report.rows.push(SweepRow::infeasible(value, pipeline));
            continue;
        }
        let records = run_trials(&scenario, pipeline, &ChannelMode::Redraw, cfg.mc_trials, key)?;
        let h = uncertainty_of(&records);
        let acc = accuracy_of(&records);
        let snrs: Vec<f64> = records.iter().map(|r| r.effective_snr).collect();
        let losses: Vec<f64> = snrs.iter().map(|&g| separation_loss(&geometry, d_bar, g, k)).collect();

        let (lower, upper) = bounds_over_trials(&geometry, &records, spec.bound_constant, k, m)?;
        let mut row = SweepRow {
            sweep_value: value,
            pipeline,
            mean_uncertainty: Some(h.mean),
            uncertainty_stderr: Some(h.std_err),
            accuracy: Some(acc.mean),
            accuracy_stderr: Some(acc.std_err),
            mean_effective_snr: Some(mean(snrs.iter().copied())),
            surrogate_lower: Some(lower),
            surrogate_upper: Some(upper),
            asymptotic_prediction: None,
            feasible: true,
        };
        row.asymptotic_prediction = Some(match spec.experiment {
            ExperimentKind::Bounds => {
                let kappa = 1.0 / (0.5 * m as f64 + 1.0);
                mean(records.iter().map(|r| {
                    surrogate_uncertainty_full(&geometry.pairwise_at_snr(r.effective_snr, k), kappa, k)
                }))
            }
            ExperimentKind::Crossing => crossing_probability(k, omega),
            ExperimentKind::Aloss => mean(losses.iter().copied()),
            _ => {
                let ep = nalgebra::DMatrix::identity(m, m) * (cfg.observation_rank as f64 / m as f64);
                let xi = xi_constant(&scenario, &ep)?;
                (l as f64 - 1.0) * (-0.5 * xi * mean(losses.iter().copied()) * k as f64).exp()
            }
        });
        if spec.experiment == ExperimentKind::Aloss {
            let b = expected_a_loss_lower_bound(loss_parameter(&scenario, omega))?;
            row.surrogate_lower = Some(b.logarithmic);
            row.surrogate_upper = Some(b.exponential_integral);
        }
        report.rows.push(row);
    }

    if spec.experiment == ExperimentKind::Crossing {
        if n >= k {
            let freq = crossing_frequency(&scenario, cfg.mc_trials, channel_only(key))?;
            report.summary.push(format!(
                "N={n} K={k} omega={} empirical Pr(gamma_air >= gamma_aoa)={} formula={}",
                format_sig9(omega),
                format_sig9(freq),
                format_sig9(crossing_probability(k, omega))
            ));
        } else {
            report.summary.push(format!("N={n} K={k} orthogonal access infeasible; AirComp always selected"));
        }
    }
    Ok(())
}

/// Key for channel-only draws at the same point, disjoint from trial streams.
fn channel_only(key: StreamKey) -> StreamKey {
    StreamKey {
        experiment_id: key.experiment_id | 1 << 32,
        ..key
    }
}

/// `D_bar(gamma) / D_bar`, zero when the channel carries no signal.
fn separation_loss(geometry: &SeparationGeometry, d_bar: f64, gamma: f64, k: usize) -> f64 {
    if d_bar <= 0.0 {
        return f64::NAN;
    }
    off_diagonal_moments(&geometry.pairwise_at_snr(gamma, k)).0 / d_bar
}

/// Bounds averaged over the per-trial effective SNRs.
fn bounds_over_trials(
    geometry: &SeparationGeometry,
    records: &[TrialRecord],
    c: f64,
    k: usize,
    m: usize,
) -> Result<(f64, f64)> {
    if records.iter().all(|r| r.effective_snr.is_infinite()) {
        return uncertainty_bounds(&geometry.pairwise(None), c, k, m);
    }
    let (mut lo, mut hi) = (0.0, 0.0);
    for r in records {
        let (a, b) = uncertainty_bounds(&geometry.pairwise_at_snr(r.effective_snr, k), c, k, m)?;
        lo += a;
        hi += b;
    }
    let n = records.len() as f64;
    Ok((lo / n, hi / n))
}

/// Fraction of channel draws in which AirComp's effective SNR is at least
/// the orthogonal one.
pub fn crossing_frequency(scenario: &Scenario, draws: usize, key: StreamKey) -> Result<f64> {
    let (n, k) = (scenario.num_antennas(), scenario.num_sensors());
    let wins: Vec<bool> = (0..draws as u64)
        .into_par_iter()
        .map(|t| {
            let ch = sample_channel(n, k, &mut key.stream(t))?;
            let air = aircomp_effective_snr(&ch, scenario).gamma_air;
            Ok(air >= orthogonal_effective_snr(&ch, scenario)?)
        })
        .collect::<Result<_>>()?;
    Ok(wins.iter().filter(|&&w| w).count() as f64 / draws as f64)
}

/// Outcome of a goodness-of-fit check against a reference distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct DistributionCheck {
    pub ks: f64,
    pub threshold: f64,
    pub pass: bool,
    pub sample_mean: f64,
    pub reference_mean: f64,
}

/// Default KS threshold for the alignment-gain check at `K` sensors.
pub fn zeta_ks_threshold(num_sensors: usize) -> f64 {
    if num_sensors >= 200 {
        0.02
    } else {
        0.03
    }
}

/// Samples of `zeta_air = K min_k |v^H h_k|^2` with `N = round(omega K)`.
pub fn zeta_air_samples(num_sensors: usize, omega: f64, draws: usize, key: StreamKey) -> Result<Vec<f64>> {
    let n = ((omega * num_sensors as f64).round() as usize).max(1);
    (0..draws as u64)
        .into_par_iter()
        .map(|t| {
            let ch = sample_channel(n, num_sensors, &mut key.stream(t))?;
            let min = ch.alignment_gains().into_iter().fold(f64::INFINITY, f64::min);
            Ok(num_sensors as f64 * min)
        })
        .collect()
}

/// KS check of the alignment gain against `Exp` with mean `(1 + sqrt(omega))^2`.
pub fn run_snr_distribution_check(
    num_sensors: usize,
    omega: f64,
    draws: usize,
    key: StreamKey,
) -> Result<DistributionCheck> {
    if draws < MIN_DISTRIBUTION_DRAWS {
        return Err(IseaError::invalid(format!("at least {MIN_DISTRIBUTION_DRAWS} draws required")));
    }
    let reference = zeta_air_reference_cdf(omega)?;
    let samples = zeta_air_samples(num_sensors, omega, draws, key)?;
    let ks = ks_statistic(&samples, |x| reference.cdf(x))?;
    let threshold = zeta_ks_threshold(num_sensors);
    Ok(DistributionCheck {
        ks,
        threshold,
        pass: ks < threshold,
        sample_mean: mean(samples.iter().copied()),
        reference_mean: reference.mean,
    })
}

/// Samples of `||b_k||^2`, sensor `t mod K` in draw `t`.
pub fn b_norm_samples(antennas: usize, sensors: usize, draws: usize, key: StreamKey) -> Result<Vec<f64>> {
    (0..draws as u64)
        .into_par_iter()
        .map(|t| {
            let ch = sample_channel(antennas, sensors, &mut key.stream(t))?;
            Ok(ch.zf_norms_sq()?[t as usize % sensors])
        })
        .collect()
}

/// KS check of zero-forcing beamformer norms against their reference law.
pub fn run_b_norm_distribution_check(
    antennas: usize,
    sensors: usize,
    draws: usize,
    key: StreamKey,
) -> Result<DistributionCheck> {
    if draws < MIN_DISTRIBUTION_DRAWS {
        return Err(IseaError::invalid(format!("at least {MIN_DISTRIBUTION_DRAWS} draws required")));
    }
    let reference = b_norm_reference_cdf(antennas, sensors)?;
    let samples = b_norm_samples(antennas, sensors, draws, key)?;
    let ks = ks_statistic(&samples, |x| reference.cdf(x))?;
    Ok(DistributionCheck {
        ks,
        threshold: 0.02,
        pass: ks < 0.02,
        sample_mean: mean(samples.iter().copied()),
        reference_mean: reference.mean(),
    })
}

fn distribution_row(value: f64, pipeline: Pipeline, check: &DistributionCheck) -> SweepRow {
    SweepRow {
        mean_effective_snr: Some(check.sample_mean),
        asymptotic_prediction: Some(check.reference_mean),
        ..SweepRow::empty(value, pipeline)
    }
}

fn summary_line(label: String, check: &DistributionCheck) -> String {
    format!(
        "{label} ks={} threshold={} {}",
        format_sig9(check.ks),
        format_sig9(check.threshold),
        if check.pass { "PASS" } else { "FAIL" }
    )
}

fn snr_dist_point(spec: &ExperimentSpec, value: f64, key: StreamKey, report: &mut SweepReport) -> Result<()> {
    let k = value as usize;
    let check = run_snr_distribution_check(k, spec.omega, spec.scenario.mc_trials, key)?;
    report.summary.push(summary_line(format!("K={k} omega={}", format_sig9(spec.omega)), &check));
    report.rows.push(distribution_row(value, Pipeline::AirComp, &check));
    Ok(())
}

fn bnorm_dist_point(spec: &ExperimentSpec, value: f64, key: StreamKey, report: &mut SweepReport) -> Result<()> {
    let (n, k) = (value as usize, spec.scenario.num_sensors);
    if n < k {
        report.rows.push(SweepRow::infeasible(value, Pipeline::Orthogonal));
        report.summary.push(format!("N={n} K={k} infeasible"));
        return Ok(());
    }
    let check = run_b_norm_distribution_check(n, k, spec.scenario.mc_trials, key)?;
    report.summary.push(summary_line(format!("N={n} K={k}"), &check));
    report.rows.push(distribution_row(value, Pipeline::Orthogonal, &check));
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(kind: ExperimentKind) -> ExperimentSpec {
        let cfg = ScenarioConfig {
            feature_dim: 3,
            num_classes: 3,
            num_sensors: 3,
            num_antennas: 4,
            mc_trials: 200,
            ..Default::default()
        };
        ExperimentSpec::new(kind, cfg, false)
    }

    #[test]
    fn kinds_round_trip() {
        for k in ExperimentKind::ALL {
            assert_eq!(ExperimentKind::parse(k.as_str()).unwrap(), k);
        }
        assert!(matches!(ExperimentKind::parse("sweep-x"), Err(IseaError::Config(_))));
    }

    #[test]
    fn spec_validation() {
        let mut s = small(ExperimentKind::SweepK);
        s.validate().unwrap();
        s.sweep_values = vec![];
        assert!(s.validate().is_err());
        s.sweep_values = vec![2.0, 2.0];
        assert!(s.validate().is_err());
        s.sweep_values = vec![1.5];
        assert!(s.validate().is_err());
        s.sweep_values = vec![1.0];
        s.pipelines.clear();
        assert!(s.validate().is_err());
        let mut a = small(ExperimentKind::Aloss);
        a.sweep_values = vec![-3.5, 0.0];
        a.validate().unwrap();
    }

    #[test]
    fn one_row_per_point_and_pipeline() {
        let mut s = small(ExperimentKind::SweepN);
        s.sweep_values = vec![2.0, 3.0, 4.0];
        let r = run_experiment(&s).unwrap();
        assert_eq!(r.rows.len(), 9);
        for row in &r.rows {
            let infeasible = row.pipeline == Pipeline::Orthogonal && row.sweep_value < 3.0;
            assert_eq!(row.feasible, !infeasible);
            assert_eq!(row.mean_uncertainty.is_none(), infeasible);
            if let Some(se) = row.uncertainty_stderr {
                assert!(se >= 0.0);
            }
        }
    }

    #[test]
    fn distributions_need_enough_draws() {
        assert!(run_snr_distribution_check(5, 1.0, 999, StreamKey::new(0, 0, 0)).is_err());
        assert!(run_b_norm_distribution_check(6, 5, 999, StreamKey::new(0, 0, 0)).is_err());
    }

    #[test]
    fn bnorm_infeasible_point_flagged() {
        let mut s = small(ExperimentKind::BnormDist);
        s.sweep_values = vec![2.0, 5.0];
        s.scenario.mc_trials = 1000;
        let r = run_experiment(&s).unwrap();
        assert!(!r.rows[0].feasible);
        assert!(r.rows[1].feasible);
        assert!((r.rows[1].asymptotic_prediction.unwrap() - 1.0 / 2.0).abs() < 1e-15);
    }
}
