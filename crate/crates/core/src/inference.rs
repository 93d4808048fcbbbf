//! Discrimination gains, the maximum-likelihood classifier and Monte Carlo
//! estimators of sensing uncertainty and accuracy.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rayon::prelude::*;

use crate::channel::{
    adaptive_receive, aircomp_receive, noiseless_receive, orthogonal_receive, sample_channel, AccessMode,
    AggregationOutcome, ChannelRealization,
};
use crate::error::{IseaError, Result};
use crate::feature_model::sample_features;
use crate::rng::StreamKey;
use crate::scenario::Scenario;

/// Largest admissible condition number of the effective covariance.
pub const MAX_CONDITION_NUMBER: f64 = 1e12;

/// Minimum number of trials accepted by the estimators.
pub const MIN_TRIALS: usize = 100;

/// `(mu_l - mu_l')^T P_k C^{-1} P_k (mu_l - mu_l')`, the symmetric KL
/// divergence between two class-conditional local feature distributions.
pub fn local_discrimination_gain(scenario: &Scenario, sensor: usize, l: usize, l2: usize) -> f64 {
    let p = &scenario.observations()[sensor];
    let d = p * (&scenario.centroids()[l] - &scenario.centroids()[l2]);
    (d.transpose() * scenario.covariance_inv() * &d)[(0, 0)]
}

/// Average class separation `D_{l,l'}` seen through the global observation
/// matrix. With `snr = Some(gamma)` the middle factor is `(C + (K/gamma) I)^{-1}`
/// instead of `C^{-1}`. The global gain is `K` times this value.
///
/// Evaluated by a direct linear solve; [`crate::theory::SeparationGeometry`]
/// computes the same quantity in the eigenbasis of `C`.
pub fn pairwise_separation(scenario: &Scenario, l: usize, l2: usize, snr: Option<f64>) -> Result<f64> {
    let d = scenario.global_observation() * (&scenario.centroids()[l] - &scenario.centroids()[l2]);
    let middle = match snr {
        None => return Ok((d.transpose() * scenario.covariance_inv() * &d)[(0, 0)]),
        Some(g) if g > 0.0 => {
            let m = scenario.feature_dim();
            let k = scenario.num_sensors() as f64;
            scenario.covariance() + DMatrix::identity(m, m) * (k / g)
        }
        Some(_) => return Err(IseaError::invalid("snr must be positive")),
    };
    let solved = middle
        .cholesky()
        .ok_or_else(|| IseaError::numerical("C + (K/gamma) I is not positive definite"))?
        .solve(&d);
    Ok(d.dot(&solved))
}

/// Class geometry shared by every classifier built for one scenario.
#[derive(Debug)]
struct ClassifierBasis {
    num_sensors: f64,
    /// Eigenvectors of `C` as columns.
    basis: DMatrix<f64>,
    eigenvalues: DVector<f64>,
    projected_centroids: Vec<DVector<f64>>,
    /// `U^T P_bar mu_l`.
    rotated_centroids: Vec<DVector<f64>>,
}

/// Gaussian-mixture ML classifier for one effective noise level.
///
/// The effective covariance is `C/K + s I` with `s = 1/snr` (zero for
/// noiseless aggregation). It is handled through the eigendecomposition
/// `C = U diag(lambda) U^T`, so changing `s` costs `O(M)`.
#[derive(Debug, Clone)]
pub struct ClassifierModel {
    shared: Arc<ClassifierBasis>,
    noise_power: f64,
    /// `1 / (lambda_i / K + s)`.
    weights: DVector<f64>,
}

impl ClassifierModel {
    /// Classifier for noiseless aggregation.
    pub fn noiseless(scenario: &Scenario) -> Result<Self> {
        Self::new(scenario, 0.0)
    }

    /// Classifier for aggregated features carrying channel noise of power
    /// `noise_power` per dimension.
    pub fn new(scenario: &Scenario, noise_power: f64) -> Result<Self> {
        let basis = scenario.covariance_basis().clone();
        let rotated_centroids = scenario
            .projected_centroids()
            .iter()
            .map(|c| basis.tr_mul(c))
            .collect();
        let shared = Arc::new(ClassifierBasis {
            num_sensors: scenario.num_sensors() as f64,
            basis,
            eigenvalues: scenario.covariance_eigenvalues().clone(),
            projected_centroids: scenario.projected_centroids().to_vec(),
            rotated_centroids,
        });
        Self::from_shared(shared, noise_power)
    }

    fn from_shared(shared: Arc<ClassifierBasis>, noise_power: f64) -> Result<Self> {
        if !(noise_power >= 0.0) {
            return Err(IseaError::invalid("noise power must be non-negative"));
        }
        let spectrum = shared.eigenvalues.map(|l| l / shared.num_sensors + noise_power);
        let weights = if noise_power.is_infinite() {
            DVector::zeros(spectrum.len())
        } else {
            let (lo, hi) = (spectrum.min(), spectrum.max());
            if !(lo > 0.0) || hi / lo > MAX_CONDITION_NUMBER {
                return Err(IseaError::numerical(format!(
                    "effective covariance condition number {:e} exceeds {MAX_CONDITION_NUMBER:e}",
                    hi / lo
                )));
            }
            spectrum.map(f64::recip)
        };
        Ok(Self {
            shared,
            noise_power,
            weights,
        })
    }

    /// Same class geometry, different channel noise power.
    pub fn with_noise_power(&self, noise_power: f64) -> Result<Self> {
        Self::from_shared(Arc::clone(&self.shared), noise_power)
    }

    pub fn noise_power(&self) -> f64 {
        self.noise_power
    }

    pub fn num_classes(&self) -> usize {
        self.shared.projected_centroids.len()
    }

    /// Class means `P_bar mu_l` at the classifier input.
    pub fn projected_centroids(&self) -> &[DVector<f64>] {
        &self.shared.projected_centroids
    }

    /// `C/K + s I`.
    pub fn effective_cov(&self) -> DMatrix<f64> {
        let spectrum = self
            .shared
            .eigenvalues
            .map(|l| l / self.shared.num_sensors + self.noise_power);
        let u = &self.shared.basis;
        u * DMatrix::from_diagonal(&spectrum) * u.transpose()
    }

    pub fn effective_cov_inv(&self) -> DMatrix<f64> {
        let u = &self.shared.basis;
        u * DMatrix::from_diagonal(&self.weights) * u.transpose()
    }

    /// Mahalanobis distances of `f_tilde` to every class mean.
    pub fn mahalanobis(&self, f_tilde: &DVector<f64>) -> Vec<f64> {
        let y = self.shared.basis.tr_mul(f_tilde);
        self.shared
            .rotated_centroids
            .iter()
            .map(|c| {
                y.iter()
                    .zip(c.iter())
                    .zip(self.weights.iter())
                    .map(|((a, b), w)| w * (a - b) * (a - b))
                    .sum()
            })
            .collect()
    }

    /// Per-class log-likelihoods up to a shared constant.
    pub fn log_likelihoods(&self, f_tilde: &DVector<f64>) -> Vec<f64> {
        self.mahalanobis(f_tilde).into_iter().map(|d| -0.5 * d).collect()
    }
}

/// Index of the smallest value, lowest index on ties.
fn argmin(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v < values[best] {
            best = i;
        }
    }
    best
}

/// Maximum-likelihood label under the model's effective covariance.
pub fn ml_classify(model: &ClassifierModel, f_tilde: &DVector<f64>) -> usize {
    argmin(&model.mahalanobis(f_tilde))
}

/// Softmax of log-likelihoods, shifted by their maximum.
pub fn softmax(log_likelihoods: &[f64]) -> Vec<f64> {
    let max = log_likelihoods.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = log_likelihoods.iter().map(|&l| (l - max).exp()).collect();
    let z: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / z).collect()
}

/// Class posteriors under uniform priors.
pub fn posterior_probabilities(model: &ClassifierModel, f_tilde: &DVector<f64>) -> Vec<f64> {
    softmax(&model.log_likelihoods(f_tilde))
}

/// Natural-log Shannon entropy, clamped to `[0, ln L]`.
pub fn entropy(probabilities: &[f64]) -> f64 {
    let h: f64 = probabilities
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| -p * p.ln())
        .sum();
    h.clamp(0.0, (probabilities.len() as f64).ln())
}

/// Access scheme between the sensors and the classifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Pipeline {
    Noiseless,
    AirComp,
    Orthogonal,
    Adaptive,
}

impl Pipeline {
    pub const ALL: [Pipeline; 4] = [
        Pipeline::Noiseless,
        Pipeline::AirComp,
        Pipeline::Orthogonal,
        Pipeline::Adaptive,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Pipeline::Noiseless => "noiseless",
            Pipeline::AirComp => "aircomp",
            Pipeline::Orthogonal => "orthogonal",
            Pipeline::Adaptive => "adaptive",
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        Pipeline::ALL
            .into_iter()
            .find(|p| p.as_str() == name)
            .ok_or_else(|| IseaError::config(format!("unknown pipeline `{name}`")))
    }

    pub fn uses_channel(&self) -> bool {
        !matches!(self, Pipeline::Noiseless)
    }

    /// Whether the pipeline can run with this array size.
    pub fn feasible(&self, antennas: usize, sensors: usize) -> bool {
        !matches!(self, Pipeline::Orthogonal) || antennas >= sensors
    }

    pub fn receive<R: Rng + ?Sized>(
        &self,
        scenario: &Scenario,
        channel: Option<&ChannelRealization>,
        local_features: &[DVector<f64>],
        rng: &mut R,
    ) -> Result<AggregationOutcome> {
        let need = || IseaError::invalid(format!("pipeline `{}` needs a channel", self.as_str()));
        match self {
            Pipeline::Noiseless => noiseless_receive(local_features),
            Pipeline::AirComp => aircomp_receive(scenario, channel.ok_or_else(need)?, local_features, rng),
            Pipeline::Orthogonal => orthogonal_receive(scenario, channel.ok_or_else(need)?, local_features, rng),
            Pipeline::Adaptive => adaptive_receive(scenario, channel.ok_or_else(need)?, local_features, rng),
        }
    }
}

/// Whether every trial sees a fresh channel or one fixed realization.
#[derive(Debug, Clone, Default)]
pub enum ChannelMode {
    #[default]
    Redraw,
    Fixed(ChannelRealization),
}

/// Outcome of one Monte Carlo trial.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub label: usize,
    pub predicted: usize,
    pub posterior: Vec<f64>,
    pub entropy: f64,
    pub effective_snr: f64,
    pub mode: AccessMode,
    pub degenerate: bool,
}

impl TrialRecord {
    pub fn correct(&self) -> bool {
        self.label == self.predicted
    }
}

/// Runs one trial: label, local features, channel (if any), aggregation,
/// classification. The random numbers are consumed in that order, so all
/// pipelines fed the same stream share label, features and channel.
pub fn run_trial<R: Rng + ?Sized>(
    scenario: &Scenario,
    model: &ClassifierModel,
    pipeline: Pipeline,
    channel_mode: &ChannelMode,
    rng: &mut R,
) -> Result<TrialRecord> {
    let sample = sample_features(scenario, rng);
    let drawn;
    let channel = match (pipeline.uses_channel(), channel_mode) {
        (false, _) => None,
        (true, ChannelMode::Fixed(ch)) => Some(ch),
        (true, ChannelMode::Redraw) => {
            drawn = sample_channel(scenario.num_antennas(), scenario.num_sensors(), rng)?;
            Some(&drawn)
        }
    };
    let out = pipeline.receive(scenario, channel, &sample.local_features, rng)?;
    let model = if out.noise_power_per_dim == model.noise_power() {
        model.clone()
    } else {
        model.with_noise_power(out.noise_power_per_dim)?
    };
    let distances = model.mahalanobis(&out.f_tilde);
    let posterior = softmax(&distances.iter().map(|d| -0.5 * d).collect::<Vec<_>>());
    Ok(TrialRecord {
        label: sample.label,
        predicted: argmin(&distances),
        entropy: entropy(&posterior),
        posterior,
        effective_snr: out.effective_snr,
        mode: out.mode,
        degenerate: out.degenerate,
    })
}

/// Runs `trials` trials in parallel on the current rayon pool. Trial `i`
/// uses `key.stream(i)`; records come back in trial order.
pub fn run_trials(
    scenario: &Scenario,
    pipeline: Pipeline,
    channel_mode: &ChannelMode,
    trials: usize,
    key: StreamKey,
) -> Result<Vec<TrialRecord>> {
    if pipeline.uses_channel() && !pipeline.feasible(scenario.num_antennas(), scenario.num_sensors()) {
        return Err(IseaError::Infeasible {
            antennas: scenario.num_antennas(),
            sensors: scenario.num_sensors(),
        });
    }
    let model = ClassifierModel::noiseless(scenario)?;
    (0..trials as u64)
        .into_par_iter()
        .map(|t| {
            let mut rng = key.stream(t);
            run_trial(scenario, &model, pipeline, channel_mode, &mut rng)
        })
        .collect()
}

/// Sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    pub std_err: f64,
}

impl Estimate {
    /// Summarizes values in the given order, so equal inputs give
    /// bit-identical output.
    pub fn from_samples(values: impl IntoIterator<Item = f64>) -> Self {
        let values: Vec<f64> = values.into_iter().collect();
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = if values.len() > 1 {
            values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        Self {
            mean,
            std_err: (var / n).sqrt(),
        }
    }
}

pub fn uncertainty_of(records: &[TrialRecord]) -> Estimate {
    Estimate::from_samples(records.iter().map(|r| r.entropy))
}

pub fn accuracy_of(records: &[TrialRecord]) -> Estimate {
    Estimate::from_samples(records.iter().map(|r| if r.correct() { 1.0 } else { 0.0 }))
}

fn check_trials(trials: usize) -> Result<()> {
    if trials < MIN_TRIALS {
        return Err(IseaError::invalid(format!("at least {MIN_TRIALS} trials required, got {trials}")));
    }
    Ok(())
}

/// Monte Carlo sensing uncertainty (mean posterior entropy, nats).
pub fn estimate_uncertainty(
    scenario: &Scenario,
    pipeline: Pipeline,
    channel_mode: &ChannelMode,
    trials: usize,
    key: StreamKey,
) -> Result<Estimate> {
    check_trials(trials)?;
    Ok(uncertainty_of(&run_trials(scenario, pipeline, channel_mode, trials, key)?))
}

/// Monte Carlo probability of correct classification.
pub fn estimate_accuracy(
    scenario: &Scenario,
    pipeline: Pipeline,
    channel_mode: &ChannelMode,
    trials: usize,
    key: StreamKey,
) -> Result<Estimate> {
    check_trials(trials)?;
    Ok(accuracy_of(&run_trials(scenario, pipeline, channel_mode, trials, key)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{build_scenario, ScenarioBuilder, ScenarioConfig};
    use proptest::prelude::*;

    fn cfg(m: usize, l: usize, k: usize, r: usize) -> ScenarioConfig {
        ScenarioConfig {
            feature_dim: m,
            num_classes: l,
            num_sensors: k,
            observation_rank: r,
            ..Default::default()
        }
    }

    fn two_class_line(c: f64, k: usize) -> Scenario {
        ScenarioBuilder::new(ScenarioConfig {
            sensing_covariance_scale: c,
            num_antennas: 1,
            ..cfg(1, 2, k, 1)
        })
        .centroids(vec![DVector::from_element(1, 1.0), DVector::from_element(1, -1.0)])
        .build()
        .unwrap()
    }

    #[test]
    fn local_gain_cases() {
        let s = ScenarioBuilder::new(cfg(2, 2, 1, 2))
            .centroids(vec![DVector::from_vec(vec![1.0, 0.0]), DVector::from_vec(vec![0.0, 0.0])])
            .build()
            .unwrap();
        assert!((local_discrimination_gain(&s, 0, 0, 1) - 10.0).abs() < 1e-12);
        assert_eq!(local_discrimination_gain(&s, 0, 1, 1), 0.0);

        let s = build_scenario(&cfg(6, 4, 3, 2)).unwrap();
        for k in 0..3 {
            for (a, b) in [(0, 1), (1, 3), (2, 0)] {
                let (x, y) = (local_discrimination_gain(&s, k, a, b), local_discrimination_gain(&s, k, b, a));
                assert!((x - y).abs() < 1e-12 * x.max(1.0));
            }
        }
    }

    #[test]
    fn local_gain_matches_symmetric_kl_quadrature() {
        // Symmetric KL of N(1, 0.1) and N(0, 0.1), one coordinate at a time.
        let var = 0.1f64;
        let pdf = |x: f64, m: f64| (-(x - m).powi(2) / (2.0 * var)).exp() / (2.0 * std::f64::consts::PI * var).sqrt();
        let (a, b, n) = (-4.0, 5.0, 200_000);
        let h = (b - a) / n as f64;
        let mut kl = 0.0;
        for i in 0..=n {
            let x = a + i as f64 * h;
            let (p, q) = (pdf(x, 1.0), pdf(x, 0.0));
            let w = if i == 0 || i == n { 0.5 } else { 1.0 };
            kl += w * h * (p - q) * (p / q).ln();
        }
        assert!((kl - 10.0).abs() < 1e-6, "{kl}");
    }

    #[test]
    fn noisy_separation_limits() {
        let s = build_scenario(&cfg(5, 4, 6, 2)).unwrap();
        for (a, b) in [(0, 1), (2, 3), (1, 3)] {
            let d = pairwise_separation(&s, a, b, None).unwrap();
            let far = pairwise_separation(&s, a, b, Some(1e12)).unwrap();
            assert!(((d - far) / d).abs() < 1e-6);
            for g in [0.1, 1.0, 10.0, 100.0] {
                assert!(pairwise_separation(&s, a, b, Some(g)).unwrap() < d);
            }
        }
        assert!(pairwise_separation(&s, 0, 1, Some(0.0)).is_err());
    }

    #[test]
    fn classify_at_centroid() {
        let s = build_scenario(&cfg(5, 5, 4, 2)).unwrap();
        let model = ClassifierModel::noiseless(&s).unwrap();
        for (l, c) in s.projected_centroids().iter().enumerate() {
            assert_eq!(ml_classify(&model, c), l);
        }
    }

    #[test]
    fn classify_nearest_on_line() {
        let s = two_class_line(0.3, 1);
        let model = ClassifierModel::noiseless(&s).unwrap();
        assert_eq!(ml_classify(&model, &DVector::from_element(1, 0.2)), 0);
        assert_eq!(ml_classify(&model, &DVector::from_element(1, -0.2)), 1);
    }

    #[test]
    fn two_gaussian_logistic_posterior() {
        let (c, k) = (0.25, 1);
        let s = two_class_line(c, k);
        let model = ClassifierModel::noiseless(&s).unwrap();
        for i in -40..=40 {
            let x = i as f64 * 0.05;
            let p = posterior_probabilities(&model, &DVector::from_element(1, x));
            let exact = 1.0 / (1.0 + (-2.0 * x / c).exp());
            assert!((p[0] - exact).abs() < 1e-10, "x={x}");
        }
    }

    #[test]
    fn equidistant_input_is_uniform() {
        let s = two_class_line(0.1, 1);
        let model = ClassifierModel::noiseless(&s).unwrap();
        let p = posterior_probabilities(&model, &DVector::from_element(1, 0.0));
        assert_eq!(p, vec![0.5, 0.5]);
        assert!((entropy(&p) - 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn posterior_survives_extreme_spread() {
        let s = build_scenario(&ScenarioConfig {
            sensing_covariance_scale: 1e-3,
            ..cfg(4, 6, 2, 2)
        })
        .unwrap();
        let model = ClassifierModel::noiseless(&s).unwrap();
        let far = DVector::from_element(4, 1e3);
        let ll = model.log_likelihoods(&far);
        let spread = ll.iter().cloned().fold(f64::MIN, f64::max) - ll.iter().cloned().fold(f64::MAX, f64::min);
        assert!(spread > 1e4);
        let p = posterior_probabilities(&model, &far);
        assert!(p.iter().all(|&x| (0.0..=1.0).contains(&x)));
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn effective_covariance_inverse() {
        let s = build_scenario(&ScenarioConfig {
            sensing_covariance: Some(vec![0.5, 0.1, 0.0, 0.1, 0.3, 0.05, 0.0, 0.05, 0.2]),
            ..cfg(3, 3, 4, 2)
        })
        .unwrap();
        let model = ClassifierModel::new(&s, 0.07).unwrap();
        let expected = s.covariance() / 4.0 + DMatrix::identity(3, 3) * 0.07;
        assert!((model.effective_cov() - &expected).amax() < 1e-12);
        assert!((model.effective_cov_inv() * expected - DMatrix::identity(3, 3)).amax() < 1e-8);
    }

    #[test]
    fn ill_conditioned_covariance_reported() {
        let c = ScenarioConfig {
            sensing_covariance: Some(vec![1.0, 1e-13]),
            ..cfg(2, 2, 1, 1)
        };
        let s = build_scenario(&c).unwrap();
        assert!(matches!(ClassifierModel::noiseless(&s), Err(IseaError::Numerical(_))));
    }

    #[test]
    fn classifier_agrees_with_posterior_argmax() {
        let s = build_scenario(&cfg(5, 7, 3, 2)).unwrap();
        let model = ClassifierModel::new(&s, 0.02).unwrap();
        let mut rng = StreamKey::new(3, 0, 0).stream(0);
        for _ in 0..10_000 {
            let x = DVector::from_fn(5, |_, _| rand::Rng::random_range(&mut rng, -3.0..3.0));
            let p = posterior_probabilities(&model, &x);
            let best = (0..p.len()).fold(0, |b, i| if p[i] > p[b] { i } else { b });
            assert_eq!(ml_classify(&model, &x), best);
        }
    }

    #[test]
    fn identical_centroids_give_maximal_entropy_and_chance_accuracy() {
        let mu = DVector::from_vec(vec![0.3, -0.1, 2.0]);
        let s = ScenarioBuilder::new(cfg(3, 4, 2, 2))
            .centroids(vec![mu.clone(); 4])
            .build()
            .unwrap();
        let key = StreamKey::new(1, 0, 0);
        let recs = run_trials(&s, Pipeline::Noiseless, &ChannelMode::Redraw, 4000, key).unwrap();
        assert!(recs.iter().all(|r| (r.entropy - 4f64.ln()).abs() < 1e-12));
        let acc = accuracy_of(&recs);
        assert!((acc.mean - 0.25).abs() < 3.0 * acc.std_err);
    }

    #[test]
    fn separable_clusters_are_always_recovered() {
        let s = build_scenario(&ScenarioConfig {
            sensing_covariance_scale: 1e-6,
            transmit_snr_db: f64::INFINITY,
            num_antennas: 4,
            ..cfg(4, 5, 3, 4)
        })
        .unwrap();
        for p in Pipeline::ALL {
            let acc = estimate_accuracy(&s, p, &ChannelMode::Redraw, 500, StreamKey::new(2, 0, 0)).unwrap();
            assert_eq!(acc.mean, 1.0, "{}", p.as_str());
        }
    }

    #[test]
    fn estimators_reject_few_trials() {
        let s = build_scenario(&cfg(3, 2, 2, 1)).unwrap();
        assert!(estimate_uncertainty(&s, Pipeline::Noiseless, &ChannelMode::Redraw, 99, StreamKey::new(0, 0, 0)).is_err());
    }

    #[test]
    fn infeasible_orthogonal_rejected() {
        let s = build_scenario(&ScenarioConfig {
            num_antennas: 2,
            ..cfg(3, 2, 4, 1)
        })
        .unwrap();
        let r = run_trials(&s, Pipeline::Orthogonal, &ChannelMode::Redraw, 200, StreamKey::new(0, 0, 0));
        assert!(matches!(r, Err(IseaError::Infeasible { .. })));
    }

    #[test]
    fn records_independent_of_pool_size() {
        let s = build_scenario(&cfg(4, 3, 3, 2)).unwrap();
        let key = StreamKey::new(9, 1, 2);
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| run_trials(&s, Pipeline::Adaptive, &ChannelMode::Redraw, 300, key).unwrap())
        };
        assert_eq!(run(1), run(4));
    }

    proptest! {
        #[test]
        fn posterior_normalized_and_entropy_bounded(
            xs in prop::collection::vec(-50.0f64..50.0, 4),
            noise in 0.0f64..10.0,
        ) {
            let s = build_scenario(&cfg(4, 5, 3, 2)).unwrap();
            let model = ClassifierModel::new(&s, noise).unwrap();
            let x = DVector::from_column_slice(&xs);
            let p = posterior_probabilities(&model, &x);
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            let h = entropy(&p);
            prop_assert!((0.0..=5f64.ln()).contains(&h));
            let best = (0..p.len()).fold(0, |b, i| if p[i] > p[b] { i } else { b });
            prop_assert_eq!(ml_classify(&model, &x), best);
        }
    }
}
