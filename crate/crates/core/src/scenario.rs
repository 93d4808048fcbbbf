//! Problem instances: classes, sensing covariance, per-sensor observation
//! subspaces and the power/noise normalization shared by every pipeline.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{IseaError, Result};
use crate::rng::{StreamKey, AUXILIARY_STREAM, CENTROID_STREAM, OBSERVATION_STREAM};

/// Parameters of a problem instance.
///
/// The text form is a flat `key = value` file whose keys are exactly the
/// field names below; `#` starts a comment. Missing keys keep their
/// defaults. The optional `sensing_covariance` key accepts either `M`
/// numbers (a diagonal covariance) or `M*M` numbers (row-major, full), and
/// overrides `sensing_covariance_scale`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub feature_dim: usize,
    pub num_classes: usize,
    pub num_sensors: usize,
    pub num_antennas: usize,
    pub observation_rank: usize,
    pub sensing_covariance_scale: f64,
    pub centroid_scale: f64,
    pub transmit_snr_db: f64,
    pub master_seed: u64,
    pub mc_trials: usize,
    pub sensing_covariance: Option<Vec<f64>>,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            feature_dim: 5,
            num_classes: 5,
            num_sensors: 10,
            num_antennas: 12,
            observation_rank: 1,
            sensing_covariance_scale: 0.1,
            centroid_scale: 1.0,
            transmit_snr_db: 10.0,
            master_seed: 0,
            mc_trials: 10_000,
            sensing_covariance: None,
        }
    }
}

const CONFIG_KEYS: [&str; 11] = [
    "feature_dim",
    "num_classes",
    "num_sensors",
    "num_antennas",
    "observation_rank",
    "sensing_covariance_scale",
    "centroid_scale",
    "transmit_snr_db",
    "master_seed",
    "mc_trials",
    "sensing_covariance",
];

fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| IseaError::config(format!("cannot parse value `{value}` for key `{key}`")))
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        let m = self.feature_dim;
        if m == 0 {
            return Err(IseaError::config("feature_dim must be positive"));
        }
        if self.num_classes < 2 {
            return Err(IseaError::config("num_classes must be at least 2"));
        }
        if self.num_sensors == 0 {
            return Err(IseaError::config("num_sensors must be positive"));
        }
        if self.num_antennas == 0 {
            return Err(IseaError::config("num_antennas must be positive"));
        }
        if self.observation_rank == 0 || self.observation_rank > m {
            return Err(IseaError::config(format!(
                "observation_rank must lie in [1, {m}], got {}",
                self.observation_rank
            )));
        }
        if !(self.sensing_covariance_scale > 0.0 && self.sensing_covariance_scale.is_finite()) {
            return Err(IseaError::config("sensing_covariance_scale must be positive"));
        }
        if !(self.centroid_scale > 0.0 && self.centroid_scale.is_finite()) {
            return Err(IseaError::config("centroid_scale must be positive"));
        }
        if self.transmit_snr_db.is_nan() {
            return Err(IseaError::config("transmit_snr_db is NaN"));
        }
        if self.mc_trials == 0 {
            return Err(IseaError::config("mc_trials must be at least 1"));
        }
        if let Some(values) = &self.sensing_covariance {
            if values.len() != m && values.len() != m * m {
                return Err(IseaError::config(format!(
                    "sensing_covariance needs {m} or {} entries, got {}",
                    m * m,
                    values.len()
                )));
            }
        }
        Ok(())
    }

    /// Parses the `key = value` text form and validates the result.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = ScenarioConfig::default();
        let mut seen = HashSet::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                IseaError::config(format!("line {}: expected `key = value`", lineno + 1))
            })?;
            let (key, value) = (key.trim(), value.trim());
            if !CONFIG_KEYS.contains(&key) {
                return Err(IseaError::config(format!("line {}: unknown key `{key}`", lineno + 1)));
            }
            if !seen.insert(key.to_string()) {
                return Err(IseaError::config(format!("line {}: duplicate key `{key}`", lineno + 1)));
            }
            match key {
                "feature_dim" => cfg.feature_dim = parse_value(key, value)?,
                "num_classes" => cfg.num_classes = parse_value(key, value)?,
                "num_sensors" => cfg.num_sensors = parse_value(key, value)?,
                "num_antennas" => cfg.num_antennas = parse_value(key, value)?,
                "observation_rank" => cfg.observation_rank = parse_value(key, value)?,
                "sensing_covariance_scale" => cfg.sensing_covariance_scale = parse_value(key, value)?,
                "centroid_scale" => cfg.centroid_scale = parse_value(key, value)?,
                "transmit_snr_db" => cfg.transmit_snr_db = parse_value(key, value)?,
                "master_seed" => cfg.master_seed = parse_value(key, value)?,
                "mc_trials" => cfg.mc_trials = parse_value(key, value)?,
                "sensing_covariance" => {
                    let entries = value
                        .split(|c: char| c == ',' || c.is_whitespace())
                        .filter(|s| !s.is_empty())
                        .map(|s| parse_value::<f64>(key, s))
                        .collect::<Result<Vec<_>>>()?;
                    cfg.sensing_covariance = Some(entries);
                }
                _ => unreachable!(),
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| IseaError::config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Renders the config back into its text form.
    pub fn to_kv_string(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "feature_dim = {}", self.feature_dim);
        let _ = writeln!(out, "num_classes = {}", self.num_classes);
        let _ = writeln!(out, "num_sensors = {}", self.num_sensors);
        let _ = writeln!(out, "num_antennas = {}", self.num_antennas);
        let _ = writeln!(out, "observation_rank = {}", self.observation_rank);
        let _ = writeln!(out, "sensing_covariance_scale = {}", self.sensing_covariance_scale);
        let _ = writeln!(out, "centroid_scale = {}", self.centroid_scale);
        let _ = writeln!(out, "transmit_snr_db = {}", self.transmit_snr_db);
        let _ = writeln!(out, "master_seed = {}", self.master_seed);
        let _ = writeln!(out, "mc_trials = {}", self.mc_trials);
        if let Some(values) = &self.sensing_covariance {
            let joined: Vec<String> = values.iter().map(|v| v.to_string()).collect();
            let _ = writeln!(out, "sensing_covariance = {}", joined.join(", "));
        }
        out
    }

    /// Linear transmit SNR `P / sigma^2` with `P = 1`.
    pub fn transmit_snr(&self) -> f64 {
        10f64.powf(self.transmit_snr_db / 10.0)
    }

    fn covariance_matrix(&self) -> DMatrix<f64> {
        let m = self.feature_dim;
        match &self.sensing_covariance {
            Some(values) if values.len() == m => DMatrix::from_diagonal(&DVector::from_column_slice(values)),
            Some(values) => DMatrix::from_row_slice(m, m, values),
            None => DMatrix::identity(m, m) * self.sensing_covariance_scale,
        }
    }
}

/// Random rank-`rank` orthogonal projection of dimension `dim`.
///
/// The subspace is spanned by the top `rank` left singular vectors of a
/// `dim x dim` matrix with i.i.d. standard normal entries, so it is
/// uniformly distributed over the Grassmannian.
pub fn generate_observation_matrix<R: Rng + ?Sized>(
    dim: usize,
    rank: usize,
    rng: &mut R,
) -> Result<DMatrix<f64>> {
    if rank == 0 || rank > dim {
        return Err(IseaError::invalid(format!(
            "observation rank {rank} outside [1, {dim}]"
        )));
    }
    if rank == dim {
        return Ok(DMatrix::identity(dim, dim));
    }
    let g = DMatrix::<f64>::from_fn(dim, dim, |_, _| rng.sample(StandardNormal));
    let svd = g.svd(true, false);
    let u = svd
        .u
        .ok_or_else(|| IseaError::numerical("SVD did not return left singular vectors"))?;
    let basis = u.columns(0, rank);
    let p = basis * basis.transpose();
    Ok((&p + p.transpose()) * 0.5)
}

/// `num_classes` centroids with i.i.d. `N(0, scale^2)` entries.
pub fn generate_centroids<R: Rng + ?Sized>(
    dim: usize,
    num_classes: usize,
    scale: f64,
    rng: &mut R,
) -> Result<Vec<DVector<f64>>> {
    if num_classes < 2 {
        return Err(IseaError::invalid("at least two classes are required"));
    }
    Ok((0..num_classes)
        .map(|_| DVector::from_fn(dim, |_, _| scale * rng.sample::<f64, _>(StandardNormal)))
        .collect())
}

/// How the sensing noise `w ~ N(0, C)` is drawn.
#[derive(Debug, Clone)]
pub(crate) enum SensingNoise {
    /// `C = s^2 I`; holds `s`.
    Isotropic(f64),
    /// Lower Cholesky factor of `C`.
    Factor(DMatrix<f64>),
}

/// An immutable, fully derived problem instance.
#[derive(Debug, Clone)]
pub struct Scenario {
    config: ScenarioConfig,
    centroids: Vec<DVector<f64>>,
    covariance: DMatrix<f64>,
    covariance_inv: DMatrix<f64>,
    covariance_eigenvalues: DVector<f64>,
    covariance_basis: DMatrix<f64>,
    pub(crate) sensing_noise: SensingNoise,
    observations: Vec<DMatrix<f64>>,
    global_observation: DMatrix<f64>,
    /// `local_means[k][l] = P_k mu_l`.
    pub(crate) local_means: Vec<Vec<DVector<f64>>>,
    /// `P_bar mu_l`.
    projected_centroids: Vec<DVector<f64>>,
    /// `E[f_k] = P_k * mean(mu)` under the uniform prior.
    pub(crate) mean_local_features: Vec<DVector<f64>>,
    nu_sq: f64,
    sigma_sq: f64,
}

/// Optional overrides applied on top of a [`ScenarioConfig`].
#[derive(Debug, Clone, Default)]
pub struct ScenarioBuilder {
    config: ScenarioConfig,
    centroids: Option<Vec<DVector<f64>>>,
    covariance: Option<DMatrix<f64>>,
    observations: Option<Vec<DMatrix<f64>>>,
}

impl ScenarioBuilder {
    pub fn new(config: ScenarioConfig) -> Self {
        Self {
            config,
            ..Default::default()
        }
    }

    pub fn centroids(mut self, centroids: Vec<DVector<f64>>) -> Self {
        self.centroids = Some(centroids);
        self
    }

    pub fn covariance(mut self, covariance: DMatrix<f64>) -> Self {
        self.covariance = Some(covariance);
        self
    }

    /// Observation matrices; must be symmetric idempotent of the configured rank.
    pub fn observations(mut self, observations: Vec<DMatrix<f64>>) -> Self {
        self.observations = Some(observations);
        self
    }

    pub fn build(self) -> Result<Scenario> {
        let cfg = self.config;
        cfg.validate()?;
        let (m, l, k) = (cfg.feature_dim, cfg.num_classes, cfg.num_sensors);

        let centroids = match self.centroids {
            Some(c) => {
                if c.len() != l || c.iter().any(|mu| mu.len() != m) {
                    return Err(IseaError::config(format!("expected {l} centroids of length {m}")));
                }
                c
            }
            None => {
                let mut rng = StreamKey::scenario(cfg.master_seed).stream(CENTROID_STREAM);
                generate_centroids(m, l, cfg.centroid_scale, &mut rng)?
            }
        };

        let covariance = self.covariance.unwrap_or_else(|| cfg.covariance_matrix());
        if covariance.shape() != (m, m) {
            return Err(IseaError::config(format!("covariance must be {m}x{m}")));
        }
        if (&covariance - covariance.transpose()).amax() > 1e-12 * covariance.amax().max(1.0) {
            return Err(IseaError::config("sensing covariance is not symmetric"));
        }
        let chol = covariance
            .clone()
            .cholesky()
            .ok_or_else(|| IseaError::config("sensing covariance is not positive definite"))?;
        let covariance_inv = chol.inverse();
        let eigen = SymmetricEigen::new(covariance.clone());
        if eigen.eigenvalues.iter().any(|&v| v <= 0.0) {
            return Err(IseaError::config("sensing covariance is not positive definite"));
        }
        let diag = covariance.diagonal();
        let isotropic = (covariance.clone() - DMatrix::from_diagonal(&diag)).amax() == 0.0
            && diag.iter().all(|&d| d == diag[0]);
        let sensing_noise = if isotropic {
            SensingNoise::Isotropic(diag[0].sqrt())
        } else {
            SensingNoise::Factor(chol.l())
        };

        let observations = match self.observations {
            Some(obs) => {
                if obs.len() != k || obs.iter().any(|p| p.shape() != (m, m)) {
                    return Err(IseaError::config(format!("expected {k} observation matrices of size {m}x{m}")));
                }
                obs
            }
            None => {
                let mut rng = StreamKey::scenario(cfg.master_seed).stream(OBSERVATION_STREAM);
                (0..k)
                    .map(|_| generate_observation_matrix(m, cfg.observation_rank, &mut rng))
                    .collect::<Result<Vec<_>>>()?
            }
        };
        let mut global_observation = DMatrix::zeros(m, m);
        for p in &observations {
            global_observation += p;
        }
        global_observation /= k as f64;

        let local_means: Vec<Vec<DVector<f64>>> = observations
            .iter()
            .map(|p| centroids.iter().map(|mu| p * mu).collect())
            .collect();
        let projected_centroids: Vec<DVector<f64>> =
            centroids.iter().map(|mu| &global_observation * mu).collect();
        let mut centroid_mean = DVector::zeros(m);
        for mu in &centroids {
            centroid_mean += mu;
        }
        centroid_mean /= l as f64;
        let mean_local_features = observations.iter().map(|p| p * &centroid_mean).collect();

        // nu^2 = (1/(K M)) sum_k [tr C + tr(P_k Sigma_mu P_k)], with Sigma_mu the
        // population covariance of the centroids.
        let trace_c = covariance.trace();
        let between: f64 = observations
            .iter()
            .map(|p| {
                centroids
                    .iter()
                    .map(|mu| (p * (mu - &centroid_mean)).norm_squared())
                    .sum::<f64>()
                    / l as f64
            })
            .sum();
        let nu_sq = (k as f64 * trace_c + between) / (k * m) as f64;
        let sigma_sq = 1.0 / cfg.transmit_snr();

        Ok(Scenario {
            config: cfg,
            centroids,
            covariance,
            covariance_inv,
            covariance_eigenvalues: eigen.eigenvalues,
            covariance_basis: eigen.eigenvectors,
            sensing_noise,
            observations,
            global_observation,
            local_means,
            projected_centroids,
            mean_local_features,
            nu_sq,
            sigma_sq,
        })
    }
}

/// Builds the scenario described by `config`; a pure function of `config`.
pub fn build_scenario(config: &ScenarioConfig) -> Result<Scenario> {
    ScenarioBuilder::new(config.clone()).build()
}

impl Scenario {
    pub fn config(&self) -> &ScenarioConfig {
        &self.config
    }

    pub fn feature_dim(&self) -> usize {
        self.config.feature_dim
    }

    pub fn num_classes(&self) -> usize {
        self.config.num_classes
    }

    pub fn num_sensors(&self) -> usize {
        self.config.num_sensors
    }

    pub fn num_antennas(&self) -> usize {
        self.config.num_antennas
    }

    pub fn centroids(&self) -> &[DVector<f64>] {
        &self.centroids
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.covariance
    }

    pub fn covariance_inv(&self) -> &DMatrix<f64> {
        &self.covariance_inv
    }

    /// Eigenvalues of `C` paired with the columns of [`Self::covariance_basis`].
    pub fn covariance_eigenvalues(&self) -> &DVector<f64> {
        &self.covariance_eigenvalues
    }

    pub fn covariance_basis(&self) -> &DMatrix<f64> {
        &self.covariance_basis
    }

    pub fn min_covariance_eigenvalue(&self) -> f64 {
        self.covariance_eigenvalues.min()
    }

    pub fn observations(&self) -> &[DMatrix<f64>] {
        &self.observations
    }

    pub fn global_observation(&self) -> &DMatrix<f64> {
        &self.global_observation
    }

    pub fn projected_centroids(&self) -> &[DVector<f64>] {
        &self.projected_centroids
    }

    /// Common transmitted-symbol variance.
    pub fn nu_sq(&self) -> f64 {
        self.nu_sq
    }

    /// Channel noise power; the power budget is normalized to 1.
    pub fn sigma_sq(&self) -> f64 {
        self.sigma_sq
    }

    /// Linear transmit SNR `1 / sigma^2`.
    pub fn transmit_snr(&self) -> f64 {
        self.config.transmit_snr()
    }

    /// Same scenario with the sensing noise switched off at the sampler.
    ///
    /// Testing hook: `C` and its inverse are kept as-is, only the draws of
    /// `w_k` become zero.
    #[doc(hidden)]
    pub fn without_sensing_noise(mut self) -> Self {
        self.sensing_noise = SensingNoise::Isotropic(0.0);
        self
    }

    /// Checks the structural invariants of the instance.
    pub fn validate(&self) -> Result<()> {
        let m = self.feature_dim();
        let r = self.config.observation_rank as f64;
        for (k, p) in self.observations.iter().enumerate() {
            if (p - p.transpose()).amax() >= 1e-12 {
                return Err(IseaError::numerical(format!("P_{k} is not symmetric")));
            }
            if (p * p - p).amax() >= 1e-9 {
                return Err(IseaError::numerical(format!("P_{k} is not idempotent")));
            }
            if (p.trace() - r).abs() >= 1e-9 {
                return Err(IseaError::numerical(format!("trace(P_{k}) != {r}")));
            }
        }
        let residual = (&self.covariance_inv * &self.covariance - DMatrix::identity(m, m)).amax();
        if residual >= 1e-9 {
            return Err(IseaError::numerical(format!("C_inv C deviates from I by {residual:e}")));
        }
        if !(self.nu_sq > 0.0) {
            return Err(IseaError::numerical("nu^2 must be positive"));
        }
        Ok(())
    }

    /// Monte Carlo estimate of `E[P_k]` from `num_samples` fresh draws.
    ///
    /// Draws come from an auxiliary stream of the master seed that is
    /// disjoint from the streams used to build the scenario.
    pub fn expected_observation_matrix(&self, num_samples: usize) -> Result<DMatrix<f64>> {
        if num_samples == 0 {
            return Err(IseaError::invalid("num_samples must be at least 1"));
        }
        let m = self.feature_dim();
        let mut rng = StreamKey::scenario(self.config.master_seed).stream(AUXILIARY_STREAM);
        let mut acc = DMatrix::zeros(m, m);
        for _ in 0..num_samples {
            acc += generate_observation_matrix(m, self.config.observation_rank, &mut rng)?;
        }
        Ok(acc / num_samples as f64)
    }
}
