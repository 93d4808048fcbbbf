//! Rayleigh-fading SIMO multi-access channel and the three receive
//! pipelines: AirComp, analog orthogonal access (zero-forcing) and adaptive
//! switching between the two.
//!
//! All pipelines return the real `M`-vector seen by the classifier. Channel
//! noise is drawn directly in its effective form `f_bar + n`,
//! `n ~ N(0, I / snr)`; [`aircomp_receive_literal`] simulates the full
//! complex receive chain and exists to validate that shortcut.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{IseaError, Result};
use crate::feature_model::aggregate_noiseless;
use crate::scenario::Scenario;

/// Above this many sensors the principal eigenpair comes from power iteration.
pub const DENSE_EIGEN_MAX_SENSORS: usize = 64;
const POWER_TOLERANCE: f64 = 1e-10;
const POWER_MAX_ITERATIONS: usize = 100_000;

/// One draw of the `N x K` channel and its principal eigenstructure.
#[derive(Debug, Clone)]
pub struct ChannelRealization {
    /// Column `k` is the channel vector `h_k` of sensor `k`.
    pub h: DMatrix<Complex64>,
    /// Largest eigenvalue of `H^H H`.
    pub lambda1: f64,
    /// Principal left singular vector of `H`, `H q1 / sqrt(lambda1)`.
    pub v: DVector<Complex64>,
    /// Principal eigenvector of `H^H H`; its largest-magnitude entry is real positive.
    pub q1: DVector<Complex64>,
}

/// Which multi-access scheme produced an aggregated feature.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AccessMode {
    Noiseless,
    AirComp,
    Orthogonal,
}

impl AccessMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            AccessMode::Noiseless => "noiseless",
            AccessMode::AirComp => "aircomp",
            AccessMode::Orthogonal => "orthogonal",
        }
    }
}

/// The classifier input and the effective noise level it carries.
#[derive(Debug, Clone)]
pub struct AggregationOutcome {
    pub f_tilde: DVector<f64>,
    /// Scheme actually used; for adaptive access this is the resolved mode.
    pub mode: AccessMode,
    /// Set when the mode was chosen by adaptive switching.
    pub adaptive: bool,
    pub effective_snr: f64,
    /// `1 / effective_snr`.
    pub noise_power_per_dim: f64,
    /// The AirComp alignment gain vanished (`min_k |v^H h_k|^2 = 0`).
    pub degenerate: bool,
}

/// Effective SNR of AirComp with optimal receive beamforming.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AirCompSnr {
    pub gamma_air: f64,
    /// `||b||^2` of the scaled combiner that meets the weakest sensor's budget.
    pub b_norm_sq: f64,
    /// `K * min_k |v^H h_k|^2`.
    pub zeta_air: f64,
    pub degenerate: bool,
}

fn sample_cn<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Normalizes `q` and rotates it so its largest-magnitude entry is real positive.
fn fix_phase(q: &mut DVector<Complex64>) {
    let norm = q.norm();
    if norm > 0.0 {
        *q /= Complex64::from(norm);
    }
    let pivot = q
        .iter()
        .copied()
        .max_by(|a, b| a.norm_sqr().total_cmp(&b.norm_sqr()))
        .unwrap_or(Complex64::new(1.0, 0.0));
    if pivot.norm() > 0.0 {
        let phase = pivot.conj() / pivot.norm();
        *q *= phase;
    }
}

/// Largest eigenpair of a Hermitian PSD matrix by dense eigendecomposition.
pub fn principal_eigen_dense(gram: &DMatrix<Complex64>) -> (f64, DVector<Complex64>) {
    let eig = SymmetricEigen::new(gram.clone());
    let (idx, &lambda) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .expect("nonempty matrix");
    let mut q = eig.eigenvectors.column(idx).into_owned();
    fix_phase(&mut q);
    (lambda.max(0.0), q)
}

/// Largest eigenpair of a Hermitian PSD matrix by power iteration from the
/// normalized all-ones vector; stops once the Rayleigh quotient moves by
/// less than `1e-10` relative.
pub fn principal_eigen_power(gram: &DMatrix<Complex64>) -> Result<(f64, DVector<Complex64>)> {
    let k = gram.nrows();
    let mut q = DVector::from_element(k, Complex64::new(1.0 / (k as f64).sqrt(), 0.0));
    let mut lambda = 0.0;
    for _ in 0..POWER_MAX_ITERATIONS {
        let y = gram * &q;
        let next = q.dotc(&y).re;
        let norm = y.norm();
        if norm == 0.0 {
            return Ok((0.0, q));
        }
        q = y / Complex64::from(norm);
        if (next - lambda).abs() <= POWER_TOLERANCE * next.abs() {
            fix_phase(&mut q);
            return Ok((next.max(0.0), q));
        }
        lambda = next;
    }
    Err(IseaError::numerical("power iteration did not converge"))
}

/// Draws `H` with i.i.d. `CN(0, 1)` entries and computes its eigenstructure.
pub fn sample_channel<R: Rng + ?Sized>(
    antennas: usize,
    sensors: usize,
    rng: &mut R,
) -> Result<ChannelRealization> {
    if antennas == 0 || sensors == 0 {
        return Err(IseaError::invalid("channel needs at least one antenna and one sensor"));
    }
    let h = DMatrix::from_fn(antennas, sensors, |_, _| sample_cn(rng));
    ChannelRealization::from_matrix(h)
}

impl ChannelRealization {
    pub fn from_matrix(h: DMatrix<Complex64>) -> Result<Self> {
        let gram = h.adjoint() * &h;
        let (lambda1, q1) = if h.ncols() <= DENSE_EIGEN_MAX_SENSORS {
            principal_eigen_dense(&gram)
        } else {
            principal_eigen_power(&gram)?
        };
        let v = if lambda1 > 0.0 {
            &h * &q1 / Complex64::from(lambda1.sqrt())
        } else {
            let mut e = DVector::zeros(h.nrows());
            e[0] = Complex64::new(1.0, 0.0);
            e
        };
        Ok(Self { h, lambda1, v, q1 })
    }

    pub fn antennas(&self) -> usize {
        self.h.nrows()
    }

    pub fn sensors(&self) -> usize {
        self.h.ncols()
    }

    /// `|v^H h_k|^2` for every sensor.
    pub fn alignment_gains(&self) -> Vec<f64> {
        self.h.column_iter().map(|hk| self.v.dotc(&hk).norm_sqr()).collect()
    }

    /// `||b_k||^2 = [(H^H H)^{-1}]_{kk}` of the zero-forcing beamformers.
    pub fn zf_norms_sq(&self) -> Result<Vec<f64>> {
        self.check_zf_feasible()?;
        let inv = self.gram_inverse()?;
        Ok((0..self.sensors()).map(|k| inv[(k, k)].re).collect())
    }

    fn check_zf_feasible(&self) -> Result<()> {
        if self.antennas() < self.sensors() {
            return Err(IseaError::Infeasible {
                antennas: self.antennas(),
                sensors: self.sensors(),
            });
        }
        Ok(())
    }

    fn gram_inverse(&self) -> Result<DMatrix<Complex64>> {
        let gram = self.h.adjoint() * &self.h;
        let chol = gram
            .cholesky()
            .ok_or_else(|| IseaError::numerical("H^H H is singular"))?;
        Ok(chol.inverse())
    }
}

/// Zero-forcing receive beamformers `b_k = H (H^H H)^{-1} e_k`.
pub fn zf_beamformers(channel: &ChannelRealization) -> Result<Vec<DVector<Complex64>>> {
    channel.check_zf_feasible()?;
    let b = &channel.h * channel.gram_inverse()?;
    Ok(b.column_iter().map(|c| c.into_owned()).collect())
}

/// AirComp effective SNR `(2 K^2 gamma / nu^2) min_k |v^H h_k|^2`.
pub fn aircomp_effective_snr(channel: &ChannelRealization, scenario: &Scenario) -> AirCompSnr {
    let k = channel.sensors() as f64;
    let min_gain = channel
        .alignment_gains()
        .into_iter()
        .fold(f64::INFINITY, f64::min);
    let min_q = channel
        .q1
        .iter()
        .map(|q| q.norm_sqr())
        .fold(f64::INFINITY, f64::min);
    let nu_sq = scenario.nu_sq();
    let degenerate = !(min_gain > 0.0);
    let gamma_air = if degenerate {
        0.0
    } else {
        2.0 * k * k * scenario.transmit_snr() / nu_sq * min_gain
    };
    AirCompSnr {
        gamma_air,
        b_norm_sq: nu_sq / (channel.lambda1 * min_q),
        zeta_air: k * min_gain,
        degenerate,
    }
}

/// Orthogonal-access effective SNR `gamma K^2 / (nu^2 sum_k ||b_k||^2)`.
pub fn orthogonal_effective_snr(channel: &ChannelRealization, scenario: &Scenario) -> Result<f64> {
    let k = channel.sensors() as f64;
    let total: f64 = channel.zf_norms_sq()?.iter().sum();
    Ok(scenario.transmit_snr() * k * k / (scenario.nu_sq() * total))
}

fn check_inputs(scenario: &Scenario, channel: &ChannelRealization, features: &[DVector<f64>]) -> Result<()> {
    if channel.sensors() != features.len() || features.len() != scenario.num_sensors() {
        return Err(IseaError::invalid(format!(
            "{} feature maps for {} channel columns and {} sensors",
            features.len(),
            channel.sensors(),
            scenario.num_sensors()
        )));
    }
    Ok(())
}

/// `f_bar + z / sqrt(snr)` from a fresh standard normal `z`.
fn add_effective_noise<R: Rng + ?Sized>(f_bar: DVector<f64>, snr: f64, rng: &mut R) -> DVector<f64> {
    let m = f_bar.len();
    let z = DVector::from_fn(m, |_, _| rng.sample::<f64, _>(StandardNormal));
    if snr == 0.0 {
        // No usable gain: the input carries no information, keep the mean path.
        return f_bar;
    }
    let sd = snr.recip().sqrt();
    f_bar + z * sd
}

fn outcome(f_tilde: DVector<f64>, mode: AccessMode, adaptive: bool, snr: f64, degenerate: bool) -> AggregationOutcome {
    let noise = if snr == 0.0 { f64::INFINITY } else { snr.recip() };
    AggregationOutcome {
        f_tilde,
        mode,
        adaptive,
        effective_snr: snr,
        noise_power_per_dim: noise,
        degenerate,
    }
}

/// Noiseless aggregation wrapped as an outcome (infinite effective SNR).
pub fn noiseless_receive(local_features: &[DVector<f64>]) -> Result<AggregationOutcome> {
    let f_bar = aggregate_noiseless(local_features)?;
    Ok(AggregationOutcome {
        f_tilde: f_bar,
        mode: AccessMode::Noiseless,
        adaptive: false,
        effective_snr: f64::INFINITY,
        noise_power_per_dim: 0.0,
        degenerate: false,
    })
}

/// AirComp aggregation with zero-forcing power control.
pub fn aircomp_receive<R: Rng + ?Sized>(
    scenario: &Scenario,
    channel: &ChannelRealization,
    local_features: &[DVector<f64>],
    rng: &mut R,
) -> Result<AggregationOutcome> {
    check_inputs(scenario, channel, local_features)?;
    let snr = aircomp_effective_snr(channel, scenario);
    let f_bar = aggregate_noiseless(local_features)?;
    let f_tilde = add_effective_noise(f_bar, snr.gamma_air, rng);
    Ok(outcome(f_tilde, AccessMode::AirComp, false, snr.gamma_air, snr.degenerate))
}

/// AirComp simulated through the complex receive chain: zero-mean symbols
/// `x_k = f_k - E[f_k]`, powers `rho_k = 1/(b^H h_k)`, `Y = sum rho_k h_k x_k + Z`,
/// `s = Y^H b`, `f_tilde = Re{s}/K + mean_k E[f_k]`.
pub fn aircomp_receive_literal<R: Rng + ?Sized>(
    scenario: &Scenario,
    channel: &ChannelRealization,
    local_features: &[DVector<f64>],
    rng: &mut R,
) -> Result<AggregationOutcome> {
    check_inputs(scenario, channel, local_features)?;
    let snr = aircomp_effective_snr(channel, scenario);
    let (n, k, m) = (channel.antennas(), channel.sensors(), scenario.feature_dim());
    let b = &channel.v * Complex64::from(snr.b_norm_sq.sqrt());
    let noise_sd = (scenario.sigma_sq() / 2.0).sqrt();
    let mut y = DMatrix::from_fn(n, m, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        Complex64::new(re, im) * noise_sd
    });
    for (idx, f) in local_features.iter().enumerate() {
        let hk = channel.h.column(idx);
        let rho = b.dotc(&hk).inv();
        let x = f - &scenario.mean_local_features[idx];
        for slot in 0..m {
            for ant in 0..n {
                y[(ant, slot)] += hk[ant] * rho * x[slot];
            }
        }
    }
    let s = y.adjoint() * &b;
    let mut f_avg = DVector::zeros(m);
    for mean in &scenario.mean_local_features {
        f_avg += mean;
    }
    let f_tilde = DVector::from_fn(m, |i, _| (s[i].re + f_avg[i]) / k as f64);
    Ok(outcome(f_tilde, AccessMode::AirComp, false, snr.gamma_air, snr.degenerate))
}

/// Analog orthogonal access with zero-forcing stream separation.
pub fn orthogonal_receive<R: Rng + ?Sized>(
    scenario: &Scenario,
    channel: &ChannelRealization,
    local_features: &[DVector<f64>],
    rng: &mut R,
) -> Result<AggregationOutcome> {
    check_inputs(scenario, channel, local_features)?;
    let gamma = orthogonal_effective_snr(channel, scenario)?;
    let f_bar = aggregate_noiseless(local_features)?;
    let f_tilde = add_effective_noise(f_bar, gamma, rng);
    Ok(outcome(f_tilde, AccessMode::Orthogonal, false, gamma, false))
}

/// Picks the scheme with the larger effective SNR for this draw; ties and
/// infeasible orthogonal access resolve to AirComp.
pub fn adaptive_receive<R: Rng + ?Sized>(
    scenario: &Scenario,
    channel: &ChannelRealization,
    local_features: &[DVector<f64>],
    rng: &mut R,
) -> Result<AggregationOutcome> {
    check_inputs(scenario, channel, local_features)?;
    let air = aircomp_effective_snr(channel, scenario);
    let aoa = orthogonal_effective_snr(channel, scenario).ok();
    let (mode, snr, degenerate) = match aoa {
        Some(g) if g > air.gamma_air => (AccessMode::Orthogonal, g, false),
        _ => (AccessMode::AirComp, air.gamma_air, air.degenerate),
    };
    let f_bar = aggregate_noiseless(local_features)?;
    let f_tilde = add_effective_noise(f_bar, snr, rng);
    Ok(outcome(f_tilde, mode, true, snr, degenerate))
}
