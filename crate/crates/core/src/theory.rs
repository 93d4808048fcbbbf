//! Closed-form surrogates, bounds and reference distributions.

use nalgebra::{DMatrix, DVector};

use crate::error::{IseaError, Result};
use crate::scenario::Scenario;

/// Euler–Mascheroni constant.
const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Exponent constant and additive offset of a surrogate evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurrogateParams {
    pub kappa: f64,
    /// Bound constant `c`; `None` for the lower-bound exponent.
    pub c: Option<f64>,
    /// Offset added to the surrogate (`C_a` for the upper bound).
    pub offset: f64,
}

impl SurrogateParams {
    /// `kappa = 1/2`, no offset.
    pub fn lower_bound() -> Self {
        Self {
            kappa: 0.5,
            c: None,
            offset: 0.0,
        }
    }

    /// `kappa = 1/(cM + 2)` with offset `C_a(c)`.
    pub fn upper_bound(c: f64, feature_dim: usize) -> Result<Self> {
        if !(c > 0.0) || !c.is_finite() {
            return Err(IseaError::invalid("bound constant c must be positive and finite"));
        }
        Ok(Self {
            kappa: 1.0 / (c * feature_dim as f64 + 2.0),
            c: Some(c),
            offset: bound_offset(c),
        })
    }

    /// Surrogate with an arbitrary exponent constant and no offset.
    pub fn with_kappa(kappa: f64) -> Result<Self> {
        if !(kappa > 0.0) || !kappa.is_finite() {
            return Err(IseaError::invalid("kappa must be positive and finite"));
        }
        Ok(Self {
            kappa,
            c: None,
            offset: 0.0,
        })
    }

    /// Full surrogate plus offset.
    pub fn evaluate(&self, pairwise: &DMatrix<f64>, num_sensors: usize) -> f64 {
        surrogate_uncertainty_full(pairwise, self.kappa, num_sensors) + self.offset
    }
}

/// `C_a = log(c e^{1/c} / (1 + c))`, computed as `t - ln(1 + t)` with `t = 1/c`.
pub fn bound_offset(c: f64) -> f64 {
    let t = 1.0 / c;
    t - t.ln_1p()
}

/// Pairwise separations of a scenario and their summary statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct SeparationSummary {
    /// `L x L`, symmetric, zero diagonal.
    pub pairwise: DMatrix<f64>,
    /// Mean of the off-diagonal entries.
    pub d_bar: f64,
    /// `(1/(L(L-1))) sum_{l != l'} (mu_l - mu_l')(mu_l - mu_l')^T`.
    pub d_matrix: DMatrix<f64>,
    /// Variance of the off-diagonal entries of `pairwise`.
    pub c_b_estimate: f64,
}

impl SeparationSummary {
    /// Noiseless separations; with `snr = Some(gamma)` the channel-distorted ones.
    pub fn new(scenario: &Scenario, snr: Option<f64>) -> Result<Self> {
        let noise = match snr {
            None => None,
            Some(g) if g > 0.0 => Some(scenario.num_sensors() as f64 / g),
            Some(_) => return Err(IseaError::invalid("snr must be positive")),
        };
        let pairwise = SeparationGeometry::new(scenario).pairwise(noise);
        let (d_bar, c_b_estimate) = off_diagonal_moments(&pairwise);
        Ok(Self {
            pairwise,
            d_bar,
            d_matrix: centroid_difference_matrix(scenario.centroids()),
            c_b_estimate,
        })
    }
}

/// Mean and variance of the off-diagonal entries.
pub fn off_diagonal_moments(pairwise: &DMatrix<f64>) -> (f64, f64) {
    let l = pairwise.nrows();
    let vals: Vec<f64> = (0..l)
        .flat_map(|i| (0..l).filter(move |&j| j != i).map(move |j| (i, j)))
        .map(|(i, j)| pairwise[(i, j)])
        .collect();
    if vals.is_empty() {
        return (0.0, 0.0);
    }
    let n = vals.len() as f64;
    let mean = vals.iter().sum::<f64>() / n;
    let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var)
}

/// Average outer product of centroid differences over ordered pairs.
pub fn centroid_difference_matrix(centroids: &[DVector<f64>]) -> DMatrix<f64> {
    let l = centroids.len();
    let m = centroids.first().map_or(0, |c| c.len());
    let mut d = DMatrix::zeros(m, m);
    for i in 0..l {
        for j in 0..l {
            if i != j {
                let diff = &centroids[i] - &centroids[j];
                d += &diff * diff.transpose();
            }
        }
    }
    if l > 1 {
        d /= (l * (l - 1)) as f64;
    }
    d
}

/// Centroid differences rotated into the eigenbasis of `C`, so separations
/// at any channel noise level cost `O(L^2 M)`.
#[derive(Debug, Clone)]
pub struct SeparationGeometry {
    eigenvalues: DVector<f64>,
    /// `U^T P_bar (mu_l - mu_l')` for `l < l'`, row-major over pairs.
    rotated: Vec<DVector<f64>>,
    num_classes: usize,
}

impl SeparationGeometry {
    pub fn new(scenario: &Scenario) -> Self {
        let u = scenario.covariance_basis();
        let pc = scenario.projected_centroids();
        let l = pc.len();
        let mut rotated = Vec::with_capacity(l * (l - 1) / 2);
        for i in 0..l {
            for j in i + 1..l {
                rotated.push(u.tr_mul(&(&pc[i] - &pc[j])));
            }
        }
        Self {
            eigenvalues: scenario.covariance_eigenvalues().clone(),
            rotated,
            num_classes: l,
        }
    }

    /// Pairwise separations with `(C + s I)^{-1}` in the middle; `None`
    /// means `s = 0`.
    pub fn pairwise(&self, noise: Option<f64>) -> DMatrix<f64> {
        let s = noise.unwrap_or(0.0);
        let w = self.eigenvalues.map(|l| 1.0 / (l + s));
        let l = self.num_classes;
        let mut out = DMatrix::zeros(l, l);
        let mut idx = 0;
        for i in 0..l {
            for j in i + 1..l {
                let v = &self.rotated[idx];
                let d: f64 = v.iter().zip(w.iter()).map(|(a, b)| a * a * b).sum();
                out[(i, j)] = d;
                out[(j, i)] = d;
                idx += 1;
            }
        }
        out
    }

    /// Separations at effective receive SNR `gamma` for `K` sensors.
    pub fn pairwise_at_snr(&self, gamma: f64, num_sensors: usize) -> DMatrix<f64> {
        if gamma.is_infinite() {
            self.pairwise(None)
        } else {
            self.pairwise(Some(num_sensors as f64 / gamma))
        }
    }
}

/// `ln(1 + sum exp(a_j))` for `a_j <= 0` without losing tiny values.
fn log1p_sum_exp(exponents: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = exponents.collect();
    let max = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if max <= 0.0 {
        v.iter().map(|a| a.exp()).sum::<f64>().ln_1p()
    } else {
        let s: f64 = v.iter().map(|a| (a - max).exp()).sum();
        max + ((-max).exp() + s).ln()
    }
}

/// `(1/L) sum_l log[1 + sum_{l' != l} exp(-kappa D_{l,l'} K)]`.
pub fn surrogate_uncertainty_full(pairwise: &DMatrix<f64>, kappa: f64, num_sensors: usize) -> f64 {
    let l = pairwise.nrows();
    let k = num_sensors as f64;
    (0..l)
        .map(|i| log1p_sum_exp((0..l).filter(|&j| j != i).map(|j| -kappa * pairwise[(i, j)] * k)))
        .sum::<f64>()
        / l as f64
}

/// `log[1 + (L - 1) exp(-kappa D_bar K)]`.
pub fn surrogate_uncertainty_simplified(d_bar: f64, kappa: f64, num_sensors: usize, num_classes: usize) -> f64 {
    log1p_sum_exp(std::iter::once(
        ((num_classes - 1) as f64).ln() - kappa * d_bar * num_sensors as f64,
    ))
}

/// Lower and upper bounds on the sensing uncertainty for bound constant `c`.
pub fn uncertainty_bounds(
    pairwise: &DMatrix<f64>,
    c: f64,
    num_sensors: usize,
    feature_dim: usize,
) -> Result<(f64, f64)> {
    let lower = SurrogateParams::lower_bound().evaluate(pairwise, num_sensors);
    let upper = SurrogateParams::upper_bound(c, feature_dim)?.evaluate(pairwise, num_sensors);
    Ok((lower, upper))
}

/// `Tr(EP C^{-1} EP D)`.
pub fn xi_constant(scenario: &Scenario, expected_observation: &DMatrix<f64>) -> Result<f64> {
    let m = scenario.feature_dim();
    if expected_observation.shape() != (m, m) {
        return Err(IseaError::invalid(format!("expected observation matrix must be {m}x{m}")));
    }
    let d = centroid_difference_matrix(scenario.centroids());
    Ok((expected_observation * scenario.covariance_inv() * expected_observation * d).trace())
}

/// Ratio of channel-distorted to noiseless mean separation at receive SNR
/// `gamma`, via the Woodbury expansion of `(C + (K/gamma) I)^{-1}`.
pub fn a_loss(scenario: &Scenario, gamma: f64) -> Result<f64> {
    if !(gamma > 0.0) {
        return Err(IseaError::invalid("gamma must be positive"));
    }
    let m = scenario.feature_dim();
    let p = scenario.global_observation();
    let c_inv = scenario.covariance_inv();
    let d = centroid_difference_matrix(scenario.centroids());
    let d_bar = (p * c_inv * p * &d).trace();
    if !(d_bar > 0.0) {
        return Err(IseaError::numerical("mean class separation is zero; A_loss undefined"));
    }
    if gamma.is_infinite() {
        return Ok(1.0);
    }
    let inner = c_inv + DMatrix::identity(m, m) * (gamma / scenario.num_sensors() as f64);
    let inner_inv = inner
        .cholesky()
        .ok_or_else(|| IseaError::numerical("Woodbury inner matrix is not positive definite"))?
        .inverse();
    let correction = (p * c_inv * inner_inv * c_inv * p * &d).trace();
    Ok((1.0 - correction / d_bar).clamp(0.0, 1.0))
}

/// Two lower bounds on the expected separation loss.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossBounds {
    /// `1 - e^{1/r} E1(1/r) / r`.
    pub exponential_integral: f64,
    /// `1 - ln(1 + r) / r`.
    pub logarithmic: f64,
}

/// `r = 2 gamma (1 + sqrt(omega))^2 lambda_min(C) / nu^2`.
pub fn loss_parameter(scenario: &Scenario, omega: f64) -> f64 {
    2.0 * scenario.transmit_snr() * (1.0 + omega.sqrt()).powi(2) * scenario.min_covariance_eigenvalue()
        / scenario.nu_sq()
}

pub fn expected_a_loss_lower_bound(r: f64) -> Result<LossBounds> {
    if !(r > 0.0) {
        return Err(IseaError::invalid("loss parameter must be positive"));
    }
    let x = 1.0 / r;
    // e^x E1(x) through the continued fraction directly once e^x would overflow.
    let scaled = if x > 1.0 {
        e1_continued_fraction_scaled(x)
    } else {
        x.exp() * exp_integral_e1(x)?
    };
    Ok(LossBounds {
        exponential_integral: 1.0 - scaled * x,
        logarithmic: 1.0 - r.ln_1p() / r,
    })
}

/// Exponential integral `E1(x) = int_x^inf e^{-t}/t dt`.
pub fn exp_integral_e1(x: f64) -> Result<f64> {
    if !(x > 0.0) {
        return Err(IseaError::invalid("E1 is defined for x > 0"));
    }
    if x <= 1.0 {
        let mut sum = 0.0;
        let mut term = 1.0;
        for n in 1..=30 {
            term *= -x / n as f64;
            let contrib = term / n as f64;
            sum += contrib;
            if contrib.abs() < 1e-17 * sum.abs() {
                break;
            }
        }
        Ok(-EULER_GAMMA - x.ln() - sum)
    } else {
        Ok(e1_continued_fraction_scaled(x) * (-x).exp())
    }
}

/// `e^x E1(x)` by modified Lentz evaluation, for `x > 1`.
fn e1_continued_fraction_scaled(x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let mut b = x + 1.0;
    let mut c = 1.0 / TINY;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..1000 {
        let a = -((i * i) as f64);
        b += 2.0;
        d = 1.0 / (a * d + b);
        c = b + a / c;
        let delta = c * d;
        h *= delta;
        if (delta - 1.0).abs() < 1e-15 {
            break;
        }
    }
    h
}

/// Exponential distribution given by its mean.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExponentialCdf {
    pub mean: f64,
}

impl ExponentialCdf {
    pub fn cdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            0.0
        } else {
            -(-x / self.mean).exp_m1()
        }
    }

    pub fn median(&self) -> f64 {
        self.mean * std::f64::consts::LN_2
    }
}

/// Limiting law of the scaled AirComp alignment gain for `N / K -> omega`.
pub fn zeta_air_reference_cdf(omega: f64) -> Result<ExponentialCdf> {
    if !(omega >= 0.0) || !omega.is_finite() {
        return Err(IseaError::invalid("omega must be finite and non-negative"));
    }
    Ok(ExponentialCdf {
        mean: (1.0 + omega.sqrt()).powi(2),
    })
}

/// `2 / chi^2_{2m}`, i.e. the reciprocal of a unit-scale `Gamma(m)` variable.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InverseChiSquareCdf {
    pub shape: usize,
}

impl InverseChiSquareCdf {
    /// `P(Gamma(m) >= 1/x) = e^{-1/x} sum_{j<m} x^{-j}/j!`, in log space.
    pub fn cdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        let y = 1.0 / x;
        let ln_y = y.ln();
        let mut ln_term = -y;
        let mut total = ln_term.exp();
        for j in 1..self.shape {
            ln_term += ln_y - (j as f64).ln();
            total += ln_term.exp();
        }
        total.min(1.0)
    }

    /// `1/(m - 1)`; infinite for `m = 1`.
    pub fn mean(&self) -> f64 {
        if self.shape > 1 {
            1.0 / (self.shape - 1) as f64
        } else {
            f64::INFINITY
        }
    }
}

/// Law of a zero-forcing beamformer's squared norm for `N` antennas and `K` sensors.
pub fn b_norm_reference_cdf(antennas: usize, sensors: usize) -> Result<InverseChiSquareCdf> {
    if antennas < sensors {
        return Err(IseaError::Infeasible { antennas, sensors });
    }
    Ok(InverseChiSquareCdf {
        shape: antennas - sensors + 1,
    })
}

/// Asymptotic probability that AirComp has the higher effective SNR.
pub fn crossing_probability(num_sensors: usize, omega: f64) -> f64 {
    if omega <= 1.0 {
        return 1.0;
    }
    let s = omega.sqrt();
    (-(num_sensors as f64) / 2.0 * (s - 1.0) / (s + 1.0)).exp()
}

/// Kolmogorov–Smirnov distance between the empirical CDF of `samples` and `cdf`.
pub fn ks_statistic(samples: &[f64], cdf: impl Fn(f64) -> f64) -> Result<f64> {
    if samples.len() < 100 {
        return Err(IseaError::invalid("KS statistic needs at least 100 samples"));
    }
    if samples.iter().any(|x| x.is_nan()) {
        return Err(IseaError::numerical("NaN sample"));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in sorted.iter().enumerate() {
        let f = cdf(x);
        d = d.max((i + 1) as f64 / n - f).max(f - i as f64 / n);
    }
    Ok(d.min(1.0))
}
