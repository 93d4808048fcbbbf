//! Label and local-feature sampling under the subspace Gaussian-mixture
//! sensing model, and noiseless average aggregation.

use nalgebra::DVector;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{IseaError, Result};
use crate::scenario::{Scenario, SensingNoise};

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSample {
    pub label: usize,
    pub local_features: Vec<DVector<f64>>,
    /// The ground-truth feature map `g = mu_label`.
    pub ground_truth: DVector<f64>,
}

/// Uniform label over `0..num_classes`.
pub fn sample_label<R: Rng + ?Sized>(num_classes: usize, rng: &mut R) -> usize {
    rng.random_range(0..num_classes)
}

/// Draws `P_k mu_label + w` with `w ~ N(0, C)`.
pub fn sample_local_feature<R: Rng + ?Sized>(
    scenario: &Scenario,
    sensor: usize,
    label: usize,
    rng: &mut R,
) -> DVector<f64> {
    let mean = &scenario.local_means[sensor][label];
    let m = mean.len();
    match &scenario.sensing_noise {
        SensingNoise::Isotropic(sd) => {
            DVector::from_fn(m, |i, _| mean[i] + sd * rng.sample::<f64, _>(StandardNormal))
        }
        SensingNoise::Factor(l) => {
            let z = DVector::from_fn(m, |_, _| rng.sample::<f64, _>(StandardNormal));
            mean + l * z
        }
    }
}

/// Draws a label and one local feature per sensor.
pub fn sample_features<R: Rng + ?Sized>(scenario: &Scenario, rng: &mut R) -> FeatureSample {
    let label = sample_label(scenario.num_classes(), rng);
    sample_features_for_label(scenario, label, rng)
}

pub fn sample_features_for_label<R: Rng + ?Sized>(
    scenario: &Scenario,
    label: usize,
    rng: &mut R,
) -> FeatureSample {
    let local_features = (0..scenario.num_sensors())
        .map(|k| sample_local_feature(scenario, k, label, rng))
        .collect();
    FeatureSample {
        label,
        local_features,
        ground_truth: scenario.centroids()[label].clone(),
    }
}

/// Elementwise mean of the local feature maps.
pub fn aggregate_noiseless(local_features: &[DVector<f64>]) -> Result<DVector<f64>> {
    let first = local_features
        .first()
        .ok_or_else(|| IseaError::invalid("cannot aggregate zero feature maps"))?;
    let mut acc = DVector::zeros(first.len());
    for f in local_features {
        if f.len() != first.len() {
            return Err(IseaError::invalid("feature maps differ in length"));
        }
        acc += f;
    }
    Ok(acc / local_features.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::StreamKey;
    use crate::scenario::{build_scenario, ScenarioConfig};
    use nalgebra::DMatrix;
    use proptest::prelude::*;

    fn toy(k: usize) -> Scenario {
        build_scenario(&ScenarioConfig {
            feature_dim: 5,
            num_classes: 5,
            num_sensors: k,
            observation_rank: 1,
            sensing_covariance_scale: 0.1,
            ..Default::default()
        })
        .unwrap()
    }

    fn moments(samples: &[DVector<f64>]) -> (DVector<f64>, DMatrix<f64>) {
        let n = samples.len() as f64;
        let m = samples[0].len();
        let mut mean = DVector::zeros(m);
        for s in samples {
            mean += s;
        }
        mean /= n;
        let mut cov = DMatrix::zeros(m, m);
        for s in samples {
            let d = s - &mean;
            cov += &d * d.transpose();
        }
        (mean, cov / (n - 1.0))
    }

    #[test]
    fn label_frequencies() {
        let mut rng = StreamKey::new(1, 0, 0).stream(0);
        let n = 100_000;
        let ones = (0..n).filter(|_| sample_label(2, &mut rng) == 1).count();
        assert!((ones as f64 / n as f64 - 0.5).abs() < 0.005);
    }

    #[test]
    fn label_sequence_reproducible() {
        let draw = || {
            let mut rng = StreamKey::new(5, 0, 0).stream(3);
            (0..32).map(|_| sample_label(7, &mut rng)).collect::<Vec<_>>()
        };
        assert_eq!(draw(), draw());
    }

    #[test]
    fn label_chi_square_uniformity() {
        // 19 degrees of freedom; the 0.99 quantile is 36.19.
        let (l, n) = (20, 100_000);
        let mut rng = StreamKey::new(2, 0, 0).stream(0);
        let mut counts = vec![0usize; l];
        for _ in 0..n {
            counts[sample_label(l, &mut rng)] += 1;
        }
        let expected = n as f64 / l as f64;
        let chi2: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
        assert!(chi2 < 36.19, "chi-square {chi2}");
    }

    #[test]
    fn zero_noise_feature_is_projected_centroid() {
        let s = toy(3).without_sensing_noise();
        let mut rng = StreamKey::new(1, 0, 0).stream(0);
        let f = sample_local_feature(&s, 2, 4, &mut rng);
        assert_eq!(f, &s.observations()[2] * &s.centroids()[4]);
    }

    #[test]
    fn local_feature_moments() {
        let s = toy(3);
        let mut rng = StreamKey::new(4, 0, 0).stream(0);
        let n = 100_000;
        let samples: Vec<_> = (0..n).map(|_| sample_local_feature(&s, 1, 2, &mut rng)).collect();
        let (mean, cov) = moments(&samples);
        let target = &s.observations()[1] * &s.centroids()[2];
        let tol = 3.0 * (0.1f64 / n as f64).sqrt();
        assert!((mean - target).amax() < tol);
        let rel = (&cov - s.covariance()).norm() / s.covariance().norm();
        assert!(rel < 0.05, "relative Frobenius error {rel}");
    }

    #[test]
    fn correlated_noise_covariance() {
        let s = build_scenario(&ScenarioConfig {
            feature_dim: 3,
            num_classes: 2,
            num_sensors: 1,
            observation_rank: 2,
            sensing_covariance: Some(vec![0.5, 0.1, 0.0, 0.1, 0.3, 0.05, 0.0, 0.05, 0.2]),
            ..Default::default()
        })
        .unwrap();
        let mut rng = StreamKey::new(4, 0, 0).stream(0);
        let samples: Vec<_> = (0..100_000).map(|_| sample_local_feature(&s, 0, 0, &mut rng)).collect();
        let (_, cov) = moments(&samples);
        assert!((&cov - s.covariance()).norm() / s.covariance().norm() < 0.05);
    }

    #[test]
    fn aggregation_basics() {
        let v = DVector::from_vec(vec![1.0, -2.0, 3.5]);
        assert_eq!(aggregate_noiseless(std::slice::from_ref(&v)).unwrap(), v);
        assert_eq!(aggregate_noiseless(&[v.clone(), v.clone(), v.clone()]).unwrap(), v);
        assert!(aggregate_noiseless(&[]).is_err());
        assert!(aggregate_noiseless(&[v.clone(), DVector::zeros(2)]).is_err());
    }

    #[test]
    fn aggregated_feature_distribution() {
        let s = toy(10);
        let mut rng = StreamKey::new(6, 0, 0).stream(0);
        let samples: Vec<_> = (0..100_000)
            .map(|_| {
                let fs = sample_features_for_label(&s, 3, &mut rng);
                aggregate_noiseless(&fs.local_features).unwrap()
            })
            .collect();
        let (mean, cov) = moments(&samples);
        let target_cov = s.covariance() / 10.0;
        assert!((&cov - &target_cov).norm() / target_cov.norm() < 0.05);
        let tol = 3.0 * (0.01f64 / 100_000.0).sqrt();
        assert!((mean - &s.projected_centroids()[3]).amax() < tol);
    }

    #[test]
    fn transmitted_symbol_variance_matches_nu_sq() {
        let s = build_scenario(&ScenarioConfig {
            feature_dim: 6,
            num_classes: 4,
            num_sensors: 4,
            observation_rank: 3,
            ..Default::default()
        })
        .unwrap();
        let mut rng = StreamKey::new(8, 0, 0).stream(0);
        let (mut sum_sq, mut count) = (0.0, 0usize);
        for _ in 0..100_000 {
            let fs = sample_features(&s, &mut rng);
            for (k, f) in fs.local_features.iter().enumerate() {
                sum_sq += (f - &s.mean_local_features[k]).norm_squared();
                count += f.len();
            }
        }
        let empirical = sum_sq / count as f64;
        assert!((empirical / s.nu_sq() - 1.0).abs() < 0.03, "{empirical} vs {}", s.nu_sq());
    }

    proptest! {
        #[test]
        fn aggregation_is_linear(
            a in -3.0f64..3.0,
            b in -3.0f64..3.0,
            xs in prop::collection::vec(prop::collection::vec(-10.0f64..10.0, 4), 1..6),
            ys in prop::collection::vec(prop::collection::vec(-10.0f64..10.0, 4), 1..6),
        ) {
            let n = xs.len().min(ys.len());
            let f: Vec<_> = xs[..n].iter().map(|v| DVector::from_column_slice(v)).collect();
            let g: Vec<_> = ys[..n].iter().map(|v| DVector::from_column_slice(v)).collect();
            let mixed: Vec<_> = f.iter().zip(&g).map(|(x, y)| x * a + y * b).collect();
            let lhs = aggregate_noiseless(&mixed).unwrap();
            let rhs = aggregate_noiseless(&f).unwrap() * a + aggregate_noiseless(&g).unwrap() * b;
            prop_assert!((lhs - rhs).amax() < 1e-9);
        }
    }
}
