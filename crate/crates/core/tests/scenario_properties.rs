use isea_core::rng::StreamKey;
use isea_core::scenario::generate_observation_matrix;
use isea_core::*;
use nalgebra::DMatrix;
use proptest::prelude::*;

fn cfg(m: usize, r: usize, seed: u64) -> ScenarioConfig {
    ScenarioConfig {
        feature_dim: m,
        num_classes: 3,
        num_sensors: 4,
        observation_rank: r,
        master_seed: seed,
        ..Default::default()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn observation_matrices_are_projections(m in 1usize..24, frac in 0.0f64..1.0, seed in any::<u64>()) {
        let r = 1 + ((m - 1) as f64 * frac) as usize;
        let p = generate_observation_matrix(m, r, &mut StreamKey::new(seed, 0, 0).stream(0)).unwrap();
        prop_assert!((&p - p.transpose()).amax() < 1e-12);
        prop_assert!((&p * &p - &p).amax() < 1e-9);
        prop_assert!((p.trace() - r as f64).abs() < 1e-9);
    }

    #[test]
    fn scenario_is_pure_and_consistent(m in 1usize..12, frac in 0.0f64..1.0, seed in any::<u64>()) {
        let r = 1 + ((m - 1) as f64 * frac) as usize;
        let c = cfg(m, r, seed);
        let a = build_scenario(&c).unwrap();
        let b = build_scenario(&c).unwrap();
        prop_assert_eq!(a.centroids(), b.centroids());
        prop_assert_eq!(a.observations(), b.observations());
        prop_assert_eq!(a.nu_sq().to_bits(), b.nu_sq().to_bits());
        prop_assert!((a.covariance_inv() * a.covariance() - DMatrix::identity(m, m)).amax() < 1e-9);
        prop_assert!(a.nu_sq() > 0.0);
        a.validate().unwrap();
    }

    #[test]
    fn nu_sq_grows_with_centroid_scale(seed in any::<u64>(), s in 0.1f64..5.0, ds in 0.01f64..2.0) {
        let mut c = cfg(5, 2, seed);
        c.centroid_scale = s;
        let small = build_scenario(&c).unwrap().nu_sq();
        c.centroid_scale = s + ds;
        prop_assert!(build_scenario(&c).unwrap().nu_sq() > small);
    }
}

#[test]
fn config_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("scenario.cfg");
    std::fs::write(
        &path,
        "# desk-scale setup\nfeature_dim = 10\nnum_classes = 10\nobservation_rank = 1  # one view\ntransmit_snr_db = 10\n",
    )
    .unwrap();
    let c = ScenarioConfig::from_file(&path).unwrap();
    assert_eq!((c.feature_dim, c.num_classes, c.observation_rank), (10, 10, 1));
    assert_eq!(c.num_sensors, ScenarioConfig::default().num_sensors);
    assert_eq!(ScenarioConfig::parse(&c.to_kv_string()).unwrap(), c);

    std::fs::write(&path, "feature_dims = 3\n").unwrap();
    assert!(matches!(ScenarioConfig::from_file(&path), Err(IseaError::Config(_))));
    assert!(ScenarioConfig::from_file(dir.path().join("missing.cfg")).is_err());
}
