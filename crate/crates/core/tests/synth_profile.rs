mod common;

use common::*;
use idrank_core::ghs::{read_ghs, write_ghs, HiddenStateSet, Metadata};
use idrank_core::stability::StabilityOptions;
use idrank_core::{
    compute_profile, generate, profile_diff, Error, EstimatorOptions, LayerProfile, ManifoldKind,
    ManifoldSpec, PointCloud, ProfileOptions,
};
use nalgebra::DMatrix;
use proptest::prelude::*;

fn numerical_rank(cloud: &PointCloud) -> usize {
    let (n, dim) = (cloud.n_points(), cloud.ambient_dim());
    let mut m = DMatrix::from_row_slice(n, dim, cloud.data());
    let mean = m.row_mean();
    for mut row in m.row_iter_mut() {
        row -= &mean;
    }
    let sv = m.singular_values();
    let top = sv.max();
    sv.iter().filter(|&&s| s > 1e-8 * top).count()
}

#[test]
fn flat_clouds_have_exact_rank() {
    for (kind, d, dim) in [
        (ManifoldKind::Hyperplane, 2, 10),
        (ManifoldKind::Hyperplane, 4, 6),
        (ManifoldKind::Hypercube, 3, 20),
        (ManifoldKind::Hypercube, 1, 5),
    ] {
        let spec = ManifoldSpec {
            kind,
            ..ManifoldSpec::hyperplane(d, dim, 400, 13)
        };
        assert_eq!(numerical_rank(&generate(&spec).unwrap()), d, "{kind} d={d} D={dim}");
    }
}

#[test]
fn noise_fills_the_ambient_space() {
    let spec = ManifoldSpec::hyperplane(2, 6, 400, 13).with_noise(0.05);
    assert_eq!(numerical_rank(&generate(&spec).unwrap()), 6);
}

#[test]
fn estimator_round_trip_per_kind() {
    let cases = [
        ManifoldSpec::helix(5000, 2),
        ManifoldSpec::hyperplane(2, 10, 5000, 3),
        ManifoldSpec::hyperplane(4, 12, 5000, 3),
        ManifoldSpec::hypercube(3, 9, 5000, 3),
        ManifoldSpec::hypercube(5, 15, 5000, 3),
    ];
    for spec in cases {
        let cloud = generate(&spec).unwrap();
        for opts in [EstimatorOptions::mle(), EstimatorOptions::regression(0.1)] {
            let est = idrank_core::estimate_id(&cloud, &opts).unwrap();
            assert!(
                rel_err(est.d_hat, spec.intrinsic_dim as f64) <= 0.10,
                "{} d={} {:?}: {}",
                spec.kind,
                spec.intrinsic_dim,
                opts.method,
                est.d_hat
            );
        }
    }
}

fn layered(dims: &[usize], n: usize) -> HiddenStateSet {
    let clouds: Vec<PointCloud> = dims
        .iter()
        .enumerate()
        .map(|(i, &d)| generate(&ManifoldSpec::hyperplane(d, 16, n, 50 + i as u64)).unwrap())
        .collect();
    let metadata = Metadata {
        model: "synthetic".into(),
        dataset: "planes".into(),
        pooling: "mean".into(),
        tags: vec![],
    };
    HiddenStateSet::from_clouds(&clouds, metadata).unwrap()
}

#[test]
fn profile_recovers_layer_dimensions() {
    let set = layered(&[2, 3, 3], 5000);
    let profile = compute_profile(&set, &ProfileOptions::default()).unwrap();
    assert_eq!(profile.d.len(), 3);
    for (got, want) in profile.d.iter().zip([2.0, 3.0, 3.0]) {
        assert!(rel_err(*got, want) <= 0.10, "{got} vs {want}");
    }
    assert!((profile.mean_id - profile.d.iter().sum::<f64>() / 3.0).abs() < 1e-12);
    assert_eq!(profile.metadata.model, "synthetic");
    profile.validate().unwrap();
}

#[test]
fn identical_layers_give_identical_estimates() {
    let cloud = generate(&ManifoldSpec::hyperplane(3, 8, 1500, 4)).unwrap();
    let set = HiddenStateSet::from_clouds(&[cloud.clone(), cloud.clone(), cloud], Metadata::default()).unwrap();
    let profile = compute_profile(&set, &ProfileOptions::default()).unwrap();
    assert!(profile.d.iter().all(|v| v.to_bits() == profile.d[0].to_bits()));
}

#[test]
fn profile_with_stability_and_cap() {
    let set = layered(&[2, 2], 3000);
    let opts = ProfileOptions {
        estimator: EstimatorOptions::mle(),
        sample_cap: Some(2000),
        seed: 3,
        stability: Some(StabilityOptions {
            n_scales: 3,
            repeats_per_scale: 3,
            seed: 3,
            estimator: EstimatorOptions::mle(),
        }),
    };
    let a = compute_profile(&set, &opts).unwrap();
    let reports = a.stability.as_ref().unwrap();
    assert_eq!(reports.len(), 2);
    assert_eq!(reports[0].subset_sizes, vec![2000, 1000, 500]);
    for (d, r) in a.d.iter().zip(reports) {
        assert_eq!(*d, r.selected_d);
    }
    assert_eq!(a, compute_profile(&set, &opts).unwrap());
}

#[test]
fn failing_layer_is_named() {
    let good = generate(&ManifoldSpec::hyperplane(2, 3, 20, 1)).unwrap();
    let flat = PointCloud::new(3, vec![1.0; 60]).unwrap();
    let set = HiddenStateSet::from_clouds(&[good, flat], Metadata::default()).unwrap();
    let err = compute_profile(&set, &ProfileOptions::default()).unwrap_err();
    assert!(matches!(err, Error::Layer { layer: 1, .. }), "{err}");
    assert_eq!(err.code(), "TooFewPoints");
}

#[test]
fn ghs_file_round_trip_feeds_profile() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("states.ghs");
    let set = layered(&[1, 2], 800);
    write_ghs(&set, &path).unwrap();
    let back = read_ghs(&path).unwrap();
    assert_eq!(back, set);
    let p = compute_profile(&back, &ProfileOptions::default()).unwrap();
    assert_eq!(p, compute_profile(&set, &ProfileOptions::default()).unwrap());
}

#[test]
fn missing_file_is_io_error() {
    let err = read_ghs("/nonexistent/states.ghs").unwrap_err();
    assert_eq!(err.code(), "IoError");
}

#[test]
fn profile_json_round_trip() {
    let set = layered(&[2, 3], 600);
    let p = compute_profile(&set, &ProfileOptions::default()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("p.json");
    std::fs::write(&path, p.to_json().unwrap()).unwrap();
    assert_eq!(LayerProfile::load(&path).unwrap(), p);
    let text = p.to_json().unwrap();
    for field in ["\"d\"", "\"estimates\"", "\"mean_id\"", "\"metadata\"", "\"d_hat\"", "\"n_used\""] {
        assert!(text.contains(field), "missing {field}");
    }
}

proptest! {
    #[test]
    fn diff_matches_elementwise_subtraction(
        pair in (1usize..30).prop_flat_map(|n| (
            prop::collection::vec(0.1f64..50.0, n),
            prop::collection::vec(0.1f64..50.0, n),
        ))
    ) {
        let (a, b) = pair;
        let before = LayerProfile::from_values(a.clone(), Metadata::default()).unwrap();
        let after = LayerProfile::from_values(b.clone(), Metadata::default()).unwrap();
        let diff = profile_diff(&before, &after).unwrap();
        for i in 0..a.len() {
            prop_assert_eq!(diff.delta[i], b[i] - a[i]);
            prop_assert_eq!(diff.layers_compressed.contains(&i), b[i] < a[i]);
        }
        prop_assert!((diff.mean_before - before.mean_id).abs() < 1e-12);
        prop_assert!((diff.mean_after - after.mean_id).abs() < 1e-12);
        let same = profile_diff(&before, &before).unwrap();
        prop_assert!(same.delta.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn synth_is_pure(seed in any::<u64>(), n in 1usize..200, d in 1usize..4, extra in 0usize..4) {
        let spec = ManifoldSpec::hypercube(d, d + extra, n, seed).with_noise(0.1);
        prop_assert_eq!(generate(&spec).unwrap(), generate(&spec).unwrap());
    }
}
