mod common;

use common::{gaussian, ks_uniform_pvalue, median, two_gaussian_toy};
use ndarray::{Array1, Array2};
use proptest::prelude::*;
use sigpal::engines::LabelPlacement;
use sigpal::prelude::*;
use sigpal::sim::GeneratorSpec as Gen;
use sigpal::spectral::simulate_null;
use Label::{Neg, Pos, Unlabeled};

fn two_means_cfg(n_sim: usize) -> SimulationTestConfig {
    SimulationTestConfig {
        n_sim,
        ..SimulationTestConfig::new(AssignerSpec::new(AssignerKind::TwoMeans))
    }
}

fn cop_cfg(n_sim: usize) -> SimulationTestConfig {
    SimulationTestConfig {
        n_sim,
        ..SimulationTestConfig::new(AssignerSpec::new(AssignerKind::CopKmeans))
    }
}

fn spiked(d: usize, top: f64) -> EigenSpectrum {
    let mut values = vec![1.0; d];
    values[0] = top;
    EigenSpectrum::known(values).unwrap()
}

fn fully_labeled(ds: &PartiallyLabeledDataset, truth: &[Label]) -> PartiallyLabeledDataset {
    ds.relabel(truth.to_vec()).unwrap()
}

fn in_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .unwrap()
        .install(f)
}

#[test]
fn pvalue_edge_cases() {
    assert_eq!(
        empirical_pvalue(-1.0, &[0.0, 1.0], Comparison::Less, false).unwrap(),
        0.0
    );
    assert_eq!(
        empirical_pvalue(3.0, &[3.0, 3.0, 3.0], Comparison::Less, false).unwrap(),
        0.0
    );
    assert_eq!(
        empirical_pvalue(2.5, &[1.0, 2.0, 3.0, 4.0], Comparison::Less, false).unwrap(),
        0.5
    );
    assert_eq!(
        empirical_pvalue(9.0, &[1.0, 2.0], Comparison::Greater, false).unwrap(),
        0.0
    );
    assert_eq!(
        empirical_pvalue(9.0, &[1.0, 2.0], Comparison::Greater, true).unwrap(),
        1.0 / 3.0
    );
    assert!(matches!(
        empirical_pvalue(0.0, &[], Comparison::Greater, false),
        Err(Error::EmptyNull)
    ));
}

proptest! {
    #[test]
    fn pvalue_matches_count(obs in -2.0..2.0f64, nulls in prop::collection::vec(-2.0..2.0f64, 1..50), add_one: bool) {
        for rule in [Comparison::Less, Comparison::Greater] {
            let count = nulls.iter().filter(|&&v| match rule {
                Comparison::Less => v < obs,
                Comparison::Greater => v > obs,
            }).count();
            let expected = if add_one {
                (count + 1) as f64 / (nulls.len() + 1) as f64
            } else {
                count as f64 / nulls.len() as f64
            };
            let p = empirical_pvalue(obs, &nulls, rule, add_one).unwrap();
            prop_assert_eq!(p, expected);
            prop_assert!((0.0..=1.0).contains(&p));
        }
    }
}

#[test]
fn sigpal_without_labels_is_sigclust() {
    for s in 0..10u64 {
        let x = gaussian(15, 25, 40 + s);
        let ds = PartiallyLabeledDataset::unlabeled(x.clone()).unwrap();
        let cfg = two_means_cfg(30);
        let a = sigclust(x.view(), &cfg, Seed(s)).unwrap();
        let b = sigpal(&ds, &cfg, Seed(s)).unwrap();
        assert_eq!(a.observed_stat.to_bits(), b.observed_stat.to_bits());
        assert_eq!(a.p_value.to_bits(), b.p_value.to_bits());
        let bits = |r: &TestResult| r.null_stats.iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a), bits(&b));
    }
}

#[test]
fn results_do_not_depend_on_thread_count() {
    let (ds, truth) = two_gaussian_toy(40, 7);
    let cfg = cop_cfg(40);
    let one = in_pool(1, || sigpal(&ds, &cfg, Seed(11)).unwrap());
    let four = in_pool(4, || sigpal(&ds, &cfg, Seed(11)).unwrap());
    assert_eq!(one, four);
    let full = fully_labeled(&ds, &truth);
    let dcfg = DiPropermConfig {
        n_perm: 50,
        ..Default::default()
    };
    let one = in_pool(1, || diproperm(&full, &dcfg, Seed(2)).unwrap());
    let four = in_pool(3, || diproperm(&full, &dcfg, Seed(2)).unwrap());
    assert_eq!(one, four);
    assert_eq!(
        sigpal(&ds, &cfg, Seed(11)).unwrap(),
        sigpal(&ds, &cfg, Seed(11)).unwrap()
    );
}

#[test]
fn single_simulation_gives_zero_or_one() {
    for s in 0..5 {
        let x = gaussian(12, 6, s);
        let r = sigclust(x.view(), &two_means_cfg(1), Seed(s)).unwrap();
        assert!(r.p_value == 0.0 || r.p_value == 1.0);
        assert_eq!(r.null_stats.len(), 1);
        assert_eq!(r.p_value, if r.null_stats[0] < r.observed_stat { 1.0 } else { 0.0 });
    }
}

#[test]
fn single_permutation_below_observed_gives_zero() {
    let x = Array2::from_shape_fn((10, 2), |(i, j)| {
        if i < 5 {
            5.0 + j as f64 + 0.1 * i as f64
        } else {
            -0.1 * i as f64
        }
    });
    let labels = (0..10).map(|i| if i < 5 { Pos } else { Neg }).collect();
    let ds = PartiallyLabeledDataset::new(x, labels).unwrap();
    let cfg = DiPropermConfig {
        n_perm: 1,
        ..Default::default()
    };
    let r = diproperm(&ds, &cfg, Seed(0)).unwrap();
    assert!(r.null_stats[0] < r.observed_stat);
    assert_eq!(r.p_value, 0.0);
}

#[test]
fn shifting_rows_keeps_the_p_value() {
    let (ds, _) = two_gaussian_toy(30, 3);
    let shift = Array1::from(vec![1e3, -250.0]);
    let moved = PartiallyLabeledDataset::new(&ds.x() + &shift, ds.labels().to_vec()).unwrap();
    let cfg = SimulationTestConfig {
        eigen: EigenMethod::Known(EigenSpectrum::known(vec![1.5, 1.0]).unwrap()),
        ..cop_cfg(50)
    };
    let a = sigpal(&ds, &cfg, Seed(5)).unwrap();
    let b = sigpal(&moved, &cfg, Seed(5)).unwrap();
    assert!((a.observed_stat - b.observed_stat).abs() < 1e-9);
    assert_eq!(a.null_stats, b.null_stats);
    assert_eq!(a.p_value, b.p_value);

    let c = sigclust(ds.x(), &two_means_cfg(50), Seed(5)).unwrap();
    let d = sigclust(moved.x(), &two_means_cfg(50), Seed(5)).unwrap();
    assert!((c.observed_stat - d.observed_stat).abs() < 1e-9);
    assert_eq!(c.p_value, d.p_value);
}

#[test]
fn sigclust_known_spectrum_pvalues_are_uniform() {
    let spectrum = spiked(20, 10.0);
    let cfg = SimulationTestConfig {
        eigen: EigenMethod::Known(spectrum.clone()),
        ..two_means_cfg(100)
    };
    let p: Vec<f64> = (0..200u64)
        .map(|s| {
            let x = simulate_null(&spectrum, 20, &mut Seed(s).child(1).rng());
            sigclust(x.view(), &cfg, Seed(s).child(2)).unwrap().p_value
        })
        .collect();
    let ks = ks_uniform_pvalue(&p);
    assert!(ks > 0.01, "KS p = {ks}");
}

#[test]
fn sigpal_known_spectrum_pvalues_are_uniform() {
    let spectrum = spiked(20, 10.0);
    let cfg = SimulationTestConfig {
        eigen: EigenMethod::Known(spectrum.clone()),
        ..cop_cfg(100)
    };
    let p: Vec<f64> = (0..200u64)
        .map(|s| {
            let x = simulate_null(&spectrum, 20, &mut Seed(s).child(1).rng());
            let labels = (0..20)
                .map(|i| match i {
                    0..=5 if i % 2 == 0 => Pos,
                    0..=5 => Neg,
                    _ => Unlabeled,
                })
                .collect();
            let ds = PartiallyLabeledDataset::new(x, labels).unwrap();
            sigpal(&ds, &cfg, Seed(s).child(2)).unwrap().p_value
        })
        .collect();
    let ks = ks_uniform_pvalue(&p);
    assert!(ks > 0.01, "KS p = {ks}");
}

#[test]
fn diproperm_holds_its_level_on_exchangeable_classes() {
    let cfg = DiPropermConfig {
        n_perm: 100,
        ..Default::default()
    };
    let rejections = (0..200u64)
        .filter(|&s| {
            let x = gaussian(20, 30, 9000 + s);
            let labels = (0..20).map(|i| if i % 2 == 0 { Pos } else { Neg }).collect();
            let ds = PartiallyLabeledDataset::new(x, labels).unwrap();
            diproperm(&ds, &cfg, Seed(s)).unwrap().rejects(0.05)
        })
        .count();
    let rate = rejections as f64 / 200.0;
    assert!((0.01..=0.10).contains(&rate), "rate {rate}");
}

#[test]
fn fig1_regime_sigclust_misses_the_difference() {
    let seeds = 40;
    let large = (0..seeds)
        .filter(|&s| {
            let (ds, _) = two_gaussian_toy(100, s);
            sigclust(ds.x(), &two_means_cfg(100), Seed(s)).unwrap().p_value > 0.05
        })
        .count();
    assert!(large as f64 >= 0.8 * seeds as f64, "{large}/{seeds}");
}

#[test]
fn fig1_regime_sigpal_finds_the_difference() {
    let seeds = 40;
    let p: Vec<f64> = (0..seeds)
        .map(|s| {
            let (ds, _) = two_gaussian_toy(100, s);
            assert_eq!(ds.n_labeled(), 50);
            sigpal(&ds, &cop_cfg(100), Seed(s)).unwrap().p_value
        })
        .collect();
    let small = p.iter().filter(|&&v| v < 0.05).count();
    assert!(
        small as f64 >= 0.7 * seeds as f64,
        "{small}/{seeds}, median {}",
        median(&p)
    );
}

#[test]
fn fig1_regime_diproperm_gives_zero() {
    let seeds = 50;
    let cfg = DiPropermConfig {
        n_perm: 1000,
        ..Default::default()
    };
    let zero = (0..seeds)
        .filter(|&s| {
            let (ds, truth) = two_gaussian_toy(120, s);
            diproperm(&fully_labeled(&ds, &truth), &cfg, Seed(s)).unwrap().p_value == 0.0
        })
        .count();
    assert!(zero as f64 >= 0.9 * seeds as f64, "{zero}/{seeds}");
}

#[test]
fn t_statistic_agrees_with_welch_formula() {
    let x = ndarray::array![[1.0, 0.0], [2.0, 0.0], [4.0, 0.0], [-1.0, 0.0], [-2.0, 0.0], [0.0, 0.0]];
    let labels = vec![Pos, Pos, Pos, Neg, Neg, Neg];
    let ds = PartiallyLabeledDataset::new(x, labels).unwrap();
    let cfg = DiPropermConfig {
        statistic: Statistic::TStat,
        n_perm: 10,
        ..Default::default()
    };
    let r = diproperm(&ds, &cfg, Seed(0)).unwrap();
    // Direction is (1, 0); projections are the first column.
    let (a, b) = ([1.0, 2.0, 4.0], [-1.0, -2.0, 0.0]);
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let var = |v: &[f64]| {
        let m = mean(v);
        v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (v.len() - 1) as f64
    };
    let t = (mean(&a) - mean(&b)) / (var(&a) / 3.0 + var(&b) / 3.0).sqrt();
    assert!((r.observed_stat - t).abs() < 1e-12, "{} vs {t}", r.observed_stat);

    let md = diproperm(&ds, &DiPropermConfig::default(), Seed(0)).unwrap();
    assert!((md.observed_stat - (mean(&a) - mean(&b))).abs() < 1e-12);
}

#[test]
fn input_errors() {
    let tiny = gaussian(2, 3, 0);
    assert!(matches!(
        sigclust(tiny.view(), &two_means_cfg(5), Seed(0)),
        Err(Error::TooFewRows { .. })
    ));
    let flat = Array2::from_elem((5, 3), 2.0);
    assert!(sigclust(flat.view(), &two_means_cfg(5), Seed(0)).is_err());

    let labels = vec![Pos, Pos, Unlabeled, Unlabeled, Unlabeled];
    let ds = PartiallyLabeledDataset::new(gaussian(5, 3, 1), labels).unwrap();
    let s3 = SimulationTestConfig::new(AssignerSpec::new(AssignerKind::S3lda));
    assert!(matches!(sigpal(&ds, &s3, Seed(0)), Err(Error::SingleClass(_))));
    assert!(sigpal(&ds, &cop_cfg(0), Seed(0)).is_err());

    let one_each = PartiallyLabeledDataset::new(gaussian(2, 3, 2), vec![Pos, Neg]).unwrap();
    let t = DiPropermConfig {
        statistic: Statistic::TStat,
        ..Default::default()
    };
    assert!(matches!(diproperm(&one_each, &t, Seed(0)), Err(Error::SingleClass(_))));
    assert!(diproperm(&one_each, &DiPropermConfig::default(), Seed(0)).is_ok());
}

#[test]
fn label_placement_variants_run_and_are_recorded() {
    let (ds, _) = two_gaussian_toy(30, 1);
    let cfg = SimulationTestConfig {
        label_placement: LabelPlacement::UniformSigns,
        ..cop_cfg(20)
    };
    let r = sigpal(&ds, &cfg, Seed(0)).unwrap();
    assert_eq!(r.metadata.label_placement, Some(LabelPlacement::UniformSigns));
    assert_eq!(r.metadata.n_labeled, ds.n_labeled());
    assert!(r.metadata.centered);
    let r = sigpal(&ds, &cop_cfg(20), Seed(0)).unwrap();
    assert_eq!(r.metadata.label_placement, Some(LabelPlacement::PreserveCounts));
    assert_eq!(r.metadata.noise_estimator.as_deref(), Some("mad-of-centered-entries"));
}

#[test]
fn mixed_assigners_follow_the_configuration() {
    let spec = Gen::mixture_one_direction(30, 40, 4.0, 1, 1.0, 5);
    let (ds, _) = gen_mixture(&spec, Seed(8)).unwrap();
    let mut cfg = SimulationTestConfig::new(AssignerSpec::new(AssignerKind::S3lda));
    cfg.sim_assigner = Some(AssignerSpec::new(AssignerKind::L1Lda));
    cfg.n_sim = 10;
    let r = sigpal(&ds, &cfg, Seed(3)).unwrap();
    assert_eq!(r.metadata.assigner.unwrap().kind, AssignerKind::S3lda);
    assert_eq!(r.metadata.sim_assigner.unwrap().kind, AssignerKind::L1Lda);
    assert_eq!(r.null_stats.len(), 10);
}

#[test]
fn results_serialize_and_dump_nulls() {
    let x = gaussian(10, 4, 3);
    let r = sigclust(x.view(), &two_means_cfg(7), Seed(9)).unwrap();
    let json = serde_json::to_string(&r).unwrap();
    let back: TestResult = serde_json::from_str(&json).unwrap();
    assert_eq!(back, r);
    let v: serde_json::Value = serde_json::from_str(&json).unwrap();
    for key in [
        "method",
        "observed_stat",
        "null_stats",
        "p_value",
        "n_sim_or_perm",
        "seed",
        "metadata",
    ] {
        assert!(v.get(key).is_some(), "missing {key}");
    }
    assert_eq!(v["method"], "sigclust");

    let mut buf = Vec::new();
    r.write_null_stats(&mut buf).unwrap();
    let parsed: Vec<f64> = String::from_utf8(buf)
        .unwrap()
        .lines()
        .map(|l| l.parse().unwrap())
        .collect();
    assert_eq!(parsed, r.null_stats);
}
