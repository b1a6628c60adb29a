use cs_sgld::chain_lab::{
    cheeger_estimate, cheeger_report, double_well, gibbs_expected_loss, gibbs_grid, long_run, mixing_curve,
    quadratic_problem, tv_between, tv_distance, tv_estimate, warm_start_lambda, Cut, GibbsGrid, MixingSpec,
};
use cs_sgld::loss::estimate_constants_seeded;
use cs_sgld::numerics::{streams, RngStream};
use cs_sgld::samplers::{warm_start, SamplerConfig, SamplerMethod};
use cs_sgld::Error;
use proptest::prelude::*;
use statrs::distribution::{ContinuousCDF, Normal};

fn flat(radius: f64, resolution: usize) -> GibbsGrid {
    GibbsGrid::from_energy(1, radius, 0.0, resolution, |_| Ok(0.0)).unwrap()
}

/// Inverse-CDF draws from the piecewise-constant grid density.
fn sample_grid(grid: &GibbsGrid, n: usize, seed: u64) -> Vec<Vec<f64>> {
    let h = grid.spacing();
    let mut cdf = Vec::with_capacity(grid.len());
    let mut acc = 0.0;
    for cell in 0..grid.len() {
        acc += grid.density(cell) * grid.cell_volume();
        cdf.push(acc);
    }
    let mut s = RngStream::new(seed, 40);
    (0..n)
        .map(|_| {
            let u = s.uniform() * acc;
            let cell = cdf.partition_point(|c| *c < u).min(grid.len() - 1);
            vec![grid.center(cell)[0] + (s.uniform() - 0.5) * h]
        })
        .collect()
}

#[test]
fn disk_gaussian_matches_closed_form() {
    // centered disk: Z = π/β (1 − exp(−βR²))
    let (beta, radius) = (1.5, 6.0);
    let problem = quadratic_problem(&[0.0, 0.0], radius).unwrap();
    let grid = gibbs_grid(&problem, beta, None).unwrap();
    assert_eq!(grid.d(), 2);
    let z = std::f64::consts::PI / beta * (1.0 - (-beta * radius * radius).exp());
    let mut sup: f64 = 0.0;
    for (cell, c) in grid.centers().enumerate() {
        let exact = (-beta * (c[0] * c[0] + c[1] * c[1])).exp() / z;
        sup = sup.max((grid.density(cell) - exact).abs());
    }
    assert!(sup < 1e-6, "sup {sup}");
    assert!((grid.total_mass() - 1.0).abs() < 1e-6);
}

#[test]
fn log_partition_converges_under_resolution_doubling() {
    let problem = double_well(1.0, 3.0).unwrap();
    for beta in [0.5, 2.0, 8.0] {
        let a = gibbs_grid(&problem, beta, Some(2048)).unwrap().log_partition();
        let b = gibbs_grid(&problem, beta, Some(4096)).unwrap().log_partition();
        assert!(((a - b) / b).abs() < 1e-4, "beta {beta}: {a} vs {b}");
    }
    let problem = quadratic_problem(&[0.5, -0.3], 2.0).unwrap();
    let a = gibbs_grid(&problem, 2.0, Some(256)).unwrap().log_partition();
    let b = gibbs_grid(&problem, 2.0, Some(512)).unwrap().log_partition();
    assert!(((a - b) / b).abs() < 1e-3, "{a} vs {b}");
}

#[test]
fn every_grid_is_normalized() {
    for beta in [0.0, 1.0, 30.0] {
        let g1 = gibbs_grid(&double_well(2.0, 3.0).unwrap(), beta, None).unwrap();
        let g2 = gibbs_grid(&quadratic_problem(&[1.0, 0.0], 2.0).unwrap(), beta, Some(64)).unwrap();
        for g in [g1, g2] {
            assert!((g.total_mass() - 1.0).abs() < 1e-6);
            assert!(g.densities().iter().all(|p| *p >= 0.0));
        }
    }
}

#[test]
fn self_sampling_is_close_in_tv() {
    let problem = quadratic_problem(&[0.7], 3.0).unwrap();
    let grid = gibbs_grid(&problem, 4.0, None).unwrap();
    let samples = sample_grid(&grid, 1_000_000, 1);
    let tv = tv_distance(&samples, &grid).unwrap();
    assert!(tv <= 0.02, "tv {tv}");
}

#[test]
fn identical_samples_give_identical_tv() {
    let grid = gibbs_grid(&double_well(1.0, 3.0).unwrap(), 2.0, None).unwrap();
    let a = sample_grid(&grid, 5000, 2);
    let b = a.clone();
    assert_eq!(tv_distance(&a, &grid).unwrap(), tv_distance(&b, &grid).unwrap());
    assert_eq!(tv_between(&a, &b, &grid, None).unwrap(), 0.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn tv_between_is_a_metric(
        a in prop::collection::vec(-2.5f64..2.5, 1..200),
        b in prop::collection::vec(-2.5f64..2.5, 1..200),
        c in prop::collection::vec(-2.5f64..2.5, 1..200),
        bins in prop::sample::select(vec![None, Some(8), Some(64)]),
    ) {
        let grid = flat(2.0, 256);
        let wrap = |v: &Vec<f64>| v.iter().map(|x| vec![*x]).collect::<Vec<_>>();
        let (a, b, c) = (wrap(&a), wrap(&b), wrap(&c));
        let ab = tv_between(&a, &b, &grid, bins).unwrap();
        let ba = tv_between(&b, &a, &grid, bins).unwrap();
        let bc = tv_between(&b, &c, &grid, bins).unwrap();
        let ac = tv_between(&a, &c, &grid, bins).unwrap();
        prop_assert_eq!(ab, ba);
        prop_assert!((0.0..=1.0).contains(&ab));
        prop_assert!(ac <= ab + bc + 4.0 * f64::EPSILON);
        prop_assert_eq!(tv_between(&a, &a, &grid, bins).unwrap(), 0.0);
    }

    #[test]
    fn cheeger_is_nonnegative(center in -2.0f64..2.0, beta in 0.0f64..20.0) {
        let grid = gibbs_grid(&quadratic_problem(&[center], 2.0).unwrap(), beta, Some(256)).unwrap();
        prop_assert!(cheeger_estimate(&grid).unwrap() >= 0.0);
    }
}

#[test]
fn cheeger_scales_with_dilation() {
    for radius in [0.5, 1.0, 1.5] {
        let a = cheeger_estimate(&flat(radius, 2048)).unwrap();
        let b = cheeger_estimate(&flat(2.0 * radius, 2048)).unwrap();
        assert!((a / b - 2.0).abs() < 1e-9, "R={radius}: {a} {b}");
    }
}

#[test]
fn bimodal_cheeger_decreases_with_beta() {
    let problem = double_well(2.0, 3.0).unwrap();
    let rhos: Vec<f64> = [1.0, 4.0, 16.0]
        .iter()
        .map(|&b| cheeger_estimate(&gibbs_grid(&problem, b, None).unwrap()).unwrap())
        .collect();
    assert!(rhos[0] > rhos[1] && rhos[1] > rhos[2], "{rhos:?}");
    let report = cheeger_report(&gibbs_grid(&problem, 16.0, None).unwrap()).unwrap();
    match report.cut {
        Cut::Point { t } => assert!(t.abs() < 0.01, "cut at {t}"),
        other => panic!("unexpected cut {other:?}"),
    }
}

#[test]
fn log_concave_cut_sits_at_the_median() {
    for (center, beta) in [(0.0, 1.0), (0.8, 4.0), (-1.2, 0.5)] {
        let grid = gibbs_grid(&quadratic_problem(&[center], 3.0).unwrap(), beta, None).unwrap();
        let mut acc = 0.0;
        let mut median = 0.0;
        for cell in 0..grid.len() {
            acc += grid.density(cell) * grid.cell_volume();
            if acc >= 0.5 {
                median = grid.center(cell)[0];
                break;
            }
        }
        let Cut::Point { t } = cheeger_report(&grid).unwrap().cut else {
            panic!("d=1 cut must be a point");
        };
        assert!((t - median).abs() <= 1.01 * grid.spacing(), "center {center}: cut {t} median {median}");
    }
}

#[test]
fn flat_target_lambda_is_peak_over_uniform_level() {
    let radius = 2.0;
    let grid = GibbsGrid::from_energy(1, radius, 1.0, 2048, |_| Ok(0.0)).unwrap();
    let (l, beta) = (3.0, 2.0);
    let sd = 1.0 / (2.0 * l * beta as f64).sqrt();
    let normal = Normal::new(0.0, sd).unwrap();
    let peak = 1.0 / (sd * (2.0 * std::f64::consts::PI).sqrt() * (normal.cdf(radius) - normal.cdf(-radius)));
    let expected = peak * 2.0 * radius;
    let lambda = warm_start_lambda(&grid, l, beta).unwrap();
    assert!((lambda / expected - 1.0).abs() < 1e-4, "{lambda} vs {expected}");
}

#[test]
fn lambda_is_resolution_invariant() {
    let problem = double_well(1.0, 3.0).unwrap();
    for (l, beta) in [(1.0, 2.0), (4.0, 1.0)] {
        let a = warm_start_lambda(&gibbs_grid(&problem, beta, Some(2048)).unwrap(), l, beta).unwrap();
        let b = warm_start_lambda(&gibbs_grid(&problem, beta, Some(4096)).unwrap(), l, beta).unwrap();
        assert!((a / b - 1.0).abs() < 0.01, "{a} vs {b}");
    }
}

#[test]
fn lambda_with_vanishing_target_is_an_error() {
    let grid = GibbsGrid::from_energy(1, 1.0, 1.0, 64, |z| Ok(if z[0] > 0.5 { f64::INFINITY } else { 0.0 })).unwrap();
    assert!(matches!(warm_start_lambda(&grid, 1.0, 1.0), Err(Error::NonFinite(_))));
}

#[test]
fn expected_loss_decreases_and_respects_bound() {
    let problem = double_well(1.0, 3.0).unwrap();
    let l_hat = estimate_constants_seeded(&problem, 200, 0).unwrap().l;
    let mut last = f64::INFINITY;
    for beta in [1.0, 10.0, 100.0] {
        let el = gibbs_expected_loss(&gibbs_grid(&problem, beta, None).unwrap(), &problem).unwrap();
        assert!(el < last);
        last = el;
    }
    for beta in [3.0, 10.0, 30.0, 100.0, 300.0] {
        if beta * l_hat < std::f64::consts::E {
            continue;
        }
        let el = gibbs_expected_loss(&gibbs_grid(&problem, beta, None).unwrap(), &problem).unwrap();
        let bound = 10.0 / beta * (beta * l_hat).ln();
        assert!(el <= bound, "beta {beta}: {el} > {bound}");
    }
}

#[test]
fn disk_quadratic_expected_loss_is_d_over_two_beta() {
    let problem = quadratic_problem(&[0.0, 0.0], 5.0).unwrap();
    for beta in [1.0, 10.0] {
        let el = gibbs_expected_loss(&gibbs_grid(&problem, beta, None).unwrap(), &problem).unwrap();
        assert!((el * beta - 1.0).abs() < 0.02, "beta {beta}: {el}");
    }
}

fn config_for(problem: &cs_sgld::loss::Problem, eta: f64, beta: f64) -> SamplerConfig {
    SamplerConfig::new(eta, beta, estimate_constants_seeded(problem, 200, 0).unwrap().l, 0)
}

#[test]
fn initial_tv_is_positive_and_curve_is_deterministic() {
    let problem = quadratic_problem(&[1.0], 3.0).unwrap();
    let config = config_for(&problem, 0.01, 4.0);
    let grid = gibbs_grid(&problem, 4.0, None).unwrap();
    let spec = MixingSpec {
        method: SamplerMethod::Sgld,
        n_chains: 500,
        checkpoints: vec![0, 50],
        tv_bins: Some(64),
        seed: 3,
        warm_start_beta: None,
    };
    let a = mixing_curve(&problem, &config, &grid, &spec).unwrap();
    assert!(a[0].tv > 0.5);
    assert!(a[1].tv < a[0].tv);
    assert_eq!(a, mixing_curve(&problem, &config, &grid, &spec).unwrap());
}

#[test]
fn adjusted_chain_converges_below_the_langevin_floor() {
    let problem = double_well(1.0, 3.0).unwrap();
    let config = config_for(&problem, 0.5, 2.0);
    let grid = gibbs_grid(&problem, 2.0, None).unwrap();
    let curve = |method| {
        let spec = MixingSpec {
            method,
            n_chains: 2000,
            checkpoints: vec![0, 5000],
            tv_bins: Some(64),
            seed: 0,
            warm_start_beta: None,
        };
        *mixing_curve(&problem, &config, &grid, &spec).unwrap().last().unwrap()
    };
    let mh = curve(SamplerMethod::MhSgld);
    let sgld = curve(SamplerMethod::Sgld);
    assert!(mh.tv <= sgld.tv + 2.0 * sgld.mc_stderr.max(mh.mc_stderr), "mh {mh:?} sgld {sgld:?}");
}

#[test]
fn doubling_step_size_raises_the_squared_floor() {
    let problem = double_well(1.0, 3.0).unwrap();
    let grid = gibbs_grid(&problem, 2.0, None).unwrap();
    let floor = |eta: f64| -> f64 {
        let config = config_for(&problem, eta, 2.0);
        let tvs: Vec<f64> = (0..3u64)
            .map(|seed| {
                let mut s = RngStream::new(seed, streams::CHAIN);
                let z0 = warm_start(&problem, 2.0, config.lipschitz, &mut s).unwrap();
                let path = long_run(&problem, SamplerMethod::Sgld, &config, z0, 1_000_000, &mut s).unwrap();
                tv_estimate(&path, &grid, Some(64)).unwrap().tv
            })
            .collect();
        tvs.iter().sum::<f64>() / 3.0
    };
    let (a, b) = (floor(0.05), floor(0.1));
    let ratio = (b / a).powi(2);
    assert!((1.1..=4.0).contains(&ratio), "floors {a} {b}, squared ratio {ratio}");
}
