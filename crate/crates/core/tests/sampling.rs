use sinrlab::geometry::Cube;
use sinrlab::pointproc::{
    build_directing_measure, empirical_intensity, mark_powers, sample_cox, sample_ppp, thin_by_power,
    DirectingMeasureSpec, Kernel, KernelProfile, MarkedConfiguration, MeasureKind, PowerDistribution,
};
use sinrlab::rng::derive_seed;
use sinrlab::{Error, Window};
use statrs::distribution::{ChiSquared, ContinuousCDF};

fn window(side: f64) -> Window {
    Window::centered(2, side, 0.0).unwrap()
}

fn specs() -> Vec<MeasureKind> {
    vec![
        MeasureKind::Lebesgue,
        MeasureKind::Modulated {
            lambda_in: 3.0,
            lambda_out: 0.5,
            nucleus_intensity: 0.2,
            ball_radius: 1.0,
        },
        MeasureKind::ShotNoise {
            nucleus_intensity: 0.5,
            kernel: Kernel {
                radius: 1.0,
                height: 1.0,
                profile: KernelProfile::Epanechnikov,
            },
        },
        MeasureKind::VoronoiEdge { nucleus_intensity: 1.0 },
    ]
}

/// Two-sample Kolmogorov–Smirnov distance of integer samples.
fn ks_distance(a: &[usize], b: &[usize]) -> f64 {
    let max = a.iter().chain(b).copied().max().unwrap_or(0);
    let (mut ca, mut cb, mut d) = (0usize, 0usize, 0.0f64);
    for k in 0..=max {
        ca += a.iter().filter(|&&x| x == k).count();
        cb += b.iter().filter(|&&x| x == k).count();
        d = d.max((ca as f64 / a.len() as f64 - cb as f64 / b.len() as f64).abs());
    }
    d
}

#[test]
fn lebesgue_cox_counts_match_poisson_counts() {
    let (n, lambda, w) = (1000u64, 1.5, window(4.0));
    let spec = DirectingMeasureSpec::lebesgue();
    let cox: Vec<usize> = (0..n)
        .map(|s| {
            let m = build_directing_measure(&spec, &w, derive_seed(1, "m", s)).unwrap();
            sample_cox(&m, lambda, derive_seed(1, "c", s)).unwrap().len()
        })
        .collect();
    let ppp: Vec<usize> = (0..n).map(|s| sample_ppp(lambda, &w, derive_seed(2, "p", s)).unwrap().len()).collect();
    // two-sample KS critical value at the 1% level
    let crit = 1.628 * (2.0 / n as f64).sqrt();
    let d = ks_distance(&cox, &ppp);
    assert!(d < crit, "KS distance {d} >= {crit}");
}

#[test]
fn sampled_configurations_are_nonequidistant() {
    for s in 0..50 {
        let cfg = sample_ppp(2.0, &window(8.0), s).unwrap();
        assert!(cfg.verify_nonequidistance().is_ok());
    }
    // a unit square has four equal sides
    let square = vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0]];
    let err = MarkedConfiguration::from_points(&square, None, window(4.0)).unwrap_err();
    assert!(matches!(err, Error::Nonequidistance(_)), "{err:?}");
}

#[test]
fn thinning_is_independent_of_position() {
    // retention counts per quadrant, pooled over seeds
    let law = PowerDistribution::Exponential { mean: 1.0 };
    let threshold = 0.7;
    let (mut kept, mut total) = ([0f64; 4], [0f64; 4]);
    for s in 0..200 {
        let cfg = mark_powers(&sample_ppp(2.0, &window(10.0), s).unwrap(), &law, derive_seed(s, "pw", 0)).unwrap();
        let thin = thin_by_power(&cfg, threshold).unwrap();
        let quadrant = |x: &[f64]| (x[0] >= 0.0) as usize + 2 * (x[1] >= 0.0) as usize;
        for x in cfg.points() {
            total[quadrant(x)] += 1.0;
        }
        for x in thin.points() {
            kept[quadrant(x)] += 1.0;
        }
    }
    let rate = kept.iter().sum::<f64>() / total.iter().sum::<f64>();
    let chi2: f64 = (0..4)
        .map(|q| {
            let (e_k, e_d) = (total[q] * rate, total[q] * (1.0 - rate));
            let dropped = total[q] - kept[q];
            (kept[q] - e_k).powi(2) / e_k + (dropped - e_d).powi(2) / e_d
        })
        .sum();
    let crit = ChiSquared::new(3.0).unwrap().inverse_cdf(0.99);
    assert!(chi2 < crit, "chi2 {chi2} >= {crit}");
    assert!((rate - (-threshold as f64).exp()).abs() < 0.01, "rate {rate}");
}

#[test]
fn density_payloads_are_deterministic() {
    let w = Window::centered(2, 10.0, 2.0).unwrap();
    for kind in specs().into_iter().take(3) {
        let spec = DirectingMeasureSpec::new(kind, 1.0);
        let a = build_directing_measure(&spec, &w, 5).unwrap();
        let b = build_directing_measure(&spec, &w, 5).unwrap();
        for k in 0..50 {
            let x = [-6.0 + 0.25 * k as f64, 0.1 * k as f64 - 2.0];
            let (da, db) = (a.density(&x).unwrap(), b.density(&x).unwrap());
            assert_eq!(da.to_bits(), db.to_bits());
            assert_eq!(da.to_bits(), a.density(&x).unwrap().to_bits());
        }
        assert_eq!(a.total_mass.to_bits(), b.total_mass.to_bits());
    }
}

#[test]
fn normalized_measures_have_unit_mean() {
    let (lambda, side) = (5.0, 10.0);
    for kind in specs() {
        let spec = DirectingMeasureSpec::normalized(kind.clone(), 2, 99).unwrap();
        let w = window(side);
        let region = Cube::new(vec![0.0, 0.0], side);
        let xs: Vec<f64> = (0..100)
            .map(|s| {
                let m = build_directing_measure(&spec, &w, derive_seed(s, "m", 0)).unwrap();
                let cfg = sample_cox(&m, lambda, derive_seed(s, "c", 0)).unwrap();
                empirical_intensity(&cfg, &region).unwrap() / lambda
            })
            .collect();
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let se = (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0) / n).sqrt();
        assert!((mean - 1.0).abs() < 3.0 * se, "{kind:?}: mean {mean} se {se}");
    }
}
