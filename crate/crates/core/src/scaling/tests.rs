use approx::assert_abs_diff_eq;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use super::*;

fn grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

fn curve(length: usize, ws: &[f64], ys: &[f64]) -> DisorderCurve {
    let points = ws
        .iter()
        .zip(ys)
        .map(|(&w, &mean)| CurvePoint {
            w,
            mean,
            stderr: 0.01,
            n: 10,
        })
        .collect();
    DisorderCurve::new(length, Indicator::NTot, points).unwrap()
}

fn cubic(w: f64) -> f64 {
    0.3 - 1.2 * w + 0.25 * w * w - 0.04 * w * w * w
}

#[test]
fn curve_validation() {
    let p = |w| CurvePoint {
        w,
        mean: 0.0,
        stderr: 0.0,
        n: 1,
    };
    assert!(DisorderCurve::new(8, Indicator::SG, vec![p(1.0), p(2.0)]).is_ok());
    assert!(DisorderCurve::new(8, Indicator::SG, vec![p(2.0), p(1.0)]).is_err());
    assert!(DisorderCurve::new(8, Indicator::SG, vec![p(1.0), p(1.0)]).is_err());
    let zero = CurvePoint { n: 0, ..p(3.0) };
    assert!(DisorderCurve::new(8, Indicator::SG, vec![p(1.0), zero]).is_err());
    for ind in Indicator::ALL {
        assert_eq!(Indicator::parse(ind.name()), Some(ind));
    }
}

#[test]
fn cubic_is_recovered() {
    let ws = grid(0.5, 8.0, 20);
    let ys: Vec<f64> = ws.iter().map(|&w| cubic(w)).collect();
    let fit = fit_polynomial_select_degree(&curve(8, &ws, &ys), 9, 1).unwrap();
    assert_eq!(fit.degree, 3);
    assert!(fit.stable);
    let c = fit.coefficients_in_w();
    for (got, want) in c.iter().zip([0.3, -1.2, 0.25, -0.04]) {
        assert_abs_diff_eq!(*got, want, epsilon = 1e-8);
    }
    for &w in &ws {
        assert_abs_diff_eq!(fit.eval(w), cubic(w), epsilon = 1e-10);
    }
}

#[test]
fn flat_data_selects_constant() {
    let ws = grid(1.0, 6.0, 12);
    let fit = fit_points_select_degree(&ws, &[0.7; 12], 6, 3).unwrap();
    assert_eq!(fit.degree, 0);
    assert_abs_diff_eq!(fit.eval(2.2), 0.7, epsilon = 1e-12);
}

#[test]
fn too_few_points_for_degree() {
    let ws = grid(1.0, 2.0, 5);
    assert!(matches!(
        fit_points_select_degree(&ws, &[0.0; 5], 4, 0),
        Err(Error::InsufficientData(_))
    ));
}

#[test]
fn degree_selection_is_affine_invariant() {
    let mut rng = ChaCha20Rng::seed_from_u64(12);
    let ws = grid(0.5, 10.0, 25);
    let ys: Vec<f64> = ws
        .iter()
        .map(|&w| {
            (w / 3.0).tanh() + 0.01 * rand_distr::Distribution::<f64>::sample(&rand_distr::StandardNormal, &mut rng)
        })
        .collect();
    let base = fit_points_select_degree(&ws, &ys, 9, 4).unwrap();
    for (scale, shift) in [(2.0, 0.0), (0.1, 5.0), (-3.0, 1.0), (1e3, -7.0)] {
        let moved: Vec<f64> = ws.iter().map(|w| scale * w + shift).collect();
        let fit = fit_points_select_degree(&moved, &ys, 9, 4).unwrap();
        assert_eq!(fit.degree, base.degree);
    }
}

#[test]
fn derivatives_are_analytic() {
    let ws = grid(0.0, 4.0, 9);
    let sq: Vec<f64> = ws.iter().map(|w| w * w).collect();
    let fit = fit_polynomial(&ws, &sq, 2).unwrap();
    for (w, d) in derivative_curve(&fit, 1, &ws, false) {
        assert_abs_diff_eq!(d, 2.0 * w, epsilon = 1e-10);
    }
    let interior = derivative_curve(&fit, 1, &ws, true);
    assert_eq!(interior.len(), ws.len() - 2);
    assert_eq!(interior[0].0, ws[1]);

    let ys: Vec<f64> = ws.iter().map(|&w| cubic(w)).collect();
    let fit = fit_polynomial(&ws, &ys, 3).unwrap();
    for (w, d) in derivative_curve(&fit, 2, &ws, true) {
        assert_abs_diff_eq!(d, 0.5 - 0.24 * w, epsilon = 1e-9);
    }
    assert_abs_diff_eq!(fit.derivative(4, 1.3), 0.0, epsilon = 1e-12);
}

#[test]
fn second_derivative_of_smooth_curve() {
    // exp(-W/2) on [0, 3] sampled densely; a degree-selected fit must
    // reproduce the closed-form second derivative inside the range
    let ws = grid(0.0, 3.0, 40);
    let ys: Vec<f64> = ws.iter().map(|w| (-w / 2.0).exp()).collect();
    let fit = fit_points_select_degree(&ws, &ys, 12, 9).unwrap();
    for (w, d) in derivative_curve(&fit, 2, &ws, true) {
        assert_abs_diff_eq!(d, 0.25 * (-w / 2.0).exp(), epsilon = 1e-6);
    }
}

fn identity_params() -> CollapseParams {
    CollapseParams::new(0.0, 0.0, 0.0, 2).unwrap()
}

#[test]
fn collapse_params_validation() {
    assert!(CollapseParams::new(0.5, 0.6, 3.7, 1).is_ok());
    assert!(matches!(
        CollapseParams::new(0.5, 0.6, 3.7, 3),
        Err(Error::InvalidSpec(_))
    ));
}

#[test]
fn identity_and_single_length_transforms() {
    let c = ScalingCurve {
        length: 10,
        points: vec![(1.0, 0.2), (2.0, -0.1), (3.5, 0.4)],
    };
    let out = collapse_transform(std::slice::from_ref(&c), &identity_params());
    assert_eq!(out[0], c);
    let shifted = collapse_transform(
        std::slice::from_ref(&c),
        &CollapseParams::new(0.0, 0.0, 3.0, 1).unwrap(),
    );
    for (p, q) in shifted[0].points.iter().zip(&c.points) {
        assert_abs_diff_eq!(p.0, q.0 - 3.0);
        assert_abs_diff_eq!(p.1, q.1);
    }
    assert_eq!(collapse_quality(&out).unwrap(), 0.0);
}

fn universal(x: f64) -> f64 {
    (x / 2.0).tanh() + 0.3 * (-x * x).exp()
}

/// `y_L(W) = L^a g(L^b (W - W_c))`, sampled where `L^b (W - W_c)` lands on
/// a shared x grid.
fn exact_family(a: f64, b: f64, wc: f64) -> Vec<ScalingCurve> {
    let xs = grid(-3.0, 3.0, 31);
    [8usize, 10, 12]
        .iter()
        .map(|&l| {
            let lf = l as f64;
            ScalingCurve {
                length: l,
                points: xs
                    .iter()
                    .map(|&x| (wc + x * lf.powf(-b), lf.powf(a) * universal(x)))
                    .collect(),
            }
        })
        .collect()
}

#[test]
fn exact_collapse_fixture() {
    let params = CollapseParams::new(0.5, 0.75, 3.75, 2).unwrap();
    let family = exact_family(0.5, 0.75, 3.75);
    let moved = collapse_transform(&family, &params);
    for c in &moved {
        for &(x, y) in &c.points {
            assert_abs_diff_eq!(y, universal(x), epsilon = 1e-10);
        }
    }
    assert_abs_diff_eq!(collapse_quality(&moved).unwrap(), 0.0, epsilon = 1e-10);
    let wrong = collapse_transform(&family, &CollapseParams::new(0.5, 0.75, 1.0, 2).unwrap());
    assert!(matches!(collapse_quality(&wrong), Err(Error::NoOverlap)) || collapse_quality(&wrong).unwrap() > 1e-3);
}

#[test]
fn grid_search_recovers_planted_parameters() {
    let family = exact_family(0.5, 0.75, 3.75);
    let grid = CollapseGrid::parse("a=0:1:0.25,b=0:1:0.25,wc=3:4.5:0.25").unwrap();
    assert_eq!(grid.len(), 5 * 5 * 7);
    let ranked = grid_search_collapse(&family, &grid, 2).unwrap();
    let best = ranked[0];
    assert_eq!((best.params.a, best.params.b, best.params.wc), (0.5, 0.75, 3.75));
    assert!(best.quality < 1e-10);
    assert!(ranked.windows(2).all(|w| w[0].quality <= w[1].quality));
    assert_eq!(ranked, grid_search_collapse(&family, &grid, 2).unwrap());
}

#[test]
fn grid_search_errors() {
    let family = exact_family(0.5, 0.75, 3.75);
    let empty = CollapseGrid {
        a: vec![],
        b: vec![0.5],
        wc: vec![1.0],
    };
    assert!(matches!(
        grid_search_collapse(&family, &empty, 1),
        Err(Error::EmptyGrid)
    ));
    assert!(matches!(CollapseGrid::parse("a=0:1:0.1,b=0.5"), Err(Error::Config(_))));
    assert!(matches!(
        CollapseGrid::parse("a=0,b=0,wc=1,z=2"),
        Err(Error::UnknownKey(_))
    ));
    assert!(ParamRange::parse("1:0").is_err());
    assert_eq!(ParamRange::parse("0:1:0.5").unwrap().values(), vec![0.0, 0.5, 1.0]);
}

#[test]
fn disjoint_ranges_have_no_overlap() {
    let c1 = ScalingCurve {
        length: 8,
        points: vec![(0.0, 1.0), (1.0, 2.0)],
    };
    let c2 = ScalingCurve {
        length: 10,
        points: vec![(2.0, 1.0), (3.0, 2.0)],
    };
    assert!(matches!(collapse_quality(&[c1, c2]), Err(Error::NoOverlap)));
}

#[test]
fn shuffled_values_score_near_one() {
    let mut rng = ChaCha20Rng::seed_from_u64(77);
    let xs = grid(0.0, 1.0, 400);
    let mut pool: Vec<f64> = (0..xs.len() * 5)
        .map(|i| universal(-3.0 + 6.0 * (i % xs.len()) as f64 / xs.len() as f64))
        .collect();
    pool.shuffle(&mut rng);
    let curves: Vec<ScalingCurve> = pool
        .chunks(xs.len())
        .enumerate()
        .map(|(k, ys)| ScalingCurve {
            length: 8 + 2 * k,
            points: xs.iter().copied().zip(ys.iter().copied()).collect(),
        })
        .collect();
    let q = collapse_quality(&curves).unwrap();
    assert!((q - 1.0).abs() < 0.1, "quality {q}");
}

#[test]
fn curves_csv_round_trip() {
    let ws = grid(0.5, 4.0, 8);
    let ys: Vec<f64> = ws.iter().map(|&w| cubic(w) / 3.0).collect();
    let curves = vec![curve(8, &ws, &ys), curve(10, &ws, &ys)];
    let mut buf = Vec::new();
    write_curves_csv(&mut buf, &curves).unwrap();
    let text = String::from_utf8(buf.clone()).unwrap();
    assert!(text.starts_with("L,indicator,W,mean,stderr,n\n"));
    assert_eq!(read_curves_csv(buf.as_slice()).unwrap(), curves);
}

#[test]
fn derivative_curves_drop_endpoints() {
    let ws = grid(0.5, 6.0, 12);
    let ys: Vec<f64> = ws.iter().map(|&w| cubic(w)).collect();
    let out = derivative_curves(&[curve(8, &ws, &ys)], 1, 9, 0).unwrap();
    assert_eq!(out[0].points.len(), 10);
    for &(w, d) in &out[0].points {
        assert_abs_diff_eq!(d, -1.2 + 0.5 * w - 0.12 * w * w, epsilon = 1e-8);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn quality_is_scale_invariant(seed in any::<u64>(), scale in 1e-3f64..1e3) {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let curves: Vec<ScalingCurve> = (0..3)
            .map(|k| ScalingCurve {
                length: 8 + 2 * k,
                points: (0..15)
                    .map(|i| (i as f64 * 0.3 + 0.1 * k as f64, rand::Rng::random::<f64>(&mut rng)))
                    .collect(),
            })
            .collect();
        let scaled: Vec<ScalingCurve> = curves
            .iter()
            .map(|c| ScalingCurve { length: c.length, points: c.points.iter().map(|&(x, y)| (x, y * scale)).collect() })
            .collect();
        let q0 = collapse_quality(&curves).unwrap();
        let q1 = collapse_quality(&scaled).unwrap();
        prop_assert!(q0 >= 0.0);
        prop_assert!((q0 - q1).abs() <= 1e-9 * q0.max(1.0));
    }

    #[test]
    fn identity_transform_is_identity(ys in proptest::collection::vec(-10.0f64..10.0, 2..20), l in 2usize..40) {
        let c = ScalingCurve { length: l, points: ys.iter().enumerate().map(|(i, &y)| (i as f64, y)).collect() };
        let out = collapse_transform(std::slice::from_ref(&c), &identity_params());
        prop_assert_eq!(&out[0], &c);
    }
}
