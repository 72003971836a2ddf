use carnot_coarea::measure::{
    hausdorff1_eps, horizontal_length, lebesgue_box_integral, quasi_norm, CoordBox, HausdorffConfig, PolyCurve,
    QuadratureConfig, QuasiNormConfig, QuasiNormStyle, TAU_H,
};
use carnot_coarea::{Group, Point};
use proptest::prelude::*;

fn h1() -> Group {
    Group::builtin("heisenberg(1)").unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn quasi_norm_is_homogeneous(x in prop::collection::vec(-3.0..3.0f64, 4), lambda in 0.05..8.0f64) {
        let g = Group::builtin("engel").unwrap();
        let x = Point::new(x);
        let n = quasi_norm(&g, &x).unwrap();
        let d = quasi_norm(&g, &g.dilate(lambda, &x).unwrap()).unwrap();
        prop_assert!((d - lambda * n).abs() <= 1e-12 * (1.0 + lambda * n));
        let pm = QuasiNormConfig::new(&g, QuasiNormStyle::PowerMean { p: 4.0 }).unwrap();
        let a = pm.norm(x.coords());
        let b = pm.norm(g.dilate(lambda, &x).unwrap().coords());
        prop_assert!((b - lambda * a).abs() <= 1e-12 * (1.0 + lambda * a));
    }

    #[test]
    fn quasi_distance_is_left_invariant(
        x in prop::collection::vec(-2.0..2.0f64, 3),
        y in prop::collection::vec(-2.0..2.0f64, 3),
        g0 in prop::collection::vec(-2.0..2.0f64, 3),
    ) {
        let g = h1();
        let q = QuasiNormConfig::max(&g);
        let d = q.distance(&g, &x, &y);
        let moved = q.distance(&g, &g.product(&g0, &x), &g.product(&g0, &y));
        prop_assert!((d - moved).abs() <= 1e-6 * (1.0 + d));
    }
}

#[test]
fn quasi_norm_examples() {
    let g = h1();
    assert_eq!(quasi_norm(&g, &g.origin()).unwrap(), 0.0);
    assert_eq!(quasi_norm(&g, &Point::new(vec![0.0, 0.0, 1.0])).unwrap(), 1.0);
    let x = Point::new(vec![0.3, -0.4, 0.9]);
    let ratio = quasi_norm(&g, &g.dilate(2.0, &x).unwrap()).unwrap() / quasi_norm(&g, &x).unwrap();
    assert!((ratio - 2.0).abs() < 1e-15);
}

#[test]
fn horizontal_lengths() {
    let g = h1();
    let axis: Vec<Point> = (0..=100).map(|k| g.exp_axis(0, k as f64 / 100.0)).collect();
    let c = PolyCurve::from_points(&g, axis).unwrap();
    assert!((horizontal_length(&g, &c, TAU_H).unwrap() - 1.0).abs() < 1e-12);

    // The X-flow through (0, y0, 0) is (t, y0, −t y0 / 2).
    let y0 = 0.7;
    for n in [10, 100, 1000] {
        let pts: Vec<Point> = (0..=n)
            .map(|k| {
                let t = 2.0 * k as f64 / n as f64;
                Point::new(vec![t, y0, -t * y0 / 2.0])
            })
            .collect();
        let c = PolyCurve::from_points(&g, pts).unwrap();
        assert!((horizontal_length(&g, &c, TAU_H).unwrap() - 2.0).abs() < 1e-12);
    }

    let single = PolyCurve::from_points(&g, vec![Point::new(vec![0.1, 0.2, 0.3])]).unwrap();
    assert_eq!(horizontal_length(&g, &single, TAU_H).unwrap(), 0.0);
}

#[test]
fn covering_estimates() {
    let g = h1();
    let cfg = HausdorffConfig::new(0.01, 0.0).unwrap();
    assert_eq!(hausdorff1_eps(&g, &[], &cfg), 0.0);

    let segment: Vec<Vec<f64>> = (0..=4000).map(|k| g.exp_axis(0, k as f64 / 4000.0).into_vec()).collect();
    let len = hausdorff1_eps(&g, &segment, &cfg);
    assert!((len - 1.0).abs() <= 0.1, "{len}");

    // A horizontal circle arc of angle 1.5: length 1.5.
    let arc: Vec<Vec<f64>> = (0..=4000)
        .map(|k| {
            let t = 1.5 * k as f64 / 4000.0;
            vec![t.cos(), t.sin(), t / 2.0]
        })
        .collect();
    let len = hausdorff1_eps(&g, &arc, &cfg);
    assert!((len - 1.5).abs() <= 0.15, "{len}");

    let shift = [0.4, -1.3, 2.2];
    let moved: Vec<Vec<f64>> = arc.iter().map(|p| g.product(&shift, p)).collect();
    let len_moved = hausdorff1_eps(&g, &moved, &cfg);
    assert!((len - len_moved).abs() <= 0.02 * len, "{len} vs {len_moved}");
}

#[test]
fn box_integrals() {
    let unit = CoordBox::unit(3);
    let grid = QuadratureConfig::Grid { n: 16 };
    let one = lebesgue_box_integral(|_| 1.0, &unit, &grid).unwrap();
    assert_eq!(one.value, 1.0);
    let lin = lebesgue_box_integral(|x| x[0], &unit, &grid).unwrap();
    assert!((lin.value - 0.5).abs() < 1e-6);
    let big = CoordBox::new(vec![-1.0; 3], vec![1.0; 3]).unwrap();
    assert!((lebesgue_box_integral(|_| 1.0, &big, &grid).unwrap().value - 8.0).abs() < 1e-12);
    let mc = QuadratureConfig::MonteCarlo { samples: 20_000, seed: 5 };
    let est = lebesgue_box_integral(|x| x[1] * x[1], &unit, &mc).unwrap();
    assert!((est.value - 1.0 / 3.0).abs() <= 4.0 * est.err);
}
