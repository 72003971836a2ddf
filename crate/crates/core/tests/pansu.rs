use carnot_coarea::maps::{BuiltinMap, ContactMap};
use carnot_coarea::pansu::{
    adjugate, coarea_factor, complete_hom, finite_codistortion_defect, horizontal_block, pansu_differential,
    pansu_residual, CodistortionThresholds, DiffConfig, GradedHom,
};
use carnot_coarea::{AlgebraVector, Group, Point};
use nalgebra::DMatrix;
use proptest::prelude::*;

fn group(name: &str) -> Group {
    Group::builtin(name).unwrap()
}

/// Determinant by Laplace expansion along the first row.
fn laplace_det(m: &DMatrix<f64>) -> f64 {
    let n = m.nrows();
    if n == 0 {
        return 1.0;
    }
    (0..n)
        .map(|c| {
            let minor = m.clone().remove_row(0).remove_column(c);
            let sign = if c % 2 == 0 { 1.0 } else { -1.0 };
            sign * m[(0, c)] * laplace_det(&minor)
        })
        .sum()
}

fn cofactor_adjugate(m: &DMatrix<f64>) -> DMatrix<f64> {
    let n = m.nrows();
    DMatrix::from_fn(n, n, |r, c| {
        let minor = m.clone().remove_row(c).remove_column(r);
        let sign = if (r + c) % 2 == 0 { 1.0 } else { -1.0 };
        sign * laplace_det(&minor)
    })
}

fn graded(g: &Group, entries: &[f64]) -> GradedHom {
    let mut m = DMatrix::zeros(g.dim(), g.dim());
    let mut it = entries.iter().cycle();
    for s in 1..=g.step() {
        let r = g.schema().stratum_range(s);
        for a in r.clone() {
            for b in r.clone() {
                m[(a, b)] = *it.next().unwrap();
            }
        }
    }
    GradedHom::new(g, m).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn blockwise_adjugate_matches_cofactor_expansion(
        which in 0usize..3,
        entries in prop::collection::vec(-1.5..1.5f64, 30),
    ) {
        let g = group(["heisenberg(1)", "engel", "heisenberg(2)"][which]);
        let l = graded(&g, &entries);
        let fast = adjugate(&l);
        let slow = cofactor_adjugate(l.matrix());
        prop_assert!((fast - slow).amax() <= 1e-11);
    }

    #[test]
    fn completion_is_a_lie_homomorphism(
        which in 0usize..3,
        entries in prop::collection::vec(-1.5..1.5f64, 16),
        u in prop::collection::vec(-1.0..1.0f64, 6),
        v in prop::collection::vec(-1.0..1.0f64, 6),
    ) {
        let name = ["heisenberg(1)", "free_step2(3)", "engel"][which];
        let g = group(name);
        let n1 = g.horizontal_dim();
        let mut block = DMatrix::from_fn(n1, n1, |r, c| entries[r * n1 + c]);
        if name == "engel" {
            // [X_2, X_3] = 0 forces the X_1 component of L X_2 to vanish.
            block[(0, 1)] = 0.0;
        }
        let l = complete_hom(&g, &block).unwrap();
        let mut uu = vec![0.0; g.dim()];
        let mut vv = vec![0.0; g.dim()];
        uu[..n1].copy_from_slice(&u[..n1]);
        vv[..n1].copy_from_slice(&v[..n1]);
        let (uu, vv) = (AlgebraVector::new(uu), AlgebraVector::new(vv));
        let lhs = l.apply(g.bracket(&uu, &vv).unwrap().coords());
        let rhs = g
            .bracket(&AlgebraVector::new(l.apply(uu.coords())), &AlgebraVector::new(l.apply(vv.coords())))
            .unwrap();
        for (a, b) in lhs.iter().zip(rhs.coords()) {
            prop_assert!((a - b).abs() <= 1e-12);
        }
        prop_assert!(l.bracket_defect(&g) <= 1e-12);
    }

    #[test]
    fn heisenberg_determinant_is_square_of_horizontal_jacobian(e in prop::collection::vec(-3.0..3.0f64, 4)) {
        let g = group("heisenberg(1)");
        let b = DMatrix::from_row_slice(2, 2, &e);
        let l = complete_hom(&g, &b).unwrap();
        let jh = b.determinant();
        prop_assert!((l.matrix()[(2, 2)] - (e[0] * e[3] - e[2] * e[1])).abs() <= 1e-14);
        prop_assert!((l.determinant() - jh * jh).abs() <= 1e-10);
    }
}

#[test]
fn heisenberg2_blocks_must_be_conformal_symplectic() {
    // Basis X_1, X_2, Y_1, Y_2, Z.
    let g = group("heisenberg(2)");
    let generic = DMatrix::from_fn(4, 4, |r, c| 0.3 * r as f64 - 0.7 * c as f64 + if r == c { 2.0 } else { 0.0 });
    assert!(complete_hom(&g, &generic).is_err());

    // λ times an SL(2) action on each (X_i, Y_i) plane.
    let (a, b, c) = (1.3, 0.4, -0.2);
    let d = (1.0 + b * c) / a;
    let lambda = 0.8;
    let mut block = DMatrix::zeros(4, 4);
    for i in 0..2 {
        block[(i, i)] = lambda * a;
        block[(i, i + 2)] = lambda * b;
        block[(i + 2, i)] = lambda * c;
        block[(i + 2, i + 2)] = lambda * d;
    }
    let l = complete_hom(&g, &block).unwrap();
    assert!((l.matrix()[(4, 4)] - lambda * lambda).abs() < 1e-14);
    assert!(l.bracket_defect(&g) < 1e-14);
}

/// `V_2` block of the completion on a free step-2 group is the second
/// compound of the horizontal block: entry `((a,b),(c,d))` is the minor
/// `B[a,c]B[b,d] − B[a,d]B[b,c]`.
#[test]
fn free_step2_completion_is_second_compound() {
    let g = group("free_step2(3)");
    let b = DMatrix::from_row_slice(3, 3, &[0.7, -1.2, 0.4, 0.1, 2.0, -0.3, 1.5, 0.6, -0.9]);
    let l = complete_hom(&g, &b).unwrap();
    let basis = |k: usize| {
        let mut v = vec![0.0; 6];
        v[k] = 1.0;
        AlgebraVector::new(v)
    };
    // Identify which V_2 coordinate each pair bracket lands on.
    let pairs = [(0, 1), (0, 2), (1, 2)];
    let target = |(a, c): (usize, usize)| {
        let w = g.bracket(&basis(a), &basis(c)).unwrap();
        let k = (3..6).find(|&k| w[k] != 0.0).unwrap();
        (k, w[k])
    };
    for &(a, bb) in &pairs {
        let (row, sign_row) = target((a, bb));
        for &(c, d) in &pairs {
            let (col, sign_col) = target((c, d));
            let minor = b[(a, c)] * b[(bb, d)] - b[(a, d)] * b[(bb, c)];
            assert!((l.matrix()[(row, col)] - sign_row * sign_col * minor).abs() < 1e-13);
        }
    }
}

#[test]
fn dilation_blocks_match_closed_form_quotient() {
    // δ_{1/t}(δ_λ(x)⁻¹ δ_λ(x exp(tX_i))) = δ_λ exp(X_i) exactly, so the block is λI.
    let cfg = DiffConfig::default();
    for (name, x) in [("heisenberg(1)", vec![0.3, -0.2, 0.5]), ("engel", vec![0.1, 0.4, -0.3, 0.2])] {
        let g = group(name);
        let phi = BuiltinMap::parse(&g, "dilate:lambda=2.5").unwrap();
        let block = horizontal_block(&g, &phi, &Point::new(x), &cfg).unwrap();
        let n1 = g.horizontal_dim();
        assert!((block - DMatrix::identity(n1, n1) * 2.5).amax() < 1e-9, "{name}");
    }
}

#[test]
fn translation_blocks_are_identity() {
    let g = group("heisenberg(2)");
    let phi = BuiltinMap::parse(&g, "translate:x1=1,x2=-2,x5=3").unwrap();
    let block = horizontal_block(&g, &phi, &Point::new(vec![0.5, 0.1, -0.4, 0.2, 1.0]), &DiffConfig::default()).unwrap();
    assert!((block - DMatrix::identity(4, 4)).amax() < 1e-9);
}

#[test]
fn heisenberg_adjugate_examples() {
    let g = group("heisenberg(1)");
    let lambda = 1.7f64;
    let l = GradedHom::new(&g, DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![lambda, lambda, lambda * lambda]))).unwrap();
    let adj = adjugate(&l);
    let expected = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![lambda.powi(3), lambda.powi(3), lambda.powi(2)]));
    assert!((adj - expected).amax() < 1e-13);

    let singular = complete_hom(&g, &DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0])).unwrap();
    assert!(adjugate(&singular).amax() == 0.0);
}

#[test]
fn coarea_factor_of_dilations_is_lambda_to_nu_minus_one() {
    let cfg = DiffConfig::default();
    let lambda = 1.5f64;
    for name in ["heisenberg(1)", "heisenberg(2)", "engel", "free_step2(3)"] {
        let g = group(name);
        let phi = BuiltinMap::parse(&g, &format!("dilate:lambda={lambda}")).unwrap();
        let x = Point::new((0..g.dim()).map(|k| 0.2 * k as f64 - 0.3).collect());
        let expected = lambda.powi(g.homogeneous_dim() as i32 - 1);
        for j in 0..g.horizontal_dim() {
            let f = coarea_factor(&g, &phi, &x, j, &cfg).unwrap();
            assert!((f - expected).abs() <= 1e-7 * expected, "{name} j={j}: {f} vs {expected}");
        }
    }
}

#[test]
fn degenerate_factor_vanishes() {
    let g = group("heisenberg(1)");
    let phi = BuiltinMap::parse(&g, "degenerate").unwrap();
    for j in 0..2 {
        let f = coarea_factor(&g, &phi, &Point::new(vec![0.3, 0.8, -0.2]), j, &DiffConfig::default()).unwrap();
        assert!(f.abs() < 1e-12);
    }
}

#[test]
fn shear_residual_decreases_with_radius() {
    let g = group("heisenberg(1)");
    let phi = BuiltinMap::parse(&g, "shear:a=0.8").unwrap();
    let x = Point::new(vec![0.2, 0.5, -0.1]);
    let l = pansu_differential(&g, &phi, &x, &DiffConfig::default()).unwrap();
    let coarse = pansu_residual(&g, &phi, &x, &l, 0.1, 64, 3).unwrap();
    let fine = pansu_residual(&g, &phi, &x, &l, 0.01, 64, 3).unwrap();
    assert!(fine < coarse, "{fine} vs {coarse}");
}

#[test]
fn identity_residual_is_roundoff() {
    // The quasi-norm takes k-th roots of degree-k coordinates, so roundoff
    // ε in the estimated differential shows up as about ε^{1/step} / r.
    for (name, x, floor) in [("heisenberg(1)", vec![0.2, 0.5, -0.1], 1e-6), ("engel", vec![0.2, 0.5, -0.1, 0.3], 1e-4)] {
        let g = group(name);
        let phi = BuiltinMap::parse(&g, "identity").unwrap();
        let x = Point::new(x);
        let l = pansu_differential(&g, &phi, &x, &DiffConfig::default()).unwrap();
        for r in [1.0, 0.1, 0.01] {
            let res = pansu_residual(&g, &phi, &x, &l, r, 32, 1).unwrap();
            assert!(res <= floor / r, "{name} r={r}: {res}");
        }
    }
}

#[test]
fn codistortion_reports() {
    let g = group("heisenberg(1)");
    let cfg = DiffConfig::default();
    let thresholds = CodistortionThresholds::default();
    let grid: Vec<Point> = (0..5).flat_map(|a| (0..5).map(move |b| Point::new(vec![0.2 * a as f64, 0.2 * b as f64 - 0.4, 0.1]))).collect();

    let degenerate = BuiltinMap::parse(&g, "degenerate").unwrap();
    let r = finite_codistortion_defect(&g, &degenerate, &grid, &thresholds, &cfg).unwrap();
    assert_eq!(r.singular, grid.len());
    assert_eq!(r.defect, 0.0);
    assert!(r.finite);

    let dilate = BuiltinMap::parse(&g, "dilate:lambda=2").unwrap();
    let r = finite_codistortion_defect(&g, &dilate, &grid, &thresholds, &cfg).unwrap();
    assert_eq!((r.singular, r.finite), (0, true));

    // On the fold z − xy/2 = −s the horizontal Jacobian vanishes.
    let s = 0.5;
    let fold = BuiltinMap::parse(&g, &format!("fold:s={s}")).unwrap();
    let on_fold: Vec<Point> = grid.iter().map(|p| Point::new(vec![p[0], p[1], p[0] * p[1] / 2.0 - s])).collect();
    let r = finite_codistortion_defect(&g, &fold, &on_fold, &thresholds, &cfg).unwrap();
    assert_eq!(r.singular, on_fold.len());
    assert!(r.defect <= 1e-8, "{}", r.defect);
    assert!(!fold.finite_codistortion());
}

#[test]
fn non_contact_maps_have_large_residuals() {
    struct Twist;
    impl ContactMap for Twist {
        fn name(&self) -> String {
            "twist".into()
        }
        fn eval(&self, x: &[f64]) -> carnot_coarea::Result<Vec<f64>> {
            Ok(vec![x[0], x[1], x[2] + x[0]])
        }
    }
    let g = group("heisenberg(1)");
    let x = Point::new(vec![0.1, 0.2, 0.3]);
    let l = pansu_differential(&g, &Twist, &x, &DiffConfig::default()).unwrap();
    let coarse = pansu_residual(&g, &Twist, &x, &l, 0.1, 64, 5).unwrap();
    let fine = pansu_residual(&g, &Twist, &x, &l, 0.01, 64, 5).unwrap();
    assert!(fine > coarse && fine > 1.0, "{coarse} {fine}");
}
