//! Pansu differentials: finite-difference horizontal blocks, completion to
//! graded homomorphisms, adjugates and coarea factors.

use std::ops::Range;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::group::{Group, Point};
use crate::linalg::adjugate_dense;
use crate::maps::ContactMap;
use crate::measure::QuasiNormConfig;

/// Default bracket-compatibility tolerance, relative to the size of the
/// compared entries.
pub const TAU_HOM: f64 = 1e-8;
pub const TAU_DET: f64 = 1e-9;
pub const TAU_ADJ: f64 = 1e-8;

/// Step schedule for the group-intrinsic central differences.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiffConfig {
    /// Three steps, each half the previous one.
    pub steps: [f64; 3],
    /// Largest accepted disagreement between the last two extrapolants,
    /// relative to `max(1, |block|)`.
    pub tol: f64,
}

impl Default for DiffConfig {
    fn default() -> Self {
        Self { steps: [1e-3, 5e-4, 2.5e-4], tol: 1e-6 }
    }
}

impl DiffConfig {
    pub fn validate(&self) -> Result<()> {
        let [a, b, c] = self.steps;
        let halving = |p: f64, q: f64| (q / p - 0.5).abs() < 1e-12;
        if !(a > 0.0 && a <= 0.1 && halving(a, b) && halving(b, c)) || !(self.tol > 0.0) {
            return Err(Error::Config(format!("invalid difference schedule {:?}", self.steps)));
        }
        Ok(())
    }
}

fn checked_eval(phi: &dyn ContactMap, x: &[f64]) -> Result<Vec<f64>> {
    let y = phi.eval(x)?;
    if y.len() != x.len() {
        return Err(Error::Evaluation(format!("map returned {} coordinates, expected {}", y.len(), x.len())));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::Evaluation(format!("non-finite value at {x:?}")));
    }
    Ok(y)
}

/// Central difference of the horizontal coordinates of `φ` along the flow
/// of `X_i`, i.e. the degree-1 part of `δ_{1/t}(φ(x)⁻¹ φ(x exp(tX_i)))`
/// symmetrised in `t`.
fn central_column(group: &Group, phi: &dyn ContactMap, x: &[f64], i: usize, t: f64) -> Result<Vec<f64>> {
    let n1 = group.horizontal_dim();
    let fwd = checked_eval(phi, &group.product(x, group.exp_axis(i, t).coords()))?;
    let bwd = checked_eval(phi, &group.product(x, group.exp_axis(i, -t).coords()))?;
    Ok((0..n1).map(|r| (fwd[r] - bwd[r]) / (2.0 * t)).collect())
}

/// Single central difference, no extrapolation. Used on hot paths where a
/// direction, not an accurate value, is needed.
pub(crate) fn horizontal_block_central(group: &Group, phi: &dyn ContactMap, x: &[f64], t: f64) -> Result<DMatrix<f64>> {
    let n1 = group.horizontal_dim();
    let mut block = DMatrix::zeros(n1, n1);
    for i in 0..n1 {
        let col = central_column(group, phi, x, i, t)?;
        for r in 0..n1 {
            block[(r, i)] = col[r];
        }
    }
    Ok(block)
}

/// Horizontal block of the Pansu differential at `x`: central differences
/// at three halving steps, twice Richardson-extrapolated.
pub fn horizontal_block(group: &Group, phi: &dyn ContactMap, x: &Point, cfg: &DiffConfig) -> Result<DMatrix<f64>> {
    group.check_dim(x.dim())?;
    cfg.validate()?;
    let x = x.coords();
    let n1 = group.horizontal_dim();
    let mut block = DMatrix::zeros(n1, n1);
    let mut discrepancy: f64 = 0.0;
    for i in 0..n1 {
        let d: Vec<Vec<f64>> = cfg
            .steps
            .iter()
            .map(|&t| central_column(group, phi, x, i, t))
            .collect::<Result<_>>()?;
        for r in 0..n1 {
            let r1a = (4.0 * d[1][r] - d[0][r]) / 3.0;
            let r1b = (4.0 * d[2][r] - d[1][r]) / 3.0;
            let r2 = (16.0 * r1b - r1a) / 15.0;
            block[(r, i)] = r2;
            discrepancy = discrepancy.max((r2 - r1b).abs());
        }
    }
    let scale = block.amax().max(1.0);
    if discrepancy > cfg.tol * scale {
        return Err(Error::NonConvergence(discrepancy / scale));
    }
    Ok(block)
}

/// A linear map of the Lie algebra, block-diagonal with respect to the
/// strata.
#[derive(Clone, Debug, PartialEq)]
pub struct GradedHom {
    matrix: DMatrix<f64>,
    strata: Vec<Range<usize>>,
}

fn strata_of(group: &Group) -> Vec<Range<usize>> {
    (1..=group.step()).map(|s| group.schema().stratum_range(s)).collect()
}

impl GradedHom {
    /// Wraps a matrix, rejecting any nonzero entry outside the diagonal
    /// blocks. Bracket compatibility is measured, not enforced; see
    /// [`GradedHom::bracket_defect`].
    pub fn new(group: &Group, matrix: DMatrix<f64>) -> Result<Self> {
        let n = group.dim();
        if matrix.nrows() != n || matrix.ncols() != n {
            return Err(Error::DimensionMismatch { expected: n, got: matrix.nrows().max(matrix.ncols()) });
        }
        if matrix.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("graded homomorphism entry".into()));
        }
        let strata = strata_of(group);
        let degree = group.degrees();
        for r in 0..n {
            for c in 0..n {
                if degree[r] != degree[c] && matrix[(r, c)] != 0.0 {
                    return Err(Error::Config(format!(
                        "entry ({}, {}) couples strata {} and {}",
                        r + 1,
                        c + 1,
                        degree[r],
                        degree[c]
                    )));
                }
            }
        }
        Ok(Self { matrix, strata })
    }

    pub fn identity(group: &Group) -> Self {
        Self { matrix: DMatrix::identity(group.dim(), group.dim()), strata: strata_of(group) }
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    /// Diagonal block of stratum `s` (1-based).
    pub fn block(&self, s: usize) -> DMatrix<f64> {
        let r = &self.strata[s - 1];
        self.matrix.view((r.start, r.start), (r.len(), r.len())).into_owned()
    }

    /// Product of the block determinants.
    pub fn determinant(&self) -> f64 {
        (1..=self.strata.len()).map(|s| self.block(s).determinant()).product()
    }

    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        (0..self.matrix.nrows()).map(|r| (0..v.len()).map(|c| self.matrix[(r, c)] * v[c]).sum()).collect()
    }

    /// `max |L[X_i,X_j] − [LX_i, LX_j]|` over basis pairs, divided by
    /// `max(1, largest compared entry)`.
    pub fn bracket_defect(&self, group: &Group) -> f64 {
        let n = group.dim();
        let cols: Vec<Vec<f64>> = (0..n).map(|c| self.matrix.column(c).iter().copied().collect()).collect();
        let mut worst: f64 = 0.0;
        let mut scale: f64 = 1.0;
        for i in 0..n {
            for j in (i + 1)..n {
                let mut e = vec![0.0; n];
                e[i] = 1.0;
                let mut f = vec![0.0; n];
                f[j] = 1.0;
                let lhs = self.apply(&group.bracket_generic(&e, &f));
                let rhs = group.bracket_generic(&cols[i], &cols[j]);
                for (a, b) in lhs.iter().zip(&rhs) {
                    worst = worst.max((a - b).abs());
                    scale = scale.max(a.abs()).max(b.abs());
                }
            }
        }
        worst / scale
    }
}

/// Extends a horizontal block to the graded homomorphism it generates.
///
/// For each stratum, the images of the bracket-table vectors `[X_a, X_b]`
/// are `[LX_a, LX_b]`; inverting the (nonsingular) table matrix gives the
/// block. Every other basis pair of matching degree is then checked, and a
/// relative residual above [`TAU_HOM`] is reported as an error.
pub fn complete_hom(group: &Group, block: &DMatrix<f64>) -> Result<GradedHom> {
    complete_hom_with(group, block, TAU_HOM)
}

pub fn complete_hom_with(group: &Group, block: &DMatrix<f64>, tau_hom: f64) -> Result<GradedHom> {
    let n = group.dim();
    let n1 = group.horizontal_dim();
    if block.nrows() != n1 || block.ncols() != n1 {
        return Err(Error::DimensionMismatch { expected: n1, got: block.nrows().max(block.ncols()) });
    }
    if block.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("horizontal block entry".into()));
    }
    let schema = group.schema();
    let degree = group.degrees();
    let mut m = DMatrix::zeros(n, n);
    m.view_mut((0, 0), (n1, n1)).copy_from(block);
    let column = |m: &DMatrix<f64>, c: usize| -> Vec<f64> { m.column(c).iter().copied().collect() };
    let unit = |i: usize| {
        let mut e = vec![0.0; n];
        e[i] = 1.0;
        e
    };

    for s in 2..=group.step() {
        let range = schema.stratum_range(s);
        let k = range.len();
        let mut c_mat = DMatrix::zeros(k, k);
        let mut r_mat = DMatrix::zeros(k, k);
        for (col, target) in range.clone().enumerate() {
            let rule = schema
                .bracket_table
                .iter()
                .find(|r| r.target == target)
                .ok_or_else(|| Error::InconsistentCompletion(f64::INFINITY))?;
            let basis = group.bracket_generic(&unit(rule.left), &unit(rule.right));
            let image = group.bracket_generic(&column(&m, rule.left), &column(&m, rule.right));
            for (row, idx) in range.clone().enumerate() {
                c_mat[(row, col)] = basis[idx];
                r_mat[(row, col)] = image[idx];
            }
        }
        let c_inv = c_mat.try_inverse().ok_or(Error::InconsistentCompletion(f64::INFINITY))?;
        let stratum_block = r_mat * c_inv;
        m.view_mut((range.start, range.start), (k, k)).copy_from(&stratum_block);

        let mut worst: f64 = 0.0;
        let mut scale: f64 = 1.0;
        for i in 0..n {
            for j in (i + 1)..n {
                if degree[i] + degree[j] != s {
                    continue;
                }
                let basis = group.bracket_generic(&unit(i), &unit(j));
                let image = group.bracket_generic(&column(&m, i), &column(&m, j));
                for (row, idx) in range.clone().enumerate() {
                    let mapped: f64 = range.clone().enumerate().map(|(c, b)| stratum_block[(row, c)] * basis[b]).sum();
                    worst = worst.max((mapped - image[idx]).abs());
                    scale = scale.max(mapped.abs()).max(image[idx].abs());
                }
            }
        }
        if worst > tau_hom * scale {
            return Err(Error::InconsistentCompletion(worst / scale));
        }
    }
    GradedHom::new(group, m)
}

/// Transposed cofactor matrix, assembled blockwise as
/// `adj(B_k) · Π_{l≠k} det B_l`, so off-block entries are exactly zero.
pub fn adjugate(l: &GradedHom) -> DMatrix<f64> {
    let n = l.matrix.nrows();
    let blocks: Vec<DMatrix<f64>> = (1..=l.strata.len()).map(|s| l.block(s)).collect();
    let dets: Vec<f64> = blocks.iter().map(|b| b.determinant()).collect();
    let mut out = DMatrix::zeros(n, n);
    for (k, (b, r)) in blocks.iter().zip(&l.strata).enumerate() {
        let others: f64 = dets.iter().enumerate().filter(|(i, _)| *i != k).map(|(_, d)| d).product();
        let adj = adjugate_dense(b) * others;
        out.view_mut((r.start, r.start), (r.len(), r.len())).copy_from(&adj);
    }
    out
}

/// Horizontal part of column `j` of `adj L`, computed without forming the
/// full adjugate.
pub fn adjugate_horizontal_column(l: &GradedHom, j: usize) -> Vec<f64> {
    let b1 = l.block(1);
    let n1 = b1.nrows();
    let others: f64 = (2..=l.strata.len()).map(|s| l.block(s).determinant()).product();
    let adj = adjugate_dense(&b1);
    (0..n1).map(|r| adj[(r, j)] * others).collect()
}

/// Pansu differential at `x`, estimated by finite differences.
pub fn pansu_differential(group: &Group, phi: &dyn ContactMap, x: &Point, cfg: &DiffConfig) -> Result<GradedHom> {
    complete_hom(group, &horizontal_block(group, phi, x, cfg)?)
}

/// `|adj D̂φ(x)⟨X_j⟩|`, Euclidean in the orthonormal horizontal basis.
pub fn coarea_factor(group: &Group, phi: &dyn ContactMap, x: &Point, j: usize, cfg: &DiffConfig) -> Result<f64> {
    group.check_horizontal_index(j)?;
    let l = pansu_differential(group, phi, x, cfg)?;
    Ok(norm(&adjugate_horizontal_column(&l, j)))
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

/// `max_ξ ‖ L(ξ)⁻¹ · δ_{1/r}(φ(x)⁻¹ φ(x δ_r ξ)) ‖` over `samples`
/// deterministic pseudo-random `ξ` in the unit quasi-ball.
///
/// The quotient is formed from two evaluations of size `O(1)`, so a
/// coordinate roundoff `u` in stratum `k` is amplified to `(u / r^k)^(1/k)`.
/// Even exact maps show a floor near `sqrt(u) / r` on step-2 groups.
pub fn pansu_residual(
    group: &Group,
    phi: &dyn ContactMap,
    x: &Point,
    l: &GradedHom,
    r: f64,
    samples: usize,
    seed: u64,
) -> Result<f64> {
    group.check_dim(x.dim())?;
    if !(r > 0.0) {
        return Err(Error::NonPositiveDilation(r));
    }
    let q = QuasiNormConfig::max(group);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let fx = checked_eval(phi, x.coords())?;
    let fx_inv: Vec<f64> = fx.iter().map(|v| -v).collect();
    let n = group.dim();
    let mut worst: f64 = 0.0;
    for _ in 0..samples {
        let u: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let nu = q.norm(&u);
        if nu == 0.0 {
            continue;
        }
        let rho: f64 = rng.random_range(0.0..1.0);
        let xi = group.dilate_raw(rho / nu, &u);
        let moved = checked_eval(phi, &group.product(x.coords(), &group.dilate_raw(r, &xi)))?;
        let quotient = group.dilate_raw(1.0 / r, &group.product(&fx_inv, &moved));
        worst = worst.max(q.distance(group, &l.apply(&xi), &quotient));
    }
    Ok(worst)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CodistortionThresholds {
    pub tau_det: f64,
    pub tau_adj: f64,
}

impl Default for CodistortionThresholds {
    fn default() -> Self {
        Self { tau_det: TAU_DET, tau_adj: TAU_ADJ }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CodistortionReport {
    pub samples: usize,
    /// Samples with `|det| < τ_det`.
    pub singular: usize,
    /// Largest Frobenius norm of the adjugate over the singular samples.
    pub defect: f64,
    /// `defect ≤ τ_adj` (vacuously true without singular samples).
    pub finite: bool,
    pub thresholds: CodistortionThresholds,
}

pub fn finite_codistortion_defect(
    group: &Group,
    phi: &dyn ContactMap,
    samples: &[Point],
    thresholds: &CodistortionThresholds,
    cfg: &DiffConfig,
) -> Result<CodistortionReport> {
    let mut singular = 0;
    let mut defect: f64 = 0.0;
    for x in samples {
        let l = pansu_differential(group, phi, x, cfg)?;
        if l.determinant().abs() < thresholds.tau_det {
            singular += 1;
            defect = defect.max(adjugate(&l).norm());
        }
    }
    Ok(CodistortionReport {
        samples: samples.len(),
        singular,
        defect,
        finite: defect <= thresholds.tau_adj,
        thresholds: *thresholds,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::maps::BuiltinMap;

    fn h1() -> Group {
        Group::builtin("heisenberg(1)").unwrap()
    }

    #[test]
    fn identity_and_dilation_blocks() {
        let g = h1();
        let x = Point::new(vec![0.3, -0.7, 1.1]);
        let cfg = DiffConfig::default();
        let id = BuiltinMap::parse(&g, "identity").unwrap();
        let b = horizontal_block(&g, &id, &x, &cfg).unwrap();
        assert!((b - DMatrix::<f64>::identity(2, 2)).amax() < 1e-9);
        let d = BuiltinMap::parse(&g, "dilate:lambda=3").unwrap();
        let b = horizontal_block(&g, &d, &x, &cfg).unwrap();
        assert!((b - DMatrix::<f64>::identity(2, 2) * 3.0).amax() < 1e-9);
    }

    #[test]
    fn heisenberg_completion() {
        let g = h1();
        let b = DMatrix::from_row_slice(2, 2, &[1.5, -0.4, 0.7, 2.0]);
        let l = complete_hom(&g, &b).unwrap();
        assert!((l.matrix()[(2, 2)] - (1.5 * 2.0 + 0.4 * 0.7)).abs() < 1e-14);
        assert_eq!(complete_hom(&g, &DMatrix::identity(2, 2)).unwrap(), GradedHom::identity(&g));
    }

    #[test]
    fn adjugate_examples() {
        let g = h1();
        let l = complete_hom(&g, &(DMatrix::identity(2, 2) * 2.0)).unwrap();
        let adj = adjugate(&l);
        assert_eq!(adj, DMatrix::from_row_slice(3, 3, &[8.0, 0.0, 0.0, 0.0, 8.0, 0.0, 0.0, 0.0, 4.0]));
        let deg = complete_hom(&g, &DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0])).unwrap();
        assert_eq!(adjugate(&deg), DMatrix::zeros(3, 3));
    }

    #[test]
    fn off_block_entries_rejected() {
        let g = h1();
        let mut m = DMatrix::identity(3, 3);
        m[(0, 2)] = 1e-3;
        assert!(GradedHom::new(&g, m).is_err());
    }

    #[test]
    fn coarea_factor_examples() {
        let g = h1();
        let x = Point::new(vec![0.2, 0.4, -0.3]);
        let cfg = DiffConfig::default();
        let d = BuiltinMap::parse(&g, "dilate:lambda=2").unwrap();
        assert!((coarea_factor(&g, &d, &x, 0, &cfg).unwrap() - 8.0).abs() < 1e-8);
        let deg = BuiltinMap::parse(&g, "degenerate").unwrap();
        assert!(coarea_factor(&g, &deg, &x, 0, &cfg).unwrap().abs() < 1e-12);
    }

    #[test]
    fn residual_of_translation_vanishes() {
        let g = h1();
        let t = BuiltinMap::parse(&g, "translate:x1=0.3,x2=-1,x3=2").unwrap();
        let x = Point::new(vec![0.1, 0.2, 0.3]);
        let l = GradedHom::identity(&g);
        // Roundoff u in the vertical coordinate surfaces as about sqrt(u)/r.
        for r in [1.0, 0.1, 0.01] {
            let res = pansu_residual(&g, &t, &x, &l, r, 64, 1).unwrap();
            assert!(res <= 1e-7 / r, "r = {r}: {res:e}");
        }
    }
}
