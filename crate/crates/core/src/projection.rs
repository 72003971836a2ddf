//! Projections onto the hyperplanes `Π_j = {x_j = 0}` along horizontal
//! axes, and the Fubini-type decomposition `x = p · exp(t X_j)`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::group::{Group, Interval, Point};
use crate::measure::{box_quadrature, gauss_legendre, CoordBox, Estimate, QuadratureConfig, QuasiNormConfig};

/// A point of `Π_j`, stored with the (zero) `j`-th coordinate deleted.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HyperplanePoint {
    j: usize,
    coords: Vec<f64>,
}

impl HyperplanePoint {
    pub fn new(group: &Group, j: usize, coords: Vec<f64>) -> Result<Self> {
        group.check_horizontal_index(j)?;
        if coords.len() + 1 != group.dim() {
            return Err(Error::DimensionMismatch { expected: group.dim() - 1, got: coords.len() });
        }
        Ok(Self { j, coords })
    }

    pub fn j(&self) -> usize {
        self.j
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    /// The group point with `x_j = 0` reinserted.
    pub fn embed(&self) -> Point {
        Point::new(insert_zero(&self.coords, self.j))
    }
}

pub(crate) fn insert_zero(coords: &[f64], j: usize) -> Vec<f64> {
    let mut v = Vec::with_capacity(coords.len() + 1);
    v.extend_from_slice(&coords[..j]);
    v.push(0.0);
    v.extend_from_slice(&coords[j..]);
    v
}

/// `x · exp(−x_j X_j)` with coordinate `j` deleted. Unchecked.
pub(crate) fn proj_raw(group: &Group, x: &[f64], j: usize) -> Vec<f64> {
    let mut shift = vec![0.0; x.len()];
    shift[j] = -x[j];
    let mut p = group.product(x, &shift);
    p.remove(j);
    p
}

/// `p · exp(t X_j)` for `p` given with coordinate `j` deleted. Unchecked.
pub(crate) fn compose_raw(group: &Group, p: &[f64], j: usize, t: f64) -> Vec<f64> {
    let full = insert_zero(p, j);
    let mut shift = vec![0.0; full.len()];
    shift[j] = t;
    group.product(&full, &shift)
}

/// `Pr_j(x) = x · exp(−x_j X_j)`.
pub fn proj_hyperplane(group: &Group, x: &Point, j: usize) -> Result<HyperplanePoint> {
    group.check_dim(x.dim())?;
    group.check_horizontal_index(j)?;
    Ok(HyperplanePoint { j, coords: proj_raw(group, x.coords(), j) })
}

/// `pr_j(x) = x_j`.
pub fn proj_scalar(group: &Group, x: &Point, j: usize) -> Result<f64> {
    group.check_dim(x.dim())?;
    group.check_horizontal_index(j)?;
    Ok(x[j])
}

fn conjugation_sides(group: &Group, x: &Point, y: &Point, j: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let xy = group.mul(x, y)?;
    let lhs = proj_hyperplane(group, &xy, j)?.embed();
    let px = proj_hyperplane(group, x, j)?.embed();
    let py = proj_hyperplane(group, y, j)?.embed();
    let a = group.exp_axis(j, x[j]);
    let b = group.exp_axis(j, -x[j]);
    // Grouped as Pr_j(x) · (a · Pr_j(y) · a⁻¹) so that y = 0 is exact.
    let conj = group.product(&group.product(a.coords(), py.coords()), b.coords());
    Ok((lhs.into_vec(), group.product(px.coords(), &conj)))
}

/// Quasi-norm distance between `Pr_j(x·y)` and
/// `Pr_j(x) · exp(x_j X_j) · Pr_j(y) · exp(−x_j X_j)`.
///
/// The quasi-norm takes a `σ`-th root of each stratum, so coordinate
/// roundoff `u` shows up as roughly `u^(1/σ)`.
pub fn conjugation_identity_defect(group: &Group, x: &Point, y: &Point, j: usize) -> Result<f64> {
    let (lhs, rhs) = conjugation_sides(group, x, y, j)?;
    Ok(QuasiNormConfig::max(group).distance(group, &lhs, &rhs))
}

/// Largest coordinate difference between the two sides of the conjugation
/// identity.
pub fn conjugation_identity_residual(group: &Group, x: &Point, y: &Point, j: usize) -> Result<f64> {
    let (lhs, rhs) = conjugation_sides(group, x, y, j)?;
    Ok(lhs.iter().zip(&rhs).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
}

/// Finite-difference Jacobian of `(p, t) ↦ p · exp(t X_j)`, with `t` in
/// column `j`. Its determinant is 1.
pub fn decomposition_jacobian(group: &Group, p: &HyperplanePoint, t: f64) -> DMatrix<f64> {
    let n = group.dim();
    let j = p.j;
    let h = 1e-5;
    let mut jac = DMatrix::zeros(n, n);
    for col in 0..n {
        let eval = |s: f64| {
            if col == j {
                compose_raw(group, &p.coords, j, t + s)
            } else {
                let mut q = p.coords.clone();
                q[if col < j { col } else { col - 1 }] += s;
                compose_raw(group, &q, j, t)
            }
        };
        let (fp, fm) = (eval(h), eval(-h));
        for row in 0..n {
            jac[(row, col)] = (fp[row] - fm[row]) / (2.0 * h);
        }
    }
    jac
}

/// Builtin integrands for the Fubini check. Axis indices are 0-based.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Integrand {
    One,
    /// `x_k²`.
    Square { k: usize },
    /// Indicator of `x_k < c`.
    HalfSpace { k: usize, c: f64 },
}

impl Integrand {
    /// Parses `one`, `square:k=2` or `halfspace:k=1,c=0.5` (1-based `k`).
    pub fn parse(text: &str) -> Result<Self> {
        let bad = |why: &str| Error::Config(format!("integrand `{text}`: {why}"));
        let (name, args) = text.split_once(':').unwrap_or((text, ""));
        let mut k = None;
        let mut c = None;
        for kv in args.split(',').filter(|s| !s.trim().is_empty()) {
            let (key, val) = kv.split_once('=').ok_or_else(|| bad("expected key=value"))?;
            match key.trim() {
                "k" => {
                    let v: usize = val.trim().parse().map_err(|_| bad("k must be a positive integer"))?;
                    if v == 0 {
                        return Err(bad("k is 1-based"));
                    }
                    k = Some(v - 1);
                }
                "c" => c = Some(val.trim().parse::<f64>().map_err(|_| bad("c must be a number"))?),
                other => return Err(bad(&format!("unknown parameter `{other}`"))),
            }
        }
        match (name.trim(), k, c) {
            ("one", None, None) => Ok(Integrand::One),
            ("square", Some(k), None) => Ok(Integrand::Square { k }),
            ("halfspace", Some(k), Some(c)) => Ok(Integrand::HalfSpace { k, c }),
            _ => Err(bad("expected one, square:k=<i> or halfspace:k=<i>,c=<v>")),
        }
    }

    pub fn check(&self, group: &Group) -> Result<()> {
        match *self {
            Integrand::Square { k } | Integrand::HalfSpace { k, .. } if k >= group.dim() => {
                Err(Error::Config(format!("integrand axis {} exceeds dimension {}", k + 1, group.dim())))
            }
            _ => Ok(()),
        }
    }

    fn in_support(&self, x: &[f64]) -> bool {
        match *self {
            Integrand::HalfSpace { k, c } => x[k] < c,
            _ => true,
        }
    }

    fn smooth_part(&self, x: &[f64]) -> f64 {
        match *self {
            Integrand::Square { k } => x[k] * x[k],
            _ => 1.0,
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        if self.in_support(x) {
            self.smooth_part(x)
        } else {
            0.0
        }
    }
}

/// Maximal subintervals of `[a, b]` on which `inside` holds, located by
/// sampling and bisection. Components shorter than the sample spacing may be
/// missed.
pub(crate) fn inside_intervals<P: Fn(f64) -> bool>(inside: P, a: f64, b: f64, samples: usize) -> Vec<(f64, f64)> {
    let locate = |mut lo: f64, mut hi: f64, lo_in: bool| {
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if inside(mid) == lo_in {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    };
    let mut out = Vec::new();
    let mut prev_t = a;
    let mut prev_in = inside(a);
    let mut start = if prev_in { Some(a) } else { None };
    for s in 1..=samples {
        let t = a + (b - a) * s as f64 / samples as f64;
        let now = inside(t);
        if now != prev_in {
            let edge = locate(prev_t, t, prev_in);
            if now {
                start = Some(edge);
            } else if let Some(s0) = start.take() {
                out.push((s0, edge));
            }
        }
        prev_t = t;
        prev_in = now;
    }
    if let Some(s0) = start {
        out.push((s0, b));
    }
    out
}

/// Interval enclosure of `Pr_j(box)`, with coordinate `j` deleted.
pub fn projected_window(group: &Group, bx: &CoordBox, j: usize) -> Result<CoordBox> {
    group.check_dim(bx.dim())?;
    group.check_horizontal_index(j)?;
    let x: Vec<Interval> = (0..bx.dim()).map(|a| Interval::new(bx.lo[a], bx.hi[a])).collect();
    let mut shift = vec![Interval::point(0.0); bx.dim()];
    shift[j] = -x[j];
    let mut p = group.product_generic(&x, &shift);
    p.remove(j);
    let scale = bx.diameter().max(1.0);
    let pad = 1e-9 * scale;
    let lo = p.iter().map(|i| i.lo - pad).collect();
    let hi = p.iter().map(|i| i.hi + pad).collect();
    CoordBox::new(lo, hi)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FubiniReport {
    /// `∫_{Π_j} ∫_ℝ f(p·exp(tX_j)) dt dℒ^{N−1}(p)`.
    pub lhs: Estimate,
    /// `∫ f dℒ^N`.
    pub rhs: Estimate,
    /// `|lhs − rhs| / |rhs|` (absolute gap when `rhs = 0`).
    pub gap: f64,
}

/// Number of `t` samples used to locate the inside intervals of a line.
const LINE_SAMPLES: usize = 48;

/// Compares both sides of the Fubini decomposition of `∫_box f`. The outer
/// integral is a midpoint rule on an `n^{N−1}` grid over the projected
/// window, the inner one is exact up to Gauss–Legendre error on the pieces
/// of the line inside the box and the support of `f`.
pub fn fubini_check(group: &Group, f: &Integrand, bx: &CoordBox, j: usize, n: usize) -> Result<FubiniReport> {
    f.check(group)?;
    let window = projected_window(group, bx, j)?;
    let cfg = QuadratureConfig::Grid { n };
    let inner = |p: &[f64]| {
        let point = |t: f64| compose_raw(group, p, j, t);
        let inside = |t: f64| {
            let x = point(t);
            bx.contains(&x) && f.in_support(&x)
        };
        let pieces = inside_intervals(inside, bx.lo[j], bx.hi[j], LINE_SAMPLES);
        let v = pieces
            .iter()
            .map(|&(a, b)| gauss_legendre(|t| f.smooth_part(&point(t)), a, b, 2))
            .sum::<f64>();
        Some(v)
    };
    let (lhs, _) = box_quadrature(inner, &window, &cfg)?;
    let (rhs, _) = box_quadrature(|x| Some(f.eval(x)), bx, &cfg)?;
    let gap = if rhs.value != 0.0 {
        (lhs.value - rhs.value).abs() / rhs.value.abs()
    } else {
        (lhs.value - rhs.value).abs()
    };
    Ok(FubiniReport { lhs, rhs, gap })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn h1() -> Group {
        Group::builtin("heisenberg(1)").unwrap()
    }

    #[test]
    fn projection_example() {
        let g = h1();
        let p = proj_hyperplane(&g, &Point::new(vec![1.0, 1.0, 0.0]), 0).unwrap();
        assert_eq!(p.coords(), &[1.0, 0.5]);
        assert_eq!(p.embed().coords(), &[0.0, 1.0, 0.5]);
        let again = proj_hyperplane(&g, &p.embed(), 0).unwrap();
        assert_eq!(again, p);
        assert!(proj_hyperplane(&g, &g.origin(), 2).is_err());
        assert_eq!(proj_scalar(&g, &Point::new(vec![1.0, 2.0, 3.0]), 1).unwrap(), 2.0);
    }

    #[test]
    fn conjugation_identity() {
        let g = h1();
        let x = Point::new(vec![0.3, -1.2, 0.8]);
        let y = Point::new(vec![-0.7, 0.4, 1.9]);
        assert!(conjugation_identity_residual(&g, &x, &y, 0).unwrap() <= 1e-12);
        assert!(conjugation_identity_defect(&g, &x, &y, 0).unwrap() <= 1e-7);
        assert_eq!(conjugation_identity_defect(&g, &x, &g.origin(), 1).unwrap(), 0.0);
        let a = Group::builtin("abelian(3)").unwrap();
        assert_eq!(conjugation_identity_defect(&a, &x, &y, 2).unwrap(), 0.0);
    }

    #[test]
    fn unit_jacobian() {
        let g = Group::builtin("engel").unwrap();
        let p = HyperplanePoint::new(&g, 1, vec![0.4, -0.3, 0.9]).unwrap();
        let det = decomposition_jacobian(&g, &p, 0.7).determinant();
        assert!((det - 1.0).abs() < 1e-8, "{det}");
    }

    #[test]
    fn inside_intervals_finds_components() {
        let iv = inside_intervals(|t| (0.2..0.4).contains(&t) || t > 0.75, 0.0, 1.0, 40);
        assert_eq!(iv.len(), 2);
        assert!((iv[0].0 - 0.2).abs() < 1e-12 && (iv[0].1 - 0.4).abs() < 1e-12);
        assert!((iv[1].0 - 0.75).abs() < 1e-12 && iv[1].1 == 1.0);
    }

    #[test]
    fn integrand_parsing() {
        assert_eq!(Integrand::parse("one").unwrap(), Integrand::One);
        assert_eq!(Integrand::parse("square:k=2").unwrap(), Integrand::Square { k: 1 });
        assert_eq!(Integrand::parse("halfspace:k=1,c=0.5").unwrap(), Integrand::HalfSpace { k: 0, c: 0.5 });
        assert!(Integrand::parse("square").is_err());
        assert!(Integrand::parse("square:k=0").is_err());
    }

    #[test]
    fn fubini_volume() {
        let g = h1();
        let r = fubini_check(&g, &Integrand::One, &CoordBox::unit(3), 0, 32).unwrap();
        assert!(r.gap < 1e-3, "{r:?}");
    }
}
