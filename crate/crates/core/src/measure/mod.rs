//! Quasi-norms, horizontal curve length, the Hausdorff ε-measure estimator
//! and box quadrature.

mod quadrature;

pub use quadrature::{
    box_quadrature, gauss_legendre, lebesgue_box_integral, CoordBox, Estimate, QuadratureConfig,
    QuadratureStats,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::group::{AlgebraVector, Group, Point};
use crate::sum::compensated_sum;

/// Default horizontality tolerance, relative to the tangent norm.
pub const TAU_H: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "style", rename_all = "snake_case")]
pub enum QuasiNormStyle {
    /// `max_k |x^(k)|^(1/k)`.
    Max,
    /// `(Σ_k |x^(k)|^(p/k))^(1/p)`.
    PowerMean { p: f64 },
}

/// A homogeneous quasi-norm. `|x^(k)|` is the Euclidean norm of the
/// stratum-`k` block, so on horizontal vectors the norm is Euclidean.
#[derive(Clone, Debug)]
pub struct QuasiNormConfig {
    style: QuasiNormStyle,
    strata: Vec<std::ops::Range<usize>>,
}

impl QuasiNormConfig {
    pub fn new(group: &Group, style: QuasiNormStyle) -> Result<Self> {
        if let QuasiNormStyle::PowerMean { p } = style {
            if !(p >= 1.0 && p.is_finite()) {
                return Err(Error::Config(format!("power-mean exponent must be >= 1, got {p}")));
            }
        }
        let strata = (1..=group.step()).map(|s| group.schema().stratum_range(s)).collect();
        Ok(Self { style, strata })
    }

    pub fn max(group: &Group) -> Self {
        Self::new(group, QuasiNormStyle::Max).expect("max style is always valid")
    }

    pub fn style(&self) -> QuasiNormStyle {
        self.style
    }

    pub fn norm(&self, x: &[f64]) -> f64 {
        let block = |k: usize| {
            let r = &self.strata[k];
            x[r.clone()].iter().map(|v| v * v).sum::<f64>().sqrt()
        };
        match self.style {
            QuasiNormStyle::Max => (0..self.strata.len())
                .map(|k| {
                    let b = block(k);
                    match k {
                        0 => b,
                        1 => b.sqrt(),
                        _ => b.powf(1.0 / (k + 1) as f64),
                    }
                })
                .fold(0.0, f64::max),
            QuasiNormStyle::PowerMean { p } => (0..self.strata.len())
                .map(|k| block(k).powf(p / (k + 1) as f64))
                .sum::<f64>()
                .powf(1.0 / p),
        }
    }

    /// Left-invariant quasi-distance `‖x⁻¹y‖`.
    pub fn distance(&self, group: &Group, x: &[f64], y: &[f64]) -> f64 {
        let inv: Vec<f64> = x.iter().map(|v| -v).collect();
        self.norm(&group.product(&inv, y))
    }
}

/// Max-style quasi-norm of a point.
pub fn quasi_norm(group: &Group, x: &Point) -> Result<f64> {
    group.check_dim(x.dim())?;
    Ok(QuasiNormConfig::max(group).norm(x.coords()))
}

/// A polygonal curve. `tangents[k]` is the algebra increment attached to the
/// segment from `points[k]` to `points[k + 1]` (parameter step absorbed).
#[derive(Clone, Debug, PartialEq)]
pub struct PolyCurve {
    points: Vec<Point>,
    tangents: Vec<AlgebraVector>,
}

impl PolyCurve {
    pub fn new(group: &Group, points: Vec<Point>, tangents: Vec<AlgebraVector>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::DegenerateCurve("no points".into()));
        }
        if tangents.len() + 1 != points.len() {
            return Err(Error::DegenerateCurve(format!(
                "{} points need {} tangents, got {}",
                points.len(),
                points.len() - 1,
                tangents.len()
            )));
        }
        for p in &points {
            group.check_dim(p.dim())?;
        }
        for t in &tangents {
            group.check_dim(t.dim())?;
        }
        for (k, w) in points.windows(2).enumerate() {
            if w[0] == w[1] {
                return Err(Error::DegenerateCurve(format!("points {k} and {} coincide", k + 1)));
            }
        }
        Ok(Self { points, tangents })
    }

    /// Uses the exact group increments `x_k⁻¹ x_{k+1}` as tangents.
    pub fn from_points(group: &Group, points: Vec<Point>) -> Result<Self> {
        for p in &points {
            group.check_dim(p.dim())?;
        }
        let tangents = points
            .windows(2)
            .map(|w| {
                let inv: Vec<f64> = w[0].coords().iter().map(|v| -v).collect();
                AlgebraVector::new(group.product(&inv, w[1].coords()))
            })
            .collect();
        Self::new(group, points, tangents)
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn tangents(&self) -> &[AlgebraVector] {
        &self.tangents
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Length of a horizontal polygonal curve in the orthonormal first-stratum
/// metric. Fails if some tangent leaves the horizontal space by more than
/// `tau_h` relative to its norm.
pub fn horizontal_length(group: &Group, curve: &PolyCurve, tau_h: f64) -> Result<f64> {
    let n1 = group.horizontal_dim();
    let mut parts = Vec::with_capacity(curve.tangents.len());
    for (segment, t) in curve.tangents.iter().enumerate() {
        let c = t.coords();
        let h = c[..n1].iter().map(|v| v * v).sum::<f64>().sqrt();
        let v = c[n1..].iter().map(|v| v * v).sum::<f64>().sqrt();
        let total = (h * h + v * v).sqrt();
        if total > 0.0 && v > tau_h * total {
            return Err(Error::NonHorizontal { segment, defect: v / total });
        }
        parts.push(h);
    }
    Ok(compensated_sum(parts))
}

/// Covering radius `eps` and the spacing `resolution` of the input sample.
/// Every point of the sampled set is assumed to lie within `resolution / 2`
/// of a sample point.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HausdorffConfig {
    pub eps: f64,
    pub resolution: f64,
}

impl HausdorffConfig {
    /// Normalization constant of the one-dimensional measure.
    pub const BETA_1: f64 = 2.0;

    pub fn new(eps: f64, resolution: f64) -> Result<Self> {
        if !(eps > 0.0) || !(resolution >= 0.0) || resolution >= eps {
            return Err(Error::Config(format!(
                "need 0 <= resolution < eps, got eps = {eps}, resolution = {resolution}"
            )));
        }
        Ok(Self { eps, resolution })
    }
}

/// `β₁ Σ r_k` over a greedy cover of the sample by quasi-balls of radius at
/// most `eps`.
///
/// Centres are picked by farthest-point ordering until the covering radius
/// drops below `eps − resolution/2`; each resulting cluster is then
/// re-centred at its best sample point and its radius shrunk to fit.
pub fn hausdorff1_eps(group: &Group, points: &[Vec<f64>], cfg: &HausdorffConfig) -> f64 {
    if points.is_empty() {
        return 0.0;
    }
    let norm = QuasiNormConfig::max(group);
    let dist = |a: &[f64], b: &[f64]| norm.distance(group, a, b);
    let target = cfg.eps - 0.5 * cfg.resolution;

    let mut nearest = vec![f64::INFINITY; points.len()];
    let mut owner = vec![0usize; points.len()];
    let mut centres = Vec::new();
    let mut next = 0usize;
    loop {
        let c = centres.len();
        centres.push(next);
        for (i, p) in points.iter().enumerate() {
            let d = dist(&points[next], p);
            if d < nearest[i] {
                nearest[i] = d;
                owner[i] = c;
            }
        }
        let (far, &r) = nearest
            .iter()
            .enumerate()
            .fold((0, &f64::NEG_INFINITY), |best, cur| if *cur.1 > *best.1 { cur } else { best });
        if r <= target {
            break;
        }
        next = far;
    }

    let mut clusters = vec![Vec::new(); centres.len()];
    for (i, &c) in owner.iter().enumerate() {
        clusters[c].push(i);
    }
    let radii = clusters.iter().zip(&centres).map(|(members, &centre)| {
        let radius_from = |c: usize| members.iter().map(|&m| dist(&points[c], &points[m])).fold(0.0, f64::max);
        let mut best = radius_from(centre);
        for &m in members {
            let r = radius_from(m);
            if r < best {
                best = r;
            }
        }
        best + 0.5 * cfg.resolution
    });
    HausdorffConfig::BETA_1 * compensated_sum(radii)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn h1() -> Group {
        Group::builtin("heisenberg(1)").unwrap()
    }

    #[test]
    fn quasi_norm_examples() {
        let g = h1();
        assert_eq!(quasi_norm(&g, &g.origin()).unwrap(), 0.0);
        assert_eq!(quasi_norm(&g, &Point::new(vec![0.0, 0.0, 1.0])).unwrap(), 1.0);
        let x = Point::new(vec![0.3, -0.2, 0.7]);
        let n = quasi_norm(&g, &x).unwrap();
        let n2 = quasi_norm(&g, &g.dilate(2.0, &x).unwrap()).unwrap();
        assert_eq!(n2 / n, 2.0);
    }

    #[test]
    fn power_mean_is_homogeneous() {
        let g = Group::builtin("engel").unwrap();
        let q = QuasiNormConfig::new(&g, QuasiNormStyle::PowerMean { p: 4.0 }).unwrap();
        let x = [0.3, -0.2, 0.7, 1.1];
        let r = q.norm(&g.dilate_raw(3.0, &x)) / q.norm(&x);
        assert!((r - 3.0).abs() < 1e-12);
    }

    #[test]
    fn axis_segment_length() {
        let g = h1();
        let pts: Vec<Point> = (0..=10).map(|k| g.exp_axis(0, k as f64 / 10.0)).collect();
        let c = PolyCurve::from_points(&g, pts).unwrap();
        assert!((horizontal_length(&g, &c, TAU_H).unwrap() - 1.0).abs() < 1e-14);
        let single = PolyCurve::from_points(&g, vec![g.origin()]).unwrap();
        assert_eq!(horizontal_length(&g, &single, TAU_H).unwrap(), 0.0);
    }

    #[test]
    fn x_flow_length() {
        let g = h1();
        let y0 = 0.8;
        let curve = |n: usize| {
            let pts = (0..=n)
                .map(|k| {
                    let t = 2.0 * k as f64 / n as f64;
                    Point::new(vec![t, y0, -t * y0 / 2.0])
                })
                .collect();
            horizontal_length(&g, &PolyCurve::from_points(&g, pts).unwrap(), TAU_H).unwrap()
        };
        let (a, b) = (curve(50), curve(100));
        assert!((a - 2.0).abs() < 1e-12 && (a - b).abs() / a < 1e-3);
    }

    #[test]
    fn vertical_segments_are_rejected() {
        let g = h1();
        let pts = vec![g.origin(), Point::new(vec![0.0, 0.0, 0.1])];
        let c = PolyCurve::from_points(&g, pts).unwrap();
        assert!(matches!(horizontal_length(&g, &c, TAU_H), Err(Error::NonHorizontal { .. })));
    }

    fn segment(n: usize, len: f64) -> Vec<Vec<f64>> {
        (0..=n).map(|k| vec![len * k as f64 / n as f64, 0.0, 0.0]).collect()
    }

    #[test]
    fn covering_estimate_of_segment() {
        let g = h1();
        assert_eq!(hausdorff1_eps(&g, &[], &HausdorffConfig::new(0.1, 0.0).unwrap()), 0.0);
        let eps = 0.01;
        let pts = segment(5000, 1.0);
        let est = hausdorff1_eps(&g, &pts, &HausdorffConfig::new(eps, 1.0 / 5000.0).unwrap());
        assert!((est - 1.0).abs() < 0.1, "{est}");
    }

    #[test]
    fn covering_estimate_is_left_invariant() {
        let g = h1();
        let pts = segment(2000, 1.0);
        let gpt = [0.4, -1.3, 2.0];
        let moved: Vec<Vec<f64>> = pts.iter().map(|p| g.product(&gpt, p)).collect();
        let cfg = HausdorffConfig::new(0.02, 1.0 / 2000.0).unwrap();
        let (a, b) = (hausdorff1_eps(&g, &pts, &cfg), hausdorff1_eps(&g, &moved, &cfg));
        assert!((a - b).abs() < 1e-9 * a);
    }
}
