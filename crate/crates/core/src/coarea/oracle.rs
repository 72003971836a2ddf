//! Tracer-independent estimate of `H¹(level ∩ A)`: an adaptive scan for
//! the residual band, projection of band cells onto the level set, and the
//! covering estimator on the resulting cloud.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::level::{LevelMap, TracerConfig};
use super::Region;
use crate::error::{Error, Result};
use crate::group::Group;
use crate::maps::{ContactMap, PrecomposeTranslation};
use crate::measure::{hausdorff1_eps, CoordBox, HausdorffConfig};
use crate::pansu::norm;
use crate::projection::HyperplanePoint;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleConfig {
    /// Covering radius of the ε-measure.
    pub eps: f64,
    /// Leaf cells have width at most `eps / leaf_divisor`.
    pub leaf_divisor: f64,
    /// Multiplier on the Lipschitz pruning radius.
    pub safety: f64,
    /// Residual accepted for projected band points, relative to the scale
    /// of `F`.
    pub tau_band: f64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self { eps: 0.02, leaf_divisor: 32.0, safety: 2.0, tau_band: 1e-9 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleEstimate {
    pub value: f64,
    /// Leaf cells in the residual band.
    pub band_cells: usize,
    /// Points passed to the covering estimator after thinning.
    pub samples: usize,
}

fn lipschitz_estimate(level: &LevelMap, bx: &CoordBox, cells: usize) -> Result<f64> {
    let d = bx.dim();
    let mut k: f64 = 0.0;
    let total = (cells + 1).pow(d as u32);
    let node = |mut flat: usize| {
        let mut u = vec![0.0; d];
        for a in (0..d).rev() {
            u[a] = (flat % (cells + 1)) as f64 / cells as f64;
            flat /= cells + 1;
        }
        bx.at(&u)
    };
    let values: Vec<Vec<f64>> = (0..total).map(|i| level.f(&node(i))).collect::<Result<_>>()?;
    for i in 0..total {
        let mut stride = 1;
        for a in (0..d).rev() {
            let coord = (i / stride) % (cells + 1);
            if coord < cells {
                let jdx = i + stride;
                let dy = bx.width(a) / cells as f64;
                let df = norm(&values[i].iter().zip(&values[jdx]).map(|(x, y)| x - y).collect::<Vec<_>>());
                k = k.max(df / dy);
            }
            stride *= cells + 1;
        }
    }
    Ok(k)
}

/// `H¹_ε` estimate of `(Pr_j ∘ φ)⁻¹(p) ∩ A`.
pub fn lhs_covering_oracle(
    group: &Group,
    phi: &dyn ContactMap,
    p: &HyperplanePoint,
    region: &Region,
    cfg: &OracleConfig,
) -> Result<OracleEstimate> {
    group.check_horizontal_index(p.j())?;
    if !(cfg.eps > 0.0 && cfg.leaf_divisor >= 2.0 && cfg.safety >= 1.0) {
        return Err(Error::Config(format!("invalid oracle configuration {cfg:?}")));
    }
    let j = p.j();
    let target = p.coords();
    let pulled;
    let phi: &dyn ContactMap = match &region.translation {
        Some(g) => {
            pulled = PrecomposeTranslation::new(group, phi, g.clone())?;
            &pulled
        }
        None => phi,
    };
    let bx = &region.bx;
    let level = LevelMap { group, phi, j, bx, tracer: TracerConfig::default() };
    let k = lipschitz_estimate(&level, bx, 12)? * cfg.safety;
    let leaf = cfg.eps / cfg.leaf_divisor;
    let widest = (0..bx.dim()).map(|a| bx.width(a)).fold(0.0, f64::max);
    let depth = (widest / leaf).log2().ceil().max(0.0) as u32;

    // Depth-first over dyadic sub-boxes, children in index order.
    let d = bx.dim();
    let mut band: Vec<Vec<f64>> = Vec::new();
    let mut stack: Vec<(u32, Vec<u64>)> = vec![(0, vec![0; d])];
    while let Some((level_no, idx)) = stack.pop() {
        let cells = (1u64 << level_no) as f64;
        let centre: Vec<f64> = (0..d).map(|a| bx.lo[a] + (idx[a] as f64 + 0.5) / cells * bx.width(a)).collect();
        let half_diag = (0..d).map(|a| (0.5 * bx.width(a) / cells).powi(2)).sum::<f64>().sqrt();
        let r = norm(&level.f(&centre)?.iter().zip(target).map(|(a, b)| a - b).collect::<Vec<_>>());
        if r > k * half_diag {
            continue;
        }
        if level_no == depth {
            band.push(centre);
            continue;
        }
        for child in (0..(1u64 << d)).rev() {
            let c: Vec<u64> = (0..d).map(|a| 2 * idx[a] + ((child >> (d - 1 - a)) & 1)).collect();
            stack.push((level_no + 1, c));
        }
    }

    let scale = k.max(1.0) * bx.diameter();
    let free = vec![true; d];
    let leaf_width: Vec<f64> = (0..d).map(|a| bx.width(a) / (1u64 << depth) as f64).collect();
    let mut seen = BTreeSet::new();
    let mut cloud = Vec::new();
    for c in &band {
        let (y, rn) = level.polish(c, target, &free, cfg.tau_band * scale, 20)?;
        if rn > 10.0 * cfg.tau_band * scale || !bx.contains(&y) {
            continue;
        }
        let key: Vec<i64> = (0..d).map(|a| ((y[a] - bx.lo[a]) / leaf_width[a]).floor() as i64).collect();
        if seen.insert(key) {
            cloud.push(y);
        }
    }
    let resolution = leaf_width.iter().map(|w| w * w).sum::<f64>().sqrt();
    let value = if cloud.is_empty() {
        0.0
    } else {
        hausdorff1_eps(group, &cloud, &HausdorffConfig::new(cfg.eps, resolution.min(0.5 * cfg.eps))?)
    };
    Ok(OracleEstimate { value, band_cells: band.len(), samples: cloud.len() })
}
