use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sum::{compensated_sum, NeumaierSum};

/// Axis-aligned box `[lo_0, hi_0] × … × [lo_{d-1}, hi_{d-1}]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoordBox {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl CoordBox {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() || lo.is_empty() {
            return Err(Error::InvalidRegion(format!(
                "bounds have lengths {} and {}",
                lo.len(),
                hi.len()
            )));
        }
        for (axis, (a, b)) in lo.iter().zip(&hi).enumerate() {
            if !a.is_finite() || !b.is_finite() || !(a < b) {
                return Err(Error::InvalidRegion(format!("axis {axis} has bounds [{a}, {b}]")));
            }
        }
        Ok(Self { lo, hi })
    }

    pub fn unit(dim: usize) -> Self {
        Self { lo: vec![0.0; dim], hi: vec![1.0; dim] }
    }

    /// Parses `a1,b1,a2,b2,...`.
    pub fn parse(text: &str) -> Result<Self> {
        let vals: Vec<f64> = text
            .split(',')
            .map(|s| s.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Config(format!("box `{text}`: {e}")))?;
        if vals.is_empty() || vals.len() % 2 != 0 {
            return Err(Error::Config(format!("box `{text}` needs an even number of bounds")));
        }
        let lo = vals.iter().step_by(2).copied().collect();
        let hi = vals.iter().skip(1).step_by(2).copied().collect();
        Self::new(lo, hi)
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn width(&self, axis: usize) -> f64 {
        self.hi[axis] - self.lo[axis]
    }

    pub fn volume(&self) -> f64 {
        (0..self.dim()).map(|a| self.width(a)).product()
    }

    pub fn diameter(&self) -> f64 {
        (0..self.dim()).map(|a| self.width(a).powi(2)).sum::<f64>().sqrt()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter().zip(self.lo.iter().zip(&self.hi)).all(|(v, (a, b))| *a <= *v && *v <= *b)
    }

    /// Contains with an absolute slack on every face.
    pub fn contains_within(&self, x: &[f64], slack: f64) -> bool {
        x.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .all(|(v, (a, b))| *a - slack <= *v && *v <= *b + slack)
    }

    pub fn center(&self) -> Vec<f64> {
        self.lo.iter().zip(&self.hi).map(|(a, b)| 0.5 * (a + b)).collect()
    }

    /// Point at fractional position `u ∈ [0,1]^d`.
    pub fn at(&self, u: &[f64]) -> Vec<f64> {
        (0..self.dim()).map(|a| self.lo[a] + u[a] * self.width(a)).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub err: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum QuadratureConfig {
    /// Midpoint rule with `n` cells per axis; error proxy is the difference
    /// to the `n/2` rule.
    Grid { n: usize },
    /// Plain Monte Carlo with `samples` points; error proxy is the standard error.
    MonteCarlo { samples: usize, seed: u64 },
}

impl QuadratureConfig {
    /// Parses `grid:n` or `mc:n` (the seed is supplied separately).
    pub fn parse(text: &str, seed: u64) -> Result<Self> {
        let bad = || Error::Config(format!("quadrature `{text}`: expected grid:<n> or mc:<n>"));
        let (kind, n) = text.split_once(':').ok_or_else(bad)?;
        let n: usize = n.trim().parse().map_err(|_| bad())?;
        let cfg = match kind.trim() {
            "grid" => QuadratureConfig::Grid { n },
            "mc" => QuadratureConfig::MonteCarlo { samples: n, seed },
            _ => return Err(bad()),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            QuadratureConfig::Grid { n } if n < 2 => {
                Err(Error::Config(format!("grid quadrature needs n >= 2, got {n}")))
            }
            QuadratureConfig::MonteCarlo { samples, .. } if samples < 2 => {
                Err(Error::Config(format!("Monte Carlo needs at least 2 samples, got {samples}")))
            }
            _ => Ok(()),
        }
    }

    pub fn describe(&self) -> String {
        match self {
            QuadratureConfig::Grid { n } => format!("grid:{n}"),
            QuadratureConfig::MonteCarlo { samples, .. } => format!("mc:{samples}"),
        }
    }
}

/// Node bookkeeping for integrands that may fail at isolated points.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct QuadratureStats {
    pub nodes: usize,
    pub failed: usize,
}

/// Calls `f` on every midpoint of an `n^d` grid over `bx`, slab-parallel
/// over the first axis, and returns the per-slab results in slab order.
fn map_midpoint_slabs<T, F>(bx: &CoordBox, n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(&mut dyn Iterator<Item = Vec<f64>>) -> T + Sync,
{
    let d = bx.dim();
    (0..n)
        .into_par_iter()
        .map(|i0| {
            let total = n.pow((d - 1) as u32);
            let mut it = (0..total).map(move |mut flat| {
                let mut x = vec![0.0; d];
                x[0] = bx.lo[0] + (i0 as f64 + 0.5) / n as f64 * bx.width(0);
                for a in (1..d).rev() {
                    let i = flat % n;
                    flat /= n;
                    x[a] = bx.lo[a] + (i as f64 + 0.5) / n as f64 * bx.width(a);
                }
                x
            });
            f(&mut it)
        })
        .collect()
}

fn midpoint_sum<F>(f: &F, bx: &CoordBox, n: usize) -> Result<(f64, QuadratureStats)>
where
    F: Fn(&[f64]) -> Option<f64> + Sync,
{
    let slabs = map_midpoint_slabs(bx, n, |nodes| {
        let mut acc = NeumaierSum::new();
        let mut stats = QuadratureStats::default();
        for x in nodes {
            stats.nodes += 1;
            match f(&x) {
                Some(v) if v.is_finite() => acc.add(v),
                Some(v) => return Err(Error::NonFinite(format!("integrand value {v} at {x:?}"))),
                None => stats.failed += 1,
            }
        }
        Ok((acc.value(), stats))
    });
    let mut acc = NeumaierSum::new();
    let mut stats = QuadratureStats::default();
    for slab in slabs {
        let (v, s) = slab?;
        acc.add(v);
        stats.nodes += s.nodes;
        stats.failed += s.failed;
    }
    let ok = stats.nodes - stats.failed;
    // Failed nodes take the mean of the successful ones.
    let mean = if ok > 0 { acc.value() / ok as f64 } else { 0.0 };
    Ok((mean * bx.volume(), stats))
}

const MC_CHUNK: usize = 4096;

fn monte_carlo<F>(f: &F, bx: &CoordBox, samples: usize, seed: u64) -> Result<(Estimate, QuadratureStats)>
where
    F: Fn(&[f64]) -> Option<f64> + Sync,
{
    let chunks = samples.div_ceil(MC_CHUNK);
    let d = bx.dim();
    let parts: Vec<Result<(f64, f64, QuadratureStats)>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(c as u64);
            let count = MC_CHUNK.min(samples - c * MC_CHUNK);
            let mut s1 = NeumaierSum::new();
            let mut s2 = NeumaierSum::new();
            let mut stats = QuadratureStats::default();
            let mut u = vec![0.0; d];
            for _ in 0..count {
                for v in u.iter_mut() {
                    *v = rng.random::<f64>();
                }
                let x = bx.at(&u);
                stats.nodes += 1;
                match f(&x) {
                    Some(v) if v.is_finite() => {
                        s1.add(v);
                        s2.add(v * v);
                    }
                    Some(v) => return Err(Error::NonFinite(format!("integrand value {v} at {x:?}"))),
                    None => stats.failed += 1,
                }
            }
            Ok((s1.value(), s2.value(), stats))
        })
        .collect();
    let mut s1 = NeumaierSum::new();
    let mut s2 = NeumaierSum::new();
    let mut stats = QuadratureStats::default();
    for p in parts {
        let (a, b, s) = p?;
        s1.add(a);
        s2.add(b);
        stats.nodes += s.nodes;
        stats.failed += s.failed;
    }
    let m = (stats.nodes - stats.failed).max(1) as f64;
    let mean = s1.value() / m;
    let var = (s2.value() / m - mean * mean).max(0.0) * m / (m - 1.0).max(1.0);
    let vol = bx.volume();
    Ok((Estimate { value: vol * mean, err: vol * (var / m).sqrt() }, stats))
}

/// Quadrature for integrands that may fail at isolated nodes (`None`).
/// Failed nodes are replaced by the mean of the successful ones and counted.
pub fn box_quadrature<F>(f: F, bx: &CoordBox, cfg: &QuadratureConfig) -> Result<(Estimate, QuadratureStats)>
where
    F: Fn(&[f64]) -> Option<f64> + Sync,
{
    cfg.validate()?;
    match *cfg {
        QuadratureConfig::Grid { n } => {
            let (fine, stats) = midpoint_sum(&f, bx, n)?;
            let (coarse, _) = midpoint_sum(&f, bx, n / 2)?;
            Ok((Estimate { value: fine, err: (fine - coarse).abs() }, stats))
        }
        QuadratureConfig::MonteCarlo { samples, seed } => monte_carlo(&f, bx, samples, seed),
    }
}

/// `∫_box f dℒ^d` with an error proxy.
pub fn lebesgue_box_integral<F>(f: F, bx: &CoordBox, cfg: &QuadratureConfig) -> Result<Estimate>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    box_quadrature(|x| Some(f(x)), bx, cfg).map(|(e, _)| e)
}

/// Composite Gauss–Legendre (5 nodes per piece) of a scalar function.
pub fn gauss_legendre<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, pieces: usize) -> f64 {
    const X: [f64; 5] = [
        0.0,
        -0.538_469_310_105_683_1,
        0.538_469_310_105_683_1,
        -0.906_179_845_938_664,
        0.906_179_845_938_664,
    ];
    const W: [f64; 5] = [
        0.568_888_888_888_888_9,
        0.478_628_670_499_366_47,
        0.478_628_670_499_366_47,
        0.236_926_885_056_189_08,
        0.236_926_885_056_189_08,
    ];
    let h = (b - a) / pieces as f64;
    compensated_sum((0..pieces).flat_map(|p| {
        let mid = a + (p as f64 + 0.5) * h;
        let f = &f;
        X.iter().zip(W.iter()).map(move |(x, w)| 0.5 * h * w * f(mid + 0.5 * h * x))
    }))
}
