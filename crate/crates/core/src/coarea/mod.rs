//! Both sides of the coarea inequality in Lebesgue normalization,
//!
//! `∫_{Π_j} H¹((Pr_j∘φ)⁻¹(p) ∩ A) dℒ^{N−1}(p) ≤ ∫_A |adj D̂φ(x)⟨X_j⟩| dℒ^N(x)`,
//!
//! together with the verdict logic and a tracer-independent oracle.

mod level;
mod oracle;

pub use level::{Stop, TraceFlags, TracerConfig};
pub use oracle::{lhs_covering_oracle, OracleConfig, OracleEstimate};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use level::{chord_sag, dist, point_polyline_distance, LevelMap, LevelTolerances};

use crate::error::{Error, Result};
use crate::group::{Group, Point};
use crate::maps::{is_heisenberg1, ContactMap, PrecomposeTranslation};
use crate::measure::{box_quadrature, CoordBox, Estimate, QuadratureConfig, QuadratureStats};
use crate::pansu::{coarea_factor, DiffConfig, TAU_ADJ, TAU_DET, TAU_HOM};
use crate::projection::{insert_zero, HyperplanePoint};
use crate::sum::NeumaierSum;

/// A coordinate box, optionally left-translated: `A = g · B`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Region {
    #[serde(rename = "box")]
    pub bx: CoordBox,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub translation: Option<Vec<f64>>,
}

impl Region {
    pub fn new(group: &Group, bx: CoordBox) -> Result<Self> {
        group.check_dim(bx.dim())?;
        Ok(Self { bx, translation: None })
    }

    pub fn translated(group: &Group, bx: CoordBox, g: Vec<f64>) -> Result<Self> {
        group.check_dim(bx.dim())?;
        group.check_dim(g.len())?;
        if g.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidRegion("non-finite translation".into()));
        }
        Ok(Self { bx, translation: Some(g) })
    }

    /// `h · A`.
    pub fn left_translate(&self, group: &Group, h: &[f64]) -> Result<Self> {
        group.check_dim(h.len())?;
        let g = match &self.translation {
            Some(g) => group.product(h, g),
            None => h.to_vec(),
        };
        Ok(Self { bx: self.bx.clone(), translation: Some(g) })
    }

    /// Lebesgue measure is left-invariant, so this is the box volume.
    pub fn volume(&self) -> f64 {
        self.bx.volume()
    }

    pub fn contains(&self, group: &Group, x: &[f64]) -> bool {
        match &self.translation {
            Some(g) => {
                let inv: Vec<f64> = g.iter().map(|v| -v).collect();
                self.bx.contains(&group.product(&inv, x))
            }
            None => self.bx.contains(x),
        }
    }
}

/// `φ ∘ l_g` when the region is translated, so that all work happens on
/// the untranslated box.
enum Pulled<'a> {
    Plain(&'a dyn ContactMap),
    Translated(PrecomposeTranslation<&'a dyn ContactMap>),
}

impl<'a> Pulled<'a> {
    fn new(group: &Group, phi: &'a dyn ContactMap, region: &Region) -> Result<Self> {
        Ok(match &region.translation {
            Some(g) => Pulled::Translated(PrecomposeTranslation::new(group, phi, g.clone())?),
            None => Pulled::Plain(phi),
        })
    }

    fn map(&self) -> &dyn ContactMap {
        match self {
            Pulled::Plain(m) => *m,
            Pulled::Translated(m) => m,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// Residual accepted for a polished seed, relative to the scale of `F`.
    pub tau_seed: f64,
    /// Residual kept along traces, relative to the scale of `F`.
    pub tau_track: f64,
    /// Adjugate column norm below which the tracer stalls.
    pub tau_adj: f64,
    pub tau_det: f64,
    pub tau_hom: f64,
    pub tau_h: f64,
    /// Relative slack in the violation test.
    pub tau_verdict: f64,
    /// Relative gap accepted for an equality verdict.
    pub tau_eq: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            tau_seed: 1e-4,
            tau_track: 1e-7,
            tau_adj: TAU_ADJ,
            tau_det: TAU_DET,
            tau_hom: TAU_HOM,
            tau_h: crate::measure::TAU_H,
            tau_verdict: 1e-3,
            tau_eq: 0.05,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoareaConfig {
    /// Cells per axis of the jittered grid on the projected window (even).
    pub p_grid: usize,
    /// Cells per axis of the seed scan over the box. `None` picks a value
    /// from the dimension, see [`CoareaConfig::scan_cells_for`].
    pub scan_cells: Option<usize>,
    /// Upper bound on seed candidates per `p`.
    pub max_candidates: usize,
    pub quadrature: QuadratureConfig,
    pub seed: u64,
    pub diff: DiffConfig,
    pub tracer: TracerConfig,
    pub tolerances: Tolerances,
    /// Fraction of quadrature nodes allowed to fail differential estimation.
    pub failure_budget: f64,
    /// Multiplies the right-hand side. Only for exercising the violation
    /// path in tests; always 1 otherwise.
    #[serde(default = "one", skip_serializing_if = "is_one")]
    pub rhs_scale: f64,
}

fn one() -> f64 {
    1.0
}

fn is_one(v: &f64) -> bool {
    *v == 1.0
}

impl Default for CoareaConfig {
    fn default() -> Self {
        Self {
            p_grid: 64,
            scan_cells: None,
            max_candidates: 256,
            quadrature: QuadratureConfig::Grid { n: 32 },
            seed: 0,
            diff: DiffConfig::default(),
            tracer: TracerConfig::default(),
            tolerances: Tolerances::default(),
            failure_budget: 1e-3,
            rhs_scale: 1.0,
        }
    }
}

impl CoareaConfig {
    /// Scan resolution: the explicit value, or 24 cells per axis capped so
    /// that the scan has at most about 2·10⁵ nodes.
    pub fn scan_cells_for(&self, dim: usize) -> usize {
        self.scan_cells.unwrap_or_else(|| {
            let per = (2.0e5f64).powf(1.0 / dim as f64).floor() as usize;
            per.saturating_sub(1).clamp(4, 24)
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.p_grid < 2 || self.p_grid % 2 != 0 {
            return Err(Error::Config(format!("p-grid must be even and >= 2, got {}", self.p_grid)));
        }
        if let Some(c) = self.scan_cells {
            if c < 2 {
                return Err(Error::Config(format!("scan needs at least 2 cells, got {c}")));
            }
        }
        if self.max_candidates == 0 {
            return Err(Error::Config("max_candidates must be positive".into()));
        }
        self.quadrature.validate()?;
        self.diff.validate()?;
        let t = &self.tolerances;
        let all = [t.tau_seed, t.tau_track, t.tau_adj, t.tau_det, t.tau_hom, t.tau_h, t.tau_verdict, t.tau_eq];
        if all.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(Error::Config("tolerances must be positive and finite".into()));
        }
        if !(self.failure_budget >= 0.0 && self.failure_budget < 1.0) {
            return Err(Error::Config(format!("failure budget {} not in [0, 1)", self.failure_budget)));
        }
        if !(self.tracer.h_max > 0.0 && self.tracer.h_min > 0.0 && self.tracer.rtol > 0.0 && self.tracer.fd_step > 0.0) {
            return Err(Error::Config("tracer settings must be positive".into()));
        }
        Ok(())
    }
}

/// Coarea factor quadrature over `A`, with node statistics.
pub fn rhs_integral(
    group: &Group,
    phi: &dyn ContactMap,
    region: &Region,
    j: usize,
    cfg: &CoareaConfig,
) -> Result<(Estimate, QuadratureStats)> {
    group.check_horizontal_index(j)?;
    group.check_dim(region.bx.dim())?;
    let pulled = Pulled::new(group, phi, region)?;
    let psi = pulled.map();
    let (est, stats) = box_quadrature(
        |y| coarea_factor(group, psi, &Point::new(y.to_vec()), j, &cfg.diff).ok(),
        &region.bx,
        &cfg.quadrature,
    )?;
    if stats.failed as f64 > cfg.failure_budget * stats.nodes as f64 {
        return Err(Error::DifferentialBudget { failed: stats.failed, total: stats.nodes });
    }
    Ok((Estimate { value: est.value * cfg.rhs_scale, err: est.err * cfg.rhs_scale }, stats))
}

/// One polished seed traced in both directions.
#[derive(Clone, Debug)]
pub struct LevelCurve {
    /// Points in the coordinates of the (untranslated) box.
    pub points: Vec<Vec<f64>>,
    pub length: f64,
    pub stops: Vec<Stop>,
}

/// Per-`p` diagnostics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelRecord {
    pub p: Vec<f64>,
    pub candidates: usize,
    pub seeds: usize,
    /// Candidates whose polish did not reach `τ_seed` inside the box.
    pub dropped: usize,
    pub curves: usize,
    pub length: f64,
    pub flags: TraceFlags,
}

struct Scan {
    cells: usize,
    dim: usize,
    nodes: Vec<Vec<f64>>,
    values: Vec<Vec<f64>>,
    lipschitz: f64,
    cell_diag: f64,
    window: CoordBox,
    /// Scale of `F` used to make residual tolerances relative.
    scale: f64,
}

impl Scan {
    fn build(level: &LevelMap, cells: usize) -> Result<Self> {
        let bx = level.bx;
        let d = bx.dim();
        let per = cells + 1;
        let total = per.pow(d as u32);
        let nodes: Vec<Vec<f64>> = (0..total)
            .map(|mut flat| {
                let mut u = vec![0.0; d];
                for a in (0..d).rev() {
                    u[a] = (flat % per) as f64 / cells as f64;
                    flat /= per;
                }
                bx.at(&u)
            })
            .collect();
        let values: Vec<Vec<f64>> = nodes.par_iter().map(|y| level.f(y)).collect::<Result<_>>()?;
        let mut lipschitz: f64 = 0.0;
        for i in 0..total {
            let mut stride = 1;
            for a in (0..d).rev() {
                if (i / stride) % per < cells {
                    let df = dist(&values[i], &values[i + stride]);
                    lipschitz = lipschitz.max(df * cells as f64 / bx.width(a));
                }
                stride *= per;
            }
        }
        let m = d - 1;
        let mut lo = vec![f64::INFINITY; m];
        let mut hi = vec![f64::NEG_INFINITY; m];
        for v in &values {
            for a in 0..m {
                lo[a] = lo[a].min(v[a]);
                hi[a] = hi[a].max(v[a]);
            }
        }
        let diam = bx.diameter();
        let cell_diag = diam / cells as f64;
        let extent = (0..m).map(|a| hi[a] - lo[a]).fold(0.0, f64::max);
        for a in 0..m {
            let pad = 0.02 * (hi[a] - lo[a]).max(diam) + 0.5 * lipschitz * cell_diag;
            lo[a] -= pad;
            hi[a] += pad;
        }
        let window = CoordBox::new(lo, hi)?;
        let scale = extent.max(lipschitz * diam).max(1.0);
        Ok(Self { cells, dim: d, nodes, values, lipschitz, cell_diag, window, scale })
    }

    fn neighbours(&self, idx: usize) -> impl Iterator<Item = usize> + '_ {
        let per = self.cells + 1;
        let d = self.dim;
        let count = 3usize.pow(d as u32);
        (0..count).filter_map(move |code| {
            let mut c = code;
            let mut stride = 1;
            let mut out = idx as isize;
            let mut any = false;
            for _ in 0..d {
                let off = (c % 3) as isize - 1;
                c /= 3;
                let coord = ((idx / stride) % per) as isize;
                if coord + off < 0 || coord + off >= per as isize {
                    return None;
                }
                if off != 0 {
                    any = true;
                }
                out += off * stride as isize;
                stride *= per;
            }
            any.then_some(out as usize)
        })
    }

    /// Strict local minima of `|F − p|` below the Lipschitz threshold,
    /// best first.
    fn candidates(&self, p: &[f64], cap: usize) -> Vec<usize> {
        let threshold = self.lipschitz * self.cell_diag * (self.dim as f64).sqrt();
        let res = |i: usize| dist(&self.values[i], p);
        let mut found: Vec<(f64, usize)> = Vec::new();
        for i in 0..self.values.len() {
            let r = res(i);
            if r > threshold {
                continue;
            }
            let is_min = self.neighbours(i).all(|nb| {
                let rn = res(nb);
                rn > r || (rn == r && nb > i)
            });
            if is_min {
                found.push((r, i));
            }
        }
        found.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        found.truncate(cap);
        found.into_iter().map(|(_, i)| i).collect()
    }
}

fn horizontal_polyline_length(points: &[Vec<f64>], n1: usize) -> f64 {
    let mut acc = NeumaierSum::new();
    for w in points.windows(2) {
        acc.add(dist(&w[0][..n1], &w[1][..n1]));
    }
    acc.value()
}

struct LevelSetSolver<'a> {
    level: LevelMap<'a>,
    scan: Scan,
    tol: LevelTolerances,
    max_candidates: usize,
}

impl<'a> LevelSetSolver<'a> {
    fn new(group: &'a Group, phi: &'a dyn ContactMap, j: usize, bx: &'a CoordBox, cfg: &CoareaConfig) -> Result<Self> {
        let level = LevelMap { group, phi, j, bx, tracer: cfg.tracer };
        let scan = Scan::build(&level, cfg.scan_cells_for(bx.dim()))?;
        let t = &cfg.tolerances;
        let tol = LevelTolerances {
            seed: t.tau_seed * scan.scale,
            track: t.tau_track * scan.scale,
            adj: t.tau_adj,
        };
        Ok(Self { level, scan, tol, max_candidates: cfg.max_candidates })
    }

    /// All level curves through polished seeds for the target `p`.
    fn curves(&self, p: &[f64]) -> (Vec<LevelCurve>, LevelRecord) {
        let bx = self.level.bx;
        let n = bx.dim();
        let n1 = self.level.group.horizontal_dim();
        let cands = self.scan.candidates(p, self.max_candidates);
        let mut record = LevelRecord {
            p: p.to_vec(),
            candidates: cands.len(),
            seeds: 0,
            dropped: 0,
            curves: 0,
            length: 0.0,
            flags: TraceFlags::default(),
        };
        let mut curves: Vec<LevelCurve> = Vec::new();
        let mut sags: Vec<f64> = Vec::new();
        let all_free = vec![true; n];
        for idx in cands {
            let start = &self.scan.nodes[idx];
            let seed = match self.level.polish(start, p, &all_free, self.tol.polish_target(), 30) {
                Ok((y, rn)) if rn <= self.tol.seed && bx.contains(&y) => Some(y),
                Ok((y, rn)) if rn <= self.tol.seed => {
                    // Landed just outside: pin the violated coordinates to
                    // their faces and solve on the face.
                    let mut clamped = y.clone();
                    let mut free = all_free.clone();
                    for a in 0..n {
                        if y[a] < bx.lo[a] || y[a] > bx.hi[a] {
                            clamped[a] = y[a].clamp(bx.lo[a], bx.hi[a]);
                            free[a] = false;
                        }
                    }
                    match self.level.polish(&clamped, p, &free, self.tol.polish_target(), 30) {
                        Ok((z, rz)) if rz <= self.tol.seed && bx.contains(&z) => Some(z),
                        _ => None,
                    }
                }
                _ => None,
            };
            let Some(seed) = seed else {
                record.dropped += 1;
                continue;
            };
            record.seeds += 1;
            let known = curves
                .iter()
                .zip(&sags)
                .any(|(c, sag)| point_polyline_distance(&seed, &c.points) <= 3.0 * self.tol.track + 2.0 * sag);
            if known {
                continue;
            }
            let curve = self.trace(&seed, p, n1);
            for s in &curve.stops {
                record.flags.record(*s);
            }
            sags.push(chord_sag(&curve.points));
            curves.push(curve);
        }
        record.curves = curves.len();
        let mut acc = NeumaierSum::new();
        for c in &curves {
            acc.add(c.length);
        }
        record.length = acc.value();
        (curves, record)
    }

    fn trace(&self, seed: &[f64], p: &[f64], n1: usize) -> LevelCurve {
        let (fwd, stop_f, first) = self.level.trace_direction(seed, p, None, &self.tol);
        let mut points = Vec::with_capacity(fwd.len() + 1);
        let mut stops = vec![stop_f];
        if stop_f == Stop::Loop {
            points.push(seed.to_vec());
            points.extend(fwd);
        } else {
            if let Some(d) = first {
                let back: Vec<f64> = d.iter().map(|v| -v).collect();
                let (bwd, stop_b, _) = self.level.trace_direction(seed, p, Some(&back), &self.tol);
                stops.push(stop_b);
                points.extend(bwd.into_iter().rev());
            }
            points.push(seed.to_vec());
            points.extend(fwd);
        }
        let length = horizontal_polyline_length(&points, n1);
        LevelCurve { points, length, stops }
    }
}

/// Level curves of `Pr_j ∘ φ` through `p` inside the region, in region
/// coordinates (left-translated back when the region is translated).
pub fn level_set_trace(
    group: &Group,
    phi: &dyn ContactMap,
    p: &HyperplanePoint,
    region: &Region,
    cfg: &CoareaConfig,
) -> Result<(Vec<LevelCurve>, LevelRecord)> {
    cfg.validate()?;
    let j = p.j();
    group.check_horizontal_index(j)?;
    group.check_dim(region.bx.dim())?;
    let pulled = Pulled::new(group, phi, region)?;
    let solver = LevelSetSolver::new(group, pulled.map(), j, &region.bx, cfg)?;
    let (mut curves, record) = solver.curves(p.coords());
    if let Some(g) = &region.translation {
        for c in &mut curves {
            for pt in &mut c.points {
                *pt = group.product(g, pt);
            }
        }
    }
    Ok((curves, record))
}

/// Result of the left-hand side quadrature.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LhsEstimate {
    pub estimate: Estimate,
    pub window: CoordBox,
    pub records: Vec<LevelRecord>,
}

/// Jittered sample points, one per cell of the `n^{m}` grid on `window`,
/// drawn sequentially from the seed in cell order.
fn jittered_points(window: &CoordBox, n: usize, seed: u64) -> Vec<Vec<f64>> {
    let m = window.dim();
    let total = n.pow(m as u32);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..total)
        .map(|mut flat| {
            let mut u = vec![0.0; m];
            for a in (0..m).rev() {
                u[a] = (flat % n) as f64;
                flat /= n;
            }
            for v in u.iter_mut() {
                *v = (*v + rng.random::<f64>()) / n as f64;
            }
            window.at(&u)
        })
        .collect()
}

/// Integral of per-cell values `f` (flat index, last axis fastest) over an
/// `n^m` jittered grid. The error proxy is the larger of the half-grid
/// difference and two collapsed-strata standard errors over `2^m` blocks.
fn jittered_estimate(f: &[f64], n: usize, m: usize, cell: f64) -> Estimate {
    let block = 1usize << m;
    let mut fine = NeumaierSum::new();
    let mut coarse = NeumaierSum::new();
    let mut var = NeumaierSum::new();
    let half = n / 2;
    for b in 0..half.pow(m as u32) {
        let mut base = vec![0usize; m];
        let mut rest = b;
        for a in (0..m).rev() {
            base[a] = 2 * (rest % half);
            rest /= half;
        }
        let members: Vec<f64> = (0..block)
            .map(|k| {
                let mut flat = 0;
                for a in 0..m {
                    flat = flat * n + base[a] + ((k >> (m - 1 - a)) & 1);
                }
                f[flat]
            })
            .collect();
        for v in &members {
            fine.add(v * cell);
        }
        coarse.add(members[0] * cell * block as f64);
        let mean = members.iter().sum::<f64>() / block as f64;
        let ss: f64 = members.iter().map(|v| (v - mean).powi(2)).sum();
        var.add(cell * cell * block as f64 / (block - 1) as f64 * ss);
    }
    let half_grid = (fine.value() - coarse.value()).abs();
    Estimate { value: fine.value(), err: half_grid.max(2.0 * var.value().max(0.0).sqrt()) }
}

/// `∫ H¹(level(p) ∩ A) dℒ^{N−1}(p)` over a jittered grid on the projected
/// window.
pub fn lhs_integral(group: &Group, phi: &dyn ContactMap, region: &Region, j: usize, cfg: &CoareaConfig) -> Result<LhsEstimate> {
    cfg.validate()?;
    group.check_horizontal_index(j)?;
    group.check_dim(region.bx.dim())?;
    let pulled = Pulled::new(group, phi, region)?;
    let solver = LevelSetSolver::new(group, pulled.map(), j, &region.bx, cfg)?;
    let window = solver.scan.window.clone();
    let n = cfg.p_grid;
    let m = window.dim();
    let samples = jittered_points(&window, n, cfg.seed);
    let records: Vec<LevelRecord> = samples.par_iter().map(|p| solver.curves(p).1).collect();

    let cell = window.volume() / samples.len() as f64;
    let estimate = jittered_estimate(&records.iter().map(|r| r.length).collect::<Vec<_>>(), n, m, cell);
    Ok(LhsEstimate { estimate, window, records })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    InequalityOk,
    EqualityOk,
    Violation,
}

impl Verdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::InequalityOk => "inequality-ok",
            Verdict::EqualityOk => "equality-ok",
            Verdict::Violation => "violation",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LhsSummary {
    pub p_samples: usize,
    pub with_curves: usize,
    pub candidates: usize,
    pub seeds: usize,
    pub dropped_seeds: usize,
    pub curves: usize,
    pub flags: TraceFlags,
    /// Fraction of samples whose traces ended abnormally.
    pub flagged_fraction: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoareaReport {
    pub schema: String,
    pub map: String,
    /// 1-based horizontal index.
    pub j: usize,
    #[serde(flatten)]
    pub region: Region,
    pub lhs: Estimate,
    pub rhs: Estimate,
    pub slack: f64,
    pub verdict: Verdict,
    pub equality_expected: bool,
    /// `|lhs − rhs|` within `max(combined tolerance, τ_eq · rhs)`.
    pub equality_holds: bool,
    pub combined_tolerance: f64,
    pub window: CoordBox,
    pub rhs_nodes: QuadratureStats,
    pub lhs_summary: LhsSummary,
    pub diagnostics: Vec<LevelRecord>,
    pub settings: CoareaConfig,
}

/// Violation iff `lhs > rhs + lhs_err + rhs_err + τ_verdict · max(|lhs|, |rhs|)`.
pub fn verdict(lhs: &Estimate, rhs: &Estimate, equality_expected: bool, tol: &Tolerances) -> (Verdict, bool, f64) {
    let combined = lhs.err + rhs.err + tol.tau_verdict * lhs.value.abs().max(rhs.value.abs());
    let holds = (lhs.value - rhs.value).abs() <= combined.max(tol.tau_eq * rhs.value.abs());
    let v = if lhs.value > rhs.value + combined {
        Verdict::Violation
    } else if equality_expected && holds {
        Verdict::EqualityOk
    } else {
        Verdict::InequalityOk
    };
    (v, holds, combined)
}

/// Estimates both sides and classifies the outcome. Equality is expected
/// on the first Heisenberg group and for maps flagged as having finite
/// codistortion.
pub fn verify_coarea(group: &Group, phi: &dyn ContactMap, region: &Region, j: usize, cfg: &CoareaConfig) -> Result<CoareaReport> {
    cfg.validate()?;
    let (rhs, rhs_nodes) = rhs_integral(group, phi, region, j, cfg)?;
    let lhs = lhs_integral(group, phi, region, j, cfg)?;
    let equality_expected = is_heisenberg1(group) || phi.finite_codistortion();
    let (v, holds, combined) = verdict(&lhs.estimate, &rhs, equality_expected, &cfg.tolerances);

    let mut flags = TraceFlags::default();
    let mut summary = LhsSummary {
        p_samples: lhs.records.len(),
        with_curves: 0,
        candidates: 0,
        seeds: 0,
        dropped_seeds: 0,
        curves: 0,
        flags,
        flagged_fraction: 0.0,
    };
    let mut flagged = 0usize;
    for r in &lhs.records {
        summary.with_curves += (r.curves > 0) as usize;
        summary.candidates += r.candidates;
        summary.seeds += r.seeds;
        summary.dropped_seeds += r.dropped;
        summary.curves += r.curves;
        flags.add(&r.flags);
        flagged += (r.flags.abnormal() > 0) as usize;
    }
    summary.flags = flags;
    summary.flagged_fraction = flagged as f64 / lhs.records.len().max(1) as f64;

    Ok(CoareaReport {
        schema: group.name().to_string(),
        map: phi.name(),
        j: j + 1,
        region: region.clone(),
        lhs: lhs.estimate,
        rhs,
        slack: rhs.value - lhs.estimate.value,
        verdict: v,
        equality_expected,
        equality_holds: holds,
        combined_tolerance: combined,
        window: lhs.window,
        rhs_nodes,
        lhs_summary: summary,
        diagnostics: lhs.records,
        settings: CoareaConfig { scan_cells: Some(cfg.scan_cells_for(group.dim())), ..cfg.clone() },
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EilenbergReport {
    pub lhs: Estimate,
    pub lipschitz: f64,
    pub homogeneous_dim: usize,
    pub volume: f64,
    /// `Lip^{ν−1} · vol(E)`.
    pub bound: f64,
    pub ratio: f64,
}

/// `lhs / (Lip(φ)^{ν−1} · vol(E))`. The ratio should stay bounded across a
/// family of regions and maps.
pub fn eilenberg_bound_check(group: &Group, phi: &dyn ContactMap, region: &Region, j: usize, cfg: &CoareaConfig) -> Result<EilenbergReport> {
    let lip = phi.lipschitz().ok_or_else(|| Error::MissingLipschitz(phi.name()))?;
    let lhs = lhs_integral(group, phi, region, j, cfg)?.estimate;
    let nu = group.homogeneous_dim();
    let volume = region.volume();
    let bound = lip.powi(nu as i32 - 1) * volume;
    let ratio = if bound > 0.0 { lhs.value / bound } else { 0.0 };
    Ok(EilenbergReport { lhs, lipschitz: lip, homogeneous_dim: nu, volume, bound, ratio })
}

/// Traced length against the covering oracle at one `p`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CrossCheck {
    pub p: Vec<f64>,
    pub traced: f64,
    pub covered: f64,
    pub agree: bool,
}

/// Agreement within `rel` relative, or both lengths below `2ε`.
pub fn lengths_agree(traced: f64, covered: f64, rel: f64, eps: f64) -> bool {
    (traced - covered).abs() <= rel * traced.max(covered) || (traced <= 2.0 * eps && covered <= 2.0 * eps)
}

/// Compares the tracer with the covering oracle on every `stride`-th cell
/// (per axis) of the jittered `p` grid.
pub fn cross_validate(
    group: &Group,
    phi: &dyn ContactMap,
    region: &Region,
    j: usize,
    cfg: &CoareaConfig,
    stride: usize,
    oracle: &OracleConfig,
) -> Result<Vec<CrossCheck>> {
    cfg.validate()?;
    group.check_horizontal_index(j)?;
    let pulled = Pulled::new(group, phi, region)?;
    let solver = LevelSetSolver::new(group, pulled.map(), j, &region.bx, cfg)?;
    let n = cfg.p_grid;
    let m = solver.scan.window.dim();
    let samples = jittered_points(&solver.scan.window, n, cfg.seed);
    let stride = stride.max(1);
    let chosen: Vec<&Vec<f64>> = samples
        .iter()
        .enumerate()
        .filter(|(flat, _)| {
            let mut f = *flat;
            (0..m).all(|_| {
                let ok = (f % n) % stride == stride / 2;
                f /= n;
                ok
            })
        })
        .map(|(_, p)| p)
        .collect();
    chosen
        .par_iter()
        .map(|p| {
            let traced = solver.curves(p).1.length;
            let hp = HyperplanePoint::new(group, j, p.to_vec())?;
            let covered = lhs_covering_oracle(group, phi, &hp, region, oracle)?.value;
            Ok(CrossCheck {
                p: p.to_vec(),
                traced,
                covered,
                agree: lengths_agree(traced, covered, 0.15, oracle.eps),
            })
        })
        .collect()
}

/// Embeds a `Π_j` coordinate vector (coordinate `j` deleted) into the group.
pub fn embed_hyperplane(coords: &[f64], j: usize) -> Vec<f64> {
    insert_zero(coords, j)
}
