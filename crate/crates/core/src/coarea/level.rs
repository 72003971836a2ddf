//! Level sets of `F = Pr_j ∘ φ` on a box: residual polishing, seed scans and
//! the horizontal curve tracer.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::group::Group;
use crate::linalg::min_norm_step;
use crate::maps::ContactMap;
use crate::measure::CoordBox;
use crate::pansu::{adjugate_horizontal_column, complete_hom, horizontal_block_central, norm};
use crate::projection::proj_raw;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TracerConfig {
    /// Local error tolerance of the embedded Runge–Kutta pair, relative to
    /// the box diameter.
    pub rtol: f64,
    /// Largest step, as a fraction of the box diameter.
    pub h_max: f64,
    /// Smallest step, as a fraction of the box diameter.
    pub h_min: f64,
    pub max_steps: usize,
    /// Difference step for the direction field, relative to the box diameter.
    pub fd_step: f64,
}

impl Default for TracerConfig {
    fn default() -> Self {
        Self { rtol: 1e-7, h_max: 0.02, h_min: 1e-10, max_steps: 20_000, fd_step: 1e-5 }
    }
}

/// Why one direction of a trace stopped.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stop {
    Exit,
    Loop,
    Stall,
    MaxSteps,
    Drift,
    Failure,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceFlags {
    pub exits: usize,
    pub loops: usize,
    pub stalls: usize,
    pub max_steps: usize,
    pub drifts: usize,
    pub failures: usize,
}

impl TraceFlags {
    pub fn record(&mut self, stop: Stop) {
        match stop {
            Stop::Exit => self.exits += 1,
            Stop::Loop => self.loops += 1,
            Stop::Stall => self.stalls += 1,
            Stop::MaxSteps => self.max_steps += 1,
            Stop::Drift => self.drifts += 1,
            Stop::Failure => self.failures += 1,
        }
    }

    pub fn add(&mut self, other: &TraceFlags) {
        self.exits += other.exits;
        self.loops += other.loops;
        self.stalls += other.stalls;
        self.max_steps += other.max_steps;
        self.drifts += other.drifts;
        self.failures += other.failures;
    }

    /// Anything other than leaving the box or closing up.
    pub fn abnormal(&self) -> usize {
        self.stalls + self.max_steps + self.drifts + self.failures
    }
}

/// Residual tolerances, already multiplied by the problem scale.
#[derive(Clone, Copy, Debug)]
pub(crate) struct LevelTolerances {
    pub seed: f64,
    pub track: f64,
    pub adj: f64,
}

impl LevelTolerances {
    /// Polishing aims well below the acceptance threshold so that separate
    /// traces of one curve stay within the deduplication distance.
    pub fn polish_target(&self) -> f64 {
        1e-3 * self.track
    }
}

/// `F(y) = Pr_j(φ(y))` restricted to a box, with a target value `p`.
pub(crate) struct LevelMap<'a> {
    pub group: &'a Group,
    pub phi: &'a dyn ContactMap,
    pub j: usize,
    pub bx: &'a CoordBox,
    pub tracer: TracerConfig,
}

pub(crate) fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

fn margin(bx: &CoordBox, y: &[f64]) -> f64 {
    (0..bx.dim()).map(|a| (y[a] - bx.lo[a]).min(bx.hi[a] - y[a])).fold(f64::INFINITY, f64::min)
}

impl<'a> LevelMap<'a> {
    pub fn f(&self, y: &[f64]) -> Result<Vec<f64>> {
        let v = self.phi.eval(y)?;
        if v.len() != y.len() || v.iter().any(|c| !c.is_finite()) {
            return Err(Error::Evaluation(format!("bad map value at {y:?}")));
        }
        Ok(proj_raw(self.group, &v, self.j))
    }

    fn residual(&self, y: &[f64], p: &[f64]) -> Result<Vec<f64>> {
        Ok(self.f(y)?.iter().zip(p).map(|(a, b)| a - b).collect())
    }

    fn jacobian(&self, y: &[f64], free: &[bool]) -> Result<DMatrix<f64>> {
        let n = y.len();
        let mut jac = DMatrix::zeros(n - 1, n);
        let scale = self.bx.diameter();
        for c in 0..n {
            if !free[c] {
                continue;
            }
            let h = 1e-6 * scale.max(y[c].abs());
            let mut yp = y.to_vec();
            let mut ym = y.to_vec();
            yp[c] += h;
            ym[c] -= h;
            let (fp, fm) = (self.f(&yp)?, self.f(&ym)?);
            for r in 0..n - 1 {
                jac[(r, c)] = (fp[r] - fm[r]) / (2.0 * h);
            }
        }
        Ok(jac)
    }

    /// Damped Gauss–Newton toward `F = p`, moving only the `free`
    /// coordinates. Returns the final point and residual norm.
    pub fn polish(&self, y0: &[f64], p: &[f64], free: &[bool], target: f64, max_iter: usize) -> Result<(Vec<f64>, f64)> {
        let mut y = y0.to_vec();
        let mut r = self.residual(&y, p)?;
        let mut rn = norm(&r);
        let mut damping = 0.0;
        for _ in 0..max_iter {
            if rn <= target {
                break;
            }
            let jac = self.jacobian(&y, free)?;
            let jj = (&jac * jac.transpose()).amax().max(1e-300);
            let mut improved = false;
            for _ in 0..8 {
                let Some(step) = min_norm_step(&jac, &DVector::from_vec(r.clone()), damping * jj) else {
                    damping = if damping == 0.0 { 1e-10 } else { damping * 100.0 };
                    continue;
                };
                let cand: Vec<f64> = y.iter().zip(step.iter()).map(|(a, b)| a + b).collect();
                let rc = self.residual(&cand, p)?;
                let rcn = norm(&rc);
                if rcn < rn {
                    y = cand;
                    r = rc;
                    rn = rcn;
                    damping *= 0.1;
                    improved = true;
                    break;
                }
                damping = if damping == 0.0 { 1e-10 } else { damping * 100.0 };
            }
            if !improved {
                break;
            }
        }
        Ok((y, rn))
    }

    /// Normalized horizontal direction `adj D̂φ(y)⟨X_j⟩ / |…|`, or `None`
    /// when the column is below `tau_adj`.
    fn direction(&self, y: &[f64], tau_adj: f64) -> Result<Option<Vec<f64>>> {
        let t = self.tracer.fd_step * self.bx.diameter();
        let block = horizontal_block_central(self.group, self.phi, y, t)?;
        let hom = complete_hom(self.group, &block)?;
        let col = adjugate_horizontal_column(&hom, self.j);
        let n = norm(&col);
        if !(n >= tau_adj) {
            return Ok(None);
        }
        Ok(Some(col.iter().map(|c| c / n).collect()))
    }

    /// Coordinate velocity of the unit horizontal field through `y`,
    /// oriented to agree with `reference`.
    fn velocity(&self, y: &[f64], reference: Option<&[f64]>, tau_adj: f64) -> Result<Option<(Vec<f64>, Vec<f64>)>> {
        let Some(mut a) = self.direction(y, tau_adj)? else {
            return Ok(None);
        };
        if let Some(reference) = reference {
            let dot: f64 = a.iter().zip(reference).map(|(u, v)| u * v).sum();
            if dot < 0.0 {
                a.iter_mut().for_each(|v| *v = -*v);
            }
        }
        let mut full = vec![0.0; y.len()];
        full[..a.len()].copy_from_slice(&a);
        Ok(Some((self.group.left_invariant_field(y, &full), a)))
    }

    /// One Bogacki–Shampine step of size `h`. Returns the new point and the
    /// embedded error estimate.
    fn bs3(&self, y: &[f64], k1: &[f64], a1: &[f64], h: f64, tau_adj: f64) -> Result<Option<(Vec<f64>, f64)>> {
        let axpy = |base: &[f64], terms: &[(f64, &[f64])]| -> Vec<f64> {
            let mut out = base.to_vec();
            for (c, k) in terms {
                for (o, v) in out.iter_mut().zip(k.iter()) {
                    *o += c * v;
                }
            }
            out
        };
        let Some((k2, _)) = self.velocity(&axpy(y, &[(0.5 * h, k1)]), Some(a1), tau_adj)? else {
            return Ok(None);
        };
        let Some((k3, _)) = self.velocity(&axpy(y, &[(0.75 * h, &k2)]), Some(a1), tau_adj)? else {
            return Ok(None);
        };
        let next = axpy(y, &[(2.0 / 9.0 * h, k1), (h / 3.0, &k2), (4.0 / 9.0 * h, &k3)]);
        let Some((k4, _)) = self.velocity(&next, Some(a1), tau_adj)? else {
            return Ok(None);
        };
        let err = k1
            .iter()
            .zip(&k2)
            .zip(&k3)
            .zip(&k4)
            .map(|(((a, b), c), d)| (h * (-5.0 / 72.0 * a + b / 12.0 + c / 9.0 - d / 8.0)).powi(2))
            .sum::<f64>()
            .sqrt();
        Ok(Some((next, err)))
    }

    /// Follows the level set from `y0` in one direction until it leaves
    /// the box, closes up, or stops for another reason. The returned points
    /// exclude `y0`.
    pub fn trace_direction(
        &self,
        y0: &[f64],
        p: &[f64],
        orientation: Option<&[f64]>,
        tol: &LevelTolerances,
    ) -> (Vec<Vec<f64>>, Stop, Option<Vec<f64>>) {
        let diam = self.bx.diameter();
        let h_max = self.tracer.h_max * diam;
        let h_min = self.tracer.h_min * diam;
        let atol = self.tracer.rtol * diam;
        let all_free = vec![true; y0.len()];
        let mut pts = Vec::new();
        let mut y = y0.to_vec();
        let mut h = 0.25 * h_max;
        let mut reference: Option<Vec<f64>> = orientation.map(|o| o.to_vec());
        let mut first_dir = None;
        let mut travelled = 0.0;
        let n1 = self.group.horizontal_dim();

        for _ in 0..self.tracer.max_steps {
            let (k1, a1) = match self.velocity(&y, reference.as_deref(), tol.adj) {
                Ok(Some(v)) => v,
                Ok(None) => return (pts, Stop::Stall, first_dir),
                Err(_) => return (pts, Stop::Failure, first_dir),
            };
            if first_dir.is_none() {
                first_dir = Some(a1.clone());
            }
            // Adaptive step.
            let (next, err) = loop {
                match self.bs3(&y, &k1, &a1, h, tol.adj) {
                    Ok(Some((next, err))) if err <= atol || h <= h_min => break (next, err),
                    Ok(Some((_, err))) => h = (h * (0.9 * (atol / err).cbrt()).clamp(0.2, 0.9)).max(h_min),
                    Ok(None) => {
                        if h <= h_min {
                            return (pts, Stop::Stall, first_dir);
                        }
                        h = (0.25 * h).max(h_min);
                    }
                    Err(_) => return (pts, Stop::Failure, first_dir),
                }
            };
            let step_h = h;
            if err > 0.0 {
                h = (h * (0.9 * (atol / err).cbrt()).clamp(0.2, 5.0)).min(h_max);
            } else {
                h = (h * 5.0).min(h_max);
            }

            let next = match self.polish(&next, p, &all_free, tol.polish_target(), 4) {
                Ok((yn, rn)) if rn <= 100.0 * tol.track => yn,
                Ok(_) => return (pts, Stop::Drift, first_dir),
                Err(_) => return (pts, Stop::Failure, first_dir),
            };

            if margin(self.bx, &next) < 0.0 {
                let exit = self.locate_exit(&y, &k1, &a1, step_h, p, tol);
                if let Some(e) = exit {
                    pts.push(e);
                }
                return (pts, Stop::Exit, first_dir);
            }

            let seg: f64 = dist(&y[..n1], &next[..n1]);
            travelled += seg;
            // Closed curve: back near the start after going some distance.
            if orientation.is_none() && travelled > 4.0 * h_max && dist(&next, y0) < step_h.max(h) {
                pts.push(next);
                pts.push(y0.to_vec());
                return (pts, Stop::Loop, first_dir);
            }
            y = next;
            reference = Some(a1);
            pts.push(y.clone());
        }
        (pts, Stop::MaxSteps, first_dir)
    }

    /// Point where the step from `y` crosses the box boundary, by the
    /// Illinois variant of regula falsi on the step length.
    fn locate_exit(&self, y: &[f64], k1: &[f64], a1: &[f64], h: f64, p: &[f64], tol: &LevelTolerances) -> Option<Vec<f64>> {
        let at = |s: f64| -> Option<Vec<f64>> {
            if s == 0.0 {
                return Some(y.to_vec());
            }
            self.bs3(y, k1, a1, s, tol.adj).ok().flatten().map(|(v, _)| v)
        };
        let (mut a, mut fa) = (0.0, margin(self.bx, y));
        let mut b = h;
        let mut fb = margin(self.bx, &at(b)?);
        if fa < 0.0 {
            return None;
        }
        let mut side = 0i32;
        let mut point = None;
        for _ in 0..60 {
            let c = if fa - fb != 0.0 { (a * fb - b * fa) / (fb - fa) } else { 0.5 * (a + b) };
            let c = if c > a && c < b { c } else { 0.5 * (a + b) };
            let pc = at(c)?;
            let fc = margin(self.bx, &pc);
            point = Some(pc);
            if fc.abs() <= 1e-13 * self.bx.diameter() || (b - a) <= 1e-14 * h {
                break;
            }
            if fc > 0.0 {
                a = c;
                fa = fc;
                if side == 1 {
                    fb *= 0.5;
                }
                side = 1;
            } else {
                b = c;
                fb = fc;
                if side == -1 {
                    fa *= 0.5;
                }
                side = -1;
            }
        }
        let pc = point?;
        // Settle back onto the level set, keeping coordinates on a face fixed.
        let diam = self.bx.diameter();
        let free: Vec<bool> = (0..pc.len())
            .map(|k| (pc[k] - self.bx.lo[k]).abs() > 1e-9 * diam && (self.bx.hi[k] - pc[k]).abs() > 1e-9 * diam)
            .collect();
        let mut clamped = pc.clone();
        for k in 0..clamped.len() {
            clamped[k] = clamped[k].clamp(self.bx.lo[k], self.bx.hi[k]);
        }
        match self.polish(&clamped, p, &free, tol.polish_target(), 6) {
            Ok((e, rn)) if rn <= 100.0 * tol.track && self.bx.contains_within(&e, 1e-9 * diam) => Some(e),
            _ => Some(clamped),
        }
    }
}

/// Distance from `q` to the polyline `pts`.
pub(crate) fn point_polyline_distance(q: &[f64], pts: &[Vec<f64>]) -> f64 {
    if pts.len() == 1 {
        return dist(q, &pts[0]);
    }
    let mut best = f64::INFINITY;
    for w in pts.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        let ab: Vec<f64> = a.iter().zip(b).map(|(x, y)| y - x).collect();
        let aq: Vec<f64> = a.iter().zip(q).map(|(x, y)| y - x).collect();
        let len2: f64 = ab.iter().map(|v| v * v).sum();
        let t = if len2 > 0.0 { (ab.iter().zip(&aq).map(|(u, v)| u * v).sum::<f64>() / len2).clamp(0.0, 1.0) } else { 0.0 };
        let d = aq.iter().zip(&ab).map(|(v, u)| (v - t * u).powi(2)).sum::<f64>().sqrt();
        best = best.min(d);
    }
    best
}

/// Largest distance of an interior vertex from the chord through its two
/// neighbours, a bound on how far the curve strays from the polyline.
pub(crate) fn chord_sag(pts: &[Vec<f64>]) -> f64 {
    pts.windows(3)
        .map(|w| point_polyline_distance(&w[1], &[w[0].clone(), w[2].clone()]))
        .fold(0.0, f64::max)
}
