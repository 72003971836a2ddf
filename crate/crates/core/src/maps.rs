//! Contact maps and the builtin fixture registry.

use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::group::Group;

/// A map from a Carnot group to itself, in canonical coordinates.
pub trait ContactMap: Send + Sync {
    fn name(&self) -> String;

    fn eval(&self, x: &[f64]) -> Result<Vec<f64>>;

    /// Closed-form horizontal block of the Pansu differential, if known.
    fn analytic_block(&self, _x: &[f64]) -> Option<DMatrix<f64>> {
        None
    }

    fn lipschitz(&self) -> Option<f64> {
        None
    }

    /// Whether the map is known to have finite codistortion, so that the
    /// coarea equality is expected in any group.
    fn finite_codistortion(&self) -> bool {
        false
    }
}

/// True if `group` is the first Heisenberg group in the standard basis.
pub fn is_heisenberg1(group: &Group) -> bool {
    group.dim() == 3
        && group.horizontal_dim() == 2
        && group.product(&[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0]) == [1.0, 1.0, 0.5]
}

#[derive(Clone, Debug, PartialEq)]
pub enum MapKind {
    Identity,
    /// `x ↦ g·x`.
    Translate { g: Vec<f64> },
    Dilate { lambda: f64 },
    /// `(x, y, z) ↦ (λx, μy, λμz)` on the first Heisenberg group.
    Aniso { lambda: f64, mu: f64 },
    /// Rotation about the vertical axis of the first Heisenberg group.
    Rotate { theta: f64 },
    /// `x ↦ exp(x_1 X_1)`.
    Degenerate,
    /// `(x, y, z) ↦ (x + a y², y, z − a y³/6)` on the first Heisenberg group.
    Shear { a: f64 },
    /// Contact lift of a fold on the first Heisenberg group. With
    /// `w = z − xy/2` and `g(w) = w²/2 + s w`:
    /// `(x, y, z) ↦ (x, g'(w) y, g(w) + x g'(w) y / 2)`. The horizontal
    /// Jacobian `g'(w)` vanishes on the surface `w = −s`.
    Fold { s: f64 },
}

#[derive(Clone, Debug)]
pub struct BuiltinMap {
    kind: MapKind,
    spec: String,
    group: Group,
}

fn parse_params(spec: &str, args: &str) -> Result<Vec<(String, f64)>> {
    args.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|kv| {
            let (k, v) = kv.split_once('=').ok_or_else(|| Error::UnknownMap(spec.to_string()))?;
            let v: f64 = v.trim().parse().map_err(|_| Error::UnknownMap(spec.to_string()))?;
            if !v.is_finite() {
                return Err(Error::UnknownMap(spec.to_string()));
            }
            Ok((k.trim().to_string(), v))
        })
        .collect()
}

impl BuiltinMap {
    /// Parses `name` or `name:key=value,...`, e.g. `shear:a=0.5`,
    /// `dilate:lambda=2`, `translate:x1=0.5,x3=-1`.
    pub fn parse(group: &Group, spec: &str) -> Result<Self> {
        let bad = || Error::UnknownMap(spec.to_string());
        let (name, args) = spec.split_once(':').unwrap_or((spec, ""));
        let name = name.trim();
        let params = parse_params(spec, args)?;
        let get = |key: &str, default: Option<f64>| -> Result<f64> {
            params.iter().find(|(k, _)| k == key).map(|(_, v)| *v).or(default).ok_or_else(bad)
        };
        let allowed: &[&str] = match name {
            "identity" | "degenerate" | "translate" => &[],
            "dilate" => &["lambda"],
            "aniso" => &["lambda", "mu"],
            "rotate" => &["theta"],
            "shear" => &["a"],
            "fold" => &["s"],
            _ => return Err(bad()),
        };
        let coord_index = |k: &str| {
            k.strip_prefix('x')
                .and_then(|i| i.parse::<usize>().ok())
                .filter(|&i| i >= 1 && i <= group.dim())
        };
        for (k, _) in &params {
            let coord_key = name == "translate" && coord_index(k).is_some();
            if !allowed.contains(&k.as_str()) && !coord_key {
                return Err(bad());
            }
        }
        let kind = match name {
            "identity" => MapKind::Identity,
            "degenerate" => MapKind::Degenerate,
            "translate" => {
                let mut g = vec![0.0; group.dim()];
                for (k, v) in &params {
                    g[coord_index(k).ok_or_else(bad)? - 1] = *v;
                }
                MapKind::Translate { g }
            }
            "dilate" => {
                let lambda = get("lambda", None)?;
                if lambda <= 0.0 {
                    return Err(Error::NonPositiveDilation(lambda));
                }
                MapKind::Dilate { lambda }
            }
            "aniso" => MapKind::Aniso { lambda: get("lambda", None)?, mu: get("mu", None)? },
            "rotate" => MapKind::Rotate { theta: get("theta", None)? },
            "shear" => MapKind::Shear { a: get("a", None)? },
            "fold" => MapKind::Fold { s: get("s", Some(0.0))? },
            _ => return Err(bad()),
        };
        Self::new(group, kind, spec.trim())
    }

    pub fn new(group: &Group, kind: MapKind, spec: &str) -> Result<Self> {
        let h1_only = matches!(
            kind,
            MapKind::Aniso { .. } | MapKind::Rotate { .. } | MapKind::Shear { .. } | MapKind::Fold { .. }
        );
        if h1_only && !is_heisenberg1(group) {
            return Err(Error::Config(format!("map `{spec}` is only defined on heisenberg(1)")));
        }
        if let MapKind::Translate { g } = &kind {
            group.check_dim(g.len())?;
        }
        Ok(Self { kind, spec: spec.to_string(), group: group.clone() })
    }

    pub fn kind(&self) -> &MapKind {
        &self.kind
    }

    fn eval_raw(&self, p: &[f64]) -> Vec<f64> {
        match &self.kind {
            MapKind::Identity => p.to_vec(),
            MapKind::Translate { g } => self.group.product(g, p),
            MapKind::Dilate { lambda } => self.group.dilate_raw(*lambda, p),
            MapKind::Aniso { lambda, mu } => vec![lambda * p[0], mu * p[1], lambda * mu * p[2]],
            MapKind::Rotate { theta } => {
                let (s, c) = theta.sin_cos();
                vec![c * p[0] - s * p[1], s * p[0] + c * p[1], p[2]]
            }
            MapKind::Degenerate => {
                let mut out = vec![0.0; p.len()];
                out[0] = p[0];
                out
            }
            MapKind::Shear { a } => {
                let (x, y, z) = (p[0], p[1], p[2]);
                vec![x + a * y * y, y, z - a * y * y * y / 6.0]
            }
            MapKind::Fold { s } => {
                let (x, y, z) = (p[0], p[1], p[2]);
                let w = z - x * y / 2.0;
                let g = 0.5 * w * w + s * w;
                let dg = w + s;
                vec![x, dg * y, g + x * dg * y / 2.0]
            }
        }
    }
}

impl ContactMap for BuiltinMap {
    fn name(&self) -> String {
        self.spec.clone()
    }

    fn eval(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.group.check_dim(x.len())?;
        Ok(self.eval_raw(x))
    }

    fn analytic_block(&self, p: &[f64]) -> Option<DMatrix<f64>> {
        let n1 = self.group.horizontal_dim();
        let block = match &self.kind {
            MapKind::Identity | MapKind::Translate { .. } => DMatrix::identity(n1, n1),
            MapKind::Dilate { lambda } => DMatrix::identity(n1, n1) * *lambda,
            MapKind::Aniso { lambda, mu } => DMatrix::from_row_slice(2, 2, &[*lambda, 0.0, 0.0, *mu]),
            MapKind::Rotate { theta } => {
                let (s, c) = theta.sin_cos();
                DMatrix::from_row_slice(2, 2, &[c, -s, s, c])
            }
            MapKind::Degenerate => {
                let mut m = DMatrix::zeros(n1, n1);
                m[(0, 0)] = 1.0;
                m
            }
            MapKind::Shear { a } => DMatrix::from_row_slice(2, 2, &[1.0, 2.0 * a * p[1], 0.0, 1.0]),
            MapKind::Fold { s } => {
                let (x, y, z) = (p[0], p[1], p[2]);
                let w = z - x * y / 2.0;
                DMatrix::from_row_slice(2, 2, &[1.0, 0.0, -y * y, w + s])
            }
        };
        Some(block)
    }

    fn lipschitz(&self) -> Option<f64> {
        match &self.kind {
            MapKind::Identity | MapKind::Translate { .. } | MapKind::Rotate { .. } | MapKind::Degenerate => Some(1.0),
            MapKind::Dilate { lambda } => Some(*lambda),
            MapKind::Aniso { lambda, mu } => Some(lambda.abs().max(mu.abs())),
            MapKind::Shear { .. } | MapKind::Fold { .. } => None,
        }
    }

    fn finite_codistortion(&self) -> bool {
        match &self.kind {
            MapKind::Identity
            | MapKind::Translate { .. }
            | MapKind::Dilate { .. }
            | MapKind::Rotate { .. }
            | MapKind::Shear { .. } => true,
            MapKind::Aniso { lambda, mu } => *lambda != 0.0 && *mu != 0.0,
            MapKind::Degenerate | MapKind::Fold { .. } => false,
        }
    }
}

macro_rules! forward_contact_map {
    ($($ty:ty),*) => {$(
        impl<T: ContactMap + ?Sized> ContactMap for $ty {
            fn name(&self) -> String {
                (**self).name()
            }
            fn eval(&self, x: &[f64]) -> Result<Vec<f64>> {
                (**self).eval(x)
            }
            fn analytic_block(&self, x: &[f64]) -> Option<DMatrix<f64>> {
                (**self).analytic_block(x)
            }
            fn lipschitz(&self) -> Option<f64> {
                (**self).lipschitz()
            }
            fn finite_codistortion(&self) -> bool {
                (**self).finite_codistortion()
            }
        }
    )*};
}

forward_contact_map!(&T, Arc<T>, Box<T>);

/// `φ ∘ l_g`, i.e. `x ↦ φ(g·x)`. Left translations have the identity as
/// Pansu differential, so the differential of the composition at `x` is
/// that of `φ` at `g·x`.
pub struct PrecomposeTranslation<M> {
    inner: M,
    g: Vec<f64>,
    group: Group,
}

impl<M: ContactMap> PrecomposeTranslation<M> {
    pub fn new(group: &Group, inner: M, g: Vec<f64>) -> Result<Self> {
        group.check_dim(g.len())?;
        Ok(Self { inner, g, group: group.clone() })
    }
}

impl<M: ContactMap> ContactMap for PrecomposeTranslation<M> {
    fn name(&self) -> String {
        let g: Vec<String> = self.g.iter().map(|v| v.to_string()).collect();
        format!("{}@translate({})", self.inner.name(), g.join(","))
    }

    fn eval(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.group.check_dim(x.len())?;
        self.inner.eval(&self.group.product(&self.g, x))
    }

    fn analytic_block(&self, x: &[f64]) -> Option<DMatrix<f64>> {
        self.inner.analytic_block(&self.group.product(&self.g, x))
    }

    fn lipschitz(&self) -> Option<f64> {
        self.inner.lipschitz()
    }

    fn finite_codistortion(&self) -> bool {
        self.inner.finite_codistortion()
    }
}
