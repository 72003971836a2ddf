//! Presentations of stratified nilpotent Lie algebras.
//!
//! A [`GroupSchema`] lists the degree of every basis field, the structure
//! constants `[X_i, X_j] = Σ_k c_ij^k X_k` as exact rationals, and for each
//! basis vector above the first stratum at least one bracket expression
//! through lower strata. Validation is exact (rational arithmetic), so a
//! schema either satisfies every invariant or is rejected.

use std::collections::BTreeMap;

use num_rational::Rational64;

use crate::error::{Error, Result};

/// Highest nilpotency step the group law supports.
pub const MAX_STEP: usize = 4;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StructureConstant {
    pub i: usize,
    pub j: usize,
    pub k: usize,
    pub value: Rational64,
}

/// `X_target` is expressed through the bracket `[X_left, X_right]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BracketRule {
    pub target: usize,
    pub left: usize,
    pub right: usize,
}

/// Graded basis data for a Carnot group. Indices are 0-based.
#[derive(Clone, Debug, PartialEq)]
pub struct GroupSchema {
    pub name: String,
    pub degrees: Vec<usize>,
    pub strata_dims: Vec<usize>,
    pub structure_constants: Vec<StructureConstant>,
    pub bracket_table: Vec<BracketRule>,
}

fn violation(invariant: &'static str, detail: impl Into<String>) -> Error {
    Error::Schema {
        invariant,
        detail: detail.into(),
    }
}

type SparseVec = BTreeMap<usize, Rational64>;

impl GroupSchema {
    pub fn dim(&self) -> usize {
        self.degrees.len()
    }

    pub fn step(&self) -> usize {
        self.degrees.last().copied().unwrap_or(0)
    }

    pub fn homogeneous_dim(&self) -> usize {
        self.degrees.iter().sum()
    }

    /// Index range of the basis vectors of stratum `s` (1-based stratum).
    pub fn stratum_range(&self, s: usize) -> std::ops::Range<usize> {
        let start = self.degrees.partition_point(|&d| d < s);
        let end = self.degrees.partition_point(|&d| d <= s);
        start..end
    }

    /// Structure constants as a dense-in-(i,j) sparse map, keyed by `(i, j)`.
    fn constant_table(&self) -> BTreeMap<(usize, usize), SparseVec> {
        let mut table: BTreeMap<(usize, usize), SparseVec> = BTreeMap::new();
        for c in &self.structure_constants {
            let entry = table.entry((c.i, c.j)).or_default();
            *entry.entry(c.k).or_insert_with(|| Rational64::from_integer(0)) += c.value;
        }
        for v in table.values_mut() {
            v.retain(|_, x| *x != Rational64::from_integer(0));
        }
        table
    }

    fn bracket_exact(table: &BTreeMap<(usize, usize), SparseVec>, u: &SparseVec, v: &SparseVec) -> SparseVec {
        let mut out = SparseVec::new();
        for (&i, &a) in u {
            for (&j, &b) in v {
                if let Some(col) = table.get(&(i, j)) {
                    for (&k, &c) in col {
                        *out.entry(k).or_insert_with(|| Rational64::from_integer(0)) += a * b * c;
                    }
                }
            }
        }
        out.retain(|_, x| *x != Rational64::from_integer(0));
        out
    }

    fn basis(i: usize) -> SparseVec {
        let mut v = SparseVec::new();
        v.insert(i, Rational64::from_integer(1));
        v
    }

    /// Checks every invariant in a fixed order and reports the first failure.
    pub fn validate(&self) -> Result<()> {
        let n = self.dim();
        if n == 0 {
            return Err(violation("dimension", "schema has no basis vectors"));
        }
        if self.degrees[0] != 1 {
            return Err(violation("degrees", "first basis vector must have degree 1"));
        }
        for w in self.degrees.windows(2) {
            if w[1] < w[0] {
                return Err(violation("degrees", "degrees must be nondecreasing"));
            }
            if w[1] > w[0] + 1 {
                return Err(violation(
                    "degrees",
                    format!("stratum {} is empty", w[0] + 1),
                ));
            }
        }
        let m = self.step();
        if m > MAX_STEP {
            return Err(violation(
                "step",
                format!("step {m} exceeds the supported maximum {MAX_STEP}"),
            ));
        }
        let counted: Vec<usize> = (1..=m).map(|s| self.stratum_range(s).len()).collect();
        if counted != self.strata_dims {
            return Err(violation(
                "strata_dims",
                format!("strata_dims {:?} disagree with degrees (expected {:?})", self.strata_dims, counted),
            ));
        }
        for c in &self.structure_constants {
            if c.i >= n || c.j >= n || c.k >= n {
                return Err(violation(
                    "index",
                    format!("structure constant ({}, {}, {}) out of range", c.i + 1, c.j + 1, c.k + 1),
                ));
            }
        }

        let table = self.constant_table();
        let zero = Rational64::from_integer(0);
        let lookup = |i: usize, j: usize, k: usize| -> Rational64 {
            table.get(&(i, j)).and_then(|v| v.get(&k)).copied().unwrap_or(zero)
        };

        for (&(i, j), col) in &table {
            for (&k, &c) in col {
                if lookup(j, i, k) != -c {
                    return Err(violation(
                        "antisymmetry",
                        format!(
                            "c_{{{},{}}}^{} = {} but c_{{{},{}}}^{} = {}",
                            i + 1,
                            j + 1,
                            k + 1,
                            c,
                            j + 1,
                            i + 1,
                            k + 1,
                            lookup(j, i, k)
                        ),
                    ));
                }
            }
        }

        for (&(i, j), col) in &table {
            for &k in col.keys() {
                if self.degrees[k] != self.degrees[i] + self.degrees[j] {
                    return Err(violation(
                        "grading",
                        format!(
                            "c_{{{},{}}}^{} is nonzero but degrees are {} + {} != {}",
                            i + 1,
                            j + 1,
                            k + 1,
                            self.degrees[i],
                            self.degrees[j],
                            self.degrees[k]
                        ),
                    ));
                }
            }
        }

        for i in 0..n {
            for j in (i + 1)..n {
                for k in (j + 1)..n {
                    let (xi, xj, xk) = (Self::basis(i), Self::basis(j), Self::basis(k));
                    let mut sum = Self::bracket_exact(&table, &xi, &Self::bracket_exact(&table, &xj, &xk));
                    for terms in [
                        Self::bracket_exact(&table, &xj, &Self::bracket_exact(&table, &xk, &xi)),
                        Self::bracket_exact(&table, &xk, &Self::bracket_exact(&table, &xi, &xj)),
                    ] {
                        for (idx, v) in terms {
                            *sum.entry(idx).or_insert(zero) += v;
                        }
                    }
                    sum.retain(|_, x| *x != zero);
                    if !sum.is_empty() {
                        return Err(violation(
                            "jacobi",
                            format!("Jacobi sum for ({}, {}, {}) is nonzero", i + 1, j + 1, k + 1),
                        ));
                    }
                }
            }
        }

        for s in 1..m {
            let upper = self.stratum_range(s + 1);
            let rows: Vec<Vec<Rational64>> = self
                .stratum_range(1)
                .flat_map(|a| self.stratum_range(s).map(move |b| (a, b)))
                .map(|(a, b)| {
                    let br = Self::bracket_exact(&table, &Self::basis(a), &Self::basis(b));
                    upper.clone().map(|k| br.get(&k).copied().unwrap_or(zero)).collect()
                })
                .collect();
            let rank = rational_rank(rows);
            if rank != upper.len() {
                return Err(violation(
                    "generation",
                    format!(
                        "[V_1, V_{s}] has rank {rank} but stratum {} has dimension {}",
                        s + 1,
                        upper.len()
                    ),
                ));
            }
        }

        for rule in &self.bracket_table {
            if rule.target >= n || rule.left >= n || rule.right >= n {
                return Err(violation("bracket_table", "rule index out of range"));
            }
            if self.degrees[rule.left] + self.degrees[rule.right] != self.degrees[rule.target] {
                return Err(violation(
                    "bracket_table",
                    format!(
                        "rule for X_{} uses [X_{}, X_{}] of the wrong degree",
                        rule.target + 1,
                        rule.left + 1,
                        rule.right + 1
                    ),
                ));
            }
        }
        for s in 2..=m {
            let range = self.stratum_range(s);
            let mut rows = Vec::with_capacity(range.len());
            for target in range.clone() {
                let Some(rule) = self.bracket_table.iter().find(|r| r.target == target) else {
                    return Err(violation(
                        "bracket_table",
                        format!("X_{} has no bracket expression", target + 1),
                    ));
                };
                rows.push(range.clone().map(|k| lookup(rule.left, rule.right, k)).collect());
            }
            if rational_rank(rows) != range.len() {
                return Err(violation(
                    "bracket_table",
                    format!("bracket expressions for stratum {s} are linearly dependent"),
                ));
            }
        }
        Ok(())
    }
}

/// Exact rank by Gaussian elimination over the rationals.
fn rational_rank(mut rows: Vec<Vec<Rational64>>) -> usize {
    let zero = Rational64::from_integer(0);
    let cols = rows.first().map_or(0, Vec::len);
    let mut rank = 0;
    for col in 0..cols {
        let Some(pivot) = (rank..rows.len()).find(|&r| rows[r][col] != zero) else {
            continue;
        };
        rows.swap(rank, pivot);
        let p = rows[rank][col];
        for r in 0..rows.len() {
            if r != rank && rows[r][col] != zero {
                let f = rows[r][col] / p;
                for c in col..cols {
                    let v = rows[rank][c];
                    rows[r][c] -= f * v;
                }
            }
        }
        rank += 1;
    }
    rank
}

/// Parses `"p"`, `"-p"` or `"p/q"` into an exact rational.
pub fn parse_rational(text: &str) -> Result<Rational64> {
    let t = text.trim();
    let parse_int = |s: &str| {
        s.trim()
            .parse::<i64>()
            .map_err(|_| Error::Parse(format!("`{text}` is not an exact rational")))
    };
    match t.split_once('/') {
        Some((num, den)) => {
            let d = parse_int(den)?;
            if d == 0 {
                return Err(Error::Parse(format!("`{text}` has a zero denominator")));
            }
            Ok(Rational64::new(parse_int(num)?, d))
        }
        None => Ok(Rational64::from_integer(parse_int(t)?)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn h1() -> GroupSchema {
        GroupSchema {
            name: "h1".into(),
            degrees: vec![1, 1, 2],
            strata_dims: vec![2, 1],
            structure_constants: vec![
                StructureConstant { i: 0, j: 1, k: 2, value: Rational64::from_integer(1) },
                StructureConstant { i: 1, j: 0, k: 2, value: Rational64::from_integer(-1) },
            ],
            bracket_table: vec![BracketRule { target: 2, left: 0, right: 1 }],
        }
    }

    fn invariant_of(s: &GroupSchema) -> &'static str {
        match s.validate() {
            Err(Error::Schema { invariant, .. }) => invariant,
            other => panic!("expected a schema violation, got {other:?}"),
        }
    }

    #[test]
    fn heisenberg_presentation_is_valid() {
        h1().validate().unwrap();
        assert_eq!(h1().homogeneous_dim(), 4);
        assert_eq!(h1().stratum_range(2), 2..3);
    }

    #[test]
    fn broken_antisymmetry_is_named() {
        let mut s = h1();
        s.structure_constants[1].value = Rational64::from_integer(-2);
        assert_eq!(invariant_of(&s), "antisymmetry");
    }

    #[test]
    fn grading_violation_is_named() {
        let mut s = h1();
        s.structure_constants.push(StructureConstant { i: 0, j: 1, k: 0, value: Rational64::from_integer(1) });
        s.structure_constants.push(StructureConstant { i: 1, j: 0, k: 0, value: Rational64::from_integer(-1) });
        assert_eq!(invariant_of(&s), "grading");
    }

    #[test]
    fn abelian_with_second_stratum_fails_generation() {
        let mut s = h1();
        s.structure_constants.clear();
        assert_eq!(invariant_of(&s), "generation");
    }

    #[test]
    fn step_above_four_is_rejected() {
        let s = GroupSchema {
            name: "too deep".into(),
            degrees: vec![1, 1, 2, 3, 4, 5],
            strata_dims: vec![2, 1, 1, 1, 1],
            structure_constants: vec![],
            bracket_table: vec![],
        };
        assert_eq!(invariant_of(&s), "step");
    }

    #[test]
    fn jacobi_failure_is_detected() {
        let r = |v| Rational64::from_integer(v);
        let mut consts = Vec::new();
        for (i, j, k, v) in [(0, 1, 2, 1), (0, 2, 3, 1), (1, 2, 4, 1), (0, 4, 5, 1)] {
            consts.push(StructureConstant { i, j, k, value: r(v) });
            consts.push(StructureConstant { i: j, j: i, k, value: r(-v) });
        }
        let s = GroupSchema {
            name: "bad".into(),
            degrees: vec![1, 1, 2, 3, 3, 4],
            strata_dims: vec![2, 1, 2, 1],
            structure_constants: consts,
            bracket_table: vec![],
        };
        // [X1,[X2,X3]] + [X2,[X3,X1]] + [X3,[X1,X2]] = [X1,X5] - [X2,X4] = X6
        assert_eq!(invariant_of(&s), "jacobi");
    }

    #[test]
    fn rationals_parse() {
        assert_eq!(parse_rational("-3/6").unwrap(), Rational64::new(-1, 2));
        assert_eq!(parse_rational(" 7 ").unwrap(), Rational64::from_integer(7));
        assert!(parse_rational("1/0").is_err());
        assert!(parse_rational("0.5").is_err());
    }
}
