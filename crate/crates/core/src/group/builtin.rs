use num_rational::Rational64;

use super::schema::{BracketRule, GroupSchema, StructureConstant};
use crate::error::{Error, Result};

fn push_pair(consts: &mut Vec<StructureConstant>, i: usize, j: usize, k: usize) {
    consts.push(StructureConstant { i, j, k, value: Rational64::from_integer(1) });
    consts.push(StructureConstant { i: j, j: i, k, value: Rational64::from_integer(-1) });
}

/// Euclidean space `ℝⁿ` viewed as a step-1 Carnot group.
pub fn abelian(n: usize) -> GroupSchema {
    GroupSchema {
        name: format!("abelian({n})"),
        degrees: vec![1; n],
        strata_dims: vec![n],
        structure_constants: Vec::new(),
        bracket_table: Vec::new(),
    }
}

/// Heisenberg group `Hⁿ` with basis `X_1..X_n, Y_1..Y_n, Z` and `[X_i, Y_i] = Z`.
pub fn heisenberg(n: usize) -> GroupSchema {
    let z = 2 * n;
    let mut consts = Vec::new();
    for i in 0..n {
        push_pair(&mut consts, i, n + i, z);
    }
    GroupSchema {
        name: format!("heisenberg({n})"),
        degrees: [vec![1; 2 * n], vec![2]].concat(),
        strata_dims: vec![2 * n, 1],
        structure_constants: consts,
        bracket_table: vec![BracketRule { target: z, left: 0, right: n }],
    }
}

/// Free step-2 nilpotent group on `n` generators. The second stratum is
/// indexed by pairs `a < b` in lexicographic order, `[X_a, X_b] = X_{ab}`.
pub fn free_step2(n: usize) -> GroupSchema {
    let mut consts = Vec::new();
    let mut table = Vec::new();
    let mut k = n;
    for a in 0..n {
        for b in (a + 1)..n {
            push_pair(&mut consts, a, b, k);
            table.push(BracketRule { target: k, left: a, right: b });
            k += 1;
        }
    }
    let pairs = n * n.saturating_sub(1) / 2;
    GroupSchema {
        name: format!("free_step2({n})"),
        degrees: [vec![1; n], vec![2; pairs]].concat(),
        strata_dims: if pairs > 0 { vec![n, pairs] } else { vec![n] },
        structure_constants: consts,
        bracket_table: table,
    }
}

/// The Engel group: `[X_1, X_2] = X_3`, `[X_1, X_3] = X_4`.
pub fn engel() -> GroupSchema {
    let mut consts = Vec::new();
    push_pair(&mut consts, 0, 1, 2);
    push_pair(&mut consts, 0, 2, 3);
    GroupSchema {
        name: "engel".into(),
        degrees: vec![1, 1, 2, 3],
        strata_dims: vec![2, 1, 1],
        structure_constants: consts,
        bracket_table: vec![
            BracketRule { target: 2, left: 0, right: 1 },
            BracketRule { target: 3, left: 0, right: 2 },
        ],
    }
}

/// Resolves names such as `heisenberg(1)`, `abelian(3)`, `free_step2(3)`
/// or `engel`. A bare `heisenberg` means `heisenberg(1)`.
pub fn builtin_schema(name: &str) -> Result<GroupSchema> {
    let unknown = || Error::UnknownSchema(name.to_string());
    let trimmed = name.trim();
    let (family, arg) = match trimmed.split_once('(') {
        Some((family, rest)) => {
            let inner = rest.strip_suffix(')').ok_or_else(unknown)?;
            let n: usize = inner.trim().parse().map_err(|_| unknown())?;
            (family.trim(), Some(n))
        }
        None => (trimmed, None),
    };
    let schema = match (family, arg) {
        ("abelian", Some(n)) if n >= 1 => abelian(n),
        ("heisenberg", None) => heisenberg(1),
        ("heisenberg", Some(n)) if n >= 1 => heisenberg(n),
        ("free_step2", Some(n)) if n >= 2 => free_step2(n),
        ("engel", None) => engel(),
        _ => return Err(unknown()),
    };
    Ok(schema)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtins_are_valid() {
        for name in ["abelian(1)", "abelian(3)", "heisenberg(1)", "heisenberg(3)", "free_step2(2)", "free_step2(4)", "engel"] {
            builtin_schema(name).unwrap().validate().unwrap();
        }
    }

    #[test]
    fn dimensions() {
        let h = builtin_schema("heisenberg(1)").unwrap();
        assert_eq!((h.dim(), h.degrees.clone(), h.homogeneous_dim()), (3, vec![1, 1, 2], 4));
        let a = builtin_schema("abelian(3)").unwrap();
        assert!(a.structure_constants.is_empty());
        assert_eq!(a.homogeneous_dim(), 3);
        let f = builtin_schema("free_step2(3)").unwrap();
        assert_eq!((f.dim(), f.homogeneous_dim()), (6, 9));
    }

    #[test]
    fn unknown_names_fail() {
        for bad in ["sl(2)", "heisenberg(0)", "abelian", "free_step2(1)", "heisenberg(2"] {
            assert!(matches!(builtin_schema(bad), Err(Error::UnknownSchema(_))), "{bad}");
        }
    }
}
