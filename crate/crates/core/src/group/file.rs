//! TOML schema files.
//!
//! ```toml
//! name = "heisenberg(1)"
//! N = 3
//! degrees = [1, 1, 2]
//! strata_dims = [2, 1]
//!
//! [[structure_constants]]
//! i = 1
//! j = 2
//! k = 3
//! value = "1"
//!
//! [[bracket_table]]
//! target = 3
//! left = 1
//! right = 2
//! ```
//!
//! Indices in files are 1-based; values are exact rationals written as strings.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::schema::{parse_rational, BracketRule, GroupSchema, StructureConstant};
use crate::error::{Error, Result};

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SchemaFile {
    name: String,
    #[serde(rename = "N")]
    n: usize,
    degrees: Vec<usize>,
    strata_dims: Vec<usize>,
    #[serde(default)]
    structure_constants: Vec<ConstantEntry>,
    #[serde(default)]
    bracket_table: Vec<RuleEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConstantEntry {
    i: usize,
    j: usize,
    k: usize,
    value: String,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RuleEntry {
    target: usize,
    left: usize,
    right: usize,
}

fn zero_based(idx: usize, what: &str) -> Result<usize> {
    idx.checked_sub(1)
        .ok_or_else(|| Error::Parse(format!("{what} index must be 1-based, got 0")))
}

/// Parses schema text without validating invariants.
pub fn parse_schema(text: &str) -> Result<GroupSchema> {
    let file: SchemaFile = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    if file.n != file.degrees.len() {
        return Err(Error::Schema {
            invariant: "dimension",
            detail: format!("N = {} but {} degrees are listed", file.n, file.degrees.len()),
        });
    }
    let mut constants = Vec::with_capacity(file.structure_constants.len());
    for (pos, c) in file.structure_constants.iter().enumerate() {
        let value = parse_rational(&c.value)
            .map_err(|e| Error::Parse(format!("structure_constants entry {}: {e}", pos + 1)))?;
        constants.push(StructureConstant {
            i: zero_based(c.i, "structure constant")?,
            j: zero_based(c.j, "structure constant")?,
            k: zero_based(c.k, "structure constant")?,
            value,
        });
    }
    let rules = file
        .bracket_table
        .iter()
        .map(|r| {
            Ok(BracketRule {
                target: zero_based(r.target, "bracket_table")?,
                left: zero_based(r.left, "bracket_table")?,
                right: zero_based(r.right, "bracket_table")?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(GroupSchema {
        name: file.name,
        degrees: file.degrees,
        strata_dims: file.strata_dims,
        structure_constants: constants,
        bracket_table: rules,
    })
}

pub fn load_schema(path: impl AsRef<Path>) -> Result<GroupSchema> {
    let text = std::fs::read_to_string(path)?;
    parse_schema(&text)
}

/// Serializes a schema in the file format read by [`parse_schema`].
pub fn dump_schema(schema: &GroupSchema) -> String {
    let file = SchemaFile {
        name: schema.name.clone(),
        n: schema.dim(),
        degrees: schema.degrees.clone(),
        strata_dims: schema.strata_dims.clone(),
        structure_constants: schema
            .structure_constants
            .iter()
            .map(|c| ConstantEntry { i: c.i + 1, j: c.j + 1, k: c.k + 1, value: c.value.to_string() })
            .collect(),
        bracket_table: schema
            .bracket_table
            .iter()
            .map(|r| RuleEntry { target: r.target + 1, left: r.left + 1, right: r.right + 1 })
            .collect(),
    };
    toml::to_string(&file).expect("schema serialization cannot fail")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::builtin_schema;

    #[test]
    fn dump_then_parse_roundtrips_builtins() {
        for name in ["heisenberg(1)", "free_step2(3)", "engel", "abelian(2)"] {
            let s = builtin_schema(name).unwrap();
            let back = parse_schema(&dump_schema(&s)).unwrap();
            assert_eq!(back, s);
            back.validate().unwrap();
        }
    }

    #[test]
    fn parse_errors_carry_position() {
        let err = parse_schema("name = \"x\"\nN = 3\ndegrees = [1, 1,\n").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("line"), "{msg}");
    }

    #[test]
    fn bad_rational_is_reported() {
        let text = "name = \"x\"\nN = 1\ndegrees = [1]\nstrata_dims = [1]\n[[structure_constants]]\ni = 1\nj = 1\nk = 1\nvalue = \"1/0\"\n";
        assert!(matches!(parse_schema(text), Err(Error::Parse(_))));
    }
}
