//! JSON and text renderings of verdicts, certificates and matrices.
//!
//! Objects are `serde_json::Map`, which keeps keys sorted, so serialized
//! reports are byte-stable. Scalars are written as strings in the
//! backend's canonical text form; indices are 1-based.

use serde_json::{json, Map, Value};

use crate::certify::{ChainStep, UniquenessCertificate};
use crate::combinatorics::MultiIndex;
use crate::compound::CompoundMatrix;
use crate::conditions::{ConditionVerdict, HProfile, Witness};
use crate::linalg::{Field, Matrix};
use crate::tensor::EquivalenceReport;

pub fn scalars<T: Field>(v: &[T]) -> Value {
    Value::Array(v.iter().map(|x| Value::String(x.to_text())).collect())
}

pub fn matrix<T: Field>(m: &Matrix<T>) -> Value {
    Value::Array((0..m.rows()).map(|i| scalars(m.row(i))).collect())
}

pub fn multi_index(idx: &MultiIndex) -> Value {
    json!(idx.entries())
}

pub fn witness<T: Field>(w: &Witness<T>) -> Value {
    match w {
        Witness::Vector { d, preimage } => {
            let mut o = Map::new();
            o.insert("kind".into(), json!("vector"));
            o.insert("d".into(), scalars(d));
            if let Some(x) = preimage {
                o.insert("x".into(), scalars(x));
            }
            Value::Object(o)
        }
        Witness::Subset { delta, columns, value } => json!({
            "kind": "subset",
            "delta": delta,
            "columns": columns,
            "value": value,
        }),
        Witness::Kernel { vector, rank, expected } => json!({
            "kind": "kernel",
            "vector": scalars(vector),
            "rank": rank,
            "expected_rank": expected,
        }),
        Witness::Inequalities(lines) => json!({
            "kind": "inequalities",
            "violated": lines,
        }),
    }
}

pub fn verdict<T: Field>(v: &ConditionVerdict<T>) -> Value {
    json!({
        "condition": v.label(),
        "m": v.m,
        "status": v.status.to_string(),
        "witness": v.witness.as_ref().map_or(Value::Null, witness),
        "provenance": v.provenance,
    })
}

pub fn h_profile(p: &HProfile) -> Value {
    let minimizers: Vec<Vec<usize>> = p
        .minimizers
        .iter()
        .map(|s| s.iter().map(|c| c + 1).collect())
        .collect();
    json!({ "values": p.values, "minimizers": minimizers })
}

fn chain_step<T: Field>(s: &ChainStep<T>) -> Value {
    json!({
        "rule": s.rule,
        "reference": s.reference,
        "status": s.status.to_string(),
        "details": s.details,
        "witness": s.witness.as_ref().map_or(Value::Null, witness),
    })
}

pub fn certificate<T: Field>(c: &UniquenessCertificate<T>) -> Value {
    let witnesses: Vec<Value> = c
        .witnesses()
        .iter()
        .map(|(rule, w)| json!({ "rule": rule, "witness": witness(w) }))
        .collect();
    let r = &c.reproducibility;
    json!({
        "conclusion": c.conclusion.as_str(),
        "target_mode": c.target_mode,
        "m": c.m_used,
        "chain": c.chain.iter().map(chain_step).collect::<Vec<_>>(),
        "witnesses": witnesses,
        "reproducibility": {
            "matrix_hashes": { "A": r.matrix_hashes[0], "B": r.matrix_hashes[1], "C": r.matrix_hashes[2] },
            "backend": r.backend,
            "tolerance": r.tolerance,
            "seed": r.seed,
            "version": r.version,
        },
    })
}

pub fn compound<T: Field>(c: &CompoundMatrix<T>) -> Value {
    let m = c.matrix();
    json!({
        "order": c.order(),
        "source_shape": [c.source_rows(), c.source_cols()],
        "shape": [m.rows(), m.cols()],
        "row_labels": (0..m.rows()).map(|i| multi_index(&c.row_label(i))).collect::<Vec<_>>(),
        "column_labels": (0..m.cols()).map(|j| multi_index(&c.column_label(j))).collect::<Vec<_>>(),
        "matrix": matrix(m),
    })
}

pub fn equivalence<T: Field>(e: &EquivalenceReport<T>) -> Value {
    json!({
        "matched": e.matched,
        "permutation": e.permutation,
        "scalings": e.scalings.as_ref().map(|s| s.iter().map(|v| scalars(v)).collect::<Vec<_>>()),
    })
}

/// Indented `key: value` rendering of a JSON value.
pub fn to_text(v: &Value) -> String {
    let mut out = String::new();
    write_text(v, 0, &mut out);
    out
}

fn scalar_text(v: &Value) -> Option<String> {
    match v {
        Value::Null => Some("-".into()),
        Value::Bool(b) => Some(b.to_string()),
        Value::Number(n) => Some(n.to_string()),
        Value::String(s) => Some(s.clone()),
        Value::Array(items) if items.iter().all(|x| !x.is_object() && !x.is_array()) => Some(format!(
            "[{}]",
            items
                .iter()
                .map(|x| scalar_text(x).unwrap_or_default())
                .collect::<Vec<_>>()
                .join(", ")
        )),
        _ => None,
    }
}

fn write_text(v: &Value, indent: usize, out: &mut String) {
    let pad = "  ".repeat(indent);
    match v {
        Value::Object(map) => {
            for (k, val) in map {
                match scalar_text(val) {
                    Some(s) => out.push_str(&format!("{pad}{k}: {s}\n")),
                    None => {
                        out.push_str(&format!("{pad}{k}:\n"));
                        write_text(val, indent + 1, out);
                    }
                }
            }
        }
        Value::Array(items) => {
            for item in items {
                match scalar_text(item) {
                    Some(s) => out.push_str(&format!("{pad}- {s}\n")),
                    None => {
                        out.push_str(&format!("{pad}-\n"));
                        write_text(item, indent + 1, out);
                    }
                }
            }
        }
        other => out.push_str(&format!("{pad}{}\n", scalar_text(other).unwrap_or_default())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Rational;

    #[test]
    fn keys_are_sorted_and_scalars_are_text() {
        let m: Matrix<Rational> = Matrix::from_i64_rows(&[[1, -2]]).unwrap();
        let v = json!({ "z": 1, "a": matrix(&m) });
        assert_eq!(serde_json::to_string(&v).unwrap(), r#"{"a":[["1","-2"]],"z":1}"#);
    }

    #[test]
    fn text_rendering() {
        let v = json!({ "b": [1, 2], "a": { "c": null } });
        assert_eq!(to_text(&v), "a:\n  c: -\nb: [1, 2]\n");
    }
}
