//! Trace documents: the JSON record of one question run, a shipped schema,
//! and a structural validator. Timing lives under a single top-level
//! `timing` key so deterministic comparisons can strip it.

use serde_json::{json, Value};

use crate::config::Ablations;
use crate::controller::Trajectory;

/// Version stamped on every trace document.
pub const TRACE_SCHEMA_VERSION: u32 = 1;

/// Assemble the trace document for one run.
pub fn build_trace(
    trajectory: &Trajectory,
    backend: &str,
    ablations: Ablations,
    elapsed_ms: Option<u64>,
) -> Value {
    let mut doc = json!({
        "schema_version": TRACE_SCHEMA_VERSION,
        "backend": backend,
        "ablations": {
            "no_tree": ablations.no_tree,
            "no_memory": ablations.no_memory,
            "no_graph_retrieval": ablations.no_graph_retrieval,
            "no_embed_retrieval": ablations.no_embed_retrieval,
        },
        "question": trajectory.question,
        "temporal_type": trajectory.temporal_type.label(),
        "grounding": {
            "mentions": trajectory.mentions,
            "topics": trajectory.topics,
            "reused_plan": trajectory.reused_plan,
            "tree_size": trajectory.tree_size,
        },
        "nodes": serde_json::to_value(&trajectory.nodes).expect("nodes serialize"),
        "synthesis": {
            "chain": trajectory.chain_text,
            "chain_valid": trajectory.chain_valid,
            "global_sufficient": trajectory.global_sufficient,
        },
        "answer": {
            "entities": trajectory.answer.entities,
            "timestamps": trajectory.answer.timestamps,
            "count": trajectory.answer.count,
            "rationale": trajectory.answer.rationale,
            "sufficient": trajectory.answer.sufficient,
            "values": trajectory.answer.values(),
        },
        "reasoner_calls": serde_json::to_value(&trajectory.reasoner_calls)
            .expect("calls serialize"),
        "reasoner_call_count": trajectory.reasoner_calls.len(),
        "memory": {
            "hits": trajectory.memory_hits,
            "writes": trajectory.memory_writes,
        },
    });
    if let Some(ms) = elapsed_ms {
        doc.as_object_mut()
            .expect("trace is an object")
            .insert("timing".to_string(), json!({ "elapsed_ms": ms }));
    }
    doc
}

/// Strip the timing section before byte comparisons.
pub fn strip_timing(doc: &Value) -> Value {
    let mut doc = doc.clone();
    if let Some(obj) = doc.as_object_mut() {
        obj.remove("timing");
    }
    doc
}

/// The schema shipped at `docs/trace.schema.json`, embedded so validation
/// needs no file lookup.
pub const TRACE_SCHEMA: &str = include_str!("../docs/trace.schema.json");

/// Validate a document against the subset of JSON Schema the shipped schema
/// uses: `type`, `required`, `properties`, `items`, `enum`.
pub fn validate_trace(doc: &Value) -> Result<(), String> {
    let schema: Value =
        serde_json::from_str(TRACE_SCHEMA).map_err(|e| format!("schema unreadable: {e}"))?;
    validate_value(doc, &schema, "$")
}

fn validate_value(doc: &Value, schema: &Value, path: &str) -> Result<(), String> {
    if let Some(types) = schema.get("type") {
        let ok = match types {
            Value::String(t) => type_matches(doc, t),
            Value::Array(ts) => ts
                .iter()
                .filter_map(Value::as_str)
                .any(|t| type_matches(doc, t)),
            _ => return Err(format!("{path}: schema type must be a string or array")),
        };
        if !ok {
            return Err(format!("{path}: expected type {types}, got {doc}"));
        }
    }
    if let Some(options) = schema.get("enum").and_then(Value::as_array) {
        if !options.contains(doc) {
            return Err(format!("{path}: {doc} not in enum"));
        }
    }
    if let Some(required) = schema.get("required").and_then(Value::as_array) {
        let obj = doc.as_object().ok_or_else(|| format!("{path}: expected object"))?;
        for key in required.iter().filter_map(Value::as_str) {
            if !obj.contains_key(key) {
                return Err(format!("{path}: missing required key {key:?}"));
            }
        }
    }
    if let Some(props) = schema.get("properties").and_then(Value::as_object) {
        if let Some(obj) = doc.as_object() {
            for (key, sub) in props {
                if let Some(v) = obj.get(key) {
                    validate_value(v, sub, &format!("{path}.{key}"))?;
                }
            }
        }
    }
    if let Some(items) = schema.get("items") {
        if let Some(arr) = doc.as_array() {
            for (i, v) in arr.iter().enumerate() {
                validate_value(v, items, &format!("{path}[{i}]"))?;
            }
        }
    }
    Ok(())
}

fn type_matches(doc: &Value, t: &str) -> bool {
    match t {
        "object" => doc.is_object(),
        "array" => doc.is_array(),
        "string" => doc.is_string(),
        "number" => doc.is_number(),
        "integer" => doc.is_i64() || doc.is_u64(),
        "boolean" => doc.is_boolean(),
        "null" => doc.is_null(),
        _ => false,
    }
}

/// Canonical JSON with sorted keys; `serde_json` already sorts map keys,
/// so serialization is deterministic for comparison purposes.
pub fn to_canonical_string(doc: &Value) -> String {
    serde_json::to_string_pretty(doc).expect("trace serializes")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schema_file_parses() {
        let v: Value = serde_json::from_str(TRACE_SCHEMA).unwrap();
        assert_eq!(v["properties"]["schema_version"]["type"], "integer");
    }

    #[test]
    fn validator_flags_missing_keys_and_bad_types() {
        let schema: Value = serde_json::from_str(
            r#"{"type": "object", "required": ["a"], "properties": {"a": {"type": "integer"}}}"#,
        )
        .unwrap();
        assert!(validate_value(&json!({"a": 1}), &schema, "$").is_ok());
        assert!(validate_value(&json!({}), &schema, "$").is_err());
        assert!(validate_value(&json!({"a": "x"}), &schema, "$").is_err());
    }

    #[test]
    fn strip_timing_removes_only_timing() {
        let doc = json!({"a": 1, "timing": {"elapsed_ms": 7}});
        let s = strip_timing(&doc);
        assert_eq!(s, json!({"a": 1}));
    }
}
