use std::collections::BTreeSet;

use korpus_cli::pipeline::PipelineFile;
use serde_json::{json, Value};

fn schema() -> Value {
    let text = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/../../schema/pipeline.schema.json")).unwrap();
    serde_json::from_str(&text).unwrap()
}

fn resolve<'a>(root: &'a Value, node: &'a Value) -> &'a Value {
    match node.get("$ref").and_then(Value::as_str) {
        Some(r) => root.pointer(r.trim_start_matches('#')).unwrap(),
        None => node,
    }
}

/// Walks `value` alongside the schema and records every object key the schema
/// does not declare, plus every declared key `value` lacks.
fn compare(root: &Value, node: &Value, value: &Value, path: &str, out: &mut Vec<String>) {
    let node = resolve(root, node);
    match value {
        Value::Object(map) => {
            let Some(props) = node.get("properties").and_then(Value::as_object) else {
                if let Some(extra) = node.get("additionalProperties").filter(|v| v.is_object()) {
                    for (k, v) in map {
                        compare(root, extra, v, &format!("{path}.{k}"), out);
                    }
                }
                return;
            };
            let declared: BTreeSet<&String> = props.keys().collect();
            let present: BTreeSet<&String> = map.keys().collect();
            for k in declared.symmetric_difference(&present) {
                out.push(format!("{path}.{k}"));
            }
            for (k, v) in map {
                if let Some(child) = props.get(k) {
                    compare(root, child, v, &format!("{path}.{k}"), out);
                }
            }
        }
        Value::Array(items) => {
            if let Some(item) = node.get("items") {
                for (i, v) in items.iter().enumerate() {
                    compare(root, item, v, &format!("{path}[{i}]"), out);
                }
            }
        }
        _ => {}
    }
}

#[test]
fn schema_declares_exactly_the_config_fields() {
    let full = json!({
        "settings": {"min_match_tokens": 50},
        "sources": [{"name": "web", "domain": "formal", "shards": ["web/*.jsonl"],
                     "langid": true, "dedup_group": "g", "quality_filter": true, "translate": true}],
        "langid": {"target": "de", "model": "m.bin", "training": {"de": ["de/*.txt"]}},
        "lm": {"model": "lm.arpa", "train_sources": ["web"]},
        "translator": {"command": ["cat"]},
        "datasets": [{"name": "d", "sources": ["web"], "budget_tokens": 10,
                      "match_budget": "e", "trim_source": "web", "seed": 3}]
    });
    let file: PipelineFile = serde_json::from_value(full).unwrap();
    let round = serde_json::to_value(&file).unwrap();
    let root = schema();
    let mut mismatched = Vec::new();
    compare(&root, &root, &round, "$", &mut mismatched);
    assert!(mismatched.is_empty(), "schema and config structs disagree on {mismatched:?}");
}

#[test]
fn schema_enums_match_the_parsers() {
    let root = schema();
    let domains = root.pointer("/$defs/source/properties/domain/enum").unwrap().as_array().unwrap();
    for d in domains {
        let parsed: korpus::Domain = serde_json::from_value(d.clone()).unwrap();
        assert_eq!(serde_json::to_value(parsed).unwrap(), *d);
    }
    let policies = root.pointer("/properties/settings/properties/dedup_policy/enum").unwrap().as_array().unwrap();
    for p in policies {
        let parsed: korpus::DedupPolicy = serde_json::from_value(p.clone()).unwrap();
        assert_eq!(serde_json::to_value(parsed).unwrap(), *p);
    }
}
