//! Shipped JSON schemas for the reports and a validator for the subset of
//! JSON Schema they use: `type` (single or list), `properties`, `required`,
//! `additionalProperties: false`, `items`, `enum`, `minimum`, `maximum` and
//! local `$ref`s into `$defs`.

use serde_json::Value;

pub const EVALUATE_REPORT: &str = include_str!("../schema/evaluate_report.schema.json");
pub const REGURGITATE_REPORT: &str = include_str!("../schema/regurgitate_report.schema.json");
pub const MANIFEST: &str = include_str!("../schema/manifest.schema.json");

/// Every violation found, as `"<json pointer>: <problem>"`.
pub fn validate(schema: &Value, doc: &Value) -> Vec<String> {
    let mut errs = Vec::new();
    check(schema, schema, doc, "", &mut errs);
    errs
}

pub fn validate_str(schema: &str, doc: &Value) -> Vec<String> {
    match serde_json::from_str(schema) {
        Ok(s) => validate(&s, doc),
        Err(e) => vec![format!("schema does not parse: {e}")],
    }
}

fn type_matches(name: &str, v: &Value) -> bool {
    match name {
        "object" => v.is_object(),
        "array" => v.is_array(),
        "string" => v.is_string(),
        "boolean" => v.is_boolean(),
        "null" => v.is_null(),
        "number" => v.is_number(),
        "integer" => v.is_u64() || v.is_i64(),
        _ => false,
    }
}

fn check(root: &Value, schema: &Value, v: &Value, at: &str, errs: &mut Vec<String>) {
    if let Some(r) = schema.get("$ref").and_then(Value::as_str) {
        match r.strip_prefix("#/$defs/").and_then(|name| root.get("$defs")?.get(name)) {
            Some(target) => check(root, target, v, at, errs),
            None => errs.push(format!("{at}: unresolved $ref {r}")),
        }
        return;
    }
    if let Some(t) = schema.get("type") {
        let ok = match t {
            Value::String(s) => type_matches(s, v),
            Value::Array(ts) => ts.iter().filter_map(Value::as_str).any(|s| type_matches(s, v)),
            _ => false,
        };
        if !ok {
            errs.push(format!("{at}: expected type {t}, got {v}"));
            return;
        }
    }
    if let Some(options) = schema.get("enum").and_then(Value::as_array) {
        if !options.contains(v) {
            errs.push(format!("{at}: {v} not in enum"));
        }
    }
    if let Some(x) = v.as_f64() {
        if let Some(lo) = schema.get("minimum").and_then(Value::as_f64) {
            if x < lo {
                errs.push(format!("{at}: {x} below minimum {lo}"));
            }
        }
        if let Some(hi) = schema.get("maximum").and_then(Value::as_f64) {
            if x > hi {
                errs.push(format!("{at}: {x} above maximum {hi}"));
            }
        }
    }
    if let Some(obj) = v.as_object() {
        let props = schema.get("properties").and_then(Value::as_object);
        if let Some(req) = schema.get("required").and_then(Value::as_array) {
            for key in req.iter().filter_map(Value::as_str) {
                if !obj.contains_key(key) {
                    errs.push(format!("{at}: missing required property {key}"));
                }
            }
        }
        let closed = schema.get("additionalProperties") == Some(&Value::Bool(false));
        for (key, child) in obj {
            match props.and_then(|p| p.get(key)) {
                Some(s) => check(root, s, child, &format!("{at}/{key}"), errs),
                None if closed => errs.push(format!("{at}: unexpected property {key}")),
                None => {}
            }
        }
    }
    if let (Some(items), Some(arr)) = (schema.get("items"), v.as_array()) {
        for (i, child) in arr.iter().enumerate() {
            check(root, items, child, &format!("{at}/{i}"), errs);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn shipped_schemas_parse() {
        for s in [EVALUATE_REPORT, REGURGITATE_REPORT, MANIFEST] {
            serde_json::from_str::<Value>(s).unwrap();
        }
    }

    #[test]
    fn validator_catches_each_rule() {
        let schema = json!({
            "type": "object",
            "required": ["a"],
            "additionalProperties": false,
            "properties": {
                "a": {"type": "array", "items": {"$ref": "#/$defs/n"}},
                "b": {"enum": ["x", "y"]}
            },
            "$defs": {"n": {"type": ["number", "null"], "minimum": 0}}
        });
        assert!(validate(&schema, &json!({"a": [1, null, 2.5], "b": "x"})).is_empty());
        assert_eq!(validate(&schema, &json!({"b": "z", "c": 1})).len(), 3);
        assert_eq!(validate(&schema, &json!({"a": [-1, "s"]})).len(), 2);
    }
}
