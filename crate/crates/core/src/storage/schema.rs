//! Data specifications and the adapter that reshapes raw records to match one.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use super::StorageError;
use crate::canonical;

/// Type of one field in a specification.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FieldType {
    String,
    Number,
    Boolean,
    /// A named type defined elsewhere in the same specification.
    Ref(String),
    List(Box<FieldType>),
}

impl FieldType {
    fn parse(s: &str) -> FieldType {
        if let Some(inner) = s.strip_suffix("[]") {
            return FieldType::List(Box::new(FieldType::parse(inner)));
        }
        match s {
            "string" => FieldType::String,
            "number" => FieldType::Number,
            "boolean" => FieldType::Boolean,
            other => FieldType::Ref(other.to_string()),
        }
    }

    fn referenced(&self) -> Option<&str> {
        match self {
            FieldType::Ref(name) => Some(name),
            FieldType::List(inner) => inner.referenced(),
            _ => None,
        }
    }
}

type Fields = BTreeMap<String, FieldType>;

/// Semi-structured description of the fields and types inside data.
///
/// Top-level entries whose value is a type name form the root record; entries
/// whose value is an object define named types. With no top-level fields the
/// root is the one named type that no other type references, so
/// `{"Name": {...}, "Person": {"name": "Name", "age": "number"}}` describes a
/// `Person`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Value", into = "Value")]
pub struct DataSpecification {
    source: Value,
    root: Fields,
    types: BTreeMap<String, Fields>,
}

impl DataSpecification {
    pub fn parse(value: Value) -> Result<Self, StorageError> {
        let invalid = |msg: String| StorageError::InvalidSpecification(msg);
        let Value::Object(top) = &value else {
            return Err(invalid("specification must be an object".into()));
        };
        let mut flat = Fields::new();
        let mut types = BTreeMap::new();
        for (name, v) in top {
            match v {
                Value::String(t) => {
                    flat.insert(name.clone(), FieldType::parse(t));
                }
                Value::Object(fields) => {
                    let mut parsed = Fields::new();
                    for (f, t) in fields {
                        let Value::String(t) = t else {
                            return Err(invalid(format!("{name}.{f}: type must be a string")));
                        };
                        parsed.insert(f.clone(), FieldType::parse(t));
                    }
                    if parsed.is_empty() {
                        return Err(invalid(format!("type {name} has no fields")));
                    }
                    types.insert(name.clone(), parsed);
                }
                _ => return Err(invalid(format!("{name}: expected a type name or an object"))),
            }
        }

        let mut referenced = BTreeSet::new();
        for (owner, fields) in std::iter::once(("<root>", &flat)).chain(types.iter().map(|(k, v)| (k.as_str(), v))) {
            for (f, t) in fields {
                if let Some(r) = t.referenced() {
                    if !types.contains_key(r) {
                        return Err(invalid(format!("{owner}.{f}: unknown type `{r}`")));
                    }
                    referenced.insert(r.to_string());
                }
            }
        }

        let root = if !flat.is_empty() {
            flat
        } else {
            let roots: Vec<_> = types.keys().filter(|k| !referenced.contains(*k)).collect();
            match roots.as_slice() {
                [one] => types[*one].clone(),
                [] => return Err(invalid("no root type".into())),
                many => return Err(invalid(format!("ambiguous root among {many:?}"))),
            }
        };

        let spec = DataSpecification { source: value, root, types };
        spec.check_acyclic()?;
        Ok(spec)
    }

    pub fn as_value(&self) -> &Value {
        &self.source
    }

    pub fn to_canonical(&self) -> String {
        canonical::value_to_string(&self.source)
    }

    fn check_acyclic(&self) -> Result<(), StorageError> {
        fn visit<'a>(
            spec: &'a DataSpecification,
            name: &'a str,
            stack: &mut Vec<&'a str>,
            done: &mut BTreeSet<&'a str>,
        ) -> Result<(), StorageError> {
            if done.contains(name) {
                return Ok(());
            }
            if stack.contains(&name) {
                return Err(StorageError::InvalidSpecification(format!("cyclic type `{name}`")));
            }
            stack.push(name);
            for t in spec.types[name].values() {
                if let Some(r) = t.referenced() {
                    visit(spec, r, stack, done)?;
                }
            }
            stack.pop();
            done.insert(name);
            Ok(())
        }
        let mut done = BTreeSet::new();
        for name in self.types.keys() {
            visit(self, name, &mut Vec::new(), &mut done)?;
        }
        Ok(())
    }

    /// Does `value` match the specification exactly, with no extra fields?
    pub fn validate(&self, value: &Value) -> Result<(), StorageError> {
        self.validate_record(&self.root, value, "")
    }

    fn validate_record(&self, fields: &Fields, value: &Value, path: &str) -> Result<(), StorageError> {
        let Value::Object(obj) = value else {
            return Err(violation(path, "expected an object"));
        };
        if obj.len() != fields.len() {
            let extra = obj.keys().find(|k| !fields.contains_key(*k));
            if let Some(k) = extra {
                return Err(violation(&join(path, k), "unexpected field"));
            }
        }
        for (name, t) in fields {
            let p = join(path, name);
            let v = obj.get(name).ok_or_else(|| violation(&p, "missing field"))?;
            self.validate_typed(t, v, &p)?;
        }
        Ok(())
    }

    fn validate_typed(&self, t: &FieldType, v: &Value, path: &str) -> Result<(), StorageError> {
        match t {
            FieldType::Ref(name) => self.validate_record(&self.types[name], v, path),
            FieldType::List(inner) => {
                let Value::Array(items) = v else {
                    return Err(violation(path, "expected a list"));
                };
                for (i, item) in items.iter().enumerate() {
                    self.validate_typed(inner, item, &format!("{path}[{i}]"))?;
                }
                Ok(())
            }
            primitive if primitive_matches(primitive, v) => Ok(()),
            _ => Err(violation(path, &format!("expected {}", type_name(t)))),
        }
    }

    /// Field paths of the root record, dot-separated, leaves only.
    pub fn leaf_paths(&self) -> Vec<String> {
        let mut out = Vec::new();
        self.collect_paths(&self.root, "", &mut out);
        out
    }

    fn collect_paths(&self, fields: &Fields, prefix: &str, out: &mut Vec<String>) {
        for (name, t) in fields {
            let p = join(prefix, name);
            match t {
                FieldType::Ref(r) => {
                    out.push(p.clone());
                    self.collect_paths(&self.types[r], &p, out);
                }
                _ => out.push(p),
            }
        }
    }

    /// Does the root record have a field at the dot-separated `path`?
    pub fn has_path(&self, path: &str) -> bool {
        let mut fields = &self.root;
        let mut parts = path.split('.').peekable();
        while let Some(part) = parts.next() {
            let Some(t) = fields.get(part) else {
                return false;
            };
            if parts.peek().is_none() {
                return true;
            }
            match t {
                FieldType::Ref(r) => fields = &self.types[r],
                _ => return false,
            }
        }
        false
    }
}

impl TryFrom<Value> for DataSpecification {
    type Error = StorageError;
    fn try_from(v: Value) -> Result<Self, Self::Error> {
        DataSpecification::parse(v)
    }
}

impl From<DataSpecification> for Value {
    fn from(s: DataSpecification) -> Value {
        s.source
    }
}

fn join(prefix: &str, name: &str) -> String {
    if prefix.is_empty() {
        name.to_string()
    } else {
        format!("{prefix}.{name}")
    }
}

fn violation(path: &str, reason: &str) -> StorageError {
    StorageError::SchemaViolation { path: path.to_string(), reason: reason.to_string() }
}

fn primitive_matches(t: &FieldType, v: &Value) -> bool {
    matches!(
        (t, v),
        (FieldType::String, Value::String(_)) | (FieldType::Number, Value::Number(_)) | (FieldType::Boolean, Value::Bool(_))
    )
}

fn type_name(t: &FieldType) -> String {
    match t {
        FieldType::String => "string".into(),
        FieldType::Number => "number".into(),
        FieldType::Boolean => "boolean".into(),
        FieldType::Ref(r) => r.clone(),
        FieldType::List(inner) => format!("{}[]", type_name(inner)),
    }
}

/// Reshapes one raw record so it matches `spec` exactly.
///
/// Each field is looked up at the current nesting level first. A missing
/// record-typed field is rebuilt from the same level (nesting flat input);
/// a missing primitive is searched for inside nested objects (flattening
/// nested input). Extra fields are dropped and no value is coerced between
/// types. The output always validates, and adapting it again is a no-op.
pub fn apply_adapter(raw: &Value, spec: &DataSpecification) -> Result<Value, StorageError> {
    let Value::Object(obj) = raw else {
        return Err(violation("", "expected an object"));
    };
    adapt_record(spec, &spec.root, obj, "")
}

fn adapt_record(
    spec: &DataSpecification,
    fields: &Fields,
    obj: &Map<String, Value>,
    path: &str,
) -> Result<Value, StorageError> {
    let mut out = Map::new();
    for (name, t) in fields {
        let p = join(path, name);
        let v = match (obj.get(name), t) {
            (Some(v), _) => adapt_typed(spec, t, v, &p)?,
            (None, FieldType::Ref(r)) => adapt_record(spec, &spec.types[r], obj, &p)?,
            (None, _) => {
                let found = find_nested(obj, name, t).ok_or_else(|| violation(&p, "missing field"))?;
                adapt_typed(spec, t, found, &p)?
            }
        };
        out.insert(name.clone(), v);
    }
    Ok(Value::Object(out))
}

fn adapt_typed(spec: &DataSpecification, t: &FieldType, v: &Value, path: &str) -> Result<Value, StorageError> {
    match t {
        FieldType::Ref(r) => match v {
            Value::Object(inner) => adapt_record(spec, &spec.types[r], inner, path),
            _ => Err(violation(path, &format!("expected {r}"))),
        },
        FieldType::List(inner) => match v {
            Value::Array(items) => items
                .iter()
                .enumerate()
                .map(|(i, item)| adapt_typed(spec, inner, item, &format!("{path}[{i}]")))
                .collect::<Result<Vec<_>, _>>()
                .map(Value::Array),
            _ => Err(violation(path, "expected a list")),
        },
        primitive if primitive_matches(primitive, v) => Ok(v.clone()),
        _ => Err(violation(path, &format!("expected {}", type_name(t)))),
    }
}

/// Depth-first search of nested objects, in key order, for a primitive field.
fn find_nested<'a>(obj: &'a Map<String, Value>, name: &str, t: &FieldType) -> Option<&'a Value> {
    for v in obj.values() {
        if let Value::Object(inner) = v {
            if let Some(found) = inner.get(name).filter(|f| primitive_matches(t, f) || matches!(t, FieldType::List(_))) {
                return Some(found);
            }
            if let Some(found) = find_nested(inner, name, t) {
                return Some(found);
            }
        }
    }
    None
}

/// Data together with its specification: the unit that is stored and shipped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataEnvelope {
    pub spec: DataSpecification,
    pub payload: Vec<Value>,
}

impl DataEnvelope {
    /// Adapts every raw record to `spec`.
    pub fn new(spec: DataSpecification, raw: &[Value]) -> Result<Self, StorageError> {
        let payload = raw.iter().map(|r| apply_adapter(r, &spec)).collect::<Result<_, _>>()?;
        Ok(DataEnvelope { spec, payload })
    }

    pub fn validate(&self) -> Result<(), StorageError> {
        self.payload.iter().try_for_each(|r| self.spec.validate(r))
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        canonical::to_bytes(self).expect("envelopes always serialize")
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, StorageError> {
        let env: DataEnvelope =
            canonical::from_slice(bytes).map_err(|e| StorageError::MalformedEnvelope(e.to_string()))?;
        env.validate()?;
        Ok(env)
    }
}
