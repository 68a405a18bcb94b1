//! `Ψ` and the Processor.

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use super::AggregatorError;
use crate::storage::{apply_adapter, DataEnvelope, DataSpecification};

/// Copies the value at dot path `from` to dot path `to`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldMap {
    pub from: String,
    pub to: String,
}

impl FieldMap {
    pub fn new(from: impl Into<String>, to: impl Into<String>) -> Self {
        FieldMap { from: from.into(), to: to.into() }
    }
}

/// Declarative transformation applied to every source record.
///
/// `fields` selects, renames and re-nests values; `None` keeps each record as
/// is. Every mapped record is then adapted to `output`, which may be omitted
/// only when no mapping is given and all sources share one specification.
/// Records are concatenated in request order.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransformSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fields: Option<Vec<FieldMap>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<DataSpecification>,
}

impl TransformSpec {
    pub fn identity() -> Self {
        TransformSpec::default()
    }

    pub fn mapping(fields: Vec<FieldMap>, output: DataSpecification) -> Self {
        TransformSpec { fields: Some(fields), output: Some(output) }
    }

    /// Checks `Ψ` against one source specification.
    pub fn check_source(&self, spec: &DataSpecification, source_index: usize) -> Result<(), AggregatorError> {
        for m in self.fields.iter().flatten() {
            if !spec.has_path(&m.from) {
                return Err(AggregatorError::UnknownFieldInPsi { field: m.from.clone(), source_index });
            }
        }
        Ok(())
    }

    fn map_record(&self, record: &Value) -> Value {
        let Some(fields) = &self.fields else {
            return record.clone();
        };
        let mut out = Value::Object(Map::new());
        for m in fields {
            if let Some(v) = get_path(record, &m.from) {
                set_path(&mut out, &m.to, v.clone());
            }
        }
        out
    }
}

fn get_path<'a>(v: &'a Value, path: &str) -> Option<&'a Value> {
    path.split('.').try_fold(v, |cur, part| cur.get(part))
}

fn set_path(v: &mut Value, path: &str, value: Value) {
    let mut cur = v;
    let mut parts = path.split('.').peekable();
    while let Some(part) = parts.next() {
        if !cur.is_object() {
            *cur = Value::Object(Map::new());
        }
        let obj = cur.as_object_mut().expect("just made an object");
        if parts.peek().is_none() {
            obj.insert(part.to_string(), value);
            return;
        }
        cur = obj.entry(part.to_string()).or_insert_with(|| Value::Object(Map::new()));
    }
}

/// Applies `psi` to the envelopes, in the given order, and returns one
/// envelope under the output specification.
pub fn process_transform(inputs: &[DataEnvelope], psi: &TransformSpec) -> Result<DataEnvelope, AggregatorError> {
    for (i, env) in inputs.iter().enumerate() {
        env.validate()?;
        psi.check_source(&env.spec, i)?;
    }
    let output = match (&psi.output, &psi.fields) {
        (Some(spec), _) => spec.clone(),
        (None, Some(_)) => {
            return Err(AggregatorError::InvalidTransform("a field mapping needs an output specification".into()))
        }
        (None, None) => match inputs.split_first() {
            Some((first, rest)) if rest.iter().all(|e| e.spec == first.spec) => first.spec.clone(),
            Some(_) => {
                return Err(AggregatorError::InvalidTransform(
                    "sources differ in specification; give an output specification".into(),
                ))
            }
            None => return Err(AggregatorError::InvalidTransform("no input".into())),
        },
    };
    let mut payload = Vec::new();
    for env in inputs {
        for record in &env.payload {
            payload.push(apply_adapter(&psi.map_record(record), &output)?);
        }
    }
    Ok(DataEnvelope { spec: output, payload })
}
