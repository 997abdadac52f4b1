//! JSON descriptions of models and polar functions.
//!
//! Model files: `{"dimension": d, "maps": [{"one_sets": [[[dx,dy],...],...]}, ...],
//! "intrinsic_probs": [...]}`. Probabilities may be JSON numbers or strings
//! like "1/3" and "0.05"; both parse exactly.
//!
//! Polar files: either a bare list of coefficient lists, or
//! `{"forms": [...], "drift": [...]}` for a drift-lifted space-time polar.

use serde_json::Value;
use thiserror::Error;

use crate::automaton::{builtin_model, AutomatonError, MonotoneMap, OneSet, RuleFamily};
use crate::geometry::{GeometryError, LinearForm, SpaceTimePolar, SpatialPolar};
use crate::rat::{parse_rat, Rat};

#[derive(Debug, Error)]
pub enum ModelIoError {
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("bad model description: {0}")]
    BadModel(String),
    #[error(transparent)]
    Automaton(#[from] AutomatonError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

fn number_to_rat(v: &Value) -> Result<Rat, ModelIoError> {
    let text = match v {
        Value::Number(n) => n.to_string(),
        Value::String(s) => s.clone(),
        other => return Err(ModelIoError::BadModel(format!("expected a number, got {other}"))),
    };
    parse_rat(&text).ok_or_else(|| ModelIoError::BadModel(format!("cannot parse number `{text}`")))
}

fn int_vec(v: &Value, dim: usize) -> Result<Vec<i64>, ModelIoError> {
    let arr = v
        .as_array()
        .ok_or_else(|| ModelIoError::BadModel("expected a coordinate list".into()))?;
    if arr.len() != dim {
        return Err(ModelIoError::BadModel(format!(
            "coordinate list has length {}, expected {dim}",
            arr.len()
        )));
    }
    arr.iter()
        .map(|x| {
            x.as_i64().ok_or_else(|| ModelIoError::BadModel("coordinates must be integers".into()))
        })
        .collect()
}

/// Parses a model description from JSON text.
pub fn family_from_json(text: &str) -> Result<RuleFamily, ModelIoError> {
    let v: Value = serde_json::from_str(text)?;
    let dim = v["dimension"]
        .as_u64()
        .ok_or_else(|| ModelIoError::BadModel("missing dimension".into()))? as usize;
    let maps_v = v["maps"]
        .as_array()
        .ok_or_else(|| ModelIoError::BadModel("missing maps".into()))?;
    let mut maps = Vec::with_capacity(maps_v.len());
    for map_v in maps_v {
        let sets_v = map_v["one_sets"]
            .as_array()
            .ok_or_else(|| ModelIoError::BadModel("map without one_sets".into()))?;
        let mut sets = Vec::with_capacity(sets_v.len());
        for set_v in sets_v {
            let members = set_v
                .as_array()
                .ok_or_else(|| ModelIoError::BadModel("one-set must be a list".into()))?
                .iter()
                .map(|m| int_vec(m, dim))
                .collect::<Result<Vec<_>, _>>()?;
            sets.push(OneSet::new(members).map_err(ModelIoError::Automaton)?);
        }
        maps.push(MonotoneMap::new(dim, sets)?);
    }
    let probs = v["intrinsic_probs"]
        .as_array()
        .ok_or_else(|| ModelIoError::BadModel("missing intrinsic_probs".into()))?
        .iter()
        .map(number_to_rat)
        .collect::<Result<Vec<_>, _>>()?;
    Ok(RuleFamily::new(maps, probs)?)
}

/// Serializes a family back to the same JSON shape.
pub fn family_to_json(family: &RuleFamily) -> Value {
    let maps: Vec<Value> = family
        .maps()
        .iter()
        .map(|m| {
            let sets: Vec<Value> = m
                .one_sets()
                .iter()
                .map(|s| {
                    Value::Array(
                        s.members()
                            .iter()
                            .map(|v| Value::Array(v.iter().map(|&c| c.into()).collect()))
                            .collect(),
                    )
                })
                .collect();
            serde_json::json!({ "one_sets": sets })
        })
        .collect();
    let probs: Vec<Value> =
        family.intrinsic().iter().map(|r| Value::String(r.to_string())).collect();
    serde_json::json!({
        "dimension": family.dimension(),
        "maps": maps,
        "intrinsic_probs": probs,
    })
}

/// Resolves a model reference: a builtin name (optionally parametrized) or
/// a path to a JSON file.
pub fn resolve_model(reference: &str, rate: Option<Rat>) -> Result<RuleFamily, ModelIoError> {
    if std::path::Path::new(reference).exists() {
        let text = std::fs::read_to_string(reference)?;
        return family_from_json(&text);
    }
    Ok(builtin_model(reference, rate)?)
}

/// Parses a polar description: a list of coefficient lists, or an object
/// with `forms` and optional `drift`.
pub fn polar_from_json(text: &str) -> Result<SpaceTimePolar, ModelIoError> {
    let v: Value = serde_json::from_str(text)?;
    let (forms_v, drift_v) = match &v {
        Value::Array(_) => (&v, None),
        Value::Object(map) => (
            map.get("forms")
                .ok_or_else(|| ModelIoError::BadModel("polar object needs forms".into()))?,
            map.get("drift"),
        ),
        _ => return Err(ModelIoError::BadModel("polar must be a list or object".into())),
    };
    let forms = forms_v
        .as_array()
        .ok_or_else(|| ModelIoError::BadModel("forms must be a list".into()))?
        .iter()
        .map(|f| {
            let coeffs = f
                .as_array()
                .ok_or_else(|| ModelIoError::BadModel("form must be a list".into()))?
                .iter()
                .map(number_to_rat)
                .collect::<Result<Vec<_>, _>>()?;
            Ok(LinearForm::new_allow_zero(coeffs))
        })
        .collect::<Result<Vec<_>, ModelIoError>>()?;
    let base = SpatialPolar::new(forms)?;
    match drift_v {
        Some(d) => {
            let drift = d
                .as_array()
                .ok_or_else(|| ModelIoError::BadModel("drift must be a list".into()))?
                .iter()
                .map(number_to_rat)
                .collect::<Result<Vec<_>, _>>()?;
            Ok(SpaceTimePolar::new(base, drift)?)
        }
        None => Ok(SpaceTimePolar::without_drift(base)),
    }
}
