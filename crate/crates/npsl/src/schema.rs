//! JSON encoding of systems, form families, and certificates. Extended
//! reals are encoded as the strings "inf"/"-inf"; everything else is plain
//! JSON. serde_json's default map is ordered, so serialization is
//! deterministic and reports are byte-identical across runs.

use crate::linalg::{Matrix, Vector};
use crate::lure::{Certificate, CertStatus, LureSystem, Method};
use crate::pairings::NormSpec;
use crate::slemma::FormFamily;
use serde_json::{json, Map, Value};
use std::collections::BTreeMap;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SchemaError {
    #[error("json parse error: {0}")]
    Parse(String),
    #[error("{context}: expected {expected}")]
    BadShape { context: String, expected: String },
    #[error("non-finite number cannot be serialized: {0}")]
    NonFinite(f64),
    #[error("{0}")]
    Invalid(String),
}

fn bad(context: &str, expected: &str) -> SchemaError {
    SchemaError::BadShape { context: context.to_string(), expected: expected.to_string() }
}

/// Finite numbers become JSON numbers; ±∞ become "inf"/"-inf". NaN refuses.
pub fn f64_to_value(v: f64) -> Result<Value, SchemaError> {
    if v.is_nan() {
        return Err(SchemaError::NonFinite(v));
    }
    if v == f64::INFINITY {
        Ok(Value::String("inf".into()))
    } else if v == f64::NEG_INFINITY {
        Ok(Value::String("-inf".into()))
    } else {
        serde_json::Number::from_f64(v).map(Value::Number).ok_or(SchemaError::NonFinite(v))
    }
}

pub fn value_to_f64(v: &Value, context: &str) -> Result<f64, SchemaError> {
    match v {
        Value::Number(n) => {
            n.as_f64().ok_or_else(|| bad(context, "a representable number"))
        }
        Value::String(s) => match s.as_str() {
            "inf" | "+inf" => Ok(f64::INFINITY),
            "-inf" => Ok(f64::NEG_INFINITY),
            _ => Err(bad(context, "a number or \"inf\"/\"-inf\"")),
        },
        _ => Err(bad(context, "a number or \"inf\"/\"-inf\"")),
    }
}

pub fn vector_to_value(x: &Vector) -> Result<Value, SchemaError> {
    Ok(Value::Array(x.iter().map(|&v| f64_to_value(v)).collect::<Result<_, _>>()?))
}

pub fn value_to_vector(v: &Value, context: &str) -> Result<Vector, SchemaError> {
    let arr = v.as_array().ok_or_else(|| bad(context, "an array of numbers"))?;
    let data = arr
        .iter()
        .enumerate()
        .map(|(i, e)| value_to_f64(e, &format!("{context}[{i}]")))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Vector::from_vec(data))
}

pub fn matrix_to_value(m: &Matrix) -> Result<Value, SchemaError> {
    let rows = (0..m.nrows())
        .map(|i| {
            Ok(Value::Array(
                (0..m.ncols()).map(|j| f64_to_value(m[(i, j)])).collect::<Result<_, _>>()?,
            ))
        })
        .collect::<Result<Vec<_>, SchemaError>>()?;
    Ok(Value::Array(rows))
}

pub fn value_to_matrix(v: &Value, context: &str) -> Result<Matrix, SchemaError> {
    let rows = v.as_array().ok_or_else(|| bad(context, "an array of rows"))?;
    if rows.is_empty() {
        return Err(bad(context, "at least one row"));
    }
    let mut data: Vec<Vec<f64>> = Vec::with_capacity(rows.len());
    for (i, row) in rows.iter().enumerate() {
        let cells = row
            .as_array()
            .ok_or_else(|| bad(&format!("{context}[{i}]"), "an array of numbers"))?;
        let parsed = cells
            .iter()
            .enumerate()
            .map(|(j, e)| value_to_f64(e, &format!("{context}[{i}][{j}]")))
            .collect::<Result<Vec<_>, _>>()?;
        if let Some(first) = data.first() {
            if parsed.len() != first.len() {
                return Err(bad(context, "rows of equal length"));
            }
        }
        data.push(parsed);
    }
    let (nr, nc) = (data.len(), data[0].len());
    if nc == 0 {
        return Err(bad(context, "at least one column"));
    }
    Ok(Matrix::from_fn(nr, nc, |i, j| data[i][j]))
}

/// Per-channel bound that may be given as a scalar (broadcast over channels)
/// or an explicit array of length m.
fn value_to_bounds(v: &Value, m: usize, context: &str) -> Result<Vector, SchemaError> {
    if v.is_array() {
        let parsed = value_to_vector(v, context)?;
        if parsed.len() != m {
            return Err(bad(context, &format!("length {m}")));
        }
        Ok(parsed)
    } else {
        let x = value_to_f64(v, context)?;
        Ok(Vector::from_element(m, x))
    }
}

pub fn system_to_value(sys: &LureSystem) -> Result<Value, SchemaError> {
    Ok(json!({
        "A": matrix_to_value(&sys.a)?,
        "B": matrix_to_value(&sys.b)?,
        "C": matrix_to_value(&sys.c)?,
        "zeta": vector_to_value(&sys.sector_lo)?,
        "kappa": vector_to_value(&sys.sector_hi)?,
    }))
}

pub fn system_from_value(v: &Value) -> Result<LureSystem, SchemaError> {
    let obj = v.as_object().ok_or_else(|| bad("system", "a JSON object"))?;
    let get = |k: &str| obj.get(k).ok_or_else(|| bad("system", &format!("field \"{k}\"")));
    let a = value_to_matrix(get("A")?, "A")?;
    let b_raw = get("B")?;
    // B may be a d×m matrix or a flat column of length d
    let b = if b_raw.as_array().map_or(false, |r| r.first().map_or(false, Value::is_array)) {
        value_to_matrix(b_raw, "B")?
    } else {
        let col = value_to_vector(b_raw, "B")?;
        Matrix::from_fn(col.len(), 1, |i, _| col[i])
    };
    let c_raw = get("C")?;
    let c = if c_raw.as_array().map_or(false, |r| r.first().map_or(false, Value::is_array)) {
        value_to_matrix(c_raw, "C")?
    } else {
        let row = value_to_vector(c_raw, "C")?;
        Matrix::from_fn(1, row.len(), |_, j| row[j])
    };
    let m = b.ncols();
    let zeta = value_to_bounds(get("zeta")?, m, "zeta")?;
    let kappa = value_to_bounds(get("kappa")?, m, "kappa")?;
    LureSystem::new(a, b, c, zeta, kappa).map_err(|e| SchemaError::Invalid(e.to_string()))
}

pub fn system_from_str(text: &str) -> Result<LureSystem, SchemaError> {
    let v: Value = serde_json::from_str(text).map_err(|e| SchemaError::Parse(e.to_string()))?;
    system_from_value(&v)
}

fn norm_spec_to_fields(spec: &NormSpec, out: &mut Map<String, Value>) -> Result<(), SchemaError> {
    out.insert("p".into(), f64_to_value(spec.p())?);
    if let Some(w) = spec.weight_matrix() {
        out.insert("weight".into(), matrix_to_value(w)?);
    }
    Ok(())
}

fn norm_spec_from_fields(obj: &Map<String, Value>) -> Result<NormSpec, SchemaError> {
    let p = value_to_f64(obj.get("p").ok_or_else(|| bad("family", "field \"p\""))?, "p")?;
    match obj.get("weight") {
        None | Some(Value::Null) => {
            NormSpec::new(p).map_err(|e| SchemaError::Invalid(e.to_string()))
        }
        Some(w) => {
            // a flat array is a diagonal weight; nested arrays are the full matrix
            if w.as_array().map_or(false, |r| r.first().map_or(false, Value::is_array)) {
                let full = value_to_matrix(w, "weight")?;
                NormSpec::with_weight(p, full).map_err(|e| SchemaError::Invalid(e.to_string()))
            } else {
                let diag = value_to_vector(w, "weight")?;
                NormSpec::with_diagonal_weight(p, &diag)
                    .map_err(|e| SchemaError::Invalid(e.to_string()))
            }
        }
    }
}

pub fn family_to_value(family: &FormFamily) -> Result<Value, SchemaError> {
    let mut obj = Map::new();
    obj.insert(
        "P".into(),
        Value::Array(family.p.iter().map(matrix_to_value).collect::<Result<_, _>>()?),
    );
    obj.insert("rho".into(), vector_to_value(&family.rho)?);
    norm_spec_to_fields(&family.spec, &mut obj)?;
    obj.insert("conic".into(), Value::Bool(family.conic));
    Ok(Value::Object(obj))
}

pub fn family_from_value(v: &Value) -> Result<FormFamily, SchemaError> {
    let obj = v.as_object().ok_or_else(|| bad("family", "a JSON object"))?;
    let mats_v = obj
        .get("P")
        .and_then(Value::as_array)
        .ok_or_else(|| bad("family", "field \"P\": an array of matrices"))?;
    if mats_v.is_empty() {
        return Err(bad("P", "at least the objective matrix P0"));
    }
    let mats = mats_v
        .iter()
        .enumerate()
        .map(|(i, m)| value_to_matrix(m, &format!("P[{i}]")))
        .collect::<Result<Vec<_>, _>>()?;
    let rho = match obj.get("rho") {
        Some(r) => value_to_vector(r, "rho")?,
        None => Vector::zeros(mats.len() - 1),
    };
    let spec = norm_spec_from_fields(obj)?;
    let conic = obj.get("conic").and_then(Value::as_bool).unwrap_or(false);
    FormFamily::new(mats, rho, spec, conic).map_err(|e| SchemaError::Invalid(e.to_string()))
}

pub fn family_from_str(text: &str) -> Result<FormFamily, SchemaError> {
    let v: Value = serde_json::from_str(text).map_err(|e| SchemaError::Parse(e.to_string()))?;
    family_from_value(&v)
}

pub fn certificate_to_value(cert: &Certificate) -> Result<Value, SchemaError> {
    Ok(json!({
        "method": cert.method.as_str(),
        "p": f64_to_value(cert.p)?,
        "r": matrix_to_value(&cert.r)?,
        "tau": vector_to_value(&cert.tau)?,
        "c": f64_to_value(cert.c)?,
        "status": cert.status.as_str(),
        "diagnostics": cert.diagnostics.iter().map(|(k, v)| (k.clone(), Value::String(v.clone()))).collect::<Map<_, _>>(),
    }))
}

pub fn certificate_from_value(v: &Value) -> Result<Certificate, SchemaError> {
    let obj = v.as_object().ok_or_else(|| bad("certificate", "a JSON object"))?;
    let get = |k: &str| obj.get(k).ok_or_else(|| bad("certificate", &format!("field \"{k}\"")));
    let method: Method = get("method")?
        .as_str()
        .ok_or_else(|| bad("method", "a string tag"))?
        .parse()
        .map_err(SchemaError::Invalid)?;
    let status: CertStatus = get("status")?
        .as_str()
        .ok_or_else(|| bad("status", "a string tag"))?
        .parse()
        .map_err(SchemaError::Invalid)?;
    let p = value_to_f64(get("p")?, "p")?;
    let r = value_to_matrix(get("r")?, "r")?;
    let tau = match obj.get("tau") {
        Some(t) => value_to_vector(t, "tau")?,
        None => Vector::zeros(0),
    };
    let c = value_to_f64(get("c")?, "c")?;
    let mut diagnostics = BTreeMap::new();
    if let Some(d) = obj.get("diagnostics") {
        let map = d.as_object().ok_or_else(|| bad("diagnostics", "an object"))?;
        for (k, val) in map {
            let text = val
                .as_str()
                .map(str::to_string)
                .unwrap_or_else(|| val.to_string());
            diagnostics.insert(k.clone(), text);
        }
    }
    Ok(Certificate { method, p, r, tau, c, status, diagnostics })
}

pub fn certificate_from_str(text: &str) -> Result<Certificate, SchemaError> {
    let v: Value = serde_json::from_str(text).map_err(|e| SchemaError::Parse(e.to_string()))?;
    certificate_from_value(&v)
}
