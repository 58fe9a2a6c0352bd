use nalgebra::DMatrix;
use serde_json::{json, Map, Value};

use super::{FactorModel, Loadings};
use crate::error::{Error, Result};

pub(crate) fn model_to_json(model: &FactorModel) -> Value {
    let mut out = Map::new();
    match model.loadings() {
        Loadings::Binary { assignment, .. } => {
            out.insert("mode".into(), json!("binary"));
            out.insert("sizes".into(), json!(model.sizes().unwrap_or_default()));
            out.insert("assignment".into(), json!(assignment.iter().map(|g| g + 1).collect::<Vec<_>>()));
        }
        Loadings::Dense(omega) => {
            out.insert("mode".into(), json!("dense"));
            out.insert("omega".into(), matrix_json(omega));
        }
    }
    let phi = model.phi_cov();
    let phi_json = if model.phi_is_diagonal() {
        json!(phi.diagonal().iter().copied().collect::<Vec<_>>())
    } else {
        matrix_json(phi)
    };
    out.insert("phi".into(), phi_json);
    out.insert("xi".into(), json!(model.xi()));
    Value::Object(out)
}

fn matrix_json(m: &DMatrix<f64>) -> Value {
    Value::Array((0..m.nrows()).map(|i| json!(m.row(i).iter().copied().collect::<Vec<_>>())).collect())
}

pub(crate) fn model_from_json(value: &Value) -> Result<FactorModel> {
    let obj = value.as_object().ok_or_else(|| Error::schema("", "model must be a JSON object"))?;
    for key in obj.keys() {
        if !matches!(key.as_str(), "mode" | "sizes" | "assignment" | "phi" | "xi" | "omega") {
            return Err(Error::schema(format!("/{key}"), "unknown field"));
        }
    }
    let mode = obj
        .get("mode")
        .ok_or_else(|| Error::schema("/mode", "missing field"))?
        .as_str()
        .ok_or_else(|| Error::schema("/mode", "expected a string"))?;
    let loadings = match mode {
        "binary" => binary_loadings(obj)?,
        "dense" => {
            if obj.contains_key("sizes") || obj.contains_key("assignment") {
                return Err(Error::schema("/mode", "dense mode takes omega, not sizes or assignment"));
            }
            let omega = obj.get("omega").ok_or_else(|| Error::schema("/omega", "missing field"))?;
            Loadings::Dense(matrix(omega, "/omega", None)?)
        }
        other => return Err(Error::schema("/mode", format!("expected \"binary\" or \"dense\", got {other:?}"))),
    };
    if mode == "binary" && obj.contains_key("omega") {
        return Err(Error::schema("/omega", "binary mode takes sizes or assignment, not omega"));
    }
    let (n, f) = match &loadings {
        Loadings::Binary { assignment, n_clusters } => (assignment.len(), *n_clusters),
        Loadings::Dense(m) => m.shape(),
    };
    let phi = match obj.get("phi") {
        None => DMatrix::identity(f, f),
        Some(v @ Value::Array(items)) if items.first().is_some_and(Value::is_array) => {
            let m = matrix(v, "/phi", Some(f))?;
            if m.nrows() != f {
                return Err(Error::schema("/phi", format!("expected {f} rows")));
            }
            m
        }
        Some(v) => {
            let d = numbers(v, "/phi")?;
            if d.len() != f {
                return Err(Error::schema("/phi", format!("expected {f} factor variances, got {}", d.len())));
            }
            if let Some(k) = d.iter().position(|&x| !(x > 0.0)) {
                return Err(Error::schema(format!("/phi/{k}"), "factor variance must be positive"));
            }
            DMatrix::from_diagonal(&nalgebra::DVector::from_vec(d))
        }
    };
    let xi = match obj.get("xi") {
        None => vec![0.0; n],
        Some(Value::Number(x)) => vec![x.as_f64().unwrap_or(f64::NAN); n],
        Some(v) => {
            let xi = numbers(v, "/xi")?;
            if xi.len() != n {
                return Err(Error::schema("/xi", format!("expected {n} specific risks, got {}", xi.len())));
            }
            xi
        }
    };
    if let Some(k) = xi.iter().position(|&x| !(x >= 0.0)) {
        return Err(Error::schema(format!("/xi/{k}"), "specific risk must be non-negative"));
    }
    FactorModel::new(loadings, phi, xi).map_err(|e| match e {
        Error::Validation(msg) if msg.contains("factor covariance") => Error::schema("/phi", msg),
        other => other,
    })
}

fn binary_loadings(obj: &Map<String, Value>) -> Result<Loadings> {
    let sizes = obj.get("sizes").map(|v| counts(v, "/sizes")).transpose()?;
    let assignment = obj.get("assignment").map(|v| counts(v, "/assignment")).transpose()?;
    if let Some(s) = &sizes {
        if let Some(k) = s.iter().position(|&x| x == 0) {
            return Err(Error::schema(format!("/sizes/{k}"), "cluster size must be positive"));
        }
        if s.is_empty() {
            return Err(Error::schema("/sizes", "need at least one cluster"));
        }
    }
    match (sizes, assignment) {
        (None, None) => Err(Error::schema("/sizes", "binary mode needs sizes or assignment")),
        (Some(sizes), None) => {
            let assignment = super::contiguous_assignment(&sizes);
            Ok(Loadings::Binary { assignment, n_clusters: sizes.len() })
        }
        (sizes, Some(one_based)) => {
            if let Some(k) = one_based.iter().position(|&g| g == 0) {
                return Err(Error::schema(format!("/assignment/{k}"), "cluster indices are 1-based"));
            }
            let f = sizes.as_ref().map_or_else(|| one_based.iter().copied().max().unwrap_or(0), Vec::len);
            if let Some(k) = one_based.iter().position(|&g| g > f) {
                return Err(Error::schema(format!("/assignment/{k}"), format!("cluster index exceeds {f}")));
            }
            let assignment: Vec<usize> = one_based.iter().map(|g| g - 1).collect();
            let mut counted = vec![0usize; f];
            assignment.iter().for_each(|&g| counted[g] += 1);
            if let Some(sizes) = sizes {
                if sizes != counted {
                    return Err(Error::schema("/sizes", "sizes disagree with assignment counts"));
                }
            } else if let Some(a) = counted.iter().position(|&c| c == 0) {
                return Err(Error::schema("/assignment", format!("cluster {} has no alphas", a + 1)));
            }
            if assignment.is_empty() {
                return Err(Error::schema("/assignment", "need at least one alpha"));
            }
            Ok(Loadings::Binary { assignment, n_clusters: f })
        }
    }
}

fn numbers(v: &Value, pointer: &str) -> Result<Vec<f64>> {
    let items = v.as_array().ok_or_else(|| Error::schema(pointer, "expected an array of numbers"))?;
    items
        .iter()
        .enumerate()
        .map(|(k, x)| {
            x.as_f64()
                .filter(|x| x.is_finite())
                .ok_or_else(|| Error::schema(format!("{pointer}/{k}"), "expected a finite number"))
        })
        .collect()
}

fn counts(v: &Value, pointer: &str) -> Result<Vec<usize>> {
    let items = v.as_array().ok_or_else(|| Error::schema(pointer, "expected an array of integers"))?;
    items
        .iter()
        .enumerate()
        .map(|(k, x)| {
            x.as_u64()
                .map(|u| u as usize)
                .ok_or_else(|| Error::schema(format!("{pointer}/{k}"), "expected a non-negative integer"))
        })
        .collect()
}

fn matrix(v: &Value, pointer: &str, cols: Option<usize>) -> Result<DMatrix<f64>> {
    let rows = v.as_array().ok_or_else(|| Error::schema(pointer, "expected an array of rows"))?;
    if rows.is_empty() {
        return Err(Error::schema(pointer, "matrix has no rows"));
    }
    let parsed: Vec<Vec<f64>> =
        rows.iter().enumerate().map(|(i, r)| numbers(r, &format!("{pointer}/{i}"))).collect::<Result<_>>()?;
    let width = cols.unwrap_or(parsed[0].len());
    if let Some(i) = parsed.iter().position(|r| r.len() != width) {
        return Err(Error::schema(format!("{pointer}/{i}"), format!("expected {width} entries")));
    }
    Ok(DMatrix::from_fn(parsed.len(), width, |i, j| parsed[i][j]))
}
