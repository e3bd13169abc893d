//! JSON state files.
//!
//! Keys are written in the canonical order `gamma, n_particles, n_colors, x,
//! p, a, b` (then `seed` when known), one key per line, floats with 17
//! significant digits (`{:.16e}`), so a parse/render round trip reproduces the
//! file byte for byte.

use std::fmt::{self, Write as _};

use nalgebra::{DMatrix, DVector};
use serde_json::{Map, Value};
use spincm_core::phase::{SpinState, Validation};
use spincm_core::Error;

const KEYS: [&str; 8] = ["gamma", "n_particles", "n_colors", "x", "p", "a", "b", "seed"];

#[derive(Debug, Clone, PartialEq)]
pub struct StateFile {
    pub gamma: f64,
    pub n_particles: usize,
    pub n_colors: usize,
    pub x: Vec<f64>,
    pub p: Vec<f64>,
    pub a: Vec<Vec<f64>>,
    pub b: Vec<Vec<f64>>,
    pub seed: Option<u64>,
}

/// A problem with one field of a state file.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldError {
    pub field: String,
    pub message: String,
}

impl fmt::Display for FieldError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "field `{}`: {}", self.field, self.message)
    }
}

fn field_err(field: &str, message: impl Into<String>) -> FieldError {
    FieldError {
        field: field.into(),
        message: message.into(),
    }
}

fn number(obj: &Map<String, Value>, key: &str) -> Result<f64, FieldError> {
    match obj.get(key) {
        None => Err(field_err(key, "missing")),
        Some(v) => v.as_f64().ok_or_else(|| field_err(key, format!("expected a number, found {v}"))),
    }
}

fn count(obj: &Map<String, Value>, key: &str) -> Result<usize, FieldError> {
    match obj.get(key) {
        None => Err(field_err(key, "missing")),
        Some(v) => v
            .as_u64()
            .and_then(|n| usize::try_from(n).ok())
            .filter(|&n| n > 0)
            .ok_or_else(|| field_err(key, format!("expected a positive integer, found {v}"))),
    }
}

fn vector(obj: &Map<String, Value>, key: &str, len: usize) -> Result<Vec<f64>, FieldError> {
    let arr = obj
        .get(key)
        .ok_or_else(|| field_err(key, "missing"))?
        .as_array()
        .ok_or_else(|| field_err(key, "expected an array of numbers"))?;
    if arr.len() != len {
        return Err(field_err(key, format!("expected {len} entries, found {}", arr.len())));
    }
    arr.iter()
        .enumerate()
        .map(|(i, v)| {
            v.as_f64()
                .ok_or_else(|| field_err(key, format!("entry {} is {v}, expected a number", i + 1)))
        })
        .collect()
}

fn matrix(obj: &Map<String, Value>, key: &str, rows: usize, cols: usize) -> Result<Vec<Vec<f64>>, FieldError> {
    let arr = obj
        .get(key)
        .ok_or_else(|| field_err(key, "missing"))?
        .as_array()
        .ok_or_else(|| field_err(key, "expected an array of rows"))?;
    if arr.len() != rows {
        return Err(field_err(key, format!("expected {rows} rows (one per particle), found {}", arr.len())));
    }
    arr.iter()
        .enumerate()
        .map(|(i, row)| {
            let row = row
                .as_array()
                .ok_or_else(|| field_err(key, format!("row {} is not an array", i + 1)))?;
            if row.len() != cols {
                return Err(field_err(
                    key,
                    format!("row {} has {} entries, expected {cols} (one per color)", i + 1, row.len()),
                ));
            }
            row.iter()
                .enumerate()
                .map(|(k, v)| {
                    v.as_f64().ok_or_else(|| {
                        field_err(key, format!("row {} entry {} is {v}, expected a number", i + 1, k + 1))
                    })
                })
                .collect()
        })
        .collect()
}

fn render_float(out: &mut String, v: f64) {
    write!(out, "{v:.16e}").unwrap();
}

fn render_vector(out: &mut String, v: &[f64]) {
    out.push('[');
    for (i, x) in v.iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        render_float(out, *x);
    }
    out.push(']');
}

impl StateFile {
    pub fn parse(text: &str) -> Result<Self, FieldError> {
        let value: Value =
            serde_json::from_str(text).map_err(|e| field_err("<document>", format!("not valid JSON: {e}")))?;
        let obj = value
            .as_object()
            .ok_or_else(|| field_err("<document>", "expected a JSON object"))?;
        if let Some(unknown) = obj.keys().find(|k| !KEYS.contains(&k.as_str())) {
            return Err(field_err(unknown, format!("unknown key (expected one of {})", KEYS.join(", "))));
        }
        let n = count(obj, "n_particles")?;
        let nc = count(obj, "n_colors")?;
        let seed = match obj.get("seed") {
            None | Some(Value::Null) => None,
            Some(v) => Some(
                v.as_u64()
                    .ok_or_else(|| field_err("seed", format!("expected a non-negative integer, found {v}")))?,
            ),
        };
        Ok(Self {
            gamma: number(obj, "gamma")?,
            n_particles: n,
            n_colors: nc,
            x: vector(obj, "x", n)?,
            p: vector(obj, "p", n)?,
            a: matrix(obj, "a", n, nc)?,
            b: matrix(obj, "b", n, nc)?,
            seed,
        })
    }

    pub fn render(&self) -> String {
        let mut out = String::from("{\n  \"gamma\": ");
        render_float(&mut out, self.gamma);
        write!(out, ",\n  \"n_particles\": {},\n  \"n_colors\": {},\n  \"x\": ", self.n_particles, self.n_colors).unwrap();
        render_vector(&mut out, &self.x);
        out.push_str(",\n  \"p\": ");
        render_vector(&mut out, &self.p);
        for (key, m) in [("a", &self.a), ("b", &self.b)] {
            write!(out, ",\n  \"{key}\": [").unwrap();
            for (i, row) in m.iter().enumerate() {
                out.push_str(if i == 0 { "\n    " } else { ",\n    " });
                render_vector(&mut out, row);
            }
            out.push_str("\n  ]");
        }
        if let Some(seed) = self.seed {
            write!(out, ",\n  \"seed\": {seed}").unwrap();
        }
        out.push_str("\n}\n");
        out
    }

    pub fn from_state(state: &SpinState<f64>, seed: Option<u64>) -> Self {
        let rows = |m: &DMatrix<f64>| m.row_iter().map(|r| r.iter().copied().collect()).collect();
        Self {
            gamma: state.gamma(),
            n_particles: state.n_particles(),
            n_colors: state.n_colors(),
            x: state.x().iter().copied().collect(),
            p: state.p().iter().copied().collect(),
            a: rows(state.a()),
            b: rows(state.b()),
            seed,
        }
    }

    /// Builds the state; `b_i . a_i = 1` is enforced unless `constrained` is
    /// false.
    pub fn to_state(&self, constrained: bool) -> Result<SpinState<f64>, FieldError> {
        let (n, nc) = (self.n_particles, self.n_colors);
        let flat = |m: &Vec<Vec<f64>>| DMatrix::from_row_iterator(n, nc, m.iter().flatten().copied());
        let validation = if constrained {
            Validation::default()
        } else {
            Validation::unconstrained()
        };
        SpinState::with_validation(
            self.gamma,
            DVector::from_column_slice(&self.x),
            DVector::from_column_slice(&self.p),
            flat(&self.a),
            flat(&self.b),
            &validation,
        )
        .map_err(|e| {
            let field = match &e {
                Error::NonFinite(name) => name,
                Error::SingularConfiguration { .. } | Error::Overflow { .. } => "x",
                Error::ConstraintViolation { .. } => "b",
                Error::InvalidParameter(_) => "gamma",
                _ => "<document>",
            };
            field_err(field, e.to_string())
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"{"gamma": 1, "n_particles": 2, "n_colors": 1,
        "x": [0, 1.5], "p": [0.1, -0.2], "a": [[2], [0.5]], "b": [[0.5], [2]]}"#;

    #[test]
    fn parses_and_round_trips() {
        let f = StateFile::parse(SAMPLE).unwrap();
        let state = f.to_state(true).unwrap();
        let text = StateFile::from_state(&state, Some(4)).render();
        let again = StateFile::parse(&text).unwrap();
        assert_eq!(again.render(), text);
        assert_eq!(again.seed, Some(4));
        assert!(text.starts_with("{\n  \"gamma\": 1.0000000000000000e0,\n  \"n_particles\": 2"));
    }

    #[test]
    fn fixture_round_trips_byte_for_byte() {
        for text in [include_str!("../fixtures/default_state.json"), include_str!("../fixtures/tampered_state.json")] {
            let f = StateFile::parse(text).unwrap();
            let state = f.to_state(false).unwrap();
            assert_eq!(StateFile::from_state(&state, f.seed).render(), text);
        }
    }

    #[test]
    fn diagnostics_name_the_field() {
        let cases = [
            (SAMPLE.replace("\"x\": [0, 1.5]", "\"x\": [0]"), "x"),
            (SAMPLE.replace("[[2], [0.5]]", "[[2], [\"q\"]]"), "a"),
            (SAMPLE.replace("\"gamma\": 1,", ""), "gamma"),
            (SAMPLE.replace("[[0.5], [2]]", "[[0.5], [3]]"), "b"),
            (SAMPLE.replace("\"x\": [0, 1.5]", "\"x\": [0, 0]"), "x"),
            (SAMPLE.replace("\"n_colors\": 1", "\"n_colors\": 0"), "n_colors"),
            (SAMPLE.replace("\"gamma\"", "\"gama\""), "gama"),
        ];
        for (text, field) in cases {
            let err = StateFile::parse(&text).and_then(|f| f.to_state(true).map(|_| f)).unwrap_err();
            assert_eq!(err.field, field, "{err}");
        }
        assert_eq!(StateFile::parse("{").unwrap_err().field, "<document>");
    }

    #[test]
    fn tampered_constraint_loads_unconstrained() {
        let f = StateFile::parse(&SAMPLE.replace("[[0.5], [2]]", "[[0.55], [2]]")).unwrap();
        assert!(f.to_state(true).is_err());
        assert!(f.to_state(false).is_ok());
    }
}
