//! JSON report values with fixed float formatting.

use parh_core::rational::{fmt_q, to_f64, Q};
use serde_json::{json, Number, Value};
use std::str::FromStr;

/// A float with 17 significant digits; non-finite values become `null`.
pub fn float(x: f64) -> Value {
    if !x.is_finite() {
        return Value::Null;
    }
    Value::Number(Number::from_str(&format!("{x:.16e}")).expect("formatted float is a JSON number"))
}

pub fn floats(xs: &[f64]) -> Value {
    Value::Array(xs.iter().map(|x| float(*x)).collect())
}

/// A measured quantity with its normalization tag.
pub fn quantity(x: f64, normalization: &str) -> Value {
    json!({ "value": float(x), "normalization": normalization })
}

/// An exact rational with its float value and normalization tag.
pub fn exact(x: &Q, normalization: &str) -> Value {
    json!({ "exact": fmt_q(x), "value": float(to_f64(x)), "normalization": normalization })
}

/// Ratios `x[k] / x[k+1]` of successive refinement levels.
pub fn refinement_ratios(xs: &[f64]) -> Value {
    floats(&xs.windows(2).map(|w| w[0] / w[1]).collect::<Vec<_>>())
}

/// Pretty-printed report text with a trailing newline.
pub fn render(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("report serializes");
    s.push('\n');
    s
}
