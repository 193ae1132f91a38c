//! JSON report helpers. Every real is printed with 12 fixed decimals.

use std::str::FromStr;

use hofa_core::algebra::TorusValue;
use hofa_core::analysis::GowersEstimate;
use hofa_core::factors::{AtomLabel, RankReport};
use hofa_core::instances::{DistributionSource, RestrictionDistribution};
use hofa_core::testers::TesterVerdict;
use serde_json::{json, Map, Number, Value};

pub fn real(x: f64) -> Value {
    if x.is_nan() {
        return Value::String("nan".into());
    }
    if x.is_infinite() {
        return Value::String(if x > 0.0 { "inf" } else { "-inf" }.into());
    }
    let mut s = format!("{x:.12}");
    if s.starts_with('-') && s[1..].chars().all(|c| c == '0' || c == '.') {
        s.remove(0);
    }
    Value::Number(Number::from_str(&s).expect("fixed-point decimal"))
}

pub fn reals(xs: &[f64]) -> Value {
    Value::Array(xs.iter().map(|&x| real(x)).collect())
}

/// Integers beyond `u64` are printed as decimal strings.
pub fn big(x: u128) -> Value {
    match u64::try_from(x) {
        Ok(v) => json!(v),
        Err(_) => Value::String(x.to_string()),
    }
}

pub fn torus(t: &TorusValue) -> Value {
    Value::String(t.to_string())
}

pub fn label(l: &AtomLabel) -> Value {
    Value::Array(l.0.iter().map(torus).collect())
}

pub fn gowers(g: &GowersEstimate) -> Value {
    json!({
        "order": g.d,
        "mode": if g.is_exact() { "exact" } else { "monte-carlo" },
        "value": real(g.value),
        "raw_mean": real(g.raw_mean),
        "half_width": real(g.half_width),
        "samples": big(g.samples),
    })
}

pub fn rank(r: &RankReport) -> Value {
    json!({
        "kind": r.kind().as_str(),
        "lower": r.lower.to_string(),
        "upper": r.upper.map(|u| u.to_string()),
        "witness": r.witness.iter().map(|q| q.to_string()).collect::<Vec<_>>(),
        "lambda": r.lambda.as_ref().map(|(l, d)| json!({"coefficients": l, "degree": d})),
        "required_budget": r.required_budget.map(big),
    })
}

/// A boolean table on `F_p^m` as its digit string in point order.
pub fn table_string(key: u64, len: usize) -> String {
    (0..len).map(|i| if key >> i & 1 == 1 { '1' } else { '0' }).collect()
}

pub fn distribution(mu: &RestrictionDistribution) -> Value {
    let source = match mu.source {
        DistributionSource::Exact { embeddings } => json!({"mode": "exact", "embeddings": big(embeddings)}),
        DistributionSource::Empirical { samples } => json!({"mode": "empirical", "samples": samples}),
        DistributionSource::Equidistributed { assignments } => {
            json!({"mode": "equidistributed", "assignments": big(assignments)})
        }
    };
    let len = mu.points();
    let entries: Vec<Value> = mu
        .probs
        .iter()
        .filter(|(_, &v)| v != 0.0)
        .map(|(&k, &v)| json!({"table": table_string(k, len), "probability": real(v)}))
        .collect();
    json!({
        "p": mu.p,
        "m": mu.m,
        "source": source,
        "total": real(mu.total()),
        "support": entries.len(),
        "entries": entries,
    })
}

pub fn verdict(v: &TesterVerdict) -> Value {
    let transcript: String = v
        .transcript
        .iter()
        .map(|t| match t {
            Some(true) => '1',
            Some(false) => '0',
            None => '?',
        })
        .collect();
    json!({
        "decision": v.decision.as_str(),
        "queries": v.queries,
        "trials": v.trials,
        "acceptance": real(v.acceptance),
        "half_width": real(v.half_width),
        "closeness_basis": if v.surrogate { "surrogate upper bound" } else { "direct" },
        "transcript": transcript,
    })
}

pub fn object(pairs: Vec<(&str, Value)>) -> Value {
    let mut m = Map::new();
    for (k, v) in pairs {
        m.insert(k.to_string(), v);
    }
    Value::Object(m)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixed_precision() {
        assert_eq!(real(1.0).to_string(), "1.000000000000");
        assert_eq!(real(-1e-20).to_string(), "0.000000000000");
        assert_eq!(real(1.0 / 3.0).to_string(), "0.333333333333");
        assert_eq!(real(f64::INFINITY), Value::String("inf".into()));
        assert_eq!(big(u128::MAX).as_str().unwrap().len(), 39);
        assert_eq!(table_string(0b10, 4), "0100");
    }
}
