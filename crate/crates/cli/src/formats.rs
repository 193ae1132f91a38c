//! Function files and instance JSON.
//!
//! A function file is a header line `fpfn 1 <p> <n> <kind>` followed by the
//! `p^n` values in canonical point order, separated by whitespace. Booleans
//! are `0`/`1`, reals are decimals, torus values are `a/q` (or `a/p^k`) and
//! complex values are `re,im`.

use hofa_core::algebra::{Space, TorusValue};
use hofa_core::analysis::{FunctionTable, TableKind, TableValues};
use hofa_core::factors::{LabelSpace, StructureFunction};
use hofa_core::instances::RegularityInstance;
use hofa_core::{Error, Result};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

pub const FORMAT_VERSION: u32 = 1;

pub fn read_function(text: &str) -> Result<FunctionTable> {
    let mut lines = text.lines();
    let header = lines.by_ref().find(|l| !l.trim().is_empty()).ok_or_else(|| Error::Parse("empty function file".into()))?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    if fields.len() != 5 || fields[0] != "fpfn" {
        return Err(Error::Parse(format!("bad header {header:?}, expected \"fpfn 1 <p> <n> <kind>\"")));
    }
    let version: u32 = fields[1].parse().map_err(|_| Error::Parse(format!("bad version {:?}", fields[1])))?;
    if version != FORMAT_VERSION {
        return Err(Error::Parse(format!("unsupported function file version {version}")));
    }
    let p: u32 = fields[2].parse().map_err(|_| Error::Parse(format!("bad prime {:?}", fields[2])))?;
    let n: usize = fields[3].parse().map_err(|_| Error::Parse(format!("bad dimension {:?}", fields[3])))?;
    let kind: TableKind = fields[4].parse()?;
    let space = Space::new(p, n)?;
    let tokens: Vec<&str> = lines.flat_map(str::split_whitespace).collect();
    if tokens.len() != space.size() {
        return Err(Error::Parse(format!("expected {} values, found {}", space.size(), tokens.len())));
    }
    let real = |t: &str| -> Result<f64> { t.parse::<f64>().map_err(|_| Error::Parse(format!("bad value {t:?}"))) };
    let values = match kind {
        TableKind::Torus => TableValues::Torus(tokens.iter().map(|t| TorusValue::parse(p, t)).collect::<Result<_>>()?),
        TableKind::Complex => TableValues::Complex(
            tokens
                .iter()
                .map(|t| {
                    let (re, im) = t.split_once(',').ok_or_else(|| Error::Parse(format!("complex value {t:?} is not re,im")))?;
                    Ok(Complex64::new(real(re)?, real(im)?))
                })
                .collect::<Result<_>>()?,
        ),
        _ => TableValues::Real(tokens.iter().map(|t| real(t)).collect::<Result<_>>()?),
    };
    FunctionTable::new(space, kind, values)
}

pub fn write_function(f: &FunctionTable) -> String {
    let mut out = format!("fpfn {FORMAT_VERSION} {} {} {}\n", f.p(), f.n(), f.kind());
    let tokens: Vec<String> = match f.values() {
        TableValues::Real(v) if f.kind() == TableKind::Boolean => v.iter().map(|x| format!("{}", *x as u8)).collect(),
        TableValues::Real(v) => v.iter().map(|x| format!("{x:?}")).collect(),
        TableValues::Torus(v) => v.iter().map(|t| t.to_string()).collect(),
        TableValues::Complex(v) => v.iter().map(|z| format!("{:?},{:?}", z.re, z.im)).collect(),
    };
    for row in tokens.chunks(f.p() as usize) {
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    out
}

/// `a/p^k` with `k = h + 1`, numerator unreduced.
fn label_string(p: u32, num: u64, k: u32) -> String {
    format!("{num}/{p}^{k}")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AtomEntry {
    pub atom: Vec<String>,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceFile {
    /// Needed when `C = 0`; otherwise also implied by the atom strings.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<u32>,
    pub gamma: f64,
    #[serde(rename = "C")]
    pub c: usize,
    pub degree_bound: u32,
    pub degrees: Vec<u32>,
    pub depths: Vec<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rank: Option<u32>,
    pub gamma_table: Vec<AtomEntry>,
}

fn infer_prime(file: &InstanceFile) -> Result<u32> {
    if let Some(p) = file.p {
        return Ok(p);
    }
    let s = file
        .gamma_table
        .iter()
        .flat_map(|e| e.atom.iter())
        .find(|s| s.contains('^'))
        .ok_or_else(|| Error::Parse("instance needs a \"p\" field or atoms written a/p^k".into()))?;
    let (_, den) = s.split_once('/').unwrap_or_default();
    let base = den.split_once('^').map_or(den, |(b, _)| b);
    base.trim().parse().map_err(|_| Error::Parse(format!("bad atom {s:?}")))
}

pub fn parse_instance(text: &str) -> Result<RegularityInstance> {
    let file: InstanceFile = serde_json::from_str(text).map_err(|e| Error::Parse(format!("instance JSON: {e}")))?;
    instance_from_file(&file)
}

pub fn instance_from_file(file: &InstanceFile) -> Result<RegularityInstance> {
    if file.c != file.degrees.len() || file.c != file.depths.len() {
        return Err(Error::Parse(format!(
            "C = {} but {} degrees and {} depths are given",
            file.c,
            file.degrees.len(),
            file.depths.len()
        )));
    }
    let p = infer_prime(file)?;
    let labels = LabelSpace::new(p, file.depths.clone())?;
    let mut values: Vec<Option<f64>> = vec![None; labels.order() as usize];
    for e in &file.gamma_table {
        let vals = e.atom.iter().map(|s| TorusValue::parse(p, s)).collect::<Result<Vec<_>>>()?;
        let code = labels.code_of_values(&vals)? as usize;
        if values[code].replace(e.value).is_some() {
            return Err(Error::Parse(format!("atom {:?} is listed twice", e.atom)));
        }
    }
    let values = values
        .into_iter()
        .enumerate()
        .map(|(c, v)| v.ok_or_else(|| Error::Parse(format!("gamma_table misses atom {}", labels.label_of(c as u64)))))
        .collect::<Result<Vec<_>>>()?;
    let gamma = StructureFunction::new(labels, values)?;
    RegularityInstance::new(file.gamma, gamma, file.degree_bound, file.degrees.clone(), file.depths.clone(), file.rank)
}

pub fn instance_to_file(inst: &RegularityInstance) -> InstanceFile {
    let labels = inst.structure().label_space();
    let p = labels.p();
    let gamma_table = (0..labels.order())
        .map(|c| AtomEntry {
            atom: labels
                .digits(c)
                .iter()
                .zip(labels.depths())
                .map(|(&a, &h)| label_string(p, a, h + 1))
                .collect(),
            value: inst.structure().at_code(c),
        })
        .collect();
    InstanceFile {
        p: Some(p),
        gamma: inst.gamma(),
        c: inst.complexity(),
        degree_bound: inst.degree_bound(),
        degrees: inst.degrees().to_vec(),
        depths: inst.depths().to_vec(),
        rank: inst.rank(),
        gamma_table,
    }
}

pub fn write_instance(inst: &RegularityInstance) -> String {
    let mut s = serde_json::to_string_pretty(&instance_to_file(inst)).expect("instance serializes");
    s.push('\n');
    s
}

/// Comma-separated integers, e.g. `1,0,2`.
pub fn parse_list<T: std::str::FromStr>(s: &str) -> Result<Vec<T>> {
    if s.trim().is_empty() {
        return Ok(vec![]);
    }
    s.split(',')
        .map(|t| t.trim().parse::<T>().map_err(|_| Error::Parse(format!("bad list entry {t:?} in {s:?}"))))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn function_round_trip_all_kinds() {
        let s = Space::new(3, 1).unwrap();
        let tables = [
            FunctionTable::boolean(s, vec![0.0, 1.0, 1.0]).unwrap(),
            FunctionTable::unit(s, vec![0.1, 0.5, 1.0 / 3.0]).unwrap(),
            FunctionTable::signed(s, vec![-0.25, 0.0, 1.0]).unwrap(),
            FunctionTable::torus(s, vec![TorusValue::zero(3), TorusValue::new(3, 2, 2).unwrap(), TorusValue::new(3, 1, 1).unwrap()])
                .unwrap(),
            FunctionTable::complex(s, vec![Complex64::new(0.5, -0.5), Complex64::new(1.0, 0.0), Complex64::new(0.0, 2.0)]).unwrap(),
        ];
        for t in tables {
            let text = write_function(&t);
            assert_eq!(read_function(&text).unwrap(), t, "{text}");
        }
    }

    #[test]
    fn malformed_files_are_rejected() {
        assert!(read_function("fpfn 1 2 1 boolean\n0").is_err());
        assert!(read_function("fpfn 2 2 1 boolean\n0 1").is_err());
        assert!(read_function("fpfn 1 2 1 boolean\n0 2").is_err());
        assert!(read_function("fpfn 1 4 1 boolean\n0 1 0 1").is_err());
        assert!(read_function("fpfn 1 2 1 torus\n0 1/3").is_err());
        assert_eq!(read_function("fpfn 1 2 1 torus\n0 1/2^2").unwrap().torus_values().unwrap()[1].to_string(), "1/4");
    }

    #[test]
    fn instance_round_trip() {
        let labels = LabelSpace::new(2, vec![0, 1]).unwrap();
        let g = StructureFunction::from_fn(labels, |l| l.0[0].to_f64() * 0.5 + l.0[1].to_f64() / 3.0).unwrap();
        let inst = RegularityInstance::new(0.05, g, 3, vec![1, 2], vec![0, 1], Some(2)).unwrap();
        let text = write_instance(&inst);
        assert!(text.contains("\"1/2^2\""));
        assert_eq!(parse_instance(&text).unwrap(), inst);
        let oblivious = RegularityInstance::new(0.5, StructureFunction::identity(3, 0).unwrap(), 2, vec![1], vec![0], None).unwrap();
        let text = write_instance(&oblivious);
        assert!(!text.contains("rank"));
        assert_eq!(parse_instance(&text).unwrap(), oblivious);
    }

    #[test]
    fn instance_errors() {
        let missing = r#"{"p":2,"gamma":0.1,"C":1,"degree_bound":2,"degrees":[1],"depths":[0],
            "gamma_table":[{"atom":["0/2^1"],"value":0.0}]}"#;
        assert!(parse_instance(missing).is_err());
        let no_p = r#"{"gamma":0.1,"C":0,"degree_bound":2,"degrees":[],"depths":[],"gamma_table":[{"atom":[],"value":0.5}]}"#;
        assert!(parse_instance(no_p).is_err());
        let ok = r#"{"gamma":0.1,"C":1,"degree_bound":2,"degrees":[1],"depths":[0],
            "gamma_table":[{"atom":["0/2^1"],"value":0.0},{"atom":["1/2^1"],"value":1.0}]}"#;
        assert!(parse_instance(ok).unwrap().is_rank_oblivious());
    }
}
