//! Text form: terms `c * x1^d1*x2^d2 / q` joined by ` + `, `q = p^(h+1)`
//! written out. Zero exponents are omitted and the zero polynomial is `0`.
//! The parser also accepts `q` as `p^k`.

use std::fmt;

use super::NcPolynomial;
use crate::algebra::torus::p_pow;
use crate::error::{Error, Result};

impl fmt::Display for NcPolynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (i, (m, c)) in self.terms.iter().enumerate() {
            if i > 0 {
                write!(f, " + ")?;
            }
            let vars: Vec<String> = m
                .exponents
                .iter()
                .enumerate()
                .filter(|(_, &e)| e > 0)
                .map(|(j, e)| format!("x{}^{}", j + 1, e))
                .collect();
            write!(f, "{} * {} / {}", c, vars.join("*"), p_pow(self.p, m.depth + 1))?;
        }
        Ok(())
    }
}

impl NcPolynomial {
    /// Parses the text form over `F_p^n`.
    pub fn parse(p: u32, n: usize, s: &str) -> Result<NcPolynomial> {
        let s = s.trim();
        if s == "0" {
            return NcPolynomial::from_terms(p, n, []);
        }
        let mut terms = Vec::new();
        for raw in s.split(" + ") {
            terms.push(parse_term(p, n, raw.trim())?);
        }
        NcPolynomial::from_terms(p, n, terms)
    }
}

fn parse_term(p: u32, n: usize, t: &str) -> Result<(Vec<u32>, u32, u32)> {
    let bad = |why: &str| Error::Parse(format!("term {t:?}: {why}"));
    let (body, den) = t.rsplit_once('/').ok_or_else(|| bad("missing denominator"))?;
    let (coef, vars) = body.split_once('*').ok_or_else(|| bad("missing '*' after coefficient"))?;
    let c: u32 = coef.trim().parse().map_err(|_| bad("bad coefficient"))?;
    let den = den.trim();
    let k = if let Some((base, exp)) = den.split_once('^') {
        if base.trim().parse::<u32>().ok() != Some(p) {
            return Err(bad("denominator must be a power of p"));
        }
        exp.trim().parse::<u32>().map_err(|_| bad("bad denominator exponent"))?
    } else {
        let mut q: u64 = den.parse().map_err(|_| bad("bad denominator"))?;
        let mut k = 0;
        while q > 1 && q.is_multiple_of(p as u64) {
            q /= p as u64;
            k += 1;
        }
        if q != 1 {
            return Err(bad("denominator must be a power of p"));
        }
        k
    };
    if k == 0 {
        return Err(bad("denominator must be at least p"));
    }
    let mut exps = vec![0u32; n];
    for v in vars.split('*') {
        let v = v.trim();
        let rest = v.strip_prefix('x').ok_or_else(|| bad("variables are written x<i>^<e>"))?;
        let (idx, e) = match rest.split_once('^') {
            Some((i, e)) => (i, e.parse::<u32>().map_err(|_| bad("bad exponent"))?),
            None => (rest, 1),
        };
        let idx: usize = idx.parse().map_err(|_| bad("bad variable index"))?;
        if idx == 0 || idx > n {
            return Err(bad("variable index out of range"));
        }
        exps[idx - 1] += e;
    }
    Ok((exps, k - 1, c))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn display_forms() {
        let q = NcPolynomial::monomial(2, vec![1], 1).unwrap();
        assert_eq!(q.to_string(), "1 * x1^1 / 4");
        let r = NcPolynomial::from_terms(3, 2, [(vec![1, 2], 0, 2), (vec![0, 1], 1, 1)]).unwrap();
        assert_eq!(r.to_string(), "2 * x1^1*x2^2 / 3 + 1 * x2^1 / 9");
        assert_eq!(NcPolynomial::zero(2, 3).to_string(), "0");
    }

    #[test]
    fn parse_round_trip() {
        let r = NcPolynomial::from_terms(3, 2, [(vec![1, 2], 0, 2), (vec![0, 1], 1, 1)]).unwrap();
        assert_eq!(NcPolynomial::parse(3, 2, &r.to_string()).unwrap(), r);
        assert_eq!(NcPolynomial::parse(2, 1, "1 * x1 / 2^2").unwrap().to_string(), "1 * x1^1 / 4");
        assert!(NcPolynomial::parse(2, 1, "1 * x2^1 / 2").is_err());
        assert!(NcPolynomial::parse(2, 1, "1 * x1^1 / 3").is_err());
        assert!(NcPolynomial::parse(2, 1, "1 * x1^2 / 2").is_err());
    }
}
