//! Parsers for the compact command-line notations.
//!
//! * bulk law: `r1:w1,r2:w2,...` (a bare `r` is a single atom of weight 1)
//! * spikes: `a1xm1,a2xm2,...` (a bare `a` has multiplicity 1)
//! * rank split: `L:S`
//! * noise level: a positive number or `auto`

use crate::error::{Error, Result};
use crate::mp::{Atom, DiscreteLsd};
use crate::spectrum::SpikeRankSet;

/// Weights within this distance of summing to one are renormalised.
const WEIGHT_SLACK: f64 = 1e-6;

fn err(what: &'static str, message: impl Into<String>) -> Error {
    Error::Syntax { what, message: message.into() }
}

fn number(what: &'static str, tok: &str) -> Result<f64> {
    let t = tok.trim();
    let v: f64 = t.parse().map_err(|_| err(what, format!("{t:?} is not a number")))?;
    if !v.is_finite() {
        return Err(err(what, format!("{t:?} is not finite")));
    }
    Ok(v)
}

fn count(what: &'static str, tok: &str) -> Result<usize> {
    let t = tok.trim();
    t.parse().map_err(|_| err(what, format!("{t:?} is not a non-negative integer")))
}

fn items<'a>(what: &'static str, s: &'a str) -> Result<Vec<&'a str>> {
    let s = s.trim();
    if s.is_empty() {
        return Err(err(what, "empty list"));
    }
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(err(what, "empty item"));
    }
    Ok(parts)
}

/// Bulk law with unit noise level.
pub fn parse_bulk(s: &str) -> Result<DiscreteLsd> {
    const W: &str = "bulk";
    let parts = items(W, s)?;
    let mut atoms = Vec::with_capacity(parts.len());
    for p in &parts {
        let (r, w) = match p.split_once(':') {
            Some((r, w)) => (number(W, r)?, number(W, w)?),
            None if parts.len() == 1 => (number(W, p)?, 1.0),
            None => return Err(err(W, format!("{p:?} lacks a weight"))),
        };
        if r <= 0.0 {
            return Err(err(W, format!("atom location {r} must be positive")));
        }
        if !(w > 0.0 && w <= 1.0) {
            return Err(err(W, format!("weight {w} outside (0, 1]")));
        }
        atoms.push(Atom { location: r, weight: w });
    }
    atoms.sort_by(|a, b| a.location.total_cmp(&b.location));
    if atoms.windows(2).any(|w| w[0].location == w[1].location) {
        return Err(err(W, "repeated atom location"));
    }
    let total: f64 = atoms.iter().map(|a| a.weight).sum();
    if (total - 1.0).abs() > WEIGHT_SLACK {
        return Err(err(W, format!("weights sum to {total}, not 1")));
    }
    for a in &mut atoms {
        a.weight /= total;
    }
    // renormalised weights can still miss 1 by an ulp or two
    let drift = 1.0 - atoms.iter().map(|a| a.weight).sum::<f64>();
    if let Some(last) = atoms.last_mut() {
        last.weight += drift;
    }
    DiscreteLsd::new(atoms, 1.0).map_err(|e| err(W, e.to_string()))
}

/// `(alpha, multiplicity)` pairs in the order given.
pub fn parse_spikes(s: &str) -> Result<Vec<(f64, usize)>> {
    const W: &str = "spikes";
    if s.trim().is_empty() || s.trim() == "none" {
        return Ok(Vec::new());
    }
    let mut out = Vec::new();
    for p in items(W, s)? {
        let (a, m) = match p.rsplit_once(['x', 'X', '*']) {
            Some((a, m)) => (number(W, a)?, count(W, m)?),
            None => (number(W, p)?, 1),
        };
        if a <= 0.0 {
            return Err(err(W, format!("spike {a} must be positive")));
        }
        if m == 0 {
            return Err(err(W, "multiplicity must be at least 1"));
        }
        out.push((a, m));
    }
    Ok(out)
}

pub fn parse_split(s: &str) -> Result<SpikeRankSet> {
    const W: &str = "split";
    let (l, r) = s.split_once(':').ok_or_else(|| err(W, format!("expected L:S, got {s:?}")))?;
    Ok(SpikeRankSet::new(count(W, l)?, count(W, r)?))
}

/// Simulation cells as `p:n,p:n,...`.
pub fn parse_grid(s: &str) -> Result<Vec<(usize, usize)>> {
    const W: &str = "grid";
    let mut out = Vec::new();
    for item in items(W, s)? {
        let (p, n) = item.split_once(':').ok_or_else(|| err(W, format!("expected p:n, got {item:?}")))?;
        let (p, n) = (count(W, p)?, count(W, n)?);
        if p == 0 || n == 0 {
            return Err(err(W, "dimensions must be positive"));
        }
        out.push((p, n));
    }
    Ok(out)
}

/// Comma-separated positive integers.
pub fn parse_counts(s: &str) -> Result<Vec<usize>> {
    const W: &str = "counts";
    let mut out = Vec::new();
    for item in items(W, s)? {
        let v = count(W, item)?;
        if v == 0 {
            return Err(err(W, "counts must be positive"));
        }
        out.push(v);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Sigma2Arg {
    Auto,
    Value(f64),
}

pub fn parse_sigma2(s: &str) -> Result<Sigma2Arg> {
    let t = s.trim();
    if t.eq_ignore_ascii_case("auto") {
        return Ok(Sigma2Arg::Auto);
    }
    let v = number("sigma2", t)?;
    if v <= 0.0 {
        return Err(err("sigma2", format!("{v} must be positive")));
    }
    Ok(Sigma2Arg::Value(v))
}
