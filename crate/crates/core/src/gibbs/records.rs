//! Newline-delimited configuration records.
//!
//! ```text
//! # kgsim-records v1 model_hash=<hex> seed=<n> d=<d>
//! <n> <x1_1> .. <x1_d> <x2_1> ..              (one configuration per line)
//! t=<time> <n> <coords> ..                    (snapshot with a time stamp)
//! ```
//! Coordinates carry 9 significant digits.

use std::io::{BufRead, Write};

use crate::error::{Result, SimError};
use crate::geometry::Point;
use crate::model::{Configuration, ModelSpec};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RecordHeader {
    pub model_hash: String,
    pub seed: u64,
    pub dim: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Record {
    pub time: Option<f64>,
    pub points: Vec<Point>,
}

pub fn fmt_sig9(x: f64) -> String {
    format!("{x:.8e}")
}

pub fn write_records<'a, W: Write>(
    mut w: W,
    model: &ModelSpec,
    seed: u64,
    records: impl IntoIterator<Item = (Option<f64>, &'a Configuration)>,
) -> Result<()> {
    let d = model.dom.dim();
    writeln!(w, "# kgsim-records v1 model_hash={} seed={} d={}", model.hash(), seed, d)?;
    for (t, c) in records {
        let mut line = String::new();
        if let Some(t) = t {
            line.push_str(&format!("t={} ", fmt_sig9(t)));
        }
        line.push_str(&c.len().to_string());
        for p in c.points() {
            for x in p.iter().take(d) {
                line.push(' ');
                line.push_str(&fmt_sig9(*x));
            }
        }
        writeln!(w, "{line}")?;
    }
    Ok(())
}

fn bad(line: usize, msg: &str) -> SimError {
    SimError::Invalid(format!("record line {line}: {msg}"))
}

pub fn read_records<R: BufRead>(r: R) -> Result<(RecordHeader, Vec<Record>)> {
    let mut lines = r.lines();
    let head = lines.next().ok_or_else(|| bad(1, "missing header"))??;
    let rest = head.strip_prefix("# kgsim-records v1 ").ok_or_else(|| bad(1, "unrecognized header"))?;
    let (mut hash, mut seed, mut dim) = (None, None, None);
    for kv in rest.split_whitespace() {
        match kv.split_once('=') {
            Some(("model_hash", v)) => hash = Some(v.to_string()),
            Some(("seed", v)) => seed = v.parse().ok(),
            Some(("d", v)) => dim = v.parse().ok(),
            _ => {}
        }
    }
    let header = RecordHeader {
        model_hash: hash.ok_or_else(|| bad(1, "missing model_hash"))?,
        seed: seed.ok_or_else(|| bad(1, "missing seed"))?,
        dim: dim.filter(|d| (1..=3).contains(d)).ok_or_else(|| bad(1, "missing or invalid d"))?,
    };
    let mut out = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        let ln = i + 2;
        if line.trim().is_empty() {
            continue;
        }
        let mut tok = line.split_whitespace().peekable();
        let time = match tok.peek() {
            Some(t) if t.starts_with("t=") => {
                let v = t[2..].parse::<f64>().map_err(|_| bad(ln, "bad time stamp"))?;
                tok.next();
                Some(v)
            }
            _ => None,
        };
        let n: usize = tok.next().and_then(|t| t.parse().ok()).ok_or_else(|| bad(ln, "missing point count"))?;
        let coords: Vec<f64> = tok.map(|t| t.parse::<f64>()).collect::<std::result::Result<_, _>>().map_err(|_| bad(ln, "bad coordinate"))?;
        if coords.len() != n * header.dim {
            return Err(bad(ln, "coordinate count does not match point count"));
        }
        let points = coords
            .chunks(header.dim)
            .map(|c| {
                let mut p = [0.0; 3];
                p[..header.dim].copy_from_slice(c);
                p
            })
            .collect();
        out.push(Record { time, points });
    }
    Ok((header, out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::TorusDomain;

    #[test]
    fn round_trip() {
        let dom = TorusDomain::new(2, 3.0).unwrap();
        let m = ModelSpec::ideal_gas(dom, 0.4);
        let a = Configuration::from_points(dom, 0.0, [[0.1234567891, 2.5, 0.0], [1.0, 1.0 / 3.0, 0.0]]);
        let b = Configuration::empty(dom, 0.0);
        let mut buf = Vec::new();
        write_records(&mut buf, &m, 9, [(None, &a), (Some(1.5), &b)]).unwrap();
        let (h, recs) = read_records(&buf[..]).unwrap();
        assert_eq!(h, RecordHeader { model_hash: m.hash(), seed: 9, dim: 2 });
        assert_eq!(recs.len(), 2);
        assert_eq!(recs[1].time, Some(1.5));
        assert!(recs[1].points.is_empty());
        for (p, q) in recs[0].points.iter().zip(a.points()) {
            for k in 0..2 {
                assert!((p[k] - q[k]).abs() <= 1e-8 * q[k].abs().max(1e-300));
            }
        }
        let text = String::from_utf8(buf).unwrap();
        assert!(text.lines().nth(1).unwrap().starts_with("2 1.23456789e-1 2.50000000e0"));
    }

    #[test]
    fn malformed_rejected() {
        assert!(read_records(&b"nope\n"[..]).is_err());
        assert!(read_records(&b"# kgsim-records v1 model_hash=ab seed=1 d=1\n2 0.5\n"[..]).is_err());
    }
}
