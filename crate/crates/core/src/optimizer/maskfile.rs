//! Text format for designed masks.
//!
//! ```text
//! fcfb-mask 1
//! n 1024
//! l 128
//! ls 64
//! center 0
//! active 48
//! tbw 2
//! as_db 1.00000000000000000e1
//! mode two-sided
//! weight 0 8.73212891816005722e-1
//! weight 1 9.99999999999999889e-1
//! ```
//!
//! One `key value` pair per line, keys in this order. Weights are written
//! with 18 significant digits, ordered from the stopband toward the
//! passband. Lines starting with `#` and blank lines are ignored on input.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::fcfb::WeightMask;
use crate::optimizer::FilterMode;

/// Contents of a mask file.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskFile {
    pub n: usize,
    pub l: usize,
    pub ls: usize,
    pub center: usize,
    pub as_db: f64,
    pub mode: FilterMode,
    pub mask: WeightMask,
}

pub fn write_mask_file(m: &MaskFile) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "fcfb-mask 1");
    let _ = writeln!(s, "n {}", m.n);
    let _ = writeln!(s, "l {}", m.l);
    let _ = writeln!(s, "ls {}", m.ls);
    let _ = writeln!(s, "center {}", m.center);
    let _ = writeln!(s, "active {}", m.mask.active);
    let _ = writeln!(s, "tbw {}", m.mask.tbw());
    let _ = writeln!(s, "as_db {:.17e}", m.as_db);
    let _ = writeln!(s, "mode {}", m.mode.name());
    for (i, d) in m.mask.d.iter().enumerate() {
        let _ = writeln!(s, "weight {i} {d:.17e}");
    }
    s
}

fn parse_num<T: std::str::FromStr>(line: usize, key: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| Error::Parse(format!("line {line}: bad value {v:?} for {key}")))
}

pub fn read_mask_file(text: &str) -> Result<MaskFile> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
    match lines.next() {
        Some((_, "fcfb-mask 1")) => {}
        _ => return Err(Error::Parse("missing `fcfb-mask 1` header".into())),
    }
    let keys = ["n", "l", "ls", "center", "active", "tbw", "as_db", "mode"];
    let mut vals: Vec<(usize, String)> = Vec::new();
    for key in keys {
        let (no, line) = lines
            .next()
            .ok_or_else(|| Error::Parse(format!("missing key {key}")))?;
        let (k, v) = line
            .split_once(' ')
            .ok_or_else(|| Error::Parse(format!("line {no}: expected `key value`")))?;
        if k != key {
            return Err(Error::Parse(format!("line {no}: expected key {key}, found {k}")));
        }
        vals.push((no, v.trim().to_string()));
    }
    let get = |i: usize| -> Result<usize> { parse_num(vals[i].0, keys[i], &vals[i].1) };
    let (n, l, ls, center, active, tbw) = (get(0)?, get(1)?, get(2)?, get(3)?, get(4)?, get(5)?);
    let as_db: f64 = parse_num(vals[6].0, "as_db", &vals[6].1)?;
    let mode = match vals[7].1.as_str() {
        "two-sided" => FilterMode::TwoSided,
        "rx-only" => FilterMode::RxOnly,
        "tx-only" => FilterMode::TxOnly,
        other => return Err(Error::Parse(format!("line {}: unknown mode {other:?}", vals[7].0))),
    };
    let mut d = Vec::with_capacity(tbw);
    for (no, line) in lines {
        let parts: Vec<&str> = line.split_whitespace().collect();
        if parts.len() != 3 || parts[0] != "weight" {
            return Err(Error::Parse(format!("line {no}: expected `weight index value`")));
        }
        let idx: usize = parse_num(no, "weight index", parts[1])?;
        if idx != d.len() {
            return Err(Error::Parse(format!("line {no}: weight {idx} out of order")));
        }
        d.push(parse_num::<f64>(no, "weight", parts[2])?);
    }
    if d.len() != tbw {
        return Err(Error::Parse(format!("{} weights listed, tbw is {tbw}", d.len())));
    }
    Ok(MaskFile { n, l, ls, center, as_db, mode, mask: WeightMask::new(l, active, d)? })
}
