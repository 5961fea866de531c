//! `util` line format for fitted utility families.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{AlphaFairness, ConcavePwl, LinearUtility, PairUtility, UtilityFamily};
use crate::error::{Error, Result};
use crate::net::pair_index;

/// Writes a header (`nodes`, `alpha`) followed by one `util` line per pair, 1-based.
pub fn write_utilities(family: &UtilityFamily) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "nodes {}", family.node_count());
    let _ = writeln!(out, "alpha {}", family.alpha().value());
    for ((k, l), u) in family.iter() {
        let _ = write!(out, "util {} {} ", k + 1, l + 1);
        match u {
            PairUtility::Linear(lin) => {
                let _ = writeln!(out, "linear {}", lin.rate());
            }
            PairUtility::Pwl(p) => {
                let _ = write!(out, "pwl");
                for (x, y) in p.breakpoints() {
                    let _ = write!(out, " {x} {y}");
                }
                let _ = writeln!(out, " tail {} floor {}", p.tail_slope(), p.floor());
            }
        }
    }
    out
}

pub fn load_utilities(path: impl AsRef<Path>) -> Result<UtilityFamily> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_utilities(&text, &path.display().to_string())
}

/// Parses [`write_utilities`] output. PWL lines may omit `tail`/`floor`
/// (defaults 1e-6), and `nodes`/`alpha` may be omitted (node count inferred, alpha 2).
pub fn parse_utilities(text: &str, file: &str) -> Result<UtilityFamily> {
    let mut n: Option<usize> = None;
    let mut alpha = AlphaFairness::default();
    let mut entries: Vec<(usize, usize, PairUtility, usize)> = Vec::new();

    for (lineno, raw) in text.lines().enumerate() {
        let lineno = lineno + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let toks: Vec<&str> = line.split_whitespace().collect();
        let num = |s: &str| -> Result<f64> {
            s.parse::<f64>()
                .map_err(|_| Error::parse(file, lineno, format!("`{s}` is not a number")))
        };
        let index = |s: &str| -> Result<usize> {
            match s.parse::<usize>() {
                Ok(i) if i >= 1 => Ok(i - 1),
                _ => Err(Error::parse(file, lineno, format!("`{s}` is not a 1-based node index"))),
            }
        };
        match toks[0] {
            "nodes" if toks.len() == 2 => n = Some(index(toks[1])? + 1),
            "alpha" if toks.len() == 2 => {
                alpha = AlphaFairness::new(num(toks[1])?).map_err(|e| Error::parse(file, lineno, e.to_string()))?
            }
            "util" if toks.len() >= 5 => {
                let k = index(toks[1])?;
                let l = index(toks[2])?;
                if k == l {
                    return Err(Error::parse(file, lineno, "diagonal pairs carry no utility"));
                }
                let u = match toks[3] {
                    "linear" if toks.len() == 5 => LinearUtility::new(num(toks[4])?).map(PairUtility::Linear),
                    "pwl" => {
                        let mut rest = &toks[4..];
                        let mut tail = 1e-6;
                        let mut floor = 1e-6;
                        while rest.len() >= 2 && matches!(rest[rest.len() - 2], "tail" | "floor") {
                            let v = num(rest[rest.len() - 1])?;
                            if rest[rest.len() - 2] == "tail" {
                                tail = v;
                            } else {
                                floor = v;
                            }
                            rest = &rest[..rest.len() - 2];
                        }
                        if rest.is_empty() || rest.len() % 2 != 0 {
                            return Err(Error::parse(file, lineno, "expected `pwl <x1> <y1> [<x2> <y2> ...]`"));
                        }
                        let bps = rest
                            .chunks(2)
                            .map(|c| Ok((num(c[0])?, num(c[1])?)))
                            .collect::<Result<Vec<_>>>()?;
                        ConcavePwl::new(bps, tail, floor).map(PairUtility::Pwl)
                    }
                    _ => return Err(Error::parse(file, lineno, "expected `linear <rate>` or `pwl <x> <y> ...`")),
                }
                .map_err(|e| Error::parse(file, lineno, e.to_string()))?;
                entries.push((k, l, u, lineno));
            }
            _ => {
                return Err(Error::parse(
                    file,
                    lineno,
                    "expected `nodes <n>`, `alpha <a>` or `util <k> <l> ...`",
                ))
            }
        }
    }

    let n = match n {
        Some(n) => n,
        None => entries.iter().map(|(k, l, _, _)| k.max(l) + 1).max().unwrap_or(0),
    };
    if n < 2 {
        return Err(Error::parse(file, 0, "no utilities found"));
    }
    let mut slots: Vec<Option<PairUtility>> = vec![None; n * (n - 1)];
    for (k, l, u, lineno) in entries {
        if k >= n || l >= n {
            return Err(Error::parse(file, lineno, format!("node index exceeds {n}")));
        }
        let slot = &mut slots[pair_index(n, k, l)];
        if slot.is_some() {
            return Err(Error::parse(file, lineno, format!("duplicate utility for ({}, {})", k + 1, l + 1)));
        }
        *slot = Some(u);
    }
    let utilities = slots
        .into_iter()
        .enumerate()
        .map(|(i, u)| {
            u.ok_or_else(|| {
                let (k, l) = crate::net::ie_pairs(n).nth(i).unwrap_or((0, 0));
                Error::parse(file, 0, format!("missing utility for ({}, {})", k + 1, l + 1))
            })
        })
        .collect::<Result<Vec<_>>>()?;
    UtilityFamily::new(n, alpha, utilities)
}
