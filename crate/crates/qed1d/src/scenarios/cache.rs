//! On-disk cache of extracted mode sets keyed by the configuration hash.
//!
//! The format is line-oriented text with floats at 17 significant digits, so
//! a cache round trip reproduces every f64 bit for bit and warm runs emit
//! byte-identical outputs to cold runs.

use std::fs;
use std::path::{Path, PathBuf};

use crate::modes::{DegeneracyLabel, Direction, DiscreteMode};
use crate::C64;

use super::outputs::fmt_f64;
use super::ScenarioError;

const MAGIC: &str = "qed1d-modes v1";

pub fn cache_path(dir: &Path, key: u64) -> PathBuf {
    dir.join(format!("modes-{key:016x}.txt"))
}

pub fn save_modes(
    path: &Path,
    n_nodes: usize,
    n_raw: usize,
    modes: &[DiscreteMode],
) -> Result<(), ScenarioError> {
    let mut text = String::new();
    text.push_str(&format!(
        "{MAGIC} n_modes={} n_nodes={n_nodes} n_raw={n_raw}\n",
        modes.len()
    ));
    for m in modes {
        let volume = m.volume.expect("cache only stores coarse-grained modes");
        match m.label {
            DegeneracyLabel::Ba { direction } => {
                let d = match direction {
                    Direction::Plus => "+",
                    Direction::Minus => "-",
                };
                text.push_str(&format!("ba {} {} {}\n", fmt_f64(m.omega), d, fmt_f64(volume)));
            }
            DegeneracyLabel::Ma { x_source, node } => {
                text.push_str(&format!(
                    "ma {} {node} {} {}\n",
                    fmt_f64(m.omega),
                    fmt_f64(x_source),
                    fmt_f64(volume)
                ));
            }
        }
        let mut line = String::with_capacity(m.field.len() * 48);
        for (i, v) in m.field.iter().enumerate() {
            if i > 0 {
                line.push(' ');
            }
            line.push_str(&fmt_f64(v.re));
            line.push(' ');
            line.push_str(&fmt_f64(v.im));
        }
        line.push('\n');
        text.push_str(&line);
    }
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    fs::write(path, text)?;
    Ok(())
}

/// Load a cached mode set. Returns Ok(None) when the file is absent or was
/// written for a different mesh size, so callers fall back to extraction.
pub fn load_modes(
    path: &Path,
    n_nodes: usize,
) -> Result<Option<(Vec<DiscreteMode>, usize)>, ScenarioError> {
    let text = match fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
        Err(e) => return Err(e.into()),
    };
    let mut lines = text.lines();
    let bad = |msg: &str| ScenarioError::Config(format!("mode cache {}: {msg}", path.display()));
    let header = lines.next().ok_or_else(|| bad("empty file"))?;
    let mut n_modes = None;
    let mut cached_nodes = None;
    let mut n_raw = None;
    if !header.starts_with(MAGIC) {
        return Ok(None);
    }
    for part in header.split_whitespace() {
        if let Some(v) = part.strip_prefix("n_modes=") {
            n_modes = v.parse::<usize>().ok();
        } else if let Some(v) = part.strip_prefix("n_nodes=") {
            cached_nodes = v.parse::<usize>().ok();
        } else if let Some(v) = part.strip_prefix("n_raw=") {
            n_raw = v.parse::<usize>().ok();
        }
    }
    let (Some(n_modes), Some(cached_nodes), Some(n_raw)) = (n_modes, cached_nodes, n_raw) else {
        return Err(bad("malformed header"));
    };
    if cached_nodes != n_nodes {
        return Ok(None);
    }

    let mut modes = Vec::with_capacity(n_modes);
    for _ in 0..n_modes {
        let meta = lines.next().ok_or_else(|| bad("truncated metadata"))?;
        let fields: Vec<&str> = meta.split_whitespace().collect();
        let parse = |s: &str| -> Result<f64, ScenarioError> {
            s.parse::<f64>().map_err(|_| bad("bad float"))
        };
        let (omega, label, volume) = match fields.as_slice() {
            ["ba", omega, dir, volume] => {
                let direction = match *dir {
                    "+" => Direction::Plus,
                    "-" => Direction::Minus,
                    _ => return Err(bad("bad direction")),
                };
                (parse(omega)?, DegeneracyLabel::Ba { direction }, parse(volume)?)
            }
            ["ma", omega, node, x_source, volume] => {
                let node: usize = node.parse().map_err(|_| bad("bad node index"))?;
                (
                    parse(omega)?,
                    DegeneracyLabel::Ma {
                        x_source: parse(x_source)?,
                        node,
                    },
                    parse(volume)?,
                )
            }
            _ => return Err(bad("bad metadata line")),
        };
        let data = lines.next().ok_or_else(|| bad("truncated field data"))?;
        let mut field = Vec::with_capacity(n_nodes);
        let mut it = data.split_whitespace();
        loop {
            let Some(re) = it.next() else { break };
            let im = it.next().ok_or_else(|| bad("odd float count"))?;
            field.push(C64::new(parse(re)?, parse(im)?));
        }
        if field.len() != n_nodes {
            return Err(bad("field length mismatch"));
        }
        modes.push(DiscreteMode {
            omega,
            label,
            field,
            volume: Some(volume),
        });
    }
    Ok(Some((modes, n_raw)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cache_round_trip_is_bit_exact() {
        let modes = vec![
            DiscreteMode {
                omega: 49.987_654_321_012_345,
                label: DegeneracyLabel::Ba {
                    direction: Direction::Minus,
                },
                field: vec![C64::new(0.1, -0.2), C64::new(1.0 / 3.0, 2.0f64.sqrt())],
                volume: Some(0.015625),
            },
            DiscreteMode {
                omega: 50.25,
                label: DegeneracyLabel::Ma {
                    x_source: 0.062_831_853_071_795_86,
                    node: 1,
                },
                field: vec![C64::new(-3.5e-300, 4.0e222), C64::new(0.0, -0.0)],
                volume: Some(1.9531e-6),
            },
        ];
        let dir = std::env::temp_dir().join(format!("qed1d-cache-{}", std::process::id()));
        let path = cache_path(&dir, 0xdead_beef_1234_5678);
        save_modes(&path, 2, 7, &modes).unwrap();
        let (back, n_raw) = load_modes(&path, 2).unwrap().unwrap();
        assert_eq!(n_raw, 7);
        assert_eq!(back.len(), modes.len());
        for (a, b) in modes.iter().zip(&back) {
            assert_eq!(a.omega.to_bits(), b.omega.to_bits());
            assert_eq!(a.label, b.label);
            assert_eq!(a.volume.unwrap().to_bits(), b.volume.unwrap().to_bits());
            for (x, y) in a.field.iter().zip(&b.field) {
                assert_eq!(x.re.to_bits(), y.re.to_bits());
                assert_eq!(x.im.to_bits(), y.im.to_bits());
            }
        }
        // Wrong mesh size is a miss, not an error.
        assert!(load_modes(&path, 3).unwrap().is_none());
        std::fs::remove_dir_all(&dir).ok();
    }
}
