//! Scenario CSV.
//!
//! ```text
//! # gridrisk-scenarios v1
//! # n=1000 horizon=12 seed=7
//! # zones=1:I;2:II;3:III
//! # config=<hash>                     (optional)
//! scenario,t,load_1,wind_1,speed_1,load_2,wind_2,speed_2,...
//! 0,1,48.2,3.1,4.9,...
//! ```
//!
//! `t` is 1-based. Loads and wind are zonal MW, speeds m/s. Floats use the
//! shortest representation that parses back to the same value.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use super::ScenarioSet;
use crate::error::{Error, Result};

const MAGIC: &str = "# gridrisk-scenarios v1";

pub fn write_scenarios_csv(set: &ScenarioSet, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    write_to(set, &mut w).map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

fn write_to(set: &ScenarioSet, w: &mut impl Write) -> std::io::Result<()> {
    writeln!(w, "{MAGIC}")?;
    writeln!(w, "# n={} horizon={} seed={}", set.n, set.horizon, set.seed)?;
    let zones: Vec<String> =
        set.zone_ids.iter().zip(&set.zone_names).map(|(id, name)| format!("{id}:{name}")).collect();
    writeln!(w, "# zones={}", zones.join(";"))?;
    if let Some(h) = &set.config_hash {
        writeln!(w, "# config={h}")?;
    }
    let mut header = vec!["scenario".to_string(), "t".to_string()];
    for id in &set.zone_ids {
        header.extend([format!("load_{id}"), format!("wind_{id}"), format!("speed_{id}")]);
    }
    writeln!(w, "{}", header.join(","))?;
    let z = set.num_zones();
    let mut line = String::new();
    for n in 0..set.n {
        for t in 0..set.horizon {
            line.clear();
            line.push_str(&format!("{},{}", n, t + 1));
            for k in 0..z {
                line.push_str(&format!(",{},{},{}", set.load(n, t, k), set.wind(n, t, k), set.speed(n, t, k)));
            }
            writeln!(w, "{line}")?;
        }
    }
    Ok(())
}

pub fn read_scenarios_csv(path: &Path) -> Result<ScenarioSet> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = BufReader::new(file);
    let bad = |d: String| Error::format("scenario file", d);

    let mut n = None;
    let mut horizon = None;
    let mut seed = None;
    let mut zone_ids = Vec::new();
    let mut zone_names = Vec::new();
    let mut config_hash = None;
    let mut zonal = Vec::new();
    let mut speeds = Vec::new();
    let mut saw_header = false;
    let mut rows = 0usize;

    for (ln, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if ln == 0 {
            if line.trim() != MAGIC {
                return Err(bad("missing header line".into()));
            }
            continue;
        }
        if let Some(meta) = line.strip_prefix("# ") {
            if let Some(z) = meta.strip_prefix("zones=") {
                for part in z.split(';').filter(|p| !p.is_empty()) {
                    let (id, name) = part.split_once(':').ok_or_else(|| bad(format!("zone entry `{part}`")))?;
                    zone_ids.push(id.parse().map_err(|_| bad(format!("zone id `{id}`")))?);
                    zone_names.push(name.to_string());
                }
            } else if let Some(h) = meta.strip_prefix("config=") {
                config_hash = Some(h.to_string());
            } else {
                for kv in meta.split_whitespace() {
                    let (k, v) = kv.split_once('=').ok_or_else(|| bad(format!("meta `{kv}`")))?;
                    let parsed = || v.parse::<u64>().map_err(|_| bad(format!("meta `{kv}`")));
                    match k {
                        "n" => n = Some(parsed()? as usize),
                        "horizon" => horizon = Some(parsed()? as usize),
                        "seed" => seed = Some(parsed()?),
                        _ => return Err(bad(format!("unknown meta key `{k}`"))),
                    }
                }
            }
            continue;
        }
        if !saw_header {
            saw_header = true;
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 2 + 3 * zone_ids.len() {
            return Err(bad(format!("line {} has {} columns", ln + 1, cols.len())));
        }
        let num = |s: &str| s.parse::<f64>().map_err(|_| bad(format!("line {}: `{s}`", ln + 1)));
        for k in 0..zone_ids.len() {
            zonal.push(num(cols[2 + 3 * k])?);
            zonal.push(num(cols[3 + 3 * k])?);
            speeds.push(num(cols[4 + 3 * k])?);
        }
        rows += 1;
    }
    let (n, horizon, seed) = match (n, horizon, seed) {
        (Some(a), Some(b), Some(c)) => (a, b, c),
        _ => return Err(bad("missing n/horizon/seed".into())),
    };
    if rows != n * horizon {
        return Err(bad(format!("expected {} rows, found {rows}", n * horizon)));
    }
    Ok(ScenarioSet { n, horizon, zone_ids, zone_names, seed, zonal, speeds, config_hash })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::fixtures;
    use crate::scenario::{generate_scenarios, ScenarioConfig};

    #[test]
    fn csv_round_trip_is_exact() {
        let g = fixtures::six_bus();
        let (mut set, _) = generate_scenarios(&g, &ScenarioConfig::for_grid(&g), 4, 3, 5).unwrap();
        set.config_hash = Some("abc".into());
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.csv");
        write_scenarios_csv(&set, &p).unwrap();
        assert_eq!(read_scenarios_csv(&p).unwrap(), set);
    }
}
