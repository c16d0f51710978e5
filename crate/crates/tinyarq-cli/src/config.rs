//! Flat `key = value` experiment files and the typed experiment description
//! built from them.
//!
//! One key per line; `#` starts a comment; lists are comma-separated.
//! Command-line flags use the same key names and override file entries.
//!
//! | key            | meaning                                              | default                |
//! |----------------|------------------------------------------------------|------------------------|
//! | `protocol`     | subset of `uncoded, harq, cf, coded`                 | all four               |
//! | `eps`          | strictly increasing erasure rates in `[0, 1)`        | `0.1,0.2,0.3,0.4,0.5`  |
//! | `r`            | burst parameters in `(0, 1]` and/or `memoryless`     | `memoryless`           |
//! | `k`, `T`       | RTT and timeout lists (every combination is used)    | `5`, `15`              |
//! | `pairs`        | explicit `k:T` pairs, replacing `k` × `T`            | unset                  |
//! | `alpha`        | Chase-combining α: a number or `10eps`               | `10eps`                |
//! | `units`        | simulated units per grid point                       | `100000`               |
//! | `seed`         | base seed                                            | `1`                    |
//! | `replications` | simulation replications                              | `8`                    |
//! | `no-sim`       | analysis only                                        | `false`                |
//! | `out`          | output directory                                     | `out`                  |
//! | `plots`        | also write SVG plots                                 | `false`                |
//! | `ccdf`         | sweep only: also write a CCDF file per simulated row | `false`                |
//! | `timing`       | fill the `wallclock_ms` column                       | `false`                |

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use tinyarq::channel::{composite, ge_from_target_erasure, memoryless, CompositeChannel};
use tinyarq::protocols::Protocol;

use crate::CliError;

/// Every key understood by [`SweepSpec::from_map`].
pub const KEYS: [&str; 15] = [
    "protocol",
    "eps",
    "r",
    "k",
    "T",
    "pairs",
    "alpha",
    "units",
    "seed",
    "replications",
    "no-sim",
    "out",
    "plots",
    "ccdf",
    "timing",
];

/// Parse `key = value` text.
pub fn parse_config(text: &str) -> Result<BTreeMap<String, String>, CliError> {
    let mut map = BTreeMap::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            CliError::Config(format!(
                "line {}: expected `key = value`, got `{line}`",
                n + 1
            ))
        })?;
        let key = key.trim();
        if !KEYS.contains(&key) {
            return Err(CliError::Config(format!(
                "line {}: unknown key `{key}`",
                n + 1
            )));
        }
        map.insert(key.to_string(), value.trim().to_string());
    }
    Ok(map)
}

/// Read and parse a config file.
pub fn read_config(path: &Path) -> Result<BTreeMap<String, String>, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    parse_config(&text)
}

/// Channel family of a grid point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ChannelKind {
    /// Independent erasures.
    Memoryless,
    /// Gilbert-Elliott with `ε_G = 0`, `ε_B = 1` and the given `r`.
    Burst(f64),
}

impl ChannelKind {
    /// Composite channel with stationary erasure rate `eps` in both directions.
    pub fn channel(&self, eps: f64) -> Result<CompositeChannel, CliError> {
        match *self {
            ChannelKind::Memoryless => memoryless(eps).map_err(|e| CliError::Config(e.to_string())),
            ChannelKind::Burst(r) => ge_from_target_erasure(r, 0.0, 1.0, eps)
                .map(|ge| composite(&ge))
                .map_err(|e| CliError::Config(e.to_string())),
        }
    }

    /// Label used in CSV files and file names.
    pub fn label(&self) -> String {
        match self {
            ChannelKind::Memoryless => "memoryless".to_string(),
            ChannelKind::Burst(r) => crate::format::float(*r),
        }
    }
}

impl fmt::Display for ChannelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

/// Chase-combining parameter rule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AlphaRule {
    /// The same α everywhere.
    Fixed(f64),
    /// `α = 10ε`.
    TenEps,
}

impl AlphaRule {
    /// α at erasure rate `eps` (0 is replaced by a tiny positive value so the
    /// schedule stays valid; it then erases nothing).
    pub fn alpha(&self, eps: f64) -> f64 {
        match *self {
            AlphaRule::Fixed(a) => a,
            AlphaRule::TenEps => (10.0 * eps).max(f64::MIN_POSITIVE),
        }
    }
}

/// Simulation settings of an experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SimSettings {
    /// Units per grid point.
    pub units: u64,
    /// Base seed.
    pub seed: u64,
    /// Replications.
    pub replications: u32,
}

/// A full experiment description.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    /// Protocols, in canonical order.
    pub protocols: Vec<Protocol>,
    /// Erasure rates.
    pub eps_values: Vec<f64>,
    /// Channel families.
    pub channels: Vec<ChannelKind>,
    /// `(k, T)` pairs.
    pub kt_pairs: Vec<(u32, u32)>,
    /// Chase-combining parameter.
    pub alpha: AlphaRule,
    /// Simulation settings; `None` for analysis only.
    pub sim: Option<SimSettings>,
    /// Output directory.
    pub out: PathBuf,
    /// Write SVG plots.
    pub plots: bool,
    /// Write a CCDF file per simulated sweep row.
    pub ccdf: bool,
    /// Fill the wall-clock column.
    pub timing: bool,
}

fn list<T, F>(key: &str, value: &str, parse: F) -> Result<Vec<T>, CliError>
where
    F: Fn(&str) -> Option<T>,
{
    let items: Vec<&str> = value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .collect();
    if items.is_empty() {
        return Err(CliError::Config(format!("`{key}` is empty")));
    }
    items
        .into_iter()
        .map(|s| parse(s).ok_or_else(|| CliError::Config(format!("`{key}`: cannot parse `{s}`"))))
        .collect()
}

fn flag(key: &str, value: &str) -> Result<bool, CliError> {
    match value {
        "true" | "yes" | "1" | "" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(CliError::Config(format!(
            "`{key}`: expected true/false, got `{value}`"
        ))),
    }
}

impl SweepSpec {
    /// Build and validate from a key/value map (file entries merged with flags).
    pub fn from_map(map: &BTreeMap<String, String>) -> Result<Self, CliError> {
        for key in map.keys() {
            if !KEYS.contains(&key.as_str()) {
                return Err(CliError::Config(format!("unknown key `{key}`")));
            }
        }
        let get = |k: &str| map.get(k).map(String::as_str);
        let mut protocols = match get("protocol") {
            Some(v) => list("protocol", v, Protocol::from_name)?,
            None => Protocol::ALL.to_vec(),
        };
        protocols.sort();
        protocols.dedup();
        let eps_values = list("eps", get("eps").unwrap_or("0.1,0.2,0.3,0.4,0.5"), |s| {
            s.parse::<f64>().ok()
        })?;
        let channels = list("r", get("r").unwrap_or("memoryless"), |s| match s {
            "memoryless" => Some(ChannelKind::Memoryless),
            _ => s.parse::<f64>().ok().map(ChannelKind::Burst),
        })?;
        let kt_pairs = match get("pairs") {
            Some(v) => list("pairs", v, |s| {
                let (k, t) = s.split_once(':')?;
                Some((k.trim().parse().ok()?, t.trim().parse().ok()?))
            })?,
            None => {
                let ks = list("k", get("k").unwrap_or("5"), |s| s.parse::<u32>().ok())?;
                let ts = list("T", get("T").unwrap_or("15"), |s| s.parse::<u32>().ok())?;
                ks.iter()
                    .flat_map(|&k| ts.iter().map(move |&t| (k, t)))
                    .collect()
            }
        };
        let alpha = match get("alpha").unwrap_or("10eps") {
            "10eps" | "10*eps" | "10×eps" => AlphaRule::TenEps,
            s => AlphaRule::Fixed(s.parse().map_err(|_| {
                CliError::Config(format!("`alpha`: expected a number or `10eps`, got `{s}`"))
            })?),
        };
        let no_sim = get("no-sim")
            .map(|v| flag("no-sim", v))
            .transpose()?
            .unwrap_or(false);
        let number = |key: &str, default: &str| -> Result<u64, CliError> {
            let v = get(key).unwrap_or(default);
            v.parse()
                .map_err(|_| CliError::Config(format!("`{key}`: cannot parse `{v}`")))
        };
        let sim = if no_sim {
            None
        } else {
            Some(SimSettings {
                units: number("units", "100000")?,
                seed: number("seed", "1")?,
                replications: u32::try_from(number("replications", "8")?)
                    .map_err(|_| CliError::Config("`replications` too large".into()))?,
            })
        };
        let bool_key = |key: &str| -> Result<bool, CliError> {
            get(key)
                .map(|v| flag(key, v))
                .transpose()
                .map(|b| b.unwrap_or(false))
        };
        let spec = SweepSpec {
            protocols,
            eps_values,
            channels,
            kt_pairs,
            alpha,
            sim,
            out: PathBuf::from(get("out").unwrap_or("out")),
            plots: bool_key("plots")?,
            ccdf: bool_key("ccdf")?,
            timing: bool_key("timing")?,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Check the grid invariants.
    pub fn validate(&self) -> Result<(), CliError> {
        if self.protocols.is_empty() {
            return Err(CliError::Config("no protocol selected".into()));
        }
        for w in self.eps_values.windows(2) {
            if !(w[0] < w[1]) {
                return Err(CliError::Config("`eps` must be strictly increasing".into()));
            }
        }
        if let Some(&e) = self.eps_values.iter().find(|e| !(0.0..1.0).contains(*e)) {
            return Err(CliError::Config(format!("`eps` value {e} outside [0, 1)")));
        }
        for c in &self.channels {
            if let ChannelKind::Burst(r) = c {
                if !(*r > 0.0 && *r <= 1.0) {
                    return Err(CliError::Config(format!("`r` value {r} outside (0, 1]")));
                }
            }
        }
        for &(k, t) in &self.kt_pairs {
            if k == 0 {
                return Err(CliError::Config("`k` must be positive".into()));
            }
            for p in &self.protocols {
                if t < p.min_timeout(k) {
                    return Err(CliError::Config(format!(
                        "{p} needs T ≥ {} for k = {k}, got T = {t}",
                        p.min_timeout(k)
                    )));
                }
            }
        }
        if let AlphaRule::Fixed(a) = self.alpha {
            if !(a > 0.0) {
                return Err(CliError::Config(format!(
                    "`alpha` must be positive, got {a}"
                )));
            }
        }
        if let Some(s) = &self.sim {
            if s.units < tinyarq::sim::MIN_UNITS {
                return Err(CliError::Config(format!(
                    "`units` must be at least {}",
                    tinyarq::sim::MIN_UNITS
                )));
            }
            if s.replications == 0 || u64::from(s.replications) > s.units {
                return Err(CliError::Config(
                    "`replications` must lie in [1, units]".into(),
                ));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_and_lists() {
        let map = parse_config(
            "# grid\neps = 0.1, 0.2 # two points\nr = memoryless,0.3\n\nno-sim = true\n",
        )
        .unwrap();
        let spec = SweepSpec::from_map(&map).unwrap();
        assert_eq!(spec.eps_values, vec![0.1, 0.2]);
        assert_eq!(
            spec.channels,
            vec![ChannelKind::Memoryless, ChannelKind::Burst(0.3)]
        );
        assert_eq!(spec.sim, None);
        assert_eq!(spec.protocols, Protocol::ALL.to_vec());
    }

    #[test]
    fn rejects_bad_input() {
        assert!(parse_config("eps 0.1").is_err());
        assert!(parse_config("colour = red").is_err());
        let mut map = BTreeMap::new();
        map.insert("eps".to_string(), "0.2,0.1".to_string());
        assert!(SweepSpec::from_map(&map).is_err());
        map.insert("eps".to_string(), "0.1".to_string());
        map.insert("pairs".to_string(), "5:5".to_string());
        map.insert("protocol".to_string(), "cf".to_string());
        assert!(SweepSpec::from_map(&map).is_err());
    }
}
