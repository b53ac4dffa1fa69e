//! Sweep configuration files.
//!
//! One `key = value` per line, `#` starts a comment, lists are written
//! `[a, b, c]`. Missing keys take the defaults of [`SweepConfig::default`].

use std::collections::HashMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::scenario::ScenarioConfig;

/// Curves a sweep can produce.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Scenario {
    /// Saddle-point rate under aligned worst-case interference.
    WorstCase,
    /// Monte-Carlo rate with per-antenna splitting.
    Average,
    /// Monte-Carlo SWIPT harvest (dB) with per-antenna splitting.
    Swipt,
    /// Monte-Carlo rate of the combine-then-split receiver.
    Structure2,
    /// Monte-Carlo classical harvest (dB) with per-antenna splitting.
    AverageEnergy,
    /// Monte-Carlo classical harvest (dB) of the combine-then-split receiver.
    Structure2Energy,
    /// Monte-Carlo SWIPT harvest (dB) of the combine-then-split receiver.
    Structure2SwiptEnergy,
}

impl Scenario {
    pub const ALL: [Scenario; 7] = [
        Scenario::WorstCase,
        Scenario::Average,
        Scenario::Swipt,
        Scenario::Structure2,
        Scenario::AverageEnergy,
        Scenario::Structure2Energy,
        Scenario::Structure2SwiptEnergy,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            Scenario::WorstCase => "worst-case",
            Scenario::Average => "average",
            Scenario::Swipt => "swipt",
            Scenario::Structure2 => "structure2",
            Scenario::AverageEnergy => "average-energy",
            Scenario::Structure2Energy => "structure2-energy",
            Scenario::Structure2SwiptEnergy => "structure2-swipt-energy",
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Scenario {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Scenario::ALL
            .into_iter()
            .find(|sc| sc.tag() == s)
            .ok_or_else(|| {
                let known: Vec<&str> = Scenario::ALL.iter().map(|s| s.tag()).collect();
                format!("unknown scenario `{s}` (known: {})", known.join(", "))
            })
    }
}

/// A link configuration plus the grid to sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    /// Link parameters. Its `psi` and `pb` are overwritten per sweep point.
    pub base: ScenarioConfig,
    /// Uniform split ratios to sweep.
    pub psi: Vec<f64>,
    /// Values of `P_B / P`.
    pub ratio_grid: Vec<f64>,
    pub scenarios: Vec<Scenario>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            base: ScenarioConfig::default(),
            psi: vec![0.3, 0.6, 0.9],
            ratio_grid: (0..=14).map(f64::from).collect(),
            scenarios: vec![
                Scenario::WorstCase,
                Scenario::Average,
                Scenario::Swipt,
                Scenario::Structure2,
            ],
        }
    }
}

impl SweepConfig {
    /// Link configuration for one sweep point.
    pub fn point(&self, psi: f64, ratio: f64) -> ScenarioConfig {
        let pb = ratio * self.base.p;
        self.base.clone().with_uniform_psi(psi).with_bs_power(pb)
    }
}

const KEYS: [&str; 13] = [
    "k",
    "m",
    "n",
    "sigma_p2p",
    "sigma_bs",
    "psi",
    "sigma2_w",
    "sigma2_n",
    "p",
    "ratio_grid",
    "scenarios",
    "trials",
    "seed",
];

struct Entry<'a> {
    line: usize,
    key: &'a str,
    value: &'a str,
}

impl Entry<'_> {
    fn err(&self, message: impl Into<String>) -> Error {
        Error::Parse {
            line: self.line,
            field: self.key.to_string(),
            message: message.into(),
        }
    }

    /// Items of a bracketed list; a bare value is a one-element list.
    fn items(&self) -> Result<Vec<&str>> {
        let v = self.value;
        let inner = match (v.strip_prefix('['), v.ends_with(']')) {
            (Some(rest), true) => &rest[..rest.len() - 1],
            (None, false) => return Ok(vec![v]),
            _ => return Err(self.err("unbalanced brackets")),
        };
        if inner.trim().is_empty() {
            return Ok(Vec::new());
        }
        inner
            .split(',')
            .map(|s| {
                let s = s.trim();
                if s.is_empty() {
                    Err(self.err("empty list item"))
                } else {
                    Ok(s)
                }
            })
            .collect()
    }

    fn parse<T: FromStr>(&self, s: &str) -> Result<T>
    where
        T::Err: fmt::Display,
    {
        s.parse::<T>()
            .map_err(|e| self.err(format!("cannot parse `{s}`: {e}")))
    }

    fn scalar<T: FromStr>(&self) -> Result<T>
    where
        T::Err: fmt::Display,
    {
        if self.value.starts_with('[') {
            return Err(self.err("expected a single value, not a list"));
        }
        self.parse(self.value)
    }

    fn reals(&self) -> Result<Vec<f64>> {
        let xs = self
            .items()?
            .into_iter()
            .map(|s| self.parse::<f64>(s))
            .collect::<Result<Vec<f64>>>()?;
        if xs.iter().any(|x| !x.is_finite()) {
            return Err(self.err("values must be finite"));
        }
        Ok(xs)
    }

    fn positive_real(&self) -> Result<f64> {
        let x: f64 = self.scalar()?;
        if !(x > 0.0) || !x.is_finite() {
            return Err(self.err(format!("must be positive and finite, got {x}")));
        }
        Ok(x)
    }

    fn count(&self) -> Result<usize> {
        let x: usize = self.scalar()?;
        if x == 0 {
            return Err(self.err("must be at least 1"));
        }
        Ok(x)
    }
}

/// Parses configuration text.
pub fn parse_config_str(text: &str) -> Result<SweepConfig> {
    let mut entries: Vec<Entry> = Vec::new();
    let mut seen: HashMap<&str, usize> = HashMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content.split_once('=').ok_or_else(|| Error::Parse {
            line,
            field: content.to_string(),
            message: "expected `key = value`".into(),
        })?;
        let (key, value) = (key.trim(), value.trim());
        let entry = Entry { line, key, value };
        if !KEYS.contains(&key) {
            return Err(entry.err("unknown key"));
        }
        if let Some(first) = seen.insert(key, line) {
            return Err(entry.err(format!("duplicate key, first set on line {first}")));
        }
        if value.is_empty() {
            return Err(entry.err("missing value"));
        }
        entries.push(entry);
    }

    let mut cfg = SweepConfig::default();
    let b = &mut cfg.base;
    for e in &entries {
        match e.key {
            "k" => b.k = e.count()?,
            "m" => b.m = e.count()?,
            "n" => b.n = e.count()?,
            "sigma_p2p" => b.sigma_p2p = e.reals()?,
            "sigma_bs" => b.sigma_bs = e.reals()?,
            "sigma2_w" => b.sigma2_w = e.positive_real()?,
            "sigma2_n" => b.sigma2_n = e.positive_real()?,
            "p" => {
                let p: f64 = e.scalar()?;
                if !(p >= 0.0) || !p.is_finite() {
                    return Err(e.err(format!("must be finite and >= 0, got {p}")));
                }
                b.p = p;
            }
            "trials" => b.trials = e.count()?,
            "seed" => b.seed = e.scalar()?,
            "psi" => {
                let psi = e.reals()?;
                if psi.is_empty() {
                    return Err(e.err("need at least one value"));
                }
                if let Some(bad) = psi.iter().find(|x| !(0.0..=1.0).contains(*x)) {
                    return Err(e.err(format!("{bad} is outside [0, 1]")));
                }
                cfg.psi = psi;
            }
            "ratio_grid" => {
                let grid = e.reals()?;
                if grid.is_empty() {
                    return Err(e.err("need at least one value"));
                }
                if let Some(bad) = grid.iter().find(|x| **x < 0.0) {
                    return Err(e.err(format!("ratio {bad} is negative")));
                }
                cfg.ratio_grid = grid;
            }
            "scenarios" => {
                let list = e
                    .items()?
                    .into_iter()
                    .map(|s| s.parse::<Scenario>().map_err(|m| e.err(m)))
                    .collect::<Result<Vec<_>>>()?;
                if list.is_empty() {
                    return Err(e.err("need at least one scenario"));
                }
                cfg.scenarios = list;
            }
            _ => unreachable!("keys are checked above"),
        }
    }
    dedup(&mut cfg.psi);
    dedup(&mut cfg.ratio_grid);
    dedup(&mut cfg.scenarios);

    // cross-field checks, reported against the line of the first shape key
    let line_of = |keys: &[&str]| {
        keys.iter()
            .find_map(|k| seen.get(k).copied())
            .unwrap_or(0)
    };
    let shape_keys = ["k", "m", "n", "sigma_p2p", "sigma_bs"];
    for &psi in &cfg.psi {
        cfg.point(psi, 0.0).validate().map_err(|err| Error::Parse {
            line: line_of(&shape_keys),
            field: "k/m/n/sigma_p2p/sigma_bs".into(),
            message: err.to_string(),
        })?;
    }
    Ok(cfg)
}

/// Reads and parses a configuration file.
pub fn parse_config(path: &Path) -> Result<SweepConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    parse_config_str(&text)
}

/// Drops repeats, keeping first occurrences in order.
fn dedup<T: PartialEq + Copy>(xs: &mut Vec<T>) {
    let mut out: Vec<T> = Vec::with_capacity(xs.len());
    for &x in xs.iter() {
        if !out.contains(&x) {
            out.push(x);
        }
    }
    *xs = out;
}
