//! Flat `key = value` experiment configs with repeated section blocks:
//!
//! ```text
//! horizons = 1024 2048
//! seeds = 1 2 3
//! delta = 0.05
//!
//! [algorithm]
//! name = hu_uniform
//! c = 0
//!
//! [env]
//! kind = piecewise
//! segment = 512 0.2
//! segment = 512 0.8
//! ```
//!
//! Sections may repeat; a sweep runs the full grid
//! algorithms x envs x horizons x seeds.

use crate::env::{DriftShape, EnvKind, EnvSpec};
use crate::error::{Error, Result};
use crate::meta::CertFamily;

/// One parsed `[section]` block: ordered `key = value` pairs.
#[derive(Debug, Clone, Default)]
pub struct Block {
    pub name: String,
    pub entries: Vec<(String, String)>,
}

impl Block {
    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn get_all(&self, key: &str) -> Vec<&str> {
        self.entries
            .iter()
            .filter(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
            .collect()
    }

    fn parse_f64(&self, key: &str) -> Result<Option<f64>> {
        match self.get(key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|_| Error::config(key, format!("bad number '{v}'"))),
        }
    }

    fn parse_usize(&self, key: &str) -> Result<Option<usize>> {
        match self.get(key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|_| Error::config(key, format!("bad integer '{v}'"))),
        }
    }
}

/// Raw parse: a headerless global block followed by named blocks.
pub fn parse_blocks(text: &str) -> Result<(Block, Vec<Block>)> {
    let mut global = Block::default();
    let mut blocks: Vec<Block> = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = match raw.find('#') {
            Some(i) => &raw[..i],
            None => raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix('[') {
            let name = name
                .strip_suffix(']')
                .ok_or_else(|| Error::config("section", format!("line {}: unterminated section", lineno + 1)))?;
            blocks.push(Block {
                name: name.trim().to_string(),
                entries: Vec::new(),
            });
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| {
            Error::config(
                "line",
                format!("line {}: expected 'key = value', got '{line}'", lineno + 1),
            )
        })?;
        let entry = (k.trim().to_string(), v.trim().to_string());
        match blocks.last_mut() {
            Some(b) => b.entries.push(entry),
            None => global.entries.push(entry),
        }
    }
    Ok((global, blocks))
}

/// A forecaster choice by name plus its parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct AlgorithmSpec {
    pub name: String,
    /// Non-stationarity guess for the C-aware algorithms.
    pub c_guess: f64,
    /// Explicit grid size for the standalone swap bases.
    pub n: Option<usize>,
}

pub const ALGORITHM_NAMES: [&str; 8] = [
    "simple_epoch",
    "simple_epoch_pkl",
    "hu_uniform",
    "epoch_cal1",
    "epoch_cal2",
    "epoch_pkl",
    "swap_l2_uniform",
    "swap_kl_uniform",
];

impl AlgorithmSpec {
    pub fn by_name(name: &str) -> Result<Self> {
        if !ALGORITHM_NAMES.contains(&name) {
            return Err(Error::config(
                "algorithm",
                format!(
                    "unknown algorithm '{name}'; valid names: {}",
                    ALGORITHM_NAMES.join(", ")
                ),
            ));
        }
        Ok(AlgorithmSpec {
            name: name.to_string(),
            c_guess: 0.0,
            n: None,
        })
    }

    fn from_block(block: &Block) -> Result<Self> {
        let name = block
            .get("name")
            .ok_or_else(|| Error::config("algorithm", "missing 'name'"))?;
        let mut spec = Self::by_name(name)?;
        if let Some(c) = block.parse_f64("c")? {
            if c < 0.0 {
                return Err(Error::config("c", "guess must be nonnegative"));
            }
            spec.c_guess = c;
        }
        spec.n = block.parse_usize("n")?;
        Ok(spec)
    }

    /// Row label: the name, with non-default parameters appended.
    pub fn label(&self) -> String {
        let mut parts = Vec::new();
        if self.c_guess != 0.0 {
            parts.push(format!("c={}", self.c_guess));
        }
        if let Some(n) = self.n {
            parts.push(format!("n={n}"));
        }
        if parts.is_empty() {
            self.name.clone()
        } else {
            format!("{}({})", self.name, parts.join(","))
        }
    }
}

/// An environment shape that still needs a horizon. Piecewise segments may
/// be given as absolute lengths (single-horizon configs) or fractions.
#[derive(Debug, Clone, PartialEq)]
pub enum EnvTemplate {
    Fixed(EnvKind),
    PiecewiseFrac(Vec<(f64, f64)>),
}

impl EnvTemplate {
    fn from_block(block: &Block) -> Result<Self> {
        let kind = block
            .get("kind")
            .ok_or_else(|| Error::config("env", "missing 'kind'"))?;
        match kind {
            "iid" => {
                let q = block
                    .parse_f64("q")?
                    .ok_or_else(|| Error::config("q", "iid needs q"))?;
                Ok(EnvTemplate::Fixed(EnvKind::Iid { q }))
            }
            "piecewise" => {
                let segs = block.get_all("segment");
                let fracs = block.get_all("segment_frac");
                if !segs.is_empty() && !fracs.is_empty() {
                    return Err(Error::config(
                        "segment",
                        "use either 'segment' or 'segment_frac', not both",
                    ));
                }
                if !fracs.is_empty() {
                    let mut out = Vec::new();
                    for f in fracs {
                        let (a, b) = split_pair(f, "segment_frac")?;
                        out.push((a, b));
                    }
                    let total: f64 = out.iter().map(|s| s.0).sum();
                    if (total - 1.0).abs() > 1e-9 {
                        return Err(Error::config("segment_frac", "fractions must sum to 1"));
                    }
                    return Ok(EnvTemplate::PiecewiseFrac(out));
                }
                if segs.is_empty() {
                    return Err(Error::config("segment", "piecewise needs segments"));
                }
                let mut out = Vec::new();
                for s in segs {
                    let (len, q) = split_pair(s, "segment")?;
                    out.push((len as usize, q));
                }
                Ok(EnvTemplate::Fixed(EnvKind::Piecewise { segments: out }))
            }
            "drift" => {
                let start = block
                    .parse_f64("start")?
                    .ok_or_else(|| Error::config("start", "drift needs start"))?;
                let end = block
                    .parse_f64("end")?
                    .ok_or_else(|| Error::config("end", "drift needs end"))?;
                let shape = match block.get("shape").unwrap_or("linear") {
                    "linear" => DriftShape::Linear,
                    "sin" | "sinusoidal" => DriftShape::Sinusoidal,
                    other => {
                        return Err(Error::config(
                            "shape",
                            format!("unknown drift shape '{other}' (linear, sin)"),
                        ))
                    }
                };
                Ok(EnvTemplate::Fixed(EnvKind::Drift { start, end, shape }))
            }
            "scripted" => {
                let values = block
                    .get("values")
                    .ok_or_else(|| Error::config("values", "scripted needs values"))?;
                let means: Result<Vec<f64>> = values
                    .split_whitespace()
                    .map(|v| {
                        v.parse()
                            .map_err(|_| Error::config("values", format!("bad number '{v}'")))
                    })
                    .collect();
                Ok(EnvTemplate::Fixed(EnvKind::Scripted { means: means? }))
            }
            other => Err(Error::config(
                "kind",
                format!("unknown env kind '{other}' (iid, piecewise, drift, scripted)"),
            )),
        }
    }

    pub fn instantiate(&self, horizon: usize) -> Result<EnvSpec> {
        let kind = match self {
            EnvTemplate::Fixed(kind) => kind.clone(),
            EnvTemplate::PiecewiseFrac(fracs) => {
                let mut segments = Vec::with_capacity(fracs.len());
                let mut used = 0usize;
                for (i, &(f, q)) in fracs.iter().enumerate() {
                    let len = if i + 1 == fracs.len() {
                        horizon - used
                    } else {
                        ((f * horizon as f64).round() as usize).min(horizon - used)
                    };
                    used += len;
                    segments.push((len, q));
                }
                EnvKind::Piecewise { segments }
            }
        };
        let spec = EnvSpec { kind, horizon };
        spec.validate()?;
        Ok(spec)
    }

    pub fn label(&self) -> String {
        match self {
            EnvTemplate::Fixed(kind) => EnvSpec {
                kind: kind.clone(),
                horizon: 0,
            }
            .label(),
            EnvTemplate::PiecewiseFrac(fracs) => {
                let parts: Vec<String> = fracs
                    .iter()
                    .map(|(f, q)| format!("{f}x{q}"))
                    .collect();
                format!("piecewise({})", parts.join(","))
            }
        }
    }
}

fn split_pair(s: &str, field: &str) -> Result<(f64, f64)> {
    let parts: Vec<&str> = s.split_whitespace().collect();
    if parts.len() != 2 {
        return Err(Error::config(field, format!("expected two numbers, got '{s}'")));
    }
    let a = parts[0]
        .parse()
        .map_err(|_| Error::config(field, format!("bad number '{}'", parts[0])))?;
    let b = parts[1]
        .parse()
        .map_err(|_| Error::config(field, format!("bad number '{}'", parts[1])))?;
    Ok((a, b))
}

/// Settings for `seqcal meta`.
#[derive(Debug, Clone)]
pub struct MetaConfig {
    pub family: CertFamily,
    pub base: AlgorithmSpec,
    pub cert_scale: f64,
    pub alpha1: Option<f64>,
    pub alpha2: Option<f64>,
    pub h: Option<f64>,
}

/// A full experiment description.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub algorithms: Vec<AlgorithmSpec>,
    pub envs: Vec<EnvTemplate>,
    pub horizons: Vec<usize>,
    pub seeds: Vec<u64>,
    pub delta: f64,
    pub c_iota: f64,
    pub out: Option<String>,
    pub meta: Option<MetaConfig>,
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let (global, blocks) = parse_blocks(text)?;

        let horizons: Vec<usize> = match global.get("horizons") {
            None => return Err(Error::config("horizons", "missing")),
            Some(v) => v
                .split_whitespace()
                .map(|h| {
                    h.parse()
                        .map_err(|_| Error::config("horizons", format!("bad horizon '{h}'")))
                })
                .collect::<Result<_>>()?,
        };
        if horizons.is_empty() || horizons.iter().any(|&h| h == 0) {
            return Err(Error::config("horizons", "need positive horizons"));
        }
        if horizons.iter().any(|h| !h.is_power_of_two()) {
            return Err(Error::config(
                "horizons",
                "horizons must be powers of two (epoch schedules double)",
            ));
        }

        let seeds: Vec<u64> = match global.get("seeds") {
            None => vec![1],
            Some(v) => v
                .split_whitespace()
                .map(|s| {
                    s.parse()
                        .map_err(|_| Error::config("seeds", format!("bad seed '{s}'")))
                })
                .collect::<Result<_>>()?,
        };
        {
            let mut sorted = seeds.clone();
            sorted.sort_unstable();
            sorted.dedup();
            if sorted.len() != seeds.len() {
                return Err(Error::config("seeds", "seeds must be distinct"));
            }
        }

        let delta = global.parse_f64("delta")?.unwrap_or(0.05);
        if !(0.0 < delta && delta < 1.0) {
            return Err(Error::config("delta", "must lie in (0, 1)"));
        }
        let c_iota = global.parse_f64("c_iota")?.unwrap_or(1.0);
        if c_iota <= 0.0 {
            return Err(Error::config("c_iota", "must be positive"));
        }
        let out = global.get("out").map(str::to_string);

        let mut algorithms = Vec::new();
        let mut envs = Vec::new();
        let mut meta = None;
        for block in &blocks {
            match block.name.as_str() {
                "algorithm" => algorithms.push(AlgorithmSpec::from_block(block)?),
                "env" => envs.push(EnvTemplate::from_block(block)?),
                "meta" => {
                    let family = match block.get("err").unwrap_or("cal1") {
                        "cal1" => CertFamily::Cal1,
                        "cal2" => CertFamily::Cal2,
                        "pkl" => CertFamily::Pkl,
                        other => {
                            return Err(Error::config(
                                "err",
                                format!("unknown error family '{other}' (cal1, cal2, pkl)"),
                            ))
                        }
                    };
                    let base = AlgorithmSpec::by_name(block.get("base").unwrap_or("hu_uniform"))?;
                    meta = Some(MetaConfig {
                        family,
                        base,
                        cert_scale: block.parse_f64("cert_scale")?.unwrap_or(1.0),
                        alpha1: block.parse_f64("alpha1")?,
                        alpha2: block.parse_f64("alpha2")?,
                        h: block.parse_f64("h")?,
                    });
                }
                other => {
                    return Err(Error::config(
                        "section",
                        format!("unknown section '[{other}]' (algorithm, env, meta)"),
                    ))
                }
            }
        }
        if algorithms.is_empty() && meta.is_none() {
            return Err(Error::config("algorithm", "no [algorithm] block"));
        }
        if envs.is_empty() {
            return Err(Error::config("env", "no [env] block"));
        }
        Ok(ExperimentConfig {
            algorithms,
            envs,
            horizons,
            seeds,
            delta,
            c_iota,
            out,
            meta,
        })
    }
}
