//! Layered settings: command-line flags over environment over a key=value
//! config file over per-command defaults.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use dirmorph::flat_morph::ShockConvention;
use dirmorph::image::StructuringElement;
use dirmorph::sphere::UnitVector3;

pub const KEYS: [&str; 8] = [
    "mu",
    "se",
    "t",
    "threshold",
    "axial",
    "convention",
    "seed",
    "threads",
];

/// A failure carrying the process exit code: 1 for unreadable or malformed
/// input, 2 for invalid parameters.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub fn input(message: impl fmt::Display) -> Self {
        Self {
            code: 1,
            message: message.to_string(),
        }
    }

    pub fn param(message: impl fmt::Display) -> Self {
        Self {
            code: 2,
            message: message.to_string(),
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

/// Parses `key = value` lines; `#` starts a comment.
pub fn parse_config(text: &str) -> Result<BTreeMap<String, String>, Failure> {
    let mut out = BTreeMap::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Failure::param(format!("config line {}: expected key=value", n + 1)))?;
        let k = k.trim();
        if !KEYS.contains(&k) {
            return Err(Failure::param(format!(
                "config line {}: unknown key {k:?}",
                n + 1
            )));
        }
        out.insert(k.to_string(), v.trim().to_string());
    }
    Ok(out)
}

pub fn read_config(path: &Path) -> Result<BTreeMap<String, String>, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::param(format!("cannot read config {}: {e}", path.display())))?;
    parse_config(&text)
}

#[derive(Clone, Debug, Default)]
pub struct Settings {
    values: BTreeMap<&'static str, String>,
}

impl Settings {
    pub fn with_defaults(defaults: &[(&'static str, &str)]) -> Self {
        let mut s = Self::default();
        for &(k, v) in defaults {
            s.values.insert(k, v.to_string());
        }
        s
    }

    /// Overrides known keys with the given values.
    pub fn layer<'a>(&mut self, values: impl IntoIterator<Item = (&'a str, Option<String>)>) {
        for (k, v) in values {
            if let (Some(key), Some(v)) = (KEYS.iter().find(|&&x| x == k), v) {
                self.values.insert(key, v);
            }
        }
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    pub fn render(&self) -> String {
        KEYS.iter()
            .filter_map(|k| self.values.get(k).map(|v| format!("{k}={v}\n")))
            .collect()
    }

    fn get(&self, key: &str) -> Result<&str, Failure> {
        self.raw(key)
            .ok_or_else(|| Failure::param(format!("missing setting {key}")))
    }

    pub fn mu(&self) -> Result<MuChoice, Failure> {
        parse_mu(self.get("mu")?)
    }

    pub fn f64(&self, key: &str) -> Result<f64, Failure> {
        let v = self.get(key)?;
        v.parse()
            .map_err(|_| Failure::param(format!("{key}: not a number: {v:?}")))
    }

    pub fn u64(&self, key: &str) -> Result<u64, Failure> {
        let v = self.get(key)?;
        v.parse()
            .map_err(|_| Failure::param(format!("{key}: not a non-negative integer: {v:?}")))
    }

    pub fn bool(&self, key: &str) -> Result<bool, Failure> {
        match self.get(key)? {
            "true" | "yes" | "1" => Ok(true),
            "false" | "no" | "0" => Ok(false),
            v => Err(Failure::param(format!(
                "{key}: expected true or false, got {v:?}"
            ))),
        }
    }

    pub fn convention(&self) -> Result<ShockConvention, Failure> {
        self.get("convention")?.parse().map_err(Failure::param)
    }

    /// The configured element, or a box of edge `edge` matching `ndim`.
    pub fn se(&self, ndim: usize, edge: usize) -> Result<StructuringElement, Failure> {
        match self.raw("se") {
            Some(spec) => parse_se(spec),
            None => StructuringElement::make_box(&vec![edge; ndim]).map_err(Failure::param),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum MuChoice {
    Fixed(UnitVector3),
    Auto,
}

pub fn parse_mu(s: &str) -> Result<MuChoice, Failure> {
    if s == "auto" {
        return Ok(MuChoice::Auto);
    }
    let parts: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| Failure::param(format!("mu: expected x,y,z or auto, got {s:?}")))?;
    if parts.len() != 3 {
        return Err(Failure::param(format!(
            "mu: expected three components, got {s:?}"
        )));
    }
    UnitVector3::new(parts[0], parts[1], parts[2])
        .map(MuChoice::Fixed)
        .map_err(|e| Failure::param(format!("mu: {e}")))
}

/// `box:AxB` or `box:AxBxC` with odd edge lengths.
pub fn parse_se(s: &str) -> Result<StructuringElement, Failure> {
    let dims = s
        .strip_prefix("box:")
        .ok_or_else(|| Failure::param(format!("se: expected box:AxB[xC], got {s:?}")))?;
    let edges: Vec<usize> = dims
        .split('x')
        .map(str::parse)
        .collect::<Result<_, _>>()
        .map_err(|_| Failure::param(format!("se: bad edge lengths in {s:?}")))?;
    StructuringElement::make_box(&edges).map_err(|e| Failure::param(format!("se: {e}")))
}

/// `WxH` or `WxHxD`.
pub fn parse_shape(s: &str) -> Result<Vec<usize>, Failure> {
    s.split('x')
        .map(str::parse)
        .collect::<Result<Vec<usize>, _>>()
        .map_err(|_| Failure::param(format!("shape: expected WxH[xD], got {s:?}")))
}

/// `lo,hi` in radians.
pub fn parse_band(s: &str) -> Result<(f64, f64), Failure> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| Failure::param(format!("band: expected lo,hi, got {s:?}")))?;
    match parts[..] {
        [lo, hi] => Ok((lo, hi)),
        _ => Err(Failure::param(format!("band: expected lo,hi, got {s:?}"))),
    }
}
