use std::fmt;
use std::path::Path;
use std::str::FromStr;

use sha2::{Digest, Sha256};

use crate::allencahn::NormKind;
use crate::splitting::{integer_ratio, Policy};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Backend {
    Linear,
    AllenCahn,
}

impl Backend {
    pub fn name(self) -> &'static str {
        match self {
            Backend::Linear => "linear",
            Backend::AllenCahn => "allen-cahn",
        }
    }
}

impl FromStr for Backend {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(Backend::Linear),
            "allen-cahn" | "allencahn" => Ok(Backend::AllenCahn),
            other => Err(Error::config(format!("unknown backend `{other}` (expected linear or allen-cahn)"))),
        }
    }
}

/// Ordering policy as named in configs and reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PolicyKind {
    /// Radical-inverse driver; one deterministic run.
    Qr,
    /// Seeded pseudo-random driver; an ensemble of runs.
    Rand,
    /// Identity ordering every step.
    Lie,
    Strang,
}

impl PolicyKind {
    pub fn name(self) -> &'static str {
        match self {
            PolicyKind::Qr => "qr",
            PolicyKind::Rand => "rand",
            PolicyKind::Lie => "lie",
            PolicyKind::Strang => "strang",
        }
    }

    pub fn is_randomized(self) -> bool {
        self == PolicyKind::Rand
    }

    pub(crate) fn policy(self, config: &ExperimentConfig, p: usize, run: u64) -> Policy {
        match self {
            PolicyKind::Qr => Policy::QuasiRandom { base: config.base, offset: config.offset },
            PolicyKind::Rand => Policy::Randomized { seed: config.seed, run },
            PolicyKind::Lie => Policy::lie(p),
            PolicyKind::Strang => Policy::Strang,
        }
    }
}

impl FromStr for PolicyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "qr" => Ok(PolicyKind::Qr),
            "rand" => Ok(PolicyKind::Rand),
            "lie" => Ok(PolicyKind::Lie),
            "strang" => Ok(PolicyKind::Strang),
            other => Err(Error::config(format!("unknown policy `{other}` (expected qr, rand, lie or strang)"))),
        }
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FlowKind {
    None,
    /// `v(x, y) = (−0.75 sin y, 0)`.
    Shear,
}

impl FromStr for FlowKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(FlowKind::None),
            "shear" => Ok(FlowKind::Shear),
            other => Err(Error::config(format!("unknown flow `{other}` (expected none or shear)"))),
        }
    }
}

/// A full experiment description. Text form is one `key = value` per
/// line; `#` starts a comment.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub backend: Backend,
    pub horizon: f64,
    /// Strictly decreasing powers of two.
    pub taus: Vec<f64>,
    pub policies: Vec<PolicyKind>,
    /// Runs per randomized policy; deterministic policies always run once.
    pub ensemble: usize,
    pub seed: u64,
    pub base: u32,
    pub offset: u64,
    // linear
    pub m: usize,
    pub p: usize,
    // allen-cahn
    pub nu: f64,
    pub grid: usize,
    pub flow: FlowKind,
    pub norms: Vec<NormKind>,
    pub tau_ref: f64,
    pub substeps: usize,
    /// Largest accepted L² gap between the reference at `tau_ref` and at
    /// `tau_ref / 2`; `None` skips the check.
    pub gate: Option<f64>,
}

pub(crate) fn power_range(hi: i32, lo: i32) -> Vec<f64> {
    (hi..=lo).map(|q| 2f64.powi(-q)).collect()
}

impl ExperimentConfig {
    /// Desk-scale defaults for each backend.
    pub fn desk(backend: Backend) -> Self {
        let linear = backend == Backend::Linear;
        Self {
            backend,
            horizon: 1.0,
            taus: if linear { power_range(4, 8) } else { power_range(8, 13) },
            policies: if linear {
                vec![PolicyKind::Qr, PolicyKind::Rand, PolicyKind::Lie, PolicyKind::Strang]
            } else {
                vec![PolicyKind::Qr, PolicyKind::Rand]
            },
            ensemble: 100,
            seed: 1,
            base: 2,
            offset: 0,
            m: 20,
            p: if linear { 3 } else { 2 },
            nu: 1.0,
            grid: 64,
            flow: FlowKind::None,
            norms: if linear { vec![NormKind::L2] } else { vec![NormKind::L2, NormKind::W12] },
            tau_ref: 2f64.powi(-16),
            substeps: 1,
            gate: Some(1e-9),
        }
    }

    /// Parse the text form. A `backend` line selects the defaults the
    /// remaining keys override.
    pub fn parse(text: &str) -> Result<Self> {
        let mut pairs = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::config(format!("line {}: expected `key = value`, got `{line}`", lineno + 1)))?;
            pairs.push((key.trim().to_string(), value.trim().to_string()));
        }
        let backend = match pairs.iter().rev().find(|(k, _)| k == "backend") {
            Some((_, v)) => v.parse()?,
            None => Backend::Linear,
        };
        let mut config = Self::desk(backend);
        for (k, v) in pairs.iter().filter(|(k, _)| k != "backend") {
            config.set(k, v)?;
        }
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
        Self::parse(&text)
    }

    /// Override one key; values use the same syntax as the text form.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        let bad = |what: &str| Error::config(format!("bad value `{value}` for `{key}`: {what}"));
        match key {
            "backend" => self.backend = value.parse()?,
            "horizon" | "T" => self.horizon = parse_real(value).ok_or_else(|| bad("expected a number"))?,
            "taus" => self.taus = parse_taus(value)?,
            "policies" => self.policies = parse_list(value)?,
            "ensemble" => self.ensemble = value.parse().map_err(|_| bad("expected a count"))?,
            "seed" => self.seed = value.parse().map_err(|_| bad("expected an unsigned integer"))?,
            "base" => self.base = value.parse().map_err(|_| bad("expected an integer"))?,
            "offset" => self.offset = value.parse().map_err(|_| bad("expected an unsigned integer"))?,
            "m" => self.m = value.parse().map_err(|_| bad("expected an integer"))?,
            "p" => self.p = value.parse().map_err(|_| bad("expected an integer"))?,
            "nu" => self.nu = parse_real(value).ok_or_else(|| bad("expected a number"))?,
            "grid" => self.grid = value.parse().map_err(|_| bad("expected an integer"))?,
            "flow" => self.flow = value.parse()?,
            "norms" => self.norms = parse_list(value)?,
            "tau_ref" => self.tau_ref = parse_real(value).ok_or_else(|| bad("expected a number"))?,
            "substeps" => self.substeps = value.parse().map_err(|_| bad("expected an integer"))?,
            "gate" => {
                self.gate = match value {
                    "off" | "none" => None,
                    v => Some(parse_real(v).ok_or_else(|| bad("expected a number or `off`"))?),
                }
            }
            other => return Err(Error::config(format!("unknown key `{other}`"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::config(msg));
        if self.taus.is_empty() {
            return fail("no time steps given".into());
        }
        for &tau in &self.taus {
            if !(tau > 0.0) || tau.log2().fract() != 0.0 {
                return fail(format!("time step {tau} is not a power of two"));
            }
        }
        if self.taus.windows(2).any(|w| w[1] >= w[0]) {
            return fail("time steps must be strictly decreasing".into());
        }
        if !(self.horizon > 0.0) || integer_ratio(self.horizon, self.taus[0]).filter(|&k| k >= 1).is_none() {
            return fail(format!("horizon {} is not a multiple of the largest step {}", self.horizon, self.taus[0]));
        }
        if self.policies.is_empty() {
            return fail("no policies given".into());
        }
        if self.ensemble == 0 {
            return fail("ensemble size must be at least 1".into());
        }
        if self.base < 2 {
            return fail(format!("sequence base must be at least 2, got {}", self.base));
        }
        match self.backend {
            Backend::Linear => {
                if self.m < 2 || self.p < 2 {
                    return fail(format!("need m >= 2 and p >= 2, got m = {}, p = {}", self.m, self.p));
                }
            }
            Backend::AllenCahn => {
                if !(self.nu > 0.0) {
                    return fail(format!("nu must be positive, got {}", self.nu));
                }
                if self.grid < 4 || !self.grid.is_power_of_two() {
                    return fail(format!("grid must be a power of two >= 4, got {}", self.grid));
                }
                if self.norms.is_empty() {
                    return fail("no norms given".into());
                }
                if self.substeps == 0 {
                    return fail("substeps must be at least 1".into());
                }
                let finest = *self.taus.last().expect("non-empty");
                if integer_ratio(finest, self.tau_ref).filter(|&k| k >= 1).is_none() {
                    return fail(format!("tau_ref {} does not divide the finest step {finest}", self.tau_ref));
                }
            }
        }
        Ok(())
    }

    /// Number of operators the backend splits into.
    pub fn operator_count(&self) -> usize {
        match (self.backend, self.flow) {
            (Backend::Linear, _) => self.p,
            (Backend::AllenCahn, FlowKind::None) => 2,
            (Backend::AllenCahn, FlowKind::Shear) => 3,
        }
    }

    /// Norms reported by the backend; the linear backend is Euclidean only.
    pub fn report_norms(&self) -> Vec<&'static str> {
        match self.backend {
            Backend::Linear => vec!["l2"],
            Backend::AllenCahn => self.norms.iter().map(|n| n.name()).collect(),
        }
    }

    /// Canonical text: every key, sorted, fully resolved.
    pub fn canonical(&self) -> String {
        let flow = match self.flow {
            FlowKind::None => "none",
            FlowKind::Shear => "shear",
        };
        let join = |items: Vec<String>| items.join(",");
        let mut lines = vec![
            format!("backend = {}", self.backend.name()),
            format!("base = {}", self.base),
            format!("ensemble = {}", self.ensemble),
            format!("flow = {flow}"),
            format!("gate = {}", self.gate.map_or("off".to_string(), |g| format!("{g:e}"))),
            format!("grid = {}", self.grid),
            format!("horizon = {}", self.horizon),
            format!("m = {}", self.m),
            format!("norms = {}", join(self.norms.iter().map(|n| n.name().to_string()).collect())),
            format!("nu = {}", self.nu),
            format!("offset = {}", self.offset),
            format!("p = {}", self.p),
            format!("policies = {}", join(self.policies.iter().map(|p| p.name().to_string()).collect())),
            format!("seed = {}", self.seed),
            format!("substeps = {}", self.substeps),
            format!("tau_ref = {}", format_tau(self.tau_ref)),
            format!("taus = {}", join(self.taus.iter().map(|&t| format_tau(t)).collect())),
        ];
        lines.sort();
        lines.join("\n") + "\n"
    }

    /// First 16 hex digits of the SHA-256 of [`canonical`](Self::canonical).
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.canonical().as_bytes());
        hex::encode(&digest[..8])
    }
}

fn format_tau(tau: f64) -> String {
    let q = tau.log2();
    if q.fract() == 0.0 {
        format!("2^{}", q as i64)
    } else {
        format!("{tau:e}")
    }
}

fn parse_real(s: &str) -> Option<f64> {
    let s = s.trim();
    if let Some((base, exp)) = s.split_once('^') {
        let base: f64 = base.trim().parse().ok()?;
        let exp: i32 = exp.trim().parse().ok()?;
        return Some(base.powi(exp));
    }
    s.parse().ok().filter(|v: &f64| v.is_finite())
}

/// `2^-4..2^-8` (inclusive power range) or a comma list of numbers.
pub fn parse_taus(spec: &str) -> Result<Vec<f64>> {
    let bad = || Error::config(format!("cannot parse time steps `{spec}`"));
    if let Some((a, b)) = spec.split_once("..") {
        let exponent = |s: &str| -> Option<i32> {
            let (base, exp) = s.trim().split_once('^')?;
            (base.trim() == "2").then_some(())?;
            exp.trim().parse().ok()
        };
        let (hi, lo) = (exponent(a).ok_or_else(bad)?, exponent(b).ok_or_else(bad)?);
        if lo >= hi {
            return Err(Error::config(format!("range `{spec}` must run from large to small steps")));
        }
        return Ok((lo..=hi).rev().map(|q| 2f64.powi(q)).collect());
    }
    spec.split(',').map(|s| parse_real(s).ok_or_else(bad)).collect()
}

fn parse_list<T: FromStr<Err = Error>>(s: &str) -> Result<Vec<T>> {
    s.split(',').map(str::trim).filter(|s| !s.is_empty()).map(str::parse).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tau_specs() {
        assert_eq!(parse_taus("2^-4..2^-6").unwrap(), vec![0.0625, 0.03125, 0.015625]);
        assert_eq!(parse_taus("0.5, 2^-3").unwrap(), vec![0.5, 0.125]);
        assert!(parse_taus("2^-6..2^-4").is_err());
        assert!(parse_taus("3^-1..3^-2").is_err());
        assert!(parse_taus("fast").is_err());
    }

    #[test]
    fn parse_with_overrides_and_comments() {
        let text = "# desk run\nbackend = allen-cahn\ntaus = 2^-6..2^-8  # short\npolicies = qr\nflow = shear\nnorms = l2\n";
        let c = ExperimentConfig::parse(text).unwrap();
        assert_eq!(c.backend, Backend::AllenCahn);
        assert_eq!(c.taus, power_range(6, 8));
        assert_eq!(c.policies, vec![PolicyKind::Qr]);
        assert_eq!(c.flow, FlowKind::Shear);
        assert_eq!(c.operator_count(), 3);
        assert_eq!(c.grid, 64);
        assert_eq!(c.report_norms(), vec!["l2"]);
    }

    #[test]
    fn validation_failures() {
        for text in [
            "taus = 2^-4,2^-3",
            "taus = 0.3",
            "ensemble = 0",
            "m = 1",
            "policies = best",
            "backend = allen-cahn\ntau_ref = 2^-3",
            "backend = allen-cahn\ngrid = 48",
            "horizon = 0.3",
            "speed = 3",
            "no equals sign",
        ] {
            assert!(matches!(ExperimentConfig::parse(text), Err(Error::Config(_))), "{text}");
        }
    }

    #[test]
    fn hash_is_stable_and_sensitive() {
        let a = ExperimentConfig::parse("seed = 5\nm = 10").unwrap();
        let b = ExperimentConfig::parse("m = 10\n\nseed = 5 # same").unwrap();
        assert_eq!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 16);
        let c = ExperimentConfig::parse("seed = 6\nm = 10").unwrap();
        assert_ne!(a.hash(), c.hash());
        let reparsed = ExperimentConfig::parse(&a.canonical()).unwrap();
        assert_eq!(reparsed, a);
    }

    #[test]
    fn gate_can_be_disabled() {
        let c = ExperimentConfig::parse("backend = allen-cahn\ngate = off").unwrap();
        assert_eq!(c.gate, None);
        let c = ExperimentConfig::parse("backend = allen-cahn\ngate = 1e-8").unwrap();
        assert_eq!(c.gate, Some(1e-8));
    }
}
