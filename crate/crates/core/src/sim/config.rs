//! Sweep configuration and its flat `key=value` text form.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::str::FromStr;

use crate::channel::ChannelDist;
use crate::constellation::{full_diversity_rotation, ConstellationKind};
use crate::error::{Error, Result};
use crate::receiver::DecodeMode;
use crate::schemes::{SchemeConfig, SchemeKind, TdmaBlock};

/// What one counted word is.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum WepScope {
    /// A trial errs if any of the four messages is wrong.
    #[default]
    Network,
    /// Each receiver's pair of messages is a separate word.
    PerRx,
}

impl FromStr for WepScope {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "network" => Ok(WepScope::Network),
            "per-rx" | "per_rx" => Ok(WepScope::PerRx),
            _ => Err(Error::Config(format!("unknown wep scope '{s}'"))),
        }
    }
}

impl std::fmt::Display for WepScope {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            WepScope::Network => "network",
            WepScope::PerRx => "per-rx",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimConfig {
    pub scheme: SchemeKind,
    pub constellation: ConstellationKind,
    /// Constellation rotation; `None` picks the scheme default.
    pub phi: Option<f64>,
    /// Codeword phase; `None` picks the scheme default.
    pub theta: Option<f64>,
    /// Transmit powers in dB, strictly increasing.
    pub p_db: Vec<f64>,
    /// Trial budget per power point.
    pub trials: u64,
    /// A point stops early once this many word errors are counted.
    pub target_errors: u64,
    pub seed: u64,
    /// Worker threads; 0 uses one per core.
    pub workers: usize,
    pub out: Option<PathBuf>,
    /// Diagnostic switch: `false` removes the receiver noise.
    pub noise: bool,
    pub wep_scope: WepScope,
    pub decoder: DecodeMode,
    pub channel: ChannelDist,
    /// Antennas per node for TDMA (the other schemes fix it).
    pub tdma_m: usize,
    /// Precoder rotation parameters for TDMA.
    pub tdma_blocks: Option<Vec<TdmaBlock>>,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            scheme: SchemeKind::Msr,
            constellation: ConstellationKind::Qam4,
            phi: None,
            theta: None,
            p_db: vec![0.0, 5.0, 10.0, 15.0, 20.0],
            trials: 10_000,
            target_errors: 200,
            seed: 1,
            workers: 0,
            out: None,
            noise: true,
            wep_scope: WepScope::Network,
            decoder: DecodeMode::Sphere,
            channel: ChannelDist::Gaussian,
            tdma_m: 4,
            tdma_blocks: None,
        }
    }
}

/// `start:step:stop` (inclusive) or a comma-separated list.
pub fn parse_pdb(s: &str) -> Result<Vec<f64>> {
    let num = |t: &str| t.trim().parse::<f64>().map_err(|_| Error::Config(format!("bad number '{t}' in power grid")));
    if s.contains(':') {
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() != 3 {
            return Err(Error::Config(format!("power grid '{s}' is not start:step:stop")));
        }
        let (start, step, stop) = (num(parts[0])?, num(parts[1])?, num(parts[2])?);
        if !(step > 0.0) || stop < start {
            return Err(Error::Config(format!("power grid '{s}' is empty or has a non-positive step")));
        }
        let n = ((stop - start) / step + 1e-9).floor() as usize + 1;
        Ok((0..n).map(|k| start + k as f64 * step).collect())
    } else {
        s.split(',').map(num).collect()
    }
}

fn parse_tdma(s: &str) -> Result<Vec<TdmaBlock>> {
    s.split(';')
        .map(|blk| {
            let v: Vec<f64> = blk
                .split(':')
                .map(|t| t.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| Error::Config(format!("bad TDMA block '{blk}'")))?;
            match v[..] {
                [tau, psi, theta] => Ok(TdmaBlock { tau, psi, theta }),
                _ => Err(Error::Config(format!("TDMA block '{blk}' is not tau:psi:theta"))),
            }
        })
        .collect()
}

fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v {
        "true" | "1" | "yes" | "on" => Ok(true),
        "false" | "0" | "no" | "off" => Ok(false),
        _ => Err(Error::Config(format!("{key}: expected a boolean, got '{v}'"))),
    }
}

fn parse_num<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse().map_err(|_| Error::Config(format!("{key}: cannot parse '{v}'")))
}

impl SimConfig {
    /// Sets one option from its text form; keys match the CLI flag names.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key.trim().replace('-', "_").as_str() {
            "scheme" => self.scheme = v.parse()?,
            "const" | "constellation" => self.constellation = v.parse()?,
            "phi" => self.phi = Some(parse_num(key, v)?),
            "theta" => self.theta = Some(parse_num(key, v)?),
            "pdb" => self.p_db = parse_pdb(v)?,
            "trials" => self.trials = parse_num(key, v)?,
            "target_errors" => self.target_errors = parse_num(key, v)?,
            "seed" => self.seed = parse_num(key, v)?,
            "workers" => self.workers = parse_num(key, v)?,
            "out" => self.out = Some(PathBuf::from(v)),
            "noise" => self.noise = parse_bool(key, v)?,
            "no_noise" => self.noise = !parse_bool(key, v)?,
            "wep_scope" => self.wep_scope = v.parse()?,
            "decoder" => self.decoder = v.parse()?,
            "channel" => self.channel = v.parse()?,
            "m" => self.tdma_m = parse_num(key, v)?,
            "tdma" => self.tdma_blocks = Some(parse_tdma(v)?),
            other => return Err(Error::Config(format!("unknown option '{other}'"))),
        }
        Ok(())
    }

    /// Applies `key=value` lines; blank lines and `#` comments are skipped.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key=value", n + 1)))?;
            self.set(k, v)?;
        }
        Ok(())
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut cfg = SimConfig::default();
        cfg.apply_text(text)?;
        Ok(cfg)
    }

    /// Canonical text form; defaults are written out resolved. The worker
    /// count and output path are left out since they do not affect results.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let pdb: Vec<String> = self.p_db.iter().map(|p| p.to_string()).collect();
        let _ = writeln!(s, "scheme={}", self.scheme);
        let _ = writeln!(s, "const={}", self.constellation);
        let _ = writeln!(s, "phi={}", self.phi());
        let _ = writeln!(s, "theta={}", self.theta());
        let _ = writeln!(s, "pdb={}", pdb.join(","));
        let _ = writeln!(s, "trials={}", self.trials);
        let _ = writeln!(s, "target_errors={}", self.target_errors);
        let _ = writeln!(s, "seed={}", self.seed);
        let _ = writeln!(s, "noise={}", self.noise);
        let _ = writeln!(s, "wep_scope={}", self.wep_scope);
        let _ = writeln!(s, "decoder={}", self.decoder);
        let _ = writeln!(s, "channel={}", self.channel);
        if self.scheme == SchemeKind::Tdma {
            let _ = writeln!(s, "m={}", self.tdma_m);
            if let Some(b) = &self.tdma_blocks {
                let blocks: Vec<String> = b.iter().map(|b| format!("{}:{}:{}", b.tau, b.psi, b.theta)).collect();
                let _ = writeln!(s, "tdma={}", blocks.join(";"));
            }
        }
        s
    }

    /// Rotation in use: the full-diversity angle for the four-antenna
    /// code schemes, zero otherwise.
    pub fn phi(&self) -> f64 {
        self.phi.unwrap_or(match self.scheme {
            SchemeKind::Msr | SchemeKind::Trivial => full_diversity_rotation(),
            _ => 0.0,
        })
    }

    /// Codeword phase in use: pi/4 by default, always zero for repetition.
    pub fn theta(&self) -> f64 {
        match self.scheme {
            SchemeKind::Trivial => self.theta.unwrap_or(0.0),
            _ => self.theta.unwrap_or(std::f64::consts::FRAC_PI_4),
        }
    }

    pub fn m(&self) -> usize {
        self.scheme.antennas().unwrap_or(self.tdma_m)
    }

    /// Link parameters at one grid point.
    pub fn scheme_config(&self, p_db: f64) -> SchemeConfig {
        SchemeConfig {
            scheme: self.scheme,
            m: self.m(),
            theta: self.theta(),
            phi: self.phi(),
            constellation: self.constellation,
            power: 10f64.powf(p_db / 10.0),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.p_db.is_empty() {
            return Err(Error::Config("power grid is empty".into()));
        }
        if self.p_db.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Config("power grid must be strictly increasing".into()));
        }
        if self.p_db.iter().any(|p| !p.is_finite()) {
            return Err(Error::Config("power grid has non-finite entries".into()));
        }
        if self.trials == 0 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        if self.trials >= 1 << 48 || self.p_db.len() >= 1 << 16 {
            return Err(Error::Config("grid or trial budget too large for the seed streams".into()));
        }
        if self.scheme == SchemeKind::Tdma && self.tdma_blocks.is_none() {
            return Err(Error::Config("TDMA needs precoder parameters (tdma=tau:psi:theta[;...])".into()));
        }
        self.scheme_config(self.p_db[0]).validate()
    }
}
