//! Flat key/value run configuration.
//!
//! The format is line-based and diff-friendly: `key = value` pairs grouped
//! under `[section]` headers, `#` comments. Sections mirror the commands
//! (`[data]`, `[model]`, `[train]`, `[sweep]`, `[rollout]`, `[mbrl]`) plus
//! an optional `[plant]` override of the physical parameters; global keys
//! (`seed`, `out`) live before the first section.

use std::collections::BTreeMap;
use std::path::Path;

use crate::modelzoo::{ModelKind, ModelSpec};
use crate::systems::{DoublePendulumParams, SamplingSpec};
use crate::training::TrainConfig;
use crate::{Error, Result};

#[derive(Clone, Debug, Default)]
pub struct RunConfig {
    sections: BTreeMap<String, BTreeMap<String, String>>,
    /// Original text, so commands can copy the config into their output.
    pub text: String,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<RunConfig> {
        let mut sections: BTreeMap<String, BTreeMap<String, String>> = BTreeMap::new();
        let mut current = String::new(); // global section
        sections.entry(current.clone()).or_default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') || line.starts_with(';') {
                continue;
            }
            if let Some(name) = line.strip_prefix('[') {
                let name = name.strip_suffix(']').ok_or_else(|| {
                    Error::Config(format!("line {}: unterminated section header", lineno + 1))
                })?;
                current = name.trim().to_string();
                sections.entry(current.clone()).or_default();
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {}: expected `key = value`", lineno + 1))
            })?;
            sections
                .get_mut(&current)
                .unwrap()
                .insert(key.trim().to_string(), value.trim().to_string());
        }
        Ok(RunConfig {
            sections,
            text: text.to_string(),
        })
    }

    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn get(&self, section: &str, key: &str) -> Option<&str> {
        self.sections.get(section)?.get(key).map(String::as_str)
    }

    pub fn set(&mut self, section: &str, key: &str, value: String) {
        self.sections
            .entry(section.to_string())
            .or_default()
            .insert(key.to_string(), value);
    }

    pub fn str_or<'a>(&'a self, section: &str, key: &str, default: &'a str) -> &'a str {
        self.get(section, key).unwrap_or(default)
    }

    pub fn require(&self, section: &str, key: &str) -> Result<&str> {
        self.get(section, key)
            .ok_or_else(|| Error::Config(format!("missing [{section}] {key}")))
    }

    pub fn f64_or(&self, section: &str, key: &str, default: f64) -> Result<f64> {
        match self.get(section, key) {
            None => Ok(default),
            Some(v) => v
                .parse()
                .map_err(|_| Error::Config(format!("[{section}] {key}: not a number: {v}"))),
        }
    }

    pub fn usize_or(&self, section: &str, key: &str, default: usize) -> Result<usize> {
        match self.get(section, key) {
            None => Ok(default),
            Some(v) => v
                .parse()
                .map_err(|_| Error::Config(format!("[{section}] {key}: not an integer: {v}"))),
        }
    }

    pub fn u64_or(&self, section: &str, key: &str, default: u64) -> Result<u64> {
        match self.get(section, key) {
            None => Ok(default),
            Some(v) => v
                .parse()
                .map_err(|_| Error::Config(format!("[{section}] {key}: not an integer: {v}"))),
        }
    }

    pub fn bool_or(&self, section: &str, key: &str, default: bool) -> Result<bool> {
        match self.get(section, key) {
            None => Ok(default),
            Some(v) => match v {
                "true" | "1" | "yes" => Ok(true),
                "false" | "0" | "no" => Ok(false),
                _ => Err(Error::Config(format!("[{section}] {key}: not a bool: {v}"))),
            },
        }
    }

    /// Comma-separated list.
    pub fn list_or(&self, section: &str, key: &str, default: &[&str]) -> Vec<String> {
        match self.get(section, key) {
            None => default.iter().map(|s| s.to_string()).collect(),
            Some(v) => v
                .split(',')
                .map(|s| s.trim().to_string())
                .filter(|s| !s.is_empty())
                .collect(),
        }
    }

    pub fn usize_list_or(&self, section: &str, key: &str, default: &[usize]) -> Result<Vec<usize>> {
        match self.get(section, key) {
            None => Ok(default.to_vec()),
            Some(v) => v
                .split(',')
                .map(|s| {
                    s.trim()
                        .parse()
                        .map_err(|_| Error::Config(format!("[{section}] {key}: bad list entry {s}")))
                })
                .collect(),
        }
    }

    pub fn global_seed(&self) -> Result<u64> {
        self.u64_or("", "seed", 0)
    }

    /// Physical plant parameters, defaulting to the nominal values.
    pub fn plant(&self) -> Result<DoublePendulumParams> {
        let d = DoublePendulumParams::nominal();
        let p = DoublePendulumParams {
            m1: self.f64_or("plant", "m1", d.m1)?,
            m2: self.f64_or("plant", "m2", d.m2)?,
            l1: self.f64_or("plant", "l1", d.l1)?,
            l2: self.f64_or("plant", "l2", d.l2)?,
            g: self.f64_or("plant", "g", d.g)?,
            b1: self.f64_or("plant", "b1", d.b1)?,
            b2: self.f64_or("plant", "b2", d.b2)?,
            eta1: self.f64_or("plant", "eta1", d.eta1)?,
            eta2: self.f64_or("plant", "eta2", d.eta2)?,
        };
        p.validate()?;
        Ok(p)
    }

    /// Sampling protocol from `[data]`, randomness from the given seed.
    pub fn sampling(&self, seed: u64) -> Result<SamplingSpec> {
        let d = SamplingSpec::default();
        let q = self.f64_or("data", "q_range", std::f64::consts::PI)?;
        let qd = self.f64_or("data", "qdot_range", 10.0)?;
        let spec = SamplingSpec {
            q_range: (-q, q),
            qdot_range: (-qd, qd),
            u_std: self.f64_or("data", "u_std", d.u_std)?,
            dt: self.f64_or("data", "dt", d.dt)?,
            count: self.usize_or("data", "count", d.count)?,
            seed,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Model description from `[model]` (seed supplied by the caller).
    pub fn model_spec(&self, seed: u64) -> Result<ModelSpec> {
        let name = self.str_or("model", "name", "MVF");
        let kind = ModelKind::parse(name)?;
        let mut spec = ModelSpec::new(kind, seed);
        spec.n = self.usize_or("model", "n", 2)?;
        spec.m = self.usize_or("model", "m", 2)?;
        spec.hidden = self.usize_list_or("model", "hidden", &[32, 32, 32])?;
        spec.naive_hidden = self.usize_list_or("model", "naive_hidden", &[64, 64, 64])?;
        spec.delta = self.f64_or("model", "delta", 1.0)?;
        Ok(spec)
    }

    /// Training hyperparameters from `[train]`.
    pub fn train_config(&self, seed: u64) -> Result<TrainConfig> {
        let d = TrainConfig::default();
        let cfg = TrainConfig {
            lambda: self.f64_or("train", "lambda", d.lambda)?,
            lr: self.f64_or("train", "lr", d.lr)?,
            wb_lr: self.f64_or("train", "wb_lr", d.wb_lr)?,
            batch_size: self.usize_or("train", "batch_size", d.batch_size)?,
            epochs: self.usize_or("train", "epochs", d.epochs)?,
            seed,
            val_threshold: match self.get("train", "val_threshold") {
                Some(v) => Some(v.parse().map_err(|_| {
                    Error::Config(format!("[train] val_threshold: not a number: {v}"))
                })?),
                None => None,
            },
            val_check_every: self.usize_or("train", "val_check_every", d.val_check_every)?,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_sections_and_values() {
        let cfg = RunConfig::parse(
            "# comment\nseed = 9\nout = runs/x\n\n[data]\ncount = 32\ndt = 0.02\n\n[model]\nname = MVB\nhidden = 16, 16\n",
        )
        .unwrap();
        assert_eq!(cfg.global_seed().unwrap(), 9);
        assert_eq!(cfg.str_or("", "out", "-"), "runs/x");
        let s = cfg.sampling(9).unwrap();
        assert_eq!(s.count, 32);
        assert_eq!(s.dt, 0.02);
        let m = cfg.model_spec(9).unwrap();
        assert_eq!(m.kind, ModelKind::MVB);
        assert_eq!(m.hidden, vec![16, 16]);
    }

    #[test]
    fn rejects_malformed_lines() {
        assert!(RunConfig::parse("[unterminated\n").is_err());
        assert!(RunConfig::parse("keyvalue\n").is_err());
        let cfg = RunConfig::parse("[data]\ncount = many\n").unwrap();
        assert!(cfg.sampling(0).is_err());
    }

    #[test]
    fn defaults_apply_when_absent() {
        let cfg = RunConfig::parse("").unwrap();
        assert_eq!(cfg.global_seed().unwrap(), 0);
        let t = cfg.train_config(0).unwrap();
        assert_eq!(t.epochs, 5000);
        assert!(t.val_threshold.is_none());
        let p = cfg.plant().unwrap();
        assert_eq!(p, DoublePendulumParams::nominal());
    }
}
