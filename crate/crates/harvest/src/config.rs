//! Flat `key = value` run configuration.
//!
//! One assignment per line, `#` starts a comment. Numbers accept the
//! shorthands `pi`, `<c>pi` / `<c>*pi` and `j01` (first zero of `J₀`). Lists
//! are comma separated. Unknown keys are rejected.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use harvest_core::{MeshKind, Params};

use crate::CliError;

/// First positive zero of the Bessel function `J₀`.
pub const J01: f64 = 2.404_825_557_695_773;

const KEYS: &[&str] = &[
    "domain",
    "extent",
    "n",
    "p",
    "q",
    "alpha",
    "beta",
    "lambda",
    "lambda_cap",
    "step",
    "max_step",
    "max_points",
    "tol",
    "verify_tol",
    "tau",
    "levels",
    "k_list",
    "alphas",
    "betas",
    "p_list",
    "q_list",
    "scenario",
];

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub kind: MeshKind,
    pub extent: f64,
    pub n: usize,
    pub p: f64,
    pub q: f64,
    pub alpha: f64,
    pub beta: f64,
    pub lambda: f64,
    pub lambda_cap: f64,
    pub step: f64,
    pub max_step: f64,
    pub max_points: usize,
    /// Solver tolerance on the scaled residual.
    pub tol: f64,
    /// Tolerance of the verification properties.
    pub verify_tol: Option<f64>,
    pub tau: f64,
    pub levels: Vec<usize>,
    pub k_list: Vec<usize>,
    pub alphas: Vec<f64>,
    pub betas: Vec<f64>,
    pub p_list: Vec<f64>,
    pub q_list: Vec<f64>,
    pub scenario: Option<String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            kind: MeshKind::Interval,
            extent: PI,
            n: 256,
            p: 2.0,
            q: 0.5,
            alpha: 0.0,
            beta: 1.0,
            lambda: 0.0,
            lambda_cap: 50.0,
            step: 1e-2,
            max_step: 0.25,
            max_points: 5000,
            tol: 1e-10,
            verify_tol: None,
            tau: 1.5,
            levels: vec![128, 256, 512],
            k_list: vec![4, 8, 16, 32],
            alphas: Vec::new(),
            betas: Vec::new(),
            p_list: Vec::new(),
            q_list: Vec::new(),
            scenario: None,
        }
    }
}

fn bad(key: &str, value: &str) -> CliError {
    CliError::Config(format!("invalid value for {key}: {value:?}"))
}

pub fn parse_number(s: &str) -> Option<f64> {
    let s = s.trim();
    if s == "j01" {
        return Some(J01);
    }
    if let Some(head) = s.strip_suffix("pi") {
        let head = head.trim().trim_end_matches('*').trim();
        return if head.is_empty() {
            Some(PI)
        } else {
            head.parse::<f64>().ok().map(|c| c * PI)
        };
    }
    s.parse::<f64>().ok()
}

fn number(key: &str, v: &str) -> Result<f64, CliError> {
    parse_number(v).filter(|x| x.is_finite()).ok_or_else(|| bad(key, v))
}

fn count(key: &str, v: &str) -> Result<usize, CliError> {
    v.trim().parse::<usize>().map_err(|_| bad(key, v))
}

fn list<T>(key: &str, v: &str, f: impl Fn(&str, &str) -> Result<T, CliError>) -> Result<Vec<T>, CliError> {
    v.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| f(key, s))
        .collect()
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<RunConfig, CliError> {
        let mut seen = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("line {}: expected key = value", lineno + 1)))?;
            let k = k.trim();
            if !KEYS.contains(&k) {
                return Err(CliError::Config(format!("unknown key {k:?}")));
            }
            if seen.insert(k.to_string(), v.trim().to_string()).is_some() {
                return Err(CliError::Config(format!("duplicate key {k:?}")));
            }
        }
        let mut c = RunConfig::default();
        for (k, v) in &seen {
            let (k, v) = (k.as_str(), v.as_str());
            match k {
                "domain" => {
                    c.kind = match v {
                        "interval" => MeshKind::Interval,
                        "disk" | "radial-disk" => MeshKind::RadialDisk,
                        _ => return Err(bad(k, v)),
                    }
                }
                "extent" => c.extent = number(k, v)?,
                "n" => c.n = count(k, v)?,
                "p" => c.p = number(k, v)?,
                "q" => c.q = number(k, v)?,
                "alpha" => c.alpha = number(k, v)?,
                "beta" => c.beta = number(k, v)?,
                "lambda" => c.lambda = number(k, v)?,
                "lambda_cap" => c.lambda_cap = number(k, v)?,
                "step" => c.step = number(k, v)?,
                "max_step" => c.max_step = number(k, v)?,
                "max_points" => c.max_points = count(k, v)?,
                "tol" => c.tol = number(k, v)?,
                "verify_tol" => c.verify_tol = Some(number(k, v)?),
                "tau" => c.tau = number(k, v)?,
                "levels" => c.levels = list(k, v, count)?,
                "k_list" => c.k_list = list(k, v, count)?,
                "alphas" => c.alphas = list(k, v, number)?,
                "betas" => c.betas = list(k, v, number)?,
                "p_list" => c.p_list = list(k, v, number)?,
                "q_list" => c.q_list = list(k, v, number)?,
                "scenario" => c.scenario = Some(v.to_string()),
                _ => unreachable!(),
            }
        }
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if !(self.extent > 0.0) {
            return Err(CliError::Config("extent must be positive".into()));
        }
        if self.n < 4 {
            return Err(CliError::Config("n must be at least 4".into()));
        }
        self.params()?;
        if !(self.lambda_cap >= 0.0) {
            return Err(CliError::Config("lambda_cap must be nonnegative".into()));
        }
        if !(self.step > 0.0) || !(self.max_step >= self.step) {
            return Err(CliError::Config("need 0 < step <= max_step".into()));
        }
        if !(self.tol > 0.0) {
            return Err(CliError::Config("tol must be positive".into()));
        }
        if self.max_points == 0 {
            return Err(CliError::Config("max_points must be positive".into()));
        }
        Ok(())
    }

    pub fn params(&self) -> Result<Params, CliError> {
        Ok(Params::new(self.p, self.q, self.lambda, self.alpha, self.beta)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_keys_and_shorthands() {
        let c =
            RunConfig::parse("# run\ndomain = disk\nextent = j01\nn = 64\nlevels = 8, 16\nbeta=0.5 # half\n").unwrap();
        assert_eq!(c.kind, MeshKind::RadialDisk);
        assert_eq!(c.extent, J01);
        assert_eq!(c.levels, vec![8, 16]);
        assert_eq!(c.beta, 0.5);
        assert_eq!(parse_number("2pi"), Some(2.0 * PI));
        assert_eq!(parse_number("2 * pi"), Some(2.0 * PI));
        assert_eq!(parse_number("pi"), Some(PI));
    }

    #[test]
    fn rejects_unknown_and_invalid() {
        assert!(matches!(RunConfig::parse("colour = red"), Err(CliError::Config(_))));
        assert!(matches!(RunConfig::parse("extent = 0"), Err(CliError::Config(_))));
        assert!(matches!(RunConfig::parse("q = 1.5"), Err(CliError::Config(_))));
        assert!(matches!(RunConfig::parse("n = 8\nn = 9"), Err(CliError::Config(_))));
        assert!(matches!(RunConfig::parse("n"), Err(CliError::Config(_))));
    }
}
