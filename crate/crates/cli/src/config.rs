//! Run configuration: built-in defaults, then the `SPDENSE_OUTPUT_DIR`
//! environment variable, then a flat `key = value` config file, then flags.

use std::path::{Path, PathBuf};

use serde_json::{json, Map, Value};
use spdense_core::certify::LyapunovCheckConfig;
use spdense_core::{CertifyConfig, LyapunovParams, RngSeed, SweepConfig};

pub const OUTPUT_DIR_ENV: &str = "SPDENSE_OUTPUT_DIR";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Formats {
    pub csv: bool,
    pub json: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub energies: Vec<f64>,
    pub e_min: f64,
    pub e_max: f64,
    pub n_grid: usize,
    pub big_m: u64,
    pub delta: f64,
    pub svd_tol: f64,
    pub retries: u32,
    pub p: f64,
    pub n_steps: u64,
    pub n_replicas: u64,
    pub burn_in: u64,
    pub seed: RngSeed,
    pub lyapunov_every: usize,
    pub refine_steps: u32,
    pub margin_minima: usize,
    pub output_dir: PathBuf,
    pub formats: Formats,
    pub jobs: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let certify = CertifyConfig::default();
        let sweep = SweepConfig::default();
        let lyap = LyapunovParams::default();
        Self {
            energies: Vec::new(),
            e_min: sweep.e_min,
            e_max: sweep.e_max,
            n_grid: sweep.n_grid,
            big_m: certify.big_m,
            delta: certify.delta,
            svd_tol: certify.svd_tol,
            retries: certify.max_retries,
            p: spdense_core::model::DEFAULT_P,
            n_steps: lyap.n_steps,
            n_replicas: lyap.n_replicas,
            burn_in: lyap.burn_in,
            seed: RngSeed::default(),
            lyapunov_every: LyapunovCheckConfig::default().every,
            refine_steps: sweep.refine_steps,
            margin_minima: sweep.margin_minima,
            output_dir: PathBuf::from("spdense-out"),
            formats: Formats { csv: true, json: true },
            jobs: None,
        }
    }
}

fn parse_f64(key: &str, v: &str) -> Result<f64, String> {
    v.trim()
        .parse::<f64>()
        .map_err(|_| format!("{key}: expected a number, got {v:?}"))
}

/// Accepts plain integers and integral scientific notation such as `1e6`.
fn parse_u64(key: &str, v: &str) -> Result<u64, String> {
    let v = v.trim();
    if let Ok(n) = v.parse::<u64>() {
        return Ok(n);
    }
    match v.parse::<f64>() {
        Ok(x) if x >= 0.0 && x.fract() == 0.0 && x < u64::MAX as f64 => Ok(x as u64),
        _ => Err(format!("{key}: expected a nonnegative integer, got {v:?}")),
    }
}

impl RunConfig {
    pub fn from_env() -> Self {
        let mut cfg = Self::default();
        if let Some(dir) = std::env::var_os(OUTPUT_DIR_ENV) {
            if !dir.is_empty() {
                cfg.output_dir = PathBuf::from(dir);
            }
        }
        cfg
    }

    pub fn apply(&mut self, key: &str, value: &str) -> Result<(), String> {
        let key = key.trim().replace('_', "-");
        let k = key.as_str();
        match k {
            "energy" => {
                self.energies = value
                    .split(',')
                    .filter(|s| !s.trim().is_empty())
                    .map(|s| parse_f64(k, s))
                    .collect::<Result<_, _>>()?
            }
            "emin" | "e-min" => self.e_min = parse_f64(k, value)?,
            "emax" | "e-max" => self.e_max = parse_f64(k, value)?,
            "grid" => self.n_grid = parse_u64(k, value)? as usize,
            "big-m" => self.big_m = parse_u64(k, value)?,
            "delta" => self.delta = parse_f64(k, value)?,
            "svd-tol" => self.svd_tol = parse_f64(k, value)?,
            "retries" => self.retries = parse_u64(k, value)?.min(u32::MAX as u64) as u32,
            "p" => self.p = parse_f64(k, value)?,
            "steps" => self.n_steps = parse_u64(k, value)?,
            "replicas" => self.n_replicas = parse_u64(k, value)?,
            "burn-in" => self.burn_in = parse_u64(k, value)?,
            "seed" => self.seed.seed = parse_u64(k, value)?,
            "stream" => self.seed.stream = parse_u64(k, value)?,
            "lyapunov-every" => self.lyapunov_every = parse_u64(k, value)? as usize,
            "refine-steps" => self.refine_steps = parse_u64(k, value)?.min(64) as u32,
            "margin-minima" => self.margin_minima = parse_u64(k, value)? as usize,
            "output-dir" => self.output_dir = PathBuf::from(value.trim()),
            "format" => {
                let mut f = Formats {
                    csv: false,
                    json: false,
                };
                for part in value.split(',').map(str::trim).filter(|s| !s.is_empty()) {
                    match part {
                        "csv" => f.csv = true,
                        "json" => f.json = true,
                        other => return Err(format!("format: unknown format {other:?} (csv, json)")),
                    }
                }
                if !(f.csv || f.json) {
                    return Err("format: at least one of csv, json is required".into());
                }
                self.formats = f;
            }
            "jobs" => {
                let n = parse_u64(k, value)? as usize;
                if n == 0 {
                    return Err("jobs: must be >= 1".into());
                }
                self.jobs = Some(n);
            }
            other => return Err(format!("unknown configuration key {other:?}")),
        }
        Ok(())
    }

    /// Reads a flat `key = value` file; `#` starts a comment.
    pub fn apply_file(&mut self, path: &Path) -> Result<(), String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("config {}: {e}", path.display()))?;
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| format!("config {}:{}: expected key = value", path.display(), n + 1))?;
            self.apply(k, v)
                .map_err(|e| format!("config {}:{}: {e}", path.display(), n + 1))?;
        }
        Ok(())
    }

    pub fn certify_config(&self) -> CertifyConfig {
        CertifyConfig {
            big_m: self.big_m,
            delta: self.delta,
            svd_tol: self.svd_tol,
            max_retries: self.retries,
        }
    }

    pub fn lyapunov_params(&self) -> LyapunovParams {
        LyapunovParams {
            n_steps: self.n_steps,
            n_replicas: self.n_replicas,
            burn_in: self.burn_in,
        }
    }

    pub fn sweep_config(&self) -> SweepConfig {
        SweepConfig {
            e_min: self.e_min,
            e_max: self.e_max,
            n_grid: self.n_grid,
            certify: self.certify_config(),
            refine_steps: self.refine_steps,
            margin_minima: self.margin_minima,
            lyapunov: (self.lyapunov_every > 0).then(|| LyapunovCheckConfig {
                every: self.lyapunov_every,
                p: self.p,
                params: self.lyapunov_params(),
                seed: self.seed.seed,
            }),
        }
    }

    fn validate_p(&self) -> Result<(), String> {
        if self.p > 0.0 && self.p < 1.0 {
            Ok(())
        } else {
            Err(format!("p must lie in (0, 1), got {}", self.p))
        }
    }

    pub fn validate_certify(&self) -> Result<(), String> {
        if self.energies.is_empty() {
            return Err("certify needs at least one --energy".into());
        }
        if let Some(e) = self.energies.iter().find(|e| !e.is_finite()) {
            return Err(format!("energy must be finite, got {e}"));
        }
        self.certify_config().validate().map_err(|e| e.to_string())
    }

    pub fn validate_sweep(&self) -> Result<(), String> {
        if self.lyapunov_every > 0 {
            self.validate_p()?;
        }
        self.sweep_config().validate().map_err(|e| e.to_string())
    }

    pub fn validate_lyapunov(&self) -> Result<(), String> {
        if self.energies.len() != 1 {
            return Err(format!(
                "lyapunov needs exactly one --energy, got {}",
                self.energies.len()
            ));
        }
        if !self.energies[0].is_finite() {
            return Err(format!("energy must be finite, got {}", self.energies[0]));
        }
        self.validate_p()?;
        self.lyapunov_params().validate().map_err(|e| e.to_string())
    }

    /// The settings that determine a command's results. Output location,
    /// formats and thread count are excluded: they do not change any value.
    pub fn header_config(&self, command: &str) -> Map<String, Value> {
        let mut m = Map::new();
        let certify = |m: &mut Map<String, Value>| {
            m.insert("big_m".into(), json!(self.big_m));
            m.insert("delta".into(), json!(self.delta));
            m.insert("svd_tol".into(), json!(self.svd_tol));
            m.insert("retries".into(), json!(self.retries));
        };
        let lyapunov = |m: &mut Map<String, Value>| {
            m.insert("p".into(), json!(self.p));
            m.insert("steps".into(), json!(self.n_steps));
            m.insert("replicas".into(), json!(self.n_replicas));
            m.insert("burn_in".into(), json!(self.burn_in));
            m.insert("seed".into(), json!(self.seed.seed));
            m.insert("stream".into(), json!(self.seed.stream));
        };
        match command {
            "certify" => {
                m.insert("energies".into(), json!(self.energies));
                certify(&mut m);
            }
            "sweep" => {
                m.insert("emin".into(), json!(self.e_min));
                m.insert("emax".into(), json!(self.e_max));
                m.insert("grid".into(), json!(self.n_grid));
                certify(&mut m);
                m.insert("refine_steps".into(), json!(self.refine_steps));
                m.insert("margin_minima".into(), json!(self.margin_minima));
                m.insert("lyapunov_every".into(), json!(self.lyapunov_every));
                if self.lyapunov_every > 0 {
                    lyapunov(&mut m);
                }
            }
            "lyapunov" => {
                m.insert("energy".into(), json!(self.energies.first()));
                lyapunov(&mut m);
            }
            _ => {}
        }
        m
    }
}
