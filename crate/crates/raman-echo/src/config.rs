//! Run configuration: a flat `key = value` text format with bracketed
//! section headers, parsed with line-numbered diagnostics.
//!
//! ```text
//! [system]
//! delta_in = 0.5
//! t2_inv = 0.0
//! delta0 = 100.0
//! omega1 = 10.0
//! n_atoms = 1.0e6
//! g_bar = 5.0e-3
//!
//! [grid]
//! nu_max = 10.0
//! n_points = 4001
//!
//! [pulses]
//! mode = gaussian 0.1 0.0
//!
//! [pipeline]
//! t0 = 60.0
//! k_atoms = 2001
//! ```

use crate::dynamics::{PipelineOptions, SamplingScheme, SimOptions, DEFAULT_K_ATOMS};
use crate::params::{CavityGeometry, ParamError, SystemParams};
use crate::pulses::{gaussian_mode, FrequencyGrid, ModeSpectrum, PulseError, PulseTrain};
use num_complex::Complex64 as C64;
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{file}:{line}: {msg}")]
    Parse {
        file: String,
        line: usize,
        msg: String,
    },
    #[error("missing [{section}] {key}")]
    Missing {
        section: &'static str,
        key: &'static str,
    },
    #[error("[system] invalid: {0}")]
    Params(#[from] ParamError),
    #[error("[grid]/[pulses] invalid: {0}")]
    Pulses(#[from] PulseError),
}

#[derive(Debug, Clone, PartialEq)]
struct Entry {
    line: usize,
    value: String,
}

/// Parsed but untyped configuration: section -> key -> last entry, plus the
/// repeated `mode =` lines of `[pulses]` in order.
#[derive(Debug, Clone, Default)]
pub struct RawConfig {
    file: String,
    sections: BTreeMap<String, BTreeMap<String, Entry>>,
    modes: Vec<Entry>,
    /// FNV-1a hash of the raw bytes, recorded in every CSV emitted.
    pub hash: u64,
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

impl RawConfig {
    pub fn parse(file: &str, text: &str) -> Result<Self, ConfigError> {
        let mut cfg = RawConfig {
            file: file.to_string(),
            hash: fnv1a(text.as_bytes()),
            ..Default::default()
        };
        let mut section = String::new();
        for (i, raw_line) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = match raw_line.find('#') {
                Some(p) => &raw_line[..p],
                None => raw_line,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[') {
                let Some(name) = name.strip_suffix(']') else {
                    return Err(ConfigError::Parse {
                        file: file.into(),
                        line: line_no,
                        msg: format!("malformed section header '{raw_line}'"),
                    });
                };
                section = name.trim().to_string();
                cfg.sections.entry(section.clone()).or_default();
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(ConfigError::Parse {
                    file: file.into(),
                    line: line_no,
                    msg: format!("expected 'key = value', got '{raw_line}'"),
                });
            };
            if section.is_empty() {
                return Err(ConfigError::Parse {
                    file: file.into(),
                    line: line_no,
                    msg: "entry before any [section] header".into(),
                });
            }
            let entry = Entry {
                line: line_no,
                value: value.trim().to_string(),
            };
            let key = key.trim().to_string();
            if section == "pulses" && key == "mode" {
                cfg.modes.push(entry);
            } else {
                cfg.sections.get_mut(&section).unwrap().insert(key, entry);
            }
        }
        Ok(cfg)
    }

    fn entry(&self, section: &'static str, key: &'static str) -> Option<&Entry> {
        self.sections.get(section).and_then(|s| s.get(key))
    }

    fn f64_opt(
        &self,
        section: &'static str,
        key: &'static str,
    ) -> Result<Option<f64>, ConfigError> {
        match self.entry(section, key) {
            None => Ok(None),
            Some(e) => e
                .value
                .parse::<f64>()
                .map(Some)
                .map_err(|_| ConfigError::Parse {
                    file: self.file.clone(),
                    line: e.line,
                    msg: format!("expected a number for {section}.{key}, got '{}'", e.value),
                }),
        }
    }

    fn f64_req(&self, section: &'static str, key: &'static str) -> Result<f64, ConfigError> {
        self.f64_opt(section, key)?
            .ok_or(ConfigError::Missing { section, key })
    }

    fn usize_opt(
        &self,
        section: &'static str,
        key: &'static str,
    ) -> Result<Option<usize>, ConfigError> {
        match self.entry(section, key) {
            None => Ok(None),
            Some(e) => e
                .value
                .parse::<usize>()
                .map(Some)
                .map_err(|_| ConfigError::Parse {
                    file: self.file.clone(),
                    line: e.line,
                    msg: format!("expected an integer for {section}.{key}, got '{}'", e.value),
                }),
        }
    }

    fn bool_opt(&self, section: &'static str, key: &'static str) -> Result<bool, ConfigError> {
        match self.entry(section, key) {
            None => Ok(false),
            Some(e) => match e.value.as_str() {
                "true" | "1" | "yes" => Ok(true),
                "false" | "0" | "no" => Ok(false),
                other => Err(ConfigError::Parse {
                    file: self.file.clone(),
                    line: e.line,
                    msg: format!("expected a boolean for {section}.{key}, got '{other}'"),
                }),
            },
        }
    }
}

/// One pulse declaration: `mode = gaussian <dw> <tau>`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PulseSpec {
    pub dw: f64,
    pub tau: f64,
}

/// Fully typed run configuration.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub system: SystemParams,
    pub grid: FrequencyGrid,
    pub pulses: Vec<PulseSpec>,
    pub t0: f64,
    pub k_atoms: usize,
    pub sampling: SamplingScheme,
    pub sim: SimOptions,
    pub settle: f64,
    pub cavity: Option<CavityGeometry>,
    pub hash: u64,
}

impl RunConfig {
    pub fn from_text(file: &str, text: &str) -> Result<Self, ConfigError> {
        let raw = RawConfig::parse(file, text)?;

        let delta_in = raw.f64_req("system", "delta_in")?;
        let t2_inv = raw.f64_opt("system", "t2_inv")?.unwrap_or(0.0);
        let delta0 = raw.f64_req("system", "delta0")?;
        let omega1_re = raw.f64_req("system", "omega1")?;
        let omega1_im = raw.f64_opt("system", "omega1_im")?.unwrap_or(0.0);
        let n_atoms = raw.f64_req("system", "n_atoms")?;
        let g_bar = raw.f64_req("system", "g_bar")?;
        let allow = raw.bool_opt("system", "allow_nonadiabatic")?;
        let mut system = SystemParams::with_options(
            delta_in,
            t2_inv,
            delta0,
            C64::new(omega1_re, omega1_im),
            n_atoms,
            g_bar,
            allow,
        )?;
        if let Some(gsi) = raw.f64_opt("system", "gamma1_si")? {
            system = system.with_gamma1_si(gsi);
        }

        let nu_max = raw.f64_opt("grid", "nu_max")?.unwrap_or(10.0);
        let n_points = raw.usize_opt("grid", "n_points")?.unwrap_or(4001);
        let grid = FrequencyGrid::symmetric(nu_max, n_points)?;

        let mut pulses = Vec::new();
        for e in &raw.modes {
            let parts: Vec<&str> = e.value.split_whitespace().collect();
            let bad = |msg: String| ConfigError::Parse {
                file: raw.file.clone(),
                line: e.line,
                msg,
            };
            if parts.len() != 3 {
                return Err(bad(format!(
                    "expected 'mode = gaussian <dw> <tau>', got '{}'",
                    e.value
                )));
            }
            if parts[0] != "gaussian" {
                return Err(bad(format!("unknown pulse shape '{}'", parts[0])));
            }
            let dw: f64 = parts[1]
                .parse()
                .map_err(|_| bad(format!("bad spectral width '{}'", parts[1])))?;
            let tau: f64 = parts[2]
                .parse()
                .map_err(|_| bad(format!("bad arrival time '{}'", parts[2])))?;
            pulses.push(PulseSpec { dw, tau });
        }
        if pulses.is_empty() {
            pulses.push(PulseSpec { dw: 0.1, tau: 0.0 });
        }

        let t0 = raw.f64_opt("pipeline", "t0")?.unwrap_or(60.0);
        let k_atoms = raw
            .usize_opt("pipeline", "k_atoms")?
            .unwrap_or(DEFAULT_K_ATOMS);
        let truncation = raw.f64_opt("pipeline", "truncation")?.unwrap_or(50.0);
        let sim = SimOptions {
            rel_tol: raw.f64_opt("pipeline", "rel_tol")?.unwrap_or(1e-9),
            output_dt: raw.f64_opt("pipeline", "output_dt")?.unwrap_or(0.02),
            ..Default::default()
        };
        let settle = raw.f64_opt("pipeline", "settle")?.unwrap_or(5.0);

        let cavity = match (
            raw.f64_opt("cavity", "length_cm")?,
            raw.f64_opt("cavity", "fill_chi")?,
        ) {
            (Some(l), chi) => Some(CavityGeometry::new(l, chi.unwrap_or(1.0))?),
            (None, _) => None,
        };

        Ok(RunConfig {
            system,
            grid,
            pulses,
            t0,
            k_atoms,
            sampling: SamplingScheme { truncation },
            sim,
            settle,
            cavity,
            hash: raw.hash,
        })
    }

    pub fn from_file(path: &std::path::Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Parse {
            file: path.display().to_string(),
            line: 0,
            msg: format!("cannot read config: {e}"),
        })?;
        Self::from_text(&path.display().to_string(), &text)
    }

    /// Realize the configured pulses on the configured grid.
    pub fn train(&self) -> Result<PulseTrain, ConfigError> {
        let modes: Result<Vec<ModeSpectrum>, PulseError> = self
            .pulses
            .iter()
            .map(|s| gaussian_mode(&self.grid, s.dw, s.tau))
            .collect();
        Ok(PulseTrain::new(modes?)?)
    }

    pub fn pipeline_options(&self) -> PipelineOptions {
        PipelineOptions {
            sim: self.sim.clone(),
            settle: self.settle,
            ..Default::default()
        }
    }
}
