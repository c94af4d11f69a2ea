//! Batch commands: spectra, efficiency and figure surfaces as CSV, the
//! matching-condition report, and full pipeline simulations.
//!
//! Output is deterministic: floats are printed with 12 significant digits and
//! every CSV starts with a comment line carrying the config hash. Sweeps are
//! evaluated in parallel (capped by `RAMAN_ECHO_THREADS`) and assembled in
//! input order.

use crate::config::{ConfigError, RunConfig};
use crate::dynamics::{run_pipeline, sample_ensemble, DynamicsError};
use crate::params::{
    matched_absorption_coefficient, matching_rabi_ratio, transmission_coefficient, SystemParams,
};
use crate::pulses::{gaussian_mode, FrequencyGrid, PulseError};
use crate::spectral::{
    echo_efficiency, fidelity, matching_check, s_function, ss_function, storage_efficiency,
    SpectralError,
};
use num_complex::Complex64 as C64;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("usage: {0}")]
    Usage(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("i/o failure: {0}")]
    Io(#[from] std::io::Error),
}

impl From<DynamicsError> for CliError {
    fn from(e: DynamicsError) -> Self {
        CliError::Numerical(e.to_string())
    }
}

impl From<SpectralError> for CliError {
    fn from(e: SpectralError) -> Self {
        CliError::Numerical(e.to_string())
    }
}

impl From<PulseError> for CliError {
    fn from(e: PulseError) -> Self {
        CliError::Config(ConfigError::Pulses(e))
    }
}

impl CliError {
    /// Process exit code: 2 for configuration problems, 3 for numerical ones.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Usage(_) => 2,
            CliError::Numerical(_) | CliError::Io(_) => 3,
        }
    }
}

/// `name=start:stop:count` sweep request.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub name: String,
    pub values: Vec<f64>,
}

impl SweepSpec {
    pub fn parse(s: &str) -> Result<Self, CliError> {
        let usage = || {
            CliError::Usage(format!(
                "sweep must look like 'name=start:stop:count', got '{s}'"
            ))
        };
        let (name, range) = s.split_once('=').ok_or_else(usage)?;
        let parts: Vec<&str> = range.split(':').collect();
        if parts.len() != 3 {
            return Err(usage());
        }
        let start: f64 = parts[0].parse().map_err(|_| usage())?;
        let stop: f64 = parts[1].parse().map_err(|_| usage())?;
        let count: usize = parts[2].parse().map_err(|_| usage())?;
        if count < 1 {
            return Err(usage());
        }
        let values = if count == 1 {
            vec![start]
        } else {
            (0..count)
                .map(|i| start + (stop - start) * i as f64 / (count - 1) as f64)
                .collect()
        };
        Ok(Self {
            name: name.trim().to_string(),
            values,
        })
    }
}

/// Map `f` over `items` on up to `RAMAN_ECHO_THREADS` worker threads,
/// returning results in input order.
pub fn par_map<T: Sync, R: Send>(items: &[T], f: impl Fn(&T) -> R + Sync) -> Vec<R> {
    let threads = std::env::var("RAMAN_ECHO_THREADS")
        .ok()
        .and_then(|s| s.parse::<usize>().ok())
        .filter(|&n| n >= 1)
        .unwrap_or_else(|| {
            std::thread::available_parallelism()
                .map(|n| n.get())
                .unwrap_or(1)
        })
        .min(items.len().max(1));
    if threads <= 1 {
        return items.iter().map(&f).collect();
    }
    let next = AtomicUsize::new(0);
    let mut indexed: Vec<(usize, R)> = std::thread::scope(|scope| {
        let handles: Vec<_> = (0..threads)
            .map(|_| {
                scope.spawn(|| {
                    let mut local = Vec::new();
                    loop {
                        let i = next.fetch_add(1, Ordering::Relaxed);
                        if i >= items.len() {
                            break;
                        }
                        local.push((i, f(&items[i])));
                    }
                    local
                })
            })
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().unwrap())
            .collect()
    });
    indexed.sort_by_key(|(i, _)| *i);
    indexed.into_iter().map(|(_, r)| r).collect()
}

/// Format a float with 12 significant digits (deterministic CSV cells).
pub fn fmt_sig12(x: f64) -> String {
    format!("{x:.11e}")
}

/// Write a CSV with the config-hash comment line and header row.
pub fn write_csv(
    path: &Path,
    hash: u64,
    header: &[&str],
    rows: &[Vec<f64>],
) -> Result<(), std::io::Error> {
    let mut text = String::new();
    let _ = writeln!(text, "# config_hash = {hash:016x}");
    let _ = writeln!(text, "{}", header.join(","));
    for row in rows {
        let cells: Vec<String> = row.iter().map(|&x| fmt_sig12(x)).collect();
        let _ = writeln!(text, "{}", cells.join(","));
    }
    std::fs::write(path, text)
}

/// Parameter set realizing a given `(delta_in, gamma_r)` pair at the standard
/// working point (`delta0 = 100`, `|omega1/delta0| = 0.1`, `g_bar = 5e-3`),
/// by solving for the atom number. Used by the figure surfaces, which are
/// functions of `(gamma_r, delta_in, 1/T2)` only.
pub fn params_for(delta_in: f64, gamma_r: f64, t2_inv: f64) -> SystemParams {
    let (ratio, g_bar, delta0): (f64, f64, f64) = (0.1, 5.0e-3, 100.0);
    let n_atoms = gamma_r * delta_in / (2.0 * (ratio * g_bar).powi(2));
    SystemParams::new(
        delta_in,
        t2_inv,
        delta0,
        C64::new(ratio * delta0, 0.0),
        n_atoms,
        g_bar,
    )
    .expect("synthesized parameters are valid")
}

/// `spectra`: S, Z and S^2 on the configured grid; an optional `delta_in`
/// sweep emits a long-format surface with the impedance matching held.
pub fn cmd_spectra(
    cfg: &RunConfig,
    out_dir: &Path,
    sweep: Option<&SweepSpec>,
) -> Result<PathBuf, CliError> {
    let path = out_dir.join("spectra.csv");
    match sweep {
        None => {
            let p = &cfg.system;
            let rows: Vec<Vec<f64>> = cfg
                .grid
                .nodes()
                .map(|nu| {
                    let s = s_function(nu, p);
                    let s2 = s * s;
                    vec![nu, s.re, s.im, s.norm_sqr(), s2.re, s2.im]
                })
                .collect();
            write_csv(
                &path,
                cfg.hash,
                &["nu", "re_s", "im_s", "z", "re_s2", "im_s2"],
                &rows,
            )?;
        }
        Some(sweep) => {
            if sweep.name != "delta_in" {
                return Err(CliError::Usage(format!(
                    "spectra sweeps over 'delta_in', got '{}'",
                    sweep.name
                )));
            }
            let per: Vec<Vec<Vec<f64>>> = par_map(&sweep.values, |&delta_in| {
                let p = params_for(delta_in, 1.0, cfg.system.t2_inv);
                cfg.grid
                    .nodes()
                    .map(|nu| {
                        let s = s_function(nu, &p);
                        let s2 = s * s;
                        vec![delta_in, nu, s.re, s.im, s.norm_sqr(), s2.re, s2.im]
                    })
                    .collect()
            });
            let rows: Vec<Vec<f64>> = per.into_iter().flatten().collect();
            write_csv(
                &path,
                cfg.hash,
                &["delta_in", "nu", "re_s", "im_s", "z", "re_s2", "im_s2"],
                &rows,
            )?;
        }
    }
    Ok(path)
}

/// `efficiency`: storage/echo efficiency and fidelity versus the input
/// spectral width.
pub fn cmd_efficiency(
    cfg: &RunConfig,
    out_dir: &Path,
    sweep: Option<&SweepSpec>,
) -> Result<PathBuf, CliError> {
    let widths: Vec<f64> = match sweep {
        Some(s) if s.name == "dw_f" => s.values.clone(),
        Some(s) => {
            return Err(CliError::Usage(format!(
                "efficiency sweeps over 'dw_f', got '{}'",
                s.name
            )))
        }
        None => (1..=50).map(|i| 0.01 * i as f64).collect(),
    };
    let p = cfg.system.clone();
    let grid = cfg.grid.clone();
    let rows: Vec<Vec<f64>> = par_map(&widths, |&dw| {
        let mode = gaussian_mode(&grid, dw, 0.0).expect("sweep width fits the grid");
        if mode.edge_mass() > 1e-4 {
            eprintln!(
                "warning: dw_f = {dw} loses {:.1e} of the mode norm to grid truncation",
                mode.edge_mass()
            );
        }
        let q_st = storage_efficiency(&mode, &p);
        let q_e = echo_efficiency(&mode, &p);
        let f = fidelity(&mode, &p).unwrap_or(0.0);
        vec![dw, q_st, q_e, f]
    });
    let path = out_dir.join("efficiency.csv");
    write_csv(&path, cfg.hash, &["dw_f", "q_st", "q_e", "fidelity"], &rows)?;
    Ok(path)
}

/// `match`: matching-condition residuals plus, when `[cavity]` is present,
/// the transmission-coefficient working numbers.
pub fn cmd_match(cfg: &RunConfig) -> Result<String, CliError> {
    let mut out = String::new();
    let p = &cfg.system;
    let rep = matching_check(p);
    let _ = writeln!(out, "gamma_r                 = {}", fmt_sig12(rep.gamma_r));
    let _ = writeln!(
        out,
        "impedance residual      = {}  ({})",
        fmt_sig12(rep.impedance_residual),
        if rep.impedance_ok { "matched" } else { "off" }
    );
    let _ = writeln!(
        out,
        "spectral residual       = {}  ({})",
        fmt_sig12(rep.spectral_residual),
        if rep.spectral_ok { "matched" } else { "off" }
    );
    match matching_rabi_ratio(p) {
        Ok(r) => {
            let _ = writeln!(out, "matching |omega1/delta0| = {}", fmt_sig12(r));
        }
        Err(e) => {
            let _ = writeln!(out, "matching |omega1/delta0| unreachable: {e}");
        }
    }
    if let (Some(geom), Some(gsi)) = (cfg.cavity, p.gamma1_si) {
        let t = transmission_coefficient(&geom, gsi);
        let _ = writeln!(
            out,
            "mirror transmission T   = {}  (nominal 2 L gamma1 / c; 0.7e-3 at L = 0.1 cm, gamma1 = 1e8 1/s)",
            fmt_sig12(t)
        );
        let alpha_r = matched_absorption_coefficient(&geom, gsi);
        let _ = writeln!(out, "matched alpha_r         = {} 1/cm", fmt_sig12(alpha_r));
        let ratio2 = p.adiabaticity_ratio().powi(2);
        if ratio2 > 0.0 {
            // alpha_13 = alpha_r delta_in / (|omega1/delta0|^2 Delta_in13):
            // print the coefficient of delta_in / Delta_in13
            let coeff = alpha_r / ratio2;
            let _ = writeln!(
                out,
                "optical line condition  : alpha_13 = {} * (delta_in / Delta_in13) 1/cm",
                fmt_sig12(coeff)
            );
        }
    }
    for w in p.warnings() {
        let _ = writeln!(out, "warning: {w}");
    }
    Ok(out)
}

/// `simulate`: full pipeline run; writes storage/retrieval trajectories and
/// the per-mode report.
pub fn cmd_simulate(cfg: &RunConfig, out_dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    let train = cfg.train()?;
    let ens = sample_ensemble(cfg.k_atoms, cfg.system.delta_in, cfg.sampling)?;
    let result = run_pipeline(&cfg.system, &ens, &train, cfg.t0, &cfg.pipeline_options())?;

    let traj_rows = |traj: &crate::dynamics::Trajectory| -> Vec<Vec<f64>> {
        traj.t
            .iter()
            .enumerate()
            .map(|(i, &t)| vec![t, traj.a[i].re, traj.a[i].im, traj.b_out[i].norm_sqr()])
            .collect()
    };
    let header = ["t", "re_a", "im_a", "b_out_sq"];
    let storage_path = out_dir.join("storage.csv");
    write_csv(
        &storage_path,
        cfg.hash,
        &header,
        &traj_rows(&result.storage),
    )?;
    let echo_path = out_dir.join("echo.csv");
    write_csv(&echo_path, cfg.hash, &header, &traj_rows(&result.retrieval))?;

    let rep = &result.report;
    let report_rows: Vec<Vec<f64>> = (0..rep.q_e.len())
        .map(|k| {
            vec![
                k as f64,
                rep.q_e[k],
                rep.fidelity[k],
                rep.peak_time[k],
                rep.expected_time[k],
                rep.decay_factor,
            ]
        })
        .collect();
    let report_path = out_dir.join("report.csv");
    write_csv(
        &report_path,
        cfg.hash,
        &[
            "mode",
            "q_e",
            "fidelity",
            "peak_time",
            "expected_time",
            "decay_factor",
        ],
        &report_rows,
    )?;
    Ok(vec![storage_path, echo_path, report_path])
}

pub const FIGURE_IDS: [u32; 6] = [6, 7, 8, 9, 10, 11];

/// `figure`: canonical data surfaces. 6/7 are Im S^2 and 8/9 are Z over
/// (nu, delta_in) at impedance matching; 10/11 are echo efficiency and
/// fidelity versus the input width at the doubly matched point.
pub fn cmd_figure(cfg: &RunConfig, out_dir: &Path, fig: u32) -> Result<PathBuf, CliError> {
    if !FIGURE_IDS.contains(&fig) {
        return Err(CliError::Usage(format!(
            "unknown figure id {fig}; valid ids: {FIGURE_IDS:?}"
        )));
    }
    let t2 = cfg.system.t2_inv;
    let path = out_dir.join(format!("fig{fig}.csv"));
    match fig {
        6..=9 => {
            let delta_ins: Vec<f64> = if fig == 6 || fig == 8 {
                vec![0.1, 0.2, 0.3, 0.4, 0.5]
            } else {
                vec![0.5, 1.0, 2.0, 5.0]
            };
            let nu_grid: Vec<f64> = (0..=200).map(|i| -0.5 + i as f64 / 200.0).collect();
            let per: Vec<Vec<Vec<f64>>> = par_map(&delta_ins, |&din| {
                let p = params_for(din, 1.0, t2);
                nu_grid
                    .iter()
                    .map(|&nu| {
                        let val = if fig <= 7 {
                            let s = s_function(nu, &p);
                            (s * s).im
                        } else {
                            ss_function(nu, &p)
                        };
                        vec![nu, din, val]
                    })
                    .collect()
            });
            let rows: Vec<Vec<f64>> = per.into_iter().flatten().collect();
            let col = if fig <= 7 { "im_s_squared" } else { "z" };
            write_csv(
                &path,
                cfg.hash,
                &["nu_over_gamma1", "delta_in_over_gamma1", col],
                &rows,
            )?;
        }
        10 | 11 => {
            let p = params_for(0.5, 1.0, t2);
            let grid = FrequencyGrid::default_analysis();
            let widths: Vec<f64> = (1..=50).map(|i| 0.01 * i as f64).collect();
            let rows: Vec<Vec<f64>> = par_map(&widths, |&dw| {
                let mode = gaussian_mode(&grid, dw, 0.0).expect("grid covers sweep");
                let val = if fig == 10 {
                    echo_efficiency(&mode, &p)
                } else {
                    fidelity(&mode, &p).unwrap_or(0.0)
                };
                vec![dw, val]
            });
            let col = if fig == 10 { "q_e" } else { "fidelity" };
            write_csv(&path, cfg.hash, &["dw_f_over_gamma1", col], &rows)?;
        }
        _ => unreachable!(),
    }
    Ok(path)
}
