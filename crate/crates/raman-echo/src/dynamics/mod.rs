//! Time-domain integration of the linearized light-atom equations over a
//! discretized inhomogeneous ensemble.
//!
//! This is the brute-force counterpart of [`crate::spectral`]: the effective
//! two-equation model
//!
//! `da/dt   = -gamma1/2 a + i (omega1/delta0) sum_j g_j N_j p12_j + sqrt(gamma1) b_in(t)`
//! `dp12_j/dt = -i (delta_j - i/T2) p12_j + i (omega1* g_j*/delta0) a`
//!
//! and the full three-level model that keeps the optical coherences `p13_j`.
//! Operator equations are integrated as classical complex amplitudes; every
//! implemented equation is linear in the operators, so amplitude transfer
//! equals the operator transfer exactly for the quantities reported here
//! (efficiencies, waveforms, fidelities).
//!
//! Each isochromat `j` stands for `n_atoms * mass_factor * w_j` physical
//! atoms; `mass_factor` is the Lorentzian mass captured by the truncated
//! sampling, kept out of the (unit-sum) weights so that the discrete line
//! kernel converges to the untruncated closed-form integral used by the
//! analytic module.

pub mod integrator;

use crate::params::SystemParams;
use crate::pulses::{spectrum_to_time, PulseError, PulseTrain, TimeGrid};
use crate::rephasing::sequence_map;
use integrator::{rk4_fixed, Dopri5, IntegratorError};
use num_complex::Complex64 as C64;
use std::f64::consts::PI;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DynamicsError {
    #[error("k_atoms must be odd so the zero-detuning isochromat is sampled, got {0}")]
    EvenAtoms(usize),
    #[error("k_atoms must be at least 3, got {0}")]
    TooFewAtoms(usize),
    #[error("truncation must be positive, got {0}")]
    BadTruncation(f64),
    #[error("time span must be increasing")]
    BadTimeSpan,
    #[error("initial coherence length {got} does not match ensemble size {want}")]
    SizeMismatch { got: usize, want: usize },
    #[error(
        "storage time t0 = {t0} too short: echo of the first mode would fall inside the \
         rephasing dwell; need t0 >= {required:.3}"
    )]
    PipelineTiming { t0: f64, required: f64 },
    #[error(transparent)]
    Integrator(#[from] IntegratorError),
    #[error(transparent)]
    Pulse(#[from] PulseError),
}

/// Discretized inhomogeneous ensemble: isochromat detunings with quadrature
/// weights (summing to one) and per-isochromat coupling factors relative to
/// the r.m.s. coupling `g_bar`.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleSample {
    detunings: Vec<f64>,
    weights: Vec<f64>,
    coupling_factors: Vec<C64>,
    mass_factor: f64,
}

/// Sampling scheme for [`sample_ensemble`]: inverse-CDF stratification of the
/// Lorentzian truncated at `truncation * delta_in`, midpoint node per
/// stratum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SamplingScheme {
    pub truncation: f64,
}

impl Default for SamplingScheme {
    fn default() -> Self {
        Self { truncation: 50.0 }
    }
}

/// Number of isochromats used by default in oracle-grade runs.
pub const DEFAULT_K_ATOMS: usize = 2001;

/// Stratified inverse-CDF sample of the Lorentzian line
/// `G(delta/delta_in) = delta_in / (pi (delta^2 + delta_in^2))`.
pub fn sample_ensemble(
    k_atoms: usize,
    delta_in: f64,
    scheme: SamplingScheme,
) -> Result<EnsembleSample, DynamicsError> {
    if k_atoms < 3 {
        return Err(DynamicsError::TooFewAtoms(k_atoms));
    }
    if k_atoms.is_multiple_of(2) {
        return Err(DynamicsError::EvenAtoms(k_atoms));
    }
    if !(scheme.truncation > 0.0) {
        return Err(DynamicsError::BadTruncation(scheme.truncation));
    }
    // CDF of the unit Lorentzian: F(x) = 1/2 + atan(x)/pi
    let f_hi = 0.5 + scheme.truncation.atan() / PI;
    let f_lo = 1.0 - f_hi;
    let mass_factor = f_hi - f_lo;
    let k = k_atoms as f64;
    let mut detunings = Vec::with_capacity(k_atoms);
    for j in 0..k_atoms {
        let u = (j as f64 + 0.5) / k;
        let p = f_lo + u * mass_factor;
        detunings.push(delta_in * (PI * (p - 0.5)).tan());
    }
    // pin the central isochromat exactly on resonance
    detunings[k_atoms / 2] = 0.0;
    Ok(EnsembleSample {
        detunings,
        weights: vec![1.0 / k; k_atoms],
        coupling_factors: vec![C64::new(1.0, 0.0); k_atoms],
        mass_factor,
    })
}

impl EnsembleSample {
    pub fn len(&self) -> usize {
        self.detunings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.detunings.is_empty()
    }

    pub fn detunings(&self) -> &[f64] {
        &self.detunings
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn coupling_factors(&self) -> &[C64] {
        &self.coupling_factors
    }

    /// Lorentzian mass captured by the truncated sample.
    pub fn mass_factor(&self) -> f64 {
        self.mass_factor
    }

    /// Replace the coupling factors, e.g. to study standing-wave averaging
    /// with factors `cos(k r_j)`.
    pub fn set_coupling_factors(&mut self, factors: Vec<C64>) {
        assert_eq!(factors.len(), self.len());
        self.coupling_factors = factors;
    }

    /// Discrete counterpart of the closed-form line integral
    /// `integral ddelta G(delta/delta_in)/(delta - nu - i/T2)`:
    /// `mass_factor * sum_j w_j / (delta_j - nu - i/T2)`.
    pub fn weighted_line_sum(&self, nu: f64, t2_inv: f64) -> C64 {
        let mut acc = C64::new(0.0, 0.0);
        for (&d, &w) in self.detunings.iter().zip(&self.weights) {
            acc += w / C64::new(d - nu, -t2_inv);
        }
        self.mass_factor * acc
    }

    /// Effective atom count carried by isochromat `j`.
    fn atom_count(&self, n_atoms: f64, j: usize) -> f64 {
        n_atoms * self.mass_factor * self.weights[j]
    }
}

/// Time series produced by the simulators. `b_out = sqrt(gamma1) a - b_in`
/// at every node (with `b_in = 0` during retrieval).
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub t: Vec<f64>,
    pub a: Vec<C64>,
    pub b_in: Vec<C64>,
    pub b_out: Vec<C64>,
    /// Thinned per-isochromat coherence snapshots `(t, p12, p13)`.
    pub snapshots: Vec<CoherenceSnapshot>,
    pub final_p12: Vec<C64>,
    pub final_p13: Option<Vec<C64>>,
}

#[derive(Debug, Clone)]
pub struct CoherenceSnapshot {
    pub t: f64,
    pub p12: Vec<C64>,
    pub p13: Option<Vec<C64>>,
}

impl Trajectory {
    /// Trapezoid energy of the output field over the stored window.
    pub fn output_energy(&self) -> f64 {
        trapz(&self.t, |i| self.b_out[i].norm_sqr())
    }

    /// Trapezoid energy of the input field over the stored window.
    pub fn input_energy(&self) -> f64 {
        trapz(&self.t, |i| self.b_in[i].norm_sqr())
    }

    /// Stored spin excitation `sum_j N_j |p12_j|^2` at the final node.
    pub fn stored_excitation(&self, p: &SystemParams, ens: &EnsembleSample) -> f64 {
        self.final_p12
            .iter()
            .enumerate()
            .map(|(j, c)| ens.atom_count(p.n_atoms, j) * c.norm_sqr())
            .sum()
    }
}

fn trapz(t: &[f64], f: impl Fn(usize) -> f64) -> f64 {
    let mut acc = 0.0;
    for i in 1..t.len() {
        acc += 0.5 * (t[i] - t[i - 1]) * (f(i) + f(i - 1));
    }
    acc
}

/// Integration controls shared by the simulators.
#[derive(Debug, Clone)]
pub struct SimOptions {
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Spacing of the output/observation grid.
    pub output_dt: f64,
    /// Store a coherence snapshot every this many output nodes (`None`
    /// keeps only the final state).
    pub snapshot_stride: Option<usize>,
    /// When set, integrate with fixed-step RK4 using this step instead of the
    /// adaptive driver (convergence studies).
    pub fixed_step: Option<f64>,
    pub max_steps: usize,
}

impl Default for SimOptions {
    fn default() -> Self {
        Self {
            rel_tol: 1e-9,
            abs_tol: 1e-14,
            output_dt: 0.02,
            snapshot_stride: None,
            fixed_step: None,
            max_steps: 20_000_000,
        }
    }
}

fn output_nodes(t_span: (f64, f64), dt: f64) -> Result<Vec<f64>, DynamicsError> {
    let (t0, t1) = t_span;
    if !(t1 > t0) {
        return Err(DynamicsError::BadTimeSpan);
    }
    let n = ((t1 - t0) / dt).ceil() as usize;
    Ok((0..=n)
        .map(|i| t0 + (t1 - t0) * i as f64 / n as f64)
        .collect())
}

/// Instantaneous adiabatic value of the optical coherence,
/// `p13 = (g_j* a + omega1 p12) / delta0`.
pub fn adiabatic_p13(a: C64, p12: C64, p: &SystemParams, g_j: C64) -> C64 {
    (g_j.conj() * a + p.omega1 * p12) / p.big_delta0
}

struct EffectiveRhs {
    forward: Vec<C64>,  // i (omega1/delta0) g_j N_j
    backward: Vec<C64>, // i (omega1 g_j)* / delta0
    lambda: Vec<C64>,   // -i delta_j - 1/T2
}

impl EffectiveRhs {
    fn new(p: &SystemParams, ens: &EnsembleSample) -> Self {
        let k = ens.len();
        let mut forward = Vec::with_capacity(k);
        let mut backward = Vec::with_capacity(k);
        let mut lambda = Vec::with_capacity(k);
        for j in 0..k {
            let g_j = p.g_bar * ens.coupling_factors[j];
            forward.push(C64::i() * p.omega1 / p.big_delta0 * g_j * ens.atom_count(p.n_atoms, j));
            backward.push(C64::i() * (p.omega1 * g_j).conj() / p.big_delta0);
            lambda.push(C64::new(-p.t2_inv, -ens.detunings[j]));
        }
        Self {
            forward,
            backward,
            lambda,
        }
    }

    fn eval(&self, y: &[C64], drive: C64, dy: &mut [C64]) {
        let a = y[0];
        let mut sum = C64::new(0.0, 0.0);
        for j in 0..self.lambda.len() {
            let p12 = y[1 + j];
            sum += self.forward[j] * p12;
            dy[1 + j] = self.lambda[j] * p12 + self.backward[j] * a;
        }
        dy[0] = -0.5 * a + sum + drive;
    }
}

fn run_effective(
    p: &SystemParams,
    ens: &EnsembleSample,
    b_in: &dyn Fn(f64) -> C64,
    y0: Vec<C64>,
    t_span: (f64, f64),
    opts: &SimOptions,
) -> Result<Trajectory, DynamicsError> {
    let rhs = EffectiveRhs::new(p, ens);
    let nodes = output_nodes(t_span, opts.output_dt)?;
    let k = ens.len();

    let mut t_out = Vec::with_capacity(nodes.len());
    let mut a_out = Vec::with_capacity(nodes.len());
    let mut b_in_out = Vec::with_capacity(nodes.len());
    let mut snapshots = Vec::new();
    let stride = opts.snapshot_stride;
    let observe = |idx: usize, t: f64, y: &[C64]| {
        t_out.push(t);
        a_out.push(y[0]);
        b_in_out.push(b_in(t));
        if let Some(s) = stride {
            if idx.is_multiple_of(s) {
                snapshots.push(CoherenceSnapshot {
                    t,
                    p12: y[1..].to_vec(),
                    p13: None,
                });
            }
        }
    };
    let f = |t: f64, y: &[C64], dy: &mut [C64]| rhs.eval(y, b_in(t), dy);

    let y_final = match opts.fixed_step {
        Some(h) => {
            let substeps = (opts.output_dt / h).ceil().max(1.0) as usize;
            rk4_fixed(f, &y0, &nodes, substeps, observe)?
        }
        None => {
            let solver = Dopri5 {
                rel_tol: opts.rel_tol,
                abs_tol: opts.abs_tol,
                max_steps: opts.max_steps,
                ..Default::default()
            };
            solver.integrate(f, &y0, &nodes, observe)?
        }
    };

    let b_out = a_out.iter().zip(&b_in_out).map(|(a, b)| a - b).collect();
    Ok(Trajectory {
        t: t_out,
        a: a_out,
        b_in: b_in_out,
        b_out,
        snapshots,
        final_p12: y_final[1..=k].to_vec(),
        final_p13: None,
    })
}

/// Integrate the effective two-equation model during storage: the control
/// field is on at constant `omega1` and the signal `b_in(t)` drives the
/// cavity. The state starts empty.
pub fn simulate_storage_effective(
    p: &SystemParams,
    ens: &EnsembleSample,
    b_in: &dyn Fn(f64) -> C64,
    t_span: (f64, f64),
    opts: &SimOptions,
) -> Result<Trajectory, DynamicsError> {
    let y0 = vec![C64::new(0.0, 0.0); 1 + ens.len()];
    run_effective(p, ens, b_in, y0, t_span, opts)
}

/// Source-free retrieval: reading control equals the writing control, the
/// cavity starts empty and the spin coherences start from `initial_p12`.
/// The output field is `b_out(t) = sqrt(gamma1) a(t)`.
pub fn simulate_retrieval(
    p: &SystemParams,
    ens: &EnsembleSample,
    initial_p12: &[C64],
    t_span: (f64, f64),
    opts: &SimOptions,
) -> Result<Trajectory, DynamicsError> {
    if initial_p12.len() != ens.len() {
        return Err(DynamicsError::SizeMismatch {
            got: initial_p12.len(),
            want: ens.len(),
        });
    }
    let mut y0 = Vec::with_capacity(1 + ens.len());
    y0.push(C64::new(0.0, 0.0));
    y0.extend_from_slice(initial_p12);
    run_effective(p, ens, &|_| C64::new(0.0, 0.0), y0, t_span, opts)
}

/// Integrate the full three-level model (cavity, optical coherence, spin
/// coherence) during storage.
///
/// The bare spin detunings are offset by the uniform control Stark shift
/// `|omega1|^2/delta0` and the cavity by the collective dispersive shift
/// `sum_j N_j |g_j|^2 / delta0`, so that the effective two-photon detunings
/// and cavity resonance agree with the effective model for the same
/// ensemble. `delta31` optionally adds optical inhomogeneous broadening.
pub fn simulate_storage_full(
    p: &SystemParams,
    ens: &EnsembleSample,
    b_in: &dyn Fn(f64) -> C64,
    t_span: (f64, f64),
    delta31: Option<&[f64]>,
    opts: &SimOptions,
) -> Result<Trajectory, DynamicsError> {
    let k = ens.len();
    if let Some(d31) = delta31 {
        if d31.len() != k {
            return Err(DynamicsError::SizeMismatch {
                got: d31.len(),
                want: k,
            });
        }
    }
    let stark = p.omega1.norm_sqr() / p.big_delta0;
    let mut g = Vec::with_capacity(k);
    let mut lam13 = Vec::with_capacity(k);
    let mut lam12 = Vec::with_capacity(k);
    let mut forward = Vec::with_capacity(k);
    let mut cavity_shift = 0.0;
    for j in 0..k {
        let g_j = p.g_bar * ens.coupling_factors[j];
        let n_j = ens.atom_count(p.n_atoms, j);
        let d31_j = delta31.map_or(0.0, |d| d[j]);
        g.push(g_j);
        forward.push(C64::i() * g_j * n_j);
        lam13.push(C64::new(0.0, -(d31_j + p.big_delta0)));
        lam12.push(C64::new(-p.t2_inv, -(ens.detunings[j] + stark)));
        cavity_shift += n_j * g_j.norm_sqr() / p.big_delta0;
    }
    let omega1 = p.omega1;
    let cav = C64::new(-0.5, -cavity_shift);

    let nodes = output_nodes(t_span, opts.output_dt)?;
    let mut t_out = Vec::with_capacity(nodes.len());
    let mut a_out = Vec::with_capacity(nodes.len());
    let mut b_in_out = Vec::with_capacity(nodes.len());
    let mut snapshots = Vec::new();
    let stride = opts.snapshot_stride;
    let observe = |idx: usize, t: f64, y: &[C64]| {
        t_out.push(t);
        a_out.push(y[0]);
        b_in_out.push(b_in(t));
        if let Some(s) = stride {
            if idx.is_multiple_of(s) {
                snapshots.push(CoherenceSnapshot {
                    t,
                    p12: y[1 + k..].to_vec(),
                    p13: Some(y[1..1 + k].to_vec()),
                });
            }
        }
    };
    // state layout: [a, p13_0..k, p12_0..k]
    let f = |t: f64, y: &[C64], dy: &mut [C64]| {
        let a = y[0];
        let mut sum = C64::new(0.0, 0.0);
        for j in 0..k {
            let p13 = y[1 + j];
            let p12 = y[1 + k + j];
            sum += forward[j] * p13;
            dy[1 + j] = lam13[j] * p13 + C64::i() * (g[j].conj() * a + omega1 * p12);
            dy[1 + k + j] = lam12[j] * p12 + C64::i() * omega1.conj() * p13;
        }
        dy[0] = cav * a + sum + b_in(t);
    };

    let y0 = vec![C64::new(0.0, 0.0); 1 + 2 * k];
    let y_final = match opts.fixed_step {
        Some(h) => {
            let substeps = (opts.output_dt / h).ceil().max(1.0) as usize;
            rk4_fixed(f, &y0, &nodes, substeps, observe)?
        }
        None => {
            let solver = Dopri5 {
                rel_tol: opts.rel_tol,
                abs_tol: opts.abs_tol,
                max_steps: opts.max_steps,
                ..Default::default()
            };
            solver.integrate(f, &y0, &nodes, observe)?
        }
    };

    let b_out = a_out.iter().zip(&b_in_out).map(|(a, b)| a - b).collect();
    Ok(Trajectory {
        t: t_out,
        a: a_out,
        b_in: b_in_out,
        b_out,
        snapshots,
        final_p12: y_final[1 + k..].to_vec(),
        final_p13: Some(y_final[1..1 + k].to_vec()),
    })
}

/// Pipeline controls.
#[derive(Debug, Clone)]
pub struct PipelineOptions {
    pub sim: SimOptions,
    /// Settling margin after the last input pulse before the control handoff.
    pub settle: f64,
    /// Half-support assigned to a mode of spectral width `dw`: `pad_factor/dw`.
    pub pad_factor: f64,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        Self {
            sim: SimOptions::default(),
            settle: 5.0,
            pad_factor: 4.0,
        }
    }
}

/// Waveform-level summary of one pipeline run.
#[derive(Debug, Clone)]
pub struct PipelineReport {
    /// Per-mode echo energy over the mode window divided by the (unit) input
    /// mode energy.
    pub q_e: Vec<f64>,
    /// Per-mode overlap fidelity of the echo against the delayed input.
    pub fidelity: Vec<f64>,
    /// Output-grid time of the per-mode peak of `|b_out|`.
    pub peak_time: Vec<f64>,
    /// Expected echo centers `2 t0 + tau_k`.
    pub expected_time: Vec<f64>,
    /// Total input energy over the storage window.
    pub input_energy: f64,
    /// Reflected energy during storage.
    pub reflected_energy: f64,
    /// Stored spin excitation at control switch-off, per unit input energy.
    pub stored_fraction: f64,
    /// Cavity energy discarded when the retrieval stage starts from an empty
    /// cavity.
    pub residual_cavity_energy: f64,
    /// Photon-number decoherence factor `e^{-4 t0 / T2}`.
    pub decay_factor: f64,
}

/// Full storage -> rephasing -> retrieval composition.
#[derive(Debug, Clone)]
pub struct PipelineResult {
    pub storage: Trajectory,
    pub retrieval: Trajectory,
    pub report: PipelineReport,
}

/// Time-domain input field of a train: closed form for Gaussian modes, one
/// quadrature transform per call otherwise.
fn train_time_field(train: &PulseTrain) -> impl Fn(f64) -> C64 + '_ {
    let spectra: Vec<_> = train
        .modes()
        .iter()
        .map(|m| (m.gaussian_width(), m.tau(), m.amp().to_vec()))
        .collect();
    let grid = train.grid().clone();
    move |t: f64| {
        let mut acc = C64::new(0.0, 0.0);
        for (gauss, tau, amp) in &spectra {
            match gauss {
                Some(dw) => acc += crate::pulses::gaussian_time_envelope(*dw, *tau, t),
                None => {
                    let h = grid.step();
                    let mut s = 0.5
                        * (amp[0] * (-C64::i() * grid.node(0) * (t - tau)).exp()
                            + amp[grid.len() - 1]
                                * (-C64::i() * grid.node(grid.len() - 1) * (t - tau)).exp());
                    for (i, a) in amp.iter().enumerate().take(grid.len() - 1).skip(1) {
                        s += a * (-C64::i() * grid.node(i) * (t - tau)).exp();
                    }
                    acc += s * h / (2.0 * PI).sqrt();
                }
            }
        }
        acc
    }
}

/// Run storage of `train`, apply the exact rephasing map
/// `p12_j -> -e^{i delta_j t0} e^{-t0/T2} p12_j`, run source-free retrieval,
/// and summarize the echo waveform.
pub fn run_pipeline(
    p: &SystemParams,
    ens: &EnsembleSample,
    train: &PulseTrain,
    t0: f64,
    opts: &PipelineOptions,
) -> Result<PipelineResult, DynamicsError> {
    let modes = train.modes();
    let pads: Vec<f64> = modes
        .iter()
        .map(|m| opts.pad_factor / m.spectral_width())
        .collect();
    let tau_first = modes[0].tau();
    let tau_last = modes[modes.len() - 1].tau();
    let t_start = tau_first - pads[0];
    let t_off = tau_last + pads[modes.len() - 1] + opts.settle;

    let required_t0 = t_off - tau_first + pads[0];
    if t0 < required_t0 {
        return Err(DynamicsError::PipelineTiming {
            t0,
            required: required_t0,
        });
    }

    let b_in = train_time_field(train);
    let storage = simulate_storage_effective(p, ens, &b_in, (t_start, t_off), &opts.sim)?;

    let dwell_decay = (-t0 * p.t2_inv).exp();
    let rephased: Vec<C64> = storage
        .final_p12
        .iter()
        .zip(ens.detunings())
        .map(|(c, &d)| sequence_map(d, t0) * dwell_decay * c)
        .collect();

    let t_r = t_off + t0;
    let t_end = 2.0 * t0 + tau_last + pads[modes.len() - 1] + opts.settle;
    let retrieval = simulate_retrieval(p, ens, &rephased, (t_r, t_end), &opts.sim)?;

    // per-mode echo windows split midway between expected echo centers
    let expected: Vec<f64> = modes.iter().map(|m| 2.0 * t0 + m.tau()).collect();
    let mut q_e = Vec::new();
    let mut fid = Vec::new();
    let mut peak_time = Vec::new();
    for (k, mode) in modes.iter().enumerate() {
        let lo = if k == 0 {
            t_r
        } else {
            0.5 * (expected[k - 1] + expected[k])
        };
        let hi = if k + 1 == modes.len() {
            t_end
        } else {
            0.5 * (expected[k] + expected[k + 1])
        };
        let first = retrieval.t.partition_point(|&t| t < lo);
        let last = retrieval.t.partition_point(|&t| t <= hi);
        let t_w = &retrieval.t[first..last];
        let b_w = &retrieval.b_out[first..last];

        let energy = trapz(t_w, |i| b_w[i].norm_sqr());
        q_e.push(energy);

        // delayed input envelope over the window
        let shifted: Vec<f64> = t_w.iter().map(|&t| t - 2.0 * t0 - mode.tau()).collect();
        let delayed = delayed_mode_series(mode, &shifted)?;
        let overlap = trapz_c(t_w, |i| delayed[i].conj() * b_w[i]);
        let d_norm = trapz(t_w, |i| delayed[i].norm_sqr());
        fid.push(if energy > 0.0 {
            overlap.norm_sqr() / (d_norm * energy)
        } else {
            0.0
        });

        let peak = (0..t_w.len())
            .max_by(|&a, &b| b_w[a].norm().partial_cmp(&b_w[b].norm()).unwrap())
            .unwrap();
        peak_time.push(t_w[peak]);
    }

    let input_energy = storage.input_energy();
    let reflected_energy = storage.output_energy();
    let stored = storage.stored_excitation(p, ens);
    let residual = storage.a.last().map(|a| a.norm_sqr()).unwrap_or(0.0);

    Ok(PipelineResult {
        report: PipelineReport {
            q_e,
            fidelity: fid,
            peak_time,
            expected_time: expected,
            input_energy,
            reflected_energy,
            stored_fraction: stored / input_energy,
            residual_cavity_energy: residual,
            decay_factor: (-4.0 * t0 * p.t2_inv).exp(),
        },
        storage,
        retrieval,
    })
}

/// Time series of a mode envelope at the given (already delay-shifted) times.
fn delayed_mode_series(
    mode: &crate::pulses::ModeSpectrum,
    shifted_times: &[f64],
) -> Result<Vec<C64>, DynamicsError> {
    if let Some(dw) = mode.gaussian_width() {
        Ok(shifted_times
            .iter()
            .map(|&s| crate::pulses::gaussian_time_envelope(dw, 0.0, s))
            .collect())
    } else {
        let tg = TimeGrid::new(
            shifted_times[0],
            *shifted_times.last().unwrap(),
            shifted_times.len(),
        );
        Ok(spectrum_to_time(mode.grid(), mode.amp(), &tg)?)
    }
}

fn trapz_c(t: &[f64], f: impl Fn(usize) -> C64) -> C64 {
    let mut acc = C64::new(0.0, 0.0);
    for i in 1..t.len() {
        acc += 0.5 * (t[i] - t[i - 1]) * (f(i) + f(i - 1));
    }
    acc
}

/// Closed-form echo waveform predicted by the frequency-domain solution:
/// inverse transform of `e^{-2 t0/T2} S(nu)^2 e^{2 i nu t0} b_in(nu)`
/// sampled at `times`.
pub fn analytic_echo_waveform(
    train: &PulseTrain,
    p: &SystemParams,
    t0: f64,
    times: &[f64],
) -> Vec<C64> {
    let grid = train.grid();
    let spec = crate::spectral::echo_spectrum(train, p, t0);
    let h = grid.step();
    let scale = h / (2.0 * PI).sqrt();
    times
        .iter()
        .map(|&t| {
            let mut acc = 0.5
                * (spec[0] * (-C64::i() * grid.node(0) * t).exp()
                    + spec[grid.len() - 1] * (-C64::i() * grid.node(grid.len() - 1) * t).exp());
            for (i, s) in spec.iter().enumerate().take(grid.len() - 1).skip(1) {
                acc += s * (-C64::i() * grid.node(i) * t).exp();
            }
            acc * scale
        })
        .collect()
}

/// Frequency response of the discretized storage stage,
/// `sqrt(gamma1) a(nu) / b_in(nu)`, for cross-checking a storage trajectory
/// against the closed-form cavity response; uses the same discrete line sum
/// as the simulator.
pub fn discrete_cavity_response(nu: f64, p: &SystemParams, ens: &EnsembleSample) -> C64 {
    let gamma_r = crate::params::derive_gamma_r(p);
    let d = C64::new(0.5, -nu)
        - C64::i() * 0.5 * gamma_r * p.delta_in * ens.weighted_line_sum(nu, p.t2_inv);
    1.0 / d
}
