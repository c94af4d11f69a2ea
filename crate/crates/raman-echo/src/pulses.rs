//! Signal-field representation: single-mode spectra, multi-mode trains and
//! the Fourier conventions.
//!
//! Forward transform: `f(nu) = (1/sqrt(2 pi)) integral dt e^{+i nu t} f(t)`;
//! a mode arriving at time `tau` therefore carries the factor `e^{i nu tau}`
//! in the train spectrum. All integrals over the frequency grid use the
//! composite trapezoid rule.

use num_complex::Complex64 as C64;
use std::f64::consts::PI;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum PulseError {
    #[error("grid bounds must satisfy nu_min < 0 < nu_max, got [{0}, {1}]")]
    BadBounds(f64, f64),
    #[error("n_points must be odd and >= 3, got {0}")]
    BadPointCount(usize),
    #[error("nu = 0 must coincide with a grid node")]
    ZeroOffGrid,
    #[error("grid [{lo}, {hi}] too narrow for spectral width {width}; need at least +-{need}")]
    GridTooNarrow {
        lo: f64,
        hi: f64,
        width: f64,
        need: f64,
    },
    #[error("spectral width must be positive, got {0}")]
    BadWidth(f64),
    #[error("mode norm {0} deviates from 1 beyond tolerance")]
    NotNormalized(f64),
    #[error("modes must share one frequency grid")]
    GridMismatch,
    #[error("arrival times must be strictly increasing")]
    NonIncreasingArrivals,
    #[error(
        "modes at tau = {tau_prev} and {tau} too close: separation {sep} < {required} \
         (5 / spectral width)"
    )]
    ModesOverlap {
        tau_prev: f64,
        tau: f64,
        sep: f64,
        required: f64,
    },
    #[error("time step {dt} violates the Nyquist bound pi/nu_max = {bound}")]
    Aliasing { dt: f64, bound: f64 },
}

/// Uniform frequency grid containing `nu = 0` as a node.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyGrid {
    nu_min: f64,
    nu_max: f64,
    n_points: usize,
}

impl FrequencyGrid {
    pub fn new(nu_min: f64, nu_max: f64, n_points: usize) -> Result<Self, PulseError> {
        if !(nu_min < 0.0 && nu_max > 0.0) {
            return Err(PulseError::BadBounds(nu_min, nu_max));
        }
        if n_points < 3 || n_points.is_multiple_of(2) {
            return Err(PulseError::BadPointCount(n_points));
        }
        let g = Self {
            nu_min,
            nu_max,
            n_points,
        };
        let h = g.step();
        let k = -nu_min / h;
        if (k - k.round()).abs() > 1e-9 {
            return Err(PulseError::ZeroOffGrid);
        }
        Ok(g)
    }

    /// Symmetric grid on `[-nu_max, nu_max]`.
    pub fn symmetric(nu_max: f64, n_points: usize) -> Result<Self, PulseError> {
        Self::new(-nu_max, nu_max, n_points)
    }

    /// Default analysis grid: `[-10, 10]` in units of `gamma1`, 4001 nodes.
    pub fn default_analysis() -> Self {
        Self::symmetric(10.0, 4001).expect("default grid is valid")
    }

    pub fn len(&self) -> usize {
        self.n_points
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn step(&self) -> f64 {
        (self.nu_max - self.nu_min) / (self.n_points - 1) as f64
    }

    pub fn node(&self, i: usize) -> f64 {
        self.nu_min + self.step() * i as f64
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n_points).map(|i| self.node(i))
    }

    pub fn bounds(&self) -> (f64, f64) {
        (self.nu_min, self.nu_max)
    }

    /// Composite trapezoid integral of samples on this grid.
    pub fn trapezoid<F: Fn(usize) -> f64>(&self, f: F) -> f64 {
        let h = self.step();
        let mut acc = 0.5 * (f(0) + f(self.n_points - 1));
        for i in 1..self.n_points - 1 {
            acc += f(i);
        }
        acc * h
    }

    /// Complex-valued trapezoid integral.
    pub fn trapezoid_c<F: Fn(usize) -> C64>(&self, f: F) -> C64 {
        let h = self.step();
        let mut acc = 0.5 * (f(0) + f(self.n_points - 1));
        for i in 1..self.n_points - 1 {
            acc += f(i);
        }
        acc * h
    }
}

/// Uniform time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid {
    pub t_min: f64,
    pub t_max: f64,
    pub n_points: usize,
}

impl TimeGrid {
    pub fn new(t_min: f64, t_max: f64, n_points: usize) -> Self {
        assert!(t_max > t_min && n_points >= 2);
        Self {
            t_min,
            t_max,
            n_points,
        }
    }

    pub fn step(&self) -> f64 {
        (self.t_max - self.t_min) / (self.n_points - 1) as f64
    }

    pub fn node(&self, i: usize) -> f64 {
        self.t_min + self.step() * i as f64
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n_points).map(|i| self.node(i))
    }

    pub fn trapezoid<F: Fn(usize) -> f64>(&self, f: F) -> f64 {
        let h = self.step();
        let mut acc = 0.5 * (f(0) + f(self.n_points - 1));
        for i in 1..self.n_points - 1 {
            acc += f(i);
        }
        acc * h
    }
}

/// Complex spectral amplitude of one signal temporal mode, unit-normalized on
/// its grid, with arrival time `tau`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeSpectrum {
    grid: FrequencyGrid,
    amp: Vec<C64>,
    tau: f64,
    /// Set when the mode is an analytic Gaussian of that spectral width;
    /// lets downstream code use the closed-form time envelope.
    gaussian: Option<f64>,
}

/// Normalization tolerance for a single-photon mode.
pub const NORM_TOL: f64 = 1e-6;

impl ModeSpectrum {
    /// Wrap an amplitude vector; the trapezoid norm must already be within
    /// [`NORM_TOL`] of 1.
    pub fn new(grid: FrequencyGrid, amp: Vec<C64>, tau: f64) -> Result<Self, PulseError> {
        assert_eq!(amp.len(), grid.len());
        let norm = grid.trapezoid(|i| amp[i].norm_sqr());
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(PulseError::NotNormalized(norm));
        }
        Ok(Self {
            grid,
            amp,
            tau,
            gaussian: None,
        })
    }

    pub fn grid(&self) -> &FrequencyGrid {
        &self.grid
    }

    pub fn amp(&self) -> &[C64] {
        &self.amp
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    /// Spectral width when the mode is an analytic Gaussian.
    pub fn gaussian_width(&self) -> Option<f64> {
        self.gaussian
    }

    /// Trapezoid L2 norm of the mode.
    pub fn norm(&self) -> f64 {
        self.grid.trapezoid(|i| self.amp[i].norm_sqr())
    }

    /// R.m.s. spectral width `sqrt(<nu^2>)` of `|f(nu)|^2`.
    pub fn spectral_width(&self) -> f64 {
        let m2 = self.grid.trapezoid(|i| {
            let nu = self.grid.node(i);
            nu * nu * self.amp[i].norm_sqr()
        });
        (m2 / self.norm()).sqrt()
    }

    /// Fraction of `|f|^2` mass sitting in the outermost grid cell on either
    /// side; a proxy for truncation loss.
    pub fn edge_mass(&self) -> f64 {
        let h = self.grid.step();
        let n = self.grid.len();
        h * 0.5
            * (self.amp[0].norm_sqr()
                + self.amp[1].norm_sqr()
                + self.amp[n - 2].norm_sqr()
                + self.amp[n - 1].norm_sqr())
    }
}

/// Gaussian mode with intensity profile `|f(nu)|^2 ~ exp(-nu^2 / (2 dw^2))`,
/// renormalized to unit trapezoid norm, flat phase, arriving at `tau`.
pub fn gaussian_mode(grid: &FrequencyGrid, dw: f64, tau: f64) -> Result<ModeSpectrum, PulseError> {
    if !(dw > 0.0) {
        return Err(PulseError::BadWidth(dw));
    }
    let (lo, hi) = grid.bounds();
    let need = 6.0 * dw;
    if -lo < need || hi < need {
        return Err(PulseError::GridTooNarrow {
            lo,
            hi,
            width: dw,
            need,
        });
    }
    let mut amp: Vec<C64> = grid
        .nodes()
        .map(|nu| C64::new((-nu * nu / (4.0 * dw * dw)).exp(), 0.0))
        .collect();
    let norm = grid.trapezoid(|i| amp[i].norm_sqr()).sqrt();
    for a in &mut amp {
        *a /= norm;
    }
    let mut mode = ModeSpectrum::new(grid.clone(), amp, tau)?;
    mode.gaussian = Some(dw);
    Ok(mode)
}

/// Closed-form time envelope of [`gaussian_mode`] (carrier removed, centered
/// at `tau`): `f(t) = (2 pi dw^2)^{-1/4} sqrt(2) dw exp(-dw^2 (t - tau)^2)`.
pub fn gaussian_time_envelope(dw: f64, tau: f64, t: f64) -> C64 {
    let s = t - tau;
    let norm = (2.0 * PI * dw * dw).powf(-0.25) * (2.0f64).sqrt() * dw;
    C64::new(norm * (-dw * dw * s * s).exp(), 0.0)
}

/// Ordered train of temporally separated modes on a common grid.
#[derive(Debug, Clone, PartialEq)]
pub struct PulseTrain {
    modes: Vec<ModeSpectrum>,
}

/// Required separation between neighbouring modes, in units of the later
/// mode's temporal duration `1/dw`.
pub const SEPARATION_FACTOR: f64 = 5.0;

impl PulseTrain {
    pub fn new(modes: Vec<ModeSpectrum>) -> Result<Self, PulseError> {
        assert!(!modes.is_empty());
        for pair in modes.windows(2) {
            if pair[0].grid() != pair[1].grid() {
                return Err(PulseError::GridMismatch);
            }
            let (prev, cur) = (&pair[0], &pair[1]);
            if !(cur.tau() > prev.tau()) {
                return Err(PulseError::NonIncreasingArrivals);
            }
            let sep = cur.tau() - prev.tau();
            let required = SEPARATION_FACTOR / cur.spectral_width();
            if sep < required {
                return Err(PulseError::ModesOverlap {
                    tau_prev: prev.tau(),
                    tau: cur.tau(),
                    sep,
                    required,
                });
            }
        }
        Ok(Self { modes })
    }

    pub fn single(mode: ModeSpectrum) -> Self {
        Self { modes: vec![mode] }
    }

    pub fn modes(&self) -> &[ModeSpectrum] {
        &self.modes
    }

    pub fn grid(&self) -> &FrequencyGrid {
        self.modes[0].grid()
    }
}

/// Combined input spectrum `b_in(nu) = sum_k e^{i nu tau_k} f_k(nu)`.
pub fn train_spectrum(train: &PulseTrain) -> Vec<C64> {
    let grid = train.grid();
    let mut out = vec![C64::new(0.0, 0.0); grid.len()];
    for mode in train.modes() {
        for (i, nu) in grid.nodes().enumerate() {
            out[i] += (C64::i() * nu * mode.tau()).exp() * mode.amp()[i];
        }
    }
    out
}

/// Inverse transform of a spectrum sampled on `grid` onto the time nodes:
/// `b(t) = (1/sqrt(2 pi)) integral dnu f(nu) e^{-i nu t}`.
///
/// Errors when the time step violates the Nyquist bound `dt < pi / nu_max`.
pub fn spectrum_to_time(
    grid: &FrequencyGrid,
    spectrum: &[C64],
    t_grid: &TimeGrid,
) -> Result<Vec<C64>, PulseError> {
    assert_eq!(spectrum.len(), grid.len());
    let (lo, hi) = grid.bounds();
    let nu_abs = hi.max(-lo);
    let bound = PI / nu_abs;
    if t_grid.step() >= bound {
        return Err(PulseError::Aliasing {
            dt: t_grid.step(),
            bound,
        });
    }
    let h = grid.step();
    let scale = h / (2.0 * PI).sqrt();
    let out = t_grid
        .nodes()
        .map(|t| {
            let mut acc = 0.5
                * (spectrum[0] * (-C64::i() * grid.node(0) * t).exp()
                    + spectrum[grid.len() - 1] * (-C64::i() * grid.node(grid.len() - 1) * t).exp());
            for (i, s) in spectrum.iter().enumerate().take(grid.len() - 1).skip(1) {
                acc += s * (-C64::i() * grid.node(i) * t).exp();
            }
            acc * scale
        })
        .collect();
    Ok(out)
}

/// Forward transform of a time series onto the frequency nodes:
/// `f(nu) = (1/sqrt(2 pi)) integral dt b(t) e^{+i nu t}`.
pub fn time_to_spectrum(
    t_grid: &TimeGrid,
    series: &[C64],
    grid: &FrequencyGrid,
) -> Result<Vec<C64>, PulseError> {
    assert_eq!(series.len(), t_grid.n_points);
    let (lo, hi) = grid.bounds();
    let nu_abs = hi.max(-lo);
    let bound = PI / nu_abs;
    if t_grid.step() >= bound {
        return Err(PulseError::Aliasing {
            dt: t_grid.step(),
            bound,
        });
    }
    let h = t_grid.step();
    let scale = h / (2.0 * PI).sqrt();
    let out = grid
        .nodes()
        .map(|nu| {
            let mut acc = 0.5
                * (series[0] * (C64::i() * nu * t_grid.node(0)).exp()
                    + series[t_grid.n_points - 1]
                        * (C64::i() * nu * t_grid.node(t_grid.n_points - 1)).exp());
            for (i, b) in series.iter().enumerate().take(t_grid.n_points - 1).skip(1) {
                acc += b * (C64::i() * nu * t_grid.node(i)).exp();
            }
            acc * scale
        })
        .collect();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_validation() {
        assert!(FrequencyGrid::new(0.0, 1.0, 11).is_err());
        assert!(FrequencyGrid::new(-1.0, 1.0, 10).is_err());
        assert!(FrequencyGrid::new(-1.0, 2.0, 4001).is_err()); // 0 off-grid
        let g = FrequencyGrid::symmetric(10.0, 4001).unwrap();
        assert_eq!(g.len(), 4001);
        assert_eq!(g.node(2000), 0.0);
    }

    #[test]
    fn gaussian_norm_and_shape() {
        let g = FrequencyGrid::symmetric(2.0, 2001).unwrap();
        let m = gaussian_mode(&g, 0.1, 0.0).unwrap();
        assert!((m.norm() - 1.0).abs() < 1e-6);
        // |f(nu)|^2 / |f(0)|^2 = e^{-nu^2/(2 dw^2)}; at nu = dw this is e^{-1/2}
        let i0 = 1000;
        let idw = 1050;
        let nu = g.node(idw);
        assert!((nu - 0.1).abs() < 1e-12);
        let ratio = m.amp()[idw].norm_sqr() / m.amp()[i0].norm_sqr();
        assert!((ratio - (-nu * nu / 0.02).exp()).abs() < 1e-12);
        assert!((ratio - (-0.5f64).exp()).abs() < 1e-9);
        assert!((m.spectral_width() - 0.1).abs() < 1e-6);
    }

    #[test]
    fn gaussian_grid_guard() {
        let g = FrequencyGrid::symmetric(0.3, 301).unwrap();
        assert!(matches!(
            gaussian_mode(&g, 0.1, 0.0),
            Err(PulseError::GridTooNarrow { .. })
        ));
    }

    #[test]
    fn train_single_mode_identity() {
        let g = FrequencyGrid::symmetric(2.0, 801).unwrap();
        let m = gaussian_mode(&g, 0.1, 0.0).unwrap();
        let train = PulseTrain::single(m.clone());
        let spec = train_spectrum(&train);
        for (s, a) in spec.iter().zip(m.amp()) {
            assert!((s - a).norm() < 1e-14);
        }
    }

    #[test]
    fn train_two_mode_interference() {
        // |b_in|^2 = 2 |f|^2 (1 + cos(nu (tau2 - tau1))) for identical modes
        let g = FrequencyGrid::symmetric(2.0, 801).unwrap();
        let (tau1, tau2) = (0.0, 80.0);
        let m1 = gaussian_mode(&g, 0.1, tau1).unwrap();
        let m2 = gaussian_mode(&g, 0.1, tau2).unwrap();
        let train = PulseTrain::new(vec![m1.clone(), m2]).unwrap();
        let spec = train_spectrum(&train);
        for k in 0..10 {
            let i = 350 + 20 * k;
            let nu = g.node(i);
            let expect = 2.0 * m1.amp()[i].norm_sqr() * (1.0 + (nu * (tau2 - tau1)).cos());
            assert!((spec[i].norm_sqr() - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn train_global_time_shift_leaves_magnitude() {
        let g = FrequencyGrid::symmetric(2.0, 801).unwrap();
        let mk = |dt: f64| {
            PulseTrain::new(vec![
                gaussian_mode(&g, 0.1, 0.0 + dt).unwrap(),
                gaussian_mode(&g, 0.1, 80.0 + dt).unwrap(),
            ])
            .unwrap()
        };
        let s0 = train_spectrum(&mk(0.0));
        let s1 = train_spectrum(&mk(13.7));
        for i in 0..g.len() {
            assert!((s0[i].norm() - s1[i].norm()).abs() < 1e-12);
        }
    }

    #[test]
    fn train_separation_guard() {
        let g = FrequencyGrid::symmetric(2.0, 801).unwrap();
        let m1 = gaussian_mode(&g, 0.1, 0.0).unwrap();
        let m2 = gaussian_mode(&g, 0.1, 20.0).unwrap(); // 20 < 5/0.1 = 50
        assert!(matches!(
            PulseTrain::new(vec![m1, m2]),
            Err(PulseError::ModesOverlap { .. })
        ));
    }

    #[test]
    fn train_spectrum_linear_in_amplitudes() {
        let g = FrequencyGrid::symmetric(2.0, 401).unwrap();
        let m = gaussian_mode(&g, 0.2, 0.0).unwrap();
        let spec1 = train_spectrum(&PulseTrain::single(m.clone()));
        // doubling the amplitude vector doubles the train spectrum pointwise
        let doubled: Vec<C64> = m.amp().iter().map(|a| 2.0 * a).collect();
        let m2 = ModeSpectrum {
            grid: m.grid().clone(),
            amp: doubled,
            tau: 0.0,
            gaussian: None,
        };
        let spec2 = train_spectrum(&PulseTrain { modes: vec![m2] });
        for i in 0..g.len() {
            assert!((spec2[i] - 2.0 * spec1[i]).norm() < 1e-14);
        }
    }

    #[test]
    fn transform_round_trip_and_parseval() {
        let g = FrequencyGrid::symmetric(3.0, 1201).unwrap();
        let m = gaussian_mode(&g, 0.2, 0.0).unwrap();
        let tg = TimeGrid::new(-30.0, 30.0, 1501);
        let series = spectrum_to_time(&g, m.amp(), &tg).unwrap();
        let back = time_to_spectrum(&tg, &series, &g).unwrap();
        let rms: f64 = {
            let s: f64 = (0..g.len())
                .map(|i| (back[i] - m.amp()[i]).norm_sqr())
                .sum();
            (s / g.len() as f64).sqrt()
        };
        assert!(rms < 1e-8, "round-trip rms {rms}");

        let e_t = tg.trapezoid(|i| series[i].norm_sqr());
        let e_nu = g.trapezoid(|i| m.amp()[i].norm_sqr());
        assert!((e_t - e_nu).abs() < 1e-8);
    }

    #[test]
    fn transform_gaussian_width_pair() {
        // spectral |f|^2 width dw  ->  temporal |f|^2 width 1/(2 dw)
        let dw = 0.2;
        let g = FrequencyGrid::symmetric(3.0, 1201).unwrap();
        let m = gaussian_mode(&g, dw, 0.0).unwrap();
        let tg = TimeGrid::new(-30.0, 30.0, 1501);
        let series = spectrum_to_time(&g, m.amp(), &tg).unwrap();
        let norm = tg.trapezoid(|i| series[i].norm_sqr());
        let m2 = tg.trapezoid(|i| {
            let t = tg.node(i);
            t * t * series[i].norm_sqr()
        });
        let width_t = (m2 / norm).sqrt();
        assert!((width_t - 1.0 / (2.0 * dw)).abs() < 1e-6);
        // and the closed-form envelope matches the quadrature transform
        for k in 0..20 {
            let i = 700 + 7 * k;
            let expect = gaussian_time_envelope(dw, 0.0, tg.node(i));
            assert!((series[i] - expect).norm() < 1e-9);
        }
    }

    #[test]
    fn parseval_on_random_band_limited_spectra() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(29);
        let g = FrequencyGrid::symmetric(4.0, 1001).unwrap();
        let tg = TimeGrid::new(-40.0, 40.0, 2001);
        for _ in 0..20 {
            // random smooth band-limited amplitude: Gaussian envelope times a
            // low-order random polynomial phase/amplitude modulation
            let dw = rng.random_range(0.15..0.35);
            let (c1, c2) = (rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            let mut amp: Vec<C64> = g
                .nodes()
                .map(|nu| {
                    let env = (-nu * nu / (4.0 * dw * dw)).exp();
                    C64::new(env * (1.0 + 0.3 * c1 * nu), 0.3 * c2 * env * nu * nu)
                })
                .collect();
            let norm = g.trapezoid(|i| amp[i].norm_sqr()).sqrt();
            for a in &mut amp {
                *a /= norm;
            }
            let series = spectrum_to_time(&g, &amp, &tg).unwrap();
            let e_t = tg.trapezoid(|i| series[i].norm_sqr());
            let e_nu = g.trapezoid(|i| amp[i].norm_sqr());
            assert!(
                (e_t - e_nu).abs() < 1e-8,
                "Parseval defect {:e}",
                (e_t - e_nu).abs()
            );
            let back = time_to_spectrum(&tg, &series, &g).unwrap();
            let rms: f64 = {
                let s: f64 = (0..g.len()).map(|i| (back[i] - amp[i]).norm_sqr()).sum();
                (s / g.len() as f64).sqrt()
            };
            assert!(rms < 1e-8, "round-trip rms {rms:e}");
        }
    }

    #[test]
    fn nyquist_guard() {
        let g = FrequencyGrid::symmetric(10.0, 801).unwrap();
        let m = gaussian_mode(&g, 0.5, 0.0).unwrap();
        let tg = TimeGrid::new(-10.0, 10.0, 21); // dt = 1 > pi/10
        assert!(matches!(
            spectrum_to_time(&g, m.amp(), &tg),
            Err(PulseError::Aliasing { .. })
        ));
    }
}
