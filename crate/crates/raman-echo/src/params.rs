//! System parameters, unit conventions and derived quantities.
//!
//! All rates are expressed in units of the cavity decay rate `gamma1`, which
//! is therefore fixed to 1 internally. An optional SI value of `gamma1` (in
//! s^-1) can be attached for reporting at the interfaces that need absolute
//! numbers (e.g. the mirror transmission estimate).

use num_complex::Complex64 as C64;
use thiserror::Error;

/// Speed of light in cm/s.
pub const SPEED_OF_LIGHT_CM_PER_S: f64 = 2.9979e10;

/// Hard cap on `|omega1 / delta0|`; beyond this the adiabatic elimination of
/// the optical coherence is no longer trustworthy (the error grows
/// quadratically in the ratio).
pub const ADIABATIC_HARD_CAP: f64 = 0.2;

/// Ratio above which a warning is attached to the parameter set.
pub const ADIABATIC_WARN: f64 = 0.1;

#[derive(Debug, Error, PartialEq)]
pub enum ParamError {
    #[error("{name} must be positive, got {value}")]
    NotPositive { name: &'static str, value: f64 },
    #[error("{name} must be non-negative, got {value}")]
    Negative { name: &'static str, value: f64 },
    #[error("n_atoms must be at least 1, got {0}")]
    TooFewAtoms(f64),
    #[error("delta0 must be nonzero")]
    ZeroDetuning,
    #[error(
        "adiabatic regime violated: |omega1/delta0| = {ratio:.4} exceeds {cap}; \
         raise delta0 or lower omega1 (or opt in with allow_nonadiabatic)"
    )]
    NonAdiabatic { ratio: f64, cap: f64 },
    #[error(
        "matched Rabi ratio {ratio:.4} exceeds the adiabatic cap {cap}; \
         raise n_atoms or g_bar"
    )]
    UnreachableMatching { ratio: f64, cap: f64 },
}

/// Protocol rates and couplings, all in units of `gamma1`.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemParams {
    /// Inhomogeneous linewidth of the spin transition.
    pub delta_in: f64,
    /// Coherence decay rate `1/T2` (0 means no decay).
    pub t2_inv: f64,
    /// Raman detuning from the optical transition.
    pub big_delta0: f64,
    /// Writing-field Rabi frequency.
    pub omega1: C64,
    /// Effective atom number.
    pub n_atoms: f64,
    /// R.m.s. photon-atom coupling.
    pub g_bar: f64,
    /// Optional SI value of `gamma1` in s^-1, for reporting only.
    pub gamma1_si: Option<f64>,
}

impl SystemParams {
    /// Validated constructor. Enforces positivity invariants and the hard
    /// adiabaticity cap `|omega1/delta0| <= 0.2`.
    pub fn new(
        delta_in: f64,
        t2_inv: f64,
        big_delta0: f64,
        omega1: C64,
        n_atoms: f64,
        g_bar: f64,
    ) -> Result<Self, ParamError> {
        Self::with_options(delta_in, t2_inv, big_delta0, omega1, n_atoms, g_bar, false)
    }

    /// Constructor with an escape hatch for the adiabaticity cap. The
    /// positivity invariants are always enforced.
    pub fn with_options(
        delta_in: f64,
        t2_inv: f64,
        big_delta0: f64,
        omega1: C64,
        n_atoms: f64,
        g_bar: f64,
        allow_nonadiabatic: bool,
    ) -> Result<Self, ParamError> {
        if !(delta_in > 0.0) {
            return Err(ParamError::NotPositive {
                name: "delta_in",
                value: delta_in,
            });
        }
        if !(t2_inv >= 0.0) {
            return Err(ParamError::Negative {
                name: "t2_inv",
                value: t2_inv,
            });
        }
        if big_delta0 == 0.0 || !big_delta0.is_finite() {
            return Err(ParamError::ZeroDetuning);
        }
        if !(n_atoms >= 1.0) {
            return Err(ParamError::TooFewAtoms(n_atoms));
        }
        if !(g_bar >= 0.0) {
            return Err(ParamError::Negative {
                name: "g_bar",
                value: g_bar,
            });
        }
        let p = Self {
            delta_in,
            t2_inv,
            big_delta0,
            omega1,
            n_atoms,
            g_bar,
            gamma1_si: None,
        };
        let ratio = p.adiabaticity_ratio();
        if !allow_nonadiabatic && ratio > ADIABATIC_HARD_CAP {
            return Err(ParamError::NonAdiabatic {
                ratio,
                cap: ADIABATIC_HARD_CAP,
            });
        }
        Ok(p)
    }

    /// Same parameter set with an SI scale attached.
    pub fn with_gamma1_si(mut self, gamma1_si: f64) -> Self {
        self.gamma1_si = Some(gamma1_si);
        self
    }

    /// Construct from SI rates (all in s^-1 except the dimensionless counts);
    /// everything is divided by `gamma1_si` on the way in.
    #[allow(clippy::too_many_arguments)]
    pub fn from_si(
        gamma1_si: f64,
        delta_in_si: f64,
        t2_inv_si: f64,
        big_delta0_si: f64,
        omega1_si: C64,
        n_atoms: f64,
        g_bar_si: f64,
    ) -> Result<Self, ParamError> {
        if !(gamma1_si > 0.0) {
            return Err(ParamError::NotPositive {
                name: "gamma1_si",
                value: gamma1_si,
            });
        }
        Self::new(
            delta_in_si / gamma1_si,
            t2_inv_si / gamma1_si,
            big_delta0_si / gamma1_si,
            omega1_si / gamma1_si,
            n_atoms,
            g_bar_si / gamma1_si,
        )
        .map(|p| p.with_gamma1_si(gamma1_si))
    }

    /// Reference doubly-matched operating point: `gamma_r = gamma1`,
    /// `delta_in = gamma1/2`, no decoherence, `|omega1/delta0| = 0.1`.
    pub fn matched() -> Self {
        // 2 N |omega1 g_bar / delta0|^2 / delta_in = 1 with the values below.
        Self::new(0.5, 0.0, 100.0, C64::new(10.0, 0.0), 1.0e6, 5.0e-3)
            .expect("reference point is valid")
    }

    /// `|omega1 / delta0|`.
    pub fn adiabaticity_ratio(&self) -> f64 {
        self.omega1.norm() / self.big_delta0.abs()
    }

    /// Non-fatal advisories on the parameter set.
    pub fn warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        let ratio = self.adiabaticity_ratio();
        if ratio > ADIABATIC_WARN {
            out.push(format!(
                "|omega1/delta0| = {ratio:.4} exceeds {ADIABATIC_WARN}; adiabatic-elimination \
                 error grows quadratically in this ratio"
            ));
        }
        if self.t2_inv > 0.1 * self.delta_in {
            out.push(format!(
                "t2_inv = {} is not small against delta_in = {}; the transfer-function \
                 analysis assumes 1/T2 << delta_in",
                self.t2_inv, self.delta_in
            ));
        }
        out
    }

    /// Derived rates bundle.
    pub fn derived(&self) -> DerivedRates {
        DerivedRates {
            gamma_r: derive_gamma_r(self),
        }
    }

    /// Per-atom effective Raman coupling `i (omega1*/delta0) g_j*` that drives
    /// the spin coherence of an atom with (phase-absorbed) coupling `g_j`.
    pub fn effective_coupling(&self, g_j: C64) -> C64 {
        C64::i() * self.omega1.conj() / self.big_delta0 * g_j.conj()
    }
}

/// Rates derived from [`SystemParams`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivedRates {
    /// Raman absorption rate `gamma_r` in units of `gamma1`.
    pub gamma_r: f64,
}

/// Raman absorption rate `gamma_r = 2 N |omega1 g_bar / delta0|^2 / delta_in`.
pub fn derive_gamma_r(p: &SystemParams) -> f64 {
    2.0 * p.n_atoms * (p.omega1 * p.g_bar / p.big_delta0).norm_sqr() / p.delta_in
}

/// Rabi-to-detuning ratio `|omega1/delta0|` that realizes the impedance
/// matching condition `gamma_r = gamma1` for the given ensemble:
/// `sqrt(delta_in gamma1 / (2 N g_bar^2))`.
///
/// Errors with [`ParamError::UnreachableMatching`] when the required ratio
/// would break the adiabatic regime; the ensemble is then too weakly coupled
/// and `n_atoms` or `g_bar` must be raised.
pub fn matching_rabi_ratio(p: &SystemParams) -> Result<f64, ParamError> {
    let ng2 = p.n_atoms * p.g_bar * p.g_bar;
    if !(ng2 > 0.0) {
        return Err(ParamError::NotPositive {
            name: "n_atoms * g_bar^2",
            value: ng2,
        });
    }
    let ratio = (p.delta_in / (2.0 * ng2)).sqrt();
    if ratio > ADIABATIC_HARD_CAP {
        return Err(ParamError::UnreachableMatching {
            ratio,
            cap: ADIABATIC_HARD_CAP,
        });
    }
    Ok(ratio)
}

/// Cavity geometry for the mirror-transmission estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CavityGeometry {
    /// Longitudinal cavity length in cm.
    pub length_cm: f64,
    /// Filling factor of the cavity by the atomic medium, in (0, 1].
    pub fill_chi: f64,
}

impl CavityGeometry {
    pub fn new(length_cm: f64, fill_chi: f64) -> Result<Self, ParamError> {
        if !(length_cm > 0.0) {
            return Err(ParamError::NotPositive {
                name: "length_cm",
                value: length_cm,
            });
        }
        if !(fill_chi > 0.0 && fill_chi <= 1.0) {
            return Err(ParamError::NotPositive {
                name: "fill_chi",
                value: fill_chi,
            });
        }
        Ok(Self {
            length_cm,
            fill_chi,
        })
    }
}

/// Mirror (power) transmission coefficient from `gamma1 ~= T c / (2 L)`,
/// i.e. `T = 2 L gamma1 / c`, with `gamma1_si` in s^-1 and `L` in cm.
pub fn transmission_coefficient(geom: &CavityGeometry, gamma1_si: f64) -> f64 {
    2.0 * geom.length_cm * gamma1_si / SPEED_OF_LIGHT_CM_PER_S
}

/// Raman absorption coefficient required by impedance matching,
/// `alpha_r = T / (2 chi L)` in cm^-1.
pub fn matched_absorption_coefficient(geom: &CavityGeometry, gamma1_si: f64) -> f64 {
    transmission_coefficient(geom, gamma1_si) / (2.0 * geom.fill_chi * geom.length_cm)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    #[test]
    fn gamma_r_zero_coupling() {
        let mut p = SystemParams::matched();
        p.omega1 = c(0.0);
        assert_eq!(derive_gamma_r(&p), 0.0);
    }

    #[test]
    fn gamma_r_quadratic_in_omega1() {
        let p = SystemParams::matched();
        let mut p2 = p.clone();
        p2.omega1 *= 2.0;
        let (g1, g2) = (derive_gamma_r(&p), derive_gamma_r(&p2));
        assert!((g2 / g1 - 4.0).abs() < 1e-12);
    }

    #[test]
    fn gamma_r_worked_value() {
        // N = 1e6, g_bar = 1e-3, |omega1/delta0| = 0.1, delta_in = 0.5:
        // 2 * 1e6 * (0.1 * 1e-3)^2 / 0.5 = 4e-2.
        let p = SystemParams::new(0.5, 0.0, 100.0, c(10.0), 1.0e6, 1.0e-3).unwrap();
        assert!((derive_gamma_r(&p) - 4.0e-2).abs() < 1e-15);
    }

    #[test]
    fn matched_point_is_matched() {
        let p = SystemParams::matched();
        assert!((derive_gamma_r(&p) - 1.0).abs() < 1e-12);
        assert_eq!(p.delta_in, 0.5);
    }

    #[test]
    fn transmission_worked_examples() {
        let geom = CavityGeometry::new(0.1, 0.5).unwrap();
        let t = transmission_coefficient(&geom, 1.0e8);
        assert!((t - 6.6713e-4).abs() < 1e-7);
        // within 10 % of the rounded 0.7e-3 reference value
        assert!((t - 0.7e-3).abs() / 0.7e-3 < 0.10);

        let geom_long = CavityGeometry::new(1.0, 0.5).unwrap();
        let t_long = transmission_coefficient(&geom_long, 1.0e8);
        assert!((t_long - 0.7e-2).abs() / 0.7e-2 < 0.10);
    }

    #[test]
    fn transmission_vanishes_with_length() {
        let geom = CavityGeometry::new(1e-12, 0.5).unwrap();
        assert!(transmission_coefficient(&geom, 1.0e8) < 1e-13);
    }

    #[test]
    fn matching_ratio_closed_form() {
        // delta_in = 0.5, N g^2 = 25 -> sqrt(0.5/50) = 0.1
        let p = SystemParams::new(0.5, 0.0, 100.0, c(1.0), 1.0e6, 5.0e-3).unwrap();
        let r = matching_rabi_ratio(&p).unwrap();
        assert!((r - 0.1).abs() < 1e-15);
    }

    #[test]
    fn matching_ratio_round_trip_exact() {
        let p = SystemParams::new(0.5, 0.0, 100.0, c(1.0), 1.0e6, 5.0e-3).unwrap();
        let r = matching_rabi_ratio(&p).unwrap();
        let mut tuned = p.clone();
        tuned.omega1 = c(r * tuned.big_delta0);
        assert!((derive_gamma_r(&tuned) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn matching_ratio_guard() {
        // N g^2 = 1 -> ratio sqrt(0.5/2) = 0.5 > 0.2
        let p = SystemParams::new(0.5, 0.0, 100.0, c(1.0), 1.0e6, 1.0e-3).unwrap();
        assert!(matches!(
            matching_rabi_ratio(&p),
            Err(ParamError::UnreachableMatching { .. })
        ));
    }

    #[test]
    fn adiabatic_guard_and_override() {
        let err = SystemParams::new(0.5, 0.0, 10.0, c(3.0), 1.0e6, 1e-3);
        assert!(matches!(err, Err(ParamError::NonAdiabatic { .. })));
        let p = SystemParams::with_options(0.5, 0.0, 10.0, c(3.0), 1.0e6, 1e-3, true).unwrap();
        assert!(p.adiabaticity_ratio() > 0.2);
        let warn = SystemParams::new(0.5, 0.0, 10.0, c(1.5), 1.0e6, 1e-3).unwrap();
        assert!(!warn.warnings().is_empty());
    }

    #[test]
    fn si_rescaling_invariance() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            let gamma1 = 10f64.powf(rng.random_range(6.0..10.0));
            let delta_in = rng.random_range(0.1..2.0);
            let delta0 = rng.random_range(50.0..500.0);
            let omega = rng.random_range(0.0..0.15) * delta0;
            let n: f64 = rng.random_range(1e3..1e8);
            let g = rng.random_range(1e-5..1e-2);
            let base = SystemParams::new(delta_in, 0.0, delta0, c(omega), n, g).unwrap();
            let scaled = SystemParams::from_si(
                gamma1,
                delta_in * gamma1,
                0.0,
                delta0 * gamma1,
                c(omega * gamma1),
                n,
                g * gamma1,
            )
            .unwrap();
            assert!(
                (derive_gamma_r(&base) - derive_gamma_r(&scaled)).abs()
                    < 1e-12 * derive_gamma_r(&base).max(1.0)
            );
            assert!((base.adiabaticity_ratio() - scaled.adiabaticity_ratio()).abs() < 1e-14);
        }
    }

    #[test]
    fn matching_round_trip_random() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let mut tried = 0;
        while tried < 100 {
            let delta_in = rng.random_range(0.05..3.0);
            let n: f64 = rng.random_range(1e4..1e8);
            let g = rng.random_range(1e-4..1e-1);
            let p = match SystemParams::new(delta_in, 0.0, 100.0, c(1.0), n, g) {
                Ok(p) => p,
                Err(_) => continue,
            };
            let Ok(r) = matching_rabi_ratio(&p) else {
                continue;
            };
            let mut tuned = p.clone();
            tuned.omega1 = c(r * tuned.big_delta0);
            assert!((derive_gamma_r(&tuned) - 1.0).abs() < 1e-12);
            tried += 1;
        }
    }
}
