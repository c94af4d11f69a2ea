//! Embedded Dormand-Prince 5(4) integrator over complex state vectors, with
//! a fixed-step classical RK4 mode for convergence studies.
//!
//! The adaptive driver steps exactly onto every requested output node, so no
//! dense-output interpolation is needed; the observer sees the solution at
//! the node times only.

use num_complex::Complex64 as C64;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum IntegratorError {
    #[error(
        "step size collapsed to {h:.3e} at t = {t:.6}; the system is too stiff at this \
         tolerance (for the full three-level model, retry in a rotating frame or reduce delta0)"
    )]
    StepCollapse { t: f64, h: f64 },
    #[error(
        "exceeded {0} integration steps; the system is too stiff at this tolerance (for the \
         full three-level model, retry in a rotating frame or reduce delta0)"
    )]
    TooManySteps(usize),
    #[error("output nodes must be strictly increasing")]
    BadNodes,
}

// Dormand-Prince 5(4) tableau.
const A2: [f64; 1] = [1.0 / 5.0];
const A3: [f64; 2] = [3.0 / 40.0, 9.0 / 40.0];
const A4: [f64; 3] = [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0];
const A5: [f64; 4] = [
    19372.0 / 6561.0,
    -25360.0 / 2187.0,
    64448.0 / 6561.0,
    -212.0 / 729.0,
];
const A6: [f64; 5] = [
    9017.0 / 3168.0,
    -355.0 / 33.0,
    46732.0 / 5247.0,
    49.0 / 176.0,
    -5103.0 / 18656.0,
];
const B5: [f64; 6] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
];
// b5 - b4, applied to k1..k7 for the embedded error estimate
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];
const C: [f64; 6] = [0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];

/// Adaptive Dormand-Prince 5(4) driver.
#[derive(Debug, Clone)]
pub struct Dopri5 {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_steps: usize,
    pub h_min: f64,
}

impl Default for Dopri5 {
    fn default() -> Self {
        Self {
            rel_tol: 1e-9,
            abs_tol: 1e-14,
            max_steps: 20_000_000,
            h_min: 1e-12,
        }
    }
}

impl Dopri5 {
    /// Integrate `dy/dt = f(t, y)` across `nodes`, invoking
    /// `observe(index, t, y)` at every node (the first included). Returns the
    /// final state.
    pub fn integrate<F, O>(
        &self,
        mut f: F,
        y0: &[C64],
        nodes: &[f64],
        mut observe: O,
    ) -> Result<Vec<C64>, IntegratorError>
    where
        F: FnMut(f64, &[C64], &mut [C64]),
        O: FnMut(usize, f64, &[C64]),
    {
        if nodes.len() < 2 || nodes.windows(2).any(|w| w[1] <= w[0]) {
            return Err(IntegratorError::BadNodes);
        }
        let n = y0.len();
        let mut y = y0.to_vec();
        let mut t = nodes[0];
        observe(0, t, &y);

        let mut k: Vec<Vec<C64>> = (0..7).map(|_| vec![C64::new(0.0, 0.0); n]).collect();
        let mut ytmp = vec![C64::new(0.0, 0.0); n];
        let mut ynew = vec![C64::new(0.0, 0.0); n];

        let span = nodes[nodes.len() - 1] - nodes[0];
        let mut h = (span / 1e3).min(nodes[1] - nodes[0]);
        let mut steps = 0usize;
        // FSAL: k[0] holds f(t, y)
        f(t, &y, &mut k[0]);

        for (node_idx, &t_node) in nodes.iter().enumerate().skip(1) {
            while t < t_node - 1e-12 * span.abs() {
                steps += 1;
                if steps > self.max_steps {
                    return Err(IntegratorError::TooManySteps(self.max_steps));
                }
                let h_try = h.min(t_node - t);

                // stages 2..7
                for s in 1..7 {
                    let a_row: &[f64] = match s {
                        1 => &A2,
                        2 => &A3,
                        3 => &A4,
                        4 => &A5,
                        5 => &A6,
                        _ => &B5, // stage 7 uses the 5th-order weights (FSAL)
                    };
                    for i in 0..n {
                        let mut acc = C64::new(0.0, 0.0);
                        for (j, &a) in a_row.iter().enumerate() {
                            if a != 0.0 {
                                acc += a * k[j][i];
                            }
                        }
                        ytmp[i] = y[i] + h_try * acc;
                    }
                    let ts = t + C[s - 1] * h_try;
                    if s == 6 {
                        ynew.copy_from_slice(&ytmp);
                    }
                    let ks = &mut k[s];
                    f(ts, &ytmp, ks);
                }

                // embedded error estimate
                let mut err_sq = 0.0;
                for i in 0..n {
                    let mut e = C64::new(0.0, 0.0);
                    for (j, &w) in E.iter().enumerate() {
                        if w != 0.0 {
                            e += w * k[j][i];
                        }
                    }
                    let scale = self.abs_tol + self.rel_tol * y[i].norm().max(ynew[i].norm());
                    let r = h_try * e.norm() / scale;
                    err_sq += r * r;
                }
                let err = (err_sq / n as f64).sqrt();

                if err <= 1.0 {
                    t += h_try;
                    std::mem::swap(&mut y, &mut ynew);
                    k.swap(0, 6); // FSAL
                    let fac = (0.9 * err.powf(-0.2)).clamp(0.2, 5.0);
                    h = (h_try * fac).max(self.h_min);
                } else {
                    let fac = (0.9 * err.powf(-0.2)).clamp(0.2, 1.0);
                    h = h_try * fac;
                    if h < self.h_min {
                        return Err(IntegratorError::StepCollapse { t, h });
                    }
                    // k[0] still holds f(t, y); retry
                }
            }
            t = t_node;
            observe(node_idx, t, &y);
        }
        Ok(y)
    }
}

/// Fixed-step classical RK4 across `nodes`, each interval split into
/// `substeps` equal steps. Used for convergence-order checks.
pub fn rk4_fixed<F, O>(
    mut f: F,
    y0: &[C64],
    nodes: &[f64],
    substeps: usize,
    mut observe: O,
) -> Result<Vec<C64>, IntegratorError>
where
    F: FnMut(f64, &[C64], &mut [C64]),
    O: FnMut(usize, f64, &[C64]),
{
    if nodes.len() < 2 || nodes.windows(2).any(|w| w[1] <= w[0]) {
        return Err(IntegratorError::BadNodes);
    }
    let n = y0.len();
    let mut y = y0.to_vec();
    observe(0, nodes[0], &y);
    let mut k1 = vec![C64::new(0.0, 0.0); n];
    let mut k2 = k1.clone();
    let mut k3 = k1.clone();
    let mut k4 = k1.clone();
    let mut ytmp = k1.clone();
    for (node_idx, pair) in nodes.windows(2).enumerate() {
        let h = (pair[1] - pair[0]) / substeps as f64;
        let mut t = pair[0];
        for _ in 0..substeps {
            f(t, &y, &mut k1);
            for i in 0..n {
                ytmp[i] = y[i] + 0.5 * h * k1[i];
            }
            f(t + 0.5 * h, &ytmp, &mut k2);
            for i in 0..n {
                ytmp[i] = y[i] + 0.5 * h * k2[i];
            }
            f(t + 0.5 * h, &ytmp, &mut k3);
            for i in 0..n {
                ytmp[i] = y[i] + h * k3[i];
            }
            f(t + h, &ytmp, &mut k4);
            for i in 0..n {
                y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
            t += h;
        }
        observe(node_idx + 1, pair[1], &y);
    }
    Ok(y)
}
