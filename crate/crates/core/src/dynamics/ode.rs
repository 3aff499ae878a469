//! Explicit integrators for autonomous linear-or-not complex systems
//! `y' = f(y)`: classical RK4 and Dormand–Prince 5(4) with PI step control
//! and continuous (dense) output.

use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OdeError {
    #[error("step size underflow: h = {h:e} at t = {t} (t_final = {t_final})")]
    StepUnderflow { t: f64, h: f64, t_final: f64 },
    #[error("step budget of {max_steps} exhausted at t = {t}")]
    StepBudgetExceeded { t: f64, max_steps: usize },
    #[error("invalid tolerances: rtol = {rtol:e}, atol = {atol:e}")]
    InvalidTolerance { rtol: f64, atol: f64 },
    #[error("sample times must be ascending within [0, t_final]")]
    BadSampleTimes,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdaptiveOptions {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
    pub initial_step: Option<f64>,
}

impl AdaptiveOptions {
    pub fn new(rtol: f64, atol: f64) -> Self {
        Self { rtol, atol, max_steps: 10_000_000, initial_step: None }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct StepStats {
    pub accepted: usize,
    pub rejected: usize,
    pub evaluations: usize,
}

pub struct AdaptiveOutput {
    /// One state per requested sample time.
    pub samples: Vec<Vec<Complex64>>,
    pub stats: StepStats,
}

fn axpy(out: &mut [Complex64], base: &[Complex64], h: f64, terms: &[(f64, &[Complex64])]) {
    for i in 0..out.len() {
        let mut acc = Complex64::new(0.0, 0.0);
        for (c, k) in terms {
            if *c != 0.0 {
                acc += k[i] * *c;
            }
        }
        out[i] = base[i] + acc * h;
    }
}

/// One classical fourth-order Runge–Kutta step in place.
pub fn rk4_step<F>(f: &mut F, y: &mut [Complex64], h: f64, scratch: &mut Rk4Scratch)
where
    F: FnMut(&[Complex64], &mut [Complex64]),
{
    let Rk4Scratch { k1, k2, k3, k4, tmp } = scratch;
    f(y, k1);
    axpy(tmp, y, 0.5 * h, &[(1.0, k1)]);
    f(tmp, k2);
    axpy(tmp, y, 0.5 * h, &[(1.0, k2)]);
    f(tmp, k3);
    axpy(tmp, y, h, &[(1.0, k3)]);
    f(tmp, k4);
    for i in 0..y.len() {
        y[i] += (k1[i] + (k2[i] + k3[i]) * 2.0 + k4[i]) * (h / 6.0);
    }
}

pub struct Rk4Scratch {
    k1: Vec<Complex64>,
    k2: Vec<Complex64>,
    k3: Vec<Complex64>,
    k4: Vec<Complex64>,
    tmp: Vec<Complex64>,
}

impl Rk4Scratch {
    pub fn new(dim: usize) -> Self {
        let z = vec![Complex64::new(0.0, 0.0); dim];
        Self { k1: z.clone(), k2: z.clone(), k3: z.clone(), k4: z.clone(), tmp: z }
    }
}

// Autonomous systems only, so the stage nodes c_i are not needed.
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

// PI controller constants (Hairer–Wanner defaults).
const SAFETY: f64 = 0.9;
const BETA: f64 = 0.04;
const FAC_MIN: f64 = 0.2;
const FAC_MAX: f64 = 10.0;

fn max_norm(v: &[Complex64]) -> f64 {
    v.iter().fold(0.0, |a, z| a.max(z.norm()))
}

/// Dormand–Prince 5(4) with dense output at `sample_times`.
///
/// The local error estimate of every accepted step satisfies the scaled RMS
/// bound `sqrt(mean((err_i / (atol + rtol·max(|y_i|, |y_new_i|)))²)) ≤ 1`.
/// Steps are never forced to land on sample times; samples are evaluated
/// from the fourth-order continuous extension.
pub fn integrate_dopri5<F>(
    mut f: F,
    y0: &[Complex64],
    t_final: f64,
    sample_times: &[f64],
    opts: &AdaptiveOptions,
) -> Result<AdaptiveOutput, OdeError>
where
    F: FnMut(&[Complex64], &mut [Complex64]),
{
    if !(opts.rtol >= 1e-12) || !(opts.atol > 0.0) {
        return Err(OdeError::InvalidTolerance { rtol: opts.rtol, atol: opts.atol });
    }
    if sample_times.windows(2).any(|w| !(w[0] < w[1]))
        || sample_times.iter().any(|t| !(*t >= 0.0 && *t <= t_final))
    {
        return Err(OdeError::BadSampleTimes);
    }

    let n = y0.len();
    let zero = Complex64::new(0.0, 0.0);
    let mut stats = StepStats::default();
    let mut samples = Vec::with_capacity(sample_times.len());
    let mut next_sample = 0;
    while next_sample < sample_times.len() && sample_times[next_sample] == 0.0 {
        samples.push(y0.to_vec());
        next_sample += 1;
    }
    if t_final <= 0.0 {
        return Ok(AdaptiveOutput { samples, stats });
    }

    let mut y = y0.to_vec();
    let mut k1 = vec![zero; n];
    let mut k2 = vec![zero; n];
    let mut k3 = vec![zero; n];
    let mut k4 = vec![zero; n];
    let mut k5 = vec![zero; n];
    let mut k6 = vec![zero; n];
    let mut k7 = vec![zero; n];
    let mut tmp = vec![zero; n];
    let mut y_new = vec![zero; n];
    let mut cont = [vec![zero; n], vec![zero; n], vec![zero; n], vec![zero; n], vec![zero; n]];

    f(&y, &mut k1);
    stats.evaluations += 1;

    let mut h = opts.initial_step.unwrap_or_else(|| {
        let dnf = max_norm(&k1);
        let dny = max_norm(&y);
        let h = if dnf <= 1e-10 || dny <= 1e-10 { 1e-6 } else { 0.01 * dny / dnf };
        h.min(t_final).max(1e-10 * t_final)
    });
    let mut t = 0.0;
    let mut facold: f64 = 1e-4;
    let mut last_rejected = false;
    let h_min = 1e-14 * t_final;

    while t < t_final {
        if stats.accepted + stats.rejected >= opts.max_steps {
            return Err(OdeError::StepBudgetExceeded { t, max_steps: opts.max_steps });
        }
        if h < h_min {
            return Err(OdeError::StepUnderflow { t, h, t_final });
        }
        let last = t + h >= t_final;
        if last {
            h = t_final - t;
        }

        axpy(&mut tmp, &y, h, &[(A21, &k1)]);
        f(&tmp, &mut k2);
        axpy(&mut tmp, &y, h, &[(A31, &k1), (A32, &k2)]);
        f(&tmp, &mut k3);
        axpy(&mut tmp, &y, h, &[(A41, &k1), (A42, &k2), (A43, &k3)]);
        f(&tmp, &mut k4);
        axpy(&mut tmp, &y, h, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]);
        f(&tmp, &mut k5);
        axpy(&mut tmp, &y, h, &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]);
        f(&tmp, &mut k6);
        axpy(&mut y_new, &y, h, &[(A71, &k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)]);
        f(&y_new, &mut k7);
        stats.evaluations += 6;

        let mut err_sq = 0.0;
        for i in 0..n {
            let e = (k1[i] * E1 + k3[i] * E3 + k4[i] * E4 + k5[i] * E5 + k6[i] * E6 + k7[i] * E7) * h;
            let sk = opts.atol + opts.rtol * y[i].norm().max(y_new[i].norm());
            err_sq += (e.norm() / sk).powi(2);
        }
        let err = (err_sq / n.max(1) as f64).sqrt();

        let fac11 = err.powf(0.2 - BETA * 0.75);
        if err <= 1.0 {
            let fac = (fac11 / facold.powf(BETA) / SAFETY).clamp(1.0 / FAC_MAX, 1.0 / FAC_MIN);
            let mut h_new = h / fac;
            facold = err.max(1e-4);
            stats.accepted += 1;

            let t_new = if last { t_final } else { t + h };
            if next_sample < sample_times.len() && sample_times[next_sample] <= t_new {
                for i in 0..n {
                    let dy = y_new[i] - y[i];
                    let bspl = k1[i] * h - dy;
                    cont[0][i] = y[i];
                    cont[1][i] = dy;
                    cont[2][i] = bspl;
                    cont[3][i] = dy - k7[i] * h - bspl;
                    cont[4][i] = (k1[i] * D1 + k3[i] * D3 + k4[i] * D4 + k5[i] * D5 + k6[i] * D6 + k7[i] * D7) * h;
                }
                while next_sample < sample_times.len() && sample_times[next_sample] <= t_new {
                    let ts = sample_times[next_sample];
                    let out = if ts == t_new {
                        y_new.clone()
                    } else {
                        let s = (ts - t) / h;
                        let s1 = 1.0 - s;
                        (0..n)
                            .map(|i| {
                                cont[0][i] + (cont[1][i] + (cont[2][i] + (cont[3][i] + cont[4][i] * s1) * s) * s1) * s
                            })
                            .collect()
                    };
                    samples.push(out);
                    next_sample += 1;
                }
            }

            std::mem::swap(&mut y, &mut y_new);
            std::mem::swap(&mut k1, &mut k7);
            t = t_new;
            if last_rejected {
                h_new = h_new.min(h);
            }
            last_rejected = false;
            h = h_new;
        } else {
            h /= (fac11 / SAFETY).min(1.0 / FAC_MIN);
            stats.rejected += 1;
            last_rejected = true;
        }
    }

    Ok(AdaptiveOutput { samples, stats })
}
