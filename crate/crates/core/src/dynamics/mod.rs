//! Time evolution of the master equation and extraction of long-time states.
//!
//! Three independent propagation routes are provided: fixed-step RK4
//! ([`evolve_fixed`]), adaptive Dormand–Prince ([`evolve_adaptive`]) and the
//! matrix exponential ([`propagator`]). Asymptotic states come from the
//! spectral projection in [`spectral`], with long-time propagation as the
//! fallback for defective generators.

pub mod ode;
pub mod spectral;

use num_complex::Complex64;
use thiserror::Error;

use crate::generator::Liouvillian;
use crate::linalg::{expm, unvectorize, vectorize, Mat9, Vec9};
use crate::model::DensityMatrix;

pub use ode::{AdaptiveOptions, OdeError, StepStats};
pub use spectral::{asymptotic_state, decompose, decompose_with, SpectralDecomposition};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DynamicsError {
    #[error("dt = {dt:e} exceeds the stability limit {limit:e} = 0.1 / max|L|")]
    StepTooLarge { dt: f64, limit: f64 },
    #[error("invalid time argument {0}")]
    InvalidTime(f64),
    #[error(transparent)]
    Ode(#[from] OdeError),
    #[error("Liouvillian is defective: {0}")]
    DefectiveMatrix(String),
    #[error("long-time evolution did not converge: {0}")]
    NoConvergence(String),
}

impl DynamicsError {
    /// True for failures of a numerical procedure rather than bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            DynamicsError::Ode(OdeError::StepUnderflow { .. } | OdeError::StepBudgetExceeded { .. })
                | DynamicsError::DefectiveMatrix(_)
                | DynamicsError::NoConvergence(_)
        )
    }
}

/// Step counts and worst invariant drift over the sampled states.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct TrajectoryStats {
    pub steps: usize,
    pub rejected_steps: usize,
    pub evaluations: usize,
    pub max_trace_drift: f64,
    pub max_hermiticity_drift: f64,
    pub min_eigenvalue: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<DensityMatrix>,
    pub stats: TrajectoryStats,
}

impl Trajectory {
    fn from_samples(times: Vec<f64>, states: Vec<DensityMatrix>, steps: StepStats) -> Self {
        let mut stats = TrajectoryStats {
            steps: steps.accepted,
            rejected_steps: steps.rejected,
            evaluations: steps.evaluations,
            min_eigenvalue: f64::INFINITY,
            ..Default::default()
        };
        for s in &states {
            let r = s.residuals();
            stats.max_trace_drift = stats.max_trace_drift.max(r.trace);
            stats.max_hermiticity_drift = stats.max_hermiticity_drift.max(r.hermiticity);
            stats.min_eigenvalue = stats.min_eigenvalue.min(r.min_eigenvalue);
        }
        Self { times, states, stats }
    }

    pub fn last(&self) -> &DensityMatrix {
        self.states.last().expect("trajectory holds at least the initial state")
    }

    /// Largest entry-wise gap between two trajectories sampled on the same times.
    pub fn max_gap(&self, other: &Trajectory) -> f64 {
        assert_eq!(self.times.len(), other.times.len(), "trajectories sampled differently");
        self.states.iter().zip(&other.states).map(|(a, b)| a.max_abs_diff(b)).fold(0.0, f64::max)
    }
}

fn linear_rhs(l: &Mat9) -> impl FnMut(&[Complex64], &mut [Complex64]) + '_ {
    move |y, dy| {
        for i in 0..9 {
            let mut acc = Complex64::new(0.0, 0.0);
            for j in 0..9 {
                acc += l[(i, j)] * y[j];
            }
            dy[i] = acc;
        }
    }
}

fn to_state(v: &[Complex64]) -> DensityMatrix {
    DensityMatrix::from_raw(unvectorize(&Vec9::from_column_slice(v)))
}

/// Classical RK4 with uniform steps no larger than `dt`; every step is sampled.
pub fn evolve_fixed(l: &Liouvillian, rho0: &DensityMatrix, t_final: f64, dt: f64) -> Result<Trajectory, DynamicsError> {
    if !(t_final >= 0.0) || !t_final.is_finite() {
        return Err(DynamicsError::InvalidTime(t_final));
    }
    if !(dt > 0.0) {
        return Err(DynamicsError::InvalidTime(dt));
    }
    let norm = l.max_abs();
    if norm > 0.0 {
        let limit = 0.1 / norm;
        if dt > limit {
            return Err(DynamicsError::StepTooLarge { dt, limit });
        }
    }
    let steps = if t_final == 0.0 { 0 } else { ((t_final / dt) * (1.0 - 1e-12)).ceil().max(1.0) as usize };
    let h = if steps == 0 { 0.0 } else { t_final / steps as f64 };

    let mut y: Vec<Complex64> = vectorize(rho0.matrix()).iter().copied().collect();
    let mut scratch = ode::Rk4Scratch::new(9);
    let mut f = linear_rhs(&l.matrix);
    let mut times = Vec::with_capacity(steps + 1);
    let mut states = Vec::with_capacity(steps + 1);
    times.push(0.0);
    states.push(*rho0);
    for k in 1..=steps {
        ode::rk4_step(&mut f, &mut y, h, &mut scratch);
        times.push(if k == steps { t_final } else { k as f64 * h });
        states.push(to_state(&y));
    }
    let stats = StepStats { accepted: steps, rejected: 0, evaluations: 4 * steps };
    Ok(Trajectory::from_samples(times, states, stats))
}

/// Number of uniformly spaced samples produced by [`evolve_adaptive`].
pub const DEFAULT_SAMPLES: usize = 201;

/// Adaptive Dormand–Prince evolution sampled at [`DEFAULT_SAMPLES`] uniform times.
pub fn evolve_adaptive(
    l: &Liouvillian,
    rho0: &DensityMatrix,
    t_final: f64,
    rtol: f64,
    atol: f64,
) -> Result<Trajectory, DynamicsError> {
    if !(t_final >= 0.0) || !t_final.is_finite() {
        return Err(DynamicsError::InvalidTime(t_final));
    }
    let times = if t_final == 0.0 { vec![0.0] } else { uniform_times(t_final, DEFAULT_SAMPLES) };
    evolve_adaptive_at(l, rho0, &times, rtol, atol)
}

/// `n` uniformly spaced times on `[0, t_final]`, endpoints exact.
pub fn uniform_times(t_final: f64, n: usize) -> Vec<f64> {
    let n = n.max(2);
    (0..n)
        .map(|k| if k == n - 1 { t_final } else { t_final * k as f64 / (n - 1) as f64 })
        .collect()
}

/// Adaptive evolution with dense output at the given ascending sample times.
pub fn evolve_adaptive_at(
    l: &Liouvillian,
    rho0: &DensityMatrix,
    sample_times: &[f64],
    rtol: f64,
    atol: f64,
) -> Result<Trajectory, DynamicsError> {
    evolve_adaptive_with(l, rho0, sample_times, &AdaptiveOptions::new(rtol, atol))
}

pub fn evolve_adaptive_with(
    l: &Liouvillian,
    rho0: &DensityMatrix,
    sample_times: &[f64],
    opts: &AdaptiveOptions,
) -> Result<Trajectory, DynamicsError> {
    let t_final = sample_times.last().copied().unwrap_or(0.0);
    let y0: Vec<Complex64> = vectorize(rho0.matrix()).iter().copied().collect();
    let out = ode::integrate_dopri5(linear_rhs(&l.matrix), &y0, t_final, sample_times, opts)?;
    let states = out.samples.iter().map(|v| to_state(v)).collect();
    Ok(Trajectory::from_samples(sample_times.to_vec(), states, out.stats))
}

/// `exp(L t)` by scaling and squaring.
pub fn propagator(l: &Liouvillian, t: f64) -> Result<Mat9, DynamicsError> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(DynamicsError::InvalidTime(t));
    }
    if t == 0.0 {
        return Ok(Mat9::identity());
    }
    Ok(expm(&(l.matrix * Complex64::new(t, 0.0))))
}

/// Applies a propagator to a state.
pub fn propagate(u: &Mat9, rho: &DensityMatrix) -> DensityMatrix {
    DensityMatrix::from_raw(unvectorize(&(u * vectorize(rho.matrix()))))
}

/// Trajectory from the exact propagator evaluated at each sample time.
pub fn evolve_exact(l: &Liouvillian, rho0: &DensityMatrix, sample_times: &[f64]) -> Result<Trajectory, DynamicsError> {
    let states = sample_times
        .iter()
        .map(|t| propagator(l, *t).map(|u| propagate(&u, rho0)))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Trajectory::from_samples(sample_times.to_vec(), states, StepStats::default()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generator::build_liouvillian;
    use crate::model::{DecayRates, Level, SystemParams};

    fn params() -> SystemParams {
        SystemParams::new(
            1.0,
            1.25,
            DecayRates { gamma1: 0.6, gamma2: 0.4, gamma3: 0.3, gamma12: 0.2, gamma21: 0.3 },
            f64::INFINITY,
        )
    }

    #[test]
    fn zero_generator_keeps_state() {
        let p = SystemParams::new(1.0, 1.0, DecayRates::default(), f64::INFINITY);
        let l = build_liouvillian(&p);
        let rho = DensityMatrix::maximally_mixed();
        let tr = evolve_fixed(&l, &rho, 3.0, 0.5).unwrap();
        assert!(tr.states.iter().all(|s| *s == rho));
    }

    #[test]
    fn excited_population_decays_exponentially() {
        let p = params();
        let l = build_liouvillian(&p);
        let tr = evolve_fixed(&l, &DensityMatrix::basis_state(Level::E), 1.0, 1e-3).unwrap();
        let pe = tr.last().populations()[0];
        assert!((pe - (-1.0f64).exp()).abs() < 1e-8, "{pe}");
        assert_eq!(*tr.times.last().unwrap(), 1.0);
        assert!(tr.times.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn step_guard() {
        let l = build_liouvillian(&params());
        let err = evolve_fixed(&l, &DensityMatrix::maximally_mixed(), 1.0, 1.0).unwrap_err();
        assert!(matches!(err, DynamicsError::StepTooLarge { .. }));
    }

    #[test]
    fn adaptive_zero_horizon() {
        let l = build_liouvillian(&params());
        let rho = DensityMatrix::basis_state(Level::G1);
        let tr = evolve_adaptive(&l, &rho, 0.0, 1e-8, 1e-10).unwrap();
        assert_eq!(tr.states, vec![rho]);
        assert_eq!(tr.times, vec![0.0]);
    }

    #[test]
    fn propagator_identity_and_semigroup() {
        let l = build_liouvillian(&params());
        assert_eq!(propagator(&l, 0.0).unwrap(), Mat9::identity());
        let a = propagator(&l, 0.7).unwrap();
        let b = propagator(&l, 1.9).unwrap();
        let ab = propagator(&l, 2.6).unwrap();
        assert!(crate::linalg::max_abs(&(a * b - ab)) < 1e-12);
        assert!(propagator(&l, -1.0).is_err());
    }
}
