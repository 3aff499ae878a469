//! Exact single-excitation dynamics of the Λ atom coupled to a discretized
//! zero-temperature bath.
//!
//! Frame: energies are measured from the `e ↔ g1` resonance, which is placed
//! at the band centre. In this frame `|e, vac⟩` and `|g1, vac⟩` have zero
//! energy, `|g2, vac⟩` has energy `−Δ`, and `|g_l, 1_j⟩` has energy
//! `x_j − Δ·[l = 2]` with `x_j = ω_j − centre`. This is the frame in which
//! the master equation is written, so reduced states compare directly.
//!
//! The zero-excitation amplitudes `b_l` do not couple to anything. They are
//! stored as constants and the free phase of `|g2, vac⟩` is applied when the
//! reduced state is formed.

use serde::Serialize;
use thiserror::Error;

use crate::dynamics::ode::{integrate_dopri5, AdaptiveOptions, OdeError, StepStats};
use crate::linalg::{Mat3, C64};
use crate::model::DensityMatrix;

/// Tolerances used for the Schrödinger integration.
pub const MICRO_RTOL: f64 = 1e-12;
pub const MICRO_ATOL: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MicroError {
    #[error("invalid bath: {0}")]
    InvalidBath(String),
    #[error("initial state has norm {norm}, expected 1")]
    NotNormalized { norm: f64 },
    #[error("state has {got} modes per channel, bath has {expected}")]
    ModeMismatch { got: usize, expected: usize },
    #[error(transparent)]
    Ode(#[from] OdeError),
}

/// Coupling geometry between the two channels and the bath.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InterferenceSign {
    /// `η2ⱼ = +η2`: common bath, `γ12 = +√(γ1γ2)`.
    Plus,
    /// `η2ⱼ = −η2`: common bath, `γ12 = −√(γ1γ2)`.
    Minus,
    /// Interleaved disjoint supports: `γ12 = 0`.
    Independent,
}

impl InterferenceSign {
    pub fn from_int(sign: i32) -> Option<Self> {
        match sign {
            1 => Some(Self::Plus),
            -1 => Some(Self::Minus),
            0 => Some(Self::Independent),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiscretizedBath {
    pub frequencies: Vec<f64>,
    pub eta1: Vec<f64>,
    pub eta2: Vec<f64>,
    pub bandwidth: f64,
    pub center: f64,
}

impl DiscretizedBath {
    pub fn mode_count(&self) -> usize {
        self.frequencies.len()
    }

    /// Mode spacing `W/N`.
    pub fn spacing(&self) -> f64 {
        self.bandwidth / self.mode_count() as f64
    }

    /// First revival time `2π N / W` of the uniform grid.
    pub fn recurrence_time(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.spacing()
    }

    /// Rates implied by the grid: `γ_lm = (2π/W) Σ_j η_lj η_mj`.
    pub fn implied_rates(&self) -> ImpliedRates {
        let k = 2.0 * std::f64::consts::PI / self.bandwidth;
        let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
        ImpliedRates {
            gamma1: k * dot(&self.eta1, &self.eta1),
            gamma2: k * dot(&self.eta2, &self.eta2),
            gamma12: k * dot(&self.eta1, &self.eta2),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ImpliedRates {
    pub gamma1: f64,
    pub gamma2: f64,
    /// Equal to `γ21` for real couplings.
    pub gamma12: f64,
}

/// Flat band of `n` modes on the midpoint grid of `[centre − W/2, centre + W/2]`.
pub fn build_bath(
    gamma1: f64,
    gamma2: f64,
    sign: InterferenceSign,
    n: usize,
    bandwidth: f64,
    center: f64,
) -> Result<DiscretizedBath, MicroError> {
    if n < 2 {
        return Err(MicroError::InvalidBath(format!("need at least 2 modes, got {n}")));
    }
    if !(bandwidth > 0.0) || !bandwidth.is_finite() || !center.is_finite() {
        return Err(MicroError::InvalidBath(format!("bandwidth {bandwidth} / centre {center}")));
    }
    if !(gamma1 >= 0.0 && gamma2 >= 0.0) {
        return Err(MicroError::InvalidBath("rates must be non-negative".into()));
    }
    let dw = bandwidth / n as f64;
    let frequencies: Vec<f64> = (0..n).map(|j| center - 0.5 * bandwidth + (j as f64 + 0.5) * dw).collect();
    // amplitude giving rate γ when spread evenly over `support` modes
    let amp = |gamma: f64, support: usize| (gamma * bandwidth / (2.0 * std::f64::consts::PI * support as f64)).sqrt();

    let (eta1, eta2) = match sign {
        InterferenceSign::Plus | InterferenceSign::Minus => {
            let s = if sign == InterferenceSign::Plus { 1.0 } else { -1.0 };
            (vec![amp(gamma1, n); n], vec![s * amp(gamma2, n); n])
        }
        InterferenceSign::Independent => {
            let (n_even, n_odd) = (n.div_ceil(2), n / 2);
            let (a1, a2) = (amp(gamma1, n_even), amp(gamma2, n_odd));
            let eta1 = (0..n).map(|j| if j % 2 == 0 { a1 } else { 0.0 }).collect();
            let eta2 = (0..n).map(|j| if j % 2 == 1 { a2 } else { 0.0 }).collect();
            (eta1, eta2)
        }
    };
    Ok(DiscretizedBath { frequencies, eta1, eta2, bandwidth, center })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SingleExcitationState {
    /// Amplitude of `|e, vac⟩`.
    pub c_e: C64,
    /// Amplitudes of `|g1, 1_j⟩`.
    pub c1: Vec<C64>,
    /// Amplitudes of `|g2, 1_j⟩`.
    pub c2: Vec<C64>,
    /// Amplitudes of `|g1, vac⟩`, `|g2, vac⟩` at time zero.
    pub b: [C64; 2],
    /// Phase `Δ·t` accumulated by `|g2, vac⟩`.
    pub ground_phase: f64,
}

impl SingleExcitationState {
    pub fn excited(modes: usize) -> Self {
        Self::from_atom(C64::new(1.0, 0.0), [C64::new(0.0, 0.0); 2], modes)
    }

    /// Atom in `c_e|e⟩ + b1|g1⟩ + b2|g2⟩`, bath in vacuum.
    pub fn from_atom(c_e: C64, b: [C64; 2], modes: usize) -> Self {
        let zero = vec![C64::new(0.0, 0.0); modes];
        Self { c_e, c1: zero.clone(), c2: zero, b, ground_phase: 0.0 }
    }

    pub fn norm_sqr(&self) -> f64 {
        self.c_e.norm_sqr()
            + self.c1.iter().chain(&self.c2).map(|c| c.norm_sqr()).sum::<f64>()
            + self.b.iter().map(|c| c.norm_sqr()).sum::<f64>()
    }

    /// Current amplitudes of `|g1, vac⟩`, `|g2, vac⟩`.
    pub fn ground_amplitudes(&self) -> [C64; 2] {
        [self.b[0], self.b[1] * C64::from_polar(1.0, self.ground_phase)]
    }

    fn pack(&self) -> Vec<C64> {
        let mut v = Vec::with_capacity(1 + 2 * self.c1.len());
        v.push(self.c_e);
        v.extend_from_slice(&self.c1);
        v.extend_from_slice(&self.c2);
        v
    }

    fn unpack(y: &[C64], b: [C64; 2], ground_phase: f64) -> Self {
        let n = (y.len() - 1) / 2;
        Self { c_e: y[0], c1: y[1..=n].to_vec(), c2: y[n + 1..].to_vec(), b, ground_phase }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MicroTrajectory {
    pub times: Vec<f64>,
    pub states: Vec<SingleExcitationState>,
    pub stats: StepStats,
    /// Largest `|‖ψ(t)‖² − ‖ψ(0)‖²|` over the samples.
    pub max_norm_drift: f64,
}

/// Integrates the `2N + 1` coupled amplitudes with adaptive Dormand–Prince.
pub fn evolve_schrodinger(
    bath: &DiscretizedBath,
    psi0: &SingleExcitationState,
    delta: f64,
    t_final: f64,
    sample_times: &[f64],
) -> Result<MicroTrajectory, MicroError> {
    let n = bath.mode_count();
    if psi0.c1.len() != n || psi0.c2.len() != n {
        return Err(MicroError::ModeMismatch { got: psi0.c1.len(), expected: n });
    }
    let norm0 = psi0.norm_sqr();
    if (norm0 - 1.0).abs() > 1e-10 {
        return Err(MicroError::NotNormalized { norm: norm0.sqrt() });
    }
    let detuning: Vec<f64> = bath.frequencies.iter().map(|w| w - bath.center).collect();
    let minus_i = C64::new(0.0, -1.0);
    let rhs = |y: &[C64], dy: &mut [C64]| {
        let ce = y[0];
        let mut acc = C64::new(0.0, 0.0);
        for j in 0..n {
            let (a1, a2) = (y[1 + j], y[1 + n + j]);
            acc += a1 * bath.eta1[j] + a2 * bath.eta2[j];
            dy[1 + j] = minus_i * (a1 * detuning[j] + ce * bath.eta1[j]);
            dy[1 + n + j] = minus_i * (a2 * (detuning[j] - delta) + ce * bath.eta2[j]);
        }
        dy[0] = minus_i * acc;
    };
    let out = integrate_dopri5(rhs, &psi0.pack(), t_final, sample_times, &AdaptiveOptions::new(MICRO_RTOL, MICRO_ATOL))?;
    let states: Vec<SingleExcitationState> = out
        .samples
        .iter()
        .zip(sample_times)
        .map(|(y, t)| SingleExcitationState::unpack(y, psi0.b, psi0.ground_phase + delta * t))
        .collect();
    let max_norm_drift = states.iter().map(|s| (s.norm_sqr() - norm0).abs()).fold(0.0, f64::max);
    Ok(MicroTrajectory { times: sample_times.to_vec(), states, stats: out.stats, max_norm_drift })
}

/// Partial trace over the bath.
pub fn reduced_density(state: &SingleExcitationState) -> DensityMatrix {
    let b = state.ground_amplitudes();
    let mut m = Mat3::zeros();
    m[(0, 0)] = C64::new(state.c_e.norm_sqr(), 0.0);
    let modes = [&state.c1, &state.c2];
    for l in 0..2 {
        m[(0, l + 1)] = state.c_e * b[l].conj();
        m[(l + 1, 0)] = m[(0, l + 1)].conj();
        for k in 0..2 {
            let bath: C64 = modes[l].iter().zip(modes[k]).map(|(x, y)| x * y.conj()).sum();
            m[(l + 1, k + 1)] = b[l] * b[k].conj() + bath;
        }
    }
    DensityMatrix::from_raw(m)
}
