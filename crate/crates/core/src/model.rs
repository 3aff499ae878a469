//! Domain types: system parameters, density matrices, Bloch vectors and the
//! classification of long-time behaviour.
//!
//! Units: ħ = k_B = 1. Inverse temperature `beta = f64::INFINITY` is the
//! exact zero-temperature representation; every thermal occupation then
//! evaluates to exactly zero.

use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{hermitian_eigenvalues, hermiticity_residual, Mat3, C64};

/// Hermiticity tolerance for a valid [`DensityMatrix`].
pub const HERMITICITY_TOL: f64 = 1e-12;
/// Trace tolerance for a valid [`DensityMatrix`].
pub const TRACE_TOL: f64 = 1e-12;
/// Most negative eigenvalue accepted for a valid [`DensityMatrix`].
pub const POSITIVITY_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
#[error("thermal occupation undefined for omega = {omega} (beta = {beta})")]
pub struct DomainError {
    pub omega: f64,
    pub beta: f64,
}

/// Bose–Einstein occupation `1 / (exp(βω) − 1)`.
///
/// Returns exactly `0.0` for `beta = +∞`.
pub fn thermal_occupation(omega: f64, beta: f64) -> Result<f64, DomainError> {
    if !(omega > 0.0) || !omega.is_finite() || !(beta > 0.0) {
        return Err(DomainError { omega, beta });
    }
    if beta.is_infinite() {
        return Ok(0.0);
    }
    Ok(1.0 / (beta * omega).exp_m1())
}

/// Ohmic spectral mode for the `g1 ↔ g2` channel: `γ3(ω) = α ω` below a
/// hard cutoff and zero above it.
///
/// With this mode the thermal product `γ3(Δ) n̄(Δ)` tends to `α T` as
/// `Δ → 0`, so the degenerate point is reachable at finite temperature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OhmicSpectrum {
    pub alpha: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cutoff: Option<f64>,
}

impl OhmicSpectrum {
    pub fn new(alpha: f64) -> Self {
        Self { alpha, cutoff: None }
    }

    pub fn rate(&self, omega: f64) -> f64 {
        match self.cutoff {
            Some(c) if omega > c => 0.0,
            _ => self.alpha * omega,
        }
    }

    /// `γ3(ω) · n̄(ω)` with the `ω → 0` limit `α / β` taken analytically.
    fn upward_rate(&self, omega: f64, beta: f64) -> f64 {
        if beta.is_infinite() {
            return 0.0;
        }
        if omega == 0.0 {
            return self.alpha / beta;
        }
        self.rate(omega) / (beta * omega).exp_m1()
    }
}

/// Decay rates of the three channels plus the two interference rates.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct DecayRates {
    pub gamma1: f64,
    pub gamma2: f64,
    pub gamma3: f64,
    pub gamma12: f64,
    pub gamma21: f64,
}

impl DecayRates {
    /// Λ-system rates with `γ3 = 0`.
    pub fn lambda(gamma1: f64, gamma2: f64, gamma12: f64, gamma21: f64) -> Self {
        Self { gamma1, gamma2, gamma3: 0.0, gamma12, gamma21 }
    }
}

/// Single source of model truth for the three-level atom.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    /// Transition frequency `e ↔ g1`.
    pub omega1: f64,
    /// Transition frequency `e ↔ g2`.
    pub omega2: f64,
    /// Ground splitting `Δ = ω2 − ω1`.
    pub delta: f64,
    pub gamma1: f64,
    pub gamma2: f64,
    pub gamma3: f64,
    pub gamma12: f64,
    pub gamma21: f64,
    /// Inverse temperature; `+∞` is zero temperature.
    pub beta: f64,
    /// When set, `gamma3` is derived from this spectrum at `delta`.
    pub gamma3_ohmic: Option<OhmicSpectrum>,
}

impl SystemParams {
    pub fn new(omega1: f64, omega2: f64, rates: DecayRates, beta: f64) -> Self {
        Self {
            omega1,
            omega2,
            delta: omega2 - omega1,
            gamma1: rates.gamma1,
            gamma2: rates.gamma2,
            gamma3: rates.gamma3,
            gamma12: rates.gamma12,
            gamma21: rates.gamma21,
            beta,
            gamma3_ohmic: None,
        }
    }

    /// Parameters whose `γ3` follows an Ohmic spectrum; `rates.gamma3` is ignored.
    pub fn with_ohmic_gamma3(omega1: f64, omega2: f64, rates: DecayRates, spectrum: OhmicSpectrum, beta: f64) -> Self {
        let mut p = Self::new(omega1, omega2, rates, beta);
        p.gamma3_ohmic = Some(spectrum);
        p.gamma3 = spectrum.rate(p.delta);
        p
    }

    pub fn rates(&self) -> DecayRates {
        DecayRates {
            gamma1: self.gamma1,
            gamma2: self.gamma2,
            gamma3: self.gamma3,
            gamma12: self.gamma12,
            gamma21: self.gamma21,
        }
    }

    /// Same parameters at another inverse temperature.
    pub fn with_beta(mut self, beta: f64) -> Self {
        self.beta = beta;
        self
    }

    /// Same parameters at another temperature; `T = 0` maps to `β = +∞`.
    pub fn with_temperature(self, temperature: f64) -> Self {
        self.with_beta(inverse_temperature(temperature))
    }

    /// Moves `g1` so that the splitting becomes `delta`, keeping `ω1` fixed.
    /// An Ohmic `γ3` is re-evaluated at the new splitting.
    pub fn with_splitting(mut self, delta: f64) -> Self {
        self.omega2 = self.omega1 + delta;
        self.delta = self.omega2 - self.omega1;
        if let Some(s) = self.gamma3_ohmic {
            self.gamma3 = s.rate(self.delta);
        }
        self
    }

    pub fn with_rates(mut self, rates: DecayRates) -> Self {
        self.gamma1 = rates.gamma1;
        self.gamma2 = rates.gamma2;
        self.gamma3 = rates.gamma3;
        self.gamma12 = rates.gamma12;
        self.gamma21 = rates.gamma21;
        if let Some(s) = self.gamma3_ohmic {
            self.gamma3 = s.rate(self.delta);
        }
        self
    }

    pub fn temperature(&self) -> f64 {
        if self.beta.is_infinite() {
            0.0
        } else {
            1.0 / self.beta
        }
    }

    pub fn is_zero_temperature(&self) -> bool {
        self.beta.is_infinite()
    }

    /// Thermal occupations `(n̄(ω1), n̄(ω2), n̄(Δ))`. `n̄(Δ)` is `+∞` at
    /// `Δ = 0` and finite temperature.
    pub fn occupations(&self) -> Occupations {
        let n = |w: f64| thermal_occupation(w, self.beta).unwrap_or(f64::NAN);
        let n_delta = if self.beta.is_infinite() {
            0.0
        } else if self.delta == 0.0 {
            f64::INFINITY
        } else {
            n(self.delta)
        };
        Occupations { n1: n(self.omega1), n2: n(self.omega2), n_delta }
    }

    /// Jump-rate coefficients entering the dissipators.
    pub fn channel_rates(&self) -> ChannelRates {
        let occ = self.occupations();
        let up3 = match self.gamma3_ohmic {
            Some(s) => s.upward_rate(self.delta, self.beta),
            None if self.gamma3 == 0.0 => 0.0,
            None => self.gamma3 * occ.n_delta,
        };
        ChannelRates {
            down1: self.gamma1 * (occ.n1 + 1.0),
            up1: self.gamma1 * occ.n1,
            down2: self.gamma2 * (occ.n2 + 1.0),
            up2: self.gamma2 * occ.n2,
            down3: self.gamma3 + up3,
            up3,
            cross_down: 0.5 * (self.gamma12 * (occ.n1 + 1.0) + self.gamma21 * (occ.n2 + 1.0)),
            cross_up1: 0.5 * self.gamma12 * occ.n1,
            cross_up2: 0.5 * self.gamma21 * occ.n2,
        }
    }

    /// Largest of the positive rates, used to pick time scales.
    pub fn max_rate(&self) -> f64 {
        [self.gamma1, self.gamma2, self.gamma3, self.gamma12.abs(), self.gamma21.abs()]
            .into_iter()
            .fold(0.0, f64::max)
    }

    /// Smallest strictly positive decay rate among `γ1, γ2, γ3`.
    pub fn min_positive_rate(&self) -> Option<f64> {
        [self.gamma1, self.gamma2, self.gamma3]
            .into_iter()
            .filter(|g| *g > 0.0)
            .reduce(f64::min)
    }
}

pub fn inverse_temperature(temperature: f64) -> f64 {
    if temperature == 0.0 {
        f64::INFINITY
    } else {
        1.0 / temperature
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Occupations {
    pub n1: f64,
    pub n2: f64,
    pub n_delta: f64,
}

/// Coefficients multiplying each dissipator term.
///
/// `down_l = γ_l (n̄_l + 1)`, `up_l = γ_l n̄_l`, the `g1 → g2` channel uses
/// `n̄(Δ)`, and the interference coefficients follow the cross dissipator:
/// `cross_down = [γ12 (n̄1 + 1) + γ21 (n̄2 + 1)] / 2`,
/// `cross_up1 = γ12 n̄1 / 2`, `cross_up2 = γ21 n̄2 / 2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelRates {
    pub down1: f64,
    pub up1: f64,
    pub down2: f64,
    pub up2: f64,
    pub down3: f64,
    pub up3: f64,
    pub cross_down: f64,
    pub cross_up1: f64,
    pub cross_up2: f64,
}

/// One violated parameter invariant.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind")]
pub enum Violation {
    NegativeRate { name: &'static str, value: f64 },
    NonPositiveFrequency { name: &'static str, value: f64 },
    InvalidTemperature { beta: f64 },
    DeltaMismatch { delta: f64, expected: f64 },
    OhmicRateMismatch { gamma3: f64, expected: f64 },
    DivergentOccupation { gamma3: f64, delta: f64, beta: f64 },
    KossakowskiViolation { block: &'static str, determinant: f64 },
}

impl Violation {
    pub fn name(&self) -> &'static str {
        match self {
            Violation::NegativeRate { .. } => "NegativeRate",
            Violation::NonPositiveFrequency { .. } => "NonPositiveFrequency",
            Violation::InvalidTemperature { .. } => "InvalidTemperature",
            Violation::DeltaMismatch { .. } => "DeltaMismatch",
            Violation::OhmicRateMismatch { .. } => "OhmicRateMismatch",
            Violation::DivergentOccupation { .. } => "DivergentOccupation",
            Violation::KossakowskiViolation { .. } => "KossakowskiViolation",
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NegativeRate { name, value } => write!(f, "negative rate {name} = {value}"),
            Violation::NonPositiveFrequency { name, value } => {
                write!(f, "frequency {name} = {value} must be positive")
            }
            Violation::InvalidTemperature { beta } => write!(f, "inverse temperature {beta} not in (0, +inf]"),
            Violation::DeltaMismatch { delta, expected } => {
                write!(f, "delta = {delta} differs from omega2 - omega1 = {expected}")
            }
            Violation::OhmicRateMismatch { gamma3, expected } => {
                write!(f, "gamma3 = {gamma3} differs from Ohmic rate {expected}")
            }
            Violation::DivergentOccupation { gamma3, delta, beta } => write!(
                f,
                "gamma3 = {gamma3} > 0 at delta = {delta} and finite beta = {beta}: n(delta) diverges"
            ),
            Violation::KossakowskiViolation { block, determinant } => {
                write!(f, "{block} Kossakowski block not positive semidefinite (det = {determinant})")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub struct ValidationError {
    pub violations: Vec<Violation>,
}

impl fmt::Display for ValidationError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid parameters: ")?;
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                write!(f, "; ")?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

impl ValidationError {
    pub fn contains(&self, name: &str) -> bool {
        self.violations.iter().any(|v| v.name() == name)
    }
}

/// Checks every parameter invariant and returns the parameters untouched
/// if all hold.
pub fn validate_params(raw: SystemParams) -> Result<SystemParams, ValidationError> {
    let mut violations = Vec::new();
    let p = &raw;

    for (name, value) in [("gamma1", p.gamma1), ("gamma2", p.gamma2), ("gamma3", p.gamma3)] {
        if !(value >= 0.0) {
            violations.push(Violation::NegativeRate { name, value });
        }
    }
    for (name, value) in [("omega1", p.omega1), ("omega2", p.omega2)] {
        if !(value > 0.0) || !value.is_finite() {
            violations.push(Violation::NonPositiveFrequency { name, value });
        }
    }
    if !(p.beta > 0.0) {
        violations.push(Violation::InvalidTemperature { beta: p.beta });
    }
    let expected = p.omega2 - p.omega1;
    let ulp = f64::EPSILON * p.omega1.abs().max(p.omega2.abs());
    if !((p.delta - expected).abs() <= ulp) || p.delta < 0.0 {
        violations.push(Violation::DeltaMismatch { delta: p.delta, expected });
    }
    if let Some(s) = p.gamma3_ohmic {
        let rate = s.rate(p.delta);
        if rate != p.gamma3 {
            violations.push(Violation::OhmicRateMismatch { gamma3: p.gamma3, expected: rate });
        }
        if !(s.alpha >= 0.0) {
            violations.push(Violation::NegativeRate { name: "gamma3_ohmic.alpha", value: s.alpha });
        }
    } else if p.beta.is_finite() && p.gamma3 > 0.0 && p.delta == 0.0 {
        violations.push(Violation::DivergentOccupation { gamma3: p.gamma3, delta: p.delta, beta: p.beta });
    }

    // Positivity of the two 2×2 Kossakowski blocks of the e ↔ g_l channels.
    if violations.is_empty() {
        let r = p.channel_rates();
        let down_det = r.down1 * r.down2 - r.cross_down * r.cross_down;
        let down_scale = (r.down1 * r.down2).abs().max(r.cross_down * r.cross_down).max(f64::MIN_POSITIVE);
        if down_det < -1e-12 * down_scale {
            violations.push(Violation::KossakowskiViolation { block: "downward", determinant: down_det });
        }
        let cross_up = r.cross_up1 + r.cross_up2;
        let up_det = r.up1 * r.up2 - cross_up * cross_up;
        let up_scale = (r.up1 * r.up2).abs().max(cross_up * cross_up).max(f64::MIN_POSITIVE);
        if up_det < -1e-12 * up_scale {
            violations.push(Violation::KossakowskiViolation { block: "upward", determinant: up_det });
        }
    }

    if violations.is_empty() {
        Ok(raw)
    } else {
        Err(ValidationError { violations })
    }
}

/// Basis labels in the fixed order `(e, g1, g2)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    E,
    G1,
    G2,
}

impl Level {
    pub const fn index(self) -> usize {
        match self {
            Level::E => 0,
            Level::G1 => 1,
            Level::G2 => 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StateError {
    #[error("amplitudes have norm {norm}, expected 1")]
    NormalizationError { norm: f64 },
    #[error("matrix is not Hermitian (residual {residual:e})")]
    NotHermitian { residual: f64 },
    #[error("trace is {trace}, expected 1")]
    BadTrace { trace: f64 },
    #[error("matrix has negative eigenvalue {min_eigenvalue:e}")]
    NotPositive { min_eigenvalue: f64 },
}

/// Deviations of a 3×3 matrix from the density-matrix invariants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateResiduals {
    pub hermiticity: f64,
    pub trace: f64,
    pub min_eigenvalue: f64,
}

/// 3×3 Hermitian, unit-trace, positive-semidefinite state of the atom.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityMatrix(Mat3);

impl DensityMatrix {
    /// Validates `m` against the density-matrix invariants.
    pub fn new(m: Mat3) -> Result<Self, StateError> {
        let r = residuals_of(&m);
        if r.hermiticity >= HERMITICITY_TOL {
            return Err(StateError::NotHermitian { residual: r.hermiticity });
        }
        if r.trace >= TRACE_TOL {
            return Err(StateError::BadTrace { trace: m.trace().re });
        }
        if r.min_eigenvalue < -POSITIVITY_TOL {
            return Err(StateError::NotPositive { min_eigenvalue: r.min_eigenvalue });
        }
        Ok(Self(m))
    }

    /// Wraps `m` without checking; integrators use this and track drift
    /// separately through [`DensityMatrix::residuals`].
    pub fn from_raw(m: Mat3) -> Self {
        Self(m)
    }

    pub fn basis_state(level: Level) -> Self {
        let mut m = Mat3::zeros();
        let i = level.index();
        m[(i, i)] = C64::new(1.0, 0.0);
        Self(m)
    }

    /// Projector onto `Σ a_i |i⟩` in the `(e, g1, g2)` basis.
    pub fn superposition(amplitudes: [Complex64; 3]) -> Result<Self, StateError> {
        let norm = amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if (norm - 1.0).abs() >= 1e-12 {
            return Err(StateError::NormalizationError { norm });
        }
        Ok(Self(Mat3::from_fn(|i, j| amplitudes[i] * amplitudes[j].conj())))
    }

    pub fn maximally_mixed() -> Self {
        Self(Mat3::identity() * C64::new(1.0 / 3.0, 0.0))
    }

    pub fn matrix(&self) -> &Mat3 {
        &self.0
    }

    pub fn into_matrix(self) -> Mat3 {
        self.0
    }

    pub fn element(&self, row: Level, col: Level) -> Complex64 {
        self.0[(row.index(), col.index())]
    }

    /// Populations `(ρ_ee, ρ_g1g1, ρ_g2g2)`.
    pub fn populations(&self) -> [f64; 3] {
        [self.0[(0, 0)].re, self.0[(1, 1)].re, self.0[(2, 2)].re]
    }

    /// Ground coherence `⟨σ_g2g1⟩ = ρ_g1g2`.
    pub fn ground_coherence(&self) -> Complex64 {
        self.0[(1, 2)]
    }

    pub fn eigenvalues(&self) -> [f64; 3] {
        hermitian_eigenvalues(&self.0)
    }

    pub fn residuals(&self) -> StateResiduals {
        residuals_of(&self.0)
    }

    /// `⟨ψ|ρ|ψ⟩` for a normalized ket.
    pub fn fidelity_with_pure(&self, ket: [Complex64; 3]) -> f64 {
        let mut acc = C64::new(0.0, 0.0);
        for i in 0..3 {
            for j in 0..3 {
                acc += ket[i].conj() * self.0[(i, j)] * ket[j];
            }
        }
        acc.re
    }

    pub fn max_abs_diff(&self, other: &DensityMatrix) -> f64 {
        crate::linalg::max_abs(&(self.0 - other.0))
    }
}

fn residuals_of(m: &Mat3) -> StateResiduals {
    StateResiduals {
        hermiticity: hermiticity_residual(m),
        trace: (m.trace() - C64::new(1.0, 0.0)).norm(),
        min_eigenvalue: hermitian_eigenvalues(m)[0],
    }
}

/// Optical Bloch coordinates: five real combinations `xr` and the two
/// excited–ground coherences `xs = (⟨σ_eg1⟩, ⟨σ_eg2⟩)`.
///
/// `xr = ((n̄1+1)ρ_ee − n̄1 ρ_g1g1, (n̄2+1)ρ_ee − n̄2 ρ_g2g2,
///        (n̄Δ+1)ρ_g1g1 − n̄Δ ρ_g2g2, Re C, Im C)` with `C = ⟨σ_g2g1⟩`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlochVector {
    pub xr: [f64; 5],
    pub xs: [Complex64; 2],
}

/// Long-time behaviour of a trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AsymptoticKind {
    Unique,
    InitialStateDependent,
    Oscillatory,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AsymptoticResult {
    pub kind: AsymptoticKind,
    /// Steady state for `Unique` and `InitialStateDependent`.
    pub state: Option<DensityMatrix>,
    /// Angular frequencies (positive) of undamped modes for `Oscillatory`.
    pub oscillation_frequencies: Vec<f64>,
    /// Time-averaged state for `Oscillatory`.
    pub time_average: Option<DensityMatrix>,
}

impl AsymptoticResult {
    /// The steady state, or the time average for oscillatory results.
    pub fn limit_state(&self) -> Option<&DensityMatrix> {
        self.state.as_ref().or(self.time_average.as_ref())
    }
}

/// JSON parameter file layout. `temperature` is a number or `"zero"`;
/// `delta` is always computed from the frequencies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsFile {
    pub omega1: f64,
    pub omega2: f64,
    pub gamma1: f64,
    pub gamma2: f64,
    pub gamma3: f64,
    pub gamma12: f64,
    pub gamma21: f64,
    pub temperature: Temperature,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma3_ohmic: Option<OhmicSpectrum>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Temperature {
    Finite(f64),
    Named(ZeroTemperature),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ZeroTemperature {
    Zero,
}

impl Temperature {
    pub fn beta(self) -> f64 {
        match self {
            Temperature::Named(ZeroTemperature::Zero) => f64::INFINITY,
            Temperature::Finite(t) => inverse_temperature(t),
        }
    }

    pub fn from_beta(beta: f64) -> Self {
        if beta.is_infinite() {
            Temperature::Named(ZeroTemperature::Zero)
        } else {
            Temperature::Finite(1.0 / beta)
        }
    }
}

impl From<&ParamsFile> for SystemParams {
    fn from(f: &ParamsFile) -> Self {
        let rates = DecayRates {
            gamma1: f.gamma1,
            gamma2: f.gamma2,
            gamma3: f.gamma3,
            gamma12: f.gamma12,
            gamma21: f.gamma21,
        };
        match f.gamma3_ohmic {
            Some(s) => SystemParams::with_ohmic_gamma3(f.omega1, f.omega2, rates, s, f.temperature.beta()),
            None => SystemParams::new(f.omega1, f.omega2, rates, f.temperature.beta()),
        }
    }
}

impl From<&SystemParams> for ParamsFile {
    fn from(p: &SystemParams) -> Self {
        Self {
            omega1: p.omega1,
            omega2: p.omega2,
            gamma1: p.gamma1,
            gamma2: p.gamma2,
            gamma3: p.gamma3,
            gamma12: p.gamma12,
            gamma21: p.gamma21,
            temperature: Temperature::from_beta(p.beta),
            gamma3_ohmic: p.gamma3_ohmic,
        }
    }
}
