//! Closed-form predictions, entropy and the two limit orders at the
//! degenerate zero-temperature point.

use serde::Serialize;
use thiserror::Error;

use crate::dynamics::{asymptotic_state, DynamicsError};
use crate::generator::build_liouvillian;
use crate::linalg::{hermitian_eigenvalues, Mat3, C64};
use crate::model::{validate_params, AsymptoticKind, DensityMatrix, Level, SystemParams, ValidationError, POSITIVITY_TOL};

/// Change between successive iterates below which a limit is accepted.
pub const LIMIT_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalysisError {
    #[error("gamma1 + gamma2 must be positive")]
    BothZero,
    #[error("predicted matrix is not a state (minimum eigenvalue {min_eigenvalue:e})")]
    NotAState { min_eigenvalue: f64 },
    #[error("{order:?} scan did not converge: {reason}")]
    NoConvergence { order: LimitOrder, reason: String, diagnostics: Vec<AsymptoticKind> },
    #[error("invalid scan input: {0}")]
    InvalidInput(String),
    #[error(transparent)]
    Validation(#[from] ValidationError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
}

/// Thermal populations `(p_e, p_g1, p_g2)` with weights `1, e^{βω1}, e^{βω2}`.
///
/// Evaluated relative to the largest exponent so large `β` cannot
/// overflow; `β = +∞` puts equal weight on the lowest levels.
pub fn gibbs_populations(beta: f64, omega1: f64, omega2: f64) -> [f64; 3] {
    let exponents = [0.0, omega1, omega2];
    let top = exponents.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let weights = exponents.map(|w| {
        if beta.is_infinite() {
            if w == top {
                1.0
            } else {
                0.0
            }
        } else {
            (beta * (w - top)).exp()
        }
    });
    let z: f64 = weights.iter().sum();
    weights.map(|w| w / z)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EntropyUnit {
    #[default]
    Nats,
    Bits,
}

/// `−Σ pᵢ log pᵢ` over the eigenvalues of `ρ`, skipping non-positive ones.
pub fn von_neumann_entropy(rho: &DensityMatrix, unit: EntropyUnit) -> f64 {
    let nats: f64 = rho
        .eigenvalues()
        .iter()
        .filter(|p| **p > 0.0)
        .map(|p| -p * p.ln())
        .sum();
    let s = nats.max(0.0);
    match unit {
        EntropyUnit::Nats => s,
        EntropyUnit::Bits => s / std::f64::consts::LN_2,
    }
}

/// Steady state reached from `I/3`, with its classification.
fn steady_state(params: &SystemParams) -> Result<(AsymptoticKind, DensityMatrix), AnalysisError> {
    let l = build_liouvillian(params);
    let res = asymptotic_state(&l, &DensityMatrix::maximally_mixed())?;
    let state = *res.limit_state().expect("every classification carries a limit state");
    Ok((res.kind, state))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, serde::Deserialize)]
pub enum LimitOrder {
    /// `lim_{Δ→0} lim_{T→0}`.
    TemperatureFirst,
    /// `lim_{T→0} lim_{Δ→0}`.
    SplittingFirst,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LimitPoint {
    pub delta: f64,
    /// `0` stands for `β = +∞`.
    pub temperature: f64,
    #[serde(skip)]
    pub beta: f64,
    pub populations: [f64; 3],
    pub entropy_nats: f64,
    pub kind: AsymptoticKind,
    /// True for the iterate taken exactly at the inner limit.
    pub inner_limit: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LimitValue {
    pub populations: [f64; 3],
    pub entropy_nats: f64,
    pub entropy_bits: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LimitReport {
    pub order: LimitOrder,
    pub sequence: Vec<LimitPoint>,
    pub extrapolated: LimitValue,
    /// Successive change at which the outer sequence was accepted.
    pub final_change: f64,
}

fn change(a: &LimitPoint, b: &LimitPoint) -> f64 {
    a.populations
        .iter()
        .zip(&b.populations)
        .map(|(x, y)| (x - y).abs())
        .fold((a.entropy_nats - b.entropy_nats).abs(), f64::max)
}

fn evaluate(params: SystemParams, inner_limit: bool) -> Result<LimitPoint, AnalysisError> {
    let params = validate_params(params)?;
    let (kind, state) = steady_state(&params)?;
    Ok(LimitPoint {
        delta: params.delta,
        temperature: params.temperature(),
        beta: params.beta,
        populations: state.populations(),
        entropy_nats: von_neumann_entropy(&state, EntropyUnit::Nats),
        kind,
        inner_limit,
    })
}

/// Iterated-limit scan at the degenerate zero-temperature point.
///
/// The template supplies the starting splitting `Δ0 > 0` and temperature
/// `T0 > 0`. The inner variable follows `x0·sᵏ` until successive steady
/// states agree within [`LIMIT_TOL`]; the inner limit itself (`β = +∞` or
/// `Δ = 0`) is then evaluated exactly and must agree with the last geometric
/// iterate. The outer variable shrinks the same way and the scan stops when
/// successive inner limits agree within [`LIMIT_TOL`].
pub fn ssb_limit_scan(
    template: &SystemParams,
    order: LimitOrder,
    n_points: usize,
    shrink_factor: f64,
) -> Result<LimitReport, AnalysisError> {
    if !(shrink_factor > 0.0 && shrink_factor < 1.0) {
        return Err(AnalysisError::InvalidInput(format!("shrink factor {shrink_factor} not in (0, 1)")));
    }
    if n_points < 2 {
        return Err(AnalysisError::InvalidInput("at least two points per sequence are needed".into()));
    }
    if !(template.delta > 0.0) || template.is_zero_temperature() {
        return Err(AnalysisError::InvalidInput(
            "template must start at positive splitting and finite temperature".into(),
        ));
    }
    if order == LimitOrder::SplittingFirst && template.gamma3_ohmic.is_none() && template.gamma3 > 0.0 {
        return Err(AnalysisError::InvalidInput(
            "the splitting-first order needs an Ohmic gamma3 spectrum to reach zero splitting".into(),
        ));
    }
    let template = validate_params(*template)?;
    let (delta0, t0) = (template.delta, template.temperature());

    let at = |outer: f64, inner: f64| match order {
        LimitOrder::TemperatureFirst => template.with_splitting(outer).with_temperature(inner),
        LimitOrder::SplittingFirst => template.with_temperature(outer).with_splitting(inner),
    };
    let (outer0, inner0) = match order {
        LimitOrder::TemperatureFirst => (delta0, t0),
        LimitOrder::SplittingFirst => (t0, delta0),
    };
    let no_convergence = |reason: String, seq: &[LimitPoint]| AnalysisError::NoConvergence {
        order,
        reason,
        diagnostics: seq.iter().map(|p| p.kind).collect(),
    };

    let mut sequence = Vec::new();
    let mut previous: Option<LimitPoint> = None;
    for k in 0..n_points {
        let outer = outer0 * shrink_factor.powi(k as i32);

        let mut last: Option<LimitPoint> = None;
        let mut converged = false;
        for j in 0..n_points {
            let point = evaluate(at(outer, inner0 * shrink_factor.powi(j as i32)), false)?;
            sequence.push(point.clone());
            let done = last.as_ref().is_some_and(|l| change(l, &point) < LIMIT_TOL);
            last = Some(point);
            if done {
                converged = true;
                break;
            }
        }
        let exact = evaluate(at(outer, 0.0), true)?;
        sequence.push(exact.clone());
        if !converged {
            return Err(no_convergence(format!("inner sequence at outer value {outer:e} did not settle"), &sequence));
        }
        if exact.kind != AsymptoticKind::Unique {
            return Err(no_convergence(
                format!("inner limit at outer value {outer:e} has no unique steady state ({:?})", exact.kind),
                &sequence,
            ));
        }
        let gap = change(last.as_ref().expect("inner loop ran"), &exact);
        if gap >= LIMIT_TOL {
            return Err(no_convergence(
                format!("inner limit at outer value {outer:e} is discontinuous (jump {gap:e})"),
                &sequence,
            ));
        }

        if let Some(prev) = &previous {
            let c = change(prev, &exact);
            if c < LIMIT_TOL {
                return Ok(LimitReport {
                    order,
                    sequence,
                    extrapolated: LimitValue {
                        populations: exact.populations,
                        entropy_nats: exact.entropy_nats,
                        entropy_bits: exact.entropy_nats / std::f64::consts::LN_2,
                    },
                    final_change: c,
                });
            }
        }
        previous = Some(exact);
    }
    Err(no_convergence(format!("outer sequence still changing after {n_points} points"), &sequence))
}

/// Classification of one entropy-surface cell.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CellStatus {
    Ok,
    InitialStateDependent,
    Oscillatory,
    Failed(String),
}

impl CellStatus {
    pub fn label(&self) -> &str {
        match self {
            CellStatus::Ok => "ok",
            CellStatus::InitialStateDependent => "initial_state_dependent",
            CellStatus::Oscillatory => "oscillatory",
            CellStatus::Failed(_) => "failed",
        }
    }
}

/// Steady-state entropy in nats on a `Δ × T` grid; `entropy[i][j]` belongs to
/// `delta_grid[i]` and `temperature_grid[j]`. Cells without a unique steady
/// state hold NaN and a non-`Ok` status.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EntropySurface {
    pub delta_grid: Vec<f64>,
    pub temperature_grid: Vec<f64>,
    pub entropy: Vec<Vec<f64>>,
    pub status: Vec<Vec<CellStatus>>,
}

impl EntropySurface {
    pub fn cells(&self) -> impl Iterator<Item = (f64, f64, f64, &CellStatus)> + '_ {
        self.delta_grid.iter().enumerate().flat_map(move |(i, d)| {
            self.temperature_grid
                .iter()
                .enumerate()
                .map(move |(j, t)| (*d, *t, self.entropy[i][j], &self.status[i][j]))
        })
    }
}

/// Entropy of the unique steady state at one grid point.
pub fn entropy_cell(template: &SystemParams, delta: f64, temperature: f64) -> (f64, CellStatus) {
    let params = template.with_splitting(delta).with_temperature(temperature);
    let params = match validate_params(params) {
        Ok(p) => p,
        Err(e) => return (f64::NAN, CellStatus::Failed(e.to_string())),
    };
    match steady_state(&params) {
        Ok((AsymptoticKind::Unique, state)) => (von_neumann_entropy(&state, EntropyUnit::Nats), CellStatus::Ok),
        Ok((AsymptoticKind::InitialStateDependent, _)) => (f64::NAN, CellStatus::InitialStateDependent),
        Ok((AsymptoticKind::Oscillatory, _)) => (f64::NAN, CellStatus::Oscillatory),
        Err(e) => (f64::NAN, CellStatus::Failed(e.to_string())),
    }
}

fn check_grid(name: &str, grid: &[f64]) -> Result<(), AnalysisError> {
    if grid.is_empty() || grid.iter().any(|x| !(x.is_finite() && *x >= 0.0)) || grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(AnalysisError::InvalidInput(format!("{name} grid must be non-empty, non-negative and ascending")));
    }
    Ok(())
}

pub fn entropy_surface(
    delta_grid: &[f64],
    temperature_grid: &[f64],
    template: &SystemParams,
) -> Result<EntropySurface, AnalysisError> {
    check_grid("delta", delta_grid)?;
    check_grid("temperature", temperature_grid)?;
    let cells: Vec<(usize, usize)> =
        (0..delta_grid.len()).flat_map(|i| (0..temperature_grid.len()).map(move |j| (i, j))).collect();
    let eval = |&(i, j): &(usize, usize)| entropy_cell(template, delta_grid[i], temperature_grid[j]);

    #[cfg(feature = "parallel")]
    let values: Vec<(f64, CellStatus)> = {
        use rayon::prelude::*;
        cells.par_iter().map(eval).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let values: Vec<(f64, CellStatus)> = cells.iter().map(eval).collect();

    let n_t = temperature_grid.len();
    let mut entropy = vec![vec![f64::NAN; n_t]; delta_grid.len()];
    let mut status = vec![vec![CellStatus::Ok; n_t]; delta_grid.len()];
    for ((i, j), (s, st)) in cells.into_iter().zip(values) {
        entropy[i][j] = s;
        status[i][j] = st;
    }
    Ok(EntropySurface {
        delta_grid: delta_grid.to_vec(),
        temperature_grid: temperature_grid.to_vec(),
        entropy,
        status,
    })
}

/// `(γ1, γ2) / (γ1 + γ2)`.
pub fn branching_ratios(gamma1: f64, gamma2: f64) -> Result<(f64, f64), AnalysisError> {
    let total = gamma1 + gamma2;
    if !(total > 0.0) {
        return Err(AnalysisError::BothZero);
    }
    Ok((gamma1 / total, gamma2 / total))
}

/// Closed-form zero-temperature steady state of the degenerate Λ system
/// (`γ3 = 0`, `Δ = 0`): the excited population is redistributed by the
/// branching ratios and the interference rates add to the ground coherence.
pub fn antitherm_prediction(
    rho0: &DensityMatrix,
    gamma1: f64,
    gamma2: f64,
    gamma12: f64,
    gamma21: f64,
) -> Result<DensityMatrix, AnalysisError> {
    let pe = rho0.populations()[0];
    let (b1, b2) = match branching_ratios(gamma1, gamma2) {
        Ok(b) => b,
        // Nothing decays; only a state without excitation is stationary.
        Err(e) if pe != 0.0 => return Err(e),
        Err(_) => (0.0, 0.0),
    };
    let (g1, g2) = (Level::G1.index(), Level::G2.index());
    let m0 = rho0.matrix();
    let mut m = Mat3::zeros();
    m[(g1, g1)] = m0[(g1, g1)] + C64::new(b1 * pe, 0.0);
    m[(g2, g2)] = m0[(g2, g2)] + C64::new(b2 * pe, 0.0);
    let gain = if gamma1 + gamma2 > 0.0 { (gamma12 + gamma21) / (2.0 * (gamma1 + gamma2)) * pe } else { 0.0 };
    // ⟨σ_g2g1⟩ = ρ_g1g2
    let c = m0[(g1, g2)] + C64::new(gain, 0.0);
    m[(g1, g2)] = c;
    m[(g2, g1)] = c.conj();

    let min_eigenvalue = hermitian_eigenvalues(&m)[0];
    if min_eigenvalue < -POSITIVITY_TOL {
        return Err(AnalysisError::NotAState { min_eigenvalue });
    }
    Ok(DensityMatrix::from_raw(m))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{DecayRates, OhmicSpectrum};
    use std::f64::consts::{FRAC_1_SQRT_2, LN_2};

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn gibbs_examples() {
        let p = gibbs_populations(0.0, 1.0, 2.0);
        assert!(p.iter().all(|x| close(*x, 1.0 / 3.0, 1e-15)));
        let p = gibbs_populations(LN_2, 1.0, 1.0);
        assert!(close(p[0], 0.2, 1e-15) && close(p[1], 0.4, 1e-15) && close(p[2], 0.4, 1e-15));
        assert_eq!(gibbs_populations(f64::INFINITY, 1.0, 1.5), [0.0, 0.0, 1.0]);
        let p = gibbs_populations(1e6, 1.0, 1.5);
        assert_eq!(p, [0.0, 0.0, 1.0]);
    }

    #[test]
    fn gibbs_ratios() {
        let (b, w1, w2) = (0.7, 1.1, 1.9);
        let p = gibbs_populations(b, w1, w2);
        assert!(close(p[0] / p[1], (-b * w1).exp(), 1e-15));
        assert!(close(p[0] / p[2], (-b * w2).exp(), 1e-15));
        assert!(close(p[1] / p[2], (-b * (w2 - w1)).exp(), 1e-15));
    }

    #[test]
    fn entropy_examples() {
        assert!(von_neumann_entropy(&DensityMatrix::basis_state(Level::E), EntropyUnit::Nats).abs() < 1e-15);
        let mut m = Mat3::zeros();
        m[(1, 1)] = C64::new(0.5, 0.0);
        m[(2, 2)] = C64::new(0.5, 0.0);
        let half = DensityMatrix::new(m).unwrap();
        assert!(close(von_neumann_entropy(&half, EntropyUnit::Nats), LN_2, 1e-14));
        assert!(close(von_neumann_entropy(&half, EntropyUnit::Bits), 1.0, 1e-14));
        let mixed = DensityMatrix::maximally_mixed();
        assert!(close(von_neumann_entropy(&mixed, EntropyUnit::Nats), 3f64.ln(), 1e-14));
    }

    #[test]
    fn branching() {
        assert_eq!(branching_ratios(2.0, 2.0).unwrap(), (0.5, 0.5));
        assert_eq!(branching_ratios(3.0, 1.0).unwrap(), (0.75, 0.25));
        assert_eq!(branching_ratios(0.0, 0.3).unwrap(), (0.0, 1.0));
        assert_eq!(branching_ratios(0.0, 0.0), Err(AnalysisError::BothZero));
    }

    #[test]
    fn antitherm_examples() {
        let e = DensityMatrix::basis_state(Level::E);
        let out = antitherm_prediction(&e, 1.0, 1.0, 1.0, 1.0).unwrap();
        let ket = [C64::new(0.0, 0.0), C64::new(FRAC_1_SQRT_2, 0.0), C64::new(FRAC_1_SQRT_2, 0.0)];
        assert!(close(out.fidelity_with_pure(ket), 1.0, 1e-14));

        let g1 = DensityMatrix::basis_state(Level::G1);
        assert_eq!(antitherm_prediction(&g1, 1.0, 1.0, 1.0, 1.0).unwrap(), g1);

        let sup = DensityMatrix::superposition([C64::new(0.0, 0.0), C64::new(0.6, 0.0), C64::new(0.0, 0.8)]).unwrap();
        assert!(antitherm_prediction(&sup, 0.3, 0.7, 0.1, 0.2).unwrap().max_abs_diff(&sup) < 1e-15);
    }

    #[test]
    fn antitherm_outside_psd_domain() {
        let e = DensityMatrix::basis_state(Level::E);
        let err = antitherm_prediction(&e, 1.0, 1.0, 3.0, 3.0).unwrap_err();
        assert!(matches!(err, AnalysisError::NotAState { .. }));
    }

    fn ohmic_template() -> SystemParams {
        SystemParams::with_ohmic_gamma3(
            1.0,
            1.5,
            DecayRates::lambda(1.0, 1.0, 0.0, 0.5),
            OhmicSpectrum::new(0.5),
            1.0,
        )
    }

    #[test]
    fn temperature_first_scan() {
        let rep = ssb_limit_scan(&ohmic_template(), LimitOrder::TemperatureFirst, 40, 0.5).unwrap();
        let p = rep.extrapolated.populations;
        assert!(p[0].abs() < 1e-9 && p[1].abs() < 1e-6 && close(p[2], 1.0, 1e-6), "{p:?}");
        assert!(rep.extrapolated.entropy_nats < 1e-5);
        assert!(rep.sequence.iter().any(|x| x.inner_limit && x.beta.is_infinite()));
    }

    #[test]
    fn splitting_first_scan() {
        let rep = ssb_limit_scan(&ohmic_template(), LimitOrder::SplittingFirst, 40, 0.5).unwrap();
        let p = rep.extrapolated.populations;
        assert!(close(p[1], 0.5, 1e-6) && close(p[2], 0.5, 1e-6), "{p:?}");
        assert!(close(rep.extrapolated.entropy_nats, LN_2, 1e-5));
        assert!(close(rep.extrapolated.entropy_bits, 1.0, 1e-5));
        assert!(rep.sequence.iter().any(|x| x.inner_limit && x.delta == 0.0));
    }

    #[test]
    fn scan_without_gamma3_fails() {
        let t = SystemParams::new(1.0, 1.5, DecayRates::lambda(1.0, 1.0, 0.0, 0.5), 1.0);
        let err = ssb_limit_scan(&t, LimitOrder::TemperatureFirst, 30, 0.5).unwrap_err();
        match err {
            AnalysisError::NoConvergence { diagnostics, .. } => {
                assert!(diagnostics.iter().any(|k| *k != AsymptoticKind::Unique))
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn scan_rejects_low_temperature_interference() {
        // e^{βΔ} eventually beats 4γ1γ2/γ12², breaking the upward block.
        let t = SystemParams::new(1.0, 1.5, DecayRates::lambda(1.0, 1.0, 0.5, 0.5), 1.0);
        let err = ssb_limit_scan(&t, LimitOrder::TemperatureFirst, 30, 0.5).unwrap_err();
        assert!(matches!(err, AnalysisError::Validation(ref v) if v.contains("KossakowskiViolation")));
    }

    #[test]
    fn surface_boundaries() {
        let t = ohmic_template();
        let s = entropy_surface(&[0.0, 1.0], &[0.0, 0.05, 100.0], &t).unwrap();
        assert_eq!(s.status[0][0], CellStatus::InitialStateDependent);
        assert!(s.entropy[0][0].is_nan());
        assert!(close(s.entropy[0][1], LN_2, 1e-6), "{}", s.entropy[0][1]);
        assert!(s.entropy[1][0].abs() < 1e-12);
        assert!(close(s.entropy[1][2], 3f64.ln(), 1e-3));
    }
}
