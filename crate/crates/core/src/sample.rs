//! Seeded random parameter sets, states and unitaries for sweeps and tests.

use nalgebra::Complex;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::linalg::{Mat3, C64};
use crate::model::{validate_params, DecayRates, DensityMatrix, SystemParams};

pub type SampleRng = ChaCha8Rng;

pub fn rng(seed: u64) -> SampleRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Which corner of parameter space to draw from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    /// `β` finite, `Δ > 0`, `γ3 > 0`.
    FiniteTemperature,
    /// `β = +∞`, `Δ > 0`, `γ3 > 0`.
    ZeroTemperature,
    /// `β = +∞`, `Δ = 0`, `γ3 = 0`.
    DegenerateLambda,
    /// Any of the above, plus finite-`β` Λ systems with `γ3 = 0`.
    Any,
}

/// Draws until the parameters pass validation (complete positivity included).
pub fn random_params<R: Rng>(rng: &mut R, regime: Regime) -> SystemParams {
    let regime = match regime {
        Regime::Any => match rng.gen_range(0..4) {
            0 => Regime::FiniteTemperature,
            1 => Regime::ZeroTemperature,
            2 => Regime::DegenerateLambda,
            _ => {
                let mut p = random_params(rng, Regime::FiniteTemperature);
                p.gamma3 = 0.0;
                return p;
            }
        },
        r => r,
    };
    loop {
        let omega1 = rng.gen_range(0.5..2.0);
        let gamma1: f64 = rng.gen_range(0.1..1.0);
        let gamma2 = rng.gen_range(0.1..1.0);
        let bound = (gamma1 * gamma2).sqrt();
        let (gamma12, gamma21) = (rng.gen_range(-bound..bound), rng.gen_range(-bound..bound));
        let (delta, gamma3, beta) = match regime {
            Regime::FiniteTemperature => (rng.gen_range(0.05..1.0), rng.gen_range(0.05..1.0), rng.gen_range(0.2..5.0)),
            Regime::ZeroTemperature => (rng.gen_range(0.05..1.0), rng.gen_range(0.05..1.0), f64::INFINITY),
            _ => (0.0, 0.0, f64::INFINITY),
        };
        let rates = DecayRates { gamma1, gamma2, gamma3, gamma12, gamma21 };
        if let Ok(p) = validate_params(SystemParams::new(omega1, omega1 + delta, rates, beta)) {
            return p;
        }
    }
}

fn gaussian<R: Rng>(rng: &mut R) -> C64 {
    let (re, im): (f64, f64) = (rng.sample(StandardNormal), rng.sample(StandardNormal));
    Complex::new(re, im)
}

/// Full-rank state from the Hilbert–Schmidt ensemble `G G† / Tr(G G†)`.
pub fn random_density_matrix<R: Rng>(rng: &mut R) -> DensityMatrix {
    let g = Mat3::from_fn(|_, _| gaussian(rng));
    let m = g * g.adjoint();
    let tr = m.trace();
    let mut m = m / tr;
    // symmetrize away rounding
    m = (m + m.adjoint()) * C64::new(0.5, 0.0);
    DensityMatrix::new(m).expect("Hilbert–Schmidt sample is a state")
}

pub fn random_pure_state<R: Rng>(rng: &mut R) -> DensityMatrix {
    let v: [C64; 3] = std::array::from_fn(|_| gaussian(rng));
    let n = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    DensityMatrix::superposition(v.map(|z| z / n)).expect("normalized ket")
}

/// Haar-random unitary from the QR decomposition of a Ginibre matrix.
pub fn random_unitary<R: Rng>(rng: &mut R) -> Mat3 {
    let g = Mat3::from_fn(|_, _| gaussian(rng));
    let qr = g.qr();
    let (mut q, r) = (qr.q(), qr.r());
    for k in 0..3 {
        let d = r[(k, k)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { C64::new(1.0, 0.0) };
        let mut col = q.column_mut(k);
        col *= phase;
    }
    q
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::max_abs;

    #[test]
    fn samples_are_valid_and_reproducible() {
        let mut a = rng(7);
        let mut b = rng(7);
        for regime in [Regime::FiniteTemperature, Regime::ZeroTemperature, Regime::DegenerateLambda, Regime::Any] {
            let p = random_params(&mut a, regime);
            assert_eq!(p, random_params(&mut b, regime));
            assert!(validate_params(p).is_ok());
        }
        let p = random_params(&mut a, Regime::DegenerateLambda);
        assert!(p.delta == 0.0 && p.gamma3 == 0.0 && p.beta.is_infinite());
    }

    #[test]
    fn unitary_and_states() {
        let mut r = rng(3);
        let u = random_unitary(&mut r);
        assert!(max_abs(&(u * u.adjoint() - Mat3::identity())) < 1e-14);
        let rho = random_density_matrix(&mut r);
        assert!(rho.eigenvalues()[0] > 0.0);
        let psi = random_pure_state(&mut r);
        assert!((psi.eigenvalues()[2] - 1.0).abs() < 1e-12);
    }
}
