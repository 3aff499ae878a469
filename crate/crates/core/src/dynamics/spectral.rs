//! Eigen-structure of the Liouvillian and asymptotic-state extraction.
//!
//! Eigenvalues come from a complex Schur decomposition. Eigenvalues closer
//! than `1e-8·max|L|` are grouped into clusters; each cluster is represented
//! by an orthonormal basis of the null space of `L − μI` (from an SVD), and
//! the left bases are the rows of the inverse of the assembled basis. A cluster whose null space is smaller than its multiplicity is a
//! Jordan block and the decomposition is rejected as defective.

use num_complex::Complex64;

use super::{propagate, propagator, DynamicsError};
use crate::generator::{eigenvalues, Liouvillian};
use crate::linalg::{max_abs, unvectorize, vectorize, Mat3, Mat9, C64};
use crate::model::{AsymptoticKind, AsymptoticResult, DensityMatrix, Level};

/// Relative tolerance for grouping eigenvalues into one cluster.
pub const CLUSTER_TOL: f64 = 1e-8;
/// Default relative threshold below which a real or imaginary part is zero.
pub const ZERO_TOL: f64 = 1e-9;
/// Weight of rotating modes above which a state is called oscillatory.
pub const ROTATING_WEIGHT_TOL: f64 = 1e-9;

const NULL_SPACE_TOL: f64 = 1e-6;
const RESIDUAL_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct EigenCluster {
    /// Mean of the clustered eigenvalues.
    pub eigenvalue: Complex64,
    /// Column range in [`SpectralDecomposition::right`].
    pub columns: std::ops::Range<usize>,
}

impl EigenCluster {
    pub fn multiplicity(&self) -> usize {
        self.columns.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralDecomposition {
    /// Eigenvalues aligned with the columns of `right`/`left`.
    pub eigenvalues: Vec<Complex64>,
    /// Right invariant-subspace bases, cluster by cluster.
    pub right: Mat9,
    /// Left bases with `leftᴴ · right = I`.
    pub left: Mat9,
    pub clusters: Vec<EigenCluster>,
    /// Column indices with `|Re λ| < ε` and `|Im λ| < ε`.
    pub zero_modes: Vec<usize>,
    /// Column indices with `|Re λ| < ε` and `|Im λ| ≥ ε`.
    pub rotating_modes: Vec<usize>,
    pub epsilon_zero: f64,
    pub biorthogonality_residual: f64,
    pub max_eigen_residual: f64,
}

impl SpectralDecomposition {
    pub fn zero_clusters(&self) -> impl Iterator<Item = &EigenCluster> {
        let eps = self.epsilon_zero;
        self.clusters.iter().filter(move |c| is_zero(c.eigenvalue, eps))
    }

    pub fn rotating_clusters(&self) -> impl Iterator<Item = &EigenCluster> {
        let eps = self.epsilon_zero;
        self.clusters.iter().filter(move |c| is_rotating(c.eigenvalue, eps))
    }

    /// Spectral projector onto the given columns: `V_c W_cᴴ`.
    pub fn projector(&self, columns: &[usize]) -> Mat9 {
        let mut p = Mat9::zeros();
        for &k in columns {
            p += self.right.column(k) * self.left.column(k).adjoint();
        }
        p
    }

    pub fn max_real_part(&self) -> f64 {
        self.eigenvalues.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max)
    }
}

fn is_zero(z: Complex64, eps: f64) -> bool {
    z.re.abs() < eps && z.im.abs() < eps
}

fn is_rotating(z: Complex64, eps: f64) -> bool {
    z.re.abs() < eps && z.im.abs() >= eps
}

fn scale(l: &Liouvillian) -> f64 {
    l.max_abs().max(f64::MIN_POSITIVE)
}

pub fn decompose(l: &Liouvillian) -> Result<SpectralDecomposition, DynamicsError> {
    decompose_with(l, ZERO_TOL * scale(l))
}

/// Groups indices whose eigenvalues are transitively within `tol`.
fn cluster_eigenvalues(values: &[Complex64], tol: f64) -> Vec<Vec<usize>> {
    let n = values.len();
    let mut label: Vec<usize> = (0..n).collect();
    fn root(label: &mut [usize], mut i: usize) -> usize {
        while label[i] != i {
            label[i] = label[label[i]];
            i = label[i];
        }
        i
    }
    for i in 0..n {
        for j in (i + 1)..n {
            if (values[i] - values[j]).norm() < tol {
                let (a, b) = (root(&mut label, i), root(&mut label, j));
                label[a.max(b)] = a.min(b);
            }
        }
    }
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut roots: Vec<usize> = Vec::new();
    for i in 0..n {
        let r = root(&mut label, i);
        match roots.iter().position(|x| *x == r) {
            Some(g) => groups[g].push(i),
            None => {
                roots.push(r);
                groups.push(vec![i]);
            }
        }
    }
    groups
}

pub fn decompose_with(l: &Liouvillian, epsilon_zero: f64) -> Result<SpectralDecomposition, DynamicsError> {
    let norm = scale(l);
    let raw = eigenvalues(&l.matrix);
    let mut groups = cluster_eigenvalues(&raw, CLUSTER_TOL * norm);
    // Deterministic order: slowest-decaying first, then by imaginary part.
    let mean = |g: &Vec<usize>| raw_mean(&raw, g);
    groups.sort_by(|a, b| {
        let (za, zb) = (mean(a), mean(b));
        zb.re.total_cmp(&za.re).then(za.im.total_cmp(&zb.im))
    });

    let mut right = Mat9::zeros();
    let mut eigen = Vec::with_capacity(9);
    let mut clusters = Vec::with_capacity(groups.len());
    let mut col = 0;
    for g in &groups {
        let mu = mean(g);
        let m = g.len();
        let svd = (l.matrix - Mat9::identity() * mu).svd(false, true);
        let v_t = svd.v_t.expect("requested Vᴴ");
        // nalgebra returns singular values in descending order.
        let smallest_kept = svd.singular_values[9 - m];
        if smallest_kept > NULL_SPACE_TOL * norm {
            return Err(DynamicsError::DefectiveMatrix(format!(
                "eigenvalue {mu} has algebraic multiplicity {m} but singular value {smallest_kept:e} of L - λI"
            )));
        }
        for k in 0..m {
            for i in 0..9 {
                right[(i, col + k)] = v_t[(9 - m + k, i)].conj();
            }
            eigen.push(mu);
        }
        clusters.push(EigenCluster { eigenvalue: mu, columns: col..col + m });
        col += m;
    }

    // Left bases are the rows of V⁻¹, which makes them biorthogonal by construction.
    let sv = right.singular_values();
    let condition = sv.max() / sv.min().max(f64::MIN_POSITIVE);
    if condition > 1.0 / NULL_SPACE_TOL {
        return Err(DynamicsError::DefectiveMatrix(format!("eigenbasis condition number {condition:e}")));
    }
    let left = right
        .try_inverse()
        .ok_or_else(|| DynamicsError::DefectiveMatrix("eigenbasis is singular".into()))?
        .adjoint();

    let restricted = left.adjoint() * l.matrix * right;
    let mut max_eigen_residual = 0.0f64;
    for c in &clusters {
        for i in 0..9 {
            for j in c.columns.clone() {
                let expected = if i == j { c.eigenvalue } else { C64::new(0.0, 0.0) };
                max_eigen_residual = max_eigen_residual.max((restricted[(i, j)] - expected).norm());
            }
        }
    }
    let biorthogonality_residual = max_abs(&(left.adjoint() * right - Mat9::identity()));
    if biorthogonality_residual > RESIDUAL_TOL || max_eigen_residual > RESIDUAL_TOL * norm.max(1.0) {
        return Err(DynamicsError::DefectiveMatrix(format!(
            "biorthogonality residual {biorthogonality_residual:e}, eigen residual {max_eigen_residual:e}"
        )));
    }

    let zero_modes = (0..9).filter(|k| is_zero(eigen[*k], epsilon_zero)).collect();
    let rotating_modes = (0..9).filter(|k| is_rotating(eigen[*k], epsilon_zero)).collect();
    Ok(SpectralDecomposition {
        eigenvalues: eigen,
        right,
        left,
        clusters,
        zero_modes,
        rotating_modes,
        epsilon_zero,
        biorthogonality_residual,
        max_eigen_residual,
    })
}

fn raw_mean(values: &[Complex64], idx: &[usize]) -> Complex64 {
    idx.iter().map(|i| values[*i]).sum::<Complex64>() / idx.len() as f64
}

fn hermitian_part(m: &Mat3) -> Mat3 {
    (m + m.adjoint()) * C64::new(0.5, 0.0)
}

/// Classifies the long-time behaviour starting from `rho0`.
///
/// Falls back to long-time propagation when the generator is defective.
pub fn asymptotic_state(l: &Liouvillian, rho0: &DensityMatrix) -> Result<AsymptoticResult, DynamicsError> {
    match decompose(l) {
        Ok(spec) => Ok(classify(&spec, rho0)),
        Err(DynamicsError::DefectiveMatrix(reason)) => {
            log::debug!("spectral projection unavailable ({reason}); using long-time propagation");
            long_time_asymptotics(l, rho0)
        }
        Err(e) => Err(e),
    }
}

pub fn classify(spec: &SpectralDecomposition, rho0: &DensityMatrix) -> AsymptoticResult {
    let v = vectorize(rho0.matrix());
    let projected = spec.projector(&spec.zero_modes) * v;
    let limit = DensityMatrix::from_raw(hermitian_part(&unvectorize(&projected)));

    let mut frequencies: Vec<f64> = Vec::new();
    for c in spec.rotating_clusters() {
        let cols: Vec<usize> = c.columns.clone().collect();
        let weight = max_abs(&(spec.projector(&cols) * v));
        if weight > ROTATING_WEIGHT_TOL {
            let w = c.eigenvalue.im.abs();
            if !frequencies.iter().any(|f| (f - w).abs() <= CLUSTER_TOL * w.max(1.0)) {
                frequencies.push(w);
            }
        }
    }
    frequencies.sort_by(f64::total_cmp);

    if !frequencies.is_empty() {
        AsymptoticResult {
            kind: AsymptoticKind::Oscillatory,
            state: None,
            oscillation_frequencies: frequencies,
            time_average: Some(limit),
        }
    } else {
        let kind = if spec.zero_modes.len() == 1 {
            AsymptoticKind::Unique
        } else {
            AsymptoticKind::InitialStateDependent
        };
        AsymptoticResult { kind, state: Some(limit), oscillation_frequencies: Vec::new(), time_average: None }
    }
}

/// Convergence threshold on `max|L vec(ρ)|` for the long-time fallback.
pub const STATIONARITY_TOL: f64 = 1e-10;

/// Propagates to successively doubled times until `L vec(ρ)` vanishes, then
/// checks whether several distinct initial states reach the same limit.
fn long_time_asymptotics(l: &Liouvillian, rho0: &DensityMatrix) -> Result<AsymptoticResult, DynamicsError> {
    let norm = scale(l);
    let mut t = 1.0 / norm;
    let mut u = propagator(l, t)?;
    let probes = [
        *rho0,
        DensityMatrix::basis_state(Level::E),
        DensityMatrix::basis_state(Level::G1),
        DensityMatrix::basis_state(Level::G2),
        DensityMatrix::maximally_mixed(),
    ];
    for _ in 0..80 {
        let limits: Vec<DensityMatrix> = probes.iter().map(|p| propagate(&u, p)).collect();
        let stationary = limits
            .iter()
            .all(|s| max_abs(&(l.matrix * vectorize(s.matrix()))) < STATIONARITY_TOL * norm.max(1.0));
        if stationary {
            let first = DensityMatrix::from_raw(hermitian_part(limits[0].matrix()));
            let unique = limits.iter().all(|s| s.max_abs_diff(&limits[0]) < 1e-8);
            let kind = if unique { AsymptoticKind::Unique } else { AsymptoticKind::InitialStateDependent };
            return Ok(AsymptoticResult {
                kind,
                state: Some(first),
                oscillation_frequencies: Vec::new(),
                time_average: None,
            });
        }
        u = u * u;
        t *= 2.0;
    }
    Err(DynamicsError::NoConvergence(format!("no stationary limit up to t = {t:e}")))
}

/// Dimension of the numerical kernel of `L` (singular values below `tol·max|L|`).
pub fn kernel_dimension(l: &Liouvillian, tol: f64) -> usize {
    let norm = scale(l);
    let sv = l.matrix.svd(false, false).singular_values;
    sv.iter().filter(|s| **s < tol * norm).count()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generator::build_liouvillian;
    use crate::model::{DecayRates, SystemParams};

    fn lambda_t0(delta: f64) -> SystemParams {
        SystemParams::new(1.0, 1.0 + delta, DecayRates::lambda(1.0, 1.0, 1.0, 1.0), f64::INFINITY)
    }

    #[test]
    fn degenerate_lambda_has_four_zero_modes() {
        let l = build_liouvillian(&lambda_t0(0.0));
        let spec = decompose(&l).unwrap();
        assert!(spec.zero_modes.len() >= 4, "{:?}", spec.eigenvalues);
        assert!(spec.rotating_modes.is_empty());
        assert!(spec.biorthogonality_residual < 1e-8);
    }

    #[test]
    fn split_lambda_rotates_at_delta() {
        let l = build_liouvillian(&lambda_t0(0.4));
        let spec = decompose(&l).unwrap();
        let freqs: Vec<f64> = spec.rotating_modes.iter().map(|k| spec.eigenvalues[*k].im).collect();
        assert!(freqs.iter().any(|w| (w - 0.4).abs() < 1e-9));
        assert!(freqs.iter().any(|w| (w + 0.4).abs() < 1e-9));
    }

    #[test]
    fn symmetric_lambda_from_excited_state() {
        let l = build_liouvillian(&lambda_t0(0.0));
        let res = asymptotic_state(&l, &DensityMatrix::basis_state(Level::E)).unwrap();
        assert_eq!(res.kind, AsymptoticKind::InitialStateDependent);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let target = [C64::new(0.0, 0.0), C64::new(h, 0.0), C64::new(h, 0.0)];
        assert!((res.state.unwrap().fidelity_with_pure(target) - 1.0).abs() < 1e-10);
    }

    #[test]
    fn oscillatory_when_coherence_rotates() {
        let l = build_liouvillian(&lambda_t0(0.4));
        let res = asymptotic_state(&l, &DensityMatrix::basis_state(Level::E)).unwrap();
        assert_eq!(res.kind, AsymptoticKind::Oscillatory);
        assert_eq!(res.oscillation_frequencies.len(), 1);
        assert!((res.oscillation_frequencies[0] - 0.4).abs() < 1e-9);
        // populations of the time average still follow the branching ratios
        let pops = res.time_average.unwrap().populations();
        assert!((pops[1] - 0.5).abs() < 1e-10 && (pops[2] - 0.5).abs() < 1e-10);
    }

    #[test]
    fn jordan_block_triggers_fallback() {
        // γ3 = γ1 + γ2 at T = 0 makes e and g1 population decays coincide with
        // a nonzero coupling between them: a 2×2 Jordan block.
        let p = SystemParams::new(
            1.0,
            1.5,
            DecayRates { gamma1: 0.4, gamma2: 0.6, gamma3: 1.0, gamma12: 0.0, gamma21: 0.0 },
            f64::INFINITY,
        );
        let l = build_liouvillian(&p);
        assert!(matches!(decompose(&l), Err(DynamicsError::DefectiveMatrix(_))));
        let res = asymptotic_state(&l, &DensityMatrix::basis_state(Level::E)).unwrap();
        assert_eq!(res.kind, AsymptoticKind::Unique);
        assert!(res.state.unwrap().max_abs_diff(&DensityMatrix::basis_state(Level::G2)) < 1e-9);
    }

    #[test]
    fn kernel_dimensions() {
        let p = SystemParams::new(1.0, 1.3, DecayRates { gamma3: 0.5, ..DecayRates::lambda(1.0, 0.7, 0.2, 0.1) }, 2.0);
        assert_eq!(kernel_dimension(&build_liouvillian(&p), 1e-9), 1);
        assert!(kernel_dimension(&build_liouvillian(&lambda_t0(0.0)), 1e-9) >= 3);
    }
}
