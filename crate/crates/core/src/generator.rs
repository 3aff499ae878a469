//! Lindblad superoperator and optical Bloch matrices.
//!
//! The Liouvillian is assembled by applying the master-equation right-hand
//! side to each matrix unit `|i⟩⟨j|` and stacking the vectorized results as
//! columns, so it is term-by-term faithful to the dissipators.
//!
//! The Bloch matrix has two independent routes:
//! [`build_bloch_matrix_transcribed`] types in the reference coefficient
//! tables, [`derive_bloch_matrix`] conjugates the Liouvillian with the map
//! `ρ ↦ X`. The derived matrix is the one used for computation; the
//! transcribed one exists to be diffed against it ([`bloch_diff_report`]).

use nalgebra::{SMatrix, SVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{flip, max_abs, unvectorize, vectorize, Mat3, Mat9, C64, I, ONE, ZERO};
use crate::model::{BlochVector, DensityMatrix, SystemParams, POSITIVITY_TOL};

const E: usize = 0;
const G1: usize = 1;
const G2: usize = 2;

pub type Mat7 = SMatrix<C64, 7, 7>;
type Functionals = SMatrix<C64, 7, 9>;

/// Sign convention for the coherent `Δ σ_g2g2` term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HamiltonianSign {
    /// `ρ̇ ⊃ −i[ρ, Δ σ_g2g2]`, the convention of the reference Bloch tables.
    #[default]
    RhoFirst,
    /// `ρ̇ ⊃ −i[Δ σ_g2g2, ρ]`.
    Standard,
}

/// 9×9 generator acting on column-major `vec(ρ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Liouvillian {
    pub matrix: Mat9,
    pub params: SystemParams,
    pub sign: HamiltonianSign,
}

impl Liouvillian {
    pub fn apply(&self, rho: &Mat3) -> Mat3 {
        unvectorize(&(self.matrix * vectorize(rho)))
    }

    pub fn max_abs(&self) -> f64 {
        max_abs(&self.matrix)
    }

    /// Eigenvalues via complex Schur decomposition.
    pub fn eigenvalues(&self) -> Vec<Complex64> {
        eigenvalues(&self.matrix)
    }

    /// Largest entry of `vec(I)ᴴ L`; zero for a trace-preserving generator.
    pub fn trace_residual(&self) -> f64 {
        let id = vectorize(&Mat3::identity());
        max_abs(&(id.adjoint() * self.matrix))
    }
}

pub(crate) fn eigenvalues<const N: usize>(m: &SMatrix<C64, N, N>) -> Vec<Complex64> {
    let (_, t) = nalgebra::DMatrix::from_column_slice(N, N, m.as_slice()).schur().unpack();
    (0..N).map(|i| t[(i, i)]).collect()
}

/// Right-hand side of the master equation evaluated on an arbitrary 3×3 matrix.
pub fn master_rhs(params: &SystemParams, sign: HamiltonianSign, rho: &Mat3) -> Mat3 {
    let r = params.channel_rates();
    let s = |a, b| flip(a, b);
    let c = |x: f64| C64::new(x, 0.0);

    let dissipator = |jump: &Mat3, rate: f64| -> Mat3 {
        if rate == 0.0 {
            return Mat3::zeros();
        }
        let jj = jump.adjoint() * jump;
        (jump * rho * jump.adjoint() * c(2.0) - jj * rho - rho * jj) * c(0.5 * rate)
    };

    // L_1, L_2: e ↔ g_l; L_3: g1 ↔ g2.
    let mut out = dissipator(&s(G1, E), r.down1)
        + dissipator(&s(E, G1), r.up1)
        + dissipator(&s(G2, E), r.down2)
        + dissipator(&s(E, G2), r.up2)
        + dissipator(&s(G2, G1), r.down3)
        + dissipator(&s(G1, G2), r.up3);

    // L_X: interference between the two e ↔ g_l channels.
    let sandwich_down = s(G1, E) * rho * s(E, G2) + s(G2, E) * rho * s(E, G1);
    let sandwich_up = s(E, G1) * rho * s(G2, E) + s(E, G2) * rho * s(G1, E);
    out += sandwich_down * c(r.cross_down);
    out += (sandwich_up - s(G2, G1) * rho - rho * s(G1, G2)) * c(r.cross_up1);
    out += (sandwich_up - s(G1, G2) * rho - rho * s(G2, G1)) * c(r.cross_up2);

    if params.delta != 0.0 {
        let h = s(G2, G2) * c(params.delta);
        let commutator = match sign {
            HamiltonianSign::RhoFirst => rho * h - h * rho,
            HamiltonianSign::Standard => h * rho - rho * h,
        };
        out -= commutator * I;
    }
    out
}

pub fn build_liouvillian(params: &SystemParams) -> Liouvillian {
    build_liouvillian_with_sign(params, HamiltonianSign::RhoFirst)
}

pub fn build_liouvillian_with_sign(params: &SystemParams, sign: HamiltonianSign) -> Liouvillian {
    let mut matrix = Mat9::zeros();
    for col in 0..3 {
        for row in 0..3 {
            let image = master_rhs(params, sign, &flip(row, col));
            matrix.set_column(crate::linalg::vec_index(row, col), &vectorize(&image));
        }
    }
    Liouvillian { matrix, params: *params, sign }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Provenance {
    Transcribed,
    Derived,
}

/// `M = R ⊕ S` acting on `X = X_R ⊕ X_S`.
#[derive(Debug, Clone, PartialEq)]
pub struct BlochMatrix {
    pub r: SMatrix<f64, 5, 5>,
    pub s: SMatrix<Complex64, 2, 2>,
    pub provenance: Provenance,
}

impl BlochMatrix {
    /// Block-diagonal 7×7 complex matrix.
    pub fn full(&self) -> Mat7 {
        let mut m = Mat7::zeros();
        for i in 0..5 {
            for j in 0..5 {
                m[(i, j)] = C64::new(self.r[(i, j)], 0.0);
            }
        }
        for i in 0..2 {
            for j in 0..2 {
                m[(5 + i, 5 + j)] = self.s[(i, j)];
            }
        }
        m
    }

    pub fn eigenvalues(&self) -> Vec<Complex64> {
        eigenvalues(&self.full())
    }

    pub fn apply(&self, x: &BlochVector) -> BlochVector {
        let v = bloch_to_column(x);
        let out = self.full() * v;
        column_to_bloch(&out)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BlochError {
    #[error("Bloch coordinates need finite occupations; n(delta) diverges at delta = 0 and finite temperature")]
    DivergentOccupation,
    #[error("X coordinates are not an invariant subspace (closure residual {residual:e}, tolerance {tolerance:e})")]
    MapNotClosed { residual: f64, tolerance: f64 },
    #[error("Bloch vector inconsistent with a unit-trace state (residual {residual:e})")]
    InconsistentBloch { residual: f64 },
    #[error("reconstructed matrix is not a state (min eigenvalue {min_eigenvalue:e})")]
    NotAState { min_eigenvalue: f64 },
}

fn finite_occupations(params: &SystemParams) -> Result<(f64, f64, f64), BlochError> {
    let o = params.occupations();
    if o.n1.is_finite() && o.n2.is_finite() && o.n_delta.is_finite() {
        Ok((o.n1, o.n2, o.n_delta))
    } else {
        Err(BlochError::DivergentOccupation)
    }
}

/// Entry-by-entry transcription of the reference `R` and `S` tables.
pub fn build_bloch_matrix_transcribed(params: &SystemParams) -> Result<BlochMatrix, BlochError> {
    let (n1, n2, nd) = finite_occupations(params)?;
    let SystemParams { gamma1: g1, gamma2: g2, gamma3: g3, gamma12: g12, gamma21: g21, delta, .. } = *params;
    let r44 = -(g1 * n1 + g2 * n2 + g3 * (2.0 * nd + 1.0)) / 2.0;
    #[rustfmt::skip]
    let r = SMatrix::<f64, 5, 5>::from_row_slice(&[
        -g1 * (2.0 * n1 + 1.0), -g2 * (n1 + 1.0), g3 * n1,
            g12 * n1 * (n1 + 1.0) + g21 * n2 * (2.0 * n1 + 1.0), 0.0,
        -g1 * (n2 + 1.0), -g2 * (2.0 * n2 + 1.0), -g3 * n2,
            g12 * n1 * (2.0 * n2 + 1.0) + g21 * n2 * (n2 + 1.0), 0.0,
        g1 * (nd + 1.0), -g2 * nd, -g3 * (2.0 * nd + 1.0),
            g12 * nd * n1 - g21 * (nd + 1.0) * n2, 0.0,
        g12 / 2.0, g21 / 2.0, 0.0, r44, delta,
        0.0, 0.0, 0.0, -delta, r44,
    ]);
    let s = SMatrix::<C64, 2, 2>::from_row_slice(&[
        C64::new(-0.5 * (g1 * (2.0 * n1 + 1.0) + g2 * (n2 + 1.0) + g3 * (nd + 1.0)), 0.0),
        C64::new(-0.5 * g21 * n2, 0.0),
        C64::new(-0.5 * (g2 * (2.0 * n2 + 1.0) + g1 * (n1 + 1.0) + g3 * nd), delta),
        C64::new(-0.5 * g12 * n1, 0.0),
    ]);
    Ok(BlochMatrix { r, s, provenance: Provenance::Transcribed })
}

/// Rows are the linear functionals `vec(ρ) ↦ X_k`.
fn bloch_functionals(n1: f64, n2: f64, nd: f64) -> Functionals {
    use crate::linalg::vec_index as ix;
    let mut t = Functionals::zeros();
    let c = |x: f64| C64::new(x, 0.0);
    t[(0, ix(E, E))] = c(n1 + 1.0);
    t[(0, ix(G1, G1))] = c(-n1);
    t[(1, ix(E, E))] = c(n2 + 1.0);
    t[(1, ix(G2, G2))] = c(-n2);
    t[(2, ix(G1, G1))] = c(nd + 1.0);
    t[(2, ix(G2, G2))] = c(-nd);
    // C = ⟨σ_g2g1⟩ = ρ_g1g2
    t[(3, ix(G1, G2))] = c(0.5);
    t[(3, ix(G2, G1))] = c(0.5);
    t[(4, ix(G1, G2))] = C64::new(0.0, -0.5);
    t[(4, ix(G2, G1))] = C64::new(0.0, 0.5);
    // ⟨σ_eg_l⟩ = ρ_{g_l e}
    t[(5, ix(G1, E))] = ONE;
    t[(6, ix(G2, E))] = ONE;
    t
}

/// Functionals of the plain population/coherence coordinates
/// `(ρ_ee, ρ_g1g1, ρ_g2g2, Re C, Im C, ⟨σ_eg1⟩, ⟨σ_eg2⟩)`.
fn population_functionals() -> Functionals {
    use crate::linalg::vec_index as ix;
    let mut t = bloch_functionals(0.0, 0.0, 0.0);
    t[(1, ix(E, E))] = ZERO;
    t[(1, ix(G1, G1))] = ONE;
    t[(2, ix(G1, G1))] = ZERO;
    t[(2, ix(G2, G2))] = ONE;
    t
}

/// Solves `T L = M T` on the range of `T`, with `M` vanishing on its
/// orthogonal complement. Requires `ker T` to be `L`-invariant.
fn conjugate(l: &Liouvillian, t: &Functionals) -> Result<Mat7, BlochError> {
    let svd = t.svd(true, true);
    let smax = svd.singular_values.max();
    let t_pinv: SMatrix<C64, 9, 7> = svd
        .pseudo_inverse(1e-12 * smax)
        .expect("SVD computed with both factors");
    let tl = t * l.matrix;
    let kernel_projector = Mat9::identity() - t_pinv * t;
    let residual = max_abs(&(tl * kernel_projector));
    // pseudo-inverse rounding grows with the conditioning of T
    let smin = svd.singular_values.iter().copied().filter(|s| *s > 1e-12 * smax).fold(f64::INFINITY, f64::min);
    let scale = l.max_abs().max(1.0) * max_abs(t).max(1.0).powi(2) * (smax / smin);
    let tolerance = 1e-12 * scale;
    if residual > tolerance {
        return Err(BlochError::MapNotClosed { residual, tolerance });
    }
    Ok(tl * t_pinv)
}

fn split_blocks(m: &Mat7, provenance: Provenance) -> Result<BlochMatrix, BlochError> {
    let scale = max_abs(m).max(1.0);
    let tolerance = 1e-12 * scale;
    let mut leak = 0.0f64;
    let mut r = SMatrix::<f64, 5, 5>::zeros();
    let mut s = SMatrix::<C64, 2, 2>::zeros();
    for i in 0..7 {
        for j in 0..7 {
            let z = m[(i, j)];
            match (i < 5, j < 5) {
                (true, true) => {
                    leak = leak.max(z.im.abs());
                    r[(i, j)] = z.re;
                }
                (false, false) => s[(i - 5, j - 5)] = z,
                _ => leak = leak.max(z.norm()),
            }
        }
    }
    if leak > tolerance {
        return Err(BlochError::MapNotClosed { residual: leak, tolerance });
    }
    Ok(BlochMatrix { r, s, provenance })
}

/// Bloch matrix obtained by conjugating `L` with the map `ρ ↦ X`.
///
/// The trace direction is eliminated: the kernel of the map (the steady
/// state with `X = 0` plus the `ρ_{e g_l}` conjugate coherences) must be
/// invariant under `L`, otherwise [`BlochError::MapNotClosed`] is returned.
pub fn derive_bloch_matrix(l: &Liouvillian) -> Result<BlochMatrix, BlochError> {
    let (n1, n2, nd) = finite_occupations(&l.params)?;
    let m = conjugate(l, &bloch_functionals(n1, n2, nd))?;
    split_blocks(&m, Provenance::Derived)
}

/// Generator in the coordinates
/// `(ρ_ee, ρ_g1g1, ρ_g2g2, Re C, Im C, ⟨σ_eg1⟩, ⟨σ_eg2⟩)`.
pub fn derive_population_equations(l: &Liouvillian) -> Result<Mat7, BlochError> {
    conjugate(l, &population_functionals())
}

/// Zero-temperature Λ-system (`γ3 = 0`) equations in the same coordinates as
/// [`derive_population_equations`], typed in from the reduced Bloch system.
pub fn lambda_reduced_equations(gamma1: f64, gamma2: f64, gamma12: f64, gamma21: f64, delta: f64) -> Mat7 {
    let c = |x: f64| C64::new(x, 0.0);
    let mut m = Mat7::zeros();
    let total = gamma1 + gamma2;
    m[(0, 0)] = c(-total);
    m[(1, 0)] = c(gamma1);
    m[(2, 0)] = c(gamma2);
    m[(3, 0)] = c(0.5 * (gamma12 + gamma21));
    m[(3, 4)] = c(-delta);
    m[(4, 3)] = c(delta);
    m[(5, 5)] = c(-0.5 * total);
    m[(6, 6)] = c(-0.5 * total);
    m
}

pub fn bloch_from_density(rho: &DensityMatrix, params: &SystemParams) -> Result<BlochVector, BlochError> {
    let (n1, n2, nd) = finite_occupations(params)?;
    let m = rho.matrix();
    let [pe, p1, p2] = rho.populations();
    let c = m[(G1, G2)];
    Ok(BlochVector {
        xr: [
            (n1 + 1.0) * pe - n1 * p1,
            (n2 + 1.0) * pe - n2 * p2,
            (nd + 1.0) * p1 - nd * p2,
            c.re,
            c.im,
        ],
        xs: [m[(G1, E)], m[(G2, E)]],
    })
}

/// Inverse of [`bloch_from_density`] under `Tr ρ = 1`.
pub fn density_from_bloch(x: &BlochVector, params: &SystemParams) -> Result<DensityMatrix, BlochError> {
    let (n1, n2, nd) = finite_occupations(params)?;
    #[rustfmt::skip]
    let a = SMatrix::<f64, 4, 3>::from_row_slice(&[
        n1 + 1.0, -n1, 0.0,
        n2 + 1.0, 0.0, -n2,
        0.0, nd + 1.0, -nd,
        1.0, 1.0, 1.0,
    ]);
    let b = SVector::<f64, 4>::new(x.xr[0], x.xr[1], x.xr[2], 1.0);
    let svd = a.svd(true, true);
    let p = svd.solve(&b, 1e-14 * svd.singular_values.max()).expect("SVD computed with both factors");
    let residual = (a * p - b).norm();
    if !(residual < 1e-9) {
        return Err(BlochError::InconsistentBloch { residual });
    }
    let mut m = Mat3::zeros();
    m[(E, E)] = C64::new(p[0], 0.0);
    m[(G1, G1)] = C64::new(p[1], 0.0);
    m[(G2, G2)] = C64::new(p[2], 0.0);
    let c = C64::new(x.xr[3], x.xr[4]);
    m[(G1, G2)] = c;
    m[(G2, G1)] = c.conj();
    m[(G1, E)] = x.xs[0];
    m[(E, G1)] = x.xs[0].conj();
    m[(G2, E)] = x.xs[1];
    m[(E, G2)] = x.xs[1].conj();
    let rho = DensityMatrix::from_raw(m);
    let min_eigenvalue = rho.eigenvalues()[0];
    if min_eigenvalue < -POSITIVITY_TOL {
        return Err(BlochError::NotAState { min_eigenvalue });
    }
    Ok(rho)
}

pub(crate) fn bloch_to_column(x: &BlochVector) -> SVector<C64, 7> {
    let mut v = SVector::<C64, 7>::zeros();
    for (i, r) in x.xr.iter().enumerate() {
        v[i] = C64::new(*r, 0.0);
    }
    v[5] = x.xs[0];
    v[6] = x.xs[1];
    v
}

pub(crate) fn column_to_bloch(v: &SVector<C64, 7>) -> BlochVector {
    BlochVector { xr: [v[0].re, v[1].re, v[2].re, v[3].re, v[4].re], xs: [v[5], v[6]] }
}

/// One entry of the transcribed-vs-derived comparison.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BlochDiffEntry {
    pub block: &'static str,
    pub row: usize,
    pub col: usize,
    pub transcribed: [f64; 2],
    pub derived: [f64; 2],
    pub difference: f64,
}

/// Entry-wise comparison of the two Bloch-matrix routes.
///
/// `X_R` has a linear dependency among its population components (three
/// combinations of two independent populations), so the matrix is only
/// determined on the reachable subspace. `effective_gap` is the largest
/// deviation of the two matrices applied to Bloch vectors of actual states;
/// nonzero entries with a vanishing `effective_gap` are representation
/// choices, not disagreements.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BlochDiffReport {
    pub entries: Vec<BlochDiffEntry>,
    pub max_entry_difference: f64,
    pub effective_gap: f64,
    /// `effective_gap` restricted to the `X_R` rows.
    pub effective_gap_r: f64,
    /// `effective_gap` restricted to the `X_S` rows.
    pub effective_gap_s: f64,
    pub tolerance: f64,
}

impl BlochDiffReport {
    pub fn discrepancies(&self) -> impl Iterator<Item = &BlochDiffEntry> {
        self.entries.iter().filter(move |e| e.difference > self.tolerance)
    }
}

pub fn bloch_diff_report(params: &SystemParams, sign: HamiltonianSign) -> Result<BlochDiffReport, BlochError> {
    let transcribed = build_bloch_matrix_transcribed(params)?;
    let derived = derive_bloch_matrix(&build_liouvillian_with_sign(params, sign))?;
    let (mt, md) = (transcribed.full(), derived.full());
    let tolerance = 1e-9 * max_abs(&md).max(1.0);
    let mut entries = Vec::with_capacity(49);
    let mut max_entry_difference = 0.0f64;
    for i in 0..7 {
        for j in 0..7 {
            let block = match (i < 5, j < 5) {
                (true, true) => "R",
                (false, false) => "S",
                _ => "off-diagonal",
            };
            let d = (mt[(i, j)] - md[(i, j)]).norm();
            max_entry_difference = max_entry_difference.max(d);
            entries.push(BlochDiffEntry {
                block,
                row: i,
                col: j,
                transcribed: [mt[(i, j)].re, mt[(i, j)].im],
                derived: [md[(i, j)].re, md[(i, j)].im],
                difference: d,
            });
        }
    }
    let (n1, n2, nd) = finite_occupations(params)?;
    let t = bloch_functionals(n1, n2, nd);
    // Columns of T are the images of the matrix units and span the reachable X.
    let gap = (mt - md) * t;
    let rows_max = |rows: std::ops::Range<usize>| {
        rows.flat_map(|i| (0..9).map(move |j| (i, j))).map(|(i, j)| gap[(i, j)].norm()).fold(0.0, f64::max)
    };
    Ok(BlochDiffReport {
        entries,
        max_entry_difference,
        effective_gap: max_abs(&gap),
        effective_gap_r: rows_max(0..5),
        effective_gap_s: rows_max(5..7),
        tolerance,
    })
}
