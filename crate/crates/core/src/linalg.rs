//! Dense complex linear algebra and state-vector primitives.
//!
//! Basis ordering: for a chain of `L` sites, site 1 is the most significant
//! bit of the basis index and site `L` the least significant. A basis index
//! bit of 0 is spin up (`σ^z = +1`), a bit of 1 is spin down. Every module
//! in the crate uses this convention.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
/// Dense complex operator. Hermitian and unitary variants are checked with
/// [`hermiticity_defect`] and [`unitarity_defect`].
pub type DenseOperator = DMatrix<C64>;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

pub const HERMITIAN_TOL: f64 = 1e-12;
pub const UNITARY_TOL: f64 = 1e-10;
pub const NORM_TOL: f64 = 1e-10;
/// Distance from ±π below which an eigenphase is rejected by
/// [`unitary_log_generator`].
pub const BRANCH_CUT_TOL: f64 = 1e-8;

pub fn pauli_x() -> DenseOperator {
    DMatrix::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO])
}

pub fn pauli_y() -> DenseOperator {
    DMatrix::from_row_slice(2, 2, &[ZERO, -I, I, ZERO])
}

pub fn pauli_z() -> DenseOperator {
    DMatrix::from_row_slice(2, 2, &[ONE, ZERO, ZERO, -ONE])
}

pub fn identity(dim: usize) -> DenseOperator {
    DMatrix::identity(dim, dim)
}

pub fn kron(a: &DenseOperator, b: &DenseOperator) -> DenseOperator {
    a.kronecker(b)
}

pub fn commutator(a: &DenseOperator, b: &DenseOperator) -> DenseOperator {
    a * b - b * a
}

/// Largest entrywise modulus.
pub fn max_abs(a: &DenseOperator) -> f64 {
    a.iter().fold(0.0_f64, |m, z| m.max(z.norm()))
}

/// `max |A - A†|` entrywise.
pub fn hermiticity_defect(a: &DenseOperator) -> f64 {
    if !a.is_square() {
        return f64::INFINITY;
    }
    let n = a.nrows();
    let mut worst = 0.0_f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((a[(i, j)] - a[(j, i)].conj()).norm());
        }
    }
    worst
}

/// `max |U†U - I|` entrywise.
pub fn unitarity_defect(u: &DenseOperator) -> f64 {
    if !u.is_square() {
        return f64::INFINITY;
    }
    let prod = u.adjoint() * u;
    max_abs(&(prod - identity(u.nrows())))
}

/// Spectral norm (largest singular value).
pub fn spectral_norm(a: &DenseOperator) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    a.clone().singular_values().max()
}

/// Normalized complex amplitude vector over the `2^L` computational basis states.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    n_qubits: usize,
    amplitudes: DVector<C64>,
}

impl StateVector {
    /// Wraps `amplitudes`, checking the length is `2^n_qubits` and the norm is 1.
    pub fn new(n_qubits: usize, amplitudes: DVector<C64>) -> Result<Self> {
        let dim = 1usize << n_qubits;
        if amplitudes.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: amplitudes.len(),
            });
        }
        let norm = amplitudes.norm();
        if !norm.is_finite() || (norm - 1.0).abs() > NORM_TOL {
            return Err(Error::NotNormalized(norm));
        }
        Ok(Self {
            n_qubits,
            amplitudes,
        })
    }

    /// Infers `L` from the vector length and rescales to unit norm.
    pub fn normalized(amplitudes: DVector<C64>) -> Result<Self> {
        let n_qubits = qubits_for_dim(amplitudes.len())?;
        let norm = amplitudes.norm();
        if !(norm.is_finite() && norm > 0.0) {
            return Err(Error::NotNormalized(norm));
        }
        Ok(Self {
            n_qubits,
            amplitudes: amplitudes.unscale(norm),
        })
    }

    pub fn basis_state(n_qubits: usize, index: usize) -> Result<Self> {
        let dim = 1usize << n_qubits;
        if index >= dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: index + 1,
            });
        }
        let mut amps = DVector::from_element(dim, ZERO);
        amps[index] = ONE;
        Ok(Self {
            n_qubits,
            amplitudes: amps,
        })
    }

    /// Computational basis state from per-site bits, site 1 first.
    pub fn from_bits(bits: &[u8]) -> Result<Self> {
        let l = bits.len();
        let mut index = 0usize;
        for &b in bits {
            if b > 1 {
                return Err(Error::InvalidParameter(format!("bit value {b} is not 0 or 1")));
            }
            index = (index << 1) | b as usize;
        }
        Self::basis_state(l, index)
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &DVector<C64> {
        &self.amplitudes
    }

    pub fn into_amplitudes(self) -> DVector<C64> {
        self.amplitudes
    }

    /// Builds a state without checking the norm. Internal propagation keeps
    /// unitarity, so only a final check is needed.
    pub(crate) fn from_raw(n_qubits: usize, amplitudes: DVector<C64>) -> Self {
        debug_assert_eq!(amplitudes.len(), 1usize << n_qubits);
        Self {
            n_qubits,
            amplitudes,
        }
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.norm()
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &StateVector) -> Result<C64> {
        self.check_dim(other.dim())?;
        Ok(self.amplitudes.dotc(&other.amplitudes))
    }

    /// Unnormalized difference vector `self - other` (the error vector δψ).
    pub fn difference(&self, other: &StateVector) -> Result<DVector<C64>> {
        self.check_dim(other.dim())?;
        Ok(&self.amplitudes - &other.amplitudes)
    }

    pub fn distance(&self, other: &StateVector) -> Result<f64> {
        Ok(self.difference(other)?.norm())
    }

    pub(crate) fn check_dim(&self, dim: usize) -> Result<()> {
        if self.dim() != dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: dim,
            });
        }
        Ok(())
    }
}

pub fn qubits_for_dim(dim: usize) -> Result<usize> {
    if dim == 0 || !dim.is_power_of_two() {
        return Err(Error::InvalidParameter(format!(
            "dimension {dim} is not a power of two"
        )));
    }
    Ok(dim.trailing_zeros() as usize)
}

/// Bit position (from the least significant end) of 1-based `site`.
#[inline]
pub fn site_bit(site: usize, n_sites: usize) -> usize {
    n_sites - site
}

pub(crate) fn validate_sites(sites: &[usize], n_sites: usize) -> Result<()> {
    if sites.is_empty() {
        return Err(Error::InvalidSites(sites.to_vec()));
    }
    for w in sites.windows(2) {
        if w[0] >= w[1] {
            return Err(Error::InvalidSites(sites.to_vec()));
        }
    }
    for &s in sites {
        if s == 0 || s > n_sites {
            return Err(Error::SiteOutOfRange {
                site: s,
                len: n_sites,
            });
        }
    }
    Ok(())
}

/// Embeds `local` (acting on `sites`, first listed site most significant)
/// into the `2^L`-dimensional space, with identity on all other sites.
pub fn kron_embed(local: &DenseOperator, sites: &[usize], n_sites: usize) -> Result<DenseOperator> {
    validate_sites(sites, n_sites)?;
    let k = sites.len();
    let local_dim = 1usize << k;
    if local.nrows() != local_dim || local.ncols() != local_dim {
        return Err(Error::DimensionMismatch {
            expected: local_dim,
            found: local.nrows(),
        });
    }
    let dim = 1usize << n_sites;
    let bits: Vec<usize> = sites.iter().map(|&s| site_bit(s, n_sites)).collect();
    let mask: usize = bits.iter().map(|b| 1usize << b).sum();
    let local_index = |idx: usize| -> usize {
        bits.iter()
            .fold(0usize, |acc, &b| (acc << 1) | ((idx >> b) & 1))
    };
    let spread = |li: usize| -> usize {
        bits.iter()
            .enumerate()
            .fold(0usize, |acc, (pos, &b)| acc | (((li >> (k - 1 - pos)) & 1) << b))
    };
    let mut out = DMatrix::from_element(dim, dim, ZERO);
    for col in 0..dim {
        let rest = col & !mask;
        let lc = local_index(col);
        for lr in 0..local_dim {
            let v = local[(lr, lc)];
            if v != ZERO {
                out[(rest | spread(lr), col)] += v;
            }
        }
    }
    Ok(out)
}

/// Applies a `2^k × 2^k` local operator on ascending `sites` to `amps` in place.
pub fn apply_local(amps: &mut [C64], local: &DenseOperator, sites: &[usize], n_sites: usize) {
    let k = sites.len();
    let local_dim = 1usize << k;
    debug_assert_eq!(local.nrows(), local_dim);
    debug_assert_eq!(amps.len(), 1usize << n_sites);
    let bits: Vec<usize> = sites.iter().map(|&s| site_bit(s, n_sites)).collect();
    let mask: usize = bits.iter().map(|b| 1usize << b).sum();
    let offsets: Vec<usize> = (0..local_dim)
        .map(|li| {
            bits.iter()
                .enumerate()
                .fold(0usize, |acc, (pos, &b)| acc | (((li >> (k - 1 - pos)) & 1) << b))
        })
        .collect();
    // row-major copy for the inner loop
    let m: Vec<C64> = (0..local_dim * local_dim)
        .map(|i| local[(i / local_dim, i % local_dim)])
        .collect();
    let mut buf = [ZERO; 8];
    let mut out = [ZERO; 8];
    for base in 0..amps.len() {
        if base & mask != 0 {
            continue;
        }
        for (slot, &off) in offsets.iter().enumerate() {
            buf[slot] = amps[base | off];
        }
        for r in 0..local_dim {
            let row = &m[r * local_dim..(r + 1) * local_dim];
            let mut acc = ZERO;
            for c in 0..local_dim {
                acc += row[c] * buf[c];
            }
            out[r] = acc;
        }
        for (slot, &off) in offsets.iter().enumerate() {
            amps[base | off] = out[slot];
        }
    }
}

/// Eigenvalues (ascending) and eigenvectors (columns) of a Hermitian operator.
#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    energies: Vec<f64>,
    basis: DenseOperator,
}

impl SpectralDecomposition {
    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    pub fn basis(&self) -> &DenseOperator {
        &self.basis
    }

    pub fn dim(&self) -> usize {
        self.energies.len()
    }

    /// `c_n = ⟨n|ψ⟩`.
    pub fn coefficients(&self, psi: &StateVector) -> Result<DVector<C64>> {
        psi.check_dim(self.dim())?;
        Ok(self.basis.ad_mul(psi.amplitudes()))
    }

    /// Rotates an operator into the eigenbasis: `basis† · A · basis`.
    pub fn to_eigenbasis(&self, op: &DenseOperator) -> Result<DenseOperator> {
        if op.nrows() != self.dim() || op.ncols() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: op.nrows(),
            });
        }
        Ok(self.basis.adjoint() * op * &self.basis)
    }

    /// `Σ_n f(E_n) |n⟩⟨n|`.
    pub fn apply_function(&self, f: impl Fn(f64) -> C64) -> DenseOperator {
        let mut scaled = self.basis.clone();
        for (j, &e) in self.energies.iter().enumerate() {
            let w = f(e);
            scaled.column_mut(j).scale_mut_c(w);
        }
        scaled * self.basis.adjoint()
    }

    pub fn reconstruct(&self) -> DenseOperator {
        self.apply_function(|e| C64::new(e, 0.0))
    }

    /// `e^{-iHt}` as a dense matrix.
    pub fn propagator(&self, t: f64) -> DenseOperator {
        self.apply_function(|e| C64::from_polar(1.0, -e * t))
    }

    /// `e^{-iHt} v` for an arbitrary (not necessarily normalized) vector.
    pub fn evolve_vector(&self, v: &DVector<C64>, t: f64) -> DVector<C64> {
        let mut c = self.basis.ad_mul(v);
        for (z, &e) in c.iter_mut().zip(&self.energies) {
            *z *= C64::from_polar(1.0, -e * t);
        }
        &self.basis * c
    }

    /// Groups indices of (numerically) degenerate eigenvalues.
    pub fn degenerate_clusters(&self, tol: f64) -> Vec<std::ops::Range<usize>> {
        let mut clusters = Vec::new();
        let mut start = 0;
        for i in 1..=self.energies.len() {
            if i == self.energies.len() || self.energies[i] - self.energies[i - 1] > tol {
                clusters.push(start..i);
                start = i;
            }
        }
        clusters
    }
}

trait ScaleColumn {
    fn scale_mut_c(&mut self, w: C64);
}

impl<S: nalgebra::StorageMut<C64, nalgebra::Dyn, nalgebra::U1>> ScaleColumn
    for nalgebra::Matrix<C64, nalgebra::Dyn, nalgebra::U1, S>
{
    fn scale_mut_c(&mut self, w: C64) {
        for z in self.iter_mut() {
            *z *= w;
        }
    }
}

const EIG_EPS: f64 = 1e-15;
const EIG_MAX_ITER: usize = 100_000;

/// Diagonalizes a Hermitian operator. Eigenvalues ascend; each eigenvector is
/// phase-fixed so its largest-modulus component is real and positive.
pub fn eigendecompose_hermitian(h: &DenseOperator) -> Result<SpectralDecomposition> {
    if !h.is_square() {
        return Err(Error::DimensionMismatch {
            expected: h.nrows(),
            found: h.ncols(),
        });
    }
    let scale = max_abs(h).max(1.0);
    let defect = hermiticity_defect(h);
    if defect > HERMITIAN_TOL * scale {
        return Err(Error::NotHermitian(defect));
    }
    let sym = (h + h.adjoint()).scale(0.5);
    let eig = nalgebra::SymmetricEigen::try_new(sym, EIG_EPS, EIG_MAX_ITER)
        .ok_or(Error::NoConvergence)?;
    let n = h.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let energies: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut basis = DMatrix::from_element(n, n, ZERO);
    for (dst, &src) in order.iter().enumerate() {
        let col = eig.eigenvectors.column(src);
        let pivot = col
            .iter()
            .copied()
            .max_by(|a, b| a.norm().total_cmp(&b.norm()))
            .unwrap_or(ONE);
        let phase = if pivot.norm() > 0.0 {
            pivot.conj() / pivot.norm()
        } else {
            ONE
        };
        for r in 0..n {
            basis[(r, dst)] = col[r] * phase;
        }
    }
    Ok(SpectralDecomposition { energies, basis })
}

/// `Σ_n c_n e^{-iE_n t}|n⟩` with `c_n = ⟨n|ψ0⟩`.
pub fn exact_evolve(spec: &SpectralDecomposition, psi0: &StateVector, t: f64) -> Result<StateVector> {
    let mut c = spec.coefficients(psi0)?;
    for (cn, &e) in c.iter_mut().zip(spec.energies.iter()) {
        *cn *= C64::from_polar(1.0, -e * t);
    }
    Ok(StateVector::from_raw(psi0.n_qubits(), &spec.basis * c))
}

/// `exp(-i·t·H)` for Hermitian `H`, through its eigendecomposition.
pub fn expm_hermitian(h: &DenseOperator, t: f64) -> Result<DenseOperator> {
    Ok(eigendecompose_hermitian(h)?.propagator(t))
}

/// Eigenphases and eigenvectors of a unitary, `U = Q·diag(e^{iθ})·Q†`.
#[derive(Debug, Clone)]
pub struct UnitaryDecomposition {
    phases: Vec<f64>,
    basis: DenseOperator,
}

impl UnitaryDecomposition {
    /// Eigenphases in `(−π, π]`, in Schur order.
    pub fn phases(&self) -> &[f64] {
        &self.phases
    }

    pub fn basis(&self) -> &DenseOperator {
        &self.basis
    }

    pub fn dim(&self) -> usize {
        self.phases.len()
    }

    /// `e^{iθ_n}`.
    pub fn eigenvalues(&self) -> Vec<C64> {
        self.phases.iter().map(|&p| C64::from_polar(1.0, p)).collect()
    }

    /// `U^k v`, with negative `k` for powers of `U†`.
    pub fn power_apply(&self, v: &DVector<C64>, k: i64) -> DVector<C64> {
        let mut c = self.basis.ad_mul(v);
        for (z, &p) in c.iter_mut().zip(&self.phases) {
            *z *= C64::from_polar(1.0, p * k as f64);
        }
        &self.basis * c
    }
}

/// Complex Schur form of a unitary; for normal matrices the triangular
/// factor is diagonal up to rounding.
pub fn eigendecompose_unitary(u: &DenseOperator) -> Result<UnitaryDecomposition> {
    let defect = unitarity_defect(u);
    if defect > UNITARY_TOL {
        return Err(Error::NotUnitary(defect));
    }
    let schur = nalgebra::Schur::try_new(u.clone(), EIG_EPS, EIG_MAX_ITER).ok_or(Error::NoConvergence)?;
    let (basis, t) = schur.unpack();
    let phases = (0..u.nrows()).map(|i| t[(i, i)].arg()).collect();
    Ok(UnitaryDecomposition { phases, basis })
}

/// Effective Hamiltonian `i·log(U)/dt` on the principal branch, so that
/// `exp(-i·H_eff·dt) = U`.
pub fn unitary_log_generator(u: &DenseOperator, dt: f64) -> Result<DenseOperator> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidParameter(format!("time step must be positive, got {dt}")));
    }
    let dec = eigendecompose_unitary(u)?;
    if let Some(&phase) = dec
        .phases
        .iter()
        .find(|p| std::f64::consts::PI - p.abs() < BRANCH_CUT_TOL)
    {
        return Err(Error::BranchCut {
            phase,
            tol: BRANCH_CUT_TOL,
        });
    }
    let n = u.nrows();
    let mut scaled = dec.basis.clone();
    for (j, &phase) in dec.phases.iter().enumerate() {
        let w = C64::new(-phase / dt, 0.0);
        for r in 0..n {
            scaled[(r, j)] *= w;
        }
    }
    let h = scaled * dec.basis.adjoint();
    Ok((&h + h.adjoint()).scale(0.5))
}
