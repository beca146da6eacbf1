//! Spectral error prediction, Loschmidt echoes, ladder diagnostics and
//! single-site observables.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::formulas::{ErrorKernel, TrotterCircuit};
use crate::linalg::{
    exact_evolve, kron_embed, pauli_x, pauli_y, pauli_z, site_bit, DenseOperator,
    SpectralDecomposition, StateVector, C64, ZERO,
};

/// Below this `|ω|·t` the stroboscopic weight uses its Taylor series.
pub const SMALL_PHASE: f64 = 1e-7;

/// `g(ω, t) = 2 sin(ωt/2) / ω`, continuous through `ω = 0` where it equals `t`.
pub fn stroboscopic_weight(omega: f64, t: f64) -> f64 {
    let x = omega * t;
    if x.abs() < SMALL_PHASE {
        t * (1.0 - x * x / 24.0 + x.powi(4) / 1920.0)
    } else {
        2.0 * (0.5 * x).sin() / omega
    }
}

/// Leading-order prediction of `‖δψ(t)‖` from the spectrum and an error kernel.
pub fn perturbative_error(
    spec: &SpectralDecomposition,
    kernel: &ErrorKernel,
    psi0: &StateVector,
    dt: f64,
    t: f64,
) -> Result<f64> {
    Ok(PerturbativePredictor::new(spec, kernel, psi0)?.error(dt, t))
}

/// Precomputed `K̃_{nm} c_m` for evaluating the predictor at many times.
#[derive(Debug, Clone)]
pub struct PerturbativePredictor {
    energies: Vec<f64>,
    weighted: DenseOperator,
    order: usize,
}

impl PerturbativePredictor {
    pub fn new(spec: &SpectralDecomposition, kernel: &ErrorKernel, psi0: &StateVector) -> Result<Self> {
        let c = spec.coefficients(psi0)?;
        let mut weighted = spec.to_eigenbasis(kernel.matrix())?;
        for (m, cm) in c.iter().enumerate() {
            for z in weighted.column_mut(m).iter_mut() {
                *z *= cm;
            }
        }
        Ok(Self {
            energies: spec.energies().to_vec(),
            weighted,
            order: kernel.order(),
        })
    }

    pub fn error(&self, dt: f64, t: f64) -> f64 {
        let dim = self.energies.len();
        let mut total = 0.0;
        for n in 0..dim {
            let mut acc = ZERO;
            for m in 0..dim {
                let a = self.weighted[(n, m)];
                if a == ZERO {
                    continue;
                }
                let omega = self.energies[n] - self.energies[m];
                acc += a * C64::from_polar(stroboscopic_weight(omega, t), 0.5 * omega * t);
            }
            total += acc.norm_sqr();
        }
        dt.powi(self.order as i32) * total.sqrt()
    }
}

/// `F(t) = |Σ_n |c_n|² e^{-iE_n t}|²`.
pub fn loschmidt_exact(spec: &SpectralDecomposition, psi0: &StateVector, times: &[f64]) -> Result<Vec<f64>> {
    let weights: Vec<f64> = spec.coefficients(psi0)?.iter().map(|c| c.norm_sqr()).collect();
    Ok(times
        .iter()
        .map(|&t| {
            weights
                .iter()
                .zip(spec.energies())
                .fold(ZERO, |acc, (&w, &e)| acc + C64::from_polar(w, -e * t))
                .norm_sqr()
        })
        .collect())
}

/// `F_T(t_k) = |⟨ψ0|ψ_k⟩|²` along a Trotterized trajectory.
pub fn loschmidt_trotter(psi0: &StateVector, trajectory: &[StateVector]) -> Result<Vec<f64>> {
    trajectory
        .iter()
        .map(|s| Ok(psi0.inner(s)?.norm_sqr()))
        .collect()
}

/// Ladder fit of the spectral weight of a state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LadderReport {
    /// Estimated ladder spacing Ω; `None` when fewer than two distinct
    /// energies carry weight above the cutoff.
    pub omega: Option<f64>,
    pub strobe_times: Vec<f64>,
    /// Weighted RMS distance of the supported levels from the fitted ladder
    /// `E_0 + Ω·ℤ` (0 when Ω is undefined).
    pub residual: f64,
    /// True when `residual ≤ rel_tol·Ω`.
    pub commensurate: bool,
    /// `(E_n, |c_n|²)` sorted by weight, descending.
    pub top_overlaps: Vec<(f64, f64)>,
    pub total_weight: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct LadderFitOptions {
    /// Smallest spacing considered.
    pub min_omega: f64,
    /// Candidate spacings are pairwise gaps divided by `1..=max_divisor`.
    pub max_divisor: usize,
    /// A fit is accepted when the weighted RMS deviation is at most `rel_tol·Ω`.
    pub rel_tol: f64,
    /// Gaps below this are treated as degeneracies.
    pub degeneracy_tol: f64,
}

impl Default for LadderFitOptions {
    fn default() -> Self {
        Self {
            min_omega: 0.0,
            max_divisor: 12,
            rel_tol: 0.05,
            degeneracy_tol: 1e-8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LadderFit {
    pub omega: f64,
    pub residual: f64,
    pub commensurate: bool,
}

fn distance_to_multiple(gap: f64, omega: f64) -> f64 {
    (gap - omega * (gap / omega).round()).abs()
}

/// Weighted RMS distance of the levels from the ladder `offset + Ω·ℤ`.
fn ladder_rms(levels: &[(f64, f64)], offset: f64, omega: f64) -> f64 {
    let (ss, w): (f64, f64) = levels.iter().fold((0.0, 0.0), |(ss, w), &(e, wi)| {
        (ss + wi * distance_to_multiple(e - offset, omega).powi(2), w + wi)
    });
    (ss / w).sqrt()
}

/// Offset of the ladder with spacing `omega` from the weighted circular mean
/// of the level phases.
fn circular_offset(levels: &[(f64, f64)], omega: f64) -> f64 {
    let z: C64 = levels
        .iter()
        .map(|&(e, w)| C64::from_polar(w, 2.0 * std::f64::consts::PI * e / omega))
        .sum();
    z.arg() * omega / (2.0 * std::f64::consts::PI)
}

/// Alternates integer assignment `k_i = round((E_i − E_0)/Ω)` with a weighted
/// linear regression `E_i ≈ E_0 + k_i·Ω` until the assignment is stable.
fn refine_ladder(levels: &[(f64, f64)], omega: f64) -> (f64, f64) {
    let mut offset = circular_offset(levels, omega);
    let mut omega = omega;
    let mut assignment: Vec<f64> = Vec::new();
    for _ in 0..50 {
        let k: Vec<f64> = levels.iter().map(|&(e, _)| ((e - offset) / omega).round()).collect();
        if k == assignment {
            break;
        }
        let (mut sw, mut sk, mut se, mut skk, mut ske) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for (&(e, w), &ki) in levels.iter().zip(&k) {
            sw += w;
            sk += w * ki;
            se += w * e;
            skk += w * ki * ki;
            ske += w * ki * e;
        }
        let det = sw * skk - sk * sk;
        if det > 1e-300 {
            let fitted = (sw * ske - sk * se) / det;
            if !(fitted > 0.0) {
                break;
            }
            omega = fitted;
        }
        offset = (se - omega * sk) / sw;
        assignment = k;
    }
    (offset, omega)
}

/// Fits a common spacing to the weighted levels `(E, w)`.
///
/// Candidates are pairwise gaps divided by `1..=max_divisor`, scanned from the
/// largest down. Each is refined to the ladder `E_0 + Ω·ℤ` best fitting the
/// levels in the weighted least-squares sense. The largest spacing whose
/// weighted RMS deviation is within `rel_tol·Ω` is returned; otherwise the
/// candidate with the smallest relative residual, flagged as not commensurate.
pub fn fit_ladder(levels: &[(f64, f64)], opts: &LadderFitOptions) -> Option<LadderFit> {
    let mut gaps: Vec<f64> = Vec::new();
    for (i, &(ei, _)) in levels.iter().enumerate() {
        for &(ej, _) in &levels[i + 1..] {
            let gap = (ei - ej).abs();
            if gap > opts.degeneracy_tol {
                gaps.push(gap);
            }
        }
    }
    if gaps.is_empty() {
        return None;
    }
    let max_gap = gaps.iter().copied().fold(0.0, f64::max);
    let floor = opts.min_omega.max(max_gap / (4 * opts.max_divisor) as f64);
    let mut candidates: Vec<f64> = gaps
        .iter()
        .flat_map(|&g| (1..=opts.max_divisor).map(move |d| g / d as f64))
        .filter(|&o| o >= floor)
        .collect();
    candidates.sort_by(|a, b| b.total_cmp(a));
    candidates.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * b.abs());

    let mut fallback: Option<LadderFit> = None;
    for cand in candidates {
        let raw = (cand, ladder_rms(levels, circular_offset(levels, cand), cand));
        let (offset, refined) = refine_ladder(levels, cand);
        let polished = (refined, ladder_rms(levels, offset, refined));
        // refinement can drift; keep the raw candidate if it fits better
        let (omega, residual) = if raw.1 <= polished.1 { raw } else { polished };
        if omega < floor {
            continue;
        }
        if residual <= opts.rel_tol * omega {
            return Some(LadderFit {
                omega,
                residual,
                commensurate: true,
            });
        }
        let rel = residual / omega;
        if fallback.map_or(true, |f| rel < f.residual / f.omega) {
            fallback = Some(LadderFit {
                omega,
                residual,
                commensurate: false,
            });
        }
    }
    fallback
}

/// Spectral-weight report for `psi0`: top overlaps and a ladder fit over the
/// eigenstates carrying at least `weight_cutoff`.
pub fn ladder_report(
    spec: &SpectralDecomposition,
    psi0: &StateVector,
    weight_cutoff: f64,
    top_k: usize,
) -> Result<LadderReport> {
    ladder_report_with(spec, psi0, weight_cutoff, top_k, &LadderFitOptions::default())
}

pub fn ladder_report_with(
    spec: &SpectralDecomposition,
    psi0: &StateVector,
    weight_cutoff: f64,
    top_k: usize,
    opts: &LadderFitOptions,
) -> Result<LadderReport> {
    if !(weight_cutoff > 0.0 && weight_cutoff < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "weight cutoff must lie in (0, 1), got {weight_cutoff}"
        )));
    }
    if top_k < 2 {
        return Err(Error::InvalidParameter(format!("need at least 2 overlaps, got {top_k}")));
    }
    let weights: Vec<f64> = spec.coefficients(psi0)?.iter().map(|c| c.norm_sqr()).collect();
    let total_weight = weights.iter().sum();
    let mut levels: Vec<(f64, f64)> = spec.energies().iter().copied().zip(weights.iter().copied()).collect();
    levels.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.total_cmp(&b.0)));
    let top_overlaps = levels.iter().take(top_k).copied().collect();
    let supported: Vec<(f64, f64)> = levels.iter().copied().filter(|l| l.1 >= weight_cutoff).collect();
    let fit = if supported.len() >= 2 { fit_ladder(&supported, opts) } else { None };
    Ok(match fit {
        Some(f) => LadderReport {
            omega: Some(f.omega),
            strobe_times: crate::models::strobe_times(f.omega, 5),
            residual: f.residual,
            commensurate: f.commensurate,
            top_overlaps,
            total_weight,
        },
        None => LadderReport {
            omega: None,
            strobe_times: Vec::new(),
            residual: 0.0,
            commensurate: false,
            top_overlaps,
            total_weight,
        },
    })
}

/// `(⟨σ^x⟩, ⟨σ^y⟩, ⟨σ^z⟩)` at a 1-based site.
pub fn local_expectations(psi: &StateVector, site: usize) -> Result<[f64; 3]> {
    let l = psi.n_qubits();
    if site == 0 || site > l {
        return Err(Error::SiteOutOfRange { site, len: l });
    }
    let bit = 1usize << site_bit(site, l);
    let amps = psi.amplitudes();
    let (mut p0, mut p1, mut rho10) = (0.0, 0.0, ZERO);
    for i in 0..amps.len() {
        if i & bit != 0 {
            continue;
        }
        let (a0, a1) = (amps[i], amps[i | bit]);
        p0 += a0.norm_sqr();
        p1 += a1.norm_sqr();
        rho10 += a1 * a0.conj();
    }
    Ok([2.0 * rho10.re, 2.0 * rho10.im, p0 - p1])
}

/// Dense `S² = (Σ_j S_j)²` for a spin-1/2 chain.
pub fn total_spin_operator(n_sites: usize) -> DenseOperator {
    let dim = 1usize << n_sites;
    let mut total = [
        DenseOperator::zeros(dim, dim),
        DenseOperator::zeros(dim, dim),
        DenseOperator::zeros(dim, dim),
    ];
    for (acc, pauli) in total.iter_mut().zip([pauli_x(), pauli_y(), pauli_z()]) {
        for site in 1..=n_sites {
            *acc += kron_embed(&pauli.scale(0.5), &[site], n_sites).expect("valid site");
        }
    }
    total.iter().fold(DenseOperator::zeros(dim, dim), |acc, s| acc + s * s)
}

/// `⟨S²⟩` from `S² = 3L/4 + Σ_{i<j} (2·SWAP_ij − 1)/2`.
pub fn total_spin_expectation(psi: &StateVector) -> f64 {
    let l = psi.n_qubits();
    let amps = psi.amplitudes();
    let mut value = 0.75 * l as f64;
    for i in 1..=l {
        for j in i + 1..=l {
            let (bi, bj) = (1usize << site_bit(i, l), 1usize << site_bit(j, l));
            let mut swap = ZERO;
            for idx in 0..amps.len() {
                let (xi, xj) = (idx & bi != 0, idx & bj != 0);
                let swapped = if xi == xj { idx } else { idx ^ bi ^ bj };
                swap += amps[idx].conj() * amps[swapped];
            }
            value += (2.0 * swap.re - 1.0) / 2.0;
        }
    }
    value
}

/// `⟨S²⟩` for every eigenvector after diagonalizing `S²` inside each
/// degenerate cluster of `H`.
pub fn total_spin_labels(spec: &SpectralDecomposition, n_sites: usize, degeneracy_tol: f64) -> Result<Vec<f64>> {
    let s2 = total_spin_operator(n_sites);
    if s2.nrows() != spec.dim() {
        return Err(Error::DimensionMismatch {
            expected: spec.dim(),
            found: s2.nrows(),
        });
    }
    let mut labels = Vec::with_capacity(spec.dim());
    for cluster in spec.degenerate_clusters(degeneracy_tol) {
        let v = spec.basis().columns(cluster.start, cluster.len()).into_owned();
        let restricted = v.adjoint() * &s2 * &v;
        let inner = crate::linalg::eigendecompose_hermitian(&restricted)?;
        labels.extend_from_slice(inner.energies());
    }
    Ok(labels)
}

/// Time series for one initial state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub times: Vec<f64>,
    pub loschmidt_exact: Vec<f64>,
    pub loschmidt_trotter: Vec<f64>,
    pub trotter_error: Vec<f64>,
    /// Empty when no kernel was supplied.
    pub predicted_error: Vec<f64>,
    pub tracked_sites: Vec<usize>,
    /// `bloch[k][s]`: Bloch vector of `tracked_sites[s]` at `times[k]` under exact evolution.
    pub bloch: Vec<Vec<[f64; 3]>>,
}

/// Runs Trotterized and exact evolution side by side, recording every
/// `stride`-th step up to `n_steps`.
pub fn record_trajectory(
    spec: &SpectralDecomposition,
    circuit: &TrotterCircuit,
    kernel: Option<&ErrorKernel>,
    psi0: &StateVector,
    dt: f64,
    n_steps: usize,
    stride: usize,
    tracked_sites: &[usize],
) -> Result<TrajectoryRecord> {
    let stride = stride.max(1);
    for &s in tracked_sites {
        if s == 0 || s > psi0.n_qubits() {
            return Err(Error::SiteOutOfRange {
                site: s,
                len: psi0.n_qubits(),
            });
        }
    }
    let predictor = kernel.map(|k| PerturbativePredictor::new(spec, k, psi0)).transpose()?;
    let mut rec = TrajectoryRecord {
        times: Vec::new(),
        loschmidt_exact: Vec::new(),
        loschmidt_trotter: Vec::new(),
        trotter_error: Vec::new(),
        predicted_error: Vec::new(),
        tracked_sites: tracked_sites.to_vec(),
        bloch: Vec::new(),
    };
    let mut amps: DVector<C64> = psi0.amplitudes().clone();
    for n in 0..=n_steps {
        if n > 0 {
            circuit.step(&mut amps);
        }
        if n % stride != 0 && n != n_steps {
            continue;
        }
        let t = n as f64 * dt;
        let exact = exact_evolve(spec, psi0, t)?;
        rec.times.push(t);
        rec.loschmidt_exact.push(psi0.inner(&exact)?.norm_sqr());
        rec.loschmidt_trotter.push(psi0.amplitudes().dotc(&amps).norm_sqr());
        rec.trotter_error.push((exact.amplitudes() - &amps).norm());
        if let Some(p) = &predictor {
            rec.predicted_error.push(p.error(dt, t));
        }
        rec.bloch.push(
            tracked_sites
                .iter()
                .map(|&s| local_expectations(&exact, s))
                .collect::<Result<_>>()?,
        );
    }
    Ok(rec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formulas::{error_kernel, measured_trotter_error, suzuki_schedule, trotter_evolve};
    use crate::linalg::{eigendecompose_hermitian, StateVector, ONE};
    use crate::models::{build_heisenberg, build_stark};
    use rand::{Rng, SeedableRng};

    fn random_state(l: usize, seed: u64) -> StateVector {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let v = DVector::from_fn(1 << l, |_, _| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
        StateVector::normalized(v).unwrap()
    }

    #[test]
    fn weight_is_continuous_at_zero_frequency() {
        for &t in &[0.5, 1.0, 10.0] {
            for &w in &[0.0, 1e-12, 5e-9, -3e-9] {
                assert!((stroboscopic_weight(w, t) - t).abs() < 1e-8);
            }
            let w = 2e-7 / t;
            let exact = 2.0 * (0.5 * w * t).sin() / w;
            assert!((stroboscopic_weight(w, t) - exact).abs() < 1e-12);
        }
    }

    #[test]
    fn prediction_vanishes_at_zero_time() {
        let ham = build_heisenberg(4, 0.5).unwrap();
        let spec = eigendecompose_hermitian(&ham.dense()).unwrap();
        let k = error_kernel(&ham, 2).unwrap();
        assert_eq!(perturbative_error(&spec, &k, &random_state(4, 1), 0.01, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn eigenstate_with_diagonal_kernel_grows_secularly() {
        let h = DenseOperator::from_diagonal(&DVector::from_vec(vec![
            C64::new(0.0, 0.0),
            C64::new(1.0, 0.0),
            C64::new(2.5, 0.0),
            C64::new(3.0, 0.0),
        ]));
        let spec = eigendecompose_hermitian(&h).unwrap();
        let kdiag = DenseOperator::from_diagonal(&DVector::from_vec(vec![
            C64::new(0.3, 0.0),
            C64::new(-0.7, 0.0),
            C64::new(0.1, 0.0),
            C64::new(0.2, 0.0),
        ]));
        let kernel = ErrorKernel::new(2, kdiag).unwrap();
        let psi = StateVector::basis_state(2, 1).unwrap();
        let (dt, t) = (0.01, 3.7);
        let got = perturbative_error(&spec, &kernel, &psi, dt, t).unwrap();
        assert!((got - dt * dt * 0.7 * t).abs() < 1e-15);
    }

    #[test]
    fn prediction_tracks_measurement_heisenberg() {
        let ham = build_heisenberg(6, 0.5).unwrap();
        let spec = eigendecompose_hermitian(&ham.dense()).unwrap();
        let k = error_kernel(&ham, 2).unwrap();
        let psi = random_state(6, 2);
        let times: Vec<f64> = (1..=10).map(|i| i as f64).collect();
        let measured = measured_trotter_error(&ham, &suzuki_schedule(1), 0.01, &psi, &times).unwrap();
        for (&t, &m) in times.iter().zip(&measured) {
            let p = perturbative_error(&spec, &k, &psi, 0.01, t).unwrap();
            assert!((p - m).abs() / m < 0.1, "t = {t}: predicted {p:e}, measured {m:e}");
        }
    }

    #[test]
    fn echo_of_eigenstate_is_one() {
        let ham = build_heisenberg(4, 0.5).unwrap();
        let spec = eigendecompose_hermitian(&ham.dense()).unwrap();
        let psi = StateVector::normalized(spec.basis().column(3).into_owned()).unwrap();
        for f in loschmidt_exact(&spec, &psi, &[0.0, 1.0, 7.3]).unwrap() {
            assert!((f - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn two_mode_echo_is_cosine_squared() {
        let gap = 0.8;
        let h = DenseOperator::from_diagonal(&DVector::from_vec(vec![C64::new(0.0, 0.0), C64::new(gap, 0.0)]));
        let spec = eigendecompose_hermitian(&h).unwrap();
        let psi = StateVector::normalized(DVector::from_element(2, ONE)).unwrap();
        let times = [0.0, 0.4, 1.9, 5.0];
        for (f, &t) in loschmidt_exact(&spec, &psi, &times).unwrap().iter().zip(&times) {
            assert!((f - (gap * t / 2.0).cos().powi(2)).abs() < 1e-14);
        }
    }

    #[test]
    fn ladder_state_revives_at_strobe_times() {
        let omega = 0.5;
        let energies = [0.0, 0.5, 1.0, 2.0];
        let h = DenseOperator::from_diagonal(&DVector::from_iterator(4, energies.iter().map(|&e| C64::new(e, 0.0))));
        let spec = eigendecompose_hermitian(&h).unwrap();
        let psi = StateVector::normalized(DVector::from_vec(vec![ONE, C64::new(0.5, 0.2), ONE, C64::new(0.0, 0.7)])).unwrap();
        let times: Vec<f64> = (1..=3).map(|p| 2.0 * std::f64::consts::PI * p as f64 / omega).collect();
        for f in loschmidt_exact(&spec, &psi, &times).unwrap() {
            assert!((f - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn trotter_echo_matches_exact_without_splitting_error() {
        let ham = build_heisenberg(2, 0.6).unwrap();
        let spec = eigendecompose_hermitian(&ham.dense()).unwrap();
        let psi = random_state(2, 3);
        let traj = trotter_evolve(&ham, &suzuki_schedule(1), 0.1, 30, &psi).unwrap();
        let ft = loschmidt_trotter(&psi, &traj).unwrap();
        assert!((ft[0] - 1.0).abs() < 1e-14);
        let times: Vec<f64> = (0..=30).map(|n| n as f64 * 0.1).collect();
        let fe = loschmidt_exact(&spec, &psi, &times).unwrap();
        for (a, b) in ft.iter().zip(&fe) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn trotter_echo_deviation_shrinks_quadratically() {
        let ham = build_heisenberg(6, 0.5).unwrap();
        let spec = eigendecompose_hermitian(&ham.dense()).unwrap();
        let psi = random_state(6, 4);
        let dev = |dt: f64| {
            let n = (10.0 / dt).round() as usize;
            let traj = trotter_evolve(&ham, &suzuki_schedule(1), dt, n, &psi).unwrap();
            let ft = loschmidt_trotter(&psi, &traj).unwrap();
            let times: Vec<f64> = (0..=n).map(|k| k as f64 * dt).collect();
            let fe = loschmidt_exact(&spec, &psi, &times).unwrap();
            ft.iter().zip(&fe).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
        };
        let ratio = dev(0.04) / dev(0.02);
        assert!((ratio - 4.0).abs() < 0.6, "ratio {ratio}");
    }

    /// Brute-force oracle: smallest relative RMS distance of equally weighted
    /// levels from any ladder `E_0 + Ω·ℤ`, over fine grids in Ω and E_0.
    fn scan_relative_residual(energies: &[f64], lo: f64, hi: f64) -> f64 {
        let mut best = f64::INFINITY;
        let (n_omega, n_offset) = (20_000, 1000);
        for i in 0..=n_omega {
            let omega = lo + (hi - lo) * i as f64 / n_omega as f64;
            for j in 0..n_offset {
                let offset = omega * j as f64 / n_offset as f64;
                let ss: f64 = energies
                    .iter()
                    .map(|&e| {
                        let x = (e - offset) / omega;
                        (x - x.round()).powi(2)
                    })
                    .sum();
                best = best.min((ss / energies.len() as f64).sqrt());
            }
        }
        best
    }

    #[test]
    fn exact_ladder_is_recovered() {
        let fit = fit_ladder(&[(0.0, 0.3), (0.5, 0.4), (1.0, 0.3)], &LadderFitOptions::default()).unwrap();
        assert!((fit.omega - 0.5).abs() < 1e-12);
        assert!(fit.residual < 1e-10);
        assert!(fit.commensurate);
    }

    #[test]
    fn finer_common_spacing_is_found() {
        // 0.5 and 1.25 share the spacing 0.25 exactly
        let fit = fit_ladder(&[(0.0, 0.3), (0.5, 0.4), (1.25, 0.3)], &LadderFitOptions::default()).unwrap();
        assert!((fit.omega - 0.25).abs() < 1e-12);
        assert!(fit.commensurate);
        assert!(scan_relative_residual(&[0.0, 0.5, 1.25], 0.26, 2.0) > 0.05);
    }

    #[test]
    fn incommensurate_levels_are_flagged() {
        let energies = [0.0, 1.0, 2f64.sqrt()];
        // oracle: no ladder with spacing in [0.25, 2] fits within 5 %
        assert!(scan_relative_residual(&energies, 0.25, 2.0) > 0.05);
        let opts = LadderFitOptions {
            min_omega: 0.25,
            ..LadderFitOptions::default()
        };
        let levels: Vec<(f64, f64)> = energies.iter().map(|&e| (e, 1.0 / 3.0)).collect();
        let fit = fit_ladder(&levels, &opts).unwrap();
        assert!(!fit.commensurate);
        assert!(fit.residual > 0.05 * fit.omega);
    }

    #[test]
    fn ladder_report_needs_two_levels() {
        let ham = build_heisenberg(3, 0.5).unwrap();
        let spec = eigendecompose_hermitian(&ham.dense()).unwrap();
        let psi = StateVector::normalized(spec.basis().column(0).into_owned()).unwrap();
        let rep = ladder_report(&spec, &psi, 1e-4, 20).unwrap();
        assert_eq!(rep.omega, None);
        assert!((rep.total_weight - 1.0).abs() < 1e-10);
        assert!(ladder_report(&spec, &psi, 0.0, 20).is_err());
        assert!(ladder_report(&spec, &psi, 1e-4, 1).is_err());
    }

    #[test]
    fn ladder_report_on_stark_potential() {
        let ham = build_stark(4, 0.0, 0.0, 0.0, 1.5).unwrap();
        let spec = eigendecompose_hermitian(&ham.dense()).unwrap();
        let psi = random_state(4, 5);
        let rep = ladder_report(&spec, &psi, 1e-4, 20).unwrap();
        assert!(rep.commensurate);
        // every gap is a multiple of 2·h_z = 3
        assert!((rep.omega.unwrap() - 3.0).abs() < 1e-9, "{:?}", rep.omega);
        assert_eq!(rep.top_overlaps.len(), 16);
        assert!(rep.top_overlaps.windows(2).all(|w| w[0].1 >= w[1].1));
    }

    #[test]
    fn bloch_vectors_of_simple_states() {
        let up = StateVector::basis_state(3, 0).unwrap();
        for s in 1..=3 {
            let b = local_expectations(&up, s).unwrap();
            assert!((b[0]).abs() < 1e-15 && b[1].abs() < 1e-15 && (b[2] - 1.0).abs() < 1e-15);
        }
        // R_x(π/2)|0⟩ = (|0⟩ − i|1⟩)/√2 on site 2 of 2
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let psi = StateVector::new(2, DVector::from_vec(vec![C64::new(r, 0.0), C64::new(0.0, -r), ZERO, ZERO])).unwrap();
        let b = local_expectations(&psi, 2).unwrap();
        assert!(b[0].abs() < 1e-15 && (b[1] + 1.0).abs() < 1e-15 && b[2].abs() < 1e-15);
        let bell = StateVector::new(2, DVector::from_vec(vec![C64::new(r, 0.0), ZERO, ZERO, C64::new(r, 0.0)])).unwrap();
        let b = local_expectations(&bell, 1).unwrap();
        assert!(b.iter().all(|x| x.abs() < 1e-15));
        assert!(local_expectations(&bell, 3).is_err());
    }

    #[test]
    fn total_spin_of_simple_states() {
        let up = StateVector::basis_state(4, 0).unwrap();
        assert!((total_spin_expectation(&up) - 6.0).abs() < 1e-12);
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let singlet = StateVector::new(2, DVector::from_vec(vec![ZERO, C64::new(r, 0.0), C64::new(-r, 0.0), ZERO])).unwrap();
        assert!(total_spin_expectation(&singlet).abs() < 1e-12);
        let psi = random_state(4, 6);
        let s2 = total_spin_operator(4);
        let dense = (psi.amplitudes().adjoint() * &s2 * psi.amplitudes())[(0, 0)].re;
        assert!((total_spin_expectation(&psi) - dense).abs() < 1e-12);
    }

    #[test]
    fn heisenberg_eigenstates_carry_total_spin_labels() {
        let ham = build_heisenberg(4, 0.0).unwrap();
        let spec = eigendecompose_hermitian(&ham.dense()).unwrap();
        let labels = total_spin_labels(&spec, 4, 1e-8).unwrap();
        for s2 in labels {
            let s = (-1.0 + (1.0 + 4.0 * s2).sqrt()) / 2.0;
            let nearest = (2.0 * s).round() / 2.0;
            assert!((s2 - nearest * (nearest + 1.0)).abs() < 1e-8, "⟨S²⟩ = {s2}");
        }
    }
}
