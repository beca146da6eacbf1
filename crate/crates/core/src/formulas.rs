//! Product formulas, Trotterized propagation and leading error kernels.
//!
//! A schedule is a list of layers in application order: the first layer acts
//! on the state first. For the first-order formula
//! `S1(dt) = e^{-iH_o dt} e^{-iH_e dt}` this means the even layer comes first.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{
    self, apply_local, commutator, eigendecompose_hermitian, exact_evolve, hermiticity_defect,
    identity, max_abs, spectral_norm, unitary_log_generator, DenseOperator, SpectralDecomposition,
    StateVector, C64, I,
};
use crate::models::{Group, LocalTerm, SplitHamiltonian};

/// Suzuki recursion coefficients `(p_k, s_k)` for building order `2k+2` from order `2k`.
pub fn suzuki_coefficients(k: usize) -> (f64, f64) {
    assert!(k >= 1, "Suzuki recursion starts at k = 1");
    let p = 1.0 / (4.0 - 4f64.powf(1.0 / (2 * k + 1) as f64));
    (p, 1.0 - 4.0 * p)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub group: Group,
    /// Fraction of the time step.
    pub coeff: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProductFormulaSchedule {
    order: usize,
    layers: Vec<Layer>,
}

impl ProductFormulaSchedule {
    /// Schedule of order `q ∈ {1, 2, 4, 6, ...}`.
    pub fn for_order(q: usize) -> Result<Self> {
        match q {
            1 => Ok(suzuki_schedule(0)),
            q if q >= 2 && q % 2 == 0 => Ok(suzuki_schedule(q / 2)),
            _ => Err(Error::InvalidParameter(format!(
                "product-formula order must be 1 or even, got {q}"
            ))),
        }
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    /// Total coefficient carried by `group` (1 for every valid formula).
    pub fn coefficient_sum(&self, group: Group) -> f64 {
        self.layers
            .iter()
            .filter(|l| l.group == group)
            .map(|l| l.coeff)
            .sum()
    }

    /// Schedule of the inverse step `S(dt)^{-1}`.
    pub fn inverse(&self) -> Self {
        Self {
            order: self.order,
            layers: self
                .layers
                .iter()
                .rev()
                .map(|l| Layer {
                    group: l.group,
                    coeff: -l.coeff,
                })
                .collect(),
        }
    }

    fn scaled(&self, factor: f64) -> impl Iterator<Item = Layer> + '_ {
        self.layers.iter().map(move |l| Layer {
            group: l.group,
            coeff: l.coeff * factor,
        })
    }
}

/// Merges adjacent same-group layers; same-group exponentials commute.
fn merge_layers(layers: impl IntoIterator<Item = Layer>) -> Vec<Layer> {
    let mut out: Vec<Layer> = Vec::new();
    for layer in layers {
        match out.last_mut() {
            Some(last) if last.group == layer.group => last.coeff += layer.coeff,
            _ => out.push(layer),
        }
    }
    out
}

/// `k = 0`: first order; `k = 1`: symmetric second order; `k ≥ 2`: order `2k`
/// by the Suzuki recursion `S(p)² S(s) S(p)²` applied to order `2k-2`.
pub fn suzuki_schedule(k: usize) -> ProductFormulaSchedule {
    match k {
        0 => ProductFormulaSchedule {
            order: 1,
            layers: vec![
                Layer { group: Group::Even, coeff: 1.0 },
                Layer { group: Group::Odd, coeff: 1.0 },
            ],
        },
        1 => ProductFormulaSchedule {
            order: 2,
            layers: vec![
                Layer { group: Group::Odd, coeff: 0.5 },
                Layer { group: Group::Even, coeff: 1.0 },
                Layer { group: Group::Odd, coeff: 0.5 },
            ],
        },
        _ => {
            let inner = suzuki_schedule(k - 1);
            let (p, s) = suzuki_coefficients(k - 1);
            let expanded = inner
                .scaled(p)
                .chain(inner.scaled(p))
                .chain(inner.scaled(s))
                .chain(inner.scaled(p))
                .chain(inner.scaled(p))
                .collect::<Vec<_>>();
            ProductFormulaSchedule {
                order: 2 * k,
                layers: merge_layers(expanded),
            }
        }
    }
}

/// Local term with its eigendecomposition, for cheap exponentials at any time.
#[derive(Debug, Clone)]
struct DiagonalizedTerm {
    sites: Vec<usize>,
    spec: SpectralDecomposition,
}

impl DiagonalizedTerm {
    fn new(term: &LocalTerm) -> Result<Self> {
        Ok(Self {
            sites: term.sites().to_vec(),
            spec: eigendecompose_hermitian(term.matrix())?,
        })
    }
}

#[derive(Debug, Clone)]
struct Gate {
    sites: Vec<usize>,
    matrix: DenseOperator,
}

/// Applies `e^{-i·coeff_dt·Σ terms}` as a product of local exponentials.
pub fn apply_group_exponential(terms: &[LocalTerm], coeff_dt: f64, psi: &StateVector) -> Result<StateVector> {
    let l = psi.n_qubits();
    let mut amps = psi.amplitudes().clone();
    for term in terms {
        linalg::validate_sites(term.sites(), l)?;
        let gate = linalg::expm_hermitian(term.matrix(), coeff_dt)?;
        apply_local(amps.as_mut_slice(), &gate, term.sites(), l);
    }
    Ok(StateVector::from_raw(l, amps))
}

/// One product-formula step at fixed `dt`, compiled to local gates.
#[derive(Debug, Clone)]
pub struct TrotterCircuit {
    n_sites: usize,
    forward: Vec<Gate>,
    backward: Vec<Gate>,
}

impl TrotterCircuit {
    pub fn new(ham: &SplitHamiltonian, schedule: &ProductFormulaSchedule, dt: f64) -> Result<Self> {
        if !dt.is_finite() {
            return Err(Error::InvalidParameter(format!("time step must be finite, got {dt}")));
        }
        let diag = |group: Group| -> Result<Vec<DiagonalizedTerm>> {
            ham.terms(group).iter().map(DiagonalizedTerm::new).collect()
        };
        let odd = diag(Group::Odd)?;
        let even = diag(Group::Even)?;
        let mut forward = Vec::new();
        for layer in schedule.layers() {
            let terms = match layer.group {
                Group::Odd => &odd,
                Group::Even => &even,
            };
            for term in terms {
                forward.push(Gate {
                    sites: term.sites.clone(),
                    matrix: term.spec.propagator(layer.coeff * dt),
                });
            }
        }
        let backward = forward
            .iter()
            .rev()
            .map(|g| Gate {
                sites: g.sites.clone(),
                matrix: g.matrix.adjoint(),
            })
            .collect();
        Ok(Self {
            n_sites: ham.n_sites(),
            forward,
            backward,
        })
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn gate_count(&self) -> usize {
        self.forward.len()
    }

    /// One step, in place.
    pub fn step(&self, amps: &mut DVector<C64>) {
        for g in &self.forward {
            apply_local(amps.as_mut_slice(), &g.matrix, &g.sites, self.n_sites);
        }
    }

    /// One step of the inverse (adjoint) circuit, in place.
    pub fn step_adjoint(&self, amps: &mut DVector<C64>) {
        for g in &self.backward {
            apply_local(amps.as_mut_slice(), &g.matrix, &g.sites, self.n_sites);
        }
    }

    /// States after `0..=n_steps` steps.
    pub fn evolve(&self, psi0: &StateVector, n_steps: usize) -> Result<Vec<StateVector>> {
        psi0.check_dim(1usize << self.n_sites)?;
        let mut out = Vec::with_capacity(n_steps + 1);
        let mut amps = psi0.amplitudes().clone();
        out.push(psi0.clone());
        for _ in 0..n_steps {
            self.step(&mut amps);
            out.push(StateVector::from_raw(self.n_sites, amps.clone()));
        }
        Ok(out)
    }

    /// Dense matrix of one step, assembled column by column from the gates.
    pub fn step_matrix(&self) -> DenseOperator {
        let dim = 1usize << self.n_sites;
        let mut m = identity(dim);
        for mut col in m.column_iter_mut() {
            let mut v = col.clone_owned();
            self.step(&mut v);
            col.copy_from(&v);
        }
        m
    }
}

/// States after each of `0..=n_steps` applications of the schedule.
pub fn trotter_evolve(
    ham: &SplitHamiltonian,
    schedule: &ProductFormulaSchedule,
    dt: f64,
    n_steps: usize,
    psi0: &StateVector,
) -> Result<Vec<StateVector>> {
    if !(dt > 0.0) {
        return Err(Error::InvalidParameter(format!("time step must be positive, got {dt}")));
    }
    TrotterCircuit::new(ham, schedule, dt)?.evolve(psi0, n_steps)
}

/// One product-formula step built from dense group exponentials
/// `exp(-i·c·dt·H_group)`, independent of the local-gate path.
pub fn dense_step(ham: &SplitHamiltonian, schedule: &ProductFormulaSchedule, dt: f64) -> Result<DenseOperator> {
    let odd = eigendecompose_hermitian(&ham.odd_dense())?;
    let even = eigendecompose_hermitian(&ham.even_dense())?;
    let mut u = identity(ham.dim());
    for layer in schedule.layers() {
        let spec = match layer.group {
            Group::Odd => &odd,
            Group::Even => &even,
        };
        u = spec.propagator(layer.coeff * dt) * u;
    }
    Ok(u)
}

/// Leading Hermitian correction `K_q` in `H_eff = H + dt^q K_q`.
#[derive(Debug, Clone)]
pub struct ErrorKernel {
    order: usize,
    matrix: DenseOperator,
}

impl ErrorKernel {
    pub fn new(order: usize, matrix: DenseOperator) -> Result<Self> {
        let defect = hermiticity_defect(&matrix);
        if defect > 1e-12 * max_abs(&matrix).max(1.0) {
            return Err(Error::NotHermitian(defect));
        }
        Ok(Self { order, matrix })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn matrix(&self) -> &DenseOperator {
        &self.matrix
    }
}

/// `K1 = -(i/2)[H_o, H_e]`.
pub fn first_order_kernel(h_odd: &DenseOperator, h_even: &DenseOperator) -> DenseOperator {
    commutator(h_odd, h_even) * (-0.5 * I)
}

/// `K2 = ([H_o,[H_o,H_e]] + 2[H_e,[H_o,H_e]]) / 24`.
pub fn second_order_kernel(h_odd: &DenseOperator, h_even: &DenseOperator) -> DenseOperator {
    let c = commutator(h_odd, h_even);
    (commutator(h_odd, &c) + commutator(h_even, &c).scale(2.0)).scale(1.0 / 24.0)
}

fn hermitian_part(a: DenseOperator) -> DenseOperator {
    (&a + a.adjoint()).scale(0.5)
}

/// Step size for numerical generator extraction: keeps `dt·‖H‖` small enough
/// for the principal logarithm and the series to be well behaved.
fn extraction_step(h: &DenseOperator) -> f64 {
    0.4 / spectral_norm(h).max(1.0)
}

/// Coefficient `W` of `dt^power` in `H_eff(dt) = i·log(S(dt))/dt`, given the
/// known lower-order part, by Richardson extrapolation over `h, h/2, h/4`.
/// Assumes the remaining series is even in `dt` beyond `power`.
fn extract_generator_coefficient(
    ham: &SplitHamiltonian,
    schedule: &ProductFormulaSchedule,
    known: impl Fn(f64) -> DenseOperator,
    power: i32,
) -> Result<DenseOperator> {
    let h = ham.dense();
    let h0 = extraction_step(&h);
    let residual = |step: f64| -> Result<DenseOperator> {
        let u = dense_step(ham, schedule, step)?;
        let h_eff = unitary_log_generator(&u, step)?;
        Ok((h_eff - &h - known(step)).scale(step.powi(-power)))
    };
    let r0 = residual(h0)?;
    let r1 = residual(h0 / 2.0)?;
    let r2 = residual(h0 / 4.0)?;
    let a0 = (r1.scale(4.0) - &r0).scale(1.0 / 3.0);
    let a1 = (r2.scale(4.0) - &r1).scale(1.0 / 3.0);
    Ok(hermitian_part((a1.scale(16.0) - a0).scale(1.0 / 15.0)))
}

/// Fifth-order coefficient `W5` of `log S2(dt) = -i(H dt + W3 dt³ + W5 dt⁵ + ...)`.
pub fn second_order_w5(ham: &SplitHamiltonian) -> Result<DenseOperator> {
    let w3 = second_order_kernel(&ham.odd_dense(), &ham.even_dense());
    extract_generator_coefficient(ham, &suzuki_schedule(1), |dt| w3.scale(dt * dt), 4)
}

/// `K4 = (4p⁵+s⁵)·W5 − p·s·(2p+s)(p²−s²)/3 · [H,[H,W3]]` with `W3 = K2`.
pub fn fourth_order_kernel(ham: &SplitHamiltonian) -> Result<DenseOperator> {
    let (ho, he) = (ham.odd_dense(), ham.even_dense());
    let h = &ho + &he;
    let w3 = second_order_kernel(&ho, &he);
    let w5 = second_order_w5(ham)?;
    let (p, s) = suzuki_coefficients(1);
    let direct = 4.0 * p.powi(5) + s.powi(5);
    let cross = p * s * (2.0 * p + s) * (p * p - s * s) / 3.0;
    let nested = commutator(&h, &commutator(&h, &w3));
    Ok(hermitian_part(w5.scale(direct) - nested.scale(cross)))
}

/// Leading `dt^q` coefficient of `H_eff` read directly off the order-`q`
/// product formula, without any commutator algebra.
pub fn numerical_kernel(ham: &SplitHamiltonian, order: usize) -> Result<DenseOperator> {
    let schedule = ProductFormulaSchedule::for_order(order)?;
    if order == 1 {
        // odd series: extrapolate (H_eff - H)/dt over h, h/2, h/4 assuming a full power series
        let h = ham.dense();
        let h0 = extraction_step(&h);
        let residual = |step: f64| -> Result<DenseOperator> {
            let u = dense_step(ham, &schedule, step)?;
            Ok((unitary_log_generator(&u, step)? - &h).scale(1.0 / step))
        };
        let (r0, r1, r2) = (residual(h0)?, residual(h0 / 2.0)?, residual(h0 / 4.0)?);
        let a0 = r1.scale(2.0) - &r0;
        let a1 = r2.scale(2.0) - &r1;
        return Ok(hermitian_part((a1.scale(4.0) - a0).scale(1.0 / 3.0)));
    }
    extract_generator_coefficient(ham, &schedule, |_| DenseOperator::zeros(ham.dim(), ham.dim()), order as i32)
}

/// Error kernel for `q ∈ {1, 2, 4}`.
pub fn error_kernel(ham: &SplitHamiltonian, order: usize) -> Result<ErrorKernel> {
    let matrix = match order {
        1 => first_order_kernel(&ham.odd_dense(), &ham.even_dense()),
        2 => second_order_kernel(&ham.odd_dense(), &ham.even_dense()),
        4 => fourth_order_kernel(ham)?,
        _ => {
            return Err(Error::InvalidParameter(format!(
                "explicit error kernels exist for orders 1, 2 and 4, got {order}"
            )))
        }
    };
    ErrorKernel::new(order, matrix)
}

/// Number of steps of size `dt` that reach `t`, if `t` is a multiple of `dt`.
pub fn steps_for_time(t: f64, dt: f64) -> Result<usize> {
    if !(t >= 0.0) || !(dt > 0.0) {
        return Err(Error::NonCommensurateTime { time: t, dt });
    }
    let n = (t / dt).round();
    if (n * dt - t).abs() > 1e-9 * t.max(1.0) {
        return Err(Error::NonCommensurateTime { time: t, dt });
    }
    Ok(n as usize)
}

/// `‖e^{-iHt}ψ0 − S(dt)^{t/dt}ψ0‖` at each requested time.
pub fn measured_trotter_error(
    ham: &SplitHamiltonian,
    schedule: &ProductFormulaSchedule,
    dt: f64,
    psi0: &StateVector,
    times: &[f64],
) -> Result<Vec<f64>> {
    let spec = eigendecompose_hermitian(&ham.dense())?;
    let circuit = TrotterCircuit::new(ham, schedule, dt)?;
    measured_trotter_error_with(&spec, &circuit, dt, psi0, times)
}

/// As [`measured_trotter_error`], reusing a spectrum and compiled circuit.
pub fn measured_trotter_error_with(
    spec: &SpectralDecomposition,
    circuit: &TrotterCircuit,
    dt: f64,
    psi0: &StateVector,
    times: &[f64],
) -> Result<Vec<f64>> {
    psi0.check_dim(spec.dim())?;
    let steps: Vec<usize> = times.iter().map(|&t| steps_for_time(t, dt)).collect::<Result<_>>()?;
    let max_steps = steps.iter().copied().max().unwrap_or(0);
    let mut at_step: Vec<Option<DVector<C64>>> = vec![None; max_steps + 1];
    for &n in &steps {
        at_step[n] = Some(DVector::zeros(0));
    }
    let mut amps = psi0.amplitudes().clone();
    for n in 0..=max_steps {
        if n > 0 {
            circuit.step(&mut amps);
        }
        if let Some(slot) = at_step[n].as_mut() {
            *slot = amps.clone();
        }
    }
    steps
        .iter()
        .zip(times)
        .map(|(&n, &t)| {
            let exact = exact_evolve(spec, psi0, t)?;
            let trotter = at_step[n].as_ref().expect("recorded step");
            Ok((exact.amplitudes() - trotter).norm())
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{expm_hermitian, kron, pauli_x, pauli_y, pauli_z, StateVector};
    use crate::models::{build_heisenberg, build_pxp, build_stark, ModelSpec};
    use rand::{Rng, SeedableRng};

    fn random_state(l: usize, seed: u64) -> StateVector {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let v = DVector::from_fn(1 << l, |_, _| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
        StateVector::normalized(v).unwrap()
    }

    fn single_qubit_split(odd: DenseOperator, even: DenseOperator) -> SplitHamiltonian {
        let id = identity(2);
        SplitHamiltonian::new(
            2,
            vec![LocalTerm::new(vec![1, 2], kron(&odd, &id)).unwrap()],
            vec![LocalTerm::new(vec![1, 2], kron(&even, &id)).unwrap()],
            ModelSpec::Pxp {},
        )
        .unwrap()
    }

    #[test]
    fn second_order_layers() {
        let s = suzuki_schedule(1);
        assert_eq!(s.order(), 2);
        assert_eq!(
            s.layers(),
            &[
                Layer { group: Group::Odd, coeff: 0.5 },
                Layer { group: Group::Even, coeff: 1.0 },
                Layer { group: Group::Odd, coeff: 0.5 },
            ]
        );
    }

    #[test]
    fn fourth_order_coefficients_and_layers() {
        let (p, s) = suzuki_coefficients(1);
        assert!((p - 0.4145).abs() < 5e-5);
        assert!((s + 0.6580).abs() < 5e-5);
        let sched = suzuki_schedule(2);
        assert_eq!(sched.order(), 4);
        assert_eq!(sched.layers().len(), 11);
    }

    #[test]
    fn suzuki_cancellation_conditions() {
        for k in 1..=6 {
            let (p, s) = suzuki_coefficients(k);
            assert!((4.0 * p + s - 1.0).abs() < 1e-12);
            let e = (2 * k + 1) as i32;
            assert!((4.0 * p.powi(e) + s.powi(e)).abs() < 1e-12);
        }
    }

    #[test]
    fn schedule_invariants() {
        for k in 0..=4 {
            let sched = suzuki_schedule(k);
            assert!((sched.coefficient_sum(Group::Odd) - 1.0).abs() < 1e-13);
            assert!((sched.coefficient_sum(Group::Even) - 1.0).abs() < 1e-13);
            for w in sched.layers().windows(2) {
                assert_ne!(w[0].group, w[1].group);
            }
            if sched.order() >= 2 {
                let n = sched.layers().len();
                for i in 0..n {
                    let (a, b) = (sched.layers()[i], sched.layers()[n - 1 - i]);
                    assert_eq!(a.group, b.group);
                    assert!((a.coeff - b.coeff).abs() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn order_lookup() {
        assert_eq!(ProductFormulaSchedule::for_order(1).unwrap().order(), 1);
        assert_eq!(ProductFormulaSchedule::for_order(6).unwrap().order(), 6);
        assert!(ProductFormulaSchedule::for_order(3).is_err());
    }

    #[test]
    fn group_exponential_zero_time_is_identity() {
        let ham = build_heisenberg(4, 0.5).unwrap();
        let psi = random_state(4, 1);
        let out = apply_group_exponential(ham.odd_terms(), 0.0, &psi).unwrap();
        assert!(out.distance(&psi).unwrap() < 1e-14);
    }

    #[test]
    fn group_exponential_single_term_matches_dense() {
        let ham = build_heisenberg(2, 0.3).unwrap();
        let psi = random_state(2, 2);
        let out = apply_group_exponential(ham.odd_terms(), 0.17, &psi).unwrap();
        let dense = expm_hermitian(&ham.odd_terms()[0].embed(2).unwrap(), 0.17).unwrap() * psi.amplitudes();
        assert!((out.amplitudes() - dense).norm() < 1e-13);
    }

    #[test]
    fn group_exponential_full_group_matches_dense() {
        let ham = build_heisenberg(6, 0.5).unwrap();
        let psi = random_state(6, 3);
        let out = apply_group_exponential(ham.odd_terms(), 0.1, &psi).unwrap();
        let dense = expm_hermitian(&ham.odd_dense(), 0.1).unwrap() * psi.amplitudes();
        assert!((out.amplitudes() - dense).norm() < 1e-12);
        assert!((out.norm() - 1.0).abs() < 1e-13);
    }

    #[test]
    fn group_exponential_is_order_independent() {
        let ham = build_pxp(7).unwrap();
        let psi = random_state(7, 4);
        let mut reversed = ham.odd_terms().to_vec();
        reversed.reverse();
        let a = apply_group_exponential(ham.odd_terms(), 0.3, &psi).unwrap();
        let b = apply_group_exponential(&reversed, 0.3, &psi).unwrap();
        assert!(a.distance(&b).unwrap() < 1e-12);
    }

    #[test]
    fn zero_steps_returns_initial_state() {
        let ham = build_heisenberg(3, 0.5).unwrap();
        let psi = random_state(3, 5);
        let states = trotter_evolve(&ham, &suzuki_schedule(1), 0.1, 0, &psi).unwrap();
        assert_eq!(states.len(), 1);
        assert_eq!(states[0], psi);
    }

    #[test]
    fn single_group_evolution_is_exact() {
        // one bond, L = 2: the even group is empty
        let ham = build_heisenberg(2, 0.7).unwrap();
        assert!(ham.even_terms().is_empty());
        let psi = random_state(2, 6);
        let spec = eigendecompose_hermitian(&ham.dense()).unwrap();
        for k in [0, 1, 2] {
            let states = trotter_evolve(&ham, &suzuki_schedule(k), 0.05, 40, &psi).unwrap();
            let exact = exact_evolve(&spec, &psi, 2.0).unwrap();
            assert!(states[40].distance(&exact).unwrap() < 1e-12);
        }
    }

    #[test]
    fn many_steps_match_dense_step_power() {
        let ham = build_heisenberg(4, 0.5).unwrap();
        let psi = random_state(4, 7);
        let sched = suzuki_schedule(1);
        let states = trotter_evolve(&ham, &sched, 0.01, 100, &psi).unwrap();
        let step = dense_step(&ham, &sched, 0.01).unwrap();
        let mut v = psi.amplitudes().clone();
        for _ in 0..100 {
            v = &step * v;
        }
        assert!((states[100].amplitudes() - v).norm() < 1e-10);
    }

    #[test]
    fn circuit_step_matches_dense_step_all_models_and_orders() {
        let models = [
            build_heisenberg(4, 0.5).unwrap(),
            build_stark(4, 1.0, 0.8, 0.9, 4.0).unwrap(),
            build_pxp(4).unwrap(),
        ];
        for ham in &models {
            for k in 0..=3 {
                let sched = suzuki_schedule(k);
                let circuit = TrotterCircuit::new(ham, &sched, 0.05).unwrap();
                let diff = circuit.step_matrix() - dense_step(ham, &sched, 0.05).unwrap();
                assert!(max_abs(&diff) < 1e-12, "{:?} order {}", ham.model(), sched.order());
            }
        }
    }

    #[test]
    fn adjoint_step_inverts_step() {
        let ham = build_stark(5, 1.0, 0.8, 0.9, 4.0).unwrap();
        let circuit = TrotterCircuit::new(&ham, &suzuki_schedule(2), 0.03).unwrap();
        let psi = random_state(5, 8);
        let mut v = psi.amplitudes().clone();
        circuit.step(&mut v);
        circuit.step_adjoint(&mut v);
        assert!((v - psi.amplitudes()).norm() < 1e-13);
    }

    #[test]
    fn second_order_time_reversal() {
        let ham = build_heisenberg(4, 0.5).unwrap();
        let sched = suzuki_schedule(1);
        let fwd = dense_step(&ham, &sched, 0.1).unwrap();
        let bwd = dense_step(&ham, &sched, -0.1).unwrap();
        assert!(max_abs(&(bwd * fwd - identity(16))) < 1e-12);
    }

    #[test]
    fn pauli_kernels() {
        let ham = single_qubit_split(pauli_z(), pauli_x());
        let id = identity(2);
        let k1 = error_kernel(&ham, 1).unwrap();
        assert!(max_abs(&(k1.matrix() - kron(&pauli_y(), &id))) < 1e-15);
        // symbolic: [Z,[Z,X]] = 4X, [X,[Z,X]] = -4Z
        let k2 = error_kernel(&ham, 2).unwrap();
        let want = kron(&(pauli_x() - pauli_z().scale(2.0)).scale(1.0 / 6.0), &id);
        assert!(max_abs(&(k2.matrix() - want)) < 1e-15);
    }

    #[test]
    fn kernels_are_hermitian() {
        for ham in [
            build_heisenberg(4, 0.5).unwrap(),
            build_stark(4, 1.0, 0.8, 0.9, 4.0).unwrap(),
            build_pxp(4).unwrap(),
        ] {
            for q in [1, 2, 4] {
                let k = error_kernel(&ham, q).unwrap();
                assert!(hermiticity_defect(k.matrix()) < 1e-12);
            }
        }
        assert!(error_kernel(&build_pxp(3).unwrap(), 3).is_err());
    }

    #[test]
    fn first_and_second_order_kernels_match_numerical_extraction() {
        let ham = build_heisenberg(4, 0.5).unwrap();
        for q in [1, 2] {
            let analytic = error_kernel(&ham, q).unwrap();
            let numeric = numerical_kernel(&ham, q).unwrap();
            let rel = max_abs(&(numeric - analytic.matrix())) / max_abs(analytic.matrix());
            assert!(rel < 1e-4, "q = {q}: relative deviation {rel:e}");
        }
    }

    #[test]
    fn fourth_order_kernel_matches_direct_extraction() {
        for ham in [build_heisenberg(4, 0.5).unwrap(), build_pxp(5).unwrap()] {
            let k4 = error_kernel(&ham, 4).unwrap();
            let direct = numerical_kernel(&ham, 4).unwrap();
            let rel = max_abs(&(direct - k4.matrix())) / max_abs(k4.matrix());
            assert!(rel < 1e-4, "{:?}: relative deviation {rel:e}", ham.model());
        }
    }

    #[test]
    fn second_order_generator_residual_scales_as_dt_fourth() {
        let ham = build_heisenberg(4, 0.0).unwrap();
        let h = ham.dense();
        let k2 = error_kernel(&ham, 2).unwrap();
        let sched = suzuki_schedule(1);
        let residual = |dt: f64| {
            let g = unitary_log_generator(&dense_step(&ham, &sched, dt).unwrap(), dt).unwrap();
            spectral_norm(&(g - &h - k2.matrix().scale(dt * dt)))
        };
        let ratio = residual(0.05) / residual(0.025);
        assert!((ratio - 16.0).abs() < 0.2 * 16.0, "ratio {ratio}");
    }

    #[test]
    fn measured_error_basics() {
        let ham = build_heisenberg(4, 0.5).unwrap();
        let psi = random_state(4, 9);
        let sched = suzuki_schedule(1);
        let errs = measured_trotter_error(&ham, &sched, 0.01, &psi, &[0.0, 0.5, 1.0]).unwrap();
        assert!(errs[0] < 1e-14);
        assert!(errs.iter().all(|&e| (0.0..=2.0).contains(&e)));
        assert!(matches!(
            measured_trotter_error(&ham, &sched, 0.01, &psi, &[0.015]),
            Err(Error::NonCommensurateTime { .. })
        ));
        let single = build_heisenberg(2, 0.4).unwrap();
        let psi2 = random_state(2, 10);
        let errs = measured_trotter_error(&single, &sched, 0.01, &psi2, &[0.3, 1.0]).unwrap();
        assert!(errs.iter().all(|&e| e < 1e-10));
    }

    #[test]
    fn measured_error_scales_quadratically_for_second_order() {
        let ham = build_heisenberg(6, 0.5).unwrap();
        let psi = random_state(6, 11);
        let sched = suzuki_schedule(1);
        let dts = [0.04, 0.02, 0.01];
        let errs: Vec<f64> = dts
            .iter()
            .map(|&dt| measured_trotter_error(&ham, &sched, dt, &psi, &[1.0]).unwrap()[0])
            .collect();
        for i in 0..2 {
            let slope = (errs[i] / errs[i + 1]).ln() / (dts[i] / dts[i + 1]).ln();
            assert!((slope - 2.0).abs() < 0.1, "slope {slope}");
        }
    }
}
