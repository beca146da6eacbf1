//! Product-state ansatz, composite loss and its adjoint gradient, and the
//! Adam optimizer with cosine-annealed learning rate.
//!
//! Each site is prepared as `R_y(φ_j) R_x(θ_j)|0⟩` with
//! `R_a(α) = exp(−iασ^a/2)`. The loss is
//! `l1·‖δψ(T_l)‖ + (l2/T_l)·∫₀^{T_l} F_T(t) dt`, the integral taken with the
//! trapezoidal rule on the Trotter grid.

use std::f64::consts::PI;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::formulas::{steps_for_time, ProductFormulaSchedule, TrotterCircuit};
use crate::linalg::{
    eigendecompose_hermitian, eigendecompose_unitary, SpectralDecomposition, StateVector, UnitaryDecomposition, C64, ONE,
    ZERO,
};
use crate::models::SplitHamiltonian;

/// Rotation angles `θ_j` (about x) and `φ_j` (about y), one pair per site.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariationalParameters {
    pub theta: Vec<f64>,
    pub phi: Vec<f64>,
}

impl VariationalParameters {
    pub fn new(theta: Vec<f64>, phi: Vec<f64>) -> Result<Self> {
        if theta.len() != phi.len() {
            return Err(Error::DimensionMismatch {
                expected: theta.len(),
                found: phi.len(),
            });
        }
        if theta.iter().chain(phi.iter()).any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("variational parameter".into()));
        }
        Ok(Self { theta, phi })
    }

    pub fn zeros(n_sites: usize) -> Self {
        Self {
            theta: vec![0.0; n_sites],
            phi: vec![0.0; n_sites],
        }
    }

    /// Every spin along +x.
    pub fn x_polarized(n_sites: usize) -> Self {
        Self {
            theta: vec![0.0; n_sites],
            phi: vec![PI / 2.0; n_sites],
        }
    }

    /// Uniform draw from `(−π, π]` for every angle.
    pub fn random(n_sites: usize, rng: &mut impl Rng) -> Self {
        let mut draw = || PI - rng.gen::<f64>() * 2.0 * PI;
        let theta = (0..n_sites).map(|_| draw()).collect();
        let phi = (0..n_sites).map(|_| draw()).collect();
        Self { theta, phi }
    }

    pub fn n_sites(&self) -> usize {
        self.theta.len()
    }

    /// `[θ_1..θ_L, φ_1..φ_L]`.
    pub fn to_flat(&self) -> Vec<f64> {
        self.theta.iter().chain(self.phi.iter()).copied().collect()
    }

    pub fn from_flat(flat: &[f64]) -> Result<Self> {
        if flat.len() % 2 != 0 {
            return Err(Error::InvalidParameter(format!(
                "flat parameter vector must have even length, got {}",
                flat.len()
            )));
        }
        let l = flat.len() / 2;
        Self::new(flat[..l].to_vec(), flat[l..].to_vec())
    }

    /// Angles reduced to `(−π, π]`.
    pub fn canonical(&self) -> Self {
        Self {
            theta: self.theta.iter().map(|&x| wrap_angle(x)).collect(),
            phi: self.phi.iter().map(|&x| wrap_angle(x)).collect(),
        }
    }
}

pub fn wrap_angle(x: f64) -> f64 {
    let y = x.rem_euclid(2.0 * PI);
    if y > PI {
        y - 2.0 * PI
    } else {
        y
    }
}

/// Single-site amplitudes `R_y(φ) R_x(θ)|0⟩` and their θ and φ derivatives.
fn site_amplitudes(theta: f64, phi: f64) -> ([C64; 2], [C64; 2], [C64; 2]) {
    let (st, ct) = (0.5 * theta).sin_cos();
    let (sp, cp) = (0.5 * phi).sin_cos();
    let a = [C64::new(ct, 0.0), C64::new(0.0, -st)];
    let da = [C64::new(-0.5 * st, 0.0), C64::new(0.0, -0.5 * ct)];
    let ry = |v: [C64; 2]| [v[0] * cp - v[1] * sp, v[0] * sp + v[1] * cp];
    let dry = |v: [C64; 2]| [(-v[0] * sp - v[1] * cp) * 0.5, (v[0] * cp - v[1] * sp) * 0.5];
    (ry(a), ry(da), dry(a))
}

/// Tensor product with site 1 as the most significant factor.
fn product_vector(sites: &[[C64; 2]]) -> DVector<C64> {
    let mut v = DVector::from_element(1, ONE);
    for s in sites {
        let mut next = DVector::from_element(v.len() * 2, ZERO);
        for (i, &amp) in v.iter().enumerate() {
            next[2 * i] = amp * s[0];
            next[2 * i + 1] = amp * s[1];
        }
        v = next;
    }
    v
}

pub fn prepare_product_state(params: &VariationalParameters) -> Result<StateVector> {
    if params.theta.len() != params.phi.len() {
        return Err(Error::DimensionMismatch {
            expected: params.theta.len(),
            found: params.phi.len(),
        });
    }
    let sites: Vec<[C64; 2]> = params
        .theta
        .iter()
        .zip(&params.phi)
        .map(|(&t, &p)| site_amplitudes(t, p).0)
        .collect();
    StateVector::new(params.n_sites(), product_vector(&sites))
}

/// `∂ψ/∂θ_j` for `j < L`, then `∂ψ/∂φ_j`.
fn product_state_jacobian(params: &VariationalParameters) -> Vec<DVector<C64>> {
    let per_site: Vec<_> = params
        .theta
        .iter()
        .zip(&params.phi)
        .map(|(&t, &p)| site_amplitudes(t, p))
        .collect();
    let base: Vec<[C64; 2]> = per_site.iter().map(|s| s.0).collect();
    let mut out = Vec::with_capacity(2 * base.len());
    for which in 0..2 {
        for j in 0..base.len() {
            let mut sites = base.clone();
            sites[j] = if which == 0 { per_site[j].1 } else { per_site[j].2 };
            out.push(product_vector(&sites));
        }
    }
    out
}

/// Product state with every site's Bloch vector uniform on the sphere.
pub fn haar_random_product_state(n_sites: usize, seed: u64) -> StateVector {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sites: Vec<[C64; 2]> = (0..n_sites)
        .map(|_| {
            let cos_polar: f64 = rng.gen_range(-1.0..=1.0);
            let azimuth: f64 = rng.gen_range(0.0..2.0 * PI);
            let half = 0.5 * cos_polar.clamp(-1.0, 1.0).acos();
            [C64::new(half.cos(), 0.0), C64::from_polar(half.sin(), azimuth)]
        })
        .collect();
    StateVector::from_raw(n_sites, product_vector(&sites))
}

/// `count` Haar-random product states; member `i` uses stream `i` of `seed`.
pub fn haar_ensemble(n_sites: usize, count: usize, seed: u64) -> Vec<StateVector> {
    (0..count)
        .map(|i| haar_random_product_state(n_sites, seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(i as u64)))
        .collect()
}

/// Computational basis state `|1010…⟩` (site 1 down).
pub fn neel_state(n_sites: usize) -> StateVector {
    let bits: Vec<u8> = (0..n_sites).map(|j| if j % 2 == 0 { 1 } else { 0 }).collect();
    StateVector::from_bits(&bits).expect("bits are 0 or 1")
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LossConfig {
    #[serde(default = "defaults::l1")]
    pub l1: f64,
    #[serde(default = "defaults::l2")]
    pub l2: f64,
    #[serde(default = "defaults::t_l")]
    pub t_l: f64,
    #[serde(default = "defaults::dt")]
    pub dt: f64,
    #[serde(default = "defaults::schedule_order")]
    pub schedule_order: usize,
}

mod defaults {
    pub fn l1() -> f64 {
        1.0
    }
    pub fn l2() -> f64 {
        1e-5
    }
    pub fn t_l() -> f64 {
        10.0
    }
    pub fn dt() -> f64 {
        0.01
    }
    pub fn schedule_order() -> usize {
        2
    }
}

impl Default for LossConfig {
    fn default() -> Self {
        Self {
            l1: defaults::l1(),
            l2: defaults::l2(),
            t_l: defaults::t_l(),
            dt: defaults::dt(),
            schedule_order: defaults::schedule_order(),
        }
    }
}

impl LossConfig {
    /// Number of Trotter steps spanning the horizon.
    pub fn validate(&self) -> Result<usize> {
        if !(self.l1 >= 0.0 && self.l2 >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "loss weights must be non-negative, got l1 = {}, l2 = {}",
                self.l1, self.l2
            )));
        }
        if !(self.dt > 0.0) || !(self.t_l > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "horizon and step must be positive, got T_l = {}, dt = {}",
                self.t_l, self.dt
            )));
        }
        ProductFormulaSchedule::for_order(self.schedule_order)?;
        steps_for_time(self.t_l, self.dt)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossValue {
    pub total: f64,
    /// `l1·‖δψ(T_l)‖`.
    pub error_term: f64,
    /// `(l2/T_l)·∫F_T`.
    pub echo_term: f64,
}

/// Loss and gradient for one Hamiltonian and configuration.
///
/// The single-step product-formula unitary `W` is assembled from the gate
/// circuit once and diagonalized, so every `W^k ψ` below costs `O(dim)`.
#[derive(Debug, Clone)]
pub struct LossEvaluator {
    n_sites: usize,
    cfg: LossConfig,
    n_steps: usize,
    spec: SpectralDecomposition,
    circuit: TrotterCircuit,
    step: UnitaryDecomposition,
}

/// Echo amplitudes `a_k = ⟨ψ0|W^k ψ0⟩` and the eigenbasis sums needed by the
/// adjoint pass.
struct Sweep {
    /// `Q†ψ0`.
    coeffs: DVector<C64>,
    overlaps: Vec<C64>,
    /// `Σ_k w_k conj(a_k) d^k` and `Σ_k w_k a_k conj(d)^k`, elementwise.
    forward_sum: DVector<C64>,
    backward_sum: DVector<C64>,
    /// `d^N`.
    final_power: DVector<C64>,
}

impl LossEvaluator {
    pub fn new(ham: &SplitHamiltonian, cfg: &LossConfig) -> Result<Self> {
        let spec = eigendecompose_hermitian(&ham.dense())?;
        Self::with_spectrum(ham, cfg, spec)
    }

    pub fn with_spectrum(ham: &SplitHamiltonian, cfg: &LossConfig, spec: SpectralDecomposition) -> Result<Self> {
        let n_steps = cfg.validate()?;
        let schedule = ProductFormulaSchedule::for_order(cfg.schedule_order)?;
        let circuit = TrotterCircuit::new(ham, &schedule, cfg.dt)?;
        let step = eigendecompose_unitary(&circuit.step_matrix())?;
        Ok(Self {
            n_sites: ham.n_sites(),
            cfg: *cfg,
            n_steps,
            spec,
            circuit,
            step,
        })
    }

    pub fn config(&self) -> &LossConfig {
        &self.cfg
    }

    pub fn spectrum(&self) -> &SpectralDecomposition {
        &self.spec
    }

    pub fn circuit(&self) -> &TrotterCircuit {
        &self.circuit
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    /// Trapezoidal weights including the `l2/T_l` prefactor.
    fn echo_weight(&self, k: usize) -> f64 {
        let w = if k == 0 || k == self.n_steps { 0.5 } else { 1.0 };
        w * self.cfg.dt * self.cfg.l2 / self.cfg.t_l
    }

    fn check(&self, params: &VariationalParameters) -> Result<()> {
        if params.n_sites() != self.n_sites || params.phi.len() != self.n_sites {
            return Err(Error::DimensionMismatch {
                expected: self.n_sites,
                found: params.n_sites(),
            });
        }
        Ok(())
    }

    fn sweep(&self, psi0: &DVector<C64>, with_sums: bool) -> Sweep {
        let coeffs = self.step.basis().ad_mul(psi0);
        let probs: Vec<f64> = coeffs.iter().map(|c| c.norm_sqr()).collect();
        let eig = self.step.eigenvalues();
        let dim = coeffs.len();
        let mut power = DVector::from_element(dim, ONE);
        let mut overlaps = Vec::with_capacity(self.n_steps + 1);
        let mut forward_sum = DVector::from_element(if with_sums { dim } else { 0 }, ZERO);
        let mut backward_sum = forward_sum.clone();
        for k in 0..=self.n_steps {
            if k > 0 {
                for (z, d) in power.iter_mut().zip(&eig) {
                    *z *= d;
                }
            }
            let a: C64 = probs.iter().zip(power.iter()).map(|(p, z)| z * p).sum();
            if with_sums {
                let w = self.echo_weight(k);
                let (wf, wb) = (a.conj() * w, a * w);
                for n in 0..dim {
                    forward_sum[n] += wf * power[n];
                    backward_sum[n] += wb * power[n].conj();
                }
            }
            overlaps.push(a);
        }
        Sweep {
            coeffs,
            overlaps,
            forward_sum,
            backward_sum,
            final_power: power,
        }
    }

    fn echo_of(&self, overlaps: &[C64]) -> f64 {
        overlaps
            .iter()
            .enumerate()
            .map(|(k, a)| self.echo_weight(k) * a.norm_sqr())
            .sum()
    }

    pub fn loss(&self, params: &VariationalParameters) -> Result<LossValue> {
        self.check(params)?;
        self.loss_of_state(&prepare_product_state(params)?)
    }

    /// Loss for an arbitrary initial state.
    pub fn loss_of_state(&self, psi0: &StateVector) -> Result<LossValue> {
        psi0.check_dim(self.spec.dim())?;
        let sw = self.sweep(psi0.amplitudes(), false);
        let trotter = self.step.basis() * sw.coeffs.component_mul(&sw.final_power);
        let exact = self.spec.evolve_vector(psi0.amplitudes(), self.cfg.t_l);
        let error = self.cfg.l1 * (exact - trotter).norm();
        let echo = self.echo_of(&sw.overlaps);
        finite(LossValue {
            total: error + echo,
            error_term: error,
            echo_term: echo,
        })
    }

    /// Loss and its gradient `[∂/∂θ_1..∂/∂θ_L, ∂/∂φ_1..∂/∂φ_L]` from the
    /// adjoint costate contracted with the product-state Jacobian.
    pub fn loss_and_gradient(&self, params: &VariationalParameters) -> Result<(LossValue, Vec<f64>)> {
        self.check(params)?;
        let psi0 = prepare_product_state(params)?;
        let jac = product_state_jacobian(params);
        let v0 = psi0.amplitudes();
        let sw = self.sweep(v0, true);
        let q = self.step.basis();

        let trotter = q * sw.coeffs.component_mul(&sw.final_power);
        let exact = self.spec.evolve_vector(v0, self.cfg.t_l);
        let delta = exact - trotter;
        let delta_norm = delta.norm();
        let error = self.cfg.l1 * delta_norm;
        let echo = self.echo_of(&sw.overlaps);

        // echo: 2·Σ_k w_k (conj(a_k) W^k ψ0 + a_k W^{-k} ψ0)
        let mut eig_costate = (&sw.forward_sum + &sw.backward_sum).component_mul(&sw.coeffs);
        eig_costate.scale_mut(2.0);
        let mut costate = q * eig_costate;
        // error: (l1/‖δ‖)·(U† − W†^N) δ
        if self.cfg.l1 > 0.0 && delta_norm > 1e-300 {
            let w = self.cfg.l1 / delta_norm;
            let exact_back = self.spec.evolve_vector(&delta, -self.cfg.t_l);
            let trotter_back = q * q.ad_mul(&delta).component_mul(&sw.final_power.map(|z| z.conj()));
            costate += (exact_back - trotter_back).scale(w);
        }
        let grad: Vec<f64> = jac.iter().map(|d| costate.dotc(d).re).collect();
        let value = finite(LossValue {
            total: error + echo,
            error_term: error,
            echo_term: echo,
        })?;
        if grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFinite("loss gradient".into()));
        }
        Ok((value, grad))
    }
}

fn finite(v: LossValue) -> Result<LossValue> {
    if v.total.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonFinite(format!("loss = {}", v.total)))
    }
}

/// `(total, error term, echo term)` of the composite loss.
pub fn composite_loss(params: &VariationalParameters, ham: &SplitHamiltonian, cfg: &LossConfig) -> Result<LossValue> {
    LossEvaluator::new(ham, cfg)?.loss(params)
}

pub fn loss_gradient(params: &VariationalParameters, ham: &SplitHamiltonian, cfg: &LossConfig) -> Result<Vec<f64>> {
    Ok(LossEvaluator::new(ham, cfg)?.loss_and_gradient(params)?.1)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerOptions {
    #[serde(default = "opt_defaults::iters")]
    pub iters: usize,
    #[serde(default = "opt_defaults::lr0")]
    pub lr0: f64,
    #[serde(default = "opt_defaults::lr_min")]
    pub lr_min: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "opt_defaults::restarts")]
    pub restarts: usize,
}

mod opt_defaults {
    pub fn iters() -> usize {
        2000
    }
    pub fn lr0() -> f64 {
        0.05
    }
    pub fn lr_min() -> f64 {
        1e-4
    }
    pub fn restarts() -> usize {
        8
    }
}

impl Default for OptimizerOptions {
    fn default() -> Self {
        Self {
            iters: opt_defaults::iters(),
            lr0: opt_defaults::lr0(),
            lr_min: opt_defaults::lr_min(),
            seed: 0,
            restarts: opt_defaults::restarts(),
        }
    }
}

impl OptimizerOptions {
    pub fn validate(&self) -> Result<()> {
        if self.iters < 1 || self.restarts < 1 {
            return Err(Error::InvalidParameter("iters and restarts must be at least 1".into()));
        }
        if !(self.lr0 > self.lr_min && self.lr_min >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "learning rates must satisfy lr0 > lr_min >= 0, got {} and {}",
                self.lr0, self.lr_min
            )));
        }
        Ok(())
    }

    /// Cosine-annealed learning rate at iteration `i`.
    pub fn learning_rate(&self, i: usize) -> f64 {
        self.lr_min + (self.lr0 - self.lr_min) * (1.0 + (PI * i as f64 / self.iters as f64).cos()) / 2.0
    }
}

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

#[derive(Debug, Clone)]
struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    fn new(n: usize) -> Self {
        Self {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    fn step(&mut self, x: &mut [f64], grad: &[f64], lr: f64) {
        self.t += 1;
        let c1 = 1.0 - ADAM_BETA1.powi(self.t);
        let c2 = 1.0 - ADAM_BETA2.powi(self.t);
        for i in 0..x.len() {
            self.m[i] = ADAM_BETA1 * self.m[i] + (1.0 - ADAM_BETA1) * grad[i];
            self.v[i] = ADAM_BETA2 * self.v[i] + (1.0 - ADAM_BETA2) * grad[i] * grad[i];
            x[i] -= lr * (self.m[i] / c1) / ((self.v[i] / c2).sqrt() + ADAM_EPS);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub loss: f64,
    pub error_term: f64,
    pub echo_term: f64,
    pub learning_rate: f64,
    pub params: Vec<f64>,
}

/// Per-iteration record of one restart, evaluated before each Adam step.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct OptimizationHistory {
    pub restart: usize,
    pub records: Vec<IterationRecord>,
}

impl OptimizationHistory {
    /// Running minimum of the recorded loss.
    pub fn best_so_far(&self) -> Vec<f64> {
        self.records
            .iter()
            .scan(f64::INFINITY, |best, r| {
                *best = best.min(r.loss);
                Some(*best)
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RestartSummary {
    pub restart: usize,
    pub initial_loss: Option<f64>,
    pub best_loss: Option<f64>,
    /// Set when the restart was abandoned.
    pub diagnostic: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizationResult {
    /// Best parameters across all restarts, reduced to `(−π, π]`.
    pub params: VariationalParameters,
    pub loss: LossValue,
    pub history: OptimizationHistory,
    pub restarts: Vec<RestartSummary>,
}

struct RestartOutcome {
    best: Option<(LossValue, Vec<f64>)>,
    history: OptimizationHistory,
    summary: RestartSummary,
}

fn run_restart(eval: &LossEvaluator, opts: &OptimizerOptions, restart: usize) -> RestartOutcome {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    rng.set_stream(restart as u64);
    let mut x = VariationalParameters::random(eval.n_sites, &mut rng).to_flat();
    let mut adam = Adam::new(x.len());
    let mut history = OptimizationHistory {
        restart,
        records: Vec::with_capacity(opts.iters),
    };
    let mut best: Option<(LossValue, Vec<f64>)> = None;
    let mut diagnostic = None;
    let consider = |value: LossValue, x: &[f64], best: &mut Option<(LossValue, Vec<f64>)>| {
        if best.as_ref().map_or(true, |b| value.total < b.0.total) {
            *best = Some((value, x.to_vec()));
        }
    };
    for i in 0..opts.iters {
        let params = VariationalParameters::from_flat(&x).expect("even length");
        match eval.loss_and_gradient(&params) {
            Ok((value, grad)) => {
                let lr = opts.learning_rate(i);
                history.records.push(IterationRecord {
                    iteration: i,
                    loss: value.total,
                    error_term: value.error_term,
                    echo_term: value.echo_term,
                    learning_rate: lr,
                    params: x.clone(),
                });
                consider(value, &x, &mut best);
                adam.step(&mut x, &grad, lr);
            }
            Err(e) => {
                diagnostic = Some(format!("iteration {i}: {e}"));
                break;
            }
        }
    }
    if diagnostic.is_none() {
        match VariationalParameters::from_flat(&x).and_then(|p| eval.loss(&p)) {
            Ok(value) => consider(value, &x, &mut best),
            Err(e) => diagnostic = Some(format!("final evaluation: {e}")),
        }
    }
    let summary = RestartSummary {
        restart,
        initial_loss: history.records.first().map(|r| r.loss),
        best_loss: best.as_ref().map(|b| b.0.total),
        diagnostic,
    };
    RestartOutcome {
        best,
        history,
        summary,
    }
}

/// Adam with cosine annealing over `opts.restarts` independent random
/// initializations; returns the best parameters seen in any restart.
pub fn optimize(ham: &SplitHamiltonian, cfg: &LossConfig, opts: &OptimizerOptions) -> Result<OptimizationResult> {
    let eval = LossEvaluator::new(ham, cfg)?;
    optimize_with(&eval, opts)
}

pub fn optimize_with(eval: &LossEvaluator, opts: &OptimizerOptions) -> Result<OptimizationResult> {
    opts.validate()?;
    let outcomes: Vec<RestartOutcome> = (0..opts.restarts)
        .into_par_iter()
        .map(|r| run_restart(eval, opts, r))
        .collect();
    let winner = outcomes
        .iter()
        .filter_map(|o| o.best.as_ref().map(|b| (o, b)))
        .min_by(|a, b| a.1 .0.total.total_cmp(&b.1 .0.total).then(a.0.summary.restart.cmp(&b.0.summary.restart)));
    let Some((outcome, (loss, x))) = winner else {
        let reasons: Vec<String> = outcomes.iter().filter_map(|o| o.summary.diagnostic.clone()).collect();
        return Err(Error::NonFinite(format!("every restart failed: {}", reasons.join("; "))));
    };
    Ok(OptimizationResult {
        params: VariationalParameters::from_flat(x)?.canonical(),
        loss: *loss,
        history: outcome.history.clone(),
        restarts: outcomes.iter().map(|o| o.summary.clone()).collect(),
    })
}
