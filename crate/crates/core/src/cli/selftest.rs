use crate::formulas::{dense_step, error_kernel, suzuki_coefficients, ProductFormulaSchedule, TrotterCircuit};
use crate::linalg::{eigendecompose_hermitian, exact_evolve, hermiticity_defect, max_abs};
use crate::models::{build_heisenberg, build_pxp, build_stark, SplitHamiltonian};
use crate::variational::{haar_random_product_state, LossConfig, LossEvaluator, VariationalParameters};

#[derive(Debug, Clone)]
pub struct SelfCheck {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn models(n: usize) -> Vec<SplitHamiltonian> {
    vec![
        build_heisenberg(n, 0.5).expect("valid"),
        build_stark(n, 1.0, 0.8, 0.9, 4.0).expect("valid"),
        build_pxp(n).expect("valid"),
    ]
}

fn check(name: &'static str, f: impl FnOnce() -> crate::Result<(bool, String)>) -> SelfCheck {
    match f() {
        Ok((passed, detail)) => SelfCheck { name, passed, detail },
        Err(e) => SelfCheck {
            name,
            passed: false,
            detail: e.to_string(),
        },
    }
}

/// A few seconds of numerical sanity checks on small chains.
pub fn run_selftest() -> Vec<SelfCheck> {
    vec![
        check("suzuki-coefficients", || {
            let worst = (1..=4)
                .map(|k| {
                    let (p, s) = suzuki_coefficients(k);
                    let e = 2 * k as i32 + 1;
                    (4.0 * p + s - 1.0).abs().max((4.0 * p.powi(e) + s.powi(e)).abs())
                })
                .fold(0.0, f64::max);
            Ok((worst < 1e-12, format!("max identity defect {worst:.1e}")))
        }),
        check("gate-circuit-vs-dense-step", || {
            let mut worst: f64 = 0.0;
            for ham in models(4) {
                for q in [1, 2, 4] {
                    let sched = ProductFormulaSchedule::for_order(q)?;
                    let circuit = TrotterCircuit::new(&ham, &sched, 0.1)?;
                    worst = worst.max(max_abs(&(circuit.step_matrix() - dense_step(&ham, &sched, 0.1)?)));
                }
            }
            Ok((worst < 1e-12, format!("max entry deviation {worst:.1e}")))
        }),
        check("norm-conservation", || {
            let mut worst: f64 = 0.0;
            for ham in models(6) {
                let sched = ProductFormulaSchedule::for_order(2)?;
                let circuit = TrotterCircuit::new(&ham, &sched, 0.01)?;
                let mut amps = haar_random_product_state(6, 1).into_amplitudes();
                for _ in 0..200 {
                    circuit.step(&mut amps);
                }
                worst = worst.max((amps.norm() - 1.0).abs());
            }
            Ok((worst < 1e-10, format!("norm drift {worst:.1e} after 200 steps")))
        }),
        check("kernel-hermiticity", || {
            let mut worst: f64 = 0.0;
            for ham in models(4) {
                for q in [1, 2] {
                    worst = worst.max(hermiticity_defect(error_kernel(&ham, q)?.matrix()));
                }
            }
            Ok((worst < 1e-12, format!("max defect {worst:.1e}")))
        }),
        check("exact-evolution-group-law", || {
            let ham = build_heisenberg(4, 0.5)?;
            let spec = eigendecompose_hermitian(&ham.dense())?;
            let psi = haar_random_product_state(4, 2);
            let once = exact_evolve(&spec, &psi, 0.7)?;
            let twice = exact_evolve(&spec, &exact_evolve(&spec, &psi, 0.3)?, 0.4)?;
            let d = once.distance(&twice)?;
            Ok((d < 1e-12, format!("deviation {d:.1e}")))
        }),
        check("loss-gradient-vs-finite-difference", || {
            let mut worst: f64 = 0.0;
            let cfg = LossConfig {
                l2: 0.1,
                t_l: 1.0,
                dt: 0.05,
                ..LossConfig::default()
            };
            for ham in models(3) {
                let eval = LossEvaluator::new(&ham, &cfg)?;
                let x = [0.3, -1.1, 2.0, 0.4, 0.9, -0.2];
                let params = VariationalParameters::from_flat(&x)?;
                let (_, grad) = eval.loss_and_gradient(&params)?;
                for i in 0..x.len() {
                    let f = |dx: f64| {
                        let mut y = x;
                        y[i] += dx;
                        eval.loss(&VariationalParameters::from_flat(&y)?).map(|v| v.total)
                    };
                    let h = 1e-5;
                    let fd = (f(h)? - f(-h)?) / (2.0 * h);
                    if fd.abs() > 1e-8 {
                        worst = worst.max((grad[i] - fd).abs() / fd.abs());
                    }
                }
            }
            Ok((worst < 1e-4, format!("max relative deviation {worst:.1e}")))
        }),
    ]
}
