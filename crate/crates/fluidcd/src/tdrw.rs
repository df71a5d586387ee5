//! Independent oracle for the transition kernel: the exact splitting
//! probability of the piecewise advection–diffusion process between absorbing
//! boundaries at ±1, plus an Euler–Maruyama first-passage simulation.

use rand::prelude::*;
use rand_distr::StandardNormal;
use rand_pcg::Pcg64Mcg;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::seed::derive_seed;

/// Parameters of the piecewise jump process
/// `dx = v(x) dt + sqrt(2 B(x)) dW` with `v(x) = v_plus, B(x) = b_plus` for
/// `x >= 0` and the minus-side coefficients otherwise. Boundaries are fixed
/// at ±1 (unitary node-to-node jump).
#[derive(Debug, Clone, Copy, Serialize)]
pub struct TdrwParams {
    pub v_plus: f64,
    pub v_minus: f64,
    pub b_plus: f64,
    pub b_minus: f64,
    pub dt: f64,
    pub paths: usize,
    pub seed: u64,
}

impl TdrwParams {
    fn validate(&self) -> Result<()> {
        if self.b_plus <= 0.0 {
            return Err(Error::param("b_plus", "diffusivity must be positive"));
        }
        if self.b_minus <= 0.0 {
            return Err(Error::param("b_minus", "diffusivity must be positive"));
        }
        if self.dt <= 0.0 {
            return Err(Error::param("dt", "time step must be positive"));
        }
        if self.paths == 0 {
            return Err(Error::param("paths", "need at least one path"));
        }
        Ok(())
    }
}

/// `(1 - e^{-a}) / a`, continuous at `a = 0`.
fn expm1_ratio(a: f64) -> f64 {
    if a == 0.0 {
        1.0
    } else {
        -(-a).exp_m1() / a
    }
}

/// Exact probability of exiting at +1 before -1 from a start at 0, via the
/// piecewise scale function `s(x) = ∫_0^x exp(-∫_0^y v/B) dy` evaluated in
/// closed form on each side. Returns `-s(-1) / (s(1) - s(-1))`.
pub fn splitting_probability_analytic(p: &TdrwParams) -> Result<f64> {
    p.validate()?;
    let a_plus = p.v_plus / p.b_plus;
    let a_minus = p.v_minus / p.b_minus;
    // s(1) = (1 - e^{-a+}) / a+ ; s(-1) = -(e^{a-} - 1)/a- = -expm1(a-)/a-.
    let s_right = expm1_ratio(a_plus);
    let s_left = if a_minus == 0.0 {
        1.0
    } else {
        a_minus.exp_m1() / a_minus
    };
    Ok(s_left / (s_right + s_left))
}

/// Euler–Maruyama estimate of the splitting probability with its binomial
/// standard error. Paths are seeded independently, so the estimate does not
/// depend on scheduling.
pub fn splitting_probability_mc(p: &TdrwParams) -> Result<(f64, f64)> {
    p.validate()?;
    let v_max = p.v_plus.abs().max(p.v_minus.abs());
    let b_max = p.b_plus.max(p.b_minus);
    // A step whose deterministic part plus a 6-sigma diffusion kick spans the
    // whole domain makes first-passage bookkeeping meaningless.
    if v_max * p.dt + 6.0 * (2.0 * b_max * p.dt).sqrt() > 2.0 {
        return Err(Error::param("dt", "single-step jumps may exceed the domain"));
    }

    let sq_plus = (2.0 * p.b_plus * p.dt).sqrt();
    let sq_minus = (2.0 * p.b_minus * p.dt).sqrt();
    let drift_plus = p.v_plus * p.dt;
    let drift_minus = p.v_minus * p.dt;

    let right_exits: u64 = (0..p.paths as u64)
        .into_par_iter()
        .map(|path| {
            let mut rng = Pcg64Mcg::seed_from_u64(derive_seed(p.seed, path));
            let mut x = 0.0f64;
            loop {
                let z: f64 = rng.sample(StandardNormal);
                x += if x >= 0.0 {
                    drift_plus + sq_plus * z
                } else {
                    drift_minus + sq_minus * z
                };
                if x >= 1.0 {
                    return 1u64;
                }
                if x <= -1.0 {
                    return 0u64;
                }
            }
        })
        .sum();

    let estimate = right_exits as f64 / p.paths as f64;
    let se = (estimate * (1.0 - estimate) / p.paths as f64).sqrt();
    Ok((estimate, se))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fluidgraph::transition_probability;

    fn params(v_plus: f64, v_minus: f64, b_plus: f64, b_minus: f64) -> TdrwParams {
        TdrwParams {
            v_plus,
            v_minus,
            b_plus,
            b_minus,
            dt: 1e-3,
            paths: 100_000,
            seed: 7,
        }
    }

    #[test]
    fn symmetric_diffusion_splits_evenly() {
        let p = params(0.0, 0.0, 1.0, 1.0);
        assert!((splitting_probability_analytic(&p).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn collapses_to_sigmoid_on_symmetric_inputs() {
        let p = params(-0.5, -0.5, 1.0, 1.0);
        let analytic = splitting_probability_analytic(&p).unwrap();
        let sigmoid = 1.0 / (1.0 + (0.5f64).exp());
        assert!((analytic - sigmoid).abs() < 1e-14);
        let kernel = transition_probability(-0.5, -0.5, 1.0, 1.0).unwrap();
        assert!((analytic - kernel).abs() < 1e-14);
    }

    #[test]
    fn matches_transition_kernel_on_asymmetric_inputs() {
        let p = params(-0.3, -0.6, 1.0, 1.0);
        let analytic = splitting_probability_analytic(&p).unwrap();
        let kernel = transition_probability(-0.3, -0.6, 1.0, 1.0).unwrap();
        assert!((analytic - kernel).abs() <= 1e-10);
        assert!((analytic - 0.3920).abs() < 5e-5);
    }

    #[test]
    fn mc_agrees_on_symmetric_case() {
        let mut p = params(0.0, 0.0, 1.0, 1.0);
        p.paths = 20_000;
        let (est, se) = splitting_probability_mc(&p).unwrap();
        assert!((est - 0.5).abs() <= 3.0 * se);
    }

    #[test]
    fn mc_is_deterministic() {
        let mut p = params(-0.4, -0.2, 0.8, 0.5);
        p.paths = 5_000;
        let (a, _) = splitting_probability_mc(&p).unwrap();
        let (b, _) = splitting_probability_mc(&p).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn mc_rejects_oversized_steps() {
        let mut p = params(0.0, 0.0, 1.0, 1.0);
        p.dt = 1.0;
        assert!(matches!(
            splitting_probability_mc(&p),
            Err(Error::Param { name: "dt", .. })
        ));
    }
}
