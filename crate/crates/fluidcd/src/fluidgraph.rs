//! Fluid-diffusion graph assembly: transport velocities, the first-passage
//! transition kernel, the row-stochastic `Q` matrix, and the fluid Laplacian.

use ndarray::{Array1, Array2};

use crate::data::{is_normalized, Dataset};
use crate::error::{Error, Result};
use crate::relevance::PermeabilityTensor;

/// Pairwise transport velocities and diffusivities.
///
/// Velocities are relevance-gated negated distances in `[-1, 0]` with zero
/// diagonal; diffusivities default to the uniform all-ones matrix in the
/// unsupervised setting.
#[derive(Debug, Clone)]
pub struct TransportField {
    pub v: Array2<f64>,
    pub b: Array2<f64>,
}

impl TransportField {
    /// Uniform all-ones diffusivity field over the given velocity matrix.
    pub fn with_uniform_diffusivity(v: Array2<f64>) -> TransportField {
        TransportField::with_uniform_level(v, 1.0)
    }

    /// Uniform diffusivity at `level` (the kernel temperature: smaller
    /// levels sharpen the transition contrast between near and far pairs).
    pub fn with_uniform_level(v: Array2<f64>, level: f64) -> TransportField {
        let n = v.nrows();
        TransportField {
            v,
            b: Array2::from_elem((n, n), level),
        }
    }
}

/// Row-stochastic Markov matrix of pairwise transition probabilities.
#[derive(Debug, Clone)]
pub struct TransitionMatrix {
    pub q: Array2<f64>,
}

impl TransitionMatrix {
    /// Validates non-negativity, zero diagonal, and unit row sums (1e-12).
    pub fn new(q: Array2<f64>) -> Result<TransitionMatrix> {
        let n = q.nrows();
        if q.ncols() != n {
            return Err(Error::Contract("transition matrix must be square".into()));
        }
        for i in 0..n {
            if q[[i, i]] != 0.0 {
                return Err(Error::Contract(format!("nonzero diagonal at {i}")));
            }
            let mut sum = 0.0;
            for j in 0..n {
                if q[[i, j]] < 0.0 {
                    return Err(Error::Contract(format!("negative entry at ({i},{j})")));
                }
                sum += q[[i, j]];
            }
            if (sum - 1.0).abs() > 1e-12 {
                return Err(Error::Contract(format!(
                    "row {i} sums to {sum}, expected 1"
                )));
            }
        }
        Ok(TransitionMatrix { q })
    }

    pub fn len(&self) -> usize {
        self.q.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.q.nrows() == 0
    }

    /// Symmetrized weights `(Q + Q^T) / 2` used by the Laplacian, the cut
    /// objective, and the node weightings.
    pub fn symmetrized(&self) -> Array2<f64> {
        let n = self.len();
        let mut s = Array2::zeros((n, n));
        for i in 0..n {
            for j in 0..n {
                s[[i, j]] = 0.5 * (self.q[[i, j]] + self.q[[j, i]]);
            }
        }
        s
    }
}

/// Fluid Laplacian `F = D - Q_sym` together with its normalized form.
#[derive(Debug, Clone)]
pub struct FluidLaplacian {
    pub f: Array2<f64>,
    pub f_norm: Array2<f64>,
    pub degrees: Array1<f64>,
}

/// Relevance-gated transport velocity matrix.
///
/// `v_ij = -||K_ij ⊙ (x_i - x_j)|| / sqrt(|R_i ∩ R_j|)` over the shared
/// relevant features; pairs with no shared relevant feature get the maximal
/// dissimilarity sentinel `-1`.
pub fn transport_velocity(d: &Dataset, k: &PermeabilityTensor) -> Result<Array2<f64>> {
    if !is_normalized(d, 1e-9) {
        return Err(Error::Contract(
            "transport velocity needs a min-max normalized dataset".into(),
        ));
    }
    let n = d.sample_count();
    if n < crate::data::MIN_SAMPLES {
        return Err(Error::TooFewSamples {
            actual: n,
            required: crate::data::MIN_SAMPLES,
        });
    }
    if k.sample_count() != n {
        return Err(Error::Contract(
            "permeability tensor size does not match dataset".into(),
        ));
    }

    let mut v = Array2::zeros((n, n));
    for i in 0..n {
        for j in (i + 1)..n {
            let shared = k.shared_features(i, j);
            let vij = if shared.is_empty() {
                -1.0
            } else {
                let mut sq = 0.0;
                for &l in &shared {
                    let diff = d.values[[i, l]] - d.values[[j, l]];
                    sq += diff * diff;
                }
                -(sq.sqrt()) / (shared.len() as f64).sqrt()
            };
            v[[i, j]] = vij;
            v[[j, i]] = vij;
        }
    }
    Ok(v)
}

/// `x / sinh(x)`, extended evenly with `g(0) = 1`.
fn x_over_sinh(x: f64) -> f64 {
    let ax = x.abs();
    if ax < 1e-4 {
        // sinh(x) = x (1 + x^2/6 + ...), so x/sinh(x) = 1 - x^2/6 + O(x^4).
        1.0 - x * x / 6.0
    } else {
        x / x.sinh()
    }
}

/// First-passage transition probability toward the `+` boundary.
///
/// With `v_u† = v_u / (2 b_u)` and `g(x) = x/sinh(x)` this evaluates
/// `g(v+†) e^{v+†} / (g(v+†) e^{v+†} + g(v-†) e^{-v-†})`, the closed-form
/// exit probability of the piecewise advection–diffusion jump between nodes.
pub fn transition_probability(
    v_plus: f64,
    v_minus: f64,
    b_plus: f64,
    b_minus: f64,
) -> Result<f64> {
    if b_plus <= 0.0 {
        return Err(Error::param("b_plus", "diffusivity must be positive"));
    }
    if b_minus <= 0.0 {
        return Err(Error::param("b_minus", "diffusivity must be positive"));
    }
    let vp = v_plus / (2.0 * b_plus);
    let vm = v_minus / (2.0 * b_minus);
    let num = x_over_sinh(vp) * vp.exp();
    let den = num + x_over_sinh(vm) * (-vm).exp();
    Ok(num / den)
}

/// Assembles the row-stochastic transition matrix from pairwise velocities
/// and diffusivities.
///
/// For each ordered pair `(i, j)` the opposing-boundary drift/diffusivity is
/// the mean over the rest of the neighborhood `N(i) \ {j}` (full-graph
/// convention), then rows are normalized to unit sum.
pub fn build_q(field: &TransportField) -> Result<TransitionMatrix> {
    let n = field.v.nrows();
    if n < crate::data::MIN_SAMPLES {
        return Err(Error::TooFewSamples {
            actual: n,
            required: crate::data::MIN_SAMPLES,
        });
    }
    if field.v.ncols() != n || field.b.nrows() != n || field.b.ncols() != n {
        return Err(Error::Contract("velocity/diffusivity shape mismatch".into()));
    }

    // Off-diagonal row sums, computed once so the pairwise evaluations are
    // order-independent.
    let mut v_row = vec![0.0; n];
    let mut b_row = vec![0.0; n];
    for i in 0..n {
        for j in 0..n {
            if j != i {
                v_row[i] += field.v[[i, j]];
                b_row[i] += field.b[[i, j]];
            }
        }
    }

    let divisor = (n - 2) as f64;
    let mut q = Array2::zeros((n, n));
    for i in 0..n {
        let mut row_sum = 0.0;
        for j in 0..n {
            if j == i {
                continue;
            }
            let v_minus = (v_row[i] - field.v[[i, j]]) / divisor;
            let b_minus = (b_row[i] - field.b[[i, j]]) / divisor;
            let p = transition_probability(field.v[[i, j]], v_minus, field.b[[i, j]], b_minus)?;
            q[[i, j]] = p;
            row_sum += p;
        }
        for j in 0..n {
            q[[i, j]] /= row_sum;
        }
    }
    TransitionMatrix::new(q)
}

/// Fluid Laplacian `F = D - Q_sym` and its normalized form
/// `F̄ = D^{-1/2} F D^{-1/2}`.
pub fn fluid_laplacian(q: &TransitionMatrix) -> Result<FluidLaplacian> {
    let n = q.len();
    let s = q.symmetrized();
    let mut degrees = Array1::zeros(n);
    for i in 0..n {
        let mut sum = 0.0;
        for j in 0..n {
            if j != i {
                sum += s[[i, j]];
            }
        }
        if sum <= 0.0 {
            return Err(Error::ZeroDegree { node: i });
        }
        degrees[i] = sum;
    }

    let mut f = Array2::zeros((n, n));
    for i in 0..n {
        for j in 0..n {
            f[[i, j]] = if i == j {
                degrees[i]
            } else {
                -s[[i, j]]
            };
        }
    }
    let mut f_norm = Array2::zeros((n, n));
    for i in 0..n {
        for j in 0..n {
            f_norm[[i, j]] = f[[i, j]] / (degrees[i] * degrees[j]).sqrt();
        }
    }
    Ok(FluidLaplacian {
        f,
        f_norm,
        degrees,
    })
}
