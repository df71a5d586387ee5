//! Topology-aware clustering evaluation and spiked-model diagnostics.
//!
//! The three scores (modified purity, modified adjusted Rand index, modified
//! normalized mutual information) weight each node by a topology-derived
//! factor instead of counting nodes uniformly; three weighting modes are
//! supported. All formulas are scale-homogeneous of degree zero in the
//! weights.

use ndarray::Array2;
use serde::Serialize;

use crate::cluster::Partition;
use crate::data::{Dataset, GroundTruth};
use crate::error::{Error, Result};
use crate::fluidgraph::TransitionMatrix;

/// Node-weighting modes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WeightMode {
    /// `d_u / max_t d_t`
    Degree,
    /// `d_u^int / d_u`
    Embeddedness,
    /// `d_u^int / max_t d_t`
    WeightedEmbeddedness,
}

impl WeightMode {
    pub const ALL: [WeightMode; 3] = [
        WeightMode::Degree,
        WeightMode::Embeddedness,
        WeightMode::WeightedEmbeddedness,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            WeightMode::Degree => "degree",
            WeightMode::Embeddedness => "embeddedness",
            WeightMode::WeightedEmbeddedness => "weighted_embeddedness",
        }
    }
}

/// Per-node weights in `[0, 1]` under a given mode.
#[derive(Debug, Clone)]
pub struct NodeWeighting {
    pub mode: WeightMode,
    pub w: Vec<f64>,
}

impl NodeWeighting {
    /// Unit weights (reduces every metric to its classical counterpart).
    pub fn uniform(n: usize) -> NodeWeighting {
        NodeWeighting {
            mode: WeightMode::Degree,
            w: vec![1.0; n],
        }
    }
}

/// Weighted degrees on the symmetrized transition matrix; `0/0` ratios are 0.
pub fn node_weights(q: &TransitionMatrix, p: &Partition, mode: WeightMode) -> NodeWeighting {
    let n = q.len();
    let s = q.symmetrized();
    let mut degree = vec![0.0; n];
    let mut internal = vec![0.0; n];
    for u in 0..n {
        for j in 0..n {
            degree[u] += s[[u, j]];
            if p.labels[j] == p.labels[u] {
                internal[u] += s[[u, j]];
            }
        }
    }
    let max_degree = degree.iter().cloned().fold(0.0, f64::max);
    let ratio = |num: f64, den: f64| if den > 0.0 { num / den } else { 0.0 };
    let w = (0..n)
        .map(|u| match mode {
            WeightMode::Degree => ratio(degree[u], max_degree),
            WeightMode::Embeddedness => ratio(internal[u], degree[u]),
            WeightMode::WeightedEmbeddedness => ratio(internal[u], max_degree),
        })
        .collect();
    NodeWeighting { mode, w }
}

fn check_lengths(omega: &Partition, psi: &GroundTruth, w: &[f64]) -> Result<()> {
    if omega.labels.len() != psi.labels.len() || omega.labels.len() != w.len() {
        return Err(Error::Contract(
            "partition, ground truth, and weights must cover the same nodes".into(),
        ));
    }
    Ok(())
}

/// Modified purity: the weighted fraction of nodes whose ground-truth class
/// is the majority class of their detected cluster (ties to the lowest class
/// index).
pub fn modified_purity(omega: &Partition, psi: &GroundTruth, w: &NodeWeighting) -> Result<f64> {
    check_lengths(omega, psi, &w.w)?;
    let total: f64 = w.w.iter().sum();
    if total <= 0.0 {
        return Err(Error::ZeroWeights);
    }

    // Majority ground-truth class per detected cluster.
    let mut majority = vec![0usize; omega.k + 1];
    for cluster in 1..=omega.k {
        let mut counts = vec![0usize; psi.k_c + 1];
        for u in 0..omega.labels.len() {
            if omega.labels[u] == cluster {
                counts[psi.labels[u]] += 1;
            }
        }
        let mut best_class = 1;
        for class in 2..=psi.k_c {
            if counts[class] > counts[best_class] {
                best_class = class;
            }
        }
        majority[cluster] = best_class;
    }

    let mut score = 0.0;
    for u in 0..omega.labels.len() {
        if psi.labels[u] == majority[omega.labels[u]] {
            score += w.w[u];
        }
    }
    Ok(score / total)
}

/// Modified adjusted Rand index with `kappa(S) = (sum_{u in S} w_u)^2`
/// (both orderings including `t = u`).
pub fn modified_ari(omega: &Partition, psi: &GroundTruth, w: &NodeWeighting) -> Result<f64> {
    check_lengths(omega, psi, &w.w)?;
    let n = omega.labels.len();
    let total: f64 = w.w.iter().sum();
    let kappa_all = total * total;
    if kappa_all <= 0.0 {
        return Err(Error::ZeroWeights);
    }

    let mut omega_sums = vec![0.0; omega.k + 1];
    let mut psi_sums = vec![0.0; psi.k_c + 1];
    let mut cell_sums = vec![0.0; (omega.k + 1) * (psi.k_c + 1)];
    for u in 0..n {
        omega_sums[omega.labels[u]] += w.w[u];
        psi_sums[psi.labels[u]] += w.w[u];
        cell_sums[omega.labels[u] * (psi.k_c + 1) + psi.labels[u]] += w.w[u];
    }
    let kappa_omega: f64 = omega_sums.iter().map(|s| s * s).sum();
    let kappa_psi: f64 = psi_sums.iter().map(|s| s * s).sum();
    let kappa_cells: f64 = cell_sums.iter().map(|s| s * s).sum();

    let expected = kappa_omega * kappa_psi / kappa_all;
    let num = kappa_cells - expected;
    let den = 0.5 * (kappa_omega + kappa_psi) - expected;
    if den.abs() <= 1e-12 * kappa_all {
        // Both partitions trivial and identical in weight mass.
        return Ok(1.0);
    }
    Ok(num / den)
}

/// Modified normalized mutual information over the weighted joint
/// distribution `p_ij = sum_{u in omega_i ∩ psi_j} w_u / sum w`, with
/// `0 log 0 = 0` and natural logarithms.
pub fn modified_nmi(omega: &Partition, psi: &GroundTruth, w: &NodeWeighting) -> Result<f64> {
    check_lengths(omega, psi, &w.w)?;
    let total: f64 = w.w.iter().sum();
    if total <= 0.0 {
        return Err(Error::ZeroWeights);
    }

    let mut joint = vec![0.0; (omega.k + 1) * (psi.k_c + 1)];
    for u in 0..omega.labels.len() {
        joint[omega.labels[u] * (psi.k_c + 1) + psi.labels[u]] += w.w[u] / total;
    }
    let row = |i: usize| -> f64 { (1..=psi.k_c).map(|j| joint[i * (psi.k_c + 1) + j]).sum() };
    let col = |j: usize| -> f64 { (1..=omega.k).map(|i| joint[i * (psi.k_c + 1) + j]).sum() };

    let mut num = 0.0;
    for i in 1..=omega.k {
        for j in 1..=psi.k_c {
            let p = joint[i * (psi.k_c + 1) + j];
            if p > 0.0 {
                num += p * (p / (row(i) * col(j))).ln();
            }
        }
    }
    num *= -2.0;

    let mut den = 0.0;
    for i in 1..=omega.k {
        let p = row(i);
        if p > 0.0 {
            den += p * p.ln();
        }
    }
    for j in 1..=psi.k_c {
        let p = col(j);
        if p > 0.0 {
            den += p * p.ln();
        }
    }

    if den == 0.0 {
        // Single cluster vs single class: identical trivial partitions.
        return Ok(1.0);
    }
    Ok(num / den)
}

/// The nine scores: three metrics under the three weighting modes.
#[derive(Debug, Clone, Serialize)]
pub struct ScoreReport {
    pub mp_degree: f64,
    pub mari_degree: f64,
    pub mnmi_degree: f64,
    pub mp_embeddedness: f64,
    pub mari_embeddedness: f64,
    pub mnmi_embeddedness: f64,
    pub mp_weighted_embeddedness: f64,
    pub mari_weighted_embeddedness: f64,
    pub mnmi_weighted_embeddedness: f64,
}

/// Scores a detected partition against ground truth under all three node
/// weightings derived from the transition matrix.
pub fn score_all(
    q: &TransitionMatrix,
    omega: &Partition,
    psi: &GroundTruth,
) -> Result<ScoreReport> {
    let mut vals = [[0.0; 3]; 3];
    for (mi, mode) in WeightMode::ALL.iter().enumerate() {
        let w = node_weights(q, omega, *mode);
        vals[mi][0] = modified_purity(omega, psi, &w)?;
        vals[mi][1] = modified_ari(omega, psi, &w)?;
        vals[mi][2] = modified_nmi(omega, psi, &w)?;
    }
    Ok(ScoreReport {
        mp_degree: vals[0][0],
        mari_degree: vals[0][1],
        mnmi_degree: vals[0][2],
        mp_embeddedness: vals[1][0],
        mari_embeddedness: vals[1][1],
        mnmi_embeddedness: vals[1][2],
        mp_weighted_embeddedness: vals[2][0],
        mari_weighted_embeddedness: vals[2][1],
        mnmi_weighted_embeddedness: vals[2][2],
    })
}

/// Spiked-model diagnostics per prefix size: centered class-mean norms,
/// centered covariance traces, and the pairwise trace matrix.
#[derive(Debug, Clone)]
pub struct SpikedDiagnostics {
    pub prefix_counts: Vec<usize>,
    /// `[prefix][class]` centered mean norms `||m'_l||`.
    pub m_prime_norms: Vec<Vec<f64>>,
    /// `[prefix][class]` centered covariance traces `t_l = Tr[C'_l]/sqrt(n)`.
    pub t: Vec<Vec<f64>>,
    /// `[prefix]` symmetric `k x k` matrices `T inner_ij = Tr[C'_i C'_j]/n`.
    pub t_matrix: Vec<Array2<f64>>,
    /// `[prefix]` max entry of `T` (the trend curve headline value).
    pub t_matrix_max: Vec<f64>,
}

/// Computes the diagnostics over growing sample prefixes (dataset row order).
pub fn spiked_diagnostics(
    d: &Dataset,
    gt: &GroundTruth,
    prefix_counts: &[usize],
) -> Result<SpikedDiagnostics> {
    if gt.labels.len() != d.sample_count() {
        return Err(Error::Contract("label count != sample count".into()));
    }
    let n = d.feature_count();
    let k = gt.k_c;

    let mut out = SpikedDiagnostics {
        prefix_counts: prefix_counts.to_vec(),
        m_prime_norms: Vec::new(),
        t: Vec::new(),
        t_matrix: Vec::new(),
        t_matrix_max: Vec::new(),
    };

    for &prefix in prefix_counts {
        if prefix == 0 || prefix > d.sample_count() {
            return Err(Error::Protocol(format!(
                "prefix {prefix} outside 1..={}",
                d.sample_count()
            )));
        }
        let mut members: Vec<Vec<usize>> = vec![Vec::new(); k];
        for i in 0..prefix {
            members[gt.labels[i] - 1].push(i);
        }
        if let Some(empty) = members.iter().position(|m| m.is_empty()) {
            return Err(Error::Protocol(format!(
                "class {} absent from prefix {prefix}",
                empty + 1
            )));
        }

        // Per-class means and population covariances.
        let mut means = vec![vec![0.0; n]; k];
        for (c, rows) in members.iter().enumerate() {
            for &i in rows {
                for j in 0..n {
                    means[c][j] += d.values[[i, j]];
                }
            }
            for j in 0..n {
                means[c][j] /= rows.len() as f64;
            }
        }
        let mut covs: Vec<Array2<f64>> = Vec::with_capacity(k);
        for (c, rows) in members.iter().enumerate() {
            let mut cov = Array2::zeros((n, n));
            for &i in rows {
                for a in 0..n {
                    let da = d.values[[i, a]] - means[c][a];
                    for b in a..n {
                        let db = d.values[[i, b]] - means[c][b];
                        cov[[a, b]] += da * db;
                    }
                }
            }
            let denom = rows.len() as f64;
            for a in 0..n {
                for b in a..n {
                    cov[[a, b]] /= denom;
                    cov[[b, a]] = cov[[a, b]];
                }
            }
            covs.push(cov);
        }

        // Population-weighted grand mean and covariance.
        let mut grand_mean = vec![0.0; n];
        let mut grand_cov: Array2<f64> = Array2::zeros((n, n));
        for (c, rows) in members.iter().enumerate() {
            let share = rows.len() as f64 / prefix as f64;
            for j in 0..n {
                grand_mean[j] += share * means[c][j];
            }
            grand_cov.scaled_add(share, &covs[c]);
        }

        let centered: Vec<Array2<f64>> = covs.iter().map(|c| c - &grand_cov).collect();

        let norms: Vec<f64> = (0..k)
            .map(|c| {
                (0..n)
                    .map(|j| {
                        let diff = means[c][j] - grand_mean[j];
                        diff * diff
                    })
                    .sum::<f64>()
                    .sqrt()
            })
            .collect();
        let traces: Vec<f64> = centered
            .iter()
            .map(|c| (0..n).map(|j| c[[j, j]]).sum::<f64>() / (n as f64).sqrt())
            .collect();
        let mut t_mat = Array2::zeros((k, k));
        for a in 0..k {
            for b in a..k {
                // Tr[C'_a C'_b] for symmetric factors is the elementwise sum.
                let tr: f64 = centered[a]
                    .iter()
                    .zip(centered[b].iter())
                    .map(|(x, y)| x * y)
                    .sum();
                t_mat[[a, b]] = tr / n as f64;
                t_mat[[b, a]] = t_mat[[a, b]];
            }
        }
        let t_max = t_mat.iter().cloned().fold(f64::NEG_INFINITY, f64::max);

        out.m_prime_norms.push(norms);
        out.t.push(traces);
        out.t_matrix.push(t_mat);
        out.t_matrix_max.push(t_max);
    }
    Ok(out)
}
