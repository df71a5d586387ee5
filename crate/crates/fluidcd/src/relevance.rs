//! Per-sample relevant-feature selection and the permeability tensor.
//!
//! Each sample induces a feature graph with two edge sets: a kernel affinity
//! over the sample's own feature values (local scale) and a dataset-global
//! mutual-information affinity (global scale). Joint diagonalization of the
//! two normalized Laplacians yields a shared eigenbasis; the knee of the
//! combined eigenvalue curve fixes the relevant-feature count, and k-means
//! over the low-frequency embedding picks one representative feature per
//! cluster. A feature is permeable between two samples when both selected it.

use ndarray::{Array1, Array2};
use rayon::prelude::*;

use crate::cluster::kmeans;
use crate::data::{is_normalized, Dataset};
use crate::error::{Error, Result};
use crate::kneedle::{ceil_sqrt, knee_index};
use crate::linalg::{asymmetry, log_det_spd};
use crate::seed::derive_seed;

/// Feature-affinity kernel used for the per-sample graph.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KernelKind {
    /// `exp(-(x1 - x2)^2 / (2 sigma^2))`; the default.
    Gaussian,
    /// Raw distance `|x1 - x2|` used as an edge weight (ablation).
    Euclidean,
    /// `x1 * x2 + l` (ablation).
    Linear { l: f64 },
    /// `(a * x1 * x2 + l)^b` (ablation).
    Polynomial { a: f64, l: f64, b: f64 },
}

impl Default for KernelKind {
    fn default() -> Self {
        KernelKind::Gaussian
    }
}

impl KernelKind {
    pub fn name(&self) -> &'static str {
        match self {
            KernelKind::Gaussian => "gaussian",
            KernelKind::Euclidean => "euclidean",
            KernelKind::Linear { .. } => "linear",
            KernelKind::Polynomial { .. } => "poly",
        }
    }
}

/// Parameters of the relevance pipeline.
#[derive(Debug, Clone)]
pub struct RelevanceParams {
    /// Histogram bins for the mutual-information estimator.
    pub bins: usize,
    /// Diagonal shift keeping both normalized Laplacians positive definite.
    pub ridge: f64,
    /// Gaussian bandwidth; `None` selects the per-sample median heuristic.
    pub sigma: Option<f64>,
    pub kernel: KernelKind,
    /// Sensitivity of the knee detector.
    pub kneedle_sensitivity: f64,
    /// Exclude features whose value is the missing sentinel (exact 0.0) from
    /// each sample's graph.
    pub masked_mode: bool,
    /// Convergence threshold on the joint-diagonalization criterion decrease
    /// per sweep.
    pub ajd_tol: f64,
    pub ajd_max_sweeps: usize,
    /// Lower bound on the per-sample relevant-feature count; `None` uses
    /// `ceil(sqrt(n))`. Selections below the floor starve the pairwise
    /// intersections that gate transport.
    pub k_m_floor: Option<usize>,
    /// Restarts for the per-sample representative k-means.
    pub kmeans_restarts: usize,
    pub seed: u64,
}

/// Stream index for the per-sample representative k-means (distinct from the
/// community k-means stream).
const SAMPLE_KMEANS_STREAM: u64 = u64::MAX - 1;

impl Default for RelevanceParams {
    fn default() -> Self {
        RelevanceParams {
            bins: 16,
            ridge: 1e-8,
            sigma: None,
            kernel: KernelKind::Gaussian,
            kneedle_sensitivity: 1.0,
            masked_mode: false,
            ajd_tol: 1e-9,
            ajd_max_sweeps: 30,
            k_m_floor: None,
            kmeans_restarts: 10,
            seed: 0,
        }
    }
}

/// Binary permeability tensor stored as per-sample relevant-feature sets.
///
/// `K[i, j, l] = 1` iff feature `l` is relevant to both sample `i` and
/// sample `j`, which makes the first two indices symmetric by construction.
#[derive(Debug, Clone)]
pub struct PermeabilityTensor {
    sets: Vec<Vec<usize>>,
    n_features: usize,
}

impl PermeabilityTensor {
    pub fn from_sets(sets: Vec<Vec<usize>>, n_features: usize) -> Result<PermeabilityTensor> {
        for (m, set) in sets.iter().enumerate() {
            if set.is_empty() {
                return Err(Error::DegenerateSample { sample: m });
            }
            if set.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::Contract(format!(
                    "relevant set of sample {m} must be strictly ascending"
                )));
            }
            if *set.last().unwrap() >= n_features {
                return Err(Error::Contract(format!(
                    "feature index out of range for sample {m}"
                )));
            }
        }
        Ok(PermeabilityTensor { sets, n_features })
    }

    pub fn sample_count(&self) -> usize {
        self.sets.len()
    }

    pub fn feature_count(&self) -> usize {
        self.n_features
    }

    /// Relevant features of sample `m`, ascending.
    pub fn relevant(&self, m: usize) -> &[usize] {
        &self.sets[m]
    }

    pub fn is_relevant(&self, m: usize, feature: usize) -> bool {
        self.sets[m].binary_search(&feature).is_ok()
    }

    /// Sorted intersection of the relevant sets of samples `i` and `j`.
    pub fn shared_features(&self, i: usize, j: usize) -> Vec<usize> {
        let (a, b) = (&self.sets[i], &self.sets[j]);
        let mut out = Vec::with_capacity(a.len().min(b.len()));
        let (mut x, mut y) = (0, 0);
        while x < a.len() && y < b.len() {
            match a[x].cmp(&b[y]) {
                std::cmp::Ordering::Less => x += 1,
                std::cmp::Ordering::Greater => y += 1,
                std::cmp::Ordering::Equal => {
                    out.push(a[x]);
                    x += 1;
                    y += 1;
                }
            }
        }
        out
    }

    /// Indicator row `K[i, j, :]` as 0/1 values.
    pub fn indicator_row(&self, i: usize, j: usize) -> Vec<f64> {
        let shared = self.shared_features(i, j);
        let mut row = vec![0.0; self.n_features];
        for l in shared {
            row[l] = 1.0;
        }
        row
    }

    /// One line per sample: `m<TAB>space-separated relevant indices`.
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for (m, set) in self.sets.iter().enumerate() {
            let idx: Vec<String> = set.iter().map(|l| l.to_string()).collect();
            out.push_str(&format!("{m}\t{}\n", idx.join(" ")));
        }
        out
    }
}

/// Clamps the configured bin count to the Rice rule `ceil(2 N^{1/3})` so the
/// plug-in estimator stays out of its saturation regime at small N.
pub fn effective_bins(bins: usize, samples: usize) -> usize {
    let rice = (2.0 * (samples as f64).cbrt()).ceil() as usize;
    bins.min(rice).max(2)
}

/// Default lower bound on the per-sample relevant-feature count.
pub fn default_k_m_floor(n: usize) -> usize {
    ceil_sqrt(n).max(n.div_ceil(4))
}

fn bin_of(value: f64, min: f64, range: f64, bins: usize) -> usize {
    if range <= 0.0 {
        return 0;
    }
    let b = ((value - min) / range * bins as f64).floor() as isize;
    b.clamp(0, bins as isize - 1) as usize
}

/// Plug-in mutual-information matrix between feature columns (nats).
///
/// Equal-width binning over each column's observed range, paired over
/// samples; each unordered pair is estimated once so the matrix is exactly
/// symmetric. The diagonal holds marginal entropies. In `masked` mode,
/// samples where either paired value equals the missing sentinel (0.0) are
/// dropped from that pair's histogram.
pub fn mutual_info_matrix(d: &Dataset, bins: usize, masked: bool) -> Result<Array2<f64>> {
    if d.sample_count() < 2 {
        return Err(Error::TooFewSamples {
            actual: d.sample_count(),
            required: 2,
        });
    }
    if bins < 2 {
        return Err(Error::param("bins", "need at least 2 bins"));
    }
    let n = d.feature_count();
    let rows = d.sample_count();

    // Per-column bin edges over active values.
    let mut col_min = vec![f64::INFINITY; n];
    let mut col_range = vec![0.0; n];
    for l in 0..n {
        let mut min = f64::INFINITY;
        let mut max = f64::NEG_INFINITY;
        for i in 0..rows {
            let v = d.values[[i, l]];
            if masked && v == 0.0 {
                continue;
            }
            min = min.min(v);
            max = max.max(v);
        }
        if min.is_finite() {
            col_min[l] = min;
            col_range[l] = max - min;
        } else {
            col_min[l] = 0.0;
            col_range[l] = 0.0;
        }
    }

    let binned: Vec<Vec<usize>> = (0..n)
        .map(|l| {
            (0..rows)
                .map(|i| bin_of(d.values[[i, l]], col_min[l], col_range[l], bins))
                .collect()
        })
        .collect();

    let mut w = Array2::zeros((n, n));
    let mut joint = vec![0usize; bins * bins];
    for l1 in 0..n {
        for l2 in l1..n {
            joint.iter_mut().for_each(|c| *c = 0);
            let mut total = 0usize;
            for i in 0..rows {
                if masked && (d.values[[i, l1]] == 0.0 || d.values[[i, l2]] == 0.0) {
                    continue;
                }
                joint[binned[l1][i] * bins + binned[l2][i]] += 1;
                total += 1;
            }
            let mi = if total < 2 {
                0.0
            } else {
                let mut px = vec![0usize; bins];
                let mut py = vec![0usize; bins];
                for bx in 0..bins {
                    for by in 0..bins {
                        let c = joint[bx * bins + by];
                        px[bx] += c;
                        py[by] += c;
                    }
                }
                let t = total as f64;
                let mut mi = 0.0;
                for bx in 0..bins {
                    for by in 0..bins {
                        let c = joint[bx * bins + by];
                        if c > 0 {
                            let pxy = c as f64 / t;
                            mi += pxy * (pxy / ((px[bx] as f64 / t) * (py[by] as f64 / t))).ln();
                        }
                    }
                }
                mi.max(0.0)
            };
            w[[l1, l2]] = mi;
            w[[l2, l1]] = mi;
        }
    }
    Ok(w)
}

/// Median of the pairwise absolute differences of a sample's feature values;
/// the default Gaussian bandwidth.
pub fn median_pairwise_gap(values: &[f64]) -> f64 {
    let n = values.len();
    let mut diffs = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            diffs.push((values[i] - values[j]).abs());
        }
    }
    if diffs.is_empty() {
        return 1.0;
    }
    let mid = diffs.len() / 2;
    diffs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    diffs[mid].max(1e-9)
}

/// Gaussian feature-affinity matrix for one sample row.
pub fn gaussian_kernel_matrix(sample_row: &[f64], sigma: f64) -> Result<Array2<f64>> {
    if sigma <= 0.0 {
        return Err(Error::param("sigma", "must be positive"));
    }
    Ok(kernel_matrix(sample_row, KernelKind::Gaussian, sigma))
}

/// Feature-affinity matrix for one sample row under the chosen kernel.
pub fn kernel_matrix(sample_row: &[f64], kernel: KernelKind, sigma: f64) -> Array2<f64> {
    let n = sample_row.len();
    let mut w = Array2::zeros((n, n));
    for i in 0..n {
        for j in i..n {
            let (a, b) = (sample_row[i], sample_row[j]);
            let v = match kernel {
                KernelKind::Gaussian => {
                    let d = a - b;
                    (-d * d / (2.0 * sigma * sigma)).exp()
                }
                KernelKind::Euclidean => (a - b).abs(),
                KernelKind::Linear { l } => a * b + l,
                KernelKind::Polynomial { a: ka, l, b: kb } => (ka * a * b + l).powf(kb),
            };
            w[[i, j]] = v;
            w[[j, i]] = v;
        }
    }
    w
}

/// Ridge-shifted normalized Laplacian `I - D^{-1/2} W D^{-1/2} + ridge I`.
///
/// Zero-degree rows have their degree replaced by `ridge` so the result
/// stays well defined; asymmetry beyond 1e-9 is a contract violation.
pub fn normalized_laplacian(w: &Array2<f64>, ridge: f64) -> Result<Array2<f64>> {
    let n = w.nrows();
    if w.ncols() != n {
        return Err(Error::Contract("affinity matrix must be square".into()));
    }
    if asymmetry(w) > 1e-9 {
        return Err(Error::Contract("affinity matrix must be symmetric".into()));
    }
    if w.iter().any(|&v| v < 0.0) {
        return Err(Error::Contract("affinity weights must be non-negative".into()));
    }

    let degrees: Vec<f64> = (0..n)
        .map(|i| {
            let s: f64 = w.row(i).sum();
            if s > 0.0 {
                s
            } else {
                ridge
            }
        })
        .collect();

    let mut l = Array2::zeros((n, n));
    for i in 0..n {
        for j in 0..n {
            let norm = w[[i, j]] / (degrees[i] * degrees[j]).sqrt();
            l[[i, j]] = if i == j { 1.0 - norm + ridge } else { -norm };
        }
    }
    Ok(l)
}

/// Result of the approximate joint diagonalization.
#[derive(Debug, Clone)]
pub struct JointDiag {
    /// Joint eigenbasis as unit-norm columns, sorted by the first matrix's
    /// diagonal ascending.
    pub basis: Array2<f64>,
    /// Diagonals of `V^T M V` for the two inputs, in column order.
    pub eigvals: (Array1<f64>, Array1<f64>),
    /// Criterion value before sweeping and after each sweep.
    pub criterion_history: Vec<f64>,
}

/// Log-det joint-diagonality criterion
/// `sum_M log(det diag(V^T M V) / det(V^T M V))`, evaluated from scratch.
pub fn ajd_criterion(m1: &Array2<f64>, m2: &Array2<f64>, v: &Array2<f64>) -> Result<f64> {
    let names: [&'static str; 2] = ["l1", "l2"];
    let mut total = 0.0;
    for (idx, m) in [m1, m2].into_iter().enumerate() {
        let t = v.t().dot(m).dot(v);
        let mut log_diag = 0.0;
        for i in 0..t.nrows() {
            let d = t[[i, i]];
            if d <= 0.0 {
                return Err(Error::NotPositiveDefinite {
                    name: names[idx],
                    index: i,
                    pivot: d,
                });
            }
            log_diag += d.ln();
        }
        total += log_diag - log_det_spd(&t, names[idx])?;
    }
    Ok(total)
}

fn criterion_of_transformed(c1: &Array2<f64>, c2: &Array2<f64>) -> Result<f64> {
    let names: [&'static str; 2] = ["l1", "l2"];
    let mut total = 0.0;
    for (idx, c) in [c1, c2].into_iter().enumerate() {
        let mut log_diag = 0.0;
        for i in 0..c.nrows() {
            let d = c[[i, i]];
            if d <= 0.0 {
                return Err(Error::NotPositiveDefinite {
                    name: names[idx],
                    index: i,
                    pivot: d,
                });
            }
            log_diag += d.ln();
        }
        total += log_diag - log_det_spd(c, names[idx])?;
    }
    Ok(total)
}

/// Approximate joint diagonalization of two symmetric positive definite
/// matrices by iterative pairwise transformations (Pham's method).
///
/// Each 2x2 subproblem is solved in closed form, so the criterion is
/// non-increasing sweep to sweep. Sweeping stops when the per-sweep decrease
/// drops below `tol` or after `max_sweeps`.
pub fn joint_diagonalize(
    l1: &Array2<f64>,
    l2: &Array2<f64>,
    tol: f64,
    max_sweeps: usize,
) -> Result<JointDiag> {
    let n = l1.nrows();
    if l1.ncols() != n || l2.nrows() != n || l2.ncols() != n {
        return Err(Error::Contract("joint diagonalization needs square matrices of equal size".into()));
    }
    // Positive definiteness up front, naming the offending input.
    log_det_spd(l1, "l1")?;
    log_det_spd(l2, "l2")?;

    let mut c1 = l1.clone();
    let mut c2 = l2.clone();
    let mut basis_rows: Array2<f64> = Array2::eye(n); // acts as B M B^T

    let mut history = vec![criterion_of_transformed(&c1, &c2)?];

    if n > 1 {
        for _ in 0..max_sweeps {
            for i in 0..(n - 1) {
                for j in (i + 1)..n {
                    pham_update(&mut c1, &mut c2, &mut basis_rows, i, j)?;
                }
            }
            let crit = criterion_of_transformed(&c1, &c2)?;
            let decrease = history.last().unwrap() - crit;
            history.push(crit);
            if decrease.abs() < tol {
                break;
            }
        }
    }

    // Column-normalized eigenbasis V = B^T with unit columns; the criterion
    // is invariant to per-column scaling.
    let mut norms = vec![0.0; n];
    for r in 0..n {
        let mut s = 0.0;
        for c in 0..n {
            s += basis_rows[[r, c]] * basis_rows[[r, c]];
        }
        norms[r] = s.sqrt().max(1e-300);
    }
    let mut e1: Vec<f64> = (0..n).map(|r| c1[[r, r]] / (norms[r] * norms[r])).collect();
    let mut e2: Vec<f64> = (0..n).map(|r| c2[[r, r]] / (norms[r] * norms[r])).collect();

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| e1[a].partial_cmp(&e1[b]).unwrap());

    let mut basis = Array2::zeros((n, n));
    for (dst, &src) in order.iter().enumerate() {
        for c in 0..n {
            basis[[c, dst]] = basis_rows[[src, c]] / norms[src];
        }
    }
    e1 = order.iter().map(|&s| e1[s]).collect();
    e2 = order.iter().map(|&s| e2[s]).collect();

    Ok(JointDiag {
        basis,
        eigvals: (Array1::from(e1), Array1::from(e2)),
        criterion_history: history,
    })
}

/// Applies the plane transform `rows/cols (i, j) <- T * (i, j)` with
/// `T = [[1, a], [b, 1]]` to a dense row-major n x n buffer.
fn plane_transform(buf: &mut [f64], n: usize, i: usize, j: usize, a: f64, b: f64) {
    let (lo, hi) = if i < j { (i, j) } else { (j, i) };
    let (head, tail) = buf.split_at_mut(hi * n);
    let row_i = &mut head[lo * n..lo * n + n];
    let row_j = &mut tail[..n];
    let (ri, rj) = if i < j {
        (row_i, row_j)
    } else {
        (row_j, row_i)
    };
    for c in 0..n {
        let vi = ri[c];
        let vj = rj[c];
        ri[c] = vi + a * vj;
        rj[c] = vj + b * vi;
    }
    for r in 0..n {
        let base = r * n;
        let vi = buf[base + i];
        let vj = buf[base + j];
        buf[base + i] = vi + a * vj;
        buf[base + j] = vj + b * vi;
    }
}

fn pham_update(
    c1: &mut Array2<f64>,
    c2: &mut Array2<f64>,
    basis_rows: &mut Array2<f64>,
    i: usize,
    j: usize,
) -> Result<()> {
    let n = c1.nrows();
    let names: [&'static str; 2] = ["l1", "l2"];
    let mut g12 = 0.0;
    let mut g21 = 0.0;
    let mut omega12 = 0.0;
    let mut omega21 = 0.0;
    for (idx, c) in [&*c1, &*c2].into_iter().enumerate() {
        let q1 = c[[i, i]];
        let q2 = c[[j, j]];
        let p = c[[i, j]];
        if q1 <= 0.0 || q2 <= 0.0 {
            return Err(Error::NotPositiveDefinite {
                name: names[idx],
                index: if q1 <= 0.0 { i } else { j },
                pivot: q1.min(q2),
            });
        }
        g12 += p / q1;
        g21 += p / q2;
        omega12 += q2 / q1;
        omega21 += q1 / q2;
    }
    g12 *= 0.5;
    g21 *= 0.5;
    omega12 *= 0.5;
    omega21 *= 0.5;

    let omega = (omega12 * omega21).sqrt();
    let t = (omega21 / omega12).sqrt();
    let t1 = (t * g12 + g21) / (omega + 1.0);
    let t2 = (t * g12 - g21) / (omega - 1.0).max(1e-9);
    let h12 = t1 + t2;
    let h21 = (t1 - t2) / t;

    let denom = 1.0 + (1.0 - h12 * h21).max(0.0).sqrt();
    let a = -h12 / denom;
    let b = -h21 / denom;

    plane_transform(c1.as_slice_mut().expect("standard layout"), n, i, j, a, b);
    plane_transform(c2.as_slice_mut().expect("standard layout"), n, i, j, a, b);

    // Basis rows get only the row-side transform.
    let buf = basis_rows.as_slice_mut().expect("standard layout");
    for c in 0..n {
        let vi = buf[i * n + c];
        let vj = buf[j * n + c];
        buf[i * n + c] = vi + a * vj;
        buf[j * n + c] = vj + b * vi;
    }
    Ok(())
}

/// Relevant-feature set for one sample from its joint diagonalization.
///
/// Columns are sorted by the combined eigenvalue curve ascending; the assumed
/// joint null mode (plus anything at the ridge floor) is excluded, the knee
/// of the remaining curve fixes the count, and k-means over the selected
/// eigenvector rows picks one representative feature per cluster (nearest
/// centroid, lowest index on ties).
pub fn select_relevant_features(
    jd: &JointDiag,
    active_features: &[usize],
    ridge: f64,
    sensitivity: f64,
    k_m_floor: usize,
    seed: u64,
    kmeans_restarts: usize,
) -> Result<Vec<usize>> {
    let n = active_features.len();
    if n == 0 {
        return Err(Error::Contract("no active features".into()));
    }
    if n == 1 {
        return Ok(vec![active_features[0]]);
    }

    let combined: Vec<f64> = (0..n)
        .map(|c| jd.eigvals.0[c] + jd.eigvals.1[c])
        .collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| combined[a].partial_cmp(&combined[b]).unwrap());

    // One joint null mode is assumed; anything else at the ridge floor of
    // both Laplacians is null as well.
    let null_floor = 2.0 * ridge + 1e-9;
    let keep: Vec<usize> = order
        .iter()
        .enumerate()
        .filter(|&(rank, &col)| rank > 0 && combined[col] > null_floor)
        .map(|(_, &col)| col)
        .collect();
    let keep = if keep.is_empty() {
        vec![*order.last().unwrap()]
    } else {
        keep
    };

    let curve: Vec<f64> = keep.iter().map(|&c| combined[c]).collect();
    let k_m = knee_index(&curve, sensitivity)
        .unwrap_or_else(|| ceil_sqrt(curve.len()))
        .max(k_m_floor)
        .clamp(1, keep.len());

    // Embed on the K_m leading columns of the sorted basis. The head starts
    // at the (inert, near-constant) null mode; padding with it instead of a
    // bulk direction keeps the k-means split aligned with the informative
    // contrasts when K_m equals the group count.
    let mut embedding = Array2::zeros((n, k_m));
    for (c_dst, &c_src) in order[..k_m].iter().enumerate() {
        for r in 0..n {
            embedding[[r, c_dst]] = jd.basis[[r, c_src]];
        }
    }

    let partition = kmeans(&embedding, k_m, seed, kmeans_restarts)?;
    let mut selected = Vec::with_capacity(partition.k);
    for cluster in 1..=partition.k {
        let members = partition.members_of(cluster);
        let mut centroid = vec![0.0; k_m];
        for &r in &members {
            for c in 0..k_m {
                centroid[c] += embedding[[r, c]];
            }
        }
        for c in centroid.iter_mut() {
            *c /= members.len() as f64;
        }
        let mut best = members[0];
        let mut best_d = f64::INFINITY;
        for &r in &members {
            let mut dd = 0.0;
            for c in 0..k_m {
                let diff = embedding[[r, c]] - centroid[c];
                dd += diff * diff;
            }
            if dd < best_d {
                best_d = dd;
                best = r;
            }
        }
        selected.push(active_features[best]);
    }
    selected.sort_unstable();
    selected.dedup();
    Ok(selected)
}

/// Full per-sample pipeline: kernel graph, MI subgraph, normalized
/// Laplacians, joint diagonalization, knee selection, representatives.
fn sample_relevant_features(
    d: &Dataset,
    w_mi: &Array2<f64>,
    m: usize,
    params: &RelevanceParams,
) -> Result<Vec<usize>> {
    let n = d.feature_count();
    let active: Vec<usize> = if params.masked_mode {
        (0..n).filter(|&l| d.values[[m, l]] != 0.0).collect()
    } else {
        (0..n).collect()
    };
    if active.is_empty() {
        return Err(Error::DegenerateSample { sample: m });
    }
    if active.len() == 1 {
        return Ok(active);
    }

    let row: Vec<f64> = active.iter().map(|&l| d.values[[m, l]]).collect();
    let sigma = params
        .sigma
        .unwrap_or_else(|| median_pairwise_gap(&row));
    let w_gk = match params.kernel {
        KernelKind::Gaussian => gaussian_kernel_matrix(&row, sigma)?,
        other => kernel_matrix(&row, other, sigma),
    };

    let mut w_mi_sub = Array2::zeros((active.len(), active.len()));
    for (a, &la) in active.iter().enumerate() {
        for (b, &lb) in active.iter().enumerate() {
            w_mi_sub[[a, b]] = w_mi[[la, lb]];
        }
    }

    let l_gk = normalized_laplacian(&w_gk, params.ridge)?;
    let l_mi = normalized_laplacian(&w_mi_sub, params.ridge)?;
    let jd = joint_diagonalize(&l_gk, &l_mi, params.ajd_tol, params.ajd_max_sweeps)?;

    // One shared stream for every sample's representative k-means: outputs
    // stay bit-identical under any scheduling, and near-identical samples
    // land in the same optimum instead of decorrelating their selections.
    select_relevant_features(
        &jd,
        &active,
        params.ridge,
        params.kneedle_sensitivity,
        params.k_m_floor.unwrap_or_else(|| default_k_m_floor(active.len())),
        derive_seed(params.seed, SAMPLE_KMEANS_STREAM),
        params.kmeans_restarts,
    )
}

/// Builds the permeability tensor by running the per-sample pipeline for
/// every sample (in parallel; outputs are independent of scheduling).
///
/// The configured bin count is clamped to `ceil(sqrt(N))` so the plug-in MI
/// estimator stays out of its saturation regime on small sample counts.
pub fn build_permeability(d: &Dataset, params: &RelevanceParams) -> Result<PermeabilityTensor> {
    if !is_normalized(d, 1e-9) {
        return Err(Error::Contract(
            "permeability needs a min-max normalized dataset".into(),
        ));
    }
    let bins = effective_bins(params.bins, d.sample_count());
    let w_mi = mutual_info_matrix(d, bins, params.masked_mode)?;
    let sets: Vec<Vec<usize>> = (0..d.sample_count())
        .into_par_iter()
        .map(|m| {
            sample_relevant_features(d, &w_mi, m, params)
                .map_err(|e| e.in_stage("relevance"))
        })
        .collect::<Result<Vec<_>>>()?;
    PermeabilityTensor::from_sets(sets, d.feature_count())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::eigh;
    use ndarray::array;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn dataset_from(values: Array2<f64>) -> Dataset {
        Dataset::from_values(values).unwrap()
    }

    /// Balanced binary patterns: exact zero MI across groups, entropy ln 2.
    fn duplicated_pairs_dataset() -> Dataset {
        let rows = 8;
        let mut values = Array2::zeros((rows, 4));
        for i in 0..rows {
            let u = f64::from(i as u32 / 4 % 2);
            let w = f64::from(i as u32 / 2 % 2);
            values[[i, 0]] = u;
            values[[i, 1]] = u;
            values[[i, 2]] = w;
            values[[i, 3]] = w;
        }
        dataset_from(values)
    }

    #[test]
    fn mi_identical_columns_equal_marginal_entropy() {
        let d = duplicated_pairs_dataset();
        let w = mutual_info_matrix(&d, 16, false).unwrap();
        let ln2 = std::f64::consts::LN_2;
        assert!((w[[0, 1]] - ln2).abs() < 1e-12);
        assert!((w[[0, 0]] - ln2).abs() < 1e-12);
        // Jointly balanced independent patterns: exactly zero.
        assert!(w[[0, 2]].abs() < 1e-12);
    }

    #[test]
    fn mi_constant_column_is_zero() {
        let mut values = Array2::zeros((6, 2));
        for i in 0..6 {
            values[[i, 0]] = 0.3;
            values[[i, 1]] = i as f64 / 5.0;
        }
        let d = dataset_from(values);
        let w = mutual_info_matrix(&d, 8, false).unwrap();
        assert_eq!(w[[0, 0]], 0.0);
        assert_eq!(w[[0, 1]], 0.0);
    }

    #[test]
    fn mi_independent_uniforms_near_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        let n = 10_000;
        let mut values = Array2::zeros((n, 2));
        for i in 0..n {
            values[[i, 0]] = rng.random_range(0.0..1.0);
            values[[i, 1]] = rng.random_range(0.0..1.0);
        }
        let d = dataset_from(values);
        let w = mutual_info_matrix(&d, 16, false).unwrap();
        assert!(w[[0, 1]] < 0.05, "plug-in bias too large: {}", w[[0, 1]]);
    }

    #[test]
    fn mi_matrix_exactly_symmetric() {
        let (d, _) = crate::data::gen_blocks(2, &[10, 10], 8, 0.2, 5).unwrap();
        let w = mutual_info_matrix(&d, 8, false).unwrap();
        for i in 0..8 {
            for j in 0..8 {
                assert_eq!(w[[i, j]], w[[j, i]]);
            }
        }
    }

    #[test]
    fn gaussian_kernel_closed_forms() {
        let sigma = 0.4;
        let row = [0.2, 0.2, 0.2 + sigma * 2f64.sqrt()];
        let w = gaussian_kernel_matrix(&row, sigma).unwrap();
        assert_eq!(w[[0, 0]], 1.0);
        assert_eq!(w[[0, 1]], 1.0);
        assert!((w[[0, 2]] - (-1.0f64).exp()).abs() < 1e-12);
        for v in w.iter() {
            assert!(*v > 0.0 && *v <= 1.0);
        }
        assert!(gaussian_kernel_matrix(&row, 0.0).is_err());
    }

    #[test]
    fn normalized_laplacian_complete_graph() {
        let ridge = 1e-8;
        let w = array![[0.0, 1.0, 1.0], [1.0, 0.0, 1.0], [1.0, 1.0, 0.0]];
        let l = normalized_laplacian(&w, ridge).unwrap();
        let eig = eigh(&l).unwrap();
        assert!((eig.values[0] - ridge).abs() < 1e-12);
        assert!((eig.values[1] - (1.5 + ridge)).abs() < 1e-12);
        assert!((eig.values[2] - (1.5 + ridge)).abs() < 1e-12);
        // PSD floor.
        assert!(eig.values[0] >= ridge - 1e-12);
    }

    #[test]
    fn normalized_laplacian_annihilates_sqrt_degree_vector() {
        let (d, _) = crate::data::gen_blocks(2, &[4, 4], 6, 0.1, 3).unwrap();
        let w = kernel_matrix(&d.values.row(0).to_vec(), KernelKind::Gaussian, 0.3);
        let ridge = 1e-8;
        let l = normalized_laplacian(&w, ridge).unwrap();
        let degrees: Vec<f64> = (0..6).map(|i| w.row(i).sum()).collect();
        for i in 0..6 {
            let mut acc = 0.0;
            for j in 0..6 {
                acc += (l[[i, j]] - if i == j { ridge } else { 0.0 }) * degrees[j].sqrt();
            }
            assert!(acc.abs() < 1e-10);
        }
    }

    #[test]
    fn normalized_laplacian_rejects_asymmetry() {
        let w = array![[0.0, 1.0], [0.5, 0.0]];
        assert!(normalized_laplacian(&w, 1e-8).is_err());
    }

    #[test]
    fn ajd_diagonal_pair_is_stationary() {
        let l1 = Array2::from_diag(&array![1.0, 2.0, 3.0]);
        let l2 = Array2::from_diag(&array![0.5, 1.5, 2.5]);
        let jd = joint_diagonalize(&l1, &l2, 1e-12, 50).unwrap();
        assert!(jd.criterion_history.last().unwrap().abs() <= 1e-12);
        // Unit-norm columns of a signed permutation of the identity.
        for c in 0..3 {
            let mut largest = 0.0f64;
            let mut norm = 0.0;
            for r in 0..3 {
                largest = largest.max(jd.basis[[r, c]].abs());
                norm += jd.basis[[r, c]] * jd.basis[[r, c]];
            }
            assert!((largest - 1.0).abs() < 1e-9);
            assert!((norm - 1.0).abs() < 1e-9);
        }
        // Sorted by the first matrix's diagonal.
        assert!(jd.eigvals.0[0] <= jd.eigvals.0[1]);
    }

    #[test]
    fn ajd_commuting_pair_reaches_zero() {
        // Shared eigenbasis from a random symmetric matrix.
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let n = 8;
        let mut a = Array2::zeros((n, n));
        for i in 0..n {
            for j in 0..=i {
                let x = rng.random_range(-1.0..1.0);
                a[[i, j]] = x;
                a[[j, i]] = x;
            }
        }
        let basis = eigh(&a).unwrap().vectors;
        let spd = |diag: &[f64]| -> Array2<f64> {
            let mut m = Array2::zeros((n, n));
            for i in 0..n {
                for j in 0..n {
                    let mut s = 0.0;
                    for k in 0..n {
                        s += basis[[i, k]] * diag[k] * basis[[j, k]];
                    }
                    m[[i, j]] = s;
                }
            }
            m
        };
        let d1: Vec<f64> = (0..n).map(|i| 0.5 + i as f64).collect();
        let d2: Vec<f64> = (0..n).map(|i| 2.0 + ((i * 7) % n) as f64).collect();
        let jd = joint_diagonalize(&spd(&d1), &spd(&d2), 1e-14, 100).unwrap();
        assert!(
            *jd.criterion_history.last().unwrap() <= 1e-9,
            "criterion {}",
            jd.criterion_history.last().unwrap()
        );
    }

    #[test]
    fn ajd_random_spd_pair_monotone_and_consistent() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let n = 10;
        let mut rand_spd = || {
            let mut g = Array2::zeros((n, n));
            for i in 0..n {
                for j in 0..n {
                    g[[i, j]] = rng.random_range(-1.0..1.0);
                }
            }
            let mut m = g.t().dot(&g);
            for i in 0..n {
                m[[i, i]] += 0.5;
            }
            m
        };
        let l1 = rand_spd();
        let l2 = rand_spd();
        let jd = joint_diagonalize(&l1, &l2, 1e-13, 60).unwrap();
        for w in jd.criterion_history.windows(2) {
            assert!(w[1] <= w[0] + 1e-10, "criterion increased: {w:?}");
        }
        // The recomputed criterion at the returned basis matches the final
        // history entry (both are per-column-scaling invariant).
        let direct = ajd_criterion(&l1, &l2, &jd.basis).unwrap();
        assert!((direct - jd.criterion_history.last().unwrap()).abs() <= 1e-9);
    }

    #[test]
    fn ajd_rejects_indefinite_input() {
        let bad = array![[1.0, 2.0], [2.0, 1.0]];
        let good = Array2::eye(2);
        match joint_diagonalize(&bad, &good, 1e-12, 10) {
            Err(Error::NotPositiveDefinite { name, .. }) => assert_eq!(name, "l1"),
            other => panic!("expected PD failure, got {other:?}"),
        }
        match joint_diagonalize(&good, &bad, 1e-12, 10) {
            Err(Error::NotPositiveDefinite { name, .. }) => assert_eq!(name, "l2"),
            other => panic!("expected PD failure, got {other:?}"),
        }
    }

    #[test]
    fn duplicated_pairs_select_one_representative_each() {
        let d = duplicated_pairs_dataset();
        let params = RelevanceParams::default();
        // Pick a sample whose two group values differ.
        let w_mi = mutual_info_matrix(&d, params.bins, false).unwrap();
        let m = 2; // u = 0, w = 1
        assert_ne!(d.values[[m, 0]], d.values[[m, 2]]);
        let set = sample_relevant_features(&d, &w_mi, m, &params).unwrap();
        assert_eq!(set.len(), 2, "selected {set:?}");
        let group_a = set.iter().filter(|&&l| l < 2).count();
        let group_b = set.iter().filter(|&&l| l >= 2).count();
        assert_eq!((group_a, group_b), (1, 1), "selected {set:?}");
    }

    #[test]
    fn independent_features_fall_back_to_sqrt() {
        // Nine mutually independent balanced patterns; the probe sample has
        // all-equal values so the kernel graph is complete and flat.
        let rows = 512;
        let n = 9;
        let mut values = Array2::zeros((rows, n));
        for i in 0..rows {
            for l in 0..n {
                values[[i, l]] = f64::from((i >> l) as u32 & 1);
            }
        }
        // Overwrite one row with constant 0.5 (pattern keeps column balance
        // near-exact; MI stays ~0 across features).
        for l in 0..n {
            values[[0, l]] = 0.5;
        }
        let d = dataset_from(values);
        let params = RelevanceParams::default();
        let w_mi = mutual_info_matrix(&d, params.bins, false).unwrap();
        let set = sample_relevant_features(&d, &w_mi, 0, &params).unwrap();
        assert_eq!(set.len(), 3); // ceil(sqrt(9))
    }

    #[test]
    fn masked_sample_only_selects_unmasked_features() {
        let (base, _) = crate::data::gen_blocks(2, &[6, 6], 10, 0.2, 9).unwrap();
        let mut values = base.values.clone();
        for l in [1usize, 4, 7] {
            values[[3, l]] = 0.0;
        }
        let d = dataset_from(values);
        let mut params = RelevanceParams::default();
        params.masked_mode = true;
        let w_mi = mutual_info_matrix(&d, params.bins, true).unwrap();
        let set = sample_relevant_features(&d, &w_mi, 3, &params).unwrap();
        assert!(!set.is_empty());
        for l in set {
            assert!(![1usize, 4, 7].contains(&l), "masked feature {l} selected");
        }
    }

    #[test]
    fn permeability_symmetry_and_self_rows() {
        let (d, _) = crate::data::gen_blocks(2, &[5, 5], 8, 0.1, 12).unwrap();
        let tensor = build_permeability(&d, &RelevanceParams::default()).unwrap();
        let n = d.sample_count();
        for i in 0..n {
            assert_eq!(tensor.shared_features(i, i), tensor.relevant(i).to_vec());
            for j in 0..n {
                assert_eq!(
                    tensor.shared_features(i, j),
                    tensor.shared_features(j, i)
                );
                for l in 0..d.feature_count() {
                    let in_row = tensor.indicator_row(i, j)[l] == 1.0;
                    let expect = tensor.is_relevant(i, l) && tensor.is_relevant(j, l);
                    assert_eq!(in_row, expect);
                }
            }
        }
    }

    #[test]
    fn permeability_deterministic_and_exports() {
        let (d, _) = crate::data::gen_blocks(2, &[4, 4], 6, 0.1, 12).unwrap();
        let a = build_permeability(&d, &RelevanceParams::default()).unwrap();
        let b = build_permeability(&d, &RelevanceParams::default()).unwrap();
        for m in 0..d.sample_count() {
            assert_eq!(a.relevant(m), b.relevant(m));
        }
        let tsv = a.to_tsv();
        assert_eq!(tsv.lines().count(), d.sample_count());
        assert!(tsv.starts_with("0\t"));
    }
}
