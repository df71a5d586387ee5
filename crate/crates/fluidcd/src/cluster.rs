//! Spectral community detection on the fluid Laplacian, with heat-diffusion
//! Laplacian baselines for eigengap comparison.

use ndarray::{Array1, Array2};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::data::{normalize_minmax, Dataset};
use crate::error::{Error, Result};
use crate::fluidgraph::{
    build_q, fluid_laplacian, transport_velocity, TransitionMatrix, TransportField,
};
use crate::kneedle::{ceil_sqrt, dominant_knee_index};
use crate::linalg::{asymmetry, eigh, SymEigen};
use crate::relevance::{build_permeability, RelevanceParams};
use crate::seed::derive_seed;

/// Stream index reserved for the community k-means (per-sample relevance
/// streams use indices `0..N`).
const KMEANS_STREAM: u64 = u64::MAX;

/// Spectral embedding on the `k` lowest eigenvectors.
#[derive(Debug, Clone)]
pub struct SpectralEmbedding {
    /// N x k matrix; rows are node coordinates.
    pub coords: Array2<f64>,
    /// Full ascending spectrum of the decomposed matrix.
    pub eigvals: Array1<f64>,
}

/// Disjoint, exhaustive cluster assignment with contiguous ids `1..=k`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    pub labels: Vec<usize>,
    pub k: usize,
}

impl Partition {
    pub fn new(labels: Vec<usize>) -> Result<Partition> {
        let k = labels.iter().copied().max().unwrap_or(0);
        if k == 0 {
            return Err(Error::Contract("empty partition".into()));
        }
        let mut seen = vec![false; k];
        for &l in &labels {
            if l == 0 || l > k {
                return Err(Error::Contract(format!("cluster id {l} outside 1..={k}")));
            }
            seen[l - 1] = true;
        }
        if let Some(idx) = seen.iter().position(|s| !s) {
            return Err(Error::Contract(format!("cluster {} is empty", idx + 1)));
        }
        Ok(Partition { labels, k })
    }

    /// Renumbers clusters by first occurrence, yielding the canonical form.
    pub fn canonicalize(labels: &[usize]) -> Result<Partition> {
        let mut map: Vec<Option<usize>> = vec![None; labels.iter().copied().max().unwrap_or(0)];
        let mut next = 0usize;
        let mut out = Vec::with_capacity(labels.len());
        for &l in labels {
            if l == 0 {
                return Err(Error::Contract("cluster ids are 1-based".into()));
            }
            let id = match map[l - 1] {
                Some(id) => id,
                None => {
                    next += 1;
                    map[l - 1] = Some(next);
                    next
                }
            };
            out.push(id);
        }
        Partition::new(out)
    }

    pub fn members_of(&self, cluster: usize) -> Vec<usize> {
        self.labels
            .iter()
            .enumerate()
            .filter(|(_, &l)| l == cluster)
            .map(|(i, _)| i)
            .collect()
    }
}

/// Heat-diffusion baseline Laplacian flavors.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BaselineKind {
    Unnormalized,
    Normalized,
    SelfTuning,
}

impl BaselineKind {
    pub fn name(&self) -> &'static str {
        match self {
            BaselineKind::Unnormalized => "unnormalized",
            BaselineKind::Normalized => "normalized",
            BaselineKind::SelfTuning => "self_tuning",
        }
    }
}

/// Applies the deterministic sign convention: the largest-magnitude component
/// of each eigenvector is made positive (first index wins ties).
fn canonicalize_signs(vectors: &mut Array2<f64>) {
    let (n, k) = vectors.dim();
    for c in 0..k {
        let mut arg = 0usize;
        let mut best = -1.0f64;
        for r in 0..n {
            let a = vectors[[r, c]].abs();
            if a > best {
                best = a;
                arg = r;
            }
        }
        if vectors[[arg, c]] < 0.0 {
            for r in 0..n {
                vectors[[r, c]] = -vectors[[r, c]];
            }
        }
    }
}

fn embedding_from_eigen(eig: &SymEigen, k: usize) -> SpectralEmbedding {
    let n = eig.values.len();
    let mut coords = Array2::zeros((n, k));
    for c in 0..k {
        for r in 0..n {
            coords[[r, c]] = eig.vectors[[r, c]];
        }
    }
    canonicalize_signs(&mut coords);
    SpectralEmbedding {
        coords,
        eigvals: eig.values.clone(),
    }
}

/// Full symmetric eigendecomposition of `l`, returning the `k` lowest
/// eigenvectors under the deterministic sign convention plus the full
/// ascending spectrum.
pub fn spectral_embed(l: &Array2<f64>, k: usize) -> Result<SpectralEmbedding> {
    let n = l.nrows();
    if k == 0 || k > n {
        return Err(Error::param("k", format!("must lie in 1..={n}")));
    }
    if asymmetry(l) > 1e-9 {
        return Err(Error::Contract(
            "spectral embedding needs a symmetric matrix".into(),
        ));
    }
    let eig = eigh(l)?;
    Ok(embedding_from_eigen(&eig, k))
}

/// Picks the community count from the eigenvalue difference curve via the
/// knee detector; at least 2, capped by `k_max` eigenvalues considered.
pub fn choose_k(eigvals: &[f64], k_max: usize, sensitivity: f64) -> usize {
    let m = k_max.min(eigvals.len());
    let diffs: Vec<f64> = eigvals[..m].windows(2).map(|w| w[1] - w[0]).collect();
    let k = match dominant_knee_index(&diffs, sensitivity) {
        // The knee sits on the dominant gap; the community count is the
        // number of eigenvalues at or below it (1-based gap index).
        Some(g) => g + 1,
        None => ceil_sqrt(diffs.len()),
    };
    k.max(2)
}

/// Seeded k-means with greedy probabilistic (D^2) seeding, Lloyd iterations,
/// and best-of-`restarts` selection. Labels come back canonicalized by first
/// occurrence.
pub fn kmeans(points: &Array2<f64>, k: usize, seed: u64, restarts: usize) -> Result<Partition> {
    let n = points.nrows();
    if k == 0 {
        return Err(Error::param("k", "must be positive"));
    }
    if k > n {
        return Err(Error::param("k", format!("k={k} exceeds {n} points")));
    }
    let restarts = restarts.max(1);

    let mut best: Option<(f64, Vec<usize>)> = None;
    for r in 0..restarts {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, r as u64));
        let (labels, inertia) = lloyd(points, k, &mut rng);
        let better = match &best {
            None => true,
            Some((best_inertia, _)) => inertia < *best_inertia,
        };
        if better {
            best = Some((inertia, labels));
        }
    }
    let (_, labels) = best.expect("at least one restart");
    Partition::canonicalize(&labels.iter().map(|&l| l + 1).collect::<Vec<_>>())
}

fn dist2(points: &Array2<f64>, i: usize, center: &[f64]) -> f64 {
    let mut s = 0.0;
    for (c, &v) in center.iter().enumerate() {
        let d = points[[i, c]] - v;
        s += d * d;
    }
    s
}

fn lloyd(points: &Array2<f64>, k: usize, rng: &mut ChaCha8Rng) -> (Vec<usize>, f64) {
    let (n, dim) = points.dim();
    let mut centers: Vec<Vec<f64>> = Vec::with_capacity(k);

    // D^2 seeding.
    let first = rng.random_range(0..n);
    centers.push(points.row(first).to_vec());
    let mut d2: Vec<f64> = (0..n).map(|i| dist2(points, i, &centers[0])).collect();
    while centers.len() < k {
        let total: f64 = d2.iter().sum();
        let idx = if total > 0.0 {
            let target = rng.random_range(0.0..total);
            let mut acc = 0.0;
            let mut chosen = n - 1;
            for (i, &w) in d2.iter().enumerate() {
                acc += w;
                if acc >= target {
                    chosen = i;
                    break;
                }
            }
            chosen
        } else {
            rng.random_range(0..n)
        };
        centers.push(points.row(idx).to_vec());
        for i in 0..n {
            let nd = dist2(points, i, centers.last().unwrap());
            if nd < d2[i] {
                d2[i] = nd;
            }
        }
    }

    let mut labels = vec![0usize; n];
    let mut inertia = f64::INFINITY;
    for _ in 0..300 {
        // Assignment.
        let mut new_inertia = 0.0;
        for i in 0..n {
            let mut best_c = 0usize;
            let mut best_d = f64::INFINITY;
            for (c, center) in centers.iter().enumerate() {
                let d = dist2(points, i, center);
                if d < best_d {
                    best_d = d;
                    best_c = c;
                }
            }
            labels[i] = best_c;
            new_inertia += best_d;
        }

        // Empty-cluster repair: hand the farthest point to each empty cluster.
        let mut counts = vec![0usize; k];
        for &l in &labels {
            counts[l] += 1;
        }
        for c in 0..k {
            if counts[c] == 0 {
                let mut far_i = 0usize;
                let mut far_d = -1.0;
                for i in 0..n {
                    if counts[labels[i]] > 1 {
                        let d = dist2(points, i, &centers[labels[i]]);
                        if d > far_d {
                            far_d = d;
                            far_i = i;
                        }
                    }
                }
                counts[labels[far_i]] -= 1;
                labels[far_i] = c;
                counts[c] = 1;
            }
        }

        // Update.
        let mut sums = vec![vec![0.0; dim]; k];
        let mut sizes = vec![0usize; k];
        for i in 0..n {
            sizes[labels[i]] += 1;
            for c in 0..dim {
                sums[labels[i]][c] += points[[i, c]];
            }
        }
        for c in 0..k {
            for d in 0..dim {
                centers[c][d] = sums[c][d] / sizes[c] as f64;
            }
        }

        let rel = (inertia - new_inertia).abs() / inertia.abs().max(1e-300);
        let done = new_inertia == 0.0 || rel <= 1e-10;
        inertia = new_inertia;
        if done {
            break;
        }
    }
    (labels, inertia)
}

/// Normalized cut of a partition on the symmetrized transition weights.
pub fn normalized_cut_value(q: &TransitionMatrix, p: &Partition) -> Result<f64> {
    let n = q.len();
    if p.labels.len() != n {
        return Err(Error::Contract("partition size != graph size".into()));
    }
    let s = q.symmetrized();
    let degrees: Vec<f64> = (0..n).map(|i| s.row(i).sum()).collect();

    let mut nc = 0.0;
    for cluster in 1..=p.k {
        let mut vol = 0.0;
        let mut cut = 0.0;
        for i in 0..n {
            if p.labels[i] != cluster {
                continue;
            }
            vol += degrees[i];
            for j in 0..n {
                if p.labels[j] != cluster {
                    cut += s[[i, j]];
                }
            }
        }
        if vol <= 0.0 {
            return Err(Error::ZeroVolume { cluster });
        }
        nc += cut / vol;
    }
    Ok(0.5 * nc)
}

/// `(|λ_{k+1} - λ_k|, |λ_{k+2} - λ_{k+1}|)` on the 1-based ascending spectrum.
pub fn eigengap_report(eigvals: &[f64], k_c: usize) -> Result<(f64, f64)> {
    if k_c == 0 {
        return Err(Error::param("k_c", "must be positive"));
    }
    if eigvals.len() < k_c + 2 {
        return Err(Error::param(
            "eigvals",
            format!("need at least {} eigenvalues, got {}", k_c + 2, eigvals.len()),
        ));
    }
    let gap_k = (eigvals[k_c] - eigvals[k_c - 1]).abs();
    let gap_k1 = (eigvals[k_c + 1] - eigvals[k_c]).abs();
    Ok((gap_k, gap_k1))
}

/// Heat-diffusion baseline affinity and Laplacian spectrum.
///
/// `scale` overrides the Gaussian bandwidth for the global kinds (median
/// pairwise distance when `None`) and the neighbor rank for self-tuning
/// (7th neighbor when `None`).
pub fn baseline_laplacian(
    d: &Dataset,
    kind: BaselineKind,
    scale: Option<f64>,
) -> Result<(Array2<f64>, Array1<f64>)> {
    if !crate::data::is_normalized(d, 1e-9) {
        return Err(Error::Contract(
            "baseline laplacian needs a min-max normalized dataset".into(),
        ));
    }
    let n = d.sample_count();
    let mut dist = Array2::zeros((n, n));
    for i in 0..n {
        for j in (i + 1)..n {
            let mut s = 0.0;
            for c in 0..d.feature_count() {
                let diff = d.values[[i, c]] - d.values[[j, c]];
                s += diff * diff;
            }
            let dd = s.sqrt();
            dist[[i, j]] = dd;
            dist[[j, i]] = dd;
        }
    }

    let w = match kind {
        BaselineKind::Unnormalized | BaselineKind::Normalized => {
            let sigma = match scale {
                Some(s) if s > 0.0 => s,
                Some(_) => return Err(Error::param("sigma", "must be positive")),
                None => {
                    let mut all: Vec<f64> = Vec::with_capacity(n * (n - 1) / 2);
                    for i in 0..n {
                        for j in (i + 1)..n {
                            all.push(dist[[i, j]]);
                        }
                    }
                    all.sort_by(|a, b| a.partial_cmp(b).unwrap());
                    all[all.len() / 2].max(1e-9)
                }
            };
            let mut w = Array2::zeros((n, n));
            for i in 0..n {
                for j in 0..n {
                    if i != j {
                        let dd = dist[[i, j]];
                        w[[i, j]] = (-dd * dd / (2.0 * sigma * sigma)).exp();
                    }
                }
            }
            w
        }
        BaselineKind::SelfTuning => {
            let rank = scale.map(|s| s as usize).unwrap_or(7);
            if n < rank + 1 {
                return Err(Error::param(
                    "self_tuning",
                    format!("needs at least {} samples for the {rank}th neighbor", rank + 1),
                ));
            }
            let mut local = vec![0.0; n];
            for i in 0..n {
                let mut row: Vec<f64> = (0..n).filter(|&j| j != i).map(|j| dist[[i, j]]).collect();
                row.sort_by(|a, b| a.partial_cmp(b).unwrap());
                local[i] = row[rank - 1].max(1e-9);
            }
            let mut w = Array2::zeros((n, n));
            for i in 0..n {
                for j in 0..n {
                    if i != j {
                        let dd = dist[[i, j]];
                        w[[i, j]] = (-dd * dd / (local[i] * local[j])).exp();
                    }
                }
            }
            w
        }
    };

    let degrees: Vec<f64> = (0..n).map(|i| w.row(i).sum()).collect();
    let mut l = Array2::zeros((n, n));
    match kind {
        BaselineKind::Unnormalized => {
            for i in 0..n {
                for j in 0..n {
                    l[[i, j]] = if i == j { degrees[i] } else { -w[[i, j]] };
                }
            }
        }
        BaselineKind::Normalized | BaselineKind::SelfTuning => {
            for i in 0..n {
                if degrees[i] <= 0.0 {
                    return Err(Error::ZeroDegree { node: i });
                }
            }
            for i in 0..n {
                for j in 0..n {
                    let norm = w[[i, j]] / (degrees[i] * degrees[j]).sqrt();
                    l[[i, j]] = if i == j { 1.0 - norm } else { -norm };
                }
            }
        }
    }

    let eig = eigh(&l)?;
    Ok((l, eig.values))
}

/// Pipeline parameters for community detection.
#[derive(Debug, Clone)]
pub struct DetectParams {
    pub relevance: RelevanceParams,
    /// Uniform diffusivity level (kernel temperature) for the transport
    /// field.
    pub diffusivity: f64,
    /// Restarts for the community k-means.
    pub restarts: usize,
    /// Number of leading eigenvalues the community-count knee may consider.
    pub k_max: Option<usize>,
    /// Force the community count instead of selecting it from the spectrum.
    pub force_k: Option<usize>,
}

impl Default for DetectParams {
    fn default() -> Self {
        DetectParams {
            relevance: RelevanceParams::default(),
            diffusivity: 0.1,
            restarts: 10,
            k_max: None,
            force_k: None,
        }
    }
}

/// Diagnostics emitted alongside a detection.
#[derive(Debug, Clone)]
pub struct Diagnostics {
    /// Ascending spectrum of the normalized fluid Laplacian.
    pub eigvals_fnorm: Array1<f64>,
    /// Ascending spectrum of the unnormalized fluid Laplacian.
    pub eigvals_f: Array1<f64>,
    pub k_f: usize,
    pub nc: f64,
}

/// Full detection output: partition, embedding, transition matrix, and
/// diagnostics.
#[derive(Debug, Clone)]
pub struct Detection {
    pub partition: Partition,
    pub embedding: SpectralEmbedding,
    pub q: TransitionMatrix,
    pub diagnostics: Diagnostics,
}

/// Runs the full fluid pipeline: normalize, permeability, transport,
/// transition matrix, fluid Laplacian, spectral embedding, community-count
/// selection, k-means.
pub fn detect_communities(d: &Dataset, params: &DetectParams) -> Result<Detection> {
    let norm = normalize_minmax(d);
    let tensor =
        build_permeability(&norm, &params.relevance).map_err(|e| e.in_stage("permeability"))?;
    let v = transport_velocity(&norm, &tensor).map_err(|e| e.in_stage("transport"))?;
    let q = build_q(&TransportField::with_uniform_level(v, params.diffusivity))
        .map_err(|e| e.in_stage("transition"))?;
    let lap = fluid_laplacian(&q).map_err(|e| e.in_stage("laplacian"))?;

    let eig_fnorm = eigh(&lap.f_norm).map_err(|e| e.in_stage("spectral"))?;
    let eig_f = eigh(&lap.f).map_err(|e| e.in_stage("spectral"))?;

    let n = norm.sample_count();
    let k_f = match params.force_k {
        Some(k) => k.clamp(2, n),
        None => choose_k(
            eig_fnorm.values.as_slice().unwrap(),
            params.k_max.unwrap_or(n),
            params.relevance.kneedle_sensitivity,
        )
        .min(n),
    };

    let embedding = embedding_from_eigen(&eig_fnorm, k_f);
    let partition = kmeans(
        &embedding.coords,
        k_f,
        derive_seed(params.relevance.seed, KMEANS_STREAM),
        params.restarts,
    )
    .map_err(|e| e.in_stage("kmeans"))?;
    let nc = normalized_cut_value(&q, &partition).map_err(|e| e.in_stage("cut"))?;

    Ok(Detection {
        partition,
        embedding,
        q,
        diagnostics: Diagnostics {
            eigvals_fnorm: eig_fnorm.values,
            eigvals_f: eig_f.values,
            k_f,
            nc,
        },
    })
}

/// Baseline detection output.
#[derive(Debug, Clone)]
pub struct BaselineDetection {
    pub partition: Partition,
    pub eigvals: Array1<f64>,
    pub k: usize,
}

/// Heat-diffusion counterpart of [`detect_communities`]: baseline Laplacian,
/// spectral embedding, knee-selected k, k-means.
pub fn detect_communities_baseline(
    d: &Dataset,
    kind: BaselineKind,
    params: &DetectParams,
) -> Result<BaselineDetection> {
    let norm = normalize_minmax(d);
    let (l, eigvals) = baseline_laplacian(&norm, kind, None)?;
    let n = norm.sample_count();
    let k = match params.force_k {
        Some(k) => k.clamp(2, n),
        None => choose_k(
            eigvals.as_slice().unwrap(),
            params.k_max.unwrap_or(n),
            params.relevance.kneedle_sensitivity,
        )
        .min(n),
    };
    let eig = eigh(&l)?;
    let embedding = embedding_from_eigen(&eig, k);
    let partition = kmeans(
        &embedding.coords,
        k,
        derive_seed(params.relevance.seed, KMEANS_STREAM),
        params.restarts,
    )?;
    Ok(BaselineDetection {
        partition,
        eigvals,
        k,
    })
}
