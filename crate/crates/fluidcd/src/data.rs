//! Dataset ingestion, normalization, synthetic generation, and perturbation
//! protocols (missing features, class imbalance, appended noise features).

use std::fs;
use std::path::Path;

use ndarray::{Array2, ArrayView1, Axis};
use rand::prelude::*;
use rand::seq::index::sample as sample_indices;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::seed::derive_seed;

/// Minimum sample count required by the transition-matrix construction
/// (the off-neighborhood average needs at least one third node).
pub const MIN_SAMPLES: usize = 3;

/// A numeric dataset of `N` samples by `n` features.
///
/// Downstream stages expect min–max normalized values; missing entries are
/// represented as exact `0.0` once a missing-data protocol has been applied.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub values: Array2<f64>,
    pub feature_names: Vec<String>,
}

impl Dataset {
    pub fn new(values: Array2<f64>, feature_names: Vec<String>) -> Result<Dataset> {
        if values.nrows() < MIN_SAMPLES {
            return Err(Error::TooFewSamples {
                actual: values.nrows(),
                required: MIN_SAMPLES,
            });
        }
        if feature_names.len() != values.ncols() {
            return Err(Error::Contract(format!(
                "{} feature names for {} columns",
                feature_names.len(),
                values.ncols()
            )));
        }
        if let Some((i, j)) = first_non_finite(&values) {
            return Err(Error::Contract(format!(
                "non-finite value at sample {i}, feature {j}"
            )));
        }
        Ok(Dataset {
            values,
            feature_names,
        })
    }

    /// Builds a dataset with synthesized feature names `f0..f{n-1}`.
    pub fn from_values(values: Array2<f64>) -> Result<Dataset> {
        let names = (0..values.ncols()).map(|j| format!("f{j}")).collect();
        Dataset::new(values, names)
    }

    pub fn sample_count(&self) -> usize {
        self.values.nrows()
    }

    pub fn feature_count(&self) -> usize {
        self.values.ncols()
    }

    pub fn sample(&self, i: usize) -> ArrayView1<'_, f64> {
        self.values.row(i)
    }
}

fn first_non_finite(values: &Array2<f64>) -> Option<(usize, usize)> {
    for ((i, j), v) in values.indexed_iter() {
        if !v.is_finite() {
            return Some((i, j));
        }
    }
    None
}

/// Ground-truth class assignment with contiguous ids `1..=k_c`.
#[derive(Debug, Clone)]
pub struct GroundTruth {
    pub labels: Vec<usize>,
    pub k_c: usize,
}

impl GroundTruth {
    pub fn new(labels: Vec<usize>, k_c: usize) -> Result<GroundTruth> {
        let mut seen = vec![false; k_c];
        for (i, &l) in labels.iter().enumerate() {
            if l == 0 || l > k_c {
                return Err(Error::Contract(format!(
                    "label {l} at sample {i} outside 1..={k_c}"
                )));
            }
            seen[l - 1] = true;
        }
        if let Some(missing) = seen.iter().position(|s| !s) {
            return Err(Error::Contract(format!("class {} is empty", missing + 1)));
        }
        Ok(GroundTruth { labels, k_c })
    }

    /// Remaps arbitrary integer labels to contiguous `1..=k_c` (sorted by
    /// raw value).
    pub fn from_raw(raw: &[i64]) -> Result<GroundTruth> {
        let mut distinct: Vec<i64> = raw.to_vec();
        distinct.sort_unstable();
        distinct.dedup();
        let labels = raw
            .iter()
            .map(|v| distinct.binary_search(v).unwrap() + 1)
            .collect();
        GroundTruth::new(labels, distinct.len())
    }

    /// Sample indices belonging to class `class` (1-based).
    pub fn members_of(&self, class: usize) -> Vec<usize> {
        self.labels
            .iter()
            .enumerate()
            .filter(|(_, &l)| l == class)
            .map(|(i, _)| i)
            .collect()
    }
}

/// Marks which feature columns of an augmented dataset are injected noise.
#[derive(Debug, Clone)]
pub struct CorruptionRecord {
    /// Zero-based column indices of the injected features.
    pub injected_indices: Vec<usize>,
    pub snr_db: f64,
}

impl CorruptionRecord {
    pub fn is_injected(&self, feature: usize) -> bool {
        self.injected_indices.binary_search(&feature).is_ok()
    }
}

/// Loads a comma-separated numeric table.
///
/// `has_header` skips one header row (used for feature names); `has_labels`
/// treats the final column as integer class labels, remapped to contiguous
/// `1..=k_c`. Error coordinates are 1-based file positions.
pub fn load_csv(
    path: &Path,
    has_header: bool,
    has_labels: bool,
) -> Result<(Dataset, Option<GroundTruth>)> {
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;

    let mut names: Option<Vec<String>> = None;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut raw_labels: Vec<i64> = Vec::new();
    let mut width: Option<usize> = None;

    for (line_no, line) in text.lines().enumerate() {
        let row = line_no + 1;
        if line.trim().is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(',').map(str::trim).collect();
        if has_header && names.is_none() && rows.is_empty() {
            let mut header: Vec<String> = cells.iter().map(|s| s.to_string()).collect();
            if has_labels {
                header.pop();
            }
            names = Some(header);
            continue;
        }
        match width {
            None => width = Some(cells.len()),
            Some(w) if w != cells.len() => {
                return Err(Error::Parse {
                    row,
                    col: cells.len().min(w) + 1,
                    reason: format!("ragged row: expected {w} cells, found {}", cells.len()),
                });
            }
            _ => {}
        }
        let ncols = cells.len();
        if has_labels && ncols < 2 {
            return Err(Error::Parse {
                row,
                col: 1,
                reason: "need at least one feature column plus a label column".into(),
            });
        }
        let feature_cells = if has_labels { ncols - 1 } else { ncols };
        let mut vals = Vec::with_capacity(feature_cells);
        for (c, cell) in cells[..feature_cells].iter().enumerate() {
            let v: f64 = cell.parse().map_err(|_| Error::Parse {
                row,
                col: c + 1,
                reason: format!("non-numeric cell {cell:?}"),
            })?;
            vals.push(v);
        }
        if has_labels {
            let cell = cells[ncols - 1];
            let l: i64 = cell.parse().map_err(|_| Error::Parse {
                row,
                col: ncols,
                reason: format!("non-integer label {cell:?}"),
            })?;
            raw_labels.push(l);
        }
        rows.push(vals);
    }

    let n_rows = rows.len();
    if n_rows < MIN_SAMPLES {
        return Err(Error::TooFewSamples {
            actual: n_rows,
            required: MIN_SAMPLES,
        });
    }
    let n_cols = rows[0].len();
    let mut values = Array2::zeros((n_rows, n_cols));
    for (i, r) in rows.iter().enumerate() {
        for (j, &v) in r.iter().enumerate() {
            values[[i, j]] = v;
        }
    }
    let names = names.unwrap_or_else(|| (0..n_cols).map(|j| format!("f{j}")).collect());
    let dataset = Dataset::new(values, names)?;
    let gt = if has_labels {
        Some(GroundTruth::from_raw(&raw_labels)?)
    } else {
        None
    };
    Ok((dataset, gt))
}

/// Per-column affine map onto `[0, 1]`; constant columns map to all zeros.
/// Idempotent.
pub fn normalize_minmax(d: &Dataset) -> Dataset {
    let mut values = d.values.clone();
    for mut col in values.axis_iter_mut(Axis(1)) {
        let min = col.iter().cloned().fold(f64::INFINITY, f64::min);
        let max = col.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let range = max - min;
        if range > 0.0 {
            col.mapv_inplace(|v| (v - min) / range);
        } else {
            col.fill(0.0);
        }
    }
    Dataset {
        values,
        feature_names: d.feature_names.clone(),
    }
}

/// True when every entry already lies in `[-tol, 1 + tol]`.
pub fn is_normalized(d: &Dataset, tol: f64) -> bool {
    d.values.iter().all(|&v| v >= -tol && v <= 1.0 + tol)
}

/// Generates `k` Gaussian blocks around seeded uniform prototypes, then
/// min–max normalizes. Labels are `1..=k` in block order.
pub fn gen_blocks(
    k: usize,
    sizes: &[usize],
    n: usize,
    noise_sd: f64,
    seed: u64,
) -> Result<(Dataset, GroundTruth)> {
    if k < 2 {
        return Err(Error::param("k", "need at least 2 clusters"));
    }
    if sizes.len() != k {
        return Err(Error::param("sizes", format!("expected {k} entries")));
    }
    if sizes.iter().any(|&s| s == 0) {
        return Err(Error::param("sizes", "every cluster needs at least 1 sample"));
    }
    if noise_sd < 0.0 {
        return Err(Error::param("noise_sd", "must be non-negative"));
    }
    let total: usize = sizes.iter().sum();
    if total < MIN_SAMPLES {
        return Err(Error::TooFewSamples {
            actual: total,
            required: MIN_SAMPLES,
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut prototypes = Array2::zeros((k, n));
    for c in 0..k {
        for j in 0..n {
            prototypes[[c, j]] = rng.random_range(0.0..1.0);
        }
    }

    let mut values = Array2::zeros((total, n));
    let mut labels = Vec::with_capacity(total);
    let mut row = 0;
    for (c, &size) in sizes.iter().enumerate() {
        for _ in 0..size {
            for j in 0..n {
                let noise: f64 = rng.sample(StandardNormal);
                values[[row, j]] = prototypes[[c, j]] + noise_sd * noise;
            }
            labels.push(c + 1);
            row += 1;
        }
    }

    let dataset = normalize_minmax(&Dataset::from_values(values)?);
    Ok((dataset, GroundTruth::new(labels, k)?))
}

/// Default base noise scale of the toy generator; a seeded 30% of features
/// carry five times this.
pub const TOY_BASE_SD: f64 = 0.02;

/// The 15-sample, 77-feature, 3-class toy dataset with per-feature
/// non-uniform noise: a seeded 30% of features carry a 5x noise scale.
pub fn gen_toy_appendix_d(seed: u64) -> (Dataset, GroundTruth) {
    gen_toy_scaled(seed, TOY_BASE_SD)
}

/// [`gen_toy_appendix_d`] with a configurable base noise scale.
pub fn gen_toy_scaled(seed: u64, base_sd: f64) -> (Dataset, GroundTruth) {
    const N_FEATURES: usize = 77;
    const SIZES: [usize; 3] = [8, 3, 4];
    const LOUD_FACTOR: f64 = 5.0;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut prototypes = Array2::zeros((3, N_FEATURES));
    for c in 0..3 {
        for j in 0..N_FEATURES {
            prototypes[[c, j]] = rng.random_range(0.0..1.0);
        }
    }

    let loud_count = (0.3 * N_FEATURES as f64).floor() as usize;
    let loud = sample_indices(&mut rng, N_FEATURES, loud_count);
    let mut scale = vec![base_sd; N_FEATURES];
    for j in loud {
        scale[j] = base_sd * LOUD_FACTOR;
    }

    let total: usize = SIZES.iter().sum();
    let mut values = Array2::zeros((total, N_FEATURES));
    let mut labels = Vec::with_capacity(total);
    let mut row = 0;
    for (c, &size) in SIZES.iter().enumerate() {
        for _ in 0..size {
            for j in 0..N_FEATURES {
                let noise: f64 = rng.sample(StandardNormal);
                values[[row, j]] = prototypes[[c, j]] + scale[j] * noise;
            }
            labels.push(c + 1);
            row += 1;
        }
    }

    let dataset = normalize_minmax(&Dataset::from_values(values).expect("fixed shape"));
    let gt = GroundTruth::new(labels, 3).expect("fixed labels");
    (dataset, gt)
}

/// Zeroes `floor(m_p * n)` seeded feature indices independently for every
/// sample.
pub fn apply_missing(d: &Dataset, m_p: f64, seed: u64) -> Result<Dataset> {
    if !(0.0..1.0).contains(&m_p) {
        return Err(Error::param("m_p", "must lie in [0, 1)"));
    }
    let n = d.feature_count();
    let count = (m_p * n as f64).floor() as usize;
    let mut values = d.values.clone();
    if count > 0 {
        for i in 0..d.sample_count() {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, i as u64));
            for j in sample_indices(&mut rng, n, count) {
                values[[i, j]] = 0.0;
            }
        }
    }
    Ok(Dataset {
        values,
        feature_names: d.feature_names.clone(),
    })
}

/// Resamples the dataset so `target_class` occupies `target_frac` of the rows
/// and the remainder is spread uniformly over the other classes.
///
/// Row count is preserved. Classes draw without replacement when their pool
/// is large enough, with replacement otherwise.
pub fn apply_imbalance(
    d: &Dataset,
    gt: &GroundTruth,
    target_class: usize,
    target_frac: f64,
    seed: u64,
) -> Result<(Dataset, GroundTruth)> {
    if gt.k_c < 2 {
        return Err(Error::Protocol("imbalance needs at least 2 classes".into()));
    }
    if target_class == 0 || target_class > gt.k_c {
        return Err(Error::param("target_class", "class not present"));
    }
    if !(0.0..1.0).contains(&target_frac) || target_frac == 0.0 {
        return Err(Error::param("target_frac", "must lie in (0, 1)"));
    }
    if gt.labels.len() != d.sample_count() {
        return Err(Error::Contract("label count != sample count".into()));
    }

    let total = d.sample_count();
    let n_target = (target_frac * total as f64).round() as usize;
    let n_target = n_target.clamp(1, total - (gt.k_c - 1));
    let others: Vec<usize> = (1..=gt.k_c).filter(|&c| c != target_class).collect();
    let remainder = total - n_target;
    let base = remainder / others.len();
    let extra = remainder % others.len();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let take = |class: usize, count: usize, rng: &mut ChaCha8Rng| -> Vec<usize> {
        let pool = gt.members_of(class);
        if count <= pool.len() {
            let idx = sample_indices(rng, pool.len(), count);
            idx.iter().map(|i| pool[i]).collect()
        } else {
            (0..count)
                .map(|_| pool[rng.random_range(0..pool.len())])
                .collect()
        }
    };

    let mut chosen: Vec<(usize, usize)> = Vec::with_capacity(total);
    for row in take(target_class, n_target, &mut rng) {
        chosen.push((row, target_class));
    }
    for (pos, &class) in others.iter().enumerate() {
        let count = base + usize::from(pos < extra);
        for row in take(class, count, &mut rng) {
            chosen.push((row, class));
        }
    }

    let mut values = Array2::zeros((total, d.feature_count()));
    let mut labels = Vec::with_capacity(total);
    for (dst, &(src, class)) in chosen.iter().enumerate() {
        values.row_mut(dst).assign(&d.values.row(src));
        labels.push(class);
    }
    let dataset = Dataset {
        values,
        feature_names: d.feature_names.clone(),
    };
    Ok((dataset, GroundTruth::new(labels, gt.k_c)?))
}

/// Appends `ceil(frac * n)` Gaussian noise columns at the stated SNR (dB)
/// relative to the mean signal power of the original columns, then min–max
/// normalizes the augmented dataset.
pub fn append_noise_features(
    d: &Dataset,
    frac: f64,
    snr_db: f64,
    seed: u64,
) -> Result<(Dataset, CorruptionRecord)> {
    if frac <= 0.0 {
        return Err(Error::param("frac", "must be positive"));
    }
    let n = d.feature_count();
    let count = (frac * n as f64).ceil() as usize;
    let mean_power = d.values.iter().map(|v| v * v).sum::<f64>() / d.values.len() as f64;
    let noise_sd = (mean_power * 10f64.powf(-snr_db / 10.0)).sqrt();

    let rows = d.sample_count();
    let mut values = Array2::zeros((rows, n + count));
    values.slice_mut(ndarray::s![.., ..n]).assign(&d.values);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for j in 0..count {
        for i in 0..rows {
            let z: f64 = rng.sample(StandardNormal);
            values[[i, n + j]] = noise_sd * z;
        }
    }

    let mut names = d.feature_names.clone();
    names.extend((0..count).map(|j| format!("noise{j}")));
    let dataset = normalize_minmax(&Dataset::new(values, names)?);
    let record = CorruptionRecord {
        injected_indices: (n..n + count).collect(),
        snr_db,
    };
    Ok((dataset, record))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_temp(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    #[test]
    fn load_csv_direct_readback() {
        let f = write_temp("0,1\n1,0\n0.5,0.5\n");
        let (d, gt) = load_csv(f.path(), false, false).unwrap();
        assert_eq!(d.sample_count(), 3);
        assert_eq!(d.feature_count(), 2);
        assert!(gt.is_none());
        assert_eq!(d.values[[2, 0]], 0.5);
    }

    #[test]
    fn load_csv_labels_remap() {
        let f = write_temp("0,1,7\n1,0,7\n0.5,0.5,3\n0.2,0.2,9\n");
        let (d, gt) = load_csv(f.path(), false, true).unwrap();
        let gt = gt.unwrap();
        assert_eq!(d.feature_count(), 2);
        assert_eq!(gt.k_c, 3);
        assert_eq!(gt.labels, vec![2, 2, 1, 3]);
    }

    #[test]
    fn load_csv_reports_bad_cell_coordinates() {
        let f = write_temp("0,1\nabc,2\n3,4\n");
        match load_csv(f.path(), false, false) {
            Err(Error::Parse { row, col, .. }) => {
                assert_eq!((row, col), (2, 1));
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn load_csv_reports_ragged_row() {
        let f = write_temp("0,1\n1\n2,3\n");
        assert!(matches!(
            load_csv(f.path(), false, false),
            Err(Error::Parse { row: 2, .. })
        ));
    }

    #[test]
    fn load_csv_too_small() {
        let f = write_temp("0,1\n1,0\n");
        assert!(matches!(
            load_csv(f.path(), false, false),
            Err(Error::TooFewSamples { actual: 2, .. })
        ));
    }

    #[test]
    fn normalize_affine_and_constant() {
        let d = Dataset::from_values(ndarray::array![[2.0, 5.0], [4.0, 5.0], [6.0, 5.0]]).unwrap();
        let n = normalize_minmax(&d);
        assert_eq!(n.values.column(0).to_vec(), vec![0.0, 0.5, 1.0]);
        assert_eq!(n.values.column(1).to_vec(), vec![0.0, 0.0, 0.0]);
    }

    #[test]
    fn normalize_idempotent() {
        let (d, _) = gen_blocks(2, &[5, 5], 7, 0.3, 9).unwrap();
        let once = normalize_minmax(&d);
        let twice = normalize_minmax(&once);
        for (a, b) in once.values.iter().zip(twice.values.iter()) {
            assert!((a - b).abs() <= 1e-15);
        }
    }

    #[test]
    fn gen_blocks_zero_noise_duplicates_within_class() {
        let (d, gt) = gen_blocks(2, &[2, 2], 4, 0.0, 3).unwrap();
        assert_eq!(d.sample_count(), 4);
        assert_eq!(gt.labels, vec![1, 1, 2, 2]);
        assert_eq!(d.values.row(0), d.values.row(1));
        assert_eq!(d.values.row(2), d.values.row(3));
        assert_ne!(d.values.row(0), d.values.row(2));
    }

    #[test]
    fn gen_blocks_deterministic() {
        let (a, _) = gen_blocks(3, &[4, 4, 4], 10, 0.05, 77).unwrap();
        let (b, _) = gen_blocks(3, &[4, 4, 4], 10, 0.05, 77).unwrap();
        assert_eq!(a.values, b.values);
    }

    #[test]
    fn gen_blocks_within_class_tighter_than_between() {
        let (d, gt) = gen_blocks(3, &[8, 3, 4], 77, 0.05, 5).unwrap();
        let mut within = (0.0, 0usize);
        let mut between = (0.0, 0usize);
        for i in 0..d.sample_count() {
            for j in (i + 1)..d.sample_count() {
                let dist = d
                    .values
                    .row(i)
                    .iter()
                    .zip(d.values.row(j).iter())
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt();
                if gt.labels[i] == gt.labels[j] {
                    within = (within.0 + dist, within.1 + 1);
                } else {
                    between = (between.0 + dist, between.1 + 1);
                }
            }
        }
        assert!(within.0 / (within.1 as f64) < between.0 / (between.1 as f64));
    }

    #[test]
    fn gen_blocks_rejects_tiny_totals() {
        assert!(matches!(
            gen_blocks(2, &[1, 1], 4, 0.0, 1),
            Err(Error::TooFewSamples { .. })
        ));
    }

    #[test]
    fn toy_shape_and_determinism() {
        let (d, gt) = gen_toy_appendix_d(1);
        assert_eq!((d.sample_count(), d.feature_count()), (15, 77));
        assert_eq!(gt.k_c, 3);
        let counts: Vec<usize> = (1..=3).map(|c| gt.members_of(c).len()).collect();
        assert_eq!(counts, vec![8, 3, 4]);
        let (d2, _) = gen_toy_appendix_d(1);
        assert_eq!(d.values, d2.values);
    }

    #[test]
    fn missing_zero_fraction_is_identity() {
        let (d, _) = gen_blocks(2, &[3, 3], 10, 0.1, 4).unwrap();
        let m = apply_missing(&d, 0.0, 11).unwrap();
        assert_eq!(d.values, m.values);
    }

    #[test]
    fn missing_count_per_row() {
        // Strictly positive entries so every zeroed cell is detectable.
        let mut values = Array2::zeros((6, 20));
        for ((i, j), v) in values.indexed_iter_mut() {
            *v = 0.2 + 0.7 * ((i * 20 + j) as f64 / 120.0);
        }
        let d = Dataset::from_values(values).unwrap();
        let m = apply_missing(&d, 0.1, 11).unwrap();
        for i in 0..m.sample_count() {
            let zeroed = m.values.row(i).iter().filter(|v| **v == 0.0).count();
            assert_eq!(zeroed, 2, "row {i}");
        }
        let m2 = apply_missing(&d, 0.1, 11).unwrap();
        assert_eq!(m.values, m2.values);
    }

    #[test]
    fn imbalance_hits_target_share() {
        let (d, gt) = gen_blocks(3, &[10, 10, 10], 6, 0.05, 8).unwrap();
        let (d2, gt2) = apply_imbalance(&d, &gt, 2, 0.6, 21).unwrap();
        assert_eq!(d2.sample_count(), 30);
        assert_eq!(d2.feature_count(), d.feature_count());
        let share = gt2.members_of(2).len() as f64 / 30.0;
        assert!((share - 0.6).abs() <= 1.0 / 30.0 + 1e-12);
        let others: Vec<usize> = [1usize, 3]
            .iter()
            .map(|&c| gt2.members_of(c).len())
            .collect();
        assert!(others[0].abs_diff(others[1]) <= 1);
        let (d3, _) = apply_imbalance(&d, &gt, 2, 0.6, 21).unwrap();
        assert_eq!(d2.values, d3.values);
    }

    #[test]
    fn imbalance_needs_two_classes() {
        let (d, _) = gen_blocks(2, &[3, 3], 4, 0.05, 8).unwrap();
        let gt = GroundTruth::new(vec![1; 6], 1).unwrap();
        assert!(matches!(
            apply_imbalance(&d, &gt, 1, 0.6, 1),
            Err(Error::Protocol(_))
        ));
    }

    #[test]
    fn noise_feature_counts_use_ceiling() {
        let (d, _) = gen_blocks(3, &[8, 8, 8], 151, 0.05, 2).unwrap();
        let (aug, rec) = append_noise_features(&d, 0.3, 20.0, 13).unwrap();
        assert_eq!(rec.injected_indices.len(), 46);
        assert_eq!(aug.feature_count(), 151 + 46);

        let (d2, _) = gen_blocks(3, &[8, 8, 8], 12, 0.05, 2).unwrap();
        let (aug2, rec2) = append_noise_features(&d2, 0.3, 20.0, 13).unwrap();
        assert_eq!(rec2.injected_indices.len(), 4);
        assert_eq!(aug2.feature_count(), 16);
        assert!(rec2.is_injected(12));
        assert!(!rec2.is_injected(11));
    }
}
