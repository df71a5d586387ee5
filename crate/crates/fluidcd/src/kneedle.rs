//! Knee-point detection on curves (kneedle).
//!
//! Used twice in the pipeline: to pick the per-sample relevant-feature count
//! from a joint eigenvalue curve, and to pick the community count from the
//! eigenvalue difference curve of the fluid Laplacian.

/// Index of the knee of `curve`, if one exists.
///
/// Standard kneedle for concave-increasing curves: min–max normalize both
/// axes, form the difference `d = y - x`, and return the first interior local
/// maximum of `d` that exceeds the sensitivity-adjusted threshold
/// (`sensitivity` times the mean x-spacing).
pub fn knee_index(curve: &[f64], sensitivity: f64) -> Option<usize> {
    let len = curve.len();
    if len < 3 {
        return None;
    }
    let min = curve.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = curve.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let range = max - min;
    let step = 1.0 / (len - 1) as f64;

    let d: Vec<f64> = curve
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let y = if range > 0.0 { (v - min) / range } else { 0.0 };
            y - i as f64 * step
        })
        .collect();

    let threshold = sensitivity * step;
    for i in 1..(len - 1) {
        if d[i] > d[i - 1] && d[i] >= d[i + 1] && d[i] > threshold {
            return Some(i);
        }
    }
    None
}

/// Index of the most prominent knee: the qualifying interior local maximum
/// with the largest normalized difference (first wins ties).
pub fn dominant_knee_index(curve: &[f64], sensitivity: f64) -> Option<usize> {
    let len = curve.len();
    if len < 3 {
        return None;
    }
    let min = curve.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = curve.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let range = max - min;
    let step = 1.0 / (len - 1) as f64;
    let d: Vec<f64> = curve
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let y = if range > 0.0 { (v - min) / range } else { 0.0 };
            y - i as f64 * step
        })
        .collect();

    let threshold = sensitivity * step;
    let mut best: Option<usize> = None;
    for i in 1..(len - 1) {
        if d[i] > d[i - 1] && d[i] >= d[i + 1] && d[i] > threshold {
            if best.map_or(true, |b| d[i] > d[b]) {
                best = Some(i);
            }
        }
    }
    // Leading-edge fallback: a curve whose first entry is its global maximum
    // (monotone-decreasing gaps) has no interior local maximum, but its knee
    // is plainly at index 0.
    if best.is_none() && range > 0.0 && curve[0] >= max - 1e-15 * range.abs() {
        best = Some(0);
    }
    best
}

/// Knee of `curve`, falling back to `ceil(sqrt(len))` when no knee exists.
pub fn kneedle_select(curve: &[f64], sensitivity: f64) -> usize {
    knee_index(curve, sensitivity).unwrap_or_else(|| ceil_sqrt(curve.len()))
}

/// Smallest integer `k` with `k*k >= n`.
pub fn ceil_sqrt(n: usize) -> usize {
    if n == 0 {
        return 0;
    }
    let mut k = (n as f64).sqrt().floor() as usize;
    while k * k < n {
        k += 1;
    }
    while k > 1 && (k - 1) * (k - 1) >= n {
        k -= 1;
    }
    k
}
