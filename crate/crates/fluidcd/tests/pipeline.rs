//! End-to-end pipeline behavior on synthetic data.

use fluidcd::cluster::{detect_communities, DetectParams};
use fluidcd::data::{gen_blocks, gen_toy_appendix_d};
use fluidcd::error::Error;
use fluidcd::metrics::{modified_ari, NodeWeighting};

fn unit_mari(
    detection: &fluidcd::cluster::Detection,
    gt: &fluidcd::data::GroundTruth,
) -> f64 {
    let w = NodeWeighting::uniform(gt.labels.len());
    modified_ari(&detection.partition, gt, &w).unwrap()
}

#[test]
fn easy_two_blocks_recovered_exactly() {
    let (d, gt) = gen_blocks(2, &[10, 10], 20, 0.02, 1).unwrap();
    let mut params = DetectParams::default();
    params.relevance.seed = 1;
    let det = detect_communities(&d, &params).unwrap();
    assert_eq!(det.diagnostics.k_f, 2, "spectrum {:?}", det.diagnostics.eigvals_fnorm);
    assert!((unit_mari(&det, &gt) - 1.0).abs() < 1e-12);
}

#[test]
fn toy_appendix_d_structure() {
    let (d, gt) = gen_toy_appendix_d(5);
    let mut params = DetectParams::default();
    params.relevance.seed = 5;
    let det = detect_communities(&d, &params).unwrap();

    // Block contrast on Q: mean within-class entry at least twice the mean
    // between-class entry.
    let mut within = (0.0, 0usize);
    let mut between = (0.0, 0usize);
    for i in 0..15 {
        for j in 0..15 {
            if i == j {
                continue;
            }
            if gt.labels[i] == gt.labels[j] {
                within = (within.0 + det.q.q[[i, j]], within.1 + 1);
            } else {
                between = (between.0 + det.q.q[[i, j]], between.1 + 1);
            }
        }
    }
    let within_mean = within.0 / within.1 as f64;
    let between_mean = between.0 / between.1 as f64;
    assert!(
        within_mean >= 2.0 * between_mean,
        "within {within_mean} between {between_mean}"
    );

    assert_eq!(det.diagnostics.k_f, 3, "spectrum {:?}", det.diagnostics.eigvals_fnorm);
    let mari = unit_mari(&det, &gt);
    assert!(mari >= 0.9, "mARI {mari}");
}

#[test]
fn two_samples_is_a_size_error() {
    let values = ndarray::array![[0.0, 1.0], [1.0, 0.0]];
    match fluidcd::data::Dataset::from_values(values) {
        Err(Error::TooFewSamples { actual: 2, .. }) => {}
        other => panic!("expected size error, got {other:?}"),
    }
}

#[test]
fn permutation_equivariance_on_stable_instance() {
    let (d, _) = gen_blocks(3, &[8, 8, 8], 12, 0.03, 11).unwrap();
    let mut params = DetectParams::default();
    params.relevance.seed = 11;
    let base = detect_communities(&d, &params).unwrap();

    // Reverse the sample order.
    let n = d.sample_count();
    let mut values = ndarray::Array2::zeros((n, d.feature_count()));
    for i in 0..n {
        values.row_mut(i).assign(&d.values.row(n - 1 - i));
    }
    let rev = fluidcd::data::Dataset::from_values(values).unwrap();
    let perm = detect_communities(&rev, &params).unwrap();

    let relabeled: Vec<usize> = (0..n).map(|i| perm.partition.labels[n - 1 - i]).collect();
    let canon = fluidcd::cluster::Partition::canonicalize(&relabeled).unwrap();
    assert_eq!(canon.labels, base.partition.labels);
}
