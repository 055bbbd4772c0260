//! Evaluation metrics: covariance error, support recovery, and directed-edge
//! precision/recall, each with an optional restriction to a leading
//! (high-priority) block of nodes.

use alloc::vec::Vec;
use core::ops::Range;

use crate::causal::GraphEstimate;
use crate::linalg::Mat;
use crate::model::Gbn;
use crate::{Error, Result};

/// Entries of the ground truth smaller than this count as structural zeros.
const TRUTH_ZERO: f64 = 1e-12;

/// Rule deciding which estimate entries count as support.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SupportThreshold {
    /// `|entry| > t` counts as support.
    Absolute(f64),
    /// `|entry| > t·max|est|` counts as support, anchoring the cutoff to the
    /// estimate's own scale over the compared region — a detection rule that
    /// needs no knowledge of the ground truth.
    Relative(f64),
}

fn precision_recall(hits: usize, est_size: usize, truth_size: usize) -> (f64, f64) {
    // Empty-set conventions: an empty estimate is perfectly precise exactly
    // when there was nothing to find; an empty truth is always fully
    // recalled.
    let precision = if est_size == 0 {
        if truth_size == 0 {
            1.0
        } else {
            0.0
        }
    } else {
        hits as f64 / est_size as f64
    };
    let recall = if truth_size == 0 { 1.0 } else { hits as f64 / truth_size as f64 };
    (precision, recall)
}

fn check_block(block: &Option<Range<usize>>, p: usize) -> Result<Range<usize>> {
    match block {
        None => Ok(0..p),
        Some(r) => {
            if r.start > r.end || r.end > p {
                return Err(Error::InvalidParameter("block range exceeds the matrix size"));
            }
            Ok(r.clone())
        }
    }
}

/// Maximum absolute entrywise difference between an estimate and the ground
/// truth, optionally restricted to the principal block `block × block`.
///
/// # Examples
///
/// ```
/// use decov_core::linalg::Mat;
/// use decov_core::metrics::metric_mae;
///
/// let truth = Mat::eye(3);
/// let mut est = Mat::eye(3);
/// est.set(1, 2, 0.3);
/// assert_eq!(metric_mae(&est, &truth, None).unwrap(), 0.3);
/// // Restricting to the leading 2×2 block ignores the (1,2) error.
/// assert_eq!(metric_mae(&est, &truth, Some(0..2)).unwrap(), 0.0);
/// ```
pub fn metric_mae(est: &Mat, truth: &Mat, block: Option<Range<usize>>) -> Result<f64> {
    if est.rows() != truth.rows() || est.cols() != truth.cols() {
        return Err(Error::InvalidParameter("estimate and truth shapes differ"));
    }
    if truth.rows() != truth.cols() {
        return Err(Error::InvalidParameter("covariance matrices must be square"));
    }
    let r = check_block(&block, truth.rows())?;
    let mut worst = 0.0f64;
    for i in r.clone() {
        for j in r.clone() {
            worst = worst.max((est.get(i, j) - truth.get(i, j)).abs());
        }
    }
    Ok(worst)
}

/// Support precision and recall of a covariance estimate: the estimated
/// support is thresholded by `rule`, the true support keeps exact nonzeros,
/// and both are compared entrywise (optionally on the principal block).
///
/// Precision is the fraction of estimated support inside the true support;
/// recall is the fraction of true support recovered. An empty estimated
/// support scores precision 1 against an empty truth and 0 otherwise; an
/// empty true support is fully recalled by convention.
pub fn metric_support_pr(
    est: &Mat,
    truth: &Mat,
    rule: SupportThreshold,
    block: Option<Range<usize>>,
) -> Result<(f64, f64)> {
    if est.rows() != truth.rows() || est.cols() != truth.cols() {
        return Err(Error::InvalidParameter("estimate and truth shapes differ"));
    }
    if truth.rows() != truth.cols() {
        return Err(Error::InvalidParameter("covariance matrices must be square"));
    }
    let r = check_block(&block, truth.rows())?;
    let cutoff = match rule {
        SupportThreshold::Absolute(t) => t,
        SupportThreshold::Relative(t) => {
            let mut block_max = 0.0f64;
            for i in r.clone() {
                for j in r.clone() {
                    block_max = block_max.max(est.get(i, j).abs());
                }
            }
            t * block_max
        }
    };
    if !(cutoff >= 0.0) || !cutoff.is_finite() {
        return Err(Error::InvalidParameter("support threshold must be nonnegative and finite"));
    }
    let (mut hits, mut est_size, mut truth_size) = (0usize, 0usize, 0usize);
    for i in r.clone() {
        for j in r.clone() {
            let in_est = est.get(i, j).abs() > cutoff;
            let in_truth = truth.get(i, j).abs() > TRUTH_ZERO;
            est_size += in_est as usize;
            truth_size += in_truth as usize;
            hits += (in_est && in_truth) as usize;
        }
    }
    Ok(precision_recall(hits, est_size, truth_size))
}

/// Directed-edge precision and recall of a recovered graph against the
/// generating network. With `restrict_to_high`, only edges whose two
/// endpoints both lie below `n_h` are compared (the high-priority subgraph).
///
/// Edges are compared as directed (parent, child) pairs — a reversed edge
/// counts as both a false positive and a missed truth. Weights are ignored.
pub fn metric_edge_pr(
    est: &GraphEstimate,
    truth: &Gbn,
    restrict_to_high: bool,
    n_h: usize,
) -> Result<(f64, f64)> {
    let p = truth.p();
    if est.elimination_order.len() != p {
        return Err(Error::InvalidParameter("graph estimate and truth node counts differ"));
    }
    let keep = |a: usize, b: usize| !restrict_to_high || (a < n_h && b < n_h);
    let est_edges: Vec<(usize, usize)> = est
        .edges
        .iter()
        .filter(|&&(a, b, _)| keep(a, b))
        .map(|&(a, b, _)| (a, b))
        .collect();
    let truth_edges: Vec<(usize, usize)> = truth
        .edges()
        .iter()
        .filter(|&&(a, b, _)| keep(a, b))
        .map(|&(a, b, _)| (a, b))
        .collect();
    let hits = est_edges.iter().filter(|e| truth_edges.contains(e)).count();
    Ok(precision_recall(hits, est_edges.len(), truth_edges.len()))
}
