//! Gaussian Bayesian network structure recovery by terminal-node elimination.
//!
//! Given a covariance estimate and a matching precision estimate, the loop
//! repeats four steps until one node is left:
//!
//! 1. read each node's Markov blanket off the nonzero pattern of the
//!    precision matrix ([`markov_blanket`]);
//! 2. compute regression coefficients of each node on its blanket
//!    ([`regression_coeffs`]);
//! 3. pick the node minimizing `r_i = max_{j∈MB_i} |Ω_ij/θ_ij|` as terminal
//!    ([`find_terminal`]); its blanket becomes its parent set and the
//!    regression coefficients become the edge weights;
//! 4. marginalize the terminal node out of the covariance ([`marginalize`])
//!    and recompute the precision for the reduced model.
//!
//! A terminal (childless) node's Markov blanket is exactly its parent set,
//! which is what makes the recorded edges correct; eliminating children
//! before parents also makes the output acyclic by construction. With the
//! exact covariance of an acyclic linear SEM with Gaussian noise and generic
//! weights, the recovered edges equal the generating DAG's.

use alloc::boxed::Box;
use alloc::vec;
use alloc::vec::Vec;

use crate::linalg::Mat;
use crate::recovery::clime;
use crate::{Error, Result};

/// How the precision matrix is rebuilt after each marginalization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PrecisionRecompute {
    /// Invert the reduced covariance directly, after adding `ridge` to the
    /// diagonal (zero ridge inverts the reduced covariance as-is).
    Inverse {
        /// Diagonal loading applied before inversion.
        ridge: f64,
    },
    /// Re-estimate with the column-wise ℓ₁ program at the given slack.
    Clime {
        /// Constraint slack of the precision program.
        lambda: f64,
    },
}

/// Threshold under which a precision entry counts as zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ZeroTolerance {
    /// Fixed threshold used in every round.
    Absolute(f64),
    /// Fraction of the current precision matrix's largest absolute entry,
    /// re-resolved each round.
    Relative(f64),
}

/// Options steering [`recover_structure`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StructureOptions {
    /// Zero threshold for reading Markov blankets off the precision matrix.
    pub zero_tol: ZeroTolerance,
    /// Precision recomputation rule applied after each elimination.
    pub recompute: PrecisionRecompute,
}

impl Default for StructureOptions {
    /// Relative 10⁻³ zero threshold and exact inversion without ridge.
    fn default() -> Self {
        StructureOptions {
            zero_tol: ZeroTolerance::Relative(1e-3),
            recompute: PrecisionRecompute::Inverse { ridge: 0.0 },
        }
    }
}

impl StructureOptions {
    fn validate(&self) -> Result<()> {
        let tol = match self.zero_tol {
            ZeroTolerance::Absolute(t) | ZeroTolerance::Relative(t) => t,
        };
        if !(tol >= 0.0) || !tol.is_finite() {
            return Err(Error::InvalidParameter("zero tolerance must be nonnegative and finite"));
        }
        match self.recompute {
            PrecisionRecompute::Inverse { ridge } => {
                if !(ridge >= 0.0) || !ridge.is_finite() {
                    return Err(Error::InvalidParameter("inverse ridge must be nonnegative and finite"));
                }
            }
            PrecisionRecompute::Clime { lambda } => {
                if !(lambda > 0.0) || !lambda.is_finite() {
                    return Err(Error::InvalidParameter("clime lambda must be positive and finite"));
                }
            }
        }
        Ok(())
    }
}

/// A recovered weighted DAG.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphEstimate {
    /// Directed edges as `(parent, child, weight)`, in elimination order
    /// (all edges into the first eliminated node, then the second, ...).
    pub edges: Vec<(usize, usize, f64)>,
    /// Nodes in the order they were eliminated; always a permutation of
    /// `0..p`. Every edge's child precedes its parent here, which is what
    /// makes the edge set acyclic.
    pub elimination_order: Vec<usize>,
}

/// Markov blanket of node `i`: the other nodes whose precision entry against
/// `i` clears the zero threshold, ascending.
///
/// # Examples
///
/// ```
/// use decov_core::causal::markov_blanket;
/// use decov_core::linalg::Mat;
///
/// // Precision of the chain x0 → x1 → x2 with unit weights.
/// let omega = Mat::from_rows(3, 3, &[
///     2.0, -1.0, 0.0, //
///     -1.0, 2.0, -1.0, //
///     0.0, -1.0, 1.0,
/// ]);
/// assert_eq!(markov_blanket(&omega, 1, 1e-9), vec![0, 2]);
/// assert_eq!(markov_blanket(&omega, 0, 1e-9), vec![1]);
/// ```
pub fn markov_blanket(omega: &Mat, i: usize, zero_tol: f64) -> Vec<usize> {
    let p = omega.rows();
    (0..p).filter(|&j| j != i && omega.get(i, j).abs() > zero_tol).collect()
}

/// Coefficients of the best linear predictor of node `i` from the nodes in
/// `mb`: the length-p vector that is `Σ[mb,mb]⁻¹ Σ[mb,i]` on `mb` and zero
/// elsewhere.
///
/// # Errors
///
/// The restricted covariance being singular yields an error naming node `i`.
pub fn regression_coeffs(sigma: &Mat, i: usize, mb: &[usize]) -> Result<Vec<f64>> {
    let p = sigma.rows();
    if sigma.cols() != p {
        return Err(Error::InvalidParameter("covariance must be square"));
    }
    if i >= p || mb.iter().any(|&j| j >= p) {
        return Err(Error::InvalidParameter("node index out of range"));
    }
    let mut theta = vec![0.0; p];
    if mb.is_empty() {
        return Ok(theta);
    }
    let gram = sigma.select(mb, mb);
    let rhs: Vec<f64> = mb.iter().map(|&j| sigma.get(j, i)).collect();
    let coeffs = gram.solve(&rhs).map_err(|_| Error::AtNode {
        node: i,
        message: "covariance restricted to the Markov blanket is singular",
    })?;
    for (&j, &c) in mb.iter().zip(&coeffs) {
        theta[j] = c;
    }
    Ok(theta)
}

/// Terminal score of one node: `max_{j∈mb} |Ω_ij/θ_ij|`, with an empty
/// blanket scoring 0 (an isolated node is trivially terminal) and a zero
/// coefficient against a nonzero precision entry scoring infinity.
fn terminal_ratio(omega: &Mat, i: usize, mb: &[usize], theta: &[f64]) -> f64 {
    let mut r = 0.0f64;
    for &j in mb {
        let ratio = (omega.get(i, j) / theta[j]).abs();
        if !ratio.is_finite() {
            return f64::INFINITY;
        }
        r = r.max(ratio);
    }
    r
}

/// Picks the terminal node: the candidate with minimal
/// `r_i = max_{j∈MB_i} |Ω_ij/θ_ij|`, ties broken by smallest index.
///
/// `blankets[i]` and `thetas[i]` describe node `i`; candidates index into
/// both. A candidate with an infinite score (some blanket member has a zero
/// regression coefficient) is skipped for this round.
///
/// # Errors
///
/// `candidates` empty, or every candidate scoring infinity, is an error: the
/// covariance/precision pair is inconsistent with any terminal node.
pub fn find_terminal(
    omega: &Mat,
    blankets: &[Vec<usize>],
    thetas: &[Vec<f64>],
    candidates: &[usize],
) -> Result<usize> {
    if candidates.is_empty() {
        return Err(Error::InvalidParameter("terminal search needs at least one candidate"));
    }
    let mut best: Option<(f64, usize)> = None;
    for &i in candidates {
        let r = terminal_ratio(omega, i, &blankets[i], &thetas[i]);
        if r.is_finite() && best.as_ref().is_none_or(|&(b, bi)| r < b || (r == b && i < bi)) {
            best = Some((r, i));
        }
    }
    match best {
        Some((_, i)) => Ok(i),
        None => Err(Error::NoTerminal(
            "every candidate has a zero regression coefficient against a nonzero precision entry",
        )),
    }
}

/// Marginalizes node `v` out of a covariance: deletes its row and column
/// (for a Gaussian, marginalization is exactly submatrix extraction).
pub fn marginalize(sigma: &Mat, v: usize) -> Result<Mat> {
    let p = sigma.rows();
    if sigma.cols() != p {
        return Err(Error::InvalidParameter("covariance must be square"));
    }
    if p < 2 {
        return Err(Error::InvalidParameter("marginalization needs at least two nodes"));
    }
    if v >= p {
        return Err(Error::InvalidParameter("node index out of range"));
    }
    let keep: Vec<usize> = (0..p).filter(|&j| j != v).collect();
    Ok(sigma.select(&keep, &keep))
}

fn resolve_tol(zero_tol: ZeroTolerance, omega: &Mat) -> f64 {
    match zero_tol {
        ZeroTolerance::Absolute(t) => t,
        ZeroTolerance::Relative(r) => r * omega.max_abs(),
    }
}

fn recompute_precision(sigma: &Mat, rule: PrecisionRecompute) -> Result<Mat> {
    match rule {
        PrecisionRecompute::Inverse { ridge } => {
            if ridge > 0.0 {
                let mut loaded = sigma.clone();
                for i in 0..sigma.rows() {
                    loaded.add_at(i, i, ridge);
                }
                loaded.inv()
            } else {
                sigma.inv()
            }
        }
        PrecisionRecompute::Clime { lambda } => Ok(clime(sigma, lambda)?.omega_hat),
    }
}

/// Recovers a weighted DAG from a covariance/precision pair by terminal-node
/// elimination.
///
/// Each round reads Markov blankets off the current precision matrix,
/// regresses every node on its blanket, eliminates the node with the
/// smallest terminal score (recording its blanket as parents and the
/// regression coefficients as edge weights), then marginalizes the
/// covariance and recomputes the precision per `opts.recompute`. The
/// returned edge set is acyclic by construction and the procedure is fully
/// deterministic.
///
/// # Errors
///
/// Step failures (singular regression, no terminal candidate, singular
/// reduced covariance) are wrapped with the round index at which they
/// occurred.
///
/// # Examples
///
/// ```
/// use decov_core::causal::{recover_structure, StructureOptions};
/// use decov_core::linalg::Mat;
///
/// // Exact covariance and precision of the chain x0 → x1 with weight 1.
/// let sigma = Mat::from_rows(2, 2, &[1.0, 1.0, 1.0, 2.0]);
/// let omega = Mat::from_rows(2, 2, &[2.0, -1.0, -1.0, 1.0]);
/// let est = recover_structure(&sigma, &omega, &StructureOptions::default()).unwrap();
/// assert_eq!(est.edges, vec![(0, 1, 1.0)]);
/// assert_eq!(est.elimination_order, vec![1, 0]);
/// ```
pub fn recover_structure(
    sigma_hat: &Mat,
    omega_hat: &Mat,
    opts: &StructureOptions,
) -> Result<GraphEstimate> {
    opts.validate()?;
    let p = sigma_hat.rows();
    if sigma_hat.cols() != p || omega_hat.rows() != p || omega_hat.cols() != p {
        return Err(Error::InvalidParameter(
            "covariance and precision must be square matrices of equal size",
        ));
    }
    if p == 0 {
        return Err(Error::InvalidParameter("graph must have at least one node"));
    }

    let mut sigma = sigma_hat.clone();
    let mut omega = omega_hat.clone();
    // labels[local index] = original node index of the surviving node.
    let mut labels: Vec<usize> = (0..p).collect();
    let mut edges = Vec::new();
    let mut order = Vec::with_capacity(p);

    for round in 0..p.saturating_sub(1) {
        let at_round = |inner: Error| Error::AtRound { round, inner: Box::new(inner) };
        let m = labels.len();
        let tol = resolve_tol(opts.zero_tol, &omega);
        let blankets: Vec<Vec<usize>> = (0..m).map(|i| markov_blanket(&omega, i, tol)).collect();
        let mut thetas = Vec::with_capacity(m);
        for i in 0..m {
            thetas.push(regression_coeffs(&sigma, i, &blankets[i]).map_err(at_round)?);
        }
        let candidates: Vec<usize> = (0..m).collect();
        let v = find_terminal(&omega, &blankets, &thetas, &candidates).map_err(at_round)?;

        for &j in &blankets[v] {
            edges.push((labels[j], labels[v], thetas[v][j]));
        }
        order.push(labels[v]);
        sigma = marginalize(&sigma, v).map_err(at_round)?;
        labels.remove(v);
        if labels.len() > 1 {
            omega = recompute_precision(&sigma, opts.recompute).map_err(at_round)?;
        }
    }
    order.push(labels[0]);

    Ok(GraphEstimate { edges, elimination_order: order })
}
