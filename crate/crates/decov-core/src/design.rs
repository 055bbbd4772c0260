//! Degree-distribution design programs for sparse sensing matrices.
//!
//! Two designs are supported. The single-class (regular) program minimizes
//! the compression ratio `d/p = (Σ_j jλ_j)/(Σ_i iρ_i)` subject to the
//! recovery conditions
//!
//! ```text
//! a₁² ≤ p²/k²            (noise amplification)
//! a₂  ≤ p²/(2c₀k²ln(p/k)) (variance contraction)
//! ```
//!
//! whose factorized forms are linear in whichever distribution is free, so
//! each block solve is an exact linear program. The two-class (priority)
//! program adds the edge-consistency coupling between the column classes and
//! per-block error-ordering constraints; it is solved by projected gradient
//! descent over the product of simplices with a quadratic penalty ramp,
//! followed by exact feasibility verification.

use alloc::vec;
use alloc::vec::Vec;

use crate::factorgraph::{coeff_a1, coeff_a2, DegreeDistribution};
use crate::{Error, Result};

/// Pivot/zero tolerance of the simplex solver.
const LP_EPS: f64 = 1e-9;
/// Slack level treated as numerically feasible on replay.
const REPLAY_TOL: f64 = 1e-9;

// ---------------------------------------------------------------------------
// Linear programming
// ---------------------------------------------------------------------------

/// A small linear program: minimize `costs·x` subject to `x ≥ 0`, the
/// equality rows `a·x = b`, and the inequality rows `a·x ≤ b`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearProgram {
    /// Objective coefficients (also fixes the variable count).
    pub costs: Vec<f64>,
    /// Equality rows `(coefficients, rhs)`.
    pub eq: Vec<(Vec<f64>, f64)>,
    /// Upper-bound rows `(coefficients, rhs)` meaning `a·x ≤ b`.
    pub ub: Vec<(Vec<f64>, f64)>,
}

/// An optimal vertex of a [`LinearProgram`].
#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    /// Optimal point.
    pub x: Vec<f64>,
    /// Objective value at `x`.
    pub objective: f64,
}

/// Solves a small linear program exactly by two-phase simplex.
///
/// Pivoting follows Bland's rule (smallest eligible index enters; ratio ties
/// break toward the smallest basic index), which prevents cycling and makes
/// the returned vertex deterministic. Sized for design problems: at most 64
/// variables and 16 constraint rows.
///
/// # Examples
///
/// ```
/// use decov_core::design::{lp_solve, LinearProgram};
/// // min x₁ over the probability simplex on two variables.
/// let lp = LinearProgram {
///     costs: vec![1.0, 0.0],
///     eq: vec![(vec![1.0, 1.0], 1.0)],
///     ub: vec![],
/// };
/// let sol = lp_solve(&lp).unwrap();
/// assert_eq!(sol.x, vec![0.0, 1.0]);
/// assert_eq!(sol.objective, 0.0);
/// ```
pub fn lp_solve(lp: &LinearProgram) -> Result<LpSolution> {
    let n = lp.costs.len();
    let m = lp.eq.len() + lp.ub.len();
    if n == 0 || n > 64 {
        return Err(Error::InvalidParameter("linear program must have 1..=64 variables"));
    }
    if m == 0 || m > 16 {
        return Err(Error::InvalidParameter("linear program must have 1..=16 constraint rows"));
    }
    for (row, rhs) in lp.eq.iter().chain(lp.ub.iter()) {
        if row.len() != n {
            return Err(Error::InvalidParameter("constraint row length must match variable count"));
        }
        if !rhs.is_finite() || row.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidParameter("linear program coefficients must be finite"));
        }
    }
    if lp.costs.iter().any(|c| !c.is_finite()) {
        return Err(Error::InvalidParameter("linear program coefficients must be finite"));
    }

    // Standard form: [x, slacks] with every rhs nonnegative.
    let n_slack = lp.ub.len();
    let n_struct = n + n_slack;
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(m);
    let mut rhs: Vec<f64> = Vec::with_capacity(m);
    for (row, b) in &lp.eq {
        let mut r = vec![0.0; n_struct];
        r[..n].copy_from_slice(row);
        rows.push(r);
        rhs.push(*b);
    }
    for (i, (row, b)) in lp.ub.iter().enumerate() {
        let mut r = vec![0.0; n_struct];
        r[..n].copy_from_slice(row);
        r[n + i] = 1.0;
        rows.push(r);
        rhs.push(*b);
    }
    for r in 0..m {
        if rhs[r] < 0.0 {
            rhs[r] = -rhs[r];
            for c in rows[r].iter_mut() {
                *c = -*c;
            }
        }
    }

    // Phase 1: artificial basis, minimize the sum of artificials.
    let n_tot = n_struct + m;
    let mut tab: Vec<Vec<f64>> = Vec::with_capacity(m + 1);
    for r in 0..m {
        let mut row = vec![0.0; n_tot + 1];
        row[..n_struct].copy_from_slice(&rows[r]);
        row[n_struct + r] = 1.0;
        row[n_tot] = rhs[r];
        tab.push(row);
    }
    let mut basis: Vec<usize> = (n_struct..n_tot).collect();
    let mut cost = vec![0.0; n_tot + 1];
    for j in n_struct..n_tot {
        cost[j] = 1.0;
    }
    // Express the cost row in the artificial basis.
    for r in 0..m {
        for j in 0..=n_tot {
            cost[j] -= tab[r][j];
        }
    }
    run_simplex(&mut tab, &mut cost, &mut basis, n_tot)?;
    if -cost[n_tot] > 1e-7 {
        return Err(Error::Infeasible("linear program has no feasible point"));
    }

    // Drive leftover artificials out of the basis; drop redundant rows.
    let mut r = 0;
    while r < tab.len() {
        if basis[r] >= n_struct {
            let mut pivot_col = None;
            for j in 0..n_struct {
                if tab[r][j].abs() > LP_EPS {
                    pivot_col = Some(j);
                    break;
                }
            }
            match pivot_col {
                Some(j) => {
                    pivot(&mut tab, &mut cost, r, j);
                    basis[r] = j;
                }
                None => {
                    tab.remove(r);
                    basis.remove(r);
                    continue;
                }
            }
        }
        r += 1;
    }

    // Phase 2 on the structural columns only.
    for row in tab.iter_mut() {
        let b = row[n_tot];
        row.truncate(n_struct);
        row.push(b);
    }
    let mut cost = vec![0.0; n_struct + 1];
    cost[..n].copy_from_slice(&lp.costs);
    for (r, &bj) in basis.iter().enumerate() {
        if cost[bj].abs() > 0.0 {
            let c = cost[bj];
            for j in 0..=n_struct {
                cost[j] -= c * tab[r][j];
            }
        }
    }
    run_simplex(&mut tab, &mut cost, &mut basis, n_struct)?;

    let mut x = vec![0.0; n];
    for (r, &bj) in basis.iter().enumerate() {
        if bj < n {
            x[bj] = tab[r][n_struct].max(0.0);
        }
    }
    let objective = lp.costs.iter().zip(x.iter()).map(|(c, v)| c * v).sum();
    Ok(LpSolution { x, objective })
}

/// Bland-rule simplex iterations on a tableau whose cost row holds reduced
/// costs and (negated) objective in its last entry.
fn run_simplex(tab: &mut [Vec<f64>], cost: &mut [f64], basis: &mut [usize], n_cols: usize) -> Result<()> {
    let m = tab.len();
    // A crude but safe anti-stall bound; Bland's rule precludes cycling.
    let max_pivots = 50_000;
    for _ in 0..max_pivots {
        let mut enter = None;
        for j in 0..n_cols {
            if cost[j] < -LP_EPS {
                enter = Some(j);
                break;
            }
        }
        let Some(j) = enter else { return Ok(()) };
        let mut leave: Option<usize> = None;
        let mut best = f64::INFINITY;
        let rhs_col = tab[0].len() - 1;
        for r in 0..m {
            if tab[r][j] > LP_EPS {
                let ratio = tab[r][rhs_col] / tab[r][j];
                let better = ratio < best - LP_EPS
                    || (ratio < best + LP_EPS && leave.is_some_and(|l| basis[r] < basis[l]));
                if better {
                    best = ratio;
                    leave = Some(r);
                }
            }
        }
        let Some(r) = leave else {
            return Err(Error::Unbounded("linear program objective decreases without bound"));
        };
        pivot(tab, cost, r, j);
        basis[r] = j;
    }
    Err(Error::NoConvergence("simplex exceeded its pivot budget"))
}

/// Normalizes the pivot row and eliminates the pivot column everywhere else.
fn pivot(tab: &mut [Vec<f64>], cost: &mut [f64], r: usize, j: usize) {
    let width = tab[r].len();
    let piv = tab[r][j];
    for c in 0..width {
        tab[r][c] /= piv;
    }
    for rr in 0..tab.len() {
        if rr != r && tab[rr][j].abs() > 0.0 {
            let f = tab[rr][j];
            for c in 0..width {
                tab[rr][c] -= f * tab[r][c];
            }
            tab[rr][j] = 0.0;
        }
    }
    if cost[j].abs() > 0.0 {
        let f = cost[j];
        for c in 0..width {
            cost[c] -= f * tab[r][c];
        }
        cost[j] = 0.0;
    }
}

// ---------------------------------------------------------------------------
// Feasibility reporting
// ---------------------------------------------------------------------------

/// One audited constraint of a design: its achieved value, its bound, and
/// the residual slack.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintSlack {
    /// Stable identifier, e.g. `"a1_squared"` or `"edge_consistency_ratio"`.
    pub name: &'static str,
    /// The exact inequality (or equation) this row audits.
    pub description: &'static str,
    /// Achieved left-hand value.
    pub value: f64,
    /// Right-hand bound (or equality target).
    pub bound: f64,
    /// `bound − value` for `≤` rows; `−|value − bound|` for equality rows.
    pub slack: f64,
    /// Whether the constraint holds (up to replay tolerance for equalities).
    pub satisfied: bool,
    /// Informational rows document design-intent checks that are not part
    /// of the optimization program and are excluded from feasibility replay.
    pub informational: bool,
}

impl ConstraintSlack {
    fn le(name: &'static str, description: &'static str, value: f64, bound: f64) -> Self {
        let slack = bound - value;
        Self { name, description, value, bound, slack, satisfied: slack >= -REPLAY_TOL, informational: false }
    }

    fn equality(name: &'static str, description: &'static str, value: f64, bound: f64) -> Self {
        let slack = -(value - bound).abs();
        Self { name, description, value, bound, slack, satisfied: slack >= -REPLAY_TOL, informational: false }
    }

    fn info(name: &'static str, description: &'static str, value: f64, bound: f64) -> Self {
        Self { name, description, value, bound, slack: value - bound, satisfied: value > bound, informational: true }
    }
}

/// Per-constraint audit of a designed distribution pair.
#[derive(Debug, Clone, PartialEq)]
pub struct FeasibilityReport {
    /// Audited constraints in program order.
    pub rows: Vec<ConstraintSlack>,
}

impl FeasibilityReport {
    /// True iff every non-informational row has slack ≥ −10⁻⁹.
    pub fn replay_ok(&self) -> bool {
        self.rows.iter().filter(|r| !r.informational).all(|r| r.slack >= -REPLAY_TOL)
    }

    /// Smallest slack over non-informational rows.
    pub fn min_slack(&self) -> f64 {
        self.rows
            .iter()
            .filter(|r| !r.informational)
            .map(|r| r.slack)
            .fold(f64::INFINITY, f64::min)
    }

    /// First non-informational row that is violated beyond replay tolerance.
    pub fn first_violation(&self) -> Option<&ConstraintSlack> {
        self.rows.iter().find(|r| !r.informational && r.slack < -REPLAY_TOL)
    }
}

/// The variance-contraction bound `p²/(2c₀k²ln(p/k))`.
pub fn error_bound_b2(p: usize, k: usize, c0: f64) -> f64 {
    let (p, k) = (p as f64, k as f64);
    p * p / (2.0 * c0 * k * k * libm::log(p / k))
}

/// Audits a `(λ, ρ)` pair against the two recovery-guarantee constraints for
/// a k²-sparse p×p signal: `a₁² ≤ p²/k²` and `a₂ ≤ p²/(2c₀k²ln(p/k))`.
pub fn check_theorem31(
    lambda: &DegreeDistribution,
    rho: &DegreeDistribution,
    p: usize,
    k: usize,
    c0: f64,
) -> Result<FeasibilityReport> {
    if k < 1 || k >= p {
        return Err(Error::InvalidParameter("sparsity must satisfy 1 <= k < p"));
    }
    if !(c0 > 0.0) || !c0.is_finite() {
        return Err(Error::InvalidParameter("c0 must be positive and finite"));
    }
    let a1 = coeff_a1(lambda, rho);
    let a2 = coeff_a2(lambda, rho);
    let pk = p as f64 / k as f64;
    Ok(FeasibilityReport {
        rows: vec![
            ConstraintSlack::le(
                "a1_squared",
                "noise amplification: a1^2 <= p^2/k^2",
                a1 * a1,
                pk * pk,
            ),
            ConstraintSlack::le(
                "a2",
                "variance contraction: a2 <= p^2/(2 c0 k^2 ln(p/k))",
                a2,
                error_bound_b2(p, k, c0),
            ),
        ],
    })
}

// ---------------------------------------------------------------------------
// Regular (single-class) design
// ---------------------------------------------------------------------------

/// Which side of the bipartite graph is pinned during the regular design.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DesignMode {
    /// Pin ρ to a point mass at `d_c`; optimize λ.
    FixedRow,
    /// Pin λ to a point mass at `d_v`; optimize ρ.
    FixedCol,
    /// Alternate single-block solves from both starting points and keep the
    /// better result.
    Both,
}

/// Specification of the single-class design program.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegularDesignSpec {
    /// Signal dimension (the covariance is p×p).
    pub p: usize,
    /// Sparsity parameter: the covariance is k²-sparse.
    pub k: usize,
    /// Constant of the variance-contraction bound.
    pub c0: f64,
    /// Maximum variable-node (column) degree.
    pub d_v: usize,
    /// Maximum check-node (row) degree.
    pub d_c: usize,
    /// Which block(s) to optimize.
    pub mode: DesignMode,
}

impl RegularDesignSpec {
    fn validate(&self) -> Result<()> {
        if self.k < 2 || self.k >= self.p {
            return Err(Error::InvalidParameter("sparsity must satisfy 2 <= k < p"));
        }
        if !(self.c0 > 0.0) || !self.c0.is_finite() {
            return Err(Error::InvalidParameter("c0 must be positive and finite"));
        }
        if self.d_v < 2 || self.d_c < 2 {
            return Err(Error::InvalidParameter("maximum degrees must be at least 2"));
        }
        if self.d_v > 65 || self.d_c > 65 {
            return Err(Error::InvalidParameter("maximum degrees above 65 exceed the design solver's size budget"));
        }
        Ok(())
    }
}

/// A designed single-class distribution pair with its audit.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignResult {
    /// Column (variable-node) degree distribution.
    pub lambda: DegreeDistribution,
    /// Row (check-node) degree distribution.
    pub rho: DegreeDistribution,
    /// Achieved compression ratio `d/p = mean(λ)/mean(ρ)`.
    pub objective: f64,
    /// Constraint audit of the returned pair.
    pub feasibility_report: FeasibilityReport,
}

/// Solves for λ with ρ fixed: minimize `Σ jλ_j` subject to the simplex and
/// the two factorized recovery constraints.
fn solve_lambda_block(
    p: usize,
    k: usize,
    c0: f64,
    d_v: usize,
    rho: &DegreeDistribution,
) -> Result<DegreeDistribution> {
    let pk_root = libm::sqrt(p as f64 / k as f64);
    let rhs1 = pk_root / rho.moment(0.5);
    let rhs2 = libm::sqrt(error_bound_b2(p, k, c0)) / rho.moment(1.0);
    // A point mass at the maximum degree minimizes both left-hand sides
    // simultaneously, so feasibility has a closed form.
    let dv = d_v as f64;
    if 1.0 / libm::sqrt(dv) > rhs1 + 1e-12 {
        return Err(Error::Infeasible(
            "noise-amplification constraint (a1_squared) cannot be met even by a point mass at the maximum column degree",
        ));
    }
    if 1.0 / dv > rhs2 + 1e-12 {
        return Err(Error::Infeasible(
            "variance-contraction constraint (a2) cannot be met even by a point mass at the maximum column degree",
        ));
    }
    let degrees: Vec<usize> = (2..=d_v).collect();
    let lp = LinearProgram {
        costs: degrees.iter().map(|&j| j as f64).collect(),
        eq: vec![(vec![1.0; degrees.len()], 1.0)],
        ub: vec![
            (degrees.iter().map(|&j| 1.0 / libm::sqrt(j as f64)).collect(), rhs1),
            (degrees.iter().map(|&j| 1.0 / j as f64).collect(), rhs2),
        ],
    };
    let sol = lp_solve(&lp)?;
    distribution_from_weights(&degrees, &sol.x)
}

/// Solves for ρ with λ fixed: maximize `Σ iρ_i` subject to the simplex and
/// the two factorized recovery constraints.
fn solve_rho_block(
    p: usize,
    k: usize,
    c0: f64,
    d_c: usize,
    lambda: &DegreeDistribution,
) -> Result<DegreeDistribution> {
    let pk_root = libm::sqrt(p as f64 / k as f64);
    let rhs1 = pk_root / lambda.moment(-0.5);
    let rhs2 = libm::sqrt(error_bound_b2(p, k, c0)) / lambda.moment(-1.0);
    // A point mass at the minimum degree (2) minimizes both left-hand sides.
    if libm::sqrt(2.0) > rhs1 + 1e-12 {
        return Err(Error::Infeasible(
            "noise-amplification constraint (a1_squared) cannot be met even by a point mass at row degree 2",
        ));
    }
    if 2.0 > rhs2 + 1e-12 {
        return Err(Error::Infeasible(
            "variance-contraction constraint (a2) cannot be met even by a point mass at row degree 2",
        ));
    }
    let degrees: Vec<usize> = (2..=d_c).collect();
    let lp = LinearProgram {
        costs: degrees.iter().map(|&i| -(i as f64)).collect(),
        eq: vec![(vec![1.0; degrees.len()], 1.0)],
        ub: vec![
            (degrees.iter().map(|&i| libm::sqrt(i as f64)).collect(), rhs1),
            (degrees.iter().map(|&i| i as f64).collect(), rhs2),
        ],
    };
    let sol = lp_solve(&lp)?;
    distribution_from_weights(&degrees, &sol.x)
}

/// Assembles a [`DegreeDistribution`] from LP weights, dropping numerically
/// zero entries and renormalizing rounding residue.
fn distribution_from_weights(degrees: &[usize], weights: &[f64]) -> Result<DegreeDistribution> {
    let total: f64 = weights.iter().sum();
    if !(total > 0.5) {
        return Err(Error::Numeric("design solver returned a degenerate weight vector"));
    }
    let pairs: Vec<(usize, f64)> = degrees
        .iter()
        .zip(weights.iter())
        .filter(|(_, &w)| w > 1e-12)
        .map(|(&d, &w)| (d, w / total))
        .collect();
    DegreeDistribution::from_pairs(&pairs)
}

/// Solves the single-class design program.
///
/// `FixedRow` pins ρ at a point mass on `d_c` and optimizes λ by an exact
/// linear program (`FixedCol` symmetrically). `Both` alternates the two
/// block solves starting from each single-block solution and keeps the
/// better result; alternation stops when the objective improves by less
/// than 10⁻⁶. Fails with the binding constraint named when no distribution
/// within the degree budget can satisfy the recovery conditions, or when the
/// optimal ratio exceeds one (no compression is possible).
pub fn design_regular(spec: &RegularDesignSpec) -> Result<DesignResult> {
    spec.validate()?;
    let result = match spec.mode {
        DesignMode::FixedRow => {
            let rho = DegreeDistribution::point_mass(spec.d_c)?;
            let lambda = solve_lambda_block(spec.p, spec.k, spec.c0, spec.d_v, &rho)?;
            (lambda, rho)
        }
        DesignMode::FixedCol => {
            let lambda = DegreeDistribution::point_mass(spec.d_v)?;
            let rho = solve_rho_block(spec.p, spec.k, spec.c0, spec.d_c, &lambda)?;
            (lambda, rho)
        }
        DesignMode::Both => {
            // Alternating block solves are monotone but converge to a local
            // pattern, so run them from many starts: the two single-block
            // solutions plus every feasible point-mass column distribution.
            let alternate = |lambda0: DegreeDistribution, rho0: DegreeDistribution| -> Result<(DegreeDistribution, DegreeDistribution, f64)> {
                let mut lambda = lambda0;
                let mut rho = rho0;
                let mut obj = lambda.mean() / rho.mean();
                for _ in 0..100 {
                    // The current pair stays feasible for each block solve,
                    // so alternation cannot error here.
                    rho = solve_rho_block(spec.p, spec.k, spec.c0, spec.d_c, &lambda)?;
                    lambda = solve_lambda_block(spec.p, spec.k, spec.c0, spec.d_v, &rho)?;
                    let new_obj = lambda.mean() / rho.mean();
                    let done = obj - new_obj < 1e-6;
                    obj = new_obj;
                    if done {
                        break;
                    }
                }
                Ok((lambda, rho, obj))
            };
            let mut starts: Vec<(DegreeDistribution, DegreeDistribution)> = Vec::new();
            let mut first_err: Option<Error> = None;
            match DegreeDistribution::point_mass(spec.d_c)
                .and_then(|rho| solve_lambda_block(spec.p, spec.k, spec.c0, spec.d_v, &rho).map(|l| (l, rho)))
            {
                Ok(pair) => starts.push(pair),
                Err(e) => first_err = Some(e),
            }
            for j in 2..=spec.d_v {
                let Ok(lambda) = DegreeDistribution::point_mass(j) else { continue };
                match solve_rho_block(spec.p, spec.k, spec.c0, spec.d_c, &lambda) {
                    Ok(rho) => starts.push((lambda, rho)),
                    Err(e) => {
                        if j == spec.d_v {
                            first_err.get_or_insert(e);
                        }
                    }
                }
            }
            let mut best: Option<(DegreeDistribution, DegreeDistribution, f64)> = None;
            for (lambda0, rho0) in starts {
                let cand = alternate(lambda0, rho0)?;
                if best.as_ref().is_none_or(|b| cand.2 < b.2) {
                    best = Some(cand);
                }
            }
            match best {
                Some((lambda, rho, _)) => (lambda, rho),
                None => return Err(first_err.expect("no result implies a recorded error")),
            }
        }
    };
    let (lambda, rho) = result;
    let objective = lambda.mean() / rho.mean();
    if !(objective <= 1.0 + 1e-9) {
        return Err(Error::Infeasible(
            "optimal compression ratio exceeds one; the degree budget admits no compressive design",
        ));
    }
    let feasibility_report = check_theorem31(&lambda, &rho, spec.p, spec.k, spec.c0)?;
    Ok(DesignResult { lambda, rho, objective, feasibility_report })
}

// ---------------------------------------------------------------------------
// Preferential (two-class) design
// ---------------------------------------------------------------------------

/// Specification of the two-class priority design program.
///
/// Block sizes follow the Kronecker square: `n_HH = n_H²`, `n_HL = n_H·n_L`,
/// `n_LL = n_L²`, and `k_BB` is the sparsity of block `BB` of the covariance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PreferentialDesignSpec {
    /// Number of high-priority coordinates.
    pub n_h: usize,
    /// Number of low-priority coordinates.
    pub n_l: usize,
    /// Sparsity of the high×high covariance block.
    pub k_hh: usize,
    /// Sparsity of the high×low covariance block.
    pub k_hl: usize,
    /// Sparsity of the low×low covariance block.
    pub k_ll: usize,
    /// Regularization weight of the high×high block.
    pub beta_hh: f64,
    /// Regularization weight of the high×low block.
    pub beta_hl: f64,
    /// Regularization weight of the low×low block.
    pub beta_ll: f64,
    /// Maximum degree of high-priority columns.
    pub d_vh: usize,
    /// Maximum degree of low-priority columns.
    pub d_vl: usize,
    /// Maximum degree of high-segment rows (documents the fixed ρ_H input).
    pub d_ch: usize,
    /// Maximum degree of low-segment rows (documents the fixed ρ_L input).
    pub d_cl: usize,
}

impl PreferentialDesignSpec {
    fn validate(&self) -> Result<()> {
        if self.n_h == 0 || self.n_l == 0 {
            return Err(Error::InvalidParameter("block sizes must be positive"));
        }
        let (n_hh, n_hl, n_ll) = (self.n_h * self.n_h, self.n_h * self.n_l, self.n_l * self.n_l);
        if self.k_hh < 1 || self.k_hh >= n_hh || self.k_hl < 1 || self.k_hl >= n_hl || self.k_ll < 1 || self.k_ll >= n_ll {
            return Err(Error::InvalidParameter("block sparsities must satisfy 1 <= k_BB < n_BB"));
        }
        for b in [self.beta_hh, self.beta_hl, self.beta_ll] {
            if !(b > 0.0) || !b.is_finite() {
                return Err(Error::InvalidParameter("block regularization weights must be positive and finite"));
            }
        }
        if self.d_vh < 2 || self.d_vl < 2 || self.d_ch < 2 || self.d_cl < 2 {
            return Err(Error::InvalidParameter("maximum degrees must be at least 2"));
        }
        if self.d_vh > 65 || self.d_vl > 65 {
            return Err(Error::InvalidParameter("maximum column degrees above 65 exceed the design solver's size budget"));
        }
        Ok(())
    }
}

/// The blockwise default regularization weight `β_BB = n_BB/(c₀·k_BB·ln(n_BB/k_BB))`,
/// the per-block analogue of the single-class guarantee recipe.
pub fn blockwise_beta(n_bb: usize, k_bb: usize, c0: f64) -> Result<f64> {
    if k_bb < 1 || k_bb >= n_bb {
        return Err(Error::InvalidParameter("block sparsity must satisfy 1 <= k_BB < n_BB"));
    }
    if !(c0 > 0.0) || !c0.is_finite() {
        return Err(Error::InvalidParameter("c0 must be positive and finite"));
    }
    let (n, k) = (n_bb as f64, k_bb as f64);
    Ok(n / (c0 * k * libm::log(n / k)))
}

/// A designed two-class distribution set with its audit.
#[derive(Debug, Clone, PartialEq)]
pub struct PreferentialDesignResult {
    /// High-priority column degree distribution.
    pub lambda_h: DegreeDistribution,
    /// Low-priority column degree distribution.
    pub lambda_l: DegreeDistribution,
    /// High-segment row degree distribution (copied from the fixed input).
    pub rho_h: DegreeDistribution,
    /// Low-segment row degree distribution (copied from the fixed input).
    pub rho_l: DegreeDistribution,
    /// Achieved compression ratio `d/p`.
    pub objective: f64,
    /// Constraint audit of the returned design.
    pub feasibility_report: FeasibilityReport,
}

/// Scalar constants of one preferential program instance.
struct PrefProgram {
    deg_h: Vec<usize>,
    deg_l: Vec<usize>,
    n_h: f64,
    n_l: f64,
    /// Objective denominator `(mean ρ_H + mean ρ_L)·p`.
    denom: f64,
    /// Edge-consistency target: `mean λ_L = ratio_lh · mean λ_H`.
    ratio_lh: f64,
    kappa: [f64; 3],
    /// ρ-moment vector of the variance-contraction bound.
    v_norm: f64,
    /// Coefficient of `m₋½(λ_H)` in each error-ordering row.
    c27: f64,
    c28: f64,
}

impl PrefProgram {
    fn new(spec: &PreferentialDesignSpec, rho_h: &DegreeDistribution, rho_l: &DegreeDistribution) -> Self {
        let (n_h, n_l) = (spec.n_h as f64, spec.n_l as f64);
        let p = n_h + n_l;
        let (r_h, r_l) = (rho_h.mean(), rho_l.mean());
        let n_hh = n_h * n_h;
        let n_hl = n_h * n_l;
        let n_ll = n_l * n_l;
        let kappa = [
            spec.beta_hh * spec.k_hh as f64 / n_hh,
            spec.beta_hl * spec.k_hl as f64 / n_hl,
            spec.beta_ll * spec.k_ll as f64 / n_ll,
        ];
        let v = [r_h * r_h, r_h * r_l, r_l * r_l];
        PrefProgram {
            deg_h: (2..=spec.d_vh).collect(),
            deg_l: (2..=spec.d_vl).collect(),
            n_h,
            n_l,
            denom: (r_h + r_l) * p,
            ratio_lh: (n_h * r_l) / (n_l * r_h),
            kappa,
            v_norm: libm::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]),
            c27: libm::sqrt((spec.k_hh as f64 / n_hh) / (spec.k_hl as f64 / n_hl)),
            c28: libm::sqrt(libm::sqrt((spec.k_hh as f64 / n_hh) / (spec.k_ll as f64 / n_ll))),
        }
    }

    fn split<'a>(&self, x: &'a [f64]) -> (&'a [f64], &'a [f64]) {
        x.split_at(self.deg_h.len())
    }

    fn moments(w: &[f64], degrees: &[usize]) -> (f64, f64, f64) {
        let mut m1 = 0.0;
        let mut mhalf = 0.0;
        let mut mone = 0.0;
        for (&wi, &d) in w.iter().zip(degrees.iter()) {
            let d = d as f64;
            m1 += wi * d;
            mhalf += wi / libm::sqrt(d);
            mone += wi / d;
        }
        (m1, mhalf, mone)
    }

    /// Norm of the rank-one variance-contraction operator row,
    /// `‖(κ_HH·m_H², κ_HL·m_H·m_L, κ_LL·m_L²)‖₂·‖(m₁ρ_H², m₁ρ_H·m₁ρ_L, m₁ρ_L²)‖₂`.
    fn contraction_norm(&self, mone_h: f64, mone_l: f64) -> f64 {
        let u = [
            self.kappa[0] * mone_h * mone_h,
            self.kappa[1] * mone_h * mone_l,
            self.kappa[2] * mone_l * mone_l,
        ];
        libm::sqrt(u[0] * u[0] + u[1] * u[1] + u[2] * u[2]) * self.v_norm
    }

    /// Penalized objective and gradient at `x = [w_H, w_L]`.
    fn eval(&self, x: &[f64], mu: f64) -> (f64, Vec<f64>) {
        let (wh, wl) = self.split(x);
        let (m1h, mhalf_h, mone_h) = Self::moments(wh, &self.deg_h);
        let (m1l, mhalf_l, mone_l) = Self::moments(wl, &self.deg_l);
        let nh = self.deg_h.len();
        let mut grad = vec![0.0; x.len()];

        // Objective: d/p.
        let obj = (self.n_h * m1h + self.n_l * m1l) / self.denom;
        for (g, &d) in grad[..nh].iter_mut().zip(self.deg_h.iter()) {
            *g += self.n_h * d as f64 / self.denom;
        }
        for (g, &d) in grad[nh..].iter_mut().zip(self.deg_l.iter()) {
            *g += self.n_l * d as f64 / self.denom;
        }

        // Edge-consistency residual r = m1l/(ratio·m1h) − 1.
        let r = m1l / (self.ratio_lh * m1h) - 1.0;
        let mut penalty = r * r;
        let dr_dm1l = 1.0 / (self.ratio_lh * m1h);
        let dr_dm1h = -m1l / (self.ratio_lh * m1h * m1h);
        for (g, &d) in grad[..nh].iter_mut().zip(self.deg_h.iter()) {
            *g += mu * 2.0 * r * dr_dm1h * d as f64;
        }
        for (g, &d) in grad[nh..].iter_mut().zip(self.deg_l.iter()) {
            *g += mu * 2.0 * r * dr_dm1l * d as f64;
        }

        // Variance contraction: ‖u‖‖v‖ ≤ 1.
        let g2 = self.contraction_norm(mone_h, mone_l) - 1.0;
        if g2 > 0.0 {
            penalty += g2 * g2;
            let u = [
                self.kappa[0] * mone_h * mone_h,
                self.kappa[1] * mone_h * mone_l,
                self.kappa[2] * mone_l * mone_l,
            ];
            let u_norm = libm::sqrt(u[0] * u[0] + u[1] * u[1] + u[2] * u[2]).max(1e-300);
            let dn_dmh = self.v_norm * (2.0 * u[0] * self.kappa[0] * mone_h + u[1] * self.kappa[1] * mone_l) / u_norm;
            let dn_dml = self.v_norm * (u[1] * self.kappa[1] * mone_h + 2.0 * u[2] * self.kappa[2] * mone_l) / u_norm;
            for (g, &d) in grad[..nh].iter_mut().zip(self.deg_h.iter()) {
                *g += mu * 2.0 * g2 * dn_dmh / d as f64;
            }
            for (g, &d) in grad[nh..].iter_mut().zip(self.deg_l.iter()) {
                *g += mu * 2.0 * g2 * dn_dml / d as f64;
            }
        }

        // Error-ordering rows: c·m₋½(λ_H) ≤ m₋½(λ_L), c ∈ {c27, c28}.
        for c in [self.c27, self.c28] {
            let viol = c * mhalf_h - mhalf_l;
            if viol > 0.0 {
                penalty += viol * viol;
                for (g, &d) in grad[..nh].iter_mut().zip(self.deg_h.iter()) {
                    *g += mu * 2.0 * viol * c / libm::sqrt(d as f64);
                }
                for (g, &d) in grad[nh..].iter_mut().zip(self.deg_l.iter()) {
                    *g -= mu * 2.0 * viol / libm::sqrt(d as f64);
                }
            }
        }

        (obj + mu * penalty, grad)
    }
}

/// Euclidean projection onto the probability simplex.
fn project_simplex(w: &mut [f64]) {
    let mut sorted: Vec<f64> = w.to_vec();
    sorted.sort_unstable_by(|a, b| b.partial_cmp(a).expect("projection input must be finite"));
    let mut cumulative = 0.0;
    let mut theta = 0.0;
    for (i, &v) in sorted.iter().enumerate() {
        cumulative += v;
        let t = (cumulative - 1.0) / (i + 1) as f64;
        if v - t > 0.0 {
            theta = t;
        }
    }
    for v in w.iter_mut() {
        *v = (*v - theta).max(0.0);
    }
}

/// Projects the concatenated weight vector onto the product of simplices.
fn project_blocks(x: &mut [f64], split: usize) {
    let (wh, wl) = x.split_at_mut(split);
    project_simplex(wh);
    project_simplex(wl);
}

/// Shifts probability mass between support degrees so the distribution's
/// mean moves by exactly `delta`, staying within the simplex.
fn adjust_mean_exact(weights: &mut [f64], degrees: &[usize], delta: f64) -> bool {
    let mut remaining = delta;
    for _ in 0..degrees.len() * degrees.len() {
        if remaining.abs() < 1e-14 {
            return true;
        }
        // Donor: the heaviest weight whose degree can move in the needed
        // direction; receiver: the farthest degree on the other side.
        let mut moved = false;
        if remaining > 0.0 {
            for lo in 0..degrees.len() {
                if weights[lo] <= 0.0 {
                    continue;
                }
                for hi in (lo + 1..degrees.len()).rev() {
                    let gap = (degrees[hi] - degrees[lo]) as f64;
                    let t = (remaining / gap).min(weights[lo]);
                    if t > 0.0 {
                        weights[lo] -= t;
                        weights[hi] += t;
                        remaining -= t * gap;
                        moved = true;
                        break;
                    }
                }
                if moved {
                    break;
                }
            }
        } else {
            for hi in (0..degrees.len()).rev() {
                if weights[hi] <= 0.0 {
                    continue;
                }
                for lo in 0..hi {
                    let gap = (degrees[hi] - degrees[lo]) as f64;
                    let t = ((-remaining) / gap).min(weights[hi]);
                    if t > 0.0 {
                        weights[hi] -= t;
                        weights[lo] += t;
                        remaining += t * gap;
                        moved = true;
                        break;
                    }
                }
                if moved {
                    break;
                }
            }
        }
        if !moved {
            return false;
        }
    }
    remaining.abs() < 1e-14
}

/// Builds the audit report for a preferential design point.
fn pref_report(
    prog: &PrefProgram,
    spec: &PreferentialDesignSpec,
    wh: &[f64],
    wl: &[f64],
) -> FeasibilityReport {
    let (m1h, mhalf_h, mone_h) = PrefProgram::moments(wh, &prog.deg_h);
    let (m1l, mhalf_l, mone_l) = PrefProgram::moments(wl, &prog.deg_l);
    // (mean λ_L/mean λ_H)·(mean ρ_H/mean ρ_L), where the ρ-mean ratio is
    // recovered from the stored consistency target.
    let ratio = (m1l / m1h) * (prog.n_h / (prog.n_l * prog.ratio_lh));
    let rows = vec![
        ConstraintSlack::equality(
            "edge_consistency_ratio",
            "(mean lambda_L / mean lambda_H) * (mean rho_H / mean rho_L) = n_H/n_L",
            ratio,
            prog.n_h / prog.n_l,
        ),
        ConstraintSlack::le(
            "variance_contraction_operator_norm",
            "||(k_HH b_HH/n_HH m_H^2, k_HL b_HL/n_HL m_H m_L, k_LL b_LL/n_LL m_L^2)||_2 * ||(r_H^2, r_H r_L, r_L^2)||_2 <= 1, with m_B the inverse-degree moment of lambda_B and r_B the mean of rho_B",
            prog.contraction_norm(mone_h, mone_l),
            1.0,
        ),
        ConstraintSlack::le(
            "priority_noise_hh_vs_hl",
            "sqrt(k_HH/n_HH) m_{-1/2}(lambda_H) <= sqrt(k_HL/n_HL) m_{-1/2}(lambda_L), audited in the normalized form c*m_{-1/2}(lambda_H) <= m_{-1/2}(lambda_L)",
            prog.c27 * mhalf_h,
            mhalf_l,
        ),
        ConstraintSlack::le(
            "priority_noise_hh_vs_ll",
            "(k_HH/n_HH)^(1/4) m_{-1/2}(lambda_H) <= (k_LL/n_LL)^(1/4) m_{-1/2}(lambda_L), audited in the normalized form c*m_{-1/2}(lambda_H) <= m_{-1/2}(lambda_L)",
            prog.c28 * mhalf_h,
            mhalf_l,
        ),
        ConstraintSlack::info(
            "sparsity_ordering",
            "priority intent k_HH/n_H >> k_LL/n_L, checked as k_HH*n_L > k_LL*n_H; informational only",
            (spec.k_hh * spec.n_l) as f64,
            (spec.k_ll * spec.n_h) as f64,
        ),
    ];
    FeasibilityReport { rows }
}

/// Restores exact feasibility with the block means pinned, via one linear
/// program per column class. Used only when the gradient solve leaves a
/// constraint violated beyond replay tolerance.
fn pref_polish(prog: &PrefProgram, x: &mut [f64]) -> Result<()> {
    let nh = prog.deg_h.len();
    let (m1h, _, _) = {
        let (wh, _) = prog.split(x);
        PrefProgram::moments(wh, &prog.deg_h)
    };

    // Low block: mean pinned to the consistency target; maximize the
    // error-ordering slack, i.e. maximize m₋½(λ_L).
    let target_l = prog.ratio_lh * m1h;
    let costs: Vec<f64> = prog.deg_l.iter().map(|&d| -1.0 / libm::sqrt(d as f64)).collect();
    let lp = LinearProgram {
        costs,
        eq: vec![
            (vec![1.0; prog.deg_l.len()], 1.0),
            (prog.deg_l.iter().map(|&d| d as f64).collect(), target_l),
        ],
        ub: vec![],
    };
    let sol = lp_solve(&lp).map_err(|_| {
        Error::Infeasible("edge_consistency_ratio: no low-priority distribution attains the consistency mean within its degree budget")
    })?;
    x[nh..].copy_from_slice(&sol.x);

    let (_, mhalf_l, _) = {
        let (_, wl) = prog.split(x);
        PrefProgram::moments(wl, &prog.deg_l)
    };

    // High block: mean pinned to its own value; maximize the ordering slack
    // by minimizing m₋½(λ_H), subject to the ordering rows.
    let costs: Vec<f64> = prog.deg_h.iter().map(|&d| 1.0 / libm::sqrt(d as f64)).collect();
    let half_row: Vec<f64> = prog.deg_h.iter().map(|&d| 1.0 / libm::sqrt(d as f64)).collect();
    let lp = LinearProgram {
        costs,
        eq: vec![
            (vec![1.0; prog.deg_h.len()], 1.0),
            (prog.deg_h.iter().map(|&d| d as f64).collect(), m1h),
        ],
        ub: vec![
            (half_row.clone(), mhalf_l / prog.c27),
            (half_row, mhalf_l / prog.c28),
        ],
    };
    let sol = lp_solve(&lp).map_err(|_| {
        Error::Infeasible("priority_noise ordering: no high-priority distribution satisfies the error-ordering rows at the designed mean")
    })?;
    x[..nh].copy_from_slice(&sol.x);
    Ok(())
}

/// Names for error reporting, in report order.
fn pref_violation_error(report: &FeasibilityReport) -> Error {
    match report.first_violation().map(|r| r.name) {
        Some("edge_consistency_ratio") => {
            Error::Infeasible("edge_consistency_ratio: the column-class means cannot satisfy the edge-count consistency equation")
        }
        Some("variance_contraction_operator_norm") => {
            Error::Infeasible("variance_contraction_operator_norm: the contraction bound exceeds one for every distribution within the degree budgets")
        }
        Some("priority_noise_hh_vs_hl") => {
            Error::Infeasible("priority_noise_hh_vs_hl: the high-priority noise ordering cannot be satisfied")
        }
        Some("priority_noise_hh_vs_ll") => {
            Error::Infeasible("priority_noise_hh_vs_ll: the high-priority noise ordering cannot be satisfied")
        }
        _ => Error::Infeasible("preferential design constraints cannot all be satisfied"),
    }
}

/// Solves the two-class priority design program with the check-node
/// distributions fixed.
///
/// Minimizes the compression ratio `d/p` over `(λ_H, λ_L)` on the product of
/// simplices subject to edge-count consistency between the classes, the
/// variance-contraction operator-norm bound, and the two priority
/// error-ordering rows. Projected gradient descent with Armijo backtracking
/// runs over a quadratic-penalty ramp; the returned point is verified
/// exactly, with a linear-program feasibility restoration if the gradient
/// phase leaves any slack beyond replay tolerance. Deterministic: the solver
/// starts from uniform distributions, so symmetric inputs produce exactly
/// symmetric designs.
pub fn design_preferential(
    spec: &PreferentialDesignSpec,
    rho_h: &DegreeDistribution,
    rho_l: &DegreeDistribution,
) -> Result<PreferentialDesignResult> {
    spec.validate()?;
    if rho_h.max_degree() > spec.d_ch || rho_l.max_degree() > spec.d_cl {
        return Err(Error::InvalidParameter("fixed check distribution exceeds its declared maximum degree"));
    }
    let prog = PrefProgram::new(spec, rho_h, rho_l);

    // Closed-form prechecks at the extreme points, so clearly impossible
    // programs fail fast with the binding constraint named.
    {
        let mone_h_min = 1.0 / spec.d_vh as f64;
        let mone_l_min = 1.0 / spec.d_vl as f64;
        if prog.contraction_norm(mone_h_min, mone_l_min) > 1.0 + 1e-12 {
            return Err(Error::Infeasible(
                "variance_contraction_operator_norm: the contraction bound exceeds one for every distribution within the degree budgets",
            ));
        }
        // Each ordering row is unsatisfiable if it fails even at the extreme
        // moments (λ_H massed at its top degree, λ_L at degree 2).
        let rhs_max = 1.0 / libm::sqrt(2.0);
        let lhs_floor = 1.0 / libm::sqrt(spec.d_vh as f64);
        if prog.c27 * lhs_floor > rhs_max + 1e-12 {
            return Err(Error::Infeasible(
                "priority_noise_hh_vs_hl: the high-priority noise ordering cannot be satisfied",
            ));
        }
        if prog.c28 * lhs_floor > rhs_max + 1e-12 {
            return Err(Error::Infeasible(
                "priority_noise_hh_vs_ll: the high-priority noise ordering cannot be satisfied",
            ));
        }
        // Consistency: mean λ_L = ratio·mean λ_H must intersect both ranges.
        let lo = prog.ratio_lh * 2.0;
        let hi = prog.ratio_lh * spec.d_vh as f64;
        if hi < 2.0 - 1e-12 || lo > spec.d_vl as f64 + 1e-12 {
            return Err(Error::Infeasible(
                "edge_consistency_ratio: the column-class means cannot satisfy the edge-count consistency equation",
            ));
        }
    }

    // Projected gradient descent over the penalty ramp, from the uniform
    // point (which preserves any symmetry of the program exactly).
    let nh = prog.deg_h.len();
    let nl = prog.deg_l.len();
    let mut x = vec![0.0; nh + nl];
    for v in x[..nh].iter_mut() {
        *v = 1.0 / nh as f64;
    }
    for v in x[nh..].iter_mut() {
        *v = 1.0 / nl as f64;
    }
    for stage in 0..5 {
        let mu = libm::pow(10.0, 2.0 + 2.0 * stage as f64);
        for _ in 0..20_000 {
            let (f, grad) = prog.eval(&x, mu);
            // Projected-gradient stationarity measure at unit step.
            let mut probe = x.clone();
            for (p, g) in probe.iter_mut().zip(grad.iter()) {
                *p -= g;
            }
            project_blocks(&mut probe, nh);
            let pg_norm = libm::sqrt(
                probe.iter().zip(x.iter()).map(|(a, b)| (a - b) * (a - b)).sum::<f64>(),
            );
            if pg_norm < 1e-8 {
                break;
            }
            // Armijo backtracking from unit step, halving.
            let mut t = 1.0;
            let mut accepted = false;
            while t > 1e-16 {
                let mut cand = x.clone();
                for (c, g) in cand.iter_mut().zip(grad.iter()) {
                    *c -= t * g;
                }
                project_blocks(&mut cand, nh);
                let step_sq: f64 = cand.iter().zip(x.iter()).map(|(a, b)| (a - b) * (a - b)).sum();
                if step_sq == 0.0 {
                    break;
                }
                let (fc, _) = prog.eval(&cand, mu);
                if fc <= f - 1e-4 * step_sq / t {
                    x = cand;
                    accepted = true;
                    break;
                }
                t *= 0.5;
            }
            if !accepted {
                break;
            }
        }
    }

    // Exact consistency restoration: shift low-class mass so the equality
    // holds to machine precision.
    {
        let (m1h, _, _) = {
            let (wh, _) = prog.split(&x);
            PrefProgram::moments(wh, &prog.deg_h)
        };
        let (m1l, _, _) = {
            let (_, wl) = prog.split(&x);
            PrefProgram::moments(wl, &prog.deg_l)
        };
        let delta = prog.ratio_lh * m1h - m1l;
        let (_, wl) = x.split_at_mut(nh);
        adjust_mean_exact(wl, &prog.deg_l, delta);
    }

    let (wh, wl) = prog.split(&x);
    let mut report = pref_report(&prog, spec, wh, wl);
    if !report.replay_ok() {
        // The gradient phase left a violated row: restore feasibility at the
        // designed means by exact linear programs, then re-audit.
        pref_polish(&prog, &mut x)?;
        let (wh, wl) = prog.split(&x);
        report = pref_report(&prog, spec, wh, wl);
        if !report.replay_ok() {
            return Err(pref_violation_error(&report));
        }
    }

    let (wh, wl) = prog.split(&x);
    let lambda_h = distribution_from_weights(&prog.deg_h, wh)?;
    let lambda_l = distribution_from_weights(&prog.deg_l, wl)?;
    let objective = (prog.n_h * lambda_h.mean() + prog.n_l * lambda_l.mean()) / prog.denom;
    if !(objective <= 1.0 + 1e-9) {
        return Err(Error::Infeasible(
            "optimal compression ratio exceeds one; the degree budget admits no compressive design",
        ));
    }
    // Re-audit on the cleaned distributions so the report matches the
    // returned weights bit for bit.
    let report = {
        let dense = |dist: &DegreeDistribution, degrees: &[usize]| -> Vec<f64> {
            degrees.iter().map(|&d| dist.prob(d)).collect()
        };
        pref_report(&prog, spec, &dense(&lambda_h, &prog.deg_h), &dense(&lambda_l, &prog.deg_l))
    };
    if !report.replay_ok() {
        return Err(pref_violation_error(&report));
    }
    Ok(PreferentialDesignResult {
        lambda_h,
        lambda_l,
        rho_h: rho_h.clone(),
        rho_l: rho_l.clone(),
        objective,
        feasibility_report: report,
    })
}
