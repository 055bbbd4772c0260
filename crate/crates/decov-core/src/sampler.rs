//! Sampling of sparse sign sensing matrices with prescribed degree laws.
//!
//! Given designed column/row degree distributions, [`sample_sensing_matrix`]
//! instantiates a concrete d×p matrix by a configuration-model pairing:
//! degrees are drawn i.i.d. from the laws, stub counts are repaired to exact
//! equality, and stubs are matched uniformly with duplicate placements
//! re-paired. [`sample_preferential_matrix`] does the same with a column
//! partition (priority block / background block), and
//! [`baseline_left_regular`] builds the unsigned δ-left-regular comparison
//! matrix.

use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::factorgraph::DegreeDistribution;
use crate::linalg::Mat;
use crate::{Error, Result};

/// Retry budget when a stub placement collides with an existing entry.
const COLLISION_RETRIES: usize = 100;

/// Relative imbalance of total column vs. row degree mass tolerated before
/// sampling is refused outright.
const EDGE_BALANCE_TOL: f64 = 0.05;

/// A sparse d×p sensing matrix with entries in `{0, ±norm_const^(−1/2)}`.
///
/// Entries are stored as `(row, col, value)` triplets sorted row-major with
/// no duplicates. `norm_const` records the normalization constant `A` whose
/// inverse square root sets the entry magnitude; the unsigned baseline uses
/// `norm_const = 1` so its `+1` entries follow the same convention.
#[derive(Debug, Clone, PartialEq)]
pub struct SensingMatrix {
    d: usize,
    p: usize,
    entries: Vec<(usize, usize, f64)>,
    norm_const: f64,
}

impl SensingMatrix {
    /// Builds a matrix from triplets, validating bounds, entry magnitudes,
    /// duplicate-freeness, and row-major ordering (entries are re-sorted).
    pub fn new(d: usize, p: usize, mut entries: Vec<(usize, usize, f64)>, norm_const: f64) -> Result<Self> {
        if d == 0 || p == 0 {
            return Err(Error::InvalidParameter("matrix dimensions must be positive"));
        }
        if !(norm_const > 0.0) || !norm_const.is_finite() {
            return Err(Error::InvalidParameter("norm_const must be positive and finite"));
        }
        let magnitude = 1.0 / libm::sqrt(norm_const);
        for &(r, c, v) in &entries {
            if r >= d || c >= p {
                return Err(Error::InvalidParameter("matrix entry out of bounds"));
            }
            if (v.abs() - magnitude).abs() > 1e-12 * magnitude.max(1.0) {
                return Err(Error::InvalidParameter("entry magnitude must be norm_const^(-1/2)"));
            }
        }
        entries.sort_unstable_by_key(|&(r, c, _)| (r, c));
        if entries.windows(2).any(|w| (w[0].0, w[0].1) == (w[1].0, w[1].1)) {
            return Err(Error::InvalidParameter("duplicate matrix entry"));
        }
        Ok(Self { d, p, entries, norm_const })
    }

    /// Number of rows (compressed dimension).
    pub fn d(&self) -> usize {
        self.d
    }

    /// Number of columns (ambient dimension).
    pub fn p(&self) -> usize {
        self.p
    }

    /// Number of nonzero entries.
    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    /// Normalization constant `A` (entry magnitude is `A^(−1/2)`).
    pub fn norm_const(&self) -> f64 {
        self.norm_const
    }

    /// Sparse triplets `(row, col, value)` in row-major order.
    pub fn entries(&self) -> &[(usize, usize, f64)] {
        &self.entries
    }

    /// Nonzero count of each column.
    pub fn col_degrees(&self) -> Vec<usize> {
        let mut deg = vec![0usize; self.p];
        for &(_, c, _) in &self.entries {
            deg[c] += 1;
        }
        deg
    }

    /// Nonzero count of each row.
    pub fn row_degrees(&self) -> Vec<usize> {
        let mut deg = vec![0usize; self.d];
        for &(r, _, _) in &self.entries {
            deg[r] += 1;
        }
        deg
    }

    /// Dense d×p copy.
    pub fn to_dense(&self) -> Mat {
        let mut m = Mat::zeros(self.d, self.p);
        for &(r, c, v) in &self.entries {
            m.set(r, c, v);
        }
        m
    }

    /// Sparse matrix–vector product `y = A x`.
    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.p);
        let mut y = vec![0.0; self.d];
        for &(r, c, v) in &self.entries {
            y[r] += v * x[c];
        }
        y
    }
}

/// Draws one degree from a distribution by inverse-CDF lookup.
fn draw_degree<R: Rng>(dist: &DegreeDistribution, rng: &mut R) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    let mut last = 2;
    for (deg, w) in dist.support() {
        acc += w;
        last = deg;
        if u < acc {
            return deg;
        }
    }
    last
}

/// In-place Fisher–Yates shuffle with the caller's RNG stream.
fn shuffle<R: Rng, T>(items: &mut [T], rng: &mut R) {
    for i in (1..items.len()).rev() {
        let j = rng.gen_range(0..=i);
        items.swap(i, j);
    }
}

/// Places one column block of the configuration model into the occupancy
/// grid `occ` (row-major d×p_total), columns `col_offset..col_offset+cols`.
///
/// Column degrees come from `lambda`, row degrees from `rho`. The drawn row
/// degrees are repaired by ±1 steps at random rows until the stub counts
/// match (never dropping a row below degree 2). Duplicate placements retry a
/// uniformly random row for the same column; exhausting the retry budget is
/// a sampling error.
fn place_block<R: Rng>(
    lambda: &DegreeDistribution,
    rho: &DegreeDistribution,
    d: usize,
    p_total: usize,
    col_offset: usize,
    cols: usize,
    occ: &mut [bool],
    rng: &mut R,
) -> Result<()> {
    let col_degs: Vec<usize> = (0..cols).map(|_| draw_degree(lambda, rng)).collect();
    // A row meets each column at most once, so its block degree caps at the
    // column count; clamp before repair so the balance loop can succeed.
    let mut row_degs: Vec<usize> = (0..d).map(|_| draw_degree(rho, rng).min(cols)).collect();

    let need: usize = col_degs.iter().sum();
    if col_degs.iter().any(|&deg| deg > d) {
        return Err(Error::Sampling("column degree exceeds row count; increase d"));
    }

    // Repair the row-degree sequence until stub counts agree. Each step
    // adjusts one uniformly chosen row by ±1, keeping degrees in [2, cols].
    let mut have: usize = row_degs.iter().sum();
    let mut guard = 0usize;
    while have != need {
        guard += 1;
        if guard > 1000 * d + 10_000 {
            return Err(Error::Sampling("row-degree repair failed to balance stub counts"));
        }
        let i = rng.gen_range(0..d);
        if have < need {
            if row_degs[i] < cols {
                row_degs[i] += 1;
                have += 1;
            }
        } else if row_degs[i] > 2 {
            row_degs[i] -= 1;
            have -= 1;
        }
    }

    // Column stubs in column order, row stubs shuffled, then zipped.
    let mut row_stubs = Vec::with_capacity(need);
    for (r, &deg) in row_degs.iter().enumerate() {
        for _ in 0..deg {
            row_stubs.push(r);
        }
    }
    shuffle(&mut row_stubs, rng);

    let mut stub = 0usize;
    for (local, &deg) in col_degs.iter().enumerate() {
        let c = col_offset + local;
        for _ in 0..deg {
            let r = row_stubs[stub];
            stub += 1;
            if !occ[r * p_total + c] {
                occ[r * p_total + c] = true;
                continue;
            }
            // Collision: re-pair this stub with a random row holding the
            // column fixed, so the column degree stays exact.
            let mut placed = false;
            for _ in 0..COLLISION_RETRIES {
                let r2 = rng.gen_range(0..d);
                if !occ[r2 * p_total + c] {
                    occ[r2 * p_total + c] = true;
                    placed = true;
                    break;
                }
            }
            if !placed {
                return Err(Error::Sampling("could not place edge without duplicates; increase dimensions"));
            }
        }
    }
    Ok(())
}

/// Converts an occupancy grid into signed triplets, drawing each sign as an
/// independent fair coin in row-major entry order.
fn signed_entries<R: Rng>(occ: &[bool], d: usize, p: usize, norm_const: f64, rng: &mut R) -> Vec<(usize, usize, f64)> {
    let magnitude = 1.0 / libm::sqrt(norm_const);
    let mut entries = Vec::new();
    for r in 0..d {
        for c in 0..p {
            if occ[r * p + c] {
                let sign = if rng.gen::<bool>() { 1.0 } else { -1.0 };
                entries.push((r, c, sign * magnitude));
            }
        }
    }
    entries
}

/// Checks that expected stub masses agree within [`EDGE_BALANCE_TOL`].
fn check_edge_balance(cols: usize, lambda: &DegreeDistribution, d: usize, rho: &DegreeDistribution) -> Result<()> {
    let col_mass = cols as f64 * lambda.mean();
    let row_mass = d as f64 * rho.mean();
    if (col_mass - row_mass).abs() > EDGE_BALANCE_TOL * col_mass.max(row_mass) {
        return Err(Error::InvalidParameter("column and row degree masses disagree by more than 5%"));
    }
    Ok(())
}

/// Samples a d×p sensing matrix whose column degrees follow `lambda` and row
/// degrees follow `rho`, with entries `±norm_const^(−1/2)` by fair coin.
///
/// Deterministic given `seed`. Fails if the expected stub masses `p·E_λ[deg]`
/// and `d·E_ρ[deg]` disagree by more than 5%, or if duplicate-free placement
/// is impossible within the retry budget.
///
/// # Examples
///
/// ```
/// use decov_core::factorgraph::DegreeDistribution;
/// use decov_core::sampler::sample_sensing_matrix;
///
/// let lambda = DegreeDistribution::point_mass(2).unwrap();
/// let rho = DegreeDistribution::point_mass(3).unwrap();
/// let a = sample_sensing_matrix(&lambda, &rho, 4, 6, 2.0, 7).unwrap();
/// // Column degrees are exact; row degrees can shift by collision
/// // re-pairing but always sum to the same edge count.
/// assert!(a.col_degrees().iter().all(|&deg| deg == 2));
/// assert_eq!(a.row_degrees().iter().sum::<usize>(), 12);
/// ```
pub fn sample_sensing_matrix(
    lambda: &DegreeDistribution,
    rho: &DegreeDistribution,
    d: usize,
    p: usize,
    norm_const: f64,
    seed: u64,
) -> Result<SensingMatrix> {
    if d == 0 || p == 0 {
        return Err(Error::InvalidParameter("matrix dimensions must be positive"));
    }
    check_edge_balance(p, lambda, d, rho)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut occ = vec![false; d * p];
    place_block(lambda, rho, d, p, 0, p, &mut occ, &mut rng)?;
    let entries = signed_entries(&occ, d, p, norm_const, &mut rng);
    SensingMatrix::new(d, p, entries, norm_const)
}

/// Samples a preferential sensing matrix: the first `n_h` columns follow
/// `lambda_h` with per-row degrees from `rho_h`, the remaining `n_l` columns
/// follow `lambda_l`/`rho_l`. Both blocks share one `norm_const`.
///
/// With identical block laws the partition is meaningless, so this case
/// delegates to [`sample_sensing_matrix`] and returns the exact same matrix
/// that the unpartitioned sampler yields for the same seed.
pub fn sample_preferential_matrix(
    lambda_h: &DegreeDistribution,
    lambda_l: &DegreeDistribution,
    rho_h: &DegreeDistribution,
    rho_l: &DegreeDistribution,
    d: usize,
    n_h: usize,
    n_l: usize,
    norm_const: f64,
    seed: u64,
) -> Result<SensingMatrix> {
    if d == 0 || n_h == 0 || n_l == 0 {
        return Err(Error::InvalidParameter("matrix dimensions must be positive"));
    }
    if lambda_h == lambda_l && rho_h == rho_l {
        return sample_sensing_matrix(lambda_h, rho_h, d, n_h + n_l, norm_const, seed);
    }
    check_edge_balance(n_h, lambda_h, d, rho_h)?;
    check_edge_balance(n_l, lambda_l, d, rho_l)?;
    let p = n_h + n_l;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut occ = vec![false; d * p];
    place_block(lambda_h, rho_h, d, p, 0, n_h, &mut occ, &mut rng)?;
    place_block(lambda_l, rho_l, d, p, n_h, n_l, &mut occ, &mut rng)?;
    let entries = signed_entries(&occ, d, p, norm_const, &mut rng);
    SensingMatrix::new(d, p, entries, norm_const)
}

/// Builds the δ-left-regular baseline: each column gets exactly `delta`
/// ones in uniformly chosen distinct rows (unsigned adjacency, value +1).
pub fn baseline_left_regular(delta: usize, d: usize, p: usize, seed: u64) -> Result<SensingMatrix> {
    if d == 0 || p == 0 {
        return Err(Error::InvalidParameter("matrix dimensions must be positive"));
    }
    if delta < 1 || delta > d {
        return Err(Error::InvalidParameter("column degree must satisfy 1 <= delta <= d"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut entries = Vec::with_capacity(delta * p);
    let mut scratch: Vec<usize> = (0..d).collect();
    for c in 0..p {
        // Partial Fisher–Yates: the first `delta` slots become a uniform
        // sample of distinct rows.
        for i in 0..delta {
            let j = rng.gen_range(i..d);
            scratch.swap(i, j);
        }
        let mut rows: Vec<usize> = scratch[..delta].to_vec();
        rows.sort_unstable();
        for r in rows {
            entries.push((r, c, 1.0));
        }
    }
    SensingMatrix::new(d, p, entries, 1.0)
}
