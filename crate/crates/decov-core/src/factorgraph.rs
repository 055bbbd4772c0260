//! Degree-distribution algebra for the Kronecker factor graph.
//!
//! A sparse sensing matrix `A` is described by two degree distributions: the
//! column (variable-node) law `λ` and the row (check-node) law `ρ`. The
//! measurement operator that acts on vectorized covariance matrices is the
//! Kronecker square `A ⊗ A`, whose factor-graph node degrees are *products*
//! of independent draws from the base laws. This module provides:
//!
//! * [`DegreeDistribution`] — a validated probability law on degrees ≥ 2,
//! * [`kron_degree_law`] / [`product_law`] — the induced product-degree laws,
//! * [`coeff_a1`] / [`coeff_a2`] — the two scalar coefficients of the
//!   density-evolution recursion, in factorized `O(d)` form.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use crate::{Error, Result};

/// Tolerance for requiring that probability weights sum to one.
const MASS_TOL: f64 = 1e-12;

/// A probability distribution over node degrees `2..=max_degree`.
///
/// Weights are stored densely and indexed by degree, so `weights()[k]` is the
/// probability of degree `k`. Index 0 is unused and index 1 is always zero:
/// degree-1 rows or columns would make the measurement operator lose
/// information, so they are excluded by construction.
///
/// # Examples
///
/// ```
/// use decov_core::factorgraph::DegreeDistribution;
///
/// let d = DegreeDistribution::from_pairs(&[(2, 0.5), (3, 0.5)]).unwrap();
/// assert_eq!(d.max_degree(), 3);
/// assert!((d.moment(1.0) - 2.5).abs() < 1e-15);
/// ```
#[derive(Debug, Clone, PartialEq)]
pub struct DegreeDistribution {
    weights: Vec<f64>,
}

impl DegreeDistribution {
    /// Builds a distribution from dense weights indexed by degree.
    ///
    /// `weights[k]` is the probability of degree `k`; entries 0 and 1 must be
    /// zero, all entries must be non-negative, the total mass must be 1
    /// within `1e-12`, and the maximum degree must be at least 2.
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.len() < 3 {
            return Err(Error::InvalidParameter("degree distribution needs max degree >= 2"));
        }
        if weights[0] != 0.0 || weights[1] != 0.0 {
            return Err(Error::InvalidParameter("degree-0 and degree-1 weights must be zero"));
        }
        let mut sum = 0.0;
        for &w in &weights {
            if !(w >= 0.0) || !w.is_finite() {
                return Err(Error::InvalidParameter("degree weights must be non-negative and finite"));
            }
            sum += w;
        }
        if (sum - 1.0).abs() > MASS_TOL {
            return Err(Error::InvalidParameter("degree weights must sum to one"));
        }
        let mut weights = weights;
        while weights.len() > 3 && *weights.last().unwrap() == 0.0 {
            weights.pop();
        }
        Ok(Self { weights })
    }

    /// Builds a distribution from `(degree, weight)` pairs.
    ///
    /// Repeated degrees accumulate. Degrees must be ≥ 2.
    pub fn from_pairs(pairs: &[(usize, f64)]) -> Result<Self> {
        let max = pairs.iter().map(|&(d, _)| d).max().unwrap_or(0);
        if max < 2 {
            return Err(Error::InvalidParameter("degree distribution needs max degree >= 2"));
        }
        let mut weights = vec![0.0; max + 1];
        for &(d, w) in pairs {
            if d < 2 {
                return Err(Error::InvalidParameter("degrees below 2 are not allowed"));
            }
            weights[d] += w;
        }
        Self::new(weights)
    }

    /// A distribution concentrated on a single degree.
    pub fn point_mass(degree: usize) -> Result<Self> {
        Self::from_pairs(&[(degree, 1.0)])
    }

    /// The largest degree with positive probability.
    pub fn max_degree(&self) -> usize {
        self.weights.len() - 1
    }

    /// Dense weights indexed by degree (`weights()[k]` = P(degree = k)).
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Probability of the given degree (zero outside the stored range).
    pub fn prob(&self, degree: usize) -> f64 {
        self.weights.get(degree).copied().unwrap_or(0.0)
    }

    /// Iterates over `(degree, weight)` pairs with positive weight.
    pub fn support(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.weights
            .iter()
            .enumerate()
            .filter(|&(_, &w)| w > 0.0)
            .map(|(d, &w)| (d, w))
    }

    /// The moment `Σ_k P(k) · k^exponent` for any real exponent.
    ///
    /// Negative and fractional exponents appear throughout the design
    /// constraints (e.g. `Σ λ_j / √j`), so the exponent is a free parameter.
    pub fn moment(&self, exponent: f64) -> f64 {
        self.support()
            .map(|(d, w)| w * libm::pow(d as f64, exponent))
            .sum()
    }

    /// Mean degree; shorthand for `moment(1.0)`.
    pub fn mean(&self) -> f64 {
        self.support().map(|(d, w)| w * d as f64).sum()
    }
}

/// The degree law of the Kronecker product graph: support points are
/// products of base degrees.
///
/// Returned by [`kron_degree_law`] and [`product_law`]; points are sorted by
/// product value and carry total mass 1.
#[derive(Debug, Clone, PartialEq)]
pub struct KronDegreeLaw {
    points: Vec<(usize, f64)>,
}

impl KronDegreeLaw {
    /// `(product_degree, probability)` pairs in increasing degree order.
    pub fn points(&self) -> &[(usize, f64)] {
        &self.points
    }

    /// Total probability mass (1 up to accumulated rounding).
    pub fn total_mass(&self) -> f64 {
        self.points.iter().map(|&(_, w)| w).sum()
    }

    /// Mean of the product law.
    pub fn mean(&self) -> f64 {
        self.points.iter().map(|&(d, w)| w * d as f64).sum()
    }
}

/// Law of the product of independent draws `d ~ a`, `d′ ~ b`.
///
/// Probabilities of coinciding products accumulate, so the support is a set.
pub fn product_law(a: &DegreeDistribution, b: &DegreeDistribution) -> KronDegreeLaw {
    let mut acc: BTreeMap<usize, f64> = BTreeMap::new();
    for (da, wa) in a.support() {
        for (db, wb) in b.support() {
            *acc.entry(da * db).or_insert(0.0) += wa * wb;
        }
    }
    KronDegreeLaw { points: acc.into_iter().collect() }
}

/// Law of the product of two i.i.d. draws from `base`.
///
/// This is the check-node (or variable-node) degree law of the Kronecker
/// square of a matrix whose node degrees follow `base`.
///
/// # Examples
///
/// ```
/// use decov_core::factorgraph::{kron_degree_law, DegreeDistribution};
///
/// let base = DegreeDistribution::from_pairs(&[(2, 0.5), (3, 0.5)]).unwrap();
/// let law = kron_degree_law(&base);
/// assert_eq!(law.points(), &[(4, 0.25), (6, 0.5), (9, 0.25)]);
/// ```
pub fn kron_degree_law(base: &DegreeDistribution) -> KronDegreeLaw {
    product_law(base, base)
}

/// First recursion coefficient: `a₁ = (Σ_i √i·ρ_i)² · (Σ_j λ_j/√j)²`.
///
/// Equal to the quadruple sum `Σ ρ_i ρ_{i′} λ_j λ_{j′} √(i i′ / j j′)`, which
/// factorizes because the summand is a product of per-index terms.
pub fn coeff_a1(lambda: &DegreeDistribution, rho: &DegreeDistribution) -> f64 {
    let r = rho.moment(0.5);
    let l = lambda.moment(-0.5);
    r * r * l * l
}

/// Second recursion coefficient: `a₂ = (Σ_i i·ρ_i)² · (Σ_j λ_j/j)²`.
///
/// Equal to the quadruple sum `Σ ρ_i ρ_{i′} λ_j λ_{j′} (i i′ / j j′)`.
pub fn coeff_a2(lambda: &DegreeDistribution, rho: &DegreeDistribution) -> f64 {
    let r = rho.moment(1.0);
    let l = lambda.moment(-1.0);
    r * r * l * l
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    /// Brute-force quadruple sum Σ ρ_i ρ_i′ λ_j λ_j′ (ii′/jj′)^q, written
    /// independently of the factorized production path.
    fn quadruple_sum(lambda: &DegreeDistribution, rho: &DegreeDistribution, q: f64) -> f64 {
        let mut total = 0.0;
        for (i, wi) in rho.support() {
            for (ip, wip) in rho.support() {
                for (j, wj) in lambda.support() {
                    for (jp, wjp) in lambda.support() {
                        let ratio = (i * ip) as f64 / (j * jp) as f64;
                        total += wi * wip * wj * wjp * libm::pow(ratio, q);
                    }
                }
            }
        }
        total
    }

    fn random_dist(rng: &mut StdRng) -> DegreeDistribution {
        let support_size = rng.gen_range(2..=5);
        let mut pairs = Vec::new();
        let mut used = alloc::collections::BTreeSet::new();
        while pairs.len() < support_size {
            let d = rng.gen_range(2..=64usize);
            if used.insert(d) {
                pairs.push((d, rng.gen_range(0.1..1.0)));
            }
        }
        let total: f64 = pairs.iter().map(|&(_, w)| w).sum();
        for p in &mut pairs {
            p.1 /= total;
        }
        // Normalization leaves rounding in the total; absorb it exactly.
        let residual: f64 = 1.0 - pairs.iter().map(|&(_, w)| w).sum::<f64>();
        pairs[0].1 += residual;
        DegreeDistribution::from_pairs(&pairs).unwrap()
    }

    #[test]
    fn rejects_bad_weights() {
        assert!(DegreeDistribution::new(vec![0.0, 0.0]).is_err());
        assert!(DegreeDistribution::new(vec![0.0, 0.5, 0.5]).is_err());
        assert!(DegreeDistribution::new(vec![0.0, 0.0, 0.7]).is_err());
        assert!(DegreeDistribution::new(vec![0.0, 0.0, -0.2, 1.2]).is_err());
        assert!(DegreeDistribution::new(vec![0.0, 0.0, 1.0]).is_ok());
    }

    #[test]
    fn from_pairs_accumulates() {
        let d = DegreeDistribution::from_pairs(&[(3, 0.25), (3, 0.25), (2, 0.5)]).unwrap();
        assert_eq!(d.prob(3), 0.5);
        assert_eq!(d.prob(2), 0.5);
        assert_eq!(d.max_degree(), 3);
    }

    #[test]
    fn moments_match_direct_sums() {
        let d = DegreeDistribution::point_mass(4).unwrap();
        assert!((d.moment(-0.5) - 0.5).abs() < 1e-15);
        let u = DegreeDistribution::from_pairs(&[(2, 0.5), (3, 0.5)]).unwrap();
        assert!((u.moment(1.0) - 2.5).abs() < 1e-15);
        // Cauchy–Schwarz: E[d]·E[1/d] ≥ 1 for any positive random variable.
        let mut rng = StdRng::seed_from_u64(7);
        for _ in 0..50 {
            let d = random_dist(&mut rng);
            assert!(d.moment(1.0) * d.moment(-1.0) >= 1.0 - 1e-12);
        }
    }

    #[test]
    fn kron_law_point_mass() {
        let base = DegreeDistribution::point_mass(2).unwrap();
        let law = kron_degree_law(&base);
        assert_eq!(law.points(), &[(4, 1.0)]);
    }

    #[test]
    fn kron_law_uniform_two_three() {
        let base = DegreeDistribution::from_pairs(&[(2, 0.5), (3, 0.5)]).unwrap();
        let law = kron_degree_law(&base);
        assert_eq!(law.points(), &[(4, 0.25), (6, 0.5), (9, 0.25)]);
    }

    #[test]
    fn kron_law_matches_explicit_kronecker_square() {
        // A = [[1,1,1],[0,1,1]] has row degrees {3, 2}. The 4 block-rows of
        // A⊗A have degrees {3·3, 3·2, 2·3, 2·2} = {9, 6, 6, 4}: each row of
        // the Kronecker square repeats a row of A scaled by one entry of the
        // other factor's row, so its nonzero count is the product of counts.
        let a = [[1.0, 1.0, 1.0], [0.0, 1.0, 1.0]];
        let mut kron_rows = Vec::new();
        for r1 in &a {
            for r2 in &a {
                let mut count = 0;
                for &x in r1 {
                    for &y in r2 {
                        if x * y != 0.0 {
                            count += 1;
                        }
                    }
                }
                kron_rows.push(count);
            }
        }
        kron_rows.sort_unstable();
        assert_eq!(kron_rows, vec![4, 6, 6, 9]);

        let base = DegreeDistribution::from_pairs(&[(2, 0.5), (3, 0.5)]).unwrap();
        let law = kron_degree_law(&base);
        // Same degrees with the empirical frequencies 1/4, 1/2, 1/4.
        assert_eq!(law.points(), &[(4, 0.25), (6, 0.5), (9, 0.25)]);
    }

    #[test]
    fn kron_law_mass_and_mean() {
        let mut rng = StdRng::seed_from_u64(21);
        for _ in 0..50 {
            let base = random_dist(&mut rng);
            let law = kron_degree_law(&base);
            assert!((law.total_mass() - 1.0).abs() < 1e-12);
            let m = base.mean();
            assert!((law.mean() - m * m).abs() < 1e-9 * m * m);
        }
    }

    #[test]
    fn coefficients_point_mass_examples() {
        let lam = DegreeDistribution::point_mass(4).unwrap();
        let rho = DegreeDistribution::point_mass(3).unwrap();
        assert!((coeff_a1(&lam, &rho) - 0.75).abs() < 1e-15);
        assert!((coeff_a2(&lam, &rho) - 9.0 / 16.0).abs() < 1e-15);
        for k in [2usize, 5, 17] {
            let d = DegreeDistribution::point_mass(k).unwrap();
            assert!((coeff_a1(&d, &d) - 1.0).abs() < 1e-12);
            assert!((coeff_a2(&d, &d) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn coefficients_match_quadruple_sum_oracle() {
        let mut rng = StdRng::seed_from_u64(1234);
        for _ in 0..100 {
            let lam = random_dist(&mut rng);
            let rho = random_dist(&mut rng);
            let a1 = coeff_a1(&lam, &rho);
            let a2 = coeff_a2(&lam, &rho);
            let o1 = quadruple_sum(&lam, &rho, 0.5);
            let o2 = quadruple_sum(&lam, &rho, 1.0);
            assert!((a1 - o1).abs() <= 1e-10 * o1.abs().max(1.0));
            assert!((a2 - o2).abs() <= 1e-10 * o2.abs().max(1.0));
        }
    }

    #[test]
    fn coefficients_invariant_under_support_permutation() {
        // Same distribution assembled in two enumeration orders.
        let fwd = DegreeDistribution::from_pairs(&[(2, 0.2), (5, 0.3), (9, 0.5)]).unwrap();
        let rev = DegreeDistribution::from_pairs(&[(9, 0.5), (5, 0.3), (2, 0.2)]).unwrap();
        let rho = DegreeDistribution::from_pairs(&[(3, 0.6), (4, 0.4)]).unwrap();
        assert_eq!(coeff_a1(&fwd, &rho), coeff_a1(&rev, &rho));
        assert_eq!(coeff_a2(&fwd, &rho), coeff_a2(&rev, &rho));
    }
}
