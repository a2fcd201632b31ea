//! Brute-force reference computations for small models.
//!
//! Everything here is deliberately literal: joint p.m.f.s come from explicit
//! enumeration of ordered summand tuples, and combinatorial identities are
//! checked in arbitrary-precision integers. Only count laws with finite
//! support are accepted.

use num_bigint::BigUint;

use crate::compound::{BoxShape, CompoundModel};
use crate::error::{Error, Result};
use crate::summands::SummandLaw;

/// Probabilities on the box `[0, b_1] x ... x [0, b_k]`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseGrid {
    pub bounds: Vec<u64>,
    pub values: Vec<f64>,
}

impl DenseGrid {
    fn zeros(bounds: &[u64]) -> Self {
        let len = BoxShape::new(bounds).len();
        Self {
            bounds: bounds.to_vec(),
            values: vec![0.0; len],
        }
    }

    fn shape(&self) -> BoxShape {
        BoxShape::new(&self.bounds)
    }

    pub fn get(&self, x: &[u64]) -> f64 {
        if x.len() != self.bounds.len() || x.iter().zip(&self.bounds).any(|(v, b)| v > b) {
            return 0.0;
        }
        self.values[self.shape().index(x)]
    }

    /// Every point of the box with its probability.
    pub fn iter(&self) -> impl Iterator<Item = (Vec<u64>, f64)> + '_ {
        let shape = self.shape();
        self.values.iter().enumerate().map(move |(idx, &p)| (shape.point(idx), p))
    }

    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }
}

/// Summand outcomes that fit in the box.
fn outcomes_in_box(summand: &SummandLaw, bounds: &[u64]) -> Vec<(Vec<u64>, f64)> {
    BoxShape::new(bounds)
        .points()
        .filter_map(|y| {
            let p = summand.pmf(&y);
            (p > 0.0).then_some((y, p))
        })
        .collect()
}

fn enumerate_tuples(
    outcomes: &[(Vec<u64>, f64)],
    bounds: &[u64],
    remaining: u64,
    partial: &mut Vec<u64>,
    weight: f64,
    grid: &mut DenseGrid,
    shape: &BoxShape,
) {
    if remaining == 0 {
        grid.values[shape.index(partial)] += weight;
        return;
    }
    for (y, p) in outcomes {
        if partial.iter().zip(y).zip(bounds).any(|((a, b), c)| a + b > *c) {
            continue;
        }
        for (a, b) in partial.iter_mut().zip(y) {
            *a += b;
        }
        enumerate_tuples(outcomes, bounds, remaining - 1, partial, weight * p, grid, shape);
        for (a, b) in partial.iter_mut().zip(y) {
            *a -= b;
        }
    }
}

/// `Σ_{n <= n_max} P(N = n) Σ Π_l P(Y = y_l)` over ordered tuples
/// `(y_1, ..., y_n)` whose sum lands in the box.
pub fn brute_pmf(model: &CompoundModel, bounds: &[u64], n_max: u64) -> Result<DenseGrid> {
    let support_max = model.count().support_max().ok_or(Error::InfiniteSupport)?;
    if support_max > n_max {
        return Err(Error::Domain(format!(
            "count support reaches {support_max}, beyond n_max = {n_max}"
        )));
    }
    if bounds.len() != model.dim() {
        return Err(Error::Domain(format!(
            "box has {} bounds for {} coordinates",
            bounds.len(),
            model.dim()
        )));
    }
    let outcomes = outcomes_in_box(model.summand(), bounds);
    let shape = BoxShape::new(bounds);
    let mut grid = DenseGrid::zeros(bounds);
    for n in 0..=n_max {
        let pn = model.count().pmf(n);
        if pn == 0.0 {
            continue;
        }
        let mut partial = vec![0; bounds.len()];
        enumerate_tuples(&outcomes, bounds, n, &mut partial, pn, &mut grid, &shape);
    }
    Ok(grid)
}

fn binomial_big(n: u64, k: u64) -> BigUint {
    if k > n {
        return BigUint::from(0u32);
    }
    let mut acc = BigUint::from(1u32);
    for t in 0..k {
        acc = acc * BigUint::from(n - t) / BigUint::from(t + 1);
    }
    acc
}

fn compositions_sum(s: u64, slots: u64, remaining: u64, factors: &[BigUint]) -> BigUint {
    if slots == 0 {
        return if remaining == 0 { BigUint::from(1u32) } else { BigUint::from(0u32) };
    }
    let mut total = BigUint::from(0u32);
    for j in 0..=s.min(remaining) {
        total += &factors[j as usize] * compositions_sum(s, slots - 1, remaining - j, factors);
    }
    total
}

/// `Σ_{j_1 + ... + j_n = m} Π_l C(s, j_l) == C(ns, m)`, by exhaustive enumeration
/// of the compositions.
pub fn vandermonde_check(s: u64, n: u64, m: u64) -> bool {
    let factors: Vec<BigUint> = (0..=s).map(|j| binomial_big(s, j)).collect();
    compositions_sum(s, n, m, &factors) == binomial_big(n * s, m)
}

/// `Σ x_i P(x_i, x_j) / Σ P(x_i, x_j)` over the grid slice `X_j = x_j`.
pub fn brute_conditional_mean(grid: &DenseGrid, i: usize, j: usize, x_j: u64) -> Result<f64> {
    let k = grid.bounds.len();
    if i >= k || j >= k {
        return Err(Error::InvalidParameter(format!("coordinate index out of range for dimension {k}")));
    }
    let (mut mass, mut moment) = (0.0, 0.0);
    for (x, p) in grid.iter().filter(|(x, _)| x[j] == x_j) {
        mass += p;
        moment += x[i] as f64 * p;
    }
    if mass <= 0.0 {
        return Err(Error::ZeroProbabilityCondition(format!("grid slice X_{} = {x_j} has no mass", j + 1)));
    }
    Ok(moment / mass)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::counts::CountLaw;
    use crate::summands::{MultinomialLaw, NegMultinomialLaw};

    fn mn_model(count: CountLaw, s: u32, p: &[f64]) -> CompoundModel {
        CompoundModel::new(count, MultinomialLaw::new(s, p.to_vec()).unwrap())
    }

    #[test]
    fn brute_examples() {
        let m = mn_model(CountLaw::degenerate(0), 1, &[0.5, 0.5]);
        let g = brute_pmf(&m, &[3, 3], 0).unwrap();
        assert_eq!(g.get(&[0, 0]), 1.0);
        assert_eq!(g.total(), 1.0);

        let m = mn_model(CountLaw::degenerate(2), 1, &[0.5, 0.5]);
        let g = brute_pmf(&m, &[2, 2], 2).unwrap();
        assert_eq!(g.get(&[2, 0]), 0.25);
        assert_eq!(g.get(&[1, 1]), 0.5);
    }

    #[test]
    fn brute_rejects_infinite_support() {
        let m = mn_model(CountLaw::poisson(1.0).unwrap(), 1, &[0.5, 0.5]);
        assert_eq!(brute_pmf(&m, &[2, 2], 10), Err(Error::InfiniteSupport));
        let m = mn_model(CountLaw::degenerate(4), 1, &[0.5, 0.5]);
        assert!(brute_pmf(&m, &[2, 2], 3).is_err());
    }

    #[test]
    fn brute_total_mass() {
        let count = CountLaw::finite_table([(0, 0.1), (1, 0.2), (3, 0.7)]).unwrap();
        let m = mn_model(count.clone(), 2, &[0.2, 0.3, 0.5]);
        let g = brute_pmf(&m, &[6, 6, 6], 3).unwrap();
        assert!((g.total() - 1.0).abs() < 1e-13);

        let m = CompoundModel::new(count, NegMultinomialLaw::new(1, vec![0.2, 0.3]).unwrap());
        let g = brute_pmf(&m, &[5, 5], 3).unwrap();
        assert!(g.total() < 1.0);
        assert!(g.values.iter().all(|p| *p >= 0.0));
    }

    #[test]
    fn vandermonde_examples() {
        assert!(vandermonde_check(1, 2, 1));
        assert!(vandermonde_check(2, 2, 2));
        assert!(vandermonde_check(3, 3, 4));
        assert!(vandermonde_check(8, 8, 32));
        assert_eq!(binomial_big(4, 2), BigUint::from(6u32));
    }

    #[test]
    fn conditional_mean_examples() {
        let m = mn_model(CountLaw::degenerate(1), 2, &[0.2, 0.3, 0.5]);
        let g = brute_pmf(&m, &[2, 2, 2], 1).unwrap();
        for x_j in 0..=2u64 {
            let expected = (2 - x_j) as f64 * 0.2 / 0.7;
            assert!((brute_conditional_mean(&g, 0, 1, x_j).unwrap() - expected).abs() < 1e-14);
        }

        let m = mn_model(CountLaw::degenerate(2), 1, &[0.5, 0.5]);
        let g = brute_pmf(&m, &[2, 2], 2).unwrap();
        for x in 0..=2u64 {
            assert_eq!(brute_conditional_mean(&g, 0, 1, x).unwrap(), brute_conditional_mean(&g, 1, 0, x).unwrap());
        }

        let g = DenseGrid {
            bounds: vec![1, 1],
            values: vec![1.0, 0.0, 0.0, 0.0],
        };
        assert!(matches!(
            brute_conditional_mean(&g, 0, 1, 1),
            Err(Error::ZeroProbabilityCondition(_))
        ));
    }
}
