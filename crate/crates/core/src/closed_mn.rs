//! Closed forms for compound multinomial vectors `C N Mn(s; p_1..p_k)`.
//!
//! Because the summands have fixed total `s`, the joint law of `X` is the
//! multinomial law of `sN` trials: `P(X = x) = (Σx)!/Πx_i! Πp_i^{x_i} P(sN = Σx)`.

use std::collections::BTreeMap;

use crate::compound::{CompoundModel, MomentReport, PmfTable};
use crate::counts::{pow_u64, CountLaw};
use crate::error::{Error, Result};
use crate::special::{compensated_sum, ln_binomial, ln_multinomial, multinomial, xlogy, CompensatedSum};
use crate::summands::{check_indices, MultinomialLaw};

#[derive(Debug, Clone, PartialEq)]
pub struct CMnModel {
    count: CountLaw,
    mn: MultinomialLaw,
}

/// `Binomial(n; p)`, the conditional law of one coordinate given the total.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Binomial {
    pub n: u64,
    pub p: f64,
}

impl Binomial {
    pub fn pmf(&self, m: u64) -> f64 {
        if m > self.n {
            return 0.0;
        }
        (ln_binomial(self.n, m) + xlogy(m, self.p) + xlogy(self.n - m, 1.0 - self.p)).exp()
    }

    pub fn mean(&self) -> f64 {
        self.n as f64 * self.p
    }
}

impl CMnModel {
    pub fn new(count: CountLaw, mn: MultinomialLaw) -> Self {
        Self { count, mn }
    }

    pub fn count(&self) -> &CountLaw {
        &self.count
    }

    pub fn mn(&self) -> &MultinomialLaw {
        &self.mn
    }

    pub fn dim(&self) -> usize {
        self.mn.dim()
    }

    pub fn to_compound(&self) -> CompoundModel {
        CompoundModel::new(self.count.clone(), self.mn.clone())
    }

    fn s(&self) -> u64 {
        self.mn.s() as u64
    }

    /// `P(sN = m)`.
    fn scaled_count_pmf(&self, m: u64) -> f64 {
        if m % self.s() == 0 {
            self.count.pmf(m / self.s())
        } else {
            0.0
        }
    }
}

impl TryFrom<&CompoundModel> for CMnModel {
    type Error = Error;

    fn try_from(model: &CompoundModel) -> Result<Self> {
        match model.summand() {
            crate::SummandLaw::Multinomial(mn) => Ok(Self::new(model.count().clone(), mn.clone())),
            other => Err(Error::InvalidParameter(format!("expected a multinomial summand, got {other}"))),
        }
    }
}

/// Joint p.m.f.; `P(N = 0)` at the zero vector.
pub fn cmn_pmf(model: &CMnModel, x: &[u64]) -> f64 {
    if x.len() != model.dim() {
        return 0.0;
    }
    let total: u64 = x.iter().sum();
    let weight = model.scaled_count_pmf(total);
    if weight == 0.0 {
        return 0.0;
    }
    let power: f64 = x.iter().zip(model.mn.probs()).map(|(&xi, &p)| pow_u64(p, xi)).product();
    multinomial(x) * power * weight
}

/// `P(X_{i_1} = x_1, ..., X_{i_r} = x_r)`: a series over the mass `m` of the
/// unselected categories, with terms `(m + Σx)!/(m! Πx!) Πp^x q^m P(sN = m + Σx)`
/// where `q = 1 - Σ_selected p`.
pub fn cmn_subset_pmf(model: &CMnModel, indices: &[usize], x: &[u64], eps: f64) -> Result<f64> {
    check_indices(indices, model.dim())?;
    if x.len() != indices.len() {
        return Err(Error::InvalidParameter(format!(
            "point has {} coordinates for {} indices",
            x.len(),
            indices.len()
        )));
    }
    if indices.len() == model.dim() {
        return Ok(cmn_pmf(model, x));
    }
    let probs = model.mn.probs();
    let q = compensated_sum(probs.iter().enumerate().filter(|(i, _)| !indices.contains(i)).map(|(_, &p)| p));
    let ln_power: f64 = indices.iter().zip(x).map(|(&i, &xi)| xlogy(xi, probs[i])).sum();
    let total: u64 = x.iter().sum();
    let s = model.s();
    let n_max = model.count.tail_cutoff(eps / 2.0);
    let mut acc = CompensatedSum::new();
    let mut parts = x.to_vec();
    parts.push(0);
    for n in total.div_ceil(s)..=n_max.max(total.div_ceil(s)) {
        let pn = model.count.pmf(n);
        if pn == 0.0 {
            continue;
        }
        let m = n * s - total;
        *parts.last_mut().unwrap() = m;
        acc.add((ln_multinomial(&parts) + ln_power + xlogy(m, q)).exp() * pn);
    }
    Ok(acc.value())
}

/// `P(X_i = m)`; `G_N((1 - p_i)^s)` at `m = 0`.
pub fn cmn_marginal_pmf(model: &CMnModel, i: usize, m: u64, eps: f64) -> Result<f64> {
    check_indices(&[i], model.dim())?;
    if model.dim() == 1 {
        return Ok(cmn_pmf(model, &[m]));
    }
    let p = model.mn.probs()[i];
    if m == 0 {
        return model.count.scaled_pgf(model.mn.s(), 1.0 - p);
    }
    let s = model.s();
    let n_max = model.count.tail_cutoff(eps / 2.0);
    let mut acc = CompensatedSum::new();
    for n in m.div_ceil(s)..=n_max.max(m.div_ceil(s)) {
        let pn = model.count.pmf(n);
        if pn > 0.0 {
            let ns = n * s;
            acc.add((ln_binomial(ns, m) + xlogy(m, p) + xlogy(ns - m, 1.0 - p)).exp() * pn);
        }
    }
    Ok(acc.value())
}

pub fn cmn_moments(model: &CMnModel) -> MomentReport {
    let cm = model.count.moments();
    let s = model.s() as f64;
    let p = model.mn.probs();
    let k = p.len();
    let mean = p.iter().map(|pi| s * pi * cm.mean).collect();
    let cov = (0..k)
        .map(|i| {
            (0..k)
                .map(|j| {
                    if i == j {
                        s * p[i] * (s * p[i] * cm.variance + (1.0 - p[i]) * cm.mean)
                    } else {
                        s * p[i] * p[j] * (s * cm.variance - cm.mean)
                    }
                })
                .collect()
        })
        .collect();
    let cov_with_n = p.iter().map(|pi| s * pi * cm.variance).collect();
    MomentReport::from_mean_cov(mean, cov, cov_with_n, cm.variance)
}

/// `FI X_i = 1 + p_i (s FI N - 1)`.
pub fn cmn_fisher_index(model: &CMnModel, i: usize) -> Result<f64> {
    check_indices(&[i], model.dim())?;
    let fi_n = model.count.moments().fisher_index()?;
    Ok(1.0 + model.mn.probs()[i] * (model.s() as f64 * fi_n - 1.0))
}

/// `sqrt(p_i p_j) (s Var N - E N) / sqrt([s p_i Var N + E N (1 - p_i)] [s p_j Var N + E N (1 - p_j)])`.
pub fn cmn_correlation(model: &CMnModel, i: usize, j: usize) -> Option<f64> {
    let cm = model.count.moments();
    let s = model.s() as f64;
    let p = model.mn.probs();
    let d = (s * p[i] * cm.variance + cm.mean * (1.0 - p[i])) * (s * p[j] * cm.variance + cm.mean * (1.0 - p[j]));
    (d > 0.0).then(|| (p[i] * p[j]).sqrt() * (s * cm.variance - cm.mean) / d.sqrt())
}

/// Correlation from the coordinate Fisher indices,
/// `sqrt((FI X_i - 1)(FI X_j - 1) / (FI X_i FI X_j))`, carrying the sign of
/// `s FI N - 1` (negative for underdispersed counts).
pub fn cmn_correlation_fi_form(model: &CMnModel, i: usize, j: usize) -> Option<f64> {
    let fi_i = cmn_fisher_index(model, i).ok()?;
    let fi_j = cmn_fisher_index(model, j).ok()?;
    let fi_n = model.count.moments().fisher_index().ok()?;
    let d = fi_i * fi_j;
    if d <= 0.0 {
        return None;
    }
    let magnitude = ((fi_i - 1.0) * (fi_j - 1.0) / d).sqrt();
    Some(if model.s() as f64 * fi_n < 1.0 { -magnitude } else { magnitude })
}

/// `P(X_i = x_i | X_j = x_j)`.
pub fn cmn_conditional_pmf(model: &CMnModel, i: usize, x_i: u64, j: usize, x_j: u64, eps: f64) -> Result<f64> {
    let denom = cmn_marginal_pmf(model, j, x_j, eps)?;
    if denom <= 0.0 {
        return Err(Error::ZeroProbabilityCondition(format!("P(X_{} = {x_j}) = 0", j + 1)));
    }
    if i == j {
        return Ok(if x_i == x_j { 1.0 } else { 0.0 });
    }
    let (indices, x) = if i < j { ([i, j], [x_i, x_j]) } else { ([j, i], [x_j, x_i]) };
    Ok(cmn_subset_pmf(model, &indices, &x, eps)? / denom)
}

/// `E(X_i | X_j = x_j) = (p_i / p_j) (x_j + 1) P(X_j = x_j + 1) / P(X_j = x_j)`.
pub fn cmn_regression(model: &CMnModel, i: usize, j: usize, x_j: u64, eps: f64) -> Result<f64> {
    check_indices(&[i], model.dim())?;
    let denom = cmn_marginal_pmf(model, j, x_j, eps)?;
    if denom <= 0.0 {
        return Err(Error::ZeroProbabilityCondition(format!("P(X_{} = {x_j}) = 0", j + 1)));
    }
    if i == j {
        return Ok(x_j as f64);
    }
    // count truncation is absolute; rescale so the ratio keeps relative accuracy
    let eps = (eps * denom.min(1.0)).max(1e-300);
    let denom = cmn_marginal_pmf(model, j, x_j, eps)?;
    let p = model.mn.probs();
    let next = cmn_marginal_pmf(model, j, x_j + 1, eps)?;
    Ok(p[i] / p[j] * (x_j + 1) as f64 * next / denom)
}

/// `P(X_1 + ... + X_k = m) = P(sN = m)`.
pub fn cmn_sum_pmf(model: &CMnModel, m: u64) -> f64 {
    model.scaled_count_pmf(m)
}

/// Law of `X_i` given `X_1 + ... + X_k = total`: `Binomial(total; p_i)`.
pub fn cmn_given_sum(model: &CMnModel, i: usize, total: u64) -> Result<Binomial> {
    check_indices(&[i], model.dim())?;
    if cmn_sum_pmf(model, total) <= 0.0 {
        return Err(Error::ZeroProbabilityCondition(format!("P(X_1 + ... + X_k = {total}) = 0")));
    }
    Ok(Binomial {
        n: total,
        p: model.mn.probs()[i],
    })
}

/// Joint p.m.f. on a box from the closed form. `n_max` records the count
/// cutoff at `eps` so the table is comparable with the series engine.
pub fn cmn_pmf_table(model: &CMnModel, bounds: &[u64], eps: f64) -> Result<PmfTable> {
    if bounds.len() != model.dim() {
        return Err(Error::Domain(format!(
            "box has {} bounds for {} coordinates",
            bounds.len(),
            model.dim()
        )));
    }
    let shape = crate::compound::BoxShape::new(bounds);
    let entries: BTreeMap<Vec<u64>, f64> = shape
        .points()
        .filter_map(|x| {
            let p = cmn_pmf(model, &x);
            (p > 0.0).then_some((x, p))
        })
        .collect();
    let captured_mass = compensated_sum(entries.values().copied());
    Ok(PmfTable {
        dim: model.dim(),
        entries,
        captured_mass,
        truncation_eps: eps,
        n_max: model.count.tail_cutoff(eps),
        box_spill: (1.0 - captured_mass).max(0.0),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::compound::{compound_moments, compound_pmf_table, conditional_mean, correlation};

    fn model(count: CountLaw, s: u32, p: &[f64]) -> CMnModel {
        CMnModel::new(count, MultinomialLaw::new(s, p.to_vec()).unwrap())
    }

    fn finite(entries: &[(u64, f64)]) -> CountLaw {
        CountLaw::finite_table(entries.iter().copied()).unwrap()
    }

    #[test]
    fn pmf_examples() {
        let m = model(CountLaw::poisson(2.0).unwrap(), 2, &[0.4, 0.6]);
        assert_eq!(cmn_pmf(&m, &[0, 0]), (-2.0f64).exp());
        assert_eq!(cmn_pmf(&m, &[1, 0]), 0.0);
        let m = model(CountLaw::degenerate(1), 1, &[0.3, 0.7]);
        assert_eq!(cmn_pmf(&m, &[1, 0]), 0.3);
        let m = model(finite(&[(1, 0.5), (2, 0.5)]), 1, &[0.5, 0.5]);
        assert_eq!(cmn_pmf(&m, &[1, 1]), 0.25);
    }

    #[test]
    fn pmf_matches_series_engine() {
        let m = model(finite(&[(0, 0.1), (1, 0.3), (3, 0.6)]), 2, &[0.2, 0.3, 0.5]);
        let table = compound_pmf_table(&m.to_compound(), &[6, 6, 6], 1e-12).unwrap();
        let closed = cmn_pmf_table(&m, &[6, 6, 6], 1e-12).unwrap();
        assert_eq!(table.entries.len(), closed.entries.len());
        for (x, p) in &closed.entries {
            assert!((table.get(x) - p).abs() < 1e-14, "{x:?}");
        }
    }

    #[test]
    fn marginal_examples() {
        let m = model(CountLaw::degenerate(1), 2, &[0.5, 0.5]);
        assert!((cmn_marginal_pmf(&m, 0, 0, 1e-12).unwrap() - 0.25).abs() < 1e-15);

        let lambda = 1.7;
        let m = model(CountLaw::poisson(lambda).unwrap(), 1, &[0.3, 0.7]);
        for x in 0..12u64 {
            let thinned = CountLaw::poisson(lambda * 0.3).unwrap().pmf(x);
            assert!((cmn_marginal_pmf(&m, 0, x, 1e-12).unwrap() - thinned).abs() < 1e-10);
        }

        let m = model(CountLaw::log_series(0.6).unwrap(), 3, &[0.2, 0.8]);
        let total = compensated_sum((0..400).map(|x| cmn_marginal_pmf(&m, 1, x, 1e-14).unwrap()));
        assert!((total - 1.0).abs() < 1e-10);
    }

    #[test]
    fn subset_pmf_sums_joint() {
        let m = model(finite(&[(1, 0.4), (2, 0.6)]), 2, &[0.2, 0.3, 0.5]);
        for a in 0..=4u64 {
            for c in 0..=4u64 {
                let summed = compensated_sum((0..=4).map(|b| cmn_pmf(&m, &[a, b, c])));
                let subset = cmn_subset_pmf(&m, &[0, 2], &[a, c], 1e-12).unwrap();
                assert!((summed - subset).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn moments_match_wald() {
        let m = model(CountLaw::negative_binomial(3, 0.4).unwrap(), 3, &[0.1, 0.3, 0.6]);
        let closed = cmn_moments(&m);
        let wald = compound_moments(&m.to_compound());
        for i in 0..3 {
            assert!((closed.mean[i] - wald.mean[i]).abs() < 1e-12);
            for j in 0..3 {
                assert!((closed.cov[i][j] - wald.cov[i][j]).abs() < 1e-12);
            }
            let fi = cmn_fisher_index(&m, i).unwrap();
            assert!((fi - closed.cov[i][i] / closed.mean[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn correlation_examples() {
        let m = model(CountLaw::poisson(3.0).unwrap(), 1, &[0.4, 0.6]);
        assert!(cmn_correlation(&m, 0, 1).unwrap().abs() < 1e-15);

        let m = model(CountLaw::degenerate(4), 2, &[0.4, 0.6]);
        let direct = cmn_correlation(&m, 0, 1).unwrap();
        assert!(direct < 0.0);
        assert!((direct - cmn_correlation_fi_form(&m, 0, 1).unwrap()).abs() < 1e-12);

        let m = model(CountLaw::log_series(0.5).unwrap(), 3, &[0.3, 0.7]);
        let direct = cmn_correlation(&m, 0, 1).unwrap();
        assert!(direct > 0.0);
        assert!((direct - cmn_correlation_fi_form(&m, 0, 1).unwrap()).abs() < 1e-12);
        assert!((direct - correlation(&m.to_compound(), 0, 1).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn conditional_examples() {
        // with two categories the conditional is a point mass on totals divisible by s
        let m = model(finite(&[(1, 0.5), (2, 0.5)]), 2, &[0.4, 0.6]);
        // N <= 2 keeps the total at most 4
        for x_i in 0..6 {
            let p = cmn_conditional_pmf(&m, 0, x_i, 1, 1, 1e-12).unwrap();
            if (x_i + 1) % 2 == 0 && x_i + 1 <= 4 {
                assert!(p > 0.0);
            } else {
                assert_eq!(p, 0.0);
            }
        }

        // Degenerate(1): the exact multinomial conditional
        let m = model(CountLaw::degenerate(1), 3, &[0.2, 0.3, 0.5]);
        for x_j in 0..=3u64 {
            let total = compensated_sum((0..=3).map(|x_i| cmn_conditional_pmf(&m, 0, x_i, 1, x_j, 1e-12).unwrap()));
            assert!((total - 1.0).abs() < 1e-13);
            for x_i in 0..=(3 - x_j) {
                let exact = Binomial {
                    n: 3 - x_j,
                    p: 0.2 / 0.7,
                }
                .pmf(x_i);
                assert!((cmn_conditional_pmf(&m, 0, x_i, 1, x_j, 1e-12).unwrap() - exact).abs() < 1e-14);
            }
        }
        assert!(matches!(
            cmn_conditional_pmf(&m, 0, 0, 1, 4, 1e-12),
            Err(Error::ZeroProbabilityCondition(_))
        ));
    }

    #[test]
    fn regression_examples() {
        let (n, s) = (3u64, 2u64);
        let m = model(CountLaw::degenerate(n), s as u32, &[0.2, 0.3, 0.5]);
        for x_j in 0..=(n * s) {
            let expected = (n * s - x_j) as f64 * 0.2 / 0.7;
            assert!((cmn_regression(&m, 0, 1, x_j, 1e-12).unwrap() - expected).abs() < 1e-12);
        }
        assert!(cmn_regression(&m, 0, 1, n * s + 1, 1e-12).is_err());

        let m = model(finite(&[(0, 0.2), (2, 0.5), (4, 0.3)]), 2, &[0.3, 0.7]);
        for x_j in 0..=8u64 {
            let direct = conditional_mean(&m.to_compound(), 0, 1, x_j, 1e-12).unwrap();
            assert!((cmn_regression(&m, 0, 1, x_j, 1e-12).unwrap() - direct).abs() < 1e-8);
        }
    }

    #[test]
    fn sum_law_examples() {
        let m = model(CountLaw::degenerate(2), 3, &[0.4, 0.6]);
        assert_eq!(cmn_sum_pmf(&m, 6), 1.0);
        assert_eq!(cmn_sum_pmf(&m, 5), 0.0);
        let m = model(CountLaw::poisson(1.0).unwrap(), 1, &[0.3, 0.7]);
        let b = cmn_given_sum(&m, 0, 4).unwrap();
        assert_eq!(b, Binomial { n: 4, p: 0.3 });
        let table = [0.2401, 0.4116, 0.2646, 0.0756, 0.0081];
        for (x, want) in table.iter().enumerate() {
            assert!((b.pmf(x as u64) - want).abs() < 1e-12);
        }
    }
}
