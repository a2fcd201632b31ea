//! Closed forms for compound negative multinomial vectors `C N NMn(s; p_1..p_k)`.
//!
//! Given `N = n` the vector is `NMn(sn; p)`, so every law below is a series
//! over `n` weighted by `P(N = n)`. Sub-vectors stay in the family with
//! parameters `ρ_i = p_i / (p_0 + Σ_selected p)`.

use std::collections::BTreeMap;

use crate::closed_mn::Binomial;
use crate::compound::{BoxShape, CompoundModel, MomentReport, PmfTable};
use crate::counts::CountLaw;
use crate::error::{Error, Result};
use crate::special::{compensated_sum, ln_binomial, ln_multinomial, xlogy, CompensatedSum};
use crate::summands::{check_indices, NegMultinomialLaw, SummandLaw};

#[derive(Debug, Clone, PartialEq)]
pub struct CNMnModel {
    count: CountLaw,
    nmn: NegMultinomialLaw,
}

impl CNMnModel {
    pub fn new(count: CountLaw, nmn: NegMultinomialLaw) -> Self {
        Self { count, nmn }
    }

    pub fn count(&self) -> &CountLaw {
        &self.count
    }

    pub fn nmn(&self) -> &NegMultinomialLaw {
        &self.nmn
    }

    pub fn dim(&self) -> usize {
        self.nmn.dim()
    }

    pub fn to_compound(&self) -> CompoundModel {
        CompoundModel::new(self.count.clone(), self.nmn.clone())
    }

    fn s(&self) -> u64 {
        self.nmn.s() as u64
    }

    /// `Σ p_i`, the success mass of one trial.
    fn success_mass(&self) -> f64 {
        compensated_sum(self.nmn.probs().iter().copied())
    }
}

impl TryFrom<&CompoundModel> for CNMnModel {
    type Error = Error;

    fn try_from(model: &CompoundModel) -> Result<Self> {
        match model.summand() {
            SummandLaw::NegMultinomial(nmn) => Ok(Self::new(model.count().clone(), nmn.clone())),
            other => Err(Error::InvalidParameter(format!(
                "expected a negative multinomial summand, got {other}"
            ))),
        }
    }
}

/// Joint p.m.f. The zero vector gets `G_{sN}(p_0)`; elsewhere
/// `Πp^x Σ_{n>=1} (sn + Σx - 1)! / (Πx! (sn - 1)!) p_0^{sn} P(N = n)`.
pub fn cnmn_pmf(model: &CNMnModel, x: &[u64], eps: f64) -> Result<f64> {
    if x.len() != model.dim() {
        return Err(Error::InvalidParameter(format!(
            "point has {} coordinates, model has {}",
            x.len(),
            model.dim()
        )));
    }
    let s = model.s();
    let p0 = model.nmn.p0();
    if x.iter().all(|&v| v == 0) {
        return model.count.scaled_pgf(s as u32, p0);
    }
    let ln_power: f64 = x.iter().zip(model.nmn.probs()).map(|(&xi, &p)| xlogy(xi, p)).sum();
    let n_max = model.count.tail_cutoff(eps / 2.0).max(1);
    let mut parts = x.to_vec();
    parts.push(0);
    let mut acc = CompensatedSum::new();
    for n in 1..=n_max {
        let pn = model.count.pmf(n);
        if pn == 0.0 {
            continue;
        }
        *parts.last_mut().unwrap() = n * s - 1;
        acc.add((ln_multinomial(&parts) + ln_power + (n * s) as f64 * p0.ln()).exp() * pn);
    }
    Ok(acc.value())
}

/// Model of the selected coordinates with `ρ` parameters.
pub fn cnmn_subset(model: &CNMnModel, indices: &[usize]) -> Result<CNMnModel> {
    Ok(CNMnModel {
        count: model.count.clone(),
        nmn: model.nmn.marginalize(indices)?,
    })
}

/// `P(X_i = m)` from the univariate subset model.
pub fn cnmn_marginal_pmf(model: &CNMnModel, i: usize, m: u64, eps: f64) -> Result<f64> {
    cnmn_pmf(&cnmn_subset(model, &[i])?, &[m], eps)
}

pub fn cnmn_moments(model: &CNMnModel) -> MomentReport {
    let cm = model.count.moments();
    let s = model.s() as f64;
    let p0 = model.nmn.p0();
    let p = model.nmn.probs();
    let k = p.len();
    let mean = p.iter().map(|pi| s * pi / p0 * cm.mean).collect();
    let cov = (0..k)
        .map(|i| {
            (0..k)
                .map(|j| {
                    if i == j {
                        s * p[i] * p[i] / (p0 * p0) * (s * cm.variance + (1.0 + p0 / p[i]) * cm.mean)
                    } else {
                        s * p[i] * p[j] / (p0 * p0) * (s * cm.variance + cm.mean)
                    }
                })
                .collect()
        })
        .collect();
    let cov_with_n = p.iter().map(|pi| s * pi / p0 * cm.variance).collect();
    MomentReport::from_mean_cov(mean, cov, cov_with_n, cm.variance)
}

/// `FI X_i = 1 + (p_i / p_0)(s FI N + 1)`.
pub fn cnmn_fisher_index(model: &CNMnModel, i: usize) -> Result<f64> {
    check_indices(&[i], model.dim())?;
    let fi_n = model.count.moments().fisher_index()?;
    Ok(1.0 + model.nmn.probs()[i] / model.nmn.p0() * (model.s() as f64 * fi_n + 1.0))
}

/// `sqrt((FI X_i - 1)(FI X_j - 1) / (FI X_i FI X_j))`.
pub fn cnmn_correlation_fi_form(model: &CNMnModel, i: usize, j: usize) -> Option<f64> {
    let fi_i = cnmn_fisher_index(model, i).ok()?;
    let fi_j = cnmn_fisher_index(model, j).ok()?;
    Some(((fi_i - 1.0) * (fi_j - 1.0) / (fi_i * fi_j)).sqrt())
}

/// `P(X_i = x_i | X_j = x_j)` as the ratio of the bivariate and univariate
/// subset laws. With `a = p_0 + p_i + p_j` and `b = p_0 + p_j` this is
/// `(1/x_i!) (b/a)^{x_j} (p_i/a)^{x_i} S(x_i + x_j, p_0/a) / S(x_j, p_0/b)` for
/// `x_j >= 1`, where `S(t, r) = Σ_n (sn + t - 1)!/(sn - 1)! r^{sn} P(N = n)`,
/// and reduces to ratios of `G_{sN}` values when `x_j = 0`.
pub fn cnmn_conditional_pmf(model: &CNMnModel, i: usize, x_i: u64, j: usize, x_j: u64, eps: f64) -> Result<f64> {
    let denom = cnmn_marginal_pmf(model, j, x_j, eps)?;
    if denom <= 0.0 {
        return Err(Error::ZeroProbabilityCondition(format!("P(X_{} = {x_j}) = 0", j + 1)));
    }
    if i == j {
        return Ok(if x_i == x_j { 1.0 } else { 0.0 });
    }
    let (indices, x) = if i < j { ([i, j], [x_i, x_j]) } else { ([j, i], [x_j, x_i]) };
    Ok(cnmn_pmf(&cnmn_subset(model, &indices)?, &x, eps)? / denom)
}

/// `E(X_i | X_j = x_j)`. For `x_j >= 1` this is
/// `(p_i / p_j)(x_j + 1) P(X_j = x_j + 1) / P(X_j = x_j)`. At `x_j = 0` the
/// conditional mean is summed directly:
/// `Σ_n sn (p_i/b) (p_0/b)^{sn} P(N = n) / G_{sN}(p_0/b)` with `b = p_0 + p_j`.
pub fn cnmn_regression(model: &CNMnModel, i: usize, j: usize, x_j: u64, eps: f64) -> Result<f64> {
    check_indices(&[i], model.dim())?;
    let denom = cnmn_marginal_pmf(model, j, x_j, eps)?;
    if denom <= 0.0 {
        return Err(Error::ZeroProbabilityCondition(format!("P(X_{} = {x_j}) = 0", j + 1)));
    }
    if i == j {
        return Ok(x_j as f64);
    }
    // count truncation is absolute; rescale so the ratio keeps relative accuracy
    let eps = (eps * denom.min(1.0)).max(1e-300);
    let denom = cnmn_marginal_pmf(model, j, x_j, eps)?;
    let p = model.nmn.probs();
    let p0 = model.nmn.p0();
    if x_j >= 1 {
        let next = cnmn_marginal_pmf(model, j, x_j + 1, eps)?;
        return Ok(p[i] / p[j] * (x_j + 1) as f64 * next / denom);
    }
    let s = model.s();
    let b = p0 + p[j];
    let ln_r = (p0 / b).ln();
    let n_max = model.count.tail_cutoff(eps / 2.0);
    let mut acc = CompensatedSum::new();
    for n in 1..=n_max {
        let pn = model.count.pmf(n);
        if pn > 0.0 {
            let sn = (n * s) as f64;
            acc.add(sn * p[i] / b * (sn * ln_r).exp() * pn);
        }
    }
    Ok(acc.value() / denom)
}

/// `P(X_1 + ... + X_k = m)`: the univariate compound negative binomial with
/// success mass `1 - p_0`.
pub fn cnmn_sum_pmf(model: &CNMnModel, m: u64, eps: f64) -> Result<f64> {
    let s = model.s();
    let p0 = model.nmn.p0();
    if m == 0 {
        return model.count.scaled_pgf(s as u32, p0);
    }
    let ln_q = model.success_mass().ln();
    let n_max = model.count.tail_cutoff(eps / 2.0).max(1);
    let mut acc = CompensatedSum::new();
    for n in 1..=n_max {
        let pn = model.count.pmf(n);
        if pn > 0.0 {
            let sn = n * s;
            acc.add((ln_binomial(sn + m - 1, m) + m as f64 * ln_q + sn as f64 * p0.ln()).exp() * pn);
        }
    }
    Ok(acc.value())
}

/// Law of `X_i` given `X_1 + ... + X_k = total`: `Binomial(total; p_i / (1 - p_0))`.
pub fn cnmn_given_sum(model: &CNMnModel, i: usize, total: u64, eps: f64) -> Result<Binomial> {
    check_indices(&[i], model.dim())?;
    if cnmn_sum_pmf(model, total, eps)? <= 0.0 {
        return Err(Error::ZeroProbabilityCondition(format!("P(X_1 + ... + X_k = {total}) = 0")));
    }
    Ok(Binomial {
        n: total,
        p: model.nmn.probs()[i] / model.success_mass(),
    })
}

/// Joint p.m.f. on a box from the closed-form series.
pub fn cnmn_pmf_table(model: &CNMnModel, bounds: &[u64], eps: f64) -> Result<PmfTable> {
    if bounds.len() != model.dim() {
        return Err(Error::Domain(format!(
            "box has {} bounds for {} coordinates",
            bounds.len(),
            model.dim()
        )));
    }
    let shape = BoxShape::new(bounds);
    let mut entries = BTreeMap::new();
    for x in shape.points() {
        let p = cnmn_pmf(model, &x, eps)?;
        if p > 0.0 {
            entries.insert(x, p);
        }
    }
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
    use crate::compound::{compound_moments, compound_pmf_table, conditional_mean, conditional_pmf, correlation};

    fn model(count: CountLaw, s: u32, p: &[f64]) -> CNMnModel {
        CNMnModel::new(count, NegMultinomialLaw::new(s, p.to_vec()).unwrap())
    }

    fn finite(entries: &[(u64, f64)]) -> CountLaw {
        CountLaw::finite_table(entries.iter().copied()).unwrap()
    }

    #[test]
    fn pmf_examples() {
        let m = model(CountLaw::degenerate(1), 1, &[0.2, 0.3]);
        assert!((cnmn_pmf(&m, &[0, 0], 1e-12).unwrap() - 0.5).abs() < 1e-15);
        let m = model(CountLaw::degenerate(1), 1, &[0.4]);
        assert!((cnmn_pmf(&m, &[2], 1e-12).unwrap() - 0.6 * 0.16).abs() < 1e-15);

        let m = model(finite(&[(1, 0.5), (2, 0.5)]), 1, &[0.2, 0.3]);
        // one summand: 2 * 0.2 * 0.3 * 0.5; two summands: the (1,1) paths over two geometric-type draws
        let one = 2.0 * 0.2 * 0.3 * 0.5;
        let two = 6.0 * 0.2 * 0.3 * 0.25;
        assert!((cnmn_pmf(&m, &[1, 1], 1e-12).unwrap() - 0.5 * (one + two)).abs() < 1e-15);
    }

    #[test]
    fn pmf_matches_series_engine() {
        let m = model(finite(&[(0, 0.2), (2, 0.5), (3, 0.3)]), 2, &[0.25, 0.1, 0.3]);
        let table = compound_pmf_table(&m.to_compound(), &[4, 4, 4], 1e-12).unwrap();
        let closed = cnmn_pmf_table(&m, &[4, 4, 4], 1e-12).unwrap();
        assert_eq!(table.entries.len(), closed.entries.len());
        for (x, p) in &closed.entries {
            assert!((table.get(x) - p).abs() < 1e-14, "{x:?}");
        }
    }

    #[test]
    fn subset_examples() {
        let m = model(CountLaw::poisson(1.0).unwrap(), 2, &[0.2, 0.3]);
        assert_eq!(cnmn_subset(&m, &[0, 1]).unwrap(), m);
        let single = cnmn_subset(&m, &[1]).unwrap();
        assert!((single.nmn().probs()[0] - 0.3 / 0.8).abs() < 1e-15);

        let m = model(finite(&[(1, 0.6), (2, 0.4)]), 1, &[0.2, 0.3, 0.1]);
        let sub = cnmn_subset(&m, &[0, 2]).unwrap();
        for a in 0..4u64 {
            for c in 0..4u64 {
                let summed = compensated_sum((0..200).map(|b| cnmn_pmf(&m, &[a, b, c], 1e-14).unwrap()));
                assert!((summed - cnmn_pmf(&sub, &[a, c], 1e-14).unwrap()).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn moments_and_fisher_index() {
        let m = model(CountLaw::degenerate(1), 2, &[0.2, 0.3]);
        let r = cnmn_moments(&m);
        assert_eq!(r.mean, m.nmn().moments().mean);

        let m = model(CountLaw::log_series(0.3).unwrap(), 2, &[0.2, 0.3]);
        let closed = cnmn_moments(&m);
        let wald = compound_moments(&m.to_compound());
        for i in 0..2 {
            assert!((closed.mean[i] - wald.mean[i]).abs() < 1e-12);
            for j in 0..2 {
                assert!((closed.cov[i][j] - wald.cov[i][j]).abs() < 1e-12);
            }
            let fi = cnmn_fisher_index(&m, i).unwrap();
            assert!(fi > 1.0);
            assert!((fi - closed.cov[i][i] / closed.mean[i]).abs() < 1e-12);
        }
        let fi_form = cnmn_correlation_fi_form(&m, 0, 1).unwrap();
        assert!((fi_form - correlation(&m.to_compound(), 0, 1).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn fisher_index_monotone() {
        let fi = |fi_n_law: CountLaw, s: u32, pi: f64, other: f64| {
            cnmn_fisher_index(&model(fi_n_law, s, &[pi, other]), 0).unwrap()
        };
        let poisson = || CountLaw::poisson(2.0).unwrap();
        // larger FI N
        assert!(fi(CountLaw::negative_binomial(2, 0.5).unwrap(), 2, 0.2, 0.3) > fi(poisson(), 2, 0.2, 0.3));
        assert!(fi(poisson(), 3, 0.2, 0.3) > fi(poisson(), 2, 0.2, 0.3));
        // larger p_i with p_0 fixed, and larger p_i / p_0
        assert!(fi(poisson(), 2, 0.3, 0.2) > fi(poisson(), 2, 0.2, 0.3));
        assert!(fi(poisson(), 2, 0.2, 0.5) > fi(poisson(), 2, 0.2, 0.3));
    }

    #[test]
    fn conditional_examples() {
        let m = model(CountLaw::degenerate(1), 1, &[0.2, 0.3]);
        let zero_zero = cnmn_conditional_pmf(&m, 0, 0, 1, 0, 1e-12).unwrap();
        assert!((zero_zero - (0.5 / 1.0) / (0.5 / 0.8)).abs() < 1e-15);

        let m = model(finite(&[(0, 0.3), (1, 0.3), (3, 0.4)]), 2, &[0.25, 0.35]);
        for x_j in 0..4u64 {
            let generic = conditional_pmf(&m.to_compound(), 0, 1, x_j, 1e-13).unwrap();
            let total = compensated_sum((0..300).map(|x_i| cnmn_conditional_pmf(&m, 0, x_i, 1, x_j, 1e-14).unwrap()));
            assert!((total - 1.0).abs() < 1e-10);
            for (&x_i, &p) in &generic {
                assert!((cnmn_conditional_pmf(&m, 0, x_i, 1, x_j, 1e-14).unwrap() - p).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn regression_examples() {
        let m = model(finite(&[(0, 0.3), (1, 0.3), (3, 0.4)]), 2, &[0.25, 0.35]);
        for x_j in 0..6u64 {
            let direct = conditional_mean(&m.to_compound(), 0, 1, x_j, 1e-13).unwrap();
            assert!((cnmn_regression(&m, 0, 1, x_j, 1e-13).unwrap() - direct).abs() < 1e-8, "x_j={x_j}");
        }
        // bivariate geometric: given X_j = x_j the other coordinate is negative
        // binomial with mean (x_j + 1) p_i / (p_0 + p_j)
        let m = model(CountLaw::degenerate(1), 1, &[0.2, 0.3]);
        for x_j in 0..6u64 {
            let exact = (x_j + 1) as f64 * 0.2 / 0.8;
            assert!((cnmn_regression(&m, 0, 1, x_j, 1e-13).unwrap() - exact).abs() < 1e-12);
        }
    }

    #[test]
    fn sum_law_examples() {
        let m = model(CountLaw::poisson(1.5).unwrap(), 2, &[0.2, 0.3]);
        let zero = m.count().scaled_pgf(2, 0.5).unwrap();
        assert_eq!(cnmn_sum_pmf(&m, 0, 1e-12).unwrap(), zero);

        let m = model(CountLaw::degenerate(1), 1, &[0.2, 0.3]);
        for t in 0..10u64 {
            let geometric = 0.5 * 0.5f64.powi(t as i32);
            assert!((cnmn_sum_pmf(&m, t, 1e-12).unwrap() - geometric).abs() < 1e-15);
        }

        let m = model(CountLaw::log_series(0.5).unwrap(), 2, &[0.2, 0.3, 0.1]);
        let b = cnmn_given_sum(&m, 1, 5, 1e-12).unwrap();
        assert_eq!(b.n, 5);
        assert!((b.p - 0.5).abs() < 1e-15);
    }
}
