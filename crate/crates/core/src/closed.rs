//! Dispatch from a general compound model to its closed-form family.

use crate::closed_mn::{cmn_marginal_pmf, cmn_moments, cmn_pmf_table, cmn_regression, CMnModel};
use crate::closed_nmn::{cnmn_marginal_pmf, cnmn_moments, cnmn_pmf_table, cnmn_regression, CNMnModel};
use crate::compound::{CompoundModel, MomentReport, PmfTable};
use crate::error::Result;
use crate::summands::SummandLaw;

#[derive(Debug, Clone, PartialEq)]
pub enum ClosedModel {
    Mn(CMnModel),
    NMn(CNMnModel),
}

impl From<&CompoundModel> for ClosedModel {
    fn from(model: &CompoundModel) -> Self {
        match model.summand() {
            SummandLaw::Multinomial(l) => Self::Mn(CMnModel::new(model.count().clone(), l.clone())),
            SummandLaw::NegMultinomial(l) => Self::NMn(CNMnModel::new(model.count().clone(), l.clone())),
        }
    }
}

impl ClosedModel {
    pub fn pmf_table(&self, bounds: &[u64], eps: f64) -> Result<PmfTable> {
        match self {
            Self::Mn(m) => cmn_pmf_table(m, bounds, eps),
            Self::NMn(m) => cnmn_pmf_table(m, bounds, eps),
        }
    }

    pub fn moments(&self) -> MomentReport {
        match self {
            Self::Mn(m) => cmn_moments(m),
            Self::NMn(m) => cnmn_moments(m),
        }
    }

    pub fn marginal_pmf(&self, i: usize, m: u64, eps: f64) -> Result<f64> {
        match self {
            Self::Mn(model) => cmn_marginal_pmf(model, i, m, eps),
            Self::NMn(model) => cnmn_marginal_pmf(model, i, m, eps),
        }
    }

    /// `E(X_i | X_j = x_j)`.
    pub fn regression(&self, i: usize, j: usize, x_j: u64, eps: f64) -> Result<f64> {
        match self {
            Self::Mn(m) => cmn_regression(m, i, j, x_j, eps),
            Self::NMn(m) => cnmn_regression(m, i, j, x_j, eps),
        }
    }

    /// `(x_j, E(X_i | X_j = x_j))` for each `x_j` in the range with
    /// `P(X_j = x_j) > min_prob`.
    pub fn regression_curve(&self, i: usize, j: usize, range: std::ops::RangeInclusive<u64>, min_prob: f64, eps: f64) -> Result<Vec<(u64, f64)>> {
        let mut out = Vec::new();
        for x_j in range {
            if self.marginal_pmf(j, x_j, eps)? > min_prob {
                out.push((x_j, self.regression(i, j, x_j, eps)?));
            }
        }
        Ok(out)
    }
}
