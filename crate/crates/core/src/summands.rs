//! Joint laws of a single summand vector `(Y_1, ..., Y_k)`.
//!
//! * `Mn(s; p_1..p_k)`: counts of `k` outcome types in `s` categorical trials,
//!   `Σ p_i = 1`. Spec string `mn:s=2,p=0.3,0.7`.
//! * `NMn(s; p_1..p_k)`: counts of `k` success types before the `s`-th failure,
//!   failure probability `p_0 = 1 - Σ p_i > 0`. Spec string `nmn:s=2,p=0.2,0.3`.
//!
//! Coordinates are indexed from zero throughout the library.

use std::fmt;
use std::str::FromStr;

use rand::Rng;

use crate::error::{Error, Result};
use crate::special::{compensated_sum, ln_binomial, ln_multinomial, multinomial_exact, xlogy};

const PROB_SUM_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct MultinomialLaw {
    s: u32,
    probs: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NegMultinomialLaw {
    s: u32,
    probs: Vec<f64>,
    p0: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SummandLaw {
    Multinomial(MultinomialLaw),
    NegMultinomial(NegMultinomialLaw),
}

/// Mean vector and covariance matrix of one summand.
#[derive(Debug, Clone, PartialEq)]
pub struct SummandMoments {
    pub mean: Vec<f64>,
    pub cov: Vec<Vec<f64>>,
}

fn check_common(family: &str, s: u32, probs: &[f64]) -> Result<()> {
    if s == 0 {
        return Err(Error::InvalidParameter(format!("{family}: s must be a positive integer")));
    }
    if probs.is_empty() {
        return Err(Error::InvalidParameter(format!("{family}: need at least one category (k >= 1)")));
    }
    if let Some((i, p)) = probs.iter().enumerate().find(|(_, p)| !(p.is_finite() && **p > 0.0)) {
        return Err(Error::InvalidParameter(format!(
            "{family}: every p_i must be positive, p_{} = {p}",
            i + 1
        )));
    }
    Ok(())
}

/// Validate a coordinate selection: non-empty, in range, strictly increasing.
pub(crate) fn check_indices(indices: &[usize], k: usize) -> Result<()> {
    if indices.is_empty() {
        return Err(Error::InvalidParameter("index set must be non-empty".into()));
    }
    if let Some(&bad) = indices.iter().find(|&&i| i >= k) {
        return Err(Error::InvalidParameter(format!(
            "coordinate index {bad} out of range for dimension {k}"
        )));
    }
    if indices.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidParameter(
            "coordinate indices must be strictly increasing".into(),
        ));
    }
    Ok(())
}

fn categorical<R: Rng + ?Sized>(rng: &mut R, weights: &[f64]) -> usize {
    let u: f64 = rng.random();
    let mut cum = 0.0;
    for (i, w) in weights.iter().enumerate() {
        cum += w;
        if u < cum {
            return i;
        }
    }
    weights.len() - 1
}

impl MultinomialLaw {
    pub fn new(s: u32, probs: Vec<f64>) -> Result<Self> {
        check_common("multinomial", s, &probs)?;
        let total = compensated_sum(probs.iter().copied());
        if (total - 1.0).abs() > PROB_SUM_TOL {
            return Err(Error::InvalidParameter(format!(
                "multinomial: probabilities must sum to 1 within {PROB_SUM_TOL:e}, got {total}"
            )));
        }
        Ok(Self { s, probs })
    }

    pub fn s(&self) -> u32 {
        self.s
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn dim(&self) -> usize {
        self.probs.len()
    }

    fn ln_pmf(&self, x: &[u64]) -> f64 {
        ln_multinomial(x) + x.iter().zip(&self.probs).map(|(&xi, &p)| xlogy(xi, p)).sum::<f64>()
    }

    /// `P(Y = x)`: zero unless `Σ x = s`.
    pub fn pmf(&self, x: &[u64]) -> f64 {
        assert_eq!(x.len(), self.dim(), "dimension mismatch");
        if x.iter().sum::<u64>() != self.s as u64 {
            return 0.0;
        }
        match multinomial_exact(x) {
            Some(c) => c as f64 * x.iter().zip(&self.probs).map(|(&xi, &p)| p.powi(xi as i32)).product::<f64>(),
            None => self.ln_pmf(x).exp(),
        }
    }

    /// `(Σ p_i z_i)^s`.
    pub fn pgf(&self, z: &[f64]) -> Result<f64> {
        if z.len() != self.dim() {
            return Err(Error::Domain(format!("p.g.f. argument has length {}, expected {}", z.len(), self.dim())));
        }
        let inner: f64 = self.probs.iter().zip(z).map(|(p, z)| p * z).sum();
        Ok(inner.powi(self.s as i32))
    }

    pub fn moments(&self) -> SummandMoments {
        let s = self.s as f64;
        let k = self.dim();
        let mean = self.probs.iter().map(|p| s * p).collect();
        let cov = (0..k)
            .map(|i| {
                (0..k)
                    .map(|j| {
                        let (pi, pj) = (self.probs[i], self.probs[j]);
                        if i == j {
                            s * pi * (1.0 - pi)
                        } else {
                            -s * pi * pj
                        }
                    })
                    .collect()
            })
            .collect();
        SummandMoments { mean, cov }
    }

    /// Sum of the probabilities of the categories not in `indices`.
    fn residual(&self, indices: &[usize]) -> f64 {
        compensated_sum(
            self.probs
                .iter()
                .enumerate()
                .filter(|(i, _)| !indices.contains(i))
                .map(|(_, &p)| p),
        )
    }

    /// Law of `(Y_{i_1}, ..., Y_{i_r}, s - Σ Y_{i_m})`: a multinomial over the
    /// selected categories plus one residual category. The full index set
    /// returns the law unchanged (its residual would have probability zero).
    pub fn marginalize(&self, indices: &[usize]) -> Result<Self> {
        check_indices(indices, self.dim())?;
        if indices.len() == self.dim() {
            return Ok(self.clone());
        }
        let mut probs: Vec<f64> = indices.iter().map(|&i| self.probs[i]).collect();
        probs.push(self.residual(indices));
        Ok(Self { s: self.s, probs })
    }

    /// `P(Y_{i_1} = x_1, ..., Y_{i_r} = x_r)` with the other coordinates summed out.
    pub fn subvector_pmf(&self, indices: &[usize], x: &[u64]) -> f64 {
        let used: u64 = x.iter().sum();
        if used > self.s as u64 {
            return 0.0;
        }
        let rest = self.s as u64 - used;
        let residual = self.residual(indices);
        let mut parts = x.to_vec();
        parts.push(rest);
        (ln_multinomial(&parts)
            + indices.iter().zip(x).map(|(&i, &xi)| xlogy(xi, self.probs[i])).sum::<f64>()
            + xlogy(rest, residual))
        .exp()
    }

    /// One draw as `s` categorical trials.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<u64> {
        let mut out = vec![0u64; self.dim()];
        for _ in 0..self.s {
            out[categorical(rng, &self.probs)] += 1;
        }
        out
    }
}

impl NegMultinomialLaw {
    pub fn new(s: u32, probs: Vec<f64>) -> Result<Self> {
        check_common("negative multinomial", s, &probs)?;
        let total = compensated_sum(probs.iter().copied());
        let p0 = 1.0 - total;
        if !(p0 > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "negative multinomial: probabilities must sum to less than 1 (p0 = 1 - Σ p_i > 0), got Σ p_i = {total}"
            )));
        }
        Ok(Self { s, probs, p0 })
    }

    pub fn s(&self) -> u32 {
        self.s
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// Failure probability `p_0 = 1 - Σ p_i`.
    pub fn p0(&self) -> f64 {
        self.p0
    }

    pub fn dim(&self) -> usize {
        self.probs.len()
    }

    /// `P(Y = x) = (s + Σx - 1)! / (x_1! ... x_k! (s-1)!) Π p_i^{x_i} p_0^s`.
    pub fn pmf(&self, x: &[u64]) -> f64 {
        assert_eq!(x.len(), self.dim(), "dimension mismatch");
        let mut parts = x.to_vec();
        parts.push(self.s as u64 - 1);
        match multinomial_exact(&parts) {
            Some(c) => {
                c as f64
                    * x.iter().zip(&self.probs).map(|(&xi, &p)| p.powi(xi as i32)).product::<f64>()
                    * self.p0.powi(self.s as i32)
            }
            None => (ln_multinomial(&parts)
                + x.iter().zip(&self.probs).map(|(&xi, &p)| xlogy(xi, p)).sum::<f64>()
                + self.s as f64 * self.p0.ln())
            .exp(),
        }
    }

    /// `(p_0 / (1 - Σ p_i z_i))^s`, defined while `Σ p_i z_i < 1`.
    pub fn pgf(&self, z: &[f64]) -> Result<f64> {
        if z.len() != self.dim() {
            return Err(Error::Domain(format!("p.g.f. argument has length {}, expected {}", z.len(), self.dim())));
        }
        let inner: f64 = self.probs.iter().zip(z).map(|(p, z)| p * z).sum();
        if !(inner < 1.0) {
            return Err(Error::Domain(format!(
                "negative multinomial p.g.f. needs Σ p_i z_i < 1, got {inner}"
            )));
        }
        Ok((self.p0 / (1.0 - inner)).powi(self.s as i32))
    }

    pub fn moments(&self) -> SummandMoments {
        let s = self.s as f64;
        let p0 = self.p0;
        let k = self.dim();
        let mean = self.probs.iter().map(|p| s * p / p0).collect();
        let cov = (0..k)
            .map(|i| {
                (0..k)
                    .map(|j| {
                        let (pi, pj) = (self.probs[i], self.probs[j]);
                        if i == j {
                            s * pi * (p0 + pi) / (p0 * p0)
                        } else {
                            s * pi * pj / (p0 * p0)
                        }
                    })
                    .collect()
            })
            .collect();
        SummandMoments { mean, cov }
    }

    /// Law of `(Y_{i_1}, ..., Y_{i_r})`: `NMn(s; ρ)` with
    /// `ρ_m = p_{i_m} / (p_0 + Σ_selected p)`.
    pub fn marginalize(&self, indices: &[usize]) -> Result<Self> {
        check_indices(indices, self.dim())?;
        if indices.len() == self.dim() {
            return Ok(self.clone());
        }
        let selected = compensated_sum(indices.iter().map(|&i| self.probs[i]));
        let denom = self.p0 + selected;
        Ok(Self {
            s: self.s,
            probs: indices.iter().map(|&i| self.probs[i] / denom).collect(),
            p0: self.p0 / denom,
        })
    }

    /// Univariate marginal p.g.f. `((1 - ρ_i) / (1 - ρ_i z))^s`.
    pub fn marginal_pgf(&self, i: usize, z: f64) -> Result<f64> {
        check_indices(&[i], self.dim())?;
        let rest = compensated_sum(self.probs.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, &p)| p));
        let rho = self.probs[i] / (1.0 - rest);
        if !(rho * z < 1.0) {
            return Err(Error::Domain(format!("marginal p.g.f. needs ρ z < 1, got {}", rho * z)));
        }
        Ok(((1.0 - rho) / (1.0 - rho * z)).powi(self.s as i32))
    }

    /// Successes of each type counted until the `s`-th failure.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<u64> {
        let k = self.dim();
        let mut weights = self.probs.clone();
        weights.push(self.p0);
        let mut out = vec![0u64; k];
        let mut failures = 0;
        while failures < self.s {
            let c = categorical(rng, &weights);
            if c == k {
                failures += 1;
            } else {
                out[c] += 1;
            }
        }
        out
    }
}

impl SummandLaw {
    pub fn dim(&self) -> usize {
        match self {
            SummandLaw::Multinomial(l) => l.dim(),
            SummandLaw::NegMultinomial(l) => l.dim(),
        }
    }

    pub fn s(&self) -> u32 {
        match self {
            SummandLaw::Multinomial(l) => l.s(),
            SummandLaw::NegMultinomial(l) => l.s(),
        }
    }

    pub fn probs(&self) -> &[f64] {
        match self {
            SummandLaw::Multinomial(l) => l.probs(),
            SummandLaw::NegMultinomial(l) => l.probs(),
        }
    }

    pub fn pmf(&self, x: &[u64]) -> f64 {
        match self {
            SummandLaw::Multinomial(l) => l.pmf(x),
            SummandLaw::NegMultinomial(l) => l.pmf(x),
        }
    }

    pub fn pgf(&self, z: &[f64]) -> Result<f64> {
        match self {
            SummandLaw::Multinomial(l) => l.pgf(z),
            SummandLaw::NegMultinomial(l) => l.pgf(z),
        }
    }

    pub fn moments(&self) -> SummandMoments {
        match self {
            SummandLaw::Multinomial(l) => l.moments(),
            SummandLaw::NegMultinomial(l) => l.moments(),
        }
    }

    pub fn marginalize(&self, indices: &[usize]) -> Result<Self> {
        Ok(match self {
            SummandLaw::Multinomial(l) => SummandLaw::Multinomial(l.marginalize(indices)?),
            SummandLaw::NegMultinomial(l) => SummandLaw::NegMultinomial(l.marginalize(indices)?),
        })
    }

    /// p.m.f. of the selected sub-vector, other coordinates summed out.
    pub fn subvector_pmf(&self, indices: &[usize], x: &[u64]) -> f64 {
        match self {
            SummandLaw::Multinomial(l) => l.subvector_pmf(indices, x),
            SummandLaw::NegMultinomial(l) => {
                let sub = l.marginalize(indices).expect("indices validated by caller");
                sub.pmf(x)
            }
        }
    }

    /// `P(Y_1 + ... + Y_k = m)`.
    pub fn total_pmf(&self, m: u64) -> f64 {
        match self {
            SummandLaw::Multinomial(l) => {
                if m == l.s as u64 {
                    1.0
                } else {
                    0.0
                }
            }
            SummandLaw::NegMultinomial(l) => {
                let s = l.s as u64;
                (ln_binomial(s + m - 1, m) + xlogy(m, 1.0 - l.p0) + s as f64 * l.p0.ln()).exp()
            }
        }
    }

    /// `P(Y = 0)`.
    pub fn zero_prob(&self) -> f64 {
        match self {
            SummandLaw::Multinomial(_) => 0.0,
            SummandLaw::NegMultinomial(l) => l.p0.powi(l.s as i32),
        }
    }

    /// Largest possible value of `Σ Y`, if bounded.
    pub fn max_total(&self) -> Option<u64> {
        match self {
            SummandLaw::Multinomial(l) => Some(l.s as u64),
            SummandLaw::NegMultinomial(_) => None,
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<u64> {
        match self {
            SummandLaw::Multinomial(l) => l.sample(rng),
            SummandLaw::NegMultinomial(l) => l.sample(rng),
        }
    }
}

impl fmt::Display for SummandLaw {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (name, s, probs) = match self {
            SummandLaw::Multinomial(l) => ("mn", l.s, &l.probs),
            SummandLaw::NegMultinomial(l) => ("nmn", l.s, &l.probs),
        };
        write!(f, "{name}:s={s},p=")?;
        for (i, p) in probs.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{p}")?;
        }
        Ok(())
    }
}

impl From<MultinomialLaw> for SummandLaw {
    fn from(l: MultinomialLaw) -> Self {
        SummandLaw::Multinomial(l)
    }
}

impl From<NegMultinomialLaw> for SummandLaw {
    fn from(l: NegMultinomialLaw) -> Self {
        SummandLaw::NegMultinomial(l)
    }
}

impl FromStr for SummandLaw {
    type Err = Error;

    fn from_str(input: &str) -> Result<Self> {
        let err = |reason: String| Error::Parse {
            what: "summand law",
            input: input.to_string(),
            reason,
        };
        let (name, args) = input
            .split_once(':')
            .ok_or_else(|| err("expected `mn:s=<s>,p=<p1>,...` or `nmn:s=<s>,p=<p1>,...`".into()))?;
        let (s_part, p_part) = args
            .split_once("p=")
            .ok_or_else(|| err("missing `p=` probability list".into()))?;
        let s_raw = s_part
            .trim()
            .trim_end_matches(',')
            .strip_prefix("s=")
            .ok_or_else(|| err("missing `s=` trial count".into()))?;
        let s: u32 = s_raw
            .trim()
            .parse()
            .map_err(|_| err(format!("s `{s_raw}` is not a positive integer")))?;
        let probs = p_part
            .split(',')
            .map(|p| p.trim().parse::<f64>().map_err(|_| err(format!("probability `{p}` is not a number"))))
            .collect::<Result<Vec<_>>>()?;
        match name.trim().to_ascii_lowercase().as_str() {
            "mn" | "multinomial" => Ok(MultinomialLaw::new(s, probs)?.into()),
            "nmn" | "negmultinomial" => Ok(NegMultinomialLaw::new(s, probs)?.into()),
            other => Err(err(format!("unknown summand family `{other}` (expected mn or nmn)"))),
        }
    }
}
