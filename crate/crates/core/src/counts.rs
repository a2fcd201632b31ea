//! Laws of the number of summands `N`.
//!
//! Every law supports its p.m.f., p.g.f. (closed form), the first two moments,
//! tail truncation and inverse-c.d.f. sampling. Laws parse from compact spec
//! strings:
//!
//! | law                | spec string              | `P(N = n)`                              |
//! |--------------------|--------------------------|-----------------------------------------|
//! | Poisson            | `poisson:2.5`            | `e^{-λ} λ^n / n!`                       |
//! | logarithmic series | `ls:0.9`                 | `-p^n / (n ln(1-p))`, `n >= 1`          |
//! | geometric          | `geometric:0.3`          | `(1-q) q^n`                             |
//! | negative binomial  | `negbin:2,0.3`           | `C(n+r-1, n) q^n (1-q)^r`               |
//! | finite table       | `table:0=0.5,3=0.5`      | as listed                               |
//! | point mass         | `degenerate:4`           | `1{n = n0}`                             |
//!
//! `Display` writes the canonical form, which parses back to an equal law.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::Rng;

use crate::error::{Error, Result};
use crate::special::{compensated_sum, ln_binomial, ln_factorial, xlogy};

/// Default truncation for series over the count index.
pub const DEFAULT_EPS: f64 = 1e-12;

const TABLE_SUM_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub enum CountKind {
    Poisson { lambda: f64 },
    LogSeries { p: f64 },
    Geometric { q: f64 },
    NegativeBinomial { r: u32, q: f64 },
    FiniteTable(BTreeMap<u64, f64>),
    Degenerate(u64),
}

/// Law of the number of summands. Construct through the validating
/// constructors or by parsing a spec string.
#[derive(Debug, Clone, PartialEq)]
pub struct CountLaw {
    kind: CountKind,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CountMoments {
    pub mean: f64,
    pub variance: f64,
}

impl CountMoments {
    /// `Var N / E N`; undefined when the mean is zero.
    pub fn fisher_index(&self) -> Result<f64> {
        if self.mean <= 0.0 {
            return Err(Error::UndefinedMoment(
                "Fisher index of a count law with zero mean".into(),
            ));
        }
        Ok(self.variance / self.mean)
    }
}

fn check_open_unit(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 && v < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "{name} must lie in the open interval (0, 1), got {v}"
        )))
    }
}

impl CountLaw {
    pub fn poisson(lambda: f64) -> Result<Self> {
        if !(lambda.is_finite() && lambda > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "Poisson rate must be positive and finite, got {lambda}"
            )));
        }
        Ok(Self { kind: CountKind::Poisson { lambda } })
    }

    pub fn log_series(p: f64) -> Result<Self> {
        check_open_unit("logarithmic series parameter", p)?;
        Ok(Self { kind: CountKind::LogSeries { p } })
    }

    pub fn geometric(q: f64) -> Result<Self> {
        check_open_unit("geometric parameter", q)?;
        Ok(Self { kind: CountKind::Geometric { q } })
    }

    pub fn negative_binomial(r: u32, q: f64) -> Result<Self> {
        if r == 0 {
            return Err(Error::InvalidParameter(
                "negative binomial size r must be a positive integer".into(),
            ));
        }
        check_open_unit("negative binomial parameter", q)?;
        Ok(Self { kind: CountKind::NegativeBinomial { r, q } })
    }

    /// Finite-support law from `(n, P(N = n))` pairs. Zero-probability entries are dropped.
    pub fn finite_table<I: IntoIterator<Item = (u64, f64)>>(entries: I) -> Result<Self> {
        let mut table = BTreeMap::new();
        for (n, p) in entries {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidParameter(format!(
                    "table probability P(N={n}) must lie in [0, 1], got {p}"
                )));
            }
            if table.insert(n, p).is_some() {
                return Err(Error::InvalidParameter(format!(
                    "table lists N={n} more than once"
                )));
            }
        }
        let total = compensated_sum(table.values().copied());
        if (total - 1.0).abs() > TABLE_SUM_TOL {
            return Err(Error::InvalidParameter(format!(
                "table probabilities must sum to 1 within {TABLE_SUM_TOL:e}, got {total}"
            )));
        }
        table.retain(|_, p| *p > 0.0);
        Ok(Self { kind: CountKind::FiniteTable(table) })
    }

    pub fn degenerate(n0: u64) -> Self {
        Self { kind: CountKind::Degenerate(n0) }
    }

    pub fn kind(&self) -> &CountKind {
        &self.kind
    }

    /// Largest support point, or `None` for infinite support.
    pub fn support_max(&self) -> Option<u64> {
        match &self.kind {
            CountKind::FiniteTable(t) => t.keys().next_back().copied(),
            CountKind::Degenerate(n0) => Some(*n0),
            _ => None,
        }
    }

    /// `P(N = n)`.
    pub fn pmf(&self, n: u64) -> f64 {
        match &self.kind {
            CountKind::Poisson { lambda } => {
                (-lambda + xlogy(n, *lambda) - ln_factorial(n)).exp()
            }
            CountKind::LogSeries { p } => {
                if n == 0 {
                    0.0
                } else {
                    (xlogy(n, *p) - (n as f64).ln()).exp() / -(-p).ln_1p()
                }
            }
            CountKind::Geometric { q } => (xlogy(n, *q) + (-q).ln_1p()).exp(),
            CountKind::NegativeBinomial { r, q } => {
                let r = *r as u64;
                (ln_binomial(n + r - 1, n) + xlogy(n, *q) + r as f64 * (-q).ln_1p()).exp()
            }
            CountKind::FiniteTable(t) => t.get(&n).copied().unwrap_or(0.0),
            CountKind::Degenerate(n0) => {
                if n == *n0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    /// `G_N(z) = E z^N` for `z` in `[0, 1]`.
    pub fn pgf(&self, z: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&z) {
            return Err(Error::Domain(format!(
                "count p.g.f. argument must lie in [0, 1], got {z}"
            )));
        }
        Ok(self.pgf_unchecked(z))
    }

    fn pgf_unchecked(&self, z: f64) -> f64 {
        match &self.kind {
            CountKind::Poisson { lambda } => (lambda * (z - 1.0)).exp(),
            CountKind::LogSeries { p } => (-p * z).ln_1p() / (-p).ln_1p(),
            CountKind::Geometric { q } => (1.0 - q) / (1.0 - q * z),
            CountKind::NegativeBinomial { r, q } => ((1.0 - q) / (1.0 - q * z)).powi(*r as i32),
            CountKind::FiniteTable(t) => compensated_sum(t.iter().map(|(&n, &p)| p * pow_u64(z, n))),
            CountKind::Degenerate(n0) => pow_u64(z, *n0),
        }
    }

    /// `G_{sN}(z) = G_N(z^s)`.
    pub fn scaled_pgf(&self, s: u32, z: f64) -> Result<f64> {
        if s == 0 {
            return Err(Error::InvalidParameter("scale s must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&z) {
            return Err(Error::Domain(format!(
                "count p.g.f. argument must lie in [0, 1], got {z}"
            )));
        }
        Ok(self.pgf_unchecked(pow_u64(z, s as u64)))
    }

    /// Exact mean and variance.
    pub fn moments(&self) -> CountMoments {
        let (mean, variance) = match &self.kind {
            CountKind::Poisson { lambda } => (*lambda, *lambda),
            CountKind::LogSeries { p } => {
                let a = -1.0 / (-p).ln_1p();
                let mean = a * p / (1.0 - p);
                (mean, a * p * (1.0 - a * p) / ((1.0 - p) * (1.0 - p)))
            }
            CountKind::Geometric { q } => (q / (1.0 - q), q / ((1.0 - q) * (1.0 - q))),
            CountKind::NegativeBinomial { r, q } => {
                let r = *r as f64;
                (r * q / (1.0 - q), r * q / ((1.0 - q) * (1.0 - q)))
            }
            CountKind::FiniteTable(t) => {
                let mean = compensated_sum(t.iter().map(|(&n, &p)| n as f64 * p));
                let var = compensated_sum(t.iter().map(|(&n, &p)| {
                    let d = n as f64 - mean;
                    d * d * p
                }));
                (mean, var)
            }
            CountKind::Degenerate(n0) => (*n0 as f64, 0.0),
        };
        CountMoments { mean, variance }
    }

    /// Upper bound on `P(N = m + 1) / P(N = m)` valid for every `m >= n`,
    /// for the infinite-support families.
    fn ratio_bound(&self, n: u64) -> f64 {
        match &self.kind {
            CountKind::Poisson { lambda } => lambda / (n as f64 + 1.0),
            CountKind::LogSeries { p } => *p,
            CountKind::Geometric { q } => *q,
            CountKind::NegativeBinomial { r, q } => q * (n as f64 + *r as f64) / (n as f64 + 1.0),
            CountKind::FiniteTable(_) | CountKind::Degenerate(_) => 0.0,
        }
    }

    /// `P(N = 0), ..., P(N = n_hi)` together with a bound on `P(N > n_hi)`,
    /// where `n_hi` is chosen so that bound is far below `eps`.
    fn pmf_terms(&self, eps: f64) -> (Vec<f64>, f64) {
        if let Some(max) = self.support_max() {
            return ((0..=max).map(|n| self.pmf(n)).collect(), 0.0);
        }
        let target = eps * 1e-4;
        let mut terms = Vec::new();
        let mut n = 0u64;
        loop {
            let term = self.pmf(n);
            terms.push(term);
            let r = self.ratio_bound(n);
            if r < 1.0 && n > 0 {
                let bound = term * r / (1.0 - r);
                if bound <= target {
                    return (terms, bound);
                }
            }
            n += 1;
        }
    }

    /// `P(N > n)`.
    pub fn tail_mass(&self, n: u64) -> f64 {
        if let Some(max) = self.support_max() {
            if n >= max {
                return 0.0;
            }
            return compensated_sum((n + 1..=max).map(|m| self.pmf(m)));
        }
        let mut acc = crate::special::CompensatedSum::new();
        let mut m = n + 1;
        loop {
            let term = self.pmf(m);
            acc.add(term);
            let r = self.ratio_bound(m);
            if r < 1.0 && term * r / (1.0 - r) <= acc.value() * 1e-17 {
                return acc.value();
            }
            m += 1;
        }
    }

    /// Smallest `n_max` with `P(N > n_max) <= eps`.
    pub fn tail_cutoff(&self, eps: f64) -> u64 {
        let (terms, beyond) = self.pmf_terms(eps);
        // suffix sums, smallest terms first
        let mut tail = beyond;
        let mut cutoff = terms.len() as u64 - 1;
        for n in (0..terms.len()).rev() {
            if tail > eps {
                break;
            }
            cutoff = n as u64;
            tail += terms[n];
        }
        cutoff
    }

    /// Draw `N` by sequential inversion of the c.d.f.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        let u: f64 = rng.random();
        match &self.kind {
            CountKind::Degenerate(n0) => *n0,
            CountKind::FiniteTable(t) => {
                let mut cum = 0.0;
                for (&n, &p) in t {
                    cum += p;
                    if u < cum {
                        return n;
                    }
                }
                *t.keys().next_back().expect("table has at least one entry")
            }
            _ => {
                let mut n = match self.kind {
                    CountKind::LogSeries { .. } => 1,
                    _ => 0,
                };
                let mut cum = 0.0;
                let mut prev = 0.0;
                loop {
                    let term = self.pmf(n);
                    cum += term;
                    if u < cum {
                        return n;
                    }
                    // rounding left u above the accumulated mass
                    if term < prev && term <= f64::MIN_POSITIVE {
                        return n;
                    }
                    prev = term;
                    n += 1;
                }
            }
        }
    }
}

/// `z^n` with `0^0 = 1`.
pub(crate) fn pow_u64(z: f64, n: u64) -> f64 {
    if n <= i32::MAX as u64 {
        z.powi(n as i32)
    } else {
        z.powf(n as f64)
    }
}

impl fmt::Display for CountLaw {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            CountKind::Poisson { lambda } => write!(f, "poisson:{lambda}"),
            CountKind::LogSeries { p } => write!(f, "ls:{p}"),
            CountKind::Geometric { q } => write!(f, "geometric:{q}"),
            CountKind::NegativeBinomial { r, q } => write!(f, "negbin:{r},{q}"),
            CountKind::FiniteTable(t) => {
                f.write_str("table:")?;
                for (i, (n, p)) in t.iter().enumerate() {
                    if i > 0 {
                        f.write_str(",")?;
                    }
                    write!(f, "{n}={p}")?;
                }
                Ok(())
            }
            CountKind::Degenerate(n0) => write!(f, "degenerate:{n0}"),
        }
    }
}

fn parse_err(input: &str, reason: impl Into<String>) -> Error {
    Error::Parse {
        what: "count law",
        input: input.to_string(),
        reason: reason.into(),
    }
}

fn parse_num<T: FromStr>(input: &str, field: &str, raw: &str) -> Result<T> {
    raw.trim()
        .parse()
        .map_err(|_| parse_err(input, format!("{field} `{raw}` is not a valid number")))
}

impl FromStr for CountLaw {
    type Err = Error;

    fn from_str(input: &str) -> Result<Self> {
        let (name, args) = input
            .split_once(':')
            .ok_or_else(|| parse_err(input, "expected `<family>:<parameters>`"))?;
        match name.trim().to_ascii_lowercase().as_str() {
            "poisson" => CountLaw::poisson(parse_num(input, "rate", args)?),
            "ls" | "logseries" => CountLaw::log_series(parse_num(input, "p", args)?),
            "geometric" | "geom" => CountLaw::geometric(parse_num(input, "q", args)?),
            "negbin" | "nb" => {
                let (r, q) = args
                    .split_once(',')
                    .ok_or_else(|| parse_err(input, "expected `negbin:<r>,<q>`"))?;
                CountLaw::negative_binomial(parse_num(input, "r", r)?, parse_num(input, "q", q)?)
            }
            "table" => {
                let entries = args
                    .split(',')
                    .map(|entry| {
                        let (n, p) = entry
                            .split_once('=')
                            .ok_or_else(|| parse_err(input, format!("table entry `{entry}` is not `n=p`")))?;
                        Ok((parse_num(input, "n", n)?, parse_num(input, "probability", p)?))
                    })
                    .collect::<Result<Vec<(u64, f64)>>>()?;
                CountLaw::finite_table(entries)
            }
            "degenerate" | "point" => Ok(CountLaw::degenerate(parse_num(input, "n0", args)?)),
            other => Err(parse_err(
                input,
                format!("unknown count family `{other}` (expected poisson, ls, geometric, negbin, table, degenerate)"),
            )),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn laws() -> Vec<CountLaw> {
        vec![
            CountLaw::poisson(2.0).unwrap(),
            CountLaw::poisson(0.3).unwrap(),
            CountLaw::log_series(0.5).unwrap(),
            CountLaw::log_series(0.9).unwrap(),
            CountLaw::geometric(0.4).unwrap(),
            CountLaw::negative_binomial(3, 0.35).unwrap(),
            CountLaw::finite_table([(0, 0.5), (3, 0.5)]).unwrap(),
            CountLaw::finite_table([(1, 0.2), (2, 0.3), (4, 0.5)]).unwrap(),
            CountLaw::degenerate(4),
        ]
    }

    fn series_pgf(law: &CountLaw, z: f64) -> f64 {
        let cutoff = law.tail_cutoff(1e-17);
        compensated_sum((0..=cutoff).map(|n| law.pmf(n) * pow_u64(z, n)))
    }

    #[test]
    fn pmf_examples() {
        assert_eq!(CountLaw::degenerate(2).pmf(2), 1.0);
        assert_eq!(CountLaw::log_series(0.5).unwrap().pmf(0), 0.0);
        let p0 = CountLaw::poisson(2.0).unwrap().pmf(0);
        assert!((p0 - (-2.0f64).exp()).abs() < 1e-16);
    }

    #[test]
    fn pgf_examples() {
        for law in laws() {
            assert!((law.pgf(1.0).unwrap() - 1.0).abs() < 1e-12, "{law}");
        }
        assert_eq!(CountLaw::degenerate(3).pgf(0.5).unwrap(), 0.125);
        let ls = CountLaw::log_series(0.5).unwrap();
        let expected = (1.0f64 - 0.25).ln() / 0.5f64.ln();
        assert!((ls.pgf(0.5).unwrap() - expected).abs() < 1e-15);
        // direct series -p^n z^n / (n ln(1-p))
        let direct = compensated_sum((1..200).map(|n| -(0.25f64.powi(n)) / (n as f64 * 0.5f64.ln())));
        assert!((ls.pgf(0.5).unwrap() - direct).abs() < 1e-12);
        assert!(ls.pgf(1.5).is_err());
        assert!(ls.pgf(-0.1).is_err());
    }

    #[test]
    fn pgf_closed_form_matches_series() {
        for law in laws() {
            for z in [0.0, 0.25, 0.5, 0.75, 1.0] {
                let closed = law.pgf(z).unwrap();
                let series = series_pgf(&law, z);
                assert!((closed - series).abs() < 1e-12, "{law} z={z}: {closed} vs {series}");
            }
        }
    }

    #[test]
    fn scaled_pgf_examples() {
        assert_eq!(CountLaw::degenerate(1).scaled_pgf(2, 0.5).unwrap(), 0.25);
        let poisson = CountLaw::poisson(1.0).unwrap();
        let closed = (0.9f64.powi(3) - 1.0).exp();
        assert!((poisson.scaled_pgf(3, 0.9).unwrap() - closed).abs() < 1e-15);
        // G_{3N}(z) as a series over n of P(N=n) z^{3n}
        let series = compensated_sum((0..60).map(|n| poisson.pmf(n) * 0.9f64.powi(3 * n as i32)));
        assert!((poisson.scaled_pgf(3, 0.9).unwrap() - series).abs() < 1e-13);
        for law in laws() {
            assert!((law.scaled_pgf(4, 1.0).unwrap() - 1.0).abs() < 1e-12);
            for z in [0.0, 0.3, 0.8] {
                assert_eq!(law.scaled_pgf(1, z).unwrap(), law.pgf(z).unwrap());
            }
        }
    }

    #[test]
    fn moments_examples() {
        let m = CountLaw::degenerate(5).moments();
        assert_eq!((m.mean, m.variance, m.fisher_index().unwrap()), (5.0, 0.0, 0.0));
        let m = CountLaw::poisson(3.5).unwrap().moments();
        assert_eq!((m.mean, m.variance, m.fisher_index().unwrap()), (3.5, 3.5, 1.0));
        assert!(CountLaw::degenerate(0).moments().fisher_index().is_err());
        let ls = CountLaw::log_series(0.5).unwrap();
        let expected = -0.5 / (0.5 * 0.5f64.ln());
        assert!((ls.moments().mean - expected).abs() < 1e-15);
    }

    #[test]
    fn moments_match_truncated_series() {
        for law in laws() {
            let cutoff = law.tail_cutoff(1e-18);
            let mean = compensated_sum((0..=cutoff).map(|n| n as f64 * law.pmf(n)));
            let second = compensated_sum((0..=cutoff).map(|n| (n * n) as f64 * law.pmf(n)));
            let m = law.moments();
            assert!((m.mean - mean).abs() < 1e-10, "{law}");
            assert!((m.variance - (second - mean * mean)).abs() < 1e-9, "{law}");
        }
    }

    #[test]
    fn tail_cutoff_examples() {
        assert_eq!(CountLaw::degenerate(4).tail_cutoff(1e-12), 4);
        let table = CountLaw::finite_table([(0, 0.5), (3, 0.5)]).unwrap();
        assert_eq!(table.tail_cutoff(1e-12), 3);
        // c.d.f. oracle: P(N > n) = 1 - Σ_{m <= n} e^{-2} 2^m / m!, with the
        // tail summed directly for accuracy near the threshold
        let poisson = CountLaw::poisson(2.0).unwrap();
        let mut pmf = vec![(-2.0f64).exp()];
        for m in 1..60 {
            let prev = pmf[m - 1];
            pmf.push(prev * 2.0 / m as f64);
        }
        let tail = |n: usize| pmf[n + 1..].iter().rev().sum::<f64>();
        let oracle = (0..60).find(|&n| tail(n) <= 1e-9).unwrap();
        assert_eq!(poisson.tail_cutoff(1e-9), oracle as u64);
        assert_eq!(oracle, 15);
    }

    #[test]
    fn tail_cutoff_captures_mass() {
        for law in laws() {
            for eps in [1e-3, 1e-8, 1e-12] {
                let cutoff = law.tail_cutoff(eps);
                let captured = compensated_sum((0..=cutoff).map(|n| law.pmf(n)));
                assert!(captured >= 1.0 - eps - 1e-15, "{law} eps={eps}");
                assert!(law.tail_mass(cutoff) <= eps * (1.0 + 1e-9), "{law} eps={eps}");
                if cutoff > 0 && law.pmf(cutoff) > 0.0 {
                    assert!(law.tail_mass(cutoff - 1) > eps, "{law} eps={eps} not minimal");
                }
            }
        }
    }

    #[test]
    fn sampler_point_masses() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            assert_eq!(CountLaw::degenerate(2).sample(&mut rng), 2);
            assert_eq!(CountLaw::finite_table([(1, 1.0)]).unwrap().sample(&mut rng), 1);
        }
    }

    #[test]
    fn log_series_sampler_frequency_at_one() {
        let ls = CountLaw::log_series(0.5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let draws = 100_000;
        let ones = (0..draws).filter(|_| ls.sample(&mut rng) == 1).count();
        let p = -0.5 / 0.5f64.ln();
        let se = (p * (1.0 - p) / draws as f64).sqrt();
        let freq = ones as f64 / draws as f64;
        assert!((freq - p).abs() < 4.0 * se, "freq {freq} vs {p}");
    }

    #[test]
    fn sampler_means_within_four_standard_errors() {
        let draws = 100_000;
        for (i, law) in laws().into_iter().enumerate() {
            let mut rng = ChaCha8Rng::seed_from_u64(100 + i as u64);
            let total: f64 = (0..draws).map(|_| law.sample(&mut rng) as f64).sum();
            let m = law.moments();
            let se = (m.variance / draws as f64).sqrt();
            let mean = total / draws as f64;
            assert!((mean - m.mean).abs() <= 4.0 * se + 1e-12, "{law}: {mean} vs {}", m.mean);
        }
    }

    #[test]
    fn spec_strings_round_trip() {
        for law in laws() {
            let text = law.to_string();
            assert_eq!(text.parse::<CountLaw>().unwrap(), law, "{text}");
        }
        assert_eq!("poisson:2.0".parse::<CountLaw>().unwrap(), CountLaw::poisson(2.0).unwrap());
        assert_eq!("ls:0.5".parse::<CountLaw>().unwrap().to_string(), "ls:0.5");
        assert_eq!("degenerate:4".parse::<CountLaw>().unwrap(), CountLaw::degenerate(4));
        assert_eq!(
            "table:0=0.5,3=0.5".parse::<CountLaw>().unwrap().to_string(),
            "table:0=0.5,3=0.5"
        );
    }

    #[test]
    fn spec_string_errors_name_the_constraint() {
        let err = "table:0=0.5,3=0.6".parse::<CountLaw>().unwrap_err();
        assert!(err.to_string().contains("sum to 1"), "{err}");
        let err = "ls:1.5".parse::<CountLaw>().unwrap_err();
        assert!(err.to_string().contains("(0, 1)"), "{err}");
        assert!("poisson:-1".parse::<CountLaw>().is_err());
        assert!("poisson".parse::<CountLaw>().is_err());
        assert!("zeta:2".parse::<CountLaw>().is_err());
        assert!("negbin:0,0.5".parse::<CountLaw>().is_err());
    }
}
