//! Log-space combinatorics and compensated summation.

use statrs::function::factorial;

/// Largest total for which multinomial coefficients are formed in exact integer arithmetic.
const EXACT_LIMIT: u64 = 20;

/// `ln(n!)`.
pub fn ln_factorial(n: u64) -> f64 {
    factorial::ln_factorial(n)
}

/// `x * ln(p)` with the convention `0 * ln(0) = 0`.
pub fn xlogy(x: u64, p: f64) -> f64 {
    if x == 0 {
        0.0
    } else {
        x as f64 * p.ln()
    }
}

/// `ln( (Σ parts)! / Π parts! )`.
pub fn ln_multinomial(parts: &[u64]) -> f64 {
    let total: u64 = parts.iter().sum();
    ln_factorial(total) - parts.iter().map(|&p| ln_factorial(p)).sum::<f64>()
}

pub fn ln_binomial(n: u64, k: u64) -> f64 {
    if k > n {
        return f64::NEG_INFINITY;
    }
    ln_factorial(n) - ln_factorial(k) - ln_factorial(n - k)
}

/// Exact multinomial coefficient for totals up to 20.
pub fn multinomial_exact(parts: &[u64]) -> Option<u64> {
    let total: u64 = parts.iter().sum();
    if total > EXACT_LIMIT {
        return None;
    }
    // build as a product of binomials so every intermediate stays integral
    let mut acc: u64 = 1;
    let mut running = 0u64;
    for &part in parts {
        for t in 1..=part {
            running += 1;
            acc = acc * running / t;
        }
    }
    Some(acc)
}

/// Multinomial coefficient as a float: exact for small totals, log-gamma otherwise.
pub fn multinomial(parts: &[u64]) -> f64 {
    match multinomial_exact(parts) {
        Some(c) => c as f64,
        None => ln_multinomial(parts).exp(),
    }
}

/// Neumaier compensated accumulator.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

impl std::iter::FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = CompensatedSum::new();
        for x in iter {
            acc.add(x);
        }
        acc
    }
}

/// Compensated sum of an iterator of floats.
pub fn compensated_sum<I: IntoIterator<Item = f64>>(iter: I) -> f64 {
    iter.into_iter().collect::<CompensatedSum>().value()
}
