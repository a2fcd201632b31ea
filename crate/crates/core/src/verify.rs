//! Self-checks that tie the closed forms, the series engine, the brute-force
//! oracle and the simulator together. Each check reports the worst deviation
//! it saw and names the first failing case.

use std::fmt;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::catalogue::finite_catalogue;
use crate::closed::ClosedModel;
use crate::closed_mn::{cmn_correlation, cmn_correlation_fi_form, cmn_fisher_index, cmn_given_sum, cmn_moments, cmn_pmf, cmn_sum_pmf, CMnModel};
use crate::closed_nmn::{cnmn_correlation_fi_form, cnmn_fisher_index, cnmn_given_sum, cnmn_moments, CNMnModel};
use crate::compound::{compound_moments, compound_pmf_table, conditional_mean, coordinate_given_sum, correlation, fisher_index_decomposed, sum_pmf, CompoundModel};
use crate::counts::CountLaw;
use crate::error::{Error, Result};
use crate::montecarlo::{empirical_moments, empirical_regression, sample_compound};
use crate::oracle::{brute_conditional_mean, brute_pmf, vandermonde_check};
use crate::plot::model_scatter_svg;
use crate::summands::{MultinomialLaw, NegMultinomialLaw, SummandLaw};

const EPS: f64 = 1e-12;
pub const DEFAULT_SEED: u64 = 1;
pub const DEFAULT_SAMPLES: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Level {
    Quick,
    Full,
}

#[derive(Debug, Clone)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub elapsed: Duration,
}

impl fmt::Display for CheckOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {}: {} ({:.2}s)",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.detail,
            self.elapsed.as_secs_f64()
        )
    }
}

/// Collects failures and the worst deviation for one check.
struct Tally {
    name: &'static str,
    start: Instant,
    failures: Vec<String>,
    worst: f64,
}

impl Tally {
    fn new(name: &'static str) -> Self {
        Self {
            name,
            start: Instant::now(),
            failures: Vec::new(),
            worst: 0.0,
        }
    }

    /// Record `|got - want|` against `tol`.
    fn compare(&mut self, label: impl FnOnce() -> String, got: f64, want: f64, tol: f64) {
        let err = (got - want).abs();
        if err.is_nan() || err > tol {
            self.failures.push(format!("{}: got {got:e}, want {want:e}, |diff| {err:e} > {tol:e}", label()));
        }
        if err > self.worst {
            self.worst = err;
        }
    }

    fn fail(&mut self, message: String) {
        self.failures.push(message);
    }

    fn guard<T>(&mut self, label: &str, r: Result<T>) -> Option<T> {
        r.map_err(|e| self.fail(format!("{label}: {e}"))).ok()
    }

    fn finish(self, summary: String, budget: Option<Duration>) -> CheckOutcome {
        let elapsed = self.start.elapsed();
        let mut failures = self.failures;
        if let Some(b) = budget {
            if elapsed > b {
                failures.push(format!("took {:.1}s, budget {:.0}s", elapsed.as_secs_f64(), b.as_secs_f64()));
            }
        }
        CheckOutcome {
            name: self.name,
            passed: failures.is_empty(),
            detail: match failures.first() {
                Some(first) if failures.len() > 1 => format!("{first} (+{} more)", failures.len() - 1),
                Some(first) => first.clone(),
                None => summary,
            },
            elapsed,
        }
    }
}

/// Closed-form and series p.m.f.s against brute-force enumeration on the
/// finite-count catalogue.
pub fn check_oracle_equivalence() -> CheckOutcome {
    let mut t = Tally::new("oracle equivalence");
    let (mut worst_closed, mut worst_series, mut points) = (0.0f64, 0.0f64, 0usize);
    for e in finite_catalogue() {
        let n_max = e.model.count().support_max().unwrap_or(0);
        let Some(grid) = t.guard(e.name, brute_pmf(&e.model, &e.bounds, n_max)) else { continue };
        let Some(series) = t.guard(e.name, compound_pmf_table(&e.model, &e.bounds, EPS)) else { continue };
        let Some(closed) = t.guard(e.name, ClosedModel::from(&e.model).pmf_table(&e.bounds, EPS)) else { continue };
        for (x, p) in grid.iter() {
            points += 1;
            t.compare(|| format!("{} series at {x:?}", e.name), series.get(&x), p, 1e-12);
            worst_series = worst_series.max((series.get(&x) - p).abs());
            t.compare(|| format!("{} closed form at {x:?}", e.name), closed.get(&x), p, 1e-12);
            worst_closed = worst_closed.max((closed.get(&x) - p).abs());
        }
    }
    t.finish(
        format!("{points} points, max error closed {worst_closed:.1e}, series {worst_series:.1e}"),
        Some(Duration::from_secs(30)),
    )
}

fn uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    rng.random_range(lo..hi)
}

fn random_count(rng: &mut ChaCha8Rng, kind: u32) -> CountLaw {
    match kind % 6 {
        0 => CountLaw::poisson(uniform(rng, 0.1, 10.0)),
        1 => CountLaw::log_series(uniform(rng, 0.05, 0.95)),
        2 => CountLaw::geometric(uniform(rng, 0.05, 0.9)),
        3 => CountLaw::negative_binomial(rng.random_range(1..=5), uniform(rng, 0.05, 0.9)),
        4 => {
            let mut entries: std::collections::BTreeMap<u64, f64> = Default::default();
            for _ in 0..rng.random_range(1..=4) {
                *entries.entry(rng.random_range(0..=10)).or_default() += uniform(rng, 0.05, 1.0);
            }
            *entries.entry(rng.random_range(1..=10)).or_default() += uniform(rng, 0.05, 1.0);
            let total: f64 = entries.values().sum();
            CountLaw::finite_table(entries.into_iter().map(|(n, w)| (n, w / total)))
        }
        _ => Ok(CountLaw::degenerate(rng.random_range(1..=10))),
    }
    .expect("random count parameters are in range")
}

fn random_weights(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let w: Vec<f64> = (0..n).map(|_| uniform(rng, 0.05, 1.0)).collect();
    let total: f64 = w.iter().sum();
    w.iter().map(|v| v / total).collect()
}

fn relative_tol(v: f64) -> f64 {
    1e-12 * v.abs().max(1.0)
}

/// Fisher index decompositions and the alternative correlation forms on
/// random parameter draws. Every fifth count law is Poisson, so `FI N = 1`
/// is always represented.
pub fn check_moment_identities(draws: usize, seed: u64) -> CheckOutcome {
    let mut t = Tally::new("moment identities");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for d in 0..draws {
        let kind = if d % 5 == 0 { 0 } else { rng.random_range(0..6) };
        let count = random_count(&mut rng, kind);
        let s = rng.random_range(1..=6);
        let k = rng.random_range(2..=4);

        let probs = random_weights(&mut rng, k);
        let Some(mn) = t.guard("multinomial draw", MultinomialLaw::new(s, probs)) else { continue };
        let cmn = CMnModel::new(count.clone(), mn);
        let moments = cmn_moments(&cmn);
        let general = compound_moments(&cmn.to_compound());
        for i in 0..k {
            let ratio = moments.cov[i][i] / moments.mean[i];
            if let Some(fi) = t.guard("fisher index", cmn_fisher_index(&cmn, i)) {
                t.compare(|| format!("draw {d} ({count}) multinomial FI X_{}", i + 1), fi, ratio, relative_tol(ratio));
            }
            if let Some(fi) = t.guard("fisher index", fisher_index_decomposed(&cmn.to_compound(), i)) {
                let ratio = general.cov[i][i] / general.mean[i];
                t.compare(|| format!("draw {d} ({count}) FI decomposition X_{}", i + 1), fi, ratio, relative_tol(ratio));
            }
            for j in 0..k {
                match (cmn_correlation(&cmn, i, j), cmn_correlation_fi_form(&cmn, i, j)) {
                    (Some(a), Some(b)) => t.compare(|| format!("draw {d} ({count}) multinomial cor({i},{j})"), a, b, 1e-12),
                    (a, b) if a.is_some() != b.is_some() => t.fail(format!("draw {d}: correlation defined in one form only")),
                    _ => {}
                }
            }
        }

        let weights = random_weights(&mut rng, k + 1);
        let Some(nmn) = t.guard("negative multinomial draw", NegMultinomialLaw::new(s, weights[..k].to_vec())) else { continue };
        let cnmn = CNMnModel::new(count.clone(), nmn);
        let moments = cnmn_moments(&cnmn);
        for i in 0..k {
            let ratio = moments.cov[i][i] / moments.mean[i];
            if let Some(fi) = t.guard("fisher index", cnmn_fisher_index(&cnmn, i)) {
                t.compare(|| format!("draw {d} ({count}) negative multinomial FI X_{}", i + 1), fi, ratio, relative_tol(ratio));
            }
            if let Some(fi) = t.guard("fisher index", fisher_index_decomposed(&cnmn.to_compound(), i)) {
                t.compare(|| format!("draw {d} ({count}) FI decomposition X_{}", i + 1), fi, ratio, relative_tol(ratio));
            }
            for j in 0..k {
                if i == j {
                    continue;
                }
                match (cnmn_correlation_fi_form(&cnmn, i, j), correlation(&cnmn.to_compound(), i, j)) {
                    (Some(a), Some(b)) => t.compare(|| format!("draw {d} ({count}) negative multinomial cor({i},{j})"), a, b, 1e-12),
                    _ => t.fail(format!("draw {d}: negative multinomial correlation undefined")),
                }
            }
        }
    }
    let worst = t.worst;
    t.finish(format!("{draws} draws per family, max deviation {:.1e}", worst), None)
}

/// Regression formulas against conditional means summed from p.m.f. tables,
/// for every `x_j` with `P(X_j = x_j) > 1e-6`.
pub fn check_regression_formulas() -> CheckOutcome {
    let mut t = Tally::new("regression formulas");
    let mut evaluated = 0usize;
    for e in finite_catalogue().into_iter().filter(|e| e.model.dim() >= 2) {
        let k = e.model.dim();
        let closed = ClosedModel::from(&e.model);
        let n_max = e.model.count().support_max().unwrap_or(0);
        let brute = match e.model.summand() {
            SummandLaw::Multinomial(l) => {
                let bound = l.s() as u64 * n_max;
                t.guard(e.name, brute_pmf(&e.model, &vec![bound; k], n_max))
            }
            SummandLaw::NegMultinomial(_) => None,
        };
        for i in 0..k {
            for j in (0..k).filter(|&j| j != i) {
                for x_j in 0..=60u64 {
                    let Some(p) = t.guard(e.name, closed.marginal_pmf(j, x_j, EPS)) else { break };
                    if p <= 1e-6 {
                        continue;
                    }
                    let Some(formula) = t.guard(e.name, closed.regression(i, j, x_j, EPS)) else { continue };
                    let Some(direct) = t.guard(e.name, conditional_mean(&e.model, i, j, x_j, 1e-13)) else { continue };
                    t.compare(|| format!("{} E(X_{} | X_{} = {x_j})", e.name, i + 1, j + 1), formula, direct, 1e-8);
                    if let Some(grid) = &brute {
                        if let Some(b) = t.guard(e.name, brute_conditional_mean(grid, i, j, x_j)) {
                            t.compare(|| format!("{} brute E(X_{} | X_{} = {x_j})", e.name, i + 1, j + 1), formula, b, 1e-8);
                        }
                    }
                    evaluated += 1;
                }
            }
        }
    }
    let worst = t.worst;
    t.finish(format!("{evaluated} conditional means, max error {:.1e}", worst), None)
}

fn mn_model(count: CountLaw, s: u32, p: &[f64]) -> CompoundModel {
    CompoundModel::new(count, MultinomialLaw::new(s, p.to_vec()).expect("valid multinomial"))
}

fn nmn_model(count: CountLaw, s: u32, p: &[f64]) -> CompoundModel {
    CompoundModel::new(count, NegMultinomialLaw::new(s, p.to_vec()).expect("valid negative multinomial"))
}

/// Sum law and coordinate-given-sum law for both families.
pub fn check_structural_laws() -> CheckOutcome {
    let mut t = Tally::new("structural laws");
    let mut models: Vec<CompoundModel> = finite_catalogue().into_iter().map(|e| e.model).collect();
    models.push(mn_model(CountLaw::poisson(2.5).unwrap(), 2, &[0.2, 0.3, 0.5]));
    models.push(mn_model(CountLaw::log_series(0.7).unwrap(), 3, &[0.4, 0.6]));
    models.push(nmn_model(CountLaw::poisson(1.5).unwrap(), 2, &[0.1, 0.2, 0.3]));
    models.push(nmn_model(CountLaw::log_series(0.6).unwrap(), 1, &[0.3, 0.25]));
    let mut sums = 0usize;
    for model in &models {
        match ClosedModel::from(model) {
            ClosedModel::Mn(cmn) => {
                let s = cmn.mn().s() as u64;
                let limit = s * model.count().tail_cutoff(EPS).min(15);
                for m in 0..=limit {
                    let Some(series) = t.guard("sum law", sum_pmf(model, m, EPS)) else { continue };
                    let exact = cmn_sum_pmf(&cmn, m);
                    if series != exact {
                        t.fail(format!("{model}: P(sum = {m}) = {series:e}, P(sN = {m}) = {exact:e}"));
                    }
                    sums += 1;
                    for i in 0..model.dim() {
                        match (coordinate_given_sum(model, i, m, EPS), cmn_given_sum(&cmn, i, m)) {
                            (Ok(law), Ok(b)) => {
                                for x in 0..=m {
                                    let got = law.get(&x).copied().unwrap_or(0.0);
                                    t.compare(|| format!("{model}: X_{} = {x} given sum {m}", i + 1), got, b.pmf(x), 1e-10);
                                }
                            }
                            (Err(Error::ZeroProbabilityCondition(_)), Err(Error::ZeroProbabilityCondition(_))) => {}
                            (a, b) => t.fail(format!("{model}: given sum {m} disagree: {:?} vs {:?}", a.err(), b.err())),
                        }
                    }
                }
            }
            ClosedModel::NMn(cnmn) => {
                for m in 0..=10u64 {
                    for i in 0..model.dim() {
                        let (Some(law), Some(b)) = (
                            t.guard("given sum", coordinate_given_sum(model, i, m, EPS)),
                            t.guard("given sum", cnmn_given_sum(&cnmn, i, m, EPS)),
                        ) else {
                            continue;
                        };
                        for x in 0..=m {
                            let got = law.get(&x).copied().unwrap_or(0.0);
                            t.compare(|| format!("{model}: X_{} = {x} given sum {m}", i + 1), got, b.pmf(x), 1e-10);
                        }
                    }
                }
            }
        }
    }
    let worst = t.worst;
    t.finish(format!("{} models, {sums} exact sum-law values, max binomial error {:.1e}", models.len(), worst), None)
}

/// Poisson counts with single-trial multinomial summands split into
/// independent Poisson coordinates.
pub fn check_poisson_thinning() -> CheckOutcome {
    let mut t = Tally::new("poisson thinning");
    for lambda in [0.5, 2.0, 5.0] {
        for probs in [vec![0.3, 0.7], vec![0.2, 0.3, 0.5]] {
            let k = probs.len();
            let model = mn_model(CountLaw::poisson(lambda).unwrap(), 1, &probs);
            let cmn = CMnModel::try_from(&model).expect("multinomial model");
            let Some(series) = t.guard("thinning", compound_pmf_table(&model, &vec![10; k], EPS)) else { continue };
            let marginals: Vec<CountLaw> = probs.iter().map(|p| CountLaw::poisson(lambda * p).unwrap()).collect();
            for x in crate::compound::BoxShape::new(&vec![10; k]).points().filter(|x| x.iter().sum::<u64>() <= 10) {
                let product: f64 = x.iter().zip(&marginals).map(|(&v, law)| law.pmf(v)).product();
                t.compare(|| format!("λ={lambda} closed form at {x:?}"), cmn_pmf(&cmn, &x), product, 1e-10);
                t.compare(|| format!("λ={lambda} series at {x:?}"), series.get(&x), product, 1e-10);
            }
            for i in 0..k {
                for j in (0..k).filter(|&j| j != i) {
                    match (cmn_correlation(&cmn, i, j), correlation(&model, i, j)) {
                        (Some(a), Some(b)) => {
                            t.compare(|| format!("λ={lambda} cor({i},{j})"), a, 0.0, 1e-12);
                            t.compare(|| format!("λ={lambda} general cor({i},{j})"), b, 0.0, 1e-12);
                        }
                        _ => t.fail(format!("λ={lambda}: correlation undefined")),
                    }
                }
            }
        }
    }
    let worst = t.worst;
    t.finish(format!("max deviation {:.1e}", worst), None)
}

/// `Σ Π C(s, j_l) = C(ns, m)` for all `s, n <= 5`.
pub fn check_vandermonde() -> CheckOutcome {
    let mut t = Tally::new("vandermonde identity");
    let mut cases = 0;
    for s in 0..=5u64 {
        for n in 0..=5u64 {
            for m in 0..=n * s {
                cases += 1;
                if !vandermonde_check(s, n, m) {
                    t.fail(format!("fails at s={s}, n={n}, m={m}"));
                }
            }
        }
    }
    t.finish(format!("{cases} cases exact"), None)
}

/// The two logarithmic-series models used for the simulation checks.
pub fn simulation_models() -> Vec<CompoundModel> {
    vec![
        mn_model(CountLaw::log_series(0.9).unwrap(), 5, &[0.3, 0.7]),
        nmn_model(CountLaw::log_series(0.9).unwrap(), 5, &[0.2, 0.3]),
    ]
}

/// Closed-form moments and regression values against a seeded simulation.
/// Moments must lie within 4 standard errors; regression buckets with at
/// least 30 points within 3.
pub fn check_simulation_consistency(samples: usize, seed: u64) -> CheckOutcome {
    let mut t = Tally::new("simulation consistency");
    let (mut worst_moment_z, mut worst_bucket_z) = (0.0f64, 0.0f64);
    let mut buckets = 0usize;
    let mut constant_buckets = 0usize;
    for model in simulation_models() {
        let Some(batch) = t.guard("sampling", sample_compound(&model, samples, seed)) else { continue };
        let Some(emp) = t.guard("moments", empirical_moments(&batch)) else { continue };
        let closed = ClosedModel::from(&model);
        let exact = closed.moments();
        let mut z_check = |t: &mut Tally, label: String, est: Option<f64>, want: Option<f64>, se: Option<f64>, limit: f64| {
            match (est, want, se) {
                (Some(est), Some(want), Some(se)) if se > 0.0 => {
                    let z = (est - want).abs() / se;
                    let worst = if limit < 4.0 { &mut worst_bucket_z } else { &mut worst_moment_z };
                    *worst = worst.max(z);
                    if z.is_nan() || z > limit {
                        t.fail(format!("{model}: {label} estimate {est:.5} vs exact {want:.5} is {z:.2} SE away"));
                    }
                }
                _ => t.fail(format!("{model}: {label} has no estimate or standard error")),
            }
        };
        for i in 0..model.dim() {
            z_check(&mut t, format!("mean X_{}", i + 1), Some(emp.estimate.mean[i]), Some(exact.mean[i]), Some(emp.mean_se[i]), 4.0);
            z_check(&mut t, format!("var X_{}", i + 1), Some(emp.estimate.cov[i][i]), Some(exact.cov[i][i]), Some(emp.var_se[i]), 4.0);
            z_check(&mut t, format!("cor(X_{}, N)", i + 1), emp.estimate.cor_with_n[i], exact.cor_with_n[i], emp.cor_with_n_se[i], 4.0);
        }
        z_check(&mut t, "cor(X_1, X_2)".into(), emp.estimate.cor[0][1], exact.cor[0][1], emp.cor_se[0][1], 4.0);

        let Some(curve) = t.guard("regression", empirical_regression(&batch, 0, 1)) else { continue };
        for point in curve.points.iter().filter(|p| p.count >= 30) {
            // a bucket whose values are all equal has no usable standard error
            if point.se == Some(0.0) {
                constant_buckets += 1;
                continue;
            }
            let Some(want) = t.guard("regression", closed.regression(0, 1, point.x_j, EPS)) else { continue };
            buckets += 1;
            z_check(&mut t, format!("E(X_1 | X_2 = {})", point.x_j), Some(point.mean), Some(want), point.se, 3.0);
        }
    }
    t.finish(
        format!(
            "{samples} draws per model, worst moment z {worst_moment_z:.2}, {buckets} regression buckets with worst z {worst_bucket_z:.2} ({constant_buckets} constant {} skipped)",
            if constant_buckets == 1 { "bucket" } else { "buckets" }
        ),
        Some(Duration::from_secs(60)),
    )
}

/// Batch CSV and scatter SVG bytes must not depend on the thread count.
pub fn check_determinism(samples: usize, seed: u64) -> CheckOutcome {
    let mut t = Tally::new("determinism");
    for model in simulation_models() {
        let mut reference: Option<(String, String)> = None;
        for threads in [1, 2, 4, 8, 1] {
            let pool = match rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
                Ok(p) => p,
                Err(e) => {
                    t.fail(format!("thread pool: {e}"));
                    continue;
                }
            };
            let out = pool.install(|| -> Result<(String, String)> {
                let batch = sample_compound(&model, samples, seed)?;
                Ok((batch.to_csv(), model_scatter_svg(&model, &batch, EPS)?))
            });
            let Some(out) = t.guard("render", out) else { continue };
            match &reference {
                None => reference = Some(out),
                Some(r) if *r != out => t.fail(format!("{model}: output differs with {threads} threads")),
                Some(_) => {}
            }
        }
    }
    t.finish(format!("{samples} draws, byte-identical CSV and SVG across 1, 2, 4 and 8 threads"), None)
}

pub fn run(level: Level) -> Vec<CheckOutcome> {
    let mut out = vec![
        check_oracle_equivalence(),
        check_moment_identities(100, DEFAULT_SEED),
        check_regression_formulas(),
        check_structural_laws(),
        check_poisson_thinning(),
        check_vandermonde(),
    ];
    if level == Level::Full {
        out.push(check_simulation_consistency(DEFAULT_SAMPLES, DEFAULT_SEED));
        out.push(check_determinism(DEFAULT_SAMPLES, DEFAULT_SEED));
    }
    out
}
