//! Seeded simulation of compound vectors and empirical estimators.
//!
//! Sample `t` of a batch is drawn from its own ChaCha8 stream, seeded with the
//! batch seed and selected by `t`, so batches are identical no matter how the
//! work is split across threads.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::compound::{CompoundModel, MomentReport};
use crate::error::{Error, Result};

/// Minimum bucket size for a regression bucket to count towards the
/// two-bucket requirement.
pub const MIN_BUCKET_POINTS: usize = 5;

#[derive(Debug, Clone, PartialEq)]
pub struct SampleBatch {
    /// One row per sample.
    pub draws: Vec<Vec<u64>>,
    /// The count drawn for each sample.
    pub counts: Vec<u64>,
    pub seed: u64,
    /// Display form of the model that produced the batch.
    pub model: String,
}

/// Sample moments with standard errors. `estimate.cov` uses the unbiased
/// `n - 1` denominator; `constant[i]` flags coordinates with zero sample
/// variance, for which correlations and ratio standard errors are `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalMoments {
    pub n: usize,
    pub estimate: MomentReport,
    pub mean_se: Vec<f64>,
    pub var_se: Vec<f64>,
    pub cor_se: Vec<Vec<Option<f64>>>,
    pub fisher_index_se: Vec<Option<f64>>,
    pub cor_with_n_se: Vec<Option<f64>>,
    pub constant: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegressionPoint {
    pub x_j: u64,
    pub mean: f64,
    pub count: usize,
    /// Standard error of the bucket mean; `None` for single-point buckets.
    pub se: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegressionCurve {
    pub points: Vec<RegressionPoint>,
    pub slope: f64,
    pub intercept: f64,
}

fn sample_one(model: &CompoundModel, seed: u64, index: u64) -> (Vec<u64>, u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    let n = model.count().sample(&mut rng);
    let mut total = vec![0u64; model.dim()];
    for _ in 0..n {
        for (t, y) in total.iter_mut().zip(model.summand().sample(&mut rng)) {
            *t += y;
        }
    }
    (total, n)
}

pub fn sample_compound(model: &CompoundModel, n_samples: usize, seed: u64) -> Result<SampleBatch> {
    if n_samples == 0 {
        return Err(Error::InvalidParameter("number of samples must be at least 1".into()));
    }
    let (draws, counts) = (0..n_samples as u64)
        .into_par_iter()
        .map(|t| sample_one(model, seed, t))
        .collect::<Vec<_>>()
        .into_iter()
        .unzip();
    Ok(SampleBatch {
        draws,
        counts,
        seed,
        model: model.to_string(),
    })
}

impl SampleBatch {
    pub fn len(&self) -> usize {
        self.draws.len()
    }

    pub fn is_empty(&self) -> bool {
        self.draws.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.draws.first().map_or(0, Vec::len)
    }

    /// `# seed=<seed>;<model>` followed by `x1,...,xk,n` and one row per sample.
    pub fn to_csv(&self) -> String {
        let mut out = format!("# seed={};{}\n", self.seed, self.model);
        let header: Vec<String> = (1..=self.dim()).map(|i| format!("x{i}")).collect();
        out.push_str(&header.join(","));
        out.push_str(",n\n");
        for (row, n) in self.draws.iter().zip(&self.counts) {
            for v in row {
                out.push_str(&v.to_string());
                out.push(',');
            }
            out.push_str(&n.to_string());
            out.push('\n');
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let bad = |reason: String| Error::Parse {
            what: "sample CSV",
            input: text.lines().next().unwrap_or("").to_string(),
            reason,
        };
        let mut lines = text.lines();
        let meta = lines
            .next()
            .and_then(|l| l.strip_prefix("# seed="))
            .ok_or_else(|| bad("missing `# seed=` header comment".into()))?;
        let (seed, model) = meta.split_once(';').ok_or_else(|| bad("header lacks the model echo".into()))?;
        let seed = seed.parse().map_err(|_| bad(format!("bad seed `{seed}`")))?;
        let header = lines.next().ok_or_else(|| bad("missing column header".into()))?;
        let width = header.split(',').count();
        let mut draws = Vec::new();
        let mut counts = Vec::new();
        for line in lines {
            let fields = line
                .split(',')
                .map(|f| f.parse::<u64>().map_err(|_| bad(format!("bad value `{f}`"))))
                .collect::<Result<Vec<_>>>()?;
            if fields.len() != width {
                return Err(bad(format!("row `{line}` has {} fields, expected {width}", fields.len())));
            }
            counts.push(fields[width - 1]);
            draws.push(fields[..width - 1].to_vec());
        }
        Ok(Self {
            draws,
            counts,
            seed,
            model: model.to_string(),
        })
    }
}

fn mean_of(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Central moment `E[(u - mu)^p (v - mv)^q]` with the `n` denominator.
fn co_moment(u: &[f64], mu: f64, p: i32, v: &[f64], mv: f64, q: i32) -> f64 {
    u.iter().zip(v).map(|(a, b)| (a - mu).powi(p) * (b - mv).powi(q)).sum::<f64>() / u.len() as f64
}

/// Delta-method standard error of the sample correlation:
/// `n Var(r) ≈ a22 + r²/4 (a40 + a04 + 2 a22) - r (a31 + a13)` with `a_pq`
/// the standardized mixed moments.
fn correlation_se(u: &[f64], v: &[f64]) -> Option<f64> {
    let (mu, mv) = (mean_of(u), mean_of(v));
    let (su2, sv2) = (co_moment(u, mu, 2, v, mv, 0), co_moment(u, mu, 0, v, mv, 2));
    if su2 <= 0.0 || sv2 <= 0.0 {
        return None;
    }
    let a = |p: i32, q: i32| co_moment(u, mu, p, v, mv, q) / (su2.powf(p as f64 / 2.0) * sv2.powf(q as f64 / 2.0));
    let r = a(1, 1);
    let var = a(2, 2) + r * r / 4.0 * (a(4, 0) + a(0, 4) + 2.0 * a(2, 2)) - r * (a(3, 1) + a(1, 3));
    Some((var.max(0.0) / u.len() as f64).sqrt())
}

pub fn empirical_moments(batch: &SampleBatch) -> Result<EmpiricalMoments> {
    let n = batch.len();
    if n < 2 {
        return Err(Error::InvalidParameter("empirical moments need at least 2 samples".into()));
    }
    let k = batch.dim();
    let columns: Vec<Vec<f64>> = (0..k).map(|i| batch.draws.iter().map(|r| r[i] as f64).collect()).collect();
    let counts: Vec<f64> = batch.counts.iter().map(|&c| c as f64).collect();
    let means: Vec<f64> = columns.iter().map(|c| mean_of(c)).collect();
    let mean_n = mean_of(&counts);
    let unbiased = n as f64 / (n as f64 - 1.0);
    let cov: Vec<Vec<f64>> = (0..k)
        .map(|i| {
            (0..k)
                .map(|j| co_moment(&columns[i], means[i], 1, &columns[j], means[j], 1) * unbiased)
                .collect()
        })
        .collect();
    let var_n = co_moment(&counts, mean_n, 2, &counts, mean_n, 0) * unbiased;
    let cov_with_n = (0..k)
        .map(|i| co_moment(&columns[i], means[i], 1, &counts, mean_n, 1) * unbiased)
        .collect();
    let constant: Vec<bool> = (0..k).map(|i| cov[i][i] == 0.0).collect();

    let mean_se = (0..k).map(|i| (cov[i][i] / n as f64).sqrt()).collect();
    let var_se = (0..k)
        .map(|i| {
            let m2 = co_moment(&columns[i], means[i], 2, &columns[i], means[i], 0);
            let m4 = co_moment(&columns[i], means[i], 4, &columns[i], means[i], 0);
            ((m4 - m2 * m2).max(0.0) / n as f64).sqrt()
        })
        .collect();
    let cor_se = (0..k)
        .map(|i| (0..k).map(|j| correlation_se(&columns[i], &columns[j])).collect())
        .collect();
    let fisher_index_se = (0..k)
        .map(|i| {
            let m = means[i];
            if m <= 0.0 || constant[i] {
                return None;
            }
            let v = co_moment(&columns[i], m, 2, &columns[i], m, 0);
            let mu3 = co_moment(&columns[i], m, 3, &columns[i], m, 0);
            let mu4 = co_moment(&columns[i], m, 4, &columns[i], m, 0);
            let var = v.powi(3) / m.powi(4) - 2.0 * v * mu3 / m.powi(3) + (mu4 - v * v) / (m * m);
            Some((var.max(0.0) / n as f64).sqrt())
        })
        .collect();
    let cor_with_n_se = (0..k).map(|i| correlation_se(&columns[i], &counts)).collect();

    Ok(EmpiricalMoments {
        n,
        estimate: MomentReport::from_mean_cov(means, cov, cov_with_n, var_n),
        mean_se,
        var_se,
        cor_se,
        fisher_index_se,
        cor_with_n_se,
        constant,
    })
}

/// Bucket the samples by the exact value of `X_j`, average `X_i` within each
/// bucket, and fit a least-squares line to the raw `(x_j, x_i)` pairs.
pub fn empirical_regression(batch: &SampleBatch, i: usize, j: usize) -> Result<RegressionCurve> {
    let k = batch.dim();
    if i >= k || j >= k {
        return Err(Error::InvalidParameter(format!("coordinate index out of range for dimension {k}")));
    }
    let mut buckets: BTreeMap<u64, Vec<f64>> = BTreeMap::new();
    for row in &batch.draws {
        buckets.entry(row[j]).or_default().push(row[i] as f64);
    }
    let found = buckets.values().filter(|b| b.len() >= MIN_BUCKET_POINTS).count();
    if found < 2 {
        return Err(Error::InsufficientBuckets {
            min_points: MIN_BUCKET_POINTS,
            found,
        });
    }
    let points = buckets
        .iter()
        .map(|(&x_j, values)| {
            let mean = mean_of(values);
            let count = values.len();
            let se = (count > 1).then(|| {
                let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (count as f64 - 1.0);
                (var / count as f64).sqrt()
            });
            RegressionPoint { x_j, mean, count, se }
        })
        .collect();

    let xs: Vec<f64> = batch.draws.iter().map(|r| r[j] as f64).collect();
    let ys: Vec<f64> = batch.draws.iter().map(|r| r[i] as f64).collect();
    let (mx, my) = (mean_of(&xs), mean_of(&ys));
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    Ok(RegressionCurve {
        points,
        slope,
        intercept: my - slope * mx,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::closed_mn::{cmn_moments, CMnModel};
    use crate::counts::CountLaw;
    use crate::summands::{MultinomialLaw, NegMultinomialLaw};

    fn mn_model(count: CountLaw, s: u32, p: &[f64]) -> CompoundModel {
        CompoundModel::new(count, MultinomialLaw::new(s, p.to_vec()).unwrap())
    }

    #[test]
    fn degenerate_zero_gives_zero_rows() {
        let m = mn_model(CountLaw::degenerate(0), 2, &[0.5, 0.5]);
        let batch = sample_compound(&m, 50, 1).unwrap();
        assert!(batch.draws.iter().all(|r| r == &[0, 0]));
        assert!(batch.counts.iter().all(|&n| n == 0));
        assert!(sample_compound(&m, 0, 1).is_err());
    }

    #[test]
    fn rows_sum_to_summand_totals() {
        let m = mn_model(CountLaw::poisson(2.0).unwrap(), 3, &[0.2, 0.8]);
        let batch = sample_compound(&m, 500, 9).unwrap();
        for (row, n) in batch.draws.iter().zip(&batch.counts) {
            assert_eq!(row.iter().sum::<u64>(), 3 * n);
        }
    }

    #[test]
    fn single_trial_frequencies() {
        let m = mn_model(CountLaw::degenerate(1), 1, &[0.3, 0.7]);
        let n = 20_000;
        let batch = sample_compound(&m, n, 17).unwrap();
        let freq = batch.draws.iter().filter(|r| r[0] == 1).count() as f64 / n as f64;
        let sigma = (0.3 * 0.7 / n as f64).sqrt();
        assert!((freq - 0.3).abs() < 4.0 * sigma);
    }

    #[test]
    fn same_seed_same_batch() {
        let m = CompoundModel::new(
            CountLaw::log_series(0.8).unwrap(),
            NegMultinomialLaw::new(2, vec![0.2, 0.3]).unwrap(),
        );
        let a = sample_compound(&m, 1000, 42).unwrap();
        let b = sample_compound(&m, 1000, 42).unwrap();
        assert_eq!(a, b);
        let c = sample_compound(&m, 1000, 43).unwrap();
        assert_ne!(a.draws, c.draws);
        // prefixes agree because sample t only depends on (seed, t)
        let short = sample_compound(&m, 10, 42).unwrap();
        assert_eq!(short.draws[..], a.draws[..10]);
    }

    #[test]
    fn thread_count_does_not_matter() {
        let m = mn_model(CountLaw::log_series(0.9).unwrap(), 5, &[0.3, 0.7]);
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| sample_compound(&m, 2000, 5).unwrap())
        };
        assert_eq!(run(1).to_csv(), run(4).to_csv());
    }

    #[test]
    fn csv_round_trip() {
        let m = mn_model(CountLaw::poisson(1.0).unwrap(), 2, &[0.3, 0.7]);
        let batch = sample_compound(&m, 20, 3).unwrap();
        let csv = batch.to_csv();
        assert!(csv.starts_with("# seed=3;count=poisson:1;summand=mn:s=2,p=0.3,0.7\nx1,x2,n\n"));
        assert_eq!(SampleBatch::from_csv(&csv).unwrap(), batch);
    }

    #[test]
    fn constant_batch_is_flagged() {
        let batch = SampleBatch {
            draws: vec![vec![2, 1]; 10],
            counts: vec![1; 10],
            seed: 0,
            model: String::new(),
        };
        let e = empirical_moments(&batch).unwrap();
        assert_eq!(e.constant, vec![true, true]);
        assert_eq!(e.estimate.cov, vec![vec![0.0, 0.0], vec![0.0, 0.0]]);
        assert_eq!(e.estimate.fisher_index, vec![Some(0.0), Some(0.0)]);
        assert!(e.fisher_index_se.iter().all(Option::is_none));
        assert!(e.estimate.cor[0][1].is_none());
    }

    #[test]
    fn thinning_correlation_near_zero() {
        let m = mn_model(CountLaw::poisson(2.0).unwrap(), 1, &[0.5, 0.5]);
        let batch = sample_compound(&m, 100_000, 2024).unwrap();
        let e = empirical_moments(&batch).unwrap();
        let r = e.estimate.cor[0][1].unwrap();
        assert!(r.abs() < 4.0 * e.cor_se[0][1].unwrap());
        let exact = cmn_moments(&CMnModel::try_from(&m).unwrap());
        for i in 0..2 {
            assert!((e.estimate.mean[i] - exact.mean[i]).abs() < 4.0 * e.mean_se[i]);
        }
    }

    #[test]
    fn forced_complement_has_slope_minus_one() {
        let m = mn_model(CountLaw::degenerate(3), 2, &[0.4, 0.6]);
        let batch = sample_compound(&m, 2000, 8).unwrap();
        let curve = empirical_regression(&batch, 0, 1).unwrap();
        assert!((curve.slope + 1.0).abs() < 1e-12);
        assert!((curve.intercept - 6.0).abs() < 1e-10);
        assert!(curve.points.iter().all(|p| p.count > 0));
        assert!(curve.points.iter().all(|p| (p.mean + p.x_j as f64 - 6.0).abs() < 1e-12));
    }

    #[test]
    fn log_series_slope_tracks_probability_ratio() {
        let m = mn_model(CountLaw::log_series(0.9).unwrap(), 5, &[0.3, 0.7]);
        let batch = sample_compound(&m, 10_000, 11).unwrap();
        let curve = empirical_regression(&batch, 0, 1).unwrap();
        let target = 3.0 / 7.0;
        assert!((curve.slope - target).abs() < 0.15 * target, "slope {}", curve.slope);
    }

    #[test]
    fn insufficient_buckets() {
        let batch = SampleBatch {
            draws: vec![vec![1, 0]; 10],
            counts: vec![1; 10],
            seed: 0,
            model: String::new(),
        };
        assert_eq!(
            empirical_regression(&batch, 0, 1),
            Err(Error::InsufficientBuckets { min_points: 5, found: 1 })
        );
    }
}
