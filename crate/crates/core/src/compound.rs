//! The general compound engine: the law of `X = I{N>0} (Y_1 + ... + Y_N)`
//! for any count law and summand law, computed numerically.
//!
//! Joint p.m.f.s are built by iterated convolution of the summand law
//! restricted to a query box. The convolution power for `n` summands is
//! weighted by `P(N = n)` and accumulated with compensated summation. The
//! `N = 0` atom goes to the zero vector.

use std::collections::BTreeMap;
use std::fmt;

use crate::counts::{pow_u64, CountLaw, CountMoments};
use crate::error::{Error, Result};
use crate::special::{compensated_sum, ln_multinomial, xlogy, CompensatedSum};
use crate::summands::{check_indices, SummandLaw, SummandMoments};

/// Growth cap for adaptive boxes in conditional computations.
const MAX_ADAPTIVE_BOUND: u64 = 1 << 16;

#[derive(Debug, Clone, PartialEq)]
pub struct CompoundModel {
    count: CountLaw,
    summand: SummandLaw,
}

impl CompoundModel {
    pub fn new(count: CountLaw, summand: impl Into<SummandLaw>) -> Self {
        Self {
            count,
            summand: summand.into(),
        }
    }

    pub fn count(&self) -> &CountLaw {
        &self.count
    }

    pub fn summand(&self) -> &SummandLaw {
        &self.summand
    }

    pub fn dim(&self) -> usize {
        self.summand.dim()
    }
}

impl fmt::Display for CompoundModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "count={};summand={}", self.count, self.summand)
    }
}

/// Sparse joint p.m.f. over a box, with truncation accounting.
#[derive(Debug, Clone, PartialEq)]
pub struct PmfTable {
    pub dim: usize,
    /// Strictly positive probabilities keyed by the point.
    pub entries: BTreeMap<Vec<u64>, f64>,
    pub captured_mass: f64,
    pub truncation_eps: f64,
    /// Largest count index included in the series.
    pub n_max: u64,
    /// Mass of the truncated series that falls outside the box.
    pub box_spill: f64,
}

impl PmfTable {
    pub fn get(&self, x: &[u64]) -> f64 {
        self.entries.get(x).copied().unwrap_or(0.0)
    }

    /// CSV with header `x1,...,xk,prob`, probabilities with 17 significant
    /// digits, and a trailing `# captured_mass=...,n_max=...` line.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let header: Vec<String> = (1..=self.dim).map(|i| format!("x{i}")).collect();
        out.push_str(&header.join(","));
        out.push_str(",prob\n");
        for (x, p) in &self.entries {
            for v in x {
                out.push_str(&v.to_string());
                out.push(',');
            }
            out.push_str(&format_prob(*p));
            out.push('\n');
        }
        out.push_str(&format!(
            "# captured_mass={},n_max={}\n",
            format_prob(self.captured_mass),
            self.n_max
        ));
        out
    }

    /// Parse the output of [`PmfTable::to_csv`]. Truncation eps and box spill
    /// are not part of the format and read back as zero.
    pub fn from_csv(text: &str) -> Result<Self> {
        let bad = |reason: String| Error::Parse {
            what: "p.m.f. CSV",
            input: text.lines().next().unwrap_or("").to_string(),
            reason,
        };
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| bad("empty input".into()))?;
        let dim = header.split(',').count().checked_sub(1).filter(|d| *d > 0).ok_or_else(|| bad("header has no coordinates".into()))?;
        let mut entries = BTreeMap::new();
        let mut captured_mass = None;
        let mut n_max = None;
        for line in lines {
            if let Some(meta) = line.strip_prefix("# ") {
                for kv in meta.split(',') {
                    match kv.split_once('=') {
                        Some(("captured_mass", v)) => captured_mass = v.parse().ok(),
                        Some(("n_max", v)) => n_max = v.parse().ok(),
                        _ => {}
                    }
                }
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != dim + 1 {
                return Err(bad(format!("row `{line}` has {} fields, expected {}", fields.len(), dim + 1)));
            }
            let x = fields[..dim]
                .iter()
                .map(|f| f.parse::<u64>().map_err(|_| bad(format!("bad coordinate `{f}`"))))
                .collect::<Result<Vec<_>>>()?;
            let p: f64 = fields[dim].parse().map_err(|_| bad(format!("bad probability `{}`", fields[dim])))?;
            entries.insert(x, p);
        }
        Ok(Self {
            dim,
            entries,
            captured_mass: captured_mass.ok_or_else(|| bad("missing captured_mass trailer".into()))?,
            truncation_eps: 0.0,
            n_max: n_max.ok_or_else(|| bad("missing n_max trailer".into()))?,
            box_spill: 0.0,
        })
    }
}

/// Probability formatted with 17 significant digits.
pub fn format_prob(p: f64) -> String {
    format!("{p:.16e}")
}

/// Mean vector, covariance and correlation matrices, Fisher indices and
/// dependence on `N`. Entries that are undefined (zero mean or zero variance)
/// are `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentReport {
    pub mean: Vec<f64>,
    pub cov: Vec<Vec<f64>>,
    pub cor: Vec<Vec<Option<f64>>>,
    pub fisher_index: Vec<Option<f64>>,
    pub cv: Vec<Option<f64>>,
    pub cov_with_n: Vec<f64>,
    pub cor_with_n: Vec<Option<f64>>,
}

impl MomentReport {
    /// Fill the derived fields from a mean vector, covariance matrix and
    /// covariances with `N`.
    pub fn from_mean_cov(mean: Vec<f64>, cov: Vec<Vec<f64>>, cov_with_n: Vec<f64>, var_n: f64) -> Self {
        let k = mean.len();
        let cor = (0..k)
            .map(|i| {
                (0..k)
                    .map(|j| {
                        let d = cov[i][i] * cov[j][j];
                        (d > 0.0).then(|| cov[i][j] / d.sqrt())
                    })
                    .collect()
            })
            .collect();
        let fisher_index = (0..k).map(|i| (mean[i] > 0.0).then(|| cov[i][i] / mean[i])).collect();
        let cv = (0..k).map(|i| (mean[i] > 0.0).then(|| cov[i][i].sqrt() / mean[i])).collect();
        let cor_with_n = (0..k)
            .map(|i| {
                let d = cov[i][i] * var_n;
                (d > 0.0).then(|| cov_with_n[i] / d.sqrt())
            })
            .collect();
        Self {
            mean,
            cov,
            cor,
            fisher_index,
            cv,
            cov_with_n,
            cor_with_n,
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }
}

/// Row-major dense indexing of the box `[0, b_1] x ... x [0, b_k]`.
#[derive(Debug, Clone)]
pub(crate) struct BoxShape {
    bounds: Vec<u64>,
    strides: Vec<usize>,
    len: usize,
}

impl BoxShape {
    pub(crate) fn new(bounds: &[u64]) -> Self {
        let mut strides = vec![0; bounds.len()];
        let mut len = 1usize;
        for d in (0..bounds.len()).rev() {
            strides[d] = len;
            len *= bounds[d] as usize + 1;
        }
        Self {
            bounds: bounds.to_vec(),
            strides,
            len,
        }
    }

    pub(crate) fn len(&self) -> usize {
        self.len
    }

    pub(crate) fn index(&self, x: &[u64]) -> usize {
        x.iter().zip(&self.strides).map(|(&v, &s)| v as usize * s).sum()
    }

    pub(crate) fn point(&self, mut idx: usize) -> Vec<u64> {
        self.strides
            .iter()
            .map(|&s| {
                let v = idx / s;
                idx %= s;
                v as u64
            })
            .collect()
    }

    pub(crate) fn points(&self) -> impl Iterator<Item = Vec<u64>> + '_ {
        (0..self.len).map(|i| self.point(i))
    }
}

/// Result of the series over the count index on a box.
struct BoxSeries {
    values: Vec<f64>,
    n_max: u64,
    series_mass: f64,
}

/// `Σ_n P(N = n) P(S_n = x)` for every `x` in the box, where `S_n` is the sum
/// of `n` independent copies of a vector with the given support (restricted to
/// the box). `S_0 = 0`.
fn series_on_box(count: &CountLaw, support: &[(Vec<u64>, f64)], shape: &BoxShape, eps: f64) -> BoxSeries {
    let n_max = count.tail_cutoff(eps);
    let pmf: Vec<f64> = (0..=n_max).map(|n| count.pmf(n)).collect();
    // tail_after[n] = P(n < N <= n_max)
    let mut tail_after = vec![0.0; pmf.len()];
    for n in (0..pmf.len().saturating_sub(1)).rev() {
        tail_after[n] = tail_after[n + 1] + pmf[n + 1];
    }

    let mut acc = vec![CompensatedSum::new(); shape.len()];
    let mut conv = vec![0.0; shape.len()];
    conv[0] = 1.0;
    acc[0].add(pmf[0]);
    let mut captured = pmf[0];

    let offsets: Vec<(usize, &[u64], f64)> = support
        .iter()
        .filter(|(_, p)| *p > 0.0)
        .map(|(y, p)| (shape.index(y), y.as_slice(), *p))
        .collect();

    for n in 1..=n_max as usize {
        let mut next = vec![0.0; shape.len()];
        for (idx, &mass) in conv.iter().enumerate() {
            if mass == 0.0 {
                continue;
            }
            let x = shape.point(idx);
            for &(off, y, p) in &offsets {
                if x.iter().zip(y).zip(&shape.bounds).all(|((a, b), bound)| a + b <= *bound) {
                    next[idx + off] += mass * p;
                }
            }
        }
        conv = next;
        if pmf[n] > 0.0 {
            for (a, &c) in acc.iter_mut().zip(&conv) {
                if c != 0.0 {
                    a.add(pmf[n] * c);
                }
            }
        }
        let in_box = compensated_sum(conv.iter().copied());
        captured += pmf[n] * in_box;
        // S_m in the box implies S_n in the box for m > n, so the remaining
        // series is bounded by in_box * P(N > n).
        if in_box == 0.0 || in_box * tail_after[n] <= 1e-17 * captured {
            break;
        }
    }

    BoxSeries {
        values: acc.iter().map(|a| a.value()).collect(),
        n_max,
        series_mass: compensated_sum(pmf.iter().copied()),
    }
}

fn table_from_series(shape: &BoxShape, series: BoxSeries, eps: f64) -> PmfTable {
    let mut entries = BTreeMap::new();
    let mut total = CompensatedSum::new();
    for (idx, &p) in series.values.iter().enumerate() {
        if p > 0.0 {
            entries.insert(shape.point(idx), p);
            total.add(p);
        }
    }
    let captured_mass = total.value();
    PmfTable {
        dim: shape.bounds.len(),
        entries,
        captured_mass,
        truncation_eps: eps,
        n_max: series.n_max,
        box_spill: (series.series_mass - captured_mass).max(0.0),
    }
}

/// Support points of the selected summand sub-vector inside the box.
fn subvector_support(summand: &SummandLaw, indices: &[usize], shape: &BoxShape) -> Vec<(Vec<u64>, f64)> {
    let cap = summand.max_total();
    shape
        .points()
        .filter(|y| cap.is_none_or(|c| y.iter().sum::<u64>() <= c))
        .filter_map(|y| {
            let p = summand.subvector_pmf(indices, &y);
            (p > 0.0).then_some((y, p))
        })
        .collect()
}

fn check_eps(eps: f64) -> Result<()> {
    if eps > 0.0 && eps < 1.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("truncation eps must lie in (0, 1), got {eps}")))
    }
}

/// `G_N(G_Y(z))`.
pub fn compound_pgf(model: &CompoundModel, z: &[f64]) -> Result<f64> {
    if let Some(bad) = z.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(Error::Domain(format!("p.g.f. arguments must lie in [0, 1], got {bad}")));
    }
    let inner = model.summand.pgf(z)?;
    model.count.pgf(inner.clamp(0.0, 1.0))
}

/// Joint p.m.f. of `X` on the box `[0, bounds]`.
pub fn compound_pmf_table(model: &CompoundModel, bounds: &[u64], eps: f64) -> Result<PmfTable> {
    let indices: Vec<usize> = (0..model.dim()).collect();
    marginal_table(model, &indices, bounds, eps)
}

/// Joint p.m.f. of the sub-vector `(X_i)_{i in indices}` on a box, by the same
/// series with the summand law marginalized to the selected coordinates.
pub fn marginal_table(model: &CompoundModel, indices: &[usize], bounds: &[u64], eps: f64) -> Result<PmfTable> {
    check_eps(eps)?;
    check_indices(indices, model.dim())?;
    if bounds.len() != indices.len() {
        return Err(Error::Domain(format!(
            "box has {} bounds for {} coordinates",
            bounds.len(),
            indices.len()
        )));
    }
    let shape = BoxShape::new(bounds);
    let support = subvector_support(&model.summand, indices, &shape);
    let series = series_on_box(&model.count, &support, &shape, eps);
    Ok(table_from_series(&shape, series, eps))
}

/// Wald identities for the first two moments.
pub fn compound_moments(model: &CompoundModel) -> MomentReport {
    let cm = model.count.moments();
    let sm = model.summand.moments();
    wald_report(&cm, &sm)
}

pub(crate) fn wald_report(cm: &CountMoments, sm: &SummandMoments) -> MomentReport {
    let k = sm.mean.len();
    let mean: Vec<f64> = sm.mean.iter().map(|m| cm.mean * m).collect();
    let cov = (0..k)
        .map(|i| {
            (0..k)
                .map(|j| cm.mean * sm.cov[i][j] + sm.mean[i] * sm.mean[j] * cm.variance)
                .collect()
        })
        .collect();
    let cov_with_n = sm.mean.iter().map(|m| m * cm.variance).collect();
    MomentReport::from_mean_cov(mean, cov, cov_with_n, cm.variance)
}

/// `FI X_i = FI N · E Y_i + FI Y_i`.
pub fn fisher_index_decomposed(model: &CompoundModel, i: usize) -> Result<f64> {
    let fi_n = model.count.moments().fisher_index()?;
    let sm = model.summand.moments();
    if sm.mean[i] <= 0.0 {
        return Err(Error::UndefinedMoment(format!("summand coordinate {i} has zero mean")));
    }
    Ok(fi_n * sm.mean[i] + sm.cov[i][i] / sm.mean[i])
}

/// `cor(X_i, N) = E Y_i sqrt(Var N / (Var N (E Y_i)^2 + E N Var Y_i))`.
pub fn cor_with_count(model: &CompoundModel, i: usize) -> Option<f64> {
    let cm = model.count.moments();
    let sm = model.summand.moments();
    let var_x = cm.variance * sm.mean[i] * sm.mean[i] + cm.mean * sm.cov[i][i];
    (cm.variance > 0.0 && var_x > 0.0).then(|| sm.mean[i] * (cm.variance / var_x).sqrt())
}

/// `cor(X_i, N) = sqrt(FI N / (FI N + (CV Y_i)^2))`.
pub fn cor_with_count_fi_form(model: &CompoundModel, i: usize) -> Option<f64> {
    let fi_n = model.count.moments().fisher_index().ok()?;
    let sm = model.summand.moments();
    if fi_n <= 0.0 || sm.mean[i] <= 0.0 {
        return None;
    }
    let cv2 = sm.cov[i][i] / (sm.mean[i] * sm.mean[i]);
    Some((fi_n / (fi_n + cv2)).sqrt())
}

/// `cor(X_i, X_j)` from `E N cov(Y_i, Y_j) + E Y_i E Y_j Var N` over the
/// product of the coordinate standard deviations.
pub fn correlation(model: &CompoundModel, i: usize, j: usize) -> Option<f64> {
    let cm = model.count.moments();
    let sm = model.summand.moments();
    let var = |a: usize| cm.variance * sm.mean[a] * sm.mean[a] + cm.mean * sm.cov[a][a];
    let d = var(i) * var(j);
    (d > 0.0).then(|| (cm.mean * sm.cov[i][j] + sm.mean[i] * sm.mean[j] * cm.variance) / d.sqrt())
}

/// The same correlation written with `[CV(Y_i, Y_j)]^2 = cov(Y_i, Y_j) / (E Y_i E Y_j)`,
/// `(CV Y_i)^2` and `FI N`.
pub fn correlation_cv_form(model: &CompoundModel, i: usize, j: usize) -> Option<f64> {
    let fi_n = model.count.moments().fisher_index().ok()?;
    let sm = model.summand.moments();
    if sm.mean[i] <= 0.0 || sm.mean[j] <= 0.0 {
        return None;
    }
    let cv2_ij = sm.cov[i][j] / (sm.mean[i] * sm.mean[j]);
    let cv2 = |a: usize| sm.cov[a][a] / (sm.mean[a] * sm.mean[a]);
    let d = (cv2(i) + fi_n) * (cv2(j) + fi_n);
    (d > 0.0).then(|| (cv2_ij + fi_n) / d.sqrt())
}

/// `P(X_j = x_j)` on the generic engine.
pub fn marginal_pmf(model: &CompoundModel, j: usize, x_j: u64, eps: f64) -> Result<f64> {
    Ok(marginal_table(model, &[j], &[x_j], eps)?.get(&[x_j]))
}

/// Conditional law of `X_i` given `X_j = x_j`, from the bivariate marginal
/// table. The box in the `i` direction doubles until the conditional mass
/// outside it is at most `eps`.
pub fn conditional_pmf(model: &CompoundModel, i: usize, j: usize, x_j: u64, eps: f64) -> Result<BTreeMap<u64, f64>> {
    check_eps(eps)?;
    check_indices(&[i], model.dim())?;
    check_indices(&[j], model.dim())?;
    let series_eps = (eps * 1e-3).max(1e-16);
    let denom = marginal_pmf(model, j, x_j, series_eps)?;
    if denom <= 0.0 {
        return Err(Error::ZeroProbabilityCondition(format!("P(X_{} = {x_j}) = 0", j + 1)));
    }
    if i == j {
        return Ok(BTreeMap::from([(x_j, 1.0)]));
    }
    let (indices, i_first) = if i < j { ([i, j], true) } else { ([j, i], false) };
    let mut bound = x_j.max(8);
    loop {
        let bounds = if i_first { [bound, x_j] } else { [x_j, bound] };
        let table = marginal_table(model, &indices, &bounds, series_eps)?;
        let slice: BTreeMap<u64, f64> = (0..=bound)
            .filter_map(|a| {
                let point = if i_first { [a, x_j] } else { [x_j, a] };
                let p = table.get(&point);
                (p > 0.0).then_some((a, p))
            })
            .collect();
        let mass = compensated_sum(slice.values().copied());
        let tail = 1.0 - mass / denom;
        if tail <= eps {
            return Ok(slice.into_iter().map(|(a, p)| (a, p / mass)).collect());
        }
        if bound >= MAX_ADAPTIVE_BOUND {
            return Err(Error::Domain(format!(
                "conditional law of X_{} given X_{} = {x_j} did not reach tail {eps:e} within bound {bound}",
                i + 1,
                j + 1
            )));
        }
        bound *= 2;
    }
}

/// `E(X_i | X_j = x_j)`.
pub fn conditional_mean(model: &CompoundModel, i: usize, j: usize, x_j: u64, eps: f64) -> Result<f64> {
    let law = conditional_pmf(model, i, j, x_j, eps)?;
    Ok(compensated_sum(law.iter().map(|(&a, &p)| a as f64 * p)))
}

/// Conditional p.g.f. `E(z^{X_i} | X_j = x_j)`.
pub fn conditional_pgf_eval(model: &CompoundModel, i: usize, j: usize, x_j: u64, z: f64, eps: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&z) {
        return Err(Error::Domain(format!("p.g.f. argument must lie in [0, 1], got {z}")));
    }
    let law = conditional_pmf(model, i, j, x_j, eps)?;
    Ok(compensated_sum(law.iter().map(|(&a, &p)| pow_u64(z, a) * p)))
}

/// `P(X_1 + ... + X_k = m)`: the univariate compound of the summand total.
pub fn sum_pmf(model: &CompoundModel, m: u64, eps: f64) -> Result<f64> {
    check_eps(eps)?;
    let shape = BoxShape::new(&[m]);
    let support: Vec<(Vec<u64>, f64)> = (0..=m)
        .filter_map(|t| {
            let p = model.summand.total_pmf(t);
            (p > 0.0).then_some((vec![t], p))
        })
        .collect();
    let series = series_on_box(&model.count, &support, &shape, eps);
    Ok(series.values[m as usize])
}

/// Law of `(Y_i, Σ_{l != i} Y_l)` for one summand.
fn pair_with_rest_pmf(summand: &SummandLaw, i: usize, a: u64, b: u64) -> f64 {
    match summand {
        SummandLaw::Multinomial(l) => {
            let s = l.s() as u64;
            if a + b != s {
                return 0.0;
            }
            let pi = l.probs()[i];
            let rest = compensated_sum(l.probs().iter().enumerate().filter(|(l, _)| *l != i).map(|(_, &p)| p));
            (ln_multinomial(&[a, b]) + xlogy(a, pi) + xlogy(b, rest)).exp()
        }
        SummandLaw::NegMultinomial(l) => {
            let s = l.s() as u64;
            let pi = l.probs()[i];
            let rest = compensated_sum(l.probs().iter().enumerate().filter(|(l, _)| *l != i).map(|(_, &p)| p));
            (ln_multinomial(&[a, b, s - 1]) + xlogy(a, pi) + xlogy(b, rest) + s as f64 * l.p0().ln()).exp()
        }
    }
}

/// Conditional law of `X_i` given `X_1 + ... + X_k = total`.
pub fn coordinate_given_sum(model: &CompoundModel, i: usize, total: u64, eps: f64) -> Result<BTreeMap<u64, f64>> {
    check_eps(eps)?;
    check_indices(&[i], model.dim())?;
    let shape = BoxShape::new(&[total, total]);
    let support: Vec<(Vec<u64>, f64)> = shape
        .points()
        .filter_map(|y| {
            let p = pair_with_rest_pmf(&model.summand, i, y[0], y[1]);
            (p > 0.0).then_some((y, p))
        })
        .collect();
    let series = series_on_box(&model.count, &support, &shape, (eps * 1e-3).max(1e-16));
    let diagonal: BTreeMap<u64, f64> = (0..=total)
        .filter_map(|a| {
            let p = series.values[shape.index(&[a, total - a])];
            (p > 0.0).then_some((a, p))
        })
        .collect();
    let mass = compensated_sum(diagonal.values().copied());
    if mass <= 0.0 {
        return Err(Error::ZeroProbabilityCondition(format!("P(X_1 + ... + X_k = {total}) = 0")));
    }
    Ok(diagonal.into_iter().map(|(a, p)| (a, p / mass)).collect())
}

/// Compound model of the selected coordinates. Multinomial summands keep a
/// completion category as their last coordinate unless every index is selected.
pub fn subset_model(model: &CompoundModel, indices: &[usize]) -> Result<CompoundModel> {
    Ok(CompoundModel {
        count: model.count.clone(),
        summand: model.summand.marginalize(indices)?,
    })
}
