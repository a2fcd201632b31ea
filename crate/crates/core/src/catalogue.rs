//! Fixed model collections used by the verification suite.

use crate::compound::CompoundModel;
use crate::counts::CountLaw;
use crate::summands::{MultinomialLaw, NegMultinomialLaw};

#[derive(Debug, Clone)]
pub struct CatalogueEntry {
    pub name: &'static str,
    pub model: CompoundModel,
    /// Query box; every point has coordinate sum at most 12.
    pub bounds: Vec<u64>,
}

fn table(entries: &[(u64, f64)]) -> CountLaw {
    CountLaw::finite_table(entries.iter().copied()).expect("catalogue count table is valid")
}

fn mn(s: u32, p: &[f64]) -> MultinomialLaw {
    MultinomialLaw::new(s, p.to_vec()).expect("catalogue multinomial is valid")
}

fn nmn(s: u32, p: &[f64]) -> NegMultinomialLaw {
    NegMultinomialLaw::new(s, p.to_vec()).expect("catalogue negative multinomial is valid")
}

fn bounds_for(k: usize) -> Vec<u64> {
    match k {
        1 => vec![12],
        2 => vec![6, 6],
        _ => vec![4; k],
    }
}

fn entry(name: &'static str, count: CountLaw, summand: impl Into<crate::SummandLaw>) -> CatalogueEntry {
    let model = CompoundModel::new(count, summand);
    let bounds = bounds_for(model.dim());
    CatalogueEntry { name, model, bounds }
}

/// Twelve models with finite-support counts covering `k` in 1..=3, `s` in
/// 1..=3 and both summand families.
pub fn finite_catalogue() -> Vec<CatalogueEntry> {
    vec![
        entry("table-mn-k1-s1", table(&[(0, 0.2), (1, 0.3), (2, 0.5)]), mn(1, &[1.0])),
        entry("table-nmn-k1-s2", table(&[(1, 0.5), (3, 0.5)]), nmn(2, &[0.4])),
        entry("point-nmn-k1-s3", CountLaw::degenerate(2), nmn(3, &[0.25])),
        entry("table-mn-k2-s1", table(&[(0, 0.1), (1, 0.2), (2, 0.3), (4, 0.4)]), mn(1, &[0.3, 0.7])),
        entry("point-mn-k2-s2", CountLaw::degenerate(3), mn(2, &[0.45, 0.55])),
        entry("table-mn-k2-s3", table(&[(1, 0.6), (2, 0.4)]), mn(3, &[0.2, 0.8])),
        entry("table-nmn-k2-s1", table(&[(1, 0.5), (2, 0.5)]), nmn(1, &[0.2, 0.3])),
        entry("table-nmn-k2-s2", table(&[(0, 0.3), (1, 0.3), (3, 0.4)]), nmn(2, &[0.15, 0.35])),
        entry("table-mn-k3-s1", table(&[(0, 0.25), (2, 0.25), (4, 0.5)]), mn(1, &[0.2, 0.3, 0.5])),
        entry("table-mn-k3-s2", table(&[(1, 0.5), (2, 0.5)]), mn(2, &[0.1, 0.6, 0.3])),
        entry("point-nmn-k3-s1", CountLaw::degenerate(3), nmn(1, &[0.1, 0.2, 0.3])),
        entry("table-nmn-k3-s3", table(&[(1, 0.7), (2, 0.3)]), nmn(3, &[0.2, 0.15, 0.25])),
    ]
}

/// Six models for simulation checks: three multinomial and three negative
/// multinomial, with Poisson, logarithmic series and tabulated counts.
pub fn simulation_catalogue() -> Vec<(&'static str, CompoundModel)> {
    let ls = || CountLaw::log_series(0.9).expect("valid");
    let poisson = |l| CountLaw::poisson(l).expect("valid");
    vec![
        ("ls-mn", CompoundModel::new(ls(), mn(5, &[0.3, 0.7]))),
        ("poisson-mn", CompoundModel::new(poisson(3.0), mn(2, &[0.2, 0.3, 0.5]))),
        ("table-mn", CompoundModel::new(table(&[(1, 0.3), (2, 0.3), (5, 0.4)]), mn(3, &[0.6, 0.4]))),
        ("ls-nmn", CompoundModel::new(ls(), nmn(5, &[0.2, 0.3]))),
        ("poisson-nmn", CompoundModel::new(poisson(2.0), nmn(2, &[0.1, 0.2, 0.3]))),
        ("table-nmn", CompoundModel::new(table(&[(0, 0.2), (2, 0.5), (4, 0.3)]), nmn(1, &[0.25, 0.35]))),
    ]
}
