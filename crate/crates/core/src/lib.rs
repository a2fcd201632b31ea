//! Multivariate compound (N-stopped) distributions.
//!
//! A compound vector is `X = I{N>0} (Y_1 + ... + Y_N)` where `N` is a count
//! variable and the `Y_i` are i.i.d. Multinomial or Negative Multinomial
//! vectors independent of `N`.

pub mod catalogue;
pub mod closed;
pub mod closed_mn;
pub mod closed_nmn;
pub mod compound;
pub mod counts;
pub mod error;
pub mod montecarlo;
pub mod oracle;
pub mod plot;
pub mod special;
pub mod summands;
pub mod verify;

pub use closed_mn::{Binomial, CMnModel};
pub use closed_nmn::CNMnModel;
pub use compound::{CompoundModel, MomentReport, PmfTable};
pub use counts::{CountKind, CountLaw, CountMoments};
pub use montecarlo::{EmpiricalMoments, RegressionCurve, RegressionPoint, SampleBatch};
pub use oracle::DenseGrid;
pub use error::{Error, Result};
pub use summands::{MultinomialLaw, NegMultinomialLaw, SummandLaw, SummandMoments};
