//! Frozen surrogate variable analysis.
//!
//! Estimate batch and other latent factors on a labelled training database,
//! remove them, and then correct new unlabelled samples one at a time without
//! refitting, so a classifier trained on the cleaned database can be applied
//! to them.
//!
//! ```
//! use fsva::simulate::{simulate_study, ScenarioSpec};
//! use fsva::sva::{train, SurrogateCount, TrainOptions};
//! use fsva::{encode_design, fsva_fast};
//!
//! let spec = ScenarioSpec { m: 300, n_db: 40, n_new: 10, seed: 1, ..ScenarioSpec::builtin(1)? };
//! let study = simulate_study(&spec)?;
//! let design = encode_design(&study.database.outcomes)?;
//! let options = TrainOptions { num_sv: SurrogateCount::Fixed(1), ..Default::default() };
//! let trained = train(&study.database.expr, &design, &options)?;
//! let corrected = fsva_fast(&trained.frozen, &study.new_samples.expr)?;
//! assert_eq!(corrected.cleaned.n_samples(), 10);
//! # Ok::<(), fsva::Error>(())
//! ```

pub mod classifier;
pub mod correct;
pub mod data;
mod error;
pub mod harness;
pub mod io;
pub mod linalg;
pub mod persist;
pub mod rng;
pub mod simulate;
pub mod stats;
pub mod sva;

pub use classifier::{nsc_predict, nsc_train, NscModel, NscPrediction};
pub use correct::{compare_variants, fsva_correct, fsva_exact, fsva_fast, CorrectionMethod, CorrectionResult};
pub use data::{align_features, encode_design, Dataset, DesignMatrix, ExpressionMatrix, OutcomeLabels};
pub use error::{Error, Result};
pub use persist::Persist;
pub use sva::{FrozenModel, SvaFit, TrainedSva};
