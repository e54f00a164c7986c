//! Recommendation by quadratic binary optimization.
//!
//! This crate trains a degree-2 factorization machine on (user, item,
//! rating) triples over binary-coded users and items, reduces the
//! fixed-user suggestion problem to a QUBO (equivalently an Ising
//! problem) over the item bits, and solves it with interchangeable
//! backends: direct scoring of the whole catalog, exhaustive enumeration,
//! or a simulated-annealing sampler with a quantum-annealer-style
//! interface. Evaluation helpers measure how much of the direct method's
//! top list the sampler captures and how both approaches scale with
//! catalog size.
//!
//! The pieces compose in pipeline order:
//!
//! 1. [`data`]: ingest or generate rating triples ([`synth`]).
//! 2. [`encoding`]: binary codebooks for users and items; surplus codes
//!    map to the best-rated items so every bit pattern means something.
//! 3. [`fm`]: model, prediction, and SGD training.
//! 4. [`qubo`]: the fixed-user reduction and the spin-variable form.
//! 5. [`solvers`]: direct, exhaustive, and annealing backends behind
//!    [`solvers::suggest`].
//! 6. [`eval`]: overlap experiments, timing scans, and scaling fits.
//!
//! Everything randomized is seeded and reproducible, including across
//! thread counts.

pub mod data;
pub mod encoding;
pub mod error;
pub mod eval;
pub mod fm;
pub mod manifest;
pub mod model_io;
pub mod qubo;
mod rng;
pub mod solvers;
pub mod synth;

pub use data::{ingest, split, Rating, RatingsDataset, RowLimit};
pub use encoding::{bits_needed, decode_index, encode_index, ItemCodebook, UserCodebook};
pub use error::{Error, Result};
pub use eval::{
    benchmark, extrapolation_table, fit_complexity, overlap_rate, run_overlap_experiment,
    sample_user_indices, BenchInstance, BenchRecord, ComplexityFamily, ComplexityFit,
    OverlapReport,
};
pub use fm::{rmse, train_sgd, FmModel, TrainConfig, TrainOutcome};
pub use manifest::RunManifest;
pub use model_io::{load_model, save_model, ModelBundle};
pub use qubo::{
    bits_to_spins, qubo_to_ising, reduce_for_user, spins_to_bits, IsingProblem, QuboProblem,
};
pub use solvers::{
    sample_sa, samples_to_recommendations, solve_direct, solve_exhaustive, suggest,
    AnnealConfig, AnnealParams, Recommendation, SampleRecord, SampleSet, SuggestBackend,
};
pub use synth::{generate_ratings, synthetic_instance, SynthConfig, SyntheticInstance};
