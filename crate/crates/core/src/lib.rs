//! Seeded random orthogonal transforms, random paraunitary filter banks and
//! adaptively under-decimated sampling operators, all realized as streams of
//! Givens plane rotations whose angles are regenerated on the fly.

pub mod decimation;
pub mod error;
pub mod givens;
pub mod paraunitary;
pub mod prng;
pub mod recovery;
pub mod signal_file;
pub mod stats;

pub use decimation::{
    adjoint_decimated, downsampled_coefficients, forward_decimated, DecimatedAnalyzer, DecimatedOperator,
    DecimatedRun, DecimationSchedule, SamplingMatrix, WorkCount,
};
pub use error::{Error, Result};
pub use givens::{
    apply_unitary, apply_unitary_inverse, materialize, project, project_transpose, rotation_count,
    GivensTransform, ProjectionSpec, UnitarySpec,
};
pub use paraunitary::{
    coefficients, paraconjugate, DelayMask, Lattice, LatticeState, ParaunitarySpec, PolyphaseCoeffs,
};
pub use prng::{derive_child_seed, Order, SeedHierarchy, SeedStream};
pub use signal_file::{SignalFile, SignalFileError};
