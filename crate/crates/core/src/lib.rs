//! Thermal relaxation of few-level open quantum systems under Lindblad
//! dynamics: equidistant quenches, relaxation asymmetry and phase diagrams.

pub mod analytic2;
pub mod distances;
pub mod lindblad;
pub mod numkernel;
pub mod oracle;
pub mod phasemap;
pub mod quench;
pub mod system;
pub mod validate;

pub use distances::Measure;
pub use lindblad::{build_superoperator, decompose, propagate, SpectralDecomposition, Superoperator};
pub use numkernel::ComplexMatrix;
pub use system::{CoherentInitialSpec, DensityMatrix, LevelSystem};
