//! ADMM solver for the pairwise concave fusion objective.

mod admm;
pub mod design;
pub mod difference;
mod groups;
mod init;
mod system;

pub use admm::{fit, Admm, AdmmState, SasaFit};
pub use design::{projection_matrix, Design, ProjectionOperator};
pub use difference::{build_difference_structure, pair_count, pair_index, DifferenceStructure};
pub use groups::{extract_groups, group_means, refit};
pub use init::{initialize, InitMethod};
