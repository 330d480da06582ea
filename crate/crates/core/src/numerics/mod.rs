//! Combinatoric and special-function primitives, the symmetric eigensolver,
//! and the probability-distribution value types shared by every model.

mod dist;
mod eigen;
mod kernel;
mod special;

pub use dist::{DiffDist, JointPhotonDist, PhotonDist, TruncationPolicy, STORE_FLOOR};
pub use eigen::min_eigenvalue_symmetric;
pub use kernel::{binomial_exact, interference_kernel, interference_kernel_ln_abs};
pub use special::{
    binomial_pmf_row, hermite, hermite_log_abs, laguerre, ln_binomial, log_factorial,
    poisson_ln_pmf, poisson_upper_tail,
};

pub(crate) use dist::Grid;
