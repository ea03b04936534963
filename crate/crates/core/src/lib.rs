//! Exact and Monte Carlo laboratory for the number `Z_{n,k}` of increasing
//! subsequences of length `k` in a uniformly random permutation of `1..=n`.
//!
//! * [`exact`]: big integers, rationals, first moment and its asymptotics.
//! * [`perm`]: permutations, counting, and samplers.
//! * [`moments`]: exact second moments and the overlap sums `A(N, j)`.
//! * [`walk`]: conditioned lattice walks behind the `A(N, j)` estimates.
//! * [`measures`]: the size-biased measure, total variation, and concentration probes.

pub mod error;
pub mod exact;
pub mod measures;
pub mod moments;
pub mod perm;
pub mod rng;
pub mod walk;

pub use error::{Error, Result};
pub use exact::{BigCount, ExactRatio};
pub use rng::RandomStream;
