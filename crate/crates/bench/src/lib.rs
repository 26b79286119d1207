//! Shared fixtures for the benchmark targets.

use gigmatch_core::instance::{random_instance, Instance, RandomDims};

/// A mid-size random instance: dense enough to give the LP a few hundred
/// columns.
pub fn medium_instance() -> Instance {
    random_instance(
        2024,
        &RandomDims {
            offline: 6,
            online: 6,
            prices: 2,
            horizon: 10,
            density: 0.6,
        },
    )
    .expect("valid dims")
}

/// Small enough for the safe-set distribution recursion, large enough that
/// the recursion dominates the run time.
pub fn eval_instance() -> Instance {
    random_instance(
        7,
        &RandomDims {
            offline: 10,
            online: 4,
            prices: 2,
            horizon: 8,
            density: 0.5,
        },
    )
    .expect("valid dims")
}
