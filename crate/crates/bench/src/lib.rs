//! Shared fixtures for the criterion benchmarks.

use purepoint_core::{fibonacci_model_set, PointSet};

/// Fibonacci model set whose window covers [-n, n] with a safety margin.
pub fn fibonacci_sample(n: f64) -> PointSet {
    fibonacci_model_set((-n - 2.0, n + 2.0)).expect("fixed window is valid")
}
