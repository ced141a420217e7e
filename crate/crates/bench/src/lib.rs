//! Shared setup for the criterion benchmarks.

use ndarray::Array2;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use spod_core::solver::{Method, SolverConfig, SolverState, SpodProblem};
use spod_core::synth::{gen_multilinear, BenchmarkSpec};

/// Dense matrix with i.i.d. uniform entries in [-1, 1).
pub fn random_matrix(m: usize, n: usize, seed: u64) -> Array2<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Array2::from_shape_fn((m, n), |_| rng.gen_range(-1.0..1.0))
}

/// The standard two-frame transport benchmark plus a matching solver setup.
pub fn multilinear_setup(method: Method) -> (SpodProblem, SolverConfig, SolverState) {
    let spec = BenchmarkSpec::multilinear();
    let (snapshot, transports, _) = gen_multilinear(&spec).expect("benchmark generation");
    let mut config = SolverConfig::new(method, transports.len());
    config.mu = SolverConfig::mu_default(snapshot.values());
    if method != Method::Alm {
        config.lambdas = vec![0.3; transports.len()];
    }
    let problem = SpodProblem::new(snapshot, transports, false).expect("problem setup");
    let state = SolverState::zeros(&problem);
    (problem, config, state)
}
