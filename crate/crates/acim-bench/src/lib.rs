//! Shared fixtures for the criterion benches: built-in maps and the noisy
//! transfer operator at bench-friendly sizes.

use acim_core::{
    builtin, noise_matrix, perturbed_operator, ulam_matrix, KernelProfile, NoiseKernel,
    PiecewiseMap, TransferMatrix,
};

pub fn sine_map() -> PiecewiseMap {
    builtin("sine", &[0.05]).expect("builtin map")
}

pub fn markov3_map() -> PiecewiseMap {
    builtin("markov3", &[]).expect("builtin map")
}

pub fn noisy_operator(map: &PiecewiseMap, delta: f64, n: usize) -> TransferMatrix {
    let p = ulam_matrix(map, n).expect("ulam matrix");
    let kernel = NoiseKernel::new(KernelProfile::Biweight, delta).expect("kernel");
    let q = noise_matrix(&kernel, n).expect("noise matrix");
    perturbed_operator(&p, &q).expect("operator composition")
}
