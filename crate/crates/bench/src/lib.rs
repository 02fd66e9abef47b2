//! Shared fixtures for the criterion benches.

use nsreg_core::{Basis, CovarianceSpec, Model, SubspaceF, VelocityState};

/// Default desk-scale model: cutoff 2, unit viscosity, gamma = 1, F the
/// first two basis elements.
pub fn desk_model(cutoff: i32) -> Model {
    let basis = Basis::new(cutoff).expect("valid cutoff");
    let cov = CovarianceSpec::from_basis(&basis, 1.0, 1.0).expect("valid covariance");
    let f = SubspaceF::new(vec![0, 1], &cov).expect("nondegenerate F");
    Model::new(basis, cov, f, 1.0, true).expect("consistent model")
}

/// A deterministic state with every coefficient nonzero.
pub fn busy_state(len: usize) -> VelocityState {
    VelocityState::from_vec(
        (0..len)
            .map(|i| ((i * 37 % 101) as f64 / 101.0 - 0.5) * 0.4)
            .collect(),
    )
}

/// Deterministic two-dimensional point cloud, roughly standard normal.
pub fn point_cloud(n: usize) -> nsreg_core::Samples {
    let data = (0..2 * n)
        .map(|i| {
            let u = (i as f64 * 0.618_033_988_749_895).fract();
            let v = (i as f64 * 0.754_877_666_246_693).fract();
            (-2.0 * (1.0 - u).ln()).sqrt() * (std::f64::consts::TAU * v).cos()
        })
        .collect();
    nsreg_core::Samples::new(2, data).expect("even length")
}
