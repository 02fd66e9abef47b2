//! Diagonal trace-class covariance, the observed subspace `F`, and the
//! minimal-norm right inverse of the covariance on `F`.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::basis::{Basis, VelocityState};
use crate::error::{Error, Result};

/// Sigmas at or below this are treated as exact zeros.
pub const NONDEGENERACY_TOL: f64 = 1e-14;

/// Noise amplitudes `σ_i` on the Stokes eigenbasis, so that `S e_i = σ_i e_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceSpec {
    sigmas: Vec<f64>,
    gamma: f64,
    sigma0: f64,
    trace: f64,
}

impl CovarianceSpec {
    /// `σ_i = sigma0 · λ_i^(-gamma)`.
    pub fn from_basis(basis: &Basis, sigma0: f64, gamma: f64) -> Result<Self> {
        if !(sigma0 > 0.0) || !sigma0.is_finite() {
            return Err(Error::InvalidParameter(format!("sigma0 must be positive, got {sigma0}")));
        }
        if !(gamma >= 0.0) || !gamma.is_finite() {
            return Err(Error::InvalidParameter(format!("gamma must be nonnegative, got {gamma}")));
        }
        let sigmas: Vec<f64> = basis
            .eigenvalues()
            .iter()
            .map(|l| sigma0 * l.powf(-gamma))
            .collect();
        let trace = sigmas.iter().map(|s| s * s).sum();
        Ok(CovarianceSpec {
            sigmas,
            gamma,
            sigma0,
            trace,
        })
    }

    /// Arbitrary nonnegative amplitudes (zeros allowed, e.g. to probe
    /// degenerate configurations).
    pub fn from_sigmas(sigmas: Vec<f64>) -> Result<Self> {
        if let Some(s) = sigmas.iter().find(|s| !(**s >= 0.0) || !s.is_finite()) {
            return Err(Error::InvalidParameter(format!("sigma must be finite and nonnegative, got {s}")));
        }
        let trace = sigmas.iter().map(|s| s * s).sum();
        Ok(CovarianceSpec {
            sigmas,
            gamma: f64::NAN,
            sigma0: f64::NAN,
            trace,
        })
    }

    pub fn sigmas(&self) -> &[f64] {
        &self.sigmas
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn sigma0(&self) -> f64 {
        self.sigma0
    }

    /// `σ² = Σ σ_i²`.
    pub fn trace(&self) -> f64 {
        self.trace
    }

    pub fn len(&self) -> usize {
        self.sigmas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sigmas.is_empty()
    }

    pub fn scaled(&self, c: f64) -> Result<Self> {
        let mut s = CovarianceSpec::from_sigmas(self.sigmas.iter().map(|x| c * x).collect())?;
        s.gamma = self.gamma;
        s.sigma0 = self.sigma0 * c;
        Ok(s)
    }
}

/// Span of a set of Stokes eigenvectors, given by basis indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubspaceF {
    indices: Vec<usize>,
}

impl SubspaceF {
    /// Validates the indices against the covariance and requires the
    /// projected covariance to be nonsingular.
    pub fn new(indices: Vec<usize>, cov: &CovarianceSpec) -> Result<Self> {
        validate_indices(&indices, cov.len())?;
        for &i in &indices {
            if cov.sigmas[i] <= NONDEGENERACY_TOL {
                return Err(Error::Degenerate {
                    index: i,
                    sigma: cov.sigmas[i],
                });
            }
        }
        Ok(SubspaceF { indices })
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn dim(&self) -> usize {
        self.indices.len()
    }

    /// `π_F u` in F-coordinates.
    pub fn project(&self, u: &[f64]) -> Vec<f64> {
        self.indices.iter().map(|&i| u[i]).collect()
    }

    pub fn contains(&self, index: usize) -> bool {
        self.indices.contains(&index)
    }
}

fn validate_indices(indices: &[usize], m: usize) -> Result<()> {
    if indices.is_empty() {
        return Err(Error::InvalidSubspace("F must have at least one index".into()));
    }
    if indices.len() > m {
        return Err(Error::InvalidSubspace(format!("dim F = {} exceeds M = {m}", indices.len())));
    }
    for (a, &i) in indices.iter().enumerate() {
        if i >= m {
            return Err(Error::InvalidSubspace(format!("index {i} out of range for M = {m}")));
        }
        if indices[..a].contains(&i) {
            return Err(Error::InvalidSubspace(format!("duplicate index {i}")));
        }
    }
    Ok(())
}

/// `π_N S ΔW` for a step of length `dt`.
pub fn sample_increment<R: Rng + ?Sized>(
    cov: &CovarianceSpec,
    dt: f64,
    rng: &mut R,
) -> Result<VelocityState> {
    if !(dt > 0.0) {
        return Err(Error::InvalidParameter(format!("dt must be positive, got {dt}")));
    }
    let sq = dt.sqrt();
    Ok(VelocityState::from_vec(
        cov.sigmas
            .iter()
            .map(|s| {
                let z: f64 = rng.sample(StandardNormal);
                s * sq * z
            })
            .collect(),
    ))
}

/// `S⁺ f` for `f` given in F-coordinates: the minimal-norm `x` with `S x = f`.
pub fn pseudo_inverse_apply(
    cov: &CovarianceSpec,
    subspace: &SubspaceF,
    f: &[f64],
) -> Result<VelocityState> {
    if f.len() != subspace.dim() {
        return Err(Error::DimensionMismatch {
            expected: subspace.dim(),
            got: f.len(),
        });
    }
    let mut out = VelocityState::zeros(cov.len());
    for (&i, &fj) in subspace.indices.iter().zip(f) {
        let s = cov.sigmas[i];
        if s <= NONDEGENERACY_TOL {
            return Err(Error::Degenerate { index: i, sigma: s });
        }
        out.coeffs_mut()[i] = fj / s;
    }
    Ok(out)
}

/// `π_F S S* π_F` as a dense row-major `d × d` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectedCovariance {
    pub dim: usize,
    pub matrix: Vec<f64>,
    pub min_eigenvalue: f64,
    pub max_eigenvalue: f64,
    pub positive_definite: bool,
}

impl ProjectedCovariance {
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.matrix[i * self.dim + j]
    }

    /// Diagonal square root `Q` with `Q Qᵀ = π_F S S* π_F`.
    pub fn sqrt_diagonal(&self) -> Vec<f64> {
        (0..self.dim).map(|i| self.entry(i, i).sqrt()).collect()
    }
}

pub fn projected_covariance(cov: &CovarianceSpec, indices: &[usize]) -> ProjectedCovariance {
    let d = indices.len();
    let mut matrix = vec![0.0; d * d];
    for (a, &i) in indices.iter().enumerate() {
        matrix[a * d + a] = cov.sigmas[i] * cov.sigmas[i];
    }
    // diagonal by construction: the eigenvalues are the diagonal entries
    let diag = (0..d).map(|a| matrix[a * d + a]);
    let min_eigenvalue = diag.clone().fold(f64::INFINITY, f64::min);
    let max_eigenvalue = diag.fold(0.0, f64::max);
    ProjectedCovariance {
        dim: d,
        matrix,
        min_eigenvalue,
        max_eigenvalue,
        positive_definite: min_eigenvalue > 0.0,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AssumptionReport {
    /// Projected covariance nonsingular.
    pub hpbesov: bool,
    /// `π_N S x = f` solvable for every `f ∈ F`.
    pub hpgirsanov2: bool,
    pub condition_number: f64,
}

/// Both non-degeneracy assumptions for `F` given by `indices` inside a
/// Galerkin space of `basis_size` elements.
pub fn check_assumptions(
    cov: &CovarianceSpec,
    indices: &[usize],
    basis_size: usize,
) -> Result<AssumptionReport> {
    validate_indices(indices, basis_size.min(cov.len()))?;
    let hpgirsanov2 = indices.iter().all(|&i| cov.sigmas[i] > NONDEGENERACY_TOL);
    let pc = projected_covariance(cov, indices);
    let hpbesov = pc.min_eigenvalue > NONDEGENERACY_TOL * NONDEGENERACY_TOL;
    let condition_number = if pc.min_eigenvalue > 0.0 {
        pc.max_eigenvalue / pc.min_eigenvalue
    } else {
        f64::INFINITY
    };
    Ok(AssumptionReport {
        hpbesov,
        hpgirsanov2,
        condition_number,
    })
}
