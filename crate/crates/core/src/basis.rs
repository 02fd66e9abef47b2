//! Divergence-free real Fourier basis on the torus `[0, 2π)³`.
//!
//! Every canonical wave vector `k` (the lexicographically larger of `±k`)
//! carries four orthonormal basis fields
//!
//! ```text
//! e(x) = c · p · cos(k·x)   or   c · p · sin(k·x),     c = sqrt(2 / (2π)³)
//! ```
//!
//! with `p` one of two unit polarization vectors orthogonal to `k`. The
//! Stokes operator is diagonal with eigenvalue `|k|²` and the Galerkin
//! nonlinearity `π_N Π_L (u·∇v)` is evaluated by exact mode convolution
//! over the truncated set.

use std::cmp::Ordering;
use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Integer wave vector, never zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct WaveVector([i32; 3]);

impl WaveVector {
    pub fn new(k: [i32; 3]) -> Result<Self> {
        if k == [0, 0, 0] {
            return Err(Error::ZeroWaveVector(k));
        }
        Ok(WaveVector(k))
    }

    pub fn components(&self) -> [i32; 3] {
        self.0
    }

    pub fn as_f64(&self) -> [f64; 3] {
        [self.0[0] as f64, self.0[1] as f64, self.0[2] as f64]
    }

    pub fn norm_sq(&self) -> i32 {
        self.0.iter().map(|c| c * c).sum()
    }

    pub fn sup_norm(&self) -> i32 {
        self.0.iter().map(|c| c.abs()).max().unwrap_or(0)
    }

    pub fn neg(&self) -> WaveVector {
        WaveVector([-self.0[0], -self.0[1], -self.0[2]])
    }

    /// True when `k` is the lexicographically larger element of `{k, -k}`.
    pub fn is_canonical(&self) -> bool {
        self.0 > self.neg().0
    }

    pub fn canonical(&self) -> WaveVector {
        if self.is_canonical() {
            *self
        } else {
            self.neg()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Parity {
    Cosine,
    Sine,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BasisElement {
    pub index: usize,
    pub wavevector: WaveVector,
    pub parity: Parity,
    /// 1 or 2.
    pub polarization: u8,
    pub polarization_vector: [f64; 3],
    pub eigenvalue: f64,
}

impl BasisElement {
    /// Pointwise value of the basis field.
    pub fn eval(&self, x: [f64; 3]) -> [f64; 3] {
        let k = self.wavevector.as_f64();
        let phase = k[0] * x[0] + k[1] * x[1] + k[2] * x[2];
        let s = normalization()
            * match self.parity {
                Parity::Cosine => phase.cos(),
                Parity::Sine => phase.sin(),
            };
        let p = self.polarization_vector;
        [s * p[0], s * p[1], s * p[2]]
    }
}

/// L² normalization of a single cosine or sine mode on `[0, 2π)³`.
pub fn normalization() -> f64 {
    (2.0 / (2.0 * PI).powi(3)).sqrt()
}

/// Real coefficient vector over a [`Basis`].
#[derive(Debug, Clone, PartialEq)]
pub struct VelocityState(Vec<f64>);

impl VelocityState {
    pub fn zeros(len: usize) -> Self {
        VelocityState(vec![0.0; len])
    }

    pub fn from_vec(coeffs: Vec<f64>) -> Self {
        VelocityState(coeffs)
    }

    pub fn unit(len: usize, index: usize) -> Self {
        let mut v = vec![0.0; len];
        v[index] = 1.0;
        VelocityState(v)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.0
    }

    pub fn coeffs_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn dot(&self, other: &VelocityState) -> f64 {
        self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum()
    }

    /// `‖u‖_H`; the basis is orthonormal so this is the Euclidean norm.
    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|c| c.is_finite())
    }

    pub fn scaled(&self, c: f64) -> VelocityState {
        VelocityState(self.0.iter().map(|x| c * x).collect())
    }

    pub fn add(&self, other: &VelocityState) -> VelocityState {
        VelocityState(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }
}

#[derive(Debug, Clone)]
struct Mode {
    k: WaveVector,
    polarizations: [[f64; 3]; 2],
    /// Basis indices of (cos p1, cos p2, sin p1, sin p2).
    elements: [usize; 4],
}

/// One term of the convolution sum for an output mode: the input slots of
/// `p` and `q = k - p`, and `q` itself.
#[derive(Debug, Clone, Copy)]
struct Triad {
    p: u32,
    q: u32,
    qv: [f64; 3],
}

/// Complex Fourier coefficients over every nonzero wave vector in the cube.
#[derive(Debug, Clone)]
pub struct Spectrum {
    re: Vec<[f64; 3]>,
    im: Vec<[f64; 3]>,
}

impl Spectrum {
    fn zeros(slots: usize) -> Self {
        Spectrum {
            re: vec![[0.0; 3]; slots],
            im: vec![[0.0; 3]; slots],
        }
    }

    pub fn coefficient(&self, slot: usize) -> [Complex64; 3] {
        let (r, i) = (self.re[slot], self.im[slot]);
        [
            Complex64::new(r[0], i[0]),
            Complex64::new(r[1], i[1]),
            Complex64::new(r[2], i[2]),
        ]
    }
}

/// Reusable buffers for [`Basis::bilinear_into`].
#[derive(Debug, Clone)]
pub struct ConvolutionScratch {
    u: Spectrum,
    v: Spectrum,
}

/// The Galerkin space `H_N` for a sup-norm cutoff `K`.
#[derive(Debug, Clone)]
pub struct Basis {
    cutoff: i32,
    elements: Vec<BasisElement>,
    modes: Vec<Mode>,
    /// Every nonzero wave vector in the cube: (mode index, conjugated).
    slots: Vec<(usize, bool)>,
    slot_vectors: Vec<WaveVector>,
    /// Lookup from `(k + K)` cube position to slot.
    slot_lookup: Vec<Option<u32>>,
    triads: Vec<Triad>,
    triad_start: Vec<usize>,
    eigenvalues: Vec<f64>,
}

fn polarization_pair(k: WaveVector) -> [[f64; 3]; 2] {
    let c = k.components();
    let nonzero: Vec<usize> = (0..3).filter(|&i| c[i] != 0).collect();
    if nonzero.len() == 1 {
        let mut axes = (0..3).filter(|&i| i != nonzero[0]);
        let e = |i: usize| {
            let mut v = [0.0; 3];
            v[i] = 1.0;
            v
        };
        let a = axes.next().unwrap();
        let b = axes.next().unwrap();
        return [e(a), e(b)];
    }
    let kf = k.as_f64();
    let kn = (kf[0] * kf[0] + kf[1] * kf[1] + kf[2] * kf[2]).sqrt();
    let khat = [kf[0] / kn, kf[1] / kn, kf[2] / kn];
    let orthogonalize = |r: [f64; 3]| {
        let d = r[0] * khat[0] + r[1] * khat[1] + r[2] * khat[2];
        let v = [r[0] - d * khat[0], r[1] - d * khat[1], r[2] - d * khat[2]];
        let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        (v, n)
    };
    let (mut v, mut n) = orthogonalize([0.0, 0.0, 1.0]);
    if n < 1e-8 {
        (v, n) = orthogonalize([1.0, 0.0, 0.0]);
    }
    let p1 = [v[0] / n, v[1] / n, v[2] / n];
    let p2 = [
        khat[1] * p1[2] - khat[2] * p1[1],
        khat[2] * p1[0] - khat[0] * p1[2],
        khat[0] * p1[1] - khat[1] * p1[0],
    ];
    [p1, p2]
}

/// Leray projection `(I - k kᵀ/|k|²) field` of a single Fourier coefficient.
pub fn leray_project(k: [i32; 3], field: [Complex64; 3]) -> Result<[Complex64; 3]> {
    let k = WaveVector::new(k)?;
    let kf = k.as_f64();
    let kk = k.norm_sq() as f64;
    let kdot = field[0] * kf[0] + field[1] * kf[1] + field[2] * kf[2];
    Ok([
        field[0] - kdot * (kf[0] / kk),
        field[1] - kdot * (kf[1] / kk),
        field[2] - kdot * (kf[2] / kk),
    ])
}

impl Basis {
    pub fn new(cutoff: i32) -> Result<Self> {
        if cutoff < 1 {
            return Err(Error::InvalidCutoff(cutoff));
        }
        let kk = cutoff;
        let mut canon = Vec::new();
        for a in -kk..=kk {
            for b in -kk..=kk {
                for c in -kk..=kk {
                    if let Ok(k) = WaveVector::new([a, b, c]) {
                        if k.is_canonical() {
                            canon.push(k);
                        }
                    }
                }
            }
        }
        canon.sort_by(|x, y| {
            x.norm_sq()
                .cmp(&y.norm_sq())
                .then_with(|| x.components().cmp(&y.components()))
        });

        // Elements sorted by (eigenvalue, k, parity, polarization); modes in
        // that order keep each mode's four elements contiguous.
        let mut elements = Vec::with_capacity(canon.len() * 4);
        let mut modes = Vec::with_capacity(canon.len());
        for k in canon {
            let pols = polarization_pair(k);
            let base = elements.len();
            for parity in [Parity::Cosine, Parity::Sine] {
                for (pi, p) in pols.iter().enumerate() {
                    elements.push(BasisElement {
                        index: elements.len(),
                        wavevector: k,
                        parity,
                        polarization: pi as u8 + 1,
                        polarization_vector: *p,
                        eigenvalue: k.norm_sq() as f64,
                    });
                }
            }
            modes.push(Mode {
                k,
                polarizations: pols,
                elements: [base, base + 1, base + 2, base + 3],
            });
        }

        let side = (2 * kk + 1) as usize;
        let cube_pos = |k: [i32; 3]| -> Option<usize> {
            if k.iter().any(|c| c.abs() > kk) {
                return None;
            }
            let i = |c: i32| (c + kk) as usize;
            Some((i(k[0]) * side + i(k[1])) * side + i(k[2]))
        };
        let mut slots = Vec::new();
        let mut slot_vectors = Vec::new();
        let mut slot_lookup = vec![None; side * side * side];
        for (m, mode) in modes.iter().enumerate() {
            for (conj, k) in [(false, mode.k), (true, mode.k.neg())] {
                slot_lookup[cube_pos(k.components()).unwrap()] = Some(slots.len() as u32);
                slots.push((m, conj));
                slot_vectors.push(k);
            }
        }

        let mut triads = Vec::new();
        let mut triad_start = Vec::with_capacity(modes.len() + 1);
        for mode in &modes {
            triad_start.push(triads.len());
            let k = mode.k.components();
            for (ps, p) in slot_vectors.iter().enumerate() {
                let p = p.components();
                let q = [k[0] - p[0], k[1] - p[1], k[2] - p[2]];
                if q == [0, 0, 0] {
                    continue;
                }
                if let Some(qs) = cube_pos(q).and_then(|i| slot_lookup[i]) {
                    triads.push(Triad {
                        p: ps as u32,
                        q: qs,
                        qv: [q[0] as f64, q[1] as f64, q[2] as f64],
                    });
                }
            }
        }
        triad_start.push(triads.len());

        let eigenvalues = elements.iter().map(|e| e.eigenvalue).collect();
        Ok(Basis {
            cutoff,
            elements,
            modes,
            slots,
            slot_vectors,
            slot_lookup,
            triads,
            triad_start,
            eigenvalues,
        })
    }

    pub fn cutoff(&self) -> i32 {
        self.cutoff
    }

    /// Number of basis elements `M`.
    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn elements(&self) -> &[BasisElement] {
        &self.elements
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn mode_count(&self) -> usize {
        self.modes.len()
    }

    pub fn triad_count(&self) -> usize {
        self.triads.len()
    }

    pub fn zeros(&self) -> VelocityState {
        VelocityState::zeros(self.len())
    }

    /// Indices of the elements with wave vector `k` (either sign).
    pub fn elements_of(&self, k: [i32; 3]) -> Option<[usize; 4]> {
        let k = WaveVector::new(k).ok()?.canonical();
        self.modes.iter().find(|m| m.k == k).map(|m| m.elements)
    }

    pub fn scratch(&self) -> ConvolutionScratch {
        ConvolutionScratch {
            u: Spectrum::zeros(self.slots.len()),
            v: Spectrum::zeros(self.slots.len()),
        }
    }

    fn check_len(&self, u: &VelocityState) -> Result<()> {
        if u.len() != self.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                got: u.len(),
            });
        }
        Ok(())
    }

    /// Complex Fourier coefficients `û(k)` with `u(x) = Σ_k û(k) e^{ik·x}`.
    pub fn spectrum(&self, u: &VelocityState) -> Spectrum {
        let mut s = Spectrum::zeros(self.slots.len());
        self.fill_spectrum(u.coeffs(), &mut s);
        s
    }

    /// Slot of `k` in a [`Spectrum`], if `k` lies in the truncated set.
    pub fn slot_of(&self, k: [i32; 3]) -> Option<usize> {
        let kk = self.cutoff;
        if k == [0, 0, 0] || k.iter().any(|c| c.abs() > kk) {
            return None;
        }
        let side = (2 * kk + 1) as usize;
        let i = |c: i32| (c + kk) as usize;
        self.slot_lookup[(i(k[0]) * side + i(k[1])) * side + i(k[2])].map(|s| s as usize)
    }

    pub fn slot_wavevectors(&self) -> &[WaveVector] {
        &self.slot_vectors
    }

    fn fill_spectrum(&self, coeffs: &[f64], s: &mut Spectrum) {
        let c = normalization();
        for (m, mode) in self.modes.iter().enumerate() {
            let [p1, p2] = mode.polarizations;
            let [ic1, ic2, is1, is2] = mode.elements;
            let (a1, a2, b1, b2) = (coeffs[ic1], coeffs[ic2], coeffs[is1], coeffs[is2]);
            let mut re = [0.0; 3];
            let mut im = [0.0; 3];
            for d in 0..3 {
                re[d] = 0.5 * c * (a1 * p1[d] + a2 * p2[d]);
                im[d] = -0.5 * c * (b1 * p1[d] + b2 * p2[d]);
            }
            // slots are laid out as (k, -k) pairs per mode
            s.re[2 * m] = re;
            s.im[2 * m] = im;
            s.re[2 * m + 1] = re;
            s.im[2 * m + 1] = [-im[0], -im[1], -im[2]];
        }
    }

    /// Inverse of [`Basis::spectrum`] for spectra of real divergence-free
    /// fields; anything along `k` is discarded by the polarization dot
    /// products (this is the Leray projection).
    pub fn from_spectrum(&self, s: &Spectrum) -> VelocityState {
        let mut out = self.zeros();
        for (m, mode) in self.modes.iter().enumerate() {
            self.write_mode(mode, s.re[2 * m], s.im[2 * m], out.coeffs_mut());
        }
        out
    }

    fn write_mode(&self, mode: &Mode, re: [f64; 3], im: [f64; 3], out: &mut [f64]) {
        let inv_c = 1.0 / normalization();
        let [p1, p2] = mode.polarizations;
        let dot = |a: [f64; 3], b: [f64; 3]| a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
        let [ic1, ic2, is1, is2] = mode.elements;
        out[ic1] = 2.0 * inv_c * dot(re, p1);
        out[ic2] = 2.0 * inv_c * dot(re, p2);
        out[is1] = -2.0 * inv_c * dot(im, p1);
        out[is2] = -2.0 * inv_c * dot(im, p2);
    }

    /// `A u`: multiply coefficient `i` by `λ_i`.
    pub fn stokes_apply(&self, u: &VelocityState) -> Result<VelocityState> {
        self.check_len(u)?;
        Ok(VelocityState::from_vec(
            u.coeffs()
                .iter()
                .zip(&self.eigenvalues)
                .map(|(c, l)| c * l)
                .collect(),
        ))
    }

    /// `π_N Π_L (u·∇v)`.
    pub fn bilinear(&self, u: &VelocityState, v: &VelocityState) -> Result<VelocityState> {
        self.check_len(u)?;
        self.check_len(v)?;
        let mut out = self.zeros();
        let mut scratch = self.scratch();
        self.bilinear_into(u.coeffs(), v.coeffs(), out.coeffs_mut(), &mut scratch);
        Ok(out)
    }

    /// Allocation-free `π_N Π_L (u·∇v)`; slices must have length [`Basis::len`].
    pub fn bilinear_into(
        &self,
        u: &[f64],
        v: &[f64],
        out: &mut [f64],
        scratch: &mut ConvolutionScratch,
    ) {
        self.fill_spectrum(u, &mut scratch.u);
        let same = std::ptr::eq(u, v);
        if !same {
            self.fill_spectrum(v, &mut scratch.v);
        }
        let us = &scratch.u;
        let vs = if same { &scratch.u } else { &scratch.v };
        for (m, mode) in self.modes.iter().enumerate() {
            let mut wr = [0.0; 3];
            let mut wi = [0.0; 3];
            for t in &self.triads[self.triad_start[m]..self.triad_start[m + 1]] {
                let (p, q) = (t.p as usize, t.q as usize);
                let (ur, ui) = (&us.re[p], &us.im[p]);
                // s = q·û(p); the derivative contributes i·s
                let sr = t.qv[0] * ur[0] + t.qv[1] * ur[1] + t.qv[2] * ur[2];
                let si = t.qv[0] * ui[0] + t.qv[1] * ui[1] + t.qv[2] * ui[2];
                let (vr, vi) = (&vs.re[q], &vs.im[q]);
                for d in 0..3 {
                    // (-si + i sr)(vr + i vi)
                    wr[d] += -si * vr[d] - sr * vi[d];
                    wi[d] += -si * vi[d] + sr * vr[d];
                }
            }
            self.write_mode(mode, wr, wi, out);
        }
    }

    /// `⟨u1, B(u2, u3)⟩_H`.
    pub fn trilinear(
        &self,
        u1: &VelocityState,
        u2: &VelocityState,
        u3: &VelocityState,
    ) -> Result<f64> {
        self.check_len(u1)?;
        Ok(u1.dot(&self.bilinear(u2, u3)?))
    }

    /// Sample the represented vector field at a point.
    pub fn eval(&self, u: &VelocityState, x: [f64; 3]) -> [f64; 3] {
        let mut out = [0.0; 3];
        for (e, c) in self.elements.iter().zip(u.coeffs()) {
            if *c == 0.0 {
                continue;
            }
            let v = e.eval(x);
            for d in 0..3 {
                out[d] += c * v[d];
            }
        }
        out
    }
}

impl PartialOrd for WaveVector {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for WaveVector {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.cmp(&other.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_xoshiro::Xoshiro256PlusPlus;

    fn random_state(basis: &Basis, rng: &mut impl Rng) -> VelocityState {
        VelocityState::from_vec((0..basis.len()).map(|_| rng.random_range(-1.0..1.0)).collect())
    }

    #[test]
    fn cutoff_one_has_52_elements() {
        let b = Basis::new(1).unwrap();
        assert_eq!(b.mode_count(), 13);
        assert_eq!(b.len(), 52);
        assert_eq!(Basis::new(2).unwrap().len(), 248);
        assert!(Basis::new(0).is_err());
    }

    #[test]
    fn ordering_and_polarizations() {
        let b = Basis::new(2).unwrap();
        let els = b.elements();
        for w in els.windows(2) {
            assert!(w[0].eigenvalue <= w[1].eigenvalue);
        }
        assert_eq!(els[0].wavevector.components(), [0, 0, 1]);
        let [c1, c2, ..] = b.elements_of([1, 0, 0]).unwrap();
        assert_eq!(els[c1].polarization_vector, [0.0, 1.0, 0.0]);
        assert_eq!(els[c2].polarization_vector, [0.0, 0.0, 1.0]);
        assert_eq!(els[c1].eigenvalue, 1.0);
        for e in els {
            let k = e.wavevector.as_f64();
            let p = e.polarization_vector;
            let kp = k[0] * p[0] + k[1] * p[1] + k[2] * p[2];
            let pp = p[0] * p[0] + p[1] * p[1] + p[2] * p[2];
            assert!(kp.abs() < 1e-14);
            assert!((pp - 1.0).abs() < 1e-14);
            assert_eq!(e.eigenvalue, e.wavevector.norm_sq() as f64);
        }
    }

    #[test]
    fn leray_examples() {
        let c = |x: f64| Complex64::new(x, 0.0);
        let z = leray_project([1, 0, 0], [c(1.0), c(0.0), c(0.0)]).unwrap();
        assert!(z.iter().all(|v| v.norm() < 1e-15));
        let y = leray_project([1, 0, 0], [c(0.0), c(1.0), c(0.0)]).unwrap();
        assert_eq!(y, [c(0.0), c(1.0), c(0.0)]);
        let d = leray_project([1, 1, 0], [c(1.0), c(0.0), c(0.0)]).unwrap();
        assert!((d[0] - c(0.5)).norm() < 1e-15);
        assert!((d[1] - c(-0.5)).norm() < 1e-15);
        assert!(leray_project([0, 0, 0], [c(1.0); 3]).is_err());
    }

    #[test]
    fn leray_is_idempotent() {
        let f = [
            Complex64::new(0.3, -1.0),
            Complex64::new(2.0, 0.1),
            Complex64::new(-0.7, 0.4),
        ];
        let once = leray_project([2, -1, 1], f).unwrap();
        let twice = leray_project([2, -1, 1], once).unwrap();
        for d in 0..3 {
            assert!((once[d] - twice[d]).norm() < 1e-14);
        }
    }

    #[test]
    fn stokes_examples() {
        let b = Basis::new(2).unwrap();
        let i = b.elements_of([1, 0, 0]).unwrap()[0];
        let out = b.stokes_apply(&VelocityState::unit(b.len(), i)).unwrap();
        assert_eq!(out, VelocityState::unit(b.len(), i));
        let j = b.elements_of([2, 1, 0]).unwrap()[2];
        let out = b.stokes_apply(&VelocityState::unit(b.len(), j)).unwrap();
        assert_eq!(out.coeffs()[j], 5.0);
        assert_eq!(b.stokes_apply(&b.zeros()).unwrap(), b.zeros());
    }

    #[test]
    fn spectrum_round_trip() {
        let b = Basis::new(2).unwrap();
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(3);
        let u = random_state(&b, &mut rng);
        let back = b.from_spectrum(&b.spectrum(&u));
        for (x, y) in u.coeffs().iter().zip(back.coeffs()) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn bilinear_zero_and_single_mode() {
        let b = Basis::new(2).unwrap();
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(5);
        let u = random_state(&b, &mut rng);
        assert!(b.bilinear(&b.zeros(), &u).unwrap().norm() == 0.0);
        assert!(b.bilinear(&u, &b.zeros()).unwrap().norm() == 0.0);
        let mut shear = b.zeros();
        for i in b.elements_of([1, 0, 0]).unwrap() {
            shear.coeffs_mut()[i] = rng.random_range(-1.0..1.0);
        }
        assert!(b.bilinear(&shear, &shear).unwrap().norm() < 1e-14);
    }

    #[test]
    fn antisymmetry_small_cutoff() {
        let b = Basis::new(1).unwrap();
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(11);
        for _ in 0..50 {
            let u1 = random_state(&b, &mut rng);
            let u2 = random_state(&b, &mut rng);
            let u3 = random_state(&b, &mut rng);
            let a = b.trilinear(&u1, &u2, &u3).unwrap();
            let c = b.trilinear(&u3, &u2, &u1).unwrap();
            let scale = u1.norm() * u2.norm() * u3.norm();
            assert!((a + c).abs() <= 1e-10 * scale, "{a} {c}");
            assert!(b.trilinear(&u1, &u1, &u1).unwrap().abs() <= 1e-10 * u1.norm().powi(3));
        }
        assert_eq!(
            b.trilinear(&b.zeros(), &random_state(&b, &mut rng), &b.zeros())
                .unwrap(),
            0.0
        );
    }

    #[test]
    fn mismatched_lengths_rejected() {
        let b = Basis::new(1).unwrap();
        let short = VelocityState::zeros(3);
        assert!(b.stokes_apply(&short).is_err());
        assert!(b.bilinear(&short, &b.zeros()).is_err());
    }
}
