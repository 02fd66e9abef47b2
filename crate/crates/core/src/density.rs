//! Histogram densities on uniform boxes in one or two dimensions, and the
//! distances and smoothness functionals built on them.
//!
//! Grid functions are zero outside their box. Finite differences
//! `Δ_h^n f(x) = Σ_j (-1)^{n-j} C(n,j) f(x + jh)` take shifts in whole
//! cells; [`difference_l1`] integrates them over all of `R^d`, which
//! for a zero-extended `f` is a finite index range.

use std::fmt::Write as _;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::integrator::Trajectory;
use crate::noise::SubspaceF;
use crate::stats::{linear_fit, mean_stderr};

/// Minimum sample count accepted by [`estimate_density`].
pub const MIN_SAMPLES: usize = 1000;
/// Out-of-box fraction at which a box is rejected.
pub const MAX_OUTSIDE: f64 = 0.01;

/// `n` points in `R^d`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Samples {
    dim: usize,
    data: Vec<f64>,
}

impl Samples {
    pub fn new(dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 || !data.len().is_multiple_of(dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: data.len(),
            });
        }
        Ok(Samples { dim, data })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.dim)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn mean(&self, axis: usize) -> f64 {
        let v: Vec<f64> = self.rows().map(|r| r[axis]).collect();
        mean_stderr(&v).mean
    }

    pub fn std_dev(&self, axis: usize) -> f64 {
        let v: Vec<f64> = self.rows().map(|r| r[axis]).collect();
        crate::stats::variance(&v).sqrt()
    }
}

/// F-coordinates of each trajectory at grid time `t`.
pub fn project_ensemble(trajectories: &[Trajectory], f: &SubspaceF, t: f64) -> Result<Samples> {
    let mut data = Vec::with_capacity(trajectories.len() * f.dim());
    for tr in trajectories {
        data.extend(f.project(tr.state_at(t)?.coeffs()));
    }
    Samples::new(f.dim(), data)
}

/// Cube `center + [-L, L]^d` cut into `bins^d` square cells.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub dim: usize,
    pub bins: usize,
    pub center: Vec<f64>,
    pub half_width: f64,
}

impl Grid {
    pub fn new(center: Vec<f64>, half_width: f64, bins: usize) -> Result<Self> {
        let dim = center.len();
        if !(1..=2).contains(&dim) {
            return Err(Error::InvalidParameter(format!("grids are 1D or 2D, got d={dim}")));
        }
        if !(half_width > 0.0) || bins == 0 {
            return Err(Error::InvalidParameter(format!(
                "need L > 0 and B > 0, got L={half_width}, B={bins}"
            )));
        }
        Ok(Grid {
            dim,
            bins,
            center,
            half_width,
        })
    }

    /// Box around the pooled mean of all sample sets, `sds` pooled
    /// marginal standard deviations wide in every direction.
    pub fn covering(sets: &[&Samples], sds: f64, bins: usize) -> Result<Self> {
        let first = sets.first().ok_or(Error::TooFewSamples { needed: 1, got: 0 })?;
        let d = first.dim();
        let mut center = vec![0.0; d];
        let mut spread = 0.0f64;
        for axis in 0..d {
            let pooled: Vec<f64> = sets.iter().flat_map(|s| s.rows().map(move |r| r[axis])).collect();
            let m = mean_stderr(&pooled);
            center[axis] = m.mean;
            for s in sets {
                spread = spread.max(s.std_dev(axis));
            }
        }
        Grid::new(center, sds * spread, bins)
    }

    pub fn cell_width(&self) -> f64 {
        2.0 * self.half_width / self.bins as f64
    }

    pub fn cell_volume(&self) -> f64 {
        self.cell_width().powi(self.dim as i32)
    }

    pub fn cell_count(&self) -> usize {
        self.bins.pow(self.dim as u32)
    }

    fn lower(&self, axis: usize) -> f64 {
        self.center[axis] - self.half_width
    }

    /// Per-axis cell index of `x`, if inside the box.
    pub fn locate(&self, x: &[f64]) -> Option<usize> {
        let w = self.cell_width();
        let mut flat = 0;
        for (axis, &xa) in x.iter().enumerate() {
            let pos = (xa - self.lower(axis)) / w;
            if !(pos >= 0.0 && pos < self.bins as f64) {
                return None;
            }
            flat = flat * self.bins + pos as usize;
        }
        Some(flat)
    }

    /// Center of cell `flat`.
    pub fn cell_center(&self, flat: usize) -> Vec<f64> {
        let w = self.cell_width();
        let idx = self.unflatten(flat);
        idx.iter()
            .enumerate()
            .map(|(axis, &i)| self.lower(axis) + (i as f64 + 0.5) * w)
            .collect()
    }

    fn unflatten(&self, flat: usize) -> Vec<usize> {
        match self.dim {
            1 => vec![flat],
            _ => vec![flat / self.bins, flat % self.bins],
        }
    }

    fn same_as(&self, other: &Grid) -> bool {
        self.dim == other.dim
            && self.bins == other.bins
            && self.half_width == other.half_width
            && self.center == other.center
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    pub grid: Grid,
    pub values: Vec<f64>,
}

impl GridFunction {
    pub fn zeros(grid: Grid) -> Self {
        let n = grid.cell_count();
        GridFunction {
            grid,
            values: vec![0.0; n],
        }
    }

    pub fn from_fn<F: Fn(&[f64]) -> f64>(grid: Grid, f: F) -> Self {
        let values = (0..grid.cell_count()).map(|c| f(&grid.cell_center(c))).collect();
        GridFunction { grid, values }
    }

    /// Value at signed per-axis indices, zero outside the box.
    fn at(&self, idx: &[i64]) -> f64 {
        let b = self.grid.bins as i64;
        let mut flat = 0i64;
        for &i in idx {
            if i < 0 || i >= b {
                return 0.0;
            }
            flat = flat * b + i;
        }
        self.values[flat as usize]
    }

    pub fn integral(&self) -> f64 {
        crate::stats::compensated_sum(self.values.iter().copied()) * self.grid.cell_volume()
    }

    pub fn l1_norm(&self) -> f64 {
        crate::stats::compensated_sum(self.values.iter().map(|v| v.abs())) * self.grid.cell_volume()
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn scaled(&self, c: f64) -> Self {
        GridFunction {
            grid: self.grid.clone(),
            values: self.values.iter().map(|v| c * v).collect(),
        }
    }

    pub fn sub(&self, other: &GridFunction) -> Result<Self> {
        if !self.grid.same_as(&other.grid) {
            return Err(Error::GridMismatch);
        }
        Ok(GridFunction {
            grid: self.grid.clone(),
            values: self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect(),
        })
    }

    /// `∫ f g`.
    pub fn pairing(&self, other: &GridFunction) -> Result<f64> {
        if !self.grid.same_as(&other.grid) {
            return Err(Error::GridMismatch);
        }
        Ok(crate::stats::compensated_sum(self.values.iter().zip(&other.values).map(|(a, b)| a * b))
            * self.grid.cell_volume())
    }

    /// CSV with columns `x[,y],value`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(if self.grid.dim == 1 { "x,value\n" } else { "x,y,value\n" });
        for (c, v) in self.values.iter().enumerate() {
            for x in self.grid.cell_center(c) {
                let _ = write!(out, "{x},");
            }
            let _ = writeln!(out, "{v}");
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DensityEstimate {
    pub density: GridFunction,
    pub sample_count: usize,
    /// Fraction of samples that fell outside the box.
    pub outside_fraction: f64,
}

/// Normalized histogram of `samples` on `grid`.
pub fn estimate_density(samples: &Samples, grid: &Grid) -> Result<DensityEstimate> {
    if samples.dim() != grid.dim {
        return Err(Error::DimensionMismatch {
            expected: grid.dim,
            got: samples.dim(),
        });
    }
    let n = samples.len();
    if n < MIN_SAMPLES {
        return Err(Error::TooFewSamples {
            needed: MIN_SAMPLES,
            got: n,
        });
    }
    let cells = grid.cell_count();
    let d = samples.dim();
    // integer partial histograms merge exactly, so the result is
    // independent of how rayon splits the work
    let counts = samples
        .data()
        .par_chunks(d * 4096)
        .map(|chunk| {
            let mut h = vec![0u64; cells + 1];
            for x in chunk.chunks_exact(d) {
                match grid.locate(x) {
                    Some(c) => h[c] += 1,
                    None => h[cells] += 1,
                }
            }
            h
        })
        .reduce(
            || vec![0u64; cells + 1],
            |mut a, b| {
                a.iter_mut().zip(&b).for_each(|(x, y)| *x += y);
                a
            },
        );
    let outside = counts[cells] as usize;
    if outside as f64 >= MAX_OUTSIDE * n as f64 {
        return Err(Error::BoxTooSmall { outside, total: n });
    }
    let inside = (n - outside) as f64;
    let scale = 1.0 / (inside * grid.cell_volume());
    let values = counts[..cells].iter().map(|&c| c as f64 * scale).collect();
    Ok(DensityEstimate {
        density: GridFunction {
            grid: grid.clone(),
            values,
        },
        sample_count: n,
        outside_fraction: outside as f64 / n as f64,
    })
}

pub fn l1_distance(f: &GridFunction, g: &GridFunction) -> Result<f64> {
    Ok(f.sub(g)?.l1_norm())
}

/// Grid-aligned shift, in whole cells per axis.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Shift(pub Vec<i64>);

impl Shift {
    /// Converts a physical shift, rejecting non-integer cell counts.
    pub fn from_physical(grid: &Grid, h: &[f64]) -> Result<Self> {
        if h.len() != grid.dim {
            return Err(Error::DimensionMismatch {
                expected: grid.dim,
                got: h.len(),
            });
        }
        let w = grid.cell_width();
        let cells: Option<Vec<i64>> = h
            .iter()
            .map(|&x| {
                let c = (x / w).round();
                ((x / w - c).abs() <= 1e-9 * c.abs().max(1.0)).then_some(c as i64)
            })
            .collect();
        cells.map(Shift).ok_or_else(|| Error::UnalignedShift(h.to_vec()))
    }

    pub fn length(&self, grid: &Grid) -> f64 {
        grid.cell_width() * self.0.iter().map(|&c| (c * c) as f64).sum::<f64>().sqrt()
    }

    pub fn neg(&self) -> Self {
        Shift(self.0.iter().map(|c| -c).collect())
    }
}

fn binomial_weights(n: u32) -> Vec<f64> {
    // (-1)^{n-j} C(n, j), j = 0..=n
    let mut c = 1.0f64;
    let mut w = Vec::with_capacity(n as usize + 1);
    for j in 0..=n {
        let sign = if (n - j).is_multiple_of(2) { 1.0 } else { -1.0 };
        w.push(sign * c);
        c = c * (n - j) as f64 / (j + 1) as f64;
    }
    w
}

fn difference_at(f: &GridFunction, idx: &[i64], shift: &Shift, weights: &[f64]) -> f64 {
    let mut acc = 0.0;
    let mut probe = idx.to_vec();
    for (j, &w) in weights.iter().enumerate() {
        for (a, p) in probe.iter_mut().enumerate() {
            *p = idx[a] + j as i64 * shift.0[a];
        }
        acc += w * f.at(&probe);
    }
    acc
}

/// `Δ_h^n f` on the grid of `f`.
pub fn finite_difference(f: &GridFunction, shift: &Shift, n: u32) -> Result<GridFunction> {
    if shift.0.len() != f.grid.dim {
        return Err(Error::DimensionMismatch {
            expected: f.grid.dim,
            got: shift.0.len(),
        });
    }
    if n == 0 {
        return Err(Error::InvalidParameter("difference order must be positive".into()));
    }
    let weights = binomial_weights(n);
    let values = (0..f.grid.cell_count())
        .map(|c| {
            let idx: Vec<i64> = f.grid.unflatten(c).into_iter().map(|i| i as i64).collect();
            difference_at(f, &idx, shift, &weights)
        })
        .collect();
    Ok(GridFunction {
        grid: f.grid.clone(),
        values,
    })
}

/// `‖Δ_h^n f‖_{L¹(R^d)}` for the zero extension of `f`.
pub fn difference_l1(f: &GridFunction, shift: &Shift, n: u32) -> f64 {
    let weights = binomial_weights(n);
    let b = f.grid.bins as i64;
    let ranges: Vec<(i64, i64)> = shift
        .0
        .iter()
        .map(|&s| {
            let reach = n as i64 * s;
            (0.min(-reach), b + 0.max(-reach))
        })
        .collect();
    let mut total = Vec::new();
    match f.grid.dim {
        1 => {
            for i in ranges[0].0..ranges[0].1 {
                total.push(difference_at(f, &[i], shift, &weights).abs());
            }
        }
        _ => {
            for i in ranges[0].0..ranges[0].1 {
                for j in ranges[1].0..ranges[1].1 {
                    total.push(difference_at(f, &[i, j], shift, &weights).abs());
                }
            }
        }
    }
    crate::stats::compensated_sum(total) * f.grid.cell_volume()
}

/// Default probing shifts: per axis (and both diagonals in 2D), at least
/// 12 log-spaced cell counts from one cell up to `|h| ≤ 1`, or every
/// admissible count when fewer exist.
pub fn default_shifts(grid: &Grid) -> Vec<Shift> {
    let w = grid.cell_width();
    let counts = |unit_len: f64| -> Vec<i64> {
        let max = ((1.0 + 1e-12) / (w * unit_len)).floor().max(1.0) as i64;
        log_spaced_integers(max, 12)
    };
    let mut out = Vec::new();
    match grid.dim {
        1 => out.extend(counts(1.0).into_iter().map(|c| Shift(vec![c]))),
        _ => {
            for c in counts(1.0) {
                out.push(Shift(vec![c, 0]));
                out.push(Shift(vec![0, c]));
            }
            for c in counts(std::f64::consts::SQRT_2) {
                out.push(Shift(vec![c, c]));
                out.push(Shift(vec![c, -c]));
            }
        }
    }
    out
}

/// At least `k` distinct integers in `[1, max]`, log-spaced, always
/// including both ends.
pub fn log_spaced_integers(max: i64, k: usize) -> Vec<i64> {
    if max as usize <= k {
        return (1..=max).collect();
    }
    let mut m = k;
    loop {
        let mut v: Vec<i64> = (0..m)
            .map(|i| ((max as f64).powf(i as f64 / (m - 1) as f64)).round() as i64)
            .collect();
        v.dedup();
        if v.len() >= k {
            return v;
        }
        m += 1;
    }
}

/// `max_h ‖Δ_h^n f‖_{L¹} / |h|^α` over `shifts`.
pub fn besov_seminorm(f: &GridFunction, alpha: f64, n: u32, shifts: &[Shift]) -> Result<f64> {
    if !(alpha > 0.0 && alpha < n as f64) {
        return Err(Error::InvalidParameter(format!("need 0 < alpha < n, got alpha={alpha}, n={n}")));
    }
    let norms: Vec<f64> = shifts
        .par_iter()
        .map(|h| difference_l1(f, h, n) / h.length(&f.grid).powf(alpha))
        .collect();
    Ok(norms.into_iter().fold(0.0, f64::max))
}

/// `‖f - g‖_{L¹} + [f - g]_{B^α_{1,∞}}`.
pub fn besov_distance(f: &GridFunction, g: &GridFunction, alpha: f64, n: u32, shifts: &[Shift]) -> Result<f64> {
    let diff = f.sub(g)?;
    Ok(diff.l1_norm() + besov_seminorm(&diff, alpha, n, shifts)?)
}

fn bump(r: f64) -> f64 {
    if r < 1.0 {
        (-1.0 / (1.0 - r * r)).exp()
    } else {
        0.0
    }
}

/// Cell-averaged bump of radius `eps` as `(offset, weight)` pairs summing
/// to one.
fn bump_stencil(grid: &Grid, eps: f64) -> Vec<(Vec<i64>, f64)> {
    const SUB: usize = 5;
    let w = grid.cell_width();
    let reach = (eps / w).ceil() as i64;
    let sub: Vec<f64> = (0..SUB).map(|s| (s as f64 + 0.5) / SUB as f64 - 0.5).collect();
    let mut stencil = Vec::new();
    let offsets: Vec<Vec<i64>> = match grid.dim {
        1 => (-reach..=reach).map(|i| vec![i]).collect(),
        _ => (-reach..=reach)
            .flat_map(|i| (-reach..=reach).map(move |j| vec![i, j]))
            .collect(),
    };
    for off in offsets {
        let mut acc = 0.0;
        let mut count = 0usize;
        let mut visit = |p: &[f64]| {
            let r = p.iter().map(|x| x * x).sum::<f64>().sqrt() / eps;
            acc += bump(r);
            count += 1;
        };
        match grid.dim {
            1 => {
                for &a in &sub {
                    visit(&[(off[0] as f64 + a) * w]);
                }
            }
            _ => {
                for &a in &sub {
                    for &b in &sub {
                        visit(&[(off[0] as f64 + a) * w, (off[1] as f64 + b) * w]);
                    }
                }
            }
        }
        let v = acc / count as f64;
        if v > 0.0 {
            stencil.push((off, v));
        }
    }
    let total: f64 = stencil.iter().map(|(_, v)| v).sum();
    stencil.iter_mut().for_each(|(_, v)| *v /= total);
    stencil
}

/// Convolution with a bump of radius `eps`, renormalized to the input's
/// mass.
pub fn mollify(f: &GridFunction, eps: f64) -> Result<GridFunction> {
    let w = f.grid.cell_width();
    if eps < w * (1.0 - 1e-12) {
        return Err(Error::InvalidParameter(format!("mollifier radius {eps} is below one cell ({w})")));
    }
    let stencil = bump_stencil(&f.grid, eps);
    let grid = f.grid.clone();
    let values: Vec<f64> = (0..grid.cell_count())
        .into_par_iter()
        .map(|c| {
            let idx: Vec<i64> = grid.unflatten(c).into_iter().map(|i| i as i64).collect();
            let mut probe = idx.clone();
            let mut acc = 0.0;
            for (off, k) in &stencil {
                for a in 0..idx.len() {
                    probe[a] = idx[a] - off[a];
                }
                acc += k * f.at(&probe);
            }
            acc
        })
        .collect();
    let mut out = GridFunction { grid, values };
    let before = f.integral();
    let after = out.integral();
    if after != 0.0 {
        let c = before / after;
        out.values.iter_mut().for_each(|v| *v *= c);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IbpCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub gap: f64,
    /// `‖f‖₁‖φ‖_∞`, the scale the gap is measured against.
    pub scale: f64,
}

/// `∫ Δ_h^n φ · f` against `∫ Δ_{-h}^n f · φ`.
pub fn discrete_ibp_check(f: &GridFunction, phi: &GridFunction, shift: &Shift, n: u32) -> Result<IbpCheck> {
    let lhs = finite_difference(phi, shift, n)?.pairing(f)?;
    let rhs = finite_difference(f, &shift.neg(), n)?.pairing(phi)?;
    Ok(IbpCheck {
        lhs,
        rhs,
        gap: (lhs - rhs).abs(),
        scale: f.l1_norm() * phi.sup_norm(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct HoelderFit {
    pub gaps: Vec<f64>,
    pub distances: Vec<f64>,
    pub used: Vec<bool>,
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub slope_stderr: f64,
}

/// Log-log least squares over pairs whose distance exceeds `noise_floor`.
pub fn hoelder_fit(pairs: &[(f64, f64)], noise_floor: f64) -> Result<HoelderFit> {
    let used: Vec<bool> = pairs
        .iter()
        .map(|&(g, d)| g > 0.0 && d > 0.0 && d > noise_floor && d.is_finite())
        .collect();
    let (x, y): (Vec<f64>, Vec<f64>) = pairs
        .iter()
        .zip(&used)
        .filter(|(_, &u)| u)
        .map(|(&(g, d), _)| (g.ln(), d.ln()))
        .unzip();
    if x.len() < 4 {
        return Err(Error::FitRefused(x.len()));
    }
    let fit = linear_fit(&x, &y);
    Ok(HoelderFit {
        gaps: pairs.iter().map(|p| p.0).collect(),
        distances: pairs.iter().map(|p| p.1).collect(),
        used,
        slope: fit.slope,
        intercept: fit.intercept,
        r_squared: fit.r_squared,
        slope_stderr: fit.slope_stderr,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid1(l: f64, b: usize) -> Grid {
        Grid::new(vec![0.0], l, b).unwrap()
    }

    fn point_samples(n: usize, x: &[f64]) -> Samples {
        Samples::new(x.len(), x.iter().copied().cycle().take(n * x.len()).collect()).unwrap()
    }

    #[test]
    fn point_mass_single_cell() {
        let g = Grid::new(vec![0.0, 0.0], 1.0, 10).unwrap();
        let d = estimate_density(&point_samples(2000, &[0.05, 0.05]), &g).unwrap();
        assert_eq!(d.density.values.iter().filter(|&&v| v > 0.0).count(), 1);
        assert!((d.density.integral() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_small_box_and_few_samples() {
        let g = grid1(1.0, 10);
        assert!(matches!(
            estimate_density(&point_samples(2000, &[5.0]), &g),
            Err(Error::BoxTooSmall { .. })
        ));
        assert!(matches!(
            estimate_density(&point_samples(10, &[0.0]), &g),
            Err(Error::TooFewSamples { .. })
        ));
    }

    #[test]
    fn l1_bounds() {
        let g = grid1(2.0, 4);
        let a = estimate_density(&point_samples(1000, &[-1.5]), &g).unwrap().density;
        let b = estimate_density(&point_samples(1000, &[1.5]), &g).unwrap().density;
        assert!((l1_distance(&a, &b).unwrap() - 2.0).abs() < 1e-14);
        assert_eq!(l1_distance(&a, &a).unwrap(), 0.0);
        assert!(matches!(l1_distance(&a, &GridFunction::zeros(grid1(2.0, 5))), Err(Error::GridMismatch)));
    }

    #[test]
    fn binomial_signs() {
        assert_eq!(binomial_weights(1), vec![-1.0, 1.0]);
        assert_eq!(binomial_weights(2), vec![1.0, -2.0, 1.0]);
        assert_eq!(binomial_weights(3), vec![-1.0, 3.0, -3.0, 1.0]);
    }

    #[test]
    fn ramp_difference_is_constant() {
        let g = grid1(4.0, 80);
        let f = GridFunction::from_fn(g.clone(), |x| 3.0 * x[0]);
        let h = Shift(vec![4]);
        let d = finite_difference(&f, &h, 1).unwrap();
        let want = 3.0 * h.length(&g);
        for c in 0..70 {
            assert!((d.values[c] - want).abs() < 1e-12);
        }
    }

    #[test]
    fn unaligned_shift_rejected() {
        let g = grid1(1.0, 10);
        assert!(Shift::from_physical(&g, &[0.4]).is_ok());
        assert!(matches!(Shift::from_physical(&g, &[0.25]), Err(Error::UnalignedShift(_))));
    }

    #[test]
    fn indicator_difference_and_seminorm() {
        // cells of width 1/32 on [-2, 2]; the indicator of [0, 1]
        let g = grid1(2.0, 128);
        let f = GridFunction::from_fn(g.clone(), |x| if (0.0..1.0).contains(&x[0]) { 1.0 } else { 0.0 });
        let h = Shift(vec![8]);
        let hl = h.length(&g);
        let d = finite_difference(&f, &h, 1).unwrap();
        for c in 0..g.cell_count() {
            let x = g.cell_center(c)[0];
            let want = if (-hl..0.0).contains(&x) {
                1.0
            } else if (1.0 - hl..1.0).contains(&x) {
                -1.0
            } else {
                0.0
            };
            assert_eq!(d.values[c], want, "x={x}");
        }
        assert!((difference_l1(&f, &h, 1) - 2.0 * hl).abs() < 1e-12);
        let s = besov_seminorm(&f, 0.5, 1, &default_shifts(&g)).unwrap();
        assert!((s - 2.0).abs() < 1e-12);
        assert_eq!(besov_seminorm(&GridFunction::zeros(g.clone()), 0.5, 1, &default_shifts(&g)).unwrap(), 0.0);
    }

    #[test]
    fn default_shift_set_shape() {
        let g = Grid::new(vec![0.0, 0.0], 3.0, 128).unwrap();
        let s = default_shifts(&g);
        assert!(s.iter().all(|h| h.length(&g) <= 1.0 + 1e-12));
        let axis: Vec<_> = s.iter().filter(|h| h.0[1] == 0).collect();
        assert!(axis.len() >= 12);
        assert_eq!(log_spaced_integers(5, 12), vec![1, 2, 3, 4, 5]);
        let v = log_spaced_integers(100, 12);
        assert!(v.len() >= 12 && v[0] == 1 && *v.last().unwrap() == 100);
    }

    #[test]
    fn mollify_point_mass() {
        let g = grid1(2.0, 64);
        let f = estimate_density(&point_samples(1000, &[0.01]), &g).unwrap().density;
        let eps = 0.25;
        let m = mollify(&f, eps).unwrap();
        assert!((m.integral() - 1.0).abs() < 1e-8);
        let support: Vec<f64> = (0..64).filter(|&c| m.values[c] > 0.0).map(|c| g.cell_center(c)[0]).collect();
        let w = g.cell_width();
        assert!(support.iter().all(|x| x.abs() <= eps + 1.5 * w));
        assert!(mollify(&f, 0.5 * w).is_err());
    }

    #[test]
    fn ibp_eight_cells_by_hand() {
        let g = grid1(4.0, 8);
        let f = GridFunction {
            grid: g.clone(),
            values: vec![1.0, 2.0, 0.5, 3.0, -1.0, 4.0, 2.0, 0.25],
        };
        let phi = GridFunction {
            grid: g.clone(),
            values: vec![0.0, 0.0, 1.0, -2.0, 3.0, 1.0, 0.0, 0.0],
        };
        // Σ_i (φ_{i+1} - φ_i) f_i = Σ_i φ_i (f_{i-1} - f_i)
        let lhs_hand: f64 = (0..7).map(|i| (phi.values[i + 1] - phi.values[i]) * f.values[i]).sum();
        let rhs_hand: f64 = (1..8).map(|i| phi.values[i] * (f.values[i - 1] - f.values[i])).sum();
        assert!((lhs_hand - rhs_hand).abs() < 1e-14);
        let c = discrete_ibp_check(&f, &phi, &Shift(vec![1]), 1).unwrap();
        assert!((c.lhs - lhs_hand).abs() < 1e-14);
        assert!(c.gap < 1e-14);
    }

    #[test]
    fn exact_power_law_fit() {
        let pairs: Vec<(f64, f64)> = (0..8).map(|i| {
            let g = 0.004 * 2f64.powi(i);
            (g, 0.7 * g.sqrt())
        }).collect();
        let f = hoelder_fit(&pairs, 0.0).unwrap();
        assert!((f.slope - 0.5).abs() < 1e-12);
        assert!((f.r_squared - 1.0).abs() < 1e-12);
        assert!(matches!(hoelder_fit(&pairs, 0.3), Err(Error::FitRefused(_))));
        let flat: Vec<(f64, f64)> = pairs.iter().map(|&(g, _)| (g, 0.3)).collect();
        assert!(hoelder_fit(&flat, 0.0).unwrap().slope.abs() < 1e-12);
    }

    #[test]
    fn csv_layout() {
        let g = Grid::new(vec![0.0, 0.0], 1.0, 2).unwrap();
        let f = GridFunction::from_fn(g, |x| x[0] + 2.0 * x[1]);
        let csv = f.to_csv();
        assert!(csv.starts_with("x,y,value\n-0.5,-0.5,-1.5\n"));
        assert_eq!(csv.lines().count(), 5);
    }
}
