//! Wigner and s-ordered quasidistributions, and the phase-space overlap form
//! of the photon-counting parity signal.
//!
//! Convention: the vacuum Wigner function is `(2/pi) exp(-2|beta|^2)`, every
//! quasidistribution integrates to the trace of the state, and
//! `(pi/2) W(0)` is the expectation of photon-number parity.

use std::f64::consts::PI;

use nalgebra::DVector;
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::fockspace::{displacement_operator, normalized_laguerre_column, DensityMatrix};

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// A point `beta` of single-mode phase space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhasePoint(pub C64);

impl PhasePoint {
    pub fn new(re: f64, im: f64) -> Self {
        PhasePoint(C64::new(re, im))
    }

    pub fn origin() -> Self {
        PhasePoint(C64::new(0.0, 0.0))
    }

    pub fn beta(&self) -> C64 {
        self.0
    }

    fn check(&self) -> Result<()> {
        if self.0.re.is_finite() && self.0.im.is_finite() {
            Ok(())
        } else {
            Err(Error::invalid(format!(
                "phase point {} is not finite",
                self.0
            )))
        }
    }
}

impl From<C64> for PhasePoint {
    fn from(beta: C64) -> Self {
        PhasePoint(beta)
    }
}

/// Ordering parameter `s` of a quasidistribution. Only `s <= 0` is accepted:
/// the series weight `(s+1)/(s-1)` then has modulus at most one.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct OrderingParameter(f64);

impl OrderingParameter {
    pub const WIGNER: OrderingParameter = OrderingParameter(0.0);
    pub const HUSIMI: OrderingParameter = OrderingParameter(-1.0);

    pub fn new(s: f64) -> Result<Self> {
        if !s.is_finite() || s > 0.0 {
            return Err(Error::invalid(format!(
                "ordering parameter s = {s} must be finite and non-positive"
            )));
        }
        Ok(OrderingParameter(s))
    }

    /// `s = -(1-T)/T`, the ordering sampled by a coherent probe at transmission `T`.
    pub fn from_transmission(t: f64) -> Result<Self> {
        if !(t > 0.0 && t <= 1.0) {
            return Err(Error::invalid(format!("transmission {t} outside (0, 1]")));
        }
        OrderingParameter::new(-(1.0 - t) / t)
    }

    pub fn value(&self) -> f64 {
        self.0
    }
}

/// Square Cartesian grid over `(Re beta, Im beta)` for midpoint quadrature.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseGrid {
    pub center: PhasePoint,
    pub half_extent: f64,
    pub points_per_axis: usize,
}

pub const DEFAULT_POINTS_PER_AXIS: usize = 201;

impl PhaseGrid {
    pub fn new(center: PhasePoint, half_extent: f64, points_per_axis: usize) -> Result<Self> {
        center.check()?;
        if !(half_extent > 0.0 && half_extent.is_finite()) {
            return Err(Error::invalid(format!("grid half extent {half_extent}")));
        }
        if points_per_axis < 2 {
            return Err(Error::invalid("grid needs at least two points per axis"));
        }
        Ok(PhaseGrid {
            center,
            half_extent,
            points_per_axis,
        })
    }

    /// Default grid around the origin: half extent `max(3, shift + 4)` with
    /// 201 points per axis.
    pub fn default_for_shift(shift: f64) -> Self {
        PhaseGrid {
            center: PhasePoint::origin(),
            half_extent: 3.0f64.max(shift.abs() + 4.0),
            points_per_axis: DEFAULT_POINTS_PER_AXIS,
        }
    }

    pub fn step(&self) -> f64 {
        2.0 * self.half_extent / self.points_per_axis as f64
    }

    pub fn cell_area(&self) -> f64 {
        self.step() * self.step()
    }

    /// Midpoint coordinate along one axis.
    pub fn coordinate(&self, i: usize) -> f64 {
        -self.half_extent + (i as f64 + 0.5) * self.step()
    }

    /// Row-major grid points: imaginary index outer, real index inner.
    pub fn point(&self, index: usize) -> PhasePoint {
        let n = self.points_per_axis;
        let (row, col) = (index / n, index % n);
        PhasePoint(self.center.0 + C64::new(self.coordinate(col), self.coordinate(row)))
    }

    pub fn len(&self) -> usize {
        self.points_per_axis * self.points_per_axis
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_boundary(&self, index: usize) -> bool {
        let n = self.points_per_axis;
        let (row, col) = (index / n, index % n);
        row == 0 || col == 0 || row == n - 1 || col == n - 1
    }

    /// Evaluates `f` at every grid point in row-major order.
    pub fn evaluate<F>(&self, f: F) -> Vec<f64>
    where
        F: Fn(PhasePoint) -> f64 + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        {
            (0..self.len())
                .into_par_iter()
                .map(|i| f(self.point(i)))
                .collect()
        }
        #[cfg(not(feature = "parallel"))]
        {
            (0..self.len()).map(|i| f(self.point(i))).collect()
        }
    }

    /// Midpoint-rule integral of `f`, rejecting grids on whose boundary
    /// `|f|` exceeds `1e-10` of its peak.
    pub fn integrate<F>(&self, f: F) -> Result<f64>
    where
        F: Fn(PhasePoint) -> f64 + Sync + Send,
    {
        let values = self.evaluate(f);
        self.integrate_values(&values)
    }

    pub fn integrate_values(&self, values: &[f64]) -> Result<f64> {
        let (boundary, peak) = self.boundary_and_peak(values);
        if boundary > 1e-10 * peak {
            return Err(Error::Support { boundary, peak });
        }
        Ok(values.iter().sum::<f64>() * self.cell_area())
    }

    fn boundary_and_peak(&self, values: &[f64]) -> (f64, f64) {
        let mut boundary = 0.0f64;
        let mut peak = 0.0f64;
        for (i, v) in values.iter().enumerate() {
            peak = peak.max(v.abs());
            if self.is_boundary(i) {
                boundary = boundary.max(v.abs());
            }
        }
        (boundary, peak)
    }

    /// Same resolution, half extent grown in steps of `0.5` until the
    /// boundary condition holds for `f`. Gives up after the extent has
    /// quadrupled.
    pub fn widened_for<F>(&self, f: F) -> Result<PhaseGrid>
    where
        F: Fn(PhasePoint) -> f64 + Sync + Send,
    {
        let mut grid = *self;
        loop {
            let values = grid.boundary_values(&f);
            let (boundary, peak) = values;
            if boundary <= 1e-10 * peak {
                return Ok(grid);
            }
            if grid.half_extent > 4.0 * self.half_extent {
                return Err(Error::Support { boundary, peak });
            }
            grid.half_extent += 0.5;
        }
    }

    /// Boundary maximum and a peak estimate from a coarse interior scan.
    fn boundary_values<F>(&self, f: &F) -> (f64, f64)
    where
        F: Fn(PhasePoint) -> f64,
    {
        let n = self.points_per_axis;
        let mut boundary = 0.0f64;
        for i in 0..n {
            for idx in [i, (n - 1) * n + i, i * n, i * n + n - 1] {
                boundary = boundary.max(f(self.point(idx)).abs());
            }
        }
        let mut peak = boundary;
        let stride = (n / 50).max(1);
        for row in (0..n).step_by(stride) {
            for col in (0..n).step_by(stride) {
                peak = peak.max(f(self.point(row * n + col)).abs());
            }
        }
        (boundary, peak)
    }
}

/// Laguerre polynomial `L_n(x)` by the three-term recurrence
/// `(k+1) L_{k+1} = (2k+1-x) L_k - k L_{k-1}`.
pub fn laguerre(n: usize, x: f64) -> f64 {
    let mut prev = 1.0;
    if n == 0 {
        return prev;
    }
    let mut cur = 1.0 - x;
    for k in 1..n {
        let kf = k as f64;
        let next = ((2.0 * kf + 1.0 - x) * cur - kf * prev) / (kf + 1.0);
        prev = cur;
        cur = next;
    }
    cur
}

/// Closed-form Wigner function of the Fock state `|n>`:
/// `(2/pi) (-1)^n exp(-2|beta|^2) L_n(4|beta|^2)`.
pub fn wigner_fock(n: usize, beta: PhasePoint) -> f64 {
    let r2 = beta.0.norm_sqr();
    let sign = if n.is_multiple_of(2) { 1.0 } else { -1.0 };
    2.0 / PI * sign * (-2.0 * r2).exp() * laguerre(n, 4.0 * r2)
}

/// s-ordered quasidistribution by the displaced photon-number series
/// `W(beta; s) = 2/(pi(1-s)) sum_n ((s+1)/(s-1))^n <n|D(-beta) rho D(-beta)^dag|n>`.
///
/// Fails with a truncation error when the probability displaced past the
/// cutoff, weighted by `|(s+1)/(s-1)|^dim`, exceeds the cutoff tolerance.
pub fn quasi_s(rho: &DensityMatrix, beta: PhasePoint, s: OrderingParameter) -> Result<f64> {
    beta.check()?;
    let dim = rho.dim();
    let d = displacement_operator(-beta.0, rho.cutoff());
    let dm = d.elements();
    let dr = dm * rho.elements();
    let populations: Vec<f64> = (0..dim)
        .map(|n| (0..dim).map(|j| (dr[(n, j)] * dm[(n, j)].conj()).re).sum())
        .collect();
    ordered_series(&populations, rho, beta, s)
}

/// `2/(pi(1-s)) sum_n r^n p_n` with the truncation check of [`quasi_s`].
fn ordered_series(
    populations: &[f64],
    rho: &DensityMatrix,
    beta: PhasePoint,
    s: OrderingParameter,
) -> Result<f64> {
    let s = s.value();
    let ratio = (s + 1.0) / (s - 1.0);
    let mut weight = 1.0;
    let mut sum = 0.0;
    let mut kept = 0.0;
    for &pn in populations {
        sum += weight * pn;
        kept += pn;
        weight *= ratio;
    }
    let leaked = (rho.trace() - kept).max(0.0) * ratio.abs().powi(populations.len() as i32);
    if leaked > rho.cutoff().tolerance() {
        return Err(Error::truncation(
            format!("quasidistribution series at beta = {}, s = {s}", beta.0),
            leaked,
            rho.cutoff().tolerance(),
        ));
    }
    Ok(2.0 / (PI * (1.0 - s)) * sum)
}

/// Precomputed [`quasi_s`] evaluator for maps of one state.
///
/// Number-diagonal states cost `O(dim^2)` per point, others
/// `O(rank dim^2)` through their eigen-decomposition.
#[derive(Debug, Clone)]
pub struct QuasiMap {
    rho: DensityMatrix,
    parts: QuasiParts,
}

#[derive(Debug, Clone)]
enum QuasiParts {
    Diagonal(Vec<f64>),
    Mixture(Vec<(f64, DVector<C64>)>),
}

impl QuasiMap {
    pub fn new(rho: &DensityMatrix) -> Self {
        let e = rho.elements();
        let dim = rho.dim();
        let diagonal = (0..dim).all(|i| (0..dim).all(|j| i == j || e[(i, j)].norm() == 0.0));
        let parts = if diagonal {
            QuasiParts::Diagonal((0..dim).map(|n| e[(n, n)].re).collect())
        } else {
            let eig = e.clone().symmetric_eigen();
            QuasiParts::Mixture(
                eig.eigenvalues
                    .iter()
                    .enumerate()
                    .filter(|(_, &l)| l.abs() > 1e-15)
                    .map(|(k, &l)| (l, eig.eigenvectors.column(k).into_owned()))
                    .collect(),
            )
        };
        QuasiMap {
            rho: rho.clone(),
            parts,
        }
    }

    pub fn value(&self, beta: PhasePoint, s: OrderingParameter) -> Result<f64> {
        beta.check()?;
        let d = displacement_operator(-beta.0, self.rho.cutoff());
        let dm = d.elements();
        let dim = self.rho.dim();
        let populations: Vec<f64> = match &self.parts {
            QuasiParts::Diagonal(p) => (0..dim)
                .map(|n| (0..dim).map(|j| dm[(n, j)].norm_sqr() * p[j]).sum())
                .collect(),
            QuasiParts::Mixture(parts) => {
                let mut pop = vec![0.0; dim];
                for (lambda, v) in parts {
                    let dv = dm * v;
                    for (acc, z) in pop.iter_mut().zip(dv.iter()) {
                        *acc += lambda * z.norm_sqr();
                    }
                }
                pop
            }
        };
        ordered_series(&populations, &self.rho, beta, s)
    }
}

pub fn husimi(rho: &DensityMatrix, beta: PhasePoint) -> Result<f64> {
    quasi_s(rho, beta, OrderingParameter::HUSIMI)
}

/// Wigner function of `rho` at `beta`, equal to `quasi_s(rho, beta, 0)`.
///
/// Evaluated through the parity-displacement identity
/// `W(beta) = (2/pi) sum_mn (-1)^m rho_mn <n|D(2 beta)|m>`, which is exact for
/// the truncated `rho` and therefore cannot fail on truncation.
pub fn wigner(rho: &DensityMatrix, beta: PhasePoint) -> Result<f64> {
    beta.check()?;
    Ok(WignerMap::new(rho).value(beta))
}

/// Precomputed Wigner evaluator for repeated evaluation of one state.
///
/// Only the off-diagonals of `rho` that carry weight are visited, so number
/// diagonal states cost `O(dim)` per point.
#[derive(Debug, Clone)]
pub struct WignerMap {
    dim: usize,
    // (offset k, lower diagonal rho[n+k][n] for n = 0..dim-k)
    offsets: Vec<(usize, Vec<C64>)>,
    ln_fact: Vec<f64>,
}

impl WignerMap {
    pub fn new(rho: &DensityMatrix) -> Self {
        let dim = rho.dim();
        let e = rho.elements();
        let offsets = (0..dim)
            .filter_map(|k| {
                let diag: Vec<C64> = (0..dim - k).map(|n| e[(n + k, n)]).collect();
                diag.iter().any(|z| z.norm() > 0.0).then_some((k, diag))
            })
            .collect();
        WignerMap {
            dim,
            offsets,
            ln_fact: crate::fockspace::ln_factorials(dim),
        }
    }

    pub fn value(&self, beta: PhasePoint) -> f64 {
        // <n|D(2b)|n+k> and <n+k|D(2b)|n> share the normalized Laguerre
        // factor; pair rho[n+k][n] with the upper element and its conjugate
        // partner with the lower one.
        let delta = 2.0 * beta.0;
        let x = delta.norm_sqr();
        let r = delta.norm();
        let theta = delta.arg();
        let mut f = vec![0.0; self.dim];
        let mut total = 0.0;
        for (k, diag) in &self.offsets {
            let k = *k;
            let len = diag.len();
            normalized_laguerre_column(k, x, &mut f[..len]);
            let scale = if k == 0 {
                (-0.5 * x).exp()
            } else if r == 0.0 {
                0.0
            } else {
                (k as f64 * r.ln() - 0.5 * x - 0.5 * self.ln_fact[k]).exp()
            };
            if scale == 0.0 {
                continue;
            }
            // upper element <n|D|n+k> = scale f_n (-delta^*)^k / |delta|^k
            let phase = C64::from_polar(1.0, k as f64 * (PI - theta));
            let mut acc = C64::new(0.0, 0.0);
            for (n, rho_lower) in diag.iter().enumerate() {
                // term (m = n+k, row n): (-1)^(n+k) rho[n+k][n] <n|D|n+k>
                let sign = if (n + k) % 2 == 0 { 1.0 } else { -1.0 };
                acc += *rho_lower * (sign * f[n]);
            }
            let contribution = acc * phase * scale;
            // lower-triangle partner equals the conjugate term
            total += if k == 0 {
                contribution.re
            } else {
                2.0 * contribution.re
            };
        }
        2.0 / PI * total
    }
}

/// Phase-space overlap form of the parity signal:
/// `<Pi> = pi/(2(1-T)) * integral W_S(beta) W_P(sqrt(T/(1-T)) beta) d^2 beta`.
pub fn overlap_pi(
    rho_signal: &DensityMatrix,
    rho_probe: &DensityMatrix,
    t: f64,
    grid: &PhaseGrid,
) -> Result<f64> {
    let integrand = overlap_integrand(rho_signal, rho_probe, t)?;
    let integral = grid.integrate(integrand)?;
    Ok(PI / (2.0 * (1.0 - t)) * integral)
}

/// [`overlap_pi`] plus the difference against the same grid at roughly half
/// the resolution, as a quadrature error estimate.
pub fn overlap_pi_with_error(
    rho_signal: &DensityMatrix,
    rho_probe: &DensityMatrix,
    t: f64,
    grid: &PhaseGrid,
) -> Result<(f64, f64)> {
    let fine = overlap_pi(rho_signal, rho_probe, t, grid)?;
    let coarse_grid = PhaseGrid {
        points_per_axis: (grid.points_per_axis / 2).max(2) | 1,
        ..*grid
    };
    let coarse = overlap_pi(rho_signal, rho_probe, t, &coarse_grid)?;
    Ok((fine, (fine - coarse).abs()))
}

/// Default quadrature grid for [`overlap_pi`]: half extent
/// `max(3, shift + 4)` where `shift` is the larger of the signal's coherent
/// amplitude and the rescaled probe amplitude `sqrt((1-T)/T) <a_P>`, widened
/// until the integrand vanishes on the boundary.
pub fn default_overlap_grid(
    rho_signal: &DensityMatrix,
    rho_probe: &DensityMatrix,
    t: f64,
) -> Result<PhaseGrid> {
    let integrand = overlap_integrand(rho_signal, rho_probe, t)?;
    let shift = rho_signal
        .mean_amplitude()
        .norm()
        .max(((1.0 - t) / t).sqrt() * rho_probe.mean_amplitude().norm());
    PhaseGrid::default_for_shift(shift).widened_for(integrand)
}

fn overlap_integrand(
    rho_signal: &DensityMatrix,
    rho_probe: &DensityMatrix,
    t: f64,
) -> Result<impl Fn(PhasePoint) -> f64 + Sync + Send> {
    if !(t > 0.0 && t < 1.0) {
        return Err(Error::invalid(format!(
            "overlap form needs transmission in (0, 1), got {t}"
        )));
    }
    let signal = WignerMap::new(rho_signal);
    let probe = WignerMap::new(rho_probe);
    let scale = (t / (1.0 - t)).sqrt();
    Ok(move |beta: PhasePoint| signal.value(beta) * probe.value(PhasePoint(beta.0 * scale)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fockspace::{coherent_state, density_from_pure, fock_state, thermal_state, Cutoff};
    use approx::assert_abs_diff_eq;

    fn cut(dim: usize) -> Cutoff {
        Cutoff::new(dim).unwrap()
    }

    #[test]
    fn quasi_map_matches_series() {
        let c = cut(60);
        let coh = density_from_pure(&coherent_state(C64::new(0.8, -0.5), c).unwrap());
        let th = thermal_state(0.7, c).unwrap();
        let mixed = DensityMatrix::from_elements(
            coh.elements() * C64::new(0.4, 0.0) + th.elements() * C64::new(0.6, 0.0),
            c,
        )
        .unwrap();
        let states = [
            density_from_pure(&fock_state(3, c).unwrap()),
            th,
            coh,
            mixed,
        ];
        for rho in &states {
            let map = QuasiMap::new(rho);
            for s in [0.0, -0.3, -1.0] {
                let s = OrderingParameter::new(s).unwrap();
                for beta in [
                    PhasePoint::origin(),
                    PhasePoint::new(1.1, -0.4),
                    PhasePoint::new(-2.0, 1.0),
                ] {
                    assert_abs_diff_eq!(
                        map.value(beta, s).unwrap(),
                        quasi_s(rho, beta, s).unwrap(),
                        epsilon = 1e-12
                    );
                }
            }
        }
    }

    fn fock(n: usize, dim: usize) -> DensityMatrix {
        density_from_pure(&fock_state(n, cut(dim)).unwrap())
    }

    fn coherent(alpha: C64, dim: usize) -> DensityMatrix {
        density_from_pure(&coherent_state(alpha, cut(dim)).unwrap())
    }

    #[test]
    fn laguerre_low_orders() {
        for x in [-1.0, 0.0, 0.3, 7.5] {
            assert_eq!(laguerre(0, x), 1.0);
            assert_abs_diff_eq!(laguerre(1, x), 1.0 - x, epsilon = 1e-15);
            assert_abs_diff_eq!(
                laguerre(2, x),
                (x * x - 4.0 * x + 2.0) / 2.0,
                epsilon = 1e-14
            );
        }
        assert_abs_diff_eq!(laguerre(2, 3.0), -0.5, epsilon = 1e-15);
        // L_3(x) = (-x^3 + 9x^2 - 18x + 6)/6
        assert_abs_diff_eq!(
            laguerre(3, 2.0),
            (-8.0 + 36.0 - 36.0 + 6.0) / 6.0,
            epsilon = 1e-14
        );
    }

    #[test]
    fn fock_wigner_closed_form() {
        assert_abs_diff_eq!(
            wigner_fock(0, PhasePoint::origin()),
            2.0 / PI,
            epsilon = 1e-16
        );
        assert_abs_diff_eq!(
            wigner_fock(1, PhasePoint::origin()),
            -2.0 / PI,
            epsilon = 1e-16
        );
        assert_abs_diff_eq!(
            wigner_fock(1, PhasePoint::new(0.5, 0.0)),
            0.0,
            epsilon = 1e-16
        );
        assert_abs_diff_eq!(
            wigner_fock(1, PhasePoint::new(0.0, -0.5)),
            0.0,
            epsilon = 1e-16
        );
    }

    #[test]
    fn ordering_parameter_guard() {
        assert!(OrderingParameter::new(0.1).is_err());
        assert!(OrderingParameter::new(1.0).is_err());
        assert!(OrderingParameter::new(f64::NAN).is_err());
        assert!(OrderingParameter::new(-5.0).is_ok());
        assert_abs_diff_eq!(
            OrderingParameter::from_transmission(0.75).unwrap().value(),
            -1.0 / 3.0,
            epsilon = 1e-16
        );
        assert!(OrderingParameter::from_transmission(0.0).is_err());
    }

    #[test]
    fn vacuum_quasi_at_origin() {
        let vac = fock(0, 12);
        for s in [0.0, -0.3, -1.0, -2.5] {
            let v = quasi_s(
                &vac,
                PhasePoint::origin(),
                OrderingParameter::new(s).unwrap(),
            )
            .unwrap();
            assert_abs_diff_eq!(v, 2.0 / (PI * (1.0 - s)), epsilon = 1e-15);
        }
    }

    #[test]
    fn single_photon_quasi_at_origin() {
        let one = fock(1, 12);
        for s in [0.0, -0.1, -0.5, -1.0, -7.0 / 3.0] {
            let v = quasi_s(
                &one,
                PhasePoint::origin(),
                OrderingParameter::new(s).unwrap(),
            )
            .unwrap();
            assert_abs_diff_eq!(
                v,
                -(2.0 / PI) * (1.0 + s) / (1.0 - s).powi(2),
                epsilon = 1e-15
            );
        }
    }

    #[test]
    fn generic_and_closed_form_agree() {
        for n in 0..6 {
            let rho = fock(n, 40);
            for beta in [
                PhasePoint::origin(),
                PhasePoint::new(0.3, -0.2),
                PhasePoint::new(1.1, 0.9),
            ] {
                let closed = wigner_fock(n, beta);
                let series = quasi_s(&rho, beta, OrderingParameter::WIGNER).unwrap();
                let fast = wigner(&rho, beta).unwrap();
                assert_abs_diff_eq!(closed, series, epsilon = 1e-10);
                assert_abs_diff_eq!(closed, fast, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn wigner_of_coherent_state_is_shifted_gaussian() {
        let alpha = C64::new(0.8, -0.5);
        let rho = coherent(alpha, 40);
        let map = WignerMap::new(&rho);
        for i in -4..=4 {
            for j in -4..=4 {
                let beta = PhasePoint::new(0.4 * i as f64, 0.4 * j as f64);
                let want = 2.0 / PI * (-2.0 * (beta.0 - alpha).norm_sqr()).exp();
                assert_abs_diff_eq!(map.value(beta), want, epsilon = 1e-8);
                assert_abs_diff_eq!(
                    quasi_s(&rho, beta, OrderingParameter::WIGNER).unwrap(),
                    want,
                    epsilon = 1e-8
                );
            }
        }
    }

    #[test]
    fn thermal_wigner_peak() {
        for nbar in [0.2, 0.5, 1.0] {
            let rho = thermal_state(nbar, cut(60)).unwrap();
            let want = 2.0 / PI / (2.0 * nbar + 1.0);
            assert_abs_diff_eq!(
                wigner(&rho, PhasePoint::origin()).unwrap(),
                want,
                epsilon = 1e-8
            );
            assert_abs_diff_eq!(
                quasi_s(&rho, PhasePoint::origin(), OrderingParameter::WIGNER).unwrap(),
                want,
                epsilon = 1e-8
            );
        }
    }

    #[test]
    fn parity_identity_for_fock_states() {
        for n in 0..=5 {
            let v = wigner(&fock(n, 8), PhasePoint::origin()).unwrap();
            let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
            assert_abs_diff_eq!(v * PI / 2.0, sign, epsilon = 1e-14);
        }
    }

    #[test]
    fn quasi_s_detects_truncation() {
        let rho = fock(1, 6);
        let err = quasi_s(&rho, PhasePoint::new(2.5, 0.0), OrderingParameter::WIGNER).unwrap_err();
        assert!(matches!(err, Error::Truncation { .. }));
        let wide = fock(1, 40);
        assert!(quasi_s(&wide, PhasePoint::new(2.5, 0.0), OrderingParameter::WIGNER).is_ok());
    }

    #[test]
    fn husimi_is_coherent_overlap() {
        let rho = fock(2, 30);
        for beta in [
            PhasePoint::origin(),
            PhasePoint::new(0.7, 0.7),
            PhasePoint::new(-1.3, 0.2),
        ] {
            // Q(beta) = (1/pi) |<beta|2>|^2
            let x = beta.0.norm_sqr();
            let want = (1.0 / PI) * (-x).exp() * x * x / 2.0;
            assert_abs_diff_eq!(husimi(&rho, beta).unwrap(), want, epsilon = 1e-12);
        }
    }

    #[test]
    fn grid_geometry() {
        let g = PhaseGrid::new(PhasePoint::origin(), 3.0, 201).unwrap();
        assert_abs_diff_eq!(g.point(100 * 201 + 100).0.norm(), 0.0, epsilon = 1e-14);
        assert!(g.is_boundary(0) && g.is_boundary(200) && g.is_boundary(201 * 200));
        assert!(!g.is_boundary(202));
        assert!(PhaseGrid::new(PhasePoint::origin(), 3.0, 1).is_err());
        assert!(PhaseGrid::new(PhasePoint::origin(), 0.0, 11).is_err());
        assert_eq!(PhaseGrid::default_for_shift(0.0).half_extent, 4.0);
        assert_eq!(PhaseGrid::default_for_shift(1.5).half_extent, 5.5);
    }

    #[test]
    fn integration_rejects_small_grid() {
        let g = PhaseGrid::new(PhasePoint::origin(), 1.0, 51).unwrap();
        let err = g.integrate(|b| wigner_fock(0, b)).unwrap_err();
        assert!(matches!(err, Error::Support { .. }));
        let wide = g.widened_for(|b| wigner_fock(0, b)).unwrap();
        assert!(wide.half_extent > 3.0);
        assert_abs_diff_eq!(
            wide.integrate(|b| wigner_fock(0, b)).unwrap(),
            1.0,
            epsilon = 1e-8
        );
    }

    #[test]
    fn overlap_vacuum_and_single_photon() {
        let vac = fock(0, 6);
        for t in [0.2, 0.5, 0.9] {
            let grid = default_overlap_grid(&vac, &vac, t).unwrap();
            assert_abs_diff_eq!(
                overlap_pi(&vac, &vac, t, &grid).unwrap(),
                1.0,
                epsilon = 1e-6
            );
        }
        let one = fock(1, 6);
        let grid = default_overlap_grid(&one, &vac, 0.75).unwrap();
        let (v, err) = overlap_pi_with_error(&one, &vac, 0.75, &grid).unwrap();
        assert_abs_diff_eq!(v, -0.5, epsilon = 1e-6);
        assert!(err < 1e-6);
        assert!(overlap_pi(&one, &vac, 1.0, &grid).is_err());
        assert!(overlap_pi(&one, &vac, 0.0, &grid).is_err());
    }

    #[test]
    fn overlap_with_coherent_probe_samples_ordered_quasi() {
        let t = 0.5;
        let alpha = C64::new(0.6, 0.3);
        let signal = fock(1, 30);
        let probe = coherent(alpha, 30);
        let grid = default_overlap_grid(&signal, &probe, t).unwrap();
        let lhs = overlap_pi(&signal, &probe, t, &grid).unwrap();
        let point = PhasePoint(alpha * ((1.0 - t) / t).sqrt());
        let rhs = PI / (2.0 * t)
            * quasi_s(
                &signal,
                point,
                OrderingParameter::from_transmission(t).unwrap(),
            )
            .unwrap();
        assert_abs_diff_eq!(lhs, rhs, epsilon = 1e-5);
    }

    #[test]
    fn rescaled_probe_second_moment_contracts() {
        let probe = thermal_state(0.3, cut(30)).unwrap();
        let map = WignerMap::new(&probe);
        let grid = PhaseGrid::new(PhasePoint::origin(), 6.0, 201).unwrap();
        let second_moment = |scale: f64| {
            let norm = grid
                .integrate(|b| map.value(PhasePoint(b.0 * scale)))
                .unwrap();
            let m2 = grid
                .integrate(|b| b.0.norm_sqr() * map.value(PhasePoint(b.0 * scale)))
                .unwrap();
            m2 / norm
        };
        let base = second_moment(1.0);
        for t in [0.6f64, 0.75, 0.9] {
            let scale = (t / (1.0 - t)).sqrt();
            assert_abs_diff_eq!(second_moment(scale), (1.0 - t) / t * base, epsilon = 1e-8);
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(48))]

            #[test]
            fn husimi_is_non_negative(n in 0usize..5, re in -2.0f64..2.0, im in -2.0f64..2.0,
                                      a_re in -1.0f64..1.0, a_im in -1.0f64..1.0) {
                let beta = PhasePoint::new(re, im);
                let states = [
                    fock(n, 40),
                    coherent(C64::new(a_re, a_im), 40),
                    thermal_state(0.5 * n as f64, cut(80)).unwrap(),
                ];
                for rho in &states {
                    prop_assert!(husimi(rho, beta).unwrap() >= -1e-10);
                }
            }

            #[test]
            fn fast_wigner_matches_series(n in 0usize..4, a_re in -1.0f64..1.0, a_im in -1.0f64..1.0,
                                          re in -1.5f64..1.5, im in -1.5f64..1.5) {
                let c = cut(40);
                let mixed = (coherent(C64::new(a_re, a_im), 40).elements() * C64::new(0.5, 0.0))
                    + (fock(n, 40).elements() * C64::new(0.5, 0.0));
                let rho = DensityMatrix::from_elements(mixed, c).unwrap();
                let beta = PhasePoint::new(re, im);
                let a = wigner(&rho, beta).unwrap();
                let b = quasi_s(&rho, beta, OrderingParameter::WIGNER).unwrap();
                prop_assert!((a - b).abs() < 1e-10, "{a} vs {b}");
            }

            #[test]
            fn vacuum_ordering_monotone(s1 in -5.0f64..0.0, s2 in -5.0f64..0.0) {
                prop_assume!(s1 < s2);
                let vac = fock(0, 4);
                let at = |s| quasi_s(&vac, PhasePoint::origin(), OrderingParameter::new(s).unwrap()).unwrap();
                prop_assert!(at(s1) < at(s2));
            }
        }
    }
}
