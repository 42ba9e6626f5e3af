//! Truncated Fock-space linear algebra for a single bosonic mode.
//!
//! Everything is stored densely in the number basis `|0>..|dim-1>`. The
//! truncation leakage allowed for a computation travels with its [`Cutoff`];
//! constructors that would lose more probability than that fail instead of
//! renormalizing.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

/// Default truncation tolerance: probability that may leak past the cutoff.
pub const DEFAULT_TRUNCATION_TOLERANCE: f64 = 1e-8;

/// Number of retained Fock levels plus the leakage tolerance for that basis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cutoff {
    dim: usize,
    tolerance: f64,
}

impl Cutoff {
    pub fn new(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("cutoff must retain at least one level"));
        }
        Ok(Cutoff {
            dim,
            tolerance: DEFAULT_TRUNCATION_TOLERANCE,
        })
    }

    pub fn with_tolerance(self, tolerance: f64) -> Result<Self> {
        if !(tolerance > 0.0 && tolerance < 1.0) {
            return Err(Error::invalid(format!(
                "truncation tolerance {tolerance} must lie in (0, 1)"
            )));
        }
        Ok(Cutoff { tolerance, ..self })
    }

    /// Smallest cutoff whose Poisson tail for mean intensity `|alpha|^2`
    /// stays below the default tolerance: `ceil(|a|^2 + 6 sqrt(|a|^2 + 1) + 4)`.
    pub fn for_amplitude(alpha_abs: f64) -> Self {
        Cutoff {
            dim: heuristic_dim(alpha_abs * alpha_abs),
            tolerance: DEFAULT_TRUNCATION_TOLERANCE,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn tolerance(&self) -> f64 {
        self.tolerance
    }

    pub(crate) fn ensure_same(&self, other: &Cutoff) -> Result<()> {
        if self.dim != other.dim {
            return Err(Error::CutoffMismatch {
                left: self.dim,
                right: other.dim,
            });
        }
        Ok(())
    }
}

/// Cutoff heuristic in terms of mean photon number.
pub fn heuristic_dim(intensity: f64) -> usize {
    let intensity = intensity.max(0.0);
    (intensity + 6.0 * (intensity + 1.0).sqrt() + 4.0).ceil() as usize
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    amplitudes: DVector<C64>,
    cutoff: Cutoff,
}

impl StateVector {
    /// Wraps raw amplitudes, checking that the norm lies in `[1 - tol, 1 + tol]`.
    pub fn from_amplitudes(amplitudes: Vec<C64>, cutoff: Cutoff) -> Result<Self> {
        if amplitudes.len() != cutoff.dim {
            return Err(Error::CutoffMismatch {
                left: amplitudes.len(),
                right: cutoff.dim,
            });
        }
        let state = StateVector {
            amplitudes: DVector::from_vec(amplitudes),
            cutoff,
        };
        let norm = state.norm_sqr();
        if norm > 1.0 + cutoff.tolerance {
            return Err(Error::Integrity(format!("state norm {norm} exceeds 1")));
        }
        check_leak("state vector", 1.0 - norm, cutoff.tolerance)?;
        Ok(state)
    }

    pub(crate) fn from_parts_unchecked(amplitudes: DVector<C64>, cutoff: Cutoff) -> Self {
        StateVector { amplitudes, cutoff }
    }

    pub fn amplitudes(&self) -> &DVector<C64> {
        &self.amplitudes
    }

    pub fn cutoff(&self) -> Cutoff {
        self.cutoff
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|c| c.norm_sqr()).sum()
    }
}

/// Hermitian, (near) unit-trace matrix in the truncated number basis.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    elements: DMatrix<C64>,
    cutoff: Cutoff,
}

impl DensityMatrix {
    /// Builds a density matrix from raw elements. The matrix is symmetrized
    /// to exact Hermiticity after checking it was Hermitian within 1e-12.
    pub fn from_elements(elements: DMatrix<C64>, cutoff: Cutoff) -> Result<Self> {
        if elements.nrows() != cutoff.dim || elements.ncols() != cutoff.dim {
            return Err(Error::CutoffMismatch {
                left: elements.nrows().max(elements.ncols()),
                right: cutoff.dim,
            });
        }
        let dev = (&elements - elements.adjoint()).camax();
        if dev > 1e-12 {
            return Err(Error::Integrity(format!(
                "matrix is not Hermitian (deviation {dev:.3e})"
            )));
        }
        let rho = DensityMatrix {
            elements: hermitian_part(elements),
            cutoff,
        };
        let tr = rho.trace();
        if tr > 1.0 + cutoff.tolerance {
            return Err(Error::Integrity(format!("trace {tr} exceeds 1")));
        }
        check_leak("density matrix", 1.0 - tr, cutoff.tolerance)?;
        Ok(rho)
    }

    /// Diagonal (number-diagonal) state from photon-number probabilities.
    pub fn diagonal(probabilities: &[f64], cutoff: Cutoff) -> Result<Self> {
        if probabilities.len() != cutoff.dim {
            return Err(Error::CutoffMismatch {
                left: probabilities.len(),
                right: cutoff.dim,
            });
        }
        let elements = DMatrix::from_diagonal(&DVector::from_iterator(
            cutoff.dim,
            probabilities.iter().map(|&p| C64::new(p, 0.0)),
        ));
        DensityMatrix::from_elements(elements, cutoff)
    }

    pub(crate) fn from_parts_unchecked(elements: DMatrix<C64>, cutoff: Cutoff) -> Self {
        DensityMatrix {
            elements: hermitian_part(elements),
            cutoff,
        }
    }

    pub fn elements(&self) -> &DMatrix<C64> {
        &self.elements
    }

    pub fn cutoff(&self) -> Cutoff {
        self.cutoff
    }

    pub fn dim(&self) -> usize {
        self.cutoff.dim
    }

    pub fn trace(&self) -> f64 {
        self.elements.diagonal().iter().map(|c| c.re).sum()
    }

    /// `Tr(rho a)`, the coherent amplitude of the state.
    pub fn mean_amplitude(&self) -> C64 {
        (1..self.dim())
            .map(|n| self.elements[(n, n - 1)].conj() * (n as f64).sqrt())
            .sum::<C64>()
            .conj()
    }

    pub fn mean_photon_number(&self) -> f64 {
        self.elements
            .diagonal()
            .iter()
            .enumerate()
            .map(|(n, c)| n as f64 * c.re)
            .sum()
    }
}

/// Dense operator on the truncated space.
#[derive(Debug, Clone, PartialEq)]
pub struct Operator {
    elements: DMatrix<C64>,
    cutoff: Cutoff,
}

impl Operator {
    pub fn identity(cutoff: Cutoff) -> Self {
        Operator {
            elements: DMatrix::identity(cutoff.dim, cutoff.dim),
            cutoff,
        }
    }

    pub fn elements(&self) -> &DMatrix<C64> {
        &self.elements
    }

    pub fn cutoff(&self) -> Cutoff {
        self.cutoff
    }

    pub fn adjoint(&self) -> Operator {
        Operator {
            elements: self.elements.adjoint(),
            cutoff: self.cutoff,
        }
    }

    pub fn compose(&self, other: &Operator) -> Result<Operator> {
        self.cutoff.ensure_same(&other.cutoff)?;
        Ok(Operator {
            elements: &self.elements * &other.elements,
            cutoff: self.cutoff,
        })
    }

    pub fn apply(&self, psi: &StateVector) -> Result<DVector<C64>> {
        self.cutoff.ensure_same(&psi.cutoff)?;
        Ok(&self.elements * &psi.amplitudes)
    }
}

/// Photon-number probabilities `p_0..p_{dim-1}` of one mode.
#[derive(Debug, Clone, PartialEq)]
pub struct PhotocountDistribution {
    probabilities: Vec<f64>,
    tolerance: f64,
}

impl PhotocountDistribution {
    pub fn new(probabilities: Vec<f64>) -> Result<Self> {
        Self::with_tolerance(probabilities, DEFAULT_TRUNCATION_TOLERANCE)
    }

    pub fn with_tolerance(probabilities: Vec<f64>, tolerance: f64) -> Result<Self> {
        if probabilities.is_empty() {
            return Err(Error::invalid("empty photocount distribution"));
        }
        if let Some((n, p)) = probabilities
            .iter()
            .enumerate()
            .find(|(_, p)| !(p.is_finite() && **p >= 0.0))
        {
            return Err(Error::Integrity(format!(
                "p[{n}] = {p} is not a probability"
            )));
        }
        let total: f64 = probabilities.iter().sum();
        if total > 1.0 + tolerance {
            return Err(Error::Integrity(format!("probabilities sum to {total}")));
        }
        Ok(PhotocountDistribution {
            probabilities,
            tolerance,
        })
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    pub fn len(&self) -> usize {
        self.probabilities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probabilities.is_empty()
    }

    pub fn tolerance(&self) -> f64 {
        self.tolerance
    }

    pub fn total(&self) -> f64 {
        self.probabilities.iter().sum()
    }

    pub fn get(&self, n: usize) -> f64 {
        self.probabilities.get(n).copied().unwrap_or(0.0)
    }

    pub fn mean(&self) -> f64 {
        self.probabilities
            .iter()
            .enumerate()
            .map(|(n, p)| n as f64 * p)
            .sum()
    }

    /// Total-variation distance, padding the shorter vector with zeros.
    pub fn total_variation(&self, other: &PhotocountDistribution) -> f64 {
        let len = self.len().max(other.len());
        0.5 * (0..len)
            .map(|n| (self.get(n) - other.get(n)).abs())
            .sum::<f64>()
    }
}

pub fn fock_state(n: usize, cutoff: Cutoff) -> Result<StateVector> {
    if n >= cutoff.dim {
        return Err(Error::OutOfRange { n, dim: cutoff.dim });
    }
    let mut amplitudes = DVector::zeros(cutoff.dim);
    amplitudes[n] = C64::new(1.0, 0.0);
    Ok(StateVector { amplitudes, cutoff })
}

/// `c_n = exp(-|alpha|^2/2) alpha^n / sqrt(n!)`, evaluated in log space.
pub fn coherent_state(alpha: C64, cutoff: Cutoff) -> Result<StateVector> {
    let r = alpha.norm();
    let theta = alpha.arg();
    let ln_fact = ln_factorials(cutoff.dim);
    let amplitudes = DVector::from_iterator(
        cutoff.dim,
        (0..cutoff.dim).map(|n| {
            if n == 0 {
                return C64::new((-0.5 * r * r).exp(), 0.0);
            }
            if r == 0.0 {
                return C64::new(0.0, 0.0);
            }
            let ln_mag = -0.5 * r * r + n as f64 * r.ln() - 0.5 * ln_fact[n];
            C64::from_polar(ln_mag.exp(), n as f64 * theta)
        }),
    );
    let state = StateVector { amplitudes, cutoff };
    check_leak(
        format!("coherent state |{alpha}> in {} levels", cutoff.dim),
        1.0 - state.norm_sqr(),
        cutoff.tolerance,
    )?;
    Ok(state)
}

/// Geometric photon-number law `p_n = nbar^n / (1 + nbar)^(n+1)`.
pub fn thermal_state(nbar: f64, cutoff: Cutoff) -> Result<DensityMatrix> {
    if !(nbar.is_finite() && nbar >= 0.0) {
        return Err(Error::invalid(format!("thermal mean photon number {nbar}")));
    }
    let ratio = nbar / (1.0 + nbar);
    let mut p = Vec::with_capacity(cutoff.dim);
    let mut pn = 1.0 / (1.0 + nbar);
    for _ in 0..cutoff.dim {
        p.push(pn);
        pn *= ratio;
    }
    let total: f64 = p.iter().sum();
    check_leak(
        format!("thermal state nbar={nbar} in {} levels", cutoff.dim),
        1.0 - total,
        cutoff.tolerance,
    )?;
    DensityMatrix::diagonal(&p, cutoff)
}

/// Displacement operator `D(delta) = exp(delta a^dag - delta^* a)` truncated
/// to the cutoff.
///
/// For `m >= n` the element is
/// `sqrt(n!/m!) delta^(m-n) exp(-|delta|^2/2) L_n^(m-n)(|delta|^2)`; the
/// upper triangle follows from `<m|D(delta)|n> = conj(<n|D(-delta)|m>)`.
/// Each offset `k = m - n` is filled by the normalized Laguerre recurrence
/// for `f_n = sqrt(n!/(n+k)!) L_n^(k)(x)`, with the prefactor
/// `|delta|^k exp(-x/2) / sqrt(k!)` carried in log space.
pub fn displacement_operator(delta: C64, cutoff: Cutoff) -> Operator {
    let dim = cutoff.dim;
    let mut elements = DMatrix::zeros(dim, dim);
    if delta == C64::new(0.0, 0.0) {
        elements.fill_with_identity();
        return Operator { elements, cutoff };
    }
    let x = delta.norm_sqr();
    let r = delta.norm();
    let theta = delta.arg();
    let ln_fact = ln_factorials(dim);
    let mut f = vec![0.0; dim];
    for k in 0..dim {
        let len = dim - k;
        normalized_laguerre_column(k, x, &mut f[..len]);
        let ln_scale = k as f64 * r.ln() - 0.5 * x - 0.5 * ln_fact[k];
        let scale = ln_scale.exp();
        let lower = C64::from_polar(scale, k as f64 * theta);
        // (-delta^*)^k = |delta|^k exp(i k (pi - theta))
        let upper = C64::from_polar(scale, k as f64 * (std::f64::consts::PI - theta));
        for n in 0..len {
            elements[(n + k, n)] = lower * f[n];
            if k > 0 {
                elements[(n, n + k)] = upper * f[n];
            }
        }
    }
    Operator { elements, cutoff }
}

/// Fills `out[n] = sqrt(n!/(n+k)!) L_n^(k)(x) * sqrt(k!)` for `n < out.len()`.
pub(crate) fn normalized_laguerre_column(k: usize, x: f64, out: &mut [f64]) {
    if out.is_empty() {
        return;
    }
    let kf = k as f64;
    out[0] = 1.0;
    if out.len() > 1 {
        out[1] = (1.0 + kf - x) / (1.0 + kf).sqrt();
    }
    for n in 1..out.len().saturating_sub(1) {
        let nf = n as f64;
        out[n + 1] = ((2.0 * nf + 1.0 + kf - x) * out[n] - (nf * (nf + kf)).sqrt() * out[n - 1])
            / ((nf + 1.0) * (nf + kf + 1.0)).sqrt();
    }
}

pub fn density_from_pure(psi: &StateVector) -> DensityMatrix {
    DensityMatrix::from_parts_unchecked(&psi.amplitudes * psi.amplitudes.adjoint(), psi.cutoff)
}

/// `U rho U^dag`, re-symmetrized to exact Hermiticity.
pub fn conjugate_by(rho: &DensityMatrix, u: &Operator) -> Result<DensityMatrix> {
    rho.cutoff.ensure_same(&u.cutoff)?;
    let out = &u.elements * &rho.elements * u.elements.adjoint();
    Ok(DensityMatrix::from_parts_unchecked(out, rho.cutoff))
}

/// Diagonal of `rho` as a photocount distribution; round-off negatives above
/// `-1e-10` are clamped to zero.
pub fn number_distribution(rho: &DensityMatrix) -> Result<PhotocountDistribution> {
    let mut p = Vec::with_capacity(rho.dim());
    for n in 0..rho.dim() {
        let v = rho.elements[(n, n)].re;
        if v < -1e-10 {
            return Err(Error::Integrity(format!(
                "negative population p[{n}] = {v:e}"
            )));
        }
        p.push(v.max(0.0));
    }
    PhotocountDistribution::with_tolerance(p, rho.cutoff.tolerance)
}

pub(crate) fn hermitian_part(m: DMatrix<C64>) -> DMatrix<C64> {
    let adj = m.adjoint();
    (m + adj) * C64::new(0.5, 0.0)
}

pub(crate) fn check_leak(what: impl Into<String>, leaked: f64, tolerance: f64) -> Result<()> {
    if leaked > tolerance {
        return Err(Error::truncation(what, leaked, tolerance));
    }
    Ok(())
}

/// `ln(n!)` for `n = 0..len`.
pub(crate) fn ln_factorials(len: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(len.max(1));
    let mut acc = 0.0;
    out.push(0.0);
    for n in 1..len.max(1) {
        acc += (n as f64).ln();
        out.push(acc);
    }
    out
}
