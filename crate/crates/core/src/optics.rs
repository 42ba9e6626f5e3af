//! Physical channel layer: beam-splitter mixing of signal and probe, loss,
//! photocounting of the counted port and the parity expectation.
//!
//! The counted mode is `b = sqrt(T) a_S - sqrt(1-T) a_P`. The discarded port
//! is pinned to `c = -sqrt(1-T) a_S - sqrt(T) a_P`, so that input creation
//! operators map as
//!
//! ```text
//! a_S^dag -> sqrt(T) b^dag - sqrt(1-T) c^dag
//! a_P^dag -> -sqrt(1-T) b^dag - sqrt(T) c^dag
//! ```
//!
//! Any phase on `c` is invisible to photon counting on `b`.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::fockspace::{
    check_leak, density_from_pure, displacement_operator, ln_factorials, number_distribution,
    DensityMatrix, PhotocountDistribution, StateVector,
};

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Eigen-pairs whose joint weight falls below this are skipped when mixing
/// mixed states.
const PAIR_WEIGHT_FLOOR: f64 = 1e-12;

/// Beam-splitter power transmission `T`, in `(0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Transmission(f64);

impl Transmission {
    pub fn new(t: f64) -> Result<Self> {
        if !(t > 0.0 && t <= 1.0) {
            return Err(Error::invalid(format!("transmission {t} outside (0, 1]")));
        }
        Ok(Transmission(t))
    }

    pub fn value(&self) -> f64 {
        self.0
    }

    fn require_mixing(&self) -> Result<()> {
        if self.0 >= 1.0 {
            return Err(Error::invalid(
                "two-mode mixing needs T < 1; use the displaced-loss shortcut for T = 1",
            ));
        }
        Ok(())
    }
}

/// Detector quantum efficiency `eta`, in `(0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Efficiency(f64);

impl Efficiency {
    pub const UNIT: Efficiency = Efficiency(1.0);

    pub fn new(eta: f64) -> Result<Self> {
        if !(eta > 0.0 && eta <= 1.0) {
            return Err(Error::invalid(format!("efficiency {eta} outside (0, 1]")));
        }
        Ok(Efficiency(eta))
    }

    pub fn value(&self) -> f64 {
        self.0
    }
}

/// Output of the beam splitter; `amplitudes[(m, n)]` has `m` photons in the
/// counted port and `n` in the discarded one.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoModePureState {
    amplitudes: DMatrix<C64>,
    tolerance: f64,
}

impl TwoModePureState {
    pub fn amplitudes(&self) -> &DMatrix<C64> {
        &self.amplitudes
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|z| z.norm_sqr()).sum()
    }
}

/// Beam splitter at fixed `T` and cutoff, with the image of every input
/// `|p>_S |q>_P` (`p, q < dim`) precomputed.
///
/// Images are built by applying the transformed creation operators one
/// photon at a time, which only ever multiplies by `sqrt(k)` factors and
/// avoids the cancelling binomial sums of the closed form.
#[derive(Debug, Clone)]
pub struct BeamSplitter {
    t: f64,
    dim: usize,
    // images[p * dim + q][m] = <m, p+q-m | B | p, q>
    images: Vec<Vec<f64>>,
}

impl BeamSplitter {
    pub fn new(t: Transmission, dim: usize) -> Result<Self> {
        t.require_mixing()?;
        let tr = t.value().sqrt();
        let rf = (1.0 - t.value()).sqrt();
        let mut images: Vec<Vec<f64>> = vec![Vec::new(); dim * dim];
        images[0] = vec![1.0];
        for q in 1..dim {
            images[q] = raise(&images[q - 1], -rf, -tr, 1.0 / (q as f64).sqrt());
        }
        for p in 1..dim {
            for q in 0..dim {
                images[p * dim + q] =
                    raise(&images[(p - 1) * dim + q], tr, -rf, 1.0 / (p as f64).sqrt());
            }
        }
        Ok(BeamSplitter {
            t: t.value(),
            dim,
            images,
        })
    }

    pub fn transmission(&self) -> f64 {
        self.t
    }

    /// `<m, N-m| B |p, N-p>` for total photon number `N`.
    pub fn block_element(&self, total: usize, m: usize, p: usize) -> f64 {
        let q = total - p;
        self.images[p * self.dim + q][m]
    }

    pub fn apply(&self, psi_s: &StateVector, psi_p: &StateVector) -> Result<TwoModePureState> {
        let (out, leaked) = self.apply_with_leak(psi_s, psi_p)?;
        check_leak("beam splitter output beyond cutoff", leaked, out.tolerance)?;
        Ok(out)
    }

    /// Output amplitudes inside the window plus the probability that fell
    /// outside it, without judging the latter.
    fn apply_with_leak(
        &self,
        psi_s: &StateVector,
        psi_p: &StateVector,
    ) -> Result<(TwoModePureState, f64)> {
        psi_s.cutoff().ensure_same(&psi_p.cutoff())?;
        if psi_s.cutoff().dim() != self.dim {
            return Err(Error::CutoffMismatch {
                left: psi_s.cutoff().dim(),
                right: self.dim,
            });
        }
        let dim = self.dim;
        let tolerance = psi_s.cutoff().tolerance();
        let (a, b) = (psi_s.amplitudes(), psi_p.amplitudes());
        let mut out = DMatrix::<C64>::zeros(dim, dim);
        let mut leaked = 0.0;
        // accumulate per total photon number so overflow outside the dim x dim
        // window can be measured
        for total in 0..(2 * dim - 1) {
            let p_lo = total.saturating_sub(dim - 1);
            let p_hi = total.min(dim - 1);
            let mut block = vec![C64::new(0.0, 0.0); total + 1];
            for p in p_lo..=p_hi {
                let amp = a[p] * b[total - p];
                if amp == C64::new(0.0, 0.0) {
                    continue;
                }
                for (m, v) in self.images[p * dim + total - p].iter().enumerate() {
                    block[m] += amp * *v;
                }
            }
            for (m, z) in block.into_iter().enumerate() {
                let n = total - m;
                if m < dim && n < dim {
                    out[(m, n)] = z;
                } else {
                    leaked += z.norm_sqr();
                }
            }
        }
        Ok((
            TwoModePureState {
                amplitudes: out,
                tolerance,
            },
            leaked,
        ))
    }
}

/// `(u b^dag + v c^dag) * scale` acting on a block of `N` photons, indexed
/// by the counted-mode occupation `m`.
fn raise(prev: &[f64], u: f64, v: f64, scale: f64) -> Vec<f64> {
    let total = prev.len(); // new block has N = prev.len() photons
    let mut out = vec![0.0; total + 1];
    for m in 0..=total {
        let mut acc = 0.0;
        if m > 0 {
            acc += u * (m as f64).sqrt() * prev[m - 1];
        }
        if m < total {
            acc += v * ((total - m) as f64).sqrt() * prev[m];
        }
        out[m] = acc * scale;
    }
    out
}

/// Mixes two pure single-mode states on a beam splitter of transmission `T < 1`.
pub fn beam_splitter_pure(
    psi_s: &StateVector,
    psi_p: &StateVector,
    t: Transmission,
) -> Result<TwoModePureState> {
    BeamSplitter::new(t, psi_s.cutoff().dim())?.apply(psi_s, psi_p)
}

/// Photocount law of the counted port, tracing out the discarded one.
pub fn counted_mode_distribution(two_mode: &TwoModePureState) -> Result<PhotocountDistribution> {
    let dim = two_mode.amplitudes.nrows();
    let p = (0..dim)
        .map(|m| {
            two_mode
                .amplitudes
                .row(m)
                .iter()
                .map(|z| z.norm_sqr())
                .sum()
        })
        .collect();
    PhotocountDistribution::with_tolerance(p, two_mode.tolerance)
}

/// Counted-port photocount law for uncorrelated mixed inputs, by mixing every
/// pair of eigenvectors and weighting with the product of eigenvalues.
pub fn mixed_counted_distribution(
    rho_s: &DensityMatrix,
    rho_p: &DensityMatrix,
    t: Transmission,
) -> Result<PhotocountDistribution> {
    rho_s.cutoff().ensure_same(&rho_p.cutoff())?;
    let cutoff = rho_s.cutoff();
    let dim = cutoff.dim();
    let splitter = BeamSplitter::new(t, dim)?;
    let signal = eigen_mixture(rho_s)?;
    let probe = eigen_mixture(rho_p)?;

    let pairs: Vec<(usize, usize)> = (0..signal.len())
        .flat_map(|i| (0..probe.len()).map(move |j| (i, j)))
        .filter(|&(i, j)| signal[i].0 * probe[j].0 >= PAIR_WEIGHT_FLOOR)
        .collect();
    let dropped: f64 = rho_s.trace() * rho_p.trace()
        - pairs
            .iter()
            .map(|&(i, j)| signal[i].0 * probe[j].0)
            .sum::<f64>();
    if dropped > cutoff.tolerance() {
        log::warn!("eigen-pair truncation dropped {dropped:.3e} of probability");
    }

    // leakage is judged on the mixture, so rare high-photon pairs may spill
    let run = |&(i, j): &(usize, usize)| -> Result<(Vec<f64>, f64)> {
        let (ws, ref vs) = signal[i];
        let (wp, ref vp) = probe[j];
        let (out, leaked) = splitter.apply_with_leak(vs, vp)?;
        let w = ws * wp;
        let marginal = out
            .amplitudes
            .row_iter()
            .map(|row| w * row.iter().map(|z| z.norm_sqr()).sum::<f64>())
            .collect();
        Ok((marginal, w * leaked))
    };
    #[cfg(feature = "parallel")]
    let parts: Vec<Result<(Vec<f64>, f64)>> = pairs.par_iter().map(run).collect();
    #[cfg(not(feature = "parallel"))]
    let parts: Vec<Result<(Vec<f64>, f64)>> = pairs.iter().map(run).collect();

    let mut p = vec![0.0; dim];
    let mut leaked = 0.0;
    for part in parts {
        let (marginal, spill) = part?;
        leaked += spill;
        for (acc, v) in p.iter_mut().zip(marginal) {
            *acc += v;
        }
    }
    check_leak(
        "beam splitter output beyond cutoff",
        leaked,
        cutoff.tolerance(),
    )?;
    PhotocountDistribution::with_tolerance(p, cutoff.tolerance())
}

/// Eigenvalues (clamped at zero) and normalized eigenvectors of `rho`.
fn eigen_mixture(rho: &DensityMatrix) -> Result<Vec<(f64, StateVector)>> {
    let cutoff = rho.cutoff();
    let eig = rho.elements().clone().symmetric_eigen();
    let mut out = Vec::new();
    for (k, &lambda) in eig.eigenvalues.iter().enumerate() {
        if lambda < -1e-10 {
            return Err(Error::Integrity(format!(
                "density matrix has negative eigenvalue {lambda:e}"
            )));
        }
        if lambda <= 0.0 {
            continue;
        }
        let v = eig.eigenvectors.column(k).into_owned();
        out.push((lambda, StateVector::from_parts_unchecked(v, cutoff)));
    }
    out.sort_by(|a, b| b.0.total_cmp(&a.0));
    Ok(out)
}

/// Binomial thinning of photon counts: every photon survives with
/// probability `eta`, `p'_k = sum_{n>=k} C(n,k) eta^k (1-eta)^(n-k) p_n`.
pub fn loss_channel(p: &PhotocountDistribution, eta: Efficiency) -> PhotocountDistribution {
    let eta = eta.value();
    if eta == 1.0 {
        return p.clone();
    }
    let len = p.len();
    let ln_fact = ln_factorials(len);
    let (ln_e, ln_1me) = (eta.ln(), (1.0 - eta).ln());
    let mut out = vec![0.0; len];
    for (n, &pn) in p.probabilities().iter().enumerate() {
        if pn == 0.0 {
            continue;
        }
        for (k, slot) in out.iter_mut().enumerate().take(n + 1) {
            let ln_b = ln_fact[n] - ln_fact[k] - ln_fact[n - k];
            *slot += pn * (ln_b + k as f64 * ln_e + (n - k) as f64 * ln_1me).exp();
        }
    }
    PhotocountDistribution::with_tolerance(out, p.tolerance())
        .expect("thinning preserves a valid distribution")
}

/// Parity expectation `sum (-1)^n p_n` of a photocount distribution.
pub fn pi_expectation(p: &PhotocountDistribution) -> f64 {
    p.probabilities()
        .iter()
        .enumerate()
        .map(|(n, pn)| if n % 2 == 0 { *pn } else { -*pn })
        .sum()
}

/// State-level attenuation to transmission `T` through Kraus operators
/// `A_k |n> = sqrt(C(n,k) T^(n-k) (1-T)^k) |n-k>`.
pub fn quantum_attenuate(rho: &DensityMatrix, t: Transmission) -> DensityMatrix {
    let t = t.value();
    if t == 1.0 {
        return rho.clone();
    }
    let dim = rho.dim();
    let e = rho.elements();
    let ln_fact = ln_factorials(dim);
    let (ln_t, ln_r) = (t.ln(), (1.0 - t).ln());
    // amp[n][k] = sqrt(C(n,k) T^(n-k) (1-T)^k)
    let amp = |n: usize, k: usize| -> f64 {
        (0.5 * (ln_fact[n] - ln_fact[k] - ln_fact[n - k] + (n - k) as f64 * ln_t + k as f64 * ln_r))
            .exp()
    };
    let mut out = DMatrix::<C64>::zeros(dim, dim);
    for i in 0..dim {
        for j in 0..dim {
            let kmax = dim - i.max(j);
            let mut acc = C64::new(0.0, 0.0);
            for k in 0..kmax {
                acc += e[(i + k, j + k)] * (amp(i + k, k) * amp(j + k, k));
            }
            out[(i, j)] = acc;
        }
    }
    DensityMatrix::from_parts_unchecked(out, rho.cutoff())
}

/// Counted-port photocount law for a coherent probe `|alpha>`, computed on
/// the signal alone: attenuate to `T`, displace by `-sqrt(1-T) alpha`,
/// count, then thin by the detector efficiency.
///
/// `T = 1` is accepted; the probe then decouples entirely.
pub fn displaced_loss_distribution(
    rho_s: &DensityMatrix,
    alpha: C64,
    t: Transmission,
    eta: Efficiency,
) -> Result<PhotocountDistribution> {
    let attenuated = quantum_attenuate(rho_s, t);
    let shift = -alpha * (1.0 - t.value()).sqrt();
    displaced_count(&attenuated, shift, eta)
}

/// Limit of [`displaced_loss_distribution`] as `T -> 1` with
/// `sqrt((1-T)/T) alpha` held at `target`: count `D(-target) rho D(target)`
/// through the lossy detector.
pub fn limit_distribution(
    rho_s: &DensityMatrix,
    target: C64,
    eta: Efficiency,
) -> Result<PhotocountDistribution> {
    displaced_count(rho_s, -target, eta)
}

fn displaced_count(
    rho: &DensityMatrix,
    shift: C64,
    eta: Efficiency,
) -> Result<PhotocountDistribution> {
    let cutoff = rho.cutoff();
    let p = if shift == C64::new(0.0, 0.0) {
        number_distribution(rho)?
    } else {
        let d = displacement_operator(shift, cutoff);
        let dm = d.elements();
        let dr = dm * rho.elements();
        let dim = cutoff.dim();
        let mut p = Vec::with_capacity(dim);
        for n in 0..dim {
            let v: f64 = (0..dim).map(|j| (dr[(n, j)] * dm[(n, j)].conj()).re).sum();
            if v < -1e-10 {
                return Err(Error::Integrity(format!(
                    "negative population p[{n}] = {v:e}"
                )));
            }
            p.push(v.max(0.0));
        }
        let leaked = rho.trace() - p.iter().sum::<f64>();
        check_leak(
            format!("displacement by {shift} in {dim} levels"),
            leaked,
            cutoff.tolerance(),
        )?;
        PhotocountDistribution::with_tolerance(p, cutoff.tolerance())?
    };
    Ok(loss_channel(&p, eta))
}

/// Coherent-state density matrix, convenience for probe construction.
pub fn coherent_density(alpha: C64, cutoff: crate::fockspace::Cutoff) -> Result<DensityMatrix> {
    Ok(density_from_pure(&crate::fockspace::coherent_state(
        alpha, cutoff,
    )?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fockspace::{coherent_state, fock_state, thermal_state, Cutoff};
    use approx::assert_abs_diff_eq;
    use nalgebra::DVector;

    fn diag_vector(p: &PhotocountDistribution) -> DVector<f64> {
        DVector::from_column_slice(p.probabilities())
    }

    fn cut(dim: usize) -> Cutoff {
        Cutoff::new(dim).unwrap()
    }

    fn t(v: f64) -> Transmission {
        Transmission::new(v).unwrap()
    }

    fn eta(v: f64) -> Efficiency {
        Efficiency::new(v).unwrap()
    }

    fn dist(v: &[f64]) -> PhotocountDistribution {
        PhotocountDistribution::new(v.to_vec()).unwrap()
    }

    /// Two-mode truncated exp(theta (a_P^dag a_S - a_S^dag a_P)), followed by
    /// parity on the discarded mode; index = m * dim + n.
    fn two_mode_oracle(tr: f64, dim: usize) -> DMatrix<f64> {
        let theta = (1.0 - tr).sqrt().atan2(tr.sqrt());
        let idx = |m: usize, n: usize| m * dim + n;
        let mut gen = DMatrix::<f64>::zeros(dim * dim, dim * dim);
        for m in 0..dim {
            for n in 0..dim {
                // a_P^dag a_S |m, n> = sqrt(m (n+1)) |m-1, n+1>
                if m > 0 && n + 1 < dim {
                    gen[(idx(m - 1, n + 1), idx(m, n))] += theta * ((m * (n + 1)) as f64).sqrt();
                }
                if n > 0 && m + 1 < dim {
                    gen[(idx(m + 1, n - 1), idx(m, n))] -= theta * ((n * (m + 1)) as f64).sqrt();
                }
            }
        }
        let squarings = 8;
        let a = gen / f64::from(1u32 << squarings);
        let mut term = DMatrix::<f64>::identity(dim * dim, dim * dim);
        let mut sum = term.clone();
        for j in 1..25 {
            term = &term * &a / j as f64;
            sum += &term;
        }
        for _ in 0..squarings {
            sum = &sum * &sum;
        }
        for m in 0..dim {
            for n in 0..dim {
                if n % 2 == 1 {
                    sum.row_mut(idx(m, n)).neg_mut();
                }
            }
        }
        sum
    }

    #[test]
    fn mixture_leak_is_weighted_by_pair_probability() {
        let dim = 24;
        let rho_s = thermal_state(0.5, cut(dim)).unwrap();
        let rho_p = density_from_pure(&coherent_state(C64::new(1.0, 0.0), cut(dim)).unwrap());
        let p = mixed_counted_distribution(&rho_s, &rho_p, t(0.5)).unwrap();
        assert_abs_diff_eq!(p.total(), 1.0, epsilon = 1e-8);
        // the top eigen-pair alone spills far more than the tolerance
        let top = fock_state(dim - 1, cut(dim)).unwrap();
        let probe = coherent_state(C64::new(1.0, 0.0), cut(dim)).unwrap();
        assert!(matches!(
            beam_splitter_pure(&top, &probe, t(0.5)),
            Err(Error::Truncation { .. })
        ));
    }

    #[test]
    fn parameter_ranges() {
        assert!(Transmission::new(0.0).is_err());
        assert!(Transmission::new(1.0001).is_err());
        assert!(Transmission::new(1.0).is_ok());
        assert!(Efficiency::new(0.0).is_err());
        assert!(Efficiency::new(f64::NAN).is_err());
        assert!(BeamSplitter::new(t(1.0), 4).is_err());
    }

    #[test]
    fn vacuum_in_vacuum_out() {
        let c = cut(5);
        let vac = fock_state(0, c).unwrap();
        for tv in [0.1, 0.5, 0.9] {
            let out = beam_splitter_pure(&vac, &vac, t(tv)).unwrap();
            assert_eq!(out.amplitudes()[(0, 0)], C64::new(1.0, 0.0));
            assert_abs_diff_eq!(out.norm_sqr(), 1.0, epsilon = 1e-15);
            let p = counted_mode_distribution(&out).unwrap();
            assert_eq!(p.get(0), 1.0);
        }
    }

    #[test]
    fn single_photon_amplitudes() {
        let c = cut(4);
        let one = fock_state(1, c).unwrap();
        let vac = fock_state(0, c).unwrap();
        for tv in [0.25, 0.5, 0.8] {
            let out = beam_splitter_pure(&one, &vac, t(tv)).unwrap();
            assert_abs_diff_eq!(out.amplitudes()[(1, 0)].re, tv.sqrt(), epsilon = 1e-15);
            assert_abs_diff_eq!(
                out.amplitudes()[(0, 1)].re,
                -(1.0 - tv).sqrt(),
                epsilon = 1e-15
            );
            let p = counted_mode_distribution(&out).unwrap();
            assert_abs_diff_eq!(p.get(1), tv, epsilon = 1e-15);
            assert_abs_diff_eq!(p.get(0), 1.0 - tv, epsilon = 1e-15);
            assert_abs_diff_eq!(p.total(), out.norm_sqr(), epsilon = 1e-12);
        }
    }

    #[test]
    fn matches_exponential_oracle_and_conserves_photons() {
        for dim in 2..=6 {
            for tv in [0.3, 0.5, 0.85] {
                let bs = BeamSplitter::new(t(tv), dim).unwrap();
                let big = dim + 6;
                let oracle = two_mode_oracle(tv, big);
                for p in 0..dim {
                    for q in 0..dim {
                        for m in 0..dim {
                            for n in 0..dim {
                                let ours = if m + n == p + q {
                                    bs.block_element(p + q, m, p)
                                } else {
                                    0.0
                                };
                                let want = oracle[(m * big + n, p * big + q)];
                                assert!(
                                    (ours - want).abs() < 1e-10,
                                    "dim {dim} T {tv}: <{m},{n}|B|{p},{q}> {ours} vs {want}"
                                );
                            }
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn blocks_are_unitary() {
        for dim in 1..=8 {
            let bs = BeamSplitter::new(t(0.37), dim).unwrap();
            for total in 0..dim {
                let b =
                    DMatrix::from_fn(total + 1, total + 1, |m, p| bs.block_element(total, m, p));
                let dev = (b.transpose() * &b - DMatrix::identity(total + 1, total + 1)).camax();
                assert!(dev < 1e-10, "block {total}: {dev:e}");
            }
        }
    }

    #[test]
    fn high_photon_blocks_stay_unitary() {
        let bs = BeamSplitter::new(t(0.5), 41).unwrap();
        let total = 40;
        let b = DMatrix::from_fn(total + 1, total + 1, |m, p| bs.block_element(total, m, p));
        assert!((b.transpose() * &b - DMatrix::identity(total + 1, total + 1)).camax() < 1e-10);
    }

    #[test]
    fn beam_splitter_reports_overflow() {
        let c = cut(6);
        let psi = fock_state(5, c).unwrap();
        let err = beam_splitter_pure(&psi, &psi, t(0.5)).unwrap_err();
        assert!(matches!(err, Error::Truncation { .. }));
    }

    #[test]
    fn pure_inputs_reduce_to_pure_path() {
        let c = cut(16);
        let s = coherent_state(C64::new(0.5, 0.2), c).unwrap();
        let p = fock_state(2, c).unwrap();
        let direct =
            counted_mode_distribution(&beam_splitter_pure(&s, &p, t(0.6)).unwrap()).unwrap();
        let mixed =
            mixed_counted_distribution(&density_from_pure(&s), &density_from_pure(&p), t(0.6))
                .unwrap();
        for n in 0..16 {
            assert_abs_diff_eq!(direct.get(n), mixed.get(n), epsilon = 1e-12);
        }
    }

    #[test]
    fn lossy_thermal_stays_thermal() {
        let c = cut(40);
        let vac = density_from_pure(&fock_state(0, c).unwrap());
        for (nbar, tv) in [(0.5, 0.3), (1.0, 0.7)] {
            let p =
                mixed_counted_distribution(&thermal_state(nbar, c).unwrap(), &vac, t(tv)).unwrap();
            let want = number_distribution(&thermal_state(tv * nbar, c).unwrap()).unwrap();
            assert!(p.total_variation(&want) < 1e-9);
        }
    }

    #[test]
    fn swapping_ports_is_invisible_to_counting() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand::rngs::StdRng::seed_from_u64(7);
        let c = cut(8);
        let random_state = |rng: &mut rand::rngs::StdRng| -> DensityMatrix {
            let mut m = DMatrix::<C64>::zeros(8, 8);
            for _ in 0..2 {
                let v: Vec<C64> = (0..8)
                    .map(|n| {
                        C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
                            * 0.5f64.powi(n)
                    })
                    .collect();
                let v = DVector::from_vec(v);
                let v = &v / C64::new(v.norm(), 0.0);
                m += &v * v.adjoint() * C64::new(0.5, 0.0);
            }
            DensityMatrix::from_elements(m, c).unwrap()
        };
        for _ in 0..5 {
            let a = random_state(&mut rng);
            let b = random_state(&mut rng);
            let tv: f64 = rng.random_range(0.1..0.9);
            // with tiny weights leaking past dim 8, compare on the retained window
            let c16 = cut(16).with_tolerance(1e-3).unwrap();
            let pad = |r: &DensityMatrix| {
                let mut m = DMatrix::<C64>::zeros(16, 16);
                m.view_mut((0, 0), (8, 8)).copy_from(r.elements());
                DensityMatrix::from_elements(m, c16).unwrap()
            };
            let (a, b) = (pad(&a), pad(&b));
            let forward = mixed_counted_distribution(&a, &b, t(tv)).unwrap();
            let swapped = mixed_counted_distribution(&b, &a, t(1.0 - tv)).unwrap();
            assert!(forward.total_variation(&swapped) < 1e-12);
        }
    }

    #[test]
    fn loss_channel_examples() {
        let p = dist(&[0.1, 0.2, 0.3, 0.4]);
        assert_eq!(loss_channel(&p, Efficiency::UNIT), p);
        let one = dist(&[0.0, 1.0, 0.0, 0.0]);
        let out = loss_channel(&one, eta(0.8));
        assert_abs_diff_eq!(out.get(0), 0.2, epsilon = 1e-15);
        assert_abs_diff_eq!(out.get(1), 0.8, epsilon = 1e-15);
        assert_eq!(out.get(2), 0.0);
    }

    #[test]
    fn loss_thins_poisson() {
        let poisson = |mu: f64, len: usize| {
            let mut v = Vec::new();
            let mut term = (-mu).exp();
            for n in 0..len {
                v.push(term);
                term *= mu / (n + 1) as f64;
            }
            dist(&v)
        };
        let thinned = loss_channel(&poisson(3.0, 40), eta(0.6));
        assert!(thinned.total_variation(&poisson(1.8, 40)) < 1e-12);
    }

    #[test]
    fn parity_examples() {
        assert_eq!(pi_expectation(&dist(&[1.0, 0.0, 0.0])), 1.0);
        assert_abs_diff_eq!(pi_expectation(&dist(&[0.2, 0.8])), -0.6, epsilon = 1e-15);
        let mu: f64 = 1.3;
        let mut v = Vec::new();
        let mut term = (-mu).exp();
        for n in 0..40 {
            v.push(term);
            term *= mu / (n + 1) as f64;
        }
        assert_abs_diff_eq!(
            pi_expectation(&dist(&v)),
            (-2.0 * mu).exp(),
            epsilon = 1e-14
        );
    }

    #[test]
    fn attenuation_examples() {
        let c = cut(30);
        let rho = coherent_density(C64::new(1.0, -0.5), c).unwrap();
        assert_eq!(quantum_attenuate(&rho, t(1.0)), rho);
        let out = quantum_attenuate(&rho, t(0.6));
        let want = coherent_density(C64::new(1.0, -0.5) * 0.6f64.sqrt(), c).unwrap();
        assert!((out.elements() - want.elements()).camax() < 1e-8);
        assert_abs_diff_eq!(out.trace(), rho.trace(), epsilon = 1e-12);

        let th = thermal_state(0.8, cut(60)).unwrap();
        let diag_first = number_distribution(&quantum_attenuate(&th, t(0.4))).unwrap();
        let loss_first = loss_channel(&number_distribution(&th).unwrap(), eta(0.4));
        assert!((diag_vector(&diag_first) - diag_vector(&loss_first)).camax() < 1e-14);
    }

    #[test]
    fn shortcut_without_probe_matches_two_mode_route() {
        let c = cut(16);
        let vac = density_from_pure(&fock_state(0, c).unwrap());
        for n in 0..4 {
            let rho = density_from_pure(&fock_state(n, c).unwrap());
            for tv in [0.3, 0.75] {
                let a =
                    displaced_loss_distribution(&rho, C64::new(0.0, 0.0), t(tv), Efficiency::UNIT)
                        .unwrap();
                let b = mixed_counted_distribution(&rho, &vac, t(tv)).unwrap();
                for k in 0..16 {
                    assert_abs_diff_eq!(a.get(k), b.get(k), epsilon = 1e-10);
                }
            }
        }
    }

    #[test]
    fn unit_transmission_decouples_probe() {
        let c = cut(20);
        let rho = thermal_state(0.4, c).unwrap();
        let a = displaced_loss_distribution(&rho, C64::new(3.0, 1.0), t(1.0), eta(0.7)).unwrap();
        let b = loss_channel(&number_distribution(&rho).unwrap(), eta(0.7));
        assert_eq!(a, b);
    }

    #[test]
    fn shortcut_matches_coherent_probe_mixing() {
        let c = cut(20).with_tolerance(1e-7).unwrap();
        let signal = density_from_pure(&fock_state(1, c).unwrap());
        for alpha in [C64::new(0.5, 0.0), C64::new(1.0, 1.0), C64::new(0.0, -1.5)] {
            for tv in [0.5, 0.9] {
                let probe = coherent_density(alpha, c).unwrap();
                let two_mode = mixed_counted_distribution(&signal, &probe, t(tv)).unwrap();
                let shortcut =
                    displaced_loss_distribution(&signal, alpha, t(tv), Efficiency::UNIT).unwrap();
                assert!(two_mode.total_variation(&shortcut) < 1e-8, "{alpha} {tv}");
            }
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn arb_dist() -> impl Strategy<Value = PhotocountDistribution> {
            prop::collection::vec(0.0f64..1.0, 1..14).prop_map(|v| {
                let s: f64 = v.iter().sum::<f64>().max(1e-9);
                PhotocountDistribution::new(v.iter().map(|x| x / s).collect()).unwrap()
            })
        }

        proptest! {
            #[test]
            fn loss_composes(p in arb_dist(), e1 in 0.05f64..1.0, e2 in 0.05f64..1.0) {
                let a = loss_channel(&loss_channel(&p, eta(e1)), eta(e2));
                let b = loss_channel(&p, eta(e1 * e2));
                prop_assert!((diag_vector(&a) - diag_vector(&b)).camax() < 1e-12);
            }

            #[test]
            fn parity_bounded_by_total(p in arb_dist()) {
                prop_assert!(pi_expectation(&p).abs() <= p.total() + 1e-15);
            }

            #[test]
            fn loss_preserves_total(p in arb_dist(), e in 0.05f64..1.0) {
                prop_assert!((loss_channel(&p, eta(e)).total() - p.total()).abs() < 1e-12);
            }
        }
    }
}
