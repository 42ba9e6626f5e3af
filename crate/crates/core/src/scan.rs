//! Experiment orchestration: configuration, the per-point pipeline and
//! machine-readable output.
//!
//! Every grid point is an independent work item. Its Monte Carlo draws come
//! from the RNG stream keyed by its grid index, so results do not depend on
//! scheduling or thread count.

use std::f64::consts::PI;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use thiserror::Error as ThisError;

use crate::error::Error;
use crate::fockspace::{
    coherent_state, density_from_pure, fock_state, heuristic_dim, thermal_state, Cutoff,
    DensityMatrix, DEFAULT_TRUNCATION_TOLERANCE,
};
use crate::optics::{displaced_loss_distribution, limit_distribution, Efficiency, Transmission};
use crate::quasiprob::{quasi_s, OrderingParameter, PhasePoint};
use crate::sampling::{
    analytic_moments, compensation_base, sample_photocounts, weighted_series_estimate, SeedSpec,
    RNG_ALGORITHM,
};

/// Extra Fock levels added on top of the amplitude heuristic by `"auto"`.
pub const AUTO_CUTOFF_HEADROOM: usize = 8;

#[derive(Debug, ThisError)]
pub enum ScanError {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("grid point {index} (alpha = {alpha}): {source}")]
    AtPoint {
        index: usize,
        alpha: C64,
        #[source]
        source: Error,
    },

    #[error(transparent)]
    Numerical(Error),

    #[error("I/O: {0}")]
    Io(#[from] io::Error),
}

impl ScanError {
    /// Process exit code: 2 configuration, 3 numerical, 4 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            ScanError::Config(_) => 2,
            ScanError::AtPoint { source, .. } | ScanError::Numerical(source) => match source {
                Error::InvalidParameter(_) => 2,
                _ => 3,
            },
            ScanError::Io(_) => 4,
        }
    }
}

impl From<serde_json::Error> for ScanError {
    fn from(e: serde_json::Error) -> Self {
        if e.is_io() {
            ScanError::Io(e.into())
        } else {
            ScanError::Config(e.to_string())
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum SignalSpec {
    Fock { n: usize },
    Coherent { alpha: [f64; 2] },
    Thermal { nbar: f64 },
}

impl SignalSpec {
    fn amplitude_scale(&self) -> f64 {
        match *self {
            SignalSpec::Fock { n } => (n as f64).sqrt(),
            SignalSpec::Coherent { alpha } => C64::new(alpha[0], alpha[1]).norm(),
            SignalSpec::Thermal { nbar } => nbar.max(0.0).sqrt(),
        }
    }

    pub fn density(&self, cutoff: Cutoff) -> crate::Result<DensityMatrix> {
        match *self {
            SignalSpec::Fock { n } => Ok(density_from_pure(&fock_state(n, cutoff)?)),
            SignalSpec::Coherent { alpha } => Ok(density_from_pure(&coherent_state(
                C64::new(alpha[0], alpha[1]),
                cutoff,
            )?)),
            SignalSpec::Thermal { nbar } => thermal_state(nbar, cutoff),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LimitToken {
    Limit,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AutoToken {
    Auto,
}

/// Beam-splitter transmission, or `"limit"` for the `T -> 1` shortcut.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TransmissionSpec {
    Value(f64),
    Limit(LimitToken),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CutoffSpec {
    Levels(usize),
    Auto(AutoToken),
}

/// Probe amplitudes to visit, in grid-index order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum GridSpec {
    /// `steps` amplitudes `r e^{i phase}` evenly spaced from `r_min` to `r_max`.
    Radial {
        #[serde(default)]
        phase: f64,
        r_min: f64,
        r_max: f64,
        steps: usize,
    },
    /// Row-major Cartesian grid, imaginary part outer.
    Cartesian {
        re_min: f64,
        re_max: f64,
        steps_re: usize,
        im_min: f64,
        im_max: f64,
        steps_im: usize,
    },
}

fn linspace(lo: f64, hi: f64, steps: usize) -> impl Iterator<Item = f64> {
    (0..steps).map(move |k| {
        if steps == 1 {
            lo
        } else {
            lo + (hi - lo) * k as f64 / (steps - 1) as f64
        }
    })
}

impl GridSpec {
    pub fn amplitudes(&self) -> Vec<C64> {
        match *self {
            GridSpec::Radial {
                phase,
                r_min,
                r_max,
                steps,
            } => linspace(r_min, r_max, steps)
                .map(|r| C64::from_polar(r, phase))
                .collect(),
            GridSpec::Cartesian {
                re_min,
                re_max,
                steps_re,
                im_min,
                im_max,
                steps_im,
            } => linspace(im_min, im_max, steps_im)
                .flat_map(|im| linspace(re_min, re_max, steps_re).map(move |re| C64::new(re, im)))
                .collect(),
        }
    }

    fn validate(&self) -> Result<(), ScanError> {
        let ok = match *self {
            GridSpec::Radial {
                phase,
                r_min,
                r_max,
                steps,
            } => steps >= 1 && [phase, r_min, r_max].iter().all(|v| v.is_finite()),
            GridSpec::Cartesian {
                re_min,
                re_max,
                steps_re,
                im_min,
                im_max,
                steps_im,
            } => {
                steps_re >= 1
                    && steps_im >= 1
                    && [re_min, re_max, im_min, im_max]
                        .iter()
                        .all(|v| v.is_finite())
            }
        };
        if ok {
            Ok(())
        } else {
            Err(ScanError::Config(
                "grid needs finite bounds and at least one step per axis".into(),
            ))
        }
    }
}

/// One reconstruction experiment, as read from a JSON document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanConfig {
    pub signal: SignalSpec,
    pub transmission: TransmissionSpec,
    /// Limit mode only: factor mapping grid amplitudes onto the rescaled
    /// phase-space axis, `target = limit_scale * alpha`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub limit_scale: Option<f64>,
    pub efficiency: f64,
    #[serde(default)]
    pub compensate: bool,
    pub grid: GridSpec,
    pub events: usize,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default = "default_cutoff")]
    pub cutoff: CutoffSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truncation_tolerance: Option<f64>,
}

fn default_cutoff() -> CutoffSpec {
    CutoffSpec::Auto(AutoToken::Auto)
}

impl ScanConfig {
    pub fn from_json(text: &str) -> Result<Self, ScanError> {
        serde_json::from_str(text).map_err(|e| ScanError::Config(e.to_string()))
    }

    pub fn from_path(path: &Path) -> Result<Self, ScanError> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }
}

/// Coupling of the probe amplitude to the scanned phase-space point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Mode {
    Finite(Transmission),
    Limit { scale: f64 },
}

impl Mode {
    /// Rescaled phase-space point `sqrt((1-T)/T) alpha` sampled by amplitude `alpha`.
    pub fn target(&self, alpha: C64) -> C64 {
        match *self {
            Mode::Finite(t) => alpha * ((1.0 - t.value()) / t.value()).sqrt(),
            Mode::Limit { scale } => alpha * scale,
        }
    }

    fn ordering(&self) -> OrderingParameter {
        match *self {
            Mode::Finite(t) => {
                OrderingParameter::from_transmission(t.value()).expect("validated transmission")
            }
            Mode::Limit { .. } => OrderingParameter::WIGNER,
        }
    }

    fn parity_prefactor(&self) -> f64 {
        match *self {
            Mode::Finite(t) => PI / (2.0 * t.value()),
            Mode::Limit { .. } => PI / 2.0,
        }
    }
}

/// Validated configuration with every derived quantity resolved.
#[derive(Debug, Clone)]
pub struct ScanPlan {
    pub config: ScanConfig,
    pub mode: Mode,
    pub efficiency: Efficiency,
    pub cutoff: Cutoff,
    pub amplitudes: Vec<C64>,
    pub base: f64,
    signal: DensityMatrix,
}

impl ScanPlan {
    pub fn new(config: ScanConfig) -> Result<Self, ScanError> {
        let cfg_err = |e: Error| ScanError::Config(e.to_string());
        config.grid.validate()?;
        let mode = match config.transmission {
            TransmissionSpec::Value(t) => {
                let t = Transmission::new(t).map_err(cfg_err)?;
                if t.value() >= 1.0 {
                    return Err(ScanError::Config("use \"limit\" rather than T = 1".into()));
                }
                Mode::Finite(t)
            }
            TransmissionSpec::Limit(_) => {
                let scale = config.limit_scale.unwrap_or(1.0);
                if !(scale.is_finite() && scale > 0.0) {
                    return Err(ScanError::Config(format!(
                        "limit_scale {scale} must be positive"
                    )));
                }
                Mode::Limit { scale }
            }
        };
        if config.limit_scale.is_some() && matches!(mode, Mode::Finite(_)) {
            return Err(ScanError::Config(
                "limit_scale only applies with transmission \"limit\"".into(),
            ));
        }
        let efficiency = Efficiency::new(config.efficiency).map_err(cfg_err)?;
        match config.signal {
            SignalSpec::Thermal { nbar } if !(nbar.is_finite() && nbar >= 0.0) => {
                return Err(ScanError::Config(format!("thermal nbar {nbar}")));
            }
            SignalSpec::Coherent { alpha } if !alpha.iter().all(|v| v.is_finite()) => {
                return Err(ScanError::Config(
                    "coherent amplitude must be finite".into(),
                ));
            }
            _ => {}
        }
        let amplitudes = config.grid.amplitudes();
        let tolerance = config
            .truncation_tolerance
            .unwrap_or(DEFAULT_TRUNCATION_TOLERANCE);
        let dim = match config.cutoff {
            CutoffSpec::Levels(dim) => dim,
            CutoffSpec::Auto(_) => auto_cutoff(&config.signal, &amplitudes, mode, tolerance),
        };
        let cutoff = Cutoff::new(dim)
            .and_then(|c| c.with_tolerance(tolerance))
            .map_err(cfg_err)?;
        let signal = config
            .signal
            .density(cutoff)
            .map_err(ScanError::Numerical)?;
        let base = if config.compensate {
            compensation_base(efficiency)
        } else {
            -1.0
        };
        Ok(ScanPlan {
            config,
            mode,
            efficiency,
            cutoff,
            amplitudes,
            base,
            signal,
        })
    }

    pub fn signal(&self) -> &DensityMatrix {
        &self.signal
    }

    fn evaluate_point(&self, index: usize) -> Result<ScanRow, ScanError> {
        let alpha = self.amplitudes[index];
        let at_point = |source: Error| ScanError::AtPoint {
            index,
            alpha,
            source,
        };
        let target = self.mode.target(alpha);
        let dist = match self.mode {
            Mode::Finite(t) => displaced_loss_distribution(&self.signal, alpha, t, self.efficiency),
            Mode::Limit { .. } => limit_distribution(&self.signal, target, self.efficiency),
        }
        .map_err(at_point)?;
        let (analytic_mean, variance) = analytic_moments(&dist, self.base);
        let exact_quasi = self.mode.parity_prefactor()
            * quasi_s(&self.signal, PhasePoint(target), self.mode.ordering()).map_err(at_point)?;
        let events = self.config.events;
        let (mc_mean, mc_stderr) = if events > 0 {
            let seed = SeedSpec::new(self.config.master_seed, index as u64);
            let draws = sample_photocounts(&dist, events, seed).map_err(at_point)?;
            let est = weighted_series_estimate(&draws, self.base).map_err(at_point)?;
            (Some(est.mean), Some(est.stderr))
        } else {
            (None, None)
        };
        Ok(ScanRow {
            index,
            target_re: target.re,
            target_im: target.im,
            alpha_re: alpha.re,
            alpha_im: alpha.im,
            mc_mean,
            mc_stderr,
            analytic_mean,
            analytic_sigma: variance.sqrt(),
            exact_quasi,
            events,
            base: self.base,
        })
    }

    pub fn run(&self) -> Result<Vec<ScanRow>, ScanError> {
        let indices = 0..self.amplitudes.len();
        #[cfg(feature = "parallel")]
        let rows: Vec<Result<ScanRow, ScanError>> = {
            use rayon::prelude::*;
            indices
                .into_par_iter()
                .map(|i| self.evaluate_point(i))
                .collect()
        };
        #[cfg(not(feature = "parallel"))]
        let rows: Vec<Result<ScanRow, ScanError>> =
            indices.map(|i| self.evaluate_point(i)).collect();
        rows.into_iter().collect()
    }

    /// [`ScanPlan::run`] on a dedicated pool of `threads` workers.
    #[cfg(feature = "parallel")]
    pub fn run_with_threads(&self, threads: usize) -> Result<Vec<ScanRow>, ScanError> {
        if threads == 0 {
            return Err(ScanError::Config("thread count must be positive".into()));
        }
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| ScanError::Config(format!("thread pool: {e}")))?;
        pool.install(|| self.run())
    }
}

/// Amplitude heuristic applied to the signal scale plus the largest
/// displacement on the grid, plus [`AUTO_CUTOFF_HEADROOM`] levels. Thermal
/// signals additionally reserve room for their geometric tail.
pub fn auto_cutoff(signal: &SignalSpec, amplitudes: &[C64], mode: Mode, tolerance: f64) -> usize {
    let max_shift = amplitudes
        .iter()
        .map(|&a| mode.target(a).norm())
        .fold(0.0, f64::max);
    let reach = signal.amplitude_scale() + max_shift;
    let mut dim = heuristic_dim(reach * reach) + AUTO_CUTOFF_HEADROOM;
    if let SignalSpec::Thermal { nbar } = *signal {
        if nbar > 0.0 {
            let ratio = nbar / (1.0 + nbar);
            dim += (tolerance.ln() / ratio.ln()).ceil() as usize;
        }
    }
    dim
}

/// One row of a reconstruction scan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanRow {
    pub index: usize,
    pub target_re: f64,
    pub target_im: f64,
    pub alpha_re: f64,
    pub alpha_im: f64,
    pub mc_mean: Option<f64>,
    pub mc_stderr: Option<f64>,
    pub analytic_mean: f64,
    pub analytic_sigma: f64,
    pub exact_quasi: f64,
    pub events: usize,
    pub base: f64,
}

impl ScanRow {
    pub const CSV_HEADER: &'static str = "index,target_re,target_im,alpha_re,alpha_im,mc_mean,mc_stderr,analytic_mean,analytic_sigma,exact_quasi,events,base";

    fn csv_line(&self) -> String {
        let num = |x: f64| format!("{x:.16e}");
        let opt = |x: Option<f64>| x.map(num).unwrap_or_default();
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            self.index,
            num(self.target_re),
            num(self.target_im),
            num(self.alpha_re),
            num(self.alpha_im),
            opt(self.mc_mean),
            opt(self.mc_stderr),
            num(self.analytic_mean),
            num(self.analytic_sigma),
            num(self.exact_quasi),
            self.events,
            num(self.base),
        )
    }
}

pub fn run_scan(config: &ScanConfig) -> Result<Vec<ScanRow>, ScanError> {
    ScanPlan::new(config.clone())?.run()
}

/// [`run_scan`] on a dedicated pool of `threads` workers.
#[cfg(feature = "parallel")]
pub fn run_scan_with_threads(
    config: &ScanConfig,
    threads: usize,
) -> Result<Vec<ScanRow>, ScanError> {
    ScanPlan::new(config.clone())?.run_with_threads(threads)
}

/// CSV with a header row and 17 significant digits per number.
pub fn write_csv<W: Write>(rows: &[ScanRow], mut out: W) -> io::Result<()> {
    out.write_all(ScanRow::CSV_HEADER.as_bytes())?;
    out.write_all(b"\n")?;
    for row in rows {
        out.write_all(row.csv_line().as_bytes())?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

pub fn emit_csv(rows: &[ScanRow], destination: &Path) -> Result<(), ScanError> {
    write_csv(rows, BufWriter::new(File::create(destination)?))?;
    Ok(())
}

/// Configuration with the automatic choices made explicit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolvedConfig {
    #[serde(flatten)]
    pub config: ScanConfig,
    pub resolved_cutoff: usize,
    pub resolved_truncation_tolerance: f64,
    pub ordering_parameter: f64,
    pub compensation_base: f64,
    pub rng_algorithm: String,
}

impl ResolvedConfig {
    pub fn from_plan(plan: &ScanPlan) -> Self {
        let mut config = plan.config.clone();
        config.cutoff = CutoffSpec::Levels(plan.cutoff.dim());
        ResolvedConfig {
            config,
            resolved_cutoff: plan.cutoff.dim(),
            resolved_truncation_tolerance: plan.cutoff.tolerance(),
            ordering_parameter: plan.mode.ordering().value(),
            compensation_base: plan.base,
            rng_algorithm: RNG_ALGORITHM.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanDocument {
    pub config: ResolvedConfig,
    pub rows: Vec<ScanRow>,
}

pub fn write_json<W: Write>(
    rows: &[ScanRow],
    plan: &ScanPlan,
    mut out: W,
) -> Result<(), ScanError> {
    let doc = ScanDocument {
        config: ResolvedConfig::from_plan(plan),
        rows: rows.to_vec(),
    };
    serde_json::to_writer_pretty(&mut out, &doc)?;
    out.write_all(b"\n")?;
    out.flush()?;
    Ok(())
}

pub fn emit_json(rows: &[ScanRow], plan: &ScanPlan, destination: &Path) -> Result<(), ScanError> {
    write_json(rows, plan, BufWriter::new(File::create(destination)?))
}
