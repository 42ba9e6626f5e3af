//! WebAssembly bindings for the static demo page in `www/`.
//!
//! Each export is a thin wrapper over a plain function returning
//! `Result<Vec<f64>, String>`, so the numerics can be exercised natively.

use phase_sampling::fockspace::Cutoff;
use phase_sampling::optics::{limit_distribution, Efficiency};
use phase_sampling::quasiprob::{OrderingParameter, PhasePoint, QuasiMap, WignerMap};
use phase_sampling::scan::{
    auto_cutoff, AutoToken, CutoffSpec, GridSpec, LimitToken, Mode, ScanConfig, ScanPlan,
    SignalSpec, TransmissionSpec,
};
use phase_sampling::C64;
use wasm_bindgen::prelude::*;

/// Largest map edge accepted from the page.
pub const MAX_MAP_POINTS: usize = 161;

/// Values per point in the packed output of [`scan_curve`].
pub const CURVE_STRIDE: usize = 6;

fn signal(kind: &str, param: f64) -> Result<SignalSpec, String> {
    if !(param.is_finite() && param >= 0.0) {
        return Err(format!(
            "state parameter {param} must be finite and non-negative"
        ));
    }
    match kind {
        "fock" => Ok(SignalSpec::Fock {
            n: param.round() as usize,
        }),
        "coherent" => Ok(SignalSpec::Coherent {
            alpha: [param, 0.0],
        }),
        "thermal" => Ok(SignalSpec::Thermal { nbar: param }),
        other => Err(format!("unknown state kind {other:?}")),
    }
}

fn cutoff_for(spec: &SignalSpec, reach: f64) -> Result<Cutoff, String> {
    let tol = phase_sampling::fockspace::DEFAULT_TRUNCATION_TOLERANCE;
    let dim = auto_cutoff(
        spec,
        &[C64::new(reach, 0.0)],
        Mode::Limit { scale: 1.0 },
        tol,
    );
    Cutoff::new(dim).map_err(|e| e.to_string())
}

/// Row-major `points x points` map of the s-ordered quasidistribution over
/// the square `[-half_extent, half_extent]^2`, imaginary part outer.
pub fn quasi_map(
    kind: &str,
    param: f64,
    s: f64,
    half_extent: f64,
    points: usize,
) -> Result<Vec<f64>, String> {
    if !(2..=MAX_MAP_POINTS).contains(&points) {
        return Err(format!("map size must be between 2 and {MAX_MAP_POINTS}"));
    }
    if !(half_extent.is_finite() && half_extent > 0.0) {
        return Err("half extent must be positive".into());
    }
    let order = OrderingParameter::new(s).map_err(|e| e.to_string())?;
    let spec = signal(kind, param)?;
    let rho = spec
        .density(cutoff_for(&spec, half_extent * std::f64::consts::SQRT_2)?)
        .map_err(|e| e.to_string())?;
    let coord = |i: usize| -half_extent + 2.0 * half_extent * i as f64 / (points - 1) as f64;
    let wigner = (order.value() == 0.0).then(|| WignerMap::new(&rho));
    let smoothed = QuasiMap::new(&rho);
    let mut out = Vec::with_capacity(points * points);
    for row in 0..points {
        for col in 0..points {
            let beta = PhasePoint::new(coord(col), coord(row));
            out.push(match &wigner {
                Some(map) => map.value(beta),
                None => smoothed.value(beta, order).map_err(|e| e.to_string())?,
            });
        }
    }
    Ok(out)
}

/// Limit-mode parity scan along the real axis. Output is packed per point as
/// `[target, analytic_mean, analytic_sigma, mc_mean, mc_stderr, exact_quasi]`.
#[allow(clippy::too_many_arguments)]
pub fn scan_curve(
    kind: &str,
    param: f64,
    efficiency: f64,
    compensate: bool,
    r_max: f64,
    steps: usize,
    events: usize,
    seed: u64,
) -> Result<Vec<f64>, String> {
    let config = ScanConfig {
        signal: signal(kind, param)?,
        transmission: TransmissionSpec::Limit(LimitToken::Limit),
        limit_scale: None,
        efficiency,
        compensate,
        grid: GridSpec::Radial {
            phase: 0.0,
            r_min: 0.0,
            r_max,
            steps,
        },
        events,
        master_seed: seed,
        cutoff: CutoffSpec::Auto(AutoToken::Auto),
        truncation_tolerance: None,
    };
    let rows = ScanPlan::new(config)
        .and_then(|plan| plan.run())
        .map_err(|e| e.to_string())?;
    Ok(rows
        .iter()
        .flat_map(|r| {
            [
                r.target_re,
                r.analytic_mean,
                r.analytic_sigma,
                r.mc_mean.unwrap_or(f64::NAN),
                r.mc_stderr.unwrap_or(f64::NAN),
                r.exact_quasi,
            ]
        })
        .collect())
}

/// Photocount probabilities after displacing to `target` and detecting with
/// efficiency `efficiency`.
pub fn photocounts(
    kind: &str,
    param: f64,
    target_re: f64,
    target_im: f64,
    efficiency: f64,
) -> Result<Vec<f64>, String> {
    let spec = signal(kind, param)?;
    let target = C64::new(target_re, target_im);
    if !(target.re.is_finite() && target.im.is_finite()) {
        return Err("target must be finite".into());
    }
    let rho = spec
        .density(cutoff_for(&spec, target.norm())?)
        .map_err(|e| e.to_string())?;
    let eta = Efficiency::new(efficiency).map_err(|e| e.to_string())?;
    let p = limit_distribution(&rho, target, eta).map_err(|e| e.to_string())?;
    Ok(p.probabilities().to_vec())
}

fn js(r: Result<Vec<f64>, String>) -> Result<Vec<f64>, JsError> {
    r.map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = quasiMap)]
pub fn quasi_map_js(
    kind: &str,
    param: f64,
    s: f64,
    half_extent: f64,
    points: usize,
) -> Result<Vec<f64>, JsError> {
    js(quasi_map(kind, param, s, half_extent, points))
}

#[wasm_bindgen(js_name = scanCurve)]
#[allow(clippy::too_many_arguments)]
pub fn scan_curve_js(
    kind: &str,
    param: f64,
    efficiency: f64,
    compensate: bool,
    r_max: f64,
    steps: usize,
    events: usize,
    seed: u32,
) -> Result<Vec<f64>, JsError> {
    js(scan_curve(
        kind,
        param,
        efficiency,
        compensate,
        r_max,
        steps,
        events,
        u64::from(seed),
    ))
}

#[wasm_bindgen(js_name = photocounts)]
pub fn photocounts_js(
    kind: &str,
    param: f64,
    target_re: f64,
    target_im: f64,
    efficiency: f64,
) -> Result<Vec<f64>, JsError> {
    js(photocounts(kind, param, target_re, target_im, efficiency))
}

#[wasm_bindgen(js_name = curveStride)]
pub fn curve_stride() -> usize {
    CURVE_STRIDE
}
