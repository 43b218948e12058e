//! WebAssembly bindings for the Dirac-GAN page in `www/`.
//!
//! Results cross the boundary as flat `Float64Array`s so the page can plot
//! them without any serialization layer. The plain-Rust functions carry the
//! logic; the `#[wasm_bindgen]` wrappers only translate errors.

use sdgan::dirac::{
    routh_hurwitz, simulate_discrete, simulate_ode, DiracParams, DiracState, Integrator,
    Trajectory, UpdateOrder,
};
use wasm_bindgen::prelude::*;

/// Values per trajectory sample: `t, theta, psi, phi`.
pub const TRAJECTORY_STRIDE: usize = 4;

/// Layout of [`spectrum`]: three `(re, im)` pairs, then margin, pass flag
/// and max real part.
pub const SPECTRUM_LEN: usize = 9;

fn flatten(t: &Trajectory) -> Vec<f64> {
    let mut out = Vec::with_capacity(t.states.len() * TRAJECTORY_STRIDE);
    for (time, s) in t.times.iter().zip(&t.states) {
        out.extend_from_slice(&[*time, s.theta, s.psi, s.phi]);
    }
    out
}

/// Discrete simultaneous play with learning rate `lr` for both players and
/// EMA coefficient `beta`. Stops early if the state diverges.
pub fn play(
    lr: f64,
    alpha: f64,
    beta: f64,
    steps: usize,
    theta0: f64,
    psi0: f64,
) -> Result<Vec<f64>, String> {
    if !(0.0..1.0).contains(&beta) {
        return Err(format!("beta must lie in [0, 1), got {beta}"));
    }
    // the discrete simulator takes the EMA rate from `beta`
    let p = DiracParams::new(lr, lr, 0.0, alpha, 1.0).map_err(|e| e.to_string())?;
    let s0 = DiracState::new(theta0, psi0, theta0);
    let t = simulate_discrete(s0, &p, steps, beta, UpdateOrder::Simultaneous)
        .map_err(|e| e.to_string())?;
    Ok(flatten(&t))
}

/// RK4 integration of the continuous-time dynamics, thinned to at most
/// `max_points` samples.
pub fn flow(
    p: &DiracParams,
    t_end: f64,
    dt: f64,
    theta0: f64,
    psi0: f64,
    max_points: usize,
) -> Result<Vec<f64>, String> {
    p.validate().map_err(|e| e.to_string())?;
    let s0 = DiracState::new(theta0, psi0, theta0);
    let t = simulate_ode(s0, p, t_end, dt, Integrator::Rk4).map_err(|e| e.to_string())?;
    let stride = t.states.len().div_ceil(max_points.max(2)).max(1);
    let mut out = flatten(&t);
    if stride > 1 {
        out = out
            .chunks(TRAJECTORY_STRIDE)
            .enumerate()
            .filter(|(i, _)| i % stride == 0 || *i == t.states.len() - 1)
            .flat_map(|(_, c)| c.to_vec())
            .collect();
    }
    Ok(out)
}

pub fn spectrum(p: &DiracParams) -> Result<Vec<f64>, String> {
    p.validate().map_err(|e| e.to_string())?;
    let r = routh_hurwitz(p);
    let mut out = Vec::with_capacity(SPECTRUM_LEN);
    for z in r.eigenvalues {
        out.extend_from_slice(&[z.re, z.im]);
    }
    out.extend_from_slice(&[
        r.margin,
        if r.routh_hurwitz_pass { 1.0 } else { 0.0 },
        r.max_real_part,
    ]);
    Ok(out)
}

/// Max eigenvalue real part over an `n x n` grid, row-major with alpha
/// along rows (`0..=alpha_max`) and eta_phi along columns
/// (`eta_phi_max / n ..= eta_phi_max`).
pub fn stability_map(
    eta_g: f64,
    eta_d: f64,
    c: f64,
    alpha_max: f64,
    eta_phi_max: f64,
    n: usize,
) -> Result<Vec<f64>, String> {
    if !(2..=400).contains(&n) {
        return Err(format!("grid size must lie in 2..=400, got {n}"));
    }
    let mut out = Vec::with_capacity(n * n);
    for i in 0..n {
        let alpha = alpha_max * i as f64 / (n - 1) as f64;
        for j in 0..n {
            let eta_phi = eta_phi_max * (j + 1) as f64 / n as f64;
            let p = DiracParams::new(eta_g, eta_d, eta_phi, alpha, c).map_err(|e| e.to_string())?;
            out.push(routh_hurwitz(&p).max_real_part);
        }
    }
    Ok(out)
}

fn js(e: String) -> JsError {
    JsError::new(&e)
}

#[wasm_bindgen(js_name = simulatePlay)]
pub fn simulate_play_js(
    lr: f64,
    alpha: f64,
    beta: f64,
    steps: usize,
    theta0: f64,
    psi0: f64,
) -> Result<Vec<f64>, JsError> {
    play(lr, alpha, beta, steps, theta0, psi0).map_err(js)
}

#[wasm_bindgen(js_name = simulateFlow)]
#[allow(clippy::too_many_arguments)]
pub fn simulate_flow_js(
    eta_g: f64,
    eta_d: f64,
    eta_phi: f64,
    alpha: f64,
    c: f64,
    t_end: f64,
    theta0: f64,
    psi0: f64,
) -> Result<Vec<f64>, JsError> {
    let p = DiracParams {
        eta_g,
        eta_d,
        eta_phi,
        alpha,
        c,
    };
    flow(&p, t_end, 1e-3, theta0, psi0, 4000).map_err(js)
}

#[wasm_bindgen(js_name = stabilityReport)]
pub fn stability_report_js(
    eta_g: f64,
    eta_d: f64,
    eta_phi: f64,
    alpha: f64,
    c: f64,
) -> Result<Vec<f64>, JsError> {
    spectrum(&DiracParams {
        eta_g,
        eta_d,
        eta_phi,
        alpha,
        c,
    })
    .map_err(js)
}

#[wasm_bindgen(js_name = stabilityMap)]
pub fn stability_map_js(
    eta_g: f64,
    eta_d: f64,
    c: f64,
    alpha_max: f64,
    eta_phi_max: f64,
    n: usize,
) -> Result<Vec<f64>, JsError> {
    stability_map(eta_g, eta_d, c, alpha_max, eta_phi_max, n).map_err(js)
}
