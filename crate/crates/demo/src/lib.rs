//! WebAssembly bindings for the static demo page in `www/`.
//!
//! Every export returns a JSON document; the page plots it on a canvas.

use qeraser::analysis::dark_state_scan;
use qeraser::dynamics::{EvolutionConfig, TraceSet};
use qeraser::model::{ghz, mhz, DeviceParams};
use qeraser::scenarios::{
    dark_state_config, run, selective_reset_config, simultaneous_reset_config, CouplerSetting, InitialState,
};
use serde::Serialize;
use wasm_bindgen::prelude::*;

#[derive(Serialize)]
struct Traces<'a> {
    times: &'a [f64],
    series: &'a [(String, Vec<f64>)],
    tau_ns: Option<f64>,
    first_crossing_ns: Option<f64>,
}

fn to_json<T: Serialize>(value: &T) -> Result<String, String> {
    serde_json::to_string(value).map_err(|e| e.to_string())
}

fn traces_json(traces: &TraceSet, tau_ns: Option<f64>, first_crossing_ns: Option<f64>) -> Result<String, String> {
    to_json(&Traces { times: &traces.times, series: &traces.series, tau_ns, first_crossing_ns })
}

fn window(t_end_ns: f64) -> Result<EvolutionConfig, String> {
    if !(t_end_ns > 0.0 && t_end_ns <= 2000.0) {
        return Err(format!("window must lie in (0, 2000] ns, got {t_end_ns}"));
    }
    Ok(EvolutionConfig::new(t_end_ns, (t_end_ns / 400.0).max(0.25)))
}

/// Two-qubit reset from `|11⟩`: `q1` alone (the other coupler idle) or both
/// qubits at once.
pub fn reset(simultaneous: bool, reset_ghz: f64, g_r_mhz: f64, kappa_mhz: f64, t_end_ns: f64) -> Result<String, String> {
    let params = DeviceParams { g_r: mhz(g_r_mhz), kappa: mhz(kappa_mhz), ..DeviceParams::fig1() };
    let mut config = if simultaneous {
        simultaneous_reset_config(&params, InitialState::all_excited(2))
    } else {
        selective_reset_config(&params, "q1")
    }
    .map_err(|e| e.to_string())?;
    for c in config.couplers.iter_mut() {
        if *c != CouplerSetting::Idle {
            *c = CouplerSetting::ghz(reset_ghz);
        }
    }
    config.evolution = window(t_end_ns)?;
    let r = run(&config).map_err(|e| e.to_string())?;
    traces_json(&r.traces, r.reset.tau_ns, r.reset.first_crossing_ns)
}

/// `|Ψ_φ⟩` with the couplers at the given frequencies (GHz).
pub fn dark_state(phi: f64, c1_ghz: f64, c2_ghz: f64, t_end_ns: f64) -> Result<String, String> {
    let mut config = dark_state_config(&DeviceParams::fig2(), true).map_err(|e| e.to_string())?;
    config.initial = InitialState::Bell { phi };
    config.couplers = vec![CouplerSetting::Frequency(ghz(c1_ghz)), CouplerSetting::Frequency(ghz(c2_ghz))];
    config.evolution = window(t_end_ns)?;
    let r = run(&config).map_err(|e| e.to_string())?;
    traces_json(&r.traces, r.reset.tau_ns, r.reset.first_crossing_ns)
}

/// Transfer amplitude `|(1 + e^{iφ}) g_p/√2|` (rad/ns) and eigencheck residual
/// over `n` phases.
pub fn transfer_scan(n: usize, g_p_mhz: f64) -> Result<String, String> {
    let params = DeviceParams { g_p: mhz(g_p_mhz), ..DeviceParams::fig1() };
    to_json(&dark_state_scan(&params, n).map_err(|e| e.to_string())?)
}

#[wasm_bindgen(js_name = resetTraces)]
pub fn reset_traces(simultaneous: bool, reset_ghz: f64, g_r_mhz: f64, kappa_mhz: f64, t_end_ns: f64) -> Result<String, JsError> {
    reset(simultaneous, reset_ghz, g_r_mhz, kappa_mhz, t_end_ns).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = darkStateTraces)]
pub fn dark_state_traces(phi: f64, c1_ghz: f64, c2_ghz: f64, t_end_ns: f64) -> Result<String, JsError> {
    dark_state(phi, c1_ghz, c2_ghz, t_end_ns).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = transferScan)]
pub fn transfer_scan_js(n: usize, g_p_mhz: f64) -> Result<String, JsError> {
    transfer_scan(n, g_p_mhz).map_err(|e| JsError::new(&e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::Value;

    #[test]
    fn reset_returns_series() {
        let v: Value = serde_json::from_str(&reset(true, 3.1, 100.0, 30.0, 50.0).unwrap()).unwrap();
        assert_eq!(v["times"].as_array().unwrap().len(), 201);
        assert_eq!(v["series"][0][0], "q1");
    }

    #[test]
    fn symmetric_dark_state_is_trapped() {
        let v: Value = serde_json::from_str(&dark_state(std::f64::consts::PI, 3.1, 3.1, 50.0).unwrap()).unwrap();
        assert!(v["tau_ns"].is_null());
        let q0 = v["series"].as_array().unwrap().iter().find(|s| s[0] == "q0").unwrap();
        assert!(q0[1].as_array().unwrap().iter().all(|x| x.as_f64().unwrap() < 1e-8));
    }

    #[test]
    fn scan_and_bad_window() {
        let v: Value = serde_json::from_str(&transfer_scan(8, 3.0).unwrap()).unwrap();
        assert_eq!(v["is_dark"].as_array().unwrap().iter().filter(|b| b.as_bool().unwrap()).count(), 1);
        assert!(dark_state(0.0, 3.1, 2.9, -1.0).is_err());
    }
}
