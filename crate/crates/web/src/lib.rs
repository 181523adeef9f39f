//! wasm-bindgen bindings for the static demo page in `www/`.
//!
//! Every export takes plain numbers and returns a JSON string, so the page
//! needs no glue beyond `JSON.parse`.

use condflow::oracle::{solve_dimension, verify_proposition, CounterexampleParams, Side};
use condflow::rng::seeded;
use serde::Serialize;
use wasm_bindgen::prelude::*;

fn to_js<T: Serialize>(value: &T) -> Result<String, JsError> {
    serde_json::to_string(value).map_err(|e| JsError::new(&e.to_string()))
}

fn err(e: condflow::Error) -> JsError {
    JsError::new(&e.to_string())
}

#[derive(Serialize)]
struct Solution {
    dim: usize,
    lambda1: f64,
    lambda2: f64,
    interval: (f64, f64),
    kl_q_p: f64,
    kl_p_q: f64,
    conditions: [bool; 5],
}

/// Smallest dimension for which the construction works at `(epsilon, delta, shell)`.
#[wasm_bindgen]
pub fn solve(epsilon: f64, delta: f64, shell: f64) -> Result<String, JsError> {
    let s = solve_dimension(epsilon, delta, shell).map_err(err)?;
    to_js(&Solution {
        dim: s.dim,
        lambda1: s.params.lambda1,
        lambda2: s.params.lambda2,
        interval: s.lambda1_interval,
        kl_q_p: s.kl_q_p,
        kl_p_q: s.kl_p_q,
        conditions: s.conditions.as_array(),
    })
}

#[derive(Serialize)]
struct Profile {
    radius: Vec<f64>,
    p_post0: Vec<Option<f64>>,
    q_post0: Vec<Option<f64>>,
}

/// `p(y=0 | r)` under the data distribution and under the model, on a grid
/// of radii from 0 to 3. Entries are `null` off both supports.
#[wasm_bindgen]
pub fn radial_profile(lambda1: f64, lambda2: f64, shell: f64, dim: usize, points: usize) -> Result<String, JsError> {
    let params = CounterexampleParams { lambda1, lambda2, shell, dim, epsilon: 1.0, delta: 0.25 };
    params.validate().map_err(err)?;
    let n = points.clamp(2, 2000);
    let radius: Vec<f64> = (0..n).map(|i| 3.0 * i as f64 / (n - 1) as f64).collect();
    let post = |side| radius.iter().map(|&r| params.posterior(side, r).map(|p| p[0])).collect();
    to_js(&Profile { p_post0: post(Side::P), q_post0: post(Side::Q), radius })
}

#[derive(Serialize)]
struct AttackCheck {
    dim: usize,
    n: usize,
    fraction: f64,
    expected: f64,
    wilson: (f64, f64),
    condition_rates: Vec<f64>,
    passes: bool,
}

/// Solves for the dimension and measures the fraction of samples on which
/// the radial attack meets every condition.
#[wasm_bindgen]
pub fn attack_fraction(epsilon: f64, delta: f64, shell: f64, samples: usize, seed: u32) -> Result<String, JsError> {
    let s = solve_dimension(epsilon, delta, shell).map_err(err)?;
    let r = verify_proposition(&s.params, samples.clamp(100, 50_000), &mut seeded(seed.into())).map_err(err)?;
    to_js(&AttackCheck {
        dim: s.dim,
        n: r.n,
        fraction: r.fraction,
        expected: r.expected_fraction,
        wilson: r.wilson,
        condition_rates: r.condition_counts.iter().map(|&c| c as f64 / r.n as f64).collect(),
        passes: r.passes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solve_reports_reference_dimension() {
        let v: serde_json::Value = serde_json::from_str(&solve(0.1, 0.01, 0.3).unwrap()).unwrap();
        assert_eq!(v["dim"], 54);
        let (lo, hi) = (v["interval"][0].as_f64().unwrap(), v["interval"][1].as_f64().unwrap());
        assert!(lo < v["lambda1"].as_f64().unwrap() && v["lambda1"].as_f64().unwrap() < hi);
    }

    #[test]
    fn profile_is_null_only_off_support() {
        let v: serde_json::Value = serde_json::from_str(&radial_profile(0.1, 0.02, 0.3, 4, 31).unwrap()).unwrap();
        let r = v["radius"].as_array().unwrap();
        let q = v["q_post0"].as_array().unwrap();
        assert_eq!(r.len(), 31);
        for (ri, qi) in r.iter().zip(q) {
            let ri = ri.as_f64().unwrap();
            let off = ri > 1.3 && ri < 2.0 || ri > 3.0;
            assert_eq!(qi.is_null(), off, "r = {ri}");
        }
    }

    #[test]
    fn attack_fraction_near_shell_mass() {
        let v: serde_json::Value = serde_json::from_str(&attack_fraction(0.1, 0.01, 0.3, 2000, 1).unwrap()).unwrap();
        assert!((v["fraction"].as_f64().unwrap() - v["expected"].as_f64().unwrap()).abs() < 0.05);
    }
}
