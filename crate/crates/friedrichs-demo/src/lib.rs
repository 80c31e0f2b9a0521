//! Interactive decay scenes for the browser.
//!
//! Each scene function takes a few physical knobs, runs the library, and
//! returns one JSON string the page can plot directly. Errors come back as
//! `{"error": "..."}` rather than a panic, so a bad slider position shows a
//! message instead of killing the module. The functions are ordinary Rust on
//! native targets, which is how the test suite drives them.

use friedrichs::analysis::{markovianity_profile, semigroup_deviation};
use friedrichs::evolution::{build_resonant_density, solve_markovian, solve_memory_kernel};
use friedrichs::kernel::Kernel;
use friedrichs::model::{ChannelKind, CouplingChannel, LevelSet, Model, SpectrumKind};
use friedrichs::resolvent::{Generator, SearchSpec};
use friedrichs::{C64, CVec, Result};
use serde::Serialize;
use wasm_bindgen::prelude::wasm_bindgen;

fn emit<T: Serialize>(result: Result<T>) -> String {
    match result {
        Ok(value) => serde_json::to_string(&value)
            .unwrap_or_else(|e| format!("{{\"error\":\"serialization: {e}\"}}")),
        Err(e) => serde_json::to_string(&serde_json::json!({ "error": e.to_string() }))
            .unwrap_or_else(|_| "{\"error\":\"unreportable\"}".into()),
    }
}

/// One level on resonance with a unit-mass lorentzian of width `gamma`,
/// detuned by `mu_offset`, coupling amplitude `g`.
fn one_level(gamma: f64, mu_offset: f64, g: f64) -> Result<Model> {
    let channel = CouplingChannel::real(
        &[g],
        ChannelKind::Lorentzian {
            mu: 1.0 + mu_offset,
            gamma,
        },
    )?;
    Model::new(LevelSet::new(vec![1.0])?, vec![channel], SpectrumKind::FullLine)
}

/// Two levels, each facing its own lorentzian with a weak cross coupling;
/// widening `gamma` flattens the coupling at fixed integrated strength.
fn two_level(gamma: f64, g: f64) -> Result<Model> {
    let cross = 0.3 * g;
    let ch1 = CouplingChannel::real(&[g, cross], ChannelKind::Lorentzian { mu: 1.0, gamma })?;
    let ch2 = CouplingChannel::real(&[cross, g], ChannelKind::Lorentzian { mu: 2.0, gamma })?;
    Model::new(
        LevelSet::new(vec![1.0, 2.0])?,
        vec![ch1, ch2],
        SpectrumKind::FullLine,
    )
}

#[derive(Serialize)]
struct KernelScene {
    t: Vec<f64>,
    re: Vec<f64>,
    im: Vec<f64>,
    norm: Vec<f64>,
    kernel_width: f64,
    flatness: f64,
    delta_quality: f64,
}

/// Memory kernel α(t) of the one-level lorentzian model with its
/// delta-likeness profile. Widening `gamma` squeezes the kernel toward a
/// delta spike: the Markovian limit.
#[wasm_bindgen]
pub fn kernel_scene(gamma: f64, mu_offset: f64, t_max: f64) -> String {
    emit((|| {
        let model = one_level(gamma, mu_offset, 0.1)?;
        let kernel = Kernel::new(&model);
        let samples = 400usize;
        let mut t = Vec::with_capacity(samples + 1);
        let mut re = Vec::with_capacity(samples + 1);
        let mut im = Vec::with_capacity(samples + 1);
        let mut norm = Vec::with_capacity(samples + 1);
        for k in 0..=samples {
            let tk = t_max * k as f64 / samples as f64;
            let a = kernel.alpha_t(tk)?[(0, 0)];
            t.push(tk);
            re.push(a.re);
            im.push(a.im);
            norm.push(a.norm());
        }
        let profile = markovianity_profile(&kernel, t_max)?;
        Ok(KernelScene {
            t,
            re,
            im,
            norm,
            kernel_width: profile.kernel_width,
            flatness: profile.flatness,
            delta_quality: profile.delta_quality,
        })
    })())
}

#[derive(Serialize)]
struct PoleOut {
    re: f64,
    im: f64,
}

#[derive(Serialize)]
struct DecayScene {
    t: Vec<f64>,
    exact: Vec<f64>,
    markovian: Vec<f64>,
    poles: Vec<PoleOut>,
    /// Slowest pole decay rate −2·Im z, the long-time exponential slope.
    slow_rate: f64,
}

/// Survival probability of the excited level: the memory-kernel solution
/// against the constant-generator semigroup, with the resonance poles that
/// shape them. Narrow `gamma` makes the exact curve wander off the
/// exponential; wide `gamma` glues the two together.
#[wasm_bindgen]
pub fn decay_scene(gamma: f64, g: f64, t_max: f64) -> String {
    emit((|| {
        let model = one_level(gamma, 0.0, g)?;
        let kernel = Kernel::new(&model);
        let step = t_max / 400.0;
        let exact_prop = solve_memory_kernel(&kernel, t_max, step)?;
        let omega_hat = build_resonant_density(&model)?.matrix;
        let markov_prop = solve_markovian(&model, &omega_hat, t_max, step)?;

        let mut state = CVec::zeros(1);
        state[0] = C64::new(1.0, 0.0);
        let exact = exact_prop.survival_probability(&state);
        let markovian = markov_prop.survival_probability(&state);

        let generator = Generator::new(Kernel::new(&model));
        let report = generator.find_poles(&SearchSpec::for_model_size(1))?;
        let poles: Vec<PoleOut> = report
            .poles
            .iter()
            .map(|p| PoleOut {
                re: p.z.re,
                im: p.z.im,
            })
            .collect();
        let slow_rate = report
            .poles
            .iter()
            .map(|p| -2.0 * p.z.im)
            .fold(f64::INFINITY, f64::min);

        Ok(DecayScene {
            t: exact_prop.times.clone(),
            exact,
            markovian,
            poles,
            slow_rate: if slow_rate.is_finite() { slow_rate } else { 0.0 },
        })
    })())
}

#[derive(Serialize)]
struct FlatteningPoint {
    gamma: f64,
    deviation: f64,
    kernel_width: f64,
}

#[derive(Serialize)]
struct FlatteningScene {
    points: Vec<FlatteningPoint>,
}

/// Semigroup deviation of the two-level model as the lorentzian width is
/// swept at fixed integrated coupling: memory dies and the composition law
/// U(t₁+t₂) = U(t₂)U(t₁) is restored as the coupling flattens.
#[wasm_bindgen]
pub fn flattening_scene(g: f64, gamma_min: f64, gamma_max: f64, n_points: usize) -> String {
    emit((|| {
        let n = n_points.clamp(2, 24);
        let t_max = 12.0;
        let step = 0.05;
        let pairs = [(3.0, 3.0), (3.0, 6.0), (6.0, 6.0)];
        let mut points = Vec::with_capacity(n);
        for k in 0..n {
            let frac = k as f64 / (n - 1) as f64;
            let gamma = gamma_min * (gamma_max / gamma_min).powf(frac);
            let model = two_level(gamma, g)?;
            let kernel = Kernel::new(&model);
            let prop = solve_memory_kernel(&kernel, t_max, step)?;
            let report = semigroup_deviation(&prop, &pairs)?;
            let profile = markovianity_profile(&kernel, t_max)?;
            points.push(FlatteningPoint {
                gamma,
                deviation: report.max_deviation,
                kernel_width: profile.kernel_width,
            });
        }
        Ok(FlatteningScene { points })
    })())
}
