//! Time-domain solvers for the reduced dynamics.
//!
//! The exact reduced propagator obeys the memory-kernel master equation
//!
//!   dU/dt = −i H₀ U(t) − ∫₀^t α(t−s) U(s) ds,   U(0) = 1,
//!
//! solved here by second-order trapezoidal product integration. The
//! Markovian approximation replaces the convolution by the constant matrix
//! π·ω̂, giving the closed-form semigroup U(t) = exp[(−iH₀ − πω̂)t].

use crate::kernel::Kernel;
use crate::model::Model;
use crate::{C64, CMat, CVec, Error, Result, I};
use std::f64::consts::PI;

/// Which machinery produced a trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PropagatorSource {
    Volterra,
    Markovian,
    Oracle,
    PoleApprox,
}

impl std::fmt::Display for PropagatorSource {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            PropagatorSource::Volterra => "volterra",
            PropagatorSource::Markovian => "markovian",
            PropagatorSource::Oracle => "oracle",
            PropagatorSource::PoleApprox => "pole_approx",
        };
        f.write_str(s)
    }
}

/// A reduced propagator sampled on a time grid starting at t = 0. Stepping
/// solvers produce uniform grids; the oracle samples whatever it is asked.
#[derive(Debug, Clone)]
pub struct ReducedPropagator {
    pub source: PropagatorSource,
    pub step: f64,
    pub times: Vec<f64>,
    pub values: Vec<CMat>,
    /// Global convergence order of the scheme; `None` for solvers exact up
    /// to roundoff (matrix exponential, spectral decomposition).
    pub scheme_order: Option<usize>,
    /// A priori error scale of the scheme; 0 for exact solvers.
    pub scheme_estimate: f64,
    /// Set when ‖α(0)‖·step² > 0.1: the grid under-resolves the kernel.
    pub stability_warning: bool,
    /// Set to the recurrence time when the requested window crosses half of
    /// it (discretized-continuum sources only).
    pub recurrence_warning: Option<f64>,
}

impl ReducedPropagator {
    pub fn n_levels(&self) -> usize {
        self.values[0].nrows()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Value at a grid time; `t` must lie on the grid within 1e−9·step.
    pub fn value_at(&self, t: f64) -> Result<&CMat> {
        let tol = 1e-9 * self.step.max(1e-300);
        let idx = (t / self.step).round() as isize;
        if idx >= 0 && (idx as usize) < self.values.len() {
            let idx = idx as usize;
            if (self.times[idx] - t).abs() <= tol {
                return Ok(&self.values[idx]);
            }
        }
        // Non-uniform grids (oracle output) fall back to a scan.
        if let Some(i) = self.times.iter().position(|&g| (g - t).abs() <= tol) {
            return Ok(&self.values[i]);
        }
        Err(Error::InvalidInput(format!(
            "t = {t} is not a grid time of the solved window [0, {}]",
            self.times.last().copied().unwrap_or(0.0)
        )))
    }

    /// Survival probability |⟨c|U(t)|c⟩|² along the grid.
    pub fn survival_probability(&self, c: &CVec) -> Vec<f64> {
        self.values
            .iter()
            .map(|u| {
                let amp: C64 = c.dotc(&(u * c));
                amp.norm_sqr()
            })
            .collect()
    }
}

fn all_finite(m: &CMat) -> bool {
    m.iter().all(|c| c.re.is_finite() && c.im.is_finite())
}

/// Scale row r of `m` by `ph[r]` (left multiplication by diag(ph)).
fn dress_rows(ph: &CVec, m: &CMat) -> CMat {
    let mut out = m.clone();
    for r in 0..out.nrows() {
        for c in 0..out.ncols() {
            out[(r, c)] *= ph[r];
        }
    }
    out
}

/// Trapezoidal product-integration solve of the memory-kernel equation.
///
/// The H₀ phases are handled exactly: internally the scheme evolves the
/// interaction-picture propagator Ũ(t) = e^{iH₀t}U(t), which obeys
/// dŨ/dt = −∫₀^t e^{iH₀t} α(t−s) e^{−iH₀s} Ũ(s) ds with no generator term,
/// so zero coupling is exact to roundoff and only the slow memory dynamics
/// is time-stepped. The kernel α is cached on the grid; the convolution is
/// the plain O(n²) sum (correctness over speed at desk scale). The implicit
/// trapezoid endpoint is prefactored once: the step matrix is the phase
/// conjugation of 1 + (h²/4)α(0).
pub fn solve_memory_kernel(kernel: &Kernel, t_max: f64, step: f64) -> Result<ReducedPropagator> {
    if !(step > 0.0) || !step.is_finite() {
        return Err(Error::InvalidInput(format!("step must be positive, got {step}")));
    }
    if !(t_max >= step) || !t_max.is_finite() {
        return Err(Error::InvalidInput(format!(
            "t_max = {t_max} must be at least one step = {step}"
        )));
    }
    let model = kernel.model();
    let n = model.n_levels();
    let h = step;
    let n_steps = (t_max / h).ceil() as usize;

    let mut alpha = Vec::with_capacity(n_steps + 1);
    for j in 0..=n_steps {
        alpha.push(kernel.alpha_t(j as f64 * h)?);
    }
    let stability_warning = alpha[0].norm() * h * h > 0.1;

    // Per-level phases e^{+iλ_α t_k} and their conjugates.
    let energies = model.levels().energies();
    let phases: Vec<CVec> = (0..=n_steps)
        .map(|k| {
            CVec::from_iterator(
                n,
                energies
                    .iter()
                    .map(|&la| (I * C64::new(la * k as f64 * h, 0.0)).exp()),
            )
        })
        .collect();
    let conj_phases: Vec<CVec> = phases
        .iter()
        .map(|p| CVec::from_iterator(n, p.iter().map(|c| c.conj())))
        .collect();

    let identity = CMat::identity(n, n);
    let lhs = &identity + &alpha[0] * C64::new(h * h / 4.0, 0.0);
    let lhs_lu = lhs.lu();

    // Dressed states V_m = e^{−iH₀ t_m} Ũ_m are exactly the Schrödinger U_m.
    let mut tilde: Vec<CMat> = Vec::with_capacity(n_steps + 1);
    let mut values: Vec<CMat> = Vec::with_capacity(n_steps + 1);
    tilde.push(identity.clone());
    values.push(identity.clone());
    // Full dressed convolution C̃_k at the current step, updated as we go.
    let mut conv_prev = CMat::zeros(n, n);
    for k in 0..n_steps {
        // Known part of C̃_{k+1} before row dressing:
        // h[½α_{k+1}V₀ + Σ_{m=1}^{k} α_{k+1−m}V_m], V_m = e^{−iH₀t_m}Ũ_m.
        let mut bracket = &alpha[k + 1] * &values[0] * C64::new(h / 2.0, 0.0);
        for m in 1..=k {
            bracket += &alpha[k + 1 - m] * &values[m] * C64::new(h, 0.0);
        }
        let partial = dress_rows(&phases[k + 1], &bracket);

        let rhs = &tilde[k] - &conv_prev * C64::new(h / 2.0, 0.0) - &partial * C64::new(h / 2.0, 0.0);
        // [1 + (h²/4)D α₀ D†]Ũ = rhs  ⇔  Ũ = D·solve(1 + (h²/4)α₀, D†·rhs).
        let solved = lhs_lu
            .solve(&dress_rows(&conj_phases[k + 1], &rhs))
            .ok_or_else(|| {
                Error::InternalConsistency("trapezoid system matrix is singular".into())
            })?;
        let next_tilde = dress_rows(&phases[k + 1], &solved);
        if !all_finite(&next_tilde) {
            return Err(Error::NonFinite {
                last_good_index: k,
                last_good_t: k as f64 * h,
            });
        }
        let next_value = dress_rows(&conj_phases[k + 1], &next_tilde);
        conv_prev = &partial
            + dress_rows(&phases[k + 1], &(&alpha[0] * &next_value)) * C64::new(h / 2.0, 0.0);
        tilde.push(next_tilde);
        values.push(next_value);
    }

    let times = (0..=n_steps).map(|k| k as f64 * h).collect();
    let scheme_estimate = alpha[0].norm() * h * h * t_max * (1.0 + t_max);
    Ok(ReducedPropagator {
        source: PropagatorSource::Volterra,
        step: h,
        times,
        values,
        scheme_order: Some(2),
        scheme_estimate,
        stability_warning,
        recurrence_warning: None,
    })
}

/// Constant-generator semigroup U(t) = exp[(−iH₀ − π·ω̂)t].
///
/// ω̂ is the constant spectral density (full-line flat) or the resonant
/// matrix from [`build_resonant_density`]. Each grid value is its own
/// matrix exponential, so the composition law holds to roundoff.
pub fn solve_markovian(
    model: &Model,
    omega_hat: &CMat,
    t_max: f64,
    step: f64,
) -> Result<ReducedPropagator> {
    let n = model.n_levels();
    if omega_hat.nrows() != n || omega_hat.ncols() != n {
        return Err(Error::InvalidInput(format!(
            "omega matrix is {}x{} but the model has {n} levels",
            omega_hat.nrows(),
            omega_hat.ncols()
        )));
    }
    if !(step > 0.0) || !(t_max >= step) {
        return Err(Error::InvalidInput(format!(
            "need 0 < step <= t_max, got step = {step}, t_max = {t_max}"
        )));
    }
    let generator = -(model.h0_red() * I) - omega_hat * C64::new(PI, 0.0);
    let n_steps = (t_max / step).ceil() as usize;
    let mut values = Vec::with_capacity(n_steps + 1);
    let mut times = Vec::with_capacity(n_steps + 1);
    for k in 0..=n_steps {
        let t = k as f64 * step;
        values.push((&generator * C64::new(t, 0.0)).exp());
        times.push(t);
    }
    Ok(ReducedPropagator {
        source: PropagatorSource::Markovian,
        step,
        times,
        values,
        scheme_order: None,
        scheme_estimate: 0.0,
        stability_warning: false,
        recurrence_warning: None,
    })
}

/// Markovian propagator at a single time.
pub fn markovian_at(model: &Model, omega_hat: &CMat, t: f64) -> Result<CMat> {
    let n = model.n_levels();
    if omega_hat.nrows() != n || omega_hat.ncols() != n {
        return Err(Error::InvalidInput(format!(
            "omega matrix is {}x{} but the model has {n} levels",
            omega_hat.nrows(),
            omega_hat.ncols()
        )));
    }
    let generator = -(model.h0_red() * I) - omega_hat * C64::new(PI, 0.0);
    Ok((generator * C64::new(t, 0.0)).exp())
}

/// Resonant density matrix and its support diagnostics.
#[derive(Debug, Clone)]
pub struct ResonantDensity {
    /// Entry (α,γ) = ω_αγ(λ_γ): column γ is evaluated at level energy λ_γ.
    pub matrix: CMat,
    /// Levels whose energy carries no spectral weight (their columns are 0).
    pub outside_support: Vec<usize>,
}

/// Spectral density sampled columnwise at the level energies, the constant
/// matrix of the resonance (sinc-concentration) approximation. Generally
/// non-Hermitian.
pub fn build_resonant_density(model: &Model) -> Result<ResonantDensity> {
    let n = model.n_levels();
    let mut matrix = CMat::zeros(n, n);
    let mut outside_support = vec![];
    for (col, &lambda) in model.levels().energies().iter().enumerate() {
        let omega = model.omega_at(lambda)?;
        let mut any = false;
        for row in 0..n {
            matrix[(row, col)] = omega[(row, col)];
            if omega[(row, col)].norm() > 0.0 {
                any = true;
            }
        }
        let in_support = model
            .channels()
            .iter()
            .any(|ch| ch.kind().support_contains(lambda));
        if !any && !in_support && !model.channels().is_empty() {
            outside_support.push(col);
        }
    }
    Ok(ResonantDensity {
        matrix,
        outside_support,
    })
}

/// ∫_{−T/2}^{T/2} e^{−iΔτ} dτ = 2 sin(ΔT/2)/Δ, with the Δ → 0 limit T.
pub fn window_phase_integral(delta: f64, t_width: f64) -> f64 {
    let x = delta * t_width / 2.0;
    if x.abs() < 1e-8 {
        // sin(x)/x = 1 − x²/6 + O(x⁴)
        t_width * (1.0 - x * x / 6.0)
    } else {
        2.0 * x.sin() / delta
    }
}
