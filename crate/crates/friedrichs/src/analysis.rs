//! Diagnostics over propagators and pole sets.
//!
//! Everything here is a pure reduction: given trajectories, poles, or a
//! kernel, compute how far the dynamics is from a semigroup, how orthogonal
//! the pole projectors are, what rate the decay follows, and how close the
//! memory kernel is to a delta in time.

use nalgebra::DMatrix;

use crate::error::Error;
use crate::evolution::{build_resonant_density, PropagatorSource, ReducedPropagator};
use crate::kernel::Kernel;
use crate::quad;
use crate::resolvent::{pole_sum_propagator, PoleRecord, ResidueMode};
use crate::{C64, CVec, Result};

/// Floor for the deviation normalization, so that fully decayed propagators
/// do not divide by zero.
const NORM_FLOOR: f64 = 1e-300;

/// Relative rise of |amplitude|² above its running minimum that counts as a
/// revival rather than fit noise.
const REVIVAL_RISE: f64 = 0.05;

/// How far the composition law U(t₁+t₂) = U(t₂)U(t₁) fails on a trajectory.
#[derive(Debug, Clone)]
pub struct SemigroupReport {
    pub source: PropagatorSource,
    /// Pairs that were actually evaluated.
    pub pairs: Vec<(f64, f64)>,
    /// Δ(t₁,t₂) = ‖U(t₁+t₂) − U(t₂)U(t₁)‖_F / max(‖U(t₁+t₂)‖_F, floor).
    pub deviation: Vec<f64>,
    pub max_deviation: f64,
    /// Pairs that could not be evaluated, with the reason.
    pub skipped: Vec<((f64, f64), String)>,
}

/// Deviation from the composition law over the given (t₁, t₂) pairs.
///
/// All three of t₁, t₂, t₁+t₂ must be grid times of the trajectory; pairs
/// that are not are skipped with a reason instead of failing the whole call.
pub fn semigroup_deviation(
    prop: &ReducedPropagator,
    t_pairs: &[(f64, f64)],
) -> Result<SemigroupReport> {
    if t_pairs.is_empty() {
        return Err(Error::InvalidInput("no time pairs given".into()));
    }
    let mut pairs = Vec::new();
    let mut deviation = Vec::new();
    let mut skipped = Vec::new();
    for &(t1, t2) in t_pairs {
        let looked = (|| -> Result<f64> {
            let u1 = prop.value_at(t1)?;
            let u2 = prop.value_at(t2)?;
            let u12 = prop.value_at(t1 + t2)?;
            let diff = (u12 - u2 * u1).norm();
            Ok(diff / u12.norm().max(NORM_FLOOR))
        })();
        match looked {
            Ok(d) => {
                pairs.push((t1, t2));
                deviation.push(d);
            }
            Err(e) => skipped.push(((t1, t2), e.to_string())),
        }
    }
    let max_deviation = deviation.iter().cloned().fold(0.0f64, f64::max);
    Ok(SemigroupReport {
        source: prop.source,
        pairs,
        deviation,
        max_deviation,
        skipped,
    })
}

/// The natural pair set once a mean lifetime τ is known.
pub fn default_t_pairs(tau: f64) -> Vec<(f64, f64)> {
    vec![(tau, tau), (tau, 2.0 * tau), (2.0 * tau, 2.0 * tau)]
}

/// Mutual obstruction matrix of the pole projectors.
///
/// Off-diagonal entry (j,k) is ‖Q_j·Q_k‖_F; a constant effective generator
/// makes all of them vanish, and their size is the algebraic footprint of
/// memory. Diagonal entries are the idempotence defects ‖Q_j² − Q_j‖_F.
pub fn cross_pole_orthogonality(poles: &[PoleRecord]) -> Result<DMatrix<f64>> {
    if poles.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "need at least two poles, got {}",
            poles.len()
        )));
    }
    let n = poles.len();
    Ok(DMatrix::from_fn(n, n, |j, k| {
        if j == k {
            (&poles[j].projector * &poles[j].projector - &poles[j].projector).norm()
        } else {
            (&poles[j].projector * &poles[k].projector).norm()
        }
    }))
}

/// Pole-sum trajectory as a `ReducedPropagator`, for feeding the same
/// diagnostics that run on solver and oracle output.
pub fn pole_sum_trajectory(
    poles: &[PoleRecord],
    mode: ResidueMode,
    t_grid: &[f64],
) -> Result<ReducedPropagator> {
    if t_grid.is_empty() {
        return Err(Error::InvalidInput("empty time grid".into()));
    }
    let mut values = Vec::with_capacity(t_grid.len());
    for &t in t_grid {
        values.push(pole_sum_propagator(poles, t, mode)?);
    }
    let step = if t_grid.len() >= 2 {
        (t_grid[1] - t_grid[0]).max(0.0)
    } else {
        1.0
    };
    Ok(ReducedPropagator {
        source: PropagatorSource::PoleApprox,
        step,
        times: t_grid.to_vec(),
        values,
        scheme_order: None,
        // Evaluation of the pole sum is exact; what it omits (cut
        // contributions) is a model property, not a scheme error.
        scheme_estimate: 0.0,
        stability_warning: false,
        recurrence_warning: None,
    })
}

/// Which scalar amplitude of the propagator to fit.
#[derive(Debug, Clone)]
pub enum FitComponent {
    /// Matrix element (row, column).
    Entry(usize, usize),
    /// Survival amplitude ⟨c|U(t)|c⟩ of a normalized level state.
    Survival(CVec),
}

/// Result of an exponential-decay fit on a trajectory.
#[derive(Debug, Clone)]
pub struct DecayFit {
    /// Probability decay rate Γ: |amplitude|² ≈ e^{−Γt} on the window.
    pub rate: f64,
    /// Oscillation frequency ω of the amplitude phase, amplitude ≈ e^{−iωt}·…
    /// The grid must resolve it: |ω|·step < π, or the fit aliases.
    pub phase: f64,
    /// Coefficient of determination of the log-linear fit.
    pub r_squared: f64,
    /// Time window (first, last) actually used.
    pub window: (f64, f64),
}

/// Default start of the post-Zeno fit window for a state with Hamiltonian
/// variance ΔH²: ten times the Zeno time 1/√ΔH².
pub fn zeno_window_start(dispersion: f64) -> f64 {
    if dispersion > 0.0 {
        10.0 / dispersion.sqrt()
    } else {
        f64::INFINITY
    }
}

/// Fits log|amplitude|² linearly in t over the post-Zeno window.
///
/// `window_start` of `None` estimates the dispersion from the first grid
/// step of the survival probability and starts at `zeno_window_start` of
/// it; off-diagonal entries have no survival curvature, so they require an
/// explicit start. Monotonicity is enforced on the window: a rise of
/// |amplitude|² more than 5% above its running minimum is a revival and
/// rejects the fit, carrying the revival time. Trajectories that decay less
/// than three lifetimes (and less than two decades) are rejected as too
/// short.
pub fn fit_decay_rate(
    prop: &ReducedPropagator,
    component: &FitComponent,
    window_start: Option<f64>,
) -> Result<DecayFit> {
    let n = prop.n_levels();
    let amps: Vec<C64> = match component {
        FitComponent::Entry(r, c) => {
            if *r >= n || *c >= n {
                return Err(Error::InvalidInput(format!(
                    "component ({r},{c}) out of range for {n} levels"
                )));
            }
            prop.values.iter().map(|u| u[(*r, *c)]).collect()
        }
        FitComponent::Survival(c) => {
            if c.len() != n {
                return Err(Error::InvalidInput(format!(
                    "state has {} amplitudes for {n} levels",
                    c.len()
                )));
            }
            if (c.norm() - 1.0).abs() > 1e-10 {
                return Err(Error::InvalidInput("state must be normalized".into()));
            }
            prop.values.iter().map(|u| c.dotc(&(u * c))).collect()
        }
    };

    let start = match window_start {
        Some(s) => s,
        None => {
            let diagonal_like = match component {
                FitComponent::Survival(_) => true,
                FitComponent::Entry(r, c) => r == c,
            };
            if !diagonal_like {
                return Err(Error::InvalidInput(
                    "off-diagonal components need an explicit window_start".into(),
                ));
            }
            if prop.times.len() < 2 {
                return Err(Error::InvalidInput("trajectory has fewer than two samples".into()));
            }
            // Zeno curvature from the first step: 1 − P(t₁) ≈ ΔH²·t₁².
            let t1 = prop.times[1];
            let disp = (1.0 - amps[1].norm_sqr()) / (t1 * t1);
            if !(disp > 0.0) {
                return Err(Error::FitRejected {
                    reason: "no decay: survival does not fall at short times".into(),
                    revival_time: None,
                });
            }
            zeno_window_start(disp)
        }
    };

    let window: Vec<usize> = (0..prop.times.len())
        .filter(|&i| prop.times[i] >= start && amps[i].norm_sqr() > 1e-280)
        .collect();
    if window.len() < 3 {
        return Err(Error::FitRejected {
            reason: format!(
                "window [{start}, {}] holds {} usable samples, need 3",
                prop.times.last().copied().unwrap_or(0.0),
                window.len()
            ),
            revival_time: None,
        });
    }

    let mut min_so_far = f64::INFINITY;
    for &i in &window {
        let p = amps[i].norm_sqr();
        if p > min_so_far * (1.0 + REVIVAL_RISE) {
            return Err(Error::FitRejected {
                reason: "revival: |amplitude|² rises above its running minimum".into(),
                revival_time: Some(prop.times[i]),
            });
        }
        min_so_far = min_so_far.min(p);
    }

    let p_first = amps[window[0]].norm_sqr();
    let p_last = amps[*window.last().unwrap()].norm_sqr();
    let drop = p_first / p_last.max(NORM_FLOOR);
    if drop < (3.0f64).exp().min(100.0) {
        return Err(Error::FitRejected {
            reason: format!(
                "no decay: |amplitude|² falls only by a factor {drop:.3} on the window, \
                 need three lifetimes or two decades"
            ),
            revival_time: None,
        });
    }

    // Least squares of y = ln|a|² against t.
    let m = window.len() as f64;
    let (mut st, mut sy, mut stt, mut sty, mut syy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for &i in &window {
        let t = prop.times[i];
        let y = amps[i].norm_sqr().ln();
        st += t;
        sy += y;
        stt += t * t;
        sty += t * y;
        syy += y * y;
    }
    let denom = m * stt - st * st;
    let slope = (m * sty - st * sy) / denom;
    let ss_tot = syy - sy * sy / m;
    let ss_res: f64 = window
        .iter()
        .map(|&i| {
            let pred = slope * (prop.times[i] - st / m) + sy / m;
            (amps[i].norm_sqr().ln() - pred).powi(2)
        })
        .sum();
    let r_squared = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 };

    // Phase rate from the unwrapped argument, same window.
    let (mut sp, mut stp) = (0.0, 0.0);
    let mut unwrapped = 0.0;
    let mut prev_arg = amps[window[0]].arg();
    let mut args = Vec::with_capacity(window.len());
    args.push(0.0);
    for &i in &window[1..] {
        let a = amps[i].arg();
        let mut d = a - prev_arg;
        while d > std::f64::consts::PI {
            d -= 2.0 * std::f64::consts::PI;
        }
        while d < -std::f64::consts::PI {
            d += 2.0 * std::f64::consts::PI;
        }
        unwrapped += d;
        prev_arg = a;
        args.push(unwrapped);
    }
    for (k, &i) in window.iter().enumerate() {
        sp += args[k];
        stp += prop.times[i] * args[k];
    }
    let phase_slope = (m * stp - st * sp) / denom;

    Ok(DecayFit {
        rate: -slope,
        phase: -phase_slope,
        r_squared,
        window: (prop.times[window[0]], prop.times[*window.last().unwrap()]),
    })
}

/// How delta-like the memory kernel is on the probe horizon.
#[derive(Debug, Clone, Copy)]
pub struct MarkovianityProfile {
    /// First moment of ‖α(t)‖ over [0, T]: the kernel's memory time.
    pub kernel_width: f64,
    /// Worst relative max−min variation of ‖ω(λ)‖ across the resonance
    /// windows λ_γ ± 2π/T. Zero means flat where the levels look.
    pub flatness: f64,
    /// ‖∫₀^T α(t)dt − πω^Res‖ / ‖πω^Res‖: how well the integrated kernel
    /// reproduces the golden-rule generator.
    pub delta_quality: f64,
}

/// Profiles the kernel against the Markovian idealization.
///
/// Zero-coupling models return all metrics as 0 by convention (there is no
/// memory to misrepresent). A flat window over the whole line is the exact
/// delta kernel, and likewise returns zeros.
pub fn markovianity_profile(kernel: &Kernel, t_probe: f64) -> Result<MarkovianityProfile> {
    if !(t_probe > 0.0) || !t_probe.is_finite() {
        return Err(Error::InvalidInput(format!(
            "t_probe must be positive and finite, got {t_probe}"
        )));
    }
    let model = kernel.model();
    let resonant = build_resonant_density(model)?;
    let pi_omega = &resonant.matrix * C64::new(std::f64::consts::PI, 0.0);
    let pi_norm = pi_omega.norm();

    match kernel.alpha_t(0.0) {
        Err(Error::DeltaKernel) => {
            // White-noise coupling: α is 2πω̂δ(t), the ideal the metrics
            // measure distance from.
            return Ok(MarkovianityProfile {
                kernel_width: 0.0,
                flatness: 0.0,
                delta_quality: 0.0,
            });
        }
        Err(e) => return Err(e),
        Ok(_) => {}
    }
    if pi_norm < NORM_FLOOR {
        return Ok(MarkovianityProfile {
            kernel_width: 0.0,
            flatness: 0.0,
            delta_quality: 0.0,
        });
    }

    let norm_at = |t: f64| kernel.alpha_t(t).expect("kernel valid on [0, T]").norm();
    let (mass, _) = quad::adaptive(norm_at, 0.0, t_probe, 1e-9, 4000)?;
    let (first_moment, _) = quad::adaptive(|t| t * norm_at(t), 0.0, t_probe, 1e-9, 4000)?;
    let kernel_width = if mass > NORM_FLOOR { first_moment / mass } else { 0.0 };

    let half_width = 2.0 * std::f64::consts::PI / t_probe;
    let mut flatness = 0.0f64;
    for &lam in model.levels().energies() {
        let samples = 129;
        let mut lo = f64::INFINITY;
        let mut hi = 0.0f64;
        for k in 0..samples {
            let x = lam - half_width + 2.0 * half_width * k as f64 / (samples - 1) as f64;
            let w = model.omega_at(x)?.norm();
            lo = lo.min(w);
            hi = hi.max(w);
        }
        if hi > 0.0 {
            flatness = flatness.max((hi - lo) / hi);
        }
    }

    let (alpha_int, _) = quad::adaptive(
        |t| kernel.alpha_t(t).expect("kernel valid on [0, T]"),
        0.0,
        t_probe,
        1e-9,
        4000,
    )?;
    let delta_quality = (&alpha_int - &pi_omega).norm() / pi_norm;

    Ok(MarkovianityProfile {
        kernel_width,
        flatness,
        delta_quality,
    })
}
