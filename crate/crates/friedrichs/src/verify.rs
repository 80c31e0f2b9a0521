//! End-to-end verification suite.
//!
//! Eight criteria, each running a full pipeline (model, kernel, resolvent,
//! solver, measurement) on a canonical scenario with frozen parameters and
//! thresholds. The acceptance test target and the CLI `check` subcommand
//! both call [`run_all`] and print one line per criterion, so a regression
//! anywhere in the crate surfaces as a named failure here.

use std::f64::consts::PI;
use std::sync::OnceLock;
use std::time::Instant;

use nalgebra::DMatrix;

use crate::analysis::{
    cross_pole_orthogonality, fit_decay_rate, pole_sum_trajectory, semigroup_deviation,
    FitComponent,
};
use crate::evolution::{solve_markovian, solve_memory_kernel};
use crate::kernel::Kernel;
use crate::model::{ChannelKind, CouplingChannel, LevelSet, Model, SpectrumKind};
use crate::oracle::{discretize, DiscretizeSpec, DiscretizedHamiltonian, GridRule};
use crate::resolvent::{pole_sum_propagator, ContourSpec, Generator, ResidueMode, SearchSpec};
use crate::rng::SplitMix64;
use crate::{C64, CMat, CVec, Error, Result};

/// Outcome of one verification criterion.
#[derive(Debug, Clone)]
pub struct CriterionOutcome {
    pub index: usize,
    pub name: &'static str,
    pub passed: bool,
    /// Measured numbers and the thresholds they were held against.
    pub details: String,
}

impl std::fmt::Display for CriterionOutcome {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "criterion {} ({}): {} | {}",
            self.index,
            self.name,
            if self.passed { "PASS" } else { "FAIL" },
            self.details
        )
    }
}

fn run(
    index: usize,
    name: &'static str,
    body: impl FnOnce() -> Result<(bool, String)>,
) -> CriterionOutcome {
    match body() {
        Ok((passed, details)) => CriterionOutcome {
            index,
            name,
            passed,
            details,
        },
        Err(e) => CriterionOutcome {
            index,
            name,
            passed: false,
            details: format!("did not run to completion: {e}"),
        },
    }
}

/// Runs all eight criteria in order.
pub fn run_all() -> Vec<CriterionOutcome> {
    vec![
        criterion_1(),
        criterion_2(),
        criterion_3(),
        criterion_4(),
        criterion_5(),
        criterion_6(),
        criterion_7(),
        criterion_8(),
    ]
}

// ---------------------------------------------------------------------------
// Canonical scenario models.

/// One level on resonance with a single lorentzian channel.
///
/// The reduced resolvent is rational, so two second-sheet poles carry the
/// entire propagator and every solver in the crate can be held to the same
/// closed form.
pub fn one_level_resonance() -> Model {
    let channel = CouplingChannel::real(
        &[0.1],
        ChannelKind::Lorentzian {
            mu: 1.0,
            gamma: 0.05,
        },
    )
    .expect("valid channel");
    Model::new(
        LevelSet::new(vec![1.0]).expect("valid levels"),
        vec![channel],
        SpectrumKind::FullLine,
    )
    .expect("valid model")
}

/// Spectral density height of the flat-window sweep family.
pub const FLAT_SWEEP_OMEGA0: f64 = 0.02;

/// Half-widths of the flat-window sweep.
pub const FLAT_SWEEP_HALF_WIDTHS: [f64; 3] = [5.0, 20.0, 80.0];

/// One level at the centre of a flat window of the given half-width and
/// height [`FLAT_SWEEP_OMEGA0`]. Widening the window flattens the coupling
/// seen by the level without changing the density at the level energy.
pub fn flat_window_member(half_width: f64) -> Model {
    let channel = CouplingChannel::real(
        &[FLAT_SWEEP_OMEGA0.sqrt()],
        ChannelKind::FlatWindow {
            lambda_min: -half_width,
            lambda_max: half_width,
        },
    )
    .expect("valid channel");
    Model::new(
        LevelSet::new(vec![0.0]).expect("valid levels"),
        vec![channel],
        SpectrumKind::FullLine,
    )
    .expect("valid model")
}

/// Two levels, each facing its own lorentzian channel of width `gamma`,
/// with a weak cross coupling.
///
/// The line shapes have unit mass, so varying `gamma` trades memory depth
/// against flatness at fixed integrated strength.
pub fn two_level_memory(gamma: f64) -> Model {
    let ch1 = CouplingChannel::real(
        &[0.1, 0.03],
        ChannelKind::Lorentzian { mu: 1.0, gamma },
    )
    .expect("valid channel");
    let ch2 = CouplingChannel::real(
        &[0.03, 0.1],
        ChannelKind::Lorentzian { mu: 2.0, gamma },
    )
    .expect("valid channel");
    Model::new(
        LevelSet::new(vec![1.0, 2.0]).expect("valid levels"),
        vec![ch1, ch2],
        SpectrumKind::FullLine,
    )
    .expect("valid model")
}

/// The same two levels against two unbounded flat channels: the spectral
/// density is constant, the memory kernel is a delta distribution, and the
/// reduced evolution is an exact semigroup.
pub fn two_level_markovian() -> Model {
    let kind = ChannelKind::FlatWindow {
        lambda_min: f64::NEG_INFINITY,
        lambda_max: f64::INFINITY,
    };
    let ch1 = CouplingChannel::real(&[0.1, 0.03], kind.clone()).expect("valid channel");
    let ch2 = CouplingChannel::real(&[0.03, 0.1], kind).expect("valid channel");
    Model::new(
        LevelSet::new(vec![1.0, 2.0]).expect("valid levels"),
        vec![ch1, ch2],
        SpectrumKind::FullLine,
    )
    .expect("valid model")
}

/// One level over a half-line flat window: a single resonance pole plus a
/// genuine branch-cut background.
pub fn half_line_flat_window() -> Model {
    let channel = CouplingChannel::real(
        &[FLAT_SWEEP_OMEGA0.sqrt()],
        ChannelKind::FlatWindow {
            lambda_min: 0.0,
            lambda_max: 8.0,
        },
    )
    .expect("valid channel");
    Model::new(
        LevelSet::new(vec![1.0]).expect("valid levels"),
        vec![channel],
        SpectrumKind::HalfLine,
    )
    .expect("valid model")
}

/// Two levels on the half line coupled through a flat window and an ohmic
/// channel, one amplitude complex. Exercises every channel family the half
/// line admits.
pub fn half_line_mixed() -> Model {
    let ch_flat = CouplingChannel::new(
        vec![C64::new(0.12, 0.0), C64::new(0.03, 0.04)],
        ChannelKind::FlatWindow {
            lambda_min: 0.0,
            lambda_max: 8.0,
        },
    )
    .expect("valid channel");
    let ch_ohmic = CouplingChannel::real(
        &[0.06, 0.1],
        ChannelKind::Ohmic {
            s: 1.0,
            lambda_c: 2.0,
        },
    )
    .expect("valid channel");
    Model::new(
        LevelSet::new(vec![0.8, 1.6]).expect("valid levels"),
        vec![ch_flat, ch_ohmic],
        SpectrumKind::HalfLine,
    )
    .expect("valid model")
}

// ---------------------------------------------------------------------------
// Shared pieces.

fn survival_state(n: usize) -> CVec {
    let mut c = CVec::zeros(n);
    c[0] = C64::new(1.0, 0.0);
    c
}

fn max_entry_deviation(a: &[CMat], b: &[CMat]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

fn worst_off_diagonal(m: &DMatrix<f64>) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            if i != j {
                worst = worst.max(m[(i, j)]);
            }
        }
    }
    worst
}

/// Oracle discretizations of the flat-window sweep, shared between the
/// golden-rule and short-time criteria.
static FLAT_SWEEP: OnceLock<Result<Vec<(f64, DiscretizedHamiltonian)>>> = OnceLock::new();

fn flat_sweep() -> Result<&'static [(f64, DiscretizedHamiltonian)]> {
    let built = FLAT_SWEEP.get_or_init(|| {
        FLAT_SWEEP_HALF_WIDTHS
            .iter()
            .map(|&hw| {
                let disc = discretize(
                    &flat_window_member(hw),
                    &DiscretizeSpec::new(2500, GridRule::Gauss),
                )?;
                Ok((hw, disc))
            })
            .collect()
    });
    match built {
        Ok(v) => Ok(v.as_slice()),
        Err(e) => Err(e.clone()),
    }
}

// ---------------------------------------------------------------------------
// Criteria.

/// Volterra solver, two-pole exact-residue propagator, and the discretized
/// oracle agree pairwise on the exactly solvable one-level model.
pub fn criterion_1() -> CriterionOutcome {
    run(1, "one-level closed-form agreement", || {
        let started = Instant::now();
        let model = one_level_resonance();
        let kernel = Kernel::new(&model);
        let generator = Generator::new(Kernel::new(&model));

        let report = generator.find_poles(&SearchSpec::for_model_size(1))?;
        if report.poles.len() != 2 {
            return Ok((
                false,
                format!("expected 2 resonance poles, found {}", report.poles.len()),
            ));
        }
        // Both poles sit at the same depth here; use the slowest anyway so
        // the window is three fitted lifetimes for any parameter drift.
        let rate = report
            .poles
            .iter()
            .map(|p| -2.0 * p.z.im)
            .fold(f64::INFINITY, f64::min);
        let t_max = 3.0 / rate;

        let volterra = solve_memory_kernel(&kernel, t_max, 0.015)?;
        // Compare on every 4th solver node; the trajectories are smooth on
        // the lifetime scale, so thinning loses nothing.
        let times: Vec<f64> = volterra.times.iter().copied().step_by(4).collect();
        let volterra_values: Vec<CMat> = volterra.values.iter().cloned().step_by(4).collect();
        let pole_sum = pole_sum_trajectory(&report.poles, ResidueMode::Exact, &times)?;
        let disc = discretize(&model, &DiscretizeSpec::new(4000, GridRule::Gauss))?;
        let oracle = disc.exact_reduced_propagator(&times)?;

        let d_vp = max_entry_deviation(&volterra_values, &pole_sum.values);
        let d_vo = max_entry_deviation(&volterra_values, &oracle.values);
        let d_po = max_entry_deviation(&pole_sum.values, &oracle.values);
        let worst = d_vp.max(d_vo).max(d_po);
        let elapsed = started.elapsed().as_secs_f64();

        Ok((
            worst < 1e-4 && elapsed < 30.0,
            format!(
                "decay rate {rate:.4} so t <= {t_max:.0}; max pairwise deviation \
                 volterra/poles {d_vp:.2e}, volterra/oracle {d_vo:.2e}, \
                 poles/oracle {d_po:.2e} (tolerance 1e-4); {elapsed:.1} s (budget 30 s)"
            ),
        ))
    })
}

/// The reduced resolvent denominator has no zero on the physical sheet:
/// `Im <chi|h(z) chi> >= Im z` for every state, on a grid over the upper
/// half plane with a thousand random states per grid point.
pub fn criterion_2() -> CriterionOutcome {
    run(2, "first-sheet numerical range", || {
        let mut rng = SplitMix64::new(0x00C2_5EED);
        let mut violations = 0usize;
        let mut checked = 0usize;
        let mut smallest_margin = f64::INFINITY;
        for model in [one_level_resonance(), half_line_mixed()] {
            let generator = Generator::new(Kernel::new(&model));
            let n = model.n_levels();
            for i in 0..20 {
                let re = -2.0 + 6.0 * (i as f64) / 19.0;
                for j in 0..10 {
                    let im = 0.01 + (2.0 - 0.01) * (j as f64) / 9.0;
                    let h = generator.h_first_sheet(C64::new(re, im))?;
                    for _ in 0..1000 {
                        let chi = rng.unit_vector(n);
                        let form = (chi.adjoint() * &h * &chi)[(0, 0)];
                        let margin = form.im - im;
                        smallest_margin = smallest_margin.min(margin);
                        // Slack covers quadrature error in h, nothing more.
                        if margin < -1e-9 {
                            violations += 1;
                        }
                        checked += 1;
                    }
                }
            }
        }
        Ok((
            violations == 0,
            format!(
                "{checked} quadratic forms over 2 models x 200 grid points; \
                 {violations} violations, smallest margin {smallest_margin:.3e}"
            ),
        ))
    })
}

/// Oracle-fitted survival decay approaches the weak-coupling rate
/// `2 pi omega0` as the flat window widens, and the widest window's pole
/// depth matches the same rate.
pub fn criterion_3() -> CriterionOutcome {
    run(3, "weak-coupling rate convergence", || {
        let golden = 2.0 * PI * FLAT_SWEEP_OMEGA0;
        let mut lines = Vec::new();
        let mut rel_at_widest = f64::NAN;
        for (hw, disc) in flat_sweep()? {
            let disp = disc.dispersion(&survival_state(1))?;
            let start = 10.0 / disp.sqrt();
            let step = 0.05;
            let n_steps = (36.0 / step) as usize;
            let times: Vec<f64> = (0..=n_steps).map(|k| start + k as f64 * step).collect();
            let prop = disc.exact_reduced_propagator(&times)?;
            let fit = fit_decay_rate(
                &prop,
                &FitComponent::Survival(survival_state(1)),
                Some(start),
            )?;
            let rel = (fit.rate - golden).abs() / golden;
            if *hw == FLAT_SWEEP_HALF_WIDTHS[2] {
                rel_at_widest = rel;
            }
            lines.push(format!("half-width {hw}: rate {:.5} off by {:.2}%", fit.rate, rel * 100.0));
        }

        let widest = flat_window_member(FLAT_SWEEP_HALF_WIDTHS[2]);
        let generator = Generator::new(Kernel::new(&widest));
        let poles = generator.find_poles(&SearchSpec::for_model_size(1))?;
        if poles.poles.is_empty() {
            return Ok((false, "no resonance pole found on the widest window".into()));
        }
        let pole_rate = -2.0 * poles.poles[0].z.im;
        let pole_rel = (pole_rate - golden).abs() / golden;

        Ok((
            rel_at_widest < 0.01 && pole_rel < 0.01,
            format!(
                "{}; widest-window pole rate {pole_rate:.5} off by {:.2}% \
                 (target {golden:.5}, tolerance 1% on the widest window)",
                lines.join("; "),
                pole_rel * 100.0
            ),
        ))
    })
}

/// Left/right spectral projectors of `W^II(z)` are idempotent, mutually
/// annihilating, and complete at randomly sampled points.
pub fn criterion_4() -> CriterionOutcome {
    run(4, "spectral projector algebra", || {
        let mut rng = SplitMix64::new(0x00A1_5EED);
        let mut worst_pair = 0.0f64;
        let mut worst_complete = 0.0f64;
        let mut sampled = 0usize;
        let mut rerolls = 0usize;
        for model in [
            one_level_resonance(),
            two_level_memory(0.02),
            half_line_mixed(),
        ] {
            let generator = Generator::new(Kernel::new(&model));
            let energies = model.levels().energies();
            let lo = energies.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = energies.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let re_lo = if model.spectrum() == SpectrumKind::HalfLine {
                0.3
            } else {
                lo - 1.5
            };
            let re_hi = hi + 1.5;
            let n = model.n_levels();
            let eye = CMat::identity(n, n);
            let mut done = 0usize;
            while done < 50 {
                let z = C64::new(rng.uniform(re_lo, re_hi), rng.uniform(-1.8, -0.05));
                let eig = match generator.spectral_decomposition(z) {
                    Ok(e) => e,
                    Err(Error::Degeneracy { .. }) if rerolls < 20 => {
                        rerolls += 1;
                        continue;
                    }
                    Err(e) => return Err(e),
                };
                let projs: Vec<CMat> = (0..n).map(|a| eig.projector(a)).collect();
                let mut sum = CMat::zeros(n, n);
                for a in 0..n {
                    for b in 0..n {
                        let prod = &projs[a] * &projs[b];
                        let defect = if a == b {
                            (&prod - &projs[a]).norm()
                        } else {
                            prod.norm()
                        };
                        worst_pair = worst_pair.max(defect);
                    }
                    sum += &projs[a];
                }
                worst_complete = worst_complete.max((&sum - &eye).norm());
                done += 1;
                sampled += 1;
            }
        }
        Ok((
            worst_pair < 1e-10 && worst_complete < 1e-10,
            format!(
                "{sampled} sampled points over 3 models ({rerolls} degenerate rerolls); \
                 worst orthogonality/idempotence defect {worst_pair:.2e}, \
                 worst completeness defect {worst_complete:.2e} (tolerance 1e-10)"
            ),
        ))
    })
}

/// Narrow resonances produce a measurable semigroup deviation and
/// non-orthogonal pole projectors; flattening the same channels shrinks
/// both by an order of magnitude; constant coupling kills both.
pub fn criterion_5() -> CriterionOutcome {
    run(5, "semigroup restoration by flattening", || {
        const PAIRS: [(f64, f64); 3] = [(6.25, 6.25), (6.25, 12.5), (12.5, 12.5)];
        const SAMPLE: [f64; 4] = [6.25, 12.5, 18.75, 25.0];

        let narrow = two_level_memory(0.02);
        let disc_a = discretize(&narrow, &DiscretizeSpec::new(2000, GridRule::Gauss))?;
        let prop_a = disc_a.exact_reduced_propagator(&SAMPLE)?;
        let dev_a = semigroup_deviation(&prop_a, &PAIRS)?.max_deviation;
        let gen_a = Generator::new(Kernel::new(&narrow));
        // Strong coupling splits each level's pole pair; seed both branches.
        let seeds_a = vec![
            C64::new(0.9, -0.01),
            C64::new(1.1, -0.01),
            C64::new(1.9, -0.01),
            C64::new(2.1, -0.01),
        ];
        let poles_a = gen_a
            .find_poles(&SearchSpec {
                seeds: Some(seeds_a),
                ..SearchSpec::for_model_size(2)
            })?
            .poles;
        if poles_a.len() < 2 {
            return Ok((false, format!("narrow regime: {} poles found", poles_a.len())));
        }
        let cross_a = worst_off_diagonal(&cross_pole_orthogonality(&poles_a)?);

        let flattened = two_level_memory(50.0);
        let disc_b = discretize(&flattened, &DiscretizeSpec::new(4000, GridRule::Gauss))?;
        let prop_b = disc_b.exact_reduced_propagator(&SAMPLE)?;
        let dev_b = semigroup_deviation(&prop_b, &PAIRS)?.max_deviation;
        let gen_b = Generator::new(Kernel::new(&flattened));
        let poles_b = gen_b.find_poles(&SearchSpec::for_model_size(2))?.poles;
        if poles_b.len() < 2 {
            return Ok((
                false,
                format!("flattened regime: {} poles found", poles_b.len()),
            ));
        }
        let cross_b = worst_off_diagonal(&cross_pole_orthogonality(&poles_b)?);

        let markovian = two_level_markovian();
        let omega_hat = markovian.omega_at(0.0)?;
        let prop_c = solve_markovian(&markovian, &omega_hat, 25.0, 6.25)?;
        let dev_c = semigroup_deviation(&prop_c, &PAIRS)?.max_deviation;
        let gen_c = Generator::new(Kernel::new(&markovian));
        let poles_c = gen_c.find_poles(&SearchSpec::for_model_size(2))?.poles;
        if poles_c.len() < 2 {
            return Ok((
                false,
                format!("markovian regime: {} poles found", poles_c.len()),
            ));
        }
        let cross_c = worst_off_diagonal(&cross_pole_orthogonality(&poles_c)?);

        let narrow_shows = dev_a > 1e-3 && cross_a > 1e-4;
        let flattening_restores = dev_b <= dev_a / 10.0 && cross_b <= cross_a / 10.0;
        let markovian_exact = dev_c < 1e-12 && cross_c < 1e-10;
        Ok((
            narrow_shows && flattening_restores && markovian_exact,
            format!(
                "semigroup deviation narrow {dev_a:.2e} (> 1e-3), flattened {dev_b:.2e} \
                 (<= narrow/10), constant {dev_c:.2e} (< 1e-12); cross-pole defect \
                 narrow {cross_a:.2e} (> 1e-4), flattened {cross_b:.2e} (<= narrow/10), \
                 constant {cross_c:.2e} (< 1e-10)"
            ),
        ))
    })
}

/// Oracle survival follows the quadratic short-time law with the quadrature
/// dispersion as curvature, and the dispersion grows linearly with the
/// flat-window half-width at slope `2 omega0`.
pub fn criterion_6() -> CriterionOutcome {
    run(6, "short-time quadratic decay law", || {
        let mut worst_curvature_rel = 0.0f64;
        let mut points = Vec::new();
        let mut lines = Vec::new();
        for (hw, disc) in flat_sweep()? {
            let disp = disc.dispersion(&survival_state(1))?;
            let t_end = 0.01 / disp.sqrt();
            let times: Vec<f64> = (1..=12).map(|k| k as f64 * t_end / 12.0).collect();
            let prop = disc.exact_reduced_propagator(&times)?;
            let mut num = 0.0;
            let mut den = 0.0;
            for (k, &t) in times.iter().enumerate() {
                let p = prop.values[k][(0, 0)].norm_sqr();
                num += (1.0 - p) * t * t;
                den += t.powi(4);
            }
            let curvature = num / den;
            let rel = (curvature - disp).abs() / disp;
            worst_curvature_rel = worst_curvature_rel.max(rel);
            points.push((*hw, disp));
            lines.push(format!("half-width {hw}: curvature off by {:.3}%", rel * 100.0));
        }

        let mean_x: f64 = points.iter().map(|(x, _)| x).sum::<f64>() / points.len() as f64;
        let mean_y: f64 = points.iter().map(|(_, y)| y).sum::<f64>() / points.len() as f64;
        let slope: f64 = points
            .iter()
            .map(|(x, y)| (x - mean_x) * (y - mean_y))
            .sum::<f64>()
            / points
                .iter()
                .map(|(x, _)| (x - mean_x).powi(2))
                .sum::<f64>();
        let slope_target = 2.0 * FLAT_SWEEP_OMEGA0;
        let slope_rel = (slope - slope_target).abs() / slope_target;

        Ok((
            worst_curvature_rel < 0.01 && slope_rel < 0.02,
            format!(
                "{}; dispersion-vs-half-width slope {slope:.5} off by {:.2e} \
                 relative (target {slope_target}, tolerances 1% and 2%)",
                lines.join("; "),
                slope_rel
            ),
        ))
    })
}

/// On the half line the propagator splits into resonance-pole terms plus a
/// branch-cut background; together they reproduce the oracle.
pub fn criterion_7() -> CriterionOutcome {
    run(7, "pole plus branch-cut decomposition", || {
        let model = half_line_flat_window();
        let generator = Generator::new(Kernel::new(&model));
        let poles = generator.find_poles(&SearchSpec::for_model_size(1))?.poles;
        if poles.len() != 1 {
            return Ok((false, format!("expected 1 resonance pole, found {}", poles.len())));
        }
        let rate = -2.0 * poles[0].z.im;

        let disc = discretize(&model, &DiscretizeSpec::new(4000, GridRule::Gauss))?;
        let disp = disc.dispersion(&survival_state(1))?;
        let t_lo = 1.0 / disp.sqrt();
        let t_hi = 2.0 / rate;
        let times: Vec<f64> = (0..=28)
            .map(|k| t_lo + k as f64 * (t_hi - t_lo) / 28.0)
            .collect();
        let oracle = disc.exact_reduced_propagator(&times)?;

        let contour = ContourSpec::default();
        let mut worst = 0.0f64;
        let mut bg_share = 0.0f64;
        for (k, &t) in times.iter().enumerate() {
            let pole_part = pole_sum_propagator(&poles, t, ResidueMode::Exact)?;
            let bg = generator.background_integral(t, &contour)?;
            let combined = &pole_part + &bg.value;
            worst = worst.max((&combined - &oracle.values[k]).norm());
            bg_share = bg_share.max(bg.value.norm());
        }

        Ok((
            worst < 5e-3,
            format!(
                "pole at {:.4}{:+.4}i, window t in [{t_lo:.2}, {t_hi:.2}]; \
                 worst deviation from oracle {worst:.2e} (tolerance 5e-3), \
                 background reaches {bg_share:.2e}",
                poles[0].z.re, poles[0].z.im
            ),
        ))
    })
}

/// Halving the Volterra step shrinks the error against the closed form by
/// the second-order factor.
pub fn criterion_8() -> CriterionOutcome {
    run(8, "second-order step convergence", || {
        let model = one_level_resonance();
        let kernel = Kernel::new(&model);
        let generator = Generator::new(Kernel::new(&model));
        let poles = generator.find_poles(&SearchSpec::for_model_size(1))?.poles;
        if poles.len() != 2 {
            return Ok((false, format!("expected 2 resonance poles, found {}", poles.len())));
        }

        let t_max = 20.0;
        let mut errs = Vec::new();
        for &h in &[0.1, 0.05] {
            let prop = solve_memory_kernel(&kernel, t_max, h)?;
            let reference = pole_sum_trajectory(&poles, ResidueMode::Exact, &prop.times)?;
            errs.push(max_entry_deviation(&prop.values, &reference.values));
        }
        let ratio = errs[0] / errs[1];

        Ok((
            ratio >= 3.6,
            format!(
                "max error {:.2e} at step 0.1, {:.2e} at step 0.05; ratio {ratio:.2} \
                 (threshold 3.6)",
                errs[0], errs[1]
            ),
        ))
    })
}
