//! Subcommand execution: resolve options, run the library, write artifacts.
//!
//! Every run ends by writing `metadata.json` into the output directory with
//! the model hash, the fully resolved options (flags, defaults, and derived
//! settings alike), and the library version. Nothing written here carries a
//! timestamp, so rerunning a command on the same inputs reproduces every
//! file byte for byte.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use friedrichs::analysis::{
    cross_pole_orthogonality, default_t_pairs, markovianity_profile, semigroup_deviation,
};
use friedrichs::evolution::{build_resonant_density, solve_markovian, solve_memory_kernel, ReducedPropagator};
use friedrichs::kernel::Kernel;
use friedrichs::model::{ChannelKind, Model};
use friedrichs::oracle::{discretize, DiscretizeSpec, GridRule};
use friedrichs::report::{
    full_precision, poles_csv, propagator_csv, CriterionJson, PoleJson, ProfileJson, RunMetadata,
    SemigroupJson,
};
use friedrichs::resolvent::{
    pole_sum_propagator, ContourSpec, Generator, PoleRecord, ResidueMode, SearchSpec,
};
use friedrichs::verify;
use friedrichs::{C64, CMat, CVec, Error, Result};
use sha2::{Digest, Sha256};

use crate::model_file::ModelFile;
use crate::{Cli, Command, Mode, OUT_ENV};

/// Options after defaults and the environment have been folded in.
struct Resolved {
    out_dir: PathBuf,
    step: f64,
    tmax: f64,
    grid_m: usize,
    seed: Option<u64>,
    tol_root: f64,
    tol_deg: f64,
    lambda_sweep: Option<Vec<f64>>,
    mode: Mode,
    state: Option<Vec<f64>>,
}

impl Resolved {
    fn from_cli(cli: &Cli) -> Self {
        let out_dir = cli
            .out
            .clone()
            .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("friedrichs-out"));
        Self {
            out_dir,
            step: cli.step.unwrap_or(0.05),
            tmax: cli.tmax.unwrap_or(10.0),
            grid_m: cli.grid_m.unwrap_or(2000),
            seed: cli.seed,
            tol_root: cli.tol_root.unwrap_or(1e-12),
            tol_deg: cli.tol_deg.unwrap_or(1e-8),
            lambda_sweep: cli.lambda_sweep.clone(),
            mode: cli.mode.unwrap_or(Mode::Exact),
            state: cli.state.clone(),
        }
    }

    fn record(&self, options: &mut BTreeMap<String, String>) {
        options.insert("step".into(), full_precision(self.step));
        options.insert("tmax".into(), full_precision(self.tmax));
        options.insert("grid_m".into(), self.grid_m.to_string());
        options.insert("tol_root".into(), full_precision(self.tol_root));
        options.insert("tol_deg".into(), full_precision(self.tol_deg));
        options.insert("mode".into(), self.mode.as_str().into());
        if let Some(sweep) = &self.lambda_sweep {
            let cells: Vec<String> = sweep.iter().map(|x| full_precision(*x)).collect();
            options.insert("lambda_sweep".into(), cells.join(","));
        }
    }
}

/// Runs the parsed command line to completion and returns the process exit
/// code: 0 for success, 1 when `check` finds a failing criterion.
pub fn execute(cli: &Cli) -> Result<i32> {
    let resolved = Resolved::from_cli(cli);
    fs::create_dir_all(&resolved.out_dir)
        .map_err(|e| Error::InvalidInput(format!("cannot create output directory: {e}")))?;

    let loaded = match &cli.model {
        Some(path) => Some(load_model(path)?),
        None => None,
    };

    let mut options = BTreeMap::new();
    options.insert("subcommand".into(), cli.command.name().to_string());
    resolved.record(&mut options);
    if let Some((path, _, _)) = &loaded {
        options.insert("model_path".into(), path.display().to_string());
    }

    let mut contour_eps = None;
    let exit = match &cli.command {
        Command::Kernel => {
            let (_, _, model) = require_model(&loaded, "kernel")?;
            run_kernel(model, &resolved, &mut options)?
        }
        Command::Evolve => {
            let (_, _, model) = require_model(&loaded, "evolve")?;
            run_evolve(model, &resolved, &mut options)?
        }
        Command::Poles => {
            let (_, _, model) = require_model(&loaded, "poles")?;
            run_poles(model, &resolved, &mut options)?
        }
        Command::Background => {
            let (_, _, model) = require_model(&loaded, "background")?;
            run_background(model, &resolved, &mut options, &mut contour_eps)?
        }
        Command::Oracle => {
            let (_, _, model) = require_model(&loaded, "oracle")?;
            run_oracle(model, &resolved, &mut options)?
        }
        Command::Semigroup => {
            let (_, _, model) = require_model(&loaded, "semigroup")?;
            run_semigroup(model, &resolved, &mut options)?
        }
        Command::Check { only } => run_check(only.as_deref(), &resolved, &mut options)?,
    };

    let metadata = RunMetadata {
        tool_version: friedrichs::VERSION.to_string(),
        model_sha256: loaded
            .as_ref()
            .map(|(_, hash, _)| hash.clone())
            .unwrap_or_else(|| "builtin-scenarios".into()),
        seed: resolved.seed,
        options,
        contour_eps,
    };
    write_json(&resolved.out_dir, "metadata.json", &metadata)?;
    Ok(exit)
}

fn load_model(path: &Path) -> Result<(PathBuf, String, Model)> {
    let bytes = fs::read(path)
        .map_err(|e| Error::InvalidInput(format!("cannot read {}: {e}", path.display())))?;
    let hash = hex_digest(&bytes);
    let text = String::from_utf8(bytes)
        .map_err(|e| Error::InvalidInput(format!("{} is not UTF-8: {e}", path.display())))?;
    let model = ModelFile::parse(&text)?.to_model()?;
    Ok((path.to_path_buf(), hash, model))
}

fn require_model<'a>(
    loaded: &'a Option<(PathBuf, String, Model)>,
    sub: &str,
) -> Result<(&'a Path, &'a str, &'a Model)> {
    loaded
        .as_ref()
        .map(|(p, h, m)| (p.as_path(), h.as_str(), m))
        .ok_or_else(|| Error::InvalidInput(format!("`{sub}` needs --model PATH")))
}

fn hex_digest(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

fn write_text(dir: &Path, name: &str, text: &str) -> Result<()> {
    fs::write(dir.join(name), text)
        .map_err(|e| Error::InvalidInput(format!("cannot write {name}: {e}")))
}

fn write_json<T: serde::Serialize>(dir: &Path, name: &str, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::InvalidInput(format!("cannot serialize {name}: {e}")))?;
    text.push('\n');
    write_text(dir, name, &text)
}

/// Uniform grid k·step for k in 0..=floor(tmax/step), optionally without 0.
fn time_grid(step: f64, tmax: f64, include_zero: bool) -> Result<Vec<f64>> {
    if !(step > 0.0) || !(tmax >= step) {
        return Err(Error::InvalidInput(format!(
            "need 0 < step <= tmax, got step = {step}, tmax = {tmax}"
        )));
    }
    let n = (tmax / step + 1e-9).floor() as usize;
    let first = if include_zero { 0 } else { 1 };
    Ok((first..=n).map(|k| k as f64 * step).collect())
}

/// Normalized initial amplitudes: `--state` re,im pairs, default level 0.
fn resolve_state(n: usize, flat: &Option<Vec<f64>>, options: &mut BTreeMap<String, String>) -> Result<CVec> {
    let state = match flat {
        None => {
            let mut c = CVec::zeros(n);
            c[0] = C64::new(1.0, 0.0);
            c
        }
        Some(cells) => {
            if cells.len() != 2 * n {
                return Err(Error::InvalidInput(format!(
                    "--state needs {} numbers (re,im per level), got {}",
                    2 * n,
                    cells.len()
                )));
            }
            let mut c = CVec::from_fn(n, |k, _| C64::new(cells[2 * k], cells[2 * k + 1]));
            let norm = c.norm();
            if !(norm > 0.0) {
                return Err(Error::InvalidInput("--state must be nonzero".into()));
            }
            c /= C64::new(norm, 0.0);
            c
        }
    };
    let cells: Vec<String> = state
        .iter()
        .flat_map(|a| [full_precision(a.re), full_precision(a.im)])
        .collect();
    options.insert("state".into(), cells.join(","));
    Ok(state)
}

/// λ grid: the sweep when given, else the union of channel supports padded
/// and clipped to a finite span around the levels.
fn lambda_grid(model: &Model, sweep: &Option<Vec<f64>>) -> Vec<f64> {
    if let Some(s) = sweep {
        return s.clone();
    }
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for ch in model.channels() {
        let (a, b) = match *ch.kind() {
            ChannelKind::FlatWindow {
                lambda_min,
                lambda_max,
            } => {
                if lambda_min.is_infinite() {
                    continue;
                }
                (lambda_min, lambda_max)
            }
            ChannelKind::Lorentzian { mu, gamma } => (mu - 10.0 * gamma, mu + 10.0 * gamma),
            ChannelKind::Ohmic { lambda_c, .. } => (0.0, 8.0 * lambda_c),
        };
        lo = lo.min(a);
        hi = hi.max(b);
    }
    for &e in model.levels().energies() {
        lo = lo.min(e - 1.0);
        hi = hi.max(e + 1.0);
    }
    let pad = 0.05 * (hi - lo).max(1.0);
    let (lo, hi) = (lo - pad, hi + pad);
    let n = 400;
    (0..=n)
        .map(|k| lo + (hi - lo) * k as f64 / n as f64)
        .collect()
}

fn matrix_csv_header(prefix: &str, n: usize, lead: &str) -> String {
    let mut cols = vec![lead.to_string()];
    for r in 0..n {
        for c in 0..n {
            cols.push(format!("re_{prefix}_{r}_{c}"));
            cols.push(format!("im_{prefix}_{r}_{c}"));
        }
    }
    cols.join(",")
}

fn push_matrix_row(out: &mut String, lead: &[f64], m: &CMat) {
    let mut row: Vec<String> = lead.iter().map(|x| full_precision(*x)).collect();
    for r in 0..m.nrows() {
        for c in 0..m.ncols() {
            row.push(full_precision(m[(r, c)].re));
            row.push(full_precision(m[(r, c)].im));
        }
    }
    out.push_str(&row.join(","));
    out.push('\n');
}

// ---------------------------------------------------------------------------
// kernel

fn run_kernel(
    model: &Model,
    resolved: &Resolved,
    options: &mut BTreeMap<String, String>,
) -> Result<i32> {
    let kernel = Kernel::new(model);
    let n = model.n_levels();

    let lambdas = lambda_grid(model, &resolved.lambda_sweep);
    let mut density = matrix_csv_header("w", n, "lambda");
    density.push('\n');
    for &l in &lambdas {
        push_matrix_row(&mut density, &[l], &model.omega_at(l)?);
    }
    write_text(&resolved.out_dir, "spectral_density.csv", &density)?;

    match kernel.alpha_t(0.0) {
        Err(Error::DeltaKernel) => {
            options.insert(
                "kernel_t".into(),
                "skipped: delta kernel has no pointwise alpha(t)".into(),
            );
        }
        Err(e) => return Err(e),
        Ok(_) => {
            let mut table = matrix_csv_header("a", n, "t");
            table.push('\n');
            for t in time_grid(resolved.step, resolved.tmax, true)? {
                push_matrix_row(&mut table, &[t], &kernel.alpha_t(t)?);
            }
            write_text(&resolved.out_dir, "kernel_t.csv", &table)?;
        }
    }

    // z-grid: the first sheet one unit above the cut, the continuation half
    // a unit below. Rows too close to a branch point are skipped.
    let mut ztable = String::from("sheet,");
    ztable.push_str(&matrix_csv_header("a", n, "re_z,im_z"));
    ztable.push('\n');
    let mut skipped = 0usize;
    for &x in &lambdas {
        for (sheet, im, value) in [
            (1, 1.0, kernel.alpha_z_first_sheet(C64::new(x, 1.0))),
            (2, -0.5, kernel.alpha_z_second_sheet(C64::new(x, -0.5))),
        ] {
            match value {
                Ok(a) => {
                    ztable.push_str(&format!("{sheet},"));
                    push_matrix_row(&mut ztable, &[x, im], &a);
                }
                Err(Error::BranchPoint { .. }) => skipped += 1,
                Err(e) => return Err(e),
            }
        }
    }
    if skipped > 0 {
        options.insert("kernel_z_skipped_rows".into(), skipped.to_string());
    }
    write_text(&resolved.out_dir, "kernel_z.csv", &ztable)?;
    Ok(0)
}

// ---------------------------------------------------------------------------
// evolve

fn run_evolve(
    model: &Model,
    resolved: &Resolved,
    options: &mut BTreeMap<String, String>,
) -> Result<i32> {
    let kernel = Kernel::new(model);
    let state = resolve_state(model.n_levels(), &resolved.state, options)?;

    let volterra = match solve_memory_kernel(&kernel, resolved.tmax, resolved.step) {
        Ok(prop) => {
            write_text(&resolved.out_dir, "volterra.csv", &propagator_csv(&prop))?;
            options.insert(
                "volterra_scheme_estimate".into(),
                full_precision(prop.scheme_estimate),
            );
            Some(prop)
        }
        Err(Error::DeltaKernel) => {
            options.insert(
                "volterra".into(),
                "skipped: delta kernel, Markovian generator is exact".into(),
            );
            None
        }
        Err(e) => return Err(e),
    };

    let omega_hat = build_resonant_density(model)?.matrix;
    let markovian = solve_markovian(model, &omega_hat, resolved.tmax, resolved.step)?;
    write_text(&resolved.out_dir, "markovian.csv", &propagator_csv(&markovian))?;

    let primary = volterra.as_ref().unwrap_or(&markovian);
    options.insert("survival_source".into(), primary.source.to_string());
    let mut survival = String::from("t,re_amp,im_amp,survival\n");
    for (k, &t) in primary.times.iter().enumerate() {
        let amp: C64 = state.dotc(&(&primary.values[k] * &state));
        survival.push_str(&format!(
            "{},{},{},{}\n",
            full_precision(t),
            full_precision(amp.re),
            full_precision(amp.im),
            full_precision(amp.norm_sqr())
        ));
    }
    write_text(&resolved.out_dir, "survival.csv", &survival)?;
    Ok(0)
}

// ---------------------------------------------------------------------------
// poles

fn search_poles(model: &Model, resolved: &Resolved) -> Result<(Vec<PoleRecord>, Vec<(C64, String)>)> {
    let kernel = Kernel::new(model);
    let mut generator = Generator::new(kernel);
    generator.degeneracy_tol = resolved.tol_deg;
    let mut spec = SearchSpec::for_model_size(model.n_levels());
    spec.tol = resolved.tol_root;
    let report = generator.find_poles(&spec)?;
    let unmatched = report
        .unmatched
        .into_iter()
        .map(|u| (u.seed, u.reason))
        .collect();
    Ok((report.poles, unmatched))
}

fn run_poles(
    model: &Model,
    resolved: &Resolved,
    options: &mut BTreeMap<String, String>,
) -> Result<i32> {
    let (poles, unmatched) = search_poles(model, resolved)?;
    options.insert("n_poles".into(), poles.len().to_string());
    options.insert("n_unmatched_seeds".into(), unmatched.len().to_string());

    write_text(&resolved.out_dir, "poles.csv", &poles_csv(&poles))?;

    let pole_rows: Vec<PoleJson> = poles.iter().map(PoleJson::from).collect();
    let unmatched_rows: Vec<serde_json::Value> = unmatched
        .iter()
        .map(|(seed, reason)| {
            serde_json::json!({"re_seed": seed.re, "im_seed": seed.im, "reason": reason})
        })
        .collect();
    write_json(
        &resolved.out_dir,
        "poles.json",
        &serde_json::json!({"poles": pole_rows, "unmatched": unmatched_rows}),
    )?;

    let projector_rows: Vec<serde_json::Value> = poles
        .iter()
        .map(|p| {
            serde_json::json!({
                "re_z": p.z.re,
                "im_z": p.z.im,
                "branch": p.branch,
                "projector": matrix_json(&p.projector),
                "residue": matrix_json(&p.residue),
            })
        })
        .collect();
    write_json(&resolved.out_dir, "projectors.json", &projector_rows)?;

    if poles.is_empty() {
        options.insert("pole_trajectory".into(), "skipped: no poles found".into());
    } else {
        let mode = residue_mode(resolved.mode);
        let n = model.n_levels();
        let mut table = matrix_csv_header("u", n, "t");
        table.push('\n');
        for t in time_grid(resolved.step, resolved.tmax, true)? {
            push_matrix_row(&mut table, &[t], &pole_sum_propagator(&poles, t, mode)?);
        }
        write_text(&resolved.out_dir, "pole_trajectory.csv", &table)?;
    }
    Ok(0)
}

fn residue_mode(mode: Mode) -> ResidueMode {
    match mode {
        Mode::Ww => ResidueMode::WwApprox,
        Mode::Exact => ResidueMode::Exact,
    }
}

fn matrix_json(m: &CMat) -> serde_json::Value {
    let rows: Vec<Vec<[f64; 2]>> = (0..m.nrows())
        .map(|r| (0..m.ncols()).map(|c| [m[(r, c)].re, m[(r, c)].im]).collect())
        .collect();
    serde_json::json!(rows)
}

// ---------------------------------------------------------------------------
// background

fn run_background(
    model: &Model,
    resolved: &Resolved,
    options: &mut BTreeMap<String, String>,
    contour_eps: &mut Option<f64>,
) -> Result<i32> {
    let generator = Generator::new(Kernel::new(model));
    let contour = ContourSpec::default();
    let n = model.n_levels();
    let mut table = matrix_csv_header("b", n, "t");
    table.push_str(",truncation_estimate,quadrature_estimate\n");
    for t in time_grid(resolved.step, resolved.tmax, false)? {
        let term = generator.background_integral(t, &contour)?;
        let mut body = String::new();
        push_matrix_row(&mut body, &[t], &term.value);
        let row = format!(
            "{},{},{}\n",
            body.trim_end(),
            full_precision(term.truncation_estimate),
            full_precision(term.quadrature_estimate)
        );
        table.push_str(&row);
        contour_eps.get_or_insert(term.eps);
    }
    write_text(&resolved.out_dir, "background.csv", &table)?;
    options.insert("contour_y_max".into(), full_precision(contour.y_max));
    options.insert("contour_tol".into(), full_precision(contour.tol));
    Ok(0)
}

// ---------------------------------------------------------------------------
// oracle

fn run_oracle(
    model: &Model,
    resolved: &Resolved,
    options: &mut BTreeMap<String, String>,
) -> Result<i32> {
    let state = resolve_state(model.n_levels(), &resolved.state, options)?;
    let spec = DiscretizeSpec::new(resolved.grid_m, GridRule::Gauss);
    let disc = discretize(model, &spec)?;
    let grid = time_grid(resolved.step, resolved.tmax, true)?;
    let prop = disc.exact_reduced_propagator(&grid)?;

    write_text(&resolved.out_dir, "oracle.csv", &propagator_csv(&prop))?;
    write_text(&resolved.out_dir, "eigenvalues.csv", &disc.eigenvalue_csv())?;
    for level in 0..model.n_levels() {
        write_text(
            &resolved.out_dir,
            &format!("weights_level{level}.csv"),
            &disc.spectral_weight_csv(level)?,
        )?;
    }

    let mut survival = String::from("t,survival\n");
    for (k, &t) in prop.times.iter().enumerate() {
        let p = state.dotc(&(&prop.values[k] * &state)).norm_sqr();
        survival.push_str(&format!("{},{}\n", full_precision(t), full_precision(p)));
    }
    write_text(&resolved.out_dir, "survival.csv", &survival)?;

    options.insert("n_modes".into(), disc.n_modes().to_string());
    options.insert("gram_defect".into(), full_precision(disc.gram_defect()));
    options.insert("t_recurrence".into(), full_precision(disc.t_recurrence()));
    options.insert(
        "discretization_estimate_tmax".into(),
        full_precision(disc.discretization_estimate(resolved.tmax)),
    );
    if let Ok(d) = disc.dispersion(&state) {
        options.insert("dispersion".into(), full_precision(d));
    }
    if let Some(t_rec) = prop.recurrence_warning {
        options.insert("recurrence_warning_t".into(), full_precision(t_rec));
    }
    Ok(0)
}

// ---------------------------------------------------------------------------
// semigroup

fn run_semigroup(
    model: &Model,
    resolved: &Resolved,
    options: &mut BTreeMap<String, String>,
) -> Result<i32> {
    let kernel = Kernel::new(model);
    let mut notes: Vec<String> = vec![];

    let prop: ReducedPropagator = match solve_memory_kernel(&kernel, resolved.tmax, resolved.step) {
        Ok(p) => p,
        Err(Error::DeltaKernel) => {
            notes.push("delta kernel: deviation measured on the Markovian semigroup itself".into());
            let omega_hat = build_resonant_density(model)?.matrix;
            solve_markovian(model, &omega_hat, resolved.tmax, resolved.step)?
        }
        Err(e) => return Err(e),
    };
    options.insert("deviation_source".into(), prop.source.to_string());

    // Pairs built from a quarter horizon snapped to the step grid, so every
    // probe time is a solver node.
    let k = (resolved.tmax / (4.0 * resolved.step)).floor() as usize;
    if k == 0 {
        return Err(Error::InvalidInput(format!(
            "semigroup needs tmax >= 4 steps, got step = {}, tmax = {}",
            resolved.step, resolved.tmax
        )));
    }
    let tau = k as f64 * resolved.step;
    options.insert("tau".into(), full_precision(tau));
    let report = semigroup_deviation(&prop, &default_t_pairs(tau))?;

    let cross_pole: Option<Vec<Vec<f64>>> = match search_poles(model, resolved) {
        Ok((poles, _)) if poles.len() >= 2 => {
            let m = cross_pole_orthogonality(&poles)?;
            Some(
                (0..m.nrows())
                    .map(|r| (0..m.ncols()).map(|c| m[(r, c)]).collect())
                    .collect(),
            )
        }
        Ok((poles, _)) => {
            notes.push(format!(
                "cross-pole matrix needs at least two poles, found {}",
                poles.len()
            ));
            None
        }
        Err(e) => {
            notes.push(format!("pole search failed: {e}"));
            None
        }
    };

    let profile = markovianity_profile(&kernel, resolved.tmax)?;

    write_json(
        &resolved.out_dir,
        "semigroup.json",
        &serde_json::json!({
            "report": SemigroupJson::from(&report),
            "cross_pole": cross_pole,
            "profile": ProfileJson::from(&profile),
            "notes": notes,
        }),
    )?;
    Ok(0)
}

// ---------------------------------------------------------------------------
// check

fn run_check(
    only: Option<&[usize]>,
    resolved: &Resolved,
    options: &mut BTreeMap<String, String>,
) -> Result<i32> {
    let outcomes = match only {
        None => verify::run_all(),
        Some(indices) => {
            let mut list = Vec::with_capacity(indices.len());
            for &i in indices {
                list.push(match i {
                    1 => verify::criterion_1(),
                    2 => verify::criterion_2(),
                    3 => verify::criterion_3(),
                    4 => verify::criterion_4(),
                    5 => verify::criterion_5(),
                    6 => verify::criterion_6(),
                    7 => verify::criterion_7(),
                    8 => verify::criterion_8(),
                    other => {
                        return Err(Error::InvalidInput(format!(
                            "criterion index {other} out of range 1-8"
                        )))
                    }
                });
            }
            list
        }
    };

    for outcome in &outcomes {
        println!("{outcome}");
    }
    let rows: Vec<CriterionJson> = outcomes.iter().map(CriterionJson::from).collect();
    write_json(&resolved.out_dir, "check.json", &rows)?;

    if let Some(indices) = only {
        let cells: Vec<String> = indices.iter().map(|i| i.to_string()).collect();
        options.insert("only".into(), cells.join(","));
    }
    let all_passed = outcomes.iter().all(|o| o.passed);
    options.insert(
        "verdict".into(),
        if all_passed { "pass".into() } else { "fail".into() },
    );
    Ok(if all_passed { 0 } else { 1 })
}
