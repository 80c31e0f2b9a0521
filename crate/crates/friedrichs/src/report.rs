//! Export surfaces: CSV tables and JSON-serializable mirrors of analysis
//! results, consumed by the command-line front end.
//!
//! Floats are written with 17 significant digits so every f64 round-trips
//! exactly; nothing here embeds a timestamp, so reruns of the same inputs
//! produce byte-identical files.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::analysis::{DecayFit, MarkovianityProfile, SemigroupReport};
use crate::evolution::ReducedPropagator;
use crate::resolvent::PoleRecord;
use crate::verify::CriterionOutcome;

/// Full-precision float format; round-trips f64 exactly.
pub fn full_precision(x: f64) -> String {
    format!("{x:.16e}")
}

/// One row per time, columns `t` then re/im of each propagator entry in
/// row-major order.
pub fn propagator_csv(prop: &ReducedPropagator) -> String {
    let n = prop.n_levels();
    let mut header = vec!["t".to_string()];
    for r in 0..n {
        for c in 0..n {
            header.push(format!("re_u_{r}_{c}"));
            header.push(format!("im_u_{r}_{c}"));
        }
    }
    let mut out = header.join(",");
    out.push('\n');
    for (k, &t) in prop.times.iter().enumerate() {
        let mut row = vec![full_precision(t)];
        for r in 0..n {
            for c in 0..n {
                let v = prop.values[k][(r, c)];
                row.push(full_precision(v.re));
                row.push(full_precision(v.im));
            }
        }
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

/// One row per located pole: position, eigenvalue branch, Newton residual,
/// and the projector trace (1 for a clean rank-1 pole).
pub fn poles_csv(poles: &[PoleRecord]) -> String {
    let mut out = String::from("re_z,im_z,branch,newton_residual,trace_q_re,trace_q_im\n");
    for p in poles {
        let tr = p.projector.trace();
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            full_precision(p.z.re),
            full_precision(p.z.im),
            p.branch,
            full_precision(p.newton_residual),
            full_precision(tr.re),
            full_precision(tr.im),
        ));
    }
    out
}

#[derive(Debug, Clone, Serialize)]
pub struct PoleJson {
    pub re_z: f64,
    pub im_z: f64,
    pub branch: usize,
    pub newton_residual: f64,
    pub trace_q_re: f64,
    pub trace_q_im: f64,
}

impl From<&PoleRecord> for PoleJson {
    fn from(p: &PoleRecord) -> Self {
        let tr = p.projector.trace();
        Self {
            re_z: p.z.re,
            im_z: p.z.im,
            branch: p.branch,
            newton_residual: p.newton_residual,
            trace_q_re: tr.re,
            trace_q_im: tr.im,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SkippedPairJson {
    pub t1: f64,
    pub t2: f64,
    pub reason: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct SemigroupJson {
    pub source: String,
    pub pairs: Vec<(f64, f64)>,
    pub deviation: Vec<f64>,
    pub max_deviation: f64,
    pub skipped: Vec<SkippedPairJson>,
}

impl From<&SemigroupReport> for SemigroupJson {
    fn from(r: &SemigroupReport) -> Self {
        Self {
            source: r.source.to_string(),
            pairs: r.pairs.clone(),
            deviation: r.deviation.clone(),
            max_deviation: r.max_deviation,
            skipped: r
                .skipped
                .iter()
                .map(|((t1, t2), reason)| SkippedPairJson {
                    t1: *t1,
                    t2: *t2,
                    reason: reason.clone(),
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct FitJson {
    pub rate: f64,
    pub phase: f64,
    pub r_squared: f64,
    pub window_start: f64,
    pub window_end: f64,
}

impl From<&DecayFit> for FitJson {
    fn from(f: &DecayFit) -> Self {
        Self {
            rate: f.rate,
            phase: f.phase,
            r_squared: f.r_squared,
            window_start: f.window.0,
            window_end: f.window.1,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ProfileJson {
    pub kernel_width: f64,
    pub flatness: f64,
    pub delta_quality: f64,
}

impl From<&MarkovianityProfile> for ProfileJson {
    fn from(p: &MarkovianityProfile) -> Self {
        Self {
            kernel_width: p.kernel_width,
            flatness: p.flatness,
            delta_quality: p.delta_quality,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CriterionJson {
    pub index: usize,
    pub name: String,
    pub passed: bool,
    pub details: String,
}

impl From<&CriterionOutcome> for CriterionJson {
    fn from(c: &CriterionOutcome) -> Self {
        Self {
            index: c.index,
            name: c.name.to_string(),
            passed: c.passed,
            details: c.details.clone(),
        }
    }
}

/// Provenance block written next to every exported table. Deliberately
/// timestamp-free.
#[derive(Debug, Clone, Serialize)]
pub struct RunMetadata {
    pub tool_version: String,
    /// SHA-256 of the model file the run was configured from.
    pub model_sha256: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Flags and derived settings, as plain strings.
    pub options: BTreeMap<String, String>,
    /// Offset of the background contour from the imaginary axis, when a
    /// background term was computed.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub contour_eps: Option<f64>,
}
