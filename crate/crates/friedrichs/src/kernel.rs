//! Spectral correlation kernel α(t), its Cauchy/Laplace transform, and the
//! continuation of that transform through the real-axis cut.
//!
//! Conventions used throughout:
//! - α(t) = ∫ ω(λ) e^{−iλt} dλ,
//! - iα(z) = ∫ ω(λ)/(z − λ) dλ for Im z > 0 (first sheet),
//! - iα^II(z) = iα(z) continued through the cut: the first-sheet closed form
//!   carried into the lower half-plane minus 2πi ω(z), where ω(z) is the
//!   analytic continuation of the density.
//!
//! Closed forms cover flat windows and lorentzians; ohmic channels fall back
//! to adaptive quadrature with the profile truncated at λ = u_max·λ_c.

use crate::model::{ChannelKind, CouplingChannel, Model};
use crate::{quad, C64, CMat, Error, Result, I};
use std::f64::consts::PI;

/// Tolerances for the quadrature fallback paths.
#[derive(Debug, Clone)]
pub struct QuadratureSpec {
    /// Relative tolerance passed to the adaptive integrator.
    pub tol: f64,
    /// Panel budget before giving up with a tolerance error.
    pub max_panels: usize,
    /// Ohmic truncation in units of λ_c; the neglected tail is ~e^{−u_max}.
    pub ohmic_u_max: f64,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_panels: 20_000,
            ohmic_u_max: 40.0,
        }
    }
}

/// Correlation kernel of one model.
#[derive(Debug, Clone)]
pub struct Kernel<'a> {
    model: &'a Model,
    spec: QuadratureSpec,
}

/// Distance (relative to the endpoint scale) below which evaluation at a
/// branch point is refused.
const BRANCH_POINT_TOL: f64 = 1e-10;

impl<'a> Kernel<'a> {
    pub fn new(model: &'a Model) -> Self {
        Self::with_spec(model, QuadratureSpec::default())
    }

    pub fn with_spec(model: &'a Model, spec: QuadratureSpec) -> Self {
        Self { model, spec }
    }

    pub fn model(&self) -> &Model {
        self.model
    }

    pub fn spec(&self) -> &QuadratureSpec {
        &self.spec
    }

    fn guard_branch_points(&self, z: C64) -> Result<()> {
        for &e in &self.model.cut_endpoints() {
            let dist = (z - C64::new(e, 0.0)).norm();
            if dist < BRANCH_POINT_TOL * e.abs().max(1.0) {
                return Err(Error::BranchPoint {
                    z,
                    branch_point: e,
                    dist,
                });
            }
        }
        Ok(())
    }

    /// Correlation matrix α(t) = ∫ ω(λ) e^{−iλt} dλ.
    ///
    /// Flat windows and lorentzians use closed forms; ohmic channels
    /// integrate numerically (cost grows with |t|·λ_c·u_max from the
    /// oscillation count). A window covering the whole line has a delta
    /// kernel and is refused; the semigroup propagator handles that regime.
    pub fn alpha_t(&self, t: f64) -> Result<CMat> {
        if !t.is_finite() {
            return Err(Error::InvalidInput(format!("alpha_t needs finite t, got {t}")));
        }
        let n = self.model.n_levels();
        let mut acc = CMat::zeros(n, n);
        for ch in self.model.channels() {
            let shape: C64 = match *ch.kind() {
                ChannelKind::FlatWindow {
                    lambda_min: a,
                    lambda_max: b,
                } => {
                    if a.is_infinite() {
                        return Err(Error::DeltaKernel);
                    }
                    if t == 0.0 {
                        C64::new(b - a, 0.0)
                    } else {
                        // ∫_a^b e^{−iλt} dλ = e^{−i(a+b)t/2} · 2 sin((b−a)t/2)/t.
                        let phase = (-I * C64::new(0.5 * (a + b) * t, 0.0)).exp();
                        phase * (2.0 * (0.5 * (b - a) * t).sin() / t)
                    }
                }
                ChannelKind::Lorentzian { mu, gamma } => {
                    (-I * C64::new(mu * t, 0.0)).exp() * (-gamma * t.abs()).exp()
                }
                ChannelKind::Ohmic { .. } => self.ohmic_fourier(ch, t)?,
            };
            acc += ch.gg_dagger() * shape;
        }
        Ok(acc)
    }

    fn ohmic_fourier(&self, ch: &CouplingChannel, t: f64) -> Result<C64> {
        let kind = ch.kind().clone();
        let upper = match kind {
            ChannelKind::Ohmic { lambda_c, .. } => self.spec.ohmic_u_max * lambda_c,
            _ => unreachable!(),
        };
        let (value, _) = quad::adaptive(
            |l| kind.profile(l) * (-I * C64::new(l * t, 0.0)).exp(),
            0.0,
            upper,
            self.spec.tol,
            self.spec.max_panels,
        )?;
        Ok(value)
    }

    /// α(0) = ∫ ω(λ) dλ, the integrated channel strength.
    pub fn alpha_zero(&self) -> Result<CMat> {
        let n = self.model.n_levels();
        let mut acc = CMat::zeros(n, n);
        for ch in self.model.channels() {
            let strength: C64 = match *ch.kind() {
                ChannelKind::FlatWindow {
                    lambda_min: a,
                    lambda_max: b,
                } => {
                    if a.is_infinite() {
                        return Err(Error::DeltaKernel);
                    }
                    C64::new(b - a, 0.0)
                }
                ChannelKind::Lorentzian { .. } => C64::new(1.0, 0.0),
                ChannelKind::Ohmic { .. } => self.ohmic_fourier(ch, 0.0)?,
            };
            acc += ch.gg_dagger() * strength;
        }
        Ok(acc)
    }

    /// First-sheet transform α(z) with iα(z) = ∫ ω(λ)/(z−λ) dλ, Im z > 0.
    pub fn alpha_z_first_sheet(&self, z: C64) -> Result<CMat> {
        if !(z.im > 0.0) {
            return Err(Error::FirstSheetDomain { z });
        }
        Ok(self.cauchy_transform(z)? * (-I))
    }

    /// The single-valued Cauchy transform off the cut, on either side.
    ///
    /// Above the axis this is the first sheet. Below the axis it is NOT the
    /// resonance continuation (no sheet crossing happens); it is what a
    /// contour that stays off the support sees. Evaluation on the support
    /// itself is refused.
    pub fn alpha_z_off_cut(&self, z: C64) -> Result<CMat> {
        if z.im == 0.0 && self.model.omega_at(z.re)?.norm() != 0.0 {
            return Err(Error::InvalidInput(format!(
                "alpha_z_off_cut at z={z} lies on the support of the density"
            )));
        }
        self.guard_branch_points(z)?;
        Ok(self.cauchy_transform(z)? * (-I))
    }

    fn cauchy_transform(&self, z: C64) -> Result<CMat> {
        let n = self.model.n_levels();
        let mut acc = CMat::zeros(n, n);
        for ch in self.model.channels() {
            let shape: C64 = match *ch.kind() {
                ChannelKind::FlatWindow {
                    lambda_min: a,
                    lambda_max: b,
                } => {
                    if a.is_infinite() {
                        // Whole-line window: boundary value ∓iπ by half-plane.
                        if z.im > 0.0 || (z.im == 0.0 && !z.im.is_sign_negative()) {
                            C64::new(0.0, -PI)
                        } else {
                            C64::new(0.0, PI)
                        }
                    } else {
                        (z - C64::new(a, 0.0)).ln() - (z - C64::new(b, 0.0)).ln()
                    }
                }
                ChannelKind::Lorentzian { mu, gamma } => {
                    // Plain integral: pole picked up flips with the half-plane.
                    let sgn = if z.im > 0.0 || (z.im == 0.0 && !z.im.is_sign_negative()) {
                        1.0
                    } else {
                        -1.0
                    };
                    C64::new(1.0, 0.0) / (z - C64::new(mu, -sgn * gamma))
                }
                ChannelKind::Ohmic { lambda_c, .. } => {
                    let kind = ch.kind().clone();
                    let upper = self.spec.ohmic_u_max * lambda_c;
                    let (value, _) = quad::adaptive(
                        |l| kind.profile(l) / (z - C64::new(l, 0.0)),
                        0.0,
                        upper,
                        self.spec.tol,
                        self.spec.max_panels,
                    )?;
                    value
                }
            };
            acc += ch.gg_dagger() * shape;
        }
        Ok(acc)
    }

    /// Second-sheet transform α^II(z) for Im z ≤ 0: the continuation of the
    /// first sheet through the cut. On the real axis this returns the gluing
    /// value (the boundary limit from above on the cut).
    pub fn alpha_z_second_sheet(&self, z: C64) -> Result<CMat> {
        if z.im > 0.0 {
            return Err(Error::InvalidInput(format!(
                "alpha_z_second_sheet needs Im z <= 0, got {z}; use alpha_z_first_sheet above the axis"
            )));
        }
        self.guard_branch_points(z)?;
        Ok(self.continued_transform(z)? * (-I))
    }

    fn continued_transform(&self, z: C64) -> Result<CMat> {
        let n = self.model.n_levels();
        let mut acc = CMat::zeros(n, n);
        // Real-axis arguments take the limit from below of the continued
        // function, which equals the limit from above of the first sheet on
        // the cut. Normalizing the zero sign makes the log branches agree.
        let zn = if z.im == 0.0 { C64::new(z.re, -0.0) } else { z };
        for ch in self.model.channels() {
            let shape: C64 = match *ch.kind() {
                ChannelKind::FlatWindow {
                    lambda_min: a,
                    lambda_max: b,
                } => {
                    if a.is_infinite() {
                        // Constant continuation of the upper boundary value.
                        C64::new(0.0, -PI)
                    } else {
                        (zn - C64::new(a, 0.0)).ln() - (zn - C64::new(b, 0.0)).ln()
                            - C64::new(0.0, 2.0 * PI)
                    }
                }
                ChannelKind::Lorentzian { mu, gamma } => {
                    // The rational first-sheet form is already the
                    // continuation; no subtraction term.
                    C64::new(1.0, 0.0) / (zn - C64::new(mu, -gamma))
                }
                ChannelKind::Ohmic { s, lambda_c } => {
                    let cont = continued_ohmic_profile(s, lambda_c, zn)?;
                    if zn.im == 0.0 {
                        // Sokhotski limit from below plus the sheet shift.
                        let x = zn.re;
                        let pv = self.ohmic_pv(ch.kind(), x)?;
                        C64::new(pv, 0.0) + I * PI * ch.kind().profile(x)
                            - C64::new(0.0, 2.0 * PI) * cont
                    } else {
                        let kind = ch.kind().clone();
                        let upper = self.spec.ohmic_u_max * lambda_c;
                        let (plain, _) = quad::adaptive(
                            |l| kind.profile(l) / (zn - C64::new(l, 0.0)),
                            0.0,
                            upper,
                            self.spec.tol,
                            self.spec.max_panels,
                        )?;
                        plain - C64::new(0.0, 2.0 * PI) * cont
                    }
                }
            };
            acc += ch.gg_dagger() * shape;
        }
        Ok(acc)
    }

    /// Derivative dα^II/dz of the second-sheet transform.
    ///
    /// Ohmic channels are supported only strictly below the axis (on the cut
    /// the derivative is hypersingular).
    pub fn dalpha_dz_second_sheet(&self, z: C64) -> Result<CMat> {
        if z.im > 0.0 {
            return Err(Error::InvalidInput(format!(
                "dalpha_dz_second_sheet needs Im z <= 0, got {z}"
            )));
        }
        self.guard_branch_points(z)?;
        let n = self.model.n_levels();
        let mut acc = CMat::zeros(n, n);
        for ch in self.model.channels() {
            let shape: C64 = match *ch.kind() {
                ChannelKind::FlatWindow {
                    lambda_min: a,
                    lambda_max: b,
                } => {
                    if a.is_infinite() {
                        C64::new(0.0, 0.0)
                    } else {
                        C64::new(1.0, 0.0) / (z - C64::new(a, 0.0))
                            - C64::new(1.0, 0.0) / (z - C64::new(b, 0.0))
                    }
                }
                ChannelKind::Lorentzian { mu, gamma } => {
                    let d = z - C64::new(mu, -gamma);
                    -C64::new(1.0, 0.0) / (d * d)
                }
                ChannelKind::Ohmic { s, lambda_c } => {
                    if z.im == 0.0 {
                        return Err(Error::InvalidInput(
                            "ohmic second-sheet derivative is not defined on the cut".into(),
                        ));
                    }
                    let kind = ch.kind().clone();
                    let upper = self.spec.ohmic_u_max * lambda_c;
                    let (dplain, _) = quad::adaptive(
                        |l| {
                            let d = z - C64::new(l, 0.0);
                            -kind.profile(l) / (d * d)
                        },
                        0.0,
                        upper,
                        self.spec.tol,
                        self.spec.max_panels,
                    )?;
                    dplain - C64::new(0.0, 2.0 * PI) * continued_ohmic_profile_deriv(s, lambda_c, z)?
                }
            };
            acc += ch.gg_dagger() * shape;
        }
        Ok(acc * (-I))
    }

    /// Principal value ∫ ω(λ)/(x−λ) dλ entrywise, used for pole seeds.
    pub fn pv_omega(&self, x: f64) -> Result<CMat> {
        if !x.is_finite() {
            return Err(Error::InvalidInput(format!("pv_omega needs finite x, got {x}")));
        }
        self.guard_branch_points(C64::new(x, 0.0))?;
        let n = self.model.n_levels();
        let mut acc = CMat::zeros(n, n);
        for ch in self.model.channels() {
            let value: f64 = match *ch.kind() {
                ChannelKind::FlatWindow {
                    lambda_min: a,
                    lambda_max: b,
                } => {
                    if a.is_infinite() {
                        0.0
                    } else {
                        ((x - a).abs()).ln() - ((x - b).abs()).ln()
                    }
                }
                ChannelKind::Lorentzian { mu, gamma } => {
                    (x - mu) / ((x - mu).powi(2) + gamma * gamma)
                }
                ChannelKind::Ohmic { .. } => self.ohmic_pv(ch.kind(), x)?,
            };
            acc += ch.gg_dagger() * C64::new(value, 0.0);
        }
        Ok(acc)
    }

    fn ohmic_pv(&self, kind: &ChannelKind, x: f64) -> Result<f64> {
        let upper = match *kind {
            ChannelKind::Ohmic { lambda_c, .. } => self.spec.ohmic_u_max * lambda_c,
            _ => unreachable!(),
        };
        let kind = kind.clone();
        if x > 0.0 && x < upper {
            quad::principal_value(move |l| kind.profile(l), 0.0, upper, x, self.spec.tol)
        } else {
            let (v, _) = quad::adaptive(
                move |l| kind.profile(l) / (x - l),
                0.0,
                upper,
                self.spec.tol,
                self.spec.max_panels,
            )?;
            Ok(v)
        }
    }
}

/// Analytic continuation of the ohmic profile, valid for integer s.
fn continued_ohmic_profile(s: f64, lambda_c: f64, z: C64) -> Result<C64> {
    let s_int = s.round();
    if (s - s_int).abs() > 1e-12 || s_int < 1.0 {
        return Err(Error::UnsupportedContinuation(format!(
            "ohmic profile with s={s} has a branch point at 0; only integer s continues"
        )));
    }
    Ok(C64::new(lambda_c.powf(1.0 - s), 0.0) * z.powu(s_int as u32) * (-z / lambda_c).exp())
}

fn continued_ohmic_profile_deriv(s: f64, lambda_c: f64, z: C64) -> Result<C64> {
    let s_int = s.round();
    if (s - s_int).abs() > 1e-12 || s_int < 1.0 {
        return Err(Error::UnsupportedContinuation(format!(
            "ohmic profile with s={s} has a branch point at 0; only integer s continues"
        )));
    }
    let k = s_int as u32;
    let poly = if k == 1 {
        C64::new(1.0, 0.0) - z / lambda_c
    } else {
        C64::new(s, 0.0) * z.powu(k - 1) - z.powu(k) / lambda_c
    };
    Ok(C64::new(lambda_c.powf(1.0 - s), 0.0) * poly * (-z / lambda_c).exp())
}
