//! Model definition: N discrete levels coupled to continuum channels.
//!
//! A model is a set of level energies plus a list of coupling channels, each
//! contributing a rank-1 term v_c(λ) v_c(λ)† to the spectral density ω(λ).
//! There is no discrete-discrete or continuum-continuum coupling. Models are
//! immutable after validation.

use crate::{C64, CMat, CVec, Error, Result};

/// Relative tolerance for flagging duplicate level energies.
pub const LEVEL_DEGENERACY_TOL: f64 = 1e-12;

/// Discrete level energies with human-readable labels.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelSet {
    energies: Vec<f64>,
    labels: Vec<String>,
}

impl LevelSet {
    pub fn new(energies: Vec<f64>) -> Result<Self> {
        let labels = (0..energies.len()).map(|i| format!("level{i}")).collect();
        Self::with_labels(energies, labels)
    }

    pub fn with_labels(energies: Vec<f64>, labels: Vec<String>) -> Result<Self> {
        if energies.is_empty() {
            return Err(Error::InvalidModel("a model needs at least one level".into()));
        }
        if energies.iter().any(|e| !e.is_finite()) {
            return Err(Error::InvalidModel("level energies must be finite".into()));
        }
        if labels.len() != energies.len() {
            return Err(Error::InvalidModel(format!(
                "{} labels for {} levels",
                labels.len(),
                energies.len()
            )));
        }
        Ok(Self { energies, labels })
    }

    pub fn len(&self) -> usize {
        self.energies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.energies.is_empty()
    }

    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    /// Index pairs whose energies coincide within [`LEVEL_DEGENERACY_TOL`]
    /// relative to the overall energy scale.
    pub fn degenerate_pairs(&self) -> Vec<(usize, usize)> {
        let scale = self
            .energies
            .iter()
            .fold(1.0f64, |acc, e| acc.max(e.abs()));
        let mut pairs = vec![];
        for i in 0..self.energies.len() {
            for j in (i + 1)..self.energies.len() {
                if (self.energies[i] - self.energies[j]).abs() <= LEVEL_DEGENERACY_TOL * scale {
                    pairs.push((i, j));
                }
            }
        }
        pairs
    }
}

/// Line-shape family of one coupling channel.
///
/// The scalar profile multiplies g g†:
/// - flat window: 1 on [λ_min, λ_max] (either end may be infinite);
/// - lorentzian: (γ/π)/((λ−μ)² + γ²), unit integral;
/// - ohmic: λ_c^{1−s} λ^s e^{−λ/λ_c} on [0, ∞).
#[derive(Debug, Clone, PartialEq)]
pub enum ChannelKind {
    FlatWindow { lambda_min: f64, lambda_max: f64 },
    Lorentzian { mu: f64, gamma: f64 },
    Ohmic { s: f64, lambda_c: f64 },
}

impl ChannelKind {
    fn validate(&self) -> Result<()> {
        match *self {
            ChannelKind::FlatWindow {
                lambda_min,
                lambda_max,
            } => {
                if lambda_min.is_nan() || lambda_max.is_nan() {
                    return Err(Error::InvalidModel("flat window bounds must not be NaN".into()));
                }
                if !(lambda_min < lambda_max) {
                    return Err(Error::InvalidModel(format!(
                        "flat window needs lambda_min < lambda_max, got [{lambda_min}, {lambda_max}]"
                    )));
                }
                // One-sided infinite windows have a divergent transform.
                if lambda_min.is_infinite() != lambda_max.is_infinite() {
                    return Err(Error::InvalidModel(
                        "flat window endpoints must be both finite or both infinite".into(),
                    ));
                }
                Ok(())
            }
            ChannelKind::Lorentzian { mu, gamma } => {
                if !mu.is_finite() || !gamma.is_finite() || gamma <= 0.0 {
                    return Err(Error::InvalidModel(format!(
                        "lorentzian needs finite mu and gamma > 0, got mu={mu}, gamma={gamma}"
                    )));
                }
                Ok(())
            }
            ChannelKind::Ohmic { s, lambda_c } => {
                if !s.is_finite() || s <= 0.0 || !lambda_c.is_finite() || lambda_c <= 0.0 {
                    return Err(Error::InvalidModel(format!(
                        "ohmic needs s > 0 and lambda_c > 0, got s={s}, lambda_c={lambda_c}"
                    )));
                }
                Ok(())
            }
        }
    }

    /// Scalar line shape at real λ; zero outside the support.
    pub fn profile(&self, lambda: f64) -> f64 {
        match *self {
            ChannelKind::FlatWindow {
                lambda_min,
                lambda_max,
            } => {
                if lambda >= lambda_min && lambda <= lambda_max {
                    1.0
                } else {
                    0.0
                }
            }
            ChannelKind::Lorentzian { mu, gamma } => {
                (gamma / std::f64::consts::PI) / ((lambda - mu).powi(2) + gamma * gamma)
            }
            ChannelKind::Ohmic { s, lambda_c } => {
                if lambda <= 0.0 {
                    0.0
                } else {
                    lambda_c.powf(1.0 - s) * lambda.powf(s) * (-lambda / lambda_c).exp()
                }
            }
        }
    }

    pub fn support_contains(&self, lambda: f64) -> bool {
        match *self {
            ChannelKind::FlatWindow {
                lambda_min,
                lambda_max,
            } => lambda >= lambda_min && lambda <= lambda_max,
            ChannelKind::Lorentzian { .. } => true,
            ChannelKind::Ohmic { .. } => lambda >= 0.0,
        }
    }

    /// Finite branch points of the channel's resolvent transform
    /// (support endpoints where the density turns on or off non-smoothly).
    pub fn finite_cut_endpoints(&self) -> Vec<f64> {
        match *self {
            ChannelKind::FlatWindow {
                lambda_min,
                lambda_max,
            } => {
                let mut v = vec![];
                if lambda_min.is_finite() {
                    v.push(lambda_min);
                }
                if lambda_max.is_finite() {
                    v.push(lambda_max);
                }
                v
            }
            ChannelKind::Lorentzian { .. } => vec![],
            ChannelKind::Ohmic { .. } => vec![0.0],
        }
    }

    /// True for a flat window covering the whole real line. Such a channel is
    /// a white-noise coupling: its correlation kernel is a delta in time.
    pub fn is_unbounded_flat(&self) -> bool {
        matches!(
            *self,
            ChannelKind::FlatWindow { lambda_min, lambda_max }
                if lambda_min == f64::NEG_INFINITY && lambda_max == f64::INFINITY
        )
    }
}

/// One continuum channel: amplitude vector g over the levels plus a line shape.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingChannel {
    g: CVec,
    kind: ChannelKind,
}

impl CouplingChannel {
    pub fn new(g: Vec<C64>, kind: ChannelKind) -> Result<Self> {
        if g.iter().any(|x| !x.re.is_finite() || !x.im.is_finite()) {
            return Err(Error::InvalidModel("coupling amplitudes must be finite".into()));
        }
        kind.validate()?;
        Ok(Self {
            g: CVec::from_vec(g),
            kind,
        })
    }

    /// Real amplitude convenience constructor.
    pub fn real(g: &[f64], kind: ChannelKind) -> Result<Self> {
        Self::new(g.iter().map(|&x| C64::new(x, 0.0)).collect(), kind)
    }

    pub fn g(&self) -> &CVec {
        &self.g
    }

    pub fn kind(&self) -> &ChannelKind {
        &self.kind
    }

    /// Rank-1 strength matrix g g†.
    pub fn gg_dagger(&self) -> CMat {
        let n = self.g.len();
        CMat::from_fn(n, n, |i, j| self.g[i] * self.g[j].conj())
    }

    /// Coupling vector at real λ: g scaled by the square root of the profile.
    pub fn coupling_at(&self, lambda: f64) -> CVec {
        let w = self.kind.profile(lambda).sqrt();
        self.g.map(|x| x * w)
    }
}

/// Whether the continuum is bounded below at 0 or covers the whole line.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpectrumKind {
    HalfLine,
    FullLine,
}

/// Validated model instance: levels, channels, spectrum kind.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    levels: LevelSet,
    channels: Vec<CouplingChannel>,
    spectrum: SpectrumKind,
    degenerate: bool,
}

impl Model {
    pub fn new(
        levels: LevelSet,
        channels: Vec<CouplingChannel>,
        spectrum: SpectrumKind,
    ) -> Result<Self> {
        let n = levels.len();
        for (c, ch) in channels.iter().enumerate() {
            if ch.g.len() != n {
                return Err(Error::InvalidModel(format!(
                    "channel {c} has {} amplitudes for {n} levels",
                    ch.g.len()
                )));
            }
            if spectrum == SpectrumKind::HalfLine {
                match *ch.kind() {
                    ChannelKind::FlatWindow { lambda_min, .. } => {
                        if lambda_min < 0.0 {
                            return Err(Error::InvalidModel(format!(
                                "channel {c}: half-line spectrum requires support in [0, inf), got lambda_min={lambda_min}"
                            )));
                        }
                    }
                    ChannelKind::Lorentzian { .. } => {
                        return Err(Error::InvalidModel(format!(
                            "channel {c}: lorentzian support is the full line, incompatible with a half-line spectrum"
                        )));
                    }
                    ChannelKind::Ohmic { .. } => {}
                }
            }
        }
        let degenerate = !levels.degenerate_pairs().is_empty();
        Ok(Self {
            levels,
            channels,
            spectrum,
            degenerate,
        })
    }

    pub fn n_levels(&self) -> usize {
        self.levels.len()
    }

    pub fn levels(&self) -> &LevelSet {
        &self.levels
    }

    pub fn channels(&self) -> &[CouplingChannel] {
        &self.channels
    }

    pub fn spectrum(&self) -> SpectrumKind {
        self.spectrum
    }

    /// True when two level energies coincide; spectral projectors of the
    /// effective generator are then unreliable at weak coupling.
    pub fn has_degenerate_levels(&self) -> bool {
        self.degenerate
    }

    /// Diagonal reduced free Hamiltonian over the levels.
    pub fn h0_red(&self) -> CMat {
        let n = self.n_levels();
        CMat::from_fn(n, n, |i, j| {
            if i == j {
                C64::new(self.levels.energies()[i], 0.0)
            } else {
                C64::new(0.0, 0.0)
            }
        })
    }

    /// Spectral density matrix ω(λ) = Σ_c profile_c(λ) g_c g_c†.
    pub fn omega_at(&self, lambda: f64) -> Result<CMat> {
        if !lambda.is_finite() {
            return Err(Error::InvalidInput(format!("omega_at needs finite lambda, got {lambda}")));
        }
        let n = self.n_levels();
        let mut acc = CMat::zeros(n, n);
        for ch in &self.channels {
            let p = ch.kind().profile(lambda);
            if p != 0.0 {
                acc += ch.gg_dagger() * C64::new(p, 0.0);
            }
        }
        Ok(acc)
    }

    /// Analytic continuation of ω into the complex plane.
    ///
    /// Flat windows continue as the constant g g†; lorentzians as the same
    /// rational expression at complex argument; ohmic channels only for
    /// integer s (the profile is then entire). Anything else is an
    /// unsupported-continuation error.
    pub fn omega_continuation(&self, z: C64) -> Result<CMat> {
        let n = self.n_levels();
        let mut acc = CMat::zeros(n, n);
        for ch in &self.channels {
            let p: C64 = match *ch.kind() {
                ChannelKind::FlatWindow { .. } => C64::new(1.0, 0.0),
                ChannelKind::Lorentzian { mu, gamma } => {
                    let d = z - C64::new(mu, 0.0);
                    C64::new(gamma / std::f64::consts::PI, 0.0) / (d * d + C64::new(gamma * gamma, 0.0))
                }
                ChannelKind::Ohmic { s, lambda_c } => {
                    let s_int = s.round();
                    if (s - s_int).abs() > 1e-12 || s_int < 1.0 {
                        return Err(Error::UnsupportedContinuation(format!(
                            "ohmic profile with s={s} has a branch point at 0; only integer s continues"
                        )));
                    }
                    let zs = z.powu(s_int as u32);
                    C64::new(lambda_c.powf(1.0 - s), 0.0) * zs * (-z / lambda_c).exp()
                }
            };
            acc += ch.gg_dagger() * p;
        }
        Ok(acc)
    }

    /// Sorted, deduplicated finite branch points contributed by all channels.
    pub fn cut_endpoints(&self) -> Vec<f64> {
        let mut pts: Vec<f64> = self
            .channels
            .iter()
            .flat_map(|c| c.kind().finite_cut_endpoints())
            .collect();
        pts.sort_by(f64::total_cmp);
        pts.dedup_by(|a, b| (*a - *b).abs() < 1e-300);
        pts
    }
}
