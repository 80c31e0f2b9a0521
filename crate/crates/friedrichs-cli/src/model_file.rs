//! On-disk model description: TOML with one `[[channel]]` table per
//! channel.
//!
//! All quantities are in natural units with hbar = 1. Complex couplings
//! are written as `[re, im]` pairs, one per level. TOML's native `inf` and
//! `-inf` spell unbounded flat windows. Parsing stops at shape errors; the
//! physics validation lives in the library's model constructor.

use friedrichs::model::{ChannelKind, CouplingChannel, LevelSet, Model, SpectrumKind};
use friedrichs::{C64, Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpectrumField {
    FullLine,
    HalfLine,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ChannelTable {
    FlatWindow {
        lambda_min: f64,
        lambda_max: f64,
        g: Vec<[f64; 2]>,
    },
    Lorentzian {
        mu: f64,
        gamma: f64,
        g: Vec<[f64; 2]>,
    },
    Ohmic {
        s: f64,
        lambda_c: f64,
        g: Vec<[f64; 2]>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub levels: Vec<f64>,
    pub spectrum: SpectrumField,
    #[serde(default, rename = "channel")]
    pub channels: Vec<ChannelTable>,
}

impl ModelFile {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::InvalidInput(format!("model file: {e}")))
    }

    pub fn to_toml(&self) -> String {
        let mut out = String::from("# Natural units, hbar = 1.\n");
        out.push_str(&toml::to_string(self).expect("model file serializes"));
        out
    }

    pub fn to_model(&self) -> Result<Model> {
        let levels = LevelSet::new(self.levels.clone())?;
        let spectrum = match self.spectrum {
            SpectrumField::FullLine => SpectrumKind::FullLine,
            SpectrumField::HalfLine => SpectrumKind::HalfLine,
        };
        let mut channels = Vec::with_capacity(self.channels.len());
        for table in &self.channels {
            let (kind, g) = match table {
                ChannelTable::FlatWindow {
                    lambda_min,
                    lambda_max,
                    g,
                } => (
                    ChannelKind::FlatWindow {
                        lambda_min: *lambda_min,
                        lambda_max: *lambda_max,
                    },
                    g,
                ),
                ChannelTable::Lorentzian { mu, gamma, g } => (
                    ChannelKind::Lorentzian {
                        mu: *mu,
                        gamma: *gamma,
                    },
                    g,
                ),
                ChannelTable::Ohmic { s, lambda_c, g } => (
                    ChannelKind::Ohmic {
                        s: *s,
                        lambda_c: *lambda_c,
                    },
                    g,
                ),
            };
            let amplitudes: Vec<C64> = g.iter().map(|[re, im]| C64::new(*re, *im)).collect();
            channels.push(CouplingChannel::new(amplitudes, kind)?);
        }
        Model::new(levels, channels, spectrum)
    }

    pub fn from_model(model: &Model) -> Self {
        let channels = model
            .channels()
            .iter()
            .map(|ch| {
                let g: Vec<[f64; 2]> = ch.g().iter().map(|a| [a.re, a.im]).collect();
                match *ch.kind() {
                    ChannelKind::FlatWindow {
                        lambda_min,
                        lambda_max,
                    } => ChannelTable::FlatWindow {
                        lambda_min,
                        lambda_max,
                        g,
                    },
                    ChannelKind::Lorentzian { mu, gamma } => {
                        ChannelTable::Lorentzian { mu, gamma, g }
                    }
                    ChannelKind::Ohmic { s, lambda_c } => ChannelTable::Ohmic { s, lambda_c, g },
                }
            })
            .collect();
        Self {
            levels: model.levels().energies().to_vec(),
            spectrum: match model.spectrum() {
                SpectrumKind::FullLine => SpectrumField::FullLine,
                SpectrumKind::HalfLine => SpectrumField::HalfLine,
            },
            channels,
        }
    }
}
