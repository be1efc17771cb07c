//! Device description files.
//!
//! ```json
//! {
//!   "qubits": {
//!     "q1": { "f_max_ghz": 5.250, "tunability_ghz": 0.824, "anharmonicity_ghz": -0.205 },
//!     "q9": { "ej1_ghz": 15.0, "ej2_ghz": 3.0, "ec_ghz": 0.2 }
//!   },
//!   "pairs": [ { "modulated": "q1", "neighbor": "q2", "coupling_mhz": 10.0 } ]
//! }
//! ```
//!
//! Qubits given by measured characteristics are fitted to junction energies
//! on load.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::gates::PairSpec;
use crate::transmon::{fit_spec, TransmonSpec};

/// Bare coupling used when a pair entry omits it.
pub const DEFAULT_COUPLING_MHZ: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum QubitSource {
    Measured {
        f_max_ghz: f64,
        tunability_ghz: f64,
        anharmonicity_ghz: f64,
    },
    Energies {
        ej1_ghz: f64,
        ej2_ghz: f64,
        ec_ghz: f64,
    },
}

impl QubitSource {
    pub fn resolve(&self) -> Result<TransmonSpec> {
        match *self {
            QubitSource::Measured {
                f_max_ghz,
                tunability_ghz,
                anharmonicity_ghz,
            } => Ok(fit_spec(f_max_ghz, tunability_ghz, anharmonicity_ghz)?.spec),
            QubitSource::Energies {
                ej1_ghz,
                ej2_ghz,
                ec_ghz,
            } => TransmonSpec::new(ej1_ghz, ej2_ghz, ec_ghz),
        }
    }
}

fn default_coupling() -> f64 {
    DEFAULT_COUPLING_MHZ
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairEntry {
    pub modulated: String,
    pub neighbor: String,
    #[serde(default = "default_coupling")]
    pub coupling_mhz: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Device {
    pub qubits: BTreeMap<String, QubitSource>,
    #[serde(default)]
    pub pairs: Vec<PairEntry>,
}

impl Device {
    pub fn load(path: impl AsRef<Path>) -> Result<Device> {
        let text = fs::read_to_string(path)?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Device> {
        let dev: Device = serde_json::from_str(text)?;
        for p in &dev.pairs {
            for name in [&p.modulated, &p.neighbor] {
                if !dev.qubits.contains_key(name) {
                    return Err(invalid(format!("pair refers to unknown qubit {name:?}")));
                }
            }
        }
        Ok(dev)
    }

    pub fn qubit(&self, name: &str) -> Result<TransmonSpec> {
        self.qubits
            .get(name)
            .ok_or_else(|| invalid(format!("unknown qubit {name:?}")))?
            .resolve()
    }

    /// The listed pair with `modulated` driven, or an ad-hoc pair with the
    /// default coupling if the device lists none.
    pub fn pair(&self, modulated: &str, neighbor: &str) -> Result<PairSpec> {
        let g = self
            .pairs
            .iter()
            .find(|p| p.modulated == modulated && p.neighbor == neighbor)
            .map_or(DEFAULT_COUPLING_MHZ, |p| p.coupling_mhz);
        PairSpec::from_specs(self.qubit(modulated)?, self.qubit(neighbor)?, g)
    }
}
