use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::SpectralError;
use crate::channel::TransitionChannel;

pub const COUPLING_HEADER: [&str; 4] = ["energy_mev", "amplitude_mhz", "channel", "order"];

/// One spin-phonon coupling coefficient for phonon mode energy `energy_mev`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplingEntry {
    pub energy_mev: f64,
    pub amplitude_mhz: f64,
    pub channel: TransitionChannel,
    /// 1 for first-order, 2 for (diagonal) second-order couplings.
    pub order: u8,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CouplingTable {
    pub entries: Vec<CouplingEntry>,
}

impl CouplingTable {
    pub fn new(entries: Vec<CouplingEntry>) -> Self {
        CouplingTable { entries }
    }

    pub fn select(&self, channel: TransitionChannel, order: u8) -> impl Iterator<Item = &CouplingEntry> {
        self.entries
            .iter()
            .filter(move |e| e.channel == channel && e.order == order)
    }

    pub fn max_energy(&self) -> f64 {
        self.entries.iter().map(|e| e.energy_mev).fold(0.0, f64::max)
    }

    pub fn to_csv(&self) -> String {
        let mut out = COUPLING_HEADER.join(",") + "\n";
        for e in &self.entries {
            out += &format!("{:?},{:?},{},{}\n", e.energy_mev, e.amplitude_mhz, e.channel.as_str(), e.order);
        }
        out
    }
}

pub fn parse_coupling_csv(text: &str) -> Result<CouplingTable, SpectralError> {
    let err = |line: u64, column: usize, message: String| SpectralError::Parse { line, column, message };
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i as u64 + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));

    let (hline, header) = lines.next().ok_or_else(|| err(1, 1, "empty coupling table".into()))?;
    let fields: Vec<&str> = header.split(',').map(str::trim).collect();
    for (i, expected) in COUPLING_HEADER.iter().enumerate() {
        if fields.get(i) != Some(expected) {
            return Err(err(hline, i + 1, format!("expected header column `{expected}`")));
        }
    }

    let mut entries = Vec::new();
    for (line, text) in lines {
        let f: Vec<&str> = text.split(',').map(str::trim).collect();
        if f.len() != COUPLING_HEADER.len() {
            return Err(err(line, f.len().min(4) + 1, format!("expected 4 fields, found {}", f.len())));
        }
        let num = |col: usize| -> Result<f64, SpectralError> {
            f[col]
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| err(line, col + 1, format!("`{}` is not a finite number", f[col])))
        };
        let energy_mev = num(0)?;
        if energy_mev < 0.0 {
            return Err(err(line, 1, "energy must be non-negative".into()));
        }
        let amplitude_mhz = num(1)?;
        let channel = TransitionChannel::from_str(f[2]).map_err(|e| err(line, 3, e.to_string()))?;
        let order = match f[3] {
            "1" => 1,
            "2" => 2,
            other => return Err(err(line, 4, format!("order must be 1 or 2, got `{other}`"))),
        };
        entries.push(CouplingEntry {
            energy_mev,
            amplitude_mhz,
            channel,
            order,
        });
    }
    Ok(CouplingTable { entries })
}

pub fn read_coupling_file(path: &Path) -> Result<CouplingTable, SpectralError> {
    parse_coupling_csv(&std::fs::read_to_string(path)?)
}
