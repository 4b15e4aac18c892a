//! Experiment description and the flat `key = value` config format.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use crate::impairments::{PaParams, SiCoupling, SicMode};
use crate::uplink::CancelKind;
use crate::{Result, SimError};

/// Which link direction's error counts get reported.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Uplink,
    Downlink,
    Both,
}

impl Direction {
    pub fn includes_uplink(&self) -> bool {
        matches!(self, Direction::Uplink | Direction::Both)
    }
    pub fn includes_downlink(&self) -> bool {
        matches!(self, Direction::Downlink | Direction::Both)
    }
}

impl FromStr for Direction {
    type Err = SimError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uplink" => Ok(Direction::Uplink),
            "downlink" => Ok(Direction::Downlink),
            "both" => Ok(Direction::Both),
            other => Err(SimError::param(format!(
                "unknown direction `{other}` (expected uplink|downlink|both)"
            ))),
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Direction::Uplink => "uplink",
            Direction::Downlink => "downlink",
            Direction::Both => "both",
        };
        write!(f, "{s}")
    }
}

/// Full-duplex or the half-duplex baseline (no self-interference at all).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Duplex {
    Fd,
    Hd,
}

impl Duplex {
    pub fn as_str(&self) -> &'static str {
        match self {
            Duplex::Fd => "fd",
            Duplex::Hd => "hd",
        }
    }
}

impl FromStr for Duplex {
    type Err = SimError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fd" => Ok(Duplex::Fd),
            "hd" => Ok(Duplex::Hd),
            other => Err(SimError::param(format!(
                "unknown duplex `{other}` (expected fd|hd)"
            ))),
        }
    }
}

/// Modulation tag; the simulator implements square 16-QAM.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Modulation {
    #[default]
    Qam16,
}

impl FromStr for Modulation {
    type Err = SimError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "16qam" | "qam16" => Ok(Modulation::Qam16),
            other => Err(SimError::param(format!(
                "unsupported modulation `{other}` (only 16qam)"
            ))),
        }
    }
}

/// Complete experiment description. Field names double as config-file keys
/// (the amplifier and coupling sub-structs flatten with `pa_` / their own
/// prefixes; see [`SimConfig::apply_kv`]).
#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub n_e: usize,
    pub k: usize,
    pub n_fft: usize,
    pub n_data: usize,
    pub l_taps: usize,
    pub cp_samples: usize,
    pub bandwidth_hz: f64,
    pub modulation: Modulation,
    pub direction: Direction,
    pub duplex: Duplex,
    pub sic_mode: SicMode,
    pub si_coupling: SiCoupling,
    pub pa: PaParams,
    pub pa_enabled: bool,
    pub tx_noise_dbc: f64,
    pub snr_db_list: Vec<f64>,
    pub trials_per_point: usize,
    pub master_seed: u64,
    pub ue_xlink_attenuation_db: f64,
    pub cancellation: CancelKind,
}

impl Default for SimConfig {
    /// The reference cell: four base-station antennas, two terminals, 256
    /// subcarriers with 180 carrying data, 7-tap links, a 15-sample prefix
    /// (4.69 us at the 3 MHz rate, rounded up to whole samples).
    fn default() -> Self {
        SimConfig {
            n_e: 4,
            k: 2,
            n_fft: 256,
            n_data: 180,
            l_taps: 7,
            cp_samples: 15,
            bandwidth_hz: 3.0e6,
            modulation: Modulation::Qam16,
            direction: Direction::Both,
            duplex: Duplex::Fd,
            sic_mode: SicMode::Full,
            si_coupling: SiCoupling::default(),
            pa: PaParams::default(),
            pa_enabled: false,
            tx_noise_dbc: -30.0,
            snr_db_list: (0..=40).step_by(2).map(|v| v as f64).collect(),
            trials_per_point: 2000,
            master_seed: 1,
            ue_xlink_attenuation_db: f64::INFINITY,
            cancellation: CancelKind::Soft,
        }
    }
}

impl SimConfig {
    /// Terminal-side BER experiment (downlink reporting).
    pub fn preset_fig5() -> Self {
        SimConfig {
            direction: Direction::Downlink,
            ..Default::default()
        }
    }

    /// Base-station-side BER experiment (uplink reporting).
    pub fn preset_fig6() -> Self {
        SimConfig {
            direction: Direction::Uplink,
            ..Default::default()
        }
    }

    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "paper-fig5" => Ok(Self::preset_fig5()),
            "paper-fig6" => Ok(Self::preset_fig6()),
            other => Err(SimError::param(format!(
                "unknown preset `{other}` (expected paper-fig5|paper-fig6)"
            ))),
        }
    }

    /// Bits carried per trial and direction.
    pub fn bits_per_trial(&self) -> u64 {
        (self.k * self.n_data * crate::modem::BITS_PER_SYMBOL) as u64
    }

    /// Checks every cross-field invariant, naming the offending field.
    pub fn validate(&self) -> Result<()> {
        if self.n_e == 0 {
            return Err(SimError::config("n_e", "must be >= 1"));
        }
        if self.k == 0 {
            return Err(SimError::config("k", "must be >= 1"));
        }
        if self.k > self.n_e {
            return Err(SimError::config(
                "k",
                format!(
                    "user count {} exceeds antenna count {} (full subcarrier sharing needs k <= n_e)",
                    self.k, self.n_e
                ),
            ));
        }
        if self.n_fft == 0 {
            return Err(SimError::config("n_fft", "must be >= 1"));
        }
        if self.n_data == 0 || self.n_data > self.n_fft {
            return Err(SimError::config(
                "n_data",
                format!("must be in 1..={}, got {}", self.n_fft, self.n_data),
            ));
        }
        if self.l_taps == 0 {
            return Err(SimError::config("l_taps", "must be >= 1"));
        }
        if self.cp_samples >= self.n_fft {
            return Err(SimError::config(
                "cp_samples",
                format!("must be shorter than n_fft {}", self.n_fft),
            ));
        }
        if self.cp_samples + 1 < self.l_taps {
            return Err(SimError::config(
                "cp_samples",
                format!(
                    "prefix {} cannot cover an {}-tap delay spread",
                    self.cp_samples, self.l_taps
                ),
            ));
        }
        if !(self.bandwidth_hz > 0.0) {
            return Err(SimError::config("bandwidth_hz", "must be positive"));
        }
        if self.si_coupling.si_over_signal_db < 0.0 {
            return Err(SimError::config(
                "si_over_signal_db",
                "must be nonnegative",
            ));
        }
        if self.snr_db_list.is_empty() {
            return Err(SimError::config("snr_db_list", "must not be empty"));
        }
        if self.snr_db_list.iter().any(|s| !s.is_finite()) {
            return Err(SimError::config("snr_db_list", "entries must be finite"));
        }
        if self.trials_per_point == 0 {
            return Err(SimError::config("trials_per_point", "must be >= 1"));
        }
        Ok(())
    }

    /// Applies one `key = value` pair. Key names mirror the struct fields.
    pub fn apply_kv(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: FromStr>(key: &str, value: &str) -> Result<T> {
            value.parse::<T>().map_err(|_| {
                SimError::config(key, format!("cannot parse `{value}`"))
            })
        }
        fn db_value(key: &str, value: &str) -> Result<f64> {
            match value {
                "-inf" => Ok(f64::NEG_INFINITY),
                "inf" | "+inf" => Ok(f64::INFINITY),
                _ => num::<f64>(key, value),
            }
        }
        match key {
            "n_e" => self.n_e = num(key, value)?,
            "k" => self.k = num(key, value)?,
            "n_fft" => self.n_fft = num(key, value)?,
            "n_data" => self.n_data = num(key, value)?,
            "l_taps" => self.l_taps = num(key, value)?,
            "cp_samples" => self.cp_samples = num(key, value)?,
            "bandwidth_hz" => self.bandwidth_hz = num(key, value)?,
            "modulation" => self.modulation = value.parse()?,
            "direction" => self.direction = value.parse()?,
            "duplex" => self.duplex = value.parse()?,
            "sic_mode" => self.sic_mode = value.parse()?,
            "si_over_signal_db" => self.si_coupling.si_over_signal_db = num(key, value)?,
            "residual_floor_db" => self.si_coupling.residual_floor_db = db_value(key, value)?,
            "pa_enabled" => self.pa_enabled = num(key, value)?,
            "pa_x1" => self.pa.x1 = num(key, value)?,
            "pa_x2" => self.pa.x2 = num(key, value)?,
            "pa_x3" => self.pa.x3 = num(key, value)?,
            "pa_x4" => self.pa.x4 = num(key, value)?,
            "pa_y1" => self.pa.y1 = num(key, value)?,
            "pa_y2" => self.pa.y2 = num(key, value)?,
            "pa_y3" => self.pa.y3 = num(key, value)?,
            "pa_y4" => self.pa.y4 = num(key, value)?,
            "pa_input_backoff_db" => self.pa.input_backoff_db = num(key, value)?,
            "tx_noise_dbc" => self.tx_noise_dbc = db_value(key, value)?,
            "snr_db_list" => {
                let list: Result<Vec<f64>> = value
                    .split(',')
                    .map(|v| num::<f64>(key, v.trim()))
                    .collect();
                self.snr_db_list = list?;
            }
            "trials_per_point" => self.trials_per_point = num(key, value)?,
            "master_seed" => self.master_seed = num(key, value)?,
            "ue_xlink_attenuation_db" => {
                self.ue_xlink_attenuation_db = db_value(key, value)?
            }
            "cancellation" => {
                self.cancellation = match value {
                    "soft" => CancelKind::Soft,
                    "hard" => CancelKind::Hard,
                    other => {
                        return Err(SimError::config(
                            "cancellation",
                            format!("unknown value `{other}` (expected soft|hard)"),
                        ))
                    }
                }
            }
            other => {
                return Err(SimError::config(other, "unknown config key"));
            }
        }
        Ok(())
    }

    /// Parses the flat `key = value` text format (one field per line,
    /// `#` comments and blank lines allowed) on top of `self`.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (line_no, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                SimError::param(format!(
                    "config line {}: expected `key = value`, got `{line}`",
                    line_no + 1
                ))
            })?;
            self.apply_kv(key.trim(), value.trim())?;
        }
        Ok(())
    }

    /// Loads a config file on top of `self`.
    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path).map_err(|source| SimError::Io {
            path: path.display().to_string(),
            source,
        })?;
        self.apply_text(&text)
    }
}
