//! Transmit-side impairments and full-duplex self-interference.
//!
//! Three pieces:
//!
//! * a memoryless AM/AM + AM/PM power-amplifier model ([`pa_distort`]),
//! * white transmit / thermal noise injection,
//! * self-interference coupling and its staged cancellation
//!   ([`si_inject`] / [`sic_cancel`]).
//!
//! Cancellation is genie-aided: the canceller is handed the record of what
//! was actually injected ([`SiRecord`]) plus the ideal pre-amplifier
//! basebands, mirroring an architecture whose analog/digital stages have
//! converged. Each [`SicMode`] keeps a different set of residual components:
//!
//! * `Off` keeps everything,
//! * `LinearOnly` subtracts only the best linear replica of each coupled
//!   chain (computed by projecting the coupled waveform onto its ideal
//!   baseband), leaving nonlinear distortion and transmit noise,
//! * `FullNoCtc` removes the chain sharing this antenna entirely but keeps
//!   every neighbouring chain untouched,
//! * `Full` removes everything and re-adds a white residual at a
//!   configurable level relative to the thermal floor; at a floor of
//!   negative infinity the output is bit-identical to a never-interfered
//!   receiver, which is what makes the half-duplex comparison exact.

use num_complex::Complex64;
use rand::Rng;

use crate::rng::draw_cn;
use crate::{Result, SimError};

/// AM/AM and AM/PM coefficients plus drive level for the transmit amplifier.
///
/// Output magnitude for input magnitude `r` is
/// `A(r) = x1 r^x2 / (1 + x3 r^x2) + x4 r`, and the phase advance is
/// `P(r) = y1 r^y2 / (1 + y3 r^y2) + y4 r`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PaParams {
    pub x1: f64,
    pub x2: f64,
    pub x3: f64,
    pub x4: f64,
    pub y1: f64,
    pub y2: f64,
    pub y3: f64,
    pub y4: f64,
    /// Input back-off in dB: the drive is attenuated by this much before the
    /// nonlinearity and the attenuation is undone afterwards, so a linear
    /// parameter set stays an identity at any back-off.
    pub input_backoff_db: f64,
}

impl Default for PaParams {
    /// The widely used solid-state amplifier fit, driven 6 dB backed off.
    fn default() -> Self {
        PaParams {
            x1: 8.1081,
            x2: 1.5413,
            x3: 6.5202,
            x4: -0.0718,
            y1: 4.6645,
            y2: 2.0965,
            y3: 10.88,
            y4: -0.003,
            input_backoff_db: 6.0,
        }
    }
}

impl PaParams {
    /// Pure unit-gain path: `A(r) = r`, no phase distortion.
    pub fn linear() -> Self {
        PaParams {
            x1: 0.0,
            x2: 1.0,
            x3: 0.0,
            x4: 1.0,
            y1: 0.0,
            y2: 1.0,
            y3: 0.0,
            y4: 0.0,
            input_backoff_db: 0.0,
        }
    }

    fn am_am(&self, r: f64) -> f64 {
        let rp = r.powf(self.x2);
        self.x1 * rp / (1.0 + self.x3 * rp) + self.x4 * r
    }

    fn am_pm(&self, r: f64) -> f64 {
        let rp = r.powf(self.y2);
        self.y1 * rp / (1.0 + self.y3 * rp) + self.y4 * r
    }
}

/// Runs a block through the amplifier model, sample by sample.
///
/// The input is attenuated by `input_backoff_db`, pushed through the AM/AM
/// and AM/PM curves, and scaled back up, so the back-off selects the
/// operating point without changing the reference gain.
pub fn pa_distort(signal: &[Complex64], pa: &PaParams) -> Vec<Complex64> {
    let backoff = 10.0_f64.powf(-pa.input_backoff_db / 20.0);
    signal
        .iter()
        .map(|&s| {
            let scaled = s * backoff;
            let r = scaled.norm();
            if r == 0.0 {
                return Complex64::new(0.0, 0.0);
            }
            let gain = pa.am_am(r);
            let phase = scaled.arg() + pa.am_pm(r);
            Complex64::from_polar(gain, phase) / backoff
        })
        .collect()
}

/// Adds white circular Gaussian noise at `level_dbc` relative to the
/// measured mean power of the block. Negative infinity disables it.
pub fn tx_noise_add(signal: &[Complex64], level_dbc: f64, rng: &mut impl Rng) -> Vec<Complex64> {
    if level_dbc == f64::NEG_INFINITY || signal.is_empty() {
        return signal.to_vec();
    }
    let mean_power =
        signal.iter().map(|s| s.norm_sqr()).sum::<f64>() / signal.len() as f64;
    let var = mean_power * 10.0_f64.powf(level_dbc / 10.0);
    signal.iter().map(|&s| s + draw_cn(rng, var)).collect()
}

/// Adds white circular Gaussian noise of total power `n0` per sample.
pub fn thermal_noise_add(signal: &[Complex64], n0: f64, rng: &mut impl Rng) -> Vec<Complex64> {
    if n0 == 0.0 {
        return signal.to_vec();
    }
    signal.iter().map(|&s| s + draw_cn(rng, n0)).collect()
}

/// Which self-interference components the canceller removes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SicMode {
    Off,
    LinearOnly,
    FullNoCtc,
    Full,
}

impl SicMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            SicMode::Off => "off",
            SicMode::LinearOnly => "linear",
            SicMode::FullNoCtc => "full-no-ctc",
            SicMode::Full => "full",
        }
    }
}

impl std::str::FromStr for SicMode {
    type Err = SimError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "off" => Ok(SicMode::Off),
            "linear" => Ok(SicMode::LinearOnly),
            "full-no-ctc" => Ok(SicMode::FullNoCtc),
            "full" => Ok(SicMode::Full),
            other => Err(SimError::param(format!(
                "unknown sic mode `{other}` (expected off|linear|full-no-ctc|full)"
            ))),
        }
    }
}

/// Coupling strength into a co-located receiver and the post-cancellation
/// residual level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SiCoupling {
    /// How far above the desired-signal power the coupled interference sits
    /// at the receiver input, in dB.
    pub si_over_signal_db: f64,
    /// Residual after full cancellation, in dB relative to the thermal
    /// floor. Negative infinity models ideal cancellation.
    pub residual_floor_db: f64,
}

impl Default for SiCoupling {
    fn default() -> Self {
        SiCoupling {
            si_over_signal_db: 60.0,
            residual_floor_db: -10.0,
        }
    }
}

impl SiCoupling {
    /// Residual left exactly at the thermal floor, the strongest published
    /// single-antenna cancellation claim.
    pub fn residual_at_noise_floor() -> Self {
        SiCoupling {
            residual_floor_db: 0.0,
            ..Default::default()
        }
    }
}

/// What [`si_inject`] actually added: the canceller's genie knowledge.
#[derive(Debug, Clone)]
pub struct SiRecord {
    /// Receiver input before any self-interference.
    clean: Vec<Complex64>,
    /// Per coupled chain, the waveform added to the receiver (coupling gain
    /// already applied).
    injected: Vec<Vec<Complex64>>,
    /// Complex coupling gain per chain.
    gains: Vec<Complex64>,
    /// Which chain shares this receiver's antenna.
    self_chain: usize,
}

impl SiRecord {
    /// Coupled chain count.
    pub fn chain_count(&self) -> usize {
        self.injected.len()
    }

    /// Total injected interference power per sample (averaged).
    pub fn injected_power(&self) -> f64 {
        if self.clean.is_empty() {
            return 0.0;
        }
        let mut acc = vec![Complex64::new(0.0, 0.0); self.clean.len()];
        for chain in &self.injected {
            for (a, &v) in acc.iter_mut().zip(chain) {
                *a += v;
            }
        }
        acc.iter().map(|v| v.norm_sqr()).sum::<f64>() / acc.len() as f64
    }
}

/// Couples the co-located transmit chains into a receiver.
///
/// Each chain's analog waveform is scaled so its power lands
/// `si_over_signal_db` above `reference_power` (the desired-signal power at
/// this receiver), given a random coupling phase. Returns the interfered
/// waveform and the [`SiRecord`] the canceller will consume. An empty chain
/// set is the half-duplex case and returns the input untouched.
pub fn si_inject(
    rx: &[Complex64],
    own_tx_analog: &[Vec<Complex64>],
    self_chain: usize,
    reference_power: f64,
    coupling: &SiCoupling,
    rng: &mut impl Rng,
) -> Result<(Vec<Complex64>, SiRecord)> {
    if own_tx_analog.is_empty() {
        return Ok((
            rx.to_vec(),
            SiRecord {
                clean: rx.to_vec(),
                injected: Vec::new(),
                gains: Vec::new(),
                self_chain: 0,
            },
        ));
    }
    if self_chain >= own_tx_analog.len() {
        return Err(SimError::param(format!(
            "self chain {} out of range for {} chains",
            self_chain,
            own_tx_analog.len()
        )));
    }
    if coupling.si_over_signal_db < 0.0 {
        return Err(SimError::param(
            "si_over_signal_db must be nonnegative",
        ));
    }
    let target = reference_power * 10.0_f64.powf(coupling.si_over_signal_db / 10.0);

    let mut out = rx.to_vec();
    let mut injected = Vec::with_capacity(own_tx_analog.len());
    let mut gains = Vec::with_capacity(own_tx_analog.len());
    for tx in own_tx_analog {
        if tx.len() != rx.len() {
            return Err(SimError::dim(format!(
                "coupled waveform length {} != receiver length {}",
                tx.len(),
                rx.len()
            )));
        }
        let tx_power = tx.iter().map(|v| v.norm_sqr()).sum::<f64>() / tx.len() as f64;
        let amp = if tx_power > 0.0 {
            (target / tx_power).sqrt()
        } else {
            0.0
        };
        let phase = rng.gen::<f64>() * std::f64::consts::TAU;
        let gain = Complex64::from_polar(amp, phase);
        let wave: Vec<Complex64> = tx.iter().map(|&v| gain * v).collect();
        for (o, &w) in out.iter_mut().zip(&wave) {
            *o += w;
        }
        injected.push(wave);
        gains.push(gain);
    }
    let record = SiRecord {
        clean: rx.to_vec(),
        injected,
        gains,
        self_chain,
    };
    Ok((out, record))
}

/// Applies the configured cancellation stage to an interfered receiver.
///
/// `known_tx_digital` holds the ideal pre-amplifier baseband of each coupled
/// chain (what a digital canceller can regenerate); the analog waveforms and
/// coupling gains come from the genie `record`. `n0` is the thermal floor
/// that anchors the full-cancellation residual.
pub fn sic_cancel(
    record: &SiRecord,
    known_tx_digital: &[Vec<Complex64>],
    mode: SicMode,
    coupling: &SiCoupling,
    n0: f64,
    rng: &mut impl Rng,
) -> Result<Vec<Complex64>> {
    let chains = record.injected.len();
    if chains == 0 {
        return Ok(record.clean.clone());
    }
    if known_tx_digital.len() != chains {
        return Err(SimError::dim(format!(
            "{} digital references for {} coupled chains",
            known_tx_digital.len(),
            chains
        )));
    }
    match mode {
        SicMode::Off => {
            let mut out = record.clean.clone();
            for chain in &record.injected {
                for (o, &w) in out.iter_mut().zip(chain) {
                    *o += w;
                }
            }
            Ok(out)
        }
        SicMode::LinearOnly => {
            // Remove each chain's best linear replica; what survives is the
            // coupled nonlinear distortion plus transmit noise.
            let mut out = record.clean.clone();
            for (k, chain) in record.injected.iter().enumerate() {
                let digital = &known_tx_digital[k];
                if digital.len() != chain.len() {
                    return Err(SimError::dim(
                        "digital reference length mismatch",
                    ));
                }
                let analog_gain = linear_projection_gain(chain, digital, record.gains[k])?;
                let replica_gain = record.gains[k] * analog_gain;
                for ((o, &w), &b) in out.iter_mut().zip(chain).zip(digital) {
                    *o += w - replica_gain * b;
                }
            }
            Ok(out)
        }
        SicMode::FullNoCtc => {
            if chains < 2 {
                return Err(SimError::config(
                    "sic_mode",
                    "full-no-ctc needs a multi-chain node",
                ));
            }
            let mut out = record.clean.clone();
            for (k, chain) in record.injected.iter().enumerate() {
                if k == record.self_chain {
                    continue;
                }
                for (o, &w) in out.iter_mut().zip(chain) {
                    *o += w;
                }
            }
            Ok(out)
        }
        SicMode::Full => {
            let mut out = record.clean.clone();
            if coupling.residual_floor_db != f64::NEG_INFINITY {
                let var = n0 * 10.0_f64.powf(coupling.residual_floor_db / 10.0);
                if var > 0.0 {
                    for o in out.iter_mut() {
                        *o += draw_cn(rng, var);
                    }
                }
            }
            Ok(out)
        }
    }
}

/// Least-squares gain of the coupled analog waveform onto its ideal
/// baseband; the replica a purely linear canceller would form.
fn linear_projection_gain(
    injected: &[Complex64],
    digital: &[Complex64],
    coupling_gain: Complex64,
) -> Result<Complex64> {
    let denom: f64 = digital.iter().map(|b| b.norm_sqr()).sum();
    if denom == 0.0 {
        return Ok(Complex64::new(0.0, 0.0));
    }
    if coupling_gain.norm_sqr() == 0.0 {
        return Ok(Complex64::new(0.0, 0.0));
    }
    // injected = gain * analog, so analog = injected / gain.
    let num: Complex64 = injected
        .iter()
        .zip(digital)
        .map(|(&w, &b)| (w / coupling_gain) * b.conj())
        .sum();
    Ok(num / denom)
}
