//! One Monte-Carlo trial: a single SC-FDMA symbol co-simulated through both
//! link directions with the configured impairments.
//!
//! Draw order inside a trial is fixed (links, bits, transmit noise, thermal
//! noise, coupling phases, cancellation residuals) so that a half-duplex run
//! consumes exactly the same random values as a full-duplex run up to the
//! self-interference stage; that is what makes the half-duplex baseline and
//! an ideally-cancelled full-duplex run bit-identical.
//!
//! When the amplifier is enabled the receivers' genie channel knowledge is
//! widened to the composite linear response (propagation times the block's
//! best linear amplifier gain) — what a practical estimator would measure —
//! leaving the nonlinear remainder as uncancellable distortion.

use num_complex::Complex64;
use rand_chacha::ChaCha8Rng;

use crate::channel::{self, FreqChannel, LinkSet, TapChannel};
use crate::dsp;
use crate::impairments::{self, SicMode};
use crate::modem;
use crate::scfdma::{self, SubcarrierMap, WaveformNumerology};
use crate::sim::config::{Duplex, SimConfig};
use crate::uplink::{self, PerSubcarrierObservation};
use crate::{downlink, trial_rng, Result, SimError};

/// Raw per-trial error counts for both directions.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct TrialCounts {
    pub uplink_bit_errors: u64,
    pub uplink_bits: u64,
    pub downlink_bit_errors: u64,
    pub downlink_bits: u64,
    pub precoder_failures: u64,
}

impl TrialCounts {
    pub fn merge(mut self, other: TrialCounts) -> TrialCounts {
        self.uplink_bit_errors += other.uplink_bit_errors;
        self.uplink_bits += other.uplink_bits;
        self.downlink_bit_errors += other.downlink_bit_errors;
        self.downlink_bits += other.downlink_bits;
        self.precoder_failures += other.precoder_failures;
        self
    }
}

/// Propagates a prefixed symbol through a tap channel under the circular
/// model (exact while the prefix covers the delay spread).
fn propagate(
    tx: &[Complex64],
    taps: &TapChannel,
    num: &WaveformNumerology,
) -> Result<Vec<Complex64>> {
    let body = dsp::cp_strip(tx, num.cp_len)?;
    let mut padded = vec![Complex64::new(0.0, 0.0); num.n_fft];
    padded[..taps.len()].copy_from_slice(taps.taps());
    let through = dsp::circular_convolve(&padded, &body)?;
    dsp::cp_add(&through, num.cp_len)
}

fn add_into(acc: &mut [Complex64], term: &[Complex64]) {
    for (a, t) in acc.iter_mut().zip(term) {
        *a += t;
    }
}

fn mean_power(s: &[Complex64]) -> f64 {
    if s.is_empty() {
        return 0.0;
    }
    s.iter().map(|v| v.norm_sqr()).sum::<f64>() / s.len() as f64
}

/// Best linear gain of the amplifier output against its input block.
fn linear_gain(output: &[Complex64], input: &[Complex64]) -> Complex64 {
    let denom: f64 = input.iter().map(|v| v.norm_sqr()).sum();
    if denom == 0.0 {
        return Complex64::new(1.0, 0.0);
    }
    let num: Complex64 = output
        .iter()
        .zip(input)
        .map(|(&o, &i)| o * i.conj())
        .sum();
    num / denom
}

struct TxChain {
    /// Ideal pre-amplifier baseband (the digital canceller reference).
    clean: Vec<Complex64>,
    /// Post-amplifier, post-transmit-noise waveform that actually radiates.
    analog: Vec<Complex64>,
    /// Linear gain of the amplifier over this block (one when disabled).
    gain: Complex64,
}

fn transmit(
    clean: Vec<Complex64>,
    cfg: &SimConfig,
    rng: &mut ChaCha8Rng,
) -> TxChain {
    let (amplified, gain) = if cfg.pa_enabled {
        let out = impairments::pa_distort(&clean, &cfg.pa);
        let g = linear_gain(&out, &clean);
        (out, g)
    } else {
        (clean.clone(), Complex64::new(1.0, 0.0))
    };
    let analog = impairments::tx_noise_add(&amplified, cfg.tx_noise_dbc, rng);
    TxChain {
        clean,
        analog,
        gain,
    }
}

/// The full-duplex receive path at one node: thermal noise, then (in FD)
/// coupling and the configured cancellation stage. `mode` already reflects
/// the node type (a single-chain node cannot run the no-crosstalk stage).
///
/// Self-interference randomness (coupling phases, residual noise) comes
/// from its own stream so a half-duplex run, which never touches it, draws
/// exactly the same channel/payload/noise values as a full-duplex run.
#[allow(clippy::too_many_arguments)]
fn receive(
    desired: Vec<Complex64>,
    own_chains: &[&TxChain],
    self_chain: usize,
    mode: SicMode,
    cfg: &SimConfig,
    n0: f64,
    noise_rng: &mut ChaCha8Rng,
    si_rng: &mut ChaCha8Rng,
) -> Result<Vec<Complex64>> {
    let reference = mean_power(&desired);
    let noisy = impairments::thermal_noise_add(&desired, n0, noise_rng);
    if cfg.duplex == Duplex::Hd || own_chains.is_empty() {
        return Ok(noisy);
    }
    let analogs: Vec<Vec<Complex64>> =
        own_chains.iter().map(|c| c.analog.clone()).collect();
    let digitals: Vec<Vec<Complex64>> =
        own_chains.iter().map(|c| c.clean.clone()).collect();
    let (_, record) = impairments::si_inject(
        &noisy,
        &analogs,
        self_chain,
        reference,
        &cfg.si_coupling,
        si_rng,
    )?;
    impairments::sic_cancel(&record, &digitals, mode, &cfg.si_coupling, n0, si_rng)
}

/// Runs one trial at the given operating point. The random streams are
/// derived from `(master_seed, trial_index)` alone, so any trial can run on
/// any thread; the same index always reproduces the same counts.
pub fn run_trial(cfg: &SimConfig, snr_db: f64, trial_index: u64) -> Result<TrialCounts> {
    let n0 = 10.0_f64.powf(-snr_db / 10.0);
    let num = WaveformNumerology::new(cfg.n_fft, cfg.n_data, cfg.cp_samples, cfg.bandwidth_hz)?;
    let map = SubcarrierMap::contiguous_centered(cfg.n_fft, cfg.n_data)?;
    let bits_per_user = cfg.n_data * modem::BITS_PER_SYMBOL;
    // Even stream indices carry the link itself, odd ones the
    // self-interference machinery.
    let mut rng = trial_rng(cfg.master_seed, 2 * trial_index);
    let mut si_rng = trial_rng(cfg.master_seed, 2 * trial_index + 1);

    // 1. Channels (reciprocal: both directions read this one set).
    let links = channel::draw_link_set(&mut rng, cfg.n_e, cfg.k, cfg.l_taps)?;
    let xlinks = if cfg.ue_xlink_attenuation_db.is_finite() && cfg.k > 1 {
        Some(channel::draw_link_set(&mut rng, cfg.k, cfg.k, cfg.l_taps)?)
    } else {
        None
    };

    // 2. Payloads.
    let ul_bits: Vec<Vec<bool>> = (0..cfg.k)
        .map(|_| modem::random_bits(&mut rng, bits_per_user))
        .collect();
    let dl_bits: Vec<Vec<bool>> = (0..cfg.k)
        .map(|_| modem::random_bits(&mut rng, bits_per_user))
        .collect();

    // 3. Frequency responses on the data bins.
    let freq: Vec<Vec<FreqChannel>> = (0..cfg.n_e)
        .map(|j| {
            (0..cfg.k)
                .map(|i| channel::freq_response(links.link(j, i), cfg.n_fft))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let bin_of = |sc: usize| map.indices()[sc];

    // 4. Downlink precoding from the reciprocal channel knowledge.
    let rows: Vec<Vec<Vec<Complex64>>> = (0..cfg.k)
        .map(|l| {
            (0..cfg.n_data)
                .map(|sc| {
                    (0..cfg.n_e)
                        .map(|j| freq[j][l].at(bin_of(sc)))
                        .collect::<Vec<Complex64>>()
                })
                .collect()
        })
        .collect();
    let beams = match downlink::build_beamformers(&rows, n0) {
        Ok(b) => Some(b),
        Err(SimError::Singular(_)) => None,
        Err(other) => return Err(other),
    };

    // 5. Transmit chains: terminals first, then base-station antennas.
    let dl_spread: Vec<Vec<Complex64>> = dl_bits
        .iter()
        .map(|b| {
            let symbols = modem::qam16_map(b)?;
            dsp::dft(&symbols, cfg.n_data)
        })
        .collect::<Result<Vec<_>>>()?;

    let ue_chains: Vec<TxChain> = ul_bits
        .iter()
        .map(|bits| {
            let symbols = modem::qam16_map(bits)?;
            let clean = scfdma::ue_tx_chain(&symbols, &map, &num)?;
            Ok(transmit(clean, cfg, &mut rng))
        })
        .collect::<Result<Vec<_>>>()?;

    let maps: Vec<&SubcarrierMap> = std::iter::repeat_n(&map, cfg.k).collect();
    let enb_chains: Vec<TxChain> = (0..cfg.n_e)
        .map(|j| {
            let clean = match &beams {
                Some(beams) => {
                    let per_user: Vec<Vec<Complex64>> = (0..cfg.k)
                        .map(|i| {
                            (0..cfg.n_data)
                                .map(|sc| beams.precoders[sc].at(j, i) * dl_spread[i][sc])
                                .collect()
                        })
                        .collect();
                    scfdma::enb_tx_chain(&per_user, &maps, &num)?
                }
                // Precoder failure: the base station stays silent this
                // symbol; the trial is counted as a diagnostic below.
                None => vec![Complex64::new(0.0, 0.0); num.symbol_len()],
            };
            Ok(transmit(clean, cfg, &mut rng))
        })
        .collect::<Result<Vec<_>>>()?;

    // 6. Receive fronts. Base-station antennas see every terminal through
    // the channel grid plus the station's own transmit chains; each
    // terminal sees every base-station antenna plus its own uplink chain.
    let enb_mode = cfg.sic_mode;
    // A single-chain terminal has no neighbouring chains: the no-crosstalk
    // experiment degenerates to full self-talk cancellation there.
    let ue_mode = match cfg.sic_mode {
        SicMode::FullNoCtc => SicMode::Full,
        m => m,
    };

    let mut ul_errors = 0u64;
    let mut ul_bits_total = 0u64;
    let mut dl_errors = 0u64;
    let mut dl_bits_total = 0u64;

    // Uplink receive + detection.
    let enb_chain_refs: Vec<&TxChain> = enb_chains.iter().collect();
    let mut enb_rx: Vec<Vec<Complex64>> = Vec::with_capacity(cfg.n_e);
    for j in 0..cfg.n_e {
        let mut desired = vec![Complex64::new(0.0, 0.0); num.symbol_len()];
        for (i, chain) in ue_chains.iter().enumerate() {
            add_into(
                &mut desired,
                &propagate(&chain.analog, links.link(j, i), &num)?,
            );
        }
        enb_rx.push(receive(
            desired,
            &enb_chain_refs,
            j,
            enb_mode,
            cfg,
            n0,
            &mut rng,
            &mut si_rng,
        )?);
    }

    // Downlink receive per terminal.
    let mut ue_rx: Vec<Vec<Complex64>> = Vec::with_capacity(cfg.k);
    for l in 0..cfg.k {
        let mut desired = vec![Complex64::new(0.0, 0.0); num.symbol_len()];
        for (j, chain) in enb_chains.iter().enumerate() {
            add_into(
                &mut desired,
                &propagate(&chain.analog, links.link(j, l), &num)?,
            );
        }
        // Terminal-to-terminal leakage, normally screened out entirely.
        if let Some(xl) = &xlinks {
            let scale = 10.0_f64.powf(-cfg.ue_xlink_attenuation_db / 20.0);
            for (m, chain) in ue_chains.iter().enumerate() {
                if m == l {
                    continue;
                }
                let through = propagate(&chain.analog, xl.link(m, l), &num)?;
                for (d, t) in desired.iter_mut().zip(&through) {
                    *d += scale * t;
                }
            }
        }
        let own = [&ue_chains[l]];
        ue_rx.push(receive(
            desired, &own, 0, ue_mode, cfg, n0, &mut rng, &mut si_rng,
        )?);
    }

    // Uplink detection: per-subcarrier multiuser observations with the
    // composite (amplifier-aware) channel columns.
    {
        let spectra: Vec<Vec<Complex64>> = enb_rx
            .iter()
            .map(|rx| scfdma::rx_front(rx, &map, &num))
            .collect::<Result<Vec<_>>>()?;
        let observations: Vec<PerSubcarrierObservation> = (0..cfg.n_data)
            .map(|sc| {
                let y: Vec<Complex64> = spectra.iter().map(|s| s[sc]).collect();
                let columns: Vec<Vec<Complex64>> = (0..cfg.k)
                    .map(|i| {
                        (0..cfg.n_e)
                            .map(|j| freq[j][i].at(bin_of(sc)) * ue_chains[i].gain)
                            .collect()
                    })
                    .collect();
                PerSubcarrierObservation::new(y, columns, n0)
            })
            .collect::<Result<Vec<_>>>()?;
        let estimates = uplink::detect_block(&observations, cfg.cancellation)?;
        for (i, bits) in ul_bits.iter().enumerate() {
            let symbols = uplink::despread_user(&estimates[i])?;
            let decided = modem::qam16_demap(&symbols);
            let (err, tot) = modem::ber_count(bits, &decided)?;
            ul_errors += err;
            ul_bits_total += tot;
        }
    }

    // Downlink detection: rotate, equalize, despread per terminal.
    match &beams {
        Some(beams) => {
            // Composite linear response of the transmit array: the mean
            // amplifier gain folds into the terminal's genie gain knowledge
            // (magnitude) and rotation (phase).
            let enb_gain: Complex64 = enb_chains
                .iter()
                .map(|c| c.gain)
                .sum::<Complex64>()
                / cfg.n_e as f64;
            let enb_phase = if enb_gain.norm() > 0.0 {
                enb_gain / enb_gain.norm()
            } else {
                Complex64::new(1.0, 0.0)
            };
            for (l, bits) in dl_bits.iter().enumerate() {
                let spectrum = scfdma::rx_front(&ue_rx[l], &map, &num)?;
                let rotated: Vec<Complex64> = spectrum
                    .iter()
                    .enumerate()
                    .map(|(sc, &v)| {
                        downlink::ue_postprocess(v, beams.svds[l][sc].u * enb_phase)
                    })
                    .collect();
                let gains: Vec<f64> = beams
                    .effective_gains(l)
                    .iter()
                    .map(|g| g * enb_gain.norm())
                    .collect();
                let equalized = downlink::ue_equalize(&rotated, &gains, n0)?;
                let symbols = dsp::idft(&equalized, cfg.n_data)?;
                let decided = modem::qam16_demap(&symbols);
                let (err, tot) = modem::ber_count(bits, &decided)?;
                dl_errors += err;
                dl_bits_total += tot;
            }
        }
        None => {
            // Counted diagnostic: the aborted symbol still contributes its
            // bits, at chance-level error.
            dl_bits_total = cfg.bits_per_trial();
            dl_errors = dl_bits_total / 2;
        }
    }

    Ok(TrialCounts {
        uplink_bit_errors: ul_errors,
        uplink_bits: ul_bits_total,
        downlink_bit_errors: dl_errors,
        downlink_bits: dl_bits_total,
        precoder_failures: u64::from(beams.is_none()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::impairments::SiCoupling;

    fn noiseless_cfg() -> SimConfig {
        SimConfig {
            snr_db_list: vec![120.0], // n0 = 1e-12
            trials_per_point: 1,
            pa_enabled: false,
            tx_noise_dbc: f64::NEG_INFINITY,
            si_coupling: SiCoupling {
                si_over_signal_db: 60.0,
                residual_floor_db: f64::NEG_INFINITY,
            },
            ..SimConfig::default()
        }
    }

    #[test]
    fn noiseless_trial_is_error_free_both_directions() {
        let cfg = noiseless_cfg();
        for trial in 0..5 {
            let counts = run_trial(&cfg, 120.0, trial).unwrap();
            assert_eq!(counts.uplink_bit_errors, 0, "trial {trial}");
            assert_eq!(counts.downlink_bit_errors, 0, "trial {trial}");
            assert_eq!(counts.uplink_bits, cfg.bits_per_trial());
            assert_eq!(counts.downlink_bits, cfg.bits_per_trial());
            assert_eq!(counts.precoder_failures, 0);
        }
    }

    #[test]
    fn half_duplex_equals_ideally_cancelled_full_duplex() {
        let fd = noiseless_cfg();
        let hd = SimConfig {
            duplex: Duplex::Hd,
            ..fd.clone()
        };
        for trial in 0..5 {
            let a = run_trial(&fd, 14.0, trial).unwrap();
            let b = run_trial(&hd, 14.0, trial).unwrap();
            assert_eq!(a, b, "trial {trial}");
        }
    }

    #[test]
    fn trial_counts_are_reproducible() {
        let cfg = SimConfig {
            pa_enabled: true,
            sic_mode: SicMode::Full,
            ..SimConfig::default()
        };
        let a = run_trial(&cfg, 12.0, 3).unwrap();
        let b = run_trial(&cfg, 12.0, 3).unwrap();
        assert_eq!(a, b);
        let c = run_trial(&cfg, 12.0, 4).unwrap();
        assert_ne!(a, c, "different trials should differ");
    }

    #[test]
    fn sic_off_swamps_the_link() {
        let cfg = SimConfig {
            sic_mode: SicMode::Off,
            ..SimConfig::default()
        };
        let mut counts = TrialCounts::default();
        for trial in 0..20 {
            counts = counts.merge(run_trial(&cfg, 20.0, trial).unwrap());
        }
        let ul = counts.uplink_bit_errors as f64 / counts.uplink_bits as f64;
        let dl = counts.downlink_bit_errors as f64 / counts.downlink_bits as f64;
        assert!(ul >= 0.4, "uplink ber {ul}");
        assert!(dl >= 0.4, "downlink ber {dl}");
    }

    #[test]
    fn full_sic_recovers_the_link_at_high_snr() {
        let cfg = SimConfig::default(); // full SIC, -10 dB residual
        let mut counts = TrialCounts::default();
        for trial in 0..20 {
            counts = counts.merge(run_trial(&cfg, 30.0, trial).unwrap());
        }
        let ul = counts.uplink_bit_errors as f64 / counts.uplink_bits as f64;
        let dl = counts.downlink_bit_errors as f64 / counts.downlink_bits as f64;
        assert!(ul < 1e-2, "uplink ber {ul}");
        assert!(dl < 1e-2, "downlink ber {dl}");
    }

    #[test]
    fn hard_cancellation_also_recovers_noiseless() {
        let cfg = SimConfig {
            cancellation: crate::uplink::CancelKind::Hard,
            ..noiseless_cfg()
        };
        let counts = run_trial(&cfg, 120.0, 0).unwrap();
        assert_eq!(counts.uplink_bit_errors, 0);
    }
}
