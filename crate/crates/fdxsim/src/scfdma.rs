//! SC-FDMA transmit and receive fronts: DFT spreading, subcarrier
//! allocation, N-point IDFT and cyclic prefix on the way out; the mirror
//! image on the way in. Shared by terminal uplink transmitters, the base
//! station's per-antenna downlink transmitters, and both receive fronts.

use num_complex::Complex64;

use crate::{dsp, Result, SimError};

/// Ordered set of the M distinct FFT bins a user occupies.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubcarrierMap {
    indices: Vec<usize>,
    n_total: usize,
}

impl SubcarrierMap {
    /// Builds a map from explicit bin indices; they must be distinct and
    /// inside `0..n_total`.
    pub fn new(indices: Vec<usize>, n_total: usize) -> Result<Self> {
        if indices.is_empty() {
            return Err(SimError::param("subcarrier map cannot be empty"));
        }
        if indices.len() > n_total {
            return Err(SimError::param(format!(
                "{} data subcarriers exceed the {} available bins",
                indices.len(),
                n_total
            )));
        }
        let mut seen = vec![false; n_total];
        for &idx in &indices {
            if idx >= n_total {
                return Err(SimError::param(format!(
                    "subcarrier index {idx} out of range 0..{n_total}"
                )));
            }
            if seen[idx] {
                return Err(SimError::param(format!(
                    "duplicate subcarrier index {idx}"
                )));
            }
            seen[idx] = true;
        }
        Ok(SubcarrierMap { indices, n_total })
    }

    /// The contiguous centred block of `m_used` bins out of `n_fft`,
    /// mirroring symmetric guard bands (e.g. bins 38..=217 for 180 of 256).
    pub fn contiguous_centered(n_fft: usize, m_used: usize) -> Result<Self> {
        if m_used == 0 || m_used > n_fft {
            return Err(SimError::param(format!(
                "cannot place {m_used} data subcarriers in {n_fft} bins"
            )));
        }
        let start = (n_fft - m_used) / 2;
        Self::new((start..start + m_used).collect(), n_fft)
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn m_used(&self) -> usize {
        self.indices.len()
    }

    pub fn n_total(&self) -> usize {
        self.n_total
    }
}

/// Waveform numerology: FFT size, data subcarriers, cyclic prefix, rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaveformNumerology {
    pub n_fft: usize,
    pub n_data: usize,
    pub cp_len: usize,
    pub bandwidth_hz: f64,
}

impl WaveformNumerology {
    pub fn new(n_fft: usize, n_data: usize, cp_len: usize, bandwidth_hz: f64) -> Result<Self> {
        if n_fft == 0 {
            return Err(SimError::param("n_fft must be >= 1"));
        }
        if n_data == 0 || n_data > n_fft {
            return Err(SimError::param(format!(
                "n_data {n_data} must be in 1..={n_fft}"
            )));
        }
        if cp_len >= n_fft {
            return Err(SimError::param(format!(
                "cp_len {cp_len} must be shorter than n_fft {n_fft}"
            )));
        }
        Ok(WaveformNumerology {
            n_fft,
            n_data,
            cp_len,
            bandwidth_hz,
        })
    }

    /// Samples per transmitted symbol including the prefix.
    pub fn symbol_len(&self) -> usize {
        self.n_fft + self.cp_len
    }
}

/// Places an M-length frequency block onto its mapped bins of an N-length
/// spectrum, zero elsewhere.
pub fn allocate(block: &[Complex64], map: &SubcarrierMap) -> Result<Vec<Complex64>> {
    if block.len() != map.m_used() {
        return Err(SimError::dim(format!(
            "allocate got {} values for {} subcarriers",
            block.len(),
            map.m_used()
        )));
    }
    let mut out = vec![Complex64::new(0.0, 0.0); map.n_total()];
    for (&idx, &v) in map.indices().iter().zip(block) {
        out[idx] = v;
    }
    Ok(out)
}

/// Extracts the mapped bins back out of an N-length spectrum; the transpose
/// of [`allocate`], so `deallocate(allocate(x)) == x`.
pub fn deallocate(spectrum: &[Complex64], map: &SubcarrierMap) -> Result<Vec<Complex64>> {
    if spectrum.len() != map.n_total() {
        return Err(SimError::dim(format!(
            "deallocate got {} bins, map covers {}",
            spectrum.len(),
            map.n_total()
        )));
    }
    Ok(map.indices().iter().map(|&idx| spectrum[idx]).collect())
}

/// Terminal transmit chain: DFT-spread the M symbols, allocate, N-point
/// IDFT, prepend the cyclic prefix.
pub fn ue_tx_chain(
    symbols: &[Complex64],
    map: &SubcarrierMap,
    num: &WaveformNumerology,
) -> Result<Vec<Complex64>> {
    let m = map.m_used();
    let spread = dsp::dft(symbols, m)?;
    let spectrum = allocate(&spread, map)?;
    let time = dsp::idft(&spectrum, num.n_fft)?;
    dsp::cp_add(&time, num.cp_len)
}

/// Base-station transmit chain for one antenna: superpose every user's
/// precoded frequency block on its mapped bins, then IDFT and prefix.
///
/// `per_user` holds each user's M-length block for this antenna (the
/// antenna's entry of the precoded vector), `maps` the per-user bin maps.
pub fn enb_tx_chain(
    per_user: &[Vec<Complex64>],
    maps: &[&SubcarrierMap],
    num: &WaveformNumerology,
) -> Result<Vec<Complex64>> {
    if per_user.is_empty() || per_user.len() != maps.len() {
        return Err(SimError::dim(format!(
            "enb_tx_chain got {} user blocks and {} maps",
            per_user.len(),
            maps.len()
        )));
    }
    let mut spectrum = vec![Complex64::new(0.0, 0.0); num.n_fft];
    for (block, map) in per_user.iter().zip(maps) {
        if map.n_total() != num.n_fft {
            return Err(SimError::dim(format!(
                "map covers {} bins, waveform has {}",
                map.n_total(),
                num.n_fft
            )));
        }
        if block.len() != map.m_used() {
            return Err(SimError::dim(format!(
                "user block length {} != map size {}",
                block.len(),
                map.m_used()
            )));
        }
        for (&idx, &v) in map.indices().iter().zip(block) {
            spectrum[idx] += v;
        }
    }
    let time = dsp::idft(&spectrum, num.n_fft)?;
    dsp::cp_add(&time, num.cp_len)
}

/// Receive front: strip the prefix, N-point DFT, pull out the mapped bins.
pub fn rx_front(
    received: &[Complex64],
    map: &SubcarrierMap,
    num: &WaveformNumerology,
) -> Result<Vec<Complex64>> {
    if received.len() != num.symbol_len() {
        return Err(SimError::dim(format!(
            "rx_front got {} samples, expected {}",
            received.len(),
            num.symbol_len()
        )));
    }
    let time = dsp::cp_strip(received, num.cp_len)?;
    let spectrum = dsp::dft(&time, num.n_fft)?;
    deallocate(&spectrum, map)
}
