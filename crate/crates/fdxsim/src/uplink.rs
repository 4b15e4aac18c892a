//! Multiuser uplink detection at the base station: per-subcarrier MMSE
//! estimation, successive interference cancellation ordered by received
//! channel power, maximal-ratio combining for the last remaining user, and
//! despreading back to time-domain symbols.
//!
//! [`mmse_estimate`] and [`mrc_combine`] expose the bare equalizer forms
//! (matched filter against the interference-plus-noise covariance, and the
//! plain matched filter). The detector itself reapplies the MMSE bias
//! scaling `1/(1 + h^H R^-1 h)` to every stage — for the final user this is
//! the familiar `h^H y / (n0 + |h|^2)` combiner — so its estimates sit on
//! the constellation scale and successive subtraction stays stable down to
//! vanishing noise floors.

use num_complex::Complex64;

use crate::dsp::{self, ComplexMatrix};
use crate::{modem, Result, SimError};

/// Everything the detector sees on one subcarrier: the stacked receive
/// vector across antennas, each user's channel column, and the noise floor.
#[derive(Debug, Clone)]
pub struct PerSubcarrierObservation {
    y: Vec<Complex64>,
    columns: Vec<Vec<Complex64>>,
    n0: f64,
}

impl PerSubcarrierObservation {
    pub fn new(y: Vec<Complex64>, columns: Vec<Vec<Complex64>>, n0: f64) -> Result<Self> {
        if y.is_empty() {
            return Err(SimError::param("observation needs at least one antenna"));
        }
        if columns.is_empty() {
            return Err(SimError::param("observation needs at least one user"));
        }
        if columns.iter().any(|c| c.len() != y.len()) {
            return Err(SimError::dim(
                "channel column length != antenna count",
            ));
        }
        if n0 <= 0.0 || !n0.is_finite() {
            // An exactly zero floor makes the covariance singular once the
            // last interferer is cancelled; callers model "noiseless" with
            // a tiny positive floor instead.
            return Err(SimError::param("noise floor must be a positive number"));
        }
        Ok(PerSubcarrierObservation { y, columns, n0 })
    }

    pub fn antennas(&self) -> usize {
        self.y.len()
    }

    pub fn users(&self) -> usize {
        self.columns.len()
    }

    pub fn received(&self) -> &[Complex64] {
        &self.y
    }

    pub fn column(&self, user: usize) -> &[Complex64] {
        &self.columns[user]
    }

    pub fn noise_floor(&self) -> f64 {
        self.n0
    }
}

/// Detector output for one subcarrier.
#[derive(Debug, Clone)]
pub struct DetectionResult {
    /// Symbol estimate per user (indexed by user, not by detection rank).
    pub estimates: Vec<Complex64>,
    /// User indices in the order they were detected.
    pub order: Vec<usize>,
}

/// MMSE weights for `target` against the still-active interferers:
/// `w = R^-1 h_target` with `R = sum_i h_i h_i^H + n0 I` over
/// `active \ {target}`. Also returns `rho = h^H R^-1 h`.
fn mmse_weights(
    obs: &PerSubcarrierObservation,
    target: usize,
    active: &[usize],
) -> Result<(Vec<Complex64>, f64)> {
    let ne = obs.antennas();
    let mut r = ComplexMatrix::zeros(ne, ne);
    for i in 0..ne {
        *r.at_mut(i, i) = Complex64::new(obs.n0, 0.0);
    }
    for &user in active {
        if user == target {
            continue;
        }
        let h = &obs.columns[user];
        for a in 0..ne {
            for b in 0..ne {
                *r.at_mut(a, b) += h[a] * h[b].conj();
            }
        }
    }
    let w = dsp::herm_solve(&r, &obs.columns[target])?;
    let rho = w
        .iter()
        .zip(&obs.columns[target])
        .map(|(wi, hi)| (wi.conj() * hi).re)
        .sum::<f64>();
    Ok((w, rho))
}

/// Frequency-domain MMSE estimate of `target`'s symbol, with the positive
/// real bias scaling dropped: `h^H R^-1 y` where the covariance runs over
/// the still-`active` users other than `target`.
pub fn mmse_estimate(
    obs: &PerSubcarrierObservation,
    target: usize,
    active: &[usize],
) -> Result<Complex64> {
    if target >= obs.users() || !active.contains(&target) {
        return Err(SimError::param(format!(
            "target user {target} is not in the active set"
        )));
    }
    if active.iter().any(|&u| u >= obs.users()) {
        return Err(SimError::param("active set contains an unknown user"));
    }
    let (w, _) = mmse_weights(obs, target, active)?;
    Ok(w
        .iter()
        .zip(obs.received())
        .map(|(wi, yi)| wi.conj() * yi)
        .sum())
}

/// Matched-filter combiner `h^H y`.
pub fn mrc_combine(y: &[Complex64], h: &[Complex64]) -> Result<Complex64> {
    if y.len() != h.len() {
        return Err(SimError::dim(format!(
            "mrc_combine lengths differ: {} vs {}",
            y.len(),
            h.len()
        )));
    }
    Ok(h.iter().zip(y).map(|(hi, yi)| hi.conj() * yi).sum())
}

/// Successive interference cancellation with optimal ordering on one
/// subcarrier.
///
/// Repeatedly detects the strongest remaining user (by channel column
/// power, lowest index winning ties), subtracts its reconstructed
/// contribution, and shrinks the interference covariance to the survivors;
/// the last user is combined by MRC with the covariance reduced to the
/// noise scalar. Estimates carry the full MMSE scaling, so with vanishing
/// noise and independent columns they converge to the transmitted symbols.
pub fn ssic_oo_detect(obs: &PerSubcarrierObservation) -> Result<DetectionResult> {
    let k = obs.users();
    // Column powers, computed once per subcarrier and reused across stages
    // (the channel does not change within a symbol).
    let powers: Vec<f64> = obs
        .columns
        .iter()
        .map(|h| h.iter().map(|v| v.norm_sqr()).sum())
        .collect();

    let mut y_work = obs.y.clone();
    let mut active: Vec<usize> = (0..k).collect();
    let mut estimates = vec![Complex64::new(0.0, 0.0); k];
    let mut order = Vec::with_capacity(k);

    while active.len() > 1 {
        let &strongest = active
            .iter()
            .max_by(|&&a, &&b| {
                powers[a]
                    .partial_cmp(&powers[b])
                    .unwrap_or(std::cmp::Ordering::Equal)
                    // On ties prefer the lower index: max_by keeps the last
                    // maximal element, so order equal keys by index reversed.
                    .then(b.cmp(&a))
            })
            .expect("active set is nonempty");

        let work_obs = PerSubcarrierObservation {
            y: y_work.clone(),
            columns: obs.columns.clone(),
            n0: obs.n0,
        };
        let (w, rho) = mmse_weights(&work_obs, strongest, &active)?;
        let raw: Complex64 = w
            .iter()
            .zip(&y_work)
            .map(|(wi, yi)| wi.conj() * yi)
            .sum();
        let estimate = raw / (1.0 + rho);
        estimates[strongest] = estimate;
        order.push(strongest);

        for (yi, hi) in y_work.iter_mut().zip(&obs.columns[strongest]) {
            *yi -= hi * estimate;
        }
        active.retain(|&u| u != strongest);
    }

    let last = active[0];
    let mrc = mrc_combine(&y_work, &obs.columns[last])?;
    estimates[last] = mrc / (obs.n0 + powers[last]);
    order.push(last);

    Ok(DetectionResult { estimates, order })
}

/// Converts a user's per-subcarrier estimates back to time-domain symbols
/// (the M-point inverse transform of the spread block).
pub fn despread_user(estimates: &[Complex64]) -> Result<Vec<Complex64>> {
    dsp::idft(estimates, estimates.len())
}

/// Subtraction policy for block-level detection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CancelKind {
    /// Subtract the soft MMSE estimate directly, per subcarrier (the
    /// algorithm as written; ordering is recomputed on every subcarrier).
    #[default]
    Soft,
    /// Despread each detected user, slice to the nearest constellation
    /// point, re-spread and subtract the clean reconstruction. Ordering is
    /// by whole-block channel power since decisions need the full block.
    Hard,
}

/// Detects all users over a whole SC-FDMA block.
///
/// `observations` holds one [`PerSubcarrierObservation`] per allocated
/// subcarrier. Returns each user's frequency-domain estimates (soft mode)
/// or re-spread hard decisions' pre-subtraction estimates (hard mode),
/// ready for [`despread_user`].
pub fn detect_block(
    observations: &[PerSubcarrierObservation],
    kind: CancelKind,
) -> Result<Vec<Vec<Complex64>>> {
    if observations.is_empty() {
        return Err(SimError::param("no subcarriers to detect"));
    }
    let k = observations[0].users();
    if observations.iter().any(|o| o.users() != k) {
        return Err(SimError::dim("user count varies across subcarriers"));
    }
    let m = observations.len();

    match kind {
        CancelKind::Soft => {
            let mut per_user = vec![vec![Complex64::new(0.0, 0.0); m]; k];
            for (sc, obs) in observations.iter().enumerate() {
                let det = ssic_oo_detect(obs)?;
                for (user, est) in det.estimates.iter().enumerate() {
                    per_user[user][sc] = *est;
                }
            }
            Ok(per_user)
        }
        CancelKind::Hard => detect_block_hard(observations),
    }
}

fn detect_block_hard(observations: &[PerSubcarrierObservation]) -> Result<Vec<Vec<Complex64>>> {
    let k = observations[0].users();
    let m = observations.len();
    let n0 = observations[0].n0;

    // Whole-block power ordering: hard decisions need the complete block
    // before anything can be subtracted.
    let mut block_power = vec![0.0f64; k];
    for obs in observations {
        for (user, col) in obs.columns.iter().enumerate() {
            block_power[user] += col.iter().map(|v| v.norm_sqr()).sum::<f64>();
        }
    }

    let mut y_work: Vec<Vec<Complex64>> =
        observations.iter().map(|o| o.y.clone()).collect();
    let mut active: Vec<usize> = (0..k).collect();
    let mut per_user = vec![vec![Complex64::new(0.0, 0.0); m]; k];

    while !active.is_empty() {
        let &strongest = active
            .iter()
            .max_by(|&&a, &&b| {
                block_power[a]
                    .partial_cmp(&block_power[b])
                    .unwrap_or(std::cmp::Ordering::Equal)
                    .then(b.cmp(&a))
            })
            .expect("active set is nonempty");
        let last_stage = active.len() == 1;

        let mut estimates = Vec::with_capacity(m);
        for (sc, obs) in observations.iter().enumerate() {
            let est = if last_stage {
                let power: f64 = obs.columns[strongest]
                    .iter()
                    .map(|v| v.norm_sqr())
                    .sum();
                mrc_combine(&y_work[sc], &obs.columns[strongest])? / (n0 + power)
            } else {
                let work_obs = PerSubcarrierObservation {
                    y: y_work[sc].clone(),
                    columns: obs.columns.clone(),
                    n0,
                };
                let (w, rho) = mmse_weights(&work_obs, strongest, &active)?;
                let raw: Complex64 = w
                    .iter()
                    .zip(&y_work[sc])
                    .map(|(wi, yi)| wi.conj() * yi)
                    .sum();
                raw / (1.0 + rho)
            };
            estimates.push(est);
        }
        per_user[strongest] = estimates.clone();

        if !last_stage {
            // Clean reconstruction: despread, slice, re-spread, subtract.
            let time = dsp::idft(&estimates, m)?;
            let sliced = modem::qam16_map(&modem::qam16_demap(&time))?;
            let respread = dsp::dft(&sliced, m)?;
            for (sc, obs) in observations.iter().enumerate() {
                for (yi, hi) in y_work[sc].iter_mut().zip(&obs.columns[strongest]) {
                    *yi -= hi * respread[sc];
                }
            }
        }
        active.retain(|&u| u != strongest);
    }
    Ok(per_user)
}
