//! Frequency-selective Rayleigh links between each base-station antenna and
//! each terminal.
//!
//! One [`TapChannel`] per (antenna, user) pair serves both link directions:
//! reciprocity is structural, the uplink and downlink chains read the very
//! same tap object rather than a copy. Taps are i.i.d. circularly-symmetric
//! complex Gaussian with variance `1/L` (uniform power delay profile), so the
//! expected total channel energy is 1 per link.

use num_complex::Complex64;
use rand::Rng;

use crate::rng::draw_cn;
use crate::{dsp, Result, SimError};

/// Time-domain impulse response of one antenna-to-terminal link.
#[derive(Debug, Clone, PartialEq)]
pub struct TapChannel {
    taps: Vec<Complex64>,
}

impl TapChannel {
    /// Wraps an explicit tap vector (mostly for tests and fixtures).
    pub fn from_taps(taps: Vec<Complex64>) -> Result<Self> {
        if taps.is_empty() {
            return Err(SimError::param("a channel needs at least one tap"));
        }
        if taps.iter().any(|t| !t.re.is_finite() || !t.im.is_finite()) {
            return Err(SimError::param("non-finite channel tap"));
        }
        Ok(TapChannel { taps })
    }

    pub fn taps(&self) -> &[Complex64] {
        &self.taps
    }

    pub fn len(&self) -> usize {
        self.taps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.taps.is_empty()
    }

    /// Sum of squared tap magnitudes.
    pub fn energy(&self) -> f64 {
        self.taps.iter().map(|t| t.norm_sqr()).sum()
    }
}

/// The full grid of links for one cell: `n_e` antennas times `k` users.
#[derive(Debug, Clone)]
pub struct LinkSet {
    channels: Vec<TapChannel>, // row-major over (antenna, user)
    n_e: usize,
    k: usize,
}

impl LinkSet {
    /// The link between antenna `j` and user `i`. Uplink and downlink both
    /// go through this accessor; there is no per-direction copy.
    pub fn link(&self, antenna: usize, user: usize) -> &TapChannel {
        assert!(antenna < self.n_e && user < self.k, "link index out of range");
        &self.channels[antenna * self.k + user]
    }

    /// Mutable access, used by tests that assert reciprocity structurally.
    pub fn link_mut(&mut self, antenna: usize, user: usize) -> &mut TapChannel {
        assert!(antenna < self.n_e && user < self.k, "link index out of range");
        &mut self.channels[antenna * self.k + user]
    }

    pub fn n_antennas(&self) -> usize {
        self.n_e
    }

    pub fn n_users(&self) -> usize {
        self.k
    }
}

/// Per-subcarrier frequency response of one link.
///
/// `coefficients[k]` is the unnormalized tap transform
/// `sum_b h[b] exp(-2 pi i k b / N)`, the scaling under which per-subcarrier
/// multiplication equals N-point circular convolution in time (see the
/// convention note in [`crate::dsp`]).
#[derive(Debug, Clone, PartialEq)]
pub struct FreqChannel {
    coefficients: Vec<Complex64>,
}

impl FreqChannel {
    pub fn coefficients(&self) -> &[Complex64] {
        &self.coefficients
    }

    pub fn at(&self, bin: usize) -> Complex64 {
        self.coefficients[bin]
    }

    pub fn len(&self) -> usize {
        self.coefficients.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coefficients.is_empty()
    }
}

/// Draws the full antenna-by-user grid of `l_taps`-tap Rayleigh links.
pub fn draw_link_set(rng: &mut impl Rng, n_e: usize, k: usize, l_taps: usize) -> Result<LinkSet> {
    if n_e == 0 || k == 0 || l_taps == 0 {
        return Err(SimError::param(
            "antenna, user and tap counts must all be >= 1",
        ));
    }
    let var = 1.0 / l_taps as f64;
    let channels = (0..n_e * k)
        .map(|_| TapChannel {
            taps: (0..l_taps).map(|_| draw_cn(rng, var)).collect(),
        })
        .collect();
    Ok(LinkSet { channels, n_e, k })
}

/// Transforms a tap channel to its `n_fft`-bin frequency response.
pub fn freq_response(ch: &TapChannel, n_fft: usize) -> Result<FreqChannel> {
    if n_fft < ch.len() {
        return Err(SimError::param(format!(
            "n_fft {} shorter than the {}-tap response",
            n_fft,
            ch.len()
        )));
    }
    let mut padded = vec![Complex64::new(0.0, 0.0); n_fft];
    padded[..ch.len()].copy_from_slice(ch.taps());
    let scale = (n_fft as f64).sqrt();
    let mut coefficients = dsp::dft(&padded, n_fft)?;
    for c in &mut coefficients {
        *c *= scale;
    }
    Ok(FreqChannel { coefficients })
}

/// Stacks one user's per-antenna coefficients at bin `m` into the receive
/// column vector used by the multiuser detector.
pub fn stack_user_columns(per_antenna: &[&FreqChannel], bin: usize) -> Result<Vec<Complex64>> {
    if per_antenna.is_empty() {
        return Err(SimError::param("no frequency responses to stack"));
    }
    let n = per_antenna[0].len();
    if per_antenna.iter().any(|f| f.len() != n) {
        return Err(SimError::dim("frequency responses differ in length"));
    }
    if bin >= n {
        return Err(SimError::param(format!(
            "subcarrier index {bin} out of range 0..{n}"
        )));
    }
    Ok(per_antenna.iter().map(|f| f.at(bin)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trial_rng;

    #[test]
    fn draw_link_set_shape() {
        let mut rng = trial_rng(1, 0);
        let links = draw_link_set(&mut rng, 4, 2, 7).unwrap();
        assert_eq!(links.n_antennas(), 4);
        assert_eq!(links.n_users(), 2);
        for j in 0..4 {
            for i in 0..2 {
                assert_eq!(links.link(j, i).len(), 7);
            }
        }
    }

    #[test]
    fn draw_link_set_rejects_zero_counts() {
        let mut rng = trial_rng(1, 1);
        assert!(draw_link_set(&mut rng, 0, 2, 7).is_err());
        assert!(draw_link_set(&mut rng, 4, 0, 7).is_err());
        assert!(draw_link_set(&mut rng, 4, 2, 0).is_err());
    }

    #[test]
    fn single_tap_is_flat_fading() {
        let mut rng = trial_rng(2, 0);
        let links = draw_link_set(&mut rng, 1, 1, 1).unwrap();
        let fc = freq_response(links.link(0, 0), 64).unwrap();
        let mag0 = fc.at(0).norm();
        for bin in 0..64 {
            assert!((fc.at(bin).norm() - mag0).abs() < 1e-12);
        }
    }

    #[test]
    fn mean_link_energy_is_unity() {
        // Monte-Carlo moment check on the uniform power delay profile.
        let mut rng = trial_rng(3, 0);
        let draws = 10_000;
        let mut total = 0.0;
        for _ in 0..draws {
            let links = draw_link_set(&mut rng, 1, 1, 7).unwrap();
            total += links.link(0, 0).energy();
        }
        let mean = total / draws as f64;
        assert!((mean - 1.0).abs() < 0.02, "mean link energy {mean}");
    }

    #[test]
    fn unit_tap_gives_all_ones_response() {
        let ch = TapChannel::from_taps(vec![Complex64::new(1.0, 0.0)]).unwrap();
        let fc = freq_response(&ch, 16).unwrap();
        for bin in 0..16 {
            assert!((fc.at(bin) - Complex64::new(1.0, 0.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn delayed_tap_gives_phase_ramp() {
        let ch = TapChannel::from_taps(vec![
            Complex64::new(0.0, 0.0),
            Complex64::new(1.0, 0.0),
        ])
        .unwrap();
        let n = 16;
        let fc = freq_response(&ch, n).unwrap();
        for bin in 0..n {
            let ang = -2.0 * std::f64::consts::PI * bin as f64 / n as f64;
            let expect = Complex64::new(ang.cos(), ang.sin());
            assert!((fc.at(bin) - expect).norm() < 1e-12);
            assert!((fc.at(bin).norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn freq_response_rejects_short_fft() {
        let mut rng = trial_rng(4, 0);
        let links = draw_link_set(&mut rng, 1, 1, 7).unwrap();
        assert!(freq_response(links.link(0, 0), 6).is_err());
    }

    #[test]
    fn per_subcarrier_multiply_equals_circular_convolution() {
        // The convolution-theorem oracle that locks the scaling convention.
        let mut rng = trial_rng(5, 0);
        let n = 256;
        let links = draw_link_set(&mut rng, 1, 1, 7).unwrap();
        let ch = links.link(0, 0);
        let fc = freq_response(ch, n).unwrap();

        let sym: Vec<Complex64> = (0..n)
            .map(|_| crate::rng::draw_cn(&mut rng, 1.0))
            .collect();
        let s = dsp::idft(&sym, n).unwrap();

        let mut padded = vec![Complex64::new(0.0, 0.0); n];
        padded[..ch.len()].copy_from_slice(ch.taps());
        let y = dsp::circular_convolve(&padded, &s).unwrap();
        let y_f = dsp::dft(&y, n).unwrap();

        for bin in 0..n {
            let expect = fc.at(bin) * sym[bin];
            assert!((y_f[bin] - expect).norm() < 1e-10);
        }
    }

    #[test]
    fn stack_extracts_per_antenna_bins() {
        let mut rng = trial_rng(6, 0);
        let links = draw_link_set(&mut rng, 4, 2, 7).unwrap();
        let n = 64;
        let user = 1;
        let fcs: Vec<FreqChannel> = (0..4)
            .map(|j| freq_response(links.link(j, user), n).unwrap())
            .collect();
        let refs: Vec<&FreqChannel> = fcs.iter().collect();
        for &bin in &[0usize, 17, 63] {
            let col = stack_user_columns(&refs, bin).unwrap();
            assert_eq!(col.len(), 4);
            for (j, item) in col.iter().enumerate() {
                // Oracle: evaluate the tap transform at this bin directly.
                let mut expect = Complex64::new(0.0, 0.0);
                for (b, &tap) in links.link(j, user).taps().iter().enumerate() {
                    let ang = -2.0 * std::f64::consts::PI * (bin * b) as f64 / n as f64;
                    expect += tap * Complex64::new(ang.cos(), ang.sin());
                }
                assert!((item - expect).norm() < 1e-10);
            }
        }
        assert!(stack_user_columns(&refs, 64).is_err());
    }

    #[test]
    fn flat_channel_stacks_identically_across_bins() {
        let mut rng = trial_rng(7, 0);
        let links = draw_link_set(&mut rng, 3, 1, 1).unwrap();
        let fcs: Vec<FreqChannel> = (0..3)
            .map(|j| freq_response(links.link(j, 0), 32).unwrap())
            .collect();
        let refs: Vec<&FreqChannel> = fcs.iter().collect();
        let first = stack_user_columns(&refs, 0).unwrap();
        for bin in 1..32 {
            let col = stack_user_columns(&refs, bin).unwrap();
            for (a, b) in col.iter().zip(&first) {
                assert!((a - b).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn reciprocity_is_structural() {
        // Both directions read the same TapChannel; perturbing it must move
        // both recomputed responses.
        let mut rng = trial_rng(8, 0);
        let mut links = draw_link_set(&mut rng, 2, 2, 7).unwrap();
        let up_before = freq_response(links.link(0, 0), 64).unwrap();
        let down_before = freq_response(links.link(0, 0), 64).unwrap();
        assert_eq!(up_before, down_before);

        let taps = links.link_mut(0, 0);
        taps.taps[0] += Complex64::new(0.5, -0.25);

        let up_after = freq_response(links.link(0, 0), 64).unwrap();
        let down_after = freq_response(links.link(0, 0), 64).unwrap();
        assert_eq!(up_after, down_after);
        assert_ne!(up_after, up_before);
    }
}
