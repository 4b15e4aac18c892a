//! Downlink precoding at the base station and the matching terminal-side
//! post-processing.
//!
//! Per subcarrier, each user's 1 x N_e channel row is decomposed as
//! `u * sigma * v^H`; stacking the per-user `v` vectors gives the matrix
//! whose conjugate-transpose pseudo-inverse zero-forces the inter-user
//! interference. A diagonal power allocation found by per-user
//! water-filling scales the precoder columns; the composed per-subcarrier
//! system then collapses to parallel scalar channels `u * sigma * alpha`,
//! which the terminal rotates by `u^H`, MMSE-equalizes and despreads.

use num_complex::Complex64;

use crate::dsp::{self, ComplexMatrix, RowSvd};
use crate::{Result, SimError};

/// Per-user slice of the power allocation: one squared gain per subcarrier
/// plus the water level that produced them.
#[derive(Debug, Clone)]
pub struct PowerAllocation {
    pub alpha_sq: Vec<f64>,
    pub water_level: f64,
}

/// All precoding state for one SC-FDMA symbol.
#[derive(Debug, Clone)]
pub struct BeamformerSet {
    /// `svds[user][subcarrier]`.
    pub svds: Vec<Vec<RowSvd>>,
    /// One scaled precoder (N_e x K, columns already carry alpha) per
    /// subcarrier.
    pub precoders: Vec<ComplexMatrix>,
    /// `alpha[user][subcarrier]`, the square roots of the allocation.
    pub alpha: Vec<Vec<f64>>,
}

impl BeamformerSet {
    /// Effective scalar gain `sigma * alpha` seen by a user per subcarrier.
    pub fn effective_gains(&self, user: usize) -> Vec<f64> {
        self.svds[user]
            .iter()
            .zip(&self.alpha[user])
            .map(|(svd, a)| svd.sigma * a)
            .collect()
    }
}

/// Decomposes every user's channel row on every subcarrier.
///
/// `rows[user][subcarrier]` is the 1 x N_e frequency-domain row. Fails on
/// an all-zero row (a degenerate direction cannot be beamformed).
pub fn svd_beamformers(rows: &[Vec<Vec<Complex64>>]) -> Result<Vec<Vec<RowSvd>>> {
    if rows.is_empty() {
        return Err(SimError::param("no users to beamform"));
    }
    rows.iter()
        .map(|per_sc| per_sc.iter().map(|row| dsp::row_svd(row)).collect())
        .collect()
}

/// Zero-forcing precoder for one subcarrier: `pinv(V^H) * diag(alpha)`.
///
/// `v_stack` is N_e x K with the per-user beam directions as columns. The
/// defining property `V^H P == diag(alpha)` is verified to 1e-9 before the
/// matrix is returned; colinear user directions surface as a singularity
/// error instead of a silently broken precoder.
pub fn zf_precoder(v_stack: &ComplexMatrix, alpha: &[f64]) -> Result<ComplexMatrix> {
    let k = v_stack.cols();
    if alpha.len() != k {
        return Err(SimError::dim(format!(
            "{} gains for {} users",
            alpha.len(),
            k
        )));
    }
    if alpha.iter().any(|a| !a.is_finite() || *a < 0.0) {
        return Err(SimError::param("negative or non-finite power gain"));
    }
    let unit = dsp::pseudo_inverse(&v_stack.hermitian())?;
    let mut p = unit;
    for c in 0..k {
        for r in 0..p.rows() {
            *p.at_mut(r, c) *= alpha[c];
        }
    }
    // Defining property check.
    let prod = v_stack.hermitian().mul(&p)?;
    for r in 0..k {
        for c in 0..k {
            let expect = if r == c {
                Complex64::new(alpha[r], 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            };
            if (prod.at(r, c) - expect).norm() > 1e-9 * alpha[r].max(1.0) {
                return Err(SimError::Singular(
                    "zero-forcing check failed: V^H P is not diagonal".into(),
                ));
            }
        }
    }
    Ok(p)
}

/// Water-filling for one user.
///
/// Finds the single water level `v` such that
/// `alpha_sq[m] = max(0, v - n0 / sigmas[m]^2)` exhausts `budget` when each
/// subcarrier's power is weighted by its unit-gain precoder column norm
/// (`column_norms_sq[m]`, all ones for an unweighted allocation):
/// `sum_m alpha_sq[m] * column_norms_sq[m] == budget` to 1e-9 relative.
/// Zero-gain subcarriers receive nothing.
pub fn waterfill(
    sigmas: &[f64],
    column_norms_sq: &[f64],
    n0: f64,
    budget: f64,
) -> Result<PowerAllocation> {
    if sigmas.is_empty() || sigmas.len() != column_norms_sq.len() {
        return Err(SimError::dim(format!(
            "waterfill got {} gains and {} column norms",
            sigmas.len(),
            column_norms_sq.len()
        )));
    }
    if budget <= 0.0 || !budget.is_finite() {
        return Err(SimError::param("power budget must be positive"));
    }
    if n0 < 0.0 {
        return Err(SimError::param("noise floor must be nonnegative"));
    }
    if sigmas.iter().any(|s| *s < 0.0 || !s.is_finite()) {
        return Err(SimError::param("channel gains must be nonnegative"));
    }
    let active: Vec<usize> = (0..sigmas.len()).filter(|&m| sigmas[m] > 0.0).collect();
    if active.is_empty() {
        return Err(SimError::Allocation("all channel gains are zero".into()));
    }
    if active
        .iter()
        .any(|&m| column_norms_sq[m] <= 0.0 || !column_norms_sq[m].is_finite())
    {
        return Err(SimError::param("column norms must be positive"));
    }

    let spent = |level: f64| -> f64 {
        active
            .iter()
            .map(|&m| (level - n0 / (sigmas[m] * sigmas[m])).max(0.0) * column_norms_sq[m])
            .sum()
    };

    let max_floor = active
        .iter()
        .map(|&m| n0 / (sigmas[m] * sigmas[m]))
        .fold(0.0_f64, f64::max);
    let min_norm = active
        .iter()
        .map(|&m| column_norms_sq[m])
        .fold(f64::INFINITY, f64::min);
    let mut lo = 0.0;
    // Headroom doubled so rounding in budget/min_norm cannot leave the
    // bracket short of the root.
    let mut hi = max_floor + 2.0 * budget / min_norm;

    // Bisect to 1e-12 on the level itself; the budget check afterwards is
    // the contract.
    let mut level = hi;
    for _ in 0..200 {
        level = 0.5 * (lo + hi);
        if spent(level) > budget {
            hi = level;
        } else {
            lo = level;
        }
        if hi - lo < 1e-12 * hi.max(1.0) {
            level = 0.5 * (lo + hi);
            break;
        }
    }
    let tol = 1e-9 * budget;
    if (spent(level) - budget).abs() > tol {
        return Err(SimError::Allocation(format!(
            "water level did not converge: spent {} of {}",
            spent(level),
            budget
        )));
    }

    let alpha_sq: Vec<f64> = sigmas
        .iter()
        .map(|&s| {
            if s > 0.0 {
                (level - n0 / (s * s)).max(0.0)
            } else {
                0.0
            }
        })
        .collect();
    Ok(PowerAllocation {
        alpha_sq,
        water_level: level,
    })
}

/// Removes the left-singular phase: `u^H * y`, with `|u| == 1`.
pub fn ue_postprocess(y: Complex64, u: Complex64) -> Complex64 {
    u.conj() * y
}

/// Per-subcarrier MMSE equalizer against the effective scalar gains:
/// `sigma_eff * y / (sigma_eff^2 + n0)` elementwise.
pub fn ue_equalize(y: &[Complex64], sigma_eff: &[f64], n0: f64) -> Result<Vec<Complex64>> {
    if y.len() != sigma_eff.len() {
        return Err(SimError::dim(format!(
            "{} samples vs {} gains",
            y.len(),
            sigma_eff.len()
        )));
    }
    if sigma_eff.iter().any(|s| *s < 0.0) {
        return Err(SimError::param("effective gains must be nonnegative"));
    }
    y.iter()
        .zip(sigma_eff)
        .map(|(&yi, &s)| {
            let denom = s * s + n0;
            if denom == 0.0 {
                return Err(SimError::Singular(
                    "equalizer denominator is zero (no gain and no noise)".into(),
                ));
            }
            Ok(s * yi / denom)
        })
        .collect()
}

/// Builds the complete per-symbol beamforming state: SVDs, per-user
/// water-filled allocations (budget of one power unit per subcarrier,
/// precoder column norms included in the accounting), and scaled precoders.
///
/// `rows[user][subcarrier]` are the channel rows; `n0` anchors the water
/// levels. A rank-deficient direction stack on any subcarrier propagates as
/// a singularity error for the caller to count.
pub fn build_beamformers(rows: &[Vec<Vec<Complex64>>], n0: f64) -> Result<BeamformerSet> {
    let svds = svd_beamformers(rows)?;
    let k = svds.len();
    let m = svds[0].len();
    if svds.iter().any(|per_sc| per_sc.len() != m) {
        return Err(SimError::dim(
            "users disagree on subcarrier count",
        ));
    }
    let ne = svds[0][0].v.len();

    // Unit-gain precoders per subcarrier and their column norms.
    let mut unit_precoders = Vec::with_capacity(m);
    let mut col_norms_sq = vec![vec![0.0f64; m]; k];
    for sc in 0..m {
        let mut v_stack = ComplexMatrix::zeros(ne, k);
        for (user, per_sc) in svds.iter().enumerate() {
            for (r, &value) in per_sc[sc].v.iter().enumerate() {
                *v_stack.at_mut(r, user) = value;
            }
        }
        let unit = dsp::pseudo_inverse(&v_stack.hermitian())?;
        for (user, norms) in col_norms_sq.iter_mut().enumerate() {
            norms[sc] = unit.col(user).iter().map(|z| z.norm_sqr()).sum();
        }
        unit_precoders.push(unit);
    }

    // One water level per user, one unit of power per subcarrier.
    let budget = m as f64;
    let mut alpha = vec![vec![0.0f64; m]; k];
    for user in 0..k {
        let sigmas: Vec<f64> = svds[user].iter().map(|svd| svd.sigma).collect();
        let allocation = waterfill(&sigmas, &col_norms_sq[user], n0, budget)?;
        for (sc, a) in alpha[user].iter_mut().enumerate() {
            *a = allocation.alpha_sq[sc].sqrt();
        }
    }

    // Scale the precoder columns.
    let mut precoders = Vec::with_capacity(m);
    for (sc, mut p) in unit_precoders.into_iter().enumerate() {
        for user in 0..k {
            let a = alpha[user][sc];
            for r in 0..ne {
                *p.at_mut(r, user) *= a;
            }
        }
        precoders.push(p);
    }

    Ok(BeamformerSet {
        svds,
        precoders,
        alpha,
    })
}
