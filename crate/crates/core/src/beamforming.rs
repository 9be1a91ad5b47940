//! MMSE receive beamforming and the resulting uplink rates.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::channel::{channel_matrix, Scenario};
use crate::error::{Error, Result};

/// Beamformers and rates for one channel matrix.
#[derive(Debug, Clone)]
pub struct BeamformingResult {
    /// Unit-norm receive beamformers, one column per user.
    pub beamformers: DMatrix<Complex64>,
    pub sinrs: Vec<f64>,
    /// Per-user rates in bps/Hz.
    pub rates: Vec<f64>,
    pub sum_rate: f64,
}

fn check_user(h: &DMatrix<Complex64>, k: usize) -> Result<()> {
    if k < h.ncols() {
        Ok(())
    } else {
        Err(Error::IndexOutOfRange {
            what: "user",
            index: k,
            len: h.ncols(),
        })
    }
}

/// `C_k = γ Σ_{i≠k} h_i h_iᴴ + I`.
pub fn interference_covariance(
    h: &DMatrix<Complex64>,
    k: usize,
    snr: f64,
) -> Result<DMatrix<Complex64>> {
    check_user(h, k)?;
    let m = h.nrows();
    let mut c = DMatrix::<Complex64>::identity(m, m);
    let gamma = Complex64::new(snr, 0.0);
    for (i, hi) in h.column_iter().enumerate() {
        if i != k {
            c.gerc(gamma, &hi, &hi, Complex64::new(1.0, 0.0));
        }
    }
    // Force exact Hermitian symmetry so the Cholesky factorization sees it.
    for r in 0..m {
        c[(r, r)].im = 0.0;
        for col in r + 1..m {
            c[(col, r)] = c[(r, col)].conj();
        }
    }
    Ok(c)
}

/// MMSE beamformer `C_k⁻¹ h_k / ‖C_k⁻¹ h_k‖`, computed with a Cholesky solve.
pub fn mmse_beamformer(h: &DMatrix<Complex64>, k: usize, snr: f64) -> Result<DVector<Complex64>> {
    let c = interference_covariance(h, k, snr)?;
    let hk = h.column(k).into_owned();
    if hk.iter().all(|x| *x == Complex64::new(0.0, 0.0)) {
        return Err(Error::DegenerateChannel { user: k });
    }
    // C_k ⪰ I, so the factorization only fails on non-finite input.
    let chol = c.cholesky().ok_or_else(|| {
        Error::InvalidArgument(format!("covariance of user {k} is not positive definite"))
    })?;
    let w = chol.solve(&hk);
    let norm = w.norm();
    if !(norm.is_finite() && norm > 0.0) {
        return Err(Error::DegenerateChannel { user: k });
    }
    Ok(w.unscale(norm))
}

/// SINR of user `k` under an arbitrary beamformer `v`:
/// `γ|vᴴh_k|² / (γ Σ_{i≠k} |vᴴh_i|² + 1)`.
///
/// # Panics
/// If `k` is not a column of `h`.
pub fn user_sinr(h: &DMatrix<Complex64>, v: &DVector<Complex64>, k: usize, snr: f64) -> f64 {
    assert!(k < h.ncols(), "user {k} out of range");
    let mut signal = 0.0;
    let mut interference = 0.0;
    for (i, hi) in h.column_iter().enumerate() {
        let p = v.dotc(&hi).norm_sqr();
        if i == k {
            signal = p;
        } else {
            interference += p;
        }
    }
    snr * signal / (snr * interference + 1.0)
}

/// Sum-rate of channel matrix `h` with the MMSE beamformer applied per user.
pub fn sum_rate_for_channels(h: &DMatrix<Complex64>, snr: f64) -> Result<BeamformingResult> {
    let (m, k_users) = h.shape();
    let mut beamformers = DMatrix::zeros(m, k_users);
    let mut sinrs = Vec::with_capacity(k_users);
    for k in 0..k_users {
        let v = mmse_beamformer(h, k, snr)?;
        sinrs.push(user_sinr(h, &v, k, snr));
        beamformers.set_column(k, &v);
    }
    let rates: Vec<f64> = sinrs.iter().map(|s| (1.0 + s).log2()).collect();
    let sum_rate = rates.iter().sum();
    Ok(BeamformingResult {
        beamformers,
        sinrs,
        rates,
        sum_rate,
    })
}

/// Sum-rate under optimal receive beamforming for antennas at `positions`.
/// This is the objective every position optimizer maximizes.
pub fn sum_rate_optimal(positions: &[f64], scenario: &Scenario) -> Result<BeamformingResult> {
    sum_rate_for_channels(&channel_matrix(scenario, positions), scenario.snr)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn real_matrix(rows: usize, cols: usize, data: &[f64]) -> DMatrix<Complex64> {
        DMatrix::from_row_slice(rows, cols, &data.iter().map(|&x| c(x)).collect::<Vec<_>>())
    }

    #[test]
    fn covariance_single_user_is_identity() {
        let h = real_matrix(2, 1, &[3.0, 4.0]);
        let cov = interference_covariance(&h, 0, 5.0).unwrap();
        assert_eq!(cov, DMatrix::identity(2, 2));
    }

    #[test]
    fn covariance_basis_update() {
        // columns h_1 = [1, 0], h_2 = [0, 1]
        let h = real_matrix(2, 2, &[1.0, 0.0, 0.0, 1.0]);
        let cov = interference_covariance(&h, 0, 1.0).unwrap();
        assert_eq!(cov, real_matrix(2, 2, &[1.0, 0.0, 0.0, 2.0]));
        assert!(interference_covariance(&h, 2, 1.0).is_err());
    }

    #[test]
    fn matched_filter_for_single_user() {
        let h = real_matrix(2, 1, &[3.0, 4.0]);
        let v = mmse_beamformer(&h, 0, 1.0).unwrap();
        assert!((v[0] - c(0.6)).norm() < 1e-12);
        assert!((v[1] - c(0.8)).norm() < 1e-12);
        assert!((user_sinr(&h, &v, 0, 2.0) - 50.0).abs() < 1e-12);
    }

    #[test]
    fn two_user_closed_form() {
        // h_1 = [1, 0], h_2 = [1, 1]
        let h = real_matrix(2, 2, &[1.0, 1.0, 0.0, 1.0]);
        let cov = interference_covariance(&h, 0, 1.0).unwrap();
        assert_eq!(cov, real_matrix(2, 2, &[2.0, 1.0, 1.0, 2.0]));
        let v = mmse_beamformer(&h, 0, 1.0).unwrap();
        let s5 = 5f64.sqrt();
        assert!((v[0] - c(2.0 / s5)).norm() < 1e-12);
        assert!((v[1] - c(-1.0 / s5)).norm() < 1e-12);
        assert!((user_sinr(&h, &v, 0, 1.0) - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn orthogonal_users() {
        let h = real_matrix(2, 2, &[1.0, 0.0, 0.0, 1.0]);
        let res = sum_rate_for_channels(&h, 1.0).unwrap();
        assert!((res.sinrs[0] - 1.0).abs() < 1e-12);
        assert!((res.rates[0] - 1.0).abs() < 1e-12);
        assert!((res.sum_rate - 2.0).abs() < 1e-12);
    }

    #[test]
    fn scalar_channel_rate() {
        let h = real_matrix(1, 1, &[1.0]);
        let res = sum_rate_for_channels(&h, 3.0).unwrap();
        assert!((res.sum_rate - 2.0).abs() < 1e-12);
    }

    #[test]
    fn zero_channel_is_degenerate() {
        let h = real_matrix(2, 2, &[0.0, 1.0, 0.0, 1.0]);
        assert!(matches!(
            mmse_beamformer(&h, 0, 1.0),
            Err(Error::DegenerateChannel { user: 0 })
        ));
    }
}
