//! Far-field multipath channels as functions of antenna positions.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One channel realization: per-user path angles and gains plus the transmit SNR.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub num_users: usize,
    pub num_paths: usize,
    /// Spatial angles `[user][path]`.
    pub spatial_angles: Vec<Vec<f64>>,
    /// Complex path gains `[user][path]`, serialized as `[re, im]` pairs.
    pub path_gains: Vec<Vec<Complex64>>,
    /// Linear transmit SNR `P_t / σ²`.
    pub snr: f64,
    /// Gain normalization `ϖ²`; only used by the sampler.
    pub avg_power: f64,
}

impl Scenario {
    /// Builds a scenario from explicit angles and gains, checking shapes.
    pub fn new(
        spatial_angles: Vec<Vec<f64>>,
        path_gains: Vec<Vec<Complex64>>,
        snr: f64,
    ) -> Result<Self> {
        let num_users = spatial_angles.len();
        let num_paths = spatial_angles.first().map_or(0, Vec::len);
        let scenario = Self {
            num_users,
            num_paths,
            spatial_angles,
            path_gains,
            snr,
            avg_power: 1.0,
        };
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_users == 0 || self.num_paths == 0 {
            return Err(Error::InvalidArgument(
                "scenario needs at least one user and one path".into(),
            ));
        }
        if !(self.snr.is_finite() && self.snr > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "snr must be positive, got {}",
                self.snr
            )));
        }
        let angles_ok = self.spatial_angles.len() == self.num_users
            && self.spatial_angles.iter().all(|r| r.len() == self.num_paths);
        let gains_ok = self.path_gains.len() == self.num_users
            && self.path_gains.iter().all(|r| r.len() == self.num_paths);
        if !(angles_ok && gains_ok) {
            return Err(Error::InvalidArgument(format!(
                "angle and gain tables must both be {}x{}",
                self.num_users, self.num_paths
            )));
        }
        Ok(())
    }
}

/// Steering vector with entries `exp(-j 2π δ_m θ)`; positions are in wavelengths.
pub fn steering_vector(theta: f64, positions: &[f64]) -> DVector<Complex64> {
    DVector::from_iterator(
        positions.len(),
        positions
            .iter()
            .map(|&x| Complex64::from_polar(1.0, -2.0 * PI * x * theta)),
    )
}

/// Channel of user `k` (zero-based): `h_k = Σ_n conj(β_{k,n}) b(θ_{k,n})`.
pub fn user_channel(scenario: &Scenario, k: usize, positions: &[f64]) -> Result<DVector<Complex64>> {
    if k >= scenario.num_users {
        return Err(Error::IndexOutOfRange {
            what: "user",
            index: k,
            len: scenario.num_users,
        });
    }
    let mut h = DVector::zeros(positions.len());
    for (&theta, beta) in scenario.spatial_angles[k]
        .iter()
        .zip(&scenario.path_gains[k])
    {
        h.axpy(beta.conj(), &steering_vector(theta, positions), Complex64::new(1.0, 0.0));
    }
    Ok(h)
}

/// `M x K` channel matrix whose column `k` is [`user_channel`].
pub fn channel_matrix(scenario: &Scenario, positions: &[f64]) -> DMatrix<Complex64> {
    let m = positions.len();
    let mut h = DMatrix::zeros(m, scenario.num_users);
    for k in 0..scenario.num_users {
        for (angles, gains) in scenario.spatial_angles[k].iter().zip(&scenario.path_gains[k]) {
            let g = gains.conj();
            for (row, &x) in positions.iter().enumerate() {
                h[(row, k)] += g * Complex64::from_polar(1.0, -2.0 * PI * x * angles);
            }
        }
    }
    h
}

/// Draws angles `θ ~ U(-0.5, 0.5)` and gains `β ~ CN(0, ϖ²/N)` for every user and path.
pub fn sample_scenario<R: Rng + ?Sized>(
    num_users: usize,
    num_paths: usize,
    avg_power: f64,
    snr: f64,
    rng: &mut R,
) -> Result<Scenario> {
    if !(avg_power.is_finite() && avg_power > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "average power must be positive, got {avg_power}"
        )));
    }
    let scale = (avg_power / (2.0 * num_paths as f64)).sqrt();
    let mut spatial_angles = Vec::with_capacity(num_users);
    let mut path_gains = Vec::with_capacity(num_users);
    for _ in 0..num_users {
        let angles = (0..num_paths).map(|_| rng.random_range(-0.5..=0.5)).collect();
        let gains = (0..num_paths)
            .map(|_| {
                let re: f64 = StandardNormal.sample(rng);
                let im: f64 = StandardNormal.sample(rng);
                Complex64::new(re * scale, im * scale)
            })
            .collect();
        spatial_angles.push(angles);
        path_gains.push(gains);
    }
    let scenario = Scenario {
        num_users,
        num_paths,
        spatial_angles,
        path_gains,
        snr,
        avg_power,
    };
    scenario.validate()?;
    Ok(scenario)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn close(a: Complex64, b: Complex64) -> bool {
        (a - b).norm() < 1e-12
    }

    #[test]
    fn steering_vector_examples() {
        let b = steering_vector(0.0, &[0.3, -1.7, 4.0]);
        assert!(b.iter().all(|&x| close(x, c(1.0, 0.0))));

        let b = steering_vector(0.5, &[0.0, 0.5]);
        assert!(close(b[0], c(1.0, 0.0)));
        assert!(close(b[1], c(0.0, -1.0)));
    }

    #[test]
    fn steering_vector_conjugate_symmetry() {
        let pos = [0.1, 2.3, -4.4];
        let a = steering_vector(0.37, &pos);
        let b = steering_vector(-0.37, &pos);
        for (x, y) in a.iter().zip(b.iter()) {
            assert!(close(*x, y.conj()));
            assert!((x.norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn user_channel_examples() {
        let s = Scenario::new(vec![vec![0.0]], vec![vec![c(1.0, 0.0)]], 1.0).unwrap();
        let h = user_channel(&s, 0, &[0.0, 0.7, 3.1]).unwrap();
        assert!(h.iter().all(|&x| close(x, c(1.0, 0.0))));

        let s = Scenario::new(vec![vec![0.21, -0.21]], vec![vec![c(1.0, 0.0); 2]], 1.0).unwrap();
        let h = user_channel(&s, 0, &[0.0]).unwrap();
        assert!(close(h[0], c(2.0, 0.0)));

        let s = Scenario::new(vec![vec![0.5]], vec![vec![c(1.0, 0.0)]], 1.0).unwrap();
        // conj(β) b with β = 1 leaves the steering vector unconjugated
        let h = user_channel(&s, 0, &[0.0, 0.5]).unwrap();
        assert!(close(h[0], c(1.0, 0.0)));
        assert!(close(h[1], c(0.0, -1.0)));

        assert!(matches!(
            user_channel(&s, 1, &[0.0]),
            Err(Error::IndexOutOfRange { .. })
        ));
    }

    #[test]
    fn channel_matrix_columns_match_user_channels() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let s = sample_scenario(3, 3, 1.0, 9.5, &mut rng).unwrap();
        let pos: Vec<f64> = (0..12).map(|i| i as f64 * 0.8 - 5.0).collect();
        let h = channel_matrix(&s, &pos);
        assert_eq!(h.shape(), (12, 3));
        for k in 0..3 {
            let hk = user_channel(&s, k, &pos).unwrap();
            assert!((h.column(k) - hk).norm() < 1e-12);
        }
    }

    #[test]
    fn user_channel_is_linear_in_gains() {
        let angles = vec![vec![0.1, -0.3]];
        let g1 = vec![c(1.0, 2.0), c(-0.5, 0.1)];
        let g2 = vec![c(0.3, -1.0), c(2.0, 0.7)];
        let sum: Vec<_> = g1.iter().zip(&g2).map(|(a, b)| a + b).collect();
        let pos = [0.0, 1.3, 2.9];
        let h = |g: Vec<Complex64>| {
            user_channel(&Scenario::new(angles.clone(), vec![g], 1.0).unwrap(), 0, &pos).unwrap()
        };
        assert!((h(g1) + h(g2) - h(sum)).norm() < 1e-12);
    }

    #[test]
    fn sampler_is_deterministic_and_in_range() {
        let a = sample_scenario(3, 3, 1.0, 9.5, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        let b = sample_scenario(3, 3, 1.0, 9.5, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        assert_eq!(a, b);
        assert!(a.spatial_angles.iter().flatten().all(|t| (-0.5..=0.5).contains(t)));
    }

    #[test]
    fn sampler_gain_power() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let s = sample_scenario(1, 100_000, 2.0, 1.0, &mut rng).unwrap();
        let mean: f64 =
            s.path_gains[0].iter().map(|g| g.norm_sqr()).sum::<f64>() / 100_000.0;
        let target = 2.0 / 100_000.0;
        assert!((mean / target - 1.0).abs() < 0.02, "{mean} vs {target}");
    }

    #[test]
    fn scenario_shape_is_validated() {
        assert!(Scenario::new(vec![vec![0.0, 0.1]], vec![vec![c(1.0, 0.0)]], 1.0).is_err());
        assert!(Scenario::new(vec![vec![0.0]], vec![vec![c(1.0, 0.0)]], 0.0).is_err());
    }
}
