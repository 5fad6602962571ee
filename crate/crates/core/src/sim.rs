//! Synthetic data generator: responses that are exactly smooth across
//! horizons plus Gaussian noise scaled to a target signal-to-noise ratio,
//! with a uniformly random missingness mask.
//!
//! All randomness comes from ChaCha8 seeded with `cfg.seed`, one stream per
//! purpose (1 covariates, 2 coefficients, 3 noise, 4 mask), so each piece
//! is reproducible independently of the others.

use crate::basis::{build_basis, BasisMatrix, BasisSpec};
use crate::linalg::Matrix;
use crate::panel::{ColumnKey, Day, DesignSet, RowKey};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum SimError {
    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),
}

/// Noise scale: either a target ratio of empirical signal variance to noise
/// variance, or no noise at all.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoiseSpec {
    Snr(f64),
    Noiseless,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub n_locations: usize,
    pub p_predictors: usize,
    pub q_aheads: usize,
    pub true_df: usize,
    pub noise: NoiseSpec,
    pub missing_frac: f64,
    pub seed: u64,
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: String| Err(SimError::InvalidConfig(m));
        if self.n_locations == 0 || self.p_predictors == 0 || self.q_aheads == 0 {
            return bad("n, p, and q must be positive".into());
        }
        if self.true_df == 0 || self.true_df > self.q_aheads {
            return bad(format!(
                "true_df must be in 1..={}, got {}",
                self.q_aheads, self.true_df
            ));
        }
        if let NoiseSpec::Snr(snr) = self.noise {
            if !(snr.is_finite() && snr > 0.0) {
                return bad(format!("snr must be positive and finite, got {snr}"));
            }
        }
        if !(0.0..1.0).contains(&self.missing_frac) {
            return bad(format!(
                "missing_frac must be in [0, 1), got {}",
                self.missing_frac
            ));
        }
        Ok(())
    }
}

/// The generated design plus the ground truth behind it.
#[derive(Debug, Clone)]
pub struct SimOutput {
    /// Design with `y` masked according to `w`; horizons are `0..q`.
    pub design: DesignSet,
    /// The d x p coefficient matrix the responses were generated from.
    pub theta_star: Matrix,
    /// The polynomial basis with `true_df` columns used for generation.
    pub basis: BasisMatrix,
    /// Noise standard deviation actually applied.
    pub sigma: f64,
    /// Responses before masking (signal + noise), n x q.
    pub full_y: Matrix,
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn standard_normal_matrix(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Matrix {
    // Row-major fill order; part of the reproducibility contract.
    let data: Vec<f64> = (0..rows * cols)
        .map(|_| rng.sample::<f64, _>(StandardNormal))
        .collect();
    Matrix::from_vec(rows, cols, data).expect("normal draws are finite")
}

/// Location label for simulated row `i`; zero-padded so lexicographic order
/// agrees with numeric order.
pub fn location_label(i: usize) -> String {
    format!("loc{i:05}")
}

/// Predictor label for simulated column `k` (zero-based), similarly padded.
pub fn predictor_label(k: usize) -> String {
    format!("x{:03}", k + 1)
}

/// Generates one dataset:
/// `X` is n x p standard normal, `Theta*` is d x p standard normal,
/// the signal is `X Theta*' H'`, noise is i.i.d. normal with variance
/// `Var(signal) / snr` (population variance over all signal entries), and
/// exactly `round(missing_frac * n * q)` response cells are masked,
/// sampled uniformly without replacement (cell id `i * q + j`).
pub fn simulate(cfg: &SimConfig) -> Result<SimOutput, SimError> {
    cfg.validate()?;
    let (n, p, q, d) = (
        cfg.n_locations,
        cfg.p_predictors,
        cfg.q_aheads,
        cfg.true_df,
    );
    let aheads: Vec<Day> = (0..q as Day).collect();
    let basis = build_basis(&BasisSpec::polynomial(d, aheads.clone()))
        .map_err(|e| SimError::InvalidConfig(e.to_string()))?;

    let x = standard_normal_matrix(n, p, &mut stream_rng(cfg.seed, 1));
    let theta_star = standard_normal_matrix(d, p, &mut stream_rng(cfg.seed, 2));
    let signal = x
        .matmul(&theta_star.transpose())
        .matmul(&basis.h().transpose());

    let sigma = match cfg.noise {
        NoiseSpec::Noiseless => 0.0,
        NoiseSpec::Snr(snr) => {
            let cells = signal.as_slice();
            let mean = cells.iter().sum::<f64>() / cells.len() as f64;
            let var = cells.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>()
                / cells.len() as f64;
            (var / snr).sqrt()
        }
    };
    let full_y = if sigma == 0.0 {
        signal
    } else {
        let noise = standard_normal_matrix(n, q, &mut stream_rng(cfg.seed, 3));
        Matrix::from_fn(n, q, |i, j| signal.get(i, j) + sigma * noise.get(i, j))
    };

    let masked = (cfg.missing_frac * (n * q) as f64).round() as usize;
    let mut w = Matrix::from_fn(n, q, |_, _| 1.0);
    let mut y = full_y.clone();
    if masked > 0 {
        let mut rng = stream_rng(cfg.seed, 4);
        for cell in rand::seq::index::sample(&mut rng, n * q, masked) {
            let (i, j) = (cell / q, cell % q);
            w.set(i, j, 0.0);
            y.set(i, j, 0.0);
        }
    }

    let design = DesignSet {
        x,
        y,
        w,
        row_index: (0..n)
            .map(|i| RowKey {
                location: location_label(i),
                time: 0,
            })
            .collect(),
        column_index: (0..p)
            .map(|k| ColumnKey {
                variable: predictor_label(k),
                lag: 0,
            })
            .collect(),
        ahead_index: aheads,
    };
    Ok(SimOutput {
        design,
        theta_star,
        basis,
        sigma,
        full_y,
    })
}
