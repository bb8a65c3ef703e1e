//! GOE noise and spiked Wigner observations `Y = λ·xxᵀ/‖x‖² + W`.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::prior::{sample_vector, SpikePrior};

/// Dense symmetric matrix stored in full row-major form.
///
/// Symmetry is enforced by construction: every mutation writes both halves.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    n: usize,
    data: Vec<f64>,
}

impl SymMatrix {
    pub fn zeros(n: usize) -> Self {
        SymMatrix {
            n,
            data: vec![0.0; n * n],
        }
    }

    /// Builds a symmetric matrix from the upper triangle `f(i, j)`, `i <= j`.
    pub fn from_upper(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = SymMatrix::zeros(n);
        for i in 0..n {
            for j in i..n {
                m.set(i, j, f(i, j));
            }
        }
        m
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let mut m = SymMatrix::zeros(diag.len());
        for (i, d) in diag.iter().enumerate() {
            m.set(i, i, *d);
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
        self.data[j * self.n + i] = v;
    }

    /// Row-major view of all `n²` entries.
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn trace(&self) -> f64 {
        (0..self.n).map(|i| self.get(i, i)).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// `‖self − other‖_F`.
    pub fn frobenius_distance(&self, other: &SymMatrix) -> Result<f64> {
        if self.n != other.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                found: other.n,
            });
        }
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt())
    }

    pub fn is_symmetric(&self) -> bool {
        (0..self.n)
            .all(|i| (i + 1..self.n).all(|j| self.get(i, j).to_bits() == self.get(j, i).to_bits()))
    }

    /// Adds `scale · v vᵀ` in place.
    pub fn add_rank_one(&mut self, scale: f64, v: &[f64]) {
        assert_eq!(v.len(), self.n);
        for i in 0..self.n {
            for j in i..self.n {
                let val = self.get(i, j) + scale * v[i] * v[j];
                self.set(i, j, val);
            }
        }
    }
}

/// Samples `W` from the GOE: independent upper triangle, off-diagonal
/// variance `1/n`, diagonal variance `2/n`.
pub fn sample_goe<R: Rng + ?Sized>(n: usize, rng: &mut R) -> SymMatrix {
    let off = (1.0 / n as f64).sqrt();
    let diag = (2.0 / n as f64).sqrt();
    SymMatrix::from_upper(n, |i, j| {
        let z: f64 = rng.sample(StandardNormal);
        if i == j {
            z * diag
        } else {
            z * off
        }
    })
}

/// One draw from the spiked Wigner model.
///
/// The planted spike is kept for diagnostics only; testing code should go
/// through [`SpikedSample::observation`].
#[derive(Debug, Clone)]
pub struct SpikedSample {
    y: SymMatrix,
    lambda: f64,
    planted_spike: Option<Vec<f64>>,
    prior_tag: String,
}

impl SpikedSample {
    /// The observed matrix `Y`.
    pub fn observation(&self) -> &SymMatrix {
        &self.y
    }

    pub fn into_observation(self) -> SymMatrix {
        self.y
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn dim(&self) -> usize {
        self.y.dim()
    }

    pub fn prior_tag(&self) -> &str {
        &self.prior_tag
    }

    /// The planted vector `x`, present iff the spiked branch was sampled.
    pub fn planted_spike(&self) -> Option<&[f64]> {
        self.planted_spike.as_deref()
    }
}

/// Samples `Y` and also returns the noise matrix `W` it was built from.
///
/// Draw order on `rng`: the spike `x` (only when `λ > 0`), then `W`. With
/// `λ = 0` the output is bit-identical to [`sample_goe`] on the same stream.
pub fn sample_spiked_parts<R: Rng + ?Sized>(
    prior: &SpikePrior,
    lambda: f64,
    n: usize,
    rng: &mut R,
) -> Result<(SpikedSample, SymMatrix)> {
    if !(lambda.is_finite() && lambda >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "lambda = {lambda} must be >= 0"
        )));
    }
    if n == 0 {
        return Err(Error::InvalidArgument("n must be positive".into()));
    }
    prior.validate()?;
    let spike = (lambda > 0.0).then(|| sample_vector(prior, n, rng));
    let w = sample_goe(n, rng);
    let mut y = w.clone();
    if let Some(x) = &spike {
        let norm_sq: f64 = x.iter().map(|v| v * v).sum();
        if norm_sq > 0.0 {
            y.add_rank_one(lambda / norm_sq, x);
        }
    }
    Ok((
        SpikedSample {
            y,
            lambda,
            planted_spike: spike,
            prior_tag: prior.tag(),
        },
        w,
    ))
}

/// Samples `Y = λ·xxᵀ/‖x‖² + W`, with the spike term zero when `‖x‖ = 0`.
pub fn sample_spiked<R: Rng + ?Sized>(
    prior: &SpikePrior,
    lambda: f64,
    n: usize,
    rng: &mut R,
) -> Result<SpikedSample> {
    sample_spiked_parts(prior, lambda, n, rng).map(|(s, _)| s)
}
