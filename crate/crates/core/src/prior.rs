//! Spike priors: centered, unit-variance, bounded-support distributions.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const MOMENT_TOL: f64 = 1e-12;

/// Distribution of the spike entries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum SpikePrior {
    /// Uniform on `{-1, +1}`.
    #[serde(rename = "rademacher")]
    Rademacher,
    /// `±1/√ρ` with probability `ρ/2` each, `0` otherwise.
    #[serde(rename = "sparse")]
    SparseRademacher { rho: f64 },
    /// Arbitrary finite distribution.
    #[serde(rename = "atoms")]
    FiniteAtoms { values: Vec<f64>, probs: Vec<f64> },
}

impl SpikePrior {
    /// Checks the centering, unit-variance and bounded-support conditions.
    pub fn validate(&self) -> Result<()> {
        match self {
            SpikePrior::Rademacher => Ok(()),
            SpikePrior::SparseRademacher { rho } => {
                if rho.is_finite() && *rho > 0.0 && *rho <= 1.0 {
                    Ok(())
                } else {
                    Err(Error::InvalidPrior(format!(
                        "rho = {rho} must lie in (0, 1]"
                    )))
                }
            }
            SpikePrior::FiniteAtoms { values, probs } => {
                if values.is_empty() {
                    return Err(Error::InvalidPrior("no atoms".into()));
                }
                if values.len() != probs.len() {
                    return Err(Error::InvalidPrior(format!(
                        "{} values but {} probabilities",
                        values.len(),
                        probs.len()
                    )));
                }
                if values.iter().any(|v| !v.is_finite()) {
                    return Err(Error::InvalidPrior("support is unbounded".into()));
                }
                if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
                    return Err(Error::InvalidPrior("negative probability".into()));
                }
                let total: f64 = probs.iter().sum();
                if (total - 1.0).abs() > MOMENT_TOL {
                    return Err(Error::InvalidPrior(format!(
                        "probabilities sum to {total}, not 1"
                    )));
                }
                let mean: f64 = values.iter().zip(probs).map(|(v, p)| v * p).sum();
                if mean.abs() > MOMENT_TOL {
                    return Err(Error::InvalidPrior(format!("mean ≠ 0 (mean = {mean})")));
                }
                let second: f64 = values.iter().zip(probs).map(|(v, p)| v * v * p).sum();
                if (second - 1.0).abs() > MOMENT_TOL {
                    return Err(Error::InvalidPrior(format!(
                        "variance ≠ 1 (variance = {second})"
                    )));
                }
                Ok(())
            }
        }
    }

    /// The prior as a list of `(value, probability)` atoms.
    pub fn atoms(&self) -> Vec<(f64, f64)> {
        match self {
            SpikePrior::Rademacher => vec![(-1.0, 0.5), (1.0, 0.5)],
            SpikePrior::SparseRademacher { rho } => {
                let a = 1.0 / rho.sqrt();
                let mut atoms = vec![(-a, rho / 2.0), (a, rho / 2.0)];
                if *rho < 1.0 {
                    atoms.push((0.0, 1.0 - rho));
                }
                atoms
            }
            SpikePrior::FiniteAtoms { values, probs } => {
                values.iter().copied().zip(probs.iter().copied()).collect()
            }
        }
    }

    /// Largest absolute atom.
    pub fn max_abs(&self) -> f64 {
        self.atoms()
            .iter()
            .filter(|(_, p)| *p > 0.0)
            .map(|(v, _)| v.abs())
            .fold(0.0, f64::max)
    }

    /// Short human-readable descriptor.
    pub fn tag(&self) -> String {
        match self {
            SpikePrior::Rademacher => "rademacher".into(),
            SpikePrior::SparseRademacher { rho } => format!("sparse(rho={rho})"),
            SpikePrior::FiniteAtoms { values, .. } => format!("atoms({})", values.len()),
        }
    }
}

/// Draws `n` i.i.d. entries from `prior`. The prior is assumed validated.
pub fn sample_vector<R: Rng + ?Sized>(prior: &SpikePrior, n: usize, rng: &mut R) -> Vec<f64> {
    match prior {
        SpikePrior::Rademacher => {
            let mut out = Vec::with_capacity(n);
            while out.len() < n {
                let bits: u64 = rng.random();
                let take = (n - out.len()).min(64);
                out.extend((0..take).map(|k| if (bits >> k) & 1 == 1 { 1.0 } else { -1.0 }));
            }
            out
        }
        SpikePrior::SparseRademacher { rho } => {
            let a = 1.0 / rho.sqrt();
            let half = rho / 2.0;
            (0..n)
                .map(|_| {
                    let u: f64 = rng.random();
                    if u < half {
                        a
                    } else if u < *rho {
                        -a
                    } else {
                        0.0
                    }
                })
                .collect()
        }
        SpikePrior::FiniteAtoms { values, probs } => {
            let index = WeightedIndex::new(probs).expect("validated prior");
            (0..n).map(|_| values[index.sample(rng)]).collect()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stream::stream_rng;

    #[test]
    fn named_priors_validate() {
        assert_eq!(SpikePrior::Rademacher.validate(), Ok(()));
        assert_eq!(
            SpikePrior::SparseRademacher { rho: 0.25 }.validate(),
            Ok(())
        );
        assert!(SpikePrior::SparseRademacher { rho: 0.0 }
            .validate()
            .is_err());
        assert!(SpikePrior::SparseRademacher { rho: 1.5 }
            .validate()
            .is_err());
    }

    #[test]
    fn sparse_atoms_have_unit_variance() {
        let atoms = SpikePrior::SparseRademacher { rho: 0.25 }.atoms();
        assert_eq!(atoms, vec![(-2.0, 0.125), (2.0, 0.125), (0.0, 0.75)]);
        let var: f64 = atoms.iter().map(|(v, p)| v * v * p).sum();
        assert_eq!(var, 1.0);
    }

    #[test]
    fn uncentered_atoms_rejected() {
        let prior = SpikePrior::FiniteAtoms {
            values: vec![1.0, -1.0],
            probs: vec![0.6, 0.4],
        };
        match prior.validate() {
            Err(Error::InvalidPrior(reason)) => assert!(reason.starts_with("mean ≠ 0"), "{reason}"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn bad_atoms_name_the_invariant() {
        let cases = [
            (vec![2.0, -2.0], vec![0.5, 0.5], "variance"),
            (vec![1.0, -1.0], vec![0.5, 0.6], "sum"),
            (vec![f64::INFINITY, -1.0], vec![0.5, 0.5], "unbounded"),
            (vec![1.0], vec![0.5, 0.5], "probabilities"),
        ];
        for (values, probs, word) in cases {
            let err = SpikePrior::FiniteAtoms { values, probs }
                .validate()
                .unwrap_err();
            assert!(err.to_string().contains(word), "{err}");
        }
    }

    #[test]
    fn three_point_prior_is_valid() {
        // ±√(3/2) w.p. 1/3 each, 0 w.p. 1/3.
        let a = 1.5f64.sqrt();
        let prior = SpikePrior::FiniteAtoms {
            values: vec![-a, 0.0, a],
            probs: vec![1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0],
        };
        assert_eq!(prior.validate(), Ok(()));
    }

    #[test]
    fn rademacher_support_and_norm() {
        let mut rng = stream_rng(1, "prior", 0);
        let x = sample_vector(&SpikePrior::Rademacher, 4, &mut rng);
        assert_eq!(x.len(), 4);
        assert!(x.iter().all(|v| *v == 1.0 || *v == -1.0));

        let n = 100_000;
        let x = sample_vector(&SpikePrior::Rademacher, n, &mut rng);
        let norm_sq: f64 = x.iter().map(|v| v * v).sum();
        assert_eq!(norm_sq, n as f64);
    }

    #[test]
    fn sparse_moments_match() {
        let n = 100_000;
        let mut rng = stream_rng(2, "prior", 0);
        let x = sample_vector(&SpikePrior::SparseRademacher { rho: 0.25 }, n, &mut rng);
        let mean = x.iter().sum::<f64>() / n as f64;
        let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
        assert!(mean.abs() < 4.0 / (n as f64).sqrt(), "mean {mean}");
        assert!((var - 1.0).abs() < 0.05, "var {var}");
    }

    #[test]
    fn same_seed_same_vector() {
        let prior = SpikePrior::SparseRademacher { rho: 0.3 };
        let a = sample_vector(&prior, 1000, &mut stream_rng(9, "p", 1));
        let b = sample_vector(&prior, 1000, &mut stream_rng(9, "p", 1));
        assert_eq!(a, b);
    }

    #[test]
    fn serde_shapes() {
        let p: SpikePrior = serde_json::from_str(r#"{"kind":"sparse","rho":0.25}"#).unwrap();
        assert_eq!(p, SpikePrior::SparseRademacher { rho: 0.25 });
        let p: SpikePrior = serde_json::from_str(r#"{"kind":"rademacher"}"#).unwrap();
        assert_eq!(p, SpikePrior::Rademacher);
        let p: SpikePrior =
            serde_json::from_str(r#"{"kind":"atoms","values":[-1,1],"probs":[0.5,0.5]}"#).unwrap();
        assert_eq!(p.atoms(), SpikePrior::Rademacher.atoms());
    }
}
