use serde::{Deserialize, Serialize};

use super::dd::Dd;
use crate::poly;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Causality {
    /// One-sided weight `m^kappa * exp(sigma * m)` over `m >= 0`.
    Causal,
    /// Two-sided weight `exp(sigma * |m|)` over all integer `m`.
    #[serde(alias = "noncausal")]
    TwoSided,
}

/// The discount weight used by the regression.
///
/// `sigma` is the per-sample log decay (the forgetting factor) and must be
/// negative; the filter pole is `p = exp(sigma)`. Two-sided weights carry no
/// shape term, so `kappa` is zero for them.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightSpec {
    sigma: f64,
    kappa: u32,
    causality: Causality,
}

impl WeightSpec {
    pub fn new(sigma: f64, kappa: u32, causality: Causality) -> Result<Self> {
        if !sigma.is_finite() || sigma >= 0.0 {
            return Err(Error::invalid(format!(
                "forgetting factor sigma must be finite and negative, got {sigma}"
            )));
        }
        if causality == Causality::TwoSided && kappa != 0 {
            return Err(Error::invalid("two-sided weights require kappa = 0"));
        }
        Ok(WeightSpec {
            sigma,
            kappa,
            causality,
        })
    }

    pub fn causal(sigma: f64, kappa: u32) -> Result<Self> {
        Self::new(sigma, kappa, Causality::Causal)
    }

    pub fn two_sided(sigma: f64) -> Result<Self> {
        Self::new(sigma, 0, Causality::TwoSided)
    }

    /// Builds the weight from its pole `p` in `(0, 1)`.
    pub fn from_pole(pole: f64, kappa: u32, causality: Causality) -> Result<Self> {
        if !(pole > 0.0 && pole < 1.0) {
            return Err(Error::invalid(format!(
                "pole must lie in (0, 1), got {pole}"
            )));
        }
        Self::new(pole.ln(), kappa, causality)
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn kappa(&self) -> u32 {
        self.kappa
    }

    pub fn causality(&self) -> Causality {
        self.causality
    }

    pub fn pole(&self) -> f64 {
        self.sigma.exp()
    }

    /// `w(m)`. Causal weights are zero for negative `m`.
    pub fn weight(&self, m: i64) -> f64 {
        match self.causality {
            Causality::Causal if m < 0 => 0.0,
            Causality::Causal => {
                let mf = m as f64;
                mf.powi(self.kappa as i32) * (self.sigma * mf).exp()
            }
            Causality::TwoSided => (self.sigma * m.unsigned_abs() as f64).exp(),
        }
    }

    /// Moments `mu[i] = sum_m m^i w(m)` for `i = 0..=max_order`.
    pub fn moments(&self, max_order: usize) -> Vec<f64> {
        self.scaled_moments(max_order, Dd::ONE)
            .into_iter()
            .map(Dd::to_f64)
            .collect()
    }

    /// Moments of the scaled abscissa `t = scale * m`: `scale^i * mu[i]`.
    ///
    /// Uses `sum_{m>=0} m^j p^m = sum_r S(j, r) r! p^r / (1 - p)^(r + 1)`.
    pub(crate) fn scaled_moments(&self, max_order: usize, scale: Dd) -> Vec<Dd> {
        let p = Dd::from(self.pole());
        let q = Dd::ONE - p;
        let kappa = self.kappa as usize;
        let stirling = poly::stirling2_table(max_order + kappa);
        let one_sided = |j: usize, i: usize| -> Dd {
            let sum = (0..=j).fold(Dd::ZERO, |acc, r| {
                let factorial: f64 = (1..=r).map(|v| v as f64).product();
                acc + Dd::from(stirling[j][r] * factorial) * p.powi(r as u32) / q.powi(r as u32 + 1)
            });
            sum * scale.powi(i as u32)
        };
        (0..=max_order)
            .map(|i| match self.causality {
                Causality::Causal => one_sided(i + kappa, i),
                Causality::TwoSided if i == 0 => Dd::from(2.0) * one_sided(0, 0) - Dd::ONE,
                Causality::TwoSided if i % 2 == 1 => Dd::ZERO,
                Causality::TwoSided => Dd::from(2.0) * one_sided(i, i),
            })
            .collect()
    }
}

/// Closed-form weight moments; see [`WeightSpec::moments`].
pub fn weight_moments(spec: &WeightSpec, max_order: usize) -> Vec<f64> {
    spec.moments(max_order)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn truncated(spec: &WeightSpec, order: usize, terms: i64) -> f64 {
        (0..terms)
            .map(|m| {
                let mf = m as f64;
                match spec.causality() {
                    Causality::Causal => mf.powi(order as i32) * spec.weight(m),
                    Causality::TwoSided if m == 0 => mf.powi(order as i32) * spec.weight(0),
                    Causality::TwoSided => {
                        (mf.powi(order as i32) + (-mf).powi(order as i32)) * spec.weight(m)
                    }
                }
            })
            .sum()
    }

    #[test]
    fn geometric_moments_at_half() {
        let spec = WeightSpec::from_pole(0.5, 0, Causality::Causal).unwrap();
        let mu = spec.moments(1);
        assert!((mu[0] - 2.0).abs() < 1e-15);
        assert!((mu[1] - 2.0).abs() < 1e-15);
        assert!((truncated(&spec, 1, 200) - 2.0).abs() < 1e-12);

        let shaped = WeightSpec::from_pole(0.5, 1, Causality::Causal).unwrap();
        assert!((shaped.moments(0)[0] - 2.0).abs() < 1e-15);
    }

    #[test]
    fn closed_form_matches_truncated_sums() {
        for &p in &[0.1, 0.25, 0.5, 0.75, 0.9] {
            for kappa in 0..3 {
                let spec = WeightSpec::from_pole(p, kappa, Causality::Causal).unwrap();
                let mu = spec.moments(6);
                for (i, &m) in mu.iter().enumerate() {
                    let direct = truncated(&spec, i, 500);
                    assert!(
                        (m - direct).abs() <= 1e-12 * direct.abs().max(1.0),
                        "p={p} kappa={kappa} i={i}: {m} vs {direct}"
                    );
                }
            }
            let spec = WeightSpec::from_pole(p, 0, Causality::TwoSided).unwrap();
            for (i, &m) in spec.moments(6).iter().enumerate() {
                let direct = truncated(&spec, i, 500);
                assert!(
                    (m - direct).abs() <= 1e-12 * direct.abs().max(1.0),
                    "two-sided p={p} i={i}: {m} vs {direct}"
                );
            }
        }
    }

    #[test]
    fn rejects_non_negative_sigma() {
        assert!(WeightSpec::causal(0.0, 0).is_err());
        assert!(WeightSpec::causal(0.3, 0).is_err());
        assert!(WeightSpec::causal(f64::NAN, 0).is_err());
        assert!(WeightSpec::from_pole(1.0, 0, Causality::Causal).is_err());
    }

    #[test]
    fn two_sided_rejects_shape() {
        assert!(WeightSpec::new(-1.0, 1, Causality::TwoSided).is_err());
    }

    #[test]
    fn shaped_weight_vanishes_at_origin() {
        let spec = WeightSpec::causal(-0.5, 1).unwrap();
        assert_eq!(spec.weight(0), 0.0);
        assert_eq!(spec.weight(-3), 0.0);
    }
}
