//! Closed-form coefficients of the second-degree (`B = 2`) designs.

use std::fmt;

use serde::{Deserialize, Serialize};

use super::lde::{FilterCoefficients, LdeCoefficients, NonCausalPair};
use crate::poly;
use crate::{Error, Result};

/// The six tabulated `B = 2` designs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ClosedForm {
    /// Causal, `kappa = 0` (discrete Laguerre) smoother.
    LaguerreSmoother,
    /// Causal, `kappa = 0` differentiator.
    LaguerreDifferentiator,
    /// Two-sided (`q = 0`) smoother, same coefficients in both directions.
    SymmetricSmoother,
    /// Two-sided differentiator, forward and backward numerators differ in sign.
    SymmetricDifferentiator,
    /// Causal, `kappa = 1` (associated Laguerre) smoother.
    AssociatedSmoother,
    /// Causal, `kappa = 1` differentiator.
    AssociatedDifferentiator,
}

impl ClosedForm {
    pub const ALL: [ClosedForm; 6] = [
        ClosedForm::LaguerreSmoother,
        ClosedForm::LaguerreDifferentiator,
        ClosedForm::SymmetricSmoother,
        ClosedForm::SymmetricDifferentiator,
        ClosedForm::AssociatedSmoother,
        ClosedForm::AssociatedDifferentiator,
    ];

    /// Looks up the tabulated design for `B = 2` and the given shape,
    /// derivative order and causality.
    pub fn lookup(kappa: u32, derivative: usize, causal: bool) -> Option<Self> {
        use ClosedForm::*;
        match (causal, kappa, derivative) {
            (true, 0, 0) => Some(LaguerreSmoother),
            (true, 0, 1) => Some(LaguerreDifferentiator),
            (true, 1, 0) => Some(AssociatedSmoother),
            (true, 1, 1) => Some(AssociatedDifferentiator),
            (false, 0, 0) => Some(SymmetricSmoother),
            (false, 0, 1) => Some(SymmetricDifferentiator),
            _ => None,
        }
    }

    pub fn is_causal(self) -> bool {
        !matches!(
            self,
            ClosedForm::SymmetricSmoother | ClosedForm::SymmetricDifferentiator
        )
    }

    pub fn derivative(self) -> usize {
        match self {
            ClosedForm::LaguerreSmoother
            | ClosedForm::SymmetricSmoother
            | ClosedForm::AssociatedSmoother => 0,
            _ => 1,
        }
    }

    pub fn kappa(self) -> u32 {
        match self {
            ClosedForm::AssociatedSmoother | ClosedForm::AssociatedDifferentiator => 1,
            _ => 0,
        }
    }
}

impl fmt::Display for ClosedForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            ClosedForm::LaguerreSmoother => "causal kappa=0 smoother",
            ClosedForm::LaguerreDifferentiator => "causal kappa=0 differentiator",
            ClosedForm::SymmetricSmoother => "non-causal smoother",
            ClosedForm::SymmetricDifferentiator => "non-causal differentiator",
            ClosedForm::AssociatedSmoother => "causal kappa=1 smoother",
            ClosedForm::AssociatedDifferentiator => "causal kappa=1 differentiator",
        };
        f.write_str(name)
    }
}

/// Evaluates the closed-form coefficient polynomials in `p` and `q`.
///
/// `q` is ignored by the two-sided designs.
pub fn table_coefficients(
    form: ClosedForm,
    p: f64,
    q: f64,
    sample_period: f64,
) -> Result<FilterCoefficients> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::invalid(format!("pole must lie in (0, 1), got {p}")));
    }
    let t = sample_period;
    let (p2, q2) = (p * p, q * q);
    let causal = |b: Vec<f64>, order: usize| -> Result<FilterCoefficients> {
        Ok(FilterCoefficients::Causal(LdeCoefficients::new(
            b,
            poly::repeated_pole(p, order),
            t,
        )?))
    };
    match form {
        ClosedForm::LaguerreSmoother => {
            let c = 0.5 * (1.0 - p);
            causal(
                vec![
                    c * (q2 * p2 + 3.0 * q * p2 + 2.0 * p2 - 2.0 * q2 * p + 2.0 * p + q2 - 3.0 * q
                        + 2.0),
                    -c * (2.0 * q2 * p2 + 8.0 * q * p2 + 6.0 * p2 - 4.0 * q2 * p - 4.0 * q * p
                        + 6.0 * p
                        + 2.0 * q2
                        - 4.0 * q),
                    c * (q2 * p2 + 5.0 * q * p2 + 6.0 * p2 - 2.0 * q2 * p - 4.0 * q * p + q2 - q),
                    0.0,
                ],
                3,
            )
        }
        ClosedForm::LaguerreDifferentiator => {
            let c = (1.0 - p).powi(2) / (2.0 * t);
            causal(
                vec![
                    c * (2.0 * q * p + 3.0 * p - 2.0 * q + 3.0),
                    -4.0 * c * (q * p + 2.0 * p - q + 1.0),
                    c * (2.0 * q * p + 5.0 * p - 2.0 * q + 1.0),
                    0.0,
                ],
                3,
            )
        }
        ClosedForm::AssociatedSmoother => {
            let c = (1.0 - p).powi(2) / 6.0;
            causal(
                vec![
                    0.0,
                    c * (3.0 * q2 * p2 + 9.0 * q * p2 + 6.0 * p2 - 6.0 * q2 * p
                        + 6.0 * q * p
                        + 12.0 * p
                        + 3.0 * q2
                        - 15.0 * q
                        + 18.0),
                    -2.0 * c
                        * (q * p + 3.0 * p - q + 3.0)
                        * (3.0 * q * p + 3.0 * p - 3.0 * q + 3.0),
                    c * (3.0 * q2 * p2 + 15.0 * q * p2 + 18.0 * p2 - 6.0 * q2 * p - 6.0 * q * p
                        + 12.0 * p
                        + 3.0 * q2
                        - 9.0 * q
                        + 6.0),
                    0.0,
                ],
                4,
            )
        }
        ClosedForm::AssociatedDifferentiator => {
            let c = (1.0 - p).powi(3) / (2.0 * t);
            causal(
                vec![
                    0.0,
                    c * (2.0 * q * p + 3.0 * p - 2.0 * q + 5.0),
                    -4.0 * c * (q * p + 2.0 * p - q + 2.0),
                    c * (2.0 * q * p + 5.0 * p - 2.0 * q + 3.0),
                    0.0,
                ],
                4,
            )
        }
        ClosedForm::SymmetricSmoother => {
            let c = 1.0 / (2.0 * (p2 + 8.0 * p + 1.0));
            let edge = (p2 + 10.0 * p + 1.0) * (1.0 - p) / (1.0 + p);
            let b = vec![
                c * edge,
                3.0 * c * p * (p2 - 1.0),
                3.0 * c * p2 * (p2 - 1.0),
                c * p.powi(3) * edge,
            ];
            let a = poly::repeated_pole(p, 3);
            Ok(FilterCoefficients::NonCausal(NonCausalPair {
                forward: LdeCoefficients::new(b.clone(), a.clone(), t)?,
                backward: LdeCoefficients::new(b, a, t)?,
            }))
        }
        ClosedForm::SymmetricDifferentiator => {
            let b1 = (p - 1.0).powi(3) / (2.0 * t * (p + 1.0));
            let a = vec![1.0, -2.0 * p, p2, 0.0];
            Ok(FilterCoefficients::NonCausal(NonCausalPair {
                forward: LdeCoefficients::new(vec![0.0, b1, 0.0, 0.0], a.clone(), t)?,
                backward: LdeCoefficients::new(vec![0.0, -b1, 0.0, 0.0], a, t)?,
            }))
        }
    }
}

/// Delay `q` that places a numerator zero at `z = -1` (infinite loss at
/// Nyquist); this also minimizes the white-noise gain of the smoothers.
pub fn optimal_q(form: ClosedForm, p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::invalid(format!("pole must lie in (0, 1), got {p}")));
    }
    match form {
        ClosedForm::LaguerreSmoother => {
            Ok((4.0 * p - (2.0 * (p * p + 4.0 * p + 1.0)).sqrt() + 2.0) / (2.0 * (1.0 - p)))
        }
        ClosedForm::LaguerreDifferentiator => Ok((1.0 + 2.0 * p) / (1.0 - p)),
        ClosedForm::AssociatedSmoother => {
            Ok((4.0 * p - (2.0 * (p * p + 6.0 * p + 1.0)).sqrt() + 4.0) / (2.0 * (1.0 - p)))
        }
        ClosedForm::AssociatedDifferentiator => Ok(2.0 * (1.0 + p) / (1.0 - p)),
        ClosedForm::SymmetricSmoother | ClosedForm::SymmetricDifferentiator => {
            Err(Error::NoOptimalDelay(form.to_string()))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design::lde::padded_diff;

    fn alternating_sum(b: &[f64]) -> f64 {
        b.iter()
            .enumerate()
            .map(|(m, v)| if m % 2 == 0 { *v } else { -*v })
            .sum()
    }

    #[test]
    fn smoother_at_half() {
        let lde = table_coefficients(ClosedForm::LaguerreSmoother, 0.5, 0.0, 1.0)
            .unwrap()
            .causal()
            .unwrap();
        assert!(padded_diff(lde.b(), &[0.875, -1.125, 0.375, 0.0]) < 1e-15);
    }

    #[test]
    fn symmetric_smoother_at_half() {
        let pair = table_coefficients(ClosedForm::SymmetricSmoother, 0.5, 7.0, 1.0)
            .unwrap()
            .noncausal()
            .unwrap();
        let expected = [0.198413, -0.107143, -0.053571, 0.024802];
        assert!(padded_diff(pair.forward.b(), &expected) < 1e-6);
        assert_eq!(pair.forward.a(), &[1.0, -1.5, 0.75, -0.125]);
        assert!((pair.forward.dc_gain() - 0.5).abs() < 1e-12);
        assert!((pair.forward.dc_gain() + pair.backward.dc_gain() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn symmetric_differentiator_at_half() {
        let pair = table_coefficients(ClosedForm::SymmetricDifferentiator, 0.5, 0.0, 1.0)
            .unwrap()
            .noncausal()
            .unwrap();
        assert!(padded_diff(pair.forward.b(), &[0.0, -1.0 / 24.0, 0.0, 0.0]) < 1e-15);
        assert!(padded_diff(pair.backward.b(), &[0.0, 1.0 / 24.0, 0.0, 0.0]) < 1e-15);
        assert_eq!(pair.forward.a(), &[1.0, -1.0, 0.25, 0.0]);
    }

    #[test]
    fn optimal_q_values() {
        let p = (-0.5f64).exp();
        assert!((optimal_q(ClosedForm::LaguerreSmoother, p).unwrap() - 2.12).abs() < 0.01);
        assert!((optimal_q(ClosedForm::AssociatedSmoother, p).unwrap() - 4.14).abs() < 0.01);
        assert_eq!(
            optimal_q(ClosedForm::LaguerreDifferentiator, 0.5).unwrap(),
            4.0
        );
        assert_eq!(
            optimal_q(ClosedForm::AssociatedDifferentiator, 0.5).unwrap(),
            6.0
        );
        assert!(matches!(
            optimal_q(ClosedForm::SymmetricSmoother, 0.5),
            Err(Error::NoOptimalDelay(_))
        ));
    }

    #[test]
    fn optimal_q_zeroes_nyquist() {
        for &p in &[0.1, 0.3, 0.5, (-0.5f64).exp(), 0.9] {
            for form in [
                ClosedForm::LaguerreSmoother,
                ClosedForm::LaguerreDifferentiator,
                ClosedForm::AssociatedSmoother,
                ClosedForm::AssociatedDifferentiator,
            ] {
                let q = optimal_q(form, p).unwrap();
                let lde = table_coefficients(form, p, q, 1.0)
                    .unwrap()
                    .causal()
                    .unwrap();
                assert!(alternating_sum(lde.b()).abs() < 1e-12, "{form} p={p}");
            }
        }
    }

    #[test]
    fn lookup_round_trip() {
        for form in ClosedForm::ALL {
            assert_eq!(
                ClosedForm::lookup(form.kappa(), form.derivative(), form.is_causal()),
                Some(form)
            );
        }
        assert_eq!(ClosedForm::lookup(2, 0, true), None);
    }
}
