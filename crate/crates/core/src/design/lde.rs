use serde::{Deserialize, Serialize};

use super::basis::{orthonormal_basis, BasisSet};
use super::dd::Dd;
use super::weight::{Causality, WeightSpec};
use crate::poly;
use crate::{Error, Result};

/// Number of extra convolution terms that must vanish for a derived
/// numerator to be accepted.
const RATIONALITY_TERMS: usize = 5;
const RATIONALITY_TOL: f64 = 1e-9;

/// Full parameter bundle of a smoother (`derivative = 0`) or differentiator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilterDesign {
    /// Degree `B` of the local polynomial model.
    pub degree: usize,
    /// Derivative order `D` being estimated.
    pub derivative: usize,
    pub weight: WeightSpec,
    /// Synthesis delay `q` in samples; may be fractional or negative.
    pub delay: f64,
    /// Sample period `T` (seconds, frames or pixels per sample).
    pub sample_period: f64,
}

impl FilterDesign {
    pub fn new(
        degree: usize,
        derivative: usize,
        weight: WeightSpec,
        delay: f64,
        sample_period: f64,
    ) -> Result<Self> {
        let design = FilterDesign {
            degree,
            derivative,
            weight,
            delay,
            sample_period,
        };
        design.validate()?;
        Ok(design)
    }

    /// Causal design from the pole `p` with unit sample period.
    pub fn causal(
        degree: usize,
        derivative: usize,
        kappa: u32,
        pole: f64,
        delay: f64,
    ) -> Result<Self> {
        Self::new(
            degree,
            derivative,
            WeightSpec::from_pole(pole, kappa, Causality::Causal)?,
            delay,
            1.0,
        )
    }

    /// Two-sided design (`kappa = 0`, `q = 0`) from the pole `p` with unit
    /// sample period.
    pub fn two_sided(degree: usize, derivative: usize, pole: f64) -> Result<Self> {
        Self::new(
            degree,
            derivative,
            WeightSpec::from_pole(pole, 0, Causality::TwoSided)?,
            0.0,
            1.0,
        )
    }

    pub fn with_sample_period(mut self, sample_period: f64) -> Result<Self> {
        self.sample_period = sample_period;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.derivative > self.degree {
            return Err(Error::invalid(format!(
                "derivative order {} exceeds model degree {}",
                self.derivative, self.degree
            )));
        }
        if !self.delay.is_finite() {
            return Err(Error::invalid("delay q must be finite"));
        }
        if !(self.sample_period.is_finite() && self.sample_period > 0.0) {
            return Err(Error::invalid("sample period T must be positive"));
        }
        if self.weight.causality() == Causality::TwoSided && self.delay != 0.0 {
            return Err(Error::invalid("two-sided designs require q = 0"));
        }
        Ok(())
    }

    pub fn pole(&self) -> f64 {
        self.weight.pole()
    }

    /// Pole multiplicity `B + kappa + 1` of the causal realization.
    pub fn order(&self) -> usize {
        self.degree + self.weight.kappa() as usize + 1
    }
}

/// Numerator `b` and denominator `a` (with `a[0] = 1`) of
/// `H(z) = sum b_m z^-m / sum a_m z^-m`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LdeCoefficients {
    b: Vec<f64>,
    a: Vec<f64>,
    #[serde(rename = "T")]
    sample_period: f64,
}

impl LdeCoefficients {
    /// Normalizes so that `a[0] = 1`.
    pub fn new(b: Vec<f64>, a: Vec<f64>, sample_period: f64) -> Result<Self> {
        if b.is_empty() || a.is_empty() {
            return Err(Error::invalid("coefficient vectors must be non-empty"));
        }
        if b.iter().chain(&a).any(|v| !v.is_finite()) {
            return Err(Error::invalid("coefficients must be finite"));
        }
        let a0 = a[0];
        if a0 == 0.0 {
            return Err(Error::invalid("leading denominator coefficient is zero"));
        }
        if !(sample_period.is_finite() && sample_period > 0.0) {
            return Err(Error::invalid("sample period T must be positive"));
        }
        let (b, a) = if a0 == 1.0 {
            (b, a)
        } else {
            (
                b.into_iter().map(|v| v / a0).collect(),
                a.into_iter().map(|v| v / a0).collect(),
            )
        };
        Ok(LdeCoefficients {
            b,
            a,
            sample_period,
        })
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }

    pub fn a(&self) -> &[f64] {
        &self.a
    }

    pub fn sample_period(&self) -> f64 {
        self.sample_period
    }

    /// `H(1) = sum b / sum a`.
    pub fn dc_gain(&self) -> f64 {
        self.b.iter().sum::<f64>() / self.a.iter().sum::<f64>()
    }

    /// Largest absolute difference to `other`, treating missing trailing
    /// coefficients as zero.
    pub fn max_abs_diff(&self, other: &LdeCoefficients) -> f64 {
        padded_diff(&self.b, &other.b).max(padded_diff(&self.a, &other.a))
    }

    pub(crate) fn b_mut(&mut self) -> &mut Vec<f64> {
        &mut self.b
    }
}

pub(crate) fn padded_diff(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len().max(y.len());
    (0..n)
        .map(|i| (x.get(i).copied().unwrap_or(0.0) - y.get(i).copied().unwrap_or(0.0)).abs())
        .fold(0.0, f64::max)
}

/// A non-causal filter realized as the sum of a forward pass and a backward
/// pass.
///
/// The output is `forward(x)` (run with increasing `n`) plus the result of
/// running `backward` over the reversed signal and reversing its output. The
/// combined frequency response is `H_fwd(w) + H_bwd(-w)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NonCausalPair {
    pub forward: LdeCoefficients,
    pub backward: LdeCoefficients,
}

/// Either realization of a designed filter.
#[derive(Debug, Clone, PartialEq)]
pub enum FilterCoefficients {
    Causal(LdeCoefficients),
    NonCausal(NonCausalPair),
}

impl FilterCoefficients {
    pub fn causal(self) -> Option<LdeCoefficients> {
        match self {
            FilterCoefficients::Causal(lde) => Some(lde),
            FilterCoefficients::NonCausal(_) => None,
        }
    }

    pub fn noncausal(self) -> Option<NonCausalPair> {
        match self {
            FilterCoefficients::NonCausal(pair) => Some(pair),
            FilterCoefficients::Causal(_) => None,
        }
    }

    pub fn sample_period(&self) -> f64 {
        match self {
            FilterCoefficients::Causal(lde) => lde.sample_period(),
            FilterCoefficients::NonCausal(pair) => pair.forward.sample_period(),
        }
    }

    /// Largest absolute coefficient difference; `None` when the realizations
    /// differ in kind.
    pub fn max_abs_diff(&self, other: &FilterCoefficients) -> Option<f64> {
        match (self, other) {
            (FilterCoefficients::Causal(x), FilterCoefficients::Causal(y)) => {
                Some(x.max_abs_diff(y))
            }
            (FilterCoefficients::NonCausal(x), FilterCoefficients::NonCausal(y)) => Some(
                x.forward
                    .max_abs_diff(&y.forward)
                    .max(x.backward.max_abs_diff(&y.backward)),
            ),
            _ => None,
        }
    }
}

impl From<LdeCoefficients> for FilterCoefficients {
    fn from(lde: LdeCoefficients) -> Self {
        FilterCoefficients::Causal(lde)
    }
}

impl From<NonCausalPair> for FilterCoefficients {
    fn from(pair: NonCausalPair) -> Self {
        FilterCoefficients::NonCausal(pair)
    }
}

/// `c_k = (-1/T)^D * d^D psi_k / dm^D` at `m = q`.
pub fn synthesis_weights(
    basis: &BasisSet,
    derivative: usize,
    delay: f64,
    sample_period: f64,
) -> Result<Vec<f64>> {
    if derivative > basis.degree() {
        return Err(Error::invalid(format!(
            "derivative order {derivative} exceeds basis degree {}",
            basis.degree()
        )));
    }
    let factor = (-1.0 / sample_period).powi(derivative as i32);
    Ok((0..=basis.degree())
        .map(|k| factor * basis.eval_derivative(k, derivative, delay))
        .collect())
}

/// `h[m] = sum_k c_k psi_k(m) w(m)` for `m = 0..length`, the impulse response
/// of the combined causal filter.
pub fn impulse_response_prefix(
    design: &FilterDesign,
    basis: &BasisSet,
    length: usize,
) -> Result<Vec<f64>> {
    if basis.weight() != &design.weight || basis.degree() != design.degree {
        return Err(Error::invalid("basis was not built from this design"));
    }
    design.validate()?;
    let kernel = basis.kernel_dd(design.derivative, design.delay, design.sample_period);
    let (pole, kappa) = (design.pole(), design.weight.kappa());
    Ok((0..length)
        .map(|m| weighted_dd(&kernel, m as i64, kappa, pole).to_f64())
        .collect())
}

/// Numerator of `sum_m h[m] z^-m` over the denominator
/// `(1 - pole z^-1)^(numerator_len - 1)`: `b = a * h` truncated to
/// `numerator_len` terms, after confirming that the next few convolution
/// terms vanish.
///
/// Runs in double-double: at high pole multiplicity the recursion amplifies
/// numerator errors by several orders of magnitude in the tail of the
/// impulse response, so `b` should be correctly rounded.
fn rational_numerator(h: &[Dd], pole: f64, numerator_len: usize) -> Result<Vec<f64>> {
    let order = numerator_len - 1;
    let p = Dd::from(pole);
    let a: Vec<Dd> = (0..=order)
        .map(|j| Dd::from(poly::binomial(order, j)) * (-p).powi(j as u32))
        .collect();
    let conv =
        |m: usize| -> Dd { (0..=m.min(order)).fold(Dd::ZERO, |acc, j| acc + a[j] * h[m - j]) };
    let scale = h.iter().fold(1.0_f64, |acc, v| acc.max(v.to_f64().abs()));
    for m in numerator_len..numerator_len + RATIONALITY_TERMS {
        let residual = conv(m).to_f64();
        if residual.abs() > RATIONALITY_TOL * scale {
            return Err(Error::NotRational { index: m, residual });
        }
    }
    Ok((0..numerator_len).map(|m| conv(m).to_f64()).collect())
}

/// `poly(m) * |m|^kappa * pole^|m|` in double-double.
fn weighted_dd(coeffs: &[Dd], m: i64, kappa: u32, pole: f64) -> Dd {
    let x = Dd::from(m as f64);
    let value = coeffs.iter().rev().fold(Dd::ZERO, |acc, &c| acc * x + c);
    let n = Dd::from(m.unsigned_abs() as f64);
    value * n.powi(kappa) * Dd::from(pole).powi(m.unsigned_abs() as u32)
}

/// Derives the recursive realization of a causal design.
///
/// The denominator is `(1 - p z^-1)^(B + kappa + 1)`; the numerator is the
/// leading part of the denominator convolved with the exact impulse
/// response.
pub fn derive_causal_lde(design: &FilterDesign) -> Result<LdeCoefficients> {
    design.validate()?;
    if design.weight.causality() != Causality::Causal {
        return Err(Error::invalid("derive_causal_lde needs a causal weight"));
    }
    let basis = orthonormal_basis(design.degree, &design.weight)?;
    let kernel = basis.kernel_dd(design.derivative, design.delay, design.sample_period);
    let order = design.order();
    let (pole, kappa) = (design.pole(), design.weight.kappa());
    let h: Vec<Dd> = (0..order + 1 + RATIONALITY_TERMS)
        .map(|m| weighted_dd(&kernel, m as i64, kappa, pole))
        .collect();
    let b = rational_numerator(&h, pole, order + 1)?;
    LdeCoefficients::new(b, poly::repeated_pole(pole, order), design.sample_period)
}

/// Two-sided impulse response `h(m) = sum_k c_k psi_k(m) exp(sigma |m|)`
/// for `m = -span..=span`; index `span` holds `m = 0`.
pub fn two_sided_impulse_response(design: &FilterDesign, span: usize) -> Result<Vec<f64>> {
    let kernel = two_sided_kernel(design)?;
    let span = span as i64;
    let pole = design.pole();
    Ok((-span..=span)
        .map(|m| weighted_dd(&kernel, m, 0, pole).to_f64())
        .collect())
}

fn two_sided_kernel(design: &FilterDesign) -> Result<Vec<Dd>> {
    design.validate()?;
    if design.weight.causality() != Causality::TwoSided {
        return Err(Error::invalid("expected a two-sided weight"));
    }
    if design.weight.kappa() != 0 {
        return Err(Error::invalid("two-sided designs require kappa = 0"));
    }
    if design.delay != 0.0 {
        return Err(Error::invalid("two-sided designs require q = 0"));
    }
    let basis = orthonormal_basis(design.degree, &design.weight)?;
    Ok(basis.kernel_dd(design.derivative, 0.0, design.sample_period))
}

/// Splits a two-sided design into forward and backward recursive filters.
///
/// The forward filter realizes `h(m)` for `m >= 0` (including the centre
/// sample); the backward filter realizes `h(-j)` for `j >= 1` and has a zero
/// leading tap.
pub fn derive_noncausal_pair(design: &FilterDesign) -> Result<NonCausalPair> {
    let kernel = two_sided_kernel(design)?;
    let order = design.degree + 1;
    let len = order + 1 + RATIONALITY_TERMS;
    let pole = design.pole();
    let a = poly::repeated_pole(pole, order);
    let forward_h: Vec<Dd> = (0..len)
        .map(|m| weighted_dd(&kernel, m as i64, 0, pole))
        .collect();
    let backward_h: Vec<Dd> = (0..len)
        .map(|j| {
            if j == 0 {
                Dd::ZERO
            } else {
                weighted_dd(&kernel, -(j as i64), 0, pole)
            }
        })
        .collect();

    Ok(NonCausalPair {
        forward: LdeCoefficients::new(
            rational_numerator(&forward_h, pole, order + 1)?,
            a.clone(),
            design.sample_period,
        )?,
        backward: LdeCoefficients::new(
            rational_numerator(&backward_h, pole, order + 1)?,
            a,
            design.sample_period,
        )?,
    })
}

/// One analysis filter per basis function plus the synthesis weights that
/// recombine their outputs.
///
/// Filter `k` produces the running projection coefficient (the "Laguerre
/// spectrum" entry) `beta_k(n) = sum_m psi_k(m) w(m) y(n - m)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumFilterBank {
    pub per_k: Vec<LdeCoefficients>,
    pub synthesis: Vec<f64>,
}

pub fn spectrum_filter_bank(design: &FilterDesign) -> Result<SpectrumFilterBank> {
    design.validate()?;
    if design.weight.causality() != Causality::Causal {
        return Err(Error::invalid("spectrum filter banks are causal only"));
    }
    let basis = orthonormal_basis(design.degree, &design.weight)?;
    let synthesis = synthesis_weights(
        &basis,
        design.derivative,
        design.delay,
        design.sample_period,
    )?;
    let order = design.order();
    let (pole, kappa) = (design.pole(), design.weight.kappa());
    let a = poly::repeated_pole(pole, order);
    let len = order + 1 + RATIONALITY_TERMS;
    let per_k = (0..=design.degree)
        .map(|k| {
            let h: Vec<Dd> = (0..len)
                .map(|m| weighted_dd(basis.coefficients_dd(k), m as i64, kappa, pole))
                .collect();
            LdeCoefficients::new(
                rational_numerator(&h, pole, order + 1)?,
                a.clone(),
                design.sample_period,
            )
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SpectrumFilterBank { per_k, synthesis })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn assert_close(actual: &[f64], expected: &[f64], tol: f64) {
        assert!(
            padded_diff(actual, expected) <= tol,
            "{actual:?} != {expected:?}"
        );
    }

    #[test]
    fn synthesis_weight_special_cases() {
        let spec = WeightSpec::causal(-0.7, 0).unwrap();
        let basis = orthonormal_basis(2, &spec).unwrap();

        let c = synthesis_weights(&basis, 0, 0.0, 1.0).unwrap();
        for k in 0..3 {
            assert_eq!(c[k], basis.alpha()[k][0]);
        }

        let c = synthesis_weights(&basis, 1, 1.3, 1.0).unwrap();
        assert_eq!(c[0], 0.0);
        assert!((c[1] + basis.alpha()[1][1]).abs() < 1e-15);

        let c = synthesis_weights(&basis, 2, 0.4, 0.5).unwrap();
        assert!((c[2] - 4.0 * 2.0 * basis.alpha()[2][2]).abs() < 1e-12);

        assert!(synthesis_weights(&basis, 3, 0.0, 1.0).is_err());
    }

    #[test]
    fn exponential_smoother_impulse_response() {
        let design = FilterDesign::causal(0, 0, 0, 0.5, 0.0).unwrap();
        let basis = orthonormal_basis(0, &design.weight).unwrap();
        let h = impulse_response_prefix(&design, &basis, 5).unwrap();
        assert_close(&h, &[0.5, 0.25, 0.125, 0.0625, 0.03125], 1e-15);
    }

    #[test]
    fn shaped_impulse_response_starts_at_zero() {
        let design = FilterDesign::causal(2, 1, 1, 0.6, 3.0).unwrap();
        let basis = orthonormal_basis(2, &design.weight).unwrap();
        let h = impulse_response_prefix(&design, &basis, 6).unwrap();
        assert_eq!(h[0], 0.0);
    }

    #[test]
    fn smoother_b2_at_half() {
        let lde = derive_causal_lde(&FilterDesign::causal(2, 0, 0, 0.5, 0.0).unwrap()).unwrap();
        assert_close(lde.b(), &[0.875, -1.125, 0.375, 0.0], 1e-13);
        assert_close(lde.a(), &[1.0, -1.5, 0.75, -0.125], 0.0);

        // long division of b / a reproduces the impulse response
        let basis = orthonormal_basis(
            2,
            &WeightSpec::from_pole(0.5, 0, Causality::Causal).unwrap(),
        )
        .unwrap();
        let design = FilterDesign::causal(2, 0, 0, 0.5, 0.0).unwrap();
        let h = impulse_response_prefix(&design, &basis, 4).unwrap();
        let b = [0.875, -1.125, 0.375, 0.0];
        let a = [1.0, -1.5, 0.75, -0.125];
        let mut div = [0.0; 4];
        for n in 0..4 {
            div[n] = b[n] - (1..=n).map(|j| a[j] * div[n - j]).sum::<f64>();
        }
        assert_close(&h, &div, 1e-13);
    }

    #[test]
    fn differentiator_examples() {
        let lde = derive_causal_lde(&FilterDesign::causal(2, 1, 0, 0.5, 4.0).unwrap()).unwrap();
        assert_close(lde.b(), &[0.0625, 0.0, -0.0625, 0.0], 1e-13);
        assert_close(lde.a(), &[1.0, -1.5, 0.75, -0.125], 0.0);

        let lde = derive_causal_lde(&FilterDesign::causal(2, 1, 1, 0.5, 6.0).unwrap()).unwrap();
        assert_close(lde.b(), &[0.0, 0.03125, 0.0, -0.03125, 0.0], 1e-13);
        assert_close(lde.a(), &[1.0, -2.0, 1.5, -0.5, 0.0625], 0.0);
    }

    #[test]
    fn exponential_smoother_lde() {
        for &p in &[0.2, 0.5, 0.3679] {
            let lde = derive_causal_lde(&FilterDesign::causal(0, 0, 0, p, 0.0).unwrap()).unwrap();
            assert_close(lde.b(), &[1.0 - p], 1e-14);
            assert_close(lde.a(), &[1.0, -p], 0.0);
        }
    }

    #[test]
    fn dc_gain_properties() {
        for &p in &[0.1, 0.5, 0.9] {
            for kappa in 0..2 {
                for &q in &[-1.0, 0.0, 2.5] {
                    let s = derive_causal_lde(&FilterDesign::causal(2, 0, kappa, p, q).unwrap())
                        .unwrap();
                    assert!((s.dc_gain() - 1.0).abs() < 1e-12);
                    let d = derive_causal_lde(&FilterDesign::causal(2, 1, kappa, p, q).unwrap())
                        .unwrap();
                    assert!(d.b().iter().sum::<f64>().abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn rejects_bad_designs() {
        assert!(FilterDesign::causal(1, 2, 0, 0.5, 0.0).is_err());
        let two = FilterDesign::two_sided(2, 0, 0.5).unwrap();
        assert!(derive_causal_lde(&two).is_err());
        let causal = FilterDesign::causal(2, 0, 0, 0.5, 0.0).unwrap();
        assert!(derive_noncausal_pair(&causal).is_err());
        let mut shifted = two;
        shifted.delay = 1.0;
        assert!(derive_noncausal_pair(&shifted).is_err());
        assert!(spectrum_filter_bank(&two).is_err());
    }

    #[test]
    fn rationality_check_catches_non_rational_response() {
        let h: Vec<Dd> = (0..10)
            .map(|m| Dd::from(0.5f64.powi(m) * (m as f64).powi(3)))
            .collect();
        assert!(matches!(
            rational_numerator(&h, 0.5, 2),
            Err(Error::NotRational { .. })
        ));
    }

    #[test]
    fn noncausal_exponential_smoother_is_symmetric() {
        let p = (-1.0f64 / 16.0).exp();
        let pair = derive_noncausal_pair(&FilterDesign::two_sided(0, 0, p).unwrap()).unwrap();
        let dc = pair.forward.dc_gain() + pair.backward.dc_gain();
        assert!((dc - 1.0).abs() < 1e-12);
        assert_eq!(pair.backward.b()[0], 0.0);
    }

    #[test]
    fn lde_new_normalizes() {
        let lde = LdeCoefficients::new(vec![1.0, 2.0], vec![2.0, -1.0], 1.0).unwrap();
        assert_eq!(lde.a(), &[1.0, -0.5]);
        assert_eq!(lde.b(), &[0.5, 1.0]);
        assert!(LdeCoefficients::new(vec![1.0], vec![0.0, 1.0], 1.0).is_err());
        assert!(LdeCoefficients::new(vec![1.0], vec![1.0], 0.0).is_err());
    }
}
