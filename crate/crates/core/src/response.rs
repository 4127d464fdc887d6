//! Frequency-domain analysis: response, unwrapped phase, group delay,
//! low-frequency flatness, Nyquist attenuation, poles and white-noise gain.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::design::{FilterCoefficients, LdeCoefficients, NonCausalPair};
use crate::poly;
use crate::runtime::FilterState;
use crate::{Error, Result};

/// Floor for log-magnitude output.
pub const MAGNITUDE_FLOOR_DB: f64 = -300.0;

/// Below this magnitude the phase (and so the group delay) is undefined.
const NULL_MAGNITUDE: f64 = 1e-12;

/// Offset used for the one-sided group-delay limit at `w = 0` when the
/// response vanishes there.
const ONE_SIDED_OFFSET: f64 = 1e-4;

/// `P(w) = sum_m c_m e^{-jwm}`.
fn poly_at(coeffs: &[f64], omega: f64) -> Complex64 {
    coeffs
        .iter()
        .enumerate()
        .map(|(m, &c)| c * Complex64::from_polar(1.0, -omega * m as f64))
        .sum()
}

/// `dP/dw = sum_m (-jm) c_m e^{-jwm}`.
fn poly_derivative_at(coeffs: &[f64], omega: f64) -> Complex64 {
    coeffs
        .iter()
        .enumerate()
        .map(|(m, &c)| {
            Complex64::new(0.0, -(m as f64)) * c * Complex64::from_polar(1.0, -omega * m as f64)
        })
        .sum()
}

/// A filter whose response can be evaluated on the unit circle.
pub trait FrequencyResponse {
    /// `H(w)`, `z = e^{jw}`.
    fn response(&self, omega: f64) -> Complex64;

    /// `dH/dw`.
    fn response_derivative(&self, omega: f64) -> Complex64;

    /// `-d arg H / dw`, or `None` where `|H|` vanishes.
    fn group_delay(&self, omega: f64) -> Option<f64> {
        let h = self.response(omega);
        if h.norm() < NULL_MAGNITUDE {
            return None;
        }
        Some(-(self.response_derivative(omega) / h).im)
    }
}

impl FrequencyResponse for LdeCoefficients {
    fn response(&self, omega: f64) -> Complex64 {
        poly_at(self.b(), omega) / poly_at(self.a(), omega)
    }

    fn response_derivative(&self, omega: f64) -> Complex64 {
        let (b, a) = (poly_at(self.b(), omega), poly_at(self.a(), omega));
        let (db, da) = (
            poly_derivative_at(self.b(), omega),
            poly_derivative_at(self.a(), omega),
        );
        (db * a - b * da) / (a * a)
    }

    /// `Im[A'/A - B'/B]`.
    fn group_delay(&self, omega: f64) -> Option<f64> {
        let b = poly_at(self.b(), omega);
        if b.norm() < NULL_MAGNITUDE {
            return None;
        }
        let a = poly_at(self.a(), omega);
        let db = poly_derivative_at(self.b(), omega);
        let da = poly_derivative_at(self.a(), omega);
        Some((da / a - db / b).im)
    }
}

impl FrequencyResponse for NonCausalPair {
    fn response(&self, omega: f64) -> Complex64 {
        self.forward.response(omega) + self.backward.response(-omega)
    }

    fn response_derivative(&self, omega: f64) -> Complex64 {
        self.forward.response_derivative(omega) - self.backward.response_derivative(-omega)
    }
}

impl FrequencyResponse for FilterCoefficients {
    fn response(&self, omega: f64) -> Complex64 {
        match self {
            FilterCoefficients::Causal(lde) => lde.response(omega),
            FilterCoefficients::NonCausal(pair) => pair.response(omega),
        }
    }

    fn response_derivative(&self, omega: f64) -> Complex64 {
        match self {
            FilterCoefficients::Causal(lde) => lde.response_derivative(omega),
            FilterCoefficients::NonCausal(pair) => pair.response_derivative(omega),
        }
    }

    fn group_delay(&self, omega: f64) -> Option<f64> {
        match self {
            FilterCoefficients::Causal(lde) => lde.group_delay(omega),
            FilterCoefficients::NonCausal(pair) => pair.group_delay(omega),
        }
    }
}

/// Group delay by a central difference of the unwrapped phase.
pub fn group_delay_finite_difference<F: FrequencyResponse + ?Sized>(
    filter: &F,
    omega: f64,
    step: f64,
) -> f64 {
    let lo = filter.response(omega - step).arg();
    let hi = filter.response(omega + step).arg();
    let mut d = hi - lo;
    d -= 2.0 * PI * (d / (2.0 * PI)).round();
    -d / (2.0 * step)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResponseSample {
    /// Radians per sample.
    pub omega: f64,
    pub value: Complex64,
    /// `20 log10 |H|`, floored at [`MAGNITUDE_FLOOR_DB`].
    pub magnitude_db: f64,
    /// Unwrapped phase in radians.
    pub phase: f64,
    /// Samples; `None` where the response vanishes.
    pub group_delay: Option<f64>,
}

pub fn magnitude_db(value: Complex64) -> f64 {
    let mag = value.norm();
    if mag == 0.0 {
        MAGNITUDE_FLOOR_DB
    } else {
        (20.0 * mag.log10()).max(MAGNITUDE_FLOOR_DB)
    }
}

/// `points` evenly spaced frequencies covering `[0, pi]` inclusive.
pub fn uniform_grid(points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![0.0],
        n => (0..n).map(|i| PI * i as f64 / (n - 1) as f64).collect(),
    }
}

/// Evaluates `filter` on `grid`, unwrapping the phase by nearest-branch
/// continuation in grid order.
pub fn evaluate_response<F>(filter: &F, grid: &[f64]) -> Result<Vec<ResponseSample>>
where
    F: FrequencyResponse + Sync + ?Sized,
{
    if let Some(w) = grid.iter().find(|w| !(0.0..=PI).contains(*w)) {
        return Err(Error::invalid(format!("frequency {w} outside [0, pi]")));
    }
    let raw: Vec<(Complex64, Option<f64>)> = grid
        .par_iter()
        .map(|&omega| {
            let value = filter.response(omega);
            let delay = match filter.group_delay(omega) {
                None if omega == 0.0 => filter.group_delay(ONE_SIDED_OFFSET),
                d => d,
            };
            (value, delay)
        })
        .collect();

    let mut samples = Vec::with_capacity(grid.len());
    let mut previous: Option<f64> = None;
    for (&omega, (value, group_delay)) in grid.iter().zip(raw) {
        let wrapped = value.arg();
        let phase = match previous {
            None => wrapped,
            Some(prev) => wrapped - 2.0 * PI * ((wrapped - prev) / (2.0 * PI)).round(),
        };
        previous = Some(phase);
        samples.push(ResponseSample {
            omega,
            value,
            magnitude_db: magnitude_db(value),
            phase,
            group_delay,
        });
    }
    Ok(samples)
}

/// `%.{digits}g`-style formatting.
pub fn format_significant(x: f64, digits: usize) -> String {
    if x.is_nan() {
        return "NaN".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let digits = digits.max(1);
    let sci = format!("{:.*e}", digits - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("exponent");
    if exp < -5 || exp >= digits as i32 {
        let mantissa = trim_fraction(mantissa);
        format!(
            "{mantissa}e{}{:02}",
            if exp < 0 { '-' } else { '+' },
            exp.abs()
        )
    } else {
        let decimals = (digits as i32 - 1 - exp).max(0) as usize;
        trim_fraction(&format!("{:.*}", decimals, x)).to_string()
    }
}

fn trim_fraction(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// CSV with header `omega,magnitude_db,phase_rad,group_delay`, nine
/// significant digits per value.
pub fn response_csv(samples: &[ResponseSample]) -> String {
    let mut out = String::from("omega,magnitude_db,phase_rad,group_delay\n");
    for s in samples {
        let gd = s.group_delay.unwrap_or(f64::NAN);
        out.push_str(&format!(
            "{},{},{},{}\n",
            format_significant(s.omega, 9),
            format_significant(s.magnitude_db, 9),
            format_significant(s.phase, 9),
            format_significant(gd, 9)
        ));
    }
    out
}

/// Relative magnitude below which a derivative of `|H|^2` counts as zero.
pub const FLATNESS_THRESHOLD: f64 = 1e-4;
pub const MAX_FLATNESS_ORDER: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlatnessEntry {
    pub order: usize,
    /// Estimated `d^k |H|^2 / dw^k` at `w = 0`.
    pub derivative: f64,
    /// `|derivative| / |H(0)|^2`, or the absolute value when `H(0) = 0`.
    pub relative: f64,
    pub flat: bool,
}

fn central_difference<G: Fn(f64) -> f64>(f: &G, order: usize, h: f64) -> f64 {
    let half = order as f64 / 2.0;
    let sum: f64 = (0..=order)
        .map(|i| {
            let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
            sign * poly::binomial(order, i) * f((half - i as f64) * h)
        })
        .sum();
    sum / h.powi(order as i32)
}

/// Step used for order `k`: `1e-3`, raised for high orders where rounding
/// error grows like `eps / h^k`.
fn flatness_step(order: usize) -> f64 {
    1e-3_f64.max(10f64.powf(-16.0 / (order as f64 + 2.0)))
}

/// Derivatives of `|H(w)|^2` at `w = 0` for orders `1..=max_order`, by
/// Richardson-extrapolated central differences.
pub fn flatness_report<F: FrequencyResponse + ?Sized>(
    filter: &F,
    max_order: usize,
) -> Result<Vec<FlatnessEntry>> {
    if max_order > MAX_FLATNESS_ORDER {
        return Err(Error::invalid(format!(
            "flatness order {max_order} exceeds {MAX_FLATNESS_ORDER}"
        )));
    }
    let power = |w: f64| filter.response(w).norm_sqr();
    let reference = power(0.0);
    let reference = if reference > NULL_MAGNITUDE {
        reference
    } else {
        1.0
    };
    Ok((1..=max_order)
        .map(|order| {
            let h = flatness_step(order);
            let coarse = central_difference(&power, order, h);
            let fine = central_difference(&power, order, h / 2.0);
            let derivative = (4.0 * fine - coarse) / 3.0;
            let relative = derivative.abs() / reference;
            FlatnessEntry {
                order,
                derivative,
                relative,
                flat: relative < FLATNESS_THRESHOLD,
            }
        })
        .collect())
}

/// `|H(e^{j pi})|`.
pub fn nyquist_gain(lde: &LdeCoefficients) -> f64 {
    alternating_sum(lde.b()).abs() / alternating_sum(lde.a()).abs()
}

/// Whether the numerator has a root at `z = -1`.
pub fn zero_at_minus_one(lde: &LdeCoefficients) -> bool {
    let scale: f64 = lde.b().iter().map(|v| v.abs()).sum();
    alternating_sum(lde.b()).abs() < 1e-10 * scale
}

fn alternating_sum(c: &[f64]) -> f64 {
    c.iter()
        .enumerate()
        .map(|(m, &v)| if m % 2 == 0 { v } else { -v })
        .sum()
}

/// Roots in `z` of `sum c_m z^-m`, from the companion matrix.
pub fn polynomial_roots(coeffs: &[f64]) -> Vec<Complex64> {
    let mut c = coeffs.to_vec();
    while c.len() > 1 && c[c.len() - 1] == 0.0 {
        c.pop();
    }
    let degree = c.len() - 1;
    if degree == 0 || c[0] == 0.0 {
        return Vec::new();
    }
    let mut companion = DMatrix::<f64>::zeros(degree, degree);
    for j in 0..degree {
        companion[(0, j)] = -c[j + 1] / c[0];
    }
    for i in 1..degree {
        companion[(i, i - 1)] = 1.0;
    }
    companion.complex_eigenvalues().iter().copied().collect()
}

/// Number of times `(1 - root z^-1)` divides `coeffs` with a remainder
/// below `tol`.
pub fn root_multiplicity(coeffs: &[f64], root: f64, tol: f64) -> usize {
    let mut c = coeffs.to_vec();
    while c.len() > 1 && c[c.len() - 1] == 0.0 {
        c.pop();
    }
    let mut count = 0;
    while c.len() > 1 {
        let (quotient, remainder) = poly::deflate(&c, root);
        if remainder.abs() > tol {
            break;
        }
        count += 1;
        c = quotient;
    }
    count
}

pub fn is_stable(lde: &LdeCoefficients) -> bool {
    polynomial_roots(lde.a()).iter().all(|r| r.norm() < 1.0)
}

/// Output variance for unit-variance white input, `sum h[m]^2`.
///
/// The impulse response is generated by running the filter; summation stops
/// once a geometric bound on the remaining tail falls below
/// `tolerance * partial_sum`.
pub fn white_noise_gain(lde: &LdeCoefficients, tolerance: f64) -> Result<f64> {
    let radius = polynomial_roots(lde.a())
        .iter()
        .map(|r| r.norm())
        .fold(0.0, f64::max);
    if radius >= 1.0 {
        return Err(Error::invalid("white-noise gain requires a stable filter"));
    }
    let order = lde.a().len().max(lde.b().len());
    let window = order + 1;
    let mut state = FilterState::new(lde.clone());
    let mut recent = std::collections::VecDeque::with_capacity(window);
    let mut sum = 0.0;
    const MAX_TERMS: usize = 10_000_000;
    for m in 0..MAX_TERMS {
        let y = state.step(if m == 0 { 1.0 } else { 0.0 });
        sum += y * y;
        if recent.len() == window {
            recent.pop_front();
        }
        recent.push_back(y.abs());
        if m < 2 * window {
            continue;
        }
        let envelope = recent.iter().copied().fold(0.0, f64::max);
        if envelope == 0.0 && sum == 0.0 {
            return Ok(0.0);
        }
        let rho = radius * (1.0 + 1.0 / m as f64).powi(order as i32);
        if rho < 1.0 {
            let tail = window as f64 * envelope * envelope * rho * rho / (1.0 - rho * rho);
            if tail <= tolerance * sum {
                return Ok(sum);
            }
        }
    }
    Ok(sum)
}
