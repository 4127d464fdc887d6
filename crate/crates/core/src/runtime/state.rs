use serde::{Deserialize, Serialize};

use crate::design::{FilterCoefficients, LdeCoefficients, NonCausalPair};

/// Initial condition of a recursive pass.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Priming {
    /// All-zero delay line.
    Zero,
    /// Steady state for a signal that has always equalled its first sample.
    #[default]
    #[serde(alias = "hold")]
    HoldFirst,
}

/// Run-time form of an [`LdeCoefficients`].
///
/// A denominator that is a repeated real pole `(1 - p z^-1)^N` (every derived
/// and tabulated design) runs as an FIR numerator followed by `N` identical
/// one-pole sections, so the pole stays exactly `p`. In transposed direct
/// form II the rounded binomial coefficients split an `N`-fold pole into a
/// cluster of radius about `eps^(1/N)`, which shows up as errors near `1e-11`
/// in the impulse-response tail for `N = 7`, `p = 0.85`. Any other
/// denominator runs in transposed direct form II.
#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Realization {
    Direct {
        b: Vec<f64>,
        a: Vec<f64>,
    },
    RepeatedPole {
        b: Vec<f64>,
        pole: f64,
        order: usize,
    },
}

/// `(p, N)` when `a` equals `(1 - p z^-1)^N` to within rounding.
fn repeated_pole_of(a: &[f64]) -> Option<(f64, usize)> {
    let mut a = a;
    while a.len() > 1 && a[a.len() - 1] == 0.0 {
        a = &a[..a.len() - 1];
    }
    let order = a.len() - 1;
    if order == 0 || a[0] != 1.0 {
        return None;
    }
    let pole = -a[1] / order as f64;
    let expected = crate::poly::repeated_pole(pole, order);
    let close = a
        .iter()
        .zip(&expected)
        .all(|(x, e)| (x - e).abs() <= 64.0 * f64::EPSILON * e.abs());
    (pole != 0.0 && close).then_some((pole, order))
}

impl Realization {
    pub fn new(lde: &LdeCoefficients) -> Self {
        if let Some((pole, order)) = repeated_pole_of(lde.a()) {
            return Realization::RepeatedPole {
                b: lde.b().to_vec(),
                pole,
                order,
            };
        }
        let n = lde.b().len().max(lde.a().len());
        let mut b = lde.b().to_vec();
        let mut a = lde.a().to_vec();
        b.resize(n, 0.0);
        a.resize(n, 0.0);
        Realization::Direct { b, a }
    }

    pub fn state_len(&self) -> usize {
        match self {
            Realization::Direct { b, .. } => b.len() - 1,
            // past inputs, then one output per section
            Realization::RepeatedPole { b, order, .. } => b.len() - 1 + order,
        }
    }

    #[inline]
    pub fn step(&self, state: &mut [f64], x: f64) -> f64 {
        match self {
            Realization::Direct { b, a } => {
                let n = state.len();
                if n == 0 {
                    return b[0] * x;
                }
                let y = b[0] * x + state[0];
                for i in 0..n - 1 {
                    state[i] = state[i + 1] + b[i + 1] * x - a[i + 1] * y;
                }
                state[n - 1] = b[n] * x - a[n] * y;
                y
            }
            Realization::RepeatedPole { b, pole, .. } => {
                let (history, sections) = state.split_at_mut(b.len() - 1);
                let mut w = b[0] * x;
                for (bi, h) in b[1..].iter().zip(history.iter()) {
                    w += bi * h;
                }
                if !history.is_empty() {
                    history.copy_within(..history.len() - 1, 1);
                    history[0] = x;
                }
                for s in sections.iter_mut() {
                    *s = w + pole * *s;
                    w = *s;
                }
                w
            }
        }
    }

    /// Steady state for constant input `x0`, in closed form.
    pub fn prime(&self, state: &mut [f64], x0: f64) {
        match self {
            Realization::Direct { b, a } => {
                let y0 = x0 * b.iter().sum::<f64>() / a.iter().sum::<f64>();
                let mut acc = 0.0;
                for k in (0..state.len()).rev() {
                    acc += b[k + 1] * x0 - a[k + 1] * y0;
                    state[k] = acc;
                }
            }
            Realization::RepeatedPole { b, pole, .. } => {
                let (history, sections) = state.split_at_mut(b.len() - 1);
                history.iter_mut().for_each(|h| *h = x0);
                let mut level = x0 * b.iter().sum::<f64>();
                for s in sections.iter_mut() {
                    level /= 1.0 - pole;
                    *s = level;
                }
            }
        }
    }
}

/// A causal filter running one sample at a time.
///
/// Repeated-pole denominators run as a cascade whose delay line holds the
/// past `len(b) - 1` inputs and one output per pole; other denominators run
/// in transposed direct form II with `max(len(a), len(b)) - 1` accumulators.
/// Single owner; clone it to fork.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterState {
    coefficients: LdeCoefficients,
    realization: Realization,
    delay_line: Vec<f64>,
}

impl FilterState {
    pub fn new(coefficients: LdeCoefficients) -> Self {
        let realization = Realization::new(&coefficients);
        let delay_line = vec![0.0; realization.state_len()];
        FilterState {
            coefficients,
            realization,
            delay_line,
        }
    }

    pub fn coefficients(&self) -> &LdeCoefficients {
        &self.coefficients
    }

    pub fn delay_line(&self) -> &[f64] {
        &self.delay_line
    }

    pub fn reset(&mut self) {
        self.delay_line.iter_mut().for_each(|s| *s = 0.0);
    }

    /// Sets the delay line as if the input had always been `x0`.
    pub fn prime(&mut self, x0: f64) {
        self.realization.prime(&mut self.delay_line, x0);
    }

    /// `y[n] = sum b_m x[n-m] - sum_{m>=1} a_m y[n-m]`.
    pub fn step(&mut self, x: f64) -> f64 {
        self.realization.step(&mut self.delay_line, x)
    }
}

/// Runs `lde` over `signal` from left to right.
pub fn filter_causal(lde: &LdeCoefficients, signal: &[f64], priming: Priming) -> Vec<f64> {
    let realization = Realization::new(lde);
    let mut state = vec![0.0; realization.state_len()];
    run(
        &realization,
        &mut state,
        signal.iter().copied(),
        priming,
        signal.first().copied(),
    )
}

fn run<I: Iterator<Item = f64>>(
    realization: &Realization,
    state: &mut [f64],
    samples: I,
    priming: Priming,
    first: Option<f64>,
) -> Vec<f64> {
    if let (Priming::HoldFirst, Some(x0)) = (priming, first) {
        realization.prime(state, x0);
    }
    samples.map(|x| realization.step(state, x)).collect()
}

/// Forward pass plus backward pass over the reversed signal.
///
/// With [`Priming::HoldFirst`] the backward pass is primed with the last
/// sample, its own first input.
pub fn filter_noncausal(pair: &NonCausalPair, signal: &[f64], priming: Priming) -> Vec<f64> {
    let mut out = filter_causal(&pair.forward, signal, priming);
    let realization = Realization::new(&pair.backward);
    let mut state = vec![0.0; realization.state_len()];
    let backward = run(
        &realization,
        &mut state,
        signal.iter().rev().copied(),
        priming,
        signal.last().copied(),
    );
    for (o, b) in out.iter_mut().zip(backward.into_iter().rev()) {
        *o += b;
    }
    out
}

/// Dispatches on the realization kind.
pub fn filter_signal(filter: &FilterCoefficients, signal: &[f64], priming: Priming) -> Vec<f64> {
    match filter {
        FilterCoefficients::Causal(lde) => filter_causal(lde, signal, priming),
        FilterCoefficients::NonCausal(pair) => filter_noncausal(pair, signal, priming),
    }
}
