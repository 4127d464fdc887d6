//! Self-verification suite: one check per acceptance criterion, shared by
//! the `acceptance` test target and the command-line `selftest`.
//!
//! Reports are deterministic. Runtime budgets are checked, but elapsed times
//! are never printed, so two runs produce byte-identical text.

use std::f64::consts::PI;
use std::fmt;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::design::{
    derive_causal_lde, derive_noncausal_pair, impulse_response_prefix, optimal_q,
    orthonormal_basis, spectrum_filter_bank, table_coefficients, two_sided_impulse_response,
    ClosedForm, FilterDesign, LdeCoefficients,
};
use crate::flow::{interior, median, process_sequence, FlowConfig};
use crate::response::{
    flatness_report, nyquist_gain, root_multiplicity, white_noise_gain, FrequencyResponse,
};
use crate::runtime::{filter_causal, filter_noncausal, Priming};
use crate::synthetic::{with_blob, Blob, Plaid};
use crate::Result;

/// Knobs for exercising the suite itself.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Options {
    /// Added to `b[0]` of every derived filter in the table comparison; a
    /// nonzero value must make that criterion fail.
    pub perturb_b0: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CriterionReport {
    pub id: usize,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl fmt::Display for CriterionReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let status = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{status} {:>2} {}: {}", self.id, self.name, self.detail)
    }
}

pub const CRITERIA: [(usize, &str); 11] = [
    (1, "table reproduction"),
    (2, "optimal delay"),
    (3, "flatness"),
    (4, "pole multiplicity"),
    (5, "group-delay tuning"),
    (6, "differentiator low-frequency law"),
    (7, "non-causal equivalence"),
    (8, "variance reduction minimum"),
    (9, "spectrum-bank equivalence"),
    (10, "optical flow"),
    (11, "runtime correctness"),
];

/// Runs criterion `id` (1..=11).
pub fn run(id: usize, opts: &Options) -> Option<CriterionReport> {
    let (_, name) = *CRITERIA.iter().find(|(i, _)| *i == id)?;
    let outcome = match id {
        1 => table_reproduction(opts),
        2 => optimal_delay(),
        3 => flatness(),
        4 => pole_multiplicity(),
        5 => group_delay_tuning(),
        6 => differentiator_law(),
        7 => noncausal_equivalence(),
        8 => vrf_minimum(),
        9 => spectrum_bank(),
        10 => optical_flow(),
        11 => runtime_correctness(),
        _ => unreachable!(),
    };
    let (passed, detail) = match outcome {
        Ok(v) => v,
        Err(e) => (false, format!("error: {e}")),
    };
    Some(CriterionReport {
        id,
        name,
        passed,
        detail,
    })
}

pub fn run_all(opts: &Options) -> Vec<CriterionReport> {
    CRITERIA
        .iter()
        .filter_map(|&(id, _)| run(id, opts))
        .collect()
}

/// One line per report.
pub fn render(reports: &[CriterionReport]) -> String {
    reports.iter().map(|r| format!("{r}\n")).collect()
}

type Outcome = Result<(bool, String)>;

fn within_budget(start: Instant, budget: Duration) -> (bool, &'static str) {
    if start.elapsed() < budget {
        (true, "within time budget")
    } else {
        (false, "over time budget")
    }
}

const HALF_POLE_SIGMA: f64 = -0.5;

fn table_reproduction(opts: &Options) -> Outcome {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    let mut cases = 0;
    for &p in &[0.1, 0.25, 0.5, 0.75, 0.9] {
        for &q in &[-2.0, 0.0, 1.0, 2.5, 6.0] {
            for d in 0..=1 {
                for kappa in 0..=1 {
                    let form = ClosedForm::lookup(kappa, d, true)
                        .expect("causal B = 2 forms are tabulated");
                    let table = table_coefficients(form, p, q, 1.0)?
                        .causal()
                        .expect("causal form");
                    let mut derived = derive_causal_lde(&FilterDesign::causal(2, d, kappa, p, q)?)?;
                    derived.b_mut()[0] += opts.perturb_b0;
                    worst = worst.max(derived.max_abs_diff(&table));
                    cases += 1;
                }
            }
        }
    }
    let (fast, timing) = within_budget(start, Duration::from_secs(1));
    Ok((
        worst <= 1e-10 && fast,
        format!("max abs error {worst:.1e} over {cases} designs, {timing}"),
    ))
}

/// Delay where the Nyquist gain of the derived `B = 2` smoother crosses
/// zero, by bisection on the sign of `H(-1)`.
fn nyquist_zero_by_bisection(kappa: u32, p: f64, mut lo: f64, mut hi: f64) -> Result<f64> {
    let signed = |q: f64| -> Result<f64> {
        let lde = derive_causal_lde(&FilterDesign::causal(2, 0, kappa, p, q)?)?;
        Ok(lde.response(PI).re)
    };
    let f_lo = signed(lo)?;
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if (signed(mid)? > 0.0) == (f_lo > 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

fn optimal_delay() -> Outcome {
    let p = HALF_POLE_SIGMA.exp();
    let mut ok = true;
    let mut parts = Vec::new();
    for (form, kappa, target) in [
        (ClosedForm::LaguerreSmoother, 0, 2.12),
        (ClosedForm::AssociatedSmoother, 1, 4.14),
    ] {
        let q = optimal_q(form, p)?;
        let searched = nyquist_zero_by_bisection(kappa, p, target - 1.0, target + 1.0)?;
        let lde = derive_causal_lde(&FilterDesign::causal(2, 0, kappa, p, q)?)?;
        let gain = nyquist_gain(&lde);
        ok &= (q - target).abs() <= 0.01 && (searched - q).abs() <= 1e-9 && gain < 1e-10;
        parts.push(format!(
            "kappa={kappa} q={q:.4} (search {searched:.4}) |H(pi)|={gain:.1e}"
        ));
    }
    Ok((ok, parts.join("; ")))
}

fn flatness() -> Outcome {
    let p = HALF_POLE_SIGMA.exp();
    let mut ok = true;
    let mut worst: f64 = 0.0;
    for form in [ClosedForm::LaguerreSmoother, ClosedForm::AssociatedSmoother] {
        let lde = table_coefficients(form, p, optimal_q(form, p)?, 1.0)?;
        for entry in flatness_report(&lde, 3)? {
            ok &= entry.flat;
            worst = worst.max(entry.relative);
        }
    }
    Ok((
        ok,
        format!("largest relative derivative of |H|^2 (orders 1-3) {worst:.1e}"),
    ))
}

/// `(1 - p z^-1)^n` by repeated convolution.
fn repeated_pole_by_convolution(p: f64, n: usize) -> Vec<f64> {
    (0..n).fold(vec![1.0], |acc, _| {
        let mut out = vec![0.0; acc.len() + 1];
        for (i, &c) in acc.iter().enumerate() {
            out[i] += c;
            out[i + 1] -= p * c;
        }
        out
    })
}

fn pole_multiplicity() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut ok = true;
    let mut cases = 0;
    for &p in &[0.1, 0.37, 0.6, 0.9] {
        for degree in 0..=4 {
            for kappa in 0..=2u32 {
                for d in 0..=degree.min(2) {
                    let lde = derive_causal_lde(&FilterDesign::causal(degree, d, kappa, p, 1.0)?)?;
                    let order = degree + kappa as usize + 1;
                    let expected = repeated_pole_by_convolution(p, order);
                    let diff = if lde.a().len() == expected.len() {
                        lde.a()
                            .iter()
                            .zip(&expected)
                            .map(|(x, y)| (x - y).abs())
                            .fold(0.0, f64::max)
                    } else {
                        f64::INFINITY
                    };
                    worst = worst.max(diff);
                    ok &= diff <= 1e-12 && root_multiplicity(lde.a(), p, 1e-10) == order;
                    cases += 1;
                }
            }
        }
    }
    Ok((
        ok,
        format!("max denominator deviation {worst:.1e} over {cases} designs"),
    ))
}

fn group_delay_tuning() -> Outcome {
    let p = HALF_POLE_SIGMA.exp();
    let mut worst: f64 = 0.0;
    for kappa in 0..=1 {
        for &q in &[0.0, 1.0, 2.0, 4.0] {
            let lde = derive_causal_lde(&FilterDesign::causal(2, 0, kappa, p, q)?)?;
            let tau = lde.group_delay(0.01).unwrap_or(f64::INFINITY);
            worst = worst.max((tau - q).abs());
        }
    }
    Ok((
        worst <= 0.05,
        format!("max |group delay - q| at w=0.01 {worst:.1e} samples"),
    ))
}

fn differentiator_law() -> Outcome {
    let p = HALF_POLE_SIGMA.exp();
    let omega = 1e-3;
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &t in &[1.0, 0.5] {
        let configs = [
            table_coefficients(
                ClosedForm::LaguerreDifferentiator,
                p,
                optimal_q(ClosedForm::LaguerreDifferentiator, p)?,
                t,
            )?,
            table_coefficients(
                ClosedForm::AssociatedDifferentiator,
                p,
                optimal_q(ClosedForm::AssociatedDifferentiator, p)?,
                t,
            )?,
            table_coefficients(ClosedForm::AssociatedDifferentiator, p, 4.0, t)?,
            table_coefficients(ClosedForm::SymmetricDifferentiator, p, 0.0, t)?,
        ];
        for filter in &configs {
            let ratio = filter.response(omega).norm() * t / omega;
            lo = lo.min(ratio);
            hi = hi.max(ratio);
        }
    }
    Ok((
        lo >= 0.999 && hi <= 1.001,
        format!(
            "|H(w)| T / w at w=1e-3 in [{lo:.6}, {hi:.6}] over 4 configurations x 2 sample periods"
        ),
    ))
}

fn noncausal_equivalence() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut worst_smoother_im: f64 = 0.0;
    let mut worst_diff_re: f64 = 0.0;
    for &p in &[0.25, 0.5, 0.75] {
        for d in 0..=1 {
            let form =
                ClosedForm::lookup(0, d, false).expect("non-causal B = 2 forms are tabulated");
            let table = table_coefficients(form, p, 0.0, 1.0)?;
            let derived = derive_noncausal_pair(&FilterDesign::two_sided(2, d, p)?)?;
            for i in 0..64 {
                let omega = PI * i as f64 / 63.0;
                let (hd, ht) = (derived.response(omega), table.response(omega));
                worst = worst.max((hd - ht).norm());
                if d == 0 {
                    worst_smoother_im = worst_smoother_im.max(hd.im.abs());
                } else {
                    worst_diff_re = worst_diff_re.max(hd.re.abs());
                }
            }
        }
    }
    let ok = worst <= 1e-8 && worst_smoother_im <= 1e-12 && worst_diff_re <= 1e-12;
    Ok((
        ok,
        format!(
            "max response difference {worst:.1e}; smoother max |Im H| {worst_smoother_im:.1e}; \
             differentiator max |Re H| {worst_diff_re:.1e}"
        ),
    ))
}

/// Minimizer of `f` on `[lo, hi]`: a coarse grid followed by golden-section
/// refinement around the best grid point.
fn minimize<F: Fn(f64) -> Result<f64>>(f: F, lo: f64, hi: f64, step: f64) -> Result<f64> {
    let n = ((hi - lo) / step).round() as usize;
    let mut best = (lo, f(lo)?);
    for i in 1..=n {
        let x = lo + step * i as f64;
        let v = f(x)?;
        if v < best.1 {
            best = (x, v);
        }
    }
    let (mut a, mut b) = (best.0 - step, best.0 + step);
    let g = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..60 {
        let (c, d) = (b - g * (b - a), a + g * (b - a));
        if f(c)? < f(d)? {
            b = d;
        } else {
            a = c;
        }
    }
    Ok(0.5 * (a + b))
}

fn vrf_minimum() -> Outcome {
    let p = HALF_POLE_SIGMA.exp();
    let mut ok = true;
    let mut parts = Vec::new();
    for form in [ClosedForm::LaguerreSmoother, ClosedForm::AssociatedSmoother] {
        let vrf = |q: f64| -> Result<f64> {
            let lde = table_coefficients(form, p, q, 1.0)?
                .causal()
                .expect("causal form");
            white_noise_gain(&lde, 1e-14)
        };
        let found = minimize(vrf, -2.0, 8.0, 0.05)?;
        let expected = optimal_q(form, p)?;
        ok &= (found - expected).abs() <= 0.05;
        parts.push(format!(
            "kappa={} argmin {found:.3} vs {expected:.3}",
            form.kappa()
        ));
    }
    Ok((ok, parts.join("; ")))
}

fn spectrum_bank() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let noise: Vec<f64> = (0..100).map(|_| rng.sample(StandardNormal)).collect();
    let designs = [
        FilterDesign::causal(2, 0, 0, HALF_POLE_SIGMA.exp(), 2.0)?,
        FilterDesign::causal(2, 1, 1, HALF_POLE_SIGMA.exp(), 4.0)?,
        FilterDesign::causal(3, 1, 1, 0.7, -1.0)?,
        FilterDesign::causal(4, 2, 2, 0.5, 1.5)?,
    ];
    let mut worst: f64 = 0.0;
    for design in &designs {
        let bank = spectrum_filter_bank(design)?;
        let mut summed = vec![0.0; noise.len()];
        for (lde, &c) in bank.per_k.iter().zip(&bank.synthesis) {
            let beta = filter_causal(lde, &noise, Priming::Zero);
            for (s, b) in summed.iter_mut().zip(beta) {
                *s += c * b;
            }
        }
        let direct = filter_causal(&derive_causal_lde(design)?, &noise, Priming::Zero);
        let err = summed
            .iter()
            .zip(&direct)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        worst = worst.max(err);
    }
    Ok((
        worst < 1e-9,
        format!(
            "max |sum_k c_k beta_k - y| {worst:.1e} over {} designs",
            designs.len()
        ),
    ))
}

/// Pixels kept away from the borders when taking interior statistics.
pub const FLOW_MARGIN: usize = 16;

fn optical_flow() -> Outcome {
    let start = Instant::now();
    let cfg = FlowConfig::default();
    let plaid = Plaid::default();
    let background = plaid.sequence(40)?;
    let result = process_sequence(&background, &cfg)?;
    let (tx, ty) = plaid.velocity;
    let mut worst_flow: f64 = 0.0;
    for frame in result.frames.iter().filter(|f| !f.warmup) {
        let mx = median(&mut interior(&frame.flow.vx, FLOW_MARGIN)).unwrap_or(f64::NAN);
        let my = median(&mut interior(&frame.flow.vy, FLOW_MARGIN)).unwrap_or(f64::NAN);
        worst_flow = worst_flow.max((mx - tx).hypot(my - ty) / tx.hypot(ty));
    }

    let blob = Blob::counter_moving((74.0, 54.0), plaid.velocity);
    let with_target = with_blob(&background, &blob)?;
    let result = process_sequence(&with_target, &cfg)?;
    let delay = cfg.delay_frames();
    let mut worst_ratio = f64::INFINITY;
    let (w, h) = (plaid.width, plaid.height);
    for frame in result.frames.iter().filter(|f| !f.warmup) {
        // disparity refers to the frame `delay` steps back
        let t = frame.index - delay;
        let (mut inside, mut outside) = (Vec::new(), Vec::new());
        for y in FLOW_MARGIN..h - FLOW_MARGIN {
            for x in FLOW_MARGIN..w - FLOW_MARGIN {
                let v = frame.disparity.dj.get(x, y);
                if blob.contains(x, y, t) {
                    inside.push(v);
                } else {
                    outside.push(v);
                }
            }
        }
        let ratio =
            median(&mut inside).unwrap_or(0.0) / median(&mut outside).unwrap_or(f64::INFINITY);
        worst_ratio = worst_ratio.min(ratio);
    }
    let (fast, timing) = within_budget(start, Duration::from_secs(30));
    let ok = worst_flow < 0.1 && worst_ratio > 5.0 && fast;
    Ok((
        ok,
        format!(
            "worst post-warm-up median flow error {:.2}%; smallest blob/background disparity ratio {worst_ratio:.1}, {timing}",
            100.0 * worst_flow
        ),
    ))
}

fn impulse(len: usize) -> Vec<f64> {
    let mut x = vec![0.0; len];
    x[0] = 1.0;
    x
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

fn runtime_correctness() -> Outcome {
    const LEN: usize = 50;
    let mut worst_impulse: f64 = 0.0;
    let mut designs: Vec<LdeCoefficients> = Vec::new();
    for &p in &[0.3, 0.6, 0.85] {
        for degree in 0..=4 {
            for kappa in 0..=2u32 {
                for d in 0..=degree.min(2) {
                    for &q in &[-1.0, 0.0, 1.5] {
                        let design = FilterDesign::causal(degree, d, kappa, p, q)?;
                        let basis = orthonormal_basis(degree, &design.weight)?;
                        let expected = impulse_response_prefix(&design, &basis, LEN)?;
                        let lde = derive_causal_lde(&design)?;
                        let got = filter_causal(&lde, &impulse(LEN), Priming::Zero);
                        worst_impulse = worst_impulse.max(max_diff(&got, &expected));
                        designs.push(lde);
                    }
                }
            }
        }
        for degree in 0..=4 {
            for d in 0..=degree.min(2) {
                let design = FilterDesign::two_sided(degree, d, p)?;
                let pair = derive_noncausal_pair(&design)?;
                // centred impulse, far enough from both ends to see all of h
                let span = LEN;
                let mut x = vec![0.0; 2 * span + 1];
                x[span] = 1.0;
                let got = filter_noncausal(&pair, &x, Priming::Zero);
                let expected = two_sided_impulse_response(&design, span)?;
                // y[n] = h[n - span]; the stored kernel is indexed from -span
                worst_impulse = worst_impulse.max(max_diff(&got, &expected));
            }
        }
    }

    // linearity and shift invariance on random signals
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst_linear: f64 = 0.0;
    let mut worst_shift: f64 = 0.0;
    for trial in 0..40 {
        let lde = &designs[(trial * 37) % designs.len()];
        let len = 64;
        let x: Vec<f64> = (0..len).map(|_| rng.sample(StandardNormal)).collect();
        let y: Vec<f64> = (0..len).map(|_| rng.sample(StandardNormal)).collect();
        let (a, b): (f64, f64) = (rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0));
        let combo: Vec<f64> = x.iter().zip(&y).map(|(u, v)| a * u + b * v).collect();
        let fx = filter_causal(lde, &x, Priming::Zero);
        let fy = filter_causal(lde, &y, Priming::Zero);
        let fc = filter_causal(lde, &combo, Priming::Zero);
        let scale = fx.iter().chain(&fy).fold(1.0_f64, |m, v| m.max(v.abs()));
        let lin: Vec<f64> = fx.iter().zip(&fy).map(|(u, v)| a * u + b * v).collect();
        worst_linear = worst_linear.max(max_diff(&fc, &lin) / scale);

        let shift = rng.random_range(1..16usize);
        let mut shifted = vec![0.0; shift];
        shifted.extend_from_slice(&x);
        let fs = filter_causal(lde, &shifted, Priming::Zero);
        worst_shift = worst_shift.max(max_diff(&fs[shift..], &fx) / scale);
    }
    let ok = worst_impulse <= 1e-12 && worst_linear <= 1e-12 && worst_shift == 0.0;
    Ok((
        ok,
        format!(
            "max impulse deviation {worst_impulse:.1e} ({} causal designs + pairs); \
             linearity {worst_linear:.1e}; shift {worst_shift:.1e}",
            designs.len()
        ),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perturbation_breaks_table_criterion() {
        let clean = run(1, &Options::default()).unwrap();
        assert!(clean.passed, "{clean}");
        let broken = run(1, &Options { perturb_b0: 1e-3 }).unwrap();
        assert!(!broken.passed, "{broken}");
    }

    #[test]
    fn unknown_criterion() {
        assert!(run(0, &Options::default()).is_none());
        assert!(run(12, &Options::default()).is_none());
    }
}
