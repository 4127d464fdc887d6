use super::dd::Dd;
use super::weight::WeightSpec;
use crate::poly;
use crate::{Error, Result};

/// Highest supported basis degree; the moment matrix loses too much
/// precision beyond this even in double-double arithmetic.
pub const MAX_DEGREE: usize = 6;

/// Polynomials `psi_k(m) = sum_i alpha[k][i] m^i`, `k = 0..=B`, orthonormal
/// under a [`WeightSpec`].
#[derive(Debug, Clone, PartialEq)]
pub struct BasisSet {
    degree: usize,
    weight: WeightSpec,
    alpha: Vec<Vec<f64>>,
    /// `alpha` before rounding to `f64`.
    exact: Vec<Vec<Dd>>,
}

impl BasisSet {
    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn weight(&self) -> &WeightSpec {
        &self.weight
    }

    /// Row `k` holds `alpha[k][0..=k]`.
    pub fn alpha(&self) -> &[Vec<f64>] {
        &self.alpha
    }

    /// Coefficients of `psi_k` in ascending powers of `m`.
    pub fn coefficients(&self, k: usize) -> &[f64] {
        &self.alpha[k]
    }

    pub fn eval(&self, k: usize, m: f64) -> f64 {
        poly::eval(&self.alpha[k], m)
    }

    /// `d^order psi_k / dm^order` at `m`.
    pub fn eval_derivative(&self, k: usize, order: usize, m: f64) -> f64 {
        poly::eval(&poly::derivative(&self.alpha[k], order), m)
    }

    pub(crate) fn coefficients_dd(&self, k: usize) -> &[Dd] {
        &self.exact[k]
    }

    /// `sum_k c_k psi_k` as a polynomial in `m`, with the synthesis weights
    /// `c_k = (-1/T)^D psi_k^(D)(q)` evaluated in double-double.
    pub(crate) fn kernel_dd(&self, derivative: usize, delay: f64, sample_period: f64) -> Vec<Dd> {
        let factor = Dd::from(-1.0) / Dd::from(sample_period);
        let factor = factor.powi(derivative as u32);
        let q = Dd::from(delay);
        let mut kernel = vec![Dd::ZERO; self.degree + 1];
        for row in &self.exact {
            let c = factor * eval_derivative_dd(row, derivative, q);
            for (acc, &alpha) in kernel.iter_mut().zip(row) {
                *acc = *acc + c * alpha;
            }
        }
        kernel
    }
}

fn eval_derivative_dd(coeffs: &[Dd], order: usize, x: Dd) -> Dd {
    coeffs
        .iter()
        .enumerate()
        .skip(order)
        .rev()
        .fold(Dd::ZERO, |acc, (i, &c)| {
            let falling = (i - order + 1..=i).fold(1.0, |f, j| f * j as f64);
            acc * x + c * Dd::from(falling)
        })
}

/// Gram-Schmidt orthonormalization of `1, m, ..., m^B` under `spec`.
///
/// The inner product is evaluated through the closed-form weight moments.
/// Monomials are taken in the scaled variable `t = (1 - p) m`, whose moments
/// stay within a few orders of magnitude of each other, and the coefficients
/// are mapped back to powers of `m` at the end. All of it runs in
/// double-double precision.
pub fn orthonormal_basis(degree: usize, spec: &WeightSpec) -> Result<BasisSet> {
    if degree > MAX_DEGREE {
        return Err(Error::DegreeTooHigh {
            degree,
            max: MAX_DEGREE,
        });
    }
    let scale = Dd::ONE - Dd::from(spec.pole());
    let moments = spec.scaled_moments(2 * degree, scale);
    let n = degree + 1;
    let inner = |u: &[Dd], v: &[Dd]| -> Dd {
        let mut acc = Dd::ZERO;
        for (i, &ui) in u.iter().enumerate() {
            if ui == Dd::ZERO {
                continue;
            }
            for (j, &vj) in v.iter().enumerate() {
                acc = acc + ui * moments[i + j] * vj;
            }
        }
        acc
    };

    let mut rows: Vec<Vec<Dd>> = Vec::with_capacity(n);
    for k in 0..n {
        let mut v = vec![Dd::ZERO; n];
        v[k] = Dd::ONE;
        let initial_norm = inner(&v, &v).sqrt().to_f64();
        // two passes of modified Gram-Schmidt
        for _ in 0..2 {
            for row in &rows {
                let proj = inner(&v, row);
                for (vi, &ri) in v.iter_mut().zip(row) {
                    *vi = *vi - proj * ri;
                }
            }
        }
        let norm = inner(&v, &v).sqrt();
        if !norm.is_finite() || norm.to_f64() <= 1e-12 * initial_norm {
            return Err(Error::SingularGram { index: k });
        }
        v.iter_mut().for_each(|x| *x = *x / norm);
        rows.push(v);
    }

    let exact = rows
        .into_iter()
        .enumerate()
        .map(|(k, row)| {
            (0..=k)
                .map(|i| row[i] * scale.powi(i as u32))
                .collect::<Vec<Dd>>()
        })
        .collect::<Vec<_>>();
    let alpha = exact
        .iter()
        .map(|row| row.iter().map(|v| v.to_f64()).collect::<Vec<f64>>())
        .collect::<Vec<_>>();
    if alpha.iter().enumerate().any(|(k, row)| row[k] == 0.0) {
        return Err(Error::SingularGram { index: degree });
    }
    Ok(BasisSet {
        degree,
        weight: *spec,
        alpha,
        exact,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design::Causality;

    /// Double-double value `hi + lo`, enough to evaluate high-degree basis
    /// polynomials without the cancellation a plain `f64` Horner loop
    /// suffers.
    #[derive(Clone, Copy)]
    struct Dd(f64, f64);

    impl Dd {
        fn two_sum(a: f64, b: f64) -> Dd {
            let s = a + b;
            let v = s - a;
            Dd(s, (a - (s - v)) + (b - v))
        }
        fn add(self, o: Dd) -> Dd {
            let s = Dd::two_sum(self.0, o.0);
            let lo = s.1 + self.1 + o.1;
            Dd::two_sum(s.0, lo)
        }
        fn mul_f(self, x: f64) -> Dd {
            let p = self.0 * x;
            let e = self.0.mul_add(x, -p);
            Dd::two_sum(p, e + self.1 * x)
        }
        fn mul(self, o: Dd) -> Dd {
            let p = self.0 * o.0;
            let e = self.0.mul_add(o.0, -p);
            Dd::two_sum(p, e + self.0 * o.1 + self.1 * o.0)
        }
    }

    fn eval_dd(coeffs: &[f64], m: f64) -> Dd {
        coeffs
            .iter()
            .rev()
            .fold(Dd(0.0, 0.0), |acc, &c| acc.mul_f(m).add(Dd(c, 0.0)))
    }

    /// Gram matrix by direct summation, stopping once the weight tail is
    /// negligible.
    fn truncated_gram(basis: &BasisSet) -> Vec<Vec<f64>> {
        let n = basis.degree() + 1;
        let spec = basis.weight();
        let mut g = vec![vec![Dd(0.0, 0.0); n]; n];
        let two_sided = spec.causality() == Causality::TwoSided;
        let mut m: i64 = 0;
        loop {
            let points: &[i64] = if two_sided && m > 0 { &[m, -m] } else { &[m] };
            for &x in points {
                let w = spec.weight(x);
                let psi: Vec<Dd> = (0..n)
                    .map(|k| eval_dd(basis.coefficients(k), x as f64))
                    .collect();
                for i in 0..n {
                    for j in 0..n {
                        g[i][j] = g[i][j].add(psi[i].mul(psi[j]).mul_f(w));
                    }
                }
            }
            let tail = (m as f64).powi(2 * n as i32 + spec.kappa() as i32) * spec.weight(m.max(1));
            if m > 20 && tail < 1e-15 {
                break;
            }
            m += 1;
        }
        g.into_iter()
            .map(|row| row.into_iter().map(|v| v.0 + v.1).collect())
            .collect()
    }

    fn assert_identity(g: &[Vec<f64>], tol: f64) {
        assert_identity_ctx(g, tol, "")
    }

    fn assert_identity_ctx(g: &[Vec<f64>], tol: f64, ctx: &str) {
        for (i, row) in g.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                let expected = if i == j { 1.0 } else { 0.0 };
                assert!((v - expected).abs() < tol, "{ctx} G[{i}][{j}] = {v}");
            }
        }
    }

    #[test]
    fn constant_basis_is_normalized_geometric() {
        for &p in &[0.2, 0.5, 0.8] {
            let spec = WeightSpec::from_pole(p, 0, Causality::Causal).unwrap();
            let basis = orthonormal_basis(0, &spec).unwrap();
            assert!((basis.alpha()[0][0] - (1.0 - p).sqrt()).abs() < 1e-14);
        }
    }

    #[test]
    fn degree_one_gram_is_identity() {
        let spec = WeightSpec::from_pole(0.5, 0, Causality::Causal).unwrap();
        let basis = orthonormal_basis(1, &spec).unwrap();
        assert_identity(&truncated_gram(&basis), 1e-12);
    }

    #[test]
    fn gram_identity_across_parameters() {
        for &p in &[0.1, 0.5, 0.9] {
            for degree in 0..=MAX_DEGREE {
                for kappa in 0..3 {
                    let spec = WeightSpec::from_pole(p, kappa, Causality::Causal).unwrap();
                    let basis = orthonormal_basis(degree, &spec).unwrap();
                    assert_identity_ctx(
                        &truncated_gram(&basis),
                        1e-9,
                        &format!("p={p} B={degree} kappa={kappa}"),
                    );
                }
                let spec = WeightSpec::from_pole(p, 0, Causality::TwoSided).unwrap();
                let basis = orthonormal_basis(degree, &spec).unwrap();
                assert_identity(&truncated_gram(&basis), 1e-9);
            }
        }
    }

    #[test]
    fn discrete_laguerre_degree_one() {
        // Orthonormal first-degree discrete Laguerre polynomial under p^m:
        // psi_1(m) = sqrt(1 - p) * ((1 - p) m - p) / sqrt(p)
        let p: f64 = 0.6;
        let spec = WeightSpec::from_pole(p, 0, Causality::Causal).unwrap();
        let basis = orthonormal_basis(1, &spec).unwrap();
        let s = (1.0 - p).sqrt() / p.sqrt();
        assert!((basis.alpha()[1][0] - (-p * s)).abs() < 1e-13);
        assert!((basis.alpha()[1][1] - (1.0 - p) * s).abs() < 1e-13);
    }

    #[test]
    fn leading_coefficients_nonzero() {
        let spec = WeightSpec::causal(-0.3, 1).unwrap();
        let basis = orthonormal_basis(4, &spec).unwrap();
        for k in 0..=4 {
            assert_eq!(basis.coefficients(k).len(), k + 1);
            assert!(basis.alpha()[k][k] != 0.0);
        }
    }

    #[test]
    fn rejects_high_degree() {
        let spec = WeightSpec::causal(-0.5, 0).unwrap();
        assert!(matches!(
            orthonormal_basis(7, &spec),
            Err(Error::DegreeTooHigh { degree: 7, .. })
        ));
    }
}
