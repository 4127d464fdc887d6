//! Dense real polynomials stored with ascending powers.

/// Horner evaluation of `sum coeffs[i] * x^i`.
pub fn eval(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
}

/// Coefficients of the `order`-th derivative.
pub fn derivative(coeffs: &[f64], order: usize) -> Vec<f64> {
    if order >= coeffs.len() {
        return Vec::new();
    }
    (order..coeffs.len())
        .map(|i| {
            let falling: f64 = (0..order).map(|j| (i - j) as f64).product();
            falling * coeffs[i]
        })
        .collect()
}

pub fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, j| acc * (n - j) as f64 / (j + 1) as f64)
}

/// Coefficients (in powers of `z^-1`) of `(1 - pole z^-1)^order`.
pub fn repeated_pole(pole: f64, order: usize) -> Vec<f64> {
    (0..=order)
        .map(|j| binomial(order, j) * (-pole).powi(j as i32))
        .collect()
}

/// Stirling numbers of the second kind `S(n, k)` for `0 <= k <= n <= max_n`.
pub fn stirling2_table(max_n: usize) -> Vec<Vec<f64>> {
    let mut table = vec![vec![0.0; max_n + 1]; max_n + 1];
    table[0][0] = 1.0;
    for n in 1..=max_n {
        for k in 1..=n {
            table[n][k] = k as f64 * table[n - 1][k] + table[n - 1][k - 1];
        }
    }
    table
}

/// Divides `coeffs` (powers of `z^-1`) by `(1 - root z^-1)` once.
///
/// Returns the quotient and the remainder.
pub fn deflate(coeffs: &[f64], root: f64) -> (Vec<f64>, f64) {
    if coeffs.is_empty() {
        return (Vec::new(), 0.0);
    }
    let mut quotient = Vec::with_capacity(coeffs.len().saturating_sub(1));
    let mut carry = 0.0;
    for &c in &coeffs[..coeffs.len() - 1] {
        carry = c + root * carry;
        quotient.push(carry);
    }
    let remainder = coeffs[coeffs.len() - 1] + root * carry;
    (quotient, remainder)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn horner_matches_naive() {
        let c = [1.0, -2.0, 0.5, 3.0];
        let x: f64 = 1.7;
        let naive: f64 = c
            .iter()
            .enumerate()
            .map(|(i, v)| v * x.powi(i as i32))
            .sum();
        assert!((eval(&c, x) - naive).abs() < 1e-12);
    }

    #[test]
    fn derivative_of_cubic() {
        assert_eq!(derivative(&[1.0, 2.0, 3.0, 4.0], 1), vec![2.0, 6.0, 12.0]);
        assert_eq!(derivative(&[1.0, 2.0, 3.0, 4.0], 2), vec![6.0, 24.0]);
        assert!(derivative(&[1.0, 2.0], 3).is_empty());
    }

    #[test]
    fn repeated_pole_cubed() {
        assert_eq!(repeated_pole(0.5, 3), vec![1.0, -1.5, 0.75, -0.125]);
    }

    #[test]
    fn stirling_row_four() {
        let s = stirling2_table(4);
        assert_eq!(s[4], vec![0.0, 1.0, 7.0, 6.0, 1.0]);
    }

    #[test]
    fn deflation_counts_roots() {
        let mut c = repeated_pole(0.3, 4);
        for _ in 0..4 {
            let (q, r) = deflate(&c, 0.3);
            assert!(r.abs() < 1e-15);
            c = q;
        }
        assert_eq!(c.len(), 1);
        let (_, r) = deflate(&c, 0.3);
        assert!((r - 1.0).abs() < 1e-15);
    }
}
