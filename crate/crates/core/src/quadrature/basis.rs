//! Reference polynomial families defined by a three-term recurrence
//!
//! ```text
//! p_{-1}(x) = 0,  p_0(x) = 1,
//! p_{k+1}(x) = (x - a_k) p_k(x) - b_k p_{k-1}(x)
//! ```
//!
//! Every family here is monic, so `p_k` has degree exactly `k`.

use crate::error::{Error, Result};
use std::hash::{Hash, Hasher};

/// Identifies which reference family a moment vector was taken against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BasisId {
    /// Monic probabilists' Hermite polynomials.
    Hermite,
    /// Plain powers `x^k`.
    Monomial,
    /// User-supplied coefficients, keyed by a hash of their bit patterns.
    Custom(u64),
}

/// Which derivative of a basis polynomial to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Derivative {
    Value,
    First,
    Second,
}

impl TryFrom<u8> for Derivative {
    type Error = Error;

    fn try_from(order: u8) -> Result<Self> {
        match order {
            0 => Ok(Derivative::Value),
            1 => Ok(Derivative::First),
            2 => Ok(Derivative::Second),
            _ => Err(Error::invalid(format!(
                "derivative order {order} not in 0..=2"
            ))),
        }
    }
}

/// Recurrence coefficients `(a_k, b_k)` for `k = 0..order`, generating the
/// polynomials `p_0 ..= p_order`.
#[derive(Debug, Clone, PartialEq)]
pub struct RecurrenceBasis {
    id: BasisId,
    alpha: Vec<f64>,
    beta: Vec<f64>,
}

impl RecurrenceBasis {
    /// Monic probabilists' Hermite family: `a_k = 0`, `b_0 = 0`, `b_k = k`.
    /// Orthogonal with respect to the standard normal law.
    pub fn hermite(n_polys: usize) -> Result<Self> {
        if n_polys == 0 {
            return Err(Error::invalid("basis needs at least one recurrence step"));
        }
        Ok(Self {
            id: BasisId::Hermite,
            alpha: vec![0.0; n_polys],
            beta: (0..n_polys).map(|k| k as f64).collect(),
        })
    }

    /// Hermite basis large enough for an `n_points` Gauss rule (`2N` moments).
    pub fn hermite_for_points(n_points: usize) -> Result<Self> {
        if n_points == 0 {
            return Err(Error::invalid("a Gauss rule needs at least one point"));
        }
        Self::hermite(2 * n_points - 1)
    }

    /// Raw power basis (`a_k = b_k = 0`). Poorly conditioned; kept for
    /// comparisons and hand-checkable examples.
    pub fn monomial(n_polys: usize) -> Result<Self> {
        if n_polys == 0 {
            return Err(Error::invalid("basis needs at least one recurrence step"));
        }
        Ok(Self {
            id: BasisId::Monomial,
            alpha: vec![0.0; n_polys],
            beta: vec![0.0; n_polys],
        })
    }

    pub fn monomial_for_points(n_points: usize) -> Result<Self> {
        if n_points == 0 {
            return Err(Error::invalid("a Gauss rule needs at least one point"));
        }
        Self::monomial(2 * n_points - 1)
    }

    /// Arbitrary orthogonal family. Requires `b_0 = 0` and `b_k > 0` for `k >= 1`.
    pub fn custom(alpha: Vec<f64>, beta: Vec<f64>) -> Result<Self> {
        if alpha.is_empty() || alpha.len() != beta.len() {
            return Err(Error::invalid(
                "alpha and beta must be non-empty and of equal length",
            ));
        }
        if beta[0] != 0.0 {
            return Err(Error::invalid("beta_0 must be zero"));
        }
        if let Some(k) = beta
            .iter()
            .skip(1)
            .position(|&b| !(b > 0.0 && b.is_finite()))
        {
            return Err(Error::invalid(format!("beta_{} must be positive", k + 1)));
        }
        if alpha.iter().any(|a| !a.is_finite()) {
            return Err(Error::invalid("alpha coefficients must be finite"));
        }
        let mut hasher = std::collections::hash_map::DefaultHasher::new();
        for (a, b) in alpha.iter().zip(&beta) {
            a.to_bits().hash(&mut hasher);
            b.to_bits().hash(&mut hasher);
        }
        Ok(Self {
            id: BasisId::Custom(hasher.finish()),
            alpha,
            beta,
        })
    }

    pub fn id(&self) -> BasisId {
        self.id
    }

    /// Highest polynomial index available.
    pub fn order(&self) -> usize {
        self.alpha.len()
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn beta(&self) -> &[f64] {
        &self.beta
    }

    /// `p_k(x)` or one of its first two derivatives, by differentiating the
    /// recurrence.
    pub fn eval(&self, k: usize, x: f64, deriv: Derivative) -> Result<f64> {
        if k > self.order() {
            return Err(Error::invalid(format!(
                "polynomial index {k} exceeds basis order {}",
                self.order()
            )));
        }
        let n = k + 1;
        let mut v = vec![0.0; n];
        let mut d1 = vec![0.0; n];
        let mut d2 = vec![0.0; n];
        self.eval_with_derivatives(x, &mut v, &mut d1, &mut d2);
        Ok(match deriv {
            Derivative::Value => v[k],
            Derivative::First => d1[k],
            Derivative::Second => d2[k],
        })
    }

    /// Fills `out[k] = p_k(x)` for `k < out.len()`.
    ///
    /// Panics if `out.len() > order + 1`.
    pub fn eval_into(&self, x: f64, out: &mut [f64]) {
        assert!(out.len() <= self.order() + 1, "basis too short");
        let mut prev = 0.0;
        let mut cur = 1.0;
        for (k, slot) in out.iter_mut().enumerate() {
            *slot = cur;
            if k < self.order() {
                let next = (x - self.alpha[k]) * cur - self.beta[k] * prev;
                prev = cur;
                cur = next;
            }
        }
    }

    /// Values, first and second derivatives of `p_0 .. p_{len-1}` at `x`.
    pub fn eval_with_derivatives(&self, x: f64, v: &mut [f64], d1: &mut [f64], d2: &mut [f64]) {
        let n = v.len();
        assert!(n == d1.len() && n == d2.len(), "buffer lengths differ");
        assert!(n <= self.order() + 1, "basis too short");
        if n == 0 {
            return;
        }
        v[0] = 1.0;
        d1[0] = 0.0;
        d2[0] = 0.0;
        for k in 0..n - 1 {
            let shift = x - self.alpha[k];
            let b = self.beta[k];
            let (pv, pd1, pd2) = if k > 0 {
                (v[k - 1], d1[k - 1], d2[k - 1])
            } else {
                (0.0, 0.0, 0.0)
            };
            v[k + 1] = shift * v[k] - b * pv;
            d1[k + 1] = v[k] + shift * d1[k] - b * pd1;
            d2[k + 1] = 2.0 * d1[k] + shift * d2[k] - b * pd2;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn hermite_coefficients() {
        let b = RecurrenceBasis::hermite(4).unwrap();
        assert_eq!(b.alpha(), &[0.0, 0.0, 0.0, 0.0]);
        assert_eq!(b.beta(), &[0.0, 1.0, 2.0, 3.0]);
        assert!(RecurrenceBasis::hermite(0).is_err());
    }

    #[test]
    fn hermite_orthogonal_under_standard_normal() {
        // Trapezoid rule on [-12, 12]; the integrands decay like exp(-x^2/2).
        let basis = RecurrenceBasis::hermite(6).unwrap();
        let n = 24_000;
        let h = 24.0 / n as f64;
        let mut gram = [[0.0f64; 7]; 7];
        let mut vals = [0.0; 7];
        for j in 0..=n {
            let x = -12.0 + j as f64 * h;
            let w = if j == 0 || j == n { 0.5 } else { 1.0 };
            let pdf = (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
            basis.eval_into(x, &mut vals);
            for (row, vp) in gram.iter_mut().zip(vals) {
                for (g, vq) in row.iter_mut().zip(vals) {
                    *g += w * h * pdf * vp * vq;
                }
            }
        }
        let mut factorial = 1.0;
        for (p, row) in gram.iter().enumerate() {
            if p > 0 {
                factorial *= p as f64;
            }
            for (q, &g) in row.iter().enumerate() {
                let expected = if p == q { factorial } else { 0.0 };
                assert_abs_diff_eq!(g, expected, epsilon = 1e-9 * factorial.max(1.0));
            }
        }
    }

    #[test]
    fn hand_expanded_values() {
        let b = RecurrenceBasis::hermite(4).unwrap();
        assert_eq!(b.eval(2, 0.0, Derivative::Value).unwrap(), -1.0);
        assert_eq!(b.eval(1, 3.0, Derivative::Value).unwrap(), 3.0);
        assert_eq!(b.eval(0, 5.0, Derivative::Value).unwrap(), 1.0);
        assert_eq!(b.eval(2, 2.0, Derivative::Value).unwrap(), 3.0);
        assert_eq!(b.eval(2, 2.0, Derivative::Second).unwrap(), 2.0);
        // p_3 = x^3 - 3x, p_3' = 3x^2 - 3, p_3'' = 6x
        assert_eq!(b.eval(3, 2.0, Derivative::Value).unwrap(), 2.0);
        assert_eq!(b.eval(3, 2.0, Derivative::First).unwrap(), 9.0);
        assert_eq!(b.eval(3, 2.0, Derivative::Second).unwrap(), 12.0);
    }

    #[test]
    fn out_of_range_index() {
        let b = RecurrenceBasis::hermite(3).unwrap();
        assert!(b.eval(4, 0.0, Derivative::Value).is_err());
        assert!(Derivative::try_from(3).is_err());
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let b = RecurrenceBasis::custom(
            vec![0.3, -0.2, 0.5, 0.1, 0.0],
            vec![0.0, 0.7, 1.3, 2.0, 0.4],
        )
        .unwrap();
        let h = 1e-4;
        for k in 0..=5 {
            for &x in &[-1.3, 0.2, 0.9] {
                let f = |t| b.eval(k, t, Derivative::Value).unwrap();
                let d1 = (f(x + h) - f(x - h)) / (2.0 * h);
                let d2 = (f(x + h) - 2.0 * f(x) + f(x - h)) / (h * h);
                assert_abs_diff_eq!(b.eval(k, x, Derivative::First).unwrap(), d1, epsilon = 1e-6);
                assert_abs_diff_eq!(
                    b.eval(k, x, Derivative::Second).unwrap(),
                    d2,
                    epsilon = 1e-4
                );
            }
        }
    }

    #[test]
    fn monic_of_exact_degree() {
        // Leading coefficient via k-th finite difference / k!: p_k(x)/x^k -> 1.
        let b = RecurrenceBasis::hermite(8).unwrap();
        for k in 0..=8usize {
            let x = 1e5;
            let ratio = b.eval(k, x, Derivative::Value).unwrap() / x.powi(k as i32);
            assert_abs_diff_eq!(ratio, 1.0, epsilon = 1e-6);
        }
    }

    #[test]
    fn custom_validation() {
        assert!(RecurrenceBasis::custom(vec![0.0, 0.0], vec![1.0, 1.0]).is_err());
        assert!(RecurrenceBasis::custom(vec![0.0, 0.0], vec![0.0, -1.0]).is_err());
        assert!(RecurrenceBasis::custom(vec![0.0], vec![0.0, 1.0]).is_err());
        let a = RecurrenceBasis::custom(vec![0.0, 1.0], vec![0.0, 1.0]).unwrap();
        let b = RecurrenceBasis::custom(vec![0.0, 1.0], vec![0.0, 2.0]).unwrap();
        assert_ne!(a.id(), b.id());
    }
}
