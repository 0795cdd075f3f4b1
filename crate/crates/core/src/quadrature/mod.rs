//! Gauss-Christoffel quadrature from modified moments.
//!
//! Pipeline: modified moments `m_k = <nu, p_k>` against a reference
//! recurrence basis, then [`modified_chebyshev`] for the recurrence of the
//! measure's own orthogonal family, then the Jacobi matrix and its
//! eigen decomposition. Nodes are the eigenvalues; weights are `m_0` times
//! the squared first eigenvector components.

mod basis;
mod chebyshev;
mod eigen;

pub use basis::{BasisId, Derivative, RecurrenceBasis};
pub use chebyshev::modified_chebyshev;
pub use eigen::{tridiag_eigen, TridiagonalEigen, MAX_SWEEPS};

use crate::error::{Error, Result};

/// Weights below this fraction of the total mass are flagged in diagnostics.
pub const SMALL_WEIGHT_RATIO: f64 = 1e-14;

/// Modified moments `m_0 .. m_{2N-1}` of a measure against a reference basis.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentVector {
    values: Vec<f64>,
    basis: BasisId,
}

impl MomentVector {
    pub fn new(values: Vec<f64>, basis: BasisId) -> Result<Self> {
        if values.is_empty() || !values.len().is_multiple_of(2) {
            return Err(Error::invalid(format!(
                "moment vector length must be a positive even number, got {}",
                values.len()
            )));
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("moment {k} is not finite")));
        }
        if !(values[0] > 0.0) {
            return Err(Error::DegenerateMeasure { index: 0 });
        }
        Ok(Self { values, basis })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn basis_id(&self) -> BasisId {
        self.basis
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Number of Gauss points these moments determine.
    pub fn gauss_points(&self) -> usize {
        self.values.len() / 2
    }

    pub fn mass(&self) -> f64 {
        self.values[0]
    }

    /// Leading `2 * n_points` moments, i.e. the data for a smaller rule.
    pub fn truncated(&self, n_points: usize) -> Result<Self> {
        if n_points == 0 || 2 * n_points > self.values.len() {
            return Err(Error::invalid(format!(
                "cannot truncate {} moments to a {n_points}-point rule",
                self.values.len()
            )));
        }
        Ok(Self {
            values: self.values[..2 * n_points].to_vec(),
            basis: self.basis,
        })
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
}

/// Recurrence coefficients `(alpha_k, beta_k)`, `k < N`, of the monic
/// polynomials orthogonal with respect to a measure. `beta_0 = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct RecurrenceCoeffs {
    alpha: Vec<f64>,
    beta: Vec<f64>,
}

impl RecurrenceCoeffs {
    pub fn new(alpha: Vec<f64>, beta: Vec<f64>) -> Result<Self> {
        if alpha.is_empty() || alpha.len() != beta.len() {
            return Err(Error::invalid(
                "alpha/beta must be non-empty with equal length",
            ));
        }
        Ok(Self { alpha, beta })
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn beta(&self) -> &[f64] {
        &self.beta
    }

    /// Symmetric tridiagonal Jacobi matrix with diagonal `alpha` and
    /// off-diagonal `sqrt(beta_1..)`.
    pub fn jacobi(&self) -> Result<JacobiMatrix> {
        build_jacobi(self)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct JacobiMatrix {
    diagonal: Vec<f64>,
    off_diagonal: Vec<f64>,
}

impl JacobiMatrix {
    pub fn diagonal(&self) -> &[f64] {
        &self.diagonal
    }

    pub fn off_diagonal(&self) -> &[f64] {
        &self.off_diagonal
    }

    pub fn dim(&self) -> usize {
        self.diagonal.len()
    }
}

pub fn build_jacobi(coeffs: &RecurrenceCoeffs) -> Result<JacobiMatrix> {
    if let Some(k) = coeffs.beta.iter().skip(1).position(|&b| !(b > 0.0)) {
        return Err(Error::DegenerateMeasure { index: k + 1 });
    }
    Ok(JacobiMatrix {
        diagonal: coeffs.alpha.clone(),
        off_diagonal: coeffs.beta[1..].iter().map(|b| b.sqrt()).collect(),
    })
}

/// Weighted point set `sum_i w_i delta_{x_i}` with strictly increasing nodes
/// and strictly positive weights.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteMeasure {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl DiscreteMeasure {
    pub fn new(nodes: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if nodes.is_empty() || nodes.len() != weights.len() {
            return Err(Error::invalid(
                "nodes and weights must be non-empty with equal length",
            ));
        }
        if nodes.iter().any(|x| !x.is_finite()) {
            return Err(Error::NumericalFailure("non-finite node".into()));
        }
        if let Some(i) = nodes.windows(2).position(|w| !(w[0] < w[1])) {
            return Err(Error::DegenerateMeasure { index: i + 1 });
        }
        if let Some(i) = weights.iter().position(|&w| !(w > 0.0 && w.is_finite())) {
            return Err(Error::DegenerateMeasure { index: i });
        }
        Ok(Self { nodes, weights })
    }

    /// Single atom of unit mass at `x`.
    pub fn dirac(x: f64) -> Self {
        Self {
            nodes: vec![x],
            weights: vec![1.0],
        }
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn mass(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// `sum_i w_i f(x_i)`.
    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }

    /// Raw moment `<nu, x^p>`.
    pub fn raw_moment(&self, p: u32) -> f64 {
        self.integrate(|x| x.powi(p as i32))
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.nodes.iter().copied().zip(self.weights.iter().copied())
    }
}

/// Side information from a Gauss-Christoffel computation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureDiagnostics {
    /// Number of weights below `SMALL_WEIGHT_RATIO * m_0` (kept, not removed).
    pub small_weights: usize,
    pub min_weight_ratio: f64,
}

/// N-point Gauss rule matching the 2N given modified moments.
pub fn gauss_christoffel(
    moments: &MomentVector,
    basis: &RecurrenceBasis,
) -> Result<DiscreteMeasure> {
    gauss_christoffel_with_diagnostics(moments, basis).map(|(m, _)| m)
}

pub fn gauss_christoffel_with_diagnostics(
    moments: &MomentVector,
    basis: &RecurrenceBasis,
) -> Result<(DiscreteMeasure, QuadratureDiagnostics)> {
    let coeffs = modified_chebyshev(moments, basis)?;
    rule_from_recurrence(&coeffs, moments.mass())
}

/// Golub-Welsch step: nodes and weights from recurrence coefficients and
/// the total mass.
pub fn rule_from_recurrence(
    coeffs: &RecurrenceCoeffs,
    mass: f64,
) -> Result<(DiscreteMeasure, QuadratureDiagnostics)> {
    let jacobi = build_jacobi(coeffs)?;
    let eig = tridiag_eigen(&jacobi)?;
    let weights: Vec<f64> = eig.first_components.iter().map(|v| mass * v * v).collect();
    let min_weight_ratio = weights.iter().fold(f64::INFINITY, |a, &w| a.min(w)) / mass;
    let small_weights = weights
        .iter()
        .filter(|&&w| w < SMALL_WEIGHT_RATIO * mass)
        .count();
    if small_weights > 0 {
        log::debug!("{small_weights} Gauss weights below {SMALL_WEIGHT_RATIO:e} of the mass");
    }
    let measure = DiscreteMeasure::new(eig.eigenvalues, weights)?;
    Ok((
        measure,
        QuadratureDiagnostics {
            small_weights,
            min_weight_ratio,
        },
    ))
}

/// `m_k = sum_i w_i p_k(x_i)` for `k < count`.
pub fn measure_modified_moments(
    measure: &DiscreteMeasure,
    basis: &RecurrenceBasis,
    count: usize,
) -> Result<MomentVector> {
    if count > basis.order() + 1 {
        return Err(Error::invalid(format!(
            "{count} moments need a basis of order {}",
            count.saturating_sub(1)
        )));
    }
    let values = weighted_basis_sums(measure.nodes(), measure.weights(), basis, count);
    MomentVector::new(values, basis.id())
}

/// `sum_i w_i p_k(x_i)` over an arbitrary (possibly unsorted) atom set.
pub(crate) fn weighted_basis_sums(
    nodes: &[f64],
    weights: &[f64],
    basis: &RecurrenceBasis,
    count: usize,
) -> Vec<f64> {
    let mut acc = vec![0.0; count];
    let mut vals = vec![0.0; count];
    for (&x, &w) in nodes.iter().zip(weights) {
        basis.eval_into(x, &mut vals);
        for (a, v) in acc.iter_mut().zip(&vals) {
            *a += w * v;
        }
    }
    acc
}

/// N-point Gauss-Hermite rule for the standard normal law.
pub fn gauss_hermite_rule(n_points: usize) -> Result<DiscreteMeasure> {
    if n_points == 0 {
        return Err(Error::invalid("a Gauss rule needs at least one point"));
    }
    let coeffs = RecurrenceCoeffs::new(
        vec![0.0; n_points],
        (0..n_points).map(|k| k as f64).collect(),
    )?;
    rule_from_recurrence(&coeffs, 1.0).map(|(m, _)| m)
}

/// Exact modified moments of `N(mean, variance)` against `basis`, via an
/// affinely mapped Gauss-Hermite rule with enough points to integrate
/// every basis polynomial of index `< count` exactly.
pub fn gaussian_modified_moments(
    mean: f64,
    variance: f64,
    basis: &RecurrenceBasis,
    count: usize,
) -> Result<MomentVector> {
    if !(variance > 0.0) || !mean.is_finite() || !variance.is_finite() {
        return Err(Error::invalid(
            "Gaussian law needs finite mean and positive variance",
        ));
    }
    let rule = gauss_hermite_rule(count.div_ceil(2).max(1))?;
    let sd = variance.sqrt();
    let nodes: Vec<f64> = rule.nodes().iter().map(|z| mean + sd * z).collect();
    let total = rule.mass();
    let weights: Vec<f64> = rule.weights().iter().map(|w| w / total).collect();
    let mut values = weighted_basis_sums(&nodes, &weights, basis, count);
    values[0] = 1.0;
    MomentVector::new(values, basis.id())
}

/// Largest component-wise discrepancy between `target` and the modified
/// moments of `measure`, each scaled by the absolute moment
/// `sum_i w_i |p_k(x_i)|` of the rule (floored at the total mass).
pub fn round_trip_error(
    measure: &DiscreteMeasure,
    basis: &RecurrenceBasis,
    target: &MomentVector,
) -> f64 {
    let count = target.len();
    let mut vals = vec![0.0; count];
    let mut signed = vec![0.0; count];
    let mut absolute = vec![0.0; count];
    for (x, w) in measure.iter() {
        basis.eval_into(x, &mut vals);
        for k in 0..count {
            signed[k] += w * vals[k];
            absolute[k] += w * vals[k].abs();
        }
    }
    let mass = measure.mass();
    (0..count)
        .map(|k| (signed[k] - target.values()[k]).abs() / absolute[k].max(mass))
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn hermite_std_normal(n: usize) -> (RecurrenceBasis, MomentVector) {
        let basis = RecurrenceBasis::hermite_for_points(n).unwrap();
        let mut v = vec![0.0; 2 * n];
        v[0] = 1.0;
        let m = MomentVector::new(v, basis.id()).unwrap();
        (basis, m)
    }

    #[test]
    fn build_jacobi_examples() {
        let j = RecurrenceCoeffs::new(vec![0.0, 0.0, 0.0], vec![0.0, 1.0, 2.0])
            .unwrap()
            .jacobi()
            .unwrap();
        assert_eq!(j.diagonal(), &[0.0, 0.0, 0.0]);
        assert_eq!(j.off_diagonal(), &[1.0, 2f64.sqrt()]);
        let j = RecurrenceCoeffs::new(vec![0.0, 0.0], vec![0.0, 1.0])
            .unwrap()
            .jacobi()
            .unwrap();
        assert_eq!(j.off_diagonal(), &[1.0]);
        let j = RecurrenceCoeffs::new(vec![4.2], vec![0.0])
            .unwrap()
            .jacobi()
            .unwrap();
        assert_eq!(j.diagonal(), &[4.2]);
        assert!(j.off_diagonal().is_empty());
        let bad = RecurrenceCoeffs::new(vec![0.0, 0.0], vec![0.0, -0.5]).unwrap();
        assert_eq!(
            bad.jacobi().unwrap_err(),
            Error::DegenerateMeasure { index: 1 }
        );
    }

    #[test]
    fn gauss_hermite_two_and_three() {
        let (b, m) = hermite_std_normal(2);
        let rule = gauss_christoffel(&m, &b).unwrap();
        assert_abs_diff_eq!(rule.nodes()[0], -1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(rule.nodes()[1], 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(rule.weights()[0], 0.5, epsilon = 1e-14);

        let (b, m) = hermite_std_normal(3);
        let rule = gauss_christoffel(&m, &b).unwrap();
        let r3 = 3f64.sqrt();
        for (x, want) in rule.nodes().iter().zip([-r3, 0.0, r3]) {
            assert_abs_diff_eq!(*x, want, epsilon = 1e-14);
        }
        for (w, want) in rule.weights().iter().zip([1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0]) {
            assert_abs_diff_eq!(*w, want, epsilon = 1e-14);
        }
    }

    #[test]
    fn two_atoms_recovered_from_power_moments() {
        let b = RecurrenceBasis::monomial_for_points(2).unwrap();
        let m = MomentVector::new(vec![1.0, 0.0, 1.0, 0.0], b.id()).unwrap();
        let rule = gauss_christoffel(&m, &b).unwrap();
        assert_abs_diff_eq!(rule.nodes()[0], -1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(rule.nodes()[1], 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(rule.weights()[0], 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(rule.weights()[1], 0.5, epsilon = 1e-15);
    }

    #[test]
    fn hermite_moments_of_dirac_and_gauss_rule() {
        let b = RecurrenceBasis::hermite(5).unwrap();
        let m = measure_modified_moments(&DiscreteMeasure::dirac(0.0), &b, 4).unwrap();
        assert_eq!(m.values(), &[1.0, 0.0, -1.0, 0.0]);

        let three = gauss_hermite_rule(3).unwrap();
        let m = measure_modified_moments(&three, &b, 6).unwrap();
        assert_abs_diff_eq!(m.values()[0], 1.0, epsilon = 1e-14);
        for v in &m.values()[1..] {
            assert_abs_diff_eq!(*v, 0.0, epsilon = 1e-13);
        }
        assert!(measure_modified_moments(&three, &b, 7).is_err());
    }

    #[test]
    fn mass_is_first_moment() {
        let mu = DiscreteMeasure::new(vec![-0.4, 1.0, 2.5], vec![0.2, 0.7, 1.4]).unwrap();
        let b = RecurrenceBasis::hermite(3).unwrap();
        let m = measure_modified_moments(&mu, &b, 4).unwrap();
        assert_abs_diff_eq!(m.values()[0], 2.3, epsilon = 1e-15);
    }

    #[test]
    fn gaussian_moments_shifted() {
        // E[He_k(X)] for X ~ N(mu, 1) equals mu^k.
        let b = RecurrenceBasis::hermite(9).unwrap();
        let m = gaussian_modified_moments(0.6, 1.0, &b, 10).unwrap();
        for (k, v) in m.values().iter().enumerate() {
            assert_abs_diff_eq!(*v, 0.6f64.powi(k as i32), epsilon = 1e-12);
        }
    }

    #[test]
    fn ill_conditioning_of_power_moments() {
        // N(0,1), N = 8. Each moment vector gets the same component-wise
        // relative perturbation; the error is the forward error of the
        // recovered rule against the exact Gauss-Hermite rule.
        let n = 8;
        let eps = 1e-10;
        let exact = gauss_hermite_rule(n).unwrap();
        let route_error = |basis: &RecurrenceBasis| {
            let m = gaussian_modified_moments(0.0, 1.0, basis, 2 * n).unwrap();
            let perturbed: Vec<f64> = m
                .values()
                .iter()
                .enumerate()
                .map(|(k, v)| v * (1.0 + if k % 3 == 1 { -eps } else { eps }))
                .collect();
            let pm = MomentVector::new(perturbed, basis.id()).unwrap();
            match gauss_christoffel(&pm, basis) {
                Ok(rule) => rule
                    .iter()
                    .zip(exact.iter())
                    .map(|((x, w), (xe, we))| (x - xe).abs().max((w - we).abs() / we))
                    .fold(0.0, f64::max),
                Err(_) => f64::INFINITY,
            }
        };
        let herr = route_error(&RecurrenceBasis::hermite_for_points(n).unwrap());
        let rerr = route_error(&RecurrenceBasis::monomial_for_points(n).unwrap());
        assert!(herr < 10.0 * eps, "hermite error {herr}");
        assert!(rerr > herr, "raw {rerr} vs hermite {herr}");
        assert!(
            rerr > 100.0 * eps,
            "raw error {rerr} shows no amplification"
        );
    }

    fn mixture_moments(
        comps: &[(f64, f64, f64)],
        basis: &RecurrenceBasis,
        count: usize,
    ) -> MomentVector {
        let total: f64 = comps.iter().map(|c| c.0).sum();
        let mut acc = vec![0.0; count];
        for &(w, mean, sd) in comps {
            let m = gaussian_modified_moments(mean, sd * sd, basis, count).unwrap();
            for (a, v) in acc.iter_mut().zip(m.values()) {
                *a += w / total * v;
            }
        }
        MomentVector::new(acc, basis.id()).unwrap()
    }

    proptest! {
        #[test]
        fn round_trip_and_rule_invariants(
            n in 1usize..=10,
            comps in prop::collection::vec((0.1f64..1.0, -1.5f64..1.5, 0.5f64..1.5), 3..=12),
        ) {
            let basis = RecurrenceBasis::hermite_for_points(n).unwrap();
            let m = mixture_moments(&comps, &basis, 2 * n);
            let rule = gauss_christoffel(&m, &basis).unwrap();
            prop_assert!(rule.nodes().windows(2).all(|w| w[0] < w[1]));
            prop_assert!(rule.weights().iter().all(|&w| w > 0.0));
            prop_assert!((rule.mass() - m.mass()).abs() <= 1e-12 * m.mass());
            prop_assert!(round_trip_error(&rule, &basis, &m) < 1e-10);
        }

        #[test]
        fn first_row_is_unit(alpha in prop::collection::vec(-3.0f64..3.0, 1..12), seed in 0.1f64..4.0) {
            let n = alpha.len();
            let beta: Vec<f64> = (0..n).map(|k| if k == 0 { 0.0 } else { seed + k as f64 * 0.37 }).collect();
            let eig = tridiag_eigen(&RecurrenceCoeffs::new(alpha, beta).unwrap().jacobi().unwrap()).unwrap();
            let s: f64 = eig.first_components.iter().map(|v| v * v).sum();
            prop_assert!((s - 1.0).abs() < 1e-12);
        }
    }
}
