use super::{MomentVector, RecurrenceBasis, RecurrenceCoeffs};
use crate::error::{Error, Result};

/// Relative cancellation level below which a new diagonal sigma entry is
/// treated as zero.
const CANCELLATION_TOL: f64 = 8.0 * f64::EPSILON;

/// Modified Chebyshev algorithm: turns `2N` modified moments against
/// `basis` into the recurrence coefficients `(alpha_k, beta_k)`, `k < N`,
/// of the monic family orthogonal with respect to the underlying measure.
///
/// The sigma table has `sigma[-1][q] = 0`, `sigma[0][q] = m_q` and
///
/// ```text
/// sigma[p][q] = sigma[p-1][q+1] - (alpha_{p-1} - a_q) sigma[p-1][q]
///             - beta_{p-1} sigma[p-2][q] + b_q sigma[p-1][q-1],   q = p ..= 2N-p-1
/// alpha_p = a_p - sigma[p-1][p] / sigma[p-1][p-1] + sigma[p][p+1] / sigma[p][p]
/// beta_p  = sigma[p][p] / sigma[p-1][p-1]
/// ```
///
/// Only two previous rows are kept.
pub fn modified_chebyshev(
    moments: &MomentVector,
    basis: &RecurrenceBasis,
) -> Result<RecurrenceCoeffs> {
    if moments.basis_id() != basis.id() {
        return Err(Error::invalid(format!(
            "moments taken against {:?}, basis is {:?}",
            moments.basis_id(),
            basis.id()
        )));
    }
    let m = moments.values();
    let len = m.len();
    let n = len / 2;
    if basis.order() + 1 < len {
        return Err(Error::invalid(format!(
            "{len} moments need a basis of order {}, got {}",
            len - 1,
            basis.order()
        )));
    }
    if !(m[0] > 0.0) {
        return Err(Error::DegenerateMeasure { index: 0 });
    }
    let a = basis.alpha();
    let b = basis.beta();

    let mut alpha = vec![0.0; n];
    let mut beta = vec![0.0; n];
    alpha[0] = a[0] + m[1] / m[0];

    let mut older = vec![0.0; len];
    let mut prev = m.to_vec();
    let mut cur = vec![0.0; len];

    for p in 1..n {
        let mut scale = 0.0;
        for q in p..len - p {
            let t0 = prev[q + 1];
            let t1 = (alpha[p - 1] - a[q]) * prev[q];
            let t2 = beta[p - 1] * older[q];
            let t3 = b[q] * prev[q - 1];
            cur[q] = t0 - t1 - t2 + t3;
            if q == p {
                scale = t0.abs() + t1.abs() + t2.abs() + t3.abs();
            }
        }
        let diag = cur[p];
        if !(diag > CANCELLATION_TOL * scale) || !diag.is_finite() {
            return Err(Error::DegenerateMeasure { index: p });
        }
        alpha[p] = a[p] - prev[p] / prev[p - 1] + cur[p + 1] / diag;
        beta[p] = diag / prev[p - 1];

        std::mem::swap(&mut older, &mut prev);
        std::mem::swap(&mut prev, &mut cur);
    }

    Ok(RecurrenceCoeffs { alpha, beta })
}
