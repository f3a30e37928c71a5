//! Geometric-rate (1/3) evaluation of `eta_a^{(k)}(t)`.
//!
//! The estimator is `(2/3) * sum_{n=0}^{N-1} c_{a,t,k}(n) / 3^n` with
//! coefficients built from forward differences of the discrete kernel
//! `log^k(a*l+1)/(a*l+1)^t`. Convergence is geometric with rate 1/3
//! uniformly in `t`, with the sharp coefficient bound
//! `|c(n)| <= 2 C(n+k,k) log^k(a*min(n,k)+1)` and the certified tail bound
//! it implies.
//!
//! Forward differencing amplifies rounding: each table entry carries an
//! absolute-value companion from which a per-coefficient rounding estimate
//! is derived. In binary64 the estimate overtakes the analytic bound itself
//! around n = 35..40, which is why the table is capped at 40 terms; the
//! double-double backend lifts the cap to 80.

use crate::dd::{dd_from_u128, Dd, DD_EPSILON};
use crate::error::{Error, Result};
use crate::series::{basic_discrete_raw, EtaPoint};

/// Largest table size in binary64 mode.
pub const MAX_TERMS_F64: usize = 40;
/// Largest table size with the double-double backend.
pub const MAX_TERMS_DD: usize = 80;

const F64_EPSILON: f64 = f64::EPSILON / 2.0;

/// Arithmetic carrying the difference table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Backend {
    #[default]
    Double,
    DoubleDouble,
}

impl Backend {
    fn max_terms(self) -> usize {
        match self {
            Backend::Double => MAX_TERMS_F64,
            Backend::DoubleDouble => MAX_TERMS_DD,
        }
    }

    fn epsilon(self) -> f64 {
        match self {
            Backend::Double => F64_EPSILON,
            Backend::DoubleDouble => DD_EPSILON,
        }
    }
}

/// Exact binomial coefficient, `None` on u128 overflow.
pub fn binomial_u128(n: u64, j: u64) -> Option<u128> {
    if j > n {
        return Some(0);
    }
    let j = j.min(n - j);
    let mut c: u128 = 1;
    for i in 1..=j {
        c = c.checked_mul((n - j + i) as u128)?;
        c /= i as u128; // exact: the prefix is C(n-j+i, i)
    }
    Some(c)
}

pub(crate) fn binomial_f64(n: u64, j: u64) -> f64 {
    match binomial_u128(n, j) {
        Some(c) => c as f64,
        None => {
            let j = j.min(n - j);
            let mut c = 1.0f64;
            for i in 1..=j {
                c *= (n - j + i) as f64 / i as f64;
            }
            c
        }
    }
}

/// `Delta^m seq(l)` by the binomial expansion
/// `sum_j C(m,j) (-1)^{m-j} seq(l+j)`. Negative `m` or `l` are
/// unrepresentable by the argument types.
pub fn forward_difference<F: Fn(u64) -> f64>(seq: F, m: u32, l: u64) -> f64 {
    let mut sum = Dd::ZERO;
    for j in 0..=m as u64 {
        let term = Dd::from(seq(l + j)).mul_f64(binomial_f64(m as u64, j));
        sum = if (m as u64 - j) % 2 == 0 { sum.add(term) } else { sum.sub(term) };
    }
    sum.to_f64()
}

/// The analytic coefficient bound `2 C(n+k,k) log^k(a*min(n,k)+1)`.
/// Collapses to the constant 2 at `k = 0`.
pub fn coeff_bound(a: f64, k: u32, n: usize) -> Result<f64> {
    if !a.is_finite() || a <= 0.0 {
        return Err(Error::Domain(format!("coeff_bound: a must be finite and > 0, got {a}")));
    }
    Ok(coeff_bound_raw(a, k, n))
}

fn coeff_bound_raw(a: f64, k: u32, n: usize) -> f64 {
    let cap = (n as u64).min(k as u64);
    2.0 * binomial_f64(n as u64 + k as u64, k as u64) * (a * cap as f64 + 1.0).ln().powi(k as i32)
}

/// Coefficients `c_{a,t,k}(0..n_terms)` of the geometric series, their
/// analytic bounds, and per-coefficient rounding estimates.
#[derive(Debug, Clone)]
pub struct CoeffTable {
    a: f64,
    t: f64,
    k: u32,
    backend: Backend,
    coeffs: Vec<f64>,
    bounds: Vec<f64>,
    rounding: Vec<f64>,
}

impl CoeffTable {
    pub fn build(p: &EtaPoint, k: u32, n_terms: usize) -> Result<CoeffTable> {
        CoeffTable::build_with(p, k, n_terms, Backend::Double)
    }

    pub fn build_with(p: &EtaPoint, k: u32, n_terms: usize, backend: Backend) -> Result<CoeffTable> {
        if n_terms == 0 || n_terms > backend.max_terms() {
            return Err(Error::Domain(format!(
                "table size must be in 1..={}, got {n_terms}",
                backend.max_terms()
            )));
        }
        let (a, t) = (p.a(), p.t());
        let (coeffs, rounding) = match backend {
            Backend::Double => table_f64(a, t, k, n_terms),
            Backend::DoubleDouble => table_dd(a, t, k, n_terms),
        };
        let bounds = (0..n_terms).map(|n| coeff_bound_raw(a, k, n)).collect();
        Ok(CoeffTable { a, t, k, backend, coeffs, bounds, rounding })
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    pub fn backend(&self) -> Backend {
        self.backend
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn bounds(&self) -> &[f64] {
        &self.bounds
    }

    /// Estimated rounding error carried by `coeffs[n]`.
    pub fn rounding_estimate(&self, n: usize) -> f64 {
        self.rounding[n]
    }

    /// Coefficient `n`, refused when its rounding estimate exceeds the
    /// analytic bound (the value could violate the bound from noise alone).
    pub fn coeff_checked(&self, n: usize) -> Result<f64> {
        if self.rounding[n] > self.bounds[n] {
            return Err(Error::PrecisionLoss(format!(
                "coefficient n={n} (a={}, t={}, k={}): rounding estimate {:.3e} exceeds analytic bound {:.3e}",
                self.a, self.t, self.k, self.rounding[n], self.bounds[n]
            )));
        }
        Ok(self.coeffs[n])
    }
}

fn table_f64(a: f64, t: f64, k: u32, n_terms: usize) -> (Vec<f64>, Vec<f64>) {
    let mut tri: Vec<Vec<f64>> = Vec::with_capacity(n_terms);
    let mut amp: Vec<Vec<f64>> = Vec::with_capacity(n_terms);
    tri.push((0..n_terms).map(|l| basic_discrete_raw(a, t, k, l as u64)).collect());
    amp.push(tri[0].iter().map(|x| x.abs()).collect());
    for m in 1..n_terms {
        let (prev, aprev) = (&tri[m - 1], &amp[m - 1]);
        let row: Vec<f64> = (0..n_terms - m).map(|l| prev[l + 1] - prev[l]).collect();
        let arow: Vec<f64> = (0..n_terms - m).map(|l| aprev[l + 1] + aprev[l]).collect();
        tri.push(row);
        amp.push(arow);
    }
    let mut coeffs = Vec::with_capacity(n_terms);
    let mut rounding = Vec::with_capacity(n_terms);
    for n in 0..n_terms {
        let mut sum = Dd::ZERO;
        let mut cond = 0.0f64;
        for l in 0..=n {
            let w = binomial_f64(n as u64, l as u64);
            sum = sum.add(Dd::from(tri[n - l][l]).mul_f64(w));
            cond += w * amp[n - l][l];
        }
        let sgn = if (n + k as usize) % 2 == 0 { 1.0 } else { -1.0 };
        coeffs.push(sgn * sum.to_f64());
        rounding.push(F64_EPSILON * cond);
    }
    (coeffs, rounding)
}

fn table_dd(a: f64, t: f64, k: u32, n_terms: usize) -> (Vec<f64>, Vec<f64>) {
    let kernel = |l: u64| -> Dd {
        let base = Dd::from(a).mul_f64(l as f64).add_f64(1.0);
        let lam = base.ln();
        lam.powi(k).mul(lam.mul_f64(-t).exp())
    };
    let mut tri: Vec<Vec<Dd>> = Vec::with_capacity(n_terms);
    let mut amp: Vec<Vec<f64>> = Vec::with_capacity(n_terms);
    tri.push((0..n_terms).map(|l| kernel(l as u64)).collect());
    amp.push(tri[0].iter().map(|x| x.to_f64().abs()).collect());
    for m in 1..n_terms {
        let (prev, aprev) = (&tri[m - 1], &amp[m - 1]);
        let row: Vec<Dd> = (0..n_terms - m).map(|l| prev[l + 1].sub(prev[l])).collect();
        let arow: Vec<f64> = (0..n_terms - m).map(|l| aprev[l + 1] + aprev[l]).collect();
        tri.push(row);
        amp.push(arow);
    }
    let mut coeffs = Vec::with_capacity(n_terms);
    let mut rounding = Vec::with_capacity(n_terms);
    for n in 0..n_terms {
        let mut sum = Dd::ZERO;
        let mut cond = 0.0f64;
        for l in 0..=n {
            // binomials kept exact: rounding them in f64 would reintroduce
            // the 3^n amplification the dd backend exists to remove
            let w = binomial_u128(n as u64, l as u64).expect("C(n,l) fits u128 for n < 128");
            sum = sum.add(tri[n - l][l].mul(dd_from_u128(w)));
            cond += w as f64 * amp[n - l][l];
        }
        let sgn = if (n + k as usize) % 2 == 0 { 1.0 } else { -1.0 };
        coeffs.push(sgn * sum.to_f64());
        rounding.push(DD_EPSILON * cond);
    }
    (coeffs, rounding)
}

/// Single coefficient `c_{a,t,k}(n)`, built from a fresh table.
pub fn coeff(a: f64, t: f64, k: u32, n: usize) -> Result<f64> {
    let p = EtaPoint::new(a, t)?;
    CoeffTable::build(&p, k, n + 1)?.coeff_checked(n)
}

/// Truncated geometric estimator together with its certified tail bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncationReport {
    pub value: f64,
    pub truncation_bound: f64,
    pub n_terms: usize,
}

/// `eta_a^{(k)}(t)` from the first `n_terms` geometric coefficients
/// (binary64 tables, `n_terms <= 40`).
///
/// `|value - eta_a^{(k)}(t)| <= truncation_bound` up to accumulated
/// rounding, which is tracked and refused when it passes 1e-10 of the
/// result.
pub fn eta_deriv_fast(p: &EtaPoint, k: u32, n_terms: usize) -> Result<TruncationReport> {
    eta_deriv_fast_with(p, k, n_terms, Backend::Double)
}

pub fn eta_deriv_fast_with(p: &EtaPoint, k: u32, n_terms: usize, backend: Backend) -> Result<TruncationReport> {
    let table = CoeffTable::build_with(p, k, n_terms, backend)?;
    let mut sum = Dd::ZERO;
    let mut rounding = 0.0f64;
    let mut p3 = 1.0f64;
    for n in 0..n_terms {
        sum = sum.add(Dd::from(table.coeffs[n]).div(Dd::from(p3)));
        rounding += table.rounding[n] / p3;
        p3 *= 3.0;
    }
    let value = (2.0 / 3.0) * sum.to_f64();
    let rounding = (2.0 / 3.0) * rounding + backend.epsilon() * value.abs() * n_terms as f64;
    if rounding > 1e-10 * value.abs() {
        return Err(Error::PrecisionLoss(format!(
            "accumulated rounding {rounding:.3e} exceeds 1e-10 of the estimate {value:.6e} \
             (a={}, t={}, k={k}, N={n_terms})",
            p.a(),
            p.t()
        )));
    }
    Ok(TruncationReport { value, truncation_bound: truncation_tail(p.a(), k, n_terms), n_terms })
}

/// Tail bound `(4/3) sum_{n>=N} 3^{-n} C(n+k,k) log^k(a*min(n,k)+1)`,
/// summed until increments drop below 1e-3 of the running tail, then
/// inflated by 0.2%.
fn truncation_tail(a: f64, k: u32, n_from: usize) -> f64 {
    let mut tail = 0.0f64;
    let mut n = n_from;
    let mut w = 3.0f64.powi(-(n as i32));
    loop {
        let cap = (n as u64).min(k as u64);
        let term = w * binomial_f64(n as u64 + k as u64, k as u64) * (a * cap as f64 + 1.0).ln().powi(k as i32);
        tail += term;
        if term < 1e-3 * tail {
            break;
        }
        n += 1;
        w /= 3.0;
    }
    tail * (4.0 / 3.0) * 1.002
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::series::SeriesAccuracy;

    #[test]
    fn binomials_are_exact() {
        assert_eq!(binomial_u128(0, 0), Some(1));
        assert_eq!(binomial_u128(5, 2), Some(10));
        assert_eq!(binomial_u128(5, 7), Some(0));
        assert_eq!(binomial_u128(79, 39), Some(53753604366668088230810));
        assert_eq!(binomial_f64(4, 1), 4.0);
    }

    #[test]
    fn forward_difference_polynomials() {
        assert_eq!(forward_difference(|l| l as f64, 1, 0), 1.0);
        assert_eq!(forward_difference(|l| l as f64, 2, 0), 0.0);
        assert_eq!(forward_difference(|l| 3.0, 0, 5), 3.0);
    }

    #[test]
    fn coeff_trivial_values() {
        assert_eq!(coeff(1.0, 1.0, 0, 0).unwrap(), 1.0);
        assert_eq!(coeff(1.0, 1.0, 1, 0).unwrap(), 0.0);
    }

    #[test]
    fn coeff_bound_values() {
        assert_eq!(coeff_bound(1.0, 0, 7).unwrap(), 2.0);
        let b = coeff_bound(1.0, 1, 3).unwrap();
        assert!((b - 8.0 * std::f64::consts::LN_2).abs() < 1e-12);
        let b = coeff_bound(2.0, 2, 1).unwrap();
        let expect = 6.0 * 3.0f64.ln().powi(2); // 2 C(3,2) log^2(3), min(n,k) = 1
        assert!((b - expect).abs() < 1e-12);
        assert!((b - 7.2417).abs() < 1e-3);
        assert!(coeff_bound(0.0, 0, 0).is_err());
    }

    #[test]
    fn partial_sum_matches_reported_value() {
        // (2/3) sum_{n<5} c(n)/3^n at (a,t) = (1,1)
        let mut s = 0.0;
        let mut p3 = 1.0;
        for n in 0..5 {
            s += coeff(1.0, 1.0, 0, n).unwrap() / p3;
            p3 *= 3.0;
        }
        assert!((2.0 / 3.0 * s - 0.69300412).abs() < 5e-9);
    }

    #[test]
    fn estimator_hits_log2() {
        let p = EtaPoint::new(1.0, 1.0).unwrap();
        let r = eta_deriv_fast(&p, 0, 20).unwrap();
        assert!((r.value - std::f64::consts::LN_2).abs() < 3.1e-11);
        assert!((r.value - std::f64::consts::LN_2).abs() <= r.truncation_bound);
        let r = eta_deriv_fast(&p, 1, 10).unwrap();
        assert!((r.value - 0.15986890374243097).abs() < 4.6e-7);
    }

    #[test]
    fn size_caps() {
        let p = EtaPoint::new(1.0, 1.0).unwrap();
        assert!(eta_deriv_fast(&p, 0, 0).is_err());
        assert!(eta_deriv_fast(&p, 0, 41).is_err());
        assert!(eta_deriv_fast_with(&p, 0, 41, Backend::DoubleDouble).is_ok());
        assert!(eta_deriv_fast_with(&p, 0, 81, Backend::DoubleDouble).is_err());
        assert!(coeff(1.0, 1.0, 0, 40).is_err());
    }

    #[test]
    fn dd_backend_reaches_deep_tables() {
        let p = EtaPoint::new(1.0, 1.0).unwrap();
        let r = eta_deriv_fast_with(&p, 0, 60, Backend::DoubleDouble).unwrap();
        assert!((r.value - std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn precision_guard_trips_on_deep_f64_coefficients() {
        // binary64 difference tables lose the coefficients around n = 35
        // for slowly decaying kernels
        let err = coeff(0.5, 0.5, 0, 39).unwrap_err();
        assert!(matches!(err, Error::PrecisionLoss(_)));
        assert!(coeff(0.5, 0.5, 0, 30).is_ok());
    }

    #[test]
    fn fast_agrees_with_direct_where_direct_converges() {
        let p = EtaPoint::new(2.0, 4.0).unwrap();
        let direct = crate::series::eta_deriv_direct(&p, 1, &SeriesAccuracy::default());
        assert!(direct.converged);
        let fast = eta_deriv_fast(&p, 1, 30).unwrap();
        assert!((fast.value - direct.value).abs() <= fast.truncation_bound + direct.error_estimate + 1e-12);
    }
}
