//! Direct evaluation of `eta_a(t) = sum_{m>=0} (-1)^m (a*m+1)^{-t}` and of
//! its term-by-term derivative series
//! `eta_a^{(k)}(t) = sum_{m>=0} (-1)^{m+k} log^k(a*m+1) (a*m+1)^{-t}`.
//!
//! Values are raw alternating partial sums with compensated (double-double)
//! accumulation. The alternating-series remainder (magnitude of the first
//! omitted term) is reported as `error_estimate` once the term magnitudes
//! are past their analytic peak; before that no remainder bound exists and
//! the estimate is `+inf`.

use crate::dd::Dd;
use crate::error::{Error, Result};

/// A validated `(a, t)` parameter pair, both strictly positive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EtaPoint {
    a: f64,
    t: f64,
}

impl EtaPoint {
    pub fn new(a: f64, t: f64) -> Result<Self> {
        if !a.is_finite() || a <= 0.0 {
            return Err(Error::Domain(format!("scale parameter a must be finite and > 0, got {a}")));
        }
        if !t.is_finite() || t <= 0.0 {
            return Err(Error::Domain(format!("argument t must be finite and > 0, got {t}")));
        }
        Ok(EtaPoint { a, t })
    }

    #[inline]
    pub fn a(&self) -> f64 {
        self.a
    }

    #[inline]
    pub fn t(&self) -> f64 {
        self.t
    }
}

/// Summation budget: term cap and absolute tolerance on the first omitted
/// term. The default (10^5 terms, 1e-15) is the reference configuration all
/// tables and figures are produced with.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesAccuracy {
    max_terms: usize,
    tol: f64,
}

impl SeriesAccuracy {
    pub fn new(max_terms: usize, tol: f64) -> Result<Self> {
        if max_terms == 0 {
            return Err(Error::Domain("max_terms must be >= 1".into()));
        }
        if !tol.is_finite() || tol <= 0.0 {
            return Err(Error::Domain(format!("tol must be finite and > 0, got {tol}")));
        }
        Ok(SeriesAccuracy { max_terms, tol })
    }

    #[inline]
    pub fn max_terms(&self) -> usize {
        self.max_terms
    }

    #[inline]
    pub fn tol(&self) -> f64 {
        self.tol
    }
}

impl Default for SeriesAccuracy {
    fn default() -> Self {
        SeriesAccuracy { max_terms: 100_000, tol: 1e-15 }
    }
}

/// Partial sum plus its certification.
///
/// `converged` means the first omitted term fell below the requested
/// tolerance inside the monotone-decay regime; `error_estimate` is then a
/// rigorous bound on `|value - limit|`. When the term peak was never
/// passed, `error_estimate` is `+inf`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesResult {
    pub value: f64,
    pub error_estimate: f64,
    pub terms_used: usize,
    pub converged: bool,
}

/// Scaled logistic function `f_a(x) = 1/(1+exp(-a x))` and its first two
/// derivatives:
/// order 1: `a f (1-f)`, order 2: `a^2 f (1-f) (1-2f)`.
pub fn logistic(a: f64, x: f64, order: u8) -> Result<f64> {
    if !a.is_finite() || a <= 0.0 {
        return Err(Error::Domain(format!("logistic: a must be finite and > 0, got {a}")));
    }
    if !x.is_finite() || x < 0.0 {
        return Err(Error::Domain(format!("logistic: x must be finite and >= 0, got {x}")));
    }
    if order > 2 {
        return Err(Error::Domain(format!("logistic: order must be 0, 1 or 2, got {order}")));
    }
    Ok(logistic_raw(a, x, order))
}

#[inline]
pub(crate) fn logistic_raw(a: f64, x: f64, order: u8) -> f64 {
    let f = 1.0 / (1.0 + (-a * x).exp());
    match order {
        0 => f,
        1 => a * f * (1.0 - f),
        _ => a * a * f * (1.0 - f) * (1.0 - 2.0 * f),
    }
}

/// Index past which `log^k(a*m+1) (a*m+1)^{-t}` is decreasing in `m`.
/// The magnitude peaks where `a*m+1 = e^{k/t}`.
pub(crate) fn monotone_onset(a: f64, t: f64, k: u32) -> usize {
    if k == 0 {
        return 0;
    }
    let e = (k as f64 / t).exp();
    if !e.is_finite() {
        return usize::MAX;
    }
    let m = ((e - 1.0) / a).ceil();
    if !(m < 9.0e18) {
        usize::MAX
    } else {
        m as usize
    }
}

/// One term of the k-th derivative series, as a compensated pair plus its
/// rounded magnitude. Shared by every summation path so that algebraically
/// identical series agree to well below 1e-12.
#[inline]
pub(crate) fn term_parts(a: f64, t: f64, m: usize) -> (f64, f64) {
    let lam = (a * m as f64 + 1.0).ln();
    (lam, (-t * lam).exp())
}

#[inline]
pub(crate) fn term_magnitude(lam: f64, b: f64, k: u32) -> Dd {
    if k == 0 {
        Dd::from(b)
    } else {
        Dd::from(lam).powi(k).mul_f64(b)
    }
}

/// `eta_a(t)` by the direct alternating series. The limit lies strictly in
/// (1/2, 1); the returned partial sum approximates it to `error_estimate`.
pub fn eta_direct(p: &EtaPoint, acc: &SeriesAccuracy) -> SeriesResult {
    eta_deriv_direct(p, 0, acc)
}

/// `eta_a^{(k)}(t)` by the term-by-term differentiated series. For `k = 1`
/// the limit is > 0, for `k = 2` it is < 0.
pub fn eta_deriv_direct(p: &EtaPoint, k: u32, acc: &SeriesAccuracy) -> SeriesResult {
    let (a, t) = (p.a(), p.t());
    let onset = monotone_onset(a, t, k);
    let mut sum = Dd::ZERO;
    let mut m = 0usize;
    while m < acc.max_terms() {
        let (lam, b) = term_parts(a, t, m);
        let mag = term_magnitude(lam, b, k);
        let mag_f = mag.to_f64();
        if m > onset && mag_f <= acc.tol() {
            return SeriesResult { value: sum.to_f64(), error_estimate: mag_f, terms_used: m, converged: true };
        }
        sum = if (m + k as usize) % 2 == 0 { sum.add(mag) } else { sum.sub(mag) };
        m += 1;
    }
    let (lam, b) = term_parts(a, t, acc.max_terms());
    let first_omitted = term_magnitude(lam, b, k).to_f64();
    let error_estimate = if acc.max_terms() > onset { first_omitted } else { f64::INFINITY };
    SeriesResult { value: sum.to_f64(), error_estimate, terms_used: acc.max_terms(), converged: false }
}

/// The discrete kernel `log^k(a*l+1) / (a*l+1)^t` fed to the
/// forward-difference tables. At `l = 0` this is 1 for `k = 0` and 0
/// otherwise.
pub fn basic_discrete(a: f64, t: f64, k: u32, l: u64) -> Result<f64> {
    if !a.is_finite() || a <= 0.0 {
        return Err(Error::Domain(format!("basic_discrete: a must be finite and > 0, got {a}")));
    }
    if !t.is_finite() || t <= 0.0 {
        return Err(Error::Domain(format!("basic_discrete: t must be finite and > 0, got {t}")));
    }
    Ok(basic_discrete_raw(a, t, k, l))
}

#[inline]
pub(crate) fn basic_discrete_raw(a: f64, t: f64, k: u32, l: u64) -> f64 {
    let lam = (a * l as f64 + 1.0).ln();
    lam.powi(k as i32) * (-t * lam).exp()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eta_point_rejects_bad_input() {
        assert!(EtaPoint::new(0.0, 1.0).is_err());
        assert!(EtaPoint::new(-1.0, 1.0).is_err());
        assert!(EtaPoint::new(1.0, 0.0).is_err());
        assert!(EtaPoint::new(f64::NAN, 1.0).is_err());
        assert!(EtaPoint::new(1.0, f64::INFINITY).is_err());
        assert!(EtaPoint::new(1.0, 1.0).is_ok());
    }

    #[test]
    fn accuracy_rejects_bad_input() {
        assert!(SeriesAccuracy::new(0, 1e-15).is_err());
        assert!(SeriesAccuracy::new(10, 0.0).is_err());
        assert!(SeriesAccuracy::new(10, -1.0).is_err());
        let d = SeriesAccuracy::default();
        assert_eq!(d.max_terms(), 100_000);
        assert_eq!(d.tol(), 1e-15);
    }

    #[test]
    fn logistic_values_at_zero() {
        assert_eq!(logistic(1.0, 0.0, 0).unwrap(), 0.5);
        assert_eq!(logistic(2.0, 0.0, 1).unwrap(), 0.5); // a/4 with a = 2
        assert_eq!(logistic(1.0, 0.0, 2).unwrap(), 0.0);
    }

    #[test]
    fn logistic_domain_errors() {
        assert!(logistic(0.0, 1.0, 0).is_err());
        assert!(logistic(1.0, -0.1, 0).is_err());
        assert!(logistic(1.0, 1.0, 3).is_err());
    }

    #[test]
    fn logistic_sign_structure() {
        // x kept below the f64 saturation point of 1/(1+e^(-ax))
        for &x in &[0.1, 1.0, 5.0, 15.0] {
            let f = logistic(1.5, x, 0).unwrap();
            assert!(f > 0.5 && f < 1.0);
            assert!(logistic(1.5, x, 1).unwrap() > 0.0);
            assert!(logistic(1.5, x, 2).unwrap() < 0.0);
        }
    }

    #[test]
    fn eta_at_log2_within_remainder() {
        let p = EtaPoint::new(1.0, 1.0).unwrap();
        let r = eta_direct(&p, &SeriesAccuracy::default());
        assert!(!r.converged);
        assert_eq!(r.terms_used, 100_000);
        assert!((r.value - std::f64::consts::LN_2).abs() <= r.error_estimate);
    }

    #[test]
    fn catalan_constant_at_t2() {
        // (a=2, t=2): first omitted term is ~1.2e-11, so 10 digits survive
        let p = EtaPoint::new(2.0, 2.0).unwrap();
        let r = eta_direct(&p, &SeriesAccuracy::default());
        assert!((r.value - 0.9159655941772190).abs() <= r.error_estimate);
        assert!((r.value - 0.9159655941772190).abs() < 2e-11);
    }

    #[test]
    fn large_t_converges_immediately() {
        let p = EtaPoint::new(1.0, 100.0).unwrap();
        let r = eta_direct(&p, &SeriesAccuracy::default());
        assert!(r.converged);
        assert_eq!(r.terms_used, 1);
        // limit is 1 - 2^-100 + ...; the one-term sum is 1 with that as the bound
        assert_eq!(r.value, 1.0);
        assert!((r.value - (1.0 - 2f64.powi(-100))).abs() <= r.error_estimate);
    }

    #[test]
    fn deriv_k0_equals_eta_direct() {
        let p = EtaPoint::new(1.0, 1.0).unwrap();
        let acc = SeriesAccuracy::default();
        assert_eq!(eta_direct(&p, &acc).value, eta_deriv_direct(&p, 0, &acc).value);
    }

    #[test]
    fn deriv_reference_at_t1_within_remainder() {
        let p = EtaPoint::new(1.0, 1.0).unwrap();
        let r = eta_deriv_direct(&p, 1, &SeriesAccuracy::default());
        let reference = 0.15986890374243097; // gamma ln2 - ln^2(2)/2
        assert!((r.value - reference).abs() <= r.error_estimate);
        assert!(r.value > 0.0);
    }

    #[test]
    fn small_t_reports_unconverged_without_bound() {
        // k = 2 at t = 0.05: the term peak sits far past 10^5 terms
        let p = EtaPoint::new(1.0, 0.05).unwrap();
        let r = eta_deriv_direct(&p, 2, &SeriesAccuracy::default());
        assert!(!r.converged);
        assert!(r.error_estimate.is_infinite());
    }

    #[test]
    fn basic_discrete_values() {
        assert_eq!(basic_discrete(1.0, 2.0, 0, 0).unwrap(), 1.0);
        assert_eq!(basic_discrete(1.0, 1.0, 1, 0).unwrap(), 0.0);
        let v = basic_discrete(1.0, 1.0, 1, 1).unwrap();
        assert!((v - std::f64::consts::LN_2 / 2.0).abs() < 1e-15);
        assert!(basic_discrete(-1.0, 1.0, 0, 0).is_err());
        assert!(basic_discrete(1.0, 0.0, 0, 0).is_err());
    }

    #[test]
    fn monotone_onset_peak_location() {
        // k=1, t=0.5: peak where a*m+1 = e^2
        assert_eq!(monotone_onset(1.0, 0.5, 1), (std::f64::consts::E.powi(2) - 1.0).ceil() as usize);
        assert_eq!(monotone_onset(1.0, 1.0, 0), 0);
        assert_eq!(monotone_onset(1.0, 0.01, 3), usize::MAX); // e^300 overflows
    }
}
